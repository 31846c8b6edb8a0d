//! Brute-force ground truth for tiny instances.
//!
//! Markets are restricted to a lattice with denominator `D`. Every way of
//! assigning distinct prices to at most `K` lattice markets that are optimal
//! for those prices, and whose nonnegative weights reproduce `x*` exactly, is
//! an attainable segmentation; its utility point must lie in the computed set.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::ShiftVector;
use crate::model::{ccdf, utilities_at, Market, SurplusPoint, ValueGrid};
use crate::polygon::SurplusPolygon;
use crate::pricing::{check_beta, optimal_prices_for, row_feasible, FULL_MASK};

pub const MAX_CANDIDATES: u64 = 10_000_000;
pub const MAX_LATTICE: u32 = 20;
pub const MAX_VALUES: usize = 3;

/// Points outside the polygon by more than this count as violations.
pub const CONTAINMENT_MARGIN: f64 = 1e-6;

type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCloud {
    pub points: Vec<SurplusPoint>,
    pub denominator: u32,
    pub segment_budget: usize,
    /// Price/market assignments examined.
    pub candidates: u64,
    /// Whether enumeration stopped at [`MAX_CANDIDATES`].
    pub capped: bool,
}

impl GridCloud {
    pub fn hull(&self) -> SurplusPolygon {
        SurplusPolygon::from_points(&self.points)
    }
}

fn compositions(total: i64, parts: usize) -> Vec<Vec<i64>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Unique nonnegative solution of `Σ_s γ_s counts[s] = target`, if any.
fn solve_weights(counts: &[&Vec<i64>], target: &[i64]) -> Option<Vec<Q>> {
    let k = target.len();
    let s = counts.len();
    let mut a: Vec<Vec<Q>> = (0..k)
        .map(|r| {
            let mut row: Vec<Q> = counts.iter().map(|c| Q::from_integer(c[r] as i128)).collect();
            row.push(Q::from_integer(target[r] as i128));
            row
        })
        .collect();
    // pivots land on the diagonal; a missing one means no unique solution
    for col in 0..s {
        let found = (col..k).find(|&r| a[r][col] != Q::from_integer(0))?;
        a.swap(col, found);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            let f = row[col];
            if r != col && f != Q::from_integer(0) {
                for (x, pv) in row.iter_mut().zip(&pivot) {
                    *x -= f * pv;
                }
            }
        }
    }
    if a[s..].iter().any(|row| row[s] != Q::from_integer(0)) {
        return None;
    }
    let gamma: Vec<Q> = (0..s).map(|r| a[r][s]).collect();
    gamma.iter().all(|g| *g >= Q::from_integer(0)).then_some(gamma)
}

/// Utility points of all lattice segmentations with at most `K` segments,
/// mapped through the shift like the attainable set.
pub fn enumerate_cloud(
    grid: &ValueGrid,
    x_star: &Market,
    beta: f64,
    denominator: u32,
    shift: &ShiftVector,
) -> Result<GridCloud> {
    grid.check_market(x_star)?;
    check_beta(beta)?;
    let k = grid.k();
    if k > MAX_VALUES {
        return Err(Error::invalid(format!("oracle supports at most {MAX_VALUES} values")));
    }
    if denominator == 0 || denominator > MAX_LATTICE {
        return Err(Error::invalid(format!("lattice denominator must be in 1..={MAX_LATTICE}")));
    }
    let d = denominator as i64;
    let target: Vec<i64> = x_star.mass().iter().map(|m| (m * d as f64).round() as i64).collect();
    let off_lattice = x_star.mass().iter().zip(&target).any(|(m, n)| (m * d as f64 - *n as f64).abs() > 1e-9);
    if off_lattice || target.iter().sum::<i64>() != d {
        return Err(Error::invalid(format!("aggregate is not on the 1/{denominator} lattice")));
    }

    let markets = compositions(d, k);
    let masses: Vec<Vec<f64>> = markets.iter().map(|c| c.iter().map(|n| *n as f64 / d as f64).collect()).collect();
    let mut by_price: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, mass) in masses.iter().enumerate() {
        let prices = if beta >= FULL_MASK {
            optimal_prices_for(mass, beta, grid)
        } else {
            let y = ccdf(mass);
            (0..k).filter(|&i| row_feasible(i, &y, beta, grid)).collect()
        };
        for p in prices {
            by_price[p].push(idx);
        }
    }

    // One task per (price subset, first market); each enumerates the rest.
    let mut tasks: Vec<(Vec<usize>, usize, u64)> = Vec::new();
    for mask in 1u32..(1 << k) {
        let prices: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let rest: u64 = prices[1..].iter().map(|&p| by_price[p].len() as u64).product();
        for &first in &by_price[prices[0]] {
            tasks.push((prices.clone(), first, rest));
        }
    }
    let mut budget_left = MAX_CANDIDATES;
    let mut capped = false;
    let budgets: Vec<u64> = tasks
        .iter()
        .map(|t| {
            let take = t.2.min(budget_left);
            capped |= take < t.2;
            budget_left -= take;
            take
        })
        .collect();

    let c = shift.point();
    let chunks: Vec<(Vec<SurplusPoint>, u64)> = tasks
        .par_iter()
        .zip(&budgets)
        .map(|((prices, first, _), &budget)| {
            let mut points = Vec::new();
            let mut seen = 0u64;
            let mut choice = vec![0usize; prices.len()];
            let lens: Vec<usize> = prices.iter().map(|&p| by_price[p].len()).collect();
            while seen < budget {
                seen += 1;
                let idx: Vec<usize> = (0..prices.len())
                    .map(|s| if s == 0 { *first } else { by_price[prices[s]][choice[s]] })
                    .collect();
                let counts: Vec<&Vec<i64>> = idx.iter().map(|&i| &markets[i]).collect();
                if let Some(gamma) = solve_weights(&counts, &target) {
                    let mut u = SurplusPoint::default();
                    for ((g, &i), &p) in gamma.iter().zip(&idx).zip(prices) {
                        let g = *g.numer() as f64 / *g.denom() as f64;
                        u = u.add(utilities_at(p, &masses[i], grid).scale(g));
                    }
                    points.push(c.scale(beta).add(u.scale(1.0 - beta)));
                }
                // odometer over segments 1..
                let mut s = prices.len();
                loop {
                    if s <= 1 {
                        break;
                    }
                    s -= 1;
                    choice[s] += 1;
                    if choice[s] < lens[s] {
                        break;
                    }
                    choice[s] = 0;
                }
            }
            (points, seen)
        })
        .collect();

    let mut points = Vec::new();
    let mut candidates = 0;
    for (p, n) in chunks {
        points.extend(p);
        candidates += n;
    }
    Ok(GridCloud { points, denominator, segment_budget: k, candidates, capped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub points: usize,
    pub violations: usize,
    /// Largest signed distance of a cloud point from the polygon; `None` for
    /// an empty cloud.
    pub max_excess: Option<f64>,
}

pub fn containment_report(cloud: &GridCloud, polygon: &SurplusPolygon) -> ContainmentReport {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for p in &cloud.points {
        let d = polygon.signed_distance(*p);
        if d > CONTAINMENT_MARGIN {
            violations += 1;
        }
        worst = worst.max(d);
    }
    ContainmentReport { points: cloud.points.len(), violations, max_excess: worst.is_finite().then_some(worst) }
}
