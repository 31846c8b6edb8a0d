//! Explicit segmentations: recovered from polytope points, and reduced to at
//! most one segment per price.

use std::collections::BTreeMap;

use serde::Serialize;

use privseg_lp::{solve, solve_exact, to_f64_solution, LinearProgram, Sense, Status};

use crate::error::{Error, Result};
use crate::geometry::{build_polytope, Solver};
use crate::measure::ShiftVector;
use crate::model::{argmax_ties, ccdf, utilities_at, Market, Segmentation, SurplusPoint, ValueGrid};
use crate::pricing::{check_beta, optimal_prices_for, threshold_tstar, FULL_MASK};

/// Segments lighter than this are dropped.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Slack on posterior optimality when checking an assigned price. Looser than
/// the tie tolerance so LP-recovered segments on a region boundary pass.
pub const ASSIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricedPart {
    pub weight: f64,
    pub market: Market,
    /// 0-based price index.
    pub price: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricedSegmentation {
    pub parts: Vec<PricedPart>,
}

impl PricedSegmentation {
    pub fn aggregate(&self) -> Vec<f64> {
        let k = self.parts.first().map_or(0, |p| p.market.k());
        let mut out = vec![0.0; k];
        for p in &self.parts {
            for (o, m) in out.iter_mut().zip(p.market.mass()) {
                *o += p.weight * m;
            }
        }
        out
    }

    /// Utilities when every segment is priced at its assigned price.
    pub fn unmasked_point(&self, grid: &ValueGrid) -> SurplusPoint {
        self.parts
            .iter()
            .fold(SurplusPoint::default(), |acc, p| acc.add(utilities_at(p.price, p.market.mass(), grid).scale(p.weight)))
    }

    /// Expected utilities under the mechanism: `β c + (1−β)·unmasked`.
    pub fn surplus_point(&self, beta: f64, shift: SurplusPoint, grid: &ValueGrid) -> SurplusPoint {
        shift.scale(beta).add(self.unmasked_point(grid).scale(1.0 - beta))
    }

    pub fn is_canonical(&self) -> bool {
        self.parts.windows(2).all(|w| w[0].price < w[1].price)
    }
}

/// Reads a segmentation off a polytope point: row `i` has weight `z(i,1)`
/// and complementary CDF `z(i,·)/z(i,1)`.
pub fn build_segmentation(z: &[f64], grid: &ValueGrid, x_star: &Market, beta: f64) -> Result<PricedSegmentation> {
    let poly = build_polytope(grid, x_star, beta)?;
    if z.len() != poly.lp().n_vars() {
        return Err(Error::invalid("polytope point has the wrong length"));
    }
    let violation = poly.lp().max_violation(z);
    if violation > 1e-8 {
        return Err(Error::invalid(format!("point violates the polytope by {violation:e}")));
    }
    let k = grid.k();
    let mut parts = Vec::new();
    for i in 0..k {
        let row = &z[i * k..(i + 1) * k];
        let gamma = row[0];
        if gamma < WEIGHT_TOL {
            continue;
        }
        let mass: Vec<f64> = (0..k)
            .map(|j| {
                let next = if j + 1 < k { row[j + 1] } else { 0.0 };
                ((row[j] - next) / gamma).max(0.0)
            })
            .collect();
        let total: f64 = mass.iter().sum();
        let market = Market::from_raw(mass.into_iter().map(|m| m / total).collect());
        parts.push(PricedPart { weight: gamma, market, price: i });
    }
    Ok(PricedSegmentation { parts })
}

/// Largest L1 gap between a requested point and the closest attainable one
/// that still counts as reaching it.
pub const TARGET_TOL: f64 = 1e-9;

/// A canonical segmentation whose expected utilities are `target`.
///
/// Minimizes the L1 distance between the pre-shift utilities of a polytope
/// point and `(target − βc)/(1−β)`; fails if that distance exceeds
/// [`TARGET_TOL`]. Returns the segmentation and the point it attains.
pub fn segmentation_for_target(
    grid: &ValueGrid,
    x_star: &Market,
    beta: f64,
    shift: &ShiftVector,
    target: SurplusPoint,
    solver: Solver,
) -> Result<(PricedSegmentation, SurplusPoint)> {
    check_beta(beta)?;
    if beta >= FULL_MASK {
        let gap = target.sub(shift.point());
        if gap.consumer.abs() + gap.producer.abs() > TARGET_TOL {
            return Err(Error::invalid("under full masking only the shift point is attainable"));
        }
        let price = optimal_prices_for(x_star.mass(), beta, grid)[0];
        let seg = PricedSegmentation { parts: vec![PricedPart { weight: 1.0, market: x_star.clone(), price }] };
        return Ok((seg, shift.point()));
    }
    let poly = build_polytope(grid, x_star, beta)?;
    let pre = target.sub(shift.point().scale(beta)).scale(1.0 / (1.0 - beta));
    let n = poly.lp().n_vars();
    // columns: z, then consumer excess/deficit, producer excess/deficit
    let mut lp = LinearProgram::new(n + 4);
    let pad = |coeffs: &[f64], tail: [f64; 4]| {
        let mut row = coeffs.to_vec();
        row.extend(tail);
        row
    };
    for r in poly.lp().rows() {
        lp.push(pad(&r.coeffs, [0.0; 4]), r.relation, r.rhs);
    }
    lp.eq(pad(&poly.consumer_coeffs(), [-1.0, 1.0, 0.0, 0.0]), pre.consumer);
    lp.eq(pad(&poly.producer_coeffs(), [0.0, 0.0, -1.0, 1.0]), pre.producer);
    let mut objective = vec![0.0; n];
    objective.extend([1.0; 4]);
    lp.set_objective(objective);
    let sol = match solver {
        Solver::Float => solve(&lp, Sense::Minimize)?,
        Solver::Exact => to_f64_solution(&solve_exact(&lp, Sense::Minimize)?),
    };
    if sol.status != Status::Optimal {
        return Err(Error::numerical(format!("target search ended {:?}", sol.status)));
    }
    // distance in the shifted plane
    let gap = sol.objective_value * (1.0 - beta);
    if gap > TARGET_TOL {
        return Err(Error::invalid(format!("target lies outside the attainable set (L1 gap {gap:e})")));
    }
    let z: Vec<f64> = sol.point[..n].iter().map(|v| v.max(0.0)).collect();
    let seg = build_segmentation(&z, grid, x_star, beta)?;
    let achieved = seg.surplus_point(beta, shift.point(), grid);
    Ok((seg, achieved))
}

/// How a segment with several optimal prices is priced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TieRule {
    Lowest,
    Highest,
    /// Weight `1−δ` to the lowest tied price and `δ` to the highest.
    Split(f64),
}

/// Prices every segment optimally (ties per `tie`), then merges segments
/// sharing a price.
pub fn merge_to_canonical(seg: &Segmentation, tie: TieRule, beta: f64, grid: &ValueGrid) -> Result<PricedSegmentation> {
    check_beta(beta)?;
    if let TieRule::Split(d) = tie {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::invalid(format!("split {d} outside [0, 1]")));
        }
    }
    let mut priced = Vec::with_capacity(seg.parts.len());
    for (g, x) in &seg.parts {
        grid.check_market(x)?;
        let set = optimal_prices_for(x.mass(), beta, grid);
        let (lo, hi) = (set[0], set[set.len() - 1]);
        match tie {
            TieRule::Lowest => priced.push(PricedPart { weight: *g, market: x.clone(), price: lo }),
            TieRule::Highest => priced.push(PricedPart { weight: *g, market: x.clone(), price: hi }),
            TieRule::Split(d) if lo != hi => {
                priced.push(PricedPart { weight: g * (1.0 - d), market: x.clone(), price: lo });
                priced.push(PricedPart { weight: g * d, market: x.clone(), price: hi });
            }
            TieRule::Split(_) => priced.push(PricedPart { weight: *g, market: x.clone(), price: lo }),
        }
    }
    merge_priced(priced, beta, grid)
}

/// Merges segments with equal assigned prices into their weighted mixture.
/// Fails if an assigned price is not posterior-optimal for its segment.
pub fn merge_priced(parts: Vec<PricedPart>, beta: f64, grid: &ValueGrid) -> Result<PricedSegmentation> {
    check_beta(beta)?;
    let mut groups: BTreeMap<usize, Vec<PricedPart>> = BTreeMap::new();
    for p in parts {
        grid.check_index(p.price)?;
        grid.check_market(&p.market)?;
        if p.weight.is_nan() || p.weight < 0.0 {
            return Err(Error::invalid("segment weights must be nonnegative"));
        }
        if !assigned_price_is_optimal(&p, beta, grid) {
            return Err(Error::invalid(format!("price index {} is not optimal for its segment", p.price + 1)));
        }
        if p.weight >= WEIGHT_TOL {
            groups.entry(p.price).or_default().push(p);
        }
    }
    let parts = groups
        .into_iter()
        .map(|(price, mut group)| {
            if group.len() == 1 {
                return group.pop().expect("nonempty group");
            }
            let weight: f64 = group.iter().map(|p| p.weight).sum();
            let k = grid.k();
            let mut mass = vec![0.0; k];
            for p in &group {
                for (m, x) in mass.iter_mut().zip(p.market.mass()) {
                    *m += p.weight * x;
                }
            }
            mass.iter_mut().for_each(|m| *m /= weight);
            PricedPart { weight, market: Market::from_raw(mass), price }
        })
        .collect();
    Ok(PricedSegmentation { parts })
}

fn assigned_price_is_optimal(p: &PricedPart, beta: f64, grid: &ValueGrid) -> bool {
    let y = ccdf(p.market.mass());
    let k = grid.k() as f64;
    let scores: Vec<f64> = (0..grid.k())
        .map(|i| grid.value(i) * ((1.0 - beta) * y[i] + beta * (grid.k() - i) as f64 / k))
        .collect();
    let (_, best) = argmax_ties(&scores);
    scores[p.price] >= best - ASSIGN_TOL * best.abs().max(1.0)
}

/// Expected utilities of a two-value segment `(1−α, α)` under the mechanism;
/// at `α = t*` a fraction `δ` of it is priced high.
pub fn k2_expected_utilities(alpha: f64, delta: f64, v1: f64, v2: f64, beta: f64) -> Result<SurplusPoint> {
    if !(v1 > 0.0 && v2 > v1) {
        return Err(Error::invalid("need 0 < v1 < v2"));
    }
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid("alpha and delta must lie in [0, 1]"));
    }
    check_beta(beta)?;
    let eta = v1 / v2;
    if beta > 2.0 * eta.min(1.0 - eta) {
        return Err(Error::invalid("both prices must be attainable (beta <= 2 min(eta, 1 - eta))"));
    }
    let t = if beta >= FULL_MASK { 0.5 } else { threshold_tstar(eta, beta)? };
    let gap = v2 - v1;
    let low = SurplusPoint::new(
        (1.0 - beta + beta * t) * alpha * gap,
        (1.0 - beta + beta * t) * v1 + beta * (1.0 - t) * alpha * v2,
    );
    let high = SurplusPoint::new(beta * t * alpha * gap, beta * t * v1 + (1.0 - beta + beta * (1.0 - t)) * alpha * v2);
    Ok(if (alpha - t).abs() <= 1e-12 {
        low.scale(1.0 - delta).add(high.scale(delta))
    } else if alpha < t {
        low
    } else {
        high
    })
}
