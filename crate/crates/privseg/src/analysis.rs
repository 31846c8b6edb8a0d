//! Comparative statics and privacy diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use privseg_lp::Sense;

use crate::error::{Error, Result};
use crate::geometry::{build_polytope, surplus_set_with, Solver};
use crate::measure::{shift_vector, ShiftVector};
use crate::model::{uniform_monopoly, Market, ValueGrid};
use crate::pricing::{bar_beta_all, check_beta, threshold_tstar};

/// Differences smaller than this are treated as flat when reading trends.
pub const DEADBAND: f64 = 1e-9;

/// Expected total-variation distance between posterior and prior.
pub fn privacy_leakage(beta: f64) -> f64 {
    1.0 - beta
}

/// Worst likelihood ratio between two true markets of observing a given
/// pricing region, with its logarithm. `None` means no masking at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpRatio {
    pub ratio: Option<f64>,
    pub log_ratio: Option<f64>,
}

pub fn dp_epsilon_ratio(beta: f64, region_probs: &[f64]) -> Result<DpRatio> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(DpRatio { ratio: None, log_ratio: None });
    }
    let ratio = region_probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| (1.0 - beta + beta * p) / (beta * p))
        .reduce(f64::max);
    Ok(DpRatio { ratio, log_ratio: ratio.map(f64::ln) })
}

/// Two values: the largest producer utility falls with `β` over the
/// interior range iff `α*` and `η` sit on the same side of one half.
pub fn max_producer_monotone(alpha_star: f64, eta: f64) -> bool {
    (alpha_star >= 0.5 && eta >= 0.5) || (alpha_star <= 0.5 && eta <= 0.5)
}

/// Two values: the smallest consumer utility rises with `β` iff `η ≥ 1/2`.
pub fn min_consumer_monotone(eta: f64) -> bool {
    eta >= 0.5
}

/// Whether some price is more attractive to a fully masked producer than the
/// uniform-monopoly price (ties in the latter broken toward the highest
/// masked revenue). When it holds, masking can push producer utility below
/// the uniform-pricing level.
pub fn crossing_condition(grid: &ValueGrid, x_star: &Market) -> Result<bool> {
    let (set, _) = uniform_monopoly(x_star, grid)?;
    let w = grid.weights();
    let rep = set.iter().map(|&j| w[j]).fold(f64::NEG_INFINITY, f64::max);
    Ok(w.iter().any(|wi| *wi > rep))
}

/// Whether the first-degree point is attainable before the shift: every
/// supported value must still be a feasible price.
pub fn q_inclusion(beta: f64, grid: &ValueGrid, x_star: &Market) -> Result<bool> {
    grid.check_market(x_star)?;
    check_beta(beta)?;
    let bars = bar_beta_all(grid);
    Ok(x_star.mass().iter().zip(&bars).filter(|(m, _)| **m > 0.0).all(|(_, b)| beta <= *b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsumerMaxTrend {
    /// The largest consumer utility decreases in `β`.
    Decreasing,
    /// Some aggregates near this one have an increasing stretch; not certified.
    IncreasingCandidate,
    Inconclusive,
}

/// Sufficient conditions on the direction of the consumer-optimal point.
///
/// Decreasing when the lowest price is uniform-optimal and the masked
/// revenues `(K+1−i)v_i` are nondecreasing; increasing-candidate when the
/// highest price is uniform-optimal and they are nonincreasing. For two
/// values the candidate comes with the aggregate `1/(2−η)`.
pub fn consumer_max_trend(grid: &ValueGrid, x_star: &Market) -> Result<(ConsumerMaxTrend, Option<f64>)> {
    let (set, _) = uniform_monopoly(x_star, grid)?;
    let w = grid.weights();
    let k = grid.k();
    if set.contains(&0) && w.windows(2).all(|p| p[1] >= p[0]) {
        return Ok((ConsumerMaxTrend::Decreasing, None));
    }
    if set.contains(&(k - 1)) && w.windows(2).all(|p| p[1] <= p[0]) {
        return Ok((ConsumerMaxTrend::IncreasingCandidate, grid.eta().map(|eta| 1.0 / (2.0 - eta))));
    }
    Ok((ConsumerMaxTrend::Inconclusive, None))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub leakage: f64,
    pub dp_epsilon_ratio: Option<f64>,
    pub dp_epsilon_log: Option<f64>,
    pub crossing: bool,
    pub q_included: bool,
    /// Two values only.
    pub max_producer_monotone: Option<bool>,
    pub min_consumer_monotone: Option<bool>,
    pub consumer_max_trend: ConsumerMaxTrend,
    pub alpha_tilde: Option<f64>,
}

pub fn diagnostics(grid: &ValueGrid, x_star: &Market, beta: f64, shift: &ShiftVector) -> Result<Diagnostics> {
    let dp = dp_epsilon_ratio(beta, &shift.per_region_prob)?;
    let (trend, alpha_tilde) = consumer_max_trend(grid, x_star)?;
    let eta = grid.eta();
    Ok(Diagnostics {
        leakage: privacy_leakage(beta),
        dp_epsilon_ratio: dp.ratio,
        dp_epsilon_log: dp.log_ratio,
        crossing: crossing_condition(grid, x_star)?,
        q_included: q_inclusion(beta, grid, x_star)?,
        max_producer_monotone: eta.map(|e| max_producer_monotone(x_star.mass()[1], e)),
        min_consumer_monotone: eta.map(min_consumer_monotone),
        consumer_max_trend: trend,
        alpha_tilde,
    })
}

/// Smallest producer utility over the polytope before the shift.
pub fn min_producer_prime(grid: &ValueGrid, x_star: &Market, beta: f64) -> Result<f64> {
    let poly = build_polytope(grid, x_star, beta)?;
    Ok(poly.optimize(poly.producer_coeffs(), Sense::Minimize, Solver::Float)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremaRow {
    pub beta: f64,
    pub max_producer: f64,
    pub min_producer: f64,
    pub max_consumer: f64,
    pub min_consumer: f64,
    /// Two-value closed forms, when both prices are attainable.
    pub closed_max_producer: Option<f64>,
    pub closed_min_consumer: Option<f64>,
}

/// Extremes of the attainable set along a grid of `β`, computed in parallel.
pub fn extrema_curves(
    grid: &ValueGrid,
    x_star: &Market,
    betas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ExtremaRow>> {
    extrema_curves_with(grid, x_star, betas, samples, seed, Solver::Float)
}

pub fn extrema_curves_with(
    grid: &ValueGrid,
    x_star: &Market,
    betas: &[f64],
    samples: usize,
    seed: u64,
    solver: Solver,
) -> Result<Vec<ExtremaRow>> {
    betas
        .par_iter()
        .map(|&beta| {
            let shift = shift_vector(beta, x_star, grid, samples, seed)?;
            let s = surplus_set_with(grid, x_star, beta, &shift, solver)?;
            let (closed_max_producer, closed_min_consumer) = match two_value_closed_forms(grid, x_star, beta) {
                Some((a, b)) => (Some(a), Some(b)),
                None => (None, None),
            };
            Ok(ExtremaRow {
                beta,
                max_producer: s.max_producer(),
                min_producer: s.min_producer(),
                max_consumer: s.max_consumer(),
                min_consumer: s.min_consumer(),
                closed_max_producer,
                closed_min_consumer,
            })
        })
        .collect()
}

fn two_value_closed_forms(grid: &ValueGrid, x_star: &Market, beta: f64) -> Option<(f64, f64)> {
    let eta = grid.eta()?;
    if beta > 2.0 * eta.min(1.0 - eta) || beta >= 1.0 {
        return None;
    }
    let t = threshold_tstar(eta, beta).ok()?;
    let (v1, v2) = (grid.value(0), grid.value(1));
    let a = x_star.mass()[1];
    let max_producer = a * v2 + (1.0 - a) * v1 - beta * (t * (a * v2 - v1) + (1.0 - a) * v1);
    let min_consumer = beta * t * a * (v2 - v1);
    Some((max_producer, min_consumer))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Constant,
    Increasing,
    Decreasing,
    NonMonotone,
}

/// Direction of a sequence, ignoring steps within `deadband`.
pub fn trend(values: &[f64], deadband: f64) -> Trend {
    let up = values.windows(2).any(|w| w[1] - w[0] > deadband);
    let down = values.windows(2).any(|w| w[0] - w[1] > deadband);
    match (up, down) {
        (false, false) => Trend::Constant,
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (true, true) => Trend::NonMonotone,
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_beta_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(Error::invalid(format!("beta grid '{spec}' is not start:stop:step")));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{s}' in beta grid")));
    let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
    if step.is_nan() || step <= 0.0 || b < a {
        return Err(Error::invalid("beta grid needs start <= stop and a positive step"));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| a + i as f64 * step).collect();
    grid.iter().try_for_each(|b| check_beta(*b))?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::shift_vector;
    use crate::model::total_surplus;

    fn example_grid() -> ValueGrid {
        ValueGrid::new(vec![0.8, 2.0, 3.0, 4.2, 5.0]).unwrap()
    }

    fn m(v: &[f64]) -> Market {
        Market::new(v.to_vec()).unwrap()
    }

    #[test]
    fn leakage() {
        assert_eq!(privacy_leakage(0.0), 1.0);
        assert_eq!(privacy_leakage(1.0), 0.0);
        assert!((privacy_leakage(0.3) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn dp_ratio_examples() {
        let r = dp_epsilon_ratio(0.2, &[0.625, 0.375]).unwrap().ratio.unwrap();
        assert!((r - 0.875 / 0.075).abs() < 1e-12);
        assert!((r - 11.67).abs() < 0.01);
        let r = dp_epsilon_ratio(1.0, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(r.ratio, Some(1.0));
        assert_eq!(r.log_ratio, Some(0.0));
        assert_eq!(dp_epsilon_ratio(0.0, &[0.5, 0.5]).unwrap().ratio, None);
    }

    #[test]
    fn dp_ratio_falls_with_masking() {
        let g = ValueGrid::new(vec![0.45, 1.0]).unwrap();
        let mut last = f64::INFINITY;
        for i in 1..=20 {
            let beta = i as f64 * 0.04;
            let c = shift_vector(beta, &Market::two_point(0.5).unwrap(), &g, 1, 0).unwrap();
            let r = dp_epsilon_ratio(beta, &c.per_region_prob).unwrap().ratio.unwrap();
            assert!(r <= last + 1e-12);
            last = r;
        }
    }

    #[test]
    fn two_value_monotonicity_flags() {
        assert!(max_producer_monotone(0.7, 0.7));
        assert!(!max_producer_monotone(0.7, 0.3));
        assert!(max_producer_monotone(0.5, 0.5));
        assert!(min_consumer_monotone(0.6));
        assert!(!min_consumer_monotone(0.4));
        assert!(min_consumer_monotone(0.5));
    }

    #[test]
    fn crossing_on_example_aggregates() {
        let g = example_grid();
        assert!(!crossing_condition(&g, &m(&[0.2, 0.1, 0.4, 0.2, 0.1])).unwrap());
        assert!(crossing_condition(&g, &m(&[0.2, 0.3, 0.2, 0.2, 0.1])).unwrap());
        assert!(crossing_condition(&g, &m(&[0.2, 0.1, 0.1, 0.05, 0.55])).unwrap());
    }

    #[test]
    fn crossing_two_values() {
        for eta in [0.3, 0.45, 0.55, 0.7] {
            let g = ValueGrid::new(vec![eta, 1.0]).unwrap();
            for alpha in [0.1, 0.35, 0.5, 0.65, 0.9] {
                let want = (alpha >= eta && eta >= 0.5) || (alpha <= eta && eta <= 0.5);
                let got = crossing_condition(&g, &Market::two_point(alpha).unwrap()).unwrap();
                assert_eq!(got, want, "eta {eta} alpha {alpha}");
            }
        }
    }

    #[test]
    fn crossing_predicts_dip_below_uniform_profit() {
        let g = example_grid();
        for (x, crosses) in [
            (m(&[0.2, 0.1, 0.4, 0.2, 0.1]), false),
            (m(&[0.2, 0.3, 0.2, 0.2, 0.1]), true),
            (m(&[0.2, 0.1, 0.1, 0.05, 0.55]), true),
        ] {
            let (_, pi) = uniform_monopoly(&x, &g).unwrap();
            let low = min_producer_prime(&g, &x, 0.3).unwrap();
            assert_eq!(low < pi - 1e-9, crosses, "{low} vs {pi}");
        }
    }

    #[test]
    fn q_inclusion_examples() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        assert!(q_inclusion(0.3, &g, &x).unwrap());
        assert!(!q_inclusion(0.5, &g, &x).unwrap());
        assert!(q_inclusion(0.0, &g, &x).unwrap());
        // unsupported low value does not count
        assert!(q_inclusion(0.5, &g, &m(&[0.0, 0.3, 0.3, 0.2, 0.2])).unwrap());
    }

    #[test]
    fn consumer_trend_two_values() {
        let g = ValueGrid::new(vec![0.4, 1.0]).unwrap();
        let (c, _) = consumer_max_trend(&g, &Market::two_point(0.3).unwrap()).unwrap();
        assert_eq!(c, ConsumerMaxTrend::Decreasing);
        let g = ValueGrid::new(vec![0.6, 1.0]).unwrap();
        let (c, a) = consumer_max_trend(&g, &Market::two_point(0.8).unwrap()).unwrap();
        assert_eq!(c, ConsumerMaxTrend::IncreasingCandidate);
        assert!((a.unwrap() - 1.0 / 1.4).abs() < 1e-15);
        let (c, _) = consumer_max_trend(&g, &Market::two_point(0.3).unwrap()).unwrap();
        assert_eq!(c, ConsumerMaxTrend::Inconclusive);
    }

    #[test]
    fn consumer_trend_three_values() {
        // masked revenues (3, 4, 3) are neither monotone
        let g = ValueGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        for x in [m(&[0.8, 0.1, 0.1]), m(&[0.1, 0.1, 0.8])] {
            assert_eq!(consumer_max_trend(&g, &x).unwrap().0, ConsumerMaxTrend::Inconclusive);
        }
        let g = ValueGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(consumer_max_trend(&g, &m(&[0.8, 0.1, 0.1])).unwrap().0, ConsumerMaxTrend::Decreasing);
    }

    #[test]
    fn unmasked_row_of_curves() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        let rows = extrema_curves(&g, &x, &[0.0], 1000, 0).unwrap();
        let ts = total_surplus(&x, &g).unwrap();
        assert!((rows[0].max_producer - ts).abs() < 1e-9);
        assert!((rows[0].min_producer - 2.1).abs() < 1e-9);
        assert!((rows[0].max_consumer - (ts - 2.1)).abs() < 1e-9);
        assert!(rows[0].min_consumer.abs() < 1e-9);
    }

    #[test]
    fn two_value_closed_forms_agree() {
        let g = ValueGrid::new(vec![0.4, 1.0]).unwrap();
        let x = Market::two_point(0.5).unwrap();
        let betas: Vec<f64> = (0..=16).map(|i| i as f64 * 0.05).collect();
        for r in extrema_curves(&g, &x, &betas, 1, 0).unwrap() {
            if let (Some(a), Some(b)) = (r.closed_max_producer, r.closed_min_consumer) {
                assert!((a - r.max_producer).abs() < 1e-7 && (b - r.min_consumer).abs() < 1e-7, "{r:?}");
            } else {
                assert!(r.beta > 0.8 - 1e-12);
            }
        }
    }

    #[test]
    fn trends_and_grids() {
        assert_eq!(trend(&[1.0, 1.0, 1.0 + 1e-12], DEADBAND), Trend::Constant);
        assert_eq!(trend(&[1.0, 2.0, 2.0], DEADBAND), Trend::Increasing);
        assert_eq!(trend(&[1.0, 2.0, 1.5], DEADBAND), Trend::NonMonotone);
        let g = parse_beta_grid("0:0.6:0.01").unwrap();
        assert_eq!(g.len(), 61);
        assert!((g[60] - 0.6).abs() < 1e-12);
        assert!(parse_beta_grid("0:2:0.5").is_err());
        assert!(parse_beta_grid("0:1").is_err());
    }
}
