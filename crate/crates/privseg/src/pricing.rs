//! Posterior pricing under the masking mechanism.
//!
//! A producer who observes `x̂` knows it is the true market with probability
//! `1 − β` and a uniform draw otherwise. Under the uniform prior the expected
//! revenue of price `v_i` is `v_i((1−β) ŷ(i) + β (K−i)/K)` (0-based `i`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{argmax_ties, ccdf, Market, ValueGrid};

/// Slack allowed on the optimality inequalities when testing region
/// membership in floating point.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// `β` at or above this is treated as full masking.
pub const FULL_MASK: f64 = 1.0 - 1e-12;

pub fn posterior_score(i: usize, xhat: &Market, beta: f64, grid: &ValueGrid) -> Result<f64> {
    grid.check_index(i)?;
    grid.check_market(xhat)?;
    check_beta(beta)?;
    Ok(score_at(i, xhat.tail(i), beta, grid))
}

fn score_at(i: usize, tail: f64, beta: f64, grid: &ValueGrid) -> f64 {
    let k = grid.k() as f64;
    grid.value(i) * ((1.0 - beta) * tail + beta * (grid.k() - i) as f64 / k)
}

/// Every price maximizing the posterior score, ascending.
pub fn optimal_price_set(xhat: &Market, beta: f64, grid: &ValueGrid) -> Result<Vec<usize>> {
    grid.check_market(xhat)?;
    check_beta(beta)?;
    Ok(optimal_prices_for(xhat.mass(), beta, grid))
}

pub(crate) fn optimal_prices_for(mass: &[f64], beta: f64, grid: &ValueGrid) -> Vec<usize> {
    let y = ccdf(mass);
    let scores: Vec<f64> = (0..grid.k()).map(|i| score_at(i, y[i], beta, grid)).collect();
    argmax_ties(&scores).0
}

/// Observed high-value fraction above which `v_2` is optimal (two values).
/// Unclamped; may fall outside `[0, 1]`.
pub fn threshold_tstar(eta: f64, beta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta {eta} outside (0, 1)")));
    }
    check_beta(beta)?;
    if beta >= 1.0 {
        return Err(Error::invalid("threshold undefined at beta = 1"));
    }
    Ok((eta - beta / 2.0) / (1.0 - beta))
}

pub fn threshold_tstar_clamped(eta: f64, beta: f64) -> Result<f64> {
    Ok(threshold_tstar(eta, beta)?.clamp(0.0, 1.0))
}

/// Largest `β` for which each price is optimal for at least one observation.
///
/// `β̄_i = r/(1+r)` with `r = min_{j≠i} K(v_i − 1[j<i] v_j) / (w_j − w_i)`
/// over `j` with `w_j > w_i`; no such `j` means `β̄_i = 1`.
pub fn bar_beta_all(grid: &ValueGrid) -> Vec<f64> {
    let k = grid.k();
    let w = grid.weights();
    (0..k)
        .map(|i| {
            let r = (0..k)
                .filter(|&j| j != i && w[j] > w[i])
                .map(|j| {
                    let below = if j < i { grid.value(j) } else { 0.0 };
                    k as f64 * (grid.value(i) - below) / (w[j] - w[i])
                })
                .reduce(f64::min);
            match r {
                Some(r) => r / (1.0 + r),
                None => 1.0,
            }
        })
        .collect()
}

/// β̄ for every price together with which regions are nonempty at `beta`.
#[derive(Debug, Clone, Serialize)]
pub struct PricingRegions {
    pub beta: f64,
    pub bar_beta: Vec<f64>,
    pub feasible: Vec<bool>,
}

pub fn pricing_regions(grid: &ValueGrid, beta: f64) -> Result<PricingRegions> {
    check_beta(beta)?;
    let bar_beta = bar_beta_all(grid);
    let feasible = bar_beta.iter().map(|b| beta <= *b).collect();
    Ok(PricingRegions { beta, bar_beta, feasible })
}

/// Whether the normalized complementary CDF `y` (with `y[0] = 1`) describes a
/// market for which price `i` is posterior-optimal.
pub fn polytope_row_feasible(i: usize, y: &[f64], beta: f64, grid: &ValueGrid) -> Result<bool> {
    grid.check_index(i)?;
    check_beta(beta)?;
    if y.len() != grid.k() {
        return Err(Error::invalid("ratio vector length differs from K"));
    }
    if beta >= FULL_MASK {
        return Err(Error::invalid("membership test undefined at beta = 1"));
    }
    if (y[0] - 1.0).abs() > 1e-12 || y.windows(2).any(|p| p[1] > p[0] + 1e-12) || y[grid.k() - 1] < -1e-12 {
        return Err(Error::invalid("ratios must be nonincreasing from 1 down to >= 0"));
    }
    Ok(row_feasible(i, y, beta, grid))
}

pub(crate) fn row_feasible(i: usize, y: &[f64], beta: f64, grid: &ValueGrid) -> bool {
    let kappa = beta / (grid.k() as f64 * (1.0 - beta));
    let wi = grid.weight(i);
    let lhs_i = y[i] * grid.value(i);
    (0..grid.k()).all(|j| lhs_i - y[j] * grid.value(j) >= kappa * y[0] * (grid.weight(j) - wi) - MEMBERSHIP_TOL)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta {beta} outside [0, 1]")))
    }
}
