//! Value grids, markets, segmentations and the per-price utilities.
//!
//! Price indices are 0-based throughout the library: index `i` means price
//! `values[i]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on a market's total mass.
pub const MASS_TOL: f64 = 1e-12;

/// Tolerance used when comparing revenues for ties.
pub const TIE_TOL: f64 = 1e-12;

/// Strictly increasing, positive consumer values `v_1 < … < v_K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValueGrid {
    values: Vec<f64>,
}

impl ValueGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("value grid is empty"));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("values must be finite and positive"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("values must be strictly increasing"));
        }
        Ok(Self { values })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `(K - i) v_i` for 0-based `i`: the revenue a fully masked producer
    /// expects at price `v_i`, times `K`.
    pub fn weight(&self, i: usize) -> f64 {
        (self.k() - i) as f64 * self.values[i]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.weight(i)).collect()
    }

    /// `v_1 / v_2`, only meaningful for two values.
    pub fn eta(&self) -> Option<f64> {
        (self.k() == 2).then(|| self.values[0] / self.values[1])
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.k() {
            Ok(())
        } else {
            Err(Error::invalid(format!("price index {} out of range for K={}", i + 1, self.k())))
        }
    }

    pub(crate) fn check_market(&self, x: &Market) -> Result<()> {
        if x.k() == self.k() {
            Ok(())
        } else {
            Err(Error::invalid(format!("market has {} entries, grid has {}", x.k(), self.k())))
        }
    }
}

/// Probability mass over the value grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Market {
    mass: Vec<f64>,
}

impl Market {
    /// Validates nonnegativity and a total of one within [`MASS_TOL`]. Never
    /// renormalizes.
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::invalid("market is empty"));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid("market entries must be finite and nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("market sums to {total}, expected 1")));
        }
        Ok(Self { mass })
    }

    /// Explicit renormalization of a nonnegative vector with positive total.
    pub fn normalized(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid("market entries must be finite and nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("market has no mass"));
        }
        Ok(Self { mass: mass.into_iter().map(|m| m / total).collect() })
    }

    /// Construction for values already known to be a distribution (sampling,
    /// merges); skips the sum check.
    pub(crate) fn from_raw(mass: Vec<f64>) -> Self {
        Self { mass }
    }

    pub fn point_mass(k: usize, j: usize) -> Self {
        let mut mass = vec![0.0; k];
        mass[j] = 1.0;
        Self { mass }
    }

    /// Two-value market `(1 - α, α)`.
    pub fn two_point(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { mass: vec![1.0 - alpha, alpha] })
    }

    pub fn k(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Complementary CDF: entry `j` is the mass at or above `v_j`.
    pub fn ccdf(&self) -> Vec<f64> {
        ccdf(&self.mass)
    }

    pub fn tail(&self, i: usize) -> f64 {
        self.mass[i..].iter().sum()
    }
}

pub(crate) fn ccdf(mass: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; mass.len()];
    let mut acc = 0.0;
    for j in (0..mass.len()).rev() {
        acc += mass[j];
        y[j] = acc;
    }
    y
}

/// A (consumer utility, producer utility) pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SurplusPoint {
    pub consumer: f64,
    pub producer: f64,
}

// plain methods read better than operator overloads in the fold-heavy callers
#[allow(clippy::should_implement_trait)]
impl SurplusPoint {
    pub const fn new(consumer: f64, producer: f64) -> Self {
        Self { consumer, producer }
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.consumer * s, self.producer * s)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.consumer + o.consumer, self.producer + o.producer)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.consumer - o.consumer, self.producer - o.producer)
    }

    pub fn dist(self, o: Self) -> f64 {
        (self.consumer - o.consumer).hypot(self.producer - o.producer)
    }
}

/// Weighted decomposition of an aggregate market.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub parts: Vec<(f64, Market)>,
}

impl Segmentation {
    /// Checks weights sum to one and the parts average back to `aggregate`.
    pub fn new(parts: Vec<(f64, Market)>, aggregate: &Market) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("segmentation has no parts"));
        }
        if parts.iter().any(|(g, x)| !(0.0..=1.0 + MASS_TOL).contains(g) || x.k() != aggregate.k()) {
            return Err(Error::invalid("segment weights must lie in [0, 1] over the aggregate's grid"));
        }
        let seg = Self { parts };
        let total: f64 = seg.parts.iter().map(|(g, _)| g).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("segment weights sum to {total}")));
        }
        let mix = seg.aggregate();
        if mix.iter().zip(aggregate.mass()).any(|(a, b)| (a - b).abs() > 1e-10) {
            return Err(Error::invalid("segments do not aggregate to the declared market"));
        }
        Ok(seg)
    }

    pub fn aggregate(&self) -> Vec<f64> {
        let k = self.parts.first().map_or(0, |(_, x)| x.k());
        let mut out = vec![0.0; k];
        for (g, x) in &self.parts {
            for (o, m) in out.iter_mut().zip(x.mass()) {
                *o += g * m;
            }
        }
        out
    }
}

/// Revenue at price `v_i`: `v_i · y(i)`.
pub fn producer_utility(i: usize, x: &Market, grid: &ValueGrid) -> Result<f64> {
    grid.check_index(i)?;
    grid.check_market(x)?;
    Ok(producer_at(i, x.mass(), grid))
}

/// Consumer surplus at price `v_i`: `Σ_{k≥i} x_k (v_k − v_i)`.
pub fn consumer_utility(i: usize, x: &Market, grid: &ValueGrid) -> Result<f64> {
    grid.check_index(i)?;
    grid.check_market(x)?;
    Ok(consumer_at(i, x.mass(), grid))
}

pub fn total_surplus(x: &Market, grid: &ValueGrid) -> Result<f64> {
    grid.check_market(x)?;
    Ok(x.mass().iter().zip(grid.values()).map(|(m, v)| m * v).sum())
}

/// Best uniform prices for `x` (all ties, ascending) and the profit.
pub fn uniform_monopoly(x: &Market, grid: &ValueGrid) -> Result<(Vec<usize>, f64)> {
    grid.check_market(x)?;
    let profits: Vec<f64> = (0..grid.k()).map(|i| producer_at(i, x.mass(), grid)).collect();
    Ok(argmax_ties(&profits))
}

pub(crate) fn producer_at(i: usize, mass: &[f64], grid: &ValueGrid) -> f64 {
    grid.value(i) * mass[i..].iter().sum::<f64>()
}

pub(crate) fn consumer_at(i: usize, mass: &[f64], grid: &ValueGrid) -> f64 {
    let p = grid.value(i);
    mass[i..].iter().zip(&grid.values()[i..]).map(|(m, v)| m * (v - p)).sum()
}

pub(crate) fn utilities_at(i: usize, mass: &[f64], grid: &ValueGrid) -> SurplusPoint {
    SurplusPoint::new(consumer_at(i, mass, grid), producer_at(i, mass, grid))
}

/// Indices within [`TIE_TOL`] of the maximum, ascending, plus the maximum.
pub(crate) fn argmax_ties(scores: &[f64]) -> (Vec<usize>, f64) {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let set = (0..scores.len()).filter(|&i| scores[i] >= best - TIE_TOL).collect();
    (set, best)
}
