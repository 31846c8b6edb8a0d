//! Uniform sampling on the simplex, pricing-region probabilities and the
//! shift vector earned on fully masked observations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{argmax_ties, utilities_at, Market, SurplusPoint, ValueGrid};
use crate::pricing::{check_beta, optimal_prices_for, threshold_tstar, FULL_MASK};

pub const DEFAULT_SAMPLES: usize = 1_000_000;

/// Draws per RNG stream. Fixed so results do not depend on the thread count.
pub(crate) const SHARD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    pub(crate) fn exact(value: f64, seed: u64) -> Self {
        Self { value, std_error: 0.0, samples: 0, seed }
    }
}

/// Count, sum and sum of squares of a scalar stream.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn estimate(&self, seed: u64) -> McEstimate {
        McEstimate { value: self.mean(), std_error: self.std_error(), samples: self.n as usize, seed }
    }
}

/// Splits `n` draws into fixed-size shards, each on its own ChaCha stream,
/// and returns the per-shard results in shard order.
pub(crate) fn run_sharded<A, F>(n: usize, seed: u64, work: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
{
    let shards = n.div_ceil(SHARD);
    (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            work(&mut rng, SHARD.min(n - s * SHARD))
        })
        .collect()
}

/// Flat-Dirichlet market via normalized standard exponentials.
pub fn sample_uniform_market<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Market {
    Market::from_raw(sample_mass(rng, k))
}

pub(crate) fn sample_mass<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let mut v: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// Probability that a uniform observation falls in each pricing region.
///
/// Exact for `K ≤ 2` and for full masking; Monte Carlo otherwise.
pub fn region_probabilities(beta: f64, grid: &ValueGrid, samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_inputs(beta, samples)?;
    if let Some(p) = exact_region_probabilities(beta, grid) {
        return Ok(p.into_iter().map(|v| McEstimate::exact(v, seed)).collect());
    }
    region_probabilities_mc(beta, grid, samples, seed)
}

/// Monte Carlo estimate regardless of whether a closed form exists. Ties are
/// split evenly among the tied prices.
pub fn region_probabilities_mc(beta: f64, grid: &ValueGrid, samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_inputs(beta, samples)?;
    let k = grid.k();
    let shards = run_sharded(samples, seed, |rng, len| {
        let mut acc = vec![Moments::default(); k];
        let mut share = vec![0.0; k];
        for _ in 0..len {
            let mass = sample_mass(rng, k);
            let set = optimal_prices_for(&mass, beta, grid);
            share.iter_mut().for_each(|s| *s = 0.0);
            let w = 1.0 / set.len() as f64;
            for &i in &set {
                share[i] = w;
            }
            for (a, s) in acc.iter_mut().zip(&share) {
                a.push(*s);
            }
        }
        acc
    });
    let mut total = vec![Moments::default(); k];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    Ok(total.iter().map(|m| m.estimate(seed)).collect())
}

fn exact_region_probabilities(beta: f64, grid: &ValueGrid) -> Option<Vec<f64>> {
    let k = grid.k();
    if k == 1 {
        return Some(vec![1.0]);
    }
    if beta >= FULL_MASK {
        let (set, _) = argmax_ties(&grid.weights());
        let mut p = vec![0.0; k];
        for &i in &set {
            p[i] = 1.0 / set.len() as f64;
        }
        return Some(p);
    }
    if k == 2 {
        let t = threshold_tstar(grid.eta()?, beta).ok()?.clamp(0.0, 1.0);
        return Some(vec![t, 1.0 - t]);
    }
    None
}

fn check_inputs(beta: f64, samples: usize) -> Result<()> {
    check_beta(beta)?;
    if samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    Ok(())
}

/// Expected (consumer, producer) utilities on the aggregate when the
/// producer prices a uniformly masked observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftVector {
    pub consumer: f64,
    pub producer: f64,
    pub consumer_std_error: f64,
    pub producer_std_error: f64,
    pub per_region_prob: Vec<f64>,
    pub per_region_std_error: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub exact: bool,
}

impl ShiftVector {
    pub fn point(&self) -> SurplusPoint {
        SurplusPoint::new(self.consumer, self.producer)
    }

    /// Builds the shift from given region probabilities (treated as exact).
    pub fn from_probabilities(probs: &[f64], x_star: &Market, grid: &ValueGrid) -> Result<Self> {
        grid.check_market(x_star)?;
        if probs.len() != grid.k() {
            return Err(Error::invalid("one probability per price expected"));
        }
        let est: Vec<McEstimate> = probs.iter().map(|p| McEstimate::exact(*p, 0)).collect();
        Ok(assemble(&est, x_star, grid, 0, true))
    }
}

pub fn shift_vector(beta: f64, x_star: &Market, grid: &ValueGrid, samples: usize, seed: u64) -> Result<ShiftVector> {
    grid.check_market(x_star)?;
    let probs = region_probabilities(beta, grid, samples, seed)?;
    let exact = probs.iter().all(|p| p.samples == 0);
    Ok(assemble(&probs, x_star, grid, if exact { 0 } else { samples }, exact))
}

fn assemble(probs: &[McEstimate], x_star: &Market, grid: &ValueGrid, samples: usize, exact: bool) -> ShiftVector {
    let utils: Vec<SurplusPoint> = (0..grid.k()).map(|i| utilities_at(i, x_star.mass(), grid)).collect();
    let p: Vec<f64> = probs.iter().map(|e| e.value).collect();
    let c = p.iter().zip(&utils).fold(SurplusPoint::default(), |acc, (p, u)| acc.add(u.scale(*p)));
    // The shift is a mean of one categorical draw per sample, so its variance
    // is Σp·u² − (Σp·u)² over n.
    let se = |f: fn(&SurplusPoint) -> f64, mean: f64| {
        if exact {
            return 0.0;
        }
        let second: f64 = p.iter().zip(&utils).map(|(p, u)| p * f(u) * f(u)).sum();
        ((second - mean * mean).max(0.0) / samples as f64).sqrt()
    };
    ShiftVector {
        consumer: c.consumer,
        producer: c.producer,
        consumer_std_error: se(|u| u.consumer, c.consumer),
        producer_std_error: se(|u| u.producer, c.producer),
        per_region_prob: p,
        per_region_std_error: probs.iter().map(|e| e.std_error).collect(),
        samples,
        seed: probs.first().map_or(0, |e| e.seed),
        exact,
    }
}
