//! Monte Carlo run of the masking mechanism against a priced segmentation.
//!
//! Each trial draws a segment by weight, shows the producer either the true
//! segment market (probability `1−β`) or a uniform draw, lets the producer
//! pick a posterior-optimal price, and scores the utilities that price earns
//! on the true segment.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{run_sharded, sample_mass, McEstimate, Moments, ShiftVector};
use crate::model::{utilities_at, SurplusPoint, ValueGrid};
use crate::pricing::{check_beta, optimal_prices_for};
use crate::segmentation::PricedSegmentation;

pub const DEFAULT_TRIALS: usize = 1_000_000;

/// Choice among several posterior-optimal prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    Lowest,
    Highest,
    #[default]
    UniformRandom,
    /// The segment's assigned price if it is among the tied ones, else the lowest.
    Assigned,
}

/// Which observations the producer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Channel {
    #[default]
    Mechanism,
    AlwaysMasked,
    NeverMasked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub consumer: McEstimate,
    pub producer: McEstimate,
    pub analytic: SurplusPoint,
    pub z_scores: (f64, f64),
    pub trials: usize,
    pub seed: u64,
}

pub fn simulate(
    seg: &PricedSegmentation,
    beta: f64,
    grid: &ValueGrid,
    trials: usize,
    seed: u64,
    tie: TieBreak,
    shift: &ShiftVector,
) -> Result<SimReport> {
    simulate_channel(seg, beta, grid, trials, seed, tie, shift, Channel::Mechanism)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_channel(
    seg: &PricedSegmentation,
    beta: f64,
    grid: &ValueGrid,
    trials: usize,
    seed: u64,
    tie: TieBreak,
    shift: &ShiftVector,
    channel: Channel,
) -> Result<SimReport> {
    check_beta(beta)?;
    if seg.parts.is_empty() {
        return Err(Error::invalid("segmentation is empty"));
    }
    if trials == 0 {
        return Err(Error::invalid("trial count must be positive"));
    }
    let k = grid.k();
    for p in &seg.parts {
        grid.check_market(&p.market)?;
        grid.check_index(p.price)?;
    }
    let picker = WeightedIndex::new(seg.parts.iter().map(|p| p.weight))
        .map_err(|e| Error::invalid(format!("segment weights: {e}")))?;
    // utilities of every (segment, price) pair and the unmasked price sets
    let table: Vec<Vec<SurplusPoint>> =
        seg.parts.iter().map(|p| (0..k).map(|i| utilities_at(i, p.market.mass(), grid)).collect()).collect();
    let unmasked: Vec<Vec<usize>> = seg.parts.iter().map(|p| optimal_prices_for(p.market.mass(), beta, grid)).collect();

    let shards = run_sharded(trials, seed, |rng, len| {
        let (mut c, mut p) = (Moments::default(), Moments::default());
        let mut masked_set;
        for _ in 0..len {
            let s = picker.sample(rng);
            let masked = match channel {
                Channel::Mechanism => rng.random::<f64>() < beta,
                Channel::AlwaysMasked => true,
                Channel::NeverMasked => false,
            };
            let set: &[usize] = if masked {
                masked_set = optimal_prices_for(&sample_mass(rng, k), beta, grid);
                &masked_set
            } else {
                &unmasked[s]
            };
            let price = pick(set, tie, seg.parts[s].price, rng);
            let u = table[s][price];
            c.push(u.consumer);
            p.push(u.producer);
        }
        (c, p)
    });
    let (mut c, mut p) = (Moments::default(), Moments::default());
    for (sc, sp) in &shards {
        c.merge(sc);
        p.merge(sp);
    }
    let (consumer, producer) = (c.estimate(seed), p.estimate(seed));

    let (analytic, shift_weight) = match channel {
        Channel::Mechanism => (seg.surplus_point(beta, shift.point(), grid), beta),
        Channel::AlwaysMasked => (shift.point(), 1.0),
        Channel::NeverMasked => (seg.unmasked_point(grid), 0.0),
    };
    // A Monte Carlo shift carries its own error into the analytic point.
    let z = |est: &McEstimate, target: f64, shift_se: f64| {
        let se = est.std_error.hypot(shift_weight * shift_se);
        let diff = est.value - target;
        if se > 0.0 {
            diff / se
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    };
    let z_scores = (
        z(&consumer, analytic.consumer, shift.consumer_std_error),
        z(&producer, analytic.producer, shift.producer_std_error),
    );
    Ok(SimReport { consumer, producer, analytic, z_scores, trials, seed })
}

fn pick<R: Rng + ?Sized>(set: &[usize], tie: TieBreak, assigned: usize, rng: &mut R) -> usize {
    if set.len() == 1 {
        return set[0];
    }
    match tie {
        TieBreak::Lowest => set[0],
        TieBreak::Highest => set[set.len() - 1],
        TieBreak::UniformRandom => set[rng.random_range(0..set.len())],
        TieBreak::Assigned => {
            if set.contains(&assigned) {
                assigned
            } else {
                set[0]
            }
        }
    }
}
