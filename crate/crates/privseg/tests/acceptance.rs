//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use privseg::analysis::{
    dp_epsilon_ratio, extrema_curves, max_producer_monotone, min_consumer_monotone, min_producer_prime,
    privacy_leakage, trend, Trend, DEADBAND,
};
use privseg::geometry::{
    build_polytope, k2_surplus_triangle, project_polygon, project_polygon_with, surplus_set, Solver,
};
use privseg::measure::{region_probabilities, sample_uniform_market, shift_vector, ShiftVector};
use privseg::model::{consumer_utility, producer_utility, total_surplus, uniform_monopoly};
use privseg::oracle::{containment_report, enumerate_cloud};
use privseg::pricing::{bar_beta_all, optimal_price_set};
use privseg::segmentation::{build_segmentation, merge_to_canonical, PricedPart, PricedSegmentation, TieRule};
use privseg::simulation::{simulate, TieBreak};
use privseg::{Market, Segmentation, SurplusPoint, SurplusPolygon, ValueGrid};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const EXAMPLE_VALUES: [f64; 5] = [0.8, 2.0, 3.0, 4.2, 5.0];
const EXAMPLE_AGGREGATES: [[f64; 5]; 3] =
    [[0.2, 0.1, 0.4, 0.2, 0.1], [0.2, 0.3, 0.2, 0.2, 0.1], [0.2, 0.1, 0.1, 0.05, 0.55]];

fn example_grid() -> ValueGrid {
    ValueGrid::new(EXAMPLE_VALUES.to_vec()).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_grid(rng: &mut ChaCha8Rng, k: usize) -> ValueGrid {
    let mut v = Vec::with_capacity(k);
    let mut cur = rng.random_range(0.2..1.0);
    for _ in 0..k {
        v.push(cur);
        cur += rng.random_range(0.2..1.5);
    }
    ValueGrid::new(v).unwrap()
}

fn unshifted(grid: &ValueGrid, x: &Market, beta: f64) -> SurplusPolygon {
    project_polygon(&build_polytope(grid, x, beta).unwrap()).unwrap()
}

fn no_privacy_triangle(grid: &ValueGrid, x: &Market) -> SurplusPolygon {
    let (_, pi) = uniform_monopoly(x, grid).unwrap();
    let ts = total_surplus(x, grid).unwrap();
    SurplusPolygon::from_points(&[SurplusPoint::new(0.0, pi), SurplusPoint::new(0.0, ts), SurplusPoint::new(ts - pi, pi)])
}

fn bar_beta_reproduction() -> Outcome {
    let expected = [0.444, 0.909, 1.000, 0.909, 0.541];
    let got = bar_beta_all(&example_grid());
    let worst = got.iter().zip(expected).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
    ensure(worst <= 0.005, || format!("got {got:?}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn closed_form_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let eta: f64 = rng.random_range(0.05..0.95);
        let alpha: f64 = rng.random_range(0.0..1.0);
        let beta = rng.random_range(0.0..=2.0 * eta.min(1.0 - eta));
        let grid = ValueGrid::new(vec![eta, 1.0]).unwrap();
        let x = Market::two_point(alpha).unwrap();
        let shift = shift_vector(beta, &x, &grid, 1, 0).unwrap();
        let general = surplus_set(&grid, &x, beta, &shift).unwrap();
        let closed = k2_surplus_triangle(eta, 1.0, alpha, beta).unwrap();
        let d = general.hausdorff(&closed);
        ensure(d <= 1e-7, || format!("eta={eta} alpha={alpha} beta={beta}: distance {d:e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("100 triples, max distance {worst:.1e}"))
}

fn non_private_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for n in 0..20 {
        let k = 2 + n % 4;
        let grid = random_grid(&mut rng, k);
        let x = sample_uniform_market(&mut rng, k);
        let d = unshifted(&grid, &x, 0.0).hausdorff(&no_privacy_triangle(&grid, &x));
        ensure(d <= 1e-9, || format!("K={k} {:?} {:?}: distance {d:e}", grid.values(), x.mass()))?;
        worst = worst.max(d);
    }
    Ok(format!("20 instances, max distance {worst:.1e}"))
}

fn min_producer_tri_state() -> Outcome {
    let grid = example_grid();
    let mut gaps = Vec::new();
    for (n, agg) in EXAMPLE_AGGREGATES.iter().enumerate() {
        let x = Market::new(agg.to_vec()).unwrap();
        let (_, pi) = uniform_monopoly(&x, &grid).unwrap();
        let gap = pi - min_producer_prime(&grid, &x, 0.3).unwrap();
        if n == 0 {
            ensure(gap.abs() <= 1e-8, || format!("{agg:?}: min producer off uniform level by {gap:e}"))?;
        } else {
            ensure(gap > 1e-6, || format!("{agg:?}: min producer only {gap:e} below uniform level"))?;
        }
        gaps.push(gap);
    }
    Ok(format!("gaps below uniform profit {:.2e}, {:.4}, {:.4}", gaps[0], gaps[1], gaps[2]))
}

fn q_inclusion_switch() -> Outcome {
    let grid = example_grid();
    for agg in EXAMPLE_AGGREGATES {
        let x = Market::new(agg.to_vec()).unwrap();
        let q = SurplusPoint::new(0.0, total_surplus(&x, &grid).unwrap());
        ensure(unshifted(&grid, &x, 0.3).contains(q, 1e-8), || format!("{agg:?}: first-degree point missing at 0.3"))?;
        ensure(!unshifted(&grid, &x, 0.5).contains(q, 1e-8), || format!("{agg:?}: first-degree point present at 0.5"))?;
    }
    Ok("3 aggregates".into())
}

fn consumer_gap_above_threshold() -> Outcome {
    let grid = example_grid();
    let mut margins = Vec::new();
    for agg in EXAMPLE_AGGREGATES {
        let x = Market::new(agg.to_vec()).unwrap();
        let floor = agg[4] * (5.0 - 4.2);
        let got = unshifted(&grid, &x, 0.6).min_consumer();
        ensure(got >= floor - 1e-8, || format!("{agg:?}: min consumer {got} below {floor}"))?;
        margins.push(got - floor);
    }
    Ok(format!("margins over the floor {margins:.4?}"))
}

fn mechanism_simulation() -> Outcome {
    let grid = ValueGrid::new(vec![0.4, 1.0]).unwrap();
    let x = Market::two_point(0.5).unwrap();
    let split = |m0: f64| Market::new(vec![m0, 1.0 - m0]).unwrap();
    let first_degree = PricedSegmentation {
        parts: vec![
            PricedPart { weight: 0.5, market: split(1.0), price: 0 },
            PricedPart { weight: 0.5, market: split(0.0), price: 1 },
        ],
    };
    let shift = shift_vector(0.2, &x, &grid, 1, 0).unwrap();
    let r = simulate(&first_degree, 0.2, &grid, 1_000_000, 7, TieBreak::default(), &shift).unwrap();
    let b = SurplusPoint::new(0.0225, 0.6525);
    ensure(r.analytic.dist(b) <= 1e-12, || format!("analytic point {:?}", r.analytic))?;
    ensure(r.z_scores.0.abs() <= 4.0 && r.z_scores.1.abs() <= 4.0, || format!("z at 0.2: {:?}", r.z_scores))?;
    let full = shift_vector(1.0, &x, &grid, 1, 0).unwrap();
    let r1 = simulate(&first_degree, 1.0, &grid, 1_000_000, 8, TieBreak::default(), &full).unwrap();
    ensure(r1.analytic == full.point(), || "analytic point at full masking is not the shift".into())?;
    ensure(r1.z_scores.0.abs() <= 4.0 && r1.z_scores.1.abs() <= 4.0, || format!("z at 1: {:?}", r1.z_scores))?;
    Ok(format!("z at 0.2 ({:.2}, {:.2}), z at 1 ({:.2}, {:.2})", r.z_scores.0, r.z_scores.1, r1.z_scores.0, r1.z_scores.1))
}

fn lattice_market(rng: &mut ChaCha8Rng, k: usize, d: u32) -> Market {
    let mut counts = vec![0u32; k];
    for _ in 0..d {
        counts[rng.random_range(0..k)] += 1;
    }
    Market::new(counts.iter().map(|c| *c as f64 / d as f64).collect()).unwrap()
}

fn oracle_containment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for (k, ds) in [(2usize, &[5u32, 10, 20][..]), (3, &[5, 10][..])] {
        for _ in 0..5 {
            let grid = random_grid(&mut rng, k);
            let x = lattice_market(&mut rng, k, 5);
            let beta = rng.random_range(0.0..0.9);
            let shift = shift_vector(beta, &x, &grid, 20_000, 1).unwrap();
            let s = surplus_set(&grid, &x, beta, &shift).unwrap();
            for &d in ds {
                let cloud = enumerate_cloud(&grid, &x, beta, d, &shift).unwrap();
                let r = containment_report(&cloud, &s);
                ensure(!cloud.capped && r.violations == 0, || {
                    format!("K={k} D={d} beta={beta} {:?}: {r:?}", x.mass())
                })?;
                checked += 1;
            }
        }
    }
    // completeness: the lattice hull closes in on the polygon
    let grid = ValueGrid::new(vec![0.6, 1.0]).unwrap();
    let x = Market::two_point(0.4).unwrap();
    let shift = shift_vector(0.2, &x, &grid, 1, 0).unwrap();
    let s = surplus_set(&grid, &x, 0.2, &shift).unwrap();
    let dists: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&d| enumerate_cloud(&grid, &x, 0.2, d, &shift).unwrap().hull().hausdorff(&s))
        .collect();
    ensure(dists.windows(2).all(|w| w[1] < w[0]), || format!("hull distances {dists:?}"))?;
    Ok(format!("{checked} clouds clean, hull distance {:?}", dists.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()))
}

fn monotone_extrema_curves() -> Outcome {
    let betas: Vec<f64> = (0..=60).map(|i| i as f64 / 100.0).collect();
    let mut producer_nonmonotone_seen = false;
    let mut consumer_nonmonotone_seen = false;
    for alpha in [0.3, 0.7] {
        for eta in [0.3, 0.7] {
            let grid = ValueGrid::new(vec![eta, 1.0]).unwrap();
            let x = Market::two_point(alpha).unwrap();
            let rows = extrema_curves(&grid, &x, &betas, 1, 0).unwrap();
            let max_p: Vec<f64> = rows.iter().map(|r| r.max_producer).collect();
            let min_c: Vec<f64> = rows.iter().map(|r| r.min_consumer).collect();
            let (tp, tc) = (trend(&max_p, DEADBAND), trend(&min_c, DEADBAND));
            let p_ok = if max_producer_monotone(alpha, eta) {
                matches!(tp, Trend::Decreasing | Trend::Constant)
            } else {
                tp == Trend::NonMonotone
            };
            let c_ok = if min_consumer_monotone(eta) {
                matches!(tc, Trend::Increasing | Trend::Constant)
            } else {
                tc == Trend::NonMonotone
            };
            ensure(p_ok && c_ok, || format!("alpha={alpha} eta={eta}: producer {tp:?}, consumer {tc:?}"))?;
            producer_nonmonotone_seen |= (alpha, eta) == (0.7, 0.3) && tp == Trend::NonMonotone;
            consumer_nonmonotone_seen |= eta == 0.3 && tc == Trend::NonMonotone;
        }
    }
    ensure(producer_nonmonotone_seen && consumer_nonmonotone_seen, || "expected non-monotone curves missing".into())?;
    Ok("4 quadrant samples agree".into())
}

fn privacy_diagnostics() -> Outcome {
    for beta in [0.0, 0.25, 0.5, 1.0] {
        ensure(privacy_leakage(beta) == 1.0 - beta, || format!("leakage at {beta}"))?;
    }
    let mut checked = 0;
    for values in [vec![0.4, 1.0], vec![0.8, 2.0, 3.0, 4.2, 5.0], vec![1.0, 2.0, 3.0]] {
        let grid = ValueGrid::new(values).unwrap();
        for beta in [0.1, 0.3, 0.6, 0.9, 1.0] {
            let probs: Vec<f64> =
                region_probabilities(beta, &grid, 200_000, 5).unwrap().iter().map(|e| e.value).collect();
            if probs.iter().all(|p| *p == 0.0) {
                continue;
            }
            let dp = dp_epsilon_ratio(beta, &probs).unwrap();
            let ok = dp.ratio.is_some_and(|r| r.is_finite() && r > 0.0);
            ensure(ok, || format!("{:?} beta={beta}: {dp:?}", grid.values()))?;
            checked += 1;
        }
    }
    Ok(format!("leakage exact, {checked} ratios finite"))
}

fn shift_for(rng: &mut ChaCha8Rng, beta: f64, x: &Market, grid: &ValueGrid) -> ShiftVector {
    shift_vector(beta, x, grid, 20_000, rng.random()).unwrap()
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // witnesses decode into segmentations reaching their vertices
    for _ in 0..50 {
        let k = rng.random_range(2..=4);
        let grid = random_grid(&mut rng, k);
        let x = sample_uniform_market(&mut rng, k);
        let beta = rng.random_range(0.0..0.95);
        let shift = shift_for(&mut rng, beta, &x, &grid);
        let s = surplus_set(&grid, &x, beta, &shift).unwrap();
        for (v, z) in s.vertices().iter().zip(s.witnesses()) {
            let z = z.as_ref().ok_or("vertex without witness")?;
            let seg = build_segmentation(z, &grid, &x, beta).map_err(|e| e.to_string())?;
            let err = seg.surplus_point(beta, shift.point(), &grid).dist(*v);
            ensure(err <= 1e-9, || format!("round trip off by {err:e}"))?;
            let agg = seg.aggregate();
            let drift = agg.iter().zip(x.mass()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure(drift <= 1e-10, || format!("aggregate drift {drift:e}"))?;
        }
    }

    // merging equal-price segments keeps utilities and the aggregate
    for _ in 0..50 {
        let k = rng.random_range(2..=5);
        let grid = random_grid(&mut rng, k);
        let n = rng.random_range(2..=6);
        let markets: Vec<Market> = (0..n).map(|_| sample_uniform_market(&mut rng, k)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut agg = vec![0.0; k];
        for (g, m) in weights.iter().zip(&markets) {
            for (a, v) in agg.iter_mut().zip(m.mass()) {
                *a += g * v;
            }
        }
        let x = Market::normalized(agg).unwrap();
        let seg = Segmentation::new(weights.iter().copied().zip(markets.iter().cloned()).collect(), &x)
            .map_err(|e| e.to_string())?;
        let beta = rng.random_range(0.0..1.0);
        let mut before = SurplusPoint::default();
        for (g, m) in &seg.parts {
            let price = optimal_price_set(m, beta, &grid).unwrap()[0];
            let u = SurplusPoint::new(consumer_utility(price, m, &grid).unwrap(), producer_utility(price, m, &grid).unwrap());
            before = before.add(u.scale(*g));
        }
        let merged = merge_to_canonical(&seg, TieRule::Lowest, beta, &grid).map_err(|e| e.to_string())?;
        let err = merged.unmasked_point(&grid).dist(before);
        ensure(err <= 1e-12, || format!("merge moved utilities by {err:e}"))?;
        let drift = merged.aggregate().iter().zip(seg.aggregate()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(drift <= 1e-12, || format!("merge moved the aggregate by {drift:e}"))?;
    }

    // prices that are never optimal carry no weight
    let mut rows_checked = 0;
    for _ in 0..50 {
        let k = rng.random_range(3..=5);
        let grid = random_grid(&mut rng, k);
        let x = sample_uniform_market(&mut rng, k);
        let bars = bar_beta_all(&grid);
        let lo = bars.iter().copied().fold(1.0, f64::min);
        let beta = rng.random_range(lo..1.0).max(lo + 1e-6).min(0.999);
        let poly = build_polytope(&grid, &x, beta).unwrap();
        for (i, b) in bars.iter().enumerate().filter(|(_, b)| beta > **b) {
            let w = poly.max_segment_weight(i).map_err(|e| e.to_string())?;
            ensure(w <= 1e-9, || format!("row {i} keeps weight {w:e} at beta={beta} > {b}"))?;
            rows_checked += 1;
        }
    }

    // the unshifted set stays right of the y-axis and left of the efficient line
    for _ in 0..50 {
        let k = rng.random_range(2..=5);
        let grid = random_grid(&mut rng, k);
        let x = sample_uniform_market(&mut rng, k);
        let ts = total_surplus(&x, &grid).unwrap();
        let beta = rng.random_range(0.0..0.99);
        for v in unshifted(&grid, &x, beta).vertices() {
            ensure(v.consumer >= -1e-9 && v.consumer + v.producer <= ts + 1e-9, || format!("vertex {v:?} out of bounds"))?;
        }
    }

    // float and rational solvers give the same polygon
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(2..=4);
        let grid = random_grid(&mut rng, k);
        let x = sample_uniform_market(&mut rng, k);
        let beta = rng.random_range(0.0..0.95);
        let poly = build_polytope(&grid, &x, beta).unwrap();
        let float = project_polygon_with(&poly, Solver::Float).unwrap();
        let exact = project_polygon_with(&poly, Solver::Exact).unwrap();
        let d = float.hausdorff(&exact);
        ensure(d <= 1e-8, || format!("solvers disagree by {d:e}"))?;
        worst = worst.max(d);
    }
    Ok(format!("5 suites x 50 instances, {rows_checked} zeroed rows, solver gap {worst:.1e}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("threshold reproduction", bar_beta_reproduction),
        ("two-value closed form matches general pipeline", closed_form_equivalence),
        ("no masking recovers the surplus triangle", non_private_recovery),
        ("minimum producer utility tri-state", min_producer_tri_state),
        ("first-degree point inclusion switch", q_inclusion_switch),
        ("consumer floor above the top threshold", consumer_gap_above_threshold),
        ("mechanism simulation", mechanism_simulation),
        ("lattice oracle containment", oracle_containment),
        ("monotone extrema curves", monotone_extrema_curves),
        ("privacy diagnostics", privacy_diagnostics),
        ("property suites", property_suites),
    ];
    let mut failed = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!("PASS criterion {:>2}: {name} ({detail}) [{secs:.2}s]", n + 1),
            Err(why) => format!("FAIL criterion {:>2}: {name}: {why} [{secs:.2}s]", n + 1),
        };
        // bypasses the harness capture so the summary always shows
        let _ = writeln!(stdout, "{line}");
        if outcome.is_err() {
            failed.push(n + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
