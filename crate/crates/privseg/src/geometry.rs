//! The attainable surplus set.
//!
//! Segmentations priced under the mechanism are parameterized by
//! `z(i,j) = γ_i y_i(j)`: segment `i` is the one priced at `v_i`, `γ_i` its
//! weight and `y_i` its complementary CDF. These satisfy linear constraints
//! (monotone rows, posterior optimality of `v_i`, aggregation to `x*`) and the
//! unmasked-branch utilities are linear in `z`, so the pre-shift set is the
//! 2-D shadow of a polytope. The shadow is traced with support-function LPs.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use privseg_lp::{solve, solve_exact, to_f64_solution, LinearProgram, Sense, Status};

use crate::error::{Error, Result};
use crate::measure::ShiftVector;
use crate::model::{Market, SurplusPoint, ValueGrid};
use crate::polygon::{SurplusPolygon, VERTEX_TOL};
use crate::pricing::{check_beta, threshold_tstar, FULL_MASK};

/// Upper bound on support LPs per projection.
pub const MAX_SUPPORT_CALLS: usize = 10_000;

/// Angular intervals narrower than this are not refined further.
pub const MIN_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    Float,
    /// Rational simplex on the binary values of the float program.
    Exact,
}

/// Constraint system over the `K²` variables `z(i,j)`, row-major.
#[derive(Debug, Clone)]
pub struct PolytopeLP {
    grid: ValueGrid,
    x_star: Market,
    beta: f64,
    lp: LinearProgram,
}

impl PolytopeLP {
    pub fn k(&self) -> usize {
        self.grid.k()
    }

    pub fn var(&self, i: usize, j: usize) -> usize {
        i * self.k() + j
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn grid(&self) -> &ValueGrid {
        &self.grid
    }

    pub fn x_star(&self) -> &Market {
        &self.x_star
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Objective coefficients of the consumer coordinate.
    pub fn consumer_coeffs(&self) -> Vec<f64> {
        consumer_coeffs(&self.grid)
    }

    pub fn producer_coeffs(&self) -> Vec<f64> {
        producer_coeffs(&self.grid)
    }

    /// Optimizes `objective · z`; returns the optimum and its point.
    pub fn optimize(&self, objective: Vec<f64>, sense: Sense, solver: Solver) -> Result<(f64, Vec<f64>)> {
        let mut lp = self.lp.clone();
        lp.set_objective(objective);
        let sol = match solver {
            Solver::Float => solve(&lp, sense)?,
            Solver::Exact => to_f64_solution(&solve_exact(&lp, sense)?),
        };
        match sol.status {
            Status::Optimal => Ok((sol.objective_value, sol.point)),
            Status::Infeasible => Err(Error::numerical("surplus polytope is infeasible")),
            Status::Unbounded => Err(Error::numerical("surplus polytope reported unbounded")),
        }
    }

    /// Largest weight any feasible point gives the segment priced at `v_i`.
    pub fn max_segment_weight(&self, i: usize) -> Result<f64> {
        let mut c = vec![0.0; self.k() * self.k()];
        c[self.var(i, 0)] = 1.0;
        Ok(self.optimize(c, Sense::Maximize, Solver::Float)?.0)
    }

    /// Maximizes `dc·consumer + dp·producer`.
    fn support(&self, dc: f64, dp: f64, solver: Solver) -> Result<(SurplusPoint, Vec<f64>)> {
        let c: Vec<f64> = self
            .consumer_coeffs()
            .iter()
            .zip(self.producer_coeffs())
            .map(|(a, b)| dc * a + dp * b)
            .collect();
        let (_, z) = self.optimize(c, Sense::Maximize, solver)?;
        Ok((surplus_objective_unchecked(&z, &self.grid), z))
    }
}

fn consumer_coeffs(grid: &ValueGrid) -> Vec<f64> {
    let k = grid.k();
    let mut c = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            c[i * k + j] = grid.value(j) - grid.value(j - 1);
        }
    }
    c
}

fn producer_coeffs(grid: &ValueGrid) -> Vec<f64> {
    let k = grid.k();
    let mut c = vec![0.0; k * k];
    for i in 0..k {
        c[i * k + i] = grid.value(i);
    }
    c
}

pub fn build_polytope(grid: &ValueGrid, x_star: &Market, beta: f64) -> Result<PolytopeLP> {
    grid.check_market(x_star)?;
    check_beta(beta)?;
    if beta >= FULL_MASK {
        return Err(Error::invalid("no polytope at full masking; use the shift point"));
    }
    let k = grid.k();
    let n = k * k;
    let var = |i: usize, j: usize| i * k + j;
    let mut lp = LinearProgram::new(n);
    let unit = |entries: &[(usize, f64)]| {
        let mut row = vec![0.0; n];
        for &(v, a) in entries {
            row[v] += a;
        }
        row
    };
    for i in 0..k {
        for j in 0..k - 1 {
            lp.ge(unit(&[(var(i, j), 1.0), (var(i, j + 1), -1.0)]), 0.0);
        }
    }
    for i in 0..k {
        lp.ge(unit(&[(var(i, k - 1), 1.0)]), 0.0);
    }
    let kappa = beta / (k as f64 * (1.0 - beta));
    for i in 0..k {
        for j in 0..k {
            let row = unit(&[
                (var(i, i), grid.value(i)),
                (var(i, j), -grid.value(j)),
                (var(i, 0), -kappa * (grid.weight(j) - grid.weight(i))),
            ]);
            lp.ge(row, 0.0);
        }
    }
    let y = x_star.ccdf();
    for (j, yj) in y.iter().enumerate() {
        lp.eq(unit(&(0..k).map(|i| (var(i, j), 1.0)).collect::<Vec<_>>()), *yj);
    }
    Ok(PolytopeLP { grid: grid.clone(), x_star: x_star.clone(), beta, lp })
}

/// Perfect segmentation: each value class alone, priced at its value.
pub fn first_degree_z(x_star: &Market) -> Vec<f64> {
    let k = x_star.k();
    let mut z = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            z[i * k + j] = x_star.mass()[i];
        }
    }
    z
}

/// Unmasked-branch utilities of a polytope point.
pub fn surplus_objective(z: &[f64], grid: &ValueGrid) -> Result<SurplusPoint> {
    if z.len() != grid.k() * grid.k() {
        return Err(Error::invalid(format!("expected {} entries, got {}", grid.k() * grid.k(), z.len())));
    }
    Ok(surplus_objective_unchecked(z, grid))
}

fn surplus_objective_unchecked(z: &[f64], grid: &ValueGrid) -> SurplusPoint {
    let dot = |c: Vec<f64>| c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
    SurplusPoint::new(dot(consumer_coeffs(grid)), dot(producer_coeffs(grid)))
}

pub fn project_polygon(poly: &PolytopeLP) -> Result<SurplusPolygon> {
    project_polygon_with(poly, Solver::Float)
}

/// Traces the shadow of the polytope by support queries.
///
/// Between two known support points the next query is the outward normal of
/// their chord. If nothing lies beyond the chord it is an edge; otherwise the
/// new support point splits the interval. Angular bisection is the fallback
/// when the chord normal is not strictly inside the interval.
pub fn project_polygon_with(poly: &PolytopeLP, solver: Solver) -> Result<SurplusPolygon> {
    let mut calls = 0usize;
    let mut query = |theta: f64| -> Result<(SurplusPoint, Vec<f64>)> {
        calls += 1;
        if calls > MAX_SUPPORT_CALLS {
            return Err(Error::numerical(format!("projection exceeded {MAX_SUPPORT_CALLS} support LPs")));
        }
        poly.support(theta.cos(), theta.sin(), solver)
    };

    let starts = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
    let mut found: Vec<(SurplusPoint, Option<Vec<f64>>)> = Vec::new();
    let mut seeds = Vec::with_capacity(4);
    for &theta in &starts {
        let (p, z) = query(theta)?;
        seeds.push(p);
        found.push((p, Some(z)));
    }
    let mut stack: Vec<(f64, SurplusPoint, f64, SurplusPoint)> =
        (0..4).map(|s| (starts[s], seeds[s], starts[s] + FRAC_PI_2, seeds[(s + 1) % 4])).collect();

    while let Some((ta, pa, tb, pb)) = stack.pop() {
        if pa.dist(pb) <= VERTEX_TOL || tb - ta < MIN_ANGLE {
            continue;
        }
        let e = pb.sub(pa);
        let mut phi = (-e.consumer).atan2(e.producer);
        while phi < ta - 1e-12 {
            phi += TAU;
        }
        let dir = |t: f64| (t.cos(), t.sin());
        let value = |d: (f64, f64), p: SurplusPoint| d.0 * p.consumer + d.1 * p.producer;

        let strictly_inside = phi > ta + 1e-12 && phi < tb - 1e-12;
        let chord_on_boundary = |t: f64| {
            let d = dir(t);
            (value(d, pa) - value(d, pb)).abs() <= VERTEX_TOL * value(d, pa).abs().max(1.0)
        };
        if !strictly_inside && (chord_on_boundary(ta) || chord_on_boundary(tb)) {
            continue;
        }
        let t = if strictly_inside { phi } else { 0.5 * (ta + tb) };
        let (pm, z) = query(t)?;
        if strictly_inside {
            let d = dir(t);
            if value(d, pm) <= value(d, pa) + VERTEX_TOL * value(d, pa).abs().max(1.0) {
                continue;
            }
        }
        found.push((pm, Some(z)));
        stack.push((ta, pa, t, pm));
        stack.push((t, pm, tb, pb));
    }
    Ok(SurplusPolygon::from_witnessed(found))
}

/// The attainable set: the projected polytope mapped by `p ↦ βc + (1−β)p`,
/// or the single point `c` at full masking.
pub fn surplus_set(grid: &ValueGrid, x_star: &Market, beta: f64, shift: &ShiftVector) -> Result<SurplusPolygon> {
    surplus_set_with(grid, x_star, beta, shift, Solver::Float)
}

pub fn surplus_set_with(
    grid: &ValueGrid,
    x_star: &Market,
    beta: f64,
    shift: &ShiftVector,
    solver: Solver,
) -> Result<SurplusPolygon> {
    check_beta(beta)?;
    if beta >= FULL_MASK {
        return Ok(SurplusPolygon::singleton(shift.point()));
    }
    let unshifted = project_polygon_with(&build_polytope(grid, x_star, beta)?, solver)?;
    Ok(unshifted.affine(beta, shift.point()))
}

/// Which closed-form regime a two-value instance is in.
enum TwoValue {
    /// Both prices can be optimal; carries `t*`.
    Interior(f64),
    AlwaysHigh,
    AlwaysLow,
}

fn two_value_regime(v1: f64, v2: f64, alpha: f64, beta: f64) -> Result<TwoValue> {
    if !(v1 > 0.0 && v2 > v1 && v2.is_finite()) {
        return Err(Error::invalid("need 0 < v1 < v2"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    check_beta(beta)?;
    let eta = v1 / v2;
    if beta > 2.0 * eta {
        return Ok(TwoValue::AlwaysHigh);
    }
    if beta > 2.0 * (1.0 - eta) {
        return Ok(TwoValue::AlwaysLow);
    }
    // β = 1 gets here only for η = 1/2, where t* = 1/2.
    let t = if beta >= FULL_MASK { 0.5 } else { threshold_tstar(eta, beta)? };
    Ok(TwoValue::Interior(t.clamp(0.0, 1.0)))
}

/// Closed-form attainable set for two values.
pub fn k2_surplus_triangle(v1: f64, v2: f64, alpha: f64, beta: f64) -> Result<SurplusPolygon> {
    let t = match two_value_regime(v1, v2, alpha, beta)? {
        TwoValue::AlwaysHigh => return Ok(SurplusPolygon::singleton(SurplusPoint::new(0.0, v2 * alpha))),
        TwoValue::AlwaysLow => {
            return Ok(SurplusPolygon::singleton(SurplusPoint::new((v2 - v1) * alpha, v1)));
        }
        TwoValue::Interior(t) => t,
    };
    let gap = v2 - v1;
    let low_excess = if t > 0.0 { (t - alpha).max(0.0) / t } else { 0.0 };
    let high_excess = if t < 1.0 { (alpha - t).max(0.0) / (1.0 - t) } else { 0.0 };
    let a = SurplusPoint::new(0.0, alpha * v2 + v1 * low_excess);
    let b = SurplusPoint::new(0.0, alpha * v2 + (1.0 - alpha) * v1);
    let c_vertex = SurplusPoint::new(alpha * gap - gap * high_excess, v1 + gap * high_excess);
    let shift = SurplusPoint::new(t * alpha * gap, t * v1 + (1.0 - t) * alpha * v2);
    let map = |p: SurplusPoint| shift.scale(beta).add(p.scale(1.0 - beta));
    Ok(SurplusPolygon::from_points(&[map(a), map(b), map(c_vertex)]))
}

/// Closed-form pre-shift set for two values, split on `α*` versus `t*`.
pub fn k2_unshifted_triangle(v1: f64, v2: f64, alpha: f64, beta: f64) -> Result<SurplusPolygon> {
    let t = match two_value_regime(v1, v2, alpha, beta)? {
        TwoValue::AlwaysHigh => return Ok(SurplusPolygon::singleton(SurplusPoint::new(0.0, v2 * alpha))),
        TwoValue::AlwaysLow => {
            return Ok(SurplusPolygon::singleton(SurplusPoint::new((v2 - v1) * alpha, v1)));
        }
        TwoValue::Interior(t) => t,
    };
    let gap = v2 - v1;
    let e = SurplusPoint::new(0.0, alpha * v2 + (1.0 - alpha) * v1);
    let pts = if alpha >= t {
        let f = SurplusPoint::new(0.0, alpha * v2);
        let xi = if t < 1.0 { (1.0 - alpha) * t / (1.0 - t) * gap } else { 0.0 };
        [e, f, e.add(SurplusPoint::new(xi, -xi))]
    } else {
        let f = SurplusPoint::new(alpha * gap, v1);
        let kappa = v1 + alpha * v2 * (1.0 - (v1 / v2) / t);
        [e, f, SurplusPoint::new(0.0, kappa)]
    };
    Ok(SurplusPolygon::from_points(&pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::shift_vector;
    use crate::model::{total_surplus, uniform_monopoly};
    use crate::pricing::bar_beta_all;

    fn example_grid() -> ValueGrid {
        ValueGrid::new(vec![0.8, 2.0, 3.0, 4.2, 5.0]).unwrap()
    }

    fn m(v: &[f64]) -> Market {
        Market::new(v.to_vec()).unwrap()
    }

    fn assert_same(a: &SurplusPolygon, b: &SurplusPolygon, tol: f64) {
        let d = a.hausdorff(b);
        assert!(d <= tol, "hausdorff {d}\n{:?}\n{:?}", a.vertices(), b.vertices());
    }

    #[test]
    fn row_counts() {
        let p = build_polytope(&example_grid(), &m(&[0.2, 0.1, 0.4, 0.2, 0.1]), 0.3).unwrap();
        assert_eq!(p.lp().n_vars(), 25);
        assert_eq!(p.lp().rows().len(), 20 + 5 + 25 + 5);
        assert!(build_polytope(&example_grid(), &m(&[0.2, 0.1, 0.4, 0.2, 0.1]), 1.0).is_err());
    }

    #[test]
    fn objective_examples() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        let q = surplus_objective(&first_degree_z(&x), &g).unwrap();
        assert!(q.consumer.abs() < 1e-15 && (q.producer - 2.9).abs() < 1e-12);
        let mut z = vec![0.0; 25];
        z[..5].copy_from_slice(&x.ccdf());
        let r = surplus_objective(&z, &g).unwrap();
        assert!((r.consumer - 2.1).abs() < 1e-12 && (r.producer - 0.8).abs() < 1e-12);
        assert_eq!(surplus_objective(&[0.0; 25], &g).unwrap(), SurplusPoint::default());
        assert!(surplus_objective(&[0.0; 3], &g).is_err());
    }

    #[test]
    fn first_degree_point_is_feasible_below_every_threshold() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        let min_bar = bar_beta_all(&g).into_iter().fold(1.0, f64::min);
        let p = build_polytope(&g, &x, min_bar * 0.99).unwrap();
        assert!(p.lp().max_violation(&first_degree_z(&x)) <= 1e-12);
        let p = build_polytope(&g, &x, min_bar + 0.01).unwrap();
        assert!(p.lp().max_violation(&first_degree_z(&x)) > 1e-6);
    }

    #[test]
    fn unmasked_projection_is_the_surplus_triangle() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        let (_, pi) = uniform_monopoly(&x, &g).unwrap();
        let ts = total_surplus(&x, &g).unwrap();
        let s = project_polygon(&build_polytope(&g, &x, 0.0).unwrap()).unwrap();
        let want = SurplusPolygon::from_points(&[
            SurplusPoint::new(0.0, pi),
            SurplusPoint::new(0.0, ts),
            SurplusPoint::new(ts - pi, pi),
        ]);
        assert_eq!(s.len(), 3);
        assert_same(&s, &want, 1e-9);
    }

    #[test]
    fn witnesses_reproduce_vertices() {
        let g = example_grid();
        let x = m(&[0.2, 0.3, 0.2, 0.2, 0.1]);
        let poly = build_polytope(&g, &x, 0.3).unwrap();
        let s = project_polygon(&poly).unwrap();
        for (v, w) in s.vertices().iter().zip(s.witnesses()) {
            let z = w.as_ref().expect("sweep stores witnesses");
            assert!(poly.lp().max_violation(z) <= 1e-8);
            assert!(surplus_objective(z, &g).unwrap().dist(*v) <= 1e-9);
        }
    }

    #[test]
    fn infeasible_rows_self_zero() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        let bars = bar_beta_all(&g);
        let poly = build_polytope(&g, &x, 0.6).unwrap();
        for i in 0..5 {
            let w = poly.max_segment_weight(i).unwrap();
            if 0.6 > bars[i] {
                assert!(w.abs() < 1e-12, "row {i}: {w}");
            } else {
                assert!(w > 1e-6);
            }
        }
    }

    #[test]
    fn two_value_example_triangle() {
        let t = k2_surplus_triangle(0.4, 1.0, 0.5, 0.2).unwrap();
        let want = SurplusPolygon::from_points(&[
            SurplusPoint::new(0.0225, 0.4925),
            SurplusPoint::new(0.0225, 0.6525),
            SurplusPoint::new(0.1665, 0.5085),
        ]);
        assert_same(&t, &want, 1e-12);
    }

    #[test]
    fn two_value_singletons() {
        let s = k2_surplus_triangle(0.2, 1.0, 0.6, 0.5).unwrap();
        assert_eq!(s.vertices(), &[SurplusPoint::new(0.0, 0.6)]);
        let s = k2_surplus_triangle(0.8, 1.0, 0.6, 0.5).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.vertices()[0].consumer - 0.2 * 0.6).abs() < 1e-15);
        // the general machinery agrees where one price is never optimal
        let g = ValueGrid::new(vec![0.2, 1.0]).unwrap();
        let x = Market::two_point(0.6).unwrap();
        let c = shift_vector(0.5, &x, &g, 1, 0).unwrap();
        assert_same(&surplus_set(&g, &x, 0.5, &c).unwrap(), &k2_surplus_triangle(0.2, 1.0, 0.6, 0.5).unwrap(), 1e-9);
    }

    #[test]
    fn unshifted_cases_match_projection() {
        for (v1, alpha, beta) in [(0.4, 0.5, 0.2), (0.4, 0.3, 0.2), (0.6, 0.8, 0.5), (0.3, 0.1, 0.0), (0.5, 0.5, 1.0)] {
            let tri = k2_unshifted_triangle(v1, 1.0, alpha, beta).unwrap();
            if beta >= 1.0 {
                continue;
            }
            let g = ValueGrid::new(vec![v1, 1.0]).unwrap();
            let x = Market::two_point(alpha).unwrap();
            let s = project_polygon(&build_polytope(&g, &x, beta).unwrap()).unwrap();
            assert_same(&s, &tri, 1e-9);
        }
    }

    #[test]
    fn unmasked_two_value_triangle_at_threshold() {
        // alpha* = eta at beta = 0: R sits at (eta (v2 - v1), v1)
        let t = k2_surplus_triangle(0.4, 1.0, 0.4, 0.0).unwrap();
        assert!(t.contains(SurplusPoint::new(0.4 * 0.6, 0.4), 1e-12));
        assert!((t.max_consumer() - 0.24).abs() < 1e-12);
    }

    #[test]
    fn full_masking_is_the_shift_point() {
        let g = example_grid();
        let x = m(&[0.2, 0.1, 0.4, 0.2, 0.1]);
        let c = shift_vector(1.0, &x, &g, 1, 0).unwrap();
        let s = surplus_set(&g, &x, 1.0, &c).unwrap();
        assert_eq!(s.vertices(), &[c.point()]);
    }

    #[test]
    fn exact_solver_agrees() {
        let g = ValueGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let x = m(&[0.25, 0.5, 0.25]);
        let poly = build_polytope(&g, &x, 0.25).unwrap();
        let a = project_polygon_with(&poly, Solver::Float).unwrap();
        let b = project_polygon_with(&poly, Solver::Exact).unwrap();
        assert_same(&a, &b, 1e-9);
    }
}
