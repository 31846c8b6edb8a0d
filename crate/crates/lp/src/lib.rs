//! Small dense linear-program solver.
//!
//! Two-phase tableau simplex with Bland's anticycling rule, generic over the
//! entry type. [`solve`] runs in binary64 with a `1e-9` pivot tolerance;
//! [`solve_exact`] converts the same program exactly into arbitrary-precision
//! rationals and pivots without tolerances, which makes it usable as a
//! referee for the float path.
//!
//! Sizes targeted here are tens of variables and rows. There is no sparsity
//! handling, presolve, or warm starting.

mod scalar;
mod tableau;

use num_rational::BigRational;
use thiserror::Error;

pub use scalar::Scalar;
pub use tableau::ITERATION_CAP;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, got: usize, expected: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("simplex iteration cap of {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `opt objective·z` subject to a list of rows.
///
/// Variables are nonnegative unless marked free with [`LinearProgram::set_free`].
#[derive(Debug, Clone)]
pub struct LinearProgram<T = f64> {
    n_vars: usize,
    objective: Vec<T>,
    rows: Vec<Row<T>>,
    free: Vec<bool>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![T::zero(); n_vars],
            rows: Vec::new(),
            free: vec![false; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row<T>] {
        &self.rows
    }

    pub fn is_free(&self, var: usize) -> bool {
        self.free[var]
    }

    pub fn set_objective(&mut self, objective: Vec<T>) -> &mut Self {
        self.objective = objective;
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn push(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.rows.push(Row { coeffs, relation, rhs });
        self
    }

    pub fn le(&mut self, coeffs: Vec<T>, rhs: T) -> &mut Self {
        self.push(coeffs, Relation::Le, rhs)
    }

    pub fn ge(&mut self, coeffs: Vec<T>, rhs: T) -> &mut Self {
        self.push(coeffs, Relation::Ge, rhs)
    }

    pub fn eq(&mut self, coeffs: Vec<T>, rhs: T) -> &mut Self {
        self.push(coeffs, Relation::Eq, rhs)
    }

    fn check_dims(&self) -> Result<(), LpError> {
        if self.objective.len() != self.n_vars {
            return Err(LpError::DimensionMismatch {
                what: "objective",
                got: self.objective.len(),
                expected: self.n_vars,
            });
        }
        for row in &self.rows {
            if row.coeffs.len() != self.n_vars {
                return Err(LpError::DimensionMismatch {
                    what: "constraint row",
                    got: row.coeffs.len(),
                    expected: self.n_vars,
                });
            }
        }
        Ok(())
    }

    /// Largest violation of any row or sign restriction at `point`.
    pub fn max_violation(&self, point: &[T]) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, v) in point.iter().enumerate() {
            if !self.free[k] {
                worst = worst.max(-v.to_f64());
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(point).map(|(a, z)| a.to_f64() * z.to_f64()).sum();
            let rhs = row.rhs.to_f64();
            let v = match row.relation {
                Relation::Le => lhs - rhs,
                Relation::Ge => rhs - lhs,
                Relation::Eq => (lhs - rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Exact copy of a float program in rationals.
    pub fn to_rational(&self) -> Result<LinearProgram<BigRational>, LpError>
    where
        T: Into<f64> + Copy,
    {
        let conv = |v: T, what| BigRational::from_float(v.into()).ok_or(LpError::NonFinite(what));
        Ok(LinearProgram {
            n_vars: self.n_vars,
            objective: self.objective.iter().map(|&v| conv(v, "objective")).collect::<Result<_, _>>()?,
            rows: self
                .rows
                .iter()
                .map(|r| {
                    Ok(Row {
                        coeffs: r.coeffs.iter().map(|&v| conv(v, "constraint row")).collect::<Result<_, _>>()?,
                        relation: r.relation,
                        rhs: conv(r.rhs, "right-hand side")?,
                    })
                })
                .collect::<Result<_, LpError>>()?,
            free: self.free.clone(),
        })
    }
}

/// Result of a solve. `point` is empty and `objective_value` is zero unless
/// the status is [`Status::Optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T = f64> {
    pub status: Status,
    pub point: Vec<T>,
    pub objective_value: T,
    /// One multiplier per row, signed so that `Σ duals·rhs` equals the
    /// optimal objective in the caller's sense.
    pub duals: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    fn without_point(status: Status, iterations: usize) -> Self {
        Self { status, point: Vec::new(), objective_value: T::zero(), duals: Vec::new(), iterations }
    }

    /// Dual bound `Σ yᵢbᵢ`, returned only if the multipliers are dual feasible
    /// within `tol`; it then bounds the objective over the whole feasible set.
    pub fn certified_bound(&self, lp: &LinearProgram<T>, sense: Sense, tol: f64) -> Option<f64> {
        if !self.is_optimal() {
            return None;
        }
        // Orient everything as a maximization: max c·z, A z (rel) b.
        let flip = if sense == Sense::Maximize { 1.0 } else { -1.0 };
        let y: Vec<f64> = self.duals.iter().map(|d| flip * d.to_f64()).collect();
        for (row, yi) in lp.rows.iter().zip(&y) {
            let ok = match row.relation {
                Relation::Le => *yi >= -tol,
                Relation::Ge => *yi <= tol,
                Relation::Eq => true,
            };
            if !ok {
                return None;
            }
        }
        for k in 0..lp.n_vars {
            let aty: f64 = lp.rows.iter().zip(&y).map(|(r, yi)| r.coeffs[k].to_f64() * yi).sum();
            let ck = flip * lp.objective[k].to_f64();
            let slack = aty - ck;
            let ok = if lp.free[k] { slack.abs() <= tol } else { slack >= -tol };
            if !ok {
                return None;
            }
        }
        let bound: f64 = lp.rows.iter().zip(&y).map(|(r, yi)| r.rhs.to_f64() * yi).sum();
        Some(flip * bound)
    }
}

fn solve_generic<T: Scalar>(lp: &LinearProgram<T>, sense: Sense) -> Result<LpSolution<T>, LpError> {
    lp.check_dims()?;

    // Column layout: one column per variable, then a negative part for each
    // free variable.
    let free_idx: Vec<usize> = (0..lp.n_vars).filter(|&k| lp.free[k]).collect();
    let n_std = lp.n_vars + free_idx.len();
    let expand = |coeffs: &[T]| -> Vec<T> {
        let mut v = coeffs.to_vec();
        v.extend(free_idx.iter().map(|&k| -coeffs[k].clone()));
        v
    };
    let sign = match sense {
        Sense::Maximize => T::one(),
        Sense::Minimize => -T::one(),
    };
    let c: Vec<T> = expand(&lp.objective).into_iter().map(|v| sign.clone() * v).collect();
    let form = tableau::StandardForm {
        a: lp.rows.iter().map(|r| expand(&r.coeffs)).collect(),
        b: lp.rows.iter().map(|r| r.rhs.clone()).collect(),
        relation: lp.rows.iter().map(|r| r.relation).collect(),
        c,
    };
    debug_assert!(form.c.len() == n_std);

    let run = tableau::run(form)?;
    match run.outcome {
        tableau::Outcome::Infeasible => Ok(LpSolution::without_point(Status::Infeasible, run.iterations)),
        tableau::Outcome::Unbounded => Ok(LpSolution::without_point(Status::Unbounded, run.iterations)),
        tableau::Outcome::Optimal { x, value, duals } => {
            let mut point: Vec<T> = x[..lp.n_vars].to_vec();
            for (p, &k) in free_idx.iter().enumerate() {
                point[k] = point[k].clone() - x[lp.n_vars + p].clone();
            }
            let duals = duals
                .into_iter()
                .zip(&run.flipped)
                .map(|(d, &f)| {
                    let d = if f { -d } else { d };
                    sign.clone() * d
                })
                .collect();
            Ok(LpSolution {
                status: Status::Optimal,
                point,
                objective_value: sign * value,
                duals,
                iterations: run.iterations,
            })
        }
    }
}

fn check_finite(lp: &LinearProgram<f64>) -> Result<(), LpError> {
    if lp.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite("objective"));
    }
    for r in &lp.rows {
        if r.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("constraint row"));
        }
        if !r.rhs.is_finite() {
            return Err(LpError::NonFinite("right-hand side"));
        }
    }
    Ok(())
}

/// Float simplex.
pub fn solve(lp: &LinearProgram<f64>, sense: Sense) -> Result<LpSolution<f64>, LpError> {
    check_finite(lp)?;
    solve_generic(lp, sense)
}

/// Exact rational simplex on the binary values of a float program.
pub fn solve_exact(lp: &LinearProgram<f64>, sense: Sense) -> Result<LpSolution<BigRational>, LpError> {
    check_finite(lp)?;
    solve_generic(&lp.to_rational()?, sense)
}

/// Exact rational simplex on a program already stated in rationals.
pub fn solve_rational(
    lp: &LinearProgram<BigRational>,
    sense: Sense,
) -> Result<LpSolution<BigRational>, LpError> {
    solve_generic(lp, sense)
}

/// Float view of an exact solution.
pub fn to_f64_solution(sol: &LpSolution<BigRational>) -> LpSolution<f64> {
    LpSolution {
        status: sol.status,
        point: sol.point.iter().map(Scalar::to_f64).collect(),
        objective_value: sol.objective_value.to_f64(),
        duals: sol.duals.iter().map(Scalar::to_f64).collect(),
        iterations: sol.iterations,
    }
}
