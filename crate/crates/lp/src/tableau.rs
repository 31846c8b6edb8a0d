//! Dense two-phase tableau simplex with Bland's rule.
//!
//! The problem handed in is always in maximization form with nonnegative
//! columns; `lib.rs` splits free variables and negates minimization
//! objectives before calling [`run`].

use crate::scalar::Scalar;
use crate::{LpError, Relation};

pub const ITERATION_CAP: usize = 10_000;

pub(crate) struct StandardForm<T> {
    pub a: Vec<Vec<T>>,
    pub b: Vec<T>,
    pub relation: Vec<Relation>,
    pub c: Vec<T>,
}

pub(crate) enum Outcome<T> {
    Optimal {
        /// Values of the standard-form columns.
        x: Vec<T>,
        value: T,
        /// Row duals of the (sign-normalized) standard form.
        duals: Vec<T>,
    },
    Infeasible,
    Unbounded,
}

pub(crate) struct Run<T> {
    pub outcome: Outcome<T>,
    pub iterations: usize,
    /// `true` for rows whose sign was flipped to make the right-hand side
    /// nonnegative; their duals must be negated by the caller.
    pub flipped: Vec<bool>,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    reduced: Vec<T>,
    value: T,
    /// Columns that may enter the basis.
    allowed: Vec<bool>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl<T: Scalar> Tableau<T> {
    fn n_cols(&self) -> usize {
        self.reduced.len()
    }

    fn price(&mut self, cost: &[T]) {
        let n = self.n_cols();
        let mut reduced = cost.to_vec();
        let mut value = T::zero();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, r) in reduced.iter_mut().enumerate().take(n) {
                *r = r.clone() - cb.clone() * self.rows[i][j].clone();
            }
            value = value + cb * self.rhs[i].clone();
        }
        self.reduced = reduced;
        self.value = value;
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let piv = self.rows[r][e].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / piv.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / piv;
        self.rows[r][e] = T::one();

        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][e].clone();
            if f.is_zero() {
                continue;
            }
            for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v = v.clone() - f.clone() * p.clone();
                }
            }
            self.rows[i][e] = T::zero();
            self.rhs[i] = self.rhs[i].clone() - f * pivot_rhs.clone();
        }
        let d = self.reduced[e].clone();
        if !d.is_zero() {
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v = v.clone() - d.clone() * p.clone();
                }
            }
            self.reduced[e] = T::zero();
            self.value = self.value.clone() + d * pivot_rhs;
        }
        self.basis[r] = e;
        self.iterations += 1;
    }

    /// Bland's rule: lowest-index improving column, then the minimum-ratio row
    /// with ties broken by lowest basic column index.
    fn iterate(&mut self) -> Result<Step, LpError> {
        loop {
            if self.iterations >= ITERATION_CAP {
                return Err(LpError::IterationLimit(ITERATION_CAP));
            }
            let entering = (0..self.n_cols()).find(|&j| self.allowed[j] && self.reduced[j].is_pos());
            let Some(e) = entering else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let t = &self.rows[i][e];
                if !t.is_pos() {
                    continue;
                }
                let num = if self.rhs[i] < T::zero() { T::zero() } else { self.rhs[i].clone() };
                let ratio = num / t.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, best)) => {
                        let smaller = ratio < best.clone() - T::tie_tol();
                        // Bland: among ties, the lowest basic index leaves
                        let tied = (ratio.clone() - best.clone()).abs_val() <= T::tie_tol();
                        if smaller || (tied && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Step::Unbounded);
            };
            self.pivot(r, e);
        }
    }
}

pub(crate) fn run<T: Scalar>(form: StandardForm<T>) -> Result<Run<T>, LpError> {
    let StandardForm { mut a, mut b, mut relation, c } = form;
    let m = a.len();
    let n = c.len();

    let mut flipped = vec![false; m];
    for i in 0..m {
        if b[i] < T::zero() {
            for v in a[i].iter_mut() {
                *v = -v.clone();
            }
            b[i] = -b[i].clone();
            relation[i] = match relation[i] {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            flipped[i] = true;
        }
    }

    let n_slack = relation.iter().filter(|r| !matches!(r, Relation::Eq)).count();
    let n_art = relation.iter().filter(|r| !matches!(r, Relation::Le)).count();
    let total = n + n_slack + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut identity_col = Vec::with_capacity(m);
    let mut is_art = vec![false; total];
    let (mut s, mut t) = (n, n + n_slack);
    for i in 0..m {
        let mut row = vec![T::zero(); total];
        for (j, v) in a[i].iter().enumerate() {
            row[j] = v.clone();
        }
        match relation[i] {
            Relation::Le => {
                row[s] = T::one();
                basis.push(s);
                identity_col.push(s);
                s += 1;
            }
            Relation::Ge => {
                row[s] = -T::one();
                s += 1;
                row[t] = T::one();
                is_art[t] = true;
                basis.push(t);
                identity_col.push(t);
                t += 1;
            }
            Relation::Eq => {
                row[t] = T::one();
                is_art[t] = true;
                basis.push(t);
                identity_col.push(t);
                t += 1;
            }
        }
        rows.push(row);
    }

    let mut tab = Tableau {
        rows,
        rhs: b,
        basis,
        reduced: vec![T::zero(); total],
        value: T::zero(),
        allowed: vec![true; total],
        iterations: 0,
    };

    if n_art > 0 {
        let phase1: Vec<T> = (0..total)
            .map(|j| if is_art[j] { -T::one() } else { T::zero() })
            .collect();
        tab.price(&phase1);
        tab.iterate()?;
        if tab.value.is_neg() {
            return Ok(Run { outcome: Outcome::Infeasible, iterations: tab.iterations, flipped });
        }
        // Drive zero-level artificials out of the basis. A row with no
        // usable non-artificial entry is redundant and stays inert.
        for r in 0..m {
            if !is_art[tab.basis[r]] {
                continue;
            }
            if let Some(e) = (0..n + n_slack).find(|&j| tab.rows[r][j].abs_val().is_pos()) {
                tab.pivot(r, e);
            }
        }
        for (j, art) in is_art.iter().enumerate() {
            if *art {
                tab.allowed[j] = false;
            }
        }
    }

    let mut phase2 = vec![T::zero(); total];
    phase2[..n].clone_from_slice(&c);
    tab.price(&phase2);
    match tab.iterate()? {
        Step::Unbounded => {
            return Ok(Run { outcome: Outcome::Unbounded, iterations: tab.iterations, flipped })
        }
        Step::Optimal => {}
    }

    let mut x = vec![T::zero(); n];
    for (i, &bi) in tab.basis.iter().enumerate() {
        if bi < n {
            let v = tab.rhs[i].clone();
            x[bi] = if v < T::zero() && !v.is_neg() { T::zero() } else { v };
        }
    }
    let duals = identity_col.iter().map(|&j| -tab.reduced[j].clone()).collect();
    Ok(Run {
        outcome: Outcome::Optimal { x, value: tab.value, duals },
        iterations: tab.iterations,
        flipped,
    })
}
