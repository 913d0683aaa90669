//! Dense two-phase primal simplex, generic over the scalar field.
//!
//! One implementation serves two duties: exact feasibility over
//! `BigRational` (PFIS systems) and float solves of the infeasibility-margin
//! program with dual extraction. Entering columns follow Dantzig's rule and
//! fall back to Bland's rule after a run of degenerate pivots, so the solver
//! is deterministic and cannot cycle.

use crate::error::Error;
use crate::Result;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub trait Scalar: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    /// Magnitudes at or below this threshold are treated as zero when
    /// selecting pivots.
    fn is_negligible(&self) -> bool;
    fn is_zero(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> f64 {
        0.0
    }
    fn one() -> f64 {
        1.0
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn div(&self, o: &f64) -> f64 {
        self / o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn abs(&self) -> f64 {
        f64::abs(*self)
    }
    fn is_negligible(&self) -> bool {
        f64::abs(*self) <= 1e-10
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_negligible(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// `minimize objective . x  subject to  rows . x = rhs, x >= 0`.
#[derive(Clone, Debug)]
pub struct StandardForm<S> {
    pub num_vars: usize,
    pub rows: Vec<Vec<S>>,
    pub rhs: Vec<S>,
    pub objective: Vec<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct Solution<S> {
    pub status: LpStatus,
    /// Primal point (all original variables); meaningful when `Optimal`.
    pub x: Vec<S>,
    /// Optimal objective value; phase-1 residual when `Infeasible`.
    pub objective: S,
    /// Duals of the equality rows, `y = c_B B^-1`, valid when `Optimal`.
    pub duals: Vec<S>,
}

/// Number of consecutive degenerate pivots after which the entering rule
/// switches from Dantzig to Bland.
const STALL_SWITCH: usize = 64;

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
    basis: Vec<usize>,
    total_cols: usize,
}

impl<S: Scalar> Tableau<S> {
    fn reduced_costs(&self, costs: &[S]) -> (Vec<S>, S) {
        let m = self.rows.len();
        let mut rc = costs.to_vec();
        let mut obj = S::zero();
        for i in 0..m {
            let cb = &costs[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            obj = obj.add(&cb.mul(&self.rhs[i]));
            for j in 0..self.total_cols {
                if !self.rows[i][j].is_zero() {
                    rc[j] = rc[j].sub(&cb.mul(&self.rows[i][j]));
                }
            }
        }
        (rc, obj)
    }

    fn pivot(&mut self, row: usize, col: usize, rc: &mut [S], obj: &mut S) {
        let piv = self.rows[row][col].clone();
        for j in 0..self.total_cols {
            self.rows[row][j] = self.rows[row][j].div(&piv);
        }
        self.rhs[row] = self.rhs[row].div(&piv);
        *obj = obj.add(&rc[col].mul(&self.rhs[row]));
        let factor = rc[col].clone();
        if !factor.is_zero() {
            for j in 0..self.total_cols {
                if !self.rows[row][j].is_zero() {
                    rc[j] = rc[j].sub(&factor.mul(&self.rows[row][j]));
                }
            }
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let f = self.rows[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..self.total_cols {
                if !self.rows[row][j].is_zero() {
                    self.rows[i][j] = self.rows[i][j].sub(&f.mul(&self.rows[row][j]));
                }
            }
            self.rhs[i] = self.rhs[i].sub(&f.mul(&self.rhs[row]));
        }
        self.basis[row] = col;
    }

    /// Minimize `costs . x` from the current basis. `allowed` masks columns
    /// permitted to enter. Returns the optimal objective value.
    fn optimize(
        &mut self,
        costs: &[S],
        allowed: &[bool],
        max_pivots: &mut usize,
    ) -> Result<(S, Vec<S>)> {
        let (mut rc, mut obj) = self.reduced_costs(costs);
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            // entering column
            let entering: Option<usize>;
            if bland {
                entering = (0..self.total_cols)
                    .find(|&j| allowed[j] && rc[j] < S::zero() && !rc[j].is_negligible());
            } else {
                let mut best: Option<(usize, S)> = None;
                for j in 0..self.total_cols {
                    if allowed[j] && rc[j] < S::zero() && !rc[j].is_negligible() {
                        match &best {
                            Some((_, b)) if rc[j] >= *b => {}
                            _ => best = Some((j, rc[j].clone())),
                        }
                    }
                }
                entering = best.map(|(j, _)| j);
            }
            let Some(e) = entering else {
                return Ok((obj, rc));
            };
            // ratio test, ties broken by smallest basic variable index
            let mut leave: Option<(usize, S)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if *a > S::zero() && !a.is_negligible() {
                    let ratio = self.rhs[i].div(a);
                    match &leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < *lr
                                || (ratio == *lr && self.basis[i] < self.basis[*li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                // Unbounded in the direction of x_e. None of the programs
                // built here are unbounded, so treat it as a solver fault.
                return Err(Error::SolverStall { pivots: 0 });
            };
            if ratio.is_negligible() {
                degenerate_run += 1;
                if degenerate_run >= STALL_SWITCH {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            if *max_pivots == 0 {
                return Err(Error::SolverStall { pivots: 0 });
            }
            *max_pivots -= 1;
            self.pivot(r, e, &mut rc, &mut obj);
        }
    }
}

pub fn solve<S: Scalar>(problem: &StandardForm<S>, max_pivots: usize) -> Result<Solution<S>> {
    let m = problem.rows.len();
    let n = problem.num_vars;
    assert!(problem.rows.iter().all(|r| r.len() == n));
    assert_eq!(problem.rhs.len(), m);
    assert_eq!(problem.objective.len(), n);

    // Normalize to rhs >= 0, remembering row flips for dual extraction.
    let mut flips = vec![false; m];
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(m);
    let mut rhs: Vec<S> = Vec::with_capacity(m);
    for i in 0..m {
        if problem.rhs[i] < S::zero() {
            flips[i] = true;
            rows.push(problem.rows[i].iter().map(|v| v.neg()).collect());
            rhs.push(problem.rhs[i].neg());
        } else {
            rows.push(problem.rows[i].clone());
            rhs.push(problem.rhs[i].clone());
        }
    }

    // Crash basis: reuse existing unit columns where possible, add
    // artificials elsewhere. Artificial columns double as the identity slice
    // needed to read off duals at the end.
    let mut col_is_unit_at: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        let mut unit_row = None;
        let mut ok = true;
        for i in 0..m {
            let v = &rows[i][j];
            if v.is_zero() {
                continue;
            }
            if *v == S::one() && unit_row.is_none() {
                unit_row = Some(i);
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            col_is_unit_at[j] = unit_row;
        }
    }
    let mut basis: Vec<Option<usize>> = vec![None; m];
    for j in 0..n {
        if let Some(i) = col_is_unit_at[j] {
            if basis[i].is_none() {
                basis[i] = Some(j);
            }
        }
    }

    // Append a full identity slice. Its columns serve as artificial
    // variables where no crash column was found, and expose B^-1 (hence the
    // duals) at termination either way.
    let total_cols = n + m;
    let mut trows: Vec<Vec<S>> = rows
        .into_iter()
        .map(|mut r| {
            r.extend(std::iter::repeat_with(S::zero).take(m));
            r
        })
        .collect();
    let mut artificial = vec![false; total_cols];
    for i in 0..m {
        trows[i][n + i] = S::one();
        artificial[n + i] = true;
    }
    let mut final_basis = Vec::with_capacity(m);
    for (i, b) in basis.iter().enumerate() {
        final_basis.push(b.unwrap_or(n + i));
    }

    let mut tab = Tableau {
        rows: trows,
        rhs,
        basis: final_basis,
        total_cols,
    };

    let mut budget = max_pivots;

    // Phase 1: minimize the sum of artificials.
    let needs_phase1 = tab.basis.iter().any(|&b| artificial[b]);
    if needs_phase1 {
        let phase1_costs: Vec<S> = (0..total_cols)
            .map(|j| if artificial[j] { S::one() } else { S::zero() })
            .collect();
        let allowed: Vec<bool> = (0..total_cols).map(|j| !artificial[j]).collect();
        let (p1, _) = tab.optimize(&phase1_costs, &allowed, &mut budget)?;
        if p1 > S::zero() && !p1.is_negligible() {
            return Ok(Solution {
                status: LpStatus::Infeasible,
                x: vec![S::zero(); n],
                objective: p1,
                duals: vec![S::zero(); m],
            });
        }
        // Drive lingering artificials out of the basis where possible;
        // rows that stay artificial are redundant and inert.
        for i in 0..m {
            if artificial[tab.basis[i]] {
                if let Some(j) = (0..n).find(|&j| !tab.rows[i][j].is_negligible()) {
                    let (mut rc, mut obj) = (vec![S::zero(); total_cols], S::zero());
                    tab.pivot(i, j, &mut rc, &mut obj);
                }
            }
        }
    }

    // Phase 2 over the true objective; artificial columns stay barred.
    let mut costs: Vec<S> = problem.objective.clone();
    costs.extend(std::iter::repeat_with(S::zero).take(m));
    let allowed: Vec<bool> = (0..total_cols).map(|j| !artificial[j]).collect();
    let (obj, rc) = tab.optimize(&costs, &allowed, &mut budget)?;

    let mut x = vec![S::zero(); n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs[i].clone();
        }
    }
    // Duals from the artificial slice: the tableau column of artificial i is
    // B^-1 e_i, so rc(art_i) = -y_i. Undo row flips.
    let mut duals = Vec::with_capacity(m);
    for i in 0..m {
        let y = rc[n + i].neg();
        duals.push(if flips[i] { y.neg() } else { y });
    }
    Ok(Solution {
        status: LpStatus::Optimal,
        x,
        objective: obj,
        duals,
    })
}
