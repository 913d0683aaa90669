//! Equality-form feasibility programs `A q = b, q >= 0` with rigorous
//! infeasibility certificates.
//!
//! The solver minimizes the infinity-norm residual
//! `margin = min { max_i |(A q - b)_i| : q >= 0 }` as a plain LP. A zero
//! margin yields a feasible witness; a positive margin yields a Farkas dual
//! `y` with `y^T A <= 0` and `y^T b > 0`, which is then repaired to satisfy
//! the sign conditions strictly and re-verified in exact rational or
//! outward-rounded interval arithmetic. A certificate that fails
//! verification downgrades the result to `Borderline` — never to a silent
//! `Infeasible`.

use crate::error::Error;
use crate::interval::Interval;
use crate::simplex::{self, LpStatus, StandardForm};
use crate::Result;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::BTreeMap;

/// Provenance of a constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowTag {
    /// `sum_t q(o, t) = P(o)` for one all-ambiguous outcome tuple `o`.
    BlockMarginal,
    /// `sum_{o : o_X = i} q(o, t) = C^-m * r_X(i|t)`.
    PartyPattern,
    /// `sum_o q(o, t) = C^-m`.
    Normalization,
    /// Hand-built rows (tests, toy instances).
    Custom,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    /// Sparse coefficients `(variable, value)`; values must be exactly
    /// representable in an `f64` (ours are 0/1 incidence entries).
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub tag: RowTag,
}

#[derive(Clone, Debug)]
pub struct LpInstance {
    pub num_vars: usize,
    pub rows: Vec<LpRow>,
    /// Exact right-hand sides, when every entry is rational.
    pub rhs_exact: Option<Vec<BigRational>>,
    /// Rigorous enclosures of the right-hand sides, when available.
    pub rhs_intervals: Option<Vec<Interval>>,
}

impl LpInstance {
    pub fn new(num_vars: usize, rows: Vec<LpRow>) -> LpInstance {
        LpInstance {
            num_vars,
            rows,
            rhs_exact: None,
            rhs_intervals: None,
        }
    }

    pub fn with_exact_rhs(mut self, rhs: Vec<BigRational>) -> LpInstance {
        assert_eq!(rhs.len(), self.rows.len());
        self.rhs_exact = Some(rhs);
        self
    }

    pub fn with_interval_rhs(mut self, rhs: Vec<Interval>) -> LpInstance {
        assert_eq!(rhs.len(), self.rows.len());
        self.rhs_intervals = Some(rhs);
        self
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn tag_counts(&self) -> BTreeMap<RowTag, usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row.tag).or_insert(0) += 1;
        }
        counts
    }

    /// `max_i |(A q - b)_i|`.
    pub fn residual(&self, q: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let lhs: f64 = row.coeffs.iter().map(|&(v, a)| a * q[v]).sum();
                (lhs - row.rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl std::cmp::Ord for RowTag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

impl std::cmp::PartialOrd for RowTag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A dual vector witnessing infeasibility: `y^T A <= 0` and `y^T b > 0`.
#[derive(Clone, Debug, Serialize)]
pub struct FarkasCertificate {
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Exact,
    Interval,
}

#[derive(Clone, Debug)]
pub enum FeasibilityOutcome {
    Feasible {
        witness: Vec<f64>,
        residual: f64,
    },
    Infeasible {
        certificate: FarkasCertificate,
        margin: f64,
        verification: VerifyMode,
    },
    Borderline {
        margin: f64,
    },
}

/// Default margin tolerance separating Feasible from certifiable.
pub const DEFAULT_LP_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 200_000;

/// Solve the margin program. Returns `(margin, q, farkas_y)` where
/// `farkas_y` combines the duals of the paired inequality rows.
fn solve_margin(lp: &LpInstance) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let m = lp.rows.len();
    let n = lp.num_vars;
    // variables: q (n), s (1), slacks (2m)
    let cols = n + 1 + 2 * m;
    let mut rows = Vec::with_capacity(2 * m);
    let mut rhs = Vec::with_capacity(2 * m);
    for (i, row) in lp.rows.iter().enumerate() {
        let mut up = vec![0.0; cols];
        let mut down = vec![0.0; cols];
        for &(v, a) in &row.coeffs {
            up[v] = a;
            down[v] = -a;
        }
        up[n] = -1.0;
        down[n] = -1.0;
        up[n + 1 + 2 * i] = 1.0;
        down[n + 1 + 2 * i + 1] = 1.0;
        rows.push(up);
        rhs.push(row.rhs);
        rows.push(down);
        rhs.push(-row.rhs);
    }
    let mut objective = vec![0.0; cols];
    objective[n] = 1.0;
    let problem = StandardForm {
        num_vars: cols,
        rows,
        rhs,
        objective,
    };
    let sol = simplex::solve(&problem, MAX_PIVOTS)?;
    if sol.status != LpStatus::Optimal {
        // the margin program is always feasible; anything else is a fault
        return Err(Error::SolverStall { pivots: MAX_PIVOTS });
    }
    let margin = sol.objective;
    let q = sol.x[..n].to_vec();
    let farkas: Vec<f64> = (0..m)
        .map(|i| sol.duals[2 * i] - sol.duals[2 * i + 1])
        .collect();
    Ok((margin, q, farkas))
}

/// Exact combination `(y^T A)_v` for every variable. Certificate entries and
/// coefficients are finite doubles, hence exact rationals.
fn exact_combination(lp: &LpInstance, y: &[f64]) -> Vec<BigRational> {
    let mut combo = vec![BigRational::zero(); lp.num_vars];
    for (i, row) in lp.rows.iter().enumerate() {
        if y[i] == 0.0 {
            continue;
        }
        let yi = BigRational::from_f64(y[i]).expect("finite certificate entry");
        for &(v, a) in &row.coeffs {
            combo[v] += &yi * BigRational::from_f64(a).expect("finite coefficient");
        }
    }
    combo
}

/// Shift the raw dual so that `y^T A <= 0` holds exactly, exploiting that
/// every coefficient is nonnegative: lowering any `y_r` on a row with a
/// positive coefficient on variable `v` can only lower `(y^T A)_v`. The
/// shifts are tiny (solver noise), so `y^T b` barely moves.
fn repair_certificate(lp: &LpInstance, y: &mut [f64]) {
    if lp
        .rows
        .iter()
        .any(|r| r.coeffs.iter().any(|&(_, a)| a < 0.0))
    {
        return; // repair argument needs nonnegative coefficients
    }
    // first positive-coefficient row per variable
    let mut repair_row = vec![usize::MAX; lp.num_vars];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(v, a) in &row.coeffs {
            if a > 0.0 && repair_row[v] == usize::MAX {
                repair_row[v] = i;
            }
        }
    }
    for _ in 0..4 {
        let combo = exact_combination(lp, y);
        let mut clean = true;
        for v in 0..lp.num_vars {
            if combo[v].is_positive() && repair_row[v] != usize::MAX {
                clean = false;
                let r = repair_row[v];
                let a = lp.rows[r]
                    .coeffs
                    .iter()
                    .find(|&&(w, _)| w == v)
                    .unwrap()
                    .1;
                let excess = combo[v].to_f64().unwrap_or(f64::MIN_POSITIVE) / a;
                // next_up twice outruns the rounding of the division; the
                // min() guarantees progress even when the shift would be
                // absorbed by a large y[r]
                let shift = excess.next_up().next_up().max(f64::MIN_POSITIVE);
                y[r] = (y[r] - shift).min(y[r].next_down());
            }
        }
        if clean {
            return;
        }
    }
}

/// Strict verification of a Farkas certificate.
///
/// Exact mode needs `rhs_exact`; the certificate entries are taken as exact
/// rationals. Interval mode needs `rhs_intervals` (falling back to point
/// intervals of the float rhs) and checks the outward-rounded bounds.
pub fn verify_certificate(
    lp: &LpInstance,
    cert: &FarkasCertificate,
    mode: VerifyMode,
) -> Result<bool> {
    if cert.y.len() != lp.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: lp.rows.len(),
            got: cert.y.len(),
        });
    }
    match mode {
        VerifyMode::Exact => {
            let rhs = lp
                .rhs_exact
                .as_ref()
                .ok_or(Error::ModeUnavailable("no exact right-hand sides"))?;
            if exact_combination(lp, &cert.y)
                .iter()
                .any(|d| d.is_positive())
            {
                return Ok(false);
            }
            let value: BigRational = rhs
                .iter()
                .zip(&cert.y)
                .map(|(b, &yi)| b * BigRational::from_f64(yi).expect("finite entry"))
                .sum();
            Ok(value.is_positive())
        }
        VerifyMode::Interval => {
            // y and A are exact rationals; only the right-hand sides need
            // enclosures.
            if exact_combination(lp, &cert.y)
                .iter()
                .any(|d| d.is_positive())
            {
                return Ok(false);
            }
            let point_rhs: Vec<Interval>;
            let rhs = match &lp.rhs_intervals {
                Some(r) => r,
                None => {
                    point_rhs = lp.rows.iter().map(|r| Interval::point(r.rhs)).collect();
                    &point_rhs
                }
            };
            let mut value = Interval::zero();
            for (i, b) in rhs.iter().enumerate() {
                value = value + Interval::point(cert.y[i]) * *b;
            }
            Ok(value.lower() > 0.0)
        }
    }
}

/// Just the margin, skipping certificate extraction and verification; the
/// search loop's inner objective.
pub fn feasibility_margin(lp: &LpInstance) -> Result<f64> {
    Ok(solve_margin(lp)?.0)
}

/// Phase-1 style feasibility decision with certification.
pub fn solve_feasibility(lp: &LpInstance, tol: f64) -> Result<FeasibilityOutcome> {
    let (margin, q, mut y) = solve_margin(lp)?;
    if margin <= tol {
        let residual = lp.residual(&q);
        if residual <= tol && q.iter().all(|&v| v >= -1e-12) {
            return Ok(FeasibilityOutcome::Feasible {
                witness: q,
                residual,
            });
        }
        // solver and recomputation disagree; stay honest
        return Ok(FeasibilityOutcome::Borderline {
            margin: residual.max(margin),
        });
    }
    repair_certificate(lp, &mut y);
    let certificate = FarkasCertificate { y };
    let mode = if lp.rhs_exact.is_some() {
        VerifyMode::Exact
    } else {
        VerifyMode::Interval
    };
    if verify_certificate(lp, &certificate, mode)? {
        Ok(FeasibilityOutcome::Infeasible {
            certificate,
            margin,
            verification: mode,
        })
    } else {
        Ok(FeasibilityOutcome::Borderline { margin })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn toy_infeasible() -> LpInstance {
        LpInstance::new(
            1,
            vec![
                LpRow {
                    coeffs: vec![(0, 1.0)],
                    rhs: 1.0,
                    tag: RowTag::Custom,
                },
                LpRow {
                    coeffs: vec![(0, 1.0)],
                    rhs: 2.0,
                    tag: RowTag::Custom,
                },
            ],
        )
        .with_exact_rhs(vec![rat(1, 1), rat(2, 1)])
    }

    #[test]
    fn toy_infeasible_yields_exact_certificate() {
        let lp = toy_infeasible();
        match solve_feasibility(&lp, DEFAULT_LP_TOL).unwrap() {
            FeasibilityOutcome::Infeasible {
                certificate,
                margin,
                verification,
            } => {
                assert!((margin - 0.5).abs() < 1e-9);
                assert_eq!(verification, VerifyMode::Exact);
                assert!(verify_certificate(&lp, &certificate, VerifyMode::Exact).unwrap());
                assert!(verify_certificate(&lp, &certificate, VerifyMode::Interval).unwrap());
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn hand_certificates_verify_by_sign() {
        let lp = toy_infeasible();
        let good = FarkasCertificate { y: vec![-1.0, 1.0] };
        let bad = FarkasCertificate { y: vec![1.0, -1.0] };
        assert!(verify_certificate(&lp, &good, VerifyMode::Exact).unwrap());
        assert!(!verify_certificate(&lp, &bad, VerifyMode::Exact).unwrap());
        assert!(verify_certificate(&lp, &good, VerifyMode::Interval).unwrap());
        assert!(!verify_certificate(&lp, &bad, VerifyMode::Interval).unwrap());
    }

    #[test]
    fn feasible_system_returns_witness() {
        let lp = LpInstance::new(
            2,
            vec![
                LpRow {
                    coeffs: vec![(0, 1.0), (1, 1.0)],
                    rhs: 1.0,
                    tag: RowTag::Custom,
                },
                LpRow {
                    coeffs: vec![(0, 1.0)],
                    rhs: 0.25,
                    tag: RowTag::Custom,
                },
            ],
        );
        match solve_feasibility(&lp, DEFAULT_LP_TOL).unwrap() {
            FeasibilityOutcome::Feasible { witness, residual } => {
                assert!(residual <= DEFAULT_LP_TOL);
                assert!((witness[0] - 0.25).abs() < 1e-9);
                assert!((witness[1] - 0.75).abs() < 1e-9);
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn unverifiable_certificate_downgrades_to_borderline() {
        // infeasible floats, but enclosures so wide the claim cannot be
        // certified
        let mut lp = toy_infeasible();
        lp.rhs_exact = None;
        lp = lp.with_interval_rhs(vec![Interval::new(0.0, 2.0), Interval::new(0.0, 2.0)]);
        match solve_feasibility(&lp, DEFAULT_LP_TOL).unwrap() {
            FeasibilityOutcome::Borderline { margin } => {
                assert!(margin > 0.4);
            }
            other => panic!("expected Borderline, got {other:?}"),
        }
    }

    #[test]
    fn certificate_dimension_is_checked() {
        let lp = toy_infeasible();
        let wrong = FarkasCertificate { y: vec![1.0] };
        assert!(matches!(
            verify_certificate(&lp, &wrong, VerifyMode::Exact),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exact_mode_requires_exact_rhs() {
        let mut lp = toy_infeasible();
        lp.rhs_exact = None;
        let cert = FarkasCertificate { y: vec![-1.0, 1.0] };
        assert!(matches!(
            verify_certificate(&lp, &cert, VerifyMode::Exact),
            Err(Error::ModeUnavailable(_))
        ));
    }

    #[test]
    fn repaired_certificates_pass_strict_signs() {
        // a dual with a slightly positive combination gets repaired
        let lp = toy_infeasible();
        let mut y = vec![-0.5 + 3e-13, 0.5];
        repair_certificate(&lp, &mut y);
        let cert = FarkasCertificate { y };
        assert!(verify_certificate(&lp, &cert, VerifyMode::Exact).unwrap());
    }
}
