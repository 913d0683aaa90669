//! The Finner inequality `P(o) <= prod_j marginal_j(o_j)^delta_j` for
//! distributions on a network with PFIS weights, with exact equality
//! detection in rational mode.
//!
//! Classical CM distributions must satisfy the bound; the equality set is
//! the operational precondition of the rigidity argument. Quantum tables may
//! be passed in, but the outcome is informational only.

use crate::dist::{Distribution, Mode, Outcome};
use crate::error::Error;
use crate::net::{FinnerWeights, Network};
use crate::Result;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Default relative tolerance on the lhs/rhs ratio in float mode.
pub const DEFAULT_FINNER_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FinnerEntry {
    pub outcome: Vec<Outcome>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct FinnerReport {
    pub violations: Vec<FinnerEntry>,
    pub equalities: Vec<Vec<Outcome>>,
    pub max_ratio: f64,
}

/// Check every support point of `d` against the Finner bound with the given
/// weights. Exact comparisons in rational mode (clearing denominators in the
/// exponents), ratio comparisons within `tol` in float mode.
pub fn finner_check(
    d: &Distribution,
    net: &Network,
    weights: &FinnerWeights,
    tol: f64,
) -> Result<FinnerReport> {
    weights.validate(net)?;
    let names: Vec<String> = net.parties.iter().map(|p| p.name.clone()).collect();
    if d.parties() != names.as_slice() {
        return Err(Error::AlphabetMismatch(
            "weights and distribution refer to different parties".into(),
        ));
    }
    let delta = weights.aligned(net)?;
    let n = names.len();
    let marginals: Vec<Distribution> = (0..n).map(|p| d.marginal(&[p]).unwrap()).collect();

    // common denominator q and integer exponents p_j = delta_j * q
    let q: BigInt = delta
        .iter()
        .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
    let exponents: Vec<BigInt> = delta
        .iter()
        .map(|w| w.numer() * (&q / w.denom()))
        .collect();

    let mut violations = Vec::new();
    let mut equalities = Vec::new();
    let mut max_ratio = f64::NEG_INFINITY;
    for (key, prob) in d.table() {
        let lhs_f = prob.to_f64();
        let mut rhs_f = 1.0;
        for p in 0..n {
            let m = marginals[p].get(std::slice::from_ref(&key[p])).to_f64();
            rhs_f *= m.powf(delta[p].to_f64().unwrap());
        }
        let ratio = if rhs_f > 0.0 { lhs_f / rhs_f } else { f64::INFINITY };
        max_ratio = max_ratio.max(ratio);

        let (violated, equal) = if d.mode() == Mode::Exact {
            // compare lhs^q against prod marginal^{p_j} in exact arithmetic
            let lhs = prob.as_exact().unwrap();
            let lhs_pow = pow_big(lhs, &q);
            let mut rhs_pow = BigRational::one();
            for p in 0..n {
                let m = marginals[p].get(std::slice::from_ref(&key[p]));
                rhs_pow *= pow_big(m.as_exact().unwrap(), &exponents[p]);
            }
            (lhs_pow > rhs_pow, lhs_pow == rhs_pow)
        } else {
            (ratio > 1.0 + tol, (ratio - 1.0).abs() <= tol)
        };
        if violated {
            violations.push(FinnerEntry {
                outcome: key.clone(),
                lhs: lhs_f,
                rhs: rhs_f,
            });
        } else if equal {
            equalities.push(key.clone());
        }
    }
    if max_ratio == f64::NEG_INFINITY {
        max_ratio = 0.0;
    }
    Ok(FinnerReport {
        violations,
        equalities,
        max_ratio,
    })
}

fn pow_big(base: &BigRational, exp: &BigInt) -> BigRational {
    assert!(!exp.is_negative(), "PFIS weights are nonnegative");
    if base.is_zero() {
        return if exp.is_zero() {
            BigRational::one()
        } else {
            BigRational::zero()
        };
    }
    let mut result = BigRational::one();
    let mut factor = base.clone();
    let mut e = exp.clone();
    let two = BigInt::from(2);
    while !e.is_zero() {
        if e.is_odd() {
            result *= &factor;
        }
        factor = &factor * &factor;
        e /= &two;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{compute_pcolor, CompatibilityIndex, TupleSet};
    use crate::net::{fig1_network, make_gm, make_kn, solve_pfis};
    use std::collections::BTreeMap;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn fig1_weights() -> FinnerWeights {
        FinnerWeights {
            delta: [
                ("A", rat(1, 2)),
                ("B", rat(1, 4)),
                ("C", rat(1, 4)),
                ("D", rat(1, 2)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        }
    }

    #[test]
    fn fig1_equality_set_is_the_tuple_outcomes() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let d = compute_pcolor(&net, &t).unwrap();
        let report = finner_check(&d, &net, &fig1_weights(), DEFAULT_FINNER_TOL).unwrap();
        assert!(report.violations.is_empty());
        assert_eq!(report.equalities.len(), 6);
        // the equality outcomes are exactly the outcomes of assignments in T
        let index = CompatibilityIndex::new(&net, &t).unwrap();
        let mut expected: Vec<Vec<Outcome>> =
            t.iter().map(|a| index.classical_outcome(a)).collect();
        expected.sort();
        let mut got = report.equalities.clone();
        got.sort();
        assert_eq!(got, expected);
        assert!(report.max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn all_chi_outcome_is_strict() {
        let net = fig1_network();
        let d = compute_pcolor(&net, &TupleSet::fig1()).unwrap();
        let report = finner_check(&d, &net, &fig1_weights(), DEFAULT_FINNER_TOL).unwrap();
        let all_chi = vec![Outcome::Chi; 4];
        assert!(!report.equalities.contains(&all_chi));
        assert!(report.violations.iter().all(|v| v.outcome != all_chi));
        // lhs 1/9 < rhs (1/3)^(3/2)
        let lhs = d.get(&all_chi).to_f64();
        assert!((lhs - 1.0 / 9.0).abs() < 1e-15);
        assert!(lhs < (1.0f64 / 3.0).powf(1.5));
    }

    #[test]
    fn product_distribution_has_no_violations() {
        // parties independent: P = P_A x P_B on a single-source pair network
        let net = crate::net::Network {
            colors: 2,
            sources: vec![crate::net::Source {
                name: "S".into(),
                legs: vec!["A".into(), "B".into()],
            }],
            parties: vec![
                crate::net::Party {
                    name: "A".into(),
                    view: vec!["S".into()],
                },
                crate::net::Party {
                    name: "B".into(),
                    view: vec!["S".into()],
                },
            ],
        };
        let mut table = BTreeMap::new();
        for a in 0..2u32 {
            for b in 0..2u32 {
                let p = rat(if a == 0 { 1 } else { 3 }, 4) * rat(if b == 0 { 1 } else { 1 }, 2);
                table.insert(
                    vec![Outcome::View(vec![a]), Outcome::View(vec![b])],
                    p,
                );
            }
        }
        let d = Distribution::from_exact(&net, table).unwrap();
        let w = solve_pfis(&net).unwrap().unwrap();
        let report = finner_check(&d, &net, &w, DEFAULT_FINNER_TOL).unwrap();
        assert!(report.violations.is_empty());
    }

    #[test]
    fn classical_cm_satisfies_finner_on_builtin_networks() {
        for (net, tuples) in [
            (make_kn(4).unwrap(), None),
            (make_kn(5).unwrap(), None),
            (make_gm(3).unwrap(), None),
            (make_gm(4).unwrap(), None),
            (fig1_network(), Some(TupleSet::fig1())),
        ] {
            let t = tuples
                .unwrap_or_else(|| TupleSet::constants(net.num_sources(), net.colors));
            let d = compute_pcolor(&net, &t).unwrap();
            let w = FinnerWeights::uniform(&net)
                .or_else(|_| solve_pfis(&net).map(|o| o.unwrap()))
                .unwrap();
            let report = finner_check(&d, &net, &w, DEFAULT_FINNER_TOL).unwrap();
            assert!(
                report.violations.is_empty(),
                "violations on {} sources",
                net.num_sources()
            );
        }
    }

    #[test]
    fn report_is_deterministic() {
        let net = fig1_network();
        let d = compute_pcolor(&net, &TupleSet::fig1()).unwrap();
        let r1 = finner_check(&d, &net, &fig1_weights(), DEFAULT_FINNER_TOL).unwrap();
        let r2 = finner_check(&d, &net, &fig1_weights(), DEFAULT_FINNER_TOL).unwrap();
        assert_eq!(r1.equalities, r2.equalities);
        assert_eq!(r1.max_ratio, r2.max_ratio);
    }

    #[test]
    fn weight_mismatch_is_an_error() {
        let net = fig1_network();
        let d = compute_pcolor(&net, &TupleSet::fig1()).unwrap();
        let mut w = fig1_weights();
        w.delta.remove("D");
        assert!(finner_check(&d, &net, &w, DEFAULT_FINNER_TOL).is_err());
    }
}
