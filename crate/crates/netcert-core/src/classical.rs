//! The classical (decohered) color-matching strategy.
//!
//! Sources take uniform colors; a party whose view extends to a tuple of the
//! global set `T` reports the view, anyone else reports the ambiguous
//! symbol. Everything here is exact: probabilities are counts over the `C^m`
//! equally likely assignments.

use crate::dist::{Distribution, Outcome};
use crate::error::Error;
use crate::net::{Color, Network};
use crate::par;
use crate::{Result, DEFAULT_ENUMERATION_CAP};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// A global color assignment: one color per source, in declaration order.
pub type ColorAssignment = Vec<Color>;

/// The global set of compatible color tuples. Always contains every constant
/// tuple `(c, ..., c)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TupleSet {
    tuples: BTreeSet<Vec<Color>>,
}

impl TupleSet {
    pub fn new(tuples: impl IntoIterator<Item = Vec<Color>>) -> TupleSet {
        TupleSet {
            tuples: tuples.into_iter().collect(),
        }
    }

    /// The worked three-color set `{000, 111, 222, 021, 210, 102}`.
    pub fn fig1() -> TupleSet {
        TupleSet::new([
            vec![0, 0, 0],
            vec![1, 1, 1],
            vec![2, 2, 2],
            vec![0, 2, 1],
            vec![2, 1, 0],
            vec![1, 0, 2],
        ])
    }

    /// Color matches only: the constant tuples over `num_sources` sources.
    pub fn constants(num_sources: usize, colors: Color) -> TupleSet {
        TupleSet::new((0..colors).map(|c| vec![c; num_sources]))
    }

    pub fn validate_for(&self, net: &Network) -> Result<()> {
        let m = net.num_sources();
        for t in &self.tuples {
            if t.len() != m {
                return Err(Error::InvalidTupleSet(format!(
                    "tuple of length {} for {} sources",
                    t.len(),
                    m
                )));
            }
            if let Some(c) = t.iter().find(|c| **c >= net.colors) {
                return Err(Error::InvalidTupleSet(format!(
                    "color {c} out of range [0, {})",
                    net.colors
                )));
            }
        }
        for c in 0..net.colors {
            if !self.tuples.contains(&vec![c; m]) {
                return Err(Error::InvalidTupleSet(format!(
                    "missing constant tuple ({c}, ..., {c})"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, tuple: &[Color]) -> bool {
        self.tuples.contains(tuple)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<Color>> {
        self.tuples.iter()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Raw<'a> {
            tuples: &'a BTreeSet<Vec<Color>>,
        }
        serde_json::to_string_pretty(&Raw {
            tuples: &self.tuples,
        })
        .expect("tuple set serializes")
    }

    pub fn from_json(text: &str) -> Result<TupleSet> {
        #[derive(Deserialize)]
        struct Raw {
            tuples: Vec<Vec<Color>>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Ok(TupleSet::new(raw.tuples))
    }
}

/// Per-party compatible/ambiguous view bookkeeping for a `(network, T)`
/// pair. The ambiguous views are listed in lexicographic order; their
/// positions define the refined outcome indices.
#[derive(Clone, Debug)]
pub struct CompatibilityIndex {
    view_sources: Vec<Vec<usize>>,
    compatible: Vec<BTreeSet<Vec<Color>>>,
    ambiguous: Vec<Vec<Vec<Color>>>,
    colors: Color,
}

impl CompatibilityIndex {
    pub fn new(net: &Network, tuples: &TupleSet) -> Result<CompatibilityIndex> {
        net.require_valid()?;
        tuples.validate_for(net)?;
        let n = net.num_parties();
        let view_sources: Vec<Vec<usize>> = (0..n).map(|p| net.view_sources(p)).collect();
        let mut compatible: Vec<BTreeSet<Vec<Color>>> = vec![BTreeSet::new(); n];
        for t in tuples.iter() {
            for p in 0..n {
                compatible[p].insert(view_sources[p].iter().map(|&s| t[s]).collect());
            }
        }
        let mut ambiguous = Vec::with_capacity(n);
        for p in 0..n {
            let k = view_sources[p].len();
            let mut views = Vec::new();
            let mut counter = vec![0 as Color; k];
            loop {
                if !compatible[p].contains(&counter) {
                    views.push(counter.clone());
                }
                // lexicographic increment
                let mut pos = k;
                while pos > 0 {
                    pos -= 1;
                    counter[pos] += 1;
                    if counter[pos] < net.colors {
                        break;
                    }
                    counter[pos] = 0;
                }
                if counter.iter().all(|&c| c == 0) {
                    break;
                }
            }
            ambiguous.push(views);
        }
        Ok(CompatibilityIndex {
            view_sources,
            compatible,
            ambiguous,
            colors: net.colors,
        })
    }

    pub fn num_parties(&self) -> usize {
        self.view_sources.len()
    }

    pub fn colors(&self) -> Color {
        self.colors
    }

    pub fn view_sources(&self, party: usize) -> &[usize] {
        &self.view_sources[party]
    }

    pub fn is_compatible(&self, party: usize, view: &[Color]) -> bool {
        self.compatible[party].contains(view)
    }

    /// Compatible views of a party, in lexicographic order.
    pub fn compatible_views(&self, party: usize) -> impl Iterator<Item = &Vec<Color>> {
        self.compatible[party].iter()
    }

    /// Ambiguous views of a party, in lexicographic order.
    pub fn ambiguous_views(&self, party: usize) -> &[Vec<Color>] {
        &self.ambiguous[party]
    }

    pub fn ambiguous_dim(&self, party: usize) -> usize {
        self.ambiguous[party].len()
    }

    /// Position of an ambiguous view in the party's ordered list.
    pub fn ambiguous_position(&self, party: usize, view: &[Color]) -> Option<usize> {
        self.ambiguous[party]
            .binary_search_by(|v| v.as_slice().cmp(view))
            .ok()
    }

    /// The party's view of a global assignment, in view order.
    pub fn view_of(&self, party: usize, assignment: &[Color]) -> Vec<Color> {
        self.view_sources[party]
            .iter()
            .map(|&s| assignment[s])
            .collect()
    }

    /// Outcome tuple of the decohered strategy under one assignment.
    pub fn classical_outcome(&self, assignment: &[Color]) -> Vec<Outcome> {
        (0..self.num_parties())
            .map(|p| {
                let view = self.view_of(p, assignment);
                if self.is_compatible(p, &view) {
                    Outcome::View(view)
                } else {
                    Outcome::Chi
                }
            })
            .collect()
    }
}

/// The party's ordered colors under an assignment.
pub fn view_of(net: &Network, party: usize, assignment: &[Color]) -> Vec<Color> {
    net.view_sources(party)
        .iter()
        .map(|&s| assignment[s])
        .collect()
}

/// Does some tuple of `T` restrict to this view at the party's sources?
pub fn is_compatible(net: &Network, party: usize, view: &[Color], tuples: &TupleSet) -> bool {
    let sources = net.view_sources(party);
    tuples
        .iter()
        .any(|t| sources.iter().zip(view).all(|(&s, &v)| t[s] == v))
}

/// Outcome tuple of the decohered strategy: each party reports her view when
/// compatible, the ambiguous symbol otherwise.
pub fn classical_outcome(net: &Network, tuples: &TupleSet, assignment: &[Color]) -> Vec<Outcome> {
    let index = CompatibilityIndex::new(net, tuples).expect("valid inputs");
    index.classical_outcome(assignment)
}

/// All global color assignments making every party ambiguous, in
/// lexicographic order, indexed by `t = 1, 2, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenPatternSet {
    pub patterns: Vec<ColorAssignment>,
}

impl HiddenPatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ColorAssignment> {
        self.patterns.iter()
    }
}

fn assignment_count(net: &Network) -> u128 {
    (0..net.num_sources()).fold(1u128, |acc, _| acc.saturating_mul(net.colors as u128))
}

fn assignment_of_index(mut k: u128, num_sources: usize, colors: Color) -> ColorAssignment {
    let mut out = vec![0 as Color; num_sources];
    for j in (0..num_sources).rev() {
        out[j] = (k % colors as u128) as Color;
        k /= colors as u128;
    }
    out
}

/// The exact decohered CM distribution with the default enumeration cap.
pub fn compute_pcolor(net: &Network, tuples: &TupleSet) -> Result<Distribution> {
    compute_pcolor_capped(net, tuples, DEFAULT_ENUMERATION_CAP)
}

pub fn compute_pcolor_capped(
    net: &Network,
    tuples: &TupleSet,
    cap: u128,
) -> Result<Distribution> {
    let index = CompatibilityIndex::new(net, tuples)?;
    let total = assignment_count(net);
    if total > cap {
        return Err(Error::EnumerationCap { needed: total, cap });
    }
    let m = net.num_sources();
    let colors = net.colors;
    let counts: BTreeMap<Vec<Outcome>, u64> = par::run(|| {
        par::chunk_ranges(total, rayon::current_num_threads() * 4)
            .into_par_iter()
            .map(|range| {
                let mut local: BTreeMap<Vec<Outcome>, u64> = BTreeMap::new();
                for k in range {
                    let assignment = assignment_of_index(k, m, colors);
                    *local.entry(index.classical_outcome(&assignment)).or_insert(0) += 1;
                }
                local
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(BTreeMap::new(), |mut acc, local| {
                for (k, v) in local {
                    *acc.entry(k).or_insert(0) += v;
                }
                acc
            })
    });
    let denom = BigRational::new(1.into(), (total as i128).into());
    let table = counts
        .into_iter()
        .map(|(k, c)| (k, BigRational::from_integer((c as i128).into()) * &denom))
        .collect();
    Distribution::from_exact(net, table)
}

/// All-ambiguous assignments with the default enumeration cap.
pub fn enumerate_hidden_patterns(net: &Network, tuples: &TupleSet) -> Result<HiddenPatternSet> {
    enumerate_hidden_patterns_capped(net, tuples, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_hidden_patterns_capped(
    net: &Network,
    tuples: &TupleSet,
    cap: u128,
) -> Result<HiddenPatternSet> {
    let index = CompatibilityIndex::new(net, tuples)?;
    let total = assignment_count(net);
    if total > cap {
        return Err(Error::EnumerationCap { needed: total, cap });
    }
    let m = net.num_sources();
    let colors = net.colors;
    let n = net.num_parties();
    let patterns: Vec<ColorAssignment> = par::run(|| {
        par::chunk_ranges(total, rayon::current_num_threads() * 4)
            .into_par_iter()
            .map(|range| {
                let mut local = Vec::new();
                for k in range {
                    let assignment = assignment_of_index(k, m, colors);
                    let all_ambiguous = (0..n).all(|p| {
                        let view = index.view_of(p, &assignment);
                        !index.is_compatible(p, &view)
                    });
                    if all_ambiguous {
                        local.push(assignment);
                    }
                }
                local
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    Ok(HiddenPatternSet { patterns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{fig1_network, make_gm};
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn fig1() -> (Network, TupleSet) {
        (fig1_network(), TupleSet::fig1())
    }

    #[test]
    fn view_follows_party_orientation() {
        let (net, _) = fig1();
        let a = net.party_index("A").unwrap();
        let d = net.party_index("D").unwrap();
        assert_eq!(view_of(&net, a, &[0, 2, 1]), vec![0, 2]);
        assert_eq!(view_of(&net, d, &[0, 2, 1]), vec![1, 0]);
        for c in 0..3 {
            assert_eq!(view_of(&net, a, &[c, c, c]), vec![c, c]);
        }
    }

    #[test]
    fn compatibility_examples() {
        let (net, t) = fig1();
        let a = net.party_index("A").unwrap();
        assert!(is_compatible(&net, a, &[0, 2], &t)); // extends to 021
        assert!(!is_compatible(&net, a, &[0, 1], &t));
        for c in 0..3 {
            assert!(is_compatible(&net, a, &[c, c], &t));
        }
    }

    #[test]
    fn classical_outcomes() {
        let (net, t) = fig1();
        let chi = Outcome::Chi;
        let v = |a: Color, b: Color| Outcome::View(vec![a, b]);
        assert_eq!(
            classical_outcome(&net, &t, &[0, 0, 0]),
            vec![v(0, 0), v(0, 0), v(0, 0), v(0, 0)]
        );
        assert_eq!(
            classical_outcome(&net, &t, &[0, 1, 2]),
            vec![chi.clone(), chi.clone(), chi.clone(), chi.clone()]
        );
        assert_eq!(
            classical_outcome(&net, &t, &[0, 0, 1]),
            vec![v(0, 0), chi.clone(), chi, v(1, 0)]
        );
    }

    #[test]
    fn pcolor_fig1_values() {
        let (net, t) = fig1();
        let d = compute_pcolor(&net, &t).unwrap();
        let v = |a: Color, b: Color| Outcome::View(vec![a, b]);
        let chi = Outcome::Chi;
        assert_eq!(
            d.get(&[v(0, 0), v(0, 0), v(0, 0), v(0, 0)]).as_exact(),
            Some(&rat(1, 27))
        );
        assert_eq!(
            d.get(&[chi.clone(), chi.clone(), chi.clone(), chi.clone()])
                .as_exact(),
            Some(&rat(1, 9))
        );
        assert_eq!(
            d.get(&[v(0, 0), chi.clone(), chi, v(1, 0)]).as_exact(),
            Some(&rat(1, 27))
        );
        assert!(d.support_len() <= 27);
        let total = d.total();
        assert_eq!(total.as_exact(), Some(&rat(1, 1)));
    }

    #[test]
    fn hidden_patterns_fig1() {
        let (net, t) = fig1();
        let patterns = enumerate_hidden_patterns(&net, &t).unwrap();
        assert_eq!(
            patterns.patterns,
            vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]]
        );
    }

    #[test]
    fn hidden_patterns_g4_are_proper_colorings() {
        let net = make_gm(4).unwrap();
        let t = TupleSet::constants(4, 4);
        let patterns = enumerate_hidden_patterns(&net, &t).unwrap();
        assert_eq!(patterns.len(), 24);
        // each pattern assigns pairwise distinct colors to the 4 sources
        for p in patterns.iter() {
            let set: BTreeSet<Color> = p.iter().copied().collect();
            assert_eq!(set.len(), 4);
        }
    }

    #[test]
    fn all_tuples_leave_no_hidden_pattern() {
        let net = fig1_network();
        let all: Vec<Vec<Color>> = (0..27)
            .map(|k| assignment_of_index(k, 3, 3))
            .collect();
        let t = TupleSet::new(all);
        let patterns = enumerate_hidden_patterns(&net, &t).unwrap();
        assert!(patterns.is_empty());
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let (net, t) = fig1();
        assert!(matches!(
            compute_pcolor_capped(&net, &t, 10),
            Err(Error::EnumerationCap { needed: 27, cap: 10 })
        ));
    }

    #[test]
    fn patterns_are_exactly_the_all_ambiguous_assignments() {
        let (net, t) = fig1();
        let index = CompatibilityIndex::new(&net, &t).unwrap();
        let patterns = enumerate_hidden_patterns(&net, &t).unwrap();
        for k in 0..27u128 {
            let assignment = assignment_of_index(k, 3, 3);
            let outcome = index.classical_outcome(&assignment);
            let all_chi = outcome.iter().all(|o| *o == Outcome::Chi);
            assert_eq!(all_chi, patterns.patterns.contains(&assignment));
        }
    }

    #[test]
    fn tuple_outcomes_carry_mass_one_twenty_seventh() {
        // assignments producing zero ambiguous outputs are exactly T itself
        let (net, t) = fig1();
        let index = CompatibilityIndex::new(&net, &t).unwrap();
        let mut no_chi = Vec::new();
        for k in 0..27u128 {
            let assignment = assignment_of_index(k, 3, 3);
            let outcome = index.classical_outcome(&assignment);
            if outcome.iter().all(|o| !matches!(o, Outcome::Chi)) {
                no_chi.push(assignment);
            }
        }
        assert_eq!(no_chi.len(), 6);
        for a in &no_chi {
            assert!(t.contains(a));
        }
        let d = compute_pcolor(&net, &t).unwrap();
        for a in &no_chi {
            let outcome = index.classical_outcome(a);
            assert_eq!(d.get(&outcome).as_exact(), Some(&rat(1, 27)));
        }
    }

    #[test]
    fn tuple_set_requires_constants() {
        let t = TupleSet::new([vec![0, 0, 0], vec![1, 1, 1]]);
        // colors = 3 needs (2,2,2) as well
        assert!(t.validate_for(&fig1_network()).is_err());
        assert!(TupleSet::fig1().validate_for(&fig1_network()).is_ok());
    }

    #[test]
    fn tuple_set_json_round_trip() {
        let t = TupleSet::fig1();
        assert_eq!(TupleSet::from_json(&t.to_json()).unwrap(), t);
    }

    proptest! {
        /// Relabeling colors by a global permutation, applied to both T and
        /// the outcomes, leaves P_color invariant.
        #[test]
        fn pcolor_is_permutation_covariant(perm_seed in 0usize..6) {
            let perms: [[Color; 3]; 6] =
                [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let pi = perms[perm_seed];
            let (net, t) = fig1();
            let permuted_tuples = TupleSet::new(
                t.iter().map(|tu| tu.iter().map(|&c| pi[c as usize]).collect()));
            let base = compute_pcolor(&net, &t).unwrap();
            let permuted = compute_pcolor(&net, &permuted_tuples).unwrap();
            // relabel outcomes of `base` by pi and compare tables
            let maps: Vec<BTreeMap<Outcome, Outcome>> = (0..4).map(|j| {
                base.table().keys().map(|key| {
                    let o = key[j].clone();
                    let image = match &o {
                        Outcome::View(v) =>
                            Outcome::View(v.iter().map(|&c| pi[c as usize]).collect()),
                        other => other.clone(),
                    };
                    (o, image)
                }).collect()
            }).collect();
            let relabeled = base.coarse_grain(&maps).unwrap();
            prop_assert_eq!(relabeled, permuted);
        }
    }
}
