//! The hidden-variable feasibility program over the all-ambiguous block.
//!
//! When every party's output is ambiguous, the source colors follow one of
//! the hidden patterns `t`. Any classical simulation must then extend to a
//! joint distribution `q(fine outcomes, t)` whose marginals are pinned by
//! revealing events: outcome tuples where all parties but one output
//! unambiguously, identifying the full color assignment and exposing that
//! one party's conditional response. Those marginals, the block
//! probabilities and the uniform pattern weights form a linear program;
//! a verified Farkas certificate of its infeasibility witnesses that no
//! classical model exists.

use crate::classical::{
    enumerate_hidden_patterns_capped, ColorAssignment, CompatibilityIndex, HiddenPatternSet,
    TupleSet,
};
use crate::dist::{Distribution, Outcome};
use crate::error::Error;
use crate::interval::Interval;
use crate::lp::{
    solve_feasibility, FarkasCertificate, FeasibilityOutcome, LpInstance, LpRow, RowTag,
    VerifyMode, DEFAULT_LP_TOL,
};
use crate::net::{Color, Network};
use crate::quantum::{
    born_distribution, build_cm_measurement, cm_global_state, interval_outcome_vector,
    GlobalState, IntervalState, Measurement, RefinementChoice, RefinementUnitary,
};
use crate::{Result, DEFAULT_ENUMERATION_CAP};
use serde::Serialize;
use std::collections::BTreeMap;

/// Tolerance on agreement between distinct revealing events for the same
/// `(party, view)`.
pub const R_VALUE_CONSISTENCY_TOL: f64 = 1e-9;

/// A completion of one party's ambiguous view whose coarse outcome pattern
/// at the other parties identifies the assignment uniquely.
///
/// Parties sharing all their sources with `party` are necessarily ambiguous
/// alongside her; their refined outputs carry no color information and get
/// marginalized, which is why `other_outcomes` may contain `Chi` entries.
/// Uniqueness is required among all assignments keeping `party` ambiguous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevealingEvent {
    pub party: usize,
    pub view: Vec<Color>,
    pub completion: ColorAssignment,
    /// `(party index, coarse outcome)` of every other party, in party order:
    /// `View` for the compatible witnesses, `Chi` for marginalized parties.
    pub other_outcomes: Vec<(usize, Outcome)>,
}

impl RevealingEvent {
    /// Other parties whose refined outcomes are summed over.
    pub fn marginalized(&self) -> impl Iterator<Item = usize> + '_ {
        self.other_outcomes
            .iter()
            .filter(|(_, o)| matches!(o, Outcome::Chi))
            .map(|(p, _)| *p)
    }
}

/// Brute-force search for revealing events of one ambiguous view.
pub fn find_revealing_completions(
    net: &Network,
    tuples: &TupleSet,
    party: usize,
    view: &[Color],
) -> Result<Vec<RevealingEvent>> {
    find_revealing_completions_capped(net, tuples, party, view, DEFAULT_ENUMERATION_CAP)
}

pub fn find_revealing_completions_capped(
    net: &Network,
    tuples: &TupleSet,
    party: usize,
    view: &[Color],
    cap: u128,
) -> Result<Vec<RevealingEvent>> {
    let index = CompatibilityIndex::new(net, tuples)?;
    if index.is_compatible(party, view) {
        return Err(Error::Preconditions(format!(
            "view {view:?} is compatible for party {}",
            net.parties[party].name
        )));
    }
    let m = net.num_sources();
    let n = net.num_parties();
    let total = (0..m).fold(1u128, |acc, _| acc.saturating_mul(net.colors as u128));
    if total > cap {
        return Err(Error::EnumerationCap { needed: total, cap });
    }
    // How often each others-coarse-outcome tuple occurs among assignments
    // that keep `party` ambiguous. A completion is revealing only when its
    // tuple occurs once: the observable pattern then pins the assignment,
    // hence every source color, exposing the party's conditional response.
    let mut occurrence: BTreeMap<Vec<Outcome>, u32> = BTreeMap::new();
    let mut candidates = Vec::new();
    let mut assignment = vec![0 as Color; m];
    loop {
        let party_view = index.view_of(party, &assignment);
        if !index.is_compatible(party, &party_view) {
            let others: Vec<Outcome> = (0..n)
                .filter(|&p| p != party)
                .map(|p| {
                    let v = index.view_of(p, &assignment);
                    if index.is_compatible(p, &v) {
                        Outcome::View(v)
                    } else {
                        Outcome::Chi
                    }
                })
                .collect();
            *occurrence.entry(others.clone()).or_insert(0) += 1;
            if party_view == view {
                candidates.push((assignment.clone(), others));
            }
        }
        // lexicographic increment
        let mut pos = m;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < net.colors {
                break;
            }
            assignment[pos] = 0;
        }
        if assignment.iter().all(|&c| c == 0) {
            break;
        }
    }
    Ok(candidates
        .into_iter()
        .filter(|(_, others)| occurrence[others] == 1)
        .map(|(completion, others)| {
            let other_outcomes = (0..n)
                .filter(|&p| p != party)
                .zip(others)
                .collect();
            RevealingEvent {
                party,
                view: view.to_vec(),
                completion,
                other_outcomes,
            }
        })
        .collect())
}

/// Revealing events for every `(party, pattern)` pair, deduplicated by the
/// view the pattern induces.
#[derive(Clone, Debug)]
pub struct RevealingPlan {
    /// `events[party][t0]`: events for the view pattern `t0` induces there.
    pub events: Vec<Vec<Vec<RevealingEvent>>>,
}

pub fn plan_revealing(
    net: &Network,
    tuples: &TupleSet,
    patterns: &HiddenPatternSet,
) -> Result<RevealingPlan> {
    let index = CompatibilityIndex::new(net, tuples)?;
    let n = net.num_parties();
    let mut cache: BTreeMap<(usize, Vec<Color>), Vec<RevealingEvent>> = BTreeMap::new();
    let mut events = vec![Vec::with_capacity(patterns.len()); n];
    for party in 0..n {
        for pattern in patterns.iter() {
            let view = index.view_of(party, pattern);
            let entry = match cache.get(&(party, view.clone())) {
                Some(e) => e.clone(),
                None => {
                    let found = find_revealing_completions(net, tuples, party, &view)?;
                    cache.insert((party, view.clone()), found.clone());
                    found
                }
            };
            if entry.is_empty() {
                return Err(Error::MissingRevealingEvent {
                    party: net.parties[party].name.clone(),
                    view: format!("{view:?}"),
                });
            }
            events[party].push(entry);
        }
    }
    Ok(RevealingPlan { events })
}

/// The computable marginals `r_X(i|t)`: the probability that party `X`
/// outputs fine index `i` given that the sources took pattern `t`'s colors.
#[derive(Clone, Debug)]
pub struct RValues {
    /// `(party, refined index 0-based, pattern 0-based) -> r`.
    pub values: BTreeMap<(usize, usize, usize), f64>,
}

impl RValues {
    pub fn get(&self, party: usize, fine: usize, pattern: usize) -> f64 {
        self.values[&(party, fine, pattern)]
    }
}

/// Extract the r-values from the refined Born distribution via the plan's
/// revealing events. Distinct events for the same `(party, view)` must agree
/// within [`R_VALUE_CONSISTENCY_TOL`] and are averaged.
pub fn compute_r_values(
    net: &Network,
    index: &CompatibilityIndex,
    quantum_p: &Distribution,
    plan: &RevealingPlan,
    patterns: &HiddenPatternSet,
) -> Result<RValues> {
    let n = net.num_parties();
    let m = net.num_sources();
    let completion_prob = (net.colors as f64).powi(m as i32).recip();
    let mut values = BTreeMap::new();
    for party in 0..n {
        let dim = index.ambiguous_dim(party);
        for (t0, _) in patterns.iter().enumerate() {
            let events = &plan.events[party][t0];
            for i in 0..dim {
                let mut per_event = Vec::with_capacity(events.len());
                for event in events {
                    // sum the table over the marginalized parties' fine outcomes
                    let marg: Vec<usize> = event.marginalized().collect();
                    let marg_dims: Vec<usize> =
                        marg.iter().map(|&p| index.ambiguous_dim(p)).collect();
                    let combos: usize = marg_dims.iter().product();
                    let mut base: Vec<Outcome> = vec![Outcome::Chi; n];
                    base[party] = Outcome::Refined(i as u32 + 1);
                    for (p, o) in &event.other_outcomes {
                        if let Outcome::View(v) = o {
                            base[*p] = Outcome::View(v.clone());
                        }
                    }
                    let mut p_event = 0.0;
                    for combo in 0..combos {
                        let mut key = base.clone();
                        let mut rest = combo;
                        for (mi, &p) in marg.iter().enumerate().rev() {
                            key[p] = Outcome::Refined((rest % marg_dims[mi]) as u32 + 1);
                            rest /= marg_dims[mi];
                        }
                        p_event += quantum_p.get(&key).to_f64();
                    }
                    per_event.push(p_event / completion_prob);
                }
                let min = per_event.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = per_event.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max - min > R_VALUE_CONSISTENCY_TOL {
                    return Err(Error::CrossConsistency {
                        party: net.parties[party].name.clone(),
                        view: format!("{:?}", events[0].view),
                        spread: max - min,
                    });
                }
                let mean = per_event.iter().sum::<f64>() / per_event.len() as f64;
                values.insert((party, i, t0), mean);
            }
        }
    }
    Ok(RValues { values })
}

/// Mixed-radix rank over the parties' fine-outcome indices, party 0 most
/// significant.
fn decode_block(mut rank: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for p in (0..dims.len()).rev() {
        out[p] = rank % dims[p];
        rank /= dims[p];
    }
    out
}

/// Assemble the feasibility program over `q(fine outcome tuple, t)`.
///
/// Row families: block-marginal (one per fine tuple), party-pattern (one per
/// `(party, fine index, t)`), normalization (one per `t`, redundant but kept
/// as a consistency row).
pub fn build_lp(
    index: &CompatibilityIndex,
    quantum_p: &Distribution,
    patterns: &HiddenPatternSet,
    rvalues: &RValues,
) -> Result<LpInstance> {
    if patterns.is_empty() {
        return Err(Error::Preconditions(
            "no hidden patterns; the ambiguous block is empty".into(),
        ));
    }
    let n = index.num_parties();
    let dims: Vec<usize> = (0..n).map(|p| index.ambiguous_dim(p)).collect();
    let blocks: usize = dims.iter().product();
    let t_count = patterns.len();
    let num_vars = blocks * t_count;
    let m_sources = patterns.iter().next().unwrap().len();
    let pattern_prob = (index.colors() as f64).powi(m_sources as i32).recip();

    let mut rows = Vec::with_capacity(blocks + n * dims.iter().sum::<usize>() + t_count);
    // (a) block-marginal rows
    for rank in 0..blocks {
        let fine = decode_block(rank, &dims);
        let key: Vec<Outcome> = fine
            .iter()
            .map(|&i| Outcome::Refined(i as u32 + 1))
            .collect();
        rows.push(LpRow {
            coeffs: (0..t_count).map(|t| (rank * t_count + t, 1.0)).collect(),
            rhs: quantum_p.get(&key).to_f64(),
            tag: RowTag::BlockMarginal,
        });
    }
    // (b) party-pattern rows
    for party in 0..n {
        for i in 0..dims[party] {
            for t in 0..t_count {
                let coeffs = (0..blocks)
                    .filter(|&rank| decode_block(rank, &dims)[party] == i)
                    .map(|rank| (rank * t_count + t, 1.0))
                    .collect();
                rows.push(LpRow {
                    coeffs,
                    rhs: pattern_prob * rvalues.get(party, i, t),
                    tag: RowTag::PartyPattern,
                });
            }
        }
    }
    // (c) normalization rows
    for t in 0..t_count {
        rows.push(LpRow {
            coeffs: (0..blocks).map(|rank| (rank * t_count + t, 1.0)).collect(),
            rhs: pattern_prob,
            tag: RowTag::Normalization,
        });
    }
    Ok(LpInstance::new(num_vars, rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertifyResult {
    /// Verified Farkas certificate: no classical model (conditional on the
    /// rigidity theorem's preconditions).
    NonlocalCertified,
    /// The relaxation is feasible; feasibility proves nothing.
    Inconclusive,
    /// Positive margin without a verifiable certificate.
    Borderline,
}

#[derive(Clone, Debug)]
pub struct CertifyOutcome {
    pub result: CertifyResult,
    pub margin: f64,
    pub certificate: Option<FarkasCertificate>,
    pub verification: Option<VerifyMode>,
    pub lp_rows: usize,
    pub lp_cols: usize,
    pub lp_tags: BTreeMap<RowTag, usize>,
}

/// Cached per-`(network, T)` machinery for repeated evaluations with
/// different refinement unitaries.
pub struct CmPipeline {
    net: Network,
    index: CompatibilityIndex,
    patterns: HiddenPatternSet,
    plan: RevealingPlan,
    state: GlobalState,
    istate: IntervalState,
}

impl CmPipeline {
    pub fn new(net: &Network, tuples: &TupleSet) -> Result<CmPipeline> {
        net.require_valid()?;
        let index = CompatibilityIndex::new(net, tuples)?;
        let patterns = enumerate_hidden_patterns_capped(net, tuples, DEFAULT_ENUMERATION_CAP)?;
        if patterns.is_empty() {
            return Err(Error::Preconditions(
                "no hidden patterns; the ambiguous block is empty".into(),
            ));
        }
        let plan = plan_revealing(net, tuples, &patterns)?;
        let state = cm_global_state(net)?;
        let istate = IntervalState::cm(net)?;
        Ok(CmPipeline {
            net: net.clone(),
            index,
            patterns,
            plan,
            state,
            istate,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn index(&self) -> &CompatibilityIndex {
        &self.index
    }

    pub fn patterns(&self) -> &HiddenPatternSet {
        &self.patterns
    }

    /// Identity refinement for every party, in party order.
    pub fn identity_refinements(&self) -> Vec<RefinementUnitary> {
        (0..self.net.num_parties())
            .map(|p| {
                RefinementUnitary::identity(
                    &self.net.parties[p].name,
                    self.index.ambiguous_dim(p),
                )
            })
            .collect()
    }

    /// One refinement per party, validated against the ambiguous dimensions.
    fn aligned_refinements<'a>(
        &self,
        refinements: &'a [RefinementUnitary],
    ) -> Result<Vec<&'a RefinementUnitary>> {
        (0..self.net.num_parties())
            .map(|p| {
                let name = &self.net.parties[p].name;
                let r = refinements
                    .iter()
                    .find(|r| &r.party == name)
                    .ok_or_else(|| Error::UnknownParty(name.clone()))?;
                if r.dim() != self.index.ambiguous_dim(p) {
                    return Err(Error::DimensionMismatch {
                        expected: self.index.ambiguous_dim(p),
                        got: r.dim(),
                    });
                }
                Ok(r)
            })
            .collect()
    }

    fn measurements(&self, refinements: &[&RefinementUnitary]) -> Result<Vec<Measurement>> {
        (0..self.net.num_parties())
            .map(|p| {
                build_cm_measurement(
                    &self.net,
                    p,
                    &self.index,
                    &RefinementChoice::Refined(refinements[p].clone()),
                )
            })
            .collect()
    }

    /// Full refined Born distribution.
    pub fn born(&self, refinements: &[RefinementUnitary]) -> Result<Distribution> {
        let aligned = self.aligned_refinements(refinements)?;
        born_distribution(&self.state, &self.measurements(&aligned)?)
    }

    /// The hidden-variable program with rigorous interval right-hand sides.
    pub fn build_lp(&self, refinements: &[RefinementUnitary]) -> Result<LpInstance> {
        let aligned = self.aligned_refinements(refinements)?;
        let quantum_p = born_distribution(&self.state, &self.measurements(&aligned)?)?;
        let rvalues = compute_r_values(&self.net, &self.index, &quantum_p, &self.plan, &self.patterns)?;
        let lp = build_lp(&self.index, &quantum_p, &self.patterns, &rvalues)?;
        let intervals = self.interval_rhs(&aligned, &lp)?;
        Ok(lp.with_interval_rhs(intervals))
    }

    /// Enclosures for every LP row, recomputed from the refinement entries
    /// with outward rounding.
    fn interval_rhs(
        &self,
        refinements: &[&RefinementUnitary],
        lp: &LpInstance,
    ) -> Result<Vec<Interval>> {
        let n = self.net.num_parties();
        let dims: Vec<usize> = (0..n).map(|p| self.index.ambiguous_dim(p)).collect();
        let t_count = self.patterns.len();
        let wiring = self.istate.wiring();
        // per-party refined vectors, reused across rows
        let mut refined: Vec<Vec<Vec<crate::interval::ComplexInterval>>> = Vec::with_capacity(n);
        for p in 0..n {
            let mut per_i = Vec::with_capacity(dims[p]);
            for i in 0..dims[p] {
                per_i.push(interval_outcome_vector(
                    wiring,
                    &self.index,
                    p,
                    &Outcome::Refined(i as u32 + 1),
                    Some(refinements[p]),
                )?);
            }
            refined.push(per_i);
        }
        let m_sources = self.net.num_sources();
        let pattern_prob = Interval::point((self.net.colors as f64).powi(m_sources as i32)).recip();

        let mut out = Vec::with_capacity(lp.num_rows());
        let blocks: usize = dims.iter().product();
        for rank in 0..blocks {
            let fine = decode_block(rank, &dims);
            let vectors: Vec<_> = (0..n).map(|p| refined[p][fine[p]].clone()).collect();
            out.push(self.istate.event_probability(&vectors));
        }
        for party in 0..n {
            for i in 0..dims[party] {
                for t in 0..t_count {
                    let events = &self.plan.events[party][t];
                    let mut sum = Interval::zero();
                    for event in events {
                        sum = sum + self.interval_event_probability(party, i, event, &refined)?;
                    }
                    let mean = sum * Interval::point(events.len() as f64).recip();
                    out.push(mean);
                }
            }
        }
        for _ in 0..t_count {
            out.push(pattern_prob);
        }
        assert_eq!(out.len(), lp.num_rows());
        Ok(out)
    }

    /// Enclosure of one revealing event's probability with the party at fine
    /// outcome `i`. Marginalized parties are summed over their ambiguous
    /// view basis, which equals the sum over their refined outcomes by
    /// completeness and keeps the vectors exact.
    fn interval_event_probability(
        &self,
        party: usize,
        fine: usize,
        event: &RevealingEvent,
        refined: &[Vec<Vec<crate::interval::ComplexInterval>>],
    ) -> Result<Interval> {
        let n = self.net.num_parties();
        let wiring = self.istate.wiring();
        let marg: Vec<usize> = event.marginalized().collect();
        let marg_dims: Vec<usize> = marg
            .iter()
            .map(|&p| self.index.ambiguous_dim(p))
            .collect();
        let combos: usize = marg_dims.iter().product();
        let mut base: Vec<Option<Vec<crate::interval::ComplexInterval>>> = vec![None; n];
        base[party] = Some(refined[party][fine].clone());
        for (p, o) in &event.other_outcomes {
            if let Outcome::View(v) = o {
                base[*p] = Some(interval_outcome_vector(
                    wiring,
                    &self.index,
                    *p,
                    &Outcome::View(v.clone()),
                    None,
                )?);
            }
        }
        let mut total = Interval::zero();
        for combo in 0..combos {
            let mut vectors: Vec<Vec<crate::interval::ComplexInterval>> = Vec::with_capacity(n);
            let mut rest = combo;
            let mut picks = vec![0usize; marg.len()];
            for mi in (0..marg.len()).rev() {
                picks[mi] = rest % marg_dims[mi];
                rest /= marg_dims[mi];
            }
            for p in 0..n {
                match &base[p] {
                    Some(v) => vectors.push(v.clone()),
                    None => {
                        let mi = marg.iter().position(|&q| q == p).unwrap();
                        let view = self.index.ambiguous_views(p)[picks[mi]].clone();
                        vectors.push(interval_outcome_vector(
                            wiring,
                            &self.index,
                            p,
                            &Outcome::View(view),
                            None,
                        )?);
                    }
                }
            }
            total = total + self.istate.event_probability(&vectors);
        }
        Ok(total)
    }

    /// The phase-1 margin of the program (0 within tolerance = feasible).
    pub fn margin(&self, refinements: &[RefinementUnitary]) -> Result<f64> {
        let lp = self.build_lp(refinements)?;
        crate::lp::feasibility_margin(&lp)
    }

    /// Solve and, on a positive margin, verify the certificate in interval
    /// mode; an unverifiable certificate downgrades to Borderline.
    pub fn certify(&self, refinements: &[RefinementUnitary], tol: f64) -> Result<CertifyOutcome> {
        let lp = self.build_lp(refinements)?;
        let outcome = solve_feasibility(&lp, tol)?;
        let lp_tags = lp.tag_counts();
        let (result, margin, certificate, verification) = match outcome {
            FeasibilityOutcome::Feasible { residual, .. } => {
                (CertifyResult::Inconclusive, residual, None, None)
            }
            FeasibilityOutcome::Infeasible {
                certificate,
                margin,
                verification,
            } => (
                CertifyResult::NonlocalCertified,
                margin,
                Some(certificate),
                Some(verification),
            ),
            FeasibilityOutcome::Borderline { margin } => {
                (CertifyResult::Borderline, margin, None, None)
            }
        };
        Ok(CertifyOutcome {
            result,
            margin,
            certificate,
            verification,
            lp_rows: lp.num_rows(),
            lp_cols: lp.num_vars,
            lp_tags,
        })
    }

    /// Certify with the default tolerance.
    pub fn certify_default(&self, refinements: &[RefinementUnitary]) -> Result<CertifyOutcome> {
        self.certify(refinements, DEFAULT_LP_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::TupleSet;
    use crate::net::fig1_network;
    use crate::quantum::gram_schmidt_columns;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unitaries(seed: u64, net: &Network, dims: &[usize]) -> Vec<RefinementUnitary> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..net.num_parties())
            .map(|p| {
                let d = dims[p];
                loop {
                    let m: Vec<Vec<Complex64>> = (0..d)
                        .map(|_| {
                            (0..d)
                                .map(|_| {
                                    Complex64::new(
                                        rng.gen_range(-1.0..1.0),
                                        rng.gen_range(-1.0..1.0),
                                    )
                                })
                                .collect()
                        })
                        .collect();
                    if let Ok(u) = gram_schmidt_columns(&m) {
                        return RefinementUnitary {
                            party: net.parties[p].name.clone(),
                            matrix: u,
                        };
                    }
                }
            })
            .collect()
    }

    #[test]
    fn revealing_events_for_party_a_view_01() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let events = find_revealing_completions(&net, &t, 0, &[0, 1]).unwrap();
        let completions: Vec<_> = events.iter().map(|e| e.completion.clone()).collect();
        // (0,1,0) and (0,1,1) qualify; (0,1,2) is hidden pattern t=1
        assert_eq!(completions, vec![vec![0, 1, 0], vec![0, 1, 1]]);
        let e = &events[0];
        assert_eq!(
            e.other_outcomes,
            vec![
                (1, Outcome::View(vec![1, 0])),
                (2, Outcome::View(vec![1, 0])),
                (3, Outcome::View(vec![0, 0])),
            ]
        );
        assert_eq!(e.marginalized().count(), 0);
    }

    #[test]
    fn party_b_events_marginalize_over_c() {
        // B and C share both sources, so C is ambiguous whenever B is; C's
        // refined output is marginalized and A, D witness the colors.
        let net = fig1_network();
        let t = TupleSet::fig1();
        let events = find_revealing_completions(&net, &t, 1, &[1, 2]).unwrap();
        let completions: Vec<_> = events.iter().map(|e| e.completion.clone()).collect();
        assert_eq!(completions, vec![vec![1, 1, 2], vec![2, 1, 2]]);
        for e in &events {
            assert_eq!(e.marginalized().collect::<Vec<_>>(), vec![2]);
            assert!(matches!(e.other_outcomes[0].1, Outcome::View(_))); // A
            assert!(matches!(e.other_outcomes[2].1, Outcome::View(_))); // D
        }
    }

    #[test]
    fn compatible_view_is_rejected() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        assert!(matches!(
            find_revealing_completions(&net, &t, 0, &[0, 2]),
            Err(Error::Preconditions(_))
        ));
    }

    #[test]
    fn r_values_match_closed_form() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let dims = vec![3; 4];
        for seed in [3u64, 17] {
            let us = random_unitaries(seed, &net, &dims);
            let born = pipeline.born(&us).unwrap();
            let rv = compute_r_values(
                &net,
                &pipeline.index,
                &born,
                &pipeline.plan,
                &pipeline.patterns,
            )
            .unwrap();
            // pattern columns per party: t=1 -> (alpha, beta, beta, gamma),
            // t=2 -> (beta, gamma, gamma, alpha), t=3 -> (gamma, alpha, alpha, beta)
            let cols = [[0, 1, 1, 2], [1, 2, 2, 0], [2, 0, 0, 1]];
            for (t0, c) in cols.iter().enumerate() {
                for party in 0..4 {
                    for i in 0..3 {
                        let expected = us[party].matrix[i][c[party]].norm_sqr();
                        let got = rv.get(party, i, t0);
                        assert!(
                            (got - expected).abs() < 1e-10,
                            "party {party}, i {i}, t {t0}: {got} vs {expected}"
                        );
                    }
                }
                for party in 0..4 {
                    let sum: f64 = (0..3).map(|i| rv.get(party, i, t0)).sum();
                    assert!((sum - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn lp_shape_matches_the_counting() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let lp = pipeline.build_lp(&pipeline.identity_refinements()).unwrap();
        assert_eq!(lp.num_vars, 243);
        assert_eq!(lp.num_rows(), 120);
        let tags = lp.tag_counts();
        assert_eq!(tags[&RowTag::BlockMarginal], 81);
        assert_eq!(tags[&RowTag::PartyPattern], 36);
        assert_eq!(tags[&RowTag::Normalization], 3);
        // sum of block-marginal rhs = P(all ambiguous) = 1/9
        let block_mass: f64 = lp
            .rows
            .iter()
            .filter(|r| r.tag == RowTag::BlockMarginal)
            .map(|r| r.rhs)
            .sum();
        assert!((block_mass - 1.0 / 9.0).abs() < 1e-10);
    }

    #[test]
    fn party_pattern_rows_sum_to_normalization() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let us = random_unitaries(7, &net, &vec![3; 4]);
        let lp = pipeline.build_lp(&us).unwrap();
        // for each (party, t): sum_i rhs = C^-m
        let pp: Vec<&LpRow> = lp
            .rows
            .iter()
            .filter(|r| r.tag == RowTag::PartyPattern)
            .collect();
        for party in 0..4 {
            for t0 in 0..3 {
                let sum: f64 = (0..3)
                    .map(|i| pp[party * 9 + i * 3 + t0].rhs)
                    .sum();
                assert!((sum - 1.0 / 27.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_refinement_is_feasible() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let outcome = pipeline
            .certify_default(&pipeline.identity_refinements())
            .unwrap();
        assert_eq!(outcome.result, CertifyResult::Inconclusive);
        assert!(outcome.margin <= DEFAULT_LP_TOL);
    }

    #[test]
    fn permutation_refinements_are_feasible() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for perm in perms {
            let us: Vec<RefinementUnitary> = (0..4)
                .map(|p| {
                    let mut matrix = vec![vec![Complex64::new(0.0, 0.0); 3]; 3];
                    for (r, &c) in perm.iter().enumerate() {
                        // permutation times a diagonal phase
                        matrix[r][c] = Complex64::from_polar(1.0, 0.31 * (r as f64 + 1.0));
                    }
                    RefinementUnitary {
                        party: net.parties[p].name.clone(),
                        matrix,
                    }
                })
                .collect();
            let outcome = pipeline.certify_default(&us).unwrap();
            assert_eq!(outcome.result, CertifyResult::Inconclusive, "perm {perm:?}");
        }
    }

    #[test]
    fn identity_lp_has_the_explicit_feasible_point() {
        // q((fine indices of each party's view under t), t) = 1/27
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let lp = pipeline.build_lp(&pipeline.identity_refinements()).unwrap();
        let dims = vec![3usize; 4];
        let t_count = 3;
        let mut q = vec![0.0; lp.num_vars];
        // fine indices per pattern: t=1 -> (0,1,1,2), t=2 -> (1,2,2,0), t=3 -> (2,0,0,1)
        for (t0, fine) in [[0, 1, 1, 2], [1, 2, 2, 0], [2, 0, 0, 1]].iter().enumerate() {
            let mut rank = 0;
            for p in 0..4 {
                rank = rank * dims[p] + fine[p];
            }
            q[rank * t_count + t0] = 1.0 / 27.0;
        }
        assert!(lp.residual(&q) < 1e-10);
    }

    #[test]
    fn lp_coefficients_are_phase_invariant() {
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        let us = random_unitaries(21, &net, &vec![3; 4]);
        let lp1 = pipeline.build_lp(&us).unwrap();
        let phased: Vec<RefinementUnitary> = us
            .iter()
            .map(|u| {
                let mut m = u.clone();
                for (r, row) in m.matrix.iter_mut().enumerate() {
                    let phase = Complex64::from_polar(1.0, 1.1 * (r as f64 + 0.5));
                    for z in row.iter_mut() {
                        *z *= phase;
                    }
                }
                m
            })
            .collect();
        let lp2 = pipeline.build_lp(&phased).unwrap();
        for (r1, r2) in lp1.rows.iter().zip(&lp2.rows) {
            assert!((r1.rhs - r2.rhs).abs() < 1e-12);
            assert_eq!(r1.coeffs, r2.coeffs);
        }
    }

    #[test]
    fn random_unitaries_certify_or_stay_honest() {
        // weak-duality sanity: never a valid witness and a valid certificate
        let net = fig1_network();
        let t = TupleSet::fig1();
        let pipeline = CmPipeline::new(&net, &t).unwrap();
        for seed in [1u64, 2, 3] {
            let us = random_unitaries(seed, &net, &vec![3; 4]);
            let lp = pipeline.build_lp(&us).unwrap();
            match solve_feasibility(&lp, DEFAULT_LP_TOL).unwrap() {
                FeasibilityOutcome::Feasible { witness, residual } => {
                    assert!(residual <= DEFAULT_LP_TOL);
                    assert!(witness.iter().all(|&v| v >= -1e-12));
                }
                FeasibilityOutcome::Infeasible {
                    certificate,
                    margin,
                    verification,
                } => {
                    assert!(margin > DEFAULT_LP_TOL);
                    assert_eq!(verification, VerifyMode::Interval);
                    assert!(crate::lp::verify_certificate(
                        &lp,
                        &certificate,
                        VerifyMode::Interval
                    )
                    .unwrap());
                }
                FeasibilityOutcome::Borderline { .. } => {}
            }
        }
    }
}
