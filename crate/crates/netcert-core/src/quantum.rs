//! Quantum side of the color-matching strategy.
//!
//! Sources distribute coherent uniform superpositions of the colors; each
//! party measures her view space with rank-1 diagonal projectors on the
//! compatible views plus either the coarse ambiguous projector or a unitary
//! refinement of the ambiguous subspace. The joint state lives on the
//! mixed-radix index over all legs, ordered by (source declaration order,
//! leg order within source), with the leading leg most significant.

use crate::classical::CompatibilityIndex;
use crate::dist::{Distribution, Outcome};
use crate::error::Error;
use crate::interval::{ComplexInterval, Interval};
use crate::net::{Color, Network};
use crate::par;
use crate::{Result, DEFAULT_DIMENSION_CAP};
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Probabilities below this are dropped from Born tables (double-precision
/// noise floor).
pub const PROB_FLOOR: f64 = 1e-14;

/// Unit-norm tolerance for source states.
pub const NORM_TOL: f64 = 1e-12;

/// Unitarity / completeness tolerance for measurements.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SourceState {
    amplitudes: Vec<Complex64>,
    legs: usize,
    colors: Color,
}

impl SourceState {
    pub fn new(amplitudes: Vec<Complex64>, legs: usize, colors: Color) -> Result<SourceState> {
        let dim = (colors as usize).pow(legs as u32);
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "source state norm^2 = {norm}, not 1"
            )));
        }
        Ok(SourceState {
            amplitudes,
            legs,
            colors,
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn legs(&self) -> usize {
        self.legs
    }
}

/// The CM state `(1/sqrt(C)) * sum_c |c...c>`.
pub fn cm_source_state(leg_count: usize, colors: Color) -> SourceState {
    assert!(leg_count >= 2, "sources have at least two legs");
    let dim = (colors as usize).pow(leg_count as u32);
    let mut amplitudes = vec![Complex64::zero(); dim];
    let w = Complex64::new(1.0 / (colors as f64).sqrt(), 0.0);
    // |c...c> sits at c * (C^(k-1) + ... + C + 1)
    let unit_stride = (dim - 1) / (colors as usize - 1);
    for c in 0..colors as usize {
        amplitudes[c * unit_stride] = w;
    }
    SourceState {
        amplitudes,
        legs: leg_count,
        colors,
    }
}

/// Interval twin of [`cm_source_state`], enclosing the exact `1/sqrt(C)`.
pub fn cm_source_state_intervals(leg_count: usize, colors: Color) -> Vec<ComplexInterval> {
    let dim = (colors as usize).pow(leg_count as u32);
    let w = Interval::point(colors as f64).sqrt().recip();
    let mut amplitudes = vec![ComplexInterval::zero(); dim];
    let unit_stride = (dim - 1) / (colors as usize - 1);
    for c in 0..colors as usize {
        amplitudes[c * unit_stride] = ComplexInterval::real(w);
    }
    amplitudes
}

/// Map from (party, view position) to global leg index, plus the mixed-radix
/// layout of the joint space.
#[derive(Clone, Debug)]
pub struct Wiring {
    colors: Color,
    num_legs: usize,
    dim: usize,
    leg_of: Vec<Vec<usize>>,
}

impl Wiring {
    pub fn new(net: &Network) -> Result<Wiring> {
        net.require_valid()?;
        let mut offsets = Vec::with_capacity(net.num_sources());
        let mut total = 0usize;
        for s in &net.sources {
            offsets.push(total);
            total += s.legs.len();
        }
        let leg_of = (0..net.num_parties())
            .map(|p| {
                net.view_sources(p)
                    .into_iter()
                    .map(|s| {
                        let slot = net.sources[s]
                            .legs
                            .iter()
                            .position(|l| *l == net.parties[p].name)
                            .expect("validated incidence");
                        offsets[s] + slot
                    })
                    .collect()
            })
            .collect();
        Ok(Wiring {
            colors: net.colors,
            num_legs: total,
            dim: (net.colors as usize).pow(total as u32),
            leg_of,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_legs(&self) -> usize {
        self.num_legs
    }

    pub fn colors(&self) -> Color {
        self.colors
    }

    /// Global leg indices of a party's view, in view order.
    pub fn party_legs(&self, party: usize) -> &[usize] {
        &self.leg_of[party]
    }

    pub fn local_dim(&self, party: usize) -> usize {
        (self.colors as usize).pow(self.leg_of[party].len() as u32)
    }

    fn digit(&self, global: usize, leg: usize) -> usize {
        let shift = self.num_legs - 1 - leg;
        (global / (self.colors as usize).pow(shift as u32)) % self.colors as usize
    }

    /// A party's local basis index inside a global basis index.
    pub fn local_index(&self, party: usize, global: usize) -> usize {
        let c = self.colors as usize;
        self.leg_of[party]
            .iter()
            .fold(0usize, |acc, &leg| acc * c + self.digit(global, leg))
    }

    /// Local basis index of a view tuple.
    pub fn view_index(&self, view: &[Color]) -> usize {
        let c = self.colors as usize;
        view.iter().fold(0usize, |acc, &v| acc * c + v as usize)
    }
}

/// The joint state of all sources with its wiring and the owning network.
#[derive(Clone, Debug)]
pub struct GlobalState {
    net: Network,
    wiring: Wiring,
    amplitudes: Vec<Complex64>,
    support: Vec<usize>,
}

impl GlobalState {
    pub fn wiring(&self) -> &Wiring {
        &self.wiring
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

fn kron<T: Copy + std::ops::Mul<Output = T>>(factors: &[&[T]]) -> Vec<T> {
    let mut out: Vec<T> = factors[0].to_vec();
    for f in &factors[1..] {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            for &b in f.iter() {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// Tensor product of the source states in declaration order.
pub fn build_global_state(net: &Network, sources: &[SourceState]) -> Result<GlobalState> {
    build_global_state_capped(net, sources, DEFAULT_DIMENSION_CAP)
}

pub fn build_global_state_capped(
    net: &Network,
    sources: &[SourceState],
    cap: u128,
) -> Result<GlobalState> {
    let wiring = Wiring::new(net)?;
    if sources.len() != net.num_sources() {
        return Err(Error::DimensionMismatch {
            expected: net.num_sources(),
            got: sources.len(),
        });
    }
    for (s, state) in net.sources.iter().zip(sources) {
        if state.legs != s.legs.len() || state.colors != net.colors {
            return Err(Error::DimensionMismatch {
                expected: s.legs.len(),
                got: state.legs,
            });
        }
    }
    let dim = (0..wiring.num_legs()).fold(1u128, |acc, _| acc * net.colors as u128);
    if dim > cap {
        return Err(Error::DimensionCap { needed: dim, cap });
    }
    let factors: Vec<&[Complex64]> = sources.iter().map(|s| s.amplitudes.as_slice()).collect();
    let amplitudes = kron(&factors);
    let support = amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(g, _)| g)
        .collect();
    Ok(GlobalState {
        net: net.clone(),
        wiring,
        amplitudes,
        support,
    })
}

/// CM states on every source.
pub fn cm_global_state(net: &Network) -> Result<GlobalState> {
    let sources: Vec<SourceState> = net
        .sources
        .iter()
        .map(|s| cm_source_state(s.legs.len(), net.colors))
        .collect();
    build_global_state(net, &sources)
}

/// The refinement of one party's ambiguous subspace: rows are the fine
/// measurement vectors over the lexicographically ordered ambiguous views.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementUnitary {
    pub party: String,
    pub matrix: Vec<Vec<Complex64>>,
}

impl RefinementUnitary {
    pub fn identity(party: &str, dim: usize) -> RefinementUnitary {
        let matrix = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| {
                        if r == c {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        RefinementUnitary {
            party: party.to_string(),
            matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    /// `max |U U^dag - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.len();
        let mut defect: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut dot = Complex64::zero();
                for k in 0..d {
                    dot += self.matrix[i][k] * self.matrix[j][k].conj();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((dot - target).norm());
            }
        }
        defect
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.iter().any(|r| r.len() != self.matrix.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.len(),
                got: self.matrix.iter().map(|r| r.len()).max().unwrap_or(0),
            });
        }
        let defect = self.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::NonUnitary {
                party: self.party.clone(),
                defect,
            });
        }
        Ok(())
    }
}

/// How a party treats her ambiguous subspace.
#[derive(Clone, Debug)]
pub enum RefinementChoice {
    /// Project onto the whole subspace and output the coarse symbol.
    Coarse,
    /// Measure in the refined basis given by the unitary's rows.
    Refined(RefinementUnitary),
}

/// One measurement outcome: a label and an orthonormal set of vectors
/// spanning the projected subspace (a single vector for rank-1 outcomes).
#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub label: Outcome,
    pub vectors: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub party: String,
    pub local_dim: usize,
    pub outcomes: Vec<MeasurementOutcome>,
}

impl Measurement {
    /// `max |sum_o P_o - I|` entrywise.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.local_dim;
        let mut gram = vec![vec![Complex64::zero(); d]; d];
        for o in &self.outcomes {
            for v in &o.vectors {
                for i in 0..d {
                    for j in 0..d {
                        gram[i][j] += v[i] * v[j].conj();
                    }
                }
            }
        }
        let mut defect: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[i][j] - target).norm());
            }
        }
        defect
    }
}

/// The CM measurement of one party: diagonal projectors on her compatible
/// views plus the ambiguous block, coarse or refined.
pub fn build_cm_measurement(
    net: &Network,
    party: usize,
    index: &CompatibilityIndex,
    choice: &RefinementChoice,
) -> Result<Measurement> {
    let wiring = Wiring::new(net)?;
    let local_dim = wiring.local_dim(party);
    let mut outcomes = Vec::new();
    for view in index.compatible_views(party) {
        let mut v = vec![Complex64::zero(); local_dim];
        v[wiring.view_index(view)] = Complex64::new(1.0, 0.0);
        outcomes.push(MeasurementOutcome {
            label: Outcome::View(view.clone()),
            vectors: vec![v],
        });
    }
    let ambiguous = index.ambiguous_views(party);
    if !ambiguous.is_empty() {
        match choice {
            RefinementChoice::Coarse => {
                let vectors = ambiguous
                    .iter()
                    .map(|view| {
                        let mut v = vec![Complex64::zero(); local_dim];
                        v[wiring.view_index(view)] = Complex64::new(1.0, 0.0);
                        v
                    })
                    .collect();
                outcomes.push(MeasurementOutcome {
                    label: Outcome::Chi,
                    vectors,
                });
            }
            RefinementChoice::Refined(unitary) => {
                unitary.validate()?;
                if unitary.dim() != ambiguous.len() {
                    return Err(Error::DimensionMismatch {
                        expected: ambiguous.len(),
                        got: unitary.dim(),
                    });
                }
                for (r, row) in unitary.matrix.iter().enumerate() {
                    let mut v = vec![Complex64::zero(); local_dim];
                    for (col, view) in ambiguous.iter().enumerate() {
                        v[wiring.view_index(view)] = row[col];
                    }
                    outcomes.push(MeasurementOutcome {
                        label: Outcome::Refined(r as u32 + 1),
                        vectors: vec![v],
                    });
                }
            }
        }
    }
    let m = Measurement {
        party: net.parties[party].name.clone(),
        local_dim,
        outcomes,
    };
    debug_assert!(m.completeness_defect() <= UNITARY_TOL);
    Ok(m)
}

/// Joint Born distribution of one complete projective measurement per party.
pub fn born_distribution(state: &GlobalState, measurements: &[Measurement]) -> Result<Distribution> {
    let net = &state.net;
    if measurements.len() != net.num_parties() {
        return Err(Error::DimensionMismatch {
            expected: net.num_parties(),
            got: measurements.len(),
        });
    }
    for (p, m) in measurements.iter().enumerate() {
        if m.party != net.parties[p].name {
            return Err(Error::UnknownParty(m.party.clone()));
        }
        let defect = m.completeness_defect();
        if defect > UNITARY_TOL {
            return Err(Error::IncompleteMeasurement {
                party: m.party.clone(),
                defect,
            });
        }
    }
    let n = net.num_parties();
    // local index of every party at every support point, precomputed
    let locals: Vec<Vec<usize>> = state
        .support
        .iter()
        .map(|&g| (0..n).map(|p| state.wiring.local_index(p, g)).collect())
        .collect();
    let amps: Vec<Complex64> = state.support.iter().map(|&g| state.amplitudes[g]).collect();

    let counts: Vec<usize> = measurements.iter().map(|m| m.outcomes.len()).collect();
    let total: u128 = counts.iter().map(|&c| c as u128).product();

    let eval_tuple = |mut idx: u128| -> (Vec<Outcome>, f64) {
        let mut choice = vec![0usize; n];
        for p in (0..n).rev() {
            choice[p] = (idx % counts[p] as u128) as usize;
            idx /= counts[p] as u128;
        }
        let outcome: Vec<&MeasurementOutcome> = (0..n)
            .map(|p| &measurements[p].outcomes[choice[p]])
            .collect();
        // sum |<v_1 ... v_n | psi>|^2 over the outcomes' basis combinations
        let mut prob = 0.0;
        let ranks: Vec<usize> = outcome.iter().map(|o| o.vectors.len()).collect();
        let combos: usize = ranks.iter().product();
        for mut combo in 0..combos {
            let mut pick = vec![0usize; n];
            for p in (0..n).rev() {
                pick[p] = combo % ranks[p];
                combo /= ranks[p];
            }
            let mut amp = Complex64::zero();
            for (s, loc) in locals.iter().enumerate() {
                let mut term = amps[s];
                for p in 0..n {
                    term *= outcome[p].vectors[pick[p]][loc[p]].conj();
                    if term.is_zero() {
                        break;
                    }
                }
                amp += term;
            }
            prob += amp.norm_sqr();
        }
        let labels = outcome.iter().map(|o| o.label.clone()).collect();
        (labels, prob)
    };

    let entries: Vec<(Vec<Outcome>, f64)> = par::run(|| {
        par::chunk_ranges(total, rayon::current_num_threads() * 4)
            .into_par_iter()
            .map(|range| range.map(eval_tuple).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let mut table: BTreeMap<Vec<Outcome>, f64> = BTreeMap::new();
    for (key, p) in entries {
        if p > PROB_FLOOR {
            *table.entry(key).or_insert(0.0) += p;
        }
    }
    Distribution::from_float(net, table)
}

/// Gram–Schmidt orthonormalization of the matrix's columns, in column order.
/// Fails when a column's residual drops below `1e-8`.
pub fn gram_schmidt_columns(matrix: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let d = matrix.len();
    if matrix.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: matrix.iter().map(|r| r.len()).max().unwrap_or(0),
        });
    }
    let mut cols: Vec<Vec<Complex64>> = (0..d).map(|j| (0..d).map(|i| matrix[i][j]).collect()).collect();
    for j in 0..d {
        for i in 0..j {
            let dot: Complex64 = (0..d).map(|k| cols[i][k].conj() * cols[j][k]).sum();
            for k in 0..d {
                let delta = dot * cols[i][k];
                cols[j][k] -= delta;
            }
        }
        let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::RankDeficient { residual: norm });
        }
        for k in 0..d {
            cols[j][k] /= norm;
        }
    }
    let mut out = vec![vec![Complex64::zero(); d]; d];
    for j in 0..d {
        for i in 0..d {
            out[i][j] = cols[j][i];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Interval twins for rigorous event probabilities
// ---------------------------------------------------------------------------

/// Sparse interval enclosure of the CM joint state.
#[derive(Clone, Debug)]
pub struct IntervalState {
    wiring: Wiring,
    entries: Vec<(usize, ComplexInterval)>,
}

impl IntervalState {
    /// CM states on every source, with `1/sqrt(C)` enclosed rigorously.
    pub fn cm(net: &Network) -> Result<IntervalState> {
        let wiring = Wiring::new(net)?;
        if wiring.dim() as u128 > DEFAULT_DIMENSION_CAP {
            return Err(Error::DimensionCap {
                needed: wiring.dim() as u128,
                cap: DEFAULT_DIMENSION_CAP,
            });
        }
        let factors: Vec<Vec<ComplexInterval>> = net
            .sources
            .iter()
            .map(|s| cm_source_state_intervals(s.legs.len(), net.colors))
            .collect();
        let refs: Vec<&[ComplexInterval]> = factors.iter().map(|f| f.as_slice()).collect();
        let dense = kron(&refs);
        let entries = dense
            .into_iter()
            .enumerate()
            .filter(|(_, a)| !a.is_exact_zero())
            .collect();
        Ok(IntervalState { wiring, entries })
    }

    pub fn wiring(&self) -> &Wiring {
        &self.wiring
    }

    /// Enclosure of `|<v_1 ... v_n | psi>|^2` for one rank-1 vector per
    /// party over her local space.
    pub fn event_probability(&self, vectors: &[Vec<ComplexInterval>]) -> Interval {
        let n = vectors.len();
        let mut amp = ComplexInterval::zero();
        for &(g, psi) in &self.entries {
            let mut term = psi;
            for (p, v) in vectors.iter().enumerate().take(n) {
                term = term * v[self.wiring.local_index(p, g)].conj();
                if term.is_exact_zero() {
                    break;
                }
            }
            amp = amp + term;
        }
        amp.norm_sqr()
    }
}

/// Interval vector of one party's rank-1 outcome: a unit view vector or a
/// refined row embedded at the ambiguous view positions.
pub fn interval_outcome_vector(
    wiring: &Wiring,
    index: &CompatibilityIndex,
    party: usize,
    outcome: &Outcome,
    refinement: Option<&RefinementUnitary>,
) -> Result<Vec<ComplexInterval>> {
    let local_dim = wiring.local_dim(party);
    let mut v = vec![ComplexInterval::zero(); local_dim];
    match outcome {
        Outcome::View(view) => {
            v[wiring.view_index(view)] = ComplexInterval::point(1.0, 0.0);
        }
        Outcome::Refined(r) => {
            let unitary = refinement.ok_or(Error::ModeUnavailable(
                "refined outcome needs a refinement unitary",
            ))?;
            let row = unitary
                .matrix
                .get((*r as usize) - 1)
                .ok_or(Error::DimensionMismatch {
                    expected: unitary.dim(),
                    got: *r as usize,
                })?;
            for (col, view) in index.ambiguous_views(party).iter().enumerate() {
                v[wiring.view_index(view)] = ComplexInterval::point(row[col].re, row[col].im);
            }
        }
        other => {
            return Err(Error::InvalidDistribution(format!(
                "outcome {:?} has no rank-1 vector",
                other.encode()
            )))
        }
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Refinement JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RefinementJson {
    party: String,
    matrix: Vec<Vec<[crate::jsonfmt::F64; 2]>>,
}

impl RefinementUnitary {
    fn to_json_struct(&self) -> RefinementJson {
        RefinementJson {
            party: self.party.clone(),
            matrix: self
                .matrix
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|z| [crate::jsonfmt::F64(z.re), crate::jsonfmt::F64(z.im)])
                        .collect()
                })
                .collect(),
        }
    }

    fn from_json_struct(raw: RefinementJson) -> RefinementUnitary {
        RefinementUnitary {
            party: raw.party,
            matrix: raw
                .matrix
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|[re, im]| Complex64::new(re.0, im.0))
                        .collect()
                })
                .collect(),
        }
    }
}

/// Serialize a set of per-party refinements (array form).
pub fn refinements_to_json(refinements: &[RefinementUnitary]) -> String {
    let raw: Vec<RefinementJson> = refinements.iter().map(|r| r.to_json_struct()).collect();
    serde_json::to_string(&raw).expect("refinements serialize")
}

/// Accepts either a single refinement object or an array of them.
pub fn refinements_from_json(text: &str) -> Result<Vec<RefinementUnitary>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let raws: Vec<RefinementJson> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    Ok(raws
        .into_iter()
        .map(RefinementUnitary::from_json_struct)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{compute_pcolor, CompatibilityIndex, TupleSet};
    use crate::net::fig1_network;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fig1_setup() -> (Network, CompatibilityIndex, GlobalState) {
        let net = fig1_network();
        let index = CompatibilityIndex::new(&net, &TupleSet::fig1()).unwrap();
        let state = cm_global_state(&net).unwrap();
        (net, index, state)
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<Complex64>> {
        loop {
            let m: Vec<Vec<Complex64>> = (0..d)
                .map(|_| {
                    (0..d)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect();
            if let Ok(u) = gram_schmidt_columns(&m) {
                return u;
            }
        }
    }

    fn refined_measurements(
        net: &Network,
        index: &CompatibilityIndex,
        unitaries: &[Vec<Vec<Complex64>>],
    ) -> Vec<Measurement> {
        (0..net.num_parties())
            .map(|p| {
                let choice = RefinementChoice::Refined(RefinementUnitary {
                    party: net.parties[p].name.clone(),
                    matrix: unitaries[p].clone(),
                });
                build_cm_measurement(net, p, index, &choice).unwrap()
            })
            .collect()
    }

    fn coarse_measurements(net: &Network, index: &CompatibilityIndex) -> Vec<Measurement> {
        (0..net.num_parties())
            .map(|p| build_cm_measurement(net, p, index, &RefinementChoice::Coarse).unwrap())
            .collect()
    }

    #[test]
    fn cm_states_match_strategy() {
        let s = cm_source_state(2, 3);
        let w = 1.0 / 3f64.sqrt();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let expected = if i == 0 || i == 4 || i == 8 { w } else { 0.0 };
            assert!((a.re - expected).abs() < 1e-15 && a.im == 0.0);
        }
        let s3 = cm_source_state(3, 3);
        assert_eq!(s3.amplitudes().len(), 27);
        assert!((s3.amplitudes()[13].re - w).abs() < 1e-15); // |111> = 9+3+1
        let s2 = cm_source_state(2, 2);
        assert!((s2.amplitudes()[0].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((s2.amplitudes()[3].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn global_state_dimensions() {
        let (_, _, state) = fig1_setup();
        assert_eq!(state.wiring().dim(), 6561); // 3^(2+3+3)
        assert_eq!(state.support().len(), 27);

        let net = Network {
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
        let state = cm_global_state(&net).unwrap();
        assert_eq!(state.wiring().dim(), 4);
        let w = 1.0 / 2f64.sqrt();
        assert!((state.amplitudes()[0].re - w).abs() < 1e-15);
        assert!((state.amplitudes()[3].re - w).abs() < 1e-15);
    }

    #[test]
    fn wiring_follows_view_order() {
        // distinguishable product state: lambda = |0>_A |1>_D, mu = |200>,
        // nu = |120>; checks D's view order (nu, lambda) in particular
        let net = fig1_network();
        let basis = |dim: usize, idx: usize| {
            let mut v = vec![Complex64::zero(); dim];
            v[idx] = Complex64::new(1.0, 0.0);
            v
        };
        let sources = vec![
            SourceState::new(basis(9, 1), 2, 3).unwrap(),       // (0,1)
            SourceState::new(basis(27, 18), 3, 3).unwrap(),     // (2,0,0)
            SourceState::new(basis(27, 15), 3, 3).unwrap(),     // (1,2,0)
        ];
        let state = build_global_state(&net, &sources).unwrap();
        // every view compatible -> fully diagonal measurement
        let all = TupleSet::new(
            (0..27u32).map(|k| vec![(k / 9) % 3, (k / 3) % 3, k % 3]),
        );
        let index = CompatibilityIndex::new(&net, &all).unwrap();
        let ms = coarse_measurements(&net, &index);
        let d = born_distribution(&state, &ms).unwrap();
        let key = vec![
            Outcome::View(vec![0, 2]), // A: (lambda, mu)
            Outcome::View(vec![0, 1]), // B: (mu, nu)
            Outcome::View(vec![0, 2]), // C: (mu, nu)
            Outcome::View(vec![0, 1]), // D: (nu, lambda) = (0, 1)
        ];
        assert!((d.get(&key).to_f64() - 1.0).abs() < 1e-12);
        assert_eq!(d.support_len(), 1);
    }

    #[test]
    fn measurement_shapes() {
        let (net, index, _) = fig1_setup();
        let id = RefinementChoice::Refined(RefinementUnitary::identity("A", 3));
        let m = build_cm_measurement(&net, 0, &index, &id).unwrap();
        assert_eq!(m.outcomes.len(), 9);
        // chi_1 = |01>, chi_2 = |12>, chi_3 = |20>
        let chi1 = m
            .outcomes
            .iter()
            .find(|o| o.label == Outcome::Refined(1))
            .unwrap();
        assert!((chi1.vectors[0][1].re - 1.0).abs() < 1e-15);
        let chi3 = m
            .outcomes
            .iter()
            .find(|o| o.label == Outcome::Refined(3))
            .unwrap();
        assert!((chi3.vectors[0][6].re - 1.0).abs() < 1e-15);

        let coarse = build_cm_measurement(&net, 0, &index, &RefinementChoice::Coarse).unwrap();
        assert_eq!(coarse.outcomes.len(), 7);
        let chi = coarse.outcomes.iter().find(|o| o.label == Outcome::Chi).unwrap();
        assert_eq!(chi.vectors.len(), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(&mut rng, 3);
        let m = build_cm_measurement(
            &net,
            0,
            &index,
            &RefinementChoice::Refined(RefinementUnitary {
                party: "A".into(),
                matrix: u,
            }),
        )
        .unwrap();
        assert!(m.completeness_defect() < 1e-10);
    }

    #[test]
    fn coarse_born_equals_pcolor() {
        let (net, index, state) = fig1_setup();
        let ms = coarse_measurements(&net, &index);
        let born = born_distribution(&state, &ms).unwrap();
        let pcolor = compute_pcolor(&net, &TupleSet::fig1()).unwrap();
        assert!(born.tv_distance(&pcolor.to_float()).unwrap() < 1e-10);
    }

    #[test]
    fn identity_refinement_equals_deterministic_refinement() {
        let (net, index, state) = fig1_setup();
        let unitaries: Vec<_> = (0..4).map(|p| RefinementUnitary::identity(&net.parties[p].name, index.ambiguous_dim(p)).matrix).collect();
        let ms = refined_measurements(&net, &index, &unitaries);
        let born = born_distribution(&state, &ms).unwrap();
        // classical oracle: enumerate the 27 assignments, refine chi by the
        // ambiguous view's position
        let mut expected: BTreeMap<Vec<Outcome>, f64> = BTreeMap::new();
        for k in 0..27usize {
            let assignment = vec![(k / 9) as Color % 3, (k / 3) as Color % 3, k as Color % 3];
            let key: Vec<Outcome> = (0..4)
                .map(|p| {
                    let view = index.view_of(p, &assignment);
                    match index.ambiguous_position(p, &view) {
                        None => Outcome::View(view),
                        Some(pos) => Outcome::Refined(pos as u32 + 1),
                    }
                })
                .collect();
            *expected.entry(key).or_insert(0.0) += 1.0 / 27.0;
        }
        for (key, p) in &expected {
            assert!(
                (born.get(key).to_f64() - p).abs() < 1e-12,
                "mismatch at {key:?}"
            );
        }
        assert_eq!(born.support_len(), expected.len());
    }

    #[test]
    fn closed_form_ambiguous_block() {
        let (net, index, state) = fig1_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let us: Vec<_> = (0..4).map(|_| random_unitary(&mut rng, 3)).collect();
            let ms = refined_measurements(&net, &index, &us);
            let born = born_distribution(&state, &ms).unwrap();
            // pattern t=1: views (01, 12, 12, 20) -> columns (0, 1, 1, 2)
            // pattern t=2: views (12, 20, 20, 01) -> columns (1, 2, 2, 0)
            // pattern t=3: views (20, 01, 01, 12) -> columns (2, 0, 0, 1)
            let cols = [[0, 1, 1, 2], [1, 2, 2, 0], [2, 0, 0, 1]];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let rows = [i, j, k, l];
                            let mut amp = Complex64::zero();
                            for c in cols {
                                let mut term = Complex64::new(1.0, 0.0);
                                for p in 0..4 {
                                    term *= us[p][rows[p]][c[p]];
                                }
                                amp += term;
                            }
                            let expected = amp.norm_sqr() / 27.0;
                            let key: Vec<Outcome> = rows
                                .iter()
                                .map(|&r| Outcome::Refined(r as u32 + 1))
                                .collect();
                            assert!(
                                (born.get(&key).to_f64() - expected).abs() < 1e-10,
                                "mismatch at {rows:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn born_invariants_under_random_refinements() {
        let (net, index, state) = fig1_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coarse = born_distribution(&state, &coarse_measurements(&net, &index)).unwrap();
        for _ in 0..5 {
            let us: Vec<_> = (0..4).map(|_| random_unitary(&mut rng, 3)).collect();
            let ms = refined_measurements(&net, &index, &us);
            let born = born_distribution(&state, &ms).unwrap();
            let total = born.total().to_f64();
            assert!((total - 1.0).abs() < 1e-10);
            // refinement-independence of the coarse block
            assert!(born.coarse_grain_chi().tv_distance(&coarse).unwrap() < 1e-10);
            // maximally mixed reduced states: every single-party outcome at 1/9
            for p in 0..4 {
                let marg = born.marginal(&[p]).unwrap();
                for (_, prob) in marg.table() {
                    assert!((prob.to_f64() - 1.0 / 9.0).abs() < 1e-10);
                }
                assert_eq!(marg.support_len(), 9);
            }
        }
    }

    #[test]
    fn diagonal_phases_are_unobservable() {
        let (net, index, state) = fig1_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let us: Vec<_> = (0..4).map(|_| random_unitary(&mut rng, 3)).collect();
        let born = born_distribution(&state, &refined_measurements(&net, &index, &us)).unwrap();
        let phased: Vec<_> = us
            .iter()
            .map(|u| {
                let mut m = u.clone();
                for (r, row) in m.iter_mut().enumerate() {
                    let phase = Complex64::from_polar(1.0, 0.7 * (r as f64 + 1.0));
                    for z in row.iter_mut() {
                        *z *= phase;
                    }
                }
                m
            })
            .collect();
        let born2 =
            born_distribution(&state, &refined_measurements(&net, &index, &phased)).unwrap();
        assert!(born.tv_distance(&born2).unwrap() < 1e-12);
    }

    #[test]
    fn gram_schmidt_hand_example() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::zero();
        // columns (1,0,0), (1,1,0), (0,0,1)
        let m = vec![
            vec![one, one, zero],
            vec![zero, one, zero],
            vec![zero, zero, one],
        ];
        let u = gram_schmidt_columns(&m).unwrap();
        // second column orthonormalizes to (0,1,0)
        assert!((u[0][1].norm()) < 1e-12);
        assert!((u[1][1] - one).norm() < 1e-12);
        let id = vec![
            vec![one, zero, zero],
            vec![zero, one, zero],
            vec![zero, zero, one],
        ];
        assert_eq!(gram_schmidt_columns(&id).unwrap(), id);
        // rank-deficient input is signaled
        let dep = vec![
            vec![one, one, zero],
            vec![zero, zero, zero],
            vec![zero, zero, one],
        ];
        assert!(matches!(
            gram_schmidt_columns(&dep),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn interval_state_encloses_float_probabilities() {
        let (net, index, state) = fig1_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let us: Vec<_> = (0..4).map(|_| random_unitary(&mut rng, 3)).collect();
        let ms = refined_measurements(&net, &index, &us);
        let born = born_distribution(&state, &ms).unwrap();
        let istate = IntervalState::cm(&net).unwrap();
        let refinements: Vec<RefinementUnitary> = (0..4)
            .map(|p| RefinementUnitary {
                party: net.parties[p].name.clone(),
                matrix: us[p].clone(),
            })
            .collect();
        // check a refined block entry and a revealing-style mixed entry
        let keys = [
            vec![
                Outcome::Refined(1),
                Outcome::Refined(2),
                Outcome::Refined(3),
                Outcome::Refined(1),
            ],
            vec![
                Outcome::Refined(2),
                Outcome::View(vec![1, 0]),
                Outcome::View(vec![1, 0]),
                Outcome::View(vec![0, 0]),
            ],
        ];
        for key in keys {
            let vectors: Vec<Vec<ComplexInterval>> = (0..4)
                .map(|p| {
                    interval_outcome_vector(
                        istate.wiring(),
                        &index,
                        p,
                        &key[p],
                        Some(&refinements[p]),
                    )
                    .unwrap()
                })
                .collect();
            let enclosure = istate.event_probability(&vectors);
            let float_value = born.get(&key).to_f64();
            assert!(
                enclosure.lower() - 1e-12 <= float_value
                    && float_value <= enclosure.upper() + 1e-12,
                "float {float_value} outside {enclosure:?}"
            );
            assert!(enclosure.width() < 1e-12);
        }
    }

    #[test]
    fn refinement_json_round_trip() {
        let u = RefinementUnitary::identity("A", 3);
        let text = refinements_to_json(std::slice::from_ref(&u));
        let back = refinements_from_json(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], u);
        // single-object form parses too
        let single = serde_json::json!({
            "party": "B",
            "matrix": [[[0.0, 1.0]]],
        });
        let parsed = refinements_from_json(&single.to_string()).unwrap();
        assert_eq!(parsed[0].matrix[0][0], Complex64::new(0.0, 1.0));
    }
}
