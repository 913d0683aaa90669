//! Party/source networks and their graph-theoretic preconditions.
//!
//! A network is an incidence hypergraph: sources with ordered legs, parties
//! with an ordered view of their adjacent sources, and a shared color count
//! `C` (the per-leg local dimension). Legs are ordered and named; the global
//! leg index is `(source declaration order, leg order within source)`, a
//! convention the quantum module relies on bit-exactly.

use crate::error::Error;
use crate::jsonfmt;
use crate::simplex::{self, LpStatus, StandardForm};
use crate::Result;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub type Color = u32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub name: String,
    pub legs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Party {
    pub name: String,
    pub view: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub colors: Color,
    pub sources: Vec<Source>,
    pub parties: Vec<Party>,
}

impl Network {
    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn party_index(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.name == name)
    }

    pub fn source_index(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.name == name)
    }

    /// Source indices of a party's view, in view order. Assumes validity.
    pub fn view_sources(&self, party: usize) -> Vec<usize> {
        self.parties[party]
            .view
            .iter()
            .map(|s| self.source_index(s).expect("validated network"))
            .collect()
    }

    /// Party indices of a source's legs, in leg order. Assumes validity.
    pub fn leg_parties(&self, source: usize) -> Vec<usize> {
        self.sources[source]
            .legs
            .iter()
            .map(|p| self.party_index(p).expect("validated network"))
            .collect()
    }

    /// The set of sources adjacent to a party.
    pub fn adjacent_sources(&self, party: usize) -> BTreeSet<usize> {
        self.view_sources(party).into_iter().collect()
    }

    /// All invariant violations; an empty report means the network is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        if self.colors < 2 {
            report.push(format!("colors must be at least 2, got {}", self.colors));
        }
        let mut source_names = BTreeSet::new();
        for s in &self.sources {
            if !source_names.insert(s.name.as_str()) {
                report.push(format!("duplicate source name {:?}", s.name));
            }
        }
        let mut party_names = BTreeSet::new();
        for p in &self.parties {
            if !party_names.insert(p.name.as_str()) {
                report.push(format!("duplicate party name {:?}", p.name));
            }
        }
        for s in &self.sources {
            if s.legs.len() < 2 {
                report.push(format!(
                    "source {:?} has {} leg(s), need at least 2",
                    s.name,
                    s.legs.len()
                ));
            }
            let mut seen = BTreeSet::new();
            for leg in &s.legs {
                if !party_names.contains(leg.as_str()) {
                    report.push(format!("source {:?} lists unknown party {:?}", s.name, leg));
                    continue;
                }
                if !seen.insert(leg.as_str()) {
                    report.push(format!(
                        "source {:?} lists party {:?} more than once",
                        s.name, leg
                    ));
                }
                let party = self.parties.iter().find(|p| &p.name == leg).unwrap();
                let count = party.view.iter().filter(|v| **v == s.name).count();
                if count != 1 {
                    report.push(format!(
                        "incidence mismatch: source {:?} lists party {:?} but that party's \
                         view contains it {} time(s)",
                        s.name, leg, count
                    ));
                }
            }
        }
        for p in &self.parties {
            if p.view.is_empty() {
                report.push(format!("party {:?} has an empty view", p.name));
            }
            let mut seen = BTreeSet::new();
            for v in &p.view {
                if !source_names.contains(v.as_str()) {
                    report.push(format!("party {:?} lists unknown source {:?}", p.name, v));
                    continue;
                }
                if !seen.insert(v.as_str()) {
                    report.push(format!(
                        "party {:?} lists source {:?} more than once",
                        p.name, v
                    ));
                }
                let source = self.sources.iter().find(|s| &s.name == v).unwrap();
                let count = source.legs.iter().filter(|l| **l == p.name).count();
                if count != 1 {
                    report.push(format!(
                        "incidence mismatch: party {:?} lists source {:?} but that source's \
                         legs contain it {} time(s)",
                        p.name, v, count
                    ));
                }
            }
        }
        report
    }

    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(report))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Network> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The four-party 1-2 network: sources `lambda [A,D]`, `mu [A,B,C]`,
/// `nu [B,C,D]` with views `A:(lambda,mu)`, `B:(mu,nu)`, `C:(mu,nu)`,
/// `D:(nu,lambda)` and three colors.
pub fn fig1_network() -> Network {
    let src = |name: &str, legs: &[&str]| Source {
        name: name.into(),
        legs: legs.iter().map(|s| s.to_string()).collect(),
    };
    let pty = |name: &str, view: &[&str]| Party {
        name: name.into(),
        view: view.iter().map(|s| s.to_string()).collect(),
    };
    Network {
        colors: 3,
        sources: vec![
            src("lambda", &["A", "D"]),
            src("mu", &["A", "B", "C"]),
            src("nu", &["B", "C", "D"]),
        ],
        parties: vec![
            pty("A", &["lambda", "mu"]),
            pty("B", &["mu", "nu"]),
            pty("C", &["mu", "nu"]),
            pty("D", &["nu", "lambda"]),
        ],
    }
}

/// Two parties joined by two parallel sources; the standard ECS
/// counterexample.
pub fn parallel_sources_network() -> Network {
    Network {
        colors: 2,
        sources: vec![
            Source {
                name: "S1".into(),
                legs: vec!["A".into(), "B".into()],
            },
            Source {
                name: "S2".into(),
                legs: vec!["A".into(), "B".into()],
            },
        ],
        parties: vec![
            Party {
                name: "A".into(),
                view: vec!["S1".into(), "S2".into()],
            },
            Party {
                name: "B".into(),
                view: vec!["S1".into(), "S2".into()],
            },
        ],
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EcsReport {
    pub holds: bool,
    /// Per source (declaration order): the first witness pair of party names
    /// whose adjacent-source sets intersect exactly in that source.
    pub witnesses: Vec<Option<(String, String)>>,
}

/// Exclusive Common Source check: every source must be the unique common
/// source of some pair of its parties.
pub fn check_ecs(net: &Network) -> Result<EcsReport> {
    net.require_valid()?;
    let adj: Vec<BTreeSet<usize>> = (0..net.num_parties())
        .map(|p| net.adjacent_sources(p))
        .collect();
    let mut witnesses = Vec::with_capacity(net.num_sources());
    let mut holds = true;
    for s in 0..net.num_sources() {
        let mut legs = net.leg_parties(s);
        legs.sort_unstable();
        let mut found = None;
        'pairs: for (k, &a) in legs.iter().enumerate() {
            for &b in &legs[k + 1..] {
                let common: BTreeSet<usize> = adj[a].intersection(&adj[b]).copied().collect();
                if common.len() == 1 && common.contains(&s) {
                    found = Some((
                        net.parties[a].name.clone(),
                        net.parties[b].name.clone(),
                    ));
                    break 'pairs;
                }
            }
        }
        if found.is_none() {
            holds = false;
        }
        witnesses.push(found);
    }
    Ok(EcsReport { holds, witnesses })
}

/// Nonnegative party weights summing to exactly 1 over every source's legs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinnerWeights {
    pub delta: BTreeMap<String, BigRational>,
}

impl FinnerWeights {
    /// Weights aligned to the network's party order.
    pub fn aligned(&self, net: &Network) -> Result<Vec<BigRational>> {
        net.parties
            .iter()
            .map(|p| {
                self.delta
                    .get(&p.name)
                    .cloned()
                    .ok_or_else(|| Error::UnknownParty(p.name.clone()))
            })
            .collect()
    }

    /// Exact check of the PFIS conditions for the given network.
    pub fn validate(&self, net: &Network) -> Result<()> {
        net.require_valid()?;
        let aligned = self.aligned(net)?;
        if let Some(neg) = aligned.iter().find(|d| d.is_negative()) {
            return Err(Error::Preconditions(format!(
                "negative Finner weight {neg}"
            )));
        }
        for s in 0..net.num_sources() {
            let sum: BigRational = net
                .leg_parties(s)
                .into_iter()
                .map(|p| aligned[p].clone())
                .sum();
            if sum != BigRational::one() {
                return Err(Error::Preconditions(format!(
                    "weights over source {:?} sum to {} instead of 1",
                    net.sources[s].name, sum
                )));
            }
        }
        Ok(())
    }

    /// The uniform weights `1/k` for a network whose sources all have `k`
    /// legs.
    pub fn uniform(net: &Network) -> Result<FinnerWeights> {
        net.require_valid()?;
        let k = net.sources[0].legs.len();
        if net.sources.iter().any(|s| s.legs.len() != k) {
            return Err(Error::Preconditions(
                "uniform weights need a regular network".into(),
            ));
        }
        let w = BigRational::new(1.into(), (k as i64).into());
        Ok(FinnerWeights {
            delta: net
                .parties
                .iter()
                .map(|p| (p.name.clone(), w.clone()))
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, String> = self
            .delta
            .iter()
            .map(|(k, v)| (k.as_str(), jsonfmt::format_ratio(v)))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "delta": map }))
            .expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<FinnerWeights> {
        #[derive(Deserialize)]
        struct Raw {
            delta: BTreeMap<String, String>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let mut delta = BTreeMap::new();
        for (k, v) in raw.delta {
            delta.insert(k, jsonfmt::parse_ratio(&v)?);
        }
        Ok(FinnerWeights { delta })
    }
}

/// Exact rational solve of the Perfect Fractional Independent Set system:
/// per-source weight sums equal to 1, weights nonnegative. Any vertex of the
/// feasible polytope is returned; `None` when the system is infeasible.
pub fn solve_pfis(net: &Network) -> Result<Option<FinnerWeights>> {
    net.require_valid()?;
    let n = net.num_parties();
    let m = net.num_sources();
    let zero = BigRational::zero;
    let mut rows = vec![vec![zero(); n]; m];
    for s in 0..m {
        for p in net.leg_parties(s) {
            rows[s][p] = BigRational::one();
        }
    }
    let problem = StandardForm {
        num_vars: n,
        rows,
        rhs: vec![BigRational::one(); m],
        objective: vec![zero(); n],
    };
    let sol = simplex::solve(&problem, 10_000)?;
    if sol.status == LpStatus::Infeasible {
        return Ok(None);
    }
    let weights = FinnerWeights {
        delta: net
            .parties
            .iter()
            .zip(sol.x)
            .map(|(p, d)| (p.name.clone(), d))
            .collect(),
    };
    weights.validate(net).expect("solver returned a valid PFIS");
    Ok(Some(weights))
}

fn pad(prefix: &str, i: usize, width: usize) -> String {
    format!("{prefix}{i:0width$}")
}

/// Bipartite source-complete network: `n` parties, one two-leg source per
/// party pair, two colors. Sources are numbered in lexicographic pair order.
pub fn make_kn(n: usize) -> Result<Network> {
    if n < 3 {
        return Err(Error::SizeBelowMinimum {
            what: "K_n party count",
            min: 3,
            got: n,
        });
    }
    let m = n * (n - 1) / 2;
    let pw = width_for(n);
    let sw = width_for(m);
    let parties_names: Vec<String> = (1..=n).map(|i| pad("A", i, pw)).collect();
    let mut sources = Vec::with_capacity(m);
    let mut pair_sources: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            k += 1;
            let name = pad("S", k, sw);
            sources.push(Source {
                name: name.clone(),
                legs: vec![parties_names[i].clone(), parties_names[j].clone()],
            });
            pair_sources[i].push(name.clone());
            pair_sources[j].push(name);
        }
    }
    let parties = parties_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut view = pair_sources[i].clone();
            view.sort();
            Party {
                name: name.clone(),
                view,
            }
        })
        .collect();
    let net = Network {
        colors: 2,
        sources,
        parties,
    };
    net.require_valid()?;
    Ok(net)
}

/// Bipartite party-complete network: `m` sources, one two-view party per
/// source pair, `m` colors. Parties are numbered in lexicographic pair order.
pub fn make_gm(m: usize) -> Result<Network> {
    if m < 3 {
        return Err(Error::SizeBelowMinimum {
            what: "G_m source count",
            min: 3,
            got: m,
        });
    }
    let n = m * (m - 1) / 2;
    let sw = width_for(m);
    let pw = width_for(n);
    let source_names: Vec<String> = (1..=m).map(|i| pad("S", i, sw)).collect();
    let mut parties = Vec::with_capacity(n);
    let mut source_legs: Vec<Vec<String>> = vec![Vec::new(); m];
    let mut k = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            k += 1;
            let name = pad("A", k, pw);
            parties.push(Party {
                name: name.clone(),
                view: vec![source_names[i].clone(), source_names[j].clone()],
            });
            source_legs[i].push(name.clone());
            source_legs[j].push(name);
        }
    }
    let sources = source_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut legs = source_legs[i].clone();
            legs.sort();
            Source {
                name: name.clone(),
                legs,
            }
        })
        .collect();
    let net = Network {
        colors: m as Color,
        sources,
        parties,
    };
    net.require_valid()?;
    Ok(net)
}

fn width_for(count: usize) -> usize {
    std::cmp::max(2, count.to_string().len())
}
