//! Probability tables over per-party outcome tuples.
//!
//! Tables come in two arithmetic modes: exact rationals for classical CM
//! distributions and PFIS-side checks, floats for Born-rule values. Mixed
//! comparisons promote rationals to floats. Tables are immutable after
//! construction and keyed in lexicographic outcome order, which downstream
//! serialization relies on for byte-stable reports.

use crate::error::Error;
use crate::jsonfmt::{self, F64};
use crate::net::{Color, Network};
use crate::Result;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One party's output symbol.
///
/// `View` is the party's full color view (compatible case), `Refined(r)` the
/// r-th fine ambiguous outcome (1-based), `Chi` the coarse ambiguous symbol.
/// `Tag` is a free label produced only by coarse-graining maps.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    View(Vec<Color>),
    Refined(u32),
    Chi,
    Tag(String),
}

impl Outcome {
    /// Text form: views as digit strings (comma-separated when any color
    /// needs more than one digit), `chi:r`, `chi`, or the bare tag.
    pub fn encode(&self) -> String {
        match self {
            Outcome::View(colors) => {
                if colors.iter().all(|c| *c < 10) {
                    colors
                        .iter()
                        .map(|c| char::from_digit(*c, 10).unwrap())
                        .collect()
                } else {
                    colors
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                }
            }
            Outcome::Refined(r) => format!("chi:{r}"),
            Outcome::Chi => "chi".into(),
            Outcome::Tag(t) => t.clone(),
        }
    }

    /// Inverse of [`encode`](Self::encode) given the party's view size and
    /// the network's color count.
    pub fn decode(text: &str, view_size: usize, colors: Color) -> Result<Outcome> {
        let bad = || Error::InvalidDistribution(format!("bad outcome {text:?}"));
        if text == "chi" {
            return Ok(Outcome::Chi);
        }
        if let Some(r) = text.strip_prefix("chi:") {
            let r: u32 = r.parse().map_err(|_| bad())?;
            if r == 0 {
                return Err(bad());
            }
            return Ok(Outcome::Refined(r));
        }
        let view: Option<Vec<Color>> = if text.contains(',') {
            text.split(',').map(|c| c.parse::<Color>().ok()).collect()
        } else if text.chars().count() == view_size {
            text.chars().map(|c| c.to_digit(10)).collect()
        } else if view_size == 1 {
            text.parse::<Color>().ok().map(|c| vec![c])
        } else {
            None
        };
        match view {
            Some(v) if v.len() == view_size && v.iter().all(|c| *c < colors) => {
                Ok(Outcome::View(v))
            }
            _ => Ok(Outcome::Tag(text.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

/// A probability in the table's arithmetic mode.
#[derive(Clone, Debug, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Float(f64),
}

impl Prob {
    pub fn to_f64(&self) -> f64 {
        match self {
            Prob::Exact(r) => r.to_f64().expect("rational fits in f64"),
            Prob::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Float(_) => None,
        }
    }

    fn zero(mode: Mode) -> Prob {
        match mode {
            Mode::Exact => Prob::Exact(BigRational::zero()),
            Mode::Float => Prob::Float(0.0),
        }
    }

    fn add(&self, other: &Prob) -> Prob {
        match (self, other) {
            (Prob::Exact(a), Prob::Exact(b)) => Prob::Exact(a + b),
            (a, b) => Prob::Float(a.to_f64() + b.to_f64()),
        }
    }
}

/// Tolerance on the total mass of float-mode tables.
pub const FLOAT_TOTAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    mode: Mode,
    parties: Vec<String>,
    view_sizes: Vec<usize>,
    colors: Color,
    table: BTreeMap<Vec<Outcome>, Prob>,
}

impl Distribution {
    pub fn from_exact(
        net: &Network,
        table: BTreeMap<Vec<Outcome>, BigRational>,
    ) -> Result<Distribution> {
        let d = Distribution {
            mode: Mode::Exact,
            parties: net.parties.iter().map(|p| p.name.clone()).collect(),
            view_sizes: (0..net.num_parties()).map(|p| net.parties[p].view.len()).collect(),
            colors: net.colors,
            table: table
                .into_iter()
                .filter(|(_, p)| !p.is_zero())
                .map(|(k, p)| (k, Prob::Exact(p)))
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn from_float(net: &Network, table: BTreeMap<Vec<Outcome>, f64>) -> Result<Distribution> {
        let d = Distribution {
            mode: Mode::Float,
            parties: net.parties.iter().map(|p| p.name.clone()).collect(),
            view_sizes: (0..net.num_parties()).map(|p| net.parties[p].view.len()).collect(),
            colors: net.colors,
            table: table
                .into_iter()
                .filter(|(_, p)| *p != 0.0)
                .map(|(k, p)| (k, Prob::Float(p)))
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        for (key, p) in &self.table {
            if key.len() != self.parties.len() {
                return Err(Error::InvalidDistribution(format!(
                    "outcome tuple of length {} for {} parties",
                    key.len(),
                    self.parties.len()
                )));
            }
            for (j, o) in key.iter().enumerate() {
                let ok = match o {
                    Outcome::View(v) => {
                        v.len() == self.view_sizes[j] && v.iter().all(|c| *c < self.colors)
                    }
                    Outcome::Refined(r) => *r >= 1,
                    Outcome::Chi | Outcome::Tag(_) => true,
                };
                if !ok {
                    return Err(Error::InvalidDistribution(format!(
                        "outcome {:?} invalid for party {}",
                        o.encode(),
                        self.parties[j]
                    )));
                }
            }
            let negative = match p {
                Prob::Exact(r) => r.is_negative(),
                Prob::Float(x) => *x < 0.0 || !x.is_finite(),
            };
            if negative {
                return Err(Error::InvalidDistribution(format!(
                    "negative probability at {:?}",
                    key.iter().map(|o| o.encode()).collect::<Vec<_>>()
                )));
            }
        }
        match self.total() {
            Prob::Exact(t) => {
                if !t.is_one() {
                    return Err(Error::InvalidDistribution(format!(
                        "exact table sums to {t}, not 1"
                    )));
                }
            }
            Prob::Float(t) => {
                if (t - 1.0).abs() > FLOAT_TOTAL_TOL {
                    return Err(Error::InvalidDistribution(format!(
                        "float table sums to {t}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn parties(&self) -> &[String] {
        &self.parties
    }

    pub fn colors(&self) -> Color {
        self.colors
    }

    pub fn view_sizes(&self) -> &[usize] {
        &self.view_sizes
    }

    pub fn table(&self) -> &BTreeMap<Vec<Outcome>, Prob> {
        &self.table
    }

    pub fn support_len(&self) -> usize {
        self.table.len()
    }

    /// Probability of an outcome tuple, zero (in the table's mode) when it
    /// is outside the support.
    pub fn get(&self, key: &[Outcome]) -> Prob {
        self.table
            .get(key)
            .cloned()
            .unwrap_or_else(|| Prob::zero(self.mode))
    }

    pub fn total(&self) -> Prob {
        let mut acc = Prob::zero(self.mode);
        for p in self.table.values() {
            acc = acc.add(p);
        }
        acc
    }

    /// Sum out every party not listed. Indices refer to the distribution's
    /// party order; the sub-tuple keeps that order.
    pub fn marginal(&self, keep: &[usize]) -> Result<Distribution> {
        if keep.is_empty() {
            return Err(Error::EmptyPartySubset);
        }
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if *keep.last().unwrap() >= self.parties.len() {
            return Err(Error::UnknownParty(format!(
                "party index {}",
                keep.last().unwrap()
            )));
        }
        let mut table: BTreeMap<Vec<Outcome>, Prob> = BTreeMap::new();
        for (key, p) in &self.table {
            let sub: Vec<Outcome> = keep.iter().map(|&j| key[j].clone()).collect();
            table
                .entry(sub)
                .and_modify(|acc| *acc = acc.add(p))
                .or_insert_with(|| p.clone());
        }
        Ok(Distribution {
            mode: self.mode,
            parties: keep.iter().map(|&j| self.parties[j].clone()).collect(),
            view_sizes: keep.iter().map(|&j| self.view_sizes[j]).collect(),
            colors: self.colors,
            table,
        })
    }

    /// Merge outcomes according to one map per party. Every outcome
    /// appearing in the support must have an image.
    pub fn coarse_grain(&self, maps: &[BTreeMap<Outcome, Outcome>]) -> Result<Distribution> {
        if maps.len() != self.parties.len() {
            return Err(Error::DimensionMismatch {
                expected: self.parties.len(),
                got: maps.len(),
            });
        }
        let mut table: BTreeMap<Vec<Outcome>, Prob> = BTreeMap::new();
        for (key, p) in &self.table {
            let mut mapped = Vec::with_capacity(key.len());
            for (j, o) in key.iter().enumerate() {
                let image = maps[j].get(o).ok_or_else(|| Error::NonTotalMapping {
                    party: self.parties[j].clone(),
                    outcome: o.encode(),
                })?;
                mapped.push(image.clone());
            }
            table
                .entry(mapped)
                .and_modify(|acc| *acc = acc.add(p))
                .or_insert_with(|| p.clone());
        }
        Ok(Distribution {
            mode: self.mode,
            parties: self.parties.clone(),
            view_sizes: self.view_sizes.clone(),
            colors: self.colors,
            table,
        })
    }

    /// The standard coarse-graining that forgets refinement indices:
    /// `Refined(_) -> Chi`, everything else unchanged.
    pub fn coarse_grain_chi(&self) -> Distribution {
        let maps: Vec<BTreeMap<Outcome, Outcome>> = (0..self.parties.len())
            .map(|j| {
                self.table
                    .keys()
                    .map(|key| {
                        let o = key[j].clone();
                        let image = match &o {
                            Outcome::Refined(_) => Outcome::Chi,
                            other => other.clone(),
                        };
                        (o, image)
                    })
                    .collect()
            })
            .collect();
        self.coarse_grain(&maps).expect("chi map is total")
    }

    pub fn to_float(&self) -> Distribution {
        Distribution {
            mode: Mode::Float,
            parties: self.parties.clone(),
            view_sizes: self.view_sizes.clone(),
            colors: self.colors,
            table: self
                .table
                .iter()
                .map(|(k, p)| (k.clone(), Prob::Float(p.to_f64())))
                .collect(),
        }
    }

    /// Total variation distance, `(1/2) * L1`. Exact when both tables are
    /// exact; otherwise computed in floats.
    pub fn tv_distance(&self, other: &Distribution) -> Result<f64> {
        if self.parties != other.parties
            || self.view_sizes != other.view_sizes
            || self.colors != other.colors
        {
            return Err(Error::AlphabetMismatch(
                "party lists or alphabets differ".into(),
            ));
        }
        let keys: std::collections::BTreeSet<&Vec<Outcome>> =
            self.table.keys().chain(other.table.keys()).collect();
        if self.mode == Mode::Exact && other.mode == Mode::Exact {
            let mut acc = BigRational::zero();
            for key in keys {
                let a = self.get(key);
                let b = other.get(key);
                let d = a.as_exact().unwrap() - b.as_exact().unwrap();
                acc += d.abs();
            }
            Ok((acc / BigRational::from_integer(2.into()))
                .to_f64()
                .unwrap())
        } else {
            let mut acc = 0.0;
            for key in keys {
                acc += (self.get(key).to_f64() - other.get(key).to_f64()).abs();
            }
            Ok(acc / 2.0)
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry {
            outcome: Vec<String>,
            p: PJson,
        }
        #[derive(Serialize)]
        #[serde(untagged)]
        enum PJson {
            Exact(String),
            Float(F64),
        }
        #[derive(Serialize)]
        struct DistJson<'a> {
            mode: Mode,
            parties: &'a [String],
            table: Vec<Entry>,
        }
        let table = self
            .table
            .iter()
            .map(|(k, p)| Entry {
                outcome: k.iter().map(|o| o.encode()).collect(),
                p: match p {
                    Prob::Exact(r) => PJson::Exact(jsonfmt::format_ratio(r)),
                    Prob::Float(x) => PJson::Float(F64(*x)),
                },
            })
            .collect();
        serde_json::to_string(&DistJson {
            mode: self.mode,
            parties: &self.parties,
            table,
        })
        .expect("distribution serializes")
    }

    /// Parse a table against a network (party names must match the network's
    /// declaration order).
    pub fn from_json(text: &str, net: &Network) -> Result<Distribution> {
        #[derive(Deserialize)]
        struct Entry {
            outcome: Vec<String>,
            p: serde_json::Value,
        }
        #[derive(Deserialize)]
        struct DistJson {
            mode: Mode,
            parties: Vec<String>,
            table: Vec<Entry>,
        }
        let raw: DistJson = serde_json::from_str(text)?;
        let names: Vec<String> = net.parties.iter().map(|p| p.name.clone()).collect();
        if raw.parties != names {
            return Err(Error::AlphabetMismatch(
                "party list does not match the network".into(),
            ));
        }
        let view_sizes: Vec<usize> = net.parties.iter().map(|p| p.view.len()).collect();
        match raw.mode {
            Mode::Exact => {
                let mut table = BTreeMap::new();
                for e in raw.table {
                    let key = decode_tuple(&e.outcome, &view_sizes, net.colors)?;
                    let p = match &e.p {
                        serde_json::Value::String(s) => jsonfmt::parse_ratio(s)?,
                        other => {
                            return Err(Error::InvalidDistribution(format!(
                                "exact-mode probability must be a string, got {other}"
                            )))
                        }
                    };
                    table.insert(key, p);
                }
                Distribution::from_exact(net, table)
            }
            Mode::Float => {
                let mut table = BTreeMap::new();
                for e in raw.table {
                    let key = decode_tuple(&e.outcome, &view_sizes, net.colors)?;
                    let p = e.p.as_f64().ok_or_else(|| {
                        Error::InvalidDistribution("float-mode probability must be a number".into())
                    })?;
                    table.insert(key, p);
                }
                Distribution::from_float(net, table)
            }
        }
    }
}

fn decode_tuple(texts: &[String], view_sizes: &[usize], colors: Color) -> Result<Vec<Outcome>> {
    if texts.len() != view_sizes.len() {
        return Err(Error::InvalidDistribution(format!(
            "outcome tuple of length {} for {} parties",
            texts.len(),
            view_sizes.len()
        )));
    }
    texts
        .iter()
        .zip(view_sizes)
        .map(|(t, &vs)| Outcome::decode(t, vs, colors))
        .collect()
}
