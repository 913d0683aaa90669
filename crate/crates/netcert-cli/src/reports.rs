//! Report schemas. Every report embeds its run manifest; all floats are
//! written with 17 significant digits and every map is ordered, so reruns
//! with identical inputs and seeds are byte-identical.

use netcert_core::jsonfmt::F64;
use netcert_core::lp::RowTag;
use netcert_core::rigidity::{CertifyOutcome, CertifyResult};
use netcert_core::VerifyMode;
use serde::Serialize;
use serde_json::value::RawValue;
use std::collections::BTreeMap;

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub inputs: BTreeMap<String, InputDigest>,
    pub config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            config: BTreeMap::new(),
            wall_clock_ms: None,
        }
    }

    pub fn input(&mut self, label: &str, path: &str, bytes: &[u8]) {
        use sha2::Digest;
        let digest = sha2::Sha256::digest(bytes);
        self.inputs.insert(
            label.to_string(),
            InputDigest {
                path: path.to_string(),
                sha256: hex::encode(digest),
            },
        );
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }
}

#[derive(Serialize)]
pub struct RefusalReport {
    pub manifest: Manifest,
    pub result: &'static str,
    pub reason: String,
}

#[derive(Serialize)]
pub struct ValidateReport {
    pub manifest: Manifest,
    pub valid: bool,
    pub violations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ecs: Option<EcsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pfis: Option<PfisJson>,
}

#[derive(Serialize)]
pub struct EcsJson {
    pub holds: bool,
    pub witnesses: Vec<WitnessJson>,
}

#[derive(Serialize)]
pub struct WitnessJson {
    pub source: String,
    pub pair: Option<(String, String)>,
}

#[derive(Serialize)]
pub struct PfisJson {
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, String>>,
}

#[derive(Serialize)]
pub struct DistributionReport {
    pub manifest: Manifest,
    pub distribution: Box<RawValue>,
}

#[derive(Serialize)]
pub struct PatternsReport {
    pub manifest: Manifest,
    pub count: usize,
    pub patterns: Vec<Vec<u32>>,
}

#[derive(Serialize)]
pub struct FinnerReportJson {
    pub manifest: Manifest,
    pub weights: BTreeMap<String, String>,
    pub tol: F64,
    pub violations: Vec<FinnerEntryJson>,
    pub equalities: Vec<Vec<String>>,
    pub max_ratio: F64,
}

#[derive(Serialize)]
pub struct FinnerEntryJson {
    pub outcome: Vec<String>,
    pub lhs: F64,
    pub rhs: F64,
}

#[derive(Serialize)]
pub struct LpStatsJson {
    pub rows: usize,
    pub cols: usize,
    pub tags: BTreeMap<String, usize>,
}

pub fn lp_stats(rows: usize, cols: usize, tags: &BTreeMap<RowTag, usize>) -> LpStatsJson {
    let tag_name = |t: &RowTag| match t {
        RowTag::BlockMarginal => "block-marginal",
        RowTag::PartyPattern => "party-pattern",
        RowTag::Normalization => "normalization",
        RowTag::Custom => "custom",
    };
    LpStatsJson {
        rows,
        cols,
        tags: tags
            .iter()
            .map(|(t, c)| (tag_name(t).to_string(), *c))
            .collect(),
    }
}

#[derive(Serialize)]
pub struct CertifyReport {
    pub manifest: Manifest,
    pub result: &'static str,
    pub margin: F64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<F64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<&'static str>,
    pub lp: LpStatsJson,
}

pub fn result_name(result: CertifyResult) -> &'static str {
    match result {
        CertifyResult::NonlocalCertified => "nonlocal-certified",
        CertifyResult::Inconclusive => "inconclusive",
        CertifyResult::Borderline => "borderline",
    }
}

pub fn verification_name(outcome: &CertifyOutcome) -> Option<&'static str> {
    match (outcome.result, outcome.verification) {
        (_, Some(VerifyMode::Exact)) => Some("exact"),
        (_, Some(VerifyMode::Interval)) => Some("interval"),
        (CertifyResult::Borderline, None) => Some("failed"),
        _ => None,
    }
}

pub fn certify_report(manifest: Manifest, outcome: &CertifyOutcome) -> CertifyReport {
    CertifyReport {
        manifest,
        result: result_name(outcome.result),
        margin: F64(outcome.margin),
        certificate: outcome
            .certificate
            .as_ref()
            .map(|c| c.y.iter().map(|&v| F64(v)).collect()),
        verification: verification_name(outcome),
        lp: lp_stats(outcome.lp_rows, outcome.lp_cols, &outcome.lp_tags),
    }
}

#[derive(Serialize)]
pub struct SearchReportJson {
    pub manifest: Manifest,
    pub seed: u64,
    pub result: &'static str,
    pub best: BestCandidateJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<F64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<&'static str>,
    pub lp: LpStatsJson,
    pub evaluations: usize,
    pub trajectory: Vec<TrajectoryPointJson>,
}

#[derive(Serialize)]
pub struct BestCandidateJson {
    pub margin: F64,
    pub restart: usize,
    pub refinements: Box<RawValue>,
}

#[derive(Serialize)]
pub struct TrajectoryPointJson {
    pub restart: usize,
    pub iteration: usize,
    pub scale: F64,
    pub margin: F64,
}

/// Keep at most `cap` trajectory points, preserving the first and last.
pub fn downsample<T: Clone>(points: &[T], cap: usize) -> Vec<T> {
    if points.len() <= cap || cap < 2 {
        return points.to_vec();
    }
    let last = points.len() - 1;
    let mut indices: Vec<usize> = (0..cap).map(|k| k * last / (cap - 1)).collect();
    indices.dedup();
    indices.into_iter().map(|i| points[i].clone()).collect()
}

pub fn render<T: Serialize>(report: &T) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}
