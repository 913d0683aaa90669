//! Input resolution: files or `builtin:` references, each digested into the
//! run manifest.

use crate::reports::Manifest;
use anyhow::{bail, Context, Result};
use netcert_core::{
    fig1_network, make_gm, make_kn, parallel_sources_network, refinements_from_json,
    CompatibilityIndex, Distribution, FinnerWeights, Network, RefinementUnitary, TupleSet,
};

pub fn load_network(reference: &str, manifest: &mut Manifest) -> Result<Network> {
    let net = match reference.strip_prefix("builtin:") {
        Some(name) => {
            let net = builtin_network(name)?;
            manifest.input("network", reference, net.to_json().as_bytes());
            net
        }
        None => {
            let text = std::fs::read_to_string(reference)
                .with_context(|| format!("reading network file {reference}"))?;
            manifest.input("network", reference, text.as_bytes());
            Network::from_json(&text).with_context(|| format!("parsing network {reference}"))?
        }
    };
    Ok(net)
}

fn builtin_network(name: &str) -> Result<Network> {
    if name == "fig1" {
        return Ok(fig1_network());
    }
    if name == "parallel-sources" {
        return Ok(parallel_sources_network());
    }
    if let Some(n) = name.strip_prefix('k') {
        let n: usize = n.parse().context("builtin network k<N>")?;
        return Ok(make_kn(n)?);
    }
    if let Some(m) = name.strip_prefix('g') {
        let m: usize = m.parse().context("builtin network g<M>")?;
        return Ok(make_gm(m)?);
    }
    bail!("unknown builtin network {name:?} (try fig1, parallel-sources, k<N>, g<M>)")
}

pub fn load_tuples(reference: &str, net: &Network, manifest: &mut Manifest) -> Result<TupleSet> {
    let tuples = match reference.strip_prefix("builtin:") {
        Some("fig1") => TupleSet::fig1(),
        Some("constant") => TupleSet::constants(net.num_sources(), net.colors),
        Some(other) => bail!("unknown builtin tuple set {other:?} (try fig1, constant)"),
        None => {
            let text = std::fs::read_to_string(reference)
                .with_context(|| format!("reading tuple set {reference}"))?;
            manifest.input("tuples", reference, text.as_bytes());
            TupleSet::from_json(&text)?
        }
    };
    if reference.starts_with("builtin:") {
        manifest.input("tuples", reference, tuples.to_json().as_bytes());
    }
    tuples.validate_for(net)?;
    Ok(tuples)
}

/// `identity`, a refinement JSON file (object or array), or a search report
/// containing `best.refinements`.
pub fn load_refinements(
    reference: &str,
    net: &Network,
    tuples: &TupleSet,
    manifest: &mut Manifest,
) -> Result<Vec<RefinementUnitary>> {
    if reference == "identity" {
        let index = CompatibilityIndex::new(net, tuples)?;
        let refinements: Vec<RefinementUnitary> = (0..net.num_parties())
            .map(|p| {
                RefinementUnitary::identity(&net.parties[p].name, index.ambiguous_dim(p))
            })
            .collect();
        manifest.input(
            "refinement",
            "identity",
            netcert_core::refinements_to_json(&refinements).as_bytes(),
        );
        return Ok(refinements);
    }
    let text = std::fs::read_to_string(reference)
        .with_context(|| format!("reading refinement {reference}"))?;
    manifest.input("refinement", reference, text.as_bytes());
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing refinement {reference}"))?;
    let payload = match value.pointer("/best/refinements") {
        Some(inner) => serde_json::to_string(inner)?,
        None => text,
    };
    Ok(refinements_from_json(&payload)?)
}

pub fn load_weights(
    reference: &str,
    manifest: &mut Manifest,
) -> Result<FinnerWeights> {
    let text = std::fs::read_to_string(reference)
        .with_context(|| format!("reading weights {reference}"))?;
    manifest.input("weights", reference, text.as_bytes());
    Ok(FinnerWeights::from_json(&text)?)
}

/// A bare distribution table or any report embedding one under
/// `distribution`.
pub fn load_distribution(
    reference: &str,
    net: &Network,
    manifest: &mut Manifest,
) -> Result<Distribution> {
    let text = std::fs::read_to_string(reference)
        .with_context(|| format!("reading distribution {reference}"))?;
    manifest.input("dist", reference, text.as_bytes());
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing distribution {reference}"))?;
    let payload = match value.get("distribution") {
        Some(inner) => serde_json::to_string(inner)?,
        None => text,
    };
    Ok(Distribution::from_json(&payload, net)?)
}
