//! Shared helpers for the pipeline benchmarks.

use netcert_core::{CmPipeline, Network, RefinementUnitary, TupleSet};

pub fn fig1() -> (Network, TupleSet) {
    (netcert_core::fig1_network(), TupleSet::fig1())
}

pub fn fig1_pipeline() -> CmPipeline {
    let (net, tuples) = fig1();
    CmPipeline::new(&net, &tuples).expect("fig1 pipeline builds")
}

/// A fixed infeasible refinement: the real rotation pair that sits inside
/// the certifiable region.
pub fn infeasible_refinements(net: &Network) -> Vec<RefinementUnitary> {
    use num_complex::Complex64;
    let z = |x: f64| Complex64::new(x, 0.0);
    let (a, b) = (1.2f64, 1.05f64);
    let g01 = [
        [z(a.cos()), z(-a.sin()), z(0.0)],
        [z(a.sin()), z(a.cos()), z(0.0)],
        [z(0.0), z(0.0), z(1.0)],
    ];
    let g12 = [
        [z(1.0), z(0.0), z(0.0)],
        [z(0.0), z(b.cos()), z(-b.sin())],
        [z(0.0), z(b.sin()), z(b.cos())],
    ];
    let mut m = vec![vec![z(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                m[i][j] += g01[i][k] * g12[k][j];
            }
        }
    }
    net.parties
        .iter()
        .map(|p| RefinementUnitary {
            party: p.name.clone(),
            matrix: m.clone(),
        })
        .collect()
}
