//! Seeded search over refinement unitaries for a certifiably infeasible
//! hidden-variable program.
//!
//! Random points in the unitary group overwhelmingly yield feasible
//! programs; the infeasible region is reached reliably from real orthogonal
//! starting points, so restarts alternate between real-only and fully
//! complex parameter draws. Moves are accepted only on margin improvement,
//! which keeps the accepted-move margin sequence monotone; the perturbation
//! scale follows a decreasing schedule. The generator is ChaCha8 (one stream
//! per restart), so trajectories reproduce bit-exactly across platforms.

use crate::classical::TupleSet;
use crate::error::Error;
use crate::lp::DEFAULT_LP_TOL;
use crate::net::{check_ecs, solve_pfis, Network};
use crate::quantum::gram_schmidt_columns;
use crate::quantum::RefinementUnitary;
use crate::rigidity::{CertifyOutcome, CertifyResult, CmPipeline};
use crate::Result;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Hill-climbing iterations per restart.
    pub iterations: usize,
    /// Perturbation scales, positive and non-increasing; spread evenly over
    /// the iterations.
    pub scales: Vec<f64>,
    pub stop_on_first_certificate: bool,
    /// Wall-clock budget in seconds.
    pub time_budget_secs: Option<f64>,
    /// Margin tolerance; also the trigger for certificate extraction.
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 1,
            restarts: 12,
            iterations: 40,
            scales: vec![0.3, 0.1, 0.03],
            stop_on_first_certificate: true,
            time_budget_secs: None,
            tol: DEFAULT_LP_TOL,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.restarts == 0 {
            return Err(Error::Preconditions(
                "search needs at least one restart and one iteration".into(),
            ));
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::Preconditions(
                "perturbation scales must be positive".into(),
            ));
        }
        if self.scales.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Preconditions(
                "perturbation scales must be non-increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Interpret `params` (length `2 d^2`, row-major re/im pairs) as a complex
/// matrix and orthonormalize its columns by Gram–Schmidt. Rank-deficient
/// inputs are signaled so the caller can re-draw.
pub fn parametrize_unitary(params: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let d2 = params.len() / 2;
    let d = (d2 as f64).sqrt().round() as usize;
    if 2 * d * d != params.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * d * d,
            got: params.len(),
        });
    }
    let matrix: Vec<Vec<Complex64>> = (0..d)
        .map(|r| {
            (0..d)
                .map(|c| {
                    let k = 2 * (r * d + c);
                    Complex64::new(params[k], params[k + 1])
                })
                .collect()
        })
        .collect();
    gram_schmidt_columns(&matrix)
}

/// Run the full pipeline (Born, r-values, program assembly) and return its
/// phase-1 margin; zero within tolerance means feasible.
pub fn infeasibility_margin(
    net: &Network,
    tuples: &TupleSet,
    refinements: &[RefinementUnitary],
) -> Result<f64> {
    CmPipeline::new(net, tuples)?.margin(refinements)
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryPoint {
    pub restart: usize,
    pub iteration: usize,
    pub scale: f64,
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub seed: u64,
    pub best_restart: usize,
    pub best_margin: f64,
    pub best_refinements: Vec<RefinementUnitary>,
    /// Final certification of the best candidate.
    pub outcome: CertifyOutcome,
    /// Accepted moves, in order.
    pub trajectory: Vec<TrajectoryPoint>,
    pub evaluations: usize,
    pub wall_clock_secs: f64,
}

struct Candidate {
    params: Vec<Vec<f64>>,
    refinements: Vec<RefinementUnitary>,
}

fn draw_candidate(
    rng: &mut ChaCha8Rng,
    names: &[String],
    dims: &[usize],
    real_only: bool,
) -> Candidate {
    loop {
        let params: Vec<Vec<f64>> = dims
            .iter()
            .map(|&d| {
                (0..2 * d * d)
                    .map(|k| {
                        if real_only && k % 2 == 1 {
                            0.0
                        } else {
                            rng.gen_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        if let Some(c) = candidate_from_params(params, names) {
            return c;
        }
    }
}

fn candidate_from_params(params: Vec<Vec<f64>>, names: &[String]) -> Option<Candidate> {
    let mut refinements = Vec::with_capacity(params.len());
    for (p, name) in params.iter().zip(names) {
        match parametrize_unitary(p) {
            Ok(matrix) => refinements.push(RefinementUnitary {
                party: name.clone(),
                matrix,
            }),
            Err(_) => return None,
        }
    }
    Some(Candidate {
        params,
        refinements,
    })
}

/// Search for refinement unitaries whose program is certifiably infeasible.
/// `progress` receives every accepted move. Deterministic given the config.
pub fn search_nonlocal(
    net: &Network,
    tuples: &TupleSet,
    config: &SearchConfig,
    progress: &mut dyn FnMut(&TrajectoryPoint),
) -> Result<SearchReport> {
    config.validate()?;
    let ecs = check_ecs(net)?;
    if !ecs.holds {
        return Err(Error::Preconditions(
            "not an ECS network: some source has no exclusive party pair, so the rigidity \
             argument does not apply"
                .into(),
        ));
    }
    if solve_pfis(net)?.is_none() {
        return Err(Error::Preconditions(
            "network admits no PFIS: the rigidity argument does not apply".into(),
        ));
    }
    let pipeline = CmPipeline::new(net, tuples)?;
    let names: Vec<String> = net.parties.iter().map(|p| p.name.clone()).collect();
    let dims: Vec<usize> = (0..net.num_parties())
        .map(|p| pipeline.index().ambiguous_dim(p))
        .collect();

    let started = Instant::now();
    let out_of_time =
        |started: &Instant| match config.time_budget_secs {
            Some(budget) => started.elapsed().as_secs_f64() >= budget,
            None => false,
        };

    let mut best: Option<(f64, usize, Candidate)> = None;
    let mut trajectory = Vec::new();
    let mut evaluations = 0usize;
    let mut early: Option<(usize, Candidate, CertifyOutcome)> = None;

    'restarts: for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        // even restarts draw real orthogonal points, odd ones fully complex
        let real_only = restart % 2 == 0;
        let mut current = draw_candidate(&mut rng, &names, &dims, real_only);
        let mut current_margin = pipeline.margin(&current.refinements)?;
        evaluations += 1;
        let point = TrajectoryPoint {
            restart,
            iteration: 0,
            scale: config.scales[0],
            margin: current_margin,
        };
        progress(&point);
        trajectory.push(point);

        for iteration in 1..=config.iterations {
            if out_of_time(&started) {
                break 'restarts;
            }
            let scale =
                config.scales[(iteration - 1) * config.scales.len() / config.iterations];
            let params: Vec<Vec<f64>> = current
                .params
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|&x| x + scale * rng.gen_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            let Some(candidate) = candidate_from_params(params, &names) else {
                continue;
            };
            let margin = pipeline.margin(&candidate.refinements)?;
            evaluations += 1;
            if margin > current_margin {
                current = candidate;
                current_margin = margin;
                let point = TrajectoryPoint {
                    restart,
                    iteration,
                    scale,
                    margin,
                };
                progress(&point);
                trajectory.push(point);
                if config.stop_on_first_certificate && margin > config.tol {
                    let outcome = pipeline.certify(&current.refinements, config.tol)?;
                    if outcome.result == CertifyResult::NonlocalCertified {
                        early = Some((restart, current, outcome));
                        break 'restarts;
                    }
                }
            }
        }

        let better = match &best {
            None => true,
            Some((margin, _, _)) => current_margin > *margin,
        };
        if better {
            best = Some((current_margin, restart, current));
        }
    }

    let (best_margin, best_restart, best_candidate, outcome) = match early {
        Some((restart, candidate, outcome)) => (outcome.margin, restart, candidate, outcome),
        None => {
            let (margin, restart, candidate) =
                best.expect("at least one restart ran to completion");
            let outcome = pipeline.certify(&candidate.refinements, config.tol)?;
            (margin, restart, candidate, outcome)
        }
    };
    Ok(SearchReport {
        seed: config.seed,
        best_restart,
        best_margin,
        best_refinements: best_candidate.refinements,
        outcome,
        trajectory,
        evaluations,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
