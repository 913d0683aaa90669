//! `netcert`: validate networks, compute CM distributions, check Finner,
//! certify nonlocality, and search refinement unitaries. JSON in, JSON out.
//!
//! Exit codes encode process health, not scientific verdicts: 0 for any
//! completed run, 2 for I/O or schema failures, 3 for refused preconditions
//! (a structured refusal report is still written).

mod inputs;
mod reports;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netcert_core::jsonfmt::F64;
use netcert_core::{
    check_ecs, compute_pcolor, enumerate_hidden_patterns, finner_check, jsonfmt, solve_pfis,
    CmPipeline, CompatibilityIndex, Error as CoreError, RefinementChoice, SearchConfig,
    DEFAULT_FINNER_TOL, DEFAULT_LP_TOL,
};
use reports::{render, Manifest};
use serde_json::value::RawValue;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "netcert",
    version,
    about = "Color-matching network nonlocality engine",
    after_help = "Network references are file paths or builtin:fig1, builtin:parallel-sources, \
                  builtin:k<N>, builtin:g<M>. Tuple sets are files or builtin:fig1, \
                  builtin:constant. The CM_NETCERT_THREADS environment variable caps internal \
                  parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Network file or builtin reference.
    #[arg(long)]
    network: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock timing in the manifest (reports stop being
    /// byte-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Structural validation plus the ECS and PFIS preconditions.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Exact decohered CM distribution over the color outcomes.
    Pcolor {
        #[command(flatten)]
        common: Common,
        /// Tuple set file or builtin reference.
        #[arg(long)]
        tuples: String,
        /// Arithmetic of the emitted table.
        #[arg(long, default_value = "exact")]
        mode: ModeArg,
    },
    /// All-ambiguous hidden color patterns.
    Patterns {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuples: String,
    },
    /// Born distribution of the quantum CM strategy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuples: String,
        /// Refinement file, a search report, or `identity`; omit for the
        /// coarse strategy.
        #[arg(long)]
        refinement: Option<String>,
    },
    /// Finner inequality report for a distribution with PFIS weights.
    Finner {
        #[command(flatten)]
        common: Common,
        /// Distribution file (bare table or any report embedding one).
        #[arg(long, conflicts_with = "tuples")]
        dist: Option<String>,
        /// Compute the classical CM distribution from this tuple set
        /// instead of reading one.
        #[arg(long)]
        tuples: Option<String>,
        /// Weights file; defaults to an exact PFIS solution.
        #[arg(long)]
        weights: Option<String>,
        /// Relative ratio tolerance in float mode.
        #[arg(long, default_value_t = DEFAULT_FINNER_TOL)]
        tol: f64,
    },
    /// Solve the hidden-variable program and verify any infeasibility
    /// certificate.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuples: String,
        /// Refinement file, a search report, or `identity`.
        #[arg(long)]
        refinement: String,
        /// Margin tolerance.
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
    },
    /// Search refinement unitaries for a certifiable infeasibility.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuples: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Hill-climbing iterations per restart.
        #[arg(long, default_value_t = 40)]
        iters: usize,
        #[arg(long, default_value_t = 12)]
        restarts: usize,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        budget_seconds: Option<f64>,
        /// Margin threshold for certificate extraction.
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
        /// Keep searching after the first verified certificate.
        #[arg(long)]
        exhaustive: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Exact,
    Float,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing report {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Precondition-style core failures turn into refusal reports (exit 3);
/// everything else bubbles as a hard error (exit 2).
fn refusal_reason(err: &anyhow::Error) -> Option<String> {
    match err.downcast_ref::<CoreError>() {
        Some(
            e @ (CoreError::Preconditions(_)
            | CoreError::MissingRevealingEvent { .. }
            | CoreError::InvalidNetwork(_)),
        ) => Some(e.to_string()),
        _ => None,
    }
}

fn finish(
    mut manifest: Manifest,
    timings: bool,
    started: Instant,
    out: &Option<PathBuf>,
    body: Result<ExitCode, anyhow::Error>,
    render_ok: impl FnOnce(Manifest) -> String,
) -> Result<ExitCode> {
    if timings {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    match body {
        Ok(code) => {
            emit(out, &render_ok(manifest))?;
            Ok(code)
        }
        Err(err) => match refusal_reason(&err) {
            Some(reason) => {
                let report = reports::RefusalReport {
                    manifest,
                    result: "refused",
                    reason,
                };
                emit(out, &render(&report))?;
                Ok(ExitCode::from(3))
            }
            None => Err(err),
        },
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { common } => cmd_validate(common),
        Command::Pcolor {
            common,
            tuples,
            mode,
        } => cmd_pcolor(common, tuples, mode),
        Command::Patterns { common, tuples } => cmd_patterns(common, tuples),
        Command::Simulate {
            common,
            tuples,
            refinement,
        } => cmd_simulate(common, tuples, refinement),
        Command::Finner {
            common,
            dist,
            tuples,
            weights,
            tol,
        } => cmd_finner(common, dist, tuples, weights, tol),
        Command::Certify {
            common,
            tuples,
            refinement,
            tol,
        } => cmd_certify(common, tuples, refinement, tol),
        Command::Search {
            common,
            tuples,
            seed,
            iters,
            restarts,
            budget_seconds,
            tol,
            exhaustive,
        } => cmd_search(
            common,
            tuples,
            seed,
            iters,
            restarts,
            budget_seconds,
            tol,
            exhaustive,
        ),
    }
}

fn cmd_validate(common: Common) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("validate");
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let violations = net.validate();
    let valid = violations.is_empty();
    let (ecs, pfis) = if valid {
        let ecs = check_ecs(&net)?;
        let witnesses = net
            .sources
            .iter()
            .zip(&ecs.witnesses)
            .map(|(s, w)| reports::WitnessJson {
                source: s.name.clone(),
                pair: w.clone(),
            })
            .collect();
        let pfis = solve_pfis(&net)?;
        (
            Some(reports::EcsJson {
                holds: ecs.holds,
                witnesses,
            }),
            Some(reports::PfisJson {
                found: pfis.is_some(),
                weights: pfis.map(|w| {
                    w.delta
                        .iter()
                        .map(|(k, v)| (k.clone(), jsonfmt::format_ratio(v)))
                        .collect()
                }),
            }),
        )
    } else {
        (None, None)
    };
    if common.timings {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    let report = reports::ValidateReport {
        manifest,
        valid,
        violations,
        ecs,
        pfis,
    };
    emit(&common.out, &render(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_pcolor(common: Common, tuples: String, mode: ModeArg) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("pcolor");
    manifest.config(
        "mode",
        match mode {
            ModeArg::Exact => "exact",
            ModeArg::Float => "float",
        },
    );
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let t = inputs::load_tuples(&tuples, &net, &mut manifest)?;
    let d = compute_pcolor(&net, &t)?;
    let d = match mode {
        ModeArg::Exact => d,
        ModeArg::Float => d.to_float(),
    };
    let raw = RawValue::from_string(d.to_json())?;
    if common.timings {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    let report = reports::DistributionReport {
        manifest,
        distribution: raw,
    };
    emit(&common.out, &render(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_patterns(common: Common, tuples: String) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("patterns");
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let t = inputs::load_tuples(&tuples, &net, &mut manifest)?;
    let patterns = enumerate_hidden_patterns(&net, &t)?;
    if common.timings {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    let report = reports::PatternsReport {
        manifest,
        count: patterns.len(),
        patterns: patterns.patterns,
    };
    emit(&common.out, &render(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(common: Common, tuples: String, refinement: Option<String>) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("simulate");
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let t = inputs::load_tuples(&tuples, &net, &mut manifest)?;
    let d = match &refinement {
        None => {
            manifest.config("measurement", "coarse");
            let index = CompatibilityIndex::new(&net, &t)?;
            let state = netcert_core::cm_global_state(&net)?;
            let measurements: Vec<_> = (0..net.num_parties())
                .map(|p| {
                    netcert_core::build_cm_measurement(&net, p, &index, &RefinementChoice::Coarse)
                })
                .collect::<netcert_core::Result<_>>()?;
            netcert_core::born_distribution(&state, &measurements)?
        }
        Some(reference) => {
            manifest.config("measurement", "refined");
            let refinements = inputs::load_refinements(reference, &net, &t, &mut manifest)?;
            let pipeline = CmPipeline::new(&net, &t)?;
            pipeline.born(&refinements)?
        }
    };
    let raw = RawValue::from_string(d.to_json())?;
    if common.timings {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    let report = reports::DistributionReport {
        manifest,
        distribution: raw,
    };
    emit(&common.out, &render(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_finner(
    common: Common,
    dist: Option<String>,
    tuples: Option<String>,
    weights: Option<String>,
    tol: f64,
) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("finner");
    manifest.config("tol", jsonfmt::format_f64(tol));
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let d = match (&dist, &tuples) {
        (Some(reference), None) => inputs::load_distribution(reference, &net, &mut manifest)?,
        (None, Some(reference)) => {
            let t = inputs::load_tuples(reference, &net, &mut manifest)?;
            compute_pcolor(&net, &t)?
        }
        _ => bail!("finner needs exactly one of --dist or --tuples"),
    };
    let w = match &weights {
        Some(reference) => inputs::load_weights(reference, &mut manifest)?,
        None => solve_pfis(&net)?.ok_or(CoreError::Preconditions(
            "network admits no PFIS; pass --weights explicitly".into(),
        ))?,
    };
    let report = finner_check(&d, &net, &w, tol)?;
    if common.timings {
        manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    }
    let json = reports::FinnerReportJson {
        manifest,
        weights: w
            .delta
            .iter()
            .map(|(k, v)| (k.clone(), jsonfmt::format_ratio(v)))
            .collect(),
        tol: F64(tol),
        violations: report
            .violations
            .iter()
            .map(|v| reports::FinnerEntryJson {
                outcome: v.outcome.iter().map(|o| o.encode()).collect(),
                lhs: F64(v.lhs),
                rhs: F64(v.rhs),
            })
            .collect(),
        equalities: report
            .equalities
            .iter()
            .map(|key| key.iter().map(|o| o.encode()).collect())
            .collect(),
        max_ratio: F64(report.max_ratio),
    };
    emit(&common.out, &render(&json))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_certify(common: Common, tuples: String, refinement: String, tol: f64) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("certify");
    manifest.config("tol", jsonfmt::format_f64(tol));
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let t = inputs::load_tuples(&tuples, &net, &mut manifest)?;
    let refinements = inputs::load_refinements(&refinement, &net, &t, &mut manifest)?;

    let out = common.out.clone();
    let body = (|| -> Result<_> {
        let ecs = check_ecs(&net)?;
        if !ecs.holds {
            bail!(CoreError::Preconditions(
                "not an ECS network: some source has no exclusive party pair".into()
            ));
        }
        if solve_pfis(&net)?.is_none() {
            bail!(CoreError::Preconditions(
                "network admits no PFIS; the rigidity argument does not apply".into()
            ));
        }
        let pipeline = CmPipeline::new(&net, &t)?;
        pipeline.certify(&refinements, tol).map_err(Into::into)
    })();
    match body {
        Ok(outcome) => finish(
            manifest,
            common.timings,
            started,
            &out,
            Ok(ExitCode::SUCCESS),
            |manifest| render(&reports::certify_report(manifest, &outcome)),
        ),
        Err(err) => finish(
            manifest,
            common.timings,
            started,
            &out,
            Err(err),
            |_| unreachable!("render only on success"),
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    common: Common,
    tuples: String,
    seed: u64,
    iters: usize,
    restarts: usize,
    budget_seconds: Option<f64>,
    tol: f64,
    exhaustive: bool,
) -> Result<ExitCode> {
    let started = Instant::now();
    let mut manifest = Manifest::new("search");
    manifest.config("seed", seed);
    manifest.config("iters", iters);
    manifest.config("restarts", restarts);
    manifest.config("tol", jsonfmt::format_f64(tol));
    manifest.config("exhaustive", exhaustive);
    if let Some(b) = budget_seconds {
        manifest.config("budget_seconds", jsonfmt::format_f64(b));
    }
    let net = inputs::load_network(&common.network, &mut manifest)?;
    let t = inputs::load_tuples(&tuples, &net, &mut manifest)?;
    let config = SearchConfig {
        seed,
        restarts,
        iterations: iters,
        stop_on_first_certificate: !exhaustive,
        time_budget_secs: budget_seconds,
        tol,
        ..Default::default()
    };

    let out = common.out.clone();
    let body = netcert_core::search_nonlocal(&net, &t, &config, &mut |p| {
        // one JSON object per accepted move
        let line = serde_json::to_string(&reports::TrajectoryPointJson {
            restart: p.restart,
            iteration: p.iteration,
            scale: F64(p.scale),
            margin: F64(p.margin),
        })
        .expect("progress line serializes");
        eprintln!("{line}");
    })
    .map_err(anyhow::Error::from);

    match body {
        Ok(report) => finish(
            manifest,
            common.timings,
            started,
            &out,
            Ok(ExitCode::SUCCESS),
            |manifest| {
                let refinements_json =
                    netcert_core::refinements_to_json(&report.best_refinements);
                let trajectory: Vec<reports::TrajectoryPointJson> =
                    reports::downsample(&report.trajectory, 200)
                        .into_iter()
                        .map(|p| reports::TrajectoryPointJson {
                            restart: p.restart,
                            iteration: p.iteration,
                            scale: F64(p.scale),
                            margin: F64(p.margin),
                        })
                        .collect();
                let json = reports::SearchReportJson {
                    manifest,
                    seed: report.seed,
                    result: reports::result_name(report.outcome.result),
                    best: reports::BestCandidateJson {
                        margin: F64(report.best_margin),
                        restart: report.best_restart,
                        refinements: RawValue::from_string(refinements_json)
                            .expect("refinement JSON is valid"),
                    },
                    certificate: report
                        .outcome
                        .certificate
                        .as_ref()
                        .map(|c| c.y.iter().map(|&v| F64(v)).collect()),
                    verification: reports::verification_name(&report.outcome),
                    lp: reports::lp_stats(
                        report.outcome.lp_rows,
                        report.outcome.lp_cols,
                        &report.outcome.lp_tags,
                    ),
                    evaluations: report.evaluations,
                    trajectory,
                };
                render(&json)
            },
        ),
        Err(err) => finish(
            manifest,
            common.timings,
            started,
            &out,
            Err(err),
            |_| unreachable!("render only on success"),
        ),
    }
}

