//! Command-line front end for the exclusion-process laboratory.
//!
//! Every run prints (or writes) one machine-readable document carrying the
//! full manifest of the run, the result payload, and tool metadata. Results
//! are bit-identical for a fixed (subcommand, parameters, seed) regardless
//! of the thread count.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use asep_core::engine::EngineParams;
use asep_core::estimators::{
    estimate_coexistence, estimate_collision, estimate_neighbor_density, estimate_scaled_distance,
    estimate_separation, estimate_speed_law,
};
use asep_core::growth::{check_correspondence, WeightGrid};
use asep_core::hydro::{current_derivative_check, empirical_profile};
use asep_core::multitype::{estimate_joint_speeds, estimate_overtake, estimate_overtake_direct};
use asep_core::oracles::{check_discrepancy_equivalence, check_two_discrepancy_equivalence};

#[derive(Parser)]
#[command(
    name = "asep-lab",
    version,
    about = "Monte Carlo laboratory for exclusion processes in the rarefaction fan"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed for the replica streams
    #[arg(long, global = true, env = "ASEP_LAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output path (stdout when omitted)
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Route {
    Pattern,
    Direct,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Probability that two tagged particles ever collide
    Collision {
        /// Right-jump rate, in (1/2, 1]
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Initial distance between the tagged particles
        #[arg(long, default_value_t = 1)]
        m: u32,
        /// Censoring horizon
        #[arg(long = "t-max", default_value_t = 500.0)]
        t_max: f64,
        #[arg(long, default_value_t = 20000)]
        reps: u64,
        /// Opt-in heuristic: abandon a replica once the pair is separated
        /// this deep inside the fan (biases the estimate down)
        #[arg(long)]
        early_stop_gap: Option<i64>,
    },
    /// Scaled position of one tagged particle against the uniform law
    Speed {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 400.0)]
        t: f64,
        #[arg(long, default_value_t = 5000)]
        reps: u64,
    },
    /// Probability the pair is still apart and straddles r*t at time t
    Separation {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        r: f64,
        #[arg(long, default_value_t = 400.0)]
        t: f64,
        #[arg(long, default_value_t = 20000)]
        reps: u64,
    },
    /// Mean scaled distance of the surviving pair
    Distance {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 400.0)]
        t: f64,
        #[arg(long, default_value_t = 20000)]
        reps: u64,
    },
    /// Occupancies beside a lone tagged particle
    Neighbors {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 400.0)]
        t: f64,
        #[arg(long, default_value_t = 15000)]
        reps: u64,
    },
    /// Probability that particle 0 overtakes its m right neighbours
    Overtake {
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long = "t-max", default_value_t = 500.0)]
        t_max: f64,
        #[arg(long, default_value_t = 20000)]
        reps: u64,
        /// Measure via the two-tag pattern, the direct multi-type system,
        /// or both with an agreement report
        #[arg(long, value_enum, default_value_t = Route::Pattern)]
        route: Route,
    },
    /// Joint law of neighbouring multi-type speeds
    JointSpeeds {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        r: f64,
        #[arg(long, default_value_t = 400.0)]
        t: f64,
        #[arg(long, default_value_t = 6000)]
        reps: u64,
    },
    /// Red-cluster survival in the three-seed growth model
    Growth {
        /// Grid edge (truncation size)
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 3000)]
        reps: u64,
    },
    /// Empirical density profile across the fan
    HydroProfile {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 200.0)]
        t: f64,
        /// Sample speeds (repeatable)
        #[arg(long = "r", num_args = 1.., allow_negative_numbers = true, default_values_t = vec![-0.75, -0.25, 0.0, 0.25, 0.75])]
        r: Vec<f64>,
        #[arg(long, default_value_t = 10000)]
        reps: u64,
    },
    /// Finite-difference check of the weighted-current growth rate
    CurrentCheck {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        r: f64,
        #[arg(long, default_value_t = 400.0)]
        t: f64,
        #[arg(long, default_value_t = 5000)]
        reps: u64,
    },
    /// Deterministic exact cross-checks; exits nonzero on any mismatch
    Oracle {
        /// Weight grids for the growth/particle correspondence
        #[arg(long, default_value_t = 100)]
        grids: u32,
        /// Short event streams for the discrepancy equivalences
        #[arg(long, default_value_t = 100)]
        streams: u32,
    },
}

#[derive(Serialize)]
struct Manifest {
    subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    early_stop_gap: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    route: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grids: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    streams: Option<u32>,
    seed: u64,
    threads: usize,
    format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    /// Parameters that came from built-in defaults rather than the command
    /// line or the environment.
    defaulted: Vec<String>,
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = Cli::from_arg_matches(&matches).expect("parsed matches");
    match run(cli, &matches) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run(cli: Cli, matches: &ArgMatches) -> anyhow::Result<ExitCode> {
    // parameter-range validation is a usage error, like unknown flags
    if let Some(msg) = validate(&cli.command) {
        return Ok(usage_error(&msg));
    }
    if cli.format == Format::Csv && !matches!(cli.command, Command::HydroProfile { .. }) {
        return Ok(usage_error(
            "--format csv is only available for hydro-profile",
        ));
    }
    let threads = cli.threads.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let manifest = build_manifest(&cli, matches, threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;
    let started = Instant::now();
    let outcome = pool.install(|| dispatch(&cli.command, cli.seed))?;
    let duration = started.elapsed().as_secs_f64();

    let rendered = match cli.format {
        Format::Json => {
            let doc = json!({
                "manifest": manifest,
                "result": outcome.result,
                "meta": {
                    "version": env!("CARGO_PKG_VERSION"),
                    "duration_s": duration,
                },
            });
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            text
        }
        Format::Csv => outcome.csv.expect("csv availability checked above"),
    };
    match &cli.output {
        Some(path) => {
            std::fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(rendered.as_bytes())?,
    }
    Ok(if outcome.failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn validate(command: &Command) -> Option<String> {
    let check_p = |p: f64| {
        if p > 0.5 && p <= 1.0 {
            None
        } else {
            Some(format!("--p {p} outside (1/2, 1]"))
        }
    };
    match command {
        Command::Collision { p, m, t_max, .. } => check_p(*p)
            .or_else(|| (*m < 1).then(|| "--m must be at least 1".to_string()))
            .or_else(|| (*t_max <= 0.0).then(|| "--t-max must be positive".to_string())),
        Command::Speed { p, t, .. } => {
            check_p(*p).or_else(|| (*t <= 0.0).then(|| "--t must be positive".to_string()))
        }
        Command::Separation { p, r, t, .. } => check_p(*p)
            .or_else(|| {
                let d = 2.0 * *p - 1.0;
                (r.abs() > d).then(|| format!("--r {r} outside the fan [-{d}, {d}]"))
            })
            .or_else(|| (*t <= 0.0).then(|| "--t must be positive".to_string())),
        Command::Distance { p, t, .. } | Command::Neighbors { p, t, .. } => {
            check_p(*p).or_else(|| (*t <= 0.0).then(|| "--t must be positive".to_string()))
        }
        Command::Overtake { m, t_max, .. } => (*m < 1)
            .then(|| "--m must be at least 1".to_string())
            .or_else(|| (*t_max <= 0.0).then(|| "--t-max must be positive".to_string())),
        Command::JointSpeeds { r, t, .. } => (!(-1.0..=1.0).contains(r))
            .then(|| format!("--r {r} outside [-1, 1]"))
            .or_else(|| (*t <= 0.0).then(|| "--t must be positive".to_string())),
        Command::Growth { n, .. } => (*n < 50).then(|| "--n must be at least 50".to_string()),
        Command::HydroProfile { p, t, .. } | Command::CurrentCheck { p, t, .. } => {
            check_p(*p).or_else(|| (*t <= 0.0).then(|| "--t must be positive".to_string()))
        }
        Command::Oracle { .. } => None,
    }
}

fn build_manifest(cli: &Cli, matches: &ArgMatches, threads: usize) -> Manifest {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let mut defaulted: Vec<String> = Vec::new();
    {
        let mut mark = |m: &ArgMatches, id: &str| {
            if m.try_get_raw(id).is_ok() && m.value_source(id) == Some(ValueSource::DefaultValue) {
                defaulted.push(id.replace('_', "-"));
            }
        };
        for id in [
            "p", "m", "r", "t", "t_max", "n", "reps", "route", "grids", "streams",
        ] {
            mark(sub, id);
        }
        mark(sub, "seed");
        mark(sub, "format");
    }
    if cli.threads.is_none() {
        defaulted.push("threads".into());
    }

    let mut man = Manifest {
        subcommand: name.to_string(),
        p: None,
        m: None,
        r: None,
        r_list: None,
        t: None,
        t_max: None,
        n: None,
        reps: None,
        early_stop_gap: None,
        route: None,
        grids: None,
        streams: None,
        seed: cli.seed,
        threads,
        format: match cli.format {
            Format::Json => "json".into(),
            Format::Csv => "csv".into(),
        },
        output: cli.output.as_ref().map(|p| p.display().to_string()),
        defaulted,
    };
    match &cli.command {
        Command::Collision {
            p,
            m,
            t_max,
            reps,
            early_stop_gap,
        } => {
            man.p = Some(*p);
            man.m = Some(*m);
            man.t_max = Some(*t_max);
            man.reps = Some(*reps);
            man.early_stop_gap = *early_stop_gap;
        }
        Command::Speed { p, t, reps } => {
            man.p = Some(*p);
            man.t = Some(*t);
            man.reps = Some(*reps);
        }
        Command::Separation { p, r, t, reps } => {
            man.p = Some(*p);
            man.r = Some(*r);
            man.t = Some(*t);
            man.reps = Some(*reps);
        }
        Command::Distance { p, t, reps } | Command::Neighbors { p, t, reps } => {
            man.p = Some(*p);
            man.t = Some(*t);
            man.reps = Some(*reps);
        }
        Command::Overtake {
            m,
            t_max,
            reps,
            route,
        } => {
            man.m = Some(*m);
            man.t_max = Some(*t_max);
            man.reps = Some(*reps);
            man.route = Some(
                match route {
                    Route::Pattern => "pattern",
                    Route::Direct => "direct",
                    Route::Both => "both",
                }
                .to_string(),
            );
        }
        Command::JointSpeeds { r, t, reps } => {
            man.r = Some(*r);
            man.t = Some(*t);
            man.reps = Some(*reps);
        }
        Command::Growth { n, reps } => {
            man.n = Some(*n);
            man.reps = Some(*reps);
        }
        Command::HydroProfile { p, t, r, reps } => {
            man.p = Some(*p);
            man.t = Some(*t);
            man.r_list = Some(r.clone());
            man.reps = Some(*reps);
        }
        Command::CurrentCheck { p, r, t, reps } => {
            man.p = Some(*p);
            man.r = Some(*r);
            man.t = Some(*t);
            man.reps = Some(*reps);
        }
        Command::Oracle { grids, streams } => {
            man.grids = Some(*grids);
            man.streams = Some(*streams);
        }
    }
    man
}

struct Outcome {
    result: Value,
    csv: Option<String>,
    failed: bool,
}

impl Outcome {
    fn ok(result: Value) -> Outcome {
        Outcome {
            result,
            csv: None,
            failed: false,
        }
    }
}

/// The result payload of single-estimate experiments always carries the
/// `target` and `censoring` keys, null when absent.
fn normalized_summary<T: Serialize>(summary: &T) -> Value {
    let mut v = serde_json::to_value(summary).expect("summary serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.entry("target").or_insert(Value::Null);
        obj.entry("censoring").or_insert(Value::Null);
    }
    v
}

fn dispatch(command: &Command, seed: u64) -> anyhow::Result<Outcome> {
    match command {
        Command::Collision {
            p,
            m,
            t_max,
            reps,
            early_stop_gap,
        } => {
            let params = EngineParams::new(*p)?;
            let summary = estimate_collision(params, *m, *t_max, *reps, seed, *early_stop_gap)?;
            Ok(Outcome::ok(normalized_summary(&summary)))
        }
        Command::Speed { p, t, reps } => {
            let params = EngineParams::new(*p)?;
            let report = estimate_speed_law(params, *t, *reps, seed)?;
            let d = params.drift();
            Ok(Outcome::ok(json!({
                "ks_distance": report.ks_distance,
                "uniform_support": [-d, d],
                "mean": report.mean,
                "min": report.min,
                "max": report.max,
                "n_reps": reps,
            })))
        }
        Command::Separation { p, r, t, reps } => {
            let params = EngineParams::new(*p)?;
            let summary = estimate_separation(params, *r, *t, *reps, seed)?;
            Ok(Outcome::ok(normalized_summary(&summary)))
        }
        Command::Distance { p, t, reps } => {
            let params = EngineParams::new(*p)?;
            let summary = estimate_scaled_distance(params, *t, *reps, seed)?;
            Ok(Outcome::ok(normalized_summary(&summary)))
        }
        Command::Neighbors { p, t, reps } => {
            let params = EngineParams::new(*p)?;
            let report = estimate_neighbor_density(params, *t, *reps, seed)?;
            Ok(Outcome::ok(json!({
                "left": normalized_summary(&report.left),
                "right": normalized_summary(&report.right),
                "sum": { "estimate": report.sum_estimate, "stderr": report.sum_stderr },
            })))
        }
        Command::Overtake {
            m,
            t_max,
            reps,
            route,
        } => {
            let result = match route {
                Route::Pattern => normalized_summary(&estimate_overtake(*m, *t_max, *reps, seed)?),
                Route::Direct => {
                    normalized_summary(&estimate_overtake_direct(*m, *t_max, *reps, seed)?)
                }
                Route::Both => {
                    let pattern = estimate_overtake(*m, *t_max, *reps, seed)?;
                    let direct = estimate_overtake_direct(*m, *t_max, *reps, seed.wrapping_add(1))?;
                    let diff = pattern.estimate - direct.estimate;
                    let combined = (pattern.stderr.powi(2) + direct.stderr.powi(2)).sqrt();
                    json!({
                        "pattern": normalized_summary(&pattern),
                        "direct": normalized_summary(&direct),
                        "agreement": {
                            "difference": diff,
                            "combined_stderr": combined,
                            "within_3_sigma": diff.abs() <= 3.0 * combined,
                        },
                    })
                }
            };
            Ok(Outcome::ok(result))
        }
        Command::JointSpeeds { r, t, reps } => {
            let summary = estimate_joint_speeds(*r, *t, *reps, seed)?;
            Ok(Outcome::ok(normalized_summary(&summary)))
        }
        Command::Growth { n, reps } => {
            let report = estimate_coexistence(*n, *reps, seed)?;
            Ok(Outcome::ok(json!({
                "alive": normalized_summary(&report.alive),
                "conditional_alive": normalized_summary(&report.conditional_alive),
                "first_center": normalized_summary(&report.first_center),
            })))
        }
        Command::HydroProfile { p, t, r, reps } => {
            let params = EngineParams::new(*p)?;
            let points = empirical_profile(params, *t, r, *reps, seed)?;
            let mut csv = String::from("r,empirical,target,stderr\n");
            for pt in &points {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    pt.r, pt.empirical, pt.target, pt.stderr
                ));
            }
            Ok(Outcome {
                result: json!({ "points": points }),
                csv: Some(csv),
                failed: false,
            })
        }
        Command::CurrentCheck { p, r, t, reps } => {
            let params = EngineParams::new(*p)?;
            let check = current_derivative_check(params, *r, *t, *reps, seed)?;
            Ok(Outcome::ok(serde_json::to_value(check)?))
        }
        Command::Oracle { grids, streams } => Ok(run_oracle(*grids, *streams)),
    }
}

/// Deterministic cross-checks with fixed internal seeds; independent of the
/// --seed flag by design, so the outcome is stable everywhere.
fn run_oracle(grids: u32, streams: u32) -> Outcome {
    const GRID_MASTER: u64 = 0x0a5e_9b1d_c0de_0001;
    let seed_sets: [&[(u32, u32)]; 3] = [&[], &[(1, 1)], &[(1, 1), (1, 2), (2, 1)]];
    let mut failures: Vec<String> = Vec::new();
    for i in 0..grids {
        let n = 3 + (i as usize % 28);
        let seeds = seed_sets[i as usize % 3];
        match WeightGrid::exponential(n, GRID_MASTER, i as u64) {
            Ok(w) => {
                if let Err(err) = check_correspondence(&w, seeds) {
                    failures.push(format!("grid {i} (n={n}, seeds={seeds:?}): {err}"));
                }
            }
            Err(err) => failures.push(format!("grid {i}: {err}")),
        }
    }
    let rates = [1.0, 0.75, 0.9];
    for i in 0..streams {
        let params = EngineParams::new(rates[i as usize % rates.len()]).expect("valid rates");
        let seed = 0x0bad_5eed_0000 + i as u64;
        let outcome = if i % 2 == 0 {
            check_discrepancy_equivalence(params, 50.0, seed)
        } else {
            check_two_discrepancy_equivalence(params, 50.0, seed)
        };
        if let Err(err) = outcome {
            failures.push(format!("stream {i}: {err}"));
        }
    }
    let failed = !failures.is_empty();
    Outcome {
        result: json!({
            "grids_checked": grids,
            "streams_checked": streams,
            "failures": failures,
        }),
        csv: None,
        failed,
    }
}
