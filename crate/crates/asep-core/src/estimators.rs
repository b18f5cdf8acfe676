//! Monte Carlo experiment harness: replica scheduling over seeded streams,
//! censored collision estimation, and summary statistics with reference
//! targets attached.
//!
//! Reproducibility contract: replica `k` draws only from the stream keyed
//! `(master seed, k)` and results are folded in replica order, so a summary
//! is a pure function of `(experiment, parameters, seed)` no matter how many
//! worker threads execute the replicas.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    replica_rng, run_single, BondEvent, Effect, EngineError, EngineParams, EventObserver,
};
use crate::growth::{
    compute_lpp, first_growth_cell, red_cluster_status, GrowthError, RedClusterStatus, WeightGrid,
};
use crate::lattice::{parse_pattern, Configuration, SiteState};
use crate::stats::{bernoulli_stderr, ks_statistic, mean_and_stderr};
use crate::trackers::{neighbor_occupancy, SecondClassTrack};

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error("gap parameter m must be >= 1")]
    BadGap,
    #[error("reference speed r={r} outside the fan [-{drift}, {drift}]")]
    SpeedOutOfRange { r: f64, drift: f64 },
    #[error("need at least two replicas")]
    TooFewReplicas,
}

/// How a reference target value is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Closed form for the measured event.
    Exact,
    /// Simulation-supported conjecture, not proven.
    Conjecture,
    /// Limit value; the finite-time estimate carries a bias that shrinks as
    /// the horizon grows.
    LimitAsTGrows,
}

/// Parameters echoed into every result document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid_n: Option<usize>,
    pub n_reps: u64,
    pub seed: u64,
}

/// Estimates of `P(tau <= T)` at a ladder of horizons on shared seeds; the
/// increments show how much probability the censoring tail still holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub horizons: Vec<f64>,
    pub estimates: Vec<f64>,
}

/// Point estimate with its uncertainty and the reference value it chases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub experiment: String,
    pub params: ExperimentParams,
    pub estimate: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub target: Option<f64>,
    pub target_kind: TargetKind,
    /// Fraction of replicas still uncollided at the horizon, for censored
    /// experiments.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub censoring: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truncation: Option<TruncationReport>,
}

impl EstimateSummary {
    pub fn bernoulli(
        experiment: &str,
        params: ExperimentParams,
        hits: usize,
        n: usize,
        target: Option<f64>,
        target_kind: TargetKind,
    ) -> EstimateSummary {
        let estimate = hits as f64 / n as f64;
        let stderr = bernoulli_stderr(estimate, n);
        EstimateSummary {
            experiment: experiment.to_string(),
            params,
            estimate,
            stderr,
            ci95: (estimate - 1.96 * stderr, estimate + 1.96 * stderr),
            target,
            target_kind,
            censoring: None,
            truncation: None,
        }
    }

    pub fn real_valued(
        experiment: &str,
        params: ExperimentParams,
        samples: &[f64],
        target: Option<f64>,
        target_kind: TargetKind,
    ) -> EstimateSummary {
        let (estimate, stderr) = mean_and_stderr(samples);
        EstimateSummary {
            experiment: experiment.to_string(),
            params,
            estimate,
            stderr,
            ci95: (estimate - 1.96 * stderr, estimate + 1.96 * stderr),
            target,
            target_kind,
            censoring: None,
            truncation: None,
        }
    }
}

/// Runs `n_reps` independent replicas, in parallel when a rayon pool is
/// available, preserving replica order in the output.
pub fn run_replicas<T: Send>(n_reps: u64, kernel: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n_reps).into_par_iter().map(kernel).collect()
}

/// Initial state with two tagged second-class particles `m` sites apart:
/// origin and site `m`, holes between them.
pub fn pair_pattern(m: u32) -> Result<Configuration, EstimatorError> {
    if m < 1 {
        return Err(EstimatorError::BadGap);
    }
    let mut body = String::from("*");
    for _ in 1..m {
        body.push('o');
    }
    body.push('*');
    Ok(parse_pattern(&format!("P* {body} H*")).expect("pair pattern is valid"))
}

/// Observer that tracks the tagged particles and stops at the collision.
/// With an early-stop gap set, it also abandons the replica once the pair
/// is separated and deep inside the fan; such replicas count as censored,
/// which biases the collision estimate down by a documented heuristic
/// amount. Off unless explicitly requested; acceptance runs never use it.
struct CollisionStopObserver {
    track: SecondClassTrack,
    early_stop_gap: Option<i64>,
}

impl EventObserver for CollisionStopObserver {
    #[inline(always)]
    fn on_event(
        &mut self,
        event: &BondEvent,
        pre_source: SiteState,
        pre_target: SiteState,
        effect: Effect,
    ) -> ControlFlow<()> {
        self.track
            .observe_event(event, pre_source, pre_target, effect);
        if self.track.is_collided() {
            return ControlFlow::Break(());
        }
        if let Some(gap) = self.early_stop_gap {
            if effect == Effect::Swapped {
                let pos = self.track.positions();
                if pos.len() == 2 {
                    let (x, y) = (pos[0], pos[1]);
                    if (y - x) >= 2 && x.abs().min(y.abs()).min(y - x) >= gap {
                        return ControlFlow::Break(());
                    }
                }
            }
        }
        ControlFlow::Continue(())
    }
}

/// Outcome of one two-particle replica: the collision time if one happened
/// before the horizon, else the final tagged positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub tau: Option<f64>,
    pub x: i64,
    pub y: i64,
}

fn pair_replica(
    params: EngineParams,
    prototype: &Configuration,
    horizon: f64,
    seed: u64,
    replica: u64,
    early_stop_gap: Option<i64>,
) -> PairOutcome {
    let mut cfg = prototype.clone();
    let mut rng = replica_rng(seed, replica);
    let mut obs = CollisionStopObserver {
        track: SecondClassTrack::from_configuration(&cfg),
        early_stop_gap,
    };
    run_single(&mut cfg, params, horizon, &mut rng, &mut obs);
    let pos = obs.track.positions();
    PairOutcome {
        tau: obs.track.collision_time(),
        x: pos[0],
        y: *pos.last().unwrap(),
    }
}

/// Collision times of `n_reps` independent pair replicas started `m` sites
/// apart, `None` when the pair was still apart at the horizon.
pub fn collision_taus(
    params: EngineParams,
    m: u32,
    t_max: f64,
    n_reps: u64,
    seed: u64,
    early_stop_gap: Option<i64>,
) -> Result<Vec<Option<f64>>, EstimatorError> {
    let prototype = pair_pattern(m)?;
    Ok(run_replicas(n_reps, |k| {
        pair_replica(params, &prototype, t_max, seed, k, early_stop_gap).tau
    }))
}

/// Reference collision probability, when one is known.
pub fn collision_target(params: EngineParams, m: u32) -> (Option<f64>, TargetKind) {
    let p = params.p();
    match m {
        1 => (Some((1.0 + p) / (3.0 * p)), TargetKind::Exact),
        2 => (Some((1.0 + 2.0 * p * p) / (6.0 * p * p)), TargetKind::Exact),
        _ if p == 1.0 => (Some(2.0 / (m as f64 + 2.0)), TargetKind::Conjecture),
        _ => (None, TargetKind::Conjecture),
    }
}

/// Estimates `P(tau <= T_max)` for two tagged particles started `m` sites
/// apart. Also reports the estimate at `T/4` and `T/2` on the same
/// trajectories, so the censoring tail is visible.
pub fn estimate_collision(
    params: EngineParams,
    m: u32,
    t_max: f64,
    n_reps: u64,
    seed: u64,
    early_stop_gap: Option<i64>,
) -> Result<EstimateSummary, EstimatorError> {
    if n_reps < 2 {
        return Err(EstimatorError::TooFewReplicas);
    }
    let taus = collision_taus(params, m, t_max, n_reps, seed, early_stop_gap)?;
    let horizons = vec![t_max / 4.0, t_max / 2.0, t_max];
    let estimates: Vec<f64> = horizons
        .iter()
        .map(|&h| {
            taus.iter()
                .filter(|t| matches!(t, Some(tau) if *tau <= h))
                .count() as f64
                / n_reps as f64
        })
        .collect();
    let hits = taus.iter().filter(|t| t.is_some()).count();
    let (target, target_kind) = collision_target(params, m);
    let mut summary = EstimateSummary::bernoulli(
        "collision",
        ExperimentParams {
            p: Some(params.p()),
            m: Some(m),
            t_max: Some(t_max),
            n_reps,
            seed,
            ..Default::default()
        },
        hits,
        n_reps as usize,
        target,
        target_kind,
    );
    summary.censoring = Some(1.0 - hits as f64 / n_reps as f64);
    summary.truncation = Some(TruncationReport {
        horizons,
        estimates,
    });
    Ok(summary)
}

/// Speed-law report: scaled positions of a single tagged particle and the
/// KS distance to the uniform law on `[-(p-q), p-q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedLawReport {
    pub params: ExperimentParams,
    pub ks_distance: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub samples: Vec<f64>,
}

pub fn estimate_speed_law(
    params: EngineParams,
    t: f64,
    n_reps: u64,
    seed: u64,
) -> Result<SpeedLawReport, EstimatorError> {
    if n_reps < 2 {
        return Err(EstimatorError::TooFewReplicas);
    }
    let prototype = parse_pattern("P* * H*").expect("single-star pattern");
    let samples: Vec<f64> = run_replicas(n_reps, |k| {
        let mut cfg = prototype.clone();
        let mut rng = replica_rng(seed, k);
        let mut obs = TrackOnlyObserver {
            track: SecondClassTrack::from_configuration(&cfg),
        };
        run_single(&mut cfg, params, t, &mut rng, &mut obs);
        obs.track.positions()[0] as f64 / t
    });
    let d = params.drift();
    let ks = ks_statistic(&samples, |x| ((x + d) / (2.0 * d)).clamp(0.0, 1.0));
    let (mean, _) = mean_and_stderr(&samples);
    Ok(SpeedLawReport {
        params: ExperimentParams {
            p: Some(params.p()),
            t: Some(t),
            n_reps,
            seed,
            ..Default::default()
        },
        ks_distance: ks,
        mean,
        min: samples.iter().copied().fold(f64::INFINITY, f64::min),
        max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples,
    })
}

struct TrackOnlyObserver {
    track: SecondClassTrack,
}

impl EventObserver for TrackOnlyObserver {
    #[inline(always)]
    fn on_event(
        &mut self,
        event: &BondEvent,
        pre_source: SiteState,
        pre_target: SiteState,
        effect: Effect,
    ) -> ControlFlow<()> {
        self.track
            .observe_event(event, pre_source, pre_target, effect);
        ControlFlow::Continue(())
    }
}

/// Estimates `P(tau > t, X(t) <= r t < Y(t))` for the adjacent pair.
pub fn estimate_separation(
    params: EngineParams,
    r: f64,
    t: f64,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateSummary, EstimatorError> {
    if n_reps < 2 {
        return Err(EstimatorError::TooFewReplicas);
    }
    let d = params.drift();
    if r.abs() > d {
        return Err(EstimatorError::SpeedOutOfRange { r, drift: d });
    }
    let prototype = pair_pattern(1)?;
    let hits = run_replicas(n_reps, |k| {
        let out = pair_replica(params, &prototype, t, seed, k, None);
        out.tau.is_none() && (out.x as f64) <= r * t && r * t < out.y as f64
    })
    .into_iter()
    .filter(|&b| b)
    .count();
    let target = (d * d - r * r) / (4.0 * params.p() * d);
    Ok(EstimateSummary::bernoulli(
        "separation",
        ExperimentParams {
            p: Some(params.p()),
            r: Some(r),
            t: Some(t),
            n_reps,
            seed,
            ..Default::default()
        },
        hits,
        n_reps as usize,
        Some(target),
        TargetKind::LimitAsTGrows,
    ))
}

/// Estimates `E[(Y(t) - X(t)) 1(tau > t)] / t` for the adjacent pair.
pub fn estimate_scaled_distance(
    params: EngineParams,
    t: f64,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateSummary, EstimatorError> {
    if n_reps < 2 {
        return Err(EstimatorError::TooFewReplicas);
    }
    let prototype = pair_pattern(1)?;
    let values: Vec<f64> = run_replicas(n_reps, |k| {
        let out = pair_replica(params, &prototype, t, seed, k, None);
        match out.tau {
            Some(_) => 0.0,
            None => (out.y - out.x) as f64 / t,
        }
    });
    let d = params.drift();
    let target = d * d / (3.0 * params.p());
    Ok(EstimateSummary::real_valued(
        "distance",
        ExperimentParams {
            p: Some(params.p()),
            t: Some(t),
            n_reps,
            seed,
            ..Default::default()
        },
        &values,
        Some(target),
        TargetKind::LimitAsTGrows,
    ))
}

/// Mean occupancies of the two sites flanking a lone tagged particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborDensityReport {
    pub left: EstimateSummary,
    pub right: EstimateSummary,
    /// Mean and standard error of the per-replica left+right sum, which the
    /// particle-hole symmetry pins at one.
    pub sum_estimate: f64,
    pub sum_stderr: f64,
}

pub fn estimate_neighbor_density(
    params: EngineParams,
    t: f64,
    n_reps: u64,
    seed: u64,
) -> Result<NeighborDensityReport, EstimatorError> {
    if n_reps < 2 {
        return Err(EstimatorError::TooFewReplicas);
    }
    let prototype = parse_pattern("P* * H*").expect("single-star pattern");
    let outcomes: Vec<(bool, bool)> = run_replicas(n_reps, |k| {
        let mut cfg = prototype.clone();
        let mut rng = replica_rng(seed, k);
        let mut obs = TrackOnlyObserver {
            track: SecondClassTrack::from_configuration(&cfg),
        };
        run_single(&mut cfg, params, t, &mut rng, &mut obs);
        neighbor_occupancy(&cfg, obs.track.positions()[0]).expect("tag tracked")
    });
    let d = params.drift();
    let base_params = ExperimentParams {
        p: Some(params.p()),
        t: Some(t),
        n_reps,
        seed,
        ..Default::default()
    };
    let left_hits = outcomes.iter().filter(|o| o.0).count();
    let right_hits = outcomes.iter().filter(|o| o.1).count();
    let sums: Vec<f64> = outcomes
        .iter()
        .map(|&(l, r)| (l as u8 + r as u8) as f64)
        .collect();
    let (sum_estimate, sum_stderr) = mean_and_stderr(&sums);
    Ok(NeighborDensityReport {
        left: EstimateSummary::bernoulli(
            "neighbors-left",
            base_params.clone(),
            left_hits,
            n_reps as usize,
            Some(0.5 - d / 6.0),
            TargetKind::LimitAsTGrows,
        ),
        right: EstimateSummary::bernoulli(
            "neighbors-right",
            base_params,
            right_hits,
            n_reps as usize,
            Some(0.5 + d / 6.0),
            TargetKind::LimitAsTGrows,
        ),
        sum_estimate,
        sum_stderr,
    })
}

/// Per-replica fate of the red cluster at one truncation size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceOutcome {
    pub alive: bool,
    pub first_center: bool,
}

/// Simulates the three-seed growth model at size `n`, one weight field per
/// replica. Weight fields are prefix-stable in `n` for fixed seeds, so the
/// same call at a smaller size sees the sub-grids of the same fields.
pub fn coexistence_statuses(
    n: usize,
    n_reps: u64,
    seed: u64,
) -> Result<Vec<CoexistenceOutcome>, EstimatorError> {
    // surface bad sizes before spawning replicas
    WeightGrid::exponential(n, seed, 0)?;
    let results: Vec<Result<CoexistenceOutcome, EstimatorError>> = run_replicas(n_reps, |k| {
        let w = WeightGrid::exponential(n, seed, k)?;
        let field = compute_lpp(&w, &[(1, 1), (1, 2), (2, 1)])?;
        let alive = matches!(
            red_cluster_status(&field)?,
            RedClusterStatus::AliveAtTruncation
        );
        let first_center = first_growth_cell(&field)? == (2, 2);
        Ok(CoexistenceOutcome {
            alive,
            first_center,
        })
    });
    results.into_iter().collect()
}

/// Red-cluster survival report: the raw truncated-survival fraction, the
/// same conditioned on the first growth event not being the centre cell,
/// and the law of that first event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceReport {
    pub alive: EstimateSummary,
    pub conditional_alive: EstimateSummary,
    pub first_center: EstimateSummary,
}

pub fn estimate_coexistence(
    n: usize,
    n_reps: u64,
    seed: u64,
) -> Result<CoexistenceReport, EstimatorError> {
    if n_reps < 2 {
        return Err(EstimatorError::TooFewReplicas);
    }
    let outcomes = coexistence_statuses(n, n_reps, seed)?;
    let base = ExperimentParams {
        grid_n: Some(n),
        n_reps,
        seed,
        ..Default::default()
    };
    let alive_hits = outcomes.iter().filter(|o| o.alive).count();
    let off_center: Vec<&CoexistenceOutcome> =
        outcomes.iter().filter(|o| !o.first_center).collect();
    let cond_hits = off_center.iter().filter(|o| o.alive).count();
    let center_hits = outcomes.len() - off_center.len();
    let mut alive = EstimateSummary::bernoulli(
        "growth-alive",
        base.clone(),
        alive_hits,
        outcomes.len(),
        Some(1.0 / 3.0),
        TargetKind::LimitAsTGrows,
    );
    // survival at a finite size over-counts the limit event
    alive.censoring = Some(alive.estimate - 1.0 / 3.0);
    Ok(CoexistenceReport {
        alive,
        conditional_alive: EstimateSummary::bernoulli(
            "growth-alive-given-side-start",
            base.clone(),
            cond_hits,
            off_center.len(),
            Some(0.5),
            TargetKind::LimitAsTGrows,
        ),
        first_center: EstimateSummary::bernoulli(
            "growth-first-event-center",
            base,
            center_hits,
            outcomes.len(),
            Some(1.0 / 3.0),
            TargetKind::Exact,
        ),
    })
}
