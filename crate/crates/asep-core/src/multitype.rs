//! Totally asymmetric multi-type dynamics: one label per site, lower labels
//! displace higher ones to their right at rate one.
//!
//! The infinite system is approximated on a frozen window `[-radius,
//! radius]`. Disturbances from the frozen boundary travel inward no faster
//! than the fan spreads, so any radius exceeding `horizon + 10
//! sqrt(horizon)` keeps the centre labels exactly distributed over the whole
//! run.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{replica_rng, uniform_index, EngineParams};
use crate::estimators::{
    collision_taus, run_replicas, EstimateSummary, EstimatorError, ExperimentParams, TargetKind,
    TruncationReport,
};
use crate::lattice::MultiTypeConfiguration;

#[derive(Debug, Error, PartialEq)]
pub enum MultiTypeError {
    #[error("window radius {radius} cannot shield horizon {horizon}; need radius > horizon + 10 sqrt(horizon)")]
    RadiusTooSmall { radius: i64, horizon: f64 },
    #[error("reference speed r={0} outside [-1, 1]")]
    SpeedOutOfRange(f64),
    #[error("gap parameter m={0} exceeds the supported maximum of 31")]
    GapTooLarge(u32),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Smallest window radius that shields the centre band up to `horizon`.
pub fn required_radius(horizon: f64) -> i64 {
    (horizon + 10.0 * horizon.sqrt()).floor() as i64 + 1
}

fn check_radius(radius: i64, horizon: f64) -> Result<(), MultiTypeError> {
    if (radius as f64) > horizon + 10.0 * horizon.sqrt() {
        Ok(())
    } else {
        Err(MultiTypeError::RadiusTooSmall { radius, horizon })
    }
}

/// Drives a multi-type configuration to `horizon`, invoking `on_event`
/// after every bond epoch. The callback receives the epoch time, the left
/// site of the bond, the two labels before the attempt, and whether the
/// exchange happened.
pub fn run_multitype_events<R, F>(
    cfg: &mut MultiTypeConfiguration,
    horizon: f64,
    rng: &mut R,
    mut on_event: F,
) -> f64
where
    R: Rng,
    F: FnMut(f64, i64, i64, i64, bool) -> ControlFlow<()>,
{
    let left = cfg.window_left();
    let n_bonds = (cfg.window_right() - left) as u64;
    let rate = n_bonds as f64;
    let mut clock = 0.0f64;
    loop {
        clock += rng.sample::<f64, _>(Exp1) / rate;
        if clock > horizon {
            return horizon;
        }
        let site = left + uniform_index(rng, n_bonds) as i64;
        let a = cfg.label_at(site);
        let b = cfg.label_at(site + 1);
        let swapped = a < b;
        if swapped {
            cfg.swap_sites(site, site + 1);
        }
        if on_event(clock, site, a, b, swapped) == ControlFlow::Break(()) {
            return clock;
        }
    }
}

/// Labels a tracked particle has passed, with first-passage times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvertakeRecord {
    pub label: i64,
    pub overtaken: BTreeSet<i64>,
    pub first_overtake_times: BTreeMap<i64, f64>,
}

/// Scaled position of a tracked label at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub label: i64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTypeRun {
    pub config: MultiTypeConfiguration,
    pub overtakes: Vec<OvertakeRecord>,
    pub speeds: Vec<SpeedSample>,
}

/// Simulates the identity-labelled system on `[-radius, radius]` and
/// reports overtakes and final scaled positions for the labels in
/// `[-band, band]`.
pub fn run_multitype(
    window_radius: i64,
    horizon: f64,
    band: i64,
    seed: u64,
) -> Result<MultiTypeRun, MultiTypeError> {
    check_radius(window_radius, horizon)?;
    let mut cfg = MultiTypeConfiguration::identity(window_radius);
    let mut rng = replica_rng(seed, 0);
    let labels: Vec<i64> = (-band..=band).collect();
    let mut positions: BTreeMap<i64, i64> = labels.iter().map(|&l| (l, l)).collect();
    let mut overtakes: BTreeMap<i64, OvertakeRecord> = labels
        .iter()
        .map(|&l| {
            (
                l,
                OvertakeRecord {
                    label: l,
                    overtaken: BTreeSet::new(),
                    first_overtake_times: BTreeMap::new(),
                },
            )
        })
        .collect();
    run_multitype_events(&mut cfg, horizon, &mut rng, |time, _site, a, b, swapped| {
        if swapped {
            if let Some(pos) = positions.get_mut(&a) {
                *pos += 1;
            }
            if let Some(pos) = positions.get_mut(&b) {
                *pos -= 1;
            }
            if let Some(rec) = overtakes.get_mut(&a) {
                // totally asymmetric: a passes b exactly once
                rec.overtaken.insert(b);
                rec.first_overtake_times.entry(b).or_insert(time);
            }
        }
        ControlFlow::Continue(())
    });
    let speeds: Vec<SpeedSample> = positions
        .iter()
        .map(|(&label, &pos)| {
            let value = (pos - label) as f64 / horizon;
            if horizon >= 100.0 {
                assert!(
                    value.abs() <= 1.5,
                    "scaled position {value} escapes the fan"
                );
            }
            SpeedSample {
                label,
                t: horizon,
                value,
            }
        })
        .collect();
    Ok(MultiTypeRun {
        config: cfg,
        overtakes: overtakes.into_values().collect(),
        speeds,
    })
}

fn overtake_target(m: u32) -> (f64, TargetKind) {
    let value = 2.0 / (m as f64 + 2.0);
    if m <= 2 {
        (value, TargetKind::Exact)
    } else {
        (value, TargetKind::Conjecture)
    }
}

/// Estimates the probability that particle 0 overtakes all of `1..=m` by
/// `horizon`, via the equivalent two-particle collision experiment started
/// with the tags `m` sites apart.
pub fn estimate_overtake(
    m: u32,
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateSummary, MultiTypeError> {
    let params = EngineParams::totally_asymmetric();
    let taus = collision_taus(params, m, horizon, n_reps, seed, None)?;
    let hits = taus.iter().filter(|t| t.is_some()).count();
    let horizons = vec![horizon / 4.0, horizon / 2.0, horizon];
    let estimates: Vec<f64> = horizons
        .iter()
        .map(|&h| {
            taus.iter()
                .filter(|t| matches!(t, Some(tau) if *tau <= h))
                .count() as f64
                / n_reps as f64
        })
        .collect();
    let (target, kind) = overtake_target(m);
    let mut summary = EstimateSummary::bernoulli(
        "overtake-pattern",
        ExperimentParams {
            p: Some(1.0),
            m: Some(m),
            t_max: Some(horizon),
            n_reps,
            seed,
            ..Default::default()
        },
        hits,
        n_reps as usize,
        Some(target),
        kind,
    );
    summary.censoring = Some(1.0 - hits as f64 / n_reps as f64);
    summary.truncation = Some(TruncationReport {
        horizons,
        estimates,
    });
    Ok(summary)
}

/// Same estimate measured directly in the multi-type system: one replica
/// simulates the full frozen window and watches for label 0 passing each of
/// `1..=m`.
pub fn estimate_overtake_direct(
    m: u32,
    horizon: f64,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateSummary, MultiTypeError> {
    if m < 1 {
        return Err(MultiTypeError::Estimator(EstimatorError::BadGap));
    }
    if m >= 32 {
        // the overtaken set is tracked in a 32-bit mask
        return Err(MultiTypeError::GapTooLarge(m));
    }
    let radius = required_radius(horizon);
    let done_mask: u32 = (1 << m) - 1;
    let taus: Vec<Option<f64>> = run_replicas(n_reps, |k| {
        let mut cfg = MultiTypeConfiguration::identity(radius);
        let mut rng = replica_rng(seed, k);
        let mut mask: u32 = 0;
        let mut tau = None;
        run_multitype_events(&mut cfg, horizon, &mut rng, |time, _site, a, b, swapped| {
            if swapped && a == 0 && b >= 1 && b <= m as i64 {
                mask |= 1 << (b - 1);
                if mask == done_mask {
                    tau = Some(time);
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        });
        tau
    });
    let hits = taus.iter().filter(|t| t.is_some()).count();
    let (target, kind) = overtake_target(m);
    let mut summary = EstimateSummary::bernoulli(
        "overtake-direct",
        ExperimentParams {
            p: Some(1.0),
            m: Some(m),
            t_max: Some(horizon),
            n_reps,
            seed,
            ..Default::default()
        },
        hits,
        n_reps as usize,
        Some(target),
        kind,
    );
    summary.censoring = Some(1.0 - hits as f64 / n_reps as f64);
    Ok(summary)
}

/// Estimates `P(X_0(t)/t < r, X_1(t)/t > r)` in the multi-type system.
pub fn estimate_joint_speeds(
    r: f64,
    t: f64,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateSummary, MultiTypeError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(MultiTypeError::SpeedOutOfRange(r));
    }
    let radius = required_radius(t);
    let hits = run_replicas(n_reps, |k| {
        let mut cfg = MultiTypeConfiguration::identity(radius);
        let mut rng = replica_rng(seed, k);
        let mut p0: i64 = 0;
        let mut p1: i64 = 1;
        run_multitype_events(&mut cfg, t, &mut rng, |_time, _site, a, b, swapped| {
            if swapped {
                if a == 0 {
                    p0 += 1;
                } else if b == 0 {
                    p0 -= 1;
                }
                if a == 1 {
                    p1 += 1;
                } else if b == 1 {
                    p1 -= 1;
                }
            }
            ControlFlow::Continue(())
        });
        (p0 as f64) < r * t && r * t < p1 as f64
    })
    .into_iter()
    .filter(|&b| b)
    .count();
    let target = (1.0 - r) * (1.0 + r) / 4.0;
    Ok(EstimateSummary::bernoulli(
        "joint-speeds",
        ExperimentParams {
            p: Some(1.0),
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
