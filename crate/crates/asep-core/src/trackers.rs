//! Trajectory observers: tagged second-class particles, the collision time,
//! current observables and neighbourhood occupancies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{BondEvent, Effect, EngineParams};
use crate::lattice::{Configuration, SiteState};

#[derive(Debug, Error, PartialEq)]
pub enum TrackerError {
    #[error("site {0} does not hold a second-class particle")]
    TagNotSecondClass(i64),
}

/// Positions of the tagged second-class particles plus the first collision,
/// if one has been observed. A collision is the event in which one tagged
/// particle attempts to jump onto the site of the other; the configuration
/// itself is left unchanged by such an attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondClassTrack {
    positions: Vec<i64>,
    collision_time: Option<f64>,
    collided_pair: Option<(i64, i64)>,
}

impl SecondClassTrack {
    pub fn from_configuration(cfg: &Configuration) -> SecondClassTrack {
        SecondClassTrack {
            positions: cfg.second_class_positions(),
            collision_time: None,
            collided_pair: None,
        }
    }

    /// Updates the track for one engine event. Must be fed every event of
    /// the run, with the pre-event endpoint states.
    #[inline(always)]
    pub fn observe_event(
        &mut self,
        event: &BondEvent,
        pre_source: SiteState,
        pre_target: SiteState,
        effect: Effect,
    ) {
        use SiteState::SecondClass;
        if pre_source == SecondClass && pre_target == SecondClass {
            debug_assert_eq!(effect, Effect::Blocked);
            if self.collision_time.is_none() {
                let a = event.source.min(event.target());
                let b = event.source.max(event.target());
                self.collision_time = Some(event.time);
                self.collided_pair = Some((a, b));
            }
            return;
        }
        if effect == Effect::Swapped {
            if pre_source == SecondClass {
                self.move_particle(event.source, event.target());
            } else if pre_target == SecondClass {
                self.move_particle(event.target(), event.source);
            }
        }
    }

    #[inline(always)]
    fn move_particle(&mut self, from: i64, to: i64) {
        for p in self.positions.iter_mut() {
            if *p == from {
                *p = to;
                break;
            }
        }
        debug_assert!(self.positions.windows(2).all(|w| w[0] < w[1]));
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn collision_time(&self) -> Option<f64> {
        self.collision_time
    }

    pub fn collided_pair(&self) -> Option<(i64, i64)> {
        self.collided_pair
    }

    pub fn is_collided(&self) -> bool {
        self.collision_time.is_some()
    }
}

/// Weighted particle count to the right of the moving reference point `r t`:
/// full weight for every first-class particle strictly beyond `r t`, plus a
/// fractional weight `floor(rt) + 1 - rt` for a particle sitting exactly on
/// the cell containing `r t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentObservable {
    pub r: f64,
    pub value: f64,
}

impl CurrentObservable {
    pub fn measure(cfg: &Configuration, r: f64, t: f64) -> CurrentObservable {
        CurrentObservable {
            r,
            value: current_right_of(cfg, r, t),
        }
    }
}

/// See [`CurrentObservable`]. Only first-class particles are counted; in
/// two-type states the tagged second-class particles are tracked separately.
pub fn current_right_of(cfg: &Configuration, r: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let threshold = r * t;
    let cell = threshold.floor() as i64;
    // sites in (threshold, window_left) are first-class fill
    let fill = (cfg.window_left() - cell - 1).max(0) as f64;
    let lo = (cell + 1).max(cfg.window_left());
    let mut count = 0.0;
    for site in lo..=cfg.window_right() {
        if cfg.get(site) == SiteState::FirstClass {
            count += 1.0;
        }
    }
    let frac = if cfg.get(cell) == SiteState::FirstClass {
        (cell + 1) as f64 - threshold
    } else {
        0.0
    };
    fill + count + frac
}

/// Number of first-class particles strictly to the right of a tagged
/// second-class particle.
pub fn particles_right_of_tag(cfg: &Configuration, tag_position: i64) -> Result<u64, TrackerError> {
    if cfg.get(tag_position) != SiteState::SecondClass {
        return Err(TrackerError::TagNotSecondClass(tag_position));
    }
    let mut count = 0;
    for site in tag_position + 1..=cfg.window_right() {
        if cfg.get(site) == SiteState::FirstClass {
            count += 1;
        }
    }
    Ok(count)
}

/// Instantaneous current through the bond `(x, x+1)` for the first-class
/// indicator field: `p eta(x)(1-eta(x+1)) - q eta(x+1)(1-eta(x))`.
pub fn instantaneous_current(cfg: &Configuration, x: i64, params: EngineParams) -> f64 {
    let eta = |s: i64| {
        if cfg.get(s) == SiteState::FirstClass {
            1.0
        } else {
            0.0
        }
    };
    let a = eta(x);
    let b = eta(x + 1);
    params.p() * a * (1.0 - b) - params.q() * b * (1.0 - a)
}

/// First-class indicators immediately left and right of a tagged
/// second-class particle.
pub fn neighbor_occupancy(
    cfg: &Configuration,
    tag_position: i64,
) -> Result<(bool, bool), TrackerError> {
    if cfg.get(tag_position) != SiteState::SecondClass {
        return Err(TrackerError::TagNotSecondClass(tag_position));
    }
    Ok((
        cfg.get(tag_position - 1) == SiteState::FirstClass,
        cfg.get(tag_position + 1) == SiteState::FirstClass,
    ))
}

/// Per-replica result record, written one JSON document per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: u64,
    /// Collision time, when one was observed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
    /// Horizon at which the replica was censored without a collision.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub censored_at: Option<f64>,
    /// Final positions of the tagged particles.
    pub positions: Vec<i64>,
    /// Named observable samples taken during the run.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub observables: Vec<(String, f64)>,
}

impl ReplicaRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn parse_line(line: &str) -> Option<ReplicaRecord> {
        serde_json::from_str(line).ok()
    }
}
