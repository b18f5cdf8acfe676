//! Exact cross-model equivalences, run on shared randomness.
//!
//! These checks are deterministic given their seeds and must pass
//! identically on every platform: they compare different representations of
//! the same trajectory event by event, with zero tolerance.

use std::ops::ControlFlow;

use crate::engine::{
    apply_event, replica_rng, run_coupled, run_single, BondEvent, CoupledEnsemble, CoupledObserver,
    Direction, Effect, EngineParams, EventObserver,
};
use crate::lattice::{parse_pattern, Configuration, MultiTypeConfiguration, SiteState};
use crate::multitype::run_multitype_events;
use crate::trackers::SecondClassTrack;

#[derive(Debug, Clone, PartialEq)]
struct LoggedEvent {
    time: f64,
    source: i64,
    direction: Direction,
}

struct TwoTypeLog {
    track: SecondClassTrack,
    events: Vec<LoggedEvent>,
    positions: Vec<Vec<i64>>,
    stop_at_collision: bool,
}

impl EventObserver for TwoTypeLog {
    fn on_event(
        &mut self,
        event: &BondEvent,
        pre_source: SiteState,
        pre_target: SiteState,
        effect: Effect,
    ) -> ControlFlow<()> {
        self.track
            .observe_event(event, pre_source, pre_target, effect);
        self.events.push(LoggedEvent {
            time: event.time,
            source: event.source,
            direction: event.direction,
        });
        self.positions.push(self.track.positions().to_vec());
        if self.stop_at_collision && self.track.is_collided() {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }
}

struct PairLog {
    events: Vec<LoggedEvent>,
    discrepancies: Vec<Vec<i64>>,
    signs_ok: bool,
    stop_when_coupled: bool,
}

impl CoupledObserver for PairLog {
    fn on_event(
        &mut self,
        event: &BondEvent,
        marginals: &[Configuration],
        _effects: &[Effect],
    ) -> ControlFlow<()> {
        self.events.push(LoggedEvent {
            time: event.time,
            source: event.source,
            direction: event.direction,
        });
        let (a, b) = (&marginals[0], &marginals[1]);
        let lo = a.window_left().min(b.window_left());
        let hi = a.window_right().max(b.window_right());
        let mut sites = Vec::new();
        for s in lo..=hi {
            if a.get(s) != b.get(s) {
                sites.push(s);
            }
        }
        // the lower discrepancy carries the first marginal's particle, the
        // upper one its hole; losing this structure would break the
        // half-line particle-count bookkeeping
        if sites.len() == 2 {
            let (x, y) = (sites[0], sites[1]);
            if !(a.get(x) == SiteState::FirstClass
                && b.get(x) == SiteState::Hole
                && a.get(y) == SiteState::Hole
                && b.get(y) == SiteState::FirstClass)
            {
                self.signs_ok = false;
            }
        }
        let coupled = sites.is_empty();
        self.discrepancies.push(sites);
        if self.stop_when_coupled && coupled {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }
}

fn run_two_type(
    pattern: &str,
    params: EngineParams,
    horizon: f64,
    seed: u64,
    stop_at_collision: bool,
) -> TwoTypeLog {
    let mut cfg = parse_pattern(pattern).expect("valid pattern");
    let mut log = TwoTypeLog {
        track: SecondClassTrack::from_configuration(&cfg),
        events: Vec::new(),
        positions: Vec::new(),
        stop_at_collision,
    };
    let mut rng = replica_rng(seed, 0);
    run_single(&mut cfg, params, horizon, &mut rng, &mut log);
    log
}

/// Splits a tagged configuration into the coupled pair that carries its
/// tags as discrepancies: the k-th tag becomes a particle in the first
/// marginal when k is even and in the second when k is odd. Opposite signs
/// on neighbouring tags let the discrepancies annihilate at a collision,
/// which is exactly when the marginals couple.
pub fn discrepancy_pair(cfg: &Configuration) -> (Configuration, Configuration) {
    let mut a = cfg.clone();
    let mut b = cfg.clone();
    for (k, site) in cfg.second_class_positions().into_iter().enumerate() {
        let (sa, sb) = if k % 2 == 0 {
            (SiteState::FirstClass, SiteState::Hole)
        } else {
            (SiteState::Hole, SiteState::FirstClass)
        };
        a.replace_site(site, sa)
            .expect("tag sites are in the window");
        b.replace_site(site, sb)
            .expect("tag sites are in the window");
    }
    (a, b)
}

fn run_pair(
    two_type_pattern: &str,
    params: EngineParams,
    horizon: f64,
    seed: u64,
    stop_when_coupled: bool,
) -> (PairLog, CoupledEnsemble) {
    let base = parse_pattern(two_type_pattern).expect("valid pattern");
    let (first, second) = discrepancy_pair(&base);
    let mut ens = CoupledEnsemble::new(params, vec![first, second]);
    let mut log = PairLog {
        events: Vec::new(),
        discrepancies: Vec::new(),
        signs_ok: true,
        stop_when_coupled,
    };
    let mut rng = replica_rng(seed, 0);
    run_coupled(&mut ens, horizon, &mut rng, &mut log);
    (log, ens)
}

/// One tagged particle versus the basic coupling of its two one-type
/// projections, on the same event stream: the single discrepancy must sit
/// exactly where the tagged particle sits, at every event.
pub fn check_discrepancy_equivalence(
    params: EngineParams,
    horizon: f64,
    seed: u64,
) -> Result<(), String> {
    let two = run_two_type("P* * H*", params, horizon, seed, false);
    let (pair, _) = run_pair("P* * H*", params, horizon, seed, false);
    if two.events != pair.events {
        return Err(format!(
            "event logs diverged: {} vs {} events",
            two.events.len(),
            pair.events.len()
        ));
    }
    for (step, (pos, disc)) in two.positions.iter().zip(&pair.discrepancies).enumerate() {
        if pos != disc {
            return Err(format!(
                "step {step}: tagged particle at {pos:?}, discrepancy at {disc:?}"
            ));
        }
    }
    Ok(())
}

/// Two tagged particles versus the coupled pair differing at their two
/// sites, on the same event stream up to the collision: the discrepancies
/// equal the tagged positions at every event before the collision and
/// vanish exactly at it; the marginals then stay coupled forever on their
/// own stream. Past the collision the tags keep moving while the coupled
/// pair has nothing left to track, so their event sources legitimately
/// part ways and the shared-stream comparison ends there.
pub fn check_two_discrepancy_equivalence(
    params: EngineParams,
    horizon: f64,
    seed: u64,
) -> Result<(), String> {
    let two = run_two_type("P* ** H*", params, horizon, seed, true);
    let (pair, mut ensemble) = run_pair("P* ** H*", params, horizon, seed, true);
    if two.events != pair.events {
        return Err(format!(
            "event logs diverged: {} vs {} events",
            two.events.len(),
            pair.events.len()
        ));
    }
    if !pair.signs_ok {
        return Err("discrepancy signs lost their order".into());
    }
    let collided = two.track.is_collided();
    for step in 0..two.events.len() {
        let disc = &pair.discrepancies[step];
        let last = step + 1 == two.events.len();
        if collided && last {
            if !disc.is_empty() {
                return Err(format!(
                    "marginals still differ at {disc:?} at the collision event"
                ));
            }
        } else if disc != &two.positions[step] {
            return Err(format!(
                "step {step}: tagged at {:?}, discrepancies at {disc:?}",
                two.positions[step]
            ));
        }
    }
    if collided {
        // once coupled, always coupled
        let mut check = CoupledCheck { ok: true };
        let mut rng = replica_rng(seed, 1);
        run_coupled(&mut ensemble, horizon, &mut rng, &mut check);
        if !check.ok {
            return Err("marginals separated again after coupling".into());
        }
    }
    Ok(())
}

struct CoupledCheck {
    ok: bool,
}

impl CoupledObserver for CoupledCheck {
    fn on_event(
        &mut self,
        _event: &BondEvent,
        marginals: &[Configuration],
        _effects: &[Effect],
    ) -> ControlFlow<()> {
        if marginals[0] != marginals[1] {
            self.ok = false;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }
}

fn sign_class(label: i64) -> SiteState {
    match label {
        _ if label < 0 => SiteState::FirstClass,
        0 => SiteState::SecondClass,
        _ => SiteState::Hole,
    }
}

/// Label 0 of the multi-type system versus the tagged particle of the
/// two-type system fed with the mapped event stream: identical positions at
/// every event, and identical exchange decisions wherever the two-type
/// state can see them.
pub fn check_multitype_mapping(radius: i64, horizon: f64, seed: u64) -> Result<(), String> {
    let mut multi = MultiTypeConfiguration::identity(radius);
    let mut two = parse_pattern("P* * H*").expect("valid pattern");
    let mut track = SecondClassTrack::from_configuration(&two);
    let mut rng = replica_rng(seed, 0);
    let mut failure: Option<String> = None;
    run_multitype_events(
        &mut multi,
        horizon,
        &mut rng,
        |time, site, a, b, swapped| {
            two.ensure_window(site - 1, site + 2);
            let event = BondEvent {
                time,
                source: site,
                direction: Direction::Right,
            };
            let pre_source = two.get(site);
            let pre_target = two.get(site + 1);
            let effect = apply_event(&mut two, &event);
            track.observe_event(&event, pre_source, pre_target, effect);
            let visible = sign_class(a) != sign_class(b);
            if (effect == Effect::Swapped) != (swapped && visible) {
                failure = Some(format!(
                "exchange decisions differ at site {site}: labels ({a}, {b}) vs states ({pre_source:?}, {pre_target:?})"
            ));
                return ControlFlow::Break(());
            }
            let multi_pos = if swapped && a == 0 {
                site + 1
            } else if swapped && b == 0 {
                site
            } else {
                return ControlFlow::Continue(());
            };
            if track.positions() != [multi_pos] {
                failure = Some(format!(
                    "label 0 at {multi_pos}, tagged particle at {:?}",
                    track.positions()
                ));
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        },
    );
    match failure {
        Some(msg) => Err(msg),
        None => {
            // final states must project onto each other
            let projected = multi.project_two_type();
            if projected == two {
                Ok(())
            } else {
                Err("final two-type state does not match the projected labels".into())
            }
        }
    }
}

/// Replays a recorded event stream on a configuration whose window was
/// padded by ten extra fill cells per side: every event has the same effect
/// and the trajectories coincide, because fill bonds are inert.
pub fn check_padded_replay(params: EngineParams, horizon: f64, seed: u64) -> Result<(), String> {
    struct Recorder {
        events: Vec<(BondEvent, Effect)>,
    }
    impl EventObserver for Recorder {
        fn on_event(
            &mut self,
            event: &BondEvent,
            _: SiteState,
            _: SiteState,
            effect: Effect,
        ) -> ControlFlow<()> {
            self.events.push((*event, effect));
            ControlFlow::Continue(())
        }
    }
    let mut cfg = parse_pattern("P* ** H*").expect("valid pattern");
    let mut padded = cfg.clone();
    padded.ensure_window(cfg.window_left() - 10, cfg.window_right() + 10);
    let mut rec = Recorder { events: Vec::new() };
    let mut rng = replica_rng(seed, 0);
    run_single(&mut cfg, params, horizon, &mut rng, &mut rec);

    for (event, effect) in &rec.events {
        padded.ensure_window(
            event.source.min(event.target()) - 1,
            event.source.max(event.target()) + 1,
        );
        let replayed = apply_event(&mut padded, event);
        if replayed != *effect {
            return Err(format!("replayed effect differs at t={}", event.time));
        }
    }
    if padded != cfg {
        return Err("padded replay reached a different state".into());
    }
    // events aimed at fill bonds are blocked no-ops
    let (l, r) = padded.active_bounds();
    for source in [l - 5, r + 4] {
        let before = padded.clone();
        let event = BondEvent {
            time: horizon,
            source,
            direction: Direction::Right,
        };
        padded.ensure_window(source - 1, source + 2);
        if apply_event(&mut padded, &event) != Effect::Blocked || padded != before {
            return Err(format!("fill bond at {source} was not inert"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_equivalences_hold_on_sample_streams() {
        for seed in 0..10 {
            for p in [1.0, 0.75] {
                let params = EngineParams::new(p).unwrap();
                check_discrepancy_equivalence(params, 20.0, seed).unwrap();
                check_two_discrepancy_equivalence(params, 20.0, seed).unwrap();
            }
        }
    }

    #[test]
    fn multitype_mapping_holds_on_sample_streams() {
        for seed in 0..5 {
            check_multitype_mapping(40, 8.0, seed).unwrap();
        }
    }

    #[test]
    fn padded_replay_holds_on_sample_streams() {
        for seed in 0..5 {
            for p in [1.0, 0.8] {
                let params = EngineParams::new(p).unwrap();
                check_padded_replay(params, 25.0, seed).unwrap();
            }
        }
    }
}
