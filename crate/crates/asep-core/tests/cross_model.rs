//! Cross-model consistency: particle trackers against basic couplings, the
//! multi-type system against the two-type one, and the growth model against
//! both, all on shared or mapped randomness.

use asep_core::engine::EngineParams;
use asep_core::estimators::{
    collision_taus, estimate_coexistence, estimate_collision, run_replicas,
};
use asep_core::growth::{check_correspondence, WeightGrid};
use asep_core::hydro::empirical_profile;
use asep_core::multitype::{estimate_overtake, estimate_overtake_direct, run_multitype};
use asep_core::oracles::{
    check_discrepancy_equivalence, check_multitype_mapping, check_padded_replay,
    check_two_discrepancy_equivalence,
};
use asep_core::stats::{ks_two_sample, pava_non_increasing};

fn tasep() -> EngineParams {
    EngineParams::totally_asymmetric()
}

#[test]
fn correspondence_oracle_random_grids() {
    let seed_sets: [&[(u32, u32)]; 3] = [&[], &[(1, 1)], &[(1, 1), (1, 2), (2, 1)]];
    for i in 0..30u64 {
        let n = 3 + (i as usize % 18);
        let w = WeightGrid::exponential(n, 0xfee1_600d, i).unwrap();
        let seeds = seed_sets[i as usize % 3];
        check_correspondence(&w, seeds)
            .unwrap_or_else(|e| panic!("grid {i} (n={n}, seeds={seeds:?}): {e}"));
    }
}

#[test]
fn discrepancy_equivalences_across_rates() {
    for (i, seed) in (200..230u64).enumerate() {
        let p = [1.0, 0.75, 0.9][i % 3];
        let params = EngineParams::new(p).unwrap();
        check_discrepancy_equivalence(params, 30.0, seed).unwrap();
        check_two_discrepancy_equivalence(params, 30.0, seed).unwrap();
    }
}

#[test]
fn multitype_stream_maps_onto_two_type() {
    for seed in 300..312u64 {
        check_multitype_mapping(60, 15.0, seed).unwrap();
    }
}

#[test]
fn padded_windows_replay_identically() {
    for seed in 400..412u64 {
        for p in [1.0, 0.8] {
            check_padded_replay(EngineParams::new(p).unwrap(), 30.0, seed).unwrap();
        }
    }
}

#[test]
fn collision_time_is_prefix_stable_in_the_horizon() {
    // extending the horizon never rewrites an already-recorded collision
    let params = EngineParams::new(0.85).unwrap();
    let short = collision_taus(params, 1, 40.0, 60, 77, None).unwrap();
    let long = collision_taus(params, 1, 80.0, 60, 77, None).unwrap();
    for (replica, (s, l)) in short.iter().zip(&long).enumerate() {
        if let Some(tau) = s {
            assert_eq!(
                Some(*tau),
                *l,
                "replica {replica} rewrote its collision time"
            );
        }
    }
}

#[test]
fn multitype_labels_share_one_speed_law() {
    // disjoint replica blocks per label keep the two-sample tests honest
    let horizon = 30.0;
    let radius = 90;
    let band = 2i64;
    let per_label = 260u64;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (block, label) in (-band..=band).enumerate() {
        let values: Vec<f64> = run_replicas(per_label, |k| {
            let seed = 9000 + (block as u64) * per_label + k;
            let run = run_multitype(radius, horizon, band, seed).unwrap();
            run.speeds
                .iter()
                .find(|s| s.label == label)
                .expect("label tracked")
                .value
        });
        samples.push(values);
    }
    for pair in samples.windows(2) {
        let (d, p_value) = ks_two_sample(&pair[0], &pair[1]);
        assert!(
            p_value > 0.01,
            "adjacent labels disagree in law: d={d:.4}, p={p_value:.4}"
        );
    }
}

#[test]
fn overtake_routes_agree() {
    let horizon = 120.0;
    let pattern = estimate_overtake(1, horizon, 4000, 501).unwrap();
    let direct = estimate_overtake_direct(1, horizon, 1500, 502).unwrap();
    let diff = (pattern.estimate - direct.estimate).abs();
    let combined = (pattern.stderr.powi(2) + direct.stderr.powi(2)).sqrt();
    assert!(
        diff <= 3.0 * combined,
        "routes differ by {diff:.4} with combined stderr {combined:.4}"
    );
}

#[test]
fn empirical_profile_is_monotone_up_to_noise() {
    let speeds: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.22).collect();
    let points = empirical_profile(tasep(), 60.0, &speeds, 3000, 61).unwrap();
    let values: Vec<f64> = points.iter().map(|p| p.empirical).collect();
    let fit = pava_non_increasing(&values);
    let pooled =
        (points.iter().map(|p| p.stderr.powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    for (point, fitted) in points.iter().zip(&fit) {
        let residual = (point.empirical - fitted).abs();
        assert!(
            residual <= 3.0 * pooled,
            "residual {residual:.4} at r={} exceeds 3 x pooled stderr {pooled:.4}",
            point.r
        );
    }
}

#[test]
fn collision_and_growth_estimates_cross_check() {
    // survival of the pair and survival of the red cluster estimate the
    // same number from two models; truncation biases them both upward
    let collision = estimate_collision(tasep(), 1, 200.0, 4000, 81, None).unwrap();
    let growth = estimate_coexistence(120, 2500, 82).unwrap();
    let pair_survival = 1.0 - collision.estimate;
    let diff = (pair_survival - growth.alive.estimate).abs();
    let combined = (collision.stderr.powi(2) + growth.alive.stderr.powi(2)).sqrt();
    // generous truncation allowance for the small sizes used here
    assert!(
        diff <= 3.0 * combined + 0.03,
        "pair survival {pair_survival:.4} vs red-cluster survival {:.4}",
        growth.alive.estimate
    );
}
