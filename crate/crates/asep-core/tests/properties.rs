//! Property suites for the lattice layer: the exchange map, the pattern
//! grammar, and the active-bounds bookkeeping.

use proptest::prelude::*;

use asep_core::lattice::{parse_pattern, Configuration, SiteState};

fn arb_state() -> impl Strategy<Value = SiteState> {
    prop_oneof![
        Just(SiteState::Hole),
        Just(SiteState::SecondClass),
        Just(SiteState::FirstClass),
    ]
}

fn arb_cells(min: usize) -> impl Strategy<Value = Vec<SiteState>> {
    prop::collection::vec(arb_state(), min..14)
}

fn arb_body() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![Just('.'), Just('*'), Just('o')], 1..12)
        .prop_map(|chars| chars.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn exchange_is_an_involution(
        (cells, left, bond) in arb_cells(2).prop_flat_map(|cells| {
            let bonds = cells.len() - 1;
            (Just(cells), -8i64..8, 0..bonds)
        })
    ) {
        let cfg = Configuration::from_cells(left, &cells);
        // from_cells may add guards, so index bonds off the actual window
        let span = cfg.window_right() - cfg.window_left();
        let x = cfg.window_left() + bond as i64 % span;
        let mut twice = cfg.clone();
        twice.exchange(x, x + 1).unwrap();
        twice.exchange(x, x + 1).unwrap();
        prop_assert_eq!(&twice, &cfg);
    }

    #[test]
    fn exchange_conserves_tagged_particles(
        (cells, left, bond) in arb_cells(2).prop_flat_map(|cells| {
            let bonds = cells.len() - 1;
            (Just(cells), -8i64..8, 0..bonds)
        })
    ) {
        let mut cfg = Configuration::from_cells(left, &cells);
        let before = cfg.second_class_count();
        let span = cfg.window_right() - cfg.window_left();
        let x = cfg.window_left() + bond as i64 % span;
        cfg.exchange(x, x + 1).unwrap();
        prop_assert_eq!(cfg.second_class_count(), before);
    }

    #[test]
    fn pattern_parse_format_round_trip(
        body in arb_body(),
        origin_choice in 0usize..12,
    ) {
        // mark an origin somewhere in the body (position 0 stays unmarked,
        // which is the default-origin form)
        let k = origin_choice % body.chars().count();
        let marked: String = body
            .chars()
            .enumerate()
            .flat_map(|(i, c)| {
                if i == k && k != 0 {
                    vec!['_', c]
                } else {
                    vec![c]
                }
            })
            .collect();
        let text = format!("P* {marked} H*");
        let cfg = parse_pattern(&text).unwrap();

        // formatting reproduces the same state
        let formatted = cfg.to_pattern();
        let reparsed = parse_pattern(&formatted).unwrap();
        prop_assert_eq!(&reparsed, &cfg);

        // and the canonical form is a fixed point
        prop_assert_eq!(reparsed.to_pattern(), formatted);
    }

    #[test]
    fn active_bounds_shift_by_at_most_one_per_exchange(
        (cells, bond) in arb_cells(2).prop_flat_map(|cells| {
            let bonds = cells.len() - 1;
            (Just(cells), 0..bonds)
        })
    ) {
        let cfg = Configuration::from_cells(0, &cells);
        let (l, r) = cfg.active_bounds();
        let span = cfg.window_right() - cfg.window_left();
        let x = cfg.window_left() + bond as i64 % span;
        let mut moved = cfg.clone();
        moved.exchange(x, x + 1).unwrap();
        let (l2, r2) = moved.active_bounds();
        prop_assert!((l2 - l).abs() <= 1, "left bound jumped {l} -> {l2}");
        prop_assert!((r2 - r).abs() <= 1, "right bound jumped {r} -> {r2}");
    }

    #[test]
    fn fill_regions_stay_clean_after_parse(body in arb_body()) {
        let cfg = parse_pattern(&format!("P* {body} H*")).unwrap();
        cfg.check_invariants().unwrap();
        let (l, r) = cfg.active_bounds();
        for site in cfg.window_left()..=l {
            prop_assert_eq!(cfg.get(site), SiteState::FirstClass);
        }
        for site in r..=cfg.window_right() {
            prop_assert_eq!(cfg.get(site), SiteState::Hole);
        }
    }
}
