//! Independent checks of the rule learner against brute force.

use polsum::bdr::{fit, fit_report, objective, reduced_cost, BdrConfig, Clause, RuleSet};
use polsum::gridworld::{CellKind, FeatureFrame};
use polsum::trace::{BinaryDataset, Stage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_force_best, random_dataset};

#[test]
fn fit_matches_brute_force_on_small_datasets() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 120);
        let config = BdrConfig { max_degree: 2, max_clauses: 3, ..BdrConfig::default() };
        let rules = fit(&data, &config).unwrap();
        let best = brute_force_best(&data, &config);
        assert_eq!(objective(&rules, &data, &config), best.0, "seed {seed}: fit {} vs oracle {:?}", rules.render(), best.1);
    }
}

#[test]
fn pricing_certificate_holds_after_convergence() {
    for seed in 100..110u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 150);
        let config = BdrConfig::default();
        let rep = fit_report(&data, &config).unwrap();
        assert!(rep.converged);
        for k in Clause::enumerate(config.max_degree) {
            assert!(reduced_cost(k, &rep.master.duals, &data, &config) >= -1e-9, "seed {seed}: {k}");
        }
    }
}

fn planted(rule: impl Fn(&FeatureFrame) -> bool) -> BinaryDataset {
    let frames: Vec<FeatureFrame> = FeatureFrame::all().collect();
    let labels = frames.iter().map(&rule).collect();
    BinaryDataset::new(Stage::ForwardVsTurn, frames, labels).unwrap()
}

#[test]
fn planted_rules_are_recovered() {
    let lava = planted(|f| f.forward == CellKind::Lava);
    assert_eq!(fit(&lava, &BdrConfig::default()).unwrap().render(), "IF (forward == Lava) THEN action==TURN");
    let example = planted(|f| f.forward == CellKind::Lava || (f.forward == CellKind::Wall && f.left == CellKind::Empty));
    assert_eq!(
        fit(&example, &BdrConfig::default()).unwrap().render(),
        "IF (forward == Lava) OR (left == Empty AND forward == Wall) THEN action==TURN"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn master_bound_sequence_never_increases(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 80);
        let rep = fit_report(&data, &BdrConfig::default()).unwrap();
        for w in rep.lp_objectives.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", rep.lp_objectives);
        }
        // the relaxation bounds the integral optimum from below
        prop_assert!(*rep.lp_objectives.last().unwrap() <= rep.objective + 1e-9);
    }

    #[test]
    fn fit_beats_every_single_clause(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 60);
        let config = BdrConfig::default();
        let got = objective(&fit(&data, &config).unwrap(), &data, &config);
        prop_assert!(got <= objective(&RuleSet::empty(Stage::ForwardVsTurn), &data, &config));
        for k in Clause::enumerate(2) {
            prop_assert!(got <= objective(&RuleSet::new(Stage::ForwardVsTurn, vec![k]), &data, &config) + 1e-12);
        }
    }

    #[test]
    fn adding_a_clause_only_adds_positives(mask in 0u32..(1 << 20), extra in 0u32..(1 << 20), code in 0usize..1024) {
        let (Some(a), Some(b)) = (Clause::from_mask(mask), Clause::from_mask(extra)) else { return Ok(()) };
        let frame = FeatureFrame::from_code(code);
        let small = RuleSet::new(Stage::ForwardVsTurn, vec![a]);
        let big = RuleSet::new(Stage::ForwardVsTurn, vec![a, b]);
        prop_assert!(!small.predict(&frame) || big.predict(&frame));
    }

    #[test]
    fn canonical_form_is_idempotent(masks in proptest::collection::vec(0u32..(1 << 20), 0..6)) {
        let clauses: Vec<Clause> = masks.into_iter().filter_map(Clause::from_mask).collect();
        let once = RuleSet::new(Stage::LeftVsRight, clauses.clone());
        let twice = RuleSet::new(Stage::LeftVsRight, once.clauses().to_vec());
        prop_assert_eq!(&once, &twice);
        for code in (0..1024).step_by(7) {
            let f = FeatureFrame::from_code(code);
            prop_assert_eq!(once.predict(&f), clauses.iter().any(|c| c.holds(&f)));
        }
    }
}

#[test]
fn random_labels_still_give_valid_rule_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frames: Vec<FeatureFrame> = (0..200).map(|_| FeatureFrame::from_code(rng.gen_range(0..1024))).collect();
    let labels = (0..200).map(|_| rng.gen_bool(0.5)).collect();
    let data = BinaryDataset::new(Stage::LeftVsRight, frames, labels).unwrap();
    let config = BdrConfig::default();
    let rules = fit(&data, &config).unwrap();
    assert!(rules.clauses().len() <= config.max_clauses);
    assert!(rules.clauses().iter().all(|c| c.degree() <= config.max_degree));
}
