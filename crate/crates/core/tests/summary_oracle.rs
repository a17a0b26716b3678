use polsum::bdr::BdrConfig;
use polsum::gridworld::{Action, CellKind, FeatureFrame};
use polsum::summary::{learn_rules, metrics, SplitSpec};
use polsum::trace::{Stage, TraceRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

/// A noisy scripted policy: turn at lava or walls ahead, prefer right when
/// the goal is on the right, otherwise mostly forward.
fn noisy_trace(seed: u64, n: usize) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let frame = FeatureFrame::from_code(rng.gen_range(0..1024));
            let blocked = matches!(frame.forward, CellKind::Lava | CellKind::Wall);
            let mut action = if blocked {
                if frame.right == CellKind::Goal || rng.gen_bool(0.3) { Action::TurnRight } else { Action::TurnLeft }
            } else {
                Action::Forward
            };
            if rng.gen_bool(0.1) {
                action = Action::ALL[rng.gen_range(0..3)];
            }
            TraceRecord { run_seed: 1, episode: i, step: 0, layout_hash: i as u64, frame, action }
        })
        .collect()
}

#[test]
fn reported_metrics_match_a_recount() {
    for seed in 0..4 {
        let records = noisy_trace(seed, 1500);
        let split = SplitSpec::default();
        let doc = learn_rules(&records, &BdrConfig::default(), &split, String::new()).unwrap();
        let model = doc.model().unwrap();
        let report = metrics(&model, &records, &split).unwrap();
        let (_, held_out) = split.split(&records).unwrap();
        let problems = common::recount_agreement(&report, &held_out);
        assert!(problems.is_empty(), "{problems:?}");
        for stage in Stage::ALL {
            let recount = common::recount_accuracy(model.rules(stage), &held_out);
            assert_eq!(report.test_stage(stage).accuracy, recount);
        }
        assert!(report.test_stage(Stage::ForwardVsTurn).accuracy > 0.85);
    }
}

#[test]
fn stage_two_never_sees_forward_records() {
    let records = noisy_trace(9, 800);
    let split = SplitSpec::default();
    let doc = learn_rules(&records, &BdrConfig::default(), &split, String::new()).unwrap();
    let (fitting, held_out) = split.split(&records).unwrap();
    let turns = |rs: &[TraceRecord]| rs.iter().filter(|r| r.action.is_turn()).count();
    assert_eq!(doc.stage2.samples, turns(&fitting));
    let report = metrics(&doc.model().unwrap(), &records, &split).unwrap();
    assert_eq!(report.test_stage(Stage::LeftVsRight).samples, turns(&held_out));
    assert_eq!(report.test_stage(Stage::ForwardVsTurn).samples, held_out.len());
}
