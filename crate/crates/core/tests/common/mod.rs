#![allow(dead_code)]

use polsum::bdr::{BdrConfig, Clause, Literal};
use polsum::gridworld::{CellKind, Feature, FeatureFrame};
use polsum::trace::{BinaryDataset, Stage};
use rand::Rng;

/// Rows drawn from a small pool of frames (so duplicates with mixed labels
/// occur), labelled by a random planted DNF with 10% label noise.
pub fn random_dataset<R: Rng>(rng: &mut R, max_rows: usize) -> BinaryDataset {
    let pool: Vec<usize> = (0..rng.gen_range(8..60)).map(|_| rng.gen_range(0..1024)).collect();
    let planted: Vec<(usize, usize, Option<(usize, usize)>)> = (0..rng.gen_range(1..4))
        .map(|_| {
            let f = rng.gen_range(0..5);
            let second = rng.gen_bool(0.5).then(|| ((f + rng.gen_range(1..5)) % 5, rng.gen_range(0..4)));
            (f, rng.gen_range(0..4), second)
        })
        .collect();
    let rows = rng.gen_range(1..=max_rows);
    let mut frames = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let frame = FeatureFrame::from_code(pool[rng.gen_range(0..pool.len())]);
        let cells = frame.cells();
        let hit = planted.iter().any(|&(f, v, second)| {
            cells[f].index() == v && second.map_or(true, |(g, w)| cells[g].index() == w)
        });
        labels.push(hit ^ rng.gen_bool(0.1));
        frames.push(frame);
    }
    BinaryDataset::new(Stage::ForwardVsTurn, frames, labels).unwrap()
}

/// Every conjunction of at most two equality literals on distinct features,
/// as (clause, literal list) pairs.
fn small_clauses() -> Vec<(Clause, Vec<(usize, usize)>)> {
    let mut lits: Vec<Vec<(usize, usize)>> = vec![vec![]];
    for f in 0..5 {
        for v in 0..4 {
            lits.push(vec![(f, v)]);
        }
    }
    for f in 0..5 {
        for g in f + 1..5 {
            for v in 0..4 {
                for w in 0..4 {
                    lits.push(vec![(f, v), (g, w)]);
                }
            }
        }
    }
    lits.into_iter()
        .map(|ls| {
            let literals: Vec<Literal> =
                ls.iter().map(|&(f, v)| Literal::new(Feature::ALL[f], CellKind::ALL[v])).collect();
            (Clause::new(&literals).unwrap(), ls)
        })
        .collect()
}

/// Minimum objective over all rule sets of at most `config.max_clauses`
/// (here at most 3) clauses of degree at most 2, by exhaustive enumeration.
/// Near-ties (within 1e-12) go to fewer clauses, then fewer literals.
pub fn brute_force_best(data: &BinaryDataset, config: &BdrConfig) -> (f64, Vec<Clause>) {
    assert!(config.max_degree == 2 && config.max_clauses <= 3);
    let n = data.len();
    let words = n.div_ceil(64).max(1);
    let bits = |pred: &dyn Fn(usize) -> bool| {
        let mut v = vec![0u64; words];
        (0..n).filter(|&i| pred(i)).for_each(|i| v[i / 64] |= 1 << (i % 64));
        v
    };
    let labels = data.labels();
    let pos = bits(&|i| labels[i]);
    let clauses = small_clauses();
    let covers: Vec<Vec<u64>> = clauses
        .iter()
        .map(|(_, ls)| {
            let frames = data.frames();
            bits(&|i| ls.iter().all(|&(f, v)| frames[i].cells()[f].index() == v))
        })
        .collect();
    let eval = |chosen: &[usize]| -> (f64, usize, usize) {
        let mut cover = vec![0u64; words];
        for &c in chosen {
            cover.iter_mut().zip(&covers[c]).for_each(|(a, b)| *a |= b);
        }
        let errors: u32 = cover.iter().zip(&pos).map(|(c, p)| (p & !c).count_ones() + (c & !p).count_ones()).sum();
        let literals: usize = chosen.iter().map(|&c| clauses[c].1.len()).sum();
        let obj = errors as f64 / n as f64 + chosen.len() as f64 * config.lambda0 + literals as f64 * config.lambda1;
        (obj, chosen.len(), literals)
    };
    let mut best = (eval(&[]), vec![]);
    let mut offer = |chosen: &[usize]| {
        let cand = eval(chosen);
        let (b, _) = &best;
        let better = cand.0 < b.0 - 1e-12 || ((cand.0 - b.0).abs() <= 1e-12 && (cand.1, cand.2) < (b.1, b.2));
        if better {
            best = (cand, chosen.to_vec());
        }
    };
    let m = clauses.len();
    for i in 0..m {
        offer(&[i]);
        if config.max_clauses < 2 {
            continue;
        }
        for j in i + 1..m {
            offer(&[i, j]);
            if config.max_clauses < 3 {
                continue;
            }
            for k in j + 1..m {
                offer(&[i, j, k]);
            }
        }
    }
    let ((obj, _, _), chosen) = best;
    (obj, chosen.into_iter().map(|c| clauses[c].0).collect())
}

/// Recounts every reported clause's agreement on the held-out records
/// without using the library's metric code. Stage-one clauses are counted
/// over all records (agree = a turn), stage-two clauses over turn records
/// (agree = TurnRight). Returns mismatches as messages.
pub fn recount_agreement(
    report: &polsum::summary::MetricsReport,
    held_out: &[polsum::trace::TraceRecord],
) -> Vec<String> {
    use polsum::gridworld::Action;
    let mut problems = Vec::new();
    for a in &report.clauses {
        let (mut fires, mut agree) = (0usize, 0usize);
        for r in held_out {
            let turn = r.action != Action::Forward;
            if a.stage == Stage::LeftVsRight && !turn {
                continue;
            }
            let holds = a.clause.literals().iter().all(|l| r.frame.get(l.feature) == l.value);
            if holds {
                fires += 1;
                let positive = match a.stage {
                    Stage::ForwardVsTurn => turn,
                    Stage::LeftVsRight => r.action == Action::TurnRight,
                };
                agree += positive as usize;
            }
        }
        let expected = (fires > 0).then(|| agree as f64 / fires as f64);
        if a.fires != fires || a.agreement != expected {
            problems.push(format!("{}: reported {:?}/{}, recounted {:?}/{}", a.clause, a.agreement, a.fires, expected, fires));
        }
        if let (Some(x), Some(y)) = (a.agreement, a.disagreement) {
            if x + y != 1.0 {
                problems.push(format!("{}: agreement {x} + disagreement {y} != 1", a.clause));
            }
        } else if a.agreement.is_some() != a.disagreement.is_some() {
            problems.push(format!("{}: agreement and disagreement disagree on being defined", a.clause));
        }
    }
    problems
}

/// Accuracy of a stage's rules on records, recounted from scratch.
pub fn recount_accuracy(
    rules: &polsum::bdr::RuleSet,
    records: &[polsum::trace::TraceRecord],
) -> f64 {
    use polsum::gridworld::Action;
    let stage = rules.stage();
    let rows: Vec<_> = records
        .iter()
        .filter(|r| stage == Stage::ForwardVsTurn || r.action != Action::Forward)
        .collect();
    let correct = rows
        .iter()
        .filter(|r| {
            let predicted = rules.clauses().iter().any(|c| c.literals().iter().all(|l| r.frame.get(l.feature) == l.value));
            let actual = match stage {
                Stage::ForwardVsTurn => r.action != Action::Forward,
                Stage::LeftVsRight => r.action == Action::TurnRight,
            };
            predicted == actual
        })
        .count();
    correct as f64 / rows.len() as f64
}
