//! Two-stage action summaries and their metrics.
//!
//! Stage one predicts Forward versus Turn over every record; stage two
//! predicts TurnLeft versus TurnRight over turn records only. Rule metrics
//! are reported separately for the fitting split and the held-out split.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::EvalResult;
use crate::bdr::{fit_report, BdrConfig, Clause, RuleSet};
use crate::gridworld::{Action, FeatureFrame};
use crate::trace::{binarize, Stage, TraceRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageModel {
    /// Positive class Turn.
    pub stage1: RuleSet,
    /// Positive class TurnRight.
    pub stage2: RuleSet,
}

impl StageModel {
    pub fn new(stage1: RuleSet, stage2: RuleSet) -> Result<Self> {
        if stage1.stage() != Stage::ForwardVsTurn || stage2.stage() != Stage::LeftVsRight {
            return Err(Error::InvalidParams(format!(
                "stage model needs ForwardVsTurn then LeftVsRight rules, got {} and {}",
                stage1.stage(),
                stage2.stage()
            )));
        }
        Ok(StageModel { stage1, stage2 })
    }

    pub fn rules(&self, stage: Stage) -> &RuleSet {
        match stage {
            Stage::ForwardVsTurn => &self.stage1,
            Stage::LeftVsRight => &self.stage2,
        }
    }

    pub fn predict_action(&self, frame: &FeatureFrame) -> Action {
        if !self.stage1.predict(frame) {
            Action::Forward
        } else if self.stage2.predict(frame) {
            Action::TurnRight
        } else {
            Action::TurnLeft
        }
    }
}

/// Per-stage fitting outcome kept alongside the rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFit {
    pub rules: RuleSet,
    pub objective: f64,
    pub samples: usize,
    pub cg_iterations: usize,
    pub cg_converged: bool,
}

/// Fits both stages. Needs at least one Forward and one turn record; stage
/// two may be single-class (then the empty clause or the empty rule set is
/// the natural answer).
pub fn fit_stages(records: &[TraceRecord], config: &BdrConfig) -> Result<(StageFit, StageFit)> {
    if !records.iter().any(|r| r.action.is_turn()) {
        return Err(Error::SingleClass { stage: Stage::LeftVsRight.name(), detail: "no turn records".into() });
    }
    if records.iter().all(|r| r.action.is_turn()) {
        return Err(Error::SingleClass { stage: Stage::ForwardVsTurn.name(), detail: "no Forward records".into() });
    }
    let fit_stage = |stage| -> Result<StageFit> {
        let data = binarize(records, stage)?;
        let rep = fit_report(&data, config)?;
        Ok(StageFit {
            rules: rep.rules,
            objective: rep.objective,
            samples: data.len(),
            cg_iterations: rep.lp_objectives.len(),
            cg_converged: rep.converged,
        })
    };
    Ok((fit_stage(Stage::ForwardVsTurn)?, fit_stage(Stage::LeftVsRight)?))
}

pub fn fit_two_stage(records: &[TraceRecord], config: &BdrConfig) -> Result<StageModel> {
    let (s1, s2) = fit_stages(records, config)?;
    StageModel::new(s1.rules, s2.rules)
}

/// How records were divided into fitting and held-out parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Fraction of records held out, in `(0, 1)`.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { test_fraction: 0.2, seed: 7 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParams(format!("test_fraction must be in (0, 1), got {}", self.test_fraction)));
        }
        Ok(())
    }

    /// Record-level shuffle, then the first `round(n * test_fraction)`
    /// records are held out. Both parts keep the original record order.
    pub fn split(&self, records: &[TraceRecord]) -> Result<(Vec<TraceRecord>, Vec<TraceRecord>)> {
        self.validate()?;
        let mut idx: Vec<usize> = (0..records.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let n_test = (records.len() as f64 * self.test_fraction).round() as usize;
        let mut held = vec![false; records.len()];
        idx[..n_test].iter().for_each(|&i| held[i] = true);
        let (test, train): (Vec<_>, Vec<_>) = records.iter().zip(&held).partition(|(_, &h)| h);
        Ok((train.into_iter().map(|(r, _)| *r).collect(), test.into_iter().map(|(r, _)| *r).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: Stage,
    pub samples: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl StageMetrics {
    pub fn from_counts(stage: Stage, true_pos: usize, false_pos: usize, true_neg: usize, false_neg: usize) -> Self {
        let samples = true_pos + false_pos + true_neg + false_neg;
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        StageMetrics {
            stage,
            samples,
            accuracy: ratio(true_pos + true_neg, samples),
            precision,
            recall,
            f1,
            true_pos,
            false_pos,
            true_neg,
            false_neg,
        }
    }
}

/// Confusion counts of one stage's rules on the records that stage sees.
pub fn stage_metrics(rules: &RuleSet, records: &[TraceRecord]) -> StageMetrics {
    let stage = rules.stage();
    let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
    for r in records.iter().filter(|r| stage.includes(r.action)) {
        match (rules.predict(&r.frame), stage.label(r.action)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    StageMetrics::from_counts(stage, tp, fp, tn, fneg)
}

/// How often the agent's action agrees with a clause where it fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub stage: Stage,
    pub clause: Clause,
    pub fires: usize,
    /// `None` when the clause never fires.
    pub agreement: Option<f64>,
    pub disagreement: Option<f64>,
}

pub fn agreement(clause: Clause, stage: Stage, records: &[TraceRecord]) -> Agreement {
    let (mut fires, mut agree) = (0usize, 0usize);
    for r in records.iter().filter(|r| stage.includes(r.action)) {
        if clause.holds(&r.frame) {
            fires += 1;
            agree += stage.label(r.action) as usize;
        }
    }
    let agreement = (fires > 0).then(|| agree as f64 / fires as f64);
    Agreement { stage, clause, fires, agreement, disagreement: agreement.map(|a| 1.0 - a) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescriptor {
    pub test_fraction: f64,
    pub seed: u64,
    pub train_records: usize,
    pub test_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: SplitDescriptor,
    /// Stage 1 then stage 2, on the fitting split.
    pub train: Vec<StageMetrics>,
    /// Stage 1 then stage 2, on the held-out split.
    pub test: Vec<StageMetrics>,
    /// Every clause of both stages, measured on the held-out split.
    pub clauses: Vec<Agreement>,
}

impl MetricsReport {
    pub fn test_stage(&self, stage: Stage) -> &StageMetrics {
        self.test.iter().find(|m| m.stage == stage).expect("both stages are reported")
    }
}

pub fn metrics(model: &StageModel, records: &[TraceRecord], split: &SplitSpec) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::Empty("trace records".into()));
    }
    let (train, test) = split.split(records)?;
    let per_stage = |rs: &[TraceRecord]| Stage::ALL.iter().map(|&s| stage_metrics(model.rules(s), rs)).collect();
    let clauses = Stage::ALL
        .iter()
        .flat_map(|&s| model.rules(s).clauses().iter().map(move |&c| (c, s)))
        .map(|(c, s)| agreement(c, s, &test))
        .collect();
    Ok(MetricsReport {
        split: SplitDescriptor {
            test_fraction: split.test_fraction,
            seed: split.seed,
            train_records: train.len(),
            test_records: test.len(),
        },
        train: per_stage(&train),
        test: per_stage(&test),
        clauses,
    })
}

/// Output of rule learning: both fitted stages plus what produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesDocument {
    pub stage1: StageFit,
    pub stage2: StageFit,
    pub bdr: BdrConfig,
    pub split: SplitSpec,
    /// SHA-256 of the trace file the rules were fitted on.
    pub trace_sha256: String,
}

impl RulesDocument {
    pub fn model(&self) -> Result<StageModel> {
        StageModel::new(self.stage1.rules.clone(), self.stage2.rules.clone())
    }
}

/// Fits both stages on the fitting part of `split`.
pub fn learn_rules(records: &[TraceRecord], bdr: &BdrConfig, split: &SplitSpec, trace_sha256: String) -> Result<RulesDocument> {
    let (train, _) = split.split(records)?;
    let (stage1, stage2) = fit_stages(&train, bdr)?;
    Ok(RulesDocument { stage1, stage2, bdr: bdr.clone(), split: *split, trace_sha256 })
}

/// Greedy performance of one trained agent on the evaluation suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub run_seed: u64,
    pub eval: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: StageModel,
    pub metrics: MetricsReport,
    pub bdr: BdrConfig,
    pub trace_sha256: String,
    pub trace_records: usize,
    /// Empty when no evaluation results were supplied.
    #[serde(default)]
    pub agents: Vec<AgentRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

fn fraction(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Text => render_text(report),
    }
}

fn render_text(report: &Report) -> String {
    let m = &report.metrics;
    let mut out = String::new();
    let _ = writeln!(out, "Decision rules");
    for stage in Stage::ALL {
        let _ = writeln!(out, "  {}", report.model.rules(stage).render());
    }
    let _ = writeln!(
        out,
        "\nTrace: {} records, sha256 {}\nSplit: {} fitting / {} held-out records (held-out fraction {}, seed {})",
        report.trace_records, report.trace_sha256, m.split.train_records, m.split.test_records, m.split.test_fraction, m.split.seed
    );
    let _ = writeln!(out, "\nHeld-out metrics");
    let header = ["Action", "Rule accuracy", "F1", "Rule", "Agreement", "Disagreement"];
    let mut rows: Vec<[String; 6]> = Vec::new();
    for stage in Stage::ALL {
        let sm = m.test_stage(stage);
        let clauses: Vec<&Agreement> = m.clauses.iter().filter(|a| a.stage == stage).collect();
        let head = [stage.positive_label().to_string(), format!("{:.1}%", sm.accuracy * 100.0), format!("{:.2}", sm.f1)];
        if clauses.is_empty() {
            rows.push([head[0].clone(), head[1].clone(), head[2].clone(), "(none)".into(), "n/a".into(), "n/a".into()]);
        }
        for (i, a) in clauses.iter().enumerate() {
            let lead = if i == 0 { head.clone() } else { Default::default() };
            let [x, y, z] = lead;
            rows.push([x, y, z, a.clause.to_string(), fraction(a.agreement), fraction(a.disagreement)]);
        }
    }
    let widths: Vec<usize> =
        (0..6).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join(" | ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for r in &rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
    if !report.agents.is_empty() {
        let _ = writeln!(out, "\nAgents (evaluation suite)");
        for a in &report.agents {
            let e = &a.eval;
            let _ = writeln!(
                out,
                "  seed {:<4} success {:.1}%  lava {:.1}%  timeout {:.1}%  mean reward {:.3} +/- {:.3}  ({} episodes)",
                a.run_seed,
                e.success_rate * 100.0,
                e.lava_rate * 100.0,
                e.timeout_rate * 100.0,
                e.mean_reward,
                e.reward_stddev,
                e.episodes
            );
        }
    }
    let _ = writeln!(out, "\nPer-stage detail (accuracy / F1 / samples)");
    for (name, set) in [("fitting", &m.train), ("held-out", &m.test)] {
        for sm in set {
            let _ = writeln!(
                out,
                "  {name:<8} {:<13} {:.4} / {:.4} / {}",
                sm.stage.name(),
                sm.accuracy,
                sm.f1,
                sm.samples
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdr::Literal;
    use crate::gridworld::{CellKind, Feature};
    use CellKind::*;

    fn rec(frame: [CellKind; 5], action: Action) -> TraceRecord {
        TraceRecord { run_seed: 1, episode: 0, step: 0, layout_hash: 1, frame: FeatureFrame::from_cells(frame), action }
    }

    fn clause(lits: &[(Feature, CellKind)]) -> Clause {
        Clause::new(&lits.iter().map(|&(f, v)| Literal::new(f, v)).collect::<Vec<_>>()).unwrap()
    }

    fn model(s1: &[Clause], s2: &[Clause]) -> StageModel {
        StageModel::new(RuleSet::new(Stage::ForwardVsTurn, s1.to_vec()), RuleSet::new(Stage::LeftVsRight, s2.to_vec()))
            .unwrap()
    }

    #[test]
    fn composition() {
        let m = model(&[clause(&[(Feature::Forward, Lava)])], &[clause(&[(Feature::Right, Goal)])]);
        assert_eq!(m.predict_action(&FeatureFrame::from_cells([Empty, Goal, Lava, Empty, Empty])), Action::TurnRight);
        assert_eq!(m.predict_action(&FeatureFrame::from_cells([Empty, Empty, Lava, Empty, Empty])), Action::TurnLeft);
        assert_eq!(m.predict_action(&FeatureFrame::from_cells([Empty, Goal, Wall, Empty, Empty])), Action::Forward);
        assert!(StageModel::new(m.stage2.clone(), m.stage1.clone()).is_err());
    }

    #[test]
    fn hand_computed_confusion() {
        // stage 1 rule: forward == Lava
        let m = model(&[clause(&[(Feature::Forward, Lava)])], &[clause(&[(Feature::Right, Empty)])]);
        let l = [Empty, Empty, Lava, Empty, Empty];
        let w = [Empty, Wall, Wall, Empty, Empty];
        let records = vec![
            rec(l, Action::TurnRight), // s1 TP, s2 TP
            rec(l, Action::TurnLeft),  // s1 TP, s2 FP
            rec(l, Action::Forward),   // s1 FP
            rec(w, Action::TurnLeft),  // s1 FN, s2 TN
            rec(w, Action::TurnRight), // s1 FN, s2 FN
            rec(w, Action::Forward),   // s1 TN
            rec(w, Action::Forward),   // s1 TN
            rec(l, Action::TurnRight), // s1 TP, s2 TP
            rec(w, Action::Forward),   // s1 TN
            rec(l, Action::TurnLeft),  // s1 TP, s2 FP
        ];
        let s1 = stage_metrics(&m.stage1, &records);
        assert_eq!((s1.true_pos, s1.false_pos, s1.true_neg, s1.false_neg), (4, 1, 3, 2));
        assert_eq!(s1.accuracy, 0.7);
        // P = 4/5, R = 4/6
        assert!((s1.f1 - 2.0 * 0.8 * (4.0 / 6.0) / (0.8 + 4.0 / 6.0)).abs() < 1e-15);
        let s2 = stage_metrics(&m.stage2, &records);
        assert_eq!((s2.samples, s2.true_pos, s2.false_pos, s2.true_neg, s2.false_neg), (6, 2, 2, 1, 1));
        assert_eq!(s2.accuracy, 0.5);
        // P = 1/2, R = 2/3
        assert!((s2.f1 - 4.0 / 7.0).abs() < 1e-15);

        let a = agreement(clause(&[(Feature::Forward, Lava)]), Stage::ForwardVsTurn, &records);
        assert_eq!((a.fires, a.agreement), (5, Some(0.8)));
        let a = agreement(clause(&[(Feature::Forward, Goal)]), Stage::ForwardVsTurn, &records);
        assert_eq!((a.fires, a.agreement, a.disagreement), (0, None, None));
    }

    #[test]
    fn perfect_model_scores_one() {
        let m = model(&[clause(&[(Feature::Forward, Lava)])], &[clause(&[(Feature::Left, Wall)])]);
        let records: Vec<TraceRecord> = FeatureFrame::all().map(|f| rec(f.cells(), m.predict_action(&f))).collect();
        for s in Stage::ALL {
            let sm = stage_metrics(m.rules(s), &records);
            assert_eq!((sm.accuracy, sm.f1), (1.0, 1.0));
        }
    }

    #[test]
    fn f1_is_zero_without_positive_predictions() {
        let sm = StageMetrics::from_counts(Stage::ForwardVsTurn, 0, 0, 5, 3);
        assert_eq!((sm.f1, sm.precision, sm.recall), (0.0, 0.0, 0.0));
    }

    #[test]
    fn synthetic_policy_recovery() {
        let records: Vec<TraceRecord> = FeatureFrame::all()
            .map(|f| rec(f.cells(), if f.forward == Lava { Action::TurnRight } else { Action::Forward }))
            .collect();
        let m = fit_two_stage(&records, &BdrConfig::default()).unwrap();
        assert_eq!(m.stage1.render(), "IF (forward == Lava) THEN action==TURN");
        assert_eq!(m.stage2.clauses(), &[Clause::EMPTY]);
    }

    #[test]
    fn single_class_errors_name_the_stage() {
        let forward: Vec<TraceRecord> = (0..5).map(|_| rec([Empty; 5], Action::Forward)).collect();
        let e = fit_two_stage(&forward, &BdrConfig::default()).unwrap_err().to_string();
        assert!(e.contains("LeftVsRight"), "{e}");
        assert!(fit_two_stage(&[], &BdrConfig::default()).unwrap_err().to_string().contains("LeftVsRight"));
        let turns: Vec<TraceRecord> = (0..5).map(|_| rec([Empty; 5], Action::TurnLeft)).collect();
        assert!(fit_two_stage(&turns, &BdrConfig::default()).unwrap_err().to_string().contains("ForwardVsTurn"));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let records: Vec<TraceRecord> =
            (0..101).map(|i| TraceRecord { step: i, ..rec([Empty; 5], Action::Forward) }).collect();
        let spec = SplitSpec::default();
        let (a, b) = spec.split(&records).unwrap();
        assert_eq!((a.len(), b.len()), (81, 20));
        assert_eq!(spec.split(&records).unwrap(), (a.clone(), b.clone()));
        let mut steps: Vec<usize> = a.iter().chain(&b).map(|r| r.step).collect();
        steps.sort();
        assert_eq!(steps, (0..101).collect::<Vec<_>>());
        assert!(SplitSpec { test_fraction: 1.0, seed: 0 }.split(&records).is_err());
    }

    #[test]
    fn text_and_json_share_clauses() {
        let m = model(&[clause(&[(Feature::Forward, Lava)])], &[clause(&[(Feature::Right, Goal)])]);
        let records: Vec<TraceRecord> = FeatureFrame::all().map(|f| rec(f.cells(), m.predict_action(&f))).collect();
        let metrics = metrics(&m, &records, &SplitSpec::default()).unwrap();
        let report = Report {
            model: m.clone(),
            metrics,
            bdr: BdrConfig::default(),
            trace_sha256: "00".into(),
            trace_records: records.len(),
            agents: vec![],
        };
        let text = render_report(&report, ReportFormat::Text);
        assert_eq!(text.matches("IF (forward == Lava) THEN action==TURN").count(), 1);
        assert!(text.contains("IF (right == Goal) THEN action==RIGHT"));
        let json: serde_json::Value = serde_json::from_str(&render_report(&report, ReportFormat::Json)).unwrap();
        let back: Report = serde_json::from_value(json).unwrap();
        assert_eq!(back.model, m);
        for a in &back.metrics.clauses {
            assert!(text.contains(&a.clause.to_string()));
        }
    }
}
