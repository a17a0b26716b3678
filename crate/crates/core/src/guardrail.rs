//! Rule-derived action masks on a live policy.
//!
//! A [`GuardrailSpec`] maps clauses to forbidden actions. At every step the
//! forbidden sets of all firing clauses are united and the greedy action is
//! taken over what remains. If nothing remains the unmasked greedy action is
//! used and the event is counted.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::agent::{agent_observation, evaluate, EvalResult, Policy, QNetwork};
use crate::bdr::{Clause, RuleSet};
use crate::gridworld::{extract_features, Action, EnvState, FeatureFrame, Layout};
use crate::trace::Stage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardEntry {
    pub clause: Clause,
    pub forbidden: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct GuardrailSpec {
    entries: Vec<GuardEntry>,
    source: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    source: String,
    entries: Vec<GuardEntry>,
}

impl From<GuardrailSpec> for SpecRepr {
    fn from(s: GuardrailSpec) -> Self {
        SpecRepr { source: s.source, entries: s.entries }
    }
}

impl TryFrom<SpecRepr> for GuardrailSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        GuardrailSpec::new(r.entries, r.source)
    }
}

impl GuardrailSpec {
    /// Validates and normalizes entries (forbidden lists sorted, deduplicated).
    pub fn new(mut entries: Vec<GuardEntry>, source: impl Into<String>) -> Result<Self> {
        for (index, e) in entries.iter_mut().enumerate() {
            e.forbidden.sort();
            e.forbidden.dedup();
            if e.forbidden.len() == Action::COUNT {
                return Err(Error::ForbidsAll { index });
            }
        }
        Ok(GuardrailSpec { entries, source: source.into() })
    }

    pub fn empty() -> Self {
        GuardrailSpec { entries: Vec::new(), source: "empty".into() }
    }

    pub fn entries(&self) -> &[GuardEntry] {
        &self.entries
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// `forbidden[a]` is true when some firing entry forbids action `a`.
    pub fn mask(&self, frame: &FeatureFrame) -> [bool; Action::COUNT] {
        let mut out = [false; Action::COUNT];
        for e in self.entries.iter().filter(|e| e.clause.holds(frame)) {
            e.forbidden.iter().for_each(|a| out[a.index()] = true);
        }
        out
    }
}

/// How learned clauses become forbidden actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MappingPolicy {
    /// A clause predicting Turn forbids Forward.
    #[default]
    TurnForbidsForward,
}

/// Guardrails from stage-one (Turn) rules.
pub fn compile_guardrails(rules: &RuleSet, mapping: MappingPolicy) -> Result<GuardrailSpec> {
    if rules.stage() != Stage::ForwardVsTurn {
        return Err(Error::InvalidParams(format!(
            "guardrails compile from {} rules, got {}",
            Stage::ForwardVsTurn,
            rules.stage()
        )));
    }
    let MappingPolicy::TurnForbidsForward = mapping;
    let entries = rules.clauses().iter().map(|&clause| GuardEntry { clause, forbidden: vec![Action::Forward] }).collect();
    GuardrailSpec::new(entries, format!("learned: {}", rules.render()))
}

/// Best permitted action, lowest index on ties. The flag is true when every
/// action was forbidden and the unmasked argmax was used instead.
pub fn masked_argmax(values: &[f64; Action::COUNT], forbidden: &[bool; Action::COUNT]) -> (Action, bool) {
    let mut best: Option<usize> = None;
    for i in 0..Action::COUNT {
        if !forbidden[i] && best.map_or(true, |b| values[i] > values[b]) {
            best = Some(i);
        }
    }
    match best {
        Some(i) => (Action::ALL[i], false),
        None => (Action::ALL[crate::agent::argmax(values)], true),
    }
}

pub fn shielded_act(net: &QNetwork, spec: &GuardrailSpec, state: &EnvState) -> Result<(Action, bool)> {
    let q = net.forward(&agent_observation(state))?;
    Ok(masked_argmax(&q, &spec.mask(&extract_features(state))))
}

/// A greedy network behind a guardrail, counting fallbacks.
pub struct Shielded<'a> {
    pub net: &'a QNetwork,
    pub spec: &'a GuardrailSpec,
    fallbacks: AtomicUsize,
}

impl<'a> Shielded<'a> {
    pub fn new(net: &'a QNetwork, spec: &'a GuardrailSpec) -> Self {
        Shielded { net, spec, fallbacks: AtomicUsize::new(0) }
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }
}

impl Policy for Shielded<'_> {
    fn choose(&self, state: &EnvState) -> Result<Action> {
        let (a, fell_back) = shielded_act(self.net, self.spec, state)?;
        if fell_back {
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShieldComparison {
    pub base: EvalResult,
    pub shielded: EvalResult,
    /// Shielded minus base.
    pub delta_success_rate: f64,
    pub delta_lava_rate: f64,
    pub delta_mean_reward: f64,
    /// Steps where every action was forbidden.
    pub fallback_events: usize,
    /// Base-policy steps that walked forward into a wall.
    pub base_wall_bumps: usize,
    pub shielded_wall_bumps: usize,
}

fn wall_bumps<P: Policy + ?Sized>(policy: &P, suite: &[Layout], max_steps: usize) -> Result<usize> {
    let mut bumps = 0;
    for layout in suite {
        crate::agent::run_episode(policy, layout, max_steps, |s, a| {
            if a == Action::Forward && extract_features(s).forward == crate::gridworld::CellKind::Wall {
                bumps += 1;
            }
        })?;
    }
    Ok(bumps)
}

pub fn evaluate_shielded(
    net: &QNetwork,
    spec: &GuardrailSpec,
    suite: &[Layout],
    episodes_per_layout: usize,
    max_steps: usize,
) -> Result<ShieldComparison> {
    let base = evaluate(net, suite, episodes_per_layout, max_steps)?;
    let shield = Shielded::new(net, spec);
    let shielded = evaluate(&shield, suite, episodes_per_layout, max_steps)?;
    let fallback_events = shield.fallbacks();
    Ok(ShieldComparison {
        delta_success_rate: shielded.success_rate - base.success_rate,
        delta_lava_rate: shielded.lava_rate - base.lava_rate,
        delta_mean_reward: shielded.mean_reward - base.mean_reward,
        fallback_events,
        base_wall_bumps: wall_bumps(net, suite, max_steps)?,
        shielded_wall_bumps: wall_bumps(&Shielded::new(net, spec), suite, max_steps)?,
        base,
        shielded,
    })
}

pub fn read_guardrails(path: &Path) -> Result<GuardrailSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_guardrails(spec: &GuardrailSpec, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(spec).expect("guardrails serialize") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdr::Literal;
    use crate::gridworld::{CellKind, Feature};

    fn lava_rule() -> Clause {
        Clause::new(&[Literal::new(Feature::Forward, CellKind::Lava)]).unwrap()
    }

    #[test]
    fn default_mapping() {
        let rules = RuleSet::new(Stage::ForwardVsTurn, vec![lava_rule()]);
        let spec = compile_guardrails(&rules, MappingPolicy::default()).unwrap();
        assert_eq!(spec.entries(), &[GuardEntry { clause: lava_rule(), forbidden: vec![Action::Forward] }]);
        let wall = Clause::new(&[Literal::new(Feature::Forward, CellKind::Wall)]).unwrap();
        let two = compile_guardrails(&RuleSet::new(Stage::ForwardVsTurn, vec![lava_rule(), wall]), MappingPolicy::default())
            .unwrap();
        assert_eq!(two.entries().len(), 2);
        assert!(two.entries().iter().all(|e| e.forbidden == vec![Action::Forward]));
        assert!(compile_guardrails(&RuleSet::new(Stage::LeftVsRight, vec![]), MappingPolicy::default()).is_err());
    }

    #[test]
    fn forbidding_everything_is_rejected() {
        let e = GuardEntry { clause: Clause::EMPTY, forbidden: Action::ALL.to_vec() };
        assert!(matches!(GuardrailSpec::new(vec![e], "manual"), Err(Error::ForbidsAll { index: 0 })));
        let json = r#"{"source":"m","entries":[{"clause":[],"forbidden":["Forward","TurnLeft","TurnRight"]}]}"#;
        assert!(serde_json::from_str::<GuardrailSpec>(json).is_err());
    }

    #[test]
    fn masking_picks_best_permitted() {
        let q = [0.1, 0.3, 0.9];
        assert_eq!(masked_argmax(&q, &[false, false, true]), (Action::TurnRight, false));
        assert_eq!(masked_argmax(&q, &[false; 3]), (Action::Forward, false));
        assert_eq!(masked_argmax(&[0.5, 0.5, 0.9], &[false, false, true]), (Action::TurnLeft, false));
        assert_eq!(masked_argmax(&q, &[true; 3]), (Action::Forward, true));
    }

    #[test]
    fn json_roundtrip() {
        let rules = RuleSet::new(Stage::ForwardVsTurn, vec![lava_rule()]);
        let spec = compile_guardrails(&rules, MappingPolicy::default()).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<GuardrailSpec>(&text).unwrap(), spec);
    }
}
