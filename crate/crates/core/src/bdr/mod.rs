//! Boolean decision rules: DNF rule sets over `(feature == value)` literals,
//! fitted by column generation.
//!
//! The fitted objective is the Hamming loss plus a complexity penalty,
//!
//! ```text
//! (FN + FP) / n  +  sum over clauses (lambda0 + lambda1 * degree)
//! ```
//!
//! The linear relaxation is solved over a growing clause pool whose new
//! members come from exhaustive pricing over every clause up to
//! `max_degree`. The final rule set is then chosen by exact branch and bound
//! over the whole clause space, warm-started from the best subset of the
//! pool.

mod lp;
mod master;
mod select;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gridworld::{CellKind, Feature, FeatureFrame};
use crate::trace::{row_mask, BinaryDataset, Stage};
use crate::{Error, Result};

pub use master::{price_clause, reduced_cost, solve_master, MasterSolution, PRICING_TOL};

/// 5 features x 4 cell kinds.
pub const NUM_COLUMNS: usize = 20;

/// Objective values closer than this are treated as equal when breaking ties.
pub const OBJECTIVE_TIE: f64 = 1e-12;

/// A single `feature == value` test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub feature: Feature,
    pub value: CellKind,
}

impl Literal {
    pub fn new(feature: Feature, value: CellKind) -> Self {
        Literal { feature, value }
    }

    pub fn column(self) -> usize {
        self.feature.index() * 4 + self.value.index()
    }

    pub fn from_column(c: usize) -> Option<Self> {
        (c < NUM_COLUMNS).then(|| Literal::new(Feature::ALL[c / 4], CellKind::ALL[c % 4]))
    }

    pub fn all() -> [Literal; NUM_COLUMNS] {
        std::array::from_fn(|c| Literal::from_column(c).unwrap())
    }

    pub fn holds(self, frame: &FeatureFrame) -> bool {
        frame.get(self.feature) == self.value
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} == {}", self.feature, self.value)
    }
}

/// A conjunction of literals, at most one per feature, stored as a column
/// bitmask. Ordered by degree, then lexicographically by sorted columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    mask: u32,
}

impl Clause {
    /// The degree-0 clause, true on every frame.
    pub const EMPTY: Clause = Clause { mask: 0 };

    pub fn new(literals: &[Literal]) -> Result<Self> {
        let mut mask = 0u32;
        for l in literals {
            let group = 0b1111 << (l.feature.index() * 4);
            let bit = 1 << l.column();
            if mask & group != 0 && mask & bit == 0 {
                return Err(Error::InvalidParams(format!(
                    "clause tests feature `{}` against two different values",
                    l.feature
                )));
            }
            mask |= bit;
        }
        Ok(Clause { mask })
    }

    /// A clause from its column bitmask, if the mask is well formed.
    pub fn from_mask(mask: u32) -> Option<Self> {
        let ok = mask < 1 << NUM_COLUMNS && (0..5).all(|f| (mask >> (4 * f) & 0b1111).count_ones() <= 1);
        ok.then_some(Clause { mask })
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn degree(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn columns(self) -> Vec<usize> {
        (0..NUM_COLUMNS).filter(|c| self.mask >> c & 1 == 1).collect()
    }

    pub fn literals(self) -> Vec<Literal> {
        self.columns().into_iter().filter_map(Literal::from_column).collect()
    }

    /// Whether the clause holds on a one-hot row given as a column bitmask.
    pub fn covers(self, row: u32) -> bool {
        row & self.mask == self.mask
    }

    pub fn holds(self, frame: &FeatureFrame) -> bool {
        self.covers(row_mask(frame))
    }

    /// True if every literal of `self` also appears in `other`, in which
    /// case `other` covers a subset of what `self` covers.
    pub fn generalizes(self, other: Clause) -> bool {
        other.mask & self.mask == self.mask
    }

    /// Every well-formed clause with degree `<= max_degree`, in clause order.
    pub fn enumerate(max_degree: usize) -> Vec<Clause> {
        let mut out = vec![Clause::EMPTY];
        // choose a subset of features, then one value for each
        for features in 1u32..32 {
            let k = features.count_ones() as usize;
            if k > max_degree {
                continue;
            }
            let chosen: Vec<usize> = (0..5).filter(|f| features >> f & 1 == 1).collect();
            for values in 0..4usize.pow(k as u32) {
                let mask = chosen.iter().enumerate().map(|(i, &f)| 1u32 << (4 * f + (values >> (2 * i)) % 4)).sum();
                out.push(Clause { mask });
            }
        }
        out.sort();
        out
    }
}

impl Ord for Clause {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.columns().cmp(&other.columns()))
    }
}

impl PartialOrd for Clause {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mask == 0 {
            return f.write_str("TRUE");
        }
        let parts: Vec<String> = self.literals().iter().map(Literal::to_string).collect();
        f.write_str(&parts.join(" AND "))
    }
}

impl Serialize for Clause {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.literals().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Clause {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lits = Vec::<Literal>::deserialize(d)?;
        Clause::new(&lits).map_err(serde::de::Error::custom)
    }
}

/// A DNF: predicts the stage's positive class iff some clause holds.
///
/// Kept canonical: clauses sorted, no duplicates, and no clause that is
/// implied by (is more specific than) another member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RuleSetRepr", into = "RuleSetRepr")]
pub struct RuleSet {
    stage: Stage,
    clauses: Vec<Clause>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetRepr {
    stage: Stage,
    positive_label: String,
    clauses: Vec<Clause>,
}

impl From<RuleSet> for RuleSetRepr {
    fn from(r: RuleSet) -> Self {
        RuleSetRepr { stage: r.stage, positive_label: r.stage.positive_label().into(), clauses: r.clauses }
    }
}

impl TryFrom<RuleSetRepr> for RuleSet {
    type Error = String;

    fn try_from(r: RuleSetRepr) -> std::result::Result<Self, String> {
        if r.positive_label != r.stage.positive_label() {
            return Err(format!("positive_label `{}` does not match stage {}", r.positive_label, r.stage));
        }
        Ok(RuleSet::new(r.stage, r.clauses))
    }
}

impl RuleSet {
    pub fn new(stage: Stage, mut clauses: Vec<Clause>) -> Self {
        clauses.sort();
        clauses.dedup();
        let kept = clauses
            .iter()
            .filter(|c| !clauses.iter().any(|o| o != *c && o.generalizes(**c)))
            .copied()
            .collect();
        RuleSet { stage, clauses: kept }
    }

    pub fn empty(stage: Stage) -> Self {
        RuleSet { stage, clauses: Vec::new() }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn positive_label(&self) -> &'static str {
        self.stage.positive_label()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(|c| c.degree()).sum()
    }

    pub fn predict(&self, frame: &FeatureFrame) -> bool {
        let row = row_mask(frame);
        self.clauses.iter().any(|c| c.covers(row))
    }

    /// `IF (a == x AND b == y) OR (...) THEN action==LABEL`.
    pub fn render(&self) -> String {
        let body = if self.clauses.is_empty() {
            "FALSE".to_string()
        } else {
            self.clauses.iter().map(|c| format!("({c})")).collect::<Vec<_>>().join(" OR ")
        };
        format!("IF {body} THEN action=={}", self.positive_label().to_uppercase())
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BdrConfig {
    /// Penalty per clause.
    pub lambda0: f64,
    /// Penalty per literal.
    pub lambda1: f64,
    pub max_degree: usize,
    pub max_clauses: usize,
    pub max_cg_iterations: usize,
}

impl Default for BdrConfig {
    fn default() -> Self {
        BdrConfig { lambda0: 0.001, lambda1: 0.001, max_degree: 3, max_clauses: 4, max_cg_iterations: 50 }
    }
}

impl BdrConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite() && self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad(format!("lambdas must be finite and >= 0, got {} and {}", self.lambda0, self.lambda1));
        }
        if self.max_degree > Feature::ALL.len() {
            return bad(format!("max_degree {} exceeds the {} features", self.max_degree, Feature::ALL.len()));
        }
        if self.max_clauses == 0 || self.max_cg_iterations == 0 {
            return bad("max_clauses and max_cg_iterations must be positive".into());
        }
        Ok(())
    }

    pub fn clause_cost(&self, clause: Clause) -> f64 {
        self.lambda0 + self.lambda1 * clause.degree() as f64
    }

    /// Objective from its integer ingredients. Every objective value in this
    /// module goes through here so equal rule sets compare bit-equal.
    pub fn objective_from_counts(&self, errors: usize, n: usize, clauses: usize, literals: usize) -> f64 {
        errors as f64 / n.max(1) as f64 + clauses as f64 * self.lambda0 + literals as f64 * self.lambda1
    }
}

/// Misclassified rows: uncovered positives plus covered negatives.
pub fn errors(rules: &RuleSet, dataset: &BinaryDataset) -> usize {
    dataset.frames().iter().zip(dataset.labels()).filter(|(f, &l)| rules.predict(f) != l).count()
}

pub fn objective(rules: &RuleSet, dataset: &BinaryDataset, config: &BdrConfig) -> f64 {
    config.objective_from_counts(errors(rules, dataset), dataset.len(), rules.clauses().len(), rules.num_literals())
}

/// Total order used to pick among optimal rule sets: objective (within
/// [`OBJECTIVE_TIE`]), then fewer clauses, fewer literals, then the sorted
/// clause lists compared lexicographically.
pub fn compare_candidates(a: (f64, &[Clause]), b: (f64, &[Clause])) -> Ordering {
    if (a.0 - b.0).abs() > OBJECTIVE_TIE {
        return a.0.total_cmp(&b.0);
    }
    let lits = |c: &[Clause]| c.iter().map(|k| k.degree()).sum::<usize>();
    a.1.len().cmp(&b.1.len()).then(lits(a.1).cmp(&lits(b.1))).then_with(|| a.1.cmp(b.1))
}

/// Everything [`fit`] computed along the way.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub rules: RuleSet,
    pub objective: f64,
    /// Final clause pool, in insertion order.
    pub pool: Vec<Clause>,
    /// Master LP solution over the final pool.
    pub master: MasterSolution,
    /// Master LP optimum after each solve.
    pub lp_objectives: Vec<f64>,
    /// True when pricing found no improving clause before the iteration cap.
    pub converged: bool,
}

pub fn fit(dataset: &BinaryDataset, config: &BdrConfig) -> Result<RuleSet> {
    fit_report(dataset, config).map(|r| r.rules)
}

pub fn fit_report(dataset: &BinaryDataset, config: &BdrConfig) -> Result<FitReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty(format!("{} dataset", dataset.stage)));
    }
    let mut pool: Vec<Clause> = Clause::enumerate(config.max_degree.min(1));
    let mut lp_objectives = Vec::new();
    let mut iteration = 0;
    let (master, converged) = loop {
        let master = solve_master(&pool, dataset, config)?;
        lp_objectives.push(master.objective);
        iteration += 1;
        let fresh: Vec<Clause> = price_clause(&master.duals, dataset, config)
            .into_iter()
            .map(|(c, _)| c)
            .filter(|c| !pool.contains(c))
            .collect();
        if fresh.is_empty() {
            break (master, true);
        }
        if iteration >= config.max_cg_iterations {
            break (master, false);
        }
        pool.extend(fresh);
    };
    let chosen = select::select(dataset, config, &pool);
    let rules = RuleSet::new(dataset.stage, chosen);
    let objective = objective(&rules, dataset, config);
    Ok(FitReport { rules, objective, pool, master, lp_objectives, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use CellKind::*;

    fn frame(cells: [CellKind; 5]) -> FeatureFrame {
        FeatureFrame::from_cells(cells)
    }

    fn lit(f: Feature, v: CellKind) -> Literal {
        Literal::new(f, v)
    }

    /// Every frame once, labelled by `rule`.
    fn planted(rule: impl Fn(&FeatureFrame) -> bool) -> BinaryDataset {
        let frames: Vec<FeatureFrame> = FeatureFrame::all().collect();
        let labels = frames.iter().map(&rule).collect();
        BinaryDataset::new(Stage::ForwardVsTurn, frames, labels).unwrap()
    }

    #[test]
    fn clause_counts() {
        // 1 + 5*4 + C(5,2)*16 + C(5,3)*64
        assert_eq!(Clause::enumerate(1).len(), 21);
        assert_eq!(Clause::enumerate(2).len(), 181);
        assert_eq!(Clause::enumerate(3).len(), 821);
        assert_eq!(Clause::enumerate(5).len(), 5usize.pow(5));
        let all = Clause::enumerate(3);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|c| Clause::from_mask(c.mask()) == Some(*c)));
    }

    #[test]
    fn clause_validation() {
        assert!(Clause::new(&[lit(Feature::Forward, Lava), lit(Feature::Forward, Wall)]).is_err());
        let c = Clause::new(&[lit(Feature::Forward, Lava), lit(Feature::Forward, Lava)]).unwrap();
        assert_eq!(c.degree(), 1);
        assert_eq!(Clause::from_mask(0b11), None);
        assert_eq!(Clause::from_mask(1 << 20), None);
        assert_eq!(c.to_string(), "forward == Lava");
        assert_eq!(Clause::EMPTY.to_string(), "TRUE");
    }

    #[test]
    fn ruleset_is_canonical() {
        let a = Clause::new(&[lit(Feature::Forward, Lava)]).unwrap();
        let b = Clause::new(&[lit(Feature::Forward, Lava), lit(Feature::Left, Empty)]).unwrap();
        let c = Clause::new(&[lit(Feature::Right, Goal)]).unwrap();
        let r = RuleSet::new(Stage::ForwardVsTurn, vec![c, b, a, a]);
        // right (column 7) sorts before forward (column 10)
        assert_eq!(r.clauses(), &[c, a]);
        assert_eq!(r.render(), "IF (right == Goal) OR (forward == Lava) THEN action==TURN");
        assert_eq!(RuleSet::empty(Stage::LeftVsRight).render(), "IF FALSE THEN action==RIGHT");
    }

    #[test]
    fn ruleset_json_roundtrip() {
        let a = Clause::new(&[lit(Feature::Forward, Wall), lit(Feature::Left, Empty)]).unwrap();
        let r = RuleSet::new(Stage::ForwardVsTurn, vec![a, Clause::new(&[lit(Feature::Forward, Lava)]).unwrap()]);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#"{"feature":"forward","value":"Lava"}"#), "{text}");
        assert_eq!(serde_json::from_str::<RuleSet>(&text).unwrap(), r);
        let bad = text.replace("Turn", "Right");
        assert!(serde_json::from_str::<RuleSet>(&bad).is_err());
        let clash = r#"{"stage":"ForwardVsTurn","positive_label":"Turn","clauses":[[{"feature":"left","value":"Empty"},{"feature":"left","value":"Wall"}]]}"#;
        assert!(serde_json::from_str::<RuleSet>(clash).is_err());
    }

    #[test]
    fn objective_examples() {
        let cfg = BdrConfig::default();
        let d = planted(|f| f.forward == Lava);
        let (n, p) = (d.len() as f64, d.positives() as f64);
        assert_eq!(objective(&RuleSet::empty(Stage::ForwardVsTurn), &d, &cfg), p / n);
        let all = RuleSet::new(Stage::ForwardVsTurn, vec![Clause::EMPTY]);
        assert!((objective(&all, &d, &cfg) - ((n - p) / n + cfg.lambda0)).abs() < 1e-15);
        let exact = RuleSet::new(Stage::ForwardVsTurn, vec![Clause::new(&[lit(Feature::Forward, Lava)]).unwrap()]);
        assert!((objective(&exact, &d, &cfg) - (cfg.lambda0 + cfg.lambda1)).abs() < 1e-15);
    }

    #[test]
    fn predict_examples() {
        let r = RuleSet::new(Stage::ForwardVsTurn, vec![Clause::new(&[lit(Feature::Forward, Lava)]).unwrap()]);
        assert!(r.predict(&frame([Empty, Empty, Lava, Empty, Empty])));
        assert!(!r.predict(&frame([Lava, Empty, Empty, Empty, Empty])));
        assert!(FeatureFrame::all().all(|f| !RuleSet::empty(Stage::ForwardVsTurn).predict(&f)));
    }

    #[test]
    fn fits_planted_rules() {
        let cfg = BdrConfig::default();
        let d = planted(|f| f.forward == Lava);
        assert_eq!(fit(&d, &cfg).unwrap().render(), "IF (forward == Lava) THEN action==TURN");

        let d = planted(|f| f.forward == Lava || (f.forward == Wall && f.left == Empty));
        let r = fit_report(&d, &cfg).unwrap();
        assert_eq!(r.rules.render(), "IF (forward == Lava) OR (left == Empty AND forward == Wall) THEN action==TURN");
        assert!(r.converged);

        let all = BinaryDataset::new(Stage::LeftVsRight, vec![frame([Wall; 5]); 3], vec![true; 3]).unwrap();
        assert_eq!(fit(&all, &cfg).unwrap().clauses(), &[Clause::EMPTY]);
        let none = BinaryDataset::new(Stage::LeftVsRight, vec![frame([Wall; 5]); 3], vec![false; 3]).unwrap();
        assert!(fit(&none, &cfg).unwrap().clauses().is_empty());
    }

    #[test]
    fn tie_order() {
        let a = Clause::new(&[lit(Feature::Left, Wall)]).unwrap();
        let b = Clause::new(&[lit(Feature::Right, Wall)]).unwrap();
        let ab = Clause::new(&[lit(Feature::Left, Wall), lit(Feature::Right, Wall)]).unwrap();
        assert_eq!(compare_candidates((0.1, &[a]), (0.1 + 1e-13, &[a, b])), Ordering::Less);
        assert_eq!(compare_candidates((0.1, &[a, b]), (0.05, &[a])), Ordering::Greater);
        assert_eq!(compare_candidates((0.1, &[ab]), (0.1, &[b])), Ordering::Greater);
        assert_eq!(compare_candidates((0.1, &[a]), (0.1, &[b])), Ordering::Less);
    }

    #[test]
    fn config_validation() {
        assert!(BdrConfig::default().validate().is_ok());
        assert!(BdrConfig { lambda0: -1.0, ..Default::default() }.validate().is_err());
        assert!(BdrConfig { lambda1: f64::NAN, ..Default::default() }.validate().is_err());
        assert!(BdrConfig { max_degree: 6, ..Default::default() }.validate().is_err());
        assert!(BdrConfig { max_clauses: 0, ..Default::default() }.validate().is_err());
        let cfg: BdrConfig = toml::from_str("lambda0 = 0.01").unwrap();
        assert_eq!(cfg.lambda1, 0.001);
        assert!(toml::from_str::<BdrConfig>("lambda2 = 1").is_err());
    }
}
