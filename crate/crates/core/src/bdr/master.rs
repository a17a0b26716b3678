//! Restricted master LP and exhaustive pricing.
//!
//! Identical rows are merged into distinct frames with positive and negative
//! counts. The master relaxation over a pool of clauses `k` is
//!
//! ```text
//! min  sum_k c_k w_k + sum_f (p_f / n) s_f
//! s.t. s_f + sum_{k covers f} w_k >= 1    for frames with p_f > 0
//!      w, s >= 0
//! c_k = lambda0 + lambda1 * deg_k + (negatives covered by k) / n
//! ```
//!
//! (`w <= 1` is implied since every `c_k >= 0`.) It is solved through its
//! dual, a packing LP over frame multipliers `mu_f in [0, p_f / n]`; the
//! clause weights are the packing LP's row duals.

use std::collections::BTreeMap;

use super::lp::{self, PackingLp};
use super::{BdrConfig, Clause};
use crate::trace::{row_mask, BinaryDataset};
use crate::{Error, Result};

/// Reduced costs above `-PRICING_TOL` count as nonnegative.
pub const PRICING_TOL: f64 = 1e-10;
const MAX_PRICED: usize = 10;

/// Distinct rows with multiplicities, sorted by row mask.
#[derive(Debug, Clone)]
pub(crate) struct Frames {
    pub masks: Vec<u32>,
    pub pos: Vec<u64>,
    pub neg: Vec<u64>,
    pub n: usize,
}

impl Frames {
    pub fn new(dataset: &BinaryDataset) -> Self {
        let mut counts: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
        for (f, &l) in dataset.frames().iter().zip(dataset.labels()) {
            let e = counts.entry(row_mask(f)).or_default();
            if l {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        Frames {
            masks: counts.keys().copied().collect(),
            pos: counts.values().map(|c| c.0).collect(),
            neg: counts.values().map(|c| c.1).collect(),
            n: dataset.len(),
        }
    }

    pub fn index_of(&self, mask: u32) -> usize {
        self.masks.binary_search(&mask).expect("row belongs to the dataset")
    }

    /// Objective coefficient of a clause in the master LP.
    pub fn clause_cost(&self, clause: Clause, config: &BdrConfig) -> f64 {
        let covered_neg: u64 = self.masks.iter().zip(&self.neg).filter(|(m, _)| clause.covers(**m)).map(|(_, c)| c).sum();
        config.clause_cost(clause) + covered_neg as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    /// One weight in `[0, 1]` per pool clause.
    pub clause_weights: Vec<f64>,
    /// One slack per positive row, in dataset order.
    pub slacks: Vec<f64>,
    /// Coverage-constraint multipliers, one per positive row, in `[0, 1/n]`.
    pub duals: Vec<f64>,
    pub objective: f64,
}

pub fn solve_master(pool: &[Clause], dataset: &BinaryDataset, config: &BdrConfig) -> Result<MasterSolution> {
    if pool.is_empty() {
        return Err(Error::Empty("clause pool".into()));
    }
    let frames = Frames::new(dataset);
    let n = frames.n.max(1) as f64;
    let positive: Vec<usize> = (0..frames.masks.len()).filter(|&f| frames.pos[f] > 0).collect();
    let costs: Vec<f64> = pool.iter().map(|&k| frames.clause_cost(k, config)).collect();
    let packing = PackingLp {
        a: pool
            .iter()
            .map(|k| positive.iter().map(|&f| if k.covers(frames.masks[f]) { 1.0 } else { 0.0 }).collect())
            .collect(),
        b: costs.clone(),
        c: vec![1.0; positive.len()],
        upper: positive.iter().map(|&f| frames.pos[f] as f64 / n).collect(),
    };
    let sol = lp::solve(&packing)?;

    let weights: Vec<f64> = sol.y.iter().map(|&y| y.min(1.0)).collect();
    let mut frame_slack = vec![0.0; frames.masks.len()];
    let mut frame_dual = vec![0.0; frames.masks.len()];
    for (j, &f) in positive.iter().enumerate() {
        let cover: f64 = pool.iter().zip(&weights).filter(|(k, _)| k.covers(frames.masks[f])).map(|(_, w)| w).sum();
        frame_slack[f] = (1.0 - cover).max(0.0);
        frame_dual[f] = sol.x[j].clamp(0.0, packing.upper[j]) / frames.pos[f] as f64;
    }
    let primal = costs.iter().zip(&weights).map(|(c, w)| c * w).sum::<f64>()
        + positive.iter().map(|&f| frames.pos[f] as f64 / n * frame_slack[f]).sum::<f64>();
    if (primal - sol.value).abs() > 1e-7 * primal.abs().max(1.0) {
        return Err(Error::Numerical(format!("duality gap {} in master LP", primal - sol.value)));
    }

    let mut slacks = Vec::new();
    let mut duals = Vec::new();
    for (f, &l) in dataset.frames().iter().zip(dataset.labels()) {
        if l {
            let i = frames.index_of(row_mask(f));
            slacks.push(frame_slack[i]);
            duals.push(frame_dual[i]);
        }
    }
    Ok(MasterSolution { clause_weights: weights, slacks, duals, objective: primal })
}

/// `lambda0 + lambda1 * deg + (negatives covered) / n - sum of duals of the
/// positives covered`, with `duals` given per positive row in dataset order.
pub fn reduced_cost(clause: Clause, duals: &[f64], dataset: &BinaryDataset, config: &BdrConfig) -> f64 {
    let n = dataset.len().max(1) as f64;
    let mut rho = config.clause_cost(clause);
    let mut d = duals.iter();
    for (f, &l) in dataset.frames().iter().zip(dataset.labels()) {
        let covered = clause.holds(f);
        if l {
            let dual = d.next().expect("one dual per positive row");
            if covered {
                rho -= dual;
            }
        } else if covered {
            rho += 1.0 / n;
        }
    }
    rho
}

/// The (at most 10) clauses of degree `<= max_degree` with the most negative
/// reduced cost, ties in clause order. Empty when none is below
/// `-PRICING_TOL`.
pub fn price_clause(duals: &[f64], dataset: &BinaryDataset, config: &BdrConfig) -> Vec<(Clause, f64)> {
    assert_eq!(duals.len(), dataset.positives(), "one dual per positive row");
    let frames = Frames::new(dataset);
    let mut mu = vec![0.0; frames.masks.len()];
    let mut d = duals.iter();
    for (f, &l) in dataset.frames().iter().zip(dataset.labels()) {
        if l {
            mu[frames.index_of(row_mask(f))] += d.next().unwrap();
        }
    }
    let mut found: Vec<(Clause, f64)> = Clause::enumerate(config.max_degree)
        .into_iter()
        .filter_map(|k| {
            let mut rho = frames.clause_cost(k, config);
            for (m, v) in frames.masks.iter().zip(&mu) {
                if k.covers(*m) {
                    rho -= v;
                }
            }
            (rho < -PRICING_TOL).then_some((k, rho))
        })
        .collect();
    // `enumerate` is already in clause order and the sort is stable
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    found.truncate(MAX_PRICED);
    found
}
