//! Exact integral selection by depth-first branch and bound.
//!
//! Over distinct frames with counts `p_f` (positive) and `z_f` (negative),
//! covering `f` changes the error count by `-(p_f - z_f)`. A rule set `S`
//! has objective `(P - sum_{f in cov(S)} d_f) / n + cost(S)` with
//! `d_f = p_f - z_f`. Two facts drive the search:
//!
//! * Adding clause `j` on top of coverage `C` gains at most
//!   `sum_{f in cov_j \ C} max(d_f, 0) / n - cost_j`, and coverage only grows
//!   deeper in the tree, so this also bounds `j`'s gain in any descendant.
//!   A clause whose bound is `<= 0` can be dropped from every descendant
//!   without losing objective while saving a clause, so it is skipped.
//! * The best `r` remaining bounds, summed, bound what `r` more clauses can
//!   add.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::master::Frames;
use super::{compare_candidates, BdrConfig, Clause};
use crate::trace::BinaryDataset;

/// Absorbs rounding in bound arithmetic; pruning only discards subtrees
/// whose bound is worse than the incumbent by more than this.
const BOUND_SLACK: f64 = 1e-9;

struct Candidate {
    clause: Clause,
    cover: Vec<u64>,
    cost: f64,
}

struct Search<'a> {
    config: &'a BdrConfig,
    n: usize,
    n_f: f64,
    d: Vec<i64>,
    total_pos: u64,
    cands: Vec<Candidate>,
    best: (f64, Vec<Clause>),
}

fn words(len: usize) -> usize {
    len.div_ceil(64).max(1)
}

impl Search<'_> {
    /// `sum_{f in cover \ covered} max(d_f, 0)`.
    fn fresh_gain(&self, cover: &[u64], covered: &[u64]) -> i64 {
        let mut total = 0;
        for (w, (&c, &done)) in cover.iter().zip(covered).enumerate() {
            let mut bits = c & !done;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                total += self.d[w * 64 + b].max(0);
                bits &= bits - 1;
            }
        }
        total
    }

    /// Exact `sum_{f in covered} d_f`.
    fn covered_gain(&self, covered: &[u64]) -> i64 {
        let mut total = 0;
        for (w, &c) in covered.iter().enumerate() {
            let mut bits = c;
            while bits != 0 {
                total += self.d[w * 64 + bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
        }
        total
    }

    fn consider(&mut self, chosen: &[usize], covered: &[u64]) {
        let errors = (self.total_pos as i64 - self.covered_gain(covered)) as usize;
        let mut clauses: Vec<Clause> = chosen.iter().map(|&i| self.cands[i].clause).collect();
        clauses.sort();
        let literals = clauses.iter().map(|c| c.degree()).sum();
        let obj = self.config.objective_from_counts(errors, self.n, clauses.len(), literals);
        if compare_candidates((obj, &clauses), (self.best.0, &self.best.1)) == Ordering::Less {
            self.best = (obj, clauses);
        }
    }

    fn dfs(&mut self, start: usize, chosen: &mut Vec<usize>, covered: &[u64], base_gain: f64) {
        self.consider(chosen, covered);
        let room = self.config.max_clauses - chosen.len();
        if room == 0 {
            return;
        }
        // optimistic marginal gain of every remaining clause
        let mut options: Vec<(usize, f64)> = Vec::new();
        for j in start..self.cands.len() {
            let c = &self.cands[j];
            let m = self.fresh_gain(&c.cover, covered) as f64 / self.n_f - c.cost;
            if m > 0.0 {
                options.push((j, m));
            }
        }
        if options.is_empty() {
            return;
        }
        // suffix[i]: sum of the best `room - 1` bounds among options[i..]
        let mut suffix = vec![0.0; options.len() + 1];
        let mut best_rest: Vec<f64> = Vec::with_capacity(room);
        for i in (0..options.len()).rev() {
            let pos = best_rest.partition_point(|&v| v >= options[i].1);
            best_rest.insert(pos, options[i].1);
            best_rest.truncate(room - 1);
            suffix[i] = best_rest.iter().sum();
        }
        let top_all: f64 = {
            let mut v: Vec<f64> = options.iter().map(|o| o.1).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            v.iter().take(room).sum()
        };
        let total = self.total_pos as f64 / self.n_f - base_gain;
        // objective lower bound for every strict descendant
        if !self.worth_descending(total - top_all, chosen.len() + 1) {
            return;
        }
        for (idx, &(j, m)) in options.iter().enumerate() {
            // j plus the best of what may follow it
            if !self.worth_descending(total - m - suffix[idx + 1], chosen.len() + 1) {
                continue;
            }
            let next: Vec<u64> = covered.iter().zip(&self.cands[j].cover).map(|(a, b)| a | b).collect();
            let gain = self.covered_gain(&next) as f64 / self.n_f
                - chosen.iter().chain(std::iter::once(&j)).map(|&i| self.cands[i].cost).sum::<f64>();
            chosen.push(j);
            self.dfs(j + 1, chosen, &next, gain);
            chosen.pop();
        }
    }

    /// Could a rule set with at least `min_clauses` clauses and objective
    /// `>= floor` still beat the incumbent?
    fn worth_descending(&self, floor: f64, min_clauses: usize) -> bool {
        let best = self.best.0;
        if floor > best + super::OBJECTIVE_TIE + BOUND_SLACK {
            return false;
        }
        // at best a tie on objective, which needs no more clauses than the incumbent
        !(floor > best - super::OBJECTIVE_TIE - BOUND_SLACK && self.best.1.len() < min_clauses)
    }
}

fn candidates(frames: &Frames, config: &BdrConfig, clauses: &[Clause]) -> Vec<Candidate> {
    let nw = words(frames.masks.len());
    // one representative per coverage pattern: the smallest clause
    let mut by_cover: HashMap<Vec<u64>, Clause> = HashMap::new();
    for &clause in clauses {
        let mut cover = vec![0u64; nw];
        for (f, &m) in frames.masks.iter().enumerate() {
            if clause.covers(m) {
                cover[f / 64] |= 1 << (f % 64);
            }
        }
        by_cover.entry(cover).and_modify(|c| *c = (*c).min(clause)).or_insert(clause);
    }
    let mut out: Vec<Candidate> =
        by_cover.into_iter().map(|(cover, clause)| Candidate { clause, cover, cost: config.clause_cost(clause) }).collect();
    out.sort_by(|a, b| a.clause.cmp(&b.clause));
    out
}

fn run(search: &mut Search, frames: &Frames) {
    let nw = words(frames.masks.len());
    let covered = vec![0u64; nw];
    // strongest singletons first so good incumbents appear early
    let zero = vec![0u64; nw];
    let mut keyed: Vec<(f64, usize)> = search
        .cands
        .iter()
        .enumerate()
        .map(|(i, c)| (search.fresh_gain(&c.cover, &zero) as f64 / search.n_f - c.cost, i))
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    let mut cands = std::mem::take(&mut search.cands);
    let mut slots: Vec<Option<Candidate>> = cands.drain(..).map(Some).collect();
    search.cands = order.iter().map(|&i| slots[i].take().unwrap()).collect();
    search.dfs(0, &mut Vec::new(), &covered, 0.0);
}

/// The rule set (at most `max_clauses` clauses of degree `<= max_degree`)
/// with minimum objective under the tie order of
/// [`compare_candidates`](super::compare_candidates). `pool` seeds the
/// incumbent.
pub(crate) fn select(dataset: &BinaryDataset, config: &BdrConfig, pool: &[Clause]) -> Vec<Clause> {
    let frames = Frames::new(dataset);
    let d: Vec<i64> = frames.pos.iter().zip(&frames.neg).map(|(&p, &z)| p as i64 - z as i64).collect();
    let total_pos = frames.pos.iter().sum::<u64>();
    let empty_obj = config.objective_from_counts(total_pos as usize, frames.n, 0, 0);
    let mut search = Search {
        config,
        n: frames.n,
        n_f: frames.n.max(1) as f64,
        d,
        total_pos,
        cands: Vec::new(),
        best: (empty_obj, Vec::new()),
    };
    let mut pool: Vec<Clause> = pool.iter().copied().filter(|c| c.degree() <= config.max_degree).collect();
    pool.sort();
    pool.dedup();
    search.cands = candidates(&frames, config, &pool);
    run(&mut search, &frames);
    search.cands = candidates(&frames, config, &Clause::enumerate(config.max_degree));
    run(&mut search, &frames);
    search.best.1
}
