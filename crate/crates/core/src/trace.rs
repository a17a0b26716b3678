//! Greedy rollout traces and their binarized form.
//!
//! A trace is a flat list of [`TraceRecord`]s, one per time step, holding the
//! relative feature frame the agent saw and the action it took. On disk it is
//! a CSV file with the header in [`TRACE_HEADER`].

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{run_episode, Policy};
use crate::bdr::{Literal, NUM_COLUMNS};
use crate::gridworld::{extract_features, layout_hash, Action, CellKind, Feature, FeatureFrame, Layout};
use crate::{Error, Result};

pub const TRACE_HEADER: [&str; 10] = [
    "run_seed",
    "episode",
    "step",
    "layout_hash",
    "left",
    "right",
    "forward",
    "forward_left",
    "forward_right",
    "action",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceRecord {
    pub run_seed: u64,
    pub episode: usize,
    pub step: usize,
    pub layout_hash: u64,
    pub frame: FeatureFrame,
    pub action: Action,
}

/// Rolls one greedy episode per layout and records every step, frame taken
/// before the action. Episodes are numbered by suite position.
pub fn collect_run<P: Policy + ?Sized>(
    policy: &P,
    run_seed: u64,
    suite: &[Layout],
    max_steps: usize,
) -> Result<Vec<TraceRecord>> {
    if suite.is_empty() {
        return Err(Error::Empty("trace suite".into()));
    }
    let episodes = suite
        .par_iter()
        .enumerate()
        .map(|(episode, layout)| {
            let hash = layout_hash(layout);
            let mut out = Vec::new();
            run_episode(policy, layout, max_steps, |state, action| {
                out.push(TraceRecord {
                    run_seed,
                    episode,
                    step: state.steps_taken(),
                    layout_hash: hash,
                    frame: extract_features(state),
                    action,
                });
            })?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(episodes.into_iter().flatten().collect())
}

/// [`collect_run`] for each `(run_seed, policy)` pair, concatenated in order.
pub fn collect<P: Policy>(runs: &[(u64, P)], suite: &[Layout], max_steps: usize) -> Result<Vec<TraceRecord>> {
    let mut all = Vec::new();
    for (seed, policy) in runs {
        all.extend(collect_run(policy, *seed, suite, max_steps)?);
    }
    Ok(all)
}

pub fn write_trace_to<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::Format(format!("writing trace: {e}"));
    w.write_record(TRACE_HEADER).map_err(fail)?;
    for r in records {
        let mut row = vec![r.run_seed.to_string(), r.episode.to_string(), r.step.to_string(), format!("{:016x}", r.layout_hash)];
        row.extend(r.frame.cells().iter().map(|c| c.name().to_string()));
        row.push(r.action.name().to_string());
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Format(format!("writing trace: {e}")))
}

pub fn write_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_to(records, std::io::BufWriter::new(file))
}

/// Parses a trace. `origin` only labels error messages.
pub fn parse_trace<R: Read>(input: R, origin: &str) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = reader.records();
    let line_of = |e: &csv::Error| e.position().map_or(0, |p| p.line() as usize);
    match rows.next() {
        None => return Err(Error::parse(origin, 1, "missing header")),
        Some(Err(e)) => return Err(Error::parse(origin, line_of(&e).max(1), e.to_string())),
        Some(Ok(h)) if h.iter().ne(TRACE_HEADER) => {
            return Err(Error::parse(origin, 1, format!("expected header `{}`", TRACE_HEADER.join(","))))
        }
        Some(Ok(_)) => {}
    }
    let mut out: Vec<TraceRecord> = Vec::new();
    for row in rows {
        let row = row.map_err(|e| Error::parse(origin, line_of(&e), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::parse(origin, line, msg);
        if row.len() != TRACE_HEADER.len() {
            return Err(err(format!("expected {} fields, found {}", TRACE_HEADER.len(), row.len())));
        }
        let int = |i: usize| row[i].parse::<u64>().map_err(|_| err(format!("bad {} `{}`", TRACE_HEADER[i], &row[i])));
        let hash_text = &row[3];
        if hash_text.len() != 16 {
            return Err(err(format!("layout hash `{hash_text}` is not 16 hex digits")));
        }
        let layout_hash =
            u64::from_str_radix(hash_text, 16).map_err(|_| err(format!("bad layout hash `{hash_text}`")))?;
        let mut cells = [CellKind::Empty; 5];
        for (k, cell) in cells.iter_mut().enumerate() {
            *cell = CellKind::from_str(&row[4 + k]).map_err(&err)?;
        }
        let record = TraceRecord {
            run_seed: int(0)?,
            episode: int(1)? as usize,
            step: int(2)? as usize,
            layout_hash,
            frame: FeatureFrame::from_cells(cells),
            action: Action::from_str(&row[9]).map_err(&err)?,
        };
        if let Some(prev) = out.last() {
            if (prev.run_seed, prev.episode) == (record.run_seed, record.episode) && record.step <= prev.step {
                return Err(err(format!("step {} does not follow step {}", record.step, prev.step)));
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(std::io::BufReader::new(file), &path.display().to_string())
}

/// Which binary question a dataset answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Forward (false) versus either turn (true), over all records.
    ForwardVsTurn,
    /// TurnLeft (false) versus TurnRight (true), over turn records only.
    LeftVsRight,
}

impl Stage {
    pub const ALL: [Stage; 2] = [Stage::ForwardVsTurn, Stage::LeftVsRight];

    pub fn name(self) -> &'static str {
        match self {
            Stage::ForwardVsTurn => "ForwardVsTurn",
            Stage::LeftVsRight => "LeftVsRight",
        }
    }

    pub fn positive_label(self) -> &'static str {
        match self {
            Stage::ForwardVsTurn => "Turn",
            Stage::LeftVsRight => "Right",
        }
    }

    pub fn negative_label(self) -> &'static str {
        match self {
            Stage::ForwardVsTurn => "Forward",
            Stage::LeftVsRight => "Left",
        }
    }

    /// Whether records with this action belong to the stage's dataset.
    pub fn includes(self, action: Action) -> bool {
        match self {
            Stage::ForwardVsTurn => true,
            Stage::LeftVsRight => action.is_turn(),
        }
    }

    /// Label of an included action.
    pub fn label(self, action: Action) -> bool {
        match self {
            Stage::ForwardVsTurn => action.is_turn(),
            Stage::LeftVsRight => action == Action::TurnRight,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One-hot rows over the 20 `(feature == value)` columns plus labels.
///
/// Rows are stored as frames; since every feature takes exactly one value,
/// a frame and its 20-bit one-hot row determine each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    pub stage: Stage,
    rows: Vec<FeatureFrame>,
    labels: Vec<bool>,
}

impl BinaryDataset {
    pub fn new(stage: Stage, rows: Vec<FeatureFrame>, labels: Vec<bool>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension { expected: rows.len(), got: labels.len() });
        }
        Ok(BinaryDataset { stage, rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn frames(&self) -> &[FeatureFrame] {
        &self.rows
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Column order: features left, right, forward, forward_left,
    /// forward_right; within each, Empty, Wall, Lava, Goal.
    pub fn columns() -> [Literal; NUM_COLUMNS] {
        Literal::all()
    }

    pub fn row(&self, i: usize) -> [bool; NUM_COLUMNS] {
        let mask = row_mask(&self.rows[i]);
        std::array::from_fn(|c| mask >> c & 1 == 1)
    }
}

/// Bit `c` is set iff column `c` holds on the frame.
pub fn row_mask(frame: &FeatureFrame) -> u32 {
    Feature::ALL.iter().map(|&f| 1u32 << Literal::new(f, frame.get(f)).column()).sum()
}

pub fn binarize(records: &[TraceRecord], stage: Stage) -> Result<BinaryDataset> {
    let kept: Vec<&TraceRecord> = records.iter().filter(|r| stage.includes(r.action)).collect();
    if stage == Stage::LeftVsRight && kept.is_empty() {
        return Err(Error::SingleClass { stage: stage.name(), detail: "no turn records".into() });
    }
    let rows = kept.iter().map(|r| r.frame).collect();
    let labels = kept.iter().map(|r| stage.label(r.action)).collect();
    BinaryDataset::new(stage, rows, labels)
}
