use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::{generate_layout, layout_hash, parse_cells, LavaParams};
use super::{Direction, Layout, Pos};
use crate::{Error, Result};

const SUITE_HEADER: &str = "# lava-suite v1";

/// Draws `count` layouts with pairwise-distinct hashes from seeds produced by a
/// generator keyed on `base_seed`. Seeds whose layout collides with an earlier
/// one, or with anything in `exclude`, are skipped.
pub fn generate_suite(base_seed: u64, count: usize, params: LavaParams) -> Result<Vec<Layout>> {
    generate_suite_excluding(base_seed, count, params, &HashSet::new())
}

pub fn generate_suite_excluding(
    base_seed: u64,
    count: usize,
    params: LavaParams,
    exclude: &HashSet<u64>,
) -> Result<Vec<Layout>> {
    if count == 0 {
        return Err(Error::InvalidParams("suite count must be at least 1".into()));
    }
    params.validate()?;
    let budget = count * 20 + 100;
    let mut seeds = ChaCha8Rng::seed_from_u64(base_seed);
    let mut seen = exclude.clone();
    let mut out = Vec::with_capacity(count);
    for _ in 0..budget {
        let layout = generate_layout(seeds.next_u64(), params)?;
        if seen.insert(layout_hash(&layout)) {
            out.push(layout);
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(Error::SuiteExhausted { requested: count, produced: out.len(), attempts: budget })
}

/// Text form: a header line, then one `seed hash row,col,dir cells` record per
/// layout.
pub fn render_suite(layouts: &[Layout]) -> String {
    let mut s = String::from(SUITE_HEADER);
    s.push('\n');
    for l in layouts {
        let _ = writeln!(
            s,
            "{} {:016x} {},{},{} {}",
            l.seed(),
            layout_hash(l),
            l.start_pos().row,
            l.start_pos().col,
            l.start_dir().letter(),
            l.cell_string()
        );
    }
    s
}

/// Parses [`render_suite`] output. `origin` names the source in errors.
/// Every record's hash is recomputed and must match.
pub fn parse_suite(text: &str, origin: &str) -> Result<Vec<Layout>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == SUITE_HEADER => {}
        _ => return Err(Error::parse(origin, 1, format!("expected header `{SUITE_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse(origin, lineno, msg);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [seed, hash, pose, cells] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let seed: u64 = seed.parse().map_err(|e| err(format!("bad seed `{seed}`: {e}")))?;
        if hash.len() != 16 {
            return Err(err(format!("hash `{hash}` must be 16 hex digits")));
        }
        let hash = u64::from_str_radix(hash, 16).map_err(|e| err(format!("bad hash: {e}")))?;
        let pose: Vec<&str> = pose.split(',').collect();
        let [row, col, dir] = pose[..] else {
            return Err(err("start pose must be `row,col,dir`".into()));
        };
        let row: usize = row.parse().map_err(|_| err(format!("bad row `{row}`")))?;
        let col: usize = col.parse().map_err(|_| err(format!("bad col `{col}`")))?;
        let mut dir_chars = dir.chars();
        let dir = match (dir_chars.next().and_then(Direction::from_letter), dir_chars.next()) {
            (Some(d), None) => d,
            _ => return Err(err(format!("bad direction `{dir}`"))),
        };
        let cells = parse_cells(cells).ok_or_else(|| err(format!("bad cell string `{cells}`")))?;
        let layout = Layout::new(cells, Pos::new(row, col), dir, seed).map_err(|e| err(e.to_string()))?;
        if layout_hash(&layout) != hash {
            return Err(err(format!("hash mismatch: file {hash:016x}, content {:016x}", layout_hash(&layout))));
        }
        out.push(layout);
    }
    Ok(out)
}

pub fn write_suite(layouts: &[Layout], path: &Path) -> Result<()> {
    std::fs::write(path, render_suite(layouts)).map_err(|e| Error::io(path, e))
}

pub fn read_suite(path: &Path) -> Result<Vec<Layout>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_suite(&text, &path.display().to_string())
}
