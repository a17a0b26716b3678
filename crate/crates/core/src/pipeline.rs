//! End-to-end run: suites, agents, trace, rules, report, guardrail.
//!
//! Every stage writes its output under the configured directory in the
//! same formats the individual CLI subcommands read, so any stage can be
//! re-run on its own from the files of the previous one.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{evaluate, render_train_log, train, write_checkpoint, QNetwork};
use crate::config::{GuardrailSource, PipelineConfig};
use crate::gridworld::{generate_suite, generate_suite_excluding, layout_hash, write_suite, Layout};
use crate::guardrail::{compile_guardrails, evaluate_shielded, read_guardrails, write_guardrails, MappingPolicy, ShieldComparison};
use crate::summary::{learn_rules, metrics, render_report, AgentRun, Report, ReportFormat, RulesDocument};
use crate::trace::{collect, write_trace, Stage};
use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))? + "\n";
    write_text(&text, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The training, evaluation and trace suites. The latter two exclude every
/// training layout, and the trace suite also excludes the evaluation suite.
#[derive(Debug, Clone)]
pub struct Suites {
    pub train: Vec<Layout>,
    pub eval: Vec<Layout>,
    pub trace: Vec<Layout>,
}

pub fn build_suites(config: &PipelineConfig) -> Result<Suites> {
    let lava = config.environment.lava();
    let train = generate_suite(config.suites.train_seed, config.agent.train_suite_size, lava)?;
    let mut taken: HashSet<u64> = train.iter().map(layout_hash).collect();
    let eval = generate_suite_excluding(config.suites.eval_seed, config.suites.eval_size, lava, &taken)?;
    taken.extend(eval.iter().map(layout_hash));
    let trace = generate_suite_excluding(config.trace.suite_seed, config.trace.suite_size, lava, &taken)?;
    Ok(Suites { train, eval, trace })
}

/// Shielded versus unshielded evaluation of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShieldRun {
    pub run_seed: u64,
    pub comparison: ShieldComparison,
}

/// File names inside the output directory.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputPaths { dir: dir.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join("config.toml")
    }
    pub fn train_suite(&self) -> PathBuf {
        self.dir.join("suite-train.txt")
    }
    pub fn eval_suite(&self) -> PathBuf {
        self.dir.join("suite-eval.txt")
    }
    pub fn trace_suite(&self) -> PathBuf {
        self.dir.join("suite-trace.txt")
    }
    pub fn checkpoint(&self, run_seed: u64) -> PathBuf {
        self.dir.join(format!("agent-{run_seed}.qnet"))
    }
    pub fn train_log(&self, run_seed: u64) -> PathBuf {
        self.dir.join(format!("train-log-{run_seed}.csv"))
    }
    pub fn eval(&self) -> PathBuf {
        self.dir.join("eval.json")
    }
    pub fn trace(&self) -> PathBuf {
        self.dir.join("trace.csv")
    }
    pub fn rules(&self) -> PathBuf {
        self.dir.join("rules.json")
    }
    pub fn report_text(&self) -> PathBuf {
        self.dir.join("report.txt")
    }
    pub fn report_json(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn guardrail(&self) -> PathBuf {
        self.dir.join("guardrail.json")
    }
    pub fn shield(&self) -> PathBuf {
        self.dir.join("shield.json")
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub paths: OutputPaths,
    pub agents: Vec<AgentRun>,
    pub rules: RulesDocument,
    pub report: Report,
    pub shield: Vec<ShieldRun>,
}

/// Runs every stage in order, reporting progress through `progress`.
pub fn run_pipeline(config: &PipelineConfig, progress: &mut dyn FnMut(&str)) -> Result<PipelineOutcome> {
    config.validate()?;
    let paths = OutputPaths::new(&config.output.dir);
    std::fs::create_dir_all(&paths.dir).map_err(|e| Error::io(&paths.dir, e))?;
    write_text(&config.to_toml(), &paths.config())?;
    let max_steps = config.environment.max_steps;

    progress("generating suites");
    let suites = build_suites(config)?;
    write_suite(&suites.train, &paths.train_suite())?;
    write_suite(&suites.eval, &paths.eval_suite())?;
    write_suite(&suites.trace, &paths.trace_suite())?;

    progress(&format!("training {} agents", config.trace.run_seeds.len()));
    let trained: Vec<(u64, QNetwork)> = config
        .trace
        .run_seeds
        .par_iter()
        .map(|&seed| -> Result<(u64, QNetwork)> {
            let out = train(&config.agent_for(seed), &suites.train, max_steps)?;
            write_checkpoint(&out.network, &paths.checkpoint(seed))?;
            write_text(&render_train_log(&out.log), &paths.train_log(seed))?;
            Ok((seed, out.network))
        })
        .collect::<Result<_>>()?;

    progress("evaluating agents");
    let agents: Vec<AgentRun> = trained
        .iter()
        .map(|(seed, net)| Ok(AgentRun { run_seed: *seed, eval: evaluate(net, &suites.eval, 1, max_steps)? }))
        .collect::<Result<_>>()?;
    write_json(&agents, &paths.eval())?;

    progress("collecting traces");
    let records = collect(&trained, &suites.trace, max_steps)?;
    write_trace(&records, &paths.trace())?;
    let sha = sha256_file(&paths.trace())?;

    progress("learning rules");
    let rules = learn_rules(&records, &config.bdr, &config.split, sha.clone())?;
    write_json(&rules, &paths.rules())?;
    let model = rules.model()?;
    let report = Report {
        metrics: metrics(&model, &records, &config.split)?,
        model,
        bdr: config.bdr.clone(),
        trace_sha256: sha,
        trace_records: records.len(),
        agents: agents.clone(),
    };
    write_text(&render_report(&report, ReportFormat::Text), &paths.report_text())?;
    write_text(&render_report(&report, ReportFormat::Json), &paths.report_json())?;

    progress("evaluating guardrails");
    let spec = match config.guardrail.source {
        GuardrailSource::Learned => compile_guardrails(report.model.rules(Stage::ForwardVsTurn), MappingPolicy::default())?,
        GuardrailSource::Manual => {
            read_guardrails(config.guardrail.spec_path.as_deref().expect("validated: manual source has a path"))?
        }
    };
    write_guardrails(&spec, &paths.guardrail())?;
    let shield: Vec<ShieldRun> = trained
        .iter()
        .map(|(seed, net)| {
            Ok(ShieldRun { run_seed: *seed, comparison: evaluate_shielded(net, &spec, &suites.trace, 1, max_steps)? })
        })
        .collect::<Result<_>>()?;
    write_json(&shield, &paths.shield())?;

    Ok(PipelineOutcome { paths, agents, rules, report, shield })
}
