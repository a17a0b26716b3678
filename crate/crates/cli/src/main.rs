use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use polsum::agent::{evaluate, read_checkpoint, render_train_log, train, write_checkpoint, QNetwork};
use polsum::bdr::fit;
use polsum::config::PipelineConfig;
use polsum::gridworld::{generate_suite_excluding, layout_hash, read_suite, render_suite};
use polsum::guardrail::{compile_guardrails, evaluate_shielded, read_guardrails, write_guardrails, GuardrailSpec, MappingPolicy};
use polsum::pipeline::{read_json, run_pipeline, sha256_file, write_text};
use polsum::summary::{learn_rules, metrics, render_report, AgentRun, Report, ReportFormat, RulesDocument};
use polsum::trace::{binarize, collect, read_trace, write_trace, Stage};

/// Summarize a gridworld agent's policy with Boolean decision rules.
#[derive(Debug, Parser)]
#[command(name = "polsum", version)]
struct Cli {
    /// Primary seed of the subcommand (run seeds become SEED, SEED+1, ... for `pipeline`)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Pipeline configuration: a TOML file, or `default` for built-in values
    #[arg(long, global = true, default_value = "default")]
    config: String,

    /// Maximum worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a suite of distinct solvable layouts
    GenSuite(GenSuiteArgs),
    /// Train a Q-network on a layout suite
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint on a suite
    Eval(EvalArgs),
    /// Roll out checkpoints greedily and record a feature/action trace
    Collect(CollectArgs),
    /// Fit decision rules to a trace
    LearnRules(LearnRulesArgs),
    /// Rule metrics on a trace, as text and JSON
    Report(ReportArgs),
    /// Compare a checkpoint with and without a guardrail
    ShieldEval(ShieldEvalArgs),
    /// Run every stage end to end
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct GenSuiteArgs {
    /// Number of layouts
    #[arg(long)]
    count: usize,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suite whose layouts must not reappear (repeatable)
    #[arg(long)]
    exclude: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training suite file
    #[arg(long)]
    suite: PathBuf,
    /// Checkpoint to write
    #[arg(long)]
    out: PathBuf,
    /// Per-episode training log (CSV)
    #[arg(long)]
    log: Option<PathBuf>,
    /// Override the configured number of environment steps
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    /// Episodes per layout
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Result file (JSON); printed to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CollectArgs {
    /// Agent to roll out, as RUN_SEED=CHECKPOINT (repeatable)
    #[arg(long = "run", required = true, value_parser = parse_run)]
    runs: Vec<(u64, PathBuf)>,
    #[arg(long)]
    suite: PathBuf,
    /// Trace file to write (CSV)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Both,
    ForwardVsTurn,
    LeftVsRight,
}

#[derive(Debug, Args)]
struct LearnRulesArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Which binary stage to fit
    #[arg(long, value_enum, default_value_t = StageArg::Both)]
    stage: StageArg,
    /// Rules file to write (JSON); printed to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Rules file from `learn-rules --stage both`
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Agent evaluation results to include (JSON list from `pipeline`)
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Plain-text report file; printed to stdout when absent
    #[arg(long)]
    text: Option<PathBuf>,
    /// Structured report file (JSON)
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["rules", "guardrail"]))]
struct ShieldEvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    /// Learned rules; stage-one clauses forbid Forward
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Hand-written guardrail spec (JSON)
    #[arg(long)]
    guardrail: Option<PathBuf>,
    /// Write the compiled guardrail spec here
    #[arg(long)]
    save_guardrail: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Comparison file (JSON); printed to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Output directory (overrides the configured one)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_run(s: &str) -> Result<(u64, PathBuf), String> {
    let (seed, path) = s.split_once('=').ok_or_else(|| format!("expected RUN_SEED=CHECKPOINT, got `{s}`"))?;
    let seed = seed.parse().map_err(|e| format!("bad run seed `{seed}`: {e}"))?;
    Ok((seed, PathBuf::from(path)))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_text(text, p)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json_string<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let config = PipelineConfig::load(&cli.config)?;
    let max_steps = config.environment.max_steps;
    match cli.command {
        Command::GenSuite(a) => {
            let mut taken = std::collections::HashSet::new();
            for path in &a.exclude {
                taken.extend(read_suite(path)?.iter().map(layout_hash));
            }
            let seed = cli.seed.unwrap_or(config.suites.train_seed);
            let suite = generate_suite_excluding(seed, a.count, config.environment.lava(), &taken)?;
            emit(&render_suite(&suite), a.out.as_deref())?;
        }
        Command::Train(a) => {
            let suite = read_suite(&a.suite)?;
            let mut tc = config.agent_for(cli.seed.unwrap_or(config.agent.seed));
            if let Some(steps) = a.steps {
                tc.total_env_steps = steps;
            }
            let out = train(&tc, &suite, max_steps)?;
            write_checkpoint(&out.network, &a.out)?;
            if let Some(log) = &a.log {
                write_text(&render_train_log(&out.log), log)?;
            }
            eprintln!("trained {} episodes, checkpoint at {}", out.log.len(), a.out.display());
        }
        Command::Eval(a) => {
            let net = read_checkpoint(&a.checkpoint)?;
            let result = evaluate(&net, &read_suite(&a.suite)?, a.episodes, max_steps)?;
            emit(&json_string(&result), a.out.as_deref())?;
        }
        Command::Collect(a) => {
            let suite = read_suite(&a.suite)?;
            let runs: Vec<(u64, QNetwork)> =
                a.runs.iter().map(|(s, p)| Ok((*s, read_checkpoint(p)?))).collect::<polsum::Result<_>>()?;
            let records = collect(&runs, &suite, max_steps)?;
            write_trace(&records, &a.out)?;
            eprintln!("{} records from {} episodes", records.len(), runs.len() * suite.len());
        }
        Command::LearnRules(a) => {
            let records = read_trace(&a.trace)?;
            let mut split = config.split;
            if let Some(seed) = cli.seed {
                split.seed = seed;
            }
            let text = match a.stage {
                StageArg::Both => json_string(&learn_rules(&records, &config.bdr, &split, sha256_file(&a.trace)?)?),
                StageArg::ForwardVsTurn | StageArg::LeftVsRight => {
                    let stage = if matches!(a.stage, StageArg::ForwardVsTurn) { Stage::ForwardVsTurn } else { Stage::LeftVsRight };
                    let (fitting, _) = split.split(&records)?;
                    json_string(&fit(&binarize(&fitting, stage)?, &config.bdr)?)
                }
            };
            emit(&text, a.out.as_deref())?;
        }
        Command::Report(a) => {
            let rules: RulesDocument = read_json(&a.rules)?;
            let records = read_trace(&a.trace)?;
            let sha = sha256_file(&a.trace)?;
            if sha != rules.trace_sha256 {
                eprintln!("warning: {} differs from the trace the rules were fitted on", a.trace.display());
            }
            let model = rules.model()?;
            let agents: Vec<AgentRun> = a.eval.as_deref().map(read_json).transpose()?.unwrap_or_default();
            let report = Report {
                metrics: metrics(&model, &records, &rules.split)?,
                model,
                bdr: rules.bdr.clone(),
                trace_sha256: sha,
                trace_records: records.len(),
                agents,
            };
            if let Some(p) = &a.json {
                write_text(&render_report(&report, ReportFormat::Json), p)?;
            }
            emit(&render_report(&report, ReportFormat::Text), a.text.as_deref())?;
        }
        Command::ShieldEval(a) => {
            let spec: GuardrailSpec = match (&a.rules, &a.guardrail) {
                (Some(r), _) => {
                    let doc: RulesDocument = read_json(r)?;
                    compile_guardrails(&doc.stage1.rules, MappingPolicy::default())?
                }
                (None, Some(g)) => read_guardrails(g)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            if let Some(p) = &a.save_guardrail {
                write_guardrails(&spec, p)?;
            }
            let net = read_checkpoint(&a.checkpoint)?;
            let result = evaluate_shielded(&net, &spec, &read_suite(&a.suite)?, a.episodes, max_steps)?;
            emit(&json_string(&result), a.out.as_deref())?;
        }
        Command::Pipeline(a) => {
            let mut config = config;
            if let Some(seed) = cli.seed {
                config = config.with_base_seed(seed);
            }
            if let Some(out) = a.out {
                config.output.dir = out;
            }
            let outcome = run_pipeline(&config, &mut |msg| eprintln!("[pipeline] {msg}"))?;
            print!("{}", render_report(&outcome.report, ReportFormat::Text));
            for s in &outcome.shield {
                let c = &s.comparison;
                println!(
                    "guardrail seed {}: lava {:.3} -> {:.3}, success {:.3} -> {:.3}, fallbacks {}",
                    s.run_seed, c.base.lava_rate, c.shielded.lava_rate, c.base.success_rate, c.shielded.success_rate, c.fallback_events
                );
            }
            eprintln!("outputs in {}", outcome.paths.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source text
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
