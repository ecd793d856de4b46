//! `elss` command-line entry point.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 I/O or input data,
//! 5 verifier transport, 6 evaluation schema.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use elss_core::eval::{
    load_benchmark, load_outcomes, passing_rate, precision_recall_posratio, ranking_metrics, EvalError, Strategy,
    VerdictLog,
};
use elss_core::pipeline::{
    demo, proposal_stage, run_pipeline, trace_to_json, write_atomic, write_outputs, Backend, PipelineConfig,
    PipelineError,
};
use elss_core::proposal::{Kernel, KernelDump};
use elss_core::raster::CrossValidationPolicy;

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_TRANSPORT: u8 = 5;
const EXIT_SCHEMA: u8 = 6;

#[derive(Parser)]
#[command(name = "elss", version, about = "Emergency landing-site selection from aerial rasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the proposal kernel for half-width d as JSON.
    KernelDump {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run suitability derivation and the proposal loop; write the trace.
    Propose(RunArgs),
    /// Run all three stages; write the report and the trace.
    Pipeline(RunArgs),
    /// Compute evaluation metrics from verdict logs or ranking outcomes.
    Eval {
        #[command(subcommand)]
        metric: EvalCommand,
    },
    /// Check a configuration file and the inputs it references.
    ValidateConfig(RunArgs),
    /// Write the synthetic demo scenario and its configuration into a directory.
    Demo {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report path (overrides output.report).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace path (overrides output.trace).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    backend: Option<Backend>,
    /// Kernel half-width in pixels.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    max_accepted: Option<usize>,
    #[arg(long)]
    policy: Option<CrossValidationPolicy>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Share of candidates judged safe, per model and strategy.
    PassingRate {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision, recall and positive ratios against ground-truth labels.
    Filter {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Right rate, false rate and other for best/worst ranking outcomes.
    Ranking {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Io(_) => EXIT_IO,
            PipelineError::Transport { .. } => EXIT_TRANSPORT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = match &e {
            EvalError::Io(_) => EXIT_IO,
            _ => EXIT_SCHEMA,
        };
        Self { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn cwd_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

fn load_config(args: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(p) = &args.out {
        cfg.output.report = cwd_path(p);
    }
    if let Some(p) = &args.trace {
        cfg.output.trace = cwd_path(p);
    }
    if let Some(b) = args.backend {
        cfg.verifier.backend = b;
    }
    if let Some(d) = args.d {
        cfg.proposal.half_width = Some(d);
    }
    if let Some(n) = args.max_accepted {
        cfg.proposal.max_accepted = n;
    }
    if let Some(p) = args.policy {
        cfg.policy = p;
    }
    Ok(cfg)
}

fn emit(doc: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("json serializes") + "\n";
    match out {
        Some(p) => Ok(write_atomic(&cwd_path(p), text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn selected(log: VerdictLog, strategy: Option<Strategy>, model: Option<&str>) -> VerdictLog {
    if strategy.is_none() && model.is_none() {
        log
    } else {
        log.filter(strategy, model)
    }
}

fn run_eval(metric: EvalCommand) -> Result<(), Failure> {
    match metric {
        EvalCommand::PassingRate { log, strategy, model, out } => {
            let log = selected(VerdictLog::load(&log)?, strategy, model.as_deref());
            let mut rates = serde_json::Map::new();
            for (s, m) in log.groups() {
                let rate = passing_rate(&log, s, &m)?;
                rates
                    .entry(m)
                    .or_insert_with(|| json!({}))
                    .as_object_mut()
                    .expect("object")
                    .insert(s.to_string(), json!(rate));
            }
            emit(&json!({ "passing_rate": rates }), out.as_deref())
        }
        EvalCommand::Filter { log, strategy, model, out } => {
            let log = selected(VerdictLog::load(&log)?, strategy, model.as_deref());
            let q = precision_recall_posratio(&log)?;
            emit(&json!({ "filter_quality": q }), out.as_deref())
        }
        EvalCommand::Ranking { benchmark, outcomes, out } => {
            let queries = load_benchmark(&benchmark)?;
            let outcomes = load_outcomes(&outcomes)?;
            let m = ranking_metrics(&outcomes, &queries)?;
            emit(&json!({ "ranking": m }), out.as_deref())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::KernelDump { d, out } => {
            let kernel = Kernel::new(d).map_err(|e| usage(e.to_string()))?;
            emit(&serde_json::to_value(KernelDump::from(&kernel)).expect("json"), out.as_deref())
        }
        Command::Propose(args) => {
            let cfg = load_config(&args)?;
            cfg.validate()?;
            let stage = proposal_stage(&cfg)?;
            let trace = stage.outcome.trace();
            write_atomic(&cfg.resolve(&cfg.output.trace), trace_to_json(&trace).as_bytes())?;
            let accepted: Vec<Value> = stage
                .outcome
                .accepted()
                .map(|s| json!({ "id": s.candidate.id(), "center_px": [s.candidate.center.x, s.candidate.center.y], "response": s.candidate.response }))
                .collect();
            emit(
                &json!({ "accepted": accepted, "iterations": trace.len(), "stop_reason": stage.outcome.stop }),
                None,
            )
        }
        Command::Pipeline(args) => {
            let cfg = load_config(&args)?;
            let out = run_pipeline(&cfg)?;
            write_outputs(&cfg, &out)?;
            eprintln!(
                "ranked {} site(s); report {}",
                out.report.sites.len(),
                cfg.resolve(&cfg.output.report).display()
            );
            Ok(())
        }
        Command::Eval { metric } => run_eval(metric),
        Command::ValidateConfig(args) => {
            let cfg = load_config(&args)?;
            cfg.validate()?;
            println!("ok {}", cfg.digest());
            Ok(())
        }
        Command::Demo { dir } => {
            let path = demo::write_demo_scenario(&dir)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
