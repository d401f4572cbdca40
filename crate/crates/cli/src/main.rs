//! `btmc`: compile, check, run and export behavior-tree models.
//!
//! Exit codes: 0 success, 1 invalid input or root Failure, 2 missing file,
//! 3 verdict differs from `expect:`, 4 exploration limit hit, 5 run stopped
//! before the root finished, 6 provider error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use btmc::model::{compile, dump_model, model_dot, ComposedModel, CompileOptions, TickSemantics, Variant};
use btmc::props::{check, default_properties, parse_properties, write_report, Property, ReportLine, VerdictValue};
use btmc::runtime::{run, OutcomeScript, Pacing, RunConfig, RunOutcome, ScriptedProvider, TraceFormat};
use btmc::statespace::{dump_graph, dump_trace, explore, ExploreError, Limits, StateGraph};
use btmc::syntax::{load, ValidatedSpec};

const EXIT_INVALID: u8 = 1;
const EXIT_MISSING: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_LIMIT: u8 = 4;
const EXIT_STOPPED: u8 = 5;
const EXIT_PROVIDER: u8 = 6;

#[derive(Parser)]
#[command(name = "btmc", version, about = "Behavior-tree compiler, model checker and runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a tree and report its automata.
    Compile {
        #[command(flatten)]
        model: ModelArgs,
        /// Compile the executable variant instead of the verification one.
        #[arg(long)]
        runtime: bool,
        /// Directory for the model dump and the automata graph.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explore the state space and evaluate properties.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        limits: LimitArgs,
        /// Property file.
        #[arg(long)]
        props: Option<PathBuf>,
        /// Also check the per-node default properties (implied without --props).
        #[arg(long)]
        default_props: bool,
        /// Let environment variables change at any moment, not only on ticks.
        #[arg(long)]
        free_env: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for witness traces; without it they follow the report.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print per-property times (makes the report non-reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Execute the tree against a scripted provider.
    Run {
        #[command(flatten)]
        model: ModelArgs,
        /// Outcome script.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Seed for outcomes the script does not fix.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        tick_ms: u64,
        #[arg(long, default_value_t = 1000)]
        max_ticks: u64,
        /// Run ticks back to back instead of in real time.
        #[arg(long = "virtual")]
        virtual_time: bool,
        /// Trace destination; stdout by default.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value = "lines")]
        format: TraceFormat,
    },
    /// Explore the state space and export it.
    Graph {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// `.btf` document.
    input: PathBuf,
    /// Tree to use when the document has several.
    #[arg(long)]
    tree: Option<String>,
    #[arg(long = "tick-semantics", alias = "tick", default_value = "root", value_parser = parse_tick)]
    tick: TickSemantics,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, default_value_t = Limits::default().max_states)]
    max_states: usize,
    #[arg(long, default_value_t = Limits::default().max_time.as_secs())]
    max_seconds: u64,
}

impl LimitArgs {
    fn limits(&self) -> Limits {
        Limits { max_states: self.max_states, max_time: Duration::from_secs(self.max_seconds) }
    }
}

fn parse_tick(s: &str) -> Result<TickSemantics, String> {
    TickSemantics::parse(s).ok_or_else(|| format!("unknown tick semantics `{s}` (expected root, leaves or all)"))
}

/// Failure with an exit code and a message for stderr.
struct Fail(u8, String);

type Res<T> = Result<T, Fail>;

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Fail(EXIT_MISSING, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|e| Fail(EXIT_MISSING, format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Res<ValidatedSpec> {
    let spec = load(&read(path)?).map_err(|e| Fail(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    for w in &spec.warnings {
        eprintln!("{}: {w}", path.display());
    }
    Ok(spec)
}

fn build(args: &ModelArgs, variant: Variant, free_env: bool) -> Res<(ValidatedSpec, ComposedModel)> {
    let spec = load_spec(&args.input)?;
    let opts = CompileOptions { tick: args.tick, variant, free_env };
    let m = compile(&spec, args.tree.as_deref(), opts).map_err(|e| Fail(EXIT_INVALID, e.to_string()))?;
    Ok((spec, m))
}

/// Explore, turning a hit limit into a partial graph.
fn explore_partial(m: &ComposedModel, limits: Limits) -> Res<StateGraph> {
    match explore(m, limits) {
        Ok(g) => Ok(g),
        Err(ExploreError::LimitExceeded { limit, graph }) => {
            eprintln!("warning: {limit} reached after {} states; results are partial", graph.num_states());
            Ok(*graph)
        }
        Err(e) => Err(Fail(EXIT_INVALID, e.to_string())),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| Fail(EXIT_MISSING, e.to_string()))
        }
    }
}

fn cmd_compile(model: &ModelArgs, runtime: bool, out: Option<&Path>) -> Res<u8> {
    let variant = if runtime { Variant::Runtime } else { Variant::Offline };
    let (_, m) = build(model, variant, false)?;
    println!(
        "{} processes ({} nodes, {} state variables, 1 ticker), {} transitions",
        m.processes.len(),
        m.nodes.len(),
        m.svs.len(),
        m.transitions.len()
    );
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Fail(EXIT_MISSING, format!("{}: {e}", dir.display())))?;
        write(&dir.join(format!("{}.model", m.name)), &dump_model(&m))?;
        write(&dir.join(format!("{}.dot", m.name)), &model_dot(&m))?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    model: &ModelArgs,
    limits: &LimitArgs,
    props: Option<&Path>,
    default_props: bool,
    free_env: bool,
    out: Option<&Path>,
    trace_dir: Option<&Path>,
    timings: bool,
) -> Res<u8> {
    let (_, m) = build(model, Variant::Offline, free_env)?;
    let mut properties: Vec<Property> = Vec::new();
    if let Some(p) = props {
        let text = read(p)?;
        properties = parse_properties(&text).map_err(|e| Fail(EXIT_INVALID, format!("{}: {e}", p.display())))?;
    }
    if props.is_none() || default_props {
        properties.extend(default_properties(&m));
    }
    let g = explore_partial(&m, limits.limits())?;
    eprintln!("{} states, {} transitions", g.num_states(), g.num_edges());
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir).map_err(|e| Fail(EXIT_MISSING, format!("{}: {e}", dir.display())))?;
    }
    let mut lines = Vec::new();
    let mut appendix = String::new();
    for p in &properties {
        let start = Instant::now();
        let v = check(&m, &g, p).map_err(|e| Fail(EXIT_INVALID, format!("property `{}`: {e}", p.name)))?;
        let elapsed = timings.then(|| start.elapsed());
        let witness = match (&v.witness, trace_dir) {
            (Some(w), Some(dir)) => {
                let path = dir.join(format!("{}.trace", p.name));
                write(&path, &dump_trace(&m, &g, w))?;
                Some(path.display().to_string())
            }
            (Some(w), None) => {
                appendix.push_str(&format!("\n# witness {}\n{}", p.name, dump_trace(&m, &g, w)));
                Some(format!("({} steps, below)", w.edges.len()))
            }
            (None, _) => None,
        };
        lines.push(ReportLine { name: p.name.clone(), verdict: v.value, expect: p.expect, elapsed, witness });
    }
    let mut report = write_report(&lines);
    report.push_str(&appendix);
    emit(out, &report)?;
    let code = if lines.iter().any(ReportLine::mismatch) {
        EXIT_MISMATCH
    } else if !g.is_complete() || lines.iter().any(|l| matches!(l.verdict, VerdictValue::Unknown(_))) {
        EXIT_LIMIT
    } else {
        0
    };
    Ok(code)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    model: &ModelArgs,
    script: Option<&Path>,
    seed: Option<u64>,
    tick_ms: u64,
    max_ticks: u64,
    virtual_time: bool,
    trace: Option<&Path>,
    format: TraceFormat,
) -> Res<u8> {
    let (spec, m) = build(model, Variant::Runtime, false)?;
    let mut s = match script {
        Some(p) => OutcomeScript::parse(&read(p)?).map_err(|e| Fail(EXIT_INVALID, format!("{}: {e}", p.display())))?,
        None => OutcomeScript::new(),
    };
    // Without a script every outcome is drawn, from seed 0 unless told otherwise.
    s.seed = seed.or(script.is_none().then_some(0));
    let mut provider = ScriptedProvider::new(s, spec.svs.clone());
    let cfg = RunConfig {
        period: Duration::from_millis(tick_ms),
        max_ticks: Some(max_ticks),
        pacing: if virtual_time { Pacing::Virtual } else { Pacing::RealTime },
    };
    let report = run(&m, &mut provider, &cfg);
    emit(trace, &report.trace.render(format))?;
    Ok(match report.outcome {
        RunOutcome::Terminal(o) => {
            eprintln!("root {o} after {} ticks", report.ticks);
            if o == btmc::Outcome::Success {
                0
            } else {
                EXIT_INVALID
            }
        }
        RunOutcome::Stopped => {
            eprintln!("stopped after {} ticks", report.ticks);
            EXIT_STOPPED
        }
        RunOutcome::Aborted(e) => {
            eprintln!("error: tick {}: {e}", report.ticks);
            EXIT_PROVIDER
        }
    })
}

fn cmd_graph(model: &ModelArgs, limits: &LimitArgs, out: Option<&Path>) -> Res<u8> {
    let (_, m) = build(model, Variant::Offline, false)?;
    let g = explore_partial(&m, limits.limits())?;
    emit(out, &dump_graph(&m, &g))?;
    Ok(if g.is_complete() { 0 } else { EXIT_LIMIT })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compile { model, runtime, out } => cmd_compile(model, *runtime, out.as_deref()),
        Command::Check { model, limits, props, default_props, free_env, out, trace, timings } => cmd_check(
            model,
            limits,
            props.as_deref(),
            *default_props,
            *free_env,
            out.as_deref(),
            trace.as_deref(),
            *timings,
        ),
        Command::Run { model, script, seed, tick_ms, max_ticks, virtual_time, trace, format } => cmd_run(
            model,
            script.as_deref(),
            *seed,
            *tick_ms,
            *max_ticks,
            *virtual_time,
            trace.as_deref(),
            *format,
        ),
        Command::Graph { model, limits, out } => cmd_graph(model, limits, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
