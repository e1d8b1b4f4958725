use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agint_core::agent::remote::RemoteAgent;
use agint_core::agent::Agent;
use agint_core::report::{evidence_jsonl, render_report, revisions_jsonl};
use agint_core::scenario::{BackendKind, DiagnosticClass};
use agint_core::trace::{parse_jsonl, render_table, replay, to_jsonl};
use agint_core::{load_scenario, EpochRun, RunError, Scenario};
use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_INPUT: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "agint",
    version,
    about = "Run agent-assessed claim analyses to a fixpoint"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace, report and audit files.
    Run(RunArgs),
    /// Validate a scenario without running it.
    Check { scenario: PathBuf },
    /// Re-fold a JSONL trace and print the final assessments.
    Replay { trace: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceFormat {
    Table,
    Json,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    Scripted,
    Remote,
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    /// fifo, lifo, wto, goal-directed, feedback-priority, scripted-order or shuffled.
    #[arg(long)]
    policy: Option<String>,
    /// Seed for the shuffled policy.
    #[arg(long)]
    seed: Option<u64>,
    /// Hard cap on processed steps per epoch.
    #[arg(long)]
    budget_cap: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    trace: TraceFormat,
    #[arg(long, default_value = "agint-out")]
    out: PathBuf,
    /// Maximum number of epochs.
    #[arg(long)]
    epochs: Option<u32>,
    /// Overrides the scenario's agent backend.
    #[arg(long, value_enum)]
    agent: Option<AgentKind>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Check { scenario } => cmd_check(&scenario),
        Command::Replay { trace } => cmd_replay(&trace),
    }
}

fn load(path: &Path) -> Option<Scenario> {
    match load_scenario(path) {
        Ok(sc) => Some(sc),
        Err(e) => {
            for d in &e.diagnostics {
                if d.class == DiagnosticClass::Io {
                    eprintln!("{d}");
                } else {
                    eprintln!("{}:{d}", path.display());
                }
            }
            None
        }
    }
}

fn cmd_check(path: &Path) -> ExitCode {
    let Some(sc) = load(path) else {
        return ExitCode::from(EXIT_INPUT);
    };
    println!(
        "{}: ok ({} nodes, {} claims, {} script entries, {} epoch(s))",
        path.display(),
        sc.graph.nodes().count(),
        sc.claims.len(),
        sc.script.len(),
        sc.epochs.epoch_limit
    );
    ExitCode::SUCCESS
}

fn cmd_replay(path: &Path) -> ExitCode {
    let result = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .and_then(|text| Ok(parse_jsonl(&text)?))
        .and_then(|traces| {
            let labels: std::collections::BTreeMap<_, _> = traces
                .iter()
                .flat_map(|t| {
                    t.init
                        .claims
                        .iter()
                        .map(|c| ((c.node.clone(), c.key.clone()), c.label.clone()))
                })
                .chain(traces.iter().flat_map(|t| {
                    t.steps.iter().flat_map(|s| {
                        s.inserted
                            .iter()
                            .map(|c| ((c.node.clone(), c.key.clone()), c.label.clone()))
                    })
                }))
                .collect();
            let p = replay(&traces)?;
            Ok((p, labels))
        });
    match result {
        Ok((p, labels)) => {
            for ((n, k), a) in p {
                let label = labels.get(&(n.clone(), k.clone())).cloned().unwrap_or(k);
                println!("{label}@{n} = {}", a.compact());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

enum Backend {
    Scripted(agint_core::agent::ScriptedAgent),
    Remote(RemoteAgent),
}

impl Backend {
    fn agent(&mut self) -> &mut dyn Agent {
        match self {
            Backend::Scripted(a) => a,
            Backend::Remote(a) => a,
        }
    }
}

fn backend(sc: &Scenario, kind: Option<AgentKind>) -> anyhow::Result<Backend> {
    let remote = match kind {
        Some(k) => k == AgentKind::Remote,
        None => sc.backend == BackendKind::Remote,
    };
    if !remote {
        return Ok(Backend::Scripted(sc.scripted_agent()));
    }
    let endpoint = std::env::var("AGENT_ENDPOINT")
        .ok()
        .filter(|e| !e.is_empty())
        .or_else(|| sc.remote.endpoint.clone());
    let Some(endpoint) = endpoint else {
        bail!("the remote backend needs AGENT_ENDPOINT or agent.remote.endpoint");
    };
    let token = std::env::var("AGENT_TOKEN").ok().filter(|t| !t.is_empty());
    Ok(Backend::Remote(RemoteAgent::new(
        endpoint,
        token,
        sc.remote.timeout,
    )))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_exchanges(dir: &Path, backend: &Backend) -> anyhow::Result<()> {
    if let Backend::Remote(r) = backend {
        let lines: String = r
            .exchanges()
            .iter()
            .map(|e| serde_json::to_string(e).expect("exchange serializes") + "\n")
            .collect();
        write_out(dir, "agent_exchanges.jsonl", &lines)?;
    }
    Ok(())
}

fn write_outputs(
    dir: &Path,
    sc: &Scenario,
    run: &EpochRun,
    format: TraceFormat,
) -> anyhow::Result<()> {
    if format != TraceFormat::Json {
        write_out(dir, "trace.txt", &render_table(&run.traces))?;
    }
    if format != TraceFormat::Table {
        write_out(dir, "trace.jsonl", &to_jsonl(&run.traces))?;
    }
    write_out(dir, "report.txt", &render_report(sc, run))?;
    write_out(dir, "evidence.jsonl", &evidence_jsonl(&run.state))?;
    write_out(dir, "revisions.jsonl", &revisions_jsonl(&run.log))?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let Some(mut sc) = load(&args.scenario) else {
        return ExitCode::from(EXIT_INPUT);
    };
    let mut opts = sc.run_options();
    if let Some(name) = &args.policy {
        match sc.policy_named(name, args.seed) {
            Some(p) => opts.policy = p,
            None => {
                eprintln!("error: unknown policy {name:?}, or the scenario lacks what it needs (steps or goal claim)");
                return ExitCode::from(EXIT_INPUT);
            }
        }
    }
    if let Some(cap) = args.budget_cap {
        opts.hard_step_cap = Some(cap);
    }
    if let Some(e) = args.epochs {
        if e == 0 {
            eprintln!("error: --epochs must be at least 1");
            return ExitCode::from(EXIT_INPUT);
        }
        sc.epochs.epoch_limit = e;
    }
    let mut backend = match backend(&sc, args.agent) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: creating {}: {e}", args.out.display());
        return ExitCode::from(EXIT_INPUT);
    }

    let result = sc.run(backend.agent(), &opts);
    if let Err(e) = write_exchanges(&args.out, &backend) {
        eprintln!("error: {e:#}");
    }
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                RunError::BudgetExceeded { .. } | RunError::BoundViolated { .. } => EXIT_BUDGET,
                ref e if e.is_transport() => EXIT_TRANSPORT,
                _ => EXIT_INPUT,
            };
            return ExitCode::from(code);
        }
    };
    if let Err(e) = write_outputs(&args.out, &sc, &run, args.trace) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INPUT);
    }
    if args.trace != TraceFormat::Json {
        println!("{}", render_table(&run.traces));
    }
    print!("{}", render_report(&sc, &run));
    ExitCode::SUCCESS
}
