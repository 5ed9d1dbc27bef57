//! `turnbench` command line.

use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use turnbench::engine::{builtin_tasks, TaskSpec};
use turnbench::harness::{
    parse_log, read_log, replay, run_evaluation, Agent, AutobattleAgent, EpisodeResult,
    EpisodeService, EvaluationPlan, EvaluationReport, LogRecord, RandomAgent, Regime,
    SubprocessAgent, SCHEMA_VERSION,
};
use turnbench_cli::remote::HttpAgent;
use turnbench_cli::{server, stdio};

#[derive(Parser)]
#[command(
    name = "turnbench",
    version,
    about = "Turn-based squad combat benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an agent over tasks and trials.
    Run(RunArgs),
    /// Host episodes over HTTP.
    Serve(ServeArgs),
    /// Aggregate step logs into tables.
    Report(ReportArgs),
    /// Re-execute a step log and print its final state digest.
    Replay(ReplayArgs),
    /// Check task spec files (the shipped tasks when none are given).
    Validate(ValidateArgs),
    /// Run a built-in policy as a stdio agent.
    Agent(AgentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Random,
    Autobattle,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in policy to evaluate.
    #[arg(long, value_enum, group = "who")]
    agent: Option<Policy>,
    /// Shell command for an agent speaking the framed stdio protocol.
    #[arg(long, group = "who")]
    agent_cmd: Option<String>,
    /// URL an agent answers request envelopes on.
    #[arg(long, group = "who")]
    endpoint: Option<String>,
    /// Comma-separated task ids, or `all`.
    #[arg(long, default_value = "all")]
    tasks: String,
    /// Task spec files to use instead of the shipped tasks.
    #[arg(long = "task-file")]
    task_files: Vec<PathBuf>,
    #[arg(long, default_value = "TA")]
    regime: Regime,
    #[arg(long, default_value_t = 8)]
    trials: u32,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-decision timeout in seconds for external agents (0 disables it).
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long)]
    exchange_cap: Option<u64>,
    #[arg(long, env = "TURNBENCH_LOG_DIR")]
    log_dir: Option<PathBuf>,
    /// Write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, env = "TURNBENCH_LOG_DIR")]
    log_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Step log files or directories of them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Replay each log and reject it if it does not reproduce.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    log: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct AgentArgs {
    #[arg(value_enum)]
    policy: Policy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema: u32,
    reports: &'a [EvaluationReport],
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Serve(args) => serve(args),
        Command::Report(args) => report(args),
        Command::Replay(args) => replay_log(args),
        Command::Validate(args) => validate(args),
        Command::Agent(args) => {
            let mut agent = builtin_agent(args.policy, args.seed);
            let stdin = io::stdin();
            stdio::serve_agent(
                agent.as_mut(),
                BufReader::new(stdin.lock()),
                io::stdout().lock(),
            )?;
            Ok(())
        }
    }
}

fn builtin_agent(policy: Policy, seed: u64) -> Box<dyn Agent> {
    match policy {
        Policy::Random => Box::new(RandomAgent::new(seed)),
        Policy::Autobattle => Box::new(AutobattleAgent),
    }
}

fn select_tasks(list: &str, files: &[PathBuf]) -> Result<Vec<Arc<TaskSpec>>> {
    let pool = if files.is_empty() {
        builtin_tasks()
    } else {
        files
            .iter()
            .map(|p| TaskSpec::from_file(p).with_context(|| format!("loading {}", p.display())))
            .collect::<Result<_>>()?
    };
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(pool.into_iter().map(Arc::new).collect());
    }
    list.split(',')
        .map(|id| {
            let id: u8 = id
                .trim()
                .parse()
                .with_context(|| format!("bad task id {id:?}"))?;
            pool.iter()
                .find(|t| t.task_id == id)
                .cloned()
                .map(Arc::new)
                .with_context(|| format!("no task {id}"))
        })
        .collect()
}

fn write_json(path: &Path, reports: &[EvaluationReport]) -> Result<()> {
    let body = serde_json::to_string_pretty(&ReportFile {
        schema: SCHEMA_VERSION,
        reports,
    })?;
    std::fs::write(path, body + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let tasks = select_tasks(&args.tasks, &args.task_files)?;
    let timeout = (args.timeout > 0.0).then(|| Duration::from_secs_f64(args.timeout));
    let mut plan = EvaluationPlan::new(tasks, args.regime, args.trials);
    plan.seed_base = args.seed;
    plan.log_dir = args.log_dir;
    plan.exchange_cap = args.exchange_cap;
    let report = match (args.agent, args.agent_cmd, args.endpoint) {
        (Some(policy), None, None) => run_evaluation(&plan, &mut |_, config| {
            Ok(builtin_agent(policy, config.seed))
        })?,
        (None, Some(cmd), None) => run_evaluation(&plan, &mut |_, _| {
            SubprocessAgent::spawn(&cmd, timeout)
                .map(|a| Box::new(a) as Box<dyn Agent>)
                .map_err(|e| e.to_string())
        })?,
        (None, None, Some(url)) => run_evaluation(&plan, &mut |_, _| {
            Ok(Box::new(HttpAgent::new(url.clone(), timeout)))
        })?,
        _ => bail!("choose one of --agent, --agent-cmd or --endpoint"),
    };
    print!("{}", report.to_text());
    if let Some(path) = &args.json {
        write_json(path, std::slice::from_ref(&report))?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let service = Arc::new(EpisodeService::builtin(args.log_dir));
    let restored = service
        .recover()
        .context("recovering episodes from the log directory")?;
    if !restored.is_empty() {
        eprintln!("restored {} episodes", restored.len());
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(server::serve(service, &args.addr))
        .with_context(|| format!("serving on {}", args.addr))
}

fn collect_logs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(path.clone());
        }
    }
    Ok(out)
}

fn report(args: ReportArgs) -> Result<()> {
    let mut results: Vec<EpisodeResult> = Vec::new();
    for path in collect_logs(&args.paths)? {
        let records = read_log(&path).with_context(|| format!("reading {}", path.display()))?;
        if args.verify {
            replay(&records, turnbench::harness::builtin_oracle())
                .with_context(|| format!("{} does not replay", path.display()))?;
        }
        match records.into_iter().find_map(|r| match r {
            LogRecord::Result(r) => Some(*r),
            _ => None,
        }) {
            Some(r) => results.push(r),
            None => eprintln!("skipping {}: episode unfinished", path.display()),
        }
    }
    if results.is_empty() {
        bail!("no finished episodes found");
    }
    let reports = EvaluationReport::group(results);
    let mut out = io::stdout().lock();
    for r in &reports {
        writeln!(out, "{}", r.to_text())?;
    }
    if let Some(path) = &args.json {
        write_json(path, &reports)?;
    }
    Ok(())
}

fn replay_log(args: ReplayArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.log)
        .with_context(|| format!("reading {}", args.log.display()))?;
    let records = parse_log(&text)?;
    let report = replay(&records, turnbench::harness::builtin_oracle())?;
    println!("exchanges: {}", report.exchanges);
    match &report.result {
        Some(r) => println!("outcome: {}", r.outcome.label()),
        None => println!("outcome: incomplete"),
    }
    println!("final_digest: {}", report.final_digest);
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    if args.files.is_empty() {
        for t in builtin_tasks() {
            println!("ok builtin task {}: {}", t.task_id, t.name);
        }
        return Ok(());
    }
    let mut bad = 0;
    for path in &args.files {
        match TaskSpec::from_file(path) {
            Ok(t) => println!("ok {}: task {} {}", path.display(), t.task_id, t.name),
            Err(e) => {
                bad += 1;
                println!("error {}: {e}", path.display());
            }
        }
    }
    if bad > 0 {
        bail!("{bad} of {} task files are invalid", args.files.len());
    }
    Ok(())
}
