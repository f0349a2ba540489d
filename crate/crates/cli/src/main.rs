use std::fs;
use std::io::{self, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tpp_core::analysis::{monte_carlo, AnalysisReport, SchemeParams, SimulationConfig, Strategy, UsabilityConstants};
use tpp_core::storage::{HashCost, Recovery};
use tpp_core::{Authenticator, ChallengeStore, CredentialStore, DetectionPolicy, Scheme};
use tpp_service::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "tpp", version, about = "Two-password colored-grid authentication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Monte Carlo attack simulation, written as CSV.
    Simulate(SimulateArgs),
    /// Closed-form security and usability report.
    Analyze(AnalyzeArgs),
}

#[derive(clap::Args)]
struct ServeArgs {
    /// Log file for store A (hashed first passwords).
    #[arg(long)]
    store_a: PathBuf,
    /// Log file for store B (second passwords and challenge state).
    #[arg(long)]
    store_b: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = Ipv4Addr::LOCALHOST.into())]
    bind: std::net::IpAddr,
    #[arg(long, value_enum, default_value_t = PolicyArg::Block)]
    policy: PolicyArg,
    /// Bearer token for the admin routes. Admin routes are disabled without one.
    #[arg(long, env = "TPP_ADMIN_TOKEN", hide_env_values = true)]
    admin_token: Option<String>,
    /// Session lifetime in seconds.
    #[arg(long, default_value_t = 120)]
    session_ttl: u64,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SchemeArg::Icip)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Sessions the adversary records.
    #[arg(long, default_value_t = 1)]
    budget: u32,
    #[arg(long, value_enum, default_value_t = StrategyArg::Record)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// `default`, or a JSON file with scheme parameters.
    #[arg(long, default_value = "default")]
    params: String,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add Monte Carlo lines with this many trials.
    #[arg(long)]
    mc_trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Block,
    Alarm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Bcip,
    Icip,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Record,
    Premature,
    Msv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(args),
        Command::Simulate(args) => simulate(args),
        Command::Analyze(args) => analyze(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let config = SimulationConfig {
        scheme: match args.scheme {
            SchemeArg::Bcip => Scheme::Bcip,
            SchemeArg::Icip => Scheme::Icip,
        },
        strategy: match args.strategy {
            StrategyArg::Record => Strategy::Record,
            StrategyArg::Premature => Strategy::Premature,
            StrategyArg::Msv => Strategy::Msv,
        },
        trials: args.trials,
        budget: args.budget,
        seed: args.seed,
    };
    let report = monte_carlo(&config)?;
    emit(args.out.as_deref(), &report.to_csv())?;
    if report.invariant_violations > 0 {
        eprintln!("error: {} invariant violations", report.invariant_violations);
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let params = match args.params.as_str() {
        "default" => SchemeParams::default(),
        path => {
            let raw = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            serde_json::from_str(&raw).with_context(|| format!("parsing {path}"))?
        }
    };
    let consts = UsabilityConstants::default();
    let report = match args.mc_trials {
        Some(trials) => AnalysisReport::with_monte_carlo(&params, &consts, trials, args.seed)?,
        None => AnalysisReport::closed_forms(&params, &consts)?,
    };
    let text = if args.csv { report.to_csv() } else { report.to_text() };
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

/// Absolute form of a path that may not exist yet.
fn resolved(path: &Path) -> Result<PathBuf> {
    if let Ok(p) = path.canonicalize() {
        return Ok(p);
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let parent = parent
        .canonicalize()
        .with_context(|| format!("directory of {} does not exist", path.display()))?;
    Ok(parent.join(path.file_name().context("store path has no file name")?))
}

fn report_recovery(name: &str, path: &Path, recovery: &Recovery) {
    eprintln!("{name}: {} ({} records)", path.display(), recovery.records);
    if recovery.truncated_bytes > 0 {
        eprintln!("{name}: dropped {} bytes of torn tail", recovery.truncated_bytes);
    }
}

fn serve(args: ServeArgs) -> Result<ExitCode> {
    if resolved(&args.store_a)? == resolved(&args.store_b)? {
        bail!("store A and store B must be different files");
    }
    let (store_a, rec_a) = CredentialStore::open(&args.store_a, HashCost::default())
        .with_context(|| format!("opening store A at {}", args.store_a.display()))?;
    let (store_b, rec_b) = ChallengeStore::open(&args.store_b)
        .with_context(|| format!("opening store B at {}", args.store_b.display()))?;
    report_recovery("store A", &args.store_a, &rec_a);
    report_recovery("store B", &args.store_b, &rec_b);

    let policy = match args.policy {
        PolicyArg::Block => DetectionPolicy::Block,
        PolicyArg::Alarm => DetectionPolicy::Alarm,
    };
    if args.admin_token.is_none() {
        eprintln!("warning: no admin token; admin routes will answer 403");
    }
    let config = ServiceConfig {
        session_ttl: std::time::Duration::from_secs(args.session_ttl),
        admin_token: args.admin_token,
        seed: None,
    };
    let app = router(AppState::new(Authenticator::new(store_a, store_b, policy), config));
    let addr = SocketAddr::new(args.bind, args.port);

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(e) if e.kind() == io::ErrorKind::AddrInUse => {
                bail!("port {} is already in use on {}", addr.port(), addr.ip())
            }
            Err(e) => return Err(e).with_context(|| format!("binding {addr}")),
        };
        eprintln!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        tpp_service::serve(listener, app, shutdown).await?;
        Ok(ExitCode::SUCCESS)
    })
}
