mod consult;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use knet_core::kbformat::{self, KbError, Mode};
use knet_core::wire::{beliefs_view, recommendation_view, resolve_findings, round7};
use knet_core::{
    posterior, DecisionError, EngineChoice, FindingError, Findings, Network, NodeId, PreparedNetwork,
};

/// Exit codes.
const INVALID: u8 = 1;
const USAGE: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "knet", version, about = "Belief and decision network tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a knowledge base and print its validation report.
    Validate {
        file: PathBuf,
        /// Accept unknown keys instead of rejecting them.
        #[arg(long)]
        lenient: bool,
    },
    /// Print posterior beliefs as JSON.
    Infer {
        file: PathBuf,
        /// Findings as NODE=STATE.
        #[arg(long, short, num_args = 1..)]
        evidence: Vec<String>,
        /// Only print these nodes.
        #[arg(long, short, num_args = 1..)]
        query: Vec<String>,
        #[arg(long, default_value = "auto", value_parser = ["auto", "oracle", "exact"])]
        engine: String,
    },
    /// Print the ranked decision configurations as JSON.
    Decide {
        file: PathBuf,
        #[arg(long, short, num_args = 1..)]
        evidence: Vec<String>,
    },
    /// Interactive consultation on standard input.
    Consult { file: PathBuf },
    /// Print a knowledge base in canonical form.
    Fmt {
        file: PathBuf,
        #[arg(long)]
        lenient: bool,
        /// Exit with status 1 if the file is not already canonical.
        #[arg(long)]
        check: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        kb_dir: PathBuf,
        #[arg(long, default_value_t = knet_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Idle seconds before a session is dropped.
        #[arg(long, default_value_t = knet_service::DEFAULT_SESSION_TTL.as_secs())]
        session_ttl: u64,
        /// Serve static files (a built front end) from this directory.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure { code, error: error.into() }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { file, lenient } => validate(&file, lenient),
        Command::Infer { file, evidence, query, engine } => {
            let engine: EngineChoice = engine.parse().map_err(|e: String| Failure::new(USAGE, anyhow!(e)))?;
            infer(&file, &evidence, &query, engine)
        }
        Command::Decide { file, evidence } => decide(&file, &evidence),
        Command::Consult { file } => {
            let network = load(&file, Mode::Strict)?;
            let name = kb_name(&file);
            let prepared = PreparedNetwork::new(network).map_err(|e| Failure::new(RUNTIME, e))?;
            let stdin = std::io::stdin();
            let interactive = std::io::IsTerminal::is_terminal(&stdin);
            consult::run(prepared, &name, stdin.lock(), std::io::stdout().lock(), interactive)
                .map_err(|e| Failure::new(RUNTIME, e))
        }
        Command::Fmt { file, lenient, check } => fmt(&file, lenient, check),
        Command::Serve { kb_dir, port, host, session_ttl, static_dir } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let config = knet_service::Config {
                kb_dir,
                host,
                port,
                session_ttl: Duration::from_secs(session_ttl),
                static_dir,
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new(RUNTIME, e))?;
            rt.block_on(knet_service::run(config)).map_err(|e| Failure::new(RUNTIME, e))
        }
    }
}

fn kb_name(path: &Path) -> String {
    let file = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    file.strip_suffix(kbformat::FILE_EXTENSION).unwrap_or(file).to_owned()
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| Failure::new(RUNTIME, e))
}

fn load(path: &Path, mode: Mode) -> Result<Network, Failure> {
    let text = read(path)?;
    kbformat::parse_with(&text, mode)
        .with_context(|| format!("{} is not a valid knowledge base", path.display()))
        .map_err(|e| Failure::new(INVALID, e))
}

fn validate(path: &Path, lenient: bool) -> Outcome {
    let text = read(path)?;
    let mode = if lenient { Mode::Lenient } else { Mode::Strict };
    match kbformat::parse_with(&text, mode) {
        Ok(net) => {
            println!("valid: {} ({} network, {} nodes)", path.display(), net.kind, net.nodes.len());
            Ok(())
        }
        Err(KbError::Validation(report)) => {
            println!("{report}");
            let rules: Vec<String> = report.errors.iter().map(|e| e.rule.to_string()).collect();
            Err(Failure::new(INVALID, anyhow!("{} failed validation: {}", path.display(), rules.join(", "))))
        }
        Err(e) => {
            println!("{e}");
            Err(Failure::new(INVALID, anyhow!("{}: {e}", path.display())))
        }
    }
}

fn findings(network: &Network, specs: &[String]) -> Result<Findings, Failure> {
    let pairs = specs
        .iter()
        .map(|s| {
            s.split_once('=')
                .ok_or_else(|| Failure::new(USAGE, anyhow!("evidence {s:?} is not of the form NODE=STATE")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    resolve_findings(network, pairs).map_err(finding_failure)
}

fn finding_failure(e: FindingError) -> Failure {
    Failure::new(USAGE, e)
}

fn decision_failure(e: DecisionError) -> Failure {
    match e {
        DecisionError::Inference(knet_core::InferenceError::Finding(f)) => finding_failure(f),
        DecisionError::MalformedDecisionNetwork(_) => Failure::new(INVALID, e),
        other => Failure::new(RUNTIME, other),
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(value).expect("output serializes"));
}

fn infer(path: &Path, evidence: &[String], query: &[String], engine: EngineChoice) -> Outcome {
    let network = load(path, Mode::Strict)?;
    let findings = findings(&network, evidence)?;
    let query: Vec<NodeId> = query.iter().map(|q| NodeId::new(q.as_str())).collect();
    for q in &query {
        if network.chance_nodes().all(|c| &c.id != q) {
            return Err(Failure::new(USAGE, anyhow!("{q} is not a chance node")));
        }
    }
    let out = posterior(&network, &findings, engine).map_err(decision_failure)?;
    let filter = (!query.is_empty()).then_some(query.as_slice());
    print_json(&beliefs_view(&network, &out.beliefs, filter, round7));
    Ok(())
}

fn decide(path: &Path, evidence: &[String]) -> Outcome {
    let network = load(path, Mode::Strict)?;
    if !network.is_decision_network() {
        return Err(Failure::new(USAGE, anyhow!("{} is not a decision network", path.display())));
    }
    let findings = findings(&network, evidence)?;
    let rec = knet_core::recommend(&network, &findings).map_err(decision_failure)?;
    print_json(&recommendation_view(&network, &rec));
    Ok(())
}

fn fmt(path: &Path, lenient: bool, check: bool) -> Outcome {
    let text = read(path)?;
    let mode = if lenient { Mode::Lenient } else { Mode::Strict };
    let canonical = kbformat::canonicalize(&text, mode)
        .with_context(|| format!("{} is not a valid knowledge base", path.display()))
        .map_err(|e| Failure::new(INVALID, e))?;
    if check {
        if canonical != text {
            return Err(Failure::new(INVALID, anyhow!("{} is not in canonical form", path.display())));
        }
        return Ok(());
    }
    print!("{canonical}");
    Ok(())
}
