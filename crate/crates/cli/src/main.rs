use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use botshape_core::persistence::to_document_json;
use botshape_core::replay::{compare_golden, parse_script, run_script, ReplayError};
use botshape_core::stats::stats_for_dir;
use botshape_core::Engine;
use botshape_server::{ConceptSourceKind, ServerConfig};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "botshape",
    version,
    about = "Shape a chatbot into a fictional character"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        /// TOML config file; BOTSHAPE_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_concept_source)]
        concept_source: Option<ConceptSourceKind>,
        /// Overrides the bind address, e.g. 127.0.0.1:8080.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Replay a conversation script offline and print its log.
    Replay {
        script: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Golden log to compare against; exits nonzero on the first difference.
        #[arg(long)]
        expect: Option<PathBuf>,
        /// Also write the final session document here.
        #[arg(long)]
        document: Option<PathBuf>,
    },
    /// Line-count statistics over a directory of session documents.
    Stats {
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn parse_concept_source(s: &str) -> Result<ConceptSourceKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve {
            config,
            concept_source,
            bind,
        } => serve(config.as_deref(), concept_source, bind),
        Command::Replay {
            script,
            seed,
            expect,
            document,
        } => replay(&script, seed, expect.as_deref(), document.as_deref()),
        Command::Stats { dir, json } => stats(&dir, json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn serve(
    config: Option<&Path>,
    concept_source: Option<ConceptSourceKind>,
    bind: Option<String>,
) -> Result<ExitCode> {
    let mut cfg = match config {
        Some(path) => ServerConfig::from_file(path)?,
        None => ServerConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(kind) = concept_source {
        cfg.concept_source = kind;
    }
    if let Some(bind) = bind {
        cfg.bind = bind;
    }
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(botshape_server::serve(cfg))?;
    Ok(ExitCode::SUCCESS)
}

fn replay(
    script: &Path,
    seed: u64,
    expect: Option<&Path>,
    document: Option<&Path>,
) -> Result<ExitCode> {
    let source =
        std::fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
    let actions = match parse_script(&source) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}: {e}", script.display());
            return Ok(ExitCode::from(2));
        }
    };
    let outcome = run_script(&Engine::offline(), &actions, seed);
    print!("{}", outcome.log);
    if let Some(path) = document {
        std::fs::write(path, to_document_json(&outcome.session))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let Some(golden) = expect else {
        return Ok(ExitCode::SUCCESS);
    };
    let expected =
        std::fs::read_to_string(golden).with_context(|| format!("reading {}", golden.display()))?;
    match compare_golden(&outcome.log, &expected) {
        Ok(()) => Ok(ExitCode::SUCCESS),
        Err(ReplayError::ExpectationMismatch {
            line,
            expected,
            actual,
        }) => {
            eprintln!("{}: mismatch at line {line}", golden.display());
            let context_start = line.saturating_sub(3);
            for (i, l) in context_lines(&outcome.log, context_start, line) {
                eprintln!("  {i:>4}   {l}");
            }
            eprintln!(
                "  {line:>4} - {}",
                expected.as_deref().unwrap_or("<end of file>")
            );
            eprintln!(
                "  {line:>4} + {}",
                actual.as_deref().unwrap_or("<end of file>")
            );
            Ok(ExitCode::FAILURE)
        }
        Err(e) => Err(e.into()),
    }
}

/// Shared lines just before a divergence (1-based, `from..to` exclusive).
fn context_lines(text: &str, from: usize, to: usize) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(n, _)| *n > from && *n < to)
        .collect()
}

fn stats(dir: &Path, json: bool) -> Result<ExitCode> {
    let stats = stats_for_dir(dir)?;
    if json {
        println!("{}", stats.to_json());
    } else {
        print!("{}", stats.to_text());
    }
    Ok(ExitCode::SUCCESS)
}
