//! `companion`: run scripted sessions, summarize transcripts, probe WMD and
//! templates, or serve live sessions over HTTP.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use companion_core::templates::{TemplateConfig, TemplateKind};
use companion_core::{
    format_table, nbow, read_transcript, realize, relaxed_wmd, simulate, to_similarity, wmd, write_transcript,
    PreparedScenario, ResourcePaths, Resources, TurnStats,
};
use companion_service::{generative::DEFAULT_TIMEOUT, AppState, HttpGenerative};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "companion", version, about = "Text-only brain of a TV-watching companion robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its transcript as JSON lines.
    Simulate {
        scenario: PathBuf,
        /// Transcript destination; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn statistics for one or more transcripts, one column per file.
    Stats {
        #[arg(required = true)]
        transcripts: Vec<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Word Mover's Distance between two texts.
    Wmd {
        a: String,
        b: String,
        #[arg(long, default_value = "data")]
        resources: PathBuf,
        /// Also print the transport plan.
        #[arg(long)]
        plan: bool,
    },
    /// Generate the templated utterance for a keyword.
    Gen {
        keyword: String,
        #[arg(long, value_enum, default_value_t = Kind::Question)]
        kind: Kind,
        #[arg(long, default_value = "data")]
        resources: PathBuf,
    },
    /// Serve live sessions over HTTP with a server-sent-events stream.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "data")]
        resources: PathBuf,
        /// Session seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speedup: f64,
        /// Directory for per-session transcript files.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// JSON file of session-config overrides applied to every session.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Endpoint of an external response generator; built-in replies otherwise.
        #[arg(long)]
        generative_url: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_millis() as u64)]
        generative_timeout_ms: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Disclosure,
    Question,
}

/// A data error: bad input files, unusable resources, failed I/O.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn load_resources(dir: &Path) -> Result<Resources, Failure> {
    let resources = Resources::load(&ResourcePaths::in_dir(dir), &TemplateConfig::default())?;
    for w in &resources.warnings {
        log::warn!("{w}");
    }
    Ok(resources)
}

fn run_simulate(scenario: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), Failure> {
    let mut prepared = PreparedScenario::load(scenario)?;
    if let Some(seed) = seed {
        prepared.scenario.seed = seed;
    }
    let result = simulate(&prepared.scenario, &prepared.feed, prepared.resources.clone())?;
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            write_transcript(&result.transcript, BufWriter::new(file))?;
            println!("{}", serde_json::to_string_pretty(&result.summary)?);
        }
        None => write_transcript(&result.transcript, io::stdout().lock())?,
    }
    Ok(())
}

fn run_stats(paths: &[PathBuf], as_json: bool) -> Result<(), Failure> {
    let mut groups = Vec::new();
    for path in paths {
        let file = File::open(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
        let (entries, errors) = read_transcript(BufReader::new(file))?;
        for e in &errors {
            log::warn!("{}:{}: skipped: {}", path.display(), e.line, e.message);
        }
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into());
        groups.push((name, TurnStats::from_entries(&entries)));
    }
    if as_json {
        let map: Map<String, Value> =
            groups.iter().map(|(n, s)| Ok((n.clone(), serde_json::to_value(s)?))).collect::<Result<_, Failure>>()?;
        println!("{}", serde_json::to_string_pretty(&map)?);
    } else {
        print!("{}", format_table(&groups));
    }
    Ok(())
}

fn run_wmd(a: &str, b: &str, resources: &Path, show_plan: bool) -> Result<(), Failure> {
    let res = load_resources(resources)?;
    let doc =
        |text: &str| nbow(&res.tokenizer.tokenize(text), &res.store).map_err(|e| Failure(format!("{text:?}: {e}")));
    let (da, db) = (doc(a)?, doc(b)?);
    let (distance, plan) = wmd(&da, &db, &res.store);
    let mut out = json!({
        "distance": distance,
        "similarity": to_similarity(distance)?,
        "relaxed": relaxed_wmd(&da, &db, &res.store),
    });
    if show_plan {
        out["plan"] = serde_json::to_value(&plan)?;
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_gen(keyword: &str, kind: Kind, resources: &Path) -> Result<(), Failure> {
    let res = load_resources(resources)?;
    let kind = match kind {
        Kind::Disclosure => TemplateKind::Disclosure,
        Kind::Question => TemplateKind::Question,
    };
    let template = res.templates.select(keyword, kind, &res.store)?;
    println!("{}", realize(template, keyword, 0.0).text);
    Ok(())
}

struct ServeArgs {
    addr: String,
    resources: PathBuf,
    speedup: f64,
    transcripts: Option<PathBuf>,
    config: Option<PathBuf>,
    generative_url: Option<String>,
    generative_timeout: Duration,
}

fn run_serve(args: ServeArgs) -> Result<(), Failure> {
    if !(args.speedup.is_finite() && args.speedup > 0.0) {
        return Err(Failure(format!("speedup must be positive, got {}", args.speedup)));
    }
    let mut res = load_resources(&args.resources)?;
    if let Some(url) = &args.generative_url {
        res.dialog.set_generative(Box::new(HttpGenerative::new(url.clone(), args.generative_timeout)?));
    }
    let overrides = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<Map<String, Value>>(&text)
                .map_err(|e| Failure(format!("{}: {e}", path.display())))?
        }
        None => Map::new(),
    };
    // Reject bad overrides now rather than on the first session.
    companion_core::sim::config_with_overrides(&overrides)?;
    if let Some(dir) = &args.transcripts {
        std::fs::create_dir_all(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
    }
    let state = AppState::new(Arc::new(res), overrides, args.transcripts, args.speedup);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        companion_service::serve(listener, state).await
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, out, seed } => run_simulate(&scenario, out.as_deref(), seed),
        Command::Stats { transcripts, json } => run_stats(&transcripts, json),
        Command::Wmd { a, b, resources, plan } => run_wmd(&a, &b, &resources, plan),
        Command::Gen { keyword, kind, resources } => run_gen(&keyword, kind, &resources),
        Command::Serve { addr, resources, speedup, transcripts, config, generative_url, generative_timeout_ms } => {
            run_serve(ServeArgs {
                addr,
                resources,
                speedup,
                transcripts,
                config,
                generative_url,
                generative_timeout: Duration::from_millis(generative_timeout_ms),
            })
        }
    };
    match result {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
