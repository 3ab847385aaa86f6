//! `gaudi`: ingest catalogs, run searches and boards, serve the API.
//!
//! Exit codes: 0 success; 1 load, manifest or config failure; 2 provider
//! failure; 3 empty candidate set; 4 no queries parsed; 64 usage error.

mod config;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gaudi_core::board::{serialize_score, BoardMode};
use gaudi_core::catalog::read_manifest;
use gaudi_core::providers::{MockCompleter, MockEmbedder, RemoteCompleter, RemoteEmbedder};
use gaudi_core::story::generate_queries;
use gaudi_core::{
    generate_board, ingest, load_store, retrieve_text, write_store, BoardError, Catalog,
    CatalogError, CompletionProvider, EmbedProvider, ImageRecord, RetrievalError, StoryError,
    StoryExample,
};
use gaudi_service::{AppState, ServiceConfig};
use serde::Serialize;

use crate::config::Config;

const EXIT_FAILURE: u8 = 1;
const EXIT_PROVIDER: u8 = 2;
const EXIT_EMPTY_CANDIDATES: u8 = 3;
const EXIT_NO_QUERIES: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "gaudi", version, about = "Mood-board search engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a JSONL manifest and write a binary vector store.
    Ingest(IngestArgs),
    /// Rank catalog images against a text query (JSON Lines on stdout).
    Search(SearchArgs),
    /// Turn a briefing into queries and assemble a mood board.
    Board(BoardArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Mock,
    Remote,
}

#[derive(Args)]
struct Common {
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding provider; defaults to remote when an embed URL is configured.
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    embed_url: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    /// Comma-separated image ids to leave out.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BoardArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    briefing: String,
    #[arg(long, default_value = "text")]
    mode: BoardMode,
    #[arg(long, default_value_t = 1)]
    k_per_query: usize,
    /// Use this file's contents as the model completion (offline run).
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// JSON worked example {briefing, queries} replacing the built-in one.
    #[arg(long)]
    example: Option<PathBuf>,
    #[arg(long)]
    llm_url: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    bind: Option<String>,
    /// Use this file's contents as every model completion (offline run).
    #[arg(long)]
    fixture: Option<PathBuf>,
}

/// A message for stderr and the exit code to leave with.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        let code = match e {
            CatalogError::Provider { .. } => EXIT_PROVIDER,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<StoryError> for Failure {
    fn from(e: StoryError) -> Self {
        let code = match e {
            StoryError::EmptyBriefing => EXIT_USAGE,
            StoryError::NoQueriesFound => EXIT_NO_QUERIES,
            StoryError::Provider(_) => EXIT_PROVIDER,
            StoryError::InvalidExample(_) | StoryError::InvalidSampling(_) => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<RetrievalError> for Failure {
    fn from(e: RetrievalError) -> Self {
        let code = match e {
            RetrievalError::EmptyCandidateSet => EXIT_EMPTY_CANDIDATES,
            RetrievalError::InvalidK => EXIT_USAGE,
            RetrievalError::ZeroVector => EXIT_PROVIDER,
            RetrievalError::DimensionMismatch { .. } => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<BoardError> for Failure {
    fn from(e: BoardError) -> Self {
        match e {
            BoardError::Provider(p) => Failure::new(EXIT_PROVIDER, p.to_string()),
            BoardError::Retrieval(r) => r.into(),
            BoardError::EmptyPlan => Failure::new(EXIT_NO_QUERIES, e.to_string()),
            other => Failure::new(EXIT_FAILURE, other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Search(args) => cmd_search(args),
        Command::Board(args) => cmd_board(args),
        Command::Serve(args) => cmd_serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gaudi: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    Config::load(path, |k| std::env::var(k).ok()).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))
}

fn embedder(common: &Common, config: &Config, dim: usize) -> Result<Arc<dyn EmbedProvider>, Failure> {
    let url = common.embed_url.clone().or_else(|| config.embed_url.clone());
    let kind = common.provider.unwrap_or(if url.is_some() {
        ProviderKind::Remote
    } else {
        ProviderKind::Mock
    });
    let provider: Arc<dyn EmbedProvider> = match kind {
        ProviderKind::Mock => Arc::new(
            MockEmbedder::new(dim).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?,
        ),
        ProviderKind::Remote => {
            let url = url.ok_or_else(|| {
                Failure::new(EXIT_USAGE, "remote provider needs embed_url (config, GAUDI_EMBED_URL or --embed-url)")
            })?;
            Arc::new(RemoteEmbedder::new(url, dim).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?)
        }
    };
    Ok(provider)
}

fn read_records(path: &Path) -> Result<Vec<ImageRecord>, Failure> {
    let file = File::open(path).map_err(|e| {
        Failure::new(EXIT_FAILURE, format!("cannot open manifest {}: {e}", path.display()))
    })?;
    Ok(read_manifest(BufReader::new(file))?)
}

fn open_catalog(store: &Path, manifest: &Path) -> Result<Catalog, Failure> {
    let records = read_records(manifest)?;
    let file = File::open(store)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot open store {}: {e}", store.display())))?;
    Ok(load_store(BufReader::new(file), records)?)
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Failure> {
    let config = load_config(args.common.config.as_deref())?;
    let dim = args.dim.unwrap_or(config.dim);
    let provider = embedder(&args.common, &config, dim)?;
    let records = read_records(&args.manifest)?;
    let catalog = ingest(records, provider.as_ref())?;
    let mut bytes = Vec::new();
    write_store(&catalog, &mut bytes)?;
    std::fs::write(&args.out, bytes)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", args.out.display())))?;
    println!("{{\"count\":{},\"dim\":{}}}", catalog.len(), catalog.dim());
    Ok(())
}

#[derive(Serialize)]
struct HitLine<'a> {
    image_id: &'a str,
    #[serde(serialize_with = "serialize_score")]
    score: f64,
    rank: usize,
}

fn cmd_search(args: SearchArgs) -> Result<(), Failure> {
    let config = load_config(args.common.config.as_deref())?;
    let catalog = open_catalog(&args.store, &args.manifest)?;
    let provider = embedder(&args.common, &config, catalog.dim())?;
    if args.text.trim().is_empty() {
        return Err(Failure::new(EXIT_USAGE, "--text must not be empty"));
    }
    let query = provider
        .embed_text(&args.text)
        .map_err(|e| Failure::new(EXIT_PROVIDER, e.to_string()))?;
    let hits = retrieve_text(&catalog, &query, args.k, &args.exclude)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for h in &hits {
        let line = HitLine {
            image_id: &h.image_id,
            score: h.score,
            rank: h.rank,
        };
        let json = serde_json::to_string(&line).expect("hit serializes");
        writeln!(out, "{json}").map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    }
    Ok(())
}

fn read_example(path: Option<&Path>) -> Result<StoryExample, Failure> {
    let Some(path) = path else {
        return Ok(StoryExample::coffee_brand());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot read example {}: {e}", path.display())))?;
    let example: StoryExample = serde_json::from_str(&text)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("bad example {}: {e}", path.display())))?;
    example.validate()?;
    Ok(example)
}

fn read_fixture(path: &Path) -> Result<MockCompleter, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot read fixture {}: {e}", path.display())))?;
    Ok(MockCompleter::fixed(text))
}

fn completer(
    fixture: Option<&Path>,
    url: Option<String>,
    config: &Config,
) -> Result<Option<Arc<dyn CompletionProvider>>, Failure> {
    if let Some(path) = fixture {
        return Ok(Some(Arc::new(read_fixture(path)?)));
    }
    Ok(url.map(|url| {
        let key = std::env::var(&config.llm_key_env).ok();
        Arc::new(RemoteCompleter::new(url, key)) as Arc<dyn CompletionProvider>
    }))
}

fn cmd_board(args: BoardArgs) -> Result<(), Failure> {
    if args.briefing.trim().is_empty() {
        return Err(Failure::new(EXIT_USAGE, "--briefing must not be empty"));
    }
    let config = load_config(args.common.config.as_deref())?;
    let url = args.llm_url.clone().or_else(|| config.llm_url.clone());
    let fixture = args.fixture.as_deref().or(config.llm_fixture.as_deref());
    let llm = completer(fixture, url, &config)?.ok_or_else(|| {
        Failure::new(EXIT_USAGE, "no language model: set llm_url (config, GAUDI_LLM_URL or --llm-url) or pass --fixture")
    })?;
    let example = read_example(args.example.as_deref().or(config.example_path.as_deref()))?;
    let catalog = open_catalog(&args.store, &args.manifest)?;
    let provider = embedder(&args.common, &config, catalog.dim())?;
    let plan = generate_queries(
        llm.as_ref(),
        &example,
        &args.briefing,
        &config.sampling,
        &config.llm_model,
    )?;
    let board = generate_board(&catalog, provider.as_ref(), &plan, args.mode, args.k_per_query)?;
    let json = serde_json::to_string_pretty(&board.document(Some(&plan))).expect("board serializes");
    println!("{json}");
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let config = load_config(Some(&args.config))?;
    let (store, manifest) = match (&config.store_path, &config.manifest_path) {
        (Some(s), Some(m)) => (s.clone(), m.clone()),
        _ => {
            return Err(Failure::new(
                EXIT_FAILURE,
                "config must set store_path and manifest_path",
            ))
        }
    };
    let catalog = open_catalog(&store, &manifest)?;
    let common = Common {
        config: None,
        provider: None,
        embed_url: None,
    };
    let provider = embedder(&common, &config, catalog.dim())?;
    let fixture = args.fixture.as_deref().or(config.llm_fixture.as_deref());
    let llm = completer(fixture, config.llm_url.clone(), &config)?;
    let example = read_example(config.example_path.as_deref())?;
    let service_config = ServiceConfig {
        session_ttl: config.session_ttl,
        image_root: config.image_root.clone(),
        static_dir: config.static_dir.clone(),
        story_example: example,
        sampling: config.sampling,
        llm_model: config.llm_model.clone(),
    };
    let state = AppState::new(provider, llm, service_config).with_catalog(catalog);
    let bind = args.bind.unwrap_or(config.bind_addr);

    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot bind {bind}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
        println!("listening on {addr}");
        let _ = io::stdout().flush();
        gaudi_service::serve(listener, state, shutdown_signal())
            .await
            .map_err(|e| Failure::new(EXIT_FAILURE, format!("server error: {e}")))
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}
