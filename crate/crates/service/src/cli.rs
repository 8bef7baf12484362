//! Command-line front end. Exit codes: 0 success, 1 user error, 2 internal error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use contextrec::queryeng::parse_query_with;
use contextrec::RecommendationItem;
use serde::Serialize;

use crate::engine::{self, Engine, EngineDir, Internal};
use crate::http::{self, EngineConfig, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "contextrec",
    version,
    about = "Contextual document similarity and literature recommendation"
)]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliMode {
    Diverse,
    Focused,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Diverse => Mode::Diverse,
            CliMode::Focused => Mode::Focused,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSONL corpus and store it in an engine directory.
    Ingest {
        input: PathBuf,
        dir: PathBuf,
        /// Context configuration (JSON); defaults to the method/resource set.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build TF-IDF statistics, the citation graph and the CPI-weighted graph.
    Index { dir: PathBuf },
    /// Train node embeddings on the CPI-weighted graph.
    EmbedGraph {
        dir: PathBuf,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the pair classifier on labeled pairs (JSONL of {a, b, label}).
    Train {
        dir: PathBuf,
        pairs: PathBuf,
        /// Word-vector text file; overrides "embeddings" in config.json.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Run all configured edge sources and merge them into the context graph.
    BuildContext { dir: PathBuf },
    /// Answer an analogical query, e.g. "seed=zhao2013 +resource -method k=5".
    Query { dir: PathBuf, query: String },
    /// Diverse or focused recommendations for a seed document.
    Recommend {
        dir: PathBuf,
        seed: String,
        #[arg(long, value_enum, default_value = "diverse")]
        mode: CliMode,
        #[arg(long)]
        context: Option<String>,
        #[arg(short = 'k', default_value_t = contextrec::queryeng::DEFAULT_K)]
        k: usize,
    },
    /// Serve the HTTP JSON API.
    Serve {
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Disable the permissive CORS policy.
        #[arg(long)]
        no_cors: bool,
    },
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, human: impl FnOnce() -> String) -> Result<()> {
    if json {
        writeln!(out, "{}", serde_json::to_string(value)?)?;
    } else {
        write!(out, "{}", human())?;
    }
    Ok(())
}

fn render_items(items: &[RecommendationItem]) -> String {
    if items.is_empty() {
        return "no results\n".into();
    }
    let mut s = String::new();
    for (i, item) in items.iter().enumerate() {
        let matched: Vec<String> = item
            .matched
            .iter()
            .map(|m| format!("{}={:.3}", m.context, m.sim))
            .collect();
        s.push_str(&format!(
            "{:>2}. {:<20} {:.4}  [{}]  {}\n",
            i + 1,
            item.id,
            item.score,
            matched.join(" "),
            item.title
        ));
    }
    s
}

/// Executes one parsed command.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Ingest { input, dir, config } => {
            let s = engine::ingest(&input, &EngineDir::new(&dir), config.as_deref())?;
            emit(out, json, &s, || {
                format!(
                    "ingested {} documents ({} citations, {} dangling) into {}\n",
                    s.documents,
                    s.citations,
                    s.dangling,
                    dir.display()
                )
            })
        }
        Command::Index { dir } => {
            let s = engine::index(&EngineDir::new(&dir))?;
            emit(out, json, &s, || {
                format!(
                    "indexed {} documents: {} terms, {} citation edges, {} weighted edges\n",
                    s.documents, s.vocabulary, s.citation_edges, s.weighted_edges
                )
            })
        }
        Command::EmbedGraph { dir, dims, seed } => {
            let engine_dir = EngineDir::new(&dir);
            let mut config = engine_dir.settings(None)?.pipeline.graph_embedding;
            config.dims = dims.unwrap_or(config.dims);
            config.seed = seed.unwrap_or(config.seed);
            let s = engine::embed_graph(&engine_dir, &config)?;
            emit(out, json, &s, || {
                format!("embedded {} nodes in {} dimensions\n", s.nodes, s.dims)
            })
        }
        Command::Train { dir, pairs, embeddings } => {
            let s = engine::train(&EngineDir::new(&dir), &pairs, embeddings.as_deref())?;
            emit(out, json, &s, || {
                format!(
                    "trained on {} labeled + {} sampled none pairs: loss {:.4}, accuracy {:.3}, macro-F1 {:.3}\n",
                    s.labeled_pairs, s.negative_pairs, s.final_loss, s.metrics.accuracy, s.metrics.macro_f1
                )
            })
        }
        Command::BuildContext { dir } => {
            let s = engine::build_context(&EngineDir::new(&dir))?;
            emit(out, json, &s, || {
                let parts: Vec<String> = s.by_source.iter().map(|(k, v)| format!("{k} {v}")).collect();
                format!("context graph: {} edges ({})\n", s.edges, parts.join(", "))
            })
        }
        Command::Query { dir, query } => {
            let engine = Engine::open(&EngineDir::new(&dir))?;
            let q = parse_query_with(&query, engine.graph.contexts(), &engine.settings.context.thresholds)?;
            let items = engine.query_engine().answer(&q)?;
            emit(out, json, &items, || render_items(&items))
        }
        Command::Recommend {
            dir,
            seed,
            mode,
            context,
            k,
        } => {
            let engine = Engine::open(&EngineDir::new(&dir))?;
            let items = http::recommend(&engine, &seed, mode.into(), context.as_deref(), k)
                .map_err(|e| anyhow::anyhow!(e.message))?;
            emit(out, json, &items, || render_items(&items))
        }
        Command::Serve {
            dir,
            host,
            port,
            no_cors,
        } => {
            let config = EngineConfig {
                dir,
                host,
                port,
                cors: !no_cors,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Internal(format!("cannot start runtime: {e}")))?;
            runtime.block_on(http::serve(config))
        }
    }
}

/// Classifies a failure into an exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<Internal>()) {
        EXIT_INTERNAL
    } else {
        EXIT_USER
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Failures produce a one-line diagnostic on `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return EXIT_USER;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let line = format!("{e:#}").replace('\n', " ");
            let _ = writeln!(err, "error: {line}");
            exit_code(&e)
        }
    }
}
