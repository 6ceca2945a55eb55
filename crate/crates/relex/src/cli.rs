//! `relex` command line. Exit status: 0 success, 1 usage error, 2 runtime error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use relex_core::baselines::{graph_baseline_from, BaselineResult};
use relex_core::explainer::format_score;
use relex_core::ingest::{export_ntriples, fetch_remote, preset, table_to_triples, FetchOptions, TripleMapping};
use relex_core::kg::{Iri, KnowledgeGraph};
use relex_core::relevance::UserContext;

use crate::config::{EngineConfig, ENV_CONFIG};
use crate::engine::{load_graph_file, Engine, EvaluateRequest, ExploreRequest, ExploreResponse, Facets, SystemKind};
use crate::EngineError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "relex", version, about = "Discover, rank and explain relationships in a knowledge graph")]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, env = ENV_CONFIG)]
    pub config: Option<PathBuf>,
    /// N-Triples graph, overriding the configured one.
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    /// Connection-pattern file, replacing the configured query sets.
    #[arg(long, global = true)]
    pub queries: Option<PathBuf>,
    /// Explanation templates for the knowledge baseline.
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a graph and report its size.
    Load {
        path: Option<PathBuf>,
        #[arg(long)]
        stats: bool,
    },
    /// List connection candidates found by a query set.
    Discover {
        #[arg(long)]
        query_set: Option<String>,
    },
    /// Rank and explain connections around an entity.
    Explore(ExploreArgs),
    /// Run a comparison system.
    Baseline {
        #[arg(long, value_parser = ["graph", "knowledge"])]
        method: String,
        #[arg(long)]
        e1: Option<Iri>,
        #[arg(long)]
        e2: Option<Iri>,
        /// Radius around --e1 when --e2 is absent.
        #[arg(long)]
        hops: Option<usize>,
        #[arg(long)]
        query_set: Option<String>,
    },
    /// Score a system against a gold standard.
    Evaluate {
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        system: SystemKind,
    },
    /// Extract a subset from a remote query endpoint.
    Fetch(FetchArgs),
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// Entity IRI whose connections are ranked.
    #[arg(long)]
    pub e1: Option<Iri>,
    /// Second entity; keeps only connections between the two.
    #[arg(long)]
    pub e2: Option<Iri>,
    /// Interest text; repeat for several.
    #[arg(long)]
    pub context: Vec<String>,
    /// Short description of what the user knows.
    #[arg(long)]
    pub expertise: Option<String>,
    /// Past search; repeat for several.
    #[arg(long)]
    pub history: Vec<String>,
    /// Weight of graph relatedness against context relevance, in [0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of explanations to return.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub query_set: Option<String>,
    /// Keep only this relationship type.
    #[arg(long = "type")]
    pub relationship_type: Option<String>,
    /// Drop results scoring below this.
    #[arg(long)]
    pub min_score: Option<f64>,
    /// Drop results scoring above this.
    #[arg(long)]
    pub max_score: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub endpoint: String,
    /// Built-in extraction query and mapping (painters, paintings).
    #[arg(long, conflicts_with = "query")]
    pub preset: Option<String>,
    /// File holding the query text.
    #[arg(long, required_unless_present = "preset")]
    pub query: Option<PathBuf>,
    /// Mapping rules; without one the raw result table is printed.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub page_size: Option<usize>,
    #[arg(long)]
    pub max_rows: Option<usize>,
    #[arg(long)]
    pub user_agent: Option<String>,
    #[arg(long)]
    pub timeout: Option<u64>,
    #[arg(long)]
    pub retry_base_ms: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run, writing to the given sinks.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn io_err(e: std::io::Error) -> EngineError {
    EngineError::io(Path::new("<output>"), e)
}

fn config_for(cli: &Cli) -> Result<EngineConfig, EngineError> {
    let mut cfg = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    cfg.apply_env();
    if let Some(g) = &cli.graph {
        cfg.graph.path = Some(g.clone());
    }
    if let Some(q) = &cli.queries {
        let name = q.file_stem().and_then(|s| s.to_str()).unwrap_or("queries").to_string();
        cfg.query_sets = BTreeMap::from([(name.clone(), q.clone())]);
        cfg.evaluation.query_set = Some(name);
    }
    if let Some(t) = &cli.templates {
        cfg.templates.path = Some(t.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), EngineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| EngineError::Invalid(e.to_string()))?;
    writeln!(out, "{text}").map_err(io_err)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), EngineError> {
    let cfg = config_for(&cli)?;
    match cli.command {
        Command::Load { ref path, stats } => {
            let path = path
                .clone()
                .or(cfg.graph.path.clone())
                .ok_or_else(|| EngineError::Invalid("no graph file given".into()))?;
            let kg = load_graph_file(&path, &cfg)?;
            let s = kg.stats();
            match cli.format {
                Format::Json => write_json(out, &s),
                Format::Text if stats => {
                    writeln!(out, "triples: {}\nentities: {}\npredicates: {}", s.triples, s.entities, s.predicates)
                        .map_err(io_err)
                }
                Format::Text => writeln!(out, "loaded {} triples from {}", s.triples, path.display()).map_err(io_err),
            }
        }
        Command::Discover { ref query_set } => {
            let engine = Engine::from_config(cfg)?;
            let conns = engine.discover(query_set.as_deref())?;
            if cli.format == Format::Json {
                return write_json(out, &conns);
            }
            for c in &conns {
                writeln!(out, "{}\t{}\t{}\t{}", c.relationship_type, c.entity1_id, c.entity2_id, c.explanation_text)
                    .map_err(io_err)?;
            }
            Ok(())
        }
        Command::Explore(ref a) => {
            let engine = Engine::from_config(cfg)?;
            let req = ExploreRequest {
                entity1: a.e1.clone(),
                entity2: a.e2.clone(),
                context: UserContext {
                    search_history: a.history.clone(),
                    expertise: a.expertise.clone().unwrap_or_default(),
                    interests: a.context.clone(),
                    alpha_override: None,
                },
                alpha: a.alpha,
                k: a.k,
                query_set: a.query_set.clone(),
                facets: Some(Facets {
                    relationship_type: a.relationship_type.clone(),
                    min_score: a.min_score,
                    max_score: a.max_score,
                }),
            };
            let resp = engine.explore(&req)?;
            match cli.format {
                Format::Json => write_json(out, &resp),
                Format::Text => write_ranking(out, &engine.snapshot().kg, &resp),
            }
        }
        Command::Baseline { ref method, ref e1, ref e2, hops, ref query_set } => {
            let engine = Engine::from_config(cfg)?;
            let results: Vec<BaselineResult> = if method == "graph" {
                let e1 = e1
                    .as_ref()
                    .ok_or_else(|| EngineError::Invalid("--e1 is required for the graph baseline".into()))?;
                match e2 {
                    Some(e2) => engine.graph_baseline(e1, e2).into_iter().collect(),
                    None => {
                        let hops = hops.unwrap_or(engine.config().evaluation.graph_hops);
                        graph_baseline_from(&engine.snapshot().kg, e1, hops, engine.config().scoring.limits.traversal)
                    }
                }
            } else {
                engine.knowledge_baseline(query_set.as_deref())?
            };
            if cli.format == Format::Json {
                return write_json(out, &results);
            }
            for r in &results {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    r.connection.relationship_type, r.connection.entity1_id, r.connection.entity2_id, r.explanation
                )
                .map_err(io_err)?;
            }
            Ok(())
        }
        Command::Evaluate { ref gold, ref ratings, system } => {
            let engine = Engine::from_config(cfg)?;
            let report = engine.evaluate(&EvaluateRequest {
                gold: gold.clone(),
                ratings: ratings.clone(),
                system: Some(system),
            })?;
            match cli.format {
                Format::Json => writeln!(out, "{}", report.to_json()).map_err(io_err),
                Format::Text => write!(out, "{}", report.to_text()).map_err(io_err),
            }
        }
        Command::Fetch(ref a) => fetch(a, cli.format, out),
        Command::Serve { ref bind } => {
            let bind = bind.clone().unwrap_or_else(|| cfg.server.bind.clone());
            let engine = Arc::new(Engine::from_config(cfg)?);
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| EngineError::Invalid(e.to_string()))?;
            rt.block_on(crate::server::serve(engine, &bind))
        }
    }
}

fn write_ranking(out: &mut dyn Write, kg: &KnowledgeGraph, resp: &ExploreResponse) -> Result<(), EngineError> {
    writeln!(out, "alpha={} k={} candidates={}", format_score(resp.alpha), resp.k, resp.candidates).map_err(io_err)?;
    writeln!(out, "rank\tscore\tsr\tcr\ttype\tentity1\tentity2").map_err(io_err)?;
    for (i, item) in resp.ranking.items.iter().enumerate() {
        let b = &item.breakdown;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n\t{}",
            i + 1,
            format_score(b.score),
            format_score(b.sr),
            format_score(b.cr),
            item.connection.relationship_type,
            kg.label(&item.connection.entity1_id),
            kg.label(&item.connection.entity2_id),
            item.explanation
        )
        .map_err(io_err)?;
    }
    for f in &resp.ranking.failures {
        writeln!(out, "failed\t{}\t{}\t{}", f.connection.entity1_id, f.connection.entity2_id, f.error)
            .map_err(io_err)?;
    }
    Ok(())
}

fn fetch(a: &FetchArgs, format: Format, out: &mut dyn Write) -> Result<(), EngineError> {
    let mut opts = FetchOptions::default();
    if let Some(v) = a.page_size {
        opts.page_size = v;
    }
    if let Some(v) = a.max_rows {
        opts.max_rows = v;
    }
    if let Some(v) = &a.user_agent {
        opts.user_agent = v.clone();
    }
    if let Some(v) = a.timeout {
        opts.timeout_secs = v;
    }
    if let Some(v) = a.retry_base_ms {
        opts.retry_base_ms = v;
    }
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| EngineError::io(p, e));
    let (query, mut mapping) = match &a.preset {
        Some(name) => {
            let p = preset(name).ok_or_else(|| EngineError::Invalid(format!("unknown preset {name:?}")))?;
            (p.query.to_string(), Some(p.mapping))
        }
        None => (read(a.query.as_deref().expect("clap requires --query"))?, None),
    };
    if let Some(m) = &a.mapping {
        mapping = Some(TripleMapping::parse(&read(m)?)?);
    }
    let table = fetch_remote(&a.endpoint, &query, &opts)?;
    let mut sink: Box<dyn Write + '_> = match &a.output {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| EngineError::io(p, e))?),
        None => Box::new(&mut *out),
    };
    match mapping {
        Some(m) => {
            let triples = table_to_triples(&table, &m)?;
            export_ntriples(&triples, &mut sink)?;
            Ok(())
        }
        None if format == Format::Json || a.output.is_some() => write_json(&mut sink, &table),
        None => {
            writeln!(sink, "{}", table.variables.join("\t")).map_err(io_err)?;
            for row in &table.rows {
                let cells: Vec<String> =
                    table.variables.iter().map(|v| row.get(v).map(|t| t.canonical()).unwrap_or_default()).collect();
                writeln!(sink, "{}", cells.join("\t")).map_err(io_err)?;
            }
            Ok(())
        }
    }
}
