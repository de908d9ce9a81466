//! Command-line front end for the view-matching engine. State lives in two
//! places between invocations: a JSON config file (engine settings plus the
//! path of the loaded warehouse manifest) and the view store directory the
//! config points at. Every command reopens both, runs, and saves the store
//! back, so the collection evolves across separate processes exactly as it
//! would inside one.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mvmatch_core::dwgen::{self, DwGenConfig};
use mvmatch_core::simulate::{self, WorkloadConfig};
use mvmatch_core::{
    Catalog, Engine, EngineConfig, MvStore, Relation, ResidualPolicy, SessionMode,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "mvmatch", version, about = "Answer OLAP queries from a self-maintaining collection of materialized views")]
struct Cli {
    /// Engine configuration file; created on `load` if missing.
    #[arg(long, global = true, default_value = "mvmatch.json")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Point the engine at a warehouse manifest.
    Load {
        /// Manifest produced by `gen-dw` (or hand-written in the same shape).
        manifest: PathBuf,
    },
    /// Generate a synthetic hospital-admissions warehouse as CSVs plus a manifest.
    #[command(name = "gen-dw")]
    GenDw {
        /// Admissions (fact) rows to generate.
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory for the CSVs and manifest(s).
        #[arg(long)]
        out: PathBuf,
        /// Extra admissions prefix sizes to expose as their own manifests.
        #[arg(long, value_delimiter = ',')]
        partitions: Vec<usize>,
    },
    /// Manage materialized views.
    #[command(subcommand)]
    Mv(MvCommand),
    /// Answer a query, preferring a materialized view over the warehouse.
    Query {
        sql: String,
        /// Print the match trace (candidates, scores, outcome, timings) first.
        #[arg(long)]
        trace: bool,
    },
    /// Manage usage sessions.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Run the collection maintenance analysis for a completed cycle.
    Analyze,
    /// Replay a workload of sessions against the engine and report per session.
    Simulate {
        /// Workload description (JSON): seed, sessions, queries_per_session,
        /// pool, and optionally scripted per-session query lists.
        workload: PathBuf,
        /// Also write the per-session report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time a query down the view path and the warehouse path.
    Bench {
        sql: String,
        #[arg(long, default_value_t = 15)]
        reps: u32,
        /// Warmup repetitions excluded from the means.
        #[arg(long, default_value_t = 5)]
        discard: u32,
    },
    /// Print engine state counters.
    Stats,
}

#[derive(Subcommand)]
enum MvCommand {
    /// Materialize a query as a new active view.
    Create { sql: String },
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Close the current session and flush its hit counters to the log.
    End,
}

/// On-disk engine settings. `warehouse_manifest` is written by `load`; the
/// other fields are read as given (absent fields take these defaults).
#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct Config {
    store_dir: PathBuf,
    /// Serve matched views without re-checking residual conditions against
    /// the view output. Unsound on coarser views: answers can be supersets.
    strict_paper_mode: bool,
    /// Sessions per analysis cycle.
    session_threshold: u64,
    /// "logical" (sessions end on request) or "timed" (by wall-clock age).
    session_mode: String,
    session_length_seconds: u64,
    warehouse_manifest: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            store_dir: PathBuf::from("mvstore"),
            strict_paper_mode: false,
            session_threshold: 3,
            session_mode: "logical".to_string(),
            session_length_seconds: 3600,
            warehouse_manifest: None,
        }
    }
}

fn read_config(path: &Path) -> Result<Config> {
    if !path.exists() {
        return Ok(Config::default());
    }
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("bad config {}", path.display()))
}

fn write_config(path: &Path, config: &Config) -> Result<()> {
    let json = serde_json::to_string_pretty(config)?;
    fs::write(path, json + "\n").with_context(|| format!("cannot write config {}", path.display()))
}

fn engine_config(config: &Config) -> Result<EngineConfig> {
    let session_mode = match config.session_mode.as_str() {
        "logical" => SessionMode::Logical,
        "timed" => SessionMode::Timed,
        other => bail!("unknown session_mode {other:?}; expected \"logical\" or \"timed\""),
    };
    Ok(EngineConfig {
        residual_policy: if config.strict_paper_mode {
            ResidualPolicy::DropUnchecked
        } else {
            ResidualPolicy::Reject
        },
        session_threshold: config.session_threshold,
        session_mode,
        session_length_seconds: config.session_length_seconds,
    })
}

/// Reopen the engine from the config: warehouse from the loaded manifest,
/// view store from the store directory (fresh if none saved yet).
fn open_engine(config: &Config, config_path: &Path) -> Result<Engine> {
    let manifest = config.warehouse_manifest.as_deref().with_context(|| {
        format!(
            "no warehouse loaded; run `mvmatch load <manifest>` first (config: {})",
            config_path.display()
        )
    })?;
    let catalog = Catalog::load_manifest(manifest)
        .with_context(|| format!("cannot load warehouse manifest {}", manifest.display()))?;
    let store = if config.store_dir.join("manifest.json").exists() {
        MvStore::load(&config.store_dir)
            .with_context(|| format!("cannot load view store {}", config.store_dir.display()))?
    } else {
        MvStore::new()
    };
    Ok(Engine::with_store(catalog, store, engine_config(config)?))
}

fn persist(config: &Config, engine: &Engine) -> Result<()> {
    engine
        .save_store(&config.store_dir)
        .with_context(|| format!("cannot save view store {}", config.store_dir.display()))
}

/// Result rows as CSV on stdout: header row, then one line per tuple.
fn print_rows(rows: &Relation) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(rows.columns().iter().map(|c| c.name.as_str()))?;
    for row in rows.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    // Die quietly when the reader closes the pipe early (`mvmatch ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let config_path = cli.config;

    match cli.command {
        Command::GenDw { rows, seed, out, partitions } => {
            let report = dwgen::generate(&DwGenConfig { rows, seed, partitions }, &out)?;
            for (table, count) in &report.tables {
                println!("{table}: {count} rows");
            }
            for manifest in &report.manifests {
                println!("manifest: {}", manifest.display());
            }
        }
        Command::Load { manifest } => {
            let manifest = manifest
                .canonicalize()
                .with_context(|| format!("cannot resolve {}", manifest.display()))?;
            let catalog = Catalog::load_manifest(&manifest)
                .with_context(|| format!("cannot load warehouse manifest {}", manifest.display()))?;
            let mut config = read_config(&config_path)?;
            config.warehouse_manifest = Some(manifest.clone());
            write_config(&config_path, &config)?;
            let names: Vec<&str> = catalog.table_names().collect();
            let total: usize = names.iter().map(|n| catalog.get(n).unwrap().len()).sum();
            println!("loaded {} tables ({total} rows) from {}", names.len(), manifest.display());
            for name in names {
                println!("  {name}: {} rows", catalog.get(name).unwrap().len());
            }
        }
        Command::Mv(MvCommand::Create { sql }) => {
            let config = read_config(&config_path)?;
            let mut engine = open_engine(&config, &config_path)?;
            let (id, rows) = engine.create_view(&sql)?;
            persist(&config, &engine)?;
            println!("created {id} ({rows} rows)");
        }
        Command::Query { sql, trace } => {
            let config = read_config(&config_path)?;
            let mut engine = open_engine(&config, &config_path)?;
            let answer = engine.answer(&sql)?;
            persist(&config, &engine)?;
            if trace {
                for line in answer.trace.lines(true) {
                    println!("{line}");
                }
                println!();
            }
            print_rows(&answer.rows)?;
        }
        Command::Session(SessionCommand::End) => {
            let config = read_config(&config_path)?;
            let mut engine = open_engine(&config, &config_path)?;
            let flushed = engine.end_session();
            persist(&config, &engine)?;
            println!(
                "session closed; {flushed} of {} sessions flushed this cycle",
                config.session_threshold
            );
        }
        Command::Analyze => {
            let config = read_config(&config_path)?;
            let mut engine = open_engine(&config, &config_path)?;
            let actions = engine.analyze_now()?;
            persist(&config, &engine)?;
            if actions.is_empty() {
                println!("analysis: no changes");
            }
            for applied in &actions {
                println!("{} -> {}", applied.action, applied.outcome);
            }
        }
        Command::Simulate { workload, report } => {
            let config = read_config(&config_path)?;
            let mut engine = open_engine(&config, &config_path)?;
            let text = fs::read_to_string(&workload)
                .with_context(|| format!("cannot read workload {}", workload.display()))?;
            let workload_config: WorkloadConfig = serde_json::from_str(&text)
                .with_context(|| format!("bad workload {}", workload.display()))?;
            let result = simulate::run(&mut engine, &workload_config)?;
            persist(&config, &engine)?;
            print!("{}", simulate::render_report(&result));
            if let Some(path) = report {
                simulate::write_csv_report(&path, &result)?;
                println!("report written to {}", path.display());
            }
        }
        Command::Bench { sql, reps, discard } => {
            let config = read_config(&config_path)?;
            let engine = open_engine(&config, &config_path)?;
            let report = engine.bench(&sql, reps, discard)?;
            println!(
                "serving view {} ({} rows; result {} rows)",
                report.view_id, report.view_rows, report.result_rows
            );
            println!(
                "view path mean      {:?} (matching {:?} + residual {:?})",
                report.view_path, report.matching, report.residual
            );
            println!(
                "warehouse path mean {:?} (evaluation {:?} + transfer {:?})",
                report.warehouse_path, report.warehouse, report.transfer
            );
            println!("samples (view path vs warehouse path; first {} discarded):", report.discard);
            for (i, (view, warehouse)) in report.samples.iter().enumerate() {
                let tag = if (i as u32) < report.discard { " (discarded)" } else { "" };
                println!("  rep {:>2}: {view:?} vs {warehouse:?}{tag}", i + 1);
            }
        }
        Command::Stats => {
            let config = read_config(&config_path)?;
            let engine = open_engine(&config, &config_path)?;
            let stats = engine.stats();
            println!("warehouse tables: {}", stats.warehouse_tables);
            println!("active views: {}", stats.active_views);
            println!("inactive views: {}", stats.inactive_views);
            println!("tracked queries: {}", stats.tracked_queries);
            println!("current session: {}", stats.current_session);
            println!(
                "flushed sessions: {} of {}",
                stats.flushed_sessions, config.session_threshold
            );
            println!("flushed log rows: {}", stats.flushed_log_rows);
            println!("live hits: {}", stats.live_hits);
        }
    }
    Ok(())
}
