//! Workload simulation: replay sessions of queries against an engine and
//! report how the collection reshapes itself. Sessions are either scripted
//! (explicit query lists) or drawn from a pool by a seeded generator, so
//! every run is reproducible.

use crate::engine::{Engine, MatchOutcome};
use crate::error::{Error, Result};
use crate::maintenance::AppliedAction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadConfig {
    #[serde(default)]
    pub seed: u64,
    /// Number of sessions when drawing from the pool; ignored when scripted.
    #[serde(default)]
    pub sessions: usize,
    #[serde(default)]
    pub queries_per_session: usize,
    /// Queries to draw from at random.
    #[serde(default)]
    pub pool: Vec<String>,
    /// Exact queries per session; takes precedence over the pool.
    #[serde(default)]
    pub scripted: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionStats {
    /// 1-based position in the simulation.
    pub index: usize,
    /// The store's session number when this one closed (resets each cycle).
    pub store_session: u64,
    pub queries: usize,
    pub served_from_views: usize,
    pub served_from_warehouse: usize,
    /// Collection shape after the session (and any analysis) completed.
    pub active_views: usize,
    pub inactive_views: usize,
    pub tracked_queries: usize,
    pub analysis: Option<Vec<AppliedAction>>,
}

/// Running totals over the whole simulation, accumulated once per session
/// from the post-session collection shape and the per-answer hit placement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    /// Sum over sessions of |views| + |tracked|.
    pub cumulative_items: u64,
    /// Sum over sessions of |active views|.
    pub cumulative_active: u64,
    /// Hits that landed on an active view.
    pub active_hits: u64,
    /// Hits that landed on an inactive view or a tracked query.
    pub nonactive_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationReport {
    pub sessions: Vec<SessionStats>,
    pub totals: Totals,
}

/// Replay the workload. Sessions are closed through the engine, and whenever
/// a close completes an analysis cycle the maintenance runs before the next
/// session begins — exactly the cadence a live deployment would follow.
pub fn run(engine: &mut Engine, config: &WorkloadConfig) -> Result<SimulationReport> {
    let scripted = config.scripted.as_deref();
    let session_count = match scripted {
        Some(s) if s.is_empty() => return Err(Error::Workload("scripted sessions are empty".into())),
        Some(s) => s.len(),
        None if config.pool.is_empty() => {
            return Err(Error::Workload("the query pool is empty".into()))
        }
        None if config.sessions == 0 || config.queries_per_session == 0 => {
            return Err(Error::Workload(
                "need at least one session and one query per session".into(),
            ))
        }
        None => config.sessions,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = SimulationReport { sessions: Vec::with_capacity(session_count), totals: Totals::default() };

    for index in 1..=session_count {
        let queries: Vec<String> = match scripted {
            Some(s) => s[index - 1].clone(),
            None => (0..config.queries_per_session)
                .map(|_| config.pool[rng.gen_range(0..config.pool.len())].clone())
                .collect(),
        };

        let mut served_from_views = 0;
        let mut served_from_warehouse = 0;
        for sql in &queries {
            let answer = engine.answer(sql)?;
            match answer.trace.outcome {
                MatchOutcome::Served { .. } => {
                    served_from_views += 1;
                    report.totals.active_hits += 1;
                }
                MatchOutcome::ResidualNotDerivable { .. } => {
                    served_from_warehouse += 1;
                    report.totals.active_hits += 1; // the hit landed on an active view
                }
                MatchOutcome::InactiveMatch { .. }
                | MatchOutcome::TrackedMatch { .. }
                | MatchOutcome::TrackedNew { .. } => {
                    served_from_warehouse += 1;
                    report.totals.nonactive_hits += 1;
                }
            }
        }

        let store_session = engine.store().log().current_session();
        let flushed = engine.end_session();
        let analysis = if flushed == engine.config().session_threshold {
            Some(engine.analyze_now()?)
        } else {
            None
        };

        let stats = engine.stats();
        report.totals.cumulative_items +=
            (stats.active_views + stats.inactive_views + stats.tracked_queries) as u64;
        report.totals.cumulative_active += stats.active_views as u64;
        report.sessions.push(SessionStats {
            index,
            store_session,
            queries: queries.len(),
            served_from_views,
            served_from_warehouse,
            active_views: stats.active_views,
            inactive_views: stats.inactive_views,
            tracked_queries: stats.tracked_queries,
            analysis,
        });
    }
    Ok(report)
}

/// Plain-text rendering, one block per session.
pub fn render_report(report: &SimulationReport) -> String {
    let mut out = String::new();
    for s in &report.sessions {
        out.push_str(&format!(
            "session {} (store session {}): {} queries, {} from views, {} from warehouse; \
             {} active / {} inactive / {} tracked\n",
            s.index,
            s.store_session,
            s.queries,
            s.served_from_views,
            s.served_from_warehouse,
            s.active_views,
            s.inactive_views,
            s.tracked_queries,
        ));
        if let Some(actions) = &s.analysis {
            if actions.is_empty() {
                out.push_str("  analysis: no changes\n");
            }
            for a in actions {
                out.push_str(&format!("  analysis: {} -> {}\n", a.action, a.outcome));
            }
        }
    }
    let t = &report.totals;
    out.push_str(&format!(
        "totals: cumulative items {}, cumulative active {}, active hits {}, non-active hits {}\n",
        t.cumulative_items, t.cumulative_active, t.active_hits, t.nonactive_hits,
    ));
    out
}

/// CSV rendering: one row per session plus a trailing totals row.
pub fn write_csv_report(path: &Path, report: &SimulationReport) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "session_index",
        "store_session",
        "queries",
        "served_from_views",
        "served_from_warehouse",
        "active_views",
        "inactive_views",
        "tracked_queries",
        "analysis_actions",
    ])
    .map_err(csv_err)?;
    for s in &report.sessions {
        w.write_record([
            s.index.to_string(),
            s.store_session.to_string(),
            s.queries.to_string(),
            s.served_from_views.to_string(),
            s.served_from_warehouse.to_string(),
            s.active_views.to_string(),
            s.inactive_views.to_string(),
            s.tracked_queries.to_string(),
            s.analysis.as_ref().map_or(0, |a| a.len()).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.write_record([
        "totals".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        report.totals.cumulative_active.to_string(),
        String::new(),
        String::new(),
        format!(
            "items={} active_hits={} nonactive_hits={}",
            report.totals.cumulative_items, report.totals.active_hits, report.totals.nonactive_hits
        ),
    ])
    .map_err(csv_err)?;
    w.flush().map_err(|e| Error::Csv { path: path.display().to_string(), message: e.to_string() })
}
