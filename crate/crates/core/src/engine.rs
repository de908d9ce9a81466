//! The query engine: one front door that answers SQL from the view
//! collection when a stored view matches, and from the warehouse otherwise,
//! recording every request in the hit log that drives maintenance.

use crate::catalog::Catalog;
use crate::domain::MvId;
use crate::error::{Error, Result};
use crate::eval::eval_oqt;
use crate::maintenance::{run_analysis_cycle, handle_dropped_table, on_data_change, AppliedAction};
use crate::matcher::{execute_plan, match_score, plan_residual, MatchScore, ResidualPolicy};
use crate::parser::{parse, ParsedQuery};
use crate::relation::Relation;
use crate::store::{MvStore, ViewState};
use chrono::{DateTime, Utc};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    /// Sessions end only on an explicit request.
    Logical,
    /// Sessions end by wall-clock age, checked lazily when a query arrives.
    /// A flush that completes a cycle also runs the analysis. Idle gaps
    /// longer than several session lengths still close only one session —
    /// sessions measure usage, and nothing was used in between.
    Timed,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub residual_policy: ResidualPolicy,
    /// Sessions per analysis cycle.
    pub session_threshold: u64,
    pub session_mode: SessionMode,
    /// Session length for [`SessionMode::Timed`].
    pub session_length_seconds: u64,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            residual_policy: ResidualPolicy::Reject,
            session_threshold: 3,
            session_mode: SessionMode::Logical,
            session_length_seconds: 3600,
        }
    }
}

/// How a query was resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Answered from a view's rows.
    Served { id: MvId, residual_conditions: usize, dropped_conditions: usize },
    /// A view matched fully but a residual condition could not be evaluated
    /// against its columns; answered from the warehouse. The view still
    /// earned its hit — the collection was useful, the derivation was not.
    ResidualNotDerivable { id: MvId, reason: String },
    /// Only an inactive view matched; answered from the warehouse, hit
    /// recorded toward the view's promotion.
    InactiveMatch { id: MvId },
    /// A tracked query matched; answered from the warehouse.
    TrackedMatch { id: String },
    /// Nothing matched; the query is now tracked.
    TrackedNew { id: String },
}

impl MatchOutcome {
    pub fn served_from_view(&self) -> Option<&MvId> {
        match self {
            MatchOutcome::Served { id, .. } => Some(id),
            _ => None,
        }
    }
}

/// Wall-clock phases of one answer. Totals are sums of the measured phases —
/// the decomposition is exact by construction. Unused phases stay zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    /// Domain lookup, fragment scoring, view selection and residual planning.
    pub matching: Duration,
    /// Executing the residual plan against the view's rows.
    pub residual: Duration,
    /// Evaluating the query against the warehouse.
    pub warehouse: Duration,
    /// Handing the warehouse result over as the answer.
    pub transfer: Duration,
}

impl Timings {
    /// Total time on the view path (matching + residual execution).
    pub fn view_path(&self) -> Duration {
        self.matching + self.residual
    }

    /// Total time on the warehouse path (evaluation + hand-over).
    pub fn warehouse_path(&self) -> Duration {
        self.warehouse + self.transfer
    }

    pub fn total(&self) -> Duration {
        self.view_path() + self.warehouse_path()
    }
}

#[derive(Debug, Clone)]
pub struct AnswerTrace {
    pub canonical_sql: String,
    /// Ids the domain index proposed, with their fragment scores.
    pub scored: Vec<(MvId, MatchScore)>,
    pub outcome: MatchOutcome,
    pub timings: Timings,
    /// The item whose hit counter this query incremented.
    pub log_item: String,
    /// Session boundary events that fired on arrival (timed mode).
    pub session_events: Vec<String>,
    /// Rows scanned in the serving view, when one served.
    pub view_rows_scanned: Option<usize>,
}

impl AnswerTrace {
    /// Human-readable trace, one event per line. Timings are optional so
    /// tests can compare the deterministic part verbatim.
    pub fn lines(&self, include_timings: bool) -> Vec<String> {
        let mut out = vec![format!("query: {}", self.canonical_sql)];
        out.extend(self.session_events.iter().map(|e| format!("session: {e}")));
        let ids: Vec<&str> = self.scored.iter().map(|(id, _)| id.as_str()).collect();
        out.push(format!("domain candidates: {} [{}]", ids.len(), ids.join(", ")));
        for (id, score) in &self.scored {
            out.push(format!(
                "{id}: {} of 4{}",
                score.total,
                if score.is_match { " (match)" } else { "" }
            ));
        }
        out.push(match &self.outcome {
            MatchOutcome::Served { id, residual_conditions, dropped_conditions } => {
                let mut s = format!(
                    "outcome: served from {id} ({} rows scanned, {residual_conditions} residual conditions",
                    self.view_rows_scanned.unwrap_or(0)
                );
                if *dropped_conditions > 0 {
                    s.push_str(&format!(", {dropped_conditions} dropped unchecked"));
                }
                s.push(')');
                s
            }
            MatchOutcome::ResidualNotDerivable { id, reason } => {
                format!("outcome: {id} matched but the residual is not derivable ({reason}); served from the warehouse")
            }
            MatchOutcome::InactiveMatch { id } => {
                format!("outcome: inactive view {id} matched; served from the warehouse")
            }
            MatchOutcome::TrackedMatch { id } => {
                format!("outcome: matches tracked query {id}; served from the warehouse")
            }
            MatchOutcome::TrackedNew { id } => {
                format!("outcome: no match; tracked as {id} and served from the warehouse")
            }
        });
        out.push(format!("log: hit recorded for {}", self.log_item));
        if include_timings {
            let t = &self.timings;
            out.push(format!(
                "timings: matching {:?}, residual {:?}, warehouse {:?}, transfer {:?}, total {:?}",
                t.matching, t.residual, t.warehouse, t.transfer, t.total()
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Answer {
    pub rows: Relation,
    pub trace: AnswerTrace,
}

/// Mean phase times over the kept repetitions of one benchmarked query,
/// answered both ways.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub view_id: MvId,
    pub reps: u32,
    pub discard: u32,
    pub matching: Duration,
    pub residual: Duration,
    /// matching + residual.
    pub view_path: Duration,
    pub warehouse: Duration,
    pub transfer: Duration,
    /// warehouse + transfer.
    pub warehouse_path: Duration,
    pub view_rows: usize,
    pub result_rows: usize,
    /// Per-repetition (view path, warehouse path) times, warmups included,
    /// so a reported trend can be audited against the raw measurements.
    pub samples: Vec<(Duration, Duration)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineStats {
    pub warehouse_tables: usize,
    pub active_views: usize,
    pub inactive_views: usize,
    pub tracked_queries: usize,
    pub current_session: u64,
    pub flushed_sessions: u64,
    pub flushed_log_rows: usize,
    pub live_hits: u64,
}

pub struct Engine {
    catalog: Catalog,
    store: MvStore,
    config: EngineConfig,
}

impl Engine {
    pub fn new(catalog: Catalog, config: EngineConfig) -> Engine {
        Engine { catalog, store: MvStore::new(), config }
    }

    pub fn with_store(catalog: Catalog, store: MvStore, config: EngineConfig) -> Engine {
        Engine { catalog, store, config }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn store(&self) -> &MvStore {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Materialize a query as a new active view. Creation is an
    /// administrative act, not usage: no hit is recorded.
    pub fn create_view(&mut self, sql: &str) -> Result<(MvId, usize)> {
        let q = parse(sql)?;
        let id = self.store.create_mv(&self.catalog, q)?;
        let rows = self.store.view(&id)?.row_count();
        Ok((id, rows))
    }

    /// Answer a query, preferring the view collection over the warehouse.
    pub fn answer(&mut self, sql: &str) -> Result<Answer> {
        let q = parse(sql)?;
        let mut session_events = Vec::new();
        if self.config.session_mode == SessionMode::Timed {
            session_events = self.roll_timed_session(Utc::now())?;
        }

        let t_match = Instant::now();
        let candidate_ids = self.store.index().candidates(&q.fragments.tables);
        let mut scored: Vec<(MvId, MatchScore)> = Vec::with_capacity(candidate_ids.len());
        let mut matched: Vec<MvId> = Vec::new();
        for id in &candidate_ids {
            let view = self.store.view(id)?;
            let score = match_score(&q.fragments, view.fragments());
            if score.is_match {
                matched.push(id.clone());
            }
            scored.push((id.clone(), score));
        }

        let mut fallback: Option<MatchOutcome> = None;
        if let Some(chosen) = self.store.select_smallest(&matched) {
            let chosen_id = chosen.id.clone();
            let rows_scanned = chosen.row_count();
            match plan_residual(&q, chosen_id.as_str(), chosen.fragments(), self.config.residual_policy)
            {
                Ok(plan) => {
                    let matching = t_match.elapsed();
                    let t_residual = Instant::now();
                    let rows = execute_plan(&plan, &chosen.rows)?;
                    let residual = t_residual.elapsed();
                    self.store.record_hit(chosen_id.as_str())?;
                    return Ok(Answer {
                        rows,
                        trace: AnswerTrace {
                            canonical_sql: q.canonical_sql(),
                            scored,
                            outcome: MatchOutcome::Served {
                                id: chosen_id.clone(),
                                residual_conditions: plan.rewritten.len(),
                                dropped_conditions: plan.dropped.len(),
                            },
                            timings: Timings { matching, residual, ..Timings::default() },
                            log_item: chosen_id.to_string(),
                            session_events,
                            view_rows_scanned: Some(rows_scanned),
                        },
                    });
                }
                Err(Error::NotDerivable(reason)) => {
                    // The match was real; only the derivation failed.
                    self.store.record_hit(chosen_id.as_str())?;
                    fallback = Some(MatchOutcome::ResidualNotDerivable { id: chosen_id, reason });
                }
                Err(e) => return Err(e),
            }
        }

        // Warehouse path. Attribute the hit to whatever the query resembles,
        // so usage keeps steering the collection.
        let outcome = match fallback {
            Some(o) => o,
            None => {
                let inactive = self
                    .store
                    .views()
                    .filter(|v| v.state == ViewState::Inactive)
                    .find(|v| match_score(&q.fragments, v.fragments()).is_match)
                    .map(|v| v.id.clone());
                if let Some(id) = inactive {
                    self.store.record_hit(id.as_str())?;
                    MatchOutcome::InactiveMatch { id }
                } else if let Some(tracked) = self.store.find_tracked(&q.fragments) {
                    let id = tracked.id.clone();
                    self.store.record_hit(&id)?;
                    MatchOutcome::TrackedMatch { id }
                } else {
                    MatchOutcome::TrackedNew { id: self.store.track_new_query(q.clone()) }
                }
            }
        };
        let matching = t_match.elapsed();

        let t_warehouse = Instant::now();
        let computed = eval_oqt(&self.catalog, &q.tree)?;
        let warehouse = t_warehouse.elapsed();
        let t_transfer = Instant::now();
        let rows = computed.clone();
        let transfer = t_transfer.elapsed();
        drop(computed);

        let log_item = match &outcome {
            MatchOutcome::ResidualNotDerivable { id, .. } | MatchOutcome::InactiveMatch { id } => {
                id.to_string()
            }
            MatchOutcome::TrackedMatch { id } | MatchOutcome::TrackedNew { id } => id.clone(),
            MatchOutcome::Served { .. } => unreachable!("served answers return earlier"),
        };
        Ok(Answer {
            rows,
            trace: AnswerTrace {
                canonical_sql: q.canonical_sql(),
                scored,
                outcome,
                timings: Timings { matching, warehouse, transfer, ..Timings::default() },
                log_item,
                session_events,
                view_rows_scanned: None,
            },
        })
    }

    /// Close the current session explicitly. Returns the number of flushed
    /// sessions afterwards.
    pub fn end_session(&mut self) -> u64 {
        self.store.end_session();
        self.store.log().flushed_sessions()
    }

    /// Run the maintenance cycle (guarded: exactly one cycle of sessions must
    /// be flushed).
    pub fn analyze_now(&mut self) -> Result<Vec<AppliedAction>> {
        run_analysis_cycle(&mut self.store, &self.catalog, self.config.session_threshold)
    }

    /// Re-point the engine at changed warehouse data for one table and
    /// propagate: active dependents refresh, inactive ones go stale.
    pub fn data_changed(&mut self, table: &str, rows: Relation) -> Result<Vec<MvId>> {
        self.catalog.replace(table, rows)?;
        on_data_change(&mut self.store, &self.catalog, table)
    }

    /// Drop a warehouse table and purge every dependent view and tracked
    /// query. Returns the purged item ids.
    pub fn drop_table(&mut self, table: &str) -> Result<Vec<String>> {
        if self.catalog.remove(table).is_none() {
            return Err(Error::UnknownTable(table.to_string()));
        }
        handle_dropped_table(&mut self.store, table)
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            warehouse_tables: self.catalog.len(),
            active_views: self.store.active_count(),
            inactive_views: self.store.inactive_count(),
            tracked_queries: self.store.tracked_count(),
            current_session: self.store.log().current_session(),
            flushed_sessions: self.store.log().flushed_sessions(),
            flushed_log_rows: self.store.log().entries().len(),
            live_hits: self.store.log().live_total(),
        }
    }

    /// Persist the store (views, rows, log, counters) under a directory.
    pub fn save_store(&self, dir: &std::path::Path) -> Result<()> {
        self.store.save(dir)
    }

    /// Time one query down both paths: via the best matching view and via
    /// the warehouse. Runs `reps` repetitions of each, discards the first
    /// `discard` (warm-up), reports the means of the rest. Requires a query a
    /// view can actually serve; records no hits.
    pub fn bench(&self, sql: &str, reps: u32, discard: u32) -> Result<BenchReport> {
        if reps == 0 || discard >= reps {
            return Err(Error::Bench(format!(
                "need discard < reps, got reps={reps} discard={discard}"
            )));
        }
        let q = parse(sql)?;

        let mut matching_samples = Vec::with_capacity(reps as usize);
        let mut residual_samples = Vec::with_capacity(reps as usize);
        let mut warehouse_samples = Vec::with_capacity(reps as usize);
        let mut transfer_samples = Vec::with_capacity(reps as usize);
        let mut view_id = None;
        let mut view_rows = 0;
        let mut result_rows = 0;

        for _ in 0..reps {
            let t_match = Instant::now();
            let candidate_ids = self.store.index().candidates(&q.fragments.tables);
            let matched: Vec<MvId> = candidate_ids
                .into_iter()
                .filter(|id| {
                    self.store
                        .view(id)
                        .map(|v| match_score(&q.fragments, v.fragments()).is_match)
                        .unwrap_or(false)
                })
                .collect();
            let chosen = self.store.select_smallest(&matched).ok_or_else(|| {
                Error::Bench("no active view can serve this query".into())
            })?;
            let plan = plan_residual(
                &q,
                chosen.id.as_str(),
                chosen.fragments(),
                self.config.residual_policy,
            )?;
            matching_samples.push(t_match.elapsed());

            let t_residual = Instant::now();
            let served = execute_plan(&plan, &chosen.rows)?;
            residual_samples.push(t_residual.elapsed());

            let t_warehouse = Instant::now();
            let computed = eval_oqt(&self.catalog, &q.tree)?;
            warehouse_samples.push(t_warehouse.elapsed());
            let t_transfer = Instant::now();
            let handed_over = computed.clone();
            transfer_samples.push(t_transfer.elapsed());

            if !served.same_rows(&handed_over) {
                return Err(Error::Bench(format!(
                    "view {} and warehouse disagree on the benchmarked query",
                    chosen.id
                )));
            }
            view_id = Some(chosen.id.clone());
            view_rows = chosen.row_count();
            result_rows = served.len();
        }

        let mean = |samples: &[Duration]| {
            let kept = &samples[discard as usize..];
            kept.iter().sum::<Duration>() / kept.len() as u32
        };
        let (matching, residual) = (mean(&matching_samples), mean(&residual_samples));
        let (warehouse, transfer) = (mean(&warehouse_samples), mean(&transfer_samples));
        let samples = (0..reps as usize)
            .map(|i| {
                (
                    matching_samples[i] + residual_samples[i],
                    warehouse_samples[i] + transfer_samples[i],
                )
            })
            .collect();
        Ok(BenchReport {
            view_id: view_id.expect("reps >= 1"),
            reps,
            discard,
            matching,
            residual,
            view_path: matching + residual,
            warehouse,
            transfer,
            warehouse_path: warehouse + transfer,
            view_rows,
            result_rows,
            samples,
        })
    }

    /// Lazily close an expired timed session; when the flush completes a
    /// cycle, run the analysis too. Returns human-readable events.
    fn roll_timed_session(&mut self, now: DateTime<Utc>) -> Result<Vec<String>> {
        let mut events = Vec::new();
        let length = chrono::Duration::seconds(self.config.session_length_seconds as i64);
        let started = self
            .store
            .session_started_at
            .as_deref()
            .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
            .map(|t| t.with_timezone(&Utc));
        match started {
            None => self.store.session_started_at = Some(now.to_rfc3339()),
            Some(t0) if now - t0 >= length => {
                let closed = self.store.log().current_session();
                self.store.end_session();
                events.push(format!(
                    "closed session {closed} after {}s",
                    (now - t0).num_seconds()
                ));
                if self.store.log().flushed_sessions() == self.config.session_threshold {
                    let applied = self.analyze_now()?;
                    events.push(format!("cycle complete, analysis applied {} actions", applied.len()));
                }
                self.store.session_started_at = Some(now.to_rfc3339());
            }
            Some(_) => {}
        }
        Ok(events)
    }

    /// Test seam for the timed-session roll.
    #[cfg(test)]
    fn roll_at(&mut self, now: DateTime<Utc>) -> Result<Vec<String>> {
        self.roll_timed_session(now)
    }

    /// All active views whose fragments fully match the query, by scanning
    /// the whole collection without the domain index. Exists to measure what
    /// the index saves; must always agree with the indexed path.
    pub fn find_match_linear_scan(&self, q: &ParsedQuery) -> Vec<MvId> {
        self.store
            .views()
            .filter(|v| v.state == ViewState::Active)
            .filter(|v| match_score(&q.fragments, v.fragments()).is_match)
            .map(|v| v.id.clone())
            .collect()
    }

    /// All active views whose fragments fully match the query, via the
    /// domain index.
    pub fn find_match(&self, q: &ParsedQuery) -> Result<Vec<MvId>> {
        let mut out = Vec::new();
        for id in self.store.index().candidates(&q.fragments.tables) {
            if match_score(&q.fragments, self.store.view(&id)?.fragments()).is_match {
                out.push(id);
            }
        }
        Ok(out)
    }
}
