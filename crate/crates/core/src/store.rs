//! The self-maintaining view collection: materialized views (active or
//! inactive), tracked queries waiting to earn materialization, the
//! per-session hit log that drives promotion and demotion, and persistence of
//! all of it to a directory.

use crate::catalog::{load_csv, write_csv, Catalog};
use crate::domain::{DomainIndex, MvId};
use crate::error::{Error, Result};
use crate::eval::eval_oqt;
use crate::oqt::CanonicalFragments;
use crate::parser::{parse, ParsedQuery};
use crate::relation::{Column, Relation};
use crate::value::ColumnType;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewState {
    /// Indexed and answering queries.
    Active,
    /// Retained with its rows but invisible to matching; a candidate for
    /// promotion or purging.
    Inactive,
}

#[derive(Debug, Clone)]
pub struct MaterializedView {
    pub id: MvId,
    pub source: ParsedQuery,
    pub rows: Relation,
    pub state: ViewState,
    /// Set when the warehouse changed while the view was inactive; promotion
    /// refreshes it before serving.
    pub stale: bool,
}

impl MaterializedView {
    pub fn fragments(&self) -> &CanonicalFragments {
        &self.source.fragments
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

/// A query seen often enough to log but not yet worth materializing.
#[derive(Debug, Clone)]
pub struct TrackedQuery {
    pub id: String,
    pub source: ParsedQuery,
}

/// One flushed row of the hit log: how often `item` was requested during
/// `session`. Zero-hit rows are recorded too — absence of hits is exactly
/// what demotion and purging look for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub session: u64,
    pub item: String,
    pub hits: u64,
}

#[derive(Debug, Clone, Default)]
pub struct QueryLog {
    entries: Vec<LogEntry>,
    /// Hits accumulated in the current, not yet flushed session.
    live: BTreeMap<String, u64>,
    current_session: u64,
}

impl QueryLog {
    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn current_session(&self) -> u64 {
        self.current_session
    }

    pub fn live_hits(&self, item: &str) -> u64 {
        self.live.get(item).copied().unwrap_or(0)
    }

    /// Sum of all live (unflushed) hit counters.
    pub fn live_total(&self) -> u64 {
        self.live.values().sum()
    }

    /// Sessions already flushed to the log (distinct, complete sessions).
    pub fn flushed_sessions(&self) -> u64 {
        self.current_session.saturating_sub(1)
    }
}

const STORE_MANIFEST: &str = "manifest.json";
const QUERY_LOG_FILE: &str = "query_log.csv";

#[derive(Debug, Serialize, Deserialize)]
struct StoreManifest {
    version: u32,
    current_session: u64,
    next_mv: u64,
    next_query: u64,
    #[serde(default)]
    session_started_at: Option<String>,
    #[serde(default)]
    live_hits: BTreeMap<String, u64>,
    views: Vec<ViewRecord>,
    tracked: Vec<TrackedRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewRecord {
    id: String,
    state: ViewState,
    stale: bool,
    sql: String,
    row_count: usize,
    columns: Vec<ColumnRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ColumnRecord {
    name: String,
    #[serde(rename = "type")]
    ty: ColumnType,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackedRecord {
    id: String,
    sql: String,
}

/// The collection plus everything needed to maintain it. All mutation goes
/// through methods so the domain index, the log and the id counters never
/// drift from the views themselves.
#[derive(Debug, Default)]
pub struct MvStore {
    mvs: BTreeMap<MvId, MaterializedView>,
    tracked: BTreeMap<String, TrackedQuery>,
    log: QueryLog,
    index: DomainIndex,
    next_mv: u64,
    next_query: u64,
    /// Wall-clock start of the current session, for timed session mode.
    /// Opaque to the store; persisted verbatim.
    pub session_started_at: Option<String>,
}

impl MvStore {
    pub fn new() -> MvStore {
        MvStore {
            log: QueryLog { current_session: 1, ..QueryLog::default() },
            next_mv: 1,
            next_query: 1,
            ..MvStore::default()
        }
    }

    pub fn index(&self) -> &DomainIndex {
        &self.index
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }

    pub fn views(&self) -> impl Iterator<Item = &MaterializedView> {
        self.mvs.values()
    }

    pub fn view(&self, id: &MvId) -> Result<&MaterializedView> {
        self.mvs.get(id).ok_or_else(|| Error::UnknownItem(id.to_string()))
    }

    pub fn tracked(&self) -> impl Iterator<Item = &TrackedQuery> {
        self.tracked.values()
    }

    pub fn active_count(&self) -> usize {
        self.mvs.values().filter(|v| v.state == ViewState::Active).count()
    }

    pub fn inactive_count(&self) -> usize {
        self.mvs.len() - self.active_count()
    }

    pub fn tracked_count(&self) -> usize {
        self.tracked.len()
    }

    /// Materialize a query: evaluate it against the warehouse and store the
    /// result as a new active view. Refuses a query whose fragments equal an
    /// existing view's — the existing one should be used (or promoted)
    /// instead.
    pub fn create_mv(&mut self, catalog: &Catalog, query: ParsedQuery) -> Result<MvId> {
        if let Some(existing) = self
            .mvs
            .values()
            .find(|v| v.source.fragments == query.fragments)
        {
            return Err(Error::DuplicateView(existing.id.to_string()));
        }
        let rows = eval_oqt(catalog, &query.tree)?;
        let id = MvId(format!("mv{:04}", self.next_mv));
        self.next_mv += 1;
        self.index.insert(id.clone(), &query.fragments.tables);
        self.mvs.insert(
            id.clone(),
            MaterializedView { id: id.clone(), source: query, rows, state: ViewState::Active, stale: false },
        );
        Ok(id)
    }

    /// Start logging a query that matched nothing. Registers the arrival as
    /// its first hit.
    pub fn track_new_query(&mut self, query: ParsedQuery) -> String {
        let id = format!("q{:04}", self.next_query);
        self.next_query += 1;
        self.tracked.insert(id.clone(), TrackedQuery { id: id.clone(), source: query });
        self.record_hit(&id).expect("freshly tracked id exists");
        id
    }

    /// The tracked query whose fragments equal the incoming query's, if any.
    pub fn find_tracked(&self, fragments: &CanonicalFragments) -> Option<&TrackedQuery> {
        self.tracked.values().find(|t| &t.source.fragments == fragments)
    }

    pub fn find_tracked_by_id(&self, id: &str) -> Option<&TrackedQuery> {
        self.tracked.get(id)
    }

    pub fn record_hit(&mut self, item: &str) -> Result<()> {
        let known =
            self.mvs.contains_key(&MvId::from(item)) || self.tracked.contains_key(item);
        if !known {
            return Err(Error::UnknownItem(item.to_string()));
        }
        *self.log.live.entry(item.to_string()).or_insert(0) += 1;
        Ok(())
    }

    /// Close the current session: append one log row per item — every view
    /// and every tracked query, zero hits included, in id order — then reset
    /// the live counters.
    pub fn end_session(&mut self) {
        let session = self.log.current_session;
        // View ids sort before query ids ("mv…" < "q…"), so chaining the two
        // maps keeps the flush globally id-ordered.
        let ids = self
            .mvs
            .keys()
            .map(|id| id.as_str().to_string())
            .chain(self.tracked.keys().cloned());
        for item in ids {
            let hits = self.log.live.get(&item).copied().unwrap_or(0);
            self.log.entries.push(LogEntry { session, item, hits });
        }
        self.log.live.clear();
        self.log.current_session += 1;
        self.session_started_at = None;
    }

    /// Among the given candidates, the active view with the fewest rows —
    /// ties broken by id — or `None` if none is active.
    pub fn select_smallest(&self, candidates: &[MvId]) -> Option<&MaterializedView> {
        candidates
            .iter()
            .filter_map(|id| self.mvs.get(id))
            .filter(|v| v.state == ViewState::Active)
            .min_by_key(|v| (v.row_count(), v.id.clone()))
    }

    pub fn demote(&mut self, id: &MvId) -> Result<()> {
        let view = self.mvs.get_mut(id).ok_or_else(|| Error::UnknownItem(id.to_string()))?;
        if view.state != ViewState::Active {
            return Err(Error::WrongState {
                item: id.to_string(),
                message: "only an active view can be demoted".into(),
            });
        }
        view.state = ViewState::Inactive;
        self.index.remove(id);
        Ok(())
    }

    /// Reactivate an inactive view, refreshing its rows first if the
    /// warehouse changed while it was parked. Returns whether a refresh ran.
    pub fn promote(&mut self, id: &MvId, catalog: &Catalog) -> Result<bool> {
        let view = self.mvs.get_mut(id).ok_or_else(|| Error::UnknownItem(id.to_string()))?;
        if view.state != ViewState::Inactive {
            return Err(Error::WrongState {
                item: id.to_string(),
                message: "only an inactive view can be promoted".into(),
            });
        }
        let refreshed = view.stale;
        if view.stale {
            view.rows = eval_oqt(catalog, &view.source.tree)?;
            view.stale = false;
        }
        view.state = ViewState::Active;
        let tables = view.source.fragments.tables.clone();
        self.index.insert(id.clone(), &tables);
        Ok(refreshed)
    }

    /// Delete an inactive view for good. Active views must be demoted first;
    /// that two-step keeps accidental deletion of a serving view impossible.
    pub fn purge_view(&mut self, id: &MvId) -> Result<()> {
        let view = self.mvs.get(id).ok_or_else(|| Error::UnknownItem(id.to_string()))?;
        if view.state != ViewState::Inactive {
            return Err(Error::WrongState {
                item: id.to_string(),
                message: "only an inactive view can be purged".into(),
            });
        }
        self.mvs.remove(id);
        Ok(())
    }

    pub fn purge_tracked(&mut self, id: &str) -> Result<()> {
        self.tracked
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownItem(id.to_string()))
    }

    /// Recompute an active view's rows after its base tables changed.
    pub fn refresh(&mut self, id: &MvId, catalog: &Catalog) -> Result<()> {
        let view = self.mvs.get_mut(id).ok_or_else(|| Error::UnknownItem(id.to_string()))?;
        view.rows = eval_oqt(catalog, &view.source.tree)?;
        view.stale = false;
        Ok(())
    }

    pub fn mark_stale(&mut self, id: &MvId) -> Result<()> {
        let view = self.mvs.get_mut(id).ok_or_else(|| Error::UnknownItem(id.to_string()))?;
        view.stale = true;
        Ok(())
    }

    /// Drop all flushed log rows and restart session numbering at 1. Runs at
    /// the end of an analysis cycle, which has consumed the rows.
    pub fn truncate_log(&mut self) {
        self.log.entries.clear();
        self.log.live.clear();
        self.log.current_session = 1;
    }

    /// Write the whole store under `dir`: a manifest, one CSV of rows per
    /// view, and the flushed query log. Stale row files of purged views are
    /// removed so the directory always mirrors the store exactly.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

        let manifest = StoreManifest {
            version: 1,
            current_session: self.log.current_session,
            next_mv: self.next_mv,
            next_query: self.next_query,
            session_started_at: self.session_started_at.clone(),
            live_hits: self.log.live.clone(),
            views: self
                .mvs
                .values()
                .map(|v| ViewRecord {
                    id: v.id.to_string(),
                    state: v.state,
                    stale: v.stale,
                    sql: v.source.canonical_sql(),
                    row_count: v.row_count(),
                    columns: v
                        .rows
                        .columns()
                        .iter()
                        .map(|c| ColumnRecord { name: c.name.clone(), ty: c.ty })
                        .collect(),
                })
                .collect(),
            tracked: self
                .tracked
                .values()
                .map(|t| TrackedRecord { id: t.id.clone(), sql: t.source.canonical_sql() })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Store(format!("manifest serialization failed: {e}")))?;
        let manifest_path = dir.join(STORE_MANIFEST);
        fs::write(&manifest_path, json).map_err(|e| Error::io(manifest_path.display().to_string(), e))?;

        for view in self.mvs.values() {
            write_csv(&dir.join(format!("{}.csv", view.id)), &view.rows)?;
        }
        // Remove row files for views that no longer exist.
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))? {
            let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".csv") {
                if stem.starts_with("mv") && !self.mvs.contains_key(&MvId::from(stem)) {
                    fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path().display().to_string(), e))?;
                }
            }
        }

        let log_path = dir.join(QUERY_LOG_FILE);
        let mut w = csv::Writer::from_path(&log_path)
            .map_err(|e| Error::Csv { path: log_path.display().to_string(), message: e.to_string() })?;
        w.write_record(["session_id", "item_id", "hits"])
            .and_then(|()| {
                self.log.entries.iter().try_for_each(|e| {
                    w.write_record([e.session.to_string(), e.item.clone(), e.hits.to_string()])
                })
            })
            .and_then(|()| w.flush().map_err(csv::Error::from))
            .map_err(|e| Error::Csv { path: log_path.display().to_string(), message: e.to_string() })?;
        Ok(())
    }

    /// Rebuild a store from a directory written by [`save`](Self::save). View
    /// definitions are re-parsed from their canonical SQL; rows are read back
    /// under the recorded column types; the domain index is rebuilt from the
    /// active views.
    pub fn load(dir: &Path) -> Result<MvStore> {
        let manifest_path = dir.join(STORE_MANIFEST);
        let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
        let manifest: StoreManifest = serde_json::from_str(&raw)
            .map_err(|e| Error::Store(format!("bad store manifest: {e}")))?;
        if manifest.version != 1 {
            return Err(Error::Store(format!("unsupported store version {}", manifest.version)));
        }

        let mut store = MvStore::new();
        store.next_mv = manifest.next_mv;
        store.next_query = manifest.next_query;
        store.session_started_at = manifest.session_started_at;
        store.log.current_session = manifest.current_session;
        store.log.live = manifest.live_hits;

        for rec in manifest.views {
            let source = parse(&rec.sql)?;
            let columns: Vec<Column> =
                rec.columns.iter().map(|c| Column::new(&c.name, c.ty)).collect();
            let rows = load_csv(&dir.join(format!("{}.csv", rec.id)), &rec.id, columns)?;
            if rows.len() != rec.row_count {
                return Err(Error::Store(format!(
                    "{}: manifest says {} rows but the row file has {}",
                    rec.id,
                    rec.row_count,
                    rows.len()
                )));
            }
            let id = MvId(rec.id);
            if rec.state == ViewState::Active {
                store.index.insert(id.clone(), &source.fragments.tables);
            }
            store.mvs.insert(
                id.clone(),
                MaterializedView { id, source, rows, state: rec.state, stale: rec.stale },
            );
        }
        for rec in manifest.tracked {
            let source = parse(&rec.sql)?;
            store.tracked.insert(rec.id.clone(), TrackedQuery { id: rec.id, source });
        }

        let log_path = dir.join(QUERY_LOG_FILE);
        if log_path.exists() {
            let mut r = csv::Reader::from_path(&log_path).map_err(|e| Error::Csv {
                path: log_path.display().to_string(),
                message: e.to_string(),
            })?;
            for record in r.records() {
                let record = record.map_err(|e| Error::Csv {
                    path: log_path.display().to_string(),
                    message: e.to_string(),
                })?;
                let bad = || Error::Csv {
                    path: log_path.display().to_string(),
                    message: format!("bad log row: {record:?}"),
                };
                if record.len() != 3 {
                    return Err(bad());
                }
                store.log.entries.push(LogEntry {
                    session: record[0].parse().map_err(|_| bad())?,
                    item: record[1].to_string(),
                    hits: record[2].parse().map_err(|_| bad())?,
                });
            }
        }
        Ok(store)
    }
}
