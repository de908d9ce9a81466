//! Collection maintenance: the periodic analysis that promotes, demotes and
//! purges based on the flushed hit log, plus propagation of warehouse changes
//! into the stored views.
//!
//! Analysis runs once per cycle of `threshold` sessions and reads nothing but
//! the log. With `c` = the number of flushed sessions in which an item got at
//! least one hit:
//!
//! - an **active view** with `c == 0` is demoted (kept, but parked);
//! - an **inactive view** with `c == threshold` is promoted;
//! - a **tracked query** with `c == threshold` is materialized, and its
//!   tracking entry purged;
//! - any **inactive view or tracked query** with `c == 0` is purged;
//! - everything else is left alone.
//!
//! Afterwards the log is truncated and session numbering restarts at 1, so
//! every cycle judges a fresh window.

use crate::catalog::Catalog;
use crate::domain::MvId;
use crate::error::{Error, Result};
use crate::store::{MvStore, ViewState};
use std::collections::BTreeMap;
use std::fmt;

/// One maintenance decision. Ordered: demotions, then promotions and
/// materializations, then purges; by item id within each group. The order
/// matters operationally — a materialization must precede the purge of its
/// tracking entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScvAction {
    Demote { id: MvId },
    Promote { id: MvId },
    Materialize { item: String },
    Purge { item: String },
}

impl ScvAction {
    fn group(&self) -> u8 {
        match self {
            ScvAction::Demote { .. } => 0,
            ScvAction::Promote { .. } | ScvAction::Materialize { .. } => 1,
            ScvAction::Purge { .. } => 2,
        }
    }

    pub fn item(&self) -> &str {
        match self {
            ScvAction::Demote { id } | ScvAction::Promote { id } => id.as_str(),
            ScvAction::Materialize { item } | ScvAction::Purge { item } => item,
        }
    }
}

impl fmt::Display for ScvAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScvAction::Demote { id } => write!(f, "demote {id}"),
            ScvAction::Promote { id } => write!(f, "promote {id}"),
            ScvAction::Materialize { item } => write!(f, "materialize {item}"),
            ScvAction::Purge { item } => write!(f, "purge {item}"),
        }
    }
}

/// An action together with what applying it did (e.g. the id a materialized
/// query became).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedAction {
    pub action: ScvAction,
    pub outcome: String,
}

/// Decide the actions for a complete cycle without applying anything.
///
/// Refuses to run unless exactly `threshold` sessions have been flushed:
/// running early would judge items on a partial window, running late means a
/// cycle boundary was missed and the window no longer has the agreed length.
pub fn analyze(store: &MvStore, threshold: u64) -> Result<Vec<ScvAction>> {
    let flushed = store.log().flushed_sessions();
    if flushed < threshold {
        return Err(Error::AnalysisGuard(format!(
            "cycle is not complete: {flushed} of {threshold} sessions flushed"
        )));
    }
    if flushed > threshold {
        return Err(Error::AnalysisGuard(format!(
            "cycle boundary was missed: {flushed} sessions flushed but the cycle is {threshold}"
        )));
    }

    // Sessions in which each item scored at least one hit. Items without any
    // log row simply stay at zero.
    let mut hit_sessions: BTreeMap<&str, u64> = BTreeMap::new();
    for e in store.log().entries() {
        if e.hits > 0 {
            *hit_sessions.entry(e.item.as_str()).or_insert(0) += 1;
        }
    }
    let c = |item: &str| hit_sessions.get(item).copied().unwrap_or(0);

    let mut actions = Vec::new();
    for view in store.views() {
        let id = view.id.clone();
        match view.state {
            ViewState::Active => {
                if c(id.as_str()) == 0 {
                    actions.push(ScvAction::Demote { id });
                }
            }
            ViewState::Inactive => match c(id.as_str()) {
                n if n == threshold => actions.push(ScvAction::Promote { id }),
                0 => actions.push(ScvAction::Purge { item: id.to_string() }),
                _ => {}
            },
        }
    }
    for t in store.tracked() {
        match c(&t.id) {
            n if n == threshold => {
                actions.push(ScvAction::Materialize { item: t.id.clone() });
                actions.push(ScvAction::Purge { item: t.id.clone() });
            }
            0 => actions.push(ScvAction::Purge { item: t.id.clone() }),
            _ => {}
        }
    }
    actions.sort_by(|a, b| (a.group(), a.item()).cmp(&(b.group(), b.item())));
    Ok(actions)
}

/// Run one full cycle: decide, apply in order, truncate the log and restart
/// session numbering. Tracked queries over tables that have meanwhile
/// vanished from the warehouse are purged instead of materialized.
pub fn run_analysis_cycle(
    store: &mut MvStore,
    catalog: &Catalog,
    threshold: u64,
) -> Result<Vec<AppliedAction>> {
    let actions = analyze(store, threshold)?;
    let mut applied = Vec::with_capacity(actions.len());
    for action in actions {
        let outcome = match &action {
            ScvAction::Demote { id } => {
                store.demote(id)?;
                "demoted".to_string()
            }
            ScvAction::Promote { id } => {
                if store.promote(id, catalog)? {
                    "promoted (rows refreshed)".to_string()
                } else {
                    "promoted".to_string()
                }
            }
            ScvAction::Materialize { item } => {
                let tracked = store
                    .find_tracked_by_id(item)
                    .ok_or_else(|| Error::UnknownItem(item.clone()))?;
                let source = tracked.source.clone();
                let missing: Vec<&str> = source
                    .fragments
                    .tables
                    .iter()
                    .map(|t| t.as_str())
                    .filter(|t| !catalog.contains(t))
                    .collect();
                if missing.is_empty() {
                    let id = store.create_mv(catalog, source)?;
                    format!("materialized as {id}")
                } else {
                    format!("skipped: table {} no longer exists", missing.join(", "))
                }
            }
            ScvAction::Purge { item } => {
                if item.starts_with("mv") {
                    store.purge_view(&MvId::from(item.as_str()))?;
                    "purged view".to_string()
                } else {
                    store.purge_tracked(item)?;
                    "purged tracked query".to_string()
                }
            }
        };
        applied.push(AppliedAction { action, outcome });
    }
    store.truncate_log();
    Ok(applied)
}

/// Propagate a change to one warehouse table: active views over it are
/// recomputed immediately; inactive views are only marked stale (promotion
/// refreshes them). Returns the refreshed ids.
pub fn on_data_change(store: &mut MvStore, catalog: &Catalog, table: &str) -> Result<Vec<MvId>> {
    let mut refreshed = Vec::new();
    let mut stale = Vec::new();
    for view in store.views() {
        if view.fragments().tables.contains(table) {
            match view.state {
                ViewState::Active => refreshed.push(view.id.clone()),
                ViewState::Inactive => stale.push(view.id.clone()),
            }
        }
    }
    for id in &refreshed {
        store.refresh(id, catalog)?;
    }
    for id in &stale {
        store.mark_stale(id)?;
    }
    Ok(refreshed)
}

/// A table was dropped: every view or tracked query over it is now
/// unanswerable and is purged outright. Returns the purged item ids.
pub fn handle_dropped_table(store: &mut MvStore, table: &str) -> Result<Vec<String>> {
    let views: Vec<(MvId, ViewState)> = store
        .views()
        .filter(|v| v.fragments().tables.contains(table))
        .map(|v| (v.id.clone(), v.state))
        .collect();
    let queries: Vec<String> = store
        .tracked()
        .filter(|t| t.source.fragments.tables.contains(table))
        .map(|t| t.id.clone())
        .collect();

    let mut purged = Vec::new();
    for (id, state) in views {
        if state == ViewState::Active {
            store.demote(&id)?;
        }
        store.purge_view(&id)?;
        purged.push(id.to_string());
    }
    for id in queries {
        store.purge_tracked(&id)?;
        purged.push(id);
    }
    Ok(purged)
}
