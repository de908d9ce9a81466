//! Domain matching: narrowing the view collection to the handful of views
//! that read exactly the same tables as a query, before any fragment scoring.
//!
//! The index is inverted — table name to the set of views built over it — and
//! only active views are indexed. Candidate lookup runs in two stages:
//! pre-refinement keeps the views whose posting count equals the number of
//! query tables (they cover every query table), refinement keeps those whose
//! own table count also equals it (they read nothing else). Together the two
//! checks amount to table-set equality, which the fast path computes directly
//! by intersecting postings lists starting from the smallest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Identifier of a stored view, e.g. `mv0001`. Ordered lexicographically,
/// which matches creation order because ids are zero-padded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct MvId(pub String);

impl MvId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MvId {
    fn from(s: &str) -> MvId {
        MvId(s.to_string())
    }
}

/// Counters from one candidate lookup, for reasoning about cost: the lookup
/// touches one postings list per query table and then a fixed amount of work
/// per surviving candidate, independent of how many views exist overall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LookupStats {
    /// Postings lists fetched (= number of distinct query tables, or fewer if
    /// one table is unknown).
    pub postings_probed: usize,
    /// Views that survived the intersection and were checked for set equality.
    pub candidates_checked: usize,
}

/// Inverted index from table name to the active views that read it.
#[derive(Debug, Clone, Default)]
pub struct DomainIndex {
    postings: BTreeMap<String, BTreeSet<MvId>>,
    /// How many tables each indexed view reads (its domain size).
    table_counts: BTreeMap<MvId, usize>,
}

impl DomainIndex {
    pub fn new() -> DomainIndex {
        DomainIndex::default()
    }

    pub fn is_empty(&self) -> bool {
        self.table_counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.table_counts.len()
    }

    /// Index a view under every table it reads. Re-inserting an id replaces
    /// its previous entry.
    pub fn insert(&mut self, id: MvId, tables: &BTreeSet<String>) {
        self.remove(&id);
        for t in tables {
            self.postings.entry(t.clone()).or_default().insert(id.clone());
        }
        self.table_counts.insert(id, tables.len());
    }

    pub fn remove(&mut self, id: &MvId) {
        if self.table_counts.remove(id).is_none() {
            return;
        }
        self.postings.retain(|_, ids| {
            ids.remove(id);
            !ids.is_empty()
        });
    }

    /// Views whose table set equals `tables` exactly. Walks the smallest
    /// postings list and keeps ids present in every other list whose own
    /// table count matches; any query table with no postings means no
    /// candidates at all.
    pub fn candidates(&self, tables: &BTreeSet<String>) -> Vec<MvId> {
        if tables.is_empty() {
            return Vec::new();
        }
        let mut lists: Vec<&BTreeSet<MvId>> = Vec::with_capacity(tables.len());
        for t in tables {
            match self.postings.get(t) {
                Some(ids) => lists.push(ids),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|ids| ids.len());
        let (smallest, rest) = lists.split_first().expect("tables is non-empty");
        smallest
            .iter()
            .filter(|id| self.table_counts.get(*id) == Some(&tables.len()))
            .filter(|id| rest.iter().all(|ids| ids.contains(*id)))
            .cloned()
            .collect()
    }

    /// Same as [`candidates`](Self::candidates) but also reports how much the
    /// lookup touched.
    pub fn candidates_with_stats(&self, tables: &BTreeSet<String>) -> (Vec<MvId>, LookupStats) {
        let mut stats = LookupStats::default();
        if tables.is_empty() {
            return (Vec::new(), stats);
        }
        let mut lists: Vec<&BTreeSet<MvId>> = Vec::with_capacity(tables.len());
        for t in tables {
            stats.postings_probed += 1;
            match self.postings.get(t) {
                Some(ids) => lists.push(ids),
                None => return (Vec::new(), stats),
            }
        }
        lists.sort_by_key(|ids| ids.len());
        let (smallest, rest) = lists.split_first().expect("tables is non-empty");
        let mut out = Vec::new();
        for id in smallest.iter() {
            stats.candidates_checked += 1;
            if self.table_counts.get(id) == Some(&tables.len())
                && rest.iter().all(|ids| ids.contains(id))
            {
                out.push(id.clone());
            }
        }
        (out, stats)
    }

    /// The counting form of the lookup's first stage: fetch the postings list
    /// of every query table, tally appearances per view, and keep the views
    /// seen once per query table. Slower than [`candidates`](Self::candidates)
    /// but spelled exactly as the two-stage definition reads; the fast path
    /// must always agree with `refine(candidates_prerefinement(..))`.
    pub fn candidates_prerefinement(&self, tables: &BTreeSet<String>) -> Vec<MvId> {
        let mut tally: BTreeMap<MvId, usize> = BTreeMap::new();
        for t in tables {
            if let Some(ids) = self.postings.get(t) {
                for id in ids {
                    *tally.entry(id.clone()).or_insert(0) += 1;
                }
            }
        }
        tally
            .into_iter()
            .filter(|(_, n)| *n == tables.len())
            .map(|(id, _)| id)
            .collect()
    }

    /// The lookup's second stage: of the views covering every query table,
    /// keep those that read nothing else.
    pub fn refine(&self, prerefined: Vec<MvId>, tables: &BTreeSet<String>) -> Vec<MvId> {
        prerefined
            .into_iter()
            .filter(|id| self.table_counts.get(id) == Some(&tables.len()))
            .collect()
    }

    /// Views that read the given table at all (for propagating data changes).
    pub fn views_reading(&self, table: &str) -> Vec<MvId> {
        self.postings
            .get(table)
            .map(|ids| ids.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// One line per table: `table -> [id, id, ...]`, sorted both ways.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for (table, ids) in &self.postings {
            let ids: Vec<&str> = ids.iter().map(|id| id.as_str()).collect();
            out.push_str(&format!("{table} -> [{}]\n", ids.join(", ")));
        }
        out
    }
}
