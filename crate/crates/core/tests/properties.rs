//! Property-based checks over randomly generated catalogs, queries, fragment
//! sets and stores: evaluator agreement, canonical-form stability, score
//! monotonicity, index/scan equivalence, sum regrouping and persistence.

use std::collections::{BTreeMap, BTreeSet};

use mvmatch_core::eval::{eval_oqt, eval_oqt_naive};
use mvmatch_core::matcher::{match_score, match_selection};
use mvmatch_core::parser::parse;
use mvmatch_core::{
    Catalog, Column, ColumnType, DomainIndex, Fraction, MvId, MvStore, Relation, Value,
};
use proptest::prelude::*;
use proptest::sample::Index;

const GROUPS: [&str; 4] = ["x", "y", "z", "w"];

/// (k, group index, v) triples for one table of schema (k int, g text, v int).
type RowSpec = (i64, u8, i64);

fn arb_rows() -> impl Strategy<Value = Vec<RowSpec>> {
    prop::collection::vec((0i64..8, 0u8..4, 0i64..100), 4..24)
}

fn table_from(rows: &[RowSpec]) -> Relation {
    let mut rel = Relation::new(vec![
        Column::new("k", ColumnType::Int),
        Column::new("g", ColumnType::Text),
        Column::new("v", ColumnType::Int),
    ])
    .unwrap();
    for (k, g, v) in rows {
        rel.push_row(vec![
            Value::Int(*k),
            Value::Text(GROUPS[*g as usize % GROUPS.len()].to_string()),
            Value::Int(*v),
        ])
        .unwrap();
    }
    rel
}

/// Index-based picks so the same shape applies to any catalog width.
#[derive(Debug, Clone)]
struct QueryShape {
    keys: Vec<Index>,
    aggs: Vec<Index>,
    conds: Vec<(Index, Index, Index)>,
}

fn arb_shape() -> impl Strategy<Value = QueryShape> {
    (
        prop::collection::vec(any::<Index>(), 1..=2),
        prop::collection::vec(any::<Index>(), 1..=2),
        prop::collection::vec((any::<Index>(), any::<Index>(), any::<Index>()), 0..=2),
    )
        .prop_map(|(keys, aggs, conds)| QueryShape { keys, aggs, conds })
}

struct QueryParts {
    keys: Vec<String>,
    aggs: Vec<String>,
    tables: Vec<String>,
    conds: Vec<String>,
}

impl QueryParts {
    fn render(&self) -> String {
        self.render_ordered(false)
    }

    /// The same statement with every list written backwards — identity must
    /// not depend on how the user happened to order things.
    fn render_ordered(&self, reversed: bool) -> String {
        let mut keys = self.keys.clone();
        let mut conds = self.conds.clone();
        if reversed {
            keys.reverse();
            conds.reverse();
        }
        let mut sql = format!(
            "select {}, {} from {}",
            keys.join(", "),
            self.aggs.join(", "),
            self.tables.join(", ")
        );
        if !conds.is_empty() {
            sql.push_str(" where ");
            sql.push_str(&conds.join(" and "));
        }
        sql.push_str(" group by ");
        sql.push_str(&keys.join(", "));
        sql
    }
}

fn build_case(t0: &[RowSpec], t1: &Option<Vec<RowSpec>>, shape: &QueryShape) -> (Catalog, QueryParts) {
    let mut catalog = Catalog::new();
    catalog.insert("t0", table_from(t0)).unwrap();
    let mut tables = vec!["t0".to_string()];
    if let Some(rows) = t1 {
        catalog.insert("t1", table_from(rows)).unwrap();
        tables.push("t1".to_string());
    }

    let col_pool: Vec<String> = tables
        .iter()
        .flat_map(|t| [format!("{t}.k"), format!("{t}.g")])
        .collect();
    let keys: Vec<String> = shape
        .keys
        .iter()
        .map(|i| i.get(&col_pool).clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut agg_pool = vec!["sum(1)".to_string()];
    for t in &tables {
        agg_pool.push(format!("sum({t}.v)"));
    }
    let aggs: Vec<String> = shape
        .aggs
        .iter()
        .map(|i| i.get(&agg_pool).clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let cond_pool: Vec<String> = tables
        .iter()
        .flat_map(|t| [format!("{t}.k"), format!("{t}.g"), format!("{t}.v")])
        .collect();
    let conds: Vec<String> = shape
        .conds
        .iter()
        .map(|(c, o, l)| {
            let col = c.get(&cond_pool);
            if col.ends_with(".g") {
                let op = ["=", "!="][o.index(2)];
                format!("{col} {op} '{}'", GROUPS[l.index(GROUPS.len())])
            } else if col.ends_with(".k") {
                let op = ["=", "!=", "<", ">"][o.index(4)];
                format!("{col} {op} {}", l.index(8))
            } else {
                let op = ["<", ">"][o.index(2)];
                format!("{col} {op} {}", 10 + l.index(80))
            }
        })
        .collect();

    (catalog, QueryParts { keys, aggs, tables, conds })
}

fn frac_lt(a: Fraction, b: Fraction) -> bool {
    (a.num as u128) * (b.den as u128) < (b.num as u128) * (a.den as u128)
}

fn string_set(indices: &[Index], pool_size: usize, prefix: &str) -> BTreeSet<String> {
    indices.iter().map(|i| format!("{prefix}{}", i.index(pool_size))).collect()
}

proptest! {
    /// The pipelined evaluator and the materialize-everything evaluator are
    /// the same function.
    #[test]
    fn planned_and_naive_evaluators_agree(
        t0 in arb_rows(),
        t1 in prop::option::of(arb_rows()),
        shape in arb_shape(),
    ) {
        let (catalog, parts) = build_case(&t0, &t1, &shape);
        let tree = parse(&parts.render()).unwrap().tree;
        let planned = eval_oqt(&catalog, &tree).unwrap();
        let naive = eval_oqt_naive(&catalog, &tree).unwrap();
        prop_assert!(planned.same_rows(&naive), "planned {:?} naive {:?}", planned.rows(), naive.rows());
    }

    /// Re-parsing a canonical rendering yields the same canonical rendering.
    #[test]
    fn canonical_text_is_a_fixed_point(
        t0 in arb_rows(),
        t1 in prop::option::of(arb_rows()),
        shape in arb_shape(),
    ) {
        let (_, parts) = build_case(&t0, &t1, &shape);
        let first = parse(&parts.render()).unwrap();
        let again = parse(&first.canonical_sql()).unwrap();
        prop_assert_eq!(first.canonical_sql(), again.canonical_sql());
        prop_assert_eq!(&first.fragments, &again.fragments);
    }

    /// Matching identity — the fragment sets — ignores the order in which
    /// lists were written. (The canonical SQL text deliberately keeps the
    /// author's listing order; only the fragments are the identity.)
    #[test]
    fn listing_order_does_not_change_identity(
        t0 in arb_rows(),
        t1 in prop::option::of(arb_rows()),
        shape in arb_shape(),
    ) {
        let (_, parts) = build_case(&t0, &t1, &shape);
        let forward = parse(&parts.render_ordered(false)).unwrap();
        let backward = parse(&parts.render_ordered(true)).unwrap();
        prop_assert_eq!(&forward.fragments, &backward.fragments);
        let score = match_score(&forward.fragments, &backward.fragments);
        prop_assert!(score.is_match);
    }

    /// Every valid query is a full match for itself.
    #[test]
    fn every_query_fully_matches_itself(
        t0 in arb_rows(),
        t1 in prop::option::of(arb_rows()),
        shape in arb_shape(),
    ) {
        let (_, parts) = build_case(&t0, &t1, &shape);
        let f = parse(&parts.render()).unwrap().fragments;
        let score = match_score(&f, &f);
        prop_assert!(score.is_match);
        prop_assert_eq!(score.total, 4);
    }

    /// Adding a condition to the query never lowers the selection score.
    #[test]
    fn extra_query_conditions_never_lower_sigma(
        q_picks in prop::collection::vec(any::<Index>(), 0..5),
        mv_picks in prop::collection::vec(any::<Index>(), 0..5),
        extra in any::<Index>(),
    ) {
        let q = string_set(&q_picks, 10, "c");
        let mv = string_set(&mv_picks, 10, "c");
        let mut q_wider = q.clone();
        q_wider.insert(format!("c{}", extra.index(10)));
        let before = match_selection(&q, &mv);
        let after = match_selection(&q_wider, &mv);
        prop_assert!(!frac_lt(after, before), "sigma fell from {before} to {after}");
    }

    /// A view condition the query does not share lowers the selection score —
    /// strictly whenever there was a nonzero score to lose, and a score of
    /// zero stays zero.
    #[test]
    fn unmatched_view_conditions_strictly_lower_sigma(
        q_picks in prop::collection::vec(any::<Index>(), 0..5),
        mv_picks in prop::collection::vec(any::<Index>(), 0..5),
    ) {
        let q = string_set(&q_picks, 10, "c");
        let mv = string_set(&mv_picks, 10, "c");
        let foreign = "c_nowhere".to_string(); // outside the generated pool
        let mut mv_wider = mv.clone();
        mv_wider.insert(foreign);
        let before = match_selection(&q, &mv);
        let after = match_selection(&q, &mv_wider);
        if before.num > 0 {
            prop_assert!(frac_lt(after, before), "sigma did not fall: {before} then {after}");
        } else {
            prop_assert_eq!(after.num, 0, "sigma rose from zero: {}", after);
        }
    }

    /// The inverted index proposes exactly the views a flat scan would.
    #[test]
    fn index_candidates_equal_flat_scan(
        views in prop::collection::vec(prop::collection::vec(any::<Index>(), 1..=4), 1..40),
        probe_picks in prop::collection::vec(any::<Index>(), 1..=4),
    ) {
        let mut ix = DomainIndex::new();
        let mut flat = Vec::new();
        for (i, picks) in views.iter().enumerate() {
            let tables = string_set(picks, 8, "table_");
            let id = MvId(format!("mv{i:04}"));
            ix.insert(id.clone(), &tables);
            flat.push((id, tables));
        }
        let probe = string_set(&probe_picks, 8, "table_");
        let scan: Vec<MvId> = flat
            .iter()
            .filter(|(_, tables)| *tables == probe)
            .map(|(id, _)| id.clone())
            .collect();
        prop_assert_eq!(ix.candidates(&probe), scan);
    }

    /// Inserting then removing a view leaves the index exactly as it was.
    #[test]
    fn removing_a_view_undoes_its_insertion(
        views in prop::collection::vec(prop::collection::vec(any::<Index>(), 1..=4), 0..20),
        extra_picks in prop::collection::vec(any::<Index>(), 1..=4),
    ) {
        let mut ix = DomainIndex::new();
        for (i, picks) in views.iter().enumerate() {
            ix.insert(MvId(format!("mv{i:04}")), &string_set(picks, 8, "table_"));
        }
        let before = ix.debug_dump();
        let guest = MvId("mv9999".to_string());
        ix.insert(guest.clone(), &string_set(&extra_picks, 8, "table_"));
        ix.remove(&guest);
        prop_assert_eq!(before, ix.debug_dump());
    }

    /// Group sums computed over any two-way split of a table regroup to the
    /// sums over the whole table.
    #[test]
    fn partitioned_sums_regroup_to_the_whole(
        rows in arb_rows(),
        cut in any::<Index>(),
    ) {
        let sql = "select r.g, sum(r.v), sum(1) from r group by r.g";
        let tree = parse(sql).unwrap().tree;
        let eval_part = |part: &[RowSpec]| {
            let mut catalog = Catalog::new();
            catalog.insert("r", table_from(part)).unwrap();
            eval_oqt(&catalog, &tree).unwrap()
        };
        let whole = eval_part(&rows);
        let at = cut.index(rows.len() + 1).min(rows.len());
        let (left, right) = rows.split_at(at);

        // fold both halves' group rows back together by key
        let mut merged: BTreeMap<Value, (i64, i64)> = BTreeMap::new();
        for part in [left, right] {
            if part.is_empty() {
                continue;
            }
            for row in eval_part(part).rows() {
                let (Value::Int(v), Value::Int(c)) = (&row[1], &row[2]) else {
                    panic!("sums must be integers, got {row:?}");
                };
                let slot = merged.entry(row[0].clone()).or_insert((0, 0));
                slot.0 += v;
                slot.1 += c;
            }
        }
        let mut rebuilt = Relation::new(whole.columns().to_vec()).unwrap();
        for (key, (v, c)) in merged {
            rebuilt.push_row(vec![key, Value::Int(v), Value::Int(c)]).unwrap();
        }
        prop_assert!(whole.same_rows(&rebuilt), "whole {:?} rebuilt {:?}", whole.rows(), rebuilt.rows());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Whatever mix of views, states, tracked queries and log rows a store
    /// holds, a load sees the identical store.
    #[test]
    fn saved_stores_load_back_identical(
        t0 in arb_rows(),
        shapes in prop::collection::vec(arb_shape(), 1..=3),
        demote_mask in prop::collection::vec(any::<bool>(), 3),
        hit_sessions in 0u64..3,
    ) {
        let (catalog, _) = build_case(&t0, &None, &shapes[0]);
        let mut store = MvStore::new();
        let mut ids = Vec::new();
        for shape in &shapes {
            let (_, parts) = build_case(&t0, &None, shape);
            if let Ok(id) = store.create_mv(&catalog, parse(&parts.render()).unwrap()) {
                ids.push(id);
            }
        }
        for (id, demote) in ids.iter().zip(&demote_mask) {
            if *demote {
                store.demote(id).unwrap();
            }
        }
        for _ in 0..hit_sessions {
            store.record_hit(ids[0].as_str()).unwrap();
            store.end_session();
        }

        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let loaded = MvStore::load(dir.path()).unwrap();

        prop_assert_eq!(loaded.log().entries(), store.log().entries());
        prop_assert_eq!(loaded.log().current_session(), store.log().current_session());
        prop_assert_eq!(loaded.active_count(), store.active_count());
        prop_assert_eq!(loaded.inactive_count(), store.inactive_count());
        for id in &ids {
            let a = store.view(id).unwrap();
            let b = loaded.view(id).unwrap();
            prop_assert_eq!(a.state, b.state);
            prop_assert_eq!(a.source.canonical_sql(), b.source.canonical_sql());
            prop_assert_eq!(&a.rows, &b.rows);
        }
    }
}
