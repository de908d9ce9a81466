//! Acceptance suite: nine numbered end-to-end criteria covering the score
//! formulas, re-aggregation from stored views, randomized soundness, the
//! SUM-only restriction, domain-index pruning (correctness and speed), the
//! analyzer lifecycle scenario, maintenance invariants under random load, the
//! view-path/warehouse-path performance trend, and persistence.
//!
//! Each test prints exactly one `criterion N: pass — ...` or
//! `criterion N: fail — ...` line, written straight to the process stdout so
//! it shows up without `--nocapture`. CPU-heavy tests serialize on one lock
//! so the two wall-clock comparisons (criteria 5 and 8) never compete with
//! sibling tests.

use std::collections::BTreeSet;
use std::hint::black_box;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use mvmatch_core::eval::eval_oqt_naive;
use mvmatch_core::matcher::{
    match_aggregates, match_group_attrs, match_projection, match_selection,
};
use mvmatch_core::parser::{parse, ParsedQuery};
use mvmatch_core::store::LogEntry;
use mvmatch_core::{
    dwgen, workload, Catalog, Column, ColumnType, DomainIndex, Engine, EngineConfig, Fraction,
    MvId, MvStore, Relation, ScvAction, Value, ViewState,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_lock() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Run one criterion body and print its single pass/fail line. The body
/// returns a short summary for the pass line; a panic becomes the fail line
/// and is re-raised so the test still fails.
fn criterion<F: FnOnce() -> String>(n: u32, body: F) {
    // Write through the raw handle: the harness captures the print macros,
    // and these lines are the point of the suite.
    let report = |line: String| {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    };
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(summary) => report(format!("criterion {n}: pass — {summary}")),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("panicked");
            report(format!(
                "criterion {n}: fail — {}",
                msg.lines().next().unwrap_or(msg)
            ));
            panic::resume_unwind(payload);
        }
    }
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn rel(cols: &[(&str, ColumnType)], rows: Vec<Vec<Value>>) -> Relation {
    let mut r = Relation::new(cols.iter().map(|(n, t)| Column::new(*n, *t)).collect())
        .expect("valid fixture columns");
    for row in rows {
        r.push_row(row).expect("valid fixture row");
    }
    r
}

fn mean(samples: &[Duration]) -> Duration {
    samples.iter().sum::<Duration>() / samples.len() as u32
}

// ---------------------------------------------------------------------------
// Random workload generation shared by criteria 3 and 7
// ---------------------------------------------------------------------------

/// One or two small tables `t0`/`t1`, each with an integer key `k`, a text
/// group `g` and an integer measure `v`.
fn random_catalog(rng: &mut ChaCha8Rng) -> Catalog {
    let mut catalog = Catalog::new();
    for t in 0..rng.gen_range(1..=2) {
        let mut r = rel(&[("k", ColumnType::Int), ("g", ColumnType::Text), ("v", ColumnType::Int)], vec![]);
        for _ in 0..rng.gen_range(4..=24) {
            r.push_row(vec![
                Value::Int(rng.gen_range(0..8)),
                text(["x", "y", "z", "w"][rng.gen_range(0..4)]),
                Value::Int(rng.gen_range(0..100)),
            ])
            .unwrap();
        }
        catalog.insert(&format!("t{t}"), r).unwrap();
    }
    catalog
}

fn pick_distinct(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> Vec<String> {
    let mut items: Vec<&String> = pool.iter().collect();
    items.shuffle(rng);
    let mut out: Vec<String> = items.into_iter().take(n).cloned().collect();
    out.sort();
    out
}

fn random_cond(rng: &mut ChaCha8Rng, tables: &[String]) -> String {
    let t = &tables[rng.gen_range(0..tables.len())];
    match rng.gen_range(0..3) {
        0 => format!("{t}.k {} {}", ["=", "!=", "<", ">"][rng.gen_range(0..4)], rng.gen_range(0..8)),
        1 => format!("{t}.g {} '{}'", ["=", "!="][rng.gen_range(0..2)], ["x", "y", "z", "w"][rng.gen_range(0..4)]),
        _ => format!("{t}.v {} {}", ["<", ">"][rng.gen_range(0..2)], rng.gen_range(10..90)),
    }
}

fn sql_from_parts(keys: &[String], aggs: &[String], tables: &[String], conds: &[String]) -> String {
    let mut sql = format!(
        "select {}, {} from {}",
        keys.join(", "),
        aggs.join(", "),
        tables.join(", ")
    );
    if !conds.is_empty() {
        sql.push_str(" where ");
        sql.push_str(&conds.join(" and "));
    }
    sql.push_str(" group by ");
    sql.push_str(&keys.join(", "));
    sql
}

/// A random view definition and a query related to it: sometimes an exact or
/// coarser restatement, sometimes with extra conditions (answerable or not
/// from the view's output), sometimes deliberately incompatible.
fn random_view_and_query(rng: &mut ChaCha8Rng, catalog: &Catalog) -> (String, String) {
    let tables: Vec<String> = catalog.table_names().map(str::to_string).collect();
    let cols: Vec<String> = tables
        .iter()
        .flat_map(|t| [format!("{t}.k"), format!("{t}.g")])
        .collect();
    let key_count = rng.gen_range(1..=cols.len().min(2));
    let keys = pick_distinct(rng, &cols, key_count);
    let mut agg_pool: Vec<String> = vec!["sum(1)".to_string()];
    for t in &tables {
        agg_pool.push(format!("sum({t}.v)"));
    }
    let agg_count = rng.gen_range(1..=agg_pool.len());
    let aggs = pick_distinct(rng, &agg_pool, agg_count);
    let conds: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| random_cond(rng, &tables)).collect();
    let mv_sql = sql_from_parts(&keys, &aggs, &tables, &conds);

    let q_key_count = rng.gen_range(1..=keys.len());
    let mut q_keys = pick_distinct(rng, &keys, q_key_count);
    let q_agg_count = rng.gen_range(1..=aggs.len());
    let q_aggs = pick_distinct(rng, &aggs, q_agg_count);
    let mut q_conds = conds.clone();
    match rng.gen_range(0..5) {
        0 | 1 => {} // exact or coarser restatement
        2 => {
            // residual condition on a grouped column: the view can evaluate it
            let k = &keys[rng.gen_range(0..keys.len())];
            if k.ends_with(".g") {
                q_conds.push(format!("{k} != '{}'", ["x", "y"][rng.gen_range(0..2)]));
            } else {
                q_conds.push(format!("{k} < {}", rng.gen_range(2..8)));
            }
        }
        3 => q_conds.push(random_cond(rng, &tables)), // answerable only sometimes
        _ => {
            // break the match: un-fold a view condition or group on a column
            // the view never kept
            if !q_conds.is_empty() {
                q_conds.remove(rng.gen_range(0..q_conds.len()));
            } else if let Some(extra) = cols.iter().find(|c| !q_keys.contains(c)) {
                q_keys.push(extra.clone());
                q_keys.sort();
            }
        }
    }
    (mv_sql, sql_from_parts(&q_keys, &q_aggs, &tables, &q_conds))
}

// ---------------------------------------------------------------------------
// 1. Fragment score formulas
// ---------------------------------------------------------------------------

#[test]
fn c1_fragment_score_rule_table() {
    criterion(1, || {
        let started = Instant::now();
        let empty = set(&[]);
        let x = set(&["r.a = 1"]);
        let y = set(&["r.b = 2"]);
        // 3x3 grid over {∅, {x}, {y}} per side: the score is 1 exactly when
        // the fragment's containment holds, 0 otherwise. With singleton sets
        // the same table applies to all four fragment kinds.
        let grid: [(&BTreeSet<String>, &BTreeSet<String>, u64); 9] = [
            (&empty, &empty, 1),
            (&empty, &x, 0),
            (&empty, &y, 0),
            (&x, &empty, 1),
            (&x, &x, 1),
            (&x, &y, 0),
            (&y, &empty, 1),
            (&y, &x, 0),
            (&y, &y, 1),
        ];
        type ScoreFn = fn(&BTreeSet<String>, &BTreeSet<String>) -> Fraction;
        let fns: [(&str, ScoreFn); 4] = [
            ("sigma", match_selection),
            ("gamma", match_group_attrs),
            ("omega", match_aggregates),
            ("pi", match_projection),
        ];
        for (name, f) in fns {
            for (q, mv, want) in &grid {
                let got = f(q, mv);
                let ok = if *want == 1 { got.is_one() } else { got.num == 0 };
                assert!(ok, "{name} q={q:?} mv={mv:?}: got {got}, want {want}");
            }
        }
        // select attr1, attr3 against a view projecting attr1, attr2, attr5:
        // one of two columns found; swap attr3 for attr2 and everything is.
        let mv1 = set(&["table1.attr1", "table1.attr2", "table1.attr5"]);
        let half = match_projection(&set(&["table1.attr1", "table1.attr3"]), &mv1);
        assert_eq!((half.num, half.den), (1, 2), "got {half}");
        let full = match_projection(&set(&["table1.attr1", "table1.attr2"]), &mv1);
        assert!(full.is_one(), "got {full}");
        let secs = started.elapsed().as_secs_f64();
        assert!(secs < 1.0, "took {secs:.2}s");
        "36 rule-table cases exact; projection overlap examples score 1/2 and 1".into()
    });
}

// ---------------------------------------------------------------------------
// 2. Coarser re-aggregation from a stored view
// ---------------------------------------------------------------------------

#[test]
fn c2_regroup_from_stored_view() {
    criterion(2, || {
        let mut catalog = Catalog::new();
        catalog
            .insert(
                "r",
                rel(
                    &[("a", ColumnType::Text), ("b", ColumnType::Text), ("c", ColumnType::Int)],
                    vec![
                        vec![text("PA23-250"), text("ZGF-516"), Value::Int(20)],
                        vec![text("PA23-250"), text("AFR-987"), Value::Int(30)],
                        vec![text("C-90A"), text("AFF-124"), Value::Int(10)],
                        vec![text("C-90A"), text("MNB-467"), Value::Int(80)],
                    ],
                ),
            )
            .unwrap();
        let mut engine = Engine::new(catalog, EngineConfig::default());
        let (id, stored) = engine
            .create_view("select r.a, r.b, sum(r.c) from r group by r.a, r.b")
            .unwrap();
        assert_eq!(stored, 4);
        let answer = engine.answer("select r.a, sum(r.c) from r group by r.a").unwrap();
        assert_eq!(answer.trace.outcome.served_from_view(), Some(&id));
        let want = rel(
            &[("r.a", ColumnType::Text), ("sum(r.c)", ColumnType::Int)],
            vec![
                vec![text("C-90A"), Value::Int(90)],
                vec![text("PA23-250"), Value::Int(50)],
            ],
        );
        assert!(answer.rows.same_rows(&want), "got {:?}", answer.rows.rows());
        assert_eq!(answer.rows.rows(), want.rows(), "deterministic key order");
        "two-attribute sums regrouped to one attribute, exactly 50 and 90".into()
    });
}

// ---------------------------------------------------------------------------
// 3. Randomized soundness oracle
// ---------------------------------------------------------------------------

#[test]
fn c3_random_soundness_oracle() {
    criterion(3, || {
        let _guard = heavy_lock();
        let started = Instant::now();
        let trials = 1000u64;
        let mut served = 0usize;
        for i in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(31_000 + i);
            let catalog = random_catalog(&mut rng);
            let (mv_sql, q_sql) = random_view_and_query(&mut rng, &catalog);
            let mut engine = Engine::new(catalog, EngineConfig::default());
            engine
                .create_view(&mv_sql)
                .unwrap_or_else(|e| panic!("trial {i}: create {mv_sql}: {e}"));
            let answer = engine
                .answer(&q_sql)
                .unwrap_or_else(|e| panic!("trial {i}: answer {q_sql}: {e}"));
            if answer.trace.outcome.served_from_view().is_some() {
                served += 1;
            }
            let tree = parse(&q_sql).unwrap().tree;
            let want = eval_oqt_naive(engine.catalog(), &tree).unwrap();
            assert!(
                answer.rows.same_rows(&want),
                "trial {i}: `{q_sql}` answered from `{mv_sql}` differs from direct evaluation"
            );
        }
        let secs = started.elapsed().as_secs_f64();
        assert!(served >= 300, "only {served} of {trials} answers came from views");
        assert!(secs < 60.0, "took {secs:.1}s");
        format!(
            "{trials} random (catalog, view, query) triples equal direct evaluation; \
             {served} served from views in {secs:.1}s"
        )
    });
}

// ---------------------------------------------------------------------------
// 4. SUM-only aggregate guard
// ---------------------------------------------------------------------------

#[test]
fn c4_sum_only_guard() {
    criterion(4, || {
        for func in ["avg", "count", "max", "min"] {
            let sql = format!("select t.x, {func}(t.y) from t group by t.x");
            let err = parse(&sql).unwrap_err().to_string();
            assert!(
                err.contains(&format!("non-SUM aggregate: {func}(t.y)")),
                "{func}: {err}"
            );
            // the same validation protects view creation
            let mut engine = Engine::new(Catalog::new(), EngineConfig::default());
            assert!(engine.create_view(&sql).is_err(), "{func} accepted as a view");
        }
        // Why only SUM survives regrouping: store per-subgroup averages, then
        // derive a coarser average from them the way sums are derived.
        // Subgroup p holds {10, 40}, subgroup q holds {50, 50, 50}.
        let detail: [(i64, &str); 5] = [(10, "p"), (40, "p"), (50, "q"), (50, "q"), (50, "q")];
        let (p_sum, p_cnt) = detail.iter().filter(|(_, g)| *g == "p").fold((0, 0), |(s, c), (v, _)| (s + v, c + 1));
        let (q_sum, q_cnt) = detail.iter().filter(|(_, g)| *g == "q").fold((0, 0), |(s, c), (v, _)| (s + v, c + 1));
        // mean of the stored means, as exact rationals: (p̄ + q̄) / 2
        let naive_num = p_sum * q_cnt + q_sum * p_cnt;
        let naive_den = 2 * p_cnt * q_cnt;
        // true mean over all detail rows
        let true_num = p_sum + q_sum;
        let true_den = p_cnt + q_cnt;
        assert_eq!((naive_num, naive_den), (450, 12)); // = 75/2
        assert_eq!((true_num, true_den), (200, 5)); // = 40
        assert_ne!(
            naive_num * true_den,
            true_num * naive_den,
            "averaging the stored averages must NOT equal the true average"
        );
        // SUM has no such defect on the very same rows: 50 + 150 = 200.
        assert_eq!(p_sum + q_sum, detail.iter().map(|(v, _)| v).sum::<i64>());
        "avg/count/max/min rejected at validation; derived average 75/2 provably differs from true 200/5".into()
    });
}

// ---------------------------------------------------------------------------
// 5. Domain-index pruning: fixture, equivalence, speed
// ---------------------------------------------------------------------------

fn star_fixture() -> DomainIndex {
    let mut ix = DomainIndex::new();
    let domains: [(&str, &[&str]); 8] = [
        ("MV1", &["dimension_a", "dimension_b", "dimension_c", "fact_a"]),
        ("MV2", &["dimension_a", "fact_a"]),
        ("MV3", &["dimension_c", "fact_a"]),
        ("MV4", &["fact_a"]),
        ("MV5", &["dimension_b", "fact_a"]),
        ("MV6", &["dimension_a", "dimension_b", "fact_a"]),
        ("MV7", &["dimension_a", "dimension_c", "fact_a"]),
        ("MV8", &["dimension_b", "dimension_c", "fact_a"]),
    ];
    for (id, tables) in domains {
        ix.insert(MvId::from(id), &tables.iter().map(|s| s.to_string()).collect());
    }
    ix
}

/// 350 single-table views plus one pre-parsed probe query per view.
fn wide_engine(n: usize) -> (Engine, Vec<ParsedQuery>) {
    let mut catalog = Catalog::new();
    for i in 0..n {
        catalog
            .insert(
                &format!("t{i:03}"),
                rel(
                    &[("k", ColumnType::Text), ("v", ColumnType::Int)],
                    vec![vec![text("a"), Value::Int(1)], vec![text("b"), Value::Int(2)]],
                ),
            )
            .unwrap();
    }
    let mut engine = Engine::new(catalog, EngineConfig::default());
    let mut probes = Vec::with_capacity(n);
    for i in 0..n {
        let sql = format!("select t{i:03}.k, sum(t{i:03}.v) from t{i:03} group by t{i:03}.k");
        engine.create_view(&sql).unwrap();
        probes.push(parse(&sql).unwrap());
    }
    (engine, probes)
}

/// Mean wall time of one full probe pass down each path, 2 warm-up passes
/// discarded, 10 samples kept, indexed and scan passes interleaved.
fn matching_path_means(engine: &Engine, probes: &[ParsedQuery]) -> (Duration, Duration) {
    let indexed_pass = || {
        for q in probes {
            black_box(engine.find_match(q).unwrap());
        }
    };
    let scan_pass = || {
        for q in probes {
            black_box(engine.find_match_linear_scan(q));
        }
    };
    for _ in 0..2 {
        indexed_pass();
        scan_pass();
    }
    let mut indexed = Vec::with_capacity(10);
    let mut scan = Vec::with_capacity(10);
    for _ in 0..10 {
        let t = Instant::now();
        indexed_pass();
        indexed.push(t.elapsed());
        let t = Instant::now();
        scan_pass();
        scan.push(t.elapsed());
    }
    (mean(&indexed), mean(&scan))
}

#[test]
fn c5_domain_index_pruning_and_speed() {
    criterion(5, || {
        let _guard = heavy_lock();
        // (a) star-schema fixture: literal coverage admits every view touching
        // both tables; exact table-set refinement keeps only the true match.
        let ix = star_fixture();
        let probe = set(&["dimension_a", "fact_a"]);
        let pre = ix.candidates_prerefinement(&probe);
        let pre_ids: Vec<&str> = pre.iter().map(|id| id.as_str()).collect();
        assert_eq!(pre_ids, ["MV1", "MV2", "MV6", "MV7"]);
        let refined = ix.refine(pre, &probe);
        assert_eq!(refined.iter().map(|id| id.as_str()).collect::<Vec<_>>(), ["MV2"]);
        assert_eq!(ix.candidates(&probe), refined, "fast path equals refined pre-refinement");

        // (b) candidate equivalence: index versus a flat scan on 500 random
        // table sets, for both the fast path and the two-stage path.
        let mut rng = ChaCha8Rng::seed_from_u64(52_000);
        let pool: Vec<String> = (0..12).map(|i| format!("table_{i:02}")).collect();
        let mut random_ix = DomainIndex::new();
        let mut flat: Vec<(MvId, BTreeSet<String>)> = Vec::new();
        for i in 0..500 {
            let width = rng.gen_range(1..=4);
            let tables: BTreeSet<String> =
                pick_distinct(&mut rng, &pool, width).into_iter().collect();
            let id = MvId(format!("mv{i:04}"));
            random_ix.insert(id.clone(), &tables);
            flat.push((id, tables));
        }
        for _ in 0..300 {
            let width = rng.gen_range(1..=4);
            let probe: BTreeSet<String> =
                pick_distinct(&mut rng, &pool, width).into_iter().collect();
            let scan: Vec<MvId> = flat
                .iter()
                .filter(|(_, tables)| *tables == probe)
                .map(|(id, _)| id.clone())
                .collect();
            assert_eq!(random_ix.candidates(&probe), scan);
            assert_eq!(
                random_ix.refine(random_ix.candidates_prerefinement(&probe), &probe),
                scan
            );
        }

        // (c) with 350 views, indexed matching must beat scoring every view
        // by at least 10x (means over 10 post-warm-up passes; one re-run
        // absorbs machine noise).
        let (engine, probes) = wide_engine(350);
        for q in &probes {
            assert_eq!(engine.find_match(q).unwrap(), engine.find_match_linear_scan(q));
        }
        let (mut indexed, mut scan) = matching_path_means(&engine, &probes);
        if indexed * 10 > scan {
            (indexed, scan) = matching_path_means(&engine, &probes);
        }
        assert!(
            indexed * 10 <= scan,
            "indexed matching {indexed:?} is not 10x faster than the scan {scan:?}"
        );
        format!(
            "fixture pruned to MV1/MV2/MV6/MV7 then MV2; 500-view index equals a flat scan; \
             350-view indexed matching {:.0}x faster ({:?} vs {:?} per pass)",
            scan.as_secs_f64() / indexed.as_secs_f64(),
            indexed,
            scan
        )
    });
}

// ---------------------------------------------------------------------------
// 6. Analyzer lifecycle scenario
// ---------------------------------------------------------------------------

#[test]
fn c6_analyzer_scenario() {
    criterion(6, || {
        let catalog = dwgen::build_catalog(120, 5);
        let busy_view = "select a.sex, sum(1) from admissions a group by a.sex";
        let idle_view = "select g.gender_number, sum(1) from gender_dim g group by g.gender_number";
        let shelved_view = "select ag.age_category, sum(1) from age_dim ag group by ag.age_category";
        let new_query = "select s.vaed_value, sum(1) from admsource_dim s group by s.vaed_value";

        let mut store = MvStore::new();
        store.create_mv(&catalog, parse(busy_view).unwrap()).unwrap(); // mv0001
        store.create_mv(&catalog, parse(idle_view).unwrap()).unwrap(); // mv0002
        let shelved = store.create_mv(&catalog, parse(shelved_view).unwrap()).unwrap(); // mv0003
        store.demote(&shelved).unwrap();

        let config = EngineConfig { session_threshold: 3, ..EngineConfig::default() };
        let mut engine = Engine::with_store(catalog, store, config);

        let sessions: [&[&str]; 3] = [
            &[busy_view, shelved_view, busy_view, new_query],
            &[busy_view, new_query, shelved_view],
            &[busy_view, new_query, shelved_view],
        ];
        for queries in sessions {
            for sql in queries {
                engine.answer(sql).unwrap();
            }
            engine.end_session();
        }

        // the hit log, session by session, one row per item, zero rows kept
        let dir = tempfile::tempdir().unwrap();
        engine.save_store(dir.path()).unwrap();
        let log_csv = std::fs::read_to_string(dir.path().join("query_log.csv")).unwrap();
        let want = "session_id,item_id,hits\n\
                    1,mv0001,2\n1,mv0002,0\n1,mv0003,1\n1,q0001,1\n\
                    2,mv0001,1\n2,mv0002,0\n2,mv0003,1\n2,q0001,1\n\
                    3,mv0001,1\n3,mv0002,0\n3,mv0003,1\n3,q0001,1\n";
        assert_eq!(log_csv, want);

        let actions = engine.analyze_now().unwrap();
        let labels: Vec<String> = actions.iter().map(|a| a.action.to_string()).collect();
        assert_eq!(
            labels,
            ["demote mv0002", "promote mv0003", "materialize q0001", "purge q0001"]
        );

        let store = engine.store();
        let active: Vec<&str> = store
            .views()
            .filter(|v| v.state == ViewState::Active)
            .map(|v| v.id.as_str())
            .collect();
        let inactive: Vec<&str> = store
            .views()
            .filter(|v| v.state == ViewState::Inactive)
            .map(|v| v.id.as_str())
            .collect();
        assert_eq!(active, ["mv0001", "mv0003", "mv0004"]);
        assert_eq!(inactive, ["mv0002"]);
        assert_eq!(store.tracked_count(), 0);
        assert!(store.log().entries().is_empty(), "log must be truncated");
        assert_eq!(store.log().current_session(), 1);

        // the freshly materialized view answers its query correctly
        let made = store.view(&MvId("mv0004".into())).unwrap();
        let want_rows = eval_oqt_naive(engine.catalog(), &parse(new_query).unwrap().tree).unwrap();
        assert!(made.rows.same_rows(&want_rows));
        "12 log rows exact; ends active={mv0001,mv0003,mv0004}, inactive={mv0002}, log empty, session 1".into()
    });
}

// ---------------------------------------------------------------------------
// 7. Maintenance invariants under random load
// ---------------------------------------------------------------------------

#[test]
fn c7_maintenance_invariants() {
    criterion(7, || {
        let _guard = heavy_lock();
        let mut promotions = 0usize;
        let mut refresh_checks = 0usize;
        for w in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(97_000 + w);
            let catalog = random_catalog(&mut rng);
            let threshold: u64 = rng.gen_range(2..=3);

            let mut store = MvStore::new();
            let mut pool: Vec<String> = Vec::new();
            for _ in 0..rng.gen_range(2..=3) {
                let (mv_sql, q_sql) = random_view_and_query(&mut rng, &catalog);
                if let Ok(id) = store.create_mv(&catalog, parse(&mv_sql).unwrap()) {
                    if rng.gen_bool(0.4) {
                        store.demote(&id).unwrap();
                    }
                    pool.push(mv_sql);
                    pool.push(q_sql);
                }
            }
            let config = EngineConfig { session_threshold: threshold, ..EngineConfig::default() };
            let mut engine = Engine::with_store(catalog, store, config);

            for _ in 0..threshold {
                for _ in 0..rng.gen_range(0..=3) {
                    let sql = pool[rng.gen_range(0..pool.len())].clone();
                    engine.answer(&sql).unwrap();
                }
                engine.end_session();
            }

            let log: Vec<LogEntry> = engine.store().log().entries().to_vec();
            let sessions_with_hits = |item: &str| {
                (1..=threshold)
                    .filter(|s| log.iter().any(|e| e.session == *s && e.item == item && e.hits > 0))
                    .count() as u64
            };
            let logged = |item: &str| log.iter().any(|e| e.item == item);

            let actions = engine.analyze_now().unwrap();
            for applied in &actions {
                if let ScvAction::Promote { id } = &applied.action {
                    assert_eq!(
                        sessions_with_hits(id.as_str()),
                        threshold,
                        "workload {w}: {id} promoted without hits in every session"
                    );
                    promotions += 1;
                }
            }
            for v in engine.store().views() {
                if v.state == ViewState::Active && logged(v.id.as_str()) {
                    assert!(
                        sessions_with_hits(v.id.as_str()) > 0,
                        "workload {w}: zero-hit view {} is still active",
                        v.id
                    );
                }
            }

            // mutate one table, then every active view must equal recomputation
            let names: Vec<String> = engine.catalog().table_names().map(str::to_string).collect();
            let table = names[rng.gen_range(0..names.len())].clone();
            let replacement = {
                let like = engine.catalog().get(&table).unwrap();
                let mut out = Relation::new(like.columns().to_vec()).unwrap();
                for _ in 0..rng.gen_range(5..=20) {
                    let row = like
                        .columns()
                        .iter()
                        .map(|c| match c.ty {
                            ColumnType::Int => Value::Int(rng.gen_range(0..20)),
                            _ => text(["x", "y", "z", "w"][rng.gen_range(0..4)]),
                        })
                        .collect();
                    out.push_row(row).unwrap();
                }
                out
            };
            engine.data_changed(&table, replacement).unwrap();
            for v in engine.store().views() {
                if v.state == ViewState::Active {
                    let want = eval_oqt_naive(engine.catalog(), &v.source.tree).unwrap();
                    assert!(
                        v.rows.same_rows(&want),
                        "workload {w}: {} differs from recomputation after {table} changed",
                        v.id
                    );
                    refresh_checks += 1;
                }
            }
        }
        assert!(promotions > 0, "the random workloads never exercised a promotion");
        format!(
            "100 workloads: {promotions} promotions all backed by full-window hits, \
             no idle view left active, {refresh_checks} post-mutation refreshes exact"
        )
    });
}

// ---------------------------------------------------------------------------
// 8. View path beats the warehouse as data grows
// ---------------------------------------------------------------------------

/// Bench with one allowed re-run when the expected ordering does not hold on
/// the first measurement.
fn bench_ordered(engine: &Engine, sql: &str) -> mvmatch_core::engine::BenchReport {
    let report = engine.bench(sql, 12, 2).unwrap();
    if report.view_path >= report.warehouse_path {
        return engine.bench(sql, 12, 2).unwrap();
    }
    report
}

#[test]
fn c8_view_path_beats_warehouse_at_scale() {
    criterion(8, || {
        let _guard = heavy_lock();
        let started = Instant::now();
        let sizes = [1_000usize, 10_000, 100_000, 200_000];
        let largest = *sizes.last().unwrap();
        let mut measured = Vec::new();
        for &n in &sizes {
            let catalog = dwgen::build_catalog(n, 1_234);
            let mut engine = Engine::new(catalog, EngineConfig::default());
            for sql in workload::all() {
                engine.create_view(sql).unwrap();
            }
            let queries: [(&str, &str); 4] = [
                ("joins", workload::JOIN_HEAVY),
                ("grouping", workload::GROUP_HEAVY),
                ("selections", workload::SELECTION_HEAVY),
                ("mixed", workload::MIXED),
            ];
            for (name, sql) in queries {
                if name == "grouping" && n != largest {
                    continue; // the wide-grouping ordering is only claimed at the top size
                }
                let report = bench_ordered(&engine, sql);
                assert!(
                    report.view_path < report.warehouse_path,
                    "{name} at {n} rows: view path {:?} did not beat warehouse {:?}",
                    report.view_path,
                    report.warehouse_path
                );
                measured.push(format!(
                    "{name}@{n}: {:.3}ms vs {:.3}ms",
                    report.view_path.as_secs_f64() * 1e3,
                    report.warehouse_path.as_secs_f64() * 1e3
                ));
            }
        }
        let secs = started.elapsed().as_secs_f64();
        assert!(secs < 600.0, "took {secs:.0}s");
        format!(
            "view path won for joins/selections/mixed at 1k-200k rows and for wide grouping \
             at 200k ({secs:.0}s total; {})",
            measured.join("; ")
        )
    });
}

// ---------------------------------------------------------------------------
// 9. Persistence round-trip
// ---------------------------------------------------------------------------

/// 24 distinct single-dimension view definitions over the synthetic warehouse.
fn round_trip_queries() -> Vec<String> {
    let dims: [(&str, &str, &str, &str, &str); 8] = [
        ("gender_dim", "g", "gender_number", "description", "description"),
        ("admsource_dim", "s", "vaed_value", "description", "description"),
        ("admtype_dim", "t", "vaed_value", "description", "description"),
        ("care_type_dim", "c", "vaed_value", "description", "description"),
        ("separation_mode_dim", "m", "vaed_value", "description", "description"),
        ("age_dim", "ag", "age_category", "description", "description"),
        ("diagnosis_dim", "dm", "code_range_start", "diagnosis_desc", "diagnosis_desc"),
        ("admtime_dim", "adt", "admyear", "admmonth", "admtimeid"),
    ];
    let mut out = Vec::new();
    for (table, alias, key, second, textual) in dims {
        out.push(format!(
            "select {alias}.{key}, sum(1) from {table} {alias} group by {alias}.{key}"
        ));
        out.push(format!(
            "select {alias}.{key}, {alias}.{second}, sum(1) from {table} {alias} \
             group by {alias}.{key}, {alias}.{second}"
        ));
        out.push(format!(
            "select {alias}.{key}, sum(1) from {table} {alias} \
             where {alias}.{textual} != 'zzz' group by {alias}.{key}"
        ));
    }
    out
}

#[test]
fn c9_store_round_trip() {
    criterion(9, || {
        let catalog = dwgen::build_catalog(200, 9);
        let mut store = MvStore::new();
        let mut ids = Vec::new();
        for (i, sql) in round_trip_queries().iter().enumerate() {
            let id = store.create_mv(&catalog, parse(sql).unwrap()).unwrap();
            if i % 3 == 1 {
                store.demote(&id).unwrap();
            }
            if i % 6 == 4 {
                store.mark_stale(&id).unwrap(); // a stale inactive view
            }
            ids.push(id);
        }
        assert!(ids.len() >= 20, "need at least 20 views, built {}", ids.len());
        store.track_new_query(parse("select a.sex, sum(1) from admissions a group by a.sex").unwrap());
        store.track_new_query(parse("select d.diag, sum(1) from diagnosis d group by d.diag").unwrap());
        store.record_hit("mv0001").unwrap();
        store.record_hit("q0001").unwrap();
        store.end_session();
        store.record_hit("mv0003").unwrap(); // a live, unflushed counter
        store.session_started_at = Some("2026-08-17T12:00:00+00:00".to_string());

        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        store.save(first.path()).unwrap();
        let loaded = MvStore::load(first.path()).unwrap();
        loaded.save(second.path()).unwrap();

        // every persisted artifact survives the round trip byte for byte
        let listing = |dir: &std::path::Path| -> Vec<String> {
            let mut names: Vec<String> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .collect();
            names.sort();
            names
        };
        let names = listing(first.path());
        assert_eq!(names, listing(second.path()));
        assert!(names.len() >= 26); // manifest + log + 24 row files
        for name in &names {
            let a = std::fs::read(first.path().join(name)).unwrap();
            let b = std::fs::read(second.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} changed across save/load/save");
        }

        // and the loaded store is observably the same store
        assert_eq!(loaded.log().current_session(), store.log().current_session());
        assert_eq!(loaded.log().entries(), store.log().entries());
        assert_eq!(loaded.log().live_hits("mv0003"), 1);
        assert_eq!(loaded.session_started_at, store.session_started_at);
        assert_eq!(loaded.tracked_count(), 2);
        for id in &ids {
            let a = store.view(id).unwrap();
            let b = loaded.view(id).unwrap();
            assert_eq!(a.state, b.state, "{id}");
            assert_eq!(a.stale, b.stale, "{id}");
            assert_eq!(a.source.canonical_sql(), b.source.canonical_sql(), "{id}");
            assert_eq!(a.rows, b.rows, "{id}");
        }
        let states: (usize, usize) = (store.active_count(), store.inactive_count());
        assert_eq!((loaded.active_count(), loaded.inactive_count()), states);
        format!(
            "{} views ({} active, {} inactive, some stale), 2 tracked queries, log and live \
             counters: save/load/save byte-identical",
            ids.len(),
            states.0,
            states.1
        )
    });
}
