//! Shared fixtures for the benchmarks: a wide collection of single-table
//! views that stresses candidate lookup, and a hospital warehouse with one
//! view per canned query style.

use mvmatch_core::dwgen;
use mvmatch_core::parser::{parse, ParsedQuery};
use mvmatch_core::workload;
use mvmatch_core::{Catalog, Column, ColumnType, Engine, EngineConfig, Relation, Value};

/// `views` single-table views over as many tiny tables, plus one probe query
/// per view. Row counts are negligible; lookup cost is collection width.
pub fn wide_collection(views: usize) -> (Engine, Vec<ParsedQuery>) {
    let mut catalog = Catalog::new();
    for i in 0..views {
        let mut rel = Relation::new(vec![
            Column::new("k", ColumnType::Text),
            Column::new("v", ColumnType::Int),
        ])
        .unwrap();
        rel.push_row(vec![Value::Text("a".into()), Value::Int(1)]).unwrap();
        rel.push_row(vec![Value::Text("b".into()), Value::Int(2)]).unwrap();
        catalog.insert(&format!("t{i:03}"), rel).unwrap();
    }
    let mut engine = Engine::new(catalog, EngineConfig::default());
    let mut probes = Vec::with_capacity(views);
    for i in 0..views {
        let sql = format!("select t.k, sum(t.v) from t{i:03} t group by t.k");
        engine.create_view(&sql).unwrap();
        probes.push(parse(&sql).unwrap());
    }
    (engine, probes)
}

/// Hospital warehouse of `rows` admissions with one view per canned query
/// style, so every style can be answered down either path.
pub fn warehouse_engine(rows: usize) -> Engine {
    let catalog = dwgen::build_catalog(rows, 42);
    let mut engine = Engine::new(catalog, EngineConfig::default());
    for sql in workload::all() {
        engine.create_view(sql).unwrap();
    }
    engine
}
