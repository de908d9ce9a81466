//! Query evaluation over the catalog.
//!
//! Two evaluators share one observable semantics:
//!
//! - [`eval_oqt_naive`] executes the tree literally, bottom-up: qualify each
//!   table, take the cartesian product, filter, group, project. It is the
//!   reference implementation — small, obviously faithful, and usable as an
//!   oracle — but materializes the full product.
//! - [`eval_oqt`] plans equality conditions into pipelined hash joins and
//!   pushes single-table conditions down to the scans, aggregating on the fly
//!   without materializing any intermediate. Property tests assert it always
//!   returns exactly what the naive evaluator returns.
//!
//! Both produce rows sorted by the group-key tuple, so equal queries give
//! bit-identical relations.

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::expr::{eval_expr, eval_function, resolve_column, ScalarExpr};
use crate::oqt::{AggSpec, CmpOp, Condition, OlapQueryTree};
use crate::relation::{Column, Relation};
use crate::value::{like_match, sql_compare, ColumnType, Decimal, Value};
use std::collections::HashMap;

/// Decide one comparison between two already-evaluated values. A NULL on
/// either side never satisfies the condition; mixed non-null types error.
pub fn compare_values(lhs: &Value, op: CmpOp, rhs: &Value) -> Result<bool> {
    if op == CmpOp::Like {
        return match (lhs, rhs) {
            (Value::Null, _) | (_, Value::Null) => Ok(false),
            (Value::Text(s), Value::Text(p)) => Ok(like_match(s, p)),
            _ => Err(Error::TypeMismatch { lhs: lhs.type_name(), rhs: rhs.type_name() }),
        };
    }
    let Some(ord) = sql_compare(lhs, rhs)? else {
        return Ok(false);
    };
    Ok(match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
        CmpOp::Like => unreachable!(),
    })
}

/// Evaluate one condition against a row of `rel`.
pub fn eval_condition(rel: &Relation, row: &[Value], cond: &Condition) -> Result<bool> {
    let l = eval_expr(rel, row, &cond.lhs)?;
    let r = eval_expr(rel, row, &cond.rhs)?;
    compare_values(&l, cond.op, &r)
}

/// Keep the rows satisfying every condition (conjunction). No conditions
/// means every row is kept.
pub fn apply_selection(rel: &Relation, conditions: &[Condition]) -> Result<Relation> {
    let mut out = Relation::new(rel.columns().to_vec())?;
    'rows: for row in rel.rows() {
        for c in conditions {
            if !eval_condition(rel, row, c)? {
                continue 'rows;
            }
        }
        out.push_row_unchecked(row.clone());
    }
    Ok(out)
}

/// A grouping key: the expression to evaluate and the output column name.
#[derive(Debug, Clone)]
pub struct GroupKey {
    pub expr: ScalarExpr,
    pub name: String,
}

impl GroupKey {
    /// Name the output column by the expression's canonical form.
    pub fn from_expr(expr: ScalarExpr) -> GroupKey {
        let name = expr.canonical();
        GroupKey { expr, name }
    }
}

/// A SUM column: the summand expression and the output column name.
#[derive(Debug, Clone)]
pub struct SumSpec {
    pub expr: ScalarExpr,
    pub name: String,
}

impl SumSpec {
    /// Build from a validated aggregate spec (`sum(expr)` canonical name).
    pub fn from_agg(agg: &AggSpec) -> SumSpec {
        SumSpec { expr: agg.arg.clone(), name: agg.canonical() }
    }
}

/// Exact running sum. NULL summands are ignored; a group whose summands are
/// all NULL yields NULL (SQL SUM semantics). Integer and decimal sums never
/// mix: the summand type is fixed by the expression's type.
#[derive(Debug, Clone)]
enum SumAcc {
    Int(Option<i64>),
    Dec(Option<Decimal>),
}

impl SumAcc {
    fn for_type(ty: ColumnType, context: &str) -> Result<SumAcc> {
        match ty {
            ColumnType::Int => Ok(SumAcc::Int(None)),
            ColumnType::Decimal => Ok(SumAcc::Dec(None)),
            _ => Err(Error::NonNumericSum(context.to_string())),
        }
    }

    fn add(&mut self, v: &Value, context: &str) -> Result<()> {
        match (self, v) {
            (_, Value::Null) => Ok(()),
            (SumAcc::Int(acc), Value::Int(n)) => {
                let base = acc.unwrap_or(0);
                *acc = Some(
                    base.checked_add(*n)
                        .ok_or_else(|| Error::Overflow(context.to_string()))?,
                );
                Ok(())
            }
            (SumAcc::Dec(acc), Value::Decimal(d)) => {
                let base = acc.unwrap_or(Decimal::new(0, 0));
                *acc = Some(
                    base.checked_add(*d)
                        .ok_or_else(|| Error::Overflow(context.to_string()))?,
                );
                Ok(())
            }
            (_, other) => Err(Error::TypeMismatch {
                lhs: if matches!(other, Value::Decimal(_)) { "int" } else { "decimal" },
                rhs: other.type_name(),
            }),
        }
    }

    fn finish(self) -> Value {
        match self {
            SumAcc::Int(Some(n)) => Value::Int(n),
            SumAcc::Dec(Some(d)) => Value::Decimal(d),
            _ => Value::Null,
        }
    }
}

/// Infer the output type of an expression over a relation's schema.
fn infer_type(rel: &Relation, expr: &ScalarExpr) -> Result<ColumnType> {
    match expr {
        ScalarExpr::Column(name) => Ok(rel.columns()[resolve_column(rel, name)?].ty),
        ScalarExpr::Literal(v) => Ok(literal_type(v)),
        ScalarExpr::Func { .. } => Ok(ColumnType::Text), // to_char and substr yield text
    }
}

fn literal_type(v: &Value) -> ColumnType {
    match v {
        Value::Int(_) => ColumnType::Int,
        Value::Decimal(_) => ColumnType::Decimal,
        Value::Date(_) => ColumnType::Date,
        _ => ColumnType::Text,
    }
}

/// Group rows by the key expressions and compute one exact SUM per `SumSpec`.
/// Output columns are the keys then the sums, one row per distinct key tuple
/// (NULL keys group together), sorted by the key tuple.
pub fn group_sum(rel: &Relation, keys: &[GroupKey], sums: &[SumSpec]) -> Result<Relation> {
    let mut columns = Vec::with_capacity(keys.len() + sums.len());
    for k in keys {
        columns.push(Column::new(k.name.clone(), infer_type(rel, &k.expr)?));
    }
    let mut acc_template = Vec::with_capacity(sums.len());
    for s in sums {
        let ty = infer_type(rel, &s.expr)?;
        acc_template.push(SumAcc::for_type(ty, &s.name)?);
        columns.push(Column::new(s.name.clone(), ty));
    }

    let mut groups: HashMap<Vec<Value>, Vec<SumAcc>> = HashMap::new();
    for row in rel.rows() {
        let mut key = Vec::with_capacity(keys.len());
        for k in keys {
            key.push(eval_expr(rel, row, &k.expr)?);
        }
        let accs = groups.entry(key).or_insert_with(|| acc_template.clone());
        for (acc, s) in accs.iter_mut().zip(sums) {
            let v = eval_expr(rel, row, &s.expr)?;
            acc.add(&v, &s.name)?;
        }
    }

    let mut out = Relation::new(columns)?;
    for (key, accs) in groups {
        let mut row = key;
        row.extend(accs.into_iter().map(SumAcc::finish));
        out.push_row_unchecked(row);
    }
    out.sort_rows();
    Ok(out)
}

/// Keep exactly the named columns, in the given order.
pub fn project(rel: &Relation, columns: &[String]) -> Result<Relation> {
    let mut indices = Vec::with_capacity(columns.len());
    let mut cols = Vec::with_capacity(columns.len());
    for name in columns {
        let i = rel
            .column_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        indices.push(i);
        cols.push(rel.columns()[i].clone());
    }
    let mut out = Relation::new(cols)?;
    for row in rel.rows() {
        out.push_row_unchecked(indices.iter().map(|&i| row[i].clone()).collect());
    }
    Ok(out)
}

/// Full cartesian product; |a| * |b| rows. Only the naive evaluator and tests
/// call this — the planner never materializes a product.
pub fn cartesian(a: &Relation, b: &Relation) -> Result<Relation> {
    let mut cols = a.columns().to_vec();
    cols.extend(b.columns().to_vec());
    let mut out = Relation::new(cols)?;
    for ra in a.rows() {
        for rb in b.rows() {
            let mut row = ra.clone();
            row.extend(rb.iter().cloned());
            out.push_row_unchecked(row);
        }
    }
    Ok(out)
}

/// Rename every column to `table.column`, giving each base table a distinct
/// namespace inside a joined row.
pub fn qualify(table: &str, rel: &Relation) -> Relation {
    let cols = rel
        .columns()
        .iter()
        .map(|c| Column::new(format!("{table}.{}", c.name), c.ty))
        .collect();
    let mut out = Relation::new(cols).expect("qualified names stay unique");
    for row in rel.rows() {
        out.push_row_unchecked(row.clone());
    }
    out
}

/// Reference evaluator: executes the tree exactly as written.
pub fn eval_oqt_naive(catalog: &Catalog, tree: &OlapQueryTree) -> Result<Relation> {
    let parts = tree
        .parts()
        .ok_or_else(|| Error::Store("query tree is not in canonical shape".into()))?;
    let mut rel: Option<Relation> = None;
    for t in &parts.tables {
        let q = qualify(t, catalog.get(t)?);
        rel = Some(match rel {
            None => q,
            Some(acc) => cartesian(&acc, &q)?,
        });
    }
    let rel = rel.ok_or_else(|| Error::Store("query references no tables".into()))?;
    let filtered = apply_selection(&rel, parts.conditions)?;
    let keys: Vec<GroupKey> = parts.keys.iter().cloned().map(GroupKey::from_expr).collect();
    let sums: Vec<SumSpec> = parts.aggs.iter().map(SumSpec::from_agg).collect();
    let grouped = group_sum(&filtered, &keys, &sums)?;
    project(&grouped, parts.projection)
}

// ---------------------------------------------------------------------------
// Planned evaluator
// ---------------------------------------------------------------------------

/// Expression compiled against the query's table list: column references are
/// resolved to (table slot, column index) pairs once, before execution.
#[derive(Debug, Clone)]
enum BoundExpr {
    Col { slot: usize, idx: usize },
    Literal(Value),
    Func { name: String, args: Vec<BoundExpr> },
}

impl BoundExpr {
    fn eval(&self, ctx: &[&[Value]]) -> Result<Value> {
        match self {
            BoundExpr::Col { slot, idx } => Ok(ctx[*slot][*idx].clone()),
            BoundExpr::Literal(v) => Ok(v.clone()),
            BoundExpr::Func { name, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(a.eval(ctx)?);
                }
                eval_function(name, &vals)
            }
        }
    }

    /// Highest table slot referenced, if any. During execution all slots up
    /// to the current depth are bound, so the maximum decides placement.
    fn max_slot(&self) -> Option<usize> {
        match self {
            BoundExpr::Col { slot, .. } => Some(*slot),
            BoundExpr::Literal(_) => None,
            BoundExpr::Func { args, .. } => args.iter().filter_map(|a| a.max_slot()).max(),
        }
    }
}

struct BoundCond {
    lhs: BoundExpr,
    op: CmpOp,
    rhs: BoundExpr,
}

impl BoundCond {
    fn eval(&self, ctx: &[&[Value]]) -> Result<bool> {
        let l = self.lhs.eval(ctx)?;
        let r = self.rhs.eval(ctx)?;
        compare_values(&l, self.op, &r)
    }
}

struct Binder<'a> {
    tables: Vec<(&'a str, &'a Relation)>,
}

impl<'a> Binder<'a> {
    fn bind(&self, expr: &ScalarExpr) -> Result<BoundExpr> {
        match expr {
            ScalarExpr::Literal(v) => Ok(BoundExpr::Literal(v.clone())),
            ScalarExpr::Func { name, args } => Ok(BoundExpr::Func {
                name: name.clone(),
                args: args.iter().map(|a| self.bind(a)).collect::<Result<_>>()?,
            }),
            ScalarExpr::Column(name) => self.bind_column(name),
        }
    }

    fn bind_column(&self, name: &str) -> Result<BoundExpr> {
        if let Some((qualifier, column)) = name.split_once('.') {
            let slot = self
                .tables
                .iter()
                .position(|(t, _)| *t == qualifier)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            let idx = self.tables[slot]
                .1
                .column_index(column)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            return Ok(BoundExpr::Col { slot, idx });
        }
        // Bare name: must resolve to exactly one column across all tables.
        let mut found = None;
        for (slot, (_, rel)) in self.tables.iter().enumerate() {
            if let Some(idx) = rel.column_index(name) {
                if found.is_some() {
                    return Err(Error::AmbiguousColumn(name.to_string()));
                }
                found = Some(BoundExpr::Col { slot, idx });
            }
        }
        found.ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    fn column_type(&self, e: &BoundExpr) -> ColumnType {
        match e {
            BoundExpr::Col { slot, idx } => self.tables[*slot].1.columns()[*idx].ty,
            BoundExpr::Literal(v) => literal_type(v),
            BoundExpr::Func { .. } => ColumnType::Text,
        }
    }
}

/// One hash-join step: build a table keyed by `build` expressions (over the
/// new table only), probe with `probe` expressions (over already-bound
/// tables). No keys means a cartesian step.
struct JoinStep {
    probe: Vec<BoundExpr>,
    build: Vec<BoundExpr>,
}

/// Planned evaluator. Returns exactly what [`eval_oqt_naive`] returns, with
/// joins executed as pipelined hash lookups and aggregation done on the fly.
pub fn eval_oqt(catalog: &Catalog, tree: &OlapQueryTree) -> Result<Relation> {
    let parts = tree
        .parts()
        .ok_or_else(|| Error::Store("query tree is not in canonical shape".into()))?;

    let mut tables = Vec::with_capacity(parts.tables.len());
    for t in &parts.tables {
        tables.push((*t, catalog.get(t)?));
    }
    let binder = Binder { tables };
    let n = binder.tables.len();

    // Classify conditions: constant, single-table filter, equi-join key, or
    // multi-table late filter. Placement depth is the highest slot touched.
    let mut always_false = false;
    let mut table_filters: Vec<Vec<BoundCond>> = (0..n).map(|_| Vec::new()).collect();
    let mut late_filters: Vec<Vec<BoundCond>> = (0..n).map(|_| Vec::new()).collect();
    let mut joins: Vec<JoinStep> = (0..n)
        .map(|_| JoinStep { probe: Vec::new(), build: Vec::new() })
        .collect();

    for c in parts.conditions {
        let lhs = binder.bind(&c.lhs)?;
        let rhs = binder.bind(&c.rhs)?;
        let (ls, rs) = (lhs.max_slot(), rhs.max_slot());
        match (ls, rs) {
            (None, None) => {
                // Constant condition: decide it once.
                let cond = BoundCond { lhs, op: c.op, rhs };
                if !cond.eval(&vec![[].as_slice(); n])? {
                    always_false = true;
                }
            }
            (Some(s), None) | (None, Some(s)) => {
                table_filters[s].push(BoundCond { lhs, op: c.op, rhs });
            }
            (Some(a), Some(b)) if a == b => {
                table_filters[a].push(BoundCond { lhs, op: c.op, rhs });
            }
            (Some(a), Some(b)) => {
                let depth = a.max(b);
                if c.op == CmpOp::Eq {
                    let (probe, build) = if a < b { (lhs, rhs) } else { (rhs, lhs) };
                    joins[depth].probe.push(probe);
                    joins[depth].build.push(build);
                } else {
                    late_filters[depth].push(BoundCond { lhs, op: c.op, rhs });
                }
            }
        }
    }

    let keys: Vec<BoundExpr> = parts
        .keys
        .iter()
        .map(|k| binder.bind(k))
        .collect::<Result<_>>()?;
    let sums: Vec<(BoundExpr, String)> = parts
        .aggs
        .iter()
        .map(|a| Ok((binder.bind(&a.arg)?, a.canonical())))
        .collect::<Result<_>>()?;

    // Output schema mirrors group_sum: keys then sums, canonical names.
    let mut columns = Vec::with_capacity(keys.len() + sums.len());
    for (k, b) in parts.keys.iter().zip(&keys) {
        columns.push(Column::new(k.canonical(), binder.column_type(b)));
    }
    let mut acc_template = Vec::with_capacity(sums.len());
    for (b, name) in &sums {
        let ty = binder.column_type(b);
        acc_template.push(SumAcc::for_type(ty, name)?);
        columns.push(Column::new(name.clone(), ty));
    }
    let mut grouped = Relation::new(columns)?;

    if !always_false {
        // Scan each table once, applying its own filters.
        let mut scans: Vec<Vec<&Vec<Value>>> = Vec::with_capacity(n);
        for (slot, (_, rel)) in binder.tables.iter().enumerate() {
            let mut kept = Vec::new();
            let mut ctx: Vec<&[Value]> = vec![&[]; n];
            'rows: for row in rel.rows() {
                ctx[slot] = row;
                for f in &table_filters[slot] {
                    if !f.eval(&ctx)? {
                        continue 'rows;
                    }
                }
                kept.push(row);
            }
            scans.push(kept);
        }

        // Build one hash table per joined table (depth >= 1 with keys).
        // Rows with a NULL key never equi-join, so they are left out.
        let mut builds: Vec<HashMap<Vec<Value>, Vec<&Vec<Value>>>> = Vec::with_capacity(n);
        builds.push(HashMap::new()); // slot 0 is scanned, never probed
        for depth in 1..n {
            let mut map: HashMap<Vec<Value>, Vec<&Vec<Value>>> = HashMap::new();
            if !joins[depth].build.is_empty() {
                let mut ctx: Vec<&[Value]> = vec![&[]; n];
                'rows: for &row in &scans[depth] {
                    ctx[depth] = row;
                    let mut key = Vec::with_capacity(joins[depth].build.len());
                    for b in &joins[depth].build {
                        let v = b.eval(&ctx)?;
                        if v.is_null() {
                            continue 'rows;
                        }
                        key.push(v);
                    }
                    map.entry(key).or_default().push(row);
                }
            }
            builds.push(map);
        }

        let mut groups: HashMap<Vec<Value>, Vec<SumAcc>> = HashMap::new();
        let mut ctx: Vec<&[Value]> = vec![&[]; n];
        probe_depth(
            0,
            n,
            &scans,
            &builds,
            &joins,
            &late_filters,
            &keys,
            &sums,
            &acc_template,
            &mut ctx,
            &mut groups,
        )?;

        for (key, accs) in groups {
            let mut row = key;
            row.extend(accs.into_iter().map(SumAcc::finish));
            grouped.push_row_unchecked(row);
        }
        grouped.sort_rows();
    }

    project(&grouped, parts.projection)
}

/// Walk the join pipeline: at each depth pick candidate rows (hash bucket or
/// full scan), apply this depth's late filters, recurse; at the leaf fold the
/// row into the group accumulators.
#[allow(clippy::too_many_arguments)]
fn probe_depth<'a>(
    depth: usize,
    n: usize,
    scans: &[Vec<&'a Vec<Value>>],
    builds: &[HashMap<Vec<Value>, Vec<&'a Vec<Value>>>],
    joins: &[JoinStep],
    late_filters: &[Vec<BoundCond>],
    keys: &[BoundExpr],
    sums: &[(BoundExpr, String)],
    acc_template: &[SumAcc],
    ctx: &mut Vec<&'a [Value]>,
    groups: &mut HashMap<Vec<Value>, Vec<SumAcc>>,
) -> Result<()> {
    if depth == n {
        let mut key = Vec::with_capacity(keys.len());
        for k in keys {
            key.push(k.eval(ctx)?);
        }
        let accs = groups.entry(key).or_insert_with(|| acc_template.to_vec());
        for (acc, (expr, name)) in accs.iter_mut().zip(sums) {
            let v = expr.eval(ctx)?;
            acc.add(&v, name)?;
        }
        return Ok(());
    }

    let bucket: &[&Vec<Value>] = if depth > 0 && !joins[depth].probe.is_empty() {
        let mut key = Vec::with_capacity(joins[depth].probe.len());
        for p in &joins[depth].probe {
            let v = p.eval(ctx)?;
            if v.is_null() {
                return Ok(()); // NULL never joins
            }
            key.push(v);
        }
        match builds[depth].get(&key) {
            Some(rows) => rows,
            None => return Ok(()),
        }
    } else {
        &scans[depth]
    };

    'rows: for &row in bucket {
        ctx[depth] = row;
        for f in &late_filters[depth] {
            if !f.eval(ctx)? {
                continue 'rows;
            }
        }
        probe_depth(
            depth + 1,
            n,
            scans,
            builds,
            joins,
            late_filters,
            keys,
            sums,
            acc_template,
            ctx,
            groups,
        )?;
    }
    Ok(())
}
