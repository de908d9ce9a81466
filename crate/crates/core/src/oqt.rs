//! The restricted OLAP query tree and its canonical fragment form.
//!
//! A well-formed tree has a fixed vertical shape:
//!
//! ```text
//! Projection -> GroupBy -> [Selection] -> product chain / single Table
//! ```
//!
//! with conditions as one conjunction, SUM as the only aggregate, and every
//! group-by attribute repeated in the projection. [`validate`] checks the
//! shape and returns all violations; [`canonicalize`] reduces a valid tree to
//! five string sets (tables, selections, group-by attributes, aggregates,
//! projections) that the matcher compares verbatim.

use crate::error::Violation;
use crate::expr::ScalarExpr;
use crate::value::Value;
use std::collections::BTreeSet;
use std::fmt;

pub const AGG_SUM: &str = "sum";

/// Comparison operators permitted in conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Like,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Like => "like",
        }
    }
}

/// One conjunct of the WHERE clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Condition {
    pub lhs: ScalarExpr,
    pub op: CmpOp,
    pub rhs: ScalarExpr,
}

impl Condition {
    pub fn new(lhs: ScalarExpr, op: CmpOp, rhs: ScalarExpr) -> Condition {
        Condition { lhs, op, rhs }
    }

    /// Canonical text form. Equality is commutative, so its operands are
    /// normalized: a literal always goes right, and two non-literal sides are
    /// ordered lexicographically. `t1.a = t2.b` and `t2.b = t1.a` therefore
    /// render identically.
    pub fn canonical(&self) -> String {
        let (l, r) = (self.lhs.canonical(), self.rhs.canonical());
        let (l, r) = if self.op == CmpOp::Eq && swap_eq_operands(&self.lhs, &self.rhs, &l, &r) {
            (r, l)
        } else {
            (l, r)
        };
        format!("{l} {} {r}", self.op.symbol())
    }

    pub fn referenced_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        self.lhs.referenced_columns(out);
        self.rhs.referenced_columns(out);
    }
}

fn swap_eq_operands(lhs: &ScalarExpr, rhs: &ScalarExpr, l: &str, r: &str) -> bool {
    match (lhs.is_literal(), rhs.is_literal()) {
        (true, false) => true,   // literal moves right
        (false, true) => false,  // already right
        _ => l > r,              // same class: lexicographic
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// An aggregate call. The dialect only admits SUM, but the parser records
/// whatever was written so validation can name the offender.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggSpec {
    pub func: String,
    pub arg: ScalarExpr,
}

impl AggSpec {
    pub fn sum(arg: ScalarExpr) -> AggSpec {
        AggSpec { func: AGG_SUM.into(), arg }
    }

    pub fn canonical(&self) -> String {
        format!("{}({})", self.func, self.arg.canonical())
    }
}

impl fmt::Display for AggSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Query tree node. The enum fixes child counts; [`validate`] checks the
/// remaining shape rules that the type system cannot express.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OqtNode {
    Projection { columns: Vec<String>, child: Box<OqtNode> },
    GroupBy { keys: Vec<ScalarExpr>, aggs: Vec<AggSpec>, child: Box<OqtNode> },
    Selection { conditions: Vec<Condition>, child: Box<OqtNode> },
    CartesianProduct { left: Box<OqtNode>, right: Box<OqtNode> },
    Table { name: String },
}

/// A complete query: the tree plus the projected output columns in the order
/// the query listed them (the tree's fragment form only keeps sets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OlapQueryTree {
    pub root: OqtNode,
    pub result_columns: Vec<String>,
}

/// The five canonical fragment sets of a query. Two queries with equal
/// fragments are the same query as far as matching and view identity are
/// concerned, regardless of clause order, aliasing, or spelling case.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CanonicalFragments {
    pub tables: BTreeSet<String>,
    pub selections: BTreeSet<String>,
    pub group_attrs: BTreeSet<String>,
    pub aggregates: BTreeSet<String>,
    pub projections: BTreeSet<String>,
}

impl CanonicalFragments {
    /// One fragment set per line, elements sorted — the stable identity text
    /// for a query (and for the view built from it).
    pub fn render(&self) -> String {
        fn join(set: &BTreeSet<String>, sep: &str) -> String {
            set.iter().cloned().collect::<Vec<_>>().join(sep)
        }
        format!(
            "tables: {}\nselections: {}\ngroup-by: {}\naggregates: {}\nprojections: {}\n",
            join(&self.tables, ", "),
            join(&self.selections, " && "),
            join(&self.group_attrs, ", "),
            join(&self.aggregates, ", "),
            join(&self.projections, ", "),
        )
    }
}

impl fmt::Display for CanonicalFragments {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Check a tree against the restricted OLAP shape. Returns every violation
/// found, so a caller can report them all at once; an empty vector means the
/// tree is valid.
pub fn validate(tree: &OlapQueryTree) -> Vec<Violation> {
    let mut v = Vec::new();
    let OqtNode::Projection { columns, child } = &tree.root else {
        v.push(violation("shape", "root", "root must be a projection node"));
        return v;
    };
    if columns.is_empty() {
        v.push(violation("projection", "root", "projection must list at least one column"));
    }
    if columns != &tree.result_columns {
        v.push(violation(
            "projection",
            "root",
            "result columns must equal the projection node's column list",
        ));
    }
    let mut seen = BTreeSet::new();
    for c in columns {
        if !seen.insert(c) {
            v.push(violation("projection", "root", format!("duplicate projection column: {c}")));
        }
    }

    let OqtNode::GroupBy { keys, aggs, child: gb_child } = child.as_ref() else {
        v.push(violation("shape", "root.child", "projection child must be a group-by node"));
        return v;
    };
    let path = "root.groupby";
    if keys.is_empty() {
        v.push(violation("groupby", path, "at least one group-by attribute is required"));
    }
    if aggs.is_empty() {
        v.push(violation("groupby", path, "at least one aggregate is required"));
    }
    for (i, k) in keys.iter().enumerate() {
        if let Err(msg) = k.check_functions() {
            v.push(violation("functions", format!("{path}.keys[{i}]"), msg));
        }
    }
    for (i, a) in aggs.iter().enumerate() {
        if a.func != AGG_SUM {
            v.push(violation(
                "aggregates",
                format!("{path}.aggs[{i}]"),
                format!("non-SUM aggregate: {}", a.canonical()),
            ));
        }
        if let Err(msg) = a.arg.check_functions() {
            v.push(violation("functions", format!("{path}.aggs[{i}]"), msg));
        }
    }

    // Group attributes and aggregates must exactly cover the projection.
    let key_set: BTreeSet<String> = keys.iter().map(|k| k.canonical()).collect();
    let agg_set: BTreeSet<String> = aggs.iter().map(|a| a.canonical()).collect();
    let proj_set: BTreeSet<String> = columns.iter().cloned().collect();
    for k in &key_set {
        if !proj_set.contains(k) {
            v.push(violation(
                "projection",
                path,
                format!("group-by attribute {k} is missing from the projection"),
            ));
        }
    }
    for a in &agg_set {
        if !proj_set.contains(a) {
            v.push(violation(
                "projection",
                path,
                format!("aggregate {a} is missing from the projection"),
            ));
        }
    }
    for p in &proj_set {
        if !key_set.contains(p) && !agg_set.contains(p) {
            v.push(violation(
                "projection",
                "root",
                format!("projected column {p} is neither a group-by attribute nor an aggregate"),
            ));
        }
    }

    // Below the group-by: optional selection, then a product chain of tables.
    let (chain, chain_path) = match gb_child.as_ref() {
        OqtNode::Selection { conditions, child } => {
            let spath = "root.groupby.selection";
            if conditions.is_empty() {
                v.push(violation(
                    "selection",
                    spath,
                    "selection node must carry at least one condition",
                ));
            }
            for (i, c) in conditions.iter().enumerate() {
                for (side, e) in [("lhs", &c.lhs), ("rhs", &c.rhs)] {
                    if let Err(msg) = e.check_functions() {
                        v.push(violation(
                            "functions",
                            format!("{spath}.conditions[{i}].{side}"),
                            msg,
                        ));
                    }
                }
                if c.op == CmpOp::Like && !matches!(c.rhs, ScalarExpr::Literal(Value::Text(_))) {
                    v.push(violation(
                        "selection",
                        format!("{spath}.conditions[{i}]"),
                        "LIKE requires a text literal pattern on the right".to_string(),
                    ));
                }
            }
            match child.as_ref() {
                n @ (OqtNode::CartesianProduct { .. } | OqtNode::Table { .. }) => {
                    (n, format!("{spath}.child"))
                }
                _ => {
                    v.push(violation(
                        "shape",
                        format!("{spath}.child"),
                        "selection child must be a table or a product chain".to_string(),
                    ));
                    return v;
                }
            }
        }
        n @ (OqtNode::CartesianProduct { .. } | OqtNode::Table { .. }) => {
            (n, "root.groupby.child".to_string())
        }
        _ => {
            v.push(violation(
                "shape",
                path,
                "group-by child must be a selection, a product chain, or a table".to_string(),
            ));
            return v;
        }
    };

    let mut tables = Vec::new();
    collect_chain_tables(chain, &chain_path, &mut tables, &mut v);
    let mut seen = BTreeSet::new();
    for (name, tpath) in &tables {
        if name.is_empty() {
            v.push(violation("tables", tpath.clone(), "empty table name".to_string()));
        }
        if !seen.insert(name.clone()) {
            v.push(violation(
                "tables",
                tpath.clone(),
                format!("table {name} appears more than once in the product chain"),
            ));
        }
    }
    v
}

fn collect_chain_tables(
    node: &OqtNode,
    path: &str,
    tables: &mut Vec<(String, String)>,
    v: &mut Vec<Violation>,
) {
    match node {
        OqtNode::Table { name } => tables.push((name.clone(), path.to_string())),
        OqtNode::CartesianProduct { left, right } => {
            collect_chain_tables(left, &format!("{path}.left"), tables, v);
            collect_chain_tables(right, &format!("{path}.right"), tables, v);
        }
        _ => v.push(violation(
            "shape",
            path,
            "product chain may only contain products and tables".to_string(),
        )),
    }
}

fn violation(rule: &'static str, path: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation { rule, path: path.into(), message: message.into() }
}

/// Reduce a valid tree to its canonical fragment sets. Deterministic and
/// idempotent: the tree already carries canonical names, so this is a pure
/// rendering step.
pub fn canonicalize(tree: &OlapQueryTree) -> CanonicalFragments {
    let mut f = CanonicalFragments::default();
    collect(&tree.root, &mut f);
    f
}

fn collect(node: &OqtNode, f: &mut CanonicalFragments) {
    match node {
        OqtNode::Projection { columns, child } => {
            f.projections.extend(columns.iter().cloned());
            collect(child, f);
        }
        OqtNode::GroupBy { keys, aggs, child } => {
            f.group_attrs.extend(keys.iter().map(|k| k.canonical()));
            f.aggregates.extend(aggs.iter().map(|a| a.canonical()));
            collect(child, f);
        }
        OqtNode::Selection { conditions, child } => {
            f.selections.extend(conditions.iter().map(|c| c.canonical()));
            collect(child, f);
        }
        OqtNode::CartesianProduct { left, right } => {
            collect(left, f);
            collect(right, f);
        }
        OqtNode::Table { name } => {
            f.tables.insert(name.clone());
        }
    }
}

/// Structural accessors for a validated tree. The evaluator and matcher use
/// these instead of re-walking the enum.
pub struct TreeParts<'a> {
    pub projection: &'a [String],
    pub keys: &'a [ScalarExpr],
    pub aggs: &'a [AggSpec],
    pub conditions: &'a [Condition],
    /// Tables in the order the query listed them (product chain order).
    pub tables: Vec<&'a str>,
}

impl OlapQueryTree {
    /// Destructure a tree known to be valid. Returns `None` when the tree is
    /// not in canonical shape (callers validate first).
    pub fn parts(&self) -> Option<TreeParts<'_>> {
        let OqtNode::Projection { columns, child } = &self.root else {
            return None;
        };
        let OqtNode::GroupBy { keys, aggs, child } = child.as_ref() else {
            return None;
        };
        let (conditions, chain): (&[Condition], &OqtNode) = match child.as_ref() {
            OqtNode::Selection { conditions, child } => (conditions, child),
            other => (&[], other),
        };
        let mut tables = Vec::new();
        fn walk<'a>(node: &'a OqtNode, out: &mut Vec<&'a str>) -> bool {
            match node {
                OqtNode::Table { name } => {
                    out.push(name);
                    true
                }
                OqtNode::CartesianProduct { left, right } => {
                    walk(left, out) && walk(right, out)
                }
                _ => false,
            }
        }
        if !walk(chain, &mut tables) {
            return None;
        }
        Some(TreeParts { projection: columns, keys, aggs, conditions, tables })
    }
}

/// Build a left-deep product chain over tables in the given order.
pub fn product_chain(tables: &[String]) -> OqtNode {
    let mut iter = tables.iter();
    let first = iter.next().expect("at least one table");
    let mut node = OqtNode::Table { name: first.clone() };
    for t in iter {
        node = OqtNode::CartesianProduct {
            left: Box::new(node),
            right: Box::new(OqtNode::Table { name: t.clone() }),
        };
    }
    node
}

/// Assemble a full tree from its parts (used by the parser and by tests).
pub fn assemble(
    tables: &[String],
    conditions: Vec<Condition>,
    keys: Vec<ScalarExpr>,
    aggs: Vec<AggSpec>,
    result_columns: Vec<String>,
) -> OlapQueryTree {
    let chain = product_chain(tables);
    let lower = if conditions.is_empty() {
        chain
    } else {
        OqtNode::Selection { conditions, child: Box::new(chain) }
    };
    let root = OqtNode::Projection {
        columns: result_columns.clone(),
        child: Box::new(OqtNode::GroupBy { keys, aggs, child: Box::new(lower) }),
    };
    OlapQueryTree { root, result_columns }
}
