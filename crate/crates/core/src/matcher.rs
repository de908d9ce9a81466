//! Fragment matching: deciding whether a stored view can answer a query, and
//! planning the residual work when it can.
//!
//! A query matches a view only when all four fragment scores are exactly 1:
//!
//! - `sigma` (selections): share of the *view's* conditions contained in the
//!   query's. 1 means every view condition also constrains the query, so the
//!   view's rows are a superset of what the query needs and the leftover
//!   (residual) conditions can be applied on top.
//! - `gamma` (group-by): share of the *query's* attributes contained in the
//!   view's. 1 means the view groups at least as finely as the query, so its
//!   sums can be re-aggregated up to the query's grouping.
//! - `omega` (aggregates): share of the query's aggregates the view carries.
//!   Only SUM is admitted anywhere, because a sum of sums is still the right
//!   sum — the same is false for AVG.
//! - `pi` (projections): share of the query's output columns the view carries.
//!
//! Empty sets follow fixed conventions (query set first): both empty scores 1,
//! an empty query set against a non-empty view set scores 0, and a non-empty
//! query set against an empty view set scores 1. Scores are exact rationals —
//! "equal to 1" is an integer comparison, never a float tolerance. Edit
//! distance between fragment strings appears only as a diagnostic in the
//! verbose trace; matching itself is verbatim string equality.

use crate::error::{Error, Result};
use crate::eval::{apply_selection, group_sum, project, GroupKey, SumSpec};
use crate::expr::ScalarExpr;
use crate::oqt::{CanonicalFragments, Condition};
use crate::parser::ParsedQuery;
use crate::relation::Relation;
use std::collections::BTreeSet;
use std::fmt;

/// An exact non-negative rational. Kept unreduced (the numerator and
/// denominator as counted); equality to one is `num == den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Fraction {
        assert!(den != 0, "zero denominator");
        Fraction { num, den }
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

type Set = BTreeSet<String>;

/// Shared empty-set conventions; `None` means both sets are non-empty and the
/// caller applies its own formula.
fn empty_rule(q: &Set, mv: &Set) -> Option<Fraction> {
    match (q.is_empty(), mv.is_empty()) {
        (true, true) => Some(Fraction::ONE),
        (true, false) => Some(Fraction::ZERO),
        (false, true) => Some(Fraction::ONE),
        (false, false) => None,
    }
}

fn intersection_size(a: &Set, b: &Set) -> u64 {
    a.intersection(b).count() as u64
}

/// Selection score: matched view conditions over all view conditions.
pub fn match_selection(q_conditions: &Set, mv_conditions: &Set) -> Fraction {
    empty_rule(q_conditions, mv_conditions).unwrap_or_else(|| {
        Fraction::new(
            intersection_size(mv_conditions, q_conditions),
            mv_conditions.len() as u64,
        )
    })
}

/// Group-by score: matched query attributes over all query attributes.
pub fn match_group_attrs(q_attrs: &Set, mv_attrs: &Set) -> Fraction {
    empty_rule(q_attrs, mv_attrs)
        .unwrap_or_else(|| Fraction::new(intersection_size(q_attrs, mv_attrs), q_attrs.len() as u64))
}

/// Aggregate score: matched query aggregates over all query aggregates.
pub fn match_aggregates(q_aggs: &Set, mv_aggs: &Set) -> Fraction {
    empty_rule(q_aggs, mv_aggs)
        .unwrap_or_else(|| Fraction::new(intersection_size(q_aggs, mv_aggs), q_aggs.len() as u64))
}

/// Projection score: matched query columns over all query columns.
pub fn match_projection(q_columns: &Set, mv_columns: &Set) -> Fraction {
    empty_rule(q_columns, mv_columns).unwrap_or_else(|| {
        Fraction::new(intersection_size(q_columns, mv_columns), q_columns.len() as u64)
    })
}

/// Outcome of scoring one query against one view. Fragments are scored in
/// order (selections, group-by, aggregates, projections) and scoring stops at
/// the first score below 1 — later fragments stay `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchScore {
    pub tables_match: bool,
    pub sigma: Option<Fraction>,
    pub gamma: Option<Fraction>,
    pub omega: Option<Fraction>,
    pub pi: Option<Fraction>,
    /// Number of fragments that scored exactly 1 (0..=4).
    pub total: u8,
    /// True exactly when the tables agree and all four fragments scored 1.
    pub is_match: bool,
}

/// Score a query against a view. The table sets are re-checked first: a
/// mismatch ends matching before any fragment is scored.
pub fn match_score(q: &CanonicalFragments, mv: &CanonicalFragments) -> MatchScore {
    let mut score = MatchScore {
        tables_match: q.tables == mv.tables,
        sigma: None,
        gamma: None,
        omega: None,
        pi: None,
        total: 0,
        is_match: false,
    };
    if !score.tables_match {
        return score;
    }
    let fragments: [(&Set, &Set, fn(&Set, &Set) -> Fraction); 4] = [
        (&q.selections, &mv.selections, match_selection),
        (&q.group_attrs, &mv.group_attrs, match_group_attrs),
        (&q.aggregates, &mv.aggregates, match_aggregates),
        (&q.projections, &mv.projections, match_projection),
    ];
    let slots = [0, 1, 2, 3];
    for (slot, (qs, ms, f)) in slots.iter().zip(fragments) {
        let value = f(qs, ms);
        match slot {
            0 => score.sigma = Some(value),
            1 => score.gamma = Some(value),
            2 => score.omega = Some(value),
            _ => score.pi = Some(value),
        }
        if !value.is_one() {
            return score; // no need to look further
        }
        score.total += 1;
    }
    score.is_match = score.total == 4;
    score
}

/// How to treat residual conditions that cannot be evaluated against the
/// view's output columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualPolicy {
    /// Refuse the derivation (the engine falls back to the warehouse).
    Reject,
    /// Drop the inapplicable conditions and serve anyway. This reproduces the
    /// original matching procedure verbatim and is unsound: the answer can be
    /// a superset of the correct one. Kept behind a config flag for
    /// comparability experiments.
    DropUnchecked,
}

/// The work left after a full match: filter the view's rows by the residual
/// conditions, re-aggregate to the query's grouping, project the query's
/// columns.
#[derive(Debug, Clone)]
pub struct DerivationPlan {
    pub view_id: String,
    /// Residual conditions as the query wrote them (query minus view).
    pub residual: Vec<Condition>,
    /// The same conditions rewritten onto the view's output columns.
    pub rewritten: Vec<Condition>,
    /// Conditions dropped under [`ResidualPolicy::DropUnchecked`].
    pub dropped: Vec<Condition>,
    /// Query group-by attributes (also view column names), in query order.
    pub regroup_keys: Vec<String>,
    /// (query aggregate, view sum column) pairs, in query order.
    pub regroup_aggs: Vec<(String, String)>,
    /// Query output columns, in query order.
    pub projection: Vec<String>,
}

/// Plan how to answer `q` from a fully matching view. Fails with
/// `Error::NotDerivable` when a residual condition references something the
/// view does not output and the policy is [`ResidualPolicy::Reject`].
pub fn plan_residual(
    q: &ParsedQuery,
    view_id: &str,
    mv: &CanonicalFragments,
    policy: ResidualPolicy,
) -> Result<DerivationPlan> {
    let parts = q
        .tree
        .parts()
        .ok_or_else(|| Error::Store("query tree is not in canonical shape".into()))?;

    let mut residual = Vec::new();
    let mut rewritten = Vec::new();
    let mut dropped = Vec::new();
    for c in parts.conditions {
        if mv.selections.contains(&c.canonical()) {
            continue; // already folded into the view's rows
        }
        residual.push(c.clone());
        match rewrite_condition(c, &mv.projections) {
            Some(r) => rewritten.push(r),
            None if policy == ResidualPolicy::DropUnchecked => dropped.push(c.clone()),
            None => {
                return Err(Error::NotDerivable(format!(
                    "residual condition '{}' is not answerable from the view's output columns",
                    c.canonical()
                )))
            }
        }
    }

    let regroup_keys: Vec<String> = parts.keys.iter().map(|k| k.canonical()).collect();
    let regroup_aggs: Vec<(String, String)> = parts
        .aggs
        .iter()
        .map(|a| {
            let name = a.canonical();
            (name.clone(), name)
        })
        .collect();

    Ok(DerivationPlan {
        view_id: view_id.to_string(),
        residual,
        rewritten,
        dropped,
        regroup_keys,
        regroup_aggs,
        projection: parts.projection.to_vec(),
    })
}

/// Rewrite an expression so it evaluates against the view's output columns:
/// any subexpression whose canonical form is itself a view column becomes a
/// direct column reference; literals pass through; everything else recurses.
fn rewrite_expr(e: &ScalarExpr, mv_columns: &Set) -> Option<ScalarExpr> {
    let canonical = e.canonical();
    if mv_columns.contains(&canonical) {
        return Some(ScalarExpr::Column(canonical));
    }
    match e {
        ScalarExpr::Literal(_) => Some(e.clone()),
        ScalarExpr::Column(_) => None,
        ScalarExpr::Func { name, args } => {
            let args: Option<Vec<ScalarExpr>> =
                args.iter().map(|a| rewrite_expr(a, mv_columns)).collect();
            Some(ScalarExpr::Func { name: name.clone(), args: args? })
        }
    }
}

fn rewrite_condition(c: &Condition, mv_columns: &Set) -> Option<Condition> {
    Some(Condition::new(
        rewrite_expr(&c.lhs, mv_columns)?,
        c.op,
        rewrite_expr(&c.rhs, mv_columns)?,
    ))
}

/// Execute a derivation plan against the view's stored rows.
pub fn execute_plan(plan: &DerivationPlan, view_rows: &Relation) -> Result<Relation> {
    let filtered = apply_selection(view_rows, &plan.rewritten)?;
    let keys: Vec<GroupKey> = plan
        .regroup_keys
        .iter()
        .map(|k| GroupKey { expr: ScalarExpr::column(k.clone()), name: k.clone() })
        .collect();
    let sums: Vec<SumSpec> = plan
        .regroup_aggs
        .iter()
        .map(|(q_agg, mv_col)| SumSpec {
            expr: ScalarExpr::column(mv_col.clone()),
            name: q_agg.clone(),
        })
        .collect();
    let grouped = group_sum(&filtered, &keys, &sums)?;
    project(&grouped, &plan.projection)
}

/// Levenshtein edit distance between two strings (characters).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Render a per-fragment trace of one scoring run: both operand sets, the
/// fraction, and for every unmatched element its nearest counterpart by edit
/// distance. Skipped fragments (after a short-circuit) say so.
pub fn render_match_trace(q: &CanonicalFragments, mv: &CanonicalFragments, score: &MatchScore) -> String {
    fn set(s: &Set) -> String {
        format!("{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(", "))
    }
    // For every element of `of` missing from `within`, name the closest
    // element of `within`.
    fn diagnostics(out: &mut String, label: &str, of: &Set, within: &Set) {
        for missing in of.difference(within) {
            let nearest = within
                .iter()
                .map(|c| (levenshtein(missing, c), c))
                .min();
            match nearest {
                Some((d, c)) => out.push_str(&format!(
                    "  unmatched {label} '{missing}', nearest '{c}' (edit distance {d})\n"
                )),
                None => out.push_str(&format!("  unmatched {label} '{missing}', nothing to compare\n")),
            }
        }
    }

    let mut out = format!(
        "tables q={} mv={} -> {}\n",
        set(&q.tables),
        set(&mv.tables),
        if score.tables_match { "equal" } else { "different" }
    );
    if !score.tables_match {
        diagnostics(&mut out, "query table", &q.tables, &mv.tables);
        out.push_str("match: no (table sets differ)\n");
        return out;
    }

    let rows: [(&str, &Set, &Set, Option<Fraction>, bool); 4] = [
        ("sigma", &q.selections, &mv.selections, score.sigma, true),
        ("gamma", &q.group_attrs, &mv.group_attrs, score.gamma, false),
        ("omega", &q.aggregates, &mv.aggregates, score.omega, false),
        ("pi", &q.projections, &mv.projections, score.pi, false),
    ];
    for (name, qs, ms, value, view_side) in rows {
        match value {
            Some(v) => {
                out.push_str(&format!("{name} q={} mv={} -> {v}\n", set(qs), set(ms)));
                if !v.is_one() {
                    // sigma counts view conditions inside the query's set; the
                    // other fragments count query elements inside the view's.
                    if view_side {
                        diagnostics(&mut out, "view condition", ms, qs);
                    } else {
                        diagnostics(&mut out, "query element", qs, ms);
                    }
                }
            }
            None => out.push_str(&format!("{name} -> skipped\n")),
        }
    }
    out.push_str(&format!(
        "total {} of 4 -> {}\n",
        score.total,
        if score.is_match { "match" } else { "no match" }
    ));
    out
}
