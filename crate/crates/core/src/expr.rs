//! Scalar expressions over relation rows: column references, literals and the
//! two permitted row functions (`to_char` on dates, `substr` on text).
//!
//! Every expression has a single canonical text form (lower-cased identifiers,
//! one space after commas, literals rendered in normalized form). Set-level
//! query matching compares these canonical strings verbatim, so the rendering
//! here is part of the matching semantics, not just pretty-printing.

use crate::error::{Error, Result};
use crate::relation::Relation;
use crate::value::Value;

pub const FUNC_TO_CHAR: &str = "to_char";
pub const FUNC_SUBSTR: &str = "substr";

/// Date formats accepted by `to_char`. Lower-case only; `yyyymm` is what the
/// time dimension uses as its key.
pub const TO_CHAR_FORMATS: [&str; 3] = ["yyyy", "mm", "yyyymm"];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScalarExpr {
    /// Canonical column name: `table.column`, or a bare name when the source
    /// query could not qualify it.
    Column(String),
    Literal(Value),
    Func { name: String, args: Vec<ScalarExpr> },
}

impl ScalarExpr {
    pub fn column(name: impl Into<String>) -> ScalarExpr {
        ScalarExpr::Column(name.into())
    }

    pub fn int(n: i64) -> ScalarExpr {
        ScalarExpr::Literal(Value::Int(n))
    }

    pub fn text(s: impl Into<String>) -> ScalarExpr {
        ScalarExpr::Literal(Value::Text(s.into()))
    }

    pub fn to_char(arg: ScalarExpr, format: &str) -> ScalarExpr {
        ScalarExpr::Func {
            name: FUNC_TO_CHAR.into(),
            args: vec![arg, ScalarExpr::text(format)],
        }
    }

    pub fn substr(arg: ScalarExpr, start: i64, len: i64) -> ScalarExpr {
        ScalarExpr::Func {
            name: FUNC_SUBSTR.into(),
            args: vec![arg, ScalarExpr::int(start), ScalarExpr::int(len)],
        }
    }

    pub const fn is_literal(&self) -> bool {
        matches!(self, ScalarExpr::Literal(_))
    }

    /// Canonical text form. Stable across runs; used as a set element by the
    /// matcher and as a column name in evaluator output.
    pub fn canonical(&self) -> String {
        match self {
            ScalarExpr::Column(name) => name.clone(),
            ScalarExpr::Literal(v) => render_literal(v),
            ScalarExpr::Func { name, args } => {
                let rendered: Vec<String> = args.iter().map(|a| a.canonical()).collect();
                format!("{name}({})", rendered.join(", "))
            }
        }
    }

    /// Every column name referenced by this expression (the restricted
    /// dialect allows at most one per expression, but we do not rely on it).
    pub fn referenced_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ScalarExpr::Column(name) => out.push(name),
            ScalarExpr::Literal(_) => {}
            ScalarExpr::Func { args, .. } => {
                for a in args {
                    a.referenced_columns(out);
                }
            }
        }
    }

    /// Check the function-call restrictions: only `to_char`/`substr`, with the
    /// documented argument shapes. Returns a human-readable complaint.
    pub fn check_functions(&self) -> std::result::Result<(), String> {
        let ScalarExpr::Func { name, args } = self else {
            return Ok(());
        };
        for a in args {
            a.check_functions()?;
        }
        match name.as_str() {
            FUNC_TO_CHAR => {
                if args.len() != 2 {
                    return Err(format!("to_char takes 2 arguments, got {}", args.len()));
                }
                match &args[1] {
                    ScalarExpr::Literal(Value::Text(fmt))
                        if TO_CHAR_FORMATS.contains(&fmt.as_str()) => {}
                    other => {
                        return Err(format!(
                            "to_char format must be one of 'yyyy', 'mm', 'yyyymm', got {}",
                            other.canonical()
                        ))
                    }
                }
            }
            FUNC_SUBSTR => {
                if args.len() != 3 {
                    return Err(format!("substr takes 3 arguments, got {}", args.len()));
                }
                for (pos, what) in [(1, "start"), (2, "length")] {
                    match &args[pos] {
                        ScalarExpr::Literal(Value::Int(n)) if *n >= 1 => {}
                        other => {
                            return Err(format!(
                                "substr {what} must be a positive integer literal, got {}",
                                other.canonical()
                            ))
                        }
                    }
                }
            }
            other => return Err(format!("unknown function: {other}")),
        }
        Ok(())
    }
}

impl std::fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Literal rendering used both in canonical expressions and rendered SQL.
/// Text keeps its exact bytes (with `''` escaping); numbers are normalized.
pub fn render_literal(v: &Value) -> String {
    match v {
        Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        other => other.to_cell(),
    }
}

/// Resolve a canonical column name within a relation. Exact match first, then
/// a unique `<qualifier>.<name>` suffix match so that bare names written in a
/// multi-table query still find their column in the joined row.
pub fn resolve_column(rel: &Relation, name: &str) -> Result<usize> {
    if let Some(i) = rel.column_index(name) {
        return Ok(i);
    }
    let mut found: Option<usize> = None;
    for (i, c) in rel.columns().iter().enumerate() {
        let is_suffix = c
            .name
            .strip_suffix(name)
            .is_some_and(|prefix| prefix.ends_with('.'));
        if is_suffix {
            if found.is_some() {
                return Err(Error::AmbiguousColumn(name.to_string()));
            }
            found = Some(i);
        }
    }
    found.ok_or_else(|| Error::UnknownColumn(name.to_string()))
}

/// Evaluate an expression against one row of `rel`.
pub fn eval_expr(rel: &Relation, row: &[Value], expr: &ScalarExpr) -> Result<Value> {
    match expr {
        ScalarExpr::Column(name) => {
            let i = resolve_column(rel, name)?;
            Ok(row[i].clone())
        }
        ScalarExpr::Literal(v) => Ok(v.clone()),
        ScalarExpr::Func { name, args } => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_expr(rel, row, a)?);
            }
            eval_function(name, &vals)
        }
    }
}

/// Apply one of the permitted row functions to already-evaluated arguments.
/// NULL input propagates to NULL output.
pub fn eval_function(name: &str, args: &[Value]) -> Result<Value> {
    match name {
        FUNC_TO_CHAR => {
            let [arg, fmt] = args else {
                return Err(Error::BadFunction(format!(
                    "to_char takes 2 arguments, got {}",
                    args.len()
                )));
            };
            let Value::Text(fmt) = fmt else {
                return Err(Error::BadFunction("to_char format must be text".into()));
            };
            let date = match arg {
                Value::Null => return Ok(Value::Null),
                Value::Date(d) => d,
                other => {
                    return Err(Error::BadFunction(format!(
                        "to_char expects a date argument, got {}",
                        other.type_name()
                    )))
                }
            };
            let spec = match fmt.as_str() {
                "yyyy" => "%Y",
                "mm" => "%m",
                "yyyymm" => "%Y%m",
                other => {
                    return Err(Error::BadFunction(format!("unsupported to_char format: '{other}'")))
                }
            };
            Ok(Value::Text(date.format(spec).to_string()))
        }
        FUNC_SUBSTR => {
            let [arg, start, len] = args else {
                return Err(Error::BadFunction(format!(
                    "substr takes 3 arguments, got {}",
                    args.len()
                )));
            };
            let (Value::Int(start), Value::Int(len)) = (start, len) else {
                return Err(Error::BadFunction("substr start/length must be integers".into()));
            };
            if *start < 1 || *len < 1 {
                return Err(Error::BadFunction(
                    "substr start and length must be positive".into(),
                ));
            }
            let text = match arg {
                Value::Null => return Ok(Value::Null),
                Value::Text(s) => s,
                other => {
                    return Err(Error::BadFunction(format!(
                        "substr expects a text argument, got {}",
                        other.type_name()
                    )))
                }
            };
            // 1-based start; out-of-range clamps to the available characters.
            let out: String = text
                .chars()
                .skip(*start as usize - 1)
                .take(*len as usize)
                .collect();
            Ok(Value::Text(out))
        }
        other => Err(Error::BadFunction(format!("unknown function: {other}"))),
    }
}
