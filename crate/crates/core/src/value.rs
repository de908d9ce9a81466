//! Cell values and their comparison semantics.
//!
//! All arithmetic is exact: integers are `i64`, decimals are fixed-point over
//! an `i128` mantissa. Floats are deliberately absent so that repeated
//! aggregation (a sum of sums) is bit-identical to a direct aggregation.
//!
//! Two orderings coexist and must not be confused:
//! - [`Value::cmp`] (the derived total order) is structural. It treats NULL as
//!   equal to NULL and sorts it before everything else. Grouping, sorting and
//!   result comparison use this.
//! - [`sql_compare`] implements predicate semantics: any comparison against
//!   NULL is undefined (the condition is not satisfied), and comparing values
//!   of different types is an error rather than a coercion.

use crate::error::{Error, Result};
use chrono::NaiveDate;
use std::cmp::Ordering;
use std::fmt;

/// Column type as declared in a schema manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    Text,
    Decimal,
    Date,
}

impl ColumnType {
    pub fn parse(s: &str) -> Result<ColumnType> {
        match s {
            "int" => Ok(ColumnType::Int),
            "text" => Ok(ColumnType::Text),
            "decimal" => Ok(ColumnType::Decimal),
            "date" => Ok(ColumnType::Date),
            other => Err(Error::Manifest(format!("unknown column type: {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Int => "int",
            ColumnType::Text => "text",
            ColumnType::Decimal => "decimal",
            ColumnType::Date => "date",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact fixed-point decimal: `mantissa / 10^scale`.
///
/// Always kept normalized (no trailing fractional zeros), so structural
/// equality and hashing coincide with numeric equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: i128,
    scale: u32,
}

/// Largest scale accepted on parse; enough for any realistic measure column
/// while keeping scale alignment overflow-free.
const MAX_SCALE: u32 = 18;

impl Decimal {
    pub fn new(mantissa: i128, scale: u32) -> Decimal {
        Decimal { mantissa, scale }.normalize()
    }

    fn normalize(mut self) -> Decimal {
        while self.scale > 0 && self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.scale -= 1;
        }
        self
    }

    pub fn parse(s: &str) -> Result<Decimal> {
        let bad = || Error::Manifest(format!("invalid decimal literal: {s:?}"));
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        if frac_part.len() as u32 > MAX_SCALE {
            return Err(Error::Manifest(format!(
                "decimal literal exceeds maximum scale {MAX_SCALE}: {s:?}"
            )));
        }
        let digits: String = [int_part, frac_part].concat();
        let mut mantissa: i128 = digits
            .parse()
            .map_err(|_| Error::Overflow(format!("decimal literal {s:?}")))?;
        if neg {
            mantissa = -mantissa;
        }
        Ok(Decimal::new(mantissa, frac_part.len() as u32))
    }

    /// Exact addition; the only arithmetic the engine performs on decimals.
    pub fn checked_add(self, other: Decimal) -> Option<Decimal> {
        let scale = self.scale.max(other.scale);
        let a = self.mantissa.checked_mul(10i128.checked_pow(scale - self.scale)?)?;
        let b = other.mantissa.checked_mul(10i128.checked_pow(scale - other.scale)?)?;
        Some(Decimal::new(a.checked_add(b)?, scale))
    }

    fn cmp_exact(&self, other: &Decimal) -> Ordering {
        let scale = self.scale.max(other.scale);
        // MAX_SCALE keeps the widening multiplications inside i128 range.
        let a = self.mantissa * 10i128.pow(scale - self.scale);
        let b = other.mantissa * 10i128.pow(scale - other.scale);
        a.cmp(&b)
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Decimal) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Decimal) -> Ordering {
        self.cmp_exact(other)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let sign = if self.mantissa < 0 { "-" } else { "" };
        let abs = self.mantissa.unsigned_abs();
        let pow = 10u128.pow(self.scale);
        write!(
            f,
            "{sign}{}.{:0width$}",
            abs / pow,
            abs % pow,
            width = self.scale as usize
        )
    }
}

/// A single cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Null,
    Int(i64),
    Decimal(Decimal),
    Text(String),
    Date(NaiveDate),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "int",
            Value::Decimal(_) => "decimal",
            Value::Text(_) => "text",
            Value::Date(_) => "date",
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Whether this value can live in a column of type `ty`. NULL fits anywhere.
    pub fn fits(&self, ty: ColumnType) -> bool {
        matches!(
            (self, ty),
            (Value::Null, _)
                | (Value::Int(_), ColumnType::Int)
                | (Value::Decimal(_), ColumnType::Decimal)
                | (Value::Text(_), ColumnType::Text)
                | (Value::Date(_), ColumnType::Date)
        )
    }

    /// Parse a CSV cell. The empty string is NULL for every column type.
    pub fn parse_cell(raw: &str, ty: ColumnType) -> Result<Value> {
        if raw.is_empty() {
            return Ok(Value::Null);
        }
        match ty {
            ColumnType::Int => raw
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| Error::Manifest(format!("invalid int literal: {raw:?}"))),
            ColumnType::Decimal => Decimal::parse(raw).map(Value::Decimal),
            ColumnType::Text => Ok(Value::Text(raw.to_string())),
            ColumnType::Date => NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map(Value::Date)
                .map_err(|_| Error::Manifest(format!("invalid date literal: {raw:?}"))),
        }
    }

    /// Render for CSV persistence. Inverse of [`Value::parse_cell`]: NULL is
    /// the empty string, dates are ISO, decimals keep their normalized form.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(n) => n.to_string(),
            Value::Decimal(d) => d.to_string(),
            Value::Text(s) => s.clone(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) => 1,
            Value::Decimal(_) => 2,
            Value::Text(_) => 3,
            Value::Date(_) => 4,
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Structural total order used for grouping and deterministic row ordering.
/// NULL sorts first and equals itself; distinct types order by a fixed rank.
impl Ord for Value {
    fn cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Decimal(a), Value::Decimal(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cell())
    }
}

/// Predicate comparison. `Ok(None)` means the comparison is undefined because
/// one side is NULL; a condition over it is simply not satisfied. Comparing
/// distinct non-null types is an error, never a coercion.
pub fn sql_compare(lhs: &Value, rhs: &Value) -> Result<Option<Ordering>> {
    match (lhs, rhs) {
        (Value::Null, _) | (_, Value::Null) => Ok(None),
        (Value::Int(a), Value::Int(b)) => Ok(Some(a.cmp(b))),
        (Value::Decimal(a), Value::Decimal(b)) => Ok(Some(a.cmp(b))),
        (Value::Text(a), Value::Text(b)) => Ok(Some(a.cmp(b))),
        (Value::Date(a), Value::Date(b)) => Ok(Some(a.cmp(b))),
        _ => Err(Error::TypeMismatch { lhs: lhs.type_name(), rhs: rhs.type_name() }),
    }
}

/// SQL LIKE over text: `%` matches any run (including empty), `_` matches
/// exactly one character. Matching is case-sensitive; there is no escape.
pub fn like_match(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    // Classic two-pointer wildcard match with backtracking to the last `%`.
    let (mut ti, mut pi) = (0usize, 0usize);
    let (mut star, mut star_t) = (None::<usize>, 0usize);
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || p[pi] == t[ti]) {
            ti += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some(pi);
            star_t = ti;
            pi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            star_t += 1;
            ti = star_t;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '%' {
        pi += 1;
    }
    pi == p.len()
}
