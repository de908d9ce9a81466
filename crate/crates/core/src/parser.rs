//! SQL front end for the restricted OLAP dialect.
//!
//! Grammar (case-insensitive keywords, `--`-free, one statement):
//!
//! ```text
//! query  := SELECT item ("," item)*
//!           FROM table_ref ("," table_ref)*
//!           [WHERE cond (AND cond)*]
//!           GROUP BY expr ("," expr)* [";"]
//! item   := agg "(" expr ")" | expr
//! table  := ident [alias]
//! cond   := expr op expr | expr LIKE 'pattern'
//! expr   := func "(" expr ("," expr)* ")" | ident ["." ident] | literal
//! op     := = | != | < | <= | > | >= | LIKE
//! ```
//!
//! Constructs outside the dialect (DISTINCT, HAVING, OR, JOIN syntax,
//! subqueries, UNION, ORDER BY) fail fast with an `unsupported construct`
//! error naming the offender.
//!
//! Parsing canonicalizes as it resolves: identifiers fold to lower case,
//! aliases rewrite to real table names, and a bare column is qualified when
//! the FROM clause has a single table (with several tables it stays bare and
//! matches by its exact spelling). The result carries the query tree plus its
//! canonical fragment sets.

use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::oqt::{
    assemble, canonicalize, validate, AggSpec, CanonicalFragments, CmpOp, Condition,
    OlapQueryTree,
};
use crate::value::{Decimal, Value};
use std::collections::BTreeMap;

/// A parsed, validated, canonicalized query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuery {
    /// The SQL text as submitted.
    pub sql: String,
    pub tree: OlapQueryTree,
    pub fragments: CanonicalFragments,
}

impl ParsedQuery {
    /// Canonical SQL rendering of the tree: alias-free, lower-case, sorted
    /// conditions. Re-parsing it reproduces the same fragments.
    pub fn canonical_sql(&self) -> String {
        render_sql(&self.tree)
    }
}

const AGG_FUNCS: [&str; 5] = ["sum", "avg", "count", "max", "min"];
const UNSUPPORTED: [(&str, &str); 9] = [
    ("distinct", "DISTINCT"),
    ("having", "HAVING"),
    ("or", "OR"),
    ("join", "JOIN syntax"),
    ("inner", "JOIN syntax"),
    ("outer", "JOIN syntax"),
    ("on", "JOIN syntax"),
    ("union", "UNION"),
    ("order", "ORDER BY"),
];
/// Words that terminate clauses; never usable as identifiers or aliases.
const RESERVED: [&str; 16] = [
    "select", "from", "where", "group", "by", "and", "like", "as", "distinct", "having", "or",
    "join", "inner", "outer", "on", "union",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(String),
    Op(&'static str),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(sql: &str) -> Result<Vec<Token>> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let pos = i;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(sql[start..i].to_lowercase()), pos });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' && i + 1 < bytes.len()
                && (bytes[i + 1] as char).is_ascii_digit()
            {
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Token { tok: Tok::Num(sql[start..i].to_string()), pos });
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(Error::Syntax {
                        pos,
                        message: "unterminated string literal".into(),
                    });
                }
                if bytes[i] == b'\'' {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'\'' {
                        s.push('\'');
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                // Strings may hold any byte; recover the char at this point.
                let ch = sql[i..].chars().next().unwrap();
                s.push(ch);
                i += ch.len_utf8();
            }
            out.push(Token { tok: Tok::Str(s), pos });
        } else {
            match c {
                '=' => {
                    out.push(Token { tok: Tok::Op("="), pos });
                    i += 1;
                }
                '!' => {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                        out.push(Token { tok: Tok::Op("!="), pos });
                        i += 2;
                    } else {
                        return Err(Error::Syntax { pos, message: "expected '=' after '!'".into() });
                    }
                }
                '<' => {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                        out.push(Token { tok: Tok::Op("<="), pos });
                        i += 2;
                    } else {
                        out.push(Token { tok: Tok::Op("<"), pos });
                        i += 1;
                    }
                }
                '>' => {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                        out.push(Token { tok: Tok::Op(">="), pos });
                        i += 2;
                    } else {
                        out.push(Token { tok: Tok::Op(">"), pos });
                        i += 1;
                    }
                }
                '(' | ')' | ',' | '.' | ';' | '*' | '-' => {
                    out.push(Token { tok: Tok::Punct(c), pos });
                    i += 1;
                }
                other => {
                    return Err(Error::Syntax {
                        pos,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Column reference before alias resolution.
#[derive(Debug, Clone)]
enum RawExpr {
    Col { qualifier: Option<String>, name: String },
    Lit(Value),
    Func { name: String, args: Vec<RawExpr> },
}

#[derive(Debug)]
enum RawItem {
    Agg { func: String, arg: RawExpr },
    Expr(RawExpr),
}

struct Parser<'a> {
    sql: &'a str,
    tokens: Vec<Token>,
    at: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.at)
            .map(|t| t.pos)
            .unwrap_or(self.sql.len())
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.at).map(|t| t.tok.clone());
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax { pos: self.pos(), message: message.into() }
    }

    /// Reject dialect escapes early with a named error.
    fn check_unsupported(&self) -> Result<()> {
        if let Some(Tok::Ident(w)) = self.peek() {
            if let Some((_, label)) = UNSUPPORTED.iter().find(|(kw, _)| kw == w) {
                return Err(Error::Unsupported(label.to_string()));
            }
        }
        Ok(())
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        self.check_unsupported()?;
        match self.peek() {
            Some(Tok::Ident(w)) if w == kw => {
                self.at += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected {}", kw.to_uppercase()))),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == kw) && {
            self.at += 1;
            true
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::Punct(p)) if *p == c) && {
            self.at += 1;
            true
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<()> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        self.check_unsupported()?;
        match self.peek() {
            Some(Tok::Ident(w)) if !RESERVED.contains(&w.as_str()) => {
                let w = w.clone();
                self.at += 1;
                Ok(w)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn parse_expr(&mut self) -> Result<RawExpr> {
        self.check_unsupported()?;
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                Ok(RawExpr::Lit(parse_number(&n, false).map_err(|m| self.error(m))?))
            }
            Some(Tok::Punct('-')) => {
                self.at += 1;
                match self.next() {
                    Some(Tok::Num(n)) => {
                        Ok(RawExpr::Lit(parse_number(&n, true).map_err(|m| self.error(m))?))
                    }
                    _ => Err(self.error("expected number after '-'")),
                }
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Ok(RawExpr::Lit(Value::Text(s)))
            }
            Some(Tok::Punct('(')) => Err(Error::Unsupported("subquery or parenthesized expression".into())),
            Some(Tok::Ident(w)) if !RESERVED.contains(&w.as_str()) => {
                if AGG_FUNCS.contains(&w.as_str())
                    && matches!(self.tokens.get(self.at + 1).map(|t| &t.tok), Some(Tok::Punct('(')))
                {
                    return Err(self.error("aggregate not allowed here"));
                }
                self.at += 1;
                if self.eat_punct('(') {
                    // Row function call.
                    let mut args = vec![self.parse_expr()?];
                    while self.eat_punct(',') {
                        args.push(self.parse_expr()?);
                    }
                    self.expect_punct(')')?;
                    Ok(RawExpr::Func { name: w, args })
                } else if self.eat_punct('.') {
                    let name = self.ident("column name")?;
                    Ok(RawExpr::Col { qualifier: Some(w), name })
                } else {
                    Ok(RawExpr::Col { qualifier: None, name: w })
                }
            }
            _ => Err(self.error("expected expression")),
        }
    }

    fn parse_item(&mut self) -> Result<RawItem> {
        self.check_unsupported()?;
        if let Some(Tok::Ident(w)) = self.peek() {
            if AGG_FUNCS.contains(&w.as_str())
                && matches!(self.tokens.get(self.at + 1).map(|t| &t.tok), Some(Tok::Punct('(')))
            {
                let func = w.clone();
                self.at += 2; // name and '('
                let arg = self.parse_expr()?;
                self.expect_punct(')')?;
                return Ok(RawItem::Agg { func, arg });
            }
        }
        Ok(RawItem::Expr(self.parse_expr()?))
    }

    fn parse_condition(&mut self) -> Result<(RawExpr, CmpOp, RawExpr)> {
        let lhs = self.parse_expr()?;
        let op = if self.eat_keyword("like") {
            CmpOp::Like
        } else {
            match self.next() {
                Some(Tok::Op("=")) => CmpOp::Eq,
                Some(Tok::Op("!=")) => CmpOp::Ne,
                Some(Tok::Op("<")) => CmpOp::Lt,
                Some(Tok::Op("<=")) => CmpOp::Le,
                Some(Tok::Op(">")) => CmpOp::Gt,
                Some(Tok::Op(">=")) => CmpOp::Ge,
                _ => {
                    self.at = self.at.saturating_sub(1);
                    return Err(self.error("expected comparison operator"));
                }
            }
        };
        if op == CmpOp::Like {
            match self.peek() {
                Some(Tok::Str(_)) => {}
                _ => return Err(self.error("LIKE pattern must be a string literal")),
            }
        }
        let rhs = self.parse_expr()?;
        Ok((lhs, op, rhs))
    }
}

fn parse_number(text: &str, negative: bool) -> std::result::Result<Value, String> {
    let full = if negative { format!("-{text}") } else { text.to_string() };
    if full.contains('.') {
        Decimal::parse(&full)
            .map(Value::Decimal)
            .map_err(|_| format!("invalid decimal literal: {full}"))
    } else {
        full.parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("integer literal out of range: {full}"))
    }
}

/// Parse, resolve, validate and canonicalize one query.
pub fn parse(sql: &str) -> Result<ParsedQuery> {
    let tokens = lex(sql)?;
    let mut p = Parser { sql, tokens, at: 0 };

    p.expect_keyword("select")?;
    let mut items = vec![p.parse_item()?];
    while p.eat_punct(',') {
        items.push(p.parse_item()?);
    }

    p.expect_keyword("from")?;
    // (table, qualifier) pairs; the qualifier is the alias when given,
    // otherwise the table name itself.
    let mut tables: Vec<String> = Vec::new();
    let mut qualifiers: BTreeMap<String, String> = BTreeMap::new();
    loop {
        if matches!(p.peek(), Some(Tok::Punct('('))) {
            return Err(Error::Unsupported("subquery in FROM".into()));
        }
        let table = p.ident("table name")?;
        let alias = match p.peek() {
            Some(Tok::Ident(w))
                if !RESERVED.contains(&w.as_str()) && !UNSUPPORTED.iter().any(|(k, _)| k == w) =>
            {
                let w = w.clone();
                p.at += 1;
                Some(w)
            }
            _ => {
                p.check_unsupported()?;
                None
            }
        };
        let qualifier = alias.unwrap_or_else(|| table.clone());
        if qualifiers.insert(qualifier.clone(), table.clone()).is_some() {
            return Err(Error::Syntax {
                pos: p.pos(),
                message: format!("duplicate table or alias in FROM: {qualifier}"),
            });
        }
        tables.push(table);
        if !p.eat_punct(',') {
            break;
        }
    }

    let mut raw_conditions = Vec::new();
    if p.eat_keyword("where") {
        loop {
            raw_conditions.push(p.parse_condition()?);
            p.check_unsupported()?;
            if !p.eat_keyword("and") {
                break;
            }
        }
    }

    p.expect_keyword("group")?;
    p.expect_keyword("by")?;
    let mut raw_keys = vec![p.parse_expr()?];
    while p.eat_punct(',') {
        raw_keys.push(p.parse_expr()?);
    }

    p.check_unsupported()?;
    p.eat_punct(';');
    if p.peek().is_some() {
        return Err(p.error("expected end of query"));
    }

    // Alias resolution. A bare column qualifies against a single-table FROM;
    // with several tables it stays bare and matches by exact spelling.
    let single_table = (tables.len() == 1).then(|| tables[0].clone());
    let resolve = |e: &RawExpr| resolve_expr(e, &qualifiers, &single_table);

    let mut keys = Vec::with_capacity(raw_keys.len());
    for k in &raw_keys {
        let key = resolve(k)?;
        if keys.contains(&key) {
            return Err(Error::Syntax {
                pos: sql.len(),
                message: format!("duplicate group-by expression: {}", key.canonical()),
            });
        }
        keys.push(key);
    }

    let mut aggs = Vec::new();
    let mut result_columns = Vec::with_capacity(items.len());
    for item in &items {
        match item {
            RawItem::Agg { func, arg } => {
                let agg = AggSpec { func: func.clone(), arg: resolve(arg)? };
                result_columns.push(agg.canonical());
                aggs.push(agg);
            }
            RawItem::Expr(e) => result_columns.push(resolve(e)?.canonical()),
        }
    }

    let mut conditions = Vec::with_capacity(raw_conditions.len());
    for (lhs, op, rhs) in &raw_conditions {
        conditions.push(Condition::new(resolve(lhs)?, *op, resolve(rhs)?));
    }

    let tree = assemble(&tables, conditions, keys, aggs, result_columns);
    let violations = validate(&tree);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let fragments = canonicalize(&tree);
    Ok(ParsedQuery { sql: sql.to_string(), tree, fragments })
}

fn resolve_expr(
    e: &RawExpr,
    qualifiers: &BTreeMap<String, String>,
    single_table: &Option<String>,
) -> Result<ScalarExpr> {
    match e {
        RawExpr::Lit(v) => Ok(ScalarExpr::Literal(v.clone())),
        RawExpr::Func { name, args } => Ok(ScalarExpr::Func {
            name: name.clone(),
            args: args
                .iter()
                .map(|a| resolve_expr(a, qualifiers, single_table))
                .collect::<Result<_>>()?,
        }),
        RawExpr::Col { qualifier: Some(q), name } => match qualifiers.get(q) {
            Some(table) => Ok(ScalarExpr::Column(format!("{table}.{name}"))),
            None => Err(Error::UnresolvableAlias(format!(
                "{q} (known qualifiers: {})",
                qualifiers.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        },
        RawExpr::Col { qualifier: None, name } => match single_table {
            Some(table) => Ok(ScalarExpr::Column(format!("{table}.{name}"))),
            None => Ok(ScalarExpr::Column(name.clone())),
        },
    }
}

/// Render a tree back to canonical SQL: alias-free, lower-case identifiers,
/// conditions in canonical order. `parse(render_sql(t))` reproduces `t`'s
/// fragments exactly.
pub fn render_sql(tree: &OlapQueryTree) -> String {
    let parts = tree.parts().expect("render_sql requires a canonical tree");
    let mut sql = String::from("select ");
    sql.push_str(&tree.result_columns.join(", "));
    sql.push_str(" from ");
    sql.push_str(&parts.tables.join(", "));
    if !parts.conditions.is_empty() {
        let mut conds: Vec<String> = parts.conditions.iter().map(|c| c.canonical()).collect();
        conds.sort();
        sql.push_str(" where ");
        sql.push_str(&conds.join(" and "));
    }
    sql.push_str(" group by ");
    let keys: Vec<String> = parts.keys.iter().map(|k| k.canonical()).collect();
    sql.push_str(&keys.join(", "));
    sql
}
