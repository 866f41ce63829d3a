//! Query language:
//!
//! ```text
//! SELECT <op> <attr>(,<attr>)* ON <dp>(,<dp>)*
//!     [WHERE <attr> <cmp> <literal>] [RANGE <lo>,<hi>] [MODEL <c0>(,<ci>)*]
//! ```
//!
//! Keywords are case-insensitive, literals are numbers or single-quoted
//! strings, and optional clauses may appear in any order. For regression
//! operations the last attribute is the response variable.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encodings::{BitwiseMode, OperationKind, OperationSpec};
use crate::protocols::PrivacyParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("malformed query: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    fn holds(self, o: Ordering) -> bool {
        match self {
            Comparator::Eq => o == Ordering::Equal,
            Comparator::Ne => o != Ordering::Equal,
            Comparator::Lt => o == Ordering::Less,
            Comparator::Le => o != Ordering::Greater,
            Comparator::Gt => o == Ordering::Greater,
            Comparator::Ge => o != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub attribute: String,
    pub cmp: Comparator,
    pub literal: Literal,
}

impl Filter {
    /// Numbers compare numerically (a cell that is not a number never
    /// matches), text compares lexicographically.
    pub fn matches(&self, cell: &str) -> bool {
        let ord = match &self.literal {
            Literal::Number(n) => match cell.trim().parse::<f64>() {
                Ok(x) => x.partial_cmp(n),
                Err(_) => None,
            },
            Literal::Text(t) => Some(cell.cmp(t.as_str())),
        };
        ord.is_some_and(|o| self.cmp.holds(o))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub operation: OperationSpec,
    pub attributes: Vec<String>,
    pub dps: Vec<String>,
    pub filter: Option<Filter>,
    /// Collective differential privacy on the result.
    pub privacy: Option<PrivacyParams>,
}

impl Query {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_privacy(mut self, p: PrivacyParams) -> Self {
        self.privacy = Some(p);
        self
    }

    pub fn with_bitwise_mode(mut self, m: BitwiseMode) -> Self {
        self.operation.bitwise_mode = m;
        self
    }

    /// Replaces the RANGE bounds and re-validates.
    pub fn with_bounds(mut self, lo: i64, hi: i64) -> Result<Self, QueryError> {
        self.operation.bounds = Some((lo, hi));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.attributes.is_empty() || self.dps.is_empty() {
            return Err(QueryError::Malformed("needs attributes and data providers".into()));
        }
        if self.attributes.len() != self.operation.arity() {
            return Err(QueryError::Malformed(format!(
                "{} takes {} attributes, got {}",
                self.operation.kind.name(),
                self.operation.arity(),
                self.attributes.len()
            )));
        }
        self.operation
            .validate()
            .map_err(|e| QueryError::Malformed(e.to_string()))?;
        if let Some(p) = &self.privacy {
            p.validate().map_err(|e| QueryError::Malformed(e.to_string()))?;
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SELECT {} {} ON {}",
            self.operation.kind.name(),
            self.attributes.join(","),
            self.dps.join(",")
        )?;
        if let Some(w) = &self.filter {
            write!(f, " WHERE {} {} ", w.attribute, w.cmp.symbol())?;
            match &w.literal {
                Literal::Number(n) => write!(f, "{n}")?,
                Literal::Text(t) => write!(f, "'{t}'")?,
            }
        }
        if let Some((lo, hi)) = self.operation.bounds {
            write!(f, " RANGE {lo},{hi}")?;
        }
        if let Some(m) = &self.operation.model {
            let m: Vec<String> = m.iter().map(|c| c.to_string()).collect();
            write!(f, " MODEL {}", m.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Str(String),
    Comma,
    Cmp(Comparator),
    End,
}

struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut out = Vec::new();
    let err = |line, col, msg: String| QueryError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let start = i;
        let tok = if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        } else if c == ',' {
            i += 1;
            Tok::Comma
        } else if c == '\'' {
            i += 1;
            let s = i;
            while i < chars.len() && chars[i] != '\'' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '\'' {
                return Err(err(tl, tc, "unterminated string".into()));
            }
            i += 1;
            Tok::Str(chars[s..i - 1].iter().collect())
        } else if "=!<>".contains(c) {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (cmp, n) = match two.as_str() {
                "!=" | "<>" => (Comparator::Ne, 2),
                "<=" => (Comparator::Le, 2),
                ">=" => (Comparator::Ge, 2),
                _ => match c {
                    '=' => (Comparator::Eq, 1),
                    '<' => (Comparator::Lt, 1),
                    '>' => (Comparator::Gt, 1),
                    _ => return Err(err(tl, tc, "expected '!='".into())),
                },
            };
            i += n;
            Tok::Cmp(cmp)
        } else if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && i + 1 < chars.len()) {
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || "+-".contains(chars[i]) && "eE".contains(chars[i - 1]))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Num(s.parse().map_err(|_| err(tl, tc, format!("invalid number '{s}'")))?)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || "_-.".contains(chars[i])) {
                i += 1;
            }
            Tok::Word(chars[start..i].iter().collect())
        } else {
            return Err(err(tl, tc, format!("unexpected character '{c}'")));
        };
        col += i - start;
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, QueryError> {
        let t = self.peek();
        Err(QueryError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn keyword(&self) -> Option<String> {
        match &self.peek().tok {
            Tok::Word(w) => {
                let up = w.to_ascii_uppercase();
                ["SELECT", "ON", "WHERE", "RANGE", "MODEL"]
                    .contains(&up.as_str())
                    .then_some(up)
            }
            _ => None,
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.keyword().as_deref() == Some(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {kw}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        if self.keyword().is_some() {
            return self.fail(format!("expected {what}, found keyword"));
        }
        match self.peek().tok.clone() {
            Tok::Word(w) => {
                self.pos += 1;
                Ok(w)
            }
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn number(&mut self) -> Result<f64, QueryError> {
        match self.peek().tok {
            Tok::Num(n) => {
                self.pos += 1;
                Ok(n)
            }
            _ => self.fail("expected number"),
        }
    }

    fn integer(&mut self) -> Result<i64, QueryError> {
        let n = self.number()?;
        if n.fract() != 0.0 || n.abs() > 1e15 {
            self.pos -= 1;
            return self.fail("expected integer");
        }
        Ok(n as i64)
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, QueryError>) -> Result<Vec<T>, QueryError> {
        let mut out = vec![item(self)?];
        while self.peek().tok == Tok::Comma {
            self.pos += 1;
            out.push(item(self)?);
        }
        Ok(out)
    }
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    p.expect_keyword("SELECT")?;
    let kind = match p.peek().tok.clone() {
        Tok::Word(w) => match OperationKind::parse(&w) {
            Some(k) => k,
            None => return p.fail(format!("unknown operation '{w}'")),
        },
        _ => return p.fail("expected operation"),
    };
    p.next();
    let attributes = p.list(|p| p.ident("attribute"))?;
    p.expect_keyword("ON")?;
    let dps = p.list(|p| p.ident("data provider"))?;
    let mut op = OperationSpec::new(kind);
    if matches!(kind, OperationKind::R2 | OperationKind::LinReg | OperationKind::LogReg) {
        op.features = attributes.len().saturating_sub(1);
    }
    let mut filter = None;
    let mut seen = Vec::new();
    while let Some(kw) = p.keyword() {
        if seen.contains(&kw) {
            return p.fail(format!("duplicate {kw} clause"));
        }
        p.pos += 1;
        match kw.as_str() {
            "WHERE" => {
                let attribute = p.ident("attribute")?;
                let cmp = match p.next() {
                    Tok::Cmp(c) => c,
                    _ => {
                        p.pos -= 1;
                        return p.fail("expected comparator");
                    }
                };
                let literal = match p.next() {
                    Tok::Num(n) => Literal::Number(n),
                    Tok::Str(s) => Literal::Text(s),
                    _ => {
                        p.pos -= 1;
                        return p.fail("expected literal");
                    }
                };
                filter = Some(Filter { attribute, cmp, literal });
            }
            "RANGE" => {
                let lo = p.integer()?;
                if p.next() != Tok::Comma {
                    p.pos -= 1;
                    return p.fail("expected ','");
                }
                let hi = p.integer()?;
                if hi <= lo {
                    return Err(QueryError::Malformed(format!("empty range [{lo}, {hi})")));
                }
                op.bounds = Some((lo, hi));
            }
            "MODEL" => op.model = Some(p.list(|p| p.number())?),
            _ => return p.fail(format!("unexpected {kw}")),
        }
        seen.push(kw);
    }
    if p.peek().tok != Tok::End {
        return p.fail("unexpected trailing input");
    }
    let digest = Sha256::digest(text.trim().as_bytes());
    let q = Query {
        id: hex::encode(&digest[..8]),
        operation: op,
        attributes,
        dps,
        filter,
        privacy: None,
    };
    q.validate()?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_query() {
        let q = parse_query("SELECT average heart_rate ON DP1,DP2 WHERE patient_state = 'hypertensive'").unwrap();
        assert_eq!(q.operation.kind, OperationKind::Mean);
        assert_eq!(q.attributes, vec!["heart_rate"]);
        assert_eq!(q.dps, vec!["DP1", "DP2"]);
        let f = q.filter.unwrap();
        assert_eq!(f.cmp, Comparator::Eq);
        assert_eq!(f.literal, Literal::Text("hypertensive".into()));
        assert!(f.matches("hypertensive"));
        assert!(!f.matches("normal"));
    }

    #[test]
    fn minimal_and_clauses() {
        let q = parse_query("SELECT sum x ON DP1").unwrap();
        assert_eq!(q.operation.kind, OperationKind::Sum);
        assert!(q.filter.is_none() && q.operation.bounds.is_none());

        let q = parse_query("select max age on a, b range 0,120 where age >= 18").unwrap();
        assert_eq!(q.operation.bounds, Some((0, 120)));
        let f = q.filter.as_ref().unwrap();
        assert!(f.matches("18") && f.matches("40.5") && !f.matches("17") && !f.matches("n/a"));

        let q = parse_query("SELECT r2 x1,x2,y ON d MODEL 1,-0.5,2e-1").unwrap();
        assert_eq!(q.operation.features, 2);
        assert_eq!(q.operation.model, Some(vec![1.0, -0.5, 0.2]));
        assert_eq!(parse_query(&q.to_string()).unwrap().operation, q.operation);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse_query("SELECT bogus x ON DP1").unwrap_err();
        assert_eq!(
            e,
            QueryError::Syntax {
                line: 1,
                col: 8,
                msg: "unknown operation 'bogus'".into()
            }
        );
        match parse_query("SELECT sum x\nON DP1 WHERE x ~ 3").unwrap_err() {
            QueryError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 16)),
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_query("SELECT sum x ON"), Err(QueryError::Syntax { .. })));
        assert!(matches!(parse_query("SELECT sum x ON a RANGE 1.5,3"), Err(QueryError::Syntax { .. })));
        assert!(matches!(parse_query("SELECT sum x ON a WHERE y = 'open"), Err(QueryError::Syntax { .. })));
        assert!(matches!(parse_query("SELECT sum x ON a RANGE 0,1 RANGE 0,2"), Err(QueryError::Syntax { .. })));
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(parse_query("SELECT min x ON a"), Err(QueryError::Malformed(_))));
        assert!(matches!(parse_query("SELECT cosim x ON a"), Err(QueryError::Malformed(_))));
        assert!(matches!(parse_query("SELECT sum x ON a RANGE 5,5"), Err(QueryError::Malformed(_))));
        assert!(matches!(parse_query("SELECT lin_reg y ON a"), Err(QueryError::Malformed(_))));
    }

    #[test]
    fn ids_are_deterministic() {
        let a = parse_query("SELECT sum x ON a").unwrap();
        assert_eq!(a.id, parse_query("  SELECT sum x ON a ").unwrap().id);
        assert_ne!(a.id, parse_query("SELECT sum x ON b").unwrap().id);
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<Query>(&j).unwrap(), a);
    }
}
