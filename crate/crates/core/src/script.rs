//! Operation scripts: one operation per line, space-separated tokens.
//!
//! ```text
//! I u v w    insert edge (u, v) with weight w
//! D u v      delete the lowest-id edge between u and v
//! Q s t      query in the structure's own mode
//! QF s t     max-flow query
//! QD s t     distance query
//! A v        activate vertex v
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Insert { u: usize, v: usize, weight: f64 },
    Delete { u: usize, v: usize },
    Query { s: usize, t: usize },
    QueryFlow { s: usize, t: usize },
    QueryDist { s: usize, t: usize },
    Activate(usize),
}

impl Op {
    pub fn is_query(&self) -> bool {
        matches!(self, Op::Query { .. } | Op::QueryFlow { .. } | Op::QueryDist { .. })
    }

    pub fn is_update(&self) -> bool {
        matches!(self, Op::Insert { .. } | Op::Delete { .. })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Op::Insert { .. } => "I",
            Op::Delete { .. } => "D",
            Op::Query { .. } => "Q",
            Op::QueryFlow { .. } => "QF",
            Op::QueryDist { .. } => "QD",
            Op::Activate(_) => "A",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Op::Insert { u, v, weight } => write!(f, "I {u} {v} {weight}"),
            Op::Delete { u, v } => write!(f, "D {u} {v}"),
            Op::Query { s, t } => write!(f, "Q {s} {t}"),
            Op::QueryFlow { s, t } => write!(f, "QF {s} {t}"),
            Op::QueryDist { s, t } => write!(f, "QD {s} {t}"),
            Op::Activate(v) => write!(f, "A {v}"),
        }
    }
}

/// An operation with its 1-based source line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub op: Op,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let arity = match tokens[0] {
            "I" => 3,
            "D" | "Q" | "QF" | "QD" => 2,
            "A" => 1,
            other => return Err(parse_err(line, format!("unknown operation {other:?}"))),
        };
        if tokens.len() != arity + 1 {
            return Err(parse_err(
                line,
                format!("{} takes {arity} arguments, got {}", tokens[0], tokens.len() - 1),
            ));
        }
        let vertex = |i: usize| -> Result<usize> {
            tokens[i]
                .parse()
                .map_err(|_| parse_err(line, format!("bad vertex id {:?}", tokens[i])))
        };
        let op = match tokens[0] {
            "I" => {
                let weight: f64 = tokens[3]
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad weight {:?}", tokens[3])))?;
                if !(weight.is_finite() && weight > 0.0) {
                    return Err(parse_err(line, format!("weight must be positive and finite, got {weight}")));
                }
                Op::Insert {
                    u: vertex(1)?,
                    v: vertex(2)?,
                    weight,
                }
            }
            "D" => Op::Delete {
                u: vertex(1)?,
                v: vertex(2)?,
            },
            "Q" => Op::Query {
                s: vertex(1)?,
                t: vertex(2)?,
            },
            "QF" => Op::QueryFlow {
                s: vertex(1)?,
                t: vertex(2)?,
            },
            "QD" => Op::QueryDist {
                s: vertex(1)?,
                t: vertex(2)?,
            },
            _ => Op::Activate(vertex(1)?),
        };
        out.push(ScriptLine { line, op });
    }
    Ok(out)
}

pub fn write_script(ops: &[Op]) -> String {
    let mut out = String::new();
    for op in ops {
        out.push_str(&op.to_string());
        out.push('\n');
    }
    out
}
