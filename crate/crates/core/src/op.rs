//! Base combination operators: commutative, associative binary operations on
//! a frame `0..card`, always stored as an explicit Cayley table.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Or,
    And,
    Max,
    Min,
    SatAdd,
    ModAdd,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::Or,
        OpKind::And,
        OpKind::Max,
        OpKind::Min,
        OpKind::SatAdd,
        OpKind::ModAdd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Or => "or",
            OpKind::And => "and",
            OpKind::Max => "max",
            OpKind::Min => "min",
            OpKind::SatAdd => "sat_add",
            OpKind::ModAdd => "mod_add",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidOperator(format!("unknown builtin operator `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpViolation {
    NotSquare { row: usize, len: usize },
    Closure { a: usize, b: usize, value: usize },
    Commutativity { a: usize, b: usize },
    Associativity { a: usize, b: usize, c: usize },
}

impl fmt::Display for OpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OpViolation::NotSquare { row, len } => {
                write!(f, "row {row} has {len} entries, table must be square")
            }
            OpViolation::Closure { a, b, value } => {
                write!(f, "closure fails: {a} * {b} = {value} is outside the frame")
            }
            OpViolation::Commutativity { a, b } => {
                write!(f, "commutativity fails at ({a}, {b})")
            }
            OpViolation::Associativity { a, b, c } => {
                write!(f, "associativity fails at ({a}, {b}, {c})")
            }
        }
    }
}

/// Outcome of an exhaustive law check. The operator is acceptable iff
/// `violations` is empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpReport {
    pub card: usize,
    pub violations: Vec<OpViolation>,
}

impl OpReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for OpReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid operator on frame of size {}", self.card);
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks closure, commutativity (unordered pairs) and associativity (all
/// triples whose intermediate products are in range) of a Cayley table.
#[allow(clippy::needless_range_loop)]
pub fn validate_base_op(rows: &[Vec<usize>]) -> OpReport {
    let card = rows.len();
    let mut violations = Vec::new();
    for (row, r) in rows.iter().enumerate() {
        if r.len() != card {
            violations.push(OpViolation::NotSquare { row, len: r.len() });
        }
    }
    if card == 0 {
        violations.push(OpViolation::NotSquare { row: 0, len: 0 });
    }
    if !violations.is_empty() {
        return OpReport { card, violations };
    }
    for a in 0..card {
        for b in 0..card {
            if rows[a][b] >= card {
                violations.push(OpViolation::Closure {
                    a,
                    b,
                    value: rows[a][b],
                });
            }
        }
    }
    for a in 0..card {
        for b in a + 1..card {
            if rows[a][b] != rows[b][a] {
                violations.push(OpViolation::Commutativity { a, b });
            }
        }
    }
    for a in 0..card {
        for b in 0..card {
            for c in 0..card {
                let (ab, bc) = (rows[a][b], rows[b][c]);
                if ab >= card || bc >= card {
                    continue;
                }
                if rows[ab][c] != rows[a][bc] {
                    violations.push(OpViolation::Associativity { a, b, c });
                }
            }
        }
    }
    OpReport { card, violations }
}

/// A validated commutative, associative operator on `0..card`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseOp {
    card: usize,
    table: Vec<usize>,
    kind: Option<OpKind>,
}

impl BaseOp {
    pub fn from_table(rows: Vec<Vec<usize>>) -> Result<Self> {
        let report = validate_base_op(&rows);
        if !report.is_valid() {
            return Err(Error::InvalidOperator(report.to_string()));
        }
        Ok(BaseOp {
            card: rows.len(),
            table: rows.into_iter().flatten().collect(),
            kind: None,
        })
    }

    pub fn builtin(kind: OpKind, card: usize) -> Result<Self> {
        if card < 2 {
            return Err(Error::InvalidOperator(format!(
                "`{kind}` needs a frame of size at least 2, got {card}"
            )));
        }
        if matches!(kind, OpKind::Or | OpKind::And) && card != 2 {
            return Err(Error::InvalidOperator(format!(
                "`{kind}` is only defined on a binary frame, got {card}"
            )));
        }
        let f: fn(usize, usize, usize) -> usize = match kind {
            OpKind::Or => |a, b, _| a | b,
            OpKind::And => |a, b, _| a & b,
            OpKind::Max => |a, b, _| a.max(b),
            OpKind::Min => |a, b, _| a.min(b),
            OpKind::SatAdd => |a, b, n| (a + b).min(n - 1),
            OpKind::ModAdd => |a, b, n| (a + b) % n,
        };
        let table = (0..card)
            .flat_map(|a| (0..card).map(move |b| f(a, b, card)))
            .collect();
        Ok(BaseOp {
            card,
            table,
            kind: Some(kind),
        })
    }

    pub fn card(&self) -> usize {
        self.card
    }

    pub fn kind(&self) -> Option<OpKind> {
        self.kind
    }

    #[inline]
    pub fn apply(&self, a: usize, b: usize) -> usize {
        self.table[a * self.card + b]
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.table
            .chunks(self.card)
            .map(<[usize]>::to_vec)
            .collect()
    }

    /// Left fold over a non-empty sequence of frame values.
    pub fn fold(&self, values: impl IntoIterator<Item = usize>) -> Option<usize> {
        values.into_iter().reduce(|acc, x| self.apply(acc, x))
    }
}
