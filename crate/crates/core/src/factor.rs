//! Discrete variables and dense factor tables.
//!
//! A [`Factor`] stores one non-negative real per joint assignment of its
//! scope. The scope is kept sorted by variable id and the table is laid out
//! row-major with the last scope variable varying fastest, so for a scope
//! `[x, y]` with `|y| = 3` the entry for `(x = i, y = j)` lives at `3 * i + j`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};

pub type VarId = u32;

/// A discrete variable with frame `0..card`.
///
/// Equality, ordering and hashing only look at the id.
#[derive(Clone)]
pub struct Variable {
    id: VarId,
    name: Arc<str>,
    card: usize,
}

impl Variable {
    pub fn new(id: VarId, name: impl Into<Arc<str>>, card: usize) -> Self {
        Self {
            id,
            name: name.into(),
            card,
        }
    }

    pub fn id(&self) -> VarId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn card(&self) -> usize {
        self.card
    }
}

impl PartialEq for Variable {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Variable {}

impl Hash for Variable {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl PartialOrd for Variable {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Variable {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}/{}", self.name, self.id, self.card)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A partial map from variables to frame values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    values: BTreeMap<VarId, usize>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: &Variable, value: usize) -> Result<()> {
        if value >= var.card() {
            return Err(Error::ValueOutOfRange {
                name: var.name().to_owned(),
                value,
                card: var.card(),
            });
        }
        self.values.insert(var.id(), value);
        Ok(())
    }

    pub fn with(mut self, var: &Variable, value: usize) -> Result<Self> {
        self.set(var, value)?;
        Ok(self)
    }

    pub fn get(&self, id: VarId) -> Option<usize> {
        self.values.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }
}

/// Row-major strides for a list of cardinalities, last entry fastest.
pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * cards[i + 1];
    }
    out
}

/// Visit every assignment of `cards` in canonical order, passing the running
/// offsets into `N` tables whose per-digit strides are given (a zero stride
/// means the table does not depend on that digit).
pub(crate) fn walk<const N: usize>(
    cards: &[usize],
    strides: [&[usize]; N],
    mut visit: impl FnMut([usize; N]),
) {
    if cards.contains(&0) {
        return;
    }
    let mut digits = vec![0usize; cards.len()];
    let mut offsets = [0usize; N];
    loop {
        visit(offsets);
        let mut i = cards.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < cards[i] {
                for k in 0..N {
                    offsets[k] += strides[k][i];
                }
                break;
            }
            digits[i] = 0;
            for k in 0..N {
                offsets[k] -= strides[k][i] * (cards[i] - 1);
            }
        }
    }
}

/// Sorted union of two sorted scopes; shared variables must agree on frame size.
pub(crate) fn union_scope(a: &[Variable], b: &[Variable]) -> Result<Vec<Variable>> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].id().cmp(&b[j].id()) {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                if a[i].card() != b[j].card() {
                    return Err(Error::FrameMismatch {
                        name: a[i].name().to_owned(),
                        left: a[i].card(),
                        right: b[j].card(),
                    });
                }
                out.push(a[i].clone());
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<Variable>,
    table: Vec<f64>,
}

impl Factor {
    /// Builds a factor whose `table` is indexed in the order `scope` is given
    /// (last variable fastest). The scope is then sorted by id and the table
    /// permuted to match.
    pub fn new(scope: Vec<Variable>, table: Vec<f64>) -> Result<Self> {
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(Error::DuplicateVariable(v.name().to_owned()));
            }
        }
        let expected: usize = scope.iter().map(Variable::card).product();
        if table.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: table.len(),
            });
        }
        if let Some((index, &value)) = table
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || **x < 0.0)
        {
            return Err(Error::BadEntry { index, value });
        }
        let raw = Factor { scope, table };
        if raw.scope.windows(2).all(|w| w[0].id() < w[1].id()) {
            return Ok(raw);
        }
        let mut sorted = raw.scope.clone();
        sorted.sort();
        Ok(raw.reorder(sorted))
    }

    /// Trusted constructor for internal results that are sorted and valid.
    pub(crate) fn from_parts(scope: Vec<Variable>, table: Vec<f64>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0].id() < w[1].id()));
        debug_assert_eq!(
            table.len(),
            scope.iter().map(Variable::card).product::<usize>()
        );
        Factor { scope, table }
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            table: vec![value],
        }
    }

    pub fn ones(scope: Vec<Variable>) -> Result<Self> {
        let n = scope.iter().map(Variable::card).product();
        Self::new(scope, vec![1.0; n])
    }

    /// 1 at `value`, 0 elsewhere.
    pub fn indicator(var: &Variable, value: usize) -> Result<Self> {
        if value >= var.card() {
            return Err(Error::ValueOutOfRange {
                name: var.name().to_owned(),
                value,
                card: var.card(),
            });
        }
        let mut table = vec![0.0; var.card()];
        table[value] = 1.0;
        Ok(Factor {
            scope: vec![var.clone()],
            table,
        })
    }

    pub fn scope(&self) -> &[Variable] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, id: VarId) -> bool {
        self.position(id).is_some()
    }

    pub fn position(&self, id: VarId) -> Option<usize> {
        self.scope.binary_search_by(|v| v.id().cmp(&id)).ok()
    }

    pub fn cards(&self) -> Vec<usize> {
        self.scope.iter().map(Variable::card).collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.cards())
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Scope values for a flat table index.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.scope.len()];
        for (i, v) in self.scope.iter().enumerate().rev() {
            out[i] = index % v.card();
            index /= v.card();
        }
        out
    }

    pub fn assignment_at(&self, index: usize) -> Assignment {
        let mut a = Assignment::new();
        for (v, x) in self.scope.iter().zip(self.decode(index)) {
            a.values.insert(v.id(), x);
        }
        a
    }

    pub fn value(&self, a: &Assignment) -> Result<f64> {
        let mut idx = 0;
        for v in &self.scope {
            let x = a
                .get(v.id())
                .ok_or_else(|| Error::MissingAssignment(v.name().to_owned()))?;
            if x >= v.card() {
                return Err(Error::ValueOutOfRange {
                    name: v.name().to_owned(),
                    value: x,
                    card: v.card(),
                });
            }
            idx = idx * v.card() + x;
        }
        Ok(self.table[idx])
    }

    /// Pointwise product over the union of both scopes.
    pub fn multiply(&self, other: &Factor) -> Result<Factor> {
        let scope = union_scope(&self.scope, &other.scope)?;
        let cards: Vec<usize> = scope.iter().map(Variable::card).collect();
        let sa = self.strides_in(&scope);
        let sb = other.strides_in(&scope);
        let mut table = Vec::with_capacity(cards.iter().product());
        walk(&cards, [&sa, &sb], |[a, b]| {
            table.push(self.table[a] * other.table[b])
        });
        Ok(Factor::from_parts(scope, table))
    }

    pub fn sum_out(&self, var: &Variable) -> Result<Factor> {
        let pos = self
            .position(var.id())
            .ok_or_else(|| Error::NotInScope(var.name().to_owned()))?;
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let out_strides = strides(&scope.iter().map(Variable::card).collect::<Vec<_>>());
        let mut to_out = out_strides.clone();
        to_out.insert(pos, 0);
        let seq = self.strides();
        let mut table = vec![0.0; out_strides.first().map_or(1, |s| s * scope[0].card())];
        walk(&self.cards(), [&to_out, &seq], |[o, i]| {
            table[o] += self.table[i]
        });
        Ok(Factor::from_parts(scope, table))
    }

    /// Restrict `var` to `value`, dropping it from the scope.
    pub fn slice(&self, var: &Variable, value: usize) -> Result<Factor> {
        let pos = self
            .position(var.id())
            .ok_or_else(|| Error::NotInScope(var.name().to_owned()))?;
        if value >= self.scope[pos].card() {
            return Err(Error::ValueOutOfRange {
                name: var.name().to_owned(),
                value,
                card: self.scope[pos].card(),
            });
        }
        let st = self.strides();
        let base = value * st[pos];
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let mut src = st;
        src.remove(pos);
        let cards: Vec<usize> = scope.iter().map(Variable::card).collect();
        let mut table = Vec::with_capacity(cards.iter().product());
        walk(&cards, [&src], |[i]| table.push(self.table[base + i]));
        Ok(Factor::from_parts(scope, table))
    }

    /// Identify `from` with `into`: the result no longer mentions `from`, and
    /// wherever it read `from` it now reads `into`. If both are in scope this
    /// takes the diagonal `f(.., into = v, from = v, ..)`; if only `from` is,
    /// it is a rename.
    pub fn collapse(&self, from: &Variable, into: &Variable) -> Result<Factor> {
        let pos = self
            .position(from.id())
            .ok_or_else(|| Error::NotInScope(from.name().to_owned()))?;
        if from.card() != into.card() {
            return Err(Error::FrameMismatch {
                name: into.name().to_owned(),
                left: from.card(),
                right: into.card(),
            });
        }
        let st = self.strides();
        let mut scope: Vec<Variable> = self.scope.clone();
        scope.remove(pos);
        let mut src = st.clone();
        src.remove(pos);
        match scope.binary_search_by(|v| v.id().cmp(&into.id())) {
            Ok(j) => src[j] += st[pos],
            Err(j) => {
                scope.insert(j, into.clone());
                src.insert(j, st[pos]);
            }
        }
        let cards: Vec<usize> = scope.iter().map(Variable::card).collect();
        let mut table = Vec::with_capacity(cards.iter().product());
        walk(&cards, [&src], |[i]| table.push(self.table[i]));
        Ok(Factor::from_parts(scope, table))
    }

    /// Replace `from` by the fresh variable `to`.
    pub fn rename(&self, from: &Variable, to: &Variable) -> Result<Factor> {
        if self.contains(to.id()) {
            return Err(Error::DuplicateVariable(to.name().to_owned()));
        }
        self.collapse(from, to)
    }

    pub fn scale(&self, by: f64) -> Factor {
        Factor {
            scope: self.scope.clone(),
            table: self.table.iter().map(|x| x * by).collect(),
        }
    }

    /// Largest entrywise absolute difference and the index where it occurs.
    pub fn max_abs_diff(&self, other: &Factor) -> Result<(f64, usize)> {
        if self.scope.len() != other.scope.len()
            || self
                .scope
                .iter()
                .zip(&other.scope)
                .any(|(a, b)| a.id() != b.id() || a.card() != b.card())
        {
            return Err(Error::InvalidFactorization(format!(
                "scope mismatch: [{}] vs [{}]",
                names(&self.scope),
                names(&other.scope)
            )));
        }
        let mut best = (0.0, 0);
        for (i, (a, b)) in self.table.iter().zip(&other.table).enumerate() {
            let d = (a - b).abs();
            if d > best.0 || d.is_nan() {
                best = (d, i);
            }
        }
        Ok(best)
    }

    pub fn approx_eq(&self, other: &Factor, tol: f64) -> bool {
        matches!(self.max_abs_diff(other), Ok((d, _)) if d <= tol)
    }

    /// Strides of this factor's variables laid out against `scope` (a
    /// superset, sorted); zero where this factor does not mention a variable.
    pub(crate) fn strides_in(&self, scope: &[Variable]) -> Vec<usize> {
        let own = self.strides();
        scope
            .iter()
            .map(|v| self.position(v.id()).map_or(0, |p| own[p]))
            .collect()
    }

    /// Same table with a permuted scope order (the table is re-laid out so
    /// that `order` is the new canonical order).
    fn reorder(&self, order: Vec<Variable>) -> Factor {
        let own = strides(&self.cards());
        let src: Vec<usize> = order
            .iter()
            .map(|v| {
                let p = self.scope.iter().position(|w| w == v).unwrap();
                own[p]
            })
            .collect();
        let cards: Vec<usize> = order.iter().map(Variable::card).collect();
        let mut table = Vec::with_capacity(self.table.len());
        walk(&cards, [&src], |[i]| table.push(self.table[i]));
        Factor {
            scope: order,
            table,
        }
    }
}

pub(crate) fn names(vars: &[Variable]) -> String {
    vars.iter()
        .map(|v| v.name().to_owned())
        .collect::<Vec<_>>()
        .join(", ")
}
