//! Heterogeneous factorizations and their combination algebra.
//!
//! A heterogeneous factorization keeps two factor sets: heterogeneous
//! factors, which are merged with the general combination operator `⊗`, and
//! normal factors, which are multiplied. The function it represents is
//! `(⊗ het) · ∏ normal`.
//!
//! `⊗` convolves every *bastard* variable shared by both operands under that
//! variable's base operator and multiplies pointwise over everything else.
//! With no shared bastard variables it is plain multiplication.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::factor::{names, strides, union_scope, walk, Factor, VarId, Variable};
use crate::op::BaseOp;

/// A bastard variable together with the operator its contributions combine under.
#[derive(Clone, Debug, PartialEq)]
pub struct BastardDecl {
    variable: Variable,
    op: BaseOp,
}

impl BastardDecl {
    pub fn new(variable: Variable, op: BaseOp) -> Result<Self> {
        if op.card() != variable.card() {
            return Err(Error::FrameMismatch {
                name: variable.name().to_owned(),
                left: variable.card(),
                right: op.card(),
            });
        }
        Ok(Self { variable, op })
    }

    pub fn variable(&self) -> &Variable {
        &self.variable
    }

    pub fn op(&self) -> &BaseOp {
        &self.op
    }
}

fn find_op(decls: &[BastardDecl], id: VarId) -> Option<&BaseOp> {
    decls.iter().find(|d| d.variable.id() == id).map(|d| &d.op)
}

/// `f ⊗_e g` for a single bastard variable `e`.
pub fn induced_combine(f: &Factor, g: &Factor, e: &Variable, op: &BaseOp) -> Result<Factor> {
    for h in [f, g] {
        if !h.contains(e.id()) {
            return Err(Error::NotInScope(e.name().to_owned()));
        }
    }
    let decl = BastardDecl::new(e.clone(), op.clone())?;
    general_combine(f, g, std::slice::from_ref(&decl))
}

/// `f ⊗ g` relative to a list of bastard declarations.
pub fn general_combine(f: &Factor, g: &Factor, decls: &[BastardDecl]) -> Result<Factor> {
    combine_counted(f, g, decls).map(|(h, _)| h)
}

/// [`general_combine`] plus the number of multiply-accumulates it performed.
pub(crate) fn combine_counted(
    f: &Factor,
    g: &Factor,
    decls: &[BastardDecl],
) -> Result<(Factor, u64)> {
    let scope = union_scope(f.scope(), g.scope())?;
    let shared: Vec<(usize, &BaseOp)> = scope
        .iter()
        .enumerate()
        .filter(|(_, v)| f.contains(v.id()) && g.contains(v.id()))
        .filter_map(|(i, v)| find_op(decls, v.id()).map(|op| (i, op)))
        .collect();
    for &(i, op) in &shared {
        if op.card() != scope[i].card() {
            return Err(Error::FrameMismatch {
                name: scope[i].name().to_owned(),
                left: scope[i].card(),
                right: op.card(),
            });
        }
    }
    if shared.is_empty() {
        let h = f.multiply(g)?;
        let n = h.len() as u64;
        return Ok((h, n));
    }

    let cards: Vec<usize> = scope.iter().map(Variable::card).collect();
    let sf = f.strides_in(&scope);
    let sg = g.strides_in(&scope);
    let sr = strides(&cards);

    // Private digits (everything except the shared bastard variables).
    let is_shared = |i: usize| shared.iter().any(|&(j, _)| j == i);
    let private: Vec<usize> = (0..scope.len()).filter(|&i| !is_shared(i)).collect();
    let pcards: Vec<usize> = private.iter().map(|&i| cards[i]).collect();
    let pick = |s: &[usize], idx: &[usize]| idx.iter().map(|&i| s[i]).collect::<Vec<_>>();
    let (pf, pg, pr) = (
        pick(&sf, &private),
        pick(&sg, &private),
        pick(&sr, &private),
    );

    // Enumerate joint values of the shared bastard variables once.
    let bcards: Vec<usize> = shared.iter().map(|&(i, _)| cards[i]).collect();
    let bstrides = strides(&bcards);
    let nb: usize = bcards.iter().product();
    let decode = |mut s: usize| {
        let mut vals = vec![0; bcards.len()];
        for k in (0..bcards.len()).rev() {
            vals[k] = s % bcards[k];
            s /= bcards[k];
        }
        vals
    };
    let values: Vec<Vec<usize>> = (0..nb).map(decode).collect();
    let offset = |vals: &[usize], st: &[usize]| -> usize {
        shared.iter().zip(vals).map(|(&(i, _), &v)| v * st[i]).sum()
    };
    let f_off: Vec<usize> = values.iter().map(|v| offset(v, &sf)).collect();
    let g_off: Vec<usize> = values.iter().map(|v| offset(v, &sg)).collect();
    let r_off: Vec<usize> = values.iter().map(|v| offset(v, &sr)).collect();
    let mut target = vec![0usize; nb * nb];
    for s1 in 0..nb {
        for s2 in 0..nb {
            let combined: usize = shared
                .iter()
                .enumerate()
                .map(|(k, &(_, op))| op.apply(values[s1][k], values[s2][k]) * bstrides[k])
                .sum();
            target[s1 * nb + s2] = r_off[combined];
        }
    }

    let ft = f.table();
    let gt = g.table();
    let mut table = vec![0.0; cards.iter().product()];
    walk(&pcards, [&pf, &pg, &pr], |[fo, go, ro]| {
        for s1 in 0..nb {
            let a = ft[fo + f_off[s1]];
            let row = &target[s1 * nb..(s1 + 1) * nb];
            for s2 in 0..nb {
                table[ro + row[s2]] += a * gt[go + g_off[s2]];
            }
        }
    });
    let ops = (pcards.iter().product::<usize>() * nb * nb) as u64;
    Ok((Factor::from_parts(scope, table), ops))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Heterogeneous,
    Normal,
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Heterogeneous => "heterogeneous",
            FactorKind::Normal => "normal",
        })
    }
}

/// One tidiness violation: a bastard variable and the normal factors that
/// break the rule for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TidyViolation {
    pub bastard: String,
    pub factors: Vec<String>,
    pub reason: String,
}

impl fmt::Display for TidyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "bastard `{}`: {} ({})",
            self.bastard,
            self.reason,
            self.factors.join(", ")
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TidyReport {
    pub violations: Vec<TidyViolation>,
}

impl TidyReport {
    pub fn is_tidy(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

/// A heterogeneous factorization: variables, bastard declarations,
/// heterogeneous factors, normal factors and the deputy bookkeeping.
///
/// Values are never mutated in place once built; transformations return a
/// new factorization.
#[derive(Clone, Debug)]
pub struct HetFactorization {
    variables: Vec<Variable>,
    bastards: Vec<BastardDecl>,
    het: Vec<Factor>,
    normal: Vec<Factor>,
    deputies: BTreeMap<VarId, Variable>,
}

/// Variables, declarations, heterogeneous and normal factors, deputies.
pub(crate) type Parts = (
    Vec<Variable>,
    Vec<BastardDecl>,
    Vec<Factor>,
    Vec<Factor>,
    BTreeMap<VarId, Variable>,
);

impl HetFactorization {
    pub fn new(
        variables: Vec<Variable>,
        bastards: Vec<BastardDecl>,
        het: Vec<Factor>,
        normal: Vec<Factor>,
        deputies: BTreeMap<VarId, Variable>,
    ) -> Result<Self> {
        let mut variables = variables;
        variables.sort();
        for w in variables.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateVariable(w[0].name().to_owned()));
            }
        }
        let known = |v: &Variable| {
            variables
                .binary_search(v)
                .map(|i| variables[i].card() == v.card())
                .unwrap_or(false)
        };
        for f in het.iter().chain(&normal) {
            if let Some(v) = f.scope().iter().find(|v| !known(v)) {
                return Err(Error::InvalidFactorization(format!(
                    "factor over [{}] mentions `{}` which is not a declared variable",
                    names(f.scope()),
                    v.name()
                )));
            }
        }
        for (i, d) in bastards.iter().enumerate() {
            if !known(&d.variable) {
                return Err(Error::InvalidFactorization(format!(
                    "bastard `{}` is not a declared variable",
                    d.variable.name()
                )));
            }
            if bastards[..i].iter().any(|o| o.variable == d.variable) {
                return Err(Error::InvalidFactorization(format!(
                    "bastard `{}` declared twice",
                    d.variable.name()
                )));
            }
        }
        let mut seen = Vec::new();
        for (&e, dep) in &deputies {
            if !bastards.iter().any(|d| d.variable.id() == e) {
                return Err(Error::InvalidFactorization(format!(
                    "deputy `{}` is attached to a non-bastard variable",
                    dep.name()
                )));
            }
            if bastards.iter().any(|d| d.variable == *dep) {
                return Err(Error::InvalidFactorization(format!(
                    "deputy `{}` is itself declared bastard",
                    dep.name()
                )));
            }
            if !known(dep) || seen.contains(dep) {
                return Err(Error::InvalidFactorization(format!(
                    "deputy `{}` is undeclared or shared",
                    dep.name()
                )));
            }
            seen.push(dep.clone());
        }
        Ok(Self {
            variables,
            bastards,
            het,
            normal,
            deputies,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn bastards(&self) -> &[BastardDecl] {
        &self.bastards
    }

    pub fn het_factors(&self) -> &[Factor] {
        &self.het
    }

    pub fn normal_factors(&self) -> &[Factor] {
        &self.normal
    }

    /// Map from bastard variable id to its deputy.
    pub fn deputies(&self) -> &BTreeMap<VarId, Variable> {
        &self.deputies
    }

    pub fn variable(&self, id: VarId) -> Option<&Variable> {
        self.variables
            .binary_search_by(|v| v.id().cmp(&id))
            .ok()
            .map(|i| &self.variables[i])
    }

    pub fn variable_by_name(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name() == name)
    }

    pub fn is_bastard(&self, id: VarId) -> bool {
        find_op(&self.bastards, id).is_some()
    }

    pub fn deputy_of(&self, bastard: VarId) -> Option<&Variable> {
        self.deputies.get(&bastard)
    }

    /// The bastard variable a deputy stands for, if `id` is a live deputy.
    pub fn bastard_of(&self, id: VarId) -> Option<&Variable> {
        self.deputies
            .iter()
            .find(|(_, d)| d.id() == id)
            .and_then(|(&e, _)| self.variable(e))
    }

    pub fn is_deputy(&self, id: VarId) -> bool {
        self.bastard_of(id).is_some()
    }

    /// Combination of all heterogeneous factors, folded in insertion order.
    pub fn combine_het(&self) -> Result<Factor> {
        fold_combine(self.het.iter(), &self.bastards).map(|(f, _)| f)
    }

    /// The function represented: `(⊗ het) · ∏ normal`.
    pub fn joint(&self) -> Result<Factor> {
        let mut f = self.combine_het()?;
        for g in &self.normal {
            f = f.multiply(g)?;
        }
        Ok(f)
    }

    /// Every bastard variable may occur in at most one normal factor, and
    /// that factor must mention exactly one other variable.
    pub fn tidiness(&self) -> TidyReport {
        let mut violations = Vec::new();
        for d in &self.bastards {
            let e = d.variable.id();
            let hits: Vec<&Factor> = self.normal.iter().filter(|g| g.contains(e)).collect();
            let describe = |fs: &[&Factor]| {
                fs.iter()
                    .map(|g| format!("[{}]", names(g.scope())))
                    .collect::<Vec<_>>()
            };
            if hits.len() > 1 {
                violations.push(TidyViolation {
                    bastard: d.variable.name().to_owned(),
                    factors: describe(&hits),
                    reason: format!("{} normal factors mention it", hits.len()),
                });
            } else if let Some(g) = hits.first() {
                if g.scope().len() != 2 {
                    violations.push(TidyViolation {
                        bastard: d.variable.name().to_owned(),
                        factors: describe(&hits),
                        reason: format!(
                            "its normal factor has {} variables instead of 2",
                            g.scope().len()
                        ),
                    });
                }
            }
        }
        TidyReport { violations }
    }

    pub fn is_tidy(&self) -> bool {
        self.tidiness().is_tidy()
    }

    pub(crate) fn into_parts(self) -> Parts {
        (
            self.variables,
            self.bastards,
            self.het,
            self.normal,
            self.deputies,
        )
    }

    pub(crate) fn from_parts_unchecked(
        variables: Vec<Variable>,
        bastards: Vec<BastardDecl>,
        het: Vec<Factor>,
        normal: Vec<Factor>,
        deputies: BTreeMap<VarId, Variable>,
    ) -> Self {
        Self {
            variables,
            bastards,
            het,
            normal,
            deputies,
        }
    }
}

/// Left fold of `⊗` over `factors`; the empty fold is the scalar 1.
pub(crate) fn fold_combine<'a>(
    factors: impl IntoIterator<Item = &'a Factor>,
    decls: &[BastardDecl],
) -> Result<(Factor, u64)> {
    let mut iter = factors.into_iter();
    let Some(first) = iter.next() else {
        return Ok((Factor::scalar(1.0), 0));
    };
    let mut acc = first.clone();
    let mut ops = 0;
    for f in iter {
        let (h, n) = combine_counted(&acc, f, decls)?;
        acc = h;
        ops += n;
    }
    Ok((acc, ops))
}
