//! Variable elimination over tidy heterogeneous factorizations.
//!
//! Summing out `z` combines only the factors that mention `z`: the
//! heterogeneous ones with `⊗`, the normal ones with `×`. If both groups are
//! non-empty their product is summed and kept as a heterogeneous factor.
//! Deputies of bastard variables may only be eliminated after their bastard;
//! deputies of target bastards are never eliminated and are folded back into
//! their bastard at the end.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor::{Factor, VarId, Variable};
use crate::hf::{fold_combine, FactorKind, HetFactorization};
use crate::network::{
    apply_evidence, build_hf, deputize, BayesianNetwork, Evidence, DEPUTY_SUFFIX,
};

/// Short alias accepted for deputies in user-written orderings (`e1p` for `e1'`).
pub const DEPUTY_ALIAS_SUFFIX: &str = "p";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderingViolation {
    UnknownVariable(String),
    Duplicate(String),
    IsTarget(String),
    TargetDeputy(String),
    Missing(String),
    DeputyBeforeBastard { deputy: String, bastard: String },
    BadTarget(String),
}

impl fmt::Display for OrderingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownVariable(v) => write!(f, "`{v}` is not a variable of the factorization"),
            Self::Duplicate(v) => write!(f, "`{v}` appears more than once"),
            Self::IsTarget(v) => write!(f, "`{v}` is a target and cannot be eliminated"),
            Self::TargetDeputy(v) => {
                write!(
                    f,
                    "`{v}` is the deputy of a target and cannot be eliminated"
                )
            }
            Self::Missing(v) => write!(f, "partition incomplete: `{v}` is never eliminated"),
            Self::DeputyBeforeBastard { deputy, bastard } => {
                write!(
                    f,
                    "deputy precedes bastard: `{deputy}` comes before `{bastard}`"
                )
            }
            Self::BadTarget(v) => write!(f, "`{v}` cannot be a target"),
        }
    }
}

/// A sequence of variables to sum out plus the variables to keep.
#[derive(Clone, Debug, PartialEq)]
pub struct EliminationOrdering {
    pub order: Vec<Variable>,
    pub targets: Vec<Variable>,
}

fn required_eliminations(hf: &HetFactorization, targets: &[Variable]) -> BTreeSet<VarId> {
    let target_ids: BTreeSet<VarId> = targets.iter().map(Variable::id).collect();
    let target_deputies: BTreeSet<VarId> = target_ids
        .iter()
        .filter_map(|&t| hf.deputy_of(t))
        .map(Variable::id)
        .collect();
    hf.variables()
        .iter()
        .map(Variable::id)
        .filter(|id| !target_ids.contains(id) && !target_deputies.contains(id))
        .collect()
}

/// Checks that `order` eliminates exactly the non-target variables (minus
/// deputies of target bastards) and that every deputy follows its bastard.
pub fn validate_ordering(
    hf: &HetFactorization,
    targets: &[Variable],
    order: &[Variable],
) -> Vec<OrderingViolation> {
    let mut out = Vec::new();
    for t in targets {
        if hf.variable(t.id()).is_none() || hf.is_deputy(t.id()) {
            out.push(OrderingViolation::BadTarget(t.name().to_owned()));
        }
    }
    let target_ids: BTreeSet<VarId> = targets.iter().map(Variable::id).collect();
    let required = required_eliminations(hf, targets);
    let mut seen: BTreeMap<VarId, usize> = BTreeMap::new();
    for (pos, v) in order.iter().enumerate() {
        if hf.variable(v.id()).is_none() {
            out.push(OrderingViolation::UnknownVariable(v.name().to_owned()));
            continue;
        }
        if seen.insert(v.id(), pos).is_some() {
            out.push(OrderingViolation::Duplicate(v.name().to_owned()));
        }
        if target_ids.contains(&v.id()) {
            out.push(OrderingViolation::IsTarget(v.name().to_owned()));
        } else if !required.contains(&v.id()) {
            out.push(OrderingViolation::TargetDeputy(v.name().to_owned()));
        }
    }
    for id in &required {
        if !seen.contains_key(id) {
            out.push(OrderingViolation::Missing(
                hf.variable(*id).unwrap().name().to_owned(),
            ));
        }
    }
    for (&e, d) in hf.deputies() {
        if let (Some(&pe), Some(&pd)) = (seen.get(&e), seen.get(&d.id())) {
            if pd < pe {
                out.push(OrderingViolation::DeputyBeforeBastard {
                    deputy: d.name().to_owned(),
                    bastard: hf.variable(e).unwrap().name().to_owned(),
                });
            }
        }
    }
    out
}

/// Greedy min-fill ordering over the interaction graph of all factor scopes.
/// A deputy becomes eligible once its bastard has been eliminated. Ties break
/// on fewer neighbours, then on lower variable id.
pub fn order_auto(hf: &HetFactorization, targets: &[Variable]) -> EliminationOrdering {
    complete_ordering(hf, targets, &[])
}

/// `prefix` followed by a min-fill ordering of whatever it leaves out.
/// The prefix is kept verbatim, so any problem with it survives for
/// [`validate_ordering`] to report.
pub fn complete_ordering(
    hf: &HetFactorization,
    targets: &[Variable],
    prefix: &[Variable],
) -> EliminationOrdering {
    let mut adj: BTreeMap<VarId, BTreeSet<VarId>> = hf
        .variables()
        .iter()
        .map(|v| (v.id(), BTreeSet::new()))
        .collect();
    for f in hf.het_factors().iter().chain(hf.normal_factors()) {
        for a in f.scope() {
            for b in f.scope() {
                if a != b {
                    adj.get_mut(&a.id()).unwrap().insert(b.id());
                }
            }
        }
    }
    let mut pending = required_eliminations(hf, targets);
    let mut order = Vec::with_capacity(pending.len());
    let eliminate = |adj: &mut BTreeMap<VarId, BTreeSet<VarId>>, id: VarId| {
        let Some(nb) = adj.remove(&id) else { return };
        for a in &nb {
            let set = adj.get_mut(a).unwrap();
            set.remove(&id);
            set.extend(nb.iter().copied().filter(|b| b != a));
        }
    };
    for v in prefix {
        eliminate(&mut adj, v.id());
        pending.remove(&v.id());
        order.push(v.clone());
    }
    while !pending.is_empty() {
        let best = pending
            .iter()
            .copied()
            .filter(|&id| hf.bastard_of(id).is_none_or(|e| !pending.contains(&e.id())))
            .min_by_key(|&id| {
                let nb: Vec<VarId> = adj[&id].iter().copied().collect();
                let mut fill = 0usize;
                for (i, a) in nb.iter().enumerate() {
                    for b in &nb[i + 1..] {
                        if !adj[a].contains(b) {
                            fill += 1;
                        }
                    }
                }
                (fill, nb.len(), id)
            })
            .expect("a bastard is always eligible before its deputy");
        eliminate(&mut adj, best);
        pending.remove(&best);
        order.push(hf.variable(best).unwrap().clone());
    }
    EliminationOrdering {
        order,
        targets: targets.to_vec(),
    }
}

/// Bookkeeping for one summed-out variable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepStats {
    pub variable: String,
    /// Heterogeneous factors combined with `⊗`.
    pub het_combined: usize,
    /// Normal factors multiplied together.
    pub normal_combined: usize,
    /// Union scope of every factor touched, including the eliminated variable.
    pub scope: Vec<String>,
    pub scope_size: usize,
    /// Multiply-accumulates for combination plus one per product entry and
    /// one per summed entry.
    pub ops: u64,
    /// Kind of the factor added back; `None` when nothing mentioned the variable.
    pub produced: Option<String>,
    /// The variable was in no factor and was simply dropped.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EliminationStats {
    pub steps: Vec<StepStats>,
    pub finalize_ops: u64,
    pub total_ops: u64,
    pub max_scope: usize,
}

impl EliminationStats {
    fn push(&mut self, step: StepStats) {
        self.total_ops += step.ops;
        self.max_scope = self.max_scope.max(step.scope_size);
        self.steps.push(step);
    }

    pub fn step(&self, variable: &str) -> Option<&StepStats> {
        self.steps.iter().find(|s| s.variable == variable)
    }
}

/// Sums `z` out of a tidy factorization, returning the new factorization and
/// the step's statistics. `z` may not be a target-free deputy whose bastard is
/// still present.
pub fn sum_out_step(hf: &HetFactorization, z: &Variable) -> Result<(HetFactorization, StepStats)> {
    if let Some(e) = hf.bastard_of(z.id()) {
        return Err(Error::InvalidOrdering(vec![
            OrderingViolation::DeputyBeforeBastard {
                deputy: z.name().to_owned(),
                bastard: e.name().to_owned(),
            }
            .to_string(),
        ]));
    }
    force_sum_out_step(hf, z)
}

/// [`sum_out_step`] without the deputy-order precondition. Eliminating a
/// deputy before its bastard does not preserve the represented function;
/// this exists to demonstrate exactly that.
pub fn force_sum_out_step(
    hf: &HetFactorization,
    z: &Variable,
) -> Result<(HetFactorization, StepStats)> {
    let z = hf
        .variable(z.id())
        .ok_or_else(|| Error::UnknownVariable(z.name().to_owned()))?
        .clone();
    let (mut vars, mut bastards, het, normal, mut deputies) = hf.clone().into_parts();
    let (het_z, mut het_rest): (Vec<Factor>, Vec<Factor>) =
        het.into_iter().partition(|f| f.contains(z.id()));
    let (norm_z, mut norm_rest): (Vec<Factor>, Vec<Factor>) =
        normal.into_iter().partition(|f| f.contains(z.id()));
    let (k, m) = (het_z.len(), norm_z.len());

    let mut ops = 0u64;
    let mut scope: Vec<Variable> = Vec::new();
    for f in het_z.iter().chain(&norm_z) {
        for v in f.scope() {
            if !scope.contains(v) {
                scope.push(v.clone());
            }
        }
    }
    scope.sort();

    let mut produced = None;
    if k > 0 || m > 0 {
        let f = if k > 0 {
            let (f, n) = fold_combine(&het_z, &bastards)?;
            ops += n;
            Some(f)
        } else {
            None
        };
        let g = if m > 0 {
            let mut it = norm_z.iter();
            let mut g = it.next().unwrap().clone();
            for h in it {
                g = g.multiply(h)?;
                ops += g.len() as u64;
            }
            Some(g)
        } else {
            None
        };
        let (joint, kind) = match (f, g) {
            (None, Some(g)) => (g, FactorKind::Normal),
            (Some(f), None) => (f, FactorKind::Heterogeneous),
            (Some(f), Some(g)) => {
                let p = f.multiply(&g)?;
                ops += p.len() as u64;
                (p, FactorKind::Heterogeneous)
            }
            (None, None) => unreachable!(),
        };
        ops += joint.len() as u64;
        let h = joint.sum_out(&z)?;
        match kind {
            FactorKind::Normal => norm_rest.push(h),
            FactorKind::Heterogeneous => het_rest.push(h),
        }
        produced = Some(kind.to_string());
    }

    vars.retain(|v| *v != z);
    bastards.retain(|d| *d.variable() != z);
    deputies.retain(|&e, d| e != z.id() && *d != z);
    let out = HetFactorization::from_parts_unchecked(vars, bastards, het_rest, norm_rest, deputies);
    let stats = StepStats {
        variable: z.name().to_owned(),
        het_combined: k,
        normal_combined: m,
        scope_size: scope.len(),
        scope: scope.iter().map(|v| v.name().to_owned()).collect(),
        ops,
        produced,
        degenerate: k == 0 && m == 0,
    };
    Ok((out, stats))
}

/// Final step once only targets (and deputies of target bastards) remain:
/// combine the heterogeneous factors, replace each deputing function by its
/// diagonal and each deputy by its bastard, then multiply everything.
pub fn finalize(hf: &HetFactorization, targets: &[Variable]) -> Result<(Factor, u64)> {
    let target_ids: BTreeSet<VarId> = targets.iter().map(Variable::id).collect();
    let pairs: Vec<(Variable, Variable)> = hf
        .deputies()
        .iter()
        .filter(|(e, _)| target_ids.contains(e))
        .map(|(&e, d)| (hf.variable(e).unwrap().clone(), d.clone()))
        .collect();
    let leftover: Vec<&Variable> = hf
        .variables()
        .iter()
        .filter(|v| !target_ids.contains(&v.id()) && !pairs.iter().any(|(_, d)| d == *v))
        .collect();
    if !leftover.is_empty() {
        return Err(Error::InvalidOrdering(vec![format!(
            "variables left at the end that are neither targets nor their deputies: {}",
            leftover
                .iter()
                .map(|v| v.name())
                .collect::<Vec<_>>()
                .join(", ")
        )]));
    }

    let (mut result, mut ops) = fold_combine(hf.het_factors(), hf.bastards())?;
    let collapse_all = |mut f: Factor| -> Result<Factor> {
        for (e, d) in &pairs {
            if f.contains(d.id()) {
                f = f.collapse(d, e)?;
            }
        }
        Ok(f)
    };
    result = collapse_all(result)?;
    for g in hf.normal_factors() {
        let g = collapse_all(g.clone())?;
        result = result.multiply(&g)?;
        ops += result.len() as u64;
    }
    for t in targets {
        if !result.contains(t.id()) {
            result = result.multiply(&Factor::ones(vec![t.clone()])?)?;
        }
    }
    Ok((result, ops))
}

/// Sums every variable of `order` out of `hf` and finalizes, asserting
/// tidiness after each step.
pub fn projection(
    hf: &HetFactorization,
    targets: &[Variable],
    order: &[Variable],
) -> Result<(Factor, EliminationStats)> {
    let report = hf.tidiness();
    if !report.is_tidy() {
        return Err(Error::Untidy(report.messages()));
    }
    let violations = validate_ordering(hf, targets, order);
    if !violations.is_empty() {
        return Err(Error::InvalidOrdering(
            violations.iter().map(ToString::to_string).collect(),
        ));
    }
    let mut stats = EliminationStats::default();
    let mut current = hf.clone();
    for z in order {
        let (next, step) = sum_out_step(&current, z)?;
        let report = next.tidiness();
        if !report.is_tidy() {
            return Err(Error::Untidy(report.messages()));
        }
        stats.push(step);
        current = next;
    }
    let (f, ops) = finalize(&current, targets)?;
    stats.finalize_ops = ops;
    stats.total_ops += ops;
    Ok((f, stats))
}

/// Looks a variable up by name, accepting `<bastard>p` for a deputy.
pub fn resolve_variable<'a>(hf: &'a HetFactorization, name: &str) -> Result<&'a Variable> {
    if let Some(v) = hf.variable_by_name(name) {
        return Ok(v);
    }
    if let Some(stem) = name.strip_suffix(DEPUTY_ALIAS_SUFFIX) {
        if let Some(v) = hf.variable_by_name(&format!("{stem}{DEPUTY_SUFFIX}")) {
            return Ok(v);
        }
    }
    Err(Error::UnknownVariable(name.to_owned()))
}

/// Outcome of a posterior query.
#[derive(Clone, Debug)]
pub struct QueryResult {
    pub targets: Vec<Variable>,
    pub evidence: Evidence,
    pub posterior: Factor,
    pub normalizer: f64,
    pub stats: EliminationStats,
    pub ordering: Vec<Variable>,
}

fn check_targets(net: &BayesianNetwork, targets: &[Variable]) -> Result<()> {
    for t in targets {
        match net.node(t.id()) {
            Some(n) if n.variable().card() == t.card() => {}
            _ => return Err(Error::UnknownVariable(t.name().to_owned())),
        }
    }
    Ok(())
}

fn describe_evidence(net: &BayesianNetwork, ev: &Evidence) -> String {
    let parts: Vec<String> = ev
        .iter()
        .map(|(id, v)| {
            let name = net.node(id).map_or("?", |n| n.variable().name());
            format!("{name}={v}")
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn normalize(
    net: &BayesianNetwork,
    evidence: &Evidence,
    marginal: Factor,
) -> Result<(Factor, f64)> {
    let z = marginal.total();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::InconsistentEvidence(describe_evidence(
            net, evidence,
        )));
    }
    Ok((marginal.scale(1.0 / z), z))
}

/// `P(targets | evidence)` by heterogeneous elimination. `ordering` names
/// variables of the deputized network; deputies may be written `e'` or `ep`.
/// Variables it leaves out are eliminated afterwards in min-fill order.
pub fn query(
    net: &BayesianNetwork,
    targets: &[Variable],
    evidence: &Evidence,
    ordering: Option<&[String]>,
) -> Result<QueryResult> {
    check_targets(net, targets)?;
    let (dnet, deputies) = deputize(net)?;
    let hf = apply_evidence(&build_hf(&dnet, &deputies)?, evidence)?;
    let prefix = match ordering {
        Some(names) => names
            .iter()
            .map(|n| resolve_variable(&hf, n).cloned())
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let order = complete_ordering(&hf, targets, &prefix).order;
    let (marginal, stats) = projection(&hf, targets, &order)?;
    let (posterior, normalizer) = normalize(net, evidence, marginal)?;
    Ok(QueryResult {
        targets: targets.to_vec(),
        evidence: evidence.clone(),
        posterior,
        normalizer,
        stats,
        ordering: order,
    })
}

/// All-normal factorization of `net` with every causal-independence CPT
/// materialized up front.
pub fn homogeneous_hf(net: &BayesianNetwork) -> Result<HetFactorization> {
    let normal = net
        .nodes()
        .iter()
        .map(|n| n.cpt_factor())
        .collect::<Result<Vec<_>>>()?;
    HetFactorization::new(net.variables(), vec![], vec![], normal, BTreeMap::new())
}

/// Baseline: ordinary variable elimination on the materialized network.
/// Deputy names in `ordering` are skipped since the baseline has none.
pub fn homogeneous_query(
    net: &BayesianNetwork,
    targets: &[Variable],
    evidence: &Evidence,
    ordering: Option<&[String]>,
) -> Result<QueryResult> {
    check_targets(net, targets)?;
    let hf = apply_evidence(&homogeneous_hf(net)?, evidence)?;
    let prefix = match ordering {
        Some(names) => {
            let mut order = Vec::new();
            for n in names {
                if let Some(v) = hf.variable_by_name(n) {
                    order.push(v.clone());
                    continue;
                }
                let stem = n
                    .strip_suffix(DEPUTY_SUFFIX)
                    .or_else(|| n.strip_suffix(DEPUTY_ALIAS_SUFFIX));
                match stem.and_then(|s| net.variable_by_name(s)) {
                    Some(v) if net.node(v.id()).is_some_and(|n| n.is_bastard()) => {}
                    _ => return Err(Error::UnknownVariable(n.clone())),
                }
            }
            order
        }
        None => Vec::new(),
    };
    let order = complete_ordering(&hf, targets, &prefix).order;
    let (marginal, stats) = projection(&hf, targets, &order)?;
    let (posterior, normalizer) = normalize(net, evidence, marginal)?;
    Ok(QueryResult {
        targets: targets.to_vec(),
        evidence: evidence.clone(),
        posterior,
        normalizer,
        stats,
        ordering: order,
    })
}
