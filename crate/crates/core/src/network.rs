//! Bayesian networks with ordinary CPT nodes and causal-independence
//! ("bastard") nodes, plus the transforms that turn a network into a tidy
//! heterogeneous factorization.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::factor::{names, Factor, VarId, Variable};
use crate::hf::{induced_combine, BastardDecl, HetFactorization};
use crate::op::BaseOp;

/// Suffix appended to a bastard variable's name to name its deputy.
pub const DEPUTY_SUFFIX: &str = "'";

/// Tolerance for CPT column sums.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    /// Full conditional table over the node variable and its parents.
    Cpt(Factor),
    /// Per-parent contribution factors combined under `op`. `contributions[i]`
    /// is over `{variable, parents[i]}`; `leak` is an optional extra
    /// contribution over `{variable}` alone.
    Noisy {
        op: BaseOp,
        contributions: Vec<Factor>,
        leak: Option<Factor>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    variable: Variable,
    parents: Vec<Variable>,
    kind: NodeKind,
}

impl Node {
    pub fn cpt(variable: Variable, parents: Vec<Variable>, table: Factor) -> Self {
        Self {
            variable,
            parents,
            kind: NodeKind::Cpt(table),
        }
    }

    pub fn noisy(
        variable: Variable,
        parents: Vec<Variable>,
        op: BaseOp,
        contributions: Vec<Factor>,
        leak: Option<Factor>,
    ) -> Self {
        Self {
            variable,
            parents,
            kind: NodeKind::Noisy {
                op,
                contributions,
                leak,
            },
        }
    }

    pub fn variable(&self) -> &Variable {
        &self.variable
    }

    pub fn parents(&self) -> &[Variable] {
        &self.parents
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn is_bastard(&self) -> bool {
        matches!(self.kind, NodeKind::Noisy { .. })
    }

    /// The node's full conditional table (materialized for bastard nodes).
    pub fn cpt_factor(&self) -> Result<Factor> {
        match &self.kind {
            NodeKind::Cpt(f) => Ok(f.clone()),
            NodeKind::Noisy { .. } => cpt_from_contributions(self),
        }
    }

    fn map_variable(&self, from: &Variable, to: &Variable) -> Result<Node> {
        let swap = |f: &Factor| {
            if f.contains(from.id()) {
                f.rename(from, to)
            } else {
                Ok(f.clone())
            }
        };
        let parents = self
            .parents
            .iter()
            .map(|p| if p == from { to.clone() } else { p.clone() })
            .collect();
        let kind = match &self.kind {
            NodeKind::Cpt(f) => NodeKind::Cpt(swap(f)?),
            NodeKind::Noisy {
                op,
                contributions,
                leak,
            } => NodeKind::Noisy {
                op: op.clone(),
                contributions: contributions.iter().map(swap).collect::<Result<_>>()?,
                leak: leak.as_ref().map(swap).transpose()?,
            },
        };
        Ok(Node {
            variable: self.variable.clone(),
            parents,
            kind,
        })
    }
}

/// Fold the contribution factors of a bastard node (and its leak, if any)
/// with the induced operator, giving `P(e | parents)`.
pub fn cpt_from_contributions(node: &Node) -> Result<Factor> {
    let NodeKind::Noisy {
        op,
        contributions,
        leak,
    } = &node.kind
    else {
        return Err(Error::InvalidNetwork(vec![format!(
            "`{}` is not a causal-independence node",
            node.variable.name()
        )]));
    };
    if node.parents.is_empty() {
        return Err(Error::InvalidNetwork(vec![format!(
            "causal-independence node `{}` has no parents",
            node.variable.name()
        )]));
    }
    let e = &node.variable;
    let mut acc: Option<Factor> = leak.clone();
    for f in contributions {
        acc = Some(match acc {
            None => f.clone(),
            Some(a) => induced_combine(&a, f, e, op)?,
        });
    }
    acc.ok_or_else(|| Error::InvalidNetwork(vec![format!("`{}` has no contributions", e.name())]))
}

/// Variable-to-value observations over original network variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    observed: BTreeMap<VarId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, var: &Variable, value: usize) -> Result<()> {
        if value >= var.card() {
            return Err(Error::ValueOutOfRange {
                name: var.name().to_owned(),
                value,
                card: var.card(),
            });
        }
        self.observed.insert(var.id(), value);
        Ok(())
    }

    pub fn with(mut self, var: &Variable, value: usize) -> Result<Self> {
        self.observe(var, value)?;
        Ok(self)
    }

    pub fn get(&self, id: VarId) -> Option<usize> {
        self.observed.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.observed.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }
}

/// Bastard variable id → its deputy.
pub type DeputyMap = BTreeMap<VarId, Variable>;

#[derive(Clone, Debug, PartialEq)]
pub struct BayesianNetwork {
    nodes: Vec<Node>,
}

impl BayesianNetwork {
    /// Validates and builds a network. All problems are reported together.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let findings = check_nodes(&nodes);
        if !findings.is_empty() {
            return Err(Error::InvalidNetwork(findings));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: VarId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.variable.id() == id)
    }

    pub fn variables(&self) -> Vec<Variable> {
        self.nodes.iter().map(|n| n.variable.clone()).collect()
    }

    pub fn variable_by_name(&self, name: &str) -> Option<&Variable> {
        self.nodes
            .iter()
            .map(|n| &n.variable)
            .find(|v| v.name() == name)
    }

    pub fn bastards(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_bastard())
    }

    pub fn children(&self, id: VarId) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(move |n| n.parents.iter().any(|p| p.id() == id))
    }

    /// Product of all frame sizes.
    pub fn state_space(&self) -> u128 {
        self.nodes
            .iter()
            .map(|n| n.variable.card() as u128)
            .product()
    }

    fn next_id(&self) -> VarId {
        self.nodes
            .iter()
            .map(|n| n.variable.id() + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Everything wrong with a node list; empty means valid.
pub fn check_nodes(nodes: &[Node]) -> Vec<String> {
    let mut out = Vec::new();
    let mut ids = BTreeMap::new();
    let mut names = BTreeSet::new();
    for n in nodes {
        let v = &n.variable;
        if ids.insert(v.id(), v.clone()).is_some() {
            out.push(format!(
                "variable id {} is defined by more than one node",
                v.id()
            ));
        }
        if !names.insert(v.name().to_owned()) {
            out.push(format!("variable `{}` is defined more than once", v.name()));
        }
        if v.card() < 2 {
            out.push(format!(
                "variable `{}` has frame size {} (< 2)",
                v.name(),
                v.card()
            ));
        }
    }
    for n in nodes {
        let v = &n.variable;
        for (i, p) in n.parents.iter().enumerate() {
            match ids.get(&p.id()) {
                None => out.push(format!(
                    "`{}`: parent `{}` is not defined",
                    v.name(),
                    p.name()
                )),
                Some(q) if q.card() != p.card() || q.name() != p.name() => out.push(format!(
                    "`{}`: parent `{}` does not match its definition",
                    v.name(),
                    p.name()
                )),
                _ => {}
            }
            if p == v {
                out.push(format!("`{}` lists itself as a parent", v.name()));
            }
            if n.parents[..i].contains(p) {
                out.push(format!(
                    "`{}`: parent `{}` listed twice",
                    v.name(),
                    p.name()
                ));
            }
        }
        out.extend(check_node_tables(n));
    }
    if let Some(cycle) = find_cycle(nodes) {
        out.push(format!(
            "parent relation has a cycle: {}",
            cycle.join(" -> ")
        ));
    }
    out
}

fn same_scope(f: &Factor, want: &[&Variable]) -> bool {
    let mut want: Vec<&Variable> = want.to_vec();
    want.sort();
    f.scope().len() == want.len()
        && f.scope()
            .iter()
            .zip(want)
            .all(|(a, b)| a.id() == b.id() && a.card() == b.card())
}

/// Columns of `cpt` summed over `var`; every entry must be 1.
fn normalization_error(cpt: &Factor, var: &Variable) -> Option<f64> {
    let sums = cpt.sum_out(var).ok()?;
    sums.table()
        .iter()
        .map(|s| (s - 1.0).abs())
        .filter(|d| *d > NORMALIZATION_TOL)
        .reduce(f64::max)
}

fn check_node_tables(n: &Node) -> Vec<String> {
    let v = &n.variable;
    let mut out = Vec::new();
    match &n.kind {
        NodeKind::Cpt(f) => {
            let mut want: Vec<&Variable> = n.parents.iter().collect();
            want.push(v);
            if !same_scope(f, &want) {
                out.push(format!(
                    "`{}`: CPT scope [{}] should be the node and its parents",
                    v.name(),
                    names(f.scope())
                ));
            } else if let Some(d) = normalization_error(f, v) {
                out.push(format!(
                    "`{}`: CPT columns do not sum to 1 (off by {d:.3e})",
                    v.name()
                ));
            }
        }
        NodeKind::Noisy {
            op,
            contributions,
            leak,
        } => {
            if n.parents.is_empty() {
                out.push(format!(
                    "`{}`: causal-independence node needs at least one parent",
                    v.name()
                ));
            }
            if op.card() != v.card() {
                out.push(format!(
                    "`{}`: operator is over {} values but the variable has {}",
                    v.name(),
                    op.card(),
                    v.card()
                ));
            }
            if contributions.len() != n.parents.len() {
                out.push(format!(
                    "`{}`: {} contribution factors for {} parents",
                    v.name(),
                    contributions.len(),
                    n.parents.len()
                ));
            }
            for (p, f) in n.parents.iter().zip(contributions) {
                if !same_scope(f, &[v, p]) {
                    out.push(format!(
                        "`{}`: contribution of `{}` has scope [{}]",
                        v.name(),
                        p.name(),
                        names(f.scope())
                    ));
                }
            }
            if let Some(l) = leak {
                if !same_scope(l, &[v]) {
                    out.push(format!(
                        "`{}`: leak has scope [{}], expected [{}]",
                        v.name(),
                        names(l.scope()),
                        v.name()
                    ));
                }
            }
            if out.is_empty() {
                match cpt_from_contributions(n) {
                    Ok(cpt) => {
                        if let Some(d) = normalization_error(&cpt, v) {
                            out.push(format!(
                                "`{}`: combined contributions do not form a CPT (a column is off by {d:.3e})",
                                v.name()
                            ));
                        }
                    }
                    Err(e) => out.push(format!("`{}`: {e}", v.name())),
                }
            }
        }
    }
    out
}

fn find_cycle(nodes: &[Node]) -> Option<Vec<String>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let index: BTreeMap<VarId, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.variable.id(), i))
        .collect();
    let mut state = vec![0u8; nodes.len()];
    let mut stack: Vec<usize> = Vec::new();

    fn visit(
        i: usize,
        nodes: &[Node],
        index: &BTreeMap<VarId, usize>,
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<String>> {
        state[i] = 1;
        stack.push(i);
        for p in &nodes[i].parents {
            let Some(&j) = index.get(&p.id()) else {
                continue;
            };
            if state[j] == 1 {
                let start = stack.iter().position(|&k| k == j).unwrap();
                let mut cycle: Vec<String> = stack[start..]
                    .iter()
                    .map(|&k| nodes[k].variable.name().to_owned())
                    .collect();
                cycle.push(nodes[j].variable.name().to_owned());
                return Some(cycle);
            }
            if state[j] == 0 {
                if let Some(c) = visit(j, nodes, index, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[i] = 2;
        None
    }

    (0..nodes.len()).find_map(|i| {
        if state[i] == 0 {
            visit(i, nodes, &index, &mut state, &mut stack)
        } else {
            None
        }
    })
}

/// Identity table over `{e, e'}`: 1 where the two agree, 0 elsewhere.
pub fn deputing_factor(e: &Variable, deputy: &Variable) -> Result<Factor> {
    if e.card() != deputy.card() {
        return Err(Error::FrameMismatch {
            name: deputy.name().to_owned(),
            left: e.card(),
            right: deputy.card(),
        });
    }
    let n = e.card();
    let table = (0..n * n)
        .map(|i| if i / n == i % n { 1.0 } else { 0.0 })
        .collect();
    Factor::new(vec![e.clone(), deputy.clone()], table)
}

/// Adds a deputy `e'` for every bastard node `e`, re-pointing every child of
/// `e` at `e'` and making `e'` a child of `e` with an identity CPT.
pub fn deputize(net: &BayesianNetwork) -> Result<(BayesianNetwork, DeputyMap)> {
    let mut deputies = DeputyMap::new();
    for (id, n) in (net.next_id()..).zip(net.bastards()) {
        let e = &n.variable;
        let name = format!("{}{}", e.name(), DEPUTY_SUFFIX);
        deputies.insert(e.id(), Variable::new(id, name, e.card()));
    }
    let mut nodes = Vec::with_capacity(net.nodes.len() + deputies.len());
    for n in &net.nodes {
        let mut node = n.clone();
        for p in n.parents.iter() {
            if let Some(d) = deputies.get(&p.id()) {
                node = node.map_variable(p, d)?;
            }
        }
        nodes.push(node);
        if let Some(d) = deputies.get(&n.variable.id()) {
            let e = n.variable.clone();
            nodes.push(Node::cpt(
                d.clone(),
                vec![e.clone()],
                deputing_factor(&e, d)?,
            ));
        }
    }
    Ok((BayesianNetwork::new(nodes)?, deputies))
}

/// The tidy factorization of a deputized network: every contribution (and
/// leak) factor is heterogeneous, every ordinary CPT and every deputing
/// function is normal.
pub fn build_hf(net: &BayesianNetwork, deputies: &DeputyMap) -> Result<HetFactorization> {
    let deputy_ids: BTreeSet<VarId> = deputies.values().map(Variable::id).collect();
    let mut bastards = Vec::new();
    let mut het = Vec::new();
    let mut normal = Vec::new();
    for n in &net.nodes {
        match &n.kind {
            NodeKind::Noisy {
                op,
                contributions,
                leak,
            } => {
                bastards.push(BastardDecl::new(n.variable.clone(), op.clone())?);
                het.extend(leak.iter().cloned());
                het.extend(contributions.iter().cloned());
            }
            NodeKind::Cpt(f) => {
                if deputy_ids.contains(&n.variable.id()) {
                    let (e, _) = deputies
                        .iter()
                        .find(|(_, d)| d.id() == n.variable.id())
                        .unwrap();
                    let e = net.node(*e).unwrap().variable.clone();
                    normal.push(deputing_factor(&e, &n.variable)?);
                } else {
                    normal.push(f.clone());
                }
            }
        }
    }
    for (e, d) in deputies {
        if !net.node(*e).is_some_and(Node::is_bastard) || net.node(d.id()).is_none() {
            return Err(Error::InvalidFactorization(format!(
                "deputy `{}` does not belong to this network",
                d.name()
            )));
        }
    }
    let hf = HetFactorization::new(net.variables(), bastards, het, normal, deputies.clone())?;
    let report = hf.tidiness();
    if !report.is_tidy() {
        return Err(Error::Untidy(report.messages()));
    }
    Ok(hf)
}

/// Multiplies the factorization by the evidence indicator while keeping it
/// tidy: normal variables get a fresh indicator factor, bastard variables
/// have the indicator folded into their deputing function.
pub fn apply_evidence(hf: &HetFactorization, ev: &Evidence) -> Result<HetFactorization> {
    if ev.is_empty() {
        return Ok(hf.clone());
    }
    let (vars, bastards, het, mut normal, deputies) = hf.clone().into_parts();
    for (id, value) in ev.iter() {
        let var = hf
            .variable(id)
            .ok_or_else(|| Error::InvalidEvidence(format!("unknown variable id {id}")))?
            .clone();
        if hf.is_deputy(id) {
            return Err(Error::InvalidEvidence(format!(
                "`{}` is a deputy variable and cannot be observed",
                var.name()
            )));
        }
        let indicator =
            Factor::indicator(&var, value).map_err(|e| Error::InvalidEvidence(e.to_string()))?;
        if hf.is_bastard(id) {
            let slots: Vec<usize> = normal
                .iter()
                .enumerate()
                .filter(|(_, g)| g.contains(id))
                .map(|(i, _)| i)
                .collect();
            match slots.as_slice() {
                [i] => normal[*i] = normal[*i].multiply(&indicator)?,
                [] => {
                    return Err(Error::InvalidEvidence(format!(
                        "bastard `{}` has no deputing function to carry evidence",
                        var.name()
                    )));
                }
                _ => return Err(Error::Untidy(hf.tidiness().messages())),
            }
        } else {
            normal.push(indicator);
        }
    }
    let out = HetFactorization::from_parts_unchecked(vars, bastards, het, normal, deputies);
    let report = out.tidiness();
    if !report.is_tidy() {
        return Err(Error::Untidy(report.messages()));
    }
    Ok(out)
}
