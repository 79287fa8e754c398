#![allow(dead_code)]

pub mod laws;

use std::collections::BTreeSet;

use hetfact::format::{self, ParsedNetwork};
use hetfact::{
    BaseOp, BastardDecl, BayesianNetwork, Evidence, Factor, HetFactorization, Node, OpKind, VarId,
    Variable,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn figure1() -> ParsedNetwork {
    format::parse_network(format::FIGURE1).unwrap()
}

pub fn var(net: &BayesianNetwork, name: &str) -> Variable {
    net.variable_by_name(name).unwrap().clone()
}

pub fn hvar(hf: &HetFactorization, name: &str) -> Variable {
    hetfact::elimination::resolve_variable(hf, name)
        .unwrap()
        .clone()
}

/// Strictly positive distribution of length `n`.
pub fn distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Table over `(parents.., child)` with the child fastest, one distribution
/// per parent configuration.
fn conditional(rng: &mut impl Rng, parents: &[Variable], child: &Variable) -> Factor {
    let rows: usize = parents.iter().map(Variable::card).product();
    let table: Vec<f64> = (0..rows)
        .flat_map(|_| distribution(rng, child.card()))
        .collect();
    let mut scope = parents.to_vec();
    scope.push(child.clone());
    Factor::new(scope, table).unwrap()
}

fn random_op(rng: &mut impl Rng, card: usize) -> BaseOp {
    let kinds: &[OpKind] = if card == 2 {
        &[OpKind::Or, OpKind::Max, OpKind::SatAdd]
    } else {
        &[OpKind::Max, OpKind::SatAdd]
    };
    BaseOp::builtin(*kinds.choose(rng).unwrap(), card).unwrap()
}

/// At most 8 variables with frames of 2 or 3 values, up to 3
/// causal-independence nodes and at most 3 parents per node.
pub fn random_network(rng: &mut impl Rng) -> BayesianNetwork {
    let n = rng.random_range(3..=8usize);
    let vars: Vec<Variable> = (0..n)
        .map(|i| Variable::new(i as VarId, format!("v{i}"), rng.random_range(2..=3)))
        .collect();
    let mut candidates: Vec<usize> = (1..n).collect();
    candidates.shuffle(rng);
    let n_bastards = rng.random_range(0..=3usize).min(candidates.len());
    let bastards: BTreeSet<usize> = candidates[..n_bastards].iter().copied().collect();

    let mut nodes = Vec::with_capacity(n);
    for (i, v) in vars.iter().enumerate() {
        let mut pool: Vec<usize> = (0..i).collect();
        pool.shuffle(rng);
        let lo = usize::from(bastards.contains(&i));
        let k = rng.random_range(lo..=3.min(i));
        let mut parent_ids: Vec<usize> = pool[..k].to_vec();
        parent_ids.sort();
        let parents: Vec<Variable> = parent_ids.iter().map(|&p| vars[p].clone()).collect();
        if bastards.contains(&i) {
            let op = random_op(rng, v.card());
            let contributions = parents
                .iter()
                .map(|p| conditional(rng, std::slice::from_ref(p), v))
                .collect();
            let leak = rng
                .random_bool(0.3)
                .then(|| Factor::new(vec![v.clone()], distribution(rng, v.card())).unwrap());
            nodes.push(Node::noisy(v.clone(), parents, op, contributions, leak));
        } else {
            let table = conditional(rng, &parents, v);
            nodes.push(Node::cpt(v.clone(), parents, table));
        }
    }
    BayesianNetwork::new(nodes).unwrap()
}

pub struct Case {
    pub net: BayesianNetwork,
    pub targets: Vec<Variable>,
    pub evidence: Evidence,
}

/// A random network with 1 or 2 targets and up to 2 observed non-targets.
pub fn random_case(seed: u64) -> Case {
    let mut rng = rng(seed);
    let net = random_network(&mut rng);
    let mut vars = net.variables();
    vars.shuffle(&mut rng);
    let n_targets = rng.random_range(1..=2usize);
    let targets = vars[..n_targets].to_vec();
    let mut evidence = Evidence::new();
    let n_obs = rng.random_range(0..=2usize).min(vars.len() - n_targets);
    for v in &vars[n_targets..n_targets + n_obs] {
        evidence.observe(v, rng.random_range(0..v.card())).unwrap();
    }
    Case {
        net,
        targets,
        evidence,
    }
}

/// Variables that an ordering for `targets` must eliminate.
pub fn to_eliminate(hf: &HetFactorization, targets: &[Variable]) -> Vec<Variable> {
    let mut skip: BTreeSet<VarId> = targets.iter().map(Variable::id).collect();
    for t in targets {
        if let Some(d) = hf.deputy_of(t.id()) {
            skip.insert(d.id());
        }
    }
    hf.variables()
        .iter()
        .filter(|v| !skip.contains(&v.id()))
        .cloned()
        .collect()
}

/// Uniformly chosen eligible variable at each step, so deputies always
/// follow their bastards.
pub fn random_ordering(
    rng: &mut impl Rng,
    hf: &HetFactorization,
    targets: &[Variable],
) -> Vec<Variable> {
    let mut pending = to_eliminate(hf, targets);
    let mut order = Vec::new();
    while !pending.is_empty() {
        let eligible: Vec<usize> = (0..pending.len())
            .filter(|&i| {
                hf.bastard_of(pending[i].id())
                    .is_none_or(|b| !pending.iter().any(|p| p.id() == b.id()))
            })
            .collect();
        let pick = *eligible.choose(rng).unwrap();
        order.push(pending.remove(pick));
    }
    order
}

/// Pool of variables for algebra tests: ids 0..6 with frames 2 or 3, the
/// first three declared as bastards.
pub struct Pool {
    pub vars: Vec<Variable>,
    pub decls: Vec<BastardDecl>,
}

impl Pool {
    pub fn new(rng: &mut impl Rng) -> Self {
        let vars: Vec<Variable> = (0..6)
            .map(|i| Variable::new(i, format!("x{i}"), rng.random_range(2..=3)))
            .collect();
        let decls = vars[..3]
            .iter()
            .map(|v| BastardDecl::new(v.clone(), random_op(rng, v.card())).unwrap())
            .collect();
        Pool { vars, decls }
    }

    pub fn is_bastard(&self, v: &Variable) -> bool {
        self.decls.iter().any(|d| d.variable() == v)
    }

    pub fn bastards(&self) -> Vec<Variable> {
        self.decls.iter().map(|d| d.variable().clone()).collect()
    }

    pub fn normals(&self) -> Vec<Variable> {
        self.vars
            .iter()
            .filter(|v| !self.is_bastard(v))
            .cloned()
            .collect()
    }

    /// Random non-negative factor over a random subset of `from` that always
    /// includes `must`.
    pub fn factor(
        &self,
        rng: &mut impl Rng,
        from: &[Variable],
        must: &[Variable],
        max: usize,
    ) -> Factor {
        let mut scope: Vec<Variable> = must.to_vec();
        let mut rest: Vec<Variable> = from.iter().filter(|v| !must.contains(v)).cloned().collect();
        rest.shuffle(rng);
        let extra = rng.random_range(0..=max.saturating_sub(scope.len()).min(rest.len()));
        scope.extend(rest.into_iter().take(extra));
        let n: usize = scope.iter().map(Variable::card).product();
        let table = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        Factor::new(scope, table).unwrap()
    }
}

/// Sorted variable names of a factor.
pub fn scope_names(f: &Factor) -> Vec<String> {
    let mut names: Vec<String> = f.scope().iter().map(|v| v.name().to_owned()).collect();
    names.sort();
    names
}

pub fn names(list: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = list.iter().map(|s| s.to_string()).collect();
    v.sort();
    v
}

/// Scopes of the factors present in `after` but not in `before`.
pub fn new_scopes(before: &HetFactorization, after: &HetFactorization) -> Vec<Vec<String>> {
    let old: Vec<&Factor> = before
        .het_factors()
        .iter()
        .chain(before.normal_factors())
        .collect();
    after
        .het_factors()
        .iter()
        .chain(after.normal_factors())
        .filter(|f| !old.contains(f))
        .map(scope_names)
        .collect()
}

/// Deputized, tidy factorization of `net` with evidence applied.
pub fn factorize(net: &BayesianNetwork, evidence: &Evidence) -> HetFactorization {
    let (dnet, deps) = hetfact::deputize(net).unwrap();
    hetfact::apply_evidence(&hetfact::build_hf(&dnet, &deps).unwrap(), evidence).unwrap()
}
