//! Brute-force reference computations used to check the elimination engine.
//!
//! Two routes are provided. [`brute_joint`] multiplies every node's full CPT,
//! materializing causal-independence nodes through their contribution
//! factors. [`latent_expand`] never touches the combination operator: it
//! rewrites every causal-independence node into explicit per-cause latent
//! variables plus a deterministic aggregation table, so everything downstream
//! is ordinary multiplication and summation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::factor::{Assignment, Factor, VarId, Variable};
use crate::network::{BayesianNetwork, Evidence, Node, NodeKind};

/// Default limit on the number of joint-table entries an oracle may build.
pub const DEFAULT_CAP: u128 = 1 << 20;

fn check_cap(required: u128, cap: u128) -> Result<()> {
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    Ok(())
}

/// Product of all node CPTs: a factor over every network variable.
pub fn brute_joint(net: &BayesianNetwork, cap: u128) -> Result<Factor> {
    check_cap(net.state_space(), cap)?;
    let mut joint = Factor::scalar(1.0);
    for n in net.nodes() {
        joint = joint.multiply(&n.cpt_factor()?)?;
    }
    Ok(joint)
}

/// Unnormalized `P(targets, evidence)` from the full joint.
pub fn brute_marginal(
    net: &BayesianNetwork,
    targets: &[Variable],
    evidence: &Evidence,
    cap: u128,
) -> Result<Factor> {
    let joint = brute_joint(net, cap)?;
    marginalize(joint, net.variables(), targets, evidence)
}

fn marginalize(
    mut joint: Factor,
    vars: Vec<Variable>,
    targets: &[Variable],
    evidence: &Evidence,
) -> Result<Factor> {
    for (id, value) in evidence.iter() {
        let v = vars
            .iter()
            .find(|v| v.id() == id)
            .ok_or_else(|| Error::UnknownVariable(format!("id {id}")))?;
        joint = joint.multiply(&Factor::indicator(v, value)?)?;
    }
    let keep: BTreeSet<VarId> = targets.iter().map(Variable::id).collect();
    for v in vars.iter().filter(|v| !keep.contains(&v.id())) {
        if joint.contains(v.id()) {
            joint = joint.sum_out(v)?;
        }
    }
    Ok(joint)
}

/// An all-normal network in which each causal-independence node `e` with
/// causes `c_1..c_m` has become `ξ_i ~ P(ξ_i | c_i)` plus a deterministic
/// `e = ξ_1 * ... * ξ_m`.
#[derive(Clone, Debug)]
pub struct LatentExpansion {
    pub network: BayesianNetwork,
    pub latents: Vec<Variable>,
}

/// Deterministic table `P(e | ξ_1..ξ_m) = [e = ξ_1 * ... * ξ_m]`.
fn aggregation_table(
    e: &Variable,
    latents: &[Variable],
    fold: impl Fn(&[usize]) -> usize,
) -> Result<Factor> {
    let mut scope = latents.to_vec();
    scope.push(e.clone());
    let cards: Vec<usize> = scope.iter().map(Variable::card).collect();
    let n: usize = cards.iter().product();
    let mut table = vec![0.0; n];
    let mut digits = vec![0usize; scope.len()];
    for slot in table.iter_mut() {
        let (xi, ev) = digits.split_at(latents.len());
        if fold(xi) == ev[0] {
            *slot = 1.0;
        }
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < cards[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    Factor::new(scope, table)
}

/// Rewrites every causal-independence node into latent per-cause variables.
/// Contribution (and leak) tables must be conditional distributions for the
/// latent CPTs to be valid.
pub fn latent_expand(net: &BayesianNetwork, cap: u128) -> Result<LatentExpansion> {
    let mut next = net
        .nodes()
        .iter()
        .map(|n| n.variable().id() + 1)
        .max()
        .unwrap_or(0);
    let mut nodes = Vec::new();
    let mut latents = Vec::new();
    for n in net.nodes() {
        let NodeKind::Noisy {
            op,
            contributions,
            leak,
        } = n.kind()
        else {
            nodes.push(n.clone());
            continue;
        };
        let e = n.variable();
        let width = contributions.len() + usize::from(leak.is_some());
        check_cap((e.card() as u128).pow(width as u32 + 1), cap)?;

        let mut xis = Vec::with_capacity(width);
        let mut fresh = |label: &str| {
            let v = Variable::new(next, format!("ξ[{}|{label}]", e.name()), e.card());
            next += 1;
            v
        };
        if let Some(l) = leak {
            let xi = fresh("leak");
            nodes.push(Node::cpt(xi.clone(), vec![], l.rename(e, &xi)?));
            xis.push(xi);
        }
        for (c, f) in n.parents().iter().zip(contributions) {
            let xi = fresh(c.name());
            nodes.push(Node::cpt(xi.clone(), vec![c.clone()], f.rename(e, &xi)?));
            xis.push(xi);
        }
        let agg = aggregation_table(e, &xis, |vals| op.fold(vals.iter().copied()).unwrap())?;
        nodes.push(Node::cpt(e.clone(), xis.clone(), agg));
        latents.extend(xis);
    }
    Ok(LatentExpansion {
        network: BayesianNetwork::new(nodes)?,
        latents,
    })
}

impl LatentExpansion {
    /// Joint over the original variables: the expanded joint with every
    /// latent summed out. Each latent is summed as soon as the last table
    /// mentioning it has been multiplied in, which keeps the tables small.
    pub fn marginal_joint(&self, cap: u128) -> Result<Factor> {
        let latent_ids: BTreeSet<VarId> = self.latents.iter().map(Variable::id).collect();
        let originals: u128 = self
            .network
            .nodes()
            .iter()
            .filter(|n| !latent_ids.contains(&n.variable().id()))
            .map(|n| n.variable().card() as u128)
            .product();
        check_cap(originals, cap)?;
        let nodes = self.network.nodes();
        let mut joint = Factor::scalar(1.0);
        for (i, n) in nodes.iter().enumerate() {
            joint = joint.multiply(&n.cpt_factor()?)?;
            let done: Vec<Variable> = joint
                .scope()
                .iter()
                .filter(|v| latent_ids.contains(&v.id()))
                .filter(|v| {
                    !nodes[i + 1..]
                        .iter()
                        .any(|m| m.variable() == *v || m.parents().contains(v))
                })
                .cloned()
                .collect();
            for v in done {
                joint = joint.sum_out(&v)?;
            }
        }
        Ok(joint)
    }

    /// Unnormalized `P(targets, evidence)` through the latent route.
    pub fn marginal(&self, targets: &[Variable], evidence: &Evidence, cap: u128) -> Result<Factor> {
        let joint = self.marginal_joint(cap)?;
        let vars = joint.scope().to_vec();
        marginalize(joint, vars, targets, evidence)
    }
}

/// Result of comparing two factors entry by entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub max_diff: f64,
    pub at: Assignment,
    /// Human-readable form of `at`, e.g. `x=1, y=0`.
    pub location: String,
    pub tolerance: f64,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.max_diff <= self.tolerance
    }
}

pub fn compare(f: &Factor, g: &Factor, tol: f64) -> Result<Comparison> {
    let (max_diff, idx) = f.max_abs_diff(g)?;
    let location = f
        .scope()
        .iter()
        .zip(f.decode(idx))
        .map(|(v, x)| format!("{}={x}", v.name()))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Comparison {
        max_diff,
        at: f.assignment_at(idx),
        location,
        tolerance: tol,
    })
}

/// Engine output checked against both oracle routes.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub brute: Comparison,
    pub latent: Comparison,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.brute.passed() && self.latent.passed()
    }
}

fn conditioned(f: Factor) -> Result<Factor> {
    let z = f.total();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::InconsistentEvidence(
            "(oracle normalizer is 0)".into(),
        ));
    }
    Ok(f.scale(1.0 / z))
}

/// Compares a posterior over `targets` given `evidence` with the
/// conditioned brute-force marginal and with the latent-expansion marginal.
pub fn oracle_check(
    net: &BayesianNetwork,
    targets: &[Variable],
    evidence: &Evidence,
    posterior: &Factor,
    tol: f64,
    cap: u128,
) -> Result<OracleCheck> {
    let brute = conditioned(brute_marginal(net, targets, evidence, cap)?)?;
    let latent = conditioned(latent_expand(net, cap)?.marginal(targets, evidence, cap)?)?;
    Ok(OracleCheck {
        brute: compare(posterior, &brute, tol)?,
        latent: compare(posterior, &latent, tol)?,
    })
}
