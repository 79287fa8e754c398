//! The `.net` network document format.
//!
//! A document is UTF-8 JSON:
//!
//! ```json
//! {
//!   "format_version": "1.0",
//!   "variables": [
//!     { "name": "x", "frame": ["no", "yes"] },
//!     { "name": "y", "frame": ["no", "yes"] }
//!   ],
//!   "nodes": [
//!     { "variable": "x", "parents": [], "spec": { "cpt": { "table": [0.4, 0.6] } } },
//!     { "variable": "y", "parents": ["x"],
//!       "spec": { "cpt": { "table": [0.9, 0.1, 0.2, 0.8] } } }
//!   ]
//! }
//! ```
//!
//! Every flat table is indexed over its scope taken in the order the
//! variables are declared in `variables`, with the last one varying fastest.
//! For `y` above the scope is `(x, y)`, so the table reads
//! `P(y=no|x=no), P(y=yes|x=no), P(y=no|x=yes), P(y=yes|x=yes)`.
//!
//! A causal-independence node replaces `cpt` with
//! `{ "noisy": { "op": ..., "contributions": [...], "leak": [...] } }`.
//! `op` is a builtin name (`or`, `and`, `max`, `min`, `sat_add`, `mod_add`)
//! or an explicit Cayley table (`[[0, 1], [1, 1]]`). `contributions[i]` is a
//! table over `{node, parents[i]}` and the optional `leak` is a table over
//! the node alone.
//!
//! Variable names may not contain whitespace, `,`, `=` or `'`; the apostrophe
//! is reserved for deputy variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{Factor, Variable};
use crate::network::{check_nodes, BayesianNetwork, Node, NodeKind, DEPUTY_SUFFIX};
use crate::op::{BaseOp, OpKind};

pub const FORMAT_VERSION: &str = "1.0";

/// The example network with three roots, three noisy-OR nodes and one leaf.
pub const FIGURE1: &str = include_str!("../networks/figure1.net");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub format_version: String,
    pub variables: Vec<VariableDoc>,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub frame: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub variable: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub spec: SpecDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecDoc {
    Cpt {
        table: Vec<f64>,
    },
    Noisy {
        op: OpDoc,
        contributions: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leak: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpDoc {
    Builtin(OpKind),
    Table(Vec<Vec<usize>>),
}

/// A parsed network plus the value labels of each variable, indexed by id.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedNetwork {
    pub network: BayesianNetwork,
    pub labels: Vec<Vec<String>>,
}

impl ParsedNetwork {
    pub fn label(&self, var: &Variable, value: usize) -> String {
        self.labels
            .get(var.id() as usize)
            .and_then(|l| l.get(value))
            .cloned()
            .unwrap_or_else(|| value.to_string())
    }

    /// Resolves `label` (or a numeric index) to a frame value of `var`.
    pub fn value_of(&self, var: &Variable, label: &str) -> Result<usize> {
        if let Some(pos) = self
            .labels
            .get(var.id() as usize)
            .and_then(|l| l.iter().position(|x| x == label))
        {
            return Ok(pos);
        }
        match label.parse::<usize>() {
            Ok(v) if v < var.card() => Ok(v),
            _ => Err(Error::InvalidEvidence(format!(
                "`{label}` is not a value of `{}`",
                var.name()
            ))),
        }
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.network
            .variable_by_name(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_owned()))
    }
}

fn bad_name(name: &str) -> Option<&'static str> {
    if name.is_empty() {
        Some("is empty")
    } else if name.contains(DEPUTY_SUFFIX) {
        Some("contains the reserved deputy suffix `'`")
    } else if name
        .chars()
        .any(|c| c.is_whitespace() || c == ',' || c == '=')
    {
        Some("contains whitespace, `,` or `=`")
    } else {
        None
    }
}

/// Parses a document's JSON without semantic checks.
pub fn parse_document(text: &str) -> Result<NetworkDocument> {
    serde_json::from_str(text)
        .map_err(|e| Error::Document(format!("line {}, column {}: {e}", e.line(), e.column())))
}

struct Builder<'a> {
    doc: &'a NetworkDocument,
    vars: Vec<Variable>,
    findings: Vec<String>,
}

impl<'a> Builder<'a> {
    fn lookup(&mut self, at: &str, name: &str) -> Option<Variable> {
        let hit = self.vars.iter().find(|v| v.name() == name).cloned();
        if hit.is_none() {
            self.findings
                .push(format!("{at}: `{name}` is not a declared variable"));
        }
        hit
    }

    fn table(&mut self, at: &str, scope: Vec<Variable>, table: &[f64]) -> Option<Factor> {
        // document order is declaration order, i.e. id order
        let mut scope = scope;
        scope.sort();
        match Factor::new(scope, table.to_vec()) {
            Ok(f) => Some(f),
            Err(e) => {
                self.findings.push(format!("{at}: {e}"));
                None
            }
        }
    }

    fn node(&mut self, i: usize, n: &NodeDoc) -> Option<Node> {
        let at = format!("nodes[{i}] ({})", n.variable);
        let var = self.lookup(&at, &n.variable)?;
        let mut parents = Vec::new();
        for p in &n.parents {
            parents.push(self.lookup(&at, p)?);
        }
        match &n.spec {
            SpecDoc::Cpt { table } => {
                let mut scope = parents.clone();
                scope.push(var.clone());
                let f = self.table(&format!("{at}.cpt.table"), scope, table)?;
                Some(Node::cpt(var, parents, f))
            }
            SpecDoc::Noisy {
                op,
                contributions,
                leak,
            } => {
                let op = match op {
                    OpDoc::Builtin(kind) => BaseOp::builtin(*kind, var.card()),
                    OpDoc::Table(rows) => BaseOp::from_table(rows.clone()),
                };
                let op = match op {
                    Ok(op) => op,
                    Err(e) => {
                        self.findings.push(format!("{at}.noisy.op: {e}"));
                        return None;
                    }
                };
                if contributions.len() != parents.len() {
                    self.findings.push(format!(
                        "{at}: {} contribution tables for {} parents",
                        contributions.len(),
                        parents.len()
                    ));
                    return None;
                }
                let mut fs = Vec::new();
                for (k, (p, t)) in parents.iter().zip(contributions).enumerate() {
                    let scope = vec![var.clone(), p.clone()];
                    fs.push(self.table(&format!("{at}.noisy.contributions[{k}]"), scope, t));
                }
                let fs: Option<Vec<Factor>> = fs.into_iter().collect();
                let leak = match leak {
                    Some(t) => {
                        Some(self.table(&format!("{at}.noisy.leak"), vec![var.clone()], t)?)
                    }
                    None => None,
                };
                Some(Node::noisy(var, parents, op, fs?, leak))
            }
        }
    }

    fn build(mut self) -> (Vec<Node>, Vec<String>) {
        let doc = self.doc;
        if doc.format_version != FORMAT_VERSION {
            self.findings.push(format!(
                "format_version `{}` is not supported (expected `{FORMAT_VERSION}`)",
                doc.format_version
            ));
        }
        for (i, v) in doc.variables.iter().enumerate() {
            if let Some(why) = bad_name(&v.name) {
                self.findings
                    .push(format!("variables[{i}]: name `{}` {why}", v.name));
            }
            if doc.variables[..i].iter().any(|w| w.name == v.name) {
                self.findings
                    .push(format!("variables[{i}]: `{}` declared twice", v.name));
            }
            for (k, l) in v.frame.iter().enumerate() {
                if v.frame[..k].contains(l) {
                    self.findings.push(format!(
                        "variables[{i}] ({}): duplicate value label `{l}`",
                        v.name
                    ));
                }
            }
            self.vars
                .push(Variable::new(i as u32, v.name.as_str(), v.frame.len()));
        }
        let mut nodes = Vec::new();
        for (i, n) in doc.nodes.iter().enumerate() {
            if let Some(node) = self.node(i, n) {
                nodes.push(node);
            }
        }
        for v in &self.vars {
            if !doc.nodes.iter().any(|n| n.variable == v.name()) {
                self.findings
                    .push(format!("variable `{}` has no node", v.name()));
            }
        }
        (nodes, self.findings)
    }
}

/// Every problem with a document; empty means it loads cleanly.
pub fn validate_document(text: &str) -> Vec<String> {
    let doc = match parse_document(text) {
        Ok(d) => d,
        Err(e) => return vec![e.to_string()],
    };
    let (nodes, mut findings) = Builder {
        doc: &doc,
        vars: Vec::new(),
        findings: Vec::new(),
    }
    .build();
    findings.extend(check_nodes(&nodes));
    findings
}

/// Converts a parsed document into a validated network.
pub fn from_document(doc: &NetworkDocument) -> Result<ParsedNetwork> {
    let (nodes, findings) = Builder {
        doc,
        vars: Vec::new(),
        findings: Vec::new(),
    }
    .build();
    if !findings.is_empty() {
        return Err(Error::InvalidNetwork(findings));
    }
    let network = BayesianNetwork::new(nodes)?;
    let labels = doc.variables.iter().map(|v| v.frame.clone()).collect();
    Ok(ParsedNetwork { network, labels })
}

pub fn parse_network(text: &str) -> Result<ParsedNetwork> {
    from_document(&parse_document(text)?)
}

fn flat(f: &Factor) -> Vec<f64> {
    f.table().to_vec()
}

/// Canonical document for a network. Variables are written in id order,
/// which is the order tables are laid out in.
pub fn to_document(parsed: &ParsedNetwork) -> NetworkDocument {
    let mut vars = parsed.network.variables();
    vars.sort();
    let variables = vars
        .iter()
        .map(|v| VariableDoc {
            name: v.name().to_owned(),
            frame: (0..v.card()).map(|x| parsed.label(v, x)).collect(),
        })
        .collect();
    let nodes = parsed
        .network
        .nodes()
        .iter()
        .map(|n| NodeDoc {
            variable: n.variable().name().to_owned(),
            parents: n.parents().iter().map(|p| p.name().to_owned()).collect(),
            spec: match n.kind() {
                NodeKind::Cpt(f) => SpecDoc::Cpt { table: flat(f) },
                NodeKind::Noisy {
                    op,
                    contributions,
                    leak,
                } => SpecDoc::Noisy {
                    op: match op.kind() {
                        Some(k) => OpDoc::Builtin(k),
                        None => OpDoc::Table(op.rows()),
                    },
                    contributions: contributions.iter().map(flat).collect(),
                    leak: leak.as_ref().map(flat),
                },
            },
        })
        .collect();
    NetworkDocument {
        format_version: FORMAT_VERSION.to_owned(),
        variables,
        nodes,
    }
}

pub fn serialize_network(parsed: &ParsedNetwork) -> String {
    serde_json::to_string_pretty(&to_document(parsed)).expect("documents always serialize")
}
