//! Exact inference for discrete Bayesian networks whose nodes may be
//! causal-independence models (noisy-OR, noisy-MAX, noisy adders and any
//! other commutative, associative combination of per-cause contributions).
//!
//! Networks are turned into a *heterogeneous factorization*: contribution
//! factors stay separate and are merged with an operator induced by the
//! node's base combination operator, while ordinary CPTs are multiplied.
//! Variable elimination then only ever touches the factors that mention the
//! variable being summed out, which keeps intermediate tables small.
//!
//! ```
//! use hetfact::format::parse_network;
//! use hetfact::{query, Evidence};
//!
//! let doc = parse_network(hetfact::format::FIGURE1).unwrap();
//! let e2 = doc.network.variable_by_name("e2").unwrap().clone();
//! let y = doc.network.variable_by_name("y").unwrap().clone();
//! let ev = Evidence::new().with(&y, 0).unwrap();
//! let result = query(&doc.network, &[e2], &ev, None).unwrap();
//! assert!((result.posterior.total() - 1.0).abs() < 1e-9);
//! ```

pub mod cli;
pub mod elimination;
pub mod error;
pub mod factor;
pub mod format;
pub mod hf;
pub mod network;
pub mod op;
pub mod oracle;

pub use elimination::{
    complete_ordering, finalize, force_sum_out_step, homogeneous_query, order_auto, projection,
    query, sum_out_step, validate_ordering, EliminationOrdering, EliminationStats,
    OrderingViolation, QueryResult, StepStats,
};
pub use error::{Error, Result};
pub use factor::{Assignment, Factor, VarId, Variable};
pub use hf::{
    general_combine, induced_combine, BastardDecl, FactorKind, HetFactorization, TidyReport,
};
pub use network::{
    apply_evidence, build_hf, cpt_from_contributions, deputing_factor, deputize, BayesianNetwork,
    DeputyMap, Evidence, Node, NodeKind,
};
pub use op::{validate_base_op, BaseOp, OpKind, OpReport, OpViolation};
