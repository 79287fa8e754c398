//! Python bindings. The module is importable as `hetfact`.

use std::collections::BTreeMap;

use ::hetfact as core;
use core::format::{self, ParsedNetwork};
use core::oracle::{self, Comparison};
use core::{BaseOp, Error, Evidence, OpKind, QueryResult, Variable};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

fn err(e: Error) -> PyErr {
    match e {
        Error::UnknownVariable(_) => PyKeyError::new_err(e.to_string()),
        Error::CapExceeded { .. } | Error::Untidy(_) => PyRuntimeError::new_err(e.to_string()),
        Error::InvalidNetwork(ref v) | Error::InvalidOrdering(ref v) => {
            PyValueError::new_err(format!("{e}\n  {}", v.join("\n  ")))
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A frame value given either as its label or as an index.
#[derive(FromPyObject)]
enum Value {
    Index(usize),
    Label(String),
}

/// A validated Bayesian network.
#[pyclass(frozen, module = "hetfact")]
struct Network {
    inner: ParsedNetwork,
}

impl Network {
    fn targets(&self, names: &[String]) -> PyResult<Vec<Variable>> {
        names
            .iter()
            .map(|n| self.inner.variable(n).cloned().map_err(err))
            .collect()
    }

    fn evidence(&self, pairs: Option<BTreeMap<String, Value>>) -> PyResult<Evidence> {
        let mut ev = Evidence::new();
        for (name, value) in pairs.unwrap_or_default() {
            let v = self.inner.variable(&name).map_err(err)?;
            let x = match value {
                Value::Index(i) => i,
                Value::Label(l) => self.inner.value_of(v, &l).map_err(err)?,
            };
            ev.observe(v, x).map_err(err)?;
        }
        Ok(ev)
    }

    fn posterior<'py>(&self, py: Python<'py>, r: &QueryResult) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        let f = &r.posterior;
        for i in 0..f.len() {
            let labels: Vec<String> = f
                .scope()
                .iter()
                .zip(f.decode(i))
                .map(|(v, x)| self.inner.label(v, x))
                .collect();
            if labels.len() == 1 {
                out.set_item(&labels[0], f.table()[i])?;
            } else {
                out.set_item(PyTuple::new(py, labels)?, f.table()[i])?;
            }
        }
        Ok(out)
    }
}

fn comparison<'py>(py: Python<'py>, c: &Comparison) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("max_diff", c.max_diff)?;
    d.set_item("at", &c.location)?;
    d.set_item("passed", c.passed())?;
    Ok(d)
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn from_str(text: &str) -> PyResult<Self> {
        Ok(Network {
            inner: format::parse_network(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_str(&text)
    }

    /// The network used in the documentation examples.
    #[staticmethod]
    fn figure1() -> PyResult<Self> {
        Self::from_str(format::FIGURE1)
    }

    /// Variable names in declaration order.
    #[getter]
    fn variables(&self) -> Vec<String> {
        let mut vars = self.inner.network.variables();
        vars.sort();
        vars.iter().map(|v| v.name().to_owned()).collect()
    }

    /// Names of the causal-independence nodes.
    #[getter]
    fn bastards(&self) -> Vec<String> {
        self.inner
            .network
            .bastards()
            .map(|n| n.variable().name().to_owned())
            .collect()
    }

    fn labels(&self, name: &str) -> PyResult<Vec<String>> {
        let v = self.inner.variable(name).map_err(err)?;
        Ok((0..v.card()).map(|x| self.inner.label(v, x)).collect())
    }

    /// Posterior over `targets`. Keys of the returned `posterior` are value
    /// labels, or tuples of labels for several targets in declaration order.
    #[pyo3(signature = (targets, evidence = None, order = None, homogeneous = false))]
    fn query<'py>(
        &self,
        py: Python<'py>,
        targets: Vec<String>,
        evidence: Option<BTreeMap<String, Value>>,
        order: Option<Vec<String>>,
        homogeneous: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let t = self.targets(&targets)?;
        let ev = self.evidence(evidence)?;
        let engine = if homogeneous {
            core::homogeneous_query
        } else {
            core::query
        };
        let r = engine(&self.inner.network, &t, &ev, order.as_deref()).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("posterior", self.posterior(py, &r)?)?;
        out.set_item("normalizer", r.normalizer)?;
        out.set_item(
            "ordering",
            r.ordering.iter().map(|v| v.name()).collect::<Vec<_>>(),
        )?;
        out.set_item(
            "scope_sizes",
            r.stats
                .steps
                .iter()
                .map(|s| s.scope_size)
                .collect::<Vec<_>>(),
        )?;
        out.set_item("max_scope", r.stats.max_scope)?;
        out.set_item("total_ops", r.stats.total_ops)?;
        Ok(out)
    }

    /// Compares the engine with both brute-force oracles.
    #[pyo3(signature = (targets, evidence = None, tolerance = 1e-9, cap = oracle::DEFAULT_CAP as u64))]
    fn oracle_check<'py>(
        &self,
        py: Python<'py>,
        targets: Vec<String>,
        evidence: Option<BTreeMap<String, Value>>,
        tolerance: f64,
        cap: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let t = self.targets(&targets)?;
        let ev = self.evidence(evidence)?;
        let net = &self.inner.network;
        let r = core::query(net, &t, &ev, None).map_err(err)?;
        let check = oracle::oracle_check(net, &t, &ev, &r.posterior, tolerance, cap as u128)
            .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("brute", comparison(py, &check.brute)?)?;
        out.set_item("latent", comparison(py, &check.latent)?)?;
        out.set_item("passed", check.passed())?;
        Ok(out)
    }

    /// Canonical document text.
    fn to_json(&self) -> String {
        format::serialize_network(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({} variables, {} causal-independence nodes)",
            self.inner.network.nodes().len(),
            self.inner.network.bastards().count()
        )
    }
}

/// Every problem with a network document; empty means it is valid.
#[pyfunction]
fn validate(text: &str) -> Vec<String> {
    format::validate_document(text)
}

/// Law violations of an operator table; empty means it is usable.
#[pyfunction]
fn validate_operator(table: Vec<Vec<usize>>) -> Vec<String> {
    core::validate_base_op(&table)
        .violations
        .iter()
        .map(ToString::to_string)
        .collect()
}

/// Table of a built-in operator (`or`, `and`, `max`, `min`, `sat_add`,
/// `mod_add`) on a frame of `card` values.
#[pyfunction]
fn builtin_operator(name: &str, card: usize) -> PyResult<Vec<Vec<usize>>> {
    let kind: OpKind = name.parse().map_err(err)?;
    Ok(BaseOp::builtin(kind, card).map_err(err)?.rows())
}

#[pymodule]
#[pyo3(name = "hetfact")]
fn hetfact_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_operator, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_operator, m)?)?;
    m.add("FIGURE1", format::FIGURE1)?;
    Ok(())
}
