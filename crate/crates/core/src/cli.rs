//! Command-line front end: `validate`, `query`, `stats` and `oracle-check`.
//!
//! [`run`] does all the work and returns the exit code with captured output,
//! so the binary is a thin wrapper and tests can drive commands in-process.
//!
//! Machine output (`--format machine`) is one JSON object per line. Every
//! record has a `"record"` field naming its kind. Probabilities and the
//! normalizer are decimal strings that round-trip to the exact `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::elimination::{homogeneous_query, query, EliminationStats, QueryResult};
use crate::error::Error;
use crate::factor::{Factor, Variable};
use crate::format::{self, ParsedNetwork};
use crate::network::{BayesianNetwork, Evidence};
use crate::oracle::{self, Comparison};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_ORDERING: i32 = 5;
pub const EXIT_INCONSISTENT: i32 = 6;
pub const EXIT_ORACLE_FAIL: i32 = 7;
pub const EXIT_CAP: i32 = 8;
pub const EXIT_IO: i32 = 9;
pub const EXIT_INTERNAL: i32 = 70;

/// Environment variable holding the default `--oracle-cap`.
pub const ORACLE_CAP_ENV: &str = "HETFACT_ORACLE_CAP";

#[derive(Debug, Parser)]
#[command(
    name = "hetfact",
    version,
    about = "Exact inference with causal-independence nodes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network file and list every problem found.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
        format: OutputFormat,
    },
    /// Posterior over the targets given the evidence.
    Query(QueryArgs),
    /// Compare heterogeneous elimination against the homogeneous baseline.
    Stats {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum, default_value_t = StatsMode::Both)]
        mode: StatsMode,
    },
    /// Check a query against both brute-force oracles.
    OracleCheck {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long, env = ORACLE_CAP_ENV, default_value_t = oracle::DEFAULT_CAP as u64)]
        oracle_cap: u64,
    },
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub file: PathBuf,
    /// Query variable; repeat for a joint posterior.
    #[arg(long = "target", required = true)]
    pub targets: Vec<String>,
    /// Observation `var=value`; the value is a frame label or an index.
    #[arg(long = "evidence", value_parser = parse_pair)]
    pub evidence: Vec<(String, String)>,
    /// Elimination ordering; write `e1p` for the deputy of `e1`.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatsMode {
    Both,
    Het,
    Homogeneous,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.trim().into(), v.trim().into())),
        _ => Err(format!("expected var=value, got `{s}`")),
    }
}

/// Captured result of one command.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, msg: impl Into<String>) -> Self {
        let mut stderr = msg.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Signature of the query engine used by `oracle-check`.
pub type Engine<'a> = &'a dyn Fn(
    &BayesianNetwork,
    &[Variable],
    &Evidence,
    Option<&[String]>,
) -> crate::Result<QueryResult>;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Document(_) => EXIT_PARSE,
        Error::InvalidOrdering(_) => EXIT_ORDERING,
        Error::InconsistentEvidence(_) => EXIT_INCONSISTENT,
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::UnknownVariable(_) | Error::InvalidEvidence(_) | Error::ValueOutOfRange { .. } => {
            EXIT_USAGE
        }
        Error::Untidy(_) | Error::InvalidFactorization(_) | Error::MissingAssignment(_) => {
            EXIT_INTERNAL
        }
        _ => EXIT_VALIDATION,
    }
}

fn error_outcome(e: &Error) -> Outcome {
    let mut msg = format!("error: {e}\n");
    for detail in match e {
        Error::InvalidNetwork(v) | Error::InvalidOrdering(v) | Error::Untidy(v) => v.as_slice(),
        _ => &[],
    } {
        let _ = writeln!(msg, "  {detail}");
    }
    Outcome::fail(exit_code(e), msg)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with_engine(args, &query)
}

/// Like [`run`], but `oracle-check` asks `engine` for the answer under test.
pub fn run_with_engine<I, T>(args: I, engine: Engine<'_>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome::fail(EXIT_USAGE, text)
            } else {
                Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    match cli.command {
        Command::Validate { file, format } => cmd_validate(&file, format),
        Command::Query(q) => with_network(&q, |ctx| cmd_query(ctx, &q)),
        Command::Stats { query, mode } => with_network(&query, |ctx| cmd_stats(ctx, &query, mode)),
        Command::OracleCheck {
            query,
            tolerance,
            oracle_cap,
        } => with_network(&query, |ctx| {
            cmd_oracle_check(ctx, &query, tolerance, oracle_cap as u128, engine)
        }),
    }
}

fn read(path: &Path) -> Result<String, Outcome> {
    std::fs::read_to_string(path).map_err(|e| {
        Outcome::fail(
            EXIT_IO,
            format!("error: cannot read {}: {e}", path.display()),
        )
    })
}

/// Network, resolved targets and evidence for a query-like command.
struct Context {
    parsed: ParsedNetwork,
    targets: Vec<Variable>,
    evidence: Evidence,
}

fn with_network(q: &QueryArgs, body: impl FnOnce(&Context) -> crate::Result<Outcome>) -> Outcome {
    let text = match read(&q.file) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let ctx = (|| {
        let parsed = format::parse_network(&text)?;
        let targets = q
            .targets
            .iter()
            .map(|t| parsed.variable(t).cloned())
            .collect::<crate::Result<Vec<_>>>()?;
        let mut evidence = Evidence::new();
        for (name, label) in &q.evidence {
            let v = parsed.variable(name)?;
            evidence.observe(v, parsed.value_of(v, label)?)?;
        }
        Ok(Context {
            parsed,
            targets,
            evidence,
        })
    })();
    match ctx.and_then(|c| body(&c)) {
        Ok(o) => o,
        Err(e) => error_outcome(&e),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Nine significant digits.
fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..9).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

fn assignment_labels(parsed: &ParsedNetwork, f: &Factor, idx: usize) -> Vec<(String, String)> {
    f.scope()
        .iter()
        .zip(f.decode(idx))
        .map(|(v, x)| (v.name().to_owned(), parsed.label(v, x)))
        .collect()
}

fn evidence_json(parsed: &ParsedNetwork, ev: &Evidence) -> Value {
    let mut m = Map::new();
    for (id, x) in ev.iter() {
        if let Some(n) = parsed.network.node(id) {
            m.insert(
                n.variable().name().into(),
                parsed.label(n.variable(), x).into(),
            );
        }
    }
    Value::Object(m)
}

fn evidence_text(parsed: &ParsedNetwork, ev: &Evidence) -> String {
    ev.iter()
        .filter_map(|(id, x)| {
            let v = parsed.network.node(id)?.variable();
            Some(format!("{}={}", v.name(), parsed.label(v, x)))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn posterior_json(parsed: &ParsedNetwork, f: &Factor) -> Value {
    (0..f.len())
        .map(|i| {
            let a: Map<String, Value> = assignment_labels(parsed, f, i)
                .into_iter()
                .map(|(k, v)| (k, v.into()))
                .collect();
            json!({ "assignment": a, "probability": num(f.table()[i]) })
        })
        .collect()
}

fn query_record(parsed: &ParsedNetwork, r: &QueryResult, record: &str) -> Value {
    json!({
        "record": record,
        "targets": r.targets.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "evidence": evidence_json(parsed, &r.evidence),
        "ordering": r.ordering.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "normalizer": num(r.normalizer),
        "posterior": posterior_json(parsed, &r.posterior),
        "stats": r.stats,
    })
}

fn write_posterior(out: &mut String, parsed: &ParsedNetwork, r: &QueryResult) {
    let targets: Vec<&str> = r.targets.iter().map(|v| v.name()).collect();
    let ev = evidence_text(parsed, &r.evidence);
    if ev.is_empty() {
        let _ = writeln!(out, "P({})", targets.join(", "));
    } else {
        let _ = writeln!(out, "P({} | {ev})", targets.join(", "));
    }
    let rows: Vec<(String, f64)> = (0..r.posterior.len())
        .map(|i| {
            let cell = assignment_labels(parsed, &r.posterior, i)
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(", ");
            (cell, r.posterior.table()[i])
        })
        .collect();
    let width = rows
        .iter()
        .map(|(c, _)| c.chars().count())
        .max()
        .unwrap_or(0);
    for (cell, p) in rows {
        let _ = writeln!(out, "  {cell:<width$}  {}", sig9(p));
    }
}

fn write_stats(out: &mut String, s: &EliminationStats) {
    let _ = writeln!(
        out,
        "  {:<4} {:<12} {:>4} {:>6} {:>5} {:>10}  scope",
        "step", "variable", "het", "normal", "size", "ops"
    );
    for (i, st) in s.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {:<4} {:<12} {:>4} {:>6} {:>5} {:>10}  {{{}}}",
            i + 1,
            st.variable,
            st.het_combined,
            st.normal_combined,
            st.scope_size,
            st.ops,
            st.scope.join(", ")
        );
    }
    let _ = writeln!(
        out,
        "  max scope {}, finalize ops {}, total ops {}",
        s.max_scope, s.finalize_ops, s.total_ops
    );
}

fn line(v: &Value) -> String {
    format!("{v}\n")
}

fn ordering_arg(q: &QueryArgs) -> Option<&[String]> {
    q.order.as_deref()
}

fn cmd_validate(path: &Path, fmt: OutputFormat) -> Outcome {
    let text = match read(path) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let (code, findings) = match format::parse_document(&text) {
        Err(e) => (EXIT_PARSE, vec![e.to_string()]),
        Ok(_) => {
            let f = format::validate_document(&text);
            (
                if f.is_empty() {
                    EXIT_OK
                } else {
                    EXIT_VALIDATION
                },
                f,
            )
        }
    };
    let stdout = match fmt {
        OutputFormat::Machine => line(&json!({
            "record": "validate",
            "file": path.display().to_string(),
            "clean": findings.is_empty(),
            "findings": findings,
        })),
        OutputFormat::Human if findings.is_empty() => format!("{}: ok\n", path.display()),
        OutputFormat::Human => {
            let mut s = format!("{}: {} problem(s)\n", path.display(), findings.len());
            for f in &findings {
                let _ = writeln!(s, "  {f}");
            }
            s
        }
    };
    Outcome {
        code,
        stdout,
        stderr: String::new(),
    }
}

fn cmd_query(ctx: &Context, q: &QueryArgs) -> crate::Result<Outcome> {
    let r = query(
        &ctx.parsed.network,
        &ctx.targets,
        &ctx.evidence,
        ordering_arg(q),
    )?;
    let stdout = match q.format {
        OutputFormat::Machine => line(&query_record(&ctx.parsed, &r, "query")),
        OutputFormat::Human => {
            let mut s = String::new();
            write_posterior(&mut s, &ctx.parsed, &r);
            let order: Vec<&str> = r.ordering.iter().map(|v| v.name()).collect();
            let _ = writeln!(s, "ordering: {}", order.join(", "));
            let _ = writeln!(s, "normalizer: {}", sig9(r.normalizer));
            write_stats(&mut s, &r.stats);
            s
        }
    };
    Ok(Outcome {
        code: EXIT_OK,
        stdout,
        stderr: String::new(),
    })
}

fn cmd_stats(ctx: &Context, q: &QueryArgs, mode: StatsMode) -> crate::Result<Outcome> {
    let net = &ctx.parsed.network;
    let order = ordering_arg(q);
    let het = match mode {
        StatsMode::Homogeneous => None,
        _ => Some(query(net, &ctx.targets, &ctx.evidence, order)?),
    };
    let hom = match mode {
        StatsMode::Het => None,
        _ => Some(homogeneous_query(net, &ctx.targets, &ctx.evidence, order)?),
    };
    let agreement = match (&het, &hom) {
        (Some(a), Some(b)) => Some(a.posterior.max_abs_diff(&b.posterior)?.0),
        _ => None,
    };
    let mut s = String::new();
    let runs = [("heterogeneous", &het), ("homogeneous", &hom)];
    match q.format {
        OutputFormat::Machine => {
            for (name, r) in runs {
                if let Some(r) = r {
                    let mut rec = query_record(&ctx.parsed, r, "stats");
                    rec["mode"] = name.into();
                    s.push_str(&line(&rec));
                }
            }
            if let (Some(a), Some(b), Some(d)) = (&het, &hom, agreement) {
                s.push_str(&line(&json!({
                    "record": "stats_comparison",
                    "max_scope": { "heterogeneous": a.stats.max_scope, "homogeneous": b.stats.max_scope },
                    "total_ops": { "heterogeneous": a.stats.total_ops, "homogeneous": b.stats.total_ops },
                    "max_posterior_diff": num(d),
                })));
            }
        }
        OutputFormat::Human => {
            for (name, r) in runs {
                if let Some(r) = r {
                    let _ = writeln!(s, "{name}:");
                    write_stats(&mut s, &r.stats);
                }
            }
            if let (Some(a), Some(b), Some(d)) = (&het, &hom, agreement) {
                let _ = writeln!(
                    s,
                    "max scope: heterogeneous {} vs homogeneous {}",
                    a.stats.max_scope, b.stats.max_scope
                );
                let _ = writeln!(
                    s,
                    "total ops: heterogeneous {} vs homogeneous {}",
                    a.stats.total_ops, b.stats.total_ops
                );
                let _ = writeln!(s, "posteriors differ by at most {d:e}");
            }
        }
    }
    Ok(Outcome {
        code: EXIT_OK,
        stdout: s,
        stderr: String::new(),
    })
}

fn comparison_json(c: &Comparison) -> Value {
    json!({
        "max_diff": num(c.max_diff),
        "at": c.location,
        "tolerance": num(c.tolerance),
        "passed": c.passed(),
    })
}

fn cmd_oracle_check(
    ctx: &Context,
    q: &QueryArgs,
    tol: f64,
    cap: u128,
    engine: Engine<'_>,
) -> crate::Result<Outcome> {
    let net = &ctx.parsed.network;
    let r = engine(net, &ctx.targets, &ctx.evidence, ordering_arg(q))?;
    let check = oracle::oracle_check(net, &ctx.targets, &ctx.evidence, &r.posterior, tol, cap)?;
    let passed = check.passed();
    let stdout = match q.format {
        OutputFormat::Machine => line(&json!({
            "record": "oracle_check",
            "targets": r.targets.iter().map(|v| v.name()).collect::<Vec<_>>(),
            "evidence": evidence_json(&ctx.parsed, &r.evidence),
            "brute": comparison_json(&check.brute),
            "latent": comparison_json(&check.latent),
            "passed": passed,
        })),
        OutputFormat::Human => {
            let mut s = String::new();
            for (name, c) in [("brute", &check.brute), ("latent", &check.latent)] {
                let _ = writeln!(
                    s,
                    "{name:<7} max diff {:e} at {{{}}} (tolerance {tol:e}): {}",
                    c.max_diff,
                    c.location,
                    if c.passed() { "pass" } else { "FAIL" }
                );
            }
            let _ = writeln!(s, "{}", if passed { "PASS" } else { "FAIL" });
            s
        }
    };
    Ok(Outcome {
        code: if passed { EXIT_OK } else { EXIT_ORACLE_FAIL },
        stdout,
        stderr: String::new(),
    })
}
