use std::path::PathBuf;
use std::process::Command;

use hetfact::cli::{self, run, run_with_engine, Outcome};
use hetfact::{query, BayesianNetwork, Evidence, Variable};
use serde_json::{json, Value};
use tempfile::TempDir;

fn figure1() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/networks/figure1.net").to_owned()
}

fn hetfact(args: &[&str]) -> Outcome {
    run(std::iter::once("hetfact").chain(args.iter().copied()))
}

fn write(dir: &TempDir, name: &str, doc: &Value) -> String {
    let path: PathBuf = dir.path().join(name);
    std::fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn record(out: &Outcome) -> Value {
    let line = out.stdout.lines().next().expect("a record");
    serde_json::from_str(line).unwrap()
}

fn prob(v: &Value) -> f64 {
    v.as_str().unwrap().parse().unwrap()
}

#[test]
fn validate_shipped_examples() {
    let out = hetfact(&["validate", &figure1()]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    assert!(out.stdout.ends_with(": ok\n"));
    let adder = concat!(env!("CARGO_MANIFEST_DIR"), "/networks/adder.net");
    assert_eq!(hetfact(&["validate", adder]).code, 0);
}

#[test]
fn validate_reports_operator_triple_and_negative_entry() {
    let dir = TempDir::new().unwrap();
    let doc = json!({
        "format_version": "1.0",
        "variables": [
            { "name": "c", "frame": ["0", "1"] },
            { "name": "e", "frame": ["0", "1"] }
        ],
        "nodes": [
            { "variable": "c", "parents": [], "spec": { "cpt": { "table": [1.2, -0.2] } } },
            { "variable": "e", "parents": ["c"], "spec": { "noisy": {
                "op": [[1, 1], [1, 0]],
                "contributions": [[1.0, 0.0, 0.5, 0.5]]
            } } }
        ]
    });
    let file = write(&dir, "bad.net", &doc);
    let out = hetfact(&["validate", &file, "--format", "machine"]);
    assert_eq!(out.code, cli::EXIT_VALIDATION);
    let rec = record(&out);
    assert_eq!(rec["clean"], false);
    let findings: Vec<&str> = rec["findings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    assert!(
        findings
            .iter()
            .any(|f| f.contains("associativity fails at (0, 0, 1)")),
        "{findings:?}"
    );
    assert!(findings.iter().any(|f| f.contains("-0.2")), "{findings:?}");
}

#[test]
fn validate_syntax_error_is_a_parse_failure() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.net");
    std::fs::write(
        &path,
        "{ \"format_version\": \"1.0\",\n  \"variables\": [ }",
    )
    .unwrap();
    let out = hetfact(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.code, cli::EXIT_PARSE);
    assert!(out.stdout.contains("line 2"), "{}", out.stdout);
}

#[test]
fn query_machine_record_carries_every_field() {
    let out = hetfact(&[
        "query",
        &figure1(),
        "--target",
        "e2",
        "--evidence",
        "y=0",
        "--format",
        "machine",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout.lines().count(), 1);
    let rec = record(&out);
    assert_eq!(rec["record"], "query");
    assert_eq!(rec["targets"], json!(["e2"]));
    assert_eq!(rec["evidence"], json!({ "y": "0" }));
    assert!(prob(&rec["normalizer"]) > 0.0);
    let rows = rec["posterior"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let total: f64 = rows.iter().map(|r| prob(&r["probability"])).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(rec["ordering"].as_array().unwrap().len() >= 7);
    assert!(!rec["stats"]["steps"].as_array().unwrap().is_empty());
    assert!(rec["stats"]["total_ops"].as_u64().unwrap() > 0);
}

#[test]
fn query_human_output_uses_nine_significant_digits() {
    let out = hetfact(&["query", &figure1(), "--target", "e2", "--evidence", "y=0"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.starts_with("P(e2 | y=0)\n"));
    let row = out.stdout.lines().nth(1).unwrap();
    let value = row.split_whitespace().last().unwrap();
    assert_eq!(value.trim_start_matches("0.").len(), 9, "{row}");
}

#[test]
fn query_accepts_documented_ordering_with_deputy_aliases() {
    let out = hetfact(&[
        "query",
        &figure1(),
        "--target",
        "e2",
        "--order",
        "e3,e3p,a,b,e1,e1p,c",
        "--format",
        "machine",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rec = record(&out);
    let order: Vec<&str> = rec["ordering"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(order[..7], ["e3", "e3'", "a", "b", "e1", "e1'", "c"]);
}

#[test]
fn query_rejects_deputy_before_bastard() {
    let out = hetfact(&[
        "query",
        &figure1(),
        "--target",
        "e2",
        "--order",
        "e1p,e1,e3,e3p,a,b,c",
    ]);
    assert_eq!(out.code, cli::EXIT_ORDERING);
    assert!(
        out.stderr.contains("deputy precedes bastard"),
        "{}",
        out.stderr
    );
    assert!(out.stderr.contains("e1'"));
}

#[test]
fn query_usage_errors() {
    let out = hetfact(&["query", &figure1(), "--target", "nope"]);
    assert_eq!(out.code, cli::EXIT_USAGE);
    assert!(out.stderr.contains("nope"));
    assert_eq!(hetfact(&["query", &figure1()]).code, cli::EXIT_USAGE);
    assert_eq!(
        hetfact(&["query", &figure1(), "--target", "e2", "--evidence", "y"]).code,
        cli::EXIT_USAGE
    );
    assert_eq!(
        hetfact(&["query", &figure1(), "--target", "e2", "--evidence", "y=7"]).code,
        cli::EXIT_USAGE
    );
    assert_eq!(
        hetfact(&["query", "/no/such/file.net", "--target", "e2"]).code,
        cli::EXIT_IO
    );
}

#[test]
fn query_inconsistent_evidence() {
    let dir = TempDir::new().unwrap();
    let doc = json!({
        "format_version": "1.0",
        "variables": [
            { "name": "x", "frame": ["off", "on"] },
            { "name": "y", "frame": ["off", "on"] }
        ],
        "nodes": [
            { "variable": "x", "parents": [], "spec": { "cpt": { "table": [1.0, 0.0] } } },
            { "variable": "y", "parents": ["x"], "spec": { "cpt": { "table": [0.5, 0.5, 0.5, 0.5] } } }
        ]
    });
    let file = write(&dir, "zero.net", &doc);
    let out = hetfact(&["query", &file, "--target", "y", "--evidence", "x=on"]);
    assert_eq!(out.code, cli::EXIT_INCONSISTENT);
    assert!(out.stderr.contains("x=1"), "{}", out.stderr);
}

#[test]
fn stats_compares_modes() {
    let out = hetfact(&[
        "stats",
        &figure1(),
        "--target",
        "e2",
        "--target",
        "y",
        "--order",
        "e3,e3p,a,b,e1,e1p,c",
        "--format",
        "machine",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let recs: Vec<Value> = out
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[0]["mode"], "heterogeneous");
    assert_eq!(recs[1]["mode"], "homogeneous");
    assert_eq!(recs[2]["record"], "stats_comparison");
    assert!(prob(&recs[2]["max_posterior_diff"]) < 1e-9);

    let only = hetfact(&[
        "stats",
        &figure1(),
        "--target",
        "e2",
        "--mode",
        "het",
        "--format",
        "machine",
    ]);
    assert_eq!(only.stdout.lines().count(), 1);
}

#[test]
fn stats_modes_coincide_without_bastards() {
    let dir = TempDir::new().unwrap();
    let doc = json!({
        "format_version": "1.0",
        "variables": [
            { "name": "x", "frame": ["0", "1"] },
            { "name": "y", "frame": ["0", "1", "2"] },
            { "name": "z", "frame": ["0", "1"] }
        ],
        "nodes": [
            { "variable": "x", "parents": [], "spec": { "cpt": { "table": [0.3, 0.7] } } },
            { "variable": "y", "parents": ["x"], "spec": { "cpt": { "table": [0.2, 0.3, 0.5, 0.6, 0.2, 0.2] } } },
            { "variable": "z", "parents": ["y"], "spec": { "cpt": { "table": [0.1, 0.9, 0.5, 0.5, 0.7, 0.3] } } }
        ]
    });
    let file = write(&dir, "chain.net", &doc);
    let out = hetfact(&["stats", &file, "--target", "z", "--format", "machine"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let recs: Vec<Value> = out
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs[0]["stats"], recs[1]["stats"]);
}

#[test]
fn oracle_check_passes_on_figure1() {
    let out = hetfact(&[
        "oracle-check",
        &figure1(),
        "--target",
        "e2",
        "--evidence",
        "y=0",
    ]);
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
    assert!(out.stdout.ends_with("PASS\n"));
}

#[test]
fn oracle_check_catches_corrupted_engine() {
    let buggy = |net: &BayesianNetwork, t: &[Variable], ev: &Evidence, o: Option<&[String]>| {
        let mut r = query(net, t, ev, o)?;
        // Flipped comparison: the two outcomes swap places.
        let mut table = r.posterior.table().to_vec();
        table.reverse();
        r.posterior = hetfact::Factor::new(r.posterior.scope().to_vec(), table)?;
        Ok(r)
    };
    let args = [
        "hetfact",
        "oracle-check",
        &figure1(),
        "--target",
        "e2",
        "--evidence",
        "y=0",
        "--format",
        "machine",
    ];
    let out = run_with_engine(args, &buggy);
    assert_eq!(out.code, cli::EXIT_ORACLE_FAIL);
    let rec = record(&out);
    assert_eq!(rec["passed"], false);
    assert_eq!(rec["brute"]["passed"], false);
    assert!(rec["brute"]["at"].as_str().unwrap().starts_with("e2="));
}

fn big_chain(n: usize) -> Value {
    let variables: Vec<Value> = (0..n)
        .map(|i| json!({ "name": format!("v{i}"), "frame": ["0", "1"] }))
        .collect();
    let nodes: Vec<Value> = (0..n)
        .map(|i| {
            if i == 0 {
                json!({ "variable": "v0", "parents": [], "spec": { "cpt": { "table": [0.5, 0.5] } } })
            } else {
                json!({
                    "variable": format!("v{i}"),
                    "parents": [format!("v{}", i - 1)],
                    "spec": { "cpt": { "table": [0.9, 0.1, 0.2, 0.8] } }
                })
            }
        })
        .collect();
    json!({ "format_version": "1.0", "variables": variables, "nodes": nodes })
}

#[test]
fn oracle_check_refuses_large_state_space() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "big.net", &big_chain(25));
    let out = hetfact(&["oracle-check", &file, "--target", "v24"]);
    assert_eq!(out.code, cli::EXIT_CAP);
    assert!(out.stderr.contains("33554432"), "{}", out.stderr);
    // The engine itself has no such limit.
    assert_eq!(hetfact(&["query", &file, "--target", "v24"]).code, 0);
}

#[test]
fn binary_reads_oracle_cap_from_environment() {
    let bin = env!("CARGO_BIN_EXE_hetfact");
    let status = |cap: &str| {
        Command::new(bin)
            .args(["oracle-check", &figure1(), "--target", "e2"])
            .env(cli::ORACLE_CAP_ENV, cap)
            .output()
            .unwrap()
    };
    let refused = status("16");
    assert_eq!(refused.status.code(), Some(cli::EXIT_CAP));
    let allowed = status("1024");
    assert_eq!(allowed.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&allowed.stdout).contains("PASS"));
}

#[test]
fn help_is_not_an_error() {
    let out = hetfact(&["--help"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("oracle-check"));
}
