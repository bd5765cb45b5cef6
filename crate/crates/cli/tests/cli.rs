//! End-to-end tests of the `admit` binary: exit-code contract, flag
//! validation, and byte-identical outputs across reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_admit");
const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");

fn population() -> String {
    format!("{FIXTURES}/theorem_population.json")
}

fn admit(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn admit")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Every failing invocation leaves a one-line JSON diagnostic on stderr.
fn stderr_diag(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_else(|| panic!("empty stderr"));
    serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr not JSON ({e}): {text}"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).expect("read output")).expect("output is JSON")
}

#[test]
fn validate_accepts_the_bundled_population() {
    let out = admit(&["validate", "--population", &population()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["kind"], "validation_report");
    assert_eq!(doc["all_hold"], true);
    let names: Vec<&str> = doc["assumptions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["geographic-disproportion", "urm-minority", "rich-dominance", "capacity-bound"]
    );
}

#[test]
fn validate_reports_violations_and_exits_nonzero() {
    // Swap the poor/rich URM counts: URM now skews rich, breaking the
    // geographic-disproportion assumption while the rest still hold.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pop.json");
    let pop = admit_core::population::two_by_two(
        [10.0, 30.0, 40.0, 20.0],
        admit_core::gamma::GammaParams::new(2.0, 0.3).unwrap(),
        admit_core::gamma::GammaParams::new(2.0, 0.15).unwrap(),
        admit_core::score::ScoreScale::new(0.0, 4.0).unwrap(),
    )
    .unwrap();
    admit_core::io::emit_population(&path, &pop, &admit_core::population::Capacity::new(50.0).unwrap())
        .unwrap();

    let out = admit(&["validate", "--population", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let doc = stdout_json(&out);
    assert_eq!(doc["all_hold"], false);
    let geo = &doc["assumptions"][0];
    assert_eq!(geo["name"], "geographic-disproportion");
    assert_eq!(geo["holds"], false);
    assert_eq!(stderr_diag(&out)["kind"], "assumptions-violated");
}

#[test]
fn solve_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = admit(&[
            "solve",
            "--population",
            &population(),
            "--procedure",
            "default",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_json(&a)["kind"], "solve_report");
}

#[test]
fn quota_at_one_coincides_with_top_percentage() {
    let dir = tempfile::tempdir().unwrap();
    let quota = dir.path().join("quota.json");
    let toppct = dir.path().join("toppct.json");
    let out = admit(&[
        "solve", "--population", &population(),
        "--procedure", "quota", "--eta", "1",
        "--out", quota.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let out = admit(&[
        "solve", "--population", &population(),
        "--procedure", "top-percentage",
        "--out", toppct.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let cells = |doc: &Value| -> Vec<(String, String, f64)> {
        doc["outcome"]["thresholds"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| {
                (
                    c["group"].as_str().unwrap().to_string(),
                    c["region"].as_str().unwrap().to_string(),
                    c["value"].as_f64().unwrap(),
                )
            })
            .collect()
    };
    let q = cells(&read_json(&quota));
    let t = cells(&read_json(&toppct));
    assert_eq!(q.len(), t.len());
    for ((qg, qr, qv), (tg, tr, tv)) in q.iter().zip(&t) {
        assert_eq!((qg, qr), (tg, tr));
        assert!((qv - tv).abs() <= 1e-10 * qv.abs().max(1.0), "({qg},{qr}): {qv} vs {tv}");
    }
}

#[test]
fn eta_is_required_for_quota_and_plus_factor_and_rejected_elsewhere() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let run = |procedure: &str, eta: Option<&str>| {
        let mut args = vec![
            "solve".to_string(),
            "--population".into(),
            population(),
            "--procedure".into(),
            procedure.into(),
        ];
        if let Some(e) = eta {
            args.push("--eta".into());
            args.push(e.into());
        }
        args.push("--out".into());
        args.push(out_path.to_str().unwrap().into());
        admit(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };

    for (procedure, eta) in [
        ("quota", None),
        ("plus-factor", None),
        ("default", Some("2")),
        ("top-percentage", Some("2")),
    ] {
        let out = run(procedure, eta);
        assert_eq!(code(&out), 1, "{procedure} with eta={eta:?}");
        assert_eq!(stderr_diag(&out)["kind"], "invalid-parameter");
    }
    assert_eq!(code(&run("quota", Some("1.5"))), 0);
    assert_eq!(code(&run("plus-factor", Some("0.9"))), 0);
}

#[test]
fn check_exit_code_tracks_coverage_and_conclusion() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("check.json");
    let pop = population();
    let report_path = report.to_str().unwrap().to_string();
    let check = |theorem: &str, eta: Option<&str>| {
        let mut args = vec!["check", "--population", &pop, "--theorem", theorem];
        if let Some(e) = eta {
            args.push("--eta");
            args.push(e);
        }
        args.push("--out");
        args.push(&report_path);
        admit(&args)
    };

    // Covered and holding: quota separation at η = 1.9.
    let out = check("1", Some("1.9"));
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("conclusion holds"));
    let doc = read_json(&report);
    assert_eq!(doc["kind"], "check_report");
    assert_eq!(doc["theorem"]["theorem"], 1);
    assert_eq!(doc["theorem"]["covered"], true);
    assert_eq!(doc["theorem"]["conclusion_holds"], true);

    // η = 1.2 gives no separation guarantee: not covered, exit 1, but the
    // report is still written for inspection.
    let out = check("1", Some("1.2"));
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("not covered"));
    assert_eq!(stderr_diag(&out)["kind"], "check-failed");
    assert_eq!(read_json(&report)["theorem"]["covered"], false);

    let out = check("2", Some("0.9"));
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let out = check("3", None);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&report);
    assert_eq!(doc["theorem"]["covered"], true);
    let residual = doc["theorem"]["witness"]["residual"].as_f64().unwrap();
    assert!(residual.abs() <= 1e-8 * 100.0, "conservation residual {residual}");

    // Flag misuse is a domain error, not a panic or a silent default.
    let out = check("3", Some("0.5"));
    assert_eq!(code(&out), 1);
    assert_eq!(stderr_diag(&out)["kind"], "invalid-parameter");
    let out = check("1", None);
    assert_eq!(code(&out), 1);
    assert_eq!(stderr_diag(&out)["kind"], "invalid-parameter");
    let out = check("9", None);
    assert_eq!(code(&out), 1);
    assert_eq!(stderr_diag(&out)["kind"], "invalid-parameter");
}

#[test]
fn simulate_writes_deterministic_reports_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let cohort = dir.path().join("cohort.csv");
    for (path, threads) in [(&a, "4"), (&b, "1")] {
        let out = admit(&[
            "simulate",
            "--population", &population(),
            "--procedure", "default",
            "--seed", "42",
            "--replication", "50",
            "--threads", threads,
            "--dump-cohort", cohort.to_str().unwrap(),
            "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    // Same seed ⇒ same bytes, regardless of thread count.
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let doc = read_json(&a);
    assert_eq!(doc["kind"], "simulate_report");
    assert_eq!(doc["all_within_tolerance"], true);
    assert_eq!(doc["cells"].as_array().unwrap().len(), 4);

    // 100 applicants × replication 50, plus the header line.
    let csv = fs::read_to_string(&cohort).unwrap();
    assert_eq!(csv.lines().count(), 5001);
    assert!(csv.starts_with("group,region,q,raw_score\n"));
}

#[test]
fn fit_runs_deterministically_and_reports_canonical_regions() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = admit(&[
            "fit",
            "--stats-groups", &format!("{FIXTURES}/fit_groups.csv"),
            "--stats-quantiles", &format!("{FIXTURES}/fit_quantiles.csv"),
            "--regions", "3",
            "--restarts", "2",
            "--seed", "1",
            "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("fit loss "));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let doc = read_json(&a);
    assert_eq!(doc["kind"], "fit_solution");
    let ids: Vec<&str> = doc["regions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["0", "1", "2"]);
    // The bundled statistics come from the forward model exactly, so the
    // fit should drive the loss to numerical noise (documented: < 1e-12).
    assert!(doc["loss"].as_f64().unwrap() < 1e-12);
    assert_eq!(doc["restarts"], 2);
    assert_eq!(doc["rng_seed"], 1);
}

#[test]
fn report_accepts_solve_simulate_and_fit_documents_only() {
    let dir = tempfile::tempdir().unwrap();
    let solve = dir.path().join("solve.json");
    let bundle = dir.path().join("bundle.json");
    let out = admit(&[
        "solve", "--population", &population(),
        "--procedure", "quota", "--eta", "1.9",
        "--out", solve.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    for _ in 0..2 {
        let out = admit(&["report", "--in", solve.to_str().unwrap(), "--out", bundle.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let doc = read_json(&bundle);
    assert_eq!(doc["kind"], "report_bundle");
    assert_eq!(doc["source"], "solve");
    assert_eq!(doc["grid"].as_array().unwrap().len(), 512);
    // Quota solve ⇒ the bundle checks the quota separation result too.
    let theorems: Vec<i64> = doc["theorems"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["theorem"].as_i64().unwrap())
        .collect();
    assert_eq!(theorems, [3, 1]);

    // A bundle is a terminal format: feeding it back is a parse error.
    let out = admit(&["report", "--in", bundle.to_str().unwrap(), "--out", solve.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(stderr_diag(&out)["kind"], "parse");

    // A fit solution renders through the same pipeline.
    let fit_out = dir.path().join("fit.json");
    let out = admit(&[
        "fit",
        "--stats-groups", &format!("{FIXTURES}/fit_groups.csv"),
        "--stats-quantiles", &format!("{FIXTURES}/fit_quantiles.csv"),
        "--regions", "1",
        "--restarts", "2",
        "--seed", "3",
        "--out", fit_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let out = admit(&["report", "--in", fit_out.to_str().unwrap(), "--out", bundle.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&bundle);
    assert_eq!(doc["source"], "fit");
    assert!(doc["fit_residuals"].is_object());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&admit(&[])), 2);
    assert_eq!(code(&admit(&["solve", "--nonsense"])), 2);
    assert_eq!(code(&admit(&["frobnicate"])), 2);
    // Missing a required flag entirely is also usage, caught by clap.
    assert_eq!(code(&admit(&["validate"])), 2);
}

#[test]
fn missing_population_file_is_a_domain_error() {
    let out = admit(&["validate", "--population", "/nonexistent/pop.json"]);
    assert_eq!(code(&out), 1);
    let diag = stderr_diag(&out);
    assert_eq!(diag["kind"], "io");
    assert!(diag["error"].as_str().unwrap().contains("pop.json"));
}
