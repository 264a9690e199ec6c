use std::fs;
use std::process::{Command, Output};

fn slicesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicesim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn alloc_prints_optimal_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.txt");
    fs::write(&path, "# three users\nL 5\nu1 0 1\nu2 0 6\nu3 7 6\n").unwrap();
    let out = slicesim(&["alloc", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("u2              0              6    4.000000000"),
        "{text}"
    );
    assert!(text.contains("kkt at zero: [u3]"));
    assert!(text.contains("optimal: yes"));
}

#[test]
fn alloc_reports_suboptimal_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.txt");
    fs::write(&path, "L 6\na 0 4\nb 0 4\n").unwrap();
    let out = slicesim(&["alloc", path.to_str().unwrap(), "--method", "largest_first"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("optimal: no"));
}

#[test]
fn alloc_rejects_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.txt");
    fs::write(&path, "L 5\nu1 0\n").unwrap();
    let out = slicesim(&["alloc", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn game_solve_matches_enumeration() {
    let out = slicesim(&["game", "solve", "--check"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("case: CASE2"));
    assert!(text.contains("n1*: 30"));
    assert!(text.contains("check: brute-force enumeration agrees (2 equilibria)"));
}

#[test]
fn game_solve_small_window() {
    let out = slicesim(&[
        "game",
        "solve",
        "--check",
        "--matrix",
        "--set",
        "tau=3",
        "--set",
        "n_blocks=12",
        "--set",
        "rho=0.02",
        "--set",
        "epsilon=0.001",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("check: brute-force enumeration agrees"));
    assert!(text.contains("payoff matrix"));
    assert_eq!(
        text.lines()
            .filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()) && l.contains(':'))
            .count(),
        13
    );
}

#[test]
fn reliability_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rel.csv");
    let out = slicesim(&[
        "reliability",
        "--rho-tilde",
        "0.01,0.1",
        "--p",
        "0.3",
        "--tau",
        "3",
        "--trials",
        "20000",
        "--seed",
        "9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "rho_tilde,p,tau,light_traffic,exact_tau3,mc_estimate,mc_std_error,trials,seed"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("0.1,0.3,3,"));
}

#[test]
fn simulate_sweep_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let out = slicesim(&[
        "simulate",
        "--frames",
        "50",
        "--sweep",
        "a=0.2,0.5,0.8",
        "--seed",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv
        .lines()
        .next()
        .unwrap()
        .starts_with("schema_version,rho,p,tau,"));
    let summary = stdout(&out);
    assert!(summary.lines().next().unwrap().contains("jain"));
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, extra) in [["--threads", "1"], ["--threads", "3"]].iter().enumerate() {
        let path = dir.path().join(format!("sim{i}.csv"));
        let mut args = vec![
            "simulate",
            "--frames",
            "30",
            "--sweep",
            "allocator=water_fill,random_order",
            "--out",
            path.to_str().unwrap(),
        ];
        args.extend(extra);
        let out = slicesim(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn simulate_config_file_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, "seeds = [2]\n\n[base]\nusers = 4\nframes = 5\n").unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = slicesim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    assert_eq!(csv.lines().count(), 2);
    let lines: Vec<serde_json::Value> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4]["frame"], 4);
    assert_eq!(lines[0]["grants"].as_array().unwrap().len(), 4);
}

#[test]
fn invalid_field_is_named_and_no_output_left() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let out = slicesim(&[
        "simulate",
        "--sweep",
        "warp=1,2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("warp"), "{}", stderr(&out));
    assert!(!path.exists());

    let out = slicesim(&["simulate", "--set", "p=1.5", "--frames", "1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("`p`"), "{}", stderr(&out));

    let out = slicesim(&["game", "solve", "--sweep", "a=0.1,0.2"]);
    assert!(!out.status.success());
}

#[test]
fn trace_requires_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = slicesim(&[
        "simulate",
        "--frames",
        "2",
        "--sweep",
        "a=0.2,0.4",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("exactly one run"));
}
