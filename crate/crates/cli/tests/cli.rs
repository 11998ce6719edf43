use std::path::Path;
use std::process::{Command, Output};

fn adqueue(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adqueue"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn simulate_revenue_writes_replicas_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = adqueue(
        dir.path(),
        &[
            "simulate-revenue",
            "--instance",
            "revenue-small",
            "--epsilon",
            "0.01",
            "--cycles",
            "20",
            "--replicas",
            "2",
            "--seed",
            "4",
            "--out-dir",
            "runs",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["replica_0.csv", "replica_1.csv", "aggregate.csv"] {
        assert!(dir.path().join("runs").join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(dir.path().join("runs/replica_1.csv")).unwrap();
    assert!(text.starts_with("# seed=5\n"));
    assert!(text.contains("# build="));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("cycle,revenue_0,revenue_1,revenue_2,queue_0"));
    assert!(header.ends_with("revenue,avg_revenue_per_slot"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "simulate-ctr",
            "--instance",
            "five-keyword",
            "--epsilon",
            "1e-4",
            "--cycles",
            "3",
            "--policy",
            "mwm-fast",
            "--seed",
            "8",
            "--out",
            out,
        ]
    };
    assert_eq!(code(&adqueue(dir.path(), &args("a.csv"))), 0);
    assert_eq!(code(&adqueue(dir.path(), &args("b.csv"))), 0);
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("normalized_over"));
    assert!(text.contains("# variant=ctr/mwm-fast(T=24)"));
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &[
            "simulate-revenue",
            "--instance",
            "nope",
            "--epsilon",
            "0.1",
            "--cycles",
            "5",
        ],
        &[
            "simulate-revenue",
            "--instance",
            "revenue-small",
            "--epsilon",
            "0",
            "--cycles",
            "5",
        ],
        &[
            "simulate-revenue",
            "--instance",
            "revenue-small",
            "--epsilon",
            "0.1",
            "--cycles",
            "5",
            "--variant",
            "estimated",
        ],
        &[
            "simulate-ctr",
            "--instance",
            "five-keyword",
            "--epsilon",
            "0.1",
            "--cycles",
            "1",
            "--hours",
            "7",
        ],
        &[
            "threshold-policy",
            "--nu",
            "0.7",
            "--p1",
            "0.9",
            "--p2",
            "0.9",
            "--epsilon-sweep",
            "0.01",
        ],
    ];
    for args in cases {
        let o = adqueue(dir.path(), args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let bad_instance = dir.path().join("bad.json");
    std::fs::write(&bad_instance, "{ not json").unwrap();
    let o = adqueue(
        dir.path(),
        &[
            "simulate-revenue",
            "--instance",
            "bad.json",
            "--epsilon",
            "0.1",
            "--cycles",
            "5",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn io_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "x").unwrap();
    let o = adqueue(
        dir.path(),
        &[
            "simulate-revenue",
            "--instance",
            "revenue-small",
            "--epsilon",
            "0.1",
            "--cycles",
            "5",
            "--out-dir",
            "blocker/sub",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocker"));
}

#[test]
fn analytic_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = adqueue(
        dir.path(),
        &[
            "threshold-policy",
            "--nu",
            "0.7",
            "--p1",
            "0.5",
            "--p2",
            "0.25",
            "--epsilon-sweep",
            "1e-2,1e-3",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(
        stdout.lines().filter(|l| l.ends_with(",true")).count(),
        2,
        "{stdout}"
    );
    assert!(dir.path().join("t.csv").exists());

    std::fs::write(
        dir.path().join("lb.json"),
        r#"{"epsilon": 0.001, "phi": 0.2, "p_plus": 0.5, "region": {"rows": [[1.0, 0.5]], "offsets": [1.0]}}"#,
    )
    .unwrap();
    let o = adqueue(dir.path(), &["lower-bound", "--params", "lb.json"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("single_queue_lower_bound = "));
    assert!(stdout.contains("multi_queue_lower_bound = "));

    let o = adqueue(
        dir.path(),
        &[
            "offline-baseline",
            "--instance",
            "revenue-small",
            "--out",
            "opt.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("opt.json")).unwrap())
            .unwrap();
    for key in ["policy", "duals", "r_star", "lambda", "residual"] {
        assert!(json.get(key).is_some(), "{key}");
    }

    let o = adqueue(
        dir.path(),
        &[
            "demo-unfairness",
            "--epsilon",
            "0.01",
            "--horizon",
            "500",
            "--out",
            "u.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("u.csv").exists());
}

#[test]
fn sweep_writes_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = adqueue(
        dir.path(),
        &[
            "sweep",
            "--instance",
            "revenue-small",
            "--model",
            "revenue",
            "--epsilons",
            "0.01,0.001",
            "--cycles",
            "500",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
}
