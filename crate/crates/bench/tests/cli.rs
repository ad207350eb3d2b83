use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mmdpoints(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmdpoints"))
        .args(args)
        .current_dir(dir)
        .env("MMDPOINTS_WORKERS", "2")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn descend_writes_points_trajectory_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let o = mmdpoints(
        dir.path(),
        &[
            "descend",
            "--n",
            "6",
            "--T",
            "300",
            "--log-every",
            "50",
            "--check-every",
            "100",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let points = fs::read_to_string(dir.path().join("run/points.csv")).unwrap();
    assert_eq!(points.lines().count(), 6);
    assert!(points.lines().all(|l| l.split(',').count() == 2));
    let traj = fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,mmd,residual,beta,a5_lhs,a5_rhs,a5_satisfied"));
    let ts: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts, [1, 50, 100, 150, 200, 250, 300, 301]);
    assert!(traj.lines().nth(3).unwrap().ends_with("false") || traj.lines().nth(3).unwrap().ends_with("true"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["iterations"], 300);
    assert_eq!(meta["steps"], 300);
    assert_eq!(meta["kernel"], "gaussian:ℓ=1");
    assert!(meta["version"].is_string());
    // Reruns are identical.
    let again = mmdpoints(
        dir.path(),
        &[
            "descend",
            "--n",
            "6",
            "--T",
            "300",
            "--log-every",
            "50",
            "--check-every",
            "100",
            "--out",
            "again",
        ],
    );
    assert_eq!(code(&again), 0);
    assert_eq!(points, fs::read_to_string(dir.path().join("again/points.csv")).unwrap());
}

#[test]
fn baseline_and_check_a5() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["iid", "herding", "support-points"] {
        let out = format!("{method}.csv");
        let o = mmdpoints(
            dir.path(),
            &[
                "baseline",
                "--method",
                method,
                "--n",
                "4",
                "--pool",
                "100",
                "--iterations",
                "10",
                "--out",
                &out,
            ],
        );
        assert_eq!(code(&o), 0, "{method}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(fs::read_to_string(dir.path().join(&out)).unwrap().lines().count(), 4);
    }
    let o = mmdpoints(
        dir.path(),
        &["check-a5", "--points", "iid.csv", "--beta", "0.1", "--samples", "20"],
    );
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["lhs"].as_f64().unwrap() >= 0.0);
    assert!(v["satisfied"].is_boolean());
}

#[test]
fn bench_and_rate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ok.json"),
        r#"{"kernel": "gaussian:l=1", "target": "gmm:benchmark", "methods": ["iid"],
            "n_grid": [10, 40], "repetitions": 3, "integrands": ["f1"], "output_dir": "res"}"#,
    )
    .unwrap();
    let o = mmdpoints(dir.path(), &["bench", "ok.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.csv", "summary.json", "errors.csv"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }
    let o = mmdpoints(
        dir.path(),
        &["rate", "res/results.csv", "--method", "iid", "--metric", "err:f1"],
    );
    assert_eq!(code(&o), 0);
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(fit["slope"].as_f64().unwrap() < 0.0);
    let o = mmdpoints(
        dir.path(),
        &["rate", "res/results.csv", "--method", "kt", "--metric", "mmd"],
    );
    assert_eq!(code(&o), 1);

    fs::write(
        dir.path().join("bad.json"),
        r#"{"kernel": "gaussian:l=1", "target": "gmm:benchmark", "methods": ["kt"],
            "n_grid": [10], "repetitions": 1, "output_dir": "res"}"#,
    )
    .unwrap();
    let o = mmdpoints(dir.path(), &["bench", "bad.json"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("methods[0]") && err.contains("reserved"), "{err}");

    fs::write(dir.path().join("pair.csv"), "0.1,0\n5,5\n").unwrap();
    fs::write(
        dir.path().join("partial.json"),
        r#"{"kernel": "gaussian:l=0.1", "target": {"dataset": "pair.csv", "normalize": "none"},
            "methods": ["stationary-mmd", "iid"], "n_grid": [2], "repetitions": 1, "output_dir": "partial",
            "stationary": {"iterations": 5, "gamma": 1.7976931348623157e308, "schedule": {"kind": "none"}}}"#,
    )
    .unwrap();
    let o = mmdpoints(dir.path(), &["bench", "partial.json"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(dir.path().join("partial/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2);

    let o = mmdpoints(
        dir.path(),
        &["descend", "--n", "2", "--kernel", "laplace:l=1", "--out", "x"],
    );
    assert_eq!(code(&o), 1);
}
