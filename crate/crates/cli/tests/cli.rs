use std::path::Path;
use std::process::{Command, Output};

fn rotsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotsync"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Drops the trailing runtime column.
fn without_runtime(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn e1_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e1.csv");
    let res = rotsync(&[
        "e1",
        "--n",
        "20",
        "--p",
        "1,0.8",
        "--trials",
        "2",
        "--methods",
        "eig,lud",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,d,n,p,p1,kappa,method,rounding,trial,seed,re,mse,iterations,runtime_ms"
    );
    assert_eq!(lines.count(), 2 * 2 * 2);
    let summary = read(&dir.path().join("e1_summary.csv"));
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
}

#[test]
fn reruns_match_except_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let res = rotsync(&[
            "e2",
            "--n",
            "15",
            "--p",
            "0.8",
            "--kappa",
            "10,1000",
            "--trials",
            "2",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(res.status.code(), Some(0));
    }
    assert_eq!(without_runtime(&read(&a)), without_runtime(&read(&b)));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("r.csv");
    std::fs::write(
        &cfg,
        format!(
            "# smoke run\nn = 15\np = 0.9\ntrials = 3\nmethods = eig\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let res = rotsync(&["e1", "--config", cfg.to_str().unwrap(), "--trials", "1"]);
    assert_eq!(res.status.code(), Some(0));
    let text = read(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("e1,2,15,0.9,1,,eig,"));
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        vec!["e1", "--n", "20", "--p", "1.5"],
        vec!["e1", "--n", "20"],
        vec!["e2", "--n", "20", "--p", "0.5"],
        vec!["e1", "--n", "20", "--p", "0.5", "--methods", "foo"],
        vec!["e1", "--n", "20", "--p", "0.5", "--gamma", "2"],
        vec!["e1", "--bogus"],
    ] {
        assert_eq!(rotsync(&args).status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "n = 20\nwhat = 1\n").unwrap();
    assert_eq!(
        rotsync(&["e1", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn nonconvergence_exits_3_with_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nc.csv");
    let res = rotsync(&[
        "e1",
        "--n",
        "20",
        "--p",
        "0.5",
        "--trials",
        "1",
        "--methods",
        "lud",
        "--max-iter",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(read(&out).lines().count(), 2);
}

#[test]
fn e3_writes_heatmap_and_theory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e3.csv");
    let res = rotsync(&[
        "e3",
        "--n",
        "20",
        "--grid-step",
        "0.5",
        "--trials",
        "1",
        "--methods",
        "eig",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let heat = read(&dir.path().join("e3_heatmap.csv"));
    assert!(heat.starts_with("d,n,kappa,method,p1,p,mean_log10_mse"));
    assert_eq!(heat.lines().count(), 1 + 4);
    let theory = read(&dir.path().join("e3_theory.csv"));
    assert_eq!(theory.lines().count(), 1 + 2);
}

#[test]
fn constants_and_semicircle_to_stdout() {
    let res = rotsync(&["constants", "--d", "2,3"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    assert!((row[1].parse::<f64>().unwrap() - 0.4502).abs() < 1e-4);

    let res = rotsync(&["semicircle", "--n", "40", "--p", "1", "--trials", "1"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with("d,n,p,trial,seed,sigma_theory,edge_max"));
}
