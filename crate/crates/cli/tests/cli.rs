use std::path::Path;
use std::process::{Command, Output};

fn ptp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptp")).args(args).env_remove("PTP_OUT").output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"
[problem]
kind = "tsp"
n = 10

[network]
dim = 16
heads = 2
blocks = 1

[search]
n_sim = 8

[variant]
variant = "ptp_gt"

[train]
gamma = 0.2
episodes = 200
arena_period = 100
arena_size = 8
validation_size = 4
batch_size = 32
steps_per_episode = 0.1
seed = 3
"#;

#[test]
fn gen_names_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ptp(&["gen", "--env", "jssp", "--size", "3x4", "--count", "10", "--seed", "7", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> =
        std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let expected: Vec<_> = (0..10).map(|i| format!("inst_{i:04}.txt")).collect();
    assert_eq!(names, expected);
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap());
    }
}

#[test]
fn unknown_env_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ptp(&["gen", "--env", "vrp", "--size", "5", "--count", "1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_gamma_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG.replace("gamma = 0.2\n", "")).unwrap();
    let o = ptp(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("run"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ptp"))
        .args(["gen", "--env", "tsp", "--size", "5", "--count", "2", "--out", "instances"])
        .env("PTP_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("instances/inst_0001.txt").exists());
}

#[test]
fn train_eval_plotdata_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let run = dir.path().join("run");
    let o = ptp(&["train", "--config", s(&cfg), "--out", s(&run), "--deterministic"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["final.ckpt", "metrics.csv", "manifest.json", "completion.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 200 + 20);

    let inst = dir.path().join("inst");
    assert!(ptp(&["gen", "--env", "tsp", "--size", "10", "--count", "3", "--seed", "99", "--out", s(&inst)])
        .status
        .success());
    let report = dir.path().join("eval.csv");
    let ckpt = run.join("final.ckpt");
    let o = ptp(&["eval", "--checkpoint", s(&ckpt), "--instances", s(&inst), "--mode", "greedy", "--out", s(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&report).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[3][0], "mean");
    let gaps: Vec<f64> = rows.iter().map(|x| x[3].parse().unwrap()).collect();
    assert!(((gaps[0] + gaps[1] + gaps[2]) / 3.0 - gaps[3]).abs() < 1e-9);
    assert!(rows.iter().all(|x| &x[6] == "0"), "greedy mode runs no simulations");
    assert!(gaps.iter().all(|g| *g >= -1e-9));

    let o = ptp(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--instances",
        s(&inst),
        "--mode",
        "search",
        "--n-sim",
        "8",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let jssp = dir.path().join("jssp");
    assert!(ptp(&["gen", "--env", "jssp", "--size", "2x2", "--count", "1", "--out", s(&jssp)]).status.success());
    let o = ptp(&["eval", "--checkpoint", s(&ckpt), "--instances", s(&jssp), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(3), "TSP checkpoint on JSSP files");

    let curve = dir.path().join("curve.csv");
    let m = run.join("metrics.csv");
    let o = ptp(&["plotdata", s(&m), s(&m), "--bucket", "50", "--out", s(&curve)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&curve).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap() == 0.0));
}

#[test]
fn oracle_reports_exact_and_heuristic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    assert!(ptp(&["gen", "--env", "tsp", "--size", "7", "--count", "2", "--out", s(&inst)]).status.success());
    let out = dir.path().join("oracle.csv");
    let o = ptp(&["oracle", "--env", "tsp", "--instances", s(&inst), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let (exact, heur): (f64, f64) = (rec[1].parse().unwrap(), rec[2].parse().unwrap());
        assert!(heur >= exact - 1e-12);
    }
}
