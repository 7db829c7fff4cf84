use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wordcover::cloud::PointCloud;

fn wordcover(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wordcover"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("WORDCOVER_THREADS", t),
        None => cmd.env_remove("WORDCOVER_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"
space = "sphere2"
epsilon = 0.2
delta = 0.1
seed = 11
domain = "exploratory"

[overrides]
k = 3
ell = 4

[budgets]
reference_size = 3000

[checks.cover]
[checks.w1]
method = "sinkhorn"
reg = 0.05
reference_size = 800
[checks.design]
lambda_r = 6.0
upsilon = 0.5
[checks.gap]
lambda_max = 6.0
seeds = 3
[checks.persist]
n = 10
trials = 6
"#;

fn report_without_timestamp(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn generate_then_verify_cover() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cloud.csv");
    let o = wordcover(
        &[
            "cover", "generate", "--space", "sphere2", "--epsilon", "0.05", "--delta", "0.1", "--seed", "42",
            "--k", "3", "--ell", "3", "--out", path_str(&csv),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cloud = PointCloud::read_with_header(&csv).unwrap();
    assert_eq!(cloud.len(), 216);
    assert_eq!((cloud.provenance.k, cloud.provenance.ell, cloud.provenance.seed), (3, 3, 42));

    let report = dir.path().join("cover.json");
    let o = wordcover(
        &[
            "verify", "cover", "--cloud", path_str(&csv), "--epsilon", "0.05", "--reference-size", "2000",
            "--seed", "7", "--out", path_str(&report),
        ],
        None,
    );
    // 216 points cannot reach the epsilon = 0.05 target radius
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["check"], "cover");
    assert_eq!(v["pass"], false);
    let r = &v["result"]["covering_radius"];
    assert!(r["value"].as_f64().unwrap() > r["threshold"].as_f64().unwrap());
    assert_eq!(v["conventions"]["vietoris_rips"], "<=");
}

#[test]
fn calculator_parameters_are_used_without_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let o = wordcover(
        &[
            "cover", "generate", "--space", "sphere2", "--epsilon", "0.05", "--delta", "0.1", "--seed", "1",
            "--cap", "500", "--out", path_str(&csv),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("k=97 ell=14"), "{}", stderr(&o));
    let cloud = PointCloud::read_with_header(&csv).unwrap();
    assert_eq!(cloud.len(), 500);
    assert!(cloud.provenance.capped);
}

#[test]
fn verify_w1_design_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cloud.csv");
    let o = wordcover(
        &[
            "cover", "generate", "--space", "sphere2", "--epsilon", "0.2", "--delta", "0.1", "--seed", "3",
            "--domain", "exploratory", "--k", "4", "--ell", "3", "--out", path_str(&csv),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = wordcover(
        &["verify", "w1", "--cloud", path_str(&csv), "--epsilon", "0.2", "--method", "exact", "--reference-size", "600"],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["method"]["kind"], "exact_flow");
    assert_eq!(v["result"]["gap_bound"], 0.0);

    let o = wordcover(&["verify", "design", "--cloud", path_str(&csv), "--lambda-r", "2", "--upsilon", "1"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["total_dim"], 4);

    let o = wordcover(
        &["verify", "persist", "--cloud", path_str(&csv), "--n", "8", "--trials", "4", "--w1", "0.05"],
        None,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["coupling"]["trials"], 4);
}

#[test]
fn verify_gap_distinguishes_alphabet_sizes() {
    let o = wordcover(&["verify", "gap", "--space", "sphere2", "--k", "60", "--lambda-max", "6", "--seeds", "3"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = wordcover(&["verify", "gap", "--space", "sphere2", "--k", "1", "--lambda-max", "6"], None);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "space = \"sphere2\"\nepsilon = 1.5\ndelta = 0.9\nseed = 1\n").unwrap();
    let o = wordcover(&["run", "--config", path_str(&cfg)], None);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("epsilon") && err.contains("delta"), "{err}");

    fs::write(&cfg, "space = \"sphere2\"\nepsilon = 0.05\nbogus = 1\n").unwrap();
    let o = wordcover(&["run", "--config", path_str(&cfg)], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("3:"), "{}", stderr(&o));

    assert_eq!(code(&wordcover(&["cover", "generate", "--space", "torus"], None)), 1);
    assert_eq!(code(&wordcover(&["verify", "gap", "--space", "s2", "--k", "2", "--lambda-max", "2"], Some("zero"))), 1);
}

#[test]
fn run_is_identical_across_thread_counts() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let mut reports = Vec::new();
    let mut clouds = Vec::new();
    for threads in ["1", "4", "8"] {
        let out = root.path().join(format!("t{threads}"));
        let o = wordcover(&["run", "--config", path_str(&cfg), "--out", path_str(&out)], Some(threads));
        assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
        reports.push(report_without_timestamp(&out));
        clouds.push(fs::read(out.join("cloud.csv")).unwrap());
    }
    assert!(reports[0]["errors"].as_array().unwrap().is_empty(), "{}", reports[0]["errors"]);
    for i in 1..3 {
        assert_eq!(clouds[0], clouds[i]);
        assert_eq!(reports[0], reports[i]);
    }

    let merged = root.path().join("merged.json");
    let o = wordcover(
        &[
            "report",
            "merge",
            path_str(&root.path().join("t1/report.json")),
            path_str(&root.path().join("t4/report.json")),
            "--out",
            path_str(&merged),
        ],
        None,
    );
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&merged).unwrap()).unwrap();
    assert_eq!(v["reports"], 2);
    assert_eq!(v["tallies"].as_array().unwrap().len(), 5);
    assert!(merged.with_extension("csv").exists());
}

#[test]
fn sweep_subcommand_writes_series() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("run.toml");
    fs::write(
        &cfg,
        "space = \"sphere2\"\nepsilon = 0.2\ndelta = 0.1\nseed = 2\ndomain = \"exploratory\"\n[overrides]\nk = 4\nell = 3\n[budgets]\nreference_size = 4000\n[checks.design]\nlambda_r = 6.0\n",
    )
    .unwrap();
    let out = root.path().join("sweep");
    let o = wordcover(
        &["sweep", "--config", path_str(&cfg), "--ells", "1,2,3", "--seeds", "5,6", "--out", path_str(&out)],
        None,
    );
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    for seed in [5, 6] {
        let dir = out.join(format!("seed-{seed}"));
        let csv = fs::read_to_string(dir.join("sweep_design.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(dir.join("sweep_cover.csv").exists());
        assert!(dir.join("report.json").exists());
    }
    assert!(out.join("seeds.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("covering_radius"));
}
