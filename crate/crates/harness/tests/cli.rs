use std::fs;
use std::process::Command;

fn simcmc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simcmc"))
}

const SMALL_LG: &str = r#"
name = "small-lg"
seed = 3
replications = 2
sample_sizes = [50, 200]

[model]
kind = "linear-gaussian"
dim = 2
sigma_v = 2.0
sigma_w = 0.5
horizon = 8
matrix_seed = 1
data_seed = 2

[[arms]]
algorithm = "simcmc"
proposal = "optimal"

[[arms]]
algorithm = "smc"
proposal = "prior"
"#;

#[test]
fn run_experiment_writes_json_and_table_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL_LG).unwrap();
    let out = dir.path().join("reports");
    let status = simcmc()
        .env("SIMCMC_OUT_DIR", &out)
        .arg("run-experiment")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let json = fs::read_to_string(out.join("small-lg.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    let table = fs::read_to_string(out.join("small-lg.txt")).unwrap();
    assert!(table.contains("simcmc/optimal"));
    assert_eq!(
        String::from_utf8_lossy(&status.stdout).lines().next(),
        table.lines().next()
    );
}

#[test]
fn check_mode_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("failing.toml");
    // an RMSE below zero is impossible
    let text =
        format!("{SMALL_LG}\n[[checks]]\ncheck = \"rmse-at-most\"\narm = \"smc/prior\"\nsamples = 50\nmax = -1.0\n");
    fs::write(&cfg, text).unwrap();
    let run = |check: bool| {
        let mut cmd = simcmc();
        cmd.arg("--out-dir").arg(dir.path());
        if check {
            cmd.arg("--check");
        }
        cmd.arg("run-experiment").arg(&cfg).output().unwrap().status
    };
    assert!(run(false).success());
    assert_eq!(run(true).code(), Some(1));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, SMALL_LG.replace("replications = 2", "replications = 0")).unwrap();
    let out = simcmc()
        .arg("--out-dir")
        .arg(dir.path())
        .arg("run-experiment")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replications"));
}

#[test]
fn verify_kernel_passes_its_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = simcmc()
        .args([
            "--check",
            "verify-kernel",
            "--instances",
            "10",
            "--seed",
            "4",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify-kernel.json")).unwrap()).unwrap();
    assert_eq!(report["kernel"]["instances"], 10);
}

#[test]
fn simulate_writes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["linear-gaussian", "kitagawa", "tracking"] {
        let path = dir.path().join(format!("{model}.json"));
        let status = simcmc()
            .args(["simulate", model, "--seed", "9", "--horizon", "16", "--out"])
            .arg(&path)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["dataset"]["states"].as_array().unwrap().len(), 16);
        assert_eq!(v["dataset"]["seed"], 9);
    }
    let a = dir.path().join("again.json");
    simcmc()
        .args(["simulate", "tracking", "--seed", "9", "--horizon", "16", "--out"])
        .arg(&a)
        .output()
        .unwrap();
    assert_eq!(
        fs::read(&a).unwrap(),
        fs::read(dir.path().join("tracking.json")).unwrap()
    );
}
