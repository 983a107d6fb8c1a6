use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use tempfile::TempDir;

fn tsc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsc"))
        .args(args)
        .current_dir(dir)
        .env_remove("TSC_OUTPUT_ROOT")
        .output()
        .expect("spawn tsc")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tsc(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    tsc(dir, args).status.code().unwrap()
}

const TOY: &str = r#"
seeds = [1, 2]
eval_episodes = 2
output_dir = "out"

[network]
rows = 1
cols = 1

[flow]
rate = 0.1
horizon = 600

[controller]
agent = "lite"

[hyper]
epochs = 4
sample_size = 200
"#;

fn toy(dir: &Path, extra: &str) -> String {
    let name = "toy.toml";
    fs::write(dir.join(name), format!("{TOY}{extra}")).unwrap();
    name.to_string()
}

#[test]
fn gen_net_writes_a_grid() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(tmp.path(), &["gen", "net", "--grid", "3x4", "--preset", "A", "--ew", "400", "--ns", "800"]);
    assert!(stdout.contains("12 intersections"), "{stdout}");
    let net = tsc_core::roadnet::parse_roadnet(&fs::read_to_string(tmp.path().join("roadnet.json")).unwrap()).unwrap();
    assert_eq!(net.intersections.len(), 12);
    assert_eq!(code(tmp.path(), &["gen", "net", "--grid", "0x4"]), 2);
    assert_eq!(code(tmp.path(), &["gen", "net", "--grid", "2x2", "--preset", "Q"]), 2);
}

#[test]
fn gen_flow_needs_a_network() {
    let tmp = TempDir::new().unwrap();
    let out = tsc(tmp.path(), &["gen", "flow", "--net", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
    ok(tmp.path(), &["gen", "net", "--grid", "2x2"]);
    let stdout = ok(tmp.path(), &["gen", "flow", "--rate", "0.2", "--seed", "5", "--horizon", "900"]);
    assert!(stdout.contains("vehicles over 900 s"), "{stdout}");
    let first = fs::read(tmp.path().join("flow.json")).unwrap();
    ok(tmp.path(), &["gen", "flow", "--rate", "0.2", "--seed", "5", "--horizon", "900", "--out", "again.json"]);
    assert_eq!(first, fs::read(tmp.path().join("again.json")).unwrap());
    assert_eq!(code(tmp.path(), &["gen", "flow", "--ratios", "0.5,0.5,0.5"]), 2);
}

#[test]
fn output_root_applies_to_relative_paths() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("root");
    let out = Command::new(env!("CARGO_BIN_EXE_tsc"))
        .args(["gen", "net", "--grid", "1x2"])
        .current_dir(tmp.path())
        .env("TSC_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(root.join("roadnet.json").is_file());
    assert!(!tmp.path().join("roadnet.json").exists());
}

#[test]
fn training_and_evaluation_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = toy(tmp.path(), "");
    let files = [
        "seed_1/weights.bin",
        "seed_1/final_weights.bin",
        "seed_2/metrics.csv",
        "train_summary.json",
        "eval_episodes.csv",
        "eval_summary.csv",
        "eval_long.csv",
    ];
    let mut runs = Vec::new();
    for out in ["a", "b"] {
        let train = ok(tmp.path(), &["train", "--config", &cfg, "--out-dir", out]);
        assert_eq!(train.lines().count(), 2, "{train}");
        let eval = ok(tmp.path(), &["eval", "--config", &cfg, "--out-dir", out, "--weights-dir", out]);
        runs.push((train, eval, files.map(|f| fs::read(tmp.path().join(out).join(f)).unwrap())));
    }
    assert_eq!(runs[0], runs[1]);
    let metrics = fs::read_to_string(tmp.path().join("a/seed_1/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    let long = fs::read_to_string(tmp.path().join("a/eval_long.csv")).unwrap();
    assert!(long.starts_with("method,seed,metric,value\n"));

    let resumed = tsc(tmp.path(), &["train", "--config", &cfg, "--out-dir", "a", "--resume"]);
    assert!(resumed.status.success());
    assert!(String::from_utf8_lossy(&resumed.stderr).contains("warm start"));
}

#[test]
fn evaluation_requires_weights_only_for_agents() {
    let tmp = TempDir::new().unwrap();
    let cfg = toy(tmp.path(), "");
    assert_eq!(code(tmp.path(), &["eval", "--config", &cfg]), 2);
    assert_eq!(code(tmp.path(), &["eval", "--config", &cfg, "--weights", "nope.bin"]), 2);
    fs::write(tmp.path().join("fixed.toml"), TOY.replace("agent = \"lite\"", "agent = \"none\"\npolicy = \"fixed_time\"")).unwrap();
    let stdout = ok(tmp.path(), &["eval", "--config", "fixed.toml"]);
    assert!(stdout.starts_with("fixed_time: AATT median"), "{stdout}");
    fs::write(tmp.path().join("mql.toml"), TOY.replace("agent = \"lite\"", "agent = \"none\"")).unwrap();
    let stdout = ok(tmp.path(), &["eval", "--config", "mql.toml", "--action-duration", "20"]);
    assert!(stdout.starts_with("max_queue-20s: AATT median"), "{stdout}");
    assert_eq!(code(tmp.path(), &["eval", "--config", "mql.toml", "--action-duration", "0"]), 2);
}

#[test]
fn invalid_configs_exit_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(tmp.path(), &["train", "--config", "absent.toml"]), 2);
    fs::write(tmp.path().join("bad.toml"), "seeds = [1]\nunknown_key = 3\n").unwrap();
    assert_eq!(code(tmp.path(), &["train", "--config", "bad.toml"]), 2);
    let cfg = toy(tmp.path(), "lr = -1.0\n");
    assert_eq!(code(tmp.path(), &["train", "--config", &cfg]), 2);
    // Pressure reward with max-queue phases is not a supported pairing.
    fs::write(tmp.path().join("pair.toml"), TOY.replace("agent = \"lite\"", "agent = \"lite\"\nreward = \"pressure\"")).unwrap();
    assert_eq!(code(tmp.path(), &["train", "--config", "pair.toml"]), 2);
}

#[test]
fn transfer_rejects_incompatible_weights() {
    let tmp = TempDir::new().unwrap();
    let cfg = toy(tmp.path(), "");
    ok(tmp.path(), &["train", "--config", &cfg]);
    fs::write(tmp.path().join("full.toml"), TOY.replace("agent = \"lite\"", "agent = \"full\"")).unwrap();
    let out = tsc(tmp.path(), &["transfer", "--config", "full.toml", "--weights", "out/seed_1/weights.bin", "--t-train", "100"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let stdout = ok(tmp.path(), &["transfer", "--config", &cfg, "--weights", "out/seed_1/weights.bin", "--direct-weights", "out/seed_1/weights.bin", "--train-on", "A", "--out-dir", "t"]);
    assert_eq!(stdout.lines().count(), 2);
    let csv = fs::read_to_string(tmp.path().join("t/transfer.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("train_on,eval_on,seed,t_transfer,t_train,ratio"));
    for line in lines {
        assert!(line.starts_with("A,A,"));
        assert!(line.ends_with(",1.0"), "{line}");
    }
}

#[test]
fn cycle_keeps_the_phase_order() {
    let tmp = TempDir::new().unwrap();
    let cfg = toy(tmp.path(), "");
    let out = tsc(tmp.path(), &["cycle", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--weights"));
    ok(tmp.path(), &["train", "--config", &cfg]);
    let stdout = ok(tmp.path(), &["cycle", "--config", &cfg, "--weights", "out/seed_1/weights.bin", "--out-dir", "c"]);
    assert!(stdout.starts_with("cycle/lite"), "{stdout}");
    let log = fs::read_to_string(tmp.path().join("c/seed_1/episode0.log")).unwrap();
    let phases: Vec<usize> =
        log.lines().filter(|l| l.starts_with("decision,")).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(phases.len() > 8);
    for (k, p) in phases.iter().enumerate() {
        assert_eq!(*p, k % 4);
    }
    ok(tmp.path(), &["cycle", "--config", &cfg, "--weights", "out/seed_1/weights.bin", "--fine-tune", "--out-dir", "f"]);
    assert!(tmp.path().join("f/seed_2/weights.bin").is_file());
}

#[test]
fn compare_ranks_methods_against_a_baseline() {
    let tmp = TempDir::new().unwrap();
    let cfg = toy(tmp.path(), "");
    ok(tmp.path(), &["train", "--config", &cfg]);
    let stdout = ok(tmp.path(), &["compare", "--config", &cfg, "--weights-dir", "out"]);
    let csv = fs::read_to_string(tmp.path().join("out/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert!(stdout.contains("fixed_time") && stdout.contains("lite/max_queue"));
    let fixed = csv.lines().find(|l| l.starts_with("fixed_time,")).unwrap();
    assert!(fixed.ends_with(",0.0"), "{fixed}");
    assert_eq!(code(tmp.path(), &["compare", "--config", &cfg, "--baseline", "nonexistent"]), 2);
}

#[test]
fn lite_toy_run_fits_the_time_budget() {
    let tmp = TempDir::new().unwrap();
    let cfg = "seeds = [1]\neval_episodes = 1\n[network]\nrows = 1\ncols = 1\n[controller]\nagent = \"lite\"\n[hyper]\nepochs = 80\npatience = 80\n";
    fs::write(tmp.path().join("budget.toml"), cfg).unwrap();
    let start = Instant::now();
    ok(tmp.path(), &["train", "--config", "budget.toml"]);
    let elapsed = start.elapsed();
    let metrics = fs::read_to_string(tmp.path().join("runs/seed_1/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 81);
    assert!(elapsed < Duration::from_secs(120), "{elapsed:?}");
}
