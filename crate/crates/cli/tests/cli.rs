use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eqvit::verify::CSV_HEADER;

fn eqvit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqvit")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn shipped_layers_pass_the_d4_audit() {
    let out = eqvit(&["audit", "--group", "d4", "--seeds", "3"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("PASS")).count(), 9);
}

#[test]
fn broken_layer_exits_one() {
    let out = eqvit(&["audit", "--target", "broken_linear", "--seeds", "1"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&eqvit(&["audit", "--group", "c3x"])), 2);
    assert_eq!(code(&eqvit(&["audit", "--target", "nope"])), 2);
    assert_eq!(code(&eqvit(&["audit", "--seeds", "0"])), 2);
    assert_eq!(code(&eqvit(&["frobnicate"])), 2);
    assert_eq!(code(&eqvit(&["train", "--config", "/no/such.toml", "--out", "/tmp/x"])), 2);
    let shapes = config("shapes_eqvit.toml");
    assert_eq!(code(&eqvit(&["train", "--config", p(&shapes), "--task", "sr", "--out", "/tmp/x"])), 2);
}

#[test]
fn report_with_no_inputs_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    assert_eq!(code(&eqvit(&["report", "--out", p(&csv)])), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
}

#[test]
fn audit_json_merges_into_csv() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.json");
    let many = dir.path().join("many.json");
    let a = eqvit(&["audit", "--group", "c2", "--target", "eq_linear", "--seeds", "2", "--report", p(&one)]);
    assert_eq!(code(&a), 0);
    let b = eqvit(&[
        "audit",
        "--group",
        "d1",
        "--target",
        "eq_linear",
        "--target",
        "eq_layernorm",
        "--seeds",
        "3",
        "--report",
        p(&many),
    ]);
    assert_eq!(code(&b), 0);
    let csv = dir.path().join("all.csv");
    assert_eq!(code(&eqvit(&["report", "--out", p(&csv), p(&one), p(&many)])), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    // header, c2 has 2 elements x 2 seeds, d1 has 2 elements x 3 seeds for each of two targets
    assert_eq!(text.lines().count(), 1 + 4 + 6 + 6);
    assert!(text.lines().nth(1).unwrap().starts_with("eq_linear,2,false,f64,"));
}

#[test]
fn train_then_eval_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("shapes_eqvit.toml"))
        .unwrap()
        .replace("train_size = 160", "train_size = 16")
        .replace("test_size = 160", "test_size = 8")
        .replace("epochs = 40", "epochs = 2");
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, text).unwrap();
    let ckpt = dir.path().join("model.ckpt");
    let out = eqvit(&["train", "--config", p(&cfg), "--task", "shapes", "--out", p(&ckpt)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("epoch")).count(), 2);
    assert!(dir.path().join("model.ckpt.toml").exists());

    let out = eqvit(&["eval", "--checkpoint", p(&ckpt)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let canonical = v["accuracy_canonical"].as_f64().unwrap();
    let rotated = v["accuracy_all_orientations"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&canonical));
    // an equivariant classifier scores a rotated copy of the test set identically
    assert_eq!(canonical, rotated);
}

#[test]
fn bench_prints_the_ledger() {
    let out = eqvit(&["bench", "--config", p(&config("sr_eqswin.toml")), "--iters", "2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("total")));
    assert!(text.lines().filter(|l| l.starts_with("linear")).all(|l| l.ends_with("sharing 4/1")));
    assert!(text.contains("images/s"));
}

#[test]
fn guide_config_listing_parses() {
    let guide =
        std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../book/src/cli.md")).unwrap();
    let block = guide.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let listed = eqvit_cli::config::RunConfig::from_toml(block).unwrap();
    let shipped = eqvit_cli::config::RunConfig::load(&config("shapes_eqvit.toml")).unwrap();
    assert_eq!(listed.model, shipped.model);
    assert_eq!(listed.task, shipped.task);
    assert_eq!(listed.optimizer, shipped.optimizer);
}
