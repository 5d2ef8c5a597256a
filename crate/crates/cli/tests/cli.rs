use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ldsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldsc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tiny_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("cfg.toml");
    let out = dir.join("run");
    fs::write(
        &p,
        format!(
            "env = \"mini_four_rooms\"\nmethod = \"LDSC\"\nseeds = [0]\nepisodes = 3\nwindow = 2\n\
             output_dir = \"{}\"\n{extra}\n[env_config]\nmax_episode_steps = 20\n\
             [agent.ddpg]\nhidden = [8]\nbatch_size = 8\n[agent.dqn]\nhidden = [8]\nbatch_size = 8\n",
            out.display()
        ),
    )
    .unwrap();
    p.display().to_string()
}

#[test]
fn exported_builtin_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("fr.json");
    let p = p.to_str().unwrap();
    assert!(ldsc(&["export-layout", "four_rooms", p]).status.success());
    let o = ldsc(&["validate-layout", p]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn broken_layout_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, "{\"walls\": 3}").unwrap();
    assert_eq!(ldsc(&["validate-layout", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ldsc(&["export-layout", "nowhere", "x.json"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ldsc(&["train", "--config", "/definitely/not/here.toml"]).status.code(), Some(2));
    assert_eq!(ldsc(&["train"]).status.code(), Some(2));
    assert_eq!(ldsc(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(ldsc(&["summarize"]).status.code(), Some(2));
    assert_eq!(ldsc(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.toml");
    fs::write(&p, "episodes = 0\n").unwrap();
    assert_eq!(ldsc(&["train", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn llm_fetch_scripted_writes_canonical_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let out = tmp.path().join("fx.json");
    let o = ldsc(&["llm-fetch", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["0"]["raw"], r#"[["key","lock"]]"#);
}

#[test]
fn train_eval_summarize_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), "");
    let o = ldsc(&["train", "--config", &cfg, "--seed-offset", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    assert!(run.join("seed_5/metrics.csv").exists());
    assert!(stdout(&o).contains("LDSC"));

    let ck = run.join("seed_5/checkpoints/final");
    let o = ldsc(&["eval", "--checkpoint", ck.to_str().unwrap(), "--episodes", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("success: "));

    let csv = tmp.path().join("summary.csv");
    let o = ldsc(&["summarize", run.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(csv.exists());

    let o = ldsc(&["plot", run.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(run.join("plots/learning_curve.svg").exists());
}
