use std::fs;
use std::path::{Path, PathBuf};

use ldsc::agent::Method;
use ldsc::harness::*;
use ldsc::subgoal::ProviderMode;
use proptest::prelude::*;

fn tiny(dir: &Path, method: Method, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        env: "mini_four_rooms".into(),
        method,
        seeds,
        episodes: 6,
        output_dir: dir.to_path_buf(),
        checkpoint_interval: 3,
        window: 4,
        ..Default::default()
    };
    cfg.env_config.max_episode_steps = 30;
    cfg.agent.ddpg.hidden = vec![8];
    cfg.agent.ddpg.batch_size = 8;
    cfg.agent.dqn.hidden = vec![8];
    cfg.agent.dqn.batch_size = 8;
    cfg
}

#[test]
fn two_seeds_give_two_csvs_and_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let m = run_experiment(&tiny(&run, Method::Ldsc, vec![3, 7])).unwrap();
    assert_eq!(m.seeds.len(), 2);
    assert!(m.seeds.iter().all(|s| s.error.is_none() && s.episodes_completed == 6));
    for seed in [3, 7] {
        let d = seed_dir(&run, seed);
        let rows: Vec<MetricsRow> = read_csv(&d.join("metrics.csv")).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.seed == seed && r.steps <= 30));
        assert!(d.join("timing.csv").exists());
        for tag in ["ep_3", "ep_6", "final"] {
            assert!(d.join("checkpoints").join(tag).join("agent_state.json").exists(), "{tag}");
        }
        assert!(d.join("trees/option_tree.json").exists());
        assert!(d.join("trees/option_tree_ep_3.json").exists());
    }
    let header = fs::read_to_string(seed_dir(&run, 3).join("metrics.csv")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "seed,episode,task_id,return,success,steps,options_in_repertoire,subgoals_attained"
    );
    assert!(run.join("summary.csv").exists());
    assert!(run.join("config.json").exists());
    assert_eq!(load_manifest(&run).unwrap(), m);
    assert_eq!(m.subgoal_trees, vec!["trees/subgoal_task_0.json".to_string()]);
    assert_eq!(m.provider_fixture.as_deref(), Some("provider_fixture.json"));
}

#[test]
fn same_config_same_metrics_and_fixture_replays_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    run_experiment(&tiny(&a, Method::Ldsc, vec![1])).unwrap();
    run_experiment(&tiny(&b, Method::Ldsc, vec![1])).unwrap();
    let mut offline = tiny(&c, Method::Ldsc, vec![1]);
    offline.provider = Some(ProviderMode::Fixture { path: a.join("provider_fixture.json") });
    run_experiment(&offline).unwrap();
    let read = |p: &Path| fs::read(seed_dir(p, 1).join("metrics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn failing_seed_is_recorded_and_others_continue() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    fs::create_dir_all(&run).unwrap();
    // A file where the seed directory should go.
    fs::write(run.join("seed_1"), "in the way").unwrap();
    let m = run_experiment(&tiny(&run, Method::Dsc, vec![1, 2])).unwrap();
    assert!(m.seeds[0].error.is_some());
    assert!(m.seeds[1].error.is_none());
    let rows = summarize(&[run]).unwrap();
    assert_eq!(rows[0].seeds, 1);
}

#[test]
fn flat_baseline_run_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let mut cfg = tiny(&run, Method::Ddpg, vec![0]);
    cfg.workers = 2;
    let m = run_experiment(&cfg).unwrap();
    assert!(m.subgoal_trees.is_empty());
    assert!(m.provider_fixture.is_none());
    let rows: Vec<MetricsRow> = read_csv(&seed_dir(&run, 0).join("metrics.csv")).unwrap();
    assert!(rows.iter().all(|r| r.options_in_repertoire == 0));
    let files = plot(&[run.clone()]).unwrap();
    assert!(files.iter().any(|f| f.ends_with("learning_curve.svg")));
    assert!(files.iter().any(|f| f.ends_with("curve_seed_0.csv")));
    assert!(!files.iter().any(|f| f.to_string_lossy().contains("footprint")));
}

#[test]
fn hierarchical_plots_include_footprints() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    run_experiment(&tiny(&run, Method::Ldsc, vec![0])).unwrap();
    let files = plot(&[run]).unwrap();
    assert!(files.iter().any(|f| f.ends_with("footprint_seed_0.svg")));
    assert!(files.iter().any(|f| f.ends_with("footprint_seed_0.csv")));
}

#[test]
fn shipped_configs_match_presets() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in PRESETS {
        let cfg = ExperimentConfig::load(root.join(format!("{name}.toml"))).unwrap();
        assert_eq!(cfg, preset(name).unwrap(), "{name}");
    }
}

#[test]
fn json_config_loads() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("c.json");
    fs::write(&p, r#"{"env": "tunnel", "method": "DDPG", "seeds": [4]}"#).unwrap();
    let cfg = ExperimentConfig::load(&p).unwrap();
    assert_eq!((cfg.env.as_str(), cfg.method, cfg.seeds.clone()), ("tunnel", Method::Ddpg, vec![4]));
    assert!(ExperimentConfig::load(tmp.path().join("missing.toml")).is_err());
}

/// Writes a fake run directory holding the given metrics.
fn fake_run(root: &Path, name: &str, method: Method, window: usize, seeds: &[Vec<(u8, usize, usize)>]) -> PathBuf {
    let run = root.join(name);
    let cfg = ExperimentConfig {
        env: "four_rooms".into(),
        method,
        seeds: (0..seeds.len() as u64).collect(),
        window,
        output_dir: run.clone(),
        ..Default::default()
    };
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join("config.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    for (seed, eps) in seeds.iter().enumerate() {
        let d = seed_dir(&run, seed as u64);
        fs::create_dir_all(&d).unwrap();
        let mut w = csv::Writer::from_path(d.join("metrics.csv")).unwrap();
        for (episode, &(success, steps, subgoals)) in eps.iter().enumerate() {
            w.serialize(MetricsRow {
                seed: seed as u64,
                episode,
                task_id: 0,
                ret: success as f64 - 0.01 * steps as f64,
                success,
                steps,
                options_in_repertoire: 2,
                subgoals_attained: subgoals,
            })
            .unwrap();
        }
        w.flush().unwrap();
    }
    run
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn summary_matches_brute_force(
        window in 1usize..8,
        seeds in prop::collection::vec(
            prop::collection::vec((0u8..2, 1usize..200, 0usize..3), 1..15),
            1..5,
        ),
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let run = fake_run(tmp.path(), "r", Method::Dsc, window, &seeds);
        let rows = summarize(&[run]).unwrap();
        prop_assert_eq!(rows.len(), 1);
        let r = &rows[0];

        let mut rates = Vec::new();
        let mut steps = Vec::new();
        let mut full = 0.0;
        for eps in &seeds {
            let start = eps.len().saturating_sub(window);
            let tail = &eps[start..];
            let mut s = 0.0;
            let mut f = 0.0;
            for &(success, st, sub) in tail {
                if success == 1 {
                    s += 1.0;
                    steps.push(st as f64);
                }
                if sub >= 2 {
                    f += 1.0;
                }
            }
            rates.push(100.0 * s / tail.len() as f64);
            full += f / tail.len() as f64;
        }
        let m = rates.iter().sum::<f64>() / rates.len() as f64;
        let sd = if rates.len() > 1 {
            (rates.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (rates.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        prop_assert!((r.success_mean - m).abs() < 1e-9);
        prop_assert!((r.success_sd - sd).abs() < 1e-9);
        prop_assert!((r.full_attainment_mean - 100.0 * full / seeds.len() as f64).abs() < 1e-9);
        match r.steps_mean {
            Some(sm) => prop_assert!((sm - steps.iter().sum::<f64>() / steps.len() as f64).abs() < 1e-9),
            None => prop_assert!(steps.is_empty()),
        }
    }
}

#[test]
fn summary_groups_runs_by_method() {
    let tmp = tempfile::tempdir().unwrap();
    let a = fake_run(tmp.path(), "a", Method::Ldsc, 4, &[vec![(1, 10, 2); 4]]);
    let b = fake_run(tmp.path(), "b", Method::Ldsc, 4, &[vec![(1, 10, 2), (1, 10, 2), (0, 10, 1), (1, 10, 2)]]);
    let c = fake_run(tmp.path(), "c", Method::Ddpg, 4, &[vec![(0, 50, 0); 4]]);
    let rows = summarize(&[a, b, c]).unwrap();
    assert_eq!(rows.len(), 2);
    let ldsc = rows.iter().find(|r| r.method == Method::Ldsc).unwrap();
    assert_eq!(ldsc.seeds, 2);
    assert!((ldsc.success_mean - 87.5).abs() < 1e-12);
    let table = format_table(&rows);
    assert!(table.contains("95% ± 2%"));
    assert!(table.contains("DDPG"));
    let empty = fake_run(tmp.path(), "e", Method::Ldsc, 4, &[vec![]]);
    assert!(summarize(&[empty]).is_err());
    assert!(summarize(&[]).is_err());
}
