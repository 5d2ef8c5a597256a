use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{episode_seed, ExperimentConfig};
use super::summary::{summarize, write_summary_csv};
use crate::agent::{FlatDdpgAgent, LdscAgent, Method, TrainedAgent};
use crate::envs::{self, Env, MazeLayout};
use crate::smdp::TaskInstruction;
use crate::subgoal::{build_tree, fetch_raw, parse_sequences, write_fixture, ProviderMode, SubgoalTree};
use crate::{Error, Result};

/// One training episode. Wall-clock time lives in `timing.csv` so this file
/// stays byte-identical across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub task_id: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub success: u8,
    pub steps: usize,
    pub options_in_repertoire: usize,
    pub subgoals_attained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub seed: u64,
    pub episode: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub episodes_completed: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub method: Method,
    pub env: String,
    pub seeds: Vec<SeedReport>,
    /// Raw provider answers, replayable through `Fixture` mode.
    pub provider_fixture: Option<String>,
    pub transcripts: Vec<String>,
    pub subgoal_trees: Vec<String>,
}

pub fn seed_dir(run: &Path, seed: u64) -> PathBuf {
    run.join(format!("seed_{seed}"))
}

/// Builds the subgoal trees of every task. Returns the trees and the raw
/// provider answers.
pub fn plan_trees(
    cfg: &ExperimentConfig,
    layout: &MazeLayout,
    tasks: &[TaskInstruction],
    transcripts: Option<&Path>,
) -> Result<(BTreeMap<usize, SubgoalTree>, BTreeMap<usize, String>)> {
    let s0 = envs::reset(layout, cfg.seeds[0]);
    let limits = cfg.agent.tree_limits;
    let mut trees = BTreeMap::new();
    let mut raws = BTreeMap::new();
    for task in tasks {
        let tree = match cfg.method {
            Method::Ldsc => {
                let mode = cfg.provider_mode();
                let raw = fetch_raw(task, &s0, layout, &mode, cfg.agent.sequences_requested, transcripts)?;
                let seqs = parse_sequences(&raw, layout)?;
                raws.insert(task.task_id, raw);
                build_tree(&s0, &seqs, layout, limits)?
            }
            Method::Dsc => build_tree(&s0, &[vec![task.goal_landmark.clone()]], layout, limits)?,
            Method::Ddpg => continue,
        };
        trees.insert(task.task_id, tree);
    }
    Ok((trees, raws))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn snapshot(agent: &TrainedAgent, dir: &Path, tag: &str) -> Result<()> {
    agent.save(&dir.join("checkpoints").join(tag))?;
    if let TrainedAgent::Hierarchical(a) = agent {
        let name = if tag == "final" { "option_tree.json".to_string() } else { format!("option_tree_{tag}.json") };
        write_json(&dir.join("trees").join(name), &a.option_tree.snapshot())?;
    }
    Ok(())
}

struct Plan<'a> {
    cfg: &'a ExperimentConfig,
    layout: &'a MazeLayout,
    tasks: &'a [TaskInstruction],
    trees: &'a BTreeMap<usize, SubgoalTree>,
}

fn train_seed(plan: &Plan, run: &Path, seed: u64, completed: &mut usize) -> Result<()> {
    let cfg = plan.cfg;
    let dir = seed_dir(run, seed);
    fs::create_dir_all(&dir)?;
    let agent_cfg = cfg.effective_agent();
    let mut agent = match cfg.method {
        Method::Ddpg => TrainedAgent::Flat(Box::new(FlatDdpgAgent::new(
            plan.layout,
            &cfg.env_config,
            &agent_cfg.ddpg,
            seed,
        )?)),
        m => TrainedAgent::Hierarchical(Box::new(LdscAgent::from_trees(
            m,
            plan.tasks,
            plan.trees.clone(),
            plan.layout,
            &cfg.env_config,
            &agent_cfg,
            seed,
        )?)),
    };
    let mut env = Env::new(plan.layout.clone(), cfg.env_config.clone())?;
    let mut metrics = csv::Writer::from_path(dir.join("metrics.csv"))?;
    let mut timing = csv::Writer::from_path(dir.join("timing.csv"))?;
    for episode in 0..cfg.episodes {
        agent.set_progress(episode);
        let task_id = plan.tasks[episode % plan.tasks.len()].task_id;
        let start = Instant::now();
        let r = agent.run_episode(&mut env, task_id, episode_seed(seed, episode), true)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        metrics.serialize(MetricsRow {
            seed,
            episode,
            task_id,
            ret: r.ret,
            success: r.success as u8,
            steps: r.steps,
            options_in_repertoire: r.options_in_repertoire,
            subgoals_attained: r.landmarks_attained,
        })?;
        metrics.flush()?;
        timing.serialize(TimingRow { seed, episode, wall_ms })?;
        timing.flush()?;
        *completed = episode + 1;
        if cfg.checkpoint_interval > 0 && (episode + 1) % cfg.checkpoint_interval == 0 {
            snapshot(&agent, &dir, &format!("ep_{}", episode + 1))?;
        }
    }
    snapshot(&agent, &dir, "final")
}

fn run_seed(plan: &Plan, run: &Path, seed: u64) -> SeedReport {
    let mut completed = 0;
    let outcome = catch_unwind(AssertUnwindSafe(|| train_seed(plan, run, seed, &mut completed)));
    let error = match outcome {
        Ok(Ok(())) => None,
        Ok(Err(e)) => Some(e.to_string()),
        Err(p) => Some(
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()),
        ),
    };
    if let Some(e) = &error {
        let _ = fs::create_dir_all(seed_dir(run, seed));
        let _ = fs::write(seed_dir(run, seed).join("error.txt"), e);
    }
    SeedReport { seed, episodes_completed: completed, error }
}

fn list_files(dir: &Path, prefix: &Path) -> Vec<String> {
    let mut out: Vec<String> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.path().strip_prefix(prefix).ok().map(|p| p.display().to_string()))
        .collect();
    out.sort();
    out
}

/// Trains every seed of `cfg` into `cfg.output_dir`.
///
/// Layout of the run directory:
/// `config.json`, `manifest.json`, `summary.csv`, `trees/`,
/// `seed_<n>/{metrics.csv, timing.csv, checkpoints/, trees/}` and, for a
/// language-model provider, `provider_fixture.json` and `transcripts/`.
///
/// A failing seed is recorded in the manifest and in `seed_<n>/error.txt`;
/// the remaining seeds still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let run = cfg.output_dir.as_path();
    fs::create_dir_all(run)?;
    write_json(&run.join("config.json"), cfg)?;
    let layout = cfg.layout()?;
    let tasks = cfg.task_list(&layout);

    let transcripts = run.join("transcripts");
    let http = matches!(cfg.provider_mode(), ProviderMode::Http(_));
    let (trees, raws) = plan_trees(cfg, &layout, &tasks, http.then_some(transcripts.as_path()))?;
    let mut tree_files = Vec::new();
    for (id, tree) in &trees {
        let name = format!("trees/subgoal_task_{id}.json");
        if let Some(p) = run.join(&name).parent() {
            fs::create_dir_all(p)?;
        }
        fs::write(run.join(&name), tree.to_json()?)?;
        tree_files.push(name);
    }
    let provider_fixture = if raws.is_empty() {
        None
    } else {
        write_fixture(&run.join("provider_fixture.json"), &raws)?;
        Some("provider_fixture.json".to_string())
    };

    let plan = Plan { cfg, layout: &layout, tasks: &tasks, trees: &trees };
    let next = AtomicUsize::new(0);
    let reports = Mutex::new(Vec::new());
    let workers = cfg.workers.clamp(1, cfg.seeds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                let report = run_seed(&plan, run, seed);
                reports.lock().unwrap_or_else(|e| e.into_inner()).push(report);
            });
        }
    });
    let mut seeds = reports.into_inner().unwrap_or_else(|e| e.into_inner());
    seeds.sort_by_key(|r| cfg.seeds.iter().position(|&s| s == r.seed));

    let manifest = RunManifest {
        config_hash: cfg.hash()?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        method: cfg.method,
        env: cfg.env_name()?,
        seeds,
        provider_fixture,
        transcripts: list_files(&transcripts, run),
        subgoal_trees: tree_files,
    };
    write_json(&run.join("manifest.json"), &manifest)?;
    if manifest.seeds.iter().any(|s| s.error.is_none()) {
        write_summary_csv(&summarize(&[run.to_path_buf()])?, &run.join("summary.csv"))?;
    }
    Ok(manifest)
}

/// Loads a run directory's manifest.
pub fn load_manifest(run: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(run.join("manifest.json"))?;
    serde_json::from_str(&text).map_err(Error::from)
}
