use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{seed_dir, MetricsRow, TimingRow};
use crate::agent::Method;
use crate::envs::base_name;
use crate::{Error, Result};

/// Published success rate (percent) and completion time (seconds) of a
/// method on a full-scale map, shown next to desk-scale numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub success_mean: f64,
    pub success_sd: f64,
    pub time_mean_s: f64,
    pub time_sd_s: f64,
}

pub fn reference(method: Method, env: &str) -> Option<Reference> {
    let r = |success_mean, success_sd, time_mean_s, time_sd_s| {
        Some(Reference { success_mean, success_sd, time_mean_s, time_sd_s })
    };
    match (method, base_name(env)) {
        (Method::Dsc, "point_maze") => r(0.0, 0.0, 1063.0, 274.0),
        (Method::Dsc, "four_rooms") => r(86.0, 8.0, 1035.0, 479.0),
        (Method::Dsc, "e_maze") => r(0.0, 0.0, 1345.0, 145.0),
        (Method::Dsc, "tunnel") => r(0.0, 0.0, 1368.0, 370.0),
        (Method::Ddpg, "point_maze") => r(0.0, 0.0, 1187.0, 116.0),
        (Method::Ddpg, "four_rooms") => r(0.0, 0.0, 1331.0, 355.0),
        (Method::Ddpg, "e_maze") => r(0.0, 0.0, 1344.0, 83.0),
        (Method::Ddpg, "tunnel") => r(0.0, 0.0, 1527.0, 527.0),
        (Method::Ldsc, "point_maze") => r(100.0, 0.0, 485.0, 174.0),
        (Method::Ldsc, "four_rooms") => r(95.0, 2.0, 678.0, 208.0),
        (Method::Ldsc, "e_maze") => r(100.0, 0.0, 86.5, 12.5),
        (Method::Ldsc, "tunnel") => r(81.8, 3.6, 906.0, 306.0),
        _ => None,
    }
}

/// Final-window statistics of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedWindow {
    pub seed: u64,
    pub success_rate: f64,
    /// Fraction of window episodes that ended with every landmark set.
    pub full_attainment_rate: f64,
    pub mean_subgoals: f64,
    pub steps_on_success: Vec<usize>,
    pub mean_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub env: String,
    pub seeds: usize,
    pub window: usize,
    /// Percent.
    pub success_mean: f64,
    pub success_sd: f64,
    pub full_attainment_mean: f64,
    pub subgoals_mean: f64,
    /// Environment steps of successful window episodes, pooled over seeds.
    pub steps_mean: Option<f64>,
    pub steps_sd: Option<f64>,
    pub wall_ms_mean: Option<f64>,
    pub reference_success: Option<String>,
    pub reference_time_s: Option<String>,
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Statistics over the last `k` episodes (all of them if fewer).
pub fn window_stats(
    rows: &[MetricsRow],
    timing: &[TimingRow],
    k: usize,
    landmark_count: usize,
) -> Result<SeedWindow> {
    if rows.is_empty() || k == 0 {
        return Err(Error::Config("empty final window".into()));
    }
    let mut rows = rows.to_vec();
    rows.sort_by_key(|r| r.episode);
    let w = &rows[rows.len().saturating_sub(k)..];
    let n = w.len() as f64;
    let first = w[0].episode;
    let wall: Vec<f64> = timing.iter().filter(|t| t.episode >= first).map(|t| t.wall_ms).collect();
    Ok(SeedWindow {
        seed: w[0].seed,
        success_rate: w.iter().filter(|r| r.success == 1).count() as f64 / n,
        full_attainment_rate: w.iter().filter(|r| r.subgoals_attained >= landmark_count).count() as f64 / n,
        mean_subgoals: w.iter().map(|r| r.subgoals_attained as f64).sum::<f64>() / n,
        steps_on_success: w.iter().filter(|r| r.success == 1).map(|r| r.steps).collect(),
        mean_wall_ms: (!wall.is_empty()).then(|| mean(&wall)),
    })
}

/// Window statistics of every completed seed of a run directory.
pub fn run_windows(run: &Path) -> Result<(ExperimentConfig, Vec<SeedWindow>)> {
    let cfg: ExperimentConfig = serde_json::from_str(
        &fs::read_to_string(run.join("config.json"))
            .map_err(|e| Error::Config(format!("{} is not a run directory: {e}", run.display())))?,
    )?;
    let landmarks = cfg.layout()?.landmarks.len();
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(run, seed);
        if dir.join("error.txt").exists() || !dir.join("metrics.csv").exists() {
            continue;
        }
        let rows: Vec<MetricsRow> = read_csv(&dir.join("metrics.csv"))?;
        let timing: Vec<TimingRow> =
            if dir.join("timing.csv").exists() { read_csv(&dir.join("timing.csv"))? } else { Vec::new() };
        out.push(window_stats(&rows, &timing, cfg.window, landmarks)?);
    }
    Ok((cfg, out))
}

/// One row per (method, env) over all given run directories.
pub fn summarize(runs: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    if runs.is_empty() {
        return Err(Error::Config("no run directories".into()));
    }
    let mut groups: BTreeMap<(Method, String), (usize, Vec<SeedWindow>)> = BTreeMap::new();
    for run in runs {
        let (cfg, windows) = run_windows(run)?;
        let entry = groups.entry((cfg.method, cfg.env_name()?)).or_insert((cfg.window, Vec::new()));
        entry.1.extend(windows);
    }
    let mut out = Vec::new();
    for ((method, env), (window, seeds)) in groups {
        if seeds.is_empty() {
            return Err(Error::Config(format!("{method} on {env}: no completed seeds")));
        }
        let success: Vec<f64> = seeds.iter().map(|s| 100.0 * s.success_rate).collect();
        let steps: Vec<f64> = seeds.iter().flat_map(|s| s.steps_on_success.iter().map(|&x| x as f64)).collect();
        let wall: Vec<f64> = seeds.iter().filter_map(|s| s.mean_wall_ms).collect();
        let reference = reference(method, &env);
        out.push(SummaryRow {
            method,
            env,
            seeds: seeds.len(),
            window,
            success_mean: mean(&success),
            success_sd: sample_sd(&success),
            full_attainment_mean: 100.0 * mean(&seeds.iter().map(|s| s.full_attainment_rate).collect::<Vec<_>>()),
            subgoals_mean: mean(&seeds.iter().map(|s| s.mean_subgoals).collect::<Vec<_>>()),
            steps_mean: (!steps.is_empty()).then(|| mean(&steps)),
            steps_sd: (!steps.is_empty()).then(|| sample_sd(&steps)),
            wall_ms_mean: (!wall.is_empty()).then(|| mean(&wall)),
            reference_success: reference.map(|r| format!("{}% ± {}%", r.success_mean, r.success_sd)),
            reference_time_s: reference.map(|r| format!("{} ± {}", r.time_mean_s, r.time_sd_s)),
        });
    }
    Ok(out)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

/// Plain-text table. Completion time is in environment steps; wall-clock
/// is per training episode.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<18} {:>5} {:>16} {:>9} {:>18} {:>10} {:>14} {:>14}",
        "method", "env", "seeds", "success %", "subgoals", "steps (success)", "wall ms", "ref success", "ref time s"
    );
    for r in rows {
        let steps = match (r.steps_mean, r.steps_sd) {
            (Some(m), Some(sd)) => format!("{m:.1} ± {sd:.1}"),
            _ => "-".into(),
        };
        let _ = writeln!(
            s,
            "{:<6} {:<18} {:>5} {:>16} {:>9.2} {:>18} {:>10} {:>14} {:>14}",
            r.method.to_string(),
            r.env,
            r.seeds,
            format!("{:.1} ± {:.1}", r.success_mean, r.success_sd),
            r.subgoals_mean,
            steps,
            opt(r.wall_ms_mean, 1),
            r.reference_success.as_deref().unwrap_or("-"),
            r.reference_time_s.as_deref().unwrap_or("-"),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(success: &[u8]) -> Vec<MetricsRow> {
        success
            .iter()
            .enumerate()
            .map(|(i, &s)| MetricsRow {
                seed: 0,
                episode: i,
                task_id: 0,
                ret: s as f64,
                success: s,
                steps: 10 + i,
                options_in_repertoire: 2,
                subgoals_attained: if s == 1 { 2 } else { 1 },
            })
            .collect()
    }

    #[test]
    fn all_success_window() {
        let w = window_stats(&rows(&[0, 0, 1, 1, 1]), &[], 3, 2).unwrap();
        assert_eq!(w.success_rate, 1.0);
        assert_eq!(w.full_attainment_rate, 1.0);
        assert_eq!(w.steps_on_success, vec![12, 13, 14]);
    }

    #[test]
    fn mixed_window() {
        let w = window_stats(&rows(&[1, 1, 0, 1]), &[], 20, 2).unwrap();
        assert_eq!(w.success_rate, 0.75);
        assert_eq!(w.mean_subgoals, 1.75);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert!(window_stats(&[], &[], 20, 2).is_err());
        assert!(window_stats(&rows(&[1]), &[], 0, 2).is_err());
    }

    #[test]
    fn window_ignores_row_order() {
        let mut r = rows(&[0, 0, 1, 1]);
        r.reverse();
        assert_eq!(window_stats(&r, &[], 2, 2).unwrap().success_rate, 1.0);
    }

    #[test]
    fn sd_and_reference() {
        assert_eq!(sample_sd(&[1.0]), 0.0);
        assert!((sample_sd(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
        let r = reference(Method::Ldsc, "mini_four_rooms").unwrap();
        assert_eq!((r.success_mean, r.success_sd), (95.0, 2.0));
        assert_eq!(reference(Method::Dsc, "four_rooms").unwrap().success_mean, 86.0);
        assert_eq!(reference(Method::Ddpg, "custom"), None);
    }
}
