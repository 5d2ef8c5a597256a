//! Learning curves and option footprints as CSV plus hand-written SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::run::{seed_dir, MetricsRow};
use super::summary::{read_csv, run_windows};
use crate::envs::MazeLayout;
use crate::skill_chain::OptionTreeSnapshot;
use crate::Result;

pub const SMOOTHING_WINDOW: usize = 10;

/// Trailing moving average. The first `w - 1` points average over what is
/// available.
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut sum = 0.0;
    (0..xs.len())
        .map(|i| {
            sum += xs[i];
            if i >= w {
                sum -= xs[i - w];
            }
            sum / (i + 1).min(w) as f64
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct CurveRow {
    episode: usize,
    #[serde(rename = "return")]
    ret: f64,
    smoothed_return: f64,
    success: u8,
}

#[derive(Debug, Serialize)]
pub struct FootprintRow {
    pub option: usize,
    pub kind: String,
    pub subgoal: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// Trained options that have a fitted initiation box.
pub fn footprint_rows(tree: &OptionTreeSnapshot) -> Vec<FootprintRow> {
    tree.nodes
        .iter()
        .filter(|n| n.trained)
        .filter_map(|n| {
            n.r#box.map(|b| FootprintRow {
                option: n.id,
                kind: format!("{:?}", n.kind).to_lowercase(),
                subgoal: n.subgoal.clone(),
                x_min: b.min[0],
                y_min: b.min[1],
                x_max: b.max[0],
                y_max: b.max[1],
            })
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of several series over a shared x axis.
pub fn curve_svg(title: &str, series: &[(String, Vec<f64>)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0).max(2);
    let all = series.iter().flat_map(|s| s.1.iter().copied());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let px = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n - 1) as f64;
    let py = |y: f64| h - pad - (h - 2.0 * pad) * (y - lo) / (hi - lo);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.2}</text>"#, pad - 4.0, pad + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{lo:.2}</text>"#, pad - 4.0, h - pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">episode {}</text>"#, w - pad, h - pad + 16.0, n - 1);
    for (k, (label, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ys.iter().enumerate().map(|(i, &y)| format!("{:.2},{:.2}", px(i), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{label}</text>"#,
            w - pad - 80.0,
            pad + 14.0 * (k as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Maze walls, landmarks and one rectangle per footprint row.
pub fn footprint_svg(layout: &MazeLayout, rows: &[FootprintRow]) -> String {
    let [x0, y0, x1, y1] = layout.bounds;
    let k = 500.0 / (x1 - x0).max(y1 - y0);
    let (w, h) = ((x1 - x0) * k + 20.0, (y1 - y0) * k + 20.0);
    // y grows upwards in the map and downwards in SVG.
    let px = |x: f64| 10.0 + (x - x0) * k;
    let py = |y: f64| 10.0 + (y1 - y) * k;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}">"#);
    let _ = writeln!(s, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    for (i, r) in rows.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect class="option" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.25" stroke="{color}"><title>o{} {} {}</title></rect>"#,
            px(r.x_min),
            py(r.y_max),
            (r.x_max - r.x_min) * k,
            (r.y_max - r.y_min) * k,
            r.option,
            r.kind,
            r.subgoal
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="2"/>"#,
        px(x0),
        py(y1),
        (x1 - x0) * k,
        (y1 - y0) * k
    );
    for wall in &layout.walls {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="3"/>"#,
            px(wall.from[0]),
            py(wall.from[1]),
            px(wall.to[0]),
            py(wall.to[1])
        );
    }
    for l in &layout.landmarks {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="gold" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            px(l.center[0]),
            py(l.center[1]),
            l.radius * k,
            px(l.center[0]) + l.radius * k,
            py(l.center[1]),
            l.name
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `plots/` inside each run directory and returns the files created.
pub fn plot(runs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for run in runs {
        let (cfg, _) = run_windows(run)?;
        let layout = cfg.layout()?;
        let out = run.join("plots");
        fs::create_dir_all(&out)?;
        let mut series = Vec::new();
        for &seed in &cfg.seeds {
            let dir = seed_dir(run, seed);
            let metrics = dir.join("metrics.csv");
            if !metrics.exists() {
                continue;
            }
            let rows: Vec<MetricsRow> = read_csv(&metrics)?;
            let returns: Vec<f64> = rows.iter().map(|r| r.ret).collect();
            let smooth = moving_average(&returns, SMOOTHING_WINDOW);
            let path = out.join(format!("curve_seed_{seed}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            for (r, s) in rows.iter().zip(&smooth) {
                w.serialize(CurveRow { episode: r.episode, ret: r.ret, smoothed_return: *s, success: r.success })?;
            }
            w.flush()?;
            written.push(path);
            series.push((format!("seed {seed}"), smooth));

            let tree_path = dir.join("trees").join("option_tree.json");
            if tree_path.exists() {
                let tree: OptionTreeSnapshot = serde_json::from_str(&fs::read_to_string(&tree_path)?)?;
                let rows = footprint_rows(&tree);
                let csv_path = out.join(format!("footprint_seed_{seed}.csv"));
                let mut w = csv::Writer::from_path(&csv_path)?;
                for r in &rows {
                    w.serialize(r)?;
                }
                w.flush()?;
                let svg_path = out.join(format!("footprint_seed_{seed}.svg"));
                fs::write(&svg_path, footprint_svg(&layout, &rows))?;
                written.extend([csv_path, svg_path]);
            }
        }
        let title = format!("{} on {}: return, moving average of {}", cfg.method, cfg.env_name()?, SMOOTHING_WINDOW);
        let svg = out.join("learning_curve.svg");
        fs::write(&svg, curve_svg(&title, &series))?;
        written.push(svg);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::builtin_layout;
    use crate::skill_chain::{BoxRegion, SnapshotNode};
    use crate::smdp::OptionKind;

    #[test]
    fn constant_series_stays_flat() {
        assert!(moving_average(&[1.0; 30], 10).iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn impulse_spreads_into_plateau() {
        let mut xs = vec![0.0; 50];
        xs[20] = 1.0;
        let m = moving_average(&xs, 10);
        for (i, v) in m.iter().enumerate() {
            let want = if (20..30).contains(&i) { 0.1 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "{i}: {v}");
        }
    }

    #[test]
    fn partial_windows_use_available_points() {
        assert_eq!(moving_average(&[2.0, 4.0, 6.0], 10), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn one_rectangle_per_trained_option() {
        let node = |id, trained, b: Option<BoxRegion>| SnapshotNode {
            id,
            kind: OptionKind::Goal,
            subgoal: "key".into(),
            r#box: b,
            trained,
            budget: 100,
        };
        let b = BoxRegion { min: [1.0, 1.0], max: [3.0, 4.0] };
        let tree = OptionTreeSnapshot {
            nodes: vec![node(0, true, None), node(1, true, Some(b)), node(2, false, Some(b)), node(3, true, Some(b))],
            edges: vec![(1, 3)],
        };
        let rows = footprint_rows(&tree);
        assert_eq!(rows.len(), 2);
        let svg = footprint_svg(&builtin_layout("four_rooms").unwrap(), &rows);
        assert_eq!(svg.matches(r#"class="option""#).count(), 2);
    }

    #[test]
    fn curve_svg_has_one_polyline_per_series() {
        let svg = curve_svg("t", &[("a".into(), vec![0.0, 1.0]), ("b".into(), vec![1.0, 1.0])]);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
