//! Experiment configuration, training runs, metrics files, summary tables
//! and plots.

mod config;
mod plot;
mod run;
mod summary;

pub use config::{episode_seed, preset, ExperimentConfig, PRESETS};
pub use plot::{curve_svg, footprint_rows, footprint_svg, moving_average, plot, FootprintRow, SMOOTHING_WINDOW};
pub use run::{
    load_manifest, plan_trees, run_experiment, seed_dir, MetricsRow, RunManifest, SeedReport, TimingRow,
};
pub use summary::{
    format_table, mean, read_csv, reference, run_windows, sample_sd, summarize, window_stats,
    write_summary_csv, Reference, SeedWindow, SummaryRow,
};
