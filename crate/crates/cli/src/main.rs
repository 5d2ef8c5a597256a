use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldsc::agent::load_agent;
use ldsc::envs::{builtin_layout, load_layout, save_layout, Env};
use ldsc::harness::{
    episode_seed, format_table, plan_trees, plot, run_experiment, summarize, write_summary_csv, ExperimentConfig,
};
use ldsc::subgoal::{write_fixture, ProviderMode};
use ldsc::Error;

#[derive(Parser)]
#[command(name = "ldsc", version, about = "Hierarchical RL with language-model subgoals and skill chaining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Added to every seed in the config.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run greedy episodes from a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        task: usize,
    },
    /// Final-window success table over run directories.
    Summarize {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Learning curves and option footprints for run directories.
    Plot {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Query the config's provider once and write a fixture file.
    LlmFetch {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `<output_dir>/provider_fixture.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a layout file.
    ValidateLayout { path: PathBuf },
    /// Write a builtin layout to a file.
    ExportLayout { name: String, path: PathBuf },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config, seed_offset, output } => {
            let mut cfg = load_config(&config)?;
            for s in &mut cfg.seeds {
                *s += seed_offset;
            }
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            let manifest = run_experiment(&cfg)?;
            for s in &manifest.seeds {
                match &s.error {
                    None => println!("seed {}: {} episodes", s.seed, s.episodes_completed),
                    Some(e) => println!("seed {}: failed after {} episodes: {e}", s.seed, s.episodes_completed),
                }
            }
            if manifest.seeds.iter().any(|s| s.error.is_none()) {
                print!("{}", format_table(&summarize(&[cfg.output_dir.clone()])?));
            }
            println!("run directory: {}", cfg.output_dir.display());
            if manifest.seeds.iter().all(|s| s.error.is_some()) {
                return Err(Error::Internal("every seed failed".into()));
            }
        }
        Command::Eval { checkpoint, episodes, seed, task } => {
            let mut agent = load_agent(&checkpoint, seed)?;
            let mut env = Env::new(agent.layout().clone(), agent.env_config().clone())?;
            let (mut wins, mut steps, mut ret) = (0, 0, 0.0);
            for i in 0..episodes {
                let r = agent.run_episode(&mut env, task, episode_seed(seed, i), false)?;
                if r.success {
                    wins += 1;
                    steps += r.steps;
                }
                ret += r.ret;
            }
            println!("method: {}", agent.method());
            println!("success: {wins}/{episodes}");
            if wins > 0 {
                println!("mean steps on success: {:.1}", steps as f64 / wins as f64);
            }
            println!("mean return: {:.3}", ret / episodes.max(1) as f64);
        }
        Command::Summarize { runs, csv } => {
            let rows = summarize(&runs)?;
            print!("{}", format_table(&rows));
            if let Some(p) = csv {
                write_summary_csv(&rows, &p)?;
            }
        }
        Command::Plot { runs } => {
            for f in plot(&runs)? {
                println!("{}", f.display());
            }
        }
        Command::LlmFetch { config, out } => {
            let cfg = load_config(&config)?;
            let layout = cfg.layout()?;
            let tasks = cfg.task_list(&layout);
            let transcripts = cfg.output_dir.join("transcripts");
            let http = matches!(cfg.provider_mode(), ProviderMode::Http(_));
            let cfg = ExperimentConfig { method: ldsc::agent::Method::Ldsc, ..cfg };
            let (_, raws) = plan_trees(&cfg, &layout, &tasks, http.then_some(transcripts.as_path()))?;
            let out = out.unwrap_or_else(|| cfg.output_dir.join("provider_fixture.json"));
            write_fixture(&out, &raws)?;
            println!("{}", out.display());
        }
        Command::ValidateLayout { path } => {
            let layout = load_layout(&path)?;
            println!(
                "{}: ok ({} walls, {} landmarks, goal {})",
                layout.name,
                layout.walls.len(),
                layout.landmarks.len(),
                layout.goal_landmark
            );
        }
        Command::ExportLayout { name, path } => {
            save_layout(&builtin_layout(&name)?, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // Bad input is a usage error, like an unknown flag.
            match e {
                Error::Config(_) | Error::Layout(_) | Error::UnknownLayout(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
