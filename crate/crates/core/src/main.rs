use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use depthnav::harness::{self, GridOptions, TrainConfig};
use depthnav::sac::Checkpoint;
use depthnav::EnvId;

#[derive(Parser)]
#[command(
    name = "depthnav",
    version,
    about = "Depth-based mapless navigation with SAC"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an agent from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = parse_env)]
        env: EnvId,
        #[arg(long, default_value_t = 5)]
        sessions: usize,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Roll out one episode and write a trajectory CSV and an SVG plot.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = parse_env)]
        env: EnvId,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train and evaluate all observation variants under all three training schedules.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_env, default_value = "3")]
        env: EnvId,
        #[arg(long, default_value_t = 5)]
        sessions: usize,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
}

fn parse_env(s: &str) -> Result<EnvId, String> {
    let n: u8 = s.parse().map_err(|_| format!("`{s}` is not 1, 2 or 3"))?;
    EnvId::try_from(n).map_err(|e| e.to_string())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train { config, seed, out } => {
            let mut cfg = TrainConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let total = cfg.total_episodes;
            let summary = harness::train_with(&cfg, |m| {
                if let Some(t) = m.transition {
                    eprintln!(
                        "episode {}: {} -> {} (rate {:.2})",
                        t.episode_index, t.from, t.to, t.window_rate
                    );
                }
                if (m.episode + 1) % 100 == 0 {
                    eprintln!(
                        "episode {}/{total} {} success_rate_100={:.2}",
                        m.episode + 1,
                        m.env_id,
                        m.success_rate_100
                    );
                }
            })?;
            println!("metrics:     {}", summary.metrics_csv.display());
            println!("transitions: {}", summary.transitions_csv.display());
            println!("checkpoint:  {}", summary.checkpoint.display());
        }
        Cmd::Eval {
            checkpoint,
            env,
            sessions,
            episodes,
            seed,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let report = harness::evaluate(&ck, env, sessions, episodes, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Export {
            checkpoint,
            env,
            seed,
            out,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let paths = harness::export_trajectory(&ck, env, seed, &out)?;
            println!(
                "{} steps, {}",
                paths.trace.steps.len(),
                paths.trace.end.as_str()
            );
            println!("csv: {}", paths.csv.display());
            println!("svg: {}", paths.svg.display());
        }
        Cmd::Compare {
            config,
            seeds,
            out,
            env,
            sessions,
            episodes,
        } => {
            let base = TrainConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let opts = GridOptions {
                base,
                seeds,
                eval_env: env,
                sessions,
                episodes,
                eval_seed: 0,
            };
            let rows = harness::compare(&opts, &out, |cfg, ep| {
                if (ep + 1) % 500 == 0 {
                    eprintln!("{}: episode {}", cfg.out_dir.display(), ep + 1);
                }
            })?;
            for p in harness::write_compare_report(&rows, &opts, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
