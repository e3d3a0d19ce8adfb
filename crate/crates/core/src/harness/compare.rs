use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate, EvalReport};
use super::train::train_with;
use super::{io_err, HarnessError};
use crate::curriculum::CurriculumMode;
use crate::observation::ObsVariant;
use crate::sac::Checkpoint;
use crate::simworld::EnvId;

#[derive(Clone, Debug)]
pub struct GridOptions {
    /// Every grid cell is this config with `obs_variant` and `curriculum_mode` replaced.
    pub base: TrainConfig,
    pub seeds: Vec<u64>,
    pub eval_env: EnvId,
    pub sessions: usize,
    pub episodes: usize,
    pub eval_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub obs_variant: ObsVariant,
    pub curriculum_mode: CurriculumMode,
    pub seeds: Vec<u64>,
    /// Mean over seeds of the aggregate evaluation success rate.
    pub success_rate: f64,
    pub mean_reward: f64,
    pub per_seed: Vec<EvalReport>,
}

pub fn grid_configs(base: &TrainConfig, seed: u64, root: &Path) -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for variant in ObsVariant::ALL {
        for mode in CurriculumMode::ALL {
            let mut cfg = base.clone();
            cfg.obs_variant = variant;
            cfg.curriculum_mode = mode;
            cfg.seed = seed;
            cfg.out_dir = root.join(format!("{variant}_{}_seed{seed}", mode.label()));
            out.push(cfg);
        }
    }
    out
}

fn finished_checkpoint(cfg: &TrainConfig) -> Option<Checkpoint> {
    let ck = Checkpoint::load(&cfg.out_dir.join("checkpoint.json")).ok()?;
    let run: TrainConfig = serde_json::from_value(ck.run.clone()).ok()?;
    (run == *cfg && ck.episode == cfg.total_episodes).then_some(ck)
}

/// Train and evaluate every cell of the 3 × 3 grid under `root`. A cell whose
/// output directory already holds a finished run of the same config is reused.
pub fn compare(
    opts: &GridOptions,
    root: &Path,
    mut progress: impl FnMut(&TrainConfig, u64),
) -> Result<Vec<CompareRow>, HarnessError> {
    let mut rows: Vec<CompareRow> = Vec::new();
    for &seed in &opts.seeds {
        for cfg in grid_configs(&opts.base, seed, root) {
            let ck = match finished_checkpoint(&cfg) {
                Some(ck) => ck,
                None => {
                    let summary = train_with(&cfg, |m| progress(&cfg, m.episode))?;
                    Checkpoint::load(&summary.checkpoint)?
                }
            };
            let report = evaluate(
                &ck,
                opts.eval_env,
                opts.sessions,
                opts.episodes,
                opts.eval_seed,
            )?;
            match rows.iter_mut().find(|r| {
                r.obs_variant == cfg.obs_variant && r.curriculum_mode == cfg.curriculum_mode
            }) {
                Some(row) => {
                    row.seeds.push(seed);
                    row.per_seed.push(report);
                }
                None => rows.push(CompareRow {
                    obs_variant: cfg.obs_variant,
                    curriculum_mode: cfg.curriculum_mode,
                    seeds: vec![seed],
                    success_rate: 0.0,
                    mean_reward: 0.0,
                    per_seed: vec![report],
                }),
            }
        }
    }
    for row in &mut rows {
        let n = row.per_seed.len() as f64;
        row.success_rate = row
            .per_seed
            .iter()
            .map(|r| r.mean_success_rate)
            .sum::<f64>()
            / n;
        row.mean_reward = row.per_seed.iter().map(|r| r.mean_reward).sum::<f64>() / n;
    }
    Ok(rows)
}

/// Writes `compare.csv`, `compare.json` and `compare.md` into `dir`.
pub fn write_compare_report(
    rows: &[CompareRow],
    opts: &GridOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join("compare.csv");
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "obs_variant",
        "training",
        "seeds",
        "success_rate",
        "mean_reward",
    ])?;
    for r in rows {
        let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
        w.write_record([
            r.obs_variant.to_string(),
            r.curriculum_mode.label().to_string(),
            seeds.join(" "),
            r.success_rate.to_string(),
            r.mean_reward.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    let json_path = dir.join("compare.json");
    fs::write(&json_path, serde_json::to_string_pretty(rows)?).map_err(io_err(&json_path))?;

    let md_path = dir.join("compare.md");
    let mut md = String::new();
    let _ = writeln!(
        md,
        "# Comparison grid\n\nEvaluated on {} with {} sessions of {} episodes (deterministic policy), \
         {} training episodes per run, seeds {:?}.\n",
        opts.eval_env, opts.sessions, opts.episodes, opts.base.total_episodes, opts.seeds
    );
    md.push_str("| Input | Training | Success rate (%) | Mean reward |\n|---|---|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            md,
            "| {} | {} | {:.1} | {:.1} |",
            r.obs_variant.label(),
            r.curriculum_mode.label(),
            100.0 * r.success_rate,
            r.mean_reward
        );
    }
    fs::write(&md_path, md).map_err(io_err(&md_path))?;
    Ok(vec![csv_path, json_path, md_path])
}
