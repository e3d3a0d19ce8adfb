//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass a substring to run only matching criteria.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use depthnav::curriculum::{CurriculumMode, CurriculumState, EpisodeOutcome};
use depthnav::harness::{self, GridOptions, TrainConfig};
use depthnav::nn::{ActionBounds, Mlp};
use depthnav::reward::{compute_reward, RewardBranch, RewardConfig};
use depthnav::sac::{Batch, SacAgent, SacConfig, Transition};
use depthnav::simworld::{raycast_depth, EnvId, EnvSpec, Obstacle, Pose, SimParams, Simulator};

const DESK: &str = include_str!("../../../configs/desk.json");
const LEARNING_SEEDS: [u64; 3] = [0, 1, 2];
const GATE_EPISODES: u64 = 2000;
const GRID_EPISODES: u64 = 2000;
const GRID_SEEDS: [u64; 1] = [0];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn desk_config() -> TrainConfig {
    TrainConfig::from_json(DESK).expect("desk config parses")
}

// ---------------------------------------------------------------------------

fn reward_exactness() -> Outcome {
    let start = Instant::now();
    let cfg = RewardConfig::default();
    check(
        (
            cfg.r_reached,
            cfg.r_collision,
            cfg.r_recede,
            cfg.gain,
            cfg.d_min,
        ) == (500.0, -550.0, -10.0, 200.0, 0.3),
        || format!("default constants {cfg:?}"),
    )?;
    // (d, d_prev, v, collision) -> (reward, terminal, branch)
    let table = [
        (0.1, 5.0, 0.3, true, -550.0, true, RewardBranch::Collision),
        (2.0, 2.5, 0.7, true, -550.0, true, RewardBranch::Collision),
        (0.2, 0.5, 0.3, false, 500.0, true, RewardBranch::Reached),
        (0.29, 0.31, 1.0, false, 500.0, true, RewardBranch::Reached),
        (3.1, 3.0, 0.3, false, -10.0, false, RewardBranch::Recede),
        (2.0, 2.0, 0.0, false, -10.0, false, RewardBranch::Recede),
    ];
    for (d, dp, v, col, r, term, br) in table {
        let out = compute_reward(d, dp, v, col, &cfg);
        check(
            out.reward == r && out.terminal == term && out.branch == br,
            || format!("compute_reward({d}, {dp}, {v}, {col}) = {out:?}"),
        )?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let d: f64 = rng.random_range(0.3..8.0);
        let dp = d + rng.random_range(1e-6..0.2);
        let v: f64 = rng.random_range(-0.5..1.5);
        let vr = (1.0 - v.clamp(0.0, 1.0).max(0.1)).powf(1.0 / d.max(0.1));
        let want = 200.0 * (dp - d) * vr;
        let out = compute_reward(d, dp, v, false, &cfg);
        check(
            out.branch == RewardBranch::Progress && (out.reward - want).abs() <= 1e-12,
            || format!("progress branch ({d}, {dp}, {v}): {} vs {want}", out.reward),
        )?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!("6 table rows, 10000 progress cases, {secs:.3}s"))
}

// ---------------------------------------------------------------------------

fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Batch {
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            state: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: [rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95)],
            reward: rng.random_range(-10.0..10.0),
            next_state: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: rng.random_bool(0.3),
        })
        .collect();
    Batch::from_transitions(&ts)
}

fn fd_relative_error(
    agent: &SacAgent,
    net: fn(&mut SacAgent) -> &mut Mlp,
    loss: &dyn Fn(&SacAgent) -> f64,
    analytic: &[f64],
) -> f64 {
    let mut probe = agent.clone();
    let base = net(&mut probe).flat_params();
    let h = 1e-6;
    let mut diff2 = 0.0;
    let mut num2 = 0.0;
    for (k, &g) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] += h;
        net(&mut probe).set_flat_params(&p);
        let up = loss(&probe);
        p[k] = base[k] - h;
        net(&mut probe).set_flat_params(&p);
        let down = loss(&probe);
        let fd = (up - down) / (2.0 * h);
        diff2 += (fd - g).powi(2);
        num2 += fd * fd;
    }
    let ana2: f64 = analytic.iter().map(|g| g * g).sum();
    let denom = num2.sqrt() + ana2.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        diff2.sqrt() / denom
    }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 3];
    for i in 0..100 {
        let dim = rng.random_range(2..8);
        let depth = rng.random_range(1..3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(3..10)).collect();
        let cfg = SacConfig {
            hidden,
            alpha: rng.random_range(0.0..0.5),
            batch_size: 4,
            replay_capacity: 16,
            ..SacConfig::default()
        };
        let bounds = ActionBounds {
            v_max: 1.0,
            w_max: 1.0,
        };
        let mut agent = SacAgent::new(dim, cfg, bounds, &mut rng).map_err(|e| e.to_string())?;
        // decouple the target from the value network
        let p: Vec<f64> = agent
            .value_target()
            .flat_params()
            .iter()
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        agent.value_target_mut().set_flat_params(&p);
        let n = rng.random_range(1..7);
        let batch = random_batch(&mut rng, n, dim);
        let noise: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                [
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                ]
            })
            .collect();

        let g = agent
            .q_loss(&batch)
            .map_err(|e| e.to_string())?
            .grads
            .flatten();
        let e_q = fd_relative_error(
            &agent,
            |a| a.q_mut(),
            &|a| a.q_loss(&batch).unwrap().loss,
            &g,
        );
        let g = agent
            .v_loss_with_noise(&batch, &noise)
            .map_err(|e| e.to_string())?
            .grads
            .flatten();
        let e_v = fd_relative_error(
            &agent,
            |a| a.value_mut(),
            &|a| a.v_loss_with_noise(&batch, &noise).unwrap().loss,
            &g,
        );
        let g = agent
            .policy_loss_with_noise(&batch, &noise)
            .map_err(|e| e.to_string())?
            .grads
            .flatten();
        let e_p = fd_relative_error(
            &agent,
            |a| a.policy_mut(),
            &|a| a.policy_loss_with_noise(&batch, &noise).unwrap().loss,
            &g,
        );
        for (w, e) in worst.iter_mut().zip([e_q, e_v, e_p]) {
            *w = w.max(e);
        }
        check(e_q < 1e-3 && e_v < 1e-3 && e_p < 1e-3, || {
            format!("network {i}: J_Q {e_q:.2e}, J_V {e_v:.2e}, J_pi {e_p:.2e}")
        })?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "100 networks, worst rel. error J_Q {:.1e} J_V {:.1e} J_pi {:.1e}, {secs:.1}s",
        worst[0], worst[1], worst[2]
    ))
}

// ---------------------------------------------------------------------------

/// First 1 mm sample that lands in a box or beyond a wall.
fn march(origin: [f64; 2], bearing: f64, boxes: &[Obstacle], half: f64, max_range: f64) -> f64 {
    let (dx, dy) = (bearing.cos(), bearing.sin());
    let mut k = 0u32;
    loop {
        let t = k as f64 * 1e-3;
        if t >= max_range {
            return max_range;
        }
        let (x, y) = (origin[0] + t * dx, origin[1] + t * dy);
        let blocked = x.abs() >= half
            || y.abs() >= half
            || boxes.iter().any(|b| {
                (x - b.center[0]).abs() <= b.half_extents[0]
                    && (y - b.center[1]).abs() <= b.half_extents[1]
            });
        if blocked {
            return t;
        }
        k += 1;
    }
}

fn simulator_oracle() -> Outcome {
    let start = Instant::now();
    let params = SimParams::default();
    let half = params.half_side();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut hits = 0;
    for case in 0..1000 {
        let boxes: Vec<Obstacle> = match case % 3 {
            0 => {
                let env = [EnvId::Env2, EnvId::Env3][case % 2];
                let mut sim = Simulator::new(
                    params.clone(),
                    EnvSpec::standard(env, &params, case as u64),
                    500,
                )
                .map_err(|e| e.to_string())?;
                sim.reset(case as u64).map_err(|e| e.to_string())?;
                sim.obstacles().to_vec()
            }
            _ => (0..rng.random_range(1..8))
                .map(|_| {
                    let h = [rng.random_range(0.05..0.6), rng.random_range(0.05..0.6)];
                    let c = [
                        rng.random_range(-half + h[0]..half - h[0]),
                        rng.random_range(-half + h[1]..half - h[1]),
                    ];
                    Obstacle::fixed(c, h)
                })
                .collect(),
        };
        let pose = loop {
            let p = Pose::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-3.2..3.2),
            );
            if !boxes.iter().any(|b| b.distance_to(p.position()) < 1e-2)
                && p.x.abs() < half - 1e-2
                && p.y.abs() < half - 1e-2
            {
                break p;
            }
        };
        let frame = raycast_depth(&pose, &boxes, &params, 0);
        for (v, off) in frame.values().iter().zip(params.ray_offsets()) {
            let got = v * params.max_range;
            let want = march(
                pose.position(),
                pose.theta + off,
                &boxes,
                half,
                params.max_range,
            );
            worst = worst.max((got - want).abs());
            hits += usize::from(want < params.max_range);
            check((got - want).abs() <= 2e-3, || {
                format!(
                    "case {case}: pose {pose:?} bearing {off}: analytic {got} vs marched {want}"
                )
            })?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "1000 cases / 10000 rays ({hits} inside range), worst gap {:.2} mm, {secs:.1}s",
        worst * 1e3
    ))
}

// ---------------------------------------------------------------------------

fn target_update_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SacConfig {
        hidden: vec![32, 32],
        ..SacConfig::default()
    };
    let mut agent = SacAgent::new(
        34,
        cfg,
        ActionBounds {
            v_max: 1.0,
            w_max: 1.0,
        },
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    let psi: Vec<f64> = agent
        .value()
        .flat_params()
        .iter()
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    agent.value_mut().set_flat_params(&psi);
    agent.soft_update(1.0);
    let copied = agent
        .value_target()
        .flat_params()
        .iter()
        .zip(&psi)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    check(copied, || "tau = 1 is not a bit-exact copy".into())?;

    let target0: Vec<f64> = psi.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    agent.value_target_mut().set_flat_params(&target0);
    let gap = |a: &SacAgent| -> f64 {
        a.value_target()
            .flat_params()
            .iter()
            .zip(&psi)
            .map(|(t, p)| (t - p).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut prev = gap(&agent);
    let mut worst = 0.0f64;
    for k in 0..100 {
        agent.soft_update(0.05);
        let now = gap(&agent);
        let rate = now / prev;
        worst = worst.max((rate - 0.95).abs());
        check((rate - 0.95).abs() <= 1e-9, || {
            format!("step {k}: rate {rate}")
        })?;
        prev = now;
    }
    check(agent.value().flat_params() == psi, || {
        "soft update modified the source network".into()
    })?;
    Ok(format!(
        "hard copy bit-exact; 100 soft steps, worst |rate - 0.95| = {worst:.1e}"
    ))
}

// ---------------------------------------------------------------------------

fn feed(st: &mut CurriculumState, next: &mut u64, hits: usize, len: usize) -> Vec<(u64, u8, u8)> {
    let mut out = Vec::new();
    for i in 0..len {
        let o = EpisodeOutcome {
            success: i < hits,
            episode_index: *next,
            episode_return: 0.0,
            steps: 1,
        };
        *next += 1;
        if let Some(t) = st.record_episode(&o) {
            out.push((t.episode_index, t.from.number(), t.to.number()));
        }
    }
    out
}

/// Reference ladder: plain vector window, thresholds written out.
fn reference_ladder(stream: &[bool]) -> Vec<(u64, u8, u8)> {
    let (mut env, mut win, mut log) = (1u8, Vec::<bool>::new(), Vec::new());
    for (i, &s) in stream.iter().enumerate() {
        win.push(s);
        if win.len() > 100 {
            win.remove(0);
        }
        if win.len() < 100 {
            continue;
        }
        let rate = win.iter().filter(|&&b| b).count() as f64 / 100.0;
        let to = match env {
            1 if rate > 0.90 => 2,
            2 if rate > 0.80 => 3,
            2 if rate < 0.50 => 1,
            3 if rate < 0.50 => 2,
            _ => env,
        };
        if to != env {
            log.push((i as u64, env, to));
            env = to;
            win.clear();
        }
    }
    log
}

fn curriculum_state_machine() -> Outcome {
    // every block starts on a cleared window and ends in a transition
    let blocks = [100, 85, 49, 40, 95, 81, 30, 20];
    let mut st = CurriculumState::new(CurriculumMode::Incremental);
    let mut idx = 0u64;
    let mut got = Vec::new();
    for hits in blocks {
        got.extend(feed(&mut st, &mut idx, hits, 100));
    }
    let want = vec![
        (99, 1, 2),
        (199, 2, 3),
        (299, 3, 2),
        (399, 2, 1),
        (499, 1, 2),
        (599, 2, 3),
        (699, 3, 2),
        (799, 2, 1),
    ];
    check(got == want, || {
        format!("transitions {got:?}, expected {want:?}")
    })?;

    // rates exactly at a threshold hold position
    for (path, hold) in [
        (vec![], 90),
        (vec![100], 80),
        (vec![100], 50),
        (vec![100, 100], 50),
    ] {
        let mut st = CurriculumState::new(CurriculumMode::Incremental);
        let mut idx = 0;
        for h in &path {
            feed(&mut st, &mut idx, *h, 100);
        }
        let env = st.current_env();
        let moved = feed(&mut st, &mut idx, hold, 100);
        check(moved.is_empty() && st.current_env() == env, || {
            format!("{hold}% in {env} moved: {moved:?}")
        })?;
    }

    // a partial window never moves, whatever its rate
    let mut st = CurriculumState::new(CurriculumMode::Incremental);
    let mut idx = 0;
    check(feed(&mut st, &mut idx, 99, 99).is_empty(), || {
        "moved on a partial window".into()
    })?;

    // random streams against the reference ladder
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut total = 0;
    for _ in 0..200 {
        let p: f64 = rng.random_range(0.3..1.0);
        let stream: Vec<bool> = (0..3000).map(|_| rng.random_bool(p)).collect();
        let mut st = CurriculumState::new(CurriculumMode::Incremental);
        let mut got = Vec::new();
        for (i, &s) in stream.iter().enumerate() {
            let o = EpisodeOutcome {
                success: s,
                episode_index: i as u64,
                episode_return: 0.0,
                steps: 1,
            };
            if let Some(t) = st.record_episode(&o) {
                got.push((t.episode_index, t.from.number(), t.to.number()));
            }
        }
        let want = reference_ladder(&stream);
        check(got == want, || {
            format!("random stream (p = {p:.2}) diverged: {got:?} vs {want:?}")
        })?;
        total += want.len();
    }

    for mode in [CurriculumMode::NaiveEnv2, CurriculumMode::NaiveEnv3] {
        let mut st = CurriculumState::new(mode);
        let mut idx = 0;
        for hits in [100, 0, 100, 0] {
            feed(&mut st, &mut idx, hits, 100);
        }
        check(st.transitions().is_empty(), || {
            format!("{mode:?} logged transitions")
        })?;
    }
    Ok(format!(
        "8 scripted transitions incl. 4 demotions, 4 boundary holds, 200 random streams ({total} transitions) match reference"
    ))
}

// ---------------------------------------------------------------------------

struct LearningRun {
    seed: u64,
    transitions: Vec<depthnav::EnvTransition>,
    secs: f64,
}

fn learning_runs() -> &'static Vec<LearningRun> {
    static RUNS: OnceLock<Vec<LearningRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let root = scratch().join("learning");
        let _ = fs::remove_dir_all(&root);
        let archive = workspace().join("artifacts/learning");
        LEARNING_SEEDS
            .iter()
            .map(|&seed| {
                let mut cfg = desk_config();
                cfg.seed = seed;
                cfg.out_dir = root.join(format!("seed{seed}"));
                let start = Instant::now();
                let summary = harness::train(&cfg).expect("training run");
                let secs = start.elapsed().as_secs_f64();
                let dst = archive.join(format!("seed{seed}"));
                fs::create_dir_all(&dst).expect("archive dir");
                for f in ["metrics.csv", "transitions.csv", "config.json"] {
                    fs::copy(cfg.out_dir.join(f), dst.join(f)).expect("archive copy");
                }
                LearningRun {
                    seed,
                    transitions: summary.transitions,
                    secs,
                }
            })
            .collect()
    })
}

fn env1_gate() -> Outcome {
    let runs = learning_runs();
    let mut passed = 0;
    let mut notes = Vec::new();
    for r in runs {
        let first = r
            .transitions
            .iter()
            .find(|t| t.from == EnvId::Env1 && t.to == EnvId::Env2 && t.window_rate > 0.9);
        match first {
            Some(t) if t.episode_index < GATE_EPISODES => {
                passed += 1;
                notes.push(format!(
                    "seed {}: episode {} ({:.2})",
                    r.seed,
                    t.episode_index + 1,
                    t.window_rate
                ));
            }
            _ => notes.push(format!("seed {}: not within {GATE_EPISODES}", r.seed)),
        }
    }
    let msg = notes.join("; ");
    check(passed >= 2, || format!("{passed}/3 seeds: {msg}"))?;
    Ok(format!("{passed}/3 seeds: {msg}"))
}

fn curriculum_progression() -> Outcome {
    let runs = learning_runs();
    let mut passed = 0;
    let mut notes = Vec::new();
    for r in runs {
        let reach = r.transitions.iter().find(|t| t.to == EnvId::Env3);
        match reach {
            Some(t) => {
                passed += 1;
                notes.push(format!(
                    "seed {}: Env3 at episode {} ({:.0}s)",
                    r.seed,
                    t.episode_index + 1,
                    r.secs
                ));
            }
            None => notes.push(format!(
                "seed {}: never reached Env3, {} transitions ({:.0}s)",
                r.seed,
                r.transitions.len(),
                r.secs
            )),
        }
    }
    let msg = notes.join("; ");
    check(passed >= 2, || format!("{passed}/3 seeds: {msg}"))?;
    Ok(format!("{passed}/3 seeds: {msg}"))
}

fn comparison_report() -> Outcome {
    let root = scratch().join("grid");
    let _ = fs::remove_dir_all(&root);
    let mut base = desk_config();
    base.total_episodes = GRID_EPISODES;
    let opts = GridOptions {
        base,
        seeds: GRID_SEEDS.to_vec(),
        eval_env: EnvId::Env3,
        sessions: 5,
        episodes: 100,
        eval_seed: 0,
    };
    let rows = harness::compare(&opts, &root, |_, _| {}).map_err(|e| e.to_string())?;
    let dir = workspace().join("artifacts/comparison");
    let files = harness::write_compare_report(&rows, &opts, &dir).map_err(|e| e.to_string())?;
    check(rows.len() == 9, || format!("{} rows", rows.len()))?;
    for r in &rows {
        check(
            r.per_seed
                .iter()
                .all(|e| e.sessions.len() == 5 && e.sessions.iter().all(|s| s.episodes == 100)),
            || {
                format!(
                    "{:?}/{:?}: wrong session layout",
                    r.obs_variant, r.curriculum_mode
                )
            },
        )?;
    }
    for f in &files {
        check(f.exists(), || format!("{} missing", f.display()))?;
    }
    let md = fs::read_to_string(dir.join("compare.md")).map_err(|e| e.to_string())?;
    check(
        md.lines().filter(|l| l.starts_with("| [")).count() == 9,
        || "report table rows".into(),
    )?;
    let best = rows
        .iter()
        .max_by(|a, b| a.success_rate.total_cmp(&b.success_rate))
        .expect("nine rows");
    Ok(format!(
        "9 rows archived to artifacts/comparison (best {} / {}: {:.0}%)",
        best.obs_variant,
        best.curriculum_mode.label(),
        100.0 * best.success_rate
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [Criterion; 8] = [
        ("reward_exactness", reward_exactness),
        ("gradient_suite", gradient_suite),
        ("simulator_oracle", simulator_oracle),
        ("target_update_law", target_update_law),
        ("curriculum_state_machine", curriculum_state_machine),
        ("desk_scale_env1_gate", env1_gate),
        ("curriculum_progression", curriculum_progression),
        ("comparison_report", comparison_report),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s] {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
