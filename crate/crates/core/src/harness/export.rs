use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::eval::restore;
use super::rollout::{run_episode, EpisodeTrace, PolicyController};
use super::{io_err, HarnessError};
use crate::observation::DEPTH_SIZE;
use crate::sac::Checkpoint;
use crate::simworld::{EnvId, EnvSpec, Obstacle, ObstacleKind, Simulator};

#[derive(Clone, Debug)]
pub struct ExportPaths {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub trace: EpisodeTrace,
}

/// One row per step: `t, x, y, theta, v, w, d_t, reward, depth0..depth9`.
pub fn write_trajectory_csv<W: Write>(trace: &EpisodeTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "x", "y", "theta", "v", "w", "d_t", "reward"]
        .map(String::from)
        .to_vec();
    header.extend((0..DEPTH_SIZE).map(|i| format!("depth{i}")));
    w.write_record(&header)?;
    for s in &trace.steps {
        let mut row = vec![
            s.t.to_string(),
            s.pose.x.to_string(),
            s.pose.y.to_string(),
            s.pose.theta.to_string(),
            s.command.v.to_string(),
            s.command.w.to_string(),
            s.distance.to_string(),
            s.reward.to_string(),
        ];
        row.extend(s.depth.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

const PX_PER_M: f64 = 80.0;

/// Overhead plot of the arena, the obstacles at episode start, the path and the target.
pub fn render_svg(arena_side: f64, obstacles: &[Obstacle], trace: &EpisodeTrace) -> String {
    let half = arena_side / 2.0;
    let size = arena_side * PX_PER_M;
    let px = |p: [f64; 2]| ((p[0] + half) * PX_PER_M, (half - p[1]) * PX_PER_M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect id="arena" x="0" y="0" width="{size}" height="{size}" fill="#fafafa" stroke="#000" stroke-width="2"/>"##
    );
    for (i, o) in obstacles.iter().enumerate() {
        let (x, y) = px([
            o.center[0] - o.half_extents[0],
            o.center[1] + o.half_extents[1],
        ]);
        let (w, h) = (
            2.0 * o.half_extents[0] * PX_PER_M,
            2.0 * o.half_extents[1] * PX_PER_M,
        );
        let (kind, fill) = match o.kind {
            ObstacleKind::Static => ("static", "#555"),
            ObstacleKind::Mobile => ("mobile", "#c84"),
        };
        let _ = writeln!(
            s,
            r#"<rect id="obstacle-{i}" class="obstacle {kind}" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }
    let mut points = vec![px(trace.start.position())];
    points.extend(trace.steps.iter().map(|st| px(st.pose.position())));
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline id="path" points="{}" fill="none" stroke="#1565c0" stroke-width="2"/>"##,
        pts.join(" ")
    );
    let (sx, sy) = px(trace.start.position());
    let _ = writeln!(
        s,
        r##"<circle id="start" cx="{sx:.2}" cy="{sy:.2}" r="6" fill="#2e7d32"/>"##
    );
    let (tx, ty) = px(trace.target);
    let _ = writeln!(
        s,
        r##"<circle id="target" cx="{tx:.2}" cy="{ty:.2}" r="8" fill="none" stroke="#c62828" stroke-width="3"/>"##
    );
    s.push_str("</svg>\n");
    s
}

/// Roll out one deterministic episode and write `trajectory_<env>_<seed>.{csv,svg}` into `out_dir`.
pub fn export_trajectory(
    ck: &Checkpoint,
    env: EnvId,
    seed: u64,
    out_dir: &Path,
) -> Result<ExportPaths, HarnessError> {
    let (cfg, agent) = restore(ck)?;
    let spec = EnvSpec::standard(env, &cfg.sim, seed);
    let mut sim = Simulator::new(cfg.sim.clone(), spec, cfg.max_steps)?;
    let (_, _, first) = sim.reset(0)?;
    let obstacles = sim.obstacles().to_vec();
    let mut ctl = PolicyController {
        policy: agent.snapshot(),
    };
    let trace = run_episode(&mut sim, first, cfg.obs_variant, &cfg.reward, &mut ctl)?;

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let stem = format!("trajectory_env{}_seed{seed}", env.number());
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_trajectory_csv(&trace, file)?;
    let svg_path = out_dir.join(format!("{stem}.svg"));
    fs::write(
        &svg_path,
        render_svg(cfg.sim.arena_side, &obstacles, &trace),
    )
    .map_err(io_err(&svg_path))?;
    Ok(ExportPaths {
        csv: csv_path,
        svg: svg_path,
        trace,
    })
}
