//! Deterministic 2D kinematic world.
//!
//! The arena is a square centered on the origin whose walls are colliders.
//! The robot is a disc driven by a unicycle model; obstacles are axis-aligned
//! boxes, either static or moving between random waypoints. A forward-facing
//! scanner casts [`DEPTH_SIZE`] rays across a narrow horizontal field of view.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observation::{DepthFrame, DEPTH_SIZE};

/// Upper bound on rejection-sampling attempts for any single placement.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not place {what} after {attempts} attempts; layout is over-constrained")]
    OverConstrained { what: &'static str, attempts: usize },
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("invalid simulation parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Velocity command: linear speed (m/s) and angular rate (rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub w: f64,
}

impl Action {
    pub const ZERO: Action = Action { v: 0.0, w: 0.0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub v: f64,
    pub w: f64,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    Static,
    Mobile,
}

/// Axis-aligned box obstacle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoint: Option<[f64; 2]>,
}

impl Obstacle {
    pub fn fixed(center: [f64; 2], half_extents: [f64; 2]) -> Self {
        Self {
            kind: ObstacleKind::Static,
            center,
            half_extents,
            speed: 0.0,
            waypoint: None,
        }
    }

    pub fn min(&self) -> [f64; 2] {
        [
            self.center[0] - self.half_extents[0],
            self.center[1] - self.half_extents[1],
        ]
    }

    pub fn max(&self) -> [f64; 2] {
        [
            self.center[0] + self.half_extents[0],
            self.center[1] + self.half_extents[1],
        ]
    }

    /// Euclidean distance from a point to the box (zero inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let dx = ((p[0] - self.center[0]).abs() - self.half_extents[0]).max(0.0);
        let dy = ((p[1] - self.center[1]).abs() - self.half_extents[1]).max(0.0);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= self.half_extents[0]
            && (p[1] - self.center[1]).abs() <= self.half_extents[1]
    }

    fn inside_arena(&self, half_side: f64) -> bool {
        let lo = self.min();
        let hi = self.max();
        lo[0] >= -half_side && lo[1] >= -half_side && hi[0] <= half_side && hi[1] <= half_side
    }

    fn overlaps(&self, other: &Obstacle, margin: f64) -> bool {
        (self.center[0] - other.center[0]).abs()
            < self.half_extents[0] + other.half_extents[0] + margin
            && (self.center[1] - other.center[1]).abs()
                < self.half_extents[1] + other.half_extents[1] + margin
    }
}

/// Which rung of the environment ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum EnvId {
    /// Empty room.
    Env1,
    /// Eight static boxes.
    Env2,
    /// Two large static boxes near the start plus four mobile boxes.
    Env3,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::Env1, EnvId::Env2, EnvId::Env3];

    pub fn number(self) -> u8 {
        self.into()
    }
}

impl TryFrom<u8> for EnvId {
    type Error = String;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(EnvId::Env1),
            2 => Ok(EnvId::Env2),
            3 => Ok(EnvId::Env3),
            other => Err(format!("environment id must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<EnvId> for u8 {
    fn from(value: EnvId) -> Self {
        match value {
            EnvId::Env1 => 1,
            EnvId::Env2 => 2,
            EnvId::Env3 => 3,
        }
    }
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Env{}", self.number())
    }
}

/// Physical constants shared by every environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub arena_side: f64,
    pub fov_deg: f64,
    pub max_range: f64,
    pub dt: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub robot_radius: f64,
    pub d_min: f64,
    /// Start position relative to the arena center.
    pub start: [f64; 2],
    /// Half extents of the small Env2 boxes and of the mobile boxes.
    pub box_half: f64,
    pub mobile_speed: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            arena_side: 7.0,
            fov_deg: 58.0,
            max_range: 5.0,
            dt: 0.1,
            v_max: 1.0,
            w_max: 1.0,
            robot_radius: 0.2,
            d_min: 0.3,
            start: [-2.5, -2.5],
            box_half: 0.25,
            mobile_speed: 0.2,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("arena_side", self.arena_side),
            ("fov_deg", self.fov_deg),
            ("max_range", self.max_range),
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("robot_radius", self.robot_radius),
            ("d_min", self.d_min),
            ("box_half", self.box_half),
            ("mobile_speed", self.mobile_speed),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::InvalidParam {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if self.fov_deg >= 180.0 {
            return Err(SimError::InvalidParam {
                field: "fov_deg",
                reason: "must be below 180".into(),
            });
        }
        let limit = self.half_side() - self.robot_radius;
        if self
            .start
            .iter()
            .any(|c| !c.is_finite() || c.abs() >= limit)
        {
            return Err(SimError::InvalidParam {
                field: "start",
                reason: format!("robot disc at {:?} does not fit in the arena", self.start),
            });
        }
        Ok(())
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.arena_side
    }

    /// Ray bearings relative to the heading, evenly spaced from -fov/2 to +fov/2.
    pub fn ray_offsets(&self) -> [f64; DEPTH_SIZE] {
        let fov = self.fov_deg.to_radians();
        let mut out = [0.0; DEPTH_SIZE];
        for (i, o) in out.iter_mut().enumerate() {
            *o = -0.5 * fov + fov * i as f64 / (DEPTH_SIZE - 1) as f64;
        }
        out
    }
}

/// Layout of one environment of the ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub arena_side: f64,
    pub static_layout: Vec<Obstacle>,
    pub mobile_count: usize,
    pub mobile_half_extents: [f64; 2],
    pub mobile_speed: f64,
    pub seed: u64,
}

impl EnvSpec {
    /// Standard layout for `env_id`.
    ///
    /// Env2 places eight boxes on a 3x3 grid (spacing a quarter of the arena
    /// side) with the center cell left empty. Env3 places two 1.0 x 0.5 m boxes
    /// beside and ahead of the start corner and four mobile boxes.
    pub fn standard(env_id: EnvId, params: &SimParams, seed: u64) -> Self {
        let spacing = 0.25 * params.arena_side;
        let half = [params.box_half, params.box_half];
        let static_layout = match env_id {
            EnvId::Env1 => Vec::new(),
            EnvId::Env2 => {
                let mut boxes = Vec::with_capacity(8);
                for gy in [-1.0, 0.0, 1.0] {
                    for gx in [-1.0, 0.0, 1.0] {
                        if gx == 0.0 && gy == 0.0 {
                            continue;
                        }
                        boxes.push(Obstacle::fixed([gx * spacing, gy * spacing], half));
                    }
                }
                boxes
            }
            EnvId::Env3 => {
                let [sx, sy] = params.start;
                // 1.0 m long boxes, one to the east of the start and one to the north.
                vec![
                    Obstacle::fixed([sx + 1.5, sy], [0.25, 0.5]),
                    Obstacle::fixed([sx, sy + 1.5], [0.5, 0.25]),
                ]
            }
        };
        let mobile_count = if env_id == EnvId::Env3 { 4 } else { 0 };
        Self {
            env_id,
            arena_side: params.arena_side,
            static_layout,
            mobile_count,
            mobile_half_extents: half,
            mobile_speed: params.mobile_speed,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let expected = match self.env_id {
            EnvId::Env1 => (0, 0),
            EnvId::Env2 => (8, 0),
            EnvId::Env3 => (2, 4),
        };
        if (self.static_layout.len(), self.mobile_count) != expected {
            return Err(SimError::InvalidSpec(format!(
                "{} needs {} static and {} mobile obstacles, got {} and {}",
                self.env_id,
                expected.0,
                expected.1,
                self.static_layout.len(),
                self.mobile_count
            )));
        }
        if !(self.arena_side.is_finite() && self.arena_side > 0.0) {
            return Err(SimError::InvalidSpec("arena_side must be > 0".into()));
        }
        let half_side = 0.5 * self.arena_side;
        for (i, o) in self.static_layout.iter().enumerate() {
            if o.kind != ObstacleKind::Static {
                return Err(SimError::InvalidSpec(format!(
                    "static_layout[{i}] is not static"
                )));
            }
            if o.half_extents.iter().any(|&h| !(h > 0.0)) {
                return Err(SimError::InvalidSpec(format!(
                    "static_layout[{i}] has non-positive extents"
                )));
            }
            if !o.inside_arena(half_side) {
                return Err(SimError::InvalidSpec(format!(
                    "static_layout[{i}] leaves the arena"
                )));
            }
        }
        if self.mobile_count > 0 {
            if self.mobile_half_extents.iter().any(|&h| !(h > 0.0)) {
                return Err(SimError::InvalidSpec(
                    "mobile boxes need positive extents".into(),
                ));
            }
            if !(self.mobile_speed > 0.0) {
                return Err(SimError::InvalidSpec("mobile_speed must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub robot: RobotState,
    pub depth: DepthFrame,
    /// Euclidean distance from the robot center to the target.
    pub distance: f64,
    pub collision: bool,
    pub reached: bool,
    pub timeout: bool,
    /// The command was outside the actuator bounds and got clamped.
    pub clamped: bool,
}

/// Distance along a unit ray from `origin` to the first wall or box surface.
///
/// Walls bound the square `[-half_side, half_side]^2`; the origin is assumed to
/// lie inside it. An origin inside a box yields zero.
pub fn ray_distance(
    origin: [f64; 2],
    dir: [f64; 2],
    obstacles: &[Obstacle],
    half_side: f64,
) -> f64 {
    let mut best = f64::INFINITY;
    for axis in 0..2 {
        if dir[axis] > 0.0 {
            best = best.min((half_side - origin[axis]) / dir[axis]);
        } else if dir[axis] < 0.0 {
            best = best.min((-half_side - origin[axis]) / dir[axis]);
        }
    }
    best = best.max(0.0);
    for o in obstacles {
        if let Some(t) = ray_box(origin, dir, o) {
            best = best.min(t);
        }
    }
    best
}

/// Slab test; returns the entry distance (0 when starting inside).
fn ray_box(origin: [f64; 2], dir: [f64; 2], o: &Obstacle) -> Option<f64> {
    let lo = o.min();
    let hi = o.max();
    let mut t_near = 0.0_f64;
    let mut t_far = f64::INFINITY;
    for axis in 0..2 {
        if dir[axis] == 0.0 {
            if origin[axis] < lo[axis] || origin[axis] > hi[axis] {
                return None;
            }
        } else {
            let inv = 1.0 / dir[axis];
            let mut t0 = (lo[axis] - origin[axis]) * inv;
            let mut t1 = (hi[axis] - origin[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
    }
    Some(t_near)
}

/// Cast the depth rays from `pose` and normalize by `params.max_range`.
pub fn raycast_depth(
    pose: &Pose,
    obstacles: &[Obstacle],
    params: &SimParams,
    step: usize,
) -> DepthFrame {
    let mut values = [0.0; DEPTH_SIZE];
    let origin = pose.position();
    let half_side = params.half_side();
    for (v, offset) in values.iter_mut().zip(params.ray_offsets()) {
        let bearing = pose.theta + offset;
        let dir = [bearing.cos(), bearing.sin()];
        let d = ray_distance(origin, dir, obstacles, half_side);
        *v = d.min(params.max_range) / params.max_range;
    }
    DepthFrame::new(values, step).expect("clamped ray distances are in [0, 1]")
}

/// Whether a disc at `center` overlaps a wall or any obstacle.
pub fn disc_collides(
    center: [f64; 2],
    radius: f64,
    obstacles: &[Obstacle],
    half_side: f64,
) -> bool {
    let limit = half_side - radius;
    if center[0].abs() > limit || center[1].abs() > limit {
        return true;
    }
    obstacles.iter().any(|o| o.distance_to(center) < radius)
}

/// One explicit-Euler unicycle step; heading is wrapped afterwards.
pub fn integrate_unicycle(pose: &Pose, v: f64, w: f64, dt: f64) -> Pose {
    Pose {
        x: pose.x + v * pose.theta.cos() * dt,
        y: pose.y + v * pose.theta.sin() * dt,
        theta: wrap_angle(pose.theta + w * dt),
    }
}

/// One simulator instance: the layout, the robot, the target and the
/// episode clock.
#[derive(Clone, Debug)]
pub struct Simulator {
    params: SimParams,
    spec: EnvSpec,
    max_steps: usize,
    robot: RobotState,
    obstacles: Vec<Obstacle>,
    target: [f64; 2],
    step_index: usize,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(params: SimParams, spec: EnvSpec, max_steps: usize) -> Result<Self, SimError> {
        params.validate()?;
        spec.validate()?;
        if spec.arena_side != params.arena_side {
            return Err(SimError::InvalidSpec(format!(
                "spec arena side {} differs from simulation parameters ({})",
                spec.arena_side, params.arena_side
            )));
        }
        if max_steps == 0 {
            return Err(SimError::InvalidParam {
                field: "max_steps",
                reason: "must be > 0".into(),
            });
        }
        let robot = RobotState {
            pose: Pose::new(params.start[0], params.start[1], 0.0),
            v: 0.0,
            w: 0.0,
            radius: params.robot_radius,
        };
        let obstacles = spec.static_layout.clone();
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(Self {
            params,
            spec,
            max_steps,
            robot,
            obstacles,
            target: [0.0, 0.0],
            step_index: 0,
            rng,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn target(&self) -> [f64; 2] {
        self.target
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn distance_to_target(&self) -> f64 {
        let p = self.robot.pose;
        (self.target[0] - p.x).hypot(self.target[1] - p.y)
    }

    pub fn depth(&self) -> DepthFrame {
        raycast_depth(
            &self.robot.pose,
            &self.obstacles,
            &self.params,
            self.step_index,
        )
    }

    /// Start a new episode.
    ///
    /// The robot goes to the fixed start position with a uniformly random
    /// heading; mobile boxes and the target are then sampled by rejection.
    /// `(spec.seed, episode_seed)` fully determines the episode.
    pub fn reset(
        &mut self,
        episode_seed: u64,
    ) -> Result<(RobotState, [f64; 2], DepthFrame), SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(episode_seed);

        let theta = PI - 2.0 * PI * rng.random::<f64>();
        let start = self.params.start;
        self.robot = RobotState {
            pose: Pose::new(start[0], start[1], theta),
            v: 0.0,
            w: 0.0,
            radius: self.params.robot_radius,
        };
        self.step_index = 0;
        self.obstacles = self.spec.static_layout.clone();

        let half_side = self.params.half_side();
        let radius = self.params.robot_radius;
        let mh = self.spec.mobile_half_extents;
        for _ in 0..self.spec.mobile_count {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let c = sample_box_center(&mut rng, half_side, mh);
                let candidate = Obstacle {
                    kind: ObstacleKind::Mobile,
                    center: c,
                    half_extents: mh,
                    speed: self.spec.mobile_speed,
                    waypoint: None,
                };
                // keep the start disc clear with room to turn
                if candidate.distance_to(start) < radius + 0.5 {
                    continue;
                }
                if self.obstacles.iter().any(|o| candidate.overlaps(o, 0.05)) {
                    continue;
                }
                placed = Some(candidate);
                break;
            }
            let mut ob = placed.ok_or(SimError::OverConstrained {
                what: "mobile obstacle",
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
            ob.waypoint = Some(sample_box_center(&mut rng, half_side, mh));
            self.obstacles.push(ob);
        }

        let clearance = self.params.d_min + radius;
        let mut target = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let lim = half_side - clearance;
            if lim <= 0.0 {
                break;
            }
            let p = [rng.random_range(-lim..lim), rng.random_range(-lim..lim)];
            if (p[0] - start[0]).hypot(p[1] - start[1]) < 1.0 {
                continue;
            }
            if self.obstacles.iter().any(|o| o.distance_to(p) < clearance) {
                continue;
            }
            target = Some(p);
            break;
        }
        self.target = target.ok_or(SimError::OverConstrained {
            what: "target",
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })?;
        self.rng = rng;
        Ok((self.robot, self.target, self.depth()))
    }

    /// Teleport the robot (e.g. for scripted scenarios); velocities are zeroed.
    pub fn place_robot(&mut self, pose: Pose) -> DepthFrame {
        self.robot.pose = Pose::new(pose.x, pose.y, pose.theta);
        self.robot.v = 0.0;
        self.robot.w = 0.0;
        self.depth()
    }

    pub fn set_target(&mut self, target: [f64; 2]) {
        self.target = target;
    }

    /// Clamp a command to the actuator bounds; the flag reports whether it changed.
    pub fn clamp_action(&self, action: Action) -> (Action, bool) {
        let v = if action.v.is_nan() {
            0.0
        } else {
            action.v.clamp(0.0, self.params.v_max)
        };
        let w = if action.w.is_nan() {
            0.0
        } else {
            action.w.clamp(-self.params.w_max, self.params.w_max)
        };
        let clamped = v != action.v || w != action.w;
        (Action { v, w }, clamped)
    }

    /// Advance the world by one `dt`.
    pub fn step(&mut self, action: Action) -> StepOutcome {
        let (cmd, clamped) = self.clamp_action(action);
        let dt = self.params.dt;
        self.robot.pose = integrate_unicycle(&self.robot.pose, cmd.v, cmd.w, dt);
        self.robot.v = cmd.v;
        self.robot.w = cmd.w;
        self.advance_mobiles(dt);
        self.step_index += 1;

        let half_side = self.params.half_side();
        let center = self.robot.pose.position();
        let collision = disc_collides(center, self.robot.radius, &self.obstacles, half_side);
        let distance = self.distance_to_target();
        let reached = !collision && distance < self.params.d_min;
        let timeout = !collision && !reached && self.step_index >= self.max_steps;
        StepOutcome {
            robot: self.robot,
            depth: self.depth(),
            distance,
            collision,
            reached,
            timeout,
            clamped,
        }
    }

    fn advance_mobiles(&mut self, dt: f64) {
        let half_side = self.params.half_side();
        for o in self
            .obstacles
            .iter_mut()
            .filter(|o| o.kind == ObstacleKind::Mobile)
        {
            let Some(wp) = o.waypoint else { continue };
            let dx = wp[0] - o.center[0];
            let dy = wp[1] - o.center[1];
            let dist = dx.hypot(dy);
            let travel = o.speed * dt;
            if dist <= travel {
                o.center = wp;
                o.waypoint = Some(sample_box_center(&mut self.rng, half_side, o.half_extents));
            } else {
                o.center[0] += dx / dist * travel;
                o.center[1] += dy / dist * travel;
            }
        }
    }
}

fn sample_box_center(rng: &mut ChaCha8Rng, half_side: f64, half: [f64; 2]) -> [f64; 2] {
    let lx = half_side - half[0];
    let ly = half_side - half[1];
    [rng.random_range(-lx..=lx), rng.random_range(-ly..=ly)]
}
