//! Observation vectors built from a short history of depth frames, and the
//! full state vector fed to the networks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simworld::{wrap_angle, Action, Pose};

/// Number of depth samples in one frame.
pub const DEPTH_SIZE: usize = 10;

/// Extra state entries after the observation: distance, bearing, last v, last w.
pub const STATE_EXTRA: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ObservationError {
    #[error("depth value {value} at index {index} is outside [0, 1]")]
    DepthOutOfRange { index: usize, value: f64 },
    #[error("observation has {got} entries but variant {variant:?} needs {expected}")]
    DimensionMismatch {
        variant: ObsVariant,
        expected: usize,
        got: usize,
    },
}

/// Ten normalized depth samples taken at one simulation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthFrame {
    values: [f64; DEPTH_SIZE],
    pub step: usize,
}

impl DepthFrame {
    pub fn new(values: [f64; DEPTH_SIZE], step: usize) -> Result<Self, ObservationError> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ObservationError::DepthOutOfRange { index, value });
            }
        }
        Ok(Self { values, step })
    }

    pub fn values(&self) -> &[f64; DEPTH_SIZE] {
        &self.values
    }
}

/// Which stack of frames forms the observation.
///
/// - `O1`: the current frame.
/// - `O2`: the current frame and the two before it.
/// - `O3`: the current frame, the previous one, and their difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsVariant {
    O1,
    O2,
    O3,
}

impl ObsVariant {
    pub const ALL: [ObsVariant; 3] = [ObsVariant::O1, ObsVariant::O2, ObsVariant::O3];

    pub fn obs_dim(self) -> usize {
        match self {
            ObsVariant::O1 => DEPTH_SIZE,
            ObsVariant::O2 | ObsVariant::O3 => 3 * DEPTH_SIZE,
        }
    }

    pub fn state_dim(self) -> usize {
        self.obs_dim() + STATE_EXTRA
    }

    pub fn label(self) -> &'static str {
        match self {
            ObsVariant::O1 => "[F_t]",
            ObsVariant::O2 => "[F_t; F_t-1; F_t-2]",
            ObsVariant::O3 => "[F_t; F_t-1; F_t - F_t-1]",
        }
    }
}

impl std::fmt::Display for ObsVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ObsVariant::O1 => "o1",
            ObsVariant::O2 => "o2",
            ObsVariant::O3 => "o3",
        };
        f.write_str(s)
    }
}

/// The last three depth frames, newest first.
///
/// A fresh history replicates the first frame of the episode into every slot.
#[derive(Clone, Debug)]
pub struct FrameHistory {
    frames: VecDeque<DepthFrame>,
}

impl FrameHistory {
    const LEN: usize = 3;

    pub fn new(first: DepthFrame) -> Self {
        Self {
            frames: std::iter::repeat_n(first, Self::LEN).collect(),
        }
    }

    pub fn push(&mut self, frame: DepthFrame) {
        self.frames.pop_back();
        self.frames.push_front(frame);
    }

    /// Frame `lag` steps back; `0` is the current frame.
    pub fn get(&self, lag: usize) -> &DepthFrame {
        &self.frames[lag]
    }
}

/// Concatenate the frames selected by `variant` into one observation vector.
pub fn build_obs(history: &FrameHistory, variant: ObsVariant) -> Vec<f64> {
    let mut out = Vec::with_capacity(variant.obs_dim());
    let current = history.get(0).values();
    out.extend_from_slice(current);
    match variant {
        ObsVariant::O1 => {}
        ObsVariant::O2 => {
            out.extend_from_slice(history.get(1).values());
            out.extend_from_slice(history.get(2).values());
        }
        ObsVariant::O3 => {
            let previous = history.get(1).values();
            out.extend_from_slice(previous);
            out.extend(current.iter().zip(previous).map(|(c, p)| c - p));
        }
    }
    out
}

/// Target position in the robot frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetPolar {
    pub distance: f64,
    /// Radians in (-pi, pi], positive to the robot's left.
    pub bearing: f64,
}

pub fn target_polar(robot: &Pose, target: [f64; 2]) -> TargetPolar {
    let dx = target[0] - robot.x;
    let dy = target[1] - robot.y;
    TargetPolar {
        distance: dx.hypot(dy),
        bearing: wrap_angle(dy.atan2(dx) - robot.theta),
    }
}

/// Network input: `[obs; distance; bearing; v_prev; w_prev]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub obs: Vec<f64>,
    pub target: TargetPolar,
    pub last_action: Action,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.obs.len() + STATE_EXTRA
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.write_into(&mut out);
        out
    }

    pub fn write_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.obs);
        out.extend_from_slice(&[
            self.target.distance,
            self.target.bearing,
            self.last_action.v,
            self.last_action.w,
        ]);
    }
}

pub fn assemble_state(
    obs: Vec<f64>,
    variant: ObsVariant,
    target: TargetPolar,
    last_action: Action,
) -> Result<StateVector, ObservationError> {
    if obs.len() != variant.obs_dim() {
        return Err(ObservationError::DimensionMismatch {
            variant,
            expected: variant.obs_dim(),
            got: obs.len(),
        });
    }
    Ok(StateVector {
        obs,
        target,
        last_action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn frame(v: f64, step: usize) -> DepthFrame {
        DepthFrame::new([v; DEPTH_SIZE], step).unwrap()
    }

    fn ramp(offset: f64) -> DepthFrame {
        let mut vals = [0.0; DEPTH_SIZE];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = offset + 0.01 * i as f64;
        }
        DepthFrame::new(vals, 0).unwrap()
    }

    #[test]
    fn rejects_out_of_range_depth() {
        let mut vals = [0.5; DEPTH_SIZE];
        vals[3] = 1.5;
        assert_eq!(
            DepthFrame::new(vals, 0),
            Err(ObservationError::DepthOutOfRange {
                index: 3,
                value: 1.5
            })
        );
    }

    #[test]
    fn replicated_history_gives_zero_difference() {
        let a = ramp(0.3);
        let history = FrameHistory::new(a);
        let obs = build_obs(&history, ObsVariant::O3);
        assert_eq!(&obs[..10], a.values());
        assert_eq!(&obs[10..20], a.values());
        assert!(obs[20..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn o3_difference_block() {
        let mut history = FrameHistory::new(frame(0.6, 0));
        history.push(frame(0.8, 1));
        let obs = build_obs(&history, ObsVariant::O3);
        for &d in &obs[20..] {
            assert!((d - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn o1_is_current_frame() {
        let mut history = FrameHistory::new(ramp(0.1));
        history.push(ramp(0.2));
        history.push(ramp(0.5));
        assert_eq!(
            build_obs(&history, ObsVariant::O1),
            ramp(0.5).values().to_vec()
        );
    }

    #[test]
    fn o2_orders_newest_first() {
        let mut history = FrameHistory::new(frame(0.1, 0));
        history.push(frame(0.2, 1));
        history.push(frame(0.3, 2));
        history.push(frame(0.4, 3));
        let obs = build_obs(&history, ObsVariant::O2);
        assert_eq!(obs.len(), 30);
        assert_eq!(obs[0], 0.4);
        assert_eq!(obs[10], 0.3);
        assert_eq!(obs[20], 0.2);
    }

    #[test]
    fn polar_examples() {
        let p = target_polar(&Pose::new(0.0, 0.0, 0.0), [1.0, 0.0]);
        assert_eq!((p.distance, p.bearing), (1.0, 0.0));

        let p = target_polar(&Pose::new(0.0, 0.0, FRAC_PI_2), [0.0, 2.0]);
        assert!((p.distance - 2.0).abs() < 1e-15);
        assert!(p.bearing.abs() < 1e-15);

        let p = target_polar(&Pose::new(0.0, 0.0, 0.0), [0.0, -1.0]);
        assert!((p.distance - 1.0).abs() < 1e-15);
        assert!((p.bearing + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn state_dimensions() {
        let history = FrameHistory::new(frame(0.5, 0));
        let tp = TargetPolar {
            distance: 1.0,
            bearing: 0.0,
        };
        let s1 = assemble_state(
            build_obs(&history, ObsVariant::O1),
            ObsVariant::O1,
            tp,
            Action::ZERO,
        )
        .unwrap();
        assert_eq!(s1.to_vec().len(), 14);
        let s3 = assemble_state(
            build_obs(&history, ObsVariant::O3),
            ObsVariant::O3,
            tp,
            Action::ZERO,
        )
        .unwrap();
        let v = s3.to_vec();
        assert_eq!(v.len(), 34);
        assert_eq!(&v[32..], &[0.0, 0.0]);
    }

    #[test]
    fn assemble_rejects_wrong_shape() {
        let tp = TargetPolar {
            distance: 1.0,
            bearing: 0.0,
        };
        let err = assemble_state(vec![0.0; 10], ObsVariant::O2, tp, Action::ZERO).unwrap_err();
        assert!(matches!(
            err,
            ObservationError::DimensionMismatch {
                expected: 30,
                got: 10,
                ..
            }
        ));
    }

    proptest! {
        #[test]
        fn dimension_law(vals in proptest::collection::vec(0.0f64..=1.0, 30), v in 0.0f64..1.0, w in -1.0f64..1.0) {
            let mk = |off: usize| {
                let mut a = [0.0; DEPTH_SIZE];
                a.copy_from_slice(&vals[off..off + DEPTH_SIZE]);
                DepthFrame::new(a, off).unwrap()
            };
            let mut h = FrameHistory::new(mk(0));
            h.push(mk(10));
            h.push(mk(20));
            for variant in ObsVariant::ALL {
                let obs = build_obs(&h, variant);
                let n = obs.len();
                prop_assert_eq!(n, variant.obs_dim());
                let tp = TargetPolar { distance: 2.0, bearing: 0.1 };
                let s = assemble_state(obs.clone(), variant, tp, Action { v, w }).unwrap();
                prop_assert_eq!(s.to_vec().len(), n + 4);
                if variant == ObsVariant::O3 {
                    for i in 0..DEPTH_SIZE {
                        prop_assert_eq!(obs[20 + i], obs[i] - obs[10 + i]);
                    }
                }
            }
        }

        #[test]
        fn bearing_antisymmetry(x in -3.0f64..3.0, y in -3.0f64..3.0, theta in -PI..PI, fwd in 0.1f64..3.0, lat in 0.01f64..3.0) {
            let pose = Pose::new(x, y, theta);
            let (c, s) = (theta.cos(), theta.sin());
            let left = [x + fwd * c - lat * s, y + fwd * s + lat * c];
            let right = [x + fwd * c + lat * s, y + fwd * s - lat * c];
            let bl = target_polar(&pose, left).bearing;
            let br = target_polar(&pose, right).bearing;
            prop_assert!((bl + br).abs() < 1e-9);
            prop_assert!(bl > -PI && bl <= PI);
        }
    }
}
