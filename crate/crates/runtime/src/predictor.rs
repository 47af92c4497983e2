use std::collections::VecDeque;

use nerfstream_core::geom::Vec3;
use nerfstream_core::CameraPose;

use crate::RuntimeError;

pub const HISTORY_LEN: usize = 5;
pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Recent poses for direction prediction. Samples are regressed against
/// their position in the history, so one step is one frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    history: VecDeque<CameraPose>,
    pub lambda: f64,
}

impl Default for PredictorState {
    fn default() -> Self {
        Self { history: VecDeque::with_capacity(HISTORY_LEN), lambda: DEFAULT_RIDGE }
    }
}

impl PredictorState {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, ..Default::default() }
    }

    pub fn from_poses<'a>(poses: impl IntoIterator<Item = &'a CameraPose>) -> Self {
        let mut s = Self::default();
        for p in poses {
            s.push(*p);
        }
        s
    }

    /// Adds a pose, dropping the oldest beyond the history length. Poses
    /// must arrive in timestamp order.
    pub fn push(&mut self, pose: CameraPose) {
        if let Some(last) = self.history.back() {
            debug_assert!(pose.timestamp >= last.timestamp, "poses out of order");
        }
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(pose);
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn latest(&self) -> Option<&CameraPose> {
        self.history.back()
    }

    pub fn history(&self) -> impl Iterator<Item = &CameraPose> {
        self.history.iter()
    }

    /// Forward direction one frame after the latest pose.
    pub fn predict_direction(&self) -> Result<Vec3, RuntimeError> {
        self.predict_direction_at(1.0)
    }

    /// Forward direction `steps` frames after the latest pose: each
    /// component is fitted with ridge-regularized least squares.
    pub fn predict_direction_at(&self, steps: f64) -> Result<Vec3, RuntimeError> {
        let n = self.history.len();
        if n < 2 {
            return Err(RuntimeError::InsufficientHistory { have: n });
        }
        let t_mean = (n - 1) as f64 / 2.0;
        let dirs: Vec<Vec3> = self.history.iter().map(|p| p.forward()).collect();
        let y_mean = dirs.iter().sum::<Vec3>() / n as f64;
        let mut sxy = Vec3::zeros();
        let mut sxx = 0.0;
        for (i, d) in dirs.iter().enumerate() {
            let dt = i as f64 - t_mean;
            sxy += dt * (d - y_mean);
            sxx += dt * dt;
        }
        let slope = sxy / (sxx + self.lambda);
        let at = (n - 1) as f64 + steps;
        let pred = y_mean + slope * (at - t_mean);
        let norm = pred.norm();
        if !(norm > 1e-12) {
            return Ok(dirs[n - 1]);
        }
        Ok(pred / norm)
    }
}

/// Reference pose half a window past `t2`, extrapolating the camera center at
/// the velocity between `t1` and `t2`.
pub fn predict_reference_pose(
    t1: &CameraPose,
    t2: &CameraPose,
    dt: f64,
    window: usize,
    state: &PredictorState,
) -> Result<CameraPose, RuntimeError> {
    predict_reference_pose_with_lead(t1, t2, dt, window as f64 / 2.0, state)
}

/// Reference pose `lead` frame intervals past `t2`. Orientation is the
/// predicted forward direction at the same lead with the latest up vector.
pub fn predict_reference_pose_with_lead(
    t1: &CameraPose,
    t2: &CameraPose,
    dt: f64,
    lead: f64,
    state: &PredictorState,
) -> Result<CameraPose, RuntimeError> {
    if !(dt > 0.0) {
        return Err(RuntimeError::Config(format!("frame interval {dt} must be > 0")));
    }
    let v = (t2.center() - t1.center()) / dt;
    let eye = t2.center() + v * (lead * dt);
    let forward = match state.predict_direction_at(lead) {
        Ok(d) => d,
        Err(RuntimeError::InsufficientHistory { .. }) => t2.forward(),
        Err(e) => return Err(e),
    };
    let up = state.latest().unwrap_or(t2).up();
    Ok(CameraPose::from_forward(eye, forward, up, t2.timestamp + lead * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nerfstream_core::geom::angle_between;

    fn at(x: f64, forward: Vec3, t: f64) -> CameraPose {
        CameraPose::from_forward(Vec3::new(x, 0.0, 0.0), forward, Vec3::y(), t)
    }

    #[test]
    fn reference_position_examples() {
        let (a, b) = (at(0.0, Vec3::z(), 0.0), at(1.0, Vec3::z(), 1.0));
        let s = PredictorState::from_poses([&a, &b]);
        let p = predict_reference_pose(&a, &b, 1.0, 4, &s).unwrap();
        assert_eq!(p.center(), Vec3::new(3.0, 0.0, 0.0));
        let p = predict_reference_pose(&b, &b, 1.0, 4, &s).unwrap();
        assert_eq!(p.center(), b.center());
        let p = predict_reference_pose(&a, &b, 1.0, 1, &s).unwrap();
        assert_eq!(p.center(), Vec3::new(1.5, 0.0, 0.0));
    }

    #[test]
    fn constant_direction_is_kept() {
        let s = PredictorState::from_poses(&(0..5).map(|i| at(i as f64, Vec3::new(0.3, 0.1, 1.0), i as f64)).collect::<Vec<_>>());
        let d = s.predict_direction().unwrap();
        assert!(angle_between(&d, &Vec3::new(0.3, 0.1, 1.0)) < 1e-12);
    }

    #[test]
    fn one_pose_is_not_enough() {
        let s = PredictorState::from_poses([&at(0.0, Vec3::z(), 0.0)]);
        assert_eq!(s.predict_direction(), Err(RuntimeError::InsufficientHistory { have: 1 }));
    }

    #[test]
    fn history_is_bounded() {
        let poses: Vec<_> = (0..9).map(|i| at(i as f64, Vec3::z(), i as f64)).collect();
        let s = PredictorState::from_poses(&poses);
        assert_eq!(s.len(), HISTORY_LEN);
        assert_eq!(s.history().next().unwrap().timestamp, 4.0);
    }
}
