//! Pinhole intrinsics, rigid camera poses and camera trajectories.
//!
//! Camera space is right-handed with `+x` right, `+y` down and `+z`
//! forward, so pixel `(u, v)` looks along `((u - cx) / f, (v - cy) / f, 1)`.
//! A pose maps camera space to world space: `p_world = R * p_cam + t`,
//! which makes `t` the camera center.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geom::{Mat3, Vec3};

const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),
    #[error("rotation is not a proper orthonormal matrix (max |RᵀR - I| = {deviation:e}, det = {det})")]
    NotOrthonormal { deviation: f64, det: f64 },
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("trajectory line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(f: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, CameraError> {
        let intr = Self { f, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    /// Square image with the principal point at the image center and the
    /// focal length equal to the width (about 53 degrees field of view).
    pub fn square(size: usize) -> Self {
        Self {
            f: size as f64,
            cx: size as f64 / 2.0,
            cy: size as f64 / 2.0,
            width: size,
            height: size,
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.f > 0.0 && self.f.is_finite()) {
            return Err(CameraError::Intrinsics(format!("focal length {} must be > 0", self.f)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::Intrinsics("image size must be non-zero".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(CameraError::Intrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Un-normalized camera-space direction through pixel position `(u, v)`.
    pub fn camera_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.f, (v - self.cy) / self.f, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub timestamp: f64,
}

impl CameraPose {
    pub fn new(rotation: Mat3, translation: Vec3, timestamp: f64) -> Result<Self, CameraError> {
        let deviation = (rotation.transpose() * rotation - Mat3::identity()).abs().max();
        let det = rotation.determinant();
        if !(deviation <= ORTHONORMAL_TOL) || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(CameraError::NotOrthonormal { deviation, det });
        }
        Ok(Self { rotation, translation, timestamp })
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros(), timestamp: 0.0 }
    }

    /// Camera at `eye` looking at `target`; `up` is the world direction that
    /// should appear upward in the image.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, timestamp: f64) -> Self {
        Self::from_forward(eye, target - eye, up, timestamp)
    }

    pub fn from_forward(eye: Vec3, forward: Vec3, up: Vec3, timestamp: f64) -> Self {
        let forward = forward.normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-12 {
            // up is parallel to forward; pick any perpendicular axis
            let alt = if forward.x.abs() < 0.9 { Vec3::x() } else { Vec3::z() };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_columns(&[right, down, forward]);
        Self { rotation, translation: eye, timestamp }
    }

    pub fn center(&self) -> Vec3 {
        self.translation
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    /// World-space direction that points up in the image.
    pub fn up(&self) -> Vec3 {
        -self.rotation.column(1).into_owned()
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Same geometry (rotation and center), ignoring the timestamp.
    pub fn same_geometry(&self, other: &CameraPose) -> bool {
        self.rotation == other.rotation && self.translation == other.translation
    }
}

/// Rigid transform `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    /// Maps reference-camera coordinates into target-camera coordinates.
    /// Identical poses yield the exact identity.
    pub fn between(reference: &CameraPose, target: &CameraPose) -> Self {
        if reference.same_geometry(target) {
            return Self::identity();
        }
        let rt = target.rotation.transpose();
        Self {
            rotation: rt * reference.rotation,
            translation: rt * (reference.translation - target.translation),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(pose, frame interval)` pairs; the interval is the time until the
    /// next pose (the last entry repeats the previous interval).
    entries: Vec<(CameraPose, f64)>,
}

impl Trajectory {
    pub fn new(entries: Vec<(CameraPose, f64)>) -> Result<Self, CameraError> {
        for w in entries.windows(2) {
            if !(w[1].0.timestamp > w[0].0.timestamp) {
                return Err(CameraError::Trajectory(format!(
                    "timestamps not strictly increasing ({} then {})",
                    w[0].0.timestamp, w[1].0.timestamp
                )));
            }
        }
        if let Some((_, dt)) = entries.iter().find(|(_, dt)| !(*dt > 0.0)) {
            return Err(CameraError::Trajectory(format!("frame interval {dt} must be > 0")));
        }
        Ok(Self { entries })
    }

    /// Builds a trajectory from timestamped poses, deriving frame intervals.
    pub fn from_poses(poses: Vec<CameraPose>) -> Result<Self, CameraError> {
        if poses.len() < 2 {
            return Err(CameraError::Trajectory("need at least two poses to derive a frame interval".into()));
        }
        let n = poses.len();
        let entries = (0..n)
            .map(|i| {
                let dt = if i + 1 < n {
                    poses[i + 1].timestamp - poses[i].timestamp
                } else {
                    poses[i].timestamp - poses[i - 1].timestamp
                };
                (poses[i], dt)
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pose(&self, i: usize) -> &CameraPose {
        &self.entries[i].0
    }

    pub fn interval(&self, i: usize) -> f64 {
        self.entries[i].1
    }

    pub fn poses(&self) -> impl Iterator<Item = &CameraPose> {
        self.entries.iter().map(|(p, _)| p)
    }

    pub fn entries(&self) -> &[(CameraPose, f64)] {
        &self.entries
    }

    /// One line per pose: timestamp, then `R` row-major, then `t`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (pose, _) in &self.entries {
            write!(out, "{:?}", pose.timestamp).unwrap();
            for r in 0..3 {
                for c in 0..3 {
                    write!(out, " {:?}", pose.rotation[(r, c)]).unwrap();
                }
            }
            for i in 0..3 {
                write!(out, " {:?}", pose.translation[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CameraError> {
        let mut poses = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CameraError::Parse { line: lineno + 1, msg: e.to_string() })?;
            if nums.len() != 13 {
                return Err(CameraError::Parse {
                    line: lineno + 1,
                    msg: format!("expected 13 numbers, found {}", nums.len()),
                });
            }
            let rotation = Mat3::from_row_slice(&nums[1..10]);
            let translation = Vec3::new(nums[10], nums[11], nums[12]);
            let pose = CameraPose::new(rotation, translation, nums[0]).map_err(|e| CameraError::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            poses.push(pose);
        }
        Self::from_poses(poses)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CameraError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CameraError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Horizontal circular orbit around `center`, every pose looking at it.
/// Consecutive camera centers subtend `angular_speed / fps` radians.
pub fn generate_orbit_trajectory(
    center: Vec3,
    radius: f64,
    fps: f64,
    angular_speed: f64,
    n: usize,
) -> Result<Trajectory, CameraError> {
    if !(fps > 0.0) {
        return Err(CameraError::Trajectory(format!("fps {fps} must be > 0")));
    }
    if n < 2 {
        return Err(CameraError::Trajectory("orbit needs at least two poses".into()));
    }
    if !(radius > 0.0) {
        return Err(CameraError::Trajectory(format!("radius {radius} must be > 0")));
    }
    let dt = 1.0 / fps;
    let step = angular_speed / fps;
    let entries = (0..n)
        .map(|k| {
            let theta = k as f64 * step;
            let eye = center + radius * Vec3::new(theta.sin(), 0.0, -theta.cos());
            (CameraPose::look_at(eye, center, Vec3::y(), k as f64 * dt), dt)
        })
        .collect();
    Trajectory::new(entries)
}
