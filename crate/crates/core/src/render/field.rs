//! Feature gathering and feature computation.

use smallvec::SmallVec;

use super::sampling::RaySample;
use crate::geom::Vec3;
use crate::scene::{GaussianPoint, Mlp, VoxelGrid};

/// Product-form trilinear weights for local coordinates in `[0, 1]^3`,
/// corner order as in [`crate::scene::GridLevel::cell_corners`].
pub fn trilinear_weights(local: [f64; 3]) -> [f64; 8] {
    let mut w = [0.0; 8];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for (a, &l) in local.iter().enumerate() {
            p *= if (k >> a) & 1 == 1 { l } else { 1.0 - l };
        }
        *wk = p;
    }
    w
}

/// Weighted sum of eight feature vectors.
pub fn trilinear(features: &[&[f32]; 8], weights: &[f64; 8]) -> Vec<f64> {
    let c = features[0].len();
    let mut out = vec![0.0; c];
    accumulate(&mut out, features.iter().copied().zip(weights.iter().copied()));
    out
}

/// Adds `w * f` for every `(f, w)` to `acc`, in iteration order. Every
/// gather path funnels through this so accumulation order is shared.
pub fn accumulate<'a>(acc: &mut [f64], terms: impl IntoIterator<Item = (&'a [f32], f64)>) {
    for (f, w) in terms {
        for (a, &v) in acc.iter_mut().zip(f) {
            *a += w * v as f64;
        }
    }
}

/// The eight vertices one level contributes to a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGather {
    pub corners: [usize; 8],
    pub weights: [f64; 8],
}

pub type SampleGather = SmallVec<[LevelGather; 4]>;

/// Vertex ids and weights needed by a sample, coarse level first.
pub fn gather_plan(grid: &VoxelGrid, position: &Vec3) -> SampleGather {
    grid.levels
        .iter()
        .map(|level| {
            let (cell, local) = level.locate(position);
            LevelGather { corners: level.cell_corners(cell), weights: trilinear_weights(local) }
        })
        .collect()
}

/// Multi-level feature: per-level trilinear results summed, level by level.
pub fn gather_feature(grid: &VoxelGrid, plan: &SampleGather) -> Vec<f64> {
    let c = grid.channels;
    let mut acc = vec![0.0; c];
    for (level, g) in grid.levels.iter().zip(plan) {
        accumulate(&mut acc, g.corners.iter().map(|&v| level.feature(v, c)).zip(g.weights.iter().copied()));
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Opacity {
    Density(f64),
    Alpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleResult {
    pub opacity: Opacity,
    pub color: [f64; 3],
}

impl SampleResult {
    pub fn alpha(&self, spacing: f64) -> f64 {
        match self.opacity {
            Opacity::Density(sigma) => 1.0 - (-sigma * spacing).exp(),
            Opacity::Alpha(a) => a,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn density(feature: &[f64], mlp: &Mlp) -> f64 {
    let pre = mlp.b_sigma as f64 + feature.iter().zip(&mlp.w_sigma).map(|(f, &w)| f * w as f64).sum::<f64>();
    pre.max(0.0)
}

pub fn radiance(feature: &[f64], mlp: &Mlp) -> [f64; 3] {
    let c = mlp.channels;
    let hidden: Vec<f64> = (0..mlp.hidden)
        .map(|h| {
            let row = &mlp.w1[h * c..(h + 1) * c];
            let z = mlp.b1[h] as f64 + row.iter().zip(feature).map(|(&w, f)| w as f64 * f).sum::<f64>();
            z.max(0.0)
        })
        .collect();
    let mut out = [0.0; 3];
    for (o, slot) in out.iter_mut().enumerate() {
        let row = &mlp.w2[o * mlp.hidden..(o + 1) * mlp.hidden];
        let z = mlp.b2[o] as f64 + row.iter().zip(&hidden).map(|(&w, h)| w as f64 * h).sum::<f64>();
        *slot = sigmoid(z);
    }
    out
}

pub fn feature_compute_structured(feature: &[f64], mlp: &Mlp) -> SampleResult {
    SampleResult { opacity: Opacity::Density(density(feature, mlp)), color: radiance(feature, mlp) }
}

/// Alpha and color of a structured sample. Color is only evaluated when
/// the sample is visible, since zero-alpha samples contribute nothing.
pub fn shade_structured(feature: &[f64], mlp: &Mlp, spacing: f64) -> (f64, [f64; 3]) {
    let sigma = density(feature, mlp);
    if sigma == 0.0 {
        return (0.0, [0.0; 3]);
    }
    (1.0 - (-sigma * spacing).exp(), radiance(feature, mlp))
}

/// Isotropic splat falloff with degree-0 (view-independent) color.
pub fn feature_compute_unstructured(sample: &RaySample, point: &GaussianPoint) -> SampleResult {
    let d = (point.position() - sample.position).norm();
    let s = point.scale as f64;
    let alpha = point.opacity as f64 * (-(d * d) / (2.0 * s * s)).exp();
    SampleResult {
        opacity: Opacity::Alpha(alpha),
        color: [point.color[0] as f64, point.color[1] as f64, point.color[2] as f64],
    }
}
