use super::rays::Ray;
use crate::geom::Vec3;
use crate::scene::{GaussianCloud, VoxelGrid};

/// What a sample reads its features from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    /// Containing cell of the finest grid level.
    Voxel(usize),
    Point(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub ray_id: usize,
    /// Position in the ray's near-to-far sample order.
    pub index: usize,
    pub t: f64,
    pub position: Vec3,
    pub source: SampleSource,
}

/// Uniform samples at the midpoints of `n_samples` equal segments of the
/// ray's interval inside the grid box. Returns the samples and the segment
/// length.
pub fn sample_structured(ray: &Ray, ray_id: usize, grid: &VoxelGrid, n_samples: usize) -> (Vec<RaySample>, f64) {
    assert!(n_samples >= 2, "need at least two samples per ray");
    let Some((t0, t1)) = grid.bounds().intersect_ray(&ray.origin, &ray.direction) else {
        return (Vec::new(), 0.0);
    };
    if t1 <= t0 {
        return (Vec::new(), 0.0);
    }
    let spacing = (t1 - t0) / n_samples as f64;
    let finest = grid.finest();
    let samples = (0..n_samples)
        .map(|i| {
            let t = t0 + (i as f64 + 0.5) * spacing;
            let position = ray.at(t);
            let (cell, _) = finest.locate(&position);
            RaySample { ray_id, index: i, t, position, source: SampleSource::Voxel(finest.cell_id(cell)) }
        })
        .collect();
    (samples, spacing)
}

/// Perpendicular distance from `p` to the ray line and the axial distance.
#[inline]
pub fn ray_point_offsets(ray: &Ray, p: &Vec3) -> (f64, f64) {
    let rel = p - ray.origin;
    let t = rel.dot(&ray.direction);
    let perp = (rel - ray.direction * t).norm();
    (t, perp)
}

/// Whether a Gaussian intersects a ray: in front of the origin and within
/// three standard deviations of the line.
#[inline]
pub fn point_hits_ray(ray: &Ray, position: &Vec3, scale: f32) -> Option<f64> {
    let (t, perp) = ray_point_offsets(ray, position);
    (t > 0.0 && perp < 3.0 * scale as f64).then_some(t)
}

/// All Gaussians the ray passes within `3s` of, sorted by axial distance
/// (ties by point id).
pub fn intersect_unstructured(ray: &Ray, ray_id: usize, cloud: &GaussianCloud) -> Vec<RaySample> {
    let mut hits: Vec<(f64, usize)> = cloud
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| point_hits_ray(ray, &p.position(), p.scale).map(|t| (t, i)))
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.into_iter()
        .enumerate()
        .map(|(index, (t, id))| RaySample { ray_id, index, t, position: ray.at(t), source: SampleSource::Point(id) })
        .collect()
}
