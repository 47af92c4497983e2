//! Pixel-centric reference renderer: indexing, feature gathering and
//! feature computation, then front-to-back compositing.

pub mod composite;
pub mod field;
pub mod rays;
pub mod sampling;

use rayon::prelude::*;

pub use composite::{composite, Composited, Compositor, DEPTH_OPACITY, TRANSMITTANCE_EPS};
pub use field::{
    accumulate, density, feature_compute_structured, feature_compute_unstructured, gather_feature, gather_plan,
    radiance, shade_structured, trilinear, trilinear_weights, LevelGather, Opacity, SampleGather, SampleResult,
};
pub use rays::{index_rays, pixel_ray, Ray};
pub use sampling::{intersect_unstructured, point_hits_ray, ray_point_offsets, sample_structured, RaySample, SampleSource};

use crate::camera::{CameraPose, Intrinsics};
use crate::frame::{Frame, INFINITE_DEPTH};
use crate::scene::SceneRep;

pub const DEFAULT_SAMPLES_PER_RAY: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub samples_per_ray: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { samples_per_ray: DEFAULT_SAMPLES_PER_RAY }
    }
}

/// Composites an ordered list of feature-computation results.
pub fn composite_results(samples: &[(SampleResult, f64)], spacing: f64) -> Composited {
    composite(samples.iter().map(|(r, t)| (r.alpha(spacing), r.color, *t)))
}

/// Renders one ray end to end.
pub fn render_ray(ray: &Ray, ray_id: usize, scene: &SceneRep, opts: &RenderOptions) -> Composited {
    let mut comp = Compositor::new();
    match scene {
        SceneRep::Structured(grid) => {
            let (samples, spacing) = sample_structured(ray, ray_id, grid, opts.samples_per_ray);
            for s in &samples {
                let feature = gather_feature(grid, &gather_plan(grid, &s.position));
                let (alpha, color) = shade_structured(&feature, &grid.mlp, spacing);
                if !comp.push(alpha, color, s.t) {
                    break;
                }
            }
        }
        SceneRep::Unstructured(cloud) => {
            for s in &intersect_unstructured(ray, ray_id, cloud) {
                let SampleSource::Point(id) = s.source else { unreachable!() };
                let r = feature_compute_unstructured(s, &cloud.points[id]);
                if !comp.push(r.alpha(0.0), r.color, s.t) {
                    break;
                }
            }
        }
    }
    comp.finish()
}

/// Writes a composited ray into `frame` at pixel index `i`.
pub fn store_pixel(frame: &mut Frame, i: usize, ray: &Ray, out: &Composited) {
    frame.color[i] = out.color.map(|c| c as f32);
    frame.depth[i] = out.t_depth.map_or(INFINITE_DEPTH, |t| (t * ray.z_per_t) as f32);
    frame.valid[i] = true;
}

/// Renders a subset of pixels (row-major indices) of a frame into `frame`.
pub fn render_pixels(
    pose: &CameraPose,
    intr: &Intrinsics,
    scene: &SceneRep,
    opts: &RenderOptions,
    pixels: &[usize],
    frame: &mut Frame,
) {
    let results: Vec<(Ray, Composited)> = pixels
        .par_iter()
        .map(|&i| {
            let (u, v) = (i % intr.width, i / intr.width);
            let ray = pixel_ray(pose, intr, u as f64, v as f64, (u as u32, v as u32));
            let out = render_ray(&ray, i, scene, opts);
            (ray, out)
        })
        .collect();
    for (&i, (ray, out)) in pixels.iter().zip(&results) {
        store_pixel(frame, i, ray, out);
    }
}

pub fn render_frame(pose: &CameraPose, intr: &Intrinsics, scene: &SceneRep) -> Frame {
    render_frame_with(pose, intr, scene, &RenderOptions::default())
}

pub fn render_frame_with(pose: &CameraPose, intr: &Intrinsics, scene: &SceneRep, opts: &RenderOptions) -> Frame {
    let rays = index_rays(pose, intr);
    let results: Vec<Composited> = rays.par_iter().enumerate().map(|(i, r)| render_ray(r, i, scene, opts)).collect();
    let mut frame = Frame::empty(intr.width, intr.height);
    for (i, (ray, out)) in rays.iter().zip(&results).enumerate() {
        store_pixel(&mut frame, i, ray, out);
    }
    frame
}

/// Box-filtered `factor x factor` supersampled render, used as a ground
/// truth that does not favour either of two compared renderings. Depth is
/// taken from the central sub-ray.
pub fn render_frame_supersampled(pose: &CameraPose, intr: &Intrinsics, scene: &SceneRep, opts: &RenderOptions, factor: usize) -> Frame {
    assert!(factor >= 1);
    let mut frame = Frame::empty(intr.width, intr.height);
    let n = intr.pixel_count();
    let offsets: Vec<f64> = (0..factor).map(|k| (k as f64 + 0.5) / factor as f64 - 0.5).collect();
    let results: Vec<([f32; 3], f32)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (u, v) = (i % intr.width, i / intr.width);
            let mut acc = [0.0f64; 3];
            for dy in &offsets {
                for dx in &offsets {
                    let ray = pixel_ray(pose, intr, u as f64 + dx, v as f64 + dy, (u as u32, v as u32));
                    let out = render_ray(&ray, i, scene, opts);
                    for (a, c) in acc.iter_mut().zip(out.color) {
                        *a += c;
                    }
                }
            }
            let center = pixel_ray(pose, intr, u as f64, v as f64, (u as u32, v as u32));
            let out = render_ray(&center, i, scene, opts);
            let depth = out.t_depth.map_or(INFINITE_DEPTH, |t| (t * center.z_per_t) as f32);
            let k = (factor * factor) as f64;
            (acc.map(|a| (a / k) as f32), depth)
        })
        .collect();
    for (i, (c, d)) in results.into_iter().enumerate() {
        frame.color[i] = c;
        frame.depth[i] = d;
        frame.valid[i] = true;
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::scene::{generate_scene, SceneKind, ScenePlan, SizeClass};

    #[test]
    fn composite_results_uses_spacing() {
        let r = SampleResult { opacity: Opacity::Density(2.0), color: [1.0, 0.0, 0.0] };
        let out = composite_results(&[(r, 1.0)], 0.5);
        assert!((out.color[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let full = SampleResult { opacity: Opacity::Alpha(1.0), color: [1.0, 0.0, 0.0] };
        let out = composite_results(&[(full, 4.0)], 0.5);
        assert_eq!(out.color, [1.0, 0.0, 0.0]);
        assert_eq!(out.t_depth, Some(4.0));
    }

    #[test]
    fn looking_away_gives_infinite_depth() {
        let intr = Intrinsics::square(8);
        for kind in [SceneKind::Structured, SceneKind::Unstructured] {
            let scene = generate_scene(&ScenePlan::new(kind, 2, SizeClass::Tiny));
            let pose = CameraPose::look_at(Vec3::new(0.0, 0.0, -4.0), Vec3::new(0.0, 0.0, -10.0), Vec3::y(), 0.0);
            let f = render_frame(&pose, &intr, &scene);
            assert!(f.depth.iter().all(|d| d.is_infinite()));
            assert!(f.color.iter().all(|c| *c == [0.0; 3]));
        }
    }
}
