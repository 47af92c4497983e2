//! Pixel-centric rendering with its memory traffic recorded: every vertex
//! or point a sample needs is fetched from DRAM as its own request.

use rayon::prelude::*;

use super::mvoxel::vertex_bytes;
use super::SRAM_SAMPLE_BUFFER;
use crate::camera::{CameraPose, Intrinsics};
use crate::frame::Frame;
use crate::render::{
    gather_feature, gather_plan, index_rays, intersect_unstructured, Ray, sample_structured, shade_structured, store_pixel,
    feature_compute_unstructured, Compositor, Composited, RenderOptions, SampleSource,
};
use crate::scene::{SceneRep, POINT_BYTES};
use crate::trace::MemTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub frame: Frame,
    pub trace: MemTrace,
    pub samples_computed: usize,
    /// Individual vertex or point fetches.
    pub gathers: usize,
}

/// Feature fetches made by one ray until it terminates, as global feature
/// indices (grid vertices numbered level after level, or point ids).
#[derive(Debug, Clone, PartialEq)]
pub struct RayGathers {
    pub out: Composited,
    pub fetches: Vec<u64>,
    /// End offset into `fetches` of each computed sample.
    pub sample_ends: Vec<usize>,
}

impl RayGathers {
    pub fn samples(&self) -> impl Iterator<Item = &[u64]> + '_ {
        let mut start = 0;
        self.sample_ends.iter().map(move |&e| {
            let s = &self.fetches[start..e];
            start = e;
            s
        })
    }
}

pub fn ray_gathers(ray: &Ray, ray_id: usize, scene: &SceneRep, opts: &RenderOptions) -> RayGathers {
    let mut comp = Compositor::new();
    let mut fetches = Vec::new();
    let mut sample_ends = Vec::new();
    match scene {
        SceneRep::Structured(grid) => {
            let mut offsets = Vec::with_capacity(grid.levels.len());
            let mut acc = 0u64;
            for l in &grid.levels {
                offsets.push(acc);
                acc += l.vertex_count() as u64;
            }
            let (ss, spacing) = sample_structured(ray, ray_id, grid, opts.samples_per_ray);
            for s in &ss {
                let plan = gather_plan(grid, &s.position);
                for (l, g) in plan.iter().enumerate() {
                    fetches.extend(g.corners.iter().map(|&v| offsets[l] + v as u64));
                }
                sample_ends.push(fetches.len());
                let (alpha, color) = shade_structured(&gather_feature(grid, &plan), &grid.mlp, spacing);
                if !comp.push(alpha, color, s.t) {
                    break;
                }
            }
        }
        SceneRep::Unstructured(cloud) => {
            for s in &intersect_unstructured(ray, ray_id, cloud) {
                let SampleSource::Point(id) = s.source else { unreachable!() };
                fetches.push(id as u64);
                sample_ends.push(fetches.len());
                let res = feature_compute_unstructured(s, &cloud.points[id]);
                if !comp.push(res.alpha(0.0), res.color, s.t) {
                    break;
                }
            }
        }
    }
    RayGathers { out: comp.finish(), fetches, sample_ends }
}

/// Bytes of one fetched feature record.
pub fn gather_bytes(scene: &SceneRep) -> u64 {
    match scene {
        SceneRep::Structured(g) => vertex_bytes(g.channels),
        SceneRep::Unstructured(_) => POINT_BYTES as u64,
    }
}

pub fn render_frame_traced(pose: &CameraPose, intr: &Intrinsics, scene: &SceneRep, opts: &RenderOptions) -> BaselineOutput {
    let rays = index_rays(pose, intr);
    let fbytes = gather_bytes(scene);
    let logs: Vec<RayGathers> = rays.par_iter().enumerate().map(|(r, ray)| ray_gathers(ray, r, scene, opts)).collect();

    let mut trace = MemTrace::new();
    let mut frame = Frame::empty(intr.width, intr.height);
    let mut gathers = 0;
    let mut samples_computed = 0;
    for (r, (ray, log)) in rays.iter().zip(&logs).enumerate() {
        for (s, fetches) in log.samples().enumerate() {
            for &f in fetches {
                trace.dram_read_isolated(f * fbytes, fbytes);
            }
            gathers += fetches.len();
            let slot = (r as u64 * 1024 + s as u64) * fbytes;
            trace.sram_write(slot, fbytes, SRAM_SAMPLE_BUFFER);
            trace.sram_read(slot, fbytes, SRAM_SAMPLE_BUFFER);
        }
        samples_computed += log.sample_ends.len();
        store_pixel(&mut frame, r, ray, &log.out);
    }
    BaselineOutput { frame, trace, samples_computed, gathers }
}
