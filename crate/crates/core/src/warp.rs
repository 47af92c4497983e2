//! Depth-based reprojection of a rendered reference frame to a nearby
//! target pose, followed by sparse rendering of the pixels it leaves open.

use rayon::prelude::*;

use crate::camera::{CameraPose, Intrinsics, RigidTransform};
use crate::frame::{Frame, INFINITE_DEPTH};
use crate::geom::{angle_between, round_half_down, Aabb, Vec3};
use crate::render::{self, pixel_ray, point_hits_ray, Ray, RenderOptions};
use crate::scene::{GaussianCloud, SceneRep, VoxelGrid};

/// Per-pixel camera-space points of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudFrame {
    pub width: usize,
    pub height: usize,
    pub points: Vec<Vec3>,
    pub colors: Vec<[f32; 3]>,
    pub valid: Vec<bool>,
}

pub fn unproject(frame: &Frame, intr: &Intrinsics) -> PointCloudFrame {
    let n = frame.len();
    let mut pc = PointCloudFrame {
        width: frame.width,
        height: frame.height,
        points: vec![Vec3::zeros(); n],
        colors: frame.color.clone(),
        valid: vec![false; n],
    };
    for i in 0..n {
        let d = frame.depth[i] as f64;
        if !frame.valid[i] || !d.is_finite() || d <= 0.0 {
            continue;
        }
        let (u, v) = ((i % frame.width) as f64, (i / frame.width) as f64);
        pc.points[i] = Vec3::new(d * (u - intr.cx) / intr.f, d * (v - intr.cy) / intr.f, d);
        pc.valid[i] = true;
    }
    pc
}

pub fn transform_points(pc: &PointCloudFrame, xf: &RigidTransform) -> PointCloudFrame {
    let mut out = pc.clone();
    for (p, &ok) in out.points.iter_mut().zip(&pc.valid) {
        if ok {
            *p = xf.apply(p);
        }
    }
    out
}

/// Target pixel each valid point lands on, if any.
fn project_indexed(pc: &PointCloudFrame, intr: &Intrinsics) -> (Frame, Vec<Option<usize>>) {
    let mut frame = Frame::empty(intr.width, intr.height);
    let mut source = vec![None; frame.len()];
    for (i, p) in pc.points.iter().enumerate() {
        if !pc.valid[i] || !(p.z > 0.0) {
            continue;
        }
        let u = round_half_down(intr.f * p.x / p.z + intr.cx);
        let v = round_half_down(intr.f * p.y / p.z + intr.cy);
        if u < 0.0 || v < 0.0 || u >= intr.width as f64 || v >= intr.height as f64 {
            continue;
        }
        let j = frame.index(u as usize, v as usize);
        let z = p.z as f32;
        if !frame.valid[j] || z < frame.depth[j] {
            frame.color[j] = pc.colors[i];
            frame.depth[j] = z;
            frame.valid[j] = true;
            source[j] = Some(i);
        }
    }
    (frame, source)
}

/// Perspective projection with a nearest-depth z-buffer; each point covers
/// the single nearest pixel.
pub fn project(pc: &PointCloudFrame, intr: &Intrinsics) -> Frame {
    project_indexed(pc, intr).0
}

/// Conservative test for whether a ray can meet any geometry.
#[derive(Debug, Clone)]
pub enum OccupancyProbe {
    /// Blocks of grid cells whose density can be nonzero.
    Blocks(Vec<Aabb>),
    /// Exact ray/point intersection against the cloud.
    Cloud(GaussianCloud),
}

/// Grid cells per block edge in the structured probe.
pub const PROBE_BLOCK_CELLS: usize = 4;

impl OccupancyProbe {
    pub fn new(scene: &SceneRep) -> Self {
        match scene {
            SceneRep::Structured(g) => OccupancyProbe::Blocks(occupied_blocks(g)),
            SceneRep::Unstructured(c) => OccupancyProbe::Cloud(c.clone()),
        }
    }

    pub fn may_hit(&self, ray: &Ray) -> bool {
        match self {
            OccupancyProbe::Blocks(blocks) => blocks.iter().any(|b| b.intersect_ray(&ray.origin, &ray.direction).is_some()),
            OccupancyProbe::Cloud(c) => c.points.iter().any(|p| point_hits_ray(ray, &p.position(), p.scale).is_some()),
        }
    }
}

/// Density is a relu of a function linear in the interpolated feature, so
/// its pre-activation inside a region is bounded by the bias plus, per
/// level, the largest per-vertex head response near the region.
fn occupied_blocks(grid: &VoxelGrid) -> Vec<Aabb> {
    let c = grid.channels;
    let responses: Vec<Vec<f64>> = grid
        .levels
        .iter()
        .map(|l| {
            (0..l.vertex_count())
                .map(|v| l.feature(v, c).iter().zip(&grid.mlp.w_sigma).map(|(&f, &w)| f as f64 * w as f64).sum())
                .collect()
        })
        .collect();
    let fine = grid.finest();
    let cells = fine.dims.map(|d| d - 1);
    let nb = cells.map(|n| n.div_ceil(PROBE_BLOCK_CELLS));
    let pad = 1e-9 * fine.cell_size.max(1.0);
    let mut out = Vec::new();
    for bz in 0..nb[2] {
        for by in 0..nb[1] {
            for bx in 0..nb[0] {
                let lo = [bx, by, bz].map(|b| b * PROBE_BLOCK_CELLS);
                let min = fine.origin + Vec3::new(lo[0] as f64, lo[1] as f64, lo[2] as f64) * fine.cell_size;
                let hi = [0, 1, 2].map(|a| (lo[a] + PROBE_BLOCK_CELLS).min(cells[a]));
                let max = fine.origin + Vec3::new(hi[0] as f64, hi[1] as f64, hi[2] as f64) * fine.cell_size;
                let bound = grid.mlp.b_sigma as f64
                    + grid.levels.iter().zip(&responses).map(|(l, r)| max_response_near(l, r, &min, &max)).sum::<f64>();
                if bound > 0.0 {
                    out.push(Aabb::new(min - Vec3::repeat(pad), max + Vec3::repeat(pad)));
                }
            }
        }
    }
    out
}

/// Largest response among vertices within one level cell of the box.
fn max_response_near(level: &crate::scene::GridLevel, resp: &[f64], min: &Vec3, max: &Vec3) -> f64 {
    let range = |a: usize| {
        let lo = ((min[a] - level.origin[a]) / level.cell_size).floor() - 1.0;
        let hi = ((max[a] - level.origin[a]) / level.cell_size).ceil() + 1.0;
        let top = (level.dims[a] - 1) as f64;
        (lo.clamp(0.0, top) as usize, hi.clamp(0.0, top) as usize)
    };
    let (x0, x1) = range(0);
    let (y0, y1) = range(1);
    let (z0, z1) = range(2);
    let mut best = f64::NEG_INFINITY;
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                best = best.max(resp[level.vertex_id(x, y, z)]);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub frame: Frame,
    /// Pixels that need rendering.
    pub disocclusion_mask: Vec<bool>,
    /// Uncovered pixels known to see nothing.
    pub void_mask: Vec<bool>,
    /// Angle at the surface point between the reference and target rays;
    /// NaN on uncovered pixels.
    pub warp_angle: Vec<f32>,
}

impl WarpResult {
    pub fn covered(&self, i: usize) -> bool {
        self.frame.valid[i]
    }

    pub fn covered_count(&self) -> usize {
        self.frame.valid.iter().filter(|&&v| v).count()
    }

    pub fn disoccluded_count(&self) -> usize {
        self.disocclusion_mask.iter().filter(|&&v| v).count()
    }

    /// Fraction of the pixels with finite depth in `target` that received a
    /// warped point. 1 when `target` sees nothing.
    pub fn coverage(&self, target: &Frame) -> f64 {
        let finite: Vec<usize> = (0..target.len()).filter(|&i| target.depth[i].is_finite()).collect();
        if finite.is_empty() {
            return 1.0;
        }
        finite.iter().filter(|&&i| self.covered(i)).count() as f64 / finite.len() as f64
    }

    /// Largest warp angle over covered pixels, 0 if none are covered.
    pub fn max_warp_angle(&self) -> f64 {
        self.warp_angle.iter().filter(|a| !a.is_nan()).fold(0.0f64, |m, &a| m.max(a as f64))
    }
}

/// Warp without scene knowledge: every uncovered pixel is disoccluded.
pub fn warp(reference: &Frame, ref_pose: &CameraPose, tgt_pose: &CameraPose, intr: &Intrinsics) -> WarpResult {
    warp_with_probe(reference, ref_pose, tgt_pose, intr, None)
}

/// Warp, classifying uncovered pixels as void when the probe says the
/// target ray cannot meet geometry.
pub fn warp_with_probe(
    reference: &Frame,
    ref_pose: &CameraPose,
    tgt_pose: &CameraPose,
    intr: &Intrinsics,
    probe: Option<&OccupancyProbe>,
) -> WarpResult {
    let pc = unproject(reference, intr);
    let moved = transform_points(&pc, &RigidTransform::between(ref_pose, tgt_pose));
    let (frame, source) = project_indexed(&moved, intr);
    let n = frame.len();
    let (ref_c, tgt_c) = (ref_pose.center(), tgt_pose.center());
    let warp_angle = source
        .iter()
        .map(|s| match s {
            Some(i) => {
                let world = ref_pose.camera_to_world(&pc.points[*i]);
                angle_between(&(world - ref_c), &(world - tgt_c)) as f32
            }
            None => f32::NAN,
        })
        .collect();
    let void_mask: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            if frame.valid[i] {
                return false;
            }
            let Some(probe) = probe else { return false };
            let (u, v) = (i % intr.width, i / intr.width);
            !probe.may_hit(&pixel_ray(tgt_pose, intr, u as f64, v as f64, (u as u32, v as u32)))
        })
        .collect();
    let disocclusion_mask = (0..n).map(|i| !frame.valid[i] && !void_mask[i]).collect();
    WarpResult { frame, disocclusion_mask, void_mask, warp_angle }
}

/// Fraction of the finite-depth pixels of `target` whose surface point is
/// visible in `reference`: one of the four reference pixels around its
/// projection has a depth that agrees within `rel_tol`. Unlike
/// [`WarpResult::coverage`] this ignores splat cracks and silhouette
/// rounding. 1 when `target` sees nothing.
pub fn reprojectable_fraction(
    reference: &Frame,
    ref_pose: &CameraPose,
    target: &Frame,
    tgt_pose: &CameraPose,
    intr: &Intrinsics,
    rel_tol: f64,
) -> f64 {
    let pc = unproject(target, intr);
    let back = transform_points(&pc, &RigidTransform::between(tgt_pose, ref_pose));
    let total = pc.valid.iter().filter(|&&v| v).count();
    if total == 0 {
        return 1.0;
    }
    let visible = |p: &Vec3| {
        if !(p.z > 0.0) {
            return false;
        }
        let (x, y) = (intr.f * p.x / p.z + intr.cx, intr.f * p.y / p.z + intr.cy);
        let (u0, v0) = (x.floor(), y.floor());
        [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].iter().any(|&(du, dv)| {
            let (u, v) = (u0 + du, v0 + dv);
            if u < 0.0 || v < 0.0 || u >= intr.width as f64 || v >= intr.height as f64 {
                return false;
            }
            let d = reference.depth[reference.index(u as usize, v as usize)] as f64;
            d.is_finite() && (d - p.z).abs() <= rel_tol * p.z
        })
    };
    let hits = (0..pc.points.len()).filter(|&i| pc.valid[i] && visible(&back.points[i])).count();
    hits as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelSource {
    WarpCopy,
    SparseNerf,
    VoidBackground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilledFrame {
    pub frame: Frame,
    pub sources: Vec<PixelSource>,
}

impl FilledFrame {
    pub fn count(&self, src: PixelSource) -> usize {
        self.sources.iter().filter(|&&s| s == src).count()
    }
}

/// Renders disoccluded pixels, paints void pixels as background and copies
/// the rest from the warp.
pub fn fill_disoccluded(
    warp: &WarpResult,
    tgt_pose: &CameraPose,
    intr: &Intrinsics,
    scene: &SceneRep,
    opts: &RenderOptions,
) -> FilledFrame {
    let mut frame = warp.frame.clone();
    let n = frame.len();
    let mut sources = vec![PixelSource::WarpCopy; n];
    let mut to_render = Vec::new();
    for i in 0..n {
        if warp.disocclusion_mask[i] {
            sources[i] = PixelSource::SparseNerf;
            to_render.push(i);
        } else if warp.void_mask[i] || !warp.frame.valid[i] {
            sources[i] = PixelSource::VoidBackground;
            frame.color[i] = [0.0; 3];
            frame.depth[i] = INFINITE_DEPTH;
            frame.valid[i] = true;
        }
    }
    render::render_pixels(tgt_pose, intr, scene, opts, &to_render, &mut frame);
    FilledFrame { frame, sources }
}

/// Reprojection without any fill; holes stay black. A lower bound for
/// comparing fill strategies.
pub fn naive_warp_frame(warp: &WarpResult) -> Frame {
    let mut f = warp.frame.clone();
    for i in 0..f.len() {
        if !f.valid[i] {
            f.color[i] = [0.0; 3];
        }
    }
    f
}
