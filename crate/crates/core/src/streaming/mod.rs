//! Memory-centric rendering: features are grouped into DRAM blocks
//! (MVoxels for grids, octree leaves for point clouds), each block is read
//! once, and every ray sample that needs it is served while it is on chip.
//!
//! Per-ray state holds the samples whose features are still arriving;
//! a sample is composited only once it and every nearer sample on its ray
//! are complete, so the result is the pixel-centric result bit for bit.

pub mod baseline;
pub mod levels;
pub mod mvoxel;
pub mod octree;
pub mod rit;

pub use baseline::{gather_bytes, ray_gathers, render_frame_traced, BaselineOutput, RayGathers};
pub use levels::{level_bases, partition_levels, touched_vertices, LevelUtilization, DEFAULT_REVERT_THRESHOLD};
pub use mvoxel::{build_level_mvoxels, build_mvoxels, mvoxel_side, vertex_bytes, CapacityError, MVoxel, MVoxelGrid};
pub use octree::{merge_octree, uniform_octree, MergedOctree, OctreeLeaf, MAX_OCTREE_DEPTH};
pub use rit::{build_rit, group_order, BlockRead, RayIndexTable, RayRecord, WorkItem, RAY_GROUP};

use crate::camera::{CameraPose, Intrinsics};
use crate::frame::Frame;
use crate::geom::{Aabb, Vec3};
use crate::render::{accumulate, feature_compute_unstructured, index_rays, shade_structured, store_pixel, Compositor, RenderOptions};
use crate::scene::{GaussianPoint, SceneRep, POINT_BYTES};
use crate::trace::MemTrace;

/// On-chip feature buffer size.
pub const DEFAULT_CAPACITY: u64 = 32 * 1024;
/// SRAM tag of the feature buffer holding the current block.
pub const SRAM_FEATURE_BUFFER: u64 = 0;
/// SRAM tag of the buffer holding gathered per-sample features.
pub const SRAM_SAMPLE_BUFFER: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum LevelPlan {
    Streamed(MVoxelGrid),
    Reverted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockLayout {
    Grid {
        channels: usize,
        levels: Vec<LevelPlan>,
        /// Global id of each level's first block.
        offsets: Vec<usize>,
        level_base: Vec<u64>,
        count: usize,
    },
    Octree(MergedOctree),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockInfo {
    pub level: usize,
    pub base: u64,
    pub bytes: u64,
    pub bounds: Aabb,
}

impl BlockLayout {
    pub fn grid(grid: &crate::scene::VoxelGrid, levels: Vec<LevelPlan>) -> Self {
        let mut offsets = Vec::with_capacity(levels.len());
        let mut count = 0;
        for lp in &levels {
            offsets.push(count);
            if let LevelPlan::Streamed(mv) = lp {
                count += mv.blocks.len();
            }
        }
        BlockLayout::Grid { channels: grid.channels, levels, offsets, level_base: level_bases(grid), count }
    }

    pub fn block_count(&self) -> usize {
        match self {
            BlockLayout::Grid { count, .. } => *count,
            BlockLayout::Octree(t) => t.leaves.len(),
        }
    }

    /// Level and level-local index of a global block id.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        match self {
            BlockLayout::Grid { levels, offsets, .. } => {
                for (l, lp) in levels.iter().enumerate().rev() {
                    if let LevelPlan::Streamed(mv) = lp {
                        if global >= offsets[l] {
                            assert!(global - offsets[l] < mv.blocks.len(), "block id out of range");
                            return (l, global - offsets[l]);
                        }
                    }
                }
                panic!("block id out of range")
            }
            BlockLayout::Octree(_) => (0, global),
        }
    }

    pub fn block(&self, global: usize) -> BlockInfo {
        let (l, i) = self.locate(global);
        match self {
            BlockLayout::Grid { levels, .. } => {
                let LevelPlan::Streamed(mv) = &levels[l] else { unreachable!() };
                let b = &mv.blocks[i];
                BlockInfo { level: l, base: b.base, bytes: b.bytes, bounds: b.bounds }
            }
            BlockLayout::Octree(t) => {
                let leaf = &t.leaves[i];
                BlockInfo { level: 0, base: leaf.base, bytes: leaf.bytes, bounds: leaf.bounds }
            }
        }
    }

    pub fn streamed_levels(&self) -> usize {
        match self {
            BlockLayout::Grid { levels, .. } => levels.iter().filter(|l| matches!(l, LevelPlan::Streamed(_))).count(),
            BlockLayout::Octree(_) => 1,
        }
    }
}

/// Block visiting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisitOrder {
    /// Nearest block to the eye first.
    #[default]
    FrontToBack,
    /// Ascending DRAM address.
    Dram,
}

impl std::str::FromStr for VisitOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "front_to_back" => Ok(VisitOrder::FrontToBack),
            "dram" => Ok(VisitOrder::Dram),
            other => Err(format!("unknown visit order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOptions {
    pub render: RenderOptions,
    pub capacity: u64,
    pub order: VisitOrder,
    pub revert_threshold: f64,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            render: RenderOptions::default(),
            capacity: DEFAULT_CAPACITY,
            order: VisitOrder::default(),
            revert_threshold: DEFAULT_REVERT_THRESHOLD,
        }
    }
}

/// Block layout for a scene: per-level MVoxel grids (with sparsely used
/// levels reverted) or a merged octree.
pub fn prepare_layout(
    scene: &SceneRep,
    pose: &CameraPose,
    intr: &Intrinsics,
    opts: &StreamOptions,
) -> Result<(BlockLayout, Vec<LevelUtilization>), CapacityError> {
    match scene {
        SceneRep::Structured(grid) => {
            let rays = index_rays(pose, intr);
            let (plans, stats) = partition_levels(grid, &rays, &opts.render, opts.capacity, opts.revert_threshold)?;
            Ok((BlockLayout::grid(grid, plans), stats))
        }
        SceneRep::Unstructured(cloud) => Ok((BlockLayout::Octree(merge_octree(cloud, opts.capacity)?), Vec::new())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLoad {
    pub block: usize,
    pub level: usize,
    pub base: u64,
    pub bytes: u64,
    /// Work items served from this load.
    pub items: usize,
    /// Vertex or point reads served from this load.
    pub reads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    pub frame: Frame,
    pub trace: MemTrace,
    pub loads: Vec<BlockLoad>,
    /// Samples that went through feature computation.
    pub samples_computed: usize,
    /// Vertex reads served from reverted levels.
    pub reverted_reads: usize,
    /// Load position during which each ray terminated early.
    pub ray_terminated_at: Vec<Option<usize>>,
    /// Last load position that served each ray.
    pub ray_last_load: Vec<Option<usize>>,
}

enum Gathered {
    Features(Box<[f32]>),
    Point(GaussianPoint),
}

struct RayState {
    comp: Compositor,
    next: usize,
    done: bool,
    missing: Vec<u8>,
    gathered: Vec<Option<Gathered>>,
}

struct Streamer<'a> {
    scene: &'a SceneRep,
    layout: &'a BlockLayout,
    rit: &'a RayIndexTable,
    trace: MemTrace,
    states: Vec<RayState>,
    samples_computed: usize,
    reverted_reads: usize,
    terminated_at: Vec<Option<usize>>,
}

impl Streamer<'_> {
    fn feature_bytes(&self) -> u64 {
        match self.layout {
            BlockLayout::Grid { channels, .. } => vertex_bytes(*channels),
            BlockLayout::Octree(_) => POINT_BYTES as u64,
        }
    }

    /// Composites every complete sample at the head of the ray.
    fn drain(&mut self, r: usize, position: usize) {
        let fbytes = self.feature_bytes();
        let (scene, layout, rit) = (self.scene, self.layout, self.rit);
        loop {
            let st = &self.states[r];
            if st.done || st.next >= st.missing.len() || st.missing[st.next] != 0 {
                return;
            }
            let s = st.next;
            let gathered = self.states[r].gathered[s].take();
            let record = &rit.rays[r];
            let sample = &record.samples[s];
            let (alpha, color) = match (scene, layout) {
                (SceneRep::Structured(grid), BlockLayout::Grid { levels, level_base, .. }) => {
                    let c = grid.channels;
                    let values = match &gathered {
                        Some(Gathered::Features(v)) => &v[..],
                        _ => &[][..],
                    };
                    let plan = &record.plans[s];
                    let mut acc = vec![0.0; c];
                    let mut pos = 0;
                    for (l, level) in grid.levels.iter().enumerate() {
                        let g = &plan[l];
                        match &levels[l] {
                            LevelPlan::Streamed(_) => {
                                let base = pos * 8;
                                accumulate(
                                    &mut acc,
                                    (0..8).map(|k| (&values[(base + k) * c..(base + k + 1) * c], g.weights[k])),
                                );
                                pos += 1;
                            }
                            LevelPlan::Reverted => {
                                for &v in &g.corners {
                                    self.trace.dram_read_isolated(level_base[l] + v as u64 * fbytes, fbytes);
                                }
                                self.reverted_reads += 8;
                                accumulate(&mut acc, g.corners.iter().map(|&v| level.feature(v, c)).zip(g.weights.iter().copied()));
                            }
                        }
                    }
                    shade_structured(&acc, &grid.mlp, record.spacing)
                }
                (SceneRep::Unstructured(_), BlockLayout::Octree(_)) => {
                    let Some(Gathered::Point(p)) = gathered else { unreachable!("point sample drained before its read") };
                    let res = feature_compute_unstructured(sample, &p);
                    (res.alpha(0.0), res.color)
                }
                _ => unreachable!(),
            };
            let slot = (r as u64 * 1024 + s as u64) * fbytes;
            self.trace.sram_write(slot, fbytes, SRAM_SAMPLE_BUFFER);
            self.trace.sram_read(slot, fbytes, SRAM_SAMPLE_BUFFER);
            self.samples_computed += 1;
            let st = &mut self.states[r];
            st.next += 1;
            if !st.comp.push(alpha, color, sample.t) {
                st.done = true;
                st.gathered.clear();
                self.terminated_at[r] = Some(position);
                return;
            }
        }
    }
}

/// Renders a frame by streaming blocks of `layout`.
pub fn stream_render(
    pose: &CameraPose,
    intr: &Intrinsics,
    scene: &SceneRep,
    layout: &BlockLayout,
    opts: &StreamOptions,
) -> StreamOutput {
    let rays = index_rays(pose, intr);
    let rit = build_rit(&rays, scene, layout, &opts.render);
    stream_with_rit(pose, intr, scene, layout, &rit, opts.order)
}

/// Prepares the layout for this view and streams it.
pub fn stream_render_frame(
    pose: &CameraPose,
    intr: &Intrinsics,
    scene: &SceneRep,
    opts: &StreamOptions,
) -> Result<StreamOutput, CapacityError> {
    let (layout, _) = prepare_layout(scene, pose, intr, opts)?;
    Ok(stream_render(pose, intr, scene, &layout, opts))
}

/// Distance from `p` to the box, 0 inside.
fn box_distance(b: &Aabb, p: &Vec3) -> f64 {
    let d = Vec3::from_fn(|a, _| (b.min[a] - p[a]).max(0.0).max(p[a] - b.max[a]));
    d.norm()
}

pub fn visit_order(layout: &BlockLayout, rit: &RayIndexTable, eye: &Vec3, order: VisitOrder) -> Vec<usize> {
    let mut blocks: Vec<usize> = rit.touched_blocks().collect();
    match order {
        VisitOrder::Dram => blocks.sort_by_key(|&b| layout.block(b).base),
        VisitOrder::FrontToBack => {
            let key: Vec<(f64, usize)> = blocks.iter().map(|&b| (box_distance(&layout.block(b).bounds, eye), b)).collect();
            let mut keyed = key;
            keyed.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            blocks = keyed.into_iter().map(|(_, b)| b).collect();
        }
    }
    blocks
}

pub fn stream_with_rit(
    pose: &CameraPose,
    intr: &Intrinsics,
    scene: &SceneRep,
    layout: &BlockLayout,
    rit: &RayIndexTable,
    order: VisitOrder,
) -> StreamOutput {
    let rays = index_rays(pose, intr);
    assert_eq!(rays.len(), rit.rays.len(), "table was built for a different ray set");
    let slots = match layout {
        BlockLayout::Grid { .. } => 8 * layout.streamed_levels(),
        BlockLayout::Octree(_) => 1,
    } as u8;
    let states = rit
        .rays
        .iter()
        .map(|rec| {
            let n = rec.samples.len();
            RayState {
                comp: Compositor::new(),
                next: 0,
                done: false,
                missing: vec![slots; n],
                gathered: (0..n).map(|_| None).collect(),
            }
        })
        .collect();
    let mut st = Streamer {
        scene,
        layout,
        rit,
        trace: MemTrace::new(),
        states,
        samples_computed: 0,
        reverted_reads: 0,
        terminated_at: vec![None; rays.len()],
    };
    let mut last_load = vec![None; rays.len()];
    for r in 0..rays.len() {
        st.drain(r, 0);
    }

    let channels = match scene {
        SceneRep::Structured(g) => g.channels,
        SceneRep::Unstructured(_) => 0,
    };
    let mut loads = Vec::new();
    for b in visit_order(layout, rit, &pose.center(), order) {
        let items = &rit.entries[b];
        if items.iter().all(|it| st.states[it.ray as usize].done) {
            continue;
        }
        let info = layout.block(b);
        let position = loads.len();
        st.trace.dram_read(info.base, info.bytes, b as u64);
        st.trace.sram_write(0, info.bytes, SRAM_FEATURE_BUFFER);
        let (level, local_block) = layout.locate(b);
        let mut served_items = 0;
        let mut served_reads = 0;
        let fbytes = st.feature_bytes();
        for it in items {
            let r = it.ray as usize;
            if st.states[r].done {
                continue;
            }
            served_items += 1;
            served_reads += it.reads.len();
            last_load[r] = Some(position);
            st.trace.sram_read(it.reads[0].local as u64 * fbytes, it.reads.len() as u64 * fbytes, SRAM_FEATURE_BUFFER);
            let s = it.sample as usize;
            let state = &mut st.states[r];
            match layout {
                BlockLayout::Grid { levels, .. } => {
                    let LevelPlan::Streamed(mv) = &levels[level] else { unreachable!() };
                    let block = &mv.blocks[local_block];
                    let buf = state.gathered[s]
                        .get_or_insert_with(|| Gathered::Features(vec![0f32; slots as usize * channels].into_boxed_slice()));
                    let Gathered::Features(buf) = buf else { unreachable!() };
                    for rd in &it.reads {
                        let dst = rd.slot as usize * channels;
                        for ch in 0..channels {
                            buf[dst + ch] = block.read(rd.local as usize, ch);
                        }
                    }
                }
                BlockLayout::Octree(tree) => {
                    state.gathered[s] = Some(Gathered::Point(tree.leaves[local_block].data[it.reads[0].local as usize]));
                }
            }
            state.missing[s] -= it.reads.len() as u8;
            if state.missing[s] == 0 && state.next == s {
                st.drain(r, position);
            }
        }
        loads.push(BlockLoad { block: b, level: info.level, base: info.base, bytes: info.bytes, items: served_items, reads: served_reads });
    }

    let mut frame = Frame::empty(intr.width, intr.height);
    for (r, ray) in rays.iter().enumerate() {
        let s = &st.states[r];
        debug_assert!(s.done || s.next == s.missing.len(), "ray {r} left samples pending");
        store_pixel(&mut frame, r, ray, &s.comp.finish());
    }
    StreamOutput {
        frame,
        trace: st.trace,
        loads,
        samples_computed: st.samples_computed,
        reverted_reads: st.reverted_reads,
        ray_terminated_at: st.terminated_at,
        ray_last_load: last_load,
    }
}
