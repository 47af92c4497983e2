use smallvec::SmallVec;

use super::{BlockLayout, LevelPlan};
use crate::render::{gather_plan, intersect_unstructured, sample_structured, Ray, RaySample, RenderOptions, SampleGather, SampleSource};
use crate::scene::SceneRep;

/// Rays are scheduled in square pixel tiles of this size.
pub const RAY_GROUP: u32 = 8;

/// One value read out of a block. `slot` is `streamed_level * 8 + corner`
/// for grids and 0 for points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRead {
    pub slot: u8,
    pub local: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkItem {
    pub ray: u32,
    pub sample: u32,
    pub reads: SmallVec<[BlockRead; 8]>,
}

/// Sampling output of one ray, shared by every block that serves it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RayRecord {
    pub samples: Vec<RaySample>,
    /// Per-sample gather plan; empty for point clouds.
    pub plans: Vec<SampleGather>,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RayIndexTable {
    /// Work items per global block, ordered by ray group, ray, then sample.
    pub entries: Vec<Vec<WorkItem>>,
    pub rays: Vec<RayRecord>,
}

impl RayIndexTable {
    pub fn item_count(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn touched_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().enumerate().filter(|(_, e)| !e.is_empty()).map(|(i, _)| i)
    }
}

/// Ray ids ordered by pixel tile, then row-major inside the tile.
pub fn group_order(rays: &[Ray]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..rays.len()).collect();
    ids.sort_by_key(|&i| {
        let (u, v) = rays[i].pixel;
        (v / RAY_GROUP, u / RAY_GROUP, v, u, i)
    });
    ids
}

pub fn build_rit(rays: &[Ray], scene: &SceneRep, layout: &BlockLayout, opts: &RenderOptions) -> RayIndexTable {
    let mut rit = RayIndexTable { entries: vec![Vec::new(); layout.block_count()], rays: vec![RayRecord::default(); rays.len()] };
    for r in group_order(rays) {
        let ray = &rays[r];
        match (scene, layout) {
            (SceneRep::Structured(grid), BlockLayout::Grid { levels, offsets, .. }) => {
                let (samples, spacing) = sample_structured(ray, r, grid, opts.samples_per_ray);
                let plans: Vec<SampleGather> = samples.iter().map(|s| gather_plan(grid, &s.position)).collect();
                for (si, plan) in plans.iter().enumerate() {
                    let mut items: SmallVec<[(usize, SmallVec<[BlockRead; 8]>); 8]> = SmallVec::new();
                    let mut pos = 0u8;
                    for (l, lp) in levels.iter().enumerate() {
                        let LevelPlan::Streamed(mv) = lp else { continue };
                        let level = &grid.levels[l];
                        for (k, &v) in plan[l].corners.iter().enumerate() {
                            let (b, local) = mv.owner(level.vertex_coords(v));
                            let global = offsets[l] + b;
                            let read = BlockRead { slot: pos * 8 + k as u8, local: local as u32 };
                            match items.iter_mut().find(|(g, _)| *g == global) {
                                Some((_, reads)) => reads.push(read),
                                None => items.push((global, smallvec::smallvec![read])),
                            }
                        }
                        pos += 1;
                    }
                    for (global, reads) in items {
                        rit.entries[global].push(WorkItem { ray: r as u32, sample: si as u32, reads });
                    }
                }
                rit.rays[r] = RayRecord { samples, plans, spacing };
            }
            (SceneRep::Unstructured(cloud), BlockLayout::Octree(tree)) => {
                let samples = intersect_unstructured(ray, r, cloud);
                for (si, s) in samples.iter().enumerate() {
                    let SampleSource::Point(p) = s.source else { unreachable!() };
                    let read = BlockRead { slot: 0, local: tree.point_local[p] };
                    rit.entries[tree.point_leaf[p]].push(WorkItem { ray: r as u32, sample: si as u32, reads: smallvec::smallvec![read] });
                }
                rit.rays[r] = RayRecord { samples, plans: Vec::new(), spacing: 0.0 };
            }
            _ => panic!("block layout does not match the scene representation"),
        }
    }
    rit
}
