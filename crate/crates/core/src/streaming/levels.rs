use super::mvoxel::{build_level_mvoxels, vertex_bytes, CapacityError};
use super::LevelPlan;
use crate::render::{gather_plan, sample_structured, Ray, RenderOptions};
use crate::scene::VoxelGrid;

/// Levels whose loaded MVoxels would be used less than this are served by
/// pixel-centric random access instead.
pub const DEFAULT_REVERT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelUtilization {
    pub level: usize,
    /// Distinct vertices any sample needs.
    pub touched: usize,
    /// Vertices held by the MVoxels those samples would load.
    pub loaded: usize,
    pub utilization: f64,
    pub streamed: bool,
}

/// DRAM base address of each level's feature region, levels back to back.
pub fn level_bases(grid: &VoxelGrid) -> Vec<u64> {
    let per = vertex_bytes(grid.channels);
    let mut base = 0;
    grid.levels
        .iter()
        .map(|l| {
            let b = base;
            base += l.vertex_count() as u64 * per;
            b
        })
        .collect()
}

/// Vertices touched per level by every sample of every ray.
pub fn touched_vertices(grid: &VoxelGrid, rays: &[Ray], opts: &RenderOptions) -> Vec<Vec<bool>> {
    let mut touched: Vec<Vec<bool>> = grid.levels.iter().map(|l| vec![false; l.vertex_count()]).collect();
    for (r, ray) in rays.iter().enumerate() {
        let (samples, _) = sample_structured(ray, r, grid, opts.samples_per_ray);
        for s in &samples {
            for (l, g) in gather_plan(grid, &s.position).iter().enumerate() {
                for &v in &g.corners {
                    touched[l][v] = true;
                }
            }
        }
    }
    touched
}

pub fn partition_levels(
    grid: &VoxelGrid,
    rays: &[Ray],
    opts: &RenderOptions,
    capacity: u64,
    threshold: f64,
) -> Result<(Vec<LevelPlan>, Vec<LevelUtilization>), CapacityError> {
    let touched = touched_vertices(grid, rays, opts);
    let bases = level_bases(grid);
    let mut plans = Vec::with_capacity(grid.levels.len());
    let mut stats = Vec::with_capacity(grid.levels.len());
    for (l, level) in grid.levels.iter().enumerate() {
        let mv = build_level_mvoxels(grid, l, capacity, bases[l])?;
        let mut used = vec![false; mv.blocks.len()];
        let mut count = 0;
        for (v, _) in touched[l].iter().enumerate().filter(|(_, &t)| t) {
            used[mv.owner(level.vertex_coords(v)).0] = true;
            count += 1;
        }
        let loaded: usize = mv.blocks.iter().zip(&used).filter(|(_, &u)| u).map(|(b, _)| b.vertex_count()).sum();
        let utilization = if loaded == 0 { 1.0 } else { count as f64 / loaded as f64 };
        let streamed = utilization >= threshold;
        stats.push(LevelUtilization { level: l, touched: count, loaded, utilization, streamed });
        plans.push(if streamed { LevelPlan::Streamed(mv) } else { LevelPlan::Reverted });
    }
    Ok((plans, stats))
}
