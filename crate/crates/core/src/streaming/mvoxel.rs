use thiserror::Error;

use crate::geom::{Aabb, Vec3};
use crate::scene::{VoxelGrid, FEATURE_BYTES_PER_CHANNEL};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CapacityError {
    #[error("capacity {capacity} B is below the smallest block ({needed} B)")]
    BlockTooLarge { capacity: u64, needed: u64 },
    #[error("point {id} needs {needed} B but capacity is {capacity} B")]
    PointTooLarge { id: usize, needed: u64, capacity: u64 },
    #[error("{count} points share one octree cell at the depth limit; capacity {capacity} B")]
    TooDense { count: usize, capacity: u64 },
}

/// Contiguous DRAM block of spatially adjacent vertices, features stored
/// channel-major: `data[c * vertex_count + local]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MVoxel {
    /// First vertex (grid coordinates).
    pub origin: [usize; 3],
    pub extent: [usize; 3],
    pub base: u64,
    pub bytes: u64,
    pub bounds: Aabb,
    pub data: Vec<f32>,
}

impl MVoxel {
    pub fn vertex_count(&self) -> usize {
        self.extent.iter().product()
    }

    #[inline]
    pub fn read(&self, local: usize, channel: usize) -> f32 {
        self.data[channel * self.vertex_count() + local]
    }

    pub fn local_coords(&self, local: usize) -> [usize; 3] {
        let [ex, ey, _] = self.extent;
        [local % ex, (local / ex) % ey, local / (ex * ey)]
    }
}

/// One grid level regrouped into MVoxels of `side^3` vertices (partial at
/// the far edges), laid out back to back from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct MVoxelGrid {
    pub level: usize,
    pub side: usize,
    pub counts: [usize; 3],
    pub dims: [usize; 3],
    pub channels: usize,
    pub base: u64,
    pub blocks: Vec<MVoxel>,
}

impl MVoxelGrid {
    pub fn block_index(&self, b: [usize; 3]) -> usize {
        b[0] + self.counts[0] * (b[1] + self.counts[1] * b[2])
    }

    /// Owning block and local index of a vertex.
    pub fn owner(&self, v: [usize; 3]) -> (usize, usize) {
        let s = self.side;
        let block = self.block_index([v[0] / s, v[1] / s, v[2] / s]);
        let mv = &self.blocks[block];
        let l = [0, 1, 2].map(|a| v[a] - mv.origin[a]);
        (block, l[0] + mv.extent[0] * (l[1] + mv.extent[1] * l[2]))
    }

    /// Grid coordinates of a block-local vertex.
    pub fn vertex_of(&self, block: usize, local: usize) -> [usize; 3] {
        let mv = &self.blocks[block];
        let l = mv.local_coords(local);
        [0, 1, 2].map(|a| mv.origin[a] + l[a])
    }

    pub fn total_bytes(&self) -> u64 {
        self.blocks.iter().map(|b| b.bytes).sum()
    }
}

pub fn vertex_bytes(channels: usize) -> u64 {
    (channels * FEATURE_BYTES_PER_CHANNEL) as u64
}

/// Largest power-of-two edge whose cube fits `capacity`, capped at the
/// level size.
pub fn mvoxel_side(channels: usize, dims: [usize; 3], capacity: u64) -> Result<usize, CapacityError> {
    let per = vertex_bytes(channels);
    if 8 * per > capacity {
        return Err(CapacityError::BlockTooLarge { capacity, needed: 8 * per });
    }
    let cap = dims.iter().copied().max().unwrap_or(2).next_power_of_two().max(2);
    let mut side = 2;
    while side * 2 <= cap && ((side * 2).pow(3) as u64) * per <= capacity {
        side *= 2;
    }
    Ok(side)
}

/// The finest level of `grid` as an MVoxel grid starting at address 0.
pub fn build_mvoxels(grid: &VoxelGrid, capacity: u64) -> Result<MVoxelGrid, CapacityError> {
    build_level_mvoxels(grid, grid.levels.len() - 1, capacity, 0)
}

pub fn build_level_mvoxels(grid: &VoxelGrid, level: usize, capacity: u64, base: u64) -> Result<MVoxelGrid, CapacityError> {
    let lv = &grid.levels[level];
    let c = grid.channels;
    let side = mvoxel_side(c, lv.dims, capacity)?;
    let counts = lv.dims.map(|d| d.div_ceil(side));
    let mut blocks = Vec::with_capacity(counts.iter().product());
    let mut addr = base;
    for bz in 0..counts[2] {
        for by in 0..counts[1] {
            for bx in 0..counts[0] {
                let origin = [bx * side, by * side, bz * side];
                let extent = [0, 1, 2].map(|a| side.min(lv.dims[a] - origin[a]));
                let n: usize = extent.iter().product();
                let mut data = vec![0f32; n * c];
                for lz in 0..extent[2] {
                    for ly in 0..extent[1] {
                        for lx in 0..extent[0] {
                            let local = lx + extent[0] * (ly + extent[1] * lz);
                            let f = lv.feature(lv.vertex_id(origin[0] + lx, origin[1] + ly, origin[2] + lz), c);
                            for (ch, &v) in f.iter().enumerate() {
                                data[ch * n + local] = v;
                            }
                        }
                    }
                }
                let corner = |o: [usize; 3]| lv.origin + Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64) * lv.cell_size;
                let bounds = Aabb::new(corner(origin), corner([0, 1, 2].map(|a| origin[a] + extent[a] - 1)));
                let bytes = n as u64 * vertex_bytes(c);
                blocks.push(MVoxel { origin, extent, base: addr, bytes, bounds, data });
                addr += bytes;
            }
        }
    }
    Ok(MVoxelGrid { level, side, counts, dims: lv.dims, channels: c, base, blocks })
}
