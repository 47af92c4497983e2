use super::mvoxel::CapacityError;
use crate::geom::{Aabb, Vec3};
use crate::scene::{GaussianCloud, GaussianPoint, POINT_BYTES};

pub const MAX_OCTREE_DEPTH: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct OctreeLeaf {
    pub depth: u32,
    /// Cell coordinates at `depth`.
    pub coord: [u32; 3],
    pub bounds: Aabb,
    /// Point ids, ascending.
    pub points: Vec<usize>,
    pub data: Vec<GaussianPoint>,
    pub base: u64,
    pub bytes: u64,
}

/// Octree over the cloud's bounding box whose leaves are uniform cells at
/// `uniform_depth`, merged bottom-up where a full sibling group fits.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedOctree {
    pub bounds: Aabb,
    pub capacity: u64,
    pub uniform_depth: u32,
    /// Depth-first order, which is also the DRAM order.
    pub leaves: Vec<OctreeLeaf>,
    pub point_leaf: Vec<usize>,
    pub point_local: Vec<u32>,
}

impl MergedOctree {
    pub fn uniform_leaf_count(&self) -> usize {
        1 << (3 * self.uniform_depth)
    }

    /// Mean over all leaves, empty ones included.
    pub fn mean_points_per_leaf(&self) -> f64 {
        self.point_leaf.len() as f64 / self.leaves.len() as f64
    }

    pub fn uniform_mean_points_per_leaf(&self) -> f64 {
        self.point_leaf.len() as f64 / self.uniform_leaf_count() as f64
    }

    pub fn total_bytes(&self) -> u64 {
        self.leaves.iter().map(|l| l.bytes).sum()
    }
}

fn point_bytes(n: usize) -> u64 {
    (n * POINT_BYTES) as u64
}

/// Integer cell coordinates at the maximum depth.
fn quantize(bounds: &Aabb, p: &Vec3) -> [u32; 3] {
    let ext = bounds.extent();
    let cells = (1u32 << MAX_OCTREE_DEPTH) as f64;
    [0, 1, 2].map(|a| {
        if ext[a] <= 0.0 {
            return 0;
        }
        ((p[a] - bounds.min[a]) / ext[a] * cells).floor().clamp(0.0, cells - 1.0) as u32
    })
}

enum Node {
    Leaf(Vec<usize>),
    Inner(Box<[Node; 8]>),
}

pub fn merge_octree(cloud: &GaussianCloud, capacity: u64) -> Result<MergedOctree, CapacityError> {
    build_octree(cloud, capacity, true)
}

/// Same tree without merging: every leaf at the uniform depth.
pub fn uniform_octree(cloud: &GaussianCloud, capacity: u64) -> Result<MergedOctree, CapacityError> {
    build_octree(cloud, capacity, false)
}

fn build_octree(cloud: &GaussianCloud, capacity: u64, merge: bool) -> Result<MergedOctree, CapacityError> {
    if point_bytes(1) > capacity {
        return Err(CapacityError::PointTooLarge { id: 0, needed: point_bytes(1), capacity });
    }
    let mut bounds = cloud.bounds();
    if bounds.is_empty() {
        bounds = Aabb::new(Vec3::zeros(), Vec3::zeros());
    }
    let q: Vec<[u32; 3]> = cloud.points.iter().map(|p| quantize(&bounds, &p.position())).collect();

    let mut depth = None;
    for d in 0..=MAX_OCTREE_DEPTH {
        let mut counts = std::collections::HashMap::new();
        let shift = MAX_OCTREE_DEPTH - d;
        for c in &q {
            *counts.entry(c.map(|v| v >> shift)).or_insert(0usize) += 1;
        }
        let max = counts.values().copied().max().unwrap_or(0);
        if point_bytes(max) <= capacity {
            depth = Some(d);
            break;
        }
        if d == MAX_OCTREE_DEPTH {
            return Err(CapacityError::TooDense { count: max, capacity });
        }
    }
    let uniform_depth = depth.unwrap();

    let all: Vec<usize> = (0..cloud.points.len()).collect();
    let root = build_node(&q, all, 0, uniform_depth, capacity, merge);

    let mut tree = MergedOctree {
        bounds,
        capacity,
        uniform_depth,
        leaves: Vec::new(),
        point_leaf: vec![0; cloud.points.len()],
        point_local: vec![0; cloud.points.len()],
    };
    collect_leaves(&root, 0, [0; 3], cloud, &mut tree);
    let mut addr = 0;
    for (li, leaf) in tree.leaves.iter_mut().enumerate() {
        leaf.base = addr;
        addr += leaf.bytes;
        for (k, &p) in leaf.points.iter().enumerate() {
            tree.point_leaf[p] = li;
            tree.point_local[p] = k as u32;
        }
    }
    Ok(tree)
}

fn build_node(q: &[[u32; 3]], points: Vec<usize>, depth: u32, max_depth: u32, capacity: u64, merge: bool) -> Node {
    if depth == max_depth || (merge && points.is_empty()) {
        return Node::Leaf(points);
    }
    let bit = MAX_OCTREE_DEPTH - depth - 1;
    let mut parts: [Vec<usize>; 8] = Default::default();
    for p in points {
        let c = q[p];
        let k = ((c[0] >> bit) & 1) | (((c[1] >> bit) & 1) << 1) | (((c[2] >> bit) & 1) << 2);
        parts[k as usize].push(p);
    }
    let children: [Node; 8] = parts.map(|part| build_node(q, part, depth + 1, max_depth, capacity, merge));
    if merge {
        let mut total = 0;
        let all_leaves = children.iter().all(|c| match c {
            Node::Leaf(p) => {
                total += p.len();
                true
            }
            Node::Inner(_) => false,
        });
        if all_leaves && point_bytes(total) <= capacity {
            let mut merged: Vec<usize> = children
                .into_iter()
                .flat_map(|c| match c {
                    Node::Leaf(p) => p,
                    Node::Inner(_) => unreachable!(),
                })
                .collect();
            merged.sort_unstable();
            return Node::Leaf(merged);
        }
    }
    Node::Inner(Box::new(children))
}

fn collect_leaves(node: &Node, depth: u32, coord: [u32; 3], cloud: &GaussianCloud, tree: &mut MergedOctree) {
    match node {
        Node::Leaf(points) => {
            let n = (1u32 << depth) as f64;
            let ext = tree.bounds.extent();
            let lo = Vec3::new(coord[0] as f64, coord[1] as f64, coord[2] as f64);
            let min = tree.bounds.min + lo.component_div(&Vec3::repeat(n)).component_mul(&ext);
            let max = tree.bounds.min + (lo + Vec3::repeat(1.0)).component_div(&Vec3::repeat(n)).component_mul(&ext);
            tree.leaves.push(OctreeLeaf {
                depth,
                coord,
                bounds: Aabb::new(min, max),
                points: points.clone(),
                data: points.iter().map(|&p| cloud.points[p]).collect(),
                base: 0,
                bytes: point_bytes(points.len()),
            });
        }
        Node::Inner(children) => {
            for (k, child) in children.iter().enumerate() {
                let c = [0, 1, 2].map(|a| coord[a] * 2 + ((k as u32 >> a) & 1));
                collect_leaves(child, depth + 1, c, cloud, tree);
            }
        }
    }
}
