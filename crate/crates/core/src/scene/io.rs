//! `.scene` binary format, little-endian throughout.
//!
//! ```text
//! magic    8 bytes  "NSSCENE\0"
//! version  u32      1
//! kind     u32      0 = structured, 1 = unstructured
//! structured:
//!   channels u32, hidden u32, levels u32
//!   per level: nx ny nz u32, cell_size f64, origin 3 x f64
//!   mlp: w1[hidden*channels] b1[hidden] w2[3*hidden] b2[3] w_sigma[channels] b_sigma  (f32)
//!   per level: features[nx*ny*nz*channels] f32, vertex-major
//! unstructured:
//!   count u64
//!   per point: px py pz scale opacity r g b  (f32)
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{GaussianCloud, GaussianPoint, GridLevel, Mlp, SceneRep, VoxelGrid};
use crate::geom::Vec3;

const MAGIC: &[u8; 8] = b"NSSCENE\0";
const VERSION: u32 = 1;
/// Guards allocations driven by header fields.
const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: needed {needed} more bytes at offset {offset}")]
    TruncatedPayload { offset: usize, needed: usize },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_scene<W: Write>(scene: &SceneRep, mut out: W) -> io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    match scene {
        SceneRep::Structured(g) => {
            put_u32(&mut buf, 0);
            put_u32(&mut buf, g.channels as u32);
            put_u32(&mut buf, g.mlp.hidden as u32);
            put_u32(&mut buf, g.levels.len() as u32);
            for l in &g.levels {
                for d in l.dims {
                    put_u32(&mut buf, d as u32);
                }
                buf.extend_from_slice(&l.cell_size.to_le_bytes());
                for i in 0..3 {
                    buf.extend_from_slice(&l.origin[i].to_le_bytes());
                }
            }
            let m = &g.mlp;
            put_f32s(&mut buf, &m.w1);
            put_f32s(&mut buf, &m.b1);
            put_f32s(&mut buf, &m.w2);
            put_f32s(&mut buf, &m.b2);
            put_f32s(&mut buf, &m.w_sigma);
            put_f32s(&mut buf, &[m.b_sigma]);
            for l in &g.levels {
                put_f32s(&mut buf, &l.features);
            }
        }
        SceneRep::Unstructured(c) => {
            put_u32(&mut buf, 1);
            buf.extend_from_slice(&(c.points.len() as u64).to_le_bytes());
            for p in &c.points {
                put_f32s(&mut buf, &p.position);
                put_f32s(&mut buf, &[p.scale, p.opacity]);
                put_f32s(&mut buf, &p.color);
            }
        }
    }
    out.write_all(&buf)
}

pub fn read_scene<R: Read>(mut input: R) -> Result<SceneRep, SceneIoError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut r = Cursor { bytes: &bytes, pos: 0 };

    let magic = r.take(8).map_err(|_| SceneIoError::MalformedHeader("file shorter than magic".into()))?;
    if magic != MAGIC {
        return Err(SceneIoError::MalformedHeader("bad magic".into()));
    }
    let version = r.u32().map_err(header_eof)?;
    if version != VERSION {
        return Err(SceneIoError::MalformedHeader(format!("unsupported version {version}")));
    }
    let scene = match r.u32().map_err(header_eof)? {
        0 => {
            let channels = r.u32().map_err(header_eof)? as usize;
            let hidden = r.u32().map_err(header_eof)? as usize;
            let nlevels = r.u32().map_err(header_eof)? as usize;
            if nlevels == 0 || nlevels > 64 {
                return Err(SceneIoError::MalformedHeader(format!("implausible level count {nlevels}")));
            }
            let mut levels = Vec::with_capacity(nlevels);
            for _ in 0..nlevels {
                let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
                let cell_size = r.f64()?;
                let origin = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
                levels.push(GridLevel { dims, cell_size, origin, features: Vec::new() });
            }
            let mut mlp = Mlp::zeros(channels, hidden);
            mlp.w1 = r.f32s(hidden as u64 * channels as u64)?;
            mlp.b1 = r.f32s(hidden as u64)?;
            mlp.w2 = r.f32s(3 * hidden as u64)?;
            let b2 = r.f32s(3)?;
            mlp.b2 = [b2[0], b2[1], b2[2]];
            mlp.w_sigma = r.f32s(channels as u64)?;
            mlp.b_sigma = r.f32s(1)?[0];
            for l in &mut levels {
                let count = l.dims.iter().map(|&d| d as u64).product::<u64>() * channels as u64;
                l.features = r.f32s(count)?;
            }
            SceneRep::Structured(VoxelGrid { channels, levels, mlp })
        }
        1 => {
            let count = r.u64().map_err(header_eof)?;
            if count > MAX_ELEMENTS {
                return Err(SceneIoError::MalformedHeader(format!("implausible point count {count}")));
            }
            let raw = r.f32s(count * 8)?;
            let points = raw
                .chunks_exact(8)
                .map(|v| GaussianPoint {
                    position: [v[0], v[1], v[2]],
                    scale: v[3],
                    opacity: v[4],
                    color: [v[5], v[6], v[7]],
                })
                .collect();
            SceneRep::Unstructured(GaussianCloud { points })
        }
        k => return Err(SceneIoError::MalformedHeader(format!("unknown scene kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(SceneIoError::MalformedHeader(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    scene.validate().map_err(SceneIoError::InvariantViolation)?;
    Ok(scene)
}

pub fn save_scene(scene: &SceneRep, path: impl AsRef<Path>) -> Result<(), SceneIoError> {
    let file = std::fs::File::create(path)?;
    write_scene(scene, io::BufWriter::new(file))?;
    Ok(())
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneRep, SceneIoError> {
    read_scene(io::BufReader::new(std::fs::File::open(path)?))
}

fn header_eof(e: SceneIoError) -> SceneIoError {
    match e {
        SceneIoError::TruncatedPayload { .. } => SceneIoError::MalformedHeader("header ends early".into()),
        other => other,
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(buf: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SceneIoError> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(SceneIoError::TruncatedPayload { offset: self.pos, needed: n - remaining });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, SceneIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SceneIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SceneIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: u64) -> Result<Vec<f32>, SceneIoError> {
        if count > MAX_ELEMENTS {
            return Err(SceneIoError::MalformedHeader(format!("implausible element count {count}")));
        }
        let raw = self.take(count as usize * 4)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
