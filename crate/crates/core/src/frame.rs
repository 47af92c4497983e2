//! Rendered frames: color, z-depth and a per-pixel validity mask.

use std::io::{self, Write};
use std::path::Path;

/// Depth marker for pixels that see no geometry.
pub const INFINITE_DEPTH: f32 = f32::INFINITY;

/// Row-major `width x height` frame. Depth is camera-space `z` (not the
/// distance along the ray), which is what depth warping consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[f32; 3]>,
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
}

impl Frame {
    /// All pixels invalid, black and at infinite depth.
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            color: vec![[0.0; 3]; n],
            depth: vec![INFINITE_DEPTH; n],
            valid: vec![false; n],
        }
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_infinite(&self, i: usize) -> bool {
        self.depth[i] == INFINITE_DEPTH
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Binary PPM (P6), colors clamped to `[0, 1]` and quantized to 8 bits.
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut bytes = Vec::with_capacity(self.len() * 3);
        for c in &self.color {
            for &ch in c {
                bytes.push((ch.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out.write_all(&bytes)
    }

    /// Flat little-endian `f32` depth values, row-major.
    pub fn write_depth<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut bytes = Vec::with_capacity(self.len() * 4);
        for d in &self.depth {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        out.write_all(&bytes)
    }

    pub fn read_depth(bytes: &[u8], width: usize, height: usize) -> io::Result<Vec<f32>> {
        if bytes.len() != width * height * 4 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("depth sidecar has {} bytes, expected {}", bytes.len(), width * height * 4),
            ));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    /// Writes `<stem>.ppm` and `<stem>.depth`.
    pub fn save(&self, dir: &Path, stem: &str) -> io::Result<()> {
        self.write_ppm(io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.ppm")))?))?;
        self.write_depth(io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.depth")))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_size() {
        let mut f = Frame::empty(3, 2);
        f.color[0] = [1.0, 0.5, 0.0];
        let mut buf = Vec::new();
        f.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(buf.len(), 11 + 18);
        assert_eq!(&buf[11..14], &[255, 128, 0]);
    }

    #[test]
    fn depth_sidecar_round_trip() {
        let mut f = Frame::empty(2, 2);
        f.depth[1] = 2.5;
        let mut buf = Vec::new();
        f.write_depth(&mut buf).unwrap();
        let back = Frame::read_depth(&buf, 2, 2).unwrap();
        assert_eq!(back, f.depth);
        assert!(Frame::read_depth(&buf[..12], 2, 2).is_err());
    }
}
