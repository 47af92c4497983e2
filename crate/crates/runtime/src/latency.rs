use crate::task::TaskKind;

pub const PS_PER_SECOND: f64 = 1e12;

/// Duration and device energy of a task. Times are integer picoseconds,
/// energies nanojoules.
pub trait LatencyModel {
    fn latency_ps(&self, kind: TaskKind, rendered_pixels: usize) -> u64;
    fn energy_nj(&self, kind: TaskKind, rendered_pixels: usize) -> f64;
}

/// Full renders cost a constant; targets pay a base plus a per-pixel cost
/// for the pixels they render.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedLatency {
    pub full_ps: u64,
    pub target_base_ps: u64,
    pub target_per_pixel_ps: u64,
    pub full_nj: f64,
    pub target_base_nj: f64,
    pub target_per_pixel_nj: f64,
}

impl FixedLatency {
    pub fn uniform(full_ps: u64, target_ps: u64) -> Self {
        Self { full_ps, target_base_ps: target_ps, target_per_pixel_ps: 0, full_nj: 0.0, target_base_nj: 0.0, target_per_pixel_nj: 0.0 }
    }

    /// Latencies from cycle counts at `clock_hz`.
    pub fn from_cycles(full_cycles: u64, target_cycles: u64, clock_hz: f64) -> Self {
        let ps = |c: u64| (c as f64 * PS_PER_SECOND / clock_hz).round() as u64;
        Self::uniform(ps(full_cycles), ps(target_cycles))
    }
}

impl LatencyModel for FixedLatency {
    fn latency_ps(&self, kind: TaskKind, px: usize) -> u64 {
        match kind {
            TaskKind::Reference | TaskKind::FallbackFull => self.full_ps,
            TaskKind::Target => self.target_base_ps + self.target_per_pixel_ps * px as u64,
            TaskKind::Transfer => 0,
        }
    }

    fn energy_nj(&self, kind: TaskKind, px: usize) -> f64 {
        match kind {
            TaskKind::Reference | TaskKind::FallbackFull => self.full_nj,
            TaskKind::Target => self.target_base_nj + self.target_per_pixel_nj * px as f64,
            TaskKind::Transfer => 0.0,
        }
    }
}

/// Offload link and remote renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteConfig {
    pub bandwidth_bytes_per_s: f64,
    pub energy_nj_per_byte: f64,
    pub render_ps: u64,
    /// Bytes per transferred pixel.
    pub bytes_per_pixel: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self { bandwidth_bytes_per_s: 1e7, energy_nj_per_byte: 100.0, render_ps: 1_000_000_000, bytes_per_pixel: 3 }
    }
}

impl RemoteConfig {
    pub fn frame_bytes(&self, width: usize, height: usize) -> u64 {
        (width * height * self.bytes_per_pixel) as u64
    }

    /// Zero for unbounded bandwidth.
    pub fn transfer_ps(&self, bytes: u64) -> u64 {
        if self.bandwidth_bytes_per_s.is_infinite() {
            return 0;
        }
        (bytes as f64 * PS_PER_SECOND / self.bandwidth_bytes_per_s).round() as u64
    }

    pub fn transfer_nj(&self, bytes: u64) -> f64 {
        bytes as f64 * self.energy_nj_per_byte
    }
}
