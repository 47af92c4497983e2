use nerfstream_core::streaming::{BlockLoad, CapacityError};

use crate::config::HwConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatherKind {
    /// Eight vertex reads and a trilinear reduction per item.
    Structured,
    /// One point record per item, interpolation bypassed.
    Unstructured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuBlock {
    pub bytes: u64,
    pub items: u64,
}

impl From<&BlockLoad> for GuBlock {
    fn from(l: &BlockLoad) -> Self {
        Self { bytes: l.bytes, items: l.items as u64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GuTiming {
    pub cycles: u64,
    pub load_cycles: u64,
    pub gather_cycles: u64,
    /// Stages where the DRAM load dominated.
    pub load_bound_stages: u64,
}

pub fn gather_cycles(items: u64, kind: GatherKind, ports: usize) -> u64 {
    let per = match kind {
        GatherKind::Structured => 8,
        GatherKind::Unstructured => 1,
    };
    items.div_ceil(ports as u64) * per
}

pub fn load_cycles(bytes: u64, cfg: &HwConfig) -> u64 {
    bytes.div_ceil(cfg.dram_bytes_per_cycle)
}

/// The feature table is double buffered, so each block costs the larger of
/// its load and its gather; the pipeline fill is paid once.
pub fn simulate_gu(blocks: &[GuBlock], kind: GatherKind, cfg: &HwConfig) -> Result<GuTiming, CapacityError> {
    let mut t = GuTiming::default();
    for b in blocks {
        if b.bytes > cfg.mft_bytes {
            return Err(CapacityError::BlockTooLarge { capacity: cfg.mft_bytes, needed: b.bytes });
        }
        let load = load_cycles(b.bytes, cfg);
        let gather = gather_cycles(b.items, kind, cfg.ports);
        t.load_cycles += load;
        t.gather_cycles += gather;
        if load > gather {
            t.load_bound_stages += 1;
        }
        t.cycles += load.max(gather);
    }
    if !blocks.is_empty() {
        t.cycles += cfg.gu_fill_cycles;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gather_counts() {
        assert_eq!(gather_cycles(16, GatherKind::Structured, 2), 64);
        assert_eq!(gather_cycles(1536, GatherKind::Unstructured, 2), 768);
    }

    #[test]
    fn load_bound_stage() {
        let cfg = HwConfig::default();
        let t = simulate_gu(&[GuBlock { bytes: 32 * 1024, items: 16 }], GatherKind::Structured, &cfg).unwrap();
        assert_eq!(t.cycles - cfg.gu_fill_cycles, 512);
        assert_eq!(t.load_bound_stages, 1);
    }

    #[test]
    fn oversized_block() {
        let cfg = HwConfig::default();
        assert!(simulate_gu(&[GuBlock { bytes: cfg.mft_bytes + 1, items: 1 }], GatherKind::Unstructured, &cfg).is_err());
    }
}
