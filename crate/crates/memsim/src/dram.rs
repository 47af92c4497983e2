use nerfstream_core::trace::{MemEvent, MemKind};

use crate::config::EnergyTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DramSplit {
    pub streaming_bytes: u64,
    pub random_bytes: u64,
    pub streaming_accesses: u64,
    pub random_accesses: u64,
}

impl DramSplit {
    pub fn total_bytes(&self) -> u64 {
        self.streaming_bytes + self.random_bytes
    }
}

/// Re-derives the streaming/random split from raw DRAM events: an access
/// continues a run when it has the previous access's tag and starts where
/// that access ended. Events are split into accesses of `burst` bytes.
pub fn classify_dram(events: &[MemEvent], burst: u64) -> DramSplit {
    let mut out = DramSplit::default();
    let mut prev: Option<(u64, u64)> = None;
    for e in events.iter().filter(|e| e.kind.is_dram()) {
        let mut addr = e.address;
        let end = e.address + e.bytes;
        while addr < end {
            let len = burst.min(end - addr);
            if prev == Some((addr, e.tag)) {
                out.streaming_bytes += len;
                out.streaming_accesses += 1;
            } else {
                out.random_bytes += len;
                out.random_accesses += 1;
            }
            addr += len;
            prev = Some((addr, e.tag));
        }
    }
    out
}

/// Number of fixed-size SRAM accesses in a trace.
pub fn sram_accesses(events: &[MemEvent], burst: u64) -> u64 {
    events
        .iter()
        .filter(|e| matches!(e.kind, MemKind::SramRead | MemKind::SramWrite))
        .map(|e| e.bytes.div_ceil(burst).max(1))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub dram: f64,
    pub sram: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.dram + self.sram
    }
}

pub fn energy(split: &DramSplit, sram: u64, table: &EnergyTable) -> Energy {
    Energy {
        dram: split.streaming_accesses as f64 * table.dram_stream + split.random_accesses as f64 * table.dram_random,
        sram: sram as f64 * table.sram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(seq: u64, address: u64, tag: u64) -> MemEvent {
        MemEvent { seq, kind: MemKind::DramRandom, address, bytes: 64, tag }
    }

    #[test]
    fn contiguous_run_has_one_head() {
        let s = classify_dram(&[read(0, 0, 1), read(1, 64, 1), read(2, 128, 1)], 64);
        assert_eq!((s.random_accesses, s.streaming_accesses), (1, 2));
    }

    #[test]
    fn jumps_are_random() {
        let s = classify_dram(&[read(0, 0, 1), read(1, 4096, 1), read(2, 64, 1)], 64);
        assert_eq!((s.random_accesses, s.streaming_accesses), (3, 0));
    }

    #[test]
    fn energy_is_linear_in_counts() {
        let split = DramSplit { streaming_bytes: 640, random_bytes: 128, streaming_accesses: 10, random_accesses: 2 };
        let e = energy(&split, 100, &EnergyTable::default());
        assert_eq!(e.dram, 16.0);
        assert!((e.sram - 12.0).abs() < 1e-12);
    }
}
