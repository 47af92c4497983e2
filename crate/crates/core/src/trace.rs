//! Memory access traces.
//!
//! DRAM accesses are split into 64-byte bursts. A burst is streaming when it
//! continues the previous DRAM burst: same request tag and the next
//! address. Everything else starts a new run and is random.

use std::io;
use std::path::Path;

pub const BURST_BYTES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemKind {
    DramStream,
    DramRandom,
    SramRead,
    SramWrite,
}

impl MemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MemKind::DramStream => "dram_stream",
            MemKind::DramRandom => "dram_random",
            MemKind::SramRead => "sram_read",
            MemKind::SramWrite => "sram_write",
        }
    }

    pub fn is_dram(self) -> bool {
        matches!(self, MemKind::DramStream | MemKind::DramRandom)
    }
}

impl std::str::FromStr for MemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dram_stream" => Ok(MemKind::DramStream),
            "dram_random" => Ok(MemKind::DramRandom),
            "sram_read" => Ok(MemKind::SramRead),
            "sram_write" => Ok(MemKind::SramWrite),
            other => Err(format!("unknown access kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemEvent {
    pub seq: u64,
    pub kind: MemKind,
    pub address: u64,
    pub bytes: u64,
    /// Block id for streamed loads, a unique request id for isolated
    /// accesses, buffer id for SRAM.
    pub tag: u64,
}

/// Tags at and above this value are handed out for isolated requests.
pub const UNIQUE_TAG_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemTrace {
    pub events: Vec<MemEvent>,
    last_dram: Option<(u64, u64)>,
    next_unique: u64,
}

impl MemTrace {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, kind: MemKind, address: u64, bytes: u64, tag: u64) {
        let seq = self.events.len() as u64;
        self.events.push(MemEvent { seq, kind, address, bytes, tag });
    }

    /// Contiguous DRAM read issued as one request.
    pub fn dram_read(&mut self, address: u64, bytes: u64, tag: u64) {
        let mut addr = address;
        let end = address + bytes;
        while addr < end {
            let len = BURST_BYTES.min(end - addr);
            let kind = if self.last_dram == Some((addr, tag)) { MemKind::DramStream } else { MemKind::DramRandom };
            self.push(kind, addr, len, tag);
            addr += len;
            self.last_dram = Some((addr, tag));
        }
    }

    /// DRAM read issued as its own request, e.g. a pixel-centric gather.
    pub fn dram_read_isolated(&mut self, address: u64, bytes: u64) {
        let tag = UNIQUE_TAG_BASE + self.next_unique;
        self.next_unique += 1;
        self.dram_read(address, bytes, tag);
    }

    pub fn sram_read(&mut self, address: u64, bytes: u64, tag: u64) {
        self.push(MemKind::SramRead, address, bytes, tag);
    }

    pub fn sram_write(&mut self, address: u64, bytes: u64, tag: u64) {
        self.push(MemKind::SramWrite, address, bytes, tag);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn bytes_of(&self, kind: MemKind) -> u64 {
        self.events.iter().filter(|e| e.kind == kind).map(|e| e.bytes).sum()
    }

    pub fn count_of(&self, kind: MemKind) -> u64 {
        self.events.iter().filter(|e| e.kind == kind).count() as u64
    }

    /// Fraction of DRAM bytes that are streaming; 1 when there is no DRAM traffic.
    pub fn streaming_fraction(&self) -> f64 {
        let s = self.bytes_of(MemKind::DramStream) as f64;
        let r = self.bytes_of(MemKind::DramRandom) as f64;
        if s + r == 0.0 {
            1.0
        } else {
            s / (s + r)
        }
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seq", "kind", "address", "bytes", "tag"])?;
        for e in &self.events {
            w.write_record([e.seq.to_string(), e.kind.as_str().to_string(), e.address.to_string(), e.bytes.to_string(), e.tag.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> csv::Result<()> {
        self.write_csv(io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<MemEvent>, String> {
        let mut r = csv::Reader::from_reader(input);
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let num = |i: usize| rec.get(i).ok_or("short record")?.parse::<u64>().map_err(|e| e.to_string());
            out.push(MemEvent {
                seq: num(0)?,
                kind: rec.get(1).ok_or("short record")?.parse()?,
                address: num(2)?,
                bytes: num(3)?,
                tag: num(4)?,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_read_has_one_random_head() {
        let mut t = MemTrace::new();
        t.dram_read(1024, 300, 7);
        let kinds: Vec<_> = t.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds.len(), 5);
        assert_eq!(kinds[0], MemKind::DramRandom);
        assert!(kinds[1..].iter().all(|&k| k == MemKind::DramStream));
        assert_eq!(t.events[4].bytes, 44);
        assert_eq!(t.bytes_of(MemKind::DramRandom) + t.bytes_of(MemKind::DramStream), 300);
    }

    #[test]
    fn isolated_requests_are_all_random() {
        let mut t = MemTrace::new();
        t.dram_read_isolated(0, 64);
        t.dram_read_isolated(64, 64);
        assert_eq!(t.count_of(MemKind::DramRandom), 2);
        // a new block right after another one still opens a new run
        t.dram_read(128, 64, 1);
        t.dram_read(192, 64, 2);
        assert_eq!(t.count_of(MemKind::DramStream), 0);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = MemTrace::new();
        t.dram_read(0, 130, 3);
        t.sram_read(8, 64, 3);
        t.sram_write(0, 16, 0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seq,kind,address,bytes,tag\n0,dram_random,0,64,3\n1,dram_stream,64,64,3\n"));
        assert_eq!(MemTrace::read_csv(&buf[..]).unwrap(), t.events);
    }
}
