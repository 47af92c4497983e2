/// Energy per fixed-size (one burst) access, in abstract units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTable {
    pub dram_stream: f64,
    pub dram_random: f64,
    pub sram: f64,
}

impl Default for EnergyTable {
    fn default() -> Self {
        Self { dram_stream: 1.0, dram_random: 3.0, sram: 0.12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwConfig {
    /// Edge of the square MAC array.
    pub mac_dim: usize,
    pub global_buffer_bytes: u64,
    pub global_buffer_granularity: u64,
    pub weight_buffer_bytes: u64,
    /// Size of each of the two RIT buffers.
    pub rit_buffer_bytes: u64,
    /// Size of each of the two feature-table buffers; bounds one MVoxel.
    pub mft_bytes: u64,
    pub banks: usize,
    pub ports: usize,
    /// Concurrent ray queries issued to the scratchpad per cycle.
    pub lanes: usize,
    pub burst_bytes: u64,
    pub dram_bytes_per_cycle: u64,
    /// Latency charged per random DRAM burst on the baseline path.
    pub random_burst_cycles: u64,
    pub gu_fill_cycles: u64,
    pub exp_iterations: usize,
    pub energy: EnergyTable,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            mac_dim: 24,
            global_buffer_bytes: 1536 * 1024,
            global_buffer_granularity: 32 * 1024,
            weight_buffer_bytes: 96 * 1024,
            rit_buffer_bytes: 6 * 1024,
            mft_bytes: 32 * 1024,
            banks: 32,
            ports: 2,
            lanes: 32,
            burst_bytes: 64,
            dram_bytes_per_cycle: 64,
            random_burst_cycles: 4,
            gu_fill_cycles: 4,
            exp_iterations: 24,
            energy: EnergyTable::default(),
        }
    }
}

impl HwConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.banks == 0 || self.ports == 0 || self.lanes == 0 || self.mac_dim == 0 {
            return Err("banks, ports, lanes and mac_dim must be at least 1".into());
        }
        let sizes = [
            self.global_buffer_bytes,
            self.global_buffer_granularity,
            self.weight_buffer_bytes,
            self.rit_buffer_bytes,
            self.mft_bytes,
            self.burst_bytes,
            self.dram_bytes_per_cycle,
        ];
        if sizes.iter().any(|&s| s == 0) {
            return Err("buffer sizes, burst size and bandwidth must be positive".into());
        }
        let e = &self.energy;
        if !(e.dram_stream >= 0.0 && e.dram_random >= 0.0 && e.sram >= 0.0) {
            return Err("energy costs must be non-negative".into());
        }
        Ok(())
    }
}
