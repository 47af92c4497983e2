/// Cycles for an `m x k` by `k x n` product on an `a x a` weight-stationary
/// array: one pass per output tile, each paying `k` plus fill and drain.
pub fn simulate_systolic(m: usize, k: usize, n: usize, a: usize) -> u64 {
    assert!(m >= 1 && k >= 1 && n >= 1 && a >= 1, "dimensions must be positive");
    (m.div_ceil(a) * n.div_ceil(a) * (k + 2 * a - 1)) as u64
}
