//! Shared fixtures for the benchmarks.

use transl2e::simulate::{simulate, SimConfig, SimData};

/// A contaminated target with `k` sources at the default shift and contamination levels.
pub fn problem(n0: usize, nk: usize, p: usize, k: usize) -> SimData {
    let cfg = SimConfig { n0, nk, p, k, shift_support: p.min(30), sparse_support: p.min(10), ..SimConfig::default() };
    simulate(&cfg, 1).expect("valid benchmark config")
}
