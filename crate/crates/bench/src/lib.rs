//! Shared fixtures for the criterion benches.

use ccfrontier_core::{gen_mif, CapacityTrace, MifModel, RatioDist};

pub const T: f64 = 0.1;

/// `X ~ U(0.27, 2)`
pub fn uniform_law() -> RatioDist {
    RatioDist::uniform(0.27, 2.0).expect("valid law")
}

/// `X ~ e^{U(-1, 1)}`
pub fn log_uniform_law() -> RatioDist {
    RatioDist::log_uniform(-1.0, 1.0).expect("valid law")
}

pub fn mif_trace(rounds: usize, seed: u64) -> CapacityTrace {
    let m = MifModel { ratio: RatioDist::uniform(0.6, 1.5).expect("valid law") };
    gen_mif(&m, 1e6, rounds, T, seed).expect("valid trace")
}
