//! Benchmark-only crate; see `benches/dsa_benches.rs`.

use dsa_core::{ProtocolParams, RingParams};

/// Nontrivial parameters for benchmark setup.
pub fn bench_params(users: u16, collusion: u16, modulus: u64, len: u32) -> ProtocolParams {
    let ring = RingParams::new(modulus, len).expect("benchmark ring parameters");
    ProtocolParams::new(users, collusion, ring).expect("benchmark protocol parameters")
}
