//! Decentralized secure aggregation over fully connected broadcast networks.
//!
//! K users each hold a private vector over (Z_q)^L and want every user to
//! learn the sum of all K vectors — and nothing else, even when any user
//! pools its view with up to T others. A trusted dealer hands out one-time
//! additive masks with a zero-sum structure; each user broadcasts its masked
//! input once; summing all broadcasts with one's own input and mask cancels
//! every mask and leaves the plaintext sum.
//!
//! The crate provides:
//!
//! - [`algebra`]: exact modular vector arithmetic and seedable randomness;
//! - [`keying`]: dealer key generation and the zero-sum mask derivation;
//! - [`protocol`]: the per-user state machine and its wire format;
//! - [`netsim`]: a deterministic broadcast-network simulator with replayable
//!   transcripts;
//! - [`oracle`]: exact entropy and mutual-information measurement by
//!   exhaustive world enumeration;
//! - [`verifier`]: executable checks that the implemented scheme decodes
//!   correctly, leaks nothing, and sits exactly on the optimal rate corner
//!   (R_X, R_Z, R_ZSigma) = (1, 1, K-1).
//!
//! Security claims are decided by exact integer counting, not by
//! thresholding floats; see [`oracle::JointDistribution::conditional_mi_is_zero`].

pub mod algebra;
pub mod keying;
pub mod netsim;
pub mod oracle;
pub mod protocol;
pub mod scheme;
pub mod verifier;

pub use algebra::{
    sample_uniform, sum_all, AlgebraError, RandomSource, RingParams, RingVector, SeededRng,
    SystemRng,
};
pub use keying::{
    derive_keys, export_key_records, gen_source_key, key_record_len, key_zero_sum_check,
    parse_key_records,
    IndividualKey, KeyError, ParamsError, ProtocolParams, SourceKey, UserId,
};
pub use netsim::{
    replay, run_simulation, run_with_faults, DeliveryOrder, EventKind, FaultPlan, InputMode,
    SimConfig, SimError, SimEvent, Simulator, Transcript,
};
pub use oracle::{
    JointDistribution, OracleError, VariableSpec, WorldSpace, DEFAULT_WORLD_BUDGET,
};
pub use protocol::{AggregateResult, Message, Phase, ProtocolError, UserState, WireError};
pub use scheme::{AggregationScheme, OptimalScheme};
pub use verifier::{
    check_corollary1, check_lemma1, check_lemma2, check_lemma3, check_lemma4, check_rate_region,
    check_recovery, check_security, check_source_key_entropy, measure_rates, measure_scheme_rates,
    reject_trivial_regime, render_machine, render_summary, run_checks, CheckInstance, CheckKind,
    CheckReport, CollusionSet, RateTriple, VerifierError, ENTROPY_TOLERANCE_BITS,
};
