//! Trusted-dealer key material.
//!
//! The dealer draws K-1 independent uniform noise vectors N_1..N_{K-1} (the
//! source key) and derives one mask per user: user k < K keeps N_k, the last
//! user gets the negated sum of all noise. The masks therefore sum to zero,
//! which is what lets them cancel out of the aggregate, while any K-1 of
//! them remain jointly uniform. Key distribution itself is modeled as an
//! offline phase: derivation is a pure in-process function.

use std::fmt;

use thiserror::Error;

use crate::algebra::{sample_uniform, sum_all, AlgebraError, RandomSource, RingParams, RingVector};

/// 1-based user index; wire encodings carry it as two little-endian bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(u16);

impl UserId {
    pub fn new(id: u16) -> Self {
        UserId(id)
    }

    pub fn get(&self) -> u16 {
        self.0
    }

    /// 0-based position for slice indexing.
    pub fn index(&self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    /// K = 2 (or fewer) users, or T >= K-2 colluders: every user could
    /// reconstruct the one remaining input from the sum, so there is
    /// nothing left to protect. Such configurations are refused outright.
    #[error(
        "trivial regime: {users} users with collusion threshold {collusion} \
         admits no meaningful security (need K >= 3 and T <= K-3); \
         recovering the sum would force full disclosure of the remaining input"
    )]
    TrivialRegime { users: u16, collusion: u16 },
    #[error(transparent)]
    Ring(#[from] AlgebraError),
}

/// Validated protocol configuration: K users, collusion threshold T, and the
/// carrier ring. Construction enforces the nontrivial regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    users: u16,
    collusion: u16,
    ring: RingParams,
}

impl ProtocolParams {
    pub fn new(users: u16, collusion: u16, ring: RingParams) -> Result<Self, ParamsError> {
        Self::check_regime(users, collusion)?;
        Ok(Self {
            users,
            collusion,
            ring,
        })
    }

    /// Accepts exactly K >= 3 with T <= K-3; everything else is trivial.
    pub fn check_regime(users: u16, collusion: u16) -> Result<(), ParamsError> {
        if users < 3 || collusion as i32 > users as i32 - 3 {
            return Err(ParamsError::TrivialRegime { users, collusion });
        }
        Ok(())
    }

    pub fn users(&self) -> u16 {
        self.users
    }

    pub fn collusion(&self) -> u16 {
        self.collusion
    }

    pub fn ring(&self) -> RingParams {
        self.ring
    }

    pub fn user_ids(&self) -> impl Iterator<Item = UserId> {
        (1..=self.users).map(UserId::new)
    }

    pub fn contains(&self, user: UserId) -> bool {
        user.get() >= 1 && user.get() <= self.users
    }
}

impl fmt::Display for ProtocolParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K={} T={} {}", self.users, self.collusion, self.ring)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("expected {expected} noise vectors, got {got}")]
    NoiseCount { expected: usize, got: usize },
    #[error("expected {expected} individual keys, got {got}")]
    KeyCount { expected: usize, got: usize },
    #[error("key for user {user} uses {found}, expected {expected}")]
    RingMismatch {
        user: UserId,
        expected: RingParams,
        found: RingParams,
    },
    #[error("key record truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error(transparent)]
    Ring(#[from] AlgebraError),
}

/// The dealer's randomness pool: exactly K-1 uniform noise vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceKey {
    params: ProtocolParams,
    noise: Vec<RingVector>,
}

impl SourceKey {
    pub fn new(params: ProtocolParams, noise: Vec<RingVector>) -> Result<Self, KeyError> {
        let expected = params.users() as usize - 1;
        if noise.len() != expected {
            return Err(KeyError::NoiseCount {
                expected,
                got: noise.len(),
            });
        }
        for (i, n) in noise.iter().enumerate() {
            if n.params() != params.ring() {
                return Err(KeyError::RingMismatch {
                    user: UserId::new(i as u16 + 1),
                    expected: params.ring(),
                    found: n.params(),
                });
            }
        }
        Ok(Self { params, noise })
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn noise(&self) -> &[RingVector] {
        &self.noise
    }

    /// Total independent key bits held by the system: (K-1) * L * log2(q).
    pub fn bit_size(&self) -> f64 {
        self.noise.len() as f64 * self.params.ring().bits_per_vector()
    }
}

/// One user's mask Z_k together with its owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndividualKey {
    owner: UserId,
    mask: RingVector,
}

impl IndividualKey {
    pub fn new(owner: UserId, mask: RingVector) -> Self {
        Self { owner, mask }
    }

    pub fn owner(&self) -> UserId {
        self.owner
    }

    pub fn mask(&self) -> &RingVector {
        &self.mask
    }

    /// Per-user key bits: L * log2(q).
    pub fn bit_size(&self) -> f64 {
        self.mask.params().bits_per_vector()
    }
}

/// Draws the K-1 noise vectors i.i.d. uniform. Deterministic given the
/// generator state, so exhaustive verification can substitute enumeration.
pub fn gen_source_key(params: ProtocolParams, rng: &mut dyn RandomSource) -> SourceKey {
    let noise = (0..params.users() - 1)
        .map(|_| sample_uniform(params.ring(), rng))
        .collect();
    SourceKey { params, noise }
}

/// Pure derivation of the K individual keys from the source key:
/// Z_k = N_k for k < K and Z_K = -(N_1 + ... + N_{K-1}).
pub fn derive_keys(src: &SourceKey) -> Vec<IndividualKey> {
    let mut keys: Vec<IndividualKey> = src
        .noise
        .iter()
        .enumerate()
        .map(|(i, n)| IndividualKey::new(UserId::new(i as u16 + 1), n.clone()))
        .collect();
    let last = sum_all(src.noise.iter())
        .expect("source key holds at least two noise vectors")
        .neg();
    keys.push(IndividualKey::new(UserId::new(src.params.users()), last));
    keys
}

/// True iff the masks sum to the zero vector. Derived keys satisfy this by
/// construction; arbitrary key sets may not.
pub fn key_zero_sum_check(keys: &[IndividualKey]) -> Result<bool, KeyError> {
    if keys.is_empty() {
        return Err(KeyError::KeyCount {
            expected: 1,
            got: 0,
        });
    }
    let ring = keys[0].mask.params();
    for k in keys {
        if k.mask.params() != ring {
            return Err(KeyError::RingMismatch {
                user: k.owner,
                expected: ring,
                found: k.mask.params(),
            });
        }
    }
    let total = sum_all(keys.iter().map(|k| k.mask()))?;
    Ok(total.is_zero())
}

/// Byte length of one exported key record for the given ring.
pub fn key_record_len(ring: RingParams) -> usize {
    8 + 2 + 4 + 8 + 8 * ring.len()
}

/// Serializes keys for offline distribution, one record per user:
/// epoch (8 LE) | owner (2 LE) | len (4 LE) | modulus (8 LE) | symbols (8 LE each).
pub fn export_key_records(epoch: u64, keys: &[IndividualKey]) -> Vec<u8> {
    let mut out = Vec::new();
    for key in keys {
        let ring = key.mask.params();
        out.extend_from_slice(&epoch.to_le_bytes());
        out.extend_from_slice(&key.owner.get().to_le_bytes());
        out.extend_from_slice(&ring.len_u32().to_le_bytes());
        out.extend_from_slice(&ring.modulus().to_le_bytes());
        for &c in key.mask.coords() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

/// Parses a key file back into (epoch, key) records, validating every field.
pub fn parse_key_records(bytes: &[u8]) -> Result<Vec<(u64, IndividualKey)>, KeyError> {
    let mut records = Vec::new();
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8], KeyError> {
        if *at + n > bytes.len() {
            return Err(KeyError::Truncated { offset: *at });
        }
        let slice = &bytes[*at..*at + n];
        *at += n;
        Ok(slice)
    };
    while at < bytes.len() {
        let epoch = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let owner = u16::from_le_bytes(take(&mut at, 2)?.try_into().unwrap());
        let len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap());
        let modulus = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let ring = RingParams::new(modulus, len)?;
        let mut coords = Vec::with_capacity(ring.len());
        for _ in 0..ring.len() {
            coords.push(u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
        }
        let mask = RingVector::new(ring, coords)?;
        records.push((epoch, IndividualKey::new(UserId::new(owner), mask)));
    }
    Ok(records)
}
