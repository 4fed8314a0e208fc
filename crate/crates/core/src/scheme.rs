//! Pluggable aggregation schemes.
//!
//! A scheme is the pair of deterministic maps the verifier audits: how the
//! individual masks derive from the dealer's noise pool, and how each user
//! turns (input, mask) into its broadcast. [`OptimalScheme`] delegates to
//! the production code paths in `keying` and `protocol`, so verifying it
//! verifies the code the simulator actually runs. The `controls` module
//! provides deliberately broken schemes the verifier must be able to fail.

use crate::algebra::{sum_all, RingVector};
use crate::keying::{derive_keys, ProtocolParams, SourceKey, UserId};

/// The deterministic maps of one aggregation scheme.
///
/// `derive_masks` must return exactly K masks given `noise_count` noise
/// vectors; `message` must be a pure function of (input, mask).
pub trait AggregationScheme: Sync {
    fn name(&self) -> &'static str;

    /// Number of independent uniform noise vectors the dealer draws.
    fn noise_count(&self, params: &ProtocolParams) -> usize;

    fn derive_masks(&self, params: &ProtocolParams, noise: &[RingVector]) -> Vec<RingVector>;

    fn message(
        &self,
        params: &ProtocolParams,
        user: UserId,
        input: &RingVector,
        mask: &RingVector,
    ) -> RingVector;
}

/// The rate-optimal construction: masks are the K-1 noise vectors plus their
/// negated sum, and every broadcast is input + mask.
pub struct OptimalScheme;

impl AggregationScheme for OptimalScheme {
    fn name(&self) -> &'static str {
        "optimal"
    }

    fn noise_count(&self, params: &ProtocolParams) -> usize {
        params.users() as usize - 1
    }

    fn derive_masks(&self, params: &ProtocolParams, noise: &[RingVector]) -> Vec<RingVector> {
        let src = SourceKey::new(*params, noise.to_vec())
            .expect("noise pool sized by noise_count");
        derive_keys(&src)
            .into_iter()
            .map(|k| k.mask().clone())
            .collect()
    }

    fn message(
        &self,
        _params: &ProtocolParams,
        _user: UserId,
        input: &RingVector,
        mask: &RingVector,
    ) -> RingVector {
        input.add(mask).expect("scheme inputs share one ring")
    }
}

/// Broken-by-construction schemes used as negative controls.
pub mod controls {
    use super::*;

    /// No masking at all: every user broadcasts its raw input. Recovery
    /// still works; every security check must fail.
    pub struct ZeroMaskScheme;

    impl AggregationScheme for ZeroMaskScheme {
        fn name(&self) -> &'static str {
            "zero-mask"
        }

        fn noise_count(&self, _params: &ProtocolParams) -> usize {
            0
        }

        fn derive_masks(&self, params: &ProtocolParams, _noise: &[RingVector]) -> Vec<RingVector> {
            vec![RingVector::zero(params.ring()); params.users() as usize]
        }

        fn message(
            &self,
            _params: &ProtocolParams,
            _user: UserId,
            input: &RingVector,
            mask: &RingVector,
        ) -> RingVector {
            input.add(mask).expect("scheme inputs share one ring")
        }
    }

    /// Underprovisioned dealer: only K-2 noise vectors, with the last two
    /// users both keyed from the final one. Masks still sum to zero, so
    /// recovery works, but the shared structure leaks and security checks
    /// must fail for some user.
    pub struct SharedNoiseScheme;

    impl AggregationScheme for SharedNoiseScheme {
        fn name(&self) -> &'static str {
            "shared-noise"
        }

        fn noise_count(&self, params: &ProtocolParams) -> usize {
            params.users() as usize - 2
        }

        fn derive_masks(&self, params: &ProtocolParams, noise: &[RingVector]) -> Vec<RingVector> {
            let k = params.users() as usize;
            let mut masks: Vec<RingVector> = noise.to_vec();
            masks.push(noise[k - 3].clone());
            let balance = sum_all(masks.iter()).expect("K-1 masks present").neg();
            masks.push(balance);
            masks
        }

        fn message(
            &self,
            _params: &ProtocolParams,
            _user: UserId,
            input: &RingVector,
            mask: &RingVector,
        ) -> RingVector {
            input.add(mask).expect("scheme inputs share one ring")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{sample_uniform, RingParams, SeededRng};

    fn params(k: u16, t: u16, q: u64, l: u32) -> ProtocolParams {
        ProtocolParams::new(k, t, RingParams::new(q, l).unwrap()).unwrap()
    }

    fn noise_for(scheme: &dyn AggregationScheme, p: &ProtocolParams, seed: u64) -> Vec<RingVector> {
        let mut rng = SeededRng::from_seed(seed);
        (0..scheme.noise_count(p))
            .map(|_| sample_uniform(p.ring(), &mut rng))
            .collect()
    }

    #[test]
    fn optimal_masks_match_key_derivation() {
        let p = params(4, 1, 5, 2);
        let noise = noise_for(&OptimalScheme, &p, 7);
        let masks = OptimalScheme.derive_masks(&p, &noise);
        assert_eq!(masks.len(), 4);
        assert!(sum_all(masks.iter()).unwrap().is_zero());
        assert_eq!(masks[0], noise[0]);
    }

    #[test]
    fn control_schemes_keep_zero_sum() {
        for (scheme, k) in [
            (&controls::ZeroMaskScheme as &dyn AggregationScheme, 4u16),
            (&controls::SharedNoiseScheme, 4),
            (&controls::SharedNoiseScheme, 3),
        ] {
            let p = params(k, 0, 3, 1);
            let noise = noise_for(scheme, &p, 11);
            let masks = scheme.derive_masks(&p, &noise);
            assert_eq!(masks.len(), k as usize, "{}", scheme.name());
            assert!(
                sum_all(masks.iter()).unwrap().is_zero(),
                "{} must preserve recovery",
                scheme.name()
            );
        }
    }

    #[test]
    fn shared_noise_duplicates_one_vector() {
        let p = params(5, 0, 7, 1);
        let noise = noise_for(&controls::SharedNoiseScheme, &p, 13);
        let masks = controls::SharedNoiseScheme.derive_masks(&p, &noise);
        assert_eq!(masks[2], masks[3]);
    }
}
