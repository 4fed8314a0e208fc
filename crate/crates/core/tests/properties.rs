//! Property tests for the structural invariants: group laws on the carrier,
//! zero-sum key derivation, end-to-end recovery, and format round trips.

use dsa_core::*;
use proptest::collection::vec;
use proptest::prelude::*;

fn ring_strategy() -> impl Strategy<Value = RingParams> {
    let modulus = prop_oneof![
        2u64..=16,
        Just(257u64),
        Just(65536u64),
        Just(1u64 << 32),
    ];
    (modulus, 1u32..=6).prop_map(|(q, l)| RingParams::new(q, l).unwrap())
}

fn vector_strategy(params: RingParams) -> impl Strategy<Value = RingVector> {
    vec(0..params.modulus(), params.len())
        .prop_map(move |coords| RingVector::new(params, coords).unwrap())
}

fn triple_strategy() -> impl Strategy<Value = (RingVector, RingVector, RingVector)> {
    ring_strategy().prop_flat_map(|p| {
        (vector_strategy(p), vector_strategy(p), vector_strategy(p))
    })
}

proptest! {
    #[test]
    fn addition_is_a_commutative_group((a, b, c) in triple_strategy()) {
        let ab_c = a.add(&b).unwrap().add(&c).unwrap();
        let a_bc = a.add(&b.add(&c).unwrap()).unwrap();
        prop_assert_eq!(&ab_c, &a_bc);

        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());

        let zero = RingVector::zero(a.params());
        prop_assert_eq!(&a.add(&zero).unwrap(), &a);
        prop_assert!(a.add(&a.neg()).unwrap().is_zero());
    }

    #[test]
    fn sum_all_is_permutation_invariant(
        (a, b, c) in triple_strategy(),
        swap_first in any::<bool>(),
    ) {
        let forward = sum_all([&a, &b, &c]).unwrap();
        let shuffled = if swap_first {
            sum_all([&c, &a, &b]).unwrap()
        } else {
            sum_all([&b, &c, &a]).unwrap()
        };
        prop_assert_eq!(forward, shuffled);
    }

    #[test]
    fn equal_seeds_sample_equal_vectors(seed in any::<u64>(), p in ring_strategy()) {
        let a = sample_uniform(p, &mut SeededRng::from_seed(seed));
        let b = sample_uniform(p, &mut SeededRng::from_seed(seed));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn derived_keys_always_cancel(
        users in 3u16..=7,
        seed in any::<u64>(),
        p in ring_strategy(),
    ) {
        let params = ProtocolParams::new(users, 0, p).unwrap();
        let src = gen_source_key(params, &mut SeededRng::from_seed(seed));
        let keys = derive_keys(&src);
        prop_assert_eq!(keys.len(), users as usize);
        prop_assert!(key_zero_sum_check(&keys).unwrap());
        // Derivation is pure: same source key, same masks.
        prop_assert_eq!(derive_keys(&src), keys);
    }

    #[test]
    fn simulation_recovers_the_plaintext_sum(
        users in 3u16..=6,
        seed in any::<u64>(),
        p in ring_strategy(),
        shuffle in any::<bool>(),
    ) {
        let params = ProtocolParams::new(users, 0, p).unwrap();
        let order = if shuffle { DeliveryOrder::SeededShuffle } else { DeliveryOrder::RoundRobin };
        let config = SimConfig::new(params, seed, InputMode::Random, order).unwrap();
        let transcript = run_simulation(&config).unwrap();

        let inputs: Vec<RingVector> = transcript
            .events_of(EventKind::Input)
            .map(|e| e.payload.clone())
            .collect();
        let expected = sum_all(inputs.iter()).unwrap();
        prop_assert_eq!(transcript.agreed_result(), Some(&expected));
    }

    #[test]
    fn wire_encoding_round_trips(
        sender in 1u16..=100,
        epoch in any::<u64>(),
        p in ring_strategy(),
        seed in any::<u64>(),
    ) {
        let payload = sample_uniform(p, &mut SeededRng::from_seed(seed));
        let message = Message::new(UserId::new(sender), epoch, payload);
        prop_assert_eq!(Message::decode(&message.encode()).unwrap(), message);
    }

    #[test]
    fn transcript_text_round_trips_and_replays(
        users in 3u16..=5,
        seed in any::<u64>(),
        shuffle in any::<bool>(),
    ) {
        let params = ProtocolParams::new(users, 0, RingParams::new(5, 2).unwrap()).unwrap();
        let order = if shuffle { DeliveryOrder::SeededShuffle } else { DeliveryOrder::RoundRobin };
        let config = SimConfig::new(params, seed, InputMode::Random, order).unwrap();
        let transcript = run_simulation(&config).unwrap();
        let parsed = Transcript::from_text(&transcript.to_text()).unwrap();
        prop_assert_eq!(&parsed, &transcript);
        prop_assert!(replay(&parsed).unwrap());
    }

    #[test]
    fn key_records_round_trip(
        users in 3u16..=6,
        epoch in any::<u64>(),
        seed in any::<u64>(),
        p in ring_strategy(),
    ) {
        let params = ProtocolParams::new(users, 0, p).unwrap();
        let keys = derive_keys(&gen_source_key(params, &mut SeededRng::from_seed(seed)));
        let parsed = parse_key_records(&export_key_records(epoch, &keys)).unwrap();
        prop_assert_eq!(parsed.len(), keys.len());
        for ((e, key), original) in parsed.into_iter().zip(keys) {
            prop_assert_eq!(e, epoch);
            prop_assert_eq!(key, original);
        }
    }
}
