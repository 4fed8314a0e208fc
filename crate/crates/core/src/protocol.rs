//! Per-user protocol state machine.
//!
//! A user masks its input with its individual key, broadcasts the result,
//! collects the K-1 peer broadcasts, and adds everything (plus its own input
//! and key) back together. The masks cancel by the zero-sum property,
//! leaving the plaintext sum of all inputs.
//!
//! Each state is strictly one-shot: Idle -> Sent -> Recovered. Broadcasting
//! twice in an epoch is refused, which is what enforces one-time use of the
//! pad at the user level.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebra::{sum_all, AlgebraError, RingParams, RingVector};
use crate::keying::{IndividualKey, ProtocolParams, UserId};

/// Leading bytes of every encoded message.
pub const WIRE_MAGIC: [u8; 4] = *b"DSA1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("user {user} already broadcast in epoch {epoch}; key reuse refused")]
    AlreadySent { user: UserId, epoch: u64 },
    #[error("user {user} has not broadcast yet")]
    NotSent { user: UserId },
    #[error("user {user} already recovered")]
    AlreadyRecovered { user: UserId },
    #[error("message from self ({user})")]
    SelfMessage { user: UserId },
    #[error("duplicate message from {sender}")]
    DuplicateSender { sender: UserId },
    #[error("stale message: epoch {got}, expected {expected}")]
    EpochMismatch { expected: u64, got: u64 },
    #[error("sender {sender} outside user range 1..={users}")]
    UnknownSender { sender: UserId, users: u16 },
    #[error("inbox holds {got} of {expected} peer messages")]
    NotReady { expected: usize, got: usize },
    #[error("key owner {owner} does not match user {user}")]
    KeyOwnerMismatch { user: UserId, owner: UserId },
    #[error("user id {user} outside range 1..={users}")]
    BadUserId { user: UserId, users: u16 },
    #[error(transparent)]
    Ring(#[from] AlgebraError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("message truncated at byte {0}")]
    Truncated(usize),
    #[error("{got} trailing bytes after payload")]
    TrailingBytes { got: usize },
    #[error(transparent)]
    Ring(#[from] AlgebraError),
}

/// A user's broadcast: the masked input plus routing metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    sender: UserId,
    epoch: u64,
    payload: RingVector,
}

impl Message {
    pub fn new(sender: UserId, epoch: u64, payload: RingVector) -> Self {
        Self {
            sender,
            epoch,
            payload,
        }
    }

    pub fn sender(&self) -> UserId {
        self.sender
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn payload(&self) -> &RingVector {
        &self.payload
    }

    /// Wire layout: "DSA1" | epoch (8 LE) | sender (2 LE) | modulus (8 LE) |
    /// len (4 LE) | symbols (8 LE each).
    pub fn encode(&self) -> Vec<u8> {
        let ring = self.payload.params();
        let mut out = Vec::with_capacity(26 + 8 * ring.len());
        out.extend_from_slice(&WIRE_MAGIC);
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.sender.get().to_le_bytes());
        out.extend_from_slice(&ring.modulus().to_le_bytes());
        out.extend_from_slice(&ring.len_u32().to_le_bytes());
        for &c in self.payload.coords() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8], WireError> {
            if *at + n > bytes.len() {
                return Err(WireError::Truncated(*at));
            }
            let slice = &bytes[*at..*at + n];
            *at += n;
            Ok(slice)
        };
        if take(&mut at, 4)? != WIRE_MAGIC {
            return Err(WireError::BadMagic);
        }
        let epoch = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let sender = u16::from_le_bytes(take(&mut at, 2)?.try_into().unwrap());
        let modulus = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap());
        let ring = RingParams::new(modulus, len)?;
        let mut coords = Vec::with_capacity(ring.len());
        for _ in 0..ring.len() {
            coords.push(u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
        }
        if at != bytes.len() {
            return Err(WireError::TrailingBytes {
                got: bytes.len() - at,
            });
        }
        Ok(Self {
            sender: UserId::new(sender),
            epoch,
            payload: RingVector::new(ring, coords)?,
        })
    }
}

/// The aggregate every user decodes: the sum of all K inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateResult {
    value: RingVector,
    recovered_by: UserId,
}

impl AggregateResult {
    pub fn value(&self) -> &RingVector {
        &self.value
    }

    pub fn recovered_by(&self) -> UserId {
        self.recovered_by
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Sent,
    Recovered,
}

/// One user's view of a single aggregation round.
#[derive(Debug, Clone)]
pub struct UserState {
    user_id: UserId,
    params: ProtocolParams,
    epoch: u64,
    input: RingVector,
    key: IndividualKey,
    inbox: BTreeMap<UserId, Message>,
    phase: Phase,
}

impl UserState {
    pub fn new(
        user_id: UserId,
        params: ProtocolParams,
        epoch: u64,
        input: RingVector,
        key: IndividualKey,
    ) -> Result<Self, ProtocolError> {
        if !params.contains(user_id) {
            return Err(ProtocolError::BadUserId {
                user: user_id,
                users: params.users(),
            });
        }
        if key.owner() != user_id {
            return Err(ProtocolError::KeyOwnerMismatch {
                user: user_id,
                owner: key.owner(),
            });
        }
        if input.params() != params.ring() {
            return Err(AlgebraError::ParamsMismatch {
                left: input.params(),
                right: params.ring(),
            }
            .into());
        }
        if key.mask().params() != params.ring() {
            return Err(AlgebraError::ParamsMismatch {
                left: key.mask().params(),
                right: params.ring(),
            }
            .into());
        }
        Ok(Self {
            user_id,
            params,
            epoch,
            input,
            key,
            inbox: BTreeMap::new(),
            phase: Phase::Idle,
        })
    }

    pub fn user_id(&self) -> UserId {
        self.user_id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn inbox_len(&self) -> usize {
        self.inbox.len()
    }

    /// Masks the input and moves to Sent. Purely deterministic: the payload
    /// is input + mask, no fresh randomness. A second call in the same
    /// epoch is a key-reuse attempt and is refused.
    pub fn make_message(&mut self) -> Result<Message, ProtocolError> {
        match self.phase {
            Phase::Idle => {}
            Phase::Sent | Phase::Recovered => {
                return Err(ProtocolError::AlreadySent {
                    user: self.user_id,
                    epoch: self.epoch,
                })
            }
        }
        let payload = self.input.add(self.key.mask())?;
        self.phase = Phase::Sent;
        Ok(Message::new(self.user_id, self.epoch, payload))
    }

    /// Files one peer broadcast. Rejects self-delivery, duplicates, stale
    /// epochs, and ring mismatches.
    pub fn accept_message(&mut self, message: &Message) -> Result<(), ProtocolError> {
        if self.phase == Phase::Recovered {
            return Err(ProtocolError::AlreadyRecovered { user: self.user_id });
        }
        if message.sender() == self.user_id {
            return Err(ProtocolError::SelfMessage { user: self.user_id });
        }
        if !self.params.contains(message.sender()) {
            return Err(ProtocolError::UnknownSender {
                sender: message.sender(),
                users: self.params.users(),
            });
        }
        if message.epoch() != self.epoch {
            return Err(ProtocolError::EpochMismatch {
                expected: self.epoch,
                got: message.epoch(),
            });
        }
        if message.payload().params() != self.params.ring() {
            return Err(AlgebraError::ParamsMismatch {
                left: message.payload().params(),
                right: self.params.ring(),
            }
            .into());
        }
        if self.inbox.contains_key(&message.sender()) {
            return Err(ProtocolError::DuplicateSender {
                sender: message.sender(),
            });
        }
        self.inbox.insert(message.sender(), message.clone());
        Ok(())
    }

    /// Adds own input, own mask, and all K-1 received payloads. The masks
    /// sum to zero across users, so the result is the plaintext input sum.
    pub fn recover_sum(&mut self) -> Result<AggregateResult, ProtocolError> {
        match self.phase {
            Phase::Idle => return Err(ProtocolError::NotSent { user: self.user_id }),
            Phase::Recovered => {
                return Err(ProtocolError::AlreadyRecovered { user: self.user_id })
            }
            Phase::Sent => {}
        }
        let expected = self.params.users() as usize - 1;
        if self.inbox.len() != expected {
            return Err(ProtocolError::NotReady {
                expected,
                got: self.inbox.len(),
            });
        }
        let own = self.input.add(self.key.mask())?;
        let peers = sum_all(self.inbox.values().map(|m| m.payload()))?;
        let value = own.add(&peers)?;
        self.phase = Phase::Recovered;
        Ok(AggregateResult {
            value,
            recovered_by: self.user_id,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{sample_uniform, RingParams, SeededRng};
    use crate::keying::{derive_keys, SourceKey};

    fn ring(q: u64, l: u32) -> RingParams {
        RingParams::new(q, l).unwrap()
    }

    fn params(k: u16, t: u16, q: u64, l: u32) -> ProtocolParams {
        ProtocolParams::new(k, t, ring(q, l)).unwrap()
    }

    fn rv(q: u64, coords: &[u64]) -> RingVector {
        RingVector::new(ring(q, coords.len() as u32), coords.to_vec()).unwrap()
    }

    fn states_for(
        p: ProtocolParams,
        epoch: u64,
        inputs: &[RingVector],
        noise: &[RingVector],
    ) -> Vec<UserState> {
        let src = SourceKey::new(p, noise.to_vec()).unwrap();
        let keys = derive_keys(&src);
        inputs
            .iter()
            .zip(keys)
            .enumerate()
            .map(|(i, (w, z))| {
                UserState::new(UserId::new(i as u16 + 1), p, epoch, w.clone(), z).unwrap()
            })
            .collect()
    }

    #[test]
    fn message_is_input_plus_mask() {
        let p = params(3, 0, 2, 1);
        let mut s = UserState::new(
            UserId::new(1),
            p,
            0,
            rv(2, &[1]),
            IndividualKey::new(UserId::new(1), rv(2, &[1])),
        )
        .unwrap();
        assert_eq!(s.make_message().unwrap().payload(), &rv(2, &[0]));
    }

    #[test]
    fn zero_input_sends_bare_mask() {
        let p = params(3, 0, 7, 2);
        let mask = rv(7, &[5, 3]);
        let mut s = UserState::new(
            UserId::new(2),
            p,
            0,
            RingVector::zero(p.ring()),
            IndividualKey::new(UserId::new(2), mask.clone()),
        )
        .unwrap();
        assert_eq!(s.make_message().unwrap().payload(), &mask);
    }

    #[test]
    fn message_mod_five() {
        let p = params(3, 0, 5, 1);
        let mut s = UserState::new(
            UserId::new(1),
            p,
            0,
            rv(5, &[3]),
            IndividualKey::new(UserId::new(1), rv(5, &[4])),
        )
        .unwrap();
        assert_eq!(s.make_message().unwrap().payload(), &rv(5, &[2]));
    }

    #[test]
    fn double_broadcast_is_refused() {
        let p = params(3, 0, 2, 1);
        let mut s = UserState::new(
            UserId::new(1),
            p,
            9,
            rv(2, &[0]),
            IndividualKey::new(UserId::new(1), rv(2, &[1])),
        )
        .unwrap();
        s.make_message().unwrap();
        assert!(matches!(
            s.make_message().unwrap_err(),
            ProtocolError::AlreadySent { .. }
        ));
    }

    #[test]
    fn inbox_bookkeeping_and_errors() {
        let p = params(3, 0, 2, 1);
        let inputs = [rv(2, &[1]), rv(2, &[0]), rv(2, &[1])];
        let noise = [rv(2, &[1]), rv(2, &[0])];
        let mut states = states_for(p, 5, &inputs, &noise);
        let m2 = states[1].make_message().unwrap();

        states[0].accept_message(&m2).unwrap();
        assert_eq!(states[0].inbox_len(), 1);

        assert!(matches!(
            states[0].accept_message(&m2).unwrap_err(),
            ProtocolError::DuplicateSender { .. }
        ));

        let m1 = states[0].make_message().unwrap();
        assert!(matches!(
            states[0].accept_message(&m1).unwrap_err(),
            ProtocolError::SelfMessage { .. }
        ));

        let stale = Message::new(UserId::new(3), 4, rv(2, &[0]));
        assert!(matches!(
            states[0].accept_message(&stale).unwrap_err(),
            ProtocolError::EpochMismatch { expected: 5, got: 4 }
        ));
    }

    #[test]
    fn worked_three_user_round() {
        let p = params(3, 0, 2, 1);
        let inputs = [rv(2, &[1]), rv(2, &[0]), rv(2, &[1])];
        let noise = [rv(2, &[1]), rv(2, &[0])];
        let mut states = states_for(p, 0, &inputs, &noise);

        let messages: Vec<Message> =
            states.iter_mut().map(|s| s.make_message().unwrap()).collect();
        for m in &messages {
            assert!(m.payload().is_zero());
        }
        for state in &mut states {
            for m in &messages {
                if m.sender() != state.user_id() {
                    state.accept_message(m).unwrap();
                }
            }
        }
        for s in &mut states {
            let res = s.recover_sum().unwrap();
            assert_eq!(res.value(), &rv(2, &[0]));
            assert_eq!(res.recovered_by(), s.user_id());
        }
    }

    #[test]
    fn all_zero_inputs_recover_zero() {
        let p = params(4, 0, 5, 2);
        let zero = RingVector::zero(p.ring());
        let inputs = vec![zero.clone(); 4];
        let mut rng = SeededRng::from_seed(3);
        let noise: Vec<RingVector> = (0..3).map(|_| sample_uniform(p.ring(), &mut rng)).collect();
        let mut states = states_for(p, 0, &inputs, &noise);
        let messages: Vec<Message> =
            states.iter_mut().map(|s| s.make_message().unwrap()).collect();
        for state in &mut states {
            for m in &messages {
                if m.sender() != state.user_id() {
                    state.accept_message(m).unwrap();
                }
            }
        }
        for s in &mut states {
            assert!(s.recover_sum().unwrap().value().is_zero());
        }
    }

    #[test]
    fn random_round_matches_plaintext_sum() {
        let p = params(4, 0, 7, 2);
        let mut rng = SeededRng::from_seed(99);
        let inputs: Vec<RingVector> = (0..4).map(|_| sample_uniform(p.ring(), &mut rng)).collect();
        let noise: Vec<RingVector> = (0..3).map(|_| sample_uniform(p.ring(), &mut rng)).collect();
        // Oracle: the plaintext sum computed directly from the inputs.
        let expected = sum_all(inputs.iter()).unwrap();

        let mut states = states_for(p, 0, &inputs, &noise);
        let messages: Vec<Message> =
            states.iter_mut().map(|s| s.make_message().unwrap()).collect();
        for state in &mut states {
            for m in &messages {
                if m.sender() != state.user_id() {
                    state.accept_message(m).unwrap();
                }
            }
        }
        for s in &mut states {
            assert_eq!(s.recover_sum().unwrap().value(), &expected);
        }
    }

    #[test]
    fn recovery_requires_full_inbox() {
        let p = params(3, 0, 2, 1);
        let inputs = [rv(2, &[1]), rv(2, &[0]), rv(2, &[1])];
        let noise = [rv(2, &[1]), rv(2, &[0])];
        let mut states = states_for(p, 0, &inputs, &noise);
        let m2 = states[1].make_message().unwrap();
        states[0].make_message().unwrap();
        states[0].accept_message(&m2).unwrap();
        assert!(matches!(
            states[0].recover_sum().unwrap_err(),
            ProtocolError::NotReady { expected: 2, got: 1 }
        ));
    }

    #[test]
    fn message_payload_is_input_sized() {
        let p = params(3, 0, 65536, 32);
        let mut rng = SeededRng::from_seed(5);
        let input = sample_uniform(p.ring(), &mut rng);
        let mask = sample_uniform(p.ring(), &mut rng);
        let mut s = UserState::new(
            UserId::new(1),
            p,
            0,
            input,
            IndividualKey::new(UserId::new(1), mask),
        )
        .unwrap();
        assert_eq!(s.make_message().unwrap().payload().coords().len(), 32);
    }

    #[test]
    fn wire_golden_bytes() {
        let m = Message::new(UserId::new(2), 0x0102030405060708, rv(5, &[3, 4]));
        let expected: Vec<u8> = vec![
            b'D', b'S', b'A', b'1', // magic
            8, 7, 6, 5, 4, 3, 2, 1, // epoch
            2, 0, // sender
            5, 0, 0, 0, 0, 0, 0, 0, // modulus
            2, 0, 0, 0, // len
            3, 0, 0, 0, 0, 0, 0, 0, // symbol 0
            4, 0, 0, 0, 0, 0, 0, 0, // symbol 1
        ];
        assert_eq!(m.encode(), expected);
        assert_eq!(Message::decode(&expected).unwrap(), m);
    }

    #[test]
    fn wire_rejects_garbage() {
        assert_eq!(Message::decode(b"XXXX").unwrap_err(), WireError::BadMagic);
        let m = Message::new(UserId::new(1), 1, rv(2, &[1]));
        let mut bytes = m.encode();
        bytes.pop();
        assert!(matches!(
            Message::decode(&bytes).unwrap_err(),
            WireError::Truncated(_)
        ));
        let mut bytes = m.encode();
        bytes.push(0);
        assert!(matches!(
            Message::decode(&bytes).unwrap_err(),
            WireError::TrailingBytes { got: 1 }
        ));
        // Symbol out of range for the declared modulus.
        let mut bytes = m.encode();
        let last = bytes.len() - 8;
        bytes[last] = 9;
        assert!(matches!(Message::decode(&bytes).unwrap_err(), WireError::Ring(_)));
    }
}
