//! Deterministic in-process simulation of the broadcast network.
//!
//! K users sit on orthogonal, error-free broadcast channels. A run executes
//! three strictly separated phases: dealer (draw the source key, derive and
//! hand out masks), broadcast (every user masks and sends), and recovery
//! (every user decodes the sum). Simulated time is a bare event counter.
//!
//! Every run is a pure function of its [`SimConfig`]; the transcript records
//! each event in order and can be re-executed bit-for-bit by [`replay`].
//! Randomness is split into independent seeded streams so that, for a given
//! seed, the dealer's noise does not depend on the input mode or delivery
//! order.
//!
//! The transcript text format is line-delimited UTF-8 with a fixed field
//! order, one event per line:
//!
//! ```text
//! dsa-transcript/1
//! config users=3 collusion=0 modulus=2 len=1 seed=7 epoch=7 inputs=random order=round-robin
//! input tick=0 sender=- receiver=1 payload=0100000000000000
//! ...
//! ```
//!
//! `input`/`key` lines carry the dealer's private delivery to `receiver`;
//! `broadcast` lines carry a user's masked message; `deliver` lines record
//! one channel delivery; `result` lines carry the sum decoded by `sender`.
//! Payloads are the little-endian 8-byte symbol encoding in lowercase hex.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::algebra::{
    sample_uniform, AlgebraError, RandomSource, RingParams, RingVector, SeededRng,
};
use crate::keying::{derive_keys, gen_source_key, ParamsError, ProtocolParams, UserId};
use crate::protocol::{Message, ProtocolError, UserState};

/// First line of every transcript file.
pub const TRANSCRIPT_HEADER: &str = "dsa-transcript/1";

const STREAM_SOURCE_KEY: u64 = 0;
const STREAM_INPUTS: u64 = 1;
const STREAM_DELIVERY: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Ring(#[from] AlgebraError),
    #[error("explicit input list has {got} vectors, expected {expected}")]
    InputCount { expected: usize, got: usize },
    #[error("epoch {0} already consumed; key material must not be reused")]
    EpochReused(u64),
    #[error("user {user}: {source}")]
    User {
        user: UserId,
        source: ProtocolError,
    },
    #[error("transcript line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Where the K inputs come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputMode {
    /// Sampled i.i.d. uniform from the seed's input stream.
    Random,
    /// Caller-supplied vectors, one per user.
    Explicit(Vec<RingVector>),
}

/// Order in which the K*(K-1) channel deliveries happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOrder {
    /// Senders 1..K in turn, each reaching receivers in ascending order.
    RoundRobin,
    /// A deterministic shuffle of all (sender, receiver) pairs.
    SeededShuffle,
}

impl fmt::Display for DeliveryOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeliveryOrder::RoundRobin => write!(f, "round-robin"),
            DeliveryOrder::SeededShuffle => write!(f, "seeded-shuffle"),
        }
    }
}

/// Full description of one run. The seed doubles as the epoch identifier:
/// it selects the key material, so reusing it means reusing keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    params: ProtocolParams,
    seed: u64,
    input_mode: InputMode,
    delivery_order: DeliveryOrder,
}

impl SimConfig {
    pub fn new(
        params: ProtocolParams,
        seed: u64,
        input_mode: InputMode,
        delivery_order: DeliveryOrder,
    ) -> Result<Self, SimError> {
        if let InputMode::Explicit(inputs) = &input_mode {
            if inputs.len() != params.users() as usize {
                return Err(SimError::InputCount {
                    expected: params.users() as usize,
                    got: inputs.len(),
                });
            }
            for v in inputs {
                if v.params() != params.ring() {
                    return Err(AlgebraError::ParamsMismatch {
                        left: v.params(),
                        right: params.ring(),
                    }
                    .into());
                }
            }
        }
        Ok(Self {
            params,
            seed,
            input_mode,
            delivery_order,
        })
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epoch(&self) -> u64 {
        self.seed
    }

    pub fn input_mode(&self) -> &InputMode {
        &self.input_mode
    }

    pub fn delivery_order(&self) -> DeliveryOrder {
        self.delivery_order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Input,
    Key,
    Broadcast,
    Deliver,
    Result,
}

impl EventKind {
    fn label(&self) -> &'static str {
        match self {
            EventKind::Input => "input",
            EventKind::Key => "key",
            EventKind::Broadcast => "broadcast",
            EventKind::Deliver => "deliver",
            EventKind::Result => "result",
        }
    }
}

/// One timestamped simulator event. Input/key events have only a receiver
/// (the dealer is not a user); broadcast/result events have only a sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub kind: EventKind,
    pub tick: u64,
    pub sender: Option<UserId>,
    pub receiver: Option<UserId>,
    pub payload: RingVector,
}

/// Auditable record of one run: the config echo plus every event in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    config: SimConfig,
    events: Vec<SimEvent>,
}

impl Transcript {
    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn epoch(&self) -> u64 {
        self.config.epoch()
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Per-user recovered values, in reporting order.
    pub fn results(&self) -> Vec<(UserId, &RingVector)> {
        self.events_of(EventKind::Result)
            .map(|e| (e.sender.expect("result events carry a sender"), &e.payload))
            .collect()
    }

    /// The common recovered value, if all K users reported and agree.
    pub fn agreed_result(&self) -> Option<&RingVector> {
        let results = self.results();
        if results.len() != self.config.params().users() as usize {
            return None;
        }
        let first = results[0].1;
        results.iter().all(|(_, v)| *v == first).then_some(first)
    }

    /// Renders the canonical text form; identical configs yield identical
    /// bytes.
    pub fn to_text(&self) -> String {
        let p = self.config.params();
        let mut out = String::new();
        out.push_str(TRANSCRIPT_HEADER);
        out.push('\n');
        let inputs = match self.config.input_mode() {
            InputMode::Random => "random",
            InputMode::Explicit(_) => "explicit",
        };
        out.push_str(&format!(
            "config users={} collusion={} modulus={} len={} seed={} epoch={} inputs={} order={}\n",
            p.users(),
            p.collusion(),
            p.ring().modulus(),
            p.ring().len(),
            self.config.seed(),
            self.config.epoch(),
            inputs,
            self.config.delivery_order(),
        ));
        for e in &self.events {
            out.push_str(&format!(
                "{} tick={} sender={} receiver={} payload={}\n",
                e.kind.label(),
                e.tick,
                e.sender.map_or("-".to_string(), |u| u.to_string()),
                e.receiver.map_or("-".to_string(), |u| u.to_string()),
                hex_encode(&e.payload),
            ));
        }
        out
    }

    /// Parses the canonical text form, validating structure and every
    /// payload symbol.
    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().enumerate();
        let (n, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty transcript"))?;
        if header != TRANSCRIPT_HEADER {
            return Err(parse_err(n + 1, "unrecognized schema header"));
        }
        let (n, config_line) = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing config line"))?;
        let (params, seed, input_tag, order) = parse_config_line(n + 1, config_line)?;

        let mut events = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            events.push(parse_event_line(n + 1, line, params.ring())?);
        }

        let input_mode = match input_tag {
            ConfigInputTag::Random => InputMode::Random,
            ConfigInputTag::Explicit => {
                // Recover the explicit inputs from the dealer's delivery
                // events, in user order.
                let mut inputs: Vec<(UserId, RingVector)> = events
                    .iter()
                    .filter(|e| e.kind == EventKind::Input)
                    .map(|e| {
                        let user = e
                            .receiver
                            .ok_or_else(|| parse_err(0, "input event without receiver"))?;
                        Ok((user, e.payload.clone()))
                    })
                    .collect::<Result<_, SimError>>()?;
                inputs.sort_by_key(|(u, _)| *u);
                InputMode::Explicit(inputs.into_iter().map(|(_, v)| v).collect())
            }
        };
        let config = SimConfig::new(params, seed, input_mode, order)?;
        Ok(Self { config, events })
    }
}

enum ConfigInputTag {
    Random,
    Explicit,
}

fn parse_err(line: usize, reason: impl Into<String>) -> SimError {
    SimError::Parse {
        line,
        reason: reason.into(),
    }
}

fn field<'a>(line_no: usize, token: Option<&'a str>, key: &str) -> Result<&'a str, SimError> {
    let token = token.ok_or_else(|| parse_err(line_no, format!("missing field {key}")))?;
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| parse_err(line_no, format!("expected {key}=..., got `{token}`")))
}

fn parse_num<T: std::str::FromStr>(line_no: usize, key: &str, raw: &str) -> Result<T, SimError> {
    raw.parse()
        .map_err(|_| parse_err(line_no, format!("invalid {key} value `{raw}`")))
}

fn parse_config_line(
    line_no: usize,
    line: &str,
) -> Result<(ProtocolParams, u64, ConfigInputTag, DeliveryOrder), SimError> {
    let mut tokens = line.split(' ');
    if tokens.next() != Some("config") {
        return Err(parse_err(line_no, "expected config line"));
    }
    let users: u16 = parse_num(line_no, "users", field(line_no, tokens.next(), "users")?)?;
    let collusion: u16 = parse_num(
        line_no,
        "collusion",
        field(line_no, tokens.next(), "collusion")?,
    )?;
    let modulus: u64 = parse_num(line_no, "modulus", field(line_no, tokens.next(), "modulus")?)?;
    let len: u32 = parse_num(line_no, "len", field(line_no, tokens.next(), "len")?)?;
    let seed: u64 = parse_num(line_no, "seed", field(line_no, tokens.next(), "seed")?)?;
    let epoch: u64 = parse_num(line_no, "epoch", field(line_no, tokens.next(), "epoch")?)?;
    if epoch != seed {
        return Err(parse_err(line_no, "epoch does not match seed"));
    }
    let input_tag = match field(line_no, tokens.next(), "inputs")? {
        "random" => ConfigInputTag::Random,
        "explicit" => ConfigInputTag::Explicit,
        other => return Err(parse_err(line_no, format!("unknown input mode `{other}`"))),
    };
    let order = match field(line_no, tokens.next(), "order")? {
        "round-robin" => DeliveryOrder::RoundRobin,
        "seeded-shuffle" => DeliveryOrder::SeededShuffle,
        other => {
            return Err(parse_err(
                line_no,
                format!("unknown delivery order `{other}`"),
            ))
        }
    };
    if let Some(extra) = tokens.next() {
        return Err(parse_err(line_no, format!("trailing token `{extra}`")));
    }
    let ring = RingParams::new(modulus, len).map_err(ParamsError::from)?;
    let params = ProtocolParams::new(users, collusion, ring)?;
    Ok((params, seed, input_tag, order))
}

fn parse_event_line(line_no: usize, line: &str, ring: RingParams) -> Result<SimEvent, SimError> {
    let mut tokens = line.split(' ');
    let kind = match tokens.next() {
        Some("input") => EventKind::Input,
        Some("key") => EventKind::Key,
        Some("broadcast") => EventKind::Broadcast,
        Some("deliver") => EventKind::Deliver,
        Some("result") => EventKind::Result,
        other => {
            return Err(parse_err(
                line_no,
                format!("unknown event kind `{}`", other.unwrap_or("")),
            ))
        }
    };
    let tick: u64 = parse_num(line_no, "tick", field(line_no, tokens.next(), "tick")?)?;
    let sender = parse_user(line_no, field(line_no, tokens.next(), "sender")?)?;
    let receiver = parse_user(line_no, field(line_no, tokens.next(), "receiver")?)?;
    let payload = hex_decode(line_no, field(line_no, tokens.next(), "payload")?, ring)?;
    if let Some(extra) = tokens.next() {
        return Err(parse_err(line_no, format!("trailing token `{extra}`")));
    }
    Ok(SimEvent {
        kind,
        tick,
        sender,
        receiver,
        payload,
    })
}

fn parse_user(line_no: usize, raw: &str) -> Result<Option<UserId>, SimError> {
    if raw == "-" {
        return Ok(None);
    }
    let id: u16 = parse_num(line_no, "user", raw)?;
    Ok(Some(UserId::new(id)))
}

fn hex_encode(v: &RingVector) -> String {
    let mut s = String::with_capacity(16 * v.coords().len());
    for &c in v.coords() {
        for b in c.to_le_bytes() {
            s.push_str(&format!("{b:02x}"));
        }
    }
    s
}

fn hex_decode(line_no: usize, s: &str, ring: RingParams) -> Result<RingVector, SimError> {
    if s.len() != 16 * ring.len() {
        return Err(parse_err(
            line_no,
            format!("payload length {} != {} hex chars", s.len(), 16 * ring.len()),
        ));
    }
    let raw: Vec<u8> = (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| parse_err(line_no, "invalid payload hex"))
        })
        .collect::<Result<_, _>>()?;
    let coords = raw
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RingVector::new(ring, coords).map_err(|e| parse_err(line_no, e.to_string()))
}

/// Unbiased index in `[0, n)` from a raw generator, by rejection.
fn uniform_index(rng: &mut dyn RandomSource, n: usize) -> usize {
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let raw = rng.next_u64();
        if raw <= zone {
            return (raw % n) as usize;
        }
    }
}

fn delivery_pairs(config: &SimConfig) -> Vec<(UserId, UserId)> {
    let users: Vec<UserId> = config.params().user_ids().collect();
    let mut pairs = Vec::with_capacity(users.len() * (users.len() - 1));
    for &s in &users {
        for &r in &users {
            if s != r {
                pairs.push((s, r));
            }
        }
    }
    if config.delivery_order() == DeliveryOrder::SeededShuffle {
        let mut rng = SeededRng::from_seed_stream(config.seed(), STREAM_DELIVERY);
        for i in (1..pairs.len()).rev() {
            pairs.swap(i, uniform_index(&mut rng, i + 1));
        }
    }
    pairs
}

/// Deliveries the fault hook suppresses. Defaults to none; acceptance runs
/// never use it.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    pub dropped_deliveries: Vec<(UserId, UserId)>,
}

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }

    fn drops(&self, sender: UserId, receiver: UserId) -> bool {
        self.dropped_deliveries.contains(&(sender, receiver))
    }
}

/// Executes one full round. Pure: the transcript is a function of the
/// config alone.
pub fn run_simulation(config: &SimConfig) -> Result<Transcript, SimError> {
    run_with_faults(config, &FaultPlan::none())
}

/// Like [`run_simulation`] but with the fault-injection hook enabled. A
/// user that never completes its inbox surfaces as a per-user error.
pub fn run_with_faults(config: &SimConfig, faults: &FaultPlan) -> Result<Transcript, SimError> {
    let params = config.params();
    let epoch = config.epoch();
    let mut events = Vec::new();
    let mut tick = 0u64;
    let mut push = |events: &mut Vec<SimEvent>,
                    kind: EventKind,
                    sender: Option<UserId>,
                    receiver: Option<UserId>,
                    payload: RingVector| {
        events.push(SimEvent {
            kind,
            tick,
            sender,
            receiver,
            payload,
        });
        tick += 1;
    };

    // Dealer phase: source key, derived masks, and the users' inputs.
    let mut dealer_rng = SeededRng::from_seed_stream(config.seed(), STREAM_SOURCE_KEY);
    let source = gen_source_key(params, &mut dealer_rng);
    let keys = derive_keys(&source);
    let inputs: Vec<RingVector> = match config.input_mode() {
        InputMode::Explicit(vs) => vs.clone(),
        InputMode::Random => {
            let mut input_rng = SeededRng::from_seed_stream(config.seed(), STREAM_INPUTS);
            (0..params.users())
                .map(|_| sample_uniform(params.ring(), &mut input_rng))
                .collect()
        }
    };
    for (user, input) in params.user_ids().zip(&inputs) {
        push(&mut events, EventKind::Input, None, Some(user), input.clone());
    }
    for key in &keys {
        push(
            &mut events,
            EventKind::Key,
            None,
            Some(key.owner()),
            key.mask().clone(),
        );
    }

    let mut states: Vec<UserState> = params
        .user_ids()
        .zip(inputs.iter().zip(&keys))
        .map(|(user, (input, key))| {
            UserState::new(user, params, epoch, input.clone(), key.clone())
                .map_err(|source| SimError::User { user, source })
        })
        .collect::<Result<_, _>>()?;

    // Broadcast phase: every user masks and sends exactly once.
    let mut messages: Vec<Message> = Vec::with_capacity(params.users() as usize);
    for state in &mut states {
        let message = state.make_message().map_err(|source| SimError::User {
            user: state.user_id(),
            source,
        })?;
        push(
            &mut events,
            EventKind::Broadcast,
            Some(message.sender()),
            None,
            message.payload().clone(),
        );
        messages.push(message);
    }

    // Delivery: interference-free sequential channel events.
    for (sender, receiver) in delivery_pairs(config) {
        if faults.drops(sender, receiver) {
            continue;
        }
        let message = &messages[sender.index()];
        states[receiver.index()]
            .accept_message(message)
            .map_err(|source| SimError::User {
                user: receiver,
                source,
            })?;
        push(
            &mut events,
            EventKind::Deliver,
            Some(sender),
            Some(receiver),
            message.payload().clone(),
        );
    }

    // Recovery phase: strict barrier after all deliveries.
    for state in &mut states {
        let result = state.recover_sum().map_err(|source| SimError::User {
            user: state.user_id(),
            source,
        })?;
        push(
            &mut events,
            EventKind::Result,
            Some(result.recovered_by()),
            None,
            result.value().clone(),
        );
    }

    Ok(Transcript {
        config: config.clone(),
        events,
    })
}

/// Re-executes the embedded config and compares event-for-event. Any
/// divergence, including payload tampering or reordered deliveries, yields
/// `false`.
pub fn replay(transcript: &Transcript) -> Result<bool, SimError> {
    let fresh = run_simulation(transcript.config())?;
    Ok(fresh == *transcript)
}

/// Stateful front end enforcing one-time key use: each epoch (seed) may be
/// consumed at most once per simulator.
#[derive(Debug, Default)]
pub struct Simulator {
    used_epochs: BTreeSet<u64>,
}

impl Simulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn run(&mut self, config: &SimConfig) -> Result<Transcript, SimError> {
        if !self.used_epochs.insert(config.epoch()) {
            return Err(SimError::EpochReused(config.epoch()));
        }
        run_simulation(config)
    }
}
