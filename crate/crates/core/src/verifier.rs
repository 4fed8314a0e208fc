//! Executable checks over an aggregation scheme.
//!
//! Each check enumerates the relevant world space through the oracle and
//! decides one verifiable claim about the scheme: that every user decodes
//! the input sum, that colluding observers learn nothing beyond it, that
//! the measured rate triple lies in (and on the corner of) the achievable
//! region, and that each converse bound — which caps what *any* scheme
//! could do — is met by this one.
//!
//! Two tolerance regimes apply. Zero-leakage and decodability claims use
//! exact integer tests, never floats. Entropy comparisons computed through
//! logarithms use [`ENTROPY_TOLERANCE_BITS`].
//!
//! The scheme under audit is a parameter everywhere, so deliberately broken
//! schemes (see `scheme::controls`) exercise the failure paths with the
//! same machinery. Check instances sharing one world space are batched so
//! each world is evaluated once per batch.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::algebra::{RingVector, SeededRng};
use crate::keying::{derive_keys, gen_source_key, ParamsError, ProtocolParams, UserId};
use crate::oracle::{JointDistribution, OracleError, VariableSpec, WorldSpace};
use crate::protocol::UserState;
use crate::scheme::AggregationScheme;

/// Slack for entropy values that pass through floating-point logarithms.
pub const ENTROPY_TOLERANCE_BITS: f64 = 1e-9;

/// Instances tabulated per enumeration pass; bounds peak memory.
const INSTANCE_BATCH: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifierError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("observer {observer} cannot collude with itself")]
    ObserverInSet { observer: UserId },
    #[error("collusion set of size {got} exceeds threshold {max}")]
    SetTooLarge { got: usize, max: usize },
    #[error("collusion member {member} outside user range 1..={users}")]
    MemberRange { member: UserId, users: u16 },
}

/// An observer together with the set of users it colludes with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollusionSet {
    observer: UserId,
    members: Vec<UserId>,
}

impl CollusionSet {
    /// Validates against the configured threshold: members drawn from
    /// `[K] \ {observer}` with `|members| <= params.collusion()`.
    pub fn new(
        observer: UserId,
        members: Vec<UserId>,
        params: &ProtocolParams,
    ) -> Result<Self, VerifierError> {
        Self::with_cap(observer, members, params, params.collusion() as usize)
    }

    fn with_cap(
        observer: UserId,
        mut members: Vec<UserId>,
        params: &ProtocolParams,
        cap: usize,
    ) -> Result<Self, VerifierError> {
        members.sort();
        members.dedup();
        if members.contains(&observer) {
            return Err(VerifierError::ObserverInSet { observer });
        }
        if let Some(&member) = members.iter().find(|m| !params.contains(**m)) {
            return Err(VerifierError::MemberRange {
                member,
                users: params.users(),
            });
        }
        if members.len() > cap {
            return Err(VerifierError::SetTooLarge {
                got: members.len(),
                max: cap,
            });
        }
        Ok(Self { observer, members })
    }

    pub fn observer(&self) -> UserId {
        self.observer
    }

    pub fn members(&self) -> &[UserId] {
        &self.members
    }

    /// The remaining users: `([K] \ {observer}) \ members`.
    pub fn complement(&self, params: &ProtocolParams) -> Vec<UserId> {
        params
            .user_ids()
            .filter(|u| *u != self.observer && !self.members.contains(u))
            .collect()
    }

    pub fn label(&self) -> String {
        let ids: Vec<String> = self.members.iter().map(|u| u.to_string()).collect();
        format!("k={},T={{{}}}", self.observer, ids.join(","))
    }
}

/// All collusion sets for one observer with sizes `0..=cap`, ordered by
/// size then lexicographically.
fn enumerate_sets(params: &ProtocolParams, observer: UserId, cap: usize) -> Vec<CollusionSet> {
    let candidates: Vec<UserId> = params.user_ids().filter(|u| *u != observer).collect();
    // 2^(K-1) subsets; anything near this limit is far outside what the
    // world-count budget admits anyway.
    assert!(
        candidates.len() < 32,
        "subset enumeration over {} users is not tractable",
        candidates.len() + 1
    );
    let mut sets = Vec::new();
    for mask in 0u32..(1 << candidates.len()) {
        if (mask.count_ones() as usize) > cap {
            continue;
        }
        let members: Vec<UserId> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, u)| *u)
            .collect();
        sets.push(CollusionSet { observer, members });
    }
    sets.sort_by(|a, b| (a.members.len(), &a.members).cmp(&(b.members.len(), &b.members)));
    sets
}

/// Sets quantified by the security requirement: sizes up to the configured
/// threshold T.
pub fn security_collusion_sets(params: &ProtocolParams, observer: UserId) -> Vec<CollusionSet> {
    enumerate_sets(params, observer, params.collusion() as usize)
}

/// Sets quantified by the converse bounds: sizes up to K-3, independent of
/// the configured threshold.
pub fn admissible_collusion_sets(params: &ProtocolParams, observer: UserId) -> Vec<CollusionSet> {
    enumerate_sets(params, observer, params.users() as usize - 3)
}

/// Measured communication and key rates, in bits per input bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTriple {
    pub r_x: f64,
    pub r_z: f64,
    pub r_z_sigma: f64,
}

impl fmt::Display for RateTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.r_x, self.r_z, self.r_z_sigma)
    }
}

/// Sizes measured off the production key-generation and messaging path:
/// payload symbols, mask symbols, and dealer pool symbols, each normalized
/// by the input length.
pub fn measure_rates(params: &ProtocolParams) -> RateTriple {
    let len = params.ring().len() as f64;
    let mut rng = SeededRng::from_seed(0);
    let source = gen_source_key(*params, &mut rng);
    let keys = derive_keys(&source);
    let noise_symbols: usize = source.noise().iter().map(|n| n.coords().len()).sum();
    let mask_symbols = keys[0].mask().coords().len();
    let mut state = UserState::new(
        UserId::new(1),
        *params,
        0,
        RingVector::zero(params.ring()),
        keys.into_iter().next().expect("K >= 3 keys"),
    )
    .expect("freshly derived key matches its owner");
    let message = state.make_message().expect("idle state broadcasts once");
    let payload_symbols = message.payload().coords().len();
    RateTriple {
        r_x: payload_symbols as f64 / len,
        r_z: mask_symbols as f64 / len,
        r_z_sigma: noise_symbols as f64 / len,
    }
}

/// Rates implied by the scheme maps themselves, measured from derived
/// artifacts on the all-zero noise assignment.
pub fn measure_scheme_rates(params: &ProtocolParams, scheme: &dyn AggregationScheme) -> RateTriple {
    let len = params.ring().len() as f64;
    let noise_count = scheme.noise_count(params);
    let zero = RingVector::zero(params.ring());
    let noise = vec![zero.clone(); noise_count];
    let masks = scheme.derive_masks(params, &noise);
    let message = scheme.message(params, UserId::new(1), &zero, &masks[0]);
    RateTriple {
        r_x: message.coords().len() as f64 / len,
        r_z: masks[0].coords().len() as f64 / len,
        r_z_sigma: (noise_count * params.ring().len()) as f64 / len,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Recovery,
    Security,
    RateRegion,
    Lemma1,
    Corollary1,
    Lemma2,
    Lemma3,
    Lemma4,
    SourceKeyEntropy,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::Recovery,
        CheckKind::Security,
        CheckKind::RateRegion,
        CheckKind::Lemma1,
        CheckKind::Corollary1,
        CheckKind::Lemma2,
        CheckKind::Lemma3,
        CheckKind::Lemma4,
        CheckKind::SourceKeyEntropy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Recovery => "recovery",
            CheckKind::Security => "security",
            CheckKind::RateRegion => "rate-region",
            CheckKind::Lemma1 => "lemma1",
            CheckKind::Corollary1 => "corollary1",
            CheckKind::Lemma2 => "lemma2",
            CheckKind::Lemma3 => "lemma3",
            CheckKind::Lemma4 => "lemma4",
            CheckKind::SourceKeyEntropy => "source-key",
        }
    }

    pub fn parse(name: &str) -> Result<Self, VerifierError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| VerifierError::UnknownCheck(name.to_string()))
    }
}

/// One quantified instance of a check (a user, or a user and a set).
#[derive(Debug, Clone)]
pub struct CheckInstance {
    pub label: String,
    pub expected: String,
    pub bound: f64,
    pub measured: f64,
    pub pass: bool,
}

/// Result of one check over all its instances.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub check: CheckKind,
    pub params: ProtocolParams,
    pub instances: Vec<CheckInstance>,
    pub world_count: u64,
    pub runtime: Duration,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.instances.iter().all(|i| i.pass)
    }

    pub fn passed_instances(&self) -> usize {
        self.instances.iter().filter(|i| i.pass).count()
    }
}

fn report(
    check: CheckKind,
    params: &ProtocolParams,
    world_count: u64,
    started: Instant,
    instances: Vec<CheckInstance>,
) -> CheckReport {
    CheckReport {
        check,
        params: *params,
        instances,
        world_count,
        runtime: started.elapsed(),
    }
}

/// Tabulates instance variable lists in batches (one world-enumeration pass
/// per batch) and folds each resulting distribution into a check instance.
fn batched_instances<M>(
    space: &WorldSpace<'_>,
    items: Vec<(M, Vec<VariableSpec>)>,
    mut compute: impl FnMut(&M, &JointDistribution) -> Result<CheckInstance, OracleError>,
) -> Result<Vec<CheckInstance>, VerifierError> {
    let mut instances = Vec::with_capacity(items.len());
    for chunk in items.chunks(INSTANCE_BATCH) {
        let lists: Vec<&[VariableSpec]> = chunk.iter().map(|(_, v)| v.as_slice()).collect();
        let distributions = space.tabulate_many_auto(&lists)?;
        for ((meta, _), d) in chunk.iter().zip(&distributions) {
            instances.push(compute(meta, d)?);
        }
    }
    Ok(instances)
}

/// Decodability: for every user k, the input sum is an exact function of
/// what k observes — its received broadcasts plus its own input and mask.
pub fn check_recovery(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let items: Vec<(UserId, Vec<VariableSpec>)> = params
        .user_ids()
        .map(|k| {
            let vars = vec![
                VariableSpec::input_sum(),
                VariableSpec::messages_except(params, k),
                VariableSpec::input(k),
                VariableSpec::mask(k),
            ];
            (k, vars)
        })
        .collect();
    let instances = batched_instances(&space, items, |k, d| {
        let view = [d.vars()[1].name(), d.vars()[2].name(), d.vars()[3].name()];
        let exact = d.unique_target_per_condition(&["sumW"], &view)?;
        let measured = d.entropy_bits(&["sumW"], &view)?;
        Ok(CheckInstance {
            label: format!("k={k}"),
            expected: "sum decodable: H(sumW|view)=0 exact".into(),
            bound: 0.0,
            measured,
            pass: exact,
        })
    })?;
    Ok(report(CheckKind::Recovery, params, space.world_count(), started, instances))
}

/// Zero leakage: for every observer k and every collusion set within the
/// threshold, the received broadcasts are exactly independent of the other
/// users' inputs given the sum and everything k already holds.
pub fn check_security(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let mut items: Vec<(CollusionSet, Vec<VariableSpec>)> = Vec::new();
    for k in params.user_ids() {
        for set in security_collusion_sets(params, k) {
            let vars = vec![
                VariableSpec::messages_except(params, k),
                VariableSpec::inputs_except(params, k),
                VariableSpec::input_sum(),
                VariableSpec::input(k),
                VariableSpec::mask(k),
                VariableSpec::collusion_view(set.members()),
            ];
            items.push((set, vars));
        }
    }
    let instances = batched_instances(&space, items, |set, d| {
        let v = d.vars();
        let a = [v[0].name()];
        let b = [v[1].name()];
        let given = [v[2].name(), v[3].name(), v[4].name(), v[5].name()];
        let exact = d.conditional_mi_is_zero(&a, &b, &given)?;
        let measured = d.conditional_mi_bits(&a, &b, &given)?;
        Ok(CheckInstance {
            label: set.label(),
            expected: "I(msgs;inputs|sum,own,colluded)=0 exact".into(),
            bound: 0.0,
            measured,
            pass: exact,
        })
    })?;
    Ok(report(CheckKind::Security, params, space.world_count(), started, instances))
}

/// Membership of a measured rate triple in the achievable region
/// {R_X >= 1, R_Z >= 1, R_ZSigma >= K-1}, plus an optimality flag when it
/// sits exactly on the corner point.
pub fn check_rate_region(params: &ProtocolParams, measured: &RateTriple) -> CheckReport {
    let started = Instant::now();
    let corner = params.users() as f64 - 1.0;
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
    let member = [
        ("R_X>=1", 1.0, measured.r_x),
        ("R_Z>=1", 1.0, measured.r_z),
        ("R_ZSigma>=K-1", corner, measured.r_z_sigma),
    ];
    let mut instances: Vec<CheckInstance> = member
        .into_iter()
        .map(|(label, bound, value)| CheckInstance {
            label: label.into(),
            expected: format!(">= {bound}"),
            bound,
            measured: value,
            pass: value >= bound - 1e-12,
        })
        .collect();
    let optimal = close(measured.r_x, 1.0)
        && close(measured.r_z, 1.0)
        && close(measured.r_z_sigma, corner);
    instances.push(CheckInstance {
        label: "optimal".into(),
        expected: format!("= (1, 1, {corner})"),
        bound: corner,
        measured: measured.r_z_sigma,
        pass: optimal,
    });
    report(CheckKind::RateRegion, params, 0, started, instances)
}

/// Each broadcast carries at least one full input worth of fresh bits, even
/// given every other user's input and mask.
pub fn check_lemma1(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let bound = params.ring().bits_per_vector();
    let items: Vec<(UserId, Vec<VariableSpec>)> = params
        .user_ids()
        .map(|k| {
            let others: Vec<UserId> = params.user_ids().filter(|u| *u != k).collect();
            let vars = vec![
                VariableSpec::message(k),
                VariableSpec::collusion_view(&others),
            ];
            (k, vars)
        })
        .collect();
    let instances = batched_instances(&space, items, |k, d| {
        let measured = d.entropy_bits(&[d.vars()[0].name()], &[d.vars()[1].name()])?;
        Ok(CheckInstance {
            label: format!("k={k}"),
            expected: format!(">= {bound}"),
            bound,
            measured,
            pass: measured >= bound - ENTROPY_TOLERANCE_BITS,
        })
    })?;
    Ok(report(CheckKind::Lemma1, params, space.world_count(), started, instances))
}

/// The broadcasts of the non-colluding users retain full joint entropy
/// given everything the observer side holds.
pub fn check_corollary1(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let per_vector = params.ring().bits_per_vector();
    let mut items: Vec<((CollusionSet, f64), Vec<VariableSpec>)> = Vec::new();
    for k in params.user_ids() {
        for set in admissible_collusion_sets(params, k) {
            let complement = set.complement(params);
            let bound = complement.len() as f64 * per_vector;
            let vars = vec![
                VariableSpec::messages_of(&complement),
                VariableSpec::collusion_view(set.members()),
                VariableSpec::input(k),
                VariableSpec::mask(k),
            ];
            items.push(((set, bound), vars));
        }
    }
    let instances = batched_instances(&space, items, |(set, bound), d| {
        let v = d.vars();
        let given = [v[1].name(), v[2].name(), v[3].name()];
        let measured = d.entropy_bits(&[v[0].name()], &given)?;
        Ok(CheckInstance {
            label: set.label(),
            expected: format!(">= {bound}"),
            bound: *bound,
            measured,
            pass: measured >= bound - ENTROPY_TOLERANCE_BITS,
        })
    })?;
    Ok(report(CheckKind::Corollary1, params, space.world_count(), started, instances))
}

/// Pairwise masking: any broadcast is exactly independent of its own input
/// from any other user's vantage point.
pub fn check_lemma2(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let mut items: Vec<((UserId, UserId), Vec<VariableSpec>)> = Vec::new();
    for k in params.user_ids() {
        for observer in params.user_ids().filter(|u| *u != k) {
            let vars = vec![
                VariableSpec::message(k),
                VariableSpec::input(k),
                VariableSpec::input(observer),
                VariableSpec::mask(observer),
            ];
            items.push(((k, observer), vars));
        }
    }
    let instances = batched_instances(&space, items, |(k, observer), d| {
        let v = d.vars();
        let given = [v[2].name(), v[3].name()];
        let exact = d.conditional_mi_is_zero(&[v[0].name()], &[v[1].name()], &given)?;
        let measured = d.conditional_mi_bits(&[v[0].name()], &[v[1].name()], &given)?;
        Ok(CheckInstance {
            label: format!("k={k},k'={observer}"),
            expected: "I(Xk;Wk|Wk',Zk')=0 exact".into(),
            bound: 0.0,
            measured,
            pass: exact,
        })
    })?;
    Ok(report(CheckKind::Lemma2, params, space.world_count(), started, instances))
}

/// What an observer-plus-colluders coalition learns about the remaining
/// inputs from the remaining broadcasts is exactly one input's worth: the
/// sum, nothing else.
pub fn check_lemma3(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let bound = params.ring().bits_per_vector();
    let mut items: Vec<(CollusionSet, Vec<VariableSpec>)> = Vec::new();
    for k in params.user_ids() {
        for set in admissible_collusion_sets(params, k) {
            let complement = set.complement(params);
            let vars = vec![
                VariableSpec::messages_of(&complement),
                VariableSpec::inputs_of(&complement),
                VariableSpec::collusion_view(set.members()),
                VariableSpec::input(k),
                VariableSpec::mask(k),
            ];
            items.push((set, vars));
        }
    }
    let instances = batched_instances(&space, items, |set, d| {
        let v = d.vars();
        let given = [v[2].name(), v[3].name(), v[4].name()];
        let measured = d.conditional_mi_bits(&[v[0].name()], &[v[1].name()], &given)?;
        Ok(CheckInstance {
            label: set.label(),
            expected: format!("= {bound}"),
            bound,
            measured,
            pass: (measured - bound).abs() <= ENTROPY_TOLERANCE_BITS,
        })
    })?;
    Ok(report(CheckKind::Lemma3, params, space.world_count(), started, instances))
}

/// The non-colluding users' masks keep at least (K-2-|T|)L bits of joint
/// entropy given every mask the coalition holds.
pub fn check_lemma4(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let per_vector = params.ring().bits_per_vector();
    let mut items: Vec<((CollusionSet, f64), Vec<VariableSpec>)> = Vec::new();
    for k in params.user_ids() {
        for set in admissible_collusion_sets(params, k) {
            let complement = set.complement(params);
            let bound = (params.users() as f64 - 2.0 - set.members().len() as f64) * per_vector;
            let mut coalition = set.members().to_vec();
            coalition.push(k);
            let vars = vec![
                VariableSpec::masks_of(&complement),
                VariableSpec::masks_of(&coalition),
            ];
            items.push(((set, bound), vars));
        }
    }
    let instances = batched_instances(&space, items, |(set, bound), d| {
        let measured = d.entropy_bits(&[d.vars()[0].name()], &[d.vars()[1].name()])?;
        Ok(CheckInstance {
            label: set.label(),
            expected: format!(">= {bound}"),
            bound: *bound,
            measured,
            pass: measured >= bound - ENTROPY_TOLERANCE_BITS,
        })
    })?;
    Ok(report(CheckKind::Lemma4, params, space.world_count(), started, instances))
}

/// The joint mask distribution carries exactly (K-1)L independent uniform
/// vectors' worth of randomness: support q^((K-1)L), all counts equal.
pub fn check_source_key_entropy(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
) -> Result<CheckReport, VerifierError> {
    let started = Instant::now();
    let space = WorldSpace::new(*params, scheme, budget)?;
    let vars: Vec<VariableSpec> = params.user_ids().map(VariableSpec::mask).collect();
    let d = space.tabulate_auto(&vars)?;
    let names: Vec<&str> = vars.iter().map(|v| v.name()).collect();
    let measured = d.entropy_bits(&names, &[])?;
    let bound = (params.users() as f64 - 1.0) * params.ring().bits_per_vector();
    let expected_support = (params.ring().modulus() as u128)
        .checked_pow((params.users() as u32 - 1) * params.ring().len_u32())
        .unwrap_or(u128::MAX);
    let exact = d.support_size() as u128 == expected_support && d.is_uniform();
    let instances = vec![CheckInstance {
        label: "joint-masks".into(),
        expected: format!("H = {bound}, support {expected_support} uniform"),
        bound,
        measured,
        pass: exact,
    }];
    Ok(report(CheckKind::SourceKeyEntropy, params, space.world_count(), started, instances))
}

/// Configuration gate: accepts exactly K >= 3 with T <= K-3.
pub fn reject_trivial_regime(users: u16, collusion: u16) -> Result<(), ParamsError> {
    ProtocolParams::check_regime(users, collusion)
}

/// Runs the selected checks in canonical order against one scheme.
pub fn run_checks(
    params: &ProtocolParams,
    scheme: &dyn AggregationScheme,
    budget: u64,
    kinds: &[CheckKind],
) -> Result<Vec<CheckReport>, VerifierError> {
    let mut reports = Vec::with_capacity(kinds.len());
    for kind in CheckKind::ALL.iter().filter(|k| kinds.contains(k)) {
        let report = match kind {
            CheckKind::Recovery => check_recovery(params, scheme, budget)?,
            CheckKind::Security => check_security(params, scheme, budget)?,
            CheckKind::RateRegion => {
                check_rate_region(params, &measure_scheme_rates(params, scheme))
            }
            CheckKind::Lemma1 => check_lemma1(params, scheme, budget)?,
            CheckKind::Corollary1 => check_corollary1(params, scheme, budget)?,
            CheckKind::Lemma2 => check_lemma2(params, scheme, budget)?,
            CheckKind::Lemma3 => check_lemma3(params, scheme, budget)?,
            CheckKind::Lemma4 => check_lemma4(params, scheme, budget)?,
            CheckKind::SourceKeyEntropy => check_source_key_entropy(params, scheme, budget)?,
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Human-readable summary, one row per check. Timing lives on the report
/// struct but stays out of rendered output, which must be byte-identical
/// across identical invocations.
pub fn render_summary(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>9} {:>6} {:>10}\n",
        "check", "instances", "pass", "worlds"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<12} {:>5}/{:<3} {:>6} {:>10}\n",
            r.check.name(),
            r.passed_instances(),
            r.instances.len(),
            if r.pass() { "ok" } else { "FAIL" },
            r.world_count,
        ));
    }
    let all = reports.iter().all(CheckReport::pass);
    out.push_str(&format!(
        "overall: {}\n",
        if all { "all checks passed" } else { "FAILED" }
    ));
    out
}

/// Machine-readable report: one record per check instance, stable field
/// order, no spaces inside values.
pub fn render_machine(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        for i in &r.instances {
            out.push_str(&format!(
                "check={} instance={} bound={} measured={} pass={} worlds={}\n",
                r.check.name(),
                i.label,
                i.bound,
                i.measured,
                i.pass,
                r.world_count,
            ));
        }
    }
    out
}
