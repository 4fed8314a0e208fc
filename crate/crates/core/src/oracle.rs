//! Exact information-theoretic measurement by exhaustive enumeration.
//!
//! A *world* is one complete assignment of all K inputs and all dealer noise
//! vectors. Inputs and noise symbols are uniform and mutually independent,
//! so enumerating every world once with equal weight yields the exact joint
//! distribution of any collection of protocol variables as integer counts.
//! Entropies come out of those counts in bits; independence is decided by an
//! integer factorization identity with no floating point at all.
//!
//! World counts grow as q^((K + noise) * L), so construction is guarded by
//! an explicit budget and fails with the required count when exceeded.
//!
//! Value tuples are bit-packed into `u128` keys whenever they fit (fixed
//! width per symbol), which keeps the count maps compact; oversized tuples
//! fall back to plain symbol vectors. Distributions built either way hold
//! identical counts.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::algebra::{sum_all, RingVector};
use crate::keying::{ProtocolParams, UserId};
use crate::scheme::AggregationScheme;

/// Default cap on exhaustive enumeration size (2^24 worlds).
pub const DEFAULT_WORLD_BUDGET: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration needs {required} worlds, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{name}` is invalid here: {reason}")]
    InvalidVariable { name: String, reason: String },
}

/// Smallest extractable unit: one protocol vector (L symbols).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    /// W_k, user k's private input.
    Input(UserId),
    /// Z_k, user k's derived mask.
    Mask(UserId),
    /// X_k, user k's broadcast.
    Message(UserId),
    /// N_i, the dealer's i-th noise vector (1-based).
    Noise(usize),
    /// The plaintext sum of all K inputs.
    InputSum,
}

/// A named, pure, total extractor from worlds to discrete values: a tuple of
/// atoms, flattened to their symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpec {
    name: String,
    atoms: Vec<Atom>,
}

impl VariableSpec {
    pub fn named(name: impl Into<String>, atoms: Vec<Atom>) -> Self {
        Self {
            name: name.into(),
            atoms,
        }
    }

    pub fn input(user: UserId) -> Self {
        Self::named(format!("W{user}"), vec![Atom::Input(user)])
    }

    pub fn mask(user: UserId) -> Self {
        Self::named(format!("Z{user}"), vec![Atom::Mask(user)])
    }

    pub fn message(user: UserId) -> Self {
        Self::named(format!("X{user}"), vec![Atom::Message(user)])
    }

    pub fn noise(index: usize) -> Self {
        Self::named(format!("N{index}"), vec![Atom::Noise(index)])
    }

    pub fn input_sum() -> Self {
        Self::named("sumW", vec![Atom::InputSum])
    }

    /// All broadcasts except user k's: {X_i}_{i != k}.
    pub fn messages_except(params: &ProtocolParams, user: UserId) -> Self {
        let atoms = params
            .user_ids()
            .filter(|u| *u != user)
            .map(Atom::Message)
            .collect();
        Self::named(format!("Xnot{user}"), atoms)
    }

    /// All inputs except user k's: {W_i}_{i != k}.
    pub fn inputs_except(params: &ProtocolParams, user: UserId) -> Self {
        let atoms = params
            .user_ids()
            .filter(|u| *u != user)
            .map(Atom::Input)
            .collect();
        Self::named(format!("Wnot{user}"), atoms)
    }

    /// The broadcasts of a user set: {X_i}_{i in S}.
    pub fn messages_of(members: &[UserId]) -> Self {
        Self::set_var("X", members, Atom::Message)
    }

    /// The inputs of a user set: {W_i}_{i in S}.
    pub fn inputs_of(members: &[UserId]) -> Self {
        Self::set_var("W", members, Atom::Input)
    }

    /// The masks of a user set: {Z_i}_{i in S}.
    pub fn masks_of(members: &[UserId]) -> Self {
        Self::set_var("Z", members, Atom::Mask)
    }

    fn set_var(prefix: &str, members: &[UserId], atom: fn(UserId) -> Atom) -> Self {
        let mut sorted = members.to_vec();
        sorted.sort();
        sorted.dedup();
        let ids: Vec<String> = sorted.iter().map(|u| u.to_string()).collect();
        Self::named(
            format!("{prefix}({})", ids.join(",")),
            sorted.into_iter().map(atom).collect(),
        )
    }

    /// The pooled view of a user set: {W_i, Z_i}_{i in S}.
    pub fn collusion_view(members: &[UserId]) -> Self {
        let mut sorted = members.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut atoms = Vec::with_capacity(2 * sorted.len());
        for &u in &sorted {
            atoms.push(Atom::Input(u));
            atoms.push(Atom::Mask(u));
        }
        let ids: Vec<String> = sorted.iter().map(|u| u.to_string()).collect();
        Self::named(format!("C({})", ids.join(",")), atoms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

/// One fully evaluated world.
struct WorldEval {
    inputs: Vec<RingVector>,
    noise: Vec<RingVector>,
    masks: Vec<RingVector>,
    messages: Vec<RingVector>,
    input_sum: RingVector,
}

impl WorldEval {
    fn vector(&self, atom: &Atom) -> &RingVector {
        match atom {
            Atom::Input(u) => &self.inputs[u.index()],
            Atom::Mask(u) => &self.masks[u.index()],
            Atom::Message(u) => &self.messages[u.index()],
            Atom::Noise(i) => &self.noise[i - 1],
            Atom::InputSum => &self.input_sum,
        }
    }
}

/// Count storage: bit-packed keys when the tuple fits in 128 bits, plain
/// symbol vectors otherwise.
#[derive(Debug, Clone)]
enum Store {
    Packed(BTreeMap<u128, u64>),
    Wide(BTreeMap<Vec<u64>, u64>),
}

impl Store {
    fn len(&self) -> usize {
        match self {
            Store::Packed(m) => m.len(),
            Store::Wide(m) => m.len(),
        }
    }

    fn merge(&mut self, other: Store) {
        match (self, other) {
            (Store::Packed(a), Store::Packed(b)) => {
                for (k, c) in b {
                    *a.entry(k).or_insert(0) += c;
                }
            }
            (Store::Wide(a), Store::Wide(b)) => {
                for (k, c) in b {
                    *a.entry(k).or_insert(0) += c;
                }
            }
            _ => unreachable!("partitions of one tabulation share a layout"),
        }
    }
}

/// Precomputed extraction plan for one variable list.
struct ListPlan {
    vars: Vec<VariableSpec>,
    /// Bits per symbol when packing, 0 for the wide fallback.
    symbol_bits: u32,
}

impl ListPlan {
    fn new(params: &ProtocolParams, vars: &[VariableSpec]) -> Self {
        let len = params.ring().len();
        let total_symbols: usize = vars.iter().map(|v| v.atoms().len() * len).sum();
        let bits = 64 - (params.ring().modulus() - 1).leading_zeros();
        let packable = total_symbols as u64 * bits as u64 <= 128;
        Self {
            vars: vars.to_vec(),
            symbol_bits: if packable { bits } else { 0 },
        }
    }

    fn empty_store(&self) -> Store {
        if self.symbol_bits > 0 {
            Store::Packed(BTreeMap::new())
        } else {
            Store::Wide(BTreeMap::new())
        }
    }

    fn count(&self, eval: &WorldEval, store: &mut Store, scratch: &mut Vec<u64>) {
        match store {
            Store::Packed(map) => {
                let mut key = 0u128;
                let mut shift = 0u32;
                for var in &self.vars {
                    for atom in var.atoms() {
                        for &c in eval.vector(atom).coords() {
                            key |= (c as u128) << shift;
                            shift += self.symbol_bits;
                        }
                    }
                }
                *map.entry(key).or_insert(0) += 1;
            }
            Store::Wide(map) => {
                scratch.clear();
                for var in &self.vars {
                    for atom in var.atoms() {
                        scratch.extend_from_slice(eval.vector(atom).coords());
                    }
                }
                if let Some(c) = map.get_mut(scratch) {
                    *c += 1;
                } else {
                    map.insert(scratch.clone(), 1);
                }
            }
        }
    }
}

/// The enumerable space of worlds for one scheme at one parameter point.
pub struct WorldSpace<'s> {
    params: ProtocolParams,
    scheme: &'s dyn AggregationScheme,
    noise_count: usize,
    world_count: u64,
}

impl fmt::Debug for WorldSpace<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorldSpace")
            .field("params", &self.params)
            .field("scheme", &self.scheme.name())
            .field("noise_count", &self.noise_count)
            .field("world_count", &self.world_count)
            .finish()
    }
}

impl<'s> WorldSpace<'s> {
    pub fn new(
        params: ProtocolParams,
        scheme: &'s dyn AggregationScheme,
        budget: u64,
    ) -> Result<Self, OracleError> {
        let noise_count = scheme.noise_count(&params);
        let symbols = (params.users() as u32 + noise_count as u32) * params.ring().len_u32();
        let required = (params.ring().modulus() as u128)
            .checked_pow(symbols)
            .unwrap_or(u128::MAX);
        if required > budget as u128 {
            return Err(OracleError::BudgetExceeded { required, budget });
        }
        Ok(Self {
            params,
            scheme,
            noise_count,
            world_count: required as u64,
        })
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn scheme(&self) -> &dyn AggregationScheme {
        self.scheme
    }

    pub fn noise_count(&self) -> usize {
        self.noise_count
    }

    pub fn world_count(&self) -> u64 {
        self.world_count
    }

    fn validate(&self, vars: &[VariableSpec]) -> Result<(), OracleError> {
        for var in vars {
            for atom in var.atoms() {
                let ok = match atom {
                    Atom::Input(u) | Atom::Mask(u) | Atom::Message(u) => self.params.contains(*u),
                    Atom::Noise(i) => *i >= 1 && *i <= self.noise_count,
                    Atom::InputSum => true,
                };
                if !ok {
                    return Err(OracleError::InvalidVariable {
                        name: var.name().to_string(),
                        reason: format!(
                            "atom {atom:?} out of range for K={} with {} noise vectors",
                            self.params.users(),
                            self.noise_count
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Decodes world `index` as little-endian base-q digits: first the K
    /// input vectors, then the noise vectors; derived quantities follow
    /// from the scheme maps.
    fn eval(&self, index: u64) -> WorldEval {
        let ring = self.params.ring();
        let q = ring.modulus();
        let len = ring.len();
        let users = self.params.users() as usize;
        let mut rest = index;
        let mut next_vector = || {
            let coords: Vec<u64> = (0..len)
                .map(|_| {
                    let d = rest % q;
                    rest /= q;
                    d
                })
                .collect();
            RingVector::new(ring, coords).expect("digits are reduced residues")
        };
        let inputs: Vec<RingVector> = (0..users).map(|_| next_vector()).collect();
        let noise: Vec<RingVector> = (0..self.noise_count).map(|_| next_vector()).collect();
        let masks = self.scheme.derive_masks(&self.params, &noise);
        debug_assert_eq!(masks.len(), users);
        let messages: Vec<RingVector> = self
            .params
            .user_ids()
            .map(|u| self.scheme.message(&self.params, u, &inputs[u.index()], &masks[u.index()]))
            .collect();
        let input_sum = sum_all(inputs.iter()).expect("K >= 3 inputs");
        WorldEval {
            inputs,
            noise,
            masks,
            messages,
            input_sum,
        }
    }

    fn accumulate_range(&self, plans: &[ListPlan], range: std::ops::Range<u64>) -> Vec<Store> {
        let mut stores: Vec<Store> = plans.iter().map(ListPlan::empty_store).collect();
        let mut scratch = Vec::new();
        for index in range {
            let eval = self.eval(index);
            for (plan, store) in plans.iter().zip(&mut stores) {
                plan.count(&eval, store, &mut scratch);
            }
        }
        stores
    }

    fn run_tabulation(&self, plans: &[ListPlan], workers: usize) -> Vec<Store> {
        let workers = workers.clamp(1, 64) as u64;
        if workers <= 1 || self.world_count < 2 {
            return self.accumulate_range(plans, 0..self.world_count);
        }
        let chunk = self.world_count.div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(self.world_count);
                    scope.spawn(move || self.accumulate_range(plans, lo..hi))
                })
                .collect();
            let mut merged: Option<Vec<Store>> = None;
            for handle in handles {
                let part = handle.join().expect("tabulation worker panicked");
                match &mut merged {
                    None => merged = Some(part),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(part) {
                            a.merge(b);
                        }
                    }
                }
            }
            merged.expect("at least one worker")
        })
    }

    fn auto_workers(&self) -> usize {
        if self.world_count >= 1 << 14 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
                .min(8)
        } else {
            1
        }
    }

    /// Exact joint counts of `vars` over every world, single-threaded.
    pub fn tabulate(&self, vars: &[VariableSpec]) -> Result<JointDistribution, OracleError> {
        self.tabulate_partitioned(vars, 1)
    }

    /// [`tabulate`](Self::tabulate), parallelized over world ranges when the
    /// space is large enough to be worth it. Same counts either way.
    pub fn tabulate_auto(&self, vars: &[VariableSpec]) -> Result<JointDistribution, OracleError> {
        self.tabulate_partitioned(vars, self.auto_workers())
    }

    /// Same result as [`tabulate`](Self::tabulate), computed over disjoint
    /// world ranges on `workers` threads and merged by addition.
    pub fn tabulate_partitioned(
        &self,
        vars: &[VariableSpec],
        workers: usize,
    ) -> Result<JointDistribution, OracleError> {
        let mut out = self.tabulate_many(std::slice::from_ref(&vars), workers)?;
        Ok(out.pop().expect("one list in, one distribution out"))
    }

    /// Joint counts for several variable lists in one enumeration pass:
    /// each world is evaluated once and feeds every list's accumulator.
    pub fn tabulate_many(
        &self,
        lists: &[&[VariableSpec]],
        workers: usize,
    ) -> Result<Vec<JointDistribution>, OracleError> {
        let mut plans = Vec::with_capacity(lists.len());
        for vars in lists {
            self.validate(vars)?;
            plans.push(ListPlan::new(&self.params, vars));
        }
        let stores = self.run_tabulation(&plans, workers);
        Ok(plans
            .into_iter()
            .zip(stores)
            .map(|(plan, store)| {
                JointDistribution::from_store(self.params, plan, store, self.world_count)
            })
            .collect())
    }

    /// [`tabulate_many`](Self::tabulate_many) with automatic worker choice.
    pub fn tabulate_many_auto(
        &self,
        lists: &[&[VariableSpec]],
    ) -> Result<Vec<JointDistribution>, OracleError> {
        self.tabulate_many(lists, self.auto_workers())
    }
}

/// Exact joint distribution of a variable list: integer counts over value
/// tuples, with probabilities understood as count/total.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    params: ProtocolParams,
    vars: Vec<VariableSpec>,
    /// Symbols per variable.
    widths: Vec<usize>,
    /// Symbol offset of each variable within a key.
    offsets: Vec<usize>,
    /// Bits per symbol in packed keys; 0 for wide storage.
    symbol_bits: u32,
    store: Store,
    total: u64,
}

impl JointDistribution {
    fn from_store(params: ProtocolParams, plan: ListPlan, store: Store, total: u64) -> Self {
        let len = params.ring().len();
        let widths: Vec<usize> = plan.vars.iter().map(|v| v.atoms().len() * len).collect();
        let mut offsets = Vec::with_capacity(widths.len());
        let mut at = 0;
        for w in &widths {
            offsets.push(at);
            at += w;
        }
        Self {
            params,
            vars: plan.vars,
            widths,
            offsets,
            symbol_bits: plan.symbol_bits,
            store,
            total,
        }
    }

    pub fn vars(&self) -> &[VariableSpec] {
        &self.vars
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.store.len()
    }

    /// Support points as symbol vectors, in deterministic order.
    pub fn counts(&self) -> Vec<(Vec<u64>, u64)> {
        match &self.store {
            Store::Packed(map) => map
                .iter()
                .map(|(&key, &c)| (self.unpack(key), c))
                .collect(),
            Store::Wide(map) => map.iter().map(|(k, &c)| (k.clone(), c)).collect(),
        }
    }

    fn unpack(&self, key: u128) -> Vec<u64> {
        let total: usize = self.widths.iter().sum();
        let mask = if self.symbol_bits == 128 {
            u128::MAX
        } else {
            (1u128 << self.symbol_bits) - 1
        };
        (0..total)
            .map(|i| ((key >> (i as u32 * self.symbol_bits)) & mask) as u64)
            .collect()
    }

    /// True iff every support point has the same count.
    pub fn is_uniform(&self) -> bool {
        let mut first = None;
        self.for_each_count(|c| match first {
            None => {
                first = Some(c);
                true
            }
            Some(f) => f == c,
        })
    }

    /// Applies `keep` to every count until it returns false.
    fn for_each_count(&self, mut keep: impl FnMut(u64) -> bool) -> bool {
        match &self.store {
            Store::Packed(map) => map.values().all(|&c| keep(c)),
            Store::Wide(map) => map.values().all(|&c| keep(c)),
        }
    }

    fn var_index(&self, name: &str) -> Result<usize, OracleError> {
        self.vars
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| OracleError::UnknownVariable(name.to_string()))
    }

    fn indices(&self, names: &[&str]) -> Result<Vec<usize>, OracleError> {
        names.iter().map(|n| self.var_index(n)).collect()
    }

    /// Deduplicated union, preserving first-seen order.
    fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        for &i in a.iter().chain(b) {
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out
    }

    /// Bit-range gather of the variables `idx` out of a packed key, packed
    /// contiguously in `idx` order.
    fn gather_packed(&self, key: u128, idx: &[usize]) -> u128 {
        let b = self.symbol_bits;
        let mut out = 0u128;
        let mut shift = 0u32;
        for &i in idx {
            let width_bits = self.widths[i] as u32 * b;
            if width_bits == 0 {
                continue;
            }
            let mask = if width_bits == 128 {
                u128::MAX
            } else {
                (1u128 << width_bits) - 1
            };
            let block = (key >> (self.offsets[i] as u32 * b)) & mask;
            out |= block << shift;
            shift += width_bits;
        }
        out
    }

    fn gather_wide(&self, key: &[u64], idx: &[usize], out: &mut Vec<u64>) {
        out.clear();
        for &i in idx {
            out.extend_from_slice(&key[self.offsets[i]..self.offsets[i] + self.widths[i]]);
        }
    }

    /// Marginal counts over `idx`, as a value-ordered list.
    fn marginal_counts(&self, idx: &[usize]) -> Vec<u64> {
        match &self.store {
            Store::Packed(map) => {
                let mut out: BTreeMap<u128, u64> = BTreeMap::new();
                for (&key, &c) in map {
                    *out.entry(self.gather_packed(key, idx)).or_insert(0) += c;
                }
                out.into_values().collect()
            }
            Store::Wide(map) => {
                let mut out: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
                let mut sub = Vec::new();
                for (key, &c) in map {
                    self.gather_wide(key, idx, &mut sub);
                    if let Some(slot) = out.get_mut(&sub) {
                        *slot += c;
                    } else {
                        out.insert(sub.clone(), c);
                    }
                }
                out.into_values().collect()
            }
        }
    }

    /// Shannon entropy in bits of the marginal over `idx`, exact counts,
    /// H = (1/N) * sum c * (log2 N - log2 c).
    fn entropy_indices(&self, idx: &[usize]) -> f64 {
        let n = self.total as f64;
        let log_n = n.log2();
        self.marginal_counts(idx)
            .iter()
            .map(|&c| (c as f64) * (log_n - (c as f64).log2()))
            .sum::<f64>()
            / n
    }

    /// A new distribution over a subset of the variables.
    pub fn project(&self, names: &[&str]) -> Result<JointDistribution, OracleError> {
        let idx = self.indices(names)?;
        let vars: Vec<VariableSpec> = idx.iter().map(|&i| self.vars[i].clone()).collect();
        let plan = ListPlan::new(&self.params, &vars);
        let store = match &self.store {
            Store::Packed(map) => {
                let mut out: BTreeMap<u128, u64> = BTreeMap::new();
                for (&key, &c) in map {
                    *out.entry(self.gather_packed(key, &idx)).or_insert(0) += c;
                }
                Store::Packed(out)
            }
            Store::Wide(map) => {
                let mut out: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
                let mut sub = Vec::new();
                for (key, &c) in map {
                    self.gather_wide(key, &idx, &mut sub);
                    *out.entry(sub.clone()).or_insert(0) += c;
                }
                Store::Wide(out)
            }
        };
        Ok(JointDistribution::from_store(
            self.params,
            plan,
            store,
            self.total,
        ))
    }

    /// H(targets | given) in bits. Overlapping names are fine: conditioning
    /// a variable on itself contributes zero.
    pub fn entropy_bits(&self, targets: &[&str], given: &[&str]) -> Result<f64, OracleError> {
        let t = self.indices(targets)?;
        let g = self.indices(given)?;
        let joint = Self::union(&t, &g);
        Ok(self.entropy_indices(&joint) - self.entropy_indices(&g))
    }

    /// I(a ; b | given) in bits, from four exact marginal entropies.
    pub fn conditional_mi_bits(
        &self,
        a: &[&str],
        b: &[&str],
        given: &[&str],
    ) -> Result<f64, OracleError> {
        let ia = self.indices(a)?;
        let ib = self.indices(b)?;
        let ig = self.indices(given)?;
        let ag = Self::union(&ia, &ig);
        let bg = Self::union(&ib, &ig);
        let abg = Self::union(&Self::union(&ia, &ib), &ig);
        Ok(self.entropy_indices(&ag) + self.entropy_indices(&bg)
            - self.entropy_indices(&abg)
            - self.entropy_indices(&ig))
    }

    /// Exact independence test: true iff, within every conditioning class,
    /// count(a,b) * count(class) == count(a) * count(b) for every cell of
    /// the product support. Pure integer arithmetic; this test, not the
    /// float entropy, is authoritative for zero-leakage claims.
    pub fn conditional_mi_is_zero(
        &self,
        a: &[&str],
        b: &[&str],
        given: &[&str],
    ) -> Result<bool, OracleError> {
        let ia = self.indices(a)?;
        let ib = self.indices(b)?;
        let ig = self.indices(given)?;
        match &self.store {
            Store::Packed(map) => Ok(independent_within_groups(map.iter().map(|(&key, &c)| {
                (
                    self.gather_packed(key, &ig),
                    self.gather_packed(key, &ia),
                    self.gather_packed(key, &ib),
                    c,
                )
            }))),
            Store::Wide(map) => {
                let mut g = Vec::new();
                let mut av = Vec::new();
                let mut bv = Vec::new();
                Ok(independent_within_groups(map.iter().map(|(key, &c)| {
                    self.gather_wide(key, &ig, &mut g);
                    self.gather_wide(key, &ia, &mut av);
                    self.gather_wide(key, &ib, &mut bv);
                    (g.clone(), av.clone(), bv.clone(), c)
                })))
            }
        }
    }

    /// Exact decodability test: true iff every conditioning value maps to a
    /// single target value, i.e. H(targets | given) == 0 as an integer fact.
    pub fn unique_target_per_condition(
        &self,
        targets: &[&str],
        given: &[&str],
    ) -> Result<bool, OracleError> {
        let it = self.indices(targets)?;
        let ig = self.indices(given)?;
        match &self.store {
            Store::Packed(map) => {
                let mut seen: BTreeMap<u128, u128> = BTreeMap::new();
                for &key in map.keys() {
                    let g = self.gather_packed(key, &ig);
                    let t = self.gather_packed(key, &it);
                    match seen.get(&g) {
                        Some(&prev) if prev != t => return Ok(false),
                        Some(_) => {}
                        None => {
                            seen.insert(g, t);
                        }
                    }
                }
                Ok(true)
            }
            Store::Wide(map) => {
                let mut seen: BTreeMap<Vec<u64>, Vec<u64>> = BTreeMap::new();
                let (mut t, mut g) = (Vec::new(), Vec::new());
                for key in map.keys() {
                    self.gather_wide(key, &it, &mut t);
                    self.gather_wide(key, &ig, &mut g);
                    match seen.get(&g) {
                        Some(prev) if *prev != t => return Ok(false),
                        Some(_) => {}
                        None => {
                            seen.insert(g.clone(), t.clone());
                        }
                    }
                }
                Ok(true)
            }
        }
    }

    /// Debug table: one line per support point, deterministic order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.vars.iter().map(|v| v.name()).collect();
        let _ = writeln!(out, "# vars: {}", names.join(" "));
        let _ = writeln!(out, "# total: {}", self.total);
        for (key, c) in self.counts() {
            let mut cells = Vec::with_capacity(self.vars.len());
            for (i, w) in self.widths.iter().enumerate() {
                let slice = &key[self.offsets[i]..self.offsets[i] + w];
                let text: Vec<String> = slice.iter().map(|v| v.to_string()).collect();
                cells.push(text.join(","));
            }
            let _ = writeln!(out, "{}\t{}", cells.join(" "), c);
        }
        out
    }
}

/// Exact conditional-independence test over (group, a, b, count) records:
/// within each group, every product-support cell must satisfy the integer
/// identity count(a,b) * count(group) == count(a) * count(b).
fn independent_within_groups<K: Ord + Clone>(
    records: impl Iterator<Item = (K, K, K, u64)>,
) -> bool {
    struct Group<K: Ord> {
        a_counts: BTreeMap<K, u64>,
        b_counts: BTreeMap<K, u64>,
        joint: BTreeMap<(K, K), u64>,
        total: u64,
    }
    let mut groups: BTreeMap<K, Group<K>> = BTreeMap::new();
    for (g, a, b, c) in records {
        let group = groups.entry(g).or_insert_with(|| Group {
            a_counts: BTreeMap::new(),
            b_counts: BTreeMap::new(),
            joint: BTreeMap::new(),
            total: 0,
        });
        *group.a_counts.entry(a.clone()).or_insert(0) += c;
        *group.b_counts.entry(b.clone()).or_insert(0) += c;
        *group.joint.entry((a, b)).or_insert(0) += c;
        group.total += c;
    }
    for group in groups.values() {
        for (av, &ca) in &group.a_counts {
            for (bv, &cb) in &group.b_counts {
                let joint = group
                    .joint
                    .get(&(av.clone(), bv.clone()))
                    .copied()
                    .unwrap_or(0);
                if joint as u128 * group.total as u128 != ca as u128 * cb as u128 {
                    return false;
                }
            }
        }
    }
    true
}
