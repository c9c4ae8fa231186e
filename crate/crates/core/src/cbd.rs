//! Explicit distributions over the instances of a small scope space, blockwise-dense
//! and conjunctive blockwise-dense (CBD) tests, and the greedy decomposition of any
//! such distribution into CBD parts plus two small error sets.
//!
//! An instance is coded per scope as `code = [y_S = −1] | bmask << 1` and identified
//! by `id = Σ_S code_S·(2^{k+1})^S`. The background `D(p)` samples `b_S` uniformly on
//! every scope, included or not.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::csp::{Predicate, RestrictedInstance, ScopeSpace};
use crate::exec::Exec;
use crate::scalar::{rational_string, Rational};
use crate::{Error, Result};

/// Largest instance space a table may cover.
pub const MAX_INSTANCES: u64 = 1 << 20;
/// Largest scope count for which every block is enumerated.
pub const MAX_EXHAUSTIVE_SCOPES: usize = 16;
/// Largest scope count for which the fixed block is found by exhaustive search.
pub const EXHAUSTIVE_BLOCK_SCOPES: usize = 4;
/// Largest denominator accepted for δ (comparisons raise masses to it).
pub const MAX_DELTA_DENOM: u64 = 64;

/// Per-scope coding of instance ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceCodec {
    m: usize,
    k: usize,
}

impl InstanceCodec {
    pub fn new(space: &ScopeSpace) -> Result<Self> {
        let codec = InstanceCodec { m: space.m(), k: space.k() };
        let bits = (codec.k + 1) * codec.m;
        if bits >= 64 || 1u64 << bits > MAX_INSTANCES {
            return Err(Error::ResourceLimit(format!(
                "instance space of 2^{bits} exceeds the table limit {MAX_INSTANCES}"
            )));
        }
        Ok(codec)
    }

    pub fn bits_per_scope(&self) -> usize {
        self.k + 1
    }

    pub fn count(&self) -> u64 {
        1 << (self.bits_per_scope() * self.m)
    }

    pub fn code(&self, id: u64, s: usize) -> u32 {
        let w = self.bits_per_scope();
        ((id >> (w * s)) & ((1 << w) - 1)) as u32
    }

    pub fn codes(&self, id: u64) -> Vec<u32> {
        (0..self.m).map(|s| self.code(id, s)).collect()
    }

    pub fn id(&self, codes: &[u32]) -> u64 {
        let w = self.bits_per_scope();
        codes.iter().enumerate().fold(0, |acc, (s, &c)| acc | (c as u64) << (w * s))
    }

    /// Codes of the scopes in `vmask`, packed in scope order.
    fn project(&self, id: u64, vmask: u32) -> u64 {
        let w = self.bits_per_scope();
        let mut key = 0u64;
        let mut pos = 0;
        for s in 0..self.m {
            if vmask >> s & 1 == 1 {
                key |= (self.code(id, s) as u64) << (w * pos);
                pos += 1;
            }
        }
        key
    }

    fn unpack(&self, key: u64, vmask: u32) -> Vec<u32> {
        let w = self.bits_per_scope();
        (0..vmask.count_ones() as usize).map(|pos| ((key >> (w * pos)) & ((1 << w) - 1)) as u32).collect()
    }
}

/// Subset of the instance ids of a codec, as a bitset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceSet {
    words: Vec<u64>,
    universe: u64,
}

impl InstanceSet {
    pub fn empty(universe: u64) -> Self {
        InstanceSet { words: vec![0; universe.div_ceil(64) as usize], universe }
    }

    pub fn full(universe: u64) -> Self {
        let mut s = Self::empty(universe);
        for id in 0..universe {
            s.insert(id);
        }
        s
    }

    pub fn from_ids(universe: u64, ids: impl IntoIterator<Item = u64>) -> Self {
        let mut s = Self::empty(universe);
        for id in ids {
            s.insert(id);
        }
        s
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn contains(&self, id: u64) -> bool {
        id < self.universe && self.words[(id / 64) as usize] >> (id % 64) & 1 == 1
    }

    pub fn insert(&mut self, id: u64) {
        self.words[(id / 64) as usize] |= 1 << (id % 64);
    }

    pub fn remove(&mut self, id: u64) {
        self.words[(id / 64) as usize] &= !(1 << (id % 64));
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                (bits != 0).then(|| {
                    let b = bits.trailing_zeros() as u64;
                    bits &= bits - 1;
                    i as u64 * 64 + b
                })
            })
        })
    }

    pub fn union_with(&mut self, other: &InstanceSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn ids(&self) -> Vec<u64> {
        self.iter().collect()
    }
}

/// A restricted instance `I_V` given by scope ids and per-scope codes.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Block {
    pub scopes: Vec<usize>,
    pub codes: Vec<u32>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.scopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    fn mask(&self) -> u32 {
        self.scopes.iter().fold(0, |acc, &s| acc | 1 << s)
    }

    pub fn to_restricted(&self, k: usize) -> RestrictedInstance {
        RestrictedInstance::from_codes(self.scopes.clone(), &self.codes, k)
    }

    fn matches(&self, codec: &InstanceCodec, id: u64) -> bool {
        self.scopes.iter().zip(&self.codes).all(|(&s, &c)| codec.code(id, s) == c)
    }
}

/// The blockwise-density exponent `1 − δ` with `δ = u/v`, compared exactly through
/// `a ≤ b^{1−δ} ⇔ a^v ≤ b^{v−u}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityParam {
    delta: Rational,
    u: usize,
    v: usize,
}

impl DensityParam {
    pub fn new(delta: Rational) -> Result<Self> {
        if delta < Rational::zero() {
            return Err(Error::InvalidInput(format!("delta must be nonnegative, got {delta}")));
        }
        let v = delta.denom().to_u64().filter(|&d| d <= MAX_DELTA_DENOM).ok_or_else(|| {
            Error::InvalidInput(format!("delta denominator must be at most {MAX_DELTA_DENOM}, got {delta}"))
        })?;
        let u = delta.numer().to_u64().unwrap_or(u64::MAX);
        Ok(DensityParam { delta, u: u.min(v) as usize, v: v as usize })
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    /// `a > b^{1−δ}`.
    pub fn violates(&self, a: &Rational, b: &Rational) -> bool {
        if a.is_zero() || self.u >= self.v {
            return false;
        }
        num_traits::pow(a.clone(), self.v) > num_traits::pow(b.clone(), self.v - self.u)
    }

    /// `a^v / b^{v−u}`, greater than 1 exactly at violations; `b` must be positive.
    fn score(&self, a: &Rational, b: &Rational) -> Rational {
        let e = self.v - self.u.min(self.v);
        num_traits::pow(a.clone(), self.v) / num_traits::pow(b.clone(), e)
    }

    /// Largest block size the fixed-block bound `(2/δ)·t` allows.
    pub fn block_bound(&self, t_param: usize) -> Option<usize> {
        if self.delta.is_zero() {
            return None;
        }
        let b = Rational::from_integer(BigInt::from(2 * t_param)) / &self.delta;
        Some(b.floor().to_integer().to_usize().unwrap_or(usize::MAX))
    }
}

/// `Pr_{D(p)}[y_S, b_S]` for both values of `y_S`, shared by every table of a space.
#[derive(Clone, Debug)]
struct Background {
    included: Rational,
    absent: Rational,
    per_instance: Vec<Rational>,
}

impl Background {
    fn new(space: &ScopeSpace, codec: &InstanceCodec) -> Self {
        let scale = Rational::from_integer(BigInt::one() << space.k());
        let included = space.p() / &scale;
        let absent = space.q() / &scale;
        let per_instance = (0..codec.count())
            .map(|id| {
                (0..space.m())
                    .fold(Rational::one(), |acc, s| acc * if codec.code(id, s) & 1 == 1 { &included } else { &absent })
            })
            .collect();
        Background { included, absent, per_instance }
    }

    fn factor(&self, code: u32) -> &Rational {
        if code & 1 == 1 {
            &self.included
        } else {
            &self.absent
        }
    }
}

/// Probability distribution over all instances of a small space, stored sparsely.
#[derive(Clone, Debug)]
pub struct DistributionTable {
    space: Arc<ScopeSpace>,
    codec: InstanceCodec,
    background: Arc<Background>,
    mass: BTreeMap<u64, Rational>,
}

impl DistributionTable {
    /// Validates masses (nonnegative, summing to exactly 1) and drops zeros.
    pub fn new(space: Arc<ScopeSpace>, mass: BTreeMap<u64, Rational>) -> Result<Self> {
        let base = Self::null(Arc::clone(&space))?;
        base.with_mass(mass)
    }

    fn with_mass(&self, mass: BTreeMap<u64, Rational>) -> Result<Self> {
        let mut total = Rational::zero();
        for (&id, w) in &mass {
            if id >= self.codec.count() {
                return Err(Error::InvalidDensity(format!("instance id {id} outside the space")));
            }
            if *w < Rational::zero() {
                return Err(Error::InvalidDensity(format!("negative mass at instance {id}")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::InvalidDensity(format!("masses sum to {total}, not 1")));
        }
        Ok(DistributionTable {
            space: Arc::clone(&self.space),
            codec: self.codec,
            background: Arc::clone(&self.background),
            mass: mass.into_iter().filter(|(_, w)| !w.is_zero()).collect(),
        })
    }

    /// The background `D(p)` itself.
    pub fn null(space: Arc<ScopeSpace>) -> Result<Self> {
        if space.inclusion_is_degenerate() {
            return Err(Error::InvalidDensity("background needs 0 < p < 1".into()));
        }
        let codec = InstanceCodec::new(&space)?;
        let background = Arc::new(Background::new(&space, &codec));
        let mass = background.per_instance.iter().cloned().enumerate().map(|(i, w)| (i as u64, w)).collect();
        Ok(DistributionTable { space, codec, background, mass })
    }

    pub fn point_mass(space: Arc<ScopeSpace>, id: u64) -> Result<Self> {
        Self::null(space)?.point(id)
    }

    fn point(&self, id: u64) -> Result<Self> {
        self.with_mass(BTreeMap::from([(id, Rational::one())]))
    }

    /// `Σ w_i·D_i`; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(Rational, &DistributionTable)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidDensity("empty mixture".into()))?.1;
        let mut mass: BTreeMap<u64, Rational> = BTreeMap::new();
        for (w, d) in parts {
            if d.codec != first.codec || d.space.p() != first.space.p() {
                return Err(Error::InvalidDensity("mixture components live on different spaces".into()));
            }
            for (&id, m) in &d.mass {
                *mass.entry(id).or_insert_with(Rational::zero) += w * m;
            }
        }
        first.with_mass(mass)
    }

    /// Unnormalized nonnegative weights, normalized.
    pub fn from_weights(&self, weights: BTreeMap<u64, Rational>) -> Result<Self> {
        let total: Rational = weights.values().sum();
        if total.is_zero() {
            return Err(Error::InvalidDensity("weights sum to zero".into()));
        }
        self.with_mass(weights.into_iter().map(|(id, w)| (id, w / &total)).collect())
    }

    /// The instance law of the planted distribution given the assignment `x_mask`.
    pub fn planted_given(space: Arc<ScopeSpace>, pred: &Predicate, x_mask: u64) -> Result<Self> {
        let base = Self::null(space)?;
        let factors = base.planted_factors(pred, x_mask)?;
        let mass = (0..base.codec.count())
            .map(|id| {
                let w = (0..base.space.m())
                    .fold(Rational::one(), |acc, s| acc * &factors[s][base.codec.code(id, s) as usize]);
                (id, w)
            })
            .collect();
        base.with_mass(mass)
    }

    /// The instance marginal of the planted distribution, averaged over all `x`.
    pub fn planted_marginal(space: Arc<ScopeSpace>, pred: &Predicate, exec: Exec) -> Result<Self> {
        let base = Self::null(space)?;
        let n = base.space.n();
        if n > 20 {
            return Err(Error::ResourceLimit(format!("planted marginal over 2^{n} assignments")));
        }
        let per_x = exec.try_map_indexed(1usize << n, |x| base.planted_factors(pred, x as u64))?;
        let scale = Rational::from_integer(BigInt::one() << n);
        let mass = (0..base.codec.count())
            .map(|id| {
                let total: Rational = per_x
                    .iter()
                    .map(|f| {
                        (0..base.space.m()).fold(Rational::one(), |acc, s| acc * &f[s][base.codec.code(id, s) as usize])
                    })
                    .sum();
                (id, total / &scale)
            })
            .collect();
        base.with_mass(mass)
    }

    /// `Pr[y_S, b_S | x]` under the planted distribution, per scope and code.
    fn planted_factors(&self, pred: &Predicate, x_mask: u64) -> Result<Vec<Vec<Rational>>> {
        if pred.k() != self.space.k() {
            return Err(Error::InvalidInput("predicate arity differs from scope arity".into()));
        }
        let per = 1u32 << self.codec.bits_per_scope();
        Ok((0..self.space.m())
            .map(|s| {
                let xs = self
                    .space
                    .scope(s)
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (j, &i)| acc | (((x_mask >> i) & 1) as u32) << j);
                (0..per)
                    .map(|code| {
                        if code & 1 == 1 {
                            self.space.p() * pred.planted_prob((code >> 1) ^ xs)
                        } else {
                            self.background.factor(code).clone()
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Seeded random table of one of several shapes: sparse random support, a mixture
    /// of `D(p)` with point masses, `D(p)` conditioned on a fixed block, or a table
    /// concentrated on two instances.
    pub fn fuzz<R: Rng + ?Sized>(space: Arc<ScopeSpace>, rng: &mut R) -> Result<Self> {
        let null = Self::null(space)?;
        let count = null.codec.count();
        let weight = |rng: &mut R| Rational::from_integer(BigInt::from(rng.gen_range(1..=10)));
        match rng.gen_range(0..4) {
            0 => {
                let size = rng.gen_range(1..=8);
                let weights = (0..size).map(|_| (rng.gen_range(0..count), weight(rng))).collect();
                null.from_weights(weights)
            }
            1 => {
                let w = Rational::new(BigInt::from(rng.gen_range(1..10)), BigInt::from(10));
                let spike = null.point(rng.gen_range(0..count))?;
                Self::mixture(&[(w.clone(), &null), (Rational::one() - w, &spike)])
            }
            2 => {
                let mut scopes: Vec<usize> = (0..null.space.m()).collect();
                scopes.shuffle(rng);
                scopes.truncate(rng.gen_range(1..=2.min(null.space.m())));
                scopes.sort_unstable();
                let per = 1u32 << null.codec.bits_per_scope();
                let codes = scopes.iter().map(|_| rng.gen_range(0..per)).collect();
                null.conditioned_on(&Block { scopes, codes })
            }
            _ => {
                let a = rng.gen_range(0..count);
                let b = rng.gen_range(0..count);
                let eps = Rational::new(BigInt::one(), BigInt::from(rng.gen_range(2..50)));
                let pa = null.point(a)?;
                let pb = null.point(b)?;
                let half = (Rational::one() - &eps) / Rational::from_integer(BigInt::from(2));
                Self::mixture(&[(eps, &null), (half.clone(), &pa), (half, &pb)])
            }
        }
    }

    pub fn space(&self) -> &Arc<ScopeSpace> {
        &self.space
    }

    pub fn codec(&self) -> &InstanceCodec {
        &self.codec
    }

    pub fn instance_count(&self) -> u64 {
        self.codec.count()
    }

    pub fn mass(&self, id: u64) -> Rational {
        self.mass.get(&id).cloned().unwrap_or_else(Rational::zero)
    }

    /// Instances of positive mass with their masses, by id.
    pub fn support(&self) -> impl Iterator<Item = (u64, &Rational)> {
        self.mass.iter().map(|(&id, w)| (id, w))
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }

    /// `Pr_{D(p)}[I]`.
    pub fn null_prob(&self, id: u64) -> &Rational {
        &self.background.per_instance[id as usize]
    }

    /// `Pr_{D(p)}[I_V = I'_V]`.
    pub fn null_block(&self, block: &Block) -> Rational {
        block.codes.iter().fold(Rational::one(), |acc, &c| acc * self.background.factor(c))
    }

    pub fn prob_of(&self, set: &InstanceSet) -> Rational {
        self.mass.iter().filter(|(id, _)| set.contains(**id)).map(|(_, w)| w).sum()
    }

    pub fn null_prob_of(&self, set: &InstanceSet) -> Rational {
        set.iter().map(|id| self.null_prob(id)).sum()
    }

    /// `D|A`.
    pub fn conditioned(&self, set: &InstanceSet) -> Result<Self> {
        let total = self.prob_of(set);
        if total.is_zero() {
            return Err(Error::UndefinedConditional("conditioning on a set of zero mass".into()));
        }
        let mass = self.mass.iter().filter(|(id, _)| set.contains(**id)).map(|(&id, w)| (id, w / &total)).collect();
        self.with_mass(mass)
    }

    /// `D | I_U = I*_U`.
    pub fn conditioned_on(&self, block: &Block) -> Result<Self> {
        let set = InstanceSet::from_ids(
            self.codec.count(),
            self.mass.keys().copied().filter(|&id| block.matches(&self.codec, id)),
        );
        self.conditioned(&set)
    }

    /// `Pr_D[I_V = ·]` over values of positive mass, keyed by packed codes.
    fn marginal(&self, vmask: u32) -> BTreeMap<u64, Rational> {
        let mut out: BTreeMap<u64, Rational> = BTreeMap::new();
        for (&id, w) in &self.mass {
            *out.entry(self.codec.project(id, vmask)).or_insert_with(Rational::zero) += w;
        }
        out
    }

    fn block_of(&self, vmask: u32, key: u64) -> Block {
        let scopes = (0..self.space.m()).filter(|s| vmask >> s & 1 == 1).collect();
        Block { scopes, codes: self.codec.unpack(key, vmask) }
    }

    /// Scopes whose value is the same on every instance of positive mass.
    pub fn fixed_block(&self) -> Block {
        let mut block = Block::default();
        let Some((&first, _)) = self.mass.iter().next() else {
            return block;
        };
        for s in 0..self.space.m() {
            let c = self.codec.code(first, s);
            if self.mass.keys().all(|&id| self.codec.code(id, s) == c) {
                block.scopes.push(s);
                block.codes.push(c);
            }
        }
        block
    }

    /// Canonical JSON-friendly listing `[[id, "mass"], ...]`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.mass.iter().map(|(id, w)| serde_json::json!([id, rational_string(w)])).collect())
    }
}

/// A block value whose mass exceeds its background bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub block: Block,
    #[serde(serialize_with = "ser_rational")]
    pub mass: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub null_mass: Rational,
}

fn ser_rational<S: serde::Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(q))
}

/// Outcome of a blockwise-density test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenseReport {
    pub dense: bool,
    /// The most violated block value: largest `a^v/b^{v−u}`, then larger `|V|`, then
    /// canonical order.
    pub witness: Option<Violation>,
    /// Blocks above `max_block` were not examined.
    pub partial: bool,
    pub max_block: usize,
}

/// Checks `Pr_D[I_V = I'_V] ≤ Pr_{D(p)}[I_V = I'_V]^{1−δ}` for every block `V` avoiding
/// the scopes of `exclude`, up to `max_block` scopes (all of them when `None`).
pub fn is_blockwise_dense_with(
    d: &DistributionTable,
    delta: &DensityParam,
    exclude: &Block,
    max_block: Option<usize>,
) -> Result<DenseReport> {
    let m = d.space.m();
    let free = m - exclude.len();
    if max_block.is_none() && m > MAX_EXHAUSTIVE_SCOPES {
        return Err(Error::ResourceLimit(format!(
            "exhaustive block enumeration over {m} scopes (cap {MAX_EXHAUSTIVE_SCOPES}); pass a block-size cap"
        )));
    }
    let cap = max_block.unwrap_or(free).min(free);
    let excluded = exclude.mask();
    let mut best: Option<(Rational, usize, Violation)> = None;
    for vmask in 1u32..1 << m {
        let size = vmask.count_ones() as usize;
        if vmask & excluded != 0 || size > cap {
            continue;
        }
        for (key, a) in d.marginal(vmask) {
            let block = d.block_of(vmask, key);
            let b = d.null_block(&block);
            if !delta.violates(&a, &b) {
                continue;
            }
            let score = delta.score(&a, &b);
            let better = match &best {
                None => true,
                Some((s, len, _)) => score > *s || (score == *s && size > *len),
            };
            if better {
                best = Some((score, size, Violation { block, mass: a, null_mass: b }));
            }
        }
    }
    Ok(DenseReport { dense: best.is_none(), witness: best.map(|(_, _, v)| v), partial: cap < free, max_block: cap })
}

/// Exhaustive blockwise-density test.
pub fn is_blockwise_dense(d: &DistributionTable, delta: &DensityParam) -> Result<DenseReport> {
    is_blockwise_dense_with(d, delta, &Block::default(), None)
}

/// Outcome of a CBD test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CbdReport {
    pub cbd: bool,
    /// The fixed block found, when the test passes.
    pub fixed: Option<Block>,
    /// Density report off the best candidate block.
    pub dense: DenseReport,
}

/// `d`-CBD: some block of at most `d` scopes is fixed with probability 1 and the
/// distribution off it is blockwise-dense.
///
/// Only sub-blocks of the constant coordinates can be fixed, and enlarging the block
/// only removes density constraints, so blocks of size `min(d, #constant)` suffice.
pub fn is_cbd(d: &DistributionTable, max_fixed: usize, delta: &DensityParam) -> Result<CbdReport> {
    let constant = d.fixed_block();
    let size = max_fixed.min(constant.len());
    let mut first: Option<DenseReport> = None;
    for pick in subsets_of_size(constant.len(), size) {
        let block = Block {
            scopes: pick.iter().map(|&i| constant.scopes[i]).collect(),
            codes: pick.iter().map(|&i| constant.codes[i]).collect(),
        };
        let report = is_blockwise_dense_with(d, delta, &block, None)?;
        if report.dense {
            return Ok(CbdReport { cbd: true, fixed: Some(block), dense: report });
        }
        first.get_or_insert(report);
    }
    Ok(CbdReport { cbd: false, fixed: None, dense: first.expect("at least one candidate block") })
}

/// Position subsets of `0..len` with `size` elements, in lexicographic order.
fn subsets_of_size(len: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, len: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..len {
            cur.push(i);
            rec(i + 1, len, size, cur, out);
            cur.pop();
        }
    }
    rec(0, len, size, &mut cur, &mut out);
    out
}

/// One removal of the truncation loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncateStep {
    pub removed: u64,
    /// `η_i`: fraction of the background mass of the current set removed.
    #[serde(serialize_with = "ser_rational")]
    pub null_fraction: Rational,
    /// Fraction of the `D`-mass of the current set removed.
    #[serde(serialize_with = "ser_rational")]
    pub mass_fraction: Rational,
    /// `mass_fraction ≥ η_i·(p/2^k)^{−t}`.
    pub tradeoff_ok: bool,
}

/// Result of truncating a set.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncateOutcome {
    pub kept: InstanceSet,
    pub removed: Vec<u64>,
    pub steps: Vec<TruncateStep>,
    /// `n_eff = ⌈ln(1/θ)⌉ + 1`, standing in for `n` in the mass guarantee.
    pub n_eff: u64,
    /// `Pr_{D(p)}[A'] ≥ (1 − n_eff·(p/2^k)^t)·Pr_{D(p)}[A]`.
    pub mass_bound_ok: bool,
}

/// `(p/2^k)^t`.
fn scope_rate(space: &ScopeSpace, t_param: usize) -> Rational {
    let base = space.p() / Rational::from_integer(BigInt::one() << space.k());
    num_traits::pow(base, t_param)
}

fn effective_n(theta: &Rational) -> u64 {
    let ln_inv = -theta.to_f64().unwrap_or(f64::MIN_POSITIVE).max(f64::MIN_POSITIVE).ln();
    ln_inv.max(0.0).ceil() as u64 + 1
}

/// Repeatedly removes the instance maximizing `Pr_{D|A}[I] / Pr_{D(p)|A}[I]` while
/// that ratio reaches `2^{kt}p^{−t}` and `Pr_D[A] > θ`. Ties go to the lowest id.
pub fn truncate(d: &DistributionTable, set: &InstanceSet, t_param: usize, theta: &Rational) -> TruncateOutcome {
    let rate = scope_rate(&d.space, t_param);
    let threshold = rate.recip();
    let mut kept = set.clone();
    let mut d_mass = d.prob_of(&kept);
    let mut n_mass = d.null_prob_of(&kept);
    let start_null = n_mass.clone();
    let mut removed = Vec::new();
    let mut steps = Vec::new();
    while d_mass > *theta && !n_mass.is_zero() {
        let mut best: Option<(Rational, u64)> = None;
        for (id, w) in d.support() {
            if !kept.contains(id) {
                continue;
            }
            let ratio = w / d.null_prob(id);
            if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
                best = Some((ratio, id));
            }
        }
        let Some((ratio, id)) = best else { break };
        // Pr_{D|A}[I] / Pr_{D(p)|A}[I] = ratio · Pr_{D(p)}[A] / Pr_D[A].
        if ratio * &n_mass / &d_mass < threshold {
            break;
        }
        let null_fraction = d.null_prob(id) / &n_mass;
        let mass_fraction = d.mass(id) / &d_mass;
        let tradeoff_ok = mass_fraction >= &null_fraction * &threshold;
        steps.push(TruncateStep { removed: id, null_fraction, mass_fraction, tradeoff_ok });
        d_mass -= d.mass(id);
        n_mass -= d.null_prob(id);
        kept.remove(id);
        removed.push(id);
    }
    let n_eff = effective_n(theta);
    let floor = (Rational::one() - Rational::from_integer(BigInt::from(n_eff)) * &rate) * &start_null;
    TruncateOutcome { mass_bound_ok: n_mass >= floor, kept, removed, steps, n_eff }
}

/// Knobs of the decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeParams {
    pub delta: DensityParam,
    pub t_param: usize,
    /// Stand-in for `exp(−n)` in the small-mass tests.
    pub theta: Rational,
}

impl DecomposeParams {
    /// θ defaults to `exp(−n)`, converted exactly from its floating-point value.
    pub fn new(space: &ScopeSpace, delta: Rational, t_param: usize) -> Result<Self> {
        let theta = Rational::from_float((-(space.n() as f64)).exp())
            .ok_or_else(|| Error::Internal("exp(-n) is not finite".into()))?;
        Ok(DecomposeParams { delta: DensityParam::new(delta)?, t_param, theta })
    }
}

/// One CBD part `A_i` with its fixed block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CbdPart {
    pub instances: Vec<u64>,
    pub fixed: Block,
}

/// Output of [`decompose`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CbdPartition {
    pub parts: Vec<CbdPart>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
    #[serde(serialize_with = "ser_rational")]
    pub delta: Rational,
    pub t_param: usize,
    #[serde(serialize_with = "ser_rational")]
    pub p: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub theta: Rational,
    /// Calls of the recursive procedure, including the terminal one.
    pub calls: usize,
    /// Number of sets folded into `C`.
    pub c_events: usize,
    /// Every truncation kept its mass guarantee and per-step trade-off.
    pub truncations_ok: bool,
    pub trace: Vec<String>,
}

/// Splits `D`'s instance space into CBD parts, a set `B` of small background mass and
/// a set `C` of small `D`-mass.
pub fn decompose(d: &DistributionTable, params: &DecomposeParams) -> Result<CbdPartition> {
    let space = &d.space;
    let universe = d.instance_count();
    // 2^{−kt}·p^t = (p/2^k)^t.
    let small_null = scope_rate(space, params.t_param);
    let mut out = CbdPartition {
        parts: Vec::new(),
        b: Vec::new(),
        c: Vec::new(),
        delta: params.delta.delta().clone(),
        t_param: params.t_param,
        p: space.p().clone(),
        theta: params.theta.clone(),
        calls: 0,
        c_events: 0,
        truncations_ok: true,
        trace: Vec::new(),
    };
    let mut b_set = InstanceSet::empty(universe);
    let mut c_set = InstanceSet::empty(universe);
    let mut current = InstanceSet::full(universe);
    loop {
        out.calls += 1;
        let call = out.calls;
        let mut line = format!("call {call}: |A|={}", current.len());
        let d_mass = d.prob_of(&current);
        let n_mass = d.null_prob_of(&current);
        let _ = write!(line, " D={} N={}", rational_string(&d_mass), rational_string(&n_mass));
        if current.is_empty() {
            out.trace.push(line + " -> empty");
            break;
        }
        if d_mass.is_zero() {
            c_set.union_with(&current);
            out.c_events += 1;
            out.trace.push(line + " -> zero D-mass, C");
            break;
        }
        let cond = d.conditioned(&current)?;
        if is_blockwise_dense(&cond, &params.delta)?.dense {
            out.parts.push(CbdPart { instances: current.ids(), fixed: Block::default() });
            out.trace.push(line + " -> dense part");
            break;
        }
        if n_mass <= small_null {
            b_set.union_with(&current);
            out.trace.push(line + " -> small background mass, B");
            break;
        }
        let trunc = truncate(d, &current, params.t_param, &params.theta);
        out.truncations_ok &= trunc.mass_bound_ok && trunc.steps.iter().all(|s| s.tradeoff_ok);
        for &id in &trunc.removed {
            b_set.insert(id);
        }
        let _ = write!(line, " truncated={}", trunc.removed.len());
        let kept = trunc.kept;
        let kept_mass = d.prob_of(&kept);
        if kept_mass <= params.theta {
            c_set.union_with(&kept);
            out.c_events += 1;
            out.trace.push(line + " -> small D-mass, C");
            break;
        }
        let cond = d.conditioned(&kept)?;
        let Some(fixed) = choose_fixed_block(&cond, &params.delta)? else {
            out.parts.push(CbdPart { instances: kept.ids(), fixed: Block::default() });
            out.trace.push(line + " -> dense after truncation, part");
            break;
        };
        let codec = d.codec;
        let (a0, a1): (Vec<u64>, Vec<u64>) = kept.iter().partition(|&id| fixed.matches(&codec, id));
        let _ = write!(line, " U={:?} I*={:?} -> part |A0|={}", fixed.scopes, fixed.codes, a0.len());
        out.trace.push(line);
        out.parts.push(CbdPart { instances: a0, fixed });
        current = InstanceSet::from_ids(universe, a1);
    }
    out.b = b_set.ids();
    out.c = c_set.ids();
    Ok(out)
}

/// A maximal violating block value of `D|A'`, certified: `D|A'` conditioned on it is
/// blockwise-dense off the block. `None` when `D|A'` is itself dense.
fn choose_fixed_block(cond: &DistributionTable, delta: &DensityParam) -> Result<Option<Block>> {
    let m = cond.space.m();
    let mut chosen = if m <= EXHAUSTIVE_BLOCK_SCOPES {
        largest_violating_block(cond, delta)
    } else {
        greedy_violating_block(cond, delta)
    };
    let Some(mut block) = chosen.take() else {
        return Ok(None);
    };
    // Any violation of the conditional off the block extends to a violation of the
    // unconditioned table on the union, so growing by the witness keeps the block
    // violating; it stops once the conditional is dense.
    loop {
        let part = cond.conditioned_on(&block)?;
        let report = is_blockwise_dense_with(&part, delta, &block, None)?;
        match report.witness {
            None => return Ok(Some(block)),
            Some(v) => {
                if m <= EXHAUSTIVE_BLOCK_SCOPES {
                    return Err(Error::Internal(format!(
                        "maximum-size violating block {:?} is not maximal: {:?} violates off it",
                        block.scopes, v.block.scopes
                    )));
                }
                block = merge_blocks(&block, &v.block);
            }
        }
    }
}

fn merge_blocks(a: &Block, b: &Block) -> Block {
    let mut pairs: Vec<(usize, u32)> = a.scopes.iter().copied().zip(a.codes.iter().copied()).collect();
    pairs.extend(b.scopes.iter().copied().zip(b.codes.iter().copied()));
    pairs.sort_unstable();
    pairs.dedup_by_key(|p| p.0);
    Block { scopes: pairs.iter().map(|p| p.0).collect(), codes: pairs.iter().map(|p| p.1).collect() }
}

/// Most massive violating value of `vmask`, ties to the lowest packed key.
fn heaviest_violation(
    cond: &DistributionTable,
    delta: &DensityParam,
    vmask: u32,
    within: Option<&Block>,
) -> Option<Block> {
    let mut best: Option<(Rational, Block)> = None;
    for (key, a) in cond.marginal(vmask) {
        let block = cond.block_of(vmask, key);
        if within.is_some_and(|w| {
            !w.scopes
                .iter()
                .zip(&w.codes)
                .all(|(s, c)| block.scopes.iter().position(|x| x == s).is_some_and(|i| block.codes[i] == *c))
        }) {
            continue;
        }
        if delta.violates(&a, &cond.null_block(&block)) && best.as_ref().is_none_or(|(w, _)| a > *w) {
            best = Some((a, block));
        }
    }
    best.map(|(_, b)| b)
}

/// Violating block of maximum size, ties to the lowest scope mask.
fn largest_violating_block(cond: &DistributionTable, delta: &DensityParam) -> Option<Block> {
    let m = cond.space.m();
    let mut masks: Vec<u32> = (1u32..1 << m).collect();
    masks.sort_by_key(|&v| (std::cmp::Reverse(v.count_ones()), v));
    masks.into_iter().find_map(|vmask| heaviest_violation(cond, delta, vmask, None))
}

/// Grows the heaviest violating single scope one scope at a time while some value
/// extending the current one still violates.
fn greedy_violating_block(cond: &DistributionTable, delta: &DensityParam) -> Option<Block> {
    let m = cond.space.m();
    let mut block = (0..m).find_map(|s| heaviest_violation(cond, delta, 1 << s, None))?;
    loop {
        let base = block.mask();
        let next = (0..m)
            .filter(|s| base >> s & 1 == 0)
            .find_map(|s| heaviest_violation(cond, delta, base | 1 << s, Some(&block)));
        match next {
            Some(b) => block = b,
            None => return Some(block),
        }
    }
}

/// Per-part outcome of [`verify_partition`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartCheck {
    pub size: usize,
    pub fixed_len: usize,
    /// The recorded block is fixed and the conditional is dense off it.
    pub cbd: bool,
    /// `|U| ≤ (2/δ)·t`.
    pub block_within_bound: bool,
}

/// Re-check of a partition against the distribution it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub disjoint: bool,
    pub exhaustive: bool,
    /// Instances listed more than once, and instances never listed (first few).
    pub duplicated: Vec<u64>,
    pub missing: Vec<u64>,
    pub parts: Vec<PartCheck>,
    pub block_bound: Option<usize>,
    #[serde(serialize_with = "ser_rational")]
    pub b_null_mass: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub b_bound: Rational,
    pub b_ok: bool,
    #[serde(serialize_with = "ser_rational")]
    pub c_mass: Rational,
    /// `c_events·θ`.
    #[serde(serialize_with = "ser_rational")]
    pub c_bound: Rational,
    pub c_ok: bool,
    /// `Σ Pr_D[A_i] + Pr_D[B] + Pr_D[C] = 1`.
    pub mass_accounted: bool,
    pub all_ok: bool,
}

/// Checks disjointness and exhaustiveness, per-part CBD with the recorded block,
/// `|U| ≤ (2/δ)t`, `Pr_{D(p)}[B] ≤ n^{k+1}(p/2^k)^t` and `Pr_D[C] ≤ c_events·θ`.
pub fn verify_partition(part: &CbdPartition, d: &DistributionTable) -> Result<PartitionReport> {
    let universe = d.instance_count();
    let delta = DensityParam::new(part.delta.clone())?;
    let mut seen = vec![0u8; universe as usize];
    let mut duplicated = Vec::new();
    let lists = part.parts.iter().map(|p| &p.instances).chain([&part.b, &part.c]);
    for list in lists {
        for &id in list {
            if id >= universe {
                duplicated.push(id);
                continue;
            }
            seen[id as usize] = seen[id as usize].saturating_add(1);
            if seen[id as usize] == 2 {
                duplicated.push(id);
            }
        }
    }
    let missing: Vec<u64> = (0..universe).filter(|&id| seen[id as usize] == 0).collect();
    let block_bound = delta.block_bound(part.t_param);

    let mut parts = Vec::with_capacity(part.parts.len());
    let mut accounted = Rational::zero();
    for p in &part.parts {
        let set = InstanceSet::from_ids(universe, p.instances.iter().copied().filter(|&id| id < universe));
        accounted += d.prob_of(&set);
        let cbd = match d.conditioned(&set) {
            Ok(cond) => {
                let fixed = cond.support().all(|(id, _)| p.fixed.matches(&d.codec, id));
                fixed && is_blockwise_dense_with(&cond, &delta, &p.fixed, None)?.dense
            }
            Err(_) => false,
        };
        parts.push(PartCheck {
            size: p.instances.len(),
            fixed_len: p.fixed.len(),
            cbd,
            block_within_bound: block_bound.is_none_or(|b| p.fixed.len() <= b),
        });
    }
    let b_set = InstanceSet::from_ids(universe, part.b.iter().copied().filter(|&id| id < universe));
    let c_set = InstanceSet::from_ids(universe, part.c.iter().copied().filter(|&id| id < universe));
    let space = &d.space;
    let b_null_mass = d.null_prob_of(&b_set);
    let b_bound = Rational::from_integer(num_traits::pow(BigInt::from(space.n()), space.k() + 1))
        * scope_rate(space, part.t_param);
    let c_mass = d.prob_of(&c_set);
    let c_bound = Rational::from_integer(BigInt::from(part.c_events)) * &part.theta;
    accounted += d.prob_of(&b_set) + &c_mass;

    let disjoint = duplicated.is_empty();
    let exhaustive = missing.is_empty();
    let b_ok = b_null_mass <= b_bound;
    let c_ok = c_mass <= c_bound;
    let mass_accounted = accounted.is_one();
    let all_ok =
        disjoint && exhaustive && b_ok && c_ok && mass_accounted && parts.iter().all(|p| p.cbd && p.block_within_bound);
    duplicated.truncate(16);
    Ok(PartitionReport {
        disjoint,
        exhaustive,
        duplicated,
        missing: missing.into_iter().take(16).collect(),
        parts,
        block_bound,
        b_null_mass,
        b_bound,
        b_ok,
        c_mass,
        c_bound,
        c_ok,
        mass_accounted,
        all_ok,
    })
}

/// Partition dump: parameters, parts with fixed blocks, `B`, `C`, trace and report.
pub fn partition_json(part: &CbdPartition, report: &PartitionReport) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(part)?;
    v["report"] = serde_json::to_value(report)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::oracle::TinyUniverse;
    use crate::scalar::ratio;

    fn space(n: usize, scopes: Vec<Vec<usize>>, p: Rational) -> Arc<ScopeSpace> {
        let k = scopes[0].len();
        Arc::new(ScopeSpace::restricted(n, k, scopes, p).unwrap())
    }

    fn small() -> Arc<ScopeSpace> {
        space(4, vec![vec![0, 1], vec![1, 2], vec![2, 3]], ratio(1, 3))
    }

    fn half() -> DensityParam {
        DensityParam::new(ratio(1, 2)).unwrap()
    }

    /// Every value of every block, including zero-mass ones, compared as `a² > b`.
    fn dense_oracle(d: &DistributionTable, exclude: u32) -> bool {
        let m = d.space().m();
        let per = 1u64 << d.codec().bits_per_scope();
        for vmask in 1u32..1 << m {
            if vmask & exclude != 0 {
                continue;
            }
            let scopes: Vec<usize> = (0..m).filter(|s| vmask >> s & 1 == 1).collect();
            for value in 0..per.pow(scopes.len() as u32) {
                let codes: Vec<u32> = (0..scopes.len()).map(|i| ((value / per.pow(i as u32)) % per) as u32).collect();
                let block = Block { scopes: scopes.clone(), codes };
                let a: Rational =
                    (0..d.instance_count()).filter(|&id| block.matches(d.codec(), id)).map(|id| d.mass(id)).sum();
                if a.clone() * a > d.null_block(&block) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn codec_round_trips() {
        let s = small();
        let c = InstanceCodec::new(&s).unwrap();
        assert_eq!(c.count(), 512);
        for id in [0, 1, 77, 511] {
            assert_eq!(c.id(&c.codes(id)), id);
        }
        assert_eq!(c.unpack(c.project(0b101_011_110, 0b101), 0b101), vec![0b110, 0b101]);
    }

    #[test]
    fn instance_set_ops() {
        let mut a = InstanceSet::empty(130);
        a.insert(3);
        a.insert(129);
        assert_eq!(a.ids(), vec![3, 129]);
        a.remove(3);
        assert_eq!(a.len(), 1);
        assert_eq!(InstanceSet::full(130).len(), 130);
    }

    #[test]
    fn null_is_dense_and_one_part() {
        let d = DistributionTable::null(small()).unwrap();
        assert!(is_blockwise_dense(&d, &half()).unwrap().dense);
        let params = DecomposeParams::new(d.space(), ratio(1, 2), 2).unwrap();
        let part = decompose(&d, &params).unwrap();
        assert_eq!(part.parts.len(), 1);
        assert!(part.parts[0].fixed.is_empty());
        assert!(part.b.is_empty() && part.c.is_empty());
        assert!(verify_partition(&part, &d).unwrap().all_ok);
    }

    #[test]
    fn point_mass_witness_is_the_whole_space() {
        let d = DistributionTable::point_mass(small(), 77).unwrap();
        let r = is_blockwise_dense(&d, &half()).unwrap();
        assert!(!r.dense);
        let w = r.witness.unwrap();
        assert_eq!(w.block.scopes, vec![0, 1, 2]);
        assert_eq!(w.block.codes, d.codec().codes(77));
        assert_eq!(w.mass, Rational::one());
        assert_eq!(&w.null_mass, d.null_prob(77));
    }

    #[test]
    fn mixture_with_spike_is_not_dense() {
        let null = DistributionTable::null(small()).unwrap();
        let spike = DistributionTable::point_mass(small(), 5).unwrap();
        let d = DistributionTable::mixture(&[(ratio(1, 2), &null), (ratio(1, 2), &spike)]).unwrap();
        assert!(!is_blockwise_dense(&d, &half()).unwrap().dense);
        assert!(!dense_oracle(&d, 0));
    }

    #[test]
    fn conditioning_on_a_scope_is_cbd_with_that_scope() {
        let null = DistributionTable::null(small()).unwrap();
        let fixed = Block { scopes: vec![1], codes: vec![0b011] };
        let d = null.conditioned_on(&fixed).unwrap();
        assert!(!is_blockwise_dense(&d, &half()).unwrap().dense);
        let r = is_cbd(&d, 1, &half()).unwrap();
        assert!(r.cbd);
        assert_eq!(r.fixed, Some(fixed));
        assert!(!is_cbd(&d, 0, &half()).unwrap().cbd);
    }

    #[test]
    fn density_matches_oracle_on_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let d = DistributionTable::fuzz(small(), &mut rng).unwrap();
            assert_eq!(is_blockwise_dense(&d, &half()).unwrap().dense, dense_oracle(&d, 0));
            let fixed = d.fixed_block();
            let ex = is_blockwise_dense_with(&d, &half(), &fixed, None).unwrap();
            assert_eq!(ex.dense, dense_oracle(&d, fixed.mask()));
        }
    }

    #[test]
    fn capped_blocks_are_flagged_partial() {
        let d = DistributionTable::point_mass(small(), 9).unwrap();
        let r = is_blockwise_dense_with(&d, &half(), &Block::default(), Some(1)).unwrap();
        assert!(r.partial);
        assert_eq!(r.witness.unwrap().block.len(), 1);
    }

    #[test]
    fn delta_limits() {
        assert!(DensityParam::new(ratio(1, 1000)).is_err());
        assert!(DensityParam::new(ratio(-1, 2)).is_err());
        let one = DensityParam::new(ratio(1, 1)).unwrap();
        assert!(!one.violates(&Rational::one(), &ratio(1, 100)));
        assert_eq!(half().block_bound(3), Some(12));
        assert_eq!(DensityParam::new(Rational::zero()).unwrap().block_bound(1), None);
    }

    #[test]
    fn truncate_leaves_background_alone() {
        let d = DistributionTable::null(small()).unwrap();
        let all = InstanceSet::full(d.instance_count());
        let out = truncate(&d, &all, 2, &ratio(1, 100));
        assert!(out.removed.is_empty());
        assert!(out.mass_bound_ok);
    }

    #[test]
    fn truncate_removes_heavy_spikes_with_tradeoff() {
        let null = DistributionTable::null(small()).unwrap();
        // The all-included instance is the least likely under the background.
        let heavy = null.codec().id(&[1, 1, 1]);
        let spike = null.point(heavy).unwrap();
        let d = DistributionTable::mixture(&[(ratio(1, 2), &null), (ratio(1, 2), &spike)]).unwrap();
        let out = truncate(&d, &InstanceSet::full(d.instance_count()), 1, &ratio(1, 100));
        assert_eq!(out.removed, vec![heavy]);
        assert!(out.steps.iter().all(|s| s.tradeoff_ok));
        assert!(out.mass_bound_ok);
    }

    #[test]
    fn fuzzed_decompositions_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let d = DistributionTable::fuzz(small(), &mut rng).unwrap();
            let params = DecomposeParams::new(d.space(), ratio(1, 2), 2).unwrap();
            let part = decompose(&d, &params).unwrap();
            let report = verify_partition(&part, &d).unwrap();
            assert!(report.all_ok, "{report:?}\n{:?}", part.trace);
        }
    }

    #[test]
    fn greedy_path_on_larger_space() {
        let s = space(5, vec![vec![0], vec![1], vec![2], vec![3], vec![4]], ratio(1, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let d = DistributionTable::fuzz(s.clone(), &mut rng).unwrap();
            let params = DecomposeParams::new(d.space(), ratio(1, 2), 1).unwrap();
            let part = decompose(&d, &params).unwrap();
            assert!(verify_partition(&part, &d).unwrap().parts.iter().all(|p| p.cbd));
        }
    }

    #[test]
    fn corrupted_partition_is_reported() {
        let null = DistributionTable::null(small()).unwrap();
        let spike = null.point(3).unwrap();
        let d = DistributionTable::mixture(&[(ratio(1, 4), &null), (ratio(3, 4), &spike)]).unwrap();
        // t = 3 keeps the spike below the truncation ratio, so it lands in a fixed part.
        let params = DecomposeParams::new(d.space(), ratio(1, 2), 3).unwrap();
        let part = decompose(&d, &params).unwrap();
        assert!(verify_partition(&part, &d).unwrap().all_ok);

        let mut dropped = part.clone();
        let gone = dropped.parts[0].instances.pop().unwrap();
        let r = verify_partition(&dropped, &d).unwrap();
        assert!(!r.exhaustive && !r.all_ok);
        assert_eq!(r.missing, vec![gone]);

        let mut doubled = part.clone();
        doubled.b.push(part.parts[0].instances[0]);
        assert!(!verify_partition(&doubled, &d).unwrap().disjoint);

        let mut wrong_block = part.clone();
        let target = wrong_block.parts.iter_mut().find(|p| !p.fixed.is_empty()).unwrap();
        target.fixed = Block::default();
        assert!(!verify_partition(&wrong_block, &d).unwrap().all_ok);
    }

    #[test]
    fn planted_tables_match_the_joint_oracle() {
        let s = space(4, vec![vec![0, 1, 2], vec![1, 2, 3]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let u = TinyUniverse::new(s.clone(), pred.clone()).unwrap();
        let joint = u.exact_planted_table(Exec::Sequential).unwrap();
        let marginal = DistributionTable::planted_marginal(s.clone(), &pred, Exec::Parallel).unwrap();
        let given = DistributionTable::planted_given(s, &pred, 0b0110).unwrap();
        let sixteen = Rational::from_integer(BigInt::from(16));
        for id in 0..marginal.instance_count() {
            let col: Rational = (0..16u64).map(|x| joint.get(x, id as usize).clone()).sum();
            assert_eq!(marginal.mass(id), col);
            assert_eq!(given.mass(id), joint.get(0b0110, id as usize) * &sixteen);
        }
    }
}
