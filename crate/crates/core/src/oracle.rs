//! Brute-force ground truth on tiny universes.
//!
//! Everything here is computed from the sampling definition of the planted and null
//! distributions by exact summation, never from the analytic coefficient formulas.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::csp::{Instance, Predicate, RestrictedInstance, ScopeSpace, VarSet};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fourier::{BasisConsts, BasisIndex};
use crate::scalar::{Rational, Scalar, Surd};

pub const MAX_SCOPES: usize = 6;
pub const MAX_VARS: usize = 8;
/// Largest materialized `(x, I)` table.
pub const MAX_TABLE: usize = 1 << 22;

/// A predicate over a small scope space, small enough for exact enumeration.
#[derive(Clone, Debug)]
pub struct TinyUniverse {
    space: Arc<ScopeSpace>,
    pred: Predicate,
}

/// Joint probabilities indexed by `x_mask · instance_count + instance_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    pub n: usize,
    pub instance_count: usize,
    pub values: Vec<Rational>,
}

impl JointTable {
    pub fn get(&self, x_mask: u64, inst_id: usize) -> &Rational {
        &self.values[x_mask as usize * self.instance_count + inst_id]
    }
}

/// `μ_*|_U` as a function of the full assignment and the scopes outside `U`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalTable {
    pub fix: RestrictedInstance,
    /// Scopes outside `U`, increasing.
    pub free: Vec<usize>,
    pub free_count: usize,
    /// Indexed by `x_mask · free_count + free_id`.
    pub values: Vec<Rational>,
}

impl TinyUniverse {
    pub fn new(space: Arc<ScopeSpace>, pred: Predicate) -> Result<Self> {
        if space.m() > MAX_SCOPES || space.n() > MAX_VARS {
            return Err(Error::ResourceLimit(format!(
                "oracle universes need M ≤ {MAX_SCOPES} and n ≤ {MAX_VARS} (got M = {}, n = {})",
                space.m(),
                space.n()
            )));
        }
        if pred.k() != space.k() {
            return Err(Error::InvalidInput("predicate arity differs from scope arity".into()));
        }
        Ok(TinyUniverse { space, pred })
    }

    pub fn space(&self) -> &Arc<ScopeSpace> {
        &self.space
    }

    pub fn pred(&self) -> &Predicate {
        &self.pred
    }

    /// Number of `(y_S, b_S)` values per scope.
    pub fn codes_per_scope(&self) -> usize {
        1 << (self.space.k() + 1)
    }

    /// Number of instances, if the instance space can be listed.
    pub fn instance_count(&self) -> Result<usize> {
        let per = self.codes_per_scope() as u128;
        let total = per.checked_pow(self.space.m() as u32).unwrap_or(u128::MAX);
        if total > MAX_TABLE as u128 {
            return Err(Error::ResourceLimit(format!("{total} instances exceed the oracle table limit")));
        }
        Ok(total as usize)
    }

    fn table_size(&self, instances: usize) -> Result<usize> {
        let size = instances
            .checked_mul(1usize << self.space.n())
            .filter(|&s| s <= MAX_TABLE)
            .ok_or_else(|| Error::ResourceLimit("joint (x, I) table exceeds the oracle limit".into()))?;
        Ok(size)
    }

    /// Per-scope codes of an instance id (scope 0 is the least significant digit).
    pub fn codes(&self, mut id: usize) -> Vec<u32> {
        let per = self.codes_per_scope();
        (0..self.space.m())
            .map(|_| {
                let c = (id % per) as u32;
                id /= per;
                c
            })
            .collect()
    }

    pub fn instance(&self, id: usize) -> Instance {
        Instance::from_codes(Arc::clone(&self.space), &self.codes(id))
    }

    /// `Pr[y_S, b_S]` under the extended null distribution.
    pub fn null_factor(&self, code: u32) -> Rational {
        let py = if code & 1 == 1 { self.space.p().clone() } else { self.space.q() };
        py / Rational::from_integer(BigInt::one() << self.space.k())
    }

    /// `Pr[y_S, b_S | x]` under the planted distribution.
    pub fn planted_factor(&self, s: usize, code: u32, x_mask: u64) -> Rational {
        if code & 1 == 1 {
            let xs = self
                .space
                .scope(s)
                .iter()
                .enumerate()
                .fold(0u32, |acc, (j, &i)| acc | (((x_mask >> i) & 1) as u32) << j);
            let z = (code >> 1) ^ xs;
            self.space.p() * self.pred.planted_prob(z)
        } else {
            self.null_factor(code)
        }
    }

    /// `Pr_{D(p)}[I]`.
    pub fn null_prob(&self, id: usize) -> Rational {
        self.codes(id).iter().fold(Rational::one(), |acc, &c| acc * self.null_factor(c))
    }

    fn x_weight(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::one() << self.space.n())
    }

    /// `Pr_{D_*}[x, I]` for every pair.
    pub fn exact_planted_table(&self, exec: Exec) -> Result<JointTable> {
        let count = self.instance_count()?;
        self.table_size(count)?;
        let xw = self.x_weight();
        let rows = exec.map_indexed(1 << self.space.n(), |xm| {
            (0..count)
                .map(|id| {
                    self.codes(id)
                        .iter()
                        .enumerate()
                        .fold(xw.clone(), |acc, (s, &c)| acc * self.planted_factor(s, c, xm as u64))
                })
                .collect::<Vec<_>>()
        });
        Ok(JointTable { n: self.space.n(), instance_count: count, values: rows.into_iter().flatten().collect() })
    }

    fn check_nondegenerate(&self) -> Result<()> {
        if self.space.inclusion_is_degenerate() {
            return Err(Error::SingularBasis("density ratios need 0 < p < 1".into()));
        }
        Ok(())
    }

    /// `μ_*(x, I) = Pr_{D_*}[x, I] / (2^{-n}·Pr_{D(p)}[I])`.
    pub fn exact_mu_table(&self, exec: Exec) -> Result<JointTable> {
        self.check_nondegenerate()?;
        let joint = self.exact_planted_table(exec)?;
        let xw = self.x_weight();
        let nulls: Vec<Rational> = (0..joint.instance_count).map(|id| self.null_prob(id)).collect();
        let values =
            joint.values.iter().enumerate().map(|(i, v)| v / (&xw * &nulls[i % joint.instance_count])).collect();
        Ok(JointTable { values, ..joint })
    }

    /// `E_{D_*}[χ_α φ_β ψ_γ]`, summing over `x` and factoring over scopes given `x`.
    pub fn exact_fourier(&self, idx: &BasisIndex, exec: Exec) -> Result<Surd> {
        idx.validate(&self.space)?;
        let consts = if idx.beta.is_empty() { None } else { Some(BasisConsts::<Surd>::new(self.space.p())?) };
        let per = self.codes_per_scope() as u32;
        let terms = exec.map_indexed(1 << self.space.n(), |xm| {
            let xm = xm as u64;
            let mut acc = Surd::from_i64(idx.alpha.character_mask(xm));
            for s in 0..self.space.m() {
                let in_beta = idx.beta.binary_search(&s).is_ok();
                let t = idx.slots_of(s);
                let mut e = Surd::zero();
                for code in 0..per {
                    let pr = self.planted_factor(s, code, xm);
                    if pr.is_zero() {
                        continue;
                    }
                    let bsign = if ((code >> 1) & t).count_ones() % 2 == 0 { 1 } else { -1 };
                    let mut v = Surd::from_rational(&(pr * Rational::from_integer(BigInt::from(bsign))));
                    if in_beta {
                        let y = if code & 1 == 1 { -1 } else { 1 };
                        v = v.mul(consts.as_ref().expect("consts").phi(y));
                    }
                    e = e.add(&v);
                }
                acc = acc.mul(&e);
                if acc.is_zero() {
                    break;
                }
            }
            acc
        });
        let xw = self.x_weight();
        Ok(terms.iter().fold(Surd::zero(), |a, t| a.add(t)).scale(&xw))
    }

    fn fix_vars(&self, fix: &RestrictedInstance) -> VarSet {
        fix.scopes.iter().fold(VarSet::EMPTY, |acc, &s| acc.union(self.space.var_set(s)))
    }

    /// Exact `μ_*|_U`: the density of `(x_{V^c}, I_{U^c})` given `(x_V, I_U)` relative to
    /// uniform `x_{V^c}` and `D(p)` on `U^c`, as a function of the full `x`.
    ///
    /// Where `(x_V, I_U)` itself has zero planted mass, the conditional given `x_V` alone
    /// is used; both agree wherever both are defined because scopes are independent given `x`.
    pub fn exact_conditional(&self, fix: &RestrictedInstance, exec: Exec) -> Result<ConditionalTable> {
        self.check_nondegenerate()?;
        let joint = self.exact_planted_table(exec)?;
        self.exact_conditional_from(&joint, fix)
    }

    /// As [`TinyUniverse::exact_conditional`], reusing a planted table of this universe.
    pub fn exact_conditional_from(&self, joint: &JointTable, fix: &RestrictedInstance) -> Result<ConditionalTable> {
        fix.validate(&self.space)?;
        self.check_nondegenerate()?;
        let per = self.codes_per_scope();
        let m = self.space.m();
        let free: Vec<usize> = (0..m).filter(|s| fix.position(*s).is_none()).collect();
        let free_count = per.pow(free.len() as u32);
        let fix_codes = self.fix_codes(fix);
        let v = self.fix_vars(fix);
        let nx = 1usize << self.space.n();

        let mut free_id_of = vec![0usize; joint.instance_count];
        let mut matches_fix = vec![false; joint.instance_count];
        for (id, slot) in free_id_of.iter_mut().enumerate() {
            let codes = self.codes(id);
            *slot = free.iter().rev().fold(0usize, |acc, &s| acc * per + codes[s] as usize);
            matches_fix[id] = fix.scopes.iter().zip(&fix_codes).all(|(&s, &c)| codes[s] == c);
        }

        // Pr[x_V, I_U] and Pr[x, I_{U^c}] (the latter summed over I_U).
        let mut marg_fix = std::collections::BTreeMap::<u64, Rational>::new();
        let mut marg_free = vec![Rational::zero(); nx * free_count];
        let mut fixed_joint = vec![Rational::zero(); nx * free_count];
        for xm in 0..nx {
            for id in 0..joint.instance_count {
                let pr = joint.get(xm as u64, id);
                if pr.is_zero() {
                    continue;
                }
                let cell = xm * free_count + free_id_of[id];
                marg_free[cell] += pr;
                if matches_fix[id] {
                    fixed_joint[cell] += pr;
                    *marg_fix.entry(xm as u64 & v.0).or_insert_with(Rational::zero) += pr;
                }
            }
        }
        if marg_fix.values().all(|p| p.is_zero()) {
            return Err(Error::UndefinedConditional("the fixed restriction has zero planted mass".into()));
        }
        let px_v = Rational::new(BigInt::one(), BigInt::one() << v.len());
        let base_x = Rational::new(BigInt::one(), BigInt::one() << (self.space.n() - v.len()));
        let free_null: Vec<Rational> = (0..free_count)
            .map(|fid| {
                let mut f = fid;
                (0..free.len()).fold(Rational::one(), |acc, _| {
                    let c = (f % per) as u32;
                    f /= per;
                    acc * self.null_factor(c)
                })
            })
            .collect();
        let mut values = Vec::with_capacity(nx * free_count);
        for xm in 0..nx {
            let mv = marg_fix.get(&(xm as u64 & v.0)).cloned().unwrap_or_else(Rational::zero);
            for (fid, null) in free_null.iter().enumerate() {
                let cell = xm * free_count + fid;
                let cond = if mv.is_zero() { &marg_free[cell] / &px_v } else { &fixed_joint[cell] / &mv };
                values.push(cond / (&base_x * null));
            }
        }
        Ok(ConditionalTable { fix: fix.clone(), free, free_count, values })
    }

    /// `E_{x, I_{U^c} ~ D(p)}[μ_*|_U · χ_α φ_β ψ_γ]` for an index avoiding `U`.
    pub fn conditional_fourier(&self, cond: &ConditionalTable, idx: &BasisIndex) -> Result<Surd> {
        idx.validate(&self.space)?;
        if idx.touches(&cond.fix.scopes) {
            return Err(Error::InvalidIndex("index touches the fixed scopes".into()));
        }
        let consts = if idx.beta.is_empty() { None } else { Some(BasisConsts::<Surd>::new(self.space.p())?) };
        let per = self.codes_per_scope();
        let xw = self.x_weight();
        let mut total = Surd::zero();
        for fid in 0..cond.free_count {
            let mut f = fid;
            let mut weight = xw.clone();
            let mut sign = 1i64;
            let mut phi = Surd::one();
            for &s in &cond.free {
                let c = (f % per) as u32;
                f /= per;
                weight *= self.null_factor(c);
                if ((c >> 1) & idx.slots_of(s)).count_ones() % 2 == 1 {
                    sign = -sign;
                }
                if idx.beta.binary_search(&s).is_ok() {
                    phi = phi.mul(consts.as_ref().expect("consts").phi(if c & 1 == 1 { -1 } else { 1 }));
                }
            }
            let mut inner = Rational::zero();
            for xm in 0..1u64 << self.space.n() {
                let val = &cond.values[xm as usize * cond.free_count + fid];
                if !val.is_zero() {
                    inner += val * Rational::from_integer(BigInt::from(idx.alpha.character_mask(xm)));
                }
            }
            total = total.add(&phi.scale(&(inner * weight * Rational::from_integer(BigInt::from(sign)))));
        }
        Ok(total)
    }

    /// Value of a conditional table at a full assignment and an instance (only the
    /// scopes outside `U` are read).
    pub fn conditional_value<'a>(&self, cond: &'a ConditionalTable, x_mask: u64, inst: &Instance) -> &'a Rational {
        let per = self.codes_per_scope();
        let fid = cond.free.iter().rev().fold(0usize, |acc, &s| acc * per + inst.scope_code(s) as usize);
        &cond.values[x_mask as usize * cond.free_count + fid]
    }

    /// Id of an instance in this universe.
    pub fn instance_id(&self, inst: &Instance) -> usize {
        let per = self.codes_per_scope();
        (0..self.space.m()).rev().fold(0usize, |acc, s| acc * per + inst.scope_code(s) as usize)
    }

    /// Exact `Pr_{D_*}[x_V, I_U] / Pr_{uniform × D(p)}[x_V, I_U]` by marginalizing a
    /// planted joint table of this universe.
    pub fn exact_pi(&self, joint: &JointTable, fix: &RestrictedInstance, x_mask: u64) -> Result<Rational> {
        fix.validate(&self.space)?;
        self.check_nondegenerate()?;
        let v = self.fix_vars(fix);
        let fix_codes = self.fix_codes(fix);
        let matching: Vec<usize> = (0..joint.instance_count)
            .filter(|&id| {
                let codes = self.codes(id);
                fix.scopes.iter().zip(&fix_codes).all(|(&s, &c)| codes[s] == c)
            })
            .collect();
        let mut mass = Rational::zero();
        for xm in (0..1u64 << self.space.n()).filter(|xm| xm & v.0 == x_mask & v.0) {
            for &id in &matching {
                mass += joint.get(xm, id);
            }
        }
        let base = fix_codes
            .iter()
            .fold(Rational::new(BigInt::one(), BigInt::one() << v.len()), |acc, &c| acc * self.null_factor(c));
        Ok(mass / base)
    }

    fn fix_codes(&self, fix: &RestrictedInstance) -> Vec<u32> {
        let k = self.space.k();
        (0..fix.scopes.len())
            .map(|pos| {
                u32::from(fix.y[pos] == -1)
                    | (0..k).fold(0u32, |a, j| a | (u32::from(fix.b[pos * k + j] == -1) << (j + 1)))
            })
            .collect()
    }
}
