use std::sync::Arc;

use rand::Rng;

use super::predicate::{sign_mask, Predicate};
use super::space::ScopeSpace;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Assignment `x ∈ {-1,1}^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment(Vec<i8>);

impl Assignment {
    pub fn new(x: Vec<i8>) -> Result<Self> {
        check_signs(&x, "x")?;
        Ok(Assignment(x))
    }

    pub fn all_ones(n: usize) -> Self {
        Assignment(vec![1; n])
    }

    /// Assignment whose `-1` positions are the set bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Assignment((0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().enumerate().filter(|(_, &v)| v == -1).fold(0, |acc, (i, _)| acc | (1 << i))
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Instance `I = (y, b)`: inclusion signs per scope (`-1` = included) and `k` negation
/// bits for every scope, present or not.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    space: Arc<ScopeSpace>,
    y: Vec<i8>,
    b: Vec<i8>,
}

/// Values `I_U` of an instance on a sorted set of scopes `U`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedInstance {
    pub scopes: Vec<usize>,
    pub y: Vec<i8>,
    /// `k` signs per scope of `scopes`, in the same order.
    pub b: Vec<i8>,
}

impl RestrictedInstance {
    pub fn empty() -> Self {
        RestrictedInstance { scopes: Vec::new(), y: Vec::new(), b: Vec::new() }
    }

    /// Checks shape and sign values against a space.
    pub fn validate(&self, space: &ScopeSpace) -> Result<()> {
        let k = space.k();
        if self.y.len() != self.scopes.len() || self.b.len() != k * self.scopes.len() {
            return Err(Error::InvalidRestriction(format!(
                "{} scopes need {} inclusion signs and {} negation signs",
                self.scopes.len(),
                self.scopes.len(),
                k * self.scopes.len()
            )));
        }
        if self.scopes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRestriction("scope list must be strictly increasing".into()));
        }
        if self.scopes.iter().any(|&s| s >= space.m()) {
            return Err(Error::InvalidRestriction("scope id outside the space".into()));
        }
        if self.y.iter().chain(&self.b).any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidRestriction("signs must be ±1".into()));
        }
        Ok(())
    }

    /// Position of a scope inside this restriction.
    pub fn position(&self, scope: usize) -> Option<usize> {
        self.scopes.binary_search(&scope).ok()
    }

    /// Builds the restriction from per-scope codes (see [`Instance::scope_code`]).
    pub fn from_codes(scopes: Vec<usize>, codes: &[u32], k: usize) -> Self {
        let y = codes.iter().map(|c| if c & 1 == 1 { -1 } else { 1 }).collect();
        let b = codes.iter().flat_map(|c| (0..k).map(move |j| if c >> (j + 1) & 1 == 1 { -1 } else { 1 })).collect();
        RestrictedInstance { scopes, y, b }
    }
}

fn check_signs(v: &[i8], name: &str) -> Result<()> {
    if v.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidInput(format!("{name} must contain only ±1")));
    }
    Ok(())
}

impl Instance {
    pub fn new(space: Arc<ScopeSpace>, y: Vec<i8>, b: Vec<i8>) -> Result<Self> {
        if y.len() != space.m() || b.len() != space.k() * space.m() {
            return Err(Error::InvalidInput(format!(
                "instance over {} scopes needs |y| = {} and |b| = {} (got {} and {})",
                space.m(),
                space.m(),
                space.k() * space.m(),
                y.len(),
                b.len()
            )));
        }
        check_signs(&y, "y")?;
        check_signs(&b, "b")?;
        Ok(Instance { space, y, b })
    }

    /// No scope included, all negation bits `+1`.
    pub fn empty(space: Arc<ScopeSpace>) -> Self {
        let (m, k) = (space.m(), space.k());
        Instance { space, y: vec![1; m], b: vec![1; k * m] }
    }

    /// Builds an instance from one code per scope.
    pub fn from_codes(space: Arc<ScopeSpace>, codes: &[u32]) -> Self {
        let k = space.k();
        let all: Vec<usize> = (0..space.m()).collect();
        let r = RestrictedInstance::from_codes(all, codes, k);
        Instance { space, y: r.y, b: r.b }
    }

    pub fn space(&self) -> &Arc<ScopeSpace> {
        &self.space
    }

    pub fn y(&self) -> &[i8] {
        &self.y
    }

    pub fn b(&self) -> &[i8] {
        &self.b
    }

    pub fn b_scope(&self, s: usize) -> &[i8] {
        let k = self.space.k();
        &self.b[s * k..(s + 1) * k]
    }

    pub fn is_included(&self, s: usize) -> bool {
        self.y[s] == -1
    }

    /// Ids of included scopes in increasing order.
    pub fn included(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&s| self.y[s] == -1).collect()
    }

    /// `m(y, b)`.
    pub fn constraint_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == -1).count()
    }

    /// Scope code: bit 0 set iff included, bit `j+1` set iff `b_{S,j} = -1`.
    pub fn scope_code(&self, s: usize) -> u32 {
        u32::from(self.y[s] == -1) | sign_mask(self.b_scope(s)) << 1
    }

    /// `I_U` for a sorted scope set `U`.
    pub fn restrict_to(&self, u: &[usize]) -> RestrictedInstance {
        let y = u.iter().map(|&s| self.y[s]).collect();
        let b = u.iter().flat_map(|&s| self.b_scope(s).iter().copied()).collect();
        RestrictedInstance { scopes: u.to_vec(), y, b }
    }

    /// Overwrites the coordinates in `U` with `I_U`.
    pub fn merged(&self, r: &RestrictedInstance) -> Result<Instance> {
        r.validate(&self.space)?;
        let k = self.space.k();
        let mut out = self.clone();
        for (pos, &s) in r.scopes.iter().enumerate() {
            out.y[s] = r.y[pos];
            out.b[s * k..(s + 1) * k].copy_from_slice(&r.b[pos * k..(pos + 1) * k]);
        }
        Ok(out)
    }

    /// `-1` mask of `b_S ∘ x_S`.
    pub fn literal_mask(&self, s: usize, x: &[i8]) -> u32 {
        let scope = self.space.scope(s);
        self.b_scope(s)
            .iter()
            .zip(scope)
            .enumerate()
            .filter(|(_, (&bj, &i))| bj * x[i] == -1)
            .fold(0, |acc, (j, _)| acc | (1 << j))
    }

    /// `F(x, y, b) = Σ_S 1(y_S = -1)·P(b_S ∘ x_S)`.
    pub fn objective(&self, pred: &Predicate, x: &Assignment) -> Result<usize> {
        if x.len() != self.space.n() {
            return Err(Error::InvalidInput(format!("assignment has length {} but n = {}", x.len(), self.space.n())));
        }
        if pred.k() != self.space.k() {
            return Err(Error::InvalidInput("predicate arity differs from scope arity".into()));
        }
        Ok(self.objective_unchecked(pred, x.values()))
    }

    fn objective_unchecked(&self, pred: &Predicate, x: &[i8]) -> usize {
        (0..self.y.len()).filter(|&s| self.y[s] == -1 && pred.eval(self.literal_mask(s, x))).count()
    }

    /// Exact maximum of the objective over all `2^n` assignments. Among maximizers the
    /// lexicographically smallest is returned, comparing `x_0` first with `+1 < -1`.
    pub fn opt_brute(&self, pred: &Predicate, exec: Exec) -> Result<(usize, Assignment)> {
        let n = self.space.n();
        if n > 24 {
            return Err(Error::ResourceLimit(format!("opt_brute enumerates 2^{n} assignments; limit is n ≤ 24")));
        }
        if pred.k() != self.space.k() {
            return Err(Error::InvalidInput("predicate arity differs from scope arity".into()));
        }
        let lex = |m: u64| -> Vec<i8> { (0..n).map(|i| if m >> (n - 1 - i) & 1 == 1 { -1 } else { 1 }).collect() };
        let chunk_bits = n.min(10);
        let chunks = 1usize << (n - chunk_bits);
        let best = exec.map_indexed(chunks, |c| {
            let mut best = (0usize, u64::MAX);
            for low in 0..1u64 << chunk_bits {
                let m = (c as u64) << chunk_bits | low;
                let v = self.objective_unchecked(pred, &lex(m));
                if best.1 == u64::MAX || v > best.0 {
                    best = (v, m);
                }
            }
            best
        });
        let (value, m) =
            best.into_iter().fold((0usize, u64::MAX), |acc, b| if acc.1 == u64::MAX || b.0 > acc.0 { b } else { acc });
        Ok((value, Assignment(lex(m))))
    }
}

/// Draws `I ~ D(p)` extended with uniform negation bits on every scope.
pub fn sample_null<R: Rng + ?Sized>(space: &Arc<ScopeSpace>, rng: &mut R) -> Instance {
    let p = inclusion_probability(space);
    let m = space.m();
    let k = space.k();
    let y = (0..m).map(|_| if rng.gen_bool(p) { -1 } else { 1 }).collect();
    let b = (0..m * k).map(|_| if rng.gen::<bool>() { -1 } else { 1 }).collect();
    Instance { space: Arc::clone(space), y, b }
}

/// Draws `(x, I) ~ D_*`: uniform `x`; included scopes get `b_S = z ∘ x_S` with `z ~ U_P`;
/// absent scopes get uniform negation bits.
pub fn sample_planted<R: Rng + ?Sized>(
    space: &Arc<ScopeSpace>,
    pred: &Predicate,
    rng: &mut R,
) -> Result<(Assignment, Instance)> {
    if pred.k() != space.k() {
        return Err(Error::InvalidInput("predicate arity differs from scope arity".into()));
    }
    let p = inclusion_probability(space);
    let (n, m, k) = (space.n(), space.m(), space.k());
    let x: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { -1 } else { 1 }).collect();
    let mut y = vec![1i8; m];
    let mut b = vec![1i8; m * k];
    for s in 0..m {
        if rng.gen_bool(p) {
            y[s] = -1;
            let z = pred.sample_planted_z(rng);
            for (j, &i) in space.scope(s).iter().enumerate() {
                let zj = if z >> j & 1 == 1 { -1 } else { 1 };
                b[s * k + j] = zj * x[i];
            }
        } else {
            for j in 0..k {
                b[s * k + j] = if rng.gen::<bool>() { -1 } else { 1 };
            }
        }
    }
    Ok((Assignment(x), Instance { space: Arc::clone(space), y, b }))
}

fn inclusion_probability(space: &ScopeSpace) -> f64 {
    num_traits::ToPrimitive::to_f64(space.p()).unwrap_or(0.0).clamp(0.0, 1.0)
}
