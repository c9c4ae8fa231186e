use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{ratio, Rational};

/// Subset of the slot positions `0..k` of a scope, as a bitmask.
pub type SlotMask = u32;

/// `(-1)^{|T ∩ z|}`: the character `Π_{j∈T} z_j` where `z` is encoded by its `-1` positions.
pub fn character(t: SlotMask, z: u32) -> i64 {
    if (t & z).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Encodes a sign vector by the positions holding `-1`.
pub fn sign_mask(z: &[i8]) -> u32 {
    z.iter().enumerate().filter(|(_, &v)| v == -1).fold(0, |acc, (j, _)| acc | (1 << j))
}

/// Boolean predicate `P: {-1,1}^k → {0,1}` together with the planted distribution
/// `U_P` on its satisfying assignments, stored through the Fourier coefficients of
/// its density `η_P` relative to the uniform distribution.
///
/// Assignments `z` are indexed by the mask of coordinates equal to `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    k: usize,
    truth_table: Vec<u8>,
    t: usize,
    eta_hat: Vec<Rational>,
    support: Vec<(u32, f64)>,
}

/// Result of [`Predicate::verify_twise_uniform`].
#[derive(Clone, Debug, PartialEq)]
pub struct UniformityReport {
    pub max_uniform_level: usize,
    /// First non-uniform marginal: the coordinate set and the probability of each
    /// value of `z_T` (indexed by the `-1` mask restricted to `T`, compressed).
    pub witness: Option<(SlotMask, Vec<Rational>)>,
}

impl Predicate {
    /// Validates and builds a predicate. `t` is the uniformity level: every marginal of
    /// `U_P` on at most `t - 1` coordinates must be uniform.
    pub fn new(k: usize, truth_table: Vec<u8>, t: usize, eta_hat: Vec<Rational>) -> Result<Self> {
        if !(1..=16).contains(&k) {
            return Err(Error::InvalidArity(format!("k = {k} outside 1..=16")));
        }
        let size = 1usize << k;
        if truth_table.len() != size || eta_hat.len() != size {
            return Err(Error::InvalidInput(format!(
                "truth table and eta must have {size} entries (got {} and {})",
                truth_table.len(),
                eta_hat.len()
            )));
        }
        if truth_table.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("truth table entries must be 0 or 1".into()));
        }
        if t == 0 || t > k {
            return Err(Error::InvalidInput(format!("uniformity level t = {t} outside 1..={k}")));
        }
        let mut pred = Predicate { k, truth_table, t, eta_hat, support: Vec::new() };
        pred.check_density()?;
        let level = pred.verify_twise_uniform()?.max_uniform_level;
        if level + 1 < t {
            return Err(Error::InvalidDensity(format!(
                "marginals are uniform only up to {level} coordinates, t = {t} requires {}",
                t - 1
            )));
        }
        pred.support = (0..size as u32)
            .filter_map(|z| {
                let d = pred.density(z);
                (!d.is_zero()).then(|| (z, num_traits::ToPrimitive::to_f64(&d).unwrap_or(0.0)))
            })
            .collect();
        Ok(pred)
    }

    /// `k`-XOR: `P(z) = 1` iff `Π z_j = -1`, with `U_P` uniform on the satisfying set.
    pub fn xor(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArity(format!("XOR needs k ≥ 2, got {k}")));
        }
        let size = 1usize << k;
        let truth = (0..size as u32).map(|z| u8::from(z.count_ones() % 2 == 1)).collect();
        Predicate::new(k, truth, k, xor_eta(k))
    }

    /// `k`-SAT: a literal is true when it equals `-1`, so `P(z) = 1` iff some `z_j = -1`.
    /// The planted distribution is the XOR one, whose support satisfies every clause.
    pub fn sat(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArity(format!("SAT needs k ≥ 2, got {k}")));
        }
        let size = 1usize << k;
        let truth = (0..size as u32).map(|z| u8::from(z != 0)).collect();
        Predicate::new(k, truth, k, xor_eta(k))
    }

    /// Predicate whose planted distribution is uniform on all satisfying assignments;
    /// `t` is set to one more than the largest uniform marginal level.
    pub fn uniform_on_satisfying(k: usize, truth_table: Vec<u8>) -> Result<Self> {
        if !(1..=16).contains(&k) || truth_table.len() != 1 << k {
            return Err(Error::InvalidInput("truth table must have 2^k entries".into()));
        }
        let sat: Vec<u32> = (0..1u32 << k).filter(|&z| truth_table[z as usize] == 1).collect();
        if sat.is_empty() {
            return Err(Error::InvalidDensity("predicate has no satisfying assignment".into()));
        }
        let count = BigInt::from(sat.len());
        let eta = (0..1u32 << k)
            .map(|t| {
                let s: i64 = sat.iter().map(|&z| character(t, z)).sum();
                Rational::new(BigInt::from(s), count.clone())
            })
            .collect();
        let probe = Predicate { k, truth_table: truth_table.clone(), t: 1, eta_hat: eta, support: Vec::new() };
        let level = probe.verify_twise_uniform()?.max_uniform_level;
        Predicate::new(k, truth_table, (level + 1).min(k), probe.eta_hat)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn truth_table(&self) -> &[u8] {
        &self.truth_table
    }

    /// `η̂_P(T)`.
    pub fn eta_hat(&self, t: SlotMask) -> &Rational {
        &self.eta_hat[t as usize]
    }

    pub fn eta_hat_table(&self) -> &[Rational] {
        &self.eta_hat
    }

    /// Nonempty slot sets with `η̂_P(T) ≠ 0`, in increasing mask order.
    pub fn eta_support(&self) -> Vec<SlotMask> {
        (1..(1u32 << self.k)).filter(|&t| !self.eta_hat[t as usize].is_zero()).collect()
    }

    pub fn eval(&self, z: u32) -> bool {
        self.truth_table[z as usize] == 1
    }

    /// `η_P(z) = Σ_T η̂_P(T) χ_T(z)`.
    pub fn density(&self, z: u32) -> Rational {
        let mut acc = Rational::zero();
        for (t, c) in self.eta_hat.iter().enumerate() {
            if !c.is_zero() {
                acc += c * Rational::from_integer(BigInt::from(character(t as u32, z)));
            }
        }
        acc
    }

    /// `Pr_{U_P}[z] = 2^{-k} η_P(z)`.
    pub fn planted_prob(&self, z: u32) -> Rational {
        self.density(z) / Rational::from_integer(BigInt::one() << self.k)
    }

    /// Fourier coefficient `P̂(T)` of the truth table.
    pub fn truth_hat(&self, t: SlotMask) -> Rational {
        let s: i64 = (0..1u32 << self.k).filter(|&z| self.eval(z)).map(|z| character(t, z)).sum();
        Rational::new(BigInt::from(s), BigInt::one() << self.k)
    }

    /// Draws `z ~ U_P`.
    pub fn sample_planted_z<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let total: f64 = self.support.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        for &(z, w) in &self.support {
            if u < w {
                return z;
            }
            u -= w;
        }
        self.support.last().map(|&(z, _)| z).unwrap_or(0)
    }

    fn check_density(&self) -> Result<()> {
        if !self.eta_hat[0].is_one() {
            return Err(Error::InvalidDensity(format!(
                "eta_hat(∅) = {} but a density must have mean 1",
                self.eta_hat[0]
            )));
        }
        for z in 0..1u32 << self.k {
            let d = self.density(z);
            if d.is_negative() {
                return Err(Error::InvalidDensity(format!("η_P({z:#b}) = {d} is negative")));
            }
            if !d.is_zero() && !self.eval(z) {
                return Err(Error::InvalidDensity(format!(
                    "η_P({z:#b}) = {d} is positive on an unsatisfying assignment"
                )));
            }
        }
        Ok(())
    }

    /// Largest `w` such that every marginal of `U_P` on at most `w` coordinates is uniform,
    /// with the first violating marginal (by size, then mask order) as witness.
    pub fn verify_twise_uniform(&self) -> Result<UniformityReport> {
        self.check_density()?;
        let k = self.k as u32;
        let mut sets: Vec<SlotMask> = (1..1u32 << k).collect();
        sets.sort_by_key(|&t| (t.count_ones(), t));
        for t in sets {
            let w = t.count_ones() as usize;
            let marginal = self.marginal(t);
            let uniform = ratio(1, 1 << w);
            if marginal.iter().any(|m| *m != uniform) {
                return Ok(UniformityReport { max_uniform_level: w - 1, witness: Some((t, marginal)) });
            }
        }
        Ok(UniformityReport { max_uniform_level: self.k, witness: None })
    }

    /// Distribution of `z_T` under `U_P`, indexed by the compressed `-1` pattern on `T`.
    pub fn marginal(&self, t: SlotMask) -> Vec<Rational> {
        let positions: Vec<u32> = (0..self.k as u32).filter(|j| t >> j & 1 == 1).collect();
        let mut out = vec![Rational::zero(); 1 << positions.len()];
        for z in 0..1u32 << self.k {
            let idx = positions.iter().enumerate().fold(0usize, |acc, (i, &j)| acc | (((z >> j & 1) as usize) << i));
            out[idx] += self.planted_prob(z);
        }
        out
    }
}

fn xor_eta(k: usize) -> Vec<Rational> {
    let size = 1usize << k;
    let mut eta = vec![Rational::zero(); size];
    eta[0] = Rational::one();
    eta[size - 1] = -Rational::one();
    eta
}
