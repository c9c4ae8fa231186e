//! JSON files for instances and predicates. Variable and scope indices are 0-based.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::csp::{Instance, Predicate, ScopeSpace};
use crate::scalar::{parse_rational, rational_string, Rational};
use crate::{Error, Result};

/// `{ "n", "k", "p"?, "scopes": [[..k]], "y": [±1], "b": [[±1 × k]] }`. `p` is optional
/// and only needed by commands that use the background distribution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    pub scopes: Vec<Vec<usize>>,
    pub y: Vec<i8>,
    pub b: Vec<Vec<i8>>,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let space = inst.space();
        InstanceFile {
            n: space.n(),
            k: space.k(),
            p: Some(rational_string(space.p())),
            scopes: space.scopes().to_vec(),
            y: inst.y().to_vec(),
            b: (0..space.m()).map(|s| inst.b_scope(s).to_vec()).collect(),
        }
    }

    /// Builds the instance over exactly the listed scopes; `p` from the file wins over
    /// `default_p`.
    pub fn to_instance(&self, default_p: Option<&Rational>) -> Result<Instance> {
        let p = match (&self.p, default_p) {
            (Some(s), _) => {
                parse_rational(s).ok_or_else(|| Error::InvalidInput(format!("p = `{s}` is not a rational")))?
            }
            (None, Some(p)) => p.clone(),
            (None, None) => return Err(Error::InvalidInput("instance file has no `p` and none was given".into())),
        };
        let m = self.scopes.len();
        if self.y.len() != m || self.b.len() != m {
            return Err(Error::InvalidInput(format!(
                "{m} scopes but {} y entries and {} b rows",
                self.y.len(),
                self.b.len()
            )));
        }
        if self.b.iter().any(|row| row.len() != self.k) {
            return Err(Error::InvalidInput(format!("every b row must have {} entries", self.k)));
        }
        // The space stores scopes sorted; carry y and b along.
        let mut rows: Vec<(&Vec<usize>, i8, &Vec<i8>)> =
            self.scopes.iter().zip(&self.y).zip(&self.b).map(|((s, &y), b)| (s, y, b)).collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let space = Arc::new(ScopeSpace::restricted(self.n, self.k, self.scopes.clone(), p)?);
        let y = rows.iter().map(|r| r.1).collect();
        let b = rows.iter().flat_map(|r| r.2.iter().copied()).collect();
        Instance::new(space, y, b)
    }
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<()> {
    let text = serde_json::to_string(&InstanceFile::from_instance(inst))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_instance(path: &Path, default_p: Option<&Rational>) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.to_instance(default_p)
}

/// `{ "k", "t", "truth_table": [0/1 × 2^k], "eta": ["num/den" × 2^k] }`, where `eta`
/// lists the Fourier coefficients of the planted density by coordinate mask.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateFile {
    pub k: usize,
    pub t: usize,
    pub truth_table: Vec<u8>,
    pub eta: Vec<String>,
}

impl PredicateFile {
    pub fn from_predicate(pred: &Predicate) -> Self {
        PredicateFile {
            k: pred.k(),
            t: pred.t(),
            truth_table: pred.truth_table().to_vec(),
            eta: pred.eta_hat_table().iter().map(rational_string).collect(),
        }
    }

    pub fn to_predicate(&self) -> Result<Predicate> {
        let eta = self
            .eta
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| Error::InvalidInput(format!("eta entry `{s}` is not a rational"))))
            .collect::<Result<Vec<_>>>()?;
        Predicate::new(self.k, self.truth_table.clone(), self.t, eta)
    }
}

pub fn read_predicate(path: &Path) -> Result<Predicate> {
    let file: PredicateFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.to_predicate()
}

/// `xor`, `sat`, or a path to a predicate file.
pub fn predicate_by_name(name: &str, k: usize) -> Result<Predicate> {
    match name {
        "xor" => Predicate::xor(k),
        "sat" => Predicate::sat(k),
        path => {
            let pred = read_predicate(Path::new(path))?;
            if pred.k() != k {
                return Err(Error::InvalidInput(format!("predicate file has k = {}, expected {k}", pred.k())));
            }
            Ok(pred)
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::csp::sample_planted;
    use crate::scalar::ratio;

    #[test]
    fn instance_round_trip() {
        let space = Arc::new(ScopeSpace::full(5, 3, ratio(1, 4)).unwrap());
        let pred = Predicate::xor(3).unwrap();
        let (_, inst) = sample_planted(&space, &pred, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let file = InstanceFile::from_instance(&inst);
        let text = serde_json::to_string(&file).unwrap();
        let back: InstanceFile = serde_json::from_str(&text).unwrap();
        let again = back.to_instance(None).unwrap();
        assert_eq!(again.y(), inst.y());
        assert_eq!(again.b(), inst.b());
        assert_eq!(again.space().scopes(), space.scopes());
    }

    #[test]
    fn unsorted_scopes_keep_their_rows() {
        let file = InstanceFile {
            n: 4,
            k: 2,
            p: None,
            scopes: vec![vec![2, 3], vec![0, 1]],
            y: vec![-1, 1],
            b: vec![vec![-1, -1], vec![1, 1]],
        };
        let inst = file.to_instance(Some(&ratio(1, 2))).unwrap();
        assert_eq!(inst.space().scopes(), &[vec![0, 1], vec![2, 3]]);
        assert_eq!(inst.y(), &[1, -1]);
        assert_eq!(inst.b(), &[1, 1, -1, -1]);
        assert!(file.to_instance(None).is_err());
    }

    #[test]
    fn malformed_instance_rejected() {
        let file = InstanceFile { n: 4, k: 2, p: Some("1/2".into()), scopes: vec![vec![0, 1]], y: vec![], b: vec![] };
        assert!(file.to_instance(None).is_err());
    }

    #[test]
    fn predicate_round_trip_and_names() {
        let pred = Predicate::sat(3).unwrap();
        let back = PredicateFile::from_predicate(&pred).to_predicate().unwrap();
        assert_eq!(back, pred);
        assert_eq!(predicate_by_name("xor", 3).unwrap(), Predicate::xor(3).unwrap());
        assert!(predicate_by_name("/nonexistent/pred.json", 3).is_err());
    }
}
