//! Finite-support disturbance distributions.
//!
//! All expectations in the solvers are taken over one fixed atom set built
//! before the solve, so every evaluation of the recursion sees the same
//! disturbances (common random atoms).

use thiserror::Error;

const PROBABILITY_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise distribution needs at least one atom")]
    Empty,
    #[error("atom {index} has negative probability {probability}")]
    NegativeProbability { index: usize, probability: f64 },
    #[error("atom {index} has non-finite value or probability")]
    NonFinite { index: usize },
    #[error("atom probabilities sum to {sum}, expected 1 within {PROBABILITY_SUM_TOL:e}")]
    NotNormalized { sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAtom {
    pub value: f64,
    pub probability: f64,
}

/// Finite-support approximation of an i.i.d. disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNoise {
    atoms: Vec<NoiseAtom>,
}

impl DiscreteNoise {
    pub fn new(atoms: Vec<NoiseAtom>) -> Result<Self, NoiseError> {
        if atoms.is_empty() {
            return Err(NoiseError::Empty);
        }
        for (index, atom) in atoms.iter().enumerate() {
            if !atom.value.is_finite() || !atom.probability.is_finite() {
                return Err(NoiseError::NonFinite { index });
            }
            if atom.probability < 0.0 {
                return Err(NoiseError::NegativeProbability {
                    index,
                    probability: atom.probability,
                });
            }
        }
        let sum = kahan_sum(atoms.iter().map(|a| a.probability));
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(NoiseError::NotNormalized { sum });
        }
        Ok(Self { atoms })
    }

    /// Atoms with equal probability `1/n`. Repeated values are merged.
    pub fn equal_weight(mut values: Vec<f64>) -> Result<Self, NoiseError> {
        if values.is_empty() {
            return Err(NoiseError::Empty);
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
        let weight = 1.0 / values.len() as f64;
        let mut atoms: Vec<NoiseAtom> = Vec::new();
        for v in values {
            match atoms.last_mut() {
                Some(last) if last.value == v => last.probability += weight,
                _ => atoms.push(NoiseAtom {
                    value: v,
                    probability: weight,
                }),
            }
        }
        Self::new(atoms)
    }

    /// Single atom with probability one.
    pub fn deterministic(value: f64) -> Self {
        Self::new(vec![NoiseAtom {
            value,
            probability: 1.0,
        }])
        .expect("deterministic atom is always valid")
    }

    pub fn atoms(&self) -> &[NoiseAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ_i p_i · f(w_i)`, accumulated in atom order.
    pub fn expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for atom in &self.atoms {
            acc += atom.probability * f(atom.value);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|w| w)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
