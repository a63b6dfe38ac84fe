//! Poisson rectangular pulse (PRP) daily-demand model.
//!
//! Daily demand is a compound Poisson sum: the number of usage events in a
//! day is Poisson with rate `λ`, and each event consumes an exponential
//! volume with rate `μ`. The distribution mixes a point mass `e^{-λ}` at
//! zero demand (no events) with a continuous density on `d > 0`:
//!
//! ```text
//! f(d) = e^{-λ-μd} · I₁(2√(λμd)) · √(λμ/d)
//!      = Σ_{k≥1} (λμ)^k d^{k-1} e^{-λ-μd} / (k!(k-1)!)
//! ```

use crate::bessel::i1_scaled;
use crate::noise::DiscreteNoise;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

/// PRP model parameters: usage events per day and inverse mean event
/// volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrpParams {
    /// Usage event rate `λ > 0` (events/day).
    pub event_rate: f64,
    /// Usage volume rate `μ > 0` (1/liters); each event consumes
    /// `Exponential(μ)` liters, mean `1/μ`.
    pub duration_rate: f64,
}

impl PrpParams {
    pub fn is_valid(&self) -> bool {
        self.event_rate > 0.0
            && self.event_rate.is_finite()
            && self.duration_rate > 0.0
            && self.duration_rate.is_finite()
    }

    /// One day of demand: draw the event count, then sum that many
    /// exponential volumes. Zero events means exactly zero demand.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let events = Poisson::new(self.event_rate)
            .expect("event rate must be positive and finite")
            .sample(rng) as u64;
        if events == 0 {
            return 0.0;
        }
        let volume = Exp::new(self.duration_rate).expect("duration rate must be positive");
        let mut demand = 0.0;
        for _ in 0..events {
            demand += volume.sample(rng);
        }
        demand
    }

    /// Continuous part of the density, valid for `d > 0` only (the atom at
    /// zero is exposed separately by [`Self::atom_mass`]).
    ///
    /// Uses the exponentially scaled Bessel evaluation: with
    /// `z = 2√(λμd) ≤ λ + μd`, the product `e^{z-λ-μd}·(e^{-z}I₁(z))` never
    /// overflows and underflows only where the density is genuinely below
    /// the smallest positive f64.
    pub fn pdf_continuous(&self, demand: f64) -> f64 {
        assert!(
            demand > 0.0,
            "pdf_continuous requires d > 0; the zero atom is separate"
        );
        let lambda = self.event_rate;
        let mu = self.duration_rate;
        let z = 2.0 * (lambda * mu * demand).sqrt();
        (z - lambda - mu * demand).exp() * i1_scaled(z) * (lambda * mu / demand).sqrt()
    }

    /// Probability of zero demand, `e^{-λ}`.
    pub fn atom_mass(&self) -> f64 {
        (-self.event_rate).exp()
    }

    /// Closed-form compound-Poisson moments `(λ/μ, 2λ/μ²)`.
    pub fn moments(&self) -> (f64, f64) {
        let mean = self.event_rate / self.duration_rate;
        let variance = 2.0 * self.event_rate / (self.duration_rate * self.duration_rate);
        (mean, variance)
    }

    /// Equal-weight empirical discretization: `n_atoms` seeded draws,
    /// sorted, each carrying mass `1/n_atoms` (exact repeats merge). The
    /// same seed always produces the same atom list.
    pub fn discretize(&self, n_atoms: usize, seed: u64) -> DiscreteNoise {
        assert!(n_atoms >= 2, "need at least 2 atoms, got {n_atoms}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..n_atoms).map(|_| self.sample(&mut rng)).collect();
        DiscreteNoise::equal_weight(samples).expect("n_atoms >= 2 yields a valid distribution")
    }
}
