use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::model::PhysicsModel;
use crate::spin::DensityMatrix;

/// Normalized fluorescence proxy: the population of |0⟩.
pub fn readout(rho_es: &DensityMatrix, _model: &PhysicsModel) -> f64 {
    rho_es.p0()
}

/// Population of |0⟩ among cycles that are still excited `es_elapsed_ns`
/// after the excitation, with each spin level surviving at its own
/// population decay rate. Equal rates reduce this to [`readout`].
pub fn readout_weighted(rho_es: &DensityMatrix, model: &PhysicsModel, es_elapsed_ns: f64) -> f64 {
    let p0 = rho_es.p0();
    if model.decay_rate_0 == model.decay_rate_m1 {
        return p0;
    }
    let t = es_elapsed_ns.max(0.0);
    let w0 = (-model.decay_rate_0 * t).exp();
    let w1 = (-model.decay_rate_m1 * t).exp();
    let num = w0 * p0;
    let den = num + w1 * (1.0 - p0);
    if den > 0.0 {
        num / den
    } else {
        p0
    }
}

/// Photon counts for one signal window and its two normalization references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonCounts {
    pub signal: u64,
    pub ref_hi: u64,
    pub ref_lo: u64,
}

impl PhotonCounts {
    /// p0 estimate from linear interpolation between the references.
    pub fn normalized_p0(&self) -> f64 {
        let span = self.ref_hi as f64 - self.ref_lo as f64;
        (self.signal as f64 - self.ref_lo as f64) / span
    }

    /// Shot-noise standard deviation of [`Self::normalized_p0`] by first-order
    /// propagation of the three Poisson variances.
    pub fn p0_sigma(&self) -> f64 {
        let d = self.ref_hi as f64 - self.ref_lo as f64;
        if d <= 0.0 {
            return f64::INFINITY;
        }
        let p = self.normalized_p0();
        let var = self.signal as f64 + p * p * self.ref_hi as f64 + (1.0 - p) * (1.0 - p) * self.ref_lo as f64;
        var.sqrt() / d
    }

    pub fn is_empty(&self) -> bool {
        self.signal == 0 && self.ref_hi == 0 && self.ref_lo == 0
    }

    /// Poisson resample around the observed counts.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        Self {
            signal: poisson(self.signal as f64, rng),
            ref_hi: poisson(self.ref_hi as f64, rng),
            ref_lo: poisson(self.ref_lo as f64, rng),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            signal: (self.signal as f64 * factor).round() as u64,
            ref_hi: (self.ref_hi as f64 * factor).round() as u64,
            ref_lo: (self.ref_lo as f64 * factor).round() as u64,
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Mean photon numbers for the bright (|0⟩) and dark (|−1⟩) references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountModel {
    pub n_hi: f64,
    pub n_lo: f64,
}

impl Default for CountModel {
    fn default() -> Self {
        Self { n_hi: 1e5, n_lo: 5e4 }
    }
}

impl CountModel {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_hi: self.n_hi * factor,
            n_lo: self.n_lo * factor,
        }
    }

    pub fn mean_signal(&self, p0: f64) -> f64 {
        self.n_lo + p0 * (self.n_hi - self.n_lo)
    }

    /// Counts equal to their rounded means.
    pub fn expected(&self, p0: f64) -> PhotonCounts {
        PhotonCounts {
            signal: self.mean_signal(p0).max(0.0).round() as u64,
            ref_hi: self.n_hi.round() as u64,
            ref_lo: self.n_lo.round() as u64,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, p0: f64, rng: &mut R) -> PhotonCounts {
        PhotonCounts {
            signal: poisson(self.mean_signal(p0), rng),
            ref_hi: poisson(self.n_hi, rng),
            ref_lo: poisson(self.n_lo, rng),
        }
    }

    /// Predicted shot-noise σ of the normalized p0.
    pub fn p0_sigma(&self, p0: f64) -> f64 {
        let d = self.n_hi - self.n_lo;
        let var = self.mean_signal(p0) + p0 * p0 * self.n_hi + (1.0 - p0) * (1.0 - p0) * self.n_lo;
        var.sqrt() / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{density_from_bloch, BlochVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_and_equator_states() {
        let model = PhysicsModel::default();
        assert_eq!(readout(&DensityMatrix::ground(), &model), 1.0);
        let eq = density_from_bloch(BlochVector::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(readout(&eq, &model), 0.5);
        assert_eq!(readout_weighted(&eq, &model, 3.0), 0.5);
    }

    #[test]
    fn unequal_decay_biases_toward_longer_lived_level() {
        let model = PhysicsModel {
            decay_rate_0: 1.0 / 12.0,
            decay_rate_m1: 1.0 / 8.0,
            ..Default::default()
        };
        let eq = density_from_bloch(BlochVector::PLUS_X).unwrap();
        let w = readout_weighted(&eq, &model, 5.0);
        assert!(w > 0.5);
        // Oracle: survival-weighted population ratio.
        let (a, b) = ((-5.0f64 / 12.0).exp(), (-5.0f64 / 8.0).exp());
        assert!((w - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn poisson_normalization_is_unbiased() {
        let counts = CountModel { n_hi: 1e5, n_lo: 5e4 };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| counts.draw(0.75, &mut rng).normalized_p0()).sum::<f64>() / n as f64;
        assert!((mean / 0.75 - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn predicted_sigma_matches_scatter() {
        let counts = CountModel { n_hi: 2e4, n_lo: 1e4 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..4000).map(|_| counts.draw(0.3, &mut rng).normalized_p0()).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        let predicted = counts.p0_sigma(0.3);
        assert!((sd / predicted - 1.0).abs() < 0.1, "sd {sd} predicted {predicted}");
        assert!((counts.expected(0.3).p0_sigma() / predicted - 1.0).abs() < 1e-3);
    }
}
