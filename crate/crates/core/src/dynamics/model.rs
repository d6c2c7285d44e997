use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which orbital manifold the spin currently occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    Ground,
    Excited,
}

impl Manifold {
    pub fn label(&self) -> &'static str {
        match self {
            Manifold::Ground => "GS",
            Manifold::Excited => "ES",
        }
    }
}

/// Physical parameters of the two-level spin in both orbital manifolds.
///
/// Frequencies are in GHz and rates in ns⁻¹, so `2π·f·t` is a phase in
/// radians when `t` is in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsModel {
    #[serde(rename = "f_gs_ghz")]
    pub f_gs: f64,
    #[serde(rename = "f_es_ghz")]
    pub f_es: f64,
    /// Γ, excited-state motional dephasing.
    #[serde(rename = "dephasing_rate_per_ns")]
    pub dephasing_rate: f64,
    /// γ, decay of the superposition through spontaneous emission.
    #[serde(rename = "emission_rate_per_ns")]
    pub emission_rate: f64,
    /// γ₀, excited-state population decay of |0⟩.
    #[serde(rename = "decay_rate_0_per_ns")]
    pub decay_rate_0: f64,
    /// γ₋₁, excited-state population decay of |−1⟩.
    #[serde(rename = "decay_rate_m1_per_ns")]
    pub decay_rate_m1: f64,
    /// Fraction of the transverse Bloch component that survives excitation.
    pub eta: f64,
    #[serde(rename = "b_field_gauss")]
    pub b_field: f64,
}

impl Default for PhysicsModel {
    fn default() -> Self {
        let tau_star = 6.0;
        let emission = 1.0 / 12.0;
        Self {
            f_gs: 0.65,
            f_es: 2.14,
            dephasing_rate: 1.0 / tau_star - emission,
            emission_rate: emission,
            decay_rate_0: 1.0 / 12.0,
            decay_rate_m1: 1.0 / 12.0,
            eta: 1.0,
            b_field: 1276.0,
        }
    }
}

impl PhysicsModel {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("dephasing_rate_per_ns", self.dephasing_rate),
            ("emission_rate_per_ns", self.emission_rate),
            ("decay_rate_0_per_ns", self.decay_rate_0),
            ("decay_rate_m1_per_ns", self.decay_rate_m1),
        ];
        for (name, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidModel(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("f_gs_ghz", self.f_gs), ("f_es_ghz", self.f_es)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidModel(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidModel(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    /// Total transverse decay rate in the excited state, 1/τ* = Γ + γ.
    pub fn transverse_rate(&self) -> f64 {
        self.dephasing_rate + self.emission_rate
    }

    pub fn tau_star(&self) -> f64 {
        1.0 / self.transverse_rate()
    }

    /// Sets Γ so that 1/τ* matches `tau_star_ns`, keeping γ fixed.
    pub fn with_tau_star(mut self, tau_star_ns: f64) -> Self {
        self.dephasing_rate = (1.0 / tau_star_ns - self.emission_rate).max(0.0);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn larmor(&self, manifold: Manifold) -> f64 {
        match manifold {
            Manifold::Ground => self.f_gs,
            Manifold::Excited => self.f_es,
        }
    }

    /// The manifold whose spin transition is closest to `carrier_ghz`.
    pub fn resonant_manifold(&self, carrier_ghz: f64) -> Manifold {
        if (carrier_ghz - self.f_gs).abs() <= (carrier_ghz - self.f_es).abs() {
            Manifold::Ground
        } else {
            Manifold::Excited
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_six_ns_tau_star() {
        let m = PhysicsModel::default();
        m.validate().unwrap();
        assert!((m.tau_star() - 6.0).abs() < 1e-12);
        assert!((m.dephasing_rate - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PhysicsModel::default().with_eta(1.2).validate().is_err());
        let m = PhysicsModel {
            emission_rate: -0.1,
            ..Default::default()
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_keys_carry_units() {
        let text = serde_json::to_string(&PhysicsModel::default()).unwrap();
        assert!(text.contains("\"f_es_ghz\":2.14"));
        assert!(text.contains("dephasing_rate_per_ns"));
        let back: PhysicsModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, PhysicsModel::default());
    }
}
