use log::warn;

use super::chi::{chi_ideal, ChiMatrix};

const IMAG_WARN: f64 = 1e-8;
const DEGENERATE_AMPLITUDE: f64 = 1e-12;

/// F = Tr(χ_a χ_b) with both matrices normalized to unit trace.
pub fn process_fidelity(chi_a: &ChiMatrix, chi_b: &ChiMatrix) -> f64 {
    let tr = (chi_a.matrix() * chi_b.matrix()).trace() / (chi_a.trace() * chi_b.trace());
    if tr.im.abs() > IMAG_WARN {
        warn!(
            "process fidelity has imaginary part {:.3e}; inputs are not Hermitian",
            tr.im
        );
    }
    tr.re
}

/// Best Z-rotation reference for a measured process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiOptimum {
    /// Rotation angle in radians, in (-π, π].
    pub phi: f64,
    pub fidelity: f64,
    /// Set when the fidelity does not depend on φ.
    pub degenerate: bool,
}

impl PhiOptimum {
    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }
}

/// Maximizes F(φ) = Tr(χ χ_ideal(φ)) over φ.
///
/// F(φ) = a + b cos φ + c sin φ exactly, so three evaluations at 0, π/2 and π
/// determine it; the maximum is `a + √(b² + c²)` at `atan2(c, b)`.
pub fn optimize_phi(chi: &ChiMatrix) -> PhiOptimum {
    use std::f64::consts::{FRAC_PI_2, PI};
    let f0 = process_fidelity(chi, &chi_ideal(0.0));
    let f90 = process_fidelity(chi, &chi_ideal(FRAC_PI_2));
    let f180 = process_fidelity(chi, &chi_ideal(PI));
    let a = 0.5 * (f0 + f180);
    let b = 0.5 * (f0 - f180);
    let c = f90 - a;
    let amp = b.hypot(c);
    if amp < DEGENERATE_AMPLITUDE {
        return PhiOptimum {
            phi: 0.0,
            fidelity: a,
            degenerate: true,
        };
    }
    PhiOptimum {
        phi: c.atan2(b),
        fidelity: a + amp,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::pauli::{c, pauli, rotation};
    use crate::spin::random::{random_channel, random_hermitian_chi};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn phase_damped_rotation(phi: f64, k: f64) -> ChiMatrix {
        let u = rotation([0.0, 0.0, 1.0], phi);
        ChiMatrix::from_kraus(&[
            u * c(((1.0 + k) / 2.0).sqrt(), 0.0),
            pauli(3) * u * c(((1.0 - k) / 2.0).sqrt(), 0.0),
        ])
    }

    #[test]
    fn self_fidelity_is_one() {
        for k in 0..12 {
            let chi = chi_ideal(k as f64 * 0.7 - 3.0);
            assert!((process_fidelity(&chi, &chi) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quarter_turn_against_identity() {
        let f = process_fidelity(&chi_ideal(0.0), &chi_ideal(PI / 2.0));
        assert!((f - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phase_damping_fidelity() {
        let chi = phase_damped_rotation(PI / 2.0, 0.74);
        let f = process_fidelity(&chi, &chi_ideal(PI / 2.0));
        assert!((f - 0.87).abs() < 1e-14);
    }

    #[test]
    fn optimize_recovers_injected_angle() {
        let phi = 94.6f64.to_radians();
        let opt = optimize_phi(&chi_ideal(phi));
        assert!((opt.phi - phi).abs() < 1e-12);
        assert!((opt.fidelity - 1.0).abs() < 1e-12);
        assert!(!opt.degenerate);

        let damped = optimize_phi(&phase_damped_rotation(phi, 0.74));
        assert!((damped.phi - phi).abs() < 1e-12);
        assert!((damped.fidelity - 0.87).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_is_degenerate() {
        let opt = optimize_phi(&ChiMatrix::depolarizing());
        assert!(opt.degenerate);
        assert_eq!(opt.phi, 0.0);
        assert!((opt.fidelity - 0.25).abs() < 1e-15);
        for k in 0..36 {
            let f = process_fidelity(&ChiMatrix::depolarizing(), &chi_ideal(k as f64 * 0.17));
            assert!((f - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_beats_grid_scans() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let chi = random_hermitian_chi(&mut rng);
            let opt = optimize_phi(&chi);
            // 1° grid: never above the closed-form optimum.
            for k in 0..360 {
                let f = process_fidelity(&chi, &chi_ideal((k as f64).to_radians()));
                assert!(f <= opt.fidelity + 1e-12);
            }
            // 0.01° brute force agrees on the location.
            let (best_k, _) = (0..36_000)
                .map(|k| {
                    let phi = (k as f64 * 0.01).to_radians();
                    (k, process_fidelity(&chi, &chi_ideal(phi)))
                })
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            let brute = best_k as f64 * 0.01;
            let mut diff = (brute - opt.phi_deg()).rem_euclid(360.0);
            if diff > 180.0 {
                diff -= 360.0;
            }
            assert!(diff.abs() <= 0.02, "brute {brute} closed {}", opt.phi_deg());
        }
    }

    #[test]
    fn z_conjugation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..20 {
            let (a, ka) = random_channel(&mut rng, 1 + t % 4);
            let (_, kb) = random_channel(&mut rng, 1 + (t + 1) % 4);
            let b = ChiMatrix::from_kraus(&kb);
            let v = rotation([0.0, 0.0, 1.0], 0.37 * t as f64);
            let conj = |ks: &[_]| -> ChiMatrix {
                let moved: Vec<_> = ks.iter().map(|k| v * k * v.adjoint()).collect();
                ChiMatrix::from_kraus(&moved)
            };
            let before = process_fidelity(&a, &b);
            let after = process_fidelity(&conj(&ka), &conj(&kb));
            assert!((before - after).abs() < 1e-10);
        }
    }
}
