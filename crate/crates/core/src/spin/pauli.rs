//! Pauli operators in the fixed basis order (I, X, Y, Z).

use nalgebra::Matrix2;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub const LABELS: [&str; 4] = ["I", "X", "Y", "Z"];

pub(crate) const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const ZERO: C64 = c(0.0, 0.0);
const ONE: C64 = c(1.0, 0.0);
const I: C64 = c(0.0, 1.0);

/// The Pauli operator with index `k` (0 = I, 1 = X, 2 = Y, 3 = Z).
pub fn pauli(k: usize) -> Mat2 {
    match k {
        0 => Mat2::new(ONE, ZERO, ZERO, ONE),
        1 => Mat2::new(ZERO, ONE, ONE, ZERO),
        2 => Mat2::new(ZERO, -I, I, ZERO),
        3 => Mat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn paulis() -> [Mat2; 4] {
    [pauli(0), pauli(1), pauli(2), pauli(3)]
}

/// Coefficients `a` with `op = Σ a_k P_k`.
pub fn decompose(op: &Mat2) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for (k, p) in paulis().iter().enumerate() {
        out[k] = (p * op).trace() * 0.5;
    }
    out
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(-i θ/2 n·σ)` for a unit axis `n`.
pub fn rotation(axis: [f64; 3], angle: f64) -> Mat2 {
    let (s, co) = (0.5 * angle).sin_cos();
    let mut u = pauli(0) * c(co, 0.0);
    for (k, n) in axis.iter().enumerate() {
        u -= pauli(k + 1) * c(0.0, s * n);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let [id, x, y, z] = paulis();
        assert!(max_abs_diff(&(x * y), &(z * I)) < 1e-15);
        assert!(max_abs_diff(&(y * z), &(x * I)) < 1e-15);
        assert!(max_abs_diff(&(x * x), &id) < 1e-15);
    }

    #[test]
    fn decompose_recovers_coefficients() {
        let coeffs = [c(0.3, 0.1), c(-0.2, 0.0), c(0.0, 0.7), c(0.5, -0.4)];
        let mut op = Mat2::zeros();
        for (k, a) in coeffs.iter().enumerate() {
            op += pauli(k) * *a;
        }
        let back = decompose(&op);
        for k in 0..4 {
            assert!((back[k] - coeffs[k]).norm() < 1e-15);
        }
    }
}
