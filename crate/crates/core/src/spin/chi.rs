//! Process matrices in the Pauli basis: E(ρ) = Σ_mn χ_mn P_m ρ P_n.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::pauli::{c, decompose, paulis, Mat2, C64, LABELS};
use super::state::DensityMatrix;
use crate::error::{Error, Result};

pub type Mat4 = Matrix4<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const TP_TOL: f64 = 1e-6;

/// A 4×4 Hermitian process matrix in basis order (I, X, Y, Z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiMatrix(Mat4);

impl ChiMatrix {
    pub fn new(m: Mat4) -> Result<Self> {
        let dev = max_abs4(&(m - m.adjoint()));
        if !dev.is_finite() || dev > HERMITIAN_TOL {
            return Err(Error::InvalidChannel(format!(
                "chi matrix not Hermitian (deviation {dev:.3e})"
            )));
        }
        Ok(Self(m))
    }

    /// Symmetrizes `m` to its Hermitian part.
    pub(crate) fn hermitian_part(m: Mat4) -> Self {
        Self((m + m.adjoint()) * c(0.5, 0.0))
    }

    pub fn identity() -> Self {
        let mut m = Mat4::zeros();
        m[(0, 0)] = c(1.0, 0.0);
        Self(m)
    }

    /// Fully depolarizing channel, χ = I/4.
    pub fn depolarizing() -> Self {
        Self(Mat4::identity() * c(0.25, 0.0))
    }

    pub fn from_unitary(u: &Mat2) -> Self {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn from_kraus(ops: &[Mat2]) -> Self {
        let mut m = Mat4::zeros();
        for k in ops {
            let a = decompose(k);
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] += a[i] * a[j].conj();
                }
            }
        }
        Self::hermitian_part(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn normalized(&self) -> Self {
        Self(self.0 * c(1.0 / self.trace(), 0.0))
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(self.0).eigenvalues;
        let mut v = [e[0], e[1], e[2], e[3]];
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Σ_mn χ_mn P_n P_m; equals the identity for a trace-preserving map.
    pub fn tp_operator(&self) -> Mat2 {
        let p = paulis();
        let mut s = Mat2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                s += p[n] * p[m] * self.0[(m, n)];
            }
        }
        s
    }

    /// Largest elementwise deviation of [`Self::tp_operator`] from the identity.
    pub fn tp_defect(&self) -> f64 {
        let d = self.tp_operator() - Mat2::identity();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL && self.tp_defect() <= TP_TOL
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (self.0 - other.0).norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs4(&(self.0 - other.0))
    }

    /// Applies the channel to an arbitrary 2×2 operator.
    pub fn apply_operator(&self, op: &Mat2) -> Mat2 {
        let p = paulis();
        let mut out = Mat2::zeros();
        for m in 0..4 {
            let left = p[m] * op;
            for n in 0..4 {
                let w = self.0[(m, n)];
                if w != c(0.0, 0.0) {
                    out += left * p[n] * w;
                }
            }
        }
        out
    }

    /// Pauli transfer matrix R_ij = Tr(P_i E(P_j)) / 2.
    pub fn ptm(&self) -> [[f64; 4]; 4] {
        let mut r = [[0.0; 4]; 4];
        for t in ptm_terms() {
            r[t.i][t.j] += (t.coef * self.0[(t.m, t.n)]).re;
        }
        r
    }

    /// Inverse of [`Self::ptm`]. The result is Hermitian for any real `r`.
    pub fn from_ptm(r: &[[f64; 4]; 4]) -> Self {
        let inv = ptm_inverse();
        let mut m = Mat4::zeros();
        for a in 0..16 {
            let mut acc = c(0.0, 0.0);
            for b in 0..16 {
                acc += inv[(a, b)] * r[b / 4][b % 4];
            }
            m[(a / 4, a % 4)] = acc;
        }
        Self::hermitian_part(m)
    }

    pub fn to_json(&self) -> ChiJson {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                re[i][j] = self.0[(i, j)].re;
                im[i][j] = self.0[(i, j)].im;
            }
        }
        ChiJson {
            basis: LABELS.map(String::from),
            re,
            im,
        }
    }

    pub fn from_json(json: &ChiJson) -> Result<Self> {
        if json.basis != LABELS.map(String::from) {
            return Err(Error::InvalidChannel(format!(
                "unsupported basis order {:?}",
                json.basis
            )));
        }
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = c(json.re[i][j], json.im[i][j]);
            }
        }
        Self::new(m)
    }
}

/// Serialized form: `{"basis": [...], "re": 4×4, "im": 4×4}`, rows first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiJson {
    pub basis: [String; 4],
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

fn max_abs4(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Realizes E(ρ) = Σ χ_mn P_m ρ P_n. The output is a valid state whenever
/// `chi` is completely positive and trace preserving.
pub fn apply_channel(chi: &ChiMatrix, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_raw(chi.apply_operator(rho.matrix()))
}

/// Rotation by `phi` about Z with no decoherence.
pub fn chi_ideal(phi: f64) -> ChiMatrix {
    let (s, co) = (0.5 * phi).sin_cos();
    let mut m = Mat4::zeros();
    m[(0, 0)] = c(co * co, 0.0);
    m[(3, 3)] = c(s * s, 0.0);
    m[(0, 3)] = c(0.0, co * s);
    m[(3, 0)] = c(0.0, -co * s);
    ChiMatrix(m)
}

struct PtmTerm {
    i: usize,
    j: usize,
    m: usize,
    n: usize,
    coef: C64,
}

/// Nonzero entries of ½ Tr(P_i P_m P_j P_n).
fn ptm_terms() -> &'static [PtmTerm] {
    static TERMS: OnceLock<Vec<PtmTerm>> = OnceLock::new();
    TERMS.get_or_init(|| {
        let p = paulis();
        let mut out = Vec::with_capacity(64);
        for i in 0..4 {
            for j in 0..4 {
                for m in 0..4 {
                    for n in 0..4 {
                        let coef = (p[i] * p[m] * p[j] * p[n]).trace() * 0.5;
                        if coef.norm() > 0.5 {
                            out.push(PtmTerm { i, j, m, n, coef });
                        }
                    }
                }
            }
        }
        out
    })
}

fn ptm_inverse() -> &'static DMatrix<C64> {
    static INV: OnceLock<DMatrix<C64>> = OnceLock::new();
    INV.get_or_init(|| {
        let mut fwd = DMatrix::<C64>::zeros(16, 16);
        for t in ptm_terms() {
            fwd[(t.i * 4 + t.j, t.m * 4 + t.n)] += t.coef;
        }
        fwd.try_inverse().expect("Pauli transfer map is invertible")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::pauli::{pauli, rotation};
    use crate::spin::state::{density_from_bloch, BlochVector};
    use std::f64::consts::PI;

    /// Independent oracle: right-handed rotation of a Bloch vector about Z.
    fn rotate_z(b: BlochVector, phi: f64) -> BlochVector {
        let (s, co) = phi.sin_cos();
        BlochVector::new(co * b.x - s * b.y, s * b.x + co * b.y, b.z)
    }

    #[test]
    fn identity_channel_is_identity() {
        let rho = density_from_bloch(BlochVector::new(0.2, -0.5, 0.3)).unwrap();
        let out = apply_channel(&ChiMatrix::identity(), &rho);
        assert_eq!(out, rho);
    }

    #[test]
    fn z_channel_flips_x() {
        let mut m = Mat4::zeros();
        m[(3, 3)] = c(1.0, 0.0);
        let z = ChiMatrix::new(m).unwrap();
        let out = apply_channel(&z, &density_from_bloch(BlochVector::PLUS_X).unwrap());
        assert!(out.bloch().distance(&BlochVector::new(-1.0, 0.0, 0.0)) < 1e-15);
    }

    #[test]
    fn ideal_quarter_turn_moves_x_to_y() {
        let out = apply_channel(&chi_ideal(PI / 2.0), &density_from_bloch(BlochVector::PLUS_X).unwrap());
        assert!(out.bloch().distance(&BlochVector::PLUS_Y) < 1e-12);
    }

    #[test]
    fn ideal_entries() {
        let id = chi_ideal(0.0);
        assert!(id.max_abs_diff(&ChiMatrix::identity()) < 1e-15);
        let full = chi_ideal(2.0 * PI);
        assert!(full.max_abs_diff(&ChiMatrix::identity()) < 1e-15);

        let q = chi_ideal(PI / 2.0);
        let m = q.matrix();
        assert!((m[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((m[(3, 3)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((m[(0, 3)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((m[(3, 0)] - c(0.0, -0.5)).norm() < 1e-15);

        // Oracle: expand exp(-iφσz/2) in the Pauli basis.
        let from_u = ChiMatrix::from_unitary(&rotation([0.0, 0.0, 1.0], PI / 2.0));
        assert!(from_u.max_abs_diff(&q) < 1e-15);
        assert!(q.is_physical());
        let e = q.eigenvalues();
        assert!((e[3] - 1.0).abs() < 1e-12 && e[2].abs() < 1e-12);
    }

    #[test]
    fn ideal_matches_rotation_matrix_on_grid() {
        let probes = [
            BlochVector::PLUS_X,
            BlochVector::PLUS_Y,
            BlochVector::PLUS_Z,
            BlochVector::new(0.3, -0.5, 0.4),
        ];
        for k in 0..36 {
            let phi = k as f64 * 10f64.to_radians();
            let chi = chi_ideal(phi);
            for b in probes {
                let out = apply_channel(&chi, &density_from_bloch(b).unwrap()).bloch();
                assert!(out.distance(&rotate_z(b, phi)) < 1e-10, "phi={phi}");
            }
        }
    }

    #[test]
    fn ptm_round_trip() {
        let chi = ChiMatrix::from_kraus(&[
            rotation([0.0, 0.6, 0.8], 1.1) * c(0.9f64.sqrt(), 0.0),
            pauli(1) * c(0.1f64.sqrt(), 0.0),
        ]);
        let back = ChiMatrix::from_ptm(&chi.ptm());
        assert!(back.max_abs_diff(&chi) < 1e-14);
        let r = chi.ptm();
        assert!((r[0][0] - 1.0).abs() < 1e-14);
        for j in 1..4 {
            assert!(r[0][j].abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let chi = ChiMatrix::from_kraus(&[rotation([0.48, 0.6, 0.64], 0.1 + 1.0 / 3.0)]);
        let text = serde_json::to_string(&chi.to_json()).unwrap();
        let parsed: ChiJson = serde_json::from_str(&text).unwrap();
        let back = ChiMatrix::from_json(&parsed).unwrap();
        for (a, b) in chi.matrix().iter().zip(back.matrix().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert!(text.starts_with(r#"{"basis":["I","X","Y","Z"]"#));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = Mat4::zeros();
        m[(0, 1)] = c(0.1, 0.0);
        assert!(ChiMatrix::new(m).is_err());
        let mut json = ChiMatrix::identity().to_json();
        json.basis.swap(1, 2);
        assert!(ChiMatrix::from_json(&json).is_err());
    }
}
