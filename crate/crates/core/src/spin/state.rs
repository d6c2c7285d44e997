use std::fmt;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::pauli::{c, max_abs_diff, pauli, Mat2};
use crate::error::{Error, Result};

/// Tolerance on Hermiticity, trace and positivity of a density matrix.
pub const STATE_TOL: f64 = 1e-12;
const BLOCH_REJECT_TOL: f64 = 1e-9;

/// Expectation values of (X, Y, Z) for a qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const PLUS_Z: Self = Self::new(0.0, 0.0, 1.0);
    pub const MINUS_Z: Self = Self::new(0.0, 0.0, -1.0);
    pub const PLUS_X: Self = Self::new(1.0, 0.0, 0.0);
    pub const PLUS_Y: Self = Self::new(0.0, 1.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Length of the transverse (xy) component.
    pub fn transverse(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Azimuth of the transverse component in radians, in (-π, π].
    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let d = [self.x - other.x, self.y - other.y, self.z - other.z];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.x, self.y, self.z)
    }
}

/// A qubit density matrix. Index 0 is |0⟩ (Bloch +Z), index 1 is |−1⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat2);

impl DensityMatrix {
    pub fn ground() -> Self {
        Self(Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)))
    }

    /// Checks Hermiticity, unit trace and positivity at [`STATE_TOL`].
    pub fn new(m: Mat2) -> Result<Self> {
        Self::with_tolerance(m, STATE_TOL)
    }

    pub fn with_tolerance(m: Mat2, tol: f64) -> Result<Self> {
        let herm = max_abs_diff(&m, &m.adjoint());
        if herm > tol {
            return Err(Error::UnphysicalState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr - c(1.0, 0.0)).norm() > tol {
            return Err(Error::UnphysicalState(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(&m);
        if min_eig < -tol {
            return Err(Error::UnphysicalState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by trusted propagation code.
    pub(crate) fn from_raw(m: Mat2) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat2 {
        self.0
    }

    /// Population of |0⟩.
    pub fn p0(&self) -> f64 {
        self.0[(0, 0)].re
    }

    pub fn bloch(&self) -> BlochVector {
        let m = &self.0;
        BlochVector::new(
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        )
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let e = SymmetricEigen::new(self.0).eigenvalues;
        let (a, b) = (e[0], e[1]);
        if a <= b {
            [a, b]
        } else {
            [b, a]
        }
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

fn min_eigenvalue(m: &Mat2) -> f64 {
    // Hermitian part only; callers have already bounded the anti-Hermitian part.
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.min()
}

/// ρ = (I + b·σ)/2. Rejects vectors longer than one.
pub fn density_from_bloch(b: BlochVector) -> Result<DensityMatrix> {
    let n = b.norm();
    if !n.is_finite() || n > 1.0 + BLOCH_REJECT_TOL {
        return Err(Error::UnphysicalState(format!("Bloch vector norm {n} exceeds 1")));
    }
    let m = (pauli(0) + pauli(1) * c(b.x, 0.0) + pauli(2) * c(b.y, 0.0) + pauli(3) * c(b.z, 0.0))
        * c(0.5, 0.0);
    Ok(DensityMatrix(m))
}
