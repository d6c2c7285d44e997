//! Random states and channels for property checks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::chi::{ChiMatrix, Mat4};
use super::pauli::{c, Mat2, C64};
use super::state::BlochVector;

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// A uniformly random point in the Bloch ball.
pub fn random_bloch<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let b = BlochVector::from_array(v);
        if b.norm() <= 1.0 {
            return b;
        }
    }
}

/// A random CPTP channel with `rank` Kraus operators, built from a random
/// Stinespring isometry. Returns the χ matrix and the Kraus set.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> (ChiMatrix, Vec<Mat2>) {
    let rank = rank.clamp(1, 4);
    let g = DMatrix::<C64>::from_fn(2 * rank, 2, |_, _| gaussian_c64(rng));
    // V = G (G†G)^{-1/2} has orthonormal columns.
    let gram = g.adjoint() * &g;
    let eig = SymmetricEigen::new(gram);
    let inv_sqrt = DMatrix::<C64>::from_diagonal(&eig.eigenvalues.map(|l| c(1.0 / l.sqrt(), 0.0)));
    let v = &g * (&eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint());
    let kraus: Vec<Mat2> = (0..rank)
        .map(|k| Mat2::from_fn(|i, j| v[(2 * k + i, j)]))
        .collect();
    (ChiMatrix::from_kraus(&kraus), kraus)
}

/// A random Hermitian (not necessarily physical) 4×4 matrix.
pub fn random_hermitian_chi<R: Rng + ?Sized>(rng: &mut R) -> ChiMatrix {
    let m = Mat4::from_fn(|_, _| gaussian_c64(rng));
    ChiMatrix::hermitian_part(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_channels_are_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rank in 1..=4 {
            for _ in 0..25 {
                let (chi, kraus) = random_channel(&mut rng, rank);
                assert!(chi.is_physical(), "rank {rank}");
                let sum: Mat2 = kraus.iter().map(|k| k.adjoint() * k).sum();
                assert!((sum - Mat2::identity()).norm() < 1e-12);
                assert!((chi.trace() - 1.0).abs() < 1e-12);
            }
        }
    }
}
