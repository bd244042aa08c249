//! Shamir sharing over the scalar field, indexed at x = 1, 2, ...

use rand::{CryptoRng, RngCore};

use crate::group::BilinearGroup;

/// Random polynomial of degree `threshold - 1` with constant term `secret`.
pub struct Polynomial<G: BilinearGroup> {
    coefficients: Vec<G::Scalar>,
}

impl<G: BilinearGroup> Polynomial<G> {
    pub fn random<R: RngCore + CryptoRng + ?Sized>(secret: G::Scalar, threshold: usize, rng: &mut R) -> Self {
        assert!(threshold >= 1);
        let mut coefficients = Vec::with_capacity(threshold);
        coefficients.push(secret);
        coefficients.extend((1..threshold).map(|_| G::random_scalar(rng)));
        Self { coefficients }
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: u64) -> G::Scalar {
        let x = G::scalar_from_u64(x);
        let mut acc = *self.coefficients.last().expect("non-empty");
        for c in self.coefficients.iter().rev().skip(1) {
            acc = acc * x + *c;
        }
        acc
    }
}

/// Lagrange basis coefficient at zero for point `x` over the set `points`:
/// `prod_{j != x} (0 - j) / (x - j)`.
pub fn lagrange_at_zero<G: BilinearGroup>(x: u64, points: &[u64]) -> G::Scalar {
    let xi = G::scalar_from_u64(x);
    let mut num = G::scalar_from_u64(1);
    let mut den = G::scalar_from_u64(1);
    for &j in points.iter().filter(|&&j| j != x) {
        let xj = G::scalar_from_u64(j);
        num = num * (-xj);
        den = den * (xi - xj);
    }
    num * G::scalar_inverse(&den).expect("points are distinct")
}
