//! Bilinear group abstraction used by the ABE scheme, plus the BLS12-381
//! instantiation.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use ark_bls12_381::{g1, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AdditiveGroup, AffineRepr, CurveGroup, PrimeGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{Field, PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

/// Element could not be decoded (wrong length, not on curve, not in the
/// prime-order subgroup, or non-canonical).
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid {0} encoding")]
pub struct DecodeError(pub &'static str);

/// Type-3 pairing `e: G1 x G2 -> GT` with prime order `q`.
///
/// Group operations are written additively for G1/G2 and multiplicatively for
/// GT.
pub trait BilinearGroup: Send + Sync + 'static {
    /// Recorded in public parameters so mismatched groups are refused.
    const DESCRIPTOR: &'static str;

    type Scalar: Copy
        + Debug
        + Eq
        + Send
        + Sync
        + Add<Output = Self::Scalar>
        + Sub<Output = Self::Scalar>
        + Mul<Output = Self::Scalar>
        + Neg<Output = Self::Scalar>;
    type G1: Copy + Debug + Eq + Send + Sync;
    type G2: Copy + Debug + Eq + Send + Sync;
    type Gt: Copy + Debug + Eq + Send + Sync;

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self::Scalar;
    fn scalar_from_u64(v: u64) -> Self::Scalar;
    fn scalar_inverse(s: &Self::Scalar) -> Option<Self::Scalar>;
    fn scalar_is_zero(s: &Self::Scalar) -> bool;

    fn g1_generator() -> Self::G1;
    fn g2_generator() -> Self::G2;
    fn g1_add(a: &Self::G1, b: &Self::G1) -> Self::G1;
    fn g1_mul(p: &Self::G1, s: &Self::Scalar) -> Self::G1;
    fn g2_mul(p: &Self::G2, s: &Self::Scalar) -> Self::G2;
    fn g1_is_identity(p: &Self::G1) -> bool;
    fn g2_is_identity(p: &Self::G2) -> bool;

    fn gt_identity() -> Self::Gt;
    fn gt_mul(a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_div(a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_pow(a: &Self::Gt, s: &Self::Scalar) -> Self::Gt;

    fn pair(p: &Self::G1, q: &Self::G2) -> Self::Gt;
    /// Product of pairings, sharing a single final exponentiation.
    fn multi_pair(pairs: &[(Self::G1, Self::G2)]) -> Self::Gt;

    /// Hashes an attribute token into G1 (random-oracle style).
    fn hash_to_g1(msg: &[u8]) -> Self::G1;

    fn encode_scalar(s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(b: &[u8]) -> Result<Self::Scalar, DecodeError>;
    fn encode_g1(p: &Self::G1) -> Vec<u8>;
    fn decode_g1(b: &[u8]) -> Result<Self::G1, DecodeError>;
    fn encode_g2(p: &Self::G2) -> Vec<u8>;
    fn decode_g2(b: &[u8]) -> Result<Self::G2, DecodeError>;
    fn encode_gt(p: &Self::Gt) -> Vec<u8>;
    fn decode_gt(b: &[u8]) -> Result<Self::Gt, DecodeError>;
}

const HASH_TO_G1_DST: &[u8] = b"CPABE-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";

/// BLS12-381 via arkworks. G1/G2 points are stored affine and encoded
/// compressed (48/96 bytes); GT elements take 576 bytes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bls12381;

type Gt381 = PairingOutput<Bls12_381>;

fn encode<T: CanonicalSerialize>(v: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut out).expect("writing to a Vec cannot fail");
    out
}

fn decode<T: CanonicalDeserialize>(mut b: &[u8], what: &'static str) -> Result<T, DecodeError> {
    let v = T::deserialize_compressed(&mut b).map_err(|_| DecodeError(what))?;
    if !b.is_empty() {
        return Err(DecodeError(what));
    }
    Ok(v)
}

impl BilinearGroup for Bls12381 {
    const DESCRIPTOR: &'static str = "BLS12-381;H1=XMD:SHA-256_SSWU_RO";

    type Scalar = Fr;
    type G1 = G1Affine;
    type G2 = G2Affine;
    type Gt = Gt381;

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Fr {
        loop {
            let mut seed = [0u8; 64];
            rng.fill_bytes(&mut seed);
            let s = Fr::from_le_bytes_mod_order(&seed);
            if !s.is_zero() {
                return s;
            }
        }
    }

    fn scalar_from_u64(v: u64) -> Fr {
        Fr::from(v)
    }

    fn scalar_inverse(s: &Fr) -> Option<Fr> {
        s.inverse()
    }

    fn scalar_is_zero(s: &Fr) -> bool {
        s.is_zero()
    }

    fn g1_generator() -> G1Affine {
        G1Projective::generator().into_affine()
    }

    fn g2_generator() -> G2Affine {
        G2Projective::generator().into_affine()
    }

    fn g1_add(a: &G1Affine, b: &G1Affine) -> G1Affine {
        (*a + *b).into_affine()
    }

    fn g1_mul(p: &G1Affine, s: &Fr) -> G1Affine {
        (*p * s).into_affine()
    }

    fn g2_mul(p: &G2Affine, s: &Fr) -> G2Affine {
        (*p * s).into_affine()
    }

    fn g1_is_identity(p: &G1Affine) -> bool {
        p.is_zero()
    }

    fn g2_is_identity(p: &G2Affine) -> bool {
        p.is_zero()
    }

    fn gt_identity() -> Gt381 {
        Gt381::ZERO
    }

    fn gt_mul(a: &Gt381, b: &Gt381) -> Gt381 {
        *a + *b
    }

    fn gt_div(a: &Gt381, b: &Gt381) -> Gt381 {
        *a - *b
    }

    fn gt_pow(a: &Gt381, s: &Fr) -> Gt381 {
        *a * s
    }

    fn pair(p: &G1Affine, q: &G2Affine) -> Gt381 {
        Bls12_381::pairing(*p, *q)
    }

    fn multi_pair(pairs: &[(G1Affine, G2Affine)]) -> Gt381 {
        Bls12_381::multi_pairing(pairs.iter().map(|(a, _)| *a), pairs.iter().map(|(_, b)| *b))
    }

    fn hash_to_g1(msg: &[u8]) -> G1Affine {
        let hasher = MapToCurveBasedHasher::<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>::new(
            HASH_TO_G1_DST,
        )
        .expect("static hasher parameters are valid");
        hasher.hash(msg).expect("hash-to-curve over SSWU is total")
    }

    fn encode_scalar(s: &Fr) -> Vec<u8> {
        encode(s)
    }

    fn decode_scalar(b: &[u8]) -> Result<Fr, DecodeError> {
        decode(b, "scalar")
    }

    fn encode_g1(p: &G1Affine) -> Vec<u8> {
        encode(p)
    }

    fn decode_g1(b: &[u8]) -> Result<G1Affine, DecodeError> {
        decode(b, "G1 point")
    }

    fn encode_g2(p: &G2Affine) -> Vec<u8> {
        encode(p)
    }

    fn decode_g2(b: &[u8]) -> Result<G2Affine, DecodeError> {
        decode(b, "G2 point")
    }

    fn encode_gt(p: &Gt381) -> Vec<u8> {
        encode(p)
    }

    fn decode_gt(b: &[u8]) -> Result<Gt381, DecodeError> {
        decode(b, "GT element")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = Bls12381;

    #[test]
    fn bilinearity_holds_on_random_exponents() {
        let mut rng = rand::thread_rng();
        let g = G::g1_generator();
        let h = G::g2_generator();
        let base = G::pair(&g, &h);
        for _ in 0..100 {
            let a = G::random_scalar(&mut rng);
            let b = G::random_scalar(&mut rng);
            let lhs = G::pair(&G::g1_mul(&g, &a), &G::g2_mul(&h, &b));
            assert_eq!(lhs, G::gt_pow(&base, &(a * b)));
        }
    }

    #[test]
    fn pairing_is_non_degenerate() {
        assert_ne!(G::pair(&G::g1_generator(), &G::g2_generator()), G::gt_identity());
    }

    #[test]
    fn multi_pair_matches_product() {
        let mut rng = rand::thread_rng();
        let pairs: Vec<_> = (0..3)
            .map(|_| {
                let a = G::random_scalar(&mut rng);
                let b = G::random_scalar(&mut rng);
                (G::g1_mul(&G::g1_generator(), &a), G::g2_mul(&G::g2_generator(), &b))
            })
            .collect();
        let product = pairs.iter().fold(G::gt_identity(), |acc, (p, q)| G::gt_mul(&acc, &G::pair(p, q)));
        assert_eq!(G::multi_pair(&pairs), product);
    }

    #[test]
    fn encodings_round_trip_byte_exactly() {
        let mut rng = rand::thread_rng();
        for _ in 0..20 {
            let s = G::random_scalar(&mut rng);
            let p = G::g1_mul(&G::g1_generator(), &s);
            let q = G::g2_mul(&G::g2_generator(), &s);
            let t = G::pair(&p, &G::g2_generator());
            let (es, ep, eq, et) = (G::encode_scalar(&s), G::encode_g1(&p), G::encode_g2(&q), G::encode_gt(&t));
            assert_eq!((es.len(), ep.len(), eq.len(), et.len()), (32, 48, 96, 576));
            assert_eq!(G::encode_scalar(&G::decode_scalar(&es).unwrap()), es);
            assert_eq!(G::encode_g1(&G::decode_g1(&ep).unwrap()), ep);
            assert_eq!(G::encode_g2(&G::decode_g2(&eq).unwrap()), eq);
            assert_eq!(G::encode_gt(&G::decode_gt(&et).unwrap()), et);
        }
    }

    #[test]
    fn decode_rejects_garbage_and_trailing_bytes() {
        let p = G::encode_g1(&G::g1_generator());
        let mut long = p.clone();
        long.push(0);
        assert!(G::decode_g1(&long).is_err());
        assert!(G::decode_g1(&p[..47]).is_err());
        assert!(G::decode_g2(&[0xaa; 96]).is_err());
        assert!(G::decode_gt(&[0x11; 576]).is_err());
    }

    #[test]
    fn hash_to_g1_is_deterministic_and_separating() {
        let a = G::hash_to_g1(b"department:cs");
        assert_eq!(a, G::hash_to_g1(b"department:cs"));
        assert_ne!(a, G::hash_to_g1(b"department:ee"));
        assert!(!G::g1_is_identity(&a));
    }
}
