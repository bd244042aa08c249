//! Large-universe ciphertext-policy ABE over a type-3 pairing.
//!
//! Attributes are hashed into G1, so no per-attribute public parameters are
//! needed. With generators `g` (G1) and `h` (G2) and master secrets `alpha`,
//! `beta`:
//!
//! * public: `h^beta`, `e(g,h)^alpha`; master: `beta`, `g^alpha`
//! * user key for attributes `S` with fresh `r`, `r_j`:
//!   `D = g^((alpha + r) / beta)`, and per attribute `D_j = g^r * H(j)^(r_j)`,
//!   `D'_j = h^(r_j)`
//! * encapsulation with fresh `s` shares `s` down the policy tree (each
//!   k-of-n gate uses a random degree k-1 polynomial); leaf `y` with share
//!   `q_y` gets `C_y = h^(q_y)`, `C'_y = H(attr_y)^(q_y)`. The root carries
//!   `C = h^(beta s)` and the masked element `M * e(g,h)^(alpha s)` for a
//!   random `M` in GT. The shared secret is a hash of `M`.
//!
//! Decryption pairs each selected leaf, `e(D_j, C_y) / e(C'_y, D'_j) =
//! e(g,h)^(r q_y)`, interpolates those in the exponent up to `e(g,h)^(r s)`
//! and strips the mask with `e(D, C)`.

use std::collections::BTreeMap;
use std::fmt;

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use zeroize::Zeroizing;

use crate::codec::{CodecError, Reader, Writer};
use crate::error::AbeError;
use crate::group::BilinearGroup;
use crate::par;
use crate::policy::{parse_policy, satisfies, AttributeName, AttributeSet, PolicyNode, PolicyTree, Selection};
use crate::sharing::{lagrange_at_zero, Polynomial};

pub const SUPPORTED_SECURITY_LEVEL: u32 = 128;
const KEM_SECRET_DOMAIN: &[u8] = b"cpabe/kem-secret/v1";

/// 32-byte symmetric key produced by the KEM.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret([u8; 32]);

impl SharedSecret {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

impl Drop for SharedSecret {
    fn drop(&mut self) {
        zeroize::Zeroize::zeroize(&mut self.0);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams<G: BilinearGroup> {
    pub(crate) g1: G::G1,
    pub(crate) g2: G::G2,
    pub(crate) beta_g2: G::G2,
    pub(crate) egg_alpha: G::Gt,
}

pub struct MasterKey<G: BilinearGroup> {
    beta: G::Scalar,
    alpha_g1: G::G1,
}

impl<G: BilinearGroup> fmt::Debug for MasterKey<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(..)")
    }
}

/// Key components for one attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeKey<G: BilinearGroup> {
    bound: G::G1,
    randomizer: G::G2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserKey<G: BilinearGroup> {
    base: G::G1,
    components: BTreeMap<AttributeName, AttributeKey<G>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafComponent<G: BilinearGroup> {
    share_g2: G::G2,
    attr_g1: G::G1,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KemCiphertext<G: BilinearGroup> {
    policy: PolicyTree,
    masked: G::Gt,
    root: G::G2,
    leaves: Vec<LeafComponent<G>>,
}

/// Encrypts secrets for storage outside the trusted boundary. Master keys can
/// only be serialized through one of these.
pub trait KeySealer {
    type Error: From<AbeError>;

    fn seal(&self, plaintext: &[u8]) -> Vec<u8>;
    fn unseal(&self, blob: &[u8]) -> Result<Zeroizing<Vec<u8>>, Self::Error>;
}

fn descriptor_check<G: BilinearGroup>(found: &str) -> Result<(), AbeError> {
    if found != G::DESCRIPTOR {
        return Err(AbeError::Decode(format!("group descriptor {found:?}, expected {:?}", G::DESCRIPTOR)));
    }
    Ok(())
}

fn codec_err(e: CodecError) -> AbeError {
    AbeError::Decode(e.to_string())
}

impl<G: BilinearGroup> PublicParams<G> {
    pub fn descriptor(&self) -> &'static str {
        G::DESCRIPTOR
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(G::DESCRIPTOR)
            .field(&G::encode_g1(&self.g1))
            .field(&G::encode_g2(&self.g2))
            .field(&G::encode_g2(&self.beta_g2))
            .field(&G::encode_gt(&self.egg_alpha));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        descriptor_check::<G>(r.str().map_err(codec_err)?)?;
        let g1 = G::decode_g1(r.field().map_err(codec_err)?)?;
        let g2 = G::decode_g2(r.field().map_err(codec_err)?)?;
        let beta_g2 = G::decode_g2(r.field().map_err(codec_err)?)?;
        let egg_alpha = G::decode_gt(r.field().map_err(codec_err)?)?;
        r.finish().map_err(codec_err)?;
        if G::g1_is_identity(&g1)
            || G::g2_is_identity(&g2)
            || G::g2_is_identity(&beta_g2)
            || egg_alpha == G::gt_identity()
        {
            return Err(AbeError::Decode("identity element in public parameters".into()));
        }
        Ok(Self { g1, g2, beta_g2, egg_alpha })
    }
}

impl<G: BilinearGroup> MasterKey<G> {
    fn encode(&self) -> Zeroizing<Vec<u8>> {
        let mut w = Writer::new();
        w.str(G::DESCRIPTOR).field(&G::encode_scalar(&self.beta)).field(&G::encode_g1(&self.alpha_g1));
        Zeroizing::new(w.finish())
    }

    fn decode(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        descriptor_check::<G>(r.str().map_err(codec_err)?)?;
        let beta = G::decode_scalar(r.field().map_err(codec_err)?)?;
        let alpha_g1 = G::decode_g1(r.field().map_err(codec_err)?)?;
        r.finish().map_err(codec_err)?;
        if G::scalar_is_zero(&beta) {
            return Err(AbeError::Decode("zero master scalar".into()));
        }
        Ok(Self { beta, alpha_g1 })
    }

    /// The only way to serialize a master key.
    pub fn seal<S: KeySealer>(&self, sealer: &S) -> Vec<u8> {
        sealer.seal(&self.encode())
    }

    pub fn unseal<S: KeySealer>(blob: &[u8], sealer: &S) -> Result<Self, S::Error> {
        let plain = sealer.unseal(blob)?;
        Ok(Self::decode(&plain)?)
    }

    /// Pairing check that this master key belongs to `pp`.
    pub fn matches(&self, pp: &PublicParams<G>) -> bool {
        G::pair(&self.alpha_g1, &pp.g2) == pp.egg_alpha && G::g2_mul(&pp.g2, &self.beta) == pp.beta_g2
    }
}

impl<G: BilinearGroup> UserKey<G> {
    pub fn attributes(&self) -> AttributeSet {
        self.components.keys().cloned().collect()
    }

    pub fn has_attribute(&self, a: &AttributeName) -> bool {
        self.components.contains_key(a)
    }

    /// Pairing self-check against `pp`. Every attribute component must be
    /// bound to the same per-key randomizer `r` as the base component; on
    /// success returns a digest of `e(g,h)^r`, which identifies the key's
    /// randomization without revealing it.
    pub fn verify(&self, pp: &PublicParams<G>) -> Result<[u8; 32], AbeError> {
        // e(D, h^beta) / e(g,h)^alpha = e(g,h)^r
        let blinding = G::gt_div(&G::pair(&self.base, &pp.beta_g2), &pp.egg_alpha);
        for (attr, comp) in &self.components {
            // e(D_j, h) / e(H(j), D'_j) = e(g,h)^r
            let h_attr = G::hash_to_g1(attr.as_str().as_bytes());
            let value = G::gt_div(&G::pair(&comp.bound, &pp.g2), &G::pair(&h_attr, &comp.randomizer));
            if value != blinding {
                return Err(AbeError::SelfCheckFailed(format!("component for {attr} is not bound to this key")));
            }
        }
        Ok(Sha256::digest(G::encode_gt(&blinding)).into())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(G::DESCRIPTOR).field(&G::encode_g1(&self.base)).u32(self.components.len() as u32);
        for (attr, comp) in &self.components {
            w.str(attr.as_str()).field(&G::encode_g1(&comp.bound)).field(&G::encode_g2(&comp.randomizer));
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        descriptor_check::<G>(r.str().map_err(codec_err)?)?;
        let base = G::decode_g1(r.field().map_err(codec_err)?)?;
        let count = r.u32().map_err(codec_err)? as usize;
        if count == 0 {
            return Err(AbeError::EmptyAttributeSet);
        }
        let mut components = BTreeMap::new();
        for _ in 0..count {
            let attr = AttributeName::new(r.str().map_err(codec_err)?)
                .map_err(|e| AbeError::Decode(format!("user key attribute: {e}")))?;
            let bound = G::decode_g1(r.field().map_err(codec_err)?)?;
            let randomizer = G::decode_g2(r.field().map_err(codec_err)?)?;
            if components.insert(attr.clone(), AttributeKey { bound, randomizer }).is_some() {
                return Err(AbeError::Decode(format!("duplicate attribute {attr} in user key")));
            }
        }
        r.finish().map_err(codec_err)?;
        Ok(Self { base, components })
    }
}

impl<G: BilinearGroup> KemCiphertext<G> {
    pub fn policy(&self) -> &PolicyTree {
        &self.policy
    }

    pub fn leaf_component_count(&self) -> usize {
        self.leaves.len()
    }

    /// Everything except the policy, which container framing carries
    /// separately.
    pub fn components_to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(600 + 100 + self.leaves.len() * 160);
        w.str(G::DESCRIPTOR)
            .field(&G::encode_gt(&self.masked))
            .field(&G::encode_g2(&self.root))
            .u32(self.leaves.len() as u32);
        for leaf in &self.leaves {
            w.field(&G::encode_g2(&leaf.share_g2)).field(&G::encode_g1(&leaf.attr_g1));
        }
        w.finish()
    }

    pub fn from_components(policy: PolicyTree, bytes: &[u8]) -> Result<Self, AbeError> {
        let malformed = |e: &dyn fmt::Display| AbeError::MalformedCiphertext(e.to_string());
        let mut r = Reader::new(bytes);
        let descriptor = r.str().map_err(|e| malformed(&e))?;
        if descriptor != G::DESCRIPTOR {
            return Err(AbeError::MalformedCiphertext(format!("group descriptor {descriptor:?}")));
        }
        let masked = G::decode_gt(r.field().map_err(|e| malformed(&e))?).map_err(|e| malformed(&e))?;
        let root = G::decode_g2(r.field().map_err(|e| malformed(&e))?).map_err(|e| malformed(&e))?;
        let count = r.u32().map_err(|e| malformed(&e))? as usize;
        if count != policy.leaf_count() {
            return Err(AbeError::MalformedCiphertext(format!(
                "{count} leaf components for a policy with {} leaves",
                policy.leaf_count()
            )));
        }
        let mut leaves = Vec::with_capacity(count);
        for _ in 0..count {
            let share_g2 = G::decode_g2(r.field().map_err(|e| malformed(&e))?).map_err(|e| malformed(&e))?;
            let attr_g1 = G::decode_g1(r.field().map_err(|e| malformed(&e))?).map_err(|e| malformed(&e))?;
            leaves.push(LeafComponent { share_g2, attr_g1 });
        }
        r.finish().map_err(|e| malformed(&e))?;
        Ok(Self { policy, masked, root, leaves })
    }

    /// Policy text followed by the components.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(self.policy.text()).field(&self.components_to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let text = r.str().map_err(|e| AbeError::MalformedCiphertext(e.to_string()))?;
        let policy = parse_policy(text).map_err(|e| AbeError::MalformedCiphertext(format!("policy: {e}")))?;
        let comps = r.field().map_err(|e| AbeError::MalformedCiphertext(e.to_string()))?;
        r.finish().map_err(|e| AbeError::MalformedCiphertext(e.to_string()))?;
        Self::from_components(policy, comps)
    }
}

pub fn setup<G, R>(security_level: u32, rng: &mut R) -> Result<(PublicParams<G>, MasterKey<G>), AbeError>
where
    G: BilinearGroup,
    R: RngCore + CryptoRng + ?Sized,
{
    if security_level != SUPPORTED_SECURITY_LEVEL {
        return Err(AbeError::UnsupportedSecurityLevel(security_level));
    }
    let alpha = G::random_scalar(rng);
    let beta = G::random_scalar(rng);
    let g1 = G::g1_generator();
    let g2 = G::g2_generator();
    let alpha_g1 = G::g1_mul(&g1, &alpha);
    let pp = PublicParams { g1, g2, beta_g2: G::g2_mul(&g2, &beta), egg_alpha: G::pair(&alpha_g1, &g2) };
    let mk = MasterKey { beta, alpha_g1 };
    debug_assert!(mk.matches(&pp));
    Ok((pp, mk))
}

pub fn keygen<G, R>(
    pp: &PublicParams<G>,
    mk: &MasterKey<G>,
    attrs: &AttributeSet,
    rng: &mut R,
) -> Result<UserKey<G>, AbeError>
where
    G: BilinearGroup,
    R: RngCore + CryptoRng + ?Sized,
{
    if attrs.is_empty() {
        return Err(AbeError::EmptyAttributeSet);
    }
    let r = G::random_scalar(rng);
    let beta_inv = G::scalar_inverse(&mk.beta).expect("master scalar is non-zero");
    let g_r = G::g1_mul(&pp.g1, &r);
    let base = G::g1_mul(&G::g1_add(&mk.alpha_g1, &g_r), &beta_inv);

    let jobs: Vec<(&AttributeName, G::Scalar)> = attrs.iter().map(|a| (a, G::random_scalar(rng))).collect();
    let comps = par::map(&jobs, |(attr, r_j)| {
        let h = G::hash_to_g1(attr.as_str().as_bytes());
        AttributeKey::<G> { bound: G::g1_add(&g_r, &G::g1_mul(&h, r_j)), randomizer: G::g2_mul(&pp.g2, r_j) }
    });
    let components = jobs.into_iter().map(|(a, _)| a.clone()).zip(comps).collect();
    Ok(UserKey { base, components })
}

fn derive_secret<G: BilinearGroup>(m: &G::Gt) -> SharedSecret {
    let mut h = Sha256::new();
    h.update(KEM_SECRET_DOMAIN);
    h.update(G::encode_gt(m));
    SharedSecret(h.finalize().into())
}

fn share_down<G, R>(node: &PolicyNode, share: G::Scalar, rng: &mut R, out: &mut Vec<G::Scalar>)
where
    G: BilinearGroup,
    R: RngCore + CryptoRng + ?Sized,
{
    match node {
        PolicyNode::Leaf(_) => out.push(share),
        PolicyNode::Gate { threshold, children } => {
            let poly = Polynomial::<G>::random(share, *threshold, rng);
            for (i, child) in children.iter().enumerate() {
                share_down::<G, R>(child, poly.evaluate(i as u64 + 1), rng, out);
            }
        }
    }
}

pub fn kem_encrypt<G, R>(
    pp: &PublicParams<G>,
    policy: &PolicyTree,
    rng: &mut R,
) -> Result<(SharedSecret, KemCiphertext<G>), AbeError>
where
    G: BilinearGroup,
    R: RngCore + CryptoRng + ?Sized,
{
    let s = G::random_scalar(rng);
    let m = G::random_scalar(rng);
    // M = e(g,h)^(alpha m) is uniform in GT; masked = M * e(g,h)^(alpha s)
    let mask_element = G::gt_pow(&pp.egg_alpha, &m);
    let masked = G::gt_pow(&pp.egg_alpha, &(m + s));
    let root = G::g2_mul(&pp.beta_g2, &s);

    let mut shares = Vec::with_capacity(policy.leaf_count());
    share_down::<G, R>(policy.root(), s, rng, &mut shares);
    let jobs: Vec<(&AttributeName, G::Scalar)> = policy.leaves().into_iter().zip(shares).collect();
    let leaves = par::map(&jobs, |(attr, q)| LeafComponent::<G> {
        share_g2: G::g2_mul(&pp.g2, q),
        attr_g1: G::g1_mul(&G::hash_to_g1(attr.as_str().as_bytes()), q),
    });

    Ok((derive_secret::<G>(&mask_element), KemCiphertext { policy: policy.clone(), masked, root, leaves }))
}

/// Flattens nested interpolation: each selected leaf's contribution is
/// raised to the product of the Lagrange coefficients on its path.
fn leaf_coefficients<G: BilinearGroup>(sel: &Selection, coefficient: G::Scalar, out: &mut Vec<(usize, G::Scalar)>) {
    match sel {
        Selection::Leaf { leaf_index } => out.push((*leaf_index, coefficient)),
        Selection::Gate { children } => {
            let points: Vec<u64> = children.iter().map(|(i, _)| *i as u64 + 1).collect();
            for ((_, child), &x) in children.iter().zip(&points) {
                let c = coefficient * lagrange_at_zero::<G>(x, &points);
                leaf_coefficients::<G>(child, c, out);
            }
        }
    }
}

/// Public parameters are not needed by this construction's decryption.
pub fn kem_decrypt<G: BilinearGroup>(
    _pp: &PublicParams<G>,
    uk: &UserKey<G>,
    ct: &KemCiphertext<G>,
) -> Result<SharedSecret, AbeError> {
    if ct.leaves.len() != ct.policy.leaf_count() {
        return Err(AbeError::MalformedCiphertext("leaf component count does not match policy".into()));
    }
    let selection = satisfies(&ct.policy, &uk.attributes()).selection.ok_or(AbeError::SatisfactionFailure)?;

    let mut weighted = Vec::new();
    leaf_coefficients::<G>(&selection, G::scalar_from_u64(1), &mut weighted);
    let leaves = ct.policy.leaves();
    let one = G::scalar_from_u64(1);
    let terms = par::map(&weighted, |(idx, c)| {
        let comp = &uk.components[leaves[*idx]];
        let leaf = &ct.leaves[*idx];
        // e(D_j, C_y)^c * e(C'_y, D'_j)^(-c)
        let (bound, attr) = if *c == one {
            (comp.bound, G::g1_mul(&leaf.attr_g1, &-one))
        } else {
            (G::g1_mul(&comp.bound, c), G::g1_mul(&leaf.attr_g1, &-*c))
        };
        G::multi_pair(&[(bound, leaf.share_g2), (attr, comp.randomizer)])
    });
    // e(g,h)^(r s)
    let blinding = terms.iter().fold(G::gt_identity(), |acc, t| G::gt_mul(&acc, t));
    // e(D, C) = e(g,h)^((alpha + r) s)
    let unmasked = G::gt_div(&G::gt_mul(&ct.masked, &blinding), &G::pair(&uk.base, &ct.root));
    Ok(derive_secret::<G>(&unmasked))
}
