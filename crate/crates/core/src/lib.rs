//! Ciphertext-policy attribute-based encryption over BLS12-381.
//!
//! Ciphertexts carry a threshold access tree (see [`policy`]); user keys carry
//! attributes. A key decrypts exactly when its attributes satisfy the tree.
//! Files are protected with a hybrid construction: the ABE scheme
//! encapsulates a 32-byte key ([`scheme`]) that drives AES-256-GCM over the
//! file body ([`dem`]), framed by [`container`].
//!
//! ```
//! use cpabe_core::{abe, policy};
//!
//! let mut rng = rand::thread_rng();
//! let (pp, mk) = abe::setup(128, &mut rng).unwrap();
//! let tree = policy::parse_policy("designation:professor department:cs 2of2").unwrap();
//! let attrs = policy::parse_attribute_list("designation:professor,department:cs").unwrap();
//! let key = abe::keygen(&pp, &mk, &attrs, &mut rng).unwrap();
//!
//! let container = abe::encrypt_file(&pp, &tree, b"grades", &mut rng).unwrap();
//! assert_eq!(abe::decrypt_file(&pp, &key, &container).unwrap(), b"grades");
//! ```

pub mod codec;
pub mod container;
pub mod dem;
pub mod error;
pub mod group;
mod par;
pub mod policy;
pub mod scheme;
pub mod sharing;

pub use container::{CiphertextContainer, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use error::AbeError;
pub use par::is_parallel;
pub use scheme::{KeySealer, SharedSecret};

/// The scheme instantiated over BLS12-381.
pub mod abe {
    use rand::{CryptoRng, RngCore};

    use crate::group::Bls12381;
    use crate::policy::{AttributeSet, PolicyTree};
    use crate::{AbeError, CiphertextContainer, SharedSecret};

    pub use crate::container::open_body;
    pub use crate::dem::{dem_decrypt, dem_encrypt};

    pub type Group = Bls12381;
    pub type PublicParams = crate::scheme::PublicParams<Bls12381>;
    pub type MasterKey = crate::scheme::MasterKey<Bls12381>;
    pub type UserKey = crate::scheme::UserKey<Bls12381>;
    pub type KemCiphertext = crate::scheme::KemCiphertext<Bls12381>;

    pub fn setup<R: RngCore + CryptoRng + ?Sized>(
        security_level: u32,
        rng: &mut R,
    ) -> Result<(PublicParams, MasterKey), AbeError> {
        crate::scheme::setup::<Bls12381, R>(security_level, rng)
    }

    pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
        pp: &PublicParams,
        mk: &MasterKey,
        attrs: &AttributeSet,
        rng: &mut R,
    ) -> Result<UserKey, AbeError> {
        crate::scheme::keygen(pp, mk, attrs, rng)
    }

    pub fn kem_encrypt<R: RngCore + CryptoRng + ?Sized>(
        pp: &PublicParams,
        policy: &PolicyTree,
        rng: &mut R,
    ) -> Result<(SharedSecret, KemCiphertext), AbeError> {
        crate::scheme::kem_encrypt(pp, policy, rng)
    }

    pub fn kem_decrypt(pp: &PublicParams, uk: &UserKey, ct: &KemCiphertext) -> Result<SharedSecret, AbeError> {
        crate::scheme::kem_decrypt(pp, uk, ct)
    }

    pub fn encrypt_file<R: RngCore + CryptoRng + ?Sized>(
        pp: &PublicParams,
        policy: &PolicyTree,
        plaintext: &[u8],
        rng: &mut R,
    ) -> Result<CiphertextContainer, AbeError> {
        crate::container::encrypt_file(pp, policy, plaintext, rng)
    }

    pub fn decrypt_file(pp: &PublicParams, uk: &UserKey, container: &CiphertextContainer) -> Result<Vec<u8>, AbeError> {
        crate::container::decrypt_file(pp, uk, container)
    }

    pub fn seal_body<R: RngCore + CryptoRng + ?Sized>(
        policy: &PolicyTree,
        kem: &KemCiphertext,
        key: &[u8; 32],
        plaintext: &[u8],
        rng: &mut R,
    ) -> CiphertextContainer {
        crate::container::seal_body(policy, kem, key, plaintext, rng)
    }

    pub fn open_kem(container: &CiphertextContainer) -> Result<KemCiphertext, AbeError> {
        crate::container::open_kem::<Bls12381>(container)
    }
}
