//! Timing harness. Each configuration is measured through the direct library
//! path (enclave off) and through ECALLs (enclave on), interleaved per
//! repetition.

use std::sync::Arc;
use std::time::Instant;

use cpabe_core::abe::{self, MasterKey, PublicParams};
use cpabe_core::policy::{AttributeSet, PolicyError};
use cpabe_core::{AbeError, CiphertextContainer};
use cpabe_enclave::attestation::{attest_and_provision, AttestationError, Platform, Verifier, VerifierConfig};
use cpabe_enclave::{
    create_enclave, DeviceSecret, EnclaveClient, EnclaveConfig, EnclaveError, MemoryStore, SealedKeys,
};
use ed25519_dalek::SigningKey;
use rand::RngCore;
use thiserror::Error;

use crate::config::{BenchConfig, ConfigError, Point};
use crate::policy_gen::{generate_policy, rule_attribute_set, rule_attributes};
use crate::record::{summarize, write_csv_file, BenchRecord, Phase};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Enclave(#[from] EnclaveError),
    #[error(transparent)]
    Attestation(#[from] AttestationError),
    #[error("writing results: {0}")]
    Output(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("round trip produced different bytes")]
    Mismatch,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Direct library path.
struct Native {
    pp: PublicParams,
    mk: MasterKey,
}

/// Wall-clock total and the ABE part of it, in ms.
struct Timed {
    total: f64,
    kem: f64,
}

impl Native {
    fn encrypt(&self, point: &Fixture) -> Result<(Timed, Vec<u8>), BenchError> {
        let mut rng = rand::thread_rng();
        let t0 = Instant::now();
        let (secret, kem) = abe::kem_encrypt(&self.pp, &point.policy, &mut rng)?;
        let kem_ms = ms(t0);
        let bytes = abe::seal_body(&point.policy, &kem, secret.as_bytes(), &point.payload, &mut rng).to_bytes();
        Ok((Timed { total: ms(t0), kem: kem_ms }, bytes))
    }

    fn decrypt(&self, point: &Fixture, bytes: &[u8]) -> Result<Timed, BenchError> {
        let mut rng = rand::thread_rng();
        let t0 = Instant::now();
        let container = CiphertextContainer::parse(bytes)?;
        let t1 = Instant::now();
        let key = abe::keygen(&self.pp, &self.mk, &point.decrypt_attrs, &mut rng)?;
        let kem = abe::open_kem(&container)?;
        let secret = abe::kem_decrypt(&self.pp, &key, &kem)?;
        let kem_ms = ms(t1);
        let plaintext = abe::open_body(&container, secret.as_bytes())?;
        let total = ms(t0);
        if plaintext != point.payload {
            return Err(BenchError::Mismatch);
        }
        Ok(Timed { total, kem: kem_ms })
    }
}

/// ECALL path. Keys and policy travel sealed with every call and are
/// unsealed inside, so no state is kept in the enclave between calls.
struct Enclaved {
    store: Arc<MemoryStore>,
    client: EnclaveClient,
    platform: Platform,
    verifier_identity: SigningKey,
    keys: SealedKeys,
}

impl Enclaved {
    fn new() -> Result<Self, BenchError> {
        let mut device = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut device);
        let verifier_identity = SigningKey::generate(&mut rand::rngs::OsRng);
        let store = Arc::new(MemoryStore::new());
        let config = EnclaveConfig::new("cpabe-bench", 1, DeviceSecret::from_bytes(device))
            .with_verifier(verifier_identity.verifying_key());
        let client = EnclaveClient::new(Arc::new(create_enclave(config, store.clone())));
        let platform = Platform::new(DeviceSecret::from_bytes(device), SigningKey::generate(&mut rand::rngs::OsRng));
        let keys = client.setup()?;
        Ok(Self { store, client, platform, verifier_identity, keys })
    }

    /// Attest and provision `policy`; returns the sealed policy blob.
    fn provision(&self, policy: &str) -> Result<Vec<u8>, BenchError> {
        let measurement = *self.client.enclave().measurement();
        let verifier = Verifier::new(
            VerifierConfig::new(measurement, self.platform.verification_key(), policy),
            self.verifier_identity.clone(),
        );
        Ok(attest_and_provision(&self.client, &self.platform, &verifier)?.sealed)
    }

    /// Leaves the container in `bench/ct`.
    fn encrypt(&self, point: &Fixture, sealed_policy: &[u8]) -> Result<f64, BenchError> {
        self.store.put("bench/in", point.payload.clone());
        let t0 = Instant::now();
        self.client.encrypt("bench/in", "bench/ct", Some((&self.keys, sealed_policy)))?;
        let elapsed = ms(t0);
        self.store.take("bench/in");
        Ok(elapsed)
    }

    fn decrypt(&self, point: &Fixture) -> Result<f64, BenchError> {
        let t0 = Instant::now();
        self.client.decrypt(&point.decrypt_attr_list, "bench/ct", "bench/pt", Some(&self.keys))?;
        let elapsed = ms(t0);
        self.store.take("bench/ct");
        if self.store.take("bench/pt").as_deref() != Some(point.payload.as_slice()) {
            return Err(BenchError::Mismatch);
        }
        Ok(elapsed)
    }
}

struct Fixture {
    policy: cpabe_core::policy::PolicyTree,
    payload: Vec<u8>,
    decrypt_attrs: AttributeSet,
    decrypt_attr_list: String,
}

impl Fixture {
    fn new(p: Point) -> Result<Self, BenchError> {
        let policy = generate_policy(p.rules, p.attrs_per_rule)?;
        let mut payload = vec![0u8; p.file_bytes];
        rand::thread_rng().fill_bytes(&mut payload);
        // a key for exactly the last rule
        Ok(Self {
            policy,
            payload,
            decrypt_attrs: rule_attribute_set(p.rules, p.attrs_per_rule),
            decrypt_attr_list: rule_attributes(p.rules, p.attrs_per_rule).join(","),
        })
    }
}

#[derive(Default)]
struct Samples {
    enc: Vec<f64>,
    enc_kem: Vec<f64>,
    dec: Vec<f64>,
    dec_kem: Vec<f64>,
    enc_on: Vec<f64>,
    dec_on: Vec<f64>,
}

/// Runs the sweep on a single worker thread and returns one record per
/// (value, phase, enclave flag). Writes CSV when `config.output` is set.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let records = pool.install(|| measure(config))?;
    if let Some(path) = &config.output {
        write_csv_file(path, &records)?;
    }
    Ok(records)
}

fn measure(config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let flags = config.enclave.flags();
    let want_off = flags.contains(&false);
    let want_on = flags.contains(&true);
    let (pp, mk) = abe::setup(128, &mut rand::thread_rng())?;
    let native = Native { pp, mk };
    let enclaved = if want_on { Some(Enclaved::new()?) } else { None };

    let mut points = Vec::with_capacity(config.sweep.len());
    for &value in &config.sweep {
        let point = config.point(value);
        let fixture = Fixture::new(point)?;
        let sealed_policy = match &enclaved {
            Some(e) => e.provision(fixture.policy.text())?,
            None => Vec::new(),
        };
        log::info!("{} = {value}: {} leaves, {} bytes", config.experiment, point.leaf_count(), point.file_bytes);
        points.push((value, fixture, sealed_policy, Samples::default()));
    }

    // one repetition of one value: encrypt off/on, then decrypt off/on
    let step = |first_on: bool, fixture: &Fixture, sealed_policy: &[u8], s: &mut Samples| -> Result<(), BenchError> {
        let order = if first_on { [true, false] } else { [false, true] };
        let mut container = Vec::new();
        for on in order {
            match (&enclaved, on) {
                (Some(e), true) => s.enc_on.push(e.encrypt(fixture, sealed_policy)?),
                (_, false) if want_off => {
                    let (t, bytes) = native.encrypt(fixture)?;
                    s.enc.push(t.total);
                    s.enc_kem.push(t.kem);
                    container = bytes;
                }
                _ => {}
            }
        }
        for on in order {
            match (&enclaved, on) {
                (Some(e), true) => s.dec_on.push(e.decrypt(fixture)?),
                (_, false) if want_off => {
                    let t = native.decrypt(fixture, &container)?;
                    s.dec.push(t.total);
                    s.dec_kem.push(t.kem);
                }
                _ => {}
            }
        }
        Ok(())
    };

    // warm-up pass, discarded
    for (_, fixture, sealed_policy, _) in &points {
        step(false, fixture, sealed_policy, &mut Samples::default())?;
    }
    // rep-major, alternating direction
    for rep in 0..config.repetitions {
        let order: Vec<usize> =
            if rep % 2 == 0 { (0..points.len()).collect() } else { (0..points.len()).rev().collect() };
        for i in order {
            let (_, fixture, sealed_policy, samples) = &mut points[i];
            step((rep + i) % 2 == 1, fixture, sealed_policy, samples)?;
        }
    }

    let mut records = Vec::new();
    for (value, _, _, s) in &points {
        let mut push = |phase: Phase, enclave: bool, samples: &[f64], kem: Option<&[f64]>| {
            if samples.is_empty() {
                return;
            }
            let sum = summarize(samples);
            records.push(BenchRecord {
                experiment: config.experiment,
                param: *value,
                phase,
                enclave,
                median_ms: sum.median,
                mean_ms: sum.mean,
                min_ms: sum.min,
                reps: samples.len(),
                kem_median_ms: kem.map(|k| summarize(k).median),
            });
        };
        push(Phase::Encrypt, false, &s.enc, Some(&s.enc_kem));
        push(Phase::Decrypt, false, &s.dec, Some(&s.dec_kem));
        push(Phase::Encrypt, true, &s.enc_on, None);
        push(Phase::Decrypt, true, &s.dec_on, None);
    }
    Ok(records)
}
