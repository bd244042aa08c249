//! `cpabe` subcommands.
//!
//! State lives under `--home` (default `.cpabe`): the device secret, the
//! platform quoting key, sealed key blobs and the public parameters.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cpabe_core::abe::{self, PublicParams, UserKey};
use cpabe_core::policy::parse_policy;
use cpabe_core::{AbeError, CiphertextContainer};
use cpabe_enclave::attestation::{
    attest_and_provision, load_or_create_signing_key, Platform, Verifier, VerifierConfig,
};
use cpabe_enclave::{
    create_enclave, DeviceSecret, EnclaveClient, EnclaveConfig, EnclaveError, MemoryStore, SealedKeys,
};
use cpabe_service::{write_atomic, ServiceConfig};
use ed25519_dalek::SigningKey;

use crate::config::{BenchConfig, EnclaveSelection, ExperimentKind};
use crate::record::CSV_HEADER;
use crate::runner::run_bench;

pub const ENCLAVE_IDENTITY: &str = "cpabe-cli";
pub const ENCLAVE_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "cpabe", version, about = "CP-ABE file encryption with a simulated enclave")]
pub struct Cli {
    /// State directory for keys and sealed blobs.
    #[arg(long, global = true, env = "CPABE_HOME", default_value = ".cpabe")]
    pub home: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the master key inside the enclave and store it sealed.
    Setup {
        /// Replace existing keys.
        #[arg(long)]
        force: bool,
    },
    /// Issue a user key for a set of attributes.
    Keygen {
        #[arg(long)]
        attrs: String,
        #[arg(long, short, default_value = "user.key")]
        out: PathBuf,
    },
    /// Encrypt a file under a policy.
    Enc {
        #[arg(long)]
        policy: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Encrypt with the library directly instead of through the enclave.
        #[arg(long)]
        no_enclave: bool,
        input: PathBuf,
    },
    /// Decrypt a container with a set of attributes.
    Dec {
        #[arg(long)]
        attrs: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Decrypt outside the enclave. The key comes from `--key`, or the
        /// enclave issues one for `--attrs`.
        #[arg(long)]
        no_enclave: bool,
        #[arg(long)]
        key: Option<PathBuf>,
        input: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        storage: Option<PathBuf>,
        /// Policy for the built-in verifier to provision.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Run a scaling benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Experiment {
    Rules,
    Attributes,
    Filesize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EnclaveArg {
    Off,
    On,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Comma-separated sweep values; file sizes in bytes.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub attrs: Option<usize>,
    #[arg(long)]
    pub rules: Option<usize>,
    #[arg(long)]
    pub file_bytes: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub enclave: EnclaveArg,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("access denied")]
    AccessDenied,
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::AccessDenied => 2,
            CliError::Other(_) => 1,
        }
    }
}

impl From<EnclaveError> for CliError {
    fn from(e: EnclaveError) -> Self {
        match e {
            EnclaveError::AccessDenied => CliError::AccessDenied,
            other => CliError::Other(other.into()),
        }
    }
}

impl From<AbeError> for CliError {
    fn from(e: AbeError) -> Self {
        match e {
            AbeError::SatisfactionFailure => CliError::AccessDenied,
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

struct Home {
    root: PathBuf,
}

impl Home {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn device(&self) -> anyhow::Result<DeviceSecret> {
        Ok(DeviceSecret::load_or_create(&self.path("device.secret"))?)
    }

    fn sealed_keys(&self) -> anyhow::Result<SealedKeys> {
        let read = |n: &str| fs::read(self.path(n)).with_context(|| format!("reading {n}; run `cpabe setup` first"));
        Ok(SealedKeys { public: read("sealed/pub.seal")?, master: read("sealed/master.seal")? })
    }

    fn public_params(&self) -> anyhow::Result<PublicParams> {
        let bytes = fs::read(self.path("public.params")).context("reading public.params; run `cpabe setup` first")?;
        Ok(PublicParams::from_bytes(&bytes)?)
    }

    /// A fresh enclave instance over an in-memory OCALL store.
    fn enclave(&self, verifier: Option<&SigningKey>) -> anyhow::Result<(EnclaveClient, Arc<MemoryStore>)> {
        let mut config = EnclaveConfig::new(ENCLAVE_IDENTITY, ENCLAVE_VERSION, self.device()?);
        if let Some(v) = verifier {
            config = config.with_verifier(v.verifying_key());
        }
        let store = Arc::new(MemoryStore::new());
        Ok((EnclaveClient::new(Arc::new(create_enclave(config, store.clone()))), store))
    }

    fn restored(&self, verifier: Option<&SigningKey>) -> anyhow::Result<(EnclaveClient, Arc<MemoryStore>)> {
        let (client, store) = self.enclave(verifier)?;
        client.restore(&self.sealed_keys()?, None).context("restoring sealed keys")?;
        Ok((client, store))
    }
}

fn default_out(input: &Path, encrypting: bool) -> PathBuf {
    if encrypting {
        let mut s = input.as_os_str().to_owned();
        s.push(".cpsx");
        return s.into();
    }
    match input.extension() {
        Some(e) if e == "cpsx" => input.with_extension(""),
        _ => {
            let mut s = input.as_os_str().to_owned();
            s.push(".dec");
            s.into()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let home = Home { root: cli.home };
    match cli.command {
        Command::Setup { force } => setup(&home, force)?,
        Command::Keygen { attrs, out } => {
            let (client, _) = home.restored(None)?;
            let key = client.keygen(&attrs)?;
            write_atomic(&out, &key)?;
            println!("wrote {}", out.display());
        }
        Command::Enc { policy, out, no_enclave, input } => {
            let out = out.unwrap_or_else(|| default_out(&input, true));
            let plaintext = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let container = if no_enclave {
                let tree = parse_policy(&policy).context("parsing policy")?;
                abe::encrypt_file(&home.public_params()?, &tree, &plaintext, &mut rand::thread_rng())?.to_bytes()
            } else {
                encrypt_in_enclave(&home, &policy, plaintext)?
            };
            write_atomic(&out, &container)?;
            println!("wrote {}", out.display());
        }
        Command::Dec { attrs, out, no_enclave, key, input } => {
            let out = out.unwrap_or_else(|| default_out(&input, false));
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let plaintext = if no_enclave {
                let key_bytes = match key {
                    Some(path) => fs::read(&path).with_context(|| format!("reading {}", path.display()))?,
                    None => home.restored(None)?.0.keygen(&attrs)?,
                };
                let key = UserKey::from_bytes(&key_bytes)?;
                let container = CiphertextContainer::parse(&bytes)?;
                abe::decrypt_file(&home.public_params()?, &key, &container)?
            } else {
                let (client, store) = home.restored(None)?;
                store.put("in", bytes);
                client.decrypt(&attrs, "in", "out", None)?;
                store.take("out").context("enclave produced no output")?
            };
            write_atomic(&out, &plaintext)?;
            println!("wrote {}", out.display());
        }
        Command::Serve { port, config, storage, policy } => {
            let mut c = ServiceConfig::load(config.as_deref()).map_err(anyhow::Error::from)?;
            if let Some(p) = port {
                c.port = p;
            }
            if let Some(s) = storage {
                c.storage_dir = s;
            }
            if policy.is_some() {
                c.policy = policy;
            }
            cpabe_service::run(c).map_err(anyhow::Error::from)?;
        }
        Command::Bench(args) => bench(args)?,
    }
    Ok(())
}

fn setup(home: &Home, force: bool) -> anyhow::Result<()> {
    if home.path("sealed/master.seal").exists() && !force {
        bail!("keys already exist in {} (use --force to replace them)", home.root.display());
    }
    fs::create_dir_all(home.path("sealed"))?;
    load_or_create_signing_key(&home.path("platform.key"))?;
    let (client, _) = home.enclave(None)?;
    let (keys, public) = client.setup_with_public()?;
    write_atomic(&home.path("sealed/pub.seal"), &keys.public)?;
    write_atomic(&home.path("sealed/master.seal"), &keys.master)?;
    write_atomic(&home.path("public.params"), &public)?;
    println!("enclave measurement {}", client.enclave().measurement());
    println!("sealed keys written to {}", home.path("sealed").display());
    Ok(())
}

/// The policy reaches the enclave the same way it does in the service: a
/// local verifier attests this enclave instance and provisions it.
fn encrypt_in_enclave(home: &Home, policy: &str, plaintext: Vec<u8>) -> anyhow::Result<Vec<u8>> {
    let identity = SigningKey::generate(&mut rand::rngs::OsRng);
    let (client, store) = home.restored(Some(&identity))?;
    let platform = Platform::new(home.device()?, load_or_create_signing_key(&home.path("platform.key"))?);
    let verifier = Verifier::new(
        VerifierConfig::new(*client.enclave().measurement(), platform.verification_key(), policy),
        identity,
    );
    attest_and_provision(&client, &platform, &verifier).context("provisioning policy")?;
    store.put("in", plaintext);
    client.encrypt("in", "out", None)?;
    store.take("out").context("enclave produced no output")
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let kind = match args.experiment {
        Experiment::Rules => ExperimentKind::Rules,
        Experiment::Attributes => ExperimentKind::Attributes,
        Experiment::Filesize => ExperimentKind::FileSize,
    };
    let mut config = BenchConfig::standard(kind);
    if let Some(s) = args.sweep {
        config.sweep = s;
    }
    if let Some(r) = args.reps {
        config.repetitions = r;
    }
    if let Some(a) = args.attrs {
        config.attrs_per_rule = a;
    }
    if let Some(r) = args.rules {
        config.rules = r;
    }
    if let Some(b) = args.file_bytes {
        config.file_bytes = b;
    }
    config.enclave = match args.enclave {
        EnclaveArg::Off => EnclaveSelection::Off,
        EnclaveArg::On => EnclaveSelection::On,
        EnclaveArg::Both => EnclaveSelection::Both,
    };
    config.output = args.csv;
    let records = run_bench(&config)?;
    println!("{CSV_HEADER}");
    for r in &records {
        println!(
            "{},{},{},{},{:.3},{:.3},{:.3},{}",
            r.experiment,
            r.param,
            r.phase,
            if r.enclave { "on" } else { "off" },
            r.median_ms,
            r.mean_ms,
            r.min_ms,
            r.reps
        );
    }
    if let Some(p) = &config.output {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
