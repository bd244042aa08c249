use clap::Parser;
use cpabe_bench::cli::{run, Cli};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        match &e {
            cpabe_bench::cli::CliError::AccessDenied => eprintln!("access denied"),
            cpabe_bench::cli::CliError::Other(inner) => eprintln!("error: {inner:#}"),
        }
        std::process::exit(e.exit_code());
    }
}
