use clap::{Parser, Subcommand};
use geotomo::run::{self, Context, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "geotomo", version, about = "Attenuated geodesic X-ray tomography on simple surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// relative singular-value cutoff (overrides the config)
    #[arg(long, value_name = "r")]
    svd_cutoff: Option<f64>,
    /// output directory (overrides the config)
    #[arg(long, value_name = "dir")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured phantom quadruple
    Phantom(Common),
    /// Boundary data of the phantom, optionally with noise
    Forward(Common),
    /// Recover (f, h0, omega_1, omega_-1) from data
    Reconstruct(Common),
    /// Decide range membership of data
    Rangetest(Common),
    /// Run the invariant battery
    Selfcheck(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, f): (&Common, fn(&Context) -> geotomo::Result<Outcome>) = match &cli.command {
        Command::Phantom(c) => (c, run::phantom),
        Command::Forward(c) => (c, run::forward),
        Command::Reconstruct(c) => (c, run::reconstruct),
        Command::Rangetest(c) => (c, run::rangetest),
        Command::Selfcheck(c) => (c, run::selfcheck),
    };
    let result = Context::load(&common.config, common.out.clone(), common.svd_cutoff).and_then(|ctx| f(&ctx));
    match result {
        Ok(o) => {
            println!("{}", o.report.display());
            if o.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("tolerance check failed, see {}", o.report.display());
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if run::is_input_error(&e) { 3 } else { 1 })
        }
    }
}
