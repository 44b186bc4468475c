//! Command line front end of the solver suite.
//!
//! Exit status: 0 on success, 2 on configuration or usage errors, 1 on
//! numerical or I/O failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tbc_core::harness::{
    dump_field, dump_matrices, run_convergence, run_evolution, write_convergence_csv, write_evolution_csv,
    write_weights_csv, RunConfig,
};
use tbc_core::Error;

#[derive(Parser)]
#[command(name = "tbc", version, about = "Schrodinger solvers with transparent and high-frequency boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file of key = value settings.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set n=32 --set stepper=bdf1`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> tbc_core::Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one variant and write the relative error after every step.
    Evolve(ConfigArgs),
    /// Run one variant for every step in `dt_set` and fit the error slope.
    Converge(ConfigArgs),
    /// Write the field on a 256 x 256 grid at the configured dump times.
    DumpField {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Dump times, overriding `dump_times` of the config.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Write convolution-quadrature weight tables.
    Weights {
        /// Number of weights.
        #[arg(short, long, default_value_t = 64)]
        n: usize,
        /// Time step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Output file.
        #[arg(short, long, default_value = "weights.csv")]
        out: PathBuf,
    },
    /// Write the assembled matrices as 1-based sparse triplets.
    DumpMatrices(ConfigArgs),
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(cmd: Command) -> tbc_core::Result<()> {
    match cmd {
        Command::Evolve(args) => {
            let cfg = args.load()?;
            let run = run_evolution(&cfg)?;
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            let path = cfg.output.join(format!("evolution_{}.csv", run.label));
            write_evolution_csv(&path, &run)?;
            println!("{}: max error {:.6e}", run.label, run.max_error());
            report(&[path]);
        }
        Command::Converge(args) => {
            let cfg = args.load()?;
            let study = run_convergence(&cfg, &cfg.dt_set)?;
            let path = cfg.output.join(format!("convergence_{}.csv", study.label));
            write_convergence_csv(&path, &study)?;
            for (dt, e) in &study.rows {
                println!("dt {dt:.6e}  max error {e:.6e}");
            }
            match study.slope {
                Some(s) => println!("{}: slope {s:.3}", study.label),
                None => println!("{}: slope undefined (fewer than 3 pre-plateau points)", study.label),
            }
            report(&[path]);
        }
        Command::DumpField { cfg, times } => {
            let cfg = cfg.load()?;
            let times = times.unwrap_or_else(|| cfg.dump_times.clone());
            if times.is_empty() {
                return Err(Error::Config("no dump times given".into()));
            }
            report(&dump_field(&cfg, &times)?);
        }
        Command::Weights { n, dt, out } => {
            write_weights_csv(Path::new(&out), n, dt)?;
            report(&[out]);
        }
        Command::DumpMatrices(args) => {
            report(&dump_matrices(&args.load()?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
