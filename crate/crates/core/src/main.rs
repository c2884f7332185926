use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvf::cli::{catalog, emit_schema, execute, Overrides};

#[derive(Parser)]
#[command(name = "cvf", version, about = "Conformal vector fields on Riemannian charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses listed in a JSON manifest and print the report.
    Run {
        manifest: PathBuf,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        zero_tol: Option<f64>,
        #[arg(long)]
        class_tol: Option<f64>,
        #[arg(long)]
        conformal_tol: Option<f64>,
        #[arg(long)]
        isolation_radius: Option<f64>,
        #[arg(long)]
        geo_steps: Option<usize>,
        #[arg(long)]
        fd_step: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the JSON schemas of manifests and reports.
    Schema,
    /// List the builtin charts and fields.
    Catalog,
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run {
            manifest,
            out,
            zero_tol,
            class_tol,
            conformal_tol,
            isolation_radius,
            geo_steps,
            fd_step,
            seed,
        } => {
            let overrides = Overrides {
                zero_tol,
                class_tol,
                conformal_tol,
                isolation_radius,
                geo_steps,
                fd_step,
                seed,
            };
            execute(&manifest, &overrides, out.as_deref())
        }
        Command::Schema => {
            print!("{}", emit_schema());
            0
        }
        Command::Catalog => {
            print!("{}", catalog());
            0
        }
    };
    ExitCode::from(code as u8)
}
