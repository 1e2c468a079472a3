//! `krs`: soliton profiles, barrier certification and radial flow runs.
//!
//! Exit codes: 0 ok, 1 usage or I/O, 2 solver failure or failed verdict,
//! 3 barrier search/certification failure, 4 flow aborted.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "krs", version, about = "Kähler-Ricci soliton profiles, barriers and radial flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Upper,
    Lower,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the soliton profile and check its invariants.
    Soliton {
        #[arg(long)]
        n: u32,
        #[arg(long, allow_hyphen_values = true)]
        s_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        s_max: f64,
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a barrier and certify the five curvature inequalities.
    Barrier {
        #[arg(long)]
        n: u32,
        #[arg(long = "K")]
        k: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long = "R", conflicts_with = "find_r", required_unless_present = "find_r")]
        r: Option<f64>,
        /// Search the smallest certified R on the ladder 1/2, 1, 2, ...
        #[arg(long = "find-R")]
        find_r: bool,
        #[arg(long = "R-max", default_value_t = 1024.0)]
        r_max: f64,
        #[arg(long, value_enum, default_value = "upper")]
        side: SideArg,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the radial flow described by a JSON config.
    Flow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Soliton {
            n,
            s_min,
            s_max,
            points,
            tol,
            out,
        } => commands::soliton(n, s_min, s_max, points, tol, &out),
        Command::Barrier {
            n,
            k,
            alpha,
            r,
            find_r: _,
            r_max,
            side,
            tol,
            out,
        } => {
            let side = match side {
                SideArg::Upper => krs_core::Side::Upper,
                SideArg::Lower => krs_core::Side::Lower,
            };
            commands::barrier(commands::BarrierArgs {
                n,
                k,
                alpha,
                r,
                r_max,
                side,
                tol,
                out,
            })
        }
        Command::Flow { config, out_dir } => commands::flow(&config, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("krs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
