//! `staticbound` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration or domain error, 3 violated
//! `H > 0` hypothesis, 4 file error.

mod args;
mod commands;
mod table;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<staticbound::Error>() {
        return match e {
            staticbound::Error::Hypothesis { .. } => 3,
            staticbound::Error::Io(_) | staticbound::Error::Parse { .. } => 4,
            _ => 2,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<csv::Error>().is_some() {
        return 4;
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mesh(a) => commands::mesh(a),
        Command::Ineq(a) => commands::ineq(a),
        Command::Reilly(a) => commands::reilly(a),
        Command::Pde(a) => commands::pde(a),
        Command::Converge(a) => commands::converge(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
