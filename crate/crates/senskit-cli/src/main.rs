//! `senskit` — symbolic sensitivity analysis from the command line.
//!
//! Five subcommands tie the library together into a reproducible
//! pipeline:
//!
//! * `analyze`   — gradient-norm/partial-sensitivity surface of an
//!   expression over a box, plus a global sensitivity bound;
//! * `rdp`       — individual Rényi-DP accounting at a point;
//! * `gen`       — deterministic synthetic bar-image dataset;
//! * `train`     — SGD / DP-SGD training of the bundled MLP;
//! * `ps-report` — per-pixel partial-sensitivity aggregation.
//!
//! Every command accepts `--config PATH` (a JSON file mirroring its
//! flags; explicit flags win) and emits data files that are pure
//! functions of the resolved configuration — timestamps live only in
//! the sibling `*.meta.json` files. Exit codes: 0 success, 2
//! usage/parse/schema errors, 3 I/O errors, 4 numerical failures.

mod analyze;
mod common;
mod gen;
mod ps_report;
mod rdp;
mod train;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "senskit",
    version,
    about = "Symbolic sensitivity analysis, privacy accounting, and a reproducible DP training lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample gradient norm and partial sensitivities over a box; bound global sensitivity.
    Analyze(analyze::Args),
    /// Print individual RDP accounting for an expression at a point.
    Rdp(rdp::Args),
    /// Generate the synthetic bar-image dataset.
    Gen(gen::Args),
    /// Train the bundled MLP with SGD or DP-SGD.
    Train(train::Args),
    /// Aggregate per-pixel partial sensitivities of a trained net.
    PsReport(ps_report::Args),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze::run(args),
        Command::Rdp(args) => rdp::run(args),
        Command::Gen(args) => gen::run(args),
        Command::Train(args) => train::run(args),
        Command::PsReport(args) => ps_report::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
