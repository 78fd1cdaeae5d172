//! Command-line harness: single runs, the comparison figures as CSV
//! tables, and a quick numerical self-test.

pub mod checks;
pub mod commands;
pub mod manifest;
pub mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Options, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(
    name = "gp-tunnel",
    version,
    about = "Tunneling time of a condensate through a barrier"
)]
struct Cli {
    /// TOML config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Comma-separated g0 values for fig4 and fig5.
    #[arg(
        long = "g0-list",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    g0_list: Option<Vec<f64>>,
    /// Comma-separated barrier widths for fig5.
    #[arg(
        long = "L-list",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    l_list: Option<Vec<f64>>,
    /// Worker threads for sweeps; defaults to the available cores.
    #[arg(long, global = true, env = "GP_TUNNEL_JOBS")]
    jobs: Option<usize>,
    /// Overrides the integrator step.
    #[arg(long, global = true, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Accepted for compatibility; runs are deterministic.
    #[arg(long, global = true)]
    seedless: bool,
    /// Also write binary dumps of the final fields.
    #[arg(long = "dump-fields", global = true)]
    dump_fields: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure the tunneling time for one config.
    Run,
    /// Transmitted profiles and centroids at a fixed time.
    Fig2,
    /// Transmitted momentum spectra and their moments.
    Fig3,
    /// Tunneling time against g0.
    Fig4,
    /// Tunneling time against barrier width.
    Fig5,
    /// Quick numerical checks.
    Selftest,
}

pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let opts = Options {
        config: cli.config,
        out: cli.out,
        jobs: cli
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        dt: cli.dt,
        dump_fields: cli.dump_fields,
        g0_list: cli.g0_list,
        l_list: cli.l_list,
    };
    match cli.command {
        Command::Run => commands::cmd_run(&opts),
        Command::Fig2 => commands::cmd_fig2(&opts),
        Command::Fig3 => commands::cmd_fig3(&opts),
        Command::Fig4 => commands::cmd_fig4(&opts),
        Command::Fig5 => commands::cmd_fig5(&opts),
        Command::Selftest => selftest::cmd_selftest(),
    }
}
