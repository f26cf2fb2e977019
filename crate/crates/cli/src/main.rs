use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tempent_cli::commands;
use tempent_cli::{CliError, Command, RunConfig};

/// Influence-matrix experiments for the kicked Ising chain.
///
/// Flags override the values read from `--config`; the resolved configuration
/// is echoed as JSON in the first line of the CSV output.
#[derive(Debug, Parser)]
#[command(name = "tempent", version)]
struct Cli {
    /// Subcommand; may instead be given as "command" in the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<f64>,
    /// Comma-separated horizons.
    #[arg(long = "t", value_delimiter = ',')]
    t_list: Option<Vec<usize>>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    chi: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    h_list: Option<Vec<f64>>,
    #[arg(long)]
    omega_points: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    cut_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    anchor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    angle: Option<f64>,
    #[arg(long)]
    ed_sites: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for MPS checkpoints (resumed when present).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

impl Cli {
    fn resolve(self) -> Result<(RunConfig, bool), CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { cfg.$field = v; }
            )*};
        }
        overlay!(j, g, h, omega_points, window, grid, cut_fraction, workers, ed_sites, chi, deltas);
        macro_rules! overlay_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() { cfg.$field = self.$field; }
            )*};
        }
        overlay_opt!(command, out, t_list, t_max, h_list, anchor, angle, checkpoint);
        Ok((cfg, self.print_config))
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cfg, print_config) = cli.resolve()?;
    if print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    let table = commands::run(&cfg)?;
    match &cfg.out {
        Some(path) => table.write_csv(&cfg, BufWriter::new(File::create(path)?))?,
        None => table.write_csv(&cfg, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tempent: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
