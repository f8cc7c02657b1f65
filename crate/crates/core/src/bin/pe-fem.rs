use clap::{Args, Parser, Subcommand as ClapSubcommand, ValueEnum};
use pe_fem::harness::config::{Overrides, RunConfig, Subcommand};
use pe_fem::harness::run::run;
use std::path::PathBuf;
use std::process::ExitCode;

/// Crank-Nicolson Galerkin range-stepping solver: convergence studies and
/// the acoustic demo.
#[derive(Parser, Debug)]
#[command(name = "pe-fem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand, Debug)]
enum Command {
    /// Spatial convergence of E(r) at fixed k.
    Spatial(Common),
    /// Temporal convergence against a fine-step reference run.
    Temporal(Common),
    /// Acoustic scenario: condition check, norm drift, field snapshots.
    Acoustic(Common),
    /// Elliptic projection error rates.
    Project(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    hy_inv: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    htheta_inv: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k_inv: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ranges: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            hy_inv: self.hy_inv.clone(),
            htheta_inv: self.htheta_inv.clone(),
            k_inv: self.k_inv.clone(),
            ranges: self.ranges.clone(),
            out: self.out.as_ref().map(|p| p.display().to_string()),
            format: self.format.map(|f| match f {
                Format::Csv => "csv".to_owned(),
                Format::Markdown => "markdown".to_owned(),
            }),
            seed: self.seed,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, common) = match &cli.command {
        Command::Spatial(c) => (Subcommand::Spatial, c),
        Command::Temporal(c) => (Subcommand::Temporal, c),
        Command::Acoustic(c) => (Subcommand::Acoustic, c),
        Command::Project(c) => (Subcommand::Project, c),
    };
    let result = (|| {
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(cmd, &common.overrides())?;
        run(cmd, &cfg)
    })();
    match result {
        Ok(summary) => {
            print!("{}", summary.report.to_markdown());
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
