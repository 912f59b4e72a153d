use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stabsim::experiment::{describe, run_experiment, ExperimentConfig};

/// Run and inspect stability experiments described by TOML config files.
#[derive(Parser, Debug)]
#[command(name = "stabsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate, run the diagnostics and write CSVs plus report.txt.
    ///
    /// Exit status: 0 when every verdict passes, 2 on any failure,
    /// 3 when the worst verdict is inconclusive, 1 on errors.
    Run(Overrides),
    /// Print resolved parameters and the planned diagnostics without running.
    Describe(Overrides),
}

#[derive(Args, Debug)]
struct Overrides {
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for the ensemble.
    #[arg(long)]
    threads: Option<NonZeroUsize>,
    /// Master seed (overrides `master_seed`).
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn load(&self) -> stabsim::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(dir) = &self.out_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> stabsim::Result<u8> {
    match cli.command {
        Command::Describe(o) => {
            print!("{}", describe(&o.load()?)?);
            Ok(0)
        }
        Command::Run(o) => {
            let cfg = o.load()?;
            if let Some(n) = o.threads {
                // Fails only if a pool already exists, which cannot happen here.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n.get()).build_global();
            }
            let out = run_experiment(&cfg)?;
            for v in &out.report.verdicts {
                println!("{}: {} ({})", v.name, v.verdict, v.detail);
            }
            println!("overall: {}", out.report.overall());
            println!("wrote {} files to {}", out.files.len(), cfg.output_dir.display());
            Ok(out.exit_code() as u8)
        }
    }
}
