use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use probrob::check::{
    check_probabilistic_robustness, emit_report, run_analysis, run_baseline, RunConfig,
};

#[derive(Parser)]
#[command(name = "probrob", version, about = "Probabilistic robustness checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the violation probability stays below epsilon.
    Check(Overrides),
    /// Plain Monte Carlo estimate of the violation probability.
    Mc(Overrides),
    /// Print the polyhedra found by the backward analysis.
    DumpPolys(Overrides),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn load(&self) -> probrob::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(v) = self.eps {
            cfg.epsilon = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.budget {
            cfg.budget = v;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        Ok(cfg)
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> probrob::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| probrob::Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> probrob::Result<u8> {
    match cli.command {
        Command::Check(o) => {
            let cfg = o.load()?;
            let report = check_probabilistic_robustness(&cfg);
            match &cfg.out {
                Some(path) => emit_report(&report, path)?,
                None => println!("{}", report.summary_line()),
            }
            Ok(report.exit_code() as u8)
        }
        Command::Mc(o) => {
            let cfg = o.load()?;
            let p = run_baseline(&cfg)?;
            let json = serde_json::to_string_pretty(&p).expect("proportion serializes");
            if let Some(path) = &cfg.out {
                write_or_print(Some(path), &(json + "\n"))?;
            }
            println!(
                "MC err={}±{} hits={} trials={}",
                p.probability, p.std_error, p.hits, p.trials
            );
            Ok(0)
        }
        Command::DumpPolys(o) => {
            let cfg = o.load()?;
            let polys = run_analysis(&cfg)?;
            write_or_print(cfg.out.as_ref(), &polys.dump())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
