use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncagd::harness::{
    format_table, lemma_campaign, read_summary_csv, resolve_output_dir, run_experiment,
    summarize, ExperimentSpec, SeedRange, OUT_ROOT_ENV,
};
use ncagd::problems::BiweightInstance;

#[derive(Parser)]
#[command(name = "ncagd", version, about = "Seeded experiment runner for guarded AGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, seed) pair of a spec file.
    Run {
        /// Spec file (TOML).
        #[arg(conflicts_with = "spec", required_unless_present = "spec")]
        spec_file: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory. Overrides the spec's `output_path`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        /// Enable runtime lemma checks regardless of the spec.
        #[arg(long)]
        assert_lemmas: bool,
    },
    /// Aggregate the `summary.csv` of an output directory.
    Summarize {
        dir: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Runtime guarantee checks on double-well instances.
    Check {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed_start: u64,
        #[arg(long, default_value_t = 20)]
        seed_end: u64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
    },
    /// Write a biweight regression instance as JSON.
    GenProblem {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        d: usize,
        #[arg(long, default_value_t = 60)]
        m: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Box<dyn std::error::Error>> {
    match cmd {
        Command::Run {
            spec_file,
            spec,
            out,
            parallelism,
            assert_lemmas,
        } => {
            let path = spec_file.or(spec).expect("clap enforces a spec path");
            let mut spec = ExperimentSpec::load(&path)?;
            spec.assert_lemmas |= assert_lemmas;
            let dir = resolve_output_dir(&spec, out.as_deref());
            let rep = run_experiment(&spec, &dir, parallelism)?;
            print!("{}", format_table(&rep.summary));
            for r in rep.rows.iter().filter(|r| !r.error.is_empty()) {
                eprintln!("run error: {} seed {}: {}", r.method, r.seed, r.error);
            }
            for v in &rep.violations {
                eprintln!("assertion: {v}");
            }
            eprintln!("wrote {} ({OUT_ROOT_ENV} relocates relative paths)", dir.display());
            Ok(rep.exit_code() as u8)
        }
        Command::Summarize { dir, json } => {
            let rows = read_summary_csv(&dir.join("summary.csv"))?;
            let summary = summarize(&rows);
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", format_table(&summary));
            }
            Ok(0)
        }
        Command::Check {
            dim,
            seed_start,
            seed_end,
            eps,
        } => {
            let seeds = SeedRange {
                start: seed_start,
                end: seed_end,
            };
            let rep = lemma_campaign(dim, seeds, eps)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(if rep.violations.is_empty() { 0 } else { 3 })
        }
        Command::GenProblem { seed, d, m, out } => {
            let (inst, _) = BiweightInstance::generate(seed, d, m);
            let text = inst.to_json()?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => println!("{text}"),
            }
            Ok(0)
        }
    }
}
