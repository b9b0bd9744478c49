use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use censored_lpb::datagen::{generate, generate_uncensored, SettingSpec};
use censored_lpb::experiment::{
    aggregate, run_calibrate, run_experiment, write_bounds, write_results, write_summary,
    CalibrateJob, ExperimentConfig,
};
use censored_lpb::survival::{read_dataset_file, write_dataset, write_full_data, Dataset};
use censored_lpb::{Error, Result};

#[derive(Parser)]
#[command(name = "censored-lpb", version, about = "Calibrated lower predictive bounds for censored survival times")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated synthetic experiment and write the results CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeated split experiment on a CSV dataset with censored-data metrics.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit, calibrate and emit per-subject bounds for a CSV dataset.
    Calibrate {
        /// Dataset CSV with header `x1,...,xd,time,event`.
        #[arg(long)]
        data: PathBuf,
        /// Job JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bounds CSV (`index,split,lpb`); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the calibration record as JSON here.
        #[arg(long)]
        result: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize one or more results CSVs.
    Aggregate {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a synthetic dataset.
    Generate {
        #[arg(long)]
        setting: u8,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write latent event and censoring times as well.
        #[arg(long)]
        full: bool,
        /// Replace every censoring time by infinity.
        #[arg(long)]
        uncensored: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Error::Config(format!("{}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn experiment(config: &Path, out: Option<PathBuf>, threads: usize, seed: Option<u64>, csv: bool) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if csv {
        if cfg.input_csv.is_none() {
            return Err(Error::Config("evaluate needs `input_csv` in the config".into()));
        }
        cfg.censored_metrics = true;
    } else if cfg.setting.is_none() {
        return Err(Error::Config("simulate needs `setting` in the config".into()));
    }
    let rows = run_experiment(&cfg, threads)?;
    let target = out.or_else(|| cfg.output.clone());
    write_results(open_out(target.as_deref())?, &rows)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            threads,
            seed,
        } => experiment(&config, out, threads, seed, false),
        Command::Evaluate {
            config,
            out,
            threads,
            seed,
        } => experiment(&config, out, threads, seed, true),
        Command::Calibrate {
            data,
            config,
            out,
            result,
            seed,
        } => {
            let mut job = match config {
                Some(p) => CalibrateJob::from_file(&p)?,
                None => CalibrateJob::default(),
            };
            if let Some(s) = seed {
                job.seed = s;
            }
            let dataset = read_dataset_file(&data)?;
            let output = run_calibrate(&dataset, &job)?;
            let json = output.result.to_json()?;
            match result {
                Some(p) => std::fs::write(&p, json)?,
                None => eprintln!("beta_hat = {} ({})", output.result.beta_hat, output.result.method),
            }
            write_bounds(open_out(out.as_deref())?, &output)
        }
        Command::Aggregate { results, out } => {
            let paths: Vec<&Path> = results.iter().map(PathBuf::as_path).collect();
            let rows = aggregate(&paths)?;
            write_summary(open_out(out.as_deref())?, &rows)
        }
        Command::Generate {
            setting,
            n,
            seed,
            full,
            uncensored,
            out,
        } => {
            let spec = SettingSpec::from_id(setting)?;
            let records = if uncensored {
                generate_uncensored(spec, n, seed)?
            } else {
                generate(spec, n, seed)?
            };
            let w = open_out(out.as_deref())?;
            if full {
                write_full_data(w, spec.dim(), &records)
            } else {
                write_dataset(w, &Dataset::from_full(spec.dim(), &records)?)
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
