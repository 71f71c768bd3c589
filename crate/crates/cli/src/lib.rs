//! The `splinenet` command-line tool: imputation, training, evaluation,
//! kernel inspection and polynomial micro-benchmarks.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

use clap::{Parser, Subcommand};
use commands::bench::{cmd_bench, powers_of_two, BenchConfig};
use commands::data::{cmd_import_csv, cmd_synth};
use commands::impute::{impute, ImputeConfig};
use commands::inspect::{cmd_inspect_kernels, InspectOptions};
use commands::train::{cmd_eval, cmd_train, EvalOptions, TrainOutputs};
use config::{DataFlags, ModelFlags, RunConfig, SynthFlags, TrainFlags};
use error::{CliError, CliResult};
use manifest::{to_json_text, write_text};
use pipeline::{DataSource, Subset};
use splinenet::model::Metric;
use splinenet::FitKind;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "splinenet", version, about = "Spline-based neural layers for irregular time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit each series and evaluate it at query times (CSV output).
    Impute {
        /// JSONL input; `-` reads standard input.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = FitKind::NaturalCubic)]
        fit: FitKind,
        /// Comma-separated query times; defaults to each sample's own times.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and test-score a classifier, optionally over several seeds.
    Train {
        /// JSONL dataset; the synthetic shapes dataset if omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// TOML file with [model], [train], [data] and [synth] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path; repeated runs get a `-seed<N>` suffix.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        history: Option<PathBuf>,
        /// JSON report with per-seed metrics and mean ± std.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Number of seeds, starting at --seed.
        #[arg(long)]
        repeats: Option<usize>,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        data_flags: DataFlags,
    },
    /// Score a checkpoint on its run's split or on another dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the dataset recorded in the checkpoint.
        #[arg(long)]
        data: Option<PathBuf>,
        /// train, val, test or all.
        #[arg(long, default_value = "test")]
        subset: Subset,
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Plot the learned distance kernels and rank them per class.
    InspectKernels {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        subset: Subset,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Time naive vs FFT multiplication and both Taylor shifts.
    Bench {
        /// CSV output; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        reps: usize,
        #[arg(long, default_value_t = 4)]
        min_degree: usize,
        #[arg(long, default_value_t = 4096)]
        max_degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the synthetic shapes dataset as JSONL.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML file; only its [synth] section is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        synth: SynthFlags,
    },
    /// Convert a long-format CSV (series_id,time,channel,value[,label]) to JSONL.
    ImportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Impute { input, fit, times, out: dest } => {
            let cfg = ImputeConfig { fit, times };
            let text = if input.as_os_str() == "-" {
                impute(std::io::stdin().lock(), "<stdin>", &cfg)?
            } else {
                let f = std::fs::File::open(&input).map_err(|e| CliError::io(&input, e))?;
                impute(f, &input.display().to_string(), &cfg)?
            };
            match dest {
                Some(p) => write_text(&p, &text),
                None => emit(out, &text),
            }
        }
        Command::Train {
            data,
            config,
            out: ck,
            history,
            report,
            seed,
            threads,
            repeats,
            model,
            train,
            data_flags,
        } => {
            let mut cfg = RunConfig::base(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            model.apply(&mut cfg.model);
            train.apply(&mut cfg.train);
            data_flags.apply(&mut cfg.data, &mut cfg.synth);
            let cfg = cfg.finish()?;
            let outputs = TrainOutputs {
                checkpoint: &ck,
                history: history.as_deref(),
                report: report.as_deref(),
            };
            let rep = cmd_train(&cfg, &DataSource::from_arg(data.as_deref()), &outputs)?;
            emit(out, &rep.to_string())
        }
        Command::Eval {
            checkpoint,
            data,
            subset,
            metric,
            threads,
            report,
        } => {
            let rep = cmd_eval(&checkpoint, &EvalOptions { data, subset, metric, threads })?;
            if let Some(p) = report {
                write_text(&p, &to_json_text(&rep))?;
            }
            emit(out, &rep.to_string())
        }
        Command::InspectKernels {
            checkpoint,
            out_dir,
            data,
            subset,
            threads,
        } => {
            let rep = cmd_inspect_kernels(&checkpoint, &InspectOptions { out_dir, data, subset, threads })?;
            emit(out, &rep.to_string())
        }
        Command::Bench {
            out: dest,
            reps,
            min_degree,
            max_degree,
            seed,
        } => {
            if reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let degrees = powers_of_two(min_degree, max_degree);
            if degrees.is_empty() {
                return Err(CliError::Usage("no degrees between --min-degree and --max-degree".into()));
            }
            let rep = cmd_bench(&BenchConfig { degrees, reps, seed });
            match dest {
                Some(p) => {
                    write_text(&p, &rep.to_csv())?;
                    emit(out, &rep.to_string())?;
                }
                None => emit(out, &(rep.to_csv() + &rep.to_string()))?,
            }
            if rep.agreement_ok {
                Ok(())
            } else {
                Err(CliError::Numerical("FFT and naive products disagree".into()))
            }
        }
        Command::Synth { out: dest, config, seed, synth } => {
            let mut cfg = RunConfig::base(config.as_deref())?.synth;
            synth.apply(&mut cfg);
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let n = cmd_synth(&cfg, &dest)?;
            emit(out, &format!("wrote {n} samples to {}\n", dest.display()))
        }
        Command::ImportCsv { input, out: dest } => {
            let n = cmd_import_csv(&input, &dest)?;
            emit(out, &format!("wrote {n} records to {}\n", dest.display()))
        }
    }
}
