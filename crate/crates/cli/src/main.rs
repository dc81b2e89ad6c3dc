//! `emfit` command line: parses estimator input files, runs the matching EM
//! fit and emits a JSON report. Exit codes: 0 success, 2 parse or usage
//! error, 3 model/data error, 4 numerical failure.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use emfit::abo::{self, AlleleFrequencies};
use emfit::deconv::{self, BatteryMeasurement};
use emfit::error::EmError;
use emfit::ibd::{self, IbdDataset};
use emfit::io::{self, InputError};
use emfit::motif::{self, MotifDataset};
use emfit::EmConfig;

use report::{
    AboReport, DeconvReport, Envelope, IbdReport, MotifReport, RestartRun, RestartsSummary,
    SequenceAlignment,
};

#[derive(Parser)]
#[command(
    name = "emfit",
    version,
    about = "EM estimators: ABO gene counting, sib-pair IBD sharing, motif discovery, particle-size deconvolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate ABO allele frequencies from blood-type counts
    Abo {
        /// CSV file with header t_A,t_B,t_AB,t_O and one data row
        #[arg(long)]
        counts: PathBuf,
        /// Starting frequencies as "p_A,p_B,p_O" (default: 1/3 each)
        #[arg(long)]
        init: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate IBD sharing probabilities for affected sib pairs
    Ibd {
        /// CSV file with one genotyped sib pair per row
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Discover a fixed-width motif, one occurrence per sequence
    Motif {
        /// Sequence file: one sequence per line, '>' headers ignored
        #[arg(long)]
        sequences: PathBuf,
        /// Motif width in base pairs
        #[arg(long, default_value_t = 8)]
        width: usize,
        /// Pseudocount added to expected letter counts at each M-step
        #[arg(long, default_value_t = 0.1)]
        pseudocount: f64,
        /// Number of random restarts; the best final likelihood wins
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Deconvolve diffusion-battery port counts into a size distribution
    Deconv {
        /// CSV kernel file: one row per port, one column per size class
        #[arg(long)]
        kernel: PathBuf,
        /// Count file: zero-port total followed by the per-port counts
        #[arg(long)]
        counts: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render a stored deconv or motif report as CSV for plotting
    Histogram {
        /// JSON report produced by a previous run
        #[arg(long)]
        report: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Relative log-likelihood change below which the run converges
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Absolute log-likelihood change below which the run converges
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// RNG seed; only motif restarts draw from it, all reports record it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CommonArgs {
    fn em_config(&self) -> EmConfig {
        EmConfig {
            max_iterations: self.max_iters,
            rel_tol: self.tol,
            abs_tol: self.abs_tol,
            ..EmConfig::default()
        }
    }
}

enum CliError {
    Parse(String),
    Usage(String),
    Model(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Model(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m)
            | CliError::Usage(m)
            | CliError::Model(m)
            | CliError::Numerical(m) => m,
        }
    }
}

impl From<EmError> for CliError {
    fn from(e: EmError) -> Self {
        match e {
            EmError::NumericalFailure { .. } | EmError::MonotonicityViolation { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Model(e.to_string()),
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        match e {
            InputError::Parse(p) => CliError::Parse(p.to_string()),
            InputError::Invalid { .. } => CliError::Model(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Abo {
            counts,
            init,
            common,
        } => {
            let data = io::parse_blood_counts(&counts)?;
            let digest = digest_files(&[&counts])?;
            let start = match init {
                None => AlleleFrequencies::uniform(),
                Some(text) => parse_init(&text)?,
            };
            let result = abo::fit(&data, start, &common.em_config())?;
            let f = result.final_params;
            let report = AboReport {
                envelope: Envelope::new(
                    "abo",
                    common.seed,
                    digest,
                    result.trace.converged,
                    result.trace.stop_reason.to_string(),
                    result.trace.iterations(),
                ),
                p_a: f.p_a(),
                p_b: f.p_b(),
                p_o: f.p_o(),
                loglik_trace: result.trace.log_likelihoods(),
            };
            write_output(common.output.as_deref(), &report::to_json(&report))
        }
        Command::Ibd { pairs, common } => {
            let observations = io::parse_sib_pairs(&pairs)?;
            let digest = digest_files(&[&pairs])?;
            let data = IbdDataset::from_observations(&observations)?;
            let result = ibd::fit(&data, &common.em_config())?;
            let pi = result.final_params.values();
            let report = IbdReport {
                envelope: Envelope::new(
                    "ibd",
                    common.seed,
                    digest,
                    result.trace.converged,
                    result.trace.stop_reason.to_string(),
                    result.trace.iterations(),
                ),
                pi_0: pi[0],
                pi_1: pi[1],
                pi_2: pi[2],
                n_pairs: data.n_pairs(),
                n_uninformative: data.n_uninformative(),
                loglik_trace: result.trace.log_likelihoods(),
            };
            write_output(common.output.as_deref(), &report::to_json(&report))
        }
        Command::Motif {
            sequences,
            width,
            pseudocount,
            restarts,
            common,
        } => {
            let raw = io::parse_sequences(&sequences)?;
            let digest = digest_files(&[&sequences])?;
            let data = MotifDataset::new(&raw, width)?;
            let fit =
                motif::fit_with_restarts(&data, pseudocount, restarts, common.seed, &common.em_config())?;
            let best = fit.best();
            let model = &best.final_params;
            let per_sequence = motif::best_starts(model, &data)?
                .into_iter()
                .map(|(start, posterior)| SequenceAlignment {
                    best_start: start + 1,
                    posterior,
                })
                .collect();
            // Report orientation: one row per base, one column per position.
            let theta: Vec<Vec<f64>> = (0..4)
                .map(|b| model.columns().iter().map(|col| col[b]).collect())
                .collect();
            let report = MotifReport {
                envelope: Envelope::new(
                    "motif",
                    common.seed,
                    digest,
                    best.trace.converged,
                    best.trace.stop_reason.to_string(),
                    best.trace.iterations(),
                ),
                consensus: model.consensus(),
                theta,
                theta_bg: model.background().to_vec(),
                per_sequence,
                loglik: fit.restarts[fit.selected].log_likelihood,
                restarts_summary: RestartsSummary {
                    selected: fit.selected,
                    runs: fit
                        .restarts
                        .iter()
                        .map(|r| RestartRun {
                            restart: r.restart,
                            loglik: r.log_likelihood,
                            iterations: r.result.trace.iterations(),
                            converged: r.result.trace.converged,
                        })
                        .collect(),
                },
            };
            write_output(common.output.as_deref(), &report::to_json(&report))
        }
        Command::Deconv {
            kernel,
            counts,
            common,
        } => {
            let kernel_rows = io::parse_kernel(&kernel)?;
            let (zero_port, ports) = io::parse_port_counts(&counts)?;
            let digest = digest_files(&[&kernel, &counts])?;
            let meas = BatteryMeasurement::new(zero_port, ports, kernel_rows)?;
            let result = deconv::fit(&meas, &common.em_config())?;
            let f = &result.final_params;
            let total_mass: f64 = f.values().iter().sum();
            let f_normalized = if total_mass > 0.0 {
                deconv::normalize(f)?.0.values().to_vec()
            } else {
                vec![0.0; f.len()]
            };
            let report = DeconvReport {
                envelope: Envelope::new(
                    "deconv",
                    common.seed,
                    digest,
                    result.trace.converged,
                    result.trace.stop_reason.to_string(),
                    result.trace.iterations(),
                ),
                f_raw: f.values().to_vec(),
                f_normalized,
                total_mass,
                fitted_mu: deconv::fitted_means(f, &meas),
                loglik_trace: result.trace.log_likelihoods(),
            };
            write_output(common.output.as_deref(), &report::to_json(&report))
        }
        Command::Histogram { report, output } => {
            let text = fs::read_to_string(&report).map_err(|e| {
                CliError::Parse(format!("{}: cannot read file: {e}", report.display()))
            })?;
            let csv = report::histogram_csv(&text).map_err(|e| match e {
                report::HistogramError::Unsupported(_) => CliError::Usage(e.to_string()),
                report::HistogramError::Malformed(_) => CliError::Parse(e.to_string()),
            })?;
            write_output(output.as_deref(), &csv)
        }
    }
}

fn parse_init(text: &str) -> Result<AlleleFrequencies, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--init expects three comma-separated frequencies, got {text:?}"
        )));
    }
    let mut values = [0.0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| {
            CliError::Usage(format!("--init component {part:?} is not a number"))
        })?;
    }
    Ok(AlleleFrequencies::new(values[0], values[1], values[2])?)
}

/// SHA-256 over the raw bytes of the input files, in argument order.
fn digest_files(paths: &[&Path]) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    for path in paths {
        let bytes = fs::read(path).map_err(|e| {
            CliError::Parse(format!("{}: cannot read file: {e}", path.display()))
        })?;
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => fs::write(path, content).map_err(|e| {
            CliError::Usage(format!("cannot write {}: {e}", path.display()))
        }),
    }
}
