use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use qsurrogate::nn::VariantTag;
use qsurrogate_cli::commands::{self, Context};
use qsurrogate_cli::complexity::Dims;
use qsurrogate_cli::config::ExperimentConfig;
use qsurrogate_cli::infer::InferOptions;
use qsurrogate_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "qsurrogate",
    version,
    about = "Hybrid quantum-classical surrogates for inverse FE modelling"
)]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for datasets, checkpoints and reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensor/displacement dataset.
    GenData {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep k and report WCSS, silhouette, Davies–Bouldin and downstream scores.
    ClusterAnalyze {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train one variant and write its checkpoint.
    Train {
        variant: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a checkpoint on the held-out rows of a dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train and score several variants under the same split and seed.
    Compare {
        /// Comma-separated variant tags; the configured list when omitted.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Stream sensor rows through a checkpoint.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sensor CSV, or `-` for standard input.
        #[arg(long, default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Keep waiting for appended rows.
        #[arg(long)]
        follow: bool,
        /// Seconds without new rows before follow mode exits.
        #[arg(long)]
        idle_timeout: Option<f64>,
        /// Directory receiving the quantum state of every row.
        #[arg(long)]
        dump_state: Option<PathBuf>,
    },
    /// Operation counts of the classical and hybrid pipelines.
    Complexity(DimArgs),
}

#[derive(Args)]
struct DimArgs {
    #[arg(long)]
    d_in: Option<usize>,
    #[arg(long)]
    h1: Option<usize>,
    #[arg(long)]
    h2: Option<usize>,
    #[arg(long)]
    d_out: Option<usize>,
    #[arg(long)]
    d_prime: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    h3: Option<usize>,
}

impl DimArgs {
    fn dims(&self) -> Dims {
        let d = Dims::default();
        Dims {
            d_in: self.d_in.unwrap_or(d.d_in),
            h1: self.h1.unwrap_or(d.h1),
            h2: self.h2.unwrap_or(d.h2),
            d_out: self.d_out.unwrap_or(d.d_out),
            d_prime: self.d_prime.unwrap_or(d.d_prime),
            layers: self.layers.unwrap_or(d.layers),
            qubits: self.qubits.unwrap_or(d.qubits),
            h3: self.h3.unwrap_or(d.h3),
        }
    }
}

fn parse_tag(s: &str) -> CliResult<VariantTag> {
    s.parse()
        .map_err(|e: qsurrogate::Error| CliError::Config(e.to_string()))
}

fn context(cli: &Cli) -> CliResult<Context> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    Context::new(config, cli.out_dir.clone())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let ctx = context(&cli)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::GenData { samples, output } => {
            commands::gen_data(&ctx, *samples, output.as_deref(), &mut out)?;
        }
        Command::ClusterAnalyze { dataset } => {
            commands::cluster_analyze(&ctx, dataset.as_deref(), &mut out)?;
        }
        Command::Train {
            variant,
            dataset,
            epochs,
        } => {
            let tag = parse_tag(variant)?;
            commands::train(&ctx, tag, dataset.as_deref(), *epochs, &mut out)?;
        }
        Command::Evaluate {
            checkpoint,
            dataset,
        } => {
            commands::evaluate(&ctx, checkpoint, dataset.as_deref(), &mut out)?;
        }
        Command::Compare { variants, dataset } => {
            let tags = variants
                .iter()
                .map(|v| parse_tag(v))
                .collect::<CliResult<Vec<_>>>()?;
            let tags = (!tags.is_empty()).then_some(tags.as_slice());
            commands::compare(&ctx, tags, dataset.as_deref(), &mut out)?;
        }
        Command::Infer {
            checkpoint,
            input,
            output,
            follow,
            idle_timeout,
            dump_state,
        } => {
            if idle_timeout.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
                return Err(CliError::Config(
                    "--idle-timeout must be a non-negative number of seconds".into(),
                ));
            }
            let opts = InferOptions {
                follow: *follow,
                idle_timeout: idle_timeout.map(Duration::from_secs_f64),
                dump_state: dump_state.clone(),
            };
            // Predictions may go to stdout, so the summary goes to stderr.
            let mut err = std::io::stderr();
            commands::infer(checkpoint, input, output.as_deref(), &opts, &mut err)?;
        }
        Command::Complexity(d) => {
            commands::complexity_report(d.dims(), &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
