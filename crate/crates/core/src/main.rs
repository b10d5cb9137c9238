use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lagcoh::cli_io::{
    emit_results, load_epochs, run_pipeline, save_epochs, summary_table, AnalysisConfig, DataFormat, EmitFormat,
    ModelDocument,
};
use lagcoh::simulate::XSpec;
use lagcoh::{generate_var, Error, Result};

#[derive(Parser)]
#[command(name = "lagcoh", version, about = "Lagged association and lagged coherence between multichannel recordings")]
struct Cli {
    /// Worker threads for the per-frequency fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse an epoched recording.
    Compute(ComputeArgs),
    /// Generate epochs from a linear lagged model, optionally analysing them.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ComputeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv_long")]
    format: DataFormat,
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    out: ResultArgs,
    /// Sampling rate in Hz, used only to label frequencies.
    #[arg(long)]
    sampling_rate: Option<f64>,
}

#[derive(Args)]
struct ResultArgs {
    /// Result destination; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    emit: EmitFormat,
    /// Also print a rounded table to stderr.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    epochs: usize,
    #[arg(long)]
    seed: u64,
    /// Where to write the generated epochs (x channels first, then y).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "csv_long")]
    format: DataFormat,
    /// Analyse the generated data with this configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "-", requires = "config")]
    results: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    emit: EmitFormat,
    #[arg(long)]
    summary: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Compute(args) => compute(args),
        Command::Simulate(args) => simulate(args),
    }
}

fn compute(args: ComputeArgs) -> Result<()> {
    let cfg = AnalysisConfig::load(&args.config)?;
    let ts = load_epochs(&args.input, args.format)?;
    let ts = match args.sampling_rate {
        Some(_) => ts.with_sampling_rate(args.sampling_rate).map_err(|e| Error::Config(e.to_string()))?,
        None => ts,
    };
    let doc = run_pipeline(&ts, &cfg)?;
    if args.out.summary {
        eprint!("{}", summary_table(&doc));
    }
    write_output(&args.out.output, &emit_results(&doc, args.out.emit)?)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let model = ModelDocument::load(&args.model)?.to_model()?;
    if !matches!(model.x_spec, XSpec::WhiteGaussian { .. }) {
        return Err(Error::Config(
            "the simulate command needs a time-domain model; spectral inputs exist only as Fourier coefficients".into(),
        ));
    }
    if args.epochs == 0 {
        return Err(Error::Config("--epochs must be positive".into()));
    }
    let (x, y) = generate_var(&model, args.epochs, args.seed)?;
    let ts = x.concat_channels(&y)?;
    save_epochs(&ts, &args.output, args.format)?;
    if let Some(path) = &args.config {
        let cfg = AnalysisConfig::load(path)?;
        let doc = run_pipeline(&ts, &cfg)?;
        if args.summary {
            eprint!("{}", summary_table(&doc));
        }
        write_output(&args.results, &emit_results(&doc, args.emit)?)?;
    }
    Ok(())
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    let io_err = |e: std::io::Error| Error::InvalidData(format!("{}: {e}", path.display()));
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).map_err(io_err)?;
        out.flush().map_err(io_err)
    } else {
        std::fs::write(path, text).map_err(io_err)
    }
}
