use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nomacache::experiment_runner::{compare, csv_string, plot_svg, run, Engine, ExperimentSpec, RunOptions, BUNDLED};
use nomacache::monte_carlo::Execution;

/// Analysis and simulation of NOMA-assisted wireless caching.
#[derive(Parser)]
#[command(name = "nomacache", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its result table as CSV.
    Run(RunArgs),
    /// Run both engines and report points outside the tolerance.
    Compare(RunArgs),
    /// Render a result CSV as an SVG chart.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
    /// List the bundled figure configs.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Bundled config name (see `list`) or path to a TOML config.
    config: String,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Output path; defaults to the config's `output` or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate points and trials on one thread.
    #[arg(long)]
    serial: bool,
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    s.parse().map_err(|e: nomacache::Error| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> Result<(ExperimentSpec, Execution)> {
        let spec = ExperimentSpec::load(&self.config).with_context(|| format!("loading config `{}`", self.config))?;
        let execution = if self.serial { Execution::Serial } else { Execution::Parallel };
        let opts = RunOptions { trials: self.trials, seed: self.seed, engine: self.engine, execution };
        Ok((opts.resolve(&spec)?, execution))
    }

    fn output(&self, spec: &ExperimentSpec) -> Option<PathBuf> {
        self.out.clone().or_else(|| spec.output.as_ref().map(PathBuf::from))
    }
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            w.write_all(text.as_bytes())?;
            w.flush()?;
            log::info!("wrote {}", p.display());
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let (spec, execution) = args.resolve()?;
            let rows = run(&spec, execution)?;
            emit(args.output(&spec).as_ref(), &csv_string(&spec, &rows)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            let (mut spec, execution) = args.resolve()?;
            if args.engine.is_none() {
                spec.engine = Engine::Both;
            }
            if spec.engine != Engine::Both {
                bail!("compare needs both engines");
            }
            let (rows, report) = compare(&spec, execution)?;
            if let Some(path) = args.output(&spec) {
                emit(Some(&path), &csv_string(&spec, &rows)?)?;
            }
            print!("{}: {}", spec.name, report.summary());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Plot { csv, out, title } => {
            let text = std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let title =
                title.unwrap_or_else(|| csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            emit(Some(&out), &plot_svg(&text, &title)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            for (name, text) in BUNDLED {
                let spec = ExperimentSpec::parse(text)?;
                println!("{name:<10} {}", spec.description);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
