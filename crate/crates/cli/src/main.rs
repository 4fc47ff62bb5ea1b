//! `hetgap`: config-driven pipeline from a person-level CSV to effect
//! tables, quantile curves and decompositions.
//!
//! Precedence for settings is flag > config file > built-in default.

mod commands;
mod config;
mod manifest;

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use hetgap::{Category, Error, Result};
use log::error;

use commands::{Context, Format};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "hetgap", version, about = "Heterogeneous gender wage gap inference")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Results directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the bootstrap and simulation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output formats; repeat or comma-separate. Default: all.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    /// Overrides the penalty level constant c (0.5 for the robustness run).
    #[arg(long, global = true)]
    penalty_c: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, filter, split and encode the data into model frames.
    Prepare,
    /// Double-selection fit, joint test and effect profiles per group.
    Fit,
    /// Oaxaca-Blinder decompositions per group.
    Decompose,
    /// Quantile curves and interval plots from fitted effects.
    Report,
    /// Monte Carlo study from the [simulate] section, or a synthetic sample.
    Simulate {
        /// Write a synthetic ACS-like CSV here instead of running a study.
        #[arg(long)]
        sample: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
    },
    /// Group sizes, dimensions and raw gaps of the prepared frames.
    Summary,
    /// prepare, fit, decompose and report in sequence.
    Run,
}

/// Writes log records to stderr and, once opened, to the run log.
struct Tee {
    file: Mutex<Option<File>>,
}

impl Write for &'static Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        if let Some(f) = self.file.lock().unwrap().as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        if let Some(f) = self.file.lock().unwrap().as_mut() {
            f.flush()?;
        }
        io::stderr().flush()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        Category::Config => 2,
        Category::Data => 3,
        Category::Numerical => 4,
    }
}

fn context(cli: &Cli) -> Result<Context> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => (
            toml::from_str::<RunConfig>("").expect("empty config is valid"),
            PathBuf::new(),
        ),
    };
    if let Some(c) = cli.penalty_c {
        cfg.model.penalty.c = c;
    }
    if let Some(seed) = cli.seed {
        cfg.bootstrap.seed = seed;
        if let Some(sim) = cfg.simulate.as_mut() {
            sim.seed = seed;
        }
    }
    cfg.validate()?;
    let out = match (&cli.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("results"),
    };
    let mut formats = if cli.format.is_empty() {
        vec![Format::Csv, Format::Json, Format::Svg]
    } else {
        cli.format.clone()
    };
    formats.sort();
    formats.dedup();
    Ok(Context {
        cfg,
        base,
        out,
        formats,
    })
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    let Some(t) = threads else { return Ok(()) };
    if t == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(t)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the `parallel` feature; --threads {t} ignored");
    Ok(())
}

fn run(cli: &Cli, tee: &'static Tee) -> Result<()> {
    let ctx = context(cli)?;
    set_threads(cli.threads)?;
    let sample = match &cli.command {
        Command::Simulate { sample: Some(p), rows } => Some((p.clone(), *rows)),
        _ => None,
    };
    if let Some((path, rows)) = sample {
        return commands::simulate(&ctx, Some(&path), rows, cli.seed);
    }
    if cli.config.is_none() {
        return Err(Error::Config("--config is required for this command".into()));
    }
    fs::create_dir_all(&ctx.out).map_err(|e| Error::Io {
        path: ctx.out.clone(),
        source: e,
    })?;
    let log_path = ctx.out.join(manifest::LOG);
    let log = File::options()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::Io {
            path: log_path,
            source: e,
        })?;
    *tee.file.lock().unwrap() = Some(log);

    match &cli.command {
        Command::Prepare => commands::prepare(&ctx)?,
        Command::Fit => commands::fit(&ctx)?,
        Command::Decompose => commands::decompose(&ctx)?,
        Command::Report => commands::report(&ctx)?,
        Command::Simulate { .. } => commands::simulate(&ctx, None, 0, None)?,
        Command::Summary => {
            for line in commands::summary(&ctx)? {
                println!("{line}");
            }
        }
        Command::Run => {
            commands::prepare(&ctx)?;
            commands::fit(&ctx)?;
            commands::decompose(&ctx)?;
            commands::report(&ctx)?;
        }
    }
    ctx.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tee: &'static Tee = Box::leak(Box::new(Tee {
        file: Mutex::new(None),
    }));
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(tee)))
        .init();
    match run(&cli, tee) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            if let Error::Parse { cells, .. } = &e {
                for (row, col) in cells.iter().take(20) {
                    error!("  row {row}, column `{col}`");
                }
            }
            log::logger().flush();
            ExitCode::from(exit_code(&e))
        }
    }
}
