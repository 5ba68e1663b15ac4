mod args;
mod commands;
mod svg;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use binsmooth::{Error, ErrorClass, Result};
use clap::Parser;

use args::{Cli, Command, RunConfig};

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("BINSMOOTH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("BINSMOOTH_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let cfg = RunConfig::resolve(&cli.command)?;
    let out = match &cli.command {
        Command::Fit(_) => commands::fit(&cfg)?,
        Command::Band(_) => commands::band(&cfg)?,
        Command::TestSpec(_) => commands::test_spec(&cfg)?,
        Command::TestShape(_) => commands::test_shape(&cfg)?,
        Command::SelectBins(_) => commands::select_bins(&cfg)?,
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::CompareCovadj(_) => commands::compare_covadj(&cfg)?,
    };
    let mut text = serde_json::to_string_pretty(&out.json).expect("json");
    text.push('\n');
    match &cfg.out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    if let Some(path) = &cfg.svg {
        match &out.svg {
            Some(plot) => write_file(path, plot.render().as_bytes())?,
            None => log::warn!("{} has no plot; --svg ignored", cfg.command),
        }
    }
    if let Some(path) = &cfg.csv {
        match &out.csv {
            Some((header, rows)) => write_csv(path, header, rows)?,
            None => log::warn!("{} has no grid export; --csv ignored", cfg.command),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
