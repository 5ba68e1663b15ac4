//! Command-line flags, the optional TOML file, and their merge.
//!
//! Precedence is flag, then file, then the built-in default.

use std::path::{Path, PathBuf};

use binsmooth::inference::hypothesis::Direction;
use binsmooth::simharness::ExperimentKind;
use binsmooth::{Error, Method, ParamModel, Result, VceMode, WMode};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "binsmooth", version, about = "Binned scatter plots with spline fits, bands, and tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dots at the selected number of bins plus a spline line on the same bins.
    Fit(Flags),
    /// Uniform confidence band around the spline fit.
    Band(Flags),
    /// Sup test of one or more parametric models.
    TestSpec(Flags),
    /// One-sided sup test of a shape restriction.
    TestShape(Flags),
    /// Report the IMSE-optimal number of bins.
    SelectBins(Flags),
    /// Monte Carlo experiment on the simulated design.
    Simulate(Flags),
    /// Semi-linear versus residualized dots.
    CompareCovadj(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Band(_) => "band",
            Command::TestSpec(_) => "test-spec",
            Command::TestShape(_) => "test-shape",
            Command::SelectBins(_) => "select-bins",
            Command::Simulate(_) => "simulate",
            Command::CompareCovadj(_) => "compare-covadj",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Fit(f)
            | Command::Band(f)
            | Command::TestSpec(f)
            | Command::TestShape(f)
            | Command::SelectBins(f)
            | Command::Simulate(f)
            | Command::CompareCovadj(f) => f,
        }
    }
}

/// Every setting, all optional so the config file can fill gaps.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// CSV input with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long)]
    pub x: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<String>>,
    #[arg(long)]
    pub cluster: Option<String>,

    /// Use a simulated sample of this size instead of a CSV file.
    #[arg(long)]
    pub sim_n: Option<usize>,
    #[arg(long)]
    pub sim_seed: Option<u64>,

    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub v: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Fixed number of bins; skips the selector.
    #[arg(long)]
    pub bins: Option<usize>,
    /// rot or dpi.
    #[arg(long)]
    pub selector: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// hc0, hc1 or cluster.
    #[arg(long)]
    pub vce: Option<String>,

    /// Parametric model(s), comma-separated for test-spec: constant, linear,
    /// quadratic, cubic, poly:K, logistic, exponential, coef:c0,c1,...
    #[arg(long)]
    pub model: Option<String>,
    /// le or ge.
    #[arg(long)]
    pub direction: Option<String>,
    /// Parametric baseline subtracted in test-shape.
    #[arg(long)]
    pub baseline: Option<String>,

    /// Experiment kind for simulate.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Sample size per replication (simulate, compare-covadj).
    #[arg(long)]
    pub n: Option<usize>,
    /// independent, correlated or none.
    #[arg(long)]
    pub w_mode: Option<String>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Heteroskedastic noise sd 0.1 + c x.
    #[arg(long)]
    pub hetero: Option<f64>,

    /// JSON output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// CSV export of the evaluation grid (fit, band).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl Flags {
    /// Fills unset fields from `other`.
    fn or(self, other: Flags) -> Flags {
        macro_rules! pick {
            ($($f:ident),*) => { Flags { config: self.config, $($f: self.$f.or(other.$f)),* } };
        }
        pick!(
            data, y, x, w, cluster, sim_n, sim_seed, p, s, v, q, bins, selector, alpha, draws, seed, vce, model,
            direction, baseline, experiment, reps, n, w_mode, noise_sd, hetero, out, svg, csv
        )
    }
}

fn load_file(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("config file {}: {}", path.display(), e.message())))
}

fn parse<T: std::str::FromStr<Err = Error>>(v: Option<&String>) -> Result<Option<T>> {
    v.map(|s| s.parse()).transpose()
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Csv { path: PathBuf, y: String, x: String, w: Vec<String>, cluster: Option<String> },
    Simulated { n: usize, seed: u64, w_mode: WMode },
}

/// Settings after merging, with defaults applied and checked.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub data: Option<DataSource>,
    pub p: usize,
    pub s: usize,
    pub v: usize,
    pub q: usize,
    pub bins: Option<usize>,
    pub selector: Method,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
    pub vce: VceMode,
    pub models: Vec<ParamModel>,
    pub direction: Direction,
    pub baseline: Option<ParamModel>,
    pub experiment: Option<ExperimentKind>,
    pub reps: Option<usize>,
    pub n: usize,
    pub w_mode: Option<WMode>,
    pub noise_sd: Option<f64>,
    pub hetero: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub svg: Option<PathBuf>,
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    #[serde(skip)]
    pub explicit: Explicit,
}

/// Which order settings were given rather than defaulted; `simulate` keeps
/// the experiment preset for the rest.
#[derive(Debug, Clone, Copy, Default)]
pub struct Explicit {
    pub p: bool,
    pub s: bool,
    pub v: bool,
    pub selector: bool,
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Result<RunConfig> {
        let flags = command.flags().clone();
        let merged = match &flags.config {
            Some(path) => flags.clone().or(load_file(path)?),
            None => flags,
        };
        let name = command.name();
        let spline = matches!(command, Command::Band(_) | Command::TestSpec(_) | Command::TestShape(_) | Command::Fit(_));
        let (p0, s0) = if spline { (3, 3) } else { (0, 0) };
        let p = merged.p.unwrap_or(p0);
        let s = merged.s.unwrap_or(s0.min(p));
        let w_mode: Option<WMode> = parse(merged.w_mode.as_ref())?;
        let data = match (&merged.data, merged.sim_n) {
            (Some(_), Some(_)) => return Err(Error::Config("give either --data or --sim-n, not both".into())),
            (Some(path), None) => Some(DataSource::Csv {
                path: path.clone(),
                y: merged.y.clone().ok_or_else(|| Error::Config("--y is required with --data".into()))?,
                x: merged.x.clone().ok_or_else(|| Error::Config("--x is required with --data".into()))?,
                w: merged.w.clone().unwrap_or_default(),
                cluster: merged.cluster.clone(),
            }),
            (None, Some(n)) => Some(DataSource::Simulated {
                n,
                seed: merged.sim_seed.unwrap_or(0),
                w_mode: w_mode.unwrap_or_default(),
            }),
            (None, None) => None,
        };
        let models = match &merged.model {
            Some(m) => split_models(m)?,
            None => match command {
                Command::TestSpec(_) => vec![ParamModel::Linear],
                _ => Vec::new(),
            },
        };
        let cfg = RunConfig {
            command: name.to_string(),
            data,
            p,
            s,
            v: merged.v.unwrap_or(0),
            q: merged.q.unwrap_or(1),
            bins: merged.bins,
            selector: parse(merged.selector.as_ref())?.unwrap_or_default(),
            alpha: merged.alpha.unwrap_or(0.05),
            draws: merged.draws.unwrap_or(1000),
            seed: merged.seed.unwrap_or(42),
            vce: parse(merged.vce.as_ref())?.unwrap_or_default(),
            models,
            direction: parse(merged.direction.as_ref())?.unwrap_or(Direction::Le),
            baseline: parse(merged.baseline.as_ref())?,
            experiment: parse(merged.experiment.as_ref())?,
            reps: merged.reps,
            n: merged.n.unwrap_or(1000),
            w_mode,
            noise_sd: merged.noise_sd,
            hetero: merged.hetero,
            out: merged.out,
            svg: merged.svg,
            csv: merged.csv,
            explicit: Explicit {
                p: merged.p.is_some(),
                s: merged.s.is_some(),
                v: merged.v.is_some(),
                selector: merged.selector.is_some(),
            },
        };
        cfg.validate(command)?;
        Ok(cfg)
    }

    fn validate(&self, command: &Command) -> Result<()> {
        if self.v > self.p {
            return Err(Error::Config(format!("v exceeds p (v={}, p={})", self.v, self.p)));
        }
        if self.s > self.p {
            return Err(Error::Config(format!("s exceeds p (s={}, p={})", self.s, self.p)));
        }
        if self.q < 1 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.draws == 0 {
            return Err(Error::Config("draws must be positive".into()));
        }
        if self.bins == Some(0) {
            return Err(Error::Config("bins must be positive".into()));
        }
        let needs_data = !matches!(command, Command::Simulate(_) | Command::CompareCovadj(_));
        if needs_data && self.data.is_none() {
            return Err(Error::Config("no data: pass --data FILE --y COL --x COL, or --sim-n N".into()));
        }
        if matches!(command, Command::Simulate(_)) && self.experiment.is_none() {
            return Err(Error::Config("simulate needs --experiment".into()));
        }
        Ok(())
    }
}

/// Splits `linear,quadratic,coef:1,2` into models; a piece that does not
/// name a family continues the previous `coef:` list.
fn split_models(text: &str) -> Result<Vec<ParamModel>> {
    let mut pieces: Vec<String> = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let continues = part.parse::<f64>().is_ok() && pieces.last().is_some_and(|l| l.starts_with("coef:"));
        match pieces.last_mut() {
            Some(last) if continues => {
                last.push(',');
                last.push_str(part);
            }
            _ => pieces.push(part.to_string()),
        }
    }
    pieces.iter().map(|p| p.parse()).collect()
}
