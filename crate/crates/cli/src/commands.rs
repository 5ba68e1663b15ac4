//! One function per subcommand. Each returns the JSON document and, when
//! asked for, an SVG plot and CSV rows.

use binsmooth::fit::Dot;
use binsmooth::inference::hypothesis::{shape_on, specification_on};
use binsmooth::inference::models::fit_model;
use binsmooth::simharness::{ExperimentConfig, ExperimentKind};
use binsmooth::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{DataSource, RunConfig};
use crate::svg::Plot;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Output {
    pub json: Value,
    pub svg: Option<Plot>,
    /// Header and rows for `--csv`.
    pub csv: Option<(Vec<&'static str>, Vec<Vec<f64>>)>,
}

#[derive(Serialize)]
struct DataInfo {
    n: usize,
    d: usize,
    covariates: Vec<String>,
    clusters: usize,
    rows_read: Option<usize>,
    rows_dropped: Option<usize>,
}

fn load(cfg: &RunConfig) -> Result<(Dataset, DataInfo)> {
    let (data, report) = match cfg.data.as_ref().expect("validated") {
        DataSource::Csv { path, y, x, w, cluster } => {
            let (d, r) = Dataset::load_csv(path, y, x, w, cluster.as_deref())?;
            (d, Some(r))
        }
        DataSource::Simulated { n, seed, w_mode } => {
            let mut dgp = DgpSpec { n: *n, seed: *seed, w_mode: *w_mode, ..Default::default() };
            if let Some(sd) = cfg.noise_sd {
                dgp.noise_sd = sd;
            }
            dgp.hetero = cfg.hetero;
            (generate(&dgp)?, None)
        }
    };
    if report.as_ref().is_some_and(|r| r.rows_dropped > 0) {
        log::warn!("dropped {} rows with missing values", report.as_ref().unwrap().rows_dropped);
    }
    let info = DataInfo {
        n: data.n(),
        d: data.d(),
        covariates: data.w_names().to_vec(),
        clusters: data.cluster_count(),
        rows_read: report.as_ref().map(|r| r.rows_read),
        rows_dropped: report.as_ref().map(|r| r.rows_dropped),
    };
    Ok((data, info))
}

/// Number of bins: fixed, or chosen at order `(p, s, v)`.
fn choose_bins(cfg: &RunConfig, data: &Dataset, p: usize, s: usize, v: usize) -> Result<(usize, Option<Selection>)> {
    if let Some(j) = cfg.bins {
        return Ok((j, None));
    }
    let sel = select(data, p, s, v, cfg.selector, cfg.vce)?;
    for w in &sel.warnings {
        log::warn!("{w}");
    }
    Ok((sel.bins, Some(sel)))
}

fn header(cfg: &RunConfig, info: Option<&DataInfo>) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(cfg.command));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    if let Some(i) = info {
        m.insert("data".into(), serde_json::to_value(i).expect("info serializes"));
    }
    m
}

fn dot_pairs(dots: &[Dot]) -> Vec<(f64, f64)> {
    dots.iter().map(|d| (d.x, d.y)).collect()
}

fn inference_config(cfg: &RunConfig) -> InferenceConfig {
    InferenceConfig {
        p: cfg.p,
        s: cfg.s,
        v: cfg.v,
        q: cfg.q,
        alpha: cfg.alpha,
        draws: cfg.draws,
        seed: cfg.seed,
        vce: cfg.vce,
    }
}

/// Step 1 and 2: canonical dots at the selected J, then the `(p, s)` line on
/// the same partition.
pub fn fit(cfg: &RunConfig) -> Result<Output> {
    let (data, info) = load(cfg)?;
    let (bins, selection) = choose_bins(cfg, &data, 0, 0, 0)?;
    let part = QuantilePartition::build(&data, &data.sort_index(), bins)?;
    let dots_fit = fit_binscatter(&data, &BasisSpec::new(0, 0, part.clone())?)?;
    let line_fit = fit_binscatter(&data, &BasisSpec::new(cfg.p, cfg.s, part.clone())?)?;
    let dots = dots_fit.dots();
    let shift = if cfg.v == 0 { line_fit.display_shift() } else { 0.0 };
    let (points, _) = inference::grid_points(&part);
    let line: Vec<f64> = points.iter().map(|&x| line_fit.evaluate(x, cfg.v).map(|m| m + shift)).collect::<Result<_>>()?;
    let mut m = header(cfg, Some(&info));
    m.insert("selection".into(), json!(selection));
    m.insert("bins".into(), json!(bins));
    m.insert("knots".into(), json!(part.knots()));
    m.insert("dots".into(), json!(dots));
    m.insert("line".into(), json!({ "p": cfg.p, "s": cfg.s, "v": cfg.v, "x": points, "y": line, "shift": shift }));
    m.insert("gamma".into(), json!(line_fit.gamma()));
    let plot = Plot {
        title: format!("binscatter, J = {bins}"),
        dots: if cfg.v == 0 { vec![dot_pairs(&dots)] } else { Vec::new() },
        line: Some(points.iter().copied().zip(line.iter().copied()).collect()),
        ..Default::default()
    };
    let rows = dots.iter().map(|d| vec![d.x, d.y]).collect();
    Ok(Output { json: Value::Object(m), svg: Some(plot), csv: Some((vec!["x", "dot"], rows)) })
}

/// Dots, line, band, and an optional parametric overlay.
pub fn band(cfg: &RunConfig) -> Result<Output> {
    let (data, info) = load(cfg)?;
    let (bins, selection) = choose_bins(cfg, &data, cfg.p, cfg.s, cfg.v)?;
    let part = QuantilePartition::build(&data, &data.sort_index(), bins)?;
    let setup = RbcSetup::new(&data, &part, inference_config(cfg))?;
    let band = confidence_band(&setup);
    let line_fit = fit_binscatter(&data, &BasisSpec::new(cfg.p, cfg.s, part.clone())?)?;
    let dots = fit_binscatter(&data, &BasisSpec::new(0, 0, part.clone())?)?.dots();
    // plotted on the scale of y; the JSON grid stays at w = 0
    let shift = if cfg.v == 0 { setup.fit.display_shift() } else { 0.0 };
    let g = &band.grid;
    let line: Vec<f64> = g.points.iter().map(|&x| line_fit.evaluate(x, cfg.v)).collect::<Result<_>>()?;
    let line_shift = if cfg.v == 0 { line_fit.display_shift() } else { 0.0 };
    let overlay = match cfg.models.first() {
        Some(model) => {
            let mf = fit_model(&data, model)?;
            let curve: Vec<f64> = g.points.iter().map(|&x| mf.eval(x, cfg.v)).collect();
            Some((mf, curve))
        }
        None => None,
    };
    let mut m = header(cfg, Some(&info));
    m.insert("selection".into(), json!(selection));
    m.insert("bins".into(), json!(bins));
    m.insert("n".into(), json!(data.n()));
    m.insert("dots".into(), json!(dots));
    m.insert("line".into(), json!({ "p": cfg.p, "s": cfg.s, "y": line, "shift": line_shift }));
    m.insert("band".into(), json!(band));
    m.insert("shift".into(), json!(shift));
    if let Some((mf, curve)) = &overlay {
        m.insert("model".into(), json!({ "fit": mf, "curve": curve }));
    }
    let plot = Plot {
        title: format!("{:.0}% uniform band, J = {bins}", 100.0 * (1.0 - cfg.alpha)),
        dots: if cfg.v == 0 { vec![dot_pairs(&dots)] } else { Vec::new() },
        line: Some(g.points.iter().zip(&line).map(|(&x, &y)| (x, y + line_shift)).collect()),
        band: Some((
            g.points.clone(),
            band.lower.iter().map(|v| v + shift).collect(),
            band.upper.iter().map(|v| v + shift).collect(),
        )),
        overlay: overlay
            .as_ref()
            .map(|(_, c)| g.points.iter().zip(c).map(|(&x, &y)| (x, y + shift)).collect()),
    };
    let rows = (0..g.points.len())
        .map(|i| vec![g.points[i], g.mu[i], g.omega[i], g.se[i], band.lower[i], band.upper[i]])
        .collect();
    Ok(Output {
        json: Value::Object(m),
        svg: Some(plot),
        csv: Some((vec!["x", "mu", "omega", "se", "lower", "upper"], rows)),
    })
}

pub fn test_spec(cfg: &RunConfig) -> Result<Output> {
    let (data, info) = load(cfg)?;
    let (bins, selection) = choose_bins(cfg, &data, cfg.p, cfg.s, cfg.v)?;
    let part = QuantilePartition::build(&data, &data.sort_index(), bins)?;
    let setup = RbcSetup::new(&data, &part, inference_config(cfg))?;
    let mut table = Vec::new();
    let mut tests = Vec::new();
    for model in &cfg.models {
        let t = specification_on(&setup, &data, model)?;
        table.push(json!({
            "model": model.to_string(),
            "statistic": t.statistic,
            "cv": t.cv,
            "p_value": t.p_value,
            "reject": t.reject,
        }));
        tests.push(t);
    }
    let mut m = header(cfg, Some(&info));
    m.insert("selection".into(), json!(selection));
    m.insert("bins".into(), json!(bins));
    m.insert("n".into(), json!(data.n()));
    m.insert("table".into(), json!(table));
    m.insert("tests".into(), json!(tests));
    Ok(Output { json: Value::Object(m), svg: None, csv: None })
}

pub fn test_shape(cfg: &RunConfig) -> Result<Output> {
    let (data, info) = load(cfg)?;
    let (bins, selection) = choose_bins(cfg, &data, cfg.p, cfg.s, cfg.v)?;
    let part = QuantilePartition::build(&data, &data.sort_index(), bins)?;
    let setup = RbcSetup::new(&data, &part, inference_config(cfg))?;
    let t = shape_on(&setup, &data, cfg.direction, cfg.baseline.as_ref())?;
    let mut m = header(cfg, Some(&info));
    m.insert("selection".into(), json!(selection));
    m.insert("bins".into(), json!(bins));
    m.insert("n".into(), json!(data.n()));
    m.insert("test".into(), json!(t));
    Ok(Output { json: Value::Object(m), svg: None, csv: None })
}

pub fn select_bins(cfg: &RunConfig) -> Result<Output> {
    let (data, info) = load(cfg)?;
    let sel = select(&data, cfg.p, cfg.s, cfg.v, cfg.selector, cfg.vce)?;
    for w in &sel.warnings {
        log::warn!("{w}");
    }
    let mut m = header(cfg, Some(&info));
    m.insert("bins".into(), json!(sel.bins));
    m.insert("selection".into(), json!(sel));
    Ok(Output { json: Value::Object(m), svg: None, csv: None })
}

pub fn simulate(cfg: &RunConfig) -> Result<Output> {
    let kind = cfg.experiment.expect("validated");
    let mut exp = ExperimentConfig::preset(kind);
    // only flags the user actually set move the preset
    let flags = &cfg.explicit;
    if let Some(r) = cfg.reps {
        exp.reps = r;
    }
    exp.seed = cfg.seed;
    exp.dgp.n = cfg.n;
    if let Some(w) = cfg.w_mode {
        exp.dgp.w_mode = w;
    }
    if let Some(sd) = cfg.noise_sd {
        exp.dgp.noise_sd = sd;
    }
    if cfg.hetero.is_some() {
        exp.dgp.hetero = cfg.hetero;
    }
    if flags.p {
        exp.p = cfg.p;
    }
    if flags.s {
        exp.s = cfg.s.min(exp.p);
    }
    if flags.v {
        exp.v = cfg.v;
    }
    exp.q = cfg.q;
    exp.alpha = cfg.alpha;
    exp.draws = cfg.draws;
    exp.bins = cfg.bins;
    if flags.selector {
        exp.method = cfg.selector;
    }
    exp.vce = cfg.vce;
    if let Some(model) = cfg.models.first() {
        exp.model = model.clone();
    }
    exp.direction = cfg.direction;
    let summary = run_experiment(&exp)?;
    let mut m = header(cfg, None);
    m.insert("experiment".into(), json!(summary));
    if kind == ExperimentKind::Covadj {
        m.insert("ratio".into(), json!(summary.metric("ratio").map(|r| r.mean)));
    }
    Ok(Output { json: Value::Object(m), svg: None, csv: None })
}

pub fn compare_covadj(cfg: &RunConfig) -> Result<Output> {
    let (data, info, truth) = match &cfg.data {
        Some(_) => {
            let (d, i) = load(cfg)?;
            (d, i, None)
        }
        None => {
            let mut dgp = DgpSpec {
                n: cfg.n,
                seed: cfg.seed,
                w_mode: cfg.w_mode.unwrap_or(WMode::Correlated),
                hetero: cfg.hetero,
                ..Default::default()
            };
            if let Some(sd) = cfg.noise_sd {
                dgp.noise_sd = sd;
            }
            let d = generate(&dgp)?;
            let info = DataInfo {
                n: d.n(),
                d: d.d(),
                covariates: d.w_names().to_vec(),
                clusters: 0,
                rows_read: None,
                rows_dropped: None,
            };
            (d, info, Some(dgp))
        }
    };
    let (bins, selection) = choose_bins(cfg, &data, cfg.p, cfg.s, 0)?;
    let part = QuantilePartition::build(&data, &data.sort_index(), bins)?;
    let semi = fit_binscatter(&data, &BasisSpec::new(cfg.p, cfg.s, part)?)?.dots();
    let (_, resid_fit) = fit_residualized(&data, cfg.p, cfg.s, bins)?;
    let resid = resid_fit.dots();
    let mut m = header(cfg, Some(&info));
    m.insert("selection".into(), json!(selection));
    m.insert("bins".into(), json!(bins));
    m.insert("semilinear".into(), json!(semi));
    m.insert("residualized".into(), json!(resid));
    let mut plot = Plot {
        title: format!("semi-linear (blue) vs residualized (red), J = {bins}"),
        dots: vec![dot_pairs(&semi), dot_pairs(&resid)],
        ..Default::default()
    };
    if let Some(dgp) = truth {
        let target = |x: f64| dgp.mu(x) + dgp.w_mean();
        let err = |dots: &[Dot]| dots.iter().map(|d| (d.y - target(d.x)).abs()).sum::<f64>() / dots.len() as f64;
        m.insert("mean_abs_error".into(), json!({ "semilinear": err(&semi), "residualized": err(&resid) }));
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        plot.line = Some(xs.iter().map(|&x| (x, target(x))).collect());
    }
    Ok(Output { json: Value::Object(m), svg: Some(plot), csv: None })
}
