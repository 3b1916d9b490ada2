use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde_json::json;
use ttess::approximation::{approximate_with_report, median};
use ttess::geometry::min_enclosing_rectangle_of_points;
use ttess::gof::{envelope_test, EnvelopeConfig, SamplingConfig};
use ttess::inference::{fit, FitResult, McmlConfig};
use ttess::sampler::{run, ChainConfig, DEFAULT_BURN_IN};
use ttess::statistics::{angle_statistic, long_cell_count, sum_squared_areas};
use ttess::{GibbsModel, TTess};

use crate::config::{ChainSection, FileConfig};
use crate::output::{
    read_landscape, read_model, read_tessellation, read_text, read_window, Failure, OutDir, RunManifest,
    EXIT_NOT_CONVERGED,
};
use crate::{Cli, Command, Global};

#[derive(Args, Debug)]
pub struct ApproximateArgs {
    /// GeoJSON FeatureCollection; the feature with `role = "domain"` is the window.
    pub landscape: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub cut_threshold: Option<f64>,
    #[arg(long)]
    pub x_shift: Option<f64>,
}

/// Chain flags shared by the sampling commands.
#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Model JSON: `{"statistics": [...], "theta": [...]}`.
    #[arg(long)]
    pub model: PathBuf,
    /// Tessellation JSON whose window is used (default: unit square).
    #[arg(long)]
    pub window: Option<PathBuf>,
    /// Ignore theta and sample the completely random T-tessellation.
    #[arg(long)]
    pub crtt: bool,
    #[arg(short = 'n', long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Model JSON; its theta is the starting reference parameter unless `--psi0` is given.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub observed: PathBuf,
    /// Comma-separated starting reference parameter.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub psi0: Option<Vec<f64>>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GofArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `fit.json` from `ttess fit`; its estimate replaces the model's theta.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub observed: PathBuf,
    /// Number of curves, the observed one included.
    #[arg(short, long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    pub tessellation: PathBuf,
    /// Also report this model's feature vector and energy.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Elongation threshold of the long-cell count.
    #[arg(long, default_value_t = 4.0)]
    pub l0: f64,
    /// Write `cells.csv` and `stats.json` here instead of printing.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

const DEFAULT_THIN: u64 = 1000;
const DEFAULT_FIT_THIN: u64 = 200;
const DEFAULT_SAMPLE_SIZE: usize = 500;
const DEFAULT_M: usize = 100;

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.global.config.as_deref())?;
    let g = &cli.global;
    match &cli.command {
        Command::Approximate(a) => approximate(g, &file, a),
        Command::Simulate(a) => simulate(g, &file, a),
        Command::Fit(a) => fit_cmd(g, &file, a),
        Command::Gof(a) => gof(g, &file, a),
        Command::Stats(a) => stats(a),
    }
}

fn note(g: &Global, msg: impl AsRef<str>) {
    if !g.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn chain_config(g: &Global, section: &ChainSection, flags: &ChainArgs, default_thin: u64) -> ChainConfig {
    let mut c = ChainConfig::new(g.seed, 0);
    c.burn_in = flags.burn_in.or(section.burn_in).unwrap_or(DEFAULT_BURN_IN);
    c.thin = flags.thin.or(section.thin).unwrap_or(default_thin);
    if let Some(p) = section.move_probabilities {
        c.move_probabilities = p;
    }
    c
}

fn approximate(g: &Global, file: &FileConfig, a: &ApproximateArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg = file.approximate.unwrap_or_default();
    if let Some(d) = a.cut_threshold {
        cfg.cut_threshold = d;
    }
    if a.x_shift.is_some() {
        cfg.x_shift = a.x_shift;
    }
    let landscape = read_landscape(&a.landscape)?;
    let (t, report) = approximate_with_report(&landscape, &cfg)?;
    note(g, format!("{} fields -> {} cells", report.input.areas.len(), t.n_cells()));

    let mut out = OutDir::create(&a.out)?;
    let meta = json!({ "command": "approximate", "source": a.landscape, "cut_threshold": cfg.cut_threshold });
    out.write("tessellation.json", t.to_json(Some(meta)).as_bytes())?;
    let rows: Vec<(&str, String)> = vec![
        ("sides", report.sides.to_string()),
        ("dropped_slivers", report.dropped_slivers.to_string()),
        ("clusters", report.clusters.to_string()),
        ("boundary_clusters", report.boundary_clusters.to_string()),
        ("representatives", report.representatives.to_string()),
        ("i_vertices_repaired", report.repairs.i_vertices.to_string()),
        ("l_vertices_repaired", report.repairs.l_vertices.to_string()),
        ("x_vertices_repaired", report.repairs.x_vertices.to_string()),
        ("collinear_merges", report.repairs.merged_collinear.to_string()),
        ("input_cells", report.input.areas.len().to_string()),
        ("output_cells", report.output.areas.len().to_string()),
        ("input_median_area", median(&report.input.areas).to_string()),
        ("output_median_area", median(&report.output.areas).to_string()),
        ("input_median_perimeter", median(&report.input.perimeters).to_string()),
        ("output_median_perimeter", median(&report.output.perimeters).to_string()),
    ];
    out.write_csv(
        "report.csv",
        &["quantity".into(), "value".into()],
        rows.into_iter().map(|(k, v)| vec![k.to_string(), v]),
    )?;
    let mut manifest = RunManifest::new("approximate", g, json!({ "approximate": cfg }));
    manifest.inputs.push(a.landscape.clone());
    manifest.finish(&out, start.elapsed())
}

fn feature_header(model: &GibbsModel) -> Vec<String> {
    model.specs().iter().map(|s| s.label()).collect()
}

fn simulate(g: &Global, file: &FileConfig, a: &SimulateArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut model = read_model(&a.model)?;
    if a.crtt {
        model = model.with_theta(vec![0.0; model.dim()]).map_err(|e| Failure::invalid(e.to_string()))?;
    }
    let window = read_window(a.window.as_deref())?;
    let n = a.samples.or(file.simulate.samples).unwrap_or(1);
    let mut chain = chain_config(g, &file.chain, &a.chain, DEFAULT_THIN);
    chain.n_steps = chain.burn_in + chain.thin * n as u64;
    let set = run(&model, &window, &chain).map_err(|e| Failure::invalid(e.to_string()))?;
    note(g, format!("{} samples, acceptance {:.3}", set.len(), set.acceptance.overall()));

    let mut out = OutDir::create(&a.out)?;
    out.subdir("samples")?;
    let mut rows = Vec::with_capacity(set.len());
    for (i, (t, f)) in set.tessellations.iter().zip(&set.features).enumerate() {
        let meta = json!({ "index": i, "seed": g.seed, "model": model, "features": f });
        out.write(Path::new("samples").join(format!("sample_{i:05}.json")), t.to_json(Some(meta)).as_bytes())?;
        let mut row = vec![i.to_string()];
        row.extend(f.iter().map(|v| v.to_string()));
        row.push(model.energy_of(f).to_string());
        rows.push(row);
    }
    let mut header = vec!["index".to_string()];
    header.extend(feature_header(&model));
    header.push("energy".into());
    out.write_csv("samples.csv", &header, rows)?;

    let mut manifest = RunManifest::new(
        "simulate",
        g,
        json!({ "model": model, "chain": chain, "samples": n, "crtt": a.crtt, "acceptance_rates": set.acceptance.rates() }),
    );
    manifest.inputs.push(a.model.clone());
    manifest.inputs.extend(a.window.clone());
    manifest.finish(&out, start.elapsed())
}

fn fit_cmd(g: &Global, file: &FileConfig, a: &FitArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let model = read_model(&a.model)?;
    let observed = read_tessellation(&a.observed)?;
    let s = &file.fit;
    let psi0 = a.psi0.clone().or(s.psi0.clone()).unwrap_or_else(|| model.theta().to_vec());
    let n = a.sample_size.or(s.sample_size).unwrap_or(DEFAULT_SAMPLE_SIZE);
    let mut cfg = McmlConfig::new(psi0, n, chain_config(g, &file.chain, &a.chain, DEFAULT_FIT_THIN));
    if let Some(k) = a.max_iterations.or(s.max_outer_iterations) {
        cfg.max_outer_iterations = k;
    }
    if let Some(t) = s.convergence_tol {
        cfg.convergence_tol = t;
    }
    if let Some(c) = a.chains.or(s.chains) {
        cfg.n_chains = c;
    }
    if let Some(r) = s.region {
        cfg.region = r;
    }
    if let Some(tr) = &s.trust_region {
        cfg.trust_region = tr.clone();
    }
    cfg.validate(model.dim()).map_err(|e| Failure::invalid(e.to_string()))?;

    let result = fit(&model, &observed, &cfg).map_err(|e| Failure::invalid(e.to_string()))?;
    for (k, step) in result.trace.iter().enumerate() {
        note(g, format!("iteration {k}: theta {:?} ess {:.1}", step.theta, step.effective_sample_size));
    }
    let fitted = model.with_theta(result.theta_hat.clone()).map_err(|e| Failure::invalid(e.to_string()))?;

    let mut out = OutDir::create(&a.out)?;
    out.write_json("fit.json", &json!({ "model": fitted, "result": result }))?;
    let labels = feature_header(&model);
    let mut header = vec!["iteration".to_string()];
    header.extend(labels.iter().map(|l| format!("psi[{l}]")));
    header.extend(labels.iter().map(|l| format!("theta[{l}]")));
    header.extend(["mcl_value", "effective_sample_size", "radius", "limited_by"].map(String::from));
    let rows = result.trace.iter().enumerate().map(|(k, s)| {
        let mut row = vec![k.to_string()];
        row.extend(s.psi.iter().chain(&s.theta).map(|v| v.to_string()));
        row.push(s.mcl_value.to_string());
        row.push(s.effective_sample_size.to_string());
        row.push(s.radius.to_string());
        row.push(
            s.limited_by.map(|l| serde_json::to_value(l).unwrap().as_str().unwrap().to_string()).unwrap_or_default(),
        );
        row
    });
    out.write_csv("trace.csv", &header, rows)?;

    let mut manifest = RunManifest::new("fit", g, json!({ "model": model, "mcml": cfg }));
    manifest.inputs.extend([a.model.clone(), a.observed.clone()]);
    if !result.converged {
        manifest.exit_code = EXIT_NOT_CONVERGED;
    }
    manifest.finish(&out, start.elapsed())?;
    if result.converged {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_NOT_CONVERGED,
            format!("no convergence within {} outer iterations; last estimate written", cfg.max_outer_iterations),
        ))
    }
}

#[derive(serde::Deserialize)]
struct FitFile {
    result: FitResult,
}

fn gof(g: &Global, file: &FileConfig, a: &GofArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut model = read_model(&a.model)?;
    if let Some(p) = &a.fit {
        let f: FitFile =
            serde_json::from_str(&read_text(p)?).map_err(|e| Failure::parse(format!("{}: {e}", p.display())))?;
        model = model.with_theta(f.result.theta_hat).map_err(|e| Failure::invalid(e.to_string()))?;
    }
    let observed = read_tessellation(&a.observed)?;
    let flags = ChainArgs { burn_in: a.burn_in, thin: None };
    let mut cfg = EnvelopeConfig {
        m: a.m.or(file.gof.m).unwrap_or(DEFAULT_M),
        r_grid: file.gof.r_grid.clone(),
        sampling: SamplingConfig::default(),
        chain: chain_config(g, &file.chain, &flags, 1),
    };
    if let Some(k) = file.gof.grid {
        cfg.sampling.grid = k;
    }
    let res = envelope_test(&observed, &model, &cfg).map_err(|e| Failure::invalid(e.to_string()))?;
    let inside = res.inside_band();
    let equivalent = inside == !res.rejected();
    note(
        g,
        format!(
            "MAD {:.5} vs max {:.5}: rank {} of {}, p = {:.4}; band equivalence {}",
            res.mad_obs,
            res.half_width,
            res.rank,
            res.m,
            res.p_value,
            if equivalent { "holds" } else { "VIOLATED" }
        ),
    );

    let mut out = OutDir::create(&a.out)?;
    let (lo, hi) = (res.lower(), res.upper());
    let rows = (0..res.f_obs.r_grid.len())
        .map(|i| [res.f_obs.r_grid[i], res.f_obs.values[i], res.f_ref.values[i], lo[i], hi[i]].map(|v| v.to_string()));
    out.write_csv("envelope.csv", &["r", "f_obs", "f_ref", "lower", "upper"].map(String::from), rows)?;
    out.write_json(
        "summary.json",
        &json!({
            "mad_obs": res.mad_obs,
            "mad_max": res.half_width,
            "mad_sims": res.mad_sims,
            "rank": res.rank,
            "p_value": res.p_value,
            "m": res.m,
            "rejected": res.rejected(),
            "inside_band": inside,
            "band_equivalence": equivalent,
            "r_max": res.r_max,
            "seed": g.seed,
            "streams": [cfg.chain.stream, cfg.chain.stream + cfg.m as u64 - 2],
            "model": model,
        }),
    )?;
    let mut manifest = RunManifest::new("gof", g, json!({ "model": model, "envelope": cfg }));
    manifest.inputs.extend([a.model.clone(), a.observed.clone()]);
    manifest.inputs.extend(a.fit.clone());
    manifest.finish(&out, start.elapsed())
}

fn stats(a: &StatsArgs) -> Result<(), Failure> {
    let t = read_tessellation(&a.tessellation)?;
    if !(a.l0 > 1.0 && a.l0.is_finite()) {
        return Err(Failure::parse("--l0 must exceed 1"));
    }
    let mut summary = json!({
        "n_cells": t.n_cells(),
        "n_segments": t.n_internal_segments(),
        "sum_sq_areas": sum_squared_areas(&t),
        "angle_acute": angle_statistic(&t),
        "n_long_cells": long_cell_count(&t, a.l0),
        "l0": a.l0,
        "internal_length": t.internal_length(),
        "window_area": t.window().area(),
    });
    if let Some(p) = &a.model {
        let model = read_model(p)?;
        let f = model.features(&t);
        summary["features"] = json!(feature_header(&model)
            .into_iter()
            .zip(f.iter().map(|v| json!(v)))
            .collect::<serde_json::Map<_, _>>());
        summary["energy"] = json!(model.energy_of(&f));
    }
    let Some(dir) = &a.out else {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Ok(());
    };
    let mut out = OutDir::create(dir)?;
    out.write_json("stats.json", &summary)?;
    let rows = cell_rows(&t);
    out.write_csv("cells.csv", &["cell", "area", "perimeter", "vertices", "elongation"].map(String::from), rows)?;
    Ok(())
}

fn cell_rows(t: &TTess) -> Vec<Vec<String>> {
    t.cells()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let elongation = min_enclosing_rectangle_of_points(&c.ring).map_or(f64::NAN, |r| r.ratio());
            vec![
                i.to_string(),
                c.area.to_string(),
                c.perimeter.to_string(),
                c.ring.len().to_string(),
                elongation.to_string(),
            ]
        })
        .collect()
}
