mod config;
mod setspec;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use config::{parse_dir, ExperimentConfig, Resolved, DEFAULT_OUT};
use ehrhard::analysis::{
    default_alpha_grid, default_levels, family_frame, log_profile, log_profile_recursion_check, product_structure_test,
    ps_test_1d, violation_search, SearchOptions, SearchStatus, Verdict, DEFAULT_PQ_GRID,
};
use ehrhard::flow::{flow_to_halfspace, FlowOptions};
use ehrhard::io::save_indicator_set;
use ehrhard::perimeter::{
    default_schedule, perimeter_bv, perimeter_graph, perimeter_halfspace, perimeter_minkowski, PerimeterEstimate,
};
use ehrhard::sets::{half_space_equal_measure, mu_measure, rasterize_on, GridGeometry, IndicatorSet, Region};
use ehrhard::symmetrize::{height_function, SymmetrizeOptions, Symmetrizer};
use ehrhard::weights::{Frame, WeightedDensity};

/// Generalized Ehrhard symmetrization and weighted perimeter experiments.
#[derive(Parser, Debug)]
#[command(name = "ehrhard", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Density spec file.
    #[arg(long, global = true)]
    density: Option<PathBuf>,
    /// Set spec, e.g. `halfspace:e1:0` or `ball:0,0:1+box:1,1:2,2`.
    #[arg(long, global = true)]
    set: Option<String>,
    /// Direction `vx,vy[,vz]`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    dir: Option<String>,
    /// Voxels along the widest box axis.
    #[arg(long, global = true)]
    res: Option<usize>,
    /// Supersampling factor per axis.
    #[arg(long, global = true)]
    subcell: Option<usize>,
    /// Flow step budget.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Flow density threshold.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Recorded in the report; all subcommands are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Symmetrize a set along `--dir`.
    Symmetrize,
    /// Weighted perimeter of a set by every applicable estimator.
    Perimeter,
    /// Hole-filling flow toward the equal-mass half-space with normal `--dir`.
    Flow,
    /// Symmetry and subadditivity checks on each one-dimensional factor.
    PsTest,
    /// Product-structure test in the frame with axis `--dir`.
    ProductTest,
    /// Functional equations and quadratic fit of the log-profile along `--dir`.
    FitQuadratic,
    /// Search for a certified perimeter increase.
    Search,
    /// Weighted measure of a set and its equal-mass half-space.
    Measure,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Symmetrize => "symmetrize",
            Command::Perimeter => "perimeter",
            Command::Flow => "flow",
            Command::PsTest => "ps-test",
            Command::ProductTest => "product-test",
            Command::FitQuadratic => "fit-quadratic",
            Command::Search => "search",
            Command::Measure => "measure",
        }
    }
}

/// What a subcommand produced.
struct Outcome {
    result: Value,
    csv: Option<String>,
    sets: Vec<(&'static str, IndicatorSet)>,
    violation: bool,
}

impl Outcome {
    fn new<T: Serialize>(result: &T) -> Result<Self> {
        Ok(Outcome { result: serde_json::to_value(result)?, csv: None, sets: Vec::new(), violation: false })
    }
}

struct Ctx {
    cfg: Resolved,
    w: WeightedDensity,
}

impl Ctx {
    fn geom(&self) -> Result<GridGeometry> {
        Ok(GridGeometry::for_density(&self.w, self.cfg.res)?)
    }

    fn region(&self) -> Result<Region> {
        let spec = self.cfg.set.as_deref().ok_or_else(|| anyhow!("missing set"))?;
        setspec::parse_set(spec, self.w.dim)
    }

    fn set(&self) -> Result<(Region, IndicatorSet)> {
        let region = self.region()?;
        let e = rasterize_on(&region, &self.geom()?, self.cfg.subcell)?;
        Ok((region, e))
    }

    fn dir(&self) -> Result<Vec<f64>> {
        let v = self.cfg.dir.clone().ok_or_else(|| anyhow!("missing dir"))?;
        self.check_dir(v)
    }

    fn dir_or_axis(&self, axis: usize) -> Result<Vec<f64>> {
        match &self.cfg.dir {
            Some(v) => self.check_dir(v.clone()),
            None => {
                let mut v = vec![0.0; self.w.dim];
                v[axis] = 1.0;
                Ok(v)
            }
        }
    }

    fn check_dir(&self, v: Vec<f64>) -> Result<Vec<f64>> {
        if v.len() != self.w.dim {
            bail!("direction has {} components, density dimension is {}", v.len(), self.w.dim);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            bail!("direction must be nonzero");
        }
        Ok(v.iter().map(|x| x / n).collect())
    }
}

fn estimate_entry(method: &str, r: ehrhard::Result<PerimeterEstimate>) -> Value {
    match r {
        Ok(p) => serde_json::to_value(p).unwrap_or(Value::Null),
        Err(e) => json!({ "method": method, "error": e.to_string() }),
    }
}

fn symmetrize(ctx: &Ctx) -> Result<Outcome> {
    let (_, e) = ctx.set()?;
    let v = ctx.dir()?;
    let sym = Symmetrizer::new(&ctx.w, &e.geom, SymmetrizeOptions::default());
    let out = sym.run(&e, &v)?;
    let result = json!({
        "path": out.path,
        "raw_defect": out.raw_defect,
        "defect": out.defect,
        "mass_e": mu_measure(&ctx.w, &e),
        "mass_s": mu_measure(&ctx.w, &out.set),
        "tail": out.set.tail,
        "per_e": estimate_entry("bv_boundary", perimeter_bv(&ctx.w, &e)),
        "per_s": estimate_entry("bv_boundary", perimeter_bv(&ctx.w, &out.set)),
    });
    let mut o = Outcome::new(&result)?;
    o.sets.push(("symmetrized.ehis", out.set));
    Ok(o)
}

fn perimeter(ctx: &Ctx) -> Result<Outcome> {
    let (region, e) = ctx.set()?;
    let mut estimates = Vec::new();
    let mut value = None;
    if let Region::HalfSpace(h) = &region {
        let p = perimeter_halfspace(&ctx.w, h);
        if let Ok(p) = &p {
            value = Some(p.value);
        }
        estimates.push(estimate_entry("halfspace_closed_form", p));
    }
    let bv = perimeter_bv(&ctx.w, &e);
    if let (None, Ok(p)) = (value, &bv) {
        value = Some(p.value);
    }
    estimates.push(estimate_entry("bv_boundary", bv));
    estimates.push(estimate_entry("minkowski", perimeter_minkowski(&ctx.w, &e, &default_schedule(&e))));
    if ctx.cfg.dir.is_some() && ctx.w.dim >= 2 {
        let frame = Frame::with_axis_vector(&ctx.dir()?)?;
        let g = height_function(&ctx.w, &frame, &e, 0.0, None).and_then(|g| perimeter_graph(&ctx.w, &g));
        estimates.push(estimate_entry("graph_formula", g));
    }
    Outcome::new(&json!({ "value": value, "estimates": estimates }))
}

fn flow(ctx: &Ctx) -> Result<Outcome> {
    let (_, e) = ctx.set()?;
    let v = ctx.dir()?;
    let mut opts = FlowOptions { eps: ctx.cfg.eps, ..Default::default() };
    if let Some(k) = ctx.cfg.steps {
        opts.max_steps = k;
    }
    let mut trace = flow_to_halfspace(&ctx.w, &e, &v, &opts)?;
    let summary = json!({
        "status": trace.status,
        "steps": trace.step_count(),
        "initial_symm_diff": trace.initial_symm_diff(),
        "final_symm_diff": trace.final_symm_diff(),
        "max_excess_increase": trace.max_excess_increase(),
    });
    let csv = trace.to_csv();
    let final_set = trace.final_set.take();
    let mut o = Outcome::new(&json!({ "summary": summary, "trace": trace }))?;
    o.csv = Some(csv);
    if let Some(f) = final_set {
        o.sets.push(("final.ehis", f));
    }
    Ok(o)
}

fn ps_test(ctx: &Ctx) -> Result<Outcome> {
    let (_, factors) = ctx
        .w
        .factors()
        .ok_or_else(|| anyhow!("ps-test needs a density with one-dimensional factors"))?;
    let mut axes = Vec::new();
    let mut all_pass = true;
    for f in &factors {
        let r = ps_test_1d(f, DEFAULT_PQ_GRID)?;
        all_pass &= r.verdict == Verdict::Pass;
        axes.push(r);
    }
    let verdict = if all_pass { Verdict::Pass } else { Verdict::Fail };
    Outcome::new(&json!({ "verdict": verdict, "axes": axes }))
}

fn product_test(ctx: &Ctx) -> Result<Outcome> {
    let n = ctx.w.dim;
    let frame = Frame::with_axis_vector(&ctx.dir_or_axis(n - 1)?)?;
    let levels = default_levels(&ctx.w, &frame, 9);
    Outcome::new(&product_structure_test(&ctx.w, &frame, &levels)?)
}

fn fit_quadratic(ctx: &Ctx) -> Result<Outcome> {
    let d = ctx.dir_or_axis(0)?;
    let (center, _) = family_frame(&ctx.w);
    let ks: Vec<u32> = (1..=9).collect();
    let fit = log_profile_recursion_check(log_profile(&ctx.w, &center, &d), &ks, &default_alpha_grid(40))?;
    Outcome::new(&json!({ "center": center, "direction": d, "fit": fit }))
}

fn search(ctx: &Ctx, explicit_res: bool) -> Result<Outcome> {
    let mut opts = SearchOptions { subcell: ctx.cfg.subcell, ..Default::default() };
    if explicit_res {
        opts.certify_res = ctx.cfg.res;
        opts.coarse_res = (ctx.cfg.res / 2).max(16);
    }
    let mut report = violation_search(&ctx.w, &opts)?;
    let set = report.record.as_mut().and_then(|r| r.set.take());
    let mut o = Outcome::new(&json!({ "options": opts, "report": report }))?;
    o.violation = report.status == SearchStatus::Found;
    if let Some(s) = set {
        o.sets.push(("violation.ehis", s));
    }
    Ok(o)
}

fn measure(ctx: &Ctx) -> Result<Outcome> {
    let (_, e) = ctx.set()?;
    let mut result = json!({
        "mass": mu_measure(&ctx.w, &e),
        "total": ctx.w.total_mass(),
    });
    if ctx.cfg.dir.is_some() {
        let h = half_space_equal_measure(&ctx.w, &e, &ctx.dir()?)?;
        result["equal_mass_half_space"] = json!(h);
        result["half_space_perimeter"] = estimate_entry("halfspace_closed_form", perimeter_halfspace(&ctx.w, &h));
    }
    Outcome::new(&result)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<u8> {
    let c = cli.common;
    let base = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let flags = ExperimentConfig {
        density: c.density.map(config::DensitySource::Path),
        set: c.set,
        dir: c.dir.as_deref().map(parse_dir).transpose().map_err(|e| anyhow!("--dir: {e}"))?,
        res: c.res,
        subcell: c.subcell,
        steps: c.steps,
        eps: c.eps,
        seed: c.seed,
        threads: c.threads,
        out: c.out,
    };
    let cfg = base.overlay(flags);
    let explicit_res = cfg.res.is_some();
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let (resolved, w) = cfg.resolve(cli.command.name())?;
    if let Some(t) = resolved.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring worker threads")?;
    }
    let ctx = Ctx { cfg: resolved, w };
    let start = Instant::now();
    let outcome = match cli.command {
        Command::Symmetrize => symmetrize(&ctx),
        Command::Perimeter => perimeter(&ctx),
        Command::Flow => flow(&ctx),
        Command::PsTest => ps_test(&ctx),
        Command::ProductTest => product_test(&ctx),
        Command::FitQuadratic => fit_quadratic(&ctx),
        Command::Search => search(&ctx, explicit_res),
        Command::Measure => measure(&ctx),
    }?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let report = json!({ "config": ctx.cfg, "result": outcome.result });
    write_json(&out_dir.join("report.json"), &report)?;
    write_json(&out_dir.join("timing.json"), &json!({ "wall_ms": wall_ms }))?;
    if let Some(csv) = &outcome.csv {
        std::fs::write(out_dir.join("trace.csv"), csv)?;
    }
    for (name, set) in &outcome.sets {
        save_indicator_set(&out_dir.join(name), set)?;
    }
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string(&report["result"])?);
    Ok(if outcome.violation { 2 } else { 0 })
}

/// Variant name of a library error, or a generic kind.
fn error_kind(e: &anyhow::Error) -> String {
    match e.downcast_ref::<ehrhard::Error>() {
        Some(err) => {
            let dbg = format!("{err:?}");
            dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
        }
        None => "InvalidInput".to_string(),
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let _ = writeln!(std::io::stdout().lock(), "{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout().lock(), "{e}");
                return ExitCode::SUCCESS;
            }
            return fail("Usage", e.to_string().trim());
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(&error_kind(&e), &format!("{e:#}")),
    }
}
