//! Config-driven commands behind the CLI subcommands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, Scalar};
use super::experiments::{
    convergence_study, count_violations, eqdist_study, first_violation, max_principle_scan, oracle_for, run_flagged,
    ConvergenceTable, EqDistSummary, MaxPrincipleRow, Outcome, RelaxLine,
};
use crate::diagnostics::{fmt_f64, write_field_csv};
use crate::error::{Error, Result};
use crate::kernel::{cell_averages, RunOptions, Simulation};
use crate::monotonicity::{
    bgk_upper_bound, is_monotone, magic_max_omega_a, rasterize, structural_checks, MagicBound, MonotonicityProblem,
    RegionRaster, StructuralReport, Verdict,
};
use crate::scheme::{RelaxPair, SchemeSpec};

/// Slack on `[-m, m]` when counting invariant-set violations of a field.
pub const FIELD_BOUND_TOL: f64 = 1e-10;

/// Flags shared by all commands.
#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    /// Overrides `output.dir`; `None` with `write = false` skips file output.
    pub out: Option<PathBuf>,
    pub write: bool,
    pub oracle_refine: Option<usize>,
    /// Reduced ladders and resolutions for smoke runs.
    pub quick: bool,
}

impl CommandOptions {
    pub fn writing_to(dir: impl Into<PathBuf>) -> Self {
        Self { out: Some(dir.into()), write: true, ..Self::default() }
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.write.then(|| self.out.clone().unwrap_or_else(|| cfg.output.dir.clone()))
    }

    fn refine(&self, cfg: &ExperimentConfig) -> usize {
        self.oracle_refine.unwrap_or(cfg.run.oracle_refine)
    }
}

/// The config a command actually runs: flag overrides and `--quick` reductions
/// are folded in so the echoed manifest reproduces the run on its own.
pub fn effective_config(cfg: &ExperimentConfig, opts: &CommandOptions, command: &str) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    c.run.oracle_refine = opts.refine(cfg);
    if let Some(out) = &opts.out {
        c.output.dir = out.clone();
    }
    if command == "eqdist" && c.grid.n_list.is_empty() && c.grid.dx_list.is_empty() {
        c.grid.n_list = vec![64, 128, 256];
    }
    if !opts.quick {
        return Ok(c);
    }
    match command {
        "run" => c.grid.n = c.grid.n.min(64),
        "convergence" | "eqdist" => {
            let keep = if command == "eqdist" { 2 } else { 3 };
            c.grid.n_list = c.n_list()?.into_iter().take(keep).collect();
            c.grid.dx_list.clear();
        }
        "region" => c.run.resolution = c.run.resolution.min(16),
        "maxprinciple" => {
            let get = |v: &Option<Scalar>, d: f64| v.as_ref().map(|s| s.value()).transpose().map(|o| o.unwrap_or(d));
            let (from, to) = (get(&c.relax.from, DEFAULT_SCAN.0)?, get(&c.relax.to, DEFAULT_SCAN.1)?);
            let step = get(&c.relax.step, DEFAULT_SCAN.2)?.max((to - from) / 8.0);
            c.relax.step = Some(Scalar::Number(step));
        }
        _ => {}
    }
    Ok(c)
}

/// Default `(from, to, step)` of a maximum-principle scan.
pub const DEFAULT_SCAN: (f64, f64, f64) = (0.1, 1.99, 0.01);

#[derive(Serialize)]
struct Resolved {
    scheme: SchemeSpec,
    flux: String,
    datum: String,
    m: f64,
    #[serde(rename = "T")]
    final_time: f64,
    relax: Vec<[f64; 2]>,
    n_list: Vec<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    resolved: Resolved,
}

fn prepare(cfg: &ExperimentConfig, opts: &CommandOptions, command: &str, relax: &[RelaxPair], n_list: &[usize]) -> Result<Option<PathBuf>> {
    let Some(dir) = opts.out_dir(cfg) else { return Ok(None) };
    fs::create_dir_all(&dir)?;
    let datum = cfg.datum()?;
    let manifest = Manifest {
        command,
        config: cfg,
        resolved: Resolved {
            scheme: cfg.scheme()?,
            flux: cfg.flux()?.name().to_string(),
            datum: datum.name.clone(),
            m: datum.bound,
            final_time: cfg.final_time()?,
            relax: relax.iter().map(|r| [r.omega_s(), r.omega_a()]).collect(),
            n_list: n_list.to_vec(),
        },
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(Some(dir))
}

fn problem(cfg: &ExperimentConfig) -> Result<(SchemeSpec, MonotonicityProblem)> {
    let spec = cfg.scheme()?;
    let flux = cfg.flux()?;
    let m = cfg.datum()?.bound;
    let p = MonotonicityProblem::new(&spec, &flux, m)?;
    Ok((spec, p))
}

fn fmt_bound(b: &MagicBound) -> String {
    match b {
        MagicBound::Empty => "empty".into(),
        MagicBound::Max { omega_a, attained: true } => format!("{omega_a:.15} (attained)"),
        MagicBound::Max { omega_a, attained: false } => format!("{omega_a:.15} (supremum, not attained)"),
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub relax: RelaxPair,
    pub verdict: Verdict,
    pub g: Vec<f64>,
    pub bgk_bound: Option<f64>,
    pub magic_bound: MagicBound,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let where_ = if self.verdict.inside { "inside" } else { "outside" };
        writeln!(f, "relaxation (omega_s, omega_a) = ({}, {}): {where_} M", self.relax.omega_s(), self.relax.omega_a())?;
        writeln!(f, "  rest margin        {:+.6e}", self.verdict.rest_margin)?;
        for (j, m) in self.verdict.link_margins.iter().enumerate() {
            writeln!(f, "  link {j} margin      {m:+.6e}  (G = {:.6e})", self.g[j])?;
        }
        match self.bgk_bound {
            Some(b) => writeln!(f, "  BGK upper bound    {b:.15}")?,
            None => writeln!(f, "  BGK upper bound    none (equilibria not monotone)")?,
        }
        write!(f, "  magic max omega_a  {}", fmt_bound(&self.magic_bound))
    }
}

pub fn cmd_check(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let (_, p) = problem(cfg)?;
    let relax = cfg.relax()?;
    Ok(CheckReport {
        relax,
        verdict: is_monotone(&p, relax),
        g: p.g.clone(),
        bgk_bound: bgk_upper_bound(&p),
        magic_bound: magic_max_omega_a(&p),
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub relax: RelaxPair,
    pub outcome: Outcome,
    /// Final cells outside `[-m - 1e-10, m + 1e-10]`.
    pub violations: usize,
    pub m: f64,
    pub dir: Option<PathBuf>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.outcome.report;
        writeln!(f, "steps {}  t = {}", r.steps.last().copied().unwrap_or(0), r.final_time())?;
        writeln!(f, "max u {:.6e}  min u {:.6e}  (m = {})", r.max_u(), r.min_u(), self.m)?;
        writeln!(f, "final cells outside [-m, m]: {}", self.violations)?;
        if let Some(e) = r.linf_error() {
            writeln!(f, "L-inf(L1) error vs oracle: {e:.6e}")?;
        }
        match self.outcome.blew_up {
            Some(step) => write!(f, "BLOW-UP at step {step}"),
            None => write!(f, "completed"),
        }
    }
}

pub fn cmd_run(cfg: &ExperimentConfig, opts: &CommandOptions) -> Result<RunSummary> {
    let cfg = &effective_config(cfg, opts, "run")?;
    cfg.validate()?;
    let spec = cfg.scheme()?;
    let flux = cfg.flux()?;
    let datum = cfg.datum()?;
    let relax = cfg.relax()?;
    let t = cfg.final_time()?;
    let n = cfg.grid.n;
    let grid = cfg.grid_for(&spec, n)?;
    let dir = prepare(cfg, opts, "run", &[relax], &[n])?;
    let oracle = if cfg.run.oracle { Some(oracle_for(&flux, &datum, &grid, t, cfg.run.oracle_refine)?) } else { None };
    let sim = Simulation::new(&spec, &flux, &grid, relax)?;
    let run_opts = RunOptions { final_time: t, reference: oracle.as_ref(), cadence: cfg.run.cadence };
    let outcome = run_flagged(&sim, &datum, &run_opts)?;
    let violations = count_violations(&outcome.report.final_u, datum.bound, FIELD_BOUND_TOL);
    if let Some(dir) = &dir {
        write_field_csv(&dir.join("field_initial.csv"), &grid, &cell_averages(&datum, &grid), None)?;
        outcome.report.write_field_csv(&dir.join("field_final.csv"), cfg.output.distributions)?;
        outcome.report.write_series_csv(&dir.join("series.csv"))?;
    }
    Ok(RunSummary { relax, outcome, violations, m: datum.bound, dir })
}

#[derive(Debug, Clone)]
pub struct ConvergenceSummary {
    pub tables: Vec<ConvergenceTable>,
}

impl fmt::Display for ConvergenceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tables {
            writeln!(f, "{}", t.label)?;
            writeln!(f, "  {:>10}  {:>10}  {:>6}", "dx", "error", "order")?;
            for r in &t.rows {
                let order = r.order.map(|o| format!("{o:6.2}")).unwrap_or_else(|| "     -".into());
                let flag = if r.blew_up.is_some() { "  blow-up" } else { "" };
                writeln!(f, "  {:>10.2e}  {:>10.2e}  {order}{flag}", r.dx, r.error)?;
            }
        }
        Ok(())
    }
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}

pub fn cmd_convergence(cfg: &ExperimentConfig, opts: &CommandOptions) -> Result<ConvergenceSummary> {
    let cfg = &effective_config(cfg, opts, "convergence")?;
    cfg.validate()?;
    let spec = cfg.scheme()?;
    let flux = cfg.flux()?;
    let datum = cfg.datum()?;
    let sweep = cfg.relax_sweep()?;
    let n_list = cfg.n_list()?;
    let pairs: Vec<RelaxPair> = sweep.iter().map(|s| s.1).collect();
    let dir = prepare(cfg, opts, "convergence", &pairs, &n_list)?;
    let tables = convergence_study(&spec, &flux, &datum, &sweep, &n_list, cfg.final_time()?, cfg.run.oracle_refine)?;
    if let Some(dir) = &dir {
        let mut all = csv::Writer::from_path(dir.join("convergence_summary.csv"))?;
        all.write_record(["label", "omega_s", "omega_a", "n", "dx", "error", "order", "blew_up"])?;
        for (i, t) in tables.iter().enumerate() {
            let mut w = csv::Writer::from_path(dir.join(format!("convergence_{i:02}_{}.csv", sanitize(&t.label))))?;
            w.write_record(["dx", "error", "order"])?;
            for r in &t.rows {
                let order = r.order.map(fmt_f64).unwrap_or_default();
                w.write_record([fmt_f64(r.dx), fmt_f64(r.error), order.clone()])?;
                all.write_record([
                    t.label.clone(),
                    fmt_f64(t.relax.omega_s()),
                    fmt_f64(t.relax.omega_a()),
                    r.n.to_string(),
                    fmt_f64(r.dx),
                    fmt_f64(r.error),
                    order,
                    r.blew_up.map(|s| s.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
        all.flush()?;
    }
    Ok(ConvergenceSummary { tables })
}

#[derive(Debug, Clone)]
pub struct RegionSummary {
    pub raster: RegionRaster,
    pub report: StructuralReport,
    pub bgk_bound: Option<f64>,
    pub magic_bound: MagicBound,
}

impl fmt::Display for RegionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.raster;
        writeln!(f, "raster {}x{}: {} cells inside", r.resolution, r.resolution, r.count_inside())?;
        writeln!(f, "  BGK bound {:?}, raster diagonal cutoff {:?}", self.bgk_bound, r.diagonal_cutoff())?;
        writeln!(f, "  magic bound {}, raster magic cutoff {:?}", fmt_bound(&self.magic_bound), r.magic_cutoff())?;
        write!(
            f,
            "  convexity {}  no omega=2 {}  diagonal interior {}",
            self.report.convexity_ok, self.report.no_omega_two_ok, self.report.diagonal_interior_ok
        )
    }
}

pub fn cmd_region(cfg: &ExperimentConfig, opts: &CommandOptions) -> Result<RegionSummary> {
    let cfg = &effective_config(cfg, opts, "region")?;
    let (_, p) = problem(cfg)?;
    let resolution = cfg.run.resolution;
    let dir = prepare(cfg, opts, "region", &[], &[])?;
    let raster = rasterize(&p, resolution)?;
    let report = structural_checks(&raster);
    let summary = RegionSummary { bgk_bound: bgk_upper_bound(&p), magic_bound: magic_max_omega_a(&p), raster, report };
    if let Some(dir) = &dir {
        summary.raster.write_csv(&dir.join("region.csv"))?;
        summary.raster.write_pgm(&dir.join("region.pgm"))?;
        fs::write(dir.join("structural.txt"), format!("{summary}\n"))?;
    }
    Ok(summary)
}

impl fmt::Display for EqDistSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relaxation ({}, {})", self.relax.omega_s(), self.relax.omega_a())?;
        for (t, s) in self.traces.iter().zip(&self.decay_slopes) {
            let slope = s.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            writeln!(f, "  n {:>5}  {:<18} TV0 {:.3}  plateau {:.4e}  decay slope {slope}", t.n, t.datum, t.tv0, t.plateau)?;
        }
        writeln!(f, "  dx-halving plateau ratios {:?}", self.dx_ratios)?;
        writeln!(f, "  TV-doubling plateau ratios {:?}", self.tv_ratios)?;
        write!(f, "  expected decay slope {:.3}", self.expected_slope)
    }
}

pub fn cmd_eqdist(cfg: &ExperimentConfig, opts: &CommandOptions) -> Result<EqDistSummary> {
    let cfg = &effective_config(cfg, opts, "eqdist")?;
    cfg.validate()?;
    let spec = cfg.scheme()?;
    let flux = cfg.flux()?;
    let relax = cfg.relax()?;
    let mut data = vec![cfg.datum()?];
    for v in &cfg.datum.variants {
        data.push(cfg.datum_named(v)?);
    }
    let n_list = cfg.n_list()?;
    let dir = prepare(cfg, opts, "eqdist", &[relax], &n_list)?;
    let summary = eqdist_study(&spec, &flux, &data, &n_list, relax, cfg.final_time()?)?;
    if let Some(dir) = &dir {
        for t in &summary.traces {
            let mut w = csv::Writer::from_path(dir.join(format!("eqdist_{}_{}.csv", sanitize(&t.datum), t.n)))?;
            w.write_record(["step", "eq_dist"])?;
            for (i, v) in t.eq_dist.iter().enumerate() {
                w.write_record([i.to_string(), fmt_f64(*v)])?;
            }
            w.flush()?;
        }
        let mut w = csv::Writer::from_path(dir.join("eqdist_summary.csv"))?;
        w.write_record(["n", "datum", "tv0", "plateau", "decay_slope", "expected_slope"])?;
        for (t, s) in summary.traces.iter().zip(&summary.decay_slopes) {
            w.write_record([
                t.n.to_string(),
                t.datum.clone(),
                fmt_f64(t.tv0),
                fmt_f64(t.plateau),
                s.map(fmt_f64).unwrap_or_default(),
                fmt_f64(summary.expected_slope),
            ])?;
        }
        w.flush()?;
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct MaxPrincipleSummary {
    pub line: RelaxLine,
    pub rows: Vec<MaxPrincipleRow>,
    pub first_violation: Option<f64>,
}

impl fmt::Display for MaxPrincipleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?} line", self.line)?;
        for r in &self.rows {
            let flag = if r.violated { "  VIOLATED" } else { "" };
            writeln!(f, "  omega {:.4}  max u {:.10}{flag}", r.omega, r.max_u)?;
        }
        match self.first_violation {
            Some(w) => write!(f, "first violation at omega = {w}"),
            None => write!(f, "no violation"),
        }
    }
}

pub fn cmd_maxprinciple(cfg: &ExperimentConfig, opts: &CommandOptions) -> Result<MaxPrincipleSummary> {
    let cfg = &effective_config(cfg, opts, "maxprinciple")?;
    cfg.validate()?;
    let spec = cfg.scheme()?;
    let flux = cfg.flux()?;
    let datum = cfg.datum()?;
    let grid = cfg.grid(&spec)?;
    let line = RelaxLine::parse(cfg.relax.line.as_deref().unwrap_or("magic"))?;
    let get = |v: &Option<Scalar>, d: f64| v.as_ref().map(|s| s.value()).transpose().map(|o| o.unwrap_or(d));
    let from = get(&cfg.relax.from, DEFAULT_SCAN.0)?;
    let to = get(&cfg.relax.to, DEFAULT_SCAN.1)?;
    let step = get(&cfg.relax.step, DEFAULT_SCAN.2)?;
    let mut points = line.scan(from, to, step)?;
    for e in &cfg.relax.extra {
        let w = e.value()?;
        points.push((w, line.point(w)?));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pairs: Vec<RelaxPair> = points.iter().map(|p| p.1).collect();
    let dir = prepare(cfg, opts, "maxprinciple", &pairs, &[grid.n()])?;
    let threshold = cfg.run.violation_threshold.value()?;
    let rows = max_principle_scan(&spec, &flux, &datum, &grid, &points, cfg.final_time()?, threshold)?;
    if let Some(dir) = &dir {
        write_maxprinciple_csv(&dir.join("maxprinciple.csv"), &rows)?;
    }
    Ok(MaxPrincipleSummary { line, first_violation: first_violation(&rows), rows })
}

fn write_maxprinciple_csv(path: &Path, rows: &[MaxPrincipleRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["omega", "omega_s", "omega_a", "max_u", "min_u", "violated"])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.omega),
            fmt_f64(r.relax.omega_s()),
            fmt_f64(r.relax.omega_a()),
            fmt_f64(r.max_u),
            fmt_f64(r.min_u),
            (r.violated as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
