//! Typed drivers for the convergence, maximum-principle and
//! equilibrium-distance studies. File output lives in `commands`.

use rayon::prelude::*;

use crate::diagnostics::{convergence_order, RunReport};
use crate::error::{Error, Result};
use crate::kernel::{GridSpec, InitialDatum, RunOptions, Simulation};
use crate::reference::{godunov_solve, GodunovOptions, OracleSolution};
use crate::scheme::{FluxModel, RelaxPair, SchemeSpec};

/// Outcome of one run: a report, possibly cut short by non-finite values.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub blew_up: Option<usize>,
}

/// Runs a simulation, turning blow-up into a flagged outcome.
pub fn run_flagged(sim: &Simulation<'_>, datum: &InitialDatum, opts: &RunOptions<'_>) -> Result<Outcome> {
    match sim.run(datum, opts, &mut []) {
        Ok(report) => Ok(Outcome { report, blew_up: None }),
        Err(Error::NonFinite { step, partial: Some(report) }) => Ok(Outcome { report: *report, blew_up: Some(step) }),
        Err(e) => Err(e),
    }
}

/// Godunov reference for runs on `target`, refined `r` times.
pub fn oracle_for(flux: &FluxModel, datum: &InitialDatum, target: &GridSpec, final_time: f64, r: usize) -> Result<OracleSolution> {
    if r == 0 {
        return Err(Error::Argument("oracle refinement must be positive".into()));
    }
    let fine = target.refine(r)?;
    godunov_solve(flux, datum, &fine, final_time, &GodunovOptions::for_target(target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dx: f64,
    /// `max_n ‖u^n - u(t_n)‖_{L¹}`; for blown-up runs, the maximum before blow-up.
    pub error: f64,
    /// Order against the previous row.
    pub order: Option<f64>,
    pub blew_up: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub label: String,
    pub relax: RelaxPair,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn row(&self, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// `L∞_t L¹_x` errors for every relaxation setting and resolution. One oracle
/// per resolution is shared by all settings.
pub fn convergence_study(
    spec: &SchemeSpec,
    flux: &FluxModel,
    datum: &InitialDatum,
    relaxes: &[(String, RelaxPair)],
    n_list: &[usize],
    final_time: f64,
    refine: usize,
) -> Result<Vec<ConvergenceTable>> {
    let mut tables: Vec<ConvergenceTable> = relaxes
        .iter()
        .map(|(label, relax)| ConvergenceTable { label: label.clone(), relax: *relax, rows: Vec::new() })
        .collect();
    for &n in n_list {
        let grid = GridSpec::symmetric(spec, n)?;
        let oracle = oracle_for(flux, datum, &grid, final_time, refine)?;
        let opts = RunOptions { final_time, reference: Some(&oracle), cadence: 1 };
        let outcomes: Vec<Result<Outcome>> = relaxes
            .par_iter()
            .map(|(_, relax)| {
                let sim = Simulation::new(spec, flux, &grid, *relax)?;
                run_flagged(&sim, datum, &opts)
            })
            .collect();
        for (table, outcome) in tables.iter_mut().zip(outcomes) {
            let outcome = outcome?;
            let error = outcome.report.linf_error().unwrap_or(f64::NAN);
            table.rows.push(ConvergenceRow { n, dx: grid.dx(), error, order: None, blew_up: outcome.blew_up });
        }
    }
    for table in &mut tables {
        let orders = convergence_order(&table.errors());
        for (row, o) in table.rows.iter_mut().skip(1).zip(orders) {
            row.order = Some(o);
        }
    }
    Ok(tables)
}

/// Line in the relaxation plane scanned by [`max_principle_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxLine {
    /// `(2 - ω, ω)`.
    Magic,
    /// `(ω, ω)`.
    Bgk,
}

impl RelaxLine {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "magic" => Ok(Self::Magic),
            "bgk" => Ok(Self::Bgk),
            other => Err(Error::Config(format!("unknown relax.line '{other}' (expected magic or bgk)"))),
        }
    }

    pub fn point(&self, omega: f64) -> Result<RelaxPair> {
        match self {
            Self::Magic => RelaxPair::magic(omega),
            Self::Bgk => RelaxPair::bgk(omega),
        }
    }

    /// `from, from + step, ...` up to `to` (inclusive within round-off).
    pub fn scan(&self, from: f64, to: f64, step: f64) -> Result<Vec<(f64, RelaxPair)>> {
        if !(step > 0.0) || !(to >= from) {
            return Err(Error::Argument(format!("bad scan range {from}..{to} step {step}")));
        }
        let count = ((to - from) / step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| {
                let w = from + i as f64 * step;
                Ok((w, self.point(w)?))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrincipleRow {
    pub omega: f64,
    pub relax: RelaxPair,
    /// `max_{n,j} u_j^n` (infinite after blow-up).
    pub max_u: f64,
    pub min_u: f64,
    pub violated: bool,
    pub blew_up: Option<usize>,
}

/// Space-time extrema of `u` for each setting; a row is violated when it
/// leaves `[-m - threshold, m + threshold]`.
pub fn max_principle_scan(
    spec: &SchemeSpec,
    flux: &FluxModel,
    datum: &InitialDatum,
    grid: &GridSpec,
    points: &[(f64, RelaxPair)],
    final_time: f64,
    threshold: f64,
) -> Result<Vec<MaxPrincipleRow>> {
    let m = datum.bound;
    points
        .par_iter()
        .map(|&(omega, relax)| {
            let sim = Simulation::new(spec, flux, grid, relax)?;
            let out = run_flagged(&sim, datum, &RunOptions { final_time, reference: None, cadence: 1 })?;
            let (max_u, min_u) = match out.blew_up {
                Some(_) => (f64::INFINITY, f64::NEG_INFINITY),
                None => (out.report.max_u(), out.report.min_u()),
            };
            let violated = max_u > m + threshold || min_u < -m - threshold;
            Ok(MaxPrincipleRow { omega, relax, max_u, min_u, violated, blew_up: out.blew_up })
        })
        .collect()
}

/// First scanned `ω` whose run violates the bounds.
pub fn first_violation(rows: &[MaxPrincipleRow]) -> Option<f64> {
    rows.iter().find(|r| r.violated).map(|r| r.omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqDistTrace {
    pub n: usize,
    pub datum: String,
    pub tv0: f64,
    pub eq_dist: Vec<f64>,
    pub plateau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqDistSummary {
    pub relax: RelaxPair,
    pub traces: Vec<EqDistTrace>,
    /// `plateau(2n)/plateau(n)` for every datum and consecutive resolutions.
    pub dx_ratios: Vec<f64>,
    /// `plateau(datum_k)/plateau(datum_0)` at each resolution, `k ≥ 1`.
    pub tv_ratios: Vec<f64>,
    /// Fitted `log` decay rate per step of the transient, per trace.
    pub decay_slopes: Vec<Option<f64>>,
    /// `log max(|1-ω_s|, |1-ω_a|)`.
    pub expected_slope: f64,
}

/// Relative distance to the plateau below which the transient is over.
pub const TRANSIENT_TOL: f64 = 0.02;

/// Log-linear slope of `|δ^n - plateau|` over the initial steps where it
/// exceeds `TRANSIENT_TOL · plateau`; needs at least three such steps.
pub fn decay_slope(eq_dist: &[f64], plateau: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eq_dist
        .iter()
        .enumerate()
        .map(|(n, &d)| (n as f64, (d - plateau).abs()))
        .take_while(|&(_, dev)| dev > TRANSIENT_TOL * plateau)
        .map(|(n, dev)| (n, dev.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Equilibrium-distance traces over `data × n_list`; `data[0]` is the base
/// datum for the TV ratios.
pub fn eqdist_study(
    spec: &SchemeSpec,
    flux: &FluxModel,
    data: &[InitialDatum],
    n_list: &[usize],
    relax: RelaxPair,
    final_time: f64,
) -> Result<EqDistSummary> {
    let jobs: Vec<(usize, usize)> = n_list.iter().flat_map(|&n| (0..data.len()).map(move |d| (n, d))).collect();
    let traces: Vec<EqDistTrace> = jobs
        .par_iter()
        .map(|&(n, d)| {
            let grid = GridSpec::symmetric(spec, n)?;
            let sim = Simulation::new(spec, flux, &grid, relax)?;
            let out = run_flagged(&sim, &data[d], &RunOptions { final_time, reference: None, cadence: 1 })?;
            if let Some(step) = out.blew_up {
                return Err(Error::NonFinite { step, partial: None });
            }
            let r = out.report;
            Ok(EqDistTrace { n, datum: data[d].name.clone(), tv0: r.tv_u[0], plateau: r.plateau_eq_dist(), eq_dist: r.eq_dist })
        })
        .collect::<Result<_>>()?;
    let find = |n: usize, d: &str| traces.iter().find(|t| t.n == n && t.datum == d).map(|t| t.plateau);
    let mut dx_ratios = Vec::new();
    for datum in data {
        for w in n_list.windows(2) {
            if let (Some(a), Some(b)) = (find(w[0], &datum.name), find(w[1], &datum.name)) {
                dx_ratios.push(b / a);
            }
        }
    }
    let mut tv_ratios = Vec::new();
    for &n in n_list {
        for datum in data.iter().skip(1) {
            if let (Some(base), Some(v)) = (find(n, &data[0].name), find(n, &datum.name)) {
                tv_ratios.push(v / base);
            }
        }
    }
    let decay_slopes = traces.iter().map(|t| decay_slope(&t.eq_dist, t.plateau)).collect();
    Ok(EqDistSummary { relax, traces, dx_ratios, tv_ratios, decay_slopes, expected_slope: relax.damping().ln() })
}

/// Cells with `u` outside `[-m - tol, m + tol]`.
pub fn count_violations(u: &[f64], m: f64, tol: f64) -> usize {
    u.iter().filter(|&&v| !(v.abs() <= m + tol)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_points() {
        let pts = RelaxLine::Bgk.scan(1.0, 1.05, 0.01).unwrap();
        assert_eq!(pts.len(), 6);
        assert!(pts.iter().all(|p| p.1.is_bgk()));
        assert!(RelaxLine::Magic.scan(0.5, 1.0, 0.25).unwrap().iter().all(|p| p.1.is_magic()));
        assert!(RelaxLine::parse("diag").is_err());
    }

    #[test]
    fn geometric_decay_is_recovered() {
        let r: f64 = 0.3;
        let trace: Vec<f64> = (0..40).map(|n| 1.0 - r.powi(n)).collect();
        let s = decay_slope(&trace, 1.0).unwrap();
        assert!((s - r.ln()).abs() < 1e-12);
    }

    #[test]
    fn violations() {
        assert_eq!(count_violations(&[0.0, 1.0, 1.0 + 1e-11, 1.1, -1.2, f64::NAN], 1.0, 1e-10), 3);
    }
}
