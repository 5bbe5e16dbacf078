//! Norms, total variation, equilibrium distance and error series.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::kernel::{GridSpec, LatticeState};
use crate::reference::{project, OracleSolution};
use crate::scheme::{FluxModel, SchemeSpec};

/// `Δx^d Σ |v|` over all entries (cells and components).
pub fn l1_norm(field: &[f64], grid: &GridSpec) -> f64 {
    grid.volume() * field.iter().map(|v| v.abs()).sum::<f64>()
}

/// Periodic TV of a strided field: `Δx^{d-1} Σ_j Σ_α |v_{j+e_α} - v_j|`.
fn strided_tv(values: &[f64], stride: usize, offset: usize, grid: &GridSpec) -> f64 {
    let n = grid.n();
    let d = grid.dim();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    for cell in 0..grid.cells() {
        grid.multi_index(cell, &mut idx);
        let here = values[cell * stride + offset];
        let mut axis_stride = 1;
        for a in (0..d).rev() {
            let next = if idx[a] + 1 == n { cell + axis_stride - n * axis_stride } else { cell + axis_stride };
            total += (values[next * stride + offset] - here).abs();
            axis_stride *= n;
        }
    }
    grid.dx().powi(d as i32 - 1) * total
}

pub fn total_variation(u: &[f64], grid: &GridSpec) -> f64 {
    strided_tv(u, 1, 0, grid)
}

/// Sum of the per-component total variations of `f`.
pub fn vector_total_variation(state: &LatticeState, grid: &GridSpec) -> f64 {
    let q = state.q();
    (0..q).map(|k| strided_tv(state.distributions(), q, k, grid)).sum()
}

/// `δ^eq = ‖f - f^eq(u)‖_{L¹}`.
pub fn equilibrium_distance(state: &LatticeState, spec: &SchemeSpec, flux: &FluxModel, grid: &GridSpec) -> f64 {
    let q = state.q();
    let mut eq = vec![0.0; q];
    let mut total = 0.0;
    for cell in state.distributions().chunks_exact(q) {
        let u: f64 = cell.iter().sum();
        spec.equilibrium_into(flux, u, &mut eq);
        total += cell.iter().zip(&eq).map(|(f, e)| (f - e).abs()).sum::<f64>();
    }
    grid.volume() * total
}

/// `‖u - project(oracle, t)‖_{L¹}`.
pub fn l1_error(state: &LatticeState, oracle: &OracleSolution, grid: &GridSpec, t: f64) -> Result<f64> {
    let reference = project(oracle, grid, t)?;
    let u = state.moments();
    let diff: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
    Ok(l1_norm(&diff, grid))
}

/// `log2(e_{i-1}/e_i)` for successive halvings; one entry fewer than `errors`.
pub fn convergence_order(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Everything an observer may look at after a step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub step: usize,
    pub time: f64,
    pub spec: &'a SchemeSpec,
    pub flux: &'a FluxModel,
    pub grid: &'a GridSpec,
}

/// Callback invoked after initialization and after every step.
pub trait Observer {
    fn on_step(&mut self, state: &LatticeState, ctx: &StepContext<'_>);
}

impl<F: FnMut(&LatticeState, &StepContext<'_>)> Observer for F {
    fn on_step(&mut self, state: &LatticeState, ctx: &StepContext<'_>) {
        self(state, ctx)
    }
}

/// Time series recorded by a run plus the final fields.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub sup_u: Vec<f64>,
    pub inf_u: Vec<f64>,
    pub tv_u: Vec<f64>,
    pub tv_vec: Vec<f64>,
    pub eq_dist: Vec<f64>,
    pub l1_err: Option<Vec<f64>>,
    /// Running maximum of `l1_err`.
    pub linf_l1_err: Option<Vec<f64>>,
    /// Step at which non-finite values appeared.
    pub blew_up: Option<usize>,
    pub final_state: LatticeState,
    pub final_u: Vec<f64>,
    pub grid: GridSpec,
}

impl RunReport {
    /// `max_n ‖u^n - u(t_n)‖_{L¹}` over recorded steps.
    pub fn linf_error(&self) -> Option<f64> {
        self.linf_l1_err.as_ref().and_then(|v| v.last().copied())
    }

    pub fn max_u(&self) -> f64 {
        self.sup_u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_u(&self) -> f64 {
        self.inf_u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Mean of `eq_dist` over the final quarter of the recorded steps.
    pub fn plateau_eq_dist(&self) -> f64 {
        let n = self.eq_dist.len();
        let start = n - (n / 4).max(1);
        let tail = &self.eq_dist[start..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// Writes `step,t,sup_u,inf_u,tv_u,tv_vec,eq_dist,l1_err`.
    pub fn write_series_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "t", "sup_u", "inf_u", "tv_u", "tv_vec", "eq_dist", "l1_err"])?;
        for i in 0..self.steps.len() {
            let err = self.l1_err.as_ref().map(|e| fmt_f64(e[i])).unwrap_or_default();
            w.write_record([
                self.steps[i].to_string(),
                fmt_f64(self.times[i]),
                fmt_f64(self.sup_u[i]),
                fmt_f64(self.inf_u[i]),
                fmt_f64(self.tv_u[i]),
                fmt_f64(self.tv_vec[i]),
                fmt_f64(self.eq_dist[i]),
                err,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Final snapshot in the field format.
    pub fn write_field_csv(&self, path: &Path, with_distributions: bool) -> Result<()> {
        let dist = with_distributions.then_some(&self.final_state);
        write_field_csv(path, &self.grid, &self.final_u, dist)
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Field snapshot: `x_1,...,x_d,u[,f_1..f_q]`, row-major.
pub fn write_field_csv(path: &Path, grid: &GridSpec, u: &[f64], state: Option<&LatticeState>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let d = grid.dim();
    let mut header: Vec<String> = (1..=d).map(|a| format!("x_{a}")).collect();
    header.push("u".into());
    if let Some(s) = state {
        header.extend((1..=s.q()).map(|k| format!("f_{k}")));
    }
    w.write_record(&header)?;
    let mut idx = vec![0; d];
    for (cell, &value) in u.iter().enumerate() {
        grid.multi_index(cell, &mut idx);
        let mut row: Vec<String> = grid.center(&idx).into_iter().map(fmt_f64).collect();
        row.push(fmt_f64(value));
        if let Some(s) = state {
            row.extend(s.cell(cell).iter().map(|&v| fmt_f64(v)));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error())?.flush()?;
    Ok(())
}

/// Builds a [`RunReport`] step by step.
pub(crate) struct Recorder<'a> {
    grid: &'a GridSpec,
    reference: Option<&'a OracleSolution>,
    steps: Vec<usize>,
    times: Vec<f64>,
    sup_u: Vec<f64>,
    inf_u: Vec<f64>,
    tv_u: Vec<f64>,
    tv_vec: Vec<f64>,
    eq_dist: Vec<f64>,
    l1_err: Vec<f64>,
    linf: Vec<f64>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(grid: &'a GridSpec, reference: Option<&'a OracleSolution>) -> Self {
        Self {
            grid,
            reference,
            steps: Vec::new(),
            times: Vec::new(),
            sup_u: Vec::new(),
            inf_u: Vec::new(),
            tv_u: Vec::new(),
            tv_vec: Vec::new(),
            eq_dist: Vec::new(),
            l1_err: Vec::new(),
            linf: Vec::new(),
        }
    }

    pub(crate) fn finish(self, state: LatticeState, blew_up: Option<usize>) -> RunReport {
        let has_ref = self.reference.is_some();
        RunReport {
            steps: self.steps,
            times: self.times,
            sup_u: self.sup_u,
            inf_u: self.inf_u,
            tv_u: self.tv_u,
            tv_vec: self.tv_vec,
            eq_dist: self.eq_dist,
            l1_err: has_ref.then_some(self.l1_err),
            linf_l1_err: has_ref.then_some(self.linf),
            blew_up,
            final_u: state.moments(),
            final_state: state,
            grid: self.grid.clone(),
        }
    }
}

impl Observer for Recorder<'_> {
    fn on_step(&mut self, state: &LatticeState, ctx: &StepContext<'_>) {
        let u = state.moments();
        self.steps.push(ctx.step);
        self.times.push(ctx.time);
        self.sup_u.push(u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        self.inf_u.push(u.iter().copied().fold(f64::INFINITY, f64::min));
        self.tv_u.push(total_variation(&u, self.grid));
        self.tv_vec.push(vector_total_variation(state, self.grid));
        self.eq_dist.push(equilibrium_distance(state, ctx.spec, ctx.flux, self.grid));
        if let Some(oracle) = self.reference {
            // run_from has already checked the oracle against this grid
            let reference = project(oracle, self.grid, ctx.time).expect("oracle covers the run");
            let diff: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
            let e = l1_norm(&diff, self.grid);
            let running = self.linf.last().copied().unwrap_or(0.0).max(e);
            self.l1_err.push(e);
            self.linf.push(running);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{cell_averages, init_at_equilibrium, InitialDatum};

    fn grid(n: usize) -> (SchemeSpec, GridSpec) {
        let spec = SchemeSpec::d1q3(2.0, 12.0 / 25.0);
        let g = GridSpec::symmetric(&spec, n).unwrap();
        (spec, g)
    }

    #[test]
    fn norms() {
        let (_, g) = grid(128);
        assert_eq!(l1_norm(&vec![0.0; 128], &g), 0.0);
        assert!((l1_norm(&vec![1.0; 128], &g) - 2.0).abs() < 1e-14);
        let u = cell_averages(&InitialDatum::indicator(), &g);
        assert!((l1_norm(&u, &g) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tv_of_data() {
        let (_, g) = grid(128);
        assert_eq!(total_variation(&vec![0.3; 128], &g), 0.0);
        let u = cell_averages(&InitialDatum::indicator(), &g);
        assert!((total_variation(&u, &g) - 2.0).abs() < 1e-14);
        let u = cell_averages(&InitialDatum::double_indicator(), &g);
        assert!((total_variation(&u, &g) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn tv_2d_has_dx_prefactor() {
        let spec = SchemeSpec::d2q5(2.0, 0.2, 0.2);
        let g = GridSpec::symmetric(&spec, 4).unwrap();
        // one unit cell: four unit jumps along each axis, times dx = 1/2
        let mut u = vec![0.0; 16];
        u[5] = 1.0;
        assert!((total_variation(&u, &g) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn vector_tv_and_eq_dist_at_init() {
        let (spec, g) = grid(128);
        let flux = FluxModel::burgers();
        let s = init_at_equilibrium(&spec, &flux, &InitialDatum::indicator(), &g).unwrap();
        assert!((vector_total_variation(&s, &g) - 2.0).abs() < 1e-13);
        assert_eq!(equilibrium_distance(&s, &spec, &flux, &g), 0.0);
        let c = init_at_equilibrium(&spec, &flux, &InitialDatum::constant(0.4), &g).unwrap();
        assert_eq!(vector_total_variation(&c, &g), 0.0);
    }

    #[test]
    fn orders() {
        assert_eq!(convergence_order(&[4.0, 2.0, 1.0]), vec![1.0, 1.0]);
        let o = convergence_order(&[1.49e-1, 9.26e-2]);
        assert!((o[0] - 0.69).abs() < 0.005);
    }
}
