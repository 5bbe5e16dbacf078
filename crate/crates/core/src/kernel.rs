//! Collide-and-stream on a periodic Cartesian grid.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::diagnostics::{Observer, Recorder, RunReport, StepContext};
use crate::error::{Error, Result};
use crate::reference::OracleSolution;
use crate::scheme::{FluxModel, RelaxPair, SchemeSpec};

/// Subsamples per cell and dimension for midpoint cell averaging.
pub const DEFAULT_SUBSAMPLES: usize = 64;

// Below this many cells the rayon split costs more than it saves.
const PAR_MIN_CELLS: usize = 4096;

/// Uniform periodic grid; cells are stored row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    dx: f64,
    dt: f64,
    lambda: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, domain: &[(f64, f64)], lambda: f64) -> Result<Self> {
        if dim == 0 || domain.len() != dim {
            return Err(Error::Grid(format!("need {dim} domain intervals, got {}", domain.len())));
        }
        if n < 2 {
            return Err(Error::Grid(format!("need n >= 2, got {n}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Grid(format!("lattice velocity must be positive, got {lambda}")));
        }
        let dx = (domain[0].1 - domain[0].0) / n as f64;
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Grid("empty or inverted domain".into()));
        }
        for &(a, b) in domain {
            let h = (b - a) / n as f64;
            if (h - dx).abs() > 1e-14 * dx {
                return Err(Error::Grid(format!("unequal spacing across dimensions ({h} vs {dx})")));
            }
        }
        Ok(Self {
            dim,
            n,
            lower: domain.iter().map(|d| d.0).collect(),
            upper: domain.iter().map(|d| d.1).collect(),
            dx,
            dt: dx / lambda,
            lambda,
        })
    }

    /// `n^d` cells on `[-1, 1]^d`, the setting of all experiments here.
    pub fn symmetric(spec: &SchemeSpec, n: usize) -> Result<Self> {
        Self::new(spec.dim, n, &vec![(-1.0, 1.0); spec.dim], spec.lambda)
    }

    /// Same domain with `r` times as many cells per dimension.
    pub fn refine(&self, r: usize) -> Result<Self> {
        let domain: Vec<_> = self.lower.iter().copied().zip(self.upper.iter().copied()).collect();
        Self::new(self.dim, self.n * r, &domain, self.lambda)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Cell volume `Δx^d`.
    pub fn volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn multi_index(&self, mut cell: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = cell % self.n;
            cell /= self.n;
        }
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + (i as f64 + 0.5) * self.dx)
            .collect()
    }

    /// Checks that `lambda` matches and every shift fits the grid.
    pub fn check_scheme(&self, spec: &SchemeSpec) -> Result<()> {
        if spec.dim != self.dim {
            return Err(Error::Grid(format!("scheme is {}-D, grid is {}-D", spec.dim, self.dim)));
        }
        if (spec.lambda - self.lambda).abs() > 1e-14 * spec.lambda {
            return Err(Error::Grid(format!("grid lambda {} differs from scheme lambda {}", self.lambda, spec.lambda)));
        }
        Ok(())
    }
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type CellAverageFn = Arc<dyn Fn(&GridSpec, &[usize]) -> f64 + Send + Sync>;

/// Initial datum `u⁰` with its bound `m = ‖u⁰‖_∞`.
#[derive(Clone)]
pub struct InitialDatum {
    pub name: String,
    pub pointwise: PointFn,
    pub cell_average: Option<CellAverageFn>,
    pub bound: f64,
    pub tv_hint: Option<f64>,
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDatum")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("tv_hint", &self.tv_hint)
            .field("exact_average", &self.cell_average.is_some())
            .finish()
    }
}

/// Length of `[a, b] ∩ [c, d]`.
fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Exact 1D cell average from a primitive `F` (`F' = u⁰`).
fn average_from_primitive(prim: impl Fn(f64) -> f64 + Send + Sync + 'static) -> CellAverageFn {
    Arc::new(move |g: &GridSpec, idx: &[usize]| {
        let a = g.lower()[0] + idx[0] as f64 * g.dx();
        (prim(a + g.dx()) - prim(a)) / g.dx()
    })
}

impl InitialDatum {
    pub fn new(name: impl Into<String>, pointwise: PointFn, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(Error::NegativeBound(bound));
        }
        Ok(Self { name: name.into(), pointwise, cell_average: None, bound, tv_hint: None })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: "constant".into(),
            pointwise: Arc::new(move |_| c),
            cell_average: Some(Arc::new(move |_, _| c)),
            bound: c.abs(),
            tv_hint: Some(0.0),
        }
    }

    /// `1` on `|x| ≤ 1/2`.
    pub fn indicator() -> Self {
        Self {
            name: "indicator".into(),
            pointwise: Arc::new(|x| if x[0].abs() <= 0.5 { 1.0 } else { 0.0 }),
            cell_average: Some(Arc::new(|g, idx| {
                let a = g.lower()[0] + idx[0] as f64 * g.dx();
                overlap(a, a + g.dx(), -0.5, 0.5) / g.dx()
            })),
            bound: 1.0,
            tv_hint: Some(2.0),
        }
    }

    /// Two unit bumps on `|x ± 1/2| ≤ 1/4`; twice the variation of [`Self::indicator`].
    pub fn double_indicator() -> Self {
        Self {
            name: "double-indicator".into(),
            pointwise: Arc::new(|x| if (x[0] - 0.5).abs() <= 0.25 || (x[0] + 0.5).abs() <= 0.25 { 1.0 } else { 0.0 }),
            cell_average: Some(Arc::new(|g, idx| {
                let a = g.lower()[0] + idx[0] as f64 * g.dx();
                let b = a + g.dx();
                (overlap(a, b, -0.75, -0.25) + overlap(a, b, 0.25, 0.75)) / g.dx()
            })),
            bound: 1.0,
            tv_hint: Some(4.0),
        }
    }

    /// `(1 - 2|x|)` on `|x| ≤ 1/2`.
    pub fn hat() -> Self {
        let prim = |x: f64| {
            let y = x.clamp(-0.5, 0.5);
            // antiderivative of (1-2|y|), odd in y
            y - y * y.abs()
        };
        Self {
            name: "hat".into(),
            pointwise: Arc::new(|x| (1.0 - 2.0 * x[0].abs()).max(0.0)),
            cell_average: Some(average_from_primitive(prim)),
            bound: 1.0,
            tv_hint: Some(2.0),
        }
    }

    /// `1` on the disc `|x| ≤ 1` (2D).
    pub fn indicator_radial() -> Self {
        Self {
            name: "indicator-radial".into(),
            pointwise: Arc::new(|x| if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 { 1.0 } else { 0.0 }),
            cell_average: None,
            bound: 1.0,
            tv_hint: None,
        }
    }
}

/// Cell averages of the datum, clamped to `[-m, m]`.
pub fn cell_averages(datum: &InitialDatum, grid: &GridSpec) -> Vec<f64> {
    cell_averages_with(datum, grid, DEFAULT_SUBSAMPLES)
}

/// As [`cell_averages`] with a custom midpoint subsample count.
pub fn cell_averages_with(datum: &InitialDatum, grid: &GridSpec, subsamples: usize) -> Vec<f64> {
    let m = datum.bound;
    let s = subsamples.max(1);
    let d = grid.dim();
    let inner = s.pow(d as u32);
    (0..grid.cells())
        .into_par_iter()
        .with_min_len(64)
        .map(|cell| {
            let mut idx = vec![0; d];
            grid.multi_index(cell, &mut idx);
            let v = match &datum.cell_average {
                Some(avg) => avg(grid, &idx),
                None => {
                    let mut sub = vec![0; d];
                    let mut x = vec![0.0; d];
                    let mut acc = 0.0;
                    for t in 0..inner {
                        let mut r = t;
                        for a in (0..d).rev() {
                            sub[a] = r % s;
                            r /= s;
                        }
                        for a in 0..d {
                            x[a] = grid.lower()[a] + (idx[a] as f64 + (sub[a] as f64 + 0.5) / s as f64) * grid.dx();
                        }
                        acc += (datum.pointwise)(&x);
                    }
                    acc / inner as f64
                }
            };
            v.clamp(-m, m)
        })
        .collect()
}

/// Distribution functions, stored cell-major (`f[cell * q + k]`), plus a scratch plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    q: usize,
    cells: usize,
    f: Vec<f64>,
    scratch: Vec<f64>,
    step: usize,
}

impl LatticeState {
    pub fn zeros(q: usize, cells: usize) -> Self {
        Self { q, cells, f: vec![0.0; q * cells], scratch: vec![0.0; q * cells], step: 0 }
    }

    /// Wraps cell-major distributions; `f.len()` must be a multiple of `q`.
    pub fn from_distributions(q: usize, f: Vec<f64>) -> Result<Self> {
        if q == 0 || f.len() % q != 0 {
            return Err(Error::Argument(format!("length {} is not a multiple of q = {q}", f.len())));
        }
        let cells = f.len() / q;
        Ok(Self { q, cells, scratch: vec![0.0; f.len()], f, step: 0 })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn distributions(&self) -> &[f64] {
        &self.f
    }

    pub fn distributions_mut(&mut self) -> &mut [f64] {
        &mut self.f
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.f[cell * self.q..(cell + 1) * self.q]
    }

    /// Conserved moment `u_j = Σ_k f_{k,j}`.
    pub fn moments(&self) -> Vec<f64> {
        self.f.chunks_exact(self.q).map(|c| c.iter().sum()).collect()
    }

    /// Largest magnitude; NaN propagates.
    pub fn max_abs(&self) -> f64 {
        self.f.iter().fold(0.0f64, |acc, &v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v.abs()) })
    }

    pub fn is_finite(&self) -> bool {
        self.max_abs().is_finite()
    }
}

/// Equilibrium state at the cell averages of `datum`.
pub fn init_at_equilibrium(spec: &SchemeSpec, flux: &FluxModel, datum: &InitialDatum, grid: &GridSpec) -> Result<LatticeState> {
    let u0 = cell_averages(datum, grid);
    init_from_moments(spec, flux, &u0)
}

/// Equilibrium state for a given moment field.
pub fn init_from_moments(spec: &SchemeSpec, flux: &FluxModel, u: &[f64]) -> Result<LatticeState> {
    let q = spec.q();
    let mut state = LatticeState::zeros(q, u.len());
    state
        .f
        .par_chunks_mut(q)
        .with_min_len(PAR_MIN_CELLS)
        .zip(u.par_iter())
        .for_each(|(cell, &u)| spec.equilibrium_into(flux, u, cell));
    if !state.is_finite() {
        return Err(Error::NonFinite { step: 0, partial: None });
    }
    Ok(state)
}

/// TRT relaxation of one cell, in place.
#[inline]
pub fn collide_cell(spec: &SchemeSpec, flux: &FluxModel, relax: RelaxPair, f: &mut [f64]) {
    let ws = relax.omega_s();
    let wa = relax.omega_a();
    let a = 0.5 * (ws + wa);
    let b = 0.5 * (ws - wa);
    let u: f64 = f.iter().sum();
    let mut phi = [0.0f64; 8];
    for (alpha, p) in phi.iter_mut().enumerate().take(spec.dim) {
        *p = flux.value(alpha, u);
    }
    f[0] = (1.0 - ws) * f[0] + ws * spec.eps_rest * u;
    for (j, link) in spec.links.iter().enumerate() {
        let asym: f64 = link.sigma.iter().zip(&phi[..spec.dim]).map(|(s, p)| s * p).sum();
        let sym = link.eps * u;
        let (ep, em) = (sym + asym, sym - asym);
        let (fp, fm) = (f[2 * j + 1], f[2 * j + 2]);
        f[2 * j + 1] = (1.0 - a) * fp + a * ep - b * (fm - em);
        f[2 * j + 2] = (1.0 - a) * fm + a * em - b * (fp - ep);
    }
}

/// Relaxation at every cell; errors if any output is non-finite.
pub fn collide(state: &mut LatticeState, spec: &SchemeSpec, flux: &FluxModel, relax: RelaxPair) -> Result<()> {
    let q = state.q;
    let finite = state
        .f
        .par_chunks_mut(q)
        .with_min_len(PAR_MIN_CELLS)
        .map(|cell| {
            collide_cell(spec, flux, relax, cell);
            cell.iter().all(|v| v.is_finite())
        })
        .reduce(|| true, |a, b| a && b);
    if finite {
        Ok(())
    } else {
        Err(Error::NonFinite { step: state.step, partial: None })
    }
}

/// Periodic transport `f_k(j) ← f_k(j - c_k/λ)`; swaps buffers and advances the step.
pub fn stream(state: &mut LatticeState, spec: &SchemeSpec, grid: &GridSpec) {
    let q = state.q;
    let n = grid.n();
    let d = grid.dim();
    let shifts: Vec<Vec<i64>> = (0..q).map(|k| spec.shift(k)).collect();
    let wrap = |i: usize, s: i64| -> usize { (i as i64 - s).rem_euclid(n as i64) as usize };
    let src = &state.f;
    // one "row" = a line of n cells along the fastest axis
    state
        .scratch
        .par_chunks_mut(n * q)
        .with_min_len((PAR_MIN_CELLS / n).max(1))
        .enumerate()
        .for_each(|(row, dst)| {
            let mut ridx = vec![0usize; d.saturating_sub(1)];
            let mut r = row;
            for a in (0..d - 1).rev() {
                ridx[a] = r % n;
                r /= n;
            }
            for (k, shift) in shifts.iter().enumerate() {
                let src_row = (0..d - 1).fold(0, |acc, a| acc * n + wrap(ridx[a], shift[a]));
                let base = src_row * n;
                let s_last = shift[d - 1];
                for i in 0..n {
                    dst[i * q + k] = src[(base + wrap(i, s_last)) * q + k];
                }
            }
        });
    std::mem::swap(&mut state.f, &mut state.scratch);
    state.step += 1;
}

/// One collide-and-stream update.
pub fn step(state: &mut LatticeState, spec: &SchemeSpec, flux: &FluxModel, relax: RelaxPair, grid: &GridSpec) -> Result<()> {
    collide(state, spec, flux, relax)?;
    stream(state, spec, grid);
    Ok(())
}

/// Options for [`Simulation::run`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub final_time: f64,
    /// Optional oracle for the error series.
    pub reference: Option<&'a OracleSolution>,
    /// Record diagnostics every `cadence` steps (0 or 1: every step). The
    /// initial and final states are always recorded.
    pub cadence: usize,
}

/// A scheme bound to a flux, grid and relaxation pair.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub spec: &'a SchemeSpec,
    pub flux: &'a FluxModel,
    pub grid: &'a GridSpec,
    pub relax: RelaxPair,
}

impl<'a> Simulation<'a> {
    pub fn new(spec: &'a SchemeSpec, flux: &'a FluxModel, grid: &'a GridSpec, relax: RelaxPair) -> Result<Self> {
        spec.ensure_valid()?;
        grid.check_scheme(spec)?;
        if flux.dim() != spec.dim {
            return Err(Error::Flux(format!("flux has {} components, scheme is {}-D", flux.dim(), spec.dim)));
        }
        Ok(Self { spec, flux, grid, relax })
    }

    pub fn init(&self, datum: &InitialDatum) -> Result<LatticeState> {
        init_at_equilibrium(self.spec, self.flux, datum, self.grid)
    }

    pub fn step(&self, state: &mut LatticeState) -> Result<()> {
        step(state, self.spec, self.flux, self.relax, self.grid)
    }

    /// Number of steps taken to reach `t`: `⌈t/Δt⌉`, ignoring round-off just above an integer.
    pub fn steps_for(&self, t: f64) -> usize {
        steps_for(t, self.grid.dt())
    }

    /// Runs from equilibrium initialization to `⌈T/Δt⌉ Δt`.
    pub fn run(&self, datum: &InitialDatum, opts: &RunOptions<'_>, observers: &mut [&mut dyn Observer]) -> Result<RunReport> {
        let state = self.init(datum)?;
        self.run_from(state, opts, observers)
    }

    /// Runs from a given state; on blow-up the error carries the partial report.
    pub fn run_from(&self, mut state: LatticeState, opts: &RunOptions<'_>, observers: &mut [&mut dyn Observer]) -> Result<RunReport> {
        if !(opts.final_time >= 0.0) {
            return Err(Error::Argument(format!("final time must be non-negative, got {}", opts.final_time)));
        }
        if let Some(oracle) = opts.reference {
            oracle.check_target(self.grid)?;
        }
        let total = self.steps_for(opts.final_time);
        let cadence = opts.cadence.max(1);
        let mut recorder = Recorder::new(self.grid, opts.reference);
        let ctx = |state: &LatticeState| StepContext {
            step: state.step(),
            time: state.step() as f64 * self.grid.dt(),
            spec: self.spec,
            flux: self.flux,
            grid: self.grid,
        };
        recorder.on_step(&state, &ctx(&state));
        for obs in observers.iter_mut() {
            obs.on_step(&state, &ctx(&state));
        }
        for n in 1..=total {
            let ok = self.step(&mut state).is_ok() && state.is_finite();
            if !ok {
                let report = recorder.finish(state, Some(n));
                return Err(Error::NonFinite { step: n, partial: Some(Box::new(report)) });
            }
            let c = ctx(&state);
            if n % cadence == 0 || n == total {
                recorder.on_step(&state, &c);
            }
            for obs in observers.iter_mut() {
                obs.on_step(&state, &c);
            }
        }
        Ok(recorder.finish(state, None))
    }
}

/// `⌈t/dt⌉` with a relative guard against round-off just above an integer.
pub fn steps_for(t: f64, dt: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    let r = t / dt;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}
