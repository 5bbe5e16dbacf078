//! Ground-truth oracles: refined Godunov finite volumes and the two-step
//! finite-difference form of the magic TRT scheme.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{cell_averages_with, steps_for, GridSpec, InitialDatum, DEFAULT_SUBSAMPLES};
use crate::scheme::{FluxModel, FluxShape, RelaxPair, SchemeSpec};

/// Largest admissible oracle CFL number.
pub const MAX_ORACLE_CFL: f64 = 0.45;

/// Default refinement of the oracle over the target grid.
pub const DEFAULT_REFINEMENT: usize = 32;

// Sample count for Riemann fluxes without a shape hint.
const GENERAL_FLUX_SAMPLES: usize = 64;

/// Exact Godunov flux `min_{[a,b]} φ` if `a ≤ b`, else `max_{[b,a]} φ`.
pub fn godunov_flux(flux: &FluxModel, alpha: usize, a: f64, b: f64) -> f64 {
    let phi = |u: f64| flux.value(alpha, u);
    match flux.shape(alpha) {
        FluxShape::Convex { argmin } => {
            if a <= b {
                phi(argmin.clamp(a, b))
            } else {
                phi(a).max(phi(b))
            }
        }
        FluxShape::Concave { argmax } => {
            if a <= b {
                phi(a).min(phi(b))
            } else {
                phi(argmax.clamp(b, a))
            }
        }
        FluxShape::General => {
            // minimize sign * φ: dense samples, then a ternary search around the best one
            let sign = if a <= b { 1.0 } else { -1.0 };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let h = (hi - lo) / GENERAL_FLUX_SAMPLES as f64;
            let at = |i: usize| lo + h * i as f64;
            let best = (0..=GENERAL_FLUX_SAMPLES)
                .min_by(|&i, &j| (sign * phi(at(i))).total_cmp(&(sign * phi(at(j)))))
                .unwrap_or(0);
            let (mut l, mut r) = (at(best.saturating_sub(1)), at((best + 1).min(GENERAL_FLUX_SAMPLES)));
            for _ in 0..60 {
                let m1 = l + (r - l) / 3.0;
                let m2 = r - (r - l) / 3.0;
                if sign * phi(m1) <= sign * phi(m2) {
                    r = m2;
                } else {
                    l = m1;
                }
            }
            let refined = sign * phi(0.5 * (l + r));
            sign * refined.min(sign * phi(at(best)))
        }
    }
}

/// Knobs for [`godunov_solve`].
#[derive(Debug, Clone)]
pub struct GodunovOptions {
    pub cfl: f64,
    /// Target time step: the oracle step divides it exactly, and snapshots
    /// are kept at its multiples.
    pub sync_dt: Option<f64>,
    /// Resolution of stored snapshots (must divide the fine `n`); defaults to the fine grid.
    pub store_n: Option<usize>,
    /// Midpoint subsamples for data without exact cell averages.
    pub subsamples: usize,
}

impl Default for GodunovOptions {
    fn default() -> Self {
        Self { cfl: MAX_ORACLE_CFL, sync_dt: None, store_n: None, subsamples: DEFAULT_SUBSAMPLES }
    }
}

impl GodunovOptions {
    /// Options for measuring errors of a run on `target`: synchronized to its
    /// time step and stored at its resolution.
    pub fn for_target(target: &GridSpec) -> Self {
        Self { sync_dt: Some(target.dt()), store_n: Some(target.n()), ..Self::default() }
    }
}

/// Oracle trajectory on block-averaged snapshots.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    fine: GridSpec,
    store: GridSpec,
    times: Vec<f64>,
    trajectory: Vec<Vec<f64>>,
    dt: f64,
    cfl: f64,
}

impl OracleSolution {
    /// Wraps precomputed snapshots (stored and fine grid coincide).
    pub fn from_snapshots(grid: GridSpec, times: Vec<f64>, trajectory: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != trajectory.len() || trajectory.iter().any(|u| u.len() != grid.cells()) {
            return Err(Error::Argument("snapshot times and fields must match the grid".into()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Self { fine: grid.clone(), store: grid, times, trajectory, dt, cfl: 0.0 })
    }

    pub fn fine_grid(&self) -> &GridSpec {
        &self.fine
    }

    pub fn store_grid(&self) -> &GridSpec {
        &self.store
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn trajectory(&self) -> &[Vec<f64>] {
        &self.trajectory
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    /// Stored snapshot whose stamp is nearest to `t`.
    pub fn nearest(&self, t: f64) -> &[f64] {
        let i = self.times.partition_point(|&s| s < t);
        let best = if i == 0 {
            0
        } else if i == self.times.len() || (t - self.times[i - 1]) <= (self.times[i] - t) {
            i - 1
        } else {
            i
        };
        &self.trajectory[best]
    }

    /// Block factor from the stored resolution down to `target`.
    pub fn check_target(&self, target: &GridSpec) -> Result<usize> {
        let s = &self.store;
        if s.dim() != target.dim() {
            return Err(Error::Refinement(format!("oracle is {}-D, target {}-D", s.dim(), target.dim())));
        }
        if s.n() % target.n() != 0 {
            return Err(Error::Refinement(format!("oracle n = {} is not a multiple of target n = {}", s.n(), target.n())));
        }
        let same_domain = s.lower().iter().zip(target.lower()).all(|(a, b)| (a - b).abs() < 1e-12)
            && s.upper().iter().zip(target.upper()).all(|(a, b)| (a - b).abs() < 1e-12);
        if !same_domain {
            return Err(Error::Refinement("oracle and target domains differ".into()));
        }
        Ok(s.n() / target.n())
    }
}

/// Averages blocks of `r^d` cells of `fine` onto a grid with `n/r` cells per dimension.
pub fn block_average(u: &[f64], dim: usize, n_fine: usize, r: usize) -> Vec<f64> {
    if r == 1 {
        return u.to_vec();
    }
    let n = n_fine / r;
    let cells = n.pow(dim as u32);
    let mut out = vec![0.0; cells];
    let mut idx = vec![0usize; dim];
    for (cell, &v) in u.iter().enumerate() {
        let mut c = cell;
        for a in (0..dim).rev() {
            idx[a] = (c % n_fine) / r;
            c /= n_fine;
        }
        let coarse = idx.iter().fold(0, |acc, &i| acc * n + i);
        out[coarse] += v;
    }
    let w = (r.pow(dim as u32)) as f64;
    out.iter_mut().for_each(|v| *v /= w);
    out
}

/// Block average of the oracle at the stamp nearest to `t`.
pub fn project(oracle: &OracleSolution, target: &GridSpec, t: f64) -> Result<Vec<f64>> {
    let r = oracle.check_target(target)?;
    if t > oracle.final_time() + 1e-12 * oracle.final_time().max(1.0) {
        return Err(Error::Argument(format!("t = {t} is past the oracle horizon {}", oracle.final_time())));
    }
    Ok(block_average(oracle.nearest(t), target.dim(), oracle.store.n(), r))
}

/// `max |φ'_α|` over `[-m, m]` and all components.
fn max_speed(flux: &FluxModel, m: f64) -> f64 {
    let samples = 1001;
    (0..flux.dim())
        .map(|alpha| {
            (0..samples)
                .map(|i| flux.derivative(alpha, -m + 2.0 * m * i as f64 / (samples - 1) as f64).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// One periodic Godunov update of a line, in place; `faces` is scratch of the same length.
fn godunov_line(flux: &FluxModel, alpha: usize, ratio: f64, line: &mut [f64], faces: &mut [f64]) {
    let n = line.len();
    for i in 0..n {
        let right = if i + 1 == n { line[0] } else { line[i + 1] };
        faces[i] = godunov_flux(flux, alpha, line[i], right);
    }
    let last = faces[n - 1];
    let mut left = last;
    for i in 0..n {
        let f = faces[i];
        line[i] -= ratio * (f - left);
        left = f;
    }
}

/// Sweep along axis `alpha` of a row-major periodic field.
fn godunov_sweep(flux: &FluxModel, alpha: usize, ratio: f64, u: &mut [f64], dim: usize, n: usize) {
    let stride = n.pow((dim - 1 - alpha) as u32);
    if stride == 1 {
        u.par_chunks_mut(n).with_min_len(64).for_each(|line| {
            let mut faces = vec![0.0; n];
            godunov_line(flux, alpha, ratio, line, &mut faces);
        });
        return;
    }
    // lines are strided: gather, update, scatter
    let block = stride * n;
    u.par_chunks_mut(block).for_each(|chunk| {
        let mut line = vec![0.0; n];
        let mut faces = vec![0.0; n];
        for off in 0..stride {
            for i in 0..n {
                line[i] = chunk[off + i * stride];
            }
            godunov_line(flux, alpha, ratio, &mut line, &mut faces);
            for i in 0..n {
                chunk[off + i * stride] = line[i];
            }
        }
    });
}

/// First-order Godunov solution on `fine`, dimensionally split in 2D and up.
pub fn godunov_solve(flux: &FluxModel, datum: &InitialDatum, fine: &GridSpec, final_time: f64, opts: &GodunovOptions) -> Result<OracleSolution> {
    if flux.dim() != fine.dim() {
        return Err(Error::Flux(format!("flux has {} components, grid is {}-D", flux.dim(), fine.dim())));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= MAX_ORACLE_CFL) {
        return Err(Error::Cfl { cfl: opts.cfl, limit: MAX_ORACLE_CFL });
    }
    if !(final_time >= 0.0) {
        return Err(Error::Argument(format!("final time must be non-negative, got {final_time}")));
    }
    let store_n = opts.store_n.unwrap_or(fine.n());
    if store_n == 0 || fine.n() % store_n != 0 {
        return Err(Error::Refinement(format!("store resolution {store_n} does not divide {}", fine.n())));
    }
    let coarsen = fine.n() / store_n;
    let domain: Vec<_> = fine.lower().iter().copied().zip(fine.upper().iter().copied()).collect();
    let store = GridSpec::new(fine.dim(), store_n, &domain, fine.lambda())?;

    let speed = max_speed(flux, datum.bound);
    let dx = fine.dx();
    let (dt, total, every) = match opts.sync_dt {
        Some(sync) => {
            let n_sync = steps_for(final_time, sync);
            let k = ((sync * speed / (opts.cfl * dx)).ceil() as usize).max(1);
            (sync / k as f64, n_sync * k, k)
        }
        None => {
            let total = if final_time > 0.0 { ((final_time * speed / (opts.cfl * dx)).ceil() as usize).max(1) } else { 0 };
            let dt = if total > 0 { final_time / total as f64 } else { 0.0 };
            (dt, total, 1)
        }
    };
    let cfl = speed * dt / dx;
    if cfl > MAX_ORACLE_CFL * (1.0 + 1e-12) {
        return Err(Error::Cfl { cfl, limit: MAX_ORACLE_CFL });
    }

    let mut u = cell_averages_with(datum, fine, opts.subsamples);
    let keep = |u: &[f64]| block_average(u, fine.dim(), fine.n(), coarsen);
    let mut times = vec![0.0];
    let mut trajectory = vec![keep(&u)];
    let ratio = dt / dx;
    for s in 1..=total {
        for alpha in 0..fine.dim() {
            godunov_sweep(flux, alpha, ratio, &mut u, fine.dim(), fine.n());
        }
        if s % every == 0 || s == total {
            times.push(s as f64 * dt);
            trajectory.push(keep(&u));
        }
    }
    Ok(OracleSolution { fine: fine.clone(), store, times, trajectory, dt, cfl })
}

/// The two time levels of the magic two-step recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct MagicFdState {
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
    pub step: usize,
}

/// `out_j = v_{j - shift}` on a periodic grid.
fn shifted(v: &[f64], grid: &GridSpec, shift: &[i64], out: &mut [f64]) {
    let n = grid.n() as i64;
    let d = grid.dim();
    let mut idx = vec![0usize; d];
    for (cell, o) in out.iter_mut().enumerate() {
        grid.multi_index(cell, &mut idx);
        let src = (0..d).fold(0usize, |acc, a| acc * grid.n() + (idx[a] as i64 - shift[a]).rem_euclid(n) as usize);
        *o = v[src];
    }
}

impl MagicFdState {
    pub fn new(u_prev: Vec<f64>, u_curr: Vec<f64>, step: usize) -> Self {
        Self { u_prev, u_curr, step }
    }

    /// Levels 0 and 1 from `u⁰`: the first step out of equilibrium is pure
    /// transport, `u¹_j = Σ_k f_k^eq(u⁰_{j - c_k/λ})`, whatever the relaxation.
    pub fn from_equilibrium_start(spec: &SchemeSpec, flux: &FluxModel, grid: &GridSpec, u0: &[f64]) -> Self {
        let q = spec.q();
        let eq: Vec<Vec<f64>> = u0.iter().map(|&u| spec.equilibrium(flux, u)).collect();
        let mut u1 = vec![0.0; u0.len()];
        let mut component = vec![0.0; u0.len()];
        let mut moved = vec![0.0; u0.len()];
        for k in 0..q {
            for (c, e) in component.iter_mut().zip(&eq) {
                *c = e[k];
            }
            shifted(&component, grid, &spec.shift(k), &mut moved);
            u1.iter_mut().zip(&moved).for_each(|(a, b)| *a += b);
        }
        Self { u_prev: u0.to_vec(), u_curr: u1, step: 1 }
    }
}

/// Advances the recursion
/// `(u^{n+1} + (ω_a-2)u^n + (1-ω_a)u^{n-1}) / (ω_a Δt)
///   = λ/Δx Σ_j (a_j(u_{x-c_j}) - a_j(u_{x+c_j}))
///   + 2(1/ω_a - 1/2) λ/Δx Σ_j (s_j(u_{x-c_j}) - 2 s_j(u_x) + s_j(u_{x+c_j}))`
/// and returns `u^{n+1}`.
pub fn magic_fd_step(state: &mut MagicFdState, spec: &SchemeSpec, flux: &FluxModel, relax: RelaxPair, grid: &GridSpec) -> Result<Vec<f64>> {
    if !relax.is_magic() {
        return Err(Error::NotMagic { omega_s: relax.omega_s(), omega_a: relax.omega_a() });
    }
    let wa = relax.omega_a();
    let (dt, dx, lambda) = (grid.dt(), grid.dx(), grid.lambda());
    let cells = state.u_curr.len();
    let u = &state.u_curr;
    let mut rhs = vec![0.0; cells];
    let mut minus = vec![0.0; cells];
    let mut plus = vec![0.0; cells];
    for link in &spec.links {
        let a_eq = |v: f64| link.sigma.iter().enumerate().map(|(alpha, s)| s * flux.value(alpha, v)).sum::<f64>();
        let s_eq = |v: f64| link.eps * v;
        let neg: Vec<i64> = link.shift.iter().map(|c| -c).collect();
        shifted(u, grid, &link.shift, &mut minus); // u_{x - c}
        shifted(u, grid, &neg, &mut plus); // u_{x + c}
        for j in 0..cells {
            let adv = a_eq(minus[j]) - a_eq(plus[j]);
            let diff = s_eq(minus[j]) - 2.0 * s_eq(u[j]) + s_eq(plus[j]);
            rhs[j] += lambda / dx * adv + 2.0 * (1.0 / wa - 0.5) * lambda / dx * diff;
        }
    }
    let next: Vec<f64> = (0..cells)
        .map(|j| wa * dt * rhs[j] - (wa - 2.0) * state.u_curr[j] - (1.0 - wa) * state.u_prev[j])
        .collect();
    state.u_prev = std::mem::replace(&mut state.u_curr, next.clone());
    state.step += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(1, n, &[(-1.0, 1.0)], 2.0).unwrap()
    }

    #[test]
    fn riemann_fluxes() {
        let b = FluxModel::burgers();
        assert_eq!(godunov_flux(&b, 0, 0.0, 1.0), 0.0);
        assert_eq!(godunov_flux(&b, 0, 1.0, 0.0), 0.5);
        assert_eq!(godunov_flux(&b, 0, -1.0, 1.0), 0.0);
        assert!((godunov_flux(&b, 0, 0.2, 0.6) - 0.02).abs() < 1e-16);
        // the sampled path agrees on Burgers
        let generic = FluxModel::burgers().with_shapes(vec![FluxShape::General]).unwrap();
        for &(a, c) in &[(0.0, 1.0), (1.0, 0.0), (-1.0, 0.5), (0.3, -0.7)] {
            assert!((godunov_flux(&generic, 0, a, c) - godunov_flux(&b, 0, a, c)).abs() < 1e-12);
        }
        let concave = FluxModel::polynomial(vec![vec![0.0, -0.5]]).unwrap();
        assert_eq!(godunov_flux(&concave, 0, 1.0, 0.0), 0.0);
        assert_eq!(godunov_flux(&concave, 0, 0.0, 1.0), -0.5);
        let linear = FluxModel::polynomial(vec![vec![-1.0]]).unwrap();
        assert_eq!(godunov_flux(&linear, 0, 0.25, 0.75), -0.75);
    }

    #[test]
    fn project_identity_and_blocks() {
        let g = grid(8);
        let u: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let o = OracleSolution::from_snapshots(g.clone(), vec![0.0], vec![u.clone()]).unwrap();
        assert_eq!(project(&o, &g, 0.0).unwrap(), u);
        let coarse = grid(4);
        assert_eq!(project(&o, &coarse, 0.0).unwrap(), vec![0.5, 2.5, 4.5, 6.5]);
        assert!(project(&o, &grid(3), 0.0).is_err());
    }

    #[test]
    fn nearest_stamp() {
        let g = grid(2);
        let o = OracleSolution::from_snapshots(g, vec![0.0, 1.0, 2.0], vec![vec![0.0; 2], vec![1.0; 2], vec![2.0; 2]]).unwrap();
        assert_eq!(o.nearest(0.4)[0], 0.0);
        assert_eq!(o.nearest(0.6)[0], 1.0);
        assert_eq!(o.nearest(2.0)[0], 2.0);
    }

    #[test]
    fn constant_field_is_preserved() {
        let fine = grid(64);
        let o = godunov_solve(&FluxModel::burgers(), &InitialDatum::constant(0.7), &fine, 0.25, &GodunovOptions::default()).unwrap();
        assert!(o.trajectory().last().unwrap().iter().all(|&v| (v - 0.7).abs() < 1e-14));
        assert!(o.cfl() <= MAX_ORACLE_CFL + 1e-15);
    }

    #[test]
    fn cfl_guard() {
        let fine = grid(16);
        let opts = GodunovOptions { cfl: 0.9, ..GodunovOptions::default() };
        assert!(matches!(
            godunov_solve(&FluxModel::burgers(), &InitialDatum::indicator(), &fine, 0.1, &opts),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn synchronized_stamps_hit_target_times() {
        let target = grid(64);
        let fine = target.refine(8).unwrap();
        let o = godunov_solve(&FluxModel::burgers(), &InitialDatum::indicator(), &fine, 0.25, &GodunovOptions::for_target(&target)).unwrap();
        assert_eq!(o.times().len(), 17);
        for (i, &t) in o.times().iter().enumerate() {
            assert!((t - i as f64 * target.dt()).abs() < 1e-14);
        }
        assert_eq!(o.trajectory()[0].len(), 64);
    }

    #[test]
    fn magic_fd_rejects_non_magic() {
        let spec = SchemeSpec::d1q3(2.0, 0.4);
        let g = grid(8);
        let mut s = MagicFdState::new(vec![0.0; 8], vec![0.0; 8], 1);
        assert!(magic_fd_step(&mut s, &spec, &FluxModel::burgers(), RelaxPair::new(1.0, 1.5).unwrap(), &g).is_err());
    }

    #[test]
    fn magic_fd_constant() {
        let spec = SchemeSpec::d1q3(2.0, 0.4);
        let g = grid(8);
        let mut s = MagicFdState::new(vec![0.3; 8], vec![0.3; 8], 1);
        let next = magic_fd_step(&mut s, &spec, &FluxModel::burgers(), RelaxPair::magic(1.3).unwrap(), &g).unwrap();
        assert!(next.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }
}
