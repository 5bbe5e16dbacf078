//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_4;

use trtlbm::diagnostics::{l1_norm, total_variation, vector_total_variation};
use trtlbm::kernel::{collide_cell, init_from_moments, step};
use trtlbm::monotonicity::is_monotone;
use trtlbm::{FluxModel, GridSpec, LatticeState, MonotonicityProblem, RelaxPair, SchemeSpec};

/// A scheme/flux pair with its monotonicity problem at `m = 1`.
pub struct Case {
    pub name: &'static str,
    pub spec: SchemeSpec,
    pub flux: FluxModel,
    pub problem: MonotonicityProblem,
}

impl Case {
    pub fn all() -> Vec<Case> {
        let mk = |name, spec: SchemeSpec, flux: FluxModel| {
            let problem = MonotonicityProblem::new(&spec, &flux, 1.0).unwrap();
            Case { name, spec, flux, problem }
        };
        vec![
            mk("d1q3-12/25", SchemeSpec::d1q3(2.0, 12.0 / 25.0), FluxModel::burgers()),
            mk("d1q3-1/3", SchemeSpec::d1q3(2.0, 1.0 / 3.0), FluxModel::burgers()),
            mk("d2q5-6/25", SchemeSpec::d2q5(2.0, 6.0 / 25.0, 6.0 / 25.0), FluxModel::rotated_burgers(FRAC_PI_4)),
        ]
    }

    pub fn grid(&self, n: usize) -> GridSpec {
        GridSpec::symmetric(&self.spec, n).unwrap()
    }

    pub fn inside(&self, relax: RelaxPair) -> bool {
        is_monotone(&self.problem, relax).inside
    }

    /// Feasible `ω_a` interval at `ω_s`, from the half-planes `a ω_s + b ω_a + c ≥ 0`.
    pub fn omega_a_range(&self, ws: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (1e-9_f64, 2.0_f64);
        for h in self.problem.half_planes() {
            let rest = h.a * ws + h.c;
            if h.b > 0.0 {
                lo = lo.max(-rest / h.b);
            } else if h.b < 0.0 {
                hi = hi.min(rest / -h.b);
            } else if rest < 0.0 {
                return None;
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Maps `(s, t) ∈ [0, 1]²` onto a point of M (`None` if M is empty).
    pub fn relax_in_m(&self, s: f64, t: f64) -> Option<RelaxPair> {
        let feasible: Vec<f64> = (1..400).map(|i| 2.0 * i as f64 / 400.0).filter(|&w| self.omega_a_range(w).is_some()).collect();
        let (a, b) = (*feasible.first()?, *feasible.last()?);
        let ws = a + s * (b - a);
        let (lo, hi) = self.omega_a_range(ws)?;
        let wa = lo + t * (hi - lo);
        let r = RelaxPair::new(ws, wa).ok()?;
        self.inside(r).then_some(r)
    }

    /// `K_1` interval of component `k`.
    pub fn k_interval(&self, k: usize) -> (f64, f64) {
        let lo = self.spec.equilibrium(&self.flux, -1.0)[k];
        let hi = self.spec.equilibrium(&self.flux, 1.0)[k];
        (lo.min(hi), lo.max(hi))
    }

    /// Maps unit-interval draws to a distribution vector in `K_1`.
    pub fn state_in_k(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .enumerate()
            .map(|(k, &s)| {
                let (lo, hi) = self.k_interval(k);
                lo + s * (hi - lo)
            })
            .collect()
    }
}

fn collided(case: &Case, relax: RelaxPair, f: &[f64]) -> Vec<f64> {
    let mut out = f.to_vec();
    collide_cell(&case.spec, &case.flux, relax, &mut out);
    out
}

/// Relative drift of `Σ u` over `steps` steps.
pub fn conservation_drift(case: &Case, relax: RelaxPair, u0: &[f64], n: usize, steps: usize) -> f64 {
    let grid = case.grid(n);
    let mut s = init_from_moments(&case.spec, &case.flux, u0).unwrap();
    let total = |s: &LatticeState| s.moments().iter().sum::<f64>();
    let scale = u0.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let start = total(&s);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        if step(&mut s, &case.spec, &case.flux, relax, &grid).is_err() {
            break;
        }
        worst = worst.max((total(&s) - start).abs() / scale);
    }
    worst
}

/// `Σ|Ω(g) - Ω(f)| - Σ|g - f|` (must be ≤ 1e-12 inside M).
pub fn collision_contraction_excess(case: &Case, relax: RelaxPair, f: &[f64], g: &[f64]) -> f64 {
    let before: f64 = f.iter().zip(g).map(|(a, b)| (a - b).abs()).sum();
    let (cf, cg) = (collided(case, relax, f), collided(case, relax, g));
    let after: f64 = cf.iter().zip(&cg).map(|(a, b)| (a - b).abs()).sum();
    after - before
}

/// Largest per-step increase of `‖g^n - f^n‖_{L¹}` for two runs.
pub fn run_contraction_excess(case: &Case, relax: RelaxPair, uf: &[f64], ug: &[f64], n: usize, steps: usize) -> f64 {
    let grid = case.grid(n);
    let mut f = init_from_moments(&case.spec, &case.flux, uf).unwrap();
    let mut g = init_from_moments(&case.spec, &case.flux, ug).unwrap();
    let dist = |f: &LatticeState, g: &LatticeState| {
        let d: Vec<f64> = f.distributions().iter().zip(g.distributions()).map(|(a, b)| a - b).collect();
        l1_norm(&d, &grid)
    };
    let mut prev = dist(&f, &g);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        step(&mut f, &case.spec, &case.flux, relax, &grid).unwrap();
        step(&mut g, &case.spec, &case.flux, relax, &grid).unwrap();
        let d = dist(&f, &g);
        worst = worst.max(d - prev);
        prev = d;
    }
    worst
}

/// `(max per-step TV_vec increase, max of TV(u) - TV_vec(f))` along a run.
pub fn tv_excess(case: &Case, relax: RelaxPair, u0: &[f64], n: usize, steps: usize) -> (f64, f64) {
    let grid = case.grid(n);
    let mut s = init_from_moments(&case.spec, &case.flux, u0).unwrap();
    let mut prev = vector_total_variation(&s, &grid);
    let mut growth = f64::NEG_INFINITY;
    let mut gap = total_variation(&s.moments(), &grid) - prev;
    for _ in 0..steps {
        step(&mut s, &case.spec, &case.flux, relax, &grid).unwrap();
        let tv = vector_total_variation(&s, &grid);
        growth = growth.max(tv - prev);
        gap = gap.max(total_variation(&s.moments(), &grid) - tv);
        prev = tv;
    }
    (growth, gap)
}

/// Smallest entry of the central-difference Jacobian of the collision at `f`.
pub fn min_jacobian_entry(case: &Case, relax: RelaxPair, f: &[f64]) -> f64 {
    let h = 1e-6;
    let q = f.len();
    let mut worst = f64::INFINITY;
    for j in 0..q {
        let mut plus = f.to_vec();
        let mut minus = f.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let (cp, cm) = (collided(case, relax, &plus), collided(case, relax, &minus));
        for i in 0..q {
            worst = worst.min((cp[i] - cm[i]) / (2.0 * h));
        }
    }
    worst
}

/// Largest excursion of the distributions outside `K_1` along a run.
pub fn k_excursion(case: &Case, relax: RelaxPair, u0: &[f64], n: usize, steps: usize) -> f64 {
    let grid = case.grid(n);
    let q = case.spec.q();
    let bounds: Vec<(f64, f64)> = (0..q).map(|k| case.k_interval(k)).collect();
    let mut s = init_from_moments(&case.spec, &case.flux, u0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        step(&mut s, &case.spec, &case.flux, relax, &grid).unwrap();
        for cell in s.distributions().chunks_exact(q) {
            for (v, (lo, hi)) in cell.iter().zip(&bounds) {
                worst = worst.max(lo - v).max(v - hi);
            }
        }
    }
    worst
}
