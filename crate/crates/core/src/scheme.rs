//! Discrete velocity set, equilibrium coefficients and flux models.
//!
//! Components are indexed from zero: `0` is the rest population, and link `j`
//! owns the pair `2j+1` (velocity `+c_j`) and `2j+2` (velocity `-c_j`).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the consistency constraints.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Default sample count for [`equilibrium_derivative_bounds`].
pub const DEFAULT_BOUND_SAMPLES: usize = 100_001;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shape hint that lets the Riemann solver take a closed-form path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxShape {
    Convex { argmin: f64 },
    Concave { argmax: f64 },
    General,
}

/// The `d` flux components `φ_α` and their derivatives.
#[derive(Clone)]
pub struct FluxModel {
    name: String,
    components: Vec<ScalarFn>,
    derivatives: Vec<ScalarFn>,
    shapes: Vec<FluxShape>,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("dim", &self.components.len())
            .field("shapes", &self.shapes)
            .finish()
    }
}

impl FluxModel {
    /// Builds a flux and checks `φ_α(0) = 0` and derivative consistency on `[-1, 1]`.
    pub fn new(name: impl Into<String>, components: Vec<ScalarFn>, derivatives: Vec<ScalarFn>) -> Result<Self> {
        if components.is_empty() || components.len() != derivatives.len() {
            return Err(Error::Flux(format!(
                "need matching, non-empty component/derivative lists (got {} and {})",
                components.len(),
                derivatives.len()
            )));
        }
        let shapes = vec![FluxShape::General; components.len()];
        let model = Self { name: name.into(), components, derivatives, shapes };
        model.validate(1.0)?;
        Ok(model)
    }

    pub fn with_shapes(mut self, shapes: Vec<FluxShape>) -> Result<Self> {
        if shapes.len() != self.components.len() {
            return Err(Error::Flux("one shape hint per component required".into()));
        }
        self.shapes = shapes;
        Ok(self)
    }

    /// Burgers flux `u²/2` in one dimension.
    pub fn burgers() -> Self {
        Self::scaled_burgers("burgers", &[1.0])
    }

    /// `φ_1 = cos θ u²/2`, `φ_2 = sin θ u²/2`.
    pub fn rotated_burgers(theta: f64) -> Self {
        Self::scaled_burgers("rotated-burgers", &[theta.cos(), theta.sin()])
    }

    fn scaled_burgers(name: &str, scales: &[f64]) -> Self {
        let components = scales
            .iter()
            .map(|&c| Arc::new(move |u: f64| 0.5 * c * u * u) as ScalarFn)
            .collect();
        let derivatives = scales
            .iter()
            .map(|&c| Arc::new(move |u: f64| c * u) as ScalarFn)
            .collect();
        let shapes = scales
            .iter()
            .map(|&c| if c >= 0.0 { FluxShape::Convex { argmin: 0.0 } } else { FluxShape::Concave { argmax: 0.0 } })
            .collect();
        Self { name: name.into(), components, derivatives, shapes }
    }

    /// Polynomial flux per component, `φ_α(u) = Σ_k coeffs[α][k] u^{k+1}`.
    pub fn polynomial(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let components = coeffs
            .iter()
            .cloned()
            .map(|c| Arc::new(move |u: f64| c.iter().rev().fold(0.0, |acc, &ck| (acc + ck) * u)) as ScalarFn)
            .collect();
        let derivatives = coeffs
            .iter()
            .cloned()
            .map(|c| {
                Arc::new(move |u: f64| {
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (k, &ck)| acc * u + (k as f64 + 1.0) * ck)
                }) as ScalarFn
            })
            .collect();
        let shapes = coeffs
            .iter()
            .map(|c| match c.as_slice() {
                // linear: put the "sonic point" at infinity so the minimum sits on an endpoint
                [a] | [a, 0.0] => FluxShape::Convex { argmin: if *a >= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY } },
                [a, b] if *b > 0.0 => FluxShape::Convex { argmin: -a / (2.0 * b) },
                [a, b] => FluxShape::Concave { argmax: -a / (2.0 * b) },
                _ => FluxShape::General,
            })
            .collect();
        let model = Self { name: "polynomial".into(), components, derivatives, shapes };
        model.validate(1.0)?;
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn value(&self, alpha: usize, u: f64) -> f64 {
        (self.components[alpha])(u)
    }

    #[inline]
    pub fn derivative(&self, alpha: usize, u: f64) -> f64 {
        (self.derivatives[alpha])(u)
    }

    pub fn shape(&self, alpha: usize) -> FluxShape {
        self.shapes[alpha]
    }

    /// Checks `φ_α(0) = 0` and compares `φ'_α` with central differences at 100
    /// pseudo-random points of `[-half_width, half_width]`.
    pub fn validate(&self, half_width: f64) -> Result<()> {
        // splitmix64: deterministic and dependency-free
        let mut seed: u64 = 0x9e37_79b9_7f4a_7c15;
        let mut next = move || {
            seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = seed;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        for alpha in 0..self.dim() {
            let at_zero = self.value(alpha, 0.0);
            if !(at_zero.abs() <= 1e-14) {
                return Err(Error::Flux(format!("component {alpha} has phi(0) = {at_zero}")));
            }
            for _ in 0..100 {
                let u = half_width * (2.0 * next() - 1.0);
                let h = 1e-6 * u.abs().max(1.0);
                let fd = (self.value(alpha, u + h) - self.value(alpha, u - h)) / (2.0 * h);
                let d = self.derivative(alpha, u);
                if !((fd - d).abs() <= 1e-6) {
                    return Err(Error::Flux(format!(
                        "component {alpha}: derivative {d} disagrees with finite difference {fd} at u = {u}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One link: the velocity pair `±c` stored once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// Lattice shift `c/λ` (an integer vector).
    pub shift: Vec<i64>,
    /// `ε_{2j}`, shared by both members of the pair.
    pub eps: f64,
    /// `σ_{2j,α} ≥ 0`; the opposite member carries `-σ`.
    pub sigma: Vec<f64>,
}

/// The discrete model: velocities, linear and flux equilibrium coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub dim: usize,
    pub lambda: f64,
    /// `ε_1`, the rest-population coefficient.
    pub eps_rest: f64,
    pub links: Vec<Link>,
}

/// Which constraint a [`Violation`] refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Dimension { link: usize },
    ZeroShift { link: usize },
    NegativeSigma { link: usize, alpha: usize },
    LinearSum,
    FluxMoment { alpha: usize, p: usize },
    Lambda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.constraint {
            Constraint::Dimension { link } => write!(f, "link {link}: shift/sigma length differs from d"),
            Constraint::ZeroShift { link } => write!(f, "link {link}: zero velocity"),
            Constraint::NegativeSigma { link, alpha } => {
                write!(f, "link {link}: sigma[{alpha}] < 0 (residual {:.3e})", self.residual)
            }
            Constraint::LinearSum => write!(f, "eps_1 + 2 sum eps_2j = 1 (residual {:.3e})", self.residual),
            Constraint::FluxMoment { alpha, p } => {
                write!(f, "2 sum c_2j[{alpha}] sigma_2j[{p}] = delta (residual {:.3e})", self.residual)
            }
            Constraint::Lambda => write!(f, "lambda must be positive and finite"),
        }
    }
}

impl SchemeSpec {
    /// D1Q3 with `c_2 = λ`, `σ_2 = 1/(2λ)` and `ε_1 = 1 - 2ε_2`.
    pub fn d1q3(lambda: f64, eps2: f64) -> Self {
        Self {
            dim: 1,
            lambda,
            eps_rest: 1.0 - 2.0 * eps2,
            links: vec![Link { shift: vec![1], eps: eps2, sigma: vec![0.5 / lambda] }],
        }
    }

    /// D2Q5 with axis links and `ε_1 = 1 - 2ε_2 - 2ε_4`.
    pub fn d2q5(lambda: f64, eps2: f64, eps4: f64) -> Self {
        let s = 0.5 / lambda;
        Self {
            dim: 2,
            lambda,
            eps_rest: 1.0 - 2.0 * eps2 - 2.0 * eps4,
            links: vec![
                Link { shift: vec![1, 0], eps: eps2, sigma: vec![s, 0.0] },
                Link { shift: vec![0, 1], eps: eps4, sigma: vec![0.0, s] },
            ],
        }
    }

    /// Number of discrete velocities, `1 + 2L`.
    pub fn q(&self) -> usize {
        1 + 2 * self.links.len()
    }

    /// Lattice shift of component `k` (zero for the rest population).
    pub fn shift(&self, k: usize) -> Vec<i64> {
        match k {
            0 => vec![0; self.dim],
            _ => {
                let link = &self.links[(k - 1) / 2];
                let sign = if k % 2 == 1 { 1 } else { -1 };
                link.shift.iter().map(|&c| sign * c).collect()
            }
        }
    }

    /// Linear coefficient `ε_k`.
    pub fn eps(&self, k: usize) -> f64 {
        if k == 0 {
            self.eps_rest
        } else {
            self.links[(k - 1) / 2].eps
        }
    }

    /// Flux coefficient `σ_{k,α}`.
    pub fn sigma(&self, k: usize, alpha: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            let s = self.links[(k - 1) / 2].sigma[alpha];
            if k % 2 == 1 {
                s
            } else {
                -s
            }
        }
    }

    /// Lists every violated invariant; empty means the spec is consistent.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(Violation { constraint: Constraint::Lambda, residual: f64::NAN });
        }
        let mut shapes_ok = true;
        for (j, link) in self.links.iter().enumerate() {
            if link.shift.len() != self.dim || link.sigma.len() != self.dim {
                out.push(Violation { constraint: Constraint::Dimension { link: j }, residual: f64::NAN });
                shapes_ok = false;
                continue;
            }
            if link.shift.iter().all(|&c| c == 0) {
                out.push(Violation { constraint: Constraint::ZeroShift { link: j }, residual: 0.0 });
            }
            for (alpha, &s) in link.sigma.iter().enumerate() {
                if s < 0.0 {
                    out.push(Violation { constraint: Constraint::NegativeSigma { link: j, alpha }, residual: -s });
                }
            }
        }
        let sum = self.eps_rest + 2.0 * self.links.iter().map(|l| l.eps).sum::<f64>();
        if (sum - 1.0).abs() > CONSTRAINT_TOL {
            out.push(Violation { constraint: Constraint::LinearSum, residual: (sum - 1.0).abs() });
        }
        if shapes_ok {
            for alpha in 0..self.dim {
                for p in 0..self.dim {
                    let m: f64 = self
                        .links
                        .iter()
                        .map(|l| 2.0 * self.lambda * l.shift[alpha] as f64 * l.sigma[p])
                        .sum();
                    let target = if alpha == p { 1.0 } else { 0.0 };
                    if (m - target).abs() > CONSTRAINT_TOL {
                        out.push(Violation { constraint: Constraint::FluxMoment { alpha, p }, residual: (m - target).abs() });
                    }
                }
            }
        }
        out
    }

    /// Returns an error describing all violations, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Err(Error::Scheme(msg.join("; ")))
        }
    }

    /// Writes `f^eq(u)` into `out` (length `q`).
    #[inline]
    pub fn equilibrium_into(&self, flux: &FluxModel, u: f64, out: &mut [f64]) {
        let mut phi = [0.0f64; 8];
        let d = self.dim;
        debug_assert!(d <= phi.len());
        for (alpha, p) in phi.iter_mut().enumerate().take(d) {
            *p = flux.value(alpha, u);
        }
        out[0] = self.eps_rest * u;
        for (j, link) in self.links.iter().enumerate() {
            let a: f64 = link.sigma.iter().zip(&phi[..d]).map(|(s, p)| s * p).sum();
            let s = link.eps * u;
            out[2 * j + 1] = s + a;
            out[2 * j + 2] = s - a;
        }
    }

    /// `f_k^eq(u) = ε_k u + Σ_α σ_{k,α} φ_α(u)`.
    pub fn equilibrium(&self, flux: &FluxModel, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        self.equilibrium_into(flux, u, &mut out);
        out
    }
}

/// Per-link bound `G_j = max_{|u| ≤ m} |Σ_α σ_{2j,α} φ'_α(u)|` by uniform sampling.
pub fn equilibrium_derivative_bounds(spec: &SchemeSpec, flux: &FluxModel, m: f64, samples: usize) -> Result<Vec<f64>> {
    if !(m >= 0.0) {
        return Err(Error::NegativeBound(m));
    }
    if samples < 2 {
        return Err(Error::Argument(format!("need at least 2 samples, got {samples}")));
    }
    let link_bound = |link: &Link, u: f64| -> f64 {
        link.sigma
            .iter()
            .enumerate()
            .map(|(alpha, s)| s * flux.derivative(alpha, u))
            .sum::<f64>()
            .abs()
    };
    let bounds = spec
        .links
        .iter()
        .map(|link| {
            let mut g = link_bound(link, 0.0);
            for i in 0..samples {
                let u = if i + 1 == samples { m } else { -m + 2.0 * m * i as f64 / (samples - 1) as f64 };
                g = g.max(link_bound(link, u));
            }
            g
        })
        .collect();
    Ok(bounds)
}

/// A point `(ω_s, ω_a)` of `(0,2]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxPair {
    omega_s: f64,
    omega_a: f64,
}

impl RelaxPair {
    const CLASS_TOL: f64 = 1e-14;

    pub fn new(omega_s: f64, omega_a: f64) -> Result<Self> {
        let ok = |w: f64| w > 0.0 && w <= 2.0;
        if ok(omega_s) && ok(omega_a) {
            Ok(Self { omega_s, omega_a })
        } else {
            Err(Error::RelaxRange { omega_s, omega_a })
        }
    }

    pub fn bgk(omega: f64) -> Result<Self> {
        Self::new(omega, omega)
    }

    /// The magic pair `(2 - ω_a, ω_a)`.
    pub fn magic(omega_a: f64) -> Result<Self> {
        Self::new(2.0 - omega_a, omega_a)
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn is_bgk(&self) -> bool {
        (self.omega_s - self.omega_a).abs() <= Self::CLASS_TOL
    }

    pub fn is_magic(&self) -> bool {
        (self.omega_s + self.omega_a - 2.0).abs() <= Self::CLASS_TOL
    }

    /// Geometric damping factor `max(|1-ω_s|, |1-ω_a|)` of the non-equilibrium part.
    pub fn damping(&self) -> f64 {
        (1.0 - self.omega_s).abs().max((1.0 - self.omega_a).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d1q3_is_consistent() {
        assert!(SchemeSpec::d1q3(2.0, 12.0 / 25.0).validate().is_empty());
        assert!((SchemeSpec::d1q3(2.0, 12.0 / 25.0).eps_rest - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn perturbed_sigma_reports_moment_residual() {
        let mut spec = SchemeSpec::d1q3(2.0, 12.0 / 25.0);
        spec.links[0].sigma[0] = 0.3;
        let v = spec.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, Constraint::FluxMoment { alpha: 0, p: 0 });
        assert!((v[0].residual - 0.2).abs() < 1e-12);
    }

    #[test]
    fn d2q5_is_consistent() {
        assert!(SchemeSpec::d2q5(2.0, 0.2, 0.3).validate().is_empty());
    }

    #[test]
    fn linear_sum_and_negative_sigma_detected() {
        let mut spec = SchemeSpec::d1q3(2.0, 0.25);
        spec.eps_rest = 0.6;
        spec.links[0].sigma[0] = -0.25;
        let v = spec.validate();
        assert!(v.iter().any(|x| x.constraint == Constraint::LinearSum));
        assert!(v.iter().any(|x| matches!(x.constraint, Constraint::NegativeSigma { .. })));
    }

    #[test]
    fn equilibrium_at_one() {
        let spec = SchemeSpec::d1q3(2.0, 12.0 / 25.0);
        let e = spec.equilibrium(&FluxModel::burgers(), 1.0);
        let expect = [1.0 / 25.0, 12.0 / 25.0 + 0.125, 12.0 / 25.0 - 0.125];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn equilibrium_zero_and_sum() {
        let spec = SchemeSpec::d2q5(2.0, 0.2, 0.2);
        let flux = FluxModel::rotated_burgers(0.3);
        assert!(spec.equilibrium(&flux, 0.0).iter().all(|&x| x == 0.0));
        let s: f64 = spec.equilibrium(&flux, 0.7).iter().sum();
        assert!((s - 0.7).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_flux_moment() {
        let spec = SchemeSpec::d2q5(2.0, 0.2, 0.1);
        let flux = FluxModel::rotated_burgers(1.1);
        for &u in &[-0.9, -0.1, 0.4, 0.8] {
            let e = spec.equilibrium(&flux, u);
            for alpha in 0..2 {
                let m: f64 = (1..spec.q()).map(|k| spec.lambda * spec.shift(k)[alpha] as f64 * e[k]).sum();
                assert!((m - flux.value(alpha, u)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_bounds() {
        let spec = SchemeSpec::d1q3(2.0, 12.0 / 25.0);
        let g = equilibrium_derivative_bounds(&spec, &FluxModel::burgers(), 1.0, 1001).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15);
        let g0 = equilibrium_derivative_bounds(&spec, &FluxModel::burgers(), 0.0, 2).unwrap();
        assert_eq!(g0[0], 0.0);
        assert!(equilibrium_derivative_bounds(&spec, &FluxModel::burgers(), -1.0, 10).is_err());

        let spec2 = SchemeSpec::d2q5(2.0, 0.2, 0.2);
        let theta = std::f64::consts::FRAC_PI_4;
        let g = equilibrium_derivative_bounds(&spec2, &FluxModel::rotated_burgers(theta), 1.0, 1001).unwrap();
        assert!((g[0] - theta.cos() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn relax_pair_classification() {
        assert!(RelaxPair::bgk(25.0 / 24.0).unwrap().is_bgk());
        assert!(RelaxPair::magic(96.0 / 73.0).unwrap().is_magic());
        assert!(RelaxPair::magic(1.0).unwrap().is_bgk());
        assert!(RelaxPair::new(0.0, 1.0).is_err());
        assert!(RelaxPair::new(1.0, 2.1).is_err());
        assert!(RelaxPair::new(2.0, 2.0).is_ok());
    }

    #[test]
    fn flux_checks() {
        let bad: ScalarFn = Arc::new(|u: f64| u * u + 1.0);
        let d: ScalarFn = Arc::new(|u: f64| 2.0 * u);
        assert!(FluxModel::new("bad", vec![bad], vec![d.clone()]).is_err());
        let wrong_d: ScalarFn = Arc::new(|u: f64| u);
        let f: ScalarFn = Arc::new(|u: f64| u * u);
        assert!(FluxModel::new("wrong", vec![f.clone()], vec![wrong_d]).is_err());
        assert!(FluxModel::new("ok", vec![f], vec![d]).is_ok());
        let p = FluxModel::polynomial(vec![vec![0.3, -0.5, 0.25]]).unwrap();
        assert!((p.value(0, 2.0) - (0.6 - 2.0 + 2.0)).abs() < 1e-14);
        assert!((p.derivative(0, 2.0) - (0.3 - 2.0 + 3.0)).abs() < 1e-14);
    }
}
