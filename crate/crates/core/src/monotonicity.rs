//! Monotonicity region `M` of the relaxation in the `(ω_s, ω_a)` plane.
//!
//! `M` is the intersection of the half-planes
//!
//! ```text
//! ω_s ε_1 ≥ 0,  ω_s ε_1 ≥ ω_s - 1,
//! ω_a G_j ≤ ω_s ε_2j + min(2 - ω_s - ω_a, 0, ω_a - ω_s) / 2   for every link j,
//! ```
//!
//! so everything here is closed form except the sampled bounds `G_j`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scheme::{equilibrium_derivative_bounds, FluxModel, RelaxPair, SchemeSpec, DEFAULT_BOUND_SAMPLES};

/// Diagonal cells next to the origin exempt from the interiority check.
pub const APEX_BAND: usize = 8;

/// Margins this close to zero are treated as exactly on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

fn snap(margin: f64) -> f64 {
    if margin.abs() <= BOUNDARY_TOL {
        0.0
    } else {
        margin
    }
}

/// Linear coefficients and per-link derivative bounds for a data bound `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityProblem {
    pub eps_rest: f64,
    pub link_eps: Vec<f64>,
    pub g: Vec<f64>,
    pub m: f64,
}

/// `a ω_s + b ω_a + c ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn eval(&self, ws: f64, wa: f64) -> f64 {
        self.a * ws + self.b * wa + self.c
    }
}

/// Outcome of [`is_monotone`]; margins are `rhs - lhs`, non-negative when satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub inside: bool,
    pub rest_margin: f64,
    pub link_margins: Vec<f64>,
}

/// Closed-form maximum along the magic line `ω_s + ω_a = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagicBound {
    Empty,
    /// `attained = false` when the supremum is `2`, which `M` never contains.
    Max { omega_a: f64, attained: bool },
}

impl MagicBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Empty => None,
            Self::Max { omega_a, .. } => Some(*omega_a),
        }
    }
}

impl MonotonicityProblem {
    /// Samples `G_j` with the default resolution.
    pub fn new(spec: &SchemeSpec, flux: &FluxModel, m: f64) -> Result<Self> {
        Self::with_samples(spec, flux, m, DEFAULT_BOUND_SAMPLES)
    }

    pub fn with_samples(spec: &SchemeSpec, flux: &FluxModel, m: f64, samples: usize) -> Result<Self> {
        let g = equilibrium_derivative_bounds(spec, flux, m, samples)?;
        Ok(Self { eps_rest: spec.eps_rest, link_eps: spec.links.iter().map(|l| l.eps).collect(), g, m })
    }

    pub fn from_coefficients(eps_rest: f64, link_eps: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if link_eps.len() != g.len() {
            return Err(Error::Argument("one bound per link required".into()));
        }
        if g.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Argument("derivative bounds must be non-negative".into()));
        }
        Ok(Self { eps_rest, link_eps, g, m: f64::NAN })
    }

    /// Whether every equilibrium is non-decreasing on `[-m, m]`, i.e. `(1,1) ∈ M`.
    pub fn equilibria_monotone(&self) -> bool {
        self.eps_rest >= 0.0 && self.link_eps.iter().zip(&self.g).all(|(e, g)| g <= e)
    }

    /// The half-planes whose intersection is `M` (before clipping to `(0,2]²`).
    pub fn half_planes(&self) -> Vec<HalfPlane> {
        let e1 = self.eps_rest;
        let mut planes = vec![HalfPlane { a: e1, b: 0.0, c: 0.0 }, HalfPlane { a: e1 - 1.0, b: 0.0, c: 1.0 }];
        for (&e, &g) in self.link_eps.iter().zip(&self.g) {
            planes.push(HalfPlane { a: e - 0.5, b: -0.5 - g, c: 1.0 });
            planes.push(HalfPlane { a: e, b: -g, c: 0.0 });
            planes.push(HalfPlane { a: e - 0.5, b: 0.5 - g, c: 0.0 });
        }
        planes
    }
}

pub fn is_monotone(problem: &MonotonicityProblem, relax: RelaxPair) -> Verdict {
    let (ws, wa) = (relax.omega_s(), relax.omega_a());
    let rest_margin = snap(ws * problem.eps_rest - (ws - 1.0).max(0.0));
    let link_margins: Vec<f64> = problem
        .link_eps
        .iter()
        .zip(&problem.g)
        .map(|(&e, &g)| snap(ws * e + 0.5 * (2.0 - ws - wa).min(0.0).min(wa - ws) - wa * g))
        .collect();
    let inside = rest_margin >= 0.0 && link_margins.iter().all(|&m| m >= 0.0);
    Verdict { inside, rest_margin, link_margins }
}

/// Checked variant that rejects raw pairs outside `(0,2]²`.
pub fn is_monotone_at(problem: &MonotonicityProblem, omega_s: f64, omega_a: f64) -> Result<Verdict> {
    Ok(is_monotone(problem, RelaxPair::new(omega_s, omega_a)?))
}

/// `ω_max` with `M_BGK = (0, ω_max]`, or `None` when the equilibria are not monotone.
pub fn bgk_upper_bound(problem: &MonotonicityProblem) -> Option<f64> {
    if !problem.equilibria_monotone() {
        return None;
    }
    let rest = if problem.eps_rest >= 1.0 { f64::INFINITY } else { 1.0 / (1.0 - problem.eps_rest) };
    let bound = problem
        .link_eps
        .iter()
        .zip(&problem.g)
        .map(|(e, g)| 1.0 / (1.0 - e + g))
        .fold(rest, f64::min);
    Some(bound.min(2.0))
}

/// Largest `ω_a` with `(2 - ω_a, ω_a) ∈ M`.
pub fn magic_max_omega_a(problem: &MonotonicityProblem) -> MagicBound {
    // on the line, each half-plane reads c0 + c1 t ≥ 0 with t = ω_a ∈ (0, 2)
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for p in problem.half_planes() {
        let c0 = 2.0 * p.a + p.c;
        let c1 = p.b - p.a;
        if c1.abs() <= BOUNDARY_TOL {
            if snap(c0) < 0.0 {
                return MagicBound::Empty;
            }
        } else if c1 > 0.0 {
            lo = lo.max(-c0 / c1);
        } else {
            hi = hi.min(-c0 / c1);
        }
    }
    if hi < lo - BOUNDARY_TOL || hi <= 0.0 {
        return MagicBound::Empty;
    }
    if hi >= 2.0 {
        if lo >= 2.0 - BOUNDARY_TOL {
            return MagicBound::Empty;
        }
        return MagicBound::Max { omega_a: 2.0, attained: false };
    }
    MagicBound::Max { omega_a: hi, attained: true }
}

/// Membership of `M` at cell centres of a uniform grid over `(0,2]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRaster {
    pub resolution: usize,
    /// Row-major with rows indexed by `ω_a`: `inside[ia * resolution + is]`.
    pub inside: Vec<bool>,
    /// Cell-centre values, shared by both axes.
    pub axis: Vec<f64>,
    /// Closed-form diagonal cutoff of the problem, when known.
    pub bgk_bound: Option<f64>,
}

impl RegionRaster {
    pub fn at(&self, is: usize, ia: usize) -> bool {
        self.inside[ia * self.resolution + is]
    }

    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Centre of the last inside diagonal cell.
    pub fn diagonal_cutoff(&self) -> Option<f64> {
        (0..self.resolution).rev().find(|&i| self.at(i, i)).map(|i| self.axis[i])
    }

    /// Centre of the last inside cell on the anti-diagonal `ω_s + ω_a = 2`.
    pub fn magic_cutoff(&self) -> Option<f64> {
        let r = self.resolution;
        (0..r).rev().find(|&ia| self.at(r - 1 - ia, ia)).map(|ia| self.axis[ia])
    }

    /// `omega_s,omega_a,inside` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["omega_s", "omega_a", "inside"])?;
        for ia in 0..self.resolution {
            for is in 0..self.resolution {
                w.write_record([
                    crate::diagnostics::fmt_f64(self.axis[is]),
                    crate::diagnostics::fmt_f64(self.axis[ia]),
                    (self.at(is, ia) as u8).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary PGM, inside cells black, `ω_a` increasing upwards.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let r = self.resolution;
        let mut bytes = format!("P5\n{r} {r}\n255\n").into_bytes();
        for ia in (0..r).rev() {
            bytes.extend((0..r).map(|is| if self.at(is, ia) { 0u8 } else { 255u8 }));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

pub fn rasterize(problem: &MonotonicityProblem, resolution: usize) -> Result<RegionRaster> {
    if resolution < 8 {
        return Err(Error::Argument(format!("raster resolution must be at least 8, got {resolution}")));
    }
    let h = 2.0 / resolution as f64;
    let axis: Vec<f64> = (0..resolution).map(|i| (i as f64 + 0.5) * h).collect();
    let inside = (0..resolution * resolution)
        .into_par_iter()
        .with_min_len(1024)
        .map(|c| {
            let relax = RelaxPair::new(axis[c % resolution], axis[c / resolution]).expect("centres lie in (0,2)");
            is_monotone(problem, relax).inside
        })
        .collect();
    Ok(RegionRaster { resolution, inside, axis, bgk_bound: bgk_upper_bound(problem) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralReport {
    pub convexity_ok: bool,
    pub no_omega_two_ok: bool,
    pub diagonal_interior_ok: bool,
}

impl StructuralReport {
    pub fn all_ok(&self) -> bool {
        self.convexity_ok && self.no_omega_two_ok && self.diagonal_interior_ok
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear points) by the monotone chain.
fn hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Every lattice cell inside the convex hull of the inside cells is itself inside.
///
/// This is the segment-scan criterion taken to its closure: a segment between
/// two inside cells lies in the hull, and the hull is spanned by such segments.
fn convex_on_lattice(raster: &RegionRaster) -> bool {
    let r = raster.resolution;
    let pts: Vec<(i64, i64)> = (0..r * r)
        .filter(|&c| raster.inside[c])
        .map(|c| ((c % r) as i64, (c / r) as i64))
        .collect();
    if pts.len() < 2 {
        return true;
    }
    let poly = hull(pts);
    if poly.len() < 3 {
        // a segment: every lattice point strictly between the endpoints must be inside
        let (a, b) = (poly[0], poly[poly.len() - 1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let g = gcd(dx.unsigned_abs(), dy.unsigned_abs()) as i64;
        return (0..=g).all(|t| raster.at((a.0 + dx / g * t) as usize, (a.1 + dy / g * t) as usize));
    }
    let ys = poly.iter().map(|p| p.1);
    let (ymin, ymax) = (ys.clone().min().unwrap(), ys.max().unwrap());
    for y in ymin..=ymax {
        // x-extent of the hull on this row, from every edge crossing it
        let (mut xl, mut xr) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            let (y0, y1) = (p.1.min(q.1), p.1.max(q.1));
            if y < y0 || y > y1 {
                continue;
            }
            if p.1 == q.1 {
                xl = xl.min(p.0.min(q.0) as f64);
                xr = xr.max(p.0.max(q.0) as f64);
            } else {
                let x = p.0 as f64 + (q.0 - p.0) as f64 * (y - p.1) as f64 / (q.1 - p.1) as f64;
                xl = xl.min(x);
                xr = xr.max(x);
            }
        }
        let lo = (xl - 1e-9).ceil() as i64;
        let hi = (xr + 1e-9).floor() as i64;
        if (lo..=hi).any(|x| !raster.at(x as usize, y as usize)) {
            return false;
        }
    }
    true
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

pub fn structural_checks(raster: &RegionRaster) -> StructuralReport {
    let r = raster.resolution;
    let convexity_ok = convex_on_lattice(raster);
    // the last row/column holds the samples closest to ω = 2
    let no_omega_two_ok = (0..r).all(|i| !raster.at(r - 1, i) && !raster.at(i, r - 1));

    let above = (0..r * r).any(|c| raster.inside[c] && c / r > c % r);
    let diagonal_interior_ok = if !above {
        true
    } else {
        let cutoff = raster.bgk_bound.or_else(|| raster.diagonal_cutoff()).unwrap_or(0.0);
        // M is a cone at the origin, so a 3x3 block around (i, i) only fits
        // once i exceeds a few cells set by the opening angle: skip that band
        let first = APEX_BAND.max(r / 64);
        (first..r - 1)
            .take_while(|&i| raster.axis[i + 1] < cutoff)
            .all(|i| {
                (i - 1..=i + 1).all(|is| (i - 1..=i + 1).all(|ia| raster.at(is, ia)))
            })
    };
    StructuralReport { convexity_ok, no_omega_two_ok, diagonal_interior_ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1q3(eps2: f64) -> MonotonicityProblem {
        MonotonicityProblem::from_coefficients(1.0 - 2.0 * eps2, vec![eps2], vec![0.25]).unwrap()
    }

    #[test]
    fn named_limits_are_on_the_boundary() {
        let p = d1q3(12.0 / 25.0);
        let v = is_monotone(&p, RelaxPair::bgk(25.0 / 24.0).unwrap());
        assert!(v.inside);
        assert_eq!(v.rest_margin, 0.0);
        let v = is_monotone(&p, RelaxPair::new(50.0 / 73.0, 96.0 / 73.0).unwrap());
        assert!(v.inside);
        assert_eq!(v.link_margins[0], 0.0);
        assert!(!is_monotone(&p, RelaxPair::new(1.0, 1.40).unwrap()).inside);
    }

    #[test]
    fn bounds() {
        assert!((bgk_upper_bound(&d1q3(12.0 / 25.0)).unwrap() - 25.0 / 24.0).abs() < 1e-15);
        assert!((bgk_upper_bound(&d1q3(1.0 / 3.0)).unwrap() - 12.0 / 11.0).abs() < 1e-15);
        let degenerate = MonotonicityProblem::from_coefficients(1.0, vec![0.0], vec![0.0]).unwrap();
        assert_eq!(bgk_upper_bound(&degenerate), Some(1.0));
        let bad = MonotonicityProblem::from_coefficients(0.5, vec![0.25], vec![0.3]).unwrap();
        assert_eq!(bgk_upper_bound(&bad), None);
    }

    #[test]
    fn magic_bounds() {
        let m = magic_max_omega_a(&d1q3(12.0 / 25.0));
        assert!(matches!(m, MagicBound::Max { attained: true, .. }));
        assert!((m.value().unwrap() - 96.0 / 73.0).abs() < 1e-14);
        assert!((magic_max_omega_a(&d1q3(1.0 / 3.0)).value().unwrap() - 8.0 / 7.0).abs() < 1e-14);
        let open = MonotonicityProblem::from_coefficients(1.0 / 3.0, vec![1.0 / 3.0], vec![0.0]).unwrap();
        assert_eq!(magic_max_omega_a(&open), MagicBound::Max { omega_a: 2.0, attained: false });
        // the magic point at ω_a = 2 would need ω_s = 0
        assert!(RelaxPair::magic(2.0).is_err());
    }

    #[test]
    fn half_planes_agree_with_verdict() {
        let p = d1q3(12.0 / 25.0);
        for i in 1..=40 {
            for j in 1..=40 {
                let (ws, wa) = (i as f64 * 0.05, j as f64 * 0.05);
                let direct = is_monotone(&p, RelaxPair::new(ws, wa).unwrap()).inside;
                let planes = p.half_planes().iter().all(|h| snap(h.eval(ws, wa)) >= 0.0);
                assert_eq!(direct, planes, "({ws}, {wa})");
            }
        }
    }

    #[test]
    fn raster_basics() {
        let p = d1q3(12.0 / 25.0);
        let r = rasterize(&p, 64).unwrap();
        assert!(structural_checks(&r).all_ok(), "{:?}", structural_checks(&r));
        assert!(rasterize(&p, 4).is_err());
        let empty = MonotonicityProblem::from_coefficients(-0.5, vec![0.75], vec![1.0]).unwrap();
        let e = rasterize(&empty, 8).unwrap();
        assert_eq!(e.count_inside(), 0);
        assert!(structural_checks(&e).all_ok());
    }

    #[test]
    fn hole_breaks_convexity() {
        let p = d1q3(12.0 / 25.0);
        let mut r = rasterize(&p, 128).unwrap();
        let c = 30 * 128 + 30;
        assert!(r.inside[c]);
        r.inside[c] = false;
        assert!(!structural_checks(&r).convexity_ok);
    }
}
