//! Experiment configuration: TOML with dotted sections.
//!
//! Scalars may be plain numbers or strings such as `"12/25"`, `"pi/4"` or
//! `"3pi/4"`, so that rational parameters can be written exactly.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GridSpec, InitialDatum};
use crate::scheme::{FluxModel, Link, RelaxPair, SchemeSpec};

/// A number, or a string holding a small rational expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match self {
            Self::Number(v) => Ok(*v),
            Self::Text(s) => parse_scalar(s),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Self::Number(v)
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Self::Text(s.into())
    }
}

fn parse_term(t: &str) -> Result<f64> {
    let t = t.trim();
    let bad = || Error::Config(format!("cannot parse number '{t}'"));
    if let Some(coef) = t.strip_suffix("pi") {
        let coef = coef.trim().trim_end_matches('*').trim();
        let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
        return Ok(c * PI);
    }
    t.parse::<f64>().map_err(|_| bad())
}

/// Parses `a`, `a/b`, with `pi` allowed as a factor in either part.
pub fn parse_scalar(s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((num, den)) => {
            let d = parse_term(den)?;
            if d == 0.0 {
                return Err(Error::Config(format!("zero denominator in '{s}'")));
            }
            Ok(parse_term(num)? / d)
        }
        None => parse_term(s),
    }
}

/// Parses `"bgk:ω"`, `"magic:ω_a"` or `"ω_s,ω_a"`.
pub fn parse_relax(s: &str) -> Result<RelaxPair> {
    let s = s.trim();
    let pair = if let Some(w) = s.strip_prefix("bgk:") {
        RelaxPair::bgk(parse_scalar(w)?)
    } else if let Some(w) = s.strip_prefix("magic:") {
        RelaxPair::magic(parse_scalar(w)?)
    } else if let Some((a, b)) = s.split_once(',') {
        RelaxPair::new(parse_scalar(a)?, parse_scalar(b)?)
    } else {
        return Err(Error::Config(format!("relaxation '{s}' is not bgk:w, magic:w or ws,wa")));
    };
    pair.map_err(|e| Error::Config(format!("relaxation '{s}': {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub shift: Vec<i64>,
    pub eps: Scalar,
    pub sigma: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// `"d1q3"`, `"d2q5"` or `"custom"`.
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_lambda")]
    pub lambda: Scalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps4: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_rest: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkConfig>,
}

fn default_preset() -> String {
    "d1q3".into()
}

fn default_lambda() -> Scalar {
    Scalar::Number(2.0)
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            lambda: default_lambda(),
            eps2: Some(Scalar::Text("12/25".into())),
            eps4: None,
            dim: None,
            eps_rest: None,
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    /// `"burgers"`, `"rotated-burgers"` or `"polynomial"`.
    #[serde(default = "default_flux")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Scalar>,
    /// Per component, coefficients of `u, u², ...`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coefficients: Vec<Vec<Scalar>>,
}

fn default_flux() -> String {
    "burgers".into()
}

impl Default for FluxConfig {
    fn default() -> Self {
        Self { kind: default_flux(), theta: None, coefficients: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    /// `"indicator"`, `"double-indicator"`, `"hat"`, `"indicator-radial"` or `"constant"`.
    #[serde(default = "default_datum")]
    pub kind: String,
    /// Level of the constant datum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Scalar>,
    /// Overrides the datum's bound `m` (used by the monotonicity analysis).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv: Option<Scalar>,
    /// Extra data for `eqdist` sweeps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
}

fn default_datum() -> String {
    "indicator".into()
}

impl Default for DatumConfig {
    fn default() -> Self {
        Self { kind: default_datum(), value: None, m: None, tv: None, variants: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dx_list: Vec<Scalar>,
    /// Interval shared by every dimension.
    #[serde(default = "default_domain")]
    pub domain: [Scalar; 2],
}

fn default_n() -> usize {
    128
}

fn default_domain() -> [Scalar; 2] {
    [Scalar::Number(-1.0), Scalar::Number(1.0)]
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: default_n(), n_list: Vec::new(), dx_list: Vec::new(), domain: default_domain() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    /// `"bgk:ω"`, `"magic:ω_a"` or `"ω_s,ω_a"`; ignored when both rates are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_s: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<Scalar>,
    /// Settings for `convergence` and `eqdist`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<String>,
    /// `"magic"` or `"bgk"` line for `maxprinciple`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Scalar>,
    /// Extra points appended to a line scan.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<Scalar>,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            preset: Some("magic:96/73".into()),
            omega_s: None,
            omega_a: None,
            sweep: Vec::new(),
            line: None,
            from: None,
            to: None,
            step: None,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T", default = "default_t")]
    pub final_time: Scalar,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    /// Compare against a Godunov oracle (`run` only; `convergence` always does).
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_refine")]
    pub oracle_refine: usize,
    /// Raster resolution for `region`.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Overshoot above `m` counted as a violation by `maxprinciple`.
    #[serde(default = "default_threshold")]
    pub violation_threshold: Scalar,
}

fn default_t() -> Scalar {
    Scalar::Text("1/4".into())
}

fn default_cadence() -> usize {
    1
}

fn default_refine() -> usize {
    crate::reference::DEFAULT_REFINEMENT
}

fn default_resolution() -> usize {
    512
}

fn default_threshold() -> Scalar {
    Scalar::Number(1e-6)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            final_time: default_t(),
            cadence: default_cadence(),
            oracle: false,
            oracle_refine: default_refine(),
            resolution: default_resolution(),
            violation_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Include the distributions in field snapshots.
    #[serde(default)]
    pub distributions: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), distributions: false }
    }
}

/// The whole experiment description; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub flux: FluxConfig,
    #[serde(default)]
    pub datum: DatumConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub relax: RelaxConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Default ladder `n = 64·2^i`, `i = 0..9` (`Δx` from 3.13e-2 down on `[-1, 1]`).
pub fn default_n_ladder() -> Vec<usize> {
    (0..10).map(|i| 64usize << i).collect()
}

impl ExperimentConfig {
    /// Parses a config file, or the `config` table of a run manifest.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if table.contains_key("command") {
            if let Some(toml::Value::Table(inner)) = table.get("config") {
                return inner.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()));
            }
        }
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn scheme(&self) -> Result<SchemeSpec> {
        let c = &self.scheme;
        let lambda = c.lambda.value()?;
        let need = |v: &Option<Scalar>, key: &str| -> Result<f64> {
            v.as_ref().ok_or_else(|| Error::Config(format!("scheme.{key} is required for preset '{}'", c.preset)))?.value()
        };
        let spec = match c.preset.as_str() {
            "d1q3" => SchemeSpec::d1q3(lambda, need(&c.eps2, "eps2")?),
            "d2q5" => {
                let e2 = need(&c.eps2, "eps2")?;
                let e4 = match &c.eps4 {
                    Some(v) => v.value()?,
                    None => e2,
                };
                SchemeSpec::d2q5(lambda, e2, e4)
            }
            "custom" => {
                let dim = c.dim.ok_or_else(|| Error::Config("scheme.dim is required for a custom scheme".into()))?;
                let links = c
                    .links
                    .iter()
                    .map(|l| {
                        Ok(Link {
                            shift: l.shift.clone(),
                            eps: l.eps.value()?,
                            sigma: l.sigma.iter().map(Scalar::value).collect::<Result<_>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let eps_rest = match &c.eps_rest {
                    Some(v) => v.value()?,
                    None => 1.0 - 2.0 * links.iter().map(|l| l.eps).sum::<f64>(),
                };
                SchemeSpec { dim, lambda, eps_rest, links }
            }
            other => return Err(Error::Config(format!("unknown scheme.preset '{other}'"))),
        };
        spec.ensure_valid().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn flux(&self) -> Result<FluxModel> {
        let c = &self.flux;
        match c.kind.as_str() {
            "burgers" => Ok(FluxModel::burgers()),
            "rotated-burgers" => {
                let theta = c.theta.as_ref().map(Scalar::value).transpose()?.unwrap_or(PI / 4.0);
                Ok(FluxModel::rotated_burgers(theta))
            }
            "polynomial" => {
                let coeffs = c
                    .coefficients
                    .iter()
                    .map(|row| row.iter().map(Scalar::value).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                FluxModel::polynomial(coeffs).map_err(|e| Error::Config(e.to_string()))
            }
            other => Err(Error::Config(format!("unknown flux.kind '{other}'"))),
        }
    }

    pub fn datum_named(&self, kind: &str) -> Result<InitialDatum> {
        let mut d = match kind {
            "indicator" => InitialDatum::indicator(),
            "double-indicator" => InitialDatum::double_indicator(),
            "hat" => InitialDatum::hat(),
            "indicator-radial" => InitialDatum::indicator_radial(),
            "constant" => {
                let v = self.datum.value.as_ref().map(Scalar::value).transpose()?.unwrap_or(0.0);
                InitialDatum::constant(v)
            }
            other => return Err(Error::Config(format!("unknown datum kind '{other}'"))),
        };
        if let Some(m) = &self.datum.m {
            d.bound = m.value()?;
        }
        if let Some(tv) = &self.datum.tv {
            d.tv_hint = Some(tv.value()?);
        }
        Ok(d)
    }

    pub fn datum(&self) -> Result<InitialDatum> {
        self.datum_named(&self.datum.kind)
    }

    pub fn domain(&self) -> Result<(f64, f64)> {
        Ok((self.grid.domain[0].value()?, self.grid.domain[1].value()?))
    }

    pub fn grid_for(&self, spec: &SchemeSpec, n: usize) -> Result<GridSpec> {
        let d = self.domain()?;
        GridSpec::new(spec.dim, n, &vec![d; spec.dim], spec.lambda).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self, spec: &SchemeSpec) -> Result<GridSpec> {
        self.grid_for(spec, self.grid.n)
    }

    /// Resolutions for sweeps: `n_list`, else `dx_list` converted, else the default ladder.
    pub fn n_list(&self) -> Result<Vec<usize>> {
        if !self.grid.n_list.is_empty() {
            return Ok(self.grid.n_list.clone());
        }
        if !self.grid.dx_list.is_empty() {
            let (a, b) = self.domain()?;
            return self
                .grid
                .dx_list
                .iter()
                .map(|dx| {
                    let n = (b - a) / dx.value()?;
                    // table values are printed to three digits; prefer the ladder
                    let p2 = n.log2().round().exp2();
                    let r = if (n - p2).abs() <= 1e-2 * p2 { p2 } else { n.round() };
                    if r < 2.0 || (n - r).abs() > 1e-2 * r {
                        Err(Error::Config(format!("dx {:?} does not divide the domain", dx)))
                    } else {
                        Ok(r as usize)
                    }
                })
                .collect();
        }
        Ok(default_n_ladder())
    }

    pub fn relax(&self) -> Result<RelaxPair> {
        let c = &self.relax;
        match (&c.omega_s, &c.omega_a) {
            (Some(s), Some(a)) => RelaxPair::new(s.value()?, a.value()?).map_err(|e| Error::Config(e.to_string())),
            _ => match &c.preset {
                Some(p) => parse_relax(p),
                None => Err(Error::Config("relax.preset or relax.omega_s/omega_a required".into())),
            },
        }
    }

    /// Labelled settings of `relax.sweep`, or the single configured pair.
    pub fn relax_sweep(&self) -> Result<Vec<(String, RelaxPair)>> {
        if self.relax.sweep.is_empty() {
            let r = self.relax()?;
            let label = match (&self.relax.omega_s, &self.relax.preset) {
                (None, Some(p)) => p.clone(),
                _ => format!("{},{}", r.omega_s(), r.omega_a()),
            };
            return Ok(vec![(label, r)]);
        }
        self.relax.sweep.iter().map(|s| Ok((s.clone(), parse_relax(s)?))).collect()
    }

    pub fn final_time(&self) -> Result<f64> {
        let t = self.run.final_time.value()?;
        if !(t >= 0.0) {
            return Err(Error::Config(format!("run.T must be non-negative, got {t}")));
        }
        Ok(t)
    }

    /// Checks that every section expands; used before any work starts.
    pub fn validate(&self) -> Result<()> {
        let spec = self.scheme()?;
        let flux = self.flux()?;
        if flux.dim() != spec.dim {
            return Err(Error::Config(format!("flux has {} components, scheme is {}-D", flux.dim(), spec.dim)));
        }
        self.datum()?;
        for v in &self.datum.variants {
            self.datum_named(v)?;
        }
        self.grid(&spec)?;
        self.n_list()?;
        self.final_time()?;
        self.run.violation_threshold.value()?;
        if self.relax.sweep.is_empty() && self.relax.line.is_none() {
            self.relax()?;
        } else {
            for s in &self.relax.sweep {
                parse_relax(s)?;
            }
        }
        Ok(())
    }
}
