//! One-dimensional laws: samplers, densities, characteristic functions,
//! moment generating functions, exponential tilts and the layered
//! (mixture-of-uniforms) representation of symmetric unimodal densities.
//!
//! A [`DistributionSpec`] is the serializable description; [`Law`] is the
//! validated, evaluation-ready form with any numerically computed
//! normalizers cached.

pub(crate) mod layered;
mod subexp;
mod tilt;

pub use layered::{mixture_decompose, LayeredDecomposition};
pub use subexp::SubExpParams;
pub use tilt::{tilt, TiltedDistribution};

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOpts};
use crate::rng::{self, Rng};

/// Probabilities of a finite-discrete law must sum to one within this.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Serializable description of a one-dimensional law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    Gaussian {
        sigma: f64,
    },
    Rademacher,
    FiniteDiscrete {
        /// `(value, probability)` pairs.
        support: Vec<(f64, f64)>,
    },
    /// Density `exp(-|x|/b) / (2b)`.
    Laplace {
        b: f64,
    },
    /// Density proportional to `exp(-|x/scale|^p)`.
    ExponentialPower {
        p: f64,
        scale: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `ξ·Y` with `ξ ~ scale_law` (positive) independent of `Y ~ base`.
    ScaleMixture {
        base: Box<DistributionSpec>,
        scale_law: Box<DistributionSpec>,
    },
    /// `X - X'` for independent copies of `base`.
    SymmetrizedDifference {
        base: Box<DistributionSpec>,
    },
}

/// What a law can do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub sampleable: bool,
    pub density: bool,
    pub cf: bool,
    pub mgf: bool,
    pub finite_support: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    Density,
    Cdf,
    Cf,
    Mgf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Evaluation {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Evaluation {
    pub fn real(self) -> Option<f64> {
        match self {
            Evaluation::Real(v) => Some(v),
            Evaluation::Complex { .. } => None,
        }
    }

    pub fn complex(self) -> Complex64 {
        match self {
            Evaluation::Real(v) => Complex64::new(v, 0.0),
            Evaluation::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

impl DistributionSpec {
    pub fn gaussian(sigma: f64) -> Self {
        DistributionSpec::Gaussian { sigma }
    }

    pub fn laplace(b: f64) -> Self {
        DistributionSpec::Laplace { b }
    }

    pub fn finite(support: Vec<(f64, f64)>) -> Self {
        DistributionSpec::FiniteDiscrete { support }
    }

    pub fn point_mass(c: f64) -> Self {
        DistributionSpec::FiniteDiscrete { support: vec![(c, 1.0)] }
    }

    /// Spec of `X / c`, `c > 0`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("rescaling factor must be positive and finite, got {c}")));
        }
        if c == 1.0 {
            return Ok(self.clone());
        }
        Ok(match self {
            DistributionSpec::Gaussian { sigma } => DistributionSpec::Gaussian { sigma: sigma / c },
            DistributionSpec::Rademacher => DistributionSpec::finite(vec![(-1.0 / c, 0.5), (1.0 / c, 0.5)]),
            DistributionSpec::FiniteDiscrete { support } => DistributionSpec::finite(support.iter().map(|&(v, p)| (v / c, p)).collect()),
            DistributionSpec::Laplace { b } => DistributionSpec::Laplace { b: b / c },
            DistributionSpec::ExponentialPower { p, scale } => DistributionSpec::ExponentialPower { p: *p, scale: scale / c },
            DistributionSpec::Uniform { lo, hi } => DistributionSpec::Uniform { lo: lo / c, hi: hi / c },
            DistributionSpec::ScaleMixture { base, scale_law } => DistributionSpec::ScaleMixture {
                base: Box::new(base.rescaled(c)?),
                scale_law: scale_law.clone(),
            },
            DistributionSpec::SymmetrizedDifference { base } => DistributionSpec::SymmetrizedDifference {
                base: Box::new(base.rescaled(c)?),
            },
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: DistributionSpec = toml::from_str(text).map_err(|e| Error::config(toml_error_path(&e), e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("distribution specs always serialize")
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::Gaussian { .. } => "gaussian",
            DistributionSpec::Rademacher => "rademacher",
            DistributionSpec::FiniteDiscrete { .. } => "finite-discrete",
            DistributionSpec::Laplace { .. } => "laplace",
            DistributionSpec::ExponentialPower { .. } => "exponential-power",
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::ScaleMixture { .. } => "scale-mixture",
            DistributionSpec::SymmetrizedDifference { .. } => "symmetrized-difference",
        }
    }

    /// Checks the family invariants. Errors carry the offending key path.
    pub fn validate(&self) -> Result<()> {
        self.validate_at("")
    }

    fn validate_at(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key(name), format!("must be finite and > 0, got {v}")))
            }
        };
        match self {
            DistributionSpec::Gaussian { sigma } => positive("sigma", *sigma),
            DistributionSpec::Rademacher => Ok(()),
            DistributionSpec::FiniteDiscrete { support } => {
                if support.is_empty() {
                    return Err(Error::config(key("support"), "empty support"));
                }
                for (i, &(v, p)) in support.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::config(key(&format!("support[{i}]")), "value not finite"));
                    }
                    if !(p > 0.0 && p.is_finite()) {
                        return Err(Error::config(
                            key(&format!("support[{i}]")),
                            format!("probability must be > 0, got {p}"),
                        ));
                    }
                }
                let total: f64 = support.iter().map(|s| s.1).sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::config(key("support"), format!("probabilities sum to {total}, not 1")));
                }
                Ok(())
            }
            DistributionSpec::Laplace { b } => positive("b", *b),
            DistributionSpec::ExponentialPower { p, scale } => {
                positive("p", *p)?;
                positive("scale", *scale)
            }
            DistributionSpec::Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::config(key("hi"), format!("need finite lo < hi, got [{lo}, {hi}]")))
                }
            }
            DistributionSpec::ScaleMixture { base, scale_law } => {
                base.validate_at(&key("base"))?;
                scale_law.validate_at(&key("scale_law"))?;
                let ok = match scale_law.as_ref() {
                    DistributionSpec::FiniteDiscrete { support } => support.iter().all(|s| s.0 > 0.0),
                    DistributionSpec::Uniform { lo, .. } => *lo > 0.0,
                    _ => false,
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::config(
                        key("scale_law"),
                        "scale law must be finite-discrete or uniform supported on (0, inf)",
                    ))
                }
            }
            DistributionSpec::SymmetrizedDifference { base } => base.validate_at(&key("base")),
        }
    }

    pub fn law(&self) -> Result<Law> {
        Law::new(self)
    }

    pub fn capabilities(&self) -> Capabilities {
        match self.law() {
            Ok(law) => law.capabilities(),
            Err(_) => Capabilities {
                sampleable: false,
                density: false,
                cf: false,
                mgf: false,
                finite_support: false,
            },
        }
    }
}

pub fn toml_error_path(e: &toml::de::Error) -> String {
    // toml reports spans, not key paths; recover the key from the message
    // when it names one, otherwise point at the document root.
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "<root>".to_string()
}

/// Validated law with cached normalizers.
#[derive(Debug, Clone)]
pub struct Law {
    spec: DistributionSpec,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian { sigma: f64 },
    Discrete { atoms: Vec<(f64, f64)>, cumulative: Vec<f64> },
    Laplace { b: f64 },
    ExpPower { p: f64, scale: f64, norm: f64 },
    Uniform { lo: f64, hi: f64 },
    Mixture { base: Box<Law>, scale: Box<Law> },
    Difference { base: Box<Law> },
}

fn gaussian_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / SQRT_2)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    gaussian_cdf(x)
}

/// Two-sided normal quantile `z` with `P{|N| <= z} = level`.
pub fn normal_two_sided_quantile(level: f64) -> f64 {
    SQRT_2 * statrs::function::erf::erf_inv(level)
}

fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, p) in atoms {
        match out.last_mut() {
            Some(last) if (last.0 - v).abs() <= 1e-12 * (1.0 + v.abs()) => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

fn cumulative(atoms: &[(f64, f64)]) -> Vec<f64> {
    let mut acc = 0.0;
    atoms
        .iter()
        .map(|a| {
            acc += a.1;
            acc
        })
        .collect()
}

impl Law {
    pub fn new(spec: &DistributionSpec) -> Result<Law> {
        spec.validate()?;
        let kind = match spec {
            DistributionSpec::Gaussian { sigma } => Kind::Gaussian { sigma: *sigma },
            DistributionSpec::Rademacher => {
                let atoms = vec![(-1.0, 0.5), (1.0, 0.5)];
                Kind::Discrete {
                    cumulative: cumulative(&atoms),
                    atoms,
                }
            }
            DistributionSpec::FiniteDiscrete { support } => {
                let atoms = merge_atoms(support.clone());
                Kind::Discrete {
                    cumulative: cumulative(&atoms),
                    atoms,
                }
            }
            DistributionSpec::Laplace { b } => Kind::Laplace { b: *b },
            DistributionSpec::ExponentialPower { p, scale } => {
                let (p, scale) = (*p, *scale);
                // One code path for every p: normalize by quadrature.
                let half = quad::integrate_to_infinity(|x| (-(x / scale).powf(p)).exp(), 0.0, QuadOpts::default())?;
                Kind::ExpPower {
                    p,
                    scale,
                    norm: 2.0 * half.value,
                }
            }
            DistributionSpec::Uniform { lo, hi } => Kind::Uniform { lo: *lo, hi: *hi },
            DistributionSpec::ScaleMixture { base, scale_law } => Kind::Mixture {
                base: Box::new(Law::new(base)?),
                scale: Box::new(Law::new(scale_law)?),
            },
            DistributionSpec::SymmetrizedDifference { base } => Kind::Difference {
                base: Box::new(Law::new(base)?),
            },
        };
        Ok(Law { spec: spec.clone(), kind })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn capabilities(&self) -> Capabilities {
        let finite_support = self.atoms().is_some();
        Capabilities {
            sampleable: true,
            density: self.has_density(),
            cf: true,
            mgf: self.mgf_radius() > 0.0,
            finite_support,
        }
    }

    /// Atoms of a finitely supported law, sorted by value.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            Kind::Discrete { atoms, .. } => Some(atoms.clone()),
            Kind::Mixture { base, scale } => {
                let (b, s) = (base.atoms()?, scale.atoms()?);
                let mut out = Vec::with_capacity(b.len() * s.len());
                for &(y, py) in &b {
                    for &(xi, pxi) in &s {
                        out.push((xi * y, py * pxi));
                    }
                }
                Some(merge_atoms(out))
            }
            Kind::Difference { base } => {
                let b = base.atoms()?;
                let mut out = Vec::with_capacity(b.len() * b.len());
                for &(x, px) in &b {
                    for &(y, py) in &b {
                        out.push((x - y, px * py));
                    }
                }
                Some(merge_atoms(out))
            }
            _ => None,
        }
    }

    pub fn has_density(&self) -> bool {
        match &self.kind {
            Kind::Gaussian { .. } | Kind::Laplace { .. } | Kind::ExpPower { .. } | Kind::Uniform { .. } => true,
            Kind::Discrete { .. } => false,
            Kind::Mixture { base, .. } => base.has_density(),
            Kind::Difference { base } => base.has_density(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            Kind::Gaussian { .. } | Kind::Laplace { .. } | Kind::ExpPower { .. } | Kind::Difference { .. } => true,
            Kind::Uniform { lo, hi } => (lo + hi).abs() <= 1e-14 * (hi - lo),
            Kind::Discrete { atoms, .. } => {
                let n = atoms.len();
                (0..n).all(|i| {
                    let (a, b) = (atoms[i], atoms[n - 1 - i]);
                    (a.0 + b.0).abs() <= 1e-12 * (1.0 + a.0.abs()) && (a.1 - b.1).abs() <= 1e-12
                })
            }
            Kind::Mixture { base, .. } => base.is_symmetric(),
        }
    }

    /// Log-concave density (closed-form knowledge, not a numerical test).
    pub fn is_log_concave(&self) -> bool {
        match &self.kind {
            Kind::Gaussian { .. } | Kind::Laplace { .. } | Kind::Uniform { .. } => true,
            Kind::ExpPower { p, .. } => *p >= 1.0,
            Kind::Difference { base } => base.is_log_concave(),
            _ => false,
        }
    }

    /// Support interval (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Gaussian { .. } | Kind::Laplace { .. } | Kind::ExpPower { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Kind::Discrete { atoms, .. } => (atoms[0].0, atoms[atoms.len() - 1].0),
            Kind::Uniform { lo, hi } => (*lo, *hi),
            Kind::Mixture { base, scale } => {
                let (blo, bhi) = base.support();
                let (_, shi) = scale.support();
                let ends = [blo * shi, bhi * shi, 0.0];
                let lo = ends.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            Kind::Difference { base } => {
                let (lo, hi) = base.support();
                (lo - hi, hi - lo)
            }
        }
    }

    /// Interior points where the density is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Laplace { .. } | Kind::ExpPower { .. } | Kind::Mixture { .. } | Kind::Difference { .. } => vec![0.0],
            _ => vec![],
        }
    }

    /// Radius of the open interval around 0 on which the MGF is finite
    /// (`inf` when finite everywhere, `0` when finite only at 0).
    pub fn mgf_radius(&self) -> f64 {
        match &self.kind {
            Kind::Gaussian { .. } | Kind::Discrete { .. } | Kind::Uniform { .. } => f64::INFINITY,
            Kind::Laplace { b } => 1.0 / b,
            Kind::ExpPower { p, scale, .. } => {
                if *p > 1.0 {
                    f64::INFINITY
                } else if *p == 1.0 {
                    1.0 / scale
                } else {
                    0.0
                }
            }
            Kind::Mixture { base, scale } => {
                let smax = scale.support().1;
                base.mgf_radius() / smax
            }
            Kind::Difference { base } => base.mgf_radius(),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Discrete { atoms, .. } => atoms.iter().map(|a| a.0 * a.1).sum(),
            Kind::Uniform { lo, hi } => 0.5 * (lo + hi),
            Kind::Mixture { base, scale } => base.mean() * scale.mean(),
            _ => 0.0,
        }
    }

    pub fn second_moment(&self) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Gaussian { sigma } => sigma * sigma,
            Kind::Discrete { atoms, .. } => atoms.iter().map(|a| a.0 * a.0 * a.1).sum(),
            Kind::Laplace { b } => 2.0 * b * b,
            Kind::ExpPower { p, scale, norm } => {
                let half = quad::integrate_to_infinity(|x| x * x * (-(x / scale).powf(*p)).exp(), 0.0, QuadOpts::default())?;
                2.0 * half.value / norm
            }
            Kind::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            Kind::Mixture { base, scale } => base.second_moment()? * scale.second_moment()?,
            Kind::Difference { base } => {
                let m = base.mean();
                2.0 * (base.second_moment()? - m * m)
            }
        })
    }

    pub fn variance(&self) -> Result<f64> {
        let m = self.mean();
        Ok(self.second_moment()? - m * m)
    }

    /// `E[scale^k]` style moments of a positive law; used for mixture bounds.
    pub fn moment(&self, k: f64) -> Result<f64> {
        match &self.kind {
            Kind::Discrete { atoms, .. } => {
                if k < 0.0 && atoms.iter().any(|a| a.0 == 0.0) {
                    return Ok(f64::INFINITY);
                }
                Ok(atoms.iter().map(|a| a.0.abs().powf(k) * a.1).sum())
            }
            Kind::Uniform { lo, hi } if *lo > 0.0 => {
                let v = if (k + 1.0).abs() < 1e-15 {
                    (hi / lo).ln()
                } else {
                    (hi.powf(k + 1.0) - lo.powf(k + 1.0)) / (k + 1.0)
                };
                Ok(v / (hi - lo))
            }
            _ => {
                let (lo, hi) = self.support();
                let f = |x: f64| x.abs().powf(k) * self.density(x).unwrap_or(0.0);
                Ok(integrate_real_line(&f, lo, hi, &self.kinks(), QuadOpts::default())?)
            }
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            Kind::Discrete { .. } => return Err(Error::Capability(format!("{} has no density", self.spec.family_name()))),
            Kind::Laplace { b } => (-x.abs() / b).exp() / (2.0 * b),
            Kind::ExpPower { p, scale, norm } => (-(x.abs() / scale).powf(*p)).exp() / norm,
            Kind::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Kind::Mixture { base, scale } => {
                if let Some(atoms) = scale.atoms() {
                    let mut acc = 0.0;
                    for (s, w) in atoms {
                        acc += w * base.density(x / s)? / s;
                    }
                    acc
                } else {
                    let (lo, hi) = scale.support();
                    let g = |s: f64| base.density(x / s).unwrap_or(0.0) / s * scale.density(s).unwrap_or(0.0);
                    let mut breaks = Vec::new();
                    if let Kind::Uniform { lo: blo, hi: bhi } = base.kind {
                        for e in [blo, bhi] {
                            if e != 0.0 && x / e > 0.0 {
                                breaks.push(x / e);
                            }
                        }
                    }
                    quad::integrate_with_breaks(g, lo, hi, &breaks, QuadOpts::default())?.value
                }
            }
            Kind::Difference { base } => {
                let (lo, hi) = base.support();
                let f = |y: f64| base.density(y).unwrap_or(0.0) * base.density(y - x).unwrap_or(0.0);
                let mut kinks: Vec<f64> = base.kinks();
                kinks.extend(base.kinks().iter().map(|k| k + x));
                let (lo, hi) = (lo.max(lo + x), hi.min(hi + x));
                if lo >= hi {
                    0.0
                } else {
                    integrate_real_line(&f, lo, hi, &kinks, QuadOpts::default())?
                }
            }
        })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Gaussian { sigma } => gaussian_cdf(x / sigma),
            Kind::Discrete { atoms, .. } => atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum(),
            Kind::Laplace { b } => {
                if x < 0.0 {
                    0.5 * (x / b).exp()
                } else {
                    1.0 - 0.5 * (-x / b).exp()
                }
            }
            Kind::ExpPower { p, scale, norm } => {
                let part = quad::integrate(|y| (-(y / scale).powf(*p)).exp(), 0.0, x.abs(), QuadOpts::default())?;
                let half = part.value / norm;
                if x >= 0.0 {
                    0.5 + half
                } else {
                    0.5 - half
                }
            }
            Kind::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Kind::Mixture { base, scale } => {
                if let Some(atoms) = scale.atoms() {
                    let mut acc = 0.0;
                    for (s, w) in atoms {
                        acc += w * base.cdf(x / s)?;
                    }
                    acc
                } else {
                    let (lo, hi) = scale.support();
                    let g = |s: f64| base.cdf(x / s).unwrap_or(0.0) * scale.density(s).unwrap_or(0.0);
                    quad::integrate(g, lo, hi, QuadOpts::default())?.value
                }
            }
            Kind::Difference { base } => {
                if let Some(atoms) = self.atoms() {
                    atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum()
                } else {
                    // P{X - X' <= x} = E[1 - F(X - x)]
                    let (lo, hi) = base.support();
                    let f = |y: f64| base.density(y).unwrap_or(0.0) * (1.0 - base.cdf(y - x).unwrap_or(0.0));
                    integrate_real_line(&f, lo, hi, &base.kinks(), QuadOpts::default())?
                }
            }
        })
    }

    /// Characteristic function `E[exp(i λ X)]`.
    pub fn cf(&self, lambda: f64) -> Result<Complex64> {
        Ok(match &self.kind {
            Kind::Gaussian { sigma } => Complex64::new((-0.5 * (sigma * lambda).powi(2)).exp(), 0.0),
            Kind::Discrete { atoms, .. } => atoms.iter().map(|&(v, p)| Complex64::from_polar(p, lambda * v)).sum(),
            Kind::Laplace { b } => Complex64::new(1.0 / (1.0 + (b * lambda).powi(2)), 0.0),
            Kind::ExpPower { p, scale, norm } => {
                if lambda == 0.0 {
                    return Ok(Complex64::new(1.0, 0.0));
                }
                let cut = scale * 45f64.powf(1.0 / p);
                let q = quad::integrate(
                    |x| (lambda * x).cos() * (-(x / scale).powf(*p)).exp(),
                    0.0,
                    cut,
                    QuadOpts {
                        max_intervals: 20_000,
                        ..QuadOpts::abs(1e-14)
                    },
                )?;
                Complex64::new(2.0 * q.value / norm, 0.0)
            }
            Kind::Uniform { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                let arg = lambda * h;
                let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
                Complex64::from_polar(sinc, lambda * c)
            }
            Kind::Mixture { base, scale } => {
                if let Some(atoms) = scale.atoms() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (s, w) in atoms {
                        acc += w * base.cf(lambda * s)?;
                    }
                    acc
                } else {
                    let (lo, hi) = scale.support();
                    let re = quad::integrate(
                        |s| base.cf(lambda * s).map(|c| c.re).unwrap_or(0.0) * scale.density(s).unwrap_or(0.0),
                        lo,
                        hi,
                        QuadOpts::default(),
                    )?;
                    let im = quad::integrate(
                        |s| base.cf(lambda * s).map(|c| c.im).unwrap_or(0.0) * scale.density(s).unwrap_or(0.0),
                        lo,
                        hi,
                        QuadOpts::default(),
                    )?;
                    Complex64::new(re.value, im.value)
                }
            }
            Kind::Difference { base } => Complex64::new(base.cf(lambda)?.norm_sqr(), 0.0),
        })
    }

    /// Moment generating function `E[exp(t X)]`.
    pub fn mgf(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(1.0);
        }
        if t.abs() >= self.mgf_radius() {
            return Err(Error::Capability(format!(
                "mgf of {} diverges at t = {t} (finite only for |t| < {})",
                self.spec.family_name(),
                self.mgf_radius()
            )));
        }
        Ok(match &self.kind {
            Kind::Gaussian { sigma } => (0.5 * (sigma * t).powi(2)).exp(),
            Kind::Discrete { atoms, .. } => atoms.iter().map(|&(v, p)| p * (t * v).exp()).sum(),
            Kind::Laplace { b } => 1.0 / (1.0 - (b * t).powi(2)),
            Kind::ExpPower { .. } => self.mgf_by_quadrature(t)?,
            Kind::Uniform { lo, hi } => {
                let w = t * (hi - lo);
                (t * lo).exp() * w.exp_m1() / w
            }
            Kind::Mixture { base, scale } => {
                if let Some(atoms) = scale.atoms() {
                    let mut acc = 0.0;
                    for (s, w) in atoms {
                        acc += w * base.mgf(t * s)?;
                    }
                    acc
                } else {
                    let (lo, hi) = scale.support();
                    quad::integrate(
                        |s| base.mgf(t * s).unwrap_or(f64::NAN) * scale.density(s).unwrap_or(0.0),
                        lo,
                        hi,
                        QuadOpts::default(),
                    )?
                    .value
                }
            }
            Kind::Difference { base } => base.mgf(t)? * base.mgf(-t)?,
        })
    }

    /// `E[exp(tX)]` by adaptive quadrature of the density, abs tol 1e-10.
    pub fn mgf_by_quadrature(&self, t: f64) -> Result<f64> {
        if let Some(atoms) = self.atoms() {
            return Ok(atoms.iter().map(|&(v, p)| p * (t * v).exp()).sum());
        }
        let (lo, hi) = self.support();
        let f = |x: f64| (t * x).exp() * self.density(x).unwrap_or(0.0);
        let v = integrate_real_line(
            &f,
            lo,
            hi,
            &self.kinks(),
            QuadOpts {
                abs_tol: 1e-10,
                rel_tol: 1e-13,
                max_intervals: 8000,
            },
        )?;
        if !v.is_finite() {
            return Err(Error::Capability(format!("mgf diverges at t = {t}")));
        }
        Ok(v)
    }

    pub fn evaluate(&self, what: Functional, point: f64) -> Result<Evaluation> {
        Ok(match what {
            Functional::Density => Evaluation::Real(self.density(point)?),
            Functional::Cdf => Evaluation::Real(self.cdf(point)?),
            Functional::Mgf => Evaluation::Real(self.mgf(point)?),
            Functional::Cf => {
                let c = self.cf(point)?;
                Evaluation::Complex { re: c.re, im: c.im }
            }
        })
    }

    /// One draw.
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match &self.kind {
            Kind::Gaussian { sigma } => {
                let n: f64 = Normal::new(0.0, *sigma).expect("validated sigma").sample(rng);
                n
            }
            Kind::Discrete { atoms, cumulative } => {
                if atoms.len() == 2 && atoms[0].1 == 0.5 {
                    return if rng.random::<bool>() { atoms[1].0 } else { atoms[0].0 };
                }
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let i = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[i].0
            }
            Kind::Laplace { b } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Kind::ExpPower { p, scale, .. } => {
                let g: f64 = Gamma::new(1.0 / p, 1.0).expect("validated p").sample(rng);
                let r = scale * g.powf(1.0 / p);
                if rng.random::<bool>() {
                    r
                } else {
                    -r
                }
            }
            Kind::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Kind::Mixture { base, scale } => scale.draw(rng) * base.draw(rng),
            Kind::Difference { base } => base.draw(rng) - base.draw(rng),
        }
    }

    /// `n` i.i.d. draws; identical for identical `(spec, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        rng::chunked(
            n as u64,
            seed,
            |rng, m| (0..m).map(|_| self.draw(rng)).collect::<Vec<f64>>(),
            |mut a, b| {
                a.extend(b);
                a
            },
            Vec::with_capacity(n),
        )
    }
}

/// Integrates `f` over `(lo, hi)` where either end may be infinite,
/// splitting at `kinks`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, kinks: &[f64], opts: QuadOpts) -> Result<f64> {
    let mut cuts: Vec<f64> = kinks.iter().copied().filter(|&k| k > lo && k < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let left = cuts.first().copied().unwrap_or(if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    });
    let right = cuts.last().copied().unwrap_or(left);
    let mut total = 0.0;
    if lo.is_finite() {
        if lo < left {
            total += quad::integrate(f, lo, left, opts)?.value;
        }
    } else {
        total += quad::integrate_to_infinity(|x| f(-x), -left, opts)?.value;
    }
    if left < right {
        total += quad::integrate_with_breaks(f, left, right, &cuts, opts)?.value;
    }
    if hi.is_finite() {
        if right < hi {
            total += quad::integrate(f, right, hi, opts)?.value;
        }
    } else {
        total += quad::integrate_to_infinity(f, right, opts)?.value;
    }
    Ok(total)
}

/// `n` i.i.d. draws of `spec` (validates first).
pub fn sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample count must be >= 1".into()));
    }
    Ok(spec.law()?.sample(n, seed))
}

pub fn evaluate(spec: &DistributionSpec, what: Functional, point: f64) -> Result<Evaluation> {
    spec.law()?.evaluate(what, point)
}

/// Law of `X - X'` for `X, X'` i.i.d. `spec`.
///
/// Finite supports are convolved exactly and Gaussians stay Gaussian;
/// everything else is returned as the generic difference family.
pub fn symmetrized_difference(spec: &DistributionSpec) -> Result<DistributionSpec> {
    let law = spec.law()?;
    if let Some(atoms) = law.atoms() {
        let mut out = Vec::with_capacity(atoms.len() * atoms.len());
        for &(x, px) in &atoms {
            for &(y, py) in &atoms {
                out.push((x - y, px * py));
            }
        }
        let merged = merge_atoms(out);
        let total: f64 = merged.iter().map(|a| a.1).sum();
        let merged = merged.into_iter().map(|(v, p)| (v, p / total)).collect();
        return Ok(DistributionSpec::FiniteDiscrete { support: merged });
    }
    if let DistributionSpec::Gaussian { sigma } = spec {
        return Ok(DistributionSpec::Gaussian { sigma: sigma * SQRT_2 });
    }
    Ok(DistributionSpec::SymmetrizedDifference {
        base: Box::new(spec.clone()),
    })
}
