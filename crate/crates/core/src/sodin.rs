//! Numerical replay of the Fourier-analytic argument for symmetric
//! sub-exponential laws, one displayed inequality at a time.
//!
//! Everything runs on the rescaled variable `X/b`, whose MGF is finite on
//! `|λ| <= 1`. With unit `α, β`, `U = <α,X>` and `V = <β,X>`, the chain is
//!
//! ```text
//! P{|U| < εR, V > R} <= e^{1-R}/√π · ∏M(β_k) · ∫ ∏|φ_k(t_k x)| e^{-x²} dx,   t_k = 2α_k/(εR)
//! ```
//!
//! followed by the cosine, lattice-distance and level-set estimates of the
//! integral. Each check is reported as a [`StepCheck`].

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::bounds::{rv_smallball_bound, Constants};
use crate::distributions::{DistributionSpec, Law, SubExpParams, TiltedDistribution};
use crate::error::{Error, Result};
use crate::estimators::{from_counts, mc_event, Neumaier, ProbEstimate};
use crate::lcd::{default_search_cap, dist_to_lattice, lcd, CoefficientVector, LcdResult, DEFAULT_TOL};
use crate::quad::{self, QuadOpts};
use crate::rng::{self, derive_seed, Rng};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Tolerance for checks that are exact up to rounding.
const EXACT_TOL: f64 = 1e-12;

/// One displayed inequality, evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    pub step: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed margin in the claimed direction; negative beyond `-tol` fails.
    pub slack: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StepCheck {
    /// Claim `lhs <= rhs`.
    pub fn upper(step: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> StepCheck {
        let slack = rhs - lhs;
        StepCheck {
            step: step.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
            note: None,
        }
    }

    /// Claim `lhs >= rhs`.
    pub fn lower(step: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> StepCheck {
        let slack = lhs - rhs;
        StepCheck {
            step: step.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
            note: None,
        }
    }

    /// Claim `lhs = rhs` within `tol`.
    pub fn equal(step: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> StepCheck {
        let slack = tol - (lhs - rhs).abs();
        StepCheck {
            step: step.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= 0.0,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> StepCheck {
        self.note = Some(note.into());
        self
    }
}

// ---------------------------------------------------------------------------
// Tilted differences W = Y - Y'

/// Even test function on the reals, valued in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Phi {
    Zero,
    /// `1{|w| > delta}`, or `1{|w| >= delta}` when `closed`.
    Indicator {
        delta: f64,
        #[serde(default)]
        closed: bool,
    },
    /// `exp(-w²/(2s²))`.
    Gaussian {
        s: f64,
    },
}

impl Phi {
    fn validate(&self) -> Result<()> {
        match *self {
            Phi::Zero => Ok(()),
            Phi::Indicator { delta, .. } if delta >= 0.0 && delta.is_finite() => Ok(()),
            Phi::Gaussian { s } if s > 0.0 && s.is_finite() => Ok(()),
            _ => Err(Error::Domain(format!("invalid test function {self:?}"))),
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        let a = w.abs();
        match *self {
            Phi::Zero => 0.0,
            Phi::Indicator { delta, closed } => {
                // ties decided with a relative tolerance so exact lattice values are stable
                let tie = EXACT_TOL * delta.max(1.0);
                let hit = if closed { a >= delta - tie } else { a > delta + tie };
                hit as u8 as f64
            }
            Phi::Gaussian { s } => (-0.5 * (w / s).powi(2)).exp(),
        }
    }
}

/// Law of `W = Y - Y'` for `Y, Y'` i.i.d. from a (tilted) law.
enum DiffLaw<'a> {
    Atoms(Vec<(f64, f64)>),
    Density { law: &'a TiltedDistribution, lo: f64, hi: f64 },
}

const DIFF_OPTS: QuadOpts = QuadOpts {
    abs_tol: 1e-13,
    rel_tol: 1e-11,
    max_intervals: 4000,
};

impl<'a> DiffLaw<'a> {
    fn of(law: &'a TiltedDistribution) -> DiffLaw<'a> {
        if let Some(atoms) = law.atoms() {
            let mut w = Vec::with_capacity(atoms.len() * atoms.len());
            for &(x, px) in atoms {
                for &(y, py) in atoms {
                    w.push((x - y, px * py));
                }
            }
            return DiffLaw::Atoms(w);
        }
        let (lo, hi) = law.effective_range();
        DiffLaw::Density { law, lo, hi }
    }

    /// Density of `W` at `w` (continuous case only).
    fn density(law: &TiltedDistribution, lo: f64, hi: f64, w: f64) -> Result<f64> {
        let (a, b) = (lo.max(lo + w), hi.min(hi + w));
        if a >= b {
            return Ok(0.0);
        }
        let mut cuts = law.kinks();
        cuts.extend(law.kinks().iter().map(|k| k + w));
        let f = |x: f64| law.density(x).unwrap_or(0.0) * law.density(x - w).unwrap_or(0.0);
        Ok(quad::integrate_with_breaks(f, a, b, &cuts, DIFF_OPTS)?.value)
    }

    /// `E φ(W)`.
    fn expect(&self, phi: Phi) -> Result<f64> {
        phi.validate()?;
        match self {
            DiffLaw::Atoms(a) => Ok(a.iter().map(|&(w, p)| p * phi.eval(w)).sum()),
            DiffLaw::Density { law, lo, hi } => {
                let g = |w: f64| Self::density(law, *lo, *hi, w).unwrap_or(0.0);
                let opts = QuadOpts {
                    abs_tol: 1e-11,
                    rel_tol: 1e-10,
                    max_intervals: 2000,
                };
                match phi {
                    Phi::Zero => Ok(0.0),
                    // 1 - P{|W| <= δ} keeps the small-δ case accurate
                    Phi::Indicator { delta, .. } => {
                        let inner = 2.0 * quad::integrate(g, 0.0, delta.min(hi - lo), opts)?.value;
                        Ok((1.0 - inner).max(0.0))
                    }
                    Phi::Gaussian { .. } => Ok(2.0 * quad::integrate(|w| phi.eval(w) * g(w), 0.0, hi - lo, opts)?.value),
                }
            }
        }
    }
}

/// Both sides of the tilt comparison `∬φ(x-x')dF dF <= K ∬φ(x-x')dF_t dF_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltingCheck {
    pub t: f64,
    /// `M(t)`.
    pub mgf: f64,
    pub lhs: f64,
    /// `∬φ(x-x') dF_t dF_t`.
    pub tilted: f64,
    /// `M(t)·tilted`, the factor as printed.
    pub rhs_printed: f64,
    /// `M(t)²·tilted`, the factor the Cauchy-Schwarz step delivers.
    pub rhs: f64,
    pub printed_holds: bool,
    pub holds: bool,
}

fn comparison_tol(law: &Law) -> f64 {
    if law.atoms().is_some() {
        EXACT_TOL
    } else {
        1e-8
    }
}

/// Compares `E φ(X - X')` with its tilted counterpart; exact sums for
/// discrete laws, nested quadrature otherwise.
pub fn tilting_check(spec: &DistributionSpec, t: f64, phi: Phi) -> Result<TiltingCheck> {
    let law = spec.law()?;
    let base = TiltedDistribution::new(law.clone(), 0.0)?;
    let tilted = TiltedDistribution::new(law.clone(), t)?;
    let lhs = DiffLaw::of(&base).expect(phi)?;
    let it = DiffLaw::of(&tilted).expect(phi)?;
    let m = tilted.normalizer();
    let tol = comparison_tol(&law);
    Ok(TiltingCheck {
        t,
        mgf: m,
        lhs,
        tilted: it,
        rhs_printed: m * it,
        rhs: m * m * it,
        printed_holds: lhs <= m * it + tol,
        holds: lhs <= m * m * it + tol,
    })
}

/// `P{|W_t| >= δ}` against `P{|W| >= δ}/M(t)^k` for `k = 1` (printed) and `k = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryCheck {
    pub t: f64,
    pub delta: f64,
    pub mgf: f64,
    /// `P{|W_t| >= δ}`.
    pub lhs: f64,
    /// `P{|W| >= δ}`.
    pub untilted: f64,
    pub rhs_printed: f64,
    pub rhs: f64,
    pub printed_holds: bool,
    pub holds: bool,
}

pub fn corollary_check(spec: &DistributionSpec, t: f64, delta: f64) -> Result<CorollaryCheck> {
    let phi = Phi::Indicator { delta, closed: true };
    let c = tilting_check(spec, t, phi)?;
    let tol = comparison_tol(&spec.law()?);
    let m = c.mgf;
    Ok(CorollaryCheck {
        t,
        delta,
        mgf: m,
        lhs: c.tilted,
        untilted: c.lhs,
        rhs_printed: c.lhs / m,
        rhs: c.lhs / (m * m),
        printed_holds: c.tilted >= c.lhs / m - tol,
        holds: c.tilted >= c.lhs / (m * m) - tol,
    })
}

// ---------------------------------------------------------------------------
// Elementary identities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityPoint {
    pub t: f64,
    pub quadrature: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianIdentityReport {
    pub points: Vec<IdentityPoint>,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

/// `∫ e^{2itx - x²} dx` by the trapezoid rule, against `√π e^{-t²}`.
///
/// The integrand is entire and Gaussian-decaying, so the trapezoid rule has
/// aliasing error `≈ √π e^{-(π/h - |t|)²}`; `h` is the largest power of two
/// with `π/h >= |t| + 7.5`, which keeps the nodes exact. The sum is
/// compensated because the result at `t = 5` is nine orders below the terms,
/// so the rounding of the individual terms sets the floor.
pub fn gaussian_identity_check(t_grid: &[f64]) -> Result<GaussianIdentityReport> {
    if t_grid.is_empty() {
        return Err(Error::Domain("empty t grid".into()));
    }
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !t.is_finite() {
            return Err(Error::Domain(format!("t must be finite, got {t}")));
        }
        let mut h = 0.25;
        while PI / h < t.abs() + 7.5 {
            h *= 0.5;
        }
        let half = (8.0 / h).ceil() as i64;
        let (mut re, mut im) = (Neumaier::default(), Neumaier::default());
        for k in -half..=half {
            let x = k as f64 * h;
            let g = h * (-x * x).exp();
            re.add(g * (2.0 * t * x).cos());
            im.add(g * (2.0 * t * x).sin());
        }
        let exact = SQRT_PI * (-t * t).exp();
        let abs_error = (re.value() - exact).hypot(im.value());
        points.push(IdentityPoint {
            t,
            quadrature: re.value(),
            exact,
            abs_error,
            rel_error: abs_error / exact,
        });
    }
    let max_abs_error = points.iter().fold(0.0f64, |m, p| m.max(p.abs_error));
    let max_rel_error = points.iter().fold(0.0f64, |m, p| m.max(p.rel_error));
    Ok(GaussianIdentityReport {
        points,
        max_abs_error,
        max_rel_error,
    })
}

/// `min_θ [(1 - cos θ) - 8 dist²(θ/2π, Z)]` over `points` equispaced values
/// in `[-4π, 4π]`.
pub fn cosine_dist_check(points: usize) -> Result<f64> {
    if points < 2 {
        return Err(Error::Domain("need at least two grid points".into()));
    }
    let slack = |theta: f64| {
        let s = theta / (2.0 * PI);
        let d = s - s.round();
        (1.0 - theta.cos()) - 8.0 * d * d
    };
    Ok((0..points)
        .into_par_iter()
        .map(|i| slack(-4.0 * PI + 8.0 * PI * i as f64 / (points - 1) as f64))
        .reduce(|| f64::INFINITY, f64::min))
}

// ---------------------------------------------------------------------------
// Scenarios

fn default_samples() -> u64 {
    1_000_000
}

fn default_ci() -> f64 {
    0.99
}

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    /// `x_max` solves `e^{-x_max²} = truncation`.
    pub truncation: f64,
    pub max_intervals: usize,
    /// Floor step of the level-set scans.
    pub cell: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            abs_tol: 1e-10,
            truncation: 1e-16,
            max_intervals: 20_000,
            cell: 1e-9,
        }
    }
}

/// On-disk form of a pipeline scenario. `alpha`, `beta` are normalized on
/// load; `delta` and `b` default as documented on [`PipelineScenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub spec: DistributionSpec,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub gamma: f64,
    /// Threshold for the rescaled variable `X/b`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Rescaling factor: the pipeline works with `X/b`.
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
    /// Exponent constant in `e^{-cγ²}` for the reported calibrated forms.
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    /// `C_p`, `c_p` for the small-ball term of the assembled bound.
    #[serde(default)]
    pub constants: Constants,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig> {
        toml::from_str(text).map_err(|e| Error::config(crate::distributions::toml_error_path(&e), e.message().to_string()))
    }
}

/// A validated scenario on the rescaled law.
///
/// Defaults: `b` is the largest atom for discrete laws, `2b` for Laplace(b),
/// `2/r` for an MGF radius `r`, and the standard deviation otherwise.
/// `δ` is half the smallest gap between atoms, or half the interquartile
/// range for continuous laws; `p = Q(δ)` is measured.
#[derive(Debug, Clone)]
pub struct PipelineScenario {
    pub config: ScenarioConfig,
    pub rescale: f64,
    /// Law of `X/b`.
    pub spec: DistributionSpec,
    pub law: Law,
    pub alpha: CoefficientVector,
    pub beta: CoefficientVector,
    pub nu: f64,
    pub delta: f64,
    pub p: f64,
    pub lcd: LcdResult,
    pub x_max: f64,
    tilts: Vec<TiltedDistribution>,
}

/// Scenario parameters as echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub spec: DistributionSpec,
    pub rescale: f64,
    pub rescaled_spec: DistributionSpec,
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub gamma: f64,
    pub nu: f64,
    pub delta: f64,
    pub p: f64,
    pub lcd: LcdResult,
    pub x_max: f64,
    pub samples: u64,
    pub seed: u64,
}

fn require(name: &str, ok: bool, v: f64) -> Result<()> {
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(name, format!("invalid value {v}")))
    }
}

fn default_rescale(law: &Law) -> Result<f64> {
    if let Some(atoms) = law.atoms() {
        return Ok(atoms.iter().fold(0.0f64, |m, a| m.max(a.0.abs())));
    }
    if let DistributionSpec::Laplace { b } = law.spec() {
        return Ok(2.0 * b);
    }
    let r = law.mgf_radius();
    if r.is_finite() {
        return Ok(2.0 / r);
    }
    Ok(law.variance()?.sqrt())
}

fn quantile(law: &Law, u: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while law.cdf(lo)? > u {
        lo *= 2.0;
    }
    while law.cdf(hi)? < u {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if law.cdf(mid)? < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn default_delta(law: &Law) -> Result<f64> {
    if let Some(atoms) = law.atoms() {
        let gap = atoms.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::INFINITY, f64::min);
        if !gap.is_finite() {
            return Err(Error::Domain("a point mass has no admissible delta (p = 1)".into()));
        }
        return Ok(0.5 * gap);
    }
    Ok(0.5 * (quantile(law, 0.75)? - quantile(law, 0.25)?))
}

/// Lévy concentration `sup_a P{a <= X <= a + δ}`.
pub fn concentration(law: &Law, delta: f64) -> Result<f64> {
    if let Some(atoms) = law.atoms() {
        let tie = EXACT_TOL * delta.max(1.0);
        let best = (0..atoms.len())
            .map(|i| {
                atoms[i..]
                    .iter()
                    .take_while(|a| a.0 <= atoms[i].0 + delta + tie)
                    .map(|a| a.1)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        return Ok(best);
    }
    // a symmetric unimodal law peaks at a = -δ/2; the grid covers the rest
    let lo = quantile(law, 1e-9)? - delta;
    let hi = quantile(law, 1.0 - 1e-9)?;
    let mut best = law.cdf(0.5 * delta)? - law.cdf(-0.5 * delta)?;
    for i in 0..=4000 {
        let a = lo + (hi - lo) * i as f64 / 4000.0;
        best = best.max(law.cdf(a + delta)? - law.cdf(a)?);
    }
    Ok(best)
}

impl PipelineScenario {
    pub fn from_config(config: ScenarioConfig) -> Result<PipelineScenario> {
        config.spec.validate()?;
        require("epsilon", config.epsilon > 0.0, config.epsilon)?;
        require("R", config.r >= 1.0, config.r)?;
        require("gamma", config.gamma > 0.0, config.gamma)?;
        require("ci_level", config.ci_level > 0.0 && config.ci_level < 1.0, config.ci_level)?;
        require("c", config.c > 0.0, config.c)?;
        if config.samples < 100 {
            return Err(Error::config("samples", "need at least 100 samples"));
        }
        let q = config.quadrature;
        require("quadrature.abs_tol", q.abs_tol > 0.0, q.abs_tol)?;
        require("quadrature.truncation", q.truncation > 0.0 && q.truncation < 1.0, q.truncation)?;
        require("quadrature.cell", q.cell > 0.0, q.cell)?;
        if q.max_intervals == 0 {
            return Err(Error::config("quadrature.max_intervals", "must be positive"));
        }
        let constants = Constants::default().merged(&config.constants);
        constants.validate()?;

        let alpha = CoefficientVector::new(config.alpha.clone())
            .and_then(|a| a.normalized())
            .map_err(|e| Error::config("alpha", e.to_string()))?;
        let beta = CoefficientVector::new(config.beta.clone())
            .and_then(|b| b.normalized())
            .map_err(|e| Error::config("beta", e.to_string()))?;
        if alpha.len() != beta.len() {
            return Err(Error::Shape(format!("alpha has {} entries, beta has {}", alpha.len(), beta.len())));
        }

        let base = config.spec.law()?;
        for i in 0..=80 {
            let lambda = -20.0 + 0.5 * i as f64;
            let im = base.cf(lambda)?.im;
            if im.abs() > 1e-10 {
                return Err(Error::Domain(format!("spec must be symmetric: Im cf({lambda}) = {im:e}")));
            }
        }
        let rescale = match config.b {
            Some(b) => {
                require("b", b > 0.0, b)?;
                b
            }
            None => default_rescale(&base)?,
        };
        let spec = config.spec.rescaled(rescale)?;
        let law = spec.law()?;
        if law.mgf_radius() <= 1.0 {
            return Err(Error::Capability(format!(
                "mgf of X/b is finite only for |λ| < {}; choose a larger b",
                law.mgf_radius()
            )));
        }
        let nu = SubExpParams::measure(&law, 1.0)?.nu;
        let delta = match config.delta {
            Some(d) => {
                require("delta", d > 0.0, d)?;
                d
            }
            None => default_delta(&law)?,
        };
        let p = concentration(&law, delta)?;
        if p >= 1.0 - EXACT_TOL {
            return Err(Error::Domain(format!("Q(delta = {delta}) = {p} is not below 1")));
        }
        let lcd = lcd(&alpha, config.gamma, default_search_cap(&alpha), DEFAULT_TOL)?;
        let x_max = (-q.truncation.ln()).sqrt();
        let tilts = beta
            .entries()
            .iter()
            .map(|&bk| TiltedDistribution::new(law.clone(), bk))
            .collect::<Result<Vec<_>>>()?;
        Ok(PipelineScenario {
            config,
            rescale,
            spec,
            law,
            alpha,
            beta,
            nu,
            delta,
            p,
            lcd,
            x_max,
            tilts,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<PipelineScenario> {
        Self::from_config(ScenarioConfig::from_toml_str(text)?)
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn summary(&self) -> ScenarioSummary {
        ScenarioSummary {
            name: self.config.name.clone(),
            spec: self.config.spec.clone(),
            rescale: self.rescale,
            rescaled_spec: self.spec.clone(),
            n: self.n(),
            alpha: self.alpha.entries().to_vec(),
            beta: self.beta.entries().to_vec(),
            epsilon: self.config.epsilon,
            r: self.config.r,
            gamma: self.config.gamma,
            nu: self.nu,
            delta: self.delta,
            p: self.p,
            lcd: self.lcd,
            x_max: self.x_max,
            samples: self.config.samples,
            seed: self.config.seed,
        }
    }

    fn opts(&self) -> QuadOpts {
        QuadOpts {
            abs_tol: self.config.quadrature.abs_tol,
            rel_tol: 0.0,
            max_intervals: self.config.quadrature.max_intervals,
        }
    }

    /// `∏ M(β_k)`.
    pub fn mgf_product(&self) -> f64 {
        self.tilts.iter().map(|t| t.normalizer()).product()
    }

    /// `e^{ν²/2}`, the bound on `∏ M(β_k)` for `‖β‖ = 1`.
    pub fn mgf_product_bound(&self) -> f64 {
        (0.5 * self.nu * self.nu).exp()
    }

    fn t_coefficients(&self, eps: f64, r: f64) -> Vec<f64> {
        self.alpha.entries().iter().map(|a| 2.0 * a / (eps * r)).collect()
    }
}

// ---------------------------------------------------------------------------
// The characteristic-function integral

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfIntegral {
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// `∫ ∏|φ_k(t_k x)| e^{-x²} dx` over `[-x_max, x_max]`.
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub t: Vec<f64>,
    pub x_max: f64,
    /// `∏ M(β_k)`.
    pub mgf_product: f64,
    /// `e^{ν²/2}`.
    pub prefactor_bound: f64,
    /// `e^{1-R} ∏M(β_k) value / √π`.
    pub chain_rhs: f64,
    /// Same with `e^{ν²/2}` in place of `∏M(β_k)`.
    pub chain_rhs_loose: f64,
}

/// The Gaussian-weighted integral of the tilted cf moduli at `(ε, R)`.
pub fn cf_product_integral_at(s: &PipelineScenario, eps: f64, r: f64) -> Result<CfIntegral> {
    if !(eps > 0.0 && r > 0.0) {
        return Err(Error::Domain(format!("epsilon and R must be > 0, got {eps}, {r}")));
    }
    let t = s.t_coefficients(eps, r);
    let integrand = |x: f64| {
        let mut prod = (-x * x).exp();
        for (tilt, tk) in s.tilts.iter().zip(&t) {
            prod *= tilt.cf(tk * x).map(|c| c.norm()).unwrap_or(f64::NAN);
        }
        prod
    };
    let q = quad::integrate(integrand, 0.0, s.x_max, s.opts())
        .map_err(|e| Error::Numeric(format!("cf product integral (eps = {eps}, R = {r}, t = {t:?}): {e}")))?;
    if !q.value.is_finite() {
        return Err(Error::Numeric(format!("cf product integral is not finite (t = {t:?})")));
    }
    let value = 2.0 * q.value;
    let m = s.mgf_product();
    let bound = s.mgf_product_bound();
    let pre = (1.0 - r).exp() / SQRT_PI * value;
    Ok(CfIntegral {
        epsilon: eps,
        r,
        value,
        error: 2.0 * q.error,
        intervals: q.intervals,
        t,
        x_max: s.x_max,
        mgf_product: m,
        prefactor_bound: bound,
        chain_rhs: m * pre,
        chain_rhs_loose: bound * pre,
    })
}

pub fn cf_product_integral(s: &PipelineScenario) -> Result<CfIntegral> {
    cf_product_integral_at(s, s.config.epsilon, s.config.r)
}

// ---------------------------------------------------------------------------
// q, τ and the cosine integral

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltConstants {
    /// `min_k P{|W_k| >= δ}`.
    pub q: f64,
    /// `min_{k,s} E[1-cos(sW_k) | |W_k| >= δ] / E[1-cos(sW) | |W| >= δ]`.
    pub tau: f64,
    pub q_per_k: Vec<f64>,
    pub tau_argmin_s: f64,
    pub s_grid: (f64, f64, usize),
}

/// `P{|W| >= δ}` and `s ↦ E[(1 - cos sW) 1{|W| >= δ}]` for one tilt.
struct ConditionalCosine {
    q: f64,
    atoms: Option<Vec<(f64, f64)>>,
    /// `(w, weight·g(w))` on `[0, δ]`, continuous case.
    table: Vec<(f64, f64)>,
}

impl ConditionalCosine {
    fn new(tilt: &TiltedDistribution, delta: f64) -> Result<ConditionalCosine> {
        match DiffLaw::of(tilt) {
            DiffLaw::Atoms(a) => {
                let phi = Phi::Indicator { delta, closed: true };
                let kept: Vec<(f64, f64)> = a.into_iter().filter(|&(w, _)| phi.eval(w) == 1.0).collect();
                let q = kept.iter().map(|x| x.1).sum();
                Ok(ConditionalCosine {
                    q,
                    atoms: Some(kept),
                    table: Vec::new(),
                })
            }
            DiffLaw::Density { law, lo, hi } => {
                let table = quad::composite_nodes(0.0, delta.min(hi - lo), 8)
                    .into_iter()
                    .map(|(w, wt)| DiffLaw::density(law, lo, hi, w).map(|g| (w, 2.0 * wt * g)))
                    .collect::<Result<Vec<_>>>()?;
                let q = 1.0 - table.iter().map(|x| x.1).sum::<f64>();
                Ok(ConditionalCosine { q, atoms: None, table })
            }
        }
    }

    fn moment(&self, tilt: &TiltedDistribution, s: f64) -> Result<f64> {
        if let Some(a) = &self.atoms {
            return Ok(a.iter().map(|&(w, p)| p * (1.0 - (s * w).cos())).sum());
        }
        let total = 1.0 - tilt.cf(s)?.norm_sqr();
        let inner: f64 = self.table.iter().map(|&(w, g)| g * (1.0 - (s * w).cos())).sum();
        Ok((total - inner).max(0.0))
    }
}

/// Measures `q` and `τ` on a log grid of `s` in `[1e-2, 1e2]`.
pub fn tilt_constants(s: &PipelineScenario) -> Result<TiltConstants> {
    let (s_lo, s_hi, points) = (1e-2_f64, 1e2, 81);
    let grid: Vec<f64> = (0..points)
        .map(|i| s_lo * (s_hi / s_lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    let reference_tilt = TiltedDistribution::new(s.law.clone(), 0.0)?;
    let reference = ConditionalCosine::new(&reference_tilt, s.delta)?;
    if reference.q <= 0.0 {
        return Err(Error::Domain(format!("P{{|W| >= delta}} = 0 for delta = {}", s.delta)));
    }
    let ref_moments = grid
        .iter()
        .map(|&x| reference.moment(&reference_tilt, x).map(|m| m / reference.q))
        .collect::<Result<Vec<_>>>()?;
    let per_k = s
        .tilts
        .par_iter()
        .map(|tilt| {
            let cc = ConditionalCosine::new(tilt, s.delta)?;
            let mut best = (f64::INFINITY, 0.0);
            for (&x, &r) in grid.iter().zip(&ref_moments) {
                if r <= 1e-9 {
                    continue;
                }
                let ratio = cc.moment(tilt, x)? / cc.q / r;
                if ratio < best.0 {
                    best = (ratio, x);
                }
            }
            Ok((cc.q, best))
        })
        .collect::<Result<Vec<_>>>()?;
    let q_per_k: Vec<f64> = per_k.iter().map(|x| x.0).collect();
    let q = q_per_k.iter().copied().fold(f64::INFINITY, f64::min);
    let (tau, tau_argmin_s) = per_k
        .iter()
        .map(|x| x.1)
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    Ok(TiltConstants {
        q,
        tau,
        q_per_k,
        tau_argmin_s,
        s_grid: (s_lo, s_hi, points),
    })
}

/// `∫ exp{-(qτ/2) Σ_k (1 - cos(t_k x w)) - x²} dx`.
pub fn cosine_integral(s: &PipelineScenario, eps: f64, r: f64, w: f64, q_tau: f64) -> Result<f64> {
    let t = s.t_coefficients(eps, r);
    let f = |x: f64| {
        let sum: f64 = t.iter().map(|tk| 1.0 - (tk * x * w).cos()).sum();
        (-0.5 * q_tau * sum - x * x).exp()
    };
    Ok(2.0 * quad::integrate(f, 0.0, s.x_max, s.opts())?.value)
}

/// Points in `(0, x_max)` where `dist(c x α, Zⁿ)` has a kink.
fn dist_kinks(alpha: &CoefficientVector, c: f64, x_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for &a in alpha.entries() {
        let slope = (c * a).abs();
        if slope == 0.0 {
            continue;
        }
        let top = (slope * x_max - 0.5).floor() as i64;
        out.extend((0..=top).map(|m| (m as f64 + 0.5) / slope));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// `∫ exp{-4qτ dist²(xw α/(πεR), Zⁿ)} e^{-x²} dx`.
pub fn dist_integral(s: &PipelineScenario, eps: f64, r: f64, w: f64, q_tau: f64) -> Result<f64> {
    let c = w / (PI * eps * r);
    let f = |x: f64| {
        let d = dist_to_lattice(c * x, &s.alpha);
        (-4.0 * q_tau * d * d - x * x).exp()
    };
    let kinks = dist_kinks(&s.alpha, c, s.x_max);
    let opts = QuadOpts {
        max_intervals: s.opts().max_intervals + kinks.len(),
        ..s.opts()
    };
    Ok(2.0 * quad::integrate_with_breaks(f, 0.0, s.x_max, &kinks, opts)?.value)
}

// ---------------------------------------------------------------------------
// Level sets of the lattice distance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub z: f64,
    pub w: f64,
    pub cell: f64,
    /// Connected components of `I(z) ∩ [-x_max, x_max]`.
    pub components: Vec<(f64, f64)>,
    /// Components merged while the merged span stays within the short bound.
    pub clusters: Vec<(f64, f64)>,
    pub max_component_len: f64,
    pub min_component_gap: f64,
    pub max_len: f64,
    pub min_gap: f64,
    /// `20πεRz/w`.
    pub predicted_max_len: f64,
    /// `πεR L_γ/w`.
    pub predicted_min_gap: f64,
    pub len_holds: bool,
    pub gap_holds: bool,
    /// `20z < L_γ`: the short and long alternatives of the dichotomy do not
    /// overlap. Outside this regime the length and gap claims can fail.
    pub separated: bool,
}

/// Components of `{x ∈ [lo, hi] : dist(c x α, Zⁿ) <= z}`.
///
/// The distance is `c‖α‖`-Lipschitz in `x`, so stepping by
/// `|dist - z|/(c‖α‖)` never crosses the level; `cell` is the floor step
/// and the resolution, edges are bisected to rounding.
pub fn level_components(alpha: &CoefficientVector, c: f64, z: f64, lo: f64, hi: f64, cell: f64) -> Vec<(f64, f64)> {
    let d = |x: f64| dist_to_lattice(c * x, alpha);
    let kappa = c * alpha.norm();
    let edge = |mut inside: f64, mut outside: f64| {
        for _ in 0..80 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if d(mid) <= z {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let mut out = Vec::new();
    let mut x = lo;
    let mut last_out: Option<f64> = None;
    while x <= hi {
        let v = d(x);
        if v > z {
            last_out = Some(x);
            x += ((v - z) / kappa).max(cell);
            continue;
        }
        let left = last_out.map_or(x, |o| edge(x, o));
        let right = loop {
            let v = d(x);
            let next = x + ((z - v) / kappa).max(cell);
            if next > hi {
                break hi;
            }
            if d(next) > z {
                let r = edge(x, next);
                last_out = Some(next);
                x = next;
                break r;
            }
            x = next;
        };
        out.push((left, right));
        if right >= hi {
            break;
        }
    }
    out
}

fn gaussian_mass(lo: f64, hi: f64) -> f64 {
    0.5 * SQRT_PI * (erf(hi) - erf(lo))
}

/// `μ{I(z)}` for the Gaussian weight `e^{-x²}dx`, truncated at `x_max`.
pub fn level_measure(components: &[(f64, f64)]) -> f64 {
    components.iter().map(|&(a, b)| gaussian_mass(a, b)).sum()
}

pub fn interval_structure(s: &PipelineScenario, z: f64, w: f64) -> Result<IntervalReport> {
    interval_structure_at(s, s.config.epsilon, s.config.r, z, w)
}

pub fn interval_structure_at(s: &PipelineScenario, eps: f64, r: f64, z: f64, w: f64) -> Result<IntervalReport> {
    if !(z >= 0.0 && z <= 0.5 * s.config.gamma * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("z must lie in [0, gamma/2], got {z}")));
    }
    if !(w >= s.delta * (1.0 - 1e-12)) || !w.is_finite() {
        return Err(Error::Domain(format!("w must be >= delta = {}, got {w}", s.delta)));
    }
    let cell = s.config.quadrature.cell;
    let predicted_max_len = 20.0 * PI * eps * r * z / w;
    let predicted_min_gap = PI * eps * r * s.lcd.theta_star / w;
    if z > 0.0 && cell > 0.1 * predicted_max_len {
        return Err(Error::Resolution(format!(
            "cell {cell} is too coarse for predicted component length {predicted_max_len}"
        )));
    }
    let c = w / (PI * eps * r);
    let components = if z == 0.0 {
        // exact lattice hits only: thicken to the resolution, then shrink to points
        level_components(&s.alpha, c, 2.0 * c * cell, -s.x_max, s.x_max, cell)
            .into_iter()
            .map(|(a, b)| (0.5 * (a + b), 0.5 * (a + b)))
            .collect()
    } else {
        level_components(&s.alpha, c, z, -s.x_max, s.x_max, cell)
    };
    let short = predicted_max_len + cell;
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in &components {
        match clusters.last_mut() {
            Some(last) if b - last.0 <= short => last.1 = b,
            _ => clusters.push((a, b)),
        }
    }
    let stats = |v: &[(f64, f64)]| {
        let max_len = v.iter().fold(0.0f64, |m, &(a, b)| m.max(b - a));
        let min_gap = v.windows(2).fold(f64::INFINITY, |m, p| m.min(p[1].0 - p[0].1));
        (max_len, min_gap)
    };
    let (max_component_len, min_component_gap) = stats(&components);
    let (max_len, min_gap) = stats(&clusters);
    Ok(IntervalReport {
        z,
        w,
        cell,
        separated: 20.0 * z < s.lcd.theta_star,
        len_holds: max_len <= predicted_max_len + cell,
        gap_holds: min_gap >= predicted_min_gap - cell,
        components,
        clusters,
        max_component_len,
        min_component_gap,
        max_len,
        min_gap,
        predicted_max_len,
        predicted_min_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuBound {
    pub z: f64,
    pub w: f64,
    pub mu: f64,
    /// `70z(εR/w + 1/L_γ)` for `z <= γ/2`, else `√π`.
    pub bound: f64,
    pub holds: bool,
}

pub fn mu_measure_bound(s: &PipelineScenario, z: f64, w: f64) -> Result<MuBound> {
    let (eps, r) = (s.config.epsilon, s.config.r);
    if z > 0.5 * s.config.gamma * (1.0 + 1e-12) {
        let c = w / (PI * eps * r);
        let mu = level_measure(&level_components(&s.alpha, c, z, -s.x_max, s.x_max, s.config.quadrature.cell));
        return Ok(MuBound {
            z,
            w,
            mu,
            bound: SQRT_PI,
            holds: mu <= SQRT_PI,
        });
    }
    let rep = interval_structure(s, z, w)?;
    let mu = level_measure(&rep.components);
    let bound = 70.0 * z * (eps * r / w + 1.0 / s.lcd.theta_star);
    Ok(MuBound {
        z,
        w,
        mu,
        bound,
        holds: mu <= bound + EXACT_TOL && mu <= SQRT_PI,
    })
}

/// The fixed-`w` chain after the cosine bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedWChain {
    pub w: f64,
    /// `∫ exp{-(qτ/2)Σ(1-cos(t_k x w)) - x²} dx`.
    pub cosine: f64,
    /// `∫ exp{-4qτ dist²} e^{-x²} dx`.
    pub distance: f64,
    /// `8qτ ∫ μ{I(z)} z e^{-4qτz²} dz`.
    pub layer_cake: f64,
    /// `70(εR/w + 1/L_γ) ∫_0^{γ/2} 8qτ z² e^{-4qτz²} dz + √π e^{-qτγ²}`.
    pub final_bound: f64,
    /// The same without the `√π` on the tail term.
    pub final_bound_printed: f64,
}

pub fn fixed_w_chain(s: &PipelineScenario, w: f64, q_tau: f64) -> Result<FixedWChain> {
    let (eps, r, gamma) = (s.config.epsilon, s.config.r, s.config.gamma);
    let cosine = cosine_integral(s, eps, r, w, q_tau)?;
    let distance = dist_integral(s, eps, r, w, q_tau)?;
    let c = w / (PI * eps * r);
    let cell = s.config.quadrature.cell;
    let kappa = 4.0 * q_tau;
    // dist never exceeds √n/2, beyond that μ{I(z)} is the whole window
    let z_top = 0.5 * (s.n() as f64).sqrt() * (1.0 + 1e-9);
    let whole = gaussian_mass(-s.x_max, s.x_max);
    let mu = |z: f64| level_measure(&level_components(&s.alpha, c, z, -s.x_max, s.x_max, cell));
    let body = quad::integrate(
        |z| mu(z) * 2.0 * kappa * z * (-kappa * z * z).exp(),
        0.0,
        z_top,
        QuadOpts {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_intervals: 400,
        },
    )?;
    let layer_cake = body.value + whole * (-kappa * z_top * z_top).exp();
    let half = 0.5 * gamma;
    let moment = quad::integrate(|z| 2.0 * kappa * z * z * (-kappa * z * z).exp(), 0.0, half, QuadOpts::default())?.value;
    let head = 70.0 * (eps * r / w + 1.0 / s.lcd.theta_star) * moment;
    let tail = (-kappa * half * half).exp();
    Ok(FixedWChain {
        w,
        cosine,
        distance,
        layer_cake,
        final_bound: head + SQRT_PI * tail,
        final_bound_printed: head + tail,
    })
}

// ---------------------------------------------------------------------------
// Dyadic decomposition and assembly

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicPiece {
    pub k: u32,
    /// `R = 2^k`.
    #[serde(rename = "R")]
    pub r: f64,
    /// `P{|U| < 2^{k+1}ε, 2^k <= |V| <= 2^{k+1}}`.
    pub estimate: ProbEstimate,
    /// `2 min(1, chain bound at (2ε, 2^k))`.
    pub chain_bound: f64,
    /// `2e^{-R}(2εR + 1/L_γ + e^{-cγ²})`, the shape of the claimed bound.
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport {
    /// `P{|U| <= ε|V|}`.
    pub whole: ProbEstimate,
    /// `P{|U| < ε}`.
    pub small: ProbEstimate,
    pub pieces: Vec<DyadicPiece>,
    pub k_max: u32,
    /// `P{|V| >= 2^{k_max+1}}`.
    pub residual: ProbEstimate,
    /// Two-sided tail bound at `2^{k_max+1}`.
    pub residual_bound: f64,
    /// Sample-wise `whole <= small + Σ pieces + residual`.
    pub pathwise_holds: bool,
    /// Smallest `C` with `piece <= C·shape` for every piece.
    pub calibrated_c: f64,
    /// `P{|U| < ε}/(ε + 1/L_γ + e^{-cγ²})`.
    pub calibrated_small_c: f64,
}

/// One-sided tail bound for `V` with parameters `(ν, 1)`; doubled for `|V|`.
pub fn subexp_tail(u: f64, nu: f64) -> f64 {
    if u <= nu * nu {
        (-u * u / (2.0 * nu * nu)).exp()
    } else {
        (-0.5 * u).exp()
    }
}

fn k_max_for(nu: f64) -> u32 {
    (0..64u32)
        .find(|&k| 2.0 * subexp_tail(2f64.powi(k as i32 + 1), nu) < 1e-12)
        .unwrap_or(63)
}

#[derive(Default, Clone)]
struct DyadicCounts {
    whole: u64,
    small: u64,
    pieces: Vec<u64>,
    residual: u64,
    violations: u64,
}

impl DyadicCounts {
    fn merge(mut self, o: DyadicCounts) -> DyadicCounts {
        if self.pieces.is_empty() {
            self.pieces = vec![0; o.pieces.len()];
        }
        self.whole += o.whole;
        self.small += o.small;
        for (a, b) in self.pieces.iter_mut().zip(&o.pieces) {
            *a += b;
        }
        self.residual += o.residual;
        self.violations += o.violations;
        self
    }
}

pub fn dyadic_decomposition_check(s: &PipelineScenario) -> Result<DyadicReport> {
    let (eps, gamma) = (s.config.epsilon, s.config.gamma);
    let k_max = k_max_for(s.nu);
    let n = s.config.samples;
    let seed = derive_seed(s.config.seed, 0xd1ad);
    let (a, b) = (s.alpha.entries(), s.beta.entries());
    let law = &s.law;
    let counts = rng::chunked(
        n,
        seed,
        |rng: &mut Rng, m| {
            let mut c = DyadicCounts {
                pieces: vec![0; k_max as usize + 1],
                ..Default::default()
            };
            let mut x = vec![0.0; a.len()];
            for _ in 0..m {
                for xi in x.iter_mut() {
                    *xi = law.draw(rng);
                }
                let u: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>().abs();
                let v: f64 = b.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>().abs();
                let whole = u <= eps * v;
                let mut covered = u < eps;
                c.small += covered as u64;
                for k in 0..=k_max {
                    let lo = 2f64.powi(k as i32);
                    if u < 2.0 * lo * eps && lo <= v && v <= 2.0 * lo {
                        c.pieces[k as usize] += 1;
                        covered = true;
                    }
                }
                if v >= 2f64.powi(k_max as i32 + 1) {
                    c.residual += 1;
                    covered = true;
                }
                c.whole += whole as u64;
                c.violations += (whole && !covered) as u64;
            }
            c
        },
        DyadicCounts::merge,
        DyadicCounts::default(),
    );
    let ci = s.config.ci_level;
    let inv_l = 1.0 / s.lcd.theta_star;
    let g = (-s.config.c * gamma * gamma).exp();
    let mut pieces = Vec::with_capacity(k_max as usize + 1);
    let mut calibrated_c: f64 = 0.0;
    for k in 0..=k_max {
        let r = 2f64.powi(k as i32);
        let chain = cf_product_integral_at(s, 2.0 * eps, r)?;
        let estimate = from_counts(counts.pieces[k as usize], n, seed, ci);
        let shape = 2.0 * (-r).exp() * (2.0 * eps * r + inv_l + g);
        calibrated_c = calibrated_c.max(estimate.value / shape);
        pieces.push(DyadicPiece {
            k,
            r,
            estimate,
            chain_bound: 2.0 * chain.chain_rhs.min(1.0),
            shape,
        });
    }
    let small = from_counts(counts.small, n, seed, ci);
    Ok(DyadicReport {
        whole: from_counts(counts.whole, n, seed, ci),
        calibrated_small_c: small.value / (eps + inv_l + g),
        small,
        pieces,
        k_max,
        residual: from_counts(counts.residual, n, seed, ci),
        residual_bound: 2.0 * subexp_tail(2f64.powi(k_max as i32 + 1), s.nu),
        pathwise_holds: counts.violations == 0,
        calibrated_c,
    })
}

/// Small-ball term plus the summed piece bounds, against the direct estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    /// `C_p(ε + 1/L_γ + e^{-c_p γ²})`.
    pub small_ball: f64,
    pub pieces: f64,
    pub residual: f64,
    pub assembled: f64,
    /// `P{|U| <= ε|V|}` from the dyadic run.
    pub direct: ProbEstimate,
    /// `assembled / (ε + 1/L_γ + e^{-cγ²})`: the constant this run exhibits.
    pub implied_c: f64,
    pub dominates: bool,
}

pub fn end_to_end(s: &PipelineScenario, dyadic: &DyadicReport) -> Result<EndToEnd> {
    let constants = Constants::default().merged(&s.config.constants);
    let eps = s.config.epsilon;
    let gamma = s.config.gamma;
    let rv = rv_smallball_bound(eps, s.lcd.theta_star, gamma, constants.get("C_p")?, constants.get("c_p")?)?;
    let pieces: f64 = dyadic.pieces.iter().map(|p| p.chain_bound).sum();
    let assembled = rv.rhs + pieces + dyadic.residual_bound;
    let form = eps + 1.0 / s.lcd.theta_star + (-s.config.c * gamma * gamma).exp();
    Ok(EndToEnd {
        small_ball: rv.rhs,
        pieces,
        residual: dyadic.residual_bound,
        assembled,
        direct: dyadic.whole,
        implied_c: assembled / form,
        dominates: dyadic.whole.value <= assembled,
    })
}

// ---------------------------------------------------------------------------
// Full run

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub scenario: ScenarioSummary,
    pub tilt_constants: TiltConstants,
    pub cf_integral: CfIntegral,
    /// `P{|U| < εR, V > R}` by Monte Carlo.
    pub chain_event: ProbEstimate,
    /// `(w, cosine integral)` on the sup grid over `|w| >= δ`.
    pub sup_grid: Vec<(f64, f64)>,
    pub fixed_w: Vec<FixedWChain>,
    pub intervals: Vec<IntervalReport>,
    pub mu: Vec<MuBound>,
    pub dyadic: DyadicReport,
    pub end_to_end: EndToEnd,
    pub checks: Vec<StepCheck>,
    pub passed: bool,
}

/// Grid for the supremum over `|w| >= δ`: the atoms of `|W|` for discrete
/// laws, otherwise 48 points up to twice the `1 - 1e-7` quantile.
fn w_grid(s: &PipelineScenario) -> Result<Vec<f64>> {
    let mut grid: Vec<f64> = if let Some(atoms) = s.law.atoms() {
        let mut v: Vec<f64> = atoms
            .iter()
            .flat_map(|x| atoms.iter().map(move |y| (x.0 - y.0).abs()))
            .filter(|&w| w >= s.delta * (1.0 - 1e-12))
            .collect();
        v.push(s.delta);
        v
    } else {
        let top = 2.0 * quantile(&s.law, 1.0 - 1e-7)?;
        (0..48).map(|i| s.delta + (top - s.delta) * i as f64 / 47.0).collect()
    };
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    Ok(grid)
}

pub fn run_pipeline(s: &PipelineScenario) -> Result<PipelineReport> {
    let (eps, r, gamma) = (s.config.epsilon, s.config.r, s.config.gamma);
    let mut checks = Vec::new();

    let slack = cosine_dist_check(100_001)?;
    checks.push(StepCheck::lower("cosine_dist", slack, 0.0, EXACT_TOL).with_note("min over [-4π, 4π] of (1-cos θ) - 8 dist²(θ/2π, Z)"));
    let t_grid: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
    let gi = gaussian_identity_check(&t_grid)?;
    checks.push(StepCheck::upper("gaussian_identity", gi.max_abs_error, 1e-10, 0.0));
    let at5 = gi.points.last().map_or(0.0, |p| p.rel_error);
    checks.push(StepCheck::upper("gaussian_identity_rel_t5", at5, 1e-6, 0.0));

    // tilts actually used: the extreme coordinate of β
    let t_big = s.beta.max_abs();
    let tc = tilting_check(
        &s.spec,
        t_big,
        Phi::Indicator {
            delta: s.delta,
            closed: false,
        },
    )?;
    checks.push(
        StepCheck::upper("tilting", tc.lhs, tc.rhs, comparison_tol(&s.law)).with_note(format!(
            "t = {t_big}; factor M(t)^2; printed factor M(t) gives rhs {} (holds: {})",
            tc.rhs_printed, tc.printed_holds
        )),
    );
    let cc = corollary_check(&s.spec, t_big, s.delta)?;
    checks.push(
        StepCheck::lower("tilting_corollary", cc.lhs, cc.rhs, comparison_tol(&s.law)).with_note(format!(
            "P{{|W_t| >= δ}} >= P{{|W| >= δ}}/M(t)^2; printed 1/M(t) gives rhs {} (holds: {})",
            cc.rhs_printed, cc.printed_holds
        )),
    );

    let cf = cf_product_integral(s)?;
    checks.push(StepCheck::upper("cf_integral_range", cf.value, SQRT_PI * cf.prefactor_bound, 1e-9));
    checks.push(StepCheck::upper("mgf_product", cf.mgf_product, cf.prefactor_bound, 1e-12));
    let (a, b) = (s.alpha.entries().to_vec(), s.beta.entries().to_vec());
    let chain_event = mc_event(
        &s.spec,
        s.n(),
        s.config.samples,
        derive_seed(s.config.seed, 0xc4a1),
        s.config.ci_level,
        |x| {
            let u: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            let v: f64 = b.iter().zip(x).map(|(p, q)| p * q).sum();
            u.abs() < eps * r && v > r
        },
    )?;
    checks.push(
        StepCheck::upper("cf_chain", chain_event.ci_lo, cf.chain_rhs, 0.0)
            .with_note(format!("MC value {} (lhs is the lower confidence limit)", chain_event.value)),
    );

    let tcs = tilt_constants(s)?;
    let q_tau = tcs.q * tcs.tau;
    let grid = w_grid(s)?;
    let sup_grid = grid
        .par_iter()
        .map(|&w| cosine_integral(s, eps, r, w, q_tau).map(|v| (w, v)))
        .collect::<Result<Vec<_>>>()?;
    let (w_star, sup) = sup_grid.iter().copied().fold((s.delta, 0.0), |m, p| if p.1 > m.1 { p } else { m });
    checks.push(
        StepCheck::upper("cosine_sup", cf.value, sup, 1e-9)
            .with_note(format!("sup over {} grid points of |w| >= δ, attained at w = {w_star}", grid.len())),
    );

    let mut ws = vec![s.delta, w_star];
    ws.dedup();
    let fixed_w = ws.par_iter().map(|&w| fixed_w_chain(s, w, q_tau)).collect::<Result<Vec<_>>>()?;
    for f in &fixed_w {
        checks.push(StepCheck::upper(
            format!("cosine_to_distance(w={})", f.w),
            f.cosine,
            f.distance,
            1e-9,
        ));
        checks.push(StepCheck::equal(
            format!("layer_cake(w={})", f.w),
            f.layer_cake,
            f.distance,
            1e-6 * f.distance.max(1.0),
        ));
        checks.push(
            StepCheck::upper(format!("level_set_bound(w={})", f.w), f.layer_cake, f.final_bound, 1e-9)
                .with_note(format!("without √π on the tail term: {}", f.final_bound_printed)),
        );
    }

    let zs = [0.125 * gamma, 0.25 * gamma, 0.5 * gamma];
    let mut intervals = Vec::new();
    let mut mu = Vec::new();
    for &w in &ws {
        for &z in &zs {
            let rep = interval_structure(s, z, w)?;
            let regime = if rep.separated {
                ""
            } else {
                "20z >= L_gamma: short and long scales overlap"
            };
            checks.push(
                StepCheck::upper(
                    format!("interval_length(z={z},w={w})"),
                    rep.max_len,
                    rep.predicted_max_len + rep.cell,
                    0.0,
                )
                .with_note(regime),
            );
            if rep.clusters.len() > 1 {
                checks.push(
                    StepCheck::lower(
                        format!("interval_gap(z={z},w={w})"),
                        rep.min_gap,
                        rep.predicted_min_gap - rep.cell,
                        0.0,
                    )
                    .with_note(regime),
                );
            }
            intervals.push(rep);
            let m = mu_measure_bound(s, z, w)?;
            checks.push(StepCheck::upper(format!("mu_bound(z={z},w={w})"), m.mu, m.bound, EXACT_TOL));
            mu.push(m);
        }
    }

    let dyadic = dyadic_decomposition_check(s)?;
    let total = dyadic.small.value + dyadic.pieces.iter().map(|p| p.estimate.value).sum::<f64>() + dyadic.residual.value;
    checks.push(
        StepCheck::upper("dyadic_split", dyadic.whole.value, total, 0.0)
            .with_note(format!("sample-wise inclusion holds: {}", dyadic.pathwise_holds)),
    );
    for p in &dyadic.pieces {
        checks.push(StepCheck::upper(
            format!("dyadic_piece(k={})", p.k),
            p.estimate.ci_lo,
            p.chain_bound,
            0.0,
        ));
        checks.push(StepCheck::upper(
            format!("dyadic_piece_calibrated(k={})", p.k),
            p.estimate.value,
            dyadic.calibrated_c * p.shape,
            1e-15,
        ));
    }
    checks.push(StepCheck::upper(
        "dyadic_residual",
        dyadic.residual.ci_lo,
        dyadic.residual_bound,
        0.0,
    ));
    let e2e = end_to_end(s, &dyadic)?;
    checks.push(StepCheck::lower("end_to_end", e2e.assembled, e2e.direct.value, 0.0));

    let passed = checks.iter().all(|c| c.pass) && dyadic.pathwise_holds;
    Ok(PipelineReport {
        scenario: s.summary(),
        tilt_constants: tcs,
        cf_integral: cf,
        chain_event,
        sup_grid,
        fixed_w,
        intervals,
        mu,
        dyadic,
        end_to_end: e2e,
        checks,
        passed,
    })
}
