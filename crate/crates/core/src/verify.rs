//! Built-in scenario catalogs, constant calibration and the invariant suite
//! run by `anticonc verify`.

use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bernstein_tail, theorem_bound, BoundReport, Constants, TheoremId};
use crate::distributions::{DistributionSpec, Law, SubExpParams};
use crate::error::{Error, Result};
use crate::estimators::{self, ProbEstimate, DEFAULT_ENUM_LIMIT};
use crate::lcd::{dist_to_lattice, lcd, lcd_normalized, CoefficientVector, LcdResult, DEFAULT_TOL};
use crate::logconcave::{verify_levelset, LevelSetReport, PlanarDensity, PlanarGrid};
use crate::rng;
use crate::sodin::{run_pipeline, PipelineScenario, ScenarioConfig, StepCheck};
use crate::stress::{self, RatioSettings, SozeTable};

pub const DOMINANCE_CATALOG: [(&str, &str); 13] = [
    ("01-rademacher-pair", include_str!("../catalog/dominance/01-rademacher-pair.toml")),
    (
        "02-rademacher-n4-ones",
        include_str!("../catalog/dominance/02-rademacher-n4-ones.toml"),
    ),
    (
        "03-rademacher-n8-generic",
        include_str!("../catalog/dominance/03-rademacher-n8-generic.toml"),
    ),
    (
        "04-rademacher-n12-generic",
        include_str!("../catalog/dominance/04-rademacher-n12-generic.toml"),
    ),
    (
        "05-rademacher-n16-ones",
        include_str!("../catalog/dominance/05-rademacher-n16-ones.toml"),
    ),
    (
        "06-rademacher-n16-generic",
        include_str!("../catalog/dominance/06-rademacher-n16-generic.toml"),
    ),
    (
        "07-gaussian-n4-generic",
        include_str!("../catalog/dominance/07-gaussian-n4-generic.toml"),
    ),
    (
        "08-gaussian-n8-generic",
        include_str!("../catalog/dominance/08-gaussian-n8-generic.toml"),
    ),
    (
        "09-laplace-n4-generic",
        include_str!("../catalog/dominance/09-laplace-n4-generic.toml"),
    ),
    (
        "10-laplace-n8-generic",
        include_str!("../catalog/dominance/10-laplace-n8-generic.toml"),
    ),
    ("11-laplace-n8-ones", include_str!("../catalog/dominance/11-laplace-n8-ones.toml")),
    (
        "12-uniform-n6-generic",
        include_str!("../catalog/dominance/12-uniform-n6-generic.toml"),
    ),
    ("13-uniform-n6-ones", include_str!("../catalog/dominance/13-uniform-n6-ones.toml")),
];

pub const SODIN_CATALOG: [(&str, &str); 10] = [
    (
        "01-rademacher-n4-generic",
        include_str!("../catalog/sodin/01-rademacher-n4-generic.toml"),
    ),
    ("02-rademacher-n4-ones", include_str!("../catalog/sodin/02-rademacher-n4-ones.toml")),
    (
        "03-rademacher-n8-generic",
        include_str!("../catalog/sodin/03-rademacher-n8-generic.toml"),
    ),
    (
        "04-rademacher-n16-generic",
        include_str!("../catalog/sodin/04-rademacher-n16-generic.toml"),
    ),
    (
        "05-rademacher-n16-ones",
        include_str!("../catalog/sodin/05-rademacher-n16-ones.toml"),
    ),
    ("06-laplace-n4-generic", include_str!("../catalog/sodin/06-laplace-n4-generic.toml")),
    ("07-laplace-n8-generic", include_str!("../catalog/sodin/07-laplace-n8-generic.toml")),
    ("08-laplace-n8-ones", include_str!("../catalog/sodin/08-laplace-n8-ones.toml")),
    (
        "09-laplace-n16-generic",
        include_str!("../catalog/sodin/09-laplace-n16-generic.toml"),
    ),
    ("10-laplace-n16-ones", include_str!("../catalog/sodin/10-laplace-n16-ones.toml")),
];

/// Theorems swept by the dominance check.
pub const DOMINANCE_THEOREMS: [TheoremId; 4] = [
    TheoremId::Subgaussian,
    TheoremId::Subexponential,
    TheoremId::Logconcave,
    TheoremId::Sodin,
];

/// A fixed `(law, α, β)` with its estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominanceScenario {
    pub name: String,
    pub spec: DistributionSpec,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
    /// `None` means `√n`.
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_ci() -> f64 {
    0.99
}

impl DominanceScenario {
    pub fn from_toml_str(text: &str) -> Result<DominanceScenario> {
        let s: DominanceScenario =
            toml::from_str(text).map_err(|e| Error::config(crate::distributions::toml_error_path(&e), e.message().to_string()))?;
        s.spec.validate()?;
        if s.alpha.len() != s.beta.len() {
            return Err(Error::config(
                "beta",
                format!("has {} entries, alpha has {}", s.beta.len(), s.alpha.len()),
            ));
        }
        CoefficientVector::new(s.alpha.clone()).map_err(|e| Error::config("alpha", e.to_string()))?;
        Ok(s)
    }

    pub fn vectors(&self) -> Result<(CoefficientVector, CoefficientVector)> {
        Ok((
            CoefficientVector::new(self.alpha.clone())?,
            CoefficientVector::new_allow_zero(self.beta.clone())?,
        ))
    }
}

pub fn dominance_catalog() -> Result<Vec<DominanceScenario>> {
    DOMINANCE_CATALOG
        .iter()
        .map(|(name, text)| DominanceScenario::from_toml_str(text).map_err(|e| tag(name, e)))
        .collect()
}

pub fn sodin_catalog() -> Result<Vec<ScenarioConfig>> {
    SODIN_CATALOG
        .iter()
        .map(|(name, text)| ScenarioConfig::from_toml_str(text).map_err(|e| tag(name, e)))
        .collect()
}

fn tag(file: &str, e: Error) -> Error {
    match e {
        Error::Config { path, reason } => Error::config(format!("{file}:{path}"), reason),
        other => other,
    }
}

/// Whether the hypotheses of `theorem` hold for the law (from closed-form
/// knowledge of the family).
pub fn applicable(theorem: TheoremId, spec: &DistributionSpec, law: &Law) -> bool {
    let centered = law.mean().abs() <= 1e-12;
    let (lo, hi) = law.support();
    match theorem {
        TheoremId::Conjecture => true,
        TheoremId::Gaussian => matches!(spec, DistributionSpec::Gaussian { .. }),
        TheoremId::Subgaussian => centered && ((lo.is_finite() && hi.is_finite()) || matches!(spec, DistributionSpec::Gaussian { .. })),
        TheoremId::Subexponential => centered && law.mgf_radius() > 0.0,
        TheoremId::Logconcave => law.has_density() && law.is_log_concave() && law.is_symmetric(),
        TheoremId::Sodin => law.is_symmetric() && law.mgf_radius() > 0.0,
        _ => false,
    }
}

/// Estimate of one catalog scenario with its LCD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEstimate {
    pub name: String,
    pub family: String,
    pub n: usize,
    pub norm_ratio: f64,
    pub estimate: ProbEstimate,
    pub lcd: LcdResult,
}

/// Estimates every scenario; `samples` overrides the per-file sample count.
pub fn estimate_scenarios(scenarios: &[DominanceScenario], samples: Option<u64>, run_seed: u64) -> Result<Vec<ScenarioEstimate>> {
    scenarios
        .iter()
        .map(|s| {
            let (a, b) = s.vectors()?;
            let n_samples = samples.unwrap_or(s.samples);
            let seed = rng::derive_seed(run_seed, s.seed);
            let est = estimators::probability(&a, &b, &s.spec, DEFAULT_ENUM_LIMIT, n_samples, seed, s.ci_level)?;
            let gamma = s.gamma.unwrap_or_else(|| crate::bounds::default_gamma(a.len()));
            Ok(ScenarioEstimate {
                name: s.name.clone(),
                family: s.spec.family_name().to_string(),
                n: a.len(),
                norm_ratio: b.norm() / a.norm(),
                estimate: est,
                lcd: lcd_normalized(&a, gamma)?,
            })
        })
        .collect()
}

/// Constants with every scale constant at 1.
pub fn unit_constants() -> Constants {
    Constants::default().with("C", 1.0).with("C_conj", 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub theorem_id: TheoremId,
    pub constant: String,
    /// Smallest value with `ci_hi <= rhs` on every applicable scenario.
    pub smallest_passing: f64,
    pub binding_scenario: Option<String>,
    pub scenarios: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub scenario: String,
    pub theorem_id: TheoremId,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub calibration: Vec<CalibrationEntry>,
    pub constants: Constants,
    pub rows: Vec<DominanceRow>,
    pub passed: bool,
}

/// A bound evaluated from a scenario estimate (the LCD is not recomputed).
fn scenario_bound(theorem: TheoremId, s: &ScenarioEstimate, constants: &Constants) -> Result<BoundReport> {
    if theorem == TheoremId::Gaussian {
        return crate::bounds::theorem_rhs(theorem, s.norm_ratio, 0.0, s.lcd.gamma, constants);
    }
    let mut r = crate::bounds::theorem_rhs(theorem, s.norm_ratio, s.lcd.reciprocal(), s.lcd.gamma, constants)?;
    r.terms.entry("lcd".into()).or_insert(s.lcd.theta_star);
    Ok(r)
}

/// Smallest scale constant for `theorem` over `samples`, the point where
/// `ci_hi = rhs` on the binding scenario, rounded up to a passing float.
pub fn calibrate(theorem: TheoremId, samples: &[(&ScenarioEstimate, f64)]) -> Result<CalibrationEntry> {
    let name = theorem
        .scale_constant()
        .ok_or_else(|| Error::Domain(format!("{} has no scale constant", theorem.name())))?;
    let base = unit_constants();
    let mut best = 0.0;
    let mut binding = None;
    for (s, lhs) in samples {
        let bound = scenario_bound(theorem, s, &base)?;
        if let Some(c) = bound.required_scale(*lhs) {
            if c > best {
                best = c;
                binding = Some(s.name.clone());
            }
        }
    }
    // multiplication may round below the binding lhs
    for (s, lhs) in samples {
        loop {
            let rhs = scenario_bound(theorem, s, &base.clone().with(name, best))?.rhs;
            if rhs >= *lhs || !best.is_finite() {
                break;
            }
            best = best.next_up();
        }
    }
    Ok(CalibrationEntry {
        theorem_id: theorem,
        constant: name.to_string(),
        smallest_passing: best,
        binding_scenario: binding,
        scenarios: samples.len(),
    })
}

/// Calibrates each theorem's constant on the applicable scenarios, then
/// checks `ci_hi <= rhs` with the calibrated constants; the Gaussian bound
/// is checked with its fixed constant 2.
pub fn dominance(scenarios: &[DominanceScenario], estimates: &[ScenarioEstimate], theorems: &[TheoremId]) -> Result<DominanceReport> {
    let mut calibration = Vec::new();
    let mut rows = Vec::new();
    let mut constants = unit_constants();
    let laws: Vec<Law> = scenarios.iter().map(|s| s.spec.law()).collect::<Result<_>>()?;
    let mut all = theorems.to_vec();
    all.push(TheoremId::Gaussian);
    for &t in &all {
        let used: Vec<(&ScenarioEstimate, f64)> = scenarios
            .iter()
            .zip(&laws)
            .zip(estimates)
            .filter(|((s, law), _)| applicable(t, &s.spec, law))
            .map(|(_, e)| (e, e.estimate.ci_hi))
            .collect();
        let mut cons = constants.clone();
        if t.scale_constant().is_some() {
            let entry = calibrate(t, &used)?;
            cons = cons.with(&entry.constant, entry.smallest_passing);
            // C_prime is shared by three theorems; keep the per-theorem value in the rows
            constants = constants.with(&format!("{}[{}]", entry.constant, t.name()), entry.smallest_passing);
            calibration.push(entry);
        }
        for (e, lhs) in used {
            let b = scenario_bound(t, e, &cons)?;
            rows.push(DominanceRow {
                scenario: e.name.clone(),
                theorem_id: t,
                lhs,
                rhs: b.rhs,
                ratio: stress::divide(lhs, b.rhs),
                pass: lhs <= b.rhs,
                vacuous: b.vacuous,
            });
        }
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(DominanceReport {
        calibration,
        constants,
        rows,
        passed,
    })
}

/// `C(n, n/2)/2ⁿ`, the atom of a symmetric Rademacher sum with equal weights.
pub fn central_atom(n: usize) -> f64 {
    // exp of log-binomial keeps large n finite
    let mut lg = 0.0;
    for k in 1..=n / 2 {
        lg += ((n / 2 + k) as f64).ln() - (k as f64).ln();
    }
    if n % 2 == 1 {
        return 0.0;
    }
    (lg - n as f64 * std::f64::consts::LN_2).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityRow {
    pub n: usize,
    pub norm_ratio: f64,
    pub exact: f64,
    pub atom: f64,
    /// `2‖β‖/‖α‖`.
    pub ratio_only_rhs: f64,
    pub ratio_only_violated: bool,
    /// `C_conj(‖β‖/‖α‖ + 1/LCD)` with the calibrated constant.
    pub with_lcd_rhs: f64,
    pub with_lcd_holds: bool,
    /// Constant the ratio-only form would need.
    pub required_c_without_lcd: f64,
    pub lcd: LcdResult,
}

/// `α = 1ⁿ/√n`, `β = ratio·e_1`, Rademacher coordinates, exact enumeration.
pub fn necessity_case(n: usize, ratio: f64) -> Result<(CoefficientVector, CoefficientVector, ProbEstimate, LcdResult)> {
    let alpha = CoefficientVector::ones(n).normalized()?;
    let beta = CoefficientVector::basis(n, 0).scaled(ratio);
    let est = estimators::exact_probability(&alpha, &beta, &DistributionSpec::Rademacher, DEFAULT_ENUM_LIMIT)?;
    let l = lcd_normalized(&alpha, crate::bounds::default_gamma(n))?;
    Ok((alpha, beta, est, l))
}

pub fn necessity_rows(ns: &[usize], ratio: f64, c_conj: f64) -> Result<Vec<NecessityRow>> {
    ns.iter()
        .map(|&n| {
            let (a, b, est, l) = necessity_case(n, ratio)?;
            let r = b.norm() / a.norm();
            let with = c_conj * (r + l.reciprocal());
            Ok(NecessityRow {
                n,
                norm_ratio: r,
                exact: est.value,
                atom: central_atom(n),
                ratio_only_rhs: 2.0 * r,
                ratio_only_violated: est.value > 2.0 * r,
                with_lcd_rhs: with,
                with_lcd_holds: est.value <= with,
                required_c_without_lcd: est.value / r,
                lcd: l,
            })
        })
        .collect()
}

/// Conjecture constant on the dominance estimates together with the
/// `α = 1ⁿ/√n` cases.
pub fn calibrate_conjecture(estimates: &[ScenarioEstimate], necessity_ns: &[usize], ratio: f64) -> Result<CalibrationEntry> {
    let mut extra = Vec::new();
    for &n in necessity_ns {
        let (a, b, est, l) = necessity_case(n, ratio)?;
        extra.push(ScenarioEstimate {
            name: format!("ones-n{n}"),
            family: "rademacher".into(),
            n,
            norm_ratio: b.norm() / a.norm(),
            estimate: est,
            lcd: l,
        });
    }
    let used: Vec<(&ScenarioEstimate, f64)> = estimates.iter().chain(extra.iter()).map(|e| (e, e.estimate.ci_hi)).collect();
    calibrate(TheoremId::Conjecture, &used)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub n: usize,
    pub norm_ratio: f64,
    pub estimate: ProbEstimate,
    /// `(2/π) arctan(‖β‖/‖α‖)`.
    pub exact: f64,
    pub z_score: f64,
    pub within_4se: bool,
    pub below_bound: bool,
}

/// Random orthogonal pairs `(α, β)` with `‖α‖ = 1` and the given ratios,
/// cycled over `count` instances of dimension 2 to 8.
pub fn gaussian_exactness(count: usize, ratios: &[f64], samples: u64, seed: u64) -> Result<Vec<GaussianRow>> {
    let mut rng = rng::stream(seed, u64::MAX);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let n = rng.random_range(2..=8usize);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha = CoefficientVector::new(a)?.normalized()?;
        let (_, g) = crate::bounds::orthogonal_reduce(&alpha, &CoefficientVector::new_allow_zero(b)?)?;
        let r = ratios[i % ratios.len()];
        let beta = g.normalized()?.scaled(r);
        cases.push((alpha, beta, rng::derive_seed(seed, i as u64)));
    }
    let spec = DistributionSpec::gaussian(1.0);
    cases
        .into_iter()
        .map(|(alpha, beta, s)| {
            let est = estimators::mc_probability(&alpha, &beta, &spec, samples, s, 0.99)?;
            let r = beta.norm() / alpha.norm();
            let exact = 2.0 / PI * r.atan();
            let se = (exact * (1.0 - exact) / samples as f64).sqrt();
            let z = (est.value - exact) / se;
            Ok(GaussianRow {
                n: alpha.len(),
                norm_ratio: r,
                estimate: est,
                exact,
                z_score: z,
                within_4se: z.abs() <= 4.0,
                below_bound: est.ci_hi <= 2.0 * r,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub n: usize,
    pub exact: f64,
    pub estimate: ProbEstimate,
    pub agrees: bool,
}

/// Random Rademacher instances with `n <= n_max`: exact value inside the MC interval.
pub fn exact_vs_mc(count: usize, n_max: usize, samples: u64, seed: u64) -> Result<Vec<OracleRow>> {
    let mut rng = rng::stream(seed, u64::MAX);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let n = rng.random_range(2..=n_max);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scale = rng.random_range(0.05..1.0);
        let b: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        cases.push((
            CoefficientVector::new(a)?,
            CoefficientVector::new_allow_zero(b)?,
            rng::derive_seed(seed, i as u64),
        ));
    }
    let spec = DistributionSpec::Rademacher;
    cases
        .into_iter()
        .map(|(a, b, s)| {
            let exact = estimators::exact_probability(&a, &b, &spec, DEFAULT_ENUM_LIMIT)?.value;
            let est = estimators::mc_probability(&a, &b, &spec, samples, s, 0.99)?;
            Ok(OracleRow {
                n: a.len(),
                exact,
                estimate: est,
                agrees: est.ci_lo <= exact && exact <= est.ci_hi,
            })
        })
        .collect()
}

/// First `θ = k·step` with `dist(θα, Zⁿ) <= min(γ, ‖θα‖/10)`, scanning up to `cap`.
pub fn lcd_brute_force(alpha: &CoefficientVector, gamma: f64, step: f64, cap: f64) -> Option<f64> {
    let norm = alpha.norm();
    let mut k = 1u64;
    loop {
        let theta = k as f64 * step;
        if theta > cap {
            return None;
        }
        if dist_to_lattice(theta, alpha) <= gamma.min(theta * norm / 10.0) {
            return Some(theta);
        }
        k += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcdOracleRow {
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub lcd: f64,
    pub brute_force: Option<f64>,
    pub pass: bool,
}

/// Scan limit of [`lcd_oracle`].
pub const LCD_ORACLE_CAP: f64 = 60.0;

/// LCD against the `1e-6`-step scan on random vectors of dimension 2 to `dim_max`.
///
/// Vectors are drawn with entries in `[-3, 3]` and `γ ∈ [0.2, 0.5]`, which
/// keeps `LCD` below the scan cap.
pub fn lcd_oracle(count: usize, dim_max: usize, seed: u64) -> Result<Vec<LcdOracleRow>> {
    const STEP: f64 = 1e-6;
    const CAP: f64 = LCD_ORACLE_CAP;
    let mut rng = rng::stream(seed, u64::MAX);
    let cases: Vec<(Vec<f64>, f64)> = (0..count)
        .map(|_| {
            let n = rng.random_range(2..=dim_max);
            ((0..n).map(|_| rng.random_range(-3.0..3.0)).collect(), rng.random_range(0.2..0.5))
        })
        .collect();
    cases
        .into_par_iter()
        .map(|(a, gamma)| {
            let alpha = CoefficientVector::new(a.clone())?;
            let l = lcd(&alpha, gamma, CAP, DEFAULT_TOL)?;
            let bf = lcd_brute_force(&alpha, gamma, STEP, CAP);
            let pass = match bf {
                Some(t) => !l.capped && (l.theta_star - t).abs() <= 1e-4,
                None => l.capped,
            };
            Ok(LcdOracleRow {
                alpha: a,
                gamma,
                lcd: l.theta_star,
                brute_force: bf,
                pass,
            })
        })
        .collect()
}

/// The two closed cases: `α = (1, 0)` gives `10/11` and `α = 1⁹/3` gives 2.8, both at `γ = 0.2`.
pub fn lcd_closed_cases() -> Result<Vec<StepCheck>> {
    let a = CoefficientVector::new(vec![1.0, 0.0])?;
    let b = CoefficientVector::ones(9).scaled(1.0 / 3.0);
    let la = lcd(&a, 0.2, 1e3, DEFAULT_TOL)?;
    let lb = lcd(&b, 0.2, 1e3, DEFAULT_TOL)?;
    Ok(vec![
        StepCheck::equal("lcd_e1_gamma0.2", la.theta_star, 10.0 / 11.0, 1e-4),
        StepCheck::equal("lcd_ones9_over3_gamma0.2", lb.theta_star, 2.8, 1e-4),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub spec: DistributionSpec,
    pub nu: f64,
    pub b: f64,
    pub beta: Vec<f64>,
    pub samples: u64,
    pub checks: Vec<StepCheck>,
    pub passed: bool,
}

/// Bernstein tail against the empirical `P{|<β,X>| > t}` at each threshold,
/// with 4 standard errors of slack and `(ν, b)` measured for the law.
pub fn tail_dominance(
    spec: &DistributionSpec,
    b: f64,
    beta: &CoefficientVector,
    thresholds: &[f64],
    samples: u64,
    seed: u64,
) -> Result<TailReport> {
    let law = spec.law()?;
    let params = SubExpParams::measure(&law, b)?;
    let s = estimators::sample_form(beta, spec, samples as usize, seed)?;
    let mut checks = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let emp = estimators::tail_prob(&s, t)?;
        let bound = bernstein_tail(t, params.nu, params.b, beta)?;
        let se = (emp * (1.0 - emp) / samples as f64).sqrt();
        checks.push(StepCheck::upper(format!("tail_t{t}"), emp, bound, 4.0 * se));
    }
    let passed = checks.iter().all(|c| c.pass);
    Ok(TailReport {
        spec: spec.clone(),
        nu: params.nu,
        b: params.b,
        beta: beta.entries().to_vec(),
        samples,
        checks,
        passed,
    })
}

/// The two tail scenarios: Rademacher with `b = 1` and Laplace(1) with
/// `b = 2`, both with `β = 1¹⁶/4` and thresholds `0.3, 0.6, …, 3.0`.
pub fn tail_suite(samples: u64, seed: u64) -> Result<Vec<TailReport>> {
    let beta = CoefficientVector::ones(16).scaled(0.25);
    let thresholds: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64).collect();
    Ok(vec![
        tail_dominance(
            &DistributionSpec::Rademacher,
            1.0,
            &beta,
            &thresholds,
            samples,
            rng::derive_seed(seed, 1),
        )?,
        tail_dominance(
            &DistributionSpec::laplace(1.0),
            2.0,
            &beta,
            &thresholds,
            samples,
            rng::derive_seed(seed, 2),
        )?,
    ])
}

pub fn levelset_suite(grid_n: usize, seed: u64) -> Result<Vec<LevelSetReport>> {
    PlanarDensity::CATALOG
        .iter()
        .map(|p| verify_levelset(p, PlanarGrid::for_density(p, grid_n), seed))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SodinSummary {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failed: Vec<StepCheck>,
    pub assembled: f64,
    pub direct: ProbEstimate,
    pub dominates: bool,
}

/// Runs the pipeline on every catalog scenario; `samples` overrides the file value.
pub fn sodin_suite(samples: Option<u64>, run_seed: u64) -> Result<Vec<SodinSummary>> {
    sodin_catalog()?
        .into_iter()
        .map(|mut cfg| {
            if let Some(m) = samples {
                cfg.samples = m;
            }
            cfg.seed = rng::derive_seed(run_seed, cfg.seed);
            let s = PipelineScenario::from_config(cfg)?;
            let rep = run_pipeline(&s)?;
            Ok(SodinSummary {
                name: s.config.name.clone(),
                passed: rep.passed,
                checks: rep.checks.len(),
                failed: rep.checks.iter().filter(|c| !c.pass).cloned().collect(),
                assembled: rep.end_to_end.assembled,
                direct: rep.end_to_end.direct,
                dominates: rep.end_to_end.dominates,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SozeCheck {
    pub table: SozeTable,
    pub c_conj: f64,
    /// `C_conj · max_n n(‖β‖/‖α‖ + 1/LCD)`: the calibrated bound on `n·P(n)`.
    pub constant: f64,
    pub rows: Vec<StepCheck>,
    pub passed: bool,
}

/// Söze family on Rademacher coordinates against the calibrated conjecture.
pub fn soze_check(n_list: &[usize], c_conj: f64) -> Result<SozeCheck> {
    let settings = RatioSettings {
        estimator: stress::EstimatorChoice::Exact,
        ..RatioSettings::default()
    };
    let table = stress::soze_family(n_list, &DistributionSpec::Rademacher, &settings, 0)?;
    let mut scaled = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let alpha = CoefficientVector::new((1..=n).map(|i| i as f64).collect())?;
        let beta = CoefficientVector::ones(n);
        let b = theorem_bound(TheoremId::Conjecture, &alpha, &beta, None, &unit_constants())?;
        scaled.push(n as f64 * b.rhs);
    }
    let constant = c_conj * scaled.iter().copied().fold(0.0, f64::max);
    let mut rows = Vec::new();
    for (row, s) in table.rows.iter().zip(&scaled) {
        rows.push(StepCheck::upper(
            format!("soze_n{}_conjecture", row.n),
            row.n_times_p,
            c_conj * s,
            0.0,
        ));
        rows.push(StepCheck::upper(format!("soze_n{}_bounded", row.n), row.n_times_p, constant, 0.0));
    }
    let passed = rows.iter().all(|c| c.pass);
    Ok(SozeCheck {
        table,
        c_conj,
        constant,
        rows,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressProbe {
    pub family: String,
    pub result: stress::SearchResult,
    /// `ci_lo` of the best point above its calibrated bound.
    pub exceeds: bool,
}

/// Searches each catalog law for points where the conjecture with the
/// calibrated `C_conj` fails. The outcome is reported, not asserted: the
/// calibration covers the catalog only.
pub fn stress_probe(c_conj: f64, restarts: usize, steps: usize, seed: u64) -> Result<Vec<StressProbe>> {
    let laws = [
        DistributionSpec::Rademacher,
        DistributionSpec::gaussian(1.0),
        DistributionSpec::laplace(1.0),
        DistributionSpec::Uniform {
            lo: -3f64.sqrt(),
            hi: 3f64.sqrt(),
        },
    ];
    laws.iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut settings = RatioSettings {
                samples: 20_000,
                ..RatioSettings::default()
            };
            settings.constants = settings.constants.with("C_conj", c_conj);
            let cfg = stress::SearchConfig {
                n: 4,
                theorem: TheoremId::Conjecture,
                restarts,
                steps,
                seed: rng::derive_seed(seed, i as u64),
                settings,
            };
            let result = stress::search(spec, &cfg)?;
            Ok(StressProbe {
                family: spec.family_name().to_string(),
                exceeds: result.estimate.ci_lo > result.bound.rhs,
                result,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub quick: bool,
    pub seed: u64,
}

/// Sizes used by the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSizes {
    pub samples: u64,
    pub gaussian_pairs: usize,
    pub oracle_instances: usize,
    pub oracle_samples: u64,
    pub lcd_vectors: usize,
    pub levelset_grid: usize,
    pub soze_max_n: usize,
    pub necessity_ns: Vec<usize>,
}

impl SuiteSizes {
    pub fn for_options(o: &VerifyOptions) -> SuiteSizes {
        if o.quick {
            SuiteSizes {
                samples: 100_000,
                gaussian_pairs: 8,
                oracle_instances: 30,
                oracle_samples: 100_000,
                lcd_vectors: 10,
                levelset_grid: 1001,
                soze_max_n: 16,
                necessity_ns: vec![4, 8, 12, 16],
            }
        } else {
            SuiteSizes {
                samples: 1_000_000,
                gaussian_pairs: 20,
                oracle_instances: 30,
                oracle_samples: 100_000,
                lcd_vectors: 50,
                levelset_grid: 2001,
                soze_max_n: 20,
                necessity_ns: vec![4, 8, 12, 16],
            }
        }
    }
}

/// Ratio `‖β‖/‖α‖` of the necessity cases.
pub const NECESSITY_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<StepCheck>,
}

impl Section {
    fn new(name: &str, checks: Vec<StepCheck>) -> Section {
        Section {
            name: name.to_string(),
            passed: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub sizes: SuiteSizes,
    pub sections: Vec<Section>,
    pub dominance: DominanceReport,
    pub conjecture: CalibrationEntry,
    pub necessity: Vec<NecessityRow>,
    pub tails: Vec<TailReport>,
    pub levelset: Vec<LevelSetReport>,
    pub sodin: Vec<SodinSummary>,
    pub soze: SozeCheck,
    /// Not part of `passed`.
    pub stress_probe: Vec<StressProbe>,
    pub passed: bool,
}

/// Every invariant over the built-in catalogs.
pub fn run_suite(opts: VerifyOptions) -> Result<VerifyReport> {
    let sizes = SuiteSizes::for_options(&opts);
    let seed = |label: u64| rng::derive_seed(opts.seed, label);
    let mut sections = Vec::new();

    sections.push(Section::new("lcd_closed_cases", lcd_closed_cases()?));
    let lcd_rows = lcd_oracle(sizes.lcd_vectors, 8, seed(3))?;
    sections.push(Section::new(
        "lcd_oracle",
        lcd_rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r.brute_force {
                Some(t) => StepCheck::equal(format!("lcd_vector{i}"), r.lcd, t, 1e-4),
                // both searches exhausted the cap
                None => {
                    StepCheck::lower(format!("lcd_vector{i}"), r.pass as u8 as f64, 1.0, 0.0).with_note("no admissible theta below the cap")
                }
            })
            .collect(),
    ));

    let g = gaussian_exactness(sizes.gaussian_pairs, &[0.01, 0.05, 0.1, 0.3], sizes.samples, seed(1))?;
    let mut checks = Vec::new();
    for (i, r) in g.iter().enumerate() {
        checks.push(StepCheck::upper(format!("gaussian_pair{i}_z"), r.z_score.abs(), 4.0, 0.0));
        checks.push(StepCheck::upper(
            format!("gaussian_pair{i}_bound"),
            r.estimate.ci_hi,
            2.0 * r.norm_ratio,
            0.0,
        ));
    }
    sections.push(Section::new("gaussian_exactness", checks));

    let o = exact_vs_mc(sizes.oracle_instances, 16, sizes.oracle_samples, seed(2))?;
    let agree = o.iter().filter(|r| r.agrees).count();
    let need = sizes.oracle_instances - sizes.oracle_instances / 15;
    sections.push(Section::new(
        "exact_vs_mc",
        vec![StepCheck::lower("agreements", agree as f64, need as f64, 0.0)],
    ));

    let scen = dominance_catalog()?;
    let est = estimate_scenarios(&scen, Some(sizes.samples), seed(4))?;
    let dom = dominance(&scen, &est, &DOMINANCE_THEOREMS)?;
    sections.push(Section::new(
        "dominance",
        dom.rows
            .iter()
            .map(|r| StepCheck::upper(format!("{}:{}", r.scenario, r.theorem_id.name()), r.lhs, r.rhs, 0.0))
            .collect(),
    ));

    let conj = calibrate_conjecture(&est, &sizes.necessity_ns, NECESSITY_RATIO)?;
    let nec = necessity_rows(&sizes.necessity_ns, NECESSITY_RATIO, conj.smallest_passing)?;
    let mut checks = Vec::new();
    for r in &nec {
        checks.push(StepCheck::lower(format!("n{}_atom", r.n), r.exact, r.atom, 1e-12));
        checks.push(StepCheck::lower(
            format!("n{}_ratio_only_violated", r.n),
            r.exact,
            r.ratio_only_rhs,
            0.0,
        ));
        checks.push(StepCheck::upper(format!("n{}_with_lcd", r.n), r.exact, r.with_lcd_rhs, 0.0));
    }
    sections.push(Section::new("lcd_term_necessity", checks));

    let tails = tail_suite(sizes.samples, seed(5))?;
    sections.push(Section::new(
        "tail_dominance",
        tails.iter().flat_map(|t| t.checks.clone()).collect(),
    ));

    let levelset = levelset_suite(sizes.levelset_grid, seed(6))?;
    sections.push(Section::new(
        "levelset",
        levelset
            .iter()
            .map(|r| StepCheck::lower(format!("{}_passed", r.density), r.passed() as u8 as f64, 1.0, 0.0))
            .collect(),
    ));

    let sodin = sodin_suite(Some(sizes.samples), opts.seed)?;
    sections.push(Section::new(
        "sodin",
        sodin
            .iter()
            .map(|s| StepCheck::lower(format!("{}_passed", s.name), (s.passed && s.dominates) as u8 as f64, 1.0, 0.0))
            .collect(),
    ));

    let ns: Vec<usize> = (2..=sizes.soze_max_n).collect();
    let soze = soze_check(&ns, conj.smallest_passing)?;
    sections.push(Section::new("soze", soze.rows.clone()));

    let (restarts, steps) = if opts.quick { (2, 50) } else { (4, 100) };
    let stress_probe = stress_probe(conj.smallest_passing, restarts, steps, seed(7))?;

    let passed = sections.iter().all(|s| s.passed);
    Ok(VerifyReport {
        options: opts,
        sizes,
        sections,
        dominance: dom,
        conjecture: conj,
        necessity: nec,
        tails,
        levelset,
        sodin,
        soze,
        stress_probe,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn catalogs_load() {
        assert_eq!(dominance_catalog().unwrap().len(), 13);
        assert_eq!(sodin_catalog().unwrap().len(), 10);
    }

    #[test]
    fn scenario_errors_carry_key_paths() {
        let e = DominanceScenario::from_toml_str("name = \"x\"\nalpha = [1.0]\nbeta = [1.0]\nbogus = 1\n[spec]\nfamily = \"rademacher\"\n")
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = DominanceScenario::from_toml_str("name = \"x\"\nalpha = [1.0]\nbeta = [1.0]\n[spec]\nfamily = \"laplace\"\nb = -1.0\n")
            .unwrap_err();
        assert!(e.to_string().contains("b"), "{e}");
        let e = DominanceScenario::from_toml_str("name = \"x\"\nalpha = [1.0, 2.0]\nbeta = [1.0]\n[spec]\nfamily = \"rademacher\"\n")
            .unwrap_err();
        assert!(e.to_string().contains("beta"));
    }

    #[test]
    fn applicability_matrix() {
        let check = |spec: DistributionSpec, expect: [bool; 4]| {
            let law = spec.law().unwrap();
            let got: Vec<bool> = DOMINANCE_THEOREMS.iter().map(|&t| applicable(t, &spec, &law)).collect();
            assert_eq!(got, expect, "{spec:?}");
        };
        check(DistributionSpec::Rademacher, [true, true, false, true]);
        check(DistributionSpec::gaussian(1.0), [true, true, true, true]);
        check(DistributionSpec::laplace(1.0), [false, true, true, true]);
        check(DistributionSpec::Uniform { lo: -1.0, hi: 1.0 }, [true, true, true, true]);
        check(DistributionSpec::finite(vec![(0.0, 0.5), (1.0, 0.5)]), [false, false, false, false]);
    }

    #[test]
    fn central_atom_values() {
        assert_abs_diff_eq!(central_atom(4), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(central_atom(16), 12870.0 / 65536.0, epsilon = 1e-15);
        assert_eq!(central_atom(5), 0.0);
    }

    #[test]
    fn calibration_is_the_smallest_passing_constant() {
        let scen = dominance_catalog().unwrap();
        let est = estimate_scenarios(&scen[..6], Some(10_000), 1).unwrap();
        let used: Vec<(&ScenarioEstimate, f64)> = est.iter().map(|e| (e, e.estimate.ci_hi)).collect();
        let c = calibrate(TheoremId::Sodin, &used).unwrap();
        let at = |k: f64| {
            let cons = unit_constants().with("C_prime", k);
            used.iter()
                .all(|(e, lhs)| *lhs <= scenario_bound(TheoremId::Sodin, e, &cons).unwrap().rhs)
        };
        assert!(at(c.smallest_passing));
        assert!(!at(c.smallest_passing.next_down()));
        assert!(c.binding_scenario.is_some());
    }

    #[test]
    fn necessity_without_lcd_term_fails_and_with_it_holds() {
        let conj = calibrate_conjecture(&[], &[4, 8], NECESSITY_RATIO).unwrap();
        let rows = necessity_rows(&[4, 8], NECESSITY_RATIO, conj.smallest_passing).unwrap();
        for r in rows {
            assert!(r.exact >= r.atom - 1e-15);
            assert!(r.ratio_only_violated && r.with_lcd_holds);
            assert!(r.required_c_without_lcd > 1e4);
            // ones/√n at γ = √n: LCD = 10√n/11
            assert_abs_diff_eq!(r.lcd.theta_star, 10.0 * (r.n as f64).sqrt() / 11.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn brute_force_agrees_on_a_closed_case() {
        let a = CoefficientVector::new(vec![1.0, 0.0]).unwrap();
        let t = lcd_brute_force(&a, 0.2, 1e-6, 10.0).unwrap();
        assert_abs_diff_eq!(t, 10.0 / 11.0, epsilon = 1.1e-6);
    }

    #[test]
    fn tail_suite_small() {
        for t in tail_suite(50_000, 3).unwrap() {
            assert!(t.passed, "{t:?}");
        }
    }
}
