//! Right-hand sides of the relative anti-concentration bounds, with every
//! constant exposed, plus the orthogonal reduction `β = aα + γ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::layered::{inverse_square_identity, second_moment_of};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::lcd::{lcd_normalized, CoefficientVector, LcdResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// `C_conj‖β‖/‖α‖ + C_conj_lcd/LCD_γ(α/‖α‖)`
    Conjecture,
    /// `2‖β‖/‖α‖`
    Gaussian,
    Subgaussian,
    Subexponential,
    Logconcave,
    Sodin,
    RvSmallball,
    BernsteinTail,
    CauchyInterval,
    MixLogconcave,
    MixUniform,
}

impl TheoremId {
    pub const ALL: [TheoremId; 11] = [
        TheoremId::Conjecture,
        TheoremId::Gaussian,
        TheoremId::Subgaussian,
        TheoremId::Subexponential,
        TheoremId::Logconcave,
        TheoremId::Sodin,
        TheoremId::RvSmallball,
        TheoremId::BernsteinTail,
        TheoremId::CauchyInterval,
        TheoremId::MixLogconcave,
        TheoremId::MixUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Conjecture => "conjecture",
            TheoremId::Gaussian => "gaussian",
            TheoremId::Subgaussian => "subgaussian",
            TheoremId::Subexponential => "subexponential",
            TheoremId::Logconcave => "logconcave",
            TheoremId::Sodin => "sodin",
            TheoremId::RvSmallball => "rv_smallball",
            TheoremId::BernsteinTail => "bernstein_tail",
            TheoremId::CauchyInterval => "cauchy_interval",
            TheoremId::MixLogconcave => "mix_logconcave",
            TheoremId::MixUniform => "mix_uniform",
        }
    }

    pub fn parse(s: &str) -> Result<TheoremId> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config("theorem", format!("unknown theorem id {s:?}")))
    }

    /// The multiplicative constant whose smallest passing value calibration reports.
    pub fn scale_constant(self) -> Option<&'static str> {
        match self {
            TheoremId::Conjecture => Some("C_conj"),
            TheoremId::Subgaussian | TheoremId::Subexponential | TheoremId::Sodin => Some("C_prime"),
            TheoremId::Logconcave | TheoremId::MixLogconcave | TheoremId::MixUniform => Some("C"),
            TheoremId::RvSmallball => Some("C_p"),
            TheoremId::Gaussian | TheoremId::BernsteinTail | TheoremId::CauchyInterval => None,
        }
    }
}

/// Named constants. Defaults: `C_prime = 1`, `c_prime = 1`, `C_p = 1`, `c_p = 0.01`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Constants(pub BTreeMap<String, f64>);

impl Default for Constants {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("C_prime".into(), 1.0);
        m.insert("c_prime".into(), 1.0);
        m.insert("C_p".into(), 1.0);
        m.insert("c_p".into(), 0.01);
        Constants(m)
    }
}

impl Constants {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::config(format!("constants.{name}"), "required constant is missing"))
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    /// Overrides `self` with every entry of `other`.
    pub fn merged(mut self, other: &Constants) -> Self {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), *v);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.0 {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::config(
                    format!("constants.{k}"),
                    format!("must be a finite nonnegative number, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Right-hand side of one bound with its per-term breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem_id: TheoremId,
    pub rhs: f64,
    pub terms: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, f64>,
    /// `rhs > 1`.
    pub vacuous: bool,
    /// False when a hypothesis fails (e.g. a divergent moment); `rhs` is then the trivial 1.
    pub applicable: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(theorem_id: TheoremId, rhs: f64, terms: &[(&str, f64)], constants: &[(&str, f64)]) -> Self {
        BoundReport {
            theorem_id,
            rhs,
            terms: terms.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            constants: constants.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            vacuous: rhs > 1.0,
            applicable: true,
            notes: Vec::new(),
        }
    }

    fn inapplicable(theorem_id: TheoremId, reason: &str, constants: &[(&str, f64)]) -> Self {
        let mut r = BoundReport::new(theorem_id, 1.0, &[("trivial", 1.0)], constants);
        r.applicable = false;
        r.notes.push(reason.to_string());
        r
    }

    fn vacuous_one(theorem_id: TheoremId, reason: &str, constants: &[(&str, f64)]) -> Self {
        let mut r = BoundReport::new(theorem_id, 1.0, &[("trivial", 1.0)], constants);
        r.vacuous = true;
        r.notes.push(reason.to_string());
        r
    }

    fn term(&self, name: &str) -> f64 {
        self.terms.get(name).copied().unwrap_or(0.0)
    }

    fn constant(&self, name: &str) -> f64 {
        self.constants.get(name).copied().unwrap_or(0.0)
    }

    /// Recomputes `rhs` from the stored terms and constants.
    pub fn recompute(&self) -> f64 {
        if self.terms.contains_key("trivial") {
            return 1.0;
        }
        let t = |n: &str| self.term(n);
        let c = |n: &str| self.constant(n);
        match self.theorem_id {
            TheoremId::Conjecture => {
                let cl = self.constants.get("C_conj_lcd").copied().unwrap_or(c("C_conj"));
                c("C_conj") * t("ratio") + cl * t("inv_lcd")
            }
            TheoremId::Gaussian => 2.0 * t("ratio"),
            TheoremId::Subgaussian | TheoremId::Subexponential | TheoremId::Sodin => {
                c("C_prime") * (t("ratio") + t("inv_lcd") + t("gamma"))
            }
            TheoremId::RvSmallball => c("C_p") * (t("epsilon") + t("inv_lcd") + t("gamma")),
            TheoremId::Logconcave => c("C") * t("ratio"),
            TheoremId::MixLogconcave => c("C") * t("B") * t("ratio"),
            TheoremId::MixUniform => 12.0 * c("C") * t("B") * t("ratio"),
            TheoremId::BernsteinTail => t("tail"),
            TheoremId::CauchyInterval => t("mass_bound"),
        }
    }

    /// Smallest value of the scale constant for which `rhs >= target`, all
    /// other constants fixed. `None` when the bound has no scale constant.
    pub fn required_scale(&self, target: f64) -> Option<f64> {
        let name = self.theorem_id.scale_constant()?;
        if !self.applicable || self.terms.contains_key("trivial") {
            return None;
        }
        let c = self.constant(name);
        let rest = if c > 0.0 {
            self.rhs / c
        } else {
            // rhs is affine in c with zero intercept for every scaled theorem
            // except the conjecture with a separate LCD weight
            return None;
        };
        if self.theorem_id == TheoremId::Conjecture && self.constants.contains_key("C_conj_lcd") {
            let fixed = self.constant("C_conj_lcd") * self.term("inv_lcd");
            let slope = self.term("ratio");
            if target <= fixed {
                return Some(0.0);
            }
            return Some(if slope > 0.0 { (target - fixed) / slope } else { f64::INFINITY });
        }
        Some(if rest > 0.0 {
            target / rest
        } else if target > 0.0 {
            f64::INFINITY
        } else {
            0.0
        })
    }
}

fn ratio(alpha: &CoefficientVector, beta: &CoefficientVector) -> Result<f64> {
    if alpha.is_zero() {
        return Err(Error::Domain("alpha must be nonzero".into()));
    }
    if alpha.len() != beta.len() {
        return Err(Error::Domain(format!(
            "alpha has {} entries but beta has {}",
            alpha.len(),
            beta.len()
        )));
    }
    Ok(beta.norm() / alpha.norm())
}

/// `2‖β‖/‖α‖`, the bound for standard Gaussian coordinates.
pub fn gaussian_bound(alpha: &CoefficientVector, beta: &CoefficientVector) -> Result<BoundReport> {
    let r = ratio(alpha, beta)?;
    Ok(BoundReport::new(TheoremId::Gaussian, 2.0 * r, &[("ratio", r)], &[]))
}

/// Upper bound on the Cauchy mass of `[a - ℓ, a + ℓ]`: the minimum of
/// `2ℓ/π`, `2ℓ/(π(a-ℓ)²)` when `a - ℓ > 0`, and `2ℓ/(π(a+ℓ)²)` when `a + ℓ < 0`.
pub fn cauchy_interval_bound(a: f64, ell: f64) -> Result<f64> {
    cauchy_cases(a, ell, 2.0)
}

/// As [`cauchy_interval_bound`] but with the left-side case read as
/// `ℓ/(π(a+ℓ)²)`; this does not dominate the Cauchy mass in general.
pub fn cauchy_interval_bound_printed(a: f64, ell: f64) -> Result<f64> {
    cauchy_cases(a, ell, 1.0)
}

fn cauchy_cases(a: f64, ell: f64, left_factor: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::Domain(format!("half-width must be > 0, got {ell}")));
    }
    let mut b = 2.0 * ell / PI;
    if a - ell > 0.0 {
        b = b.min(2.0 * ell / (PI * (a - ell).powi(2)));
    }
    if a + ell < 0.0 {
        b = b.min(left_factor * ell / (PI * (a + ell).powi(2)));
    }
    Ok(b)
}

/// Exact Cauchy mass of `[a - ℓ, a + ℓ]`.
pub fn cauchy_interval_mass(a: f64, ell: f64) -> f64 {
    ((a + ell).atan() - (a - ell).atan()) / PI
}

pub fn cauchy_interval_report(a: f64, ell: f64) -> Result<BoundReport> {
    let b = cauchy_interval_bound(a, ell)?;
    let mut r = BoundReport::new(TheoremId::CauchyInterval, b, &[("mass_bound", b), ("a", a), ("ell", ell)], &[]);
    r.notes.push(format!(
        "left-side case uses 2l/(pi (a+l)^2); the printed l/(pi (a+l)^2) gives {}",
        cauchy_interval_bound_printed(a, ell)?
    ));
    Ok(r)
}

/// `C_p(ε + 1/LCD + e^{-c_p γ²})`. An infinite `lcd_value` drops the middle term.
pub fn rv_smallball_bound(epsilon: f64, lcd_value: f64, gamma: f64, c_big: f64, c_small: f64) -> Result<BoundReport> {
    for (name, v) in [
        ("epsilon", epsilon),
        ("lcd", lcd_value),
        ("gamma", gamma),
        ("C_p", c_big),
        ("c_p", c_small),
    ] {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    let inv = 1.0 / lcd_value;
    let g = (-c_small * gamma * gamma).exp();
    let rhs = c_big * (epsilon + inv + g);
    Ok(BoundReport::new(
        TheoremId::RvSmallball,
        rhs,
        &[("epsilon", epsilon), ("inv_lcd", inv), ("gamma", g)],
        &[("C_p", c_big), ("c_p", c_small), ("gamma", gamma)],
    ))
}

/// The theorem right-hand sides given `r = ‖β‖/‖α‖` and `1/LCD`.
pub fn theorem_rhs(theorem: TheoremId, r: f64, inv_lcd: f64, gamma: f64, constants: &Constants) -> Result<BoundReport> {
    match theorem {
        TheoremId::Subgaussian | TheoremId::Subexponential | TheoremId::Sodin => {
            let cb = constants.get("C_prime")?;
            let cs = constants.get("c_prime")?;
            let cons = [("C_prime", cb), ("c_prime", cs), ("gamma", gamma)];
            let ratio_term = match theorem {
                TheoremId::Sodin => r,
                _ if !(r > 0.0 && r < 1.0) => {
                    return Ok(BoundReport::vacuous_one(
                        theorem,
                        "log-factor bound needs ||alpha|| > ||beta|| > 0",
                        &cons,
                    ));
                }
                TheoremId::Subgaussian => r * (1.0 / r).ln().sqrt(),
                _ => r * (1.0 / r).ln(),
            };
            let g = (-cs * gamma * gamma).exp();
            Ok(BoundReport::new(
                theorem,
                cb * (ratio_term + inv_lcd + g),
                &[("ratio", ratio_term), ("inv_lcd", inv_lcd), ("gamma", g)],
                &cons,
            ))
        }
        TheoremId::Logconcave => {
            let c = constants.get("C")?;
            Ok(BoundReport::new(theorem, c * r, &[("ratio", r)], &[("C", c)]))
        }
        TheoremId::Conjecture => {
            // a separate weight on the LCD term is only used when given
            let c = constants.get("C_conj")?;
            let terms = [("ratio", r), ("inv_lcd", inv_lcd)];
            Ok(match constants.get("C_conj_lcd") {
                Ok(cl) => BoundReport::new(
                    theorem,
                    c * r + cl * inv_lcd,
                    &terms,
                    &[("C_conj", c), ("C_conj_lcd", cl), ("gamma", gamma)],
                ),
                Err(_) => BoundReport::new(theorem, c * (r + inv_lcd), &terms, &[("C_conj", c), ("gamma", gamma)]),
            })
        }
        TheoremId::Gaussian => Ok(BoundReport::new(theorem, 2.0 * r, &[("ratio", r)], &[])),
        other => Err(Error::Domain(format!("{} is not a ratio theorem", other.name()))),
    }
}

/// Default `γ = √n`.
pub fn default_gamma(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// Evaluates a ratio theorem for concrete vectors; the LCD is computed on
/// `α/‖α‖`. A capped search contributes `1/cap`, an upper bound on `1/LCD`.
pub fn theorem_bound(
    theorem: TheoremId,
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    gamma: Option<f64>,
    constants: &Constants,
) -> Result<BoundReport> {
    let r = ratio(alpha, beta)?;
    let gamma = gamma.unwrap_or_else(|| default_gamma(alpha.len()));
    let needs_lcd = matches!(
        theorem,
        TheoremId::Conjecture | TheoremId::Subgaussian | TheoremId::Subexponential | TheoremId::Sodin
    );
    let lcd: Option<LcdResult> = if needs_lcd { Some(lcd_normalized(alpha, gamma)?) } else { None };
    let inv = lcd.map(|l| l.reciprocal()).unwrap_or(0.0);
    let mut report = theorem_rhs(theorem, r, inv, gamma, constants)?;
    if let Some(l) = lcd {
        report.terms.insert("lcd".into(), l.theta_star);
        if l.capped {
            report.notes.push(format!("LCD >= search cap {}", l.search_cap));
        }
    }
    Ok(report)
}

/// Two-sided tail bound for `<β,X>` with sub-exponential `(ν, b)` coordinates:
/// `exp(-t0²/(2ν²‖β‖²))` if `t0 <= ν²‖β‖²/(b β_max)`, else `exp(-t0/(2 b β_max))`.
/// No factor 2 is applied for the two tails.
pub fn bernstein_tail(t0: f64, nu: f64, b: f64, beta: &CoefficientVector) -> Result<f64> {
    if !(t0 >= 0.0) || !(nu > 0.0) || !(b > 0.0) || beta.is_zero() {
        return Err(Error::Domain(format!(
            "need t0 >= 0, nu > 0, b > 0, beta != 0 (got t0={t0}, nu={nu}, b={b})"
        )));
    }
    let nu_star2 = nu * nu * beta.norm() * beta.norm();
    let b_star = b * beta.max_abs();
    Ok(if t0 <= nu_star2 / b_star {
        (-t0 * t0 / (2.0 * nu_star2)).exp()
    } else {
        (-t0 / (2.0 * b_star)).exp()
    })
}

pub fn bernstein_report(t0: f64, nu: f64, b: f64, beta: &CoefficientVector) -> Result<BoundReport> {
    let tail = bernstein_tail(t0, nu, b, beta)?;
    Ok(BoundReport::new(
        TheoremId::BernsteinTail,
        tail,
        &[
            ("tail", tail),
            ("t0", t0),
            ("threshold", nu * nu * beta.norm() * beta.norm() / (b * beta.max_abs())),
        ],
        &[("nu", nu), ("b", b)],
    ))
}

/// `β = aα + γ` with `<α,γ> = 0`.
pub fn orthogonal_reduce(alpha: &CoefficientVector, beta: &CoefficientVector) -> Result<(f64, CoefficientVector)> {
    ratio(alpha, beta)?;
    let a = alpha.dot(beta) / (alpha.norm() * alpha.norm());
    let g: Vec<f64> = beta.entries().iter().zip(alpha.entries()).map(|(b, x)| b - a * x).collect();
    // one refinement pass removes the residual component along α
    let da = g.iter().zip(alpha.entries()).map(|(g, x)| g * x).sum::<f64>() / (alpha.norm() * alpha.norm());
    let g: Vec<f64> = g.iter().zip(alpha.entries()).map(|(g, x)| g - da * x).collect();
    Ok((a + da, CoefficientVector::new_allow_zero(g)?))
}

/// What a mixture corollary is evaluated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MixtureInput {
    /// `E[ξ²]` and `E[ξ^{-2}]` supplied directly.
    Moments { second: f64, inverse_second: f64 },
    /// Law of the positive scale `ξ`.
    ScaleLaw { spec: DistributionSpec },
    /// Symmetric unimodal law of `X` with a density.
    Density { spec: DistributionSpec },
}

/// Mixture corollaries: `C·B·‖β‖/‖α‖` (scale mixtures of log-concave laws) and
/// `12·C·B·‖β‖/‖α‖` (symmetric unimodal densities).
pub fn mixture_bounds(
    corollary: TheoremId,
    input: &MixtureInput,
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    constants: &Constants,
) -> Result<BoundReport> {
    let r = ratio(alpha, beta)?;
    let c = constants.get("C")?;
    let cons = [("C", c)];
    let (second, inverse_second) = match (corollary, input) {
        (_, MixtureInput::Moments { second, inverse_second }) => (*second, *inverse_second),
        (TheoremId::MixLogconcave, MixtureInput::ScaleLaw { spec }) => {
            let law = spec.law()?;
            if law.support().0 <= 0.0 && law.atoms().is_none_or(|a| a.iter().any(|&(v, _)| v <= 0.0)) {
                return Err(Error::Domain("scale law must be supported on the positive reals".into()));
            }
            (law.moment(2.0)?, law.moment(-2.0)?)
        }
        (TheoremId::MixUniform, MixtureInput::Density { spec }) => {
            let law = spec.law()?;
            if !law.has_density() || !law.is_symmetric() {
                return Err(Error::Capability(format!("{} has no symmetric density", spec.family_name())));
            }
            let f = |t: f64| law.density(t).unwrap_or(0.0);
            (second_moment_of(&f)?, inverse_square_identity(&f)?)
        }
        (TheoremId::MixLogconcave | TheoremId::MixUniform, other) => {
            return Err(Error::Domain(format!("{} cannot be evaluated from {other:?}", corollary.name())));
        }
        (other, _) => return Err(Error::Domain(format!("{} is not a mixture corollary", other.name()))),
    };
    if !inverse_second.is_finite() || !second.is_finite() {
        let mut rep = BoundReport::inapplicable(corollary, "E[xi^-2] diverges; the corollary does not apply", &cons);
        rep.terms
            .insert("second".into(), if second.is_finite() { second } else { f64::MAX });
        return Ok(rep);
    }
    let b = second.max(inverse_second);
    let factor = if corollary == TheoremId::MixUniform { 12.0 } else { 1.0 };
    let mut rep = BoundReport::new(
        corollary,
        factor * c * b * r,
        &[("ratio", r), ("B", b), ("second", second), ("inverse_second", inverse_second)],
        &cons,
    );
    match corollary {
        TheoremId::MixLogconcave => rep
            .notes
            .push("proof line '= 10 E[...]' read as '<= C E[...]' with C the log-concave constant".into()),
        _ => rep
            .notes
            .push("xi = g(H), H with density g (level-set lengths); E[xi^-2] = int_0^inf [P{|X|<=t} - 2t f(t)]/(2t^3) dt".into()),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;
    use crate::estimators::{exact_probability, mc_probability, DEFAULT_ENUM_LIMIT};
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn v(x: &[f64]) -> CoefficientVector {
        CoefficientVector::new_allow_zero(x.to_vec()).unwrap()
    }

    #[test]
    fn gaussian_examples() {
        assert_abs_diff_eq!(gaussian_bound(&v(&[10.0, 0.0]), &v(&[0.0, 1.0])).unwrap().rhs, 0.2, epsilon = 1e-15);
        assert_eq!(gaussian_bound(&v(&[1.0, 2.0]), &v(&[0.0, 0.0])).unwrap().rhs, 0.0);
        let r = gaussian_bound(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap();
        assert_eq!(r.rhs, 2.0);
        assert!(r.vacuous);
        assert_eq!(gaussian_bound(&v(&[0.0]), &v(&[1.0])).unwrap_err().kind(), "domain");
    }

    #[test]
    fn cauchy_examples() {
        assert_abs_diff_eq!(cauchy_interval_bound(0.0, 0.1).unwrap(), 0.063662, epsilon = 1e-6);
        assert_abs_diff_eq!(cauchy_interval_bound(1.0, 0.1).unwrap(), 0.063662, epsilon = 1e-6);
        assert_abs_diff_eq!(0.2 / (PI * 0.81), 0.078595, epsilon = 1e-6);
        assert_abs_diff_eq!(cauchy_interval_bound_printed(-5.0, 0.1).unwrap(), 0.0013258, epsilon = 1e-7);
    }

    #[test]
    fn printed_left_case_fails_to_dominate() {
        let mass = cauchy_interval_mass(-5.0, 0.1);
        assert!(cauchy_interval_bound_printed(-5.0, 0.1).unwrap() < mass);
        assert!(cauchy_interval_bound(-5.0, 0.1).unwrap() >= mass);
    }

    #[test]
    fn cauchy_bound_dominates_exact_mass() {
        let mut rng = rng::stream(123, 0);
        for _ in 0..1000 {
            let a = rng.random_range(-20.0..20.0);
            let ell = 10f64.powf(rng.random_range(-3.0..1.0));
            let b = cauchy_interval_bound(a, ell).unwrap();
            let q = crate::quad::integrate(|t| 1.0 / (PI * (1.0 + t * t)), a - ell, a + ell, crate::quad::QuadOpts::default())
                .unwrap()
                .value;
            assert_abs_diff_eq!(q, cauchy_interval_mass(a, ell), epsilon = 1e-12);
            assert!(b >= q - 1e-15, "a={a} l={ell}: {b} < {q}");
        }
    }

    #[test]
    fn rv_examples() {
        let r = rv_smallball_bound(0.01, 100.0, 3.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.rhs, 0.02 + (-9.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.rhs, 0.0201234, epsilon = 1e-7);
        let r = rv_smallball_bound(0.01, f64::INFINITY, 3.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.rhs, 0.01 + (-9.0f64).exp(), epsilon = 1e-15);
        assert_eq!(rv_smallball_bound(0.0, f64::INFINITY, 1e3, 1.0, 1.0).unwrap().rhs, 0.0);
        assert_eq!(r.recompute(), r.rhs);
    }

    #[test]
    fn theorem_examples() {
        let cons = Constants::default().with("C", 2.0);
        let r = theorem_bound(TheoremId::Logconcave, &v(&[20.0]), &v(&[1.0]), None, &cons).unwrap();
        assert_abs_diff_eq!(r.rhs, 0.1, epsilon = 1e-15);
        let r = theorem_rhs(TheoremId::Subgaussian, 1.0 / std::f64::consts::E, 0.0, 1e3, &cons).unwrap();
        assert_abs_diff_eq!(r.rhs, 0.36788, epsilon = 1e-5);
        let r = theorem_rhs(TheoremId::Sodin, 0.0, 0.0, 1e3, &cons).unwrap();
        assert_eq!(r.rhs, 0.0);
        let r = theorem_rhs(TheoremId::Subexponential, 2.0, 0.0, 1.0, &cons).unwrap();
        assert_eq!(r.rhs, 1.0);
        assert!(r.vacuous);
        let e = theorem_bound(TheoremId::Logconcave, &v(&[2.0]), &v(&[1.0]), None, &Constants::default()).unwrap_err();
        assert_eq!(e.kind(), "config");
        assert!(e.to_string().contains("constants.C"));
    }

    #[test]
    fn theorem_bound_uses_normalized_lcd() {
        let cons = Constants::default().with("C_conj", 1.0);
        let a = v(&[1.0, 1.0]);
        let b = v(&[1.0, -1.0]);
        let r = theorem_bound(TheoremId::Conjecture, &a, &b, None, &cons).unwrap();
        let l = lcd_normalized(&a, 2f64.sqrt()).unwrap();
        assert_abs_diff_eq!(r.terms["inv_lcd"], 1.0 / l.theta_star, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rhs, 1.0 + 1.0 / l.theta_star, epsilon = 1e-15);
        assert_eq!(r.recompute(), r.rhs);
        assert_abs_diff_eq!(r.required_scale(0.5).unwrap(), 0.5 / (1.0 + 1.0 / l.theta_star), epsilon = 1e-12);
        let split = cons.with("C_conj_lcd", 0.0);
        let r = theorem_bound(TheoremId::Conjecture, &a, &b, None, &split).unwrap();
        assert_eq!(r.rhs, 1.0);
        assert_eq!(r.recompute(), r.rhs);
        assert_abs_diff_eq!(r.required_scale(0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bernstein_examples() {
        let beta = v(&[1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(bernstein_tail(0.5, 1.0, 1.0, &beta).unwrap(), (-0.125f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(bernstein_tail(0.5, 1.0, 1.0, &beta).unwrap(), 0.88250, epsilon = 1e-5);
        assert_abs_diff_eq!(bernstein_tail(2.0, 1.0, 1.0, &beta).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(bernstein_tail(0.0, 1.0, 1.0, &beta).unwrap(), 1.0);
    }

    #[test]
    fn bernstein_without_two_sided_factor_is_beaten_by_a_single_sign() {
        // |X| = 1 always for Rademacher, so P{|<e1,X>| > 1/2} = 1 > e^{-1/8}
        let beta = v(&[1.0, 0.0]);
        let s = crate::estimators::sample_form(&beta, &DistributionSpec::Rademacher, 10_000, 1).unwrap();
        let emp = crate::estimators::tail_prob(&s, 0.5).unwrap();
        assert_eq!(emp, 1.0);
        assert!(bernstein_tail(0.5, 1.0, 1.0, &beta).unwrap() < emp);
        assert!(2.0 * bernstein_tail(0.5, 1.0, 1.0, &beta).unwrap() >= emp);
    }

    #[test]
    fn orthogonal_reduce_examples() {
        let (a, g) = orthogonal_reduce(&v(&[1.0, 0.0]), &v(&[0.1, 0.2])).unwrap();
        assert_abs_diff_eq!(a, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g.entries()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.entries()[1], 0.2, epsilon = 1e-15);
        let (a, g) = orthogonal_reduce(&v(&[1.0, 2.0, -1.0]), &v(&[-2.0, -4.0, 2.0])).unwrap();
        assert_abs_diff_eq!(a, -2.0, epsilon = 1e-15);
        assert!(g.norm() < 1e-15);
        assert!(orthogonal_reduce(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn reduction_chain_holds_exactly_for_rademacher() {
        let mut rng = rng::stream(5, 0);
        for _ in 0..40 {
            let n = rng.random_range(2..10);
            let alpha = v(&(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let beta = v(&(0..n).map(|_| rng.random_range(-0.4..0.4)).collect::<Vec<_>>());
            let (a, g) = orthogonal_reduce(&alpha, &beta).unwrap();
            if a.abs() >= 1.0 {
                continue;
            }
            let lhs = exact_probability(&alpha, &beta, &DistributionSpec::Rademacher, DEFAULT_ENUM_LIMIT)
                .unwrap()
                .value;
            let rhs = exact_probability(
                &alpha,
                &g.scaled(1.0 / (1.0 - a.abs())),
                &DistributionSpec::Rademacher,
                DEFAULT_ENUM_LIMIT,
            )
            .unwrap()
            .value;
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn reduction_chain_holds_for_laplace_mc() {
        let alpha = v(&[1.0, -0.5, 0.8, 0.2]);
        let beta = v(&[0.2, 0.1, 0.05, -0.3]);
        let (a, g) = orthogonal_reduce(&alpha, &beta).unwrap();
        assert!(a.abs() < 1.0);
        let spec = DistributionSpec::laplace(1.0);
        let lhs = mc_probability(&alpha, &beta, &spec, 200_000, 1, 0.99).unwrap();
        let rhs = mc_probability(&alpha, &g.scaled(1.0 / (1.0 - a.abs())), &spec, 200_000, 1, 0.99).unwrap();
        assert!(lhs.ci_lo <= rhs.ci_hi);
    }

    #[test]
    fn mixture_examples() {
        let cons = Constants::default().with("C", 3.0);
        let a = v(&[4.0, 0.0]);
        let b = v(&[0.0, 1.0]);
        let degenerate = MixtureInput::ScaleLaw {
            spec: DistributionSpec::point_mass(1.0),
        };
        let r = mixture_bounds(TheoremId::MixLogconcave, &degenerate, &a, &b, &cons).unwrap();
        assert_abs_diff_eq!(r.rhs, 3.0 * 0.25, epsilon = 1e-15);
        let ep = MixtureInput::Density {
            spec: DistributionSpec::ExponentialPower { p: 1.5, scale: 1.0 },
        };
        let r = mixture_bounds(TheoremId::MixUniform, &ep, &a, &b, &cons).unwrap();
        assert!(r.applicable && r.rhs.is_finite());
        assert_abs_diff_eq!(r.recompute(), r.rhs, epsilon = 1e-15);
        let lap = MixtureInput::Density {
            spec: DistributionSpec::laplace(1.0),
        };
        let r = mixture_bounds(TheoremId::MixUniform, &lap, &a, &b, &cons).unwrap();
        assert!(!r.applicable);
        assert_eq!(r.rhs, 1.0);
    }

    #[test]
    fn mixture_uniform_moments_for_gaussian() {
        // ∫t²φ = 1, E[ξ^{-2}] = 1/4
        let cons = Constants::default().with("C", 1.0);
        let g = MixtureInput::Density {
            spec: DistributionSpec::gaussian(1.0),
        };
        let r = mixture_bounds(TheoremId::MixUniform, &g, &v(&[1.0]), &v(&[0.5]), &cons).unwrap();
        assert_abs_diff_eq!(r.terms["second"], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.terms["inverse_second"], 0.25, epsilon = 1e-7);
        assert_abs_diff_eq!(r.rhs, 12.0 * 0.5, epsilon = 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pythagoras_in_dimension_50(seed in 0u64..10_000) {
            let mut rng = rng::stream(seed, 0);
            let alpha = v(&(0..50).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let beta = v(&(0..50).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let (a, g) = orthogonal_reduce(&alpha, &beta).unwrap();
            prop_assert!(alpha.dot(&g).abs() <= 1e-10 * alpha.norm() * beta.norm());
            let lhs = beta.norm().powi(2);
            let rhs = a * a * alpha.norm().powi(2) + g.norm().powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs);
        }

        #[test]
        fn reports_recompute_and_are_nonnegative(r in 0.0f64..3.0, inv in 0.0f64..1.0, gamma in 0.1f64..5.0) {
            let cons = Constants::default().with("C", 2.0).with("C_conj", 1.5);
            for t in [TheoremId::Subgaussian, TheoremId::Subexponential, TheoremId::Sodin, TheoremId::Logconcave, TheoremId::Conjecture, TheoremId::Gaussian] {
                let rep = theorem_rhs(t, r, inv, gamma, &cons).unwrap();
                prop_assert!(rep.rhs >= 0.0);
                prop_assert!((rep.recompute() - rep.rhs).abs() <= 1e-12 * rep.rhs.max(1.0));
                prop_assert_eq!(rep.vacuous, rep.rhs > 1.0 || rep.terms.contains_key("trivial"));
            }
        }
    }
}
