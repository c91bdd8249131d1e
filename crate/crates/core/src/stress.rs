//! Adversarial search for large ratios `P{|<α,X>| <= |<β,X>|} / rhs` and the
//! arithmetic family `α_i = i`, `β_i = 1`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gaussian_bound, theorem_bound, BoundReport, Constants, TheoremId};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::estimators::{self, ProbEstimate, DEFAULT_ENUM_LIMIT};
use crate::lcd::CoefficientVector;
use crate::rng;

/// Multiplicative moves on one coordinate; a sign flip is the sixth move.
pub const FACTORS: [f64; 4] = [0.5, 0.9, 1.1, 2.0];

/// Lower limit on `‖β‖/‖α‖` during the search.
pub const MIN_BETA_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    /// Exact when `supportⁿ` is within the enumeration limit.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatioSettings {
    pub estimator: EstimatorChoice,
    pub enum_limit: u64,
    pub samples: u64,
    pub ci_level: f64,
    /// `None` means `√n`.
    pub gamma: Option<f64>,
    pub constants: Constants,
}

impl Default for RatioSettings {
    fn default() -> Self {
        RatioSettings {
            estimator: EstimatorChoice::Auto,
            enum_limit: DEFAULT_ENUM_LIMIT,
            samples: 100_000,
            ci_level: 0.99,
            gamma: None,
            constants: Constants::default().with("C_conj", 1.0).with("C", 1.0),
        }
    }
}

/// One evaluated point of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEval {
    pub ratio: f64,
    pub estimate: ProbEstimate,
    pub bound: BoundReport,
}

impl RatioEval {
    /// Ratio of the lower confidence end.
    pub fn ratio_lo(&self) -> f64 {
        divide(self.estimate.ci_lo, self.bound.rhs)
    }

    /// Ratio of the upper confidence end.
    pub fn ratio_hi(&self) -> f64 {
        divide(self.estimate.ci_hi, self.bound.rhs)
    }
}

/// `p / rhs`, infinite when `rhs = 0 < p`, and 0 when both vanish.
pub fn divide(p: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        p / rhs
    } else if p > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn estimate(
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    spec: &DistributionSpec,
    settings: &RatioSettings,
    seed: u64,
) -> Result<ProbEstimate> {
    match settings.estimator {
        EstimatorChoice::Auto => estimators::probability(alpha, beta, spec, settings.enum_limit, settings.samples, seed, settings.ci_level),
        EstimatorChoice::Exact => estimators::exact_probability(alpha, beta, spec, settings.enum_limit),
        EstimatorChoice::MonteCarlo => estimators::mc_probability(alpha, beta, spec, settings.samples, seed, settings.ci_level),
    }
}

pub fn bound(theorem: TheoremId, alpha: &CoefficientVector, beta: &CoefficientVector, settings: &RatioSettings) -> Result<BoundReport> {
    match theorem {
        TheoremId::Gaussian => gaussian_bound(alpha, beta),
        TheoremId::Conjecture | TheoremId::Subgaussian | TheoremId::Subexponential | TheoremId::Logconcave | TheoremId::Sodin => {
            theorem_bound(theorem, alpha, beta, settings.gamma, &settings.constants)
        }
        other => Err(Error::Domain(format!("{} is not a bound on P{{|<a,X>| <= |<b,X>|}}", other.name()))),
    }
}

/// Estimate divided by the theorem's right-hand side.
pub fn ratio(
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    spec: &DistributionSpec,
    theorem: TheoremId,
    settings: &RatioSettings,
    seed: u64,
) -> Result<RatioEval> {
    let bound = bound(theorem, alpha, beta, settings)?;
    let estimate = estimate(alpha, beta, spec, settings, seed)?;
    Ok(RatioEval {
        ratio: divide(estimate.value, bound.rhs),
        estimate,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub theorem_id: TheoremId,
    pub best_alpha: CoefficientVector,
    pub best_beta: CoefficientVector,
    pub ratio: f64,
    pub estimate: ProbEstimate,
    pub bound: BoundReport,
    /// Current ratio after every step of the winning restart.
    pub trace: Vec<TracePoint>,
    pub restart: usize,
    pub restart_seed: u64,
    pub accepted: usize,
}

impl SearchResult {
    /// `estimate.value / bound.rhs` from the stored fields.
    pub fn recomputed_ratio(&self) -> f64 {
        divide(self.estimate.value, self.bound.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub n: usize,
    pub theorem: TheoremId,
    pub restarts: usize,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub settings: RatioSettings,
}

/// Random-restart hill climbing on `(α, β)`.
///
/// Restart `r` uses seed `derive_seed(seed, r)`; the result with the largest
/// ratio wins, ties going to the smaller restart seed.
pub fn search(spec: &DistributionSpec, cfg: &SearchConfig) -> Result<SearchResult> {
    if cfg.n < 2 {
        return Err(Error::Domain(format!("search needs n >= 2, got {}", cfg.n)));
    }
    if cfg.restarts == 0 {
        return Err(Error::Domain("search needs at least one restart".into()));
    }
    spec.validate()?;
    let runs: Vec<Result<SearchResult>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| climb(spec, cfg, r, rng::derive_seed(cfg.seed, r as u64)))
        .collect();
    let mut best: Option<SearchResult> = None;
    for run in runs {
        let run = run?;
        best = Some(match best {
            None => run,
            Some(b) => {
                let better = run.ratio > b.ratio || (run.ratio == b.ratio && run.restart_seed < b.restart_seed);
                if better {
                    run
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("at least one restart"))
}

fn start_point(rng: &mut rng::Rng, n: usize) -> Result<(CoefficientVector, CoefficientVector)> {
    // small integers keep some arithmetic structure reachable from the start
    let sign = |rng: &mut rng::Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
    let alpha: Vec<f64> = (0..n).map(|_| sign(rng) * rng.random_range(1..=3) as f64).collect();
    let beta: Vec<f64> = (0..n).map(|_| sign(rng) * rng.random_range(0.25..1.0)).collect();
    normalize(CoefficientVector::new(alpha)?, CoefficientVector::new_allow_zero(beta)?)
}

/// Scales both vectors so that `‖α‖ = 1`.
fn normalize(alpha: CoefficientVector, beta: CoefficientVector) -> Result<(CoefficientVector, CoefficientVector)> {
    let s = 1.0 / alpha.norm();
    Ok((alpha.scaled(s), beta.scaled(s)))
}

fn perturb(
    rng: &mut rng::Rng,
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
) -> Result<Option<(CoefficientVector, CoefficientVector)>> {
    let n = alpha.len();
    let k = rng.random_range(0..2 * n);
    let m = rng.random_range(0..FACTORS.len() + 1);
    let factor = if m == FACTORS.len() { -1.0 } else { FACTORS[m] };
    let mut a = alpha.entries().to_vec();
    let mut b = beta.entries().to_vec();
    if k < n {
        a[k] *= factor;
    } else {
        b[k - n] *= factor;
    }
    let (a, b) = normalize(CoefficientVector::new(a)?, CoefficientVector::new_allow_zero(b)?)?;
    if b.norm() / a.norm() < MIN_BETA_RATIO {
        return Ok(None);
    }
    Ok(Some((a, b)))
}

fn climb(spec: &DistributionSpec, cfg: &SearchConfig, restart: usize, seed: u64) -> Result<SearchResult> {
    let mut rng = rng::stream(seed, 0);
    let (mut alpha, mut beta) = start_point(&mut rng, cfg.n)?;
    let mut current = ratio(&alpha, &beta, spec, cfg.theorem, &cfg.settings, rng::derive_seed(seed, 0))?;
    let mut trace = vec![TracePoint {
        iteration: 0,
        ratio: current.ratio,
    }];
    let mut accepted = 0;
    for step in 1..=cfg.steps {
        if let Some((a, b)) = perturb(&mut rng, &alpha, &beta)? {
            let cand = ratio(&a, &b, spec, cfg.theorem, &cfg.settings, rng::derive_seed(seed, step as u64))?;
            let take = if cand.estimate.is_exact() && current.estimate.is_exact() {
                cand.ratio > current.ratio
            } else {
                cand.ratio_lo() > current.ratio_hi()
            };
            if take {
                alpha = a;
                beta = b;
                current = cand;
                accepted += 1;
            }
        }
        trace.push(TracePoint {
            iteration: step,
            ratio: current.ratio,
        });
    }
    Ok(SearchResult {
        theorem_id: cfg.theorem,
        best_alpha: alpha,
        best_beta: beta,
        ratio: current.ratio,
        estimate: current.estimate,
        bound: current.bound,
        trace,
        restart,
        restart_seed: seed,
        accepted,
    })
}

/// Trace as CSV with a header row.
pub fn trace_csv(result: &SearchResult) -> String {
    let mut out = String::from("iteration,ratio\n");
    for p in &result.trace {
        out.push_str(&format!("{},{:.16e}\n", p.iteration, p.ratio));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SozeRow {
    pub n: usize,
    pub estimate: ProbEstimate,
    pub n_times_p: f64,
    /// `‖β‖/‖α‖ = √(6/((n+1)(2n+1)))`.
    pub norm_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SozeTable {
    pub rows: Vec<SozeRow>,
    /// `max n·P` over the exact rows.
    pub max_n_times_p: f64,
}

/// `P{|Σ i X_i| <= |Σ X_i|}` for each `n`, exact when feasible.
pub fn soze_family(n_list: &[usize], spec: &DistributionSpec, settings: &RatioSettings, seed: u64) -> Result<SozeTable> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::Domain("soze family needs n >= 1".into()));
        }
        let alpha = CoefficientVector::new((1..=n).map(|i| i as f64).collect())?;
        let beta = CoefficientVector::ones(n);
        let est = estimate(&alpha, &beta, spec, settings, rng::derive_seed(seed, n as u64))?;
        rows.push(SozeRow {
            n,
            estimate: est,
            n_times_p: n as f64 * est.value,
            norm_ratio: beta.norm() / alpha.norm(),
        });
    }
    let max_n_times_p = rows
        .iter()
        .filter(|r| r.estimate.is_exact())
        .map(|r| r.n_times_p)
        .fold(0.0, f64::max);
    Ok(SozeTable { rows, max_n_times_p })
}
