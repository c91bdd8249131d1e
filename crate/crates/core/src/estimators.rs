//! Exact and Monte Carlo estimates of `P{|<α,X>| <= |<β,X>|}`, Lévy
//! concentration functions and empirical tails.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{normal_two_sided_quantile, DistributionSpec, Law};
use crate::error::{Error, Result};
use crate::lcd::CoefficientVector;
use crate::rng::{self, Rng};

/// Default bound on `sⁿ` for exact enumeration.
pub const DEFAULT_ENUM_LIMIT: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// A probability with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub value: f64,
    pub method: Method,
    /// `None` for exact values.
    pub ci_level: Option<f64>,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Outcomes enumerated (exact) or draws (Monte Carlo).
    pub n_samples: u64,
    pub seed: Option<u64>,
}

impl ProbEstimate {
    fn exact(value: f64, outcomes: u64) -> Self {
        let value = value.clamp(0.0, 1.0);
        ProbEstimate {
            value,
            method: Method::Exact,
            ci_level: None,
            ci_lo: value,
            ci_hi: value,
            n_samples: outcomes,
            seed: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.method == Method::Exact
    }

    /// Binomial standard error of the point value (0 for exact).
    pub fn std_error(&self) -> f64 {
        if self.is_exact() {
            0.0
        } else {
            (self.value * (1.0 - self.value) / self.n_samples as f64).sqrt()
        }
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, level: f64) -> (f64, f64) {
    let z = normal_two_sided_quantile(level);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Which comparison decides the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    /// `|u| <= |v|`
    Le,
    /// `|u| < |v|`
    Lt,
}

/// Ties within rounding of the accumulated sums count as equal.
#[inline]
fn decide(u: f64, v: f64, scale: f64, n: usize, cmp: Cmp) -> bool {
    let tol = 8.0 * n as f64 * f64::EPSILON * scale;
    match cmp {
        Cmp::Le => u.abs() <= v.abs() + tol,
        Cmp::Lt => u.abs() < v.abs() - tol,
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(mut self, other: Neumaier) -> Neumaier {
        self.add(other.sum);
        self.add(other.comp);
        self
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn check_dims(alpha: &CoefficientVector, beta: &CoefficientVector) -> Result<()> {
    if alpha.len() != beta.len() {
        return Err(Error::Domain(format!(
            "alpha has {} entries but beta has {}",
            alpha.len(),
            beta.len()
        )));
    }
    Ok(())
}

fn finite_atoms(spec: &DistributionSpec) -> Result<Vec<(f64, f64)>> {
    spec.law()?.atoms().ok_or_else(|| {
        Error::Capability(format!(
            "exact enumeration needs a finite-support law, got {}; use --method mc",
            spec.family_name()
        ))
    })
}

/// Number of outcomes `sⁿ`, as a float so it cannot overflow.
pub fn outcome_count(support: usize, n: usize) -> f64 {
    (support as f64).powi(n as i32)
}

/// Exact `P{|<α,X>| <= |<β,X>|}` by enumerating `supportⁿ`.
pub fn exact_probability(alpha: &CoefficientVector, beta: &CoefficientVector, spec: &DistributionSpec, limit: u64) -> Result<ProbEstimate> {
    enumerate(alpha, beta, spec, limit, Cmp::Le)
}

/// Exact `P{|<α,X>| < |<β,X>|}`; complements [`exact_probability`] with the arguments swapped.
pub fn exact_probability_strict(
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    spec: &DistributionSpec,
    limit: u64,
) -> Result<ProbEstimate> {
    enumerate(alpha, beta, spec, limit, Cmp::Lt)
}

fn enumerate(alpha: &CoefficientVector, beta: &CoefficientVector, spec: &DistributionSpec, limit: u64, cmp: Cmp) -> Result<ProbEstimate> {
    check_dims(alpha, beta)?;
    let atoms = finite_atoms(spec)?;
    let n = alpha.len();
    let s = atoms.len();
    let outcomes = outcome_count(s, n);
    if outcomes > limit as f64 {
        return Err(Error::Size { outcomes, limit });
    }
    let values: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    let logp: Vec<f64> = atoms.iter().map(|a| a.1.ln()).collect();
    let (a, b) = (alpha.entries(), beta.entries());

    // the leading `lead` coordinates index independent work units
    let mut lead = 0;
    while lead < n && outcome_count(s, lead) < 256.0 {
        lead += 1;
    }
    let units = outcome_count(s, lead) as usize;
    let parts: Vec<Neumaier> = (0..units)
        .into_par_iter()
        .map(|unit| {
            let mut digits = vec![0usize; n];
            let mut rest = unit;
            for d in digits[..lead].iter_mut().rev() {
                *d = rest % s;
                rest /= s;
            }
            // prefix[k] = partial sums over coordinates < k
            let mut pu = vec![0.0; n + 1];
            let mut pv = vec![0.0; n + 1];
            let mut pscale = vec![0.0; n + 1];
            let mut plog = vec![0.0; n + 1];
            let refresh = |from: usize, digits: &[usize], pu: &mut [f64], pv: &mut [f64], pscale: &mut [f64], plog: &mut [f64]| {
                for k in from..n {
                    let x = values[digits[k]];
                    pu[k + 1] = pu[k] + a[k] * x;
                    pv[k + 1] = pv[k] + b[k] * x;
                    pscale[k + 1] = pscale[k] + (a[k] * x).abs() + (b[k] * x).abs();
                    plog[k + 1] = plog[k] + logp[digits[k]];
                }
            };
            refresh(0, &digits, &mut pu, &mut pv, &mut pscale, &mut plog);
            let mut acc = Neumaier::default();
            loop {
                if decide(pu[n], pv[n], pscale[n], n, cmp) {
                    acc.add(plog[n].exp());
                }
                // odometer over the free coordinates lead..n
                let mut k = n;
                loop {
                    if k == lead {
                        return acc;
                    }
                    k -= 1;
                    digits[k] += 1;
                    if digits[k] < s {
                        break;
                    }
                    digits[k] = 0;
                }
                refresh(k, &digits, &mut pu, &mut pv, &mut pscale, &mut plog);
            }
        })
        .collect();
    let total = parts.into_iter().fold(Neumaier::default(), Neumaier::merge);
    Ok(ProbEstimate::exact(total.value(), outcomes as u64))
}

fn require_sampleable(spec: &DistributionSpec) -> Result<Law> {
    let law = spec.law()?;
    if !law.capabilities().sampleable {
        return Err(Error::Capability(format!("{} is not sampleable", spec.family_name())));
    }
    Ok(law)
}

fn check_mc_args(n_samples: u64, ci_level: f64) -> Result<()> {
    if n_samples < 100 {
        return Err(Error::Domain(format!("Monte Carlo needs at least 100 samples, got {n_samples}")));
    }
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::Domain(format!("ci level must lie in (0, 1), got {ci_level}")));
    }
    Ok(())
}

/// Monte Carlo frequency of an event of `X ∈ Rⁿ` with i.i.d. coordinates.
///
/// `event` receives a scratch realization; the estimate is a function of
/// `(spec, dim, n_samples, seed)` only.
pub fn mc_event<E>(spec: &DistributionSpec, dim: usize, n_samples: u64, seed: u64, ci_level: f64, event: E) -> Result<ProbEstimate>
where
    E: Fn(&[f64]) -> bool + Sync,
{
    check_mc_args(n_samples, ci_level)?;
    let law = require_sampleable(spec)?;
    let hits = rng::chunked(
        n_samples,
        seed,
        |rng: &mut Rng, m| {
            let mut x = vec![0.0; dim];
            let mut k = 0u64;
            for _ in 0..m {
                for xi in x.iter_mut() {
                    *xi = law.draw(rng);
                }
                k += event(&x) as u64;
            }
            k
        },
        |a, b| a + b,
        0u64,
    );
    Ok(from_counts(hits, n_samples, seed, ci_level))
}

/// Builds a Monte Carlo estimate from a hit count.
pub fn from_counts(hits: u64, n_samples: u64, seed: u64, ci_level: f64) -> ProbEstimate {
    let (ci_lo, ci_hi) = wilson(hits, n_samples, ci_level);
    ProbEstimate {
        value: hits as f64 / n_samples as f64,
        method: Method::MonteCarlo,
        ci_level: Some(ci_level),
        ci_lo,
        ci_hi,
        n_samples,
        seed: Some(seed),
    }
}

/// Monte Carlo estimate of `P{|<α,X>| <= |<β,X>|}` with a Wilson interval.
pub fn mc_probability(
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    spec: &DistributionSpec,
    n_samples: u64,
    seed: u64,
    ci_level: f64,
) -> Result<ProbEstimate> {
    check_dims(alpha, beta)?;
    let (a, b) = (alpha.entries(), beta.entries());
    let n = a.len();
    mc_event(spec, n, n_samples, seed, ci_level, |x| {
        let (mut u, mut v, mut scale) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let (p, q) = (a[k] * x[k], b[k] * x[k]);
            u += p;
            v += q;
            scale += p.abs() + q.abs();
        }
        decide(u, v, scale, n, Cmp::Le)
    })
}

/// Exact when `supportⁿ <= limit`, Monte Carlo otherwise.
pub fn probability(
    alpha: &CoefficientVector,
    beta: &CoefficientVector,
    spec: &DistributionSpec,
    limit: u64,
    n_samples: u64,
    seed: u64,
    ci_level: f64,
) -> Result<ProbEstimate> {
    let law = spec.law()?;
    if let Some(atoms) = law.atoms() {
        if outcome_count(atoms.len(), alpha.len()) <= limit as f64 {
            return exact_probability(alpha, beta, spec, limit);
        }
    }
    mc_probability(alpha, beta, spec, n_samples, seed, ci_level)
}

/// `n_samples` draws of `<α,X>`.
pub fn sample_form(alpha: &CoefficientVector, spec: &DistributionSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let law = require_sampleable(spec)?;
    let a = alpha.entries();
    Ok(rng::chunked(
        n_samples as u64,
        seed,
        |rng, m| {
            (0..m)
                .map(|_| a.iter().map(|ai| ai * law.draw(rng)).sum::<f64>())
                .collect::<Vec<f64>>()
        },
        |mut x, y| {
            x.extend(y);
            x
        },
        Vec::with_capacity(n_samples),
    ))
}

/// Empirical Lévy concentration `sup_a P{a <= X <= a + t}` over sorted samples.
pub fn concentration_fn(sorted: &[f64], t: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Domain("concentration function of an empty sample".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("window width must be >= 0, got {t}")));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("samples must be sorted".into()));
    }
    // the sup is attained with a at a sample point
    let mut best = 0usize;
    let mut j = 0usize;
    for i in 0..sorted.len() {
        if j < i {
            j = i;
        }
        while j < sorted.len() && sorted[j] - sorted[i] <= t {
            j += 1;
        }
        best = best.max(j - i);
    }
    Ok(best as f64 / sorted.len() as f64)
}

/// Empirical `P{|X| > u}`.
pub fn tail_prob(samples: &[f64], u: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("tail probability of an empty sample".into()));
    }
    Ok(samples.iter().filter(|x| x.abs() > u).count() as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> CoefficientVector {
        CoefficientVector::new_allow_zero(x.to_vec()).unwrap()
    }

    fn rad() -> DistributionSpec {
        DistributionSpec::Rademacher
    }

    #[test]
    fn exact_examples() {
        let p = exact_probability(&v(&[1.0, 1.0]), &v(&[1.0, -1.0]), &rad(), DEFAULT_ENUM_LIMIT).unwrap();
        assert_eq!(p.value, 0.5);
        assert_eq!((p.ci_lo, p.ci_hi, p.n_samples), (0.5, 0.5, 4));
        let p = exact_probability(&v(&[2.0, 1.0]), &v(&[1.0, 1.0]), &rad(), DEFAULT_ENUM_LIMIT).unwrap();
        assert_eq!(p.value, 0.0);
        let p = exact_probability(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &rad(), DEFAULT_ENUM_LIMIT).unwrap();
        assert_eq!(p.value, 1.0);
    }

    #[test]
    fn ties_survive_rounding() {
        // 0.1 + 0.2 != 0.3 in binary; the tie must still count
        let p = exact_probability(&v(&[0.3]), &v(&[0.1]), &DistributionSpec::finite(vec![(1.0, 1.0)]), 10).unwrap();
        assert_eq!(p.value, 0.0);
        let a = v(&[0.1, 0.2]);
        let b = v(&[0.3, 0.0]);
        let p = exact_probability(&a, &b, &rad(), 16).unwrap();
        assert_eq!(p.value, 1.0);
    }

    #[test]
    fn size_and_capability_errors() {
        let e = exact_probability(
            &CoefficientVector::ones(25),
            &CoefficientVector::ones(25),
            &rad(),
            DEFAULT_ENUM_LIMIT,
        )
        .unwrap_err();
        assert_eq!(e.kind(), "size");
        assert_eq!(e.exit_code(), 3);
        let e = exact_probability(&v(&[1.0]), &v(&[1.0]), &DistributionSpec::gaussian(1.0), DEFAULT_ENUM_LIMIT).unwrap_err();
        assert_eq!(e.kind(), "capability");
        assert!(exact_probability(&v(&[1.0]), &v(&[1.0, 2.0]), &rad(), 16).is_err());
    }

    #[test]
    fn enumeration_matches_naive_loop() {
        let spec = DistributionSpec::finite(vec![(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)]);
        let a = v(&[0.7, -1.1, 0.3, 0.9, 0.2, -0.4]);
        let b = v(&[0.2, 0.5, -0.6, 0.1, 0.8, 0.3]);
        let atoms = spec.law().unwrap().atoms().unwrap();
        let mut naive = 0.0;
        for code in 0..3usize.pow(6) {
            let mut c = code;
            let (mut u, mut w, mut p) = (0.0, 0.0, 1.0);
            for k in 0..6 {
                let (x, q) = atoms[c % 3];
                c /= 3;
                u += a.entries()[k] * x;
                w += b.entries()[k] * x;
                p *= q;
            }
            if u.abs() <= w.abs() {
                naive += p;
            }
        }
        let p = exact_probability(&a, &b, &spec, 1000).unwrap();
        assert_abs_diff_eq!(p.value, naive, epsilon = 1e-14);
    }

    #[test]
    fn mc_examples() {
        let a = v(&[1.0, 1.0]);
        let p = mc_probability(&a, &a, &DistributionSpec::gaussian(1.0), 1000, 1, 0.99).unwrap();
        assert_eq!(p.value, 1.0);
        let b = v(&[1.0, -1.0]);
        let p = mc_probability(&a, &b, &rad(), 100_000, 3, 0.99).unwrap();
        assert!(p.ci_lo <= 0.5 && 0.5 <= p.ci_hi, "{p:?}");
        assert!(mc_probability(&a, &b, &rad(), 99, 3, 0.99).is_err());
    }

    #[test]
    fn gaussian_orthogonal_pair_matches_cauchy() {
        let a = v(&[1.0, 0.0, 0.0]);
        let b = v(&[0.0, 0.1, 0.0]);
        let truth = 2.0 / PI * 0.1f64.atan();
        let p = mc_probability(&a, &b, &DistributionSpec::gaussian(1.0), 1_000_000, 11, 0.99).unwrap();
        assert!(
            (p.value - truth).abs() <= 4.0 * (truth * (1.0 - truth) / 1e6).sqrt(),
            "{} vs {truth}",
            p.value
        );
    }

    #[test]
    fn mc_is_reproducible_across_thread_counts() {
        let a = v(&[0.3, 1.0, -0.5]);
        let b = v(&[0.1, 0.1, 0.2]);
        let run = || mc_probability(&a, &b, &DistributionSpec::laplace(1.0), 50_000, 9, 0.99).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, four);
    }

    #[test]
    fn wilson_contains_point_and_handles_extremes() {
        let (lo, hi) = wilson(0, 100, 0.99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson(100, 100, 0.99);
        assert!(lo < 1.0 && lo > 0.9);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson(30, 100, 0.95);
        assert!(lo < 0.3 && 0.3 < hi);
        // textbook value: 30/100 at 95% gives (0.2189, 0.3958)
        assert_abs_diff_eq!(lo, 0.2189, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.3958, epsilon = 1e-4);
    }

    #[test]
    fn ci_coverage_on_small_instance() {
        let a = v(&[1.0, 0.5, 0.25]);
        let b = v(&[0.3, 0.3, 0.3]);
        let exact = exact_probability(&a, &b, &rad(), 100).unwrap().value;
        let covered = (0..200u64)
            .filter(|&s| {
                let p = mc_probability(&a, &b, &rad(), 2000, 1000 + s, 0.99).unwrap();
                p.ci_lo <= exact && exact <= p.ci_hi
            })
            .count();
        assert!(covered >= 190, "covered {covered}/200");
    }

    #[test]
    fn concentration_examples() {
        assert_abs_diff_eq!(concentration_fn(&[1.0, 2.0, 3.0], 1.0).unwrap(), 2.0 / 3.0);
        assert_abs_diff_eq!(concentration_fn(&[1.0, 2.0, 3.0], 0.0).unwrap(), 1.0 / 3.0);
        assert!(concentration_fn(&[], 1.0).is_err());
        assert!(concentration_fn(&[2.0, 1.0], 1.0).is_err());
        let mut s = sample_form(&CoefficientVector::ones(4), &rad(), 100_000, 5).unwrap();
        s.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(concentration_fn(&s, 0.0).unwrap(), 0.375, epsilon = 0.01);
    }

    #[test]
    fn tail_examples() {
        assert_abs_diff_eq!(tail_prob(&[-2.0, 0.0, 3.0], 1.0).unwrap(), 2.0 / 3.0);
        assert_eq!(tail_prob(&[-2.0, 0.0, 3.0], -1.0).unwrap(), 1.0);
        let s = DistributionSpec::gaussian(1.0).law().unwrap().sample(1_000_000, 8);
        let truth = 2.0 * (1.0 - crate::distributions::normal_cdf(2.0));
        assert_abs_diff_eq!(tail_prob(&s, 2.0).unwrap(), truth, epsilon = 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn strict_complements_non_strict(a in prop::collection::vec(-3i32..4, 1..8), b in prop::collection::vec(-3i32..4, 1..8)) {
            let n = a.len().min(b.len());
            let a = v(&a[..n].iter().map(|&x| x as f64 * 0.1).collect::<Vec<_>>());
            let b = v(&b[..n].iter().map(|&x| x as f64 * 0.1).collect::<Vec<_>>());
            let spec = DistributionSpec::finite(vec![(-1.0, 0.25), (0.0, 0.25), (2.0, 0.5)]);
            let le = exact_probability(&a, &b, &spec, 1 << 16).unwrap().value;
            let lt = exact_probability_strict(&b, &a, &spec, 1 << 16).unwrap().value;
            prop_assert!((le + lt - 1.0).abs() < 1e-12);
        }

        #[test]
        fn joint_scaling_invariance(a in prop::collection::vec(-3i32..4, 1..8), b in prop::collection::vec(-3i32..4, 1..8), c in 0.01f64..100.0) {
            let n = a.len().min(b.len());
            let a = v(&a[..n].iter().map(|&x| x as f64).collect::<Vec<_>>());
            let b = v(&b[..n].iter().map(|&x| x as f64).collect::<Vec<_>>());
            let p1 = exact_probability(&a, &b, &rad(), 1 << 16).unwrap().value;
            let p2 = exact_probability(&a.scaled(c), &b.scaled(c), &rad(), 1 << 16).unwrap().value;
            prop_assert_eq!(p1, p2);
        }

        #[test]
        fn concentration_monotone_and_bounded(mut xs in prop::collection::vec(-5.0f64..5.0, 1..60), t1 in 0.0f64..3.0, dt in 0.0f64..3.0) {
            xs.sort_by(f64::total_cmp);
            let q1 = concentration_fn(&xs, t1).unwrap();
            let q2 = concentration_fn(&xs, t1 + dt).unwrap();
            prop_assert!(q1 <= q2 && q2 <= 1.0 && q1 > 0.0);
        }
    }
}
