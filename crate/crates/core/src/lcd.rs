//! Essential least common denominator and the lattice distance behind it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real coefficient vector with its Euclidean norm cached.
///
/// `new` rejects the zero vector; `new_allow_zero` exists for the `β` and
/// orthogonal-remainder roles, where zero is a legitimate degenerate input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector {
    entries: Vec<f64>,
    norm: f64,
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        CoefficientVector::new_allow_zero(entries)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(v: CoefficientVector) -> Vec<f64> {
        v.entries
    }
}

fn euclid(v: &[f64]) -> f64 {
    // scaled to avoid overflow for huge entries
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

impl CoefficientVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let v = Self::new_allow_zero(entries)?;
        if v.norm == 0.0 {
            return Err(Error::Domain("coefficient vector has no nonzero entry".into()));
        }
        Ok(v)
    }

    pub fn new_allow_zero(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("coefficient vector is empty".into()));
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("entry {i} is not finite")));
        }
        let norm = euclid(&entries);
        Ok(CoefficientVector { entries, norm })
    }

    /// Parses one real per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let s = line.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let x: f64 = s
                .parse()
                .map_err(|_| Error::config(format!("line {}", i + 1), format!("not a real number: {s:?}")))?;
            entries.push(x);
        }
        Self::new_allow_zero(entries)
    }

    pub fn ones(n: usize) -> Self {
        Self::new(vec![1.0; n]).expect("n > 0")
    }

    /// The `i`-th standard basis vector of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        Self::new(e).expect("n > i")
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    /// `max_i |v_i|`.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    pub fn dot(&self, other: &CoefficientVector) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    /// `⟨v, x⟩` for a realization `x`.
    pub fn apply(&self, x: &[f64]) -> f64 {
        self.entries.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, c: f64) -> CoefficientVector {
        CoefficientVector::new_allow_zero(self.entries.iter().map(|x| c * x).collect()).expect("finite scaling")
    }

    pub fn normalized(&self) -> Result<CoefficientVector> {
        if self.is_zero() {
            return Err(Error::Domain("cannot normalize the zero vector".into()));
        }
        Ok(self.scaled(1.0 / self.norm))
    }

    /// Recomputes the norm from scratch; used to check the cache.
    pub fn recomputed_norm(&self) -> f64 {
        euclid(&self.entries)
    }
}

/// `dist(θα, Zⁿ)`; half-integers round to even, which does not change the distance.
pub fn dist_to_lattice(theta: f64, alpha: &CoefficientVector) -> f64 {
    alpha
        .entries()
        .iter()
        .map(|a| {
            let y = theta * a;
            let r = y - y.round_ties_even();
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcdResult {
    /// Left endpoint of the first admissible interval, or `search_cap` when capped.
    pub theta_star: f64,
    pub achieved_dist: f64,
    pub gamma: f64,
    /// No admissible `θ` in `(0, search_cap]`; read `theta_star` as a lower bound.
    pub capped: bool,
    pub search_cap: f64,
}

impl LcdResult {
    /// `1/LCD`, which is an upper bound on the true value when capped.
    pub fn reciprocal(&self) -> f64 {
        1.0 / self.theta_star
    }
}

/// Default cap `1e3·max(1, n)/‖α‖`.
pub fn default_search_cap(alpha: &CoefficientVector) -> f64 {
    1e3 * (alpha.len().max(1) as f64) / alpha.norm()
}

pub const DEFAULT_TOL: f64 = 1e-9;

/// `dist(θα, Zⁿ) - min(γ, ‖θα‖/10)`; `θ` is admissible iff this is `<= 0`.
fn excess(theta: f64, alpha: &CoefficientVector, gamma: f64) -> f64 {
    dist_to_lattice(theta, alpha) - gamma.min(theta * alpha.norm() / 10.0)
}

/// Essential LCD: `inf{θ > 0 : dist(θα, Zⁿ) <= min(γ, ‖θα‖/10)}` searched on
/// `(0, search_cap]` and located within `tol`. The input is not normalized.
pub fn lcd(alpha: &CoefficientVector, gamma: f64, search_cap: f64, tol: f64) -> Result<LcdResult> {
    if alpha.is_zero() {
        return Err(Error::Domain("LCD of the zero vector is undefined".into()));
    }
    for (name, v) in [("gamma", gamma), ("search_cap", search_cap), ("tol", tol)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be a positive finite number, got {v}")));
        }
    }
    // f = excess is Lipschitz with constant 1.1‖α‖: stepping by f/L never
    // jumps over an admissible point, the floor `tol` only skips intervals
    // narrower than tol
    let lip = 1.1 * alpha.norm();
    let mut lo = 0.0;
    let mut theta = tol.min(search_cap);
    loop {
        let f = excess(theta, alpha, gamma);
        if f <= 0.0 {
            break;
        }
        if theta >= search_cap {
            return Ok(LcdResult {
                theta_star: search_cap,
                achieved_dist: dist_to_lattice(search_cap, alpha),
                gamma,
                capped: true,
                search_cap,
            });
        }
        lo = theta;
        theta = (theta + (f / lip).max(tol)).min(search_cap);
    }
    // f(lo) > 0 (or lo = 0), f(theta) <= 0
    let mut hi = theta;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if excess(mid, alpha, gamma) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LcdResult {
        theta_star: hi,
        achieved_dist: dist_to_lattice(hi, alpha),
        gamma,
        capped: false,
        search_cap,
    })
}

/// `LCD_γ(α/‖α‖)` with the default cap and tolerance, as used by bound evaluators.
pub fn lcd_normalized(alpha: &CoefficientVector, gamma: f64) -> Result<LcdResult> {
    let unit = alpha.normalized()?;
    lcd(&unit, gamma, default_search_cap(&unit), DEFAULT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> CoefficientVector {
        CoefficientVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn lattice_distance_examples() {
        assert_abs_diff_eq!(dist_to_lattice(0.5, &v(&[1.0, 1.0])), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(dist_to_lattice(1.0, &v(&[3.0, 7.0])), 0.0);
        assert_abs_diff_eq!(dist_to_lattice(2.5, &v(&[0.2, 0.4])), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn vector_invariants() {
        assert!(CoefficientVector::new(vec![0.0, 0.0]).is_err());
        assert!(CoefficientVector::new(vec![]).is_err());
        assert!(CoefficientVector::new(vec![1.0, f64::NAN]).is_err());
        let a = v(&[3.0, -4.0]);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.max_abs(), 4.0);
        let p = CoefficientVector::parse("1.5\n# c\n\n-2 # trailing\n").unwrap();
        assert_eq!(p.entries(), &[1.5, -2.0]);
        assert_eq!(CoefficientVector::parse("1\nx\n").unwrap_err().kind(), "config");
    }

    #[test]
    fn closed_cases() {
        let r = lcd(&v(&[1.0, 0.0]), 0.2, 100.0, 1e-10).unwrap();
        assert!(!r.capped);
        assert_abs_diff_eq!(r.theta_star, 10.0 / 11.0, epsilon = 1e-9);
        let r = lcd(&v(&[1.0 / 3.0; 9]), 0.2, 100.0, 1e-10).unwrap();
        assert_abs_diff_eq!(r.theta_star, 2.8, epsilon = 1e-9);
        assert!(r.achieved_dist <= 0.2 + 1e-9);
        let r = lcd(&v(&[1.0, 0.0]), 0.05, 100.0, 1e-10).unwrap();
        assert_abs_diff_eq!(r.theta_star, 0.95, epsilon = 1e-9);
    }

    #[test]
    fn cap_and_domain_errors() {
        let r = lcd(&v(&[1.0, 0.0]), 0.2, 0.5, 1e-6).unwrap();
        assert!(r.capped);
        assert_eq!(r.theta_star, 0.5);
        assert_eq!(lcd(&v(&[1.0]), 0.0, 1.0, 1e-6).unwrap_err().kind(), "domain");
        assert_eq!(lcd(&v(&[1.0]), 0.1, -1.0, 1e-6).unwrap_err().kind(), "domain");
        assert_eq!(lcd(&v(&[1.0]), 0.1, 1.0, 0.0).unwrap_err().kind(), "domain");
        let zero = CoefficientVector::new_allow_zero(vec![0.0]).unwrap();
        assert_eq!(lcd(&zero, 0.1, 1.0, 1e-6).unwrap_err().kind(), "domain");
    }

    #[test]
    fn integer_vectors_have_lcd_at_most_norm() {
        for a in [[1.0, 2.0, 2.0], [3.0, 0.0, 4.0], [1.0, 1.0, 1.0]] {
            let a = v(&a);
            let unit = a.normalized().unwrap();
            assert_abs_diff_eq!(dist_to_lattice(a.norm(), &unit), 0.0, epsilon = 1e-12);
            let r = lcd(&unit, 0.1, 1e3, 1e-9).unwrap();
            assert!(r.theta_star <= a.norm() + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scale_covariance(a in prop::collection::vec(-2.0f64..2.0, 2..6), c in 0.3f64..4.0, g in 0.05f64..1.0) {
            prop_assume!(euclid(&a) > 0.1);
            let a = v(&a);
            let tol = 1e-9;
            let r1 = lcd(&a, g, 1e4, tol).unwrap();
            let r2 = lcd(&a.scaled(c), g, 1e4 / c, tol).unwrap();
            prop_assert_eq!(r1.capped, r2.capped);
            prop_assert!((r1.theta_star / c - r2.theta_star).abs() <= 2.0 * tol + 1e-12 * r1.theta_star);
        }

        #[test]
        fn permutation_and_sign_invariance(a in prop::collection::vec(-2.0f64..2.0, 2..6), g in 0.05f64..1.0, k in 0usize..6) {
            prop_assume!(euclid(&a) > 0.1);
            let mut b = a.clone();
            b.rotate_left(k % a.len());
            b[0] = -b[0];
            let tol = 1e-9;
            let r1 = lcd(&v(&a), g, 1e4, tol).unwrap();
            let r2 = lcd(&v(&b), g, 1e4, tol).unwrap();
            prop_assert!((r1.theta_star - r2.theta_star).abs() <= tol);
        }

        #[test]
        fn larger_gamma_never_increases(a in prop::collection::vec(-2.0f64..2.0, 2..6), g in 0.05f64..1.0, dg in 0.0f64..1.0) {
            prop_assume!(euclid(&a) > 0.1);
            let a = v(&a);
            let tol = 1e-9;
            let r1 = lcd(&a, g, 1e4, tol).unwrap();
            let r2 = lcd(&a, g + dg, 1e4, tol).unwrap();
            prop_assert!(r2.theta_star <= r1.theta_star + tol);
        }

        #[test]
        fn norm_cache_is_exact(a in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            prop_assume!(a.iter().any(|x| *x != 0.0));
            let a = v(&a);
            prop_assert!((a.norm() - a.recomputed_norm()).abs() <= 1e-12 * a.norm().max(1.0));
            prop_assert!(a.normalized().unwrap().norm() - 1.0 < 1e-12);
        }
    }
}
