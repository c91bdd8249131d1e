use num_complex::Complex64;

use super::{integrate_real_line, DistributionSpec, Law};
use crate::error::{Error, Result};
use crate::quad::{self, QuadOpts};

const NORMALIZER_OPTS: QuadOpts = QuadOpts {
    abs_tol: 1e-10,
    rel_tol: 1e-13,
    max_intervals: 8000,
};

/// Exponential tilt `dF_t(x) = e^{tx} dF(x) / M(t)`.
///
/// Discrete laws are tilted exactly. Continuous laws keep the base density
/// and the normalizer `M(t)`, which is computed by adaptive quadrature.
#[derive(Debug, Clone)]
pub struct TiltedDistribution {
    base: Law,
    t: f64,
    normalizer: f64,
    atoms: Option<Vec<(f64, f64)>>,
}

/// Tilts `spec` by `t`. Fails with a capability error when `M(t) = inf`.
pub fn tilt(spec: &DistributionSpec, t: f64) -> Result<TiltedDistribution> {
    TiltedDistribution::new(spec.law()?, t)
}

impl TiltedDistribution {
    pub fn new(base: Law, t: f64) -> Result<Self> {
        if t != 0.0 && t.abs() >= base.mgf_radius() {
            return Err(Error::Capability(format!(
                "cannot tilt {} by {t}: mgf finite only for |t| < {}",
                base.spec().family_name(),
                base.mgf_radius()
            )));
        }
        if let Some(atoms) = base.atoms() {
            let weights: Vec<f64> = atoms.iter().map(|&(v, p)| p * (t * v).exp()).collect();
            let normalizer: f64 = weights.iter().sum();
            let atoms = atoms.iter().zip(&weights).map(|(&(v, _), &w)| (v, w / normalizer)).collect();
            return Ok(TiltedDistribution {
                base,
                t,
                normalizer,
                atoms: Some(atoms),
            });
        }
        let normalizer = if t == 0.0 { 1.0 } else { base.mgf_by_quadrature(t)? };
        Ok(TiltedDistribution {
            base,
            t,
            normalizer,
            atoms: None,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `M(t)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn base(&self) -> &Law {
        &self.base
    }

    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        self.atoms.as_deref()
    }

    pub fn support(&self) -> (f64, f64) {
        self.base.support()
    }

    pub fn kinks(&self) -> Vec<f64> {
        self.base.kinks()
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if self.atoms.is_some() {
            return Err(Error::Capability("tilted discrete law has no density".into()));
        }
        Ok(self.base.density(x)? * (self.t * x).exp() / self.normalizer)
    }

    /// Tilts the already tilted law by `s`; the new normalizer is computed
    /// from the tilted density itself.
    pub fn tilt(&self, s: f64) -> Result<TiltedDistribution> {
        let total = self.t + s;
        if total != 0.0 && total.abs() >= self.base.mgf_radius() {
            return Err(Error::Capability(format!("cannot tilt by {total}")));
        }
        if self.atoms.is_some() {
            return TiltedDistribution::new(self.base.clone(), total);
        }
        let (lo, hi) = self.support();
        let f = |x: f64| (s * x).exp() * self.density(x).unwrap_or(0.0);
        let m = integrate_real_line(&f, lo, hi, &self.kinks(), NORMALIZER_OPTS)?;
        Ok(TiltedDistribution {
            base: self.base.clone(),
            t: total,
            normalizer: self.normalizer * m,
            atoms: None,
        })
    }

    /// Truncation radius outside which the tilted density is negligible.
    pub fn effective_range(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        if lo.is_finite() && hi.is_finite() {
            return (lo, hi);
        }
        let mut r = 1.0;
        while r < 1e6 {
            let right = self.density(r).unwrap_or(0.0);
            let left = self.density(-r).unwrap_or(0.0);
            if right * r < 1e-18 && left * r < 1e-18 {
                break;
            }
            r *= 1.25;
        }
        (lo.max(-r), hi.min(r))
    }

    /// Characteristic function of the tilted law.
    pub fn cf(&self, lambda: f64) -> Result<Complex64> {
        if let Some(atoms) = &self.atoms {
            return Ok(atoms.iter().map(|&(v, p)| Complex64::from_polar(p, lambda * v)).sum());
        }
        match self.base.spec() {
            DistributionSpec::Laplace { b } => {
                // analytic continuation of 1/(1 + b²λ²) to λ - i t
                let z = Complex64::new(lambda, -self.t);
                Ok(Complex64::new(1.0 / self.normalizer, 0.0) / (1.0 + b * b * z * z))
            }
            DistributionSpec::Gaussian { sigma } => {
                let mean = sigma * sigma * self.t;
                Ok(Complex64::from_polar((-0.5 * (sigma * lambda).powi(2)).exp(), lambda * mean))
            }
            _ => {
                let (lo, hi) = self.effective_range();
                let kinks = self.kinks();
                let opts = QuadOpts {
                    abs_tol: 1e-13,
                    rel_tol: 0.0,
                    max_intervals: 20_000,
                };
                let re = quad::integrate_with_breaks(|x| (lambda * x).cos() * self.density(x).unwrap_or(0.0), lo, hi, &kinks, opts)?;
                let im = quad::integrate_with_breaks(|x| (lambda * x).sin() * self.density(x).unwrap_or(0.0), lo, hi, &kinks, opts)?;
                Ok(Complex64::new(re.value, im.value))
            }
        }
    }

    /// `∫ h dF_t` for a test function `h` with kinks at `breaks`.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H, breaks: &[f64]) -> Result<f64> {
        if let Some(atoms) = &self.atoms {
            return Ok(atoms.iter().map(|&(v, p)| p * h(v)).sum());
        }
        let (lo, hi) = self.effective_range();
        let mut cuts = self.kinks();
        cuts.extend_from_slice(breaks);
        let f = |x: f64| h(x) * self.density(x).unwrap_or(0.0);
        Ok(quad::integrate_with_breaks(
            f,
            lo,
            hi,
            &cuts,
            QuadOpts {
                abs_tol: 1e-12,
                rel_tol: 1e-12,
                max_intervals: 8000,
            },
        )?
        .value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rademacher_two_point_tilt() {
        let d = tilt(&DistributionSpec::Rademacher, 0.5).unwrap();
        let atoms = d.atoms().unwrap();
        let c = 0.5f64.cosh();
        assert_abs_diff_eq!(atoms[1].1, 0.5f64.exp() / (2.0 * c), epsilon = 1e-15);
        assert_abs_diff_eq!(atoms[0].1, (-0.5f64).exp() / (2.0 * c), epsilon = 1e-15);
        assert_abs_diff_eq!(atoms[1].1, 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(d.normalizer(), c, epsilon = 1e-15);
    }

    #[test]
    fn zero_tilt_is_identity() {
        for spec in [
            DistributionSpec::Rademacher,
            DistributionSpec::laplace(1.0),
            DistributionSpec::gaussian(2.0),
        ] {
            let d = tilt(&spec, 0.0).unwrap();
            assert_eq!(d.normalizer(), 1.0);
            let law = spec.law().unwrap();
            if law.has_density() {
                for &x in &[-1.0, 0.2, 3.0] {
                    assert_eq!(d.density(x).unwrap(), law.density(x).unwrap());
                }
            } else {
                assert_eq!(d.atoms().unwrap(), law.atoms().unwrap().as_slice());
            }
        }
    }

    #[test]
    fn normalizer_matches_closed_form_mgf() {
        let d = tilt(&DistributionSpec::laplace(0.5), 1.2).unwrap();
        assert_abs_diff_eq!(d.normalizer(), 1.0 / (1.0 - 0.36), epsilon = 1e-10);
        assert_eq!(tilt(&DistributionSpec::laplace(0.5), 2.0).unwrap_err().kind(), "capability");
    }

    #[test]
    fn tilted_density_integrates_to_one() {
        for (spec, t) in [
            (DistributionSpec::laplace(1.0), 0.7),
            (DistributionSpec::gaussian(1.0), -1.5),
            (DistributionSpec::ExponentialPower { p: 1.5, scale: 1.0 }, 0.9),
            (DistributionSpec::Uniform { lo: -1.0, hi: 1.0 }, 2.0),
        ] {
            let d = tilt(&spec, t).unwrap();
            let total = d.expect(|_| 1.0, &[]).unwrap();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn tilt_round_trip_recovers_base() {
        for (spec, t) in [
            (DistributionSpec::laplace(1.0), 0.6),
            (DistributionSpec::ExponentialPower { p: 2.5, scale: 1.3 }, 1.1),
            (DistributionSpec::Uniform { lo: -0.5, hi: 2.0 }, -0.8),
        ] {
            let law = spec.law().unwrap();
            let back = tilt(&spec, t).unwrap().tilt(-t).unwrap();
            assert_eq!(back.t(), 0.0);
            for &x in &[-1.3, -0.1, 0.4, 1.7] {
                assert_abs_diff_eq!(back.density(x).unwrap(), law.density(x).unwrap(), epsilon = 1e-8);
            }
        }
        let r = tilt(&DistributionSpec::Rademacher, 0.4).unwrap().tilt(-0.4).unwrap();
        assert_abs_diff_eq!(r.atoms().unwrap()[0].1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn laplace_tilted_cf_matches_quadrature() {
        let d = tilt(&DistributionSpec::laplace(0.5), 0.8).unwrap();
        let (lo, hi) = d.effective_range();
        for &l in &[0.0, 0.7, 3.0] {
            let closed = d.cf(l).unwrap();
            let re = quad::integrate_with_breaks(|x| (l * x).cos() * d.density(x).unwrap(), lo, hi, &[0.0], QuadOpts::default()).unwrap();
            let im = quad::integrate_with_breaks(|x| (l * x).sin() * d.density(x).unwrap(), lo, hi, &[0.0], QuadOpts::default()).unwrap();
            assert_abs_diff_eq!(closed.re, re.value, epsilon = 1e-9);
            assert_abs_diff_eq!(closed.im, im.value, epsilon = 1e-9);
        }
    }
}
