use serde::{Deserialize, Serialize};

use super::Law;
use crate::error::{Error, Result};

const GRID: usize = 400;

/// Sub-exponential parameters: `E[e^{λX}] <= e^{λ²ν²/2}` for `|λ| <= 1/b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubExpParams {
    pub nu: f64,
    pub b: f64,
}

impl SubExpParams {
    /// Smallest `ν` (on a λ-grid, with a 1e-9 relative margin) that works
    /// for the given `b`.
    pub fn measure(law: &Law, b: f64) -> Result<SubExpParams> {
        if !(b > 0.0) {
            return Err(Error::Domain(format!("b must be > 0, got {b}")));
        }
        if law.mean().abs() > 1e-12 {
            return Err(Error::Domain("sub-exponential parameters need a zero-mean law".into()));
        }
        let lmax = 1.0 / b;
        if lmax >= law.mgf_radius() {
            return Err(Error::Capability(format!(
                "mgf of {} is not finite on |λ| <= 1/b = {lmax}",
                law.spec().family_name()
            )));
        }
        let mut nu2 = law.variance()?;
        for i in 1..=GRID {
            let lambda = lmax * i as f64 / GRID as f64;
            for l in [lambda, -lambda] {
                let m = law.mgf(l)?;
                nu2 = nu2.max(2.0 * m.ln() / (l * l));
            }
        }
        Ok(SubExpParams {
            nu: nu2.sqrt() * (1.0 + 1e-9),
            b,
        })
    }

    /// Checks the defining MGF inequality on a grid of `points` values of λ.
    pub fn holds_for(&self, law: &Law, points: usize) -> Result<bool> {
        let lmax = 1.0 / self.b;
        for i in 0..=points {
            let l = -lmax + 2.0 * lmax * i as f64 / points as f64;
            if law.mgf(l)? > (0.5 * l * l * self.nu * self.nu).exp() * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Parameters of `X / c`.
    pub fn rescaled(&self, c: f64) -> SubExpParams {
        SubExpParams {
            nu: self.nu / c,
            b: self.b / c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rademacher_nu_is_one() {
        let law = DistributionSpec::Rademacher.law().unwrap();
        let p = SubExpParams::measure(&law, 1.0).unwrap();
        assert_abs_diff_eq!(p.nu, 1.0, epsilon = 1e-6);
        assert!(p.holds_for(&law, 997).unwrap());
    }

    #[test]
    fn laplace_edge_dominates() {
        // sup is attained at λ = 1/(2s): ν² = 8 s² ln(4/3)
        let s = 0.7;
        let law = DistributionSpec::laplace(s).law().unwrap();
        let p = SubExpParams::measure(&law, 2.0 * s).unwrap();
        assert_abs_diff_eq!(p.nu * p.nu, 8.0 * s * s * (4.0f64 / 3.0).ln(), epsilon = 1e-8);
        assert!(p.holds_for(&law, 1001).unwrap());
        let tight = SubExpParams { nu: 0.99 * p.nu, b: p.b };
        assert!(!tight.holds_for(&law, 1001).unwrap());
        assert_eq!(SubExpParams::measure(&law, s).unwrap_err().kind(), "capability");
    }

    #[test]
    fn nonzero_mean_rejected() {
        let law = DistributionSpec::finite(vec![(0.0, 0.5), (1.0, 0.5)]).law().unwrap();
        assert!(SubExpParams::measure(&law, 1.0).is_err());
    }
}
