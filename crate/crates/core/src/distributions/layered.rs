//! Layered representation of a symmetric unimodal density `f` as a mixture
//! of centered uniforms.
//!
//! With `g(y) = |{s : f(s) >= y}|` for `0 < y <= f(0)`, take `H` with density
//! `g` on `(0, f(0)]` and set `ξ = g(H)`. Then `ξ·Y` with `Y ~ U[-1/2, 1/2]`
//! has density `f`: conditional on `H = y` it is uniform on the level set.
//! Giving `ξ` itself the density `g` does not reproduce `f`.

use std::sync::Arc;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOpts};
use crate::rng;

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const SHAPE_POINTS: usize = 4001;
const SHAPE_TOL: f64 = 1e-12;
const FINE_CELLS_NEAR_ZERO: usize = 48;

/// Tabulated layered decomposition plus exact level-length evaluation.
#[derive(Clone)]
pub struct LayeredDecomposition {
    f: Density,
    peak: f64,
    edges: Vec<f64>,
    masses: Vec<f64>,
    xi_mid: Vec<f64>,
    cumulative: Vec<f64>,
}

impl std::fmt::Debug for LayeredDecomposition {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("LayeredDecomposition")
            .field("peak", &self.peak)
            .field("cells", &self.masses.len())
            .finish()
    }
}

/// Moments reported for the scale variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleMoments {
    /// `E[ξ²] = ∫ g(y)³ dy`.
    pub second: f64,
    /// `E[ξ^{-2}]` from `∫₀^∞ [P{|X|<=t} - 2t f(t)] / (2t³) dt`; `inf` if divergent.
    pub inverse_second: f64,
}

/// Builds the layered decomposition of `f` using `grid` y-cells.
///
/// Fails with a shape error when `f` is not symmetric and nonincreasing on
/// `[0, ∞)` at the sampled points.
pub fn mixture_decompose<F>(f: F, grid: usize) -> Result<LayeredDecomposition>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if grid < 16 {
        return Err(Error::Domain(format!("grid must have at least 16 cells, got {grid}")));
    }
    let f: Density = Arc::new(f);
    let peak = f(0.0);
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Shape(format!("f(0) must be finite and positive, got {peak}")));
    }
    let reach = reach(&f, peak * 1e-14)?;
    let mut prev = peak;
    for i in 0..SHAPE_POINTS {
        let s = reach * i as f64 / (SHAPE_POINTS - 1) as f64;
        let (right, left) = (f(s), f(-s));
        if (right - left).abs() > SHAPE_TOL * peak.max(1.0) {
            return Err(Error::Shape(format!("f not symmetric at {s}: {right} vs {left}")));
        }
        if right > prev + SHAPE_TOL * peak {
            return Err(Error::Shape(format!(
                "f increases at {s} ({prev} -> {right}); level sets are not intervals"
            )));
        }
        prev = right;
    }

    let mut edges = Vec::with_capacity(grid + FINE_CELLS_NEAR_ZERO + 1);
    // log-spaced cells under the first uniform cell resolve the tails of ξ
    let first = peak / grid as f64;
    edges.push(0.0);
    for k in (1..=FINE_CELLS_NEAR_ZERO).rev() {
        edges.push(first * 10f64.powf(-14.0 * k as f64 / FINE_CELLS_NEAR_ZERO as f64));
    }
    for j in 1..=grid {
        edges.push(peak * j as f64 / grid as f64);
    }

    let mut decomposition = LayeredDecomposition {
        f,
        peak,
        edges: Vec::new(),
        masses: Vec::new(),
        xi_mid: Vec::new(),
        cumulative: Vec::new(),
    };
    let mut masses = Vec::with_capacity(edges.len() - 1);
    let mut xi_mid = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let m = quad::integrate(
            |y| decomposition.level_length(y),
            w[0],
            w[1],
            QuadOpts {
                abs_tol: 1e-13,
                rel_tol: 1e-10,
                max_intervals: 400,
            },
        )?;
        masses.push(m.value);
        xi_mid.push(decomposition.level_length(0.5 * (w[0] + w[1])));
    }
    let mut acc = 0.0;
    let cumulative = masses
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    decomposition.edges = edges;
    decomposition.masses = masses;
    decomposition.xi_mid = xi_mid;
    decomposition.cumulative = cumulative;
    Ok(decomposition)
}

/// Smallest power-of-two-ish radius where `f` drops below `floor`.
fn reach(f: &Density, floor: f64) -> Result<f64> {
    let mut r = 1.0;
    for _ in 0..200 {
        if f(r) <= floor {
            return Ok(r);
        }
        r *= 1.5;
    }
    Err(Error::Shape("density does not decay; cannot bracket level sets".into()))
}

impl LayeredDecomposition {
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    /// `g(y)`: length of `{s : f(s) >= y}`.
    pub fn level_length(&self, y: f64) -> f64 {
        if y > self.peak {
            return 0.0;
        }
        if y <= 0.0 {
            return f64::INFINITY;
        }
        let f = &self.f;
        let mut hi = 1.0;
        while f(hi) >= y {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) >= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2.0 * lo
    }

    /// `∫ g(y) dy`, which must equal the area under `f`.
    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Draws of `ξ = g(H)`, `H` with density `g`.
    pub fn sample_scale(&self, n: usize, seed: u64) -> Vec<f64> {
        let total = self.total_mass();
        rng::chunked(
            n as u64,
            seed,
            |rng, m| {
                (0..m)
                    .map(|_| {
                        let u = rng.random::<f64>() * total;
                        let j = self.cumulative.partition_point(|&c| c <= u).min(self.masses.len() - 1);
                        let (a, b) = (self.edges[j], self.edges[j + 1]);
                        let h = a + (b - a) * rng.random::<f64>();
                        self.level_length(h.max(f64::MIN_POSITIVE))
                    })
                    .collect::<Vec<f64>>()
            },
            |mut a, b| {
                a.extend(b);
                a
            },
            Vec::with_capacity(n),
        )
    }

    /// Draws of `ξ·Y`, `Y ~ U[-1/2, 1/2]`; these follow `f`.
    pub fn sample_product(&self, n: usize, seed: u64) -> Vec<f64> {
        let xi = self.sample_scale(n, seed);
        let ys = rng::chunked(
            n as u64,
            rng::derive_seed(seed, 0x59),
            |rng, m| (0..m).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<f64>>(),
            |mut a, b| {
                a.extend(b);
                a
            },
            Vec::with_capacity(n),
        );
        xi.iter().zip(ys).map(|(x, y)| x * y).collect()
    }

    /// Density of `ξ·Y` from the tabulated mixture.
    pub fn mixture_density(&self, x: f64) -> f64 {
        self.masses
            .iter()
            .zip(&self.xi_mid)
            .filter(|(_, &xi)| xi > 0.0 && 2.0 * x.abs() <= xi)
            .map(|(m, xi)| m / xi)
            .sum()
    }

    /// Density of `ξ·Y` if `ξ` itself had density `g` (the uncorrected
    /// construction): `∫_{2|x|}^{f(0)} g(s)/s ds`.
    pub fn literal_reading_density(&self, x: f64) -> Result<f64> {
        let lo = 2.0 * x.abs();
        if lo >= self.peak {
            return Ok(0.0);
        }
        Ok(quad::integrate(|s| self.level_length(s) / s, lo, self.peak, QuadOpts::default())?.value)
    }

    /// `E[ξ^k] = ∫ g(y)^{k+1} dy` by direct quadrature over `y`.
    pub fn scale_moment_direct(&self, k: f64) -> Result<f64> {
        let opts = QuadOpts {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 2000,
        };
        let mut total = 0.0;
        for w in self.edges.windows(2) {
            total += quad::integrate(|y| self.level_length(y).powf(k + 1.0), w[0], w[1], opts)?.value;
        }
        Ok(total)
    }

    /// `E[ξ²]` and `E[ξ^{-2}]` via the t-integral identity.
    pub fn scale_moments(&self) -> Result<ScaleMoments> {
        let f = self.f.clone();
        let second = 12.0 * second_moment_of(&*f)?;
        let inverse_second = inverse_square_identity(&*f)?;
        Ok(ScaleMoments { second, inverse_second })
    }
}

/// `∫ t² f(t) dt`.
pub(crate) fn second_moment_of(f: &dyn Fn(f64) -> f64) -> Result<f64> {
    let half = quad::integrate_to_infinity(|t| t * t * f(t), 0.0, QuadOpts::default())?;
    Ok(2.0 * half.value)
}

/// `P{|X| <= t} - 2t f(t) = 2∫₀ᵗ (f(u) - f(t)) du`, evaluated without cancellation.
fn bracket(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let ft = f(t);
    // rounding in f(u) - f(t) limits the attainable accuracy to ~1e-16·t;
    // dyadic breaks keep the bulk near the origin resolved for large t
    let breaks: Vec<f64> = (0..64).map(|k| 2f64.powi(k - 8)).take_while(|&b| b < t).collect();
    quad::integrate_with_breaks(
        |u| f(u) - ft,
        0.0,
        t,
        &breaks,
        QuadOpts {
            abs_tol: 1e-16 * t,
            rel_tol: 1e-9,
            max_intervals: 400,
        },
    )
    .map(|q| 2.0 * q.value)
    .unwrap_or(f64::NAN)
}

/// `∫₀^∞ [P{|X|<=t} - 2t f(t)] / (2t³) dt`, or `inf` when the integral
/// diverges at the origin.
///
/// Below `t = 1e-6` the bracket is dominated by rounding, so that piece is
/// extrapolated from the two preceding two-decade pieces, assuming a power
/// law near the origin.
pub(crate) fn inverse_square_identity(f: &dyn Fn(f64) -> f64) -> Result<f64> {
    let integrand = |t: f64| if t <= 0.0 { 0.0 } else { bracket(f, t) / (2.0 * t * t * t) };
    let opts = QuadOpts {
        abs_tol: 1e-11,
        rel_tol: 1e-9,
        max_intervals: 4000,
    };
    let outer = quad::integrate(integrand, 1e-4, 1e-2, opts)?.value;
    let inner = quad::integrate(integrand, 1e-6, 1e-4, opts)?.value;
    // r = 100^{-(a+1)} for an integrand ~ t^a; a <= -1 diverges
    let r = if outer > 0.0 { inner / outer } else { 0.0 };
    if r > 0.5 {
        return Ok(f64::INFINITY);
    }
    let below = if r > 0.0 { inner * r / (1.0 - r) } else { 0.0 };
    let head = quad::integrate(integrand, 1e-2, 1.0, opts)?.value;
    let tail = quad::integrate_to_infinity(integrand, 1.0, opts)?.value;
    Ok(below + inner + outer + head + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn gaussian(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }

    fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn uniform_has_degenerate_scale() {
        let d = mixture_decompose(|x: f64| if x.abs() <= 0.5 { 1.0 } else { 0.0 }, 256).unwrap();
        assert_abs_diff_eq!(d.level_length(0.3), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.level_length(1.0), 1.0, epsilon = 1e-12);
        assert!(d.sample_scale(1000, 4).iter().all(|&x| (x - 1.0).abs() < 1e-12));
        // the uncorrected construction gives -ln(2|x|) instead of 1
        assert_abs_diff_eq!(d.literal_reading_density(0.1).unwrap(), -(0.2f64).ln(), epsilon = 1e-8);
    }

    #[test]
    fn triangular_density_recovered() {
        let d = mixture_decompose(|x: f64| (1.0 - x.abs()).max(0.0), 2048).unwrap();
        assert_abs_diff_eq!(d.level_length(0.25), 1.5, epsilon = 1e-12);
        for i in 0..=40 {
            let x = -1.0 + 0.05 * i as f64;
            assert_abs_diff_eq!(d.mixture_density(x), (1.0 - f64::abs(x)).max(0.0), epsilon = 1e-3);
        }
    }

    #[test]
    fn gaussian_level_lengths_integrate_to_one() {
        let d = mixture_decompose(gaussian, 1024).unwrap();
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-6);
        let y = 0.5 * gaussian(0.0);
        assert_abs_diff_eq!(d.level_length(y), 2.0 * (2.0 * 2f64.ln()).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn product_samples_follow_f() {
        let n = 100_000;
        let d = mixture_decompose(gaussian, 4096).unwrap();
        let prod = d.sample_product(n, 17);
        let direct = crate::distributions::sample(&crate::distributions::DistributionSpec::gaussian(1.0), n, 99).unwrap();
        let ks = ks_two_sample(prod, direct);
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn non_unimodal_rejected() {
        let bimodal = |x: f64| 0.5 * (gaussian(x - 2.0) + gaussian(x + 2.0));
        assert_eq!(mixture_decompose(bimodal, 64).unwrap_err().kind(), "shape");
        let skew = |x: f64| if x >= 0.0 { (-x).exp() / 1.5 } else { (2.0 * x).exp() / 1.5 };
        assert_eq!(mixture_decompose(skew, 64).unwrap_err().kind(), "shape");
    }

    #[test]
    fn scale_moments_agree_with_direct_route() {
        // f ∝ exp(-|t|^1.5): both moments finite
        let norm = 2.0
            * quad::integrate_to_infinity(|t: f64| (-t.powf(1.5)).exp(), 0.0, QuadOpts::default())
                .unwrap()
                .value;
        let f = move |t: f64| (-t.abs().powf(1.5)).exp() / norm;
        let d = mixture_decompose(f, 1024).unwrap();
        let m = d.scale_moments().unwrap();
        assert!(m.inverse_second.is_finite());
        assert_abs_diff_eq!(m.second, d.scale_moment_direct(2.0).unwrap(), epsilon = 1e-6);
        // E[ξ^{-2}] = ∫ dy / g(y); the singular top cell is integrable here
        let direct = d.scale_moment_direct(-2.0).unwrap();
        assert!(
            (m.inverse_second - direct).abs() < 1e-4 * direct,
            "{} vs {direct}",
            m.inverse_second
        );
    }

    #[test]
    fn laplace_inverse_moment_diverges() {
        let f = |t: f64| 0.5 * (-t.abs()).exp();
        assert_eq!(inverse_square_identity(&f).unwrap(), f64::INFINITY);
        // Gaussian: E[ξ^{-2}] = ∫₀^∞ -f'(s)/(2s) ds = ∫₀^∞ f(s)/2 ds = 1/4
        assert_abs_diff_eq!(inverse_square_identity(&gaussian).unwrap(), 0.25, epsilon = 1e-8);
    }
}
