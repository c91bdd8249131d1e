//! Level-set constants of isotropic log-concave planar densities and the
//! double-sector mass argument behind the log-concave ratio bound.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOpts};
use crate::rng;

/// Inclusion radius `a` and the peak window `[2^{-14}, 2/(π a²)]`.
pub const LEVEL_A: f64 = 1.0 / 9.0;
pub const PEAK_LO: f64 = 1.0 / 16384.0;
pub const PEAK_HI: f64 = 162.0 / PI;
/// Circumradius allowance `9·2^16`.
pub const LEVEL_CAP: f64 = 9.0 * 65536.0;
/// `Σ_k k² 2^{-k}`.
pub const SHELL_SUM: f64 = 6.0;

/// Closed-form planar densities with a log-concavity certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum PlanarDensity {
    /// Standard planar Gaussian.
    Gaussian,
    /// Uniform on the disk of the given radius; isotropic at radius 2.
    UniformDisk { radius: f64 },
    /// Product of two Laplace laws with scale `1/√2` (unit variance each).
    IsotropicLaplace,
}

impl PlanarDensity {
    pub const CATALOG: [PlanarDensity; 3] = [
        PlanarDensity::Gaussian,
        PlanarDensity::UniformDisk { radius: 2.0 },
        PlanarDensity::IsotropicLaplace,
    ];

    pub fn by_name(name: &str) -> Result<PlanarDensity> {
        PlanarDensity::CATALOG
            .into_iter()
            .find(|d| d.name() == name)
            .ok_or_else(|| Error::config("density", format!("unknown planar density {name:?}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlanarDensity::Gaussian => "gaussian",
            PlanarDensity::UniformDisk { .. } => "uniform-disk",
            PlanarDensity::IsotropicLaplace => "isotropic-laplace",
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            PlanarDensity::Gaussian => (-0.5 * (x * x + y * y)).exp() / (2.0 * PI),
            PlanarDensity::UniformDisk { radius } => {
                if x * x + y * y <= radius * radius {
                    1.0 / (PI * radius * radius)
                } else {
                    0.0
                }
            }
            PlanarDensity::IsotropicLaplace => {
                let b = FRAC_1_SQRT_2;
                (-(x.abs() + y.abs()) / b).exp() / (4.0 * b * b)
            }
        }
    }

    /// Half-width of the default square window; the mass outside is below 1e-6.
    pub fn default_extent(&self) -> f64 {
        match *self {
            PlanarDensity::Gaussian => 6.0,
            PlanarDensity::UniformDisk { radius } => 1.05 * radius,
            PlanarDensity::IsotropicLaplace => 11.0,
        }
    }

    /// Radii where the density has a kink or jump along rays from the origin.
    fn radial_breaks(&self) -> Vec<f64> {
        match *self {
            PlanarDensity::UniformDisk { radius } => vec![radius],
            _ => Vec::new(),
        }
    }
}

/// Grid of `n × n` cells on `[-extent, extent]²`, evaluated at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrid {
    pub extent: f64,
    pub n: usize,
}

impl PlanarGrid {
    pub fn for_density(p: &PlanarDensity, n: usize) -> PlanarGrid {
        PlanarGrid {
            extent: p.default_extent(),
            n,
        }
    }

    pub fn cell(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.cell()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub density: &'static str,
    pub grid: PlanarGrid,
    pub contains_a_disk: bool,
    pub within_a_disk: bool,
    pub peak_in_range: bool,
    /// Inradius of the half-peak level set about the origin.
    pub measured_a: f64,
    /// Circumradius of the half-peak level set about the origin.
    #[serde(rename = "measured_A")]
    pub measured_big_a: f64,
    pub peak: f64,
    pub cells_inside: u64,
    pub mass: f64,
    pub mean: [f64; 2],
    pub covariance: [f64; 3],
    pub isotropic: bool,
    pub log_concave_pairs_checked: u64,
    pub log_concave: bool,
}

impl LevelSetReport {
    pub fn passed(&self) -> bool {
        self.contains_a_disk && self.within_a_disk && self.peak_in_range && self.isotropic && self.log_concave
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct RowStats {
    mass: f64,
    mx: f64,
    my: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
    max: f64,
    inside: u64,
    /// Smallest radius of a center outside the level set.
    min_out: f64,
    /// Largest radius of a center inside the level set.
    max_in: f64,
}

impl RowStats {
    fn merge(mut self, o: RowStats) -> RowStats {
        self.mass += o.mass;
        self.mx += o.mx;
        self.my += o.my;
        self.sxx += o.sxx;
        self.sxy += o.sxy;
        self.syy += o.syy;
        self.max = self.max.max(o.max);
        self.inside += o.inside;
        self.min_out = self.min_out.min(o.min_out);
        self.max_in = self.max_in.max(o.max_in);
        self
    }
}

/// Checks the level-set constants of `p` on `grid`: `D(0, 1/9) ⊆ 𝓛`,
/// `𝓛 ⊆ D(0, 9·2^16)` and `max p ∈ [2^{-14}, 162/π]`, where
/// `𝓛 = {p >= p(0,0)/2}`; also measures isotropy and spot-checks
/// midpoint log-concavity on `10^4` random pairs.
pub fn verify_levelset(p: &PlanarDensity, grid: PlanarGrid, seed: u64) -> Result<LevelSetReport> {
    if grid.n < 3 || !(grid.extent > 0.0) {
        return Err(Error::Domain("grid needs n >= 3 and a positive extent".into()));
    }
    let p0 = p.eval(0.0, 0.0);
    let level = 0.5 * p0;
    let h = grid.cell();
    let area = h * h;
    let stats = (0..grid.n)
        .into_par_iter()
        .map(|i| {
            let x = grid.center(i);
            let mut s = RowStats {
                min_out: f64::INFINITY,
                ..RowStats::default()
            };
            for j in 0..grid.n {
                let y = grid.center(j);
                let v = p.eval(x, y);
                let w = v * area;
                s.mass += w;
                s.mx += w * x;
                s.my += w * y;
                s.sxx += w * x * x;
                s.sxy += w * x * y;
                s.syy += w * y * y;
                s.max = s.max.max(v);
                let r = x.hypot(y);
                if v >= level {
                    s.inside += 1;
                    s.max_in = s.max_in.max(r);
                } else {
                    s.min_out = s.min_out.min(r);
                }
            }
            s
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            RowStats {
                min_out: f64::INFINITY,
                ..RowStats::default()
            },
            RowStats::merge,
        );
    if stats.inside < 100 {
        return Err(Error::Resolution(format!(
            "only {} grid cells resolve the level set; refine the grid",
            stats.inside
        )));
    }
    let diag = h * std::f64::consts::SQRT_2;
    // every center closer than min_out is inside; a window with no outside
    // center bounds the inradius by the window itself
    let measured_a = stats.min_out.min(grid.extent);
    let measured_big_a = stats.max_in;
    let peak = stats.max.max(p0);
    let mean = [stats.mx / stats.mass, stats.my / stats.mass];
    let cov = [
        stats.sxx / stats.mass - mean[0] * mean[0],
        stats.sxy / stats.mass - mean[0] * mean[1],
        stats.syy / stats.mass - mean[1] * mean[1],
    ];
    let isotropic = (stats.mass - 1.0).abs() <= 1e-3
        && mean.iter().all(|m| m.abs() <= 1e-2)
        && (cov[0] - 1.0).abs() <= 1e-2
        && cov[1].abs() <= 1e-2
        && (cov[2] - 1.0).abs() <= 1e-2;
    let (pairs, log_concave) = midpoint_log_concavity(p, grid.extent, 10_000, seed);
    Ok(LevelSetReport {
        density: p.name(),
        grid,
        contains_a_disk: measured_a >= LEVEL_A - diag,
        within_a_disk: measured_big_a <= LEVEL_CAP,
        peak_in_range: (PEAK_LO..=PEAK_HI).contains(&peak),
        measured_a,
        measured_big_a,
        peak,
        cells_inside: stats.inside,
        mass: stats.mass,
        mean,
        covariance: cov,
        isotropic,
        log_concave_pairs_checked: pairs,
        log_concave,
    })
}

/// `log p((a+b)/2) >= (log p(a) + log p(b))/2` on random pairs in the window.
fn midpoint_log_concavity(p: &PlanarDensity, extent: f64, pairs: u64, seed: u64) -> (u64, bool) {
    let mut rng = rng::stream(seed, 0x1c);
    let mut ok = true;
    for _ in 0..pairs {
        let a = [rng.random_range(-extent..extent), rng.random_range(-extent..extent)];
        let b = [rng.random_range(-extent..extent), rng.random_range(-extent..extent)];
        let (pa, pb) = (p.eval(a[0], a[1]), p.eval(b[0], b[1]));
        if pa == 0.0 || pb == 0.0 {
            continue;
        }
        let pm = p.eval(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]));
        let lhs = pm.ln();
        let rhs = 0.5 * (pa.ln() + pb.ln());
        if lhs < rhs - 1e-12 * (1.0 + rhs.abs()) {
            ok = false;
        }
    }
    (pairs, ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub theta: f64,
    pub mass: f64,
    /// `2πθ·B·A²·Σk²2^{-k}` with measured `A` and `B`.
    pub bound: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    pub holds: bool,
}

/// Mass of the double sector `{|u| <= tan(θ)|v|}` by polar quadrature, and
/// the shell-sum bound built from the level-set constants in `levels`.
pub fn sector_mass_bound(p: &PlanarDensity, theta: f64, levels: &LevelSetReport) -> Result<SectorReport> {
    if !(theta > 0.0 && theta <= PI / 4.0) {
        return Err(Error::Domain(format!("theta must lie in (0, pi/4], got {theta}")));
    }
    let mass = sector_mass(p, theta)?;
    let big_a = levels.measured_big_a;
    let big_b = levels.peak;
    let bound = 2.0 * PI * theta * big_b * big_a * big_a * SHELL_SUM;
    Ok(SectorReport {
        theta,
        mass,
        bound,
        big_a,
        big_b,
        holds: mass <= bound,
    })
}

/// `∫` of `p` over `{|u| <= tan(θ)|v|}`.
pub fn sector_mass(p: &PlanarDensity, theta: f64) -> Result<f64> {
    let rmax = p.default_extent() * std::f64::consts::SQRT_2;
    let breaks = p.radial_breaks();
    let inner = QuadOpts {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 2000,
    };
    let ray = |phi: f64| -> f64 {
        let (s, c) = phi.sin_cos();
        quad::integrate_with_breaks(|r| r * p.eval(r * c, r * s), 0.0, rmax, &breaks, inner)
            .map(|q| q.value)
            .unwrap_or(f64::NAN)
    };
    let outer = QuadOpts {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_intervals: 2000,
    };
    // the sector about the positive v-axis; the opposite one has equal mass
    // only for centrally symmetric p, so both are integrated
    let up = quad::integrate_with_breaks(ray, PI / 2.0 - theta, PI / 2.0 + theta, &[PI / 2.0], outer)?.value;
    let down = quad::integrate_with_breaks(ray, 1.5 * PI - theta, 1.5 * PI + theta, &[1.5 * PI], outer)?.value;
    let m = up + down;
    if !m.is_finite() {
        return Err(Error::Numeric("radial quadrature failed inside the sector integral".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_level_set_is_the_expected_disk() {
        let p = PlanarDensity::Gaussian;
        let r = verify_levelset(&p, PlanarGrid::for_density(&p, 801), 1).unwrap();
        let h = r.grid.cell();
        let radius = (2.0 * 2f64.ln()).sqrt();
        assert!((r.measured_a - radius).abs() <= h, "{}", r.measured_a);
        assert!((r.measured_big_a - radius).abs() <= h);
        assert_abs_diff_eq!(r.peak, 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn uniform_disk_level_set_is_full_support() {
        let p = PlanarDensity::UniformDisk { radius: 2.0 };
        let r = verify_levelset(&p, PlanarGrid::for_density(&p, 801), 1).unwrap();
        assert!((r.measured_big_a - 2.0).abs() <= r.grid.cell());
        assert!((r.measured_a - 2.0).abs() <= r.grid.cell());
        assert_abs_diff_eq!(r.peak, 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn radius_sqrt2_disk_is_not_isotropic() {
        let p = PlanarDensity::UniformDisk { radius: 2f64.sqrt() };
        let r = verify_levelset(&p, PlanarGrid::for_density(&p, 801), 1).unwrap();
        assert!(!r.isotropic);
        assert_abs_diff_eq!(r.covariance[0], 0.5, epsilon = 1e-3);
    }

    #[test]
    fn laplace_passes() {
        let p = PlanarDensity::IsotropicLaplace;
        let r = verify_levelset(&p, PlanarGrid::for_density(&p, 1201), 1).unwrap();
        assert!(r.passed(), "{r:?}");
        // level set is the diamond |x| + |y| <= ln2/√2
        let d = 2f64.ln() * FRAC_1_SQRT_2;
        assert!((r.measured_big_a - d).abs() <= r.grid.cell());
        assert!((r.measured_a - d * FRAC_1_SQRT_2).abs() <= r.grid.cell());
    }

    #[test]
    fn coarse_grid_is_a_resolution_error() {
        let p = PlanarDensity::Gaussian;
        let e = verify_levelset(&p, PlanarGrid { extent: 6.0, n: 25 }, 1).unwrap_err();
        assert_eq!(e.kind(), "resolution");
    }

    #[test]
    fn gaussian_sector_mass_is_cauchy() {
        let p = PlanarDensity::Gaussian;
        let theta = 0.1f64.atan();
        let m = sector_mass(&p, theta).unwrap();
        assert_abs_diff_eq!(m, 2.0 / PI * 0.1f64.atan(), epsilon = 1e-9);
        assert_abs_diff_eq!(m, 0.06345, epsilon = 1e-5);
    }

    #[test]
    fn sector_bound_and_monotonicity() {
        for p in PlanarDensity::CATALOG {
            let levels = verify_levelset(&p, PlanarGrid::for_density(&p, 401), 2).unwrap();
            let mut last = 0.0;
            for k in 0..12 {
                let theta = (PI / 4.0) * 0.5f64.powi(11 - k);
                let s = sector_mass_bound(&p, theta, &levels).unwrap();
                assert!(s.holds, "{s:?}");
                assert!(s.mass > last && s.mass <= 1.0 + 1e-9);
                last = s.mass;
            }
        }
        // the Gaussian example: 2πθ·(1/2π)·2ln2·6 ≈ 8.32θ
        let p = PlanarDensity::Gaussian;
        let levels = verify_levelset(&p, PlanarGrid::for_density(&p, 2001), 2).unwrap();
        let s = sector_mass_bound(&p, 0.01, &levels).unwrap();
        assert_abs_diff_eq!(s.bound / 0.01, 8.32, epsilon = 0.02);
        assert!(sector_mass_bound(&p, 1.0, &levels).is_err());
    }

    #[test]
    fn tiny_sector_has_tiny_mass() {
        let m = sector_mass(&PlanarDensity::IsotropicLaplace, 1e-8).unwrap();
        assert!(m < 1e-7);
    }
}
