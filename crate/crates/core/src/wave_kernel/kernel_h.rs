use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk15;
use crate::scalar::{lit, to_f64, Real};

/// Which of the two angular integrals defines `H(t, |x|, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelBranch {
    /// `t > |x| + r`: the whole circle of radius `r` lies inside the disk,
    /// `psi` runs over `[-pi, pi]`.
    Interior,
    /// `||x| - r| <= t < |x| + r`: the circle crosses the rim, `psi` runs
    /// over `[-phi, phi]` with `cos(phi) = (|x|^2 + r^2 - t^2)/(2|x|r)`.
    Crossing,
}

fn outside<T: Real>(t: T, absx: T, r: T) -> Error {
    Error::OutsideLightCone { t: to_f64(t), absx: to_f64(absx), r: to_f64(r) }
}

/// Branch of `(t, |x|, r)`; the tangent configuration `t = |x| + r` and
/// circles entirely outside the disk are rejected.
pub fn classify<T: Real>(t: T, absx: T, r: T) -> Result<KernelBranch> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::InvalidTime(format!("t must be positive, got {t}")));
    }
    if !(absx >= T::zero()) || !(r > T::zero()) || !absx.is_finite() || !r.is_finite() {
        return Err(outside(t, absx, r));
    }
    if absx == T::zero() {
        return if t > r { Ok(KernelBranch::Interior) } else { Err(outside(t, absx, r)) };
    }
    let c = (absx * absx + r * r - t * t) / (lit::<T>(2.0) * absx * r);
    if c < -T::one() {
        Ok(KernelBranch::Interior)
    } else if c > -T::one() && c <= T::one() {
        Ok(KernelBranch::Crossing)
    } else {
        Err(outside(t, absx, r))
    }
}

/// Complete elliptic integral of the first kind, parameter convention
/// `K(m) = int_0^{pi/2} (1 - m sin^2 b)^{-1/2} db`.
fn elliptic_k<T: Real>(m: T) -> Result<T> {
    let res = adaptive_gk15(
        |b: T| {
            let s = b.sin();
            (T::one() - m * s * s).sqrt().recip()
        },
        T::zero(),
        T::FRAC_PI_2(),
        lit(1e-12),
        T::zero(),
        4000,
    )?;
    Ok(res.value)
}

/// `H(t, |x|, r) = int dpsi / sqrt(t^2 - |x|^2 - r^2 + 2|x|r cos psi)`
/// over the branch's range of `psi`.
///
/// The square-root singularity at `psi = +-phi` (crossing branch) is removed
/// by `sin(psi/2) = k sin(b)`, which turns both branches into a smooth
/// integral over `b in [0, pi/2]`.
pub fn h_integral<T: Real>(t: T, absx: T, r: T) -> Result<T> {
    let branch = classify(t, absx, r)?;
    if absx == T::zero() {
        return Ok(T::TAU() / (t * t - r * r).sqrt());
    }
    let four = lit::<T>(4.0);
    let d = absx - r;
    match branch {
        KernelBranch::Interior => {
            let q = t * t - d * d;
            let m = four * absx * r / q;
            Ok(four * elliptic_k(m)? / q.sqrt())
        }
        KernelBranch::Crossing => {
            let m = (t * t - d * d) / (four * absx * r);
            let m = m.max(T::zero()).min(T::one());
            Ok(lit::<T>(2.0) * elliptic_k(m)? / (absx * r).sqrt())
        }
    }
}

/// `ln(2 + r|x| / (t^2 - (r+|x|)^2)) / sqrt(t^2 - |x|^2 - r^2)`.
pub fn bound_interior<T: Real>(t: T, absx: T, r: T) -> T {
    let s = r + absx;
    let gap = t * t - s * s;
    (lit::<T>(2.0) + r * absx / gap).ln() / (t * t - absx * absx - r * r).sqrt()
}

/// `ln(2 + r|x| chi(t - |x|) / ((r+|x|)^2 - t^2)) / sqrt(r|x|)`.
pub fn bound_crossing<T: Real>(t: T, absx: T, r: T) -> T {
    let s = r + absx;
    let chi = if t > absx { T::one() } else { T::zero() };
    (lit::<T>(2.0) + r * absx * chi / (s * s - t * t)).ln() / (r * absx).sqrt()
}

/// One point of the deterministic kernel sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub t: f64,
    pub absx: f64,
    pub r: f64,
    pub branch: KernelBranch,
    pub h: f64,
    pub bound: f64,
}

impl KernelSample {
    pub fn ratio(&self) -> f64 {
        self.h / self.bound
    }
}

pub const KOVALYOV_SEED: u64 = 0x4b6f76616c796f76;

/// First `n` admissible triples `(t, |x|, r)`, each coordinate log-uniform
/// in `[0.05, 50]`, drawn from a fixed-seed stream. Every sample is a
/// prefix of every longer one.
pub fn kovalyov_sample(n: usize) -> Result<Vec<KernelSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(KOVALYOV_SEED);
    let (lo, hi) = (0.05f64.ln(), 50f64.ln());
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut draw = || rng.gen_range(lo..hi).exp();
        let (t, absx, r) = (draw(), draw(), draw());
        let Ok(branch) = classify(t, absx, r) else { continue };
        let h = h_integral(t, absx, r)?;
        let bound = match branch {
            KernelBranch::Interior => bound_interior(t, absx, r),
            KernelBranch::Crossing => bound_crossing(t, absx, r),
        };
        if !(bound > 0.0) || !bound.is_finite() {
            continue;
        }
        out.push(KernelSample { t, absx, r, branch, h, bound });
    }
    Ok(out)
}

/// Empirical constants `sup H / bound` per branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KovalyovFit {
    pub n: usize,
    pub n_interior: usize,
    pub n_crossing: usize,
    pub c_interior: f64,
    pub c_crossing: f64,
}

pub fn fit_kovalyov_constants(samples: &[KernelSample]) -> Result<KovalyovFit> {
    if samples.is_empty() {
        return Err(Error::EmptySample("no kernel samples".into()));
    }
    let sup = |b: KernelBranch| {
        samples.iter().filter(|s| s.branch == b).fold((0usize, 0.0f64), |(n, c), s| (n + 1, c.max(s.ratio())))
    };
    let (n_interior, c_interior) = sup(KernelBranch::Interior);
    let (n_crossing, c_crossing) = sup(KernelBranch::Crossing);
    Ok(KovalyovFit { n: samples.len(), n_interior, n_crossing, c_interior, c_crossing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn agm_k(m: f64) -> f64 {
        let (mut a, mut b) = (1.0f64, (1.0 - m).sqrt());
        for _ in 0..60 {
            let (an, bn) = ((a + b) / 2.0, (a * b).sqrt());
            a = an;
            b = bn;
        }
        PI / (2.0 * a)
    }

    fn direct(t: f64, x: f64, r: f64, lo: f64, hi: f64) -> f64 {
        // midpoint rule, fine enough away from endpoint singularities
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let psi = lo + (i as f64 + 0.5) * h;
                h / (t * t - x * x - r * r + 2.0 * x * r * psi.cos()).sqrt()
            })
            .sum()
    }

    #[test]
    fn elliptic_k_matches_agm() {
        for m in [0.0, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-8] {
            let k: f64 = elliptic_k(m).unwrap();
            assert!((k - agm_k(m)).abs() < 1e-10 * agm_k(m), "m = {m}");
        }
    }

    #[test]
    fn interior_branch_against_direct_quadrature() {
        let (t, x, r) = (3.0, 1.0, 0.7);
        assert_eq!(classify(t, x, r).unwrap(), KernelBranch::Interior);
        let h = h_integral(t, x, r).unwrap();
        assert!((h - direct(t, x, r, -PI, PI)).abs() < 1e-9);
    }

    #[test]
    fn crossing_branch_against_direct_quadrature() {
        let (t, x, r): (f64, f64, f64) = (2.0, 1.5, 1.0);
        assert_eq!(classify(t, x, r).unwrap(), KernelBranch::Crossing);
        let phi = ((x * x + r * r - t * t) / (2.0 * x * r)).acos();
        // substitute psi = phi sin(s) to tame the endpoint singularity
        let n = 20_000;
        let hs = PI / n as f64;
        let reference: f64 = (0..n)
            .map(|i| {
                let s = -PI / 2.0 + (i as f64 + 0.5) * hs;
                let psi = phi * s.sin();
                hs * phi * s.cos() / (t * t - x * x - r * r + 2.0 * x * r * psi.cos()).sqrt()
            })
            .sum();
        let h = h_integral(t, x, r).unwrap();
        assert!((h - reference).abs() < 1e-6 * reference, "{h} vs {reference}");
    }

    #[test]
    fn origin_limit() {
        for (t, r) in [(2.0, 1.0), (10.0, 9.99), (1.0, 0.01)] {
            let exact = 2.0 * PI / ((t * t - r * r) as f64).sqrt();
            let at0 = h_integral(t, 0.0, r).unwrap();
            let near = h_integral(t, 1e-7, r).unwrap();
            assert!((at0 - exact).abs() < 1e-12 * exact);
            assert!((near - exact).abs() < 1e-6 * exact);
        }
    }

    #[test]
    fn outside_configurations_are_rejected() {
        // tangent from inside
        assert!(matches!(h_integral(3.0, 1.0, 2.0), Err(Error::OutsideLightCone { .. })));
        // circle entirely outside the disk
        assert!(matches!(h_integral(0.5, 3.0, 1.0), Err(Error::OutsideLightCone { .. })));
        assert!(matches!(h_integral(1.0, 0.0, 2.0), Err(Error::OutsideLightCone { .. })));
        assert!(matches!(h_integral(-1.0, 1.0, 1.0), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn sample_prefix_and_positivity() {
        let a = kovalyov_sample(20).unwrap();
        let b = kovalyov_sample(40).unwrap();
        assert_eq!(&b[..20], &a[..]);
        assert!(b.iter().all(|s| s.h > 0.0 && s.bound > 0.0));
        let fit = fit_kovalyov_constants(&b).unwrap();
        assert_eq!(fit.n_interior + fit.n_crossing, 40);
    }

    #[test]
    fn empty_fit_is_an_error() {
        assert!(matches!(fit_kovalyov_constants(&[]), Err(Error::EmptySample(_))));
    }
}
