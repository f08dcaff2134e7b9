//! Gauss–Legendre rules and adaptive Gauss–Kronrod integration.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Nodes are computed in `f64` by Newton iteration on `P_n` and then
    /// converted, so the `f32` rule is the rounded `f64` rule.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = lit(-x);
            nodes[n - 1 - i] = lit(x);
            weights[i] = lit(w);
            weights[n - 1 - i] = lit(w);
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on_interval(&self, a: T, b: T) -> (Vec<T>, Vec<T>) {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        let x = self.nodes.iter().map(|&s| mid + half * s).collect();
        let w = self.weights.iter().map(|&w| w * half).collect();
        (x, w)
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        let mut s = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += *w * f(mid + half * *x);
        }
        s * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GK15_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const G7_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: `(kronrod estimate, |kronrod - gauss|)`.
fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * lit(0.5);
    let mid = (a + b) * lit(0.5);
    let fc = f(mid);
    let mut k = fc * lit(GK15_WK[7]);
    let mut g = fc * lit(G7_WG[3]);
    for j in 0..7 {
        let dx = half * lit(GK15_XK[j]);
        let s = f(mid - dx) + f(mid + dx);
        k += s * lit(GK15_WK[j]);
        if j % 2 == 1 {
            g += s * lit(G7_WG[j / 2]);
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Result of [`adaptive_gk15`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult<T> {
    pub value: T,
    pub error_estimate: T,
    pub panels: usize,
}

/// Globally adaptive Gauss–Kronrod 7/15 integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the total
/// estimate drops below `max(abs_tol, rel_tol * |value|)`.
pub fn adaptive_gk15<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    rel_tol: T,
    abs_tol: T,
    max_panels: usize,
) -> Result<AdaptiveResult<T>> {
    let (v0, e0) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v0, e0)];
    loop {
        let value = panels.iter().fold(T::zero(), |s, p| s + p.2);
        let err = panels.iter().fold(T::zero(), |s, p| s + p.3);
        if !value.is_finite() || !err.is_finite() {
            return Err(Error::NonFinite("adaptive quadrature integrand".into()));
        }
        let floor = T::epsilon() * lit(50.0) * value.abs();
        if err <= abs_tol.max(rel_tol * value.abs()).max(floor) || panels.len() >= max_panels {
            return Ok(AdaptiveResult { value, error_estimate: err, panels: panels.len() });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, p)| if p.3 > be { (i, p.3) } else { (bi, be) });
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let pm = (pa + pb) * lit(0.5);
        let (v1, e1) = gk15(&mut f, pa, pm);
        let (v2, e2) = gk15(&mut f, pm, pb);
        panels.push((pa, pm, v1, e1));
        panels.push((pm, pb, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::<f64>::new(8);
        // degree 15 is exact for 8 nodes
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15) + 3.0 * x * x);
        let exact = 2f64.powi(16) / 16.0 + 8.0;
        assert!((v - exact).abs() < 1e-9 * exact);
        let wsum: f64 = gl.weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_rules_are_accurate() {
        let gl = GaussLegendre::<f64>::new(256);
        let v = gl.integrate(0.0, std::f64::consts::FRAC_PI_2, |x| x.sin());
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // int_0^1 -ln(x) dx = 1
        let r = adaptive_gk15(|x: f64| -x.ln(), 0.0, 1.0, 1e-12, 0.0, 500).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn single_precision_rule() {
        let gl = GaussLegendre::<f32>::new(16);
        let v = gl.integrate(-1.0, 1.0, |x| x * x);
        assert!((v - 2.0 / 3.0).abs() < 1e-6);
    }
}
