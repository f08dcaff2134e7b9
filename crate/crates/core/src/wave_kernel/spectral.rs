use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::TorusOracleSpec;
use crate::data::InitialData;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, WaveState};
use crate::quadrature::GaussLegendre;
use crate::scalar::{idx, lit, to_f64, Real};
use crate::stencil::Axis;

/// Relative level below which data counts as vanished when measuring its
/// support radius.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

const PANEL_NODES: usize = 8;

/// Fourier coefficients on an `n x n` torus, stored row-major like the
/// node grid (`k = j * n + i`, `i` along `x1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub n: usize,
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, coeffs: vec![Complex::new(T::zero(), T::zero()); n * n] }
    }

    fn axpy(&mut self, a: Complex<T>, other: &Self) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * *o;
        }
    }
}

/// What a [`SourceTerm`] contributes to the right-hand side of
/// `phi_tt - Lap phi = f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// `coeff * g`
    Plain,
    /// `coeff * d_i g`
    SpaceDerivative(Axis),
    /// `coeff * d_t g`, treated exactly by integrating by parts in time.
    TimeDerivative,
}

type SpaceTimeFn<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;

/// One term of a forcing, `coeff * D g(tau, x)` with `D` given by `kind`.
#[derive(Clone)]
pub struct SourceTerm<T> {
    pub coeff: T,
    pub kind: SourceKind,
    field: SpaceTimeFn<T>,
    static_in_time: bool,
}

impl<T> fmt::Debug for SourceTerm<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm")
            .field("coeff", &self.coeff)
            .field("kind", &self.kind)
            .field("static_in_time", &self.static_in_time)
            .finish()
    }
}

impl<T: Real> SourceTerm<T> {
    /// Source `g(tau, x1, x2)`.
    pub fn new<F>(kind: SourceKind, coeff: T, g: F) -> Self
    where
        F: Fn(T, T, T) -> T + Send + Sync + 'static,
    {
        Self { coeff, kind, field: Arc::new(g), static_in_time: false }
    }

    /// Source independent of time; its Duhamel integral is done in closed form.
    pub fn stationary<F>(kind: SourceKind, coeff: T, g: F) -> Self
    where
        F: Fn(T, T) -> T + Send + Sync + 'static,
    {
        Self { coeff, kind, field: Arc::new(move |_, x, y| g(x, y)), static_in_time: true }
    }

    pub fn is_static(&self) -> bool {
        self.static_in_time
    }

    #[inline]
    pub fn eval(&self, tau: T, x1: T, x2: T) -> T {
        (self.field)(tau, x1, x2)
    }
}

/// The periodic box `[-L, L)^2` with `n` Fourier modes per axis.
#[derive(Clone)]
pub struct Torus<T: Real> {
    grid: Grid<T>,
    n: usize,
    l: T,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Torus<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Torus").field("n", &self.n).field("l", &self.l).finish()
    }
}

impl<T: Real> Torus<T> {
    pub fn new(half_period: T, n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidConfig(format!("torus needs an even number of modes, got {n}")));
        }
        let grid = Grid::periodic(half_period, n)?;
        let mut planner = FftPlanner::new();
        Ok(Self { grid, n, l: half_period, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) })
    }

    pub fn from_spec(spec: &TorusOracleSpec) -> Result<Self> {
        spec.validate()?;
        Self::new(lit(spec.period_l), spec.modes_per_axis)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn half_period(&self) -> T {
        self.l
    }

    /// Signed wave number of mode index `m` along one axis.
    #[inline]
    pub fn xi(&self, m: usize) -> T {
        let kappa = if m < self.n / 2 { idx::<T>(m) } else { idx::<T>(m) - idx::<T>(self.n) };
        T::PI() * kappa / self.l
    }

    #[inline]
    fn is_nyquist(&self, m: usize) -> bool {
        m == self.n / 2
    }

    /// `|xi|` of the coefficient at flat index `k`.
    #[inline]
    pub fn omega(&self, k: usize) -> T {
        let (i, j) = (k % self.n, k / self.n);
        self.xi(i).hypot(self.xi(j))
    }

    fn fft2(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let n = self.n;
        data.par_chunks_mut(n).for_each(|row| plan.process(row));
        let mut cols = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 0..n {
            for i in 0..n {
                cols[i * n + j] = data[j * n + i];
            }
        }
        cols.par_chunks_mut(n).for_each(|col| plan.process(col));
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = cols[i * n + j];
            }
        }
    }

    pub fn forward(&self, f: &GridField<T>) -> Result<Spectrum<T>> {
        if !f.grid().matches(&self.grid) {
            return Err(Error::GridMismatch("field is not sampled on the torus grid".into()));
        }
        let mut c: Vec<Complex<T>> = f.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft2(&mut c, &self.fwd);
        Ok(Spectrum { n: self.n, coeffs: c })
    }

    /// Samples `g` on the torus grid and transforms it.
    pub fn forward_fn<F: Fn(T, T) -> T + Sync>(&self, g: F) -> Result<Spectrum<T>> {
        let f = GridField::from_fn(self.grid, g);
        if !f.is_finite() {
            return Err(Error::DataNotEvaluable("non-finite sample on the torus grid".into()));
        }
        self.forward(&f)
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self, s: &Spectrum<T>) -> GridField<T> {
        let mut c = s.coeffs.clone();
        self.fft2(&mut c, &self.inv);
        let scale = T::one() / idx::<T>(self.n * self.n);
        let values = c.iter().map(|z| z.re * scale).collect();
        GridField::from_values(self.grid, values).expect("spectrum size matches grid")
    }

    /// Trigonometric interpolant of `s` at an arbitrary point.
    pub fn eval_at(&self, s: &Spectrum<T>, x: (T, T)) -> T {
        let n = self.n;
        let dx = x.0 - self.grid.origin.0;
        let dy = x.1 - self.grid.origin.1;
        let ex: Vec<Complex<T>> = (0..n).map(|i| Complex::from_polar(T::one(), self.xi(i) * dx)).collect();
        let mut acc = T::zero();
        for j in 0..n {
            let ey = Complex::from_polar(T::one(), self.xi(j) * dy);
            let row = &s.coeffs[j * n..(j + 1) * n];
            let mut r = Complex::new(T::zero(), T::zero());
            for i in 0..n {
                r += row[i] * ex[i];
            }
            acc += (r * ey).re;
        }
        acc / idx::<T>(n * n)
    }

    /// Multiplies by `i xi_axis`, dropping the Nyquist line.
    pub fn derivative(&self, s: &Spectrum<T>, axis: Axis) -> Spectrum<T> {
        let n = self.n;
        let mut out = s.clone();
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            let m = match axis {
                Axis::X1 => k % n,
                Axis::X2 => k / n,
            };
            *c = if self.is_nyquist(m) { Complex::new(T::zero(), T::zero()) } else { *c * Complex::new(T::zero(), self.xi(m)) };
        }
        out
    }

    /// `||(1+|xi|)^{s/2} f_hat||_{L^2}` with the continuous normalisation,
    /// so that `s = 0` gives the `L^2` norm of the sampled function.
    pub fn hs_norm(&self, s: &Spectrum<T>, order: T) -> T {
        let sum = s
            .coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, c)| acc + (T::one() + self.omega(k)).powf(order) * c.norm_sqr());
        (sum * self.norm_scale()).sqrt()
    }

    /// `||d phi||_{H^s}` for `d = (d_t, d_1, d_2)` from the spectra of
    /// `phi` and `phi_t`.
    pub fn gradient_hs_norm(&self, phi: &Spectrum<T>, phi_t: &Spectrum<T>, order: T) -> T {
        let sum = phi.coeffs.iter().zip(&phi_t.coeffs).enumerate().fold(T::zero(), |acc, (k, (a, b))| {
            let w = self.omega(k);
            acc + (T::one() + w).powf(order) * (b.norm_sqr() + w * w * a.norm_sqr())
        });
        (sum * self.norm_scale()).sqrt()
    }

    #[inline]
    fn norm_scale(&self) -> T {
        let h = self.grid.h;
        h * h / idx::<T>(self.n * self.n)
    }

    /// Spectrum of `coeff * D g(tau)` for a plain or space-derivative term;
    /// a time-derivative term yields the spectrum of `coeff * g(tau)`.
    pub fn source_spectrum(&self, term: &SourceTerm<T>, tau: T) -> Result<Spectrum<T>> {
        let mut s = self.forward_fn(|x, y| term.eval(tau, x, y))?;
        if let SourceKind::SpaceDerivative(axis) = term.kind {
            s = self.derivative(&s, axis);
        }
        for c in &mut s.coeffs {
            *c = *c * term.coeff;
        }
        Ok(s)
    }

    /// Spectrum of the full forcing `f(tau)`, time-derivative terms by a
    /// fourth-order central difference in `tau`.
    pub fn forcing_spectrum(&self, sources: &[SourceTerm<T>], tau: T) -> Result<Spectrum<T>> {
        let mut acc = Spectrum::zeros(self.n);
        let one = Complex::new(T::one(), T::zero());
        for s in sources {
            if s.kind == SourceKind::TimeDerivative {
                if s.static_in_time {
                    continue;
                }
                let step = lit::<T>(1e-3) * tau.abs().max(T::one());
                let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
                for (off, c) in w {
                    let g = self.source_spectrum(s, tau + step * lit(off))?;
                    acc.axpy(one * (lit::<T>(c) / (lit::<T>(12.0) * step)), &g);
                }
            } else {
                acc.axpy(one, &self.source_spectrum(s, tau)?);
            }
        }
        Ok(acc)
    }

    /// Exact mode-wise evolution of `(phi_hat, phi_t_hat)` from `(phi0_hat,
    /// phi1_hat)` under the given sources, reported at each of `times`
    /// (non-decreasing, nonnegative). No horizon check is made.
    pub fn evolve(
        &self,
        phi0: &Spectrum<T>,
        phi1: &Spectrum<T>,
        sources: &[SourceTerm<T>],
        times: &[T],
        max_panel: T,
    ) -> Result<Vec<(Spectrum<T>, Spectrum<T>)>> {
        if times.iter().any(|t| !(*t >= T::zero()) || !t.is_finite()) {
            return Err(Error::InvalidTime("oracle times must be finite and nonnegative".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidTime("oracle times must be non-decreasing".into()));
        }
        if !(max_panel > T::zero()) {
            return Err(Error::InvalidConfig("oracle panel length must be positive".into()));
        }
        let nn = self.n * self.n;
        let omega: Vec<T> = (0..nn).map(|k| self.omega(k)).collect();

        let stat: Vec<&SourceTerm<T>> = sources.iter().filter(|s| s.static_in_time).collect();
        let dynamic: Vec<&SourceTerm<T>> = sources.iter().filter(|s| !s.static_in_time).collect();

        // static terms: a single spectrum (time derivatives of static fields vanish)
        let mut fixed = Spectrum::zeros(self.n);
        for s in stat.iter().filter(|s| s.kind != SourceKind::TimeDerivative) {
            fixed.axpy(Complex::new(T::one(), T::zero()), &self.source_spectrum(s, T::zero())?);
        }
        let has_fixed = stat.iter().any(|s| s.kind != SourceKind::TimeDerivative);

        let plain_dyn: Vec<&SourceTerm<T>> =
            dynamic.iter().copied().filter(|s| s.kind != SourceKind::TimeDerivative).collect();
        let dt_dyn: Vec<&SourceTerm<T>> =
            dynamic.iter().copied().filter(|s| s.kind == SourceKind::TimeDerivative).collect();

        let combined = |terms: &[&SourceTerm<T>], tau: T| -> Result<Option<Spectrum<T>>> {
            if terms.is_empty() {
                return Ok(None);
            }
            let mut acc = Spectrum::zeros(self.n);
            for s in terms {
                acc.axpy(Complex::new(T::one(), T::zero()), &self.source_spectrum(s, tau)?);
            }
            Ok(Some(acc))
        };

        // running integrals of cos(tau w) f, sin(tau w) f, f, tau f for each
        // dynamic group
        let zero = Complex::new(T::zero(), T::zero());
        let mut acc_plain = vec![[zero; 4]; if plain_dyn.is_empty() { 0 } else { nn }];
        let mut acc_dt = vec![[zero; 4]; if dt_dyn.is_empty() { 0 } else { nn }];
        let g0_dt = combined(&dt_dyn, T::zero())?;

        let gl = GaussLegendre::<T>::new(PANEL_NODES);
        let mut t_prev = T::zero();
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if t > t_prev && !(plain_dyn.is_empty() && dt_dyn.is_empty()) {
                let span = t - t_prev;
                let panels = (span / max_panel).ceil().to_usize().unwrap_or(1).max(1);
                let width = span / idx::<T>(panels);
                for p in 0..panels {
                    let a = t_prev + width * idx::<T>(p);
                    let (nodes, weights) = gl.on_interval(a, a + width);
                    for (&tau, &w) in nodes.iter().zip(&weights) {
                        for (group, acc) in [(&plain_dyn, &mut acc_plain), (&dt_dyn, &mut acc_dt)] {
                            if let Some(g) = combined(group, tau)? {
                                accumulate(acc, &g, &omega, tau, w);
                            }
                        }
                    }
                }
            }
            t_prev = t;

            let mut phi = Spectrum::zeros(self.n);
            let mut phit = Spectrum::zeros(self.n);
            let g_t = combined(&dt_dyn, t)?;
            for k in 0..nn {
                let w = omega[k];
                let (c, s) = ((t * w).cos(), (t * w).sin());
                let sinc = if w > T::zero() { s / w } else { t };
                let mut a = phi0.coeffs[k] * c + phi1.coeffs[k] * sinc;
                let mut b = phi1.coeffs[k] * c - phi0.coeffs[k] * (w * s);
                if has_fixed {
                    let f = fixed.coeffs[k];
                    let ramp = if w > T::zero() {
                        let hs = (t * w * lit(0.5)).sin();
                        lit::<T>(2.0) * hs * hs / (w * w)
                    } else {
                        t * t * lit(0.5)
                    };
                    a += f * ramp;
                    b += f * sinc;
                }
                if !acc_plain.is_empty() {
                    let (ic, is) = duhamel_pair(&acc_plain[k], w, t, c, s);
                    a += is;
                    b += ic;
                }
                if let (Some(g0), Some(gt)) = (&g0_dt, &g_t) {
                    let (ic, is) = duhamel_pair(&acc_dt[k], w, t, c, s);
                    a += ic - g0.coeffs[k] * sinc;
                    b += gt.coeffs[k] - g0.coeffs[k] * c - is * (w * w);
                }
                phi.coeffs[k] = a;
                phit.coeffs[k] = b;
            }
            out.push((phi, phit));
        }
        Ok(out)
    }

    /// [`Torus::evolve`] from sampled initial data, returned in physical space.
    pub fn evolve_data(
        &self,
        data: &InitialData<T>,
        sources: &[SourceTerm<T>],
        times: &[T],
        max_panel: T,
    ) -> Result<Vec<WaveState<T>>> {
        let phi0 = self.forward_fn(|x, y| data.phi0(x, y))?;
        let phi1 = self.forward_fn(|x, y| data.phi1(x, y))?;
        self.evolve(&phi0, &phi1, sources, times, max_panel)?
            .into_iter()
            .zip(times)
            .map(|((a, b), &t)| WaveState::new(t, self.inverse(&a), self.inverse(&b)))
            .collect()
    }

    /// Largest `|x|` at which `f` exceeds [`SUPPORT_THRESHOLD`] times its peak.
    pub fn support_radius(&self, f: &GridField<T>) -> T {
        let peak = f.max_abs();
        if peak == T::zero() {
            return T::zero();
        }
        let level = peak * lit(SUPPORT_THRESHOLD);
        let g = f.grid();
        f.values().iter().enumerate().fold(T::zero(), |r, (k, v)| {
            if v.abs() > level {
                let (x, y) = g.coords(k);
                r.max(x.hypot(y))
            } else {
                r
            }
        })
    }
}

#[inline]
fn accumulate<T: Real>(acc: &mut [[Complex<T>; 4]], g: &Spectrum<T>, omega: &[T], tau: T, w: T) {
    acc.par_iter_mut().enumerate().for_each(|(k, a)| {
        let f = g.coeffs[k] * w;
        let ph = tau * omega[k];
        a[0] += f * ph.cos();
        a[1] += f * ph.sin();
        a[2] += f;
        a[3] += f * tau;
    });
}

/// `(int cos((t-tau)w) f, int sin((t-tau)w)/w f)` from the running moments.
#[inline]
fn duhamel_pair<T: Real>(a: &[Complex<T>; 4], w: T, t: T, c: T, s: T) -> (Complex<T>, Complex<T>) {
    let ic = a[0] * c + a[1] * s;
    let is = if w > T::zero() { (a[0] * s - a[1] * c) / w } else { a[2] * t - a[3] };
    (ic, is)
}

/// Solution of `phi_tt - Lap phi = sum(sources)` with data `data` on the
/// torus of `spec`, at each of `times`.
///
/// Refuses any time at or beyond `L - R`, `R` being the support radius of
/// the data and of the sources (sampled at the start, middle and end of the
/// run), so that no periodic image can reach the original domain.
pub fn spectral_solve_periodic<T: Real>(
    data: &InitialData<T>,
    sources: &[SourceTerm<T>],
    spec: &TorusOracleSpec,
    times: &[T],
) -> Result<Vec<WaveState<T>>> {
    let torus = Torus::from_spec(spec)?;
    let t_max = times.iter().cloned().fold(T::zero(), T::max);
    let mut radius = T::zero();
    let g = *torus.grid();
    for f in [GridField::from_fn(g, |x, y| data.phi0(x, y)), GridField::from_fn(g, |x, y| data.phi1(x, y))] {
        radius = radius.max(torus.support_radius(&f));
    }
    for s in sources {
        for tau in [T::zero(), t_max * lit(0.5), t_max] {
            radius = radius.max(torus.support_radius(&GridField::from_fn(g, |x, y| s.eval(tau, x, y))));
        }
    }
    let valid = torus.half_period() - radius;
    if t_max >= valid {
        return Err(Error::OracleHorizonExceeded { requested: to_f64(t_max), valid: to_f64(valid) });
    }
    torus.evolve_data(data, sources, times, lit(spec.dt))
}
