//! Decay envelopes and bounded-constant probes for the linear estimates.
//!
//! Every probe reduces an inequality `lhs(t) <= C rhs(t)` to the sup of
//! `lhs/rhs` over a deterministic sample, recorded once per horizon. A
//! probe passes when the sup grows by no more than the slack factor from
//! the first horizon to the last.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InitialData;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::scalar::{idx, lit, to_f64, Real};
use crate::vector_fields::{apply_op, FieldOp, Jet};
use crate::wave_kernel::{spectral_solve_periodic, PoissonRule, QuadratureSpec, SourceKind, SourceTerm, Spectrum, Torus, TorusOracleSpec};

pub const DEFAULT_SLACK: f64 = 2.0;

/// Which side of the light cone a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Exterior,
}

/// The two-region pointwise decay bound for data of class `(A, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub k: f64,
}

impl Envelope {
    pub fn new(amplitude: f64, k: f64) -> Result<Self> {
        if !(k > 1.0) || !k.is_finite() {
            return Err(Error::DecayExponentOutOfRange(k));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidConfig(format!("envelope amplitude must be positive, got {amplitude}")));
        }
        Ok(Self { amplitude, k })
    }

    pub fn region(t: f64, absx: f64) -> Region {
        if absx <= t {
            Region::Interior
        } else {
            Region::Exterior
        }
    }

    /// `A / (sqrt(1+t+|x|) sqrt(1+|t-|x||))`
    pub fn interior(&self, t: f64, absx: f64) -> f64 {
        self.amplitude / ((1.0 + t + absx).sqrt() * (1.0 + (t - absx).abs()).sqrt())
    }

    /// `A / (sqrt(1+t+|x|) (1+|t-|x||)^{k-1/2})`
    pub fn exterior(&self, t: f64, absx: f64) -> f64 {
        self.amplitude / ((1.0 + t + absx).sqrt() * (1.0 + (t - absx).abs()).powf(self.k - 0.5))
    }

    pub fn value(&self, t: f64, absx: f64) -> f64 {
        match Self::region(t, absx) {
            Region::Interior => self.interior(t, absx),
            Region::Exterior => self.exterior(t, absx),
        }
    }
}

/// Envelope value at `(t, x)`.
pub fn envelope(t: f64, x: (f64, f64), amplitude: f64, k: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidTime(format!("envelope needs t >= 0, got {t}")));
    }
    Ok(Envelope::new(amplitude, k)?.value(t, x.0.hypot(x.1)))
}

/// Outcome of a bounded-constant probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub sample: String,
    /// Sup of `lhs/rhs` over the whole sample.
    pub c_est: f64,
    pub horizons: Vec<f64>,
    /// Sup over the part of the sample up to each horizon.
    pub trend: Vec<f64>,
    pub slack: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProbeReport {
    pub fn from_trend(
        probe: impl Into<String>,
        sample: impl Into<String>,
        horizons: Vec<f64>,
        trend: Vec<f64>,
        slack: f64,
    ) -> Self {
        let c_est = trend.iter().cloned().fold(0.0, f64::max);
        let finite = trend.iter().all(|c| c.is_finite() && *c >= 0.0);
        let pass = finite
            && match (trend.first(), trend.last()) {
                (Some(&a), Some(&b)) if a > 0.0 => b <= slack * a,
                (Some(_), Some(&b)) => b == 0.0,
                _ => false,
            };
        Self { probe: probe.into(), sample: sample.into(), c_est, horizons, trend, slack, pass, notes: Vec::new() }
    }

    /// `last / first` of the trend (1 for a vacuous probe).
    pub fn growth(&self) -> f64 {
        match (self.trend.first(), self.trend.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => 1.0,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// For each horizon `H`, the sup of `c` over samples `(t, c)` with `t <= H`.
pub fn sup_trend(samples: &[(f64, f64)], horizons: &[f64]) -> Vec<f64> {
    let tol = 1e-9;
    horizons
        .iter()
        .map(|&h| samples.iter().filter(|(t, _)| *t <= h + tol).fold(0.0, |m, (_, c)| f64::max(m, *c)))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x` over points with `x, y > 0`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::EmptySample("log-log fit needs two positive points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::EmptySample("log-log fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Per-snapshot sup of `|phi|/envelope`, split by region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub t: f64,
    pub max_ratio_interior: f64,
    pub max_ratio_exterior: f64,
}

pub fn envelope_scan<T: Real>(solution: &[(T, GridField<T>)], env: &Envelope) -> Result<Vec<EnvelopeRow>> {
    if solution.is_empty() || solution.iter().all(|(_, f)| f.grid().is_empty()) {
        return Err(Error::EmptySample("no snapshots to scan".into()));
    }
    Ok(solution
        .par_iter()
        .map(|(t, f)| {
            let t = to_f64(*t);
            let g = f.grid();
            let (mut ri, mut re) = (0.0f64, 0.0f64);
            for (k, v) in f.values().iter().enumerate() {
                let (x, y) = g.coords(k);
                let r = to_f64(x).hypot(to_f64(y));
                let ratio = to_f64(v.abs()) / env.value(t, r);
                match Envelope::region(t, r) {
                    Region::Interior => ri = ri.max(ratio),
                    Region::Exterior => re = re.max(ratio),
                }
            }
            EnvelopeRow { t, max_ratio_interior: ri, max_ratio_exterior: re }
        })
        .collect())
}

/// Sup of `|phi|/envelope` over all nodes of all snapshots, recorded at
/// half the final time and at the final time.
pub fn verify_envelope<T: Real>(solution: &[(T, GridField<T>)], env: &Envelope) -> Result<ProbeReport> {
    let rows = envelope_scan(solution, env)?;
    let t_end = rows.iter().map(|r| r.t).fold(0.0, f64::max);
    let samples: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.t, r.max_ratio_interior.max(r.max_ratio_exterior))).collect();
    let horizons = vec![t_end / 2.0, t_end];
    let trend = sup_trend(&samples, &horizons);
    let nodes: usize = solution.iter().map(|(_, f)| f.grid().len()).sum();
    Ok(ProbeReport::from_trend(
        "decay_envelope",
        format!("{} snapshots, {nodes} space-time nodes, A = {}, k = {}", solution.len(), env.amplitude, env.k),
        horizons,
        trend,
        DEFAULT_SLACK,
    ))
}

/// Linear solution with data `data` sampled by the Poisson formula on
/// `grid` at each of `times`, ready for [`verify_envelope`]. Radial data
/// only needs a [`Grid::ray`].
pub fn poisson_snapshots<T: Real>(
    data: &InitialData<T>,
    times: &[T],
    grid: &Grid<T>,
    quad: &QuadratureSpec,
) -> Result<Vec<(T, GridField<T>)>> {
    let rule = PoissonRule::new(quad)?;
    times.iter().map(|&t| Ok((t, rule.field(t, grid, data)?))).collect()
}

/// Torus, horizons and time sampling shared by the oracle-backed probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub torus: TorusOracleSpec,
    pub horizons: Vec<f64>,
    pub sample_dt: f64,
    pub slack: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            torus: TorusOracleSpec { period_l: 32.0, modes_per_axis: 256, dt: 0.5 },
            horizons: vec![10.0, 20.0],
            sample_dt: 0.5,
            slack: DEFAULT_SLACK,
        }
    }
}

impl ProbeSettings {
    fn validate(&self) -> Result<()> {
        self.torus.validate()?;
        if self.horizons.is_empty() || self.horizons.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidConfig("probe horizons must be positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("probe horizons must be increasing".into()));
        }
        if !(self.sample_dt > 0.0) || !(self.slack >= 1.0) {
            return Err(Error::InvalidConfig("sample_dt must be positive and slack at least 1".into()));
        }
        Ok(())
    }

    fn t_max(&self) -> f64 {
        *self.horizons.last().expect("validated")
    }

    /// `sample_dt, 2 sample_dt, ...` up to the last horizon.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_max() / self.sample_dt + 1e-9).floor() as usize;
        (1..=n).map(|i| i as f64 * self.sample_dt).collect()
    }

    /// Nodes `0, q, 2q, ...` (`q = sample_dt / 4`) for the right-hand-side
    /// time integrals; every sample time is one of them.
    fn quadrature_times(&self) -> Vec<f64> {
        let q = self.sample_dt / 4.0;
        let n = (self.t_max() / q + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * q).collect()
    }
}

/// Cumulative trapezoid of `values` on `nodes`.
fn cumulative<T: Real>(nodes: &[f64], values: &[T]) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        out[i] = out[i - 1] + 0.5 * (nodes[i] - nodes[i - 1]) * to_f64(values[i] + values[i - 1]);
    }
    out
}

/// Value of a cumulative integral at time `t` (a quadrature node).
fn at_time(nodes: &[f64], cum: &[f64], t: f64) -> f64 {
    let i = nodes.iter().position(|s| (s - t).abs() < 1e-9).expect("sample times are quadrature nodes");
    cum[i]
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs.abs() < 1e-300 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Cauchy data plus forcing for [`energy_probe_s`].
#[derive(Clone, Debug)]
pub struct EnergyCase<T> {
    pub data: InitialData<T>,
    pub sources: Vec<SourceTerm<T>>,
}

/// Sum of `waves` random plane waves `cos(xi.x + theta)` with lattice wave
/// numbers `|kappa_i| <= max_mode` of the torus `[-L, L)^2`: exactly
/// band-limited and periodic.
pub fn random_band_limited<T: Real>(seed: u64, waves: usize, max_mode: i32, half_period: f64) -> InitialData<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = std::f64::consts::PI / half_period;
    let mut draw = || -> Vec<(f64, f64, f64, f64)> {
        (0..waves)
            .map(|_| {
                let k1 = rng.gen_range(-max_mode..=max_mode) as f64 * base;
                let k2 = rng.gen_range(-max_mode..=max_mode) as f64 * base;
                (rng.gen_range(-1.0..1.0), k1, k2, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect()
    };
    let w0 = Arc::new(draw());
    let w1 = Arc::new(draw());
    let sum = |w: &[(f64, f64, f64, f64)], x: T, y: T| {
        let (x, y) = (to_f64(x), to_f64(y));
        lit::<T>(w.iter().map(|(a, k1, k2, th)| a * (k1 * x + k2 * y + th).cos()).sum())
    };
    let (a0, a1, ag) = (w0.clone(), w1, w0);
    InitialData::new(move |x, y| sum(&a0, x, y), move |x, y| sum(&a1, x, y)).with_gradient(move |x, y| {
        let (xf, yf) = (to_f64(x), to_f64(y));
        let mut g = [0.0, 0.0];
        for (a, k1, k2, th) in ag.iter() {
            let s = -a * (k1 * xf + k2 * yf + th).sin();
            g[0] += s * k1;
            g[1] += s * k2;
        }
        [lit(g[0]), lit(g[1])]
    })
}

/// `||d phi(t)||_{H^s} <= C (||d_x phi0||_{H^s} + ||phi1||_{H^s} + int_0^t ||f||_{H^s})`
/// on the torus, for `s` in `{0, 1}`. No horizon restriction applies: the
/// estimate holds mode by mode.
pub fn energy_probe_s<T: Real>(cases: &[EnergyCase<T>], s: u32, settings: &ProbeSettings) -> Result<ProbeReport> {
    if s > 1 {
        return Err(Error::Unsupported(format!("energy probe supports s in {{0, 1}}, got {s}")));
    }
    if cases.is_empty() {
        return Err(Error::EmptySample("no energy probe cases".into()));
    }
    settings.validate()?;
    let torus = Torus::<T>::from_spec(&settings.torus)?;
    let order = idx::<T>(s as usize);
    let times: Vec<T> = settings.sample_times().into_iter().map(lit).collect();
    let qt = settings.quadrature_times();
    let mut samples = Vec::new();
    for case in cases {
        let phi0 = torus.forward_fn(|x, y| case.data.phi0(x, y))?;
        let phi1 = torus.forward_fn(|x, y| case.data.phi1(x, y))?;
        let rhs0 = to_f64(torus.gradient_hs_norm(&phi0, &Spectrum::zeros(torus.modes()), order))
            + to_f64(torus.hs_norm(&phi1, order));
        let cum = if case.sources.is_empty() {
            vec![0.0; qt.len()]
        } else if case.sources.iter().all(|s| s.is_static()) {
            let f = to_f64(torus.hs_norm(&torus.forcing_spectrum(&case.sources, T::zero())?, order));
            qt.iter().map(|t| f * t).collect()
        } else {
            let norms = qt
                .iter()
                .map(|&tau| Ok(torus.hs_norm(&torus.forcing_spectrum(&case.sources, lit(tau))?, order)))
                .collect::<Result<Vec<T>>>()?;
            cumulative(&qt, &norms)
        };
        let states = torus.evolve(&phi0, &phi1, &case.sources, &times, lit(settings.torus.dt))?;
        for ((a, b), &t) in states.iter().zip(&times) {
            let t = to_f64(t);
            let lhs = to_f64(torus.gradient_hs_norm(a, b, order));
            samples.push((t, ratio(lhs, rhs0 + at_time(&qt, &cum, t))));
        }
    }
    let trend = sup_trend(&samples, &settings.horizons);
    Ok(ProbeReport::from_trend(
        format!("energy_h{s}"),
        format!("{} cases x {} times on a {}-mode torus", cases.len(), times.len(), torus.modes()),
        settings.horizons.clone(),
        trend,
        settings.slack,
    ))
}

fn physical_norms<T: Real, N>(grid: &Grid<T>, terms: &[SourceTerm<T>], qt: &[f64], norm: N) -> Vec<Vec<T>>
where
    N: Fn(&GridField<T>) -> T + Sync,
{
    terms
        .iter()
        .map(|s| {
            qt.iter()
                .map(|&tau| {
                    let tau = lit::<T>(tau);
                    norm(&GridField::from_fn(*grid, |x, y| s.eval(tau, x, y))) * s.coeff.abs()
                })
                .collect()
        })
        .collect()
}

/// `||phi(t)||_2 <= C (sum_j int_0^t ||f_j||_2 + ||f_0(0)||_2)` for
/// `phi_tt - Lap phi = sum_j a_j d_j f_j` with zero data; `d_0 = d_t`.
pub fn divergence_source_probe<T: Real>(terms: &[SourceTerm<T>], settings: &ProbeSettings) -> Result<ProbeReport> {
    settings.validate()?;
    if terms.iter().any(|s| s.kind == SourceKind::Plain) {
        return Err(Error::Unsupported("divergence-form probe takes derivative terms only".into()));
    }
    let torus = Torus::<T>::from_spec(&settings.torus)?;
    let grid = *torus.grid();
    let times = settings.sample_times();
    let qt = settings.quadrature_times();
    let norms = physical_norms(&grid, terms, &qt, |f| f.l2_norm());
    let mut cum = vec![0.0; qt.len()];
    for n in &norms {
        for (c, v) in cum.iter_mut().zip(cumulative(&qt, n)) {
            *c += v;
        }
    }
    let initial: f64 = terms
        .iter()
        .zip(&norms)
        .filter(|(s, _)| s.kind == SourceKind::TimeDerivative)
        .map(|(_, n)| to_f64(n[0]))
        .sum();
    let samples = solve_and_ratio(terms, settings, &times, |t, phi| {
        ratio(to_f64(phi.l2_norm()), at_time(&qt, &cum, t) + initial)
    })?;
    let trend = sup_trend(&samples, &settings.horizons);
    Ok(ProbeReport::from_trend(
        "divergence_source_l2",
        format!("{} terms x {} times", terms.len(), times.len()),
        settings.horizons.clone(),
        trend,
        settings.slack,
    ))
}

fn solve_and_ratio<T: Real, F>(
    terms: &[SourceTerm<T>],
    settings: &ProbeSettings,
    times: &[f64],
    mut f: F,
) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64, &GridField<T>) -> f64,
{
    if terms.is_empty() {
        return Ok(times.iter().map(|&t| (t, 0.0)).collect());
    }
    let tt: Vec<T> = times.iter().map(|&t| lit(t)).collect();
    let states = spectral_solve_periodic(&InitialData::zero(), terms, &settings.torus, &tt)?;
    Ok(states.iter().zip(times).map(|(s, &t)| (t, f(t, &s.u))).collect())
}

/// `||phi(t)||_p <= C (1+t)^{2/p-1} int_0^t ||g||_1` for
/// `phi_tt - Lap phi = g` with zero data, `p` in `(1, 2]`.
pub fn lp_source_probe<T: Real>(terms: &[SourceTerm<T>], p: f64, settings: &ProbeSettings) -> Result<ProbeReport> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidConfig(format!("p must lie in (1, 2], got {p}")));
    }
    settings.validate()?;
    if terms.iter().any(|s| s.kind != SourceKind::Plain) {
        return Err(Error::Unsupported("L^p probe takes plain sources only".into()));
    }
    let torus = Torus::<T>::from_spec(&settings.torus)?;
    let grid = *torus.grid();
    let times = settings.sample_times();
    let qt = settings.quadrature_times();
    // the forcing is the sum of the terms, so its L1 norm is taken on the sum
    let forcing: Vec<T> = qt
        .iter()
        .map(|&tau| {
            let tau = lit::<T>(tau);
            GridField::from_fn(grid, |x, y| terms.iter().fold(T::zero(), |a, s| a + s.coeff * s.eval(tau, x, y)))
                .l1_norm()
        })
        .collect();
    let cum = cumulative(&qt, &forcing);
    let pp = lit::<T>(p);
    let samples = solve_and_ratio(terms, settings, &times, |t, phi| {
        ratio(to_f64(phi.lp_norm(pp)), (1.0 + t).powf(2.0 / p - 1.0) * at_time(&qt, &cum, t))
    })?;
    let trend = sup_trend(&samples, &settings.horizons);
    Ok(ProbeReport::from_trend(
        format!("lp_source_p{p}"),
        format!("{} terms x {} times", terms.len(), times.len()),
        settings.horizons.clone(),
        trend,
        settings.slack,
    ))
}

type SpaceTimeFn<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;

/// A factor of the product source `|g1 g2|`, with its time derivative so
/// that the first-order generators can be applied.
#[derive(Clone)]
pub struct ProductFactor<T> {
    value: SpaceTimeFn<T>,
    time_derivative: Option<SpaceTimeFn<T>>,
    static_in_time: bool,
}

impl<T: Real> ProductFactor<T> {
    /// Factor without a time-derivative channel.
    pub fn new<F: Fn(T, T, T) -> T + Send + Sync + 'static>(g: F) -> Self {
        Self { value: Arc::new(g), time_derivative: None, static_in_time: false }
    }

    pub fn with_time_derivative<F: Fn(T, T, T) -> T + Send + Sync + 'static>(mut self, gt: F) -> Self {
        self.time_derivative = Some(Arc::new(gt));
        self
    }

    /// Time-independent factor (zero time derivative).
    pub fn stationary<F: Fn(T, T) -> T + Send + Sync + 'static>(g: F) -> Self {
        Self {
            value: Arc::new(move |_, x, y| g(x, y)),
            time_derivative: Some(Arc::new(|_, _, _| T::zero())),
            static_in_time: true,
        }
    }

    /// `g(tau, .)` scaled by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let v = self.value.clone();
        let d = self.time_derivative.clone();
        Self {
            value: Arc::new(move |t, x, y| c * v(t, x, y)),
            time_derivative: d.map(|d| Arc::new(move |t, x, y| c * d(t, x, y)) as SpaceTimeFn<T>),
            static_in_time: self.static_in_time,
        }
    }

    fn gamma_sq_sum(&self, grid: &Grid<T>, tau: T) -> Result<T> {
        let dt = self
            .time_derivative
            .as_ref()
            .ok_or_else(|| Error::MissingTimeDerivative("product factor has no time derivative".into()))?;
        let jet = Jet::new(
            tau,
            vec![
                GridField::from_fn(*grid, |x, y| (self.value)(tau, x, y)),
                GridField::from_fn(*grid, |x, y| dt(tau, x, y)),
            ],
        )?;
        let mut total = jet.value().l2_norm().powi(2);
        for op in FieldOp::ALL {
            total += apply_op(op, &jet)?.value().l2_norm().powi(2);
        }
        Ok(total)
    }
}

/// Both product-source estimates for `phi_tt - Lap phi = |g1 g2|` with zero
/// data: the weighted `L^2` bound and the weighted `L^infinity` bound, in
/// that order.
pub fn product_source_probe<T: Real>(
    g1: &ProductFactor<T>,
    g2: &ProductFactor<T>,
    settings: &ProbeSettings,
) -> Result<[ProbeReport; 2]> {
    settings.validate()?;
    let torus = Torus::<T>::from_spec(&settings.torus)?;
    let grid = *torus.grid();
    let times = settings.sample_times();
    let qt = settings.quadrature_times();
    let w = |tau: f64| lit::<T>((1.0 + tau).powf(-0.5));
    let mut a1 = Vec::with_capacity(qt.len());
    let mut a2 = Vec::with_capacity(qt.len());
    let mut b = Vec::with_capacity(qt.len());
    for &tau in &qt {
        let t = lit::<T>(tau);
        a1.push(g1.gamma_sq_sum(&grid, t)? * w(tau));
        a2.push(g2.gamma_sq_sum(&grid, t)? * w(tau));
        b.push(GridField::from_fn(grid, |x, y| (g2.value)(t, x, y)).l2_norm().powi(2));
    }
    let (ca1, ca2, cb) = (cumulative(&qt, &a1), cumulative(&qt, &a2), cumulative(&qt, &b));

    let (v1, v2) = (g1.value.clone(), g2.value.clone());
    let source = if g1.static_in_time && g2.static_in_time {
        SourceTerm::stationary(SourceKind::Plain, T::one(), move |x, y| (v1(T::zero(), x, y) * v2(T::zero(), x, y)).abs())
    } else {
        SourceTerm::new(SourceKind::Plain, T::one(), move |t, x, y| (v1(t, x, y) * v2(t, x, y)).abs())
    };
    let tt: Vec<T> = times.iter().map(|&t| lit(t)).collect();
    let states = spectral_solve_periodic(&InitialData::zero(), &[source], &settings.torus, &tt)?;
    let mut s61 = Vec::new();
    let mut s62 = Vec::new();
    for (s, &t) in states.iter().zip(&times) {
        let (i1, i2, ib) = (at_time(&qt, &ca1, t), at_time(&qt, &ca2, t), at_time(&qt, &cb, t));
        let l2 = to_f64(s.u.l2_norm());
        let linf = to_f64(s.u.max_abs());
        s61.push((t, ratio(l2, (1.0 + t).powf(0.25) * i1.sqrt() * ib.sqrt())));
        s62.push((t, ratio((1.0 + t).sqrt() * linf, i1.sqrt() * i2.sqrt())));
    }
    let desc = format!("{} times on a {}-mode torus", times.len(), torus.modes());
    Ok([
        ProbeReport::from_trend(
            "product_source_l2",
            desc.clone(),
            settings.horizons.clone(),
            sup_trend(&s61, &settings.horizons),
            settings.slack,
        ),
        ProbeReport::from_trend(
            "product_source_linf",
            desc,
            settings.horizons.clone(),
            sup_trend(&s62, &settings.horizons),
            settings.slack,
        ),
    ])
}
