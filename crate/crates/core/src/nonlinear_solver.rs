//! Method-of-lines integrator for `u_tt = e^{-u} Lap u - u_t^2`.
//!
//! The first-order system `u_t = p`, `p_t = e^{-u} Lap u - p^2` is advanced
//! with the classical four-stage Runge-Kutta method and the fourth-order
//! Laplacian. The two outermost node rings are frozen, and an optional
//! sponge damps `p` in the outer annulus of the square. Only the causal
//! interior `{|x| <= L - c_max t}` outside the sponge is used for
//! monitoring.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataFamily, DecayParams};
use crate::decay_estimates::ProbeReport;
use crate::error::{Error, Result};
use crate::geometry::scalar_curvature_from_log;
use crate::grid::{Grid, GridField, WaveState};
use crate::scalar::{lit, to_f64, Real};
use crate::stencil;
use crate::vector_fields::{norm_bundle, Jet, NormBundle, DEFAULT_ORDER_CAP};

/// Node rings held fixed at the edge of the square.
pub const FROZEN_RING: usize = 2;

/// Which equation [`Solver::step`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// `u_tt = e^{-u} Lap u - u_t^2`.
    #[default]
    Quasilinear,
    /// `u_tt = Lap u`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub u_max: f64,
    pub curvature_cap: f64,
    pub dt_min: f64,
    /// Multiple of the `t = 0` value allowed for `(1+t)^{1/2} N1` and
    /// `(1+t)^{1/2} N2`.
    pub norm_multiple: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { u_max: 10.0, curvature_cap: 1e3, dt_min: 1e-7, norm_multiple: 20.0 }
    }
}

/// Damping `sigma(d) = strength ((d - d0)/(L - d0))^2` of `p` for
/// `d = max(|x1|, |x2|) > d0 = (1 - fraction) L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sponge {
    pub enabled: bool,
    pub fraction: f64,
    pub strength: f64,
}

impl Default for Sponge {
    fn default() -> Self {
        Self { enabled: true, fraction: 0.1, strength: 4.0 }
    }
}

impl Sponge {
    pub fn off() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    fn inner_edge(&self, half_width: f64) -> f64 {
        if self.enabled {
            (1.0 - self.fraction) * half_width
        } else {
            half_width
        }
    }
}

fn default_true() -> bool {
    true
}
fn default_one() -> f64 {
    1.0
}
fn default_safety() -> f64 {
    0.5
}
fn default_l1() -> usize {
    2
}

/// One run of the solver, readable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(rename = "L", alias = "half_width")]
    pub half_width: f64,
    /// Nodes per axis.
    pub nodes: usize,
    pub family: DataFamily,
    #[serde(flatten)]
    pub params: DecayParams,
    /// Multiplies the family's velocity profile.
    #[serde(default = "default_one")]
    pub velocity_sign: f64,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// Lets `cfl_safety` exceed 1, for instability demonstrations.
    #[serde(default)]
    pub allow_unstable_cfl: bool,
    /// Fixed step overriding the CFL rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_dt: Option<f64>,
    /// Time between snapshots.
    #[serde(default = "default_one")]
    pub snapshot_stride: f64,
    pub t_max: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_l1")]
    pub l1: usize,
    #[serde(default = "default_one_usize")]
    pub l2: usize,
    #[serde(default = "default_true")]
    pub monitor_norms: bool,
    #[serde(default)]
    pub sponge: Sponge,
    #[serde(default)]
    pub equation: Equation,
    #[serde(default = "default_true")]
    pub keep_snapshots: bool,
}

fn default_one_usize() -> usize {
    1
}

impl RunConfig {
    pub fn new(half_width: f64, nodes: usize, family: DataFamily, params: DecayParams, t_max: f64) -> Self {
        Self {
            half_width,
            nodes,
            family,
            params,
            velocity_sign: 1.0,
            cfl_safety: 0.5,
            allow_unstable_cfl: false,
            fixed_dt: None,
            snapshot_stride: 1.0,
            t_max,
            thresholds: Thresholds::default(),
            l1: 2,
            l2: 1,
            monitor_norms: true,
            sponge: Sponge::default(),
            equation: Equation::Quasilinear,
            keep_snapshots: true,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.nodes.max(2) - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.params.validate()?;
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return bad(format!("L must be positive, got {}", self.half_width));
        }
        if self.nodes < 4 * FROZEN_RING + stencil::MIN_NODES {
            return bad(format!("need at least {} nodes per axis, got {}", 4 * FROZEN_RING + stencil::MIN_NODES, self.nodes));
        }
        let safety_ok = self.cfl_safety > 0.0 && (self.cfl_safety < 1.0 || (self.allow_unstable_cfl && self.cfl_safety.is_finite()));
        if !safety_ok {
            return bad(format!("CFL safety must lie in (0, 1), got {}", self.cfl_safety));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("fixed dt must be positive, got {dt}"));
            }
        }
        if !(self.snapshot_stride > 0.0) || !self.snapshot_stride.is_finite() {
            return bad(format!("snapshot stride must be positive, got {}", self.snapshot_stride));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !self.velocity_sign.is_finite() {
            return bad("velocity_sign must be finite".into());
        }
        if self.l1.max(self.l2) > DEFAULT_ORDER_CAP {
            return Err(Error::OrderCapExceeded { order: self.l1.max(self.l2), cap: DEFAULT_ORDER_CAP });
        }
        let t = &self.thresholds;
        if !(t.u_max > 0.0 && t.curvature_cap > 0.0 && t.dt_min > 0.0 && t.norm_multiple > 0.0) {
            return bad("thresholds must be positive".into());
        }
        if self.sponge.enabled {
            if !(self.sponge.fraction > 0.0 && self.sponge.fraction < 0.5) || !(self.sponge.strength >= 0.0) {
                return bad("sponge fraction must lie in (0, 0.5) and strength be nonnegative".into());
            }
        } else {
            // without a sponge the light cone of the data must stay inside
            let support = match self.family {
                DataFamily::Rational => f64::INFINITY,
                DataFamily::GaussianTail => (1e12f64).ln().sqrt(),
            };
            let speed = 1.0 + self.params.epsilon * self.family.class_amplitude(&self.params);
            if support + speed * self.t_max >= self.half_width {
                return bad(format!(
                    "the data's light cone reaches the boundary before t_max = {} and the sponge is disabled",
                    self.t_max
                ));
            }
        }
        Ok(())
    }
}

/// `eps * (u0, u1)` of a family sampled on `grid`, checking the decay class
/// node by node.
pub fn make_initial_data<T: Real>(
    family: DataFamily,
    params: &DecayParams,
    grid: &Grid<T>,
) -> Result<(GridField<T>, GridField<T>)> {
    params.validate()?;
    let a = family.class_amplitude(params) * (1.0 + 1e-12);
    let k = params.k;
    for kk in 0..grid.len() {
        let (x, y) = grid.coords(kk);
        let (x, y) = (to_f64(x), to_f64(y));
        let r2 = x * x + y * y;
        let w = 1.0 + r2.sqrt();
        let u0 = family.u0(params, r2).0;
        let u1 = family.u1(params, r2);
        if u0.abs() * w.powf(k) > a || u1.abs() * w.powf(k + 1.0) > a {
            return Err(Error::DataOutsideClass(format!("profile exceeds A'(1+|x|)^-k at ({x}, {y})")));
        }
    }
    let eps: T = lit(params.epsilon);
    let u0 = GridField::from_fn(*grid, |x, y| eps * family.u0(params, x * x + y * y).0);
    let u1 = GridField::from_fn(*grid, |x, y| eps * family.u1(params, x * x + y * y));
    Ok((u0, u1))
}

/// `safety * h / max e^{-u/2}`.
pub fn cfl_dt<T: Real>(state: &WaveState<T>, safety: T) -> Result<T> {
    let mut umin = T::infinity();
    for &u in state.u.values() {
        if !u.is_finite() {
            return Err(Error::NonFinite("u has a non-finite node".into()));
        }
        umin = umin.min(u);
    }
    let speed = (-umin * lit(0.5)).exp();
    Ok(safety * state.grid().h / speed)
}

/// Stepper with precomputed sponge profile and frozen boundary mask.
#[derive(Debug, Clone)]
pub struct Solver<T> {
    grid: Grid<T>,
    sigma: Vec<T>,
    frozen: Vec<bool>,
    equation: Equation,
}

impl<T: Real> Solver<T> {
    pub fn new(grid: Grid<T>, sponge: &Sponge, equation: Equation) -> Self {
        let half_width = to_f64(grid.max_coordinate());
        let d0 = sponge.inner_edge(half_width);
        let (nx, ny) = (grid.nx, grid.ny);
        let mut sigma = vec![T::zero(); grid.len()];
        let mut frozen = vec![false; grid.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                frozen[k] = i < FROZEN_RING || j < FROZEN_RING || i + FROZEN_RING >= nx || j + FROZEN_RING >= ny;
                if sponge.enabled {
                    let (x, y) = grid.coords(k);
                    let d = to_f64(x.abs().max(y.abs()));
                    if d > d0 {
                        let s = (d - d0) / (half_width - d0);
                        sigma[k] = lit(sponge.strength * s * s);
                    }
                }
            }
        }
        Self { grid, sigma, frozen, equation }
    }

    pub fn for_config(cfg: &RunConfig) -> Result<Self> {
        let grid = Grid::square(lit(cfg.half_width), cfg.nodes)?;
        Ok(Self::new(grid, &cfg.sponge, cfg.equation))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    fn rhs(&self, u: &[T], p: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let uf = GridField::from_values(self.grid, u.to_vec())?;
        let lap = stencil::laplacian(&uf)?;
        let lv = lap.values();
        let n = self.grid.len();
        let eq = self.equation;
        let (du, dp): (Vec<T>, Vec<T>) = (0..n)
            .into_par_iter()
            .map(|k| {
                if self.frozen[k] {
                    return (T::zero(), T::zero());
                }
                let force = match eq {
                    Equation::Quasilinear => (-u[k]).exp() * lv[k] - p[k] * p[k],
                    Equation::Linear => lv[k],
                };
                (p[k], force - self.sigma[k] * p[k])
            })
            .unzip();
        Ok((du, dp))
    }

    /// One classical Runge-Kutta step. A non-finite result is reported as
    /// [`Error::NonFinite`] rather than returned.
    pub fn step(&self, state: &WaveState<T>, dt: T) -> Result<WaveState<T>> {
        if !self.grid.matches(state.grid()) {
            return Err(Error::GridMismatch("state grid differs from the solver grid".into()));
        }
        let u0 = state.u.values();
        let p0 = state.p.values();
        let half = lit::<T>(0.5) * dt;
        let axpy = |base: &[T], d: &[T], a: T| -> Vec<T> { base.par_iter().zip(d).map(|(b, x)| *b + a * *x).collect() };
        let (k1u, k1p) = self.rhs(u0, p0)?;
        let (k2u, k2p) = self.rhs(&axpy(u0, &k1u, half), &axpy(p0, &k1p, half))?;
        let (k3u, k3p) = self.rhs(&axpy(u0, &k2u, half), &axpy(p0, &k2p, half))?;
        let (k4u, k4p) = self.rhs(&axpy(u0, &k3u, dt), &axpy(p0, &k3p, dt))?;
        let sixth = dt / lit(6.0);
        let two = lit::<T>(2.0);
        let combine = |b: &[T], a: &[T], c: &[T], d: &[T], e: &[T]| -> Vec<T> {
            (0..b.len()).into_par_iter().map(|k| b[k] + sixth * (a[k] + two * c[k] + two * d[k] + e[k])).collect()
        };
        let u = combine(u0, &k1u, &k2u, &k3u, &k4u);
        let p = combine(p0, &k1p, &k2p, &k3p, &k4p);
        let next = WaveState::new(state.t + dt, GridField::from_values(self.grid, u)?, GridField::from_values(self.grid, p)?)?;
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("state became non-finite at t = {}", next.t + T::zero())));
        }
        Ok(next)
    }
}

/// One quasilinear step with frozen edge rings and no sponge.
pub fn step<T: Real>(state: &WaveState<T>, dt: T) -> Result<WaveState<T>> {
    Solver::new(*state.grid(), &Sponge::off(), Equation::Quasilinear).step(state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownReason {
    Nonfinite,
    AmplitudeCap,
    NormMonitorViolation,
    CurvatureCap,
    CflCollapse,
    /// Censored: the run reached `t_max`.
    None,
}

impl std::fmt::Display for BreakdownReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownInfo {
    pub time: f64,
    pub reason: BreakdownReason,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl BreakdownInfo {
    pub fn censored(t_max: f64) -> Self {
        Self { time: t_max, reason: BreakdownReason::None, detail: String::new() }
    }

    pub fn is_censored(&self) -> bool {
        self.reason == BreakdownReason::None
    }

    fn new(time: f64, reason: BreakdownReason, detail: String) -> Self {
        Self { time, reason, detail }
    }
}

/// Norms at the current time and at `t = 0`, for the bootstrap monitor.
#[derive(Debug, Clone, Copy)]
pub struct NormCheck<'a> {
    pub current: &'a NormBundle,
    pub initial: &'a NormBundle,
}

/// Applies the breakdown signals to one state. Amplitude and curvature are
/// read on `region` only (the whole grid when `None`).
pub fn detect_breakdown<T: Real>(
    state: &WaveState<T>,
    norms: Option<NormCheck<'_>>,
    dt: Option<T>,
    thresholds: &Thresholds,
    region: Option<&(dyn Fn(T, T) -> bool + Sync)>,
) -> Option<BreakdownInfo> {
    let t = to_f64(state.t);
    if !state.is_finite() {
        return Some(BreakdownInfo::new(t, BreakdownReason::Nonfinite, "non-finite node".into()));
    }
    let keep = |x: T, y: T| region.map_or(true, |r| r(x, y));
    let umax = to_f64(state.u.max_abs_where(keep));
    if umax > thresholds.u_max {
        return Some(BreakdownInfo::new(t, BreakdownReason::AmplitudeCap, format!("max |u| = {umax:.6e}")));
    }
    if let Ok(r) = scalar_curvature_from_log(&state.u) {
        let rmax = to_f64(r.max_abs_where(keep));
        if !(rmax <= thresholds.curvature_cap) {
            return Some(BreakdownInfo::new(t, BreakdownReason::CurvatureCap, format!("max |R| = {rmax:.6e}")));
        }
    }
    if let Some(dt) = dt {
        if to_f64(dt) < thresholds.dt_min {
            return Some(BreakdownInfo::new(t, BreakdownReason::CflCollapse, format!("dt = {:.6e}", to_f64(dt))));
        }
    }
    if let Some(NormCheck { current, initial }) = norms {
        let w = (1.0 + current.t).sqrt();
        let m = thresholds.norm_multiple;
        for (name, now, then) in [("N1", current.n1, initial.n1), ("N2", current.n2, initial.n2)] {
            if w * now > m * then {
                return Some(BreakdownInfo::new(
                    t,
                    BreakdownReason::NormMonitorViolation,
                    format!("(1+t)^(1/2) {name} = {:.6e} exceeds {m} x {then:.6e}", w * now),
                ));
            }
        }
    }
    None
}

/// One row of the monitored time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "maxR")]
    pub max_r: f64,
}

impl NormRow {
    fn new(b: &NormBundle, max_r: f64) -> Self {
        Self { t: b.t, m1: b.m1, m2: b.m2, n1: b.n1, n2: b.n2, max_r }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub grid: Grid<T>,
    pub snapshots: Vec<WaveState<T>>,
    pub norms: Vec<NormRow>,
    pub breakdown: BreakdownInfo,
    pub steps: usize,
    /// Largest wave speed met along the run.
    pub c_max: f64,
}

impl<T: Real> RunOutput<T> {
    /// Largest `(1+t)^{1/2} N2 / eps` over the monitored series.
    pub fn peak_weighted_n2(&self, epsilon: f64) -> f64 {
        if epsilon <= 0.0 {
            return 0.0;
        }
        self.norms.iter().map(|r| (1.0 + r.t).sqrt() * r.n2 / epsilon).fold(0.0, f64::max)
    }
}

struct Monitor<'a> {
    cfg: &'a RunConfig,
    sponge_edge: f64,
}

impl Monitor<'_> {
    fn radius(&self, t: f64, c_max: f64) -> f64 {
        (self.cfg.half_width - c_max * t).min(self.sponge_edge)
    }
}

fn max_speed<T: Real>(u: &GridField<T>) -> f64 {
    let umin = u.values().iter().fold(f64::INFINITY, |m, v| m.min(to_f64(*v)));
    (-umin / 2.0).exp()
}

/// Integrates from the configured data until `t_max` or breakdown.
pub fn run<T: Real>(cfg: &RunConfig) -> Result<RunOutput<T>> {
    cfg.validate()?;
    let solver = Solver::<T>::for_config(cfg)?;
    let grid = *solver.grid();
    let (u0, mut u1) = make_initial_data(cfg.family, &cfg.params, &grid)?;
    if cfg.velocity_sign != 1.0 {
        u1 = u1.scaled(lit(cfg.velocity_sign));
    }
    // the frozen rings keep their initial position
    let mut pv = u1.into_values();
    for (k, f) in solver.frozen.iter().enumerate() {
        if *f {
            pv[k] = T::zero();
        }
    }
    let mut state = WaveState::new(T::zero(), u0, GridField::from_values(grid, pv)?)?;
    run_from(cfg, &solver, state.clone()).map(|mut out| {
        if !cfg.keep_snapshots {
            out.snapshots.clear();
        } else if out.snapshots.is_empty() {
            state.t = T::zero();
            out.snapshots.push(state);
        }
        out
    })
}

fn run_from<T: Real>(cfg: &RunConfig, solver: &Solver<T>, mut state: WaveState<T>) -> Result<RunOutput<T>> {
    let grid = *solver.grid();
    let mon = Monitor { cfg, sponge_edge: cfg.sponge.inner_edge(cfg.half_width) };
    let mut c_max = max_speed(&state.u);
    let mut snapshots = Vec::new();
    let mut norms = Vec::new();
    let mut initial: Option<NormBundle> = None;
    let mut steps = 0usize;

    let record = |state: &WaveState<T>, c_max: f64, snapshots: &mut Vec<WaveState<T>>| -> Result<(NormBundle, f64)> {
        let rad = mon.radius(to_f64(state.t), c_max);
        let inside = move |x: T, y: T| {
            let (x, y) = (to_f64(x), to_f64(y));
            x.abs().max(y.abs()) <= mon.sponge_edge && x.hypot(y) <= rad
        };
        let bundle = if cfg.monitor_norms {
            let jet = Jet::nonlinear(state, cfg.l1.max(cfg.l2) + 2)?;
            norm_bundle(&jet, cfg.l1, cfg.l2, DEFAULT_ORDER_CAP, Some(&inside))?
        } else {
            NormBundle::zero(to_f64(state.t), cfg.l1, cfg.l2)
        };
        let max_r = to_f64(scalar_curvature_from_log(&state.u)?.max_abs_where(inside));
        if cfg.keep_snapshots {
            snapshots.push(state.clone());
        }
        Ok((bundle, max_r))
    };

    let (b0, r0) = record(&state, c_max, &mut snapshots)?;
    norms.push(NormRow::new(&b0, r0));
    initial = initial.or(Some(b0));

    let stride = cfg.snapshot_stride;
    let mut n_snap = 1usize;
    let tol = 1e-9 * stride.max(1.0).min(cfg.t_max);
    let breakdown = loop {
        let t = to_f64(state.t);
        if t >= cfg.t_max - tol {
            break BreakdownInfo::censored(cfg.t_max);
        }
        let dt_rule = match cfg.fixed_dt {
            Some(dt) => dt,
            None => match cfl_dt(&state, lit::<T>(cfg.cfl_safety)) {
                Ok(dt) => to_f64(dt),
                Err(_) => break BreakdownInfo::new(t, BreakdownReason::Nonfinite, "non-finite node".into()),
            },
        };
        if dt_rule < cfg.thresholds.dt_min {
            break BreakdownInfo::new(t, BreakdownReason::CflCollapse, format!("dt = {dt_rule:.6e}"));
        }
        let target = (n_snap as f64 * stride).min(cfg.t_max);
        let dt = dt_rule.min(target - t);
        let mut next = match solver.step(&state, lit(dt)) {
            Ok(s) => s,
            Err(Error::NonFinite(m)) => break BreakdownInfo::new(t + dt, BreakdownReason::Nonfinite, m),
            Err(e) => return Err(e),
        };
        steps += 1;
        let at_snapshot = target - to_f64(next.t) <= tol;
        if at_snapshot {
            next.t = lit(target);
        }
        state = next;
        c_max = c_max.max(max_speed(&state.u));
        let rad = mon.radius(to_f64(state.t), c_max);
        let inside = |x: T, y: T| {
            let (x, y) = (to_f64(x), to_f64(y));
            x.abs().max(y.abs()) <= mon.sponge_edge && x.hypot(y) <= rad
        };
        if let Some(b) = detect_breakdown(&state, None, None, &cfg.thresholds, Some(&inside)) {
            break b;
        }
        if at_snapshot {
            n_snap += 1;
            let (b, max_r) = record(&state, c_max, &mut snapshots)?;
            norms.push(NormRow::new(&b, max_r));
            if cfg.monitor_norms {
                let check = NormCheck { current: &b, initial: initial.as_ref().expect("initial norms recorded") };
                if let Some(info) = detect_breakdown(&state, Some(check), None, &cfg.thresholds, Some(&inside)) {
                    break info;
                }
            }
        }
    };
    Ok(RunOutput { grid, snapshots, norms, breakdown, steps, c_max })
}

/// Two-sided check of the perturbed energy inequality along a trajectory,
/// read as `box u + gamma Lap u = F` with `gamma = 1 - e^{-u}`, `F = -u_t^2`.
///
/// At each snapshot the left side `||du(t)||_2` is compared with
/// `2 e^{G(t)} ||du(0)||_2 + 2 int_0^t e^{G(t)-G(s)} ||F(s)||_2 ds`,
/// `G(t) = int_0^t 2 sup|d gamma|`, with trapezoidal time integrals over the
/// snapshots. `trend` holds the ratio lhs/rhs per snapshot and the report
/// passes iff every ratio is at most 1.
pub fn energy_lemma24_diagnostic<T: Real>(trajectory: &[WaveState<T>]) -> Result<ProbeReport> {
    if trajectory.is_empty() {
        return Err(Error::EmptySample("empty trajectory".into()));
    }
    let name = "perturbed energy inequality";
    let sample = format!("{} snapshots", trajectory.len());
    let mut times = Vec::new();
    let mut lhs = Vec::new();
    let mut gdot = Vec::new();
    let mut fnorm = Vec::new();
    for s in trajectory {
        let t = to_f64(s.t);
        let gamma = s.u.map(|u| (T::one() - (-u).exp()).abs()).max_abs();
        if to_f64(gamma) > 0.5 {
            let mut r = ProbeReport::from_trend(name, sample, Vec::new(), Vec::new(), 1.0);
            r.pass = false;
            return Ok(r.with_note(format!("hypothesis |gamma| <= 1/2 violated at t = {t}; skipped")));
        }
        let (u1, u2) = stencil::gradient(&s.u)?;
        let area = to_f64(s.grid().cell_area());
        let (mut e, mut sup, mut f2) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..s.grid().len() {
            let (p, a, b) = (to_f64(s.p[k]), to_f64(u1[k]), to_f64(u2[k]));
            e += p * p + a * a + b * b;
            let w = (-to_f64(s.u[k])).exp();
            sup = sup.max(w * p.abs().max(a.abs()).max(b.abs()));
            f2 += p.powi(4);
        }
        times.push(t);
        lhs.push((e * area).sqrt());
        gdot.push(sup);
        fnorm.push((f2 * area).sqrt());
    }
    let mut g = vec![0.0; times.len()];
    for i in 1..times.len() {
        g[i] = g[i - 1] + (times[i] - times[i - 1]) * (gdot[i] + gdot[i - 1]);
    }
    let mut ratios = Vec::with_capacity(times.len());
    for n in 0..times.len() {
        let mut src = 0.0;
        for i in 1..=n {
            let a = (g[n] - g[i - 1]).exp() * fnorm[i - 1];
            let b = (g[n] - g[i]).exp() * fnorm[i];
            src += 0.5 * (times[i] - times[i - 1]) * (a + b);
        }
        let rhs = 2.0 * g[n].exp() * lhs[0] + 2.0 * src;
        ratios.push(if rhs > 0.0 { lhs[n] / rhs } else if lhs[n] == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let mut r = ProbeReport::from_trend(name, sample, times, ratios.clone(), 1.0);
    r.pass = ratios.iter().all(|q| *q <= 1.0);
    Ok(r)
}
