//! The Klainerman generators on sampled space-time data.
//!
//! A space-time field is represented at a single instant `t` by its
//! [`Jet`]: the stack `f, f_t, f_tt, ...` of time derivatives sampled on a
//! grid. Spatial derivatives are taken with the fourth-order stencils of
//! [`crate::stencil`]; every generator containing `d_t` consumes one level
//! of the jet.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay_estimates::{sup_trend, ProbeReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, WaveState};
use crate::scalar::{idx, lit, to_f64, Real};
use crate::stencil::{self, Axis};

/// Default cap on `|I|`.
pub const DEFAULT_ORDER_CAP: usize = 2;

/// One of the seven generators for two space dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldOp {
    #[serde(rename = "dt")]
    Dt,
    #[serde(rename = "d1")]
    D1,
    #[serde(rename = "d2")]
    D2,
    L0,
    Omega12,
    Omega01,
    Omega02,
}

impl FieldOp {
    pub const ALL: [FieldOp; 7] =
        [FieldOp::Dt, FieldOp::D1, FieldOp::D2, FieldOp::L0, FieldOp::Omega12, FieldOp::Omega01, FieldOp::Omega02];

    /// Whether the generator contains `d_t`.
    pub fn uses_time_derivative(self) -> bool {
        !matches!(self, FieldOp::D1 | FieldOp::D2 | FieldOp::Omega12)
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldOp::Dt => "dt",
            FieldOp::D1 => "d1",
            FieldOp::D2 => "d2",
            FieldOp::L0 => "L0",
            FieldOp::Omega12 => "Omega12",
            FieldOp::Omega01 => "Omega01",
            FieldOp::Omega02 => "Omega02",
        }
    }
}

impl fmt::Display for FieldOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FieldOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldOp::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown generator '{s}'")))
    }
}

/// Ordered product of generators, applied left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MultiIndex {
    ops: Vec<FieldOp>,
}

impl MultiIndex {
    pub fn new(ops: Vec<FieldOp>, cap: usize) -> Result<Self> {
        if ops.len() > cap {
            return Err(Error::OrderCapExceeded { order: ops.len(), cap });
        }
        Ok(Self { ops })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ops(&self) -> &[FieldOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Every index of length `<= order`, shortest first.
    pub fn all_up_to(order: usize) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::empty()];
        let mut frontier = vec![MultiIndex::empty()];
        for _ in 0..order {
            let mut next = Vec::with_capacity(frontier.len() * 7);
            for base in &frontier {
                for op in FieldOp::ALL {
                    let mut ops = base.ops.clone();
                    ops.push(op);
                    next.push(MultiIndex { ops });
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

/// Time derivatives `f, f_t, f_tt, ...` of a field at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    t: T,
    levels: Vec<GridField<T>>,
}

impl<T: Real> Jet<T> {
    pub fn new(t: T, levels: Vec<GridField<T>>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::MissingTimeDerivative("a jet needs at least the field itself".into()));
        };
        for l in &levels[1..] {
            first.check_same_grid(l)?;
        }
        Ok(Self { t, levels })
    }

    /// Jet of an analytic field: `f(m, t, x1, x2)` must return `d_t^m f`.
    pub fn from_fn<F>(grid: Grid<T>, t: T, depth: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, T, T, T) -> T + Sync,
    {
        let levels = (0..depth).map(|m| GridField::from_fn(grid, |x, y| f(m, t, x, y))).collect();
        Self::new(t, levels)
    }

    /// Jet of a solution of `u_tt = Lap u + f`, higher levels rebuilt from
    /// the equation. `source(m)` supplies `d_t^m f` at the state's time;
    /// `None` means a homogeneous equation.
    pub fn linear(
        state: &WaveState<T>,
        depth: usize,
        source: Option<&dyn Fn(usize) -> Result<GridField<T>>>,
    ) -> Result<Self> {
        let mut levels = vec![state.u.clone(), state.p.clone()];
        while levels.len() < depth {
            let m = levels.len() - 2;
            let mut next = stencil::laplacian(&levels[m])?;
            if let Some(src) = source {
                next.axpy(T::one(), &src(m)?)?;
            }
            levels.push(next);
        }
        levels.truncate(depth.max(1));
        Self::new(state.t, levels)
    }

    /// Jet of a solution of `u_tt = e^{-u} Lap u - u_t^2`, up to `u_ttt`.
    pub fn nonlinear(state: &WaveState<T>, depth: usize) -> Result<Self> {
        if depth > 4 {
            return Err(Error::MissingTimeDerivative(format!(
                "nonlinear jets are rebuilt up to the third time derivative, {depth} levels requested"
            )));
        }
        let u = &state.u;
        let p = &state.p;
        let mut levels = vec![u.clone(), p.clone()];
        if depth > 2 {
            let lap_u = stencil::laplacian(u)?;
            let g = *u.grid();
            let n = g.len();
            let uv = u.values();
            let pv = p.values();
            let lu = lap_u.values();
            let a: Vec<T> = (0..n).into_par_iter().map(|k| (-uv[k]).exp() * lu[k] - pv[k] * pv[k]).collect();
            if depth > 3 {
                let lap_p = stencil::laplacian(p)?;
                let lp = lap_p.values();
                let two = lit::<T>(2.0);
                let b: Vec<T> = (0..n)
                    .into_par_iter()
                    .map(|k| {
                        let e = (-uv[k]).exp();
                        -pv[k] * e * lu[k] + e * lp[k] - two * pv[k] * a[k]
                    })
                    .collect();
                levels.push(GridField::from_values(g, a)?);
                levels.push(GridField::from_values(g, b)?);
            } else {
                levels.push(GridField::from_values(g, a)?);
            }
        }
        levels.truncate(depth.max(1));
        Self::new(state.t, levels)
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn grid(&self) -> &Grid<T> {
        self.levels[0].grid()
    }

    pub fn value(&self) -> &GridField<T> {
        &self.levels[0]
    }

    pub fn level(&self, m: usize) -> Result<&GridField<T>> {
        self.levels.get(m).ok_or_else(|| {
            Error::MissingTimeDerivative(format!("time derivative of order {m} requested from a jet of depth {}", self.depth()))
        })
    }

    /// Keeps only the first `depth` levels.
    pub fn truncated(mut self, depth: usize) -> Self {
        self.levels.truncate(depth.max(1));
        self
    }
}

/// `Z` applied to `jet`. The result has one level fewer when `Z` contains
/// `d_t`.
pub fn apply_op<T: Real>(op: FieldOp, jet: &Jet<T>) -> Result<Jet<T>> {
    let depth = jet.depth();
    let out_depth = if op.uses_time_derivative() { depth - 1 } else { depth };
    if out_depth == 0 {
        return Err(Error::MissingTimeDerivative(format!("{op} needs the time derivative of a depth-1 jet")));
    }
    let g = *jet.grid();
    let t = jet.t;
    let levels = (0..out_depth)
        .map(|j| -> Result<GridField<T>> {
            let f = &jet.levels[j];
            Ok(match op {
                FieldOp::Dt => jet.levels[j + 1].clone(),
                FieldOp::D1 => stencil::d1(f, Axis::X1)?,
                FieldOp::D2 => stencil::d1(f, Axis::X2)?,
                FieldOp::Omega12 => {
                    let (f1, f2) = stencil::gradient(f)?;
                    weighted(&g, |x, y, k| x * f2[k] - y * f1[k])
                }
                FieldOp::L0 => {
                    let (f1, f2) = stencil::gradient(f)?;
                    let ft = &jet.levels[j + 1];
                    let jj = idx::<T>(j);
                    weighted(&g, |x, y, k| jj * f[k] + t * ft[k] + x * f1[k] + y * f2[k])
                }
                FieldOp::Omega01 | FieldOp::Omega02 => {
                    let axis = if op == FieldOp::Omega01 { Axis::X1 } else { Axis::X2 };
                    let di = stencil::d1(f, axis)?;
                    let prev = if j > 0 { Some(stencil::d1(&jet.levels[j - 1], axis)?) } else { None };
                    let ft = &jet.levels[j + 1];
                    let jj = idx::<T>(j);
                    weighted(&g, |x, y, k| {
                        let xi = if axis == Axis::X1 { x } else { y };
                        let lower = prev.as_ref().map_or(T::zero(), |p| jj * p[k]);
                        lower + t * di[k] + xi * ft[k]
                    })
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Jet::new(t, levels)
}

fn weighted<T: Real, F: Fn(T, T, usize) -> T + Sync>(g: &Grid<T>, f: F) -> GridField<T> {
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = g.coords(k);
            f(x, y, k)
        })
        .collect();
    GridField::from_values(*g, values).expect("values sized to grid")
}

/// `Z^I` applied to `jet`, returned as a jet so that further derivatives
/// can be taken.
pub fn apply_multiindex_jet<T: Real>(index: &MultiIndex, jet: &Jet<T>, cap: usize) -> Result<Jet<T>> {
    if index.len() > cap {
        return Err(Error::OrderCapExceeded { order: index.len(), cap });
    }
    let mut cur = jet.clone();
    for &op in index.ops() {
        cur = apply_op(op, &cur)?;
    }
    Ok(cur)
}

/// `Z^I f` as a field.
pub fn apply_multiindex<T: Real>(index: &MultiIndex, jet: &Jet<T>, cap: usize) -> Result<GridField<T>> {
    Ok(apply_multiindex_jet(index, jet, cap)?.levels.swap_remove(0))
}

/// Space-time derivative magnitude `sqrt(f_t^2 + f_1^2 + f_2^2)`.
pub fn gradient_magnitude<T: Real>(jet: &Jet<T>) -> Result<GridField<T>> {
    let ft = jet.level(1)?;
    let (f1, f2) = stencil::gradient(jet.value())?;
    Ok(weighted(jet.grid(), |_, _, k| (ft[k] * ft[k] + f1[k] * f1[k] + f2[k] * f2[k]).sqrt()))
}

/// The weighted norms `M1, M2, N1, N2` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub t: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    pub l1: usize,
    pub l2: usize,
}

impl NormBundle {
    pub fn zero(t: f64, l1: usize, l2: usize) -> Self {
        Self { t, m1: 0.0, m2: 0.0, n1: 0.0, n2: 0.0, l1, l2 }
    }
}

/// Region mask on positions; `None` means the whole grid.
pub type Region<'a, T> = Option<&'a (dyn Fn(T, T) -> bool + Sync)>;

/// `M1 = sum ||d Z^I u||_2`, `M2 = sum ||Z^I u||_2` over `|I| <= l1` and
/// `N1`, `N2` the same with sup norms over `|I| <= l2`.
///
/// The jet must carry `max(l1, l2) + 2` levels. Indices sharing a prefix
/// share the work of applying it.
pub fn norm_bundle<T: Real>(jet: &Jet<T>, l1: usize, l2: usize, cap: usize, region: Region<'_, T>) -> Result<NormBundle> {
    let top = l1.max(l2);
    if top > cap {
        return Err(Error::OrderCapExceeded { order: top, cap });
    }
    let need = top + 2;
    if jet.depth() < need {
        return Err(Error::MissingTimeDerivative(format!(
            "norms up to order {top} need {need} time levels, the jet has {}",
            jet.depth()
        )));
    }
    let keep = |x: T, y: T| region.map_or(true, |r| r(x, y));
    let mut b = NormBundle::zero(to_f64(jet.t), l1, l2);
    let mut frontier = vec![jet.clone().truncated(need)];
    for order in 0..=top {
        for z in &frontier {
            let grad = gradient_magnitude(z)?;
            if order <= l1 {
                b.m1 += to_f64(grad.l2_norm_where(keep));
                b.m2 += to_f64(z.value().l2_norm_where(keep));
            }
            if order <= l2 {
                b.n1 += to_f64(grad.max_abs_where(keep));
                b.n2 += to_f64(z.value().max_abs_where(keep));
            }
        }
        if order < top {
            let mut next = Vec::with_capacity(frontier.len() * 7);
            for z in &frontier {
                for op in FieldOp::ALL {
                    next.push(apply_op(op, z)?);
                }
            }
            frontier = next;
        }
    }
    Ok(b)
}

/// `sum_{|I| <= order} ||Z^I f||_2` over the whole grid.
pub fn z_l2_sum<T: Real>(jet: &Jet<T>, order: usize, cap: usize) -> Result<T> {
    if order > cap {
        return Err(Error::OrderCapExceeded { order, cap });
    }
    let mut total = T::zero();
    let mut frontier = vec![jet.clone()];
    for o in 0..=order {
        for z in &frontier {
            total += z.value().l2_norm();
        }
        if o < order {
            frontier = frontier.iter().flat_map(|z| FieldOp::ALL.map(|op| apply_op(op, z))).collect::<Result<Vec<_>>>()?;
        }
    }
    Ok(total)
}

/// Sup over snapshots of
/// `|phi(t,x)| (1+t+|x|)^{1/2} (1+|t-|x||)^{1/2} / sum_{|I|<=N} ||Z^I phi(t)||_2`,
/// split by the horizons.
pub fn klainerman_inequality_probe<T: Real>(
    snapshots: &[Jet<T>],
    order: usize,
    horizons: &[f64],
    slack: f64,
) -> Result<ProbeReport> {
    if snapshots.is_empty() {
        return Err(Error::EmptySample("no snapshots".into()));
    }
    let samples = snapshots
        .iter()
        .map(|jet| -> Result<(f64, f64)> {
            let t = jet.t();
            let denom = z_l2_sum(jet, order, order.max(DEFAULT_ORDER_CAP))?;
            let g = jet.grid();
            let v = jet.value();
            let num = (0..g.len())
                .into_par_iter()
                .map(|k| {
                    let (x, y) = g.coords(k);
                    let r = x.hypot(y);
                    v[k].abs() * ((T::one() + t + r) * (T::one() + (t - r).abs())).sqrt()
                })
                .reduce(T::zero, T::max);
            let c = if denom > T::zero() { to_f64(num / denom) } else { 0.0 };
            Ok((to_f64(t), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let trend = sup_trend(&samples, horizons);
    Ok(ProbeReport::from_trend(
        "klainerman_sobolev",
        format!("{} snapshots, |I| <= {order}, all grid nodes", snapshots.len()),
        horizons.to_vec(),
        trend,
        slack,
    ))
}

/// Analytic space-time test function with all time derivatives known.
#[derive(Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    /// `d_t^m f(t, x1, x2)`.
    pub eval: fn(usize, f64, f64, f64) -> f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

/// Probabilists' Hermite-type factor: `d^m/dt^m exp(-t^2) = (-1)^m H_m(t) exp(-t^2)`.
fn gauss_time_derivative(m: usize, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * t);
    if m == 0 {
        return (-t * t).exp();
    }
    for n in 1..m {
        let h2 = 2.0 * t * h1 - 2.0 * n as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * h1 * (-t * t).exp()
}

fn gaussian_fn(m: usize, t: f64, x: f64, y: f64) -> f64 {
    gauss_time_derivative(m, t) * (-(x * x + y * y)).exp()
}

fn cone_poly(m: usize, t: f64, x: f64, y: f64) -> f64 {
    match m {
        0 => t * t - x * x - y * y,
        1 => 2.0 * t,
        2 => 2.0,
        _ => 0.0,
    }
}

fn trig_mode(m: usize, t: f64, x: f64, y: f64) -> f64 {
    // sin(x) cos(2y) cos(1.5 t)
    let w: f64 = 1.5;
    let phase = t * w + m as f64 * std::f64::consts::FRAC_PI_2;
    x.sin() * (2.0 * y).cos() * w.powi(m as i32) * phase.cos()
}

/// Built-in corpus for the commutator suite.
pub fn test_corpus() -> Vec<TestFunction> {
    vec![
        TestFunction { name: "gaussian", eval: gaussian_fn },
        TestFunction { name: "cone_poly", eval: cone_poly },
        TestFunction { name: "trig_mode", eval: trig_mode },
    ]
}

/// Nodes this far from the edge are excluded from commutator residuals.
pub const RESIDUAL_MARGIN: usize = 6;

/// `max |Box(Z f) - Z(Box f) - expected|` over the interior of `grid`,
/// with `expected = 2 Box f` for `L0` and `0` otherwise.
pub fn commutator_residual<T: Real>(op: FieldOp, test: &TestFunction, grid: &Grid<T>, t: T) -> Result<T> {
    let jet = Jet::from_fn(*grid, t, 4, |m, t, x, y| lit::<T>((test.eval)(m, to_f64(t), to_f64(x), to_f64(y))))?;
    let box_of = |j: &Jet<T>, m: usize| -> Result<GridField<T>> {
        let mut out = j.level(m + 2)?.clone();
        out.axpy(-T::one(), &stencil::laplacian(j.level(m)?)?)?;
        Ok(out)
    };
    let zf = apply_op(op, &jet)?;
    let box_zf = box_of(&zf, 0)?;
    let box_jet = Jet::new(t, vec![box_of(&jet, 0)?, box_of(&jet, 1)?])?;
    let z_box = apply_op(op, &box_jet)?;
    let expected_factor = if op == FieldOp::L0 { lit::<T>(2.0) } else { T::zero() };
    let mut r = box_zf;
    r.axpy(-T::one(), z_box.value())?;
    r.axpy(-expected_factor, box_jet.value())?;
    let lo_x = grid.origin.0 + grid.h * idx::<T>(RESIDUAL_MARGIN);
    let hi_x = grid.origin.0 + grid.h * idx::<T>(grid.nx.saturating_sub(RESIDUAL_MARGIN + 1));
    let lo_y = grid.origin.1 + grid.h * idx::<T>(RESIDUAL_MARGIN);
    let hi_y = grid.origin.1 + grid.h * idx::<T>(grid.ny.saturating_sub(RESIDUAL_MARGIN + 1));
    let slop = grid.h * lit(1e-6);
    Ok(r.max_abs_where(|x, y| x >= lo_x - slop && x <= hi_x + slop && y >= lo_y - slop && y <= hi_y + slop))
}

/// One row of the commutator suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorRecord {
    pub op: FieldOp,
    pub test_fn: String,
    pub h: f64,
    pub residual: f64,
    /// `log2` of the residual ratio against the next coarser grid; absent
    /// on the coarsest grid.
    pub order_estimate: Option<f64>,
}

/// Residual floor below which a commutator identity is considered exact
/// (the stencils reproduce the test function up to rounding).
pub const EXACT_FLOOR: f64 = 1e-8;

/// Residuals of all seven generators on every corpus function, on the
/// square `[-half_width, half_width]^2` with spacing `h0, h0/2, ...`.
pub fn commutator_suite(half_width: f64, h0: f64, levels: usize, t: f64) -> Result<Vec<CommutatorRecord>> {
    let mut out = Vec::new();
    for test in test_corpus() {
        for op in FieldOp::ALL {
            let mut prev: Option<f64> = None;
            for l in 0..levels {
                let h = h0 / f64::powi(2.0, l as i32);
                let n = (2.0 * half_width / h).round() as usize + 1;
                let grid = Grid::<f64>::square(half_width, n)?;
                let residual = commutator_residual(op, &test, &grid, t)?;
                let order_estimate = prev.map(|p| (p / residual).log2());
                out.push(CommutatorRecord { op, test_fn: test.name.to_string(), h, residual, order_estimate });
                prev = Some(residual);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid<f64> {
        Grid::square(4.0, n).unwrap()
    }

    #[test]
    fn seven_generators() {
        assert_eq!(FieldOp::ALL.len(), 7);
        let translations = FieldOp::ALL.iter().filter(|o| matches!(o, FieldOp::Dt | FieldOp::D1 | FieldOp::D2)).count();
        assert_eq!(translations, 3);
        for op in FieldOp::ALL {
            assert_eq!(op.name().parse::<FieldOp>().unwrap(), op);
        }
    }

    #[test]
    fn multiindex_enumeration_and_cap() {
        assert_eq!(MultiIndex::all_up_to(0).len(), 1);
        assert_eq!(MultiIndex::all_up_to(2).len(), 1 + 7 + 49);
        assert!(matches!(
            MultiIndex::new(vec![FieldOp::Dt; 3], 2),
            Err(Error::OrderCapExceeded { order: 3, cap: 2 })
        ));
    }

    #[test]
    fn rotation_kills_radial_fields() {
        let j = Jet::from_fn(grid(81), 0.0, 1, |_, _, x, y| (-(x * x + y * y)).exp()).unwrap();
        let r = apply_op(FieldOp::Omega12, &j).unwrap();
        assert!(r.value().max_abs() < 1e-4);
    }

    #[test]
    fn scaling_of_t_is_t() {
        let t = 1.7;
        let j = Jet::from_fn(grid(41), t, 2, |m, t, _, _| if m == 0 { t } else if m == 1 { 1.0 } else { 0.0 }).unwrap();
        let r = apply_op(FieldOp::L0, &j).unwrap();
        assert!(r.value().values().iter().all(|v| (v - t).abs() < 1e-12));
    }

    #[test]
    fn missing_level_is_reported() {
        let j = Jet::from_fn(grid(41), 0.0, 1, |_, _, x, _| x).unwrap();
        for op in [FieldOp::Dt, FieldOp::L0, FieldOp::Omega01, FieldOp::Omega02] {
            assert!(matches!(apply_op(op, &j), Err(Error::MissingTimeDerivative(_))));
        }
        assert!(apply_op(FieldOp::D1, &j).is_ok());
    }

    #[test]
    fn partials_commute_and_l0_commutes_with_rotation() {
        let f = |m: usize, t: f64, x: f64, y: f64| gaussian_fn(m, t, x - 0.3, y + 0.2);
        let j = Jet::from_fn(grid(161), 0.4, 3, f).unwrap();
        let cap = 2;
        let a = apply_multiindex(&MultiIndex::new(vec![FieldOp::D1, FieldOp::D2], cap).unwrap(), &j, cap).unwrap();
        let b = apply_multiindex(&MultiIndex::new(vec![FieldOp::D2, FieldOp::D1], cap).unwrap(), &j, cap).unwrap();
        assert!(a.zip_with(&b, |p, q| p - q).unwrap().max_abs() < 1e-12);
        let c = apply_multiindex(&MultiIndex::new(vec![FieldOp::Omega12, FieldOp::L0], cap).unwrap(), &j, cap).unwrap();
        let d = apply_multiindex(&MultiIndex::new(vec![FieldOp::L0, FieldOp::Omega12], cap).unwrap(), &j, cap).unwrap();
        let diff = c.zip_with(&d, |p, q| p - q).unwrap().max_abs_where(|x, y| x.abs() < 3.5 && y.abs() < 3.5);
        assert!(diff < 1e-3, "{diff}");
        let e = apply_multiindex(&MultiIndex::empty(), &j, cap).unwrap();
        assert_eq!(&e, j.value());
    }

    #[test]
    fn generators_are_linear() {
        let g = grid(41);
        let f = |m: usize, t: f64, x: f64, y: f64| trig_mode(m, t, x, y);
        let h = |m: usize, t: f64, x: f64, y: f64| gaussian_fn(m, t, x, y);
        let (a, b) = (2.0, -0.5);
        let jf = Jet::from_fn(g, 0.3, 2, f).unwrap();
        let jh = Jet::from_fn(g, 0.3, 2, h).unwrap();
        let jc = Jet::from_fn(g, 0.3, 2, |m, t, x, y| a * f(m, t, x, y) + b * h(m, t, x, y)).unwrap();
        for op in FieldOp::ALL {
            let lhs = apply_op(op, &jc).unwrap();
            let mut rhs = apply_op(op, &jf).unwrap().value().scaled(a);
            rhs.axpy(b, apply_op(op, &jh).unwrap().value()).unwrap();
            assert!(lhs.value().zip_with(&rhs, |p, q| p - q).unwrap().max_abs() < 1e-12, "{op}");
        }
    }

    #[test]
    fn hermite_derivatives_match_finite_differences() {
        for m in 0..4 {
            let fd = crate::stencil::central_diff(|t| gauss_time_derivative(m, t), 0.37, 1e-3);
            assert!((fd - gauss_time_derivative(m + 1, 0.37)).abs() < 1e-9, "m = {m}");
        }
    }

    #[test]
    fn d_one_stencil_is_exact_on_polynomial() {
        let g = grid(41);
        for test in [TestFunction { name: "cone_poly", eval: cone_poly }] {
            let r = commutator_residual(FieldOp::D1, &test, &g, 0.5).unwrap();
            assert!(r < 1e-10, "{r}");
            let r = commutator_residual(FieldOp::L0, &test, &g, 0.5).unwrap();
            assert!(r < 1e-8, "{r}");
        }
    }

    #[test]
    fn zero_state_bundle() {
        let g = grid(41);
        let s = WaveState::new(0.0, GridField::zeros(g), GridField::zeros(g)).unwrap();
        let j = Jet::linear(&s, 4, None).unwrap();
        let b = norm_bundle(&j, 2, 1, 2, None).unwrap();
        assert_eq!((b.m1, b.m2, b.n1, b.n2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = Grid::<f64>::square(8.0, 321).unwrap();
        let u = GridField::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        let s = WaveState::new(0.0, u, GridField::zeros(g)).unwrap();
        let j = Jet::linear(&s, 2, None).unwrap();
        let b = norm_bundle(&j, 0, 0, 2, None).unwrap();
        assert!((b.m2 - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-4);
        assert!((b.n2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bundle_is_monotone_in_order() {
        let g = Grid::<f64>::square(5.0, 81).unwrap();
        let u = GridField::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        let p = GridField::from_fn(g, |x, y| 0.5 * x * (-(x * x + y * y)).exp());
        let s = WaveState::new(0.5, u, p).unwrap();
        let j = Jet::linear(&s, 4, None).unwrap();
        let lo = norm_bundle(&j, 1, 0, 2, None).unwrap();
        let hi = norm_bundle(&j, 2, 1, 2, None).unwrap();
        assert!(hi.m1 >= lo.m1 && hi.m2 >= lo.m2 && hi.n1 >= lo.n1 && hi.n2 >= lo.n2);
        assert!(matches!(norm_bundle(&j, 3, 1, 2, None), Err(Error::OrderCapExceeded { .. })));
    }

    #[test]
    fn nonlinear_jet_matches_equation() {
        // u = c constant: every time derivative vanishes
        let g = grid(41);
        let s = WaveState::new(0.0, GridField::constant(g, 0.3), GridField::zeros(g)).unwrap();
        let j = Jet::nonlinear(&s, 4).unwrap();
        assert_eq!(j.depth(), 4);
        for m in 1..4 {
            assert!(j.level(m).unwrap().max_abs() < 1e-12);
        }
        assert!(Jet::nonlinear(&s, 5).is_err());
    }
}
