//! Conformally flat surface metrics `g = v (dx1^2 + dx2^2)` and their
//! curvature.
//!
//! Near the domain edge the Laplacian falls back to one-sided stencils;
//! curvature values inside a solver's sponge annulus are not meaningful.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::scalar::{lit, to_f64, Real};
use crate::stencil;

/// A positive conformal factor on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric<T> {
    v: GridField<T>,
}

impl<T: Real> ConformalMetric<T> {
    pub fn new(v: GridField<T>) -> Result<Self> {
        if let Some(k) = v.values().iter().position(|x| !(*x > T::zero()) || !x.is_finite()) {
            let (x, y) = v.grid().coords(k);
            return Err(Error::DegenerateMetric(format!(
                "v = {} at ({}, {})",
                v[k],
                to_f64(x),
                to_f64(y)
            )));
        }
        Ok(Self { v })
    }

    pub fn v(&self) -> &GridField<T> {
        &self.v
    }

    pub fn grid(&self) -> &Grid<T> {
        self.v.grid()
    }

    pub fn log_v(&self) -> GridField<T> {
        self.v.map(|x| x.ln())
    }
}

/// `v = e^u`.
pub fn conformal_factor<T: Real>(u: &GridField<T>) -> ConformalMetric<T> {
    ConformalMetric { v: u.map(|x| x.exp()) }
}

/// `R = -Lap(ln v) / v`.
pub fn scalar_curvature<T: Real>(m: &ConformalMetric<T>) -> Result<GridField<T>> {
    let lap = stencil::laplacian(&m.log_v())?;
    lap.zip_with(&m.v, |l, v| -l / v)
}

/// `R = -e^{-u} Lap u`, the same quantity without the round trip through `v`.
pub fn scalar_curvature_from_log<T: Real>(u: &GridField<T>) -> Result<GridField<T>> {
    let lap = stencil::laplacian(u)?;
    lap.zip_with(u, |l, u| -(-u).exp() * l)
}

/// `(R11, R12)` of `R_ij = R g_ij / 2`; `R22 = R11`.
pub fn ricci<T: Real>(m: &ConformalMetric<T>) -> Result<(GridField<T>, GridField<T>)> {
    let r = scalar_curvature(m)?;
    let half = lit::<T>(0.5);
    let r11 = r.zip_with(&m.v, |r, v| half * r * v)?;
    Ok((r11, GridField::zeros(*m.grid())))
}

/// `v_tt - Lap ln v` at the middle snapshot of an equally spaced sequence.
///
/// Five or more snapshots use the fourth-order second difference, three or
/// four the three-point one.
pub fn flow_residual<T: Real>(snapshots: &[ConformalMetric<T>], dt: T) -> Result<GridField<T>> {
    let n = snapshots.len();
    if n < 3 {
        return Err(Error::EmptySample(format!("flow residual needs 3 snapshots, got {n}")));
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidTime(format!("snapshot spacing must be positive, got {dt}")));
    }
    for s in &snapshots[1..] {
        snapshots[0].v.check_same_grid(&s.v)?;
    }
    let mid = n / 2;
    let (stencil_w, offs): (Vec<T>, Vec<isize>) = if n >= 5 {
        let c = lit::<T>(12.0) * dt * dt;
        ([-1.0, 16.0, -30.0, 16.0, -1.0].iter().map(|w| lit::<T>(*w) / c).collect(), vec![-2, -1, 0, 1, 2])
    } else {
        let c = dt * dt;
        ([1.0, -2.0, 1.0].iter().map(|w| lit::<T>(*w) / c).collect(), vec![-1, 0, 1])
    };
    let g = *snapshots[mid].grid();
    let fields: Vec<&[T]> = offs.iter().map(|o| snapshots[(mid as isize + o) as usize].v.values()).collect();
    let lap = stencil::laplacian(&snapshots[mid].log_v())?;
    let lv = lap.values();
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| stencil_w.iter().zip(&fields).fold(T::zero(), |a, (w, f)| a + *w * f[k]) - lv[k])
        .collect();
    GridField::from_values(g, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(h: f64) -> ConformalMetric<f64> {
        let n = (2.0 / h).round() as usize + 1;
        let g = Grid::square(1.0, n).unwrap();
        ConformalMetric::new(GridField::from_fn(g, |x: f64, y: f64| 4.0 / (1.0 + x * x + y * y).powi(2))).unwrap()
    }

    #[test]
    fn flat_metrics_have_no_curvature() {
        let g = Grid::<f64>::square(1.0, 21).unwrap();
        for c in [1.0, 3.5] {
            let m = ConformalMetric::new(GridField::constant(g, c)).unwrap();
            assert!(scalar_curvature(&m).unwrap().max_abs() < 1e-10);
            let (r11, r12) = ricci(&m).unwrap();
            assert!(r11.max_abs() < 1e-10);
            assert_eq!(r12.max_abs(), 0.0);
        }
    }

    #[test]
    fn conformal_factor_round_trip() {
        let g = Grid::<f64>::square(1.0, 21).unwrap();
        let u = GridField::from_fn(g, |x, y| 0.3 * x - y * y);
        let m = conformal_factor(&u);
        let back = m.log_v();
        assert!(back.zip_with(&u, |a, b| a - b).unwrap().max_abs() < 1e-15);
        let two = conformal_factor(&GridField::constant(g, 2f64.ln()));
        assert!(two.v().values().iter().all(|v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn round_sphere_has_curvature_two() {
        let m = sphere(0.02);
        let r = scalar_curvature(&m).unwrap();
        let err = r.map(|x| x - 2.0).max_abs_where(|x, y| x.abs() <= 0.8 && y.abs() <= 0.8);
        assert!(err < 1e-4, "{err}");
        let (r11, _) = ricci(&m).unwrap();
        let err11 = r11.zip_with(m.v(), |a, b| a - b).unwrap().max_abs_where(|x, y| x.abs() <= 0.8 && y.abs() <= 0.8);
        assert!(err11 < 1e-4 * 4.0);
    }

    #[test]
    fn trace_identity_and_scaling() {
        let m = sphere(0.05);
        let r = scalar_curvature(&m).unwrap();
        let (r11, _) = ricci(&m).unwrap();
        for k in 0..r.grid().len() {
            assert!((2.0 * r11[k] / m.v()[k] - r[k]).abs() <= 1e-12 * r[k].abs().max(1.0));
        }
        let scaled = ConformalMetric::new(m.v().scaled(3.0)).unwrap();
        let rs = scalar_curvature(&scaled).unwrap();
        for k in 0..r.grid().len() {
            assert!((rs[k] - r[k] / 3.0).abs() < 1e-9 * r[k].abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let g = Grid::<f64>::square(1.0, 11).unwrap();
        let v = GridField::from_fn(g, |x, _| x);
        assert!(matches!(ConformalMetric::new(v), Err(Error::DegenerateMetric(_))));
    }

    #[test]
    fn static_flat_sequence_has_no_residual() {
        let g = Grid::<f64>::square(1.0, 11).unwrap();
        let m = ConformalMetric::new(GridField::constant(g, 1.0)).unwrap();
        let r = flow_residual(&vec![m; 3], 0.1).unwrap();
        assert_eq!(r.max_abs(), 0.0);
        assert!(flow_residual(&[], 0.1).is_err());
    }

    #[test]
    fn synthetic_exponential_flow() {
        // v = exp(t w): v_tt - Lap ln v = w^2 e^{tw} - t Lap w
        let g = Grid::<f64>::square(1.0, 81).unwrap();
        let w = |x: f64, y: f64| (x + 0.5 * y).sin() + 0.2 * x * y;
        let lap_w = |x: f64, y: f64| -1.25 * (x + 0.5 * y).sin();
        let dt = 0.01;
        let t0 = 0.5;
        let snaps: Vec<_> = (-2..=2)
            .map(|i| {
                let t = t0 + i as f64 * dt;
                ConformalMetric::new(GridField::from_fn(g, |x, y| (t * w(x, y)).exp())).unwrap()
            })
            .collect();
        let r = flow_residual(&snaps, dt).unwrap();
        let exact = GridField::from_fn(g, |x, y| w(x, y).powi(2) * (t0 * w(x, y)).exp() - t0 * lap_w(x, y));
        let err = r.zip_with(&exact, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-6, "{err}");
    }
}
