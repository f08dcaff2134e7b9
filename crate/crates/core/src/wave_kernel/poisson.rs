use rayon::prelude::*;

use super::{QuadratureSpec, RimSubstitution};
use crate::data::InitialData;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::quadrature::GaussLegendre;
use crate::scalar::{idx, lit, to_f64, Real};

/// Precomputed nodes for the light-cone disk integral.
///
/// In polar coordinates `y = x + rho (cos a, sin a)` the representation
/// formula becomes
///
/// ```text
/// phi(t,x) = (1/2pi) int_0^{2pi} int_0^1 [phi0(y) + t phi1(y) + rho grad phi0(y).e_a] dmu da
/// ```
///
/// where `dmu` is the rim-regularised radial measure (unit mass) and
/// `rho = t sigma`. Both substitutions give a bounded, smooth integrand.
#[derive(Debug, Clone)]
pub struct PoissonRule<T> {
    spec: QuadratureSpec,
    sigma: Vec<T>,
    weight: Vec<T>,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Real> PoissonRule<T> {
    pub fn new(spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let gl = GaussLegendre::<T>::new(spec.radial_nodes);
        let (sigma, weight) = match spec.rim_substitution {
            RimSubstitution::Cos => {
                let (theta, w) = gl.on_interval(T::zero(), T::FRAC_PI_2());
                let s: Vec<T> = theta.iter().map(|th| th.sin()).collect();
                let w = w.iter().zip(&s).map(|(w, s)| *w * *s).collect();
                (s, w)
            }
            RimSubstitution::Sqrt => {
                let (tau, w) = gl.on_interval(T::zero(), T::one());
                let s = tau.iter().map(|u| (T::one() - *u * *u).max(T::zero()).sqrt()).collect();
                (s, w)
            }
        };
        let m = spec.angular_nodes;
        let (cos, sin) = (0..m)
            .map(|j| {
                let a = T::TAU() * idx::<T>(j) / idx::<T>(m);
                (a.cos(), a.sin())
            })
            .unzip();
        Ok(Self { spec: *spec, sigma, weight, cos, sin })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Disk average `(1/2pi) int int kernel(y, rho, e_a) dmu da` around `x`.
    fn disk_average<F>(&self, t: T, x: (T, T), kernel: F) -> Result<T>
    where
        F: Fn(T, T, T, T, T) -> T,
    {
        let m = idx::<T>(self.cos.len());
        let mut total = T::zero();
        for (&s, &w) in self.sigma.iter().zip(&self.weight) {
            let rho = t * s;
            let mut ring = T::zero();
            for (&c, &sn) in self.cos.iter().zip(&self.sin) {
                ring += kernel(x.0 + rho * c, x.1 + rho * sn, rho, c, sn);
            }
            if !ring.is_finite() {
                return Err(Error::DataNotEvaluable(format!(
                    "non-finite integrand on the ring of radius {} around ({}, {})",
                    to_f64(rho),
                    to_f64(x.0),
                    to_f64(x.1)
                )));
            }
            total += w * ring / m;
        }
        Ok(total)
    }

    /// `phi(t, x)` for the homogeneous problem with data `data`.
    pub fn eval(&self, t: T, x: (T, T), data: &InitialData<T>) -> Result<T> {
        check_time(t)?;
        self.disk_average(t, x, |y1, y2, rho, c, s| {
            let g = data.grad_phi0(y1, y2);
            data.phi0(y1, y2) + t * data.phi1(y1, y2) + rho * (g[0] * c + g[1] * s)
        })
    }

    /// Zero-position propagator `W(t)[g]`: data `(0, g)`.
    pub fn eval_velocity<G: Fn(T, T) -> T>(&self, t: T, x: (T, T), g: G) -> Result<T> {
        check_time(t)?;
        self.disk_average(t, x, |y1, y2, _, _, _| t * g(y1, y2))
    }

    pub fn field(&self, t: T, grid: &Grid<T>, data: &InitialData<T>) -> Result<GridField<T>> {
        check_time(t)?;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| self.eval(t, grid.coords(k), data))
            .collect::<Result<Vec<T>>>()?;
        GridField::from_values(*grid, values)
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTime(format!("t must be positive and finite, got {t}")))
    }
}

/// Value of the solution with data `data` at `(t, x)`.
pub fn poisson_eval<T: Real>(t: T, x: (T, T), data: &InitialData<T>, quad: &QuadratureSpec) -> Result<T> {
    check_time(t)?;
    PoissonRule::new(quad)?.eval(t, x, data)
}

/// [`poisson_eval`] at every node of `grid`, in parallel.
pub fn poisson_field<T: Real>(
    t: T,
    grid: &Grid<T>,
    data: &InitialData<T>,
    quad: &QuadratureSpec,
) -> Result<GridField<T>> {
    check_time(t)?;
    PoissonRule::new(quad)?.field(t, grid, data)
}

/// `int_0^t W(t - tau)[g(tau, .)](x) d tau` for zero initial data, with the
/// time integral done by the trapezoid rule on `time_grid` restricted to
/// `[0, t]` (the endpoints `0` and `t` are always included).
pub fn duhamel_eval<T, G>(t: T, x: (T, T), source: G, time_grid: &[T], quad: &QuadratureSpec) -> Result<T>
where
    T: Real,
    G: Fn(T, T, T) -> T + Sync,
{
    check_time(t)?;
    let slack = lit::<T>(1e-12) * t.max(T::one());
    let lo = time_grid.iter().cloned().fold(T::infinity(), T::min);
    let hi = time_grid.iter().cloned().fold(T::neg_infinity(), T::max);
    if time_grid.is_empty() || lo > slack || hi < t - slack {
        return Err(Error::TimeGridNotCovering(to_f64(t)));
    }
    let mut nodes = vec![T::zero()];
    let mut inner: Vec<T> = time_grid.iter().cloned().filter(|&s| s > slack && s < t - slack).collect();
    inner.sort_by(|a, b| a.partial_cmp(b).expect("finite time grid"));
    nodes.extend(inner);
    nodes.push(t);

    let rule = PoissonRule::new(quad)?;
    let values = nodes
        .par_iter()
        .map(|&tau| {
            let s = t - tau;
            if s <= T::zero() {
                Ok(T::zero())
            } else {
                rule.eval_velocity(s, x, |y1, y2| source(tau, y1, y2))
            }
        })
        .collect::<Result<Vec<T>>>()?;
    let half = lit::<T>(0.5);
    let mut acc = T::zero();
    for w in 0..nodes.len() - 1 {
        acc += half * (nodes[w + 1] - nodes[w]) * (values[w] + values[w + 1]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_quad() -> QuadratureSpec {
        QuadratureSpec::new(64, 64).unwrap()
    }

    #[test]
    fn constant_position_is_reproduced() {
        let data = InitialData::<f64>::constant(1.0, 0.0);
        for &(t, x) in &[(0.3, (0.0, 0.0)), (2.0, (1.0, -3.0)), (17.0, (5.0, 5.0))] {
            let v = poisson_eval(t, x, &data, &small_quad()).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "t = {t}: {v}");
        }
    }

    #[test]
    fn constant_velocity_grows_linearly() {
        let data = InitialData::<f64>::constant(0.0, 2.5);
        for &t in &[0.1, 1.0, 7.5] {
            let v = poisson_eval(t, (0.4, 0.2), &data, &small_quad()).unwrap();
            assert!((v - 2.5 * t).abs() < 1e-12 * t.max(1.0));
        }
    }

    #[test]
    fn sqrt_substitution_agrees_with_cos() {
        let data = InitialData::<f64>::new(|x, y| (-(x * x + y * y)).exp(), |x, _| (-x * x).exp() * 0.1);
        let mut q = QuadratureSpec::new(96, 96).unwrap();
        let a = poisson_eval(1.3, (0.5, 0.2), &data, &q).unwrap();
        q.rim_substitution = RimSubstitution::Sqrt;
        let b = poisson_eval(1.3, (0.5, 0.2), &data, &q).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn finite_propagation_outside_support() {
        // compact bump of radius 1
        let bump = |x: f64, y: f64| {
            let r2 = x * x + y * y;
            if r2 < 1.0 { (1.0 - r2).powi(4) } else { 0.0 }
        };
        let data = InitialData::<f64>::new(bump, bump);
        let v = poisson_eval(2.0, (3.01, 0.0), &data, &small_quad()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        let data = InitialData::<f64>::zero();
        assert!(matches!(poisson_eval(0.0, (0.0, 0.0), &data, &small_quad()), Err(Error::InvalidTime(_))));
        assert!(matches!(poisson_eval(-1.0, (0.0, 0.0), &data, &small_quad()), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn non_finite_data_is_reported() {
        let data = InitialData::<f64>::new(|x, y| if x * x + y * y > 0.25 { f64::NAN } else { 0.0 }, |_, _| 0.0)
            .with_gradient(|_, _| [0.0, 0.0]);
        let q = QuadratureSpec::new(16, 16).unwrap();
        let r = poisson_eval(1.0, (0.0, 0.0), &data, &q);
        assert!(matches!(r, Err(Error::DataNotEvaluable(_))), "{r:?}");
    }

    #[test]
    fn duhamel_constant_source() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.15).collect();
        let v = duhamel_eval(1.5, (0.2, 0.1), |_, _, _| 1.0, &grid, &small_quad()).unwrap();
        assert!((v - 1.5 * 1.5 / 2.0).abs() < 1e-12);
        let z = duhamel_eval(1.5, (0.2, 0.1), |_, _, _| 0.0, &grid, &small_quad()).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn duhamel_needs_covering_grid() {
        let grid = [0.0, 0.5];
        assert!(matches!(
            duhamel_eval(1.0, (0.0, 0.0), |_, _, _| 1.0, &grid, &small_quad()),
            Err(Error::TimeGridNotCovering(_))
        ));
    }

    #[test]
    fn invalid_quadrature_is_rejected() {
        assert!(QuadratureSpec::new(4, 64).is_err());
        let mut q = QuadratureSpec::default();
        q.rel_tol = 0.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn single_precision_constant() {
        let data = InitialData::<f32>::constant(1.0, 0.0);
        let q = QuadratureSpec::new(32, 32).unwrap();
        let v = poisson_eval(1.0f32, (0.0, 0.0), &data, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-5);
    }
}
