//! Initial data for the Cauchy problems: decay parameters, the two
//! built-in profile families, and closure-backed [`InitialData`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// `(A, k, eps)`: amplitude, decay exponent and data size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    #[serde(rename = "A", alias = "amplitude")]
    pub amplitude: f64,
    pub k: f64,
    #[serde(default = "one", alias = "eps")]
    pub epsilon: f64,
}

fn one() -> f64 {
    1.0
}

impl DecayParams {
    pub fn new(amplitude: f64, k: f64, epsilon: f64) -> Result<Self> {
        let p = Self { amplitude, k, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 1.0) || !self.k.is_finite() {
            return Err(Error::DecayExponentOutOfRange(self.k));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidConfig(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Radially symmetric profile families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFamily {
    /// `u0 = A (1+|x|^2)^{-k/2}`, `u1 = -A (1+|x|^2)^{-(k+1)/2}`.
    Rational,
    /// Gaussian profiles normalised so that `(A, k)` is their exact decay
    /// constant; effectively compactly supported.
    GaussianTail,
}

impl fmt::Display for DataFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataFamily::Rational => write!(f, "rational"),
            DataFamily::GaussianTail => write!(f, "gaussian_tail"),
        }
    }
}

/// `sup_r exp(-r^2) (1+r)^m`, attained at `r = (sqrt(1+2m) - 1)/2`.
pub fn gaussian_decay_constant(m: f64) -> f64 {
    let r = ((1.0 + 2.0 * m).sqrt() - 1.0) / 2.0;
    (-r * r).exp() * (1.0 + r).powf(m)
}

impl DataFamily {
    /// Unscaled position profile `u0(r)` and its radial derivative.
    pub fn u0<T: Real>(&self, params: &DecayParams, r2: T) -> (T, T) {
        let a: T = lit(params.amplitude);
        let k: T = lit(params.k);
        match self {
            DataFamily::Rational => {
                let base = T::one() + r2;
                let v = a * base.powf(-k * lit(0.5));
                // d/d(r^2) of v, so grad = 2 x * dv
                let dv = -k * lit::<T>(0.5) * v / base;
                (v, dv)
            }
            DataFamily::GaussianTail => {
                let c: T = lit(gaussian_decay_constant(params.k));
                let v = a * (-r2).exp() / c;
                (v, -v)
            }
        }
    }

    /// Unscaled velocity profile `u1(r)`.
    pub fn u1<T: Real>(&self, params: &DecayParams, r2: T) -> T {
        let a: T = lit(params.amplitude);
        let k: T = lit(params.k);
        match self {
            DataFamily::Rational => -a * (T::one() + r2).powf(-(k + T::one()) * lit(0.5)),
            DataFamily::GaussianTail => {
                let c: T = lit(gaussian_decay_constant(params.k + 1.0));
                -a * (-r2).exp() / c
            }
        }
    }

    /// The constant with which the unscaled profiles satisfy the decay
    /// hypothesis `|u0| <= A'(1+|x|)^{-k}`, `|u1| <= A'(1+|x|)^{-(k+1)}`.
    ///
    /// The rational family only satisfies it with `A' = 2^{(k+1)/2} A`
    /// because `(1+r)^2 <= 2(1+r^2)`.
    pub fn class_amplitude(&self, params: &DecayParams) -> f64 {
        match self {
            DataFamily::Rational => params.amplitude * 2f64.powf((params.k + 1.0) / 2.0),
            DataFamily::GaussianTail => params.amplitude,
        }
    }
}

pub type ScalarFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(T, T) -> [T; 2] + Send + Sync>;

/// Cauchy data `(phi0, phi1)` for the linear wave equation, given as
/// functions of position.
#[derive(Clone)]
pub struct InitialData<T> {
    phi0: ScalarFn<T>,
    phi1: ScalarFn<T>,
    grad_phi0: Option<VectorFn<T>>,
    decay: Option<DecayParams>,
}

impl<T> fmt::Debug for InitialData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialData")
            .field("analytic_gradient", &self.grad_phi0.is_some())
            .field("decay", &self.decay)
            .finish()
    }
}

impl<T: Real> InitialData<T> {
    /// Data without a declared decay class (e.g. constants).
    pub fn new<F0, F1>(phi0: F0, phi1: F1) -> Self
    where
        F0: Fn(T, T) -> T + Send + Sync + 'static,
        F1: Fn(T, T) -> T + Send + Sync + 'static,
    {
        Self { phi0: Arc::new(phi0), phi1: Arc::new(phi1), grad_phi0: None, decay: None }
    }

    pub fn constant(c0: T, c1: T) -> Self {
        Self::new(move |_, _| c0, move |_, _| c1).with_gradient(|_, _| [T::zero(); 2])
    }

    pub fn zero() -> Self {
        Self::constant(T::zero(), T::zero())
    }

    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(T, T) -> [T; 2] + Send + Sync + 'static,
    {
        self.grad_phi0 = Some(Arc::new(grad));
        self
    }

    /// Declares the decay class and verifies it on a deterministic polar
    /// sample out to radius `10^3`.
    pub fn with_decay_class(mut self, decay: DecayParams) -> Result<Self> {
        decay.validate()?;
        check_decay_class(&*self.phi0, &*self.phi1, &decay)?;
        self.decay = Some(decay);
        Ok(self)
    }

    /// `eps * (u0, u1)` of a built-in family, with analytic gradient and
    /// the family's decay class attached.
    pub fn from_family(family: DataFamily, params: DecayParams, scale: T) -> Result<Self> {
        params.validate()?;
        let p0 = params;
        let p1 = params;
        let pg = params;
        let data = Self::new(
            move |x, y| scale * family.u0(&p0, x * x + y * y).0,
            move |x, y| scale * family.u1(&p1, x * x + y * y),
        )
        .with_gradient(move |x, y| {
            let (_, dv) = family.u0(&pg, x * x + y * y);
            let two = lit::<T>(2.0) * scale * dv;
            [two * x, two * y]
        });
        let class = DecayParams {
            amplitude: family.class_amplitude(&params) * to_f64(scale.abs()).max(f64::MIN_POSITIVE),
            ..params
        };
        data.with_decay_class(class)
    }

    #[inline]
    pub fn phi0(&self, x1: T, x2: T) -> T {
        (self.phi0)(x1, x2)
    }

    #[inline]
    pub fn phi1(&self, x1: T, x2: T) -> T {
        (self.phi1)(x1, x2)
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad_phi0.is_some()
    }

    /// Gradient of `phi0`, analytic when supplied, otherwise by fourth-order
    /// central differences with step `eps_mach^{1/5}`.
    #[inline]
    pub fn grad_phi0(&self, x1: T, x2: T) -> [T; 2] {
        match &self.grad_phi0 {
            Some(g) => g(x1, x2),
            None => {
                let step = T::epsilon().powf(lit(0.2));
                let f = &self.phi0;
                [
                    crate::stencil::central_diff(|s| f(s, x2), x1, step),
                    crate::stencil::central_diff(|s| f(x1, s), x2, step),
                ]
            }
        }
    }

    pub fn decay(&self) -> Option<&DecayParams> {
        self.decay.as_ref()
    }
}

fn check_decay_class<T: Real>(
    phi0: &(dyn Fn(T, T) -> T + Send + Sync),
    phi1: &(dyn Fn(T, T) -> T + Send + Sync),
    decay: &DecayParams,
) -> Result<()> {
    let a = decay.amplitude;
    let k = decay.k;
    let slack = 1.0 + 1e-9;
    let mut radii = vec![0.0];
    radii.extend((0..240).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 239.0)));
    for &r in &radii {
        for j in 0..16 {
            let ang = std::f64::consts::TAU * j as f64 / 16.0;
            let (x, y) = (r * ang.cos(), r * ang.sin());
            let v0 = to_f64(phi0(lit(x), lit(y)));
            let v1 = to_f64(phi1(lit(x), lit(y)));
            let b0 = a * (1.0 + r).powf(-k) * slack;
            let b1 = a * (1.0 + r).powf(-(k + 1.0)) * slack;
            if !v0.is_finite() || !v1.is_finite() {
                return Err(Error::DataNotEvaluable(format!("non-finite data at |x| = {r}")));
            }
            if v0.abs() > b0 || v1.abs() > b1 {
                return Err(Error::DataOutsideClass(format!(
                    "at |x| = {r:.4}: |phi0| = {:.3e} (bound {b0:.3e}), |phi1| = {:.3e} (bound {b1:.3e})",
                    v0.abs(),
                    v1.abs()
                )));
            }
        }
    }
    Ok(())
}
