//! Exact and oracle solvers for the linear wave equation in two space
//! dimensions.
//!
//! * [`poisson_eval`] / [`poisson_field`]: the Poisson representation
//!   formula evaluated by quadrature over the backward light-cone disk.
//! * [`duhamel_eval`]: the inhomogeneous problem with zero data.
//! * [`spectral_solve_periodic`]: an independent Fourier oracle on a torus
//!   large enough that nothing wraps around before the requested time.
//! * [`h_integral`]: the angular kernel `H(t, |x|, r)` and its two bounds.

mod kernel_h;
mod poisson;
mod spectral;

pub use kernel_h::{
    bound_crossing, bound_interior, classify, fit_kovalyov_constants, h_integral, kovalyov_sample,
    KernelBranch, KernelSample, KovalyovFit,
};
pub use poisson::{duhamel_eval, poisson_eval, poisson_field, PoissonRule};
pub use spectral::{
    spectral_solve_periodic, SourceKind, SourceTerm, Spectrum, Torus, SUPPORT_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the inverse square-root weight at the rim of the disk is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RimSubstitution {
    /// `rho = sqrt(t^2 - s^2)`: the weight becomes `ds`.
    #[serde(rename = "sqrt_sub")]
    Sqrt,
    /// `rho = t sin(theta)` (the cosine of the complementary angle): the
    /// weight becomes `t sin(theta) d(theta)`.
    #[default]
    #[serde(rename = "cos_sub")]
    Cos,
}

/// Discretisation of the light-cone disk integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    #[serde(default)]
    pub rim_substitution: RimSubstitution,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { radial_nodes: 256, angular_nodes: 256, rim_substitution: RimSubstitution::Cos, rel_tol: 1e-6 }
    }
}

impl QuadratureSpec {
    pub fn new(radial_nodes: usize, angular_nodes: usize) -> Result<Self> {
        let q = Self { radial_nodes, angular_nodes, ..Self::default() };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < 8 || self.angular_nodes < 8 {
            return Err(Error::InvalidQuadrature(format!(
                "need at least 8 radial and 8 angular nodes, got {} x {}",
                self.radial_nodes, self.angular_nodes
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidQuadrature(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Periodic box `[-L, L)^2` used by the Fourier oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusOracleSpec {
    /// Half side length `L`.
    pub period_l: f64,
    pub modes_per_axis: usize,
    /// Longest time panel used for Duhamel integrals of time-dependent
    /// sources (8 Gauss points per panel).
    pub dt: f64,
}

impl TorusOracleSpec {
    pub fn new(period_l: f64, modes_per_axis: usize, dt: f64) -> Result<Self> {
        let s = Self { period_l, modes_per_axis, dt };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_l > 0.0) {
            return Err(Error::InvalidConfig(format!("torus half period must be positive, got {}", self.period_l)));
        }
        if self.modes_per_axis == 0 || self.modes_per_axis % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "modes per axis must be even and positive, got {}",
                self.modes_per_axis
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("oracle dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}
