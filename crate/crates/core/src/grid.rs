//! Uniform node grids and the scalar fields sampled on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{idx, lit, Real};

/// Node layout of a uniform Cartesian grid with equal spacing on both axes.
///
/// Node `(i, j)` sits at `(x1, x2) = (origin.0 + i*h, origin.1 + j*h)` and
/// is stored at flat index `j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub nx: usize,
    pub ny: usize,
    pub h: T,
    pub origin: (T, T),
}

impl<T: Real> Grid<T> {
    pub fn new(nx: usize, ny: usize, h: T, origin: (T, T)) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidConfig("grid needs at least one node per axis".into()));
        }
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidConfig(format!("grid spacing must be positive, got {h}")));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// `n x n` nodes covering `[-half_width, half_width]^2`, endpoints included.
    pub fn square(half_width: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig("square grid needs n >= 2".into()));
        }
        let h = (half_width + half_width) / idx::<T>(n - 1);
        Self::new(n, n, h, (-half_width, -half_width))
    }

    /// `n x n` nodes of the periodic torus `[-half_period, half_period)^2`.
    pub fn periodic(half_period: T, n: usize) -> Result<Self> {
        let h = (half_period + half_period) / idx::<T>(n.max(1));
        Self::new(n, n, h, (-half_period, -half_period))
    }

    /// A single row of `n` nodes along the positive `x1` axis starting at 0.
    pub fn ray(length: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig("ray grid needs n >= 2".into()));
        }
        let h = length / idx::<T>(n - 1);
        Self::new(n, 1, h, (T::zero(), T::zero()))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x1(&self, i: usize) -> T {
        self.origin.0 + idx::<T>(i) * self.h
    }

    #[inline]
    pub fn x2(&self, j: usize) -> T {
        self.origin.1 + idx::<T>(j) * self.h
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (T, T) {
        (self.x1(k % self.nx), self.x2(k / self.nx))
    }

    pub fn cell_area(&self) -> T {
        self.h * self.h
    }

    /// Same node layout, compared with a relative tolerance on the spacing.
    pub fn matches(&self, other: &Self) -> bool {
        let tol = lit::<T>(1e-12) * self.h.abs().max(T::one());
        self.nx == other.nx
            && self.ny == other.ny
            && (self.h - other.h).abs() <= tol
            && (self.origin.0 - other.origin.0).abs() <= tol
            && (self.origin.1 - other.origin.1).abs() <= tol
    }

    /// Largest `max(|x1|, |x2|)` over the grid nodes.
    pub fn max_coordinate(&self) -> T {
        let a = self.x1(0).abs().max(self.x1(self.nx - 1).abs());
        let b = self.x2(0).abs().max(self.x2(self.ny - 1).abs());
        a.max(b)
    }
}

/// Scalar samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self { values: vec![T::zero(); grid.len()], grid }
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        Self { values: vec![c; grid.len()], grid }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x1, x2)` at every node, in parallel.
    pub fn from_fn<F>(grid: Grid<T>, f: F) -> Self
    where
        F: Fn(T, T) -> T + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (x1, x2) = grid.coords(k);
                f(x1, x2)
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.grid.nx + i]
    }

    pub fn map<F: Fn(T) -> T + Sync>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    /// Node-wise map that also sees the node coordinates.
    pub fn map_with_coords<F: Fn(T, T, T) -> T + Sync>(&self, f: F) -> Self {
        let grid = self.grid;
        Self {
            grid,
            values: self
                .values
                .par_iter()
                .enumerate()
                .map(|(k, &v)| {
                    let (x1, x2) = grid.coords(k);
                    f(x1, x2, v)
                })
                .collect(),
        }
    }

    pub fn zip_with<F: Fn(T, T) -> T + Sync>(&self, other: &Self, f: F) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.matches(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        self.check_same_grid(other)?;
        self.values
            .par_iter_mut()
            .zip(other.values.par_iter())
            .for_each(|(s, &o)| *s += a * o);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest `|value|` over nodes where `keep(x1, x2)` holds.
    pub fn max_abs_where<F: Fn(T, T) -> bool>(&self, keep: F) -> T {
        let mut m = T::zero();
        for (k, v) in self.values.iter().enumerate() {
            let (x1, x2) = self.grid.coords(k);
            if keep(x1, x2) {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Midpoint-rule `L^2` norm (cell area `h^2`).
    pub fn l2_norm(&self) -> T {
        self.l2_norm_where(|_, _| true)
    }

    pub fn l2_norm_where<F: Fn(T, T) -> bool>(&self, keep: F) -> T {
        let mut s = T::zero();
        for (k, v) in self.values.iter().enumerate() {
            let (x1, x2) = self.grid.coords(k);
            if keep(x1, x2) {
                s += *v * *v;
            }
        }
        (s * self.grid.cell_area()).sqrt()
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |s, v| s + v.abs()) * self.grid.cell_area()
    }

    /// Midpoint-rule `L^p` norm for finite `p >= 1`.
    pub fn lp_norm(&self, p: T) -> T {
        let s = self.values.iter().fold(T::zero(), |s, v| s + v.abs().powf(p));
        (s * self.grid.cell_area()).powf(T::one() / p)
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |s, &v| s + v)
    }
}

impl<T: Real> std::ops::Index<usize> for GridField<T> {
    type Output = T;
    fn index(&self, k: usize) -> &T {
        &self.values[k]
    }
}

/// A time instant of a second-order-in-time evolution: `u` and `p = u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState<T> {
    pub t: T,
    pub u: GridField<T>,
    pub p: GridField<T>,
}

impl<T: Real> WaveState<T> {
    pub fn new(t: T, u: GridField<T>, p: GridField<T>) -> Result<Self> {
        u.check_same_grid(&p)?;
        Ok(Self { t, u, p })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.p.is_finite()
    }
}
