//! Fourth-order finite-difference operators on [`GridField`]s.
//!
//! Interior nodes use the 5-point central formulas; the two nodes nearest
//! each edge use one-sided closures of the same order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::scalar::{lit, Real};

/// Spatial axis of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X1,
    X2,
}

/// Minimum number of nodes along a differentiated axis.
pub const MIN_NODES: usize = 6;

const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Coefficients (already divided by `12 h` or `12 h^2`) for one node of a line.
struct Row<T> {
    start: usize,
    coeffs: [T; 6],
    len: usize,
}

fn first_derivative_row<T: Real>(i: usize, n: usize, scale: T) -> Row<T> {
    let mut coeffs = [T::zero(); 6];
    let (start, src, sign): (usize, &[f64; 5], f64) = if i == 0 {
        (0, &D1_EDGE0, 1.0)
    } else if i == 1 {
        (0, &D1_EDGE1, 1.0)
    } else if i == n - 1 {
        (n - 5, &D1_EDGE0, -1.0)
    } else if i == n - 2 {
        (n - 5, &D1_EDGE1, -1.0)
    } else {
        (i - 2, &D1_CENTRAL, 1.0)
    };
    let mirrored = i + 2 >= n && i >= 2;
    for m in 0..5 {
        let c = if mirrored { src[4 - m] } else { src[m] };
        coeffs[m] = lit::<T>(sign * c) * scale;
    }
    Row { start, coeffs, len: 5 }
}

fn second_derivative_row<T: Real>(i: usize, n: usize, scale: T) -> Row<T> {
    let mut coeffs = [T::zero(); 6];
    if i == 0 || i == 1 || i == n - 1 || i == n - 2 {
        let src = if i == 0 || i == n - 1 { &D2_EDGE0 } else { &D2_EDGE1 };
        let mirrored = i >= n - 2;
        for m in 0..6 {
            let c = if mirrored { src[5 - m] } else { src[m] };
            coeffs[m] = lit::<T>(c) * scale;
        }
        let start = if mirrored { n - 6 } else { 0 };
        Row { start, coeffs, len: 6 }
    } else {
        for m in 0..5 {
            coeffs[m] = lit::<T>(D2_CENTRAL[m]) * scale;
        }
        Row { start: i - 2, coeffs, len: 5 }
    }
}

fn check_len(n: usize, axis: Axis) -> Result<()> {
    if n < MIN_NODES {
        Err(Error::InvalidConfig(format!(
            "need at least {MIN_NODES} nodes along {axis:?} to differentiate, got {n}"
        )))
    } else {
        Ok(())
    }
}

fn apply<T: Real>(f: &GridField<T>, axis: Axis, second: bool) -> Result<GridField<T>> {
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let twelve = lit::<T>(12.0);
    let scale = if second { T::one() / (twelve * g.h * g.h) } else { T::one() / (twelve * g.h) };
    let row_for = |i: usize, n: usize| {
        if second {
            second_derivative_row(i, n, scale)
        } else {
            first_derivative_row(i, n, scale)
        }
    };
    let src = f.values();
    let mut out = vec![T::zero(); g.len()];
    match axis {
        Axis::X1 => {
            check_len(nx, axis)?;
            let rows: Vec<Row<T>> = (0..nx).map(|i| row_for(i, nx)).collect();
            out.par_chunks_mut(nx).enumerate().for_each(|(j, line)| {
                let s = &src[j * nx..(j + 1) * nx];
                for (i, o) in line.iter_mut().enumerate() {
                    let r = &rows[i];
                    // weights sum to zero, so differencing against the node
                    // makes constants exact
                    let mut acc = T::zero();
                    for m in 0..r.len {
                        acc += r.coeffs[m] * (s[r.start + m] - s[i]);
                    }
                    *o = acc;
                }
            });
        }
        Axis::X2 => {
            check_len(ny, axis)?;
            out.par_chunks_mut(nx).enumerate().for_each(|(j, line)| {
                let r = row_for(j, ny);
                let own = &src[j * nx..(j + 1) * nx];
                for m in 0..r.len {
                    let c = r.coeffs[m];
                    let s = &src[(r.start + m) * nx..(r.start + m + 1) * nx];
                    for ((o, &v), &w) in line.iter_mut().zip(s).zip(own) {
                        *o += c * (v - w);
                    }
                }
            });
        }
    }
    GridField::from_values(g, out)
}

/// First partial derivative along `axis`.
pub fn d1<T: Real>(f: &GridField<T>, axis: Axis) -> Result<GridField<T>> {
    apply(f, axis, false)
}

/// Second partial derivative along `axis`.
pub fn d2<T: Real>(f: &GridField<T>, axis: Axis) -> Result<GridField<T>> {
    apply(f, axis, true)
}

/// Fourth-order Laplacian `d11 + d22`.
pub fn laplacian<T: Real>(f: &GridField<T>) -> Result<GridField<T>> {
    let mut a = d2(f, Axis::X1)?;
    let b = d2(f, Axis::X2)?;
    a.axpy(T::one(), &b)?;
    Ok(a)
}

/// Gradient `(d1, d2)`.
pub fn gradient<T: Real>(f: &GridField<T>) -> Result<(GridField<T>, GridField<T>)> {
    Ok((d1(f, Axis::X1)?, d1(f, Axis::X2)?))
}

/// Fourth-order central difference of a scalar function of one variable.
pub fn central_diff<T: Real, F: Fn(T) -> T>(f: F, x: T, step: T) -> T {
    let two = step + step;
    (f(x - two) - lit::<T>(8.0) * f(x - step) + lit::<T>(8.0) * f(x + step) - f(x + two))
        / (lit::<T>(12.0) * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn poly_field(n: usize) -> GridField<f64> {
        let g = Grid::<f64>::square(1.0, n).unwrap();
        GridField::from_fn(g, |x, y| x.powi(4) - 2.0 * x * x * y + y.powi(3) + 0.5 * x * y)
    }

    #[test]
    fn quartic_polynomials_are_differentiated_exactly() {
        let f = poly_field(21);
        let fx = d1(&f, Axis::X1).unwrap();
        let fyy = d2(&f, Axis::X2).unwrap();
        let g = *f.grid();
        for k in 0..g.len() {
            let (x, y) = g.coords(k);
            let ex = 4.0 * x.powi(3) - 4.0 * x * y + 0.5 * y;
            assert!((fx[k] - ex).abs() < 1e-10, "d1 at {x},{y}: {} vs {ex}", fx[k]);
            assert!((fyy[k] - 6.0 * y).abs() < 1e-8, "d22 at {x},{y}");
        }
    }

    #[test]
    fn derivative_of_square_at_three() {
        // h = 0.01 grid containing x1 = 3
        let g = Grid::<f64>::new(41, 6, 0.01, (2.8, 0.0)).unwrap();
        let f = GridField::from_fn(g, |x, _| x * x);
        let fx = d1(&f, Axis::X1).unwrap();
        let i = 20;
        assert!((g.x1(i) - 3.0).abs() < 1e-12);
        assert!((fx.at(i, 2) - 6.0).abs() < 1e-8);
    }

    #[test]
    fn laplacian_converges_at_fourth_order() {
        let err = |n: usize| {
            let g = Grid::<f64>::square(2.0, n).unwrap();
            let f = GridField::from_fn(g, |x, y| (x + 0.3).sin() * (0.7 * y).cos());
            let lap = laplacian(&f).unwrap();
            let exact = GridField::from_fn(g, |x, y| -(1.0 + 0.49) * (x + 0.3).sin() * (0.7 * y).cos());
            lap.zip_with(&exact, |a, b| a - b).unwrap().max_abs()
        };
        let e1 = err(21);
        let e2 = err(41);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn too_few_nodes_is_an_error() {
        let g = Grid::<f64>::new(5, 10, 0.1, (0.0, 0.0)).unwrap();
        let f = GridField::zeros(g);
        assert!(d1(&f, Axis::X1).is_err());
        assert!(d1(&f, Axis::X2).is_ok());
    }

    #[test]
    fn single_precision_stencil() {
        let g = Grid::<f32>::square(1.0, 41).unwrap();
        let f = GridField::from_fn(g, |x, y| x * x + y * y);
        let lap = laplacian(&f).unwrap();
        assert!(lap.values().iter().all(|v| (v - 4.0).abs() < 2e-2));
    }
}
