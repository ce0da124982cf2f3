use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D, Rect};

/// Complex scalar field sampled on a [`Grid2D`].
///
/// Layout is x-major: `values[(ix, iy)]`, with iy the fast (contiguous)
/// index. Norms are physics norms, i.e. Riemann sums including the cell
/// area dx·dy.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    pub grid: Grid2D,
    pub values: Array2<Complex64>,
}

impl ComplexField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        ComplexField2D { grid, values: Array2::zeros((grid.nx, grid.ny)) }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let values = Array2::from_shape_fn((grid.nx, grid.ny), |(ix, iy)| f(grid.x(ix), grid.y(iy)));
        ComplexField2D { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (grid.nx, grid.ny) {
            return Err(Error::invalid(format!(
                "field shape {:?} does not match grid {} x {}",
                values.dim(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(ComplexField2D { grid, values })
    }

    /// ∫ |ψ|² dx dy as a Riemann sum. Summed sequentially in index order so
    /// repeated runs are bit-identical.
    pub fn norm2(&self) -> f64 {
        let mut acc = 0.0;
        for v in self.values.iter() {
            acc += v.norm_sqr();
        }
        acc * self.grid.dx * self.grid.dy
    }

    /// Rescale to unit norm. Fails on a zero (or non-finite) field.
    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm2();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::NumericalFailure(format!("cannot normalize field with |ψ|² integral {n2}")));
        }
        let s = 1.0 / n2.sqrt();
        for v in self.values.iter_mut() {
            *v *= s;
        }
        Ok(())
    }

    /// Probability mass on nodes inside `rect` (same half-open convention as
    /// [`Rect::contains`]).
    pub fn probability_in(&self, rect: &Rect) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for ix in 0..g.nx {
            let x = g.x(ix);
            if x < rect.x0 || x >= rect.x1 {
                continue;
            }
            for iy in 0..g.ny {
                if rect.contains(x, g.y(iy)) {
                    acc += self.values[(ix, iy)].norm_sqr();
                }
            }
        }
        acc * g.dx * g.dy
    }

    /// Probability mass within `margin` nodes of any boundary. Used to
    /// detect wrap-around contamination before it re-enters the interior.
    pub fn edge_probability(&self, margin: usize) -> f64 {
        let g = &self.grid;
        let m = margin.min(g.nx / 2).min(g.ny / 2);
        let mut acc = 0.0;
        for ix in 0..g.nx {
            let x_edge = ix < m || ix >= g.nx - m;
            for iy in 0..g.ny {
                if x_edge || iy < m || iy >= g.ny - m {
                    acc += self.values[(ix, iy)].norm_sqr();
                }
            }
        }
        acc * g.dx * g.dy
    }

    pub fn max_abs2(&self) -> f64 {
        let mut best = 0.0;
        for v in self.values.iter() {
            let a = v.norm_sqr();
            if a > best {
                best = a;
            }
        }
        best
    }

    pub fn has_nan(&self) -> bool {
        self.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
    }
}

/// Complex field on a 1D grid, `values[i]` at `grid.y(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField1D {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
}

impl ComplexField1D {
    pub fn zeros(grid: Grid1D) -> Self {
        ComplexField1D { grid, values: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    pub fn from_fn(grid: Grid1D, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.y(i))).collect();
        ComplexField1D { grid, values }
    }

    /// ∫ |ψ|² dy via the trapezoid rule (the 1D fields live on a bounded
    /// interval with node endpoints, not a periodic axis).
    pub fn norm2(&self) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == self.grid.n - 1 { 0.5 } else { 1.0 };
            acc += w * v.norm_sqr();
        }
        acc * self.grid.dy
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm2();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::NumericalFailure(format!("cannot normalize field with |ψ|² integral {n2}")));
        }
        let s = 1.0 / n2.sqrt();
        for v in self.values.iter_mut() {
            *v *= s;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_norm() {
        let g = make_grid(16, 8, 2.0, 1.0, 0.0, 0.0).unwrap();
        let f = ComplexField2D::from_fn(g, |_, _| Complex64::new(3.0, 4.0));
        // |3+4i|² = 25 over area 2·1.
        assert_relative_eq!(f.norm2(), 50.0, max_relative = 1e-14);
    }

    #[test]
    fn normalize_gives_unit_norm() {
        let g = make_grid(32, 32, 4.0, 4.0, -2.0, -2.0).unwrap();
        let mut f = ComplexField2D::from_fn(g, |x, y| Complex64::new((-x * x - y * y).exp(), 0.5 * x));
        f.normalize().unwrap();
        assert_relative_eq!(f.norm2(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn normalize_rejects_zero_field() {
        let g = make_grid(4, 4, 1.0, 1.0, 0.0, 0.0).unwrap();
        let mut f = ComplexField2D::zeros(g);
        assert!(f.normalize().is_err());
    }

    #[test]
    fn probability_partitions_across_adjacent_rects() {
        let g = make_grid(64, 64, 8.0, 8.0, -4.0, -4.0).unwrap();
        let mut f = ComplexField2D::from_fn(g, |x, y| Complex64::new((-0.3 * (x * x + y * y)).exp(), 0.0));
        f.normalize().unwrap();
        let left = Rect::new(-4.0, 0.0, -4.0, 4.0 + g.dy);
        let right = Rect::new(0.0, 4.0 + g.dx, -4.0, 4.0 + g.dy);
        let total = f.probability_in(&left) + f.probability_in(&right);
        assert_relative_eq!(total, f.norm2(), max_relative = 1e-13);
    }

    #[test]
    fn edge_probability_sees_border_mass() {
        let g = make_grid(16, 16, 1.0, 1.0, 0.0, 0.0).unwrap();
        let mut f = ComplexField2D::zeros(g);
        f.values[(0, 8)] = Complex64::new(1.0, 0.0);
        let cell = g.dx * g.dy;
        assert_relative_eq!(f.edge_probability(1), cell, max_relative = 1e-14);
        // An interior point is invisible to the monitor.
        let mut f2 = ComplexField2D::zeros(g);
        f2.values[(8, 8)] = Complex64::new(1.0, 0.0);
        assert_eq!(f2.edge_probability(2), 0.0);
    }

    #[test]
    fn field_1d_trapezoid_norm() {
        let g = Grid1D::new(1001, 0.0, 1.0).unwrap();
        // ∫₀¹ y² dy = 1/3; trapezoid error ~ dy².
        let f = ComplexField1D::from_fn(g, |y| Complex64::new(y, 0.0));
        assert_relative_eq!(f.norm2(), 1.0 / 3.0, max_relative = 1e-5);
    }
}
