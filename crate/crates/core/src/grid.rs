use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform rectangular grid with periodic spectral topology.
///
/// Nodes sit at `x_i = x0_min + i·dx` for `i = 0..nx` (no node at
/// `x0_min + lx`; the spectral representation wraps around). Spacing is
/// stored rather than the extent so that file round-trips are bit-exact;
/// `lx = nx·dx` is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0_min: f64,
    pub y0_min: f64,
}

/// Build a grid from extents. Fails on degenerate sizes or extents.
pub fn make_grid(nx: usize, ny: usize, lx: f64, ly: f64, x0_min: f64, y0_min: f64) -> Result<Grid2D> {
    if nx < 2 || ny < 2 {
        return Err(Error::invalid(format!("grid needs nx, ny >= 2, got {nx} x {ny}")));
    }
    if !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::invalid(format!("grid extents must be positive, got {lx} x {ly}")));
    }
    if !x0_min.is_finite() || !y0_min.is_finite() {
        return Err(Error::invalid("grid origin must be finite".to_string()));
    }
    Ok(Grid2D {
        nx,
        ny,
        dx: lx / nx as f64,
        dy: ly / ny as f64,
        x0_min,
        y0_min,
    })
}

impl Grid2D {
    pub fn from_spacing(nx: usize, ny: usize, dx: f64, dy: f64, x0_min: f64, y0_min: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!("grid needs nx, ny >= 2, got {nx} x {ny}")));
        }
        if !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {dx} x {dy}")));
        }
        Ok(Grid2D { nx, ny, dx, dy, x0_min, y0_min })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn ly(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    /// Node coordinate along x.
    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.x0_min + ix as f64 * self.dx
    }

    /// Node coordinate along y.
    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.y0_min + iy as f64 * self.dy
    }

    /// Largest node coordinates (the domain wraps beyond these).
    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    /// Conjugate momentum along x in standard DFT ordering:
    /// `{0, Δk, 2Δk, …, -2Δk, -Δk}` with `Δk = 2π/lx`.
    #[inline]
    pub fn kx(&self, i: usize) -> f64 {
        dft_frequency(i, self.nx, self.lx())
    }

    #[inline]
    pub fn ky(&self, j: usize) -> f64 {
        dft_frequency(j, self.ny, self.ly())
    }

    pub fn kx_vec(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.kx(i)).collect()
    }

    pub fn ky_vec(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.ky(j)).collect()
    }

    /// Momentum-space cell sizes Δkx·Δky, used for Parseval-weighted norms.
    pub fn dkx(&self) -> f64 {
        2.0 * PI / self.lx()
    }

    pub fn dky(&self) -> f64 {
        2.0 * PI / self.ly()
    }

    /// True if (x, y) lies inside the node bounding box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0_min && x <= self.x_max() && y >= self.y0_min && y <= self.y_max()
    }
}

#[inline]
fn dft_frequency(i: usize, n: usize, length: f64) -> f64 {
    let dk = 2.0 * PI / length;
    if i <= (n - 1) / 2 {
        i as f64 * dk
    } else {
        (i as f64 - n as f64) * dk
    }
}

/// Uniform 1D grid, nodes at `y_min + i·dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub dy: f64,
    pub y_min: f64,
}

impl Grid1D {
    pub fn new(n: usize, y_min: f64, y_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("1D grid needs n >= 2, got {n}")));
        }
        if !(y_max > y_min) {
            return Err(Error::invalid(format!("1D grid needs y_max > y_min, got [{y_min}, {y_max}]")));
        }
        Ok(Grid1D { n, dy: (y_max - y_min) / (n - 1) as f64, y_min })
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y_min + i as f64 * self.dy
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.n - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.y(i))
    }
}

/// Axis-aligned rectangle, used for region probabilities. Half-open in the
/// sense that a grid node belongs to the rectangle iff
/// `x0 <= x < x1 && y0 <= y < y1`, so adjacent rectangles partition nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}
