//! Coupled-waveguide and double-well potentials.
//!
//! The 2D potential is V_in + V_out. V_in puts a step of height `v_step`
//! on the whole x > 0 half-plane plus a barrier strip of height `v_barrier`
//! along |y| < d/2. V_out raises high walls of height `v_wall` everywhere
//! outside the guide interiors: the main guide (−L/2 < x < L/2,
//! d/2 < y < d/2 + a), the barrier strip (0 < x < L/2, |y| < d/2), and the
//! auxiliary guide (0 < x < L/2, −d/2 − b < y < −d/2). Every step function
//! is smoothed factor-by-factor with [`smoothed_theta`].

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D};

/// Smoothed step (1 + tanh(x/ε))/2. Negative arguments are evaluated as the
/// complement of the positive branch, which makes
/// `smoothed_theta(x) + smoothed_theta(−x) == 1` hold exactly in floating
/// point (the subtraction 1 − s is exact for s ∈ [1/2, 1]).
pub fn smoothed_theta(x: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("smoothing width must be positive, got {eps}")));
    }
    Ok(theta_eps(x, eps))
}

#[inline]
fn theta_eps(x: f64, eps: f64) -> f64 {
    if x >= 0.0 {
        0.5 * (1.0 + (x / eps).tanh())
    } else {
        1.0 - 0.5 * (1.0 + (-x / eps).tanh())
    }
}

/// Geometry and energy scales of the coupled-waveguide potential.
/// Defaults are the working values used throughout: guides of length 100
/// and widths 20/5 separated by a barrier of width 1, step 162, barrier 18,
/// wall 1e4, smoothing 0.05 (atomic units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideGeometry {
    /// Main guide length L; the guide spans −L/2 < x < L/2.
    pub l: f64,
    /// Main guide width a.
    pub a: f64,
    /// Auxiliary guide width b.
    pub b: f64,
    /// Barrier width d; the barrier strip is |y| < d/2.
    pub d: f64,
    pub v_step: f64,
    pub v_barrier: f64,
    /// Wall height V_o outside the guides.
    pub v_wall: f64,
    /// Step smoothing width ε.
    pub eps: f64,
}

impl Default for WaveguideGeometry {
    fn default() -> Self {
        WaveguideGeometry {
            l: 100.0,
            a: 20.0,
            b: 5.0,
            d: 1.0,
            v_step: 162.0,
            v_barrier: 18.0,
            v_wall: 1e4,
            eps: 0.05,
        }
    }
}

impl WaveguideGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l", self.l), ("a", self.a), ("b", self.b), ("d", self.d), ("eps", self.eps)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("waveguide length {name} must be positive, got {v}")));
            }
        }
        if !(self.v_step > 0.0) || !(self.v_barrier > 0.0) || !(self.v_wall > self.v_step) {
            return Err(Error::invalid(format!(
                "need v_wall > v_step > 0 and v_barrier > 0, got v_wall={} v_step={} v_barrier={}",
                self.v_wall, self.v_step, self.v_barrier
            )));
        }
        Ok(())
    }

    /// Bounding box of the guide interiors (x0, x1, y0, y1).
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        (-self.l / 2.0, self.l / 2.0, -self.d / 2.0 - self.b, self.d / 2.0 + self.a)
    }
}

/// Total waveguide potential V_in + V_out at one point.
pub fn waveguide_potential(g: &WaveguideGeometry, x: f64, y: f64) -> f64 {
    let e = g.eps;
    let s = |u: f64| theta_eps(u, e);
    let half_d = g.d / 2.0;
    let half_l = g.l / 2.0;

    let v_in = s(x) * (g.v_step + s(half_d - y.abs()) * g.v_barrier);

    // Interior indicators of the three disjoint guide rectangles. Their SUM
    // is the smoothed interior: along shared edges the complementary edge
    // factors add to exactly 1, so no spurious wall sheet appears at the
    // guide/barrier junctions (a product of complements would leave one).
    let i_main = s(x + half_l) * s(half_l - x) * s(y - half_d) * s(half_d + g.a - y);
    let i_barrier = s(x) * s(half_l - x) * s(half_d - y) * s(y + half_d);
    let i_aux = s(x) * s(half_l - x) * s(-half_d - y) * s(y + half_d + g.b);
    let v_out = g.v_wall * (1.0 - i_main - i_barrier - i_aux);

    v_in + v_out
}

/// Symmetric double well: −v0 on d/2 ≤ |y| ≤ d/2 + a, 0 elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellParams {
    /// Well depth (positive; the wells sit at −v0).
    pub v0: f64,
    /// Well width.
    pub a: f64,
    /// Separation between the wells (barrier width).
    pub d: f64,
    /// Particle mass.
    pub mass: f64,
}

impl DoubleWellParams {
    pub fn new(v0: f64, a: f64, d: f64, mass: f64) -> Result<Self> {
        for (name, v) in [("v0", v0), ("a", a), ("d", d), ("mass", mass)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("double-well {name} must be positive, got {v}")));
            }
        }
        Ok(DoubleWellParams { v0, a, d, mass })
    }

    /// Ratio of the infinite-well ground energy ħ²π²/(2ma²) to the depth.
    /// Small values mean the lowest levels sit deep in the wells.
    pub fn deep_well_ratio(&self, hbar: f64) -> f64 {
        hbar * hbar * std::f64::consts::PI.powi(2) / (2.0 * self.mass * self.a * self.a * self.v0)
    }

    pub fn is_deep(&self, hbar: f64) -> bool {
        self.deep_well_ratio(hbar) < 0.1
    }
}

/// Sharp-step double-well potential. Exact step edges take the half-sum
/// value −v0/2 so the function is deterministic on the measure-zero edge set.
pub fn double_well_potential(p: &DoubleWellParams, y: f64) -> f64 {
    let ya = y.abs();
    let lo = p.d / 2.0;
    let hi = p.d / 2.0 + p.a;
    if ya == lo || ya == hi {
        -p.v0 / 2.0
    } else if ya > lo && ya < hi {
        -p.v0
    } else {
        0.0
    }
}

/// Pointwise rasterization of the waveguide potential. A grid that does not
/// cover the guide bounding box is reported on the warning channel, not an
/// error: partial rasters are valid for zoomed-in diagnostics.
pub fn rasterize_waveguide(g: &WaveguideGeometry, grid: &Grid2D) -> Array2<f64> {
    let (bx0, bx1, by0, by1) = g.bounding_box();
    if grid.x0_min > bx0 || grid.x_max() < bx1 || grid.y0_min > by0 || grid.y_max() < by1 {
        log::warn!(
            "grid [{}, {}] x [{}, {}] does not cover guide box [{bx0}, {bx1}] x [{by0}, {by1}]",
            grid.x0_min,
            grid.x_max(),
            grid.y0_min,
            grid.y_max()
        );
    }
    Array2::from_shape_fn((grid.nx, grid.ny), |(ix, iy)| waveguide_potential(g, grid.x(ix), grid.y(iy)))
}

pub fn rasterize_double_well(p: &DoubleWellParams, grid: &Grid1D) -> Vec<f64> {
    if grid.y_min > -(p.d / 2.0 + p.a) || grid.y_max() < p.d / 2.0 + p.a {
        log::warn!(
            "grid [{}, {}] does not cover both wells (|y| up to {})",
            grid.y_min,
            grid.y_max(),
            p.d / 2.0 + p.a
        );
    }
    grid.points().map(|y| double_well_potential(p, y)).collect()
}
