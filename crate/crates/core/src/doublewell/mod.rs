//! Two-level model of a particle in a symmetric 1D double well: lowest
//! even/odd bound states, tunnel oscillations of the left/right
//! superpositions, barrier current, and 1D Bohmian trajectories.

mod dynamics;
mod eigen;
mod traj;

pub use dynamics::{
    barrier_current_estimate, current_1d, dbb_velocity_1d, evolve_two_level,
    evolve_two_level_eigenbasis, left_population, left_right_states, region_probabilities,
    RegionProbabilities, Velocity1D, DEFAULT_RHO_FLOOR_REL,
};
pub use traj::{
    integrate_trajectories_1d, integrate_trajectories_1d_from, integrate_trajectories_1d_strided,
};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::potentials::DoubleWellParams;
use crate::units::UnitsConfig;
use eigen::{lowest_level, Eigenfunction, Parity};

/// The two lowest bound states of the double well and everything derived
/// from them. `psi0` is even, `psi1` odd with the sign fixed so that
/// `(psi0 + psi1)/√2` is the LEFT-well state.
#[derive(Debug, Clone)]
pub struct TwoLevelState {
    /// Ground (even) level, < 0.
    pub e0: f64,
    /// First excited (odd) level, e0 < e1 < 0.
    pub e1: f64,
    /// Barrier decay lengths, e_i = −ħ²/(2m l_i²).
    pub l0: f64,
    pub l1: f64,
    /// (e0 − e1)/(2ħ); negative. Population formulas use cos²/sin² and are
    /// insensitive to the sign.
    pub omega_tunnel: f64,
    pub params: DoubleWellParams,
    pub hbar: f64,
    /// Default evaluation grid: symmetric around 0, node exactly at y = 0,
    /// extending ~15 decay lengths past the outer well edges.
    pub grid: Grid1D,
    psi0: Eigenfunction,
    psi1: Eigenfunction,
}

/// Solve for the lowest even and odd levels by parity-reduced matching:
/// a cosh/sinh seed in the barrier, plane waves across the well, and a
/// decaying-exponential condition at the outer edge give a transcendental
/// residual per parity whose lowest root is bracketed by scanning and then
/// bisected to machine precision.
pub fn solve_two_levels(p: &DoubleWellParams, units: &UnitsConfig) -> Result<TwoLevelState> {
    DoubleWellParams::new(p.v0, p.a, p.d, p.mass)?;
    let hbar = units.hbar;

    let e0 = lowest_level(p, hbar, Parity::Even)?.ok_or_else(|| {
        Error::NumericalFailure(format!(
            "no even bound level found for v0={} a={} d={} (a symmetric well always has one; scan failed)",
            p.v0, p.a, p.d
        ))
    })?;
    let e1 = lowest_level(p, hbar, Parity::Odd)?.ok_or_else(|| {
        Error::InsufficientLevels(format!(
            "well v0={} a={} d={} binds no odd level; the two-level model needs at least two bound states",
            p.v0, p.a, p.d
        ))
    })?;
    // For extremely deep/distant wells the physical splitting e1 − e0 drops
    // below f64 resolution of the levels; tolerate the numeric tie (the
    // levels stay valid, the tunnel dynamics is then beyond this precision).
    if e0 > e1 + 1e-12 * e1.abs() || e1 >= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "level ordering violated: e0={e0}, e1={e1} (expected e0 <= e1 < 0)"
        )));
    }

    let psi0 = Eigenfunction::assemble(p, hbar, Parity::Even, e0);
    let psi1 = Eigenfunction::assemble(p, hbar, Parity::Odd, e1);

    let l0 = hbar / (-2.0 * p.mass * e0).sqrt();
    let l1 = hbar / (-2.0 * p.mass * e1).sqrt();
    let omega_tunnel = (e0 - e1) / (2.0 * hbar);

    let y2 = p.d / 2.0 + p.a;
    let tail = (15.0 * l0.max(l1)).clamp(1.0, 60.0);
    let y_max = y2 + tail;
    let grid = Grid1D::new(4001, -y_max, y_max)?;

    Ok(TwoLevelState { e0, e1, l0, l1, omega_tunnel, params: *p, hbar, grid, psi0, psi1 })
}

impl TwoLevelState {
    /// Ground-state wavefunction (even, positive).
    pub fn psi0(&self, y: f64) -> f64 {
        self.psi0.eval(y).0
    }

    /// First excited wavefunction (odd, positive in the left well).
    pub fn psi1(&self, y: f64) -> f64 {
        self.psi1.eval(y).0
    }

    pub fn psi0_prime(&self, y: f64) -> f64 {
        self.psi0.eval(y).1
    }

    pub fn psi1_prime(&self, y: f64) -> f64 {
        self.psi1.eval(y).1
    }

    /// ψ₀ψ₁′ − ψ₁ψ₀′; sets the two-level current via
    /// J(y, t) = (ħ/2m)·sin(2 ω_tunnel t)·wronskian(y).
    pub fn wronskian(&self, y: f64) -> f64 {
        let (v0, d0) = self.psi0.eval(y);
        let (v1, d1) = self.psi1.eval(y);
        v0 * d1 - v1 * d0
    }

    /// Full population transfer left→right and back takes one period.
    pub fn tunnel_period(&self) -> f64 {
        std::f64::consts::PI / self.omega_tunnel.abs()
    }

    /// |ψ_L(0)|² = ψ₀(0)²/2: barrier-center density of the evolving state
    /// at t = 0.
    pub fn left_center_density(&self) -> f64 {
        self.psi0(0.0).powi(2) / 2.0
    }

    /// ψ₀(0)²: barrier-center density of the ground state. Feeding this to
    /// [`barrier_current_estimate`] reproduces the numerically evaluated
    /// current in the deep-well limit; the |ψ_L(0)|² convention gives half
    /// of it (both are reported by the model runner).
    pub fn ground_center_density(&self) -> f64 {
        self.psi0(0.0).powi(2)
    }

    /// ⟨ψ_i|ψ_j⟩ over the real line by piecewise quadrature.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        let f = |which: usize, y: f64| if which == 0 { self.psi0(y) } else { self.psi1(y) };
        let y1 = self.params.d / 2.0;
        let y2 = y1 + self.params.a;
        let y_end = self.grid.y_max();
        let pts = [-y_end, -y2, -y1, y1, y2, y_end];
        crate::quad::integrate_piecewise(|y| f(i, y) * f(j, y), &pts, 8)
    }
}
