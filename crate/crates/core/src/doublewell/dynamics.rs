//! Tunnel dynamics of the two-level double-well state: left/right
//! superpositions, time evolution, region probabilities, probability
//! current, and the de Broglie-Bohm velocity field.

use num_complex::Complex64;

use super::TwoLevelState;
use crate::error::{Error, Result};
use crate::field::ComplexField1D;
use crate::quad;
use crate::units::UnitsConfig;

/// Velocity mask threshold relative to max|ψ|²; below it v = J/ρ is not
/// trusted and the point is flagged instead of silently zeroed.
pub const DEFAULT_RHO_FLOOR_REL: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn eigenstate_rasters(s: &TwoLevelState) -> (ComplexField1D, ComplexField1D) {
    let mut f0 = ComplexField1D::from_fn(s.grid, |y| Complex64::new(s.psi0(y), 0.0));
    let mut f1 = ComplexField1D::from_fn(s.grid, |y| Complex64::new(s.psi1(y), 0.0));
    // Discrete renormalization: makes the sampled pair exactly orthonormal
    // under the trapezoid inner product (the cross term vanishes by parity).
    f0.normalize().expect("eigenstate raster has positive norm");
    f1.normalize().expect("eigenstate raster has positive norm");
    (f0, f1)
}

/// ψ_{L,R} = (ψ₀ ± ψ₁)/√2 sampled on the state grid, each normalized.
pub fn left_right_states(s: &TwoLevelState) -> (ComplexField1D, ComplexField1D) {
    let (f0, f1) = eigenstate_rasters(s);
    let mut left = ComplexField1D::zeros(s.grid);
    let mut right = ComplexField1D::zeros(s.grid);
    for i in 0..s.grid.n {
        left.values[i] = (f0.values[i] + f1.values[i]) * FRAC_1_SQRT_2;
        right.values[i] = (f0.values[i] - f1.values[i]) * FRAC_1_SQRT_2;
    }
    (left, right)
}

/// State at time t for ψ(0) = ψ_L:
/// e^{−i(E₀+E₁)t/2ħ} (cos(ωt) ψ_L − i sin(ωt) ψ_R), ω = omega_tunnel.
pub fn evolve_two_level(s: &TwoLevelState, t: f64) -> ComplexField1D {
    let (left, right) = left_right_states(s);
    let phase = Complex64::from_polar(1.0, -(s.e0 + s.e1) * t / (2.0 * s.hbar));
    let (sin, cos) = (s.omega_tunnel * t).sin_cos();
    let rot = Complex64::new(0.0, -sin);
    let mut out = ComplexField1D::zeros(s.grid);
    for i in 0..s.grid.n {
        out.values[i] = phase * (cos * left.values[i] + rot * right.values[i]);
    }
    out
}

/// Same state assembled in the eigenbasis,
/// (e^{−iE₀t/ħ} ψ₀ + e^{−iE₁t/ħ} ψ₁)/√2; agrees with [`evolve_two_level`]
/// to roundoff and exists as an internal consistency check.
pub fn evolve_two_level_eigenbasis(s: &TwoLevelState, t: f64) -> ComplexField1D {
    let (f0, f1) = eigenstate_rasters(s);
    let p0 = Complex64::from_polar(FRAC_1_SQRT_2, -s.e0 * t / s.hbar);
    let p1 = Complex64::from_polar(FRAC_1_SQRT_2, -s.e1 * t / s.hbar);
    let mut out = ComplexField1D::zeros(s.grid);
    for i in 0..s.grid.n {
        out.values[i] = p0 * f0.values[i] + p1 * f1.values[i];
    }
    out
}

/// |⟨ψ_L|ψ(t)⟩|² = cos²(ω_tunnel t).
pub fn left_population(s: &TwoLevelState, t: f64) -> f64 {
    (s.omega_tunnel * t).cos().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionProbabilities {
    /// Left well, y ∈ [−d/2 − a, −d/2].
    pub left: f64,
    /// Right well, y ∈ [d/2, d/2 + a].
    pub right: f64,
    /// Barrier, |y| < d/2.
    pub barrier: f64,
    /// Everything beyond the outer well edges.
    pub outside: f64,
}

impl RegionProbabilities {
    pub fn total(&self) -> f64 {
        self.left + self.right + self.barrier + self.outside
    }
}

/// Probability content of the four regions at time t.
///
/// |ψ(t)|² = cos²ψ_L² + sin²ψ_R² (the cross term is purely imaginary), so
/// each region integral reduces to basis integrals M_ij = ∫_R ψ_i ψ_j:
/// P_R(t) = (M₀₀ + M₁₁)/2 + M₀₁ cos(2ωt). Tail integrals beyond the outer
/// edges are exact exponentials.
pub fn region_probabilities(s: &TwoLevelState, t: f64) -> RegionProbabilities {
    let y1 = s.params.d / 2.0;
    let y2 = y1 + s.params.a;
    let c2 = (2.0 * s.omega_tunnel * t).cos();

    // Right well by quadrature; left well mirrors with M₀₁ sign flipped.
    let w00 = quad::integrate(|y| s.psi0(y).powi(2), y1, y2, 8);
    let w11 = quad::integrate(|y| s.psi1(y).powi(2), y1, y2, 8);
    let w01 = quad::integrate(|y| s.psi0(y) * s.psi1(y), y1, y2, 8);
    let well_sym = 0.5 * (w00 + w11);

    // Barrier: M₀₁ vanishes by parity.
    let b00 = 2.0 * quad::integrate(|y| s.psi0(y).powi(2), 0.0, y1, 6);
    let b11 = 2.0 * quad::integrate(|y| s.psi1(y).powi(2), 0.0, y1, 6);

    // Outside: ψ_i = A_i e^{−κ_i (y − y2)}, both tails, cross terms cancel
    // between the two sides.
    let (a0, k0) = s.psi0.tail();
    let (a1, k1) = s.psi1.tail();
    let t00 = a0 * a0 / k0;
    let t11 = a1 * a1 / k1;

    RegionProbabilities {
        left: well_sym - w01 * c2,
        right: well_sym + w01 * c2,
        barrier: 0.5 * (b00 + b11),
        outside: 0.5 * (t00 + t11),
    }
}

fn derivative_4th(values: &[Complex64], h: f64) -> Result<Vec<Complex64>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "4th-order derivative needs at least 5 grid points, got {n}"
        )));
    }
    let c = 1.0 / (12.0 * h);
    let v = values;
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) * c;
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) * c;
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) * c;
    }
    d[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5]) * c;
    d[n - 1] =
        (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4] + 3.0 * v[n - 5]) * c;
    Ok(d)
}

/// Probability current J = (ħ/m) Im[ψ* ∂_y ψ], with the derivative taken by
/// 4th-order centered differences (one-sided at the edges).
pub fn current_1d(psi: &ComplexField1D, units: &UnitsConfig) -> Result<Vec<f64>> {
    let d = derivative_4th(&psi.values, psi.grid.dy)?;
    let pref = units.hbar / units.mass;
    Ok(psi
        .values
        .iter()
        .zip(&d)
        .map(|(p, dp)| pref * (p.conj() * dp).im)
        .collect())
}

/// Grid velocity field with a density mask.
#[derive(Debug, Clone)]
pub struct Velocity1D {
    pub v: Vec<f64>,
    /// true where |ψ|² fell below `rho_floor`; v is 0 there and must not be
    /// sampled.
    pub masked: Vec<bool>,
    /// Absolute density threshold used, `DEFAULT_RHO_FLOOR_REL`·max|ψ|².
    pub rho_floor: f64,
}

/// v = J/|ψ|² where the density is above the floor; flagged elsewhere.
pub fn dbb_velocity_1d(psi: &ComplexField1D, units: &UnitsConfig) -> Result<Velocity1D> {
    let j = current_1d(psi, units)?;
    let rho: Vec<f64> = psi.values.iter().map(|p| p.norm_sqr()).collect();
    let rho_max = rho.iter().cloned().fold(0.0, f64::max);
    let rho_floor = DEFAULT_RHO_FLOOR_REL * rho_max;
    let mut v = vec![0.0; j.len()];
    let mut masked = vec![false; j.len()];
    for i in 0..j.len() {
        if rho[i] > rho_floor {
            v[i] = j[i] / rho[i];
        } else {
            masked[i] = true;
        }
    }
    Ok(Velocity1D { v, masked, rho_floor })
}

/// Closed-form deep-well barrier current
/// rho00 · (ħ/m) · sin((E₁−E₀) t / ħ) / (2 L_tunnel), L_tunnel = (L₀+L₁)/2.
///
/// `rho00` is the barrier-center density convention: with
/// [`TwoLevelState::ground_center_density`] the estimate reproduces the
/// numerically evaluated current in the deep-well limit, with
/// [`TwoLevelState::left_center_density`] it is half of it. Callers that
/// report the estimate should report both.
pub fn barrier_current_estimate(s: &TwoLevelState, rho00: f64, t: f64, units: &UnitsConfig) -> f64 {
    if !s.params.is_deep(units.hbar) {
        log::warn!(
            "barrier current estimate outside deep-well regime (level/depth ratio {:.3})",
            s.params.deep_well_ratio(units.hbar)
        );
    }
    let l_tunnel = 0.5 * (s.l0 + s.l1);
    rho00 * (units.hbar / s.params.mass) * ((s.e1 - s.e0) * t / units.hbar).sin() / (2.0 * l_tunnel)
}

impl TwoLevelState {
    /// |ψ(y,t)|² = cos²(ωt) ψ_L(y)² + sin²(ωt) ψ_R(y)².
    pub fn density_at(&self, y: f64, t: f64) -> f64 {
        let (v0, v1) = (self.psi0(y), self.psi1(y));
        let l = (v0 + v1) * FRAC_1_SQRT_2;
        let r = (v0 - v1) * FRAC_1_SQRT_2;
        let (sin, cos) = (self.omega_tunnel * t).sin_cos();
        cos * cos * l * l + sin * sin * r * r
    }

    /// J(y,t) = (ħ/2m) sin(2 ω_tunnel t) (ψ₀ψ₁′ − ψ₁ψ₀′)(y), exact for the
    /// two-level state.
    pub fn current_at(&self, y: f64, t: f64) -> f64 {
        self.hbar / (2.0 * self.params.mass) * (2.0 * self.omega_tunnel * t).sin() * self.wronskian(y)
    }

    /// v = J/ρ, or None where ρ < rho_floor (absolute threshold).
    pub fn velocity_at(&self, y: f64, t: f64, rho_floor: f64) -> Option<f64> {
        let rho = self.density_at(y, t);
        if rho > rho_floor {
            Some(self.current_at(y, t) / rho)
        } else {
            None
        }
    }
}
