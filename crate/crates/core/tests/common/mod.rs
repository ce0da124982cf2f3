//! Shared oracles for integration tests: independent implementations used
//! to cross-check the library, deliberately built on different numerics
//! (finite differences, direct 1D FFT stepping, closed forms).

#![allow(dead_code)]

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use bohmsim_core::potentials::DoubleWellParams;

/// Abramowitz & Stegun 7.1.26 rational approximation, |error| < 1.5e-7.
pub fn erf(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    s * (1.0 - poly * (-x * x).exp())
}

/// CDF of a normal distribution.
pub fn normal_cdf(x: f64, mean: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sigma * std::f64::consts::SQRT_2)))
}

/// Width of a freely spreading Gaussian packet.
pub fn free_gaussian_sigma(sigma0: f64, t: f64, hbar: f64, mass: f64) -> f64 {
    let r = hbar * t / (2.0 * mass * sigma0 * sigma0);
    sigma0 * (1.0 + r * r).sqrt()
}

/// Position of the guidance-law path seeded at `u0` in a free Gaussian
/// launched from `center0` with momentum `p0`: paths scale with the packet
/// width around the moving center.
pub fn free_gaussian_path(u0: f64, center0: f64, p0: f64, sigma0: f64, t: f64, hbar: f64, mass: f64) -> f64 {
    center0 + p0 / mass * t + (u0 - center0) * free_gaussian_sigma(sigma0, t, hbar, mass) / sigma0
}

// ---------------------------------------------------------------------------
// Finite-difference eigenvalue oracle (Sturm bisection + Richardson).
// ---------------------------------------------------------------------------

/// Number of eigenvalues of the FD Hamiltonian below `lambda`, by counting
/// negative pivots of the LDLᵀ factorization of (H − λ).
fn sturm_count(diag: &[f64], off: f64, lambda: f64) -> usize {
    let mut count = 0usize;
    // ∞ makes the coupling term vanish on the first row.
    let mut d_prev = f64::INFINITY;
    let off2 = off * off;
    for &a in diag {
        let mut d = a - lambda - if d_prev != 0.0 { off2 / d_prev } else { off2 / f64::MIN_POSITIVE };
        if d == 0.0 {
            d = -f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
        d_prev = d;
    }
    count
}

/// k-th (0-indexed) eigenvalue by Sturm bisection.
fn sturm_eigenvalue(diag: &[f64], off: f64, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    assert!(sturm_count(diag, off, lo) <= k, "lower bracket too high");
    assert!(sturm_count(diag, off, hi) > k, "upper bracket too low");
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return mid;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Lowest two FD eigenvalues of the sharp double well on a Dirichlet grid.
/// Well edges are placed on nodes by index arithmetic and carry the average
/// value −v0/2, which keeps the eigenvalue error expansion even in h.
fn fd_two_levels_at(p: &DoubleWellParams, hbar: f64, h: f64, y_max: f64) -> (f64, f64) {
    // Positions are index-exact: node i sits at (i − n_half)·h.
    let n_half = (y_max / h).round() as i64;
    let inner = (p.d / 2.0 / h).round() as i64;
    let outer = ((p.d / 2.0 + p.a) / h).round() as i64;
    assert!((inner as f64 * h - p.d / 2.0).abs() < 1e-9, "inner edge must sit on a node");
    assert!((outer as f64 * h - (p.d / 2.0 + p.a)).abs() < 1e-9, "outer edge must sit on a node");
    let n = (2 * n_half - 1) as usize;
    let kin = hbar * hbar / (p.mass * h * h);
    let mut diag = Vec::with_capacity(n);
    for idx in 0..n {
        let i = idx as i64 + 1 - n_half;
        let ai = i.abs();
        let v = if ai == inner || ai == outer {
            -p.v0 / 2.0
        } else if ai > inner && ai < outer {
            -p.v0
        } else {
            0.0
        };
        diag.push(kin + v);
    }
    let off = -0.5 * kin;
    let e0 = sturm_eigenvalue(&diag, off, 0, -p.v0 - 1.0, 0.0);
    let e1 = sturm_eigenvalue(&diag, off, 1, -p.v0 - 1.0, 0.0);
    (e0, e1)
}

/// Richardson-extrapolated FD oracle for the lowest two levels. The domain
/// is sized from a coarse pre-solve so Dirichlet truncation is negligible.
pub fn fd_two_levels(p: &DoubleWellParams, hbar: f64) -> (f64, f64) {
    let y2 = p.d / 2.0 + p.a;
    // Coarse pass to estimate the outer decay length.
    let (.., e1c) = fd_two_levels_at(p, hbar, 2.5e-3, (y2 + 8.0 * p.a).max(y2 + 4.0));
    let kappa1 = (-2.0 * p.mass * e1c).sqrt() / hbar;
    let tail = (14.0 / kappa1).clamp(2.0, 60.0);
    // Snap the domain to a multiple of h so the h and h/2 grids nest.
    let h = 1e-3;
    let y_max = ((y2 + tail) / h).ceil() * h;
    let (e0_h, e1_h) = fd_two_levels_at(p, hbar, h, y_max);
    let (e0_h2, e1_h2) = fd_two_levels_at(p, hbar, h / 2.0, y_max);
    ((4.0 * e0_h2 - e0_h) / 3.0, (4.0 * e1_h2 - e1_h) / 3.0)
}

// ---------------------------------------------------------------------------
// Independent 1D split-operator propagator.
// ---------------------------------------------------------------------------

/// Cell-centered periodic 1D grid: node i at (i + 1/2 − n/2)·dy. Potential
/// edges that are integer multiples of dy fall exactly midway between
/// nodes, so the rastered step is symmetric about the true edge.
pub struct SplitOp1D {
    pub n: usize,
    pub dy: f64,
    half_v: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl SplitOp1D {
    pub fn node(n: usize, dy: f64, i: usize) -> f64 {
        (i as f64 + 0.5 - n as f64 / 2.0) * dy
    }

    pub fn new(n: usize, dy: f64, v: impl Fn(f64) -> f64, dt: f64, hbar: f64, mass: f64) -> Self {
        let length = n as f64 * dy;
        let half_v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, -v(Self::node(n, dy, i)) * dt / (2.0 * hbar)))
            .collect();
        let scale = 1.0 / n as f64;
        let kinetic: Vec<Complex64> = (0..n)
            .map(|j| {
                let jj = if j <= (n - 1) / 2 { j as f64 } else { j as f64 - n as f64 };
                let k = 2.0 * PI * jj / length;
                Complex64::from_polar(scale, -hbar * k * k * dt / (2.0 * mass))
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch =
            vec![Complex64::default(); fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len())];
        SplitOp1D { n, dy, half_v, kinetic, fft, ifft, scratch }
    }

    pub fn step(&mut self, psi: &mut [Complex64]) {
        for (p, h) in psi.iter_mut().zip(&self.half_v) {
            *p *= h;
        }
        self.fft.process_with_scratch(psi, &mut self.scratch);
        for (p, k) in psi.iter_mut().zip(&self.kinetic) {
            *p *= k;
        }
        self.ifft.process_with_scratch(psi, &mut self.scratch);
        for (p, h) in psi.iter_mut().zip(&self.half_v) {
            *p *= h;
        }
    }

    pub fn norm2(&self, psi: &[Complex64]) -> f64 {
        psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dy
    }

    /// Probability on y < 0 (cell-centered Riemann sum; no node sits at 0).
    pub fn prob_left(&self, psi: &[Complex64]) -> f64 {
        let mut s = 0.0;
        for (i, c) in psi.iter().enumerate() {
            if Self::node(self.n, self.dy, i) < 0.0 {
                s += c.norm_sqr();
            }
        }
        s * self.dy
    }
}

// ---------------------------------------------------------------------------
// Harmonic-oscillator coherent state (ħ = m = ω = 1), the standard moving
// Gaussian whose center follows the classical ellipse. Used as the exact
// reference for propagator order checks, since the free packet is stepped
// exactly by the split-operator scheme and shows no dt error at all.
// ---------------------------------------------------------------------------

/// 1D coherent-state factor at time t for initial center q0, momentum p0.
pub fn coherent_factor(u: f64, q0: f64, p0: f64, t: f64) -> Complex64 {
    let (s, c) = t.sin_cos();
    let q = q0 * c + p0 * s;
    let p = p0 * c - q0 * s;
    let phase = p * u - 0.5 * t - 0.5 * (q * p - q0 * p0);
    let mag = (PI).powf(-0.25) * (-(u - q) * (u - q) / 2.0).exp();
    Complex64::from_polar(mag, phase)
}
