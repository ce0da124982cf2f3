//! Bohmian trajectories in the two-level double-well state.
//!
//! The velocity field is sampled on the state grid at the RK4 substep times
//! (the tables ψ_L², ψ_R² and the Wronskian are time-independent, so each
//! instant costs one O(n) combine) and linearly interpolated in y.

use rayon::prelude::*;

use super::dynamics::DEFAULT_RHO_FLOOR_REL;
use super::TwoLevelState;
use crate::error::{Error, Result};
use crate::trajectory::{Termination, Trajectory1D};

struct FieldTables {
    wronskian: Vec<f64>,
    left2: Vec<f64>,
    right2: Vec<f64>,
    /// ħ/2m, current prefactor.
    j_pref: f64,
    omega: f64,
    y_min: f64,
    dy: f64,
    n: usize,
}

impl FieldTables {
    fn new(s: &TwoLevelState) -> Self {
        let n = s.grid.n;
        let mut wronskian = Vec::with_capacity(n);
        let mut left2 = Vec::with_capacity(n);
        let mut right2 = Vec::with_capacity(n);
        for i in 0..n {
            let y = s.grid.y(i);
            let (v0, v1) = (s.psi0(y), s.psi1(y));
            wronskian.push(s.wronskian(y));
            left2.push(0.5 * (v0 + v1).powi(2));
            right2.push(0.5 * (v0 - v1).powi(2));
        }
        FieldTables {
            wronskian,
            left2,
            right2,
            j_pref: s.hbar / (2.0 * s.params.mass),
            omega: s.omega_tunnel,
            y_min: s.grid.y_min,
            dy: s.grid.dy,
            n,
        }
    }

    fn velocity_grid(&self, t: f64) -> VelocityGrid {
        let (sin, cos) = (self.omega * t).sin_cos();
        let (c2, s2) = (cos * cos, sin * sin);
        let current_scale = self.j_pref * 2.0 * sin * cos;
        let mut rho_max = 0.0f64;
        let mut rho = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let r = c2 * self.left2[i] + s2 * self.right2[i];
            rho_max = rho_max.max(r);
            rho.push(r);
        }
        let floor = DEFAULT_RHO_FLOOR_REL * rho_max;
        let mut v = vec![0.0; self.n];
        let mut masked = vec![false; self.n];
        for i in 0..self.n {
            if rho[i] > floor {
                v[i] = current_scale * self.wronskian[i] / rho[i];
            } else {
                masked[i] = true;
            }
        }
        VelocityGrid { v, masked, y_min: self.y_min, dy: self.dy }
    }
}

struct VelocityGrid {
    v: Vec<f64>,
    masked: Vec<bool>,
    y_min: f64,
    dy: f64,
}

enum Sample {
    Velocity(f64),
    Outside,
    Masked,
}

impl VelocityGrid {
    fn sample(&self, y: f64) -> Sample {
        let s = (y - self.y_min) / self.dy;
        if !(0.0..=(self.v.len() - 1) as f64).contains(&s) {
            return Sample::Outside;
        }
        let i = (s as usize).min(self.v.len() - 2);
        let frac = s - i as f64;
        if self.masked[i] || self.masked[i + 1] {
            return Sample::Masked;
        }
        Sample::Velocity(self.v[i] * (1.0 - frac) + self.v[i + 1] * frac)
    }
}

struct SeedState {
    y: f64,
    alive: bool,
    traj: Trajectory1D,
}

/// One RK4 step of dy/dt = v(y, t) over [t, t+h] given field grids at t,
/// t + h/2, t + h.
fn rk4_step(cur: &VelocityGrid, mid: &VelocityGrid, nxt: &VelocityGrid, y: f64, h: f64) -> std::result::Result<f64, Termination> {
    let get = |s: Sample| match s {
        Sample::Velocity(v) => Ok(v),
        Sample::Outside => Err(Termination::LeftDomain),
        Sample::Masked => Err(Termination::EnteredMaskedRegion),
    };
    let k1 = get(cur.sample(y))?;
    let k2 = get(mid.sample(y + 0.5 * h * k1))?;
    let k3 = get(mid.sample(y + 0.5 * h * k2))?;
    let k4 = get(nxt.sample(y + h * k3))?;
    let y_new = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // The combined increment can land outside even when all stages sampled.
    match nxt.sample(y_new) {
        Sample::Outside => Err(Termination::LeftDomain),
        _ => Ok(y_new),
    }
}

/// RK4 trajectories from `seeds` over [0, t_end], recording every step.
pub fn integrate_trajectories_1d(
    s: &TwoLevelState,
    seeds: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Vec<Trajectory1D>> {
    integrate_trajectories_1d_from(s, seeds, 0.0, t_end, dt, 1)
}

/// As [`integrate_trajectories_1d`] but keeping every `record_stride`-th
/// step (plus the first and last), for large ensembles.
pub fn integrate_trajectories_1d_strided(
    s: &TwoLevelState,
    seeds: &[f64],
    t_end: f64,
    dt: f64,
    record_stride: usize,
) -> Result<Vec<Trajectory1D>> {
    integrate_trajectories_1d_from(s, seeds, 0.0, t_end, dt, record_stride)
}

/// Full-control variant: integrate over [t_start, t_end]. A trajectory that
/// leaves the grid or enters the masked region is truncated at its last
/// good point and flagged.
pub fn integrate_trajectories_1d_from(
    s: &TwoLevelState,
    seeds: &[f64],
    t_start: f64,
    t_end: f64,
    dt: f64,
    record_stride: usize,
) -> Result<Vec<Trajectory1D>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive and finite, got {dt}")));
    }
    if !(t_end > t_start) {
        return Err(Error::invalid(format!(
            "end time {t_end} must exceed start time {t_start}"
        )));
    }
    if record_stride == 0 {
        return Err(Error::invalid("record stride must be at least 1".to_string()));
    }
    let (y_lo, y_hi) = (s.grid.y_min, s.grid.y_max());
    for (i, &y) in seeds.iter().enumerate() {
        if !y.is_finite() || y < y_lo || y > y_hi {
            return Err(Error::invalid(format!(
                "seed {i} at y={y} is outside the state grid [{y_lo}, {y_hi}]"
            )));
        }
    }

    let tables = FieldTables::new(s);
    let mut states: Vec<SeedState> = seeds
        .iter()
        .map(|&y| SeedState {
            y,
            alive: true,
            traj: Trajectory1D { t: vec![t_start], y: vec![y], termination: Termination::Completed },
        })
        .collect();

    let n_steps = ((t_end - t_start) / dt).ceil() as usize;
    let mut cur = tables.velocity_grid(t_start);
    for step in 0..n_steps {
        let t = t_start + step as f64 * dt;
        let last = step + 1 == n_steps;
        let h = if last { t_end - t } else { dt };
        let t_next = if last { t_end } else { t_start + (step + 1) as f64 * dt };
        let mid = tables.velocity_grid(t + 0.5 * h);
        let nxt = tables.velocity_grid(t_next);
        let record = last || (step + 1) % record_stride == 0;

        let cur_ref = &cur;
        let mid_ref = &mid;
        let nxt_ref = &nxt;
        states.par_iter_mut().for_each(|st| {
            if !st.alive {
                return;
            }
            match rk4_step(cur_ref, mid_ref, nxt_ref, st.y, h) {
                Ok(y_new) => {
                    st.y = y_new;
                    if record {
                        st.traj.t.push(t_next);
                        st.traj.y.push(y_new);
                    }
                }
                Err(reason) => {
                    st.alive = false;
                    st.traj.termination = reason;
                    // Truncate at the last good point; record it if the
                    // stride skipped it.
                    if *st.traj.t.last().unwrap() < t {
                        st.traj.t.push(t);
                        st.traj.y.push(st.y);
                    }
                }
            }
        });
        cur = nxt;
    }

    Ok(states.into_iter().map(|st| st.traj).collect())
}
