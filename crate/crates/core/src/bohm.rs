//! Guidance-law velocity fields v = J/|ψ|² from wavefunction snapshots,
//! forward/backward RK4 trajectory integration on the interpolated field,
//! and ensemble equivariance diagnostics.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ComplexField2D;
use crate::grid::Grid2D;
use crate::spectral::SpectralTransform2D;
use crate::tdse::{current_density_2d_spectral, SnapshotObserver, SnapshotSeries};
use crate::trajectory::{Termination, Trajectory};
use crate::units::UnitsConfig;

/// Default masking floor relative to the per-frame density maximum.
pub const DEFAULT_RHO_FLOOR_REL: f64 = 1e-12;

/// Velocity field and density of one snapshot. Cells where the density sits
/// below the floor are masked: the velocity there is undefined, not zero.
#[derive(Debug, Clone)]
pub struct VelocityFrame {
    pub vx: Array2<f64>,
    pub vy: Array2<f64>,
    pub density: Array2<f64>,
    pub masked: Array2<bool>,
    /// Absolute floor used for this frame (relative floor × max density).
    pub rho_floor: f64,
}

/// v = J/|ψ|² with spectral-gradient J; cells below `rho_floor_rel` of the
/// peak density are masked instead of divided.
pub fn velocity_from_snapshot(
    psi: &ComplexField2D,
    units: &UnitsConfig,
    rho_floor_rel: f64,
) -> Result<VelocityFrame> {
    let transform = SpectralTransform2D::new(psi.grid);
    velocity_from_snapshot_with(psi, units, rho_floor_rel, &transform)
}

/// As [`velocity_from_snapshot`] but reusing a caller-held FFT plan.
pub fn velocity_from_snapshot_with(
    psi: &ComplexField2D,
    units: &UnitsConfig,
    rho_floor_rel: f64,
    transform: &SpectralTransform2D,
) -> Result<VelocityFrame> {
    if !(rho_floor_rel > 0.0 && rho_floor_rel < 1.0) {
        return Err(Error::invalid(format!(
            "relative density floor must lie in (0, 1), got {rho_floor_rel}"
        )));
    }
    let j = current_density_2d_spectral(psi, units, transform)?;
    let floor = rho_floor_rel * psi.max_abs2();
    let dim = psi.values.dim();
    let mut vx = Array2::zeros(dim);
    let mut vy = Array2::zeros(dim);
    let mut density = Array2::zeros(dim);
    let mut masked = Array2::from_elem(dim, false);
    {
        let (vx, vy) = (vx.as_slice_mut().unwrap(), vy.as_slice_mut().unwrap());
        let (rho, m) = (density.as_slice_mut().unwrap(), masked.as_slice_mut().unwrap());
        let p = psi.values.as_slice().unwrap();
        let (jx, jy) = (j.x.as_slice().unwrap(), j.y.as_slice().unwrap());
        for i in 0..p.len() {
            let r = p[i].norm_sqr();
            rho[i] = r;
            if r < floor {
                m[i] = true;
            } else {
                vx[i] = jx[i] / r;
                vy[i] = jy[i] / r;
            }
        }
    }
    Ok(VelocityFrame { vx, vy, density, masked, rho_floor: floor })
}

/// Time-stamped stack of velocity frames on one grid.
#[derive(Debug, Clone)]
pub struct VelocityFieldSeries {
    pub grid: Grid2D,
    pub timestamps: Vec<f64>,
    pub frames: Vec<VelocityFrame>,
}

impl VelocityFieldSeries {
    pub fn new(grid: Grid2D, timestamps: Vec<f64>, frames: Vec<VelocityFrame>) -> Result<Self> {
        if timestamps.is_empty() || timestamps.len() != frames.len() {
            return Err(Error::invalid(format!(
                "series needs matching nonempty timestamps/frames, got {}/{}",
                timestamps.len(),
                frames.len()
            )));
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("series timestamps must be strictly increasing".to_string()));
        }
        let dim = (grid.nx, grid.ny);
        if frames.iter().any(|f| f.vx.dim() != dim || f.vy.dim() != dim || f.density.dim() != dim)
        {
            return Err(Error::invalid("all frames must live on the series grid".to_string()));
        }
        Ok(VelocityFieldSeries { grid, timestamps, frames })
    }

    pub fn from_snapshots(
        series: &SnapshotSeries,
        units: &UnitsConfig,
        rho_floor_rel: f64,
    ) -> Result<Self> {
        let first = series
            .frames
            .first()
            .ok_or_else(|| Error::invalid("empty snapshot series".to_string()))?;
        let transform = SpectralTransform2D::new(first.field.grid);
        let mut frames = Vec::with_capacity(series.len());
        for snap in &series.frames {
            frames.push(velocity_from_snapshot_with(&snap.field, units, rho_floor_rel, &transform)?);
        }
        VelocityFieldSeries::new(first.field.grid, series.times(), frames)
    }

    pub fn t_start(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.timestamps.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Smallest frame spacing / 10: interpolation in time, not the RK4
    /// stepper, dominates the error, so the default step resolves frames
    /// comfortably.
    pub fn default_dt_traj(&self) -> f64 {
        let min_gap = self
            .timestamps
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if min_gap.is_finite() { min_gap / 10.0 } else { 1e-3 }
    }

    /// Bracketing frame indices and the linear weight of the later one.
    /// Tolerates one part in 1e9 of the span beyond either end.
    fn bracket(&self, t: f64) -> Option<(usize, usize, f64)> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-9 * (t1 - t0).max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return None;
        }
        if self.timestamps.len() == 1 {
            return Some((0, 0, 0.0));
        }
        let t = t.clamp(t0, t1);
        let hi = self
            .timestamps
            .partition_point(|&ts| ts < t)
            .clamp(1, self.timestamps.len() - 1);
        let lo = hi - 1;
        let w = (t - self.timestamps[lo]) / (self.timestamps[hi] - self.timestamps[lo]);
        Some((lo, hi, w))
    }

    /// Density linearly interpolated between bracketing frames.
    pub fn density_at(&self, t: f64) -> Result<Array2<f64>> {
        let (lo, hi, w) = self
            .bracket(t)
            .ok_or_else(|| Error::OutOfRange(format!("t = {t} outside series time range")))?;
        let a = &self.frames[lo].density;
        if lo == hi || w == 0.0 {
            return Ok(a.clone());
        }
        let b = &self.frames[hi].density;
        Ok(a * (1.0 - w) + b * w)
    }
}

/// Outcome of one velocity query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleOutcome {
    Velocity { vx: f64, vy: f64 },
    /// A contributing cell sits below the density floor.
    Masked,
    /// The point (or time) lies outside the sampled domain.
    Outside,
}

/// Anything a trajectory can be integrated through: the snapshot-series
/// interpolant in production, closed-form fields in convergence tests.
pub trait VelocitySampler: Sync {
    fn sample(&self, t: f64, x: f64, y: f64) -> SampleOutcome;
}

fn bilinear(frame: &VelocityFrame, grid: &Grid2D, x: f64, y: f64) -> SampleOutcome {
    let sx = (x - grid.x0_min) / grid.dx;
    let sy = (y - grid.y0_min) / grid.dy;
    let (mx, my) = ((grid.nx - 1) as f64, (grid.ny - 1) as f64);
    if !(0.0..=mx).contains(&sx) || !(0.0..=my).contains(&sy) {
        return SampleOutcome::Outside;
    }
    let i0 = (sx as usize).min(grid.nx - 2);
    let j0 = (sy as usize).min(grid.ny - 2);
    let (fx, fy) = (sx - i0 as f64, sy - j0 as f64);
    let nodes = [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)];
    if nodes.iter().any(|&n| frame.masked[n]) {
        return SampleOutcome::Masked;
    }
    let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (n, wt) in nodes.iter().zip(w) {
        vx += wt * frame.vx[*n];
        vy += wt * frame.vy[*n];
    }
    SampleOutcome::Velocity { vx, vy }
}

impl VelocitySampler for VelocityFieldSeries {
    fn sample(&self, t: f64, x: f64, y: f64) -> SampleOutcome {
        let Some((lo, hi, w)) = self.bracket(t) else {
            return SampleOutcome::Outside;
        };
        let a = bilinear(&self.frames[lo], &self.grid, x, y);
        if lo == hi || w == 0.0 {
            return a;
        }
        let b = bilinear(&self.frames[hi], &self.grid, x, y);
        match (a, b) {
            (
                SampleOutcome::Velocity { vx: ax, vy: ay },
                SampleOutcome::Velocity { vx: bx, vy: by },
            ) => SampleOutcome::Velocity {
                vx: ax + w * (bx - ax),
                vy: ay + w * (by - ay),
            },
            (SampleOutcome::Outside, _) | (_, SampleOutcome::Outside) => SampleOutcome::Outside,
            _ => SampleOutcome::Masked,
        }
    }
}

/// Two bracketing frames blended linearly in time; same outcome rules as
/// the series sampler.
struct FrameBlend<'a> {
    grid: &'a Grid2D,
    t0: f64,
    t1: f64,
    f0: &'a VelocityFrame,
    f1: &'a VelocityFrame,
}

impl VelocitySampler for FrameBlend<'_> {
    fn sample(&self, t: f64, x: f64, y: f64) -> SampleOutcome {
        let a = bilinear(self.f0, self.grid, x, y);
        let w = if self.t1 > self.t0 {
            ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if w == 0.0 {
            return a;
        }
        let b = bilinear(self.f1, self.grid, x, y);
        match (a, b) {
            (
                SampleOutcome::Velocity { vx: ax, vy: ay },
                SampleOutcome::Velocity { vx: bx, vy: by },
            ) => SampleOutcome::Velocity {
                vx: ax + w * (bx - ax),
                vy: ay + w * (by - ay),
            },
            (SampleOutcome::Outside, _) | (_, SampleOutcome::Outside) => SampleOutcome::Outside,
            _ => SampleOutcome::Masked,
        }
    }
}

/// Bilinear-in-space, linear-in-time velocity at (t, x, y). Out-of-range
/// queries are errors; masked cells are an explicit non-error outcome.
pub fn sample_velocity(
    series: &VelocityFieldSeries,
    t: f64,
    x: f64,
    y: f64,
) -> Result<SampleOutcome> {
    match series.sample(t, x, y) {
        SampleOutcome::Outside => Err(Error::OutOfRange(format!(
            "query (t={t}, x={x}, y={y}) outside the sampled domain"
        ))),
        v => Ok(v),
    }
}

fn stage(s: &impl VelocitySampler, t: f64, x: f64, y: f64) -> std::result::Result<(f64, f64), Termination> {
    match s.sample(t, x, y) {
        SampleOutcome::Velocity { vx, vy } => Ok((vx, vy)),
        SampleOutcome::Masked => Err(Termination::EnteredMaskedRegion),
        SampleOutcome::Outside => Err(Termination::LeftDomain),
    }
}

/// One RK4 step of dr/dt = v(r, t) over signed step `h`. The landing point
/// is probed so that leaving the domain terminates immediately; landing on
/// a masked cell is allowed here and terminates on the next step's first
/// stage (the point itself is still a valid record).
fn rk4_step(
    s: &impl VelocitySampler,
    t: f64,
    x: f64,
    y: f64,
    h: f64,
) -> std::result::Result<(f64, f64), Termination> {
    let (k1x, k1y) = stage(s, t, x, y)?;
    let th = t + 0.5 * h;
    let (k2x, k2y) = stage(s, th, x + 0.5 * h * k1x, y + 0.5 * h * k1y)?;
    let (k3x, k3y) = stage(s, th, x + 0.5 * h * k2x, y + 0.5 * h * k2y)?;
    let (k4x, k4y) = stage(s, t + h, x + h * k3x, y + h * k3y)?;
    let nx = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    let ny = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
    if let SampleOutcome::Outside = s.sample(t + h, nx, ny) {
        return Err(Termination::LeftDomain);
    }
    Ok((nx, ny))
}

/// RK4 integration of one seed through any sampler from `t_from` to `t_to`
/// (either direction), recording every accepted step. Samples are returned
/// with strictly increasing `t` regardless of direction.
pub fn integrate_with_sampler(
    sampler: &impl VelocitySampler,
    seed: (f64, f64),
    t_from: f64,
    t_to: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt_traj must be positive, got {dt}")));
    }
    if !(seed.0.is_finite() && seed.1.is_finite() && t_from.is_finite() && t_to.is_finite()) {
        return Err(Error::invalid("seed and time bounds must be finite".to_string()));
    }
    if t_to == t_from {
        return Err(Error::invalid("integration window is empty".to_string()));
    }
    let span = t_to - t_from;
    let h = dt.copysign(span);
    let n_steps = (span.abs() / dt).ceil() as usize;
    let (mut x, mut y) = seed;
    let mut traj = Trajectory {
        t: Vec::with_capacity(n_steps + 1),
        x: Vec::with_capacity(n_steps + 1),
        y: Vec::with_capacity(n_steps + 1),
        termination: Termination::Completed,
    };
    traj.t.push(t_from);
    traj.x.push(x);
    traj.y.push(y);
    for step in 0..n_steps {
        let t = t_from + step as f64 * h;
        let t_next = if step + 1 == n_steps { t_to } else { t_from + (step + 1) as f64 * h };
        match rk4_step(sampler, t, x, y, t_next - t) {
            Ok((nx, ny)) => {
                (x, y) = (nx, ny);
                traj.t.push(t_next);
                traj.x.push(x);
                traj.y.push(y);
            }
            Err(reason) => {
                traj.termination = reason;
                break;
            }
        }
    }
    if span < 0.0 {
        traj.t.reverse();
        traj.x.reverse();
        traj.y.reverse();
    }
    Ok(traj)
}

fn check_window(series: &VelocityFieldSeries, lo: f64, hi: f64) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::invalid(format!("need t_start < t_end, got [{lo}, {hi}]")));
    }
    let slack = 1e-9 * (series.t_end() - series.t_start()).max(1.0);
    if lo < series.t_start() - slack || hi > series.t_end() + slack {
        return Err(Error::OutOfRange(format!(
            "window [{lo}, {hi}] outside series range [{}, {}]",
            series.t_start(),
            series.t_end()
        )));
    }
    Ok(())
}

/// Forward trajectory from `seed` over [t_start, t_end].
pub fn integrate_forward(
    series: &VelocityFieldSeries,
    seed: (f64, f64),
    t_start: f64,
    t_end: f64,
    dt_traj: f64,
) -> Result<Trajectory> {
    check_window(series, t_start, t_end)?;
    integrate_with_sampler(series, seed, t_start, t_end, dt_traj)
}

/// Backward trajectory: starts at `seed` at `t_end` and integrates down to
/// `t_start`. The returned samples run forward in time, ending at the seed.
pub fn integrate_backward(
    series: &VelocityFieldSeries,
    seed: (f64, f64),
    t_end: f64,
    t_start: f64,
    dt_traj: f64,
) -> Result<Trajectory> {
    check_window(series, t_start, t_end)?;
    integrate_with_sampler(series, seed, t_end, t_start, dt_traj)
}

/// Independent trajectories for many seeds, in parallel, same window.
pub fn integrate_forward_batch(
    series: &VelocityFieldSeries,
    seeds: &[(f64, f64)],
    t_start: f64,
    t_end: f64,
    dt_traj: f64,
) -> Result<Vec<Trajectory>> {
    check_window(series, t_start, t_end)?;
    seeds
        .par_iter()
        .map(|&s| integrate_with_sampler(series, s, t_start, t_end, dt_traj))
        .collect()
}

pub fn integrate_backward_batch(
    series: &VelocityFieldSeries,
    seeds: &[(f64, f64)],
    t_end: f64,
    t_start: f64,
    dt_traj: f64,
) -> Result<Vec<Trajectory>> {
    check_window(series, t_start, t_end)?;
    seeds
        .par_iter()
        .map(|&s| integrate_with_sampler(series, s, t_end, t_start, dt_traj))
        .collect()
}

/// Builds the velocity series on the fly during propagation, so the full
/// wavefunction history never needs to stay in memory.
pub struct VelocitySeriesBuilder {
    units: UnitsConfig,
    rho_floor_rel: f64,
    transform: Option<SpectralTransform2D>,
    grid: Option<Grid2D>,
    timestamps: Vec<f64>,
    frames: Vec<VelocityFrame>,
}

impl VelocitySeriesBuilder {
    pub fn new(units: UnitsConfig, rho_floor_rel: f64) -> Self {
        VelocitySeriesBuilder {
            units,
            rho_floor_rel,
            transform: None,
            grid: None,
            timestamps: Vec::new(),
            frames: Vec::new(),
        }
    }

    pub fn finish(self) -> Result<VelocityFieldSeries> {
        let grid = self
            .grid
            .ok_or_else(|| Error::invalid("no snapshots were observed".to_string()))?;
        VelocityFieldSeries::new(grid, self.timestamps, self.frames)
    }
}

impl SnapshotObserver for VelocitySeriesBuilder {
    fn observe(&mut self, _step: usize, t: f64, psi: &ComplexField2D) -> Result<()> {
        if self.grid.is_none() {
            self.grid = Some(psi.grid);
            self.transform = Some(SpectralTransform2D::new(psi.grid));
        }
        let frame = velocity_from_snapshot_with(
            psi,
            &self.units,
            self.rho_floor_rel,
            self.transform.as_ref().unwrap(),
        )?;
        self.timestamps.push(t);
        self.frames.push(frame);
        Ok(())
    }
}

enum SeedSpec {
    Explicit(Vec<(f64, f64)>),
    SampleDensity { n: usize, rng_seed: u64 },
}

/// Advances a particle ensemble during propagation itself: one RK4 step per
/// observed snapshot pair, blending the two velocity frames linearly in
/// time. Memory stays at two frames regardless of run length, and the
/// temporal resolution of the guidance field equals the observer cadence,
/// which a stored snapshot series cannot afford at fine strides.
pub struct EnsembleAdvector {
    units: UnitsConfig,
    rho_floor_rel: f64,
    seeds: SeedSpec,
    halt_at: Option<f64>,
    record_paths: bool,
    transform: Option<SpectralTransform2D>,
    grid: Option<Grid2D>,
    prev: Option<(f64, VelocityFrame)>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    term: Vec<Option<Termination>>,
    paths: Vec<Trajectory>,
    halt_density: Option<Array2<f64>>,
    t_reached: f64,
}

impl EnsembleAdvector {
    /// Ensemble starting from the given positions at the first snapshot.
    pub fn from_seeds(units: UnitsConfig, rho_floor_rel: f64, seeds: Vec<(f64, f64)>) -> Self {
        Self::build(units, rho_floor_rel, SeedSpec::Explicit(seeds))
    }

    /// Ensemble of `n` positions drawn from the first snapshot's density.
    pub fn sampling_density(units: UnitsConfig, rho_floor_rel: f64, n: usize, rng_seed: u64) -> Self {
        Self::build(units, rho_floor_rel, SeedSpec::SampleDensity { n, rng_seed })
    }

    fn build(units: UnitsConfig, rho_floor_rel: f64, seeds: SeedSpec) -> Self {
        EnsembleAdvector {
            units,
            rho_floor_rel,
            seeds,
            halt_at: None,
            record_paths: false,
            transform: None,
            grid: None,
            prev: None,
            xs: Vec::new(),
            ys: Vec::new(),
            term: Vec::new(),
            paths: Vec::new(),
            halt_density: None,
            t_reached: f64::NAN,
        }
    }

    /// Freeze the ensemble once `t` is reached; later snapshots only feed
    /// the reference density capture.
    pub fn halt_at(mut self, t: f64) -> Self {
        self.halt_at = Some(t);
        self
    }

    /// Keep the full per-particle path instead of only the endpoint.
    pub fn recording_paths(mut self) -> Self {
        self.record_paths = true;
        self
    }

    fn advance_limit(&self) -> f64 {
        self.halt_at.unwrap_or(f64::INFINITY)
    }

    /// Endpoint and termination per particle, in seed order. Particles
    /// still live at the halt (or final) time report `Completed`.
    pub fn finals(&self) -> Vec<(f64, f64, Termination)> {
        (0..self.xs.len())
            .map(|i| (self.xs[i], self.ys[i], self.term[i].unwrap_or(Termination::Completed)))
            .collect()
    }

    /// Recorded paths; empty unless [`Self::recording_paths`] was set.
    pub fn paths(&self) -> &[Trajectory] {
        &self.paths
    }

    /// Born-rule comparison of the surviving ensemble against the density
    /// at the halt time (or the last observed snapshot without a halt).
    pub fn report(&self) -> Result<EquivarianceReport> {
        let grid = self.grid.ok_or_else(|| Error::invalid("no snapshots were observed".to_string()))?;
        let rho = match (&self.halt_density, &self.prev) {
            (Some(d), _) => d,
            (None, Some((_, f))) => &f.density,
            (None, None) => return Err(Error::invalid("no snapshots were observed".to_string())),
        };
        let finals: Vec<std::result::Result<(f64, f64), Termination>> = (0..self.xs.len())
            .map(|i| match self.term[i] {
                None => Ok((self.xs[i], self.ys[i])),
                Some(reason) => Err(reason),
            })
            .collect();
        let t_check = self.advance_limit().min(self.t_reached);
        Ok(ensemble_report(&finals, rho, &grid, t_check))
    }
}

impl SnapshotObserver for EnsembleAdvector {
    fn observe(&mut self, _step: usize, t: f64, psi: &ComplexField2D) -> Result<()> {
        if self.grid.is_none() {
            self.grid = Some(psi.grid);
            self.transform = Some(SpectralTransform2D::new(psi.grid));
        }
        let grid = self.grid.as_ref().unwrap();
        let frame = velocity_from_snapshot_with(
            psi,
            &self.units,
            self.rho_floor_rel,
            self.transform.as_ref().unwrap(),
        )?;

        let prev = self.prev.take();
        match prev {
            None => {
                let seeds = match &self.seeds {
                    SeedSpec::Explicit(s) => s.clone(),
                    SeedSpec::SampleDensity { n, rng_seed } => {
                        sample_positions(&frame.density, &frame.masked, grid, *n, *rng_seed)
                    }
                };
                for &(x, y) in &seeds {
                    self.xs.push(x);
                    self.ys.push(y);
                    self.term.push(match bilinear(&frame, grid, x, y) {
                        SampleOutcome::Velocity { .. } => None,
                        SampleOutcome::Masked => Some(Termination::EnteredMaskedRegion),
                        SampleOutcome::Outside => Some(Termination::LeftDomain),
                    });
                    if self.record_paths {
                        self.paths.push(Trajectory {
                            t: vec![t],
                            x: vec![x],
                            y: vec![y],
                            termination: Termination::Completed,
                        });
                    }
                }
                if self.record_paths {
                    for (p, reason) in self.paths.iter_mut().zip(&self.term) {
                        if let Some(r) = reason {
                            p.termination = *r;
                        }
                    }
                }
            }
            Some((t0, f0)) => {
                let limit = self.advance_limit();
                if t0 < limit && t > t0 {
                    let t_eff = t.min(limit);
                    let blend = FrameBlend { grid, t0, t1: t, f0: &f0, f1: &frame };
                    // Sub-cell displacement cap: near quasi-nodes v = J/rho
                    // spikes and a full-interval step would overshoot.
                    let cap = 0.45 * grid.dx.min(grid.dy);
                    let h_floor = (t_eff - t0) * 1e-6;
                    for i in 0..self.xs.len() {
                        if self.term[i].is_some() {
                            continue;
                        }
                        let (mut x, mut y) = (self.xs[i], self.ys[i]);
                        let mut tc = t0;
                        let step_result = loop {
                            if tc >= t_eff {
                                break Ok((x, y));
                            }
                            let speed = match stage(&blend, tc, x, y) {
                                Ok((vx, vy)) => vx.hypot(vy),
                                Err(reason) => break Err(reason),
                            };
                            let h_cap = if speed > 0.0 { cap / speed } else { f64::INFINITY };
                            let h = (t_eff - tc).min(h_cap.max(h_floor));
                            match rk4_step(&blend, tc, x, y, h) {
                                Ok((nx, ny)) => {
                                    (x, y) = (nx, ny);
                                    tc += h;
                                }
                                Err(reason) => break Err(reason),
                            }
                        };
                        match step_result {
                            Ok((nx, ny)) => {
                                self.xs[i] = nx;
                                self.ys[i] = ny;
                                if self.record_paths {
                                    self.paths[i].t.push(t_eff);
                                    self.paths[i].x.push(nx);
                                    self.paths[i].y.push(ny);
                                }
                            }
                            Err(reason) => {
                                self.term[i] = Some(reason);
                                if self.record_paths {
                                    self.paths[i].termination = reason;
                                }
                            }
                        }
                    }
                }
                if self.halt_density.is_none() && t >= limit {
                    let w = if t > t0 { ((limit - t0) / (t - t0)).clamp(0.0, 1.0) } else { 1.0 };
                    let mut d = f0.density.clone();
                    d.zip_mut_with(&frame.density, |a, &b| *a = *a * (1.0 - w) + w * b);
                    self.halt_density = Some(d);
                }
            }
        }
        self.t_reached = t;
        self.prev = Some((t, frame));
        Ok(())
    }
}

/// Kolmogorov-Smirnov distance between sorted samples and a model CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    let mut d: f64 = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        let f = cdf(s);
        d = d.max((f - i as f64 / n as f64).abs());
        d = d.max(((i + 1) as f64 / n as f64 - f).abs());
    }
    d
}

/// Piecewise-linear CDF of a 1D histogram whose cell `i` spans
/// `start + i·width ± width/2`.
struct MarginalCdf {
    start: f64,
    width: f64,
    cum: Vec<f64>,
}

impl MarginalCdf {
    fn new(weights: &[f64], center0: f64, width: f64) -> Self {
        let mut cum = Vec::with_capacity(weights.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for w in weights {
            acc += w.max(0.0);
            cum.push(acc);
        }
        let total = acc.max(f64::MIN_POSITIVE);
        for c in &mut cum {
            *c /= total;
        }
        MarginalCdf { start: center0 - 0.5 * width, width, cum }
    }

    fn eval(&self, v: f64) -> f64 {
        let s = (v - self.start) / self.width;
        if s <= 0.0 {
            return 0.0;
        }
        let n = self.cum.len() - 1;
        if s >= n as f64 {
            return 1.0;
        }
        let i = s as usize;
        let f = s - i as f64;
        self.cum[i] + f * (self.cum[i + 1] - self.cum[i])
    }
}

/// Summary of an ensemble Born-rule check.
#[derive(Debug, Clone, Copy)]
pub struct EquivarianceReport {
    pub n: usize,
    pub n_completed: usize,
    pub n_masked: usize,
    pub n_left_domain: usize,
    /// KS distance between the surviving ensemble's x (resp. y) marginal
    /// and the density marginal at `t_check`.
    pub ks_x: f64,
    pub ks_y: f64,
    pub chi2: f64,
    /// Coarse bins retained for chi-square (expected count >= 5) minus one.
    pub chi2_dof: usize,
    pub t_check: f64,
}

/// Draws a deterministic |ψ(0)|²-distributed position sample by inverting
/// the flattened cell CDF and jittering uniformly inside the chosen cell.
fn sample_positions(
    density: &Array2<f64>,
    masked: &Array2<bool>,
    grid: &Grid2D,
    n: usize,
    rng_seed: u64,
) -> Vec<(f64, f64)> {
    let d = density.as_slice().unwrap();
    let m = masked.as_slice().unwrap();
    let mut cum = Vec::with_capacity(d.len());
    let mut acc = 0.0;
    for i in 0..d.len() {
        // Masked cells get no weight so every seed starts where the
        // velocity is defined.
        if !m[i] {
            acc += d[i].max(0.0);
        }
        cum.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let ny = grid.ny;
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let cell = cum.partition_point(|&c| c < u).min(cum.len() - 1);
            let (ix, iy) = (cell / ny, cell % ny);
            let jx: f64 = rng.random::<f64>() - 0.5;
            let jy: f64 = rng.random::<f64>() - 0.5;
            (
                (grid.x(ix) + jx * grid.dx).clamp(grid.x0_min, grid.x_max()),
                (grid.y(iy) + jy * grid.dy).clamp(grid.y0_min, grid.y_max()),
            )
        })
        .collect()
}

/// Deterministic quantile-grid draw from a density raster: seed k sits at
/// the cell containing quantile (k+1/2)/n of the flattened cell CDF.
pub fn quantile_seeds(density: &Array2<f64>, grid: &Grid2D, n: usize) -> Vec<(f64, f64)> {
    let d = density.as_slice().unwrap();
    let mut cum = Vec::with_capacity(d.len());
    let mut acc = 0.0;
    for v in d {
        acc += v.max(0.0);
        cum.push(acc);
    }
    let ny = grid.ny;
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / n as f64 * acc;
            let cell = cum.partition_point(|&c| c < u).min(cum.len() - 1);
            (grid.x(cell / ny), grid.y(cell % ny))
        })
        .collect()
}

/// `per_station` seeds strictly inside (y_lo, y_hi) at each x station.
pub fn spaced_seeds(
    x_stations: &[f64],
    y_lo: f64,
    y_hi: f64,
    per_station: usize,
) -> Vec<(f64, f64)> {
    let step = (y_hi - y_lo) / (per_station as f64 + 1.0);
    x_stations
        .iter()
        .flat_map(|&x| (1..=per_station).map(move |j| (x, y_lo + j as f64 * step)))
        .collect()
}

/// Samples `n_particles` from the first frame's density, advects them all
/// to `t_check`, and compares the surviving ensemble to the density at
/// `t_check` through marginal KS distances and a 16×16 coarse chi-square.
pub fn equivariance_test(
    series: &VelocityFieldSeries,
    n_particles: usize,
    t_check: f64,
    rng_seed: u64,
) -> Result<EquivarianceReport> {
    if n_particles == 0 {
        return Err(Error::invalid("need at least one particle".to_string()));
    }
    let first = &series.frames[0];
    let t0 = series.t_start();
    if series.bracket(t_check).is_none() || t_check < t0 {
        return Err(Error::OutOfRange(format!(
            "t_check = {t_check} outside series range [{t0}, {}]",
            series.t_end()
        )));
    }
    let seeds = sample_positions(&first.density, &first.masked, &series.grid, n_particles, rng_seed);

    let dt = series.default_dt_traj();
    let finals: Vec<std::result::Result<(f64, f64), Termination>> = if t_check > t0 {
        seeds
            .par_iter()
            .map(|&s| {
                let tr = integrate_with_sampler(series, s, t0, t_check, dt)
                    .expect("window validated above");
                match tr.termination {
                    Termination::Completed => {
                        let (_, x, y) = tr.last().unwrap();
                        Ok((x, y))
                    }
                    other => Err(other),
                }
            })
            .collect()
    } else {
        seeds.iter().map(|&s| Ok(s)).collect()
    };

    let rho = series.density_at(t_check)?;
    Ok(ensemble_report(&finals, &rho, &series.grid, t_check))
}

/// KS and coarse chi-square comparison of surviving ensemble positions
/// against a density raster.
fn ensemble_report(
    finals: &[std::result::Result<(f64, f64), Termination>],
    rho: &Array2<f64>,
    g: &Grid2D,
    t_check: f64,
) -> EquivarianceReport {
    let mut xs = Vec::with_capacity(finals.len());
    let mut ys = Vec::with_capacity(finals.len());
    let (mut n_masked, mut n_left) = (0usize, 0usize);
    for f in finals {
        match f {
            Ok((x, y)) => {
                xs.push(*x);
                ys.push(*y);
            }
            Err(Termination::EnteredMaskedRegion) => n_masked += 1,
            Err(_) => n_left += 1,
        }
    }
    xs.sort_unstable_by(|a, b| a.total_cmp(b));
    ys.sort_unstable_by(|a, b| a.total_cmp(b));
    let n_completed = xs.len();
    let marg_x: Vec<f64> = (0..g.nx).map(|ix| (0..g.ny).map(|iy| rho[(ix, iy)]).sum()).collect();
    let marg_y: Vec<f64> = (0..g.ny).map(|iy| (0..g.nx).map(|ix| rho[(ix, iy)]).sum()).collect();
    let cdf_x = MarginalCdf::new(&marg_x, g.x0_min, g.dx);
    let cdf_y = MarginalCdf::new(&marg_y, g.y0_min, g.dy);
    let ks_x = ks_statistic(&xs, |v| cdf_x.eval(v));
    let ks_y = ks_statistic(&ys, |v| cdf_y.eval(v));

    // Coarse 16×16 chi-square over the node bounding box; bins with
    // expected count under 5 are dropped (sparse-bin rule).
    const NB: usize = 16;
    let (wx, wy) = (g.lx() / NB as f64, g.ly() / NB as f64);
    let mut observed = [[0f64; NB]; NB];
    for &(x, y) in finals.iter().flatten() {
        let bx = (((x - g.x0_min) / wx) as usize).min(NB - 1);
        let by = (((y - g.y0_min) / wy) as usize).min(NB - 1);
        observed[bx][by] += 1.0;
    }
    let mut expected = [[0f64; NB]; NB];
    let mut total_mass = 0.0;
    for ix in 0..g.nx {
        let bx = (((g.x(ix) - g.x0_min) / wx) as usize).min(NB - 1);
        for iy in 0..g.ny {
            let by = (((g.y(iy) - g.y0_min) / wy) as usize).min(NB - 1);
            let m = rho[(ix, iy)];
            expected[bx][by] += m;
            total_mass += m;
        }
    }
    let mut chi2 = 0.0;
    let mut kept = 0usize;
    for bx in 0..NB {
        for by in 0..NB {
            let e = expected[bx][by] / total_mass * n_completed as f64;
            if e >= 5.0 {
                let d = observed[bx][by] - e;
                chi2 += d * d / e;
                kept += 1;
            }
        }
    }

    EquivarianceReport {
        n: finals.len(),
        n_completed,
        n_masked,
        n_left_domain: n_left,
        ks_x,
        ks_y,
        chi2,
        chi2_dof: kept.saturating_sub(1),
        t_check,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::tdse::{initial_wavepacket, WavepacketParams};
    use num_complex::Complex64;

    fn gaussian_grid() -> Grid2D {
        make_grid(96, 64, 24.0, 16.0, -12.0, -8.0).unwrap()
    }

    fn constant_series(v1: (f64, f64), v2: (f64, f64), t0: f64, t1: f64) -> VelocityFieldSeries {
        let grid = gaussian_grid();
        let dim = (grid.nx, grid.ny);
        let frame = |v: (f64, f64)| VelocityFrame {
            vx: Array2::from_elem(dim, v.0),
            vy: Array2::from_elem(dim, v.1),
            density: Array2::from_elem(dim, 1.0),
            masked: Array2::from_elem(dim, false),
            rho_floor: 1e-12,
        };
        VelocityFieldSeries::new(grid, vec![t0, t1], vec![frame(v1), frame(v2)]).unwrap()
    }

    #[test]
    fn real_field_velocity_vanishes_on_unmasked_cells() {
        // Spectral-gradient roundoff puts ~1e-16·k/|ψ| into v, so the floor
        // sets the bound: 1e-8 of peak density keeps it under 1e-10.
        let grid = gaussian_grid();
        let psi = ComplexField2D::from_fn(grid, |x, y| {
            Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0)
        });
        let f = velocity_from_snapshot(&psi, &UnitsConfig::default(), 1e-8).unwrap();
        let mut n_unmasked = 0;
        for ((m, vx), vy) in f.masked.iter().zip(f.vx.iter()).zip(f.vy.iter()) {
            if !m {
                assert!(vx.abs() < 1e-10 && vy.abs() < 1e-10, "v = ({vx}, {vy})");
                n_unmasked += 1;
            }
        }
        assert!(n_unmasked > 100);
        assert!(f.masked.iter().any(|&m| m), "far tails must be masked");
    }

    #[test]
    fn plane_wave_velocity_is_hbar_k_over_m() {
        let grid = gaussian_grid();
        let (kx, ky) = (grid.kx(2), grid.ky(3));
        let psi =
            ComplexField2D::from_fn(grid, |x, y| Complex64::from_polar(0.6, kx * x + ky * y));
        let units = UnitsConfig::new(1.0, 1.7).unwrap();
        let f = velocity_from_snapshot(&psi, &units, 1e-12).unwrap();
        assert!(f.masked.iter().all(|&m| !m));
        for (vx, vy) in f.vx.iter().zip(f.vy.iter()) {
            assert!((vx - kx / 1.7).abs() < 1e-8);
            assert!((vy - ky / 1.7).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_packet_velocity_is_group_velocity() {
        let grid = gaussian_grid();
        let w = WavepacketParams { x0: -2.0, y0: 0.0, sigma: 0.8, p0: 3.0 };
        let psi = initial_wavepacket(&w, grid, &UnitsConfig::default()).unwrap();
        let f = velocity_from_snapshot(&psi, &UnitsConfig::default(), 1e-6).unwrap();
        for ((m, vx), vy) in f.masked.iter().zip(f.vx.iter()).zip(f.vy.iter()) {
            if !m {
                assert!((vx - 3.0).abs() < 1e-8, "vx = {vx}");
                assert!(vy.abs() < 1e-8, "vy = {vy}");
            }
        }
    }

    #[test]
    fn sampling_at_nodes_and_frames_is_exact() {
        let s = constant_series((1.5, -0.5), (3.5, 0.5), 0.0, 2.0);
        let g = s.grid;
        match sample_velocity(&s, 0.0, g.x(10), g.y(7)).unwrap() {
            SampleOutcome::Velocity { vx, vy } => {
                assert_eq!(vx, 1.5);
                assert_eq!(vy, -0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Midpoint in time between constant frames averages them.
        match sample_velocity(&s, 1.0, 0.3, 0.4).unwrap() {
            SampleOutcome::Velocity { vx, vy } => {
                assert!((vx - 2.5).abs() < 1e-14);
                assert!((vy - 0.0).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_queries_error() {
        let s = constant_series((1.0, 0.0), (1.0, 0.0), 0.0, 1.0);
        assert!(sample_velocity(&s, -0.5, 0.0, 0.0).is_err());
        assert!(sample_velocity(&s, 1.5, 0.0, 0.0).is_err());
        assert!(sample_velocity(&s, 0.5, 1e4, 0.0).is_err());
    }

    #[test]
    fn masked_cells_report_masked() {
        let grid = gaussian_grid();
        let dim = (grid.nx, grid.ny);
        let mut masked = Array2::from_elem(dim, false);
        masked[(40, 30)] = true;
        let frame = VelocityFrame {
            vx: Array2::zeros(dim),
            vy: Array2::zeros(dim),
            density: Array2::from_elem(dim, 1.0),
            masked,
            rho_floor: 1e-12,
        };
        let s = VelocityFieldSeries::new(grid, vec![0.0], vec![frame]).unwrap();
        match sample_velocity(&s, 0.0, grid.x(40) + 0.3 * grid.dx, grid.y(30)).unwrap() {
            SampleOutcome::Masked => {}
            other => panic!("expected masked, got {other:?}"),
        }
        // Far from the masked node everything is fine.
        assert!(matches!(
            sample_velocity(&s, 0.0, grid.x(5), grid.y(5)).unwrap(),
            SampleOutcome::Velocity { .. }
        ));
    }

    /// v = (x sin t, 0) with exact spatial interpolation: halving the frame
    /// stride must cut the worst time-interpolation error at least in half.
    #[test]
    fn halving_frame_stride_shrinks_interpolation_error() {
        let grid = gaussian_grid();
        let dim = (grid.nx, grid.ny);
        let build = |n_frames: usize| {
            let mut ts = Vec::new();
            let mut frames = Vec::new();
            for i in 0..n_frames {
                let t = i as f64 / (n_frames - 1) as f64 * 2.0;
                ts.push(t);
                frames.push(VelocityFrame {
                    vx: Array2::from_shape_fn(dim, |(ix, _)| grid.x(ix) * t.sin()),
                    vy: Array2::zeros(dim),
                    density: Array2::from_elem(dim, 1.0),
                    masked: Array2::from_elem(dim, false),
                    rho_floor: 1e-12,
                });
            }
            VelocityFieldSeries::new(grid, ts, frames).unwrap()
        };
        let max_err = |s: &VelocityFieldSeries| {
            let mut worst = 0.0f64;
            for k in 0..200 {
                let t = k as f64 / 199.0 * 2.0;
                let (x, y) = (3.25, 1.1);
                if let SampleOutcome::Velocity { vx, .. } = s.sample(t, x, y) {
                    worst = worst.max((vx - x * t.sin()).abs());
                }
            }
            worst
        };
        let coarse = max_err(&build(11));
        let fine = max_err(&build(21));
        assert!(fine < coarse / 2.0, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn constant_field_gives_straight_line() {
        let s = constant_series((0.8, -0.6), (0.8, -0.6), 0.0, 4.0);
        let tr = integrate_forward(&s, (0.0, 0.0), 0.0, 4.0, 0.05).unwrap();
        assert_eq!(tr.termination, Termination::Completed);
        for i in 0..tr.len() {
            assert!((tr.x[i] - 0.8 * tr.t[i]).abs() < 1e-10);
            assert!((tr.y[i] + 0.6 * tr.t[i]).abs() < 1e-10);
        }
        let (t, _, _) = tr.last().unwrap();
        assert_eq!(t, 4.0);
    }

    #[test]
    fn trajectory_leaves_domain_with_flag() {
        let s = constant_series((5.0, 0.0), (5.0, 0.0), 0.0, 100.0);
        let tr = integrate_forward(&s, (10.0, 0.0), 0.0, 100.0, 0.05).unwrap();
        assert_eq!(tr.termination, Termination::LeftDomain);
        let (_, x, _) = tr.last().unwrap();
        assert!(x <= s.grid.x_max());
    }

    #[test]
    fn trajectory_entering_masked_region_terminates() {
        let grid = gaussian_grid();
        let dim = (grid.nx, grid.ny);
        // Right half masked; uniform rightward flow.
        let masked = Array2::from_shape_fn(dim, |(ix, _)| grid.x(ix) > 4.0);
        let frame = |m: &Array2<bool>| VelocityFrame {
            vx: Array2::from_elem(dim, 1.0),
            vy: Array2::zeros(dim),
            density: Array2::from_elem(dim, 1.0),
            masked: m.clone(),
            rho_floor: 1e-12,
        };
        let s =
            VelocityFieldSeries::new(grid, vec![0.0, 50.0], vec![frame(&masked), frame(&masked)])
                .unwrap();
        let tr = integrate_forward(&s, (0.0, 0.0), 0.0, 50.0, 0.1).unwrap();
        assert_eq!(tr.termination, Termination::EnteredMaskedRegion);
        let (_, x, _) = tr.last().unwrap();
        assert!(x < 4.5, "stopped at the mask edge, got x = {x}");
    }

    struct LinearFlow {
        a: f64,
    }

    impl VelocitySampler for LinearFlow {
        fn sample(&self, _t: f64, x: f64, y: f64) -> SampleOutcome {
            SampleOutcome::Velocity { vx: self.a * x, vy: -self.a * y }
        }
    }

    #[test]
    fn rk4_endpoint_error_drops_16x_per_halving() {
        let f = LinearFlow { a: 1.0 };
        let exact = (0.7 * 1.5f64.exp(), -0.3 * (-1.5f64).exp());
        let run = |dt: f64| {
            let tr = integrate_with_sampler(&f, (0.7, -0.3), 0.0, 1.5, dt).unwrap();
            let (_, x, y) = tr.last().unwrap();
            ((x - exact.0).hypot(y - exact.1), tr)
        };
        let (e1, _) = run(0.05);
        let (e2, _) = run(0.025);
        assert!(e1 / e2 >= 8.0, "order collapse: e1 {e1}, e2 {e2}");
        assert!(e1 / e2 <= 32.0, "error not in the RK4 scaling regime");
    }

    #[test]
    fn backward_then_forward_returns_to_seed() {
        struct Swirl;
        impl VelocitySampler for Swirl {
            fn sample(&self, t: f64, x: f64, y: f64) -> SampleOutcome {
                let w = 1.0 + 0.3 * t.sin();
                SampleOutcome::Velocity { vx: w * y, vy: -w * x }
            }
        }
        let tr = integrate_with_sampler(&Swirl, (1.0, 0.5), 0.0, 3.0, 1e-3).unwrap();
        let (_, xf, yf) = tr.last().unwrap();
        let back = integrate_with_sampler(&Swirl, (xf, yf), 3.0, 0.0, 1e-3).unwrap();
        // Backward output is normalized to increasing t: the seed-time
        // sample sits first.
        assert!(back.t.windows(2).all(|w| w[1] > w[0]));
        let (t0, x0, y0) = (back.t[0], back.x[0], back.y[0]);
        assert_eq!(t0, 0.0);
        assert!((x0 - 1.0).hypot(y0 - 0.5) < 1e-6, "roundtrip drift {x0}, {y0}");
    }

    #[test]
    fn backward_on_series_matches_forward_roundtrip() {
        // Linearly growing uniform flow, exactly representable by the
        // series interpolation, so the roundtrip is integrator-limited.
        let grid = gaussian_grid();
        let dim = (grid.nx, grid.ny);
        let frame = |v: f64| VelocityFrame {
            vx: Array2::from_elem(dim, v),
            vy: Array2::from_elem(dim, 0.5 * v),
            density: Array2::from_elem(dim, 1.0),
            masked: Array2::from_elem(dim, false),
            rho_floor: 1e-12,
        };
        let s = VelocityFieldSeries::new(
            grid,
            vec![0.0, 1.0, 2.0],
            vec![frame(0.0), frame(1.0), frame(2.0)],
        )
        .unwrap();
        let fwd = integrate_forward(&s, (-3.0, -2.0), 0.0, 2.0, 0.01).unwrap();
        let (_, xf, yf) = fwd.last().unwrap();
        let back = integrate_backward(&s, (xf, yf), 2.0, 0.0, 0.01).unwrap();
        assert!((back.x[0] + 3.0).abs() < 1e-6);
        assert!((back.y[0] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn quantile_seeds_are_deterministic_and_track_density() {
        let grid = gaussian_grid();
        let w = WavepacketParams { x0: -2.0, y0: 1.0, sigma: 0.7, p0: 0.0 };
        let psi = initial_wavepacket(&w, grid, &UnitsConfig::default()).unwrap();
        let rho = psi.values.mapv(|c| c.norm_sqr());
        let a = quantile_seeds(&rho, &grid, 50);
        let b = quantile_seeds(&rho, &grid, 50);
        assert_eq!(a, b);
        for (x, y) in &a {
            assert!((x + 2.0).abs() < 3.0 && (y - 1.0).abs() < 3.0, "seed far from packet");
        }
    }

    #[test]
    fn spaced_seeds_are_interior_and_uniform() {
        let seeds = spaced_seeds(&[1.0, 2.0, 3.0], 0.0, 9.0, 8);
        assert_eq!(seeds.len(), 24);
        for (_, y) in &seeds {
            assert!(*y > 0.0 && *y < 9.0);
        }
        let ys: Vec<f64> = seeds.iter().take(8).map(|s| s.1).collect();
        for w in ys.windows(2) {
            assert!((w[1] - w[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_statistic_detects_shift() {
        let n = 2000;
        let uniform: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&uniform, |v| v.clamp(0.0, 1.0));
        assert!(d < 1e-3, "stratified uniform sample should match, d = {d}");
        let shifted: Vec<f64> = uniform.iter().map(|v| (v + 0.2).min(1.0)).collect();
        let d2 = ks_statistic(&shifted, |v| v.clamp(0.0, 1.0));
        assert!(d2 > 0.15);
    }

    #[test]
    fn equivariance_at_t_zero_is_sampling_noise() {
        let grid = gaussian_grid();
        let w = WavepacketParams { x0: 0.0, y0: 0.0, sigma: 1.0, p0: 0.0 };
        let psi = initial_wavepacket(&w, grid, &UnitsConfig::default()).unwrap();
        let f = velocity_from_snapshot(&psi, &UnitsConfig::default(), 1e-12).unwrap();
        let s = VelocityFieldSeries::new(grid, vec![0.0, 1.0], vec![f.clone(), f]).unwrap();
        let n = 10_000;
        let rep = equivariance_test(&s, n, 0.0, 42).unwrap();
        assert_eq!(rep.n_completed, n);
        let bound = 1.36 / (n as f64).sqrt() * 1.5;
        assert!(rep.ks_x < bound, "ks_x = {} vs {}", rep.ks_x, bound);
        assert!(rep.ks_y < bound, "ks_y = {} vs {}", rep.ks_y, bound);
        assert!(rep.chi2_dof > 0);
        // Same seed reproduces the draw bit for bit.
        let rep2 = equivariance_test(&s, n, 0.0, 42).unwrap();
        assert_eq!(rep.ks_x, rep2.ks_x);
        assert_eq!(rep.chi2, rep2.chi2);
    }

    #[test]
    fn equivariance_under_uniform_advection() {
        // Uniform flow translates the ensemble; comparing against the
        // initial density shifted by the same amount keeps KS at noise
        // level. The density frames encode the shift explicitly.
        let grid = gaussian_grid();
        let w = WavepacketParams { x0: -2.0, y0: 0.0, sigma: 1.0, p0: 0.0 };
        let psi0 = initial_wavepacket(&w, grid, &UnitsConfig::default()).unwrap();
        let shift = 3.0;
        let w1 = WavepacketParams { x0: -2.0 + shift, y0: 0.0, sigma: 1.0, p0: 0.0 };
        let psi1 = initial_wavepacket(&w1, grid, &UnitsConfig::default()).unwrap();
        let dim = (grid.nx, grid.ny);
        let frame = |p: &ComplexField2D| VelocityFrame {
            vx: Array2::from_elem(dim, shift / 2.0),
            vy: Array2::zeros(dim),
            density: p.values.mapv(|c| c.norm_sqr()),
            masked: Array2::from_elem(dim, false),
            rho_floor: 0.0,
        };
        let s = VelocityFieldSeries::new(grid, vec![0.0, 2.0], vec![frame(&psi0), frame(&psi1)])
            .unwrap();
        let rep = equivariance_test(&s, 10_000, 2.0, 7).unwrap();
        assert!(rep.n_completed > 9_900, "lost {} particles", rep.n - rep.n_completed);
        assert!(rep.ks_x < 0.02, "ks_x = {}", rep.ks_x);
        assert!(rep.ks_y < 0.02, "ks_y = {}", rep.ks_y);
    }

    #[test]
    fn series_construction_rejects_bad_input() {
        let grid = gaussian_grid();
        let dim = (grid.nx, grid.ny);
        let frame = VelocityFrame {
            vx: Array2::zeros(dim),
            vy: Array2::zeros(dim),
            density: Array2::from_elem(dim, 1.0),
            masked: Array2::from_elem(dim, false),
            rho_floor: 1e-12,
        };
        assert!(VelocityFieldSeries::new(grid, vec![], vec![]).is_err());
        assert!(VelocityFieldSeries::new(grid, vec![0.0, 0.0], vec![frame.clone(), frame.clone()])
            .is_err());
        assert!(VelocityFieldSeries::new(grid, vec![0.0], vec![frame.clone(), frame]).is_err());
    }

    #[test]
    fn builder_collects_frames_during_propagation() {
        use crate::tdse::{propagate, PropagationConfig};
        let grid = gaussian_grid();
        let w = WavepacketParams { x0: 0.0, y0: 0.0, sigma: 0.9, p0: 1.0 };
        let psi = initial_wavepacket(&w, grid, &UnitsConfig::default()).unwrap();
        let v = Array2::zeros((grid.nx, grid.ny));
        let cfg = PropagationConfig {
            dt: 1e-3,
            t_final: 0.02,
            snapshot_stride: 5,
            keep_snapshots: false,
        };
        let mut builder = VelocitySeriesBuilder::new(UnitsConfig::default(), 1e-12);
        propagate(&psi, &v, &cfg, &UnitsConfig::default(), &mut [&mut builder]).unwrap();
        let series = builder.finish().unwrap();
        assert_eq!(series.len(), 5);
        assert_eq!(series.timestamps, vec![0.0, 5e-3, 1e-2, 1.5e-2, 2e-2]);
    }

    // A coherent state in a unit harmonic well keeps a spatially uniform
    // guidance field v(t) = p(t), so every particle is displaced by
    // q(t) - q(0) regardless of its seed.
    fn coherent_setup() -> (Grid2D, ComplexField2D, Array2<f64>) {
        let grid = make_grid(64, 64, 16.0, 16.0, -8.0, -8.0).unwrap();
        let (qx, px, qy, py) = (1.0, 0.3, 0.5, -0.2);
        let mut psi = ComplexField2D::from_fn(grid, |x, y| {
            let mag = (-((x - qx).powi(2) + (y - qy).powi(2)) / 2.0).exp();
            Complex64::from_polar(mag, px * x + py * y)
        });
        psi.normalize().unwrap();
        let v = Array2::from_shape_fn((grid.nx, grid.ny), |(ix, iy)| {
            let (x, y) = (grid.x(ix), grid.y(iy));
            0.5 * (x * x + y * y)
        });
        (grid, psi, v)
    }

    fn classical_displacement(t: f64) -> (f64, f64) {
        let (qx, px, qy, py) = (1.0, 0.3, 0.5, -0.2);
        (qx * t.cos() + px * t.sin() - qx, qy * t.cos() + py * t.sin() - qy)
    }

    #[test]
    fn advector_tracks_coherent_state_displacement() {
        use crate::tdse::{propagate, PropagationConfig};
        let (_, psi, v) = coherent_setup();
        let cfg = PropagationConfig {
            dt: 1e-3,
            t_final: 0.8,
            snapshot_stride: 5,
            keep_snapshots: false,
        };
        let seeds = vec![(0.4, 1.3), (-0.7, 0.2)];
        let mut adv = EnsembleAdvector::from_seeds(UnitsConfig::default(), 1e-12, seeds.clone());
        propagate(&psi, &v, &cfg, &UnitsConfig::default(), &mut [&mut adv]).unwrap();
        let (dx, dy) = classical_displacement(0.8);
        for ((x0, y0), (x, y, term)) in seeds.iter().zip(adv.finals()) {
            assert_eq!(term, Termination::Completed);
            assert!((x - (x0 + dx)).abs() < 1e-4, "x: {x} vs {}", x0 + dx);
            assert!((y - (y0 + dy)).abs() < 1e-4, "y: {y} vs {}", y0 + dy);
        }
    }

    #[test]
    fn advector_halt_freezes_ensemble_midway() {
        use crate::tdse::{propagate, PropagationConfig};
        let (_, psi, v) = coherent_setup();
        let cfg = PropagationConfig {
            dt: 1e-3,
            t_final: 0.8,
            snapshot_stride: 5,
            keep_snapshots: false,
        };
        let mut adv = EnsembleAdvector::from_seeds(UnitsConfig::default(), 1e-12, vec![(0.4, 1.3)])
            .halt_at(0.4)
            .recording_paths();
        propagate(&psi, &v, &cfg, &UnitsConfig::default(), &mut [&mut adv]).unwrap();
        let (dx, dy) = classical_displacement(0.4);
        let (x, y, _) = adv.finals()[0];
        assert!((x - (0.4 + dx)).abs() < 1e-4);
        assert!((y - (1.3 + dy)).abs() < 1e-4);
        let path = &adv.paths()[0];
        assert_eq!(path.last().unwrap().0, 0.4);
        let rep = adv.report().unwrap();
        assert_eq!(rep.t_check, 0.4);
        assert_eq!(rep.n_completed, 1);
    }

    #[test]
    fn advector_ensemble_stays_born_distributed() {
        use crate::tdse::{propagate, PropagationConfig};
        let (_, psi, v) = coherent_setup();
        let cfg = PropagationConfig {
            dt: 1e-3,
            t_final: 0.8,
            snapshot_stride: 5,
            keep_snapshots: false,
        };
        let mut adv = EnsembleAdvector::sampling_density(UnitsConfig::default(), 1e-12, 2000, 11);
        propagate(&psi, &v, &cfg, &UnitsConfig::default(), &mut [&mut adv]).unwrap();
        let rep = adv.report().unwrap();
        assert_eq!(rep.n_completed, 2000);
        assert!(rep.ks_x < 0.06, "ks_x = {}", rep.ks_x);
        assert!(rep.ks_y < 0.06, "ks_y = {}", rep.ks_y);
    }
}
