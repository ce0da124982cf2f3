//! Trajectory batch over a stored snapshot series: loads the fields a prior
//! sim2d run wrote, derives the velocity series once, integrates forward or
//! backward seed sets, and exports one CSV per trajectory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use bohmsim_core::bohm::{
    integrate_backward_batch, integrate_forward_batch, quantile_seeds, spaced_seeds,
    velocity_from_snapshot_with, VelocityFieldSeries,
};
use bohmsim_core::cf2d::load_cf2d;
use bohmsim_core::spectral::SpectralTransform2D;
use bohmsim_core::trajectory::{Termination, Trajectory};
use bohmsim_core::UnitsConfig;

use crate::config::Config;
use crate::manifest::{Manifest, OutputDir};
use crate::sim2d::fmt_f64;

/// Reads `snapshots/index.csv` plus the fields it lists and builds the
/// velocity series. Shared with the equivariance mode.
pub fn load_series(input_dir: &Path, units: &UnitsConfig, rho_floor_rel: f64) -> Result<VelocityFieldSeries> {
    let index_path = input_dir.join("snapshots/index.csv");
    let text = std::fs::read_to_string(&index_path)
        .with_context(|| format!("reading snapshot index {}", index_path.display()))?;
    let mut timestamps = Vec::new();
    let mut frames = Vec::new();
    let mut transform: Option<SpectralTransform2D> = None;
    let mut grid = None;
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, ',');
        let (_, t, file) = (
            cols.next().unwrap_or_default(),
            cols.next()
                .with_context(|| format!("{}:{}: missing t column", index_path.display(), i + 1))?,
            cols.next()
                .with_context(|| format!("{}:{}: missing file column", index_path.display(), i + 1))?,
        );
        let t: f64 = t
            .parse()
            .with_context(|| format!("{}:{}: bad timestamp `{t}`", index_path.display(), i + 1))?;
        let field = load_cf2d(&input_dir.join(file.trim()))
            .with_context(|| format!("loading snapshot {file}"))?;
        let tf = transform.get_or_insert_with(|| SpectralTransform2D::new(field.grid));
        grid.get_or_insert(field.grid);
        frames.push(velocity_from_snapshot_with(&field, units, rho_floor_rel, tf)?);
        timestamps.push(t);
    }
    let Some(grid) = grid else {
        bail!("snapshot index {} lists no frames", index_path.display());
    };
    Ok(VelocityFieldSeries::new(grid, timestamps, frames)?)
}

pub fn run(cfg: &Config, out_root: &Path) -> Result<()> {
    let mut out = OutputDir::create(out_root)?;
    let mut man = Manifest::begin(cfg);
    match execute(cfg, &mut out, &mut man) {
        Ok(()) => man.finish(&mut out),
        Err(e) => {
            man.abort(&mut out, &e);
            Err(e)
        }
    }
}

fn execute(cfg: &Config, out: &mut OutputDir, man: &mut Manifest) -> Result<()> {
    let units = UnitsConfig::new(cfg.f64("hbar")?, cfg.f64("mass")?)?;
    let rho_floor_rel = cfg.f64("rho_floor_rel")?;
    let input = cfg
        .opt_str("input_dir")
        .ok_or_else(|| anyhow::anyhow!("traj needs `input_dir = <sim2d output dir>` in the config"))?;
    let series = load_series(Path::new(input), &units, rho_floor_rel)?;

    let t_start = cfg.opt_f64("t_start")?.unwrap_or_else(|| series.t_start());
    let t_end = cfg.opt_f64("t_end")?.unwrap_or_else(|| series.t_end());
    if !(t_end > t_start) {
        bail!("need t_end > t_start, got [{t_start}, {t_end}]");
    }
    let dt_traj = cfg.opt_f64("dt_traj")?.unwrap_or_else(|| series.default_dt_traj());
    if !(dt_traj > 0.0) {
        bail!("key `dt_traj` must be positive");
    }

    let backward = match cfg.str("direction")? {
        "forward" => false,
        "backward" => true,
        other => bail!("key `direction`: expected forward or backward, got `{other}`"),
    };
    // Density seeding reads the frame where integration begins.
    let seed_time = if backward { t_end } else { t_start };
    let seeds = match cfg.str("seed_mode")? {
        "density" => {
            let rho = series.density_at(seed_time)?;
            quantile_seeds(&rho, &series.grid, cfg.usize("n_seeds")?)
        }
        "spaced" => spaced_seeds(
            &cfg.list_f64("stations")?,
            cfg.f64("span_lo")?,
            cfg.f64("span_hi")?,
            cfg.usize("per_station")?,
        ),
        other => bail!("key `seed_mode`: expected density or spaced, got `{other}`"),
    };
    if seeds.is_empty() {
        bail!("seed specification produced no seeds");
    }

    let mut seeds_csv = String::from("i,x,y\n");
    for (i, (x, y)) in seeds.iter().enumerate() {
        writeln!(seeds_csv, "{i},{},{}", fmt_f64(*x), fmt_f64(*y)).unwrap();
    }
    out.write("seeds.csv", seeds_csv.as_bytes())?;

    let trajs = if backward {
        integrate_backward_batch(&series, &seeds, t_end, t_start, dt_traj)?
    } else {
        integrate_forward_batch(&series, &seeds, t_start, t_end, dt_traj)?
    };

    let mut counts = [0usize; 3];
    let mut n_end_left = 0usize;
    for (i, tr) in trajs.iter().enumerate() {
        out.write(&format!("traj_{i:03}.csv"), trajectory_csv(tr).as_bytes())?;
        counts[tr.termination.code() as usize] += 1;
        // For backward runs the last sample is the seed; the origin is first.
        let endpoint = if backward { tr.x.first() } else { tr.x.last() };
        if endpoint.is_some_and(|&x| x < 0.0) {
            n_end_left += 1;
        }
    }
    man.result("n_seeds", seeds.len());
    man.result("n_completed", counts[Termination::Completed.code() as usize]);
    man.result("n_left_domain", counts[Termination::LeftDomain.code() as usize]);
    man.result("n_masked", counts[Termination::EnteredMaskedRegion.code() as usize]);
    man.result(if backward { "n_origin_left" } else { "n_final_left" }, n_end_left);
    man.result("t_start", fmt_f64(t_start));
    man.result("t_end", fmt_f64(t_end));
    man.result("dt_traj", fmt_f64(dt_traj));
    Ok(())
}

/// `t,x,y,flag` rows; the flag is 0 everywhere except the last row, which
/// carries the termination code.
fn trajectory_csv(tr: &Trajectory) -> String {
    let mut csv = String::from("t,x,y,flag\n");
    for k in 0..tr.len() {
        let flag = if k + 1 == tr.len() { tr.termination.code() } else { 0 };
        writeln!(csv, "{},{},{},{flag}", fmt_f64(tr.t[k]), fmt_f64(tr.x[k]), fmt_f64(tr.y[k]))
            .unwrap();
    }
    csv
}
