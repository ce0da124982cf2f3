//! Born-rule check over a stored snapshot series: samples particles from the
//! first frame's density, transports them along the velocity field, and
//! reports marginal KS distances plus a coarse chi-square at t_check.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};

use bohmsim_core::bohm::equivariance_test;
use bohmsim_core::UnitsConfig;

use crate::config::Config;
use crate::manifest::{Manifest, OutputDir};
use crate::sim2d::fmt_f64;
use crate::traj::load_series;

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
    let input = cfg
        .opt_str("input_dir")
        .ok_or_else(|| anyhow::anyhow!("equiv needs `input_dir = <sim2d output dir>` in the config"))?;
    let series = load_series(Path::new(input), &units, cfg.f64("rho_floor_rel")?)?;
    let t_check = cfg.opt_f64("t_check")?.unwrap_or_else(|| series.t_end());
    if !(series.t_start()..=series.t_end()).contains(&t_check) {
        bail!(
            "t_check = {t_check} outside the stored series [{}, {}]",
            series.t_start(),
            series.t_end()
        );
    }
    let n = cfg.usize("n_particles")?;
    if n == 0 {
        bail!("key `n_particles` must be positive");
    }
    let rep = equivariance_test(&series, n, t_check, cfg.u64("seed")?)?;

    let mut report = String::new();
    for (k, v) in [
        ("n", rep.n as f64),
        ("n_completed", rep.n_completed as f64),
        ("n_masked", rep.n_masked as f64),
        ("n_left_domain", rep.n_left_domain as f64),
    ] {
        writeln!(report, "{k} = {}", v as usize).unwrap();
    }
    for (k, v) in [
        ("t_check", rep.t_check),
        ("ks_x", rep.ks_x),
        ("ks_y", rep.ks_y),
        ("chi2", rep.chi2),
        ("chi2_dof", rep.chi2_dof as f64),
    ] {
        writeln!(report, "{k} = {}", fmt_f64(v)).unwrap();
    }
    out.write("report.txt", report.as_bytes())?;

    man.result("ks_x", fmt_f64(rep.ks_x));
    man.result("ks_y", fmt_f64(rep.ks_y));
    man.result("chi2", fmt_f64(rep.chi2));
    man.result("n_completed", rep.n_completed);
    Ok(())
}
