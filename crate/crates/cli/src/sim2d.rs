//! 2D propagation run: builds the waveguide potential and initial packet
//! from the config, propagates, and streams region probabilities plus an
//! optional snapshot series to disk.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};

use bohmsim_core::cf2d::write_cf2d;
use bohmsim_core::grid::{make_grid, Rect};
use bohmsim_core::potentials::{rasterize_waveguide, WaveguideGeometry};
use bohmsim_core::tdse::{
    initial_wavepacket, propagate, region_probability, PropagationConfig, SnapshotObserver,
    WavepacketParams,
};
use bohmsim_core::{ComplexField2D, UnitsConfig};

use crate::config::Config;
use crate::manifest::{Manifest, OutputDir};

/// Norm drift beyond this aborts the run: the propagator is unitary to
/// roundoff, so anything larger means the configuration is broken.
const NORM_DRIFT_ABORT: f64 = 1e-6;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

struct RegionTable {
    left: Rect,
    right: Rect,
    aux: Rect,
    rows: Vec<(f64, f64, f64, f64, f64)>,
}

impl SnapshotObserver for RegionTable {
    fn observe(&mut self, _step: usize, t: f64, psi: &ComplexField2D) -> bohmsim_core::Result<()> {
        self.rows.push((
            t,
            region_probability(psi, &self.left),
            region_probability(psi, &self.right),
            region_probability(psi, &self.aux),
            psi.norm2(),
        ));
        Ok(())
    }
}

/// Writes every observed snapshot as a CF2D file under `snapshots/`.
struct SnapshotWriter<'a> {
    out: &'a mut OutputDir,
    index: Vec<(usize, f64, String)>,
}

impl SnapshotObserver for SnapshotWriter<'_> {
    fn observe(&mut self, _step: usize, t: f64, psi: &ComplexField2D) -> bohmsim_core::Result<()> {
        let name = format!("snapshots/snap_{:06}.cf2d", self.index.len());
        self.out
            .write_with(&name, |buf| {
                write_cf2d(buf, psi)?;
                Ok(())
            })
            .map_err(|e| bohmsim_core::Error::invalid(format!("writing {name}: {e}")))?;
        self.index.push((self.index.len(), t, name));
        Ok(())
    }
}

struct FinalCapture {
    t_final: f64,
    field: Option<ComplexField2D>,
}

impl SnapshotObserver for FinalCapture {
    fn observe(&mut self, _step: usize, t: f64, psi: &ComplexField2D) -> bohmsim_core::Result<()> {
        if (t - self.t_final).abs() < 1e-12 {
            self.field = Some(psi.clone());
        }
        Ok(())
    }
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
    let geom = WaveguideGeometry {
        l: cfg.f64("guide_length")?,
        a: cfg.f64("main_width")?,
        b: cfg.f64("aux_width")?,
        d: cfg.f64("barrier_width")?,
        v_step: cfg.f64("v_step")?,
        v_barrier: cfg.f64("v_barrier")?,
        v_wall: cfg.f64("v_wall")?,
        eps: cfg.f64("smoothing")?,
    };
    geom.validate()?;
    let (x_min, x_max) = (cfg.f64("x_min")?, cfg.f64("x_max")?);
    let (y_min, y_max) = (cfg.f64("y_min")?, cfg.f64("y_max")?);
    let grid = make_grid(
        cfg.usize("nx")?,
        cfg.usize("ny")?,
        x_max - x_min,
        y_max - y_min,
        x_min,
        y_min,
    )?;
    let packet = WavepacketParams {
        x0: cfg.f64("x0")?,
        y0: cfg.f64("y0")?,
        sigma: cfg.f64("sigma")?,
        p0: cfg.f64("p0")?,
    };
    let prop = PropagationConfig {
        dt: cfg.f64("dt")?,
        t_final: cfg.f64("t_final")?,
        snapshot_stride: cfg.usize("snapshot_stride")?,
        keep_snapshots: false,
    };
    prop.validate()?;

    let v = rasterize_waveguide(&geom, &grid);
    let psi0 = initial_wavepacket(&packet, grid, &units)?;

    let half_d = geom.d / 2.0;
    let mut regions = RegionTable {
        left: Rect::new(x_min, 0.0, y_min, y_max),
        right: Rect::new(0.0, x_max, y_min, y_max),
        aux: Rect::new(0.0, geom.l / 2.0, -half_d - geom.b, -half_d),
        rows: Vec::new(),
    };
    let mut capture = FinalCapture { t_final: prop.t_final, field: None };

    let write_snapshots = cfg.bool("write_snapshots")?;
    let stats = if write_snapshots {
        let mut writer = SnapshotWriter { out, index: Vec::new() };
        let (_, stats) =
            propagate(&psi0, &v, &prop, &units, &mut [&mut regions, &mut capture, &mut writer])?;
        let mut index = String::from("i,t,file\n");
        for (i, t, file) in &writer.index {
            writeln!(index, "{i},{},{file}", fmt_f64(*t)).unwrap();
        }
        out.write("snapshots/index.csv", index.as_bytes())?;
        stats
    } else {
        let (_, stats) = propagate(&psi0, &v, &prop, &units, &mut [&mut regions, &mut capture])?;
        stats
    };

    let mut csv = String::from("t,p_left,p_right,p_aux,norm\n");
    for (t, l, r, a, n) in &regions.rows {
        writeln!(csv, "{},{},{},{},{}", fmt_f64(*t), fmt_f64(*l), fmt_f64(*r), fmt_f64(*a), fmt_f64(*n))
            .unwrap();
    }
    out.write("regions.csv", csv.as_bytes())?;

    let final_field = capture.field.expect("propagation observes the final step");
    out.write_with("final.cf2d", |buf| {
        write_cf2d(buf, &final_field)?;
        Ok(())
    })?;

    man.result("steps", stats.steps);
    man.result("final_norm", fmt_f64(stats.final_norm));
    man.result("max_norm_drift", fmt_f64(stats.max_norm_drift));
    man.result("max_edge_density", fmt_f64(stats.max_edge_density));
    if let Some((t, l, r, a, _)) = regions.rows.last() {
        man.result("t_final", fmt_f64(*t));
        man.result("p_left_final", fmt_f64(*l));
        man.result("p_right_final", fmt_f64(*r));
        man.result("p_aux_final", fmt_f64(*a));
    }
    if stats.max_edge_density > 1e-6 {
        log::warn!(
            "max edge density {:.3e}: the domain margins may be too tight",
            stats.max_edge_density
        );
    }
    if stats.max_norm_drift > NORM_DRIFT_ABORT {
        bail!(
            "norm drift {:.3e} exceeded the abort threshold {NORM_DRIFT_ABORT:.0e}",
            stats.max_norm_drift
        );
    }
    Ok(())
}
