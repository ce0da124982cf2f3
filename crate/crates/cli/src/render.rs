//! Quick-look rendering of stored fields to binary PPM.
//!
//! The image maps one grid node to one pixel, row 0 at the top (largest y).
//! Density plots use log10 scaling by default with a floor relative to the
//! frame maximum, so transmitted tails stay visible next to the main peak.

use std::path::Path;

use anyhow::{bail, Context, Result};

use bohmsim_core::cf2d::load_cf2d;
use bohmsim_core::potentials::WaveguideGeometry;
use bohmsim_core::ComplexField2D;

use crate::config::Config;
use crate::manifest::{Manifest, OutputDir};

/// Five-stop heat ramp from black through blue and orange to white.
const HEAT: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [0.18, 0.07, 0.42],
    [0.75, 0.18, 0.38],
    [0.98, 0.65, 0.14],
    [1.0, 1.0, 1.0],
];

fn heat_rgb(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0) * (HEAT.len() - 1) as f64;
    let i = (v as usize).min(HEAT.len() - 2);
    let f = v - i as f64;
    let mut rgb = [0u8; 3];
    for c in 0..3 {
        rgb[c] = ((HEAT[i][c] + f * (HEAT[i + 1][c] - HEAT[i][c])) * 255.0).round() as u8;
    }
    rgb
}

fn gray_rgb(v: f64) -> [u8; 3] {
    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [g, g, g]
}

/// Normalized intensity in [0, 1] per node: |ψ|² or Re ψ, optional log10
/// with a relative floor. Non-finite values clamp to the floor.
fn intensities(f: &ComplexField2D, density: bool, log_scale: bool, floor_rel: f64) -> Vec<f64> {
    let raw: Vec<f64> = f
        .values
        .iter()
        .map(|c| if density { c.norm_sqr() } else { c.re })
        .collect();
    let finite = raw.iter().copied().filter(|v| v.is_finite());
    if log_scale {
        let max = finite.fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let floor = max * floor_rel.max(1e-300);
        let span = (max / floor).log10().max(f64::MIN_POSITIVE);
        raw.iter()
            .map(|v| {
                let v = if v.is_finite() { v.abs().max(floor) } else { floor };
                (v / floor).log10() / span
            })
            .collect()
    } else {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in finite {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(hi > lo) {
            return vec![0.0; raw.len()];
        }
        raw.iter()
            .map(|v| if v.is_finite() { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

struct Image {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
}

impl Image {
    fn put(&mut self, col: usize, row: usize, px: [u8; 3]) {
        let at = 3 * (row * self.w + col);
        self.rgb[at..at + 3].copy_from_slice(&px);
    }

    fn ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.w, self.h).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }
}

/// Outline color chosen to stand out on both colormaps.
const OUTLINE: [u8; 3] = [0, 255, 110];

fn draw_outline(img: &mut Image, f: &ComplexField2D, g: &WaveguideGeometry) {
    let grid = &f.grid;
    let half_d = g.d / 2.0;
    let half_l = g.l / 2.0;
    // The three guide interiors, as world-space rectangles.
    let rects = [
        (-half_l, half_l, half_d, half_d + g.a),
        (0.0, half_l, -half_d, half_d),
        (0.0, half_l, -half_d - g.b, -half_d),
    ];
    let col = |x: f64| (((x - grid.x0_min) / grid.dx).round() as isize).clamp(0, grid.nx as isize - 1) as usize;
    let row = |y: f64| {
        let iy = (((y - grid.y0_min) / grid.dy).round() as isize).clamp(0, grid.ny as isize - 1) as usize;
        grid.ny - 1 - iy
    };
    for (x0, x1, y0, y1) in rects {
        let (c0, c1) = (col(x0), col(x1));
        let (r0, r1) = (row(y1), row(y0));
        for c in c0..=c1 {
            img.put(c, r0, OUTLINE);
            img.put(c, r1, OUTLINE);
        }
        for r in r0..=r1 {
            img.put(c0, r, OUTLINE);
            img.put(c1, r, OUTLINE);
        }
    }
}

/// Render one stored field to PPM according to the config.
pub fn render_field(f: &ComplexField2D, cfg: &Config) -> Result<Vec<u8>> {
    let density = match cfg.str("value_mode")? {
        "density" => true,
        "real" => false,
        other => bail!("key `value_mode`: expected density or real, got `{other}`"),
    };
    let log_scale = cfg.bool("log_scale")?;
    let floor_rel = cfg.f64("floor_rel")?;
    if !(floor_rel > 0.0) {
        bail!("key `floor_rel` must be positive");
    }
    let vals = intensities(f, density, log_scale, floor_rel);
    let map = match cfg.str("colormap")? {
        "heat" => heat_rgb as fn(f64) -> [u8; 3],
        "gray" => gray_rgb as fn(f64) -> [u8; 3],
        other => bail!("key `colormap`: expected heat or gray, got `{other}`"),
    };
    let grid = &f.grid;
    let mut img = Image { w: grid.nx, h: grid.ny, rgb: vec![0; 3 * grid.nx * grid.ny] };
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            img.put(ix, grid.ny - 1 - iy, map(vals[ix * grid.ny + iy]));
        }
    }
    match cfg.str("outline")? {
        "none" => {}
        "waveguide" => {
            let geom = WaveguideGeometry {
                l: cfg.f64("guide_length")?,
                a: cfg.f64("main_width")?,
                b: cfg.f64("aux_width")?,
                d: cfg.f64("barrier_width")?,
                ..WaveguideGeometry::default()
            };
            draw_outline(&mut img, f, &geom);
        }
        other => bail!("key `outline`: expected none or waveguide, got `{other}`"),
    }
    Ok(img.ppm())
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
    let input = cfg
        .opt_str("input")
        .ok_or_else(|| anyhow::anyhow!("render needs `input = <field file>` in the config"))?;
    let field = load_cf2d(Path::new(input)).with_context(|| format!("loading field {input}"))?;
    let ppm = render_field(&field, cfg)?;
    let stem = Path::new(input)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field");
    let name = format!("{stem}.ppm");
    out.write(&name, &ppm)?;
    man.result("width", field.grid.nx);
    man.result("height", field.grid.ny);
    man.result("max_density", field.max_abs2());
    Ok(())
}
