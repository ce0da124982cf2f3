//! Flat `key = value` run configuration with a closed schema.
//!
//! Lines are `key = value`, blank, or `#` comments. Every mode accepts a
//! fixed key set; anything else is a hard error that names the closest
//! valid key, so typos cannot silently fall back to defaults. Values use
//! plain decimal notation; lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// Run mode, one per CLI verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dw1d,
    Sim2d,
    Traj,
    Equivariance,
    Render,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Dw1d => "dw1d",
            Mode::Sim2d => "sim2d",
            Mode::Traj => "traj",
            Mode::Equivariance => "equivariance",
            Mode::Render => "render",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Baseline parameter sets selectable with `--preset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Production scale: fine grid, dt = 1e-4. Hours of compute.
    Paper,
    /// Desk scale: 768x256 grid, dt = 5e-4. Minutes of compute.
    Desk,
}

/// Keys shared by every mode.
const COMMON_KEYS: &[&str] = &["mode", "seed", "hbar", "mass"];

const SIM2D_KEYS: &[&str] = &[
    "nx", "ny", "x_min", "x_max", "y_min", "y_max", "dt", "t_final", "snapshot_stride",
    "x0", "y0", "sigma", "p0", "guide_length", "main_width", "aux_width", "barrier_width",
    "v_step", "v_barrier", "v_wall", "smoothing", "write_snapshots",
];

const DW1D_KEYS: &[&str] =
    &["v0", "well_width", "barrier_width", "n_times", "n_profile", "profile_time_fraction"];

const TRAJ_KEYS: &[&str] = &[
    "input_dir", "direction", "dt_traj", "t_start", "t_end", "rho_floor_rel", "seed_mode",
    "n_seeds", "stations", "span_lo", "span_hi", "per_station",
];

const EQUIV_KEYS: &[&str] = &["input_dir", "n_particles", "t_check", "rho_floor_rel"];

const RENDER_KEYS: &[&str] = &[
    "input", "log_scale", "floor_rel", "colormap", "value_mode", "outline",
    "guide_length", "main_width", "aux_width", "barrier_width",
];

fn keys_for(mode: Mode) -> Vec<&'static str> {
    let mut v = COMMON_KEYS.to_vec();
    v.extend(match mode {
        Mode::Dw1d => DW1D_KEYS,
        Mode::Sim2d => SIM2D_KEYS,
        Mode::Traj => TRAJ_KEYS,
        Mode::Equivariance => EQUIV_KEYS,
        Mode::Render => RENDER_KEYS,
    });
    v
}

/// Resolved configuration: every known key of the mode bound to a value
/// string, defaults and preset applied, file and CLI overrides on top.
#[derive(Debug)]
pub struct Config {
    pub mode: Mode,
    values: BTreeMap<&'static str, String>,
}

/// Edit distance for the unknown-key suggestion.
fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest_key(key: &str, known: &[&'static str]) -> &'static str {
    known
        .iter()
        .min_by_key(|k| levenshtein(key, k))
        .copied()
        .unwrap_or("mode")
}

/// Physics defaults: the production waveguide parameter set. Grid extent
/// covers the guides plus a wall margin on every side.
fn sim2d_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("nx", "1536".into()),
        ("ny", "512".into()),
        ("x_min", "-60".into()),
        ("x_max", "60".into()),
        ("y_min", "-13".into()),
        ("y_max", "35".into()),
        ("dt", "1e-4".into()),
        ("t_final", "5".into()),
        ("snapshot_stride", "500".into()),
        ("x0", "-12.5".into()),
        ("y0", "10.5".into()),
        ("sigma", "0.5".into()),
        ("p0", "12".into()),
        ("guide_length", "100".into()),
        ("main_width", "20".into()),
        ("aux_width", "5".into()),
        ("barrier_width", "1".into()),
        ("v_step", "162".into()),
        ("v_barrier", "18".into()),
        ("v_wall", "1e4".into()),
        ("smoothing", "0.05".into()),
        ("write_snapshots", "true".into()),
    ]
}

fn defaults_for(mode: Mode) -> Vec<(&'static str, String)> {
    let mut v: Vec<(&'static str, String)> =
        vec![("seed", "0".into()), ("hbar", "1".into()), ("mass", "1".into())];
    match mode {
        Mode::Sim2d => v.extend(sim2d_defaults()),
        Mode::Dw1d => v.extend([
            ("v0", "35".into()),
            ("well_width", "1.3".into()),
            ("barrier_width", "0.5".into()),
            ("n_times", "201".into()),
            ("n_profile", "201".into()),
            ("profile_time_fraction", "0.25".into()),
        ]),
        Mode::Traj => v.extend([
            ("direction", "forward".into()),
            ("rho_floor_rel", "1e-12".into()),
            ("seed_mode", "density".into()),
            ("n_seeds", "50".into()),
            ("stations", "6,12,20".into()),
            ("span_lo", "-5.3".into()),
            ("span_hi", "-0.7".into()),
            ("per_station", "8".into()),
        ]),
        Mode::Equivariance => v.extend([
            ("n_particles", "10000".into()),
            ("rho_floor_rel", "1e-12".into()),
        ]),
        Mode::Render => v.extend([
            ("log_scale", "true".into()),
            ("floor_rel", "1e-12".into()),
            ("colormap", "heat".into()),
            ("value_mode", "density".into()),
            ("outline", "none".into()),
            ("guide_length", "100".into()),
            ("main_width", "20".into()),
            ("aux_width", "5".into()),
            ("barrier_width", "1".into()),
        ]),
    }
    v
}

fn preset_overrides(preset: Preset, mode: Mode) -> Vec<(&'static str, String)> {
    if mode != Mode::Sim2d {
        // Presets only change propagation scale; other modes ignore them.
        return Vec::new();
    }
    match preset {
        Preset::Paper => Vec::new(),
        Preset::Desk => vec![
            ("nx", "768".into()),
            ("ny", "256".into()),
            ("dt", "5e-4".into()),
            ("snapshot_stride", "100".into()),
        ],
    }
}

impl Config {
    /// Assemble the configuration for one run: defaults, then preset, then
    /// the config file, then the `--seed` override.
    pub fn resolve(
        mode: Mode,
        path: Option<&Path>,
        preset: Option<Preset>,
        seed_override: Option<u64>,
    ) -> Result<Config> {
        let known = keys_for(mode);
        let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
        for (k, v) in defaults_for(mode) {
            values.insert(k, v);
        }
        if let Some(p) = preset {
            for (k, v) in preset_overrides(p, mode) {
                values.insert(k, v);
            }
        }
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (line_no, key, value) in parse_pairs(&text)? {
                let Some(&canon) = known.iter().find(|k| **k == key) else {
                    bail!(
                        "{}:{line_no}: unknown key `{key}` for mode {mode}; nearest valid key is `{}`",
                        path.display(),
                        nearest_key(&key, &known)
                    );
                };
                values.insert(canon, value);
            }
        }
        if let Some(seed) = seed_override {
            values.insert("seed", seed.to_string());
        }
        let cfg = Config { mode, values };
        // A `mode` key in the file must agree with the verb.
        if let Some(m) = cfg.values.get("mode") {
            if m != mode.name() {
                bail!("config says mode = {m}, but the {mode} command was invoked");
            }
        }
        Ok(cfg)
    }

    /// Every resolved key in deterministic order, for the manifest echo.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.values.iter().map(|(k, v)| (*k, v.as_str()))
    }

    fn raw(&self, key: &'static str) -> Result<&str> {
        self.values
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| anyhow!("key `{key}` is required for mode {}", self.mode))
    }

    pub fn f64(&self, key: &'static str) -> Result<f64> {
        let s = self.raw(key)?;
        s.parse().map_err(|_| anyhow!("key `{key}`: expected a number, got `{s}`"))
    }

    pub fn usize(&self, key: &'static str) -> Result<usize> {
        let s = self.raw(key)?;
        s.parse().map_err(|_| anyhow!("key `{key}`: expected a nonnegative integer, got `{s}`"))
    }

    pub fn u64(&self, key: &'static str) -> Result<u64> {
        let s = self.raw(key)?;
        s.parse().map_err(|_| anyhow!("key `{key}`: expected a nonnegative integer, got `{s}`"))
    }

    pub fn bool(&self, key: &'static str) -> Result<bool> {
        match self.raw(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            s => Err(anyhow!("key `{key}`: expected true or false, got `{s}`")),
        }
    }

    pub fn str(&self, key: &'static str) -> Result<&str> {
        self.raw(key)
    }

    /// Optional key: None when absent rather than an error.
    pub fn opt_f64(&self, key: &'static str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    pub fn opt_str(&self, key: &'static str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn list_f64(&self, key: &'static str) -> Result<Vec<f64>> {
        let s = self.raw(key)?;
        s.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|_| anyhow!("key `{key}`: expected comma-separated numbers, got `{item}`"))
            })
            .collect()
    }
}

/// Raw `key = value` pairs with their line numbers.
fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {line_no}: expected `key = value`, got `{line}`");
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            bail!("line {line_no}: empty key");
        }
        out.push((line_no, key.to_string(), value.to_string()));
    }
    Ok(out)
}
