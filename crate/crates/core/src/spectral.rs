use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ComplexField2D;
use crate::grid::Grid2D;

/// Momentum-space counterpart of [`ComplexField2D`]. Values are indexed
/// `(ix, iy)` over the DFT-ordered momentum grid (`grid.kx(ix)`,
/// `grid.ky(iy)`), scaled so that `norm2` matches the position-space norm.
#[derive(Debug, Clone)]
pub struct SpectralField2D {
    pub grid: Grid2D,
    pub values: Array2<Complex64>,
}

impl SpectralField2D {
    /// ∑ |ψ̃|² Δkx Δky; equals the position-space `norm2` by Parseval.
    pub fn norm2(&self) -> f64 {
        let mut acc = 0.0;
        for v in self.values.iter() {
            acc += v.norm_sqr();
        }
        acc * self.grid.dkx() * self.grid.dky()
    }
}

/// Scratch buffer for the in-place transform passes: one (ny, nx) array so
/// the x-direction pass runs on contiguous rows.
pub struct Workspace2D {
    t: Array2<Complex64>,
}

/// Planned 2D FFT for one grid shape. Plans are immutable and shareable;
/// per-call scratch lives in thread locals or an explicit [`Workspace2D`].
pub struct SpectralTransform2D {
    grid: Grid2D,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl SpectralTransform2D {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        SpectralTransform2D {
            grid,
            fwd_x: planner.plan_fft(grid.nx, FftDirection::Forward),
            inv_x: planner.plan_fft(grid.nx, FftDirection::Inverse),
            fwd_y: planner.plan_fft(grid.ny, FftDirection::Forward),
            inv_y: planner.plan_fft(grid.ny, FftDirection::Inverse),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn workspace(&self) -> Workspace2D {
        Workspace2D { t: Array2::zeros((self.grid.ny, self.grid.nx)) }
    }

    fn check_shape(&self, values: &Array2<Complex64>) -> Result<()> {
        if values.dim() != (self.grid.nx, self.grid.ny) {
            return Err(Error::invalid(format!(
                "field shape {:?} does not match transform grid {} x {}",
                values.dim(),
                self.grid.nx,
                self.grid.ny
            )));
        }
        Ok(())
    }

    /// Unnormalized forward DFT along both axes, in place.
    pub fn dft2(&self, values: &mut Array2<Complex64>) {
        let mut ws = self.workspace();
        row_pass(&self.fwd_y, values);
        transpose_into(values, &mut ws.t);
        row_pass(&self.fwd_x, &mut ws.t);
        transpose_into(&ws.t, values);
    }

    /// Inverse of [`dft2`][Self::dft2], including the 1/(nx·ny) factor.
    pub fn idft2(&self, values: &mut Array2<Complex64>) {
        let mut ws = self.workspace();
        row_pass(&self.inv_y, values);
        transpose_into(values, &mut ws.t);
        row_pass(&self.inv_x, &mut ws.t);
        transpose_into(&ws.t, values);
        let s = 1.0 / (self.grid.nx as f64 * self.grid.ny as f64);
        scale(values, s);
    }

    /// Physics-scaled momentum representation ψ̃ = (δx·δy/2π)·DFT[ψ].
    pub fn forward(&self, f: &ComplexField2D) -> Result<SpectralField2D> {
        self.check_shape(&f.values)?;
        let mut values = f.values.clone();
        self.dft2(&mut values);
        scale(&mut values, self.grid.dx * self.grid.dy / (2.0 * std::f64::consts::PI));
        Ok(SpectralField2D { grid: self.grid, values })
    }

    pub fn inverse(&self, f: &SpectralField2D) -> Result<ComplexField2D> {
        self.check_shape(&f.values)?;
        let mut values = f.values.clone();
        self.idft2(&mut values);
        scale(&mut values, 2.0 * std::f64::consts::PI / (self.grid.dx * self.grid.dy));
        Ok(ComplexField2D { grid: self.grid, values })
    }

    /// Hot path for split stepping: DFT, pointwise multiply by `phase_t`,
    /// inverse DFT, with only two transposes per call. `phase_t` is laid out
    /// TRANSPOSED, shape (ny, nx), and must already contain the 1/(nx·ny)
    /// normalization (see [`kinetic_phase_transposed`]).
    pub fn kinetic_step(
        &self,
        values: &mut Array2<Complex64>,
        phase_t: &Array2<Complex64>,
        ws: &mut Workspace2D,
    ) {
        debug_assert_eq!(values.dim(), (self.grid.nx, self.grid.ny));
        debug_assert_eq!(phase_t.dim(), (self.grid.ny, self.grid.nx));
        row_pass(&self.fwd_y, values);
        transpose_into(values, &mut ws.t);
        row_pass(&self.fwd_x, &mut ws.t);
        pointwise_mul(&mut ws.t, phase_t);
        row_pass(&self.inv_x, &mut ws.t);
        transpose_into(&ws.t, values);
        row_pass(&self.inv_y, values);
    }

    /// Spectral gradient (∂ψ/∂x, ∂ψ/∂y). For even axis lengths the Nyquist
    /// bin is zeroed: its first derivative has no consistent sign on the
    /// sampled grid.
    pub fn gradient(&self, f: &ComplexField2D) -> Result<(Array2<Complex64>, Array2<Complex64>)> {
        self.check_shape(&f.values)?;
        let g = &self.grid;
        let mut hat = f.values.clone();
        self.dft2(&mut hat);

        let ikx: Vec<Complex64> = (0..g.nx)
            .map(|i| {
                if g.nx % 2 == 0 && i == g.nx / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, g.kx(i))
                }
            })
            .collect();
        let iky: Vec<Complex64> = (0..g.ny)
            .map(|j| {
                if g.ny % 2 == 0 && j == g.ny / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, g.ky(j))
                }
            })
            .collect();

        let mut dx_hat = hat.clone();
        for (ix, mut row) in dx_hat.outer_iter_mut().enumerate() {
            let m = ikx[ix];
            for v in row.iter_mut() {
                *v *= m;
            }
        }
        let mut dy_hat = hat;
        for mut row in dy_hat.outer_iter_mut() {
            for (iy, v) in row.iter_mut().enumerate() {
                *v *= iky[iy];
            }
        }
        self.idft2(&mut dx_hat);
        self.idft2(&mut dy_hat);
        Ok((dx_hat, dy_hat))
    }
}

/// Kinetic-energy half of the split propagator as a transposed phase array:
/// `exp(−i·ħ(kx²+ky²)·dt / 2m) / (nx·ny)`, shape (ny, nx), ready for
/// [`SpectralTransform2D::kinetic_step`].
pub fn kinetic_phase_transposed(grid: &Grid2D, dt: f64, hbar: f64, mass: f64) -> Array2<Complex64> {
    let norm = 1.0 / (grid.nx as f64 * grid.ny as f64);
    Array2::from_shape_fn((grid.ny, grid.nx), |(iy, ix)| {
        let k2 = grid.kx(ix).powi(2) + grid.ky(iy).powi(2);
        Complex64::from_polar(norm, -hbar * k2 * dt / (2.0 * mass))
    })
}

fn row_pass(fft: &Arc<dyn Fft<f64>>, values: &mut Array2<Complex64>) {
    let row_len = values.dim().1;
    let data = values.as_slice_mut().expect("fields are standard-layout");
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(row_len).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

/// Cache-blocked out-of-place transpose; parallel over destination row
/// blocks, which are disjoint so writes never race.
fn transpose_into(src: &Array2<Complex64>, dst: &mut Array2<Complex64>) {
    const BS: usize = 64;
    let (r, c) = src.dim();
    debug_assert_eq!(dst.dim(), (c, r));
    let s = src.as_slice().expect("fields are standard-layout");
    let d = dst.as_slice_mut().expect("fields are standard-layout");
    d.par_chunks_mut(BS * r).enumerate().for_each(|(jb, chunk)| {
        let j0 = jb * BS;
        let j1 = (j0 + BS).min(c);
        for i0 in (0..r).step_by(BS) {
            let i1 = (i0 + BS).min(r);
            for j in j0..j1 {
                let out = &mut chunk[(j - j0) * r..];
                for i in i0..i1 {
                    out[i] = s[i * c + j];
                }
            }
        }
    });
}

fn pointwise_mul(values: &mut Array2<Complex64>, factor: &Array2<Complex64>) {
    let a = values.as_slice_mut().expect("standard layout");
    let b = factor.as_slice().expect("standard layout");
    a.par_iter_mut().zip(b.par_iter()).for_each(|(v, f)| *v *= *f);
}

fn scale(values: &mut Array2<Complex64>, s: f64) {
    for v in values.iter_mut() {
        *v *= s;
    }
}
