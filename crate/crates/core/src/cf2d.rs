//! "CF2D v1" field dump format.
//!
//! One ASCII header line `CF2D 1 <nx> <ny> <dx> <dy> <x0_min> <y0_min> xy`
//! followed by nx·ny little-endian float64 (re, im) pairs. The `xy` layout
//! token declares x-major order (iy fastest), matching the in-memory layout
//! of [`ComplexField2D`]. Header floats use Rust's shortest round-trip
//! decimal form, so read(write(f)) reproduces every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField2D;
use crate::grid::Grid2D;

const MAGIC: &str = "CF2D";
const VERSION: &str = "1";
const LAYOUT_XY: &str = "xy";

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format { format: "CF2D", reason: reason.into() }
}

pub fn write_cf2d<W: Write>(w: &mut W, f: &ComplexField2D) -> Result<()> {
    let g = &f.grid;
    writeln!(w, "{MAGIC} {VERSION} {} {} {} {} {} {} {LAYOUT_XY}", g.nx, g.ny, g.dx, g.dy, g.x0_min, g.y0_min)?;
    let mut row = Vec::with_capacity(g.ny * 16);
    for ix in 0..g.nx {
        row.clear();
        for iy in 0..g.ny {
            let v = f.values[(ix, iy)];
            row.extend_from_slice(&v.re.to_le_bytes());
            row.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn read_cf2d<R: BufRead>(r: &mut R) -> Result<ComplexField2D> {
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)?;
    if header.last() != Some(&b'\n') {
        return Err(format_err("missing header line"));
    }
    header.pop();
    let header = std::str::from_utf8(&header).map_err(|_| format_err("header is not ASCII"))?;
    let tok: Vec<&str> = header.split(' ').collect();
    if tok.len() != 9 {
        return Err(format_err(format!("expected 9 header fields, got {}", tok.len())));
    }
    if tok[0] != MAGIC {
        return Err(format_err(format!("bad magic {:?}", tok[0])));
    }
    if tok[1] != VERSION {
        return Err(format_err(format!("unsupported version {:?}", tok[1])));
    }
    let nx: usize = tok[2].parse().map_err(|_| format_err("bad nx"))?;
    let ny: usize = tok[3].parse().map_err(|_| format_err("bad ny"))?;
    let dx: f64 = tok[4].parse().map_err(|_| format_err("bad dx"))?;
    let dy: f64 = tok[5].parse().map_err(|_| format_err("bad dy"))?;
    let x0_min: f64 = tok[6].parse().map_err(|_| format_err("bad x0_min"))?;
    let y0_min: f64 = tok[7].parse().map_err(|_| format_err("bad y0_min"))?;
    if tok[8] != LAYOUT_XY {
        return Err(format_err(format!("unknown layout {:?}", tok[8])));
    }
    let grid = Grid2D::from_spacing(nx, ny, dx, dy, x0_min, y0_min)
        .map_err(|e| format_err(format!("invalid grid in header: {e}")))?;

    let mut values = Array2::zeros((nx, ny));
    let mut row = vec![0u8; ny * 16];
    for ix in 0..nx {
        r.read_exact(&mut row).map_err(|e| format_err(format!("truncated payload at row {ix}: {e}")))?;
        for iy in 0..ny {
            let o = iy * 16;
            let re = f64::from_le_bytes(row[o..o + 8].try_into().unwrap());
            let im = f64::from_le_bytes(row[o + 8..o + 16].try_into().unwrap());
            values[(ix, iy)] = Complex64::new(re, im);
        }
    }
    Ok(ComplexField2D { grid, values })
}

pub fn save_cf2d(path: &Path, f: &ComplexField2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cf2d(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_cf2d(path: &Path) -> Result<ComplexField2D> {
    let mut r = BufReader::new(File::open(path)?);
    let field = read_cf2d(&mut r)?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(format_err("trailing bytes after payload"));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(f: &ComplexField2D) -> ComplexField2D {
        let mut buf = Vec::new();
        write_cf2d(&mut buf, f).unwrap();
        read_cf2d(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn header_is_stable() {
        let g = make_grid(2, 2, 1.0, 1.0, -0.5, 0.25).unwrap();
        let f = ComplexField2D::zeros(g);
        let mut buf = Vec::new();
        write_cf2d(&mut buf, &f).unwrap();
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(&buf[..header_end], b"CF2D 1 2 2 0.5 0.5 -0.5 0.25 xy");
        assert_eq!(buf.len(), header_end + 1 + 4 * 16);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = make_grid(13, 7, 1.0 / 3.0, 0.1, -60.0, -13.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut f = ComplexField2D::from_fn(g, |_, _| {
            Complex64::new(rng.random::<f64>().ln(), (rng.random::<f64>() - 0.5) * 1e-300)
        });
        f.values[(0, 0)] = Complex64::new(-0.0, f64::MIN_POSITIVE / 2.0);
        let back = round_trip(&f);
        assert_eq!(back.grid.dx.to_bits(), g.dx.to_bits());
        assert_eq!(back.grid.dy.to_bits(), g.dy.to_bits());
        assert_eq!(back.grid.x0_min.to_bits(), g.x0_min.to_bits());
        assert_eq!(back.grid.y0_min.to_bits(), g.y0_min.to_bits());
        for (a, b) in f.values.iter().zip(back.values.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn rejects_malformed_input() {
        let bad_magic = b"CF3D 1 2 2 0.5 0.5 0 0 xy\n".to_vec();
        assert!(read_cf2d(&mut bad_magic.as_slice()).is_err());

        let bad_version = b"CF2D 9 2 2 0.5 0.5 0 0 xy\n".to_vec();
        assert!(read_cf2d(&mut bad_version.as_slice()).is_err());

        let bad_layout = b"CF2D 1 2 2 0.5 0.5 0 0 yx\n".to_vec();
        assert!(read_cf2d(&mut bad_layout.as_slice()).is_err());

        let mut truncated = Vec::new();
        let g = make_grid(4, 4, 1.0, 1.0, 0.0, 0.0).unwrap();
        write_cf2d(&mut truncated, &ComplexField2D::zeros(g)).unwrap();
        truncated.truncate(truncated.len() - 1);
        assert!(read_cf2d(&mut truncated.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip_detects_trailing_bytes() {
        let dir = std::env::temp_dir().join(format!("cf2d-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.cf2d");
        let g = make_grid(3, 2, 1.0, 1.0, 0.0, 0.0).unwrap();
        let f = ComplexField2D::from_fn(g, Complex64::new);
        save_cf2d(&path, &f).unwrap();
        assert_eq!(load_cf2d(&path).unwrap(), f);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, bytes).unwrap();
        assert!(load_cf2d(&path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
