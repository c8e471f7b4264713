//! Binary state snapshots.
//!
//! Layout, all little-endian: magic `AEUL`, `u32` version, `u32` n,
//! `f64` α, `f64` t, then `n²` interleaved `(re, im)` `f64` pairs of the
//! vorticity coefficients in storage order (row index = k₁).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::solver::SimState;
use crate::spectral::{Grid, SpectralField};
use crate::vorticity::AlphaParam;

pub const MAGIC: [u8; 4] = *b"AEUL";
pub const VERSION: u32 = 1;

pub fn write<W: Write>(mut w: W, state: &SimState) -> Result<()> {
    let n = state.grid().n();
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(n as u32)?;
    w.write_f64::<LittleEndian>(state.alpha.value())?;
    w.write_f64::<LittleEndian>(state.t)?;
    for c in state.q.coeffs().iter() {
        w.write_f64::<LittleEndian>(c.re)?;
        w.write_f64::<LittleEndian>(c.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot. The step counter is not stored and comes back as 0.
pub fn read<R: Read>(mut r: R) -> Result<SimState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    let grid = Grid::new(n)?;
    let alpha = AlphaParam::new(r.read_f64::<LittleEndian>()?)?;
    let t = r.read_f64::<LittleEndian>()?;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re = r.read_f64::<LittleEndian>()?;
        let im = r.read_f64::<LittleEndian>()?;
        data.push(Complex64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let coeffs = Array2::from_shape_vec((n, n), data).expect("n*n entries");
    Ok(SimState {
        t,
        q: SpectralField::from_coeffs(grid, coeffs)?,
        alpha,
        step_count: 0,
    })
}

pub fn write_file(path: &Path, state: &SimState) -> Result<()> {
    write(BufWriter::new(File::create(path)?), state)
}

pub fn read_file(path: &Path) -> Result<SimState> {
    read(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PhysicalField;

    fn sample_state() -> SimState {
        let g = Grid::new(16).unwrap();
        let q = PhysicalField::from_fn(g, |x1, x2| (x1 + 0.1).sin() * (3.0 * x2).cos() + 1e-300 * x1)
            .to_spectral()
            .without_mean();
        SimState {
            t: 0.1 + 0.2,
            q,
            alpha: AlphaParam::new(1.0 / 3.0).unwrap(),
            step_count: 0,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample_state();
        let mut buf = Vec::new();
        write(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 16 * 16 * 16);
        assert_eq!(&buf[..4], b"AEUL");
        let back = read(buf.as_slice()).unwrap();
        assert_eq!(back.t.to_bits(), s.t.to_bits());
        assert_eq!(back.alpha.value().to_bits(), s.alpha.value().to_bits());
        for (a, b) in back.q.coeffs().iter().zip(s.q.coeffs()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.aeul");
        let s = sample_state();
        write_file(&p, &s).unwrap();
        assert_eq!(read_file(&p).unwrap().q, s.q);
    }

    #[test]
    fn rejects_corruption() {
        let s = sample_state();
        let mut buf = Vec::new();
        write(&mut buf, &s).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read(bad.as_slice()), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read(bad.as_slice()), Err(Error::Checkpoint(_))));
        assert!(read(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read(long.as_slice()).is_err());
    }
}
