//! Periodic collocation grid on the 2π-torus, Fourier transforms, spectral
//! derivatives and the 2/3-rule dealiasing filter.
//!
//! Spectral coefficients use the Fourier-series convention
//!
//! ```text
//! f(x) = Σ_k c_k exp(i k·x),   c_k = n⁻² Σ_j f(x_j) exp(-i k·x_j)
//! ```
//!
//! so that `cos(x₁)` has coefficient `1/2` at `k = (±1, 0)`. Arrays are stored
//! in FFT order: row index ↔ `k₁`, column index ↔ `k₂`, with integer
//! wavenumbers in `[-n/2 + 1, n/2]`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Length of one axis of the torus.
pub const PERIOD: f64 = 2.0 * PI;

/// Square periodic grid with `n` points per axis on `[0, 2π)²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Grid { n })
    }

    #[inline]
    pub fn n(self) -> usize {
        self.n
    }

    #[inline]
    pub fn period(self) -> f64 {
        PERIOD
    }

    #[inline]
    pub fn dx(self) -> f64 {
        PERIOD / self.n as f64
    }

    /// Quadrature weight of one collocation cell.
    #[inline]
    pub fn cell_area(self) -> f64 {
        self.dx() * self.dx()
    }

    #[inline]
    pub fn coord(self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Integer wavenumber stored at FFT index `i`.
    #[inline]
    pub fn wavenumber(self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT index of wavenumber `k`, if it is representable on this grid.
    #[inline]
    pub fn index(self, k: i64) -> Option<usize> {
        let n = self.n as i64;
        if k > n / 2 || k <= -n / 2 {
            None
        } else {
            Some(k.rem_euclid(n) as usize)
        }
    }

    #[inline]
    pub fn is_nyquist(self, k: i64) -> bool {
        k == self.n as i64 / 2
    }

    /// Whether mode `(k₁, k₂)` survives the 2/3 rule on this grid.
    #[inline]
    pub fn dealias_keeps(self, k1: i64, k2: i64) -> bool {
        dealias_keeps_mode(self.n, k1, k2)
    }

    /// Wavenumbers in FFT storage order.
    pub fn wavenumbers(self) -> Vec<i64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }
}

/// 2/3 rule for an `n`-point axis: keep `max(|k₁|, |k₂|) < n/3`.
///
/// For powers of two `n/3` is never an integer, so this coincides with
/// dropping `max(|k₁|, |k₂|) > n/3`; the strict form also removes the
/// `k = ±n/3` modes that a product of two retained fields aliases onto.
#[inline]
pub fn dealias_keeps_mode(n: usize, k1: i64, k2: i64) -> bool {
    3 * k1.abs().max(k2.abs()) < n as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized 2D transform of a square array in place.
fn fft2(data: &mut Array2<Complex64>, inverse: bool) {
    let n = data.nrows();
    debug_assert_eq!(n, data.ncols());
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let buf = data
        .as_slice_mut()
        .expect("spectral arrays are kept in standard layout");
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, n);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, n);
}

/// Real samples of a field at the collocation points `x_j = j·dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    grid: Grid,
    values: Array2<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: Grid) -> Self {
        PhysicalField {
            grid,
            values: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn from_values(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n, grid.n) {
            return Err(Error::GridMismatch {
                expected: grid.n,
                found: values.nrows(),
            });
        }
        Ok(PhysicalField {
            grid,
            values: values.as_standard_layout().into_owned(),
        })
    }

    /// Samples `f(x₁, x₂)` at every collocation point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| {
            f(grid.coord(i), grid.coord(j))
        });
        PhysicalField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / (self.grid.n * self.grid.n) as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Collocation quadrature of `∫ f dx`.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    pub fn to_spectral(&self) -> SpectralField {
        to_spectral(self)
    }
}

/// Fourier-series coefficients of a real field, stored in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralField {
            grid,
            coeffs: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Array2<Complex64>) -> Result<Self> {
        if coeffs.dim() != (grid.n, grid.n) {
            return Err(Error::GridMismatch {
                expected: grid.n,
                found: coeffs.nrows(),
            });
        }
        Ok(SpectralField {
            grid,
            coeffs: coeffs.as_standard_layout().into_owned(),
        })
    }

    /// Builds a real field from a list of modes; each `(k, c)` also sets the
    /// conjugate partner at `-k`.
    pub fn from_modes(grid: Grid, modes: &[((i64, i64), Complex64)]) -> Result<Self> {
        let mut f = SpectralField::zeros(grid);
        for &((k1, k2), c) in modes {
            f.set_mode(k1, k2, c)?;
        }
        Ok(f)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    /// Coefficient at wavenumber `(k₁, k₂)`; zero if not representable.
    pub fn mode(&self, k1: i64, k2: i64) -> Complex64 {
        match (self.grid.index(k1), self.grid.index(k2)) {
            (Some(i), Some(j)) => self.coeffs[[i, j]],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Sets `c` at `k` and `conj(c)` at `-k`.
    pub fn set_mode(&mut self, k1: i64, k2: i64, c: Complex64) -> Result<()> {
        let g = self.grid;
        let (Some(i), Some(j)) = (g.index(k1), g.index(k2)) else {
            return Err(Error::param(format!(
                "mode ({k1}, {k2}) not representable on n = {}",
                g.n
            )));
        };
        self.coeffs[[i, j]] = c;
        if let (Some(i), Some(j)) = (g.index(-k1), g.index(-k2)) {
            self.coeffs[[i, j]] = c.conj();
        }
        Ok(())
    }

    /// Spatial mean, i.e. the `k = 0` coefficient.
    #[inline]
    pub fn mean(&self) -> f64 {
        self.coeffs[[0, 0]].re
    }

    /// Σ |c_k|².
    pub fn power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `‖f‖_{L²}` via Parseval.
    pub fn l2_norm(&self) -> f64 {
        PERIOD * self.power().sqrt()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }

    /// Largest `|c(k) - conj(c(-k))|` over representable pairs.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let n = g.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            let k1 = g.wavenumber(i);
            for j in 0..n {
                let k2 = g.wavenumber(j);
                if let (Some(a), Some(b)) = (g.index(-k1), g.index(-k2)) {
                    let d = (self.coeffs[[i, j]] - self.coeffs[[a, b]].conj()).norm();
                    worst = worst.max(d);
                }
            }
        }
        worst
    }

    /// Multiplies every coefficient by a real symbol `m(k₁, k₂)`.
    pub fn apply_symbol(&self, symbol: impl Fn(i64, i64) -> f64) -> SpectralField {
        let g = self.grid;
        let ks = g.wavenumbers();
        let mut out = self.clone();
        for (i, mut row) in out.coeffs.outer_iter_mut().enumerate() {
            let k1 = ks[i];
            for (j, c) in row.iter_mut().enumerate() {
                *c *= symbol(k1, ks[j]);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.mapv(|c| c * s),
        }
    }

    /// Zeroes the `k = 0` coefficient.
    pub fn without_mean(mut self) -> SpectralField {
        self.coeffs[[0, 0]] = Complex64::new(0.0, 0.0);
        self
    }

    /// Spectral truncation onto a coarser grid. Nyquist lines of the target
    /// are dropped so the result stays Hermitian.
    pub fn restrict(&self, target: Grid) -> Result<SpectralField> {
        if target.n > self.grid.n {
            return Err(Error::param(format!(
                "cannot restrict n = {} onto finer n = {}",
                self.grid.n, target.n
            )));
        }
        Ok(self.resample(target))
    }

    /// Zero-padding onto a finer grid (Nyquist lines of the source dropped).
    pub fn prolong(&self, target: Grid) -> Result<SpectralField> {
        if target.n < self.grid.n {
            return Err(Error::param(format!(
                "cannot prolong n = {} onto coarser n = {}",
                self.grid.n, target.n
            )));
        }
        Ok(self.resample(target))
    }

    fn resample(&self, target: Grid) -> SpectralField {
        if target == self.grid {
            return self.clone();
        }
        let small = if target.n < self.grid.n { target } else { self.grid };
        let mut out = SpectralField::zeros(target);
        let half = small.n as i64 / 2;
        for k1 in (-half + 1)..half {
            for k2 in (-half + 1)..half {
                let c = self.mode(k1, k2);
                let i = target.index(k1).unwrap();
                let j = target.index(k2).unwrap();
                out.coeffs[[i, j]] = c;
            }
        }
        out
    }

    /// Exact trigonometric evaluation at an arbitrary point; O(n²) per call.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let g = self.grid;
        let ks = g.wavenumbers();
        let mut acc = 0.0;
        for (i, row) in self.coeffs.outer_iter().enumerate() {
            let p1 = ks[i] as f64 * x[0];
            for (j, c) in row.iter().enumerate() {
                let phase = p1 + ks[j] as f64 * x[1];
                acc += c.re * phase.cos() - c.im * phase.sin();
            }
        }
        acc
    }

    pub fn to_physical(&self) -> PhysicalField {
        to_physical(self)
    }
}

fn assert_same_grid(a: Grid, b: Grid) {
    assert_eq!(a, b, "spectral fields live on different grids");
}

impl Add for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_same_grid(self.grid, rhs.grid);
        SpectralField {
            grid: self.grid,
            coeffs: &self.coeffs + &rhs.coeffs,
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_same_grid(self.grid, rhs.grid);
        SpectralField {
            grid: self.grid,
            coeffs: &self.coeffs - &rhs.coeffs,
        }
    }
}

pub fn to_spectral(f: &PhysicalField) -> SpectralField {
    let g = f.grid;
    let mut data = f.values.mapv(|v| Complex64::new(v, 0.0));
    fft2(&mut data, false);
    let norm = 1.0 / (g.n * g.n) as f64;
    data.mapv_inplace(|c| c * norm);
    SpectralField {
        grid: g,
        coeffs: data,
    }
}

pub fn to_physical(f: &SpectralField) -> PhysicalField {
    let mut data = f.coeffs.clone();
    fft2(&mut data, true);
    PhysicalField {
        grid: f.grid,
        values: data.mapv(|c| c.re),
    }
}

/// Inverse transform of two real fields with a single complex FFT.
pub fn to_physical_pair(a: &SpectralField, b: &SpectralField) -> (PhysicalField, PhysicalField) {
    assert_same_grid(a.grid, b.grid);
    let i = Complex64::new(0.0, 1.0);
    let mut data = Zip::from(&a.coeffs)
        .and(&b.coeffs)
        .map_collect(|&x, &y| x + i * y);
    fft2(&mut data, true);
    (
        PhysicalField {
            grid: a.grid,
            values: data.mapv(|c| c.re),
        },
        PhysicalField {
            grid: a.grid,
            values: data.mapv(|c| c.im),
        },
    )
}

/// Multiplication by `i·k_axis`. The Nyquist wavenumber along the
/// differentiated axis has no resolved odd part and maps to zero.
pub fn spectral_derivative(f: &SpectralField, axis: Axis) -> SpectralField {
    let g = f.grid;
    let ks = g.wavenumbers();
    let mut out = f.clone();
    for (i, mut row) in out.coeffs.outer_iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            let k = match axis {
                Axis::X1 => ks[i],
                Axis::X2 => ks[j],
            };
            *c = if g.is_nyquist(k) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-c.im * k as f64, c.re * k as f64)
            };
        }
    }
    out
}

/// 2/3-rule truncation, see [`dealias_keeps_mode`].
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub(crate) fn dealias_in_place(f: &mut SpectralField) {
    let g = f.grid;
    let ks = g.wavenumbers();
    for (i, mut row) in f.coeffs.outer_iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            if !g.dealias_keeps(ks[i], ks[j]) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
}
