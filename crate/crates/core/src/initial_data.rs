//! Initial vorticities: smooth random fields, vortex patches, Koch-type
//! fractal patches and the approximating families `q₀^α`.
//!
//! Every generator returns a mean-zero field.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::spectral::{Grid, PhysicalField, SpectralField, PERIOD};
use crate::vorticity::{check_mean_zero, torus_distance, AlphaParam};

/// Random phases with `|q̂_k| = |k|^{-slope}` for `1 ≤ |k| ≤ k_max`.
pub fn smooth_random(seed: u64, spectrum_slope: f64, k_max: usize, grid: Grid) -> Result<SpectralField> {
    if k_max == 0 || 3 * k_max >= grid.n() {
        return Err(Error::param(format!(
            "k_max must lie in 1..n/3 for n = {}, got {k_max}",
            grid.n()
        )));
    }
    if !spectrum_slope.is_finite() {
        return Err(Error::param("spectrum slope must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = SpectralField::zeros(grid);
    let km = k_max as i64;
    for k1 in 0..=km {
        for k2 in -km..=km {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let ksq = (k1 * k1 + k2 * k2) as f64;
            if ksq > (km * km) as f64 {
                continue;
            }
            let phase = rng.random::<f64>() * PERIOD;
            let amp = ksq.sqrt().powf(-spectrum_slope);
            q.set_mode(k1, k2, Complex64::from_polar(amp, phase))?;
        }
    }
    Ok(q)
}

fn mean_zero_spectral(grid: Grid, mut values: Array2<f64>) -> SpectralField {
    let m = values.mean().unwrap_or(0.0);
    values.mapv_inplace(|v| v - m);
    PhysicalField::from_values(grid, values)
        .expect("grid-shaped")
        .to_spectral()
        .without_mean()
}

/// `A·χ_disc` sampled at the gridpoints, minus its grid mean. The disc is
/// measured with the torus distance.
pub fn disc_patch(center: [f64; 2], radius: f64, amplitude: f64, grid: Grid) -> Result<SpectralField> {
    check_radius(radius)?;
    let vals = PhysicalField::from_fn(grid, |a, b| {
        if torus_distance([a, b], center) < radius {
            amplitude
        } else {
            0.0
        }
    });
    Ok(mean_zero_spectral(grid, vals.into_values()))
}

/// Disc patch with its edge smoothed over one cell by a `tanh` profile.
pub fn disc_patch_mollified(center: [f64; 2], radius: f64, amplitude: f64, grid: Grid) -> Result<SpectralField> {
    check_radius(radius)?;
    let w = grid.dx();
    let vals = PhysicalField::from_fn(grid, |a, b| {
        let d = torus_distance([a, b], center);
        0.5 * amplitude * (1.0 - ((d - radius) / w).tanh())
    });
    Ok(mean_zero_spectral(grid, vals.into_values()))
}

fn check_radius(radius: f64) -> Result<()> {
    if !(0.0..std::f64::consts::PI).contains(&radius) {
        return Err(Error::param(format!("radius must lie in [0, pi), got {radius}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FractalGenerator {
    /// Koch snowflake on an equilateral triangle.
    KochLike,
}

impl FractalGenerator {
    /// Similarity dimension of the limiting boundary.
    pub fn nominal_dimension(self) -> f64 {
        match self {
            FractalGenerator::KochLike => 4f64.ln() / 3f64.ln(),
        }
    }
}

/// Circumradius of the snowflake, centered at `(π, π)`.
pub const KOCH_RADIUS: f64 = 2.4;

#[derive(Clone, Debug)]
pub struct FractalPatch {
    pub field: SpectralField,
    pub depth: u32,
    pub nominal_dim: f64,
    /// Box-counting estimate on the rasterized boundary.
    pub boundary_dim_estimate: f64,
}

/// Counter-clockwise Koch polygon of the given depth.
pub fn koch_polygon(depth: u32, center: [f64; 2], radius: f64) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = (0..3)
        .map(|i| {
            let th = std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / 3.0;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect();
    let (s, c) = (-std::f64::consts::FRAC_PI_3).sin_cos();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(pts.len() * 4);
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            // third rotated by -60°, outward for a counter-clockwise polygon
            let peak = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend_from_slice(&[a, p1, peak, p3]);
        }
        pts = next;
    }
    pts
}

/// Even-odd membership of the gridpoints, scanning along `x₂` for each row.
pub fn rasterize_polygon(poly: &[[f64; 2]], grid: Grid) -> Array2<bool> {
    let n = grid.n();
    let mut mask = Array2::from_elem((n, n), false);
    let mut xs = Vec::new();
    for i in 0..n {
        let y = grid.coord(i);
        xs.clear();
        for e in 0..poly.len() {
            let a = poly[e];
            let b = poly[(e + 1) % poly.len()];
            if (a[0] <= y) != (b[0] <= y) {
                let t = (y - a[0]) / (b[0] - a[0]);
                xs.push(a[1] + t * (b[1] - a[1]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            for j in 0..n {
                let x = grid.coord(j);
                if x >= pair[0] && x < pair[1] {
                    mask[[i, j]] = true;
                }
            }
        }
    }
    mask
}

/// Gridpoints inside the set with at least one periodic 4-neighbour
/// outside.
pub fn boundary_cells(mask: &Array2<bool>) -> Array2<bool> {
    let n = mask.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        mask[[i, j]]
            && (!mask[[(i + 1) % n, j]]
                || !mask[[(i + n - 1) % n, j]]
                || !mask[[i, (j + 1) % n]]
                || !mask[[i, (j + n - 1) % n]])
    })
}

/// Box-counting dimension from dyadic box sizes `min_box..=max_box`
/// (in cells): slope of `log N(b)` against `log(1/b)`.
pub fn box_counting_dimension(boundary: &Array2<bool>, min_box: usize, max_box: usize) -> Result<f64> {
    let n = boundary.nrows();
    if !(min_box.is_power_of_two() && max_box.is_power_of_two() && min_box < max_box && max_box <= n) {
        return Err(Error::param(format!("bad box range {min_box}..{max_box} for n = {n}")));
    }
    let mut inv = Vec::new();
    let mut counts = Vec::new();
    let mut b = min_box;
    while b <= max_box {
        let m = n / b;
        let mut hit = vec![false; m * m];
        for ((i, j), &on) in boundary.indexed_iter() {
            if on {
                hit[(i / b) * m + j / b] = true;
            }
        }
        inv.push(1.0 / b as f64);
        counts.push(hit.iter().filter(|&&h| h).count() as f64);
        b *= 2;
    }
    Ok(log_log_fit(&inv, &counts)?.slope)
}

/// Box sizes used for the dimension estimate: `n/64` to `n/8` cells.
/// Smaller boxes see the staircase of the rasterization, larger ones the
/// overall size of the patch.
fn box_range(n: usize) -> (usize, usize) {
    ((n / 64).max(2), (n / 8).max(8))
}

/// Koch snowflake patch of the given depth centered at `(π, π)`,
/// rasterized at the gridpoints and made mean-zero.
pub fn fractal_patch(generator: FractalGenerator, depth: u32, amplitude: f64, grid: Grid) -> Result<FractalPatch> {
    let n = grid.n();
    if 4usize.pow(depth) > n {
        return Err(Error::param(format!("depth {depth} unresolvable at n = {n}")));
    }
    let poly = match generator {
        FractalGenerator::KochLike => koch_polygon(depth, [std::f64::consts::PI; 2], KOCH_RADIUS),
    };
    let mask = rasterize_polygon(&poly, grid);
    let (lo, hi) = box_range(n);
    let dim = box_counting_dimension(&boundary_cells(&mask), lo, hi)?;
    let vals = mask.mapv(|m| if m { amplitude } else { 0.0 });
    Ok(FractalPatch {
        field: mean_zero_spectral(grid, vals),
        depth,
        nominal_dim: generator.nominal_dimension(),
        boundary_dim_estimate: dim,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Family {
    /// `q₀^α = ω₀`.
    #[default]
    Identity,
    /// `q₀^α = (I - αΔ)⁻¹ ω₀`.
    Mollified,
}

pub fn approximating_family(omega0: &SpectralField, a: AlphaParam, mode: Family) -> Result<SpectralField> {
    check_mean_zero(omega0)?;
    Ok(match mode {
        Family::Identity => omega0.clone(),
        Family::Mollified => omega0.apply_symbol(|k1, k2| a.filter_factor(k1, k2)),
    })
}
