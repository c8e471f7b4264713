//! Elliptic machinery of the vorticity formulation: Biot–Savart inversion,
//! the Helmholtz filter `(I - αΔ)⁻¹`, Lᵖ and α-norms, the torus distance and
//! the α-scaling monitors for `∇u^α` and `Δu^α`.

use std::ops::Sub;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    spectral_derivative, to_physical_pair, Axis, Grid, PhysicalField, SpectralField, PERIOD,
};

/// Filter length-scale squared; `0` selects the unfiltered Euler regime.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct AlphaParam(f64);

impl AlphaParam {
    pub const EULER: AlphaParam = AlphaParam(0.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::param(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(AlphaParam(alpha))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_euler(self) -> bool {
        self.0 == 0.0
    }

    /// Helmholtz symbol `1 / (1 + α|k|²)`.
    #[inline]
    pub fn filter_factor(self, k1: i64, k2: i64) -> f64 {
        1.0 / (1.0 + self.0 * (k1 * k1 + k2 * k2) as f64)
    }
}

/// Divergence-free, mean-zero vector field in spectral representation.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

/// Collocation samples of both velocity components.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalVelocity {
    pub u1: PhysicalField,
    pub u2: PhysicalField,
}

impl PhysicalVelocity {
    pub fn grid(&self) -> Grid {
        self.u1.grid()
    }

    /// Pointwise maximum of `|u|`; NaN if any sample is NaN.
    pub fn max_speed(&self) -> f64 {
        Zip::from(self.u1.values())
            .and(self.u2.values())
            .fold(0.0_f64, |m, &a, &b| {
                let s = (a * a + b * b).sqrt();
                if m.is_nan() || s.is_nan() {
                    f64::NAN
                } else {
                    m.max(s)
                }
            })
    }

    /// Pointwise speed `|u|` as a scalar field.
    pub fn speed(&self) -> PhysicalField {
        let vals = Zip::from(self.u1.values())
            .and(self.u2.values())
            .map_collect(|&a, &b| (a * a + b * b).sqrt());
        PhysicalField::from_values(self.grid(), vals).expect("same grid")
    }
}

impl VelocityField {
    pub fn zeros(grid: Grid) -> Self {
        VelocityField {
            u1: SpectralField::zeros(grid),
            u2: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u1.grid()
    }

    pub fn to_physical(&self) -> PhysicalVelocity {
        let (u1, u2) = to_physical_pair(&self.u1, &self.u2);
        PhysicalVelocity { u1, u2 }
    }

    /// `∂₁u₁ + ∂₂u₂` in spectral space.
    pub fn divergence(&self) -> SpectralField {
        &spectral_derivative(&self.u1, Axis::X1) + &spectral_derivative(&self.u2, Axis::X2)
    }

    /// Scalar curl `∂₁u₂ - ∂₂u₁`.
    pub fn curl(&self) -> SpectralField {
        &spectral_derivative(&self.u2, Axis::X1) - &spectral_derivative(&self.u1, Axis::X2)
    }

    /// Largest `|k₁û₁(k) + k₂û₂(k)|` over all modes.
    pub fn divergence_defect(&self) -> f64 {
        let ks = self.grid().wavenumbers();
        let mut worst = 0.0_f64;
        for ((i, j), a) in self.u1.coeffs().indexed_iter() {
            let b = self.u2.coeffs()[[i, j]];
            let d = *a * ks[i] as f64 + b * ks[j] as f64;
            worst = worst.max(d.norm());
        }
        worst
    }

    pub fn l2_norm(&self) -> f64 {
        PERIOD * (self.u1.power() + self.u2.power()).sqrt()
    }

    /// `‖∇u‖_{L²}`, i.e. `(2π)·(Σ |k|² |û(k)|²)^{1/2}`.
    pub fn grad_l2_norm(&self) -> f64 {
        PERIOD * self.weighted_power(|k2| k2).sqrt()
    }

    /// `‖Δu‖_{L²}`.
    pub fn lap_l2_norm(&self) -> f64 {
        PERIOD * self.weighted_power(|k2| k2 * k2).sqrt()
    }

    fn weighted_power(&self, w: impl Fn(f64) -> f64) -> f64 {
        let ks = self.grid().wavenumbers();
        let mut acc = 0.0;
        for ((i, j), a) in self.u1.coeffs().indexed_iter() {
            let k2 = (ks[i] * ks[i] + ks[j] * ks[j]) as f64;
            if k2 > 0.0 {
                acc += w(k2) * (a.norm_sqr() + self.u2.coeffs()[[i, j]].norm_sqr());
            }
        }
        acc
    }

    /// Components of `∇u` at the collocation points:
    /// `[∂₁u₁, ∂₂u₁, ∂₁u₂, ∂₂u₂]`.
    pub fn gradient_physical(&self) -> [PhysicalField; 4] {
        let (a, b) = to_physical_pair(
            &spectral_derivative(&self.u1, Axis::X1),
            &spectral_derivative(&self.u1, Axis::X2),
        );
        let (c, d) = to_physical_pair(
            &spectral_derivative(&self.u2, Axis::X1),
            &spectral_derivative(&self.u2, Axis::X2),
        );
        [a, b, c, d]
    }

    pub fn restrict(&self, target: Grid) -> Result<VelocityField> {
        Ok(VelocityField {
            u1: self.u1.restrict(target)?,
            u2: self.u2.restrict(target)?,
        })
    }
}

impl Sub for &VelocityField {
    type Output = VelocityField;

    fn sub(self, rhs: &VelocityField) -> VelocityField {
        VelocityField {
            u1: &self.u1 - &rhs.u1,
            u2: &self.u2 - &rhs.u2,
        }
    }
}

/// Relative tolerance on `|q̂(0)|` before a field counts as having a mean.
const MEAN_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_mean_zero(q: &SpectralField) -> Result<()> {
    let mean = q.coeffs()[[0, 0]].norm();
    if mean > MEAN_TOLERANCE * q.max_coeff().max(1.0) {
        return Err(Error::NonZeroMean(q.mean()));
    }
    Ok(())
}

/// Divergence-free `v` with `curl v = q`:
/// `v̂(k) = i (k₂, -k₁) q̂(k) / |k|²`, `v̂(0) = 0`.
///
/// Modes on a Nyquist line (`|k₁| = n/2` or `|k₂| = n/2`) have no resolved
/// odd part and are set to zero.
pub fn biot_savart(q: &SpectralField) -> Result<VelocityField> {
    check_mean_zero(q)?;
    Ok(biot_savart_unchecked(q))
}

pub(crate) fn biot_savart_unchecked(q: &SpectralField) -> VelocityField {
    velocity_from_symbol(q, |ksq, _, _| 1.0 / ksq)
}

/// `(I - αΔ)⁻¹` applied on top of Biot–Savart in a single pass.
pub(crate) fn biot_savart_filtered(q: &SpectralField, alpha: AlphaParam) -> VelocityField {
    velocity_from_symbol(q, |ksq, k1, k2| alpha.filter_factor(k1, k2) / ksq)
}

/// `û = i (k₂, -k₁) m(k) q̂` for a real scalar symbol `m`.
fn velocity_from_symbol(q: &SpectralField, symbol: impl Fn(f64, i64, i64) -> f64) -> VelocityField {
    let g = q.grid();
    let ks = g.wavenumbers();
    let mut c1 = Array2::<Complex64>::zeros((g.n(), g.n()));
    let mut c2 = Array2::<Complex64>::zeros((g.n(), g.n()));
    for ((i, j), &qk) in q.coeffs().indexed_iter() {
        let (k1, k2) = (ks[i], ks[j]);
        if (k1 == 0 && k2 == 0) || g.is_nyquist(k1) || g.is_nyquist(k2) {
            continue;
        }
        let s = qk * symbol((k1 * k1 + k2 * k2) as f64, k1, k2);
        // û₁ = i k₂ s, û₂ = -i k₁ s
        c1[[i, j]] = Complex64::new(-s.im * k2 as f64, s.re * k2 as f64);
        c2[[i, j]] = Complex64::new(s.im * k1 as f64, -s.re * k1 as f64);
    }
    VelocityField {
        u1: SpectralField::from_coeffs(g, c1).expect("grid-shaped"),
        u2: SpectralField::from_coeffs(g, c2).expect("grid-shaped"),
    }
}

/// `û(k) = v̂(k) / (1 + α|k|²)`.
pub fn helmholtz_filter(v: &VelocityField, alpha: AlphaParam) -> VelocityField {
    VelocityField {
        u1: v.u1.apply_symbol(|k1, k2| alpha.filter_factor(k1, k2)),
        u2: v.u2.apply_symbol(|k1, k2| alpha.filter_factor(k1, k2)),
    }
}

/// `v̂(k) = (1 + α|k|²) û(k)`, the inverse of [`helmholtz_filter`].
pub fn helmholtz_unfilter(u: &VelocityField, alpha: AlphaParam) -> VelocityField {
    let a = alpha.value();
    let sym = |k1: i64, k2: i64| 1.0 + a * (k1 * k1 + k2 * k2) as f64;
    VelocityField {
        u1: u.u1.apply_symbol(sym),
        u2: u.u2.apply_symbol(sym),
    }
}

/// Filtered velocity `u^α = (I - αΔ)⁻¹ k * q`.
pub fn filtered_velocity(q: &SpectralField, alpha: AlphaParam) -> Result<VelocityField> {
    check_mean_zero(q)?;
    Ok(biot_savart_filtered(q, alpha))
}

/// Collocation quadrature of `(∫|f|ᵖ)^{1/p}`; `p = ∞` gives `max |f|`.
pub fn lp_norm(f: &PhysicalField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::param(format!("Lp exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let w = f.grid().cell_area();
    let sum: f64 = if p == 1.0 {
        f.values().iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * w).powf(1.0 / p))
}

/// `‖|u|‖_{Lᵖ}` of a vector field sampled at the collocation points.
pub fn vector_lp_norm(u: &PhysicalVelocity, p: f64) -> Result<f64> {
    lp_norm(&u.speed(), p)
}

/// `‖u‖_α = (‖u‖²_{L²} + α‖∇u‖²_{L²})^{1/2}` via Parseval.
pub fn alpha_norm(u: &VelocityField, alpha: AlphaParam) -> f64 {
    let a = alpha.value();
    PERIOD * (u.u1.power() + u.u2.power() + a * u.weighted_power(|k2| k2)).sqrt()
}

/// Torus distance: Euclidean length of the shortest representative of
/// `x - y` modulo `2π` in each coordinate.
pub fn torus_distance(x: [f64; 2], y: [f64; 2]) -> f64 {
    let wrap = |d: f64| {
        let r = d.rem_euclid(PERIOD);
        r.min(PERIOD - r)
    };
    wrap(x[0] - y[0]).hypot(wrap(x[1] - y[1]))
}

/// `‖∇v‖_{Lᵖ}` with the pointwise Frobenius norm of the gradient tensor.
pub fn gradient_lp_norm(v: &VelocityField, p: f64) -> Result<f64> {
    let [a, b, c, d] = v.gradient_physical();
    let vals = Zip::from(a.values())
        .and(b.values())
        .and(c.values())
        .and(d.values())
        .map_collect(|&a, &b, &c, &d| (a * a + b * b + c * c + d * d).sqrt());
    lp_norm(&PhysicalField::from_values(v.grid(), vals)?, p)
}

/// Calderón–Zygmund ratio `‖∇(k * q)‖_{Lᵖ} / ‖q‖_{Lᵖ}`.
pub fn calderon_zygmund_ratio(q: &SpectralField, p: f64) -> Result<f64> {
    let v = biot_savart(q)?;
    let num = gradient_lp_norm(&v, p)?;
    let den = lp_norm(&q.to_physical(), p)?;
    if den == 0.0 {
        return Err(Error::param("zero vorticity has no Calderon-Zygmund ratio"));
    }
    Ok(num / den)
}

/// Measured `‖∇u^α‖_{L²}` and `‖Δu^α‖_{L²}` together with the α-exponents
/// of the corresponding scaling bounds in terms of `‖q‖_{Lᵖ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRecord {
    pub grad_u_l2: f64,
    pub lap_u_l2: f64,
    pub q_lp: f64,
    /// Exponent `e` in `‖∇u^α‖_{L²} ≲ α^e ‖q‖_{Lᵖ}`.
    pub grad_exponent: f64,
    /// Exponent `e` in `‖Δu^α‖_{L²} ≲ α^e ‖q‖_{Lᵖ}`.
    pub lap_exponent: f64,
}

impl ScalingRecord {
    /// `(α^{grad_exponent}, α^{lap_exponent})`.
    pub fn predicted_scalings(&self, alpha: AlphaParam) -> (f64, f64) {
        let a = alpha.value();
        (a.powf(self.grad_exponent), a.powf(self.lap_exponent))
    }

    /// Smallest constants `C` making both scaling bounds hold for this record.
    pub fn implied_constants(&self, alpha: AlphaParam) -> (f64, f64) {
        let (g, l) = self.predicted_scalings(alpha);
        (self.grad_u_l2 / (g * self.q_lp), self.lap_u_l2 / (l * self.q_lp))
    }
}

pub fn scaling_monitor(q: &SpectralField, alpha: AlphaParam, p: f64) -> Result<ScalingRecord> {
    if alpha.is_euler() {
        return Err(Error::param("scaling monitor requires alpha > 0"));
    }
    if p.is_nan() || p <= 1.0 {
        return Err(Error::param(format!("scaling monitor requires p > 1, got {p}")));
    }
    let u = filtered_velocity(q, alpha)?;
    let (grad_exponent, lap_exponent) = if p <= 2.0 {
        (0.5 - 1.0 / p, -1.0 / p)
    } else {
        (0.0, -0.5)
    };
    Ok(ScalingRecord {
        grad_u_l2: u.grad_l2_norm(),
        lap_u_l2: u.lap_l2_norm(),
        q_lp: lp_norm(&q.to_physical(), p)?,
        grad_exponent,
        lap_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, SQRT_2};

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn cos_x1(g: Grid) -> SpectralField {
        PhysicalField::from_fn(g, |x1, _| x1.cos()).to_spectral()
    }

    fn assert_physical_eq(a: &PhysicalField, f: impl Fn(f64, f64) -> f64, tol: f64) {
        let b = PhysicalField::from_fn(a.grid(), f);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn biot_savart_examples() {
        let g = grid(16);
        let v = biot_savart(&SpectralField::zeros(g)).unwrap();
        assert_eq!(v.l2_norm(), 0.0);

        let v = biot_savart(&cos_x1(g)).unwrap().to_physical();
        assert_physical_eq(&v.u1, |_, _| 0.0, 1e-14);
        assert_physical_eq(&v.u2, |x1, _| x1.sin(), 1e-14);

        let q = PhysicalField::from_fn(g, |x1, x2| x1.cos() + x2.cos()).to_spectral();
        let v = biot_savart(&q).unwrap().to_physical();
        assert_physical_eq(&v.u1, |_, x2| -x2.sin(), 1e-14);
        assert_physical_eq(&v.u2, |x1, _| x1.sin(), 1e-14);
    }

    #[test]
    fn biot_savart_rejects_mean() {
        let g = grid(8);
        let q = PhysicalField::from_fn(g, |x1, _| 1.0 + x1.cos()).to_spectral();
        assert!(matches!(biot_savart(&q), Err(Error::NonZeroMean(_))));
    }

    #[test]
    fn filter_examples() {
        let g = grid(16);
        let v = biot_savart(&cos_x1(g)).unwrap();
        assert_eq!(helmholtz_filter(&v, AlphaParam::EULER), v);
        let u = helmholtz_filter(&v, AlphaParam::new(1.0).unwrap());
        assert_abs_diff_eq!(u.u2.mode(1, 0).norm(), 0.5 * v.u2.mode(1, 0).norm(), epsilon = 1e-15);

        let a = AlphaParam::new(0.25).unwrap();
        assert_abs_diff_eq!(a.filter_factor(3, 4), 0.137_931_034_482_758_6, epsilon = 1e-15);

        let back = helmholtz_unfilter(&u, AlphaParam::new(1.0).unwrap());
        assert_abs_diff_eq!(back.u2.mode(1, 0).im, v.u2.mode(1, 0).im, epsilon = 1e-15);
        assert_eq!(helmholtz_unfilter(&v, AlphaParam::EULER), v);

        let mut single = VelocityField::zeros(g);
        single.u1.set_mode(1, 0, Complex64::new(1.0, 0.0)).unwrap();
        let doubled = helmholtz_unfilter(&single, AlphaParam::new(1.0).unwrap());
        assert_eq!(doubled.u1.mode(1, 0), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn negative_alpha_rejected() {
        assert!(AlphaParam::new(-0.1).is_err());
        assert!(AlphaParam::new(f64::NAN).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid(16);
        let one = PhysicalField::from_fn(g, |_, _| 1.0);
        assert_abs_diff_eq!(lp_norm(&one, 2.0).unwrap(), 2.0 * PI, epsilon = 1e-13);
        let s = PhysicalField::from_fn(g, |x1, _| x1.sin());
        assert_abs_diff_eq!(lp_norm(&s, f64::INFINITY).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lp_norm(&s, 2.0).unwrap(), PI * SQRT_2, epsilon = 1e-12);
        assert!(lp_norm(&s, 0.5).is_err());
    }

    #[test]
    fn alpha_norm_examples() {
        let g = grid(16);
        let u = biot_savart(&cos_x1(g)).unwrap();
        assert_abs_diff_eq!(alpha_norm(&u, AlphaParam::EULER), u.l2_norm(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            alpha_norm(&u, AlphaParam::new(0.5).unwrap()),
            PI * 3f64.sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(alpha_norm(&VelocityField::zeros(g), AlphaParam::new(0.5).unwrap()), 0.0);
    }

    #[test]
    fn torus_distance_examples() {
        assert_eq!(torus_distance([1.0, 2.0], [1.0, 2.0]), 0.0);
        assert_abs_diff_eq!(
            torus_distance([0.1, 0.0], [6.2, 0.0]),
            (0.1 - 6.2 + 2.0 * PI).abs(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(torus_distance([0.1, 0.0], [6.2, 0.0]), 0.183_185_307_179_586_3, epsilon = 1e-12);
        assert_abs_diff_eq!(torus_distance([0.0, 0.0], [PI, PI]), PI * SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn scaling_monitor_single_mode() {
        let g = grid(16);
        let r = scaling_monitor(&cos_x1(g), AlphaParam::new(1.0).unwrap(), 2.0).unwrap();
        assert_abs_diff_eq!(r.grad_u_l2, PI * SQRT_2 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.lap_u_l2, PI * SQRT_2 / 2.0, epsilon = 1e-12);
        assert_eq!((r.grad_exponent, r.lap_exponent), (0.0, -0.5));
        assert!(r.lap_u_l2 <= r.q_lp + 1e-12);
        assert!(scaling_monitor(&cos_x1(g), AlphaParam::EULER, 2.0).is_err());

        let r = scaling_monitor(&cos_x1(g), AlphaParam::new(0.1).unwrap(), 4.0 / 3.0).unwrap();
        assert_abs_diff_eq!(r.grad_exponent, 0.5 - 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(r.lap_exponent, -0.75, epsilon = 1e-15);
    }
}
