//! Closed-form convergence-rate bounds and an empirical Besov modulus.
//!
//! The constants `C₁, C₂, C` are not explicit in the theory; every
//! evaluator takes them as parameters and reports should show a range.

use std::io::Write;

use ndarray::{s, Array2, Zip};

use crate::error::{Error, Result};
use crate::fit::{log_log_fit, LinearFit};
use crate::spectral::{PhysicalField, SpectralField};
use crate::vorticity::{biot_savart_filtered, biot_savart_unchecked, check_mean_zero, lp_norm, AlphaParam};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    /// `‖ω₀‖_{L∞}`.
    pub m: f64,
    /// Initial closeness `γ₀^α`.
    pub gamma0: f64,
    /// Largest α for which `γ₀^α ≤ 1/2` is asserted.
    pub alpha_bar: f64,
    /// Horizon `T`.
    pub horizon: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            c1: 1.0,
            c2: 1.0,
            c: 1.0,
            m: 1.0,
            gamma0: 0.0,
            alpha_bar: 1.0,
            horizon: 1.0,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("c1", self.c1), ("c2", self.c2), ("c", self.c), ("alpha_bar", self.alpha_bar)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [("m", self.m), ("gamma0", self.gamma0), ("horizon", self.horizon)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Same constants with `C₁ = C₂ = C = c`.
    pub fn with_uniform_constants(mut self, c: f64) -> Self {
        self.c1 = c;
        self.c2 = c;
        self.c = c;
        self
    }
}

/// `γ₀^α = ‖u^α₀ - u₀‖_{L²} + α‖Δu^α₀‖_{L²}`.
pub fn gamma0(q0_alpha: &SpectralField, omega0: &SpectralField, a: AlphaParam) -> Result<f64> {
    check_mean_zero(q0_alpha)?;
    check_mean_zero(omega0)?;
    if q0_alpha.grid() != omega0.grid() {
        return Err(Error::GridMismatch {
            expected: q0_alpha.grid().n(),
            found: omega0.grid().n(),
        });
    }
    let ua = biot_savart_filtered(q0_alpha, a);
    let u = biot_savart_unchecked(omega0);
    Ok((&ua - &u).l2_norm() + a.value() * ua.lap_l2_norm())
}

/// `K(α, t) = exp{2 - 2e^{-C₂t}}·(C₁√α·T + γ₀)^{e^{-C₂t}} + C√α`.
pub fn velocity_rate_k(a: AlphaParam, t: f64, p: &BoundParams) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0 && t <= p.horizon) {
        return Err(Error::param(format!("t = {t} outside [0, {}]", p.horizon)));
    }
    let decay = (-p.c2 * t).exp();
    let sa = a.value().sqrt();
    let base = p.c1 * sa * p.horizon + p.gamma0;
    Ok((2.0 - 2.0 * decay).exp() * base.powf(decay) + p.c * sa)
}

/// Largest admissible α at horizon `T`:
/// `min(ᾱ, (exp{2(2 - 2e^{C₂T})} - γ₀) / (C₁T)²)`, or `None` when the
/// numerator is not positive.
pub fn max_admissible_alpha(p: &BoundParams) -> Result<Option<f64>> {
    p.validate()?;
    if p.horizon == 0.0 {
        return Err(Error::param("horizon T must be positive"));
    }
    let num = admissibility_threshold(p) - p.gamma0;
    if num <= 0.0 {
        return Ok(None);
    }
    Ok(Some((num / (p.c1 * p.horizon).powi(2)).min(p.alpha_bar)))
}

/// `exp{2(2 - 2e^{C₂T})}`, the right side the admissibility condition
/// compares `α(C₁T)² + γ₀` against.
pub fn admissibility_threshold(p: &BoundParams) -> f64 {
    (2.0 * (2.0 - 2.0 * (p.c2 * p.horizon).exp())).exp()
}

/// `𝓜(x) = ∫ₓ¹ dr / (r(2 - log r)) = log(2 - log x) - log 2` for `x ∈ (0, 1]`.
pub fn osgood_modulus(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::param(format!("Osgood modulus needs x in (0, 1], got {x}")));
    }
    Ok((2.0 - x.ln()).ln() - std::f64::consts::LN_2)
}

/// Osgood conclusion for `μ(x) = x(2 - log x)`:
/// `exp{2 - 2e^{-c₂t}}·η^{e^{-c₂t}}`.
pub fn osgood_bound(eta: f64, c2: f64, t: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(t >= 0.0 && t.is_finite() && c2.is_finite()) {
        return Err(Error::param(format!("need finite c2 and t >= 0, got c2 = {c2}, t = {t}")));
    }
    let decay = (-c2 * t).exp();
    Ok((2.0 - 2.0 * decay).exp() * eta.powf(decay))
}

/// `2·exp{2 - 2e^{-c(t-s)}}·K^{e^{-c·T}}`.
pub fn flow_rate_bound(k_val: f64, t: f64, s: f64, c: f64, horizon: f64) -> Result<f64> {
    if s > t {
        return Err(Error::param(format!("need s <= t, got s = {s}, t = {t}")));
    }
    if !(k_val >= 0.0) {
        return Err(Error::param(format!("K must be >= 0, got {k_val}")));
    }
    Ok(2.0 * (2.0 - 2.0 * (-c * (t - s)).exp()).exp() * k_val.powf((-c * horizon).exp()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModulusKind {
    /// Table interpolation.
    Generic,
    /// `ψ(h) = hˢ`.
    Besov { s: f64 },
}

/// Modulus of continuity `ψ`, nondecreasing with `ψ(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusEstimate {
    pub kind: ModulusKind,
    /// Sampled `(h, ψ(h))`, increasing in `h`.
    pub table: Vec<(f64, f64)>,
}

impl ModulusEstimate {
    pub fn besov(s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::param(format!("Besov exponent must lie in (0, 1], got {s}")));
        }
        Ok(ModulusEstimate {
            kind: ModulusKind::Besov { s },
            table: Vec::new(),
        })
    }

    /// Generic modulus from samples; the running maximum is taken so the
    /// table is nondecreasing.
    pub fn generic(mut table: Vec<(f64, f64)>) -> Result<Self> {
        if table.is_empty() || table.iter().any(|&(h, v)| !(h > 0.0) || !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::param("modulus table needs positive h and finite psi >= 0"));
        }
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut run = 0.0_f64;
        for e in table.iter_mut() {
            run = run.max(e.1);
            e.1 = run;
        }
        Ok(ModulusEstimate {
            kind: ModulusKind::Generic,
            table,
        })
    }

    pub fn psi(&self, h: f64) -> Result<f64> {
        match self.kind {
            ModulusKind::Besov { s } => Ok(h.max(0.0).powf(s)),
            ModulusKind::Generic => {
                let max = self.table.last().map_or(0.0, |e| e.0);
                if !(h >= 0.0 && h <= max) {
                    return Err(Error::OutsideModulusTable { h, max });
                }
                let mut prev = (0.0, 0.0);
                for &(x, y) in &self.table {
                    if h <= x {
                        let w = if x > prev.0 { (h - prev.0) / (x - prev.0) } else { 1.0 };
                        return Ok(prev.1 + w * (y - prev.1));
                    }
                    prev = (x, y);
                }
                Ok(prev.1)
            }
        }
    }
}

/// `C·M^{1-1/p}·max(ψ(K), K^{e^{-C·T}/(2p)})`.
pub fn vorticity_rate_bound(k_val: f64, modulus: &ModulusEstimate, p: f64, params: &BoundParams) -> Result<f64> {
    params.validate()?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param(format!("p must lie in (1, inf), got {p}")));
    }
    if !(k_val >= 0.0) {
        return Err(Error::param(format!("K must be >= 0, got {k_val}")));
    }
    let psi = modulus.psi(k_val)?;
    let power = k_val.powf((-params.c * params.horizon).exp() / (2.0 * p));
    Ok(params.c * params.m.powf(1.0 - 1.0 / p) * psi.max(power))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BesovFit {
    /// Besov-kind modulus with the slope capped at 1; its table holds the
    /// measured `(|h|, ψ)` samples.
    pub modulus: ModulusEstimate,
    /// Uncapped log-log fit.
    pub fit: LinearFit,
}

impl BesovFit {
    pub fn s(&self) -> f64 {
        match self.modulus.kind {
            ModulusKind::Besov { s } => s,
            ModulusKind::Generic => unreachable!("fit always yields a Besov modulus"),
        }
    }
}

/// Dyadic cell shifts `1, 2, 4, …, n/32` (at least up to 4), so the
/// largest `|h|` stays near `2π/32` where the small-`h` power law holds.
pub fn default_shifts(n: usize) -> Vec<usize> {
    let top = (n / 32).max(4);
    std::iter::successors(Some(1usize), |m| Some(m * 2))
        .take_while(|&m| m <= top)
        .collect()
}

fn rolled(v: &Array2<f64>, d1: usize, d2: usize) -> Array2<f64> {
    let n = v.nrows();
    let mut out = Array2::zeros((n, n));
    // out[i, j] = v[(i + d1) % n, (j + d2) % n]
    let rows = |a: usize| [(0, n - a, a, n), (n - a, n, 0, a)];
    for (o0, o1, s0, s1) in rows(d1) {
        for (p0, p1, t0, t1) in rows(d2) {
            if o1 > o0 && p1 > p0 {
                out.slice_mut(s![o0..o1, p0..p1]).assign(&v.slice(s![s0..s1, t0..t1]));
            }
        }
    }
    out
}

/// Fits `ψ(h) = sup_{|h|_∞ = h} ‖ω₀(· + h) - ω₀‖_{Lᵖ}` against `h` in
/// log-log over grid shifts of `m` cells along both axes and both
/// diagonals. `|h|` is measured in the max norm, so `h = m·dx`.
pub fn besov_modulus_fit(omega0: &PhysicalField, p: f64, shifts: &[usize]) -> Result<BesovFit> {
    if shifts.len() < 3 {
        return Err(Error::param(format!("need at least 3 shifts, got {}", shifts.len())));
    }
    let g = omega0.grid();
    let n = g.n();
    if shifts.iter().any(|&m| m == 0 || m >= n) {
        return Err(Error::param("shifts must lie in 1..n cells"));
    }
    let v = omega0.values();
    let mut table = Vec::with_capacity(shifts.len());
    for &m in shifts {
        let mut sup = 0.0_f64;
        for (d1, d2) in [(m, 0), (0, m), (m, m), (m, n - m)] {
            let mut diff = rolled(v, d1, d2);
            Zip::from(&mut diff).and(v).for_each(|a, &b| *a -= b);
            sup = sup.max(lp_norm(&PhysicalField::from_values(g, diff)?, p)?);
        }
        table.push((m as f64 * g.dx(), sup));
    }
    if table.iter().any(|&(_, y)| !(y > 0.0)) {
        return Err(Error::DegenerateFit("zero increments at some shift".into()));
    }
    let (hs, ys): (Vec<f64>, Vec<f64>) = table.iter().copied().unzip();
    let fit = log_log_fit(&hs, &ys)?;
    if !(fit.slope > 0.0) {
        return Err(Error::DegenerateFit(format!("nonpositive slope {}", fit.slope)));
    }
    let s = fit.slope.min(1.0);
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(BesovFit {
        modulus: ModulusEstimate {
            kind: ModulusKind::Besov { s },
            table,
        },
        fit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub alpha: f64,
    pub t: f64,
    pub k: f64,
    pub flow_bound: f64,
    pub vort_bound: f64,
}

/// Bound table over `alphas × times`, flows compared from `s = 0`.
pub fn bound_table(params: &BoundParams, alphas: &[f64], times: &[f64], modulus: &ModulusEstimate, p: f64) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::with_capacity(alphas.len() * times.len());
    for &alpha in alphas {
        let a = AlphaParam::new(alpha)?;
        for &t in times {
            let k = velocity_rate_k(a, t, params)?;
            rows.push(BoundRow {
                alpha,
                t,
                k,
                flow_bound: flow_rate_bound(k, t, 0.0, params.c, params.horizon)?,
                vort_bound: vorticity_rate_bound(k, modulus, p, params)?,
            });
        }
    }
    Ok(rows)
}

/// CSV with header `alpha,t,K,flow_bound,vort_bound`.
pub fn write_bound_csv<W: Write>(rows: &[BoundRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "alpha,t,K,flow_bound,vort_bound")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.alpha, r.t, r.k, r.flow_bound, r.vort_bound)?;
    }
    Ok(())
}
