//! Particle flow maps `X_{t,s}` driven by sampled velocity histories,
//! measure-preservation checks, vorticity reconstruction by composition
//! `ω(t, x) = ω₀(X_{t,0}(x))` and flow-distance diagnostics.
//!
//! Particles are seeded one per quadrature cell, at the collocation point
//! that the cell is centered on, so particle averages coincide with the
//! grid quadrature.

use std::io::Write;

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp;
use crate::spectral::{Grid, PhysicalField, PERIOD};
use crate::vorticity::{torus_distance, PhysicalVelocity};

/// Slack allowed when matching a requested time against the history ends.
const TIME_SLACK: f64 = 1e-12;

#[inline]
fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(PERIOD);
    if r >= PERIOD {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    positions: Vec<[f64; 2]>,
    t_origin: f64,
}

impl ParticleSet {
    /// Wraps every position into `[0, 2π)²`.
    pub fn new(positions: Vec<[f64; 2]>, t_origin: f64) -> Self {
        let positions = positions.into_iter().map(|[a, b]| [wrap(a), wrap(b)]).collect();
        ParticleSet { positions, t_origin }
    }

    /// One particle per gridpoint in row-major order, `id = i·n + j`.
    pub fn lattice(grid: Grid, t_origin: f64) -> Self {
        let n = grid.n();
        let positions = (0..n * n)
            .map(|id| [grid.coord(id / n), grid.coord(id % n)])
            .collect();
        ParticleSet { positions, t_origin }
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn t_origin(&self) -> f64 {
        self.t_origin
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// CSV with header `x1,x2,id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,x2,id")?;
        for (id, p) in self.positions.iter().enumerate() {
            writeln!(w, "{},{},{}", p[0], p[1], id)?;
        }
        Ok(())
    }
}

/// Collocated velocity snapshots at increasing times, interpolated
/// bicubically in space and linearly in time.
#[derive(Clone, Debug)]
pub struct VelocityHistory {
    grid: Grid,
    times: Vec<f64>,
    snapshots: Vec<PhysicalVelocity>,
}

impl VelocityHistory {
    pub fn new(grid: Grid) -> Self {
        VelocityHistory {
            grid,
            times: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    /// Time-independent field on `[t_start, t_end]`.
    pub fn steady(velocity: PhysicalVelocity, t_start: f64, t_end: f64) -> Result<Self> {
        let mut h = VelocityHistory::new(velocity.grid());
        h.push(t_start, velocity.clone())?;
        h.push(t_end, velocity)?;
        Ok(h)
    }

    /// Appends a snapshot; times must increase strictly.
    pub fn push(&mut self, t: f64, velocity: PhysicalVelocity) -> Result<()> {
        if velocity.grid() != self.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.n(),
                found: velocity.grid().n(),
            });
        }
        if !t.is_finite() {
            return Err(Error::param("snapshot time must be finite"));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::param(format!("snapshot time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.snapshots.push(velocity);
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[PhysicalVelocity] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn span(&self) -> (f64, f64) {
        match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (f64::NAN, f64::NAN),
        }
    }

    fn check_covers(&self, t: f64) -> Result<()> {
        let (start, end) = self.span();
        if self.len() < 2 || !(t >= start - TIME_SLACK && t <= end + TIME_SLACK) {
            return Err(Error::OutsideHistory { t, start, end });
        }
        Ok(())
    }

    /// Index `k` of the interval `[t_k, t_{k+1}]` containing `t`.
    fn interval(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.len() - 2)
    }

    #[inline]
    fn eval_in(&self, k: usize, x: [f64; 2], t: f64) -> [f64; 2] {
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let th = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = &self.snapshots[k];
        let b = &self.snapshots[k + 1];
        let v = |f: &PhysicalField, g: &PhysicalField| {
            let fa = interp::bicubic(f.values(), x);
            let fb = interp::bicubic(g.values(), x);
            fa + th * (fb - fa)
        };
        [v(&a.u1, &b.u1), v(&a.u2, &b.u2)]
    }

    /// Interpolated velocity at `(x, t)`.
    pub fn velocity_at(&self, x: [f64; 2], t: f64) -> Result<[f64; 2]> {
        self.check_covers(t)?;
        Ok(self.eval_in(self.interval(t), x, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvectOptions {
    /// RK4 substeps per snapshot interval.
    pub substeps: usize,
}

impl Default for AdvectOptions {
    fn default() -> Self {
        AdvectOptions { substeps: 2 }
    }
}

/// Transports particles from `p.t_origin()` to `s_target` along
/// `Ẋ = u(s, X)` with the default options.
pub fn advect_particles(p: &ParticleSet, history: &VelocityHistory, s_target: f64) -> Result<ParticleSet> {
    advect_particles_with(p, history, s_target, AdvectOptions::default())
}

/// RK4 per particle. Step boundaries always include the snapshot times
/// between the endpoints so the integrand stays smooth in time inside
/// each step. Backward transport (`s_target < t_origin`) is supported.
pub fn advect_particles_with(
    p: &ParticleSet,
    history: &VelocityHistory,
    s_target: f64,
    opts: AdvectOptions,
) -> Result<ParticleSet> {
    if opts.substeps == 0 {
        return Err(Error::param("substeps must be positive"));
    }
    let t0 = p.t_origin;
    if s_target == t0 {
        return Ok(p.clone());
    }
    history.check_covers(t0)?;
    history.check_covers(s_target)?;

    let (lo, hi) = (t0.min(s_target), t0.max(s_target));
    let mut breaks: Vec<f64> = history
        .times
        .iter()
        .copied()
        .filter(|&t| t > lo && t < hi)
        .collect();
    breaks.insert(0, lo);
    breaks.push(hi);
    if s_target < t0 {
        breaks.reverse();
    }
    // (interval index, start, step, count)
    let segments: Vec<(usize, f64, f64, usize)> = breaks
        .windows(2)
        .map(|w| {
            let k = history.interval(0.5 * (w[0] + w[1]));
            let h = (w[1] - w[0]) / opts.substeps as f64;
            (k, w[0], h, opts.substeps)
        })
        .collect();

    let positions = p
        .positions
        .par_iter()
        .map(|&x0| {
            let mut x = x0;
            for &(k, ta, h, m) in &segments {
                for s in 0..m {
                    let t = ta + s as f64 * h;
                    let f = |y: [f64; 2], tt: f64| history.eval_in(k, y, tt);
                    let k1 = f(x, t);
                    let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], t + 0.5 * h);
                    let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], t + 0.5 * h);
                    let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]], t + h);
                    for c in 0..2 {
                        x[c] += h / 6.0 * (k1[c] + 2.0 * (k2[c] + k3[c]) + k4[c]);
                    }
                }
            }
            [wrap(x[0]), wrap(x[1])]
        })
        .collect();
    Ok(ParticleSet {
        positions,
        t_origin: s_target,
    })
}

/// `|mean over particles of f(X(x)) - mean of f|`.
///
/// `p0` must be the gridpoint lattice; `f` is evaluated at the advected
/// positions by bicubic interpolation.
pub fn measure_preservation_defect(p0: &ParticleSet, advected: &ParticleSet, f: &PhysicalField) -> Result<f64> {
    let n = f.grid().n();
    if p0.count() != n * n || advected.count() != p0.count() {
        return Err(Error::param(format!(
            "expected {} particles on the lattice, got {} and {}",
            n * n,
            p0.count(),
            advected.count()
        )));
    }
    let samples: Vec<f64> = advected
        .positions
        .par_iter()
        .map(|&x| interp::bicubic(f.values(), x))
        .collect();
    // sequential sum keeps the result independent of the thread count
    let moved = samples.iter().sum::<f64>() / advected.count() as f64;
    Ok((moved - f.mean()).abs())
}

/// How `q0` is sampled at the foot points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    #[default]
    Bicubic,
    /// Value at the nearest gridpoint; keeps patch data two-valued.
    Nearest,
    /// Exact trigonometric interpolant, `O(n²)` per point.
    Spectral,
}

/// `ω(t, x_ij) = q0(X_{t,0}(x_ij))` with bicubic sampling.
pub fn lagrangian_vorticity(q0: &PhysicalField, flow_back: &ParticleSet) -> Result<PhysicalField> {
    lagrangian_vorticity_with(q0, flow_back, Sampling::Bicubic)
}

/// `flow_back` holds the foot points of the gridpoint lattice in lattice
/// order.
pub fn lagrangian_vorticity_with(q0: &PhysicalField, flow_back: &ParticleSet, sampling: Sampling) -> Result<PhysicalField> {
    let g = q0.grid();
    let n = g.n();
    if flow_back.count() != n * n {
        return Err(Error::param(format!(
            "expected {} foot points, got {}",
            n * n,
            flow_back.count()
        )));
    }
    let spec = (sampling == Sampling::Spectral).then(|| q0.to_spectral());
    let vals: Vec<f64> = flow_back
        .positions
        .par_iter()
        .map(|&x| match sampling {
            Sampling::Bicubic => interp::bicubic(q0.values(), x),
            Sampling::Nearest => interp::nearest(q0.values(), x),
            Sampling::Spectral => spec.as_ref().expect("built above").eval(x),
        })
        .collect();
    PhysicalField::from_values(g, Array2::from_shape_vec((n, n), vals).expect("n*n values"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowComparison {
    /// Particle average of the torus distance.
    pub mean_distance: f64,
    /// Root-mean-square torus distance.
    pub l2_distance: f64,
    pub delta: f64,
    /// `mean log(|X^α - X| / δ + 1)`.
    pub g_delta: f64,
    /// `C_cal / |log δ|`; `None` when `δ ∉ (0, 1)`.
    pub log_bound: Option<f64>,
}

impl FlowComparison {
    pub fn bound_holds(&self) -> Option<bool> {
        self.log_bound.map(|b| self.mean_distance <= b)
    }
}

/// Compares two flows evaluated on the same particles.
pub fn flow_distance(pa: &ParticleSet, pb: &ParticleSet, delta: f64, c_cal: f64) -> Result<FlowComparison> {
    if pa.count() != pb.count() || pa.count() == 0 {
        return Err(Error::param(format!(
            "particle counts differ or are empty: {} vs {}",
            pa.count(),
            pb.count()
        )));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::param(format!("delta must be finite and >= 0, got {delta}")));
    }
    let d: Vec<f64> = pa
        .positions
        .iter()
        .zip(&pb.positions)
        .map(|(&a, &b)| torus_distance(a, b))
        .collect();
    let m = d.len() as f64;
    let mean_distance = d.iter().sum::<f64>() / m;
    let l2_distance = (d.iter().map(|x| x * x).sum::<f64>() / m).sqrt();
    let g_delta = if delta > 0.0 {
        d.iter().map(|&x| (x / delta).ln_1p()).sum::<f64>() / m
    } else if mean_distance == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let log_bound = (delta > 0.0 && delta < 1.0).then(|| c_cal / delta.ln().abs());
    Ok(FlowComparison {
        mean_distance,
        l2_distance,
        delta,
        g_delta,
        log_bound,
    })
}

/// Constant that makes `mean_distance = C / |log δ|` hold with equality.
pub fn calibrate_constant(mean_distance: f64, delta: f64) -> Option<f64> {
    (delta > 0.0 && delta < 1.0).then(|| mean_distance * delta.ln().abs())
}

/// Normalized `L¹_x` norm of `|a - b|`: the average over the grid.
pub fn velocity_gap_l1(a: &PhysicalVelocity, b: &PhysicalVelocity) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch {
            expected: a.grid().n(),
            found: b.grid().n(),
        });
    }
    let s = Zip::from(a.u1.values())
        .and(a.u2.values())
        .and(b.u1.values())
        .and(b.u2.values())
        .fold(0.0, |acc, &p, &q, &r, &s| acc + (p - r).hypot(q - s));
    Ok(s / (a.grid().n() * a.grid().n()) as f64)
}

/// Trapezoid rule in time for `δ = ∫ ‖u^α - u‖_{L¹} dt` from samples
/// `gaps[i]` at `times[i]`.
pub fn time_integrated_gap(times: &[f64], gaps: &[f64]) -> Result<f64> {
    if times.len() != gaps.len() {
        return Err(Error::param("times and gaps differ in length"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("sample times must be nondecreasing"));
    }
    Ok(times
        .windows(2)
        .zip(gaps.windows(2))
        .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
        .sum())
}
