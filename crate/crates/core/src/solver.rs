//! Time integration of the vorticity transport `∂t q + u^α·∇q = 0` with
//! `u^α = (I - αΔ)⁻¹ k * q`, plus conservation monitors.
//!
//! The nonlinear term is formed pseudo-spectrally in advective form and
//! dealiased with the 2/3 rule; time stepping is classical RK4 with a CFL
//! step `dt = cfl·dx / max(‖u^α‖_{L∞}, ε)`.

use std::path::PathBuf;

use ndarray::Zip;
use num_complex::Complex64;

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::lagrangian::VelocityHistory;
use crate::spectral::{
    dealias_in_place, spectral_derivative, to_physical_pair, to_spectral, Axis, Grid,
    PhysicalField, SpectralField,
};
use crate::vorticity::{
    alpha_norm, biot_savart_filtered, biot_savart_unchecked, check_mean_zero, lp_norm, AlphaParam,
    PhysicalVelocity, VelocityField,
};

/// Lower bound on the speed in the CFL denominator.
pub const SPEED_FLOOR: f64 = 1e-12;

/// Which velocity law advects the vorticity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// Filtered velocity `u^α`; `α = 0` degenerates to Euler.
    Alpha(AlphaParam),
    /// Plain Biot–Savart velocity, no filter in the code path at all.
    Euler,
}

impl Model {
    pub fn alpha(self) -> AlphaParam {
        match self {
            Model::Alpha(a) => a,
            Model::Euler => AlphaParam::EULER,
        }
    }

    fn velocity(self, q: &SpectralField) -> VelocityField {
        match self {
            Model::Alpha(a) => biot_savart_filtered(q, a),
            Model::Euler => biot_savart_unchecked(q),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointPolicy {
    pub dir: PathBuf,
    /// Write every this many trajectory samples.
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Monitor-log cadence in steps; the final state is always logged.
    pub monitor_every: usize,
    /// When set, steps are shortened to land on every multiple of this
    /// interval and the trajectory is sampled there instead of at the
    /// monitor cadence.
    pub sample_interval: Option<f64>,
    /// Keep the physical velocity at every step for particle advection.
    pub record_velocity: bool,
    pub checkpoint: Option<CheckpointPolicy>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl: 0.5,
            t_end: 1.0,
            dealias: true,
            monitor_every: 1,
            sample_interval: None,
            record_velocity: false,
            checkpoint: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if self.monitor_every == 0 {
            return Err(Error::param("monitor_every must be positive"));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::param(format!("sample_interval must be positive, got {dt}")));
            }
        }
        if let Some(c) = &self.checkpoint {
            if c.every == 0 {
                return Err(Error::param("checkpoint cadence must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub q: SpectralField,
    pub alpha: AlphaParam,
    pub step_count: usize,
}

impl SimState {
    /// Initial state at `t = 0`; the mean of `q` is checked and then zeroed
    /// exactly.
    pub fn new(q: SpectralField, alpha: AlphaParam) -> Result<Self> {
        check_mean_zero(&q)?;
        Ok(SimState {
            t: 0.0,
            q: q.without_mean(),
            alpha,
            step_count: 0,
        })
    }

    pub fn grid(&self) -> Grid {
        self.q.grid()
    }

    /// Advecting velocity `u^α`.
    pub fn velocity(&self) -> VelocityField {
        biot_savart_filtered(&self.q, self.alpha)
    }
}

/// `-u·∇q` plus the collocated velocity it was formed with.
fn advection(model: Model, q: &SpectralField, dealias: bool) -> (SpectralField, PhysicalVelocity) {
    let g = q.grid();
    let u = model.velocity(q);
    let (u1, u2) = to_physical_pair(&u.u1, &u.u2);
    let (q1, q2) = to_physical_pair(
        &spectral_derivative(q, Axis::X1),
        &spectral_derivative(q, Axis::X2),
    );
    let prod = Zip::from(u1.values())
        .and(u2.values())
        .and(q1.values())
        .and(q2.values())
        .map_collect(|&a, &b, &c, &d| -(a * c + b * d));
    let mut out = to_spectral(&PhysicalField::from_values(g, prod).expect("grid-shaped"));
    if dealias {
        dealias_in_place(&mut out);
    }
    out.coeffs_mut()[[0, 0]] = Complex64::new(0.0, 0.0);
    (out, PhysicalVelocity { u1, u2 })
}

/// Divergence-form nonlinear term `-∇·(u q)`, kept as a cross-check of the
/// advective form.
pub fn rhs_divergence_form(q: &SpectralField, alpha: AlphaParam) -> Result<SpectralField> {
    check_mean_zero(q)?;
    let g = q.grid();
    let u = biot_savart_filtered(q, alpha);
    let (u1, u2) = to_physical_pair(&u.u1, &u.u2);
    let qp = q.to_physical();
    let f1 = PhysicalField::from_values(g, u1.values() * qp.values())?;
    let f2 = PhysicalField::from_values(g, u2.values() * qp.values())?;
    let d = &spectral_derivative(&to_spectral(&f1), Axis::X1)
        + &spectral_derivative(&to_spectral(&f2), Axis::X2);
    let mut out = d.scaled(-1.0);
    dealias_in_place(&mut out);
    Ok(out.without_mean())
}

/// `-u^α·∇q`, dealiased, with zero mean.
pub fn rhs(q: &SpectralField, alpha: AlphaParam) -> Result<SpectralField> {
    check_mean_zero(q)?;
    Ok(advection(Model::Alpha(alpha), q, true).0)
}

/// Same as [`rhs`] at `α = 0` but through the plain Biot–Savart path.
pub fn euler_rhs(q: &SpectralField) -> Result<SpectralField> {
    check_mean_zero(q)?;
    Ok(advection(Model::Euler, q, true).0)
}

fn axpy(q: &SpectralField, a: f64, k: &SpectralField) -> SpectralField {
    let mut out = q.clone();
    Zip::from(out.coeffs_mut())
        .and(k.coeffs())
        .for_each(|o, &kk| *o += kk * a);
    out
}

fn cfl_dt(cfl: f64, grid: Grid, speed: f64) -> f64 {
    cfl * grid.dx() / speed.max(SPEED_FLOOR)
}

/// One RK4 step. `choose_dt` receives the CFL step computed from the
/// stage-1 velocity and may shorten it.
fn rk4_step(
    model: Model,
    state: &SimState,
    cfl: f64,
    dealias: bool,
    choose_dt: impl FnOnce(f64) -> f64,
) -> Result<(SimState, PhysicalVelocity)> {
    let q = &state.q;
    let (k1, vel) = advection(model, q, dealias);
    let speed = vel.max_speed();
    if !speed.is_finite() {
        return Err(Error::NonFinite {
            step: state.step_count,
            t: state.t,
        });
    }
    let dt = choose_dt(cfl_dt(cfl, q.grid(), speed));
    let (k2, _) = advection(model, &axpy(q, 0.5 * dt, &k1), dealias);
    let (k3, _) = advection(model, &axpy(q, 0.5 * dt, &k2), dealias);
    let (k4, _) = advection(model, &axpy(q, dt, &k3), dealias);
    let mut next = q.clone();
    let w = dt / 6.0;
    Zip::from(next.coeffs_mut())
        .and(k1.coeffs())
        .and(k2.coeffs())
        .and(k3.coeffs())
        .and(k4.coeffs())
        .for_each(|o, &a, &b, &c, &d| *o += (a + (b + c) * 2.0 + d) * w);
    next.coeffs_mut()[[0, 0]] = Complex64::new(0.0, 0.0);
    Ok((
        SimState {
            t: state.t + dt,
            q: next,
            alpha: state.alpha,
            step_count: state.step_count + 1,
        },
        vel,
    ))
}

/// Advances by one CFL-limited RK4 step.
pub fn step(state: &SimState, cfg: &SolverConfig) -> Result<SimState> {
    cfg.validate()?;
    let model = Model::Alpha(state.alpha);
    Ok(rk4_step(model, state, cfg.cfl, cfg.dealias, |dt| dt)?.0)
}

/// Advances by one RK4 step of prescribed size.
pub fn step_fixed(state: &SimState, dt: f64, dealias: bool) -> Result<SimState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be finite and >= 0, got {dt}")));
    }
    Ok(rk4_step(Model::Alpha(state.alpha), state, 1.0, dealias, |_| dt)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorRecord {
    pub step: usize,
    pub t: f64,
    /// `‖u^α‖_α`.
    pub alpha_norm: f64,
    /// Kinetic-energy norm `‖u^α‖_{L²}`.
    pub energy: f64,
    pub q_l1: f64,
    pub q_l2: f64,
    pub q_l4: f64,
    pub q_linf: f64,
    pub mean: f64,
}

impl MonitorRecord {
    pub fn measure(state: &SimState) -> Result<Self> {
        let u = state.velocity();
        let qp = state.q.to_physical();
        Ok(MonitorRecord {
            step: state.step_count,
            t: state.t,
            alpha_norm: alpha_norm(&u, state.alpha),
            energy: u.l2_norm(),
            q_l1: lp_norm(&qp, 1.0)?,
            q_l2: lp_norm(&qp, 2.0)?,
            q_l4: lp_norm(&qp, 4.0)?,
            q_linf: lp_norm(&qp, f64::INFINITY)?,
            mean: state.q.mean(),
        })
    }
}

/// Append-only record of the monitored invariants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MonitorLog {
    records: Vec<MonitorRecord>,
}

impl MonitorLog {
    pub fn push(&mut self, r: MonitorRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[MonitorRecord] {
        &self.records
    }

    pub fn first(&self) -> Option<&MonitorRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&MonitorRecord> {
        self.records.last()
    }

    /// Largest `|m(t) - m(0)| / |m(0)|` for a monitored quantity.
    pub fn max_relative_drift(&self, quantity: impl Fn(&MonitorRecord) -> f64) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let m0 = quantity(first);
        let scale = if m0 == 0.0 { 1.0 } else { m0.abs() };
        self.records
            .iter()
            .map(|r| (quantity(r) - m0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// CSV with header `step,t,alpha_norm,energy,q_l1,q_l2,q_l4,q_linf,mean`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,t,alpha_norm,energy,q_l1,q_l2,q_l4,q_linf,mean")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.step, r.t, r.alpha_norm, r.energy, r.q_l1, r.q_l2, r.q_l4, r.q_linf, r.mean
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub final_state: SimState,
    /// States at the sample times (or the monitor cadence), starting at `t = 0`.
    pub trajectory: Vec<SimState>,
    pub log: MonitorLog,
    pub velocity_history: Option<VelocityHistory>,
}

/// Runs the α-model from `q0` to `cfg.t_end`.
///
/// When `cfg.dealias` is set the initial datum is projected onto the
/// dealiased band first, so every retained mode evolves.
pub fn run(q0: &SpectralField, alpha: AlphaParam, cfg: &SolverConfig) -> Result<RunOutput> {
    run_model(q0, Model::Alpha(alpha), cfg)
}

/// Euler run through the dedicated unfiltered code path.
pub fn run_euler(q0: &SpectralField, cfg: &SolverConfig) -> Result<RunOutput> {
    run_model(q0, Model::Euler, cfg)
}

pub fn run_model(q0: &SpectralField, model: Model, cfg: &SolverConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut q0 = q0.clone();
    if cfg.dealias {
        dealias_in_place(&mut q0);
    }
    let mut state = SimState::new(q0, model.alpha())?;
    let mut log = MonitorLog::default();
    let mut trajectory = Vec::new();
    let mut history = cfg.record_velocity.then(|| VelocityHistory::new(state.grid()));
    let mut samples_written = 0usize;

    let mut record_sample = |s: &SimState, traj: &mut Vec<SimState>| -> Result<()> {
        if let Some(policy) = &cfg.checkpoint {
            if samples_written.is_multiple_of(policy.every) {
                std::fs::create_dir_all(&policy.dir)?;
                let path = policy.dir.join(format!("state_{:06}.aeul", s.step_count));
                checkpoint::write_file(&path, s)?;
            }
        }
        samples_written += 1;
        traj.push(s.clone());
        Ok(())
    };

    log.push(MonitorRecord::measure(&state)?);
    record_sample(&state, &mut trajectory)?;

    let t_end = cfg.t_end;
    let mut next_sample_idx = 1usize;
    while state.t < t_end {
        let target = match cfg.sample_interval {
            Some(h) => (next_sample_idx as f64 * h).min(t_end),
            None => t_end,
        };
        let t_now = state.t;
        let (mut next, vel) = rk4_step(model, &state, cfg.cfl, cfg.dealias, |dt| {
            let remaining = target - t_now;
            // avoid leaving a sliver step before the target
            if dt >= remaining * (1.0 - 1e-12) {
                remaining
            } else if dt > 0.5 * remaining {
                0.5 * remaining
            } else {
                dt
            }
        })?;
        let landed = (next.t - target).abs() <= 1e-12 * target.max(1.0);
        if landed {
            next.t = target;
        }
        if let Some(h) = history.as_mut() {
            h.push(state.t, vel)?;
        }
        state = next;

        let is_final = state.t >= t_end;
        if state.step_count % cfg.monitor_every == 0 || is_final {
            log.push(MonitorRecord::measure(&state)?);
        }
        let sample_now = match cfg.sample_interval {
            Some(_) => landed,
            None => state.step_count % cfg.monitor_every == 0 || is_final,
        };
        if sample_now {
            record_sample(&state, &mut trajectory)?;
            if cfg.sample_interval.is_some() {
                next_sample_idx += 1;
            }
        }
    }

    if let Some(h) = history.as_mut() {
        let vel = model.velocity(&state.q).to_physical();
        if !vel.max_speed().is_finite() {
            return Err(Error::NonFinite {
                step: state.step_count,
                t: state.t,
            });
        }
        h.push(state.t, vel)?;
    }

    Ok(RunOutput {
        final_state: state,
        trajectory,
        log,
        velocity_history: history,
    })
}
