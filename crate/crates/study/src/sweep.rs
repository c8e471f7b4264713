//! α-sweeps against an α = 0 reference on a finer grid.
//!
//! The reference runs once at `n_ref`; every sample is restricted
//! spectrally to `n` and dealiased onto the band the α-runs retain
//! before any error norm is taken. A second α = 0 run at `n` measures how
//! far the reference itself is from converged.

use aeul_core::bounds::{besov_modulus_fit, default_shifts, gamma0};
use aeul_core::initial_data::approximating_family;
use aeul_core::lagrangian::{
    advect_particles_with, calibrate_constant, flow_distance, velocity_gap_l1, AdvectOptions, ParticleSet,
};
use aeul_core::solver::{run, run_euler, RunOutput, SolverConfig};
use aeul_core::vorticity::filtered_velocity;
use aeul_core::{alpha_norm, biot_savart, dealias, lp_norm, AlphaParam, Grid, SpectralField, VelocityField};
use rayon::prelude::*;
use serde::Serialize;

use crate::compare::{compare_bounds, BoundComparison};
use crate::config::ExperimentConfig;
use crate::error::{Result, StudyError};
use crate::output;
use crate::rates::{fit_rate, RateFit};

/// Worker-pool size: `AEUL_WORKERS` when set, else the available cores.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var("AEUL_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(StudyError::config(format!("AEUL_WORKERS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSeries {
    pub p: f64,
    pub values: Vec<f64>,
}

/// Time series for one α, sampled at [`ConvergenceReport::times`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaRecord {
    pub alpha: f64,
    pub gamma0: f64,
    pub steps: usize,
    pub vel_l2_err: Vec<f64>,
    pub vort_err: Vec<LpSeries>,
    /// Particle-averaged torus distance between the two flows from `t = 0`;
    /// empty when flows are off.
    pub flow_mean_distance: Vec<f64>,
    /// Cumulative `‖u^α - u‖_{L¹_t L¹_x}` with the normalized measure.
    pub delta: Vec<f64>,
    /// `mean log(|X^α - X|/δ + 1)` at the final time.
    pub g_delta: Option<f64>,
    pub alpha_norm_drift: Vec<f64>,
    pub energy: Vec<f64>,
    /// `α‖∇u^α(T)‖²_{L²}`.
    pub grad_energy: f64,
    /// `|‖u^α(T)‖_{L²} - ‖u₀‖_{L²}|`.
    pub energy_gap: f64,
    /// `C_cal / |log δ(T)|` once calibrated.
    pub flow_bound: Option<f64>,
}

impl AlphaRecord {
    pub fn sup_vel_err(&self) -> f64 {
        self.vel_l2_err.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_vort_err(&self, p: f64) -> Option<f64> {
        self.vort_err
            .iter()
            .find(|s| s.p == p)
            .map(|s| s.values.iter().copied().fold(0.0, f64::max))
    }

    pub fn final_flow_distance(&self) -> Option<f64> {
        self.flow_mean_distance.last().copied()
    }

    pub fn final_delta(&self) -> Option<f64> {
        self.delta.last().copied()
    }

    pub fn flow_bound_holds(&self) -> Option<bool> {
        Some(self.final_flow_distance()? <= self.flow_bound?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub alpha: f64,
    pub message: String,
}

/// Distance between the α = 0 runs at `n` and `n_ref`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceCheck {
    pub vel_l2_err: f64,
    pub vort_l2_err: f64,
    pub smallest_vel_err: f64,
    pub smallest_vort_l2_err: f64,
    pub vel_consistent: bool,
    /// Informational; patch data are not expected to pass it.
    pub vort_consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VorticityRate {
    pub p: f64,
    pub fit: Option<RateFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rates {
    /// `sup_t ‖u^α - u‖_{L²}` against α.
    pub velocity: Option<RateFit>,
    /// `sup_t ‖q^α - ω‖_{Lᵖ}` against α.
    pub vorticity: Vec<VorticityRate>,
    /// `α‖∇u^α(T)‖²` against α.
    pub grad_energy: Option<RateFit>,
    pub energy_gap: Option<RateFit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowCalibration {
    pub alpha: f64,
    pub c_cal: f64,
    /// Bound holds at every smaller α.
    pub all_hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub datum: String,
    pub n: usize,
    pub n_ref: usize,
    pub t_end: f64,
    pub p_list: Vec<f64>,
    pub times: Vec<f64>,
    /// `‖ω₀‖_{L∞}`.
    pub datum_linf: f64,
    /// Besov exponent of the datum at p = 2, when the fit is not degenerate.
    pub datum_besov_s: Option<f64>,
    pub reference: ReferenceCheck,
    pub records: Vec<AlphaRecord>,
    pub failures: Vec<RunFailure>,
    pub rates: Rates,
    pub flow_calibration: Option<FlowCalibration>,
    pub bounds: Option<BoundComparison>,
}

impl ConvergenceReport {
    pub fn alphas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.alpha).collect()
    }
}

/// Exponents tracked for every run: the CSV columns plus the configured list.
fn tracked_ps(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut ps = vec![1.0, 2.0, 4.0];
    for &p in &cfg.p_list {
        if !ps.contains(&p) {
            ps.push(p);
        }
    }
    ps
}

struct Reference {
    times: Vec<f64>,
    q: Vec<SpectralField>,
    u: Vec<VelocityField>,
    particles: Option<Vec<ParticleSet>>,
}

/// Particle sets at every sample time, starting from the lattice of `grid`.
fn flow_samples(out: &RunOutput, grid: Grid, times: &[f64], substeps: usize) -> Result<Vec<ParticleSet>> {
    let hist = out
        .velocity_history
        .as_ref()
        .expect("velocity recorded when flows are on");
    let opts = AdvectOptions { substeps };
    let mut sets = vec![ParticleSet::lattice(grid, times[0])];
    for &t in &times[1..] {
        let next = advect_particles_with(sets.last().expect("nonempty"), hist, t, opts)?;
        sets.push(next);
    }
    Ok(sets)
}

fn sample_times(out: &RunOutput) -> Vec<f64> {
    out.trajectory.iter().map(|s| s.t).collect()
}

fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        cfl: cfg.cfl,
        t_end: cfg.t_end,
        dealias: true,
        monitor_every: cfg.monitor_every,
        sample_interval: Some(cfg.sample_interval),
        record_velocity: cfg.flows,
        checkpoint: None,
    }
}

struct Job<'a> {
    cfg: &'a ExperimentConfig,
    grid: Grid,
    omega0: SpectralField,
    u0_l2: f64,
    reference: &'a Reference,
    ps: Vec<f64>,
}

impl Job<'_> {
    fn run_alpha(&self, alpha: f64) -> Result<AlphaRecord> {
        let a = AlphaParam::new(alpha)?;
        let q0 = approximating_family(&self.omega0, a, self.cfg.family)?;
        let out = run(&q0, a, &solver_config(self.cfg))?;
        let times = sample_times(&out);
        let refr = self.reference;
        if times != refr.times {
            return Err(StudyError::config("alpha run and reference sampled at different times"));
        }
        let particles = if self.cfg.flows {
            Some(flow_samples(&out, self.grid, &times, self.cfg.substeps)?)
        } else {
            None
        };

        let mut vel = Vec::with_capacity(times.len());
        let mut vort: Vec<LpSeries> = self
            .ps
            .iter()
            .map(|&p| LpSeries {
                p,
                values: Vec::with_capacity(times.len()),
            })
            .collect();
        let mut gaps = Vec::new();
        let mut norms = Vec::new();
        let mut energy = Vec::new();
        for (i, s) in out.trajectory.iter().enumerate() {
            let ua = filtered_velocity(&s.q, a)?;
            vel.push((&ua - &refr.u[i]).l2_norm());
            let dq = (&s.q - &refr.q[i]).to_physical();
            for series in vort.iter_mut() {
                series.values.push(lp_norm(&dq, series.p)?);
            }
            gaps.push(velocity_gap_l1(&ua.to_physical(), &refr.u[i].to_physical())?);
            norms.push(alpha_norm(&ua, a));
            energy.push(ua.l2_norm());
        }
        let mut delta = vec![0.0];
        for i in 1..times.len() {
            delta.push(delta[i - 1] + 0.5 * (times[i] - times[i - 1]) * (gaps[i] + gaps[i - 1]));
        }
        let drift = norms.iter().map(|m| (m - norms[0]).abs() / norms[0]).collect();

        let (flow_mean_distance, g_delta) = match (&particles, &refr.particles) {
            (Some(pa), Some(pr)) => {
                let mut d = Vec::with_capacity(times.len());
                let mut g = 0.0;
                for i in 0..times.len() {
                    let c = flow_distance(&pa[i], &pr[i], delta[i], 1.0)?;
                    d.push(c.mean_distance);
                    g = c.g_delta;
                }
                (d, Some(g))
            }
            _ => (Vec::new(), None),
        };

        let fin = &out.final_state;
        let uf = filtered_velocity(&fin.q, a)?;
        Ok(AlphaRecord {
            alpha,
            gamma0: gamma0(&q0, &self.omega0, a)?,
            steps: fin.step_count,
            vel_l2_err: vel,
            vort_err: vort,
            flow_mean_distance,
            delta,
            g_delta,
            alpha_norm_drift: drift,
            energy,
            grad_energy: alpha * uf.grad_l2_norm().powi(2),
            energy_gap: (uf.l2_norm() - self.u0_l2).abs(),
            flow_bound: None,
        })
    }
}

fn optional_fit(pairs: Vec<(f64, f64)>) -> Option<RateFit> {
    fit_rate(&pairs).ok()
}

/// Runs the sweep without touching the file system.
pub fn compute_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| StudyError::config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| compute_in_pool(cfg))
}

fn compute_in_pool(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let grid = cfg.grid();
    let (omega0, omega0_ref) = cfg.datum_pair()?;
    let omega0 = dealias(&omega0);
    let scfg = solver_config(cfg);

    let coarse_cfg = SolverConfig {
        record_velocity: false,
        ..scfg.clone()
    };
    let (fine, coarse) = rayon::join(|| run_euler(&omega0_ref, &scfg), || run_euler(&omega0, &coarse_cfg));
    let (fine, coarse) = (fine?, coarse?);

    let times = sample_times(&fine);
    let q_ref: Vec<SpectralField> = fine
        .trajectory
        .iter()
        .map(|s| Ok(dealias(&s.q.restrict(grid)?)))
        .collect::<Result<_>>()?;
    let u_ref: Vec<VelocityField> = q_ref.iter().map(biot_savart).collect::<aeul_core::Result<_>>()?;
    let particles = if cfg.flows {
        Some(flow_samples(&fine, grid, &times, cfg.substeps)?)
    } else {
        None
    };
    drop(fine);
    let reference = Reference {
        times,
        q: q_ref,
        u: u_ref,
        particles,
    };

    if sample_times(&coarse) != reference.times {
        return Err(StudyError::config("reference runs sampled at different times"));
    }
    let mut ref_vel: f64 = 0.0;
    let mut ref_vort: f64 = 0.0;
    for (i, s) in coarse.trajectory.iter().enumerate() {
        ref_vel = ref_vel.max((&biot_savart(&s.q)? - &reference.u[i]).l2_norm());
        ref_vort = ref_vort.max(lp_norm(&(&s.q - &reference.q[i]).to_physical(), 2.0)?);
    }
    drop(coarse);

    let job = Job {
        cfg,
        grid,
        u0_l2: biot_savart(&omega0)?.l2_norm(),
        omega0: omega0.clone(),
        reference: &reference,
        ps: tracked_ps(cfg),
    };
    let outcomes: Vec<(f64, Result<AlphaRecord>)> = cfg.alphas.par_iter().map(|&a| (a, job.run_alpha(a))).collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (alpha, r) in outcomes {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(RunFailure {
                alpha,
                message: e.to_string(),
            }),
        }
    }
    if records.is_empty() {
        return Err(StudyError::AllRunsFailed);
    }

    let smallest_vel = records.iter().map(|r| r.sup_vel_err()).fold(f64::INFINITY, f64::min);
    let smallest_vort = records
        .iter()
        .filter_map(|r| r.sup_vort_err(2.0))
        .fold(f64::INFINITY, f64::min);
    let check = ReferenceCheck {
        vel_l2_err: ref_vel,
        vort_l2_err: ref_vort,
        smallest_vel_err: smallest_vel,
        smallest_vort_l2_err: smallest_vort,
        vel_consistent: ref_vel < 0.1 * smallest_vel,
        vort_consistent: ref_vort < 0.1 * smallest_vort,
    };
    if !check.vel_consistent {
        return Err(StudyError::Richardson {
            reference_error: ref_vel,
            smallest_error: smallest_vel,
        });
    }

    let flow_calibration = calibrate_flows(&mut records);
    let pairs = |f: &dyn Fn(&AlphaRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        records.iter().filter_map(|r| f(r).map(|v| (r.alpha, v))).collect()
    };
    let rates = Rates {
        velocity: optional_fit(pairs(&|r| Some(r.sup_vel_err()))),
        vorticity: cfg
            .p_list
            .iter()
            .map(|&p| VorticityRate {
                p,
                fit: optional_fit(pairs(&|r| r.sup_vort_err(p))),
            })
            .collect(),
        grad_energy: optional_fit(pairs(&|r| Some(r.grad_energy))),
        energy_gap: optional_fit(pairs(&|r| Some(r.energy_gap))),
    };

    let omega_phys = omega0.to_physical();
    let mut report = ConvergenceReport {
        name: cfg.name.clone(),
        datum: cfg.datum.describe(),
        n: cfg.n,
        n_ref: cfg.n_ref,
        t_end: cfg.t_end,
        p_list: cfg.p_list.clone(),
        times: reference.times.clone(),
        datum_linf: omega_phys.max_abs(),
        datum_besov_s: besov_modulus_fit(&omega_phys, 2.0, &default_shifts(cfg.n))
            .ok()
            .map(|f| f.s()),
        reference: check,
        records,
        failures,
        rates,
        flow_calibration,
        bounds: None,
    };
    report.bounds = Some(compare_bounds(&report, &cfg.bounds));
    Ok(report)
}

/// Calibrates `C_cal` on the largest α with `δ(T) ∈ (0, 1)` and fills in
/// the bound for every record.
fn calibrate_flows(records: &mut [AlphaRecord]) -> Option<FlowCalibration> {
    let (idx, c_cal) = records.iter().enumerate().find_map(|(i, r)| {
        let c = calibrate_constant(r.final_flow_distance()?, r.final_delta()?)?;
        Some((i, c))
    })?;
    for r in records.iter_mut() {
        if let Some(d) = r.final_delta() {
            if d > 0.0 && d < 1.0 {
                r.flow_bound = Some(c_cal / d.ln().abs());
            }
        }
    }
    let all_hold = records[idx + 1..].iter().all(|r| r.flow_bound_holds() == Some(true));
    Some(FlowCalibration {
        alpha: records[idx].alpha,
        c_cal,
        all_hold,
    })
}

/// Computes the sweep with the environment's worker count and writes
/// `sweep.csv`, `sup_errors.csv`, `bounds.csv`, `summary.json` and
/// `plot.gp` into the configured output directory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let report = compute_sweep(cfg, workers_from_env()?)?;
    output::persist_sweep(&report, &cfg.output_dir)?;
    Ok(report)
}
