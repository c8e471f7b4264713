//! Lagrangian diagnostics for single runs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use aeul_core::initial_data::approximating_family;
use aeul_core::lagrangian::{
    advect_particles_with, flow_distance, lagrangian_vorticity, measure_preservation_defect, time_integrated_gap,
    velocity_gap_l1, AdvectOptions, ParticleSet, VelocityHistory,
};
use aeul_core::solver::{run, run_euler, RunOutput, SolverConfig};
use aeul_core::vorticity::filtered_velocity;
use aeul_core::{biot_savart, dealias, lp_norm, torus_distance, AlphaParam, SpectralField};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Consistency of the particle flow with the Eulerian run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LagrangianCheck {
    /// `‖q₀∘X_{0,T} - q(T)‖_{L¹} / ‖q(T)‖_{L¹}`.
    pub reconstruction_rel_l1: f64,
    /// `|∫ q₀(X_{T,0}(x)) dx - ∫ q₀|` over the lattice.
    pub measure_defect: f64,
    /// Largest torus distance between a lattice point and its image under
    /// the forward flow followed by the backward flow.
    pub backward_forward_err: f64,
}

fn history(out: &RunOutput) -> &VelocityHistory {
    out.velocity_history.as_ref().expect("velocity recorded")
}

/// Runs the checks on a finished run started from `q0`.
pub fn lagrangian_check(q0: &SpectralField, out: &RunOutput, substeps: usize) -> Result<LagrangianCheck> {
    let hist = history(out);
    let grid = q0.grid();
    let t_end = out.final_state.t;
    let opts = AdvectOptions { substeps };
    let q0p = q0.to_physical();

    let feet = advect_particles_with(&ParticleSet::lattice(grid, t_end), hist, 0.0, opts)?;
    let recon = lagrangian_vorticity(&q0p, &feet)?;
    let qt = out.final_state.q.to_physical();
    let diff = aeul_core::PhysicalField::from_values(grid, recon.values() - qt.values())?;
    let rel = lp_norm(&diff, 1.0)? / lp_norm(&qt, 1.0)?;

    let start = ParticleSet::lattice(grid, 0.0);
    let fwd = advect_particles_with(&start, hist, t_end, opts)?;
    let defect = measure_preservation_defect(&start, &fwd, &q0p)?;
    let back = advect_particles_with(&fwd, hist, 0.0, opts)?;
    let err = start
        .positions()
        .iter()
        .zip(back.positions())
        .map(|(&a, &b)| torus_distance(a, b))
        .fold(0.0, f64::max);
    Ok(LagrangianCheck {
        reconstruction_rel_l1: rel,
        measure_defect: defect,
        backward_forward_err: err,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowStudy {
    pub alpha: f64,
    pub n: usize,
    pub t_end: f64,
    pub times: Vec<f64>,
    /// Mean torus distance between the α flow and the Euler flow.
    pub mean_distance: Vec<f64>,
    pub l2_distance: Vec<f64>,
    /// Cumulative `‖u^α - u‖_{L¹L¹}`.
    pub delta: Vec<f64>,
    pub g_delta: f64,
    pub alpha_check: LagrangianCheck,
    pub euler_check: LagrangianCheck,
}

/// Compares the α flow with the Euler flow on the grid `n` of `cfg`.
pub fn flow_study(cfg: &ExperimentConfig, alpha: f64) -> Result<(FlowStudy, Vec<ParticleSet>, Vec<ParticleSet>)> {
    cfg.validate()?;
    let a = AlphaParam::new(alpha)?;
    let (omega0, _) = cfg.datum_pair()?;
    let omega0 = dealias(&omega0);
    let q0 = approximating_family(&omega0, a, cfg.family)?;
    let scfg = SolverConfig {
        cfl: cfg.cfl,
        t_end: cfg.t_end,
        dealias: true,
        monitor_every: cfg.monitor_every,
        sample_interval: Some(cfg.sample_interval),
        record_velocity: true,
        checkpoint: None,
    };
    let (ra, re) = rayon::join(|| run(&q0, a, &scfg), || run_euler(&omega0, &scfg));
    let (ra, re) = (ra?, re?);
    let times: Vec<f64> = ra.trajectory.iter().map(|s| s.t).collect();
    let grid = cfg.grid();
    let opts = AdvectOptions { substeps: cfg.substeps };

    let mut gaps = Vec::with_capacity(times.len());
    for (sa, se) in ra.trajectory.iter().zip(&re.trajectory) {
        let ua = filtered_velocity(&sa.q, a)?.to_physical();
        let ue = biot_savart(&se.q)?.to_physical();
        gaps.push(velocity_gap_l1(&ua, &ue)?);
    }
    let mut pa = vec![ParticleSet::lattice(grid, 0.0)];
    let mut pe = vec![ParticleSet::lattice(grid, 0.0)];
    let (mut mean, mut l2, mut delta) = (vec![0.0], vec![0.0], vec![0.0]);
    let mut g = 0.0;
    for i in 1..times.len() {
        pa.push(advect_particles_with(&pa[i - 1], history(&ra), times[i], opts)?);
        pe.push(advect_particles_with(&pe[i - 1], history(&re), times[i], opts)?);
        let d = time_integrated_gap(&times[..=i], &gaps[..=i])?;
        let c = flow_distance(&pa[i], &pe[i], d, 1.0)?;
        mean.push(c.mean_distance);
        l2.push(c.l2_distance);
        delta.push(d);
        g = c.g_delta;
    }
    let study = FlowStudy {
        alpha,
        n: cfg.n,
        t_end: cfg.t_end,
        times,
        mean_distance: mean,
        l2_distance: l2,
        delta,
        g_delta: g,
        alpha_check: lagrangian_check(&q0, &ra, cfg.substeps)?,
        euler_check: lagrangian_check(&omega0, &re, cfg.substeps)?,
    };
    Ok((study, pa, pe))
}

/// Writes `flows.json` plus the final particle positions of both flows.
pub fn persist_flows(study: &FlowStudy, pa: &[ParticleSet], pe: &[ParticleSet], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("flows.json"))?);
    serde_json::to_writer_pretty(&mut w, study)?;
    writeln!(w)?;
    w.flush()?;
    for (name, sets) in [("particles_alpha.csv", pa), ("particles_euler.csv", pe)] {
        let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
        sets.last().expect("lattice at t = 0").write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DatumSpec;

    #[test]
    fn steady_shear_flows_are_exact() {
        let mut cfg = ExperimentConfig::new(DatumSpec::Shear { amplitude: 1.0 }, 16, vec![0.1]);
        cfg.t_end = 0.5;
        cfg.sample_interval = 0.25;
        let (s, pa, pe) = flow_study(&cfg, 0.1).unwrap();
        assert_eq!(pa.len(), 3);
        assert_eq!(pe.len(), 3);
        // u = (0, sin x₁)·factor: particles move vertically at different speeds
        assert!(s.mean_distance[2] > 0.0);
        for c in [s.alpha_check, s.euler_check] {
            assert!(c.reconstruction_rel_l1 < 1e-8, "{c:?}");
            assert!(c.backward_forward_err < 1e-10, "{c:?}");
            assert!(c.measure_defect < 1e-12, "{c:?}");
        }
    }
}
