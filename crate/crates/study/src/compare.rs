//! Measured errors against the closed-form bounds.
//!
//! The constants in the bounds are not explicit. A comparison first uses
//! the configured ones; when a measurement exceeds its bound, the smallest
//! uniform `C₁ = C₂ = C` that makes every bound hold is searched for and
//! reported next to the violations.

use aeul_core::bounds::{velocity_rate_k, vorticity_rate_bound, BoundParams, ModulusEstimate};
use aeul_core::AlphaParam;
use serde::Serialize;

use crate::sweep::ConvergenceReport;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
}

impl Constants {
    fn of(p: &BoundParams) -> Self {
        Constants {
            c1: p.c1,
            c2: p.c2,
            c: p.c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VortCheck {
    pub p: f64,
    pub err: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub alpha: f64,
    pub t: f64,
    pub k: f64,
    pub vel_err: f64,
    pub vort: Vec<VortCheck>,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.vel_err <= self.k && self.vort.iter().all(|v| v.err <= v.bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundComparison {
    pub constants: Constants,
    /// Besov exponent used for the vorticity modulus; vorticity bounds are
    /// skipped without one.
    pub besov_s: Option<f64>,
    pub rows: Vec<BoundCheck>,
    /// α values with at least one violated bound, as given.
    pub violations: Vec<f64>,
    /// Smallest uniform constant making every bound hold, when one was
    /// needed and found.
    pub rescaled: Option<f64>,
}

fn checks(report: &ConvergenceReport, params: &BoundParams) -> Option<Vec<BoundCheck>> {
    let modulus = report.datum_besov_s.and_then(|s| ModulusEstimate::besov(s).ok());
    let mut rows = Vec::new();
    for r in &report.records {
        let a = AlphaParam::new(r.alpha).ok()?;
        let p = BoundParams {
            m: report.datum_linf,
            gamma0: r.gamma0,
            horizon: report.t_end,
            ..*params
        };
        for (i, &t) in report.times.iter().enumerate() {
            let k = velocity_rate_k(a, t.min(report.t_end), &p).ok()?;
            let mut vort = Vec::new();
            if let Some(m) = &modulus {
                for s in r.vort_err.iter().filter(|s| s.p > 1.0) {
                    vort.push(VortCheck {
                        p: s.p,
                        err: s.values[i],
                        bound: vorticity_rate_bound(k, m, s.p, &p).ok()?,
                    });
                }
            }
            rows.push(BoundCheck {
                alpha: r.alpha,
                t,
                k,
                vel_err: r.vel_l2_err[i],
                vort,
            });
        }
    }
    Some(rows)
}

fn all_hold(report: &ConvergenceReport, params: &BoundParams) -> bool {
    checks(report, params).is_some_and(|rows| rows.iter().all(BoundCheck::holds))
}

/// Smallest `c` with every bound holding under `C₁ = C₂ = C = c`, to a
/// relative 10⁻⁶.
fn minimal_uniform_constant(report: &ConvergenceReport, params: &BoundParams) -> Option<f64> {
    let start = params.c1.max(params.c2).max(params.c);
    let mut hi = start;
    let mut tries = 0;
    while !all_hold(report, &params.with_uniform_constants(hi)) {
        hi *= 2.0;
        tries += 1;
        if tries > 64 {
            return None;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if all_hold(report, &params.with_uniform_constants(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Annotates `report` with the bound curves and flags every α whose
/// measured error exceeds them.
pub fn compare_bounds(report: &ConvergenceReport, params: &BoundParams) -> BoundComparison {
    let rows = checks(report, params).unwrap_or_default();
    let mut violations: Vec<f64> = Vec::new();
    for row in rows.iter().filter(|r| !r.holds()) {
        if violations.last() != Some(&row.alpha) {
            violations.push(row.alpha);
        }
    }
    let rescaled = if violations.is_empty() {
        None
    } else {
        minimal_uniform_constant(report, params)
    };
    BoundComparison {
        constants: Constants::of(params),
        besov_s: report.datum_besov_s,
        rows,
        violations,
        rescaled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{AlphaRecord, LpSeries, Rates, ReferenceCheck};

    fn report(records: Vec<AlphaRecord>) -> ConvergenceReport {
        ConvergenceReport {
            name: "t".into(),
            datum: "d".into(),
            n: 16,
            n_ref: 32,
            t_end: 1.0,
            p_list: vec![2.0],
            times: vec![0.0, 1.0],
            datum_linf: 1.0,
            datum_besov_s: Some(1.0),
            reference: ReferenceCheck {
                vel_l2_err: 0.0,
                vort_l2_err: 0.0,
                smallest_vel_err: 0.0,
                smallest_vort_l2_err: 0.0,
                vel_consistent: true,
                vort_consistent: true,
            },
            records,
            failures: vec![],
            rates: Rates {
                velocity: None,
                vorticity: vec![],
                grad_energy: None,
                energy_gap: None,
            },
            flow_calibration: None,
            bounds: None,
        }
    }

    fn record(alpha: f64, vel: f64) -> AlphaRecord {
        AlphaRecord {
            alpha,
            gamma0: 0.0,
            steps: 1,
            vel_l2_err: vec![vel, vel],
            vort_err: vec![LpSeries {
                p: 2.0,
                values: vec![0.0, 0.0],
            }],
            flow_mean_distance: vec![],
            delta: vec![],
            g_delta: None,
            alpha_norm_drift: vec![],
            energy: vec![],
            grad_energy: 0.0,
            energy_gap: 0.0,
            flow_bound: None,
        }
    }

    #[test]
    fn zero_errors_respect_bounds() {
        let c = compare_bounds(&report(vec![record(0.1, 0.0), record(0.01, 0.0)]), &BoundParams::default());
        assert_eq!(c.rows.len(), 4);
        assert!(c.violations.is_empty());
        assert_eq!(c.rescaled, None);
    }

    #[test]
    fn empty_report_gives_empty_annotation() {
        let c = compare_bounds(&report(vec![]), &BoundParams::default());
        assert!(c.rows.is_empty() && c.violations.is_empty() && c.rescaled.is_none());
    }

    #[test]
    fn violation_is_flagged_and_rescaled() {
        // at t = 0, T = 1 and γ₀ = 0, K = C₁√α + C√α, so an error of 5√α
        // needs a uniform constant of 2.5
        let alpha: f64 = 0.04;
        let c = compare_bounds(&report(vec![record(alpha, 5.0 * alpha.sqrt())]), &BoundParams::default());
        assert_eq!(c.violations, vec![alpha]);
        let r = c.rescaled.unwrap();
        assert!((r - 2.5).abs() < 1e-5, "{r}");
    }
}
