//! Report persistence: CSV tables, a JSON summary and gnuplot scripts.
//!
//! Every CSV may start with `#` comment lines; the only one written here
//! is the timestamp line of `sweep.csv`, so two runs of the same
//! configuration differ in that line alone.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Result, StudyError};
use crate::sweep::{AlphaRecord, ConvergenceReport};

pub const SWEEP_HEADER: &str = "alpha,t,vel_l2_err,vort_l1_err,vort_l2_err,vort_l4_err,flow_dist,delta,alphanorm_drift,energy";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn series(r: &AlphaRecord, p: f64, i: usize) -> f64 {
    r.vort_err
        .iter()
        .find(|s| s.p == p)
        .map_or(f64::NAN, |s| s.values[i])
}

/// Sweep rows, one per (α, sample time). Flow columns are NaN when
/// flows were off.
pub fn write_sweep_csv<W: Write>(report: &ConvergenceReport, mut w: W, stamp: Option<u64>) -> Result<()> {
    if let Some(s) = stamp {
        writeln!(w, "# aeul sweep '{}' generated unix={s}", report.name)?;
    }
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in &report.records {
        for (i, t) in report.times.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.alpha,
                t,
                r.vel_l2_err[i],
                series(r, 1.0, i),
                series(r, 2.0, i),
                series(r, 4.0, i),
                opt(r.flow_mean_distance.get(i).copied()),
                r.delta[i],
                r.alpha_norm_drift[i],
                r.energy[i],
            )?;
        }
    }
    Ok(())
}

/// One row per α: the suprema in time and the final-time quantities.
pub fn write_sup_errors_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> Result<()> {
    write!(w, "alpha,sup_vel_l2_err")?;
    for p in &report.p_list {
        write!(w, ",sup_vort_l{p}_err")?;
    }
    writeln!(w, ",grad_energy,energy_gap,flow_dist,delta,flow_bound,gamma0")?;
    for r in &report.records {
        write!(w, "{},{}", r.alpha, r.sup_vel_err())?;
        for &p in &report.p_list {
            write!(w, ",{}", opt(r.sup_vort_err(p)))?;
        }
        writeln!(
            w,
            ",{},{},{},{},{},{}",
            r.grad_energy,
            r.energy_gap,
            opt(r.final_flow_distance()),
            opt(r.final_delta()),
            opt(r.flow_bound),
            r.gamma0
        )?;
    }
    Ok(())
}

/// Measured errors next to the bound curves, one row per (α, t, p).
pub fn write_bound_comparison_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> Result<()> {
    writeln!(w, "alpha,t,K,vel_l2_err,p,vort_err,vort_bound")?;
    let Some(cmp) = &report.bounds else {
        return Ok(());
    };
    for row in &cmp.rows {
        if row.vort.is_empty() {
            writeln!(w, "{},{},{},{},NaN,NaN,NaN", row.alpha, row.t, row.k, row.vel_err)?;
        }
        for v in &row.vort {
            writeln!(w, "{},{},{},{},{},{},{}", row.alpha, row.t, row.k, row.vel_err, v.p, v.err, v.bound)?;
        }
    }
    Ok(())
}

/// Log-log plots of the sup errors against α.
pub fn sweep_plot_script(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset logscale xy\nset key left top\nset xlabel 'alpha'\nset ylabel 'error'\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{}_rates.png'\n", report.name));
    s.push_str("plot 'sup_errors.csv' using 1:2 skip 1 with linespoints title 'sup_t |u^a - u|_2'");
    for (j, p) in report.p_list.iter().enumerate() {
        s.push_str(&format!(
            ", \\\n     'sup_errors.csv' using 1:{} skip 1 with linespoints title 'sup_t |q^a - w|_{p}'",
            3 + j
        ));
    }
    s.push('\n');
    s.push_str(&format!("set output '{}_history.png'\nset logscale y\nunset logscale x\nset xlabel 't'\n", report.name));
    s.push_str("plot for [a in \"");
    let alphas: Vec<String> = report.records.iter().map(|r| r.alpha.to_string()).collect();
    s.push_str(&alphas.join(" "));
    s.push_str("\"] 'sweep.csv' using 2:($1 == a ? $3 : 1/0) skip 2 with lines title 'alpha = '.a\n");
    s
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes the full report into `dir`, creating it when needed.
pub fn persist_sweep(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("sweep.csv"))?;
    write_sweep_csv(report, &mut w, Some(timestamp()))?;
    w.flush()?;
    let mut w = create(&dir.join("sup_errors.csv"))?;
    write_sup_errors_csv(report, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("bounds.csv"))?;
    write_bound_comparison_csv(report, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    fs::write(dir.join("plot.gp"), sweep_plot_script(report))?;
    Ok(())
}

/// `path` itself when it is a file, else `path/sweep.csv`.
fn sweep_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("sweep.csv")
    } else {
        path.to_path_buf()
    }
}

fn source_name(path: &Path) -> String {
    let p = if path.is_dir() { path } else { path.parent().unwrap_or(path) };
    p.file_name()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Per-source, per-α maxima over time of the merged rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedSummary {
    pub source: String,
    pub alpha: f64,
    pub sup_vel_l2_err: f64,
    pub sup_vort_l2_err: f64,
}

/// Merges sweep CSVs (files or output directories) into `merged.csv`
/// with a leading `source` column, writes `summary.csv` with the sup
/// errors per source and α, and a `plot.gp` over the merged table.
pub fn merge_reports(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<MergedSummary>> {
    if inputs.is_empty() {
        return Err(StudyError::config("report needs at least one input"));
    }
    fs::create_dir_all(out_dir)?;
    let mut merged = csv::Writer::from_path(out_dir.join("merged.csv"))?;
    let mut header_written = false;
    let mut summary: Vec<MergedSummary> = Vec::new();
    for input in inputs {
        let file = sweep_file(input);
        if !file.is_file() {
            return Err(StudyError::config(format!("no sweep table at {}", file.display())));
        }
        let source = source_name(input);
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&file)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>().join(",") != SWEEP_HEADER {
            return Err(StudyError::config(format!("{} does not have the sweep header", file.display())));
        }
        if !header_written {
            let mut h = vec!["source"];
            h.extend(headers.iter());
            merged.write_record(&h)?;
            header_written = true;
        }
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| StudyError::config(format!("{}: bad number '{}': {e}", file.display(), &rec[i])))
            };
            let (alpha, vel, vort) = (num(0)?, num(2)?, num(4)?);
            let mut row = vec![source.as_str()];
            row.extend(rec.iter());
            merged.write_record(&row)?;
            match summary.iter_mut().find(|s| s.source == source && s.alpha == alpha) {
                Some(s) => {
                    s.sup_vel_l2_err = s.sup_vel_l2_err.max(vel);
                    s.sup_vort_l2_err = s.sup_vort_l2_err.max(vort);
                }
                None => summary.push(MergedSummary {
                    source: source.clone(),
                    alpha,
                    sup_vel_l2_err: vel,
                    sup_vort_l2_err: vort,
                }),
            }
        }
    }
    merged.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    w.write_record(["source", "alpha", "sup_vel_l2_err", "sup_vort_l2_err"])?;
    for s in &summary {
        w.write_record([
            s.source.clone(),
            s.alpha.to_string(),
            s.sup_vel_l2_err.to_string(),
            s.sup_vort_l2_err.to_string(),
        ])?;
    }
    w.flush()?;

    let mut sources: Vec<&str> = summary.iter().map(|s| s.source.as_str()).collect();
    sources.dedup();
    let mut gp = String::from(
        "set datafile separator ','\nset logscale xy\nset key left top\nset xlabel 'alpha'\nset ylabel 'sup_t error'\n\
         set terminal pngcairo size 900,600\nset output 'merged.png'\n",
    );
    gp.push_str(&format!("plot for [s in \"{}\"] 'summary.csv' using 2:(strcol(1) eq s ? $3 : 1/0) skip 1 with linespoints title s\n", sources.join(" ")));
    fs::write(out_dir.join("plot.gp"), gp)?;
    Ok(summary)
}
