//! Periodic Catmull–Rom bicubic interpolation of gridpoint samples.

use ndarray::Array2;

use crate::spectral::PERIOD;

#[inline]
fn weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[inline]
fn locate(x: f64, n: usize) -> (usize, f64) {
    let s = x.rem_euclid(PERIOD) * n as f64 / PERIOD;
    let i = s.floor();
    let frac = s - i;
    ((i as usize) % n, frac)
}

/// Interpolates `values[i, j] = f(i·dx, j·dx)` at `x`.
pub(crate) fn bicubic(values: &Array2<f64>, x: [f64; 2]) -> f64 {
    let n = values.nrows();
    let (i, ti) = locate(x[0], n);
    let (j, tj) = locate(x[1], n);
    let wi = weights(ti);
    let wj = weights(tj);
    let mut acc = 0.0;
    for (a, wa) in wi.iter().enumerate() {
        let ii = (i + n + a - 1) % n;
        let mut row = 0.0;
        for (b, wb) in wj.iter().enumerate() {
            let jj = (j + n + b - 1) % n;
            row += wb * values[[ii, jj]];
        }
        acc += wa * row;
    }
    acc
}

/// Value at the nearest gridpoint.
pub(crate) fn nearest(values: &Array2<f64>, x: [f64; 2]) -> f64 {
    let n = values.nrows();
    let idx = |c: f64| ((c.rem_euclid(PERIOD) * n as f64 / PERIOD).round() as usize) % n;
    values[[idx(x[0]), idx(x[1])]]
}
