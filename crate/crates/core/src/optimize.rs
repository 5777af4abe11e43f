//! Bounded scalar minimization: golden-section search with parabolic steps
//! (Brent's method).

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - √5) / 2

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Minimizes `f` on `[lo, hi]` to absolute abscissa tolerance `tol`.
///
/// Returns [`Error::NonConvergence`] with the iterate trace when
/// `max_iter` is exhausted.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Range(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut trace = Vec::new();

    for iter in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(Minimum { x, value: fx, iterations: iter });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        trace.push(format!("iter {iter}: x={x:.9} f(x)={fx:.9e} bracket=[{a:.9}, {b:.9}]"));
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, trace })
}

/// Maximizes `f` on `[lo, hi]`: a uniform scan of `samples` points locates
/// the best cell, which is then refined with [`brent_minimize`].
pub fn scan_then_maximize<F>(mut f: F, lo: f64, hi: f64, samples: usize, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Range(format!("invalid search interval [{lo}, {hi}]")));
    }
    let samples = samples.max(3);
    let step = (hi - lo) / (samples - 1) as f64;
    let (best, _) = (0..samples)
        .map(|k| (k, f(lo + k as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, (k, y)| if y > acc.1 { (k, y) } else { acc });
    let x0 = lo + best as f64 * step;
    let a = (x0 - step).max(lo);
    let b = (x0 + step).min(hi);
    let m = brent_minimize(|x| -f(x), a, b, tol, 200)?;
    Ok(Minimum { x: m.x, value: -m.value, iterations: m.iterations })
}
