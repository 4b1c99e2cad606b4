//! Matrix-free GMRES.

use crate::error::Result;
use crate::linalg::{dot, norm2};

/// Outcome of a [`gmres`] solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Operator applications performed.
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solves `A·x = b` from `x = 0` with unrestarted GMRES, stopping when the
/// residual drops below `rel_tol·‖b‖₂` or after `max_iter` applications.
pub fn gmres<F>(mut apply: F, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<GmresResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let beta = norm2(b);
    if beta == 0.0 || n == 0 {
        return Ok(GmresResult {
            x: vec![0.0; n],
            iterations: 0,
            residual_norm: 0.0,
        });
    }
    let max_iter = max_iter.min(n).max(1);
    let target = rel_tol * beta;

    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / beta).collect()];
    // Hessenberg columns after rotation, i.e. the upper-triangular factor.
    let mut r: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut k = 0;

    while k < max_iter {
        let mut w = apply(&basis[k])?;
        let mut h = vec![0.0; k + 2];
        for (i, v) in basis.iter().enumerate() {
            h[i] = dot(&w, v);
            for (wj, vj) in w.iter_mut().zip(v) {
                *wj -= h[i] * vj;
            }
        }
        h[k + 1] = norm2(&w);

        for (i, &(c, s)) in cs.iter().enumerate() {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c * a + s * b;
            h[i + 1] = -s * a + c * b;
        }
        let denom = h[k].hypot(h[k + 1]);
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (h[k] / denom, h[k + 1] / denom)
        };
        h[k] = denom;
        let sub = h[k + 1];
        h.truncate(k + 1);
        cs.push((c, s));
        g.push(-s * g[k]);
        g[k] *= c;
        r.push(h);
        k += 1;

        let res = g[k].abs();
        if res <= target || sub <= f64::EPSILON * beta {
            break;
        }
        basis.push(w.iter().map(|v| v / sub).collect());
    }

    // Back-substitution on the k×k triangular system.
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[j][i] * y[j]).sum();
        y[i] = if r[i][i] == 0.0 {
            0.0
        } else {
            (g[i] - s) / r[i][i]
        };
    }
    let mut x = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (xj, vj) in x.iter_mut().zip(v) {
            *xj += yi * vj;
        }
    }
    Ok(GmresResult {
        x,
        iterations: k,
        residual_norm: g[k].abs(),
    })
}
