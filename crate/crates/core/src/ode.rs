//! Adaptive Dormand-Prince 5(4) integration with output at prescribed times.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// Stage coefficients; the last row holds the fifth-order weights, so the
/// final stage is the derivative at the new point.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
        }
    }
}

/// Integrates `ẋ = f(t, x)` from `times[0]` and calls `observe` at every
/// time in `times` (including the first). Steps never cross an output time.
pub fn integrate<F, O>(
    mut f: F,
    x0: &[f64],
    times: &[f64],
    tol: Tolerances,
    mut observe: O,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = x0.len();
    let Some(&t0) = times.first() else {
        return Ok(());
    };
    let mut x = x0.to_vec();
    observe(t0, &x)?;

    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut t = t0;
    f(t, &x, &mut k[0]);
    let span = times.last().unwrap() - t0;
    let mut h = (span * 1e-3).max(1e-12);

    for &target in &times[1..] {
        while t < target {
            let last = h >= target - t;
            let h_try = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    tmp[i] = x[i] + h_try * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                f(t + C[s] * h_try, &tmp, &mut k[s]);
            }
            // Stage 7 was evaluated at the fifth-order solution.
            x_new.copy_from_slice(&tmp);
            let mut err = 0.0;
            for i in 0..n {
                let e = h_try * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                let sc = tol.atol + tol.rtol * x[i].abs().max(x_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
            if !err.is_finite() || !x_new.iter().all(|v| v.is_finite()) {
                return Err(Error::SolverDiverged {
                    slave: "monolithic".into(),
                    time: t,
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if last { target } else { t + h_try };
                x.copy_from_slice(&x_new);
                k.swap(0, 6);
                if !last {
                    h = h_try * factor;
                } else {
                    // Keep the unclamped proposal for the next interval.
                    h = h.max(h_try * factor);
                }
            } else {
                h = h_try * factor;
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::SolverDiverged {
                        slave: "monolithic".into(),
                        time: t,
                    });
                }
            }
        }
        observe(target, &x)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let mut out = Vec::new();
        integrate(
            |_, x, dx| dx[0] = -x[0],
            &[1.0],
            &times,
            Tolerances::default(),
            |t, x| {
                out.push((t, x[0]));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(out.len(), 11);
        for (t, v) in out {
            assert!((v - (-t).exp()).abs() < 1e-9, "{t} {v}");
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let times = [0.0, 1.0, 10.0];
        let mut last = vec![];
        integrate(
            |_, x, dx| {
                dx[0] = x[1];
                dx[1] = -x[0];
            },
            &[1.0, 0.0],
            &times,
            Tolerances::default(),
            |_, x| {
                last = x.to_vec();
                Ok(())
            },
        )
        .unwrap();
        assert!((last[0] - 10f64.cos()).abs() < 1e-8);
        assert!((last[1] + 10f64.sin()).abs() < 1e-8);
    }
}
