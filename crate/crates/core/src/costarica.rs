//! Linear-response estimation of a slave over one macro-step.
//!
//! Around the step start the slave is replaced by
//!
//! ```text
//! ẋ = A·x + B·u + f̃_C        x(0) = x̃
//! y = C·x + D·u + y_C
//! ```
//!
//! whose response at `ť = δt` to a polynomial input is linear in the input
//! coefficients, the start state and `f̃_C`. The operators are obtained by
//! numerically inverting their Laplace transforms with the Stehfest scheme.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactors, Tensor3, SINGULARITY_THRESHOLD};
use crate::poly::{PolyInput, MIN_STEP, N_COEFFS};
use crate::slave::{Linearization, Slave};

/// Default number of Stehfest terms.
pub const DEFAULT_STEHFEST_TERMS: usize = 12;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Stehfest weights `V_i`, `i = 1..=n_terms`.
pub fn stehfest_weights(n_terms: usize) -> Result<Vec<f64>> {
    if !n_terms.is_multiple_of(2) || !(4..=18).contains(&n_terms) {
        return Err(Error::OddTermCount(n_terms));
    }
    let half = n_terms / 2;
    let weights = (1..=n_terms)
        .map(|i| {
            let sum: f64 = (i.div_ceil(2)..=i.min(half))
                .map(|k| {
                    (k as f64).powi(half as i32) * factorial(2 * k)
                        / (factorial(half - k)
                            * factorial(k)
                            * factorial(k - 1)
                            * factorial(i - k)
                            * factorial(2 * k - i))
                })
                .sum();
            if (i + half).is_multiple_of(2) {
                sum
            } else {
                -sum
            }
        })
        .collect();
    Ok(weights)
}

/// Real-axis inverse Laplace transform
/// `f(t) ≈ (ln2/t)·Σ_i V_i·F(i·ln2/t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StehfestScheme {
    weights: Vec<f64>,
}

impl Default for StehfestScheme {
    fn default() -> Self {
        Self::new(DEFAULT_STEHFEST_TERMS).expect("default term count is valid")
    }
}

impl StehfestScheme {
    pub fn new(n_terms: usize) -> Result<Self> {
        Ok(Self {
            weights: stehfest_weights(n_terms)?,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sample abscissae `s_i = i·ln2/t` paired with their weights.
    pub fn nodes(&self, t: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let a = LN_2 / t;
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| ((i + 1) as f64 * a, w))
    }

    /// Inverts a scalar transform at time `t > 0`.
    pub fn invert(&self, t: f64, transform: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self.nodes(t).map(|(s, w)| w * transform(s)).sum();
        sum * LN_2 / t
    }
}

/// `(sI - A)⁻¹`.
fn resolvent(a: &DenseMatrix, s: f64) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut m = a.scale(-1.0);
    for i in 0..n {
        m[(i, i)] += s;
    }
    Ok(LuFactors::factor(&m)?.inverse())
}

/// Input-to-output transform `Γ(s)`: row `i·n_in + j`, column `p` holds
/// `[C(sI-A)⁻¹B + D]_{ij}·p!/s^{p+1}`.
pub fn eval_gamma(lin: &Linearization, s: f64, degree: usize) -> Result<DenseMatrix> {
    lin.validate()?;
    let h = lin
        .c
        .matmul(&resolvent(&lin.a, s)?)?
        .matmul(&lin.b)?
        .add(&lin.d)?;
    let (n_out, n_in) = (h.rows(), h.cols());
    let mut out = DenseMatrix::zeros(n_out * n_in, degree + 1);
    for i in 0..n_out {
        for j in 0..n_in {
            for p in 0..=degree {
                out[(i * n_in + j, p)] = h[(i, j)] * factorial(p) / s.powi(p as i32 + 1);
            }
        }
    }
    Ok(out)
}

/// State-to-output transform `Π(s) = C(sI-A)⁻¹`.
pub fn eval_pi(lin: &Linearization, s: f64) -> Result<DenseMatrix> {
    lin.validate()?;
    lin.c.matmul(&resolvent(&lin.a, s)?)
}

/// `Θ(s) = Π(s)/s`, the response to a constant state forcing.
pub fn eval_theta(lin: &Linearization, s: f64) -> Result<DenseMatrix> {
    Ok(eval_pi(lin, s)?.scale(1.0 / s))
}

/// Response operators and control parts of one slave for one macro-step.
#[derive(Debug, Clone, PartialEq)]
pub struct CostaricaOps {
    /// Input coefficients to end-of-step outputs, `n_out × n_in × N_COEFFS`.
    pub g_v: Tensor3,
    /// Input coefficients to end-of-step output derivatives.
    pub g_d: Tensor3,
    /// Start state to outputs.
    pub p_v: DenseMatrix,
    pub p_d: DenseMatrix,
    /// Constant state forcing `f̃_C` to outputs.
    pub r_v: DenseMatrix,
    pub r_d: DenseMatrix,
    pub f_c: Vec<f64>,
    pub y_c: Vec<f64>,
    pub y_dot_c: Vec<f64>,
    /// State at the step start.
    pub x_tilde: Vec<f64>,
}

/// In-place Gauss-Jordan inverse of the row-major `n×n` matrix in `m`,
/// written to `inv`. Uses the same pivot threshold as [`LuFactors`].
fn invert_small(m: &mut [f64], inv: &mut [f64], n: usize) -> Result<()> {
    let threshold = SINGULARITY_THRESHOLD * m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    inv.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if m[i * n + k].abs() > m[p * n + k].abs() {
                p = i;
            }
        }
        let pivot = m[p * n + k];
        if !(pivot.abs() > threshold) {
            return Err(Error::SingularMatrix {
                column: k,
                pivot: pivot.abs(),
                threshold,
            });
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
                inv.swap(k * n + j, p * n + j);
            }
        }
        let d = 1.0 / pivot;
        for j in 0..n {
            m[k * n + j] *= d;
            inv[k * n + j] *= d;
        }
        for i in 0..n {
            let f = m[i * n + k];
            if i == k || f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[i * n + j] -= f * m[k * n + j];
                inv[i * n + j] -= f * inv[k * n + j];
            }
        }
    }
    Ok(())
}

/// `out = a·b` for row-major `r×k` and `k×c` slices.
fn mul_into(a: &[f64], b: &[f64], out: &mut [f64], r: usize, k: usize, c: usize) {
    for i in 0..r {
        let row = &mut out[i * c..(i + 1) * c];
        row.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..k {
            let x = a[i * k + l];
            if x != 0.0 {
                for (o, bv) in row.iter_mut().zip(&b[l * c..(l + 1) * c]) {
                    *o += x * bv;
                }
            }
        }
    }
}

/// Builds the response operators at `ť = dt`. Control parts and start state
/// are left at zero.
pub fn compute_operators(
    lin: &Linearization,
    dt: f64,
    scheme: &StehfestScheme,
) -> Result<CostaricaOps> {
    lin.validate()?;
    if !(dt >= MIN_STEP) || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    let (n_st, n_in, n_out) = (lin.n_st(), lin.n_in(), lin.n_out());
    let (a, b, c, d) = (
        lin.a.as_slice(),
        lin.b.as_slice(),
        lin.c.as_slice(),
        lin.d.as_slice(),
    );

    let mut g_v = vec![0.0; n_out * n_in * N_COEFFS];
    let mut g_d = vec![0.0; n_out * n_in * N_COEFFS];
    let mut p_v = vec![0.0; n_out * n_st];
    let mut p_d = vec![0.0; n_out * n_st];
    let mut r_v = vec![0.0; n_out * n_st];

    let mut ca = vec![0.0; n_out * n_st];
    mul_into(c, a, &mut ca, n_out, n_st, n_st);
    let mut m = vec![0.0; n_st * n_st];
    let mut res = vec![0.0; n_st * n_st];
    let mut pi = vec![0.0; n_out * n_st];
    let mut ca_res = vec![0.0; n_out * n_st];
    let mut cb = vec![0.0; n_out * n_in];

    for (s, w) in scheme.nodes(dt) {
        for (mi, ai) in m.iter_mut().zip(a) {
            *mi = -ai;
        }
        for i in 0..n_st {
            m[i * n_st + i] += s;
        }
        invert_small(&mut m, &mut res, n_st)?;
        mul_into(c, &res, &mut pi, n_out, n_st, n_st);
        mul_into(&ca, &res, &mut ca_res, n_out, n_st, n_st);
        mul_into(&pi, b, &mut cb, n_out, n_st, n_in);

        let inv_s = 1.0 / s;
        for ij in 0..n_out * n_in {
            let h = cb[ij] + d[ij];
            let gv = &mut g_v[ij * N_COEFFS..(ij + 1) * N_COEFFS];
            let gd = &mut g_d[ij * N_COEFFS..(ij + 1) * N_COEFFS];
            // p!/s^{p+1}, built incrementally.
            let mut kernel = inv_s;
            for p in 0..N_COEFFS {
                gv[p] += w * h * kernel;
                // s·Γ_p minus its initial value: only p = 0 starts at D.
                gd[p] += w * if p == 0 { cb[ij] } else { h * kernel * s };
                kernel *= (p + 1) as f64 * inv_s;
            }
        }
        for ik in 0..n_out * n_st {
            p_v[ik] += w * pi[ik];
            // s·Π - C = C·A·(sI - A)⁻¹
            p_d[ik] += w * ca_res[ik];
            r_v[ik] += w * pi[ik] * inv_s;
        }
    }

    let scale = LN_2 / dt;
    let scaled = |mut v: Vec<f64>| {
        v.iter_mut().for_each(|x| *x *= scale);
        v
    };
    let p_v = DenseMatrix::from_vec(n_out, n_st, scaled(p_v))?;
    Ok(CostaricaOps {
        g_v: Tensor3::from_vec((n_out, n_in, N_COEFFS), scaled(g_v))?,
        g_d: Tensor3::from_vec((n_out, n_in, N_COEFFS), scaled(g_d))?,
        p_d: DenseMatrix::from_vec(n_out, n_st, scaled(p_d))?,
        r_v: DenseMatrix::from_vec(n_out, n_st, scaled(r_v))?,
        // L⁻¹{sΘ - 0} = L⁻¹{Π}
        r_d: p_v.clone(),
        p_v,
        f_c: vec![0.0; n_st],
        y_c: vec![0.0; n_out],
        y_dot_c: vec![0.0; n_out],
        x_tilde: vec![0.0; n_st],
    })
}

fn check_len(context: &'static str, expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::dims(context, expected, v.len()))
    }
}

/// `f̃_C = f̃ - A·x̃ - B·u`, the constant part of the affine state equation.
pub fn compute_ftilde_c(
    lin: &Linearization,
    x_tilde: &[f64],
    f_tilde: &[f64],
    u_end_prev: &[f64],
) -> Result<Vec<f64>> {
    check_len("compute_ftilde_c f", lin.n_st(), f_tilde)?;
    let ax = lin.a.matvec(x_tilde)?;
    let bu = lin.b.matvec(u_end_prev)?;
    Ok((0..f_tilde.len())
        .map(|i| f_tilde[i] - ax[i] - bu[i])
        .collect())
}

/// Zero-order-hold control parts: `y_C = g - C·x̃ - D·u`, `ẏ_C = 0`.
pub fn compute_control_parts(
    lin: &Linearization,
    x_tilde: &[f64],
    u_start: &[f64],
    g_value: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("compute_control_parts g", lin.n_out(), g_value)?;
    let cx = lin.c.matvec(x_tilde)?;
    let du = lin.d.matvec(u_start)?;
    let y_c = (0..g_value.len())
        .map(|i| g_value[i] - cx[i] - du[i])
        .collect();
    Ok((y_c, vec![0.0; g_value.len()]))
}

impl CostaricaOps {
    /// Operators and control parts from a slave at the start of a step.
    pub fn from_slave(slave: &dyn Slave, dt: f64, scheme: &StehfestScheme) -> Result<Self> {
        let lin = slave.linearization()?;
        let (x, f) = slave.states()?;
        let u = slave.current_inputs();
        let g = slave.outputs();
        let mut ops = compute_operators(&lin, dt, scheme)?;
        ops.f_c = compute_ftilde_c(&lin, &x, &f, &u)?;
        let (y_c, y_dot_c) = compute_control_parts(&lin, &x, &u, &g)?;
        ops.y_c = y_c;
        ops.y_dot_c = y_dot_c;
        ops.x_tilde = x;
        Ok(ops)
    }

    pub fn n_out(&self) -> usize {
        self.g_v.dims().0
    }

    pub fn n_in(&self) -> usize {
        self.g_v.dims().1
    }

    pub fn n_st(&self) -> usize {
        self.p_v.cols()
    }

    /// Estimated outputs and output derivatives at the step end.
    pub fn estimate(&self, xi_local: &PolyInput) -> Result<(Vec<f64>, Vec<f64>)> {
        estimate(self, xi_local, &self.x_tilde)
    }

    /// Output parts that do not depend on the inputs:
    /// `P·x̃ + R·f̃_C + y_C` for values and derivatives.
    pub fn free_response(&self, x_tilde: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let pv = self.p_v.matvec(x_tilde)?;
        let rv = self.r_v.matvec(&self.f_c)?;
        let pd = self.p_d.matvec(x_tilde)?;
        let rd = self.r_d.matvec(&self.f_c)?;
        let n = self.n_out();
        let y = (0..n).map(|i| pv[i] + rv[i] + self.y_c[i]).collect();
        let y_dot = (0..n).map(|i| pd[i] + rd[i] + self.y_dot_c[i]).collect();
        Ok((y, y_dot))
    }
}

/// `ŷ = G_V·Ξ + P_V·x̃ + R_V·f̃_C + y_C` and the derivative counterpart.
pub fn estimate(
    ops: &CostaricaOps,
    xi_local: &PolyInput,
    x_tilde: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if xi_local.frame() != crate::poly::Frame::Local {
        return Err(Error::WrongFrame);
    }
    if xi_local.channels() != ops.n_in() {
        return Err(Error::ChannelCountMismatch {
            expected: ops.n_in(),
            actual: xi_local.channels(),
        });
    }
    let (mut y, mut y_dot) = ops.free_response(x_tilde)?;
    let gy = crate::linalg::contract_gp(&ops.g_v, xi_local.coefficients())?;
    let gd = crate::linalg::contract_gp(&ops.g_d, xi_local.coefficients())?;
    for i in 0..y.len() {
        y[i] += gy[i];
        y_dot[i] += gd[i];
    }
    Ok((y, y_dot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> Linearization {
        Linearization {
            a: DenseMatrix::from_rows(&[[a]]),
            b: DenseMatrix::from_rows(&[[b]]),
            c: DenseMatrix::from_rows(&[[c]]),
            d: DenseMatrix::from_rows(&[[d]]),
        }
    }

    #[test]
    fn weights_small_case() {
        assert_eq!(stehfest_weights(4).unwrap(), vec![-2.0, 26.0, -48.0, 24.0]);
        assert!(matches!(stehfest_weights(7), Err(Error::OddTermCount(7))));
        assert!(matches!(stehfest_weights(20), Err(Error::OddTermCount(20))));
        assert!(matches!(stehfest_weights(2), Err(Error::OddTermCount(2))));
    }

    /// 12-term relative error bound when inverting a degree-`k` monomial in t.
    const DEGREE_TOL: [f64; 5] = [1e-9, 5e-6, 1e-4, 2e-4, 5e-3];

    #[test]
    fn weights_alternate_and_cancel() {
        let w = stehfest_weights(12).unwrap();
        for pair in w.windows(2) {
            assert!(pair[0] * pair[1] < 0.0);
        }
        let scale: f64 = w.iter().map(|v| v.abs()).sum();
        assert!(w.iter().sum::<f64>().abs() < 1e-12 * scale);
    }

    #[test]
    fn known_pairs() {
        // Truncation error is inherent to the rational weights; at 12 terms
        // it sits around 1e-6 relative for t and 1e-5 for e^{-t}.
        let s = StehfestScheme::default();
        assert!((s.invert(1.0, |s| 1.0 / s) - 1.0).abs() < 1e-9);
        assert!((s.invert(2.0, |s| 1.0 / (s * s)) - 2.0).abs() < 5e-6);
        assert!((s.invert(1.0, |s| 1.0 / (s + 1.0)) - (-1.0f64).exp()).abs() < 2e-5);
    }

    #[test]
    fn more_terms_tighten() {
        let e = (-1.0f64).exp();
        let err = |n| {
            let s = StehfestScheme::new(n).unwrap();
            (s.invert(1.0, |s| 1.0 / (s + 1.0)) - e).abs()
        };
        assert!(err(16) < 1e-7);
        assert!(err(16) < err(14) && err(14) < err(12));
        let s16 = StehfestScheme::new(16).unwrap();
        assert!((s16.invert(2.0, |s| 1.0 / (s * s)) - 2.0).abs() < 2e-7);
    }

    #[test]
    fn transforms() {
        let integ = scalar(0.0, 1.0, 1.0, 0.0);
        let g = eval_gamma(&integ, 2.0, 3).unwrap();
        for p in 0..4 {
            let expected = factorial(p) / 2f64.powi(p as i32 + 2);
            assert!((g[(0, p)] - expected).abs() < 1e-15);
        }
        let feed = scalar(-3.0, 1.0, 0.0, 5.0);
        let g = eval_gamma(&feed, 0.5, 3).unwrap();
        assert!((g[(0, 2)] - 5.0 * 2.0 / 0.125).abs() < 1e-12);
        let decay = scalar(-1.0, 0.0, 1.0, 0.0);
        assert!((eval_pi(&decay, 3.0).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((eval_theta(&decay, 3.0).unwrap()[(0, 0)] - 0.25 / 3.0).abs() < 1e-15);
        assert!(matches!(
            eval_pi(&scalar(2.0, 0.0, 1.0, 0.0), 2.0),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn decay_operators() {
        let ops = compute_operators(
            &scalar(-1.0, 0.0, 1.0, 0.0),
            1.0,
            &StehfestScheme::default(),
        )
        .unwrap();
        let e = (-1.0f64).exp();
        assert!((ops.p_v[(0, 0)] - e).abs() < 2e-5);
        assert!((ops.r_v[(0, 0)] - (1.0 - e)).abs() < 2e-5);
        assert!((ops.p_d[(0, 0)] + e).abs() < 2e-5);
        assert!((ops.r_d[(0, 0)] - e).abs() < 2e-5);
    }

    #[test]
    fn integrator_operators() {
        let ops = compute_operators(&scalar(0.0, 1.0, 1.0, 0.0), 1.0, &StehfestScheme::default())
            .unwrap();
        for p in 0..4 {
            assert!(
                (ops.g_v[(0, 0, p)] - 1.0 / (p + 1) as f64).abs() < DEGREE_TOL[p + 1],
                "{p}"
            );
            assert!((ops.g_d[(0, 0, p)] - 1.0).abs() < DEGREE_TOL[p], "{p}");
        }
        let zero = compute_operators(
            &scalar(-2.0, 1.0, 0.0, 0.0),
            0.3,
            &StehfestScheme::default(),
        )
        .unwrap();
        assert!(zero
            .g_v
            .as_slice()
            .iter()
            .chain(zero.g_d.as_slice())
            .all(|v| *v == 0.0));
        assert!(zero.p_v.max_abs() == 0.0 && zero.r_v.max_abs() == 0.0);
        assert!(matches!(
            compute_operators(&scalar(0.0, 1.0, 1.0, 0.0), 0.0, &StehfestScheme::default()),
            Err(Error::NonPositiveStep(_))
        ));
    }

    #[test]
    fn feedthrough_derivative_operators() {
        let ops = compute_operators(
            &scalar(-1.0, 0.0, 0.0, 2.0),
            0.5,
            &StehfestScheme::default(),
        )
        .unwrap();
        let expected_v = [2.0, 1.0, 0.5, 0.25];
        let expected_d = [0.0, 2.0, 2.0, 1.5];
        for p in 0..4 {
            assert!(
                (ops.g_v[(0, 0, p)] - expected_v[p]).abs() < DEGREE_TOL[p] * expected_v[p],
                "{p}"
            );
            assert!(
                (ops.g_d[(0, 0, p)] - expected_d[p]).abs() < DEGREE_TOL[p.saturating_sub(1)] * 2.0,
                "{p}"
            );
        }
    }

    #[test]
    fn control_parts() {
        let prey = scalar(-2.0 / 3.0, -4.0 / 3.0, 1.0, 0.0);
        let fc = compute_ftilde_c(&prey, &[1.0], &[-2.0 / 3.0], &[1.0]).unwrap();
        assert!((fc[0] - 4.0 / 3.0).abs() < 1e-15);
        let lin = scalar(0.0, 0.0, 4.0, 0.0);
        let (y_c, y_dot_c) = compute_control_parts(&lin, &[2.0], &[0.0], &[4.0]).unwrap();
        assert_eq!(y_c, vec![-4.0]);
        assert_eq!(y_dot_c, vec![0.0]);
        assert!(compute_ftilde_c(&prey, &[1.0], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn integrator_estimate() {
        let mut ops =
            compute_operators(&scalar(0.0, 1.0, 1.0, 0.0), 1.0, &StehfestScheme::default())
                .unwrap();
        ops.x_tilde = vec![0.0];
        let (y, y_dot) = ops.estimate(&PolyInput::constant(&[1.0])).unwrap();
        assert!((y[0] - 1.0).abs() < DEGREE_TOL[1]);
        assert!((y_dot[0] - 1.0).abs() < 1e-9);
        ops.y_c = vec![0.25];
        let (y, _) = estimate(&ops, &PolyInput::zeros(1), &[0.0]).unwrap();
        assert_eq!(y, vec![0.25]);
    }
}
