//! Polynomial coupling inputs: coefficient storage, evaluation, time shift
//! and the linear Hermite calibration maps.
//!
//! Coefficients are indexed by monomial degree starting at zero. Every input
//! polynomial is stored with `N_COEFFS` columns; the quadratic first-step
//! polynomials carry an explicit zero cubic coefficient.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Tensor4};

/// Maximum input polynomial degree.
pub const POLY_DEGREE: usize = 3;
/// Number of coefficients per input channel.
pub const N_COEFFS: usize = POLY_DEGREE + 1;
/// Smallest accepted macro-step. Below this `1/dt³` overflows quickly.
pub const MIN_STEP: f64 = 1e-12;

/// Time origin the coefficients refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Polynomial in absolute time `t`.
    Absolute,
    /// Polynomial in `ť = t - t_N` on `[0, δt)`.
    Local,
}

/// Per-channel polynomial coefficients for one macro-step.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyInput {
    xi: DenseMatrix,
    frame: Frame,
}

impl PolyInput {
    /// Wraps a coefficient matrix of shape `channels × (degree + 1)`. Lower
    /// degree matrices are padded with zero coefficients.
    pub fn new(xi: DenseMatrix, frame: Frame) -> Result<Self> {
        if xi.cols() > N_COEFFS {
            return Err(Error::DegreeTooHigh {
                degree: xi.cols() - 1,
                max: POLY_DEGREE,
            });
        }
        let xi = if xi.cols() == N_COEFFS {
            xi
        } else {
            let mut padded = DenseMatrix::zeros(xi.rows(), N_COEFFS);
            for j in 0..xi.rows() {
                padded.row_mut(j)[..xi.cols()].copy_from_slice(xi.row(j));
            }
            padded
        };
        Ok(Self { xi, frame })
    }

    pub fn local(xi: DenseMatrix) -> Result<Self> {
        Self::new(xi, Frame::Local)
    }

    pub fn from_channels(channels: &[[f64; N_COEFFS]], frame: Frame) -> Self {
        Self {
            xi: DenseMatrix::from_rows(channels),
            frame,
        }
    }

    /// Zero-order hold: each channel constant at the given value.
    pub fn constant(values: &[f64]) -> Self {
        let mut xi = DenseMatrix::zeros(values.len(), N_COEFFS);
        for (j, v) in values.iter().enumerate() {
            xi[(j, 0)] = *v;
        }
        Self {
            xi,
            frame: Frame::Local,
        }
    }

    pub fn zeros(channels: usize) -> Self {
        Self::constant(&vec![0.0; channels])
    }

    pub fn channels(&self) -> usize {
        self.xi.rows()
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn coefficients(&self) -> &DenseMatrix {
        &self.xi
    }

    pub fn channel(&self, j: usize) -> &[f64] {
        self.xi.row(j)
    }

    /// Value and time derivative of one channel.
    pub fn eval(&self, channel: usize, t: f64) -> Result<(f64, f64)> {
        if channel >= self.channels() {
            return Err(Error::ChannelOutOfRange {
                channel,
                count: self.channels(),
            });
        }
        Ok(horner(self.xi.row(channel), t))
    }

    /// Values of every channel at `t`, written into `out`.
    pub fn values_into(&self, t: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(self.channels()) {
            *o = horner(self.xi.row(j), t).0;
        }
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels()];
        self.values_into(t, &mut out);
        out
    }

    pub fn derivatives(&self, t: f64) -> Vec<f64> {
        (0..self.channels())
            .map(|j| horner(self.xi.row(j), t).1)
            .collect()
    }
}

/// Horner evaluation of `Σ a_p t^p` and its derivative.
#[inline]
pub fn horner(coeffs: &[f64], t: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    for &a in coeffs.iter().rev() {
        deriv = deriv * t + value;
        value = value * t + a;
    }
    (value, deriv)
}

/// `(value, derivative)` of `channel` at local time `t_local`.
pub fn eval_poly(xi: &PolyInput, channel: usize, t_local: f64) -> Result<(f64, f64)> {
    xi.eval(channel, t_local)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Re-expresses absolute-frame coefficients on the local frame starting at
/// `t_n`, so that `ǔ(ť) = u(t_n + ť)`.
pub fn shift_coefficients(xi_abs: &PolyInput, t_n: f64) -> PolyInput {
    let src = xi_abs.coefficients();
    let n1 = src.cols();
    let mut out = DenseMatrix::zeros(src.rows(), n1);
    for j in 0..src.rows() {
        let a = src.row(j);
        for p in 0..n1 {
            out[(j, p)] = (p..n1)
                .map(|q| a[q] * binomial(q, p) * t_n.powi((q - p) as i32))
                .sum();
        }
    }
    PolyInput {
        xi: out,
        frame: Frame::Local,
    }
}

/// Block-diagonal shift tensor: each channel block is the upper triangular
/// Pascal matrix `binom(q, p)·t_n^(q-p)`.
pub fn build_shift_tensor(n_in: usize, degree: usize, t_n: f64) -> Tensor4 {
    let n1 = degree + 1;
    let mut c = Tensor4::zeros(n_in, n1, n_in, n1);
    for j in 0..n_in {
        for p in 0..n1 {
            for q in p..n1 {
                c[(j, p, j, q)] = binomial(q, p) * t_n.powi((q - p) as i32);
            }
        }
    }
    c
}

/// Linear map from end-of-step constraints `(v2, v̇2)` to the coefficients of
/// the interpolating polynomial: `coeffs = av·v2 + ad·v̇2 + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteElems {
    pub av: [f64; N_COEFFS],
    pub ad: [f64; N_COEFFS],
    pub b: [f64; N_COEFFS],
}

impl HermiteElems {
    pub fn coefficients(&self, v2: f64, v2_dot: f64) -> [f64; N_COEFFS] {
        std::array::from_fn(|p| self.av[p] * v2 + self.ad[p] * v2_dot + self.b[p])
    }
}

fn check_step(dt: f64) -> Result<()> {
    if dt.is_finite() && dt >= MIN_STEP {
        Ok(())
    } else {
        Err(Error::NonPositiveStep(dt))
    }
}

/// Cubic Hermite operators on `[0, dt]` matching `(v1, v̇1)` at 0.
pub fn hermite_elems_local(dt: f64, v1: f64, v1_dot: f64) -> Result<HermiteElems> {
    check_step(dt)?;
    let h2 = dt * dt;
    let h3 = h2 * dt;
    Ok(HermiteElems {
        av: [0.0, 0.0, 3.0 / h2, -2.0 / h3],
        ad: [0.0, 0.0, -1.0 / dt, 1.0 / h2],
        b: hermite_b_local_unchecked(dt, v1, v1_dot),
    })
}

/// Start-constraint term of [`hermite_elems_local`].
pub fn hermite_b_local(dt: f64, v1: f64, v1_dot: f64) -> Result<[f64; N_COEFFS]> {
    check_step(dt)?;
    Ok(hermite_b_local_unchecked(dt, v1, v1_dot))
}

fn hermite_b_local_unchecked(dt: f64, v1: f64, v1_dot: f64) -> [f64; N_COEFFS] {
    let h2 = dt * dt;
    let h3 = h2 * dt;
    [
        v1,
        v1_dot,
        -3.0 * v1 / h2 - 2.0 * v1_dot / dt,
        v1_dot / h2 + 2.0 * v1 / h3,
    ]
}

/// Quadratic operators for the first macro-step, where no start derivative is
/// known: matches `v1` at 0 and `(v2, v̇2)` at `dt`.
pub fn hermite_elems_first_step(dt: f64, v1: f64) -> Result<HermiteElems> {
    check_step(dt)?;
    let h2 = dt * dt;
    Ok(HermiteElems {
        av: [0.0, 2.0 / dt, -1.0 / h2, 0.0],
        ad: [0.0, -1.0, 1.0 / dt, 0.0],
        b: [v1, -2.0 * v1 / dt, v1 / h2, 0.0],
    })
}

/// Cubic Hermite operators in the absolute frame on `[t1, t2]`.
///
/// Only used to check that shifting absolute-frame interpolants reproduces the
/// local-frame operators; the masters always interpolate on `[0, dt]`.
pub fn hermite_elems_absolute(t1: f64, t2: f64, v1: f64, v1_dot: f64) -> Result<HermiteElems> {
    if t2 == t1 {
        return Err(Error::CoincidentTimes(t1));
    }
    let h = t2 - t1;
    let inv_h2 = 1.0 / (h * h);
    let k = v1_dot + 2.0 * v1 / h;
    let av = [
        t1 * t1 * (1.0 + 2.0 * t2 / h),
        t1 * (-4.0 * t2 / h - 2.0 - 2.0 * t1 / h),
        1.0 + 2.0 * (t2 + 2.0 * t1) / h,
        -2.0 / h,
    ];
    // The linear coefficient's v̇2 term is t1·(2·t2 + t1); it follows from
    // expanding -τ²/h + τ³/h² with τ = t - t1.
    let ad = [-t1 * t1 * t2, t1 * (2.0 * t2 + t1), -(t2 + 2.0 * t1), 1.0];
    let b = [
        t2 * t2 * (v1 - k * t1),
        t2 * (2.0 * (k * t1 - v1) + t2 * k),
        v1 - (t1 + 2.0 * t2) * k,
        k,
    ];
    Ok(HermiteElems {
        av: av.map(|v| v * inv_h2),
        ad: ad.map(|v| v * inv_h2),
        b: b.map(|v| v * inv_h2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::contract_shift;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eval_examples() {
        let p = PolyInput::from_channels(&[[1.0, 0.0, -3.0, 2.0]], Frame::Local);
        assert_eq!(eval_poly(&p, 0, 1.0).unwrap(), (0.0, 0.0));
        let c = PolyInput::constant(&[4.5]);
        assert_eq!(eval_poly(&c, 0, 0.37).unwrap(), (4.5, 0.0));
        let id = PolyInput::from_channels(&[[0.0, 1.0, 0.0, 0.0]], Frame::Local);
        assert_eq!(eval_poly(&id, 0, 0.25).unwrap(), (0.25, 1.0));
        assert!(matches!(
            eval_poly(&id, 1, 0.0),
            Err(Error::ChannelOutOfRange {
                channel: 1,
                count: 1
            })
        ));
    }

    #[test]
    fn new_pads_and_rejects_high_degree() {
        let p = PolyInput::local(DenseMatrix::from_rows(&[[1.0, 2.0]])).unwrap();
        assert_eq!(p.channel(0), &[1.0, 2.0, 0.0, 0.0]);
        let err = PolyInput::local(DenseMatrix::zeros(1, 5)).unwrap_err();
        assert!(matches!(err, Error::DegreeTooHigh { degree: 4, max: 3 }));
    }

    #[test]
    fn shift_examples() {
        let p = PolyInput::from_channels(&[[0.0, 0.0, 1.0, 0.0]], Frame::Absolute);
        assert_eq!(
            shift_coefficients(&p, 2.0).channel(0),
            &[4.0, 4.0, 1.0, 0.0]
        );
        let q = PolyInput::from_channels(&[[1.5, -2.0, 0.5, 3.0]], Frame::Absolute);
        assert_eq!(shift_coefficients(&q, 0.0).channel(0), q.channel(0));
        let c = PolyInput::from_channels(&[[7.0, 0.0, 0.0, 0.0]], Frame::Absolute);
        assert_eq!(
            shift_coefficients(&c, 11.0).channel(0),
            &[7.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn shift_tensor_blocks() {
        assert_eq!(build_shift_tensor(2, 3, 0.0), Tensor4::identity(2, 4));
        let c = build_shift_tensor(1, 3, 2.0);
        let expected = [
            [1.0, 2.0, 4.0, 8.0],
            [0.0, 1.0, 4.0, 12.0],
            [0.0, 0.0, 1.0, 6.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(c[(0, p, 0, q)], expected[p][q]);
            }
        }
        let xi = PolyInput::from_channels(
            &[[0.3, -1.0, 2.0, 0.7], [1.0, 0.0, -4.0, 0.1]],
            Frame::Absolute,
        );
        let via_tensor = contract_shift(&build_shift_tensor(2, 3, 1.7), xi.coefficients()).unwrap();
        let direct = shift_coefficients(&xi, 1.7);
        for (a, b) in via_tensor
            .as_slice()
            .iter()
            .zip(direct.coefficients().as_slice())
        {
            assert!(close(*a, *b, 1e-14));
        }
    }

    #[test]
    fn local_hermite_values() {
        let h = hermite_elems_local(1.0, 1.0, 0.0).unwrap();
        assert_eq!(h.av, [0.0, 0.0, 3.0, -2.0]);
        assert_eq!(h.ad, [0.0, 0.0, -1.0, 1.0]);
        assert_eq!(h.b, [1.0, 0.0, -3.0, 2.0]);
        let smooth = hermite_elems_local(1.0, 0.0, 0.0)
            .unwrap()
            .coefficients(1.0, 0.0);
        assert_eq!(smooth, [0.0, 0.0, 3.0, -2.0]);
        assert_eq!(horner(&smooth, 1.0), (1.0, 0.0));
    }

    #[test]
    fn first_step_hermite() {
        let h = hermite_elems_first_step(1.0, 1.0).unwrap();
        assert_eq!(h.av, [0.0, 2.0, -1.0, 0.0]);
        let c = h.coefficients(0.0, 0.0);
        // (1 - ť)²
        assert_eq!(c, [1.0, -2.0, 1.0, 0.0]);
        assert_eq!(horner(&c, 0.0).0, 1.0);
        assert_eq!(horner(&c, 1.0), (0.0, 0.0));

        let flat = hermite_elems_first_step(0.3, 2.5)
            .unwrap()
            .coefficients(2.5, 0.0);
        assert!(close(flat[0], 2.5, 1e-15));
        for c in &flat[1..] {
            assert!(c.abs() < 1e-12, "{flat:?}");
        }
    }

    #[test]
    fn step_guards() {
        assert!(matches!(
            hermite_elems_local(0.0, 1.0, 1.0),
            Err(Error::NonPositiveStep(_))
        ));
        assert!(matches!(
            hermite_elems_local(1e-13, 1.0, 1.0),
            Err(Error::NonPositiveStep(_))
        ));
        assert!(matches!(
            hermite_elems_first_step(-1.0, 1.0),
            Err(Error::NonPositiveStep(_))
        ));
        assert!(matches!(
            hermite_b_local(f64::NAN, 1.0, 1.0),
            Err(Error::NonPositiveStep(_))
        ));
        assert!(matches!(
            hermite_elems_absolute(2.0, 2.0, 0.0, 0.0),
            Err(Error::CoincidentTimes(_))
        ));
    }

    #[test]
    fn absolute_matches_local_at_origin() {
        let dt = 0.25;
        let abs = hermite_elems_absolute(0.0, dt, 0.7, -1.3).unwrap();
        let loc = hermite_elems_local(dt, 0.7, -1.3).unwrap();
        for p in 0..N_COEFFS {
            assert!(close(abs.av[p], loc.av[p], 1e-14));
            assert!(close(abs.ad[p], loc.ad[p], 1e-14));
            assert!(close(abs.b[p], loc.b[p], 1e-14));
        }
        let smooth = hermite_elems_absolute(0.0, 1.0, 0.0, 0.0)
            .unwrap()
            .coefficients(1.0, 0.0);
        assert_eq!(smooth, [0.0, 0.0, 3.0, -2.0]);
    }
}
