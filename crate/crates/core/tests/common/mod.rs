#![allow(dead_code)]

use missiles_core::linalg::DenseMatrix;
use missiles_core::slave::{Linearization, OdeModel};

/// `ẋ = A·x + B·u`, `y = C·x + D·u`.
#[derive(Debug, Clone)]
pub struct Lti {
    pub lin: Linearization,
    pub x0: Vec<f64>,
}

impl Lti {
    pub fn new(a: &[&[f64]], b: &[&[f64]], c: &[&[f64]], d: &[&[f64]], x0: &[f64]) -> Self {
        Self {
            lin: Linearization {
                a: DenseMatrix::from_rows(a),
                b: DenseMatrix::from_rows(b),
                c: DenseMatrix::from_rows(c),
                d: DenseMatrix::from_rows(d),
            },
            x0: x0.to_vec(),
        }
    }

    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let ax = self.lin.a.matvec(x).unwrap();
        let bu = self.lin.b.matvec(u).unwrap();
        ax.iter().zip(bu).map(|(a, b)| a + b).collect()
    }

    pub fn out(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let cx = self.lin.c.matvec(x).unwrap();
        let du = self.lin.d.matvec(u).unwrap();
        cx.iter().zip(du).map(|(a, b)| a + b).collect()
    }
}

impl OdeModel for Lti {
    fn name(&self) -> &str {
        "lti"
    }
    fn n_states(&self) -> usize {
        self.lin.a.rows()
    }
    fn n_inputs(&self) -> usize {
        self.lin.b.cols()
    }
    fn n_outputs(&self) -> usize {
        self.lin.c.rows()
    }
    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }
    fn derivatives(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&self.rhs(x, u));
    }
    fn outputs(&self, _t: f64, x: &[f64], u: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.out(x, u));
    }
    fn linearize(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Linearization {
        self.lin.clone()
    }
}

/// Classical RK4 on `ẋ = f(t, x)` with `n` uniform steps over `[0, t_end]`.
pub fn rk4<F: Fn(f64, &[f64]) -> Vec<f64>>(f: F, x0: &[f64], t_end: f64, n: usize) -> Vec<f64> {
    let h = t_end / n as f64;
    let mut x = x0.to_vec();
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &axpy(&x, &k1, h / 2.0));
        let k3 = f(t + h / 2.0, &axpy(&x, &k2, h / 2.0));
        let k4 = f(t + h, &axpy(&x, &k3, h));
        for j in 0..x.len() {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    x
}

/// Polynomial `Σ c_p·t^p` and its derivative.
pub fn poly(c: &[f64], t: f64) -> (f64, f64) {
    let v = c.iter().rev().fold(0.0, |acc, a| acc * t + a);
    let d = c
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (p, a)| acc * t + p as f64 * a);
    (v, d)
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}
