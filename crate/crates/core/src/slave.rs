//! The co-simulation slave contract and an ODE-backed implementation.
//!
//! A [`Slave`] exposes the interactions a master may use: providing
//! (polynomial) inputs, stepping, reading outputs and their derivatives,
//! reading states, linearizing and rolling back. The FMI 2.0 counterparts are
//! noted on each method; nothing here loads actual FMUs.

use std::fmt;
use std::sync::Arc;

use crate::error::{Capability, Error, Result};
use crate::linalg::DenseMatrix;
use crate::poly::{Frame, PolyInput, MIN_STEP};

/// Micro-steps of the internal RK4 integrator per macro-step.
pub const MICRO_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub polynomial_inputs: bool,
    pub output_derivatives: bool,
    pub state_access: bool,
    pub linearization: bool,
    pub rollback: bool,
}

impl Capabilities {
    pub const ALL: Self = Self {
        polynomial_inputs: true,
        output_derivatives: true,
        state_access: true,
        linearization: true,
        rollback: true,
    };

    /// What MISSILES needs: everything but rollback.
    pub const NO_ROLLBACK: Self = Self {
        rollback: false,
        ..Self::ALL
    };

    /// Only the basic interactions (set inputs, step, read outputs).
    pub const BASIC: Self = Self {
        polynomial_inputs: false,
        output_derivatives: false,
        state_access: false,
        linearization: false,
        rollback: false,
    };

    pub fn has(&self, cap: Capability) -> bool {
        match cap {
            Capability::PolynomialInputs => self.polynomial_inputs,
            Capability::OutputDerivatives => self.output_derivatives,
            Capability::StateAccess => self.state_access,
            Capability::Linearization => self.linearization,
            Capability::Rollback => self.rollback,
        }
    }
}

/// Jacobians of the derivative and output functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    /// ∂f/∂x, `n_st × n_st`.
    pub a: DenseMatrix,
    /// ∂f/∂u, `n_st × n_in`.
    pub b: DenseMatrix,
    /// ∂g/∂x, `n_out × n_st`.
    pub c: DenseMatrix,
    /// ∂g/∂u, `n_out × n_in`.
    pub d: DenseMatrix,
}

impl Linearization {
    pub fn n_st(&self) -> usize {
        self.a.rows()
    }

    pub fn n_in(&self) -> usize {
        self.b.cols()
    }

    pub fn n_out(&self) -> usize {
        self.c.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_st, n_in, n_out) = (self.a.rows(), self.b.cols(), self.c.rows());
        if self.a.cols() != n_st {
            return Err(Error::dims("Linearization A", n_st, self.a.cols()));
        }
        if self.b.rows() != n_st {
            return Err(Error::dims("Linearization B", n_st, self.b.rows()));
        }
        if self.c.cols() != n_st {
            return Err(Error::dims("Linearization C", n_st, self.c.cols()));
        }
        if self.d.rows() != n_out || self.d.cols() != n_in {
            return Err(Error::dims(
                "Linearization D",
                n_out * n_in,
                self.d.rows() * self.d.cols(),
            ));
        }
        Ok(())
    }
}

/// End-of-step snapshot returned by [`Slave::do_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t_end: f64,
    pub y: Vec<f64>,
    pub y_dot: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

/// Saved slave state for rollback.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    time: f64,
    x: Vec<f64>,
    inputs: PolyInput,
    input_origin: f64,
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Interactions a master can have with a co-simulated system.
pub trait Slave: Send {
    fn name(&self) -> &str;
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn n_st(&self) -> usize;
    fn capabilities(&self) -> Capabilities;
    fn current_time(&self) -> f64;

    /// `fmi2SetReal` / `fmi2SetRealInputDerivatives`. Coefficients are on the
    /// local frame of the next step.
    fn set_inputs(&mut self, u: PolyInput) -> Result<()>;

    /// `fmi2DoStep` over `[current_time, current_time + dt)`.
    fn do_step(&mut self, dt: f64) -> Result<StepRecord>;

    /// `fmi2GetReal`: outputs at the current time with the current inputs.
    fn outputs(&self) -> Vec<f64>;

    /// Input values currently applied, i.e. the active input polynomial
    /// evaluated at the current time.
    fn current_inputs(&self) -> Vec<f64>;

    /// States and state derivatives at the current time.
    fn states(&self) -> Result<(Vec<f64>, Vec<f64>)>;

    /// `fmi2GetDirectionalDerivative`: Jacobians at the current time, state
    /// and input value.
    fn linearization(&self) -> Result<Linearization>;

    /// `fmi2GetFMUstate`.
    fn save_state(&self) -> Result<Snapshot>;

    /// `fmi2SetFMUstate`.
    fn restore_state(&mut self, snapshot: &Snapshot) -> Result<()>;
}

/// Right-hand side, output function and analytic Jacobians of an ODE system
///
/// ```text
/// ẋ = f(t, x, u)
/// y = g(t, x, u)
/// ```
pub trait OdeModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn n_states(&self) -> usize;
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn initial_state(&self) -> Vec<f64>;
    fn derivatives(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]);
    fn outputs(&self, t: f64, x: &[f64], u: &[f64], y: &mut [f64]);
    fn linearize(&self, t: f64, x: &[f64], u: &[f64]) -> Linearization;

    /// Output time derivatives given `ẋ` and `u̇`. The default chains the
    /// Jacobians, which is exact for time-invariant output functions.
    fn output_derivatives(&self, t: f64, x: &[f64], u: &[f64], dx: &[f64], du: &[f64]) -> Vec<f64> {
        let lin = self.linearize(t, x, u);
        let cx = lin.c.matvec(dx).expect("model Jacobian dimensions");
        let du = lin.d.matvec(du).expect("model Jacobian dimensions");
        cx.iter().zip(du).map(|(a, b)| a + b).collect()
    }
}

/// Slave backed by an [`OdeModel`] and a fixed-step RK4 micro-integrator.
#[derive(Debug, Clone)]
pub struct OdeSlave {
    model: Arc<dyn OdeModel>,
    caps: Capabilities,
    micro_steps: usize,
    time: f64,
    x: Vec<f64>,
    inputs: PolyInput,
    input_origin: f64,
}

impl OdeSlave {
    /// Creates a slave at `t0` holding `initial_inputs` constant until the
    /// first `set_inputs`.
    pub fn new(model: Arc<dyn OdeModel>, t0: f64, initial_inputs: &[f64]) -> Result<Self> {
        if initial_inputs.len() != model.n_inputs() {
            return Err(Error::ChannelCountMismatch {
                expected: model.n_inputs(),
                actual: initial_inputs.len(),
            });
        }
        let x = model.initial_state();
        if x.len() != model.n_states() {
            return Err(Error::dims(
                "OdeSlave::new initial state",
                model.n_states(),
                x.len(),
            ));
        }
        Ok(Self {
            model,
            caps: Capabilities::ALL,
            micro_steps: MICRO_STEPS,
            time: t0,
            x,
            inputs: PolyInput::constant(initial_inputs),
            input_origin: t0,
        })
    }

    pub fn with_capabilities(mut self, caps: Capabilities) -> Self {
        self.caps = caps;
        self
    }

    pub fn with_micro_steps(mut self, micro_steps: usize) -> Self {
        self.micro_steps = micro_steps.max(1);
        self
    }

    pub fn model(&self) -> &Arc<dyn OdeModel> {
        &self.model
    }

    fn require(&self, cap: Capability) -> Result<()> {
        if self.caps.has(cap) {
            Ok(())
        } else {
            Err(Error::CapabilityMissing {
                slave: self.model.name().to_string(),
                capability: cap,
            })
        }
    }

    fn local_time(&self) -> f64 {
        self.time - self.input_origin
    }
}

impl Slave for OdeSlave {
    fn name(&self) -> &str {
        self.model.name()
    }

    fn n_in(&self) -> usize {
        self.model.n_inputs()
    }

    fn n_out(&self) -> usize {
        self.model.n_outputs()
    }

    fn n_st(&self) -> usize {
        self.model.n_states()
    }

    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn current_time(&self) -> f64 {
        self.time
    }

    fn set_inputs(&mut self, u: PolyInput) -> Result<()> {
        if u.channels() != self.n_in() {
            return Err(Error::ChannelCountMismatch {
                expected: self.n_in(),
                actual: u.channels(),
            });
        }
        if u.frame() != Frame::Local {
            return Err(Error::WrongFrame);
        }
        let non_constant = (0..u.channels()).any(|j| u.channel(j)[1..].iter().any(|c| *c != 0.0));
        if non_constant {
            self.require(Capability::PolynomialInputs)?;
        }
        self.inputs = u;
        self.input_origin = self.time;
        Ok(())
    }

    fn do_step(&mut self, dt: f64) -> Result<StepRecord> {
        if !(dt >= MIN_STEP) || !dt.is_finite() {
            return Err(Error::NonPositiveStep(dt));
        }
        let n = self.n_st();
        let t_start = self.time;
        let tau0 = self.local_time();
        let h = dt / self.micro_steps as f64;
        let model = &*self.model;
        let inputs = &self.inputs;

        let mut u = vec![0.0; self.n_in()];
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let x = &mut self.x;

        for i in 0..self.micro_steps {
            let tau = tau0 + i as f64 * h;
            let t = t_start + i as f64 * h;

            inputs.values_into(tau, &mut u);
            model.derivatives(t, x, &u, &mut k1);

            inputs.values_into(tau + 0.5 * h, &mut u);
            for j in 0..n {
                tmp[j] = x[j] + 0.5 * h * k1[j];
            }
            model.derivatives(t + 0.5 * h, &tmp, &u, &mut k2);
            for j in 0..n {
                tmp[j] = x[j] + 0.5 * h * k2[j];
            }
            model.derivatives(t + 0.5 * h, &tmp, &u, &mut k3);

            inputs.values_into(tau + h, &mut u);
            for j in 0..n {
                tmp[j] = x[j] + h * k3[j];
            }
            model.derivatives(t + h, &tmp, &u, &mut k4);

            for j in 0..n {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }

        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::SolverDiverged {
                slave: self.model.name().to_string(),
                time: t_start,
            });
        }

        let t_end = t_start + dt;
        self.time = t_end;
        let tau_end = tau0 + dt;
        let u_end = inputs.values(tau_end);
        let mut f = vec![0.0; n];
        model.derivatives(t_end, x, &u_end, &mut f);
        let mut y = vec![0.0; self.model.n_outputs()];
        model.outputs(t_end, x, &u_end, &mut y);
        let y_dot = self.caps.output_derivatives.then(|| {
            let du = inputs.derivatives(tau_end);
            model.output_derivatives(t_end, x, &u_end, &f, &du)
        });

        Ok(StepRecord {
            t_end,
            y,
            y_dot,
            x: x.clone(),
            f,
        })
    }

    fn outputs(&self) -> Vec<f64> {
        let u = self.current_inputs();
        let mut y = vec![0.0; self.n_out()];
        self.model.outputs(self.time, &self.x, &u, &mut y);
        y
    }

    fn current_inputs(&self) -> Vec<f64> {
        self.inputs.values(self.local_time())
    }

    fn states(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require(Capability::StateAccess)?;
        let u = self.current_inputs();
        let mut f = vec![0.0; self.n_st()];
        self.model.derivatives(self.time, &self.x, &u, &mut f);
        Ok((self.x.clone(), f))
    }

    fn linearization(&self) -> Result<Linearization> {
        self.require(Capability::Linearization)?;
        let u = self.current_inputs();
        Ok(self.model.linearize(self.time, &self.x, &u))
    }

    fn save_state(&self) -> Result<Snapshot> {
        self.require(Capability::Rollback)?;
        Ok(Snapshot {
            time: self.time,
            x: self.x.clone(),
            inputs: self.inputs.clone(),
            input_origin: self.input_origin,
        })
    }

    fn restore_state(&mut self, snapshot: &Snapshot) -> Result<()> {
        self.require(Capability::Rollback)?;
        if snapshot.x.len() != self.n_st() {
            return Err(Error::dims("restore_state", self.n_st(), snapshot.x.len()));
        }
        self.time = snapshot.time;
        self.x.clone_from(&snapshot.x);
        self.inputs = snapshot.inputs.clone();
        self.input_origin = snapshot.input_origin;
        Ok(())
    }
}
