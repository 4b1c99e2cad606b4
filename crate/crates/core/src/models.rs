//! Built-in benchmark systems: a two-body spring/damper chain split into two
//! slaves, and Lotka-Volterra with prey and predator in separate slaves.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::slave::{Capabilities, Linearization, OdeModel, OdeSlave, Slave};
use crate::topology::{PortLink, SystemSizes, Topology};

/// Two-body mechanical chain parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMassParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub m1: f64,
    pub m2: f64,
    /// Left body position and velocity at `t = 0`.
    pub left_init: [f64; 2],
    /// Right body position and velocity at `t = 0`.
    pub right_init: [f64; 2],
}

impl Default for TwoMassParams {
    fn default() -> Self {
        Self {
            d1: 10.0,
            d2: 10.0,
            d3: 40.0,
            c1: 10_000.0,
            c2: 10_000.0,
            c3: 100_000.0,
            m1: 5.0,
            m2: 80.0,
            left_init: [-1.0, 0.0],
            right_init: [-3.0, 0.0],
        }
    }
}

/// Left body: states `(x1, v1)`, input the coupling force `F`, outputs
/// `(v1, x1)`.
///
/// `m1·v̇1 = -c1·x1 - d1·v1 + F`
#[derive(Debug, Clone)]
pub struct LeftBody {
    pub p: TwoMassParams,
}

impl OdeModel for LeftBody {
    fn name(&self) -> &str {
        "left body"
    }

    fn n_states(&self) -> usize {
        2
    }

    fn n_inputs(&self) -> usize {
        1
    }

    fn n_outputs(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<f64> {
        self.p.left_init.to_vec()
    }

    fn derivatives(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let p = &self.p;
        dx[0] = x[1];
        dx[1] = (-p.c1 * x[0] - p.d1 * x[1] + u[0]) / p.m1;
    }

    fn outputs(&self, _t: f64, x: &[f64], _u: &[f64], y: &mut [f64]) {
        y[0] = x[1];
        y[1] = x[0];
    }

    fn linearize(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Linearization {
        let p = &self.p;
        Linearization {
            a: DenseMatrix::from_rows(&[[0.0, 1.0], [-p.c1 / p.m1, -p.d1 / p.m1]]),
            b: DenseMatrix::from_rows(&[[0.0], [1.0 / p.m1]]),
            c: DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]),
            d: DenseMatrix::zeros(2, 1),
        }
    }
}

/// Right body: states `(x2, v2)`, inputs `(v1, x1)`, output the force
/// exerted on the left body `F = c2·(x2 - x1) + d2·(v2 - v1)`.
///
/// `m2·v̇2 = -c2·(x2 - x1) - d2·(v2 - v1) - c3·x2 - d3·v2`
#[derive(Debug, Clone)]
pub struct RightBody {
    pub p: TwoMassParams,
}

impl OdeModel for RightBody {
    fn name(&self) -> &str {
        "right body"
    }

    fn n_states(&self) -> usize {
        2
    }

    fn n_inputs(&self) -> usize {
        2
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        self.p.right_init.to_vec()
    }

    fn derivatives(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let p = &self.p;
        let (v1, x1) = (u[0], u[1]);
        dx[0] = x[1];
        dx[1] = (-p.c2 * (x[0] - x1) - p.d2 * (x[1] - v1) - p.c3 * x[0] - p.d3 * x[1]) / p.m2;
    }

    fn outputs(&self, _t: f64, x: &[f64], u: &[f64], y: &mut [f64]) {
        let p = &self.p;
        y[0] = p.c2 * (x[0] - u[1]) + p.d2 * (x[1] - u[0]);
    }

    fn linearize(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Linearization {
        let p = &self.p;
        Linearization {
            a: DenseMatrix::from_rows(&[
                [0.0, 1.0],
                [-(p.c2 + p.c3) / p.m2, -(p.d2 + p.d3) / p.m2],
            ]),
            b: DenseMatrix::from_rows(&[[0.0, 0.0], [p.d2 / p.m2, p.c2 / p.m2]]),
            c: DenseMatrix::from_rows(&[[p.c2, p.d2]]),
            d: DenseMatrix::from_rows(&[[-p.d2, -p.c2]]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotkaVolterraParams {
    /// Prey birth rate.
    pub alpha: f64,
    /// Predation rate.
    pub beta: f64,
    /// Predator death rate.
    pub gamma: f64,
    /// Predator growth per prey.
    pub delta: f64,
    pub prey_init: f64,
    pub predator_init: f64,
}

impl Default for LotkaVolterraParams {
    fn default() -> Self {
        Self {
            alpha: 2.0 / 3.0,
            beta: 4.0 / 3.0,
            gamma: 1.0,
            delta: 1.0,
            prey_init: 1.0,
            predator_init: 1.0,
        }
    }
}

impl LotkaVolterraParams {
    /// First integral `δ·x1 - γ·ln x1 + β·x2 - α·ln x2`, constant along exact
    /// trajectories.
    pub fn first_integral(&self, prey: f64, predator: f64) -> f64 {
        self.delta * prey - self.gamma * prey.ln() + self.beta * predator
            - self.alpha * predator.ln()
    }
}

/// Prey: `ẋ = α·x - β·x·u` with `u` the predator amount. Output `x`.
#[derive(Debug, Clone)]
pub struct Prey {
    pub p: LotkaVolterraParams,
}

impl OdeModel for Prey {
    fn name(&self) -> &str {
        "prey"
    }

    fn n_states(&self) -> usize {
        1
    }

    fn n_inputs(&self) -> usize {
        1
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.p.prey_init]
    }

    fn derivatives(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = self.p.alpha * x[0] - self.p.beta * x[0] * u[0];
    }

    fn outputs(&self, _t: f64, x: &[f64], _u: &[f64], y: &mut [f64]) {
        y[0] = x[0];
    }

    fn linearize(&self, _t: f64, x: &[f64], u: &[f64]) -> Linearization {
        let p = &self.p;
        Linearization {
            a: DenseMatrix::from_rows(&[[p.alpha - p.beta * u[0]]]),
            b: DenseMatrix::from_rows(&[[-p.beta * x[0]]]),
            c: DenseMatrix::identity(1),
            d: DenseMatrix::zeros(1, 1),
        }
    }
}

/// Predator: `ẋ = δ·u·x - γ·x` with `u` the prey amount. Output `x`.
#[derive(Debug, Clone)]
pub struct Predator {
    pub p: LotkaVolterraParams,
}

impl OdeModel for Predator {
    fn name(&self) -> &str {
        "predator"
    }

    fn n_states(&self) -> usize {
        1
    }

    fn n_inputs(&self) -> usize {
        1
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.p.predator_init]
    }

    fn derivatives(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = self.p.delta * u[0] * x[0] - self.p.gamma * x[0];
    }

    fn outputs(&self, _t: f64, x: &[f64], _u: &[f64], y: &mut [f64]) {
        y[0] = x[0];
    }

    fn linearize(&self, _t: f64, x: &[f64], u: &[f64]) -> Linearization {
        let p = &self.p;
        Linearization {
            a: DenseMatrix::from_rows(&[[p.delta * u[0] - p.gamma]]),
            b: DenseMatrix::from_rows(&[[p.delta * x[0]]]),
            c: DenseMatrix::identity(1),
            d: DenseMatrix::zeros(1, 1),
        }
    }
}

/// Benchmark identifiers accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    TwoMass,
    LotkaVolterra,
}

impl ModelId {
    pub fn build(self) -> ModularModel {
        match self {
            ModelId::TwoMass => make_two_mass(),
            ModelId::LotkaVolterra => make_lotka_volterra(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::TwoMass => "two-mass",
            ModelId::LotkaVolterra => "lotka-volterra",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-mass" => Ok(ModelId::TwoMass),
            "lotka-volterra" => Ok(ModelId::LotkaVolterra),
            other => Err(format!(
                "unknown model `{other}` (expected two-mass or lotka-volterra)"
            )),
        }
    }
}

/// Interconnected systems with their wiring and initial coupling values.
#[derive(Debug, Clone)]
pub struct ModularModel {
    pub systems: Vec<Arc<dyn OdeModel>>,
    pub topology: Topology,
    /// Value of every input at `t_init`, in total-input order.
    pub initial_coupling: Vec<f64>,
    pub t_init: f64,
    /// Default end time of the benchmark.
    pub t_end: f64,
    /// Trajectory column compared against the reference, e.g. `s1.y2`.
    pub metric_column: String,
}

impl ModularModel {
    pub fn new(
        systems: Vec<Arc<dyn OdeModel>>,
        connections: &[PortLink],
        initial_coupling: Vec<f64>,
    ) -> Result<Self> {
        let sizes = systems
            .iter()
            .map(|s| SystemSizes {
                n_in: s.n_inputs(),
                n_out: s.n_outputs(),
                n_st: s.n_states(),
            })
            .collect();
        let topology = Topology::from_ports(sizes, connections)?;
        if initial_coupling.len() != topology.n_in_tot() {
            return Err(crate::error::Error::ChannelCountMismatch {
                expected: topology.n_in_tot(),
                actual: initial_coupling.len(),
            });
        }
        Ok(Self {
            systems,
            topology,
            initial_coupling,
            t_init: 0.0,
            t_end: 1.0,
            metric_column: "s1.y1".to_string(),
        })
    }

    /// Fresh slaves at `t_init` with every capability enabled.
    pub fn slaves(&self) -> Vec<Box<dyn Slave>> {
        self.slaves_with(Capabilities::ALL)
    }

    pub fn slaves_with(&self, caps: Capabilities) -> Vec<Box<dyn Slave>> {
        self.systems
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let u0 = &self.initial_coupling[self.topology.inputs_of(k)];
                let slave = OdeSlave::new(Arc::clone(m), self.t_init, u0)
                    .expect("model dimensions validated at construction")
                    .with_capabilities(caps);
                Box::new(slave) as Box<dyn Slave>
            })
            .collect()
    }
}

/// Two bodies linked by the `c2`/`d2` spring-damper, each tied to a wall.
/// Outputs are ordered `(v1, x1, F)` and inputs `(F, v1, x1)`.
pub fn make_two_mass() -> ModularModel {
    make_two_mass_with(TwoMassParams::default())
}

pub fn make_two_mass_with(p: TwoMassParams) -> ModularModel {
    let left: Arc<dyn OdeModel> = Arc::new(LeftBody { p });
    let right: Arc<dyn OdeModel> = Arc::new(RightBody { p });
    let force =
        p.c2 * (p.right_init[0] - p.left_init[0]) + p.d2 * (p.right_init[1] - p.left_init[1]);
    let mut model = ModularModel::new(
        vec![left, right],
        &[((1, 0), (0, 0)), ((0, 0), (1, 0)), ((0, 1), (1, 1))],
        vec![force, p.left_init[1], p.left_init[0]],
    )
    .expect("static wiring is valid");
    model.t_end = 2.0;
    model.metric_column = "s1.y2".to_string();
    model
}

pub fn make_lotka_volterra() -> ModularModel {
    make_lotka_volterra_with(LotkaVolterraParams::default())
}

pub fn make_lotka_volterra_with(p: LotkaVolterraParams) -> ModularModel {
    let prey: Arc<dyn OdeModel> = Arc::new(Prey { p });
    let predator: Arc<dyn OdeModel> = Arc::new(Predator { p });
    let mut model = ModularModel::new(
        vec![prey, predator],
        &[((1, 0), (0, 0)), ((0, 0), (1, 0))],
        vec![p.predator_init, p.prey_init],
    )
    .expect("static wiring is valid");
    model.t_end = 20.0;
    model.metric_column = "s1.y1".to_string();
    model
}
