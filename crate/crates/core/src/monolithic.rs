//! Reference solution: all systems integrated together as one ODE with the
//! connections substituted.

use std::sync::Arc;

use crate::error::Result;
use crate::models::ModularModel;
use crate::ode::{integrate, Tolerances};
use crate::slave::OdeModel;
use crate::topology::Topology;
use crate::trajectory::{TimeGrid, Trajectory};

/// The coupled system `ẋ_k = f_k(x_k, u_k)` with `u = Φᵀ·y` and
/// `y_k = g_k(x_k, u_k)`.
#[derive(Debug, Clone)]
pub struct CoupledOde {
    systems: Vec<Arc<dyn OdeModel>>,
    topo: Topology,
}

impl CoupledOde {
    pub fn new(model: &ModularModel) -> Self {
        Self {
            systems: model.systems.clone(),
            topo: model.topology.clone(),
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.systems
            .iter()
            .flat_map(|s| s.initial_state())
            .collect()
    }

    /// Resolves the output/input loop by repeated substitution. Each pass
    /// propagates direct feedthrough one system further, so `n_sys + 1`
    /// passes settle any loop-free feedthrough chain.
    pub fn outputs_and_inputs(&self, t: f64, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; self.topo.n_out_tot()];
        let mut u = vec![0.0; self.topo.n_in_tot()];
        for _ in 0..=self.topo.n_sys() {
            for (k, sys) in self.systems.iter().enumerate() {
                sys.outputs(
                    t,
                    &x[self.topo.states_of(k)],
                    &u[self.topo.inputs_of(k)],
                    &mut y[self.topo.outputs_of(k)],
                );
            }
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = y[self.topo.driver(i)];
            }
        }
        (y, u)
    }

    pub fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let (_, u) = self.outputs_and_inputs(t, x);
        for (k, sys) in self.systems.iter().enumerate() {
            sys.derivatives(
                t,
                &x[self.topo.states_of(k)],
                &u[self.topo.inputs_of(k)],
                &mut dx[self.topo.states_of(k)],
            );
        }
    }
}

/// Integrates the coupled model with tolerance `1e-10` and samples outputs
/// and states at every grid time.
pub fn monolithic_run(model: &ModularModel, grid: &TimeGrid) -> Result<Trajectory> {
    let ode = CoupledOde::new(model);
    let sizes: Vec<_> = model
        .systems
        .iter()
        .map(|s| (s.n_outputs(), s.n_states()))
        .collect();
    let mut traj = Trajectory::new(Trajectory::column_names(&sizes, true));
    let times: Vec<f64> = grid.times().collect();
    let topo = &model.topology;
    let mut row = Vec::with_capacity(traj.columns().len());
    integrate(
        |t, x, dx| ode.derivatives(t, x, dx),
        &ode.initial_state(),
        &times,
        Tolerances::default(),
        |t, x| {
            let (y, _) = ode.outputs_and_inputs(t, x);
            row.clear();
            for k in 0..topo.n_sys() {
                row.extend_from_slice(&y[topo.outputs_of(k)]);
                row.extend_from_slice(&x[topo.states_of(k)]);
            }
            traj.push(t, &row)
        },
    )?;
    traj.stats.steps = grid.n_steps();
    Ok(traj)
}
