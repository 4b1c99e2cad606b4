//! Iterative master enforcing the C¹ coupling constraint with a
//! jacobian-free Newton-Krylov solver over rolled-back integrations.
//!
//! The unknown is `w = (ŷ, ŷ̇)`, the stacked end-of-step outputs and output
//! derivatives. For a candidate `w`, every slave is rolled back to the step
//! start, driven by cubic Hermite inputs ending on `diag(Φᵀ, Φᵀ)·w` and
//! integrated; the residual is `η(w) = w - (ỹ, ỹ̇)`.

use crate::error::{Capability, Error, Result};
use crate::exec::{map_slaves, Execution};
use crate::krylov::gmres;
use crate::linalg::norm_inf;
use crate::master::{
    check_wiring, require_all, run_master, stacked_inputs, stacked_outputs, Master,
};
use crate::poly::{
    hermite_elems_first_step, hermite_elems_local, Frame, HermiteElems, PolyInput, N_COEFFS,
};
use crate::slave::{Slave, Snapshot, StepRecord};
use crate::topology::Topology;
use crate::trajectory::{RunStats, TimeGrid, Trajectory};

/// Default cap on Newton iterations per step.
pub const MAX_NEWTON_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JfmConfig {
    /// Convergence threshold: `‖η‖∞ ≤ ε·(1 + ‖w‖∞)`.
    pub epsilon: f64,
    pub max_newton_iterations: usize,
    /// Relative residual target of the inner GMRES solve.
    pub krylov_tolerance: f64,
    pub execution: Execution,
}

impl JfmConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

impl Default for JfmConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_newton_iterations: MAX_NEWTON_ITERATIONS,
            krylov_tolerance: 1e-10,
            execution: Execution::Sequential,
        }
    }
}

pub struct JfmMaster {
    slaves: Vec<Box<dyn Slave>>,
    topo: Topology,
    cfg: JfmConfig,
    start: Vec<f64>,
    start_dot: Option<Vec<f64>>,
    guess: Vec<f64>,
    stats: RunStats,
}

impl JfmMaster {
    pub fn new(slaves: Vec<Box<dyn Slave>>, topo: Topology, cfg: JfmConfig) -> Result<Self> {
        check_wiring(&slaves, &topo)?;
        require_all(
            &slaves,
            &[
                Capability::Rollback,
                Capability::OutputDerivatives,
                Capability::PolynomialInputs,
            ],
        )?;
        let start = stacked_inputs(&slaves);
        let mut guess = stacked_outputs(&slaves);
        guess.resize(2 * topo.n_out_tot(), 0.0);
        Ok(Self {
            slaves,
            topo,
            cfg,
            start,
            start_dot: None,
            guess,
            stats: RunStats::default(),
        })
    }

    fn hermite_elems(&self, dt: f64) -> Result<Vec<HermiteElems>> {
        match &self.start_dot {
            None => self
                .start
                .iter()
                .map(|&v| hermite_elems_first_step(dt, v))
                .collect(),
            Some(d) => self
                .start
                .iter()
                .zip(d)
                .map(|(&v, &dv)| hermite_elems_local(dt, v, dv))
                .collect(),
        }
    }

    /// Rolls back, integrates with inputs built from `w` and returns `η(w)`.
    fn residual(
        &mut self,
        w: &[f64],
        snapshots: &[Snapshot],
        hermite: &[HermiteElems],
        dt: f64,
    ) -> Result<(Vec<f64>, Vec<StepRecord>)> {
        let n_out = self.topo.n_out_tot();
        let (u, u_dot) = self.topo.dispatch(&w[..n_out], &w[n_out..])?;
        let coeffs: Vec<[f64; N_COEFFS]> = hermite
            .iter()
            .enumerate()
            .map(|(j, h)| h.coefficients(u[j], u_dot[j]))
            .collect();
        let topo = &self.topo;
        let records = map_slaves(&mut self.slaves, self.cfg.execution, |k, s| {
            s.restore_state(&snapshots[k])?;
            s.set_inputs(PolyInput::from_channels(
                &coeffs[topo.inputs_of(k)],
                Frame::Local,
            ))?;
            s.do_step(dt)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        self.stats.integrations += self.slaves.len();

        let mut eta = w.to_vec();
        let mut row = 0;
        for (k, r) in records.iter().enumerate() {
            let y_dot = r.y_dot.as_ref().ok_or_else(|| Error::CapabilityMissing {
                slave: self.slaves[k].name().to_string(),
                capability: Capability::OutputDerivatives,
            })?;
            for (i, (y, yd)) in r.y.iter().zip(y_dot).enumerate() {
                eta[row + i] -= y;
                eta[n_out + row + i] -= yd;
            }
            row += r.y.len();
        }
        Ok((eta, records))
    }
}

impl Master for JfmMaster {
    fn slaves(&self) -> &[Box<dyn Slave>] {
        &self.slaves
    }

    fn advance(&mut self, dt: f64) -> Result<Vec<StepRecord>> {
        let snapshots: Vec<Snapshot> = self
            .slaves
            .iter()
            .map(|s| s.save_state())
            .collect::<Result<_>>()?;
        let hermite = self.hermite_elems(dt)?;
        let mut w = self.guess.clone();

        for iter in 0..=self.cfg.max_newton_iterations {
            let (eta, records) = self.residual(&w, &snapshots, &hermite, dt)?;
            let w_norm = norm_inf(&w);
            let eta_norm = norm_inf(&eta);
            if !eta_norm.is_finite() {
                return Err(Error::NoConvergence {
                    max_iters: iter,
                    residual: eta_norm,
                });
            }
            if eta_norm <= self.cfg.epsilon * (1.0 + w_norm) {
                // The last residual evaluation integrated the slaves with the
                // accepted constraints: it is the validated step.
                let n_out = self.topo.n_out_tot();
                let (u, u_dot) = self.topo.dispatch(&w[..n_out], &w[n_out..])?;
                self.start = u;
                self.start_dot = Some(u_dot);
                self.guess = w;
                self.stats.steps += 1;
                self.stats.newton_iterations += iter;
                return Ok(records);
            }
            if iter == self.cfg.max_newton_iterations {
                return Err(Error::NoConvergence {
                    max_iters: iter,
                    residual: eta_norm,
                });
            }

            let h = 1e-7 * (1.0 + w_norm);
            let neg_eta: Vec<f64> = eta.iter().map(|v| -v).collect();
            let dim = w.len();
            let tol = self.cfg.krylov_tolerance;
            let step = gmres(
                |v| {
                    let probe: Vec<f64> = w.iter().zip(v).map(|(a, b)| a + h * b).collect();
                    let (eta_p, _) = self.residual(&probe, &snapshots, &hermite, dt)?;
                    Ok(eta_p.iter().zip(&eta).map(|(a, b)| (a - b) / h).collect())
                },
                &neg_eta,
                tol,
                dim,
            )?;
            for (wi, di) in w.iter_mut().zip(&step.x) {
                *wi += di;
            }
        }
        unreachable!("the loop returns on its last iteration")
    }

    fn stats(&self) -> RunStats {
        self.stats.clone()
    }
}

pub fn ifosmondi_jfm_run(
    slaves: Vec<Box<dyn Slave>>,
    topo: &Topology,
    grid: &TimeGrid,
    cfg: JfmConfig,
) -> Result<Trajectory> {
    let mut master = JfmMaster::new(slaves, topo.clone(), cfg)?;
    run_master(&mut master, grid)
}
