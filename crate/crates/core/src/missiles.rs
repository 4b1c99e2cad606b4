//! Non-iterative coupling through a global linear solve over the slaves'
//! linear-response estimates.
//!
//! Each step, every slave is replaced by its linear-response operators and
//! every input by a cubic Hermite polynomial whose end constraints
//! `(û, û̇)` are unknown. Requiring the estimated outputs to reproduce the
//! end constraints through the wiring yields one square linear system in the
//! stacked end-of-step outputs and output derivatives `w = (ŷ, ŷ̇)`:
//!
//! ```text
//! (I - G·𝒜·diag(Φᵀ, Φᵀ))·w = G·ℬ + P·x̃ + R·f̃_C + y_C
//! ```
//!
//! The solved constraints define the inputs actually fed to the slaves, and
//! become the start constraints of the next step, which keeps the inputs C¹.

use crate::costarica::{CostaricaOps, StehfestScheme};
use crate::error::{Capability, Error, Result};
use crate::exec::{map_slaves, Execution};
use crate::linalg::{norm_inf, DenseMatrix, LuFactors, Tensor3};
use crate::master::{check_wiring, require_all, run_master, stacked_inputs, Master};
use crate::poly::{
    hermite_elems_first_step, hermite_elems_local, HermiteElems, PolyInput, N_COEFFS,
};
use crate::slave::{Slave, StepRecord};
use crate::topology::Topology;
use crate::trajectory::{RunStats, TimeGrid, Trajectory};

/// Block-diagonal stacking of every slave's operators and every input's
/// Hermite maps.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOps {
    /// `2·n_out × n_in × N_COEFFS`: value rows then derivative rows.
    pub g: Tensor3,
    /// `2·n_out × n_st`.
    pub p: DenseMatrix,
    pub r: DenseMatrix,
    /// `n_in × N_COEFFS × 2·n_in`: coefficient of each end constraint
    /// (values first, then derivatives) in each input coefficient.
    pub a: Tensor3,
    /// `n_in × N_COEFFS`: constraint-free part of each input coefficient.
    pub b: DenseMatrix,
    pub f_c: Vec<f64>,
    pub y_c_stack: Vec<f64>,
    pub x_stack: Vec<f64>,
}

pub fn assemble_global(
    ops: &[CostaricaOps],
    hermite: &[HermiteElems],
    topo: &Topology,
) -> Result<GlobalOps> {
    if ops.len() != topo.n_sys() {
        return Err(Error::dims(
            "assemble_global (systems)",
            topo.n_sys(),
            ops.len(),
        ));
    }
    let (n_in, n_out, n_st) = (topo.n_in_tot(), topo.n_out_tot(), topo.n_st_tot());
    if hermite.len() != n_in {
        return Err(Error::dims(
            "assemble_global (Hermite channels)",
            n_in,
            hermite.len(),
        ));
    }

    let mut g = Tensor3::zeros(2 * n_out, n_in, N_COEFFS);
    let mut p = DenseMatrix::zeros(2 * n_out, n_st);
    let mut r = DenseMatrix::zeros(2 * n_out, n_st);
    let mut f_c = vec![0.0; n_st];
    let mut y_c_stack = vec![0.0; 2 * n_out];
    let mut x_stack = vec![0.0; n_st];

    for (k, o) in ops.iter().enumerate() {
        let (outs, ins, sts) = (topo.outputs_of(k), topo.inputs_of(k), topo.states_of(k));
        if o.n_out() != outs.len() || o.n_in() != ins.len() || o.n_st() != sts.len() {
            return Err(Error::dims(
                "assemble_global (system block)",
                outs.len(),
                o.n_out(),
            ));
        }
        for (i, row) in outs.clone().enumerate() {
            for (j, col) in ins.clone().enumerate() {
                g.fiber_mut(row, col).copy_from_slice(o.g_v.fiber(i, j));
                g.fiber_mut(n_out + row, col)
                    .copy_from_slice(o.g_d.fiber(i, j));
            }
            for (s, st) in sts.clone().enumerate() {
                p[(row, st)] = o.p_v[(i, s)];
                p[(n_out + row, st)] = o.p_d[(i, s)];
                r[(row, st)] = o.r_v[(i, s)];
                r[(n_out + row, st)] = o.r_d[(i, s)];
            }
            y_c_stack[row] = o.y_c[i];
            y_c_stack[n_out + row] = o.y_dot_c[i];
        }
        f_c[sts.clone()].copy_from_slice(&o.f_c);
        x_stack[sts].copy_from_slice(&o.x_tilde);
    }

    let mut a = Tensor3::zeros(n_in, N_COEFFS, 2 * n_in);
    let mut b = DenseMatrix::zeros(n_in, N_COEFFS);
    for (j, h) in hermite.iter().enumerate() {
        for q in 0..N_COEFFS {
            a[(j, q, j)] = h.av[q];
            a[(j, q, n_in + j)] = h.ad[q];
            b[(j, q)] = h.b[q];
        }
    }

    Ok(GlobalOps {
        g,
        p,
        r,
        a,
        b,
        f_c,
        y_c_stack,
        x_stack,
    })
}

/// Square linear problem `m·w = rhs` in the stacked end-of-step outputs and
/// output derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MissilesProblem {
    pub m: DenseMatrix,
    pub rhs: Vec<f64>,
}

impl MissilesProblem {
    /// Reciprocal 1-norm condition number of `m`.
    pub fn rcond_estimate(&self) -> Result<f64> {
        Ok(LuFactors::factor(&self.m)?.rcond())
    }

    /// `‖m·w - rhs‖∞ / (1 + ‖rhs‖∞)`.
    pub fn scaled_residual(&self, w: &[f64]) -> Result<f64> {
        let mw = self.m.matvec(w)?;
        let res: Vec<f64> = mw.iter().zip(&self.rhs).map(|(a, b)| a - b).collect();
        Ok(norm_inf(&res) / (1.0 + norm_inf(&self.rhs)))
    }
}

pub fn assemble_missiles(glob: &GlobalOps, topo: &Topology) -> Result<MissilesProblem> {
    let (n_in, n_out) = (topo.n_in_tot(), topo.n_out_tot());
    let (rows, g_in, g_deg) = glob.g.dims();
    if rows != 2 * n_out || g_in != n_in || g_deg != N_COEFFS {
        return Err(Error::dims("assemble_missiles (G)", 2 * n_out, rows));
    }
    if glob.a.dims() != (n_in, N_COEFFS, 2 * n_in) {
        return Err(Error::dims(
            "assemble_missiles (A)",
            2 * n_in,
            glob.a.dims().2,
        ));
    }

    let dim = 2 * n_out;
    let mut m = DenseMatrix::identity(dim);
    let mut ga = vec![0.0; 2 * n_in];
    let mut rhs = glob.p.matvec(&glob.x_stack)?;
    let rf = glob.r.matvec(&glob.f_c)?;

    for row in 0..dim {
        // G·𝒜 for this row, over constraint columns.
        ga.iter_mut().for_each(|v| *v = 0.0);
        let mut gb = 0.0;
        for j in 0..n_in {
            let gf = glob.g.fiber(row, j);
            if gf.iter().all(|v| *v == 0.0) {
                continue;
            }
            for (q, gq) in gf.iter().enumerate() {
                gb += gq * glob.b[(j, q)];
                for (c, v) in glob.a.fiber(j, q).iter().enumerate() {
                    ga[c] += gq * v;
                }
            }
        }
        // Right-multiplying by diag(Φᵀ, Φᵀ) routes each input column to its
        // driving output.
        for c in 0..n_in {
            let o = topo.driver(c);
            m[(row, o)] -= ga[c];
            m[(row, n_out + o)] -= ga[n_in + c];
        }
        rhs[row] += gb + rf[row] + glob.y_c_stack[row];
    }
    Ok(MissilesProblem { m, rhs })
}

/// Solved end-of-step coupling constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSolution {
    pub y_hat: Vec<f64>,
    pub y_dot_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub u_dot_hat: Vec<f64>,
    /// Scaled residual of the linear solve.
    pub residual: f64,
}

pub fn solve_missiles(prob: &MissilesProblem, topo: &Topology) -> Result<CouplingSolution> {
    let n_out = topo.n_out_tot();
    let w = LuFactors::factor(&prob.m)?.solve(&prob.rhs)?;
    let residual = prob.scaled_residual(&w)?;
    let (y_hat, y_dot_hat) = (w[..n_out].to_vec(), w[n_out..].to_vec());
    let (u_hat, u_dot_hat) = topo.dispatch(&y_hat, &y_dot_hat)?;
    Ok(CouplingSolution {
        y_hat,
        y_dot_hat,
        u_hat,
        u_dot_hat,
        residual,
    })
}

#[derive(Debug, Clone, Default)]
pub struct MissilesConfig {
    pub stehfest: StehfestScheme,
    /// Scheduling of per-slave operator construction and integration.
    pub execution: Execution,
}

/// Everything computed during one macro-step.
#[derive(Debug, Clone)]
pub struct MissilesStep {
    pub problem: MissilesProblem,
    pub solution: CouplingSolution,
    /// Local-frame input polynomials given to each slave.
    pub inputs: Vec<PolyInput>,
    pub records: Vec<StepRecord>,
}

pub struct MissilesMaster {
    slaves: Vec<Box<dyn Slave>>,
    topo: Topology,
    cfg: MissilesConfig,
    start: Vec<f64>,
    /// `None` until the first step has produced end derivatives.
    start_dot: Option<Vec<f64>>,
    stats: RunStats,
}

impl MissilesMaster {
    pub fn new(slaves: Vec<Box<dyn Slave>>, topo: Topology, cfg: MissilesConfig) -> Result<Self> {
        check_wiring(&slaves, &topo)?;
        require_all(
            &slaves,
            &[
                Capability::StateAccess,
                Capability::Linearization,
                Capability::PolynomialInputs,
            ],
        )?;
        let start = stacked_inputs(&slaves);
        Ok(Self {
            slaves,
            topo,
            cfg,
            start,
            start_dot: None,
            stats: RunStats::default(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn into_slaves(self) -> Vec<Box<dyn Slave>> {
        self.slaves
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

    pub fn step(&mut self, dt: f64) -> Result<MissilesStep> {
        let scheme = &self.cfg.stehfest;
        let ops: Vec<CostaricaOps> = map_slaves(&mut self.slaves, self.cfg.execution, |_, s| {
            CostaricaOps::from_slave(s, dt, scheme)
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let hermite = self.hermite_elems(dt)?;
        let glob = assemble_global(&ops, &hermite, &self.topo)?;
        let problem = assemble_missiles(&glob, &self.topo)?;
        let solution = solve_missiles(&problem, &self.topo)?;

        let coeffs: Vec<[f64; N_COEFFS]> = hermite
            .iter()
            .enumerate()
            .map(|(j, h)| h.coefficients(solution.u_hat[j], solution.u_dot_hat[j]))
            .collect();
        let inputs: Vec<PolyInput> = (0..self.topo.n_sys())
            .map(|k| {
                PolyInput::from_channels(&coeffs[self.topo.inputs_of(k)], crate::poly::Frame::Local)
            })
            .collect();

        let records = map_slaves(&mut self.slaves, self.cfg.execution, |k, s| {
            s.set_inputs(inputs[k].clone())?;
            s.do_step(dt)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        self.start.clone_from(&solution.u_hat);
        self.start_dot = Some(solution.u_dot_hat.clone());
        self.stats.steps += 1;
        self.stats.integrations += self.slaves.len();
        self.stats.max_solve_residual = self.stats.max_solve_residual.max(solution.residual);

        Ok(MissilesStep {
            problem,
            solution,
            inputs,
            records,
        })
    }
}

impl Master for MissilesMaster {
    fn slaves(&self) -> &[Box<dyn Slave>] {
        &self.slaves
    }

    fn advance(&mut self, dt: f64) -> Result<Vec<StepRecord>> {
        Ok(self.step(dt)?.records)
    }

    fn stats(&self) -> RunStats {
        self.stats.clone()
    }
}

/// Runs the linear-estimator coupling over `grid`.
pub fn missiles_run(
    slaves: Vec<Box<dyn Slave>>,
    topo: &Topology,
    grid: &TimeGrid,
    cfg: MissilesConfig,
) -> Result<Trajectory> {
    let mut master = MissilesMaster::new(slaves, topo.clone(), cfg)?;
    run_master(&mut master, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slave::{Linearization, OdeModel, OdeSlave};
    use crate::topology::SystemSizes;
    use std::sync::Arc;

    /// `ẋ = u`, `y = x`.
    #[derive(Debug)]
    struct Integrator;

    impl OdeModel for Integrator {
        fn name(&self) -> &str {
            "integrator"
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
            vec![1.0]
        }
        fn derivatives(&self, _t: f64, _x: &[f64], u: &[f64], dx: &mut [f64]) {
            dx[0] = u[0];
        }
        fn outputs(&self, _t: f64, x: &[f64], _u: &[f64], y: &mut [f64]) {
            y[0] = x[0];
        }
        fn linearize(&self, _t: f64, _x: &[f64], _u: &[f64]) -> Linearization {
            Linearization {
                a: DenseMatrix::zeros(1, 1),
                b: DenseMatrix::identity(1),
                c: DenseMatrix::identity(1),
                d: DenseMatrix::zeros(1, 1),
            }
        }
    }

    fn self_loop() -> (Vec<Box<dyn Slave>>, Topology) {
        let slave = OdeSlave::new(Arc::new(Integrator), 0.0, &[1.0]).unwrap();
        let topo = Topology::new(
            vec![SystemSizes {
                n_in: 1,
                n_out: 1,
                n_st: 1,
            }],
            &[(0, 0)],
        )
        .unwrap();
        (vec![Box::new(slave)], topo)
    }

    #[test]
    fn self_loop_first_step_tracks_exponential() {
        let (slaves, topo) = self_loop();
        let mut master = MissilesMaster::new(slaves, topo, MissilesConfig::default()).unwrap();
        let step = master.step(0.1).unwrap();
        assert_eq!(step.problem.m.rows(), 2);
        assert!(
            (step.solution.y_hat[0] - 0.1f64.exp()).abs() < 2e-4,
            "{:?}",
            step.solution
        );
        assert!(step.solution.residual < 1e-12);
        assert_eq!(step.solution.u_hat, step.solution.y_hat);
    }

    #[test]
    fn unconnected_problem_is_identity() {
        let topo = Topology::new(
            vec![SystemSizes {
                n_in: 0,
                n_out: 1,
                n_st: 1,
            }],
            &[],
        )
        .unwrap();
        let ops = CostaricaOps {
            g_v: Tensor3::zeros(1, 0, N_COEFFS),
            g_d: Tensor3::zeros(1, 0, N_COEFFS),
            p_v: DenseMatrix::from_rows(&[[2.0]]),
            p_d: DenseMatrix::from_rows(&[[-1.0]]),
            r_v: DenseMatrix::zeros(1, 1),
            r_d: DenseMatrix::zeros(1, 1),
            f_c: vec![0.0],
            y_c: vec![0.5],
            y_dot_c: vec![0.0],
            x_tilde: vec![3.0],
        };
        let glob = assemble_global(&[ops], &[], &topo).unwrap();
        let prob = assemble_missiles(&glob, &topo).unwrap();
        assert_eq!(prob.m, DenseMatrix::identity(2));
        assert_eq!(prob.rhs, vec![6.5, -3.0]);
        let sol = solve_missiles(&prob, &topo).unwrap();
        assert_eq!(sol.y_hat, vec![6.5]);
        assert!(sol.u_hat.is_empty());
    }

    #[test]
    fn requires_linearization() {
        let slave = OdeSlave::new(Arc::new(Integrator), 0.0, &[1.0])
            .unwrap()
            .with_capabilities(crate::slave::Capabilities::BASIC);
        let topo = Topology::new(
            vec![SystemSizes {
                n_in: 1,
                n_out: 1,
                n_st: 1,
            }],
            &[(0, 0)],
        )
        .unwrap();
        let err = MissilesMaster::new(vec![Box::new(slave)], topo, MissilesConfig::default()).err();
        assert!(matches!(err, Some(Error::CapabilityMissing { .. })));
    }
}
