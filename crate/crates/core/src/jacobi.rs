//! Non-iterative Jacobi master: every input holds the value of its driving
//! output at the step start, with direct feedthrough settled at that time.

use crate::error::Result;
use crate::exec::{map_slaves, Execution};
use crate::master::{check_wiring, run_master, stacked_outputs, Master};
use crate::poly::PolyInput;
use crate::slave::{Slave, StepRecord};
use crate::topology::Topology;
use crate::trajectory::{RunStats, TimeGrid, Trajectory};

pub struct JacobiMaster {
    slaves: Vec<Box<dyn Slave>>,
    topo: Topology,
    execution: Execution,
    /// Outputs at the current communication time.
    y: Vec<f64>,
    stats: RunStats,
}

impl JacobiMaster {
    pub fn new(slaves: Vec<Box<dyn Slave>>, topo: Topology, execution: Execution) -> Result<Self> {
        check_wiring(&slaves, &topo)?;
        let y = stacked_outputs(&slaves);
        Ok(Self {
            slaves,
            topo,
            execution,
            y,
            stats: RunStats::default(),
        })
    }
}

impl JacobiMaster {
    /// Inputs at the step start. Outputs with direct feedthrough depend on
    /// the inputs just set, so the loop is settled by repeated substitution:
    /// `n_sys + 1` passes cover any loop-free feedthrough chain.
    fn resolve_inputs(&mut self) -> Result<Vec<f64>> {
        let mut u = self.topo.gather_inputs(&self.y)?;
        for _ in 0..=self.topo.n_sys() {
            self.y.clear();
            for (k, s) in self.slaves.iter_mut().enumerate() {
                s.set_inputs(PolyInput::constant(&u[self.topo.inputs_of(k)]))?;
                self.y.extend(s.outputs());
            }
            u = self.topo.gather_inputs(&self.y)?;
        }
        Ok(u)
    }
}

impl Master for JacobiMaster {
    fn slaves(&self) -> &[Box<dyn Slave>] {
        &self.slaves
    }

    fn advance(&mut self, dt: f64) -> Result<Vec<StepRecord>> {
        let u = self.resolve_inputs()?;
        let topo = &self.topo;
        let records = map_slaves(&mut self.slaves, self.execution, |k, s| {
            s.set_inputs(PolyInput::constant(&u[topo.inputs_of(k)]))?;
            s.do_step(dt)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        self.y.clear();
        for r in &records {
            self.y.extend_from_slice(&r.y);
        }
        self.stats.steps += 1;
        self.stats.integrations += self.slaves.len();
        Ok(records)
    }

    fn stats(&self) -> RunStats {
        self.stats.clone()
    }
}

pub fn jacobi_run(
    slaves: Vec<Box<dyn Slave>>,
    topo: &Topology,
    grid: &TimeGrid,
    execution: Execution,
) -> Result<Trajectory> {
    let mut master = JacobiMaster::new(slaves, topo.clone(), execution)?;
    run_master(&mut master, grid)
}
