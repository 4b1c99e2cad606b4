//! Shared driver for fixed-step co-simulation masters.

use crate::error::{Capability, Error, Result};
use crate::slave::{Slave, StepRecord};
use crate::topology::Topology;
use crate::trajectory::{RunStats, TimeGrid, Trajectory};

/// A master advancing a set of coupled slaves one macro-step at a time.
pub trait Master {
    fn slaves(&self) -> &[Box<dyn Slave>];

    /// Runs one macro-step of size `dt` and returns each slave's
    /// end-of-step record, in slave order.
    fn advance(&mut self, dt: f64) -> Result<Vec<StepRecord>>;

    fn stats(&self) -> RunStats;
}

/// Steps `master` over `grid`, recording outputs (and states when every
/// slave exposes them) at each communication time.
pub fn run_master<M: Master + ?Sized>(master: &mut M, grid: &TimeGrid) -> Result<Trajectory> {
    let slaves = master.slaves();
    let with_states = slaves.iter().all(|s| s.capabilities().state_access);
    let sizes: Vec<_> = slaves.iter().map(|s| (s.n_out(), s.n_st())).collect();
    let mut traj = Trajectory::new(Trajectory::column_names(&sizes, with_states));

    let mut row = Vec::with_capacity(traj.columns().len());
    for s in slaves {
        row.extend(s.outputs());
        if with_states {
            row.extend(s.states()?.0);
        }
    }
    traj.push(grid.t_init(), &row)?;

    for n in 0..grid.n_steps() {
        let records = master
            .advance(grid.dt())
            .map_err(|e| Error::step_failed(grid.time(n), e))?;
        row.clear();
        for r in &records {
            row.extend_from_slice(&r.y);
            if with_states {
                row.extend_from_slice(&r.x);
            }
        }
        traj.push(grid.time(n + 1), &row)?;
    }
    traj.stats = master.stats();
    Ok(traj)
}

/// Checks that slave interfaces match the topology's system sizes.
pub(crate) fn check_wiring(slaves: &[Box<dyn Slave>], topo: &Topology) -> Result<()> {
    if slaves.len() != topo.n_sys() {
        return Err(Error::dims("slave count", topo.n_sys(), slaves.len()));
    }
    for (s, sz) in slaves.iter().zip(topo.sizes()) {
        if s.n_in() != sz.n_in {
            return Err(Error::dims("slave inputs", sz.n_in, s.n_in()));
        }
        if s.n_out() != sz.n_out {
            return Err(Error::dims("slave outputs", sz.n_out, s.n_out()));
        }
        if s.n_st() != sz.n_st {
            return Err(Error::dims("slave states", sz.n_st, s.n_st()));
        }
    }
    Ok(())
}

pub(crate) fn require_all(slaves: &[Box<dyn Slave>], caps: &[Capability]) -> Result<()> {
    for s in slaves {
        for &cap in caps {
            if !s.capabilities().has(cap) {
                return Err(Error::CapabilityMissing {
                    slave: s.name().to_string(),
                    capability: cap,
                });
            }
        }
    }
    Ok(())
}

/// Concatenated current input values of all slaves.
pub(crate) fn stacked_inputs(slaves: &[Box<dyn Slave>]) -> Vec<f64> {
    slaves.iter().flat_map(|s| s.current_inputs()).collect()
}

/// Concatenated current outputs of all slaves.
pub(crate) fn stacked_outputs(slaves: &[Box<dyn Slave>]) -> Vec<f64> {
    slaves.iter().flat_map(|s| s.outputs()).collect()
}
