//! Co-simulation masters for modular ODE systems.
//!
//! The main entry point is [`missiles::missiles_run`], which couples slaves
//! through a per-step linear solve over linear-response estimates of each
//! slave driven by polynomial inputs. [`jacobi`], [`jfm`] and [`monolithic`]
//! provide reference masters on the same slave interface.

pub mod costarica;
pub mod error;
pub mod exec;
pub mod jacobi;
pub mod jfm;
pub mod krylov;
pub mod linalg;
pub mod master;
pub mod missiles;
pub mod models;
pub mod monolithic;
pub mod ode;
pub mod poly;
pub mod slave;
pub mod topology;
pub mod trajectory;

pub use error::{Capability, Error, Result};
pub use exec::Execution;
pub use master::{run_master, Master};
pub use models::{ModelId, ModularModel};
pub use trajectory::{TimeGrid, Trajectory};
