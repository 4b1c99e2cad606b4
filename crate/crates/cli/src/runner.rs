use std::fmt::Write as _;
use std::time::Instant;

use missiles_core::jacobi::jacobi_run;
use missiles_core::jfm::{ifosmondi_jfm_run, JfmConfig};
use missiles_core::missiles::{missiles_run, MissilesConfig};
use missiles_core::monolithic::monolithic_run;
use missiles_core::trajectory::trajectory_error_percent;
use missiles_core::{Error, ModelId, Trajectory};

use crate::cache::reference;
use crate::config::{Method, RunConfig};
use crate::csv_io::emit_csv;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Relative L2 error on the model's metric column, in percent. Absent for
    /// the monolithic reference itself and for failed runs.
    pub relative_error_pct: Option<f64>,
    /// Time spent in the master only, excluding the reference.
    pub wall_time_s: f64,
    pub steps: usize,
    pub failed: bool,
    pub failure_time: Option<f64>,
    /// Why the run failed, when it did.
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Option<Trajectory>,
    pub summary: RunSummary,
}

pub const SUMMARY_HEADER: &str = "model,method,dt,epsilon,error_pct,wall_s,steps,failed";

/// `model,method,dt,epsilon,error_pct,wall_s,steps,failed`. The epsilon
/// field is empty for methods other than JFM, the error field when no
/// reference comparison was made.
pub fn summary_line(cfg: &RunConfig, s: &RunSummary) -> String {
    let eps = if cfg.method == Method::IfosmondiJfm {
        format!("{:e}", cfg.epsilon)
    } else {
        String::new()
    };
    let err = s
        .relative_error_pct
        .map(|e| format!("{e:e}"))
        .unwrap_or_default();
    format!(
        "{},{},{:e},{eps},{err},{:.6},{},{}",
        cfg.model, cfg.method, cfg.dt, s.wall_time_s, s.steps, s.failed
    )
}

fn execute(cfg: &RunConfig) -> Result<Trajectory, Error> {
    let model = cfg.model.build();
    let grid = missiles_core::TimeGrid::new(0.0, cfg.t_end, cfg.dt)?;
    match cfg.method {
        Method::Monolithic => monolithic_run(&model, &grid),
        Method::NiJacobi => jacobi_run(model.slaves(), &model.topology, &grid, cfg.execution),
        Method::Missiles => {
            let mc = MissilesConfig {
                stehfest: missiles_core::costarica::StehfestScheme::new(cfg.stehfest_terms)?,
                execution: cfg.execution,
            };
            missiles_run(model.slaves(), &model.topology, &grid, mc)
        }
        Method::IfosmondiJfm => {
            let jc = JfmConfig {
                execution: cfg.execution,
                ..JfmConfig::new(cfg.epsilon)
            };
            ifosmondi_jfm_run(model.slaves(), &model.topology, &grid, jc)
        }
    }
}

/// Runs one configuration. Step failures are reported in the summary rather
/// than as errors; configuration and I/O problems are errors.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let start = Instant::now();
    let result = execute(cfg);
    let wall_time_s = start.elapsed().as_secs_f64();

    let traj = match result {
        Ok(t) => t,
        Err(Error::StepFailed { time, source }) => {
            return Ok(failed_outcome(cfg, wall_time_s, time, source.to_string()));
        }
        Err(Error::SolverDiverged { time, slave }) => {
            return Ok(failed_outcome(
                cfg,
                wall_time_s,
                time,
                format!("solver diverged in `{slave}`"),
            ));
        }
        Err(e) => return Err(e.into()),
    };

    let relative_error_pct = if cfg.method == Method::Monolithic {
        None
    } else {
        let r = reference(cfg.model, &grid, cfg.cache_dir.as_deref())?;
        Some(trajectory_error_percent(
            &traj,
            &r,
            &cfg.model.build().metric_column,
        )?)
    };
    if let Some(path) = &cfg.output_path {
        emit_csv(&traj, path)?;
    }
    Ok(RunOutcome {
        summary: RunSummary {
            relative_error_pct,
            wall_time_s,
            steps: grid.n_steps(),
            failed: false,
            failure_time: None,
            failure: None,
        },
        trajectory: Some(traj),
    })
}

fn failed_outcome(cfg: &RunConfig, wall_time_s: f64, time: f64, why: String) -> RunOutcome {
    RunOutcome {
        trajectory: None,
        summary: RunSummary {
            relative_error_pct: None,
            wall_time_s,
            // Steps completed before the failing one.
            steps: (time / cfg.dt).round() as usize,
            failed: true,
            failure_time: Some(time),
            failure: Some(why),
        },
    }
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub config: RunConfig,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Default)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.summary.failed)
    }

    pub fn find(&self, method: Method, dt: f64, epsilon: Option<f64>) -> Option<&RunSummary> {
        self.rows
            .iter()
            .find(|r| {
                r.config.method == method
                    && r.config.dt == dt
                    && epsilon.is_none_or(|e| r.config.epsilon == e)
            })
            .map(|r| &r.summary)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&summary_line(&r.config, &r.summary));
            out.push('\n');
        }
        out
    }

    /// Fixed-width text table for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<15} {:<14} {:>8} {:>8} {:>13} {:>10} {:>7}  status",
            "model", "method", "dt", "epsilon", "error (%)", "wall (s)", "steps"
        );
        for r in &self.rows {
            let c = &r.config;
            let s = &r.summary;
            let eps = if c.method == Method::IfosmondiJfm {
                format!("{:.0e}", c.epsilon)
            } else {
                "-".into()
            };
            let err = s
                .relative_error_pct
                .map(|e| format!("{e:.3e}"))
                .unwrap_or_else(|| "-".into());
            let status = match (s.failed, s.failure_time) {
                (true, Some(t)) => format!("failed at t={t}"),
                (true, None) => "failed".into(),
                _ => "ok".into(),
            };
            let _ = writeln!(
                out,
                "{:<15} {:<14} {:>8.0e} {:>8} {:>13} {:>10.4} {:>7}  {status}",
                c.model.as_str(),
                c.method.as_str(),
                c.dt,
                eps,
                err,
                s.wall_time_s,
                s.steps
            );
        }
        out
    }
}

/// Runs every method at every step size, JFM once per epsilon. Runs are
/// sequential so that wall times are not distorted by each other.
pub fn compare(
    base: &RunConfig,
    model: ModelId,
    dts: &[f64],
    methods: &[Method],
    epsilons: &[f64],
) -> Result<CompareTable, CliError> {
    let mut table = CompareTable::default();
    for &dt in dts {
        for &method in methods {
            let eps_list: Vec<f64> = if method == Method::IfosmondiJfm {
                epsilons.to_vec()
            } else {
                vec![base.epsilon]
            };
            for epsilon in eps_list {
                let config = RunConfig {
                    model,
                    method,
                    dt,
                    epsilon,
                    output_path: None,
                    ..base.clone()
                };
                let summary = run(&config)?.summary;
                table.rows.push(CompareRow { config, summary });
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monolithic_has_no_error_field() {
        let cfg = RunConfig {
            t_end: 0.1,
            ..RunConfig::new(ModelId::TwoMass, Method::Monolithic, 1e-3)
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.summary.relative_error_pct, None);
        assert!(!out.summary.failed);
        assert_eq!(out.trajectory.unwrap().len(), 101);
        let line = summary_line(&cfg, &out.summary);
        assert!(line.starts_with("two-mass,monolithic,1e-3,,,"), "{line}");
        assert!(line.ends_with(",100,false"));
    }

    #[test]
    fn step_failure_is_reported_not_raised() {
        // Jacobi with a one-second step drives the prey negative and the
        // predator off to infinity.
        let cfg = RunConfig::new(ModelId::LotkaVolterra, Method::NiJacobi, 1.0);
        let out = run(&cfg).unwrap();
        assert!(out.summary.failed);
        assert_eq!(out.summary.failure_time, Some(12.0));
        assert_eq!(out.summary.steps, 12);
        assert!(out.trajectory.is_none());
    }
}
