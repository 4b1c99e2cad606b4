//! Communication-time grid and recorded trajectories.

use crate::error::{Error, Result};

/// Fixed macro-step grid `t_N = t_init + N·dt`, `N = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_init: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Fails unless `dt` divides `t_end - t_init` to within `1e-9·dt`.
    pub fn new(t_init: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt >= crate::poly::MIN_STEP) || !dt.is_finite() {
            return Err(Error::NonPositiveStep(dt));
        }
        let span = t_end - t_init;
        let ratio = span / dt;
        let n = ratio.round();
        if !(span > 0.0) || ((ratio - n) * dt).abs() > 1e-9 * dt {
            return Err(Error::GridMismatch { dt, span });
        }
        Ok(Self {
            t_init,
            dt,
            n_steps: n as usize,
        })
    }

    pub fn t_init(&self) -> f64 {
        self.t_init
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_init + n as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|n| self.time(n))
    }
}

/// Counters collected while running a master.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    /// Newton iterations summed over all steps (iterative masters only).
    pub newton_iterations: usize,
    /// Slave integrations including rejected trial integrations.
    pub integrations: usize,
    /// Largest scaled residual of the per-step coupling solve.
    pub max_solve_residual: f64,
}

/// Sampled signals, one row per communication time.
///
/// Columns are named `s<k>.y<i>` and `s<k>.x<i>` with one-based system and
/// signal indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    columns: Vec<String>,
    times: Vec<f64>,
    data: Vec<f64>,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            times: Vec::new(),
            data: Vec::new(),
            stats: RunStats::default(),
        }
    }

    /// Column names for systems with the given `(n_out, n_st)`; state columns
    /// are omitted when `with_states` is false.
    pub fn column_names(sizes: &[(usize, usize)], with_states: bool) -> Vec<String> {
        let mut names = Vec::new();
        for (k, &(n_out, n_st)) in sizes.iter().enumerate() {
            names.extend((0..n_out).map(|i| format!("s{}.y{}", k + 1, i + 1)));
            if with_states {
                names.extend((0..n_st).map(|i| format!("s{}.x{}", k + 1, i + 1)));
            }
        }
        names
    }

    pub fn push(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::dims(
                "Trajectory::push",
                self.columns.len(),
                row.len(),
            ));
        }
        self.times.push(t);
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.columns.len();
        &self.data[n * w..(n + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..self.len()).map(|n| (self.times[n], self.row(n)))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some((0..self.len()).map(|n| self.row(n)[j]).collect())
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.row(self.len() - 1))
    }
}

/// `100·‖a - b‖₂ / ‖b‖₂` over paired samples.
pub fn relative_error_percent(signal: &[f64], reference: &[f64]) -> Result<f64> {
    if signal.len() != reference.len() {
        return Err(Error::dims(
            "relative_error_percent",
            reference.len(),
            signal.len(),
        ));
    }
    let num: f64 = signal
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    Ok(100.0 * (num / den).sqrt())
}

/// Relative error of one column between two trajectories on the same grid.
pub fn trajectory_error_percent(
    signal: &Trajectory,
    reference: &Trajectory,
    column: &str,
) -> Result<f64> {
    let missing = || Error::UnknownColumn(column.to_string());
    let a = signal.column(column).ok_or_else(missing)?;
    let b = reference.column(column).ok_or_else(missing)?;
    relative_error_percent(&a, &b)
}
