//! Fan-out of per-slave work over worker threads.

use crate::slave::Slave;

/// How independent work items (slaves within a step, runs within a sweep)
/// are scheduled.
///
/// `Parallel` uses the rayon thread pool when the `parallel` feature is
/// enabled and silently runs sequentially otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

impl Execution {
    /// Whether work actually runs on several threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every slave, collecting results in slave order.
pub fn map_slaves<T, F>(slaves: &mut [Box<dyn Slave>], exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut dyn Slave) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return slaves
            .par_iter_mut()
            .enumerate()
            .map(|(k, s)| f(k, s.as_mut()))
            .collect();
    }
    let _ = exec;
    slaves
        .iter_mut()
        .enumerate()
        .map(|(k, s)| f(k, s.as_mut()))
        .collect()
}

/// Evaluates `f(0..n)`, collecting results in index order.
pub fn map_indices<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
