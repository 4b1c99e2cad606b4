//! On-disk cache of monolithic references, keyed by model and grid.

use std::path::{Path, PathBuf};

use missiles_core::monolithic::monolithic_run;
use missiles_core::{ModelId, TimeGrid, Trajectory};

use crate::csv_io::{emit_csv, read_csv};
use crate::error::CliError;

/// File name for a reference. Floats are keyed by their bit patterns so
/// that grids differing in the last bit never share an entry.
pub fn cache_file(dir: &Path, model: ModelId, grid: &TimeGrid) -> PathBuf {
    dir.join(format!(
        "{model}-{:016x}-{:016x}-{:016x}.csv",
        grid.t_init().to_bits(),
        grid.t_end().to_bits(),
        grid.dt().to_bits()
    ))
}

/// Monolithic reference on `grid`, read from `dir` when cached and written
/// there otherwise.
pub fn reference(
    model: ModelId,
    grid: &TimeGrid,
    dir: Option<&Path>,
) -> Result<Trajectory, CliError> {
    let Some(dir) = dir else {
        return Ok(monolithic_run(&model.build(), grid)?);
    };
    let path = cache_file(dir, model, grid);
    if path.exists() {
        if let Ok(t) = read_csv(&path) {
            if t.len() == grid.n_steps() + 1 {
                return Ok(t);
            }
        }
    }
    let traj = monolithic_run(&model.build(), grid)?;
    // Write then rename so that concurrent sweeps never read a partial file.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    emit_csv(&traj, &tmp)?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(traj)
}
