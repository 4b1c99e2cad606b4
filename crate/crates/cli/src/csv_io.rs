//! Trajectory CSV: header `time` then one column per variable, values with
//! 17 significant digits so that parsing restores every bit.

use std::path::Path;

use missiles_core::Trajectory;

use crate::error::CliError;

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header = std::iter::once("time").chain(traj.columns().iter().map(String::as_str));
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for (t, row) in traj.rows() {
        let record = std::iter::once(format_value(t)).chain(row.iter().map(|v| format_value(*v)));
        w.write_record(record).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Trajectory, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    if header.get(0) != Some("time") {
        return Err(CliError::csv(path, "first column must be `time`"));
    }
    let mut traj = Trajectory::new(header.iter().skip(1).map(str::to_string).collect());
    let mut row = Vec::with_capacity(header.len());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        row.clear();
        for field in rec.iter() {
            let v = field
                .parse::<f64>()
                .map_err(|e| CliError::csv(path, format!("row {}: `{field}`: {e}", line + 1)))?;
            row.push(v);
        }
        traj.push(row[0], &row[1..])
            .map_err(|e| CliError::csv(path, e))?;
    }
    Ok(traj)
}
