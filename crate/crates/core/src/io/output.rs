//! Line-oriented output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diagnostics::FunctionalRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, State};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Hex SHA-256 of the canonical configuration text.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Writes one [`FunctionalRecord`] per line after a `#` metadata header and
/// the column names. Floats use 17 significant digits so the file round
/// trips bit-exactly.
pub struct TimeseriesWriter {
    out: BufWriter<File>,
    jsonl: Option<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl TimeseriesWriter {
    pub fn create(path: &Path, jsonl: Option<&Path>, hash: &str) -> Result<Self> {
        let mut out = create(path)?;
        let header = format!(
            "# exogas {VERSION}\n# config_sha256 {hash}\n{}\n",
            FunctionalRecord::COLUMNS.join(",")
        );
        out.write_all(header.as_bytes()).map_err(|e| io_err(path, e))?;
        let jsonl = jsonl.map(create).transpose()?;
        Ok(TimeseriesWriter { out, jsonl, path: path.to_path_buf() })
    }

    pub fn write(&mut self, r: &FunctionalRecord) -> Result<()> {
        let mut line = String::with_capacity(29 * 25);
        for (k, v) in r.values().iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            if k == 1 {
                line.push_str(&r.step.to_string());
            } else {
                line.push_str(&format!("{v:.17e}"));
            }
        }
        line.push('\n');
        self.out.write_all(line.as_bytes()).map_err(|e| io_err(&self.path, e))?;
        if let Some(j) = &mut self.jsonl {
            let mut s = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            j.write_all(s.as_bytes()).map_err(|e| io_err(&self.path, e))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| io_err(&self.path, e))?;
        if let Some(j) = &mut self.jsonl {
            j.flush().map_err(|e| io_err(&self.path, e))?;
        }
        Ok(())
    }
}

/// Cell and node values: `index,x_cell,v,theta,z,x_node,u`. The last row
/// carries only the outer node.
pub fn write_snapshot(path: &Path, grid: &Grid, s: &State) -> Result<()> {
    let mut out = create(path)?;
    let mut text = format!("# t {:.17e}\nindex,x_cell,v,theta,z,x_node,u\n", s.t);
    let n = grid.n_cells();
    for i in 0..n {
        text.push_str(&format!(
            "{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            grid.cell_center(i),
            s.v[i],
            s.theta[i],
            s.z[i],
            grid.node(i),
            s.u[i]
        ));
    }
    text.push_str(&format!("{n},,,,,{:.17e},{:.17e}\n", grid.node(n), s.u[n]));
    out.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Full state as JSON, reloadable with [`load_state`].
pub fn write_state(path: &Path, s: &State) -> Result<()> {
    let text = serde_json::to_string(s).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_state(path: &Path) -> Result<State> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Data rows of a timeseries CSV (header and comments skipped).
pub fn read_timeseries(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let row = line
            .split(',')
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok(rows)
}
