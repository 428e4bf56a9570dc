mod design;
mod fit;
mod focus;
mod ingest;
mod mc;
mod trap;

pub use design::design;
pub use fit::fit;
pub use focus::focus;
pub use ingest::ingest;
pub use mc::mc;
pub use trap::trap;

use crate::config::require_file;
use crate::error::CliError;
use metalens::io::{create, open, read_efficiency_csv, write_columns, IoError};
use metalens::lens::EfficiencyTable;
use std::io::Write;
use std::path::Path;

/// Efficiency table from `path`, or the bundled ⁸⁷Rb table.
fn load_table(path: Option<&Path>, key: &str) -> Result<EfficiencyTable, CliError> {
    let Some(path) = path else {
        return Ok(EfficiencyTable::default_rb87());
    };
    require_file(path, key)?;
    let table = read_efficiency_csv(open(path)?)?;
    table
        .validate()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(table)
}

/// Writes a two-column CSV into `out` and returns its file name.
fn write_profile(out: &Path, name: String, header: [&str; 2], a: &[f64], b: &[f64]) -> Result<String, CliError> {
    let mut w = create(&out.join(&name)).map_err(CliError::output)?;
    write_columns(&mut w, header, a, b).map_err(CliError::output)?;
    w.flush().map_err(|e| CliError::output(IoError::Io(e)))?;
    Ok(name)
}
