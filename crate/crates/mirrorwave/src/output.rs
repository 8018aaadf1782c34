//! CSV files with a provenance header and the matching reader.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip text of `x`; scientific notation outside
/// `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Directory receiving the files of one run.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    config_hash: String,
}

impl OutputDir {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), config_hash: config_hash.to_owned() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `name` with the `# mirrorwave <version> config_hash=<hash>`
    /// line, one `# key=value` line per metadata entry, the column header and
    /// the rows.
    pub fn write_csv(
        &self,
        name: &str,
        metadata: &[(&str, String)],
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = format!("# mirrorwave {VERSION} config_hash={}\n", self.config_hash);
        for (key, value) in metadata {
            text.push_str(&format!("# {key}={value}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io { path: path.clone(), source: e.into() };
        w.write_record(columns).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io { path: path.clone(), source: e.into_error() })?;
        text.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

/// Numeric table read from a CSV file that skips `#` comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a CSV file whose columns must be exactly `expected`. Empty cells
/// (undefined values) become NaN.
pub fn read_table(path: &Path, expected: &[&str]) -> Result<Table, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let schema = |msg: String| CliError::Schema(format!("{}: {msg}", path.display()));
    let columns: Vec<String> =
        reader.headers().map_err(|e| schema(e.to_string()))?.iter().map(str::to_owned).collect();
    if columns != expected {
        return Err(schema(format!("expected columns {expected:?}, found {columns:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(e.to_string()))?;
        let row = record
            .iter()
            .map(|field| match field {
                "" => Ok(f64::NAN),
                _ => field.parse::<f64>().map_err(|_| schema(format!("row {}: `{field}` is not a number", i + 1))),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -0.125, 3.3e7, 2.8e-6, 1.0 / 3.0, -4.9e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.8e-6), "2.8e-6");
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), "abc").unwrap();
        let rows = vec![vec![num(1.5), num(-2e-7)], vec![num(1.0), String::new()]];
        let path = out.write_csv("t.csv", &[("note", "x".into())], &["a", "b"], &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("# mirrorwave {VERSION} config_hash=abc\n# note=x\na,b\n")));
        let table = read_table(&path, &["a", "b"]).unwrap();
        assert_eq!(table.rows[0], vec![1.5, -2e-7]);
        assert!(table.rows[1][1].is_nan());
        let err = read_table(&path, &["a", "c"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
