use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bank::ResponseMatrix;
use crate::{Error, Result};

/// Nine significant digits, C locale.
pub(crate) fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Write envelopes as `time_s,det_<f0>,...` with one row every `decimate`
/// samples.
pub fn write_response_csv(
    matrix: &ResponseMatrix,
    path: impl AsRef<Path>,
    decimate: usize,
) -> Result<()> {
    let path = path.as_ref();
    if decimate == 0 {
        return Err(Error::InvalidParameter("decimate must be >= 1".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    let mut header = String::from("time_s");
    for f0 in &matrix.labels {
        header.push_str(&format!(",det_{f0}"));
    }
    writeln!(out, "{header}").map_err(io)?;

    let mut line = String::new();
    for n in (0..matrix.len()).step_by(decimate) {
        line.clear();
        line.push_str(&sig9(matrix.time(n)));
        for env in &matrix.envelopes {
            line.push(',');
            line.push_str(&sig9(env[n]));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// A parsed numeric CSV file with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_response_csv(path: impl AsRef<Path>) -> Result<CsvTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |reason: String| Error::Parse {
        what: path.display().to_string(),
        reason,
    };
    let header: Vec<String> = match lines.next() {
        Some(line) => line
            .map_err(|e| Error::io(path, e))?
            .split(',')
            .map(str::to_owned)
            .collect(),
        None => return Err(parse_err("empty file".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(parse_err(format!(
                "row {} has {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}
