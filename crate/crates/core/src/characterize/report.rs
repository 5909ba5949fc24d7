use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::signal::sig9;
use crate::{Error, Result};

/// Acceptance rule for a measured value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    /// `|value - reference| <= tol * |reference|`
    Relative(f64),
    /// `|value - reference| <= tol`
    Absolute(f64),
    AtLeast(f64),
    AtMost(f64),
    /// Inclusive range.
    Within(f64, f64),
}

impl Tolerance {
    pub fn accepts(&self, value: f64, reference: Option<f64>) -> bool {
        if !value.is_finite() {
            return false;
        }
        match *self {
            Tolerance::Relative(tol) => {
                reference.is_some_and(|r| (value - r).abs() <= tol * r.abs())
            }
            Tolerance::Absolute(tol) => reference.is_some_and(|r| (value - r).abs() <= tol),
            Tolerance::AtLeast(lo) => value >= lo,
            Tolerance::AtMost(hi) => value <= hi,
            Tolerance::Within(lo, hi) => value >= lo && value <= hi,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Tolerance::Relative(t) => format!("+-{}%", t * 100.0),
            Tolerance::Absolute(t) => format!("+-{t}"),
            Tolerance::AtLeast(v) => format!(">={v}"),
            Tolerance::AtMost(v) => format!("<={v}"),
            Tolerance::Within(a, b) => format!("[{a};{b}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub reference: Option<f64>,
    pub tolerance: Option<Tolerance>,
    pub note: Option<String>,
}

impl Measurement {
    pub fn new(name: impl Into<String>, value: f64, unit: impl Into<String>) -> Self {
        Measurement {
            name: name.into(),
            value,
            unit: unit.into(),
            reference: None,
            tolerance: None,
            note: None,
        }
    }

    pub fn reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn tolerance(mut self, tolerance: Tolerance) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// `None` when there is nothing to check against.
    pub fn passed(&self) -> Option<bool> {
        self.tolerance
            .map(|t| t.accepts(self.value, self.reference))
    }
}

/// Results of one experiment run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub parameters: Vec<(String, String)>,
    pub measurements: Vec<Measurement>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

impl ExperimentReport {
    pub fn new(id: impl Into<String>) -> Self {
        ExperimentReport {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.parameters.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, m: Measurement) -> &mut Self {
        self.measurements.push(m);
        self
    }

    /// True when no checked measurement failed.
    pub fn passed(&self) -> bool {
        self.measurements.iter().all(|m| m.passed() != Some(false))
    }

    pub fn failures(&self) -> Vec<&Measurement> {
        self.measurements
            .iter()
            .filter(|m| m.passed() == Some(false))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("experiment,name,value,unit,reference,tolerance,pass,note\n");
        for m in &self.measurements {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                csv_field(&self.id),
                csv_field(&m.name),
                sig9(m.value),
                csv_field(&m.unit),
                m.reference.map(sig9).unwrap_or_default(),
                m.tolerance
                    .map(|t| csv_field(&t.describe()))
                    .unwrap_or_default(),
                match m.passed() {
                    Some(true) => "pass",
                    Some(false) => "fail",
                    None => "",
                },
                m.note.as_deref().map(csv_field).unwrap_or_default(),
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.id);
        for (k, v) in &self.parameters {
            let _ = writeln!(s, "  {k} = {v}");
        }
        for m in &self.measurements {
            let _ = write!(s, "  {:<32} {:>14.6} {}", m.name, m.value, m.unit);
            if let Some(r) = m.reference {
                let _ = write!(s, "  (ref {r})");
            }
            if let Some(t) = m.tolerance {
                let verdict = if m.passed() == Some(true) {
                    "PASS"
                } else {
                    "FAIL"
                };
                let _ = write!(s, "  {} {verdict}", t.describe());
            }
            if let Some(n) = &m.note {
                let _ = write!(s, "  # {n}");
            }
            s.push('\n');
        }
        s
    }

    /// Write `<id>.csv` and `<id>.txt` into `dir`, returning both paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{}.csv", self.id));
        let txt = dir.join(format!("{}.txt", self.id));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        fs::write(&txt, self.to_text()).map_err(|e| Error::io(&txt, e))?;
        Ok((csv, txt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances() {
        assert!(Tolerance::Relative(0.1).accepts(1.05, Some(1.0)));
        assert!(!Tolerance::Relative(0.1).accepts(1.2, Some(1.0)));
        assert!(!Tolerance::Relative(0.1).accepts(1.0, None));
        assert!(Tolerance::AtLeast(0.9).accepts(0.95, None));
        assert!(!Tolerance::AtMost(0.5).accepts(f64::NAN, None));
        assert!(Tolerance::Within(0.414, 0.514).accepts(0.45, None));
    }

    #[test]
    fn report_csv_parses_back() {
        let mut r = ExperimentReport::new("timing");
        r.param("sr", 48_000);
        r.push(
            Measurement::new("rise", 912.123456789, "ms")
                .reference(912.625)
                .tolerance(Tolerance::Relative(0.1)),
        );
        r.push(Measurement::new("note, quoted", 1.0, "").note("a \"b\""));
        assert!(r.passed());
        let csv = r.to_csv();
        let row = csv.lines().nth(1).unwrap();
        let value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((value - 912.123456789).abs() < 1e-6);
        assert!(row.ends_with(",pass,"));
        assert!(csv.contains("\"note, quoted\""));
        assert!(r.to_text().contains("PASS"));
    }

    #[test]
    fn failing_measurement_fails_report() {
        let mut r = ExperimentReport::new("x");
        r.push(
            Measurement::new("a", 2.0, "Hz")
                .reference(1.0)
                .tolerance(Tolerance::Relative(0.15)),
        );
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
    }
}
