//! Sweep results and their on-disk form.
//!
//! The CSV has one row per (axis value, method):
//!
//! ```text
//! axis,method,mean_nmse,mean_ser,ci_nmse,ci_ser,trials,seed,median_nmse,median_ser
//! ```
//!
//! Floats are written in Rust's shortest round-trip notation, so parsing a
//! file reproduces the in-memory result exactly and identical results give
//! identical bytes. A whitespace-separated `.dat` companion holds one row
//! per axis value with `<method>_nmse <method>_ser` column pairs for
//! plotting.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{config_err, Error, Result};
use crate::estimators::Method;

const HEADER: [&str; 10] = [
    "axis",
    "method",
    "mean_nmse",
    "mean_ser",
    "ci_nmse",
    "ci_ser",
    "trials",
    "seed",
    "median_nmse",
    "median_ser",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Snr,
    EmIter,
    BemOrder,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr_db",
            SweepAxis::EmIter => "n_em",
            SweepAxis::BemOrder => "bem_order",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr_db" | "snr" => Ok(SweepAxis::Snr),
            "n_em" | "em_iter" => Ok(SweepAxis::EmIter),
            "bem_order" | "d" => Ok(SweepAxis::BemOrder),
            other => Err(config_err(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_nmse: f64,
    pub mean_ser: f64,
    pub median_nmse: f64,
    pub median_ser: f64,
    pub ci_nmse: f64,
    pub ci_ser: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub methods: Vec<MethodSummary>,
}

impl SweepPoint {
    pub fn get(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Axis value with the lowest mean NMSE for `method`.
    pub fn argmin_nmse(&self, method: Method) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.get(method).map(|m| (p.value, m.mean_nmse)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(v, _)| v)
    }

    /// `(axis value, summary)` series of one method.
    pub fn series(&self, method: Method) -> Vec<(f64, &MethodSummary)> {
        self.points
            .iter()
            .filter_map(|p| p.get(method).map(|m| (p.value, m)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER)?;
        for p in &self.points {
            for m in &p.methods {
                w.write_record([
                    p.value.to_string(),
                    m.method.to_string(),
                    m.mean_nmse.to_string(),
                    m.mean_ser.to_string(),
                    m.ci_nmse.to_string(),
                    m.ci_ser.to_string(),
                    m.trials.to_string(),
                    self.seed.to_string(),
                    m.median_nmse.to_string(),
                    m.median_ser.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a CSV produced by [`SweepResult::write_csv`]. The axis kind
    /// is not stored in the file and must be supplied.
    pub fn read_csv<R: Read>(input: R, axis: SweepAxis) -> Result<SweepResult> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != HEADER {
            return Err(config_err(format!("unexpected CSV header {header:?}")));
        }
        let mut seed = 0;
        let mut points: Vec<SweepPoint> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| config_err(format!("column {}: {e}", HEADER[i])))
            };
            let n = |i: usize| -> Result<u64> {
                rec[i]
                    .parse::<u64>()
                    .map_err(|e| config_err(format!("column {}: {e}", HEADER[i])))
            };
            let value = f(0)?;
            let summary = MethodSummary {
                method: rec[1].parse()?,
                mean_nmse: f(2)?,
                mean_ser: f(3)?,
                ci_nmse: f(4)?,
                ci_ser: f(5)?,
                trials: n(6)? as usize,
                median_nmse: f(8)?,
                median_ser: f(9)?,
            };
            seed = n(7)?;
            match points.last_mut() {
                Some(p) if p.value.to_bits() == value.to_bits() => p.methods.push(summary),
                _ => points.push(SweepPoint {
                    value,
                    methods: vec![summary],
                }),
            }
        }
        Ok(SweepResult { axis, seed, points })
    }

    /// Plot-ready table: `axis <m>_nmse <m>_ser ...`.
    pub fn write_plot_table<W: Write>(&self, mut out: W) -> Result<()> {
        let methods: Vec<Method> = self
            .points
            .first()
            .map(|p| p.methods.iter().map(|m| m.method).collect())
            .unwrap_or_default();
        write!(out, "# {}", self.axis)?;
        for m in &methods {
            write!(out, " {m}_nmse {m}_ser")?;
        }
        writeln!(out)?;
        for p in &self.points {
            write!(out, "{}", p.value)?;
            for m in &p.methods {
                write!(out, " {:.9e} {:.9e}", m.mean_nmse, m.mean_ser)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Writes `path` (CSV) and a `.dat` companion next to it; returns both paths.
pub fn emit_results(result: &SweepResult, path: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let csv_path = path.as_ref().to_path_buf();
    let dat_path = csv_path.with_extension("dat");
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    fs::write(&csv_path, &buf)?;
    let mut buf = Vec::new();
    result.write_plot_table(&mut buf)?;
    fs::write(&dat_path, &buf)?;
    Ok((csv_path, dat_path))
}

pub fn read_results(path: impl AsRef<Path>, axis: SweepAxis) -> Result<SweepResult> {
    SweepResult::read_csv(fs::File::open(path)?, axis)
}
