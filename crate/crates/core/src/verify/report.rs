use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::group::{GroupElement, GroupSpec};
use crate::tensor::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub t: usize,
    pub with_reflection: bool,
}

impl From<GroupSpec> for GroupRecord {
    fn from(s: GroupSpec) -> Self {
        GroupRecord { t: s.t(), with_reflection: s.with_reflection() }
    }
}

/// One `(g, seed)` measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub g: GroupElement,
    pub seed: u64,
    pub max_abs: f64,
    pub max_rel: f64,
}

/// Equivariance errors of one target over every group element and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub target: String,
    pub group: GroupRecord,
    pub precision: Precision,
    pub cells: Vec<ReportCell>,
}

pub const CSV_HEADER: [&str; 9] =
    ["target", "t", "with_reflection", "precision", "k", "m", "seed", "max_abs", "max_rel"];

impl EquivarianceReport {
    pub fn new(target: impl Into<String>, spec: GroupSpec, precision: Precision) -> Self {
        EquivarianceReport { target: target.into(), group: spec.into(), precision, cells: Vec::new() }
    }

    /// Sorts cells by `(k, m, seed)` so merged reports are deterministic.
    pub fn sort(&mut self) {
        self.cells.sort_by_key(|c| (c.g.m, c.g.k, c.seed));
    }

    pub fn max_abs(&self) -> f64 {
        self.cells.iter().map(|c| c.max_abs).fold(0.0, f64::max)
    }

    pub fn max_rel(&self) -> f64 {
        self.cells.iter().map(|c| c.max_rel).fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.cells.iter().all(|c| c.max_abs <= threshold)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }

    fn csv_rows(&self) -> impl Iterator<Item = [String; 9]> + '_ {
        self.cells.iter().map(move |c| {
            [
                self.target.clone(),
                self.group.t.to_string(),
                self.group.with_reflection.to_string(),
                self.precision.to_string(),
                c.g.k.to_string(),
                c.g.m.to_string(),
                c.seed.to_string(),
                format!("{:e}", c.max_abs),
                format!("{:e}", c.max_rel),
            ]
        })
    }
}

/// Flattens reports into one CSV table; always writes the header.
pub fn write_reports_csv<W: Write>(reports: &[EquivarianceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for row in r.csv_rows() {
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
