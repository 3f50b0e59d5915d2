use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CirlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "ok")]
    Ok,
    /// The solver hit a resource cap.
    #[serde(rename = "NA")]
    Na,
    #[serde(rename = "error")]
    Error,
    /// A published number kept for comparison, not computed here.
    #[serde(rename = "reference")]
    Reference,
}

/// One cell of an experiment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub suite: String,
    pub game: String,
    pub solver: String,
    pub training_model: String,
    pub actual_model: String,
    pub human: String,
    pub wall_clock_s: f64,
    pub value: Option<f64>,
    pub success_rate: Option<f64>,
    pub std: Option<f64>,
    pub seeds: usize,
    pub status: Status,
    pub note: String,
}

impl ResultRow {
    pub fn new(suite: &str, game: &str, solver: &str) -> Self {
        ResultRow {
            suite: suite.into(),
            game: game.into(),
            solver: solver.into(),
            training_model: String::new(),
            actual_model: String::new(),
            human: String::new(),
            wall_clock_s: 0.0,
            value: None,
            success_rate: None,
            std: None,
            seeds: 0,
            status: Status::Ok,
            note: String::new(),
        }
    }
}

fn csv_err(e: csv::Error) -> CirlError {
    CirlError::Parse(e.to_string())
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_json<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows).map_err(|e| CirlError::Parse(e.to_string()))
}

pub fn read_json<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    serde_json::from_reader(input).map_err(|e| CirlError::Parse(e.to_string()))
}

/// Writes `<stem>.csv`, `<stem>.json` and the plot series `<stem>_plot.json`
/// into `dir`.
pub(crate) fn write_both(rows: &[ResultRow], dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(rows, BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
    write_json(rows, BufWriter::new(File::create(dir.join(format!("{stem}.json")))?))?;
    let series = super::plot::plot_series(rows);
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(format!("{stem}_plot.json")))?), &series)
        .map_err(|e| CirlError::Parse(e.to_string()))
}

