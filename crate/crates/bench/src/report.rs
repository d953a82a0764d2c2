use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{summarize, Summary};

pub const CSV_HEADER: &str = "test,scenario,param,n,mean,min,max,std,p25,p50,p75";

/// Statistics of one benchmark point. Raw samples stay in memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub test: String,
    pub scenario: String,
    pub param: String,
    #[serde(flatten)]
    pub stats: Summary,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl BenchReport {
    pub fn new(
        test: impl Into<String>,
        scenario: impl Into<String>,
        param: impl Into<String>,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let stats = summarize(&samples)?;
        Ok(Self { test: test.into(), scenario: scenario.into(), param: param.into(), stats, samples })
    }

    pub fn without_samples(&self) -> Self {
        Self { samples: Vec::new(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format {s:?}")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    test: String,
    scenario: String,
    param: String,
    n: usize,
    mean: f64,
    min: f64,
    max: f64,
    std: f64,
    p25: f64,
    p50: f64,
    p75: f64,
}

impl From<&BenchReport> for Row {
    fn from(r: &BenchReport) -> Self {
        let s = r.stats;
        Row {
            test: r.test.clone(),
            scenario: r.scenario.clone(),
            param: r.param.clone(),
            n: s.n,
            mean: s.mean,
            min: s.min,
            max: s.max,
            std: s.std,
            p25: s.p25,
            p50: s.p50,
            p75: s.p75,
        }
    }
}

impl From<Row> for BenchReport {
    fn from(r: Row) -> Self {
        BenchReport {
            test: r.test,
            scenario: r.scenario,
            param: r.param,
            stats: Summary {
                n: r.n,
                mean: r.mean,
                min: r.min,
                max: r.max,
                std: r.std,
                p25: r.p25,
                p50: r.p50,
                p75: r.p75,
            },
            samples: Vec::new(),
        }
    }
}

pub fn render_csv(reports: &[BenchReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(Row::from(r)).map_err(|e| Error::BadReport(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::BadReport(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_json(reports: &[BenchReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::BadReport(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchReport>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> =
        rd.headers().map_err(|e| Error::BadReport(e.to_string()))?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::BadReport(format!("unexpected header {:?}", header.join(","))));
    }
    rd.deserialize::<Row>().map(|row| row.map(BenchReport::from).map_err(|e| Error::BadReport(e.to_string()))).collect()
}

pub fn parse_json(text: &str) -> Result<Vec<BenchReport>> {
    serde_json::from_str(text).map_err(|e| Error::BadReport(e.to_string()))
}

pub fn emit_report(reports: &[BenchReport], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::NoReports);
    }
    let path = path.as_ref();
    let body = match format {
        ReportFormat::Csv => render_csv(reports)?,
        ReportFormat::Json => render_json(reports)? + "\n",
    };
    let io = |source| Error::IoError { path: path.into(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(body.as_bytes()).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_report(format: ReportFormat, path: impl AsRef<Path>) -> Result<Vec<BenchReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::IoError { path: path.into(), source })?;
    match format {
        ReportFormat::Csv => parse_csv(&text),
        ReportFormat::Json => parse_json(&text),
    }
}
