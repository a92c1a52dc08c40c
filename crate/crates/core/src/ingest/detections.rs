use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detector::DetectionRecord;
use crate::error::{Error, LineError, ParseErrors, Result};
use crate::matrix::VocLabel;

use super::format_real;
use super::matrix_csv::csv_err;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionFormat {
    Csv,
    Json,
}

impl FromStr for DetectionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown detection format `{other}`"))),
        }
    }
}

const HEADER: [&str; 5] = ["label", "start_rt", "end_rt", "confidence", "sample_id"];

#[derive(Serialize, Deserialize)]
struct Row {
    label: u16,
    start_rt: f64,
    end_rt: f64,
    confidence: f64,
    sample_id: String,
}

fn sorted(detections: &[DetectionRecord]) -> Vec<&DetectionRecord> {
    let mut v: Vec<&DetectionRecord> = detections.iter().collect();
    v.sort_by(|a, b| {
        a.start_rt
            .total_cmp(&b.start_rt)
            .then(a.sample_id.cmp(&b.sample_id))
            .then(a.label.cmp(&b.label))
    });
    v
}

/// Writes phase-B records ordered by start retention time.
pub fn emit_detections<W: Write>(
    detections: &[DetectionRecord],
    format: DetectionFormat,
    mut writer: W,
) -> Result<()> {
    let ordered = sorted(detections);
    match format {
        DetectionFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(HEADER).map_err(csv_err)?;
            for d in ordered {
                w.write_record([
                    d.label.to_string(),
                    format_real(d.start_rt, 3),
                    format_real(d.end_rt, 3),
                    format_real(d.confidence, 4),
                    d.sample_id.clone(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
        DetectionFormat::Json => {
            let rows: Vec<Row> = ordered
                .into_iter()
                .map(|d| Row {
                    label: d.label.0,
                    start_rt: d.start_rt,
                    end_rt: d.end_rt,
                    confidence: d.confidence,
                    sample_id: d.sample_id.clone(),
                })
                .collect();
            serde_json::to_writer_pretty(&mut writer, &rows)
                .map_err(|e| Error::Format(e.to_string()))?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn parse_detections<R: Read>(reader: R, format: DetectionFormat) -> Result<Vec<DetectionRecord>> {
    let rows: Vec<Row> = match format {
        DetectionFormat::Json => {
            serde_json::from_reader(reader).map_err(|e| Error::Format(e.to_string()))?
        }
        DetectionFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            let headers = rdr.headers().map_err(csv_err)?.clone();
            if headers.iter().collect::<Vec<_>>() != HEADER {
                return Err(Error::parse_at(
                    1,
                    format!("expected header `{}`", HEADER.join(",")),
                ));
            }
            let mut rows = Vec::new();
            let mut errors = Vec::new();
            for rec in rdr.records() {
                match rec.and_then(|r| r.deserialize::<Row>(Some(&headers))) {
                    Ok(row) => rows.push(row),
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line());
                        errors.push(LineError::new(line, e.to_string()));
                    }
                }
            }
            if !errors.is_empty() {
                return Err(Error::Parse(ParseErrors(errors)));
            }
            rows
        }
    };
    rows.into_iter()
        .map(|r| {
            if r.label == 0 || r.start_rt > r.end_rt || !(r.confidence > 0.0 && r.confidence <= 1.0)
            {
                return Err(Error::validation(
                    "detection",
                    format!(
                        "label {} [{}, {}] confidence {}",
                        r.label, r.start_rt, r.end_rt, r.confidence
                    ),
                ));
            }
            Ok(DetectionRecord {
                label: VocLabel(r.label),
                start_rt: r.start_rt,
                end_rt: r.end_rt,
                confidence: r.confidence,
                sample_id: r.sample_id,
            })
        })
        .collect()
}
