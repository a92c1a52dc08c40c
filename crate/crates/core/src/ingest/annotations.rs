use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, LineError, ParseErrors, Result};
use crate::matrix::{GroundTruthAnnotation, VocLabel};

use super::format_real;
use super::matrix_csv::csv_err;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    sample_id: String,
    label: u16,
    start_rt: f64,
    peak_rt: f64,
    end_rt: f64,
}

/// Reads `sample_id,label,start_rt,peak_rt,end_rt` rows, validating each.
pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<GroundTruthAnnotation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let expected = ["sample_id", "label", "start_rt", "peak_rt", "end_rt"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse_at(
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(LineError::new(line, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = rec
            .deserialize::<Row>(Some(&headers))
            .map_err(|e| e.to_string())
            .and_then(|row| {
                GroundTruthAnnotation::new(
                    row.sample_id,
                    VocLabel(row.label),
                    row.start_rt,
                    row.peak_rt,
                    row.end_rt,
                )
                .map_err(|e| e.to_string())
            });
        match parsed {
            Ok(a) => out.push(a),
            Err(msg) => errors.push(LineError::new(line, msg)),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Parse(ParseErrors(errors)));
    }
    Ok(out)
}

pub fn emit_annotations<W: Write>(anns: &[GroundTruthAnnotation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample_id", "label", "start_rt", "peak_rt", "end_rt"])
        .map_err(csv_err)?;
    for a in anns {
        w.write_record([
            a.sample_id.clone(),
            a.label.to_string(),
            format_real(a.start_rt, 3),
            format_real(a.peak_rt, 3),
            format_real(a.end_rt, 3),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
