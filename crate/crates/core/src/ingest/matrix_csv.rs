use std::io::{Read, Write};

use crate::error::{Error, LineError, ParseErrors, Result};
use crate::matrix::{AbundanceMatrix, RtAxis};

use super::format_real;

const RT_DECIMALS: usize = 6;

fn parse_header(fields: &csv::StringRecord) -> std::result::Result<u32, String> {
    if fields.len() < 2 {
        return Err("header needs an rt column and at least one m/z column".into());
    }
    if fields[0].trim() != "rt" {
        return Err(format!("first header column must be `rt`, got `{}`", &fields[0]));
    }
    let mut first = None;
    for (i, name) in fields.iter().skip(1).enumerate() {
        let mz: u32 = name
            .trim()
            .strip_prefix("mz_")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("header column `{name}` is not of the form mz_<int>"))?;
        let first = *first.get_or_insert(mz);
        if mz != first + i as u32 {
            return Err(format!(
                "m/z columns must be consecutive, `{name}` found at position {}",
                i + 2
            ));
        }
    }
    Ok(first.unwrap())
}

/// Reads a matrix CSV. The sample id and column epoch are left at their
/// defaults; they come from the manifest.
pub fn parse_sample<R: Read>(reader: R) -> Result<AbundanceMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::parse_at(1, e.to_string())),
        None => return Err(Error::parse_at(1, "empty input, expected a header")),
    };
    let first_mz = parse_header(&header).map_err(|m| Error::parse_at(1, m))?;
    let width = header.len();
    let channels = width - 1;

    let mut errors = Vec::new();
    let mut rts = Vec::new();
    let mut data = Vec::new();
    let mut last_rt = f64::NEG_INFINITY;
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(LineError::new(line, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            errors.push(LineError::new(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
            continue;
        }
        let rt = match rec[0].trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                errors.push(LineError::new(line, format!("bad retention time `{}`", &rec[0])));
                continue;
            }
        };
        if rt <= last_rt {
            errors.push(LineError::new(
                line,
                format!("retention time {rt} does not increase (previous {last_rt})"),
            ));
            continue;
        }
        let start = data.len();
        let mut row_ok = true;
        for (c, field) in rec.iter().skip(1).enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => data.push(v),
                Ok(v) => {
                    errors.push(LineError::new(
                        line,
                        format!("intensity {v} in channel {c} is negative or non-finite"),
                    ));
                    row_ok = false;
                    break;
                }
                Err(_) => {
                    errors.push(LineError::new(
                        line,
                        format!("bad intensity `{field}` in channel {c}"),
                    ));
                    row_ok = false;
                    break;
                }
            }
        }
        if !row_ok {
            data.truncate(start);
            continue;
        }
        last_rt = rt;
        rts.push(rt);
    }
    if !errors.is_empty() {
        return Err(Error::Parse(ParseErrors(errors)));
    }
    let axis = RtAxis::new(rts)?;
    Ok(AbundanceMatrix::new(axis, channels, data)?.with_first_mz(first_mz))
}

pub fn emit_sample<W: Write>(m: &AbundanceMatrix, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = Vec::with_capacity(m.channels() + 1);
    header.push("rt".to_string());
    header.extend((0..m.channels()).map(|c| format!("mz_{}", m.first_mz() + c as u32)));
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(m.channels() + 1);
    for (r, rt) in m.axis().values().iter().enumerate() {
        record.clear();
        record.push(format_real(*rt, RT_DECIMALS));
        record.extend(m.row(r).iter().map(|v| format!("{v}")));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(channels: usize) -> String {
        let mut h = String::from("rt");
        for c in 0..channels {
            h.push_str(&format!(",mz_{}", 40 + c));
        }
        h
    }

    fn row(rt: f64, channels: usize, v: f64) -> String {
        let mut s = format!("{rt}");
        for _ in 0..channels {
            s.push_str(&format!(",{v}"));
        }
        s
    }

    #[test]
    fn three_rows_of_411() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            header(411),
            row(0.1, 411, 1.0),
            row(0.2, 411, 2.0),
            row(0.3, 411, 3.5)
        );
        let m = parse_sample(text.as_bytes()).unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.channels(), 411);
        assert_eq!(m.first_mz(), 40);
        assert_eq!(m.row(2)[410], 3.5);
    }

    #[test]
    fn decreasing_rt_reported_at_line_four() {
        let text = format!(
            "{}\n{}\n{}\n{}\n",
            header(2),
            row(0.1, 2, 1.0),
            row(0.3, 2, 1.0),
            row(0.2, 2, 1.0)
        );
        match parse_sample(text.as_bytes()) {
            Err(Error::Parse(errs)) => assert_eq!(errs.first_line(), Some(4)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn every_bad_line_is_reported() {
        let text = format!(
            "{}\n0.1,1,1\n0.2,1\n0.3,-1,0\n0.4,x,0\n0.5,1,1\n",
            header(2)
        );
        match parse_sample(text.as_bytes()) {
            Err(Error::Parse(errs)) => {
                let lines: Vec<u64> = errs.0.iter().map(|e| e.line).collect();
                assert_eq!(lines, vec![3, 4, 5]);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_must_be_consecutive_mz() {
        let text = "rt,mz_40,mz_42\n0.1,1,1\n";
        assert!(parse_sample(text.as_bytes()).is_err());
        let text = "time,mz_40\n0.1,1\n";
        assert!(parse_sample(text.as_bytes()).is_err());
    }
}
