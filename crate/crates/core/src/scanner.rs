//! Sliding-window classification of a whole sample.

use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierModel, Classification};
use crate::error::{Error, Result};
use crate::ingest::format_real;
use crate::matrix::{AbundanceMatrix, VocLabel};

/// Label and confidence of every window `0..N`, `N = R - delta + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub sample_id: String,
    pub delta: usize,
    pub labels: Vec<VocLabel>,
    pub confidences: Vec<f64>,
    /// Retention time of each window's middle row.
    pub rts: Vec<f64>,
}

impl ScanResult {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    /// Worker threads; 1 scans on the calling thread.
    pub workers: usize,
    /// Windows per unit of work.
    pub chunk: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            chunk: 1024,
        }
    }
}

fn check<M: ClassifierModel + ?Sized>(a: &AbundanceMatrix, model: &M, delta: usize) -> Result<usize> {
    let meta = model.meta();
    if meta.delta != delta || meta.channels != a.channels() {
        return Err(Error::Contract(format!(
            "model takes {} x {} windows, scan asked for {delta} x {}",
            meta.delta,
            meta.channels,
            a.channels()
        )));
    }
    if a.rows() < delta {
        return Err(Error::Bounds {
            start: 0,
            delta,
            rows: a.rows(),
        });
    }
    Ok(a.window_count(delta))
}

fn chunks(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n).step_by(chunk).map(|s| s..(s + chunk).min(n)).collect()
}

fn assemble(
    a: &AbundanceMatrix,
    delta: usize,
    parts: Vec<Result<Vec<crate::classifier::ProbVector>>>,
) -> Result<ScanResult> {
    let n = a.window_count(delta);
    let mut labels = Vec::with_capacity(n);
    let mut confidences = Vec::with_capacity(n);
    for part in parts {
        for p in part? {
            let c = Classification::from(p);
            labels.push(c.label);
            confidences.push(c.confidence);
        }
    }
    let rts = (0..n)
        .map(|s| a.rt_of_window(s, delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        sample_id: a.sample_id().to_string(),
        delta,
        labels,
        confidences,
        rts,
    })
}

/// Classifies every window of `a` in order on the calling thread.
pub fn scan<M: ClassifierModel + ?Sized>(a: &AbundanceMatrix, model: &M, delta: usize) -> Result<ScanResult> {
    let n = check(a, model, delta)?;
    let parts = chunks(n, ScanOptions::default().chunk)
        .into_iter()
        .map(|r| model.predict_windows(a, r))
        .collect();
    assemble(a, delta, parts)
}

/// Same result as [`scan`], with chunks of windows spread over `opts.workers` threads.
pub fn scan_with<M: ClassifierModel + ?Sized>(
    a: &AbundanceMatrix,
    model: &M,
    delta: usize,
    opts: ScanOptions,
) -> Result<ScanResult> {
    let n = check(a, model, delta)?;
    let ranges = chunks(n, opts.chunk);
    if opts.workers <= 1 {
        let parts = ranges.into_iter().map(|r| model.predict_windows(a, r)).collect();
        return assemble(a, delta, parts);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let parts = pool.install(|| {
        ranges
            .into_par_iter()
            .map(|r| model.predict_windows(a, r))
            .collect::<Vec<_>>()
    });
    assemble(a, delta, parts)
}

/// Debug dump with header `index,rt,label,confidence`.
pub fn write_scan_csv<W: Write>(scan: &ScanResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(e.to_string());
    out.write_record(["index", "rt", "label", "confidence"]).map_err(err)?;
    for i in 0..scan.len() {
        out.write_record([
            i.to_string(),
            format_real(scan.rts[i], 3),
            scan.labels[i].0.to_string(),
            format_real(scan.confidences[i], 4),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}
