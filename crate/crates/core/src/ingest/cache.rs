//! Binary cache for prepared datasets.
//!
//! Little-endian layout:
//!
//! ```text
//! magic     8 bytes  "VOCDS001"
//! delta     u32
//! channels  u32
//! count     u64
//! count x point:
//!   label    u16
//!   anchor   u64
//!   shift    i32
//!   variant  u32
//!   sid_len  u32, then sid_len bytes of UTF-8 sample id
//!   normalized u8
//!   delta f64 retention times
//!   delta * channels f64 values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::{DataPoint, LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::matrix::VocLabel;

pub const MAGIC: &[u8; 8] = b"VOCDS001";

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Streams points into the cache; `count` must match the points written.
pub struct CacheWriter<W: Write> {
    inner: W,
    delta: usize,
    channels: usize,
    remaining: u64,
}

impl<W: Write> CacheWriter<W> {
    pub fn new(mut inner: W, delta: usize, channels: usize, count: u64) -> Result<Self> {
        inner.write_all(MAGIC)?;
        inner.write_all(&(delta as u32).to_le_bytes())?;
        inner.write_all(&(channels as u32).to_le_bytes())?;
        inner.write_all(&count.to_le_bytes())?;
        Ok(Self {
            inner,
            delta,
            channels,
            remaining: count,
        })
    }

    pub fn push(&mut self, p: &DataPoint) -> Result<()> {
        if self.remaining == 0 {
            return Err(Error::Format("more points than declared".into()));
        }
        if p.delta() != self.delta || p.channels != self.channels {
            return Err(Error::Format(format!(
                "point is {}x{}, cache holds {}x{}",
                p.delta(),
                p.channels,
                self.delta,
                self.channels
            )));
        }
        let w = &mut self.inner;
        w.write_all(&p.label.0.to_le_bytes())?;
        w.write_all(&(p.provenance.anchor as u64).to_le_bytes())?;
        w.write_all(&p.provenance.shift.to_le_bytes())?;
        w.write_all(&p.provenance.variant.to_le_bytes())?;
        let sid = p.provenance.sample_id.as_bytes();
        w.write_all(&(sid.len() as u32).to_le_bytes())?;
        w.write_all(sid)?;
        w.write_all(&[p.normalized as u8])?;
        put_f64s(w, &p.rts)?;
        put_f64s(w, &p.values)?;
        self.remaining -= 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.remaining != 0 {
            return Err(Error::Format(format!(
                "{} declared points were not written",
                self.remaining
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated dataset cache".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn take_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| take::<8, _>(r).map(f64::from_le_bytes)).collect()
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<LabeledDataset> {
    let magic = take::<8, _>(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a dataset cache (bad magic)".into()));
    }
    let delta = u32::from_le_bytes(take(&mut r)?) as usize;
    let channels = u32::from_le_bytes(take(&mut r)?) as usize;
    let count = u64::from_le_bytes(take(&mut r)?);
    let mut points = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let label = VocLabel(u16::from_le_bytes(take(&mut r)?));
        let anchor = u64::from_le_bytes(take(&mut r)?) as usize;
        let shift = i32::from_le_bytes(take(&mut r)?);
        let variant = u32::from_le_bytes(take(&mut r)?);
        let len = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut sid = vec![0u8; len];
        r.read_exact(&mut sid)
            .map_err(|_| Error::Format("truncated dataset cache".into()))?;
        let sample_id =
            String::from_utf8(sid).map_err(|_| Error::Format("sample id is not UTF-8".into()))?;
        let normalized = take::<1, _>(&mut r)?[0] != 0;
        let rts = take_f64s(&mut r, delta)?;
        let values = take_f64s(&mut r, delta * channels)?;
        points.push(DataPoint {
            values,
            rts,
            channels,
            label,
            provenance: Provenance {
                sample_id,
                anchor,
                shift,
                variant,
            },
            normalized,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after dataset cache".into()));
    }
    Ok(LabeledDataset::new(points))
}

pub fn write_dataset<W: Write>(ds: &LabeledDataset, w: W) -> Result<()> {
    let (delta, channels) = ds
        .points
        .first()
        .map_or((0, 0), |p| (p.delta(), p.channels));
    let mut cw = CacheWriter::new(w, delta, channels, ds.len() as u64)?;
    for p in &ds.points {
        cw.push(p)?;
    }
    cw.finish()?;
    Ok(())
}

pub fn write_dataset_file(path: &Path, ds: &LabeledDataset) -> Result<()> {
    write_dataset(ds, BufWriter::new(File::create(path)?))
}

pub fn read_dataset_file(path: &Path) -> Result<LabeledDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(label: u16, shift: i32) -> DataPoint {
        DataPoint {
            values: (0..12).map(|i| i as f64 * 0.25 + shift as f64).collect(),
            rts: vec![1.0, 1.1, 1.2, 1.3],
            channels: 3,
            label: VocLabel(label),
            provenance: Provenance {
                sample_id: "Tr-07".into(),
                anchor: 120,
                shift,
                variant: 2,
            },
            normalized: false,
        }
    }

    #[test]
    fn round_trip() {
        let ds = LabeledDataset::new(vec![point(0, 0), point(3, -9), point(3, 10)]);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_round_trip() {
        let mut buf = Vec::new();
        write_dataset(&LabeledDataset::default(), &mut buf).unwrap();
        assert!(read_dataset(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn corrupt_input() {
        let ds = LabeledDataset::new(vec![point(1, 0)]);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert!(matches!(
            read_dataset(&buf[..buf.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_dataset(bad.as_slice()).is_err());
        buf.push(0);
        assert!(read_dataset(buf.as_slice()).is_err());
    }
}
