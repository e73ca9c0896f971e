//! Round logs as JSON lines and final models as a binary blob: a little-endian
//! `u64` dimension followed by that many little-endian `f64` values.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DriftStats, RoundRecord};
use crate::error::{Error, Result};
use crate::kernel::ParamVector;

/// Per-round summary written to the JSON-lines log. Contains no timing, so
/// logs from replays are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub k: usize,
    pub beta: f64,
    pub t_k: usize,
    pub active: Vec<usize>,
    pub stationarity: Vec<(usize, f64)>,
    pub drift: Vec<DriftStats>,
    pub server_norm: f64,
}

impl From<&RoundRecord> for RoundLog {
    fn from(r: &RoundRecord) -> Self {
        Self {
            k: r.round,
            beta: r.beta,
            t_k: r.report_index,
            active: r.active.clone(),
            stationarity: r.stationarity.clone(),
            drift: r.drift.clone(),
            server_norm: r.server_model.norm(),
        }
    }
}

pub struct RoundLogWriter<W: Write> {
    out: W,
}

impl RoundLogWriter<BufWriter<fs::File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self::new(BufWriter::new(fs::File::create(path)?)))
    }
}

impl<W: Write> RoundLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &RoundRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, &RoundLog::from(record))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_model_blob(path: &Path, w: &ParamVector) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 8 * w.dim());
    buf.extend_from_slice(&(w.dim() as u64).to_le_bytes());
    for x in w.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_model_blob(path: &Path) -> Result<ParamVector> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let header: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| Error::Format("model blob shorter than its header".into()))?;
    let dim = u64::from_le_bytes(header) as usize;
    let body = &bytes[8..];
    if body.len() != dim * 8 {
        return Err(Error::Format(format!(
            "model blob declares {dim} values but holds {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ParamVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.bin");
        let w = ParamVector::new(vec![1.5, -0.25, 3.0e-300]).unwrap();
        write_model_blob(&p, &w).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(read_model_blob(&p).unwrap(), w);
        fs::write(&p, &bytes[..20]).unwrap();
        assert!(read_model_blob(&p).is_err());
    }
}
