use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// A file written incrementally and moved into place by [`AtomicFile::commit`].
/// Dropping it uncommitted removes the temporary file.
pub struct AtomicFile {
    path: PathBuf,
    tmp: PathBuf,
    out: Option<BufWriter<fs::File>>,
}

impl AtomicFile {
    pub fn create(path: &Path) -> io::Result<Self> {
        let tmp = tmp_path(path);
        let out = BufWriter::new(fs::File::create(&tmp)?);
        Ok(Self {
            path: path.to_path_buf(),
            tmp,
            out: Some(out),
        })
    }

    pub fn commit(mut self) -> io::Result<()> {
        let out = self.out.take().expect("not yet committed");
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&self.tmp, &self.path)
    }
}

impl Write for AtomicFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.out.as_mut().expect("not yet committed").write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.as_mut().expect("not yet committed").flush()
    }
}

impl Drop for AtomicFile {
    fn drop(&mut self) {
        if self.out.is_some() {
            let _ = fs::remove_file(&self.tmp);
        }
    }
}

/// Sample mean and the half-width of its two-sided 95% Student-t interval.
/// A single value has half-width zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub count: usize,
}

pub fn mean_ci95(values: &[f64]) -> MeanCi {
    let n = values.len();
    if n == 0 {
        return MeanCi {
            mean: f64::NAN,
            half_width: f64::NAN,
            count: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanCi {
            mean,
            half_width: 0.0,
            count: 1,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    MeanCi {
        mean,
        half_width: t * (var / n as f64).sqrt(),
        count: n,
    }
}

/// One row of a comparison summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub loss: MeanCi,
    pub accuracy: Option<MeanCi>,
    pub per_seed_loss: Vec<f64>,
    pub per_seed_accuracy: Option<Vec<f64>>,
}

pub fn render_summary(rows: &[ArmSummary]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<16}  {:>26}  {:>22}",
        "algorithm", "personalized loss", "personalized acc (%)"
    )
    .expect("string write");
    for r in rows {
        let acc = r.accuracy.map_or_else(
            || "-".to_string(),
            |a| format!("{:.2} ± {:.2}", 100.0 * a.mean, 100.0 * a.half_width),
        );
        writeln!(
            out,
            "{:<16}  {:>26}  {:>22}",
            r.arm,
            format!("{:.6} ± {:.6}", r.loss.mean, r.loss.half_width),
            acc
        )
        .expect("string write");
    }
    out
}
