//! Log-magnitude spectrogram export as CSV and binary PGM.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::beamformer::MAGNITUDE_FLOOR;
use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

/// Value of a silent bin, `20 log10(1e-9)`.
pub const DB_FLOOR: f64 = -180.0;
/// Dynamic range mapped onto the 8-bit gray scale.
const IMAGE_RANGE_DB: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Pgm,
    #[default]
    Both,
}

/// `20 log10(|Y| + 1e-9)`, frames by bins.
pub fn log_magnitude_db(spec: &Spectrogram) -> Array2<f64> {
    spec.data().mapv(|c| 20.0 * (c.norm() + MAGNITUDE_FLOOR).log10())
}

/// One row per frame, one column per bin, values in shortest round-trip form.
pub fn write_csv(path: impl AsRef<Path>, values: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for row in values.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(|e| Error::format(path, e))?;
    let (mut data, mut cols, mut rows) = (Vec::new(), None, 0);
    for record in r.records() {
        let record = record.map_err(|e| Error::format(path, e))?;
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::format(path, format!("row {rows} has {} columns", record.len())));
        }
        for field in &record {
            data.push(field.trim().parse::<f64>().map_err(|e| Error::format(path, format!("row {rows}: {e}")))?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data).map_err(|e| Error::format(path, e))
}

/// Binary PGM with time running left to right and frequency bottom to top.
/// The top `IMAGE_RANGE_DB` below the maximum span the gray scale.
pub fn write_pgm(path: impl AsRef<Path>, values: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let (frames, bins) = values.dim();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = max - IMAGE_RANGE_DB;
    let mut bytes = format!("P5\n{frames} {bins}\n255\n").into_bytes();
    for k in (0..bins).rev() {
        for t in 0..frames {
            let v = ((values[[t, k]] - lo) / IMAGE_RANGE_DB).clamp(0.0, 1.0);
            bytes.push((v * 255.0).round() as u8);
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Writes `<prefix>.csv` and/or `<prefix>.pgm` and returns the written paths.
pub fn spectrogram_export(spec: &Spectrogram, prefix: impl AsRef<Path>, format: ExportFormat) -> Result<Vec<PathBuf>> {
    let values = log_magnitude_db(spec);
    let prefix = prefix.as_ref();
    let mut written = Vec::new();
    if matches!(format, ExportFormat::Csv | ExportFormat::Both) {
        let p = prefix.with_extension("csv");
        write_csv(&p, &values)?;
        written.push(p);
    }
    if matches!(format, ExportFormat::Pgm | ExportFormat::Both) {
        let p = prefix.with_extension("pgm");
        write_pgm(&p, &values)?;
        written.push(p);
    }
    Ok(written)
}
