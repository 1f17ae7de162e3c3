//! Trace files: three-column CSV with a header naming one of two layouts.

use std::path::Path;

use num_complex::Complex64;
use spiralres_core::ComplexSpectrum;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `freq_hz, re, im`
    ReIm,
    /// `freq_hz, mag_db, phase_rad`
    MagPhase,
}

impl Layout {
    fn from_header(names: &[String]) -> Option<Self> {
        match names {
            [f, a, b] if f == "freq_hz" && a == "re" && b == "im" => Some(Layout::ReIm),
            [f, a, b] if f == "freq_hz" && a == "mag_db" && b == "phase_rad" => {
                Some(Layout::MagPhase)
            }
            _ => None,
        }
    }

    fn to_complex(self, a: f64, b: f64) -> Complex64 {
        match self {
            Layout::ReIm => Complex64::new(a, b),
            Layout::MagPhase => Complex64::from_polar(10f64.powf(a / 20.0), b),
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::parse(path, line, format!("{other:?}")),
    }
}

/// Reads a trace, converting magnitude/phase rows to complex values and
/// sorting by frequency.
pub fn ingest_trace(path: &Path) -> Result<ComplexSpectrum> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::parse(path, 1, "missing header row"));
    }
    let layout = Layout::from_header(&header).ok_or_else(|| {
        CliError::unit(
            path,
            format!(
                "header [{}] matches neither `freq_hz,re,im` nor `freq_hz,mag_db,phase_rad`",
                header.join(",")
            ),
        )
    })?;

    let mut rows: Vec<(f64, Complex64, usize)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 3 {
            return Err(CliError::parse(
                path,
                line,
                format!("expected 3 columns, found {}", rec.len()),
            ));
        }
        let mut v = [0.0; 3];
        for (i, field) in rec.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| CliError::parse(path, line, format!("`{field}` is not a number")))?;
            if !x.is_finite() {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("non-finite value `{field}`"),
                ));
            }
            v[i] = x;
        }
        rows.push((v[0], layout.to_complex(v[1], v[2]), line));
    }
    if rows.is_empty() {
        return Err(CliError::parse(path, 2, "no data rows"));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(CliError::parse(
            path,
            w[1].2,
            format!("duplicate frequency {}", w[1].0),
        ));
    }
    let (freqs, values): (Vec<f64>, Vec<Complex64>) =
        rows.into_iter().map(|(f, z, _)| (f, z)).unzip();
    Ok(ComplexSpectrum::new(freqs, values)?)
}

/// Writes a trace in the `freq_hz, re, im` layout. Numbers use the shortest
/// representation that parses back to the same bits.
pub fn write_trace(path: &Path, spec: &ComplexSpectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let io = |e: csv::Error| csv_error(path, e);
    w.write_record(["freq_hz", "re", "im"]).map_err(io)?;
    for (f, z) in spec.frequencies().iter().zip(spec.values()) {
        w.write_record([
            format!("{f:e}"),
            format!("{:e}", z.re),
            format!("{:e}", z.im),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
