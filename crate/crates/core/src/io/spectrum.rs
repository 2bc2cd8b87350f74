//! CSV spectra and plot series.
//!
//! Accepted headers: `freq_hz,re,im[,sigma]` or `freq_hz,mag[,phase_deg][,sigma]`.
//! Numbers are written with 17 significant digits so a write/read cycle is
//! lossless.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::extraction::{RealSeries, S11Data};

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumValues {
    Complex(Vec<Complex64>),
    Magnitude { mag: Vec<f64>, phase_deg: Option<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub freq_hz: Vec<f64>,
    pub values: SpectrumValues,
    pub sigma: Option<Vec<f64>>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        match &self.values {
            SpectrumValues::Complex(z) => z.iter().map(|z| z.norm()).collect(),
            SpectrumValues::Magnitude { mag, .. } => mag.clone(),
        }
    }

    pub fn to_real_series(&self) -> RealSeries {
        RealSeries {
            x: self.freq_hz.clone(),
            y: self.magnitudes(),
            sigma: self.sigma.clone(),
        }
    }

    /// Complex data stay complex; a magnitude with phase is promoted.
    pub fn to_s11_data(&self) -> S11Data {
        match &self.values {
            SpectrumValues::Complex(z) => S11Data::Complex {
                freq_hz: self.freq_hz.clone(),
                value: z.clone(),
                sigma: self.sigma.clone(),
            },
            SpectrumValues::Magnitude { mag, phase_deg: Some(ph) } => S11Data::Complex {
                freq_hz: self.freq_hz.clone(),
                value: mag
                    .iter()
                    .zip(ph)
                    .map(|(&m, &p)| Complex64::from_polar(m, p.to_radians()))
                    .collect(),
                sigma: self.sigma.clone(),
            },
            SpectrumValues::Magnitude { .. } => S11Data::Magnitude(self.to_real_series()),
        }
    }
}

/// A table of named numeric columns read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Read a numeric CSV with a header line. Rows are numbered from 1 after the
/// header in error messages.
pub fn read_table<R: Read>(reader: R, path: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Row { path: path.into(), row: 0, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Row { path: path.into(), row: 0, message: "missing header".into() });
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { path: path.into(), row, message: e.to_string() })?;
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Row {
                path: path.into(),
                row,
                message: format!("column `{}`: `{cell}` is not a number", headers[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Row {
                    path: path.into(),
                    row,
                    message: format!("column `{}` is not finite", headers[k]),
                });
            }
            columns[k].push(v);
        }
    }
    Ok(Table { headers, columns })
}

fn layout_error(path: &str, headers: &[String]) -> Error {
    Error::Row {
        path: path.into(),
        row: 0,
        message: format!(
            "header {headers:?} is not `freq_hz,re,im[,sigma]` or `freq_hz,mag[,phase_deg][,sigma]`"
        ),
    }
}

pub fn parse_spectrum<R: Read>(reader: R, path: &str) -> Result<ComplexSpectrum> {
    let t = read_table(reader, path)?;
    let h: Vec<&str> = t.headers.iter().map(String::as_str).collect();
    let complex = match h.as_slice() {
        ["freq_hz", "re", "im"] | ["freq_hz", "re", "im", "sigma"] => true,
        ["freq_hz", "mag"] | ["freq_hz", "mag", "phase_deg"] | ["freq_hz", "mag", "sigma"] | ["freq_hz", "mag", "phase_deg", "sigma"] => false,
        _ => return Err(layout_error(path, &t.headers)),
    };
    let freq = t.columns[0].clone();
    for i in 1..freq.len() {
        if freq[i] <= freq[i - 1] {
            return Err(Error::Row {
                path: path.into(),
                row: i + 1,
                message: format!(
                    "frequencies must be strictly increasing ({} after {})",
                    freq[i],
                    freq[i - 1]
                ),
            });
        }
    }
    let sigma = t.column("sigma").map(<[f64]>::to_vec);
    if let Some(s) = &sigma {
        if let Some(i) = s.iter().position(|&v| v <= 0.0) {
            return Err(Error::Row { path: path.into(), row: i + 1, message: "sigma must be > 0".into() });
        }
    }
    let values = if complex {
        let (re, im) = (&t.columns[1], &t.columns[2]);
        SpectrumValues::Complex(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
    } else {
        SpectrumValues::Magnitude {
            mag: t.columns[1].clone(),
            phase_deg: t.column("phase_deg").map(<[f64]>::to_vec),
        }
    };
    Ok(ComplexSpectrum { freq_hz: freq, values, sigma })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn load_spectrum(path: &Path) -> Result<ComplexSpectrum> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    parse_spectrum(f, &path.display().to_string())
}

pub fn load_table(path: &Path) -> Result<Table> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_table(f, &path.display().to_string())
}

/// Scientific notation with 17 significant digits; parses back to the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render_spectrum(s: &ComplexSpectrum) -> String {
    let mut headers = vec!["freq_hz"];
    let mut cols: Vec<Vec<f64>> = vec![s.freq_hz.clone()];
    match &s.values {
        SpectrumValues::Complex(z) => {
            headers.extend(["re", "im"]);
            cols.push(z.iter().map(|z| z.re).collect());
            cols.push(z.iter().map(|z| z.im).collect());
        }
        SpectrumValues::Magnitude { mag, phase_deg } => {
            headers.push("mag");
            cols.push(mag.clone());
            if let Some(p) = phase_deg {
                headers.push("phase_deg");
                cols.push(p.clone());
            }
        }
    }
    if let Some(sig) = &s.sigma {
        headers.push("sigma");
        cols.push(sig.clone());
    }
    render_columns(&headers, &cols)
}

pub fn render_columns(headers: &[&str], cols: &[Vec<f64>]) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    let n = cols.first().map_or(0, Vec::len);
    for i in 0..n {
        let row: Vec<String> = cols.iter().map(|c| fmt_f64(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Write via a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn write_spectrum(path: &Path, s: &ComplexSpectrum) -> Result<()> {
    write_atomic(path, &render_spectrum(s))
}
