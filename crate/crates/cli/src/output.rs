//! CSV files and sample layouts.
//!
//! Every file starts with two comment lines, `# cmps <version>` and
//! `# config-sha256 <hash>`, followed by the column header. Floats are
//! written with 17 significant digits.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cmps_core::observables::{EntanglementData, Profile};
use cmps_core::optimize::TraceRecord;

use crate::error::CliError;

pub fn float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Interior cut positions from a specification:
/// `chebyshev:N` gives `x_k = L(1 − cos(πk/N))/2` for `0 < k < N`,
/// `uniform:N` gives `N` evenly spaced interior points, and a comma
/// separated list gives explicit positions.
pub fn parse_cuts(spec: &str, length: f64) -> Result<Vec<f64>, String> {
    let count = |n: &str| {
        n.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad count in cut spec `{spec}`"))
    };
    let cuts: Vec<f64> = if let Some(n) = spec.strip_prefix("chebyshev:") {
        let n = count(n)?;
        (1..n)
            .map(|k| length * (1.0 - (PI * k as f64 / n as f64).cos()) / 2.0)
            .collect()
    } else if let Some(n) = spec.strip_prefix("uniform:") {
        let n = count(n)?;
        (1..=n).map(|k| length * k as f64 / (n + 1) as f64).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad cut position `{s}`")))
            .collect::<Result<_, _>>()?
    };
    if cuts.is_empty() {
        return Err(format!("cut spec `{spec}` selects no positions"));
    }
    if let Some(x) = cuts.iter().find(|&&x| !(x > 0.0 && x < length)) {
        return Err(format!("cut {x} outside the open interval (0, {length})"));
    }
    Ok(cuts)
}

/// `n` evenly spaced positions on `[0, L]`, walls included.
pub fn sample_positions(n: usize, length: f64) -> Vec<f64> {
    (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect()
}

/// Identifies the producing build and configuration.
#[derive(Debug, Clone)]
pub struct Header {
    pub config_sha256: String,
}

impl Header {
    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# cmps {}", crate::VERSION)?;
        writeln!(w, "# config-sha256 {}", self.config_sha256)
    }
}

/// A CSV file written row by row.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &Header, columns: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        let io = |e| CliError::io(path, e);
        header.write(&mut w.out).map_err(io)?;
        writeln!(w.out, "{}", columns.join(",")).map_err(io)?;
        Ok(w)
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        writeln!(self.out, "{}", cells.join(",")).map_err(|e| CliError::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn trace_row(r: &TraceRecord) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        float(r.energy),
        float(r.gradient_norm),
        float(r.step),
        r.max_taylor_order.to_string(),
        float(r.seconds),
    ]
}

pub fn write_profile(path: &Path, header: &Header, profile: &Profile) -> Result<(), CliError> {
    let mut w = CsvWriter::create(path, header, &Profile::COLUMNS)?;
    for i in 0..profile.len() {
        w.row(&profile.row(i).map(float))?;
    }
    w.flush()
}

pub fn entanglement_columns(dim: usize) -> Vec<String> {
    let mut cols = vec!["x".to_string(), "entropy".to_string()];
    cols.extend((1..=dim).map(|i| format!("lambda_{i}")));
    cols
}

pub fn write_entanglement(path: &Path, header: &Header, dim: usize, data: &EntanglementData) -> Result<(), CliError> {
    let cols = entanglement_columns(dim);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(path, header, &cols)?;
    for ((x, s), weights) in data.cuts.iter().zip(&data.entropy).zip(&data.weights) {
        let mut cells = vec![float(*x), float(*s)];
        cells.extend((0..dim).map(|i| float(weights.get(i).copied().unwrap_or(0.0))));
        w.row(&cells)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_cuts_follow_the_cosine_layout() {
        let cuts = parse_cuts("chebyshev:300", 1.0).unwrap();
        assert_eq!(cuts.len(), 299);
        for (i, x) in cuts.iter().enumerate() {
            let k = (i + 1) as f64;
            assert_eq!(*x, (1.0 - (PI * k / 300.0).cos()) / 2.0);
        }
    }

    #[test]
    fn explicit_and_uniform_cuts() {
        assert_eq!(parse_cuts("0.25, 0.5", 1.0).unwrap(), vec![0.25, 0.5]);
        assert_eq!(parse_cuts("uniform:3", 2.0).unwrap(), vec![0.5, 1.0, 1.5]);
        assert!(parse_cuts("0.0,0.5", 1.0).is_err());
        assert!(parse_cuts("chebyshev:x", 1.0).is_err());
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let x = 0.1_f64 + 0.2;
        assert_eq!(float(x).parse::<f64>().unwrap(), x);
        assert_eq!(float(-594.45), "-5.9445000000000005e2");
    }
}
