//! Sweep tables as CSV with 12 significant digits.

use std::io::{self, Write};

use thiserror::Error;

use crate::solver::Sweep;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Column names for a device with `shunts` shunts.
pub fn sweep_header(shunts: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "I_A",
        "F_g_A",
        "B_g_T",
        "kappa_T_per_A",
        "phi_g_Wb",
        "phi_m_Wb",
        "phi_leak_Wb",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=shunts).map(|k| format!("phi_s{k}_Wb")));
    cols
}

fn fmt(x: f64) -> String {
    // avoid printing -0
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// Write `sweep` one row per grid point in ascending current.
pub fn write_sweep_csv<W: Write>(sweep: &Sweep, mut out: W) -> io::Result<()> {
    let shunts = sweep.points.first().map_or(0, |p| p.shunts.len());
    writeln!(out, "{}", sweep_header(shunts).join(","))?;
    for (p, k) in sweep.points.iter().zip(&sweep.kappa) {
        let mut row = vec![
            fmt(p.current),
            fmt(p.gap_mmf),
            fmt(p.gap_flux_density),
            fmt(*k),
            fmt(p.gap_flux),
            fmt(p.magnet_flux),
            fmt(p.leakage_flux),
        ];
        row.extend(p.shunts.iter().map(|s| fmt(s.flux)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// A CSV table read back as numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Parse a numeric CSV table with a header row.
pub fn read_csv(text: &str) -> Result<CsvTable, CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or(CsvError::Format {
        line: 1,
        message: "empty file".into(),
    })?;
    let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CsvError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
        if row.len() != header.len() {
            return Err(CsvError::Format {
                line: i + 1,
                message: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}
