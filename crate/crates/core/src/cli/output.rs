//! CSV and JSON artifacts. Reals in CSV use 17 significant digits; JSON uses
//! the shortest representation that round-trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{Histogram, HitRecord, SweepConfig};
use crate::theory::family_f;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_hits_csv(path: &Path, hits: &[HitRecord]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "repetition,h_i,y,t_hit,branch").map_err(io(path))?;
    for h in hits {
        writeln!(w, "{},{},{},{},{}", h.repetition_index, real(h.h_i), real(h.y), real(h.t_hit), h.branch)
            .map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

/// `fitted_density` is the family density with parameter `a` at the bin centre.
pub fn write_histogram_csv(path: &Path, hist: &Histogram, a: Option<f64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "bin_left,bin_right,count,density,fitted_density").map_err(io(path))?;
    for i in 0..hist.bins() {
        let (l, r) = hist.edges(i);
        let fitted = a.map_or(f64::NAN, |a| family_f(hist.center(i), a));
        writeln!(w, "{},{},{},{},{}", real(l), real(r), hist.counts[i], real(hist.density(i)), real(fitted))
            .map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(io(path))?;
    w.flush().map_err(io(path))
}

pub fn write_table_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}").map_err(io(path))?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

#[derive(Debug, Clone, Serialize)]
pub struct Platform {
    pub arch: &'static str,
    pub os: &'static str,
    pub optimized: bool,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub command: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub master_seed: u64,
    pub config: SweepConfig,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
    pub platform: Platform,
}

impl RunManifest {
    pub fn new(command: &str, config: &SweepConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            master_seed: config.master_seed,
            config: *config,
            extra: serde_json::Value::Null,
            platform: Platform {
                arch: std::env::consts::ARCH,
                os: std::env::consts::OS,
                optimized: !cfg!(debug_assertions),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 4.956e16, 1e-300, f64::MIN_POSITIVE, 5e-324] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(real(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn hits_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hits.csv");
        let hits = [HitRecord { repetition_index: 3, h_i: 1e-4, y: 0.25, t_hit: 17.5, branch: -1 }];
        write_hits_csv(&path, &hits).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "repetition,h_i,y,t_hit,branch");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "3");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.25);
        assert_eq!(fields[4], "-1");
    }
}
