//! On-disk formats: CSV matrices, JSON metadata, surrogate files and
//! heatmaps.
//!
//! Floats are written in the shortest exponent form that parses back to the
//! same value, so files round-trip exactly and are byte-stable.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use reram_dse_core::dse::{ExplorationResult, Heatmap, Metric};
use reram_dse_core::surrogate::SurrogateModel;
use reram_dse_core::testbench::CharacterizationResult;
use reram_dse_core::{Fingerprint, Grid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Shortest round-trip text for a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes a headerless row-major matrix.
pub fn write_grid(path: &Path, g: &Grid) -> Result<()> {
    let rows = (0..g.rows()).map(|i| g.row(i).iter().map(|&v| fmt_f64(v)).collect());
    write_file(path, &csv_bytes(rows))
}

/// Reads a matrix written by [`write_grid`].
pub fn read_grid(path: &Path) -> Result<Grid> {
    let text = read_file(path)?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(CliError::parse(path, format!("row {rows} has {} columns", rec.len())));
        }
        for field in &rec {
            data.push(field.trim().parse::<f64>().map_err(|e| CliError::parse(path, format!("row {rows}: {e}")))?);
        }
        rows += 1;
    }
    Grid::from_row_major(rows, cols.unwrap_or(0), data).ok_or_else(|| CliError::parse(path, "ragged matrix"))
}

/// Writes one value per line.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_file(path, &csv_bytes(v.iter().map(|&x| vec![fmt_f64(x)])))
}

/// Metadata stored next to each characterization's matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterizationMeta {
    /// Array size.
    pub n: usize,
    /// Settings hash excluding `n`.
    pub physics_fingerprint: Fingerprint,
    /// Physics plus `n` and resolutions.
    pub run_fingerprint: Fingerprint,
    /// Resolutions with an `rmse_b<bits>.csv` file.
    pub bits: Vec<u32>,
    /// `Σ G_eff` (S).
    pub cumulative_conductance: f64,
    /// Normalization current (A).
    pub reference_peak: f64,
    /// ADC full scale (A).
    pub full_scale: f64,
    /// Triangle amplitude (V).
    pub v_peak: f64,
    /// `G_eff` extraction voltage (V).
    pub v_geff: f64,
    /// Clamped samples per resolution.
    pub clamp_counts: BTreeMap<u32, usize>,
    /// Config text that produced the result.
    pub config: String,
}

/// Matrix file names inside a characterization directory.
pub fn rmse_file(bits: Option<u32>) -> String {
    match bits {
        Some(b) => format!("rmse_b{b}.csv"),
        None => "rmse_analog.csv".into(),
    }
}

/// Writes `meta.json`, `geff.csv`, `rmse_analog.csv` and one
/// `rmse_b<bits>.csv` per resolution.
pub fn write_characterization(dir: &Path, r: &CharacterizationResult, run_fingerprint: Fingerprint, config: &str) -> Result<()> {
    write_grid(&dir.join("geff.csv"), &r.geff)?;
    write_grid(&dir.join(rmse_file(None)), &r.rmse_analog)?;
    for (&b, m) in &r.rmse_by_bits {
        write_grid(&dir.join(rmse_file(Some(b))), m)?;
    }
    let meta = CharacterizationMeta {
        n: r.n,
        physics_fingerprint: r.physics_fingerprint,
        run_fingerprint,
        bits: r.rmse_by_bits.keys().copied().collect(),
        cumulative_conductance: r.cumulative_conductance,
        reference_peak: r.reference_peak,
        full_scale: r.full_scale,
        v_peak: r.v_peak,
        v_geff: r.v_geff,
        clamp_counts: r.clamp_counts.clone(),
        config: config.to_owned(),
    };
    // Metadata goes last so that a directory with meta.json is complete.
    write_file(&dir.join("meta.json"), &json_bytes(&meta))
}

/// Reads only `meta.json`.
pub fn read_meta(dir: &Path) -> Result<CharacterizationMeta> {
    let path = dir.join("meta.json");
    serde_json::from_str(&read_file(&path)?).map_err(|e| CliError::parse(path, e))
}

/// Reads a directory written by [`write_characterization`].
pub fn read_characterization(dir: &Path) -> Result<(CharacterizationMeta, CharacterizationResult)> {
    let meta = read_meta(dir)?;
    let geff = read_grid(&dir.join("geff.csv"))?;
    let rmse_analog = read_grid(&dir.join(rmse_file(None)))?;
    let mut rmse_by_bits = BTreeMap::new();
    for &b in &meta.bits {
        rmse_by_bits.insert(b, read_grid(&dir.join(rmse_file(Some(b))))?);
    }
    for (name, g) in [("geff.csv", &geff), ("rmse_analog.csv", &rmse_analog)] {
        if g.rows() != meta.n || g.cols() != meta.n {
            return Err(CliError::parse(dir.join(name), format!("expected {n}x{n}", n = meta.n)));
        }
    }
    let result = CharacterizationResult {
        n: meta.n,
        geff,
        rmse_analog,
        rmse_by_bits,
        cumulative_conductance: meta.cumulative_conductance,
        reference_peak: meta.reference_peak,
        full_scale: meta.full_scale,
        v_peak: meta.v_peak,
        v_geff: meta.v_geff,
        clamp_counts: meta.clamp_counts.clone(),
        physics_fingerprint: meta.physics_fingerprint,
    };
    Ok((meta, result))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Writes a surrogate model as JSON.
pub fn write_surrogate(path: &Path, m: &SurrogateModel) -> Result<()> {
    write_file(path, &json_bytes(m))
}

/// Reads and validates a surrogate model.
pub fn read_surrogate(path: &Path) -> Result<SurrogateModel> {
    let m: SurrogateModel = serde_json::from_str(&read_file(path)?).map_err(|e| CliError::parse(path, e))?;
    m.validate().map_err(|e| CliError::parse(path, e))?;
    Ok(m)
}

/// Writes any serializable report as JSON.
pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_file(path, &json_bytes(v))
}

/// Writes a heatmap: the first row holds the column axis values (after an
/// empty corner cell) and the first column the row axis values.
pub fn write_heatmap(path: &Path, h: &Heatmap) -> Result<()> {
    let mut rows = Vec::with_capacity(h.rows.len() + 1);
    let mut header = vec![String::new()];
    header.extend(h.cols.iter().map(|&c| fmt_f64(c)));
    rows.push(header);
    for (r, &rv) in h.rows.iter().enumerate() {
        let mut line = vec![fmt_f64(rv)];
        line.extend(h.values.row(r).iter().map(|&v| fmt_f64(v)));
        rows.push(line);
    }
    write_file(path, &csv_bytes(rows))
}

/// Writes every metric slice of an exploration plus the axis files, and
/// returns the written paths.
///
pub fn export_heatmaps(dir: &Path, result: &ExplorationResult) -> Result<Vec<PathBuf>> {
    use reram_dse_core::dse::Axis;
    let g = &result.grid;
    let mut written = Vec::new();
    let axis_n: Vec<f64> = g.n.iter().map(|&n| n as f64).collect();
    let axis_b: Vec<f64> = g.bits.iter().map(|&b| f64::from(b)).collect();
    for (name, values) in [("axis_n.csv", &axis_n), ("axis_f.csv", &g.f), ("axis_bits.csv", &axis_b)] {
        let p = dir.join(name);
        write_vector(&p, values)?;
        written.push(p);
    }
    // An (n, bits) plane when frequency is fixed, otherwise one (n, f)
    // plane per resolution.
    let planes: Vec<(Axis, Axis, usize, String)> = if g.f.len() == 1 && g.bits.len() > 1 {
        vec![(Axis::N, Axis::Bits, 0, "n_bits".to_owned())]
    } else {
        (0..g.bits.len()).map(|c| (Axis::N, Axis::F, c, format!("n_f_b{}", g.bits[c]))).collect()
    };
    for (rows, cols, fixed, tag) in planes {
        for m in Metric::ALL {
            let p = dir.join(format!("{}_{tag}.csv", m.as_str()));
            write_heatmap(&p, &result.heatmap(m, rows, cols, fixed)?)?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.0, -0.0, 1.0, 0.1, 63.83e-6, 1e-300, 5e-324, f64::MAX, -2.5e17, 1.0 / 3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits(), "{v}");
        }
        assert_eq!(fmt_f64(0.79), "7.9e-1");
    }

    #[test]
    fn grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let g = Grid::from_row_major(2, 3, vec![1.0, 2.5e-7, 1.0 / 3.0, -4.0, 0.0, 1e300]).unwrap();
        write_grid(&p, &g).unwrap();
        assert_eq!(read_grid(&p).unwrap(), g);
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_grid(&p).is_err());
        std::fs::write(&p, "1,x\n").unwrap();
        assert!(read_grid(&p).is_err());
    }
}
