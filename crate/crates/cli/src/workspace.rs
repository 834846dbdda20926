//! Workspace layout and the calibrate → characterize → surrogate → explore
//! pipeline.
//!
//! ```text
//! <workspace>/characterize/N<size>/   meta.json, geff.csv, rmse_*.csv
//! <workspace>/surrogate.model         JSON surrogate
//! <workspace>/collapse.json           profile collapse report
//! <workspace>/explore/<run-id>/       report.json, axis_*.csv, heatmaps
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use reram_dse_core::device::{calibrate_to_anchors, Anchor, CalibrationOptions, CalibrationOutcome, FreeParams};
use reram_dse_core::dse::{explore, ConstraintKind, Constraints, Evaluator, ExplorationResult, PointEval, SearchGrid};
use reram_dse_core::surrogate::{build_surrogate, CollapseReport, MonotonicityWarning, SurrogateModel};
use reram_dse_core::{Fingerprint, FingerprintBuilder};
use serde::{Deserialize, Serialize};

use crate::config::ToolkitConfig;
use crate::error::{CliError, Result};
use crate::parallel::{characterize_parallel, ParallelGeff};
use crate::store;

/// Root of the on-disk artifacts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
}

/// Whether a size was computed or served from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    /// Fingerprint matched an existing result.
    Cached,
    /// Simulated in this run.
    Computed,
}

/// Per-size outcome of [`Workspace::characterize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeOutcome {
    /// Array size.
    pub n: usize,
    /// Result directory.
    pub dir: PathBuf,
    /// Cache hit or fresh run.
    pub status: CacheStatus,
}

/// Output of [`Workspace::surrogate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateOutcome {
    /// The model as written.
    pub model: SurrogateModel,
    /// Pairwise profile deviations.
    pub collapse: CollapseReport,
    /// Gate from the config.
    pub collapse_gate: f64,
}

/// Saved summary of an exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreReport {
    /// Directory name under `explore/`.
    pub run_id: String,
    /// Physical config hash.
    pub config_fingerprint: Fingerprint,
    /// Surrogate content hash.
    pub surrogate_fingerprint: Fingerprint,
    /// Constraints applied.
    pub constraints: Constraints,
    /// Best feasible point.
    pub optimum: PointEval,
    /// Constraints active within one grid step.
    pub binding: Vec<ConstraintKind>,
    /// Axis extents `(first, last, count)`.
    pub n_axis: (usize, usize, usize),
    /// See `n_axis`.
    pub f_axis: (f64, f64, usize),
    /// See `n_axis`.
    pub bits_axis: (u32, u32, usize),
}

/// Output of [`Workspace::explore`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExploreOutcome {
    /// Run directory.
    pub dir: PathBuf,
    /// Summary as written to `report.json`.
    pub report: ExploreReport,
    /// Full grid evaluation.
    pub result: ExplorationResult,
}

impl Workspace {
    /// Workspace rooted at `root` (created lazily).
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Root directory.
    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Directory of one characterized size.
    pub fn characterize_dir(&self, n: usize) -> PathBuf {
        self.root.join("characterize").join(format!("N{n}"))
    }

    /// Surrogate file.
    pub fn surrogate_path(&self) -> PathBuf {
        self.root.join("surrogate.model")
    }

    /// Directory of one exploration run.
    pub fn explore_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("explore").join(run_id)
    }

    /// Characterizes every size not already on disk under the same physics
    /// and with every requested resolution. A failing size leaves an
    /// `error.txt` in its directory; the remaining sizes still run and the
    /// first failure is returned at the end.
    pub fn characterize(
        &self,
        cfg: &ToolkitConfig,
        sizes: &[usize],
        bits: &[u32],
        workers: usize,
    ) -> Result<Vec<SizeOutcome>> {
        let mut out = Vec::new();
        let mut first_error = None;
        for &n in sizes {
            let setup = cfg.setup(n)?;
            let dir = self.characterize_dir(n);
            if let Ok(meta) = store::read_meta(&dir) {
                if meta.physics_fingerprint == setup.physics_fingerprint() && bits.iter().all(|b| meta.bits.contains(b)) {
                    log::info!("N={n}: cached ({})", dir.display());
                    out.push(SizeOutcome { n, dir, status: CacheStatus::Cached });
                    continue;
                }
                log::info!("N={n}: stale result, recomputing");
            }
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            }
            log::info!("N={n}: characterizing {n} segments on {workers} workers");
            let step = (n / 10).max(1);
            let progress = |done: usize, total: usize| {
                log::debug!("N={n}: segment {done}/{total}");
                if done % step == 0 || done == total {
                    log::info!("N={n}: {done}/{total} segments");
                }
            };
            match characterize_parallel(&setup, bits, workers, &progress) {
                Ok(r) => {
                    store::write_characterization(&dir, &r, setup.run_fingerprint(bits), &cfg.to_toml())?;
                    out.push(SizeOutcome { n, dir, status: CacheStatus::Computed });
                }
                Err(e) => {
                    let path = dir.join("error.txt");
                    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                    fs::write(&path, format!("{e}\n{e:#?}\n")).map_err(|e| CliError::io(&path, e))?;
                    log::error!("N={n}: {e} (details in {})", path.display());
                    first_error.get_or_insert(e);
                }
            }
        }
        match first_error {
            Some(e) => Err(e.into()),
            None => Ok(out),
        }
    }

    /// Builds the surrogate from the configured sizes and writes it with its
    /// collapse report.
    pub fn surrogate(&self, cfg: &ToolkitConfig) -> Result<SurrogateOutcome> {
        let expected = cfg.setup(1)?.physics_fingerprint();
        let mut results = Vec::new();
        let mut stale = Vec::new();
        let mut actual = None;
        for &n in &cfg.surrogate.sizes {
            let dir = self.characterize_dir(n);
            let (meta, r) = store::read_characterization(&dir)?;
            if meta.physics_fingerprint != expected {
                actual.get_or_insert(meta.physics_fingerprint);
                stale.push(dir);
                continue;
            }
            results.push(r);
        }
        if let Some(actual) = actual {
            return Err(CliError::Mismatch {
                dirs: stale,
                expected: expected.to_hex(),
                actual: actual.to_hex(),
            });
        }
        let model = build_surrogate(&results, &cfg.surrogate.bits_list)?;
        let collapse = model.normalized_profile_collapse();
        store::write_surrogate(&self.surrogate_path(), &model)?;
        store::write_json(&self.root.join("collapse.json"), &collapse)?;
        Ok(SurrogateOutcome {
            model,
            collapse,
            collapse_gate: cfg.surrogate.collapse_gate,
        })
    }

    /// Loads the surrogate and checks it was built under `cfg`'s physics.
    pub fn load_surrogate(&self, cfg: &ToolkitConfig) -> Result<SurrogateModel> {
        let path = self.surrogate_path();
        let model = store::read_surrogate(&path)?;
        let expected = cfg.setup(1)?.physics_fingerprint();
        if model.physics_fingerprint != expected {
            return Err(CliError::Mismatch {
                dirs: vec![path],
                expected: expected.to_hex(),
                actual: model.physics_fingerprint.to_hex(),
            });
        }
        Ok(model)
    }

    /// Runs a grid search on the stored surrogate and writes the report and
    /// heatmaps under a run id derived from every input.
    pub fn explore(&self, cfg: &ToolkitConfig, grid: &SearchGrid, constraints: &Constraints) -> Result<ExploreOutcome> {
        let model = self.load_surrogate(cfg)?;
        let eval = Evaluator {
            surrogate: &model,
            adc: cfg.adc_model()?,
            v: cfg.device.v_read,
            ops_per_mac: cfg.dse.ops_per_mac,
            dac_power_per_row: cfg.dse.dac_power_per_row,
        };
        let result = explore(&eval, grid, constraints)?;
        let config_fingerprint = cfg.fingerprint()?;
        let run_id = run_id(config_fingerprint, model.model_fingerprint, grid, constraints);
        let dir = self.explore_dir(&run_id);
        let report = ExploreReport {
            run_id,
            config_fingerprint,
            surrogate_fingerprint: model.model_fingerprint,
            constraints: *constraints,
            optimum: *result.optimum(),
            binding: result.binding.clone(),
            n_axis: (grid.n[0], *grid.n.last().expect("validated"), grid.n.len()),
            f_axis: (grid.f[0], *grid.f.last().expect("validated"), grid.f.len()),
            bits_axis: (grid.bits[0], *grid.bits.last().expect("validated"), grid.bits.len()),
        };
        store::export_heatmaps(&dir, &result)?;
        store::write_json(&dir.join("report.json"), &report)?;
        Ok(ExploreOutcome { dir, report, result })
    }
}

fn run_id(config: Fingerprint, model: Fingerprint, grid: &SearchGrid, c: &Constraints) -> String {
    let mut fp = FingerprintBuilder::new()
        .fingerprint("config", config)
        .fingerprint("model", model)
        .str("constraints", &serde_json::to_string(c).expect("serializable"));
    for &n in &grid.n {
        fp = fp.u64("n", n as u64);
    }
    for &f in &grid.f {
        fp = fp.f64("f", f);
    }
    for &b in &grid.bits {
        fp = fp.u64("bits", u64::from(b));
    }
    fp.finish().to_hex()[..12].to_owned()
}

/// One entry of an anchors file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorEntry {
    /// Simulated array size.
    pub n: usize,
    /// Leading block summed; the full array when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub: Option<usize>,
    /// Target `Σ G_eff` (S).
    pub sum_g: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorsFile {
    #[serde(default)]
    anchor: Vec<AnchorEntry>,
}

/// Parses an anchors file:
///
/// ```toml
/// [[anchor]]
/// n = 128
/// sum_g = 0.790
///
/// [[anchor]]
/// n = 256
/// sub = 128
/// sum_g = 0.630
/// ```
pub fn load_anchors(path: &Path) -> Result<Vec<Anchor>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: AnchorsFile = toml::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    if file.anchor.is_empty() {
        return Err(CliError::Usage(format!("{}: no [[anchor]] entries", path.display())));
    }
    Ok(file
        .anchor
        .iter()
        .map(|a| Anchor::sub_array(a.n, a.sub.unwrap_or(a.n), a.sum_g))
        .collect())
}

/// Fits `g_lrs` and `r_seg` to `anchors`, starting from `cfg`, and returns
/// the updated config with the calibration report.
pub fn calibrate(cfg: &ToolkitConfig, anchors: &[Anchor], workers: usize) -> Result<(ToolkitConfig, CalibrationOutcome)> {
    let start = FreeParams {
        g_lrs: cfg.device.g_lrs,
        r_seg: cfg.wire.r_seg,
    };
    let options = CalibrationOptions {
        solver: cfg.solver(),
        ..CalibrationOptions::default()
    };
    let outcome = calibrate_to_anchors(
        &ParallelGeff { workers },
        &cfg.device()?,
        &cfg.crossbar(1),
        anchors,
        start,
        &options,
    )?;
    let mut updated = cfg.clone();
    updated.device.g_lrs = outcome.params.g_lrs;
    updated.wire.r_seg = outcome.params.r_seg;
    Ok((updated, outcome))
}

/// Trend warnings formatted one per line.
pub fn describe_warnings(w: &[MonotonicityWarning]) -> Vec<String> {
    w.iter()
        .map(|w| {
            let bits = w.bits.map_or("analog".to_owned(), |b| format!("{b} bits"));
            format!("{:?} trend broken at N={} ({bits}) by {:.3e}", w.axis, w.n, w.magnitude)
        })
        .collect()
}
