//! The toolkit configuration file.

use std::path::{Path, PathBuf};

use reram_dse_core::circuit::{CrossbarConfig, SolverOptions, Termination, DEFAULT_C_SEG, DEFAULT_K_SETTLE, DEFAULT_R_SEG};
use reram_dse_core::device::{CellState, DeviceParams, DEFAULT_G_LRS, DEFAULT_HRS_RATIO, DEFAULT_SHAPE_B, DEFAULT_V_READ};
use reram_dse_core::dse::{AdcEnergyModel, ANCHOR_BITS, ANCHOR_ENERGY, DEFAULT_OPS_PER_MAC};
use reram_dse_core::surrogate::DEFAULT_COLLAPSE_THRESHOLD;
use reram_dse_core::testbench::{CharacterizationSetup, FullScaleMode, TestbenchConfig, DEFAULT_SAMPLES_PER_SEGMENT};
use reram_dse_core::{Fingerprint, FingerprintBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Cell model section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    /// LRS chord conductance at `v_read` (S).
    pub g_lrs: f64,
    /// `g_lrs / g_hrs`.
    pub hrs_ratio: f64,
    /// sinh shape coefficient (1/V).
    pub shape_b: f64,
    /// Read voltage (V).
    pub v_read: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self {
            g_lrs: DEFAULT_G_LRS,
            hrs_ratio: DEFAULT_HRS_RATIO,
            shape_b: DEFAULT_SHAPE_B,
            v_read: DEFAULT_V_READ,
        }
    }
}

/// Wire parasitics section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WireSection {
    /// Resistance per segment (Ω).
    pub r_seg: f64,
    /// Capacitance per segment (F).
    pub c_seg: f64,
    /// Driver / virtual-ground placement.
    pub termination: Termination,
    /// Settling multiple of the Elmore delay.
    pub k_settle: f64,
}

impl Default for WireSection {
    fn default() -> Self {
        Self {
            r_seg: DEFAULT_R_SEG,
            c_seg: DEFAULT_C_SEG,
            termination: Termination::SingleSided,
            k_settle: DEFAULT_K_SETTLE,
        }
    }
}

/// ADC full-scale rule as spelled in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FullScaleKind {
    /// `N · I_LRS(v_peak)`.
    #[default]
    ScaledByN,
    /// `full_scale_current`.
    Fixed,
}

/// Testbench section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestbenchSection {
    /// Triangle samples per driven row.
    pub samples_per_segment: usize,
    /// Triangle amplitude (V); defaults to the read voltage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_peak: Option<f64>,
    /// ADC full-scale rule.
    pub full_scale_mode: FullScaleKind,
    /// Full-scale current for the `fixed` rule (A).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_scale_current: Option<f64>,
    /// State of every cell while measuring error.
    pub error_state: CellState,
}

impl Default for TestbenchSection {
    fn default() -> Self {
        Self {
            samples_per_segment: DEFAULT_SAMPLES_PER_SEGMENT,
            v_peak: None,
            full_scale_mode: FullScaleKind::ScaledByN,
            full_scale_current: None,
            error_state: CellState::Lrs,
        }
    }
}

/// DC solver section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// KCL tolerance per node (A).
    pub abs_tol: f64,
    /// Newton iteration budget.
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            abs_tol: d.abs_tol,
            max_iterations: d.max_iterations,
        }
    }
}

/// Surrogate section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSection {
    /// Characterized sizes.
    pub sizes: Vec<usize>,
    /// Characterized ADC resolutions.
    pub bits_list: Vec<u32>,
    /// Maximum pairwise deviation of normalized profiles.
    pub collapse_gate: f64,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self {
            sizes: vec![32, 64, 128, 192, 256],
            bits_list: (6..=14).collect(),
            collapse_gate: DEFAULT_COLLAPSE_THRESHOLD,
        }
    }
}

/// Exploration section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DseSection {
    /// Operations per multiply-accumulate.
    pub ops_per_mac: f64,
    /// Static DAC power per row (W).
    pub dac_power_per_row: f64,
    /// Resolution of the ADC energy anchor.
    pub adc_anchor_bits: u32,
    /// ADC energy per conversion at the anchor (J).
    pub adc_anchor_energy: f64,
}

impl Default for DseSection {
    fn default() -> Self {
        Self {
            ops_per_mac: DEFAULT_OPS_PER_MAC,
            dac_power_per_row: 0.0,
            adc_anchor_bits: ANCHOR_BITS,
            adc_anchor_energy: ANCHOR_ENERGY,
        }
    }
}

/// Filesystem section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// Workspace directory; relative paths resolve against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workspace: Option<PathBuf>,
}

/// Whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ToolkitConfig {
    /// Cell model.
    pub device: DeviceSection,
    /// Wire parasitics.
    pub wire: WireSection,
    /// Characterization testbench.
    pub testbench: TestbenchSection,
    /// DC solver.
    pub solver: SolverSection,
    /// Surrogate construction.
    pub surrogate: SurrogateSection,
    /// Design-space exploration.
    pub dse: DseSection,
    /// Filesystem locations.
    pub paths: PathsSection,
}

impl ToolkitConfig {
    /// Parses TOML text, rejecting unknown keys, and validates it.
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|m| CliError::parse(path, m))?;
        if let (Some(ws), Some(dir)) = (cfg.paths.workspace.as_mut(), path.parent()) {
            if ws.is_relative() {
                *ws = dir.join(&*ws);
            }
        }
        Ok(cfg)
    }

    /// TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every physical quantity.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Usage(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        self.device()?;
        positive("wire.k_settle", self.wire.k_settle)?;
        if !(self.wire.r_seg >= 0.0 && self.wire.r_seg.is_finite()) {
            return Err(CliError::Usage("wire.r_seg must be finite and >= 0".into()));
        }
        if !(self.wire.c_seg >= 0.0 && self.wire.c_seg.is_finite()) {
            return Err(CliError::Usage("wire.c_seg must be finite and >= 0".into()));
        }
        if self.testbench.samples_per_segment < 3 {
            return Err(CliError::Usage("testbench.samples_per_segment must be >= 3".into()));
        }
        if let Some(v) = self.testbench.v_peak {
            positive("testbench.v_peak", v)?;
        }
        match (self.testbench.full_scale_mode, self.testbench.full_scale_current) {
            (FullScaleKind::Fixed, None) => {
                return Err(CliError::Usage("testbench.full_scale_current is required for the fixed mode".into()))
            }
            (FullScaleKind::Fixed, Some(i)) => positive("testbench.full_scale_current", i)?,
            (FullScaleKind::ScaledByN, Some(_)) => {
                return Err(CliError::Usage("testbench.full_scale_current only applies to the fixed mode".into()))
            }
            _ => {}
        }
        positive("solver.abs_tol", self.solver.abs_tol)?;
        if self.solver.max_iterations == 0 {
            return Err(CliError::Usage("solver.max_iterations must be >= 1".into()));
        }
        if self.surrogate.sizes.contains(&0) || self.surrogate.bits_list.iter().any(|b| !(1..=52).contains(b)) {
            return Err(CliError::Usage("surrogate sizes must be >= 1 and bits in 1..=52".into()));
        }
        positive("surrogate.collapse_gate", self.surrogate.collapse_gate)?;
        positive("dse.ops_per_mac", self.dse.ops_per_mac)?;
        if !(self.dse.dac_power_per_row >= 0.0 && self.dse.dac_power_per_row.is_finite()) {
            return Err(CliError::Usage("dse.dac_power_per_row must be finite and >= 0".into()));
        }
        self.adc_model()?;
        Ok(())
    }

    /// Fitted device.
    pub fn device(&self) -> Result<DeviceParams> {
        let d = &self.device;
        Ok(DeviceParams::new(d.g_lrs, d.hrs_ratio, d.shape_b, d.v_read)?)
    }

    /// Crossbar template of size `n`.
    pub fn crossbar(&self, n: usize) -> CrossbarConfig {
        CrossbarConfig {
            n,
            r_seg: self.wire.r_seg,
            c_seg: self.wire.c_seg,
            termination: self.wire.termination,
            v_drive: self.device.v_read,
        }
    }

    /// Testbench settings.
    pub fn testbench(&self) -> TestbenchConfig {
        let t = &self.testbench;
        TestbenchConfig {
            samples_per_segment: t.samples_per_segment,
            v_peak: t.v_peak,
            error_state: t.error_state,
            full_scale: match (t.full_scale_mode, t.full_scale_current) {
                (FullScaleKind::Fixed, Some(i)) => FullScaleMode::Fixed(i),
                _ => FullScaleMode::ScaledByN,
            },
        }
    }

    /// Solver settings.
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            abs_tol: self.solver.abs_tol,
            max_iterations: self.solver.max_iterations,
            ..SolverOptions::default()
        }
    }

    /// Full characterization setup for size `n`.
    pub fn setup(&self, n: usize) -> Result<CharacterizationSetup> {
        Ok(CharacterizationSetup {
            crossbar: self.crossbar(n),
            device: self.device()?,
            testbench: self.testbench(),
            solver: self.solver(),
        })
    }

    /// ADC energy law.
    pub fn adc_model(&self) -> Result<AdcEnergyModel> {
        Ok(AdcEnergyModel::from_anchor(self.dse.adc_anchor_bits, self.dse.adc_anchor_energy)?)
    }

    /// Hash of every physical section (device, wire, testbench, solver,
    /// dse); paths and surrogate sampling are excluded.
    pub fn fingerprint(&self) -> Result<Fingerprint> {
        let physics = self.setup(1)?.physics_fingerprint();
        Ok(FingerprintBuilder::new()
            .fingerprint("physics", physics)
            .f64("wire.k_settle", self.wire.k_settle)
            .f64("dse.ops_per_mac", self.dse.ops_per_mac)
            .f64("dse.dac_power_per_row", self.dse.dac_power_per_row)
            .u64("dse.adc_anchor_bits", u64::from(self.dse.adc_anchor_bits))
            .f64("dse.adc_anchor_energy", self.dse.adc_anchor_energy)
            .finish())
    }
}
