//! One-hot triangle-wave characterization.
//!
//! Each segment drives a single row with a triangle wave while every other
//! row is held at 0 V through its driver segment, and records all column
//! currents. Comparing against an isolated parasitic-free cell gives per-cell
//! RMSE; dividing the column current at the read voltage by that voltage
//! (all cells LRS) gives per-cell effective conductance.
//!
//! Every segment is solved independently (warm starts never cross segment
//! boundaries), so results do not depend on how segments are scheduled.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{
    build_system, CellStateMatrix, CrossbarConfig, DcSolver, SolverOptions,
};
use crate::device::{CellState, DeviceParams, SinhCell};
use crate::error::{invalid, require_positive, Error, Result};
use crate::fingerprint::{Fingerprint, FingerprintBuilder};
use crate::grid::Grid;

/// Default triangle sample count per segment.
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 33;

/// Uniform mid-tread ADC with clamping to `[0, full_scale]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdcQuantizer {
    bits: u32,
    full_scale: f64,
}

impl AdcQuantizer {
    /// `bits` in `1..=52`, positive full scale.
    pub fn new(bits: u32, full_scale: f64) -> Result<Self> {
        if !(1..=52).contains(&bits) {
            return Err(invalid("bits", alloc::format!("must be in 1..=52, got {bits}")));
        }
        require_positive("full_scale", full_scale)?;
        Ok(Self { bits, full_scale })
    }

    /// Resolution.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Full-scale input current (A).
    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    /// `full_scale / 2^bits`.
    pub fn lsb(&self) -> f64 {
        self.full_scale / (1u64 << self.bits) as f64
    }

    /// Quantized value and whether the input was clamped.
    pub fn quantize(&self, i: f64) -> (f64, bool) {
        let clamped = i.clamp(0.0, self.full_scale);
        let lsb = self.lsb();
        ((libm::round(clamped / lsb) * lsb).min(self.full_scale), clamped != i)
    }
}

/// [`AdcQuantizer::quantize`] without the clamp flag.
pub fn quantize_current(adc: &AdcQuantizer, i: f64) -> f64 {
    adc.quantize(i).0
}

/// How the ADC full scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FullScaleMode {
    /// `N · I_LRS(v_peak)`: the largest column current a one-hot input can
    /// produce in an all-LRS parasitic-free array of size N.
    #[default]
    ScaledByN,
    /// A fixed current (A).
    Fixed(f64),
}

impl FullScaleMode {
    /// Full-scale current for an array of size `n`.
    pub fn full_scale(&self, n: usize, device: &DeviceParams, v_peak: f64) -> f64 {
        match *self {
            FullScaleMode::ScaledByN => n as f64 * device.lrs.current(v_peak),
            FullScaleMode::Fixed(fs) => fs,
        }
    }
}

/// Testbench settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestbenchConfig {
    /// Triangle samples per segment (≥ 3).
    pub samples_per_segment: usize,
    /// Triangle amplitude; `None` uses the device read voltage.
    pub v_peak: Option<f64>,
    /// State of every cell during error characterization.
    pub error_state: CellState,
    /// ADC full-scale rule.
    pub full_scale: FullScaleMode,
}

impl Default for TestbenchConfig {
    fn default() -> Self {
        Self {
            samples_per_segment: DEFAULT_SAMPLES_PER_SEGMENT,
            v_peak: None,
            error_state: CellState::Lrs,
            full_scale: FullScaleMode::ScaledByN,
        }
    }
}

impl TestbenchConfig {
    /// Effective triangle amplitude.
    pub fn v_peak(&self, device: &DeviceParams) -> f64 {
        self.v_peak.unwrap_or(device.v_read)
    }

    fn validate(&self, device: &DeviceParams) -> Result<()> {
        if self.samples_per_segment < 3 {
            return Err(invalid("samples_per_segment", "must be >= 3"));
        }
        require_positive("v_peak", self.v_peak(device))?;
        if let FullScaleMode::Fixed(fs) = self.full_scale {
            require_positive("full_scale_current", fs)?;
        }
        Ok(())
    }
}

/// One triangle period `0 → v_peak → 0` in `k` samples.
///
/// Odd `k` samples uniformly with the peak in the middle. Even `k` repeats
/// the peak sample so that the wave stays symmetric and still reaches
/// `v_peak`. The falling half is an exact mirror of the rising half.
pub fn triangle_samples(v_peak: f64, k: usize) -> Result<Vec<f64>> {
    if k < 3 {
        return Err(invalid("k", alloc::format!("need at least 3 samples, got {k}")));
    }
    require_positive("v_peak", v_peak)?;
    let rising_len = k.div_ceil(2);
    let steps = (rising_len - 1) as f64;
    let rising: Vec<f64> = (0..rising_len)
        .map(|m| if m + 1 == rising_len { v_peak } else { v_peak * m as f64 / steps })
        .collect();
    let mut out = rising.clone();
    let mirror_from = if k % 2 == 1 { rising_len - 1 } else { rising_len };
    out.extend(rising[..mirror_from].iter().rev());
    Ok(out)
}

/// Isolated parasitic-free cell current at each sample.
pub fn reference_current(cell: &SinhCell, v_samples: &[f64]) -> Vec<f64> {
    v_samples.iter().map(|&v| cell.current(v)).collect()
}

/// Distinct sample voltages in ascending order plus, for each sample, the
/// index of its voltage in that list.
fn distinct_levels(v_samples: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut levels: Vec<f64> = v_samples.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let index = v_samples
        .iter()
        .map(|v| levels.iter().position(|l| l == v).expect("level present"))
        .collect();
    (levels, index)
}

/// Drives rows one at a time through a reusable solver.
#[derive(Debug, Clone)]
pub struct SegmentRunner {
    solver: DcSolver,
}

impl SegmentRunner {
    /// Builds the nodal system once for repeated segments.
    pub fn new(
        config: &CrossbarConfig,
        states: &CellStateMatrix,
        device: &DeviceParams,
        options: SolverOptions,
    ) -> Result<Self> {
        Ok(Self {
            solver: DcSolver::new(build_system(config, states, device)?, options),
        })
    }

    /// Array size.
    pub fn n(&self) -> usize {
        self.solver.system().n()
    }

    /// Column currents (`n × levels.len()`) for `active_row` driven at each
    /// voltage in `levels`, all other rows at 0 V. `levels` must be
    /// ascending; each solve warm-starts from the previous ones.
    pub fn run_levels(&mut self, active_row: usize, levels: &[f64]) -> Result<Grid> {
        let n = self.n();
        if active_row >= n {
            return Err(invalid("active_row", alloc::format!("{active_row} >= {n}")));
        }
        let mut out = Grid::zeros(n, levels.len());
        let mut drive = vec![0.0; n];
        // Last two solved (voltage, state) pairs for extrapolated guesses.
        let mut history: Vec<(f64, Vec<f64>)> = Vec::with_capacity(2);
        let mut guess = vec![0.0; self.solver.system().unknowns()];
        for (k, &v) in levels.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            drive[active_row] = v;
            let guess_ref = match history.as_slice() {
                [] => None,
                [(v1, x1)] => {
                    let s = v / v1;
                    guess.iter_mut().zip(x1).for_each(|(g, x)| *g = x * s);
                    Some(guess.as_slice())
                }
                [(v1, x1), (v2, x2)] => {
                    let t = (v - v2) / (v2 - v1);
                    guess
                        .iter_mut()
                        .zip(x1.iter().zip(x2))
                        .for_each(|(g, (a, b))| *g = b + (b - a) * t);
                    Some(guess.as_slice())
                }
                _ => unreachable!(),
            };
            let sol = self.solver.solve(&drive, guess_ref).map_err(|e| Error::Segment {
                row: active_row,
                sample: k,
                source: alloc::boxed::Box::new(e),
            })?;
            for (j, c) in sol.column_currents.iter().enumerate() {
                out[(j, k)] = *c;
            }
            if history.len() == 2 {
                history.remove(0);
            }
            history.push((v, sol.state()));
        }
        Ok(out)
    }

    /// Column currents (`n × k`) for one segment over arbitrary samples.
    pub fn run_segment(&mut self, active_row: usize, v_samples: &[f64]) -> Result<Grid> {
        let (levels, index) = distinct_levels(v_samples);
        let per_level = self.run_levels(active_row, &levels)?;
        let n = self.n();
        let mut out = Grid::zeros(n, v_samples.len());
        for j in 0..n {
            for (k, &l) in index.iter().enumerate() {
                out[(j, k)] = per_level[(j, l)];
            }
        }
        Ok(out)
    }
}

/// Column currents of one segment, convenience wrapper over
/// [`SegmentRunner`].
pub fn run_segment(
    config: &CrossbarConfig,
    states: &CellStateMatrix,
    device: &DeviceParams,
    active_row: usize,
    v_samples: &[f64],
) -> Result<Grid> {
    SegmentRunner::new(config, states, device, SolverOptions::default())?
        .run_segment(active_row, v_samples)
}

/// Per-cell effective conductance `I_col(j) / v` with row `i` driven at `v`
/// and every cell in LRS.
pub fn extract_geff(config: &CrossbarConfig, device: &DeviceParams, v: f64) -> Result<Grid> {
    require_positive("v", v)?;
    let n = config.n;
    let states = CellStateMatrix::uniform(n, CellState::Lrs);
    let mut runner = SegmentRunner::new(config, &states, device, SolverOptions::default())?;
    let mut geff = Grid::zeros(n, n);
    for i in 0..n {
        let cur = runner.run_levels(i, &[v])?;
        for j in 0..n {
            geff[(i, j)] = cur[(j, 0)] / v;
        }
    }
    Ok(geff)
}

/// Per-cell RMSE (A) against the isolated reference, optionally through an
/// ADC of `bits` resolution. Cells are all in the testbench error state.
pub fn per_cell_rmse(
    config: &CrossbarConfig,
    device: &DeviceParams,
    testbench: &TestbenchConfig,
    bits: Option<u32>,
) -> Result<Grid> {
    let setup = CharacterizationSetup {
        crossbar: *config,
        device: *device,
        testbench: *testbench,
        solver: SolverOptions::default(),
    };
    let bits_list: Vec<u32> = bits.into_iter().collect();
    let result = characterize(&setup, &bits_list)?;
    Ok(match bits {
        Some(b) => result.rmse_by_bits[&b].clone(),
        None => result.rmse_analog,
    })
}

/// Worst-case array power split into its architecture and driver terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayPower {
    /// `Σ G_eff` (S).
    pub sum_g: f64,
    /// `V²` (V²).
    pub v_squared: f64,
    /// `V² · Σ G_eff` (W).
    pub watts: f64,
}

/// `V² · Σ G_eff` with every cell in LRS.
pub fn worst_case_array_power(geff: &Grid, v: f64) -> Result<ArrayPower> {
    require_positive("v", v)?;
    let sum_g = geff.sum();
    let v_squared = v * v;
    Ok(ArrayPower {
        sum_g,
        v_squared,
        watts: v_squared * sum_g,
    })
}

/// Everything that determines a characterization run of one size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizationSetup {
    /// Array geometry and wires. `v_drive` is not used; amplitudes come
    /// from the testbench and device.
    pub crossbar: CrossbarConfig,
    /// Cell model.
    pub device: DeviceParams,
    /// Testbench settings.
    pub testbench: TestbenchConfig,
    /// Solver controls.
    pub solver: SolverOptions,
}

impl CharacterizationSetup {
    /// Hash of every setting except the array size; results that share it
    /// can be combined into one surrogate.
    pub fn physics_fingerprint(&self) -> Fingerprint {
        let tb = &self.testbench;
        let fp = self.device.hash_into(FingerprintBuilder::new());
        let fp = self
            .crossbar
            .hash_into(fp)
            .u64("tb.samples", tb.samples_per_segment as u64)
            .f64("tb.v_peak", tb.v_peak(&self.device))
            .str("tb.error_state", tb.error_state.as_str());
        let fp = match tb.full_scale {
            FullScaleMode::ScaledByN => fp.str("tb.full_scale", "scaled_by_n"),
            FullScaleMode::Fixed(v) => fp.str("tb.full_scale", "fixed").f64("tb.fs", v),
        };
        fp.f64("solver.abs_tol", self.solver.abs_tol).finish()
    }

    /// Physics fingerprint plus size and requested resolutions.
    pub fn run_fingerprint(&self, bits_list: &[u32]) -> Fingerprint {
        let mut fp = FingerprintBuilder::new()
            .fingerprint("physics", self.physics_fingerprint())
            .u64("n", self.crossbar.n as u64);
        for &b in &normalized_bits(bits_list) {
            fp = fp.u64("bits", u64::from(b));
        }
        fp.finish()
    }

    /// Read voltage at which `G_eff` is extracted.
    pub fn v_geff(&self) -> f64 {
        self.device.v_read
    }

    /// Triangle samples for every segment.
    pub fn samples(&self) -> Result<Vec<f64>> {
        triangle_samples(
            self.testbench.v_peak(&self.device),
            self.testbench.samples_per_segment,
        )
    }

    /// Validates and builds the per-worker solver state.
    pub fn worker(&self) -> Result<SegmentWorker> {
        self.crossbar.validate()?;
        self.testbench.validate(&self.device)?;
        let n = self.crossbar.n;
        let samples = self.samples()?;
        let (levels, _) = distinct_levels(&samples);
        let error_state = self.testbench.error_state;
        let v_geff = self.v_geff();
        let error = SegmentRunner::new(
            &self.crossbar,
            &CellStateMatrix::uniform(n, error_state),
            &self.device,
            self.solver,
        )?;
        // The all-LRS G_eff solve can reuse an error-sweep level when the
        // error sweep is itself all-LRS and passes through v_geff.
        let reuse = (error_state == CellState::Lrs)
            .then(|| levels.iter().position(|&l| l == v_geff))
            .flatten();
        let geff = match reuse {
            Some(_) => None,
            None => Some(SegmentRunner::new(
                &self.crossbar,
                &CellStateMatrix::uniform(n, CellState::Lrs),
                &self.device,
                self.solver,
            )?),
        };
        Ok(SegmentWorker {
            levels,
            v_geff,
            reuse_level: reuse,
            error,
            geff,
        })
    }
}

/// Per-thread solver state for [`CharacterizationSetup`].
#[derive(Debug, Clone)]
pub struct SegmentWorker {
    levels: Vec<f64>,
    v_geff: f64,
    reuse_level: Option<usize>,
    error: SegmentRunner,
    geff: Option<SegmentRunner>,
}

/// Raw analog output of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentData {
    /// Driven row.
    pub row: usize,
    /// Column currents per distinct level, `n × levels`.
    pub level_currents: Grid,
    /// `G_eff` for this row, one entry per column.
    pub geff_row: Vec<f64>,
}

impl SegmentWorker {
    /// Runs the error sweep and `G_eff` solve for one driven row.
    pub fn run(&mut self, row: usize) -> Result<SegmentData> {
        let level_currents = self.error.run_levels(row, &self.levels)?;
        let geff_row = match (self.reuse_level, self.geff.as_mut()) {
            (Some(l), _) => (0..level_currents.rows())
                .map(|j| level_currents[(j, l)] / self.v_geff)
                .collect(),
            (None, Some(runner)) => {
                let c = runner.run_levels(row, &[self.v_geff])?;
                (0..c.rows()).map(|j| c[(j, 0)] / self.v_geff).collect()
            }
            (None, None) => unreachable!("worker always has a G_eff source"),
        };
        Ok(SegmentData {
            row,
            level_currents,
            geff_row,
        })
    }
}

/// Sorted, de-duplicated resolutions.
fn normalized_bits(bits_list: &[u32]) -> Vec<u32> {
    let mut b = bits_list.to_vec();
    b.sort_unstable();
    b.dedup();
    b
}

/// Characterization output for one array size.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizationResult {
    /// Array size.
    pub n: usize,
    /// Per-cell effective conductance at the read voltage, all LRS (S).
    pub geff: Grid,
    /// Per-cell RMSE without an ADC (A).
    pub rmse_analog: Grid,
    /// Per-cell RMSE after quantization, keyed by resolution (A).
    pub rmse_by_bits: BTreeMap<u32, Grid>,
    /// `Σ G_eff` over the full array (S).
    pub cumulative_conductance: f64,
    /// Reference current at `v_peak` in the error state (A); divides RMSE
    /// into the dimensionless normalized RMSE.
    pub reference_peak: f64,
    /// ADC full scale used for every resolution (A).
    pub full_scale: f64,
    /// Triangle amplitude (V).
    pub v_peak: f64,
    /// Voltage `G_eff` was extracted at (V).
    pub v_geff: f64,
    /// Samples that hit the ADC clamp, per resolution.
    pub clamp_counts: BTreeMap<u32, usize>,
    /// Settings hash excluding `n`.
    pub physics_fingerprint: Fingerprint,
}

impl CharacterizationResult {
    /// Largest RMSE of the analog map or the `bits` map, normalized by
    /// [`Self::reference_peak`].
    pub fn normalized_rmse_max(&self, bits: Option<u32>) -> Option<f64> {
        let map = match bits {
            None => &self.rmse_analog,
            Some(b) => self.rmse_by_bits.get(&b)?,
        };
        Some(map.max() / self.reference_peak)
    }

    /// Sum of `G_eff` over the leading `m × m` block (nearest the driver and
    /// ADC).
    pub fn sub_array_conductance(&self, m: usize) -> f64 {
        self.geff.leading_block_sum(m)
    }

    /// Pairs of adjacent cells where the analog RMSE decreases moving away
    /// from the driver (along a row) or from the ADC (along a column) by
    /// more than `tol` (A).
    pub fn spatial_monotonicity_violations(&self, tol: f64) -> usize {
        let m = &self.rmse_analog;
        let n = self.n;
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if j + 1 < n && m[(i, j + 1)] + tol < m[(i, j)] {
                    count += 1;
                }
                if i + 1 < n && m[(i + 1, j)] + tol < m[(i, j)] {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Assembles segment outputs (in any order) into a result, re-quantizing the
/// stored analog currents for each requested resolution.
pub fn assemble(
    setup: &CharacterizationSetup,
    segments: Vec<Result<SegmentData>>,
    bits_list: &[u32],
) -> Result<CharacterizationResult> {
    let n = setup.crossbar.n;
    let mut failures = Vec::new();
    let mut rows: Vec<Option<SegmentData>> = vec![None; n];
    for seg in segments {
        match seg {
            Ok(d) if d.row < n => {
                let row = d.row;
                rows[row] = Some(d);
            }
            Ok(d) => failures.push(invalid("row", alloc::format!("segment row {} >= {n}", d.row))),
            Err(e) => failures.push(e),
        }
    }
    if failures.is_empty() {
        if let Some(missing) = rows.iter().position(Option::is_none) {
            failures.push(invalid("segments", alloc::format!("row {missing} missing")));
        }
    }
    if !failures.is_empty() {
        failures.sort_by_key(|e| match e {
            Error::Segment { row, .. } => *row,
            _ => usize::MAX,
        });
        return Err(Error::Characterization { n, failures });
    }
    let rows: Vec<SegmentData> = rows.into_iter().map(Option::unwrap).collect();

    let device = &setup.device;
    let v_peak = setup.testbench.v_peak(device);
    let samples = setup.samples()?;
    let (levels, index) = distinct_levels(&samples);
    let error_cell = device.cell(setup.testbench.error_state);
    let reference: Vec<f64> = reference_current(&error_cell, &levels);
    // Multiplicity of each level in the sample train.
    let mut weight = vec![0usize; levels.len()];
    for &l in &index {
        weight[l] += 1;
    }
    let k = samples.len() as f64;

    let full_scale = setup.testbench.full_scale.full_scale(n, device, v_peak);
    let bits = normalized_bits(bits_list);
    let adcs = bits
        .iter()
        .map(|&b| AdcQuantizer::new(b, full_scale))
        .collect::<Result<Vec<_>>>()?;

    let mut geff = Grid::zeros(n, n);
    let mut rmse_analog = Grid::zeros(n, n);
    let mut rmse_by_bits: BTreeMap<u32, Grid> =
        bits.iter().map(|&b| (b, Grid::zeros(n, n))).collect();
    let mut clamp_counts: BTreeMap<u32, usize> = bits.iter().map(|&b| (b, 0)).collect();

    for seg in &rows {
        let i = seg.row;
        geff.row_mut(i).copy_from_slice(&seg.geff_row);
        for j in 0..n {
            let cur = seg.level_currents.row(j);
            let mut acc = 0.0;
            for (l, (&c, &r)) in cur.iter().zip(&reference).enumerate() {
                acc += weight[l] as f64 * (c - r) * (c - r);
            }
            rmse_analog[(i, j)] = libm::sqrt(acc / k);
            for adc in &adcs {
                let mut acc = 0.0;
                let mut clamps = 0;
                for (l, (&c, &r)) in cur.iter().zip(&reference).enumerate() {
                    let (q, clamped) = adc.quantize(c);
                    acc += weight[l] as f64 * (q - r) * (q - r);
                    if clamped {
                        clamps += weight[l];
                    }
                }
                rmse_by_bits.get_mut(&adc.bits()).expect("allocated")[(i, j)] = libm::sqrt(acc / k);
                *clamp_counts.get_mut(&adc.bits()).expect("allocated") += clamps;
            }
        }
    }

    Ok(CharacterizationResult {
        n,
        cumulative_conductance: geff.sum(),
        geff,
        rmse_analog,
        rmse_by_bits,
        reference_peak: error_cell.current(v_peak),
        full_scale,
        v_peak,
        v_geff: setup.v_geff(),
        clamp_counts,
        physics_fingerprint: setup.physics_fingerprint(),
    })
}

/// Runs all `N` segments sequentially and assembles the result; each
/// requested resolution is derived from the same stored currents.
pub fn characterize(setup: &CharacterizationSetup, bits_list: &[u32]) -> Result<CharacterizationResult> {
    let mut worker = setup.worker()?;
    let segments = (0..setup.crossbar.n).map(|i| worker.run(i)).collect();
    assemble(setup, segments, bits_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Termination;

    fn setup(n: usize, r_seg: f64) -> CharacterizationSetup {
        CharacterizationSetup {
            crossbar: CrossbarConfig::new(n).with_r_seg(r_seg),
            device: DeviceParams::default(),
            testbench: TestbenchConfig::default(),
            solver: SolverOptions::default(),
        }
    }

    #[test]
    fn triangle_examples() {
        let t = triangle_samples(0.2, 5).unwrap();
        let expect = [0.0, 0.1, 0.2, 0.1, 0.0];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let t = triangle_samples(0.2, 33).unwrap();
        assert!((t.iter().sum::<f64>() - 3.2).abs() < 1e-12);
        for k in 3..40 {
            let t = triangle_samples(0.37, k).unwrap();
            assert_eq!(t.len(), k);
            assert_eq!(t.iter().copied().fold(f64::MIN, f64::max), 0.37);
            assert_eq!(t.iter().copied().fold(f64::MAX, f64::min), 0.0);
            assert!(t.iter().zip(t.iter().rev()).all(|(a, b)| a == b));
        }
        assert_eq!(triangle_samples(0.2, 4).unwrap(), vec![0.0, 0.2, 0.2, 0.0]);
        assert!(triangle_samples(0.2, 2).is_err());
        assert!(triangle_samples(0.0, 5).is_err());
    }

    #[test]
    fn quantizer_examples() {
        let adc = AdcQuantizer::new(1, 2.0).unwrap();
        assert_eq!(adc.lsb(), 1.0);
        assert_eq!(quantize_current(&adc, 0.0), 0.0);
        assert_eq!(quantize_current(&adc, 1.0), 1.0);
        assert_eq!(adc.quantize(-0.3), (0.0, true));
        assert_eq!(adc.quantize(5.0), (2.0, true));
        let fine = AdcQuantizer::new(40, 1e-3).unwrap();
        for &i in &[1.234e-4, 7.77e-4, 3e-9] {
            assert!((quantize_current(&fine, i) - i).abs() <= fine.lsb() / 2.0);
        }
        assert!(AdcQuantizer::new(0, 1.0).is_err());
        assert!(AdcQuantizer::new(8, 0.0).is_err());
    }

    #[test]
    fn quantizer_idempotent() {
        let adc = AdcQuantizer::new(6, 3.3e-4).unwrap();
        for k in 0..500 {
            let i = -1e-5 + k as f64 * 7.1e-7;
            let q = quantize_current(&adc, i);
            assert_eq!(quantize_current(&adc, q), q);
        }
    }

    #[test]
    fn reference_examples() {
        let d = DeviceParams::default();
        assert!(reference_current(&d.lrs, &[0.0; 4]).iter().all(|&c| c == 0.0));
        let cfg = CrossbarConfig::new(1).with_r_seg(0.0);
        let states = CellStateMatrix::uniform(1, CellState::Lrs);
        let v = triangle_samples(0.6, 9).unwrap();
        let seg = run_segment(&cfg, &states, &d, 0, &v).unwrap();
        assert_eq!(seg.row(0), reference_current(&d.lrs, &v).as_slice());
    }

    #[test]
    fn parasitic_free_segment_matches_reference() {
        let d = DeviceParams::default();
        let cfg = CrossbarConfig::new(5).with_r_seg(0.0);
        let states = CellStateMatrix::uniform(5, CellState::Hrs);
        let v = triangle_samples(0.6, 7).unwrap();
        let seg = run_segment(&cfg, &states, &d, 3, &v).unwrap();
        let reference = reference_current(&d.hrs, &v);
        for j in 0..5 {
            assert_eq!(seg.row(j), reference.as_slice());
        }
    }

    #[test]
    fn far_columns_deviate_more() {
        let d = DeviceParams::default();
        let cfg = CrossbarConfig::new(16).with_r_seg(2.0);
        let states = CellStateMatrix::uniform(16, CellState::Lrs);
        let v = triangle_samples(0.6, 9).unwrap();
        let seg = run_segment(&cfg, &states, &d, 15, &v).unwrap();
        let reference = reference_current(&d.lrs, &v);
        let dev = |j: usize| {
            seg.row(j)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        for j in 1..16 {
            assert!(dev(j) >= dev(j - 1));
        }
        assert!(dev(15) > 1.5 * dev(0));
        assert!(SegmentRunner::new(&cfg, &states, &d, SolverOptions::default())
            .unwrap()
            .run_segment(16, &v)
            .is_err());
    }

    #[test]
    fn parasitic_free_characterization_is_exact() {
        let s = setup(6, 0.0);
        let r = characterize(&s, &[]).unwrap();
        assert!(r.rmse_analog.as_slice().iter().all(|&e| e == 0.0));
        let g = s.device.lrs.chord_conductance(s.device.v_read);
        assert!(r.geff.as_slice().iter().all(|&x| (x - g).abs() <= 1e-15 * g));
        assert!(r.rmse_by_bits.is_empty());
    }

    #[test]
    fn characterization_invariants() {
        let s = setup(12, 1.5);
        let r = characterize(&s, &[4, 6, 8]).unwrap();
        let chord = s.device.lrs.chord_conductance(s.device.v_read);
        assert!(r.geff.as_slice().iter().all(|&g| g > 0.0 && g <= chord));
        assert_eq!(r.spatial_monotonicity_violations(0.0), 0);
        assert_eq!(r.rmse_analog.argmax(), (11, 11));
        // Re-quantization from stored currents: a superset of bits leaves
        // existing maps untouched.
        let r2 = characterize(&s, &[4, 5, 6, 8, 10]).unwrap();
        for b in [4, 6, 8] {
            assert_eq!(r.rmse_by_bits[&b], r2.rmse_by_bits[&b]);
        }
        assert_eq!(r.rmse_analog, r2.rmse_analog);
        let coarse = r.normalized_rmse_max(Some(4)).unwrap();
        let fine = r.normalized_rmse_max(Some(8)).unwrap();
        assert!(coarse >= fine && fine >= r.normalized_rmse_max(None).unwrap());
    }

    #[test]
    fn geff_map_agrees_with_characterization() {
        let s = setup(8, 1.0);
        let r = characterize(&s, &[]).unwrap();
        let direct = extract_geff(&s.crossbar, &s.device, s.device.v_read).unwrap();
        for (a, b) in r.geff.as_slice().iter().zip(direct.as_slice()) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
        // Same G_eff when the error sweep runs in HRS and cannot be reused.
        let hrs = CharacterizationSetup {
            testbench: TestbenchConfig {
                error_state: CellState::Hrs,
                ..TestbenchConfig::default()
            },
            ..s
        };
        let rh = characterize(&hrs, &[]).unwrap();
        for (a, b) in rh.geff.as_slice().iter().zip(direct.as_slice()) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
        assert!(extract_geff(&s.crossbar, &s.device, 0.0).is_err());
    }

    #[test]
    fn power_examples() {
        let g = Grid::filled(2, 2, 0.25);
        let p = worst_case_array_power(&g, 0.2).unwrap();
        assert!((p.watts - 0.04).abs() < 1e-15);
        let p2 = worst_case_array_power(&g, 0.4).unwrap();
        assert_eq!(p2.sum_g, p.sum_g);
        assert!((p2.watts / p.watts - 4.0).abs() < 1e-12);
        let anchor = Grid::filled(1, 1, 0.790);
        assert!((worst_case_array_power(&anchor, 0.2).unwrap().watts - 0.0316).abs() < 1e-12);
        assert!(worst_case_array_power(&g, 0.0).is_err());
    }

    #[test]
    fn fingerprints_track_settings() {
        let a = setup(8, 1.0);
        let b = setup(8, 1.1);
        assert_ne!(a.physics_fingerprint(), b.physics_fingerprint());
        assert_eq!(a.physics_fingerprint(), setup(16, 1.0).physics_fingerprint());
        assert_ne!(a.run_fingerprint(&[6]), a.run_fingerprint(&[6, 8]));
        assert_eq!(a.run_fingerprint(&[8, 6]), a.run_fingerprint(&[6, 8, 8]));
        let d = CharacterizationSetup {
            crossbar: CrossbarConfig {
                termination: Termination::DoubleSided,
                ..a.crossbar
            },
            ..a
        };
        assert_ne!(a.physics_fingerprint(), d.physics_fingerprint());
    }

    #[test]
    fn segment_failures_are_aggregated() {
        let s = setup(3, 1.0);
        let err = assemble(
            &s,
            vec![
                Err(Error::Segment {
                    row: 2,
                    sample: 1,
                    source: alloc::boxed::Box::new(Error::NonConvergence {
                        iterations: 50,
                        residual: 1.0,
                    }),
                }),
                Err(Error::SingularSystem("x".into())),
            ],
            &[],
        )
        .unwrap_err();
        match err {
            Error::Characterization { n, failures } => {
                assert_eq!(n, 3);
                assert_eq!(failures.len(), 2);
            }
            e => panic!("{e}"),
        }
    }
}
