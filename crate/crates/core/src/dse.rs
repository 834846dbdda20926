//! Power, throughput and efficiency over (N, f, bits) and constrained
//! exhaustive search.

use alloc::format;
use alloc::vec::Vec;

use crate::circuit::{max_frequency, CrossbarConfig};
use crate::error::{invalid, require_positive, Error, Result};
use crate::grid::Grid;
use crate::surrogate::SurrogateModel;

/// Resolution of the published ADC energy anchor.
pub const ANCHOR_BITS: u32 = 14;
/// Energy per conversion at [`ANCHOR_BITS`] (J).
pub const ANCHOR_ENERGY: f64 = 39.19e-12;
/// Default operations counted per multiply-accumulate.
pub const DEFAULT_OPS_PER_MAC: f64 = 1.0;

/// Walden-style ADC energy `E(bits) = fom · 2^bits`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdcEnergyModel {
    /// Energy per conversion step (J).
    pub fom: f64,
    /// Anchor resolution.
    pub anchor_bits: u32,
    /// Anchor energy (J).
    pub anchor_energy: f64,
}

impl AdcEnergyModel {
    /// Model passing exactly through `(bits, energy)`.
    pub fn from_anchor(bits: u32, energy: f64) -> Result<Self> {
        if !(1..=52).contains(&bits) {
            return Err(invalid("anchor_bits", "must be in 1..=52"));
        }
        require_positive("anchor_energy", energy)?;
        Ok(Self {
            fom: energy / pow2(bits),
            anchor_bits: bits,
            anchor_energy: energy,
        })
    }

    /// Energy per conversion at `bits` (J).
    pub fn energy(&self, bits: u32) -> f64 {
        if bits == self.anchor_bits {
            self.anchor_energy
        } else {
            self.fom * pow2(bits)
        }
    }
}

impl Default for AdcEnergyModel {
    fn default() -> Self {
        Self::from_anchor(ANCHOR_BITS, ANCHOR_ENERGY).expect("valid anchor")
    }
}

fn pow2(bits: u32) -> f64 {
    libm::ldexp(1.0, bits as i32)
}

/// [`AdcEnergyModel::energy`] as a free function.
pub fn adc_energy(model: &AdcEnergyModel, bits: u32) -> f64 {
    model.energy(bits)
}

/// One architecture choice.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignPoint {
    /// Array size.
    pub n: usize,
    /// Operating frequency (Hz).
    pub f: f64,
    /// ADC resolution.
    pub bits: u32,
}

impl DesignPoint {
    /// Validated point.
    pub fn new(n: usize, f: f64, bits: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        require_positive("f", f)?;
        if bits == 0 {
            return Err(invalid("bits", "must be >= 1"));
        }
        Ok(Self { n, f, bits })
    }
}

/// `ops_per_mac · n² · f`: one full-array MVM per conversion period.
pub fn throughput(point: &DesignPoint, ops_per_mac: f64) -> f64 {
    let n = point.n as f64;
    ops_per_mac * n * n * point.f
}

/// Power terms of a design point (W).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerBreakdown {
    /// `Σ G_eff(n) · V²`.
    pub array: f64,
    /// `n · E_ADC(bits) · f`.
    pub adc: f64,
    /// `n · P_DAC` (zero by default).
    pub dac: f64,
    /// Sum of the above.
    pub total: f64,
}

/// Surrogate-backed metric evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    /// Source of `Σ G_eff` and RMSE predictions.
    pub surrogate: &'a SurrogateModel,
    /// ADC energy law.
    pub adc: AdcEnergyModel,
    /// Worst-case read voltage (V).
    pub v: f64,
    /// Operations per MAC.
    pub ops_per_mac: f64,
    /// Static DAC power per row (W).
    pub dac_power_per_row: f64,
}

impl<'a> Evaluator<'a> {
    /// Evaluator with default ADC model, ops convention and no DAC power.
    pub fn new(surrogate: &'a SurrogateModel, v: f64) -> Self {
        Self {
            surrogate,
            adc: AdcEnergyModel::default(),
            v,
            ops_per_mac: DEFAULT_OPS_PER_MAC,
            dac_power_per_row: 0.0,
        }
    }

    /// `Σ G_eff(n)·V² + n·E_ADC(bits)·f (+ n·P_DAC)`.
    pub fn total_power(&self, p: &DesignPoint) -> Result<PowerBreakdown> {
        let n = p.n as f64;
        let array = self.surrogate.predict_sum_g(n)? * self.v * self.v;
        let adc = n * self.adc.energy(p.bits) * p.f;
        let dac = n * self.dac_power_per_row;
        Ok(PowerBreakdown {
            array,
            adc,
            dac,
            total: array + adc + dac,
        })
    }

    /// Operations per second.
    pub fn throughput(&self, p: &DesignPoint) -> f64 {
        throughput(p, self.ops_per_mac)
    }

    /// TOPs/s/W.
    pub fn efficiency(&self, p: &DesignPoint) -> Result<f64> {
        let power = self.total_power(p)?.total;
        require_positive("total_power", power)?;
        Ok(self.throughput(p) / power / 1e12)
    }

    /// Predicted normalized worst-case RMSE.
    pub fn rmse(&self, p: &DesignPoint) -> Result<f64> {
        self.surrogate.predict_rmse_max(p.n as f64, p.bits)
    }
}

/// Free function form of [`Evaluator::total_power`].
pub fn total_power(eval: &Evaluator<'_>, point: &DesignPoint) -> Result<PowerBreakdown> {
    eval.total_power(point)
}

/// Free function form of [`Evaluator::efficiency`].
pub fn energy_efficiency(eval: &Evaluator<'_>, point: &DesignPoint) -> Result<f64> {
    eval.efficiency(point)
}

/// Axis values of the search grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchGrid {
    /// Array sizes, strictly increasing.
    pub n: Vec<usize>,
    /// Frequencies (Hz), strictly increasing.
    pub f: Vec<f64>,
    /// Resolutions, strictly increasing.
    pub bits: Vec<u32>,
}

impl SearchGrid {
    /// `start, start + step, …` up to and including `stop`, computed without
    /// accumulating rounding.
    pub fn steps(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
        require_positive("step", step)?;
        if !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(invalid("range", format!("empty range [{start}, {stop}]")));
        }
        let count = libm::floor((stop - start) / step * (1.0 + 1e-12)) as usize + 1;
        Ok((0..count).map(|k| start + k as f64 * step).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.f.is_empty() || self.bits.is_empty() {
            return Err(invalid("grid", "every axis needs at least one value"));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1])
            || self.f.windows(2).any(|w| !(w[0] < w[1]))
            || self.bits.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(invalid("grid", "axis values must be strictly increasing"));
        }
        if self.n[0] == 0 || self.bits[0] == 0 || !(self.f[0] > 0.0) {
            return Err(invalid("grid", "n, f and bits must be positive"));
        }
        Ok(())
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.n.len() * self.f.len() * self.bits.len()
    }

    /// Whether the grid has no points.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(n, f, bits)` axis positions; n-major, bits fastest.
    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.f.len() + b) * self.bits.len() + c
    }
}

/// Elmore-delay cap on frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElmoreCap {
    /// Wire settings; `n` is replaced per point.
    pub crossbar: CrossbarConfig,
    /// Settling multiple of the Elmore delay.
    pub k_settle: f64,
}

/// Constraints on a search. Unset fields do not constrain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constraints {
    /// Power budget (W).
    pub max_power: Option<f64>,
    /// Normalized RMSE threshold.
    pub max_rmse: Option<f64>,
    /// Frequency cap from wire settling.
    pub elmore: Option<ElmoreCap>,
    /// Allow a search with no constraint at all.
    pub unconstrained: bool,
}

/// Which constraint limits a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConstraintKind {
    /// Power budget.
    Power,
    /// Error threshold.
    Rmse,
    /// Elmore frequency cap.
    Frequency,
}

impl ConstraintKind {
    /// Lowercase name.
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintKind::Power => "power",
            ConstraintKind::Rmse => "rmse",
            ConstraintKind::Frequency => "frequency",
        }
    }
}

/// Metrics and feasibility of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointEval {
    /// The point.
    pub point: DesignPoint,
    /// Power terms.
    pub power: PowerBreakdown,
    /// OPs/s.
    pub throughput: f64,
    /// TOPs/s/W.
    pub efficiency: f64,
    /// Normalized worst-case RMSE, when the surrogate covers `bits`.
    pub rmse: Option<f64>,
    /// Elmore frequency cap, when requested.
    pub f_cap: Option<f64>,
    /// Relative excess per constraint (0 when satisfied).
    pub power_violation: f64,
    /// See `power_violation`.
    pub rmse_violation: f64,
    /// See `power_violation`.
    pub frequency_violation: f64,
}

impl PointEval {
    /// Every constraint satisfied.
    pub fn feasible(&self) -> bool {
        self.violation() == 0.0
    }

    /// Summed relative violation.
    pub fn violation(&self) -> f64 {
        self.power_violation + self.rmse_violation + self.frequency_violation
    }

    /// Constraints this point violates.
    pub fn violated(&self) -> Vec<ConstraintKind> {
        let mut v = Vec::new();
        if self.power_violation > 0.0 {
            v.push(ConstraintKind::Power);
        }
        if self.rmse_violation > 0.0 {
            v.push(ConstraintKind::Rmse);
        }
        if self.frequency_violation > 0.0 {
            v.push(ConstraintKind::Frequency);
        }
        v
    }
}

fn excess(value: f64, limit: Option<f64>) -> f64 {
    match limit {
        Some(l) if value > l => value / l - 1.0,
        _ => 0.0,
    }
}

/// Evaluates one point against `constraints`.
pub fn evaluate_point(eval: &Evaluator<'_>, point: DesignPoint, constraints: &Constraints) -> Result<PointEval> {
    let power = eval.total_power(&point)?;
    let rmse = match constraints.max_rmse {
        Some(_) => Some(eval.rmse(&point)?),
        None => eval.rmse(&point).ok(),
    };
    let f_cap = constraints
        .elmore
        .map(|c| max_frequency(&c.crossbar.with_n(point.n), c.k_settle));
    let throughput = eval.throughput(&point);
    require_positive("total_power", power.total)?;
    Ok(PointEval {
        point,
        power,
        throughput,
        efficiency: throughput / power.total / 1e12,
        rmse,
        f_cap,
        power_violation: excess(power.total, constraints.max_power),
        rmse_violation: rmse.map_or(0.0, |r| excess(r, constraints.max_rmse)),
        frequency_violation: excess(point.f, f_cap),
    })
}

/// Full search output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplorationResult {
    /// Axis values searched.
    pub grid: SearchGrid,
    /// Constraints applied.
    pub constraints: Constraints,
    /// Every point, ordered as [`SearchGrid::index`].
    pub points: Vec<PointEval>,
    /// Index of the optimum in `points`.
    pub optimum_index: usize,
    /// Constraints violated by a higher-efficiency grid neighbor of the
    /// optimum (one step up in n, f or bits).
    pub binding: Vec<ConstraintKind>,
}

/// Metric selectable for heatmap export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Total power (W).
    Power,
    /// Array power term (W).
    ArrayPower,
    /// ADC power term (W).
    AdcPower,
    /// TOPs/s/W.
    Efficiency,
    /// Normalized RMSE (NaN where not covered).
    Rmse,
    /// 1 feasible, 0 infeasible.
    Feasible,
}

impl Metric {
    /// File-friendly name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Power => "power",
            Metric::ArrayPower => "array_power",
            Metric::AdcPower => "adc_power",
            Metric::Efficiency => "efficiency",
            Metric::Rmse => "rmse",
            Metric::Feasible => "feasible",
        }
    }

    /// Every metric.
    pub const ALL: [Metric; 6] = [
        Metric::Power,
        Metric::ArrayPower,
        Metric::AdcPower,
        Metric::Efficiency,
        Metric::Rmse,
        Metric::Feasible,
    ];

    fn of(&self, p: &PointEval) -> f64 {
        match self {
            Metric::Power => p.power.total,
            Metric::ArrayPower => p.power.array,
            Metric::AdcPower => p.power.adc,
            Metric::Efficiency => p.efficiency,
            Metric::Rmse => p.rmse.unwrap_or(f64::NAN),
            Metric::Feasible => f64::from(u8::from(p.feasible())),
        }
    }
}

/// Search axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Array size.
    N,
    /// Frequency.
    F,
    /// ADC resolution.
    Bits,
}

impl Axis {
    /// Lowercase name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::F => "f",
            Axis::Bits => "bits",
        }
    }
}

/// A 2-D slice of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    /// Axis along rows.
    pub row_axis: Axis,
    /// Axis along columns.
    pub col_axis: Axis,
    /// Row axis values.
    pub rows: Vec<f64>,
    /// Column axis values.
    pub cols: Vec<f64>,
    /// `values[(r, c)]`.
    pub values: Grid,
}

impl ExplorationResult {
    /// The optimal point.
    pub fn optimum(&self) -> &PointEval {
        &self.points[self.optimum_index]
    }

    /// Point at axis positions `(a, b, c)`.
    pub fn at(&self, a: usize, b: usize, c: usize) -> &PointEval {
        &self.points[self.grid.index(a, b, c)]
    }

    fn axis_values(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::N => self.grid.n.iter().map(|&n| n as f64).collect(),
            Axis::F => self.grid.f.clone(),
            Axis::Bits => self.grid.bits.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    /// Slice of `metric` over `rows × cols`, with the remaining axis fixed
    /// at position `fixed`.
    pub fn heatmap(&self, metric: Metric, rows: Axis, cols: Axis, fixed: usize) -> Result<Heatmap> {
        if rows == cols {
            return Err(invalid("axes", "row and column axes must differ"));
        }
        let other = [Axis::N, Axis::F, Axis::Bits]
            .into_iter()
            .find(|a| *a != rows && *a != cols)
            .expect("three axes");
        if fixed >= self.axis_values(other).len() {
            return Err(invalid("fixed", format!("index {fixed} outside the {} axis", other.as_str())));
        }
        let rv = self.axis_values(rows);
        let cv = self.axis_values(cols);
        let mut values = Grid::zeros(rv.len(), cv.len());
        for r in 0..rv.len() {
            for c in 0..cv.len() {
                let mut pos = [0usize; 3];
                for (axis, k) in [(rows, r), (cols, c), (other, fixed)] {
                    pos[axis as usize] = k;
                }
                values[(r, c)] = metric.of(self.at(pos[0], pos[1], pos[2]));
            }
        }
        Ok(Heatmap {
            row_axis: rows,
            col_axis: cols,
            rows: rv,
            cols: cv,
            values,
        })
    }

    /// Highest feasible frequency per array size at bits position `c`
    /// (`None` where no frequency is feasible).
    pub fn feasible_frontier(&self, c: usize) -> Vec<(usize, Option<f64>)> {
        (0..self.grid.n.len())
            .map(|a| {
                let f = (0..self.grid.f.len())
                    .rev()
                    .find(|&b| self.at(a, b, c).feasible())
                    .map(|b| self.grid.f[b]);
                (self.grid.n[a], f)
            })
            .collect()
    }
}

/// Relative efficiency difference below which two points count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Evaluates every grid point and returns the feasible efficiency maximum.
/// Ties (within [`TIE_TOLERANCE`]) go to the smallest n, then f, then
/// bits.
pub fn explore(eval: &Evaluator<'_>, grid: &SearchGrid, constraints: &Constraints) -> Result<ExplorationResult> {
    grid.validate()?;
    if constraints.max_power.is_none()
        && constraints.max_rmse.is_none()
        && constraints.elmore.is_none()
        && !constraints.unconstrained
    {
        return Err(invalid("constraints", "no constraint given and search not marked unconstrained"));
    }
    for (name, limit) in [("max_power", constraints.max_power), ("max_rmse", constraints.max_rmse)] {
        if let Some(l) = limit {
            if !(l > 0.0) {
                return Err(invalid(name, format!("must be > 0, got {l}")));
            }
        }
    }
    let mut points = Vec::with_capacity(grid.len());
    for &n in &grid.n {
        for &f in &grid.f {
            for &bits in &grid.bits {
                points.push(evaluate_point(eval, DesignPoint { n, f, bits }, constraints)?);
            }
        }
    }
    // Points are already in (n, f, bits) order, so requiring a strict gain
    // keeps the first of equals.
    let mut best: Option<usize> = None;
    for (k, p) in points.iter().enumerate() {
        if p.feasible()
            && best.map_or(true, |b| p.efficiency > points[b].efficiency * (1.0 + TIE_TOLERANCE))
        {
            best = Some(k);
        }
    }
    let Some(optimum_index) = best else {
        let least = points
            .iter()
            .min_by(|a, b| a.violation().total_cmp(&b.violation()))
            .expect("non-empty grid");
        return Err(Error::NoFeasiblePoint {
            n: least.point.n,
            f: least.point.f,
            bits: least.point.bits,
            violation: least.violation(),
        });
    };
    let mut result = ExplorationResult {
        grid: grid.clone(),
        constraints: *constraints,
        points,
        optimum_index,
        binding: Vec::new(),
    };
    result.binding = binding_constraints(&result);
    Ok(result)
}

fn binding_constraints(r: &ExplorationResult) -> Vec<ConstraintKind> {
    let g = &r.grid;
    let nb = g.bits.len();
    let nf = g.f.len();
    let k = r.optimum_index;
    let (a, b, c) = (k / (nf * nb), (k / nb) % nf, k % nb);
    let opt = r.optimum();
    let mut out = Vec::new();
    let mut neighbors = Vec::new();
    if a + 1 < g.n.len() {
        neighbors.push(r.at(a + 1, b, c));
    }
    if b + 1 < nf {
        neighbors.push(r.at(a, b + 1, c));
    }
    if c + 1 < nb {
        neighbors.push(r.at(a, b, c + 1));
    }
    for p in neighbors {
        if p.efficiency > opt.efficiency * (1.0 + TIE_TOLERANCE) {
            out.extend(p.violated());
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::FingerprintBuilder;
    use alloc::vec;

    fn model() -> SurrogateModel {
        let sizes = vec![32usize, 64, 128, 256];
        let bits = vec![6u32, 8, 10, 12, 14];
        let mut rmse = Grid::zeros(sizes.len(), bits.len());
        for (s, &n) in sizes.iter().enumerate() {
            for (b, &bb) in bits.iter().enumerate() {
                rmse[(s, b)] = 1e-4 * (n * n) as f64 / 256.0 + 2.0 / f64::from(1u32 << bb) * n as f64 / 32.0;
            }
        }
        let fp = FingerprintBuilder::new().finish();
        SurrogateModel {
            sum_g: sizes.iter().map(|&n| 45e-6 * (n * n) as f64 * (1.0 - n as f64 / 1024.0)).collect(),
            rmse_max_analog: sizes.iter().map(|&n| 1e-4 * (n * n) as f64 / 256.0).collect(),
            profiles: sizes.iter().map(|&n| vec![1.0; n]).collect(),
            sizes,
            bits,
            rmse_max: rmse,
            reference_peak: 1.0,
            physics_fingerprint: fp,
            model_fingerprint: fp,
            warnings: vec![],
        }
    }

    #[test]
    fn adc_energy_examples() {
        let m = AdcEnergyModel::default();
        assert_eq!(adc_energy(&m, 14), 39.19e-12);
        assert!((m.energy(13) - 19.595e-12).abs() < 1e-24);
        assert!((m.energy(8) - 39.19e-12 / 64.0).abs() < 1e-24);
        assert!((m.fom - 2.392e-15).abs() < 1e-18);
        for b in 1..30 {
            assert!(m.energy(b + 1) > m.energy(b));
        }
    }

    #[test]
    fn power_and_throughput_examples() {
        let s = model();
        let e = Evaluator::new(&s, 0.6);
        let p = DesignPoint::new(156, 111e6, 14).unwrap();
        let pw = e.total_power(&p).unwrap();
        assert!((pw.adc - 0.679).abs() < 1e-3);
        let p2 = DesignPoint { f: 222e6, ..p };
        let pw2 = e.total_power(&p2).unwrap();
        assert_eq!(pw2.array, pw.array);
        assert!((pw2.adc / pw.adc - 2.0).abs() < 1e-12);
        let tiny = DesignPoint { f: 1e-30, ..p };
        assert!((e.total_power(&tiny).unwrap().total - s.predict_sum_g(156.0).unwrap() * 0.36).abs() < 1e-12);
        assert_eq!(throughput(&DesignPoint::new(1, 1.0, 8).unwrap(), 2.0), 2.0);
        assert!((throughput(&p, 2.0) - 5.40e12).abs() < 0.01e12);
        let dbl = DesignPoint { n: 312, ..p };
        assert_eq!(throughput(&dbl, 1.0) / throughput(&p, 1.0), 4.0);
        assert!(DesignPoint::new(0, 1.0, 8).is_err());
        assert!(DesignPoint::new(1, 0.0, 8).is_err());
    }

    #[test]
    fn adc_limited_efficiency_ignores_f() {
        let s = model();
        let e = Evaluator {
            v: 0.0,
            ops_per_mac: 2.0,
            ..Evaluator::new(&s, 0.6)
        };
        let a = e.efficiency(&DesignPoint::new(100, 1e6, 10).unwrap()).unwrap();
        let b = e.efficiency(&DesignPoint::new(100, 3e8, 10).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
        assert!((a - 2.0 * 100.0 / e.adc.energy(10) / 1e12).abs() <= 1e-12 * a);
    }

    #[test]
    fn grid_steps_are_exact() {
        let f = SearchGrid::steps(10e6, 500e6, 1e6).unwrap();
        assert_eq!(f.len(), 491);
        assert_eq!(f[0], 10e6);
        assert_eq!(*f.last().unwrap(), 500e6);
        assert_eq!(SearchGrid::steps(1.0, 1.0, 1.0).unwrap(), vec![1.0]);
        assert!(SearchGrid::steps(2.0, 1.0, 1.0).is_err());
    }

    fn va_grid() -> SearchGrid {
        SearchGrid {
            n: (32..=256).collect(),
            f: SearchGrid::steps(10e6, 500e6, 1e6).unwrap(),
            bits: vec![14],
        }
    }

    #[test]
    fn power_bounded_optimum_sits_on_boundary() {
        let s = model();
        let e = Evaluator::new(&s, 0.6);
        let c = Constraints {
            max_power: Some(1.2),
            ..Constraints::default()
        };
        let r = explore(&e, &va_grid(), &c).unwrap();
        let opt = r.optimum();
        assert!(opt.feasible());
        assert!(r.points.iter().filter(|p| p.feasible()).all(|p| p.efficiency <= opt.efficiency));
        assert_eq!(r.binding, vec![ConstraintKind::Power]);
        let frontier = r.feasible_frontier(0);
        let fs: Vec<f64> = frontier.iter().filter_map(|x| x.1).collect();
        assert!(fs.windows(2).all(|w| w[1] <= w[0]));
        assert!(fs.last() < fs.first());
        // Relaxing the budget never lowers the optimum.
        let looser = explore(&e, &va_grid(), &Constraints { max_power: Some(1.5), ..c }).unwrap();
        assert!(looser.optimum().efficiency >= opt.efficiency);
        for (a, b) in r.points.iter().zip(&looser.points) {
            assert!(!a.feasible() || b.feasible());
        }
    }

    #[test]
    fn unconstrained_goes_to_grid_corner() {
        let s = model();
        let e = Evaluator::new(&s, 0.6);
        let grid = SearchGrid {
            n: vec![64],
            f: SearchGrid::steps(10e6, 100e6, 10e6).unwrap(),
            bits: vec![8],
        };
        let c = Constraints {
            max_power: Some(f64::INFINITY),
            ..Constraints::default()
        };
        let r = explore(&e, &grid, &c).unwrap();
        assert_eq!(r.optimum().point.f, 100e6);
        assert!(explore(&e, &grid, &Constraints::default()).is_err());
        let free = Constraints {
            unconstrained: true,
            ..Constraints::default()
        };
        assert_eq!(explore(&e, &grid, &free).unwrap().optimum().point.f, 100e6);
    }

    #[test]
    fn ties_prefer_small_points() {
        let s = model();
        let e = Evaluator {
            v: 0.0,
            ..Evaluator::new(&s, 0.6)
        };
        // Array power is zero, so efficiency depends only on n and bits.
        let grid = SearchGrid {
            n: vec![64],
            f: vec![1e6, 2e6, 3e6],
            bits: vec![6],
        };
        let r = explore(&e, &grid, &Constraints { unconstrained: true, ..Constraints::default() }).unwrap();
        assert_eq!(r.optimum().point.f, 1e6);
    }

    #[test]
    fn infeasible_reports_least_violation() {
        let s = model();
        let e = Evaluator::new(&s, 0.6);
        let c = Constraints {
            max_power: Some(1e-6),
            ..Constraints::default()
        };
        match explore(&e, &va_grid(), &c) {
            Err(Error::NoFeasiblePoint { n, f, .. }) => {
                assert_eq!(n, 32);
                assert_eq!(f, 10e6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rmse_and_elmore_constraints() {
        let s = model();
        let e = Evaluator::new(&s, 0.6);
        let grid = SearchGrid {
            n: (32..=256).step_by(8).collect(),
            f: vec![300e6],
            bits: (6..=14).collect(),
        };
        let c = Constraints {
            max_rmse: Some(0.2),
            ..Constraints::default()
        };
        let r = explore(&e, &grid, &c).unwrap();
        assert!(r.optimum().rmse.unwrap() <= 0.2);
        assert!(r.points.iter().filter(|p| p.feasible()).all(|p| p.efficiency <= r.optimum().efficiency));
        let capped = Constraints {
            elmore: Some(ElmoreCap {
                crossbar: CrossbarConfig::new(1).with_r_seg(100.0),
                k_settle: 7.0,
            }),
            ..c
        };
        let rc = explore(&e, &grid, &capped).unwrap();
        assert!(rc.optimum().point.n <= r.optimum().point.n);
        assert!(rc.optimum().f_cap.unwrap() >= 300e6);
        // Out-of-range bits with an error constraint are rejected.
        let wide = SearchGrid {
            bits: vec![16],
            ..grid
        };
        assert!(matches!(explore(&e, &wide, &c), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn heatmap_slices() {
        let s = model();
        let e = Evaluator::new(&s, 0.6);
        let grid = SearchGrid {
            n: vec![64, 128],
            f: vec![1e8, 2e8, 3e8],
            bits: vec![8, 10],
        };
        let r = explore(&e, &grid, &Constraints { max_power: Some(1.0), ..Constraints::default() }).unwrap();
        let h = r.heatmap(Metric::Power, Axis::N, Axis::F, 1).unwrap();
        assert_eq!((h.values.rows(), h.values.cols()), (2, 3));
        assert_eq!(h.values[(1, 2)], r.at(1, 2, 1).power.total);
        let h = r.heatmap(Metric::Feasible, Axis::Bits, Axis::N, 0).unwrap();
        assert_eq!((h.values.rows(), h.values.cols()), (2, 2));
        assert_eq!(h.values[(1, 0)], f64::from(u8::from(r.at(0, 0, 1).feasible())));
        assert!(r.heatmap(Metric::Power, Axis::N, Axis::N, 0).is_err());
        assert!(r.heatmap(Metric::Power, Axis::N, Axis::F, 2).is_err());
    }
}
