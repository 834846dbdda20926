//! Interpolated predictors built from a handful of characterized sizes.
//!
//! RMSE maxima are interpolated bilinearly over (N, bits), cumulative
//! conductance piecewise-linearly over N through per-size direct-simulation
//! sums, and the diagonal RMSE profile is stored normalized to `[0, 1]` on
//! both axes so that it can be rescaled to other sizes.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, FingerprintBuilder};
use crate::grid::Grid;
use crate::testbench::CharacterizationResult;

/// Default collapse gate on pairwise profile deviation.
pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.1;

/// Points on the common abscissa used to compare profiles.
pub const PROFILE_RESAMPLE_POINTS: usize = 101;

/// A grid entry that breaks an expected monotone trend.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonotonicityWarning {
    /// Array size of the offending entry.
    pub n: usize,
    /// Resolution; `None` for the analog (no-ADC) column.
    pub bits: Option<u32>,
    /// Which trend broke.
    pub axis: TrendAxis,
    /// Size of the violation (normalized RMSE or S).
    pub magnitude: f64,
}

/// Axis along which a trend is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrendAxis {
    /// RMSE should not fall as N grows.
    Size,
    /// RMSE should not grow with resolution.
    Bits,
    /// Cumulative conductance should grow with N.
    SumG,
}

/// Continuous predictors over array size and ADC resolution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateModel {
    /// Characterized sizes, strictly increasing.
    pub sizes: Vec<usize>,
    /// Characterized resolutions, strictly increasing.
    pub bits: Vec<u32>,
    /// Normalized RMSE map maxima, `sizes × bits`.
    pub rmse_max: Grid,
    /// Normalized analog RMSE map maxima per size.
    pub rmse_max_analog: Vec<f64>,
    /// Full-array `Σ G_eff` per size (S).
    pub sum_g: Vec<f64>,
    /// Analog diagonal RMSE per size divided by its maximum; entry `k` sits
    /// at abscissa `k / (N − 1)`.
    pub profiles: Vec<Vec<f64>>,
    /// Reference current used for normalization (A).
    pub reference_peak: f64,
    /// Settings shared by every source result.
    pub physics_fingerprint: Fingerprint,
    /// Hash of the model contents.
    pub model_fingerprint: Fingerprint,
    /// Trend violations found at build time.
    pub warnings: Vec<MonotonicityWarning>,
}

/// Knot interval and weight for `x`; exact knots get weight 0.
fn locate(knots: &[f64], x: f64) -> Option<(usize, f64)> {
    let last = knots.len() - 1;
    if !(x >= knots[0] && x <= knots[last]) {
        return None;
    }
    let k = knots.partition_point(|&t| t <= x) - 1;
    if knots[k] == x || k == last {
        Some((k, 0.0))
    } else {
        Some((k, (x - knots[k]) / (knots[k + 1] - knots[k])))
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a + w * (b - a)
    }
}

/// Linear resampling of a normalized profile at abscissa `x ∈ [0, 1]`.
fn sample_profile(profile: &[f64], x: f64) -> f64 {
    if profile.len() == 1 {
        return profile[0];
    }
    let pos = x * (profile.len() - 1) as f64;
    let k = (libm::floor(pos) as usize).min(profile.len() - 2);
    lerp(profile[k], profile[k + 1], pos - k as f64)
}

/// Diagonal of `map` divided by its largest entry.
pub fn normalized_diagonal(map: &Grid) -> Vec<f64> {
    let d = map.diagonal();
    let peak = d.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        d.iter().map(|v| v / peak).collect()
    } else {
        d
    }
}

/// Builds a surrogate from results at distinct sizes sharing one physics
/// fingerprint. `bits_list` must be covered by every result.
pub fn build_surrogate(results: &[CharacterizationResult], bits_list: &[u32]) -> Result<SurrogateModel> {
    let mut sorted: Vec<&CharacterizationResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.n);
    if sorted.len() < 2 {
        return Err(Error::InsufficientSizes(format!(
            "need at least two characterized sizes, got {}",
            sorted.len()
        )));
    }
    if let Some(w) = sorted.windows(2).find(|w| w[0].n == w[1].n) {
        return Err(Error::InsufficientSizes(format!("duplicate size {}", w[0].n)));
    }
    let expected = sorted[0].physics_fingerprint;
    if let Some(r) = sorted.iter().find(|r| r.physics_fingerprint != expected) {
        return Err(Error::FingerprintMismatch {
            expected: expected.to_hex(),
            actual: r.physics_fingerprint.to_hex(),
            n: r.n,
        });
    }
    let mut bits = bits_list.to_vec();
    bits.sort_unstable();
    bits.dedup();
    let reference_peak = sorted[0].reference_peak;

    let mut rmse_max = Grid::zeros(sorted.len(), bits.len());
    for (s, r) in sorted.iter().enumerate() {
        for (b, &bb) in bits.iter().enumerate() {
            rmse_max[(s, b)] = r.normalized_rmse_max(Some(bb)).ok_or_else(|| {
                crate::error::invalid("bits", format!("size {} was not characterized at {bb} bits", r.n))
            })?;
        }
    }
    let mut model = SurrogateModel {
        sizes: sorted.iter().map(|r| r.n).collect(),
        rmse_max_analog: sorted.iter().map(|r| r.rmse_analog.max() / reference_peak).collect(),
        sum_g: sorted.iter().map(|r| r.cumulative_conductance).collect(),
        profiles: sorted.iter().map(|r| normalized_diagonal(&r.rmse_analog)).collect(),
        bits,
        rmse_max,
        reference_peak,
        physics_fingerprint: expected,
        model_fingerprint: expected,
        warnings: Vec::new(),
    };
    model.warnings = model.trend_violations();
    model.model_fingerprint = model.content_fingerprint();
    Ok(model)
}

impl SurrogateModel {
    fn size_knots(&self) -> Vec<f64> {
        self.sizes.iter().map(|&n| n as f64).collect()
    }

    fn bit_knots(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    fn size_range_error(&self, n: f64) -> Error {
        Error::OutOfRange {
            axis: "n",
            value: n,
            min: self.sizes[0] as f64,
            max: *self.sizes.last().expect("non-empty") as f64,
        }
    }

    /// Normalized RMSE maximum at `(n, bits)`; bilinear, exact at knots.
    pub fn predict_rmse_max(&self, n: f64, bits: u32) -> Result<f64> {
        let (s, ws) = locate(&self.size_knots(), n).ok_or_else(|| self.size_range_error(n))?;
        let bk = self.bit_knots();
        let (b, wb) = locate(&bk, f64::from(bits)).ok_or(Error::OutOfRange {
            axis: "bits",
            value: f64::from(bits),
            min: bk[0],
            max: bk[bk.len() - 1],
        })?;
        let at = |s: usize, b: usize| self.rmse_max[(s, b.min(self.bits.len() - 1))];
        let row = |s: usize| lerp(at(s, b), at(s, b + 1), wb);
        let lo = row(s);
        Ok(if ws == 0.0 { lo } else { lerp(lo, row(s + 1), ws) })
    }

    /// Normalized analog RMSE maximum at `n`.
    pub fn predict_rmse_max_analog(&self, n: f64) -> Result<f64> {
        self.interp_size(&self.rmse_max_analog, n)
    }

    /// Full-array `Σ G_eff` at `n` (S).
    pub fn predict_sum_g(&self, n: f64) -> Result<f64> {
        self.interp_size(&self.sum_g, n)
    }

    fn interp_size(&self, values: &[f64], n: f64) -> Result<f64> {
        let (s, w) = locate(&self.size_knots(), n).ok_or_else(|| self.size_range_error(n))?;
        Ok(if w == 0.0 { values[s] } else { lerp(values[s], values[s + 1], w) })
    }

    /// Normalized profile at abscissa `x ∈ [0, 1]` for size `n`, blending
    /// the bracketing characterized profiles.
    pub fn profile_at(&self, n: f64, x: f64) -> Result<f64> {
        let (s, w) = locate(&self.size_knots(), n).ok_or_else(|| self.size_range_error(n))?;
        let x = x.clamp(0.0, 1.0);
        let lo = sample_profile(&self.profiles[s], x);
        Ok(if w == 0.0 {
            lo
        } else {
            lerp(lo, sample_profile(&self.profiles[s + 1], x), w)
        })
    }

    /// Diagonal normalized-RMSE estimate for an `n × n` array: profile
    /// times the predicted maximum (`bits = None` for analog).
    pub fn reconstruct_diagonal(&self, n: usize, bits: Option<u32>) -> Result<Vec<f64>> {
        let nf = n as f64;
        let peak = match bits {
            Some(b) => self.predict_rmse_max(nf, b)?,
            None => self.predict_rmse_max_analog(nf)?,
        };
        (0..n)
            .map(|k| {
                let x = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
                Ok(peak * self.profile_at(nf, x)?)
            })
            .collect()
    }

    /// Pairwise comparison of every stored profile on a common abscissa.
    pub fn normalized_profile_collapse(&self) -> CollapseReport {
        profile_collapse(&self.sizes, &self.profiles)
    }

    fn trend_violations(&self) -> Vec<MonotonicityWarning> {
        let mut out = Vec::new();
        let ns = self.sizes.len();
        for s in 0..ns {
            for b in 0..self.bits.len() {
                if b + 1 < self.bits.len() {
                    let rise = self.rmse_max[(s, b + 1)] - self.rmse_max[(s, b)];
                    if rise > 0.0 {
                        out.push(MonotonicityWarning {
                            n: self.sizes[s],
                            bits: Some(self.bits[b + 1]),
                            axis: TrendAxis::Bits,
                            magnitude: rise,
                        });
                    }
                }
                if s + 1 < ns {
                    let drop = self.rmse_max[(s, b)] - self.rmse_max[(s + 1, b)];
                    if drop > 0.0 {
                        out.push(MonotonicityWarning {
                            n: self.sizes[s + 1],
                            bits: Some(self.bits[b]),
                            axis: TrendAxis::Size,
                            magnitude: drop,
                        });
                    }
                }
            }
            if s + 1 < ns {
                let drop = self.rmse_max_analog[s] - self.rmse_max_analog[s + 1];
                if drop > 0.0 {
                    out.push(MonotonicityWarning {
                        n: self.sizes[s + 1],
                        bits: None,
                        axis: TrendAxis::Size,
                        magnitude: drop,
                    });
                }
                let gain = self.sum_g[s + 1] - self.sum_g[s];
                if gain <= 0.0 {
                    out.push(MonotonicityWarning {
                        n: self.sizes[s + 1],
                        bits: None,
                        axis: TrendAxis::SumG,
                        magnitude: -gain,
                    });
                }
            }
        }
        out
    }

    fn content_fingerprint(&self) -> Fingerprint {
        let mut fp = FingerprintBuilder::new()
            .fingerprint("physics", self.physics_fingerprint)
            .f64("reference_peak", self.reference_peak);
        for &n in &self.sizes {
            fp = fp.u64("size", n as u64);
        }
        for &b in &self.bits {
            fp = fp.u64("bits", u64::from(b));
        }
        for v in self
            .rmse_max
            .as_slice()
            .iter()
            .chain(&self.rmse_max_analog)
            .chain(&self.sum_g)
            .chain(self.profiles.iter().flatten())
        {
            fp = fp.f64("v", *v);
        }
        fp.finish()
    }

    /// Structural checks for a model read from storage.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str| Err(crate::error::invalid("surrogate", what));
        let ns = self.sizes.len();
        if ns < 2 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sizes must be strictly increasing with at least two entries");
        }
        if self.bits.is_empty() && self.rmse_max.cols() != 0 {
            return bad("rmse grid has columns but no bits");
        }
        if self.bits.windows(2).any(|w| w[0] >= w[1]) {
            return bad("bits must be strictly increasing");
        }
        if self.rmse_max.rows() != ns
            || self.rmse_max.cols() != self.bits.len()
            || self.rmse_max.as_slice().len() != ns * self.bits.len()
            || self.rmse_max_analog.len() != ns
            || self.sum_g.len() != ns
            || self.profiles.len() != ns
        {
            return bad("array lengths do not match the size list");
        }
        if self.profiles.iter().zip(&self.sizes).any(|(p, &n)| p.len() != n) {
            return bad("profile length differs from its size");
        }
        if self.model_fingerprint != self.content_fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: self.content_fingerprint().to_hex(),
                actual: self.model_fingerprint.to_hex(),
                n: 0,
            });
        }
        Ok(())
    }
}

/// Pairwise profile deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollapseReport {
    /// `(n_a, n_b, max |profile_a − profile_b|)` for every pair.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl CollapseReport {
    /// Largest pairwise deviation (0 with fewer than two profiles).
    pub fn max_deviation(&self) -> f64 {
        self.pairs.iter().fold(0.0, |m, p| f64::max(m, p.2))
    }

    /// Whether every pair is within `threshold`.
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_deviation() <= threshold
    }
}

/// Resamples each normalized profile onto [`PROFILE_RESAMPLE_POINTS`]
/// uniform abscissae and compares every pair.
pub fn profile_collapse(labels: &[usize], profiles: &[Vec<f64>]) -> CollapseReport {
    let m = PROFILE_RESAMPLE_POINTS;
    let resampled: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| (0..m).map(|k| sample_profile(p, k as f64 / (m - 1) as f64)).collect())
        .collect();
    let mut pairs = Vec::new();
    for a in 0..resampled.len() {
        for b in a + 1..resampled.len() {
            let dev = resampled[a]
                .iter()
                .zip(&resampled[b])
                .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()));
            pairs.push((labels[a], labels[b], dev));
        }
    }
    CollapseReport { pairs }
}

/// Free function form of [`SurrogateModel::predict_rmse_max`].
pub fn predict_rmse_max(model: &SurrogateModel, n: f64, bits: u32) -> Result<f64> {
    model.predict_rmse_max(n, bits)
}

/// Free function form of [`SurrogateModel::predict_sum_g`].
pub fn predict_sum_g(model: &SurrogateModel, n: f64) -> Result<f64> {
    model.predict_sum_g(n)
}

/// Free function form of [`SurrogateModel::normalized_profile_collapse`].
pub fn normalized_profile_collapse(model: &SurrogateModel) -> CollapseReport {
    model.normalized_profile_collapse()
}
