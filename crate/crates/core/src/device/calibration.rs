//! Fitting `g_lrs` and the wire segment resistance to cumulative
//! conductance anchors.

use alloc::collections::btree_map::Entry;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::circuit::{CellStateMatrix, CrossbarConfig, SolverOptions};
use crate::device::{CellState, DeviceParams};
use crate::error::{invalid, require_positive, Error, Result};
use crate::grid::Grid;
use crate::testbench::SegmentRunner;

/// A measured cumulative conductance of an all-LRS array.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Anchor {
    /// Simulated array size.
    pub array_size: usize,
    /// Size of the leading block that is summed; equal to `array_size` for
    /// a full-array anchor.
    pub sub_size: usize,
    /// Target `Σ G_eff` (S).
    pub sum_g: f64,
}

impl Anchor {
    /// Sum over the whole `n × n` array.
    pub fn full(n: usize, sum_g: f64) -> Self {
        Self {
            array_size: n,
            sub_size: n,
            sum_g,
        }
    }

    /// Sum over the leading `m × m` block of an `n × n` array.
    pub fn sub_array(n: usize, m: usize, sum_g: f64) -> Self {
        Self {
            array_size: n,
            sub_size: m,
            sum_g,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.array_size == 0 || self.sub_size == 0 || self.sub_size > self.array_size {
            return Err(invalid(
                "anchor",
                format!("sub size {} must be in 1..={}", self.sub_size, self.array_size),
            ));
        }
        require_positive("anchor.sum_g", self.sum_g)
    }
}

/// Calibrated (or starting) values of the free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FreeParams {
    /// Nominal LRS conductance (S).
    pub g_lrs: f64,
    /// Wire resistance per segment (Ω).
    pub r_seg: f64,
}

/// Optimizer controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Largest acceptable |relative residual| per anchor at the end.
    pub tolerance: f64,
    /// Stop early once every |relative residual| is below this.
    pub target: f64,
    /// Iteration budget (each costs up to three simulations per size).
    pub max_iterations: usize,
    /// Solver controls for every simulation.
    pub solver: SolverOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            target: 1e-6,
            max_iterations: 40,
            solver: SolverOptions::default(),
        }
    }
}

/// Result of a successful calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    /// Fitted parameters.
    pub params: FreeParams,
    /// Device with the fitted `g_lrs` (shape, ratio and read voltage kept).
    pub device: DeviceParams,
    /// Crossbar template with the fitted `r_seg`.
    pub crossbar: CrossbarConfig,
    /// Simulated sum per anchor at the fitted point (S).
    pub simulated: Vec<f64>,
    /// `(simulated − target) / target` per anchor.
    pub residuals: Vec<f64>,
    /// Iterations performed.
    pub iterations: usize,
}

/// Produces the all-LRS `G_eff` map of an `n × n` array.
pub trait GeffSimulator {
    /// `G_eff` at `device.v_read`; `crossbar.n` is the array size.
    fn geff(&self, device: &DeviceParams, crossbar: &CrossbarConfig, options: SolverOptions) -> Result<Grid>;
}

/// Single-threaded [`GeffSimulator`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialGeff;

impl GeffSimulator for SequentialGeff {
    fn geff(&self, device: &DeviceParams, crossbar: &CrossbarConfig, options: SolverOptions) -> Result<Grid> {
        let n = crossbar.n;
        let v = device.v_read;
        let states = CellStateMatrix::uniform(n, CellState::Lrs);
        let mut runner = SegmentRunner::new(crossbar, &states, device, options)?;
        let mut g = Grid::zeros(n, n);
        for i in 0..n {
            let c = runner.run_levels(i, &[v])?;
            for j in 0..n {
                g[(i, j)] = c[(j, 0)] / v;
            }
        }
        Ok(g)
    }
}

/// Evaluates every anchor at one parameter point, simulating each distinct
/// array size once.
fn evaluate<S: GeffSimulator + ?Sized>(
    sim: &S,
    device: &DeviceParams,
    crossbar: &CrossbarConfig,
    anchors: &[Anchor],
    p: FreeParams,
    options: SolverOptions,
) -> Result<Vec<f64>> {
    let device = device.with_g_lrs(p.g_lrs)?;
    let mut maps: BTreeMap<usize, Grid> = BTreeMap::new();
    let mut out = Vec::with_capacity(anchors.len());
    for a in anchors {
        let map = match maps.entry(a.array_size) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let cfg = crossbar.with_n(a.array_size).with_r_seg(p.r_seg);
                e.insert(sim.geff(&device, &cfg, options)?)
            }
        };
        out.push(map.leading_block_sum(a.sub_size));
    }
    Ok(out)
}

fn relative(sim: &[f64], anchors: &[Anchor]) -> Vec<f64> {
    sim.iter().zip(anchors).map(|(s, a)| (s - a.sum_g) / a.sum_g).collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn worst(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Fits `g_lrs` and `r_seg` so that simulated cumulative conductances match
/// the anchors, minimizing the sum of squared relative errors.
///
/// Levenberg-Marquardt over `(ln g_lrs, r_seg)` with forward-difference
/// derivatives; `r_seg` is kept non-negative. `start` is the initial point,
/// and `device`/`crossbar` supply everything that is not fitted.
pub fn calibrate_to_anchors<S: GeffSimulator + ?Sized>(
    sim: &S,
    device: &DeviceParams,
    crossbar: &CrossbarConfig,
    anchors: &[Anchor],
    start: FreeParams,
    options: &CalibrationOptions,
) -> Result<CalibrationOutcome> {
    if anchors.len() < 2 {
        return Err(Error::InsufficientSizes(format!(
            "calibration needs at least two anchors, got {}",
            anchors.len()
        )));
    }
    for a in anchors {
        a.validate()?;
    }
    require_positive("g_lrs", start.g_lrs)?;
    if !(start.r_seg >= 0.0 && start.r_seg.is_finite()) {
        return Err(invalid("r_seg", "must be finite and >= 0"));
    }

    let solver = options.solver;
    let eval = |p: FreeParams| -> Result<Vec<f64>> {
        Ok(relative(&evaluate(sim, device, crossbar, anchors, p, solver)?, anchors))
    };

    let mut p = start;
    let mut res = eval(p)?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < options.max_iterations && worst(&res) > options.target {
        iterations += 1;
        // Jacobian columns: d res / d ln g, d res / d r.
        let hg = 1e-5;
        let rg = eval(FreeParams {
            g_lrs: p.g_lrs * libm::exp(hg),
            ..p
        })?;
        let hr = 1e-4 * f64::max(p.r_seg, 1.0);
        let rr = eval(FreeParams {
            r_seg: p.r_seg + hr,
            ..p
        })?;
        let jg: Vec<f64> = rg.iter().zip(&res).map(|(a, b)| (a - b) / hg).collect();
        let jr: Vec<f64> = rr.iter().zip(&res).map(|(a, b)| (a - b) / hr).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (a11, a12, a22) = (dot(&jg, &jg), dot(&jg, &jr), dot(&jr, &jr));
        let (b1, b2) = (-dot(&jg, &res), -dot(&jr, &res));

        let base = sum_sq(&res);
        let mut improved = false;
        for _ in 0..12 {
            let (d11, d22) = (a11 * (1.0 + lambda), a22 * (1.0 + lambda));
            let det = d11 * d22 - a12 * a12;
            if !(det.is_finite() && det > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let dlng = (b1 * d22 - b2 * a12) / det;
            let dr = (d11 * b2 - a12 * b1) / det;
            let trial = FreeParams {
                g_lrs: p.g_lrs * libm::exp(dlng.clamp(-1.0, 1.0)),
                r_seg: f64::max(p.r_seg + dr, 0.0),
            };
            let trial_res = eval(trial)?;
            if sum_sq(&trial_res) < base {
                p = trial;
                res = trial_res;
                lambda = f64::max(lambda / 10.0, 1e-9);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let w = worst(&res);
    if w > options.tolerance {
        return Err(Error::Calibration {
            iterations,
            worst: w,
            tolerance: options.tolerance,
        });
    }
    let fitted = device.with_g_lrs(p.g_lrs)?;
    let simulated = res
        .iter()
        .zip(anchors)
        .map(|(r, a)| a.sum_g * (1.0 + r))
        .collect();
    Ok(CalibrationOutcome {
        params: p,
        device: fitted,
        crossbar: crossbar.with_r_seg(p.r_seg),
        simulated,
        residuals: res,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simulate(g: f64, r: f64, anchors: &[(usize, usize)]) -> Vec<Anchor> {
        let d = DeviceParams::default().with_g_lrs(g).unwrap();
        anchors
            .iter()
            .map(|&(n, m)| {
                let map = SequentialGeff
                    .geff(&d, &CrossbarConfig::new(n).with_r_seg(r), SolverOptions::default())
                    .unwrap();
                Anchor::sub_array(n, m, map.leading_block_sum(m))
            })
            .collect()
    }

    #[test]
    fn parasitic_free_anchors_give_zero_wire() {
        let d = DeviceParams::default();
        let g = 52e-6;
        let chord = d.with_g_lrs(g).unwrap().lrs.chord_conductance(d.v_read);
        let anchors = [Anchor::full(4, 16.0 * chord), Anchor::full(8, 64.0 * chord)];
        let out = calibrate_to_anchors(
            &SequentialGeff,
            &d,
            &CrossbarConfig::new(4),
            &anchors,
            FreeParams { g_lrs: 48e-6, r_seg: 1.0 },
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert!(out.params.r_seg < 1e-3, "r = {}", out.params.r_seg);
        assert!((out.params.g_lrs - g).abs() < 1e-6 * g);
        assert!(out.residuals.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn recovers_synthetic_parameters() {
        let anchors = simulate(40e-6, 2.0, &[(16, 16), (32, 32), (32, 16)]);
        let out = calibrate_to_anchors(
            &SequentialGeff,
            &DeviceParams::default(),
            &CrossbarConfig::new(16),
            &anchors,
            FreeParams { g_lrs: 48e-6, r_seg: 1.0 },
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert!((out.params.g_lrs / 40e-6 - 1.0).abs() < 0.02, "{:?}", out.params);
        assert!((out.params.r_seg / 2.0 - 1.0).abs() < 0.02, "{:?}", out.params);
        assert_eq!(out.device.g_lrs_nominal, out.params.g_lrs);
        assert_eq!(out.crossbar.r_seg, out.params.r_seg);
    }

    #[test]
    fn rejects_bad_input() {
        let d = DeviceParams::default();
        let c = CrossbarConfig::new(4);
        let start = FreeParams { g_lrs: 48e-6, r_seg: 1.0 };
        let opts = CalibrationOptions::default();
        let one = [Anchor::full(4, 1e-3)];
        assert!(matches!(
            calibrate_to_anchors(&SequentialGeff, &d, &c, &one, start, &opts),
            Err(Error::InsufficientSizes(_))
        ));
        let bad = [Anchor::full(4, 1e-3), Anchor::sub_array(4, 5, 1e-3)];
        assert!(calibrate_to_anchors(&SequentialGeff, &d, &c, &bad, start, &opts).is_err());
    }

    #[test]
    fn unreachable_anchors_report_failure() {
        // A sub-block larger than its full array cannot be matched.
        let anchors = [Anchor::full(4, 1e-4), Anchor::sub_array(4, 2, 5e-4)];
        let err = calibrate_to_anchors(
            &SequentialGeff,
            &DeviceParams::default(),
            &CrossbarConfig::new(4),
            &anchors,
            FreeParams { g_lrs: 48e-6, r_seg: 1.0 },
            &CalibrationOptions {
                max_iterations: 8,
                ..CalibrationOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Calibration { .. }), "{err}");
    }
}
