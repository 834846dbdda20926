//! Nominal ReRAM cell model.
//!
//! A cell conducts `I(V) = a·sinh(b·V)`. Each programmed state (LRS/HRS) is
//! its own `(a, b)` pair, fitted so the chord conductance `I(v_read)/v_read`
//! hits the state's nominal conductance exactly.

mod calibration;

pub use calibration::{
    calibrate_to_anchors, Anchor, CalibrationOptions, CalibrationOutcome, FreeParams,
    GeffSimulator, SequentialGeff,
};

use crate::error::{invalid, require_positive, Result};
use crate::fingerprint::FingerprintBuilder;

/// Default sinh shape coefficient (1/V).
pub const DEFAULT_SHAPE_B: f64 = 2.0;
/// Default read / drive amplitude (V).
pub const DEFAULT_V_READ: f64 = 0.7;
/// Default LRS conductance (S), fitted to the shipped anchors.
pub const DEFAULT_G_LRS: f64 = 6.421823769162722e-5;
/// Default LRS/HRS conductance ratio.
pub const DEFAULT_HRS_RATIO: f64 = 100.0;

/// `(a, b)` coefficients of one programmed state.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinhCell {
    /// Current scale (A).
    pub a: f64,
    /// Voltage shape (1/V).
    pub b: f64,
}

impl SinhCell {
    /// Validated constructor.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        require_positive("a", a)?;
        require_positive("b", b)?;
        Ok(Self { a, b })
    }

    /// A cell that is ohmic with conductance `g` to first order.
    ///
    /// Used for linear-limit checks; `b` is small enough that `sinh` is
    /// linear to machine precision over ±1 V.
    pub fn near_linear(g: f64) -> Self {
        const B: f64 = 1e-9;
        Self { a: g / B, b: B }
    }

    /// `a·sinh(b·v)`.
    #[inline]
    pub fn current(&self, v: f64) -> f64 {
        cell_current(self, v)
    }

    /// `dI/dV = a·b·cosh(b·v)`.
    #[inline]
    pub fn conductance(&self, v: f64) -> f64 {
        cell_small_signal_conductance(self, v)
    }

    /// `I(v)/v`, with the `v → 0` limit `a·b`.
    pub fn chord_conductance(&self, v: f64) -> f64 {
        if v == 0.0 {
            self.a * self.b
        } else {
            self.current(v) / v
        }
    }
}

/// Cell current `a·sinh(b·v)` in amperes. Odd and strictly increasing in `v`.
#[inline]
pub fn cell_current(cell: &SinhCell, v: f64) -> f64 {
    cell.a * libm::sinh(cell.b * v)
}

/// Exact derivative of [`cell_current`]; always positive.
#[inline]
pub fn cell_small_signal_conductance(cell: &SinhCell, v: f64) -> f64 {
    cell.a * cell.b * libm::cosh(cell.b * v)
}

/// Fits `a` so that the chord conductance at `v_read` equals `g_target`,
/// keeping `b = shape_b`.
pub fn fit_sinh_params(g_target: f64, v_read: f64, shape_b: f64) -> Result<SinhCell> {
    require_positive("g_target", g_target)?;
    require_positive("v_read", v_read)?;
    require_positive("shape_b", shape_b)?;
    let a = g_target * v_read / libm::sinh(shape_b * v_read);
    SinhCell::new(a, shape_b)
}

/// Programmed resistance state of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CellState {
    /// Low-resistance state.
    Lrs,
    /// High-resistance state.
    Hrs,
}

impl CellState {
    /// Lowercase name used in configs and fingerprints.
    pub fn as_str(self) -> &'static str {
        match self {
            CellState::Lrs => "lrs",
            CellState::Hrs => "hrs",
        }
    }
}

/// Both programmed states of a device, fitted at a common read voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceParams {
    /// Nominal LRS chord conductance at `v_read` (S).
    pub g_lrs_nominal: f64,
    /// Nominal HRS chord conductance at `v_read` (S).
    pub g_hrs_nominal: f64,
    /// Read voltage the states are fitted at (V).
    pub v_read: f64,
    /// Fitted LRS coefficients.
    pub lrs: SinhCell,
    /// Fitted HRS coefficients.
    pub hrs: SinhCell,
}

impl DeviceParams {
    /// Fits both states from an LRS conductance and an LRS/HRS ratio.
    pub fn new(g_lrs: f64, hrs_ratio: f64, shape_b: f64, v_read: f64) -> Result<Self> {
        require_positive("hrs_ratio", hrs_ratio)?;
        if hrs_ratio <= 1.0 {
            return Err(invalid("hrs_ratio", "must exceed 1 so that g_lrs > g_hrs"));
        }
        Self::from_conductances(g_lrs, g_lrs / hrs_ratio, shape_b, v_read)
    }

    /// Fits both states from explicit conductances.
    pub fn from_conductances(g_lrs: f64, g_hrs: f64, shape_b: f64, v_read: f64) -> Result<Self> {
        require_positive("g_lrs", g_lrs)?;
        require_positive("g_hrs", g_hrs)?;
        if g_hrs >= g_lrs {
            return Err(invalid("g_hrs", "must be below g_lrs"));
        }
        Ok(Self {
            g_lrs_nominal: g_lrs,
            g_hrs_nominal: g_hrs,
            v_read,
            lrs: fit_sinh_params(g_lrs, v_read, shape_b)?,
            hrs: fit_sinh_params(g_hrs, v_read, shape_b)?,
        })
    }

    /// Coefficients for a state.
    pub fn cell(&self, state: CellState) -> SinhCell {
        match state {
            CellState::Lrs => self.lrs,
            CellState::Hrs => self.hrs,
        }
    }

    /// Shape coefficient shared by both states.
    pub fn shape_b(&self) -> f64 {
        self.lrs.b
    }

    /// Same device with a different LRS conductance, HRS ratio preserved.
    pub fn with_g_lrs(&self, g_lrs: f64) -> Result<Self> {
        Self::new(
            g_lrs,
            self.g_lrs_nominal / self.g_hrs_nominal,
            self.shape_b(),
            self.v_read,
        )
    }

    pub(crate) fn hash_into(&self, fp: FingerprintBuilder) -> FingerprintBuilder {
        fp.f64("device.g_lrs", self.g_lrs_nominal)
            .f64("device.g_hrs", self.g_hrs_nominal)
            .f64("device.v_read", self.v_read)
            .f64("device.shape_b", self.shape_b())
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::new(DEFAULT_G_LRS, DEFAULT_HRS_RATIO, DEFAULT_SHAPE_B, DEFAULT_V_READ)
            .expect("default device parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn current_examples() {
        let cell = SinhCell::new(1e-5, 1.0).unwrap();
        assert_eq!(cell_current(&cell, 0.0), 0.0);
        // Taylor series of sinh(0.2) to x^9 is exact well below 1e-15.
        let x: f64 = 0.2;
        let taylor = x + x.powi(3) / 6.0 + x.powi(5) / 120.0 + x.powi(7) / 5040.0
            + x.powi(9) / 362_880.0;
        assert!(rel(cell_current(&cell, 0.2), 1e-5 * taylor) < 1e-14);
        assert!((cell_current(&cell, 0.2) - 2.0134e-6).abs() < 1e-10);
        assert_eq!(cell_current(&cell, -0.2), -cell_current(&cell, 0.2));
    }

    #[test]
    fn conductance_examples() {
        let cell = SinhCell::new(1e-5, 1.0).unwrap();
        assert_eq!(cell_small_signal_conductance(&cell, 0.0), 1e-5);
        let h = 1e-7;
        let fd = (cell.current(0.15 + h) - cell.current(0.15 - h)) / (2.0 * h);
        assert!(rel(cell.conductance(0.15), fd) < 1e-5);
        assert_eq!(cell.conductance(0.3), cell.conductance(-0.3));
    }

    #[test]
    fn fit_examples() {
        let cell = fit_sinh_params(50e-6, 0.2, 2.0).unwrap();
        assert_eq!(cell.b, 2.0);
        assert!(rel(cell.a, 50e-6 * 0.2 / libm::sinh(0.4)) < 1e-15);
        assert!(rel(cell.current(0.2) / 0.2, 50e-6) < 1e-12);

        // Linear limit: a·b → g as b → 0.
        let lin = fit_sinh_params(50e-6, 0.2, 1e-9).unwrap();
        assert!(rel(lin.a * lin.b, 50e-6) < 1e-12);
    }

    #[test]
    fn fit_rejects_non_positive() {
        assert!(fit_sinh_params(0.0, 0.2, 2.0).is_err());
        assert!(fit_sinh_params(50e-6, -0.2, 2.0).is_err());
        assert!(fit_sinh_params(50e-6, 0.2, 0.0).is_err());
        assert!(fit_sinh_params(f64::NAN, 0.2, 2.0).is_err());
    }

    #[test]
    fn device_params_invariants() {
        let d = DeviceParams::default();
        assert!(d.g_lrs_nominal > d.g_hrs_nominal);
        for state in [CellState::Lrs, CellState::Hrs] {
            let cell = d.cell(state);
            let nominal = match state {
                CellState::Lrs => d.g_lrs_nominal,
                CellState::Hrs => d.g_hrs_nominal,
            };
            assert!(rel(cell.chord_conductance(d.v_read), nominal) < 1e-9);
        }
        assert!(DeviceParams::new(48e-6, 1.0, 2.0, 0.6).is_err());
        assert!(DeviceParams::from_conductances(1e-6, 2e-6, 2.0, 0.6).is_err());
    }

    #[test]
    fn reference_current_at_read_voltage() {
        let d = DeviceParams::new(48e-6, 100.0, 2.0, 0.2).unwrap();
        assert!(rel(d.lrs.current(0.2), 9.6e-6) < 1e-12);
    }

    proptest! {
        #[test]
        fn current_odd_and_monotone(
            a in 1e-8f64..1e-3, b in 0.01f64..10.0, v in -1.0f64..1.0, dv in 1e-6f64..0.5,
        ) {
            let cell = SinhCell::new(a, b).unwrap();
            prop_assert_eq!(cell.current(-v), -cell.current(v));
            prop_assert!(cell.current(v + dv) > cell.current(v));
        }

        #[test]
        fn conductance_matches_central_difference(
            a in 1e-8f64..1e-3, b in 0.01f64..10.0, v in -1.0f64..1.0,
        ) {
            let cell = SinhCell::new(a, b).unwrap();
            let h = 1e-6;
            let fd = (cell.current(v + h) - cell.current(v - h)) / (2.0 * h);
            let g = cell.conductance(v);
            prop_assert!(g > 0.0);
            prop_assert!(((g - fd) / g).abs() < 1e-5);
        }

        #[test]
        fn fit_round_trip(g in 1e-8f64..1e-2, v in 0.01f64..1.5, b in 0.01f64..10.0) {
            let cell = fit_sinh_params(g, v, b).unwrap();
            prop_assert!(rel(cell.chord_conductance(v), g) < 1e-12);
        }
    }
}
