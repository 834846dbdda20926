//! Crossbar nodal model and DC solver.
//!
//! Layout convention: cell `(i, j)` sits on row (wordline) `i` and column
//! (bitline) `j`. Row drivers attach at the `j = 0` end of each wordline and
//! column virtual grounds at the `i = 0` end of each bitline, so `(0, 0)` is
//! the cell nearest both the driver and the ADC and `(N-1, N-1)` the farthest.
//! Double-sided termination adds a driver at `j = N-1` and a virtual ground
//! at `i = N-1`.
//!
//! Unknowns are one wordline node and one bitline node per cell (`2·N²`).
//! Every wire segment, including the driver and ADC segments, has
//! resistance `r_seg`.

mod elmore;
mod solver;

pub use elmore::{elmore_delay, ladder_delay, max_frequency, path_segments};
pub use solver::{solve_dc, DcSolution, DcSolver, SolverOptions};

use alloc::vec::Vec;

use crate::device::{CellState, DeviceParams, SinhCell};
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::fingerprint::FingerprintBuilder;

/// Default wire resistance per segment (Ω), fitted to the shipped anchors.
pub const DEFAULT_R_SEG: f64 = 0.4264096424257818;
/// Default wire capacitance per segment (F).
pub const DEFAULT_C_SEG: f64 = 0.5e-15;
/// Default settling multiple applied to the Elmore delay.
pub const DEFAULT_K_SETTLE: f64 = 7.0;

/// Where drivers and virtual grounds attach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    /// Drivers on one wordline end, virtual grounds on one bitline end.
    #[default]
    SingleSided,
    /// Both ends of every line are terminated.
    DoubleSided,
}

impl Termination {
    /// Config spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::SingleSided => "single_sided",
            Termination::DoubleSided => "double_sided",
        }
    }

    fn double(self) -> bool {
        matches!(self, Termination::DoubleSided)
    }
}

/// Geometry and wire parasitics of one square array.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossbarConfig {
    /// Rows = columns.
    pub n: usize,
    /// Resistance per wire segment (Ω).
    pub r_seg: f64,
    /// Capacitance per wire segment (F); only used for delay estimates.
    pub c_seg: f64,
    /// Driver / virtual-ground placement.
    pub termination: Termination,
    /// Input amplitude (V).
    pub v_drive: f64,
}

impl CrossbarConfig {
    /// Single-sided array with default parasitics.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            r_seg: DEFAULT_R_SEG,
            c_seg: DEFAULT_C_SEG,
            termination: Termination::SingleSided,
            v_drive: crate::device::DEFAULT_V_READ,
        }
    }

    /// Checks the field domains.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(crate::error::invalid("n", "array dimension must be >= 1"));
        }
        require_non_negative("r_seg", self.r_seg)?;
        require_non_negative("c_seg", self.c_seg)?;
        require_positive("v_drive", self.v_drive)
    }

    /// Copy with a different size.
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// Copy with a different segment resistance.
    pub fn with_r_seg(mut self, r_seg: f64) -> Self {
        self.r_seg = r_seg;
        self
    }

    /// Hash of the wire settings, excluding `n` and `v_drive`.
    pub(crate) fn hash_into(&self, fp: FingerprintBuilder) -> FingerprintBuilder {
        fp.f64("wire.r_seg", self.r_seg)
            .f64("wire.c_seg", self.c_seg)
            .str("wire.termination", self.termination.as_str())
    }
}

/// Programmed state of every cell, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellStateMatrix {
    n: usize,
    states: Vec<CellState>,
}

impl CellStateMatrix {
    /// All cells in one state.
    pub fn uniform(n: usize, state: CellState) -> Self {
        Self {
            n,
            states: alloc::vec![state; n * n],
        }
    }

    /// From row-major states; fails unless `states.len() == n²`.
    pub fn from_row_major(n: usize, states: Vec<CellState>) -> Result<Self> {
        if states.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: states.len(),
            });
        }
        Ok(Self { n, states })
    }

    /// Dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// State of cell `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> CellState {
        self.states[i * self.n + j]
    }

    /// `Some(state)` if every cell shares it.
    pub fn uniform_state(&self) -> Option<CellState> {
        let first = *self.states.first()?;
        self.states.iter().all(|&s| s == first).then_some(first)
    }

    /// Resolves states to sinh coefficients.
    pub fn to_cells(&self, device: &DeviceParams) -> Vec<SinhCell> {
        self.states.iter().map(|&s| device.cell(s)).collect()
    }
}

/// The crossbar as a nonlinear nodal system ready for DC solving.
#[derive(Debug, Clone)]
pub struct NodalSystem {
    n: usize,
    r_seg: f64,
    termination: Termination,
    cells: Vec<SinhCell>,
}

/// Builds the nodal system for `config` with cells resolved from `states`.
pub fn build_system(
    config: &CrossbarConfig,
    states: &CellStateMatrix,
    device: &DeviceParams,
) -> Result<NodalSystem> {
    if states.n() != config.n {
        return Err(Error::DimensionMismatch {
            expected: config.n,
            actual: states.n(),
        });
    }
    NodalSystem::new(config, states.to_cells(device))
}

impl NodalSystem {
    /// Builds from explicit per-cell coefficients (row-major, `n²` entries).
    pub fn new(config: &CrossbarConfig, cells: Vec<SinhCell>) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        if cells.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: cells.len(),
            });
        }
        Ok(Self {
            n,
            r_seg: config.r_seg,
            termination: config.termination,
            cells,
        })
    }

    /// Array dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of node unknowns, `2·N²`.
    pub fn unknowns(&self) -> usize {
        2 * self.n * self.n
    }

    /// Segment resistance.
    pub fn r_seg(&self) -> f64 {
        self.r_seg
    }

    /// Termination style.
    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Cell coefficients, row-major.
    pub fn cells(&self) -> &[SinhCell] {
        &self.cells
    }

    /// With `r_seg = 0` every wordline collapses onto its driver and every
    /// bitline onto virtual ground.
    pub fn is_parasitic_free(&self) -> bool {
        self.r_seg == 0.0
    }

    /// Index of wordline node `(i, j)` in the unknown vector.
    pub fn wordline_index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Index of bitline node `(i, j)` in the unknown vector.
    pub fn bitline_index(&self, i: usize, j: usize) -> usize {
        self.n * self.n + i * self.n + j
    }

    /// Number of wire links (neighbours or terminals) at position `k` along
    /// a line of length `n`; the terminal at `k = 0` always exists.
    fn degree(&self, k: usize) -> f64 {
        if k + 1 < self.n || self.termination.double() {
            2.0
        } else {
            1.0
        }
    }

    /// Jacobian of the KCL residual at `x` as `(row, col, value)` triplets,
    /// row-major by node. Requires `r_seg > 0`.
    pub fn jacobian_triplets(&self, x: &[f64]) -> Vec<(usize, usize, f64)> {
        assert!(!self.is_parasitic_free(), "no nodal system without wire resistance");
        let n = self.n;
        let n2 = n * n;
        let gw = 1.0 / self.r_seg;
        let mut out = Vec::with_capacity(8 * n2);
        for i in 0..n {
            for j in 0..n {
                let w = self.wordline_index(i, j);
                let b = self.bitline_index(i, j);
                let gc = self.cells[i * n + j].conductance(x[w] - x[b]);
                out.push((w, w, gw * self.degree(j) + gc));
                if j > 0 {
                    out.push((w, w - 1, -gw));
                }
                if j + 1 < n {
                    out.push((w, w + 1, -gw));
                }
                out.push((w, b, -gc));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let w = self.wordline_index(i, j);
                let b = self.bitline_index(i, j);
                let gc = self.cells[i * n + j].conductance(x[w] - x[b]);
                out.push((b, b, gw * self.degree(i) + gc));
                if i > 0 {
                    out.push((b, b - n, -gw));
                }
                if i + 1 < n {
                    out.push((b, b + n, -gw));
                }
                out.push((b, w, -gc));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(n: usize, termination: Termination) -> NodalSystem {
        let cfg = CrossbarConfig {
            termination,
            ..CrossbarConfig::new(n).with_r_seg(1.0)
        };
        build_system(&cfg, &CellStateMatrix::uniform(n, CellState::Lrs), &DeviceParams::default())
            .unwrap()
    }

    #[test]
    fn smallest_array() {
        let sys = system(1, Termination::SingleSided);
        assert_eq!(sys.unknowns(), 2);
        let t = sys.jacobian_triplets(&[0.0, 0.0]);
        // Diagonals carry one terminal segment each plus the cell.
        let gc = DeviceParams::default().lrs.conductance(0.0);
        assert!(t.contains(&(0, 0, 1.0 + gc)));
        assert!(t.contains(&(1, 1, 1.0 + gc)));
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn three_by_three_pattern() {
        for term in [Termination::SingleSided, Termination::DoubleSided] {
            let sys = system(3, term);
            assert_eq!(sys.unknowns(), 18);
            let t = sys.jacobian_triplets(&[0.0; 18]);
            let mut off = [0usize; 18];
            for &(r, c, v) in &t {
                if r != c {
                    off[r] += 1;
                    assert!(v < 0.0);
                    // Symmetric pattern.
                    assert!(t.iter().any(|&(r2, c2, v2)| r2 == c && c2 == r && v2 == v));
                }
            }
            assert!(off.iter().all(|&k| (1..=4).contains(&k)));
            // Hand count: per line 2 interior links ×2 directions, 6 lines, plus 9 cells ×2.
            assert_eq!(off.iter().sum::<usize>(), 6 * 4 + 18);
        }
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let cfg = CrossbarConfig::new(3);
        let states = CellStateMatrix::uniform(2, CellState::Lrs);
        assert!(matches!(
            build_system(&cfg, &states, &DeviceParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(CellStateMatrix::from_row_major(2, alloc::vec![CellState::Hrs; 3]).is_err());
        assert!(CrossbarConfig::new(0).validate().is_err());
        assert!(CrossbarConfig::new(2).with_r_seg(-1.0).validate().is_err());
    }
}
