//! Newton DC solver for [`NodalSystem`].
//!
//! Each Newton step solves the SPD Jacobian system with conjugate gradients
//! preconditioned by exact tridiagonal solves along every wordline and every
//! bitline (block Jacobi over lines). Cells couple the two layers weakly
//! relative to the wires, so the preconditioned spectrum is tightly clustered.

use alloc::vec;
use alloc::vec::Vec;

use super::NodalSystem;
use crate::device::SinhCell;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Newton / CG controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Required max |KCL residual| per node (A).
    pub abs_tol: f64,
    /// Newton iteration budget.
    pub max_iterations: usize,
    /// CG stops once its residual falls below this fraction of the current
    /// Newton residual.
    pub cg_rel_tol: f64,
    /// CG iteration budget per Newton step.
    pub max_cg_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_iterations: 50,
            cg_rel_tol: 1e-7,
            max_cg_iterations: 5000,
        }
    }
}

/// A converged DC operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    /// Wordline node voltages (V).
    pub wordline: Grid,
    /// Bitline node voltages (V).
    pub bitline: Grid,
    /// Current into each column's virtual ground(s) (A).
    pub column_currents: Vec<f64>,
    /// Current delivered by each row driver (A).
    pub driver_currents: Vec<f64>,
    /// Newton updates taken.
    pub newton_iterations: usize,
    /// Max absolute node-current residual (A).
    pub kcl_residual: f64,
}

impl DcSolution {
    /// Unknown vector in [`NodalSystem`] order, for warm starts.
    pub fn state(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.wordline.as_slice().len());
        x.extend_from_slice(self.wordline.as_slice());
        x.extend_from_slice(self.bitline.as_slice());
        x
    }
}

/// Solves from a zero initial guess.
pub fn solve_dc(system: &NodalSystem, row_voltages: &[f64]) -> Result<DcSolution> {
    DcSolver::new(system.clone(), SolverOptions::default()).solve(row_voltages, None)
}

/// Reusable solver: owns the system and its work buffers.
#[derive(Debug, Clone)]
pub struct DcSolver {
    system: NodalSystem,
    options: SolverOptions,
    uniform: Option<SinhCell>,
    work: Work,
}

#[derive(Debug, Clone, Default)]
struct Work {
    x: Vec<f64>,
    x_trial: Vec<f64>,
    f: Vec<f64>,
    f_trial: Vec<f64>,
    gc: Vec<f64>,
    gc_trial: Vec<f64>,
    dx: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    // Inverse Thomas pivots for wordline and bitline chains.
    w_wl: Vec<f64>,
    w_bl: Vec<f64>,
}

impl DcSolver {
    /// Wraps a system.
    pub fn new(system: NodalSystem, options: SolverOptions) -> Self {
        let len = system.unknowns();
        let n2 = system.n * system.n;
        let first = system.cells[0];
        let uniform = system.cells.iter().all(|c| *c == first).then_some(first);
        let work = Work {
            x: vec![0.0; len],
            x_trial: vec![0.0; len],
            f: vec![0.0; len],
            f_trial: vec![0.0; len],
            gc: vec![0.0; n2],
            gc_trial: vec![0.0; n2],
            dx: vec![0.0; len],
            r: vec![0.0; len],
            z: vec![0.0; len],
            p: vec![0.0; len],
            q: vec![0.0; len],
            w_wl: vec![0.0; n2],
            w_bl: vec![0.0; n2],
        };
        Self {
            system,
            options,
            uniform,
            work,
        }
    }

    /// The wrapped system.
    pub fn system(&self) -> &NodalSystem {
        &self.system
    }

    /// Solver controls.
    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Solves for the operating point with the given row driver voltages.
    ///
    /// `guess` is an unknown vector in [`NodalSystem`] order (see
    /// [`DcSolution::state`]); `None` starts from zero.
    pub fn solve(&mut self, row_voltages: &[f64], guess: Option<&[f64]>) -> Result<DcSolution> {
        let n = self.system.n;
        if row_voltages.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row_voltages.len(),
            });
        }
        if let Some(g) = guess {
            if g.len() != self.system.unknowns() {
                return Err(Error::DimensionMismatch {
                    expected: self.system.unknowns(),
                    actual: g.len(),
                });
            }
        }
        if row_voltages.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::invalid("row_voltages", "must be finite"));
        }
        if self.system.is_parasitic_free() {
            return Ok(self.solve_parasitic_free(row_voltages));
        }
        self.newton(row_voltages, guess)
    }

    fn solve_parasitic_free(&self, row_voltages: &[f64]) -> DcSolution {
        let n = self.system.n;
        let mut wordline = Grid::zeros(n, n);
        let mut column_currents = vec![0.0; n];
        let mut driver_currents = vec![0.0; n];
        for (i, &v) in row_voltages.iter().enumerate() {
            wordline.row_mut(i).fill(v);
            for (col, cell) in column_currents.iter_mut().zip(&self.system.cells[i * n..(i + 1) * n]) {
                let c = cell.current(v);
                *col += c;
                driver_currents[i] += c;
            }
        }
        DcSolution {
            wordline,
            bitline: Grid::zeros(n, n),
            column_currents,
            driver_currents,
            newton_iterations: 0,
            kcl_residual: 0.0,
        }
    }

    fn newton(&mut self, vin: &[f64], guess: Option<&[f64]>) -> Result<DcSolution> {
        let n = self.system.n;
        let gw = 1.0 / self.system.r_seg;
        let vmax = vin.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Below ~2 mΩ the fixed 1 pA target sits under the rounding floor of
        // the wire-current differences; accept the floor there.
        let tol = self
            .options
            .abs_tol
            .max(16.0 * f64::EPSILON * gw * vmax.max(1.0));

        match guess {
            Some(g) => self.work.x.copy_from_slice(g),
            None => self.work.x.fill(0.0),
        }
        let mut fnorm = {
            let w = &mut self.work;
            residual(&self.system, self.uniform, vin, &w.x, &mut w.f, &mut w.gc)
        };
        let mut iterations = 0;
        while fnorm > tol {
            if iterations == self.options.max_iterations {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: fnorm,
                });
            }
            iterations += 1;
            self.factor_preconditioner(gw);
            let cg_tol = (self.options.cg_rel_tol * fnorm).max(0.01 * tol);
            self.pcg(gw, cg_tol)?;

            // Backtrack while the residual grows.
            let mut step = 1.0;
            loop {
                let w = &mut self.work;
                for ((xt, &x), &d) in w.x_trial.iter_mut().zip(&w.x).zip(&w.dx) {
                    *xt = x + step * d;
                }
                let trial = residual(
                    &self.system,
                    self.uniform,
                    vin,
                    &w.x_trial,
                    &mut w.f_trial,
                    &mut w.gc_trial,
                );
                if trial < fnorm || step < 1.0 / 1024.0 {
                    core::mem::swap(&mut w.x, &mut w.x_trial);
                    core::mem::swap(&mut w.f, &mut w.f_trial);
                    core::mem::swap(&mut w.gc, &mut w.gc_trial);
                    fnorm = trial;
                    break;
                }
                step *= 0.5;
            }
            if !fnorm.is_finite() {
                return Err(Error::SingularSystem("non-finite Newton iterate".into()));
            }
        }

        let x = &self.work.x;
        let n2 = n * n;
        let wordline = Grid::from_row_major(n, n, x[..n2].to_vec()).expect("n² entries");
        let bitline = Grid::from_row_major(n, n, x[n2..].to_vec()).expect("n² entries");
        let double = self.system.termination.double();
        let column_currents = (0..n)
            .map(|j| {
                let mut c = gw * bitline[(0, j)];
                if double {
                    c += gw * bitline[(n - 1, j)];
                }
                c
            })
            .collect();
        let driver_currents = (0..n)
            .map(|i| {
                let mut c = gw * (vin[i] - wordline[(i, 0)]);
                if double {
                    c += gw * (vin[i] - wordline[(i, n - 1)]);
                }
                c
            })
            .collect();
        Ok(DcSolution {
            wordline,
            bitline,
            column_currents,
            driver_currents,
            newton_iterations: iterations,
            kcl_residual: fnorm,
        })
    }

    /// Thomas pivots for every wordline (along j) and bitline (along i).
    fn factor_preconditioner(&mut self, gw: f64) {
        let n = self.system.n;
        let e2 = gw * gw;
        let sys = &self.system;
        let w = &mut self.work;
        for i in 0..n {
            let gc = &w.gc[i * n..(i + 1) * n];
            let piv = &mut w.w_wl[i * n..(i + 1) * n];
            let mut prev = 0.0;
            for j in 0..n {
                let d = gw * sys.degree(j) + gc[j] - e2 * prev;
                prev = 1.0 / d;
                piv[j] = prev;
            }
        }
        for i in 0..n {
            let deg = gw * sys.degree(i);
            let (before, rest) = w.w_bl.split_at_mut(i * n);
            let row = &mut rest[..n];
            let gc = &w.gc[i * n..(i + 1) * n];
            if i == 0 {
                for j in 0..n {
                    row[j] = 1.0 / (deg + gc[j]);
                }
            } else {
                let prev = &before[(i - 1) * n..];
                for j in 0..n {
                    row[j] = 1.0 / (deg + gc[j] - e2 * prev[j]);
                }
            }
        }
    }

    /// `z = M⁻¹ r` with the line preconditioner.
    fn precondition(n: usize, gw: f64, w_wl: &[f64], w_bl: &[f64], r: &[f64], z: &mut [f64]) {
        let n2 = n * n;
        let e = -gw;
        let (r_wl, r_bl) = r.split_at(n2);
        let (z_wl, z_bl) = z.split_at_mut(n2);
        for i in 0..n {
            let piv = &w_wl[i * n..(i + 1) * n];
            let rr = &r_wl[i * n..(i + 1) * n];
            let zz = &mut z_wl[i * n..(i + 1) * n];
            let mut y = 0.0;
            for j in 0..n {
                y = (rr[j] - e * y) * piv[j];
                zz[j] = y;
            }
            for j in (0..n - 1).rev() {
                zz[j] -= e * piv[j] * zz[j + 1];
            }
        }
        // Bitlines run along i; sweep all columns in lockstep.
        for i in 0..n {
            let (before, rest) = z_bl.split_at_mut(i * n);
            let row = &mut rest[..n];
            let piv = &w_bl[i * n..(i + 1) * n];
            let rr = &r_bl[i * n..(i + 1) * n];
            if i == 0 {
                for j in 0..n {
                    row[j] = rr[j] * piv[j];
                }
            } else {
                let prev = &before[(i - 1) * n..i * n];
                for j in 0..n {
                    row[j] = (rr[j] - e * prev[j]) * piv[j];
                }
            }
        }
        for i in (0..n - 1).rev() {
            let (head, tail) = z_bl.split_at_mut((i + 1) * n);
            let row = &mut head[i * n..];
            let next = &tail[..n];
            let piv = &w_bl[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] -= e * piv[j] * next[j];
            }
        }
    }

    /// Solves `J dx = -f` into `work.dx`.
    fn pcg(&mut self, gw: f64, tol: f64) -> Result<()> {
        let n = self.system.n;
        let sys = &self.system;
        let w = &mut self.work;
        w.dx.fill(0.0);
        for (r, &f) in w.r.iter_mut().zip(&w.f) {
            *r = -f;
        }
        Self::precondition(n, gw, &w.w_wl, &w.w_bl, &w.r, &mut w.z);
        w.p.copy_from_slice(&w.z);
        let mut rz = dot(&w.r, &w.z);
        for _ in 0..self.options.max_cg_iterations {
            jacobian_mul(sys, gw, &w.gc, &w.p, &mut w.q);
            let pq = dot(&w.p, &w.q);
            if !(pq > 0.0) {
                if rz == 0.0 {
                    return Ok(());
                }
                return Err(Error::SingularSystem(alloc::format!(
                    "CG breakdown (p·Jp = {pq:e})"
                )));
            }
            let alpha = rz / pq;
            let mut rmax = 0.0f64;
            for k in 0..w.dx.len() {
                w.dx[k] += alpha * w.p[k];
                w.r[k] -= alpha * w.q[k];
                rmax = rmax.max(w.r[k].abs());
            }
            if rmax <= tol {
                return Ok(());
            }
            Self::precondition(n, gw, &w.w_wl, &w.w_bl, &w.r, &mut w.z);
            let rz_new = dot(&w.r, &w.z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (p, &z) in w.p.iter_mut().zip(&w.z) {
                *p = z + beta * *p;
            }
        }
        Err(Error::SingularSystem(alloc::format!(
            "CG did not reach {tol:e} A in {} iterations",
            self.options.max_cg_iterations
        )))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sinh` and `cosh` of `x` from one `expm1`, accurate for tiny `x`.
#[inline]
fn sinh_cosh(x: f64) -> (f64, f64) {
    let em = libm::expm1(x);
    let ep = em + 1.0;
    let s = em * (em + 2.0) / (2.0 * ep);
    let c = 1.0 + em * em / (2.0 * ep);
    (s, c)
}

/// KCL residual (current leaving each node) and cell conductances at `x`.
/// Returns the max absolute residual.
fn residual(
    sys: &NodalSystem,
    uniform: Option<SinhCell>,
    vin: &[f64],
    x: &[f64],
    f: &mut [f64],
    gc: &mut [f64],
) -> f64 {
    let n = sys.n;
    let n2 = n * n;
    let gw = 1.0 / sys.r_seg;
    let double = sys.termination.double();
    let (wl, bl) = x.split_at(n2);
    let (f_wl, f_bl) = f.split_at_mut(n2);

    // Cell currents first; they enter both layers with opposite sign.
    for k in 0..n2 {
        let cell = uniform.unwrap_or(sys.cells[k]);
        let (s, c) = sinh_cosh(cell.b * (wl[k] - bl[k]));
        f_wl[k] = cell.a * s;
        f_bl[k] = -cell.a * s;
        gc[k] = cell.a * cell.b * c;
    }

    for i in 0..n {
        let row = &wl[i * n..(i + 1) * n];
        let out = &mut f_wl[i * n..(i + 1) * n];
        for j in 0..n {
            let left = if j == 0 { vin[i] } else { row[j - 1] };
            let mut acc = row[j] - left;
            if j + 1 < n {
                acc += row[j] - row[j + 1];
            } else if double {
                acc += row[j] - vin[i];
            }
            out[j] += gw * acc;
        }
    }
    for i in 0..n {
        let row = &bl[i * n..(i + 1) * n];
        let out = &mut f_bl[i * n..(i + 1) * n];
        for j in 0..n {
            let down = if i == 0 { 0.0 } else { bl[(i - 1) * n + j] };
            let mut acc = row[j] - down;
            if i + 1 < n {
                acc += row[j] - bl[(i + 1) * n + j];
            } else if double {
                acc += row[j];
            }
            out[j] += gw * acc;
        }
    }
    f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `q = J p` for the Jacobian with cell conductances `gc`.
fn jacobian_mul(sys: &NodalSystem, gw: f64, gc: &[f64], p: &[f64], q: &mut [f64]) {
    let n = sys.n;
    let n2 = n * n;
    let double = sys.termination.double();
    let (p_wl, p_bl) = p.split_at(n2);
    let (q_wl, q_bl) = q.split_at_mut(n2);
    for k in 0..n2 {
        let c = gc[k] * (p_wl[k] - p_bl[k]);
        q_wl[k] = c;
        q_bl[k] = -c;
    }
    let last_deg = if double { 2.0 } else { 1.0 };
    for i in 0..n {
        let row = &p_wl[i * n..(i + 1) * n];
        let out = &mut q_wl[i * n..(i + 1) * n];
        if n == 1 {
            out[0] += gw * last_deg * row[0];
            continue;
        }
        out[0] += gw * (2.0 * row[0] - row[1]);
        for j in 1..n - 1 {
            out[j] += gw * (2.0 * row[j] - row[j - 1] - row[j + 1]);
        }
        out[n - 1] += gw * (last_deg * row[n - 1] - row[n - 2]);
    }
    for i in 0..n {
        let deg = if i + 1 < n { 2.0 } else { last_deg };
        let out = &mut q_bl[i * n..(i + 1) * n];
        let row = &p_bl[i * n..(i + 1) * n];
        for j in 0..n {
            let mut acc = deg * row[j];
            if i > 0 {
                acc -= p_bl[(i - 1) * n + j];
            }
            if i + 1 < n {
                acc -= p_bl[(i + 1) * n + j];
            }
            out[j] += gw * acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_system, CellStateMatrix, CrossbarConfig, Termination};
    use crate::device::{CellState, DeviceParams};

    #[test]
    fn sinh_cosh_accuracy() {
        for &x in &[0.0, 1e-12, 1e-6, 0.01, 0.4, 1.2, -0.7] {
            let (s, c) = sinh_cosh(x);
            let (es, ec) = (libm::sinh(x), libm::cosh(x));
            assert!((s - es).abs() <= 4.0 * f64::EPSILON * es.abs().max(f64::MIN_POSITIVE));
            assert!((c - ec).abs() <= 4.0 * f64::EPSILON * ec);
        }
    }

    #[test]
    fn single_cell_without_parasitics() {
        let d = DeviceParams::default();
        let cfg = CrossbarConfig::new(1).with_r_seg(0.0);
        let sys = build_system(&cfg, &CellStateMatrix::uniform(1, CellState::Lrs), &d).unwrap();
        let sol = solve_dc(&sys, &[0.2]).unwrap();
        assert_eq!(sol.column_currents[0], d.lrs.current(0.2));
    }

    #[test]
    fn zero_input_gives_zero_solution() {
        let sys = build_system(
            &CrossbarConfig::new(4),
            &CellStateMatrix::uniform(4, CellState::Lrs),
            &DeviceParams::default(),
        )
        .unwrap();
        let sol = solve_dc(&sys, &[0.0; 4]).unwrap();
        assert_eq!(sol.newton_iterations, 0);
        assert!(sol.wordline.as_slice().iter().all(|&v| v == 0.0));
        assert!(sol.column_currents.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn kcl_residual_below_tolerance() {
        for term in [Termination::SingleSided, Termination::DoubleSided] {
            let cfg = CrossbarConfig {
                termination: term,
                ..CrossbarConfig::new(12).with_r_seg(2.5)
            };
            let sys =
                build_system(&cfg, &CellStateMatrix::uniform(12, CellState::Lrs), &DeviceParams::default())
                    .unwrap();
            let mut v = vec![0.0; 12];
            v[5] = 0.6;
            v[11] = 0.3;
            let sol = solve_dc(&sys, &v).unwrap();
            assert!(sol.kcl_residual <= 1e-12, "{}", sol.kcl_residual);
            assert!(sol.newton_iterations <= 10);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let sys = build_system(
            &CrossbarConfig::new(6),
            &CellStateMatrix::uniform(6, CellState::Lrs),
            &DeviceParams::default(),
        )
        .unwrap();
        let opts = SolverOptions {
            max_iterations: 1,
            ..SolverOptions::default()
        };
        let err = DcSolver::new(sys, opts).solve(&[0.6; 6], None).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = build_system(
            &CrossbarConfig::new(2),
            &CellStateMatrix::uniform(2, CellState::Lrs),
            &DeviceParams::default(),
        )
        .unwrap();
        assert!(solve_dc(&sys, &[0.1]).is_err());
        assert!(solve_dc(&sys, &[0.1, f64::NAN]).is_err());
        let mut s = DcSolver::new(sys, SolverOptions::default());
        assert!(s.solve(&[0.1, 0.0], Some(&[0.0; 3])).is_err());
    }
}
