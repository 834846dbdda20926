//! Segment-parallel characterization.
//!
//! Workers pull row indices from a shared counter and each owns its solver
//! state. Segments never share warm starts, so results are identical for any
//! worker count and completion order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use reram_dse_core::circuit::{CellStateMatrix, CrossbarConfig, SolverOptions};
use reram_dse_core::device::{CellState, DeviceParams, GeffSimulator};
use reram_dse_core::testbench::{assemble, CharacterizationResult, CharacterizationSetup, SegmentRunner};
use reram_dse_core::{Grid, Result};

/// Default worker count: the machine's available parallelism.
pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `run(worker, row)` for every row in `0..n` on up to `workers`
/// threads and returns the outputs in row order.
pub fn map_rows<W, T, M, R>(n: usize, workers: usize, make: M, run: R) -> Vec<Result<T>>
where
    T: Send,
    M: Fn() -> Result<W> + Sync,
    R: Fn(&mut W, usize) -> Result<T> + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut worker = match make() {
                    Ok(w) => Some(w),
                    Err(e) => {
                        // Claim one row to report the setup failure.
                        let row = next.fetch_add(1, Ordering::Relaxed);
                        if row < n {
                            slots.lock().expect("poisoned")[row] = Some(Err(e));
                        }
                        None
                    }
                };
                while let Some(w) = worker.as_mut() {
                    let row = next.fetch_add(1, Ordering::Relaxed);
                    if row >= n {
                        break;
                    }
                    let out = run(w, row);
                    slots.lock().expect("poisoned")[row] = Some(out);
                }
            });
        }
    });
    let slots = slots.into_inner().expect("poisoned");
    // Rows left unclaimed after a setup failure are reported as skipped.
    slots
        .into_iter()
        .enumerate()
        .filter_map(|(row, s)| {
            s.or_else(|| {
                Some(Err(reram_dse_core::Error::InvalidParameter {
                    name: "segment",
                    reason: format!("row {row} not run after worker setup failed"),
                }))
            })
        })
        .collect()
}

/// Characterizes one size on `workers` threads. `progress(done, total)` is
/// called after each segment.
pub fn characterize_parallel(
    setup: &CharacterizationSetup,
    bits_list: &[u32],
    workers: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<CharacterizationResult> {
    let n = setup.crossbar.n;
    setup.worker()?;
    let done = AtomicUsize::new(0);
    let segments = map_rows(n, workers, || setup.worker(), |w, row| {
        let out = w.run(row);
        progress(done.fetch_add(1, Ordering::Relaxed) + 1, n);
        out
    });
    assemble(setup, segments, bits_list)
}

/// [`GeffSimulator`] that spreads rows over threads.
#[derive(Debug, Clone, Copy)]
pub struct ParallelGeff {
    /// Thread count.
    pub workers: usize,
}

impl GeffSimulator for ParallelGeff {
    fn geff(&self, device: &DeviceParams, crossbar: &CrossbarConfig, options: SolverOptions) -> Result<Grid> {
        let n = crossbar.n;
        let v = device.v_read;
        let states = CellStateMatrix::uniform(n, CellState::Lrs);
        let rows = map_rows(
            n,
            self.workers,
            || SegmentRunner::new(crossbar, &states, device, options),
            |r, i| r.run_levels(i, &[v]),
        );
        let mut g = Grid::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            let c = row?;
            for j in 0..n {
                g[(i, j)] = c[(j, 0)] / v;
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use reram_dse_core::device::SequentialGeff;
    use reram_dse_core::testbench::{characterize, TestbenchConfig};

    fn setup(n: usize) -> CharacterizationSetup {
        CharacterizationSetup {
            crossbar: CrossbarConfig::new(n).with_r_seg(0.8),
            device: DeviceParams::default(),
            testbench: TestbenchConfig {
                samples_per_segment: 7,
                ..TestbenchConfig::default()
            },
            solver: SolverOptions::default(),
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s = setup(10);
        let seq = characterize(&s, &[6, 8]).unwrap();
        for w in [1, 3, 16] {
            assert_eq!(characterize_parallel(&s, &[6, 8], w, &|_, _| {}).unwrap(), seq);
        }
        let d = DeviceParams::default();
        let c = CrossbarConfig::new(9).with_r_seg(1.2);
        let o = SolverOptions::default();
        assert_eq!(ParallelGeff { workers: 4 }.geff(&d, &c, o).unwrap(), SequentialGeff.geff(&d, &c, o).unwrap());
    }

    #[test]
    fn progress_counts_every_segment() {
        let count = AtomicUsize::new(0);
        characterize_parallel(&setup(6), &[], 2, &|_, total| {
            assert_eq!(total, 6);
            count.fetch_add(1, Ordering::Relaxed);
        })
        .unwrap();
        assert_eq!(count.into_inner(), 6);
    }

    #[test]
    fn failures_are_collected() {
        let mut s = setup(6);
        s.solver.max_iterations = 1;
        s.crossbar.r_seg = 50.0;
        let err = characterize_parallel(&s, &[], 3, &|_, _| {}).unwrap_err();
        assert!(matches!(err, reram_dse_core::Error::Characterization { n: 6, .. }), "{err}");
    }
}
