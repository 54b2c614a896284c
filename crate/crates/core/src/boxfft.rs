//! Discrete Fourier transforms on the periodic box of a [`Grid`].
//!
//! Layout is row-major with axis 1 contiguous. The forward transform is
//! unnormalized, the inverse carries the `1/N` factor, so a multiplier
//! `m_k` applied between them realizes the periodic convolution whose DFT is
//! `m_k`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Rows handed to one rayon task.
const ROWS_PER_TASK: usize = 32;

#[derive(Clone)]
pub(crate) struct BoxTransform {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for BoxTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoxTransform")
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

fn process_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
    let n = fft.len();
    data.par_chunks_mut(n * ROWS_PER_TASK)
        .for_each(|chunk| fft.process(chunk));
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

impl BoxTransform {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid
            .points()
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inverse = grid
            .points()
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        Self {
            grid,
            forward,
            inverse,
        }
    }

    /// Multiplies the DFT of `data` by `multiplier` (natural layout) and
    /// transforms back, in place.
    pub fn apply_multiplier(&self, data: &mut [Complex64], multiplier: &[f64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        debug_assert_eq!(multiplier.len(), self.grid.len());
        let scale = 1.0 / self.grid.len() as f64;
        if self.grid.dim() == 1 {
            self.forward[0].process(data);
            for (d, &m) in data.iter_mut().zip(multiplier) {
                *d *= m * scale;
            }
            self.inverse[0].process(data);
            return;
        }
        let n0 = self.grid.points_along(0);
        let n1 = self.grid.points_along(1);
        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        process_rows(&self.forward[1], data);
        transpose(data, &mut t, n0, n1);
        process_rows(&self.forward[0], &mut t);
        // t[i1 * n0 + i0] holds bin (i0, i1)
        t.par_chunks_mut(n0).enumerate().for_each(|(i1, col)| {
            for (i0, v) in col.iter_mut().enumerate() {
                *v *= multiplier[i0 * n1 + i1] * scale;
            }
        });
        process_rows(&self.inverse[0], &mut t);
        transpose(&t, data, n1, n0);
        process_rows(&self.inverse[1], data);
    }

    /// Unnormalized forward DFT, natural layout in and out.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        for d in data.iter_mut() {
            *d *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        if self.grid.dim() == 1 {
            plans[0].process(data);
            return;
        }
        let n0 = self.grid.points_along(0);
        let n1 = self.grid.points_along(1);
        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        process_rows(&plans[1], data);
        transpose(data, &mut t, n0, n1);
        process_rows(&plans[0], &mut t);
        transpose(&t, data, n1, n0);
    }
}
