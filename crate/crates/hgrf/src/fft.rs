//! Minimal 2-D complex FFT on row-major buffers, built on rustfft.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// The simulator only needs the exp(+2 pi i k x / n) orientation: once for
/// turning wrapped covariances into spectra and once per realization for
/// synthesis.
pub(crate) struct Fft2d {
    nx: usize,
    ny: usize,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    /// Unnormalized inverse DFT.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        assert_eq!(scratch.len(), self.len());
        // Rows are contiguous; rustfft chunks the buffer by transform length.
        self.inv_x.process(data);
        transpose(data, scratch, self.nx, self.ny);
        self.inv_y.process(scratch);
        transpose(scratch, data, self.ny, self.nx);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], ncols: usize, nrows: usize) {
    for r in 0..nrows {
        for c in 0..ncols {
            dst[c * nrows + r] = src[r * ncols + c];
        }
    }
}

/// Smallest 5-smooth integer >= n, for FFT-friendly torus sizes.
pub(crate) fn next_fast_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        let mut k = m;
        for f in [2, 3, 5] {
            while k.is_multiple_of(f) {
                k /= f;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}
