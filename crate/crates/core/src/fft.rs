//! Spectral building blocks shared by the transforms and steppers: cached
//! FFT plans, row-parallel execution, centered (index-symmetric) transforms
//! and band-limited 2x upsampling.
//!
//! Conventions. A line of `n` samples `f_k = f(u_k)` on `u_k = -L/2 + k du`
//! carries the trigonometric interpolant
//! `f(u) = (1/n) sum_k F_k exp(i kappa_k (u + L/2))` where `F = fft(f)` and
//! `kappa_k` is the signed bin frequency. Translation by `delta` multiplies
//! `F_k` by `exp(-i kappa_k delta)`. The centered transforms used by the
//! Wigner pair absorb the `-L/2` offsets into `(-1)^k` twiddles; they assume
//! `n` is a multiple of 4, which grid construction guarantees.

use crate::C64;
use ndarray::Array2;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Forward/inverse FFT plans for one line length.
#[derive(Clone)]
pub struct LineFft {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl LineFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn run(plan: &Arc<dyn Fft<f64>>, data: &mut [C64], n: usize) {
        debug_assert_eq!(data.len() % n, 0);
        #[cfg(feature = "parallel")]
        {
            data.par_chunks_mut(n).for_each_init(
                || vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
                |scratch, line| plan.process_with_scratch(line, scratch),
            );
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for line in data.chunks_mut(n) {
                plan.process_with_scratch(line, &mut scratch);
            }
        }
    }

    /// Unnormalized forward FFT of every length-`n` line in `data`.
    pub fn forward(&self, data: &mut [C64]) {
        Self::run(&self.fwd, data, self.n);
    }

    /// Inverse FFT of every line, scaled by `1/n` so that
    /// `inverse(forward(f)) == f`.
    pub fn inverse(&self, data: &mut [C64]) {
        Self::run(&self.inv, data, self.n);
        let scale = 1.0 / self.n as f64;
        scale_slice(data, scale);
    }

    /// Inverse FFT without the `1/n` normalization.
    pub fn inverse_unnormalized(&self, data: &mut [C64]) {
        Self::run(&self.inv, data, self.n);
    }
}

/// Apply `f` to each length-`chunk` line, in parallel when enabled.
pub fn for_each_line<F>(data: &mut [C64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [C64]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, line)| f(i, line));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, line)| f(i, line));
    }
}

pub fn scale_slice(data: &mut [C64], s: f64) {
    #[cfg(feature = "parallel")]
    {
        data.par_iter_mut().for_each(|v| *v *= s);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Elementwise `a *= b` over matching matrices.
pub fn mul_assign(a: &mut Array2<C64>, b: &Array2<C64>) {
    let n = a.ncols();
    debug_assert_eq!(a.dim(), b.dim());
    let bs = b.as_slice().expect("standard layout");
    for_each_line(a.as_slice_mut().expect("standard layout"), n, |i, row| {
        let brow = &bs[i * n..(i + 1) * n];
        for (v, w) in row.iter_mut().zip(brow) {
            *v *= *w;
        }
    });
}

/// `dst = src^T`; parallel over destination rows.
pub fn transpose_into(src: &Array2<C64>, dst: &mut Array2<C64>) {
    let (r, c) = src.dim();
    debug_assert_eq!(dst.dim(), (c, r));
    let ss = src.as_slice().expect("standard layout");
    for_each_line(dst.as_slice_mut().expect("standard layout"), r, |j, drow| {
        for (i, v) in drow.iter_mut().enumerate() {
            *v = ss[i * c + j];
        }
    });
}

/// Deterministic sum: per-row partials are reduced in index order, so the
/// result is bit-identical however many threads run.
pub fn sum_c64(a: &Array2<C64>) -> C64 {
    row_partials(a, |row| row.iter().sum::<C64>()).into_iter().sum()
}

pub fn sum_f64(a: &Array2<f64>) -> f64 {
    let c = a.ncols();
    let s = a.as_slice().expect("standard layout");
    let parts: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            s.par_chunks(c).map(|row| row.iter().sum::<f64>()).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            s.chunks(c).map(|row| row.iter().sum::<f64>()).collect()
        }
    };
    parts.into_iter().sum()
}

/// Deterministic `sum conj(a) * b`.
pub fn dot_cc(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    debug_assert_eq!(a.dim(), b.dim());
    let c = a.ncols();
    let asl = a.as_slice().expect("standard layout");
    let bsl = b.as_slice().expect("standard layout");
    let parts: Vec<C64> = {
        #[cfg(feature = "parallel")]
        {
            asl.par_chunks(c)
                .zip(bsl.par_chunks(c))
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.conj() * y).sum::<C64>())
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            asl.chunks(c)
                .zip(bsl.chunks(c))
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.conj() * y).sum::<C64>())
                .collect()
        }
    };
    parts.into_iter().sum()
}

fn row_partials<F>(a: &Array2<C64>, f: F) -> Vec<C64>
where
    F: Fn(&[C64]) -> C64 + Sync,
{
    let c = a.ncols();
    let s = a.as_slice().expect("standard layout");
    #[cfg(feature = "parallel")]
    {
        s.par_chunks(c).map(|row| f(row)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        s.chunks(c).map(|row| f(row)).collect()
    }
}

/// Forward-transform each row, multiply bin `k` by `g(k)`, inverse-transform.
/// Used for spectral derivatives and uniform translations along rows.
pub fn apply_spectral_rows(fft: &LineFft, data: &mut Array2<C64>, g: impl Fn(usize) -> C64) {
    let n = fft.n;
    debug_assert_eq!(data.ncols(), n);
    let mult: Vec<C64> = (0..n).map(g).collect();
    fft.forward(data.as_slice_mut().unwrap());
    for_each_line(data.as_slice_mut().unwrap(), n, |_, row| {
        for (v, m) in row.iter_mut().zip(&mult) {
            *v *= *m;
        }
    });
    fft.inverse(data.as_slice_mut().unwrap());
}

/// Centered forward transform of each row:
/// `F_j = sum_k f_k exp(-2 pi i (j - n/2)(k - n/2) / n)`.
pub fn centered_forward_rows(fft: &LineFft, data: &mut Array2<C64>) {
    let n = fft.n;
    debug_assert_eq!(data.ncols(), n);
    debug_assert_eq!(n % 4, 0, "centered transforms assume n divisible by 4");
    alternate_signs_rows(data);
    fft.forward(data.as_slice_mut().unwrap());
    alternate_signs_rows(data);
}

/// Centered inverse (unnormalized) of each row:
/// `f_k = sum_j F_j exp(+2 pi i (j - n/2)(k - n/2) / n)`.
pub fn centered_inverse_rows_unnormalized(fft: &LineFft, data: &mut Array2<C64>) {
    let n = fft.n;
    debug_assert_eq!(data.ncols(), n);
    debug_assert_eq!(n % 4, 0, "centered transforms assume n divisible by 4");
    alternate_signs_rows(data);
    fft.inverse_unnormalized(data.as_slice_mut().unwrap());
    alternate_signs_rows(data);
}

fn alternate_signs_rows(data: &mut Array2<C64>) {
    let n = data.ncols();
    for_each_line(data.as_slice_mut().unwrap(), n, |_, row| {
        for v in row.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    });
}

/// Band-limited upsampling of every row from `n` to `2n` samples on the same
/// periodic interval. The Nyquist bin is split symmetrically so that real
/// input stays real and Hermitian kernels stay Hermitian.
pub fn upsample2_rows(fft_n: &LineFft, fft_2n: &LineFft, src: &Array2<C64>) -> Array2<C64> {
    let (rows, n) = src.dim();
    debug_assert_eq!(fft_n.n, n);
    debug_assert_eq!(fft_2n.n, 2 * n);
    let mut spec = src.clone();
    fft_n.forward(spec.as_slice_mut().unwrap());
    let mut out = Array2::<C64>::zeros((rows, 2 * n));
    let ss = spec.as_slice().unwrap();
    for_each_line(out.as_slice_mut().unwrap(), 2 * n, |i, orow| {
        let srow = &ss[i * n..(i + 1) * n];
        let half = n / 2;
        orow[..half].copy_from_slice(&srow[..half]);
        let nyq = 0.5 * srow[half];
        orow[half] = nyq;
        orow[2 * n - half] = nyq;
        orow[2 * n - half + 1..].copy_from_slice(&srow[half + 1..]);
    });
    fft_2n.inverse_unnormalized(out.as_slice_mut().unwrap());
    // interpolant normalization is 1/n, not 1/(2n)
    scale_slice(out.as_slice_mut().unwrap(), 1.0 / n as f64);
    out
}

/// Upsample both axes by 2 (rows, then columns via transposes).
pub fn upsample2_2d(src: &Array2<C64>) -> Array2<C64> {
    let (r, c) = src.dim();
    let fft_c = LineFft::new(c);
    let fft_2c = LineFft::new(2 * c);
    let fine_rows = upsample2_rows(&fft_c, &fft_2c, src);
    let mut t = Array2::zeros((2 * c, r));
    transpose_into(&fine_rows, &mut t);
    let fft_r = LineFft::new(r);
    let fft_2r = LineFft::new(2 * r);
    let fine_t = upsample2_rows(&fft_r, &fft_2r, &t);
    let mut out = Array2::zeros((2 * r, 2 * c));
    transpose_into(&fine_t, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn sample_row(n: usize, f: impl Fn(f64) -> C64) -> Array2<C64> {
        let mut a = Array2::zeros((1, n));
        for k in 0..n {
            let u = -0.5 + k as f64 / n as f64; // unit interval
            a[(0, k)] = f(u);
        }
        a
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let fft = LineFft::new(16);
        let mut a = sample_row(16, |u| C64::new((2.0 * PI * u).sin(), u));
        let orig = a.clone();
        fft.forward(a.as_slice_mut().unwrap());
        fft.inverse(a.as_slice_mut().unwrap());
        for (x, y) in a.iter().zip(orig.iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn centered_transform_matches_direct_sum() {
        let n = 8;
        let fft = LineFft::new(n);
        let mut a = Array2::zeros((1, n));
        for k in 0..n {
            a[(0, k)] = C64::new((k as f64 * 0.37).cos(), (k as f64 * 0.11).sin());
        }
        let direct: Vec<C64> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let ph = -2.0 * PI * (j as f64 - 4.0) * (k as f64 - 4.0) / n as f64;
                        a[(0, k)] * C64::new(ph.cos(), ph.sin())
                    })
                    .sum()
            })
            .collect();
        centered_forward_rows(&fft, &mut a);
        for (j, d) in direct.iter().enumerate() {
            assert!((a[(0, j)] - d).norm() < 1e-12, "bin {j}");
        }
    }

    #[test]
    fn centered_inverse_inverts_forward() {
        let n = 16;
        let fft = LineFft::new(n);
        let mut a = sample_row(n, |u| C64::new(u * u, (3.0 * u).cos()));
        let orig = a.clone();
        centered_forward_rows(&fft, &mut a);
        centered_inverse_rows_unnormalized(&fft, &mut a);
        for (x, y) in a.iter().zip(orig.iter()) {
            assert!((x / n as f64 - y).norm() < 1e-13);
        }
    }

    #[test]
    fn upsample_hits_original_and_midpoints() {
        let n = 32;
        // band-limited test signal: a few low harmonics
        let f = |u: f64| {
            C64::new(
                1.0 + (2.0 * PI * u).cos() + 0.3 * (2.0 * PI * 3.0 * u).sin(),
                0.5 * (2.0 * PI * 2.0 * u).cos(),
            )
        };
        let a = sample_row(n, f);
        let fine = upsample2_rows(&LineFft::new(n), &LineFft::new(2 * n), &a);
        for k in 0..2 * n {
            let u = -0.5 + k as f64 / (2 * n) as f64;
            assert!((fine[(0, k)] - f(u)).norm() < 1e-12, "sample {k}");
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let mut a = Array2::zeros((4, 8));
        for i in 0..4 {
            for j in 0..8 {
                a[(i, j)] = C64::new(i as f64, j as f64);
            }
        }
        let mut t = Array2::zeros((8, 4));
        transpose_into(&a, &mut t);
        let mut back = Array2::zeros((4, 8));
        transpose_into(&t, &mut back);
        assert_eq!(a, back);
    }
}
