//! Field containers living on the grids: phase-space wave functions and
//! densities, Wigner quasi-densities, position-space wave functions and
//! density-matrix kernels.
//!
//! All containers are plain data; evolution and transforms consume a value
//! and return a new one, so a field handed to another thread can never be
//! mutated behind the caller's back.

use crate::error::{Error, Result};
use crate::fft::{dot_cc, sum_f64};
use crate::grid::{PhaseSpaceGrid, SpatialGrid};
use crate::C64;
use ndarray::{Array1, Array2};

/// Complex wave function psi(x, p) on the phase-space grid; the probability
/// density is `w = |psi|^2`. For classical states psi is real up to a sign
/// field, and the `real` flag tracks that property through evolutions.
#[derive(Debug, Clone)]
pub struct ClassicalWaveFunction {
    pub grid: PhaseSpaceGrid,
    pub values: Array2<C64>,
    real: bool,
}

impl ClassicalWaveFunction {
    pub fn from_fn_real(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| {
            C64::new(f(grid.x(i), grid.p(j)), 0.0)
        });
        Self { grid, values, real: true }
    }

    pub fn from_fn_complex(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> C64) -> Self {
        let values =
            Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| f(grid.x(i), grid.p(j)));
        Self { grid, values, real: false }
    }

    pub(crate) fn from_parts(grid: PhaseSpaceGrid, values: Array2<C64>, real: bool) -> Self {
        Self { grid, values, real }
    }

    /// Normalized real Gaussian centered at `(x0, p0)` with standard
    /// deviations `(dx, dp)` of the *density* `w = psi^2`.
    pub fn gaussian(grid: PhaseSpaceGrid, x0: f64, p0: f64, dx: f64, dp: f64) -> Self {
        let mut psi = Self::from_fn_real(grid, |x, p| {
            (-(x - x0).powi(2) / (4.0 * dx * dx) - (p - p0).powi(2) / (4.0 * dp * dp)).exp()
        });
        psi.normalize();
        psi
    }

    /// Amplitude superposition `a1 psi1 + a2 psi2`, renormalized.
    pub fn superpose(a1: f64, psi1: &Self, a2: f64, psi2: &Self) -> Result<Self> {
        if psi1.grid != psi2.grid {
            return Err(Error::GridMismatch("superposition operands on different grids".into()));
        }
        let values = &psi1.values * C64::new(a1, 0.0) + &psi2.values * C64::new(a2, 0.0);
        let mut psi = Self { grid: psi1.grid.clone(), values, real: psi1.real && psi2.real };
        psi.normalize();
        Ok(psi)
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub(crate) fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    /// Drop numerically negligible imaginary parts and mark the field real.
    pub fn take_real(&mut self) {
        for v in self.values.iter_mut() {
            *v = C64::new(v.re, 0.0);
        }
        self.real = true;
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// `integral |psi|^2 dx dp / (2 pi)`.
    pub fn norm_sq(&self) -> f64 {
        dot_cc(&self.values, &self.values).re * self.grid.measure()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            let s = 1.0 / n;
            self.values.mapv_inplace(|v| v * s);
        }
    }

    pub fn density(&self) -> PhaseSpaceDensity {
        PhaseSpaceDensity {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| v.norm_sqr()),
        }
    }

    /// Probability mass inside the 10%-width boundary margin of either axis.
    pub fn boundary_mass(&self) -> f64 {
        boundary_mass_2d(&self.grid, |i, j| self.values[(i, j)].norm_sqr())
    }
}

/// Nonnegative probability density w(x, p) on the phase-space grid.
#[derive(Debug, Clone)]
pub struct PhaseSpaceDensity {
    pub grid: PhaseSpaceGrid,
    pub values: Array2<f64>,
}

impl PhaseSpaceDensity {
    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| f(grid.x(i), grid.p(j)));
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: PhaseSpaceGrid, values: Array2<f64>) -> Self {
        Self { grid, values }
    }

    /// Probability mixture `a w1 + (1 - a) w2`.
    pub fn mixture(a: f64, w1: &Self, w2: &Self) -> Result<Self> {
        if w1.grid != w2.grid {
            return Err(Error::GridMismatch("mixture operands on different grids".into()));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Parse(format!("mixture weight {a} outside [0, 1]")));
        }
        Ok(Self {
            grid: w1.grid.clone(),
            values: &w1.values * a + &w2.values * (1.0 - a),
        })
    }

    pub fn total(&self) -> f64 {
        sum_f64(&self.values) * self.grid.measure()
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            self.values.mapv_inplace(|v| v / t);
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Validates positivity (to tolerance) and unit mass.
    pub fn validate(&self, tol_neg: f64, tol_norm: f64) -> Result<()> {
        let min = self.min_value();
        if min < -tol_neg {
            return Err(Error::Parse(format!("density has negative values down to {min:.3e}")));
        }
        let t = self.total();
        if (t - 1.0).abs() > tol_norm {
            return Err(Error::NotNormalizable(t));
        }
        Ok(())
    }

    /// Positive square root `sqrt(w)` as a real wave function; the signed
    /// version is produced by sign reconstruction.
    pub fn sqrt(&self) -> ClassicalWaveFunction {
        ClassicalWaveFunction {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| C64::new(v.max(0.0).sqrt(), 0.0)),
            real: true,
        }
    }

    pub fn boundary_mass(&self) -> f64 {
        boundary_mass_2d(&self.grid, |i, j| self.values[(i, j)].abs())
    }
}

/// Real Wigner quasi-density rho_w(z, q); may be negative, but its marginals
/// must stay nonnegative for a valid quantum state.
#[derive(Debug, Clone)]
pub struct WignerFunction {
    pub grid: PhaseSpaceGrid,
    pub values: Array2<f64>,
}

impl WignerFunction {
    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| f(grid.x(i), grid.p(j)));
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: PhaseSpaceGrid, values: Array2<f64>) -> Self {
        Self { grid, values }
    }

    pub fn total(&self) -> f64 {
        sum_f64(&self.values) * self.grid.measure()
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t.abs() > 0.0 {
            self.values.mapv_inplace(|v| v / t);
        }
    }

    /// `integral rho_w^2 dx dp / (2 pi)`; equals `tr rho^2` of the underlying
    /// density matrix.
    pub fn purity(&self) -> f64 {
        let sq = self.values.mapv(|v| v * v);
        sum_f64(&sq) * self.grid.measure()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_mass(&self) -> f64 {
        boundary_mass_2d(&self.grid, |i, j| self.values[(i, j)].abs())
    }
}

/// Complex position-space wave function phi(x) on a periodic interval.
#[derive(Debug, Clone)]
pub struct PositionWaveFunction {
    pub grid: SpatialGrid,
    pub values: Array1<C64>,
}

impl PositionWaveFunction {
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> C64) -> Self {
        let values = Array1::from_shape_fn(grid.n, |i| f(grid.x(i)));
        Self { grid, values }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            let s = 1.0 / n;
            self.values.mapv_inplace(|v| v * s);
        }
    }

    /// Pure-state density matrix `phi(x) conj(phi(y))`.
    pub fn density_matrix(&self) -> DensityMatrix {
        let n = self.grid.n;
        let values = Array2::from_shape_fn((n, n), |(i, j)| {
            self.values[i] * self.values[j].conj()
        });
        DensityMatrix { grid: self.grid.clone(), values }
    }

    pub fn position_mean(&self) -> f64 {
        let dx = self.grid.dx();
        (0..self.grid.n)
            .map(|i| self.grid.x(i) * self.values[i].norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn position_variance(&self) -> f64 {
        let mean = self.position_mean();
        let dx = self.grid.dx();
        (0..self.grid.n)
            .map(|i| (self.grid.x(i) - mean).powi(2) * self.values[i].norm_sqr())
            .sum::<f64>()
            * dx
    }

    pub fn boundary_mass(&self) -> f64 {
        let margin = (self.grid.n as f64 * PhaseSpaceGrid::BOUNDARY_MARGIN).ceil() as usize;
        let dx = self.grid.dx();
        let mut m = 0.0;
        for i in 0..self.grid.n {
            if i < margin || i >= self.grid.n - margin {
                m += self.values[i].norm_sqr() * dx;
            }
        }
        m
    }
}

/// Hermitian density-matrix kernel rho(x, y) on the position grid.
///
/// The discrete operator acting on wave functions is `values * dx`; its
/// eigenvalues sum to the trace `sum_i rho(x_i, x_i) dx`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub grid: SpatialGrid,
    pub values: Array2<C64>,
}

impl DensityMatrix {
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64, f64) -> C64) -> Self {
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| f(grid.x(i), grid.x(j)));
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: SpatialGrid, values: Array2<C64>) -> Self {
        Self { grid, values }
    }

    pub fn trace(&self) -> C64 {
        let dx = self.grid.dx();
        (0..self.grid.n).map(|i| self.values[(i, i)]).sum::<C64>() * dx
    }

    /// `tr rho^2 = integral |rho(x, y)|^2 dx dy`.
    pub fn trace_sq(&self) -> f64 {
        let dx = self.grid.dx();
        dot_cc(&self.values, &self.values).re * dx * dx
    }

    pub fn normalize(&mut self) {
        let t = self.trace().re;
        if t.abs() > 0.0 {
            let s = 1.0 / t;
            self.values.mapv_inplace(|v| v * s);
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.grid.n;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.values[(i, j)] - self.values[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn require_hermitian(&self, tolerance: f64) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > tolerance {
            Err(Error::NotHermitian { deviation, tolerance })
        } else {
            Ok(())
        }
    }

    /// Eigenvalues of the discrete operator `rho(x_i, x_j) dx`, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let vals = hermitian_eigenvalues(&self.values, self.grid.dx());
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalues of the Hermitian operator `scale * m`, sorted descending.
pub(crate) fn hermitian_eigenvalues(m: &Array2<C64>, scale: f64) -> Vec<f64> {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale);
    let eig = nalgebra::SymmetricEigen::new(dm);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals
}

/// Eigendecomposition of a Hermitian operator `scale * m`; returns
/// (eigenvalues descending, eigenvectors as columns in matching order).
pub(crate) fn hermitian_eigen(m: &Array2<C64>, scale: f64) -> (Vec<f64>, Array2<C64>) {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale);
    let eig = nalgebra::SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

fn boundary_mass_2d(grid: &PhaseSpaceGrid, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let mx = (grid.n_x as f64 * PhaseSpaceGrid::BOUNDARY_MARGIN).ceil() as usize;
    let mp = (grid.n_p as f64 * PhaseSpaceGrid::BOUNDARY_MARGIN).ceil() as usize;
    let mut m = 0.0;
    for i in 0..grid.n_x {
        let edge_x = i < mx || i >= grid.n_x - mx;
        for j in 0..grid.n_p {
            if edge_x || j < mp || j >= grid.n_p - mp {
                m += weight(i, j);
            }
        }
    }
    m * grid.measure()
}
