use crate::error::{Error, Result};
use std::f64::consts::PI;

fn is_pow2(n: usize) -> bool {
    n >= 8 && n.is_power_of_two()
}

/// Uniform periodic discretization of the phase-space rectangle
/// `[-x_extent/2, x_extent/2) x [-p_extent/2, p_extent/2)`.
///
/// Integrals over phase space carry the weight `dx * dp / (2 pi)`; all
/// momentum-axis integrals in the crate use the measure `dp / (2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub n_x: usize,
    pub n_p: usize,
    pub x_extent: f64,
    pub p_extent: f64,
    pub mass: f64,
}

impl PhaseSpaceGrid {
    pub fn new(n_x: usize, n_p: usize, x_extent: f64, p_extent: f64, mass: f64) -> Result<Self> {
        if !is_pow2(n_x) || !is_pow2(n_p) {
            return Err(Error::InvalidGrid(format!(
                "n_x = {n_x}, n_p = {n_p}: sizes must be powers of two >= 8"
            )));
        }
        if x_extent <= 0.0 || p_extent <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive, got ({x_extent}, {p_extent})"
            )));
        }
        if mass <= 0.0 {
            return Err(Error::InvalidGrid(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { n_x, n_p, x_extent, p_extent, mass })
    }

    /// Square grid whose momentum axis is the Fourier dual of the position
    /// axis (`dp * dx = 2 pi / n`), as required by the Wigner transforms.
    pub fn self_dual(n: usize, x_extent: f64, mass: f64) -> Result<Self> {
        let p_extent = 2.0 * PI * n as f64 / x_extent;
        Self::new(n, n, x_extent, p_extent, mass)
    }

    pub fn dx(&self) -> f64 {
        self.x_extent / self.n_x as f64
    }

    pub fn dp(&self) -> f64 {
        self.p_extent / self.n_p as f64
    }

    /// Weight of one grid cell in phase-space integrals.
    pub fn measure(&self) -> f64 {
        self.dx() * self.dp() / (2.0 * PI)
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.x_extent + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        -0.5 * self.p_extent + j as f64 * self.dp()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.n_p).map(|j| self.p(j)).collect()
    }

    /// Signed spatial frequency of FFT bin `k` along x (wavenumber kappa_k).
    pub fn freq_x(&self, k: usize) -> f64 {
        let s = if k < self.n_x / 2 { k as f64 } else { k as f64 - self.n_x as f64 };
        2.0 * PI * s / self.x_extent
    }

    /// Signed frequency of FFT bin `s` along p; dual variable has the
    /// dimension of a length (the relative coordinate).
    pub fn freq_p(&self, s: usize) -> f64 {
        let t = if s < self.n_p / 2 { s as f64 } else { s as f64 - self.n_p as f64 };
        2.0 * PI * t / self.p_extent
    }

    /// True when the momentum axis is the Fourier dual of the position axis,
    /// which the Wigner-transform pair and the density reconstruction require.
    pub fn is_self_dual(&self) -> bool {
        self.n_x == self.n_p
            && (self.dp() * self.dx() * self.n_x as f64 / (2.0 * PI) - 1.0).abs() < 1e-12
    }

    pub fn require_self_dual(&self) -> Result<()> {
        if self.is_self_dual() {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "momentum axis is not the Fourier dual of the position axis \
                 (n_x = {}, n_p = {}, dx*dp*n/(2pi) = {:.6})",
                self.n_x,
                self.n_p,
                self.dp() * self.dx() * self.n_x as f64 / (2.0 * PI)
            )))
        }
    }

    pub fn spatial(&self) -> SpatialGrid {
        SpatialGrid { n: self.n_x, extent: self.x_extent, mass: self.mass }
    }

    /// Fraction of the axis length (on each side) treated as the boundary
    /// margin by the mass guard.
    pub const BOUNDARY_MARGIN: f64 = 0.10;
}

/// One-dimensional periodic position grid for position-space wave functions
/// and density-matrix kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub n: usize,
    pub extent: f64,
    pub mass: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, extent: f64, mass: f64) -> Result<Self> {
        if !is_pow2(n) {
            return Err(Error::InvalidGrid(format!("n = {n}: size must be a power of two >= 8")));
        }
        if extent <= 0.0 || mass <= 0.0 {
            return Err(Error::InvalidGrid("extent and mass must be positive".into()));
        }
        Ok(Self { n, extent, mass })
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.extent + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn freq(&self, k: usize) -> f64 {
        let s = if k < self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        2.0 * PI * s / self.extent
    }

    /// Momentum grid dual to this axis: `n` bins of spacing `2 pi / extent`,
    /// centered on zero. Used when a phase-space grid is built over a
    /// position grid.
    pub fn dual_extent(&self) -> f64 {
        2.0 * PI * self.n as f64 / self.extent
    }
}
