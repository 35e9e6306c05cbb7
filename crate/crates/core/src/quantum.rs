//! Quantum evolution in three equivalent pictures: position-space
//! Schrödinger stepping, Moyal evolution of Wigner functions, and the same
//! quantum generator acting on phase-space wave functions. Closed-form
//! Gaussian packet analytics and the correlation-operator family serve as
//! oracles for all of them.
//!
//! The Moyal potential step is applied exactly in the mixed representation
//! where the momentum axis is traded for its Fourier-dual separation
//! variable: there the full potential commutator is a diagonal phase
//! `exp(+i [V(z + s/2) - V(z - s/2)] dt)`, so splitting is again the only
//! error source. Truncating that phase at first order in `s` reproduces the
//! Liouville stepper; keeping the cubic term adds the leading quantum
//! correction.

use crate::classical::TransportKernel;
use crate::error::{Error, Result};
use crate::fft::{
    self, centered_forward_rows, centered_inverse_rows_unnormalized, transpose_into, LineFft,
};
use crate::field::{ClassicalWaveFunction, DensityMatrix, PositionWaveFunction, WignerFunction};
use crate::grid::{PhaseSpaceGrid, SpatialGrid};
use crate::potential::Potential;
use crate::C64;
use ndarray::{Array1, Array2};
use std::f64::consts::PI;

fn phase(p: f64) -> C64 {
    C64::new(p.cos(), p.sin())
}

/// Split-step Fourier propagator for the position-space Schrödinger
/// equation: half potential phase, full kinetic phase, half potential phase.
pub struct SchrodingerStepper {
    pub grid: SpatialGrid,
    fft: LineFft,
    half_pot: Array1<C64>,
    full_pot: Array1<C64>,
    kinetic: Array1<C64>,
    pub dt: f64,
}

impl SchrodingerStepper {
    pub fn new(grid: &SpatialGrid, potential: &Potential, dt: f64) -> Self {
        let half_pot =
            Array1::from_shape_fn(grid.n, |i| phase(-potential.eval(grid.x(i)) * dt / 2.0));
        let full_pot =
            Array1::from_shape_fn(grid.n, |i| phase(-potential.eval(grid.x(i)) * dt));
        let kinetic = Array1::from_shape_fn(grid.n, |k| {
            let w = grid.freq(k);
            phase(-w * w * dt / (2.0 * grid.mass))
        });
        Self { grid: grid.clone(), fft: LineFft::new(grid.n), half_pot, full_pot, kinetic, dt }
    }

    fn kinetic_sweep(&self, values: &mut Array1<C64>) {
        let buf = values.as_slice_mut().unwrap();
        self.fft.forward(buf);
        for (v, k) in buf.iter_mut().zip(self.kinetic.iter()) {
            *v *= *k;
        }
        self.fft.inverse(buf);
    }

    pub fn step(&self, phi: PositionWaveFunction) -> PositionWaveFunction {
        self.run(phi, 1)
    }

    /// `n` steps with interior half-phases fused.
    pub fn run(&self, mut phi: PositionWaveFunction, n: usize) -> PositionWaveFunction {
        assert_eq!(phi.grid, self.grid, "stepper grid mismatch");
        if n == 0 {
            return phi;
        }
        for (v, h) in phi.values.iter_mut().zip(self.half_pot.iter()) {
            *v *= *h;
        }
        for step in 0..n {
            self.kinetic_sweep(&mut phi.values);
            let table = if step + 1 == n { &self.half_pot } else { &self.full_pot };
            for (v, h) in phi.values.iter_mut().zip(table.iter()) {
                *v *= *h;
            }
        }
        phi
    }
}

/// One Schrödinger step as a standalone call.
pub fn schrodinger_step(
    phi: PositionWaveFunction,
    potential: &Potential,
    dt: f64,
) -> PositionWaveFunction {
    SchrodingerStepper::new(&phi.grid.clone(), potential, dt).step(phi)
}

/// How the potential phase of the quantum generator is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Exact finite-difference phase `V(z + s/2) - V(z - s/2)`.
    Exact,
    /// First order in `s`: reproduces the Liouville stepper.
    FirstOrder,
    /// First plus cubic term `V''' s^3 / 24`.
    ThirdOrder,
}

/// Split-step propagator for the quantum (Moyal) evolution of phase-space
/// fields: half kinetic shear, full potential phase, half kinetic shear.
pub struct MoyalStepper {
    kernel: TransportKernel,
    pot_table: Array2<C64>,
    pub dt: f64,
    pub truncation: Truncation,
}

impl MoyalStepper {
    pub fn new(grid: &PhaseSpaceGrid, potential: &Potential, dt: f64) -> Self {
        Self::with_truncation(grid, potential, dt, Truncation::Exact)
            .expect("exact tables need no derivatives")
    }

    pub fn with_truncation(
        grid: &PhaseSpaceGrid,
        potential: &Potential,
        dt: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        if truncation == Truncation::ThirdOrder {
            potential.d3v(0.0)?;
        }
        let pot_table = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, s)| {
            let z = grid.x(i);
            let sigma = grid.freq_p(s);
            let ph = match truncation {
                Truncation::Exact => {
                    potential.eval(z + 0.5 * sigma) - potential.eval(z - 0.5 * sigma)
                }
                Truncation::FirstOrder => potential.dv(z) * sigma,
                Truncation::ThirdOrder => {
                    potential.dv(z) * sigma
                        + potential.d3v(z).expect("checked above") * sigma.powi(3) / 24.0
                }
            };
            phase(ph * dt)
        });
        Ok(Self { kernel: TransportKernel::new(grid, dt), pot_table, dt, truncation })
    }

    fn apply(&mut self, data: &mut Array2<C64>, n: usize) {
        if n == 0 {
            return;
        }
        self.kernel.x_shear(data, true);
        self.kernel.p_phase(data, &self.pot_table);
        for _ in 1..n {
            self.kernel.x_shear(data, false);
            self.kernel.p_phase(data, &self.pot_table);
        }
        self.kernel.x_shear(data, true);
    }

    pub fn step(&mut self, rhow: WignerFunction) -> WignerFunction {
        self.run(rhow, 1)
    }

    pub fn run(&mut self, rhow: WignerFunction, n: usize) -> WignerFunction {
        assert_eq!(rhow.grid, self.kernel.grid, "stepper grid mismatch");
        let grid = rhow.grid.clone();
        let mut data = rhow.values.mapv(|v| C64::new(v, 0.0));
        self.apply(&mut data, n);
        WignerFunction::from_parts(grid, data.mapv(|v| v.re))
    }

    /// The same generator acting on a phase-space wave function; a real
    /// input stays real (the generator is purely imaginary and odd).
    pub fn step_psi(&mut self, psi: ClassicalWaveFunction) -> ClassicalWaveFunction {
        self.run_psi(psi, 1)
    }

    pub fn run_psi(&mut self, mut psi: ClassicalWaveFunction, n: usize) -> ClassicalWaveFunction {
        assert_eq!(psi.grid, self.kernel.grid, "stepper grid mismatch");
        let real = psi.is_real();
        self.apply(&mut psi.values, n);
        if real {
            psi.take_real();
        }
        psi
    }
}

/// One Moyal step as a standalone call.
pub fn moyal_step(rhow: WignerFunction, potential: &Potential, dt: f64) -> WignerFunction {
    MoyalStepper::new(&rhow.grid.clone(), potential, dt).step(rhow)
}

/// One truncated Moyal step.
pub fn moyal_truncated_step(
    rhow: WignerFunction,
    potential: &Potential,
    dt: f64,
    truncation: Truncation,
) -> Result<WignerFunction> {
    Ok(MoyalStepper::with_truncation(&rhow.grid.clone(), potential, dt, truncation)?.step(rhow))
}

/// One quantum step of the phase-space wave function.
pub fn classical_wavefunction_quantum_step(
    psi: ClassicalWaveFunction,
    potential: &Potential,
    dt: f64,
) -> ClassicalWaveFunction {
    MoyalStepper::new(&psi.grid.clone(), potential, dt).step_psi(psi)
}

/// Grid cap for the quartic-cost density reconstruction.
pub const RECONSTRUCT_CAP: usize = 64;

/// Wigner-type quasi-density carried by a phase-space wave function:
///
/// `rho_w(x, p) = integral dr dr' ds/(2pi) ds'/(2pi)
///     psi(x + r/2, p + s) psi(x + r'/2, p + s') cos(s' r - s r')`.
///
/// Evaluated as `Re sum_{r', s'} psi(x + r'/2, p + s') G(x, p; s', r')` with
/// `G` the double Fourier transform of the shifted field over `(r, s)`. The
/// measure above makes the result integrate to exactly one for Gaussian
/// wave functions. Cost is O(n^4 log n); grids above [`RECONSTRUCT_CAP`] are
/// rejected.
pub fn reconstruct_density(psi: &ClassicalWaveFunction) -> Result<WignerFunction> {
    let grid = &psi.grid;
    grid.require_self_dual()?;
    let n = grid.n_x;
    if n > RECONSTRUCT_CAP {
        return Err(Error::GridTooLarge { n, cap: RECONSTRUCT_CAP });
    }

    // psi at half-step x offsets
    let fine_x = {
        let fft_n = LineFft::new(n);
        let fft_2n = LineFft::new(2 * n);
        let mut t = Array2::zeros((n, n));
        transpose_into(&psi.values, &mut t); // (p, x)
        let fine_t = fft::upsample2_rows(&fft_n, &fft_2n, &t); // (p, x_fine)
        let mut fine = Array2::zeros((2 * n, n));
        transpose_into(&fine_t, &mut fine); // (x_fine, p)
        fine
    };

    let fft = LineFft::new(n);
    let half = (n / 2) as isize;
    let weight = (grid.dx() * grid.dp() / (2.0 * PI)).powi(2);

    let row_job = |i: usize| -> Vec<f64> {
        let mut row = vec![0.0; n];
        let mut shifted = Array2::<C64>::zeros((n, n));
        let mut d = Array2::<C64>::zeros((n, n));
        let mut dt = Array2::<C64>::zeros((n, n));
        for (j, out) in row.iter_mut().enumerate() {
            // shifted[k][l] = psi(x_i + r_k/2, p_j + s_l)
            for k in 0..n {
                let xf =
                    (2 * i as isize + (k as isize - half)).rem_euclid(2 * n as isize) as usize;
                for l in 0..n {
                    let pf =
                        (j as isize + (l as isize - half)).rem_euclid(n as isize) as usize;
                    shifted[(k, l)] = fine_x[(xf, pf)];
                }
            }
            // over l: D[k, k'] = sum_l shifted[k, l] e^{-2pi i (l-n/2)(k'-n/2)/n}
            d.assign(&shifted);
            centered_forward_rows(&fft, &mut d);
            // over k: C[k', l'] = sum_k D[k, k'] e^{+2pi i (l'-n/2)(k-n/2)/n}
            transpose_into(&d, &mut dt); // (k', k)
            centered_inverse_rows_unnormalized(&fft, &mut dt); // (k', l')
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    acc += shifted[(k, l)] * dt[(k, l)];
                }
            }
            *out = (acc * weight).re;
        }
        row
    };
    let rows: Vec<Vec<f64>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(row_job).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n).map(row_job).collect()
        }
    };
    let mut values = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(WignerFunction::from_parts(grid.clone(), values))
}

/// Free Gaussian wave packet with mean momentum `p_bar` and momentum width
/// `dp`; closed forms for the evolving kernel, its phase-space image and
/// first and second moments. Position is centered on zero at `t = 0`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPacketSpec {
    pub p_bar: f64,
    pub dp: f64,
    pub mass: f64,
}

impl GaussianPacketSpec {
    /// Contracted momentum width entering the position dispersion.
    pub fn dp_bar(&self, t: f64) -> f64 {
        self.dp * (1.0 + 4.0 * self.dp.powi(4) * t * t / (self.mass * self.mass)).powf(-0.5)
    }

    pub fn mean_position(&self, t: f64) -> f64 {
        self.p_bar * t / self.mass
    }

    pub fn position_variance(&self, t: f64) -> f64 {
        1.0 / (4.0 * self.dp_bar(t).powi(2))
    }

    pub fn mean_momentum(&self) -> f64 {
        self.p_bar
    }

    pub fn momentum_variance(&self) -> f64 {
        self.dp * self.dp
    }

    /// Complex wave function at time `t`.
    pub fn position_wavefunction(&self, grid: &SpatialGrid, t: f64) -> PositionWaveFunction {
        let beta = C64::new(1.0 / (4.0 * self.dp * self.dp), t / (2.0 * self.mass));
        let pref = (self.dp * self.dp / (2.0 * PI)).powf(-0.25) / (2.0 * PI)
            * (C64::new(PI, 0.0) / beta).sqrt();
        PositionWaveFunction::from_fn(grid.clone(), |x| {
            let xc = x - self.p_bar * t / self.mass;
            let gauss = (C64::new(-xc * xc, 0.0) / (4.0 * beta)).exp();
            let ph = phase(self.p_bar * x - self.p_bar * self.p_bar * t / (2.0 * self.mass));
            pref * gauss * ph
        })
    }

    /// Evolving pure-state kernel rho(x, y; t).
    pub fn density_matrix(&self, grid: &SpatialGrid, t: f64) -> DensityMatrix {
        let dpb = self.dp_bar(t);
        let pref = (2.0 / PI).sqrt() * dpb;
        let chirp = 4.0 * self.dp * self.dp * dpb * dpb * t / self.mass;
        DensityMatrix::from_fn(grid.clone(), |x, y| {
            let z = 0.5 * (x + y) - self.p_bar * t / self.mass;
            let r = x - y;
            let modulus =
                pref * (-2.0 * dpb * dpb * z * z).exp() * (-0.5 * dpb * dpb * r * r).exp();
            modulus * phase(r * (self.p_bar + chirp * z))
        })
    }

    /// Phase-space image of the packet: a positive Gaussian sheared by the
    /// free flow.
    pub fn wigner(&self, grid: &PhaseSpaceGrid, t: f64) -> WignerFunction {
        WignerFunction::from_fn(grid.clone(), |z, q| {
            2.0 * (-(q - self.p_bar).powi(2) / (2.0 * self.dp * self.dp)).exp()
                * (-2.0 * self.dp * self.dp * (z - q * t / self.mass).powi(2)).exp()
        })
    }
}

/// Hermitean Gaussian correlation operator with kernel
/// `C(x, y) = 1/(4 pi delta^2)
///     exp(-[a (x-y)^2 + ((x+y)/2 - x_bar)^2 / a] / (4 delta^2))`.
#[derive(Debug, Clone)]
pub struct CorrelationOperator {
    pub grid: SpatialGrid,
    pub kernel: Array2<f64>,
    pub delta: f64,
    pub a: f64,
    pub x_bar: f64,
}

pub fn correlation_operator(
    grid: &SpatialGrid,
    delta: f64,
    a: f64,
    x_bar: f64,
) -> CorrelationOperator {
    let kernel = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| {
        let (x, y) = (grid.x(i), grid.x(j));
        let arg = a * (x - y) * (x - y) + (0.5 * (x + y) - x_bar).powi(2) / a;
        (-arg / (4.0 * delta * delta)).exp() / (4.0 * PI * delta * delta)
    });
    CorrelationOperator { grid: grid.clone(), kernel, delta, a, x_bar }
}

impl CorrelationOperator {
    pub fn apply(&self, phi: &PositionWaveFunction) -> PositionWaveFunction {
        assert_eq!(phi.grid, self.grid);
        let dx = self.grid.dx();
        let values = Array1::from_shape_fn(self.grid.n, |i| {
            (0..self.grid.n)
                .map(|j| phi.values[j] * self.kernel[(i, j)])
                .sum::<C64>()
                * dx
        });
        PositionWaveFunction { grid: self.grid.clone(), values }
    }

    /// Eigenvalue on the width-matched Gaussian centered at `x_bar`:
    /// `sqrt(a/pi) / ((1 + 2a) delta)`.
    pub fn gaussian_eigenvalue(&self) -> f64 {
        (self.a / PI).sqrt() / ((1.0 + 2.0 * self.a) * self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::LiouvilleStepper;
    use crate::field::PhaseSpaceDensity;
    use crate::wigner::wigner_transform;
    use approx::assert_abs_diff_eq;

    fn sgrid(n: usize, l: f64) -> SpatialGrid {
        SpatialGrid::new(n, l, 1.0).unwrap()
    }

    #[test]
    fn packet_wavefunction_is_normalized_and_spreads_like_closed_form() {
        let spec = GaussianPacketSpec { p_bar: 0.8, dp: 0.9, mass: 1.0 };
        let g = sgrid(512, 60.0);
        for &t in &[0.0, 0.7, 1.9] {
            let phi = spec.position_wavefunction(&g, t);
            assert_abs_diff_eq!(phi.norm_sq(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(phi.position_mean(), spec.mean_position(t), epsilon = 1e-8);
            assert_abs_diff_eq!(
                phi.position_variance(),
                spec.position_variance(t),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn packet_kernel_matches_outer_product_of_wavefunction() {
        let spec = GaussianPacketSpec { p_bar: 0.5, dp: 0.8, mass: 1.0 };
        let g = sgrid(128, 40.0);
        let t = 1.1;
        let rho_closed = spec.density_matrix(&g, t);
        let rho_outer = spec.position_wavefunction(&g, t).density_matrix();
        let mut max_err: f64 = 0.0;
        for (a, b) in rho_closed.values.iter().zip(rho_outer.values.iter()) {
            max_err = max_err.max((a - b).norm());
        }
        assert!(max_err < 1e-9, "kernel mismatch {max_err:.3e}");
    }

    #[test]
    fn packet_wigner_matches_transform_and_total_one() {
        let spec = GaussianPacketSpec { p_bar: 0.4, dp: 0.7, mass: 1.0 };
        let g = sgrid(128, 32.0);
        let t = 0.9;
        let closed = spec.wigner(&crate::wigner::dual_grid(&g), t);
        let transformed = wigner_transform(&spec.density_matrix(&g, t)).unwrap();
        let mut max_err: f64 = 0.0;
        for (a, b) in closed.values.iter().zip(transformed.values.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        assert!(max_err < 1e-8, "phase-space image mismatch {max_err:.3e}");
        assert_abs_diff_eq!(closed.total(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn packet_limits() {
        // large dp: sharply located in position at t = 0
        let sharp = GaussianPacketSpec { p_bar: 0.0, dp: 30.0, mass: 1.0 };
        assert!(sharp.position_variance(0.0) < 3e-4);
        // late times: dispersion diverges as (dp t / m)^2
        let spec = GaussianPacketSpec { p_bar: 0.0, dp: 0.5, mass: 1.0 };
        let t = 500.0;
        let asymptote = (spec.dp * t / spec.mass).powi(2);
        assert!((spec.position_variance(t) / asymptote - 1.0).abs() < 1e-4);
        // momentum distribution is time independent
        assert_eq!(spec.momentum_variance(), 0.25);
    }

    #[test]
    fn schrodinger_matches_free_packet_closed_form() {
        let spec = GaussianPacketSpec { p_bar: 0.6, dp: 0.8, mass: 1.0 };
        let g = sgrid(512, 60.0);
        let phi0 = spec.position_wavefunction(&g, 0.0);
        let t = 1.5;
        let stepper = SchrodingerStepper::new(&g, &Potential::Free, t / 100.0);
        let phi = stepper.run(phi0, 100);
        let expect = spec.position_wavefunction(&g, t);
        let mut max_err: f64 = 0.0;
        for (a, b) in phi.values.iter().zip(expect.values.iter()) {
            max_err = max_err.max((a - b).norm());
        }
        // free splitting is exact; the only residue is grid periodization
        assert!(max_err < 1e-10, "free evolution error {max_err:.3e}");
        assert_abs_diff_eq!(phi.norm_sq(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn schrodinger_zero_dt_is_identity_and_unitary() {
        let g = sgrid(128, 24.0);
        let mut phi = PositionWaveFunction::from_fn(g.clone(), |x| {
            C64::new((-x * x / 2.0).exp(), 0.2 * (-x * x / 3.0).exp())
        });
        phi.normalize();
        let same = SchrodingerStepper::new(&g, &Potential::harmonic(1.0), 0.0).step(phi.clone());
        for (a, b) in same.values.iter().zip(phi.values.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
        let stepped = SchrodingerStepper::new(&g, &Potential::harmonic(1.0), 1e-3).step(phi);
        assert_abs_diff_eq!(stepped.norm_sq(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        let g = sgrid(256, 24.0);
        let mut phi0 =
            PositionWaveFunction::from_fn(g.clone(), |x| C64::new((-x * x / 2.0).exp(), 0.0));
        phi0.normalize();
        let period = 2.0 * PI;
        let n = (period / 1e-3).round() as usize;
        let stepper = SchrodingerStepper::new(&g, &Potential::harmonic(1.0), period / n as f64);
        let phi = stepper.run(phi0.clone(), n);
        let dx = g.dx();
        let overlap: C64 = phi0
            .values
            .iter()
            .zip(phi.values.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * dx;
        assert!(
            overlap.norm() >= 1.0 - 1e-8,
            "ground-state fidelity {} after one period",
            overlap.norm()
        );
    }

    #[test]
    fn moyal_equals_liouville_for_free_and_harmonic() {
        for pot in [Potential::Free, Potential::harmonic(1.0)] {
            let grid = PhaseSpaceGrid::new(128, 128, 20.0, 20.0, 1.0).unwrap();
            let psi = ClassicalWaveFunction::gaussian(grid.clone(), 1.0, 0.3, 0.7, 0.7);
            let w0 = WignerFunction::from_parts(grid.clone(), psi.density().values.clone());
            let mut moyal = MoyalStepper::new(&grid, &pot, 1e-3);
            let mut liou = LiouvilleStepper::new(&grid, &pot, 1e-3);
            let wq = moyal.run(w0.clone(), 500);
            let wc = liou.run_density(
                PhaseSpaceDensity::from_parts(grid.clone(), w0.values.clone()),
                500,
            );
            let mut max_err: f64 = 0.0;
            for (a, b) in wq.values.iter().zip(wc.values.iter()) {
                max_err = max_err.max((a - b).abs());
            }
            assert!(max_err < 1e-11, "pictures differ by {max_err:.3e}");
        }
    }

    #[test]
    fn moyal_zero_dt_identity_and_conservation() {
        let grid = PhaseSpaceGrid::new(128, 128, 20.0, 20.0, 1.0).unwrap();
        let spec = GaussianPacketSpec { p_bar: 0.0, dp: 0.8, mass: 1.0 };
        let w0 = {
            let mut w = spec.wigner(&grid, 0.0);
            w.normalize();
            w
        };
        let same = MoyalStepper::new(&grid, &Potential::quartic(1.0), 0.0).step(w0.clone());
        for (a, b) in same.values.iter().zip(w0.values.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let mut stepper = MoyalStepper::new(&grid, &Potential::quartic(1.0), 1e-3);
        let w1 = stepper.run(w0.clone(), 1000);
        assert_abs_diff_eq!(w1.total(), w0.total(), epsilon = 1e-10);
        assert_abs_diff_eq!(w1.purity(), w0.purity(), epsilon = 1e-10);
    }

    /// Dense von Neumann split-step on the density matrix, written as direct
    /// matrix conjugation; independent of the phase-space code path.
    fn von_neumann_split_run(
        rho: &DensityMatrix,
        potential: &Potential,
        dt: f64,
        n: usize,
    ) -> DensityMatrix {
        let g = rho.grid.clone();
        let nn = g.n;
        let fft = LineFft::new(nn);
        let kin_half: Vec<C64> = (0..nn)
            .map(|k| {
                let w = g.freq(k);
                phase(-w * w * dt / (4.0 * g.mass))
            })
            .collect();
        let pot_phase: Vec<C64> =
            (0..nn).map(|i| phase(-potential.eval(g.x(i)) * dt)).collect();
        let mut m = rho.values.clone();
        let mut scratch = Array2::<C64>::zeros((nn, nn));
        let mut kinetic_half = |m: &mut Array2<C64>| {
            // left action U: transform each column over its x index
            transpose_into(m, &mut scratch);
            fft.forward(scratch.as_slice_mut().unwrap());
            for mut row in scratch.rows_mut() {
                for (v, k) in row.iter_mut().zip(kin_half.iter()) {
                    *v *= *k;
                }
            }
            fft.inverse(scratch.as_slice_mut().unwrap());
            let snap = scratch.clone();
            transpose_into(&snap, m);
            // right action U^dagger: conjugate rows, transform, conjugate back
            m.mapv_inplace(|v| v.conj());
            fft.forward(m.as_slice_mut().unwrap());
            for mut row in m.rows_mut() {
                for (v, k) in row.iter_mut().zip(kin_half.iter()) {
                    *v *= *k;
                }
            }
            fft.inverse(m.as_slice_mut().unwrap());
            m.mapv_inplace(|v| v.conj());
        };
        for _ in 0..n {
            kinetic_half(&mut m);
            for i in 0..nn {
                for j in 0..nn {
                    m[(i, j)] *= pot_phase[i] * pot_phase[j].conj();
                }
            }
            kinetic_half(&mut m);
        }
        DensityMatrix::from_parts(g, m)
    }

    #[test]
    fn moyal_consistent_with_dense_von_neumann_oracle() {
        let g = sgrid(128, 24.0);
        let spec = GaussianPacketSpec { p_bar: 0.4, dp: 0.7, mass: 1.0 };
        let rho0 = spec.density_matrix(&g, 0.0);
        let pot = Potential::quartic(0.5);
        let (dt, n) = (2e-3, 75);
        let rho_t = von_neumann_split_run(&rho0, &pot, dt, n);
        let w0 = wigner_transform(&rho0).unwrap();
        let mut stepper = MoyalStepper::new(&w0.grid, &pot, dt);
        let w_t = stepper.run(w0, n);
        let w_expect = wigner_transform(&rho_t).unwrap();
        let mut max_err: f64 = 0.0;
        for (a, b) in w_t.values.iter().zip(w_expect.values.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        assert!(max_err < 1e-8, "Moyal vs von Neumann mismatch {max_err:.3e}");
    }

    #[test]
    fn truncated_first_order_reproduces_liouville_on_quartic() {
        let grid = PhaseSpaceGrid::new(64, 64, 16.0, 16.0, 1.0).unwrap();
        let pot = Potential::quartic(1.0);
        let psi = ClassicalWaveFunction::gaussian(grid.clone(), 0.8, 0.0, 0.6, 0.6);
        let w0 = WignerFunction::from_parts(grid.clone(), psi.density().values.clone());
        let w_first = MoyalStepper::with_truncation(&grid, &pot, 1e-2, Truncation::FirstOrder)
            .unwrap()
            .run(w0.clone(), 30);
        let wc = LiouvilleStepper::new(&grid, &pot, 1e-2).run_density(
            PhaseSpaceDensity::from_parts(grid.clone(), w0.values.clone()),
            30,
        );
        let mut max_err: f64 = 0.0;
        for (a, b) in w_first.values.iter().zip(wc.values.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        assert!(max_err < 1e-12, "first-order table differs from Liouville {max_err:.3e}");
    }

    #[test]
    fn truncated_third_order_is_closer_to_exact_on_quartic() {
        let grid = PhaseSpaceGrid::new(64, 64, 16.0, 16.0, 1.0).unwrap();
        let pot = Potential::quartic(1.0);
        // harmonic: third order identical to first order (V''' = 0)
        let harm = Potential::harmonic(1.0);
        let h1 =
            MoyalStepper::with_truncation(&grid, &harm, 1e-2, Truncation::FirstOrder).unwrap();
        let h3 =
            MoyalStepper::with_truncation(&grid, &harm, 1e-2, Truncation::ThirdOrder).unwrap();
        for (a, b) in h1.pot_table.iter().zip(h3.pot_table.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        // quartic: third order strictly closer to the exact propagator
        let spec = GaussianPacketSpec { p_bar: 0.0, dp: 1.0 / (2.0 * 0.7), mass: 1.0 };
        let mut w0 = spec.wigner(&grid, 0.0);
        w0.normalize();
        let (dt, n) = (1e-2, 60);
        let exact = MoyalStepper::new(&grid, &pot, dt).run(w0.clone(), n);
        let first = MoyalStepper::with_truncation(&grid, &pot, dt, Truncation::FirstOrder)
            .unwrap()
            .run(w0.clone(), n);
        let third = MoyalStepper::with_truncation(&grid, &pot, dt, Truncation::ThirdOrder)
            .unwrap()
            .run(w0.clone(), n);
        let dist = |a: &WignerFunction| {
            a.values
                .iter()
                .zip(exact.values.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0_f64, f64::max)
        };
        let (e1, e3) = (dist(&first), dist(&third));
        assert!(e3 < e1, "third order not closer: {e3:.3e} vs {e1:.3e}");
        // missing third derivative is reported
        let g2 = sgrid(64, 16.0);
        let tab = crate::potential::Tabulated::new(
            g2.clone(),
            g2.xs().iter().map(|&x| (x / 8.0 * PI).cos()).collect(),
            g2.xs().iter().map(|&x| -(PI / 8.0) * (x / 8.0 * PI).sin()).collect(),
            None,
        )
        .unwrap();
        assert!(matches!(
            MoyalStepper::with_truncation(
                &grid,
                &Potential::Tabulated(tab),
                1e-2,
                Truncation::ThirdOrder
            ),
            Err(Error::MissingThirdDerivative)
        ));
    }

    #[test]
    fn hw_step_on_wavefunction_keeps_norm_and_matches_liouville_density_on_harmonic() {
        let grid = PhaseSpaceGrid::new(128, 128, 20.0, 20.0, 1.0).unwrap();
        let pot = Potential::harmonic(1.0);
        let psi0 = ClassicalWaveFunction::gaussian(grid.clone(), 1.2, 0.0, 0.5, 0.9);
        let mut hw = MoyalStepper::new(&grid, &pot, 1e-3);
        let mut liou = LiouvilleStepper::new(&grid, &pot, 1e-3);
        let psi_q = hw.run_psi(psi0.clone(), 400);
        let psi_c = liou.run(psi0.clone(), 400);
        assert!(psi_q.is_real());
        assert_abs_diff_eq!(psi_q.norm_sq(), 1.0, epsilon = 1e-12);
        let mut max_err: f64 = 0.0;
        for (a, b) in psi_q.values.iter().zip(psi_c.values.iter()) {
            max_err = max_err.max((a.norm_sqr() - b.norm_sqr()).abs());
        }
        assert!(max_err < 1e-12, "harmonic densities differ {max_err:.3e}");
        // zero dt: identity
        let same = MoyalStepper::new(&grid, &pot, 0.0).step_psi(psi0.clone());
        for (a, b) in same.values.iter().zip(psi0.values.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn picture_equivalence_on_harmonic_potential() {
        let g = sgrid(128, 24.0);
        let pot = Potential::harmonic(1.0);
        let mut phi0 = PositionWaveFunction::from_fn(g.clone(), |x| {
            C64::new((-(x - 1.0) * (x - 1.0) / 2.0).exp(), 0.0)
        });
        phi0.normalize();
        let (dt, n) = (1e-3, 800);
        let phi_t = SchrodingerStepper::new(&g, &pot, dt).run(phi0.clone(), n);
        let w0 = wigner_transform(&phi0.density_matrix()).unwrap();
        let w_t = MoyalStepper::new(&w0.grid, &pot, dt).run(w0, n);
        let w_expect = wigner_transform(&phi_t.density_matrix()).unwrap();
        let mut max_err: f64 = 0.0;
        for (a, b) in w_t.values.iter().zip(w_expect.values.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        assert!(max_err < 1e-6, "picture mismatch {max_err:.3e}");
    }

    #[test]
    fn reconstruction_calibration_and_gaussian_closed_form() {
        // Gaussian closed form: for a separable real Gaussian with density
        // widths (wx, wp), writing a = 1/(4 wx^2), b = 1/(4 wp^2), the
        // reconstruction is N exp(-alpha x^2 - beta p^2) with
        // alpha = 2a/(ab+1), beta = 2b/(ab+1), N = 4 sqrt(ab)/(ab+1), and it
        // integrates to exactly one.
        let n = 64;
        let extent = (2.0 * PI * n as f64).sqrt();
        let grid = PhaseSpaceGrid::self_dual(n, extent, 1.0).unwrap();
        for (wx, wp) in [(0.7071067811865476, 0.7071067811865476), (1.1, 0.45)] {
            let psi = ClassicalWaveFunction::gaussian(grid.clone(), 0.0, 0.0, wx, wp);
            let rec = reconstruct_density(&psi).unwrap();
            assert_abs_diff_eq!(rec.total(), 1.0, epsilon = 1e-6);
            let (a, b) = (1.0 / (4.0 * wx * wx), 1.0 / (4.0 * wp * wp));
            let alpha = 2.0 * a / (a * b + 1.0);
            let beta = 2.0 * b / (a * b + 1.0);
            let norm = 4.0 * (a * b).sqrt() / (a * b + 1.0);
            let mut max_err: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let (x, p) = (grid.x(i), grid.p(j));
                    let expect = norm * (-alpha * x * x - beta * p * p).exp();
                    max_err = max_err.max((rec.values[(i, j)] - expect).abs());
                }
            }
            assert!(max_err < 1e-6, "closed-form mismatch {max_err:.3e} for ({wx},{wp})");
        }
    }

    #[test]
    fn reconstruction_commutes_with_evolution() {
        let n = 32;
        let extent = (2.0 * PI * n as f64).sqrt();
        let grid = PhaseSpaceGrid::self_dual(n, extent, 1.0).unwrap();
        let pot = Potential::quartic(0.5);
        let psi0 = ClassicalWaveFunction::gaussian(grid.clone(), 0.4, 0.0, 0.8, 0.8);
        let dt = 5e-3;
        let psi1 = MoyalStepper::new(&grid, &pot, dt).step_psi(psi0.clone());
        let rec_then_step =
            MoyalStepper::new(&grid, &pot, dt).step(reconstruct_density(&psi0).unwrap());
        let step_then_rec = reconstruct_density(&psi1).unwrap();
        let mut max_err: f64 = 0.0;
        for (a, b) in rec_then_step.values.iter().zip(step_then_rec.values.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        assert!(max_err < 1e-6, "reconstruction does not intertwine: {max_err:.3e}");
    }

    #[test]
    fn reconstruction_positivity_and_cost_guard() {
        let n = 32;
        let extent = (2.0 * PI * n as f64).sqrt();
        let grid = PhaseSpaceGrid::self_dual(n, extent, 1.0).unwrap();
        for (wx, wp) in [(0.75, 0.75), (1.2, 0.8)] {
            let psi = ClassicalWaveFunction::gaussian(grid.clone(), 0.0, 0.0, wx, wp);
            let rec = reconstruct_density(&psi).unwrap();
            let rho = crate::wigner::inverse_wigner(&rec).unwrap();
            let min = rho.min_eigenvalue();
            assert!(min > -1e-6, "reconstructed state not positive: {min:.3e}");
        }
        let big = PhaseSpaceGrid::self_dual(128, 30.0, 1.0).unwrap();
        let psi = ClassicalWaveFunction::gaussian(big, 0.0, 0.0, 0.7, 0.7);
        assert!(matches!(reconstruct_density(&psi), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn correlation_operator_eigen_relation() {
        let g = sgrid(256, 30.0);
        let (delta, x_bar) = (1.1, 0.4);
        for a in [0.3, 1.0, 2.5] {
            let op = correlation_operator(&g, delta, a, x_bar);
            let mut phi = PositionWaveFunction::from_fn(g.clone(), |x| {
                C64::new((-(x - x_bar) * (x - x_bar) / (4.0 * delta * delta)).exp(), 0.0)
            });
            phi.normalize();
            let out = op.apply(&phi);
            let c = op.gaussian_eigenvalue();
            let mut max_err: f64 = 0.0;
            for (o, p) in out.values.iter().zip(phi.values.iter()) {
                max_err = max_err.max((o - p * c).norm());
            }
            assert!(max_err < 1e-8 * c, "eigen relation off by {max_err:.3e} at a={a}");
        }
    }

    #[test]
    fn correlation_operator_limits() {
        // delta -> 0: the operator contracts to the occupation number at
        // x_bar, so tr(C phi) -> phi(x_bar); the deviation shrinks ~delta^2
        let g = sgrid(512, 30.0);
        let mut phi = PositionWaveFunction::from_fn(g.clone(), |x| {
            C64::new((-x * x / 8.0).exp() * (1.0 + 0.3 * x), 0.0)
        });
        phi.normalize();
        let x_bar = 0.6;
        let phi_at = phi.values[((x_bar + 15.0) / g.dx()).round() as usize];
        let deviation = |delta: f64| {
            let out = correlation_operator(&g, delta, 1.0, x_bar).apply(&phi);
            let total: C64 = out.values.iter().sum::<C64>() * g.dx();
            (total - phi_at).norm()
        };
        let (d1, d2) = (deviation(0.3), deviation(0.15));
        assert!(d1 < 0.05 * phi_at.norm(), "delta=0.3 deviation {d1:.3e}");
        let ratio = d1 / d2;
        assert!((2.5..=6.0).contains(&ratio), "limit not quadratic: ratio {ratio:.2}");
        // a -> infinity: kernel proportional to the identity, x_bar-independent.
        // The relative-coordinate width 2 delta / sqrt(a) must stay resolvable.
        let g2 = sgrid(512, 30.0);
        let mut phi2 = PositionWaveFunction::from_fn(g2.clone(), |x| {
            C64::new((-x * x / 8.0).exp() * (1.0 + 0.3 * x), 0.0)
        });
        phi2.normalize();
        let (delta, a_big) = (2.0, 1000.0);
        let op1 = correlation_operator(&g2, delta, a_big, -2.0);
        let op2 = correlation_operator(&g2, delta, a_big, 3.0);
        let o1 = op1.apply(&phi2);
        let o2 = op2.apply(&phi2);
        let scale = 1.0 / (2.0 * delta * (PI * a_big).sqrt());
        let peak = phi2.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..g2.n {
            assert!((o1.values[i] - o2.values[i]).norm() < 1e-3 * scale * peak);
            assert!(
                (o1.values[i] - phi2.values[i] * scale).norm() < 0.03 * scale * peak,
                "not proportional to identity at {i}"
            );
        }
    }

    #[test]
    fn static_kernel_correlation_observable() {
        // <A> for A = delta(x - y - 2 a0) on the static Gaussian kernel is
        // exp(-a0^2 / (2 delta^2))
        let g = sgrid(256, 30.0);
        let delta = 1.2;
        let mut phi = PositionWaveFunction::from_fn(g.clone(), |x| {
            C64::new((-x * x / (4.0 * delta * delta)).exp(), 0.0)
        });
        phi.normalize();
        let rho = phi.density_matrix();
        let dx = g.dx();
        for k in [0usize, 4, 9, 17] {
            let a0 = k as f64 * dx;
            // trace along the diagonal shifted by 2k cells: x - y = 2 a0
            let mut sum = C64::new(0.0, 0.0);
            for i in 0..g.n {
                let j = (i + g.n - (2 * k) % g.n) % g.n;
                sum += rho.values[(i, j)];
            }
            let acc = sum * dx;
            let expect = (-a0 * a0 / (2.0 * delta * delta)).exp();
            assert!(
                (acc.re - expect).abs() < 1e-6,
                "shifted-diagonal trace {:.6} vs {:.6}",
                acc.re,
                expect
            );
        }
    }

    #[test]
    fn steppers_converge_at_second_order() {
        // Schrödinger on a quartic potential against a fine reference
        let g = sgrid(128, 24.0);
        let pot = Potential::quartic(1.0);
        let mut phi0 = PositionWaveFunction::from_fn(g.clone(), |x| {
            C64::new((-(x - 0.8) * (x - 0.8)).exp(), 0.0)
        });
        phi0.normalize();
        let t = 0.5;
        let run = |steps: usize| {
            SchrodingerStepper::new(&g, &pot, t / steps as f64).run(phi0.clone(), steps)
        };
        let reference = run(4096);
        let err = |phi: &PositionWaveFunction| {
            phi.values
                .iter()
                .zip(reference.values.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0_f64, f64::max)
        };
        let ratio = err(&run(128)) / err(&run(256));
        assert!((3.5..=4.5).contains(&ratio), "Schrödinger ratio {ratio:.2}");

        // Moyal on the quartic potential; the exact potential phase is stiff
        // in the dual variable, so the asymptotic regime needs smaller steps
        let grid = PhaseSpaceGrid::new(64, 64, 16.0, 16.0, 1.0).unwrap();
        let psi = ClassicalWaveFunction::gaussian(grid.clone(), 0.9, 0.0, 0.6, 0.6);
        let w0 = WignerFunction::from_parts(grid.clone(), psi.density().values.clone());
        let tw = 0.25;
        let wrun = |steps: usize| {
            MoyalStepper::new(&grid, &pot, tw / steps as f64).run(w0.clone(), steps)
        };
        let wref = wrun(2048);
        let werr = |w: &WignerFunction| {
            w.values
                .iter()
                .zip(wref.values.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
        };
        let wratio = werr(&wrun(256)) / werr(&wrun(512));
        assert!((3.5..=4.5).contains(&wratio), "Moyal ratio {wratio:.2}");
    }
}
