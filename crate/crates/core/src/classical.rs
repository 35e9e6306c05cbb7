//! Liouville dynamics of phase-space fields: spectral split-step transport,
//! the backward-characteristics solver, stationary states, conserved
//! functionals and the energy-extended evolution.
//!
//! The Liouville generator moves mass along the classical flow
//! `dx/dt = p/m`, `dp/dt = -V'(x)`. Each sub-flow is an exact shear of the
//! periodic grid, applied as a Fourier phase, so Strang splitting is the
//! only discretization error of the stepper.

use crate::error::{Error, Result};
use crate::fft::{self, LineFft};
use crate::field::{ClassicalWaveFunction, PhaseSpaceDensity};
use crate::grid::PhaseSpaceGrid;
use crate::potential::Potential;
use crate::C64;
use ndarray::Array2;

/// Shared shear kernel: x-translation by `p dt / m` and p-translation by
/// `-V'(x) dt`, both exact Fourier phases. Owns plans, tables and scratch.
pub(crate) struct TransportKernel {
    pub grid: PhaseSpaceGrid,
    fft_x: LineFft,
    fft_p: LineFft,
    /// phase tables in transposed (p-major) layout for the x-shear
    x_half: Array2<C64>,
    x_full: Array2<C64>,
    scratch_t: Array2<C64>,
    scratch_t2: Array2<C64>,
}

impl TransportKernel {
    pub fn new(grid: &PhaseSpaceGrid, dt: f64) -> Self {
        let (n_x, n_p) = (grid.n_x, grid.n_p);
        let shear = |fraction: f64| {
            Array2::from_shape_fn((n_p, n_x), |(j, k)| {
                let delta = grid.p(j) * dt * fraction / grid.mass;
                let phase = -grid.freq_x(k) * delta;
                C64::new(phase.cos(), phase.sin())
            })
        };
        Self {
            grid: grid.clone(),
            fft_x: LineFft::new(n_x),
            fft_p: LineFft::new(n_p),
            x_half: shear(0.5),
            x_full: shear(1.0),
            scratch_t: Array2::zeros((n_p, n_x)),
            scratch_t2: Array2::zeros((n_p, n_x)),
        }
    }

    /// Translate each p-row of the field along x by `p dt f / m`.
    pub fn x_shear(&mut self, data: &mut Array2<C64>, half: bool) {
        fft::transpose_into(data, &mut self.scratch_t);
        self.fft_x.forward(self.scratch_t.as_slice_mut().unwrap());
        fft::mul_assign(&mut self.scratch_t, if half { &self.x_half } else { &self.x_full });
        self.fft_x.inverse(self.scratch_t.as_slice_mut().unwrap());
        std::mem::swap(&mut self.scratch_t, &mut self.scratch_t2);
        fft::transpose_into(&self.scratch_t2, data);
    }

    /// Multiply the p-spectrum of each x-row by a precomputed table.
    pub fn p_phase(&mut self, data: &mut Array2<C64>, table: &Array2<C64>) {
        self.fft_p.forward(data.as_slice_mut().unwrap());
        fft::mul_assign(data, table);
        self.fft_p.inverse(data.as_slice_mut().unwrap());
    }
}

/// Builds the p-shear table `exp(+i sigma_s V'(x_i) dt)`, the spectral form
/// of the momentum translation by `-V'(x) dt`.
fn liouville_p_table(grid: &PhaseSpaceGrid, potential: &Potential, dt: f64) -> Array2<C64> {
    Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, s)| {
        let phase = grid.freq_p(s) * potential.dv(grid.x(i)) * dt;
        C64::new(phase.cos(), phase.sin())
    })
}

/// Strang split-step Liouville propagator,
/// `half x-shear -> full p-shear -> half x-shear` per step.
pub struct LiouvilleStepper {
    kernel: TransportKernel,
    p_full: Array2<C64>,
    pub dt: f64,
}

impl LiouvilleStepper {
    pub fn new(grid: &PhaseSpaceGrid, potential: &Potential, dt: f64) -> Self {
        Self {
            kernel: TransportKernel::new(grid, dt),
            p_full: liouville_p_table(grid, potential, dt),
            dt,
        }
    }

    fn apply(&mut self, data: &mut Array2<C64>) {
        self.kernel.x_shear(data, true);
        self.kernel.p_phase(data, &self.p_full);
        self.kernel.x_shear(data, true);
    }

    /// One step on a wave function; a real input stays real.
    pub fn step(&mut self, mut psi: ClassicalWaveFunction) -> ClassicalWaveFunction {
        assert_eq!(psi.grid, self.kernel.grid, "stepper grid mismatch");
        self.apply(&mut psi.values);
        if psi.is_real() {
            psi.take_real();
        }
        psi
    }

    /// `n` steps with the interior half-shears fused.
    pub fn run(&mut self, mut psi: ClassicalWaveFunction, n: usize) -> ClassicalWaveFunction {
        if n == 0 {
            return psi;
        }
        let real = psi.is_real();
        self.kernel.x_shear(&mut psi.values, true);
        self.kernel.p_phase(&mut psi.values, &self.p_full);
        for _ in 1..n {
            self.kernel.x_shear(&mut psi.values, false);
            self.kernel.p_phase(&mut psi.values, &self.p_full);
        }
        self.kernel.x_shear(&mut psi.values, true);
        if real {
            psi.take_real();
        }
        psi
    }

    /// One step on a probability density.
    pub fn step_density(&mut self, w: PhaseSpaceDensity) -> PhaseSpaceDensity {
        self.run_density(w, 1)
    }

    pub fn run_density(&mut self, w: PhaseSpaceDensity, n: usize) -> PhaseSpaceDensity {
        let grid = w.grid.clone();
        let mut data = w.values.mapv(|v| C64::new(v, 0.0));
        if n > 0 {
            self.kernel.x_shear(&mut data, true);
            self.kernel.p_phase(&mut data, &self.p_full);
            for _ in 1..n {
                self.kernel.x_shear(&mut data, false);
                self.kernel.p_phase(&mut data, &self.p_full);
            }
            self.kernel.x_shear(&mut data, true);
        }
        PhaseSpaceDensity::from_parts(grid, data.mapv(|v| v.re))
    }
}

/// One Liouville step as a standalone call.
pub fn liouville_step(
    psi: ClassicalWaveFunction,
    potential: &Potential,
    dt: f64,
) -> ClassicalWaveFunction {
    LiouvilleStepper::new(&psi.grid.clone(), potential, dt).step(psi)
}

/// Relative energy-drift tolerance of the backward integrator.
pub const ENERGY_DRIFT_TOL: f64 = 1e-6;

/// Backward-trajectory field: for every grid node, the phase-space point the
/// classical flow maps onto that node after time `t`. Advancing by `dt`
/// composes one more backward leg, so a whole time series costs one sweep.
pub struct BackwardFlow {
    pub grid: PhaseSpaceGrid,
    pub x0: Array2<f64>,
    pub p0: Array2<f64>,
    energy_at_node: Array2<f64>,
    pub t: f64,
    pub caustic_warning: bool,
    pub max_energy_drift: f64,
}

impl BackwardFlow {
    pub fn new(grid: &PhaseSpaceGrid, potential: &Potential) -> Self {
        let x0 = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, _)| grid.x(i));
        let p0 = Array2::from_shape_fn((grid.n_x, grid.n_p), |(_, j)| grid.p(j));
        let energy_at_node = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| {
            energy(grid, potential, grid.x(i), grid.p(j))
        });
        Self {
            grid: grid.clone(),
            x0,
            p0,
            energy_at_node,
            t: 0.0,
            caustic_warning: false,
            max_energy_drift: 0.0,
        }
    }

    /// Integrate every node backward by `delta_t` using velocity Verlet with
    /// step `substep`. If the energy drift exceeds the tolerance the leg is
    /// rejected and retried with a halved step, up to three refinements.
    pub fn advance(&mut self, potential: &Potential, delta_t: f64, substep: f64) -> Result<()> {
        let saved = (self.x0.clone(), self.p0.clone());
        let mut h = substep;
        for refinement in 0..4 {
            verlet_backward(&mut self.x0, &mut self.p0, potential, self.grid.mass, delta_t, h);
            let drift = self.energy_drift(potential);
            if drift <= ENERGY_DRIFT_TOL {
                self.t += delta_t;
                self.max_energy_drift = self.max_energy_drift.max(drift);
                self.update_caustic_flag();
                return Ok(());
            }
            if refinement == 3 {
                return Err(Error::EnergyDrift {
                    drift,
                    tolerance: ENERGY_DRIFT_TOL,
                    refinements: refinement,
                });
            }
            self.x0.assign(&saved.0);
            self.p0.assign(&saved.1);
            h *= 0.5;
        }
        unreachable!()
    }

    fn energy_drift(&self, potential: &Potential) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.n_x {
            for j in 0..self.grid.n_p {
                let e = energy(&self.grid, potential, self.x0[(i, j)], self.p0[(i, j)]);
                let e0 = self.energy_at_node[(i, j)];
                worst = worst.max((e - e0).abs() / e0.abs().max(1.0));
            }
        }
        worst
    }

    /// Sign change of the backward-map Jacobian flags a caustic.
    fn update_caustic_flag(&mut self) {
        let (n_x, n_p) = (self.grid.n_x, self.grid.n_p);
        let (dx, dp) = (self.grid.dx(), self.grid.dp());
        for i in 1..n_x - 1 {
            for j in 1..n_p - 1 {
                let dxdx = (self.x0[(i + 1, j)] - self.x0[(i - 1, j)]) / (2.0 * dx);
                let dxdp = (self.x0[(i, j + 1)] - self.x0[(i, j - 1)]) / (2.0 * dp);
                let dpdx = (self.p0[(i + 1, j)] - self.p0[(i - 1, j)]) / (2.0 * dx);
                let dpdp = (self.p0[(i, j + 1)] - self.p0[(i, j - 1)]) / (2.0 * dp);
                if dxdx * dpdp - dxdp * dpdx < 0.0 {
                    self.caustic_warning = true;
                    return;
                }
            }
        }
    }

    /// Evaluate the transported field by sampling the initial wave function
    /// at the backward-mapped points (periodic 4-point Lagrange stencil).
    pub fn sample_grid(&self, psi0: &ClassicalWaveFunction) -> ClassicalWaveFunction {
        let values = Array2::from_shape_fn((self.grid.n_x, self.grid.n_p), |(i, j)| {
            bicubic_periodic(&psi0.values, &self.grid, self.x0[(i, j)], self.p0[(i, j)])
        });
        let mut psi = ClassicalWaveFunction::from_parts(self.grid.clone(), values, false);
        if psi0.is_real() {
            psi.take_real();
        }
        psi
    }

    /// Evaluate the transported field from a closed-form initial condition.
    pub fn sample_analytic(&self, psi0: impl Fn(f64, f64) -> f64 + Sync) -> ClassicalWaveFunction {
        let values = Array2::from_shape_fn((self.grid.n_x, self.grid.n_p), |(i, j)| {
            C64::new(psi0(self.x0[(i, j)], self.p0[(i, j)]), 0.0)
        });
        ClassicalWaveFunction::from_parts(self.grid.clone(), values, true)
    }
}

pub fn energy(grid: &PhaseSpaceGrid, potential: &Potential, x: f64, p: f64) -> f64 {
    p * p / (2.0 * grid.mass) + potential.eval(x)
}

fn verlet_backward(
    x: &mut Array2<f64>,
    p: &mut Array2<f64>,
    potential: &Potential,
    mass: f64,
    delta_t: f64,
    substep: f64,
) {
    let n_steps = (delta_t / substep).round().max(1.0) as usize;
    let h = -delta_t / n_steps as f64; // negative: integrate backward
    let xs = x.as_slice_mut().unwrap();
    let ps = p.as_slice_mut().unwrap();
    let kick = |x: f64, p: f64| -> (f64, f64) {
        let mut p_half = p - 0.5 * h * potential.dv(x);
        let x_new = x + h * p_half / mass;
        p_half -= 0.5 * h * potential.dv(x_new);
        (x_new, p_half)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        xs.par_iter_mut().zip(ps.par_iter_mut()).for_each(|(xv, pv)| {
            for _ in 0..n_steps {
                let (xn, pn) = kick(*xv, *pv);
                *xv = xn;
                *pv = pn;
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (xv, pv) in xs.iter_mut().zip(ps.iter_mut()) {
            for _ in 0..n_steps {
                let (xn, pn) = kick(*xv, *pv);
                *xv = xn;
                *pv = pn;
            }
        }
    }
}

/// Periodic 4-point Lagrange interpolation in both axes.
pub(crate) fn bicubic_periodic(
    values: &Array2<C64>,
    grid: &PhaseSpaceGrid,
    x: f64,
    p: f64,
) -> C64 {
    let (n_x, n_p) = (grid.n_x, grid.n_p);
    let ux = (x + 0.5 * grid.x_extent) / grid.dx();
    let up = (p + 0.5 * grid.p_extent) / grid.dp();
    let ix = ux.floor() as isize;
    let jp = up.floor() as isize;
    let tx = ux - ix as f64;
    let tp = up - jp as f64;
    let wx = lagrange_weights(tx);
    let wp = lagrange_weights(tp);
    let mut acc = C64::new(0.0, 0.0);
    for (a, wxa) in wx.iter().enumerate() {
        let i = (ix + a as isize - 1).rem_euclid(n_x as isize) as usize;
        let mut row = C64::new(0.0, 0.0);
        for (b, wpb) in wp.iter().enumerate() {
            let j = (jp + b as isize - 1).rem_euclid(n_p as isize) as usize;
            row += values[(i, j)] * *wpb;
        }
        acc += row * *wxa;
    }
    acc
}

fn lagrange_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Report attached to a characteristics solution.
#[derive(Debug, Clone)]
pub struct CharacteristicsReport {
    pub max_energy_drift: f64,
    pub caustic_warning: bool,
}

/// Transported wave function `psi(x, p, t) = psi0(x0(x,p,t), p0(x,p,t))` via
/// backward velocity-Verlet trajectories and bicubic sampling.
pub fn characteristics_solution(
    psi0: &ClassicalWaveFunction,
    potential: &Potential,
    t: f64,
    substep: f64,
) -> Result<(ClassicalWaveFunction, CharacteristicsReport)> {
    let mut flow = BackwardFlow::new(&psi0.grid, potential);
    if t != 0.0 {
        flow.advance(potential, t, substep)?;
    }
    let psi = flow.sample_grid(psi0);
    Ok((
        psi,
        CharacteristicsReport {
            max_energy_drift: flow.max_energy_drift,
            caustic_warning: flow.caustic_warning,
        },
    ))
}

/// Time series of `<x>` and `<p>` under Liouville evolution.
pub fn evolve_expectations(
    psi0: &ClassicalWaveFunction,
    potential: &Potential,
    dt: f64,
    n_steps: usize,
    stride: usize,
) -> Vec<(f64, f64, f64)> {
    let mut stepper = LiouvilleStepper::new(&psi0.grid, potential, dt);
    let mut psi = psi0.clone();
    let mut out = Vec::with_capacity(n_steps / stride + 1);
    let record = |psi: &ClassicalWaveFunction, t: f64, out: &mut Vec<(f64, f64, f64)>| {
        let mu = psi.grid.measure();
        let mut xm = 0.0;
        let mut pm = 0.0;
        for i in 0..psi.grid.n_x {
            for j in 0..psi.grid.n_p {
                let w = psi.values[(i, j)].norm_sqr();
                xm += psi.grid.x(i) * w;
                pm += psi.grid.p(j) * w;
            }
        }
        out.push((t, xm * mu, pm * mu));
    };
    record(&psi, 0.0, &mut out);
    let mut step_count = 0;
    while step_count < n_steps {
        let chunk = stride.min(n_steps - step_count);
        psi = stepper.run(psi, chunk);
        step_count += chunk;
        record(&psi, step_count as f64 * dt, &mut out);
    }
    out
}

/// Static wave function `psi = sqrt(f(E)) / norm`; any profile of the energy
/// alone is transported into itself by the Liouville flow.
pub fn stationary_state(
    profile: impl Fn(f64) -> f64,
    grid: &PhaseSpaceGrid,
    potential: &Potential,
) -> Result<ClassicalWaveFunction> {
    let mut psi = ClassicalWaveFunction::from_fn_real(grid.clone(), |x, p| {
        profile(energy(grid, potential, x, p)).max(0.0).sqrt()
    });
    let n = psi.norm_sq();
    if !(n.is_finite() && n > 1e-300) {
        return Err(Error::NotNormalizable(n));
    }
    psi.normalize();
    Ok(psi)
}

/// Energy functionals tracked by the conservation reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyFunctional {
    Energy,
    EnergySquared,
    BoltzmannWeight { beta: f64 },
}

impl EnergyFunctional {
    pub fn eval(&self, e: f64) -> f64 {
        match self {
            EnergyFunctional::Energy => e,
            EnergyFunctional::EnergySquared => e * e,
            EnergyFunctional::BoltzmannWeight { beta } => (-beta * e).exp(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EnergyFunctional::Energy => "E".into(),
            EnergyFunctional::EnergySquared => "E^2".into(),
            EnergyFunctional::BoltzmannWeight { beta } => format!("exp(-{beta}*E)"),
        }
    }
}

/// Max drift of `<f(E)>` over a stored evolution series.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub name: String,
    pub initial: f64,
    pub max_drift: f64,
}

pub fn conserved_functionals(
    series: &[(f64, ClassicalWaveFunction)],
    functionals: &[EnergyFunctional],
    potential: &Potential,
) -> Vec<DriftReport> {
    functionals
        .iter()
        .map(|f| {
            let values: Vec<f64> = series
                .iter()
                .map(|(_, psi)| {
                    let mu = psi.grid.measure();
                    let mut acc = 0.0;
                    for i in 0..psi.grid.n_x {
                        for j in 0..psi.grid.n_p {
                            let e = energy(&psi.grid, potential, psi.grid.x(i), psi.grid.p(j));
                            acc += f.eval(e) * psi.values[(i, j)].norm_sqr();
                        }
                    }
                    acc * mu
                })
                .collect();
            let initial = values[0];
            let max_drift =
                values.iter().map(|v| (v - initial).abs()).fold(0.0, f64::max);
            DriftReport { name: f.name(), initial, max_drift }
        })
        .collect()
}

/// Evolution under the energy-extended generator: the transported amplitude
/// `sqrt(w)` times the phase `exp(-i E(x,p) t)`. The density is identical to
/// plain Liouville transport; the phase carries the classical energy.
pub fn extended_evolution(
    psi0: &ClassicalWaveFunction,
    potential: &Potential,
    t: f64,
    dt: f64,
) -> Result<ClassicalWaveFunction> {
    if !psi0.is_real() {
        return Err(Error::Parse("extended evolution expects a real initial wave function".into()));
    }
    let n_steps = (t / dt).round().max(0.0) as usize;
    let mut stepper = LiouvilleStepper::new(&psi0.grid, potential, dt);
    let transported = stepper.run(psi0.clone(), n_steps);
    let grid = transported.grid.clone();
    let values = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| {
        let e = energy(&grid, potential, grid.x(i), grid.p(j));
        let ph = -e * t;
        transported.values[(i, j)] * C64::new(ph.cos(), ph.sin())
    });
    Ok(ClassicalWaveFunction::from_parts(grid, values, false))
}

/// `<H_L> = integral conj(psi) H_L psi`, the expectation of the Liouville
/// generator; vanishes identically for real wave functions.
pub fn h_l_expectation(psi: &ClassicalWaveFunction, potential: &Potential) -> C64 {
    let grid = &psi.grid;
    // -i (p/m) d_x psi
    let mut ddx = psi.values.clone();
    let mut t = Array2::zeros((grid.n_p, grid.n_x));
    fft::transpose_into(&ddx, &mut t);
    let fft_x = LineFft::new(grid.n_x);
    fft::apply_spectral_rows(&fft_x, &mut t, |k| C64::new(0.0, grid.freq_x(k)));
    fft::transpose_into(&t, &mut ddx);
    // i V'(x) d_p psi
    let mut ddp = psi.values.clone();
    let fft_p = LineFft::new(grid.n_p);
    fft::apply_spectral_rows(&fft_p, &mut ddp, |s| C64::new(0.0, grid.freq_p(s)));
    let h_psi = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| {
        let pm = grid.p(j) / grid.mass;
        C64::new(0.0, -1.0) * pm * ddx[(i, j)]
            + C64::new(0.0, 1.0) * potential.dv(grid.x(i)) * ddp[(i, j)]
    });
    fft::dot_cc(&psi.values, &h_psi) * grid.measure()
}
