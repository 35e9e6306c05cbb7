//! State admissibility diagnostics: purity, Heisenberg bound and positivity
//! of the partial Fourier matrix decide whether a phase-space function is a
//! valid classical state, a valid quantum state, both, or neither.
//!
//! A field `f1(x, p)` is classically admissible when it is pointwise
//! nonnegative, and quantum admissible when the Hermitean kernel
//! `w~(x, y) = integral dp/(2 pi) e^{i p (x - y)} f1((x+y)/2, p)` is
//! positive semidefinite. Eigenvalues near zero are discretization
//! sensitive, so each verdict carries a margin label instead of a silent
//! binary split.

use crate::error::Result;
use crate::field::{hermitian_eigen, PhaseSpaceDensity, PositionWaveFunction, WignerFunction};
use crate::grid::PhaseSpaceGrid;
use crate::wigner::{inverse_wigner, marginals};
use ndarray::{Array1, Array2};

/// Pointwise positivity tolerance for classical admissibility.
pub const CLASSICAL_TOL: f64 = 1e-10;
/// Eigenvalue tolerance for quantum admissibility.
pub const QUANTUM_TOL: f64 = 1e-8;
/// Heisenberg product bound tolerance.
pub const HEISENBERG_TOL: f64 = 1e-8;

/// Three-way verdict with a margin band: values beyond 100x the tolerance
/// are decisively invalid, values inside the band are marked marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    Valid,
    Marginal,
    Invalid,
}

impl Admissibility {
    fn from_min(min: f64, tol: f64) -> Self {
        if min >= -tol {
            Admissibility::Valid
        } else if min >= -100.0 * tol {
            Admissibility::Marginal
        } else {
            Admissibility::Invalid
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Admissibility::Valid => "valid",
            Admissibility::Marginal => "marginal",
            Admissibility::Invalid => "invalid",
        }
    }
}

/// Full classification of a phase-space function.
#[derive(Debug, Clone)]
pub struct StateClassification {
    pub classical_valid: bool,
    pub quantum_valid: bool,
    pub classical_label: Admissibility,
    pub quantum_label: Admissibility,
    pub purity: f64,
    pub min_wigner: f64,
    pub min_eigenvalue: f64,
}

impl StateClassification {
    /// Plain-text report, machine-parsable `key = value` lines.
    pub fn report(&self) -> String {
        format!(
            "classical_valid = {}\nquantum_valid = {}\nclassical_label = {}\nquantum_label = {}\npurity = {:.12e}\nmin_wigner = {:.12e}\nmin_eigenvalue = {:.12e}\n",
            self.classical_valid,
            self.quantum_valid,
            self.classical_label.as_str(),
            self.quantum_label.as_str(),
            self.purity,
            self.min_wigner,
            self.min_eigenvalue,
        )
    }
}

/// Classify a real phase-space field on a self-dual grid.
pub fn classify(grid: &PhaseSpaceGrid, values: &Array2<f64>) -> Result<StateClassification> {
    let as_wigner = WignerFunction::from_parts(grid.clone(), values.clone());
    let purity = as_wigner.purity();
    let min_wigner = as_wigner.min_value();
    let (spectrum, _) = positivity_matrix(&as_wigner)?;
    let min_eigenvalue = spectrum.last().copied().unwrap_or(0.0);
    let classical_label = Admissibility::from_min(min_wigner, CLASSICAL_TOL);
    let quantum_label = Admissibility::from_min(min_eigenvalue, QUANTUM_TOL);
    Ok(StateClassification {
        classical_valid: min_wigner >= -CLASSICAL_TOL,
        quantum_valid: min_eigenvalue >= -QUANTUM_TOL,
        classical_label,
        quantum_label,
        purity,
        min_wigner,
        min_eigenvalue,
    })
}

pub fn classify_wigner(f1: &WignerFunction) -> Result<StateClassification> {
    classify(&f1.grid, &f1.values)
}

pub fn classify_density(f1: &PhaseSpaceDensity) -> Result<StateClassification> {
    classify(&f1.grid, &f1.values)
}

/// `integral f1^2 dx dp/(2 pi)` and the pass flag of the purity constraint.
pub fn purity_check(f1: &WignerFunction) -> (f64, bool) {
    let p = f1.purity();
    (p, p <= 1.0 + 1e-8)
}

/// Eigenvalue spectrum (descending) of the partial Fourier matrix and the
/// quantum admissibility flag. Also verifies the diagonal properties: unit
/// trace and nonnegative position marginal.
pub fn positivity_matrix(f1: &WignerFunction) -> Result<(Vec<f64>, bool)> {
    let rho = inverse_wigner(f1)?;
    let (spectrum, _) = hermitian_eigen(&rho.values, rho.grid.dx());
    let min = spectrum.last().copied().unwrap_or(0.0);
    Ok((spectrum, min >= -QUANTUM_TOL))
}

/// Idempotency report of the partial Fourier matrix: `max |l^2 - l|` over
/// its eigenvalues, and the dominant eigenvector as a position-space wave
/// function when the state is pure to 1e-6.
#[derive(Debug, Clone)]
pub struct FoldingReport {
    pub deviation: f64,
    pub trace: f64,
    pub phi: Option<PositionWaveFunction>,
}

pub fn folding_check(f1: &WignerFunction) -> Result<FoldingReport> {
    let rho = inverse_wigner(f1)?;
    let (spectrum, vectors) = hermitian_eigen(&rho.values, rho.grid.dx());
    let min = spectrum.last().copied().unwrap_or(0.0);
    if min < -QUANTUM_TOL {
        return Err(crate::error::Error::NotQuantumValid(min));
    }
    let trace: f64 = spectrum.iter().sum();
    let deviation = spectrum.iter().map(|l| (l * l - l).abs()).fold(0.0, f64::max);
    let phi = if deviation <= 1e-6 {
        // dominant eigenvector, normalized as a wave function
        let n = rho.grid.n;
        let dx = rho.grid.dx();
        let mut values = Array1::from_shape_fn(n, |i| vectors[(i, 0)]);
        let norm: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
        values.mapv_inplace(|v| v / norm.sqrt());
        Some(PositionWaveFunction { grid: rho.grid.clone(), values })
    } else {
        None
    };
    Ok(FoldingReport { deviation, trace, phi })
}

/// Marginal variances and the Heisenberg product check.
#[derive(Debug, Clone)]
pub struct HeisenbergReport {
    pub var_x: f64,
    pub var_p: f64,
    pub product: f64,
    pub passes: bool,
}

pub fn heisenberg_check(f1: &WignerFunction) -> HeisenbergReport {
    let g = &f1.grid;
    let (pos, mom) = marginals(f1);
    let dx = g.dx();
    let dp2pi = g.dp() / (2.0 * std::f64::consts::PI);
    let (mut mx, mut sx) = (0.0, 0.0);
    for i in 0..g.n_x {
        mx += g.x(i) * pos[i] * dx;
        sx += g.x(i) * g.x(i) * pos[i] * dx;
    }
    let var_x = sx - mx * mx;
    let (mut mp, mut sp) = (0.0, 0.0);
    for j in 0..g.n_p {
        mp += g.p(j) * mom[j] * dp2pi;
        sp += g.p(j) * g.p(j) * mom[j] * dp2pi;
    }
    let var_p = sp - mp * mp;
    let product = var_x * var_p;
    HeisenbergReport { var_x, var_p, product, passes: product >= 0.25 - HEISENBERG_TOL }
}
