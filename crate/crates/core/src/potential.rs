use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// External potential V(x). Analytic kinds carry exact derivatives; the
/// tabulated kind interpolates periodically and differentiates spectrally at
/// construction time.
#[derive(Debug, Clone)]
pub enum Potential {
    Free,
    Harmonic { k: f64 },
    Quartic { lambda: f64 },
    Tabulated(Tabulated),
}

impl Potential {
    pub fn harmonic(k: f64) -> Self {
        Potential::Harmonic { k }
    }

    pub fn quartic(lambda: f64) -> Self {
        Potential::Quartic { lambda }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { k } => 0.5 * k * x * x,
            Potential::Quartic { lambda } => 0.25 * lambda * x.powi(4),
            Potential::Tabulated(t) => t.sample(&t.values, x),
        }
    }

    /// V'(x).
    pub fn dv(&self, x: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { k } => k * x,
            Potential::Quartic { lambda } => lambda * x.powi(3),
            Potential::Tabulated(t) => t.sample(&t.derivative, x),
        }
    }

    /// V'''(x) where available; the third-order Moyal truncation needs it.
    pub fn d3v(&self, x: f64) -> Result<f64> {
        match self {
            Potential::Free => Ok(0.0),
            Potential::Harmonic { .. } => Ok(0.0),
            Potential::Quartic { lambda } => Ok(6.0 * lambda * x),
            Potential::Tabulated(t) => match &t.third {
                Some(d3) => Ok(t.sample(d3, x)),
                None => Err(Error::MissingThirdDerivative),
            },
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Potential::Free)
    }
}

/// Potential sampled on a periodic position grid.
#[derive(Debug, Clone)]
pub struct Tabulated {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    pub derivative: Vec<f64>,
    pub third: Option<Vec<f64>>,
}

impl Tabulated {
    /// Builds from samples with caller-supplied derivatives; the first
    /// derivative is cross-checked against a finite difference of the values.
    pub fn new(
        grid: SpatialGrid,
        values: Vec<f64>,
        derivative: Vec<f64>,
        third: Option<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != grid.n || derivative.len() != grid.n {
            return Err(Error::InvalidGrid("tabulated potential length mismatch".into()));
        }
        let t = Self { grid, values, derivative, third };
        let dev = t.derivative_deviation();
        if dev > 1e-6 {
            return Err(Error::InconsistentDerivative(dev));
        }
        Ok(t)
    }

    /// Max deviation between the stored derivative and a central finite
    /// difference of the stored values, relative to the derivative scale.
    pub fn derivative_deviation(&self) -> f64 {
        let n = self.grid.n;
        let dx = self.grid.dx();
        let scale = self
            .derivative
            .iter()
            .map(|v| v.abs())
            .fold(1.0_f64, f64::max);
        let mut dev: f64 = 0.0;
        for i in 0..n {
            let fd = (self.values[(i + 1) % n] - self.values[(i + n - 1) % n]) / (2.0 * dx);
            dev = dev.max((fd - self.derivative[i]).abs());
        }
        // central differences are O(dx^2); allow that much slack
        let fd_error = dx * dx * scale;
        (dev - fd_error).max(0.0) / scale
    }

    /// Periodic 4-point Lagrange interpolation of a sampled line.
    fn sample(&self, data: &[f64], x: f64) -> f64 {
        let n = self.grid.n;
        let dx = self.grid.dx();
        let u = (x + 0.5 * self.grid.extent) / dx;
        let i1 = u.floor() as isize;
        let t = u - i1 as f64;
        let idx = |k: isize| data[(k.rem_euclid(n as isize)) as usize];
        let (f0, f1, f2, f3) = (idx(i1 - 1), idx(i1), idx(i1 + 1), idx(i1 + 2));
        // Lagrange basis on nodes -1, 0, 1, 2
        let c0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        c0 * f0 + c1 * f1 + c2 * f2 + c3 * f3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_derivatives() {
        let v = Potential::quartic(2.0);
        assert_eq!(v.eval(2.0), 8.0);
        assert_eq!(v.dv(2.0), 16.0);
        assert_eq!(v.d3v(2.0).unwrap(), 24.0);
        assert!(Potential::Free.is_free());
    }

    #[test]
    fn tabulated_matches_analytic_inside() {
        let g = SpatialGrid::new(256, 20.0, 1.0).unwrap();
        // smooth periodic potential
        let f = |x: f64| (2.0 * std::f64::consts::PI * x / 20.0).cos();
        let df = |x: f64| {
            -(2.0 * std::f64::consts::PI / 20.0) * (2.0 * std::f64::consts::PI * x / 20.0).sin()
        };
        let values: Vec<f64> = g.xs().iter().map(|&x| f(x)).collect();
        let derivative: Vec<f64> = g.xs().iter().map(|&x| df(x)).collect();
        let t = Tabulated::new(g, values, derivative, None).unwrap();
        let v = Potential::Tabulated(t);
        for &x in &[0.13_f64, -3.7, 9.2] {
            assert!((v.eval(x) - f(x)).abs() < 1e-6);
            assert!((v.dv(x) - df(x)).abs() < 1e-6);
        }
        assert!(v.d3v(0.0).is_err());
    }

    #[test]
    fn inconsistent_derivative_rejected() {
        let g = SpatialGrid::new(64, 10.0, 1.0).unwrap();
        let values: Vec<f64> = g.xs().iter().map(|&x| (x / 3.0).sin()).collect();
        let derivative = vec![5.0; 64];
        assert!(matches!(
            Tabulated::new(g, values, derivative, None),
            Err(Error::InconsistentDerivative(_))
        ));
    }
}
