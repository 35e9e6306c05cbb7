//! Expectation-value machinery: pointwise classical expectations,
//! statistical (roughness) observables built from derivatives of the wave
//! function, quantum position/momentum operators on phase-space fields,
//! ordered correlators, and sign reconstruction of the wave function from a
//! probability density.
//!
//! On phase-space fields the quantum pair is represented as
//! `X_Q = x + (i/2) d/dp` and `P_Q = p - (i/2) d/dx`, with `[X_Q, P_Q] = i`.
//! Derivatives are spectral, so operator applications are exact on
//! band-limited fields; all correlator integrals assume boundary-vanishing
//! fields, which the boundary-mass guard checks.

use crate::error::{Error, Result};
use crate::fft::{self, LineFft};
use crate::field::{ClassicalWaveFunction, PhaseSpaceDensity, WignerFunction};
use crate::grid::PhaseSpaceGrid;
use crate::C64;
use ndarray::Array2;

/// Spectral derivative and operator applications on one grid.
pub struct PhaseSpaceOps {
    grid: PhaseSpaceGrid,
    fft_x: LineFft,
    fft_p: LineFft,
}

impl PhaseSpaceOps {
    pub fn new(grid: &PhaseSpaceGrid) -> Self {
        Self {
            grid: grid.clone(),
            fft_x: LineFft::new(grid.n_x),
            fft_p: LineFft::new(grid.n_p),
        }
    }

    /// d/dx along the first axis.
    pub fn ddx(&self, f: &Array2<C64>) -> Array2<C64> {
        let g = &self.grid;
        let mut t = Array2::zeros((g.n_p, g.n_x));
        fft::transpose_into(f, &mut t);
        fft::apply_spectral_rows(&self.fft_x, &mut t, |k| C64::new(0.0, g.freq_x(k)));
        let mut out = Array2::zeros((g.n_x, g.n_p));
        fft::transpose_into(&t, &mut out);
        out
    }

    /// d/dp along the second axis.
    pub fn ddp(&self, f: &Array2<C64>) -> Array2<C64> {
        let mut out = f.clone();
        let g = &self.grid;
        fft::apply_spectral_rows(&self.fft_p, &mut out, |s| C64::new(0.0, g.freq_p(s)));
        out
    }

    /// `X_Q f = x f + (i/2) df/dp`.
    pub fn apply_xq(&self, f: &Array2<C64>) -> Array2<C64> {
        let dp = self.ddp(f);
        let g = &self.grid;
        Array2::from_shape_fn((g.n_x, g.n_p), |(i, j)| {
            g.x(i) * f[(i, j)] + C64::new(0.0, 0.5) * dp[(i, j)]
        })
    }

    /// `P_Q f = p f - (i/2) df/dx`.
    pub fn apply_pq(&self, f: &Array2<C64>) -> Array2<C64> {
        let dx = self.ddx(f);
        let g = &self.grid;
        Array2::from_shape_fn((g.n_x, g.n_p), |(i, j)| {
            g.p(j) * f[(i, j)] - C64::new(0.0, 0.5) * dx[(i, j)]
        })
    }

    /// Apply an operator sequence, rightmost token first.
    pub fn apply_sequence(&self, f: &Array2<C64>, seq: &OperatorSequence) -> Array2<C64> {
        let mut out = f.clone();
        for token in seq.tokens.iter().rev() {
            out = match token {
                OpToken::X => self.apply_xq(&out),
                OpToken::P => self.apply_pq(&out),
            };
        }
        out
    }
}

/// Position/momentum token of an operator sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpToken {
    X,
    P,
}

/// Ordered sequence of X/P operators; the rightmost token is the first
/// measurement. Length is capped at 8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorSequence {
    pub tokens: Vec<OpToken>,
}

impl OperatorSequence {
    pub fn new(tokens: Vec<OpToken>) -> Result<Self> {
        if tokens.is_empty() || tokens.len() > 8 {
            return Err(Error::SequenceTooLong(tokens.len()));
        }
        Ok(Self { tokens })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let tokens: Result<Vec<OpToken>> = s
            .chars()
            .map(|c| match c {
                'X' | 'x' => Ok(OpToken::X),
                'P' | 'p' => Ok(OpToken::P),
                other => Err(Error::BadToken(other)),
            })
            .collect();
        Self::new(tokens?)
    }

    /// True when the sequence equals its reverse, which makes the operator
    /// Hermitean and its expectation real.
    pub fn is_palindrome(&self) -> bool {
        let rev: Vec<_> = self.tokens.iter().rev().copied().collect();
        rev == self.tokens
    }
}

impl std::fmt::Display for OperatorSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for t in &self.tokens {
            write!(f, "{}", if *t == OpToken::X { 'X' } else { 'P' })?;
        }
        Ok(())
    }
}

/// Pointwise classical expectation `integral F(x, p) w dx dp / (2 pi)`.
pub fn classical_expectation(w: &PhaseSpaceDensity, f: impl Fn(f64, f64) -> f64) -> f64 {
    let g = &w.grid;
    let mut acc = 0.0;
    for i in 0..g.n_x {
        for j in 0..g.n_p {
            acc += f(g.x(i), g.p(j)) * w.values[(i, j)];
        }
    }
    acc * g.measure()
}

/// The same pointwise integral against a Wigner quasi-density; by the
/// symmetrization rule it equals the totally symmetrized operator
/// expectation.
pub fn symmetrized_expectation(rhow: &WignerFunction, f: impl Fn(f64, f64) -> f64) -> f64 {
    let g = &rhow.grid;
    let mut acc = 0.0;
    for i in 0..g.n_x {
        for j in 0..g.n_p {
            acc += f(g.x(i), g.p(j)) * rhow.values[(i, j)];
        }
    }
    acc * g.measure()
}

/// Ordered operator correlator `integral S[X_Q, P_Q] rho_w dx dp/(2 pi)`,
/// tokens applied right-to-left. Hermitean (palindromic) sequences give real
/// values; generic sequences are complex.
pub fn ordered_correlator(rhow: &WignerFunction, seq: &OperatorSequence) -> C64 {
    let ops = PhaseSpaceOps::new(&rhow.grid);
    let lifted = rhow.values.mapv(|v| C64::new(v, 0.0));
    let applied = ops.apply_sequence(&lifted, seq);
    fft::sum_c64(&applied) * rhow.grid.measure()
}

/// Expansion of the nested-anticommutator (conditional measurement) product
/// into plain ordered sequences with weights: the first measurement is the
/// rightmost token, each later observable enters through `(AB + BA)/2`.
pub fn nested_anticommutator_expansion(seq: &OperatorSequence) -> Vec<(f64, OperatorSequence)> {
    let tokens = &seq.tokens;
    let mut terms: Vec<(f64, Vec<OpToken>)> = vec![(1.0, vec![tokens[tokens.len() - 1]])];
    for &t in tokens.iter().rev().skip(1) {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for (c, body) in &terms {
            let mut left = Vec::with_capacity(body.len() + 1);
            left.push(t);
            left.extend_from_slice(body);
            let mut right = body.clone();
            right.push(t);
            next.push((0.5 * c, left));
            next.push((0.5 * c, right));
        }
        terms = next;
    }
    terms
        .into_iter()
        .map(|(c, tokens)| (c, OperatorSequence { tokens }))
        .collect()
}

/// Correlator of the nested-anticommutator product of a sequence.
pub fn measurement_correlator(rhow: &WignerFunction, seq: &OperatorSequence) -> C64 {
    nested_anticommutator_expansion(seq)
        .into_iter()
        .map(|(c, s)| ordered_correlator(rhow, &s) * c)
        .sum()
}

/// Quantum expectation `integral conj(psi) S[X_Q, P_Q] psi dx dp/(2 pi)` on
/// a phase-space wave function.
pub fn quantum_expectation(psi: &ClassicalWaveFunction, seq: &OperatorSequence) -> C64 {
    let ops = PhaseSpaceOps::new(&psi.grid);
    let applied = ops.apply_sequence(&psi.values, seq);
    fft::dot_cc(&psi.values, &applied) * psi.grid.measure()
}

/// Quantum expectation of a real-coefficient operator polynomial.
pub fn quantum_expectation_poly(
    psi: &ClassicalWaveFunction,
    poly: &[(f64, OperatorSequence)],
) -> C64 {
    poly.iter().map(|(c, s)| quantum_expectation(psi, s) * *c).sum()
}

/// First and second statistical moments of a phase-space wave function.
#[derive(Debug, Clone)]
pub struct StatisticalMoments {
    pub x_s: f64,
    pub p_s: f64,
    pub x_s_sq: f64,
    pub p_s_sq: f64,
    /// `<G_nm> = <X_s^n P_s^m>` for n, m in 0..=3.
    pub g_table: Array2<C64>,
    /// True when a complex input was replaced by its modulus.
    pub used_modulus: bool,
}

/// Moments of the derivative observables `P_s = -i d/dx`, `X_s = i d/dp`.
///
/// All moments are computed through derivatives of psi; the log-density
/// shortcut is exposed separately because it is only valid at second order.
/// A complex input is replaced by its modulus and flagged.
pub fn statistical_moments(psi: &ClassicalWaveFunction) -> StatisticalMoments {
    let (work, used_modulus);
    if psi.is_real() || psi.max_imag() < 1e-14 {
        work = psi.clone();
        used_modulus = false;
    } else {
        let grid = psi.grid.clone();
        let values = psi.values.mapv(|v| C64::new(v.norm(), 0.0));
        work = ClassicalWaveFunction::from_parts(grid, values, true);
        used_modulus = true;
    }
    let ops = PhaseSpaceOps::new(&work.grid);
    let mu = work.grid.measure();
    let ddx = ops.ddx(&work.values);
    let ddp = ops.ddp(&work.values);
    let p_s = (fft::dot_cc(&work.values, &ddx) * C64::new(0.0, -1.0) * mu).re;
    let x_s = (fft::dot_cc(&work.values, &ddp) * C64::new(0.0, 1.0) * mu).re;
    let p_s_sq = (fft::dot_cc(&ddx, &ddx) * mu).re;
    let x_s_sq = (fft::dot_cc(&ddp, &ddp) * mu).re;

    // G_nm table: i^n (-i)^m  integral psi d_p^n d_x^m psi
    let mut dxm: Vec<Array2<C64>> = vec![work.values.clone()];
    for _ in 1..4 {
        dxm.push(ops.ddx(dxm.last().unwrap()));
    }
    let mut g_table = Array2::from_elem((4, 4), C64::new(0.0, 0.0));
    for (m, base) in dxm.iter().enumerate() {
        let mut cur = base.clone();
        for n in 0..4 {
            if n > 0 {
                cur = ops.ddp(&cur);
            }
            let pref = C64::i().powu(n as u32) * (-C64::i()).powu(m as u32);
            g_table[(n, m)] = fft::dot_cc(&work.values, &cur) * pref * mu;
        }
    }
    StatisticalMoments { x_s, p_s, x_s_sq, p_s_sq, g_table, used_modulus }
}

/// Both routes to `<P_s^2>` restricted to cells where `w > threshold`:
/// the derivative form `(d_x psi)^2` and the log-density form
/// `(d_x w)^2 / (4 w)`. They agree pointwise wherever `w > 0`.
pub fn p_s_sq_dual_route(psi: &ClassicalWaveFunction, threshold: f64) -> (f64, f64) {
    let ops = PhaseSpaceOps::new(&psi.grid);
    let mu = psi.grid.measure();
    let ddx_psi = ops.ddx(&psi.values);
    let w = psi.values.mapv(|v| C64::new(v.norm_sqr(), 0.0));
    let ddx_w = ops.ddx(&w);
    let mut deriv = 0.0;
    let mut logw = 0.0;
    for i in 0..psi.grid.n_x {
        for j in 0..psi.grid.n_p {
            let wv = w[(i, j)].re;
            if wv > threshold {
                deriv += ddx_psi[(i, j)].norm_sqr();
                logw += ddx_w[(i, j)].re.powi(2) / (4.0 * wv);
            }
        }
    }
    (deriv * mu, logw * mu)
}

/// Sign field recovered from the nodal structure of a density.
#[derive(Debug, Clone)]
pub struct SignField {
    pub signs: Array2<i8>,
    pub n_regions: usize,
    /// Set when the region adjacency could not be signed consistently; the
    /// identity sign is used in that case.
    pub ambiguous: bool,
}

/// Reconstructs `psi = s(x, p) sqrt(w)` from a density with resolvable nodal
/// curves. Cells with `w <= threshold` form the nodal set; connected
/// regions of the complement get relative signs by testing, across every
/// crossing of the nodal gap, whether the signed square root continues more
/// smoothly with or without a sign flip (linear zeros flip, quadratic zeros
/// do not). The region holding the global maximum is taken positive.
pub fn sign_reconstruct(
    w: &PhaseSpaceDensity,
    threshold: f64,
) -> (SignField, ClassicalWaveFunction) {
    let g = &w.grid;
    let (n_x, n_p) = (g.n_x, g.n_p);
    let sqrt_w = w.values.mapv(|v| v.max(0.0).sqrt());

    // label connected regions of w > threshold (4-neighbor, periodic)
    let mut label = Array2::<i32>::from_elem((n_x, n_p), -1);
    let mut n_regions = 0usize;
    for i in 0..n_x {
        for j in 0..n_p {
            if w.values[(i, j)] > threshold && label[(i, j)] < 0 {
                let id = n_regions as i32;
                n_regions += 1;
                let mut stack = vec![(i, j)];
                label[(i, j)] = id;
                while let Some((a, b)) = stack.pop() {
                    for (da, db) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                        let na = (a as isize + da).rem_euclid(n_x as isize) as usize;
                        let nb = (b as isize + db).rem_euclid(n_p as isize) as usize;
                        if w.values[(na, nb)] > threshold && label[(na, nb)] < 0 {
                            label[(na, nb)] = id;
                            stack.push((na, nb));
                        }
                    }
                }
            }
        }
    }

    if n_regions <= 1 {
        let signs = Array2::<i8>::ones((n_x, n_p));
        let psi = signed_sqrt(g, &sqrt_w, &signs);
        return (SignField { signs, n_regions, ambiguous: false }, psi);
    }

    // vote on relative signs across nodal gaps, scanning rows and columns:
    // a stencil of two cells on each side of the gap (zeros inside) is
    // continued with and without a flip; the smoother continuation wins
    let mut votes = std::collections::HashMap::<(i32, i32), (f64, f64)>::new();
    const MAX_GAP: usize = 6;
    {
        let mut scan = |cells: &[(i32, f64)]| {
            let len = cells.len();
            let mut idx = 1usize;
            while idx + 1 < len {
                // look for a region cell followed by a gap
                let (la, _) = cells[idx];
                if la < 0 || cells[idx + 1].0 >= 0 {
                    idx += 1;
                    continue;
                }
                if cells[idx - 1].0 != la {
                    idx += 1;
                    continue;
                }
                // measure the gap
                let mut k = idx + 1;
                let mut gap = 0usize;
                while k < len && cells[k].0 < 0 && gap <= MAX_GAP {
                    gap += 1;
                    k += 1;
                }
                if k + 1 < len && (1..=MAX_GAP).contains(&gap) {
                    let lb = cells[k].0;
                    if lb >= 0 && lb != la && cells[k + 1].0 == lb {
                        let mut seq = vec![cells[idx - 1].1, cells[idx].1];
                        seq.extend(std::iter::repeat(0.0).take(gap));
                        let (b1, b2) = (cells[k].1, cells[k + 1].1);
                        let rough = |flip: bool| {
                            let s = if flip { -1.0 } else { 1.0 };
                            let mut v = seq.clone();
                            v.push(s * b1);
                            v.push(s * b2);
                            v.windows(3)
                                .map(|w3| (w3[0] - 2.0 * w3[1] + w3[2]).powi(2))
                                .sum::<f64>()
                        };
                        let (rf, rs) = (rough(true), rough(false));
                        let key = if la < lb { (la, lb) } else { (lb, la) };
                        let entry = votes.entry(key).or_insert((0.0, 0.0));
                        if rf < rs {
                            entry.0 += rs - rf;
                        } else {
                            entry.1 += rf - rs;
                        }
                    }
                }
                idx = k;
            }
        };
        for i in 0..n_x {
            let row: Vec<(i32, f64)> =
                (0..n_p).map(|j| (label[(i, j)], sqrt_w[(i, j)])).collect();
            scan(&row);
        }
        for j in 0..n_p {
            let col: Vec<(i32, f64)> =
                (0..n_x).map(|i| (label[(i, j)], sqrt_w[(i, j)])).collect();
            scan(&col);
        }
    }

    // assign region signs from the vote graph, starting at the global max
    let mut region_sign = vec![0i8; n_regions];
    let peak = {
        let mut best = (0usize, 0usize);
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..n_x {
            for j in 0..n_p {
                if w.values[(i, j)] > best_v {
                    best_v = w.values[(i, j)];
                    best = (i, j);
                }
            }
        }
        label[best] as usize
    };
    let mut ambiguous = false;
    region_sign[peak] = 1;
    let mut frontier = vec![peak];
    while let Some(r) = frontier.pop() {
        for (&(a, b), &(flip_w, same_w)) in votes.iter() {
            let (a, b) = (a as usize, b as usize);
            let (from, to) = if a == r && region_sign[b] == 0 {
                (a, b)
            } else if b == r && region_sign[a] == 0 {
                (b, a)
            } else {
                continue;
            };
            let rel = if flip_w > same_w { -1 } else { 1 };
            region_sign[to] = rel * region_sign[from];
            frontier.push(to);
        }
    }
    // consistency: every voted edge must agree with the assignment
    for (&(a, b), &(flip_w, same_w)) in votes.iter() {
        let (sa, sb) = (region_sign[a as usize], region_sign[b as usize]);
        if sa != 0 && sb != 0 {
            let rel = if flip_w > same_w { -1 } else { 1 };
            if sa * sb != rel {
                ambiguous = true;
            }
        }
    }
    // disconnected regions default positive
    for s in region_sign.iter_mut() {
        if *s == 0 {
            *s = 1;
        }
    }
    if ambiguous {
        region_sign.iter_mut().for_each(|s| *s = 1);
    }

    let signs = Array2::from_shape_fn((n_x, n_p), |(i, j)| {
        let l = label[(i, j)];
        if l >= 0 {
            region_sign[l as usize]
        } else {
            1
        }
    });
    let psi = signed_sqrt(g, &sqrt_w, &signs);
    (SignField { signs, n_regions, ambiguous }, psi)
}

fn signed_sqrt(
    grid: &PhaseSpaceGrid,
    sqrt_w: &Array2<f64>,
    signs: &Array2<i8>,
) -> ClassicalWaveFunction {
    let values = Array2::from_shape_fn((grid.n_x, grid.n_p), |(i, j)| {
        C64::new(signs[(i, j)] as f64 * sqrt_w[(i, j)], 0.0)
    });
    ClassicalWaveFunction::from_parts(grid.clone(), values, true)
}
