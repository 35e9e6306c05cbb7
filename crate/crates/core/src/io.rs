//! Plain-text serialization of fields and matrices.
//!
//! Field files: one header line recording the grid, then one row per grid
//! point in x-major order, `x p value` for real fields and `x p re im` for
//! complex ones. Matrix dumps: header line, then row-major `re im` pairs.
//! Values are printed with 17 significant digits so reruns reproduce files
//! byte-for-byte.

use crate::error::{Error, Result};
use crate::field::{ClassicalWaveFunction, PhaseSpaceDensity, WignerFunction};
use crate::grid::PhaseSpaceGrid;
use crate::C64;
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Density,
    Wigner,
    WaveFunction,
}

impl FieldKind {
    fn tag(self) -> &'static str {
        match self {
            FieldKind::Density => "density",
            FieldKind::Wigner => "wigner",
            FieldKind::WaveFunction => "wavefunction",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(FieldKind::Density),
            "wigner" => Ok(FieldKind::Wigner),
            "wavefunction" => Ok(FieldKind::WaveFunction),
            other => Err(Error::Parse(format!("unknown field kind '{other}'"))),
        }
    }
}

/// A field read back from disk.
#[derive(Debug, Clone)]
pub enum FieldFile {
    Real { kind: FieldKind, grid: PhaseSpaceGrid, values: Array2<f64> },
    Complex { kind: FieldKind, grid: PhaseSpaceGrid, values: Array2<C64> },
}

fn header(kind: FieldKind, grid: &PhaseSpaceGrid, complex: bool) -> String {
    format!(
        "# phaselab field kind={} complex={} n_x={} n_p={} x_extent={:.17e} p_extent={:.17e} mass={:.17e}",
        kind.tag(),
        complex as u8,
        grid.n_x,
        grid.n_p,
        grid.x_extent,
        grid.p_extent,
        grid.mass
    )
}

pub fn render_real_field(kind: FieldKind, grid: &PhaseSpaceGrid, values: &Array2<f64>) -> String {
    let mut out = String::with_capacity(values.len() * 48);
    out.push_str(&header(kind, grid, false));
    out.push('\n');
    for i in 0..grid.n_x {
        for j in 0..grid.n_p {
            writeln!(out, "{:.17e} {:.17e} {:.17e}", grid.x(i), grid.p(j), values[(i, j)])
                .unwrap();
        }
    }
    out
}

pub fn render_complex_field(
    kind: FieldKind,
    grid: &PhaseSpaceGrid,
    values: &Array2<C64>,
) -> String {
    let mut out = String::with_capacity(values.len() * 64);
    out.push_str(&header(kind, grid, true));
    out.push('\n');
    for i in 0..grid.n_x {
        for j in 0..grid.n_p {
            let v = values[(i, j)];
            writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e}",
                grid.x(i),
                grid.p(j),
                v.re,
                v.im
            )
            .unwrap();
        }
    }
    out
}

pub fn write_density(path: &Path, w: &PhaseSpaceDensity) -> Result<()> {
    std::fs::write(path, render_real_field(FieldKind::Density, &w.grid, &w.values))?;
    Ok(())
}

pub fn write_wigner(path: &Path, w: &WignerFunction) -> Result<()> {
    std::fs::write(path, render_real_field(FieldKind::Wigner, &w.grid, &w.values))?;
    Ok(())
}

pub fn write_wavefunction(path: &Path, psi: &ClassicalWaveFunction) -> Result<()> {
    std::fs::write(
        path,
        render_complex_field(FieldKind::WaveFunction, &psi.grid, &psi.values),
    )?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let text = std::fs::read_to_string(path)?;
    parse_field(&text)
}

pub fn parse_field(text: &str) -> Result<FieldFile> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
    let mut kind = None;
    let mut complex = false;
    let (mut n_x, mut n_p) = (0usize, 0usize);
    let (mut x_extent, mut p_extent, mut mass) = (0.0, 0.0, 1.0);
    for tok in head.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            match k {
                "kind" => kind = Some(FieldKind::from_tag(v)?),
                "complex" => complex = v == "1",
                "n_x" => n_x = v.parse().map_err(|_| Error::Parse("bad n_x".into()))?,
                "n_p" => n_p = v.parse().map_err(|_| Error::Parse("bad n_p".into()))?,
                "x_extent" => x_extent = parse_f64(v)?,
                "p_extent" => p_extent = parse_f64(v)?,
                "mass" => mass = parse_f64(v)?,
                _ => {}
            }
        }
    }
    let kind = kind.ok_or_else(|| Error::Parse("header missing kind".into()))?;
    let grid = PhaseSpaceGrid::new(n_x, n_p, x_extent, p_extent, mass)?;
    if complex {
        let mut values = Array2::<C64>::zeros((n_x, n_p));
        read_rows(lines, n_x, n_p, 4, |i, j, cols| {
            values[(i, j)] = C64::new(cols[2], cols[3]);
        })?;
        Ok(FieldFile::Complex { kind, grid, values })
    } else {
        let mut values = Array2::<f64>::zeros((n_x, n_p));
        read_rows(lines, n_x, n_p, 3, |i, j, cols| {
            values[(i, j)] = cols[2];
        })?;
        Ok(FieldFile::Real { kind, grid, values })
    }
}

fn read_rows<'a>(
    lines: impl Iterator<Item = &'a str>,
    n_x: usize,
    n_p: usize,
    ncols: usize,
    mut sink: impl FnMut(usize, usize, &[f64]),
) -> Result<()> {
    let mut count = 0usize;
    let mut cols = vec![0.0; ncols];
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        for c in cols.iter_mut() {
            *c = parse_f64(it.next().ok_or_else(|| Error::Parse("short row".into()))?)?;
        }
        sink(count / n_p, count % n_p, &cols);
        count += 1;
    }
    if count != n_x * n_p {
        return Err(Error::Parse(format!("expected {} rows, found {count}", n_x * n_p)));
    }
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("bad float '{s}'")))
}

/// Row-major complex matrix dump, `re im` pairs.
pub fn render_matrix(label: &str, m: &Array2<C64>) -> String {
    let (r, c) = m.dim();
    let mut out = String::with_capacity(r * c * 48);
    writeln!(out, "# phaselab matrix label={label} rows={r} cols={c}").unwrap();
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            write!(out, "{:.17e} {:.17e}", v.re, v.im).unwrap();
            out.push(if j + 1 == c { '\n' } else { ' ' });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_field_round_trips() {
        let grid = PhaseSpaceGrid::new(8, 8, 4.0, 4.0, 1.0).unwrap();
        let w = PhaseSpaceDensity::from_fn(grid, |x, p| (x + 2.0) * (p + 2.0) + 0.125);
        let text = render_real_field(FieldKind::Density, &w.grid, &w.values);
        match parse_field(&text).unwrap() {
            FieldFile::Real { kind, grid, values } => {
                assert_eq!(kind, FieldKind::Density);
                assert_eq!(grid, w.grid);
                assert_eq!(values, w.values);
            }
            _ => panic!("expected real field"),
        }
    }

    #[test]
    fn complex_field_round_trips() {
        let grid = PhaseSpaceGrid::new(8, 8, 4.0, 4.0, 1.0).unwrap();
        let psi = ClassicalWaveFunction::from_fn_complex(grid, |x, p| C64::new(x, p * 0.5));
        let text = render_complex_field(FieldKind::WaveFunction, &psi.grid, &psi.values);
        match parse_field(&text).unwrap() {
            FieldFile::Complex { values, .. } => assert_eq!(values, psi.values),
            _ => panic!("expected complex field"),
        }
    }

    #[test]
    fn render_is_deterministic() {
        let grid = PhaseSpaceGrid::new(8, 8, 4.0, 4.0, 1.0).unwrap();
        let w = PhaseSpaceDensity::from_fn(grid, |x, p| (x * 1.1).sin() + p);
        let a = render_real_field(FieldKind::Density, &w.grid, &w.values);
        let b = render_real_field(FieldKind::Density, &w.grid, &w.values);
        assert_eq!(a, b);
    }
}
