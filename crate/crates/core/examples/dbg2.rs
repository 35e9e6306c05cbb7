use phaselab::field::*;
use phaselab::grid::*;
use phaselab::potential::Potential;
use phaselab::quantum::*;
use phaselab::wigner::*;
use phaselab::C64;
use ndarray::Array2;
use phaselab::fft::{transpose_into, LineFft};

fn von_neumann(rho: &DensityMatrix, potential: &Potential, dt: f64, n: usize) -> Array2<C64> {
    let g = rho.grid.clone();
    let nn = g.n;
    let fft = LineFft::new(nn);
    let ph = |p: f64| C64::new(p.cos(), p.sin());
    let kin_half: Vec<C64> = (0..nn)
        .map(|k| {
            let w = g.freq(k);
            ph(-w * w * dt / (4.0 * g.mass))
        })
        .collect();
    let pot_phase: Vec<C64> = (0..nn).map(|i| ph(-potential.eval(g.x(i)) * dt)).collect();
    let mut m = rho.values.clone();
    let mut scratch = Array2::<C64>::zeros((nn, nn));
    let mut kinetic_half = |m: &mut Array2<C64>| {
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
    m
}

fn main() {
    let spec = GaussianPacketSpec { p_bar: 0.4, dp: 0.7, mass: 1.0 };
    for (ll, lam, steps) in [(24.0, 0.5, 75usize), (24.0, 0.4, 100), (22.0, 0.5, 100), (24.0, 0.5, 100)] {
        let pot = Potential::quartic(lam);
        let g = SpatialGrid::new(128, ll, 1.0).unwrap();
        let rho0 = spec.density_matrix(&g, 0.0);
        let dt = 2e-3;
        let m = von_neumann(&rho0, &pot, dt, steps);
        let mut rho_t = DensityMatrix::from_fn(g.clone(), |_, _| C64::new(0.0, 0.0));
        rho_t.values = m;
        let w0 = wigner_transform(&rho0).unwrap();
        let mut st = MoyalStepper::new(&w0.grid, &pot, dt);
        let w_t = st.run(w0, steps);
        let w_expect = wigner_transform(&rho_t).unwrap();
        let mut max_err = 0.0f64;
        for (a, b) in w_t.values.iter().zip(w_expect.values.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        println!("vn L={ll} lam={lam} steps={steps}: err {max_err:.3e}");
    }
}
