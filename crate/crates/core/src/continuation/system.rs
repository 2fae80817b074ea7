//! Discrete stationary operator in flux form.
//!
//! Unknowns are interleaved as `(u_0, v_0, u_1, v_1, …)` so the Jacobian is a
//! band matrix with three sub- and three super-diagonals.

use super::banded::BandedMatrix;
use super::grid::{Grid, StateVector};
use crate::params::ModelParams;

pub const BANDWIDTH: usize = 3;

fn fluxes(x: &[f64], p: &ModelParams, n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|j| {
            let (u, v) = (x[2 * j], x[2 * j + 1]);
            ((p.d + p.d11 * u + p.d12 * v) * u, (p.d + p.d22 * v + p.d21 * u) * v)
        })
        .unzip()
}

/// Residual of interleaved unknowns, written to `out` (same ordering).
pub fn residual_into(x: &[f64], p: &ModelParams, g: &Grid, out: &mut [f64]) {
    let n = g.n;
    let (phi_u, phi_v) = fluxes(x, p, n);
    let mut lap_u = vec![0.0; n];
    let mut lap_v = vec![0.0; n];
    g.laplacian(&phi_u, &mut lap_u);
    g.laplacian(&phi_v, &mut lap_v);
    for j in 0..n {
        let (u, v) = (x[2 * j], x[2 * j + 1]);
        out[2 * j] = lap_u[j] + (p.r1 - p.a1 * u - p.b1 * v) * u;
        out[2 * j + 1] = lap_v[j] + (p.r2 - p.b2 * u - p.a2 * v) * v;
    }
}

/// `Δ_h[(d + d11 u + d12 v) u] + (r1 − a1 u − b1 v) u` and its `v` counterpart,
/// interleaved.
pub fn residual(s: &StateVector, p: &ModelParams, g: &Grid) -> Vec<f64> {
    let x = s.to_interleaved();
    let mut out = vec![0.0; x.len()];
    residual_into(&x, p, g, &mut out);
    out
}

/// `∂R/∂d = (Δ_h u, Δ_h v)`, interleaved.
pub fn d_derivative(x: &[f64], g: &Grid) -> Vec<f64> {
    let n = g.n;
    let (u, v): (Vec<f64>, Vec<f64>) = (0..n).map(|j| (x[2 * j], x[2 * j + 1])).unzip();
    let mut lu = vec![0.0; n];
    let mut lv = vec![0.0; n];
    g.laplacian(&u, &mut lu);
    g.laplacian(&v, &mut lv);
    lu.iter().zip(&lv).flat_map(|(a, b)| [*a, *b]).collect()
}

/// Exact Jacobian of [`residual_into`] with respect to the interleaved unknowns.
pub fn jacobian_interleaved(x: &[f64], p: &ModelParams, g: &Grid) -> BandedMatrix {
    let n = g.n;
    let inv = 1.0 / (g.h() * g.h());
    let mut jac = BandedMatrix::zeros(2 * n, BANDWIDTH, BANDWIDTH);
    for j in 0..n {
        // Laplacian stencil weights of row j on nodes j−1, j, j+1.
        let stencil: [(usize, f64); 3] = if j == 0 {
            [(0, -2.0 * inv), (1, 2.0 * inv), (1, 0.0)]
        } else if j == n - 1 {
            [(n - 1, -2.0 * inv), (n - 2, 2.0 * inv), (n - 2, 0.0)]
        } else {
            [(j - 1, inv), (j, -2.0 * inv), (j + 1, inv)]
        };
        for (i, w) in stencil {
            if w == 0.0 {
                continue;
            }
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            jac.add(2 * j, 2 * i, w * (p.d + 2.0 * p.d11 * u + p.d12 * v));
            jac.add(2 * j, 2 * i + 1, w * p.d12 * u);
            jac.add(2 * j + 1, 2 * i, w * p.d21 * v);
            jac.add(2 * j + 1, 2 * i + 1, w * (p.d + 2.0 * p.d22 * v + p.d21 * u));
        }
        let (u, v) = (x[2 * j], x[2 * j + 1]);
        jac.add(2 * j, 2 * j, p.r1 - 2.0 * p.a1 * u - p.b1 * v);
        jac.add(2 * j, 2 * j + 1, -p.b1 * u);
        jac.add(2 * j + 1, 2 * j, -p.b2 * v);
        jac.add(2 * j + 1, 2 * j + 1, p.r2 - p.b2 * u - 2.0 * p.a2 * v);
    }
    jac
}

pub fn jacobian(s: &StateVector, p: &ModelParams, g: &Grid) -> BandedMatrix {
    jacobian_interleaved(&s.to_interleaved(), p, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::char_matrix_at;
    use crate::model::linearize;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        let mut p = ModelParams::reference().with_d21(0.02).with_d(0.013);
        p.d11 = 0.05;
        p.d22 = 0.07;
        p
    }

    #[test]
    fn homogeneous_states_are_stationary() {
        let p = ModelParams::reference().with_d21(0.017);
        let g = Grid::new(41, 1.0).unwrap();
        let lin = linearize(&p).unwrap();
        let r = residual(&StateVector::homogeneous(41, lin.u, lin.v), &p, &g);
        assert!(r.iter().all(|x| x.abs() < 1e-14), "{:?}", r.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let r0 = residual(&StateVector::homogeneous(41, 0.0, 0.0), &p, &g);
        assert!(r0.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn no_cross_diffusion_decouples_diffusion_blocks() {
        let p = ModelParams::reference().with_d12(0.0).with_d21(0.0);
        let g = Grid::new(9, 1.0).unwrap();
        let s = StateVector { u: (0..9).map(|j| 1.0 + 0.1 * j as f64).collect(), v: vec![0.3; 9] };
        let jac = jacobian(&s, &p, &g);
        for j in 0..9usize {
            for i in [j.saturating_sub(1), (j + 1).min(8)] {
                if i != j {
                    assert_eq!(jac.get(2 * j, 2 * i + 1), 0.0);
                    assert_eq!(jac.get(2 * j + 1, 2 * i), 0.0);
                }
            }
        }
    }

    #[test]
    fn homogeneous_spectrum_is_union_of_mode_spectra() {
        let p = ModelParams::reference().with_d21(0.01).with_d(0.02);
        let n = 15;
        let g = Grid::new(n, 1.0).unwrap();
        let lin = linearize(&p).unwrap();
        let jac = jacobian(&StateVector::homogeneous(n, lin.u, lin.v), &p, &g);
        let mut got: Vec<Complex64> = jac.to_dense().complex_eigenvalues().iter().copied().collect();
        let mut expected: Vec<Complex64> = (0..n as u32)
            .flat_map(|k| {
                let m = char_matrix_at(&lin, &p, g.discrete_eigenvalue(k), p.d);
                let (tr, det) = (m.trace(), m.determinant());
                let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
                [(tr + disc) / 2.0, (tr - disc) / 2.0]
            })
            .collect();
        let key = |z: &Complex64| (z.re, z.im);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        expected.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-8 * b.norm().max(1.0), "{a} vs {b}");
        }
    }

    fn random_state(n: usize, seed: &[f64]) -> Vec<f64> {
        (0..2 * n).map(|i| 0.2 + seed[i % seed.len()].abs() + 0.01 * i as f64).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]
        #[test]
        fn jacobian_matches_central_differences(seed in prop::collection::vec(-1.0..1.0f64, 8..30), n in 3usize..25) {
            let p = params();
            let g = Grid::new(n, 1.3).unwrap();
            let x = random_state(n, &seed);
            let jac = jacobian_interleaved(&x, &p, &g).to_dense();
            let mut fd = nalgebra::DMatrix::zeros(2 * n, 2 * n);
            let (mut rp, mut rm) = (vec![0.0; 2 * n], vec![0.0; 2 * n]);
            for c in 0..2 * n {
                let h = 1e-6 * x[c].abs().max(1.0);
                let mut xp = x.clone();
                xp[c] += h;
                let mut xm = x.clone();
                xm[c] -= h;
                residual_into(&xp, &p, &g, &mut rp);
                residual_into(&xm, &p, &g, &mut rm);
                for r in 0..2 * n {
                    fd[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
                }
            }
            let scale = jac.amax();
            prop_assert!((&jac - &fd).amax() <= 1e-6 * scale, "{} vs scale {}", (&jac - &fd).amax(), scale);
        }

        #[test]
        fn d_derivative_matches_difference(seed in prop::collection::vec(-1.0..1.0f64, 8..30), n in 3usize..25) {
            let p = params();
            let g = Grid::new(n, 1.0).unwrap();
            let x = random_state(n, &seed);
            let (mut rp, mut rm) = (vec![0.0; 2 * n], vec![0.0; 2 * n]);
            residual_into(&x, &p.with_d(p.d + 1e-4), &g, &mut rp);
            residual_into(&x, &p.with_d(p.d - 1e-4), &g, &mut rm);
            let dd = d_derivative(&x, &g);
            for i in 0..2 * n {
                let fd = (rp[i] - rm[i]) / 2e-4;
                prop_assert!((fd - dd[i]).abs() <= 1e-6 * dd[i].abs().max(1.0));
            }
        }
    }
}
