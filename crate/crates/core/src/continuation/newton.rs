use serde::{Deserialize, Serialize};

use super::grid::{Grid, StateVector};
use super::system::{jacobian_interleaved, residual_into};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Pivots below this fraction of the largest Jacobian entry count as zero.
pub const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub state: StateVector,
    pub iterations: usize,
    /// `‖R‖∞` before each update and at the returned state.
    pub history: Vec<f64>,
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Newton's method on the stationary system at fixed parameters.
pub fn newton_solve(s0: &StateVector, p: &ModelParams, g: &Grid, settings: &NewtonSettings) -> Result<NewtonSolution> {
    if s0.len() != g.n || s0.v.len() != g.n {
        return Err(Error::Dimension { expected: g.n, got: s0.len() });
    }
    let mut x = s0.to_interleaved();
    let mut r = vec![0.0; x.len()];
    let mut history = Vec::new();
    for it in 0..=settings.max_iter {
        residual_into(&x, p, g, &mut r);
        let norm = max_abs(&r);
        history.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm < settings.tol {
            return Ok(NewtonSolution { state: StateVector::from_interleaved(&x), iterations: it, history });
        }
        if it == settings.max_iter {
            break;
        }
        let lu = jacobian_interleaved(&x, p, g).lu();
        if lu.min_pivot_ratio() < SINGULAR_PIVOT {
            let column = lu.zero_pivot().unwrap_or(0);
            return Err(Error::SingularJacobian { column });
        }
        lu.solve_in_place(&mut r);
        x.iter_mut().zip(&r).for_each(|(xi, dx)| *xi -= dx);
    }
    Err(Error::NonConvergence { iterations: settings.max_iter, residual: *history.last().unwrap_or(&f64::NAN) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::ModeQuadratic;
    use crate::model::linearize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perturbed_stable_homogeneous_state_returns() {
        let p = ModelParams::reference().with_d(0.06);
        let g = Grid::new(51, 1.0).unwrap();
        let lin = linearize(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s0 = StateVector {
            u: (0..51).map(|_| lin.u + 1e-3 * rng.gen_range(-1.0..1.0)).collect(),
            v: (0..51).map(|_| lin.v + 1e-3 * rng.gen_range(-1.0..1.0)).collect(),
        };
        let sol = newton_solve(&s0, &p, &g, &NewtonSettings::default()).unwrap();
        assert!(sol.state.u.iter().all(|u| (u - lin.u).abs() < 1e-10));
        // quadratic tail: e_{k+1} / e_k² bounded while e_k shrinks
        let h = &sol.history;
        assert!(h.len() >= 3);
        let n = h.len();
        assert!(h[n - 1] < 1e-10);
        assert!(h[n - 2] < 1e-3 * h[n - 3] || h[n - 1] < h[n - 2] * 1e-3);
    }

    #[test]
    fn singular_at_discrete_bifurcation_point() {
        let base = ModelParams::reference();
        let g = Grid::new(21, 1.0).unwrap();
        let lin = linearize(&base).unwrap();
        let lam = g.discrete_eigenvalue(1);
        let l2 = lam * lam;
        let q = ModeQuadratic {
            a: l2,
            b: base.d12 * lin.v * l2 - lin.tr_k * lam,
            c: -base.d12 * lin.alpha * lam + lin.det_k,
        };
        let p = base.with_d(q.positive_root().unwrap());
        let s = StateVector::homogeneous(21, lin.u, lin.v);
        // one Newton step is needed to touch the Jacobian: nudge off equilibrium
        let mut s0 = s.clone();
        s0.u[3] += 1e-14;
        let err = newton_solve(&s0, &p, &g, &NewtonSettings { tol: 1e-30, max_iter: 3 }).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = Grid::new(11, 1.0).unwrap();
        let s = StateVector::homogeneous(10, 1.0, 1.0);
        assert!(matches!(
            newton_solve(&s, &ModelParams::reference(), &g, &NewtonSettings::default()),
            Err(Error::Dimension { .. })
        ));
    }
}
