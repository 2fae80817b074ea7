use nalgebra::Schur;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::banded::BandedMatrix;
use super::grid::{Grid, StateVector};
use super::system::jacobian;
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Number of eigenvalues with the largest real parts kept in a summary.
pub const LEADING: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    /// `#{Re > τ_eig}`.
    pub unstable_count: usize,
    pub unstable_real: usize,
    pub unstable_complex: usize,
    /// `#{|Re| ≤ τ_eig}`.
    pub marginal: usize,
    /// Eigenvalues ordered by decreasing real part.
    pub leading: Vec<Complex64>,
}

impl StabilitySummary {
    pub fn is_stable(&self) -> bool {
        self.unstable_count == 0
    }
}

pub(crate) fn is_complex(z: &Complex64) -> bool {
    z.im.abs() > 1e-8 * (1.0 + z.norm())
}

/// All eigenvalues of a banded Jacobian via a dense real Schur form.
pub fn spectrum_of(jac: &BandedMatrix) -> Result<Vec<Complex64>> {
    let n = jac.n();
    let schur = Schur::try_new(jac.to_dense(), f64::EPSILON, 200 * n).ok_or(Error::EigenFailure)?;
    let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

pub fn summarize(eigenvalues: &[Complex64], tau_eig: f64) -> StabilitySummary {
    let mut s = StabilitySummary { unstable_count: 0, unstable_real: 0, unstable_complex: 0, marginal: 0, leading: vec![] };
    for z in eigenvalues {
        if z.re > tau_eig {
            s.unstable_count += 1;
            if is_complex(z) {
                s.unstable_complex += 1;
            } else {
                s.unstable_real += 1;
            }
        } else if z.re.abs() <= tau_eig {
            s.marginal += 1;
        }
    }
    s.leading = eigenvalues.iter().take(LEADING).copied().collect();
    s
}

/// Eigenvalues of the linearised evolution operator at `s`.
pub fn stability_summary(s: &StateVector, p: &ModelParams, g: &Grid, tau_eig: f64) -> Result<StabilitySummary> {
    Ok(summarize(&spectrum_of(&jacobian(s, p, g))?, tau_eig))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{critical_d, Mode};
    use crate::model::linearize;

    fn homogeneous(d: f64, n: usize) -> StabilitySummary {
        let p = ModelParams::reference().with_d(d);
        let lin = linearize(&p).unwrap();
        let g = Grid::new(n, 1.0).unwrap();
        stability_summary(&StateVector::homogeneous(n, lin.u, lin.v), &p, &g, 1e-7).unwrap()
    }

    #[test]
    fn stable_above_all_critical_values() {
        let s = homogeneous(0.06, 61);
        assert_eq!(s.unstable_count, 0);
        assert!(s.leading[0].re < 0.0);
        assert_eq!(s.leading.len(), LEADING);
    }

    #[test]
    fn one_unstable_mode_between_first_two_pitchforks() {
        let p = ModelParams::reference();
        let dc1 = critical_d(&p, &Mode::new(1, 1.0)).unwrap().unwrap().d_c;
        let dc2 = critical_d(&p, &Mode::new(2, 1.0)).unwrap().unwrap().d_c;
        let s = homogeneous(0.5 * (dc1 + dc2), 101);
        assert_eq!(s.unstable_count, 1);
        assert_eq!(s.unstable_real, 1);
    }

    #[test]
    fn summary_counts() {
        let ev = [
            Complex64::new(1.0, 2.0),
            Complex64::new(1.0, -2.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(1e-9, 0.0),
            Complex64::new(-3.0, 0.0),
        ];
        let s = summarize(&ev, 1e-7);
        assert_eq!((s.unstable_count, s.unstable_real, s.unstable_complex, s.marginal), (3, 1, 2, 1));
    }
}
