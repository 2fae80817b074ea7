//! Homogeneous equilibria, competition regime and the 2×2 linearisation.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, TAU_REG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    Extinction,
    SemitrivialU,
    SemitrivialV,
    Coexistence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Weak,
    Strong,
    /// An ordering holds with equality, or the orderings are mixed.
    Degenerate(DegenerateReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegenerateReason {
    Equality,
    MixedOrdering,
}

/// Reaction Jacobian at the coexistence state plus the derived scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub u: f64,
    pub v: f64,
    pub k: Matrix2<f64>,
    pub tr_k: f64,
    pub det_k: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn coexistence_equilibrium(p: &ModelParams) -> Result<Equilibrium> {
    let den = p.competition_determinant();
    let scale = (p.a1 * p.a2).abs().max((p.b1 * p.b2).abs());
    if den.abs() <= TAU_REG * scale || den == 0.0 {
        return Err(Error::SingularDenominator { what: "a1*a2 - b1*b2", value: den });
    }
    Ok(Equilibrium {
        kind: EquilibriumKind::Coexistence,
        u: (p.r1 * p.a2 - p.r2 * p.b1) / den,
        v: (p.r2 * p.a1 - p.r1 * p.b2) / den,
    })
}

/// All homogeneous steady states. The coexistence state is omitted when its
/// denominator vanishes; it is included even if it is not positive.
pub fn homogeneous_equilibria(p: &ModelParams) -> Vec<Equilibrium> {
    let mut out = vec![
        Equilibrium { kind: EquilibriumKind::Extinction, u: 0.0, v: 0.0 },
        Equilibrium { kind: EquilibriumKind::SemitrivialU, u: p.r1 / p.a1, v: 0.0 },
        Equilibrium { kind: EquilibriumKind::SemitrivialV, u: 0.0, v: p.r2 / p.a2 },
    ];
    if let Ok(eq) = coexistence_equilibrium(p) {
        out.push(eq);
    }
    out
}

fn ordering(lhs: f64, rhs: f64) -> Option<std::cmp::Ordering> {
    if lhs.is_infinite() && rhs.is_infinite() && lhs.signum() == rhs.signum() {
        return None;
    }
    if lhs.is_infinite() || rhs.is_infinite() {
        return lhs.partial_cmp(&rhs);
    }
    let scale = lhs.abs().max(rhs.abs());
    if (lhs - rhs).abs() <= TAU_REG * scale {
        None
    } else {
        lhs.partial_cmp(&rhs)
    }
}

/// Weak competition iff `b1/a2 < r1/r2 < a1/b2`, strong iff both reversed.
pub fn classify_regime(p: &ModelParams) -> Regime {
    use std::cmp::Ordering::{Greater, Less};
    let low = p.b1 / p.a2;
    let mid = p.r1 / p.r2;
    let high = if p.b2 == 0.0 { f64::INFINITY } else { p.a1 / p.b2 };
    match (ordering(low, mid), ordering(mid, high)) {
        (Some(Less), Some(Less)) => Regime::Weak,
        (Some(Greater), Some(Greater)) => Regime::Strong,
        (None, _) | (_, None) => Regime::Degenerate(DegenerateReason::Equality),
        _ => Regime::Degenerate(DegenerateReason::MixedOrdering),
    }
}

pub fn linearize(p: &ModelParams) -> Result<Linearization> {
    let eq = coexistence_equilibrium(p)?;
    let (u, v) = (eq.u, eq.v);
    if !(u > 0.0 && v > 0.0) {
        return Err(Error::NoCoexistence { u, v });
    }
    let k = Matrix2::new(-p.a1 * u, -p.b1 * u, -p.b2 * v, -p.a2 * v);
    Ok(Linearization {
        u,
        v,
        k,
        tr_k: k.trace(),
        det_k: k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)],
        alpha: (p.b2 * u - p.a2 * v) * v,
        beta: (p.b1 * v - p.a1 * u) * u,
    })
}

impl Linearization {
    /// Linearised diffusion matrix at standard diffusion `d`.
    pub fn diffusion(&self, p: &ModelParams, d: f64) -> Matrix2<f64> {
        let (u, v) = (self.u, self.v);
        Matrix2::new(
            d + 2.0 * p.d11 * u + p.d12 * v,
            p.d12 * u,
            p.d21 * v,
            d + 2.0 * p.d22 * v + p.d21 * u,
        )
    }
}

/// `D` at the parameters' own `d`. Self-diffusion enters through the `2 d11 u`
/// and `2 d22 v` diagonal terms and vanishes in the standing `d11 = d22 = 0` case.
pub fn diffusion_matrix(p: &ModelParams) -> Result<Matrix2<f64>> {
    Ok(linearize(p)?.diffusion(p, p.d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reaction(p: &ModelParams, u: f64, v: f64) -> (f64, f64) {
        ((p.r1 - p.a1 * u - p.b1 * v) * u, (p.r2 - p.b2 * u - p.a2 * v) * v)
    }

    #[test]
    fn reference_coexistence_state() {
        let eq = coexistence_equilibrium(&ModelParams::reference()).unwrap();
        assert_relative_eq!(eq.u, 1.625, epsilon = 1e-15);
        assert_relative_eq!(eq.v, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn coexistence_matches_brute_force_root_scan() {
        // Scan the nullcline intersection of the kinetics on a grid, then polish.
        let p = ModelParams::reference();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 1..400 {
            for j in 1..400 {
                let (u, v) = (i as f64 * 0.005, j as f64 * 0.005);
                let (f, g) = reaction(&p, u, v);
                let r = (f / u).abs() + (g / v).abs();
                if r < best.0 {
                    best = (r, u, v);
                }
            }
        }
        assert!((best.1 - 1.625).abs() < 0.01 && (best.2 - 0.125).abs() < 0.01);
    }

    #[test]
    fn decoupled_logistic() {
        let mut p = ModelParams::reference();
        (p.r1, p.r2, p.a1, p.a2, p.b1, p.b2) = (1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        let eq = coexistence_equilibrium(&p).unwrap();
        assert_eq!((eq.u, eq.v), (1.0, 1.0));
    }

    #[test]
    fn singular_denominator() {
        let mut p = ModelParams::reference();
        (p.a1, p.a2, p.b1, p.b2) = (2.0, 3.0, 2.0, 3.0);
        assert!(matches!(coexistence_equilibrium(&p), Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&ModelParams::reference()), Regime::Weak);
        let mut p = ModelParams::reference();
        (p.r1, p.r2, p.a1, p.a2, p.b1, p.b2) = (1.0, 1.0, 1.0, 1.0, 2.0, 2.0);
        assert_eq!(classify_regime(&p), Regime::Strong);
        (p.b1, p.b2) = (1.0, 1.0);
        assert_eq!(classify_regime(&p), Regime::Degenerate(DegenerateReason::Equality));
        (p.b1, p.b2) = (2.0, 0.5);
        assert_eq!(classify_regime(&p), Regime::Degenerate(DegenerateReason::MixedOrdering));
    }

    #[test]
    fn reference_linearization() {
        let lin = linearize(&ModelParams::reference()).unwrap();
        assert_relative_eq!(lin.alpha, 0.15625, epsilon = 1e-14);
        assert_relative_eq!(lin.beta, -7.71875, epsilon = 1e-14);
        assert_relative_eq!(lin.tr_k, -5.25, epsilon = 1e-14);
        assert_relative_eq!(lin.det_k, 1.625, epsilon = 1e-14);
        assert_relative_eq!(lin.det_k, 8.0 * lin.u * lin.v, epsilon = 1e-14);
    }

    #[test]
    fn no_interspecific_terms() {
        let mut p = ModelParams::reference();
        (p.b1, p.b2) = (0.0, 0.0);
        let lin = linearize(&p).unwrap();
        assert_relative_eq!(lin.alpha, -p.a2 * lin.v * lin.v);
        assert_relative_eq!(lin.beta, -p.a1 * lin.u * lin.u);
    }

    #[test]
    fn diffusion_matrices() {
        let p = ModelParams::reference().with_d(1.0).with_d12(0.0);
        assert_eq!(diffusion_matrix(&p).unwrap(), Matrix2::identity());
        let p = ModelParams::reference().with_d(1.0);
        let dm = diffusion_matrix(&p).unwrap();
        assert_relative_eq!(dm, Matrix2::new(1.375, 4.875, 0.0, 1.0), epsilon = 1e-14);
    }

    fn weak_params() -> impl Strategy<Value = ModelParams> {
        // Sample b1/a2 < r1/r2 < a1/b2 directly.
        (0.5..5.0f64, 0.5..5.0f64, 0.5..5.0f64, 0.5..5.0f64, 0.05..0.95f64, 0.05..0.95f64, 0.0..5.0f64, 0.0..0.1f64, 1e-3..1.0f64)
            .prop_map(|(r2, a1, a2, b2, s, t, d12, d21, d)| {
                let high = a1 / b2;
                let mid = high * (0.05 + 0.9 * s);
                let b1 = mid * a2 * t;
                ModelParams { r1: mid * r2, r2, a1, a2, b1, b2, d, d11: 0.0, d22: 0.0, d12, d21, ell: 1.0 }
            })
    }

    proptest! {
        #[test]
        fn weak_regime_kinetics_are_stable(p in weak_params()) {
            prop_assert_eq!(classify_regime(&p), Regime::Weak);
            let lin = linearize(&p).unwrap();
            prop_assert!(lin.tr_k < 0.0);
            prop_assert!(lin.det_k > 0.0);
            let expected = p.competition_determinant() * lin.u * lin.v;
            prop_assert!((lin.det_k - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        }

        #[test]
        fn coexistence_zeroes_reaction(p in weak_params()) {
            let eq = coexistence_equilibrium(&p).unwrap();
            let (f, g) = reaction(&p, eq.u, eq.v);
            prop_assert!(f.abs() <= 1e-12 * (p.r1 * eq.u).abs());
            prop_assert!(g.abs() <= 1e-12 * (p.r2 * eq.v).abs());
        }

        #[test]
        fn tiny_perturbations_keep_regime(p in weak_params(), eps in -1.0..1.0f64) {
            let mut q = p;
            q.r1 *= 1.0 + eps * TAU_REG / 10.0;
            prop_assert_ne!(classify_regime(&q), Regime::Strong);
        }

        #[test]
        fn diffusion_diagonal_has_unit_slope_in_d(p in weak_params(), shift in 0.0..1.0f64) {
            let lin = linearize(&p).unwrap();
            let delta = lin.diffusion(&p, p.d + shift) - lin.diffusion(&p, p.d);
            prop_assert!((delta - Matrix2::identity() * shift).abs().max() < 1e-12);
        }
    }
}
