//! Mode-by-mode linear stability of the coexistence state.
//!
//! For the Neumann eigenpair `(cos(kπx/ℓ), λ_k)` the perturbation grows iff
//! `det(K − λ_k D(d)) < 0`. The determinant is a quadratic `P_k(d)`, whose
//! positive root is the critical diffusion `d_c`. Solving `P_k = 0` for a
//! cross-diffusion coefficient instead gives the neutral stability curves.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{linearize, Linearization};
use crate::params::{ModelParams, TAU_REG};

/// `(kπ/ℓ)²`, the k-th eigenvalue of `−Δ` with Neumann conditions.
pub fn laplacian_eigenvalue(k: u32, ell: f64) -> f64 {
    let q = k as f64 * PI / ell;
    q * q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: u32,
    pub lambda: f64,
}

impl Mode {
    pub fn new(k: u32, ell: f64) -> Self {
        Self { k, lambda: laplacian_eigenvalue(k, ell) }
    }

    /// Wavenumber `kπ/ℓ`.
    pub fn wavenumber(&self) -> f64 {
        self.lambda.sqrt()
    }
}

/// `P_k(d) = a d² + b d + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ModeQuadratic {
    pub fn eval(&self, d: f64) -> f64 {
        (self.a * d + self.b) * d + self.c
    }

    /// `|P(d)| / max(|a d²|, |c|)`.
    pub fn scaled_residual(&self, d: f64) -> f64 {
        let scale = (self.a * d * d).abs().max(self.c.abs());
        if scale == 0.0 {
            self.eval(d).abs()
        } else {
            self.eval(d).abs() / scale
        }
    }

    /// The unique positive root, present iff `c < 0`.
    pub fn positive_root(&self) -> Option<f64> {
        if !(self.c < 0.0) || self.a <= 0.0 {
            return None;
        }
        // a > 0 and c < 0 make the discriminant exceed b², so both roots are
        // real with opposite signs. The form 2c / (−b − √disc) is the same root
        // as (−b + √disc) / 2a without the cancellation when 4ac ≪ b².
        let disc = self.b * self.b - 4.0 * self.a * self.c;
        if !(disc > 0.0) {
            return None;
        }
        let root = if self.b >= 0.0 {
            2.0 * self.c / (-self.b - disc.sqrt())
        } else {
            (-self.b + disc.sqrt()) / (2.0 * self.a)
        };
        (root > 0.0).then_some(root)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub mode: Mode,
    pub d_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Plane {
    /// Neutral curves `d12(d)` at fixed `d21`.
    D12,
    /// Neutral curves `d21(d)` at fixed `d12`.
    D21,
}

impl Plane {
    pub fn label(&self) -> &'static str {
        match self {
            Plane::D12 => "d12",
            Plane::D21 => "d21",
        }
    }

    fn apply(&self, p: &ModelParams, value: f64) -> ModelParams {
        match self {
            Plane::D12 => p.with_d12(value),
            Plane::D21 => p.with_d21(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralCurveSample {
    pub plane: Plane,
    pub k: u32,
    pub d: f64,
    /// `None` inside the asymptote gap.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublyDegeneratePoint {
    pub plane: Plane,
    pub d_hat: f64,
    pub value_hat: f64,
    pub j: u32,
    pub k: u32,
    /// Scaled residuals of `P_j` and `P_k` at the point.
    pub residuals: [f64; 2],
}

/// `M_k = K − λ_k D` at the parameters' own `d`.
pub fn char_matrix(p: &ModelParams, mode: &Mode) -> Result<Matrix2<f64>> {
    let lin = linearize(p)?;
    Ok(char_matrix_at(&lin, p, mode.lambda, p.d))
}

pub(crate) fn char_matrix_at(lin: &Linearization, p: &ModelParams, lambda: f64, d: f64) -> Matrix2<f64> {
    lin.k - lin.diffusion(p, d) * lambda
}

pub(crate) fn quadratic_from(lin: &Linearization, p: &ModelParams, lambda: f64) -> ModeQuadratic {
    let l2 = lambda * lambda;
    ModeQuadratic {
        a: l2,
        b: p.d12 * lin.v * l2 + p.d21 * lin.u * l2 - lin.tr_k * lambda,
        c: -p.d12 * lin.alpha * lambda - p.d21 * lin.beta * lambda + lin.det_k,
    }
}

pub fn mode_quadratic(p: &ModelParams, mode: &Mode) -> Result<ModeQuadratic> {
    p.require_no_self_diffusion()?;
    let lin = linearize(p)?;
    Ok(quadratic_from(&lin, p, mode.lambda))
}

/// The positive root of `P_k`, or `None` when `C_k ≥ 0`.
///
/// The root is only returned after a sign-change bracket `P(0) < 0 < P(2 d_c)`
/// is confirmed.
pub fn critical_d(p: &ModelParams, mode: &Mode) -> Result<Option<CriticalValue>> {
    let q = mode_quadratic(p, mode)?;
    let Some(d_c) = q.positive_root() else {
        return Ok(None);
    };
    if !(q.eval(0.0) < 0.0 && q.eval(2.0 * d_c) > 0.0) {
        return Ok(None);
    }
    Ok(Some(CriticalValue { mode: *mode, d_c }))
}

pub fn neutral_curve_d12(p: &ModelParams, d: f64, mode: &Mode) -> Result<Option<f64>> {
    p.require_no_self_diffusion()?;
    let lin = linearize(p)?;
    Ok(neutral_d12(&lin, p, d, mode.lambda))
}

pub fn neutral_curve_d21(p: &ModelParams, d: f64, mode: &Mode) -> Result<Option<f64>> {
    p.require_no_self_diffusion()?;
    let lin = linearize(p)?;
    Ok(neutral_d21(&lin, p, d, mode.lambda))
}

fn neutral_d12(lin: &Linearization, p: &ModelParams, d: f64, l: f64) -> Option<f64> {
    let num = l * l * d * d + p.d21 * d * lin.u * l * l - d * l * lin.tr_k - p.d21 * lin.beta * l + lin.det_k;
    let den = lin.alpha * l - d * lin.v * l * l;
    let scale = (lin.alpha * l).abs().max((d * lin.v * l * l).abs());
    (den.abs() > TAU_REG * scale).then(|| num / den)
}

fn neutral_d21(lin: &Linearization, p: &ModelParams, d: f64, l: f64) -> Option<f64> {
    let num = l * l * d * d + p.d12 * lin.v * l * l * d - d * lin.tr_k * l - p.d12 * lin.alpha * l + lin.det_k;
    let den = lin.beta * l - d * lin.u * l * l;
    let scale = (lin.beta * l).abs().max((d * lin.u * l * l).abs());
    (den.abs() > TAU_REG * scale).then(|| num / den)
}

pub(crate) fn neutral_value(lin: &Linearization, p: &ModelParams, plane: Plane, d: f64, lambda: f64) -> Option<f64> {
    match plane {
        Plane::D12 => neutral_d12(lin, p, d, lambda),
        Plane::D21 => neutral_d21(lin, p, d, lambda),
    }
}

/// Log-spaced window of standard-diffusion values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DWindow {
    pub d_min: f64,
    pub d_max: f64,
    pub samples: usize,
}

impl Default for DWindow {
    fn default() -> Self {
        Self { d_min: 1e-4, d_max: 0.1, samples: 2000 }
    }
}

impl DWindow {
    pub fn points(&self) -> Vec<f64> {
        let n = self.samples.max(2);
        let (lo, hi) = (self.d_min.ln(), self.d_max.ln());
        (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect()
    }
}

/// Neutral curves for every mode in `modes` over the window. Output is ordered
/// by mode, then by `d`.
pub fn sweep_neutral_curves(
    p: &ModelParams,
    plane: Plane,
    modes: &[u32],
    window: &DWindow,
) -> Result<Vec<NeutralCurveSample>> {
    p.require_no_self_diffusion()?;
    let lin = linearize(p)?;
    let ds = window.points();
    let out = modes
        .par_iter()
        .flat_map_iter(|&k| {
            let lambda = laplacian_eigenvalue(k, p.ell);
            let lin = &lin;
            ds.iter().map(move |&d| NeutralCurveSample {
                plane,
                k,
                d,
                value: neutral_value(lin, p, plane, d, lambda),
            })
        })
        .collect();
    Ok(out)
}

/// Intersection of the neutral curves of modes `j` and `k` in `plane`.
///
/// Brackets come from sign changes of the curve difference on the window
/// samples; brackets straddling an asymptote of either curve are skipped.
/// The first crossing with a non-negative coordinate whose residuals pass is
/// returned.
pub fn find_ddp(p: &ModelParams, modes: (u32, u32), plane: Plane, window: &DWindow) -> Result<DoublyDegeneratePoint> {
    p.require_no_self_diffusion()?;
    let (j, k) = modes;
    let no_crossing = Error::NoCrossing { j, k };
    if j == k {
        return Err(no_crossing);
    }
    let lin = linearize(p)?;
    let (lj, lk) = (laplacian_eigenvalue(j, p.ell), laplacian_eigenvalue(k, p.ell));
    let denominator = |d: f64, l: f64| match plane {
        Plane::D12 => lin.alpha * l - d * lin.v * l * l,
        Plane::D21 => lin.beta * l - d * lin.u * l * l,
    };
    let diff = |d: f64| -> Option<f64> {
        Some(neutral_value(&lin, p, plane, d, lj)? - neutral_value(&lin, p, plane, d, lk)?)
    };

    let ds = window.points();
    for w in ds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (Some(flo), Some(fhi)) = (diff(lo), diff(hi)) else { continue };
        if flo.signum() == fhi.signum() {
            continue;
        }
        let asymptote = |l: f64| denominator(lo, l).signum() != denominator(hi, l).signum();
        if asymptote(lj) || asymptote(lk) {
            continue;
        }
        let (mut a, mut b, mut fa) = (lo, hi, flo);
        // Bisect to machine precision; the resonance check downstream needs it.
        loop {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let Some(fm) = diff(m) else { break };
            if fm == 0.0 {
                (a, b) = (m, m);
                break;
            }
            if fm.signum() == fa.signum() {
                (a, fa) = (m, fm);
            } else {
                b = m;
            }
        }
        let d_hat = 0.5 * (a + b);
        let Some(value_hat) = neutral_value(&lin, p, plane, d_hat, lj) else { continue };
        if value_hat < 0.0 {
            continue;
        }
        let at = plane.apply(p, value_hat);
        let lin_at = linearize(&at)?;
        let residuals = [
            quadratic_from(&lin_at, &at, lj).scaled_residual(d_hat),
            quadratic_from(&lin_at, &at, lk).scaled_residual(d_hat),
        ];
        if residuals.iter().all(|r| *r < 1e-8) {
            return Ok(DoublyDegeneratePoint { plane, d_hat, value_hat, j, k, residuals });
        }
    }
    Err(no_crossing)
}
