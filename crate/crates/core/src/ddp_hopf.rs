//! Quadratic center-manifold coefficients at the (1, 2) doubly degenerate point
//! and the necessary condition `A1 B1 < 0` for a Hopf instability.
//!
//! At the DDP both `M_1` and `M_2` are singular. `T_k` has columns
//! `(M12, −M11)` (kernel) and `(M11, M21)` (eigenvector of `tr M_k`), so that
//! `M_k T_k = T_k diag(0, tr M_k)`. Writing the mode-k Fourier amplitudes as
//! `T_k (x_k, y_k)` and restricting to the centre directions gives
//! `x1' = μ1 x1 + A1 x1 x2 + …`, `x2' = μ2 x2 + B1 x1² + …`.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landau::{landau_for_mode, Axis};
use crate::linear::{char_matrix_at, find_ddp, DWindow, DoublyDegeneratePoint, Plane};
use crate::model::linearize;
use crate::params::{ModelParams, TAU_REG};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdpFrame {
    pub ddp: DoublyDegeneratePoint,
    pub m1: Matrix2<f64>,
    pub m2: Matrix2<f64>,
    pub t1: Matrix2<f64>,
    pub t2: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCoeffs {
    pub f11: f64,
    pub g11: f64,
    pub f12: f64,
    pub g12: f64,
}

/// Which frame supplies the off-diagonal entry in `B1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum B1Reading {
    /// `(T²22 f12 − T²12 g12) / det T2`.
    #[default]
    ModeTwo,
    /// `(T²22 f12 − T¹12 g12) / det T2`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfNecessity {
    pub a1: f64,
    pub b1: f64,
    pub product: f64,
    pub satisfied: bool,
}

pub fn diagonalizer(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 1)], m[(0, 0)], -m[(0, 0)], m[(1, 0)])
}

/// `‖M T − T diag(0, tr M)‖ / ‖M‖`, max norms.
pub fn diagonalization_residual(m: &Matrix2<f64>, t: &Matrix2<f64>) -> f64 {
    let diag = Matrix2::new(0.0, 0.0, 0.0, m.trace());
    (m * t - t * diag).amax() / m.amax().max(f64::MIN_POSITIVE)
}

/// Frame at the (1, 2) crossing in the `(d, d12)` plane, `d21` held from `p`.
pub fn ddp_frame(p: &ModelParams) -> Result<DdpFrame> {
    ddp_frame_in(p, Plane::D12)
}

/// As [`ddp_frame`] with the crossing located in either cross-diffusion plane.
pub fn ddp_frame_in(p: &ModelParams, plane: Plane) -> Result<DdpFrame> {
    let ddp = find_ddp(p, (1, 2), plane, &DWindow::default())?;
    let at = match plane {
        Plane::D12 => p.with_d12(ddp.value_hat),
        Plane::D21 => p.with_d21(ddp.value_hat),
    };
    let lin = linearize(&at)?;
    let lambda = |k: u32| crate::linear::laplacian_eigenvalue(k, at.ell);
    let m1 = char_matrix_at(&lin, &at, lambda(1), ddp.d_hat);
    let m2 = char_matrix_at(&lin, &at, lambda(2), ddp.d_hat);
    let (t1, t2) = (diagonalizer(&m1), diagonalizer(&m2));
    for (k, t) in [(1, &t1), (2, &t2)] {
        let det = t.determinant();
        if det.abs() < TAU_REG * t.amax() * t.amax() {
            return Err(Error::SingularFrame { k, det });
        }
    }
    Ok(DdpFrame { ddp, m1, m2, t1, t2 })
}

/// Parameters at the frame's DDP.
pub fn frame_params(frame: &DdpFrame, p: &ModelParams) -> ModelParams {
    match frame.ddp.plane {
        Plane::D12 => p.with_d12(frame.ddp.value_hat),
        Plane::D21 => p.with_d21(frame.ddp.value_hat),
    }
    .with_d(frame.ddp.d_hat)
}

pub fn quad_coeffs(frame: &DdpFrame, p: &ModelParams) -> QuadCoeffs {
    let q = frame_params(frame, p);
    let (t1, t2) = (&frame.t1, &frame.t2);
    let l1 = crate::linear::laplacian_eigenvalue(1, q.ell);
    let l2 = crate::linear::laplacian_eigenvalue(2, q.ell);
    let mixed = t1[(0, 0)] * t2[(1, 0)] + t2[(0, 0)] * t1[(1, 0)];
    QuadCoeffs {
        f11: -2.0 * q.a1 * t1[(0, 0)] * t2[(0, 0)] - (q.d12 * l1 + q.b1) * mixed,
        g11: -2.0 * q.a2 * t1[(1, 0)] * t2[(1, 0)] - (q.d21 * l1 + q.b2) * mixed,
        f12: -q.a1 * t1[(0, 0)].powi(2) - (q.d12 * l2 + q.b1) * t1[(0, 0)] * t1[(1, 0)],
        g12: -q.a2 * t1[(1, 0)].powi(2) - (q.d21 * l2 + q.b2) * t1[(0, 0)] * t1[(1, 0)],
    }
}

pub fn necessity_from(frame: &DdpFrame, c: &QuadCoeffs, reading: B1Reading) -> HopfNecessity {
    let (t1, t2) = (&frame.t1, &frame.t2);
    let a1 = (t1[(1, 1)] * c.f11 - t1[(0, 1)] * c.g11) / t1.determinant();
    let off = match reading {
        B1Reading::ModeTwo => t2[(0, 1)],
        B1Reading::Literal => t1[(0, 1)],
    };
    let b1 = (t2[(1, 1)] * c.f12 - off * c.g12) / t2.determinant();
    let product = a1 * b1;
    HopfNecessity { a1, b1, product, satisfied: product < 0.0 }
}

pub fn hopf_necessary(p: &ModelParams, reading: B1Reading) -> Result<HopfNecessity> {
    let frame = ddp_frame(p)?;
    Ok(necessity_from(&frame, &quad_coeffs(&frame, p), reading))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepFlag {
    Ok,
    Absent,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfSweepRecord {
    pub d21: f64,
    pub d_hat: Option<f64>,
    pub d12_hat: Option<f64>,
    pub necessity: Option<HopfNecessity>,
    pub flag: SweepFlag,
}

/// A `satisfied` transition between two consecutive valid samples, refined
/// by bisection on the sign of `A1 B1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from_satisfied: bool,
    pub bracket: (f64, f64),
    pub refined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfSweep {
    pub records: Vec<HopfSweepRecord>,
    pub transitions: Vec<Transition>,
}

fn record(template: &ModelParams, d21: f64, reading: B1Reading) -> HopfSweepRecord {
    let p = template.with_d21(d21);
    let mut r = HopfSweepRecord { d21, d_hat: None, d12_hat: None, necessity: None, flag: SweepFlag::Ok };
    match ddp_frame(&p) {
        Ok(frame) => {
            r.d_hat = Some(frame.ddp.d_hat);
            r.d12_hat = Some(frame.ddp.value_hat);
            r.necessity = Some(necessity_from(&frame, &quad_coeffs(&frame, &p), reading));
        }
        Err(Error::NoCrossing { .. }) => r.flag = SweepFlag::Absent,
        Err(_) => r.flag = SweepFlag::Error,
    }
    r
}

/// Evaluates the condition along `d21` and refines every change of
/// `satisfied` between neighbouring valid samples.
pub fn hopf_necessity_sweep(template: &ModelParams, d21: &Axis, reading: B1Reading) -> HopfSweep {
    let records: Vec<HopfSweepRecord> =
        d21.points().into_par_iter().map(|x| record(template, x, reading)).collect();
    let valid: Vec<(f64, bool)> = records
        .iter()
        .filter_map(|r| r.necessity.map(|n| (r.d21, n.satisfied)))
        .collect();
    let transitions = valid
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| {
            let (mut lo, mut hi) = (w[0].0, w[1].0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match record(template, mid, reading).necessity {
                    Some(n) if n.satisfied == w[0].1 => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            Transition { from_satisfied: w[0].1, bracket: (w[0].0, w[1].0), refined: 0.5 * (lo + hi) }
        })
        .collect();
    HopfSweep { records, transitions }
}

/// CSV with header `d21,d_hat,d12_hat,A1,B1,product,satisfied,flag`.
pub fn sweep_csv(sweep: &HopfSweep) -> String {
    let real = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut out = String::from("d21,d_hat,d12_hat,A1,B1,product,satisfied,flag\n");
    for r in &sweep.records {
        let n = r.necessity;
        let flag = match r.flag {
            SweepFlag::Ok => "ok",
            SweepFlag::Absent => "absent",
            SweepFlag::Error => "error",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            real(Some(r.d21)),
            real(r.d_hat),
            real(r.d12_hat),
            real(n.map(|n| n.a1)),
            real(n.map(|n| n.b1)),
            real(n.map(|n| n.product)),
            n.map(|n| n.satisfied.to_string()).unwrap_or_default(),
            flag
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeSide {
    Below,
    Above,
    Both,
    Neither,
}

/// Which side of `d̂12` carries `L(λ1) < 0` on the mode-1 neutral curve, probed
/// at `d̂12 (1 ± offset)`.
pub fn negative_landau_side(p: &ModelParams, offset: f64) -> Result<NegativeSide> {
    let frame = ddp_frame(p)?;
    let d12 = frame.ddp.value_hat;
    let negative = |value: f64| -> Result<bool> {
        Ok(landau_for_mode(&p.with_d12(value), 1)?.is_some_and(|(_, r)| r.l < 0.0))
    };
    Ok(match (negative(d12 * (1.0 - offset))?, negative(d12 * (1.0 + offset))?) {
        (true, true) => NegativeSide::Both,
        (true, false) => NegativeSide::Below,
        (false, true) => NegativeSide::Above,
        (false, false) => NegativeSide::Neither,
    })
}
