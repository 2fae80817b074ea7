//! Stuart–Landau coefficients at a pitchfork on the homogeneous branch.
//!
//! Expanding `d = d_c + ε² d2` and `w = ε A(T) ρ cos(k_c x) + ε² w2 + …` gives
//! `dA/dT = σ A − L A³` with `σ = −k_c² d2`. `L > 0` is a supercritical
//! pitchfork (stable branch on the unstable side `d < d_c`), `L < 0` a
//! subcritical one.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{char_matrix_at, critical_d, neutral_value, DWindow, Mode, Plane};
use crate::model::linearize;
use crate::params::{ModelParams, TAU_REG};

/// Half-width of the marginal band around `L = 0`.
pub const TAU_L: f64 = 1e-8;
/// `|det(K − 4λD)| < NEAR_RESONANT · ‖K‖²` flags the result as unreliable.
pub const NEAR_RESONANT: f64 = 1e-6;

const KERNEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalMode {
    pub k: u32,
    pub kc: f64,
    pub lambda: f64,
    pub d_c: f64,
    /// Kernel of `K − λ D(d_c)`, first component 1.
    pub rho: Vector2<f64>,
    /// Kernel of the transpose, first component 1.
    pub psi: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCorrections {
    pub w20: Vector2<f64>,
    pub w22: Vector2<f64>,
    /// `det(K − 4λD(d_c))`, the distance to the 2k_c resonance.
    pub resonance_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pitchfork {
    Supercritical,
    Subcritical,
    Marginal,
}

impl Pitchfork {
    pub fn classify(l: f64) -> Self {
        if l > TAU_L {
            Pitchfork::Supercritical
        } else if l < -TAU_L {
            Pitchfork::Subcritical
        } else {
            Pitchfork::Marginal
        }
    }

    pub fn sign(&self) -> i8 {
        match self {
            Pitchfork::Supercritical => 1,
            Pitchfork::Subcritical => -1,
            Pitchfork::Marginal => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauResult {
    /// `σ = sigma_slope · d2`.
    pub sigma_slope: f64,
    pub l: f64,
    pub pitchfork: Pitchfork,
    pub near_resonant: bool,
    /// Projection of the cubic forcing on `cos(3 k_c x)`; does not enter `L`.
    pub g3: Vector2<f64>,
}

fn scaled_det(m: &Matrix2<f64>) -> f64 {
    let scale = (m[(0, 0)] * m[(1, 1)]).abs().max((m[(0, 1)] * m[(1, 0)]).abs());
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if scale == 0.0 {
        det.abs()
    } else {
        det.abs() / scale
    }
}

/// Solves `a + b t = 0` for `t`, or `None` when `b` is negligible against `a`.
fn ratio(a: f64, b: f64) -> Option<f64> {
    (b.abs() > TAU_REG * a.abs().max(b.abs()) && b != 0.0).then(|| -a / b)
}

/// Normalised right and left kernel vectors of `K − λ D(d_c)`.
pub fn kernel_vectors(p: &ModelParams, mode: &Mode, d_c: f64) -> Result<CriticalMode> {
    let lin = linearize(p)?;
    let m = char_matrix_at(&lin, p, mode.lambda, d_c);
    let det = scaled_det(&m);
    if det > KERNEL_TOL {
        return Err(Error::NotCritical { k: mode.k, d: d_c, det });
    }
    // Second row / column first, as in the closed form; first row / column otherwise.
    let rho_v = ratio(m[(1, 0)], m[(1, 1)])
        .or_else(|| ratio(m[(0, 0)], m[(0, 1)]))
        .ok_or(Error::DegenerateKernel)?;
    let psi_v = ratio(m[(0, 1)], m[(1, 1)])
        .or_else(|| ratio(m[(0, 0)], m[(1, 0)]))
        .ok_or(Error::DegenerateKernel)?;
    let rho = Vector2::new(1.0, rho_v);
    let psi = Vector2::new(1.0, psi_v);
    let tol = KERNEL_TOL * m.abs().max().max(1.0);
    if (m * rho).amax() > tol * rho.amax() || (m.transpose() * psi).amax() > tol * psi.amax() {
        return Err(Error::DegenerateKernel);
    }
    Ok(CriticalMode { k: mode.k, kc: mode.wavenumber(), lambda: mode.lambda, d_c, rho, psi })
}

/// Second differential of the reaction terms at any state, applied to `(x, y)`.
pub fn bilinear_qk(x: &Vector2<f64>, y: &Vector2<f64>, p: &ModelParams) -> Vector2<f64> {
    let cross = x[0] * y[1] + x[1] * y[0];
    Vector2::new(
        -2.0 * p.a1 * (x[0] * y[0]) - p.b1 * cross,
        -2.0 * p.a2 * (x[1] * y[1]) - p.b2 * cross,
    )
}

/// Quadratic part of the cross-diffusion fluxes.
pub fn bilinear_qd(x: &Vector2<f64>, y: &Vector2<f64>, p: &ModelParams) -> Vector2<f64> {
    let cross = x[0] * y[1] + x[1] * y[0];
    Vector2::new(p.d12 * cross, p.d21 * cross)
}

/// `M_i(x, y) = Q_K(x, y) − i² k_c² Q_D(x, y)`.
pub fn interaction(i: u32, x: &Vector2<f64>, y: &Vector2<f64>, p: &ModelParams, kc: f64) -> Vector2<f64> {
    let q = (i as f64 * kc).powi(2);
    bilinear_qk(x, y, p) - bilinear_qd(x, y, p) * q
}

fn solve_validated(m: &Matrix2<f64>, rhs: &Vector2<f64>) -> Option<Vector2<f64>> {
    let w = m.try_inverse()? * rhs;
    let scale = m.abs().max() * w.amax() + rhs.amax();
    ((m * w - rhs).amax() <= 1e-9 * scale.max(1e-300)).then_some(w)
}

pub fn second_order(cm: &CriticalMode, p: &ModelParams) -> Result<SecondOrderCorrections> {
    let lin = linearize(p)?;
    let m2 = char_matrix_at(&lin, p, 4.0 * cm.lambda, cm.d_c);
    let resonance_det = m2.determinant();
    if scaled_det(&m2) < TAU_REG {
        return Err(Error::Resonance { det: resonance_det });
    }
    let rhs0 = interaction(0, &cm.rho, &cm.rho, p, cm.kc) * -0.25;
    let rhs2 = interaction(2, &cm.rho, &cm.rho, p, cm.kc) * -0.25;
    let w20 = solve_validated(&lin.k, &rhs0).ok_or(Error::SingularDenominator { what: "K", value: lin.det_k })?;
    let w22 = solve_validated(&m2, &rhs2).ok_or(Error::Resonance { det: resonance_det })?;
    Ok(SecondOrderCorrections { w20, w22, resonance_det })
}

pub fn landau(cm: &CriticalMode, p: &ModelParams) -> Result<LandauResult> {
    let w2 = second_order(cm, p)?;
    let denom = cm.rho.dot(&cm.psi);
    if denom.abs() < TAU_REG * cm.rho.norm() * cm.psi.norm() {
        return Err(Error::VanishingProjection { value: denom });
    }
    let g13 = -interaction(1, &cm.rho, &w2.w20, p, cm.kc) - interaction(1, &cm.rho, &w2.w22, p, cm.kc) * 0.5;
    let g3 = interaction(3, &cm.rho, &w2.w22, p, cm.kc) * -0.5;
    let l = g13.dot(&cm.psi) / denom;
    let k_norm = linearize(p)?.k.norm();
    Ok(LandauResult {
        sigma_slope: -cm.lambda,
        l,
        pitchfork: Pitchfork::classify(l),
        near_resonant: w2.resonance_det.abs() < NEAR_RESONANT * k_norm * k_norm,
        g3,
    })
}

/// Critical mode and Landau coefficient of mode `k` at the parameters'
/// cross-diffusion values, or `None` when mode `k` never destabilises.
pub fn landau_for_mode(p: &ModelParams, k: u32) -> Result<Option<(CriticalMode, LandauResult)>> {
    let mode = Mode::new(k, p.ell);
    let Some(cv) = critical_d(p, &mode)? else {
        return Ok(None);
    };
    let cm = kernel_vectors(p, &mode, cv.d_c)?;
    Ok(Some((cm, landau(&cm, p)?)))
}

/// Uniformly spaced axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        match self.samples {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n).map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignMapGrid {
    /// Points `(d, value(d))` on the neutral curve of each mode; the other
    /// cross-diffusion coefficient stays at its template value.
    NeutralCurve { plane: Plane, window: DWindow },
    /// Cells `(d12, d21)` with `d = d_c` recomputed per cell.
    CrossDiffusion { d12: Axis, d21: Axis },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellFlag {
    Ok,
    Absent,
    NearResonant,
    Error,
}

impl CellFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellFlag::Ok => "ok",
            CellFlag::Absent => "absent",
            CellFlag::NearResonant => "near-resonant",
            CellFlag::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignMapCell {
    /// `d` for neutral-curve grids, `d12` for cross-diffusion grids.
    pub x: f64,
    /// The curve value for neutral-curve grids, `d21` for cross-diffusion grids.
    pub y: f64,
    pub k: u32,
    pub d_c: Option<f64>,
    pub l: Option<f64>,
    pub sign: i8,
    pub flag: CellFlag,
    pub message: Option<String>,
}

impl SignMapCell {
    fn new(x: f64, y: f64, k: u32) -> Self {
        Self { x, y, k, d_c: None, l: None, sign: 0, flag: CellFlag::Absent, message: None }
    }

    fn fill(mut self, outcome: Result<Option<(CriticalMode, LandauResult)>>) -> Self {
        match outcome {
            Ok(None) => {}
            Ok(Some((cm, r))) => {
                self.d_c = Some(cm.d_c);
                self.l = Some(r.l);
                self.sign = r.pitchfork.sign();
                self.flag = if r.near_resonant { CellFlag::NearResonant } else { CellFlag::Ok };
            }
            Err(Error::Resonance { det }) => {
                self.flag = CellFlag::NearResonant;
                self.message = Some(format!("resonant: det = {det:e}"));
            }
            Err(e) => {
                self.flag = CellFlag::Error;
                self.message = Some(e.to_string());
            }
        }
        self
    }
}

/// Sign of `L` over a grid. Cells are ordered by mode, then by grid index
/// (`d12` outer, `d21` inner for cross-diffusion grids); per-cell failures are
/// recorded in the cell.
pub fn landau_sign_map(template: &ModelParams, grid: &SignMapGrid, modes: &[u32]) -> Vec<SignMapCell> {
    let jobs: Vec<(u32, f64, f64)> = match grid {
        SignMapGrid::NeutralCurve { window, .. } => {
            let ds = window.points();
            modes.iter().flat_map(|&k| ds.iter().map(move |&d| (k, d, f64::NAN))).collect()
        }
        SignMapGrid::CrossDiffusion { d12, d21 } => {
            let (xs, ys) = (d12.points(), d21.points());
            let mut jobs = Vec::with_capacity(modes.len() * xs.len() * ys.len());
            for &k in modes {
                for &x in &xs {
                    jobs.extend(ys.iter().map(|&y| (k, x, y)));
                }
            }
            jobs
        }
    };
    jobs.into_par_iter()
        .map(|(k, x, y)| match grid {
            SignMapGrid::NeutralCurve { plane, .. } => curve_cell(template, *plane, k, x),
            SignMapGrid::CrossDiffusion { .. } => {
                SignMapCell::new(x, y, k).fill(landau_for_mode(&template.with_d12(x).with_d21(y), k))
            }
        })
        .collect()
}

fn curve_cell(template: &ModelParams, plane: Plane, k: u32, d: f64) -> SignMapCell {
    let lambda = crate::linear::laplacian_eigenvalue(k, template.ell);
    let value = match linearize(template) {
        Ok(lin) => neutral_value(&lin, template, plane, d, lambda),
        Err(e) => return SignMapCell::new(d, f64::NAN, k).fill(Err(e)),
    };
    let Some(value) = value.filter(|v| *v >= 0.0) else {
        return SignMapCell::new(d, value.unwrap_or(f64::NAN), k);
    };
    let p = match plane {
        Plane::D12 => template.with_d12(value),
        Plane::D21 => template.with_d21(value),
    };
    let cell = SignMapCell::new(d, value, k);
    let outcome = kernel_vectors(&p, &Mode::new(k, p.ell), d)
        .and_then(|cm| Ok(Some((cm, landau(&cm, &p)?))));
    cell.fill(outcome)
}

/// CSV rendering with header `x,y,k,d_c,L,sign,flag`; reals carry 17
/// significant digits and missing values are empty fields.
pub fn sign_map_csv(cells: &[SignMapCell], x_name: &str, y_name: &str) -> String {
    let real = |v: Option<f64>| v.filter(|x| x.is_finite()).map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut out = format!("{x_name},{y_name},k,d_c,L,sign,flag\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            real(Some(c.x)),
            real(Some(c.y)),
            c.k,
            real(c.d_c),
            real(c.l),
            c.sign,
            c.flag.as_str()
        ));
    }
    out
}
