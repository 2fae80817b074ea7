//! Pseudo-arclength continuation in `d` with event detection and branch switching.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, Measures, StateVector};
use super::newton::{max_abs, newton_solve, NewtonSettings};
use super::stability::{is_complex, spectrum_of, summarize, StabilitySummary};
use super::system::{d_derivative, jacobian_interleaved, residual_into};
use crate::error::{Error, Result};
use crate::model::linearize;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSettings {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub tol_newton: f64,
    pub max_iter: usize,
    /// Bisection stops once the bracket is narrower than this in `d`.
    pub tol_event: f64,
    pub tau_eig: f64,
    pub tau_neg: f64,
    /// Weight of the state block in the arclength inner product
    /// `θ/N ⟨x, y⟩ + d e`, with `N` the number of unknowns.
    pub theta: f64,
    pub max_steps: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// Initial sign of `dd/ds` for branches started from a plain state.
    pub direction: Direction,
    /// Branch-switch offset relative to `max(‖state‖∞, 1)`.
    pub switch_delta: f64,
    /// Stop after this many events.
    pub max_events: Option<usize>,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            ds0: 1e-3,
            ds_min: 1e-6,
            ds_max: 5e-3,
            tol_newton: 1e-10,
            max_iter: 25,
            tol_event: 1e-8,
            tau_eig: 1e-7,
            tau_neg: 1e-8,
            theta: 0.01,
            max_steps: 2000,
            d_min: 1e-4,
            d_max: 0.2,
            direction: Direction::Decreasing,
            switch_delta: 1e-2,
            max_events: None,
        }
    }
}

impl ContinuationSettings {
    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings { tol: self.tol_newton, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Pitchfork,
    Fold,
    Hopf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EigenInfo {
    Real { value: f64 },
    ComplexPair { re: f64, im: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPointEvent {
    pub kind: EventKind,
    pub d_at: f64,
    /// `d` at the two bracket ends; the test function differs between them.
    pub bracket: (f64, f64),
    pub eigen_info: EigenInfo,
    /// Null vector of the Jacobian for real crossings, `‖·‖∞ = 1`.
    pub kernel_vector: Option<StateVector>,
    /// Dominant cosine mode of the kernel vector.
    pub kernel_mode: Option<u32>,
    /// `|cos|` of the angle between kernel vector and branch tangent.
    pub tangent_alignment: f64,
    pub state: StateVector,
    /// The event lies between points `point_index − 1` and `point_index`.
    pub point_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub d: f64,
    pub state: StateVector,
    pub measures: Measures,
    pub unstable_count: usize,
    pub unstable_complex: usize,
    /// Some entry fell below `−τ_neg`.
    pub negative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Parent {
    Root,
    Event { branch_id: usize, event_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Termination {
    MaxSteps,
    StepCollapse { d: f64, ds: f64 },
    ParameterBound,
    LoopClosed,
    EventLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub parent: Parent,
    pub points: Vec<BranchPoint>,
    pub events: Vec<BranchPointEvent>,
    pub termination: Termination,
}

impl Branch {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &BranchPointEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSide {
    Plus,
    Minus,
}

/// Coexistence state sampled on the grid.
fn max_abs_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn homogeneous_state(p: &ModelParams, g: &Grid) -> Result<StateVector> {
    let lin = linearize(p)?;
    Ok(StateVector::homogeneous(g.n, lin.u, lin.v))
}

#[derive(Clone)]
struct Pt {
    x: Vec<f64>,
    d: f64,
}

impl Pt {
    fn axpy(&self, a: f64, t: &Pt) -> Pt {
        Pt { x: self.x.iter().zip(&t.x).map(|(x, y)| x + a * y).collect(), d: self.d + a * t.d }
    }

    fn sub(&self, o: &Pt) -> Pt {
        self.axpy(-1.0, o)
    }
}

struct Sample {
    summary: StabilitySummary,
    det_sign: f64,
}

enum Change {
    None,
    /// A real pair collided into a complex pair or back.
    Collision,
    Real,
    Hopf,
    Ambiguous,
}

struct Tracer<'a> {
    p: ModelParams,
    g: &'a Grid,
    s: &'a ContinuationSettings,
    w: f64,
}

impl<'a> Tracer<'a> {
    fn new(p: &ModelParams, g: &'a Grid, s: &'a ContinuationSettings) -> Self {
        Self { p: *p, g, s, w: s.theta / (2 * g.n) as f64 }
    }

    fn at(&self, d: f64) -> ModelParams {
        self.p.with_d(d)
    }

    fn ip(&self, a: &Pt, b: &Pt) -> f64 {
        self.w * a.x.iter().zip(&b.x).map(|(x, y)| x * y).sum::<f64>() + a.d * b.d
    }

    fn norm(&self, a: &Pt) -> f64 {
        self.ip(a, a).sqrt()
    }

    fn residual(&self, y: &Pt) -> Vec<f64> {
        let mut r = vec![0.0; y.x.len()];
        residual_into(&y.x, &self.at(y.d), self.g, &mut r);
        r
    }

    /// Dense `[[J, R_d], [row_x, row_d]]`.
    fn bordered(&self, y: &Pt, row_x: &[f64], row_d: f64) -> DMatrix<f64> {
        let n = y.x.len();
        let jac = jacobian_interleaved(&y.x, &self.at(y.d), self.g);
        let rd = d_derivative(&y.x, self.g);
        let mut a = DMatrix::zeros(n + 1, n + 1);
        let (kl, ku) = jac.bandwidths();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a[(i, j)] = jac.get(i, j);
            }
            a[(i, n)] = rd[i];
            a[(n, i)] = row_x[i];
        }
        a[(n, n)] = row_d;
        a
    }

    /// Newton on `R = 0`, `row · (y − anchor) = target`.
    fn correct(&self, guess: Pt, anchor: &Pt, row_x: &[f64], row_d: f64, target: f64) -> Option<(Pt, usize)> {
        let mut y = guess;
        let n = y.x.len();
        for it in 0..=self.s.max_iter {
            let r = self.residual(&y);
            let c = row_x.iter().zip(y.x.iter().zip(&anchor.x)).map(|(w, (a, b))| w * (a - b)).sum::<f64>()
                + row_d * (y.d - anchor.d)
                - target;
            let rn = max_abs(&r);
            if !rn.is_finite() {
                return None;
            }
            if rn < self.s.tol_newton && c.abs() < self.s.tol_newton.max(1e-14 * target.abs()) {
                return Some((y, it));
            }
            if it == self.s.max_iter {
                break;
            }
            let mut rhs = DVector::from_vec(r);
            rhs = rhs.insert_row(n, c);
            let delta = self.bordered(&y, row_x, row_d).lu().solve(&rhs)?;
            for i in 0..n {
                y.x[i] -= delta[i];
            }
            y.d -= delta[n];
        }
        None
    }

    fn arclength_row(&self, t: &Pt) -> Vec<f64> {
        t.x.iter().map(|v| self.w * v).collect()
    }

    /// Point at arclength `sigma` along the secant plane through `anchor`.
    fn step(&self, anchor: &Pt, t: &Pt, sigma: f64) -> Option<(Pt, usize)> {
        let pred = anchor.axpy(sigma, t);
        let (y, it) = self.correct(pred.clone(), anchor, &self.arclength_row(t), t.d, sigma)?;
        (self.norm(&y.sub(&pred)) <= sigma.abs().max(self.s.ds_min)).then_some((y, it))
    }

    /// Unit tangent at `y`, oriented along `reference`.
    fn tangent(&self, y: &Pt, reference: &Pt) -> Option<Pt> {
        let n = y.x.len();
        let a = self.bordered(y, &self.arclength_row(reference), reference.d);
        let mut e = DVector::zeros(n + 1);
        e[n] = 1.0;
        let sol = a.lu().solve(&e)?;
        let mut t = Pt { x: sol.rows(0, n).iter().copied().collect(), d: sol[n] };
        let norm = self.norm(&t);
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        let sign = if self.ip(&t, reference) < 0.0 { -1.0 } else { 1.0 };
        t.x.iter_mut().for_each(|v| *v *= sign / norm);
        t.d *= sign / norm;
        Some(t)
    }

    fn det_sign(&self, y: &Pt) -> f64 {
        jacobian_interleaved(&y.x, &self.at(y.d), self.g).lu().det_sign()
    }

    fn spectrum(&self, y: &Pt) -> Result<Vec<Complex64>> {
        spectrum_of(&jacobian_interleaved(&y.x, &self.at(y.d), self.g))
    }

    fn sample(&self, y: &Pt) -> Result<Sample> {
        Ok(Sample { summary: summarize(&self.spectrum(y)?, self.s.tau_eig), det_sign: self.det_sign(y) })
    }

    fn point(&self, y: &Pt, sample: &Sample) -> BranchPoint {
        let state = StateVector::from_interleaved(&y.x);
        BranchPoint {
            d: y.d,
            measures: state.measures(self.g),
            negative: state.undershoot(self.s.tau_neg).is_some(),
            state,
            unstable_count: sample.summary.unstable_count,
            unstable_complex: sample.summary.unstable_complex,
        }
    }

    fn classify(a: &Sample, b: &Sample) -> Change {
        let dr = b.summary.unstable_real as i64 - a.summary.unstable_real as i64;
        let dc = b.summary.unstable_complex as i64 - a.summary.unstable_complex as i64;
        let flip = a.det_sign != b.det_sign;
        match (flip, dr, dc) {
            (false, 0, 0) => Change::None,
            (false, r, c) if r + c == 0 => Change::Collision,
            (true, r, 0) if r.abs() == 1 => Change::Real,
            (false, 0, c) if c.abs() == 2 => Change::Hopf,
            _ => Change::Ambiguous,
        }
    }

    /// Null vector by inverse iteration.
    fn kernel(&self, y: &Pt) -> Vec<f64> {
        let jac = jacobian_interleaved(&y.x, &self.at(y.d), self.g);
        let lu = match jac.lu() {
            lu if lu.zero_pivot().is_none() => lu,
            _ => jac.shifted(1e-12 * jac.max_abs()).lu(),
        };
        let n = y.x.len();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64 / 13.0).collect();
        for _ in 0..6 {
            lu.solve_in_place(&mut v);
            let m = max_abs(&v);
            if !(m.is_finite() && m > 0.0) {
                break;
            }
            v.iter_mut().for_each(|x| *x /= m);
        }
        let pivot = v.iter().copied().find(|x| x.abs() > 1e-6).unwrap_or(1.0);
        let sign = pivot.signum();
        v.iter_mut().for_each(|x| *x *= sign);
        v
    }

    /// Bisects `σ ∈ (0, sigma)` from `anchor` until the test function's
    /// bracket is below `tol_event` in `d`.
    fn locate(&self, anchor: &Pt, t: &Pt, sigma: f64, end: &Pt, hopf: bool) -> Result<(Pt, Pt, (f64, f64))> {
        let indicator = |y: &Pt| -> Result<i64> {
            Ok(if hopf { summarize(&self.spectrum(y)?, self.s.tau_eig).unstable_complex as i64 } else { self.det_sign(y) as i64 })
        };
        let (mut s_lo, mut s_hi) = (0.0, sigma);
        let (mut lo, mut hi) = (anchor.clone(), end.clone());
        let f_lo = indicator(&lo)?;
        for _ in 0..64 {
            if (hi.d - lo.d).abs() < self.s.tol_event {
                break;
            }
            let mid = 0.5 * (s_lo + s_hi);
            let Some((y, _)) = self.step(anchor, t, mid) else { break };
            if indicator(&y)? == f_lo {
                (s_lo, lo) = (mid, y);
            } else {
                (s_hi, hi) = (mid, y);
            }
        }
        let bracket = (lo.d, hi.d);
        Ok((lo, hi, bracket))
    }

    fn event(&self, anchor: &Pt, t: &Pt, sigma: f64, end: &Pt, hopf: bool, index: usize) -> Result<BranchPointEvent> {
        let (lo, hi, bracket) = self.locate(anchor, t, sigma, end, hopf)?;
        let ev = self.spectrum(&hi)?;
        let tan = |y: &Pt| self.tangent(y, t);
        let (t_lo, t_hi) = (tan(&lo), tan(&hi));
        let d_at = 0.5 * (bracket.0 + bracket.1);
        let state = StateVector::from_interleaved(&hi.x);
        if hopf {
            let z = ev
                .iter()
                .filter(|z| is_complex(z))
                .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
                .copied()
                .unwrap_or_default();
            return Ok(BranchPointEvent {
                kind: EventKind::Hopf,
                d_at,
                bracket,
                eigen_info: EigenInfo::ComplexPair { re: z.re, im: z.im.abs() },
                kernel_vector: None,
                kernel_mode: None,
                tangent_alignment: 0.0,
                state,
                point_index: index,
            });
        }
        let z = ev
            .iter()
            .filter(|z| !is_complex(z))
            .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
            .copied()
            .unwrap_or_default();
        let phi = self.kernel(&hi);
        let turning = match (&t_lo, &t_hi) {
            (Some(a), Some(b)) => a.d.signum() != b.d.signum(),
            _ => false,
        };
        let alignment = t_hi.as_ref().map_or(0.0, |tt| {
            let dot: f64 = phi.iter().zip(&tt.x).map(|(a, b)| a * b).sum();
            let (na, nb) = (phi.iter().map(|a| a * a).sum::<f64>().sqrt(), tt.x.iter().map(|a| a * a).sum::<f64>().sqrt());
            if nb < 1e-12 * na.max(1.0) { 0.0 } else { (dot / (na * nb)).abs() }
        });
        let kernel = StateVector::from_interleaved(&phi);
        Ok(BranchPointEvent {
            kind: if turning { EventKind::Fold } else { EventKind::Pitchfork },
            d_at,
            bracket,
            eigen_info: EigenInfo::Real { value: z.re },
            kernel_mode: Some(kernel.dominant_mode(self.g)),
            kernel_vector: Some(kernel),
            tangent_alignment: alignment,
            state,
            point_index: index,
        })
    }

    fn run(
        &self,
        start: Pt,
        t0: Pt,
        id: usize,
        parent: Parent,
        targets: Vec<Pt>,
        observer: &mut dyn FnMut(&Branch),
    ) -> Result<Branch> {
        let s = self.s;
        let mut y = start;
        let mut t = t0;
        let mut prev = self.sample(&y)?;
        let mut branch = Branch { id, parent, points: vec![self.point(&y, &prev)], events: vec![], termination: Termination::MaxSteps };
        observer(&branch);
        let mut far: Vec<bool> = vec![false; targets.len()];
        let mut ds = s.ds0.clamp(s.ds_min, s.ds_max);
        let mut steps = 0;
        while steps < s.max_steps {
            let Some((y_new, iters)) = self.step(&y, &t, ds) else {
                ds *= 0.5;
                if ds < s.ds_min {
                    branch.termination = Termination::StepCollapse { d: y.d, ds };
                    break;
                }
                continue;
            };
            if y_new.d < s.d_min || y_new.d > s.d_max {
                branch.termination = Termination::ParameterBound;
                break;
            }
            let Some(t_new) = self.tangent(&y_new, &t) else {
                ds *= 0.5;
                if ds < s.ds_min {
                    branch.termination = Termination::StepCollapse { d: y.d, ds };
                    break;
                }
                continue;
            };
            let sample = self.sample(&y_new)?;
            let change = Self::classify(&prev, &sample);
            // Shrink steps that change the spectrum so that nearby events separate.
            let refine = match change {
                Change::None => false,
                Change::Ambiguous => ds * 0.5 >= s.ds_min.max(1e-3 * s.ds_max),
                _ => ds > 0.125 * s.ds_max,
            };
            if refine {
                debug!("stability change at d = {}, halving ds = {ds:e}", y_new.d);
                ds *= 0.5;
                continue;
            }
            let mut closed = false;
            let mut near = false;
            let seg = y_new.sub(&y);
            let seg_len2 = self.ip(&seg, &seg);
            for (target, far) in targets.iter().zip(&far) {
                let rel = target.sub(&y);
                let a = (self.ip(&rel, &seg) / seg_len2).clamp(0.0, 1.0);
                let dist = self.norm(&rel.axpy(-a, &seg));
                if *far && dist < 0.2 * s.ds_max {
                    near = true;
                    closed |= dist < 1e-3 * target.d.abs();
                }
            }
            // Approach a possible closure with short chords so the test is sharp.
            if near && !closed && ds > s.ds_max / 64.0 {
                ds *= 0.5;
                continue;
            }
            for (target, far) in targets.iter().zip(far.iter_mut()) {
                *far |= self.norm(&y_new.sub(target)) > 0.4 * s.ds_max;
            }
            steps += 1;
            let index = branch.points.len();
            match change {
                Change::None | Change::Collision => {}
                Change::Real => branch.events.push(self.event(&y, &t, ds, &y_new, false, index)?),
                Change::Hopf => branch.events.push(self.event(&y, &t, ds, &y_new, true, index)?),
                Change::Ambiguous => {
                    warn!("unresolved stability change near d = {}", y_new.d);
                    if prev.det_sign != sample.det_sign {
                        branch.events.push(self.event(&y, &t, ds, &y_new, false, index)?);
                    }
                    if sample.summary.unstable_complex != prev.summary.unstable_complex {
                        branch.events.push(self.event(&y, &t, ds, &y_new, true, index)?);
                    }
                }
            }
            // A branch that meets one of its own events again has closed on itself.
            let revisited = branch.events.iter().rev().take_while(|e| e.point_index == index).any(|e| {
                branch.events.iter().take_while(|o| o.point_index < index).any(|o| {
                    o.kind == e.kind
                        && (o.d_at - e.d_at).abs() <= 1e-5 * e.d_at.abs()
                        && max_abs_diff(&o.state, &e.state) <= 1e-3 * e.state.max_abs().max(1.0)
                })
            });
            if revisited {
                while branch.events.last().is_some_and(|e| e.point_index == index) {
                    branch.events.pop();
                }
                closed = true;
            }
            branch.points.push(self.point(&y_new, &sample));
            observer(&branch);
            y = y_new;
            t = t_new;
            prev = sample;
            if closed {
                branch.termination = Termination::LoopClosed;
                break;
            }
            if s.max_events.is_some_and(|m| branch.events.len() >= m) {
                branch.termination = Termination::EventLimit;
                break;
            }
            if iters <= 3 {
                ds = (ds * 1.5).min(s.ds_max);
            } else if iters >= 8 {
                ds = (ds * 0.5).max(s.ds_min);
            }
        }
        observer(&branch);
        Ok(branch)
    }
}

/// Continues the solution branch through `start` at `p.d`.
pub fn continue_branch(start: &StateVector, p: &ModelParams, g: &Grid, settings: &ContinuationSettings) -> Result<Branch> {
    continue_branch_observed(start, p, g, settings, 0, &mut |_| {})
}

/// As [`continue_branch`], calling `observer` after every accepted point.
pub fn continue_branch_observed(
    start: &StateVector,
    p: &ModelParams,
    g: &Grid,
    settings: &ContinuationSettings,
    id: usize,
    observer: &mut dyn FnMut(&Branch),
) -> Result<Branch> {
    let sol = newton_solve(start, p, g, &settings.newton())?;
    let tr = Tracer::new(p, g, settings);
    let y = Pt { x: sol.state.to_interleaved(), d: p.d };
    let dir = match settings.direction {
        Direction::Decreasing => -1.0,
        Direction::Increasing => 1.0,
    };
    let reference = Pt { x: vec![0.0; y.x.len()], d: dir };
    let t = tr.tangent(&y, &reference).ok_or(Error::SingularJacobian { column: y.x.len() })?;
    tr.run(y.clone(), t, id, Parent::Root, vec![y], observer)
}

/// Starts a new branch at a pitchfork of `parent`, seeded at
/// `state ± δ φ` with the projection on `φ` held fixed and `d` free.
pub fn branch_switch(
    parent: &Branch,
    event_index: usize,
    side: SeedSide,
    p: &ModelParams,
    g: &Grid,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    branch_switch_observed(parent, event_index, side, p, g, settings, parent.id + 1, &mut |_| {})
}

#[allow(clippy::too_many_arguments)]
pub fn branch_switch_observed(
    parent: &Branch,
    event_index: usize,
    side: SeedSide,
    p: &ModelParams,
    g: &Grid,
    settings: &ContinuationSettings,
    id: usize,
    observer: &mut dyn FnMut(&Branch),
) -> Result<Branch> {
    let event = parent
        .events
        .get(event_index)
        .ok_or_else(|| Error::InvalidParams(format!("branch {} has no event {event_index}", parent.id)))?;
    let phi = match (&event.kind, &event.kernel_vector) {
        (EventKind::Pitchfork, Some(k)) => k.to_interleaved(),
        _ => return Err(Error::InvalidParams(format!("event {event_index} is not a pitchfork with a kernel vector"))),
    };
    let tr = Tracer::new(p, g, settings);
    let base = Pt { x: event.state.to_interleaved(), d: event.d_at };
    let sign = match side {
        SeedSide::Plus => 1.0,
        SeedSide::Minus => -1.0,
    };
    let phi_pt = Pt { x: phi.clone(), d: 0.0 };
    let phi2: f64 = phi.iter().map(|v| v * v).sum();
    let delta0 = settings.switch_delta * max_abs(&base.x).max(1.0);
    for delta in [delta0, delta0 / 4.0, delta0 / 16.0] {
        let amount = sign * delta;
        let guess = base.axpy(amount, &phi_pt);
        let Some((seed, _)) = tr.correct(guess, &base, &phi, 0.0, amount * phi2) else {
            debug!("seed with delta = {delta:e} did not converge");
            continue;
        };
        let away = seed.sub(&base);
        let Some(t) = tr.tangent(&seed, &away) else { continue };
        let parent_ref = Parent::Event { branch_id: parent.id, event_index };
        let targets = vec![base, seed.clone()];
        return tr.run(seed, t, id, parent_ref, targets, observer);
    }
    Err(Error::SeedNonConvergence)
}
