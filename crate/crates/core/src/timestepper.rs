//! Implicit Euler integration of the full quasilinear system and asymptotic verdicts.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::grid::{Grid, StateVector};
use crate::continuation::newton::max_abs;
use crate::continuation::system::{jacobian_interleaved, residual_into};
use crate::error::{Error, Result};
use crate::landau::kernel_vectors;
use crate::linear::{critical_d, Mode};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSettings {
    pub horizon: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Keep a snapshot every this many accepted steps (0 keeps none).
    pub save_every: usize,
    pub tol_newton: f64,
    pub max_iter: usize,
    /// `‖s‖∞` above this is a blowup.
    pub blowup_cap: f64,
    pub steady_residual: f64,
    pub steady_amplitude: f64,
    /// Number of trailing steps over which the steady amplitude is measured.
    pub window: usize,
    pub min_maxima: usize,
    /// Relative spread allowed in periods and amplitudes of a periodic verdict.
    pub periodic_dispersion: f64,
    /// Stop as soon as the steady test passes.
    pub stop_when_steady: bool,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            horizon: 1e4,
            dt0: 1e-2,
            dt_min: 1e-8,
            dt_max: 1.0,
            save_every: 0,
            tol_newton: 1e-10,
            max_iter: 25,
            blowup_cap: 1e6,
            steady_residual: 1e-8,
            steady_amplitude: 1e-9,
            window: 50,
            min_maxima: 5,
            periodic_dispersion: 0.02,
            stop_when_steady: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Times of the measure series, strictly increasing from 0.
    pub times: Vec<f64>,
    pub v0: Vec<f64>,
    pub u_l2: Vec<f64>,
    pub v_l2: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<StateVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Steady,
    Periodic,
    Drifting,
    Blowup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub verdict: Verdict,
    pub final_time: f64,
    /// Last state; the limit when the verdict is steady.
    pub final_state: StateVector,
    /// `‖R(final_state)‖∞`.
    pub residual: f64,
    /// Peak-to-peak of `v(0, t)` over the last window of steps.
    pub amplitude: f64,
    /// Successive maxima of `v(0, t)` in the second half of the run.
    pub maxima: usize,
    pub period: Option<f64>,
    pub period_dispersion: Option<f64>,
    pub amplitude_dispersion: Option<f64>,
}

/// Fresh Newton iterations of `y − dt R(y) = s`.
fn implicit_euler(x: &[f64], dt: f64, p: &ModelParams, g: &Grid, tol: f64, max_iter: usize) -> Option<(Vec<f64>, usize)> {
    let mut y = x.to_vec();
    let mut r = vec![0.0; x.len()];
    let scale = max_abs(x).max(1.0);
    for it in 0..=max_iter {
        residual_into(&y, p, g, &mut r);
        let f: Vec<f64> = y.iter().zip(x).zip(&r).map(|((yi, xi), ri)| yi - xi - dt * ri).collect();
        let norm = max_abs(&f);
        if !norm.is_finite() {
            return None;
        }
        if norm < tol * scale && it > 0 {
            return Some((y, it));
        }
        if it == max_iter {
            break;
        }
        let lu = jacobian_interleaved(&y, p, g).scaled(-dt).shifted(1.0).lu();
        if lu.zero_pivot().is_some() {
            return None;
        }
        let mut delta = f;
        lu.solve_in_place(&mut delta);
        y.iter_mut().zip(&delta).for_each(|(yi, di)| *yi -= di);
    }
    None
}

/// One implicit Euler step.
pub fn step(s: &StateVector, dt: f64, p: &ModelParams, g: &Grid, settings: &EvolveSettings) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    if s.len() != g.n || s.v.len() != g.n {
        return Err(Error::Dimension { expected: g.n, got: s.len() });
    }
    let x = s.to_interleaved();
    implicit_euler(&x, dt, p, g, settings.tol_newton, settings.max_iter)
        .map(|(y, _)| StateVector::from_interleaved(&y))
        .ok_or(Error::NonConvergence { iterations: settings.max_iter, residual: f64::NAN })
}

/// Vertex time and value of the parabola through three samples.
fn parabola_peak(t: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    let (s1, s2) = ((y[1] - y[0]) / h1, (y[2] - y[1]) / h2);
    let a = (s2 - s1) / (h1 + h2);
    if a >= 0.0 {
        return (t[1], y[1]);
    }
    // y = y1 + b (τ − t1) + a (τ − t1)², b from the central slope
    let b = (s1 * h2 + s2 * h1) / (h1 + h2);
    let tau = -b / (2.0 * a);
    (t[1] + tau, y[1] + b * tau + a * tau * tau)
}

fn relative_spread(xs: &[f64]) -> f64 {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (hi - lo) / mean.abs()
}

struct Oscillation {
    maxima: usize,
    period: Option<f64>,
    period_dispersion: Option<f64>,
    amplitude_dispersion: Option<f64>,
}

fn oscillation(times: &[f64], v: &[f64], min_maxima: usize) -> Oscillation {
    let start = times.partition_point(|t| *t < 0.5 * times.last().copied().unwrap_or(0.0));
    let (t, v) = (&times[start..], &v[start..]);
    let mut peaks = Vec::new();
    let mut troughs = Vec::new();
    for i in 1..t.len().saturating_sub(1) {
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        if b > a && b >= c {
            peaks.push(parabola_peak([t[i - 1], t[i], t[i + 1]], [a, b, c]));
        } else if b < a && b <= c {
            let (tt, y) = parabola_peak([t[i - 1], t[i], t[i + 1]], [-a, -b, -c]);
            troughs.push((tt, -y));
        }
    }
    let mut out = Oscillation { maxima: peaks.len(), period: None, period_dispersion: None, amplitude_dispersion: None };
    if peaks.len() < min_maxima.max(2) {
        return out;
    }
    let periods: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    // peak minus the trough that follows it
    let amplitudes: Vec<f64> = peaks
        .iter()
        .filter_map(|(tp, yp)| troughs.iter().find(|(tt, _)| tt > tp).map(|(_, yt)| yp - yt))
        .collect();
    out.period = Some(periods.iter().sum::<f64>() / periods.len() as f64);
    out.period_dispersion = Some(relative_spread(&periods));
    out.amplitude_dispersion = (!amplitudes.is_empty()).then(|| relative_spread(&amplitudes));
    out
}

/// Adaptive-step implicit Euler from `s0` up to `settings.horizon`.
pub fn evolve(s0: &StateVector, p: &ModelParams, g: &Grid, settings: &EvolveSettings) -> Result<(Trajectory, AsymptoticsReport)> {
    if s0.len() != g.n || s0.v.len() != g.n {
        return Err(Error::Dimension { expected: g.n, got: s0.len() });
    }
    if !s0.is_finite() {
        return Err(Error::InvalidParams("initial state is not finite".into()));
    }
    let mut x = s0.to_interleaved();
    let mut traj = Trajectory::default();
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        let s = StateVector::from_interleaved(x);
        let m = s.measures(g);
        traj.times.push(t);
        traj.v0.push(m.v0);
        traj.u_l2.push(m.u_l2);
        traj.v_l2.push(m.v_l2);
    };
    record(&mut traj, 0.0, &x);
    if settings.save_every > 0 {
        traj.snapshot_times.push(0.0);
        traj.snapshots.push(s0.clone());
    }
    let mut r = vec![0.0; x.len()];
    let mut t = 0.0;
    let mut dt = settings.dt0.clamp(settings.dt_min, settings.dt_max);
    let mut steps = 0usize;
    let mut blowup = false;
    while t < settings.horizon {
        let h = dt.min(settings.horizon - t);
        let Some((y, iters)) = implicit_euler(&x, h, p, g, settings.tol_newton, settings.max_iter) else {
            if max_abs(&x) > settings.blowup_cap {
                blowup = true;
                break;
            }
            dt *= 0.5;
            if dt < settings.dt_min {
                return Err(Error::StepCollapse { d: p.d, ds: dt });
            }
            debug!("implicit Euler failed at t = {t}, dt -> {dt:e}");
            continue;
        };
        x = y;
        t += h;
        steps += 1;
        record(&mut traj, t, &x);
        if settings.save_every > 0 && steps % settings.save_every == 0 {
            traj.snapshot_times.push(t);
            traj.snapshots.push(StateVector::from_interleaved(&x));
        }
        if !(max_abs(&x) <= settings.blowup_cap) {
            blowup = true;
            break;
        }
        if iters <= 3 {
            dt = (dt * 1.25).min(settings.dt_max);
        } else if iters >= 8 {
            dt = (dt * 0.5).max(settings.dt_min);
        }
        if settings.stop_when_steady && steps % 10 == 0 && steps >= settings.window {
            residual_into(&x, p, g, &mut r);
            if max_abs(&r) < settings.steady_residual && window_amplitude(&traj.v0, settings.window) < settings.steady_amplitude {
                break;
            }
        }
    }
    let final_state = StateVector::from_interleaved(&x);
    residual_into(&x, p, g, &mut r);
    let residual = max_abs(&r);
    let amplitude = window_amplitude(&traj.v0, settings.window);
    let osc = oscillation(&traj.times, &traj.v0, settings.min_maxima);
    let verdict = if blowup || !final_state.is_finite() {
        Verdict::Blowup
    } else if residual < settings.steady_residual && amplitude < settings.steady_amplitude {
        Verdict::Steady
    } else if osc.maxima >= settings.min_maxima
        && osc.period_dispersion.is_some_and(|x| x < settings.periodic_dispersion)
        && osc.amplitude_dispersion.is_some_and(|x| x < settings.periodic_dispersion)
    {
        Verdict::Periodic
    } else {
        Verdict::Drifting
    };
    let report = AsymptoticsReport {
        verdict,
        final_time: t,
        final_state,
        residual,
        amplitude,
        maxima: osc.maxima,
        period: osc.period,
        period_dispersion: osc.period_dispersion,
        amplitude_dispersion: osc.amplitude_dispersion,
    };
    Ok((traj, report))
}

fn window_amplitude(v: &[f64], window: usize) -> f64 {
    let tail = &v[v.len().saturating_sub(window.max(1))..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    hi - lo
}

/// Independent runs of [`evolve`] over several initial states.
pub fn evolve_ensemble(
    starts: &[StateVector],
    p: &ModelParams,
    g: &Grid,
    settings: &EvolveSettings,
) -> Vec<Result<(Trajectory, AsymptoticsReport)>> {
    starts.par_iter().map(|s| evolve(s, p, g, settings)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Perturbation {
    /// `ε ρ cos(kπx/ℓ)` with `ρ` the critical kernel vector of mode `k`.
    ModeKick { k: u32, eps: f64 },
    /// Independent uniform `±ε` per node from a seeded generator.
    Noise { eps: f64, seed: u64 },
}

/// Kernel vector of `K − λ_k D(d_c)` for mode `k`, or `(1, 0)` when the mode
/// has no critical value.
pub fn mode_shape(p: &ModelParams, k: u32) -> Result<[f64; 2]> {
    let mode = Mode::new(k, p.ell);
    Ok(match critical_d(p, &mode)? {
        Some(cv) => {
            let cm = kernel_vectors(p, &mode, cv.d_c)?;
            [cm.rho[0], cm.rho[1]]
        }
        None => [1.0, 0.0],
    })
}

pub fn perturb(base: &StateVector, p: &ModelParams, g: &Grid, recipe: &Perturbation) -> Result<StateVector> {
    if base.len() != g.n || base.v.len() != g.n {
        return Err(Error::Dimension { expected: g.n, got: base.len() });
    }
    let mut s = base.clone();
    match *recipe {
        Perturbation::ModeKick { k, eps } => {
            let rho = mode_shape(p, k)?;
            for (j, c) in g.cosine(k).into_iter().enumerate() {
                s.u[j] += eps * rho[0] * c;
                s.v[j] += eps * rho[1] * c;
            }
        }
        Perturbation::Noise { eps, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for x in s.u.iter_mut().chain(s.v.iter_mut()) {
                *x += eps * rng.gen_range(-1.0..=1.0);
            }
        }
    }
    Ok(s)
}

/// `t,v0,u_l2,v_l2`, one row per step.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,v0,u_l2,v_l2\n");
    for i in 0..traj.times.len() {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", traj.times[i], traj.v0[i], traj.u_l2[i], traj.v_l2[i]));
    }
    out
}
