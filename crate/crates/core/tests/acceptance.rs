//! Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p skt-core --release --test acceptance -- --nocapture`.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skt_core::continuation::{jacobian, newton_solve, residual, Direction};
use skt_core::ddp_hopf::{
    ddp_frame, diagonalization_residual, hopf_necessity_sweep, negative_landau_side, B1Reading, NegativeSide,
};
use skt_core::landau::{landau_for_mode, Axis};
use skt_core::timestepper::{evolve, perturb, step, EvolveSettings, Perturbation, Verdict};
use skt_core::{
    branch_switch, classify_regime, continue_branch, critical_d, find_ddp, homogeneous_state, linearize,
    neutral_curve_d12, neutral_curve_d21, stability_summary, Branch, ContinuationSettings, DWindow, EventKind, Grid,
    Mode, ModelParams, NewtonSettings, Plane, Regime, SeedSide, StateVector,
};

fn report(id: &str, ok: bool, detail: impl AsRef<str>) {
    println!("[{}] criterion {id}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(ok, "criterion {id} failed: {}", detail.as_ref());
}

fn reference(d21: f64) -> ModelParams {
    ModelParams::reference().with_d12(3.0).with_d21(d21)
}

// Oracles written from the model equations, independent of the library's
// linear-analysis code path.

fn equilibrium(p: &ModelParams) -> (f64, f64) {
    let den = p.a1 * p.a2 - p.b1 * p.b2;
    ((p.r1 * p.a2 - p.r2 * p.b1) / den, (p.r2 * p.a1 - p.r1 * p.b2) / den)
}

fn mode_matrix(p: &ModelParams, k: u32, d: f64) -> Matrix2<f64> {
    let (u, v) = equilibrium(p);
    let lam = (k as f64 * std::f64::consts::PI / p.ell).powi(2);
    let kin = Matrix2::new(-p.a1 * u, -p.b1 * u, -p.b2 * v, -p.a2 * v);
    let diff = Matrix2::new(
        d + 2.0 * p.d11 * u + p.d12 * v,
        p.d12 * u,
        p.d21 * v,
        d + 2.0 * p.d22 * v + p.d21 * u,
    );
    kin - diff * lam
}

/// `det M` and the magnitude of its two products.
fn det_scaled(m: &Matrix2<f64>) -> f64 {
    let (a, b) = (m[(0, 0)] * m[(1, 1)], m[(0, 1)] * m[(1, 0)]);
    (a - b).abs() / a.abs().max(b.abs())
}

fn bisect_det(p: &ModelParams, k: u32) -> f64 {
    let f = |d: f64| mode_matrix(p, k, d).determinant();
    let (mut lo, mut hi) = (0.0, 1e-3);
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn random_weak(rng: &mut ChaCha8Rng) -> ModelParams {
    loop {
        let a1 = rng.gen_range(1.0..5.0);
        let a2 = rng.gen_range(1.0..5.0);
        let b1 = rng.gen_range(0.1..3.0);
        let b2 = rng.gen_range(0.1..3.0);
        let (lo, hi) = (b1 / a2, a1 / b2);
        if hi - lo < 0.05 {
            continue;
        }
        let r2 = rng.gen_range(1.0..5.0);
        let r1 = r2 * rng.gen_range(lo + 0.01 * (hi - lo)..hi - 0.01 * (hi - lo));
        let mut p = ModelParams::reference();
        (p.r1, p.r2, p.a1, p.a2, p.b1, p.b2) = (r1, r2, a1, a2, b1, b2);
        p.d12 = rng.gen_range(0.5..6.0);
        p.d21 = rng.gen_range(0.0..0.05);
        if classify_regime(&p) == Regime::Weak {
            return p;
        }
    }
}

fn homogeneous_scan(p: &ModelParams, g: &Grid, events: usize) -> Branch {
    let s = ContinuationSettings { max_events: Some(events), ..Default::default() };
    continue_branch(&homogeneous_state(&p.with_d(0.06), g).unwrap(), &p.with_d(0.06), g, &s).unwrap()
}

fn mode_event(b: &Branch, k: u32) -> usize {
    b.events.iter().position(|e| e.kind == EventKind::Pitchfork && e.kernel_mode == Some(k)).expect("pitchfork of mode k")
}

fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn criterion_01_regime_and_signs() {
    let p = reference(0.0);
    let lin = linearize(&p).unwrap();
    let ok = classify_regime(&p) == Regime::Weak && lin.alpha > 0.0 && lin.beta < 0.0;
    report("1", ok, format!("regime {:?}, alpha = {}, beta = {}", classify_regime(&p), lin.alpha, lin.beta));
}

#[test]
fn criterion_02_root_formula_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 100 {
        let p = random_weak(&mut rng);
        let k = rng.gen_range(1..4);
        if mode_matrix(&p, k, 0.0).determinant() >= 0.0 {
            continue;
        }
        let closed = critical_d(&p, &Mode::new(k, p.ell)).unwrap().expect("C_k < 0 gives a root").d_c;
        let oracle = bisect_det(&p, k);
        worst = worst.max((closed - oracle).abs() / oracle);
        count += 1;
    }
    report("2", worst < 1e-9, format!("100 weak-regime sets, worst relative gap {worst:.3e} (tol 1e-9)"));
}

#[test]
fn criterion_03_neutral_curve_level_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut samples = 0;
    while samples < 10_000 {
        let p = random_weak(&mut rng);
        let k = rng.gen_range(1..6);
        let d = 10f64.powf(rng.gen_range(-4.0..-1.0));
        let mode = Mode::new(k, p.ell);
        let (q, value) = if samples % 2 == 0 {
            (p, neutral_curve_d12(&p, d, &mode).unwrap().map(|x| p.with_d12(x)))
        } else {
            (p, neutral_curve_d21(&p, d, &mode).unwrap().map(|x| p.with_d21(x)))
        };
        let Some(on_curve) = value else { continue };
        let _ = q;
        worst = worst.max(det_scaled(&mode_matrix(&on_curve, k, d)));
        samples += 1;
    }
    report("3", worst < 1e-8, format!("10^4 samples, worst scaled |P_k| {worst:.3e} (tol 1e-8)"));
}

#[test]
fn criterion_04_monotone_shift() {
    let d21s = [0.0, 0.01, 0.02, 0.025, 0.03];
    let dc = |k: u32| -> Vec<f64> {
        d21s.iter().map(|&x| critical_d(&reference(x), &Mode::new(k, 1.0)).unwrap().unwrap().d_c).collect()
    };
    let (d1, d2) = (dc(1), dc(2));
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let hat = |x: f64| find_ddp(&reference(x), (1, 2), Plane::D12, &DWindow::default()).unwrap().value_hat;
    let (h0, h25) = (hat(0.0), hat(0.025));
    let ok = decreasing(&d1) && decreasing(&d2) && h25 > h0;
    report("4", ok, format!("d_c(k=1) {d1:.6?}, d_c(k=2) {d2:.6?}, d12_hat {h0:.6} -> {h25:.6}"));
}

fn landau_sign(d21: f64, k: u32) -> f64 {
    landau_for_mode(&reference(d21), k).unwrap().expect("mode is critical").1.l.signum()
}

#[test]
fn criterion_05a_first_mode_landau_signs() {
    let (s1, s2) = (landau_sign(0.01, 1), landau_sign(0.02, 1));
    report("5a", s1 > 0.0 && s2 < 0.0, format!("sign L(lambda_1): {s1:+} at d21 = 0.01, {s2:+} at d21 = 0.02"));
}

#[test]
fn criterion_05b_second_mode_landau_flip_window() {
    let lo = 0.025;
    let hi = 0.03;
    let axis: Vec<f64> = (0..=50).map(|i| lo + (hi - lo) * i as f64 / 50.0).collect();
    let signs: Vec<f64> = axis.iter().map(|&x| landau_sign(x, 2)).collect();
    let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
    // where the flip is, for the record
    let (mut a, mut b) = (0.0, 0.03);
    let sa = landau_sign(a, 2);
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        if landau_sign(m, 2) == sa {
            a = m;
        } else {
            b = m;
        }
    }
    report(
        "5b",
        flips > 0,
        format!(
            "sign L(lambda_2) on [{lo}, {hi}]: {:+} .. {:+}, {flips} flips; first flip on [0, 0.03] at d21 = {:.6}",
            signs[0],
            signs[signs.len() - 1],
            0.5 * (a + b)
        ),
    );
}

#[test]
fn criterion_06_landau_continuation_consistency() {
    let mut lines = Vec::new();
    let mut ok = true;
    for d21 in [0.0, 0.01, 0.025] {
        let p = reference(d21);
        let l = landau_for_mode(&p, 1).unwrap().unwrap();
        let d_c = l.0.d_c;
        let mut gaps = Vec::new();
        let mut direction = 0.0;
        for n in [101, 201] {
            let g = Grid::new(n, 1.0).unwrap();
            let h = homogeneous_scan(&p, &g, 2);
            let ev = mode_event(&h, 1);
            gaps.push((h.events[ev].d_at - d_c).abs());
            if n == 201 {
                let s = ContinuationSettings { ds_max: 1e-4, max_steps: 10, ..Default::default() };
                let b = branch_switch(&h, ev, SeedSide::Plus, &p.with_d(0.06), &g, &s).unwrap();
                let d_at = h.events[ev].d_at;
                direction = b.points.iter().take(10).map(|pt| pt.d - d_at).sum::<f64>().signum();
            }
        }
        let expected = if l.1.l > 0.0 { -1.0 } else { 1.0 };
        let ratio = gaps[0] / gaps[1];
        let this = direction == expected && ratio >= 3.5;
        ok &= this;
        lines.push(format!("d21={d21}: L={:+.3e} branch toward {} d_c, gap ratio {ratio:.2}", l.1.l, if direction < 0.0 { "d <" } else { "d >" }));
    }
    assert!(landau_sign(0.0, 1) != landau_sign(0.025, 1), "sets must span both signs");
    report("6", ok, lines.join("; "));
}

fn first_mode_branch(d21: f64, n: usize) -> (Branch, ModelParams, Grid) {
    let p = reference(d21).with_d(0.06);
    let g = Grid::new(n, 1.0).unwrap();
    let h = homogeneous_scan(&p, &g, 2);
    let b = branch_switch(&h, mode_event(&h, 1), SeedSide::Plus, &p, &g, &ContinuationSettings::default()).unwrap();
    (b, p, g)
}

#[test]
fn criterion_07_hopf_detection() {
    let (b30, ..) = first_mode_branch(0.03, 201);
    let (b0, ..) = first_mode_branch(0.0, 201);
    let h30: Vec<f64> = b30.events_of(EventKind::Hopf).map(|e| e.d_at).collect();
    let h0 = b0.events_of(EventKind::Hopf).count();
    report(
        "7",
        !h30.is_empty() && h0 == 0,
        format!("k=1 branch, n=201: Hopf at d = {h30:.7?} for d21 = 0.03; {h0} Hopf events for d21 = 0"),
    );
}

#[test]
fn criterion_08_multistability_window() {
    let (b, p, g) = first_mode_branch(0.02, 201);
    let h = homogeneous_scan(&p, &g, 1);
    let d_c = h.events[0].d_at;
    let fold = b.events_of(EventKind::Fold).map(|e| e.d_at).filter(|&d| d > d_c).fold(f64::NAN, f64::min);
    let d = 0.5 * (d_c + fold);
    let pd = p.with_d(d);
    let near = b
        .points
        .iter()
        .filter(|pt| pt.unstable_count == 0)
        .min_by(|a, c| (a.d - d).abs().total_cmp(&(c.d - d).abs()))
        .unwrap();
    let pattern = newton_solve(&near.state, &pd, &g, &NewtonSettings::default()).unwrap().state;
    let hom = homogeneous_state(&pd, &g).unwrap();
    let (sp, sh) = (stability_summary(&pattern, &pd, &g, 1e-7).unwrap(), stability_summary(&hom, &pd, &g, 1e-7).unwrap());

    let settings = EvolveSettings { horizon: 1e6, dt_max: 50.0, ..Default::default() };
    let noise = perturb(&hom, &pd, &g, &Perturbation::Noise { eps: 1e-6, seed: 8 }).unwrap();
    let (_, r_hom) = evolve(&noise, &pd, &g, &settings).unwrap();
    // kick along the side of the cosine mode that the pattern occupies
    let c = g.cosine(1);
    let lean: f64 = pattern.u.iter().zip(&c).map(|(u, c)| (u - hom.u[0]) * c).sum();
    let rho_u = skt_core::timestepper::mode_shape(&pd, 1).unwrap()[0];
    let kick = perturb(&hom, &pd, &g, &Perturbation::ModeKick { k: 1, eps: 0.3 * (lean * rho_u).signum() }).unwrap();
    let (_, r_pat) = evolve(&kick, &pd, &g, &settings).unwrap();
    let (e_hom, e_pat) = (max_diff(&r_hom.final_state, &hom), max_diff(&r_pat.final_state, &pattern));
    let ok = fold > d_c
        && sp.unstable_count == 0
        && sh.unstable_count == 0
        && r_hom.verdict == Verdict::Steady
        && r_pat.verdict == Verdict::Steady
        && e_hom < 1e-6
        && e_pat < 1e-6;
    report(
        "8",
        ok,
        format!(
            "window d in ({d_c:.7}, {fold:.7}); at d = {d:.7}: unstable counts homogeneous {} / pattern {}; noise -> {:?} ({e_hom:.1e} from homogeneous), kick -> {:?} ({e_pat:.1e} from pattern)",
            sh.unstable_count, sp.unstable_count, r_hom.verdict, r_pat.verdict
        ),
    );
}

#[test]
fn criterion_09_hopf_necessary_condition_sweep() {
    let sweep = hopf_necessity_sweep(&reference(0.0), &Axis { min: 0.0, max: 0.03, samples: 61 }, B1Reading::ModeTwo);
    let first = sweep.records[0].necessity.map(|n| n.satisfied);
    let t = &sweep.transitions;
    let single = t.len() == 1 && t[0].from_satisfied && t[0].refined > 0.0 && t[0].refined < 0.03;
    let co_located = single && {
        let (a, b) = t[0].bracket;
        negative_landau_side(&reference(a), 1e-3).unwrap() != negative_landau_side(&reference(b), 1e-3).unwrap()
            && negative_landau_side(&reference(a), 1e-3).unwrap() == NegativeSide::Below
    };
    let detail = match t.first() {
        Some(tr) => format!(
            "A1*B1 < 0 at d21 = 0: {first:?}; {} transition(s); threshold d21 = {:.6} in bracket ({:.4}, {:.4}); L(lambda_1) < 0 region flips in the same bracket: {co_located}",
            t.len(),
            tr.refined,
            tr.bracket.0,
            tr.bracket.1
        ),
        None => format!("A1*B1 < 0 at d21 = 0: {first:?}; no transition"),
    };
    report("9", first == Some(true) && single && co_located, detail);
}

#[test]
fn criterion_10_structural_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut details = Vec::new();

    // analytic Jacobian against central differences
    let mut worst_fd = 0.0f64;
    for _ in 0..10 {
        let mut p = reference(rng.gen_range(0.0..0.03)).with_d(rng.gen_range(0.005..0.05));
        p.d11 = rng.gen_range(0.0..0.1);
        p.d22 = rng.gen_range(0.0..0.1);
        let n = 25;
        let g = Grid::new(n, 1.0).unwrap();
        let s = StateVector {
            u: (0..n).map(|_| rng.gen_range(0.5..2.5)).collect(),
            v: (0..n).map(|_| rng.gen_range(0.05..0.5)).collect(),
        };
        let jac = jacobian(&s, &p, &g).to_dense();
        let x = s.to_interleaved();
        let mut fd = nalgebra::DMatrix::zeros(2 * n, 2 * n);
        for c in 0..2 * n {
            let h = 1e-6 * x[c].abs().max(1.0);
            let shifted = |sgn: f64| {
                let mut y = x.clone();
                y[c] += sgn * h;
                let st = StateVector::from_interleaved(&y);
                residual(&st, &p, &g)
            };
            let (rp, rm) = (shifted(1.0), shifted(-1.0));
            for r in 0..2 * n {
                fd[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
            }
        }
        worst_fd = worst_fd.max((&jac - &fd).amax() / jac.amax());
    }
    details.push(format!("Jacobian vs FD {worst_fd:.1e}"));

    // mirrors of found patterns are solutions reached in at most two Newton steps
    let (b, p, g) = first_mode_branch(0.0, 101);
    let mut worst_iter = 0;
    for pt in b.points.iter().step_by(3).filter(|pt| pt.measures.u_max - pt.measures.u_min > 1e-3) {
        let m = newton_solve(&pt.state.mirrored(), &p.with_d(pt.d), &g, &NewtonSettings::default()).unwrap();
        worst_iter = worst_iter.max(m.iterations);
    }
    details.push(format!("mirror Newton iterations <= {worst_iter}"));

    // homogeneous state is stationary under residual and implicit Euler
    let hp = reference(0.02).with_d(0.013);
    let hg = Grid::new(101, 1.0).unwrap();
    let hs = homogeneous_state(&hp, &hg).unwrap();
    let res = residual(&hs, &hp, &hg).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let stepped = step(&hs, 0.5, &hp, &hg, &EvolveSettings::default()).unwrap();
    details.push(format!("homogeneous residual {res:.1e}, step change {:.1e}", max_diff(&stepped, &hs)));

    // diagonalization at every DDP of the d21 sweep
    let mut worst_diag = 0.0f64;
    for x in (0..=30).map(|i| i as f64 * 0.001) {
        let f = ddp_frame(&reference(x)).unwrap();
        worst_diag = worst_diag.max(diagonalization_residual(&f.m1, &f.t1)).max(diagonalization_residual(&f.m2, &f.t2));
    }
    details.push(format!("T_k diagonalization residual {worst_diag:.1e}"));

    let ok = worst_fd < 1e-6 && worst_iter <= 2 && res < 1e-12 && stepped == hs && worst_diag < 1e-8;
    report("10", ok, details.join("; "));
}

#[test]
fn direction_setting_is_honoured() {
    // a start above every critical value moves down or up as requested
    let p = reference(0.0).with_d(0.06);
    let g = Grid::new(21, 1.0).unwrap();
    for (dir, sign) in [(Direction::Decreasing, -1.0), (Direction::Increasing, 1.0)] {
        let s = ContinuationSettings { direction: dir, max_steps: 3, ..Default::default() };
        let b = continue_branch(&homogeneous_state(&p, &g).unwrap(), &p, &g, &s).unwrap();
        assert_eq!((b.points[3].d - b.points[0].d).signum(), sign);
    }
}
