//! One function per subcommand; each writes its artifacts into `out`.

use std::path::Path;

use log::info;
use serde::Serialize;
use skt_core::continuation::{
    branch_switch_observed, continue_branch_observed, diagram_csv, read_states, write_atomic, write_branch_json,
    write_states, BranchFile,
};
use skt_core::ddp_hopf::sweep_csv;
use skt_core::landau::{sign_map_csv, CellFlag, SignMapCell};
use skt_core::timestepper::trajectory_csv;
use skt_core::{
    classify_regime, evolve, find_ddp, homogeneous_equilibria, homogeneous_state, hopf_necessity_sweep,
    landau_sign_map, linearize, perturb, sweep_neutral_curves, Axis, Branch, DoublyDegeneratePoint, Equilibrium,
    EventKind, Grid, Plane, Regime, SignMapGrid,
};

use crate::config::{InitialState, RunConfig};
use crate::error::CliError;
use crate::svg::{Plot, PALETTE};

type Result<T> = std::result::Result<T, CliError>;

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(skt_core::Error::from)?;
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn require_modes(modes: &[u32], what: &str) -> Result<()> {
    if modes.is_empty() {
        return Err(CliError::usage(format!("{what}: the mode list is empty")));
    }
    if modes.contains(&0) {
        return Err(CliError::usage(format!("{what}: mode 0 is never critical")));
    }
    Ok(())
}

#[derive(Serialize)]
struct EquilibriaReport {
    regime: Regime,
    equilibria: Vec<Equilibrium>,
    coexistence: Option<(f64, f64)>,
    alpha: Option<f64>,
    beta: Option<f64>,
    tr_k: Option<f64>,
    det_k: Option<f64>,
    note: Option<String>,
}

pub fn equilibria(c: &RunConfig, out: &Path) -> Result<()> {
    c.model.validate()?;
    let lin = linearize(&c.model);
    let report = EquilibriaReport {
        regime: classify_regime(&c.model),
        equilibria: homogeneous_equilibria(&c.model),
        coexistence: lin.as_ref().ok().map(|l| (l.u, l.v)),
        alpha: lin.as_ref().ok().map(|l| l.alpha),
        beta: lin.as_ref().ok().map(|l| l.beta),
        tr_k: lin.as_ref().ok().map(|l| l.tr_k),
        det_k: lin.as_ref().ok().map(|l| l.det_k),
        note: lin.as_ref().err().map(|e| e.to_string()),
    };
    write_json(&out.join("equilibria.json"), &report)
}

#[derive(Serialize)]
struct DdpRecord {
    modes: (u32, u32),
    point: Option<DoublyDegeneratePoint>,
    note: Option<String>,
}

pub fn neutral_curves(c: &RunConfig, out: &Path) -> Result<()> {
    let nc = &c.neutral_curves;
    require_modes(&nc.modes, "neutral_curves.modes")?;
    c.model.validate()?;
    let samples = sweep_neutral_curves(&c.model, nc.plane, &nc.modes, &nc.window)?;
    let mut csv = String::from("plane,k,d,value\n");
    for s in &samples {
        csv.push_str(&format!("{},{},{},{}\n", nc.plane.label(), s.k, real(s.d), s.value.map(real).unwrap_or_default()));
    }
    write_text(&out.join("neutral_curves.csv"), &csv)?;

    let ddps: Vec<DdpRecord> = nc
        .ddp_pairs
        .iter()
        .map(|&pair| match find_ddp(&c.model, pair, nc.plane, &nc.window) {
            Ok(p) => Ok(DdpRecord { modes: pair, point: Some(p), note: None }),
            Err(e @ skt_core::Error::NoCrossing { .. }) => Ok(DdpRecord { modes: pair, point: None, note: Some(e.to_string()) }),
            Err(e) => Err(e),
        })
        .collect::<std::result::Result<_, _>>()?;
    write_json(&out.join("ddp.json"), &ddps)?;

    let mut plot = Plot::new((0.0, nc.window.d_max), (0.0, nc.y_max));
    let reference = match nc.plane {
        Plane::D12 => c.model.d12,
        Plane::D21 => c.model.d21,
    };
    plot.line(&[Some((0.0, reference)), Some((nc.window.d_max, reference))], "reference", "#2ca02c", 1.0, Some("2,3"));
    for (i, &k) in nc.modes.iter().enumerate() {
        let pts: Vec<Option<(f64, f64)>> =
            samples.iter().filter(|s| s.k == k).map(|s| s.value.map(|v| (s.d, v))).collect();
        plot.line(&pts, &format!("curve k{k}"), PALETTE[i % PALETTE.len()], 1.5, None);
        plot.text(crate::svg::WIDTH - 60.0, 45.0 + 15.0 * i as f64, &format!("k = {k}"));
    }
    for p in ddps.iter().filter_map(|r| r.point) {
        plot.circle(p.d_hat, p.value_hat, 4.0, "ddp", "black");
    }
    let svg = plot.render("Neutral stability curves", "d", nc.plane.label());
    write_text(&out.join("neutral_curves.svg"), &svg)
}

pub fn landau(c: &RunConfig, out: &Path) -> Result<()> {
    let lc = &c.landau;
    require_modes(&lc.modes, "landau.modes")?;
    c.model.validate()?;
    let point = |x: f64| Axis { min: x, max: x, samples: 1 };
    let grid = lc.grid.unwrap_or(SignMapGrid::CrossDiffusion { d12: point(c.model.d12), d21: point(c.model.d21) });
    let cells = landau_sign_map(&c.model, &grid, &lc.modes);
    let (xn, yn) = match grid {
        SignMapGrid::NeutralCurve { plane, .. } => ("d", plane.label()),
        SignMapGrid::CrossDiffusion { .. } => ("d12", "d21"),
    };
    write_text(&out.join("landau.csv"), &sign_map_csv(&cells, xn, yn))?;
    write_json(&out.join("landau.json"), &cells)?;
    if lc.grid.is_none() {
        return Ok(());
    }
    for &k in &lc.modes {
        let mine: Vec<&SignMapCell> = cells.iter().filter(|cell| cell.k == k).collect();
        let svg = match grid {
            SignMapGrid::CrossDiffusion { d12, d21 } => heat_map(&mine, &d12, &d21, k),
            SignMapGrid::NeutralCurve { plane, window } => curve_signs(&mine, plane, window.d_max, k),
        };
        write_text(&out.join(format!("landau_k{k}.svg")), &svg)?;
    }
    Ok(())
}

fn cell_style(cell: &SignMapCell) -> Option<(&'static str, &'static str)> {
    match (cell.flag, cell.sign) {
        (CellFlag::Absent, _) => None,
        (CellFlag::NearResonant, _) => Some(("near-resonant", "#bbbbbb")),
        (CellFlag::Error, _) => Some(("error", "#000000")),
        (CellFlag::Ok, s) if s > 0 => Some(("positive", "#d62728")),
        (CellFlag::Ok, s) if s < 0 => Some(("negative", "#1f77b4")),
        (CellFlag::Ok, _) => Some(("marginal", "#ffffff")),
    }
}

fn half_width(axis: &Axis) -> f64 {
    if axis.samples > 1 {
        0.5 * (axis.max - axis.min) / (axis.samples - 1) as f64
    } else {
        0.5
    }
}

fn heat_map(cells: &[&SignMapCell], d12: &Axis, d21: &Axis, k: u32) -> String {
    let (hx, hy) = (half_width(d12), half_width(d21));
    let mut plot = Plot::new((d12.min - hx, d12.max + hx), (d21.min - hy, d21.max + hy));
    for cell in cells {
        if let Some((class, fill)) = cell_style(cell) {
            plot.cell((cell.x - hx, cell.x + hx), (cell.y - hy, cell.y + hy), class, fill);
        }
    }
    plot.render(&format!("Sign of L, mode {k} (red +, blue -, grey near-resonant)"), "d12", "d21")
}

fn curve_signs(cells: &[&SignMapCell], plane: Plane, d_max: f64, k: u32) -> String {
    let y_max = cells.iter().filter(|c| c.y.is_finite()).map(|c| c.y).fold(0.0, f64::max).max(1e-12);
    let mut plot = Plot::new((0.0, d_max), (0.0, y_max));
    for cell in cells {
        match cell_style(cell) {
            Some(("near-resonant", color)) => plot.diamond(cell.x, cell.y, 3.0, "near-resonant", color),
            Some((class, color)) => plot.circle(cell.x, cell.y, 1.5, class, color),
            None => {}
        }
    }
    plot.render(&format!("Sign of L along the mode {k} neutral curve"), "d", plane.label())
}

pub fn hopf(c: &RunConfig, out: &Path) -> Result<()> {
    c.model.validate()?;
    let sweep = hopf_necessity_sweep(&c.model, &c.hopf.d21, c.hopf.reading);
    write_text(&out.join("hopf.csv"), &sweep_csv(&sweep))?;
    write_json(&out.join("hopf.json"), &sweep)
}

struct Flusher<'a> {
    c: &'a RunConfig,
    g: &'a Grid,
    out: &'a Path,
    last: usize,
}

impl Flusher<'_> {
    fn path(&self, id: usize) -> std::path::PathBuf {
        self.out.join(format!("branch_{id}.json"))
    }

    fn write(&self, b: &Branch) -> Result<()> {
        let cc = &self.c.continuation;
        let file = BranchFile::new(b, &self.c.model, self.g, &cc.settings, cc.embed_states);
        write_branch_json(&self.path(b.id), &file)?;
        if !cc.embed_states {
            let states: Vec<_> = b.points.iter().map(|pt| pt.state.clone()).collect();
            write_states(&self.out.join(format!("branch_{}.states.bin", b.id)), &states)?;
        }
        Ok(())
    }

    fn observe(&mut self, b: &Branch) {
        let every = self.c.continuation.flush_every.max(1);
        if b.points.len() >= self.last + every {
            self.last = b.points.len();
            if let Err(e) = self.write(b) {
                log::warn!("partial flush of branch {} failed: {e}", b.id);
            }
        }
    }
}

pub fn continuation(c: &RunConfig, out: &Path) -> Result<()> {
    let cc = &c.continuation;
    c.model.validate()?;
    if cc.sides.is_empty() && cc.switches > 0 {
        return Err(CliError::usage("continuation.sides: at least one side is needed to switch branches"));
    }
    let g = Grid::new(c.grid.n, c.model.ell)?;
    let p = c.model.with_d(cc.start_d);
    let mut homogeneous_settings = cc.settings;
    if homogeneous_settings.max_events.is_none() {
        homogeneous_settings.max_events = Some(cc.switches);
    }
    let mut flusher = Flusher { c, g: &g, out, last: 0 };
    let start = homogeneous_state(&p, &g)?;
    info!("homogeneous branch from d = {}", cc.start_d);
    let base = continue_branch_observed(&start, &p, &g, &homogeneous_settings, 0, &mut |b| flusher.observe(b))?;
    flusher.write(&base)?;

    let mut branches = vec![base];
    let pitchforks: Vec<usize> = branches[0]
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EventKind::Pitchfork)
        .map(|(i, _)| i)
        .take(cc.switches)
        .collect();
    for event in pitchforks {
        for &side in &cc.sides {
            let id = branches.len();
            info!("switching at event {event} ({side:?}) as branch {id}");
            flusher.last = 0;
            let b = branch_switch_observed(&branches[0], event, side, &p, &g, &cc.settings, id, &mut |b| flusher.observe(b))?;
            flusher.write(&b)?;
            branches.push(b);
        }
    }

    let refs: Vec<&Branch> = branches.iter().collect();
    write_text(&out.join("diagram.csv"), &diagram_csv(&refs))?;
    write_text(&out.join("diagram.svg"), &diagram_svg(&branches, &cc.settings))
}

fn diagram_svg(branches: &[Branch], settings: &skt_core::ContinuationSettings) -> String {
    let all = branches.iter().flat_map(|b| b.points.iter());
    let (mut d0, mut d1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for pt in all {
        d0 = d0.min(pt.d);
        d1 = d1.max(pt.d);
        v0 = v0.min(pt.measures.v0);
        v1 = v1.max(pt.measures.v0);
    }
    if !d0.is_finite() {
        (d0, d1, v0, v1) = (settings.d_min, settings.d_max, 0.0, 1.0);
    }
    let pad = 0.05 * (v1 - v0).max(1e-6);
    let mut plot = Plot::new((d0, d1), (v0 - pad, v1 + pad));
    for (i, b) in branches.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut start = 0;
        while start + 1 < b.points.len() {
            let stable = b.points[start].unstable_count == 0;
            let mut end = start + 1;
            while end + 1 < b.points.len() && (b.points[end].unstable_count == 0) == stable {
                end += 1;
            }
            let pts: Vec<Option<(f64, f64)>> =
                b.points[start..=end].iter().map(|pt| Some((pt.d, pt.measures.v0))).collect();
            let (class, width) = if stable { ("stable", 2.5) } else { ("unstable", 0.8) };
            plot.line(&pts, &format!("branch b{} {class}", b.id), color, width, None);
            start = end;
        }
        for e in &b.events {
            let (x, y) = (e.d_at, e.state.v[0]);
            match e.kind {
                EventKind::Pitchfork => plot.circle(x, y, 4.0, "pitchfork", "black"),
                EventKind::Fold => plot.cross(x, y, 4.0, "fold", "black"),
                EventKind::Hopf => plot.diamond(x, y, 5.0, "hopf", "black"),
            }
        }
    }
    plot.render("Bifurcation diagram (o pitchfork, x fold, diamond Hopf)", "d", "v(0)")
}

pub fn simulate(c: &RunConfig, out: &Path) -> Result<()> {
    let sc = &c.simulate;
    c.model.validate()?;
    let g = Grid::new(c.grid.n, c.model.ell)?;
    let base = match &sc.initial {
        InitialState::Homogeneous => homogeneous_state(&c.model, &g)?,
        InitialState::States { path, index } => {
            let states = read_states(path).map_err(|e| CliError::usage(format!("simulate.initial.path: {e}")))?;
            let s = states
                .get(*index)
                .cloned()
                .ok_or_else(|| CliError::usage(format!("simulate.initial.index: {index} out of {} states", states.len())))?;
            if s.len() != g.n {
                return Err(CliError::usage(format!("simulate.initial: state has {} nodes, grid has {}", s.len(), g.n)));
            }
            s
        }
    };
    let s0 = match &sc.perturbation {
        Some(recipe) => perturb(&base, &c.model, &g, recipe)?,
        None => base,
    };
    let (traj, report) = evolve(&s0, &c.model, &g, &sc.settings)?;
    info!("verdict {:?} at t = {}", report.verdict, report.final_time);
    write_text(&out.join("trajectory.csv"), &trajectory_csv(&traj))?;
    write_json(&out.join("verdict.json"), &report)
}
