use crate::args::*;
use crate::{usage, Failure};
use biflab_core::bifurcation::{ddc_density, mass_growth, misiurewicz_in_support, misiurewicz_scan, support_mask, write_hits, MassGrowthConfig, MisiurewiczConfig};
use biflab_core::family::{self, FamilyKind};
use biflab_core::io::{fmt12, write_json, Table};
use biflab_core::lyapunov::{estimate, sweep_grid, EstimatorConfig, LyapunovField};
use biflab_core::motion::{contraction_report, continue_cycle, crossing_detect, find_cycles, motion_hyperbolic, segment, CloudSource, ContractionConfig, MotionConfig, NoClouds, WalkClouds};
use biflab_core::sampler::backward_walk;
use biflab_core::{CVec, Cycle, FamilySpec, GreenEvaluator, Method, ParameterGrid, C64};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

type Run = Result<(), Failure>;

/// Everything needed to rerun a command: the resolved flags and the family
/// text it was run with.
#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub biflab_version: String,
    pub family_text: String,
    pub run: Command,
    /// Settings derived from the flags, such as the estimator picked by
    /// `--method auto`.
    pub resolved: serde_json::Value,
}

/// 12 significant digits, trailing zeros kept, for console output.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { format!("{:.11}", 0.0) } else { fmt12(x) };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

fn sigc(z: C64) -> String {
    format!("{},{}", sig12(z.re), sig12(z.im))
}

pub fn builtin(name: &str) -> Option<FamilySpec> {
    Some(match name {
        "quadratic" => family::quadratic_family(),
        "cubic" => family::cubic_family(),
        "lattes" => family::lattes_map(),
        "skew" => family::skew_family(),
        "product-squares" => family::product_squares(),
        "square-p1" => family::square_map_p1(),
        "constant-z2" => family::constant_quadratic(C64::new(0.0, 0.0)),
        "constant-chebyshev" => family::constant_quadratic(C64::new(-2.0, 0.0)),
        _ => return None,
    })
}

/// Loads the family and normalises it through its file form, so a replay
/// from the manifest text starts from the same bits.
fn load_family(arg: &FamilyArg, text: Option<&str>) -> Result<FamilySpec, Failure> {
    let spec = match text {
        Some(t) => FamilySpec::parse(t).map_err(|e| usage("--family", format!("manifest family text: {e}")))?,
        None => match arg.family.strip_prefix("builtin:") {
            Some(name) => builtin(name).ok_or_else(|| usage("--family", format!("unknown builtin family {name:?}")))?,
            None => FamilySpec::load(&arg.family).map_err(|e| usage("--family", format!("{}: {e}", arg.family)))?,
        },
    };
    FamilySpec::parse(&spec.to_file_string()).map_err(|e| usage("--family", e.to_string()))
}

fn out_dir(out: &OutArg) -> Result<Option<PathBuf>, Failure> {
    match &out.out {
        Some(p) => {
            std::fs::create_dir_all(p).map_err(|e| usage("--out", format!("{}: {e}", p.display())))?;
            Ok(Some(p.clone()))
        }
        None => Ok(None),
    }
}

fn require_out(out: &OutArg) -> Result<PathBuf, Failure> {
    out_dir(out)?.ok_or_else(|| usage("--out", "this command writes files and needs an output directory"))
}

fn write_manifest(dir: &Path, spec: &FamilySpec, cmd: &Command, resolved: serde_json::Value) -> Run {
    let m = Manifest { biflab_version: env!("CARGO_PKG_VERSION").into(), family_text: spec.to_file_string(), run: cmd.clone_for_manifest(), resolved };
    write_json(dir.join("manifest.json"), &m)?;
    Ok(())
}

impl Command {
    fn clone_for_manifest(&self) -> Command {
        // the output directory is not serialized, so a JSON round trip is a
        // faithful copy of everything that affects the outputs
        serde_json::from_value(serde_json::to_value(self).expect("command serializes")).expect("command round trips")
    }
}

fn positive(flag: &str, x: f64) -> Run {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(usage(flag, format!("must be positive, got {x}")))
    }
}

fn at_least(flag: &str, n: usize, min: usize) -> Run {
    if n >= min {
        Ok(())
    } else {
        Err(usage(flag, format!("must be at least {min}, got {n}")))
    }
}

fn grid_of(g: &GridArgs) -> Result<ParameterGrid, Failure> {
    positive("--width", g.width)?;
    positive("--height", g.height)?;
    at_least("--nx", g.nx, 3)?;
    at_least("--ny", g.ny, 3)?;
    Ok(ParameterGrid::new(g.center.0, g.width, g.height, g.nx, g.ny)?)
}

fn estimator_of(spec: &FamilySpec, e: &EstimatorArgs) -> Result<EstimatorConfig, Failure> {
    let polynomial = spec.k() == 1 && spec.kind() == FamilyKind::Polynomial;
    let method = match e.method {
        MethodArg::Auto if polynomial => Method::Przytycki,
        MethodArg::Auto | MethodArg::Backward => Method::BackwardBirkhoff,
        MethodArg::Przytycki => Method::Przytycki,
    };
    Ok(match method {
        Method::Przytycki => {
            positive("--tol", e.tol)?;
            EstimatorConfig::przytycki(e.tol)
        }
        Method::BackwardBirkhoff => {
            at_least("--walks", e.walks, 2)?;
            at_least("--samples", e.samples, e.walks)?;
            EstimatorConfig { method, n_samples: e.samples, walks: e.walks, burn_in: e.burn_in, tol: e.tol, seed: e.seed }
        }
    })
}

fn point_arg(flag: &str, p: &Point, k: usize) -> Result<CVec, Failure> {
    if p.0.len() != k {
        return Err(usage(flag, format!("expected {k} coordinates separated by ';', got {}", p.0.len())));
    }
    Ok(CVec::from_slice(&p.0))
}

/// Picks the cycle through the periodic point nearest to `near`, rotated so
/// that point comes first; without `near` all cycles are returned.
fn select_cycles(spec: &FamilySpec, lambda: C64, period: usize, near: Option<&Point>) -> Result<Vec<Cycle>, Failure> {
    at_least("--period", period, 1)?;
    let set = find_cycles(spec, lambda, period)?;
    let Some(near) = near else { return Ok(set.cycles) };
    let target = point_arg("--near", near, spec.k())?;
    let mut best: Option<(f64, Cycle)> = None;
    for c in set.cycles {
        for (s, x) in c.points.iter().enumerate() {
            let d = x.dist(&target);
            if best.as_ref().is_none_or(|(b, _)| d < *b) {
                let mut c2 = c.clone();
                c2.points.rotate_left(s);
                best = Some((d, c2));
            }
        }
    }
    best.map(|(_, c)| vec![c]).ok_or_else(|| usage("--period", format!("no cycles of period {period} at {}", sigc(lambda))))
}

pub fn dispatch(cmd: Command, text: Option<String>) -> Run {
    let text = text.as_deref();
    match &cmd {
        Command::Green(a) => green(a, text, &cmd),
        Command::Cloud(a) => cloud(a, text, &cmd),
        Command::Lyap(a) => lyap(a, text, &cmd),
        Command::LyapMap(a) => lyap_map(a, text, &cmd),
        Command::BifMap(a) => bif_map(a, text, &cmd),
        Command::MassGrowth(a) => mass(a, text, &cmd),
        Command::Cycles(a) => cycles(a, text, &cmd),
        Command::Track(a) => track(a, text, &cmd),
        Command::Motion(a) => motion(a, text, &cmd),
        Command::Misiurewicz(a) => misiurewicz(a, text, &cmd),
        Command::Contraction(a) => contraction(a, text, &cmd),
        Command::Selftest => crate::selftest::run(),
        Command::Replay(a) => replay(a),
    }
}

fn replay(a: &ReplayArgs) -> Run {
    let raw = std::fs::read_to_string(&a.manifest).map_err(|e| usage("--manifest", format!("{}: {e}", a.manifest.display())))?;
    let m: Manifest = serde_json::from_str(&raw).map_err(|e| usage("--manifest", e.to_string()))?;
    let mut cmd = m.run;
    let out = OutArg { out: Some(a.out.clone()) };
    match &mut cmd {
        Command::Green(x) => x.out = out,
        Command::Cloud(x) => x.out = out,
        Command::Lyap(x) => x.out = out,
        Command::LyapMap(x) => x.out = out,
        Command::BifMap(x) => x.map.out = out,
        Command::MassGrowth(x) => x.out = out,
        Command::Cycles(x) => x.out = out,
        Command::Track(x) => x.out = out,
        Command::Motion(x) => x.out = out,
        Command::Misiurewicz(x) => x.out = out,
        Command::Contraction(x) => x.out = out,
        Command::Selftest | Command::Replay(_) => return Err(usage("--manifest", "manifest does not record a replayable command")),
    }
    dispatch(cmd, Some(m.family_text))
}

fn green(a: &GreenArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    positive("--tol", a.tol)?;
    let ev = GreenEvaluator::at_point(&spec, a.lambda.0, a.tol)?;
    let k = spec.k();
    let (name, g) = match a.z.0.len() {
        n if n == k => ("g", ev.green_affine(a.lambda.0, &CVec::from_slice(&a.z.0))?),
        n if n == k + 1 => ("G", ev.green_value(a.lambda.0, &CVec::from_slice(&a.z.0))?),
        n => return Err(usage("--z", format!("expected {k} chart or {} homogeneous coordinates, got {n}", k + 1))),
    };
    println!("{name}={} error_bound={} n_steps={} sup_bound={}", sig12(g.value), sig12(g.error_bound), g.n_steps, sig12(ev.sup_bound()));
    if let Some(dir) = out_dir(&a.out)? {
        let mut t = Table::new(&["quantity", "value", "error_bound", "n_steps"]);
        t.push(vec![name.into(), fmt12(g.value), fmt12(g.error_bound), g.n_steps.to_string()]);
        t.write(dir.join("report.csv"))?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn cloud(a: &CloudArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    at_least("--samples", a.samples, 1)?;
    let c = backward_walk(&spec, a.lambda.0, None, a.samples, a.burn_in, a.seed)?;
    println!("samples={} rejected={} seed={}", c.len(), c.rejected, a.seed);
    if let Some(dir) = out_dir(&a.out)? {
        c.write_csv(dir.join("cloud.csv"))?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn lyap(a: &LyapArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    let cfg = estimator_of(&spec, &a.estimator)?;
    let e = estimate(&spec, a.lambda.0, &cfg)?;
    println!("L={} stderr={} method={} n_samples={}", sig12(e.value), sig12(e.stderr), e.method.as_str(), e.n_samples);
    if let Some(dir) = out_dir(&a.out)? {
        let mut t = Table::new(&["re_lambda", "im_lambda", "L", "stderr", "method", "n_samples"]);
        t.push(vec![fmt12(a.lambda.0.re), fmt12(a.lambda.0.im), fmt12(e.value), fmt12(e.stderr), e.method.as_str().into(), e.n_samples.to_string()]);
        t.write(dir.join("report.csv"))?;
        write_manifest(&dir, &spec, cmd, json!({ "estimator": cfg }))?;
    }
    Ok(())
}

fn sweep(a: &MapArgs, text: Option<&str>) -> Result<(FamilySpec, LyapunovField), Failure> {
    let spec = load_family(&a.family, text)?;
    let grid = grid_of(&a.grid)?;
    let cfg = estimator_of(&spec, &a.estimator)?;
    let field = sweep_grid(&spec, &grid, &cfg)?;
    Ok((spec, field))
}

fn field_summary(f: &LyapunovField) -> String {
    let vals: Vec<f64> = f.values.iter().flatten().map(|e| e.value).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("cells={} missing={} min_L={} max_L={} max_stderr={}", f.grid.len(), f.meta.missing_cells, sig12(lo), sig12(hi), sig12(f.max_stderr()))
}

fn lyap_map(a: &MapArgs, text: Option<&str>, cmd: &Command) -> Run {
    let dir = require_out(&a.out)?;
    let (spec, field) = sweep(a, text)?;
    field.write(dir.join("L.csv"))?;
    println!("{}", field_summary(&field));
    write_manifest(&dir, &spec, cmd, json!({ "estimator": field.meta.config }))
}

fn bif_map(a: &BifArgs, text: Option<&str>, cmd: &Command) -> Run {
    let dir = require_out(&a.map.out)?;
    if !(a.threshold_factor > 1.0) {
        return Err(usage("--threshold-factor", format!("must exceed 1 so the threshold is above the noise floor, got {}", a.threshold_factor)));
    }
    let (spec, field) = sweep(&a.map, text)?;
    let density = ddc_density(&field)?;
    let mask = support_mask(&density, a.threshold_factor * density.noise_floor)?;
    field.write(dir.join("L.csv"))?;
    density.write_csv(dir.join("density.csv"))?;
    density.write_pgm(dir.join("density.pgm"))?;
    mask.write_csv(dir.join("mask.csv"))?;
    println!("{}", field_summary(&field));
    println!(
        "noise_floor={} threshold={} masked={} below_floor={}",
        sig12(density.noise_floor),
        sig12(mask.threshold),
        mask.count(),
        density.below_floor()
    );
    write_manifest(&dir, &spec, cmd, json!({ "estimator": field.meta.config }))
}

fn mass(a: &MassArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    positive("--radius", a.radius)?;
    at_least("--n-max", a.n_max, 1)?;
    at_least("--n-theta", a.n_theta, 2)?;
    let rep = mass_growth(&spec, &MassGrowthConfig { center: a.center.0, radius: a.radius, n_max: a.n_max, n_theta: a.n_theta })?;
    for (n, m) in rep.n_list.iter().zip(&rep.m_n) {
        println!("n={n} m_n={}", sig12(*m));
    }
    if let Some(dir) = out_dir(&a.out)? {
        rep.to_table().write(dir.join("report.csv"))?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn cycles(a: &CyclesArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    let list = select_cycles(&spec, a.lambda.0, a.period, None)?;
    for (i, c) in list.iter().enumerate() {
        let pts: Vec<String> = c.points.iter().map(|p| p.iter().map(|z| sigc(*z)).collect::<Vec<_>>().join(";")).collect();
        let ws: Vec<String> = c.multipliers.iter().map(|w| sigc(*w)).collect();
        println!("cycle {i}: class={} points=[{}] multipliers=[{}]", c.class.as_str(), pts.join(" "), ws.join(" "));
    }
    if let Some(dir) = out_dir(&a.out)? {
        write_json(dir.join("tracks.json"), &serde_json::Value::Array(list.iter().map(|c| c.to_json()).collect()))?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn track(a: &TrackArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    at_least("--steps", a.steps, 1)?;
    positive("--eps", a.eps)?;
    let start = select_cycles(&spec, a.from.0, a.period, a.near.as_ref())?;
    let first = start.first().ok_or_else(|| usage("--period", "no cycle to track"))?;
    let path = segment(a.from.0, a.to.0, a.steps);
    let tr = continue_cycle(&spec, first, &path);
    let walks = WalkClouds { n_samples: a.membership_samples, burn_in: 100, seed: a.seed };
    let src: &dyn CloudSource = if a.membership_samples > 0 { &walks } else { &NoClouds };
    let events = crossing_detect(&spec, &tr, src, a.eps);
    println!("reached={}/{} max_displacement_ratio={}", tr.cycles.len(), path.len(), sig12(tr.max_displacement_ratio));
    if let Some(b) = &tr.broken {
        println!("broken at index {} lambda={}: {}", b.index, sigc(b.lambda), b.reason);
    }
    for e in &events {
        let flag = |f: Option<bool>| f.map_or("-".to_string(), |b| b.to_string());
        println!(
            "crossing lambda={} period={} index={} gap={} in_julia_before={} in_julia_after={}",
            sigc(e.lambda),
            e.period,
            e.index,
            sig12(e.gap),
            flag(e.in_julia_before),
            flag(e.in_julia_after)
        );
    }
    if let Some(dir) = out_dir(&a.out)? {
        let v = json!({ "track": tr.to_json(), "events": events.iter().map(|e| e.to_json()).collect::<Vec<_>>() });
        write_json(dir.join("tracks.json"), &v)?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn motion(a: &MotionArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    positive("--rho", a.rho)?;
    positive("--tau", a.tau)?;
    at_least("--lattice-n", a.lattice_n, 1)?;
    at_least("--n-steps", a.n_steps, 1)?;
    let mut cycles = select_cycles(&spec, a.lambda.0, a.period, a.near.as_ref())?;
    if a.near.is_none() {
        cycles.retain(|c| c.is_repelling());
    }
    let cfg = MotionConfig { lattice_n: a.lattice_n, n_steps: a.n_steps, tau: a.tau, ..Default::default() };
    let rec = motion_hyperbolic(&spec, &cycles, a.rho, &cfg)?;
    println!(
        "points={} lattice={} q={} k_prime={} delta={} max_cauchy_ratio={} max_conjugacy_residual={} periods_preserved={} repelling_preserved={}",
        rec.points.len(),
        rec.lattice.len(),
        rec.q,
        sig12(rec.k_prime),
        sig12(rec.delta),
        sig12(rec.max_cauchy_ratio),
        sig12(rec.max_conjugacy_residual),
        rec.periods_preserved,
        rec.repelling_preserved
    );
    if let Some(dir) = out_dir(&a.out)? {
        write_json(dir.join("tracks.json"), &rec.to_json())?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn misiurewicz(a: &MisArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    let grid = grid_of(&a.grid)?;
    at_least("--n0-max", a.n0_max, 1)?;
    at_least("--p-max", a.p_max, 1)?;
    let hits = misiurewicz_scan(&spec, &grid, &MisiurewiczConfig { n0_max: a.n0_max, p_max: a.p_max, ..Default::default() })?;
    let coverage = match a.support_radius {
        Some(r) => {
            positive("--tol", a.tol)?;
            let field = sweep_grid(&spec, &grid, &EstimatorConfig::przytycki(a.tol))?;
            let density = ddc_density(&field)?;
            let mask = support_mask(&density, density.default_threshold())?;
            Some(misiurewicz_in_support(&hits, &density, &mask, r).covered)
        }
        None => None,
    };
    for (i, h) in hits.iter().enumerate() {
        let cov = coverage.as_ref().map_or(String::new(), |c| format!(" covered={}", c[i]));
        println!("hit lambda={} n0={} period={} residual={} transversality={}{cov}", sigc(h.lambda), h.n0, h.period, sig12(h.residual), sig12(h.transversality));
    }
    println!("hits={}", hits.len());
    if let Some(dir) = out_dir(&a.out)? {
        write_hits(dir.join("hits.json"), &hits)?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}

fn contraction(a: &ContractionArgs, text: Option<&str>, cmd: &Command) -> Run {
    let spec = load_family(&a.family, text)?;
    positive("--radius", a.radius)?;
    positive("--probe-radius", a.probe_radius)?;
    at_least("--lattice-n", a.lattice_n, 1)?;
    at_least("--depth", a.depth, 2)?;
    at_least("--p", a.p, 1)?;
    at_least("--probes", a.probes, 1)?;
    let cfg = ContractionConfig {
        center: a.center.0,
        radius: a.radius,
        lattice_n: a.lattice_n,
        depth: a.depth,
        p: a.p,
        probes: a.probes,
        probe_radius: a.probe_radius,
        tau: a.tau,
        eps: a.eps,
        burn_in: a.burn_in,
        seed: a.seed,
    };
    let rep = contraction_report(&spec, &cfg)?;
    for r in &rep.rows {
        println!("n={} r_p={} bound={} measured_lip={}", r.n, sig12(r.r_p), sig12(r.bound), sig12(r.measured_lip));
    }
    println!("slope_a={} bound_holds={} orbit_seed={} resamples={}", sig12(rep.slope_a), rep.bound_holds, rep.orbit_seed, rep.resamples);
    if let Some(dir) = out_dir(&a.out)? {
        rep.to_table().write(dir.join("report.csv"))?;
        write_manifest(&dir, &spec, cmd, serde_json::Value::Null)?;
    }
    Ok(())
}
