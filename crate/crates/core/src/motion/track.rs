use super::{ChartDynamics, Cycle};
use crate::cvec::{CMat, CVec, C64};
use crate::family::FamilySpec;
use crate::grid::ParameterGrid;
use crate::io::{json12, json_complex};
use crate::sampler::{backward_walk, julia_membership, MeasureCloud};
use serde_json::{json, Value};

/// Smallest sub-step before a track is declared broken.
pub const STEP_FLOOR: f64 = 1e-12;
/// A multiplier with `||w| − 1|` below this counts as neutral.
const NEUTRAL_BAND: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackBroken {
    /// Index of the path point that could not be reached.
    pub index: usize,
    /// Parameter of the failed attempt.
    pub lambda: C64,
    pub reason: String,
}

/// A cycle continued along a path. `cycles[i]` sits at `path[i]` for every
/// reached point; the track stops at the first failure.
#[derive(Clone, Debug)]
pub struct CycleTrack {
    pub period: usize,
    pub path: Vec<C64>,
    pub cycles: Vec<Cycle>,
    pub broken: Option<TrackBroken>,
    /// Largest step-to-step displacement of the first cycle point.
    pub max_displacement: f64,
    /// Largest displacement divided by `|Δλ|` times the local derivative
    /// estimate `|dz/dλ|`; the continuity certificate asks for at most 10.
    pub max_displacement_ratio: f64,
}

impl CycleTrack {
    pub fn to_json(&self) -> Value {
        json!({
            "period": self.period,
            "cycles": self.cycles.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "broken": self.broken.as_ref().map(|b| json!({"index": b.index, "lambda": json_complex(b.lambda), "reason": b.reason})),
            "max_displacement": json12(self.max_displacement),
            "max_displacement_ratio": json12(self.max_displacement_ratio),
        })
    }
}

/// `dz/dλ = (I − D f^p)^{-1} ∂_λ f^p` at a periodic point.
fn point_velocity(d: &ChartDynamics, z: &CVec, p: usize) -> Option<CVec> {
    let (_, a, v) = d.iterate_full(z, p).ok()?;
    let mut m = CMat::identity(d.k());
    for i in 0..d.k() {
        for j in 0..d.k() {
            m.set(i, j, m.get(i, j) - a.get(i, j));
        }
    }
    m.solve(&v).filter(|s| s.is_finite())
}

fn sides(c: &Cycle) -> Vec<i8> {
    c.multipliers
        .iter()
        .map(|w| {
            let e = w.norm() - 1.0;
            if e.abs() <= NEUTRAL_BAND {
                0
            } else if e > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// One predictor–corrector step of the first cycle point.
fn advance(spec: &FamilySpec, from: &Cycle, to: C64) -> std::result::Result<(Cycle, f64, f64), &'static str> {
    let p = from.period;
    let d0 = ChartDynamics::new(spec, from.lambda);
    let v0 = point_velocity(&d0, &from.points[0], p).ok_or("singular continuation")?;
    let h = to - from.lambda;
    let pred = from.points[0].add(&v0.scale(h));
    let d1 = ChartDynamics::new(spec, to);
    let z = d1.polish_periodic(&pred, p).map_err(|_| "corrector failed")?;
    let cyc = d1.cycle_through(to, &z, p).map_err(|_| "chart overflow")?;
    let v1 = point_velocity(&d1, &z, p).ok_or("singular continuation")?;
    let disp = z.dist(&from.points[0]);
    let scale = h.norm() * v0.norm().max(v1.norm()).max(1e-3);
    let ratio = disp / scale;
    if ratio > 10.0 {
        return Err("discontinuous jump");
    }
    Ok((cyc, disp, ratio))
}

/// Continue `cycle` along `path` (which should start at `cycle.lambda`) by
/// predictor–corrector Newton steps with step halving. The track stops with a
/// `TrackBroken` marker when the step falls below 1e-12 or a multiplier
/// reaches modulus one; `crossing_detect` picks up from there.
pub fn continue_cycle(spec: &FamilySpec, cycle: &Cycle, path: &[C64]) -> CycleTrack {
    let mut track = CycleTrack {
        period: cycle.period,
        path: path.to_vec(),
        cycles: Vec::with_capacity(path.len()),
        broken: None,
        max_displacement: 0.0,
        max_displacement_ratio: 0.0,
    };
    let mut cur = cycle.clone();
    let start = if path.first().is_some_and(|l| (*l - cycle.lambda).norm() <= 1e-15) {
        track.cycles.push(cycle.clone());
        1
    } else {
        0
    };
    for (idx, &target) in path.iter().enumerate().skip(start) {
        let mut step_to = target;
        loop {
            match advance(spec, &cur, step_to) {
                Ok((next, disp, ratio)) => {
                    let (a, b) = (sides(&cur), sides(&next));
                    if a.iter().zip(&b).any(|(x, y)| x != y) || b.contains(&0) {
                        track.broken = Some(TrackBroken { index: idx, lambda: step_to, reason: "multiplier reached modulus one".into() });
                        return track;
                    }
                    track.max_displacement = track.max_displacement.max(disp);
                    track.max_displacement_ratio = track.max_displacement_ratio.max(ratio);
                    cur = next;
                    if (step_to - target).norm() == 0.0 {
                        break;
                    }
                    step_to = target;
                }
                Err(reason) => {
                    let h = (step_to - cur.lambda) * 0.5;
                    if h.norm() < STEP_FLOOR {
                        track.broken = Some(TrackBroken { index: idx, lambda: step_to, reason: format!("step floor reached ({reason})") });
                        return track;
                    }
                    step_to = cur.lambda + h;
                }
            }
        }
        track.cycles.push(cur.clone());
    }
    track
}

/// Continue a cycle to every cell of a grid, breadth-first from the cell
/// nearest to its parameter. Cells that cannot be reached stay `None`.
pub fn continue_cycle_grid(spec: &FamilySpec, cycle: &Cycle, grid: &ParameterGrid) -> Vec<Option<Cycle>> {
    let mut out: Vec<Option<Cycle>> = vec![None; grid.len()];
    let (i0, j0) = grid.nearest(cycle.lambda);
    let first = continue_cycle(spec, cycle, &[cycle.lambda, grid.cell(i0, j0)]);
    let Some(c) = first.cycles.last().filter(|_| first.broken.is_none()) else { return out };
    out[grid.index(i0, j0)] = Some(c.clone());
    let mut queue = std::collections::VecDeque::from([(i0, j0)]);
    while let Some((i, j)) = queue.pop_front() {
        let here = out[grid.index(i, j)].clone().expect("queued cells are filled");
        let mut nb = Vec::new();
        if i > 0 {
            nb.push((i - 1, j));
        }
        if i + 1 < grid.nx {
            nb.push((i + 1, j));
        }
        if j > 0 {
            nb.push((i, j - 1));
        }
        if j + 1 < grid.ny {
            nb.push((i, j + 1));
        }
        for (a, b) in nb {
            if out[grid.index(a, b)].is_some() {
                continue;
            }
            let t = continue_cycle(spec, &here, &[here.lambda, grid.cell(a, b)]);
            if t.broken.is_none() {
                out[grid.index(a, b)] = t.cycles.last().cloned();
                queue.push_back((a, b));
            }
        }
    }
    out
}

/// Source of equilibrium-measure samples for Julia-membership flags.
pub trait CloudSource {
    fn cloud(&self, spec: &FamilySpec, lambda: C64) -> Option<MeasureCloud>;
}

/// No membership flags.
pub struct NoClouds;

impl CloudSource for NoClouds {
    fn cloud(&self, _: &FamilySpec, _: C64) -> Option<MeasureCloud> {
        None
    }
}

/// Fresh backward-walk clouds.
pub struct WalkClouds {
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl CloudSource for WalkClouds {
    fn cloud(&self, spec: &FamilySpec, lambda: C64) -> Option<MeasureCloud> {
        backward_walk(spec, lambda, None, self.n_samples, self.burn_in, self.seed).ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingEvent {
    pub lambda: C64,
    pub period: usize,
    /// Index of the multiplier (sorted by modulus) that crossed.
    pub index: usize,
    /// `|w_j|` at the two ends of the final bracket.
    pub modulus_before: f64,
    pub modulus_after: f64,
    /// `|w_j(λ*)| − 1` at the reported parameter.
    pub gap: f64,
    /// Cloud membership of the cycle point one path step before and after.
    pub in_julia_before: Option<bool>,
    pub in_julia_after: Option<bool>,
}

impl CrossingEvent {
    pub fn to_json(&self) -> Value {
        json!({
            "lambda": json_complex(self.lambda),
            "period": self.period,
            "index": self.index,
            "modulus_before": json12(self.modulus_before),
            "modulus_after": json12(self.modulus_after),
            "gap": json12(self.gap),
            "in_julia_before": self.in_julia_before,
            "in_julia_after": self.in_julia_after,
        })
    }
}

/// The cycle of period `p` at `lambda` closest to `near`: exact enumeration
/// on P^1, Newton from `near` on P^2.
fn nearest_cycle(spec: &FamilySpec, lambda: C64, p: usize, near: &CVec) -> Option<Cycle> {
    let d = ChartDynamics::new(spec, lambda);
    if spec.k() == 1 {
        let set = super::find_cycles(spec, lambda, p).ok()?;
        let mut best: Option<(f64, Cycle)> = None;
        for c in set.cycles {
            for (s, x) in c.points.iter().enumerate() {
                let dist = x.dist(near);
                if best.as_ref().is_none_or(|(b, _)| dist < *b) {
                    let mut c2 = c.clone();
                    c2.points.rotate_left(s);
                    best = Some((dist, c2));
                }
            }
        }
        best.map(|(_, c)| c)
    } else {
        let z = d.polish_periodic(near, p).ok()?;
        d.cycle_through(lambda, &z, p).ok()
    }
}

fn membership(spec: &FamilySpec, src: &dyn CloudSource, lambda: C64, p: usize, near: &CVec, eps: f64) -> Option<bool> {
    let cyc = nearest_cycle(spec, lambda, p, near)?;
    let cloud = src.cloud(spec, lambda)?;
    Some(julia_membership(&cloud, &cyc.points[0], eps))
}

/// Locate parameters where a multiplier of the tracked cycle crosses the
/// unit circle: between consecutive track points whose multiplier moduli lie
/// on different sides of 1, and across the break of a broken track. The
/// bracket is refined by bisection until `||w_j| − 1| ≤ 1e-10` or it cannot
/// shrink further; the endpoint closer to modulus one is reported.
pub fn crossing_detect(spec: &FamilySpec, track: &CycleTrack, clouds: &dyn CloudSource, eps: f64) -> Vec<CrossingEvent> {
    let p = track.period;
    let mut brackets: Vec<(Cycle, C64)> = Vec::new();
    for w in track.cycles.windows(2) {
        if sides(&w[0]) != sides(&w[1]) {
            brackets.push((w[0].clone(), w[1].lambda));
        }
    }
    if let (Some(b), Some(last)) = (&track.broken, track.cycles.last()) {
        // the break may be at a sub-step; bisect towards the next path point
        let target = track.path.get(b.index).copied().unwrap_or(b.lambda);
        brackets.push((last.clone(), target));
    }
    let step = if track.path.len() > 1 { (track.path[1] - track.path[0]).norm() } else { 0.0 };
    let mut out = Vec::new();
    for (lo_cycle, hi_lambda) in brackets {
        if let Some(ev) = bisect(spec, &lo_cycle, hi_lambda, p) {
            let dir = (hi_lambda - lo_cycle.lambda) / (hi_lambda - lo_cycle.lambda).norm();
            let near = lo_cycle.points[0];
            let before = membership(spec, clouds, ev.lambda - dir * step, p, &near, eps);
            let after = membership(spec, clouds, ev.lambda + dir * step, p, &near, eps);
            out.push(CrossingEvent { in_julia_before: before, in_julia_after: after, ..ev });
        }
    }
    out
}

fn bisect(spec: &FamilySpec, lo_cycle: &Cycle, hi: C64, p: usize) -> Option<CrossingEvent> {
    let s_lo = sides(lo_cycle);
    let hi_cycle = nearest_cycle(spec, hi, p, &lo_cycle.points[0]);
    // which multiplier changes side
    let j = match &hi_cycle {
        Some(h) => (0..s_lo.len()).find(|&j| sides(h)[j] != s_lo[j])?,
        None => 0,
    };
    let modulus = |c: &Cycle| c.multipliers[j].norm();
    let (mut lo, mut hi) = (lo_cycle.clone(), (hi, hi_cycle));
    for _ in 0..200 {
        let lo_gap = (modulus(&lo) - 1.0).abs();
        let hi_gap = hi.1.as_ref().map(|c| (modulus(c) - 1.0).abs()).unwrap_or(0.0);
        if lo_gap <= 1e-10 || hi_gap <= 1e-10 || (hi.0 - lo.lambda).norm() <= 1e-15 * (1.0 + lo.lambda.norm()) {
            break;
        }
        let m = (lo.lambda + hi.0) * 0.5;
        match nearest_cycle(spec, m, p, &lo.points[0]) {
            Some(c) if sides(&c)[j] == s_lo[j] => lo = c,
            other => hi = (m, other),
        }
    }
    let lo_gap = modulus(&lo) - 1.0;
    let hi_mod = hi.1.as_ref().map(modulus).unwrap_or(1.0);
    let (lambda, gap) = if lo_gap.abs() <= (hi_mod - 1.0).abs() { (lo.lambda, lo_gap) } else { (hi.0, hi_mod - 1.0) };
    Some(CrossingEvent {
        lambda,
        period: p,
        index: j,
        modulus_before: modulus(&lo),
        modulus_after: hi_mod,
        gap,
        in_julia_before: None,
        in_julia_after: None,
    })
}

/// Evenly spaced points from `a` to `b` inclusive.
pub fn segment(a: C64, b: C64, n: usize) -> Vec<C64> {
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::{ONE, ZERO};
    use crate::family::{constant_quadratic, quadratic_family};
    use crate::motion::find_cycles;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fixed_point(l: C64, sign: f64) -> C64 {
        (ONE + sign * (ONE - 4.0 * l).sqrt()) / 2.0
    }

    fn cycle_at(l: C64, p: usize, near: C64) -> Cycle {
        find_cycles(&quadratic_family(), l, p)
            .unwrap()
            .cycles
            .into_iter()
            .min_by(|a, b| (a.points[0][0] - near).norm().total_cmp(&(b.points[0][0] - near).norm()))
            .unwrap()
    }

    #[test]
    fn repelling_fixed_point_matches_closed_form() {
        let start = cycle_at(ZERO, 1, ONE);
        let path = segment(ZERO, c(-0.5, 0.0), 50);
        let t = continue_cycle(&quadratic_family(), &start, &path);
        assert!(t.broken.is_none());
        for cy in &t.cycles {
            assert!((cy.points[0][0] - fixed_point(cy.lambda, 1.0)).norm() <= 1e-10);
        }
        assert!(t.max_displacement_ratio <= 10.0);
    }

    #[test]
    fn constant_family_track_is_constant() {
        let f = constant_quadratic(c(-1.0, 0.0));
        let start = find_cycles(&f, ZERO, 1).unwrap().cycles[0].clone();
        let t = continue_cycle(&f, &start, &segment(ZERO, c(0.5, 0.5), 10));
        assert!(t.broken.is_none());
        assert!(t.cycles.iter().all(|cy| cy.points[0] == start.points[0]));
    }

    #[test]
    fn attracting_fixed_point_breaks_near_quarter() {
        let start = cycle_at(c(-0.5, 0.0), 1, fixed_point(c(-0.5, 0.0), -1.0));
        let path = segment(c(-0.5, 0.0), c(0.3, 0.0), 80);
        let t = continue_cycle(&quadratic_family(), &start, &path);
        let b = t.broken.as_ref().expect("track must break");
        assert!((b.lambda.re - 0.25).abs() < 0.02, "{b:?}");
        let ev = crossing_detect(&quadratic_family(), &t, &NoClouds, 1e-3);
        assert_eq!(ev.len(), 1);
        assert!((ev[0].lambda - c(0.25, 0.0)).norm() <= 1e-6, "{:?}", ev[0]);
        assert!(ev[0].gap.abs() <= 1e-8);
    }

    #[test]
    fn two_cycle_crossing_at_minus_three_quarters() {
        let start = cycle_at(c(-1.2, 0.0), 2, ZERO);
        let path = segment(c(-1.2, 0.0), c(-0.6, 0.0), 60);
        let t = continue_cycle(&quadratic_family(), &start, &path);
        let ev = crossing_detect(&quadratic_family(), &t, &NoClouds, 1e-3);
        assert_eq!(ev.len(), 1, "{t:?}");
        assert!((ev[0].lambda - c(-0.75, 0.0)).norm() <= 1e-6, "{:?}", ev[0]);
    }

    #[test]
    fn no_crossing_when_strongly_repelling() {
        let start = cycle_at(c(-2.0, 0.0), 1, c(2.0, 0.0));
        let t = continue_cycle(&quadratic_family(), &start, &segment(c(-2.0, 0.0), c(-1.5, 0.5), 20));
        assert!(t.cycles.iter().all(|c| c.min_multiplier_modulus() > 1.1));
        assert!(crossing_detect(&quadratic_family(), &t, &NoClouds, 1e-3).is_empty());
    }

    #[test]
    fn membership_flags_at_the_parabolic_crossing() {
        // the attracting fixed point is not in J before 1/4; past it both
        // fixed points are repelling and lie on J. Measure near a weakly
        // repelling point is thin, so the path step is wide.
        let start = cycle_at(c(0.1, 0.0), 1, fixed_point(c(0.1, 0.0), -1.0));
        let t = continue_cycle(&quadratic_family(), &start, &segment(c(0.1, 0.0), c(0.7, 0.0), 4));
        let src = WalkClouds { n_samples: 20_000, burn_in: 100, seed: 4 };
        let ev = crossing_detect(&quadratic_family(), &t, &src, 0.05);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].in_julia_before, Some(false));
        assert_eq!(ev[0].in_julia_after, Some(true));
    }

    #[test]
    fn grid_continuation_fills_a_hyperbolic_window() {
        let start = cycle_at(c(-2.0, 0.0), 1, c(2.0, 0.0));
        let g = ParameterGrid::new(c(-2.0, 0.0), 0.2, 0.2, 5, 5).unwrap();
        let out = continue_cycle_grid(&quadratic_family(), &start, &g);
        for (idx, cy) in out.iter().enumerate() {
            let (i, j) = g.coords(idx);
            let l = g.cell(i, j);
            assert!((cy.as_ref().unwrap().points[0][0] - fixed_point(l, 1.0)).norm() < 1e-10);
        }
    }
}
