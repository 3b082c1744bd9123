use super::{BifurcationDensity, SupportMask};
use crate::cvec::{CVec, C64, ONE};
use crate::error::{Error, Result};
use crate::family::{critical_points, FamilySpec};
use crate::grid::ParameterGrid;
use crate::io::{json12, read_json, write_json};
use crate::motion::{find_cycles, ChartDynamics};
use rayon::prelude::*;
use serde_json::{json, Value};

pub const HIT_RESIDUAL: f64 = 1e-9;
pub const MIN_TRANSVERSALITY: f64 = 1e-6;
pub const REPELLING_MARGIN: f64 = 1e-6;
pub const DEDUP_RADIUS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct MisiurewiczConfig {
    pub n0_max: usize,
    pub p_max: usize,
    pub max_newton: usize,
}

impl Default for MisiurewiczConfig {
    fn default() -> Self {
        MisiurewiczConfig { n0_max: 3, p_max: 2, max_newton: 60 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MisiurewiczHit {
    pub lambda: C64,
    pub n0: usize,
    pub period: usize,
    /// `|f^{n0}(c(λ*)) − γ(λ*)|`.
    pub residual: f64,
    /// `|h′(λ*)|` for `h(λ) = f^{n0}_λ(c(λ)) − γ(λ)`.
    pub transversality: f64,
}

impl MisiurewiczHit {
    pub fn to_json(&self) -> Value {
        json!({
            "re": json12(self.lambda.re),
            "im": json12(self.lambda.im),
            "n0": self.n0,
            "period": self.period,
            "residual": json12(self.residual),
            "transversality": json12(self.transversality),
        })
    }

    fn from_json(v: &Value) -> Option<Self> {
        let f = |k: &str| v.get(k)?.as_f64();
        let u = |k: &str| v.get(k)?.as_u64().map(|x| x as usize);
        Some(MisiurewiczHit {
            lambda: C64::new(f("re")?, f("im")?),
            n0: u("n0")?,
            period: u("period")?,
            residual: f("residual")?,
            transversality: f("transversality")?,
        })
    }
}

pub fn hits_to_json(hits: &[MisiurewiczHit]) -> Value {
    Value::Array(hits.iter().map(|h| h.to_json()).collect())
}

pub fn write_hits(path: impl AsRef<std::path::Path>, hits: &[MisiurewiczHit]) -> Result<()> {
    write_json(path, &hits_to_json(hits))
}

pub fn read_hits(path: impl AsRef<std::path::Path>) -> Result<Vec<MisiurewiczHit>> {
    let v: Value = read_json(path)?;
    v.as_array()
        .ok_or(Error::Parse { line: 1, msg: "expected a JSON array of hits".into() })?
        .iter()
        .map(|h| MisiurewiczHit::from_json(h).ok_or(Error::Parse { line: 1, msg: "malformed hit record".into() }))
        .collect()
}

/// Critical point near `c` at `lambda` with its λ-derivative, by matching
/// roots at `lambda ± h`.
fn critical_branch(spec: &FamilySpec, lambda: C64, c: C64) -> Option<(C64, C64)> {
    let nearest = |l: C64, z: C64| -> Option<C64> {
        let loc = critical_points(spec, l, 0, 0.0, 0).ok()?;
        loc.finite_points().iter().copied().min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
    };
    let c0 = nearest(lambda, c)?;
    let h = 1e-5;
    let dc = (nearest(lambda + h, c0)? - nearest(lambda - h, c0)?) / (2.0 * h);
    Some((c0, dc))
}

/// Newton in λ on `h(λ) = f^{n0}_λ(c(λ)) − γ(λ)` from `(l0, c0, g0)`.
fn solve_hit(spec: &FamilySpec, l0: C64, c0: C64, g0: C64, n0: usize, p: usize, cfg: &MisiurewiczConfig, window: f64) -> Option<MisiurewiczHit> {
    let (mut l, mut c, mut g) = (l0, c0, g0);
    for it in 0..=cfg.max_newton {
        let dynamics = ChartDynamics::new(spec, l);
        let (cc, dc) = critical_branch(spec, l, c)?;
        c = cc;
        let gz = dynamics.polish_periodic(&CVec::one(g), p).ok()?;
        g = gz[0];
        // γ′ = ∂_λ f^p / (1 − (f^p)′)
        let (_, a, v) = dynamics.iterate_full(&gz, p).ok()?;
        let dg = v[0] / (ONE - a.get(0, 0));
        // x = f^{n0}(c), D = d/dλ of it
        let mut x = CVec::one(c);
        let mut d = dc;
        for _ in 0..n0 {
            let (fx, df, dl) = dynamics.step_full(&x).ok()?;
            d = df.get(0, 0) * d + dl[0];
            x = fx;
        }
        let h = x[0] - g;
        let dh = d - dg;
        if !h.is_finite() || !dh.is_finite() || dh.norm() < MIN_TRANSVERSALITY {
            return None;
        }
        if h.norm() <= HIT_RESIDUAL && (it > 0 || h.norm() <= 1e-14) {
            let cyc = dynamics.cycle_through(l, &gz, p).ok()?;
            if dynamics.minimal_period(&gz, p).ok()? != p || cyc.min_multiplier_modulus() < 1.0 + REPELLING_MARGIN {
                return None;
            }
            // one more step must not move λ appreciably
            if (h / dh).norm() <= 1e-12 * (1.0 + l.norm()) || it == cfg.max_newton {
                return Some(MisiurewiczHit { lambda: l, n0, period: p, residual: h.norm(), transversality: dh.norm() });
            }
        }
        let mut step = h / dh;
        if step.norm() > window {
            step *= window / step.norm();
        }
        l -= step;
        if (l - l0).norm() > 4.0 * window {
            return None;
        }
    }
    None
}

/// Misiurewicz parameters near the grid: from every cell, every finite
/// critical point, every `n0 ≤ n0_max` and every point of every repelling
/// cycle of exact period `p ≤ p_max`, Newton in λ on the collision
/// `f^{n0}_λ(c(λ)) = γ(λ)`. A root is kept when the residual is at most
/// 1e-9, the cycle is still repelling there and the collision is transverse.
/// Hits within 1e-8 of each other are merged, keeping the smallest `n0` and
/// period. Results are sorted by real then imaginary part.
pub fn misiurewicz_scan(spec: &FamilySpec, grid: &ParameterGrid, cfg: &MisiurewiczConfig) -> Result<Vec<MisiurewiczHit>> {
    if spec.k() != 1 {
        return Err(Error::UnsupportedFamily("the Misiurewicz scan needs exact cycles on P^1".into()));
    }
    let window = grid.dx().max(grid.dy());
    let starts: Vec<C64> = grid.cells().map(|(_, _, l)| l).collect();
    let found: Vec<Vec<MisiurewiczHit>> = starts
        .par_iter()
        .map(|&l0| {
            let mut out = Vec::new();
            let Ok(loc) = critical_points(spec, l0, 0, 0.0, 0) else { return out };
            for p in 1..=cfg.p_max {
                let Ok(set) = find_cycles(spec, l0, p) else { continue };
                for cyc in set.cycles.iter().filter(|c| c.is_repelling()) {
                    for g in &cyc.points {
                        for &c in loc.finite_points() {
                            for n0 in 1..=cfg.n0_max {
                                if let Some(hit) = solve_hit(spec, l0, c, g[0], n0, p, cfg, window) {
                                    out.push(hit);
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut all: Vec<MisiurewiczHit> = found.into_iter().flatten().collect();
    all.sort_by(|a, b| (a.n0, a.period).cmp(&(b.n0, b.period)).then(a.lambda.re.total_cmp(&b.lambda.re)).then(a.lambda.im.total_cmp(&b.lambda.im)));
    let mut hits: Vec<MisiurewiczHit> = Vec::new();
    for h in all {
        if !hits.iter().any(|k| (k.lambda - h.lambda).norm() <= DEDUP_RADIUS) {
            hits.push(h);
        }
    }
    hits.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
    Ok(hits)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub covered: Vec<bool>,
    pub all_covered: bool,
}

/// For each hit, whether the support mask has a marked cell within
/// `radius_cells` of the cell containing it. Hits outside the density grid
/// count as uncovered.
pub fn misiurewicz_in_support(hits: &[MisiurewiczHit], density: &BifurcationDensity, mask: &SupportMask, radius_cells: usize) -> CoverageReport {
    let g = density.grid;
    let inside = |l: C64| {
        let off = l - g.center;
        off.re.abs() <= 0.5 * g.width + 0.5 * g.dx() && off.im.abs() <= 0.5 * g.height + 0.5 * g.dy()
    };
    let covered: Vec<bool> = hits
        .iter()
        .map(|h| {
            if !inside(h.lambda) {
                return false;
            }
            let (i, j) = g.nearest(h.lambda);
            mask.near(i, j, radius_cells)
        })
        .collect();
    let all_covered = covered.iter().all(|c| *c);
    CoverageReport { covered, all_covered }
}
