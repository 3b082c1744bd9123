use crate::cvec::{CVec, C64};
use crate::error::{Error, Result};
use crate::family::{binary_form, FamilySpec};
use crate::io::{fmt12, Table};
use crate::poly::{forward_difference, horner, horner_with_derivative};
use crate::sampler::{all_preimages, backward_walk};
use crate::seeds::rng;
use rand::Rng;

/// Preimages closer than this make the followed branch ambiguous.
pub const BRANCH_SEPARATION: f64 = 1e-9;
const MAX_RESAMPLES: u64 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionConfig {
    pub center: C64,
    /// Radius of the parameter window `U_0`.
    pub radius: f64,
    /// Side of the square λ-lattice (points outside the disc dropped).
    pub lattice_n: usize,
    /// Number of depths `n`; the orbit has `depth · p` backward steps.
    pub depth: usize,
    pub p: usize,
    pub probes: usize,
    pub probe_radius: f64,
    pub tau: f64,
    pub eps: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        ContractionConfig {
            center: C64::new(0.0, 0.0),
            radius: 0.01,
            lattice_n: 3,
            depth: 30,
            p: 1,
            probes: 50,
            probe_radius: 1e-7,
            tau: 0.1,
            eps: 0.1,
            burn_in: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionRow {
    pub n: usize,
    pub r_p: f64,
    /// Product over depths `1..=n` of `e^{τ+ε/3} r_p^{-1/2}`.
    pub bound: f64,
    pub measured_lip: f64,
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// Fitted decay exponent per backward step: `log Lip ≈ c − A·n·p`.
    pub slope_a: f64,
    pub intercept: f64,
    pub bound_holds: bool,
    /// Seed of the accepted orbit (`seed + resamples`).
    pub orbit_seed: u64,
    pub resamples: u64,
    pub orbit: Vec<C64>,
}

impl ContractionReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "r_p", "bound", "measured_lip"]);
        for r in &self.rows {
            t.push(vec![r.n.to_string(), fmt12(r.r_p), fmt12(r.bound), fmt12(r.measured_lip)]);
        }
        t
    }
}

/// `f_λ` on the chart of P^1 as numerator and denominator polynomials, so
/// that differences `f(z+h) − f(z)` can be formed without cancellation.
struct ChartRational {
    num: Vec<C64>,
    den: Vec<C64>,
}

impl ChartRational {
    fn new(spec: &FamilySpec, lambda: C64) -> Self {
        let lift = spec.at(lambda);
        ChartRational { num: binary_form(&lift, 0), den: binary_form(&lift, 1) }
    }

    fn eval(&self, z: C64) -> (C64, C64) {
        let (n, dn) = horner_with_derivative(&self.num, z);
        let (q, dq) = horner_with_derivative(&self.den, z);
        (n / q, (dn * q - n * dq) / (q * q))
    }

    fn difference(&self, z: C64, h: C64) -> C64 {
        let dn = forward_difference(&self.num, z, h);
        let dq = forward_difference(&self.den, z, h);
        let q0 = horner(&self.den, z);
        let n0 = horner(&self.num, z);
        (dn * q0 - n0 * dq) / ((q0 + dq) * q0)
    }

    /// Offset `e` with `f(z+e) − f(z) = target`, Newton from `target / f′(z)`.
    fn pull_offset(&self, z: C64, target: C64) -> Option<C64> {
        let (_, d) = self.eval(z);
        let mut e = target / d;
        for _ in 0..50 {
            let r = self.difference(z, e) - target;
            let (_, de) = self.eval(z + e);
            let step = r / de;
            e -= step;
            if !e.is_finite() {
                return None;
            }
            if step.norm() <= 1e-15 * e.norm() {
                break;
            }
        }
        ((self.difference(z, e) - target).norm() <= 1e-10 * target.norm()).then_some(e)
    }
}

fn lattice(center: C64, radius: f64, n: usize) -> Vec<C64> {
    let mut out = vec![center];
    if n > 1 {
        for a in 0..n {
            for b in 0..n {
                let t = |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                let off = C64::new(t(a), t(b));
                if off.norm() > 0.0 && off.norm() <= 1.0 + 1e-12 {
                    out.push(center + off * radius);
                }
            }
        }
    }
    out
}

/// Backward orbit at the center parameter: `orbit[j] = γ_{−j}`.
fn sample_orbit(spec: &FamilySpec, cfg: &ContractionConfig, seed: u64) -> Result<Vec<C64>> {
    let start = backward_walk(spec, cfg.center, None, 1, cfg.burn_in, seed)?;
    let mut z = start.points[0][0];
    let mut r = rng(seed ^ 0x5eed_c0de);
    let mut orbit = vec![z];
    for _ in 0..cfg.depth * cfg.p {
        let pre = all_preimages(spec, cfg.center, &CVec::one(z))?;
        let mut sep = f64::INFINITY;
        for i in 0..pre.len() {
            for j in i + 1..pre.len() {
                sep = sep.min(pre[i].dist(&pre[j]));
            }
        }
        if sep < BRANCH_SEPARATION {
            return Err(Error::BranchAmbiguity { separation: sep });
        }
        z = pre[r.gen_range(0..pre.len())][0];
        orbit.push(z);
    }
    Ok(orbit)
}

/// Contraction of the inverse branches of `f^p` along a backward orbit.
///
/// The orbit is drawn at the center parameter and followed by continuity at
/// the other lattice parameters. At depth `n` the report gives
/// `r_p = inf_λ |D f^p|²` at `γ_{−np}` (the smallest singular value squared),
/// the product bound `Π e^{τ+ε/3} r_p^{-1/2}`, and the largest ratio of
/// image to source displacement of the composed inverse branch over probe
/// pairs `(γ_0, γ_0 + δ)`. An ambiguous branch resamples the orbit with the
/// next seed, up to ten times.
pub fn contraction_report(spec: &FamilySpec, cfg: &ContractionConfig) -> Result<ContractionReport> {
    if spec.k() != 1 {
        return Err(Error::UnsupportedFamily("contraction reports are implemented for P^1".into()));
    }
    if cfg.depth < 2 || cfg.p == 0 || cfg.probes == 0 {
        return Err(Error::InvalidArgument("need depth >= 2, p >= 1 and at least one probe".into()));
    }
    let mut last_err = None;
    for attempt in 0..MAX_RESAMPLES {
        match sample_orbit(spec, cfg, cfg.seed + attempt).and_then(|o| build(spec, cfg, o)) {
            Ok(mut rep) => {
                rep.orbit_seed = cfg.seed + attempt;
                rep.resamples = attempt;
                return Ok(rep);
            }
            Err(e @ Error::BranchAmbiguity { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn build(spec: &FamilySpec, cfg: &ContractionConfig, orbit: Vec<C64>) -> Result<ContractionReport> {
    let steps = cfg.depth * cfg.p;
    let center_map = ChartRational::new(spec, cfg.center);

    // r_p: follow the orbit at each lattice parameter
    let mut r_p = vec![f64::INFINITY; cfg.depth + 1];
    for l in lattice(cfg.center, cfg.radius, cfg.lattice_n) {
        let map = ChartRational::new(spec, l);
        let mut path = vec![orbit[0]];
        for j in 1..=steps {
            // the preimage at λ closest to the center branch; it must be
            // clearly closer than every other preimage
            let pre = all_preimages(spec, l, &CVec::one(path[j - 1]))?;
            let mut dist: Vec<(f64, C64)> = pre.iter().map(|p| ((p[0] - orbit[j]).norm(), p[0])).collect();
            dist.sort_by(|x, y| x.0.total_cmp(&y.0));
            let u = dist[0].1;
            if dist.len() > 1 && dist[1].0 < 3.0 * dist[0].0 {
                return Err(Error::BranchAmbiguity { separation: (dist[1].1 - u).norm() });
            }
            path.push(u);
        }
        for n in 1..=cfg.depth {
            let mut der = C64::new(1.0, 0.0);
            for s in 0..cfg.p {
                der *= map.eval(path[n * cfg.p - s]).1;
            }
            r_p[n] = r_p[n].min(der.norm_sqr());
        }
    }

    // probes pulled back as offsets
    let mut r = rng(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xc0ff_ee);
    let mut lip = vec![0.0f64; cfg.depth + 1];
    for _ in 0..cfg.probes {
        let delta = C64::from_polar(cfg.probe_radius * (0.5 + 0.5 * r.gen::<f64>()), std::f64::consts::TAU * r.gen::<f64>());
        let mut e = delta;
        for j in 1..=steps {
            e = center_map.pull_offset(orbit[j], e).ok_or(Error::BranchAmbiguity { separation: e.norm() })?;
            if j % cfg.p == 0 {
                let n = j / cfg.p;
                lip[n] = lip[n].max(e.norm() / delta.norm());
            }
        }
    }

    let factor = (cfg.tau + cfg.eps / 3.0).exp();
    let mut bound = 1.0;
    let mut rows = Vec::with_capacity(cfg.depth);
    for n in 1..=cfg.depth {
        bound *= factor / r_p[n].sqrt();
        rows.push(ContractionRow { n, r_p: r_p[n], bound, measured_lip: lip[n] });
    }
    let bound_holds = rows.iter().all(|row| row.measured_lip <= row.bound);

    // least squares of log Lip against the number of backward steps
    let xs: Vec<f64> = rows.iter().map(|row| (row.n * cfg.p) as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|row| row.measured_lip.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;

    Ok(ContractionReport { rows, slope_a: -slope, intercept: my - slope * mx, bound_holds, orbit_seed: cfg.seed, resamples: 0, orbit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{constant_quadratic, quadratic_family, square_map_p1};

    #[test]
    fn squaring_on_the_circle_halves_each_step() {
        let cfg = ContractionConfig { depth: 20, ..Default::default() };
        let rep = contraction_report(&square_map_p1(), &cfg).unwrap();
        for (j, z) in rep.orbit.iter().enumerate().take(5) {
            assert!((z.norm() - 1.0).abs() < 1e-9, "{j} {z}");
        }
        for row in &rep.rows {
            assert!((row.r_p - 4.0).abs() < 1e-8, "{row:?}");
            let exact = 0.5f64.powi(row.n as i32);
            assert!((row.measured_lip / exact - 1.0).abs() < 1e-5, "{row:?}");
            assert!(row.measured_lip <= row.bound);
        }
        assert!((rep.slope_a - std::f64::consts::LN_2).abs() < 1e-5);
        assert!(rep.bound_holds);
    }

    #[test]
    fn chebyshev_orbit_contracts() {
        let cfg = ContractionConfig { center: C64::new(-2.0, 0.0), seed: 7, ..Default::default() };
        let rep = contraction_report(&quadratic_family(), &cfg).unwrap();
        assert!(rep.bound_holds);
        assert!(rep.slope_a > 0.2, "A = {}", rep.slope_a);
    }

    #[test]
    fn seeded_runs_are_unambiguous_and_reproducible() {
        let f = constant_quadratic(C64::new(-2.0, 0.0));
        for seed in 0..10 {
            let cfg = ContractionConfig { seed, depth: 15, ..Default::default() };
            let a = contraction_report(&f, &cfg).unwrap();
            assert_eq!(a.resamples, 0);
            let b = contraction_report(&f, &cfg).unwrap();
            assert_eq!(a.rows, b.rows);
        }
    }

    #[test]
    fn table_has_contract_header() {
        let rep = contraction_report(&square_map_p1(), &ContractionConfig { depth: 3, ..Default::default() }).unwrap();
        let t = rep.to_table();
        assert_eq!(t.header, vec!["n", "r_p", "bound", "measured_lip"]);
        assert_eq!(t.rows.len(), 3);
    }
}
