use super::{ChartDynamics, Cycle, CycleClass};
use crate::cvec::{CMat, CVec, C64};
use crate::error::{Error, Result};
use crate::family::FamilySpec;
use crate::io::{json12, json_complex};
use rayon::prelude::*;
use serde_json::{json, Value};

/// Below this size a Cauchy difference is rounding noise and the ratio test
/// is skipped.
pub const CAUCHY_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct MotionConfig {
    /// Lattice side; points of the `n × n` square outside the disc are dropped.
    pub lattice_n: usize,
    pub n_steps: usize,
    /// Tube radius around `E_0` where the second derivative is sampled.
    pub tau: f64,
    /// Largest iterate `f^q` tried to reach expansion above 3.
    pub max_iterate: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig { lattice_n: 7, n_steps: 40, tau: 0.1, max_iterate: 8 }
    }
}

#[derive(Clone, Debug)]
pub struct MotionRecord {
    pub base_lambda: C64,
    pub rho: f64,
    /// `E_0`: every point of every supplied cycle.
    pub points: Vec<CVec>,
    pub lattice: Vec<C64>,
    /// `images[l][i] = h_λ(points[i])` at `λ = lattice[l]`.
    pub images: Vec<Vec<CVec>>,
    /// The motion is built from inverse branches of `f^q`.
    pub q: usize,
    pub k_prime: f64,
    pub c2_norm: f64,
    pub delta: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub max_cauchy_ratio: f64,
    pub max_conjugacy_residual: f64,
    pub min_separation: f64,
    pub periods_preserved: bool,
    pub repelling_preserved: bool,
}

impl MotionRecord {
    pub fn image(&self, lambda_index: usize, point_index: usize) -> &CVec {
        &self.images[lambda_index][point_index]
    }

    pub fn to_json(&self) -> Value {
        let pt = |p: &CVec| Value::Array(p.iter().map(|z| json_complex(*z)).collect());
        json!({
            "base_lambda": json_complex(self.base_lambda),
            "rho": json12(self.rho),
            "points": self.points.iter().map(pt).collect::<Vec<_>>(),
            "lattice": self.lattice.iter().map(|l| json_complex(*l)).collect::<Vec<_>>(),
            "images": self.images.iter().map(|row| row.iter().map(pt).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "q": self.q,
            "k_prime": json12(self.k_prime),
            "c2_norm": json12(self.c2_norm),
            "delta": json12(self.delta),
            "tau": json12(self.tau),
            "n_steps": self.n_steps,
            "max_cauchy_ratio": json12(self.max_cauchy_ratio),
            "max_conjugacy_residual": json12(self.max_conjugacy_residual),
            "min_separation": json12(self.min_separation),
            "periods_preserved": self.periods_preserved,
            "repelling_preserved": self.repelling_preserved,
        })
    }
}

fn disc_lattice(center: C64, rho: f64, n: usize) -> Vec<C64> {
    let n = n.max(1);
    let mut out = vec![center];
    for a in 0..n {
        for b in 0..n {
            let t = |i: usize| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 };
            let off = C64::new(t(a), t(b));
            if off.norm() <= 1.0 + 1e-12 && off.norm() > 0.0 {
                out.push(center + off * rho);
            }
        }
    }
    out
}

/// Index of the point of `set` nearest to `z`.
fn nearest(set: &[CVec], z: &CVec) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in set.iter().enumerate() {
        let d = p.dist(z);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Sampled bound on the second derivative of `f^q` over the `tau`-tube around
/// the points, by central differences of the Jacobian.
fn second_derivative_bound(d: &ChartDynamics, pts: &[CVec], q: usize, tau: f64) -> Result<f64> {
    let k = d.k();
    let h = 1e-5;
    let mut sup: f64 = 0.0;
    let angles = 8;
    for p in pts {
        for r in [0.0, 0.5 * tau, tau] {
            for s in 0..angles {
                let th = std::f64::consts::TAU * s as f64 / angles as f64;
                let mut w = *p;
                for c in 0..k {
                    w[c] += C64::from_polar(r, th + c as f64);
                }
                for dir in 0..k {
                    let mut wp = w;
                    let mut wm = w;
                    wp[dir] += C64::new(h, 0.0);
                    wm[dir] -= C64::new(h, 0.0);
                    let (_, ap) = d.iterate_jac(&wp, q)?;
                    let (_, am) = d.iterate_jac(&wm, q)?;
                    let mut m = CMat::zeros(k);
                    for i in 0..k {
                        for j in 0..k {
                            m.set(i, j, (ap.get(i, j) - am.get(i, j)) / (2.0 * h));
                        }
                    }
                    sup = sup.max(m.op_norm());
                }
            }
        }
    }
    Ok(sup)
}

/// Holomorphic motion of the finite hyperbolic set formed by `cycles` over
/// the disc of radius `rho` about their common parameter.
///
/// The motion is the limit of `h_n(λ, z) = g_{λ,z} ∘ h_{n-1}(λ, f_0^q z)`,
/// where `g_{λ,z}` is the inverse branch of `f_λ^q` sending `f_0^q z` near
/// `z`; `q` is the smallest iterate whose smallest singular value on the set
/// exceeds 3. Successive iterates are checked against the geometric bound
/// `(δ/2)(K′−1)^{-n}` and ratio `(K′−1)^{-1}`.
pub fn motion_hyperbolic(spec: &FamilySpec, cycles: &[Cycle], rho: f64, cfg: &MotionConfig) -> Result<MotionRecord> {
    let Some(first) = cycles.first() else {
        return Err(Error::InvalidArgument("motion needs at least one cycle".into()));
    };
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let lambda0 = first.lambda;
    if cycles.iter().any(|c| (c.lambda - lambda0).norm() > 0.0) {
        return Err(Error::InvalidArgument("cycles must share one parameter".into()));
    }
    let points: Vec<CVec> = cycles.iter().flat_map(|c| c.points.iter().copied()).collect();
    let d0 = ChartDynamics::new(spec, lambda0);

    // expansion of f^q on E_0
    let mut chosen = None;
    let mut best_k: f64 = 0.0;
    for q in 1..=cfg.max_iterate.max(1) {
        let mut kq = f64::INFINITY;
        for p in &points {
            let (_, a) = d0.iterate_jac(p, q)?;
            kq = kq.min(a.singular_values().0);
        }
        best_k = best_k.max(kq);
        if kq > 3.0 {
            chosen = Some((q, kq));
            break;
        }
    }
    let (q, k_prime) = chosen.ok_or(Error::ExpansionHypothesisFailed { k_prime: best_k })?;

    // f_0^q permutes E_0
    let mut next = Vec::with_capacity(points.len());
    for p in &points {
        let img = d0.iterate(p, q)?;
        let j = nearest(&points, &img);
        if points[j].dist(&img) > 1e-8 * (1.0 + img.norm()) {
            return Err(Error::InvalidArgument("point set is not invariant".into()));
        }
        next.push(j);
    }

    let lattice = disc_lattice(lambda0, rho, cfg.lattice_n);
    let mut c2: f64 = 0.0;
    for &l in &lattice {
        c2 = c2.max(second_derivative_bound(&ChartDynamics::new(spec, l), &points, q, cfg.tau)?);
    }
    let delta = (1.0 / (1.0 + 2.0 * c2)).min(cfg.tau);
    let contraction = 1.0 / (k_prime - 1.0);

    let per_lambda: Vec<Result<(Vec<CVec>, f64)>> = lattice
        .par_iter()
        .map(|&l| {
            let dl = ChartDynamics::new(spec, l);
            let mut h = points.clone();
            let mut prev_diff: Option<f64> = None;
            let mut max_ratio: f64 = 0.0;
            for n in 0..cfg.n_steps {
                let mut hn = Vec::with_capacity(h.len());
                for (i, z) in points.iter().enumerate() {
                    let (u, _) = dl.solve_iterate(&h[next[i]], z, q, 1e-15)?;
                    hn.push(u);
                }
                let diff = hn.iter().zip(&h).map(|(a, b)| a.dist(b)).fold(0.0, f64::max);
                let bound = 0.5 * delta * contraction.powi(n as i32);
                if diff > bound.max(CAUCHY_FLOOR) {
                    return Err(Error::ContractionViolated { step: n, diff, bound });
                }
                if let Some(pd) = prev_diff.filter(|pd| *pd > CAUCHY_FLOOR) {
                    let ratio = diff / pd;
                    max_ratio = max_ratio.max(ratio);
                    if ratio > contraction {
                        return Err(Error::ContractionViolated { step: n, diff, bound: contraction * pd });
                    }
                }
                prev_diff = Some(diff);
                h = hn;
            }
            Ok((h, max_ratio))
        })
        .collect();

    let mut images = Vec::with_capacity(lattice.len());
    let mut max_cauchy_ratio: f64 = 0.0;
    for r in per_lambda {
        let (h, ratio) = r?;
        images.push(h);
        max_cauchy_ratio = max_cauchy_ratio.max(ratio);
    }

    // a posteriori checks: conjugacy under f itself, injectivity, cycles
    let mut step_next = Vec::with_capacity(points.len());
    for p in &points {
        step_next.push(nearest(&points, &d0.iterate(p, 1)?));
    }
    let mut max_res: f64 = 0.0;
    let mut min_sep = f64::INFINITY;
    let mut periods_preserved = true;
    let mut repelling_preserved = true;
    for (l, h) in lattice.iter().zip(&images) {
        let dl = ChartDynamics::new(spec, *l);
        for (i, hz) in h.iter().enumerate() {
            let fz = dl.iterate(hz, 1)?;
            max_res = max_res.max(fz.dist(&h[step_next[i]]));
            for hw in &h[i + 1..] {
                min_sep = min_sep.min(hz.dist(hw));
            }
        }
        let mut offset = 0;
        for c in cycles {
            let hz = &h[offset];
            offset += c.points.len();
            if dl.minimal_period(hz, c.period)? != c.period {
                periods_preserved = false;
            }
            let moved = dl.cycle_through(*l, hz, c.period)?;
            if c.class == CycleClass::Repelling && !moved.is_repelling() {
                repelling_preserved = false;
            }
        }
    }

    Ok(MotionRecord {
        base_lambda: lambda0,
        rho,
        points,
        lattice,
        images,
        q,
        k_prime,
        c2_norm: c2,
        delta,
        tau: cfg.tau,
        n_steps: cfg.n_steps,
        max_cauchy_ratio,
        max_conjugacy_residual: max_res,
        min_separation: min_sep,
        periods_preserved,
        repelling_preserved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::ONE;
    use crate::family::{constant_quadratic, quadratic_family};
    use crate::motion::find_cycles;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fixed_point_two_follows_closed_form() {
        let l0 = c(-2.0, 0.0);
        let set = find_cycles(&quadratic_family(), l0, 1).unwrap();
        let two = set.cycles.into_iter().find(|cy| (cy.points[0][0] - 2.0).norm() < 1e-9).unwrap();
        let rec = motion_hyperbolic(&quadratic_family(), &[two], 0.01, &MotionConfig::default()).unwrap();
        assert_eq!(rec.q, 1);
        assert!((rec.k_prime - 4.0).abs() < 1e-9);
        for (l, h) in rec.lattice.iter().zip(&rec.images) {
            let exact = (ONE + (ONE - 4.0 * l).sqrt()) / 2.0;
            assert!((h[0][0] - exact).norm() <= 1e-10, "{l} {:?}", h[0]);
        }
        assert!(rec.max_cauchy_ratio <= 1.0 / (rec.k_prime - 1.0));
        assert!(rec.max_conjugacy_residual <= 1e-8);
        assert!(rec.repelling_preserved && rec.periods_preserved);
    }

    #[test]
    fn two_cycle_at_minus_one_point_eight() {
        let l0 = c(-1.8, 0.0);
        let set = find_cycles(&quadratic_family(), l0, 2).unwrap();
        assert_eq!(set.cycles.len(), 1);
        let rec = motion_hyperbolic(&quadratic_family(), &set.cycles, 0.005, &MotionConfig::default()).unwrap();
        assert_eq!(rec.q, 2);
        assert!((rec.k_prime - 3.2).abs() < 1e-9);
        assert!(rec.periods_preserved && rec.repelling_preserved);
        assert!(rec.min_separation > 0.0);
        assert!(rec.max_conjugacy_residual <= 1e-8);
        assert!(rec.max_cauchy_ratio <= 1.0 / (rec.k_prime - 1.0));
    }

    #[test]
    fn constant_family_moves_nothing() {
        let f = constant_quadratic(c(-2.0, 0.0));
        let set = find_cycles(&f, c(0.3, 0.0), 1).unwrap();
        let rep: Vec<_> = set.cycles.into_iter().filter(|cy| cy.is_repelling()).collect();
        let rec = motion_hyperbolic(&f, &rep, 0.1, &MotionConfig::default()).unwrap();
        for h in &rec.images {
            for (a, b) in h.iter().zip(&rec.points) {
                assert!(a.dist(b) <= 1e-14);
            }
        }
    }

    #[test]
    fn weak_expansion_is_rejected() {
        // the attracting fixed point never expands
        let set = find_cycles(&quadratic_family(), c(0.1, 0.0), 1).unwrap();
        let err = motion_hyperbolic(&quadratic_family(), &set.cycles, 0.01, &MotionConfig::default()).unwrap_err();
        assert_eq!(err.name(), "ExpansionHypothesisFailed");
    }

    #[test]
    fn oversized_radius_violates_contraction() {
        let set = find_cycles(&quadratic_family(), c(-1.8, 0.0), 2).unwrap();
        let err = motion_hyperbolic(&quadratic_family(), &set.cycles, 0.5, &MotionConfig::default()).unwrap_err();
        assert_eq!(err.name(), "ContractionViolated");
    }
}
