//! Sampling the equilibrium measure by balanced backward random walks.
//!
//! The measure satisfies `f^*μ = d^k μ`, so moving from a point to one of its
//! `d^k` preimages chosen uniformly at random leaves μ invariant and the walk
//! equidistributes towards it from any non-exceptional start. Preimages are
//! computed exactly: on P^1 as the zeros of the binary form `b·P − a·Q`, and for
//! skew products on P^2 fiber by fiber.
//!
//! The walk state is kept as a unit vector of C^{k+1}, so points near the line
//! at infinity cause no overflow; clouds store both that representative and
//! the standard-chart point.

use crate::cvec::{CVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::family::{binary_form, FamilyKind, FamilySpec, Lift, ProjPoint};
use crate::io::{fmt12, Table};
use crate::roots::dense_roots;
use rand::Rng;
use rayon::prelude::*;

/// Largest admissible chordal distance between `f(w)` and the target.
pub const PREIMAGE_RESIDUAL: f64 = 1e-9;
pub const DEFAULT_BURN_IN: usize = 100;
pub const DEFAULT_SAMPLES: usize = 10_000;
const MAX_REJECTIONS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct MeasureCloud {
    pub lambda: C64,
    pub k: usize,
    /// Standard-chart coordinates.
    pub points: Vec<CVec>,
    /// Unit representatives in C^{k+1} of the same points.
    pub lifts: Vec<CVec>,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub method: String,
    /// Steps that had to re-branch because root finding degenerated.
    pub rejected: usize,
}

impl MeasureCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pool several clouds at the same parameter into one.
    pub fn concat(clouds: &[MeasureCloud]) -> Result<MeasureCloud> {
        let first = clouds.first().ok_or_else(|| Error::InvalidArgument("no clouds to merge".into()))?;
        let mut out = MeasureCloud { points: Vec::new(), lifts: Vec::new(), n_samples: 0, rejected: 0, ..first.clone() };
        for c in clouds {
            out.points.extend_from_slice(&c.points);
            out.lifts.extend_from_slice(&c.lifts);
            out.n_samples += c.n_samples;
            out.rejected += c.rejected;
        }
        Ok(out)
    }

    /// Mean of a test function over the cloud.
    pub fn average(&self, phi: impl Fn(&CVec) -> f64) -> f64 {
        self.points.iter().map(phi).sum::<f64>() / self.points.len() as f64
    }

    pub fn to_table(&self) -> Table {
        let mut t = if self.k == 1 { Table::new(&["re", "im"]) } else { Table::new(&["re1", "im1", "re2", "im2"]) };
        for p in &self.points {
            t.push(p.iter().flat_map(|z| [fmt12(z.re), fmt12(z.im)]).collect());
        }
        t
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_table().write(path)
    }

    /// Chart points of a cloud CSV written by `write_csv`.
    pub fn read_points(path: impl AsRef<std::path::Path>) -> Result<Vec<CVec>> {
        let t = Table::read(path)?;
        let cols: Vec<Vec<f64>> = if t.header.len() == 2 {
            vec![t.f64_column("re")?, t.f64_column("im")?]
        } else {
            vec![t.f64_column("re1")?, t.f64_column("im1")?, t.f64_column("re2")?, t.f64_column("im2")?]
        };
        let k = cols.len() / 2;
        Ok((0..t.rows.len())
            .map(|r| {
                let mut v = CVec::zeros(k);
                for i in 0..k {
                    v[i] = C64::new(cols[2 * i][r], cols[2 * i + 1][r]);
                }
                v
            })
            .collect())
    }
}

fn unit(v: &CVec) -> CVec {
    v.scale_re(1.0 / v.norm())
}

/// Preimages as unit vectors of C^{k+1}, with multiplicity.
pub fn preimages_of_lift(spec: &FamilySpec, lift: &Lift, target: &CVec) -> Result<Vec<CVec>> {
    let out = match spec.k() {
        1 => preimages_p1(lift, target)?,
        _ if spec.kind() == FamilyKind::Skew => preimages_skew(lift, target)?,
        _ => return Err(Error::UnsupportedFamily("exact preimages on P^2 need a skew family".into())),
    };
    let goal = ProjPoint::new(target).ok_or(Error::DegenerateAtPoint { norm: 0.0 })?;
    let mut worst: f64 = 0.0;
    for w in &out {
        let fw = lift.eval(w);
        let p = ProjPoint::new(&fw).ok_or(Error::DegenerateAtPoint { norm: fw.norm() })?;
        worst = worst.max(p.chordal_distance(&goal));
    }
    if worst > PREIMAGE_RESIDUAL || !worst.is_finite() {
        return Err(Error::RootFindingFailure { residual: worst });
    }
    Ok(out)
}

fn preimages_p1(lift: &Lift, target: &CVec) -> Result<Vec<CVec>> {
    let t = unit(target);
    let (a, b) = (t[0], t[1]);
    let p = binary_form(lift, 0);
    let q = binary_form(lift, 1);
    // g(x, s) = b P(x, s) − a Q(x, s), coefficient j multiplies x^j s^{d−j}
    let g: Vec<C64> = p.iter().zip(&q).map(|(pj, qj)| b * pj - a * qj).collect();
    let d = g.len() - 1;
    let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateAtPoint { norm: 0.0 });
    }
    let tiny = 1e-14 * scale;
    let mut out = Vec::with_capacity(d);
    if g[d].norm() >= g[0].norm() {
        // chart s = 1; trailing tiny coefficients are roots at x = ∞
        let mut top = d;
        while g[top].norm() <= tiny {
            top -= 1;
        }
        for x in dense_roots(&g[..=top])? {
            out.push(unit(&CVec::two(x, C64::new(1.0, 0.0))));
        }
        out.extend(std::iter::repeat(CVec::two(C64::new(1.0, 0.0), ZERO)).take(d - top));
    } else {
        // chart x = 1, polynomial in s with coefficient g[d − j] on s^j
        let h: Vec<C64> = g.iter().rev().copied().collect();
        let mut top = d;
        while h[top].norm() <= tiny {
            top -= 1;
        }
        for s in dense_roots(&h[..=top])? {
            out.push(unit(&CVec::two(C64::new(1.0, 0.0), s)));
        }
        out.extend(std::iter::repeat(CVec::two(ZERO, C64::new(1.0, 0.0))).take(d - top));
    }
    Ok(out)
}

fn preimages_skew(lift: &Lift, target: &CVec) -> Result<Vec<CVec>> {
    let d = lift.degree();
    let s = lift.terms(2).iter().map(|(_, c)| *c).sum::<C64>();
    let chart = target.dehomogenize(2).ok_or_else(|| Error::UnsupportedFamily("skew preimages of the line at infinity".into()))?;
    let (za, zb) = (chart[0], chart[1]);
    let mut base = vec![ZERO; d + 1];
    for (e, c) in lift.terms(0) {
        base[e[0] as usize] += c;
    }
    base[0] -= s * za;
    let mut out = Vec::with_capacity(d * d);
    for x in dense_roots(&base)? {
        let mut fiber = vec![ZERO; d + 1];
        for (e, c) in lift.terms(1) {
            fiber[e[1] as usize] += c * x.powu(e[0] as u32);
        }
        fiber[0] -= s * zb;
        for y in dense_roots(&fiber)? {
            out.push(unit(&CVec::from_slice(&[x, y, C64::new(1.0, 0.0)])));
        }
    }
    Ok(out)
}

/// All `d^k` preimages of the chart point `z`, in chart coordinates, listed
/// with multiplicity. Preimages on the line at infinity are reported as
/// `ChartOverflow`.
pub fn all_preimages(spec: &FamilySpec, lambda: C64, z: &CVec) -> Result<Vec<CVec>> {
    let chart = spec.standard_chart();
    let lift = spec.at(lambda);
    preimages_of_lift(spec, &lift, &z.homogenize(chart))?
        .into_iter()
        .map(|w| w.dehomogenize(chart).ok_or(Error::ChartOverflow { modulus: f64::INFINITY }))
        .collect()
}

/// Default start: each chart coordinate with modulus uniform in [0.5, 2].
pub fn random_start(k: usize, rng: &mut impl Rng) -> CVec {
    let mut z = CVec::zeros(k);
    for i in 0..k {
        z[i] = C64::from_polar(0.5 + 1.5 * rng.gen::<f64>(), rng.gen::<f64>() * std::f64::consts::TAU);
    }
    z
}

/// Backward random walk of length `burn_in + n_samples` recording the last
/// `n_samples` states. `z0 = None` draws the default random start.
pub fn backward_walk(spec: &FamilySpec, lambda: C64, z0: Option<&CVec>, n_samples: usize, burn_in: usize, seed: u64) -> Result<MeasureCloud> {
    if !spec.supports_preimages() {
        return Err(Error::UnsupportedFamily("backward walks need exact preimages (k = 1 or a skew family)".into()));
    }
    let chart = spec.standard_chart();
    let lift = spec.at(lambda);
    let mut rng = crate::seeds::rng(seed);
    let start = match z0 {
        Some(z) => *z,
        None => random_start(spec.k(), &mut rng),
    };
    let mut state = unit(&start.homogenize(chart));
    // preimage list that produced `state`, for re-branching
    let mut parent: Option<Vec<CVec>> = None;
    let mut rejected = 0usize;
    let mut points = Vec::with_capacity(n_samples);
    let mut lifts = Vec::with_capacity(n_samples);
    let total = burn_in + n_samples;
    let mut step = 0usize;
    while step < total {
        let pre = match preimages_of_lift(spec, &lift, &state) {
            Ok(p) => p,
            Err(e @ (Error::RootFindingFailure { .. } | Error::UnsupportedFamily(_) | Error::DegenerateAtPoint { .. })) => {
                rejected += 1;
                if rejected > MAX_REJECTIONS {
                    return Err(e);
                }
                state = match &parent {
                    Some(p) => p[rng.gen_range(0..p.len())],
                    None => unit(&random_start(spec.k(), &mut rng).homogenize(chart)),
                };
                continue;
            }
            Err(e) => return Err(e),
        };
        let next = pre[rng.gen_range(0..pre.len())];
        if step >= burn_in {
            match next.dehomogenize(chart) {
                Some(p) if p.is_finite() => {
                    points.push(p);
                    lifts.push(next);
                }
                // a sample on the line at infinity (a null set): re-branch
                _ => {
                    rejected += 1;
                    if rejected > MAX_REJECTIONS {
                        return Err(Error::ChartOverflow { modulus: f64::INFINITY });
                    }
                    continue;
                }
            }
        }
        parent = Some(pre);
        state = next;
        step += 1;
    }
    Ok(MeasureCloud { lambda, k: spec.k(), points, lifts, n_samples, burn_in, seed, method: "backward-walk".into(), rejected })
}

/// `n_walks` independent walks with seeds `seed + i`, run in parallel and
/// returned in seed order.
pub fn backward_walks(spec: &FamilySpec, lambda: C64, n_walks: usize, samples_per_walk: usize, burn_in: usize, seed: u64) -> Result<Vec<MeasureCloud>> {
    (0..n_walks as u64)
        .into_par_iter()
        .map(|i| backward_walk(spec, lambda, None, samples_per_walk, burn_in, seed.wrapping_add(i)))
        .collect()
}

/// One-sided heuristic: true iff some cloud point lies within `eps` of `z`
/// (Euclidean distance in the chart). A small cloud can miss parts of J.
pub fn julia_membership(cloud: &MeasureCloud, z: &CVec, eps: f64) -> bool {
    cloud.points.iter().any(|p| p.dist(z) <= eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::ONE;
    use crate::family::{lattes_map, product_squares, quadratic_family, skew_family, square_map_p1};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn same_multiset(found: &[CVec], expected: &[CVec], tol: f64) -> bool {
        if found.len() != expected.len() {
            return false;
        }
        let mut used = vec![false; found.len()];
        expected.iter().all(|e| match (0..found.len()).find(|&i| !used[i] && found[i].dist(e) < tol) {
            Some(i) => {
                used[i] = true;
                true
            }
            None => false,
        })
    }

    #[test]
    fn preimages_of_one_under_z_squared() {
        let f = quadratic_family();
        let w = all_preimages(&f, ZERO, &CVec::one(ONE)).unwrap();
        assert!(same_multiset(&w, &[CVec::one(ONE), CVec::one(-ONE)], 1e-14));
    }

    #[test]
    fn preimages_of_two_under_chebyshev() {
        let f = quadratic_family();
        let w = all_preimages(&f, c(-2.0, 0.0), &CVec::one(c(2.0, 0.0))).unwrap();
        assert!(same_multiset(&w, &[CVec::one(c(2.0, 0.0)), CVec::one(c(-2.0, 0.0))], 1e-14));
    }

    #[test]
    fn skew_preimages_by_hand() {
        // z² = 1 gives z = ±1; then w² = 1 − z is 0 (double) or 2
        let s2 = 2f64.sqrt();
        let expected = [
            CVec::two(ONE, ZERO),
            CVec::two(ONE, ZERO),
            CVec::two(-ONE, c(s2, 0.0)),
            CVec::two(-ONE, c(-s2, 0.0)),
        ];
        let w = all_preimages(&skew_family(), ZERO, &CVec::two(ONE, ONE)).unwrap();
        assert!(same_multiset(&w, &expected, 1e-7), "{w:?}");
    }

    #[test]
    fn preimages_at_infinity_for_rational_maps() {
        // the square map sends ∞ to ∞; in lift coordinates [1:0] has [1:0] as
        // a double preimage
        let f = square_map_p1();
        let pre = preimages_of_lift(&f, &f.at(ZERO), &CVec::two(ONE, ZERO)).unwrap();
        assert_eq!(pre.len(), 2);
        assert!(pre.iter().all(|w| w[1].norm() < 1e-12));
    }

    #[test]
    fn circle_cloud() {
        let cl = backward_walk(&quadratic_family(), ZERO, None, 2000, 50, 1).unwrap();
        assert_eq!(cl.len(), 2000);
        assert!(cl.points.iter().all(|p| (p[0].norm() - 1.0).abs() <= 1e-6));
    }

    #[test]
    fn chebyshev_cloud_is_on_the_segment() {
        let cl = backward_walk(&quadratic_family(), c(-2.0, 0.0), None, 2000, 100, 2).unwrap();
        assert!(cl.points.iter().all(|p| p[0].im.abs() <= 1e-6 && p[0].re.abs() <= 2.0 + 1e-6));
    }

    #[test]
    fn product_marginals_are_circles() {
        let cl = backward_walk(&product_squares(), ZERO, None, 2000, 50, 3).unwrap();
        assert!(cl.points.iter().all(|p| (p[0].norm() - 1.0).abs() <= 1e-6 && (p[1].norm() - 1.0).abs() <= 1e-6));
    }

    #[test]
    fn cloud_is_forward_invariant() {
        let f = quadratic_family();
        let lambda = c(-2.0, 0.0);
        let cl = backward_walk(&f, lambda, None, 1000, 100, 4).unwrap();
        for p in &cl.points {
            let q = f.affine_map(lambda, p, 1).unwrap();
            assert!(q[0].im.abs() <= 1e-6 && q[0].re.abs() <= 2.0 + 1e-6);
        }
    }

    #[test]
    fn escape_rate_vanishes_on_the_cloud() {
        let f = quadratic_family();
        let lambda = c(-0.12, 0.75);
        let ev = crate::green::GreenEvaluator::at_point(&f, lambda, 1e-9).unwrap();
        let cl = backward_walk(&f, lambda, None, 500, 100, 5).unwrap();
        for p in &cl.points {
            assert!(ev.escape_rate(lambda, p).unwrap().value <= 1e-3);
        }
    }

    #[test]
    fn two_seeds_are_stationary() {
        let f = quadratic_family();
        let lambda = c(-0.5, 0.5);
        let n = 10_000;
        let a = backward_walk(&f, lambda, None, n, 100, 10).unwrap();
        let b = backward_walk(&f, lambda, None, n, 100, 11).unwrap();
        let tests: [fn(&CVec) -> f64; 3] = [|p| p[0].re, |p| p[0].im, |p| (p[0] - C64::new(0.3, 0.0)).norm()];
        for phi in tests {
            assert!((a.average(phi) - b.average(phi)).abs() <= 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn seed_determinism() {
        let f = skew_family();
        let a = backward_walk(&f, c(-1.0, 0.1), None, 300, 20, 77).unwrap();
        let b = backward_walk(&f, c(-1.0, 0.1), None, 300, 20, 77).unwrap();
        assert_eq!(a.to_table().to_csv_string(), b.to_table().to_csv_string());
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn lattes_cloud_spreads_over_the_sphere() {
        let cl = backward_walk(&lattes_map(), ZERO, None, 4000, 100, 6).unwrap();
        // equal-area hemispheres |z| < 1 and |z| > 1
        let inside = cl.points.iter().filter(|p| p[0].norm() < 1.0).count() as f64 / cl.len() as f64;
        assert!((inside - 0.5).abs() < 0.05, "{inside}");
    }

    #[test]
    fn membership_heuristic() {
        let cl = backward_walk(&quadratic_family(), ZERO, None, 20_000, 50, 8).unwrap();
        assert!(julia_membership(&cl, &CVec::one(ONE), 1e-3));
        assert!(!julia_membership(&cl, &CVec::one(ZERO), 1e-3));
        let p = cl.points[17];
        assert!(julia_membership(&cl, &p, 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let cl = backward_walk(&skew_family(), ZERO, None, 50, 10, 9).unwrap();
        let dir = std::env::temp_dir().join(format!("biflab-cloud-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        cl.write_csv(&path).unwrap();
        let back = MeasureCloud::read_points(&path).unwrap();
        assert_eq!(back.len(), 50);
        for (a, b) in back.iter().zip(&cl.points) {
            assert!(a.dist(b) <= 1e-11 * (1.0 + b.norm()));
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn quadratic_preimages_are_complete(re in -2.0f64..2.0, im in -2.0f64..2.0, lr in -2.0f64..0.5, li in -1.0f64..1.0) {
            let f = quadratic_family();
            let w = all_preimages(&f, c(lr, li), &CVec::one(c(re, im))).unwrap();
            prop_assert_eq!(w.len(), 2);
        }
    }
}
