use super::{ChartDynamics, Cycle, PERIODIC_RESIDUAL};
use crate::cvec::{CMat, CVec, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::family::{binary_form, FamilyKind, FamilySpec, Lift};
use crate::poly::horner_with_derivative;
use crate::roots::{find_roots, with_multiplicity, RootTarget};
use crate::sampler::backward_walk;
use rand::Rng;

/// Cycles of one exact period. `complete` is false when enumeration was
/// only best-effort (Newton multistart on P^2).
#[derive(Clone, Debug)]
pub struct CycleSet {
    pub lambda: C64,
    pub period: usize,
    pub cycles: Vec<Cycle>,
    pub complete: bool,
}

/// `p^n(z) − z` for a polynomial `p`, evaluated by iteration rather than by
/// expanding the degree-`d^n` polynomial.
struct PeriodicPoly<'a> {
    coeffs: &'a [C64],
    n: usize,
    radius: f64,
}

impl PeriodicPoly<'_> {
    fn dense_mag(&self, x: C64) -> f64 {
        let r = x.norm().max(1.0);
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }
}

impl RootTarget for PeriodicPoly<'_> {
    fn degree(&self) -> usize {
        (self.coeffs.len() - 1).pow(self.n as u32)
    }

    fn eval(&self, z: C64) -> (C64, C64) {
        let mut x = z;
        let mut dx = ONE;
        for _ in 0..self.n {
            let (v, dv) = horner_with_derivative(self.coeffs, x);
            dx *= dv;
            x = v;
        }
        (x - z, dx - ONE)
    }

    fn magnitude(&self, z: C64) -> f64 {
        // running forward-error scale of the iterated Horner evaluation
        let mut x = z;
        let mut m = 0.0;
        for _ in 0..self.n {
            let (v, dv) = horner_with_derivative(self.coeffs, x);
            m = dv.norm() * m + self.dense_mag(x);
            x = v;
        }
        m + z.norm()
    }

    fn root_radius(&self) -> f64 {
        self.radius
    }

    fn newton_ratio(&self, z: C64) -> C64 {
        // once the orbit is far outside the escape radius, x_{j+1} ≈ a x_j^d
        // and the ratio x/x' shrinks by exactly d per step
        let d = (self.coeffs.len() - 1) as f64;
        let mut x = z;
        let mut dx = ONE;
        for j in 0..self.n {
            if x.norm() > 1e20 * self.radius && j > 0 {
                return (x / dx) / d.powi((self.n - j) as i32);
            }
            let (v, dv) = horner_with_derivative(self.coeffs, x);
            dx *= dv;
            x = v;
        }
        let (p, dp) = (x - z, dx - ONE);
        if p == ZERO {
            ZERO
        } else {
            p / dp
        }
    }
}

/// `A(x) − x B(x)` with `(A, B) = F^n(x, 1)` for a rational map on P^1.
struct PeriodicRational<'a> {
    lift: &'a Lift,
    n: usize,
    degree: usize,
    radius: f64,
}

impl PeriodicRational<'_> {
    fn orbit(&self, x: C64) -> (CVec, CMat) {
        let mut v = CVec::two(x, ONE);
        let mut a = CMat::identity(2);
        for _ in 0..self.n {
            let (fv, df) = self.lift.eval_with_jacobian(&v);
            a = df.mul(&a);
            v = fv;
        }
        (v, a)
    }
}

impl RootTarget for PeriodicRational<'_> {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval(&self, x: C64) -> (C64, C64) {
        let (v, a) = self.orbit(x);
        let (da, db) = (a.get(0, 0), a.get(1, 0));
        (v[0] - x * v[1], da - v[1] - x * db)
    }

    fn magnitude(&self, x: C64) -> f64 {
        let (v, _) = self.orbit(x);
        v[0].norm() + x.norm() * v[1].norm() + 1e-300
    }

    fn root_radius(&self) -> f64 {
        self.radius
    }
}

/// Chart coefficients of a polynomial family at `lambda`, increasing degree.
pub(crate) fn chart_polynomial(spec: &FamilySpec, lambda: C64) -> Vec<C64> {
    let lift = spec.at(lambda);
    let s = binary_form(&lift, 1)[0];
    binary_form(&lift, 0).into_iter().map(|c| c / s).collect()
}

fn escape_radius(coeffs: &[C64]) -> f64 {
    let d = coeffs.len() - 1;
    let lower: f64 = coeffs[..d].iter().map(|c| c.norm()).sum();
    ((1.0 + lower) / coeffs[d].norm()).max(1.0)
}

/// Group periodic points of exact period `p` into cycles.
fn assemble(dynamics: &ChartDynamics, lambda: C64, p: usize, mut pts: Vec<CVec>) -> Result<Vec<Cycle>> {
    let mut cycles = Vec::new();
    while let Some(z) = pts.pop() {
        let cyc = dynamics.cycle_through(lambda, &z, p)?;
        // drop the other members of this orbit
        for q in &cyc.points[1..] {
            if let Some(i) = (0..pts.len()).min_by(|&a, &b| pts[a].dist(q).total_cmp(&pts[b].dist(q))) {
                if pts[i].dist(q) <= 1e-6 * (1.0 + q.norm()) {
                    pts.swap_remove(i);
                }
            }
        }
        cycles.push(cyc);
    }
    // deterministic order: by real part, then imaginary part of the first point
    for c in &mut cycles {
        let best = (0..c.points.len())
            .min_by(|&a, &b| c.points[a][0].re.total_cmp(&c.points[b][0].re).then(c.points[a][0].im.total_cmp(&c.points[b][0].im)))
            .unwrap_or(0);
        c.points.rotate_left(best);
    }
    cycles.sort_by(|a, b| a.points[0][0].re.total_cmp(&b.points[0][0].re).then(a.points[0][0].im.total_cmp(&b.points[0][0].im)));
    for c in &cycles {
        for x in &c.points {
            let r = dynamics.iterate(x, p)?.dist(x);
            if r > PERIODIC_RESIDUAL * (1.0 + x.norm()) {
                return Err(Error::RootFindingFailure { residual: r });
            }
        }
    }
    Ok(cycles)
}

/// All cycles of exact period `p` of `f_λ`.
///
/// On P^1 the periodic points are the roots of `f^p(z) − z` (degree `d^p`
/// for polynomials, `d^p + 1` for rational maps), found all at once and
/// filtered to exact period `p`; the enumeration is complete. On P^2 Newton
/// is started from backward-walk samples (skew families) or random points,
/// and the result is flagged incomplete.
pub fn find_cycles(spec: &FamilySpec, lambda: C64, p: usize) -> Result<CycleSet> {
    if p == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let dynamics = ChartDynamics::new(spec, lambda);
    if spec.k() == 1 {
        let roots = if spec.kind() == FamilyKind::Polynomial {
            let coeffs = chart_polynomial(spec, lambda);
            if (coeffs.len() - 1).checked_pow(p as u32).is_none_or(|n| n > 4096) {
                return Err(Error::InvalidArgument(format!("period {p} is too large for exact enumeration")));
            }
            let radius = escape_radius(&coeffs);
            find_roots(&PeriodicPoly { coeffs: &coeffs, n: p, radius })?
        } else {
            periodic_roots_rational(&dynamics, spec.d(), p)?
        };
        let mut pts = Vec::new();
        for (r, _) in with_multiplicity(&roots) {
            let z = CVec::one(r);
            let z = dynamics.polish_periodic(&z, p).unwrap_or(z);
            if dynamics.minimal_period(&z, p)? == p {
                pts.push(z);
            }
        }
        let cycles = assemble(&dynamics, lambda, p, pts)?;
        return Ok(CycleSet { lambda, period: p, cycles, complete: true });
    }
    // P^2: best-effort multistart
    let mut rng = crate::seeds::rng(0x6379_636c_6573 ^ p as u64);
    let starts: Vec<CVec> = if spec.supports_preimages() {
        backward_walk(spec, lambda, None, 400, 50, 0x7374_6172_7473)?.points
    } else {
        (0..400).map(|_| CVec::two(C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)), C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))).collect()
    };
    let mut pts: Vec<CVec> = Vec::new();
    for s in starts {
        let Ok(z) = dynamics.polish_periodic(&s, p) else { continue };
        if dynamics.minimal_period(&z, p)? != p {
            continue;
        }
        if pts.iter().all(|q| q.dist(&z) > 1e-7 * (1.0 + z.norm())) {
            pts.push(z);
        }
    }
    let cycles = assemble(&dynamics, lambda, p, pts)?;
    Ok(CycleSet { lambda, period: p, cycles, complete: false })
}

fn periodic_roots_rational(dynamics: &ChartDynamics, d: usize, p: usize) -> Result<Vec<C64>> {
    let lift = dynamics.lift();
    let dp = d.checked_pow(p as u32).filter(|n| *n <= 4096).ok_or_else(|| Error::InvalidArgument(format!("period {p} is too large")))?;
    // if ∞ is fixed by f^p the chart polynomial loses its top degree
    let mut v = CVec::two(ONE, ZERO);
    for _ in 0..p {
        v = lift.eval(&v);
        v = v.scale_re(1.0 / v.norm());
    }
    let degree = if v[1].norm() < 1e-12 { dp } else { dp + 1 };
    find_roots(&PeriodicRational { lift, n: p, degree, radius: 2.0 })
}

/// Multiplier of a cycle on P^1 read off the lift: with `F^p(x̃) = μ x̃`,
/// `D F^p(x̃)` has eigenvalues `d^p μ` (Euler direction) and `μ w`, so
/// `w = tr D F^p(x̃) / μ − d^p`.
pub fn multiplier_via_lift(spec: &FamilySpec, lambda: C64, z: C64, p: usize) -> C64 {
    let lift = spec.at(lambda);
    let mut v = CVec::two(z, ONE);
    let mut a = CMat::identity(2);
    for _ in 0..p {
        let (fv, df) = lift.eval_with_jacobian(&v);
        a = df.mul(&a);
        v = fv;
    }
    let mu = v[1];
    let trace = a.get(0, 0) + a.get(1, 1);
    trace / mu - (spec.d() as f64).powi(p as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{cubic_family, lattes_map, product_squares, quadratic_family};
    use crate::motion::CycleClass;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fixed_points_at_zero() {
        let s = find_cycles(&quadratic_family(), ZERO, 1).unwrap();
        assert_eq!(s.cycles.len(), 2);
        let a = &s.cycles[0];
        let b = &s.cycles[1];
        assert!(a.points[0][0].norm() < 1e-14 && a.multipliers[0].norm() < 1e-14);
        assert_eq!(a.class, CycleClass::Attracting);
        assert!((b.points[0][0] - ONE).norm() < 1e-14 && (b.multipliers[0] - 2.0).norm() < 1e-13);
        assert_eq!(b.class, CycleClass::Repelling);
    }

    #[test]
    fn superattracting_two_cycle() {
        let s = find_cycles(&quadratic_family(), c(-1.0, 0.0), 2).unwrap();
        assert_eq!(s.cycles.len(), 1);
        let cy = &s.cycles[0];
        let mut pts: Vec<f64> = cy.points.iter().map(|p| p[0].re).collect();
        pts.sort_by(f64::total_cmp);
        assert!((pts[0] + 1.0).abs() < 1e-12 && pts[1].abs() < 1e-12);
        assert!(cy.multipliers[0].norm() < 1e-12);
    }

    #[test]
    fn period_counts() {
        // z² + λ has 2, 1, 2, 3 cycles of exact periods 1..4 generically
        let l = c(0.1, 0.6);
        let counts: Vec<usize> = (1..=4).map(|p| find_cycles(&quadratic_family(), l, p).unwrap().cycles.len()).collect();
        assert_eq!(counts, vec![2, 1, 2, 3]);
    }

    #[test]
    fn cubic_and_rational_fixed_points() {
        assert_eq!(find_cycles(&cubic_family(), c(0.4, 0.1), 1).unwrap().cycles.len(), 3);
        // a degree-4 rational map has 5 fixed points on P^1; ∞ maps to ∞ here,
        // so 4 of them lie in the chart
        let s = find_cycles(&lattes_map(), ZERO, 1).unwrap();
        assert_eq!(s.cycles.len(), 4);
        assert!(s.cycles.iter().all(|c| c.is_repelling()));
    }

    #[test]
    fn product_fixed_points_best_effort() {
        let s = find_cycles(&product_squares(), ZERO, 1).unwrap();
        assert!(!s.complete);
        // the repelling fixed point (1, 1) of (z², w²) is found from the cloud
        assert!(s.cycles.iter().any(|cy| cy.points[0].dist(&CVec::two(ONE, ONE)) < 1e-10 && cy.is_repelling()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn closed_form_fixed_multipliers(re in -1.5f64..0.2, im in -0.8f64..0.8) {
            let l = c(re, im);
            let s = find_cycles(&quadratic_family(), l, 1).unwrap();
            let r = (ONE - 4.0 * l).sqrt();
            let mut want = [ONE - r, ONE + r];
            let mut got: Vec<C64> = s.cycles.iter().map(|c| c.multipliers[0]).collect();
            want.sort_by(|a, b| a.re.total_cmp(&b.re));
            got.sort_by(|a, b| a.re.total_cmp(&b.re));
            for (w, g) in want.iter().zip(&got) {
                prop_assert!((w - g).norm() < 1e-10);
            }
        }

        #[test]
        fn chain_rule_matches_lift_eigen_route(re in -1.8f64..0.3, im in -0.9f64..0.9, p in 1usize..5) {
            let f = quadratic_family();
            let l = c(re, im);
            for cy in find_cycles(&f, l, p).unwrap().cycles {
                let w = multiplier_via_lift(&f, l, cy.points[0][0], p);
                prop_assert!((w - cy.multipliers[0]).norm() <= 1e-9 * cy.multipliers[0].norm().max(1.0));
            }
        }
    }
}
