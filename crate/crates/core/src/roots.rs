//! Simultaneous root finding (Aberth–Ehrlich) with Newton polish and
//! clustering of multiple roots.

use crate::cvec::{C64, ZERO};
use crate::error::{Error, Result};
use crate::poly::horner_with_derivative;

/// Roots closer than this are merged into one root of higher multiplicity.
pub const CLUSTER_RADIUS: f64 = 1e-7;
/// Relative residual accepted after polishing.
pub const RESIDUAL_FLOOR: f64 = 1e-8;

const MAX_ITER: usize = 800;

/// Anything that can report its value and derivative at a point, plus enough
/// structure to seed Aberth.
pub trait RootTarget {
    fn degree(&self) -> usize;
    fn eval(&self, z: C64) -> (C64, C64);
    /// Scale against which `|p(z)|` is judged, typically
    /// `sum |c_j| max(1, |z|)^j` so that roots near zero of `z^m` still pass.
    fn magnitude(&self, z: C64) -> f64;
    /// Radius of a disc expected to hold every root.
    fn root_radius(&self) -> f64;
    /// Newton correction `p/p'`; targets whose values overflow far from the
    /// roots can override this with a scaled evaluation.
    fn newton_ratio(&self, z: C64) -> C64 {
        let (p, dp) = self.eval(z);
        if p == ZERO {
            ZERO
        } else {
            p / dp
        }
    }
}

/// Dense polynomial, coefficients in increasing degree.
pub struct Dense<'a>(pub &'a [C64]);

impl RootTarget for Dense<'_> {
    fn degree(&self) -> usize {
        self.0.len() - 1
    }

    fn eval(&self, z: C64) -> (C64, C64) {
        horner_with_derivative(self.0, z)
    }

    fn magnitude(&self, z: C64) -> f64 {
        let r = z.norm().max(1.0);
        self.0.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    fn root_radius(&self) -> f64 {
        // Fujiwara bound.
        let n = self.degree();
        let lead = self.0[n].norm();
        let mut best: f64 = 0.0;
        for (j, c) in self.0[..n].iter().enumerate() {
            let k = n - j;
            let mut v = (c.norm() / lead).powf(1.0 / k as f64);
            if j == 0 {
                v *= 0.5f64.powf(1.0 / n as f64);
            }
            best = best.max(v);
        }
        (2.0 * best).max(1e-3)
    }
}

/// All roots of a dense polynomial, listed with multiplicity.
pub fn dense_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut n = coeffs.len();
    while n > 0 && coeffs[n - 1] == ZERO {
        n -= 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("zero polynomial has no isolated roots".into()));
    }
    let coeffs = &coeffs[..n];
    match n - 1 {
        0 => Ok(Vec::new()),
        1 => Ok(vec![-coeffs[0] / coeffs[1]]),
        2 => {
            let roots = quadratic_roots(coeffs[0], coeffs[1], coeffs[2]);
            let roots = roots.iter().map(|&z| polish(&Dense(coeffs), z)).collect::<Vec<_>>();
            finish(&Dense(coeffs), roots)
        }
        _ => find_roots(&Dense(coeffs)),
    }
}

/// Roots of `a + b z + c z^2` without cancellation.
pub fn quadratic_roots(a: C64, b: C64, c: C64) -> [C64; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
    if q == ZERO {
        return [ZERO, ZERO];
    }
    [q / c, a / q]
}

/// Aberth iteration on all roots of `target`, then polish, cluster and check.
pub fn find_roots<T: RootTarget>(target: &T) -> Result<Vec<C64>> {
    let n = target.degree();
    if n == 0 {
        return Ok(Vec::new());
    }
    let radius = target.root_radius();
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + 0.25) / n as f64 + 0.4;
            C64::from_polar(radius, theta)
        })
        .collect();
    let mut done = vec![false; n];
    for _ in 0..MAX_ITER {
        let mut all_done = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let ratio = target.newton_ratio(z[i]);
            if ratio == ZERO {
                done[i] = true;
                continue;
            }
            let mut s = ZERO;
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff != ZERO {
                        s += diff.inv();
                    }
                }
            }
            let denom = C64::new(1.0, 0.0) - ratio * s;
            let step = if denom.is_finite() && denom != ZERO && ratio.is_finite() { ratio / denom } else { ZERO };
            if !step.is_finite() {
                done[i] = true;
                continue;
            }
            z[i] -= step;
            if step.norm() <= 1e-15 * z[i].norm().max(1e-300) {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }
    let z = z.into_iter().map(|r| polish(target, r)).collect();
    finish(target, z)
}

/// A few Newton steps, keeping whichever iterate has the smallest residual.
pub fn polish<T: RootTarget>(target: &T, mut z: C64) -> C64 {
    let mut best = z;
    let mut best_res = target.eval(z).0.norm();
    for _ in 0..6 {
        let (p, dp) = target.eval(z);
        if dp == ZERO || p == ZERO {
            break;
        }
        z -= p / dp;
        let r = target.eval(z).0.norm();
        if !r.is_finite() {
            break;
        }
        if r < best_res {
            best = z;
            best_res = r;
        } else {
            break;
        }
    }
    best
}

fn finish<T: RootTarget>(target: &T, roots: Vec<C64>) -> Result<Vec<C64>> {
    let roots = cluster(roots);
    let mut worst: f64 = 0.0;
    for &r in &roots {
        let scale = target.magnitude(r).max(1e-300);
        let res = target.eval(r).0.norm() / scale;
        if !res.is_finite() {
            return Err(Error::RootFindingFailure { residual: f64::INFINITY });
        }
        worst = worst.max(res);
    }
    if worst > RESIDUAL_FLOOR {
        return Err(Error::RootFindingFailure { residual: worst });
    }
    Ok(roots)
}

/// Merge roots closer than `CLUSTER_RADIUS`; each cluster is replaced by its
/// centroid repeated once per member.
pub fn cluster(roots: Vec<C64>) -> Vec<C64> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut i = i;
        while label[i] != r {
            let next = label[i];
            label[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (roots[i] - roots[j]).norm() < CLUSTER_RADIUS {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[b] = a;
                }
            }
        }
    }
    let mut out = roots.clone();
    for i in 0..n {
        let r = find(&mut label, i);
        let members: Vec<usize> = (0..n).filter(|&j| find(&mut label, j) == r).collect();
        if members.len() > 1 {
            let c = members.iter().map(|&j| roots[j]).sum::<C64>() / members.len() as f64;
            out[i] = c;
        }
    }
    out
}

/// Multiplicities of a root list produced by `cluster`: distinct values with
/// their counts.
pub fn with_multiplicity(roots: &[C64]) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &r in roots {
        if let Some(e) = out.iter_mut().find(|(z, _)| *z == r) {
            e.1 += 1;
        } else {
            out.push((r, 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn expand(roots: &[C64]) -> Vec<C64> {
        let mut p = vec![c(1.0, 0.0)];
        for &r in roots {
            let mut q = vec![ZERO; p.len() + 1];
            for (i, &a) in p.iter().enumerate() {
                q[i + 1] += a;
                q[i] -= a * r;
            }
            p = q;
        }
        p
    }

    fn matches(found: &[C64], expected: &[C64], tol: f64) -> bool {
        let mut used = vec![false; found.len()];
        expected.iter().all(|e| {
            if let Some(i) = (0..found.len()).find(|&i| !used[i] && (found[i] - e).norm() < tol) {
                used[i] = true;
                true
            } else {
                false
            }
        })
    }

    #[test]
    fn cubic_family_critical_points() {
        // derivative of z^3 - 3z is 3z^2 - 3
        let r = dense_roots(&[c(-3.0, 0.0), ZERO, c(3.0, 0.0)]).unwrap();
        assert!(matches(&r, &[c(1.0, 0.0), c(-1.0, 0.0)], 1e-14));
    }

    #[test]
    fn double_root_is_merged() {
        let p = expand(&[c(0.5, 0.0), c(0.5, 0.0), c(-1.0, 2.0), c(3.0, 0.0)]);
        let r = dense_roots(&p).unwrap();
        assert_eq!(r.len(), 4);
        let m = with_multiplicity(&r);
        // a double root is only determined to about sqrt(eps)
        assert!(m.iter().any(|(z, k)| *k == 2 && (z - c(0.5, 0.0)).norm() < 1e-8));
    }

    #[test]
    fn triple_root_at_origin() {
        let r = dense_roots(&[ZERO, ZERO, ZERO, c(1.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|z| *z == r[0] && z.norm() < 1e-12));
    }

    proptest! {
        #[test]
        fn recovers_random_roots(seed in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 2..9)) {
            let roots: Vec<C64> = seed.iter().map(|&(a, b)| c(a, b)).collect();
            // keep roots well separated so the comparison is meaningful
            let separated = roots.iter().enumerate().all(|(i, a)| roots[..i].iter().all(|b| (a - b).norm() > 1e-2));
            prop_assume!(separated);
            let found = dense_roots(&expand(&roots)).unwrap();
            prop_assert_eq!(found.len(), roots.len());
            prop_assert!(matches(&found, &roots, 1e-8));
        }
    }
}
