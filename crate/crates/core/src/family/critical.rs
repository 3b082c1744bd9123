use super::{FamilyKind, FamilySpec, Lift};
use crate::cvec::{CVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::roots::{dense_roots, RESIDUAL_FLOOR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Critical set of `f_λ`.
#[derive(Clone, Debug)]
pub enum CriticalLocus {
    /// k = 1: the `2d − 2` critical points with multiplicity, split into the
    /// finite ones of the standard chart and a count at infinity.
    Points { finite: Vec<C64>, at_infinity: usize },
    /// k = 2: area-weighted samples on the critical curve (standard chart).
    Curve { samples: Vec<CVec> },
}

impl CriticalLocus {
    pub fn total(&self) -> usize {
        match self {
            CriticalLocus::Points { finite, at_infinity } => finite.len() + at_infinity,
            CriticalLocus::Curve { samples } => samples.len(),
        }
    }

    pub fn finite_points(&self) -> &[C64] {
        match self {
            CriticalLocus::Points { finite, .. } => finite,
            CriticalLocus::Curve { .. } => &[],
        }
    }
}

/// Coefficients of lifted coordinate `i` of a k = 1 lift as a binary form,
/// indexed by the power of the first variable.
pub(crate) fn binary_form(lift: &Lift, i: usize) -> Vec<C64> {
    let mut c = vec![ZERO; lift.degree() + 1];
    for (e, coef) in lift.terms(i) {
        c[e[0] as usize] += coef;
    }
    c
}

fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `det DF(x, t)` of a k = 1 lift as a binary form of degree `2d − 2`.
pub(crate) fn jacobian_form(lift: &Lift) -> Vec<C64> {
    let d = lift.degree();
    let p = binary_form(lift, 0);
    let q = binary_form(lift, 1);
    let dx = |f: &[C64]| (0..d).map(|i| f[i + 1] * (i + 1) as f64).collect::<Vec<_>>();
    let dt = |f: &[C64]| (0..d).map(|i| f[i] * (d - i) as f64).collect::<Vec<_>>();
    let a = convolve(&dx(&p), &dt(&q));
    let b = convolve(&dt(&p), &dx(&q));
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

/// Critical points of `f_λ`.
///
/// For k = 1 these are the zeros on P^1 of the binary form `det DF`, found by
/// simultaneous root finding in the standard chart. For k = 2 skew products
/// the critical curve splits as `{∂_z F_0 = 0} ∪ {∂_w F_1 = 0}`, and `n_samples`
/// points are drawn area-weighted inside the bidisc of radius `radius`.
pub fn critical_points(spec: &FamilySpec, lambda: C64, n_samples: usize, radius: f64, seed: u64) -> Result<CriticalLocus> {
    let lift = spec.at(lambda);
    match spec.k() {
        1 => {
            let form = jacobian_form(&lift);
            let scale = form.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let mut top = form.len();
            while top > 0 && form[top - 1].norm() <= 1e-14 * scale {
                top -= 1;
            }
            if top == 0 {
                return Err(Error::RootFindingFailure { residual: f64::INFINITY });
            }
            let finite = dense_roots(&form[..top])?;
            Ok(CriticalLocus::Points { at_infinity: form.len() - top, finite })
        }
        _ if spec.kind() == FamilyKind::Skew => Ok(CriticalLocus::Curve { samples: skew_critical_samples(&lift, n_samples, radius, seed)? }),
        _ => Err(Error::UnsupportedFamily("critical sampling on P^2 needs a skew family".into())),
    }
}

/// Coefficients in `w` of `∂_w F_1(z, w, 1)`.
fn vertical_derivative_coeffs(lift: &Lift, z: C64) -> Vec<C64> {
    let d = lift.degree();
    let mut c = vec![ZERO; d];
    for (e, coef) in lift.terms(1) {
        if e[1] > 0 {
            c[e[1] as usize - 1] += coef * e[1] as f64 * z.powu(e[0] as u32);
        }
    }
    c
}

/// Coefficients in `z` of `F_0(z, ·, 1)`, which does not depend on `w`.
fn base_coeffs(lift: &Lift) -> Vec<C64> {
    let mut c = vec![ZERO; lift.degree() + 1];
    for (e, coef) in lift.terms(0) {
        c[e[0] as usize] += coef;
    }
    c
}

fn uniform_disc(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    let rho = r * rng.gen::<f64>().sqrt();
    C64::from_polar(rho, rng.gen::<f64>() * std::f64::consts::TAU)
}

fn skew_critical_samples(lift: &Lift, n: usize, radius: f64, seed: u64) -> Result<Vec<CVec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_coeffs(lift);
    let dbase: Vec<C64> = (1..base.len()).map(|i| base[i] * i as f64).collect();
    let vertical_lines: Vec<C64> = dense_roots(&dbase)?.into_iter().filter(|c| c.norm() <= radius).collect();

    // The second component is a union of graphs w = φ(z); its area element is
    // (1 + |φ'|²) dA(z). Estimate the weight with a pilot run.
    let sheet = |z: C64| -> Result<Vec<(C64, f64)>> {
        let c = vertical_derivative_coeffs(lift, z);
        let ws = dense_roots(&c)?;
        let h = 1e-6;
        let cp = vertical_derivative_coeffs(lift, z + h);
        let wps = dense_roots(&cp)?;
        Ok(ws
            .into_iter()
            .filter(|w| w.norm() <= radius)
            .map(|w| {
                let wp = wps.iter().copied().min_by(|a, b| (a - w).norm().total_cmp(&(b - w).norm())).unwrap_or(w);
                let slope = (wp - w) / h;
                (w, 1.0 + slope.norm_sqr())
            })
            .collect())
    };
    let pilot = 256;
    let mut weight_sum = 0.0;
    let mut weight_max: f64 = 1.0;
    for _ in 0..pilot {
        let z = uniform_disc(&mut rng, radius);
        for (_, wgt) in sheet(z)? {
            weight_sum += wgt;
            weight_max = weight_max.max(wgt);
        }
    }
    let disc_area = std::f64::consts::PI * radius * radius;
    let area_lines = vertical_lines.len() as f64 * disc_area;
    let area_graphs = weight_sum / pilot as f64 * disc_area;
    let p_lines = if area_lines + area_graphs > 0.0 { area_lines / (area_lines + area_graphs) } else { 0.0 };

    let mut out = Vec::with_capacity(n);
    let mut guard = 0usize;
    while out.len() < n {
        guard += 1;
        if guard > 1000 * n.max(1) {
            return Err(Error::RootFindingFailure { residual: f64::INFINITY });
        }
        if !vertical_lines.is_empty() && rng.gen::<f64>() < p_lines {
            let z = vertical_lines[rng.gen_range(0..vertical_lines.len())];
            out.push(CVec::two(z, uniform_disc(&mut rng, radius)));
        } else {
            let z = uniform_disc(&mut rng, radius);
            let sheets = sheet(z)?;
            if sheets.is_empty() {
                continue;
            }
            let (w, wgt) = sheets[rng.gen_range(0..sheets.len())];
            if rng.gen::<f64>() * 2.0 * weight_max <= wgt {
                out.push(CVec::two(z, w));
            }
        }
    }
    for p in &out {
        let m = lift.affine_jacobian(p, 2)?;
        let res = m.det().norm();
        if res > RESIDUAL_FLOOR {
            return Err(Error::RootFindingFailure { residual: res });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{cubic_family, lattes_map, quadratic_family, skew_family, FamilyKind, Term};
    use crate::poly::ParamPolynomial;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn quadratic_has_zero_and_infinity() {
        let loc = critical_points(&quadratic_family(), c(0.3, 0.7), 0, 1.0, 0).unwrap();
        match loc {
            CriticalLocus::Points { finite, at_infinity } => {
                assert_eq!(finite.len(), 1);
                assert!(finite[0].norm() < 1e-14);
                assert_eq!(at_infinity, 1);
            }
            _ => panic!("expected points"),
        }
    }

    #[test]
    fn cubic_at_minus_three() {
        let loc = critical_points(&cubic_family(), c(-3.0, 0.0), 0, 1.0, 0).unwrap();
        let mut f = loc.finite_points().to_vec();
        f.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((f[0] - c(-1.0, 0.0)).norm() < 1e-12 && (f[1] - c(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(loc.total(), 4);
    }

    #[test]
    fn lattes_has_six_finite_critical_points() {
        let loc = critical_points(&lattes_map(), ZERO, 0, 1.0, 0).unwrap();
        assert_eq!(loc.total(), 6);
        let lift = lattes_map().at(ZERO);
        for &cp in loc.finite_points() {
            let (_, m) = lift.affine_map_with_jacobian(&CVec::one(cp), 1).unwrap();
            assert!(m.det().norm() < 1e-8);
        }
    }

    #[test]
    fn skew_samples_lie_on_axes() {
        let loc = critical_points(&skew_family(), ZERO, 200, 2.0, 7).unwrap();
        let CriticalLocus::Curve { samples } = loc else { panic!() };
        assert_eq!(samples.len(), 200);
        let mut on_z = 0;
        let mut on_w = 0;
        for p in &samples {
            assert!(p[0].norm() < 1e-12 || p[1].norm() < 1e-12);
            if p[0].norm() < 1e-12 {
                on_z += 1;
            } else {
                on_w += 1;
            }
        }
        // two lines of equal area inside the bidisc
        assert!(on_z > 60 && on_w > 60, "{on_z} {on_w}");
    }

    #[test]
    fn generic_p2_is_unsupported() {
        let e = critical_points(&crate::family::skew_lift_generic(), ZERO, 10, 1.0, 0).unwrap_err();
        assert_eq!(e.name(), "UnsupportedFamily");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn rational_families_have_2d_minus_2_critical_points(
            d in 2usize..=5,
            coefs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
        ) {
            let mk = |off: usize| -> Vec<Term> {
                (0..=d).map(|j| {
                    let (a, b) = coefs[(off + j) % coefs.len()];
                    Term { exps: vec![j as u32, (d - j) as u32], coef: ParamPolynomial::new(vec![c(a, b)]) }
                }).collect()
            };
            let f = FamilySpec::new(1, d, "random", FamilyKind::Generic, vec![mk(0), mk(6)]).unwrap();
            let loc = critical_points(&f, ZERO, 0, 1.0, 0).unwrap();
            prop_assert_eq!(loc.total(), 2 * d - 2);
        }
    }
}
