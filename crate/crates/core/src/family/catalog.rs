//! Families used throughout the test-suite, the self-test and the benches.

use super::{FamilyKind, FamilySpec, Term};
use crate::cvec::C64;
use crate::poly::ParamPolynomial;

fn term(exps: &[u32], coef: &[f64]) -> Term {
    let coeffs = coef.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
    Term { exps: exps.to_vec(), coef: ParamPolynomial::new(coeffs) }
}

/// `z ↦ z² + λ`, lift `(x² + λ t², t²)`.
pub fn quadratic_family() -> FamilySpec {
    FamilySpec::new(
        1,
        2,
        "quadratic z^2+lambda",
        FamilyKind::Polynomial,
        vec![vec![term(&[2, 0], &[1.0, 0.0]), term(&[0, 2], &[0.0, 0.0, 1.0, 0.0])], vec![term(&[0, 2], &[1.0, 0.0])]],
    )
    .expect("valid family")
}

/// `z ↦ z³ + λ z`.
pub fn cubic_family() -> FamilySpec {
    FamilySpec::new(
        1,
        3,
        "cubic z^3+lambda z",
        FamilyKind::Polynomial,
        vec![vec![term(&[3, 0], &[1.0, 0.0]), term(&[1, 2], &[0.0, 0.0, 1.0, 0.0])], vec![term(&[0, 3], &[1.0, 0.0])]],
    )
    .expect("valid family")
}

/// The constant polynomial family `z ↦ z² + c`.
pub fn constant_quadratic(c: C64) -> FamilySpec {
    FamilySpec::new(
        1,
        2,
        format!("constant z^2+({},{})", c.re, c.im),
        FamilyKind::Polynomial,
        vec![vec![term(&[2, 0], &[1.0, 0.0]), term(&[0, 2], &[c.re, c.im])], vec![term(&[0, 2], &[1.0, 0.0])]],
    )
    .expect("valid family")
}

/// `[x : y] ↦ [x² : y²]` on P^1, as a generic λ-independent family.
pub fn square_map_p1() -> FamilySpec {
    FamilySpec::new(
        1,
        2,
        "square map on P^1",
        FamilyKind::Generic,
        vec![vec![term(&[2, 0], &[1.0, 0.0])], vec![term(&[0, 2], &[1.0, 0.0])]],
    )
    .expect("valid family")
}

/// The degree-4 Lattès map `z ↦ (z² + 1)² / (4 z (z² − 1))`.
pub fn lattes_map() -> FamilySpec {
    FamilySpec::new(
        1,
        4,
        "lattes (z^2+1)^2/(4z(z^2-1))",
        FamilyKind::Generic,
        vec![
            vec![term(&[4, 0], &[1.0, 0.0]), term(&[2, 2], &[2.0, 0.0]), term(&[0, 4], &[1.0, 0.0])],
            vec![term(&[3, 1], &[4.0, 0.0]), term(&[1, 3], &[-4.0, 0.0])],
        ],
    )
    .expect("valid family")
}

/// `(z, w) ↦ (z² + λ, w² + z)`, lift `(x² + λ t², y² + x t, t²)`.
pub fn skew_family() -> FamilySpec {
    FamilySpec::new(
        2,
        2,
        "skew (z^2+lambda, w^2+z)",
        FamilyKind::Skew,
        vec![
            vec![term(&[2, 0, 0], &[1.0, 0.0]), term(&[0, 0, 2], &[0.0, 0.0, 1.0, 0.0])],
            vec![term(&[0, 2, 0], &[1.0, 0.0]), term(&[1, 0, 1], &[1.0, 0.0])],
            vec![term(&[0, 0, 2], &[1.0, 0.0])],
        ],
    )
    .expect("valid family")
}

/// The product `(z, w) ↦ (z², w²)` on P^2.
pub fn product_squares() -> FamilySpec {
    FamilySpec::new(
        2,
        2,
        "product (z^2, w^2)",
        FamilyKind::Skew,
        vec![vec![term(&[2, 0, 0], &[1.0, 0.0])], vec![term(&[0, 2, 0], &[1.0, 0.0])], vec![term(&[0, 0, 2], &[1.0, 0.0])]],
    )
    .expect("valid family")
}

/// Generic k = 2 family `(x² + λ t², y² + x t, t²)`; forward operations only.
pub fn skew_lift_generic() -> FamilySpec {
    FamilySpec::new(
        2,
        2,
        "generic (x^2+lambda t^2, y^2+xt, t^2)",
        FamilyKind::Generic,
        vec![
            vec![term(&[2, 0, 0], &[1.0, 0.0]), term(&[0, 0, 2], &[0.0, 0.0, 1.0, 0.0])],
            vec![term(&[0, 2, 0], &[1.0, 0.0]), term(&[1, 0, 1], &[1.0, 0.0])],
            vec![term(&[0, 0, 2], &[1.0, 0.0])],
        ],
    )
    .expect("valid family")
}

/// Degenerate lift `(x y, y²)`; only useful as a negative control.
pub fn degenerate_example() -> FamilySpec {
    FamilySpec::new(
        1,
        2,
        "degenerate (xy, y^2)",
        FamilyKind::Generic,
        vec![vec![term(&[1, 1], &[1.0, 0.0])], vec![term(&[0, 2], &[1.0, 0.0])]],
    )
    .expect("valid family")
}
