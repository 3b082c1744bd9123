use crate::cvec::{C64, ZERO};
use serde::{Deserialize, Serialize};

/// Polynomial in the family parameter, `c_0 + c_1 λ + ... + c_r λ^r`.
///
/// Trailing zero coefficients are dropped on construction so that `degree`
/// is the index of the last nonzero coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPolynomial {
    coeffs: Vec<C64>,
}

impl ParamPolynomial {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        ParamPolynomial { coeffs }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn eval(&self, lambda: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * lambda + c)
    }

    pub fn derivative(&self) -> ParamPolynomial {
        let c = self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        ParamPolynomial::new(c)
    }
}

/// Horner evaluation of `p(z)` and `p'(z)` for coefficients in increasing
/// degree order.
#[inline]
pub fn horner_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

#[inline]
pub fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
}

/// `p(z + h) - p(z)` without cancellation, via the Taylor coefficients of `p`
/// at `z`.
pub fn forward_difference(coeffs: &[C64], z: C64, h: C64) -> C64 {
    // Taylor shift: t[m] = p^(m)(z)/m!
    let mut t: Vec<C64> = coeffs.to_vec();
    let n = t.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let next = t[j + 1];
            t[j] += z * next;
        }
    }
    // t now holds Taylor coefficients at z in increasing order.
    let mut acc = ZERO;
    for m in (1..n).rev() {
        acc = (acc + t[m]) * h;
    }
    acc
}
