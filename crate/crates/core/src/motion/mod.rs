//! Periodic cycles, their continuation in the parameter, multiplier
//! crossings, holomorphic motions of finite hyperbolic sets and the
//! contraction of inverse branches along backward orbits.

mod contraction;
mod cycles;
mod holomorphic;
mod track;

pub use contraction::{contraction_report, ContractionConfig, ContractionReport, ContractionRow};
pub use cycles::{find_cycles, multiplier_via_lift, CycleSet};
pub use holomorphic::{motion_hyperbolic, MotionConfig, MotionRecord};
pub use track::{continue_cycle, continue_cycle_grid, crossing_detect, segment, CloudSource, CrossingEvent, CycleTrack, NoClouds, TrackBroken, WalkClouds};

use crate::cvec::{CMat, CVec, C64};
use crate::error::{Error, Result};
use crate::family::{FamilySpec, Lift};
use crate::io::json_complex;
use serde_json::{json, Value};

/// Margin used to classify multiplier moduli against 1.
pub const NEUTRAL_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleClass {
    Repelling,
    Attracting,
    Neutral,
    Saddle,
}

impl CycleClass {
    pub fn from_multipliers(w: &[C64]) -> Self {
        let hi = w.iter().all(|w| w.norm() > 1.0 + NEUTRAL_MARGIN);
        let lo = w.iter().all(|w| w.norm() < 1.0 - NEUTRAL_MARGIN);
        let some_hi = w.iter().any(|w| w.norm() > 1.0 + NEUTRAL_MARGIN);
        let some_lo = w.iter().any(|w| w.norm() < 1.0 - NEUTRAL_MARGIN);
        if hi {
            CycleClass::Repelling
        } else if lo {
            CycleClass::Attracting
        } else if some_hi && some_lo {
            CycleClass::Saddle
        } else {
            CycleClass::Neutral
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CycleClass::Repelling => "repelling",
            CycleClass::Attracting => "attracting",
            CycleClass::Neutral => "neutral",
            CycleClass::Saddle => "saddle",
        }
    }
}

/// A periodic orbit of exact period `period` in the standard chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Cycle {
    pub lambda: C64,
    pub period: usize,
    pub points: Vec<CVec>,
    /// Eigenvalues of `D(f^p)` at the first point, sorted by modulus.
    pub multipliers: Vec<C64>,
    pub class: CycleClass,
}

impl Cycle {
    pub fn is_repelling(&self) -> bool {
        self.class == CycleClass::Repelling
    }

    pub fn min_multiplier_modulus(&self) -> f64 {
        self.multipliers.iter().map(|w| w.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Value {
        let pt = |p: &CVec| {
            if p.len() == 1 {
                json_complex(p[0])
            } else {
                Value::Array(p.iter().map(|z| json_complex(*z)).collect())
            }
        };
        json!({
            "lambda": json_complex(self.lambda),
            "period": self.period,
            "points": self.points.iter().map(pt).collect::<Vec<_>>(),
            "multipliers": self.multipliers.iter().map(|w| json_complex(*w)).collect::<Vec<_>>(),
            "class": self.class.as_str(),
        })
    }
}

/// `f_λ` in the standard chart with first derivatives in `z` and `λ`.
#[derive(Clone, Debug)]
pub struct ChartDynamics {
    lift: Lift,
    dlift: Lift,
    chart: usize,
    k: usize,
}

impl ChartDynamics {
    pub fn new(spec: &FamilySpec, lambda: C64) -> Self {
        ChartDynamics { lift: spec.at(lambda), dlift: spec.dlambda_at(lambda), chart: spec.standard_chart(), k: spec.k() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lift(&self) -> &Lift {
        &self.lift
    }

    pub fn step(&self, z: &CVec) -> Result<(CVec, CMat)> {
        self.lift.affine_map_with_jacobian(z, self.chart)
    }

    /// `(f(z), Df(z), ∂_λ f(z))`.
    pub fn step_full(&self, z: &CVec) -> Result<(CVec, CMat, CVec)> {
        let zt = z.homogenize(self.chart);
        let (fz, df) = self.lift.affine_map_with_jacobian(z, self.chart)?;
        let big = self.lift.eval(&zt);
        let dl = self.dlift.eval(&zt);
        let t = big[self.chart];
        let dt = dl[self.chart];
        let mut dv = CVec::zeros(self.k);
        let mut m = 0;
        for i in 0..=self.k {
            if i != self.chart {
                dv[m] = (dl[i] * t - big[i] * dt) / (t * t);
                m += 1;
            }
        }
        Ok((fz, df, dv))
    }

    pub fn iterate(&self, z: &CVec, n: usize) -> Result<CVec> {
        let mut x = *z;
        for _ in 0..n {
            x = self.lift.affine_map(&x, self.chart)?;
        }
        Ok(x)
    }

    /// `(f^n(z), D f^n(z))`.
    pub fn iterate_jac(&self, z: &CVec, n: usize) -> Result<(CVec, CMat)> {
        let mut x = *z;
        let mut a = CMat::identity(self.k);
        for _ in 0..n {
            let (fx, df) = self.step(&x)?;
            a = df.mul(&a);
            x = fx;
        }
        Ok((x, a))
    }

    /// `(f^n(z), D f^n(z), ∂_λ f^n(z))`.
    pub fn iterate_full(&self, z: &CVec, n: usize) -> Result<(CVec, CMat, CVec)> {
        let mut x = *z;
        let mut a = CMat::identity(self.k);
        let mut v = CVec::zeros(self.k);
        for _ in 0..n {
            let (fx, df, dl) = self.step_full(&x)?;
            a = df.mul(&a);
            v = df.mul_vec(&v).add(&dl);
            x = fx;
        }
        Ok((x, a, v))
    }

    /// Newton for `f^n(u) = target` from `u0`. Returns the solution and the
    /// final Jacobian of `f^n`.
    pub fn solve_iterate(&self, target: &CVec, u0: &CVec, n: usize, tol: f64) -> Result<(CVec, CMat)> {
        let mut u = *u0;
        for _ in 0..60 {
            let (fu, a) = self.iterate_jac(&u, n)?;
            let r = fu.sub(target);
            let step = a.solve(&r).ok_or(Error::JacobianSingular { rejected: 1 })?;
            u = u.sub(&step);
            if !u.is_finite() {
                break;
            }
            if step.norm() <= tol * (1.0 + u.norm()) {
                let (fu, a) = self.iterate_jac(&u, n)?;
                if fu.dist(target) <= 1e3 * tol * (1.0 + target.norm()) {
                    return Ok((u, a));
                }
                break;
            }
        }
        Err(Error::RootFindingFailure { residual: f64::INFINITY })
    }

    /// Newton for `f^p(z) = z` from `z0`.
    pub fn polish_periodic(&self, z0: &CVec, p: usize) -> Result<CVec> {
        let mut z = *z0;
        for it in 0..80 {
            let (fz, a) = self.iterate_jac(&z, p)?;
            let r = fz.sub(&z);
            let mut m = a;
            for i in 0..self.k {
                m.set(i, i, m.get(i, i) - C64::new(1.0, 0.0));
            }
            let Some(step) = m.solve(&r) else { break };
            let next = z.sub(&step);
            if !next.is_finite() {
                break;
            }
            z = next;
            if step.norm() <= 1e-15 * (1.0 + z.norm()) || (it > 40 && step.norm() <= 1e-12 * (1.0 + z.norm())) {
                break;
            }
        }
        let res = self.iterate(&z, p)?.dist(&z);
        if res <= PERIODIC_RESIDUAL * (1.0 + z.norm()) {
            Ok(z)
        } else {
            Err(Error::RootFindingFailure { residual: res })
        }
    }

    /// Builds the cycle through `z`, which must be periodic of exact period `p`.
    pub fn cycle_through(&self, lambda: C64, z: &CVec, p: usize) -> Result<Cycle> {
        let mut points = Vec::with_capacity(p);
        let mut x = *z;
        let mut a = CMat::identity(self.k);
        for _ in 0..p {
            points.push(x);
            let (fx, df) = self.step(&x)?;
            a = df.mul(&a);
            x = fx;
        }
        let multipliers = if self.k == 1 { vec![a.get(0, 0)] } else { a.eigenvalues() };
        let class = CycleClass::from_multipliers(&multipliers);
        Ok(Cycle { lambda, period: p, points, multipliers, class })
    }

    /// Smallest `q` dividing `p` with `f^q(z) ≈ z`.
    pub fn minimal_period(&self, z: &CVec, p: usize) -> Result<usize> {
        for q in 1..p {
            if p % q == 0 && self.iterate(z, q)?.dist(z) <= 1e-8 * (1.0 + z.norm()) {
                return Ok(q);
            }
        }
        Ok(p)
    }
}

/// Residual accepted for periodic points (relative to `1 + |z|`).
pub const PERIODIC_RESIDUAL: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{quadratic_family, skew_family};

    #[test]
    fn lambda_derivative_matches_complex_step_oracle() {
        // f = z² + λ: ∂_λ f^2(z) = 2 f(z) + 1
        let d = ChartDynamics::new(&quadratic_family(), C64::new(0.3, 0.2));
        let z = CVec::one(C64::new(0.4, -0.7));
        let (_, _, v) = d.iterate_full(&z, 2).unwrap();
        let f1 = z[0] * z[0] + C64::new(0.3, 0.2);
        assert!((v[0] - (2.0 * f1 + 1.0)).norm() < 1e-14);
    }

    #[test]
    fn skew_lambda_derivative_by_finite_differences() {
        let f = skew_family();
        let l = C64::new(-0.4, 0.1);
        let z = CVec::two(C64::new(0.3, 0.2), C64::new(-0.5, 0.4));
        let (_, _, v) = ChartDynamics::new(&f, l).iterate_full(&z, 3).unwrap();
        let h = 1e-6;
        let a = ChartDynamics::new(&f, l + h).iterate(&z, 3).unwrap();
        let b = ChartDynamics::new(&f, l - h).iterate(&z, 3).unwrap();
        let fd = a.sub(&b).scale_re(0.5 / h);
        assert!(fd.dist(&v) < 1e-7);
    }

    #[test]
    fn classification() {
        let c = |x: f64| C64::new(x, 0.0);
        assert_eq!(CycleClass::from_multipliers(&[c(2.0)]), CycleClass::Repelling);
        assert_eq!(CycleClass::from_multipliers(&[c(0.0)]), CycleClass::Attracting);
        assert_eq!(CycleClass::from_multipliers(&[c(1.0)]), CycleClass::Neutral);
        assert_eq!(CycleClass::from_multipliers(&[c(0.5), c(3.0)]), CycleClass::Saddle);
    }
}
