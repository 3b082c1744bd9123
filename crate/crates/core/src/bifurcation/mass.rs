use crate::cvec::{C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::family::{binary_form, FamilyKind, FamilySpec};
use crate::io::{fmt12, Table};
use crate::poly::{horner, horner_with_derivative};
use crate::roots::dense_roots;
use rayon::prelude::*;

/// Beyond this modulus the orbit is followed in the chart `u = 1/x`.
pub const CHART_SWITCH: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct MassGrowthConfig {
    pub center: C64,
    pub radius: f64,
    pub n_max: usize,
    /// Quadrature lattice side.
    pub n_theta: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassGrowthReport {
    pub center: C64,
    pub radius: f64,
    pub n_theta: usize,
    /// Lattice nodes inside the disc.
    pub nodes: usize,
    pub n_list: Vec<usize>,
    pub m_n: Vec<f64>,
    /// Orbits followed in the chart at infinity at `n_max`.
    pub escaped: usize,
}

impl MassGrowthReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "m_n"]);
        for (n, m) in self.n_list.iter().zip(&self.m_n) {
            t.push(vec![n.to_string(), fmt12(*m)]);
        }
        t
    }

    pub fn at(&self, n: usize) -> Option<f64> {
        self.n_list.iter().position(|&k| k == n).map(|i| self.m_n[i])
    }
}

/// Chart polynomial `p_λ` and `∂_λ p_λ` (coefficients, increasing degree).
fn chart_poly_with_dlambda(spec: &FamilySpec, lambda: C64) -> (Vec<C64>, Vec<C64>) {
    let (lift, dlift) = (spec.at(lambda), spec.dlambda_at(lambda));
    let (num, dnum) = (binary_form(&lift, 0), binary_form(&dlift, 0));
    let (s, ds) = (binary_form(&lift, 1)[0], binary_form(&dlift, 1)[0]);
    let p = num.iter().map(|c| c / s).collect();
    let dp = num.iter().zip(&dnum).map(|(c, dc)| (dc * s - c * ds) / (s * s)).collect();
    (p, dp)
}

fn derivative(c: &[C64]) -> Vec<C64> {
    (1..c.len()).map(|i| c[i] * i as f64).collect()
}

/// `g(u) = 1/p(1/u) = u^d / R(u)` with `R(u) = Σ a_i u^{d−i}`; returns
/// `(g, g′, ∂_λ g)` at `u`.
fn at_infinity(p: &[C64], dp: &[C64], u: C64) -> (C64, C64, C64) {
    let d = p.len() - 1;
    let rev: Vec<C64> = p.iter().rev().copied().collect();
    let drev: Vec<C64> = dp.iter().rev().copied().collect();
    let (r, dr) = horner_with_derivative(&rev, u);
    let rl = horner(&drev, u);
    let ud = u.powu(d as u32);
    let g = ud / r;
    let gp = (u.powu(d as u32 - 1) * d as f64 * r - ud * dr) / (r * r);
    (g, gp, -ud * rl / (r * r))
}

/// Spherical speed squared `|∂_λ f^n(c)|² / (1 + |f^n(c)|²)²` for
/// `n = 1..=n_max`, following the critical orbit and its λ-derivative.
fn spherical_speeds(p: &[C64], dp: &[C64], c: C64, dc: C64, n_max: usize) -> (Vec<f64>, bool) {
    let mut out = Vec::with_capacity(n_max);
    // state in the finite chart (x, D) or at infinity (u, D_u)
    let (mut x, mut dx) = (c, dc);
    let mut inf = false;
    for _ in 0..n_max {
        if !inf {
            let (px, ppx) = horner_with_derivative(p, x);
            let dl = horner(dp, x);
            dx = ppx * dx + dl;
            x = px;
            if x.norm() > CHART_SWITCH {
                // u = 1/x, D_u = −D/x²
                dx = -dx / (x * x);
                x = ONE / x;
                inf = true;
            }
        } else {
            let (g, gp, gl) = at_infinity(p, dp, x);
            dx = gp * dx + gl;
            x = g;
            if x.norm() > 1.0 {
                dx = -dx / (x * x);
                x = ONE / x;
                inf = false;
            }
        }
        let s = if dx.is_finite() { dx.norm() / (1.0 + x.norm_sqr()) } else { 0.0 };
        out.push(s * s);
    }
    (out, inf)
}

/// Graph-area proxy for the mass of `(f^n)_* C_f` over the disc `U`: with
/// `x_n(λ) = f_λ^n(c(λ))` for each finite critical point,
/// `m_n = d^{-n} Σ_c ∫_U (1 + |∂_λ x_n|² / (1 + |x_n|²)²) dA`.
/// The λ-derivative follows `D_{j+1} = p′(x_j) D_j + ∂_λ p(x_j)` from
/// `D_0 = c′(λ)`. Quadrature uses the nodes of an `n_theta²` lattice inside
/// the disc with weights summing to its exact area.
pub fn mass_growth(spec: &FamilySpec, cfg: &MassGrowthConfig) -> Result<MassGrowthReport> {
    if spec.k() != 1 || spec.kind() != FamilyKind::Polynomial {
        return Err(Error::UnsupportedFamily("mass growth needs a polynomial family on P^1".into()));
    }
    if cfg.n_theta < 2 || !(cfg.radius > 0.0) || cfg.n_max == 0 {
        return Err(Error::InvalidArgument("need n_theta >= 2, radius > 0 and n_max >= 1".into()));
    }
    let n = cfg.n_theta;
    let h = 2.0 * cfg.radius / n as f64;
    let nodes: Vec<C64> = (0..n * n)
        .map(|k| {
            let (a, b) = (k % n, k / n);
            cfg.center + C64::new(-cfg.radius + (a as f64 + 0.5) * h, -cfg.radius + (b as f64 + 0.5) * h)
        })
        .filter(|l| (l - cfg.center).norm() <= cfg.radius)
        .collect();
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("quadrature lattice misses the disc".into()));
    }
    let weight = std::f64::consts::PI * cfg.radius * cfg.radius / nodes.len() as f64;

    let per_node: Vec<Result<(Vec<f64>, usize)>> = nodes
        .par_iter()
        .map(|&l| {
            let (p, dp) = chart_poly_with_dlambda(spec, l);
            let dd = derivative(&p);
            let d2 = derivative(&dd);
            let ddl = derivative(&dp);
            let crit = dense_roots(&dd)?;
            let mut sums = vec![0.0; cfg.n_max];
            let mut escaped = 0;
            for c in crit {
                // c′(λ) from p′(c(λ)) ≡ 0
                let p2 = horner(&d2, c);
                let dc = if p2 == ZERO { ZERO } else { -horner(&ddl, c) / p2 };
                let (speeds, esc) = spherical_speeds(&p, &dp, c, dc, cfg.n_max);
                escaped += esc as usize;
                for (acc, s) in sums.iter_mut().zip(speeds) {
                    *acc += 1.0 + s;
                }
            }
            Ok((sums, escaped))
        })
        .collect();

    let mut totals = vec![0.0; cfg.n_max];
    let mut escaped = 0;
    for r in per_node {
        let (s, e) = r?;
        escaped += e;
        for (t, v) in totals.iter_mut().zip(s) {
            *t += v;
        }
    }
    let d = spec.d() as f64;
    let n_list: Vec<usize> = (1..=cfg.n_max).collect();
    let m_n = n_list.iter().zip(&totals).map(|(&k, t)| weight * t * d.powi(-(k as i32))).collect();
    Ok(MassGrowthReport { center: cfg.center, radius: cfg.radius, n_theta: cfg.n_theta, nodes: nodes.len(), n_list, m_n, escaped })
}
