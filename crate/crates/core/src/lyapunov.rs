//! The sum of Lyapunov exponents `L(λ) = ∫ log Jac f_λ dμ_λ`.
//!
//! Two independent estimators are offered.
//!
//! * `backward-birkhoff` averages the Fubini–Study log-Jacobian over clouds
//!   produced by backward random walks. Jacobians are taken with respect to
//!   the Fubini–Study metric, computed chart-free at a unit lift `u`:
//!   `log |det DF(u)| − log d − (k+1) log ‖F(u)‖`, which in the standard chart
//!   is `log |det Df(z)| + (k+1)/2 · (log(1+|z|²) − log(1+|f(z)|²))`.
//! * `przytycki` (polynomials on P^1 only) uses
//!   `L = log d + Σ_c g(c)` over the finite critical points, `g` the escape rate.
//!
//! Forward Birkhoff sums are deliberately not offered: inside hyperbolic
//! components forward orbits are captured by attracting cycles and would
//! measure the exponent of the cycle rather than of μ_λ.
//!
//! # Standard error of the backward estimator
//!
//! Consecutive states of one walk are correlated, and for maps like `z² − 2`
//! the log-Jacobian differs from a constant by a coboundary, so a naive
//! `sd/√n` grossly overstates the error of the chain mean. The estimate is
//! therefore computed from `walks` independent walks (seeds `seed + i`) and its
//! standard error is the spread of the walk means divided by `√walks`, floored
//! at the summation rounding level.

use crate::cvec::C64;
use crate::error::{Error, Result};
use crate::family::{critical_points, fs_log_jacobian, FamilyKind, FamilySpec};
use crate::green::GreenEvaluator;
use crate::grid::ParameterGrid;
use crate::io::{fmt12, Table};
use crate::sampler::{backward_walks, MeasureCloud};
use crate::seeds::cell_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Points with `|det DF(u)|` below this (at a unit lift) count as critical.
pub const SINGULAR_JACOBIAN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "backward-birkhoff")]
    BackwardBirkhoff,
    #[serde(rename = "przytycki")]
    Przytycki,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::BackwardBirkhoff => "backward-birkhoff",
            Method::Przytycki => "przytycki",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward-birkhoff" | "backward" => Ok(Method::BackwardBirkhoff),
            "przytycki" => Ok(Method::Przytycki),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Nats.
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub n_samples: usize,
    /// Cloud points discarded for lying on the critical set.
    pub rejected: usize,
}

impl LyapunovEstimate {
    /// The lower bound `L ≥ k log d / 2`, relaxed by five standard errors.
    pub fn respects_lower_bound(&self, k: usize, d: usize) -> bool {
        self.value >= k as f64 * (d as f64).ln() / 2.0 - 5.0 * self.stderr
    }
}

/// Settings shared by the pointwise estimators and grid sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Total recorded samples, split evenly among the walks.
    pub n_samples: usize,
    pub walks: usize,
    pub burn_in: usize,
    /// Green-function tolerance for the critical-point sum.
    pub tol: f64,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn backward(n_samples: usize, seed: u64) -> Self {
        EstimatorConfig { method: Method::BackwardBirkhoff, n_samples, walks: 40, burn_in: 100, tol: 1e-9, seed }
    }

    pub fn przytycki(tol: f64) -> Self {
        EstimatorConfig { method: Method::Przytycki, n_samples: 0, walks: 0, burn_in: 0, tol, seed: 0 }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::backward(20_000, 0)
    }
}

/// Fubini–Study log-Jacobians over a cloud, skipping critical points.
pub fn cloud_log_jacobians(spec: &FamilySpec, cloud: &MeasureCloud) -> (Vec<f64>, usize) {
    let lift = spec.at(cloud.lambda);
    let mut out = Vec::with_capacity(cloud.lifts.len());
    let mut rejected = 0;
    for u in &cloud.lifts {
        let (fu, df) = lift.eval_with_jacobian(u);
        let det = df.det();
        if det.norm() < SINGULAR_JACOBIAN {
            rejected += 1;
            continue;
        }
        out.push(fs_log_jacobian(det, fu.norm(), spec.d(), spec.k()));
    }
    (out, rejected)
}

/// Backward-walk estimate with the default 40 walks and burn-in 100.
pub fn lyapunov_backward(spec: &FamilySpec, lambda: C64, n_samples: usize, seed: u64) -> Result<LyapunovEstimate> {
    lyapunov_backward_with(spec, lambda, &EstimatorConfig::backward(n_samples, seed))
}

pub fn lyapunov_backward_with(spec: &FamilySpec, lambda: C64, cfg: &EstimatorConfig) -> Result<LyapunovEstimate> {
    let walks = cfg.walks.max(2);
    let per_walk = (cfg.n_samples / walks).max(1);
    let clouds = backward_walks(spec, lambda, walks, per_walk, cfg.burn_in, cfg.seed)?;
    let mut means = Vec::with_capacity(walks);
    let mut rejected = 0;
    let mut total = 0;
    let mut max_abs: f64 = 0.0;
    for c in &clouds {
        let (vals, rej) = cloud_log_jacobians(spec, c);
        rejected += rej + c.rejected;
        if vals.is_empty() {
            return Err(Error::JacobianSingular { rejected });
        }
        total += vals.len();
        max_abs = vals.iter().fold(max_abs, |m, v| m.max(v.abs()));
        means.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    let w = means.len() as f64;
    let mean = means.iter().sum::<f64>() / w;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (w - 1.0);
    let rounding = total as f64 * f64::EPSILON * max_abs;
    let stderr = (var / w).sqrt().max(rounding);
    Ok(LyapunovEstimate { value: mean, stderr, method: Method::BackwardBirkhoff, n_samples: total, rejected })
}

/// `log d + Σ g(c)` over the finite critical points of a polynomial family.
pub fn lyapunov_przytycki(spec: &FamilySpec, lambda: C64, tol: f64) -> Result<LyapunovEstimate> {
    let ev = GreenEvaluator::at_point(spec, lambda, tol)?;
    lyapunov_przytycki_with(&ev, lambda)
}

/// As `lyapunov_przytycki`, reusing an evaluator certified on a window.
pub fn lyapunov_przytycki_with(ev: &GreenEvaluator, lambda: C64) -> Result<LyapunovEstimate> {
    let spec = ev.family();
    if spec.k() != 1 || spec.kind() != FamilyKind::Polynomial {
        return Err(Error::UnsupportedFamily("the critical-point formula needs a polynomial family on P^1".into()));
    }
    let crit = critical_points(spec, lambda, 0, 0.0, 0)?;
    let lift = spec.at(lambda);
    let mut value = (spec.d() as f64).ln();
    for &c in crit.finite_points() {
        value += ev.escape_rate_with(&lift, &crate::cvec::CVec::one(c))?.value;
    }
    let d = spec.d() as f64;
    Ok(LyapunovEstimate { value, stderr: (2.0 * d - 2.0) * ev.tol(), method: Method::Przytycki, n_samples: 0, rejected: 0 })
}

pub fn estimate(spec: &FamilySpec, lambda: C64, cfg: &EstimatorConfig) -> Result<LyapunovEstimate> {
    match cfg.method {
        Method::BackwardBirkhoff => lyapunov_backward_with(spec, lambda, cfg),
        Method::Przytycki => lyapunov_przytycki(spec, lambda, cfg.tol),
    }
}

/// Settings and provenance of a field, written as the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub family: String,
    pub config: EstimatorConfig,
    pub grid: ParameterGrid,
    /// Per-cell seed rule, stated for readers of the sidecar.
    pub seed_rule: String,
    /// Sup bound used by the Green evaluator (przytycki only).
    pub green_sup_bound: Option<f64>,
    pub missing_cells: usize,
}

#[derive(Clone, Debug)]
pub struct LyapunovField {
    pub grid: ParameterGrid,
    /// Row-major (`i` fastest); `None` where the estimator failed.
    pub values: Vec<Option<LyapunovEstimate>>,
    pub meta: FieldMeta,
}

/// Evaluate the estimator at every grid cell. Cell `(i, j)` uses seed
/// `cell_seed(cfg.seed, i, j)`; failures are recorded as missing values.
pub fn sweep_grid(spec: &FamilySpec, grid: &ParameterGrid, cfg: &EstimatorConfig) -> Result<LyapunovField> {
    let ev = match cfg.method {
        Method::Przytycki => Some(GreenEvaluator::new(spec, grid.center, grid.covering_radius(), cfg.tol, cfg.seed)?),
        Method::BackwardBirkhoff => None,
    };
    let values: Vec<Option<LyapunovEstimate>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.coords(idx);
            let lambda = grid.cell(i, j);
            let r = match &ev {
                Some(ev) => lyapunov_przytycki_with(ev, lambda),
                None => lyapunov_backward_with(spec, lambda, &EstimatorConfig { seed: cell_seed(cfg.seed, i, j), ..*cfg }),
            };
            r.ok()
        })
        .collect();
    let missing = values.iter().filter(|v| v.is_none()).count();
    let meta = FieldMeta {
        family: spec.label().to_string(),
        config: *cfg,
        grid: *grid,
        seed_rule: "cell seed = seed ^ splitmix64(splitmix64(i) ^ rotl(j, 32))".into(),
        green_sup_bound: ev.as_ref().map(|e| e.sup_bound()),
        missing_cells: missing,
    };
    Ok(LyapunovField { grid: *grid, values, meta })
}

impl LyapunovField {
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.values[self.grid.index(i, j)].map(|e| e.value)
    }

    pub fn max_stderr(&self) -> f64 {
        self.values.iter().flatten().map(|e| e.stderr).fold(0.0, f64::max)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["i", "j", "re_lambda", "im_lambda", "L", "stderr", "method"]);
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j) = self.grid.coords(idx);
            let l = self.grid.cell(i, j);
            let (val, se) = match v {
                Some(e) => (fmt12(e.value), fmt12(e.stderr)),
                None => (String::new(), String::new()),
            };
            t.push(vec![i.to_string(), j.to_string(), fmt12(l.re), fmt12(l.im), val, se, self.meta.config.method.as_str().into()]);
        }
        t
    }

    /// Writes `path` and the sidecar `path` with extension `.meta.json`.
    pub fn write(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_table().write(path)?;
        crate::io::write_json(path.with_extension("meta.json"), &self.meta)
    }

    /// Load a field written by `write`.
    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta: FieldMeta = crate::io::read_json(path.with_extension("meta.json"))?;
        let t = Table::read(path)?;
        let (ci, cj) = (t.column("i")?, t.column("j")?);
        let vals = t.f64_column("L")?;
        let errs = t.f64_column("stderr")?;
        let grid = meta.grid;
        if t.rows.len() != grid.len() {
            return Err(Error::Parse { line: 1, msg: format!("expected {} cells, found {}", grid.len(), t.rows.len()) });
        }
        let mut values = vec![None; grid.len()];
        for (r, row) in t.rows.iter().enumerate() {
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse { line: r + 2, msg: format!("bad index {s:?}") });
            let (i, j) = (parse(&row[ci])?, parse(&row[cj])?);
            if vals[r].is_finite() {
                values[grid.index(i, j)] = Some(LyapunovEstimate {
                    value: vals[r],
                    stderr: errs[r],
                    method: meta.config.method,
                    n_samples: meta.config.n_samples,
                    rejected: 0,
                });
            }
        }
        Ok(LyapunovField { grid, values, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::ZERO;
    use crate::family::{cubic_family, product_squares, quadratic_family, square_map_p1};
    use std::f64::consts::LN_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn przytycki_closed_forms() {
        let f = quadratic_family();
        for l in [ZERO, c(-2.0, 0.0)] {
            let e = lyapunov_przytycki(&f, l, 1e-9).unwrap();
            assert!((e.value - LN_2).abs() <= 1e-6);
            assert_eq!(e.stderr, 2e-9);
        }
    }

    #[test]
    fn przytycki_far_outside() {
        // oracle: 60 steps of z ↦ z² + 10 from 0 on log|z|, which stays real
        // and positive, so log(z² + 10) = 2 log z + log(1 + 10 z^{-2}) exactly
        let f = quadratic_family();
        let mut log_z = 10f64.ln();
        for _ in 1..60 {
            log_z = 2.0 * log_z + (10.0 * (-2.0 * log_z).exp()).ln_1p();
        }
        let g = log_z / 2f64.powi(60);
        let e = lyapunov_przytycki(&f, c(10.0, 0.0), 1e-9).unwrap();
        assert!((e.value - (LN_2 + g)).abs() <= 2e-9, "{} vs {}", e.value, LN_2 + g);
    }

    #[test]
    fn przytycki_cubic_uses_both_critical_points() {
        // z³ − 3z is conjugate to a Chebyshev map, both critical orbits bounded
        let e = lyapunov_przytycki(&cubic_family(), c(-3.0, 0.0), 1e-9).unwrap();
        assert!((e.value - 3f64.ln()).abs() <= 1e-6);
    }

    #[test]
    fn przytycki_rejects_generic_families() {
        assert!(matches!(lyapunov_przytycki(&square_map_p1(), ZERO, 1e-9), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn backward_closed_forms() {
        let f = quadratic_family();
        for l in [ZERO, c(-2.0, 0.0)] {
            let e = lyapunov_backward(&f, l, 20_000, 1).unwrap();
            assert!(e.stderr <= 2e-3, "stderr {}", e.stderr);
            assert!((e.value - LN_2).abs() <= 3.0 * e.stderr, "{} ± {}", e.value, e.stderr);
        }
    }

    #[test]
    fn backward_product_is_additive() {
        let e = lyapunov_backward(&product_squares(), ZERO, 20_000, 2).unwrap();
        assert!((e.value - 2.0 * LN_2).abs() <= 3.0 * e.stderr + 1e-12);
    }

    #[test]
    fn backward_is_seed_deterministic() {
        let f = quadratic_family();
        let a = lyapunov_backward(&f, c(-0.1, 0.7), 4000, 3).unwrap();
        let b = lyapunov_backward(&f, c(-0.1, 0.7), 4000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_family_sweep_is_flat() {
        let g = ParameterGrid::new(ZERO, 1.0, 1.0, 3, 3).unwrap();
        let field = sweep_grid(&square_map_p1(), &g, &EstimatorConfig::backward(4000, 5)).unwrap();
        let vals: Vec<LyapunovEstimate> = field.values.iter().map(|v| v.unwrap()).collect();
        for a in &vals {
            for b in &vals {
                assert!((a.value - b.value).abs() <= 6.0 * a.stderr.max(b.stderr) + 1e-12);
            }
        }
    }

    #[test]
    fn cardioid_sweep_is_log_two() {
        let g = ParameterGrid::new(ZERO, 0.1, 0.1, 3, 3).unwrap();
        let field = sweep_grid(&quadratic_family(), &g, &EstimatorConfig::przytycki(1e-9)).unwrap();
        assert!(field.values.iter().all(|v| (v.unwrap().value - LN_2).abs() <= 1e-3));
    }

    #[test]
    fn estimators_agree_on_a_grid() {
        let f = quadratic_family();
        let g = ParameterGrid::new(c(-0.5, 0.3), 1.6, 1.6, 3, 3).unwrap();
        let a = sweep_grid(&f, &g, &EstimatorConfig::przytycki(1e-9)).unwrap();
        let b = sweep_grid(&f, &g, &EstimatorConfig::backward(20_000, 6)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!((x.value - y.value).abs() <= 3.0 * (x.stderr + y.stderr), "{x:?} {y:?}");
            assert!(x.respects_lower_bound(1, 2) && y.respects_lower_bound(1, 2));
        }
    }

    #[test]
    fn field_round_trip() {
        let g = ParameterGrid::new(c(0.3, 0.0), 1.0, 1.0, 4, 3).unwrap();
        let field = sweep_grid(&quadratic_family(), &g, &EstimatorConfig::przytycki(1e-9)).unwrap();
        let dir = std::env::temp_dir().join(format!("biflab-field-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("L.csv");
        field.write(&p).unwrap();
        let back = LyapunovField::read(&p).unwrap();
        assert_eq!(back.grid, field.grid);
        for (a, b) in back.values.iter().zip(&field.values) {
            assert!((a.unwrap().value - b.unwrap().value).abs() <= 1e-11);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
