//! Holomorphic families of endomorphisms of P^1 and P^2 given by homogeneous
//! lifts whose coefficients are polynomials in one complex parameter.

mod catalog;
mod critical;
mod nondegenerate;
mod parse;

pub use catalog::*;
pub use critical::{critical_points, CriticalLocus};
pub use nondegenerate::{check_nondegenerate, NondegeneracyReport};
pub(crate) use critical::binary_form;

use crate::cvec::{CMat, CVec, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::poly::ParamPolynomial;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Arbitrary lift; only forward operations are available when k = 2.
    Generic,
    /// k = 1 and the last coordinate is `c t^d`, so the chart map is a polynomial.
    Polynomial,
    /// k = 2 skew product `(p(z) + .., q(w) + r(z))`, last coordinate `c t^d`.
    Skew,
}

impl FamilyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyKind::Generic => "generic",
            FamilyKind::Polynomial => "polynomial",
            FamilyKind::Skew => "skew",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(FamilyKind::Generic),
            "polynomial" => Ok(FamilyKind::Polynomial),
            "skew" => Ok(FamilyKind::Skew),
            other => Err(Error::InvalidFamily(format!("unknown kind {other:?}"))),
        }
    }
}

/// One monomial of a lifted coordinate: exponents of `(z_0, .., z_k)` and a
/// parameter-dependent coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exps: Vec<u32>,
    pub coef: ParamPolynomial,
}

/// A holomorphic family `f_λ` of degree-`d` endomorphisms of P^k, `k ∈ {1, 2}`,
/// stored as the lift `F_λ : C^{k+1} → C^{k+1}`. Immutable once built.
///
/// The standard chart is the one where the last coordinate equals one.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    k: usize,
    d: usize,
    label: String,
    kind: FamilyKind,
    coords: Vec<Vec<Term>>,
}

impl FamilySpec {
    pub fn new(k: usize, d: usize, label: impl Into<String>, kind: FamilyKind, coords: Vec<Vec<Term>>) -> Result<Self> {
        let spec = FamilySpec { k, d, label: label.into(), kind, coords };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFamily(m));
        if !(1..=2).contains(&self.k) {
            return bad(format!("k must be 1 or 2, got {}", self.k));
        }
        if self.d < 2 {
            return bad(format!("degree must be at least 2, got {}", self.d));
        }
        if self.d > 64 {
            return bad(format!("degree {} is unreasonably large", self.d));
        }
        if self.coords.len() != self.k + 1 {
            return bad(format!("expected {} lifted coordinates, got {}", self.k + 1, self.coords.len()));
        }
        for (i, terms) in self.coords.iter().enumerate() {
            for t in terms {
                if t.exps.len() != self.k + 1 {
                    return bad(format!("coordinate {i}: monomial needs {} exponents", self.k + 1));
                }
                let total: u32 = t.exps.iter().sum();
                if total as usize != self.d {
                    return bad(format!("coordinate {i}: exponents {:?} sum to {total}, not {}", t.exps, self.d));
                }
            }
        }
        match self.kind {
            FamilyKind::Generic => {}
            FamilyKind::Polynomial => {
                if self.k != 1 {
                    return bad("polynomial kind requires k = 1".into());
                }
                self.require_pure_power(1, 1)?;
                self.require_constant_leading(0, &[self.d as u32, 0])?;
            }
            FamilyKind::Skew => {
                if self.k != 2 {
                    return bad("skew kind requires k = 2".into());
                }
                self.require_pure_power(2, 2)?;
                if self.coords[0].iter().any(|t| t.exps[1] != 0 && !t.coef.is_zero()) {
                    return bad("skew kind: first coordinate must not depend on the second variable".into());
                }
                self.require_constant_leading(0, &[self.d as u32, 0, 0])?;
                self.require_constant_leading(1, &[0, self.d as u32, 0])?;
            }
        }
        Ok(())
    }

    /// Coordinate `i` must be a single λ-independent multiple of `z_var^d`.
    fn require_pure_power(&self, i: usize, var: usize) -> Result<()> {
        let live: Vec<&Term> = self.coords[i].iter().filter(|t| !t.coef.is_zero()).collect();
        let ok = live.len() == 1 && live[0].exps[var] as usize == self.d && live[0].coef.is_constant();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidFamily(format!(
                "{} kind: coordinate {i} must be a constant multiple of the d-th power of the last variable",
                self.kind.as_str()
            )))
        }
    }

    fn require_constant_leading(&self, i: usize, exps: &[u32]) -> Result<()> {
        let lead: Vec<&Term> = self.coords[i].iter().filter(|t| t.exps == exps && !t.coef.is_zero()).collect();
        if lead.len() == 1 && lead[0].coef.is_constant() {
            Ok(())
        } else {
            Err(Error::InvalidFamily(format!(
                "{} kind: coordinate {i} needs a nonzero λ-independent monomial {exps:?}",
                self.kind.as_str()
            )))
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn coords(&self) -> &[Vec<Term>] {
        &self.coords
    }

    /// Index of the standard chart coordinate.
    pub fn standard_chart(&self) -> usize {
        self.k
    }

    pub fn is_lambda_independent(&self) -> bool {
        self.coords.iter().flatten().all(|t| t.coef.is_constant())
    }

    /// Whether exact fiberwise preimages are available.
    pub fn supports_preimages(&self) -> bool {
        self.k == 1 || self.kind == FamilyKind::Skew
    }

    /// The lift with coefficients frozen at `lambda`.
    pub fn at(&self, lambda: C64) -> Lift {
        self.build_lift(|p| p.eval(lambda))
    }

    /// `∂F_λ/∂λ` as a lift (same monomials, differentiated coefficients).
    pub fn dlambda_at(&self, lambda: C64) -> Lift {
        self.build_lift(|p| p.derivative().eval(lambda))
    }

    fn build_lift(&self, coef: impl Fn(&ParamPolynomial) -> C64) -> Lift {
        let n = self.k + 1;
        let coords = self
            .coords
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .filter_map(|t| {
                        let c = coef(&t.coef);
                        if c == ZERO {
                            return None;
                        }
                        let mut e = [0u8; 3];
                        for (i, &x) in t.exps.iter().enumerate() {
                            e[i] = x as u8;
                        }
                        Some((e, c))
                    })
                    .collect()
            })
            .collect();
        Lift { n, d: self.d, coords }
    }

    /// `F_λ(z̃)`.
    pub fn evaluate_lift(&self, lambda: C64, z: &CVec) -> CVec {
        self.at(lambda).eval(z)
    }

    /// `det d_z̃ F_λ`.
    pub fn jacobian_lift(&self, lambda: C64, z: &CVec) -> C64 {
        self.at(lambda).jacobian(z).det()
    }

    /// Chart expression of `f_λ`. `chart` is the index of the homogeneous
    /// coordinate set to one, on both source and target.
    pub fn affine_map(&self, lambda: C64, z: &CVec, chart: usize) -> Result<CVec> {
        self.at(lambda).affine_map(z, chart)
    }

    /// Derivative matrix of the chart map and its determinant.
    pub fn affine_jacobian(&self, lambda: C64, z: &CVec, chart: usize) -> Result<(CMat, C64)> {
        let m = self.at(lambda).affine_jacobian(z, chart)?;
        let det = m.det();
        Ok((m, det))
    }

    pub fn to_file_string(&self) -> String {
        parse::write_family(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse::parse_family(text)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

/// A lift with numeric coefficients, ready for fast evaluation.
#[derive(Clone, Debug)]
pub struct Lift {
    n: usize,
    d: usize,
    coords: Vec<Vec<([u8; 3], C64)>>,
}

impl Lift {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn terms(&self, i: usize) -> &[([u8; 3], C64)] {
        &self.coords[i]
    }

    #[inline]
    fn powers(&self, z: &CVec) -> [[C64; 65]; 3] {
        let mut p = [[ZERO; 65]; 3];
        for i in 0..self.n {
            p[i][0] = ONE;
            for e in 1..=self.d {
                p[i][e] = p[i][e - 1] * z[i];
            }
        }
        p
    }

    pub fn eval(&self, z: &CVec) -> CVec {
        let p = self.powers(z);
        let mut out = CVec::zeros(self.n);
        for (i, terms) in self.coords.iter().enumerate() {
            let mut s = ZERO;
            for (e, c) in terms {
                let mut m = *c;
                for v in 0..self.n {
                    m *= p[v][e[v] as usize];
                }
                s += m;
            }
            out[i] = s;
        }
        out
    }

    /// `(F(z), DF(z))` with `DF[i][j] = ∂F_i/∂z_j`.
    pub fn eval_with_jacobian(&self, z: &CVec) -> (CVec, CMat) {
        let p = self.powers(z);
        let n = self.n;
        let mut val = CVec::zeros(n);
        let mut jac = CMat::zeros(n);
        for (i, terms) in self.coords.iter().enumerate() {
            let mut s = ZERO;
            let mut ds = [ZERO; 3];
            for (e, c) in terms {
                let mut m = *c;
                for v in 0..n {
                    m *= p[v][e[v] as usize];
                }
                s += m;
                for j in 0..n {
                    if e[j] == 0 {
                        continue;
                    }
                    let mut dm = *c * e[j] as f64;
                    for v in 0..n {
                        let ev = if v == j { e[v] - 1 } else { e[v] };
                        dm *= p[v][ev as usize];
                    }
                    ds[j] += dm;
                }
            }
            val[i] = s;
            for j in 0..n {
                jac.set(i, j, ds[j]);
            }
        }
        (val, jac)
    }

    pub fn jacobian(&self, z: &CVec) -> CMat {
        self.eval_with_jacobian(z).1
    }

    pub fn affine_map(&self, z: &CVec, chart: usize) -> Result<CVec> {
        let fz = self.eval(&z.homogenize(chart));
        fz.dehomogenize(chart).ok_or(Error::ChartOverflow { modulus: fz[chart].norm() })
    }

    /// Chart map value together with its k×k derivative.
    pub fn affine_map_with_jacobian(&self, z: &CVec, chart: usize) -> Result<(CVec, CMat)> {
        let zt = z.homogenize(chart);
        let (fz, df) = self.eval_with_jacobian(&zt);
        let t = fz[chart];
        if t.norm() < 1e-300 {
            return Err(Error::ChartOverflow { modulus: t.norm() });
        }
        let k = self.n - 1;
        let others: Vec<usize> = (0..self.n).filter(|&i| i != chart).collect();
        let tinv = t.inv();
        let mut m = CMat::zeros(k);
        let mut w = CVec::zeros(k);
        for (a, &i) in others.iter().enumerate() {
            w[a] = fz[i] * tinv;
            for (b, &j) in others.iter().enumerate() {
                m.set(a, b, (df.get(i, j) * t - fz[i] * df.get(chart, j)) * tinv * tinv);
            }
        }
        Ok((w, m))
    }

    pub fn affine_jacobian(&self, z: &CVec, chart: usize) -> Result<CMat> {
        Ok(self.affine_map_with_jacobian(z, chart)?.1)
    }
}

/// A point of P^k, unit-normalised, with the first coordinate of largest
/// modulus rotated onto the nonnegative real axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjPoint(CVec);

impl ProjPoint {
    pub fn new(v: &CVec) -> Option<Self> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        let u = v.scale_re(1.0 / n);
        let mut best = 0;
        for i in 1..u.len() {
            if u[i].norm() > u[best].norm() {
                best = i;
            }
        }
        let phase = u[best].conj() / u[best].norm();
        Some(ProjPoint(u.scale(phase)))
    }

    pub fn coords(&self) -> &CVec {
        &self.0
    }

    pub fn from_chart(z: &CVec, chart: usize) -> Self {
        Self::new(&z.homogenize(chart)).expect("homogenized point is nonzero")
    }

    pub fn to_chart(&self, chart: usize) -> Option<CVec> {
        self.0.dehomogenize(chart)
    }

    /// Chordal (Fubini–Study sine) distance.
    /// Computed as `‖u ∧ v‖`, accurate down to rounding for nearby points.
    pub fn chordal_distance(&self, o: &ProjPoint) -> f64 {
        let (u, v) = (&self.0, &o.0);
        let mut s = 0.0;
        for i in 0..u.len() {
            for j in (i + 1)..u.len() {
                s += (u[i] * v[j] - u[j] * v[i]).norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// `log Jac f` for the Fubini–Study metric at `[z]`, from lift data at the
/// unit vector `z`:
///
/// `log |det DF(z)| - log d - (k+1) log ||F(z)||`.
///
/// In the standard chart this equals
/// `log |det Df(z)| + (k+1)/2 · (log(1+|z|²) - log(1+|f(z)|²))`.
pub fn fs_log_jacobian(jac_det: C64, image_norm: f64, d: usize, k: usize) -> f64 {
    jac_det.norm().ln() - (d as f64).ln() - (k as f64 + 1.0) * image_norm.ln()
}

impl FamilySpec {
    /// Fubini–Study log-Jacobian of `f_λ` at the chart point `z`.
    pub fn fs_log_jacobian_at(&self, lift: &Lift, z: &CVec) -> (f64, C64) {
        let zt = z.homogenize(self.standard_chart());
        let u = zt.scale_re(1.0 / zt.norm());
        let (fz, df) = lift.eval_with_jacobian(&u);
        let det = df.det();
        (fs_log_jacobian(det, fz.norm(), self.d, self.k), det)
    }
}
