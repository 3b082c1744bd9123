//! Fixed-capacity complex vectors and the tiny matrices the rest of the crate
//! needs. Dimensions never exceed 3 (homogeneous coordinates on P^2), so
//! everything is `Copy` and lives on the stack.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, PartialEq)]
pub struct CVec {
    data: [C64; MAX_DIM],
    len: u8,
}

impl CVec {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_DIM, "CVec capacity is {MAX_DIM}");
        CVec { data: [ZERO; MAX_DIM], len: len as u8 }
    }

    pub fn from_slice(s: &[C64]) -> Self {
        let mut v = Self::zeros(s.len());
        v.data[..s.len()].copy_from_slice(s);
        v
    }

    pub fn one(z: C64) -> Self {
        Self::from_slice(&[z])
    }

    pub fn two(z: C64, w: C64) -> Self {
        Self::from_slice(&[z, w])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data[..self.len()]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.as_slice().iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Euclidean norm, computed with scaling so huge or tiny entries do not
    /// overflow.
    pub fn norm(&self) -> f64 {
        let m = self.iter().fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()));
        if m == 0.0 || !m.is_finite() {
            return m;
        }
        let s: f64 = self.iter().map(|z| (z / m).norm_sqr()).sum();
        m * s.sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for z in &mut out.data[..self.len()] {
            *z *= s;
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        let mut out = *self;
        for z in &mut out.data[..self.len()] {
            *z *= s;
        }
        out
    }

    pub fn add(&self, o: &CVec) -> Self {
        debug_assert_eq!(self.len, o.len);
        let mut out = *self;
        for i in 0..self.len() {
            out.data[i] += o.data[i];
        }
        out
    }

    pub fn sub(&self, o: &CVec) -> Self {
        debug_assert_eq!(self.len, o.len);
        let mut out = *self;
        for i in 0..self.len() {
            out.data[i] -= o.data[i];
        }
        out
    }

    pub fn dist(&self, o: &CVec) -> f64 {
        self.sub(o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Insert a coordinate equal to one at `chart`, turning a chart point into
    /// a homogeneous representative.
    pub fn homogenize(&self, chart: usize) -> CVec {
        let n = self.len() + 1;
        assert!(chart < n);
        let mut out = CVec::zeros(n);
        let mut src = 0;
        for i in 0..n {
            if i == chart {
                out.data[i] = ONE;
            } else {
                out.data[i] = self.data[src];
                src += 1;
            }
        }
        out
    }

    /// Divide by the `chart` coordinate and drop it. `None` when that
    /// coordinate is below 1e-300 in modulus.
    pub fn dehomogenize(&self, chart: usize) -> Option<CVec> {
        let t = self.data[chart];
        if t.norm() < 1e-300 {
            return None;
        }
        let inv = t.inv();
        let mut out = CVec::zeros(self.len() - 1);
        let mut dst = 0;
        for i in 0..self.len() {
            if i != chart {
                out.data[dst] = self.data[i] * inv;
                dst += 1;
            }
        }
        Some(out)
    }
}

impl Index<usize> for CVec {
    type Output = C64;
    #[inline]
    fn index(&self, i: usize) -> &C64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for CVec {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        let n = self.len();
        &mut self.data[..n][i]
    }
}

impl std::fmt::Debug for CVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Square complex matrix of size at most 3, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct CMat {
    data: [[C64; MAX_DIM]; MAX_DIM],
    n: u8,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        CMat { data: [[ZERO; MAX_DIM]; MAX_DIM], n: n as u8 }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i][i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len());
            m.data[i][..r.len()].copy_from_slice(r);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i][j] = v;
    }

    pub fn det(&self) -> C64 {
        let a = &self.data;
        match self.n {
            0 => ONE,
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            3 => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
            _ => unreachable!(),
        }
    }

    pub fn mul(&self, o: &CMat) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += self.data[i][k] * o.data[k][j];
                }
                out.data[i][j] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        let n = self.dim();
        let mut out = CVec::zeros(n);
        for i in 0..n {
            let mut s = ZERO;
            for j in 0..n {
                s += self.data[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Solve `self * x = b` by Cramer's rule (n <= 3). `None` when singular.
    pub fn solve(&self, b: &CVec) -> Option<CVec> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let n = self.dim();
        let mut x = CVec::zeros(n);
        for col in 0..n {
            let mut m = *self;
            for row in 0..n {
                m.data[row][col] = b[row];
            }
            x[col] = m.det() / det;
        }
        Some(x)
    }

    /// Eigenvalues (n <= 2), ordered by increasing modulus.
    pub fn eigenvalues(&self) -> Vec<C64> {
        match self.n {
            1 => vec![self.data[0][0]],
            2 => {
                let a = &self.data;
                let tr = a[0][0] + a[1][1];
                let det = self.det();
                let disc = (tr * tr - 4.0 * det).sqrt();
                // Stable quadratic roots: avoid cancellation in tr -/+ disc.
                let q = if (tr.conj() * disc).re >= 0.0 { -(tr + disc) / 2.0 } else { -(tr - disc) / 2.0 };
                let (e1, e2) = if q.norm() == 0.0 { (ZERO, ZERO) } else { (-q, -det / q) };
                let mut v = vec![e1, e2];
                v.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
                v
            }
            _ => unimplemented!("eigenvalues only needed for k <= 2"),
        }
    }

    /// Smallest and largest singular values (n <= 2).
    pub fn singular_values(&self) -> (f64, f64) {
        match self.n {
            1 => {
                let s = self.data[0][0].norm();
                (s, s)
            }
            2 => {
                let a = &self.data;
                let fro2: f64 = a[0][0].norm_sqr() + a[0][1].norm_sqr() + a[1][0].norm_sqr() + a[1][1].norm_sqr();
                let det = self.det().norm();
                // s_max^2 + s_min^2 = fro^2, s_max * s_min = |det|
                let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
                let smax2 = 0.5 * (fro2 + disc);
                let smax = smax2.sqrt();
                let smin = if smax > 0.0 { det / smax } else { 0.0 };
                (smin, smax)
            }
            _ => unimplemented!("singular values only needed for k <= 2"),
        }
    }

    /// Operator norm (largest singular value), n <= 2.
    pub fn op_norm(&self) -> f64 {
        self.singular_values().1
    }
}

impl std::fmt::Debug for CMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.dim();
        let rows: Vec<&[C64]> = (0..n).map(|i| &self.data[i][..n]).collect();
        f.debug_list().entries(rows).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogenize_round_trip() {
        let p = CVec::two(C64::new(1.0, 2.0), C64::new(-3.0, 0.5));
        for chart in 0..3 {
            let h = p.homogenize(chart);
            assert_eq!(h[chart], ONE);
            assert_eq!(h.dehomogenize(chart).unwrap(), p);
        }
    }

    #[test]
    fn norm_survives_huge_entries() {
        let v = CVec::two(C64::new(1e300, 0.0), C64::new(1e300, 0.0));
        assert!((v.norm() / (1e300 * 2f64.sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn det_and_solve_3x3() {
        let m = CMat::from_rows(&[
            &[C64::new(2.0, 0.0), ZERO, ZERO],
            &[ONE, C64::new(2.0, 0.0), ONE],
            &[ZERO, ZERO, C64::new(2.0, 0.0)],
        ]);
        assert_eq!(m.det(), C64::new(8.0, 0.0));
        let b = CVec::from_slice(&[ONE, ONE, ONE]);
        let x = m.solve(&b).unwrap();
        assert!(m.mul_vec(&x).dist(&b) < 1e-14);
    }

    #[test]
    fn eigen_and_singular_2x2() {
        let m = CMat::from_rows(&[&[C64::new(2.0, 0.0), ZERO], &[ONE, C64::new(3.0, 0.0)]]);
        let e = m.eigenvalues();
        assert!((e[0] - 2.0).norm() < 1e-14 && (e[1] - 3.0).norm() < 1e-14);
        let (smin, smax) = m.singular_values();
        assert!((smin * smax - 6.0).abs() < 1e-12);
        assert!((smin * smin + smax * smax - 14.0).abs() < 1e-12);
    }
}
