use crate::cvec::C64;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Regular lattice of parameters. Cell `(i, j)` sits at
/// `center + (-width/2 + i·dx) + i·(-height/2 + j·dy)`, with
/// `dx = width/(nx−1)`, `dy = height/(ny−1)`, so the lattice includes the
/// window edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub center: C64,
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ParameterGrid {
    pub fn new(center: C64, width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidArgument(format!("grid extent must be positive, got {width} x {height}")));
        }
        Ok(ParameterGrid { center, width, height, nx, ny })
    }

    /// Grid covering `[re_min, re_max] × [im_min, im_max]`.
    pub fn from_bounds(re: (f64, f64), im: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let center = C64::new(0.5 * (re.0 + re.1), 0.5 * (im.0 + im.1));
        Self::new(center, re.1 - re.0, im.1 - im.0, nx, ny)
    }

    pub fn dx(&self) -> f64 {
        self.width / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.height / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, i: usize, j: usize) -> C64 {
        self.center + C64::new(-0.5 * self.width + i as f64 * self.dx(), -0.5 * self.height + j as f64 * self.dy())
    }

    /// Row-major index, `i` fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.len()).map(move |idx| {
            let (i, j) = self.coords(idx);
            (i, j, self.cell(i, j))
        })
    }

    /// Nearest cell to `lambda`, clamped to the grid.
    pub fn nearest(&self, lambda: C64) -> (usize, usize) {
        let off = lambda - self.center;
        let fi = ((off.re + 0.5 * self.width) / self.dx()).round();
        let fj = ((off.im + 0.5 * self.height) / self.dy()).round();
        let clamp = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64) as usize;
        (clamp(fi, self.nx), clamp(fj, self.ny))
    }

    /// The lattice of interior cells (one cell dropped on each side). It may
    /// be smaller than 3x3, so it bypasses `new`'s size check.
    pub fn interior(&self) -> ParameterGrid {
        ParameterGrid {
            center: self.center,
            width: self.width - 2.0 * self.dx(),
            height: self.height - 2.0 * self.dy(),
            nx: self.nx - 2,
            ny: self.ny - 2,
        }
    }

    /// Radius of the disc around `center` covering the whole window.
    pub fn covering_radius(&self) -> f64 {
        0.5 * self.width.hypot(self.height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_spacing() {
        let g = ParameterGrid::from_bounds((-2.25, 0.75), (-1.5, 1.5), 256, 256).unwrap();
        assert!((g.cell(0, 0) - C64::new(-2.25, -1.5)).norm() < 1e-15);
        assert!((g.cell(255, 255) - C64::new(0.75, 1.5)).norm() < 1e-14);
        assert!((g.dx() - 3.0 / 255.0).abs() < 1e-16);
        assert_eq!(g.nearest(C64::new(-2.0, 0.0)), (21, 128));
    }

    #[test]
    fn too_small() {
        assert!(matches!(ParameterGrid::new(C64::new(0.0, 0.0), 1.0, 1.0, 2, 5), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn interior_shares_spacing() {
        let g = ParameterGrid::new(C64::new(0.0, 0.0), 1.0, 2.0, 11, 21).unwrap();
        let h = g.interior();
        assert!((h.dx() - g.dx()).abs() < 1e-15 && (h.dy() - g.dy()).abs() < 1e-15);
        assert!((h.cell(0, 0) - g.cell(1, 1)).norm() < 1e-15);
    }
}
