//! Bifurcation-current density of a Lyapunov field, its support, the
//! critical mass-growth test and the search for Misiurewicz parameters.

mod mass;
mod misiurewicz;

pub use mass::{mass_growth, MassGrowthConfig, MassGrowthReport};
pub use misiurewicz::{hits_to_json, misiurewicz_in_support, misiurewicz_scan, read_hits, write_hits, CoverageReport, MisiurewiczConfig, MisiurewiczHit};

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::io::{fmt12, write_pgm, Table};
use crate::lyapunov::LyapunovField;
use std::f64::consts::PI;

/// Noise floor multiple of `max stderr / spacing²`.
pub const NOISE_FACTOR: f64 = 10.0;
/// Default support threshold, in noise floors.
pub const THRESHOLD_FACTOR: f64 = 5.0;

/// `Δ L / 2π` on the interior cells of a Lyapunov field.
#[derive(Clone, Debug)]
pub struct BifurcationDensity {
    /// Interior lattice of the source grid.
    pub grid: ParameterGrid,
    /// Row-major (`i` fastest); `None` where any stencil value is missing.
    pub values: Vec<Option<f64>>,
    pub max_stderr: f64,
    pub noise_floor: f64,
}

impl BifurcationDensity {
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.values[self.grid.index(i, j)]
    }

    pub fn default_threshold(&self) -> f64 {
        THRESHOLD_FACTOR * self.noise_floor
    }

    /// Cells below `−noise_floor`; positivity says there should be none.
    pub fn below_floor(&self) -> usize {
        self.values.iter().flatten().filter(|v| **v < -self.noise_floor).count()
    }

    /// Value at the given quantile (0..=1) of the present cells.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = self.values.iter().flatten().copied().collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let idx = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        v[idx]
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["i", "j", "re_lambda", "im_lambda", "density"]);
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j) = self.grid.coords(idx);
            let l = self.grid.cell(i, j);
            t.push(vec![i.to_string(), j.to_string(), fmt12(l.re), fmt12(l.im), v.map(fmt12).unwrap_or_default()]);
        }
        t
    }

    /// 8-bit image, top row at the largest imaginary part, linear from 0 to
    /// the 99th percentile; missing cells are black.
    pub fn to_pgm_pixels(&self) -> Vec<u8> {
        let top = self.quantile(0.99);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut px = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            let j = ny - 1 - row;
            for i in 0..nx {
                let v = self.value(i, j).unwrap_or(0.0);
                let s = if top > 0.0 { (v / top).clamp(0.0, 1.0) } else { 0.0 };
                px.push((s * 255.0).round() as u8);
            }
        }
        px
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_table().write(path)
    }

    pub fn write_pgm(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        write_pgm(path, self.grid.nx, self.grid.ny, &self.to_pgm_pixels())
    }

    /// Reads the values column of a CSV written by `write_csv` onto `grid`.
    pub fn read_values(path: impl AsRef<std::path::Path>, grid: &ParameterGrid) -> Result<Vec<Option<f64>>> {
        let t = Table::read(path)?;
        let vals = t.f64_column("density")?;
        let (ci, cj) = (t.column("i")?, t.column("j")?);
        let mut out = vec![None; grid.len()];
        for (r, row) in t.rows.iter().enumerate() {
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse { line: r + 2, msg: format!("bad index {s:?}") });
            let (i, j) = (parse(&row[ci])?, parse(&row[cj])?);
            if i >= grid.nx || j >= grid.ny {
                return Err(Error::Parse { line: r + 2, msg: "cell outside grid".into() });
            }
            out[grid.index(i, j)] = vals[r].is_finite().then_some(vals[r]);
        }
        Ok(out)
    }
}

/// Five-point Laplacian of the field divided by 2π at interior cells.
pub fn ddc_density(field: &LyapunovField) -> Result<BifurcationDensity> {
    let g = field.grid;
    if g.nx < 3 || g.ny < 3 {
        return Err(Error::GridTooSmall { nx: g.nx, ny: g.ny });
    }
    let (dx2, dy2) = (g.dx() * g.dx(), g.dy() * g.dy());
    let inner = g.interior();
    let mut values = Vec::with_capacity(inner.len());
    for jj in 0..inner.ny {
        for ii in 0..inner.nx {
            let (i, j) = (ii + 1, jj + 1);
            let v = (|| {
                let c = field.value(i, j)?;
                let lx = field.value(i - 1, j)? + field.value(i + 1, j)? - 2.0 * c;
                let ly = field.value(i, j - 1)? + field.value(i, j + 1)? - 2.0 * c;
                Some((lx / dx2 + ly / dy2) / (2.0 * PI))
            })();
            values.push(v);
        }
    }
    let max_stderr = field.max_stderr();
    let spacing = g.dx().min(g.dy());
    let noise_floor = NOISE_FACTOR * max_stderr / (spacing * spacing);
    Ok(BifurcationDensity { grid: inner, values, max_stderr, noise_floor })
}

/// Cells whose density exceeds a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMask {
    pub grid: ParameterGrid,
    pub cells: Vec<bool>,
    pub threshold: f64,
}

impl SupportMask {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[self.grid.index(i, j)]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Whether a marked cell lies within Chebyshev distance `radius` of `(i, j)`.
    pub fn near(&self, i: usize, j: usize, radius: usize) -> bool {
        let (i0, i1) = (i.saturating_sub(radius), (i + radius).min(self.grid.nx - 1));
        let (j0, j1) = (j.saturating_sub(radius), (j + radius).min(self.grid.ny - 1));
        (j0..=j1).any(|b| (i0..=i1).any(|a| self.get(a, b)))
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["i", "j", "re_lambda", "im_lambda", "mask"]);
        for (idx, m) in self.cells.iter().enumerate() {
            let (i, j) = self.grid.coords(idx);
            let l = self.grid.cell(i, j);
            t.push(vec![i.to_string(), j.to_string(), fmt12(l.re), fmt12(l.im), (*m as u8).to_string()]);
        }
        t
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_table().write(path)
    }
}

/// Marks cells with density above `threshold`, which must exceed the noise
/// floor.
pub fn support_mask(density: &BifurcationDensity, threshold: f64) -> Result<SupportMask> {
    if !(threshold > density.noise_floor) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} must exceed the noise floor {}", density.noise_floor)));
    }
    let cells = density.values.iter().map(|v| v.is_some_and(|v| v > threshold)).collect();
    Ok(SupportMask { grid: density.grid, cells, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::C64;
    use crate::family::quadratic_family;
    use crate::lyapunov::{sweep_grid, EstimatorConfig, FieldMeta, LyapunovEstimate, Method};

    fn synthetic(grid: ParameterGrid, f: impl Fn(C64) -> f64, stderr: f64) -> LyapunovField {
        let cfg = EstimatorConfig::przytycki(1e-9);
        let values = grid
            .cells()
            .map(|(_, _, l)| Some(LyapunovEstimate { value: f(l), stderr, method: Method::Przytycki, n_samples: 0, rejected: 0 }))
            .collect();
        let meta = FieldMeta { family: "synthetic".into(), config: cfg, grid, seed_rule: String::new(), green_sup_bound: None, missing_cells: 0 };
        LyapunovField { grid, values, meta }
    }

    fn grid(n: usize) -> ParameterGrid {
        ParameterGrid::new(C64::new(0.3, -0.2), 2.0, 1.5, n, n + 2).unwrap()
    }

    #[test]
    fn constant_field_has_zero_density_and_empty_mask() {
        let d = ddc_density(&synthetic(grid(9), |_| 0.7, 0.0)).unwrap();
        assert!(d.values.iter().all(|v| *v == Some(0.0)));
        assert_eq!(support_mask(&d, 1e-12).unwrap().count(), 0);
    }

    #[test]
    fn squared_modulus_has_density_two_over_pi() {
        let d = ddc_density(&synthetic(grid(11), |l| l.norm_sqr(), 0.0)).unwrap();
        for v in d.values.iter().flatten() {
            assert!((v - 2.0 / PI).abs() <= 1e-10, "{v}");
        }
        assert_eq!(d.grid.nx, 9);
    }

    #[test]
    fn spike_marks_one_cell() {
        let g = grid(9);
        let spike = g.cell(4, 5);
        let d = ddc_density(&synthetic(g, |l| if (l - spike).norm() < 1e-12 { -1.0 } else { 0.0 }, 1e-9)).unwrap();
        let m = support_mask(&d, d.default_threshold()).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.get(3, 4));
        assert!(m.near(5, 6, 2) && !m.near(6, 7, 2));
    }

    #[test]
    fn missing_neighbour_propagates() {
        let mut f = synthetic(grid(7), |l| l.re, 0.0);
        let idx = f.grid.index(3, 3);
        f.values[idx] = None;
        let d = ddc_density(&f).unwrap();
        assert_eq!(d.values.iter().filter(|v| v.is_none()).count(), 5);
    }

    #[test]
    fn small_grids_and_low_thresholds_are_rejected() {
        let g = ParameterGrid { center: C64::new(0.0, 0.0), width: 1.0, height: 1.0, nx: 2, ny: 5 };
        let f = synthetic(ParameterGrid::new(C64::new(0.0, 0.0), 1.0, 1.0, 3, 3).unwrap(), |_| 0.0, 1e-3);
        let mut f2 = f.clone();
        f2.grid = g;
        assert_eq!(ddc_density(&f2).unwrap_err().name(), "GridTooSmall");
        let d = ddc_density(&f).unwrap();
        assert!(support_mask(&d, d.noise_floor * 0.5).is_err());
    }

    #[test]
    fn quadratic_density_vanishes_inside_the_cardioid() {
        let g = ParameterGrid::new(C64::new(-0.1, 0.0), 0.3, 0.3, 9, 9).unwrap();
        let f = sweep_grid(&quadratic_family(), &g, &EstimatorConfig::przytycki(1e-9)).unwrap();
        let d = ddc_density(&f).unwrap();
        let mean = d.values.iter().flatten().map(|v| v.abs()).sum::<f64>() / d.values.len() as f64;
        assert!(mean <= d.noise_floor, "{mean} vs {}", d.noise_floor);
        assert_eq!(d.below_floor(), 0);
    }

    #[test]
    fn pgm_ramp_saturates_at_the_percentile() {
        let d = ddc_density(&synthetic(grid(9), |l| l.norm_sqr(), 0.0)).unwrap();
        assert!(d.to_pgm_pixels().iter().all(|p| *p == 255));
    }
}
