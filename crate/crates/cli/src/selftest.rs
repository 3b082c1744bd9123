//! A fast pass over closed-form examples, one line per check.

use crate::Failure;
use biflab_core::bifurcation::{ddc_density, mass_growth, misiurewicz_scan, support_mask, MassGrowthConfig, MisiurewiczConfig};
use biflab_core::family::{constant_quadratic, quadratic_family, square_map_p1};
use biflab_core::lyapunov::{lyapunov_backward, lyapunov_przytycki, sweep_grid, EstimatorConfig};
use biflab_core::motion::{continue_cycle, contraction_report, find_cycles, motion_hyperbolic, segment, ContractionConfig, MotionConfig};
use biflab_core::{CVec, GreenEvaluator, ParameterGrid, C64};

type Check = Result<(), String>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Check {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, expected {want} within {tol}"))
    }
}

fn green_exact() -> Check {
    let ev = GreenEvaluator::at_point(&square_map_p1(), c(0.0, 0.0), 1e-9).map_err(|e| e.to_string())?;
    let g = |x: f64| ev.green_value(c(0.0, 0.0), &CVec::two(c(x, 0.0), c(0.0, 0.0))).map(|v| v.value).map_err(|e| e.to_string());
    close("G(1,0)", g(1.0)?, 0.0, 1e-9)?;
    close("G(2,0)", g(2.0)?, 2f64.ln(), 1e-9)
}

fn przytycki_closed_forms() -> Check {
    let f = quadratic_family();
    for l in [c(0.0, 0.0), c(-2.0, 0.0)] {
        let e = lyapunov_przytycki(&f, l, 1e-9).map_err(|e| e.to_string())?;
        close("L", e.value, 2f64.ln(), 1e-6)?;
    }
    Ok(())
}

fn backward_circle() -> Check {
    let e = lyapunov_backward(&quadratic_family(), c(0.0, 0.0), 4000, 1).map_err(|e| e.to_string())?;
    close("L backward", e.value, 2f64.ln(), 3.0 * e.stderr)
}

fn fixed_points() -> Check {
    let set = find_cycles(&quadratic_family(), c(0.0, 0.0), 1).map_err(|e| e.to_string())?;
    let mut mods: Vec<f64> = set.cycles.iter().map(|c| c.multipliers[0].norm()).collect();
    mods.sort_by(f64::total_cmp);
    if mods.len() != 2 {
        return Err(format!("expected 2 fixed points, found {}", mods.len()));
    }
    close("attracting multiplier", mods[0], 0.0, 1e-12)?;
    close("repelling multiplier", mods[1], 2.0, 1e-12)
}

fn fixed_point_track() -> Check {
    let f = quadratic_family();
    let start = find_cycles(&f, c(-0.5, 0.0), 1).map_err(|e| e.to_string())?;
    let cyc = start.cycles.iter().find(|c| c.points[0][0].re > 1.0).ok_or("no repelling fixed point")?;
    let tr = continue_cycle(&f, cyc, &segment(c(-0.5, 0.0), c(0.2, 0.0), 70));
    if tr.cycles.len() != 71 {
        return Err(format!("track stopped after {} points", tr.cycles.len()));
    }
    for cy in &tr.cycles {
        let exact = (1.0 + (c(1.0, 0.0) - 4.0 * cy.lambda).sqrt()) / 2.0;
        close("fixed point", (cy.points[0][0] - exact).norm(), 0.0, 1e-10)?;
    }
    Ok(())
}

fn misiurewicz_minus_two() -> Check {
    let g = ParameterGrid::new(c(-1.9, 0.0), 0.4, 0.4, 5, 5).map_err(|e| e.to_string())?;
    let hits = misiurewicz_scan(&quadratic_family(), &g, &MisiurewiczConfig { n0_max: 3, p_max: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    hits.iter().find(|h| (h.lambda - c(-2.0, 0.0)).norm() < 1e-9).map(|_| ()).ok_or_else(|| "λ = −2 not found".into())
}

fn stable_density_vanishes() -> Check {
    let g = ParameterGrid::new(c(0.0, 0.0), 0.3, 0.3, 7, 7).map_err(|e| e.to_string())?;
    let field = sweep_grid(&constant_quadratic(c(0.0, 0.0)), &g, &EstimatorConfig::przytycki(1e-9)).map_err(|e| e.to_string())?;
    let d = ddc_density(&field).map_err(|e| e.to_string())?;
    let m = support_mask(&d, d.default_threshold()).map_err(|e| e.to_string())?;
    if m.count() == 0 {
        Ok(())
    } else {
        Err(format!("{} cells marked", m.count()))
    }
}

fn mass_of_constant_family() -> Check {
    let cfg = MassGrowthConfig { center: c(0.0, 0.0), radius: 0.1, n_max: 10, n_theta: 20 };
    let rep = mass_growth(&constant_quadratic(c(0.0, 0.0)), &cfg).map_err(|e| e.to_string())?;
    let area = std::f64::consts::PI * 0.01;
    for (n, m) in rep.n_list.iter().zip(&rep.m_n) {
        close("m_n", *m, area * 0.5f64.powi(*n as i32), 1e-14)?;
    }
    Ok(())
}

fn motion_of_fixed_point() -> Check {
    let f = quadratic_family();
    let set = find_cycles(&f, c(-2.0, 0.0), 1).map_err(|e| e.to_string())?;
    let cyc = set.cycles.into_iter().find(|cy| (cy.points[0][0] - c(2.0, 0.0)).norm() < 1e-9).ok_or("fixed point 2 missing")?;
    let rec = motion_hyperbolic(&f, &[cyc], 0.01, &MotionConfig::default()).map_err(|e| e.to_string())?;
    for (l, row) in rec.lattice.iter().zip(&rec.images) {
        let exact = (1.0 + (c(1.0, 0.0) - 4.0 * l).sqrt()) / 2.0;
        close("moved point", (row[0][0] - exact).norm(), 0.0, 1e-10)?;
    }
    Ok(())
}


fn contraction_of_squaring() -> Check {
    let cfg = ContractionConfig { depth: 12, ..Default::default() };
    let rep = contraction_report(&constant_quadratic(c(0.0, 0.0)), &cfg).map_err(|e| e.to_string())?;
    close("slope", rep.slope_a, 2f64.ln(), 1e-3)?;
    if rep.bound_holds {
        Ok(())
    } else {
        Err("product bound violated".into())
    }
}

pub fn run() -> Result<(), Failure> {
    let checks: [(&str, fn() -> Check); 10] = [
        ("green closed form on (x^2, y^2)", green_exact),
        ("przytycki at 0 and -2", przytycki_closed_forms),
        ("backward walk for z^2", backward_circle),
        ("fixed points of z^2", fixed_points),
        ("fixed-point track", fixed_point_track),
        ("misiurewicz at -2", misiurewicz_minus_two),
        ("stable density vanishes", stable_density_vanishes),
        ("mass growth of constant family", mass_of_constant_family),
        ("motion of the fixed point 2", motion_of_fixed_point),
        ("contraction for z^2", contraction_of_squaring),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        match f() {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failed} selftest checks failed")))
    }
}
