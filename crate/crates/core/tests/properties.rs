use biflab_core::bifurcation::{ddc_density, read_hits, write_hits, MisiurewiczHit};
use biflab_core::family::{cubic_family, lattes_map, product_squares, quadratic_family, skew_family};
use biflab_core::lyapunov::{lyapunov_backward, lyapunov_przytycki, sweep_grid, EstimatorConfig, FieldMeta, Method};
use biflab_core::motion::{continue_cycle, find_cycles, segment};
use biflab_core::{CVec, FamilySpec, GreenEvaluator, LyapunovEstimate, LyapunovField, ParameterGrid, C64};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn families() -> &'static [(FamilySpec, GreenEvaluator)] {
    static CELL: OnceLock<Vec<(FamilySpec, GreenEvaluator)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [quadratic_family(), cubic_family(), lattes_map(), skew_family(), product_squares()]
            .into_iter()
            .map(|f| {
                let ev = GreenEvaluator::new(&f, c(0.0, 0.0), 1.0, 1e-9, 1).unwrap();
                (f, ev)
            })
            .collect()
    })
}

fn point(k: usize, v: &[f64]) -> CVec {
    let mut z = CVec::zeros(k + 1);
    for i in 0..=k {
        z[i] = c(v[2 * i], v[2 * i + 1]);
    }
    z
}

fn lambda_in_unit_disc(r: f64, t: f64) -> C64 {
    C64::from_polar(r.sqrt(), t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_is_log_homogeneous(
        fi in 0usize..5, r in 0.0f64..1.0, t in 0.0f64..6.28,
        v in prop::collection::vec(-3.0f64..3.0, 6), s in 0.05f64..20.0, a in 0.0f64..6.28,
    ) {
        let (f, ev) = &families()[fi];
        let l = lambda_in_unit_disc(r, t);
        let z = point(f.k(), &v);
        prop_assume!(z.norm() > 1e-3);
        let scale = C64::from_polar(s, a);
        let g = ev.green_value(l, &z).unwrap().value;
        let gs = ev.green_value(l, &z.scale(scale)).unwrap().value;
        prop_assert!((gs - g - s.ln()).abs() <= 1e-9, "{gs} vs {g} + {}", s.ln());
    }

    #[test]
    fn green_satisfies_the_functional_equation(
        fi in 0usize..5, r in 0.0f64..1.0, t in 0.0f64..6.28, v in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let (f, ev) = &families()[fi];
        let z = point(f.k(), &v);
        prop_assume!(z.norm() > 1e-3);
        let res = ev.functional_equation_residual(lambda_in_unit_disc(r, t), &z).unwrap();
        prop_assert!(res <= 2.0 * 1e-9 * (f.d() as f64 + 1.0), "{res}");
    }

    #[test]
    fn przytycki_respects_the_lower_bound(re in -2.5f64..1.0, im in -1.5f64..1.5, cubic in any::<bool>()) {
        let f = if cubic { cubic_family() } else { quadratic_family() };
        let e = lyapunov_przytycki(&f, c(re, im), 1e-9).unwrap();
        prop_assert!(e.respects_lower_bound(1, f.d()));
        prop_assert!(e.value >= (f.d() as f64).ln() - 1e-9);
    }

    #[test]
    fn harmonic_fields_have_zero_density(a in -1.0f64..1.0, b in -1.0f64..1.0, p in -1.0f64..1.0, q in -1.0f64..1.0, s in 0.0f64..2.0) {
        // a + b x + p (x² − y²) + q x y is harmonic; s |λ|² has Laplacian 4s
        let g = ParameterGrid::new(c(0.1, -0.2), 1.0, 0.8, 9, 7).unwrap();
        let field = synthetic(g, |l| a + b * l.re + p * (l.re * l.re - l.im * l.im) + q * l.re * l.im + s * l.norm_sqr());
        let d = ddc_density(&field).unwrap();
        for v in d.values.iter().flatten() {
            prop_assert!((v - 2.0 * s / PI).abs() <= 1e-9, "{v}");
        }
    }

    #[test]
    fn hits_round_trip(re in -3.0f64..3.0, im in -3.0f64..3.0, n0 in 1usize..6, p in 1usize..5, res in 0.0f64..1e-9, tr in 1e-6f64..1e3) {
        let dir = tempfile_dir();
        let path = dir.join(format!("hits-{n0}-{p}.json"));
        let hits = vec![MisiurewiczHit { lambda: c(re, im), n0, period: p, residual: res, transversality: tr }];
        write_hits(&path, &hits).unwrap();
        let back = read_hits(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        // 12 significant digits on disk
        prop_assert!((back[0].lambda - hits[0].lambda).norm() <= 1e-11 * (1.0 + hits[0].lambda.norm()));
        prop_assert_eq!((back[0].n0, back[0].period), (n0, p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn repelling_fixed_point_tracks_follow_the_closed_form(r0 in 0.0f64..0.5, t0 in 0.0f64..6.28, r1 in 0.0f64..0.5, t1 in 0.0f64..6.28) {
        // the disc of radius 1/2 about −2 stays outside the main cardioid
        let f = quadratic_family();
        let a = c(-2.0, 0.0) + C64::from_polar(r0, t0);
        let b = c(-2.0, 0.0) + C64::from_polar(r1, t1);
        let beta = |l: C64| (1.0 + (c(1.0, 0.0) - 4.0 * l).sqrt()) / 2.0;
        let start = find_cycles(&f, a, 1).unwrap().cycles.into_iter().min_by(|x, y| (x.points[0][0] - beta(a)).norm().total_cmp(&(y.points[0][0] - beta(a)).norm())).unwrap();
        let t = continue_cycle(&f, &start, &segment(a, b, 20));
        prop_assert!(t.broken.is_none());
        for cy in &t.cycles {
            prop_assert!((cy.points[0][0] - beta(cy.lambda)).norm() <= 1e-10);
            prop_assert!(cy.is_repelling());
        }
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("biflab-props-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn synthetic(grid: ParameterGrid, f: impl Fn(C64) -> f64) -> LyapunovField {
    let cfg = EstimatorConfig::przytycki(1e-9);
    let values = grid.cells().map(|(_, _, l)| Some(LyapunovEstimate { value: f(l), stderr: 0.0, method: Method::Przytycki, n_samples: 0, rejected: 0 })).collect();
    let meta = FieldMeta { family: "synthetic".into(), config: cfg, grid, seed_rule: String::new(), green_sup_bound: None, missing_cells: 0 };
    LyapunovField { grid, values, meta }
}

#[test]
fn product_lyapunov_sum_is_additive() {
    let f = product_squares();
    let e = lyapunov_backward(&f, c(0.3, -0.2), 20_000, 8).unwrap();
    let l1 = lyapunov_backward(&quadratic_family(), c(0.0, 0.0), 20_000, 9).unwrap();
    let combined = e.stderr + 2.0 * l1.stderr;
    assert!((e.value - 2.0 * l1.value).abs() <= 3.0 * combined.max(1e-12), "{} vs 2 x {}", e.value, l1.value);
}

#[test]
fn identical_sweeps_give_identical_bytes() {
    let g = ParameterGrid::new(c(-0.5, 0.3), 0.6, 0.6, 4, 3).unwrap();
    let cfg = EstimatorConfig { n_samples: 800, walks: 8, ..EstimatorConfig::backward(800, 42) };
    let a = sweep_grid(&cubic_family(), &g, &cfg).unwrap();
    let b = sweep_grid(&cubic_family(), &g, &cfg).unwrap();
    assert_eq!(a.to_table().to_csv_string(), b.to_table().to_csv_string());
}

#[test]
fn estimators_agree_on_random_quadratic_parameters() {
    use rand::{Rng, SeedableRng};
    let f = quadratic_family();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut ok = 0;
    for _ in 0..30 {
        let l = c(rng.gen_range(-2.0..2.0), rng.gen_range(-1.5..1.5));
        let a = lyapunov_przytycki(&f, l, 1e-9).unwrap();
        let b = lyapunov_backward(&f, l, 20_000, rng.gen()).unwrap();
        ok += ((a.value - b.value).abs() <= 3.0 * (a.stderr + b.stderr)) as usize;
    }
    assert!(ok >= 28, "{ok}/30");
}
