use condlab::exact::heat_kernel;
use condlab::form::{dirichlet_energy, energy_from_generator, RescaledForm};
use condlab::generator::{build_generator, transition_matrix, RateOperator, Scaled};
use condlab::lattice::{ball_sites, box_sites};
use condlab::{LatticeWindow, ModelSpec, Site};
use proptest::prelude::*;

fn heavy(dim: usize) -> ModelSpec {
    ModelSpec::RadialHeavyTail { dim, exponent: None, offset: 0.0, scale: 1.0 }
}

#[test]
fn ball_is_open() {
    let w = LatticeWindow::ball(2, Site::ORIGIN, 5.0).unwrap();
    assert!(w.contains(&Site::new(&[4, 0])));
    assert!(w.contains(&Site::new(&[3, 3])));
    assert!(!w.contains(&Site::new(&[5, 0])));
    assert!(!w.contains(&Site::new(&[4, 3])));
    // lattice points with x² + y² < 25
    assert_eq!(w.len(), 69);
}

#[test]
fn generator_rows_balance_for_every_family() {
    let specs = [
        ModelSpec::NearestNeighbor { dim: 2, c: 0.75 },
        ModelSpec::Remark2Periodic { r1: 1.0, s1: 2.0, r2: 0.5, s2: 3.0 },
        heavy(1),
        heavy(2),
        ModelSpec::HarnackCounterexample { dim: 3, b: vec![8, 32], a: vec![1.0 / 128.0, 1.0 / 512.0] },
    ];
    for spec in specs {
        let m = spec.build().unwrap();
        let d = m.dim();
        let w = LatticeWindow::cube(d, Site::ORIGIN, if d == 3 { 3 } else { 6 }).unwrap();
        let g = build_generator(&m, &w, 1e-10).unwrap();
        assert!(g.row_balance_error() <= 1e-12, "{:?}: {}", spec, g.row_balance_error());
        assert_eq!(g.symmetry_error(), 0.0, "{spec:?}");
        assert!(g.defect.iter().all(|v| *v <= 1e-10));
    }
}

#[test]
fn transition_rows_are_substochastic() {
    let m = heavy(1).build().unwrap();
    let w = LatticeWindow::cube(1, Site::ORIGIN, 10).unwrap();
    let p = transition_matrix(&m, &w, 1e-10).unwrap();
    for i in 0..w.len() {
        let total = p.p.row_sum(i) + p.kill[i];
        assert!((total - 1.0).abs() < 1e-12, "row {i}: {total}");
    }
}

#[test]
fn coo_export_has_row_col_value() {
    let m = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build().unwrap();
    let w = LatticeWindow::cube(1, Site::ORIGIN, 1).unwrap();
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let mut buf = Vec::new();
    g.write_coo(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<(usize, usize, f64)> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(0, 0, -2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -2.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, -2.0)]);
}

#[test]
fn energy_matches_quadratic_form_of_generator() {
    // With f = 0 outside the window, ½ Σ_{ordered} (f(x) − f(y))² C = (f, −L f).
    let m = heavy(1).build().unwrap();
    let w = LatticeWindow::cube(1, Site::ORIGIN, 12).unwrap();
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let f: Vec<f64> = w.sites().iter().map(|s| (0.4 * s.0[0] as f64).cos()).collect();
    let lf = g.apply_neg(&f);
    let quad: f64 = f.iter().zip(&lf).map(|(a, b)| a * b).sum();
    let form = RescaledForm::new(1.0, true);
    let e = energy_from_generator(&g, &form, &f, &f);
    assert!((e - quad).abs() <= 1e-12 * quad.abs().max(1.0), "{e} vs {quad}");
    let e2 = dirichlet_energy(&form, &m, &w, &f, &f, 1e-12).unwrap();
    assert_eq!(e, e2);
}

#[test]
fn rescaled_kernel_scaling() {
    // p^D(t, x, y) = D^d p(D² t, Dx, Dy): running the D²-scaled generator for t is the
    // unit generator run for D² t.
    let m = heavy(2).build().unwrap();
    let w = LatticeWindow::cube(2, Site::ORIGIN, 8).unwrap();
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let d_scale = 2.0f64;
    let scaled = Scaled { inner: &g, factor: d_scale * d_scale };
    let src = [Site::new(&[2, -2])];
    let a = heat_kernel(&scaled, &[0.25], &src, true).unwrap();
    let b = heat_kernel(&g as &dyn RateOperator, &[1.0], &src, true).unwrap();
    let measure = d_scale.powi(2);
    for j in 0..w.len() {
        let pa = measure * a.row(0, 0)[j];
        let pb = measure * b.row(0, 0)[j];
        assert!((pa - pb).abs() <= 1e-10, "site {j}: {pa} vs {pb}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn window_index_round_trip(dim in 1usize..=3, lo in prop::array::uniform3(-6i64..0), ext in prop::array::uniform3(0i64..5)) {
        let lo = Site::new(&lo[..dim]);
        let hi = Site::new(&(0..dim).map(|i| lo.0[i] + ext[i]).collect::<Vec<_>>());
        let w = LatticeWindow::new_box(dim, lo, hi).unwrap();
        prop_assert_eq!(w.len(), box_sites(dim, &lo, &hi).len());
        for i in 0..w.len() {
            prop_assert_eq!(w.index_of(&w.site(i)), Some(i));
        }
        let outside = Site::new(&(0..dim).map(|i| hi.0[i] + 1).collect::<Vec<_>>());
        prop_assert_eq!(w.index_of(&outside), None);
    }

    #[test]
    fn ball_membership_is_strict(dim in 1usize..=3, r in 0.5f64..6.0, c in prop::array::uniform3(-4i64..4)) {
        let c = Site::new(&c[..dim]);
        let w = LatticeWindow::ball(dim, c, r).unwrap();
        let reach = r.ceil() as i64 + 1;
        let lo = Site::new(&(0..dim).map(|i| c.0[i] - reach).collect::<Vec<_>>());
        let hi = Site::new(&(0..dim).map(|i| c.0[i] + reach).collect::<Vec<_>>());
        for s in box_sites(dim, &lo, &hi) {
            prop_assert_eq!(w.contains(&s), s.dist(&c) < r);
        }
        prop_assert_eq!(w.len(), ball_sites(dim, &c, r).len());
    }
}
