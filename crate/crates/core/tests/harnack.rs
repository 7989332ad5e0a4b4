use condlab::exact::hitting_distribution;
use condlab::generator::build_generator;
use condlab::harnack::*;
use condlab::{ExteriorPolicy, LatticeWindow, ModelSpec, Site};
use proptest::prelude::*;

fn nn(dim: usize) -> condlab::ConductanceModel {
    ModelSpec::NearestNeighbor { dim, c: 1.0 }.build().unwrap()
}

fn heavy(dim: usize) -> condlab::ConductanceModel {
    ModelSpec::RadialHeavyTail { dim, exponent: None, offset: 0.0, scale: 1.0 }.build().unwrap()
}

#[test]
fn gamblers_ruin_harmonic_function() {
    let m = 11i64;
    let w = LatticeWindow::new_box(1, Site::new(&[1]), Site::new(&[m])).unwrap();
    let sol = harmonic_solve(&nn(1), &w, &BoundaryData::point(Site::new(&[m + 1])), 1e-12).unwrap();
    for x in 1..=m {
        assert!((sol.at(&Site::new(&[x])).unwrap() - x as f64 / (m + 1) as f64).abs() <= 1e-13);
    }
    assert!(sol.residual <= 1e-13 && sol.harmonicity <= 1e-13);
}

#[test]
fn optional_stopping_matches_exit_law() {
    // h(x) = Σ_w P^x(Y_τ = w) data(w), with the exit law from the independent route.
    let m = heavy(2);
    let w = LatticeWindow::ball(2, Site::ORIGIN, 6.0).unwrap();
    let data = BoundaryData {
        values: [(Site::new(&[6, 0]), 3.0), (Site::new(&[-2, 7]), 1.5), (Site::new(&[0, -8]), 0.25)].into_iter().collect(),
        default: 0.1,
        far: 0.0,
    };
    let sol = harmonic_solve(&m, &w, &data, 1e-6).unwrap();
    let g = build_generator(&m, &w.clone().with_policy(ExteriorPolicy::TrackTargets { radius: None }), 1e-6).unwrap();
    for x in [Site::ORIGIN, Site::new(&[3, -2]), Site::new(&[-5, 0])] {
        let law = hitting_distribution(&g, &x).unwrap();
        let via: f64 = law.targets.iter().map(|(s, p)| p * data.tracked(s)).sum::<f64>() + law.remainder * data.far;
        assert!((sol.at(&x).unwrap() - via).abs() <= 1e-9, "{x:?}");
    }
    assert!(sol.harmonicity <= 1e-9 + sol.tail);
}

#[test]
fn mixture_constant_dominates_members() {
    // The sup over all point masses is at least the constant for the single shell indicator.
    let m = heavy(2);
    let pm = harnack_constant(&m, Site::ORIGIN, &[8.0], DataFamily::PointMasses { shell: 3.0 }, 0.5, 1e-9).unwrap();
    let ind = harnack_constant(&m, Site::ORIGIN, &[8.0], DataFamily::ShellIndicator { shell: 3.0 }, 0.5, 1e-9).unwrap();
    assert!(pm[0].constant >= ind[0].constant);
    assert!(ind[0].constant >= 1.0);
    assert_eq!(pm[0].skipped, 0);
}

#[test]
fn nearest_neighbor_constants_are_bounded() {
    let rows = harnack_constant(&nn(2), Site::ORIGIN, &[8.0, 16.0, 32.0], DataFamily::PointMasses { shell: 1.5 }, 0.5, 1e-12).unwrap();
    for r in &rows {
        assert!(r.constant >= 1.0 && r.constant < 20.0, "R = {}: {}", r.radius, r.constant);
    }
    // the constant settles instead of growing with R
    assert!(rows[2].constant <= 1.25 * rows[1].constant);
}

#[test]
fn counterexample_degenerate_scale_has_unit_ratio() {
    let row = counterexample_ratio(&[2, 32], &[0.001, 0.0005], 0, 0.25, 100, 1).unwrap();
    assert_eq!(row.y, Site::ORIGIN);
    assert_eq!(row.ratio, 1.0);
}

#[test]
fn counterexample_ratio_grows() {
    let b = [8, 32, 128];
    let a = [1.0 / 128.0, 1.0 / 512.0, 1.0 / 2048.0];
    let r0 = counterexample_ratio(&b, &a, 0, 0.25, 20_000, 5).unwrap();
    let r1 = counterexample_ratio(&b, &a, 1, 0.25, 20_000, 6).unwrap();
    assert!(!r0.inconclusive && !r1.inconclusive);
    assert!(r1.ratio_ci.0 > r0.ratio_ci.1, "{:?} vs {:?}", r0.ratio_ci, r1.ratio_ci);
    assert!(r0.ratio_ci.0 <= r0.ratio && r0.ratio <= r0.ratio_ci.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nonnegative_data_give_positive_core(w in prop::collection::vec((0.0f64..6.3, 7.8f64..9.5), 1..4), vals in prop::collection::vec(0.1f64..5.0, 3)) {
        let m = heavy(2);
        let win = LatticeWindow::ball(2, Site::ORIGIN, 7.0).unwrap();
        let data = BoundaryData {
            values: w
                .iter()
                .zip(&vals)
                .map(|((phi, r), v)| (Site::new(&[(r * phi.cos()).round() as i64, (r * phi.sin()).round() as i64]), *v))
                .filter(|(s, _)| !win.contains(s))
                .collect(),
            default: 0.0,
            far: 0.01,
        };
        let sol = harmonic_solve(&m, &win, &data, 1e-6).unwrap();
        let core: Vec<f64> = win.sites().iter().zip(&sol.h).filter(|(s, _)| s.norm() < 3.5).map(|(_, h)| *h).collect();
        let (lo, hi) = core.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        prop_assert!(lo > 0.0);
        prop_assert!(hi / lo >= 1.0);
        let top = vals.iter().copied().fold(0.01f64, f64::max);
        prop_assert!(hi <= top * (1.0 + 1e-12));
    }
}
