use condlab::conductance::PeriodicEdge;
use condlab::exact::*;
use condlab::generator::{build_generator, build_operator, RateOperator};
use condlab::{ExteriorPolicy, LatticeWindow, ModelSpec, Site};
use faer::prelude::*;
use faer::Mat;

fn nn(dim: usize) -> condlab::ConductanceModel {
    ModelSpec::NearestNeighbor { dim, c: 1.0 }.build().unwrap()
}

fn heavy(dim: usize) -> condlab::ConductanceModel {
    ModelSpec::RadialHeavyTail { dim, exponent: None, offset: 0.0, scale: 1.0 }.build().unwrap()
}

/// `e^{−2t} Σ_m t^{2m+k} / (m! (m+k)!)`, summed in plain recurrence form until the terms
/// are below 1e-30.
fn bessel_series(t: f64, k: u32) -> f64 {
    let mut term = (-2.0 * t).exp();
    for j in 1..=k {
        term *= t / j as f64;
    }
    let mut sum = 0.0;
    let mut m = 0.0;
    while term > 1e-30 || m < t {
        sum += term;
        m += 1.0;
        term *= t * t / (m * (m + k as f64));
    }
    sum
}

#[test]
fn nearest_neighbor_kernel_matches_bessel_series() {
    let w = LatticeWindow::cube(1, Site::ORIGIN, 60).unwrap();
    let g = build_generator(&nn(1), &w, 1e-12).unwrap();
    let k = heat_kernel(&g, &[1.0, 16.0], &[Site::ORIGIN], false).unwrap();
    assert!((k.p(0, 0, &Site::ORIGIN) - bessel_series(1.0, 0)).abs() <= 1e-9);
    let far = k.p(1, 0, &Site::new(&[8]));
    assert!(far > 0.0);
    assert!((far - bessel_series(16.0, 8)).abs() <= 1e-9, "{far}");
}

#[test]
fn two_dimensional_kernel_factorizes() {
    let t = 25.0;
    let w2 = LatticeWindow::cube(2, Site::ORIGIN, 60).unwrap();
    let op2 = build_operator(&nn(2), &w2, 1e-12).unwrap();
    let p2 = heat_kernel(op2.as_ref(), &[t], &[Site::ORIGIN], false).unwrap().p(0, 0, &Site::ORIGIN);
    let w1 = LatticeWindow::cube(1, Site::ORIGIN, 60).unwrap();
    let g1 = build_generator(&nn(1), &w1, 1e-12).unwrap();
    let p1 = heat_kernel(&g1, &[t], &[Site::ORIGIN], false).unwrap().p(0, 0, &Site::ORIGIN);
    assert!((p2 * t - p1 * p1 * t).abs() <= 1e-9, "{} vs {}", p2 * t, p1 * p1 * t);
}

#[test]
fn kernel_table_invariants() {
    let m = heavy(2);
    let w = LatticeWindow::cube(2, Site::ORIGIN, 7).unwrap();
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let sources: Vec<Site> = w.sites().to_vec();
    let k = heat_kernel(&g, &[0.5, 1.0, 1.5], &sources, true).unwrap();
    let n = w.len();
    for i in 0..n {
        for t in 0..3 {
            assert!(k.mass(t, i) <= 1.0 + 1e-12);
            for j in 0..n {
                assert!((k.row(t, i)[j] - k.row(t, j)[i]).abs() <= 1e-10);
            }
        }
    }
    // killed kernels compose exactly: p(1.5) = p(0.5) p(1.0)
    for (i, j) in [(0, 0), (10, 100), (112, 40)] {
        let ck: f64 = (0..n).map(|z| k.row(0, i)[z] * k.row(1, z)[j]).sum();
        assert!((ck - k.row(2, i)[j]).abs() <= 1e-10, "({i},{j}): {ck} vs {}", k.row(2, i)[j]);
    }
}

#[test]
fn interval_green_function() {
    // Unit walk killed outside {1..5}: dense LU inverse and the closed form
    // x (m+1−y)/(m+1) for x ≤ y.
    let m = 5i64;
    let w = LatticeWindow::new_box(1, Site::new(&[1]), Site::new(&[m])).unwrap();
    let g = build_generator(&nn(1), &w, 1e-12).unwrap();
    let gf = green_function(&g).unwrap();
    let n = w.len();
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        a.write(i, i, 2.0);
        if i + 1 < n {
            a.write(i, i + 1, -1.0);
            a.write(i + 1, i, -1.0);
        }
    }
    let inv = a.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (w.site(i).0[0].min(w.site(j).0[0]), w.site(i).0[0].max(w.site(j).0[0]));
            let closed = (x * (m + 1 - y)) as f64 / (m + 1) as f64;
            assert!((gf.get(i, j) - inv.read(i, j)).abs() <= 1e-12);
            assert!((gf.get(i, j) - closed).abs() <= 1e-12);
        }
    }
}

#[test]
fn gamblers_ruin_exit_law() {
    let m = 9i64;
    let w = LatticeWindow::new_box(1, Site::new(&[1]), Site::new(&[m])).unwrap().with_policy(ExteriorPolicy::TrackTargets { radius: None });
    let g = build_generator(&nn(1), &w, 1e-12).unwrap();
    for x in 1..=m {
        let h = hitting_distribution(&g, &Site::new(&[x])).unwrap();
        let want = 1.0 - x as f64 / (m + 1) as f64;
        assert!((h.prob(&Site::new(&[0])) - want).abs() <= 1e-12);
        assert!((h.prob(&Site::new(&[m + 1])) - (1.0 - want)).abs() <= 1e-12);
        assert!((h.total() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn long_edge_exit_law_is_green_times_rate() {
    // Unit nearest-neighbour edges plus a single (period-40) edge 0 ↔ 10 of weight 1/64.
    let period = 40;
    let mut edges: Vec<PeriodicEdge> = (0..period).map(|k| PeriodicEdge { class: vec![k], offset: vec![1], weight: 1.0 }).collect();
    edges.push(PeriodicEdge { class: vec![0], offset: vec![10], weight: 1.0 / 64.0 });
    let m = ModelSpec::Periodic { dim: 1, period: vec![period], edges }.build().unwrap();
    let w = LatticeWindow::cube(1, Site::ORIGIN, 4).unwrap().with_policy(ExteriorPolicy::TrackTargets { radius: None });
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let target = Site::new(&[10]);
    let zero = w.index_of(&Site::ORIGIN).unwrap();
    for x in -4..=4i64 {
        let h = hitting_distribution(&g, &Site::new(&[x])).unwrap();
        let p = h.prob(&target);
        let gx = green_function(&g).unwrap();
        let xi = w.index_of(&Site::new(&[x])).unwrap();
        let via = gx.get(xi, zero) / 64.0;
        assert!(p > 0.0);
        assert!((p - via).abs() <= 1e-12, "x = {x}: {p} vs {via}");
    }
}

#[test]
fn exit_time_from_interval() {
    // Rate-2 walk leaving (−5, 5): E^x τ = (25 − x²)/2.
    let w = LatticeWindow::ball(1, Site::ORIGIN, 5.0).unwrap();
    let g = build_generator(&nn(1), &w, 1e-12).unwrap();
    let e = exit_time_moments(&g).unwrap();
    for (i, s) in w.sites().iter().enumerate() {
        let x = s.0[0] as f64;
        assert!((e[i] - (25.0 - x * x) / 2.0).abs() <= 1e-10);
    }
}

#[test]
fn exit_time_doubling_heavy_tail() {
    let m = heavy(1);
    let tau = |r: f64| {
        let w = LatticeWindow::ball(1, Site::ORIGIN, r).unwrap();
        let g = build_generator(&m, &w, 1e-12).unwrap();
        exit_time_moments(&g).unwrap()[w.index_of(&Site::ORIGIN).unwrap()]
    };
    for r in [4.0, 8.0, 16.0] {
        let q = tau(2.0 * r) / tau(r);
        assert!((2.0..=8.0).contains(&q), "r = {r}: {q}");
    }
}

#[test]
fn time_reversal_small_window() {
    let w = LatticeWindow::cube(1, Site::ORIGIN, 5).unwrap();
    let g = build_generator(&nn(1), &w, 1e-12).unwrap();
    let r = time_reversal_check(&g, &[Site::new(&[2])], &Site::new(&[-1]), &Site::new(&[1]), 2.0).unwrap();
    assert!(r.lhs > 0.0);
    assert!((r.lhs - r.rhs).abs() <= 1e-9);
    let gh = build_generator(&heavy(1), &LatticeWindow::cube(1, Site::ORIGIN, 12).unwrap(), 1e-12).unwrap();
    let r = time_reversal_check(&gh, &[Site::new(&[0]), Site::new(&[3])], &Site::new(&[-4]), &Site::new(&[6]), 1.5).unwrap();
    assert!((r.lhs - r.rhs).abs() <= 1e-12);
}

#[test]
fn killed_gap_shrinks_with_radius() {
    let pol = WindowPolicy::default();
    let narrow = lower_bound_check(&nn(1), &[16.0], 2.0, &pol).unwrap();
    let wide = lower_bound_check(&nn(1), &[16.0], 8.0, &pol).unwrap();
    assert!(wide[0].gap < narrow[0].gap);
    assert!(wide[0].killed > 0.0 && wide[0].killed <= wide[0].unkilled + 1e-15);
}

#[test]
fn resolvent_identity_at_scale() {
    // F = U_{λ/D²}(f/D²) on the unit lattice solves the rescaled resolvent equation, so
    // E^D(F, g) + λ (F, g)_μ = (f, g)_μ with μ = D^{−d}.
    let m = heavy(1);
    let d_scale = 4.0f64;
    let w = LatticeWindow::cube(1, Site::ORIGIN, 24).unwrap();
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let f: Vec<f64> = w.sites().iter().map(|s| (-(s.0[0] as f64 / 6.0).powi(2)).exp()).collect();
    let h: Vec<f64> = w.sites().iter().map(|s| (0.3 * s.0[0] as f64).cos()).collect();
    let lambda = 3.0;
    let d2 = d_scale * d_scale;
    let fs: Vec<f64> = f.iter().map(|v| v / d2).collect();
    let big_f = resolvent(&g, lambda / d2, &fs).unwrap();
    let mu = 1.0 / d_scale;
    let form = condlab::form::RescaledForm::new(d_scale, true);
    let energy = condlab::form::energy_from_generator(&g, &form, &big_f, &h);
    let lhs = energy + lambda * mu * big_f.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
    let rhs = mu * f.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
    assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn poincare_linear_profile_direct_sum() {
    // D = 1: g(l) = e^{−|l|} (1 − q)/(1 + q) with q = e^{−1}.
    let q = (-1.0f64).exp();
    let norm = (1.0 - q) / (1.0 + q);
    let ls: Vec<i64> = (-40..=40).collect();
    let gw: Vec<f64> = ls.iter().map(|l| norm * q.powi(l.unsigned_abs() as i32)).collect();
    let total: f64 = gw.iter().sum();
    let mean: f64 = ls.iter().zip(&gw).map(|(l, g)| *l as f64 * g).sum::<f64>() / total;
    let var: f64 = ls.iter().zip(&gw).map(|(l, g)| g * (*l as f64 - mean).powi(2)).sum::<f64>() / total;
    let energy: f64 = gw[..gw.len() - 1].iter().sum();
    let (v, e) = poincare_sides(1, 1.0, 40.0, &|s: &Site| s.0[0] as f64).unwrap();
    assert!((v - var).abs() <= 1e-12 * var);
    assert!((e - energy).abs() <= 1e-12 * energy);
    assert!(v / e <= optimal_ratio_1d(1.0, 40.0).unwrap() * (1.0 + 1e-12));
}

#[test]
fn poincare_ratio_is_scale_robust() {
    let f = |s: &Site| (0.2 * s.0[0] as f64).sin();
    let (v1, e1) = poincare_sides(1, 1.0, 30.0, &f).unwrap();
    let g = |s: &Site| (0.1 * s.0[0] as f64).sin();
    let (v2, e2) = poincare_sides(1, 2.0, 30.0, &g).unwrap();
    let q = (v2 / e2) / (v1 / e1);
    assert!((0.25..=4.0).contains(&q), "{q}");
}

#[test]
fn holder_fit_at_a_smooth_peak() {
    // The balls are centred at the source, where the kernel has a smooth maximum: the
    // oscillation is quadratic in ρ there, which in particular gives any exponent ≤ 1.
    let fit = holder_modulus(&nn(1), 1.0, 4.0, &Site::ORIGIN, &[1.5, 2.5, 4.0], &WindowPolicy::default()).unwrap();
    assert!(!fit.degenerate);
    assert!(fit.beta >= 1.0, "beta {}", fit.beta);
    assert!((fit.beta - 2.0).abs() <= 0.25, "beta {}", fit.beta);
}

#[test]
fn operator_choice_does_not_change_kernel() {
    let m = heavy(2);
    let w = LatticeWindow::cube(2, Site::ORIGIN, 20).unwrap();
    let op = build_operator(&m, &w, 1e-10).unwrap();
    let g = build_generator(&m, &w, 1e-10).unwrap();
    let a = heat_kernel(op.as_ref(), &[1.0], &[Site::ORIGIN], true).unwrap();
    let b = heat_kernel(&g as &dyn RateOperator, &[1.0], &[Site::ORIGIN], true).unwrap();
    let err = a.row(0, 0).iter().zip(b.row(0, 0)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-12, "{err}");
}
