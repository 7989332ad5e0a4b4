use condlab::conductance::{audit_assumptions, AuditParams, Verdict};
use condlab::linalg::compensated_sum;
use condlab::{vertex_weight, LatticeWindow, ModelSpec, Site};
use proptest::prelude::*;

const CE_B: [i64; 3] = [8, 32, 128];
const CE_A: [f64; 3] = [1.0 / 128.0, 1.0 / 512.0, 1.0 / 2048.0];

fn heavy(dim: usize) -> ModelSpec {
    ModelSpec::RadialHeavyTail { dim, exponent: None, offset: 0.0, scale: 1.0 }
}

fn period_two() -> ModelSpec {
    ModelSpec::Remark2Periodic { r1: 1.0, s1: 1.0, r2: 2.0, s2: 3.0 }
}

fn counterexample() -> ModelSpec {
    ModelSpec::HarnackCounterexample { dim: 3, b: CE_B.to_vec(), a: CE_A.to_vec() }
}

#[test]
fn nearest_neighbor_weights() {
    let m = ModelSpec::NearestNeighbor { dim: 2, c: 1.0 }.build().unwrap();
    let o = Site::ORIGIN;
    for x in -3..=3i64 {
        for y in -3..=3i64 {
            let s = Site::new(&[x, y]);
            let want = if x.abs() + y.abs() == 1 { 1.0 } else { 0.0 };
            assert_eq!(m.conductance(&o, &s), want, "{s:?}");
        }
    }
}

#[test]
fn period_two_edges_by_parity() {
    let m = period_two().build().unwrap();
    for k in -6..6i64 {
        let x = Site::new(&[k]);
        assert_eq!(m.conductance(&x, &Site::new(&[k + 1])), 1.0);
        let far = if k.rem_euclid(2) == 1 { 2.0 } else { 3.0 };
        assert_eq!(m.conductance(&x, &Site::new(&[k + 2])), far, "k = {k}");
        assert_eq!(m.conductance(&x, &Site::new(&[k + 3])), 0.0);
    }
}

#[test]
fn period_two_vertex_weight_by_enumeration() {
    // ν_k = C(k,k±1) + C(k,k±2); the two-step edges into k come from k−2 and k+2,
    // which share k's parity.
    let m = period_two().build().unwrap();
    let brute = |k: i64| -> f64 { (-5..=5).filter(|j| *j != 0).map(|j| m.conductance(&Site::new(&[k]), &Site::new(&[k + j]))).sum() };
    for k in -4..4i64 {
        let (nu, tail) = vertex_weight(&m, &Site::new(&[k]), 1e-12).unwrap();
        assert_eq!(tail, 0.0);
        assert_eq!(nu, brute(k));
        assert_eq!(nu, if k.rem_euclid(2) == 1 { 6.0 } else { 8.0 });
    }
}

#[test]
fn heavy_tail_vertex_weight_matches_series() {
    // ν_0 = 2 Σ_{i≥1} i^{-5}; the oracle sums far past the truncation and bounds the rest
    // by the integral ∫_N^∞ 2 x^{-5} dx.
    let m = heavy(1).build().unwrap();
    let n = 200_000u64;
    let series = 2.0 * compensated_sum((1..=n).rev().map(|i| (i as f64).powi(-5)));
    let rest = 0.5 * (n as f64).powi(-4);
    let (nu, tail) = vertex_weight(&m, &Site::ORIGIN, 1e-8).unwrap();
    assert!(tail <= 1e-8);
    assert!(nu <= series + rest);
    assert!(series - nu <= tail + 1e-15, "nu {nu}, series {series}, tail {tail}");
}

#[test]
fn counterexample_jump_law() {
    let m = counterexample().build().unwrap();
    let eps: f64 = 0.5 * CE_A.iter().sum::<f64>();
    // The nearest-neighbour steps carry (1 − 2ε)/6 each once the long atoms take 2Σa.
    let nn = (1.0 - 4.0 * eps) / 6.0;
    for ax in 0..3 {
        for s in [-1, 1] {
            assert!((m.conductance(&Site::ORIGIN, &Site::axis(ax, s)) - nn).abs() < 1e-15);
        }
    }
    for (b, a) in CE_B.iter().zip(CE_A) {
        assert_eq!(m.conductance(&Site::ORIGIN, &Site::axis(0, *b)), a);
        assert_eq!(m.conductance(&Site::ORIGIN, &Site::axis(0, -*b)), a);
        assert_eq!(m.conductance(&Site::ORIGIN, &Site::axis(1, *b)), 0.0);
    }
    let (nu, _) = vertex_weight(&m, &Site::new(&[5, -2, 7]), 1e-12).unwrap();
    assert!((nu - 1.0).abs() <= 1e-12);
}

#[test]
fn counterexample_rejects_heavy_atoms() {
    let bad = ModelSpec::HarnackCounterexample { dim: 3, b: vec![8, 32], a: vec![0.02, 0.02] };
    assert!(bad.build().is_err());
    let unsorted = ModelSpec::HarnackCounterexample { dim: 3, b: vec![32, 8], a: vec![0.001, 0.001] };
    assert!(unsorted.build().is_err());
}

#[test]
fn audit_nearest_neighbor() {
    let m = ModelSpec::NearestNeighbor { dim: 2, c: 1.0 }.build().unwrap();
    let region = LatticeWindow::cube(2, Site::ORIGIN, 3).unwrap();
    let rep = audit_assumptions(&m, &region, &AuditParams::default());
    for a in ["A1", "A2", "A3", "A4", "symmetry"] {
        assert_eq!(rep.get(a).unwrap().verdict, Verdict::Pass, "{a}");
    }
    assert_eq!(rep.constant("A1", "c1"), Some(4.0));
    assert_eq!(rep.constant("A1", "c2"), Some(4.0));
    assert!(rep.constant("A2", "N").unwrap() <= 2.0);
}

#[test]
fn audit_counterexample_fails_comparability_with_witness() {
    let m = counterexample().build().unwrap();
    let region = LatticeWindow::cube(3, Site::ORIGIN, 1).unwrap();
    let params = AuditParams { radius: 40.0, ..AuditParams::default() };
    let rep = audit_assumptions(&m, &region, &params);
    let a4 = rep.get("A4").unwrap();
    assert_eq!(a4.verdict, Verdict::Fail);
    // Some witness jumps along the b₂ atom and compares with an off-atom site.
    let hit = a4.witnesses.iter().any(|w| {
        let (x, y, yp) = (&w.sites[0], &w.sites[1], &w.sites[2]);
        (y[0] - x[0]).abs() == 32 && y[1] == x[1] && y[2] == x[2] && yp != y
    });
    assert!(hit, "no b2 witness among {:?}", a4.witnesses.len());
    for e in &rep.entries {
        if e.verdict == Verdict::Fail {
            assert!(!e.witnesses.is_empty(), "{} fails without a witness", e.assumption);
        }
    }
}

#[test]
fn audit_radial_comparability_passes() {
    // (1 + |z|)^{-(d+3)}: neighbours of a jump target differ by at most a bounded factor.
    let m = ModelSpec::RadialHeavyTail { dim: 2, exponent: Some(5.0), offset: 1.0, scale: 1.0 }.build().unwrap();
    let region = LatticeWindow::cube(2, Site::ORIGIN, 1).unwrap();
    let rep = audit_assumptions(&m, &region, &AuditParams { max_sites: 2, ..AuditParams::default() });
    let a4 = rep.get("A4").unwrap();
    assert_eq!(a4.verdict, Verdict::Pass);
    let k = rep.constant("A4", "comparison").unwrap();
    // |y'| ≥ 2|y|/3, so the ratio is at most ((1 + |y|)/(1 + 2|y|/3))^5 < 1.5^5.
    assert!(k > 1.0 && k < 1.5f64.powi(5), "comparison {k}");
}

#[test]
fn report_json_fields() {
    let m = heavy(1).build().unwrap();
    let region = LatticeWindow::cube(1, Site::ORIGIN, 2).unwrap();
    let rep = audit_assumptions(&m, &region, &AuditParams::default());
    let v = serde_json::to_value(&rep).unwrap();
    for e in v.as_array().unwrap() {
        for f in ["assumption", "verdict", "constants", "witnesses", "region"] {
            assert!(e.get(f).is_some(), "missing {f}");
        }
    }
}

fn any_model() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (1usize..=3, 0.1f64..4.0).prop_map(|(dim, c)| ModelSpec::NearestNeighbor { dim, c }),
        (0.1f64..3.0, 0.1f64..3.0, 0.1f64..3.0, 0.1f64..3.0).prop_map(|(r1, s1, r2, s2)| ModelSpec::Remark2Periodic { r1, s1, r2, s2 }),
        (1usize..=2, 0.0f64..2.0).prop_map(|(dim, offset)| ModelSpec::RadialHeavyTail { dim, exponent: None, offset, scale: 1.0 }),
        Just(counterexample()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conductances_are_symmetric(spec in any_model(), x in prop::array::uniform3(-20i64..20)) {
        let m = spec.build().unwrap();
        let d = m.dim();
        let x = Site::new(&x[..d]);
        for (z, w) in m.jumps(&x, 6.0) {
            let y = x + z;
            prop_assert_eq!(m.conductance(&y, &x), w);
            prop_assert_eq!(m.conductance(&x, &y), w);
            prop_assert!(w <= m.envelope().value(z.norm()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn vertex_weight_is_translation_invariant(dim in 1usize..=2, x in prop::array::uniform3(-50i64..50)) {
        let m = heavy(dim).build().unwrap();
        let nu0 = vertex_weight(&m, &Site::ORIGIN, 1e-6).unwrap();
        let nux = vertex_weight(&m, &Site::new(&x[..dim]), 1e-6).unwrap();
        prop_assert_eq!(nu0, nux);
    }
}
