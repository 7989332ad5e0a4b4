use condlab::exact::heat_kernel;
use condlab::generator::build_generator;
use condlab::sampler::*;
use condlab::{LatticeWindow, ModelSpec, Site};
use rand_chacha::rand_core::SeedableRng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::HashMap;

fn heavy(dim: usize) -> condlab::ConductanceModel {
    ModelSpec::RadialHeavyTail { dim, exponent: None, offset: 0.0, scale: 1.0 }.build().unwrap()
}

#[test]
fn ensembles_are_reproducible_across_worker_counts() {
    let m = heavy(2);
    let opts = SimulateOptions { log_events: true, ..SimulateOptions::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate(ProcessKind::Continuous, &m, Site::ORIGIN, 5.0, 500, 99, &opts).unwrap())
    };
    let (a, b, c) = (run(1), run(3), run(1));
    assert_eq!(a.digest(), b.digest());
    assert_eq!(a.digest(), c.digest());
    let other = simulate(ProcessKind::Continuous, &m, Site::ORIGIN, 5.0, 500, 100, &opts).unwrap();
    assert_ne!(a.digest(), other.digest());
    for log in a.logs.as_ref().unwrap() {
        assert!(log.windows(2).all(|w| w[1].0 > w[0].0), "event times must increase");
    }
}

#[test]
fn path_log_csv_layout() {
    let m = ModelSpec::NearestNeighbor { dim: 2, c: 1.0 }.build().unwrap();
    let opts = SimulateOptions { log_events: true, ..SimulateOptions::default() };
    let e = simulate(ProcessKind::Rescaled { n: 4 }, &m, Site::ORIGIN, 1.0, 3, 5, &opts).unwrap();
    let mut buf = Vec::new();
    e.write_log(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,time,x1,x2"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first, vec!["0", "0", "0", "0"]);
    let rows = text.lines().count() - 1;
    assert_eq!(rows as u64, e.ends.iter().map(|p| p.jumps + 1).sum::<u64>());
}

#[test]
fn jump_frequencies_pass_chi_square() {
    // 10⁶ draws per class against the tabulated law; offsets beyond |z| = 4 are pooled.
    for (m, tol) in [(heavy(1), 1e-9), (ModelSpec::Remark2Periodic { r1: 1.0, s1: 2.0, r2: 0.5, s2: 3.0 }.build().unwrap(), 1e-12)] {
        let s = JumpSampler::new(&m, tol).unwrap();
        for x in [Site::new(&[0]), Site::new(&[1])] {
            let nu = s.nu(&x);
            let bin = |z: &Site| if z.0[0].abs() > 4 { 5 * z.0[0].signum() } else { z.0[0] };
            let mut expected: HashMap<i64, f64> = HashMap::new();
            for (z, w) in s.law(&x) {
                *expected.entry(bin(&z)).or_default() += w / nu;
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
            let n = 1_000_000u64;
            let mut seen: HashMap<i64, u64> = HashMap::new();
            for _ in 0..n {
                *seen.entry(bin(&s.sample(&x, &mut rng))).or_default() += 1;
            }
            let mut stat = 0.0;
            for (k, p) in &expected {
                let e = p * n as f64;
                let o = *seen.get(k).unwrap_or(&0) as f64;
                stat += (o - e).powi(2) / e;
            }
            assert!(seen.keys().all(|k| expected.contains_key(k)));
            let dof = (expected.len() - 1) as f64;
            let pval = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
            assert!(pval > 1e-3, "{}: chi2 {stat} on {dof} dof, p = {pval}", m.name());
        }
    }
}

#[test]
fn counterexample_long_jump_frequency() {
    let a = [1.0 / 128.0, 1.0 / 512.0, 1.0 / 2048.0];
    let m = ModelSpec::HarnackCounterexample { dim: 3, b: vec![8, 32, 128], a: a.to_vec() }.build().unwrap();
    let s = JumpSampler::new(&m, 1e-12).unwrap();
    assert_eq!(s.defect(), 0.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 400_000u64;
    let hits = (0..n).filter(|_| s.sample(&Site::ORIGIN, &mut rng).norm2() == 64).count() as f64;
    let p = 2.0 * a[0];
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() <= 3.0 * sigma, "{} vs {p}", hits / n as f64);
}

#[test]
fn poisson_difference_variance() {
    // A coordinate of the unit nearest-neighbour walk is a difference of two rate-1
    // Poisson processes, so Var Z^(n)_1 = 2 for every n.
    let m = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build().unwrap();
    for n in [4u64, 64] {
        let e = simulate(ProcessKind::Rescaled { n }, &m, Site::ORIGIN, 1.0, 40_000, n, &SimulateOptions::default()).unwrap();
        let xs: Vec<f64> = e.positions().into_iter().map(|p| p[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64;
        let se = ((m4 - var * var) / xs.len() as f64).sqrt();
        assert!((var - 2.0).abs() <= 3.0 * se, "n = {n}: var {var} ± {se}");
    }
}

#[test]
fn sup_displacement_matches_killed_mass() {
    // P(sup_{s≤t} |Y_s| > 6) equals the mass killed outside {|y| ≤ 6} by time t.
    let m = ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build().unwrap();
    let t: f64 = 16.0;
    let lambda = 1.5;
    let w = LatticeWindow::ball(1, Site::ORIGIN, lambda * t.sqrt() + 0.5).unwrap();
    let g = build_generator(&m, &w, 1e-12).unwrap();
    let k = heat_kernel(&g, &[t], &[Site::ORIGIN], true).unwrap();
    let exact = 1.0 - k.mass(0, 0);
    let s = JumpSampler::new(&m, 1e-12).unwrap();
    let est = sup_displacement(&s, Site::ORIGIN, t, &[lambda], 40_000, 8);
    let f = est[0].1;
    let sigma = (exact * (1.0 - exact) / f.n as f64).sqrt();
    assert!((f.p - exact).abs() <= 3.0 * sigma, "{} vs {exact}", f.p);
}

#[test]
fn heavy_tail_exits_faster_than_nearest_neighbor() {
    let nn = JumpSampler::new(&ModelSpec::NearestNeighbor { dim: 1, c: 1.0 }.build().unwrap(), 1e-12).unwrap();
    let hv = JumpSampler::new(&heavy(1), 1e-9).unwrap();
    let a = sup_displacement(&nn, Site::ORIGIN, 16.0, &[3.0], 20_000, 4)[0].1;
    let b = sup_displacement(&hv, Site::ORIGIN, 16.0, &[3.0], 20_000, 4)[0].1;
    assert!(b.p > a.p + 3.0 * (a.sigma + b.sigma), "{} vs {}", b.p, a.p);
}

#[test]
fn stopped_paths_end_outside_the_ball() {
    let s = JumpSampler::new(&heavy(2), 1e-9).unwrap();
    let times = exit_times(&s, Clock::Rate, Site::ORIGIN, 5.0, 1e6, 200, 1);
    assert!(times.iter().all(|t| *t > 0.0 && *t < 1e6));
    let stop = StopRule::ExitBall { center: Site::ORIGIN, radius: 5.0 };
    for p in 0..50 {
        let end = walk(&s, Clock::Rate, Site::ORIGIN, 1e6, &stop, &mut stream(1, p), |_| true);
        assert!(end.stopped);
        assert!(end.site.norm() >= 5.0);
        assert_eq!(end.time, times[p as usize]);
    }
}
