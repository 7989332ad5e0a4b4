use condlab::experiment::*;
use condlab::Error;
use std::path::{Path, PathBuf};

fn shipped_configs() -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out = Vec::new();
    for dir in ["acceptance", "examples"] {
        for e in std::fs::read_dir(root.join(dir)).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "toml") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn quick(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"
name = "quick"
seed = 3
output = {{ dir = "{}" }}
{extra}

[experiment]
kind = "reversal"
tol = 1e-12

[[experiment.cases]]
model = {{ kind = "radial_heavy_tail", dim = 1 }}
window = {{ shape = "box", lo = [-10], hi = [10] }}
avoid = [[0]]
x = [-3]
y = [4]
t = 1.0
"#,
        dir.display()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn shipped_configs_round_trip_and_validate() {
    let all = shipped_configs();
    assert!(all.len() >= 16);
    for p in all {
        let cfg = ExperimentConfig::load(&p).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", p.display());
        assert_eq!(cfg.digest().unwrap(), again.digest().unwrap());
    }
}

#[test]
fn every_kind_has_a_shipped_config() {
    let kinds: Vec<String> = shipped_configs().iter().map(|p| ExperimentConfig::load(p).unwrap().experiment.kind().to_string()).collect();
    for (k, _) in KINDS {
        assert!(kinds.iter().any(|x| x == k), "no config of kind {k}");
    }
}

#[test]
fn digest_ignores_formatting() {
    let d = tempfile::tempdir().unwrap();
    let a = quick(d.path(), "");
    let b = ExperimentConfig::from_toml(&a.to_toml().unwrap().replace(" = ", "=")).unwrap();
    assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    let mut c = a.clone();
    c.seed = 4;
    assert_ne!(a.digest().unwrap(), c.digest().unwrap());
}

#[test]
fn unknown_fields_and_kinds_are_rejected() {
    let bad_field = "name = \"x\"\n[experiment]\nkind = \"poincare\"\ndims = [1]\nscales = [1.0]\nextent = 5.0\nbound = 10.0\nbogus = 1\n";
    assert!(ExperimentConfig::from_toml(bad_field).is_err());
    let bad_kind = "name = \"x\"\n[experiment]\nkind = \"teleport\"\n";
    assert!(ExperimentConfig::from_toml(bad_kind).is_err());
    let bad_value = "name = \"x\"\n[experiment]\nkind = \"poincare\"\ndims = [1]\nscales = [0.5]\nextent = 5.0\nbound = 10.0\n";
    let cfg = ExperimentConfig::from_toml(bad_value).unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn freeze_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = quick(&d.path().join("a"), "");
    let ids = vec!["reversal.0".to_string()];
    let (r1, f1) = freeze(&cfg, None, &ids, 1e-6).unwrap();
    let (_, f2) = freeze(&cfg, None, &ids, 1e-6).unwrap();
    assert!(r1.passed);
    assert_eq!(f1.to_json().unwrap(), f2.to_json().unwrap());
    let v: serde_json::Value = serde_json::from_str(&f1.to_json().unwrap()).unwrap();
    let e = &v.as_array().unwrap()[0];
    for k in ["check_id", "frozen_value", "tolerance", "provenance"] {
        assert!(e.get(k).is_some(), "missing {k}");
    }
}

#[test]
fn freeze_refuses_unknown_and_failed_checks() {
    let d = tempfile::tempdir().unwrap();
    let cfg = quick(d.path(), "");
    let err = freeze(&cfg, None, &["reversal.7".to_string()], 1e-6).unwrap_err();
    assert!(matches!(err, Error::UnknownCheck(_)), "{err}");
    let mut strict = cfg.clone();
    if let Experiment::Reversal(r) = &mut strict.experiment {
        r.tol = f64::MIN_POSITIVE;
    }
    let err = freeze(&strict, None, &["reversal.0".to_string()], 1e-6).unwrap_err();
    assert!(matches!(err, Error::Freeze(_)), "{err}");
}

#[test]
fn failing_run_still_writes_report() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg = quick(d.path(), "");
    if let Experiment::Reversal(r) = &mut cfg.experiment {
        r.tol = f64::MIN_POSITIVE;
    }
    let rep = run(&cfg, None).unwrap();
    assert!(!rep.passed);
    let on_disk: RunReport = serde_json::from_slice(&std::fs::read(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk.checks, rep.checks);
    let f = on_disk.failures().next().unwrap();
    assert!(f.value >= 0.0 && f.threshold == f64::MIN_POSITIVE);
}

#[test]
fn regression_file_is_compared() {
    let d = tempfile::tempdir().unwrap();
    let cfg = quick(&d.path().join("first"), "");
    let (_, frozen) = freeze(&cfg, None, &["reversal.0".to_string()], 1e-6).unwrap();
    std::fs::write(d.path().join("frozen.json"), frozen.to_json().unwrap()).unwrap();
    let with = quick(&d.path().join("second"), "regression = \"frozen.json\"");
    let rep = run(&with, Some(d.path())).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.regressions.len(), 1);

    let mut shifted = frozen.clone();
    shifted.entries[0].frozen_value += 1.0;
    shifted.entries[0].tolerance = 1e-3;
    std::fs::write(d.path().join("frozen.json"), shifted.to_json().unwrap()).unwrap();
    let rep = run(&with, Some(d.path())).unwrap();
    assert!(!rep.passed);
    assert!(!rep.regressions[0].passed);
}

#[test]
fn nash_plateau_freeze_holds_the_bessel_value() {
    let d = tempfile::tempdir().unwrap();
    let text = format!(
        "name = \"plateau\"\noutput = {{ dir = \"{}\" }}\n[experiment]\nkind = \"nash\"\nt_grid = [1.0]\nplateau_t = 100.0\nplateau_tol = 0.01\n[[experiment.cases]]\nlabel = \"nn\"\nmodel = {{ kind = \"nearest_neighbor\", dim = 1 }}\nbound = 1.0\n",
        d.path().display()
    );
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let (_, f) = freeze(&cfg, None, &["nash.plateau_d1.value".to_string()], 1e-9).unwrap();
    // √t e^{−2t} I_0(2t) at t = 100, summed here as a plain series
    let t: f64 = 100.0;
    let mut term = (-2.0 * t).exp();
    let mut sum = 0.0;
    for m in 1..2000 {
        sum += term;
        term *= t * t / (m as f64 * m as f64);
    }
    let want = sum * t.sqrt();
    assert!((f.entries[0].frozen_value - want).abs() <= 1e-9, "{} vs {want}", f.entries[0].frozen_value);
}
