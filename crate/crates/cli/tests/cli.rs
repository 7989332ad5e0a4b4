use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_condlab"));
    c.env_remove("CONDLAB_SEED").env_remove("CONDLAB_WORKERS");
    c
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/examples").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn run_passing_config_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("hk");
    let o = bin().arg("run").arg(example("heat-kernel.toml")).arg("--out-dir").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS heat_kernel.mass"));

    let csv = std::fs::read_to_string(out.join("kernel.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,x2,y1,y2,value"));
    // 3 times × 2 sources × 13² targets
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 169);

    let coo = std::fs::read_to_string(out.join("generator.coo")).unwrap();
    for line in coo.lines().take(20) {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(f.len(), 3, "{line}");
        f[0].parse::<usize>().unwrap();
        f[1].parse::<usize>().unwrap();
        f[2].parse::<f64>().unwrap();
    }

    let r = json(&out.join("report.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["kind"], "heat-kernel");
}

#[test]
fn failing_expectation_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = std::fs::read_to_string(example("check-assumptions.toml")).unwrap().replace("A4 = \"fail\"", "A4 = \"pass\"");
    let cfg = write(tmp.path(), "bad-expect.toml", &body);
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL assumptions.A4"));

    let rep = json(&tmp.path().join("o/assumptions.json"));
    let a4 = rep.as_array().unwrap().iter().find(|a| a["assumption"] == "A4").unwrap();
    assert_eq!(a4["verdict"], "fail");
    for key in ["constants", "witnesses", "region"] {
        assert!(a4.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn parse_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = write(tmp.path(), "broken.toml", "name = \"x\"\n[experiment\nkind = 1\n");
    assert_eq!(code(&bin().arg("run").arg(&broken).output().unwrap()), 2);
    let unknown = write(tmp.path(), "unknown.toml", "name = \"x\"\nseed = 1\n[experiment]\nkind = \"no-such-kind\"\n");
    assert_eq!(code(&bin().arg("validate").arg(&unknown).output().unwrap()), 2);
}

#[test]
fn constraint_violations_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let body = std::fs::read_to_string(example("heat-kernel.toml")).unwrap().replace("tol = 1e-8", "tol = -1.0");
    let cfg = write(tmp.path(), "neg-tol.toml", &body);
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin().arg("run").arg(&cfg).arg("--out-dir").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn validate_accepts_every_shipped_config() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for sub in ["acceptance", "examples"] {
        for e in std::fs::read_dir(root.join(sub)).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "toml") {
                let o = bin().arg("validate").arg(&p).output().unwrap();
                assert_eq!(code(&o), 0, "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
                assert!(stdout(&o).contains("valid"));
                n += 1;
            }
        }
    }
    assert!(n >= 16);
}

#[test]
fn list_builtins_names_models_and_kinds() {
    let o = bin().arg("list-builtins").output().unwrap();
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for name in ["nearest_neighbor", "radial_heavy_tail", "harnack_counterexample", "heat-kernel", "harnack"] {
        assert!(s.contains(name), "missing {name}");
    }
}

#[test]
fn freeze_writes_sorted_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let dest = tmp.path().join("frozen.json");
    let o = bin()
        .arg("freeze")
        .arg(example("heat-kernel.toml"))
        .args(["--checks", "heat_kernel.nonnegative,heat_kernel.mass", "--out"])
        .arg(&dest)
        .arg("--out-dir")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = json(&dest);
    let entries = f.as_array().unwrap();
    let ids: Vec<&str> = entries.iter().map(|e| e["check_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["heat_kernel.mass", "heat_kernel.nonnegative"]);
    for e in entries {
        for key in ["frozen_value", "tolerance", "provenance"] {
            assert!(e.get(key).is_some(), "missing {key}");
        }
    }

    let o = bin()
        .arg("freeze")
        .arg(example("heat-kernel.toml"))
        .args(["--checks", "no.such.check", "--out-dir"])
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn environment_overrides_seed_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        let o = bin()
            .arg("run")
            .arg(example("counterexample.toml"))
            .arg("--out-dir")
            .arg(&out)
            .env("CONDLAB_SEED", seed)
            .env("CONDLAB_WORKERS", "2")
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        let r = json(&out.join("report.json"));
        assert_eq!(r["rng"]["base_seed"], seed.parse::<u64>().unwrap());
        assert_eq!(r["workers"], 2);
        std::fs::read_to_string(out.join("counterexample.csv")).unwrap()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
