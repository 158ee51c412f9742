use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != "manifest.toml")
        .collect();
    v.sort();
    v
}

#[test]
fn cone_census_succeeds_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "experiment = \"cone-census\"\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = qlab(&["cone-census", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = qlab(&["cone-census", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let files = data_files(&a);
    assert_eq!(files, data_files(&b));
    for f in &files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(a.join("manifest.toml").exists());
}

#[test]
fn quarter_frequency_reruns_identically_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "q.toml",
        "experiment = \"quarter-frequency\"\n[mesh]\nh = 0.03125\n[solver]\nschedule = \"red-black\"\nparallel = true\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(qlab(&["quarter-frequency", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]).status.code(), Some(0));
    assert_eq!(qlab(&["quarter-frequency", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"]).status.code(), Some(0));
    for f in data_files(&a) {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn out_may_come_from_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from_config");
    let cfg = write_config(tmp.path(), "e.toml", &format!("out = {:?}\n[excess_decay]\nlevels = 2\nresolution = 0.125\n", out));
    assert_eq!(qlab(&["excess-decay", "--config", &cfg]).status.code(), Some(0));
    assert!(out.join("excess.csv").exists());
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("o");
    let o = o.to_str().unwrap();
    assert_eq!(qlab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(qlab(&["cone-census"]).status.code(), Some(2));
    assert_eq!(qlab(&["cone-census", "--config", "/nonexistent.toml", "--out", o]).status.code(), Some(2));
    let bad = write_config(tmp.path(), "bad.toml", "[mesh]\nh = 0.0\n");
    assert_eq!(qlab(&["quarter-frequency", "--config", &bad, "--out", o]).status.code(), Some(2));
    let other = write_config(tmp.path(), "other.toml", "experiment = \"excess-decay\"\n");
    assert_eq!(qlab(&["cone-census", "--config", &other, "--out", o]).status.code(), Some(2));
    let no_out = write_config(tmp.path(), "no_out.toml", "");
    assert_eq!(qlab(&["cone-census", "--config", &no_out]).status.code(), Some(2));
    assert_eq!(qlab(&["cone-census", "--config", &no_out, "--out", o, "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn invariant_violation_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // An explicit threshold above every separation leaves the boundary unseparated.
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "experiment = \"cylinder-singularity\"\n[mesh]\nh = 0.125\n[cylinder_singularity]\ns_min = 100.0\n",
    );
    let out = qlab(&["cylinder-singularity", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap(), "--oracle-mode"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn non_convergence_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "q.toml",
        "experiment = \"quarter-frequency\"\n[mesh]\nh = 0.0625\n[solver]\nmax_sweeps = 3\ntol = 1e-14\n",
    );
    let dir = tmp.path().join("o");
    let out = qlab(&["quarter-frequency", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let manifest = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("exit_code = 4"));
}
