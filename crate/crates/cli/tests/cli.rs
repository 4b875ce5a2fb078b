use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polyvem::mesh::read_mesh;
use polyvem::PolyMesh64;

fn polyvem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyvem")).args(args).output().expect("spawn polyvem")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse::<f64>().unwrap()))
        .unwrap_or_else(|| panic!("no '{key}' in output:\n{out}"))
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut full = vec!["mesh", "gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", &path]);
    let o = polyvem(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn quad_mesh_has_n_squared_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "m.poly", &["--type", "quad", "--n", "8"]);
    let mesh: PolyMesh64 = read_mesh(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(mesh.n_cells(), 64);
}

#[test]
fn voronoi_generation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--type", "voro", "--seeds", "256", "--lloyd", "50", "--rng", "42"];
    let a = gen(dir.path(), "a.poly", &args);
    let b = gen(dir.path(), "b.poly", &args);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.poly").to_string_lossy().into_owned();
    assert_eq!(polyvem(&["mesh", "gen", "--type", "quad", "--n", "0", "-o", &out]).status.code(), Some(1));
    assert_eq!(polyvem(&["mesh", "gen", "--type", "hex", "--n", "4", "-o", &out]).status.code(), Some(1));
    assert_eq!(polyvem(&["frobnicate"]).status.code(), Some(1));
    let mesh = gen(dir.path(), "q.poly", &["--type", "quad", "--n", "2"]);
    let o = polyvem(&["solve", "--mesh", &mesh, "--form", "badname"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("badname"));
    assert_eq!(polyvem(&["solve", "--mesh", &mesh, "--supg", "maybe"]).status.code(), Some(1));
    assert_eq!(polyvem(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.poly").to_string_lossy().into_owned();
    assert_eq!(polyvem(&["solve", "--mesh", &missing]).status.code(), Some(2));
    let bad = dir.path().join("bad.poly");
    fs::write(&bad, "not a mesh\n").unwrap();
    assert_eq!(polyvem(&["solve", "--mesh", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn patch_test_solve_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = gen(dir.path(), "v.poly", &["--type", "voro", "--seeds", "32", "--lloyd", "10"]);
    for k in ["1", "2", "3"] {
        let o = polyvem(&["solve", "--mesh", &mesh, "--k", k, "--eps", "1", "--case", "patch", "--form", "orig"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(value(&stdout(&o), "eH1") <= 1e-8, "{}", stdout(&o));
    }
}

#[test]
fn convection_dominated_solve_reports_finite_errors_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = gen(dir.path(), "q.poly", &["--type", "quad", "--n", "16"]);
    let dump = dir.path().join("u.txt").to_string_lossy().into_owned();
    let o = polyvem(&[
        "solve", "--mesh", &mesh, "--k", "2", "--eps", "1e-6", "--form", "bounSkew", "--supg", "on", "--dump", &dump,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let ndofs = value(&out, "ndofs") as usize;
    assert!(value(&out, "eH1").is_finite() && value(&out, "eC").is_finite());
    assert!(value(&out, "residual") <= 1e-12);
    let dumped: Vec<f64> = fs::read_to_string(dump).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(dumped.len(), ndofs);
}

fn error_columns(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.split(',').take(5).collect::<Vec<_>>().join(",")).collect()
}

#[test]
fn conv_writes_one_csv_per_study_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(&cfg, "# small study\nfamily = quad, rand\nlevels = 4, 8\nk = 1\neps = 1e-3\nform = bounSkew, orig\nsvg = on\n")
        .unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let o = polyvem(&["conv", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(), "rng=7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().filter(|l| l.contains("rate eH1")).count(), 4);
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 4);
    assert_eq!(names.iter().filter(|n| n.ends_with(".svg")).count(), 4);
    for n in names.iter().filter(|n| n.ends_with(".csv")) {
        let ca = fs::read_to_string(a.join(n)).unwrap();
        let cb = fs::read_to_string(b.join(n)).unwrap();
        assert!(ca.starts_with("level,h,ndofs,eH1,eC,assemble_ms,solve_ms\n"));
        assert_eq!(ca.lines().count(), 3);
        assert_eq!(error_columns(&ca), error_columns(&cb));
    }
}

#[test]
fn conv_flags_override_file_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(&cfg, "levels = 4, 8\neps = 1e-3\n").unwrap();
    let o = polyvem(&["conv", cfg.to_str().unwrap(), "--supg", "off", "--eps", "1e-6", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("quad_k1_eps1e-6_bounSkew_none.csv").exists());
}

#[test]
fn conv_rejects_empty_and_invalid_configs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.cfg");
    fs::write(&empty, "# nothing\n\n").unwrap();
    assert_eq!(polyvem(&["conv", empty.to_str().unwrap()]).status.code(), Some(1));
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(polyvem(&["conv", bad.to_str().unwrap()]).status.code(), Some(1));
    fs::write(&bad, "k = 1\n").unwrap();
    assert_eq!(polyvem(&["conv", bad.to_str().unwrap(), "k=zero"]).status.code(), Some(1));
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = gen(dir.path(), "q.poly", &["--type", "quad", "--n", "4"]);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_polyvem"))
            .args(["solve", "--mesh", &mesh])
            .env("POLYVEM_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(stdout(&one), stdout(&run("3")));
    assert_eq!(run("lots").status.code(), Some(1));
}
