use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdfreg_core::{load_obj, save_obj, shapes, OptimizerConfig, TriMesh, Vec3};

fn sdfreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdfreg"))
        .args(args)
        .output()
        .expect("failed to launch sdfreg")
}

fn write_mesh(dir: &Path, name: &str, mesh: &TriMesh<f64>) -> PathBuf {
    let path = dir.join(name);
    save_obj(mesh, &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Value shown as `[default: X]` in the help block of `flag`.
fn help_default(help: &str, flag: &str) -> String {
    let start = help.find(&format!("--{flag} ")).or_else(|| help.find(&format!("--{flag}\n")));
    let block = &help[start.unwrap_or_else(|| panic!("flag --{flag} missing from help"))..];
    let end = block[2..].find("\n  -").map_or(block.len(), |i| i + 2);
    let block = &block[..end];
    let at = block.find("[default: ").unwrap_or_else(|| panic!("no default shown for --{flag}"));
    let rest = &block[at + "[default: ".len()..];
    rest[..rest.find(']').unwrap()].to_string()
}

#[test]
fn help_defaults_match_library_defaults() {
    let out = sdfreg(&["--help"]);
    assert!(out.status.success());
    let help = String::from_utf8(out.stdout).unwrap();
    let cfg = OptimizerConfig::<f64>::default();
    let num = |flag: &str| help_default(&help, flag).parse::<f64>().unwrap();

    assert_eq!(help_default(&help, "grid"), "32,32,32");
    assert_eq!(cfg.quadrature.resolution, [32, 32, 32]);
    assert_eq!(num("pad"), 0.05);
    assert_eq!(num("pad"), cfg.quadrature.pad_fraction);
    assert_eq!(num("modes"), 30.0);
    assert_eq!(num("modes"), cfg.max_modes as f64);
    assert_eq!(num("stall-start"), 0.1);
    assert_eq!(num("stall-start"), cfg.stall_start);
    assert_eq!(num("stall-end"), 1e-3);
    assert_eq!(num("stall-end"), cfg.stall_end);
    assert_eq!(num("reg-lambda"), 0.0);
    assert_eq!(num("reg-lambda"), cfg.reg_lambda);
    assert_eq!(help_default(&help, "sign"), "pseudonormal");
    assert_eq!(help_default(&help, "sign"), cfg.quadrature.target_sign.to_string());
    assert_eq!(num("snapshot-every"), 0.0);
    assert_eq!(num("threads"), 0.0);
    for flag in ["source", "target", "output", "normalize", "trace", "selftest"] {
        assert!(help.contains(&format!("--{flag}")), "--{flag} missing from help");
    }
    assert!(!help.contains("corrupt"));
}

#[test]
fn missing_target_exits_1_and_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let src = write_mesh(dir.path(), "src.obj", &shapes::icosphere(1, 1.0));
    let out = sdfreg(&["--source", s(&src), "--output", s(&dir.path().join("out.obj"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--target"));
}

#[test]
fn unreadable_input_and_bad_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let src = write_mesh(dir.path(), "src.obj", &shapes::icosphere(1, 1.0));
    let out_path = dir.path().join("out.obj");
    let missing = dir.path().join("nope.obj");
    let out = sdfreg(&["--source", s(&src), "--target", s(&missing), "--output", s(&out_path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.obj"));

    let out = sdfreg(&["--source", s(&src), "--target", s(&src), "--output", s(&out_path), "--grid", "8,8"]);
    assert_eq!(out.status.code(), Some(1));
    let out = sdfreg(&["--source", s(&src), "--target", s(&src), "--output", s(&out_path), "--sign", "parity"]);
    assert_eq!(out.status.code(), Some(1));
    let out = sdfreg(&[
        "--source", s(&src), "--target", s(&src), "--output", s(&out_path), "--stall-start", "1e-3", "--stall-end", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_path.exists());
}

#[test]
fn degenerate_source_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let flat = TriMesh::new(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let src = write_mesh(dir.path(), "flat.obj", &flat);
    let tgt = write_mesh(dir.path(), "tgt.obj", &shapes::icosphere(1, 1.0));
    let out = sdfreg(&[
        "--source", s(&src), "--target", s(&tgt), "--output", s(&dir.path().join("out.obj")), "--modes", "1", "--grid", "6,6,6",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn identical_source_and_target_returns_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::icosphere::<f64>(1, 1.0);
    let src = write_mesh(dir.path(), "sphere.obj", &mesh);
    let out_path = dir.path().join("out.obj");
    let out = sdfreg(&[
        "--source", s(&src), "--target", s(&src), "--output", s(&out_path), "--modes", "4", "--grid", "12,12,12",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result = load_obj::<f64>(&out_path).unwrap();
    let diag = mesh.bounding_box().diagonal();
    assert_eq!(result.triangles(), mesh.triangles());
    for (a, b) in result.vertices().iter().zip(mesh.vertices()) {
        assert!((*a - *b).norm() <= 1e-6 * diag);
    }
}

#[test]
fn normalize_returns_world_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::icosphere::<f64>(1, 5.0).map_vertices(|p| p + Vec3::new(10.0, 0.0, 0.0));
    let src = write_mesh(dir.path(), "sphere.obj", &mesh);
    let out_path = dir.path().join("out.obj");
    let out = sdfreg(&[
        "--source", s(&src), "--target", s(&src), "--output", s(&out_path), "--modes", "2", "--grid", "10,10,10", "--normalize",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result = load_obj::<f64>(&out_path).unwrap();
    let diag = mesh.bounding_box().diagonal();
    for (a, b) in result.vertices().iter().zip(mesh.vertices()) {
        assert!((*a - *b).norm() <= 1e-6 * diag);
    }
}

#[test]
fn snapshots_are_written_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let sphere = shapes::icosphere::<f64>(1, 1.0);
    let moved = sphere.map_vertices(|p| Vec3::new(1.3 * p.x, p.y, 0.8 * p.z) + Vec3::new(0.2, 0.1, 0.0));
    let src = write_mesh(dir.path(), "src.obj", &sphere);
    let tgt = write_mesh(dir.path(), "tgt.obj", &moved);
    let snaps = dir.path().join("snaps");
    let trace = dir.path().join("trace.csv");
    // Thresholds far below reach keep the single stage running to its 500 iteration cap.
    let out = sdfreg(&[
        "--source", s(&src), "--target", s(&tgt), "--output", s(&dir.path().join("out.obj")),
        "--modes", "1", "--grid", "8,8,8", "--stall-start", "1e-14", "--stall-end", "1e-14",
        "--snapshot-every", "100", "--snapshot-dir", s(&snaps), "--trace", s(&trace),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&snaps)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let listed = names.clone();
    names.sort();
    let csv = std::fs::read_to_string(&trace).unwrap();
    let last = csv.lines().last().unwrap();
    let iterations: usize = last.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(names.len(), iterations / 100, "{listed:?} after {iterations} iterations");
    if iterations >= 500 {
        assert!(names.len() >= 5);
    }
    for (k, name) in names.iter().enumerate() {
        assert_eq!(name, &format!("snapshot_s001_i{:06}.obj", 100 * (k + 1)));
        assert_eq!(load_obj::<f64>(snaps.join(name)).unwrap().vertex_count(), sphere.vertex_count());
    }
}

#[test]
fn reruns_produce_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let bar = shapes::bar::<f64>(4.0, 0.5, 12, 2);
    let bent = shapes::bend(&bar, 4.0, 40f64.to_radians());
    let src = write_mesh(dir.path(), "bar.obj", &bar);
    let tgt = write_mesh(dir.path(), "bent.obj", &bent);
    let mut traces = Vec::new();
    let mut meshes = Vec::new();
    for k in 0..2 {
        let trace = dir.path().join(format!("trace{k}.csv"));
        let output = dir.path().join(format!("out{k}.obj"));
        let out = sdfreg(&[
            "--source", s(&src), "--target", s(&tgt), "--output", s(&output), "--modes", "4",
            "--grid", "24,10,8", "--trace", s(&trace),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        traces.push(std::fs::read(&trace).unwrap());
        meshes.push(std::fs::read(&output).unwrap());
    }
    assert!(traces[0].len() > 100);
    assert_eq!(traces[0], traces[1]);
    assert_eq!(meshes[0], meshes[1]);
}

#[test]
fn config_file_is_applied_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let sphere = shapes::icosphere::<f64>(1, 1.0);
    let src = write_mesh(dir.path(), "src.obj", &sphere);
    let tgt = write_mesh(dir.path(), "tgt.obj", &sphere.map_vertices(|p| p * 1.1));
    let cfg = dir.path().join("run.cfg");
    let trace = dir.path().join("trace.csv");
    std::fs::write(
        &cfg,
        format!(
            "source = {}\ntarget = {}\noutput = {}\ntrace = {}\nmodes = 5\ngrid = 10,10,10\n",
            s(&src),
            s(&tgt),
            s(&dir.path().join("out.obj")),
            s(&trace)
        ),
    )
    .unwrap();
    let out = sdfreg(&["--config", s(&cfg), "--modes", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&trace).unwrap();
    let max_stage = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse::<usize>().unwrap())
        .max()
        .unwrap();
    assert_eq!(max_stage, 2);
}

#[test]
fn dumps_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let sphere = shapes::icosphere::<f64>(1, 1.0);
    let src = write_mesh(dir.path(), "src.obj", &sphere);
    let sdf = dir.path().join("target.raw");
    let modes = dir.path().join("modes.csv");
    let out = sdfreg(&[
        "--source", s(&src), "--target", s(&src), "--output", s(&dir.path().join("out.obj")), "--modes", "3",
        "--grid", "4,5,6", "--dump-sdf", s(&sdf), "--dump-modes", s(&modes),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::metadata(&sdf).unwrap().len(), 4 * 5 * 6 * 8);
    let rows = std::fs::read_to_string(&modes).unwrap().lines().count();
    assert_eq!(rows, 1 + 3 * sphere.vertex_count());
}

#[test]
fn selftest_passes_and_negative_control_fails() {
    let out = sdfreg(&["--selftest"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{table}");
    assert!(!table.contains("FAIL"));

    let out = sdfreg(&["--selftest", "--selftest-corrupt-gradient"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert_ne!(out.status.code(), Some(0), "{table}");
    assert!(table.contains("FAIL"));
}
