//! End-to-end checks of the `pathsim` binary: exit codes, file formats and
//! report stability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pathsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pathsim"))
}

fn run(args: &[&str]) -> Output {
    pathsim().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn generate(dir: &Path, scale: u32, seed: u64) -> PathBuf {
    let path = dir.join(format!("s{scale}-{seed}.edges"));
    let out = run(&[
        "generate",
        "--scale",
        &scale.to_string(),
        "--edgefactor",
        "8",
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), 8, 7);
    let b_path = dir.path().join("again.edges");
    let out = run(&[
        "generate",
        "--scale",
        "8",
        "--edgefactor",
        "8",
        "--seed",
        "7",
        "--out",
        b_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b_path).unwrap());
}

#[test]
fn generate_requires_out() {
    let out = run(&["generate", "--scale", "6"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_reports_raw_tuple_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g10.edges");
    let out = run(&[
        "generate",
        "--scale",
        "10",
        "--edgefactor",
        "16",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("raw tuples = 16384"));
}

#[test]
fn build_prints_structure() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 7, 3);
    let out = run(&["build", "--graph", g.to_str().unwrap(), "--set", "nodes=4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("vertices = 128"));
    assert!(text.contains("directed edges ="));
}

#[test]
fn bfs_and_cc_dump_binary_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 7, 3);
    let prefix = dir.path().join("bfs0");
    let out = run(&[
        "bfs",
        "--graph",
        g.to_str().unwrap(),
        "--source",
        "0",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let levels = std::fs::read(dir.path().join("bfs0.levels.bin")).unwrap();
    let parents = std::fs::read(dir.path().join("bfs0.parents.bin")).unwrap();
    assert_eq!(levels.len(), 128 * 8);
    assert_eq!(parents.len(), 128 * 8);
    // Source level is zero.
    assert_eq!(u64::from_le_bytes(levels[..8].try_into().unwrap()), 0);

    let prefix = dir.path().join("cc0");
    let out = run(&[
        "cc",
        "--graph",
        g.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("converged = true"));
    let labels = std::fs::read(dir.path().join("cc0.labels.bin")).unwrap();
    assert_eq!(labels.len(), 128 * 8);
}

#[test]
fn bench_rejects_zero_queries() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 6, 1);
    let out = run(&["bench", "--graph", g.to_str().unwrap(), "--queries", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_mode_both_emits_improvement_column() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 7, 2);
    let out = run(&[
        "bench",
        "--graph",
        g.to_str().unwrap(),
        "--queries",
        "4",
        "--mode",
        "both",
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("improvement_pct"));
    assert!(text.lines().any(|l| l.starts_with("seq,4,")));
    assert!(text.lines().any(|l| l.starts_with("conc,4,")));
}

#[test]
fn bench_csv_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 8, 11);
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for (csv, json) in [(&csv_a, "a.json"), (&csv_b, "b.json")] {
        let json = dir.path().join(json);
        let out = run(&[
            "bench",
            "--graph",
            g.to_str().unwrap(),
            "--queries",
            "6",
            "--mode",
            "both",
            "--mix-bfs",
            "0.5",
            "--seed",
            "9",
            "--csv",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        std::fs::read(&csv_a).unwrap(),
        std::fs::read(&csv_b).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap()
    );
}

#[test]
fn bench_golden_csv() {
    // Golden-file check on a fixed tiny experiment. A change in these
    // bytes means the cost model, generator, scheduler or report format
    // moved and the change is intentional.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g6.edges");
    let out = run(&[
        "generate",
        "--scale",
        "6",
        "--edgefactor",
        "4",
        "--seed",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(edge_meta(&path)).unwrap(),
        "nvertices = 64\nnedges = 150\nscale = 6\nedgefactor = 4\n\
         a = 0.57\nb = 0.19\nc = 0.19\nd = 0.05\nseed = 4\n"
    );

    let out = run(&[
        "bench",
        "--graph",
        path.to_str().unwrap(),
        "--queries",
        "3",
        "--mode",
        "both",
        "--mix-bfs",
        "0.67",
        "--seed",
        "21",
        "--set",
        "nodes=2",
    ]);
    assert!(out.status.success());
    let golden = "\
# seed = 21
mode,njobs,kind_mix,makespan_s,improvement_pct,q0,q25,q50,q75,q100,migrations,remote_ops
seq,3,bfs:2;cc:1,0.000006,,0.000001,0.000001,0.000001,0.000002,0.000004,56,1557
conc,3,bfs:2;cc:1,0.000005,22.857,0.000003,0.000003,0.000004,0.000004,0.000005,56,1557
";
    assert_eq!(stdout(&out), golden);
}

fn edge_meta(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

#[test]
fn context_exhaustion_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 8, 2);
    let out = run(&[
        "bench",
        "--graph",
        g.to_str().unwrap(),
        "--queries",
        "16",
        "--mode",
        "conc",
        "--set",
        "nodes=2",
        "--job-contexts",
        "1536",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("context exhaustion"), "{err}");
    assert!(err.contains("job set of 16"), "{err}");
}

#[test]
fn verify_passes_on_generated_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 8, 5);
    let started = std::time::Instant::now();
    let out = run(&["verify", "--graph", g.to_str().unwrap(), "--sources", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("verify: PASS"));
    // The scale-8 suite has a generous wall-clock budget.
    assert!(started.elapsed().as_secs() < 10);
}

#[test]
fn machine_env_fallback_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), 6, 6);
    let machine = dir.path().join("machine.cfg");
    std::fs::write(&machine, "nodes = 2\ncost_migration = 10\n").unwrap();

    let out = pathsim()
        .args(["build", "--graph", g.to_str().unwrap()])
        .env("PATHSIM_MACHINE", &machine)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("nodes = 2"));

    // Flags win over the file.
    let out = pathsim()
        .args([
            "build",
            "--graph",
            g.to_str().unwrap(),
            "--set",
            "nodes=4",
        ])
        .env("PATHSIM_MACHINE", &machine)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("nodes = 4"));
}

#[test]
fn missing_graph_file_fails_cleanly() {
    let out = run(&["bfs", "--graph", "/nonexistent/g.edges", "--source", "0"]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
}
