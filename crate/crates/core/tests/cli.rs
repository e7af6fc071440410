use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use zdtree::io::{parse_neighbor_rows, read_point_file};
use zdtree::oracle::oracle_graph;
use zdtree::Quantizer;

fn zdtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zdtree"))
        .args(args)
        .output()
        .expect("run zdtree")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generate(dir: &Path, name: &str, dist: &str, n: usize, seed: u64) -> String {
    let p = dir.join(name).to_string_lossy().into_owned();
    let o = zdtree(&["generate", "--dist", dist, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &p]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn generate_writes_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "a.pts", "3d-sphere", 300, 4);
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pointcloud 3 300"));
    assert_eq!(lines.clone().count(), 300);
    assert!(lines.all(|l| l.split(' ').count() == 3));
}

#[test]
fn generate_is_deterministic_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let a = zdtree(&["generate", "--dist", "2d-kuzmin", "--n", "50000", "--seed", "8", "--workers", "1"]);
    let b = zdtree(&["generate", "--dist", "2d-kuzmin", "--n", "50000", "--seed", "8", "--workers", "3"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let p = generate(dir.path(), "c.pts", "2d-kuzmin", 50_000, 8);
    assert_eq!(std::fs::read(p).unwrap(), a.stdout);
}

#[test]
fn empty_input_gives_empty_graph() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "e.pts", "3d-cube", 0, 1);
    let o = zdtree(&["knn-graph", &p, "--k", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(parse_neighbor_rows(&out).unwrap().is_empty());
    assert!(out.contains("# n=0 k=3"));
}

#[test]
fn two_points_are_each_others_neighbor() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("two.pts");
    std::fs::write(&p, "pointcloud 2 2\n0.25 0.25\n0.75 0.5\n").unwrap();
    let o = zdtree(&["knn-graph", p.to_str().unwrap(), "--k", "5"]);
    assert!(o.status.success());
    let rows = parse_neighbor_rows(&stdout(&o)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].0, rows[0].1), (0, 1));
    assert_eq!((rows[1].0, rows[1].1), (1, 0));
    assert_eq!(rows[0].2, rows[1].2);
}

#[test]
fn knn_graph_matches_brute_force() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "g.pts", "3d-plummer", 3_000, 2);
    let cloud = read_point_file(Path::new(&p)).unwrap();
    let q = Quantizer::unit_cube(3, 0).unwrap();
    let expected = oracle_graph(&cloud.quantize(&q).unwrap(), 4);
    let want: Vec<_> = expected
        .iter()
        .flat_map(|r| r.neighbors.iter().map(move |n| (r.query, n.id, n.sqdist)))
        .collect();
    for variant in ["root", "leaf", "bit"] {
        let o = zdtree(&["knn-graph", &p, "--k", "4", "--variant", variant, "--workers", "2"]);
        assert!(o.status.success());
        assert_eq!(parse_neighbor_rows(&stdout(&o)).unwrap(), want, "{variant}");
    }
}

#[test]
fn knn_graph_writes_to_file() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "f.pts", "2d-cube", 500, 3);
    let out = dir.path().join("g.csv");
    let o = zdtree(&["knn-graph", &p, "--k", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(parse_neighbor_rows(&text).unwrap().len(), 1_000);
    let summary = text.lines().last().unwrap();
    for field in ["build_s=", "query_s=", "visits_mean=", "visits_max=", "workers="] {
        assert!(summary.contains(field), "{summary}");
    }
}

#[test]
fn query_variants_and_presort_agree() {
    let dir = TempDir::new().unwrap();
    let base = generate(dir.path(), "b.pts", "3d-cube", 4_000, 5);
    let qs = generate(dir.path(), "q.pts", "3d-cube", 300, 6);
    let rows = |extra: &[&str]| {
        let mut args = vec!["query", base.as_str(), qs.as_str(), "--k", "6"];
        args.extend_from_slice(extra);
        let o = zdtree(&args);
        assert!(o.status.success());
        parse_neighbor_rows(&stdout(&o)).unwrap()
    };
    let reference = rows(&["--variant", "root"]);
    assert_eq!(reference.len(), 1_800);
    assert_eq!(rows(&["--variant", "bit"]), reference);
    assert_eq!(rows(&["--variant", "bit", "--presort"]), reference);
    assert_eq!(rows(&["--variant", "leaf", "--presort"]), reference);
}

#[test]
fn queries_off_the_grid_are_skipped() {
    let dir = TempDir::new().unwrap();
    let base = generate(dir.path(), "b.pts", "2d-cube", 100, 1);
    let qs = dir.path().join("q.pts");
    std::fs::write(&qs, "pointcloud 2 3\n0.5 0.5\n1.5 0.5\n0.1 0.9\n").unwrap();
    let o = zdtree(&["query", &base, qs.to_str().unwrap(), "--k", "1"]);
    assert!(o.status.success());
    let rows = parse_neighbor_rows(&stdout(&o)).unwrap();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 2]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("query 1"));
    assert!(stdout(&o).contains("skipped=1"));
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(zdtree(&[]).status.code(), Some(2));
    assert_eq!(zdtree(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(zdtree(&["generate", "--dist", "4d-cube", "--n", "5"]).status.code(), Some(2));
    assert_eq!(zdtree(&["knn-graph", "/nonexistent.pts"]).status.code(), Some(2));
    assert_eq!(zdtree(&["generate", "--dist", "2d-cube", "--n", "5", "--workers", "0"]).status.code(), Some(2));

    let bad = dir.path().join("bad.pts");
    std::fs::write(&bad, "pointcloud 2 2\n0.1 0.2\n0.3 oops\n").unwrap();
    let o = zdtree(&["knn-graph", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3"));

    let p = generate(dir.path(), "ok.pts", "2d-cube", 10, 1);
    assert_eq!(zdtree(&["knn-graph", &p, "--k", "0"]).status.code(), Some(2));
    let q3 = generate(dir.path(), "q3.pts", "3d-cube", 10, 1);
    assert_eq!(zdtree(&["query", &p, &q3]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(zdtree(&["--help"]).status.code(), Some(0));
    assert_eq!(zdtree(&["--version"]).status.code(), Some(0));
}

#[test]
fn verify_passes_and_catches_the_planted_fault() {
    let o = zdtree(&["verify", "--n", "400", "--fuzz-rounds", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verify: PASS"));

    let o = zdtree(&["verify", "--n", "400", "--fuzz-rounds", "5", "--inject-fault", "unsorted-build"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL oracle-equivalence"), "{out}");
    assert!(out.contains("verify: FAIL"));
}

#[test]
fn update_bench_prints_one_row_per_size() {
    let o = zdtree(&["update-bench", "--n-base", "20000", "--batch-sizes", "1,100,10000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("batch_size,insert_s_per_pt,delete_s_per_pt"));
    let sizes: Vec<usize> = lines
        .clone()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(sizes, vec![1, 100, 10_000]);
    assert!(out.contains("nonincreasing_from_1000="));
}

#[test]
fn scale_bench_rows() {
    let o = zdtree(&["scale-bench", "--axis", "n", "--values", "1000,4000", "--k", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("n,4000,"));
}
