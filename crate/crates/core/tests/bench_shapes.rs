//! Shapes of the scaling curves, at sizes that run in seconds.

use zdtree::bench::{scale_bench, ScaleAxis, ScaleConfig};
use zdtree::datagen::Distribution;
use zdtree::Variant;

fn cfg() -> ScaleConfig {
    ScaleConfig {
        distribution: Distribution::Cube3,
        n: 100_000,
        k: 1,
        variant: Variant::Leaf,
        leaf_cutoff: 16,
        seed: 1,
    }
}

#[test]
fn per_point_time_is_nearly_flat_in_n() {
    let rows = scale_bench(ScaleAxis::N, &[100_000, 1_000_000], &cfg()).unwrap();
    let growth = rows[1].metric / rows[0].metric;
    println!("per-point seconds {:.3e} -> {:.3e}, growth {growth:.2}", rows[0].metric, rows[1].metric);
    assert!(growth <= 3.0);
}

#[test]
fn per_neighbor_time_stays_bounded_in_k() {
    let rows = scale_bench(ScaleAxis::K, &[1, 100], &cfg()).unwrap();
    let growth = rows[1].metric / rows[0].metric;
    println!("per-neighbor seconds {:.3e} -> {:.3e}, growth {growth:.2}", rows[0].metric, rows[1].metric);
    assert!(growth <= 3.0);
}

#[test]
fn one_worker_threads_row_is_plain_time() {
    let c = ScaleConfig { n: 20_000, ..cfg() };
    let rows = scale_bench(ScaleAxis::Threads, &[1], &c).unwrap();
    assert_eq!(rows[0].metric, rows[0].total_s);
}
