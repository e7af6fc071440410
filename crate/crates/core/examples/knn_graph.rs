//! All-points k-NN graph with each search variant, checked against brute force.

use std::time::Instant;

use zdtree::oracle::oracle_graph;
use zdtree::{datagen::Distribution, Quantizer, Variant, ZdTree};

fn main() -> zdtree::Result<()> {
    let n = 20_000;
    let k = 8;
    let cloud = Distribution::Plummer.generate(n, 5);
    let q = Quantizer::unit_cube(cloud.dim, 5)?;
    let pts = cloud.quantize(&q)?;
    let tree = ZdTree::build(pts.clone(), q, 16)?;

    let expected = oracle_graph(&pts, k);
    for v in Variant::ALL {
        let t = Instant::now();
        let (graph, stats) = tree.knn_graph_with_stats(k, v)?;
        let secs = t.elapsed().as_secs_f64();
        let same = graph == expected;
        println!(
            "{v:>4}: {secs:.3}s  visits mean {:.1} max {}  matches brute force: {same}",
            stats.mean, stats.max
        );
    }
    Ok(())
}
