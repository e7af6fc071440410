//! Interleave update batches with queries on the same tree.

use zdtree::oracle::oracle_knn;
use zdtree::{datagen, QuantizedPoint, Quantizer, Variant, ZdTree};

fn main() -> zdtree::Result<()> {
    let cloud = datagen::gen_uniform_cube(50_000, 3, 3)?;
    let q = Quantizer::unit_cube(3, 3)?;
    let pts = cloud.quantize(&q)?;
    let probes: Vec<QuantizedPoint> = datagen::gen_uniform_cube(200, 3, 4)?.quantize(&q)?;

    let mut tree = ZdTree::build(pts[..10_000].to_vec(), q, 16)?;
    for (round, chunk) in pts[10_000..].chunks(10_000).enumerate() {
        tree.batch_insert(chunk.to_vec())?;
        // Retire the oldest points as new ones arrive.
        let old = pts[round * 5_000..(round + 1) * 5_000].to_vec();
        tree.batch_delete(old)?;

        let got = tree.query_batch(&probes, 3, Variant::Bit, true)?;
        let stored: Vec<QuantizedPoint> = tree.points().copied().collect();
        let ok = probes
            .iter()
            .zip(&got)
            .all(|(p, r)| *r == oracle_knn(&stored, p, 3, None));
        println!("round {round}: {} points, {} nodes, answers exact: {ok}", tree.len(), tree.node_count());
    }
    Ok(())
}
