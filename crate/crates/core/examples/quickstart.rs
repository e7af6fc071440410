//! Build a tree over random points and ask for the nearest neighbors of one.

use zdtree::{datagen, Query, Quantizer, ZdTree, DEFAULT_LEAF_CUTOFF};

fn main() -> zdtree::Result<()> {
    let cloud = datagen::gen_uniform_cube(10_000, 3, 1)?;
    let q = Quantizer::unit_cube(3, 1)?;
    let tree = ZdTree::from_raw(&cloud.points, q.clone(), DEFAULT_LEAF_CUTOFF)?;
    println!("{} points, {} nodes, depth {}", tree.len(), tree.node_count(), tree.depth());

    let probe = q.quantize(&zdtree::RawPoint::new(0, &[0.5, 0.5, 0.5])?)?;
    let res = tree.knn_bit(&Query::external(&probe), 4)?;
    for n in &res.neighbors {
        let c = &cloud.points[n.id as usize].coords;
        println!("id {:>5}  sqdist {:>20}  at ({:.4}, {:.4}, {:.4})", n.id, n.sqdist, c[0], c[1], c[2]);
    }
    Ok(())
}
