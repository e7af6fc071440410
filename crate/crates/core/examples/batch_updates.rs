//! Insert and delete batches; the tree always matches a fresh build.

use zdtree::{datagen, Quantizer, ZdTree};

fn main() -> zdtree::Result<()> {
    let cloud = datagen::gen_uniform_cube(60_000, 2, 9)?;
    let q = Quantizer::unit_cube(2, 9)?;
    let pts = cloud.quantize(&q)?;
    let (base, extra) = pts.split_at(40_000);

    let mut tree = ZdTree::build(base.to_vec(), q.clone(), 16)?;
    let s = tree.batch_insert(extra.to_vec())?;
    println!("inserted {} -> {} points", s.applied, tree.len());
    let fresh = ZdTree::build(pts.clone(), q.clone(), 16)?;
    println!("same leaves as a fresh build: {}", tree.leaf_contents() == fresh.leaf_contents());

    // Deleting asks for (position, id); a moved point is not found.
    let mut gone = extra[..5_000].to_vec();
    let mut stray = base[0];
    stray.id = 999_999;
    gone.push(stray);
    let s = tree.batch_delete(gone)?;
    println!("deleted {}, not found {:?}", s.applied, s.not_found);

    match tree.batch_insert(vec![base[1]]) {
        Err(e) => println!("re-inserting a stored id: {e}"),
        Ok(_) => unreachable!(),
    }
    tree.validate().expect("valid tree");
    Ok(())
}
