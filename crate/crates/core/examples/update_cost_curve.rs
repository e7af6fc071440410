//! Per-point insert and delete cost as the batch grows.
//!
//! cargo run --release --example update_cost_curve [n_base]

use zdtree::bench::{nonincreasing_from, update_cost_probe};

fn main() -> zdtree::Result<()> {
    let n_base = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let sizes = [1, 10, 100, 1_000, 10_000, 100_000];
    let rows = update_cost_probe(n_base, 2, &sizes, 1, 16)?;
    println!("{:>8} {:>12} {:>12}", "batch", "insert ns", "delete ns");
    for r in &rows {
        println!("{:>8} {:>12.1} {:>12.1}", r.batch_size, r.insert_s_per_pt * 1e9, r.delete_s_per_pt * 1e9);
    }
    let curve: Vec<_> = rows.iter().map(|r| (r.batch_size, r.insert_s_per_pt)).collect();
    println!("ratio 1 : 10^5 = {:.1}", rows[0].insert_s_per_pt / rows[5].insert_s_per_pt);
    println!("nonincreasing from 10^3: {}", nonincreasing_from(&curve, 1_000, 0.2));
    Ok(())
}
