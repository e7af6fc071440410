//! Sample every generator and print a few summary numbers.

use zdtree::datagen::Distribution;

fn main() {
    let n = 100_000;
    for d in Distribution::ALL {
        let c = d.generate(n, 42);
        let mut mean = [0.0; 3];
        let mut near_center = 0;
        for p in &c.points {
            let mut r2 = 0.0;
            for a in 0..c.dim {
                mean[a] += p.coords[a] / n as f64;
                r2 += (p.coords[a] - 0.5).powi(2);
            }
            if r2 < 0.01 {
                near_center += 1;
            }
        }
        println!(
            "{:<11} d={} mean={:.3?} within 0.1 of center: {:.1}%",
            d.name(),
            c.dim,
            &mean[..c.dim],
            100.0 * near_center as f64 / n as f64
        );
    }
}
