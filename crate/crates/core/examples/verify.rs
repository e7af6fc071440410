//! Run the property suite at a small size, then again with a planted bug.

use zdtree::verify::{run_verify, Fault, VerifyConfig};

fn main() -> zdtree::Result<()> {
    let cfg = VerifyConfig {
        n: 500,
        equivalence_n: 2_000,
        fuzz_n: 2_000,
        morton_trials: 10_000,
        ..VerifyConfig::default()
    };
    println!("{}", run_verify(&cfg)?);

    let broken = VerifyConfig {
        fault: Some(Fault::UnsortedBuild),
        ..cfg
    };
    println!("{}", run_verify(&broken)?);
    Ok(())
}
