//! Builds the canonical growth path between two ground states and prints its peak.
use potts3d::canon::{canonical_path, PathPolicy};
use potts3d::cli::gamma_formula;
use potts3d::lattice::Orientation;
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    for spec in [LatticeSpec::periodic(3, 4, 5, 2)?, LatticeSpec::open(3, 3, 4, 2)?] {
        let path = canonical_path(&spec, 1, 2, PathPolicy::default(), Orientation::Identity)?;
        println!(
            "{spec}: {} flips, peak {}, closed form {}, ledger verified {}",
            path.len(),
            path.peak(),
            gamma_formula(&spec),
            path.verify()
        );
    }
    Ok(())
}
