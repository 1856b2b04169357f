//! Exhaustive communication heights on small boxes and floors.
use potts3d::landscape::{barrier, max_valley_depth, FullSpace};
use potts3d::lattice::{Boundary, FloorSpec};
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    for (k, l) in [(3, 3), (3, 4)] {
        let fs = FloorSpec::new(k, l, Boundary::Periodic)?;
        let space = FullSpace::new(fs.graph(), 2, None, 1 << 22)?;
        println!("{k}x{l} periodic floor: barrier {}", barrier(&space)?);
    }
    let spec = LatticeSpec::open(2, 2, 3, 2)?;
    let space = FullSpace::of_lattice(&spec, 1 << 22)?;
    let depth = max_valley_depth(&space);
    println!("{spec}: barrier {}, deepest non-ground valley {}", barrier(&space)?, depth.max_depth);
    Ok(())
}
