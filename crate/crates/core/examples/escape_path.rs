//! The sub-barrier escape from a thin slab back to a ground state, with its
//! per-stage energy-change matrices.
use potts3d::canon::escape_path;
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::periodic(9, 9, 9, 2)?;
    let esc = escape_path(&spec, 1, 2, 2)?;
    println!("peak {} (bound {}), {} flips", esc.path.peak(), esc.bound(), esc.path.len());
    println!("stage matrices match the closed form: {}", esc.matches_expected());
    for (k, m) in esc.ledger.stage1.iter().enumerate().take(2) {
        println!("stage 1, k = {}: {m:?}", k + 1);
    }
    println!("stage 3: {:?}", esc.ledger.stage3);
    Ok(())
}
