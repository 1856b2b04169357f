//! Constructs every gateway configuration of a box and tallies heights by type.
use potts3d::canon::GatewayContext;
use potts3d::energy::energy3d;
use potts3d::LatticeSpec;
use std::collections::BTreeMap;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::periodic(3, 4, 8, 2)?;
    let ctx = GatewayContext::for_spec(&spec, 1 << 20)?;
    let mut tally: BTreeMap<(u8, i64), usize> = BTreeMap::new();
    for (sigma, class) in ctx.construct_all(1, 2)? {
        *tally.entry((class.kind, energy3d(&sigma) as i64 - ctx.gamma() as i64)).or_default() += 1;
    }
    println!("{spec}, barrier {}", ctx.gamma());
    for ((kind, off), n) in tally {
        println!("type {kind}: H = barrier {off:+}  ({n} configurations)");
    }
    Ok(())
}
