//! Typical sets of an open box: edge and bulk parts, gateway count and the
//! structural checks that back them.
use potts3d::canon::GatewayContext;
use potts3d::landscape::typical::TypicalSets;
use potts3d::landscape::FullSpace;
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::open(2, 2, 4, 2)?;
    let ctx = GatewayContext::for_spec(&spec, 1 << 20)?;
    let space = FullSpace::of_lattice(&spec, 1 << 20)?;
    let ts = TypicalSets::build(&space, &ctx, &[1], &[2])?;
    let count = |m: &[bool]| m.iter().filter(|&&x| x).count();
    println!(
        "barrier {}, m_K {}: edge A {}, edge B {}, bulk {}, reachable below barrier {}",
        ts.gamma,
        ts.m_k,
        count(&ts.edge_a.set),
        count(&ts.edge_b.set),
        count(&ts.bulk),
        count(&ts.nhat_ground)
    );
    println!("gateways {}", ts.gateway.iter().filter(|g| g.is_some()).count());
    println!("{:#?}", ts.checks);
    Ok(())
}
