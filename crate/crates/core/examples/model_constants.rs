//! Prefactor constants of an open box, with the flags marking how far the
//! instance is from the asymptotic regime.
use potts3d::canon::GatewayContext;
use potts3d::dynamics::Beta;
use potts3d::landscape::CeilingSpace;
use potts3d::potential::{constants, SolverBudget};
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::open(2, 2, 4, 3)?;
    let ctx = GatewayContext::for_spec(&spec, 1 << 20)?;
    let space = CeilingSpace::from_ground(&spec, ctx.gamma(), 1 << 24)?;
    for b in [2.0, 4.0] {
        let c = constants(&space, &ctx, Beta::new(b)?, SolverBudget::default())?;
        println!(
            "beta {b}: b {:?} e {:?} c {:?} kappa {:.5}  (outside hypothesis: {})",
            c.b, c.e, c.c, c.kappa, c.outside_hypothesis
        );
    }
    Ok(())
}
