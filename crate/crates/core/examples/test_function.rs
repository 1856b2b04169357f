//! Builds the test function on an open box and compares it with the exact
//! equilibrium potential.
use potts3d::canon::GatewayContext;
use potts3d::dynamics::Beta;
use potts3d::landscape::typical::TypicalSets;
use potts3d::landscape::{mask_of, FullSpace, Space};
use potts3d::potential::testfn::{analyse_side, bulk_constant, floor_2d};
use potts3d::potential::{h1_diagnostics, test_function, ReversibleChain, SolverBudget};
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::open(2, 2, 4, 2)?;
    let beta = Beta::new(3.0)?;
    let budget = SolverBudget::default();
    let ctx = GatewayContext::for_spec(&spec, 1 << 20)?;
    let space = FullSpace::of_lattice(&spec, 1 << 20)?;
    let ts = TypicalSets::build(&space, &ctx, &[1], &[2])?;
    let sa = analyse_side(&space, &ts, &ts.edge_a, ts.m_k, budget)?;
    let sb = analyse_side(&space, &ts, &ts.edge_b, ts.m - ts.m_k, budget)?;
    let floor = floor_2d(&spec, ctx.floors().gamma2d(), beta, budget)?;
    let b = bulk_constant(&spec, ts.m_k, floor.kappa2d, 1);
    let tf = test_function(&space, &ts, &sa, &sb, b, &floor.h)?;
    println!("slice values {:?}", tf.slice_value);
    let chain = ReversibleChain::from_space(&space, beta)?;
    let g = space.ground_states();
    let n = chain.len();
    let r = h1_diagnostics(&chain, &mask_of(n, [g[0]]), &mask_of(n, [g[1]]), &tf.values, budget)?;
    println!("D(test) {:.6e} >= Cap {:.6e}; identity error {:.2e}", r.d_test, r.capacity, r.identity_rel_err);
    Ok(())
}
