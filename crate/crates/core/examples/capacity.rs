//! Exact potential theory on an enumerable box: capacity, mean transition
//! time two ways, spectral gap.
use potts3d::dynamics::Beta;
use potts3d::landscape::{mask_of, FullSpace, Space};
use potts3d::potential::{
    equilibrium_potential, mean_hitting_capacity, mean_hitting_direct, spectral_gap, ReversibleChain, SolverBudget,
};
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::open(2, 2, 3, 2)?;
    let space = FullSpace::of_lattice(&spec, 1 << 20)?;
    let g = space.ground_states();
    let budget = SolverBudget::default();
    for b in [2.0, 3.0] {
        let chain = ReversibleChain::from_space(&space, Beta::new(b)?)?;
        let n = chain.len();
        let (a, z) = (mask_of(n, [g[0]]), mask_of(n, [g[1]]));
        let eq = equilibrium_potential(&chain, &a, &z, budget)?;
        let e1 = mean_hitting_capacity(&chain, g[0], &z, budget)?;
        let e2 = mean_hitting_direct(&chain, g[0], &z, budget)?;
        let gap = spectral_gap(&chain, budget)?;
        println!(
            "beta {b}: cap {:.6e}, E tau {e1:.6e} / {e2:.6e}, gap {:.6e}, gap * E tau {:.4}",
            eq.capacity,
            gap.gap,
            gap.gap * e2
        );
    }
    Ok(())
}
