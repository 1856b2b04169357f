//! Event-driven Metropolis dynamics: a seeded ensemble of transition times
//! compared with the exact mean, and one trajectory through the trace clock.
use potts3d::dynamics::{hitting_ensemble, other_ground, simulate_hit, summarize, trace_transform, Beta, SimBudget};
use potts3d::landscape::{mask_of, FullSpace, Space};
use potts3d::potential::{mean_hitting_direct, ReversibleChain, SolverBudget};
use potts3d::{LatticeSpec, SpinConfig};

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::open(2, 2, 3, 2)?;
    let beta = Beta::new(2.5)?;
    let s1 = SpinConfig::monochrome(spec, 1)?;
    let runs = hitting_ensemble(&s1, &other_ground(1), beta, 100, 300, SimBudget::default());
    let sum = summarize(&runs);

    let space = FullSpace::of_lattice(&spec, 1 << 20)?;
    let chain = ReversibleChain::from_space(&space, beta)?;
    let g = space.ground_states();
    let exact = mean_hitting_direct(&chain, g[0], &mask_of(chain.len(), [g[1]]), SolverBudget::default())?;
    println!("mean {:.4e} +- {:.1e}, exact {exact:.4e}, KS {:.3}", sum.mean, sum.std_error, sum.ks_exp1);

    let rec = simulate_hit(&s1, &other_ground(1), beta, 5, SimBudget { record: true, ..Default::default() });
    let tr = trace_transform(&rec, 2, 6, beta)?;
    println!("trace time {:.4} of accelerated {:.4} over {} events", tr.trace_time, tr.accelerated_time, rec.n_events);
    Ok(())
}
