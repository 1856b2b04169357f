//! The auxiliary edge chain of a periodic box and the ladder flow on it.
//! Builds about 2.5M states below the barrier; takes around a minute.
use potts3d::canon::GatewayContext;
use potts3d::landscape::typical::TypicalSets;
use potts3d::landscape::CeilingSpace;
use potts3d::potential::aux::ladder_flow;
use potts3d::potential::{build_aux_chain, SolverBudget};
use potts3d::LatticeSpec;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::periodic(3, 3, 5, 2)?;
    let ctx = GatewayContext::for_spec(&spec, 1 << 20)?;
    let space = CeilingSpace::from_ground(&spec, ctx.gamma(), 1 << 23)?;
    let ts = TypicalSets::build(&space, &ctx, &[1], &[2])?;
    let aux = build_aux_chain(&space, &ts, &ts.edge_a)?;
    let (summary, _) = aux.analyse(&ts.r_hat[ts.m_k], SolverBudget::default())?;
    println!("{} vertices, uniform measure invariant {}", aux.len(), aux.flux_balanced && aux.reversible_exact);
    let (flow, _) = ladder_flow(&space, &ts, &aux, &ctx, ts.i_klm(&space))?;
    let unit = flow.unit_check(aux.len(), &aux.sources, &aux.sinks, 1e-9);
    let energy = flow.norm_sq(&aux)?;
    println!("unit flow {}, energy {energy:.3}, 1/energy {:.4e} <= cap {:.4e}", unit.is_unit, 1.0 / energy, summary.capacity.unwrap_or(f64::NAN));
    Ok(())
}
