mod common;

use common::rng;
use potts3d::canon::GatewayContext;
use potts3d::dynamics::{simulate_hit, Beta, SimBudget, SimState};
use potts3d::landscape::typical::TypicalSets;
use potts3d::landscape::{mask_of, CeilingSpace, FullSpace, Space};
use potts3d::potential::testfn::{analyse_side, bulk_constant, floor_2d};
use potts3d::potential::{
    build_aux_chain, capacity, constants, dirichlet, dirichlet_bilinear, equilibrium_potential, h1_diagnostics,
    ladder_step_value, mean_hitting_capacity, mean_hitting_direct, rel_diff, spectral_gap, test_function, Flow,
    ReversibleChain, SolverBudget,
};
use potts3d::{LatticeSpec, SpinConfig};
use rand::Rng;
use std::cell::Cell;

fn open_223(beta: f64) -> (FullSpace, ReversibleChain) {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let chain = ReversibleChain::from_space(&space, Beta::new(beta).unwrap()).unwrap();
    (space, chain)
}

#[test]
fn measure_is_normalised_and_reversible() {
    let (space, chain) = open_223(2.0);
    assert!((chain.mu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut nb = Vec::new();
    for i in (0..space.len()).step_by(37) {
        nb.clear();
        space.neighbors_into(i, &mut nb);
        for &j in &nb {
            let lhs = chain.mu()[i] * chain.rate(i, j);
            let rhs = chain.mu()[j] * chain.rate(j, i);
            assert!(rel_diff(lhs, rhs) < 1e-12);
        }
    }
}

#[test]
fn dirichlet_forms_agree_on_random_functions() {
    let (space, chain) = open_223(2.0);
    let mut r = rng(31);
    for _ in 0..50 {
        let f: Vec<f64> = (0..space.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let lf = chain.generator(&f);
        let weak: f64 = -f.iter().zip(&lf).zip(chain.mu()).map(|((a, b), m)| a * b * m).sum::<f64>();
        assert!(rel_diff(dirichlet(&chain, &f), weak) < 1e-10);
        assert!(rel_diff(dirichlet_bilinear(&chain, &f, &f), weak) < 1e-10);
    }
}

#[test]
fn capacity_identities() {
    let (space, chain) = open_223(3.0);
    let g = space.ground_states();
    let n = space.len();
    let (p, q) = (mask_of(n, [g[0]]), mask_of(n, [g[1]]));
    let eq = equilibrium_potential(&chain, &p, &q, SolverBudget::default()).unwrap();
    assert!(rel_diff(eq.capacity, eq.capacity_dirichlet) < 1e-10);
    assert!(eq.h.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    let back = capacity(&chain, &q, &p, SolverBudget::default()).unwrap();
    assert!(rel_diff(eq.capacity, back) < 1e-10);
    let iter = capacity(&chain, &p, &q, SolverBudget::iterative()).unwrap();
    assert!(rel_diff(eq.capacity, iter) < 1e-9);
    let e_cap = mean_hitting_capacity(&chain, g[0], &q, SolverBudget::default()).unwrap();
    let e_dir = mean_hitting_direct(&chain, g[0], &q, SolverBudget::default()).unwrap();
    assert!(rel_diff(e_cap, e_dir) < 1e-8);
    assert!(capacity(&chain, &p, &p, SolverBudget::default()).is_err());
}

#[test]
fn dirichlet_principle_on_random_test_functions() {
    let (space, chain) = open_223(2.0);
    let g = space.ground_states();
    let n = space.len();
    let (p, q) = (mask_of(n, [g[0]]), mask_of(n, [g[1]]));
    let cap = capacity(&chain, &p, &q, SolverBudget::default()).unwrap();
    let mut r = rng(32);
    for _ in 0..20 {
        let mut f: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        f[g[0]] = 1.0;
        f[g[1]] = 0.0;
        let rep = h1_diagnostics(&chain, &p, &q, &f, SolverBudget::default()).unwrap();
        assert!(rep.dirichlet_principle_holds && dirichlet(&chain, &f) >= cap);
        assert!(rep.identity_rel_err < 1e-8);
    }
}

#[test]
fn simulated_committor_matches_equilibrium_potential() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let (space, chain) = open_223(2.0);
    let g = space.ground_states();
    let n = space.len();
    let eq = equilibrium_potential(&chain, &mask_of(n, [g[0]]), &mask_of(n, [g[1]]), SolverBudget::default()).unwrap();
    let mut start = SpinConfig::monochrome(spec, 1).unwrap();
    for i in 0..6 {
        start.set_index(i, 2);
    }
    let exact = eq.h[space.index_of_config(&start).unwrap()];
    let first = Cell::new(0u8);
    let target = |s: &SimState| match s.ground() {
        Some(a) => {
            first.set(a);
            true
        }
        None => false,
    };
    let runs = 4000;
    let mut hits = 0;
    for seed in 0..runs {
        let t = simulate_hit(&start, &target, Beta::new(2.0).unwrap(), seed, SimBudget::default());
        assert!(t.hit);
        hits += (first.get() == 1) as u32;
    }
    let p = hits as f64 / runs as f64;
    let se = (exact * (1.0 - exact) / runs as f64).sqrt();
    assert!((p - exact).abs() < 3.0 * se, "estimate {p} exact {exact} se {se}");
}

#[test]
fn spectral_gap_of_a_cycle() {
    let n = 12;
    let c = 0.25;
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, c)).collect();
    let chain = ReversibleChain::from_conductances(vec![1.0 / n as f64; n], &edges).unwrap();
    let rate = c * n as f64;
    let want = 2.0 * rate * (1.0 - (2.0 * std::f64::consts::PI / n as f64).cos());
    let gap = spectral_gap(&chain, SolverBudget::default()).unwrap();
    assert!(rel_diff(gap.gap, want) < 1e-9, "{} vs {want}", gap.gap);
}

#[test]
fn conductance_chain_rejects_bad_edges() {
    assert!(ReversibleChain::from_conductances(vec![0.5, 0.5], &[(0, 0, 1.0)]).is_err());
    assert!(ReversibleChain::from_conductances(vec![0.5, 0.5], &[(0, 1, -1.0)]).is_err());
    assert!(ReversibleChain::from_conductances(vec![0.5, 0.5], &[(0, 2, 1.0)]).is_err());
}

fn open_224_sets() -> (LatticeSpec, FullSpace, GatewayContext, TypicalSets) {
    let spec = LatticeSpec::open(2, 2, 4, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let ctx = GatewayContext::for_spec(&spec, 1 << 20).unwrap();
    let ts = TypicalSets::build(&space, &ctx, &[1], &[2]).unwrap();
    (spec, space, ctx, ts)
}

#[test]
fn aux_chain_rates_recount() {
    let (_, space, _, ts) = open_224_sets();
    let aux = build_aux_chain(&space, &ts, &ts.edge_a).unwrap();
    assert!(aux.reversible_exact && aux.flux_balanced);
    let nv = aux.len();
    assert!(aux.chain.mu().iter().all(|&m| rel_diff(m, 1.0 / nv as f64) < 1e-15));
    let mut nb = Vec::new();
    for v in 0..aux.n_outer {
        let s = aux.vertices[v];
        nb.clear();
        space.neighbors_into(s, &mut nb);
        for w in 0..nv {
            let t = aux.vertices[w];
            let want = if w < aux.n_outer {
                u64::from(w != v && nb.contains(&t))
            } else {
                let cls = ts.classes[t];
                nb.iter().filter(|&&z| space.energy(z) < ts.gamma && ts.classes[z] == cls).count() as u64
            };
            assert_eq!(aux.rate(v as u32, w as u32), want, "vertex pair ({v}, {w})");
        }
    }
}

#[test]
fn test_function_seams_and_slices() {
    let (spec, space, ctx, ts) = open_224_sets();
    let beta = Beta::new(3.0).unwrap();
    let budget = SolverBudget::default();
    let sa = analyse_side(&space, &ts, &ts.edge_a, ts.m_k, budget).unwrap();
    let sb = analyse_side(&space, &ts, &ts.edge_b, ts.m - ts.m_k, budget).unwrap();
    let floor = floor_2d(&spec, ctx.floors().gamma2d(), beta, budget).unwrap();
    let b = bulk_constant(&spec, ts.m_k, floor.kappa2d, 1);
    let tf = test_function(&space, &ts, &sa, &sb, b, &floor.h).unwrap();
    assert!(tf.boundary_ok);
    let at = |i: usize| tf.slice_value.iter().find(|(s, _)| *s == i).unwrap().1;
    assert!(rel_diff(at(ts.m_k), (tf.b + tf.e_b) / tf.c) < 1e-12);
    assert!(rel_diff(at(ts.m - ts.m_k), tf.e_b / tf.c) < 1e-12);
    for &(s, spread) in &tf.slice_spread {
        assert!(spread < 1e-12, "slice {s} spread {spread}");
    }
    let chain = ReversibleChain::from_space(&space, beta).unwrap();
    let g = space.ground_states();
    let n = space.len();
    let r = h1_diagnostics(&chain, &mask_of(n, [g[0]]), &mask_of(n, [g[1]]), &tf.values, budget).unwrap();
    assert!(r.dirichlet_principle_holds && r.in_unit_interval);
}

#[test]
fn constants_symmetries_for_three_spins() {
    let spec = LatticeSpec::open(2, 2, 4, 3).unwrap();
    let ctx = GatewayContext::for_spec(&spec, 1 << 20).unwrap();
    let space = CeilingSpace::from_ground(&spec, ctx.gamma(), 1 << 24).unwrap();
    let c = constants(&space, &ctx, Beta::new(3.0).unwrap(), SolverBudget::default()).unwrap();
    assert_eq!(c.b.len(), 2);
    assert!(rel_diff(c.b[0], c.b[1]) < 1e-12);
    assert!(rel_diff(c.c[0], c.c[1]) < 1e-12);
    assert!(rel_diff(c.kappa, 2.0 * c.c[0]) < 1e-12);
    assert!(c.outside_hypothesis);
    for n in 0..2 {
        assert!(rel_diff(c.e[n], c.e_mirror[n]) < 1e-9, "e {:?} mirror {:?}", c.e, c.e_mirror);
    }
}

#[test]
fn bulk_constant_symmetry_for_four_spins() {
    let spec = LatticeSpec::periodic(3, 4, 9, 4).unwrap();
    let b: Vec<f64> = (1..4).map(|n| bulk_constant(&spec, 2, 0.3, n)).collect();
    assert!(rel_diff(b[0], b[2]) < 1e-15);
    assert!(b[1] < b[0]);
}

#[test]
fn kappa_is_c1_for_two_spins() {
    let (_, space, ctx, _) = open_224_sets();
    let c = constants(&space, &ctx, Beta::new(3.0).unwrap(), SolverBudget::default()).unwrap();
    assert_eq!(c.c.len(), 1);
    assert_eq!(c.kappa, c.c[0]);
}

#[test]
fn ladder_step_on_smallest_cube() {
    let spec = LatticeSpec::periodic(3, 3, 3, 2).unwrap();
    assert!((ladder_step_value(&spec) - 1.0 / 54.0).abs() < 1e-16);
}

#[test]
fn flows_are_antisymmetric() {
    let f = Flow::from_directed(&[(0, 1, 0.25), (1, 2, 0.25), (2, 1, -0.25)]).unwrap();
    assert_eq!(f.get(1, 0), -0.25);
    let d = f.divergence(3);
    assert_eq!(d, vec![0.25, 0.0, -0.25]);
    assert!(Flow::from_directed(&[(0, 1, 0.5), (1, 0, 0.5)]).is_err());
}
