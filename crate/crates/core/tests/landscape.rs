mod common;

use common::bond_energy;
use potts3d::canon::GatewayContext;
use potts3d::landscape::typical::TypicalSets;
use potts3d::landscape::{
    barrier, comm_height, components_below, export_set, mask_of, max_valley_depth, members, neighborhood, CeilingSpace,
    FullSpace, Space, UNREACHABLE,
};
use potts3d::lattice::FloorSpec;
use potts3d::{Boundary, LatticeSpec};
use std::collections::VecDeque;

/// Barrier by bisection on the ceiling with a plain BFS over spin vectors.
fn oracle_barrier(spec: &LatticeSpec) -> u32 {
    let n = spec.n_sites();
    let q = spec.q();
    let start = vec![1u8; n];
    let goal = vec![2u8; n];
    let reachable = |ceiling: u32| {
        let mut seen = std::collections::HashSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start.clone());
        while let Some(s) = queue.pop_front() {
            if s == goal {
                return true;
            }
            for i in 0..n {
                for a in 1..=q {
                    let mut t = s.clone();
                    t[i] = a;
                    if !seen.contains(&t) && bond_energy(spec, &t) <= ceiling {
                        seen.insert(t.clone());
                        queue.push_back(t);
                    }
                }
            }
        }
        false
    };
    let (mut lo, mut hi) = (0, 3 * n as u32);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if reachable(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

#[test]
fn floor_barrier_three_by_four() {
    let fs = FloorSpec::new(3, 4, Boundary::Periodic).unwrap();
    let space = FullSpace::new(fs.graph(), 2, None, 1 << 20).unwrap();
    assert_eq!(barrier(&space).unwrap(), 8);
}

/// Frozen from the BFS oracle.
const OPEN_223_BARRIER: u32 = 6;

#[test]
fn open_box_barrier_matches_oracle() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let oracle = oracle_barrier(&spec);
    assert_eq!(oracle, OPEN_223_BARRIER);
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    assert_eq!(barrier(&space).unwrap(), oracle);
    assert!(oracle <= 2 * 2 + 2 + 1);
}

#[test]
fn full_space_energies_match_bond_count() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    for i in 0..space.len() {
        assert_eq!(space.energy(i), bond_energy(&spec, &space.spins(i)));
    }
    let q3 = LatticeSpec::open(2, 2, 2, 3).unwrap();
    let space = FullSpace::of_lattice(&q3, 1 << 20).unwrap();
    assert_eq!(space.len(), 6561);
    assert!(FullSpace::of_lattice(&q3, 100).is_err());
}

#[test]
fn ceiling_space_is_the_ground_neighbourhood() {
    let spec = LatticeSpec::open(2, 2, 3, 3).unwrap();
    let full = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    for ceiling in [3, 4, 6] {
        let nb = neighborhood(&full, &full.ground_states(), ceiling, None);
        let cs = CeilingSpace::from_ground(&spec, ceiling, 1 << 20).unwrap();
        assert_eq!(cs.len(), members(&nb).len());
        for i in 0..cs.len() {
            let j = full.index_of(cs.code(i)).unwrap();
            assert!(nb[j]);
            assert_eq!(cs.energy(i), full.energy(j));
        }
    }
    assert!(CeilingSpace::from_ground(&spec, 6, 10).is_err());
}

#[test]
fn neighbourhoods_below_and_at_the_barrier() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let g = space.ground_states();
    let phi = barrier(&space).unwrap();
    let n1 = neighborhood(&space, &[g[0]], phi - 1, None);
    let n2 = neighborhood(&space, &[g[1]], phi - 1, None);
    assert!(n1.iter().zip(&n2).all(|(&a, &b)| !(a && b)));
    let n1 = neighborhood(&space, &[g[0]], phi, None);
    assert!(n1[g[1]]);
    // A root above the ceiling contributes nothing.
    let mut spins = vec![1u8; 12];
    spins[0] = 2;
    let x = space.index_of_spins(&spins).unwrap();
    let h = space.energy(x);
    assert!(members(&neighborhood(&space, &[x], h - 1, None)).is_empty());
}

#[test]
fn comm_height_respects_avoid_sets() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let g = space.ground_states();
    assert_eq!(comm_height(&space, g[0], g[1], None), Some(OPEN_223_BARRIER));
    assert_eq!(comm_height(&space, g[0], g[0], None), Some(0));
    let everything_but_ends = mask_of(space.len(), (0..space.len()).filter(|i| !g.contains(i)));
    assert_eq!(comm_height(&space, g[0], g[1], Some(&everything_but_ends)), None);
}

#[test]
fn components_split_at_the_barrier() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let g = space.ground_states();
    let below = components_below(&space, OPEN_223_BARRIER - 1);
    assert_ne!(below[g[0]], below[g[1]]);
    let at = components_below(&space, OPEN_223_BARRIER);
    assert_eq!(at[g[0]], at[g[1]]);
    assert!(below.iter().zip(0..).all(|(&c, i)| (c == UNREACHABLE) == (space.energy(i) >= OPEN_223_BARRIER)));
}

#[test]
fn valley_depth_is_below_barrier_gap() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let d = max_valley_depth(&space);
    assert_eq!(d.unreachable, 0);
    // Frozen: the deepest non-ground valley on this box has depth 1.
    assert_eq!(d.max_depth, 1);
    assert!(d.max_depth <= OPEN_223_BARRIER - 2);
}

#[test]
fn typical_sets_on_open_two_by_two_by_four() {
    let spec = LatticeSpec::open(2, 2, 4, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let ctx = GatewayContext::for_spec(&spec, 1 << 20).unwrap();
    let t = TypicalSets::build(&space, &ctx, &[1], &[2]).unwrap();
    for &i in &t.edge_a.ground {
        assert!(t.edge_a.set[i]);
    }
    for &i in &t.edge_b.ground {
        assert!(t.edge_b.set[i]);
    }
    assert!(t.checks.edges_disjoint);
    // The union falls short of the hatted ground neighbourhood on this tiny box.
    assert_eq!((t.checks.union_size, t.checks.nhat_ground_size), (208, 248));
    assert!(!t.checks.union_is_nhat_ground);
    assert!(t.checks.outside_hypothesis);
    assert!(t.edge_a.outer.iter().all(|&i| space.energy(i) == t.gamma));
    assert!(t.edge_a.inner.iter().all(|&i| space.energy(i) < t.gamma));
}

#[test]
fn exported_sets_are_sorted_codes() {
    let spec = LatticeSpec::open(2, 2, 2, 2).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let mask = neighborhood(&space, &space.ground_states(), 3, None);
    let text = export_set(&space, &mask, &serde_json::json!({"set": "low"}));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(r#"{"set":"low"}"#));
    let codes: Vec<u64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(codes.len(), 18);
    assert!(codes.windows(2).all(|w| w[0] < w[1]));
}
