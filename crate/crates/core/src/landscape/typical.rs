//! Typical configuration sets for a partition `(A, B)` of the spins.
//!
//! Everything is computed inside a [`Space`] that must contain every state
//! reachable from the ground states at height `gamma` (a full enumeration or
//! a ceiling flood at `gamma`). Regular slabs and gateways are generated
//! constructively and located by code; the hatted neighbourhoods and the
//! class decomposition come from floods.

use super::{comm_height_sets, components_below, members, minimax, neighborhood, Space, UNREACHABLE};
use crate::canon::{build_regular, GatewayContext, TorusArc};
use crate::error::{input, Error, Result};
use serde::Serialize;

/// Gateway data attached to a state of the space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GateInfo {
    /// Size of the lower arc `P`.
    pub slice: usize,
    pub a: u8,
    pub b: u8,
    pub kind: u8,
    /// Two-spin code of the active floor (bit set where the spin is `b`).
    pub floor_bits: u64,
}

/// One side of the edge decomposition: `E = O ∪ I` with class representatives.
#[derive(Clone, Debug)]
pub struct EdgeSide {
    /// Member mask of the edge set.
    pub set: Vec<bool>,
    /// States of the edge set at height exactly `gamma`.
    pub outer: Vec<usize>,
    /// States of the edge set below `gamma`.
    pub inner: Vec<usize>,
    /// One representative per `(gamma - 1)`-class met by `inner`, sorted.
    pub reps: Vec<usize>,
    /// For each state of `inner`, its representative (others `UNREACHABLE`).
    pub rep_of: Vec<u32>,
    /// Ground states of this side.
    pub ground: Vec<usize>,
    /// Regular states of the seam slice (`m_K` for `A`, `M - m_K` for `B`).
    pub seam: Vec<usize>,
    /// Number of states below `gamma` in a class met by `inner` but outside the edge set.
    pub class_leaks: usize,
}

/// Results of the structural checks, as booleans plus the sizes behind them.
#[derive(Clone, Debug, Serialize)]
pub struct TypicalChecks {
    pub edges_disjoint: bool,
    pub edge_a_meets_bulk_in_seam: bool,
    pub edge_b_meets_bulk_in_seam: bool,
    pub union_is_nhat_ground: bool,
    pub union_size: usize,
    pub nhat_ground_size: usize,
    pub ground_a_in_edge_a: bool,
    pub ground_b_in_edge_b: bool,
    pub outer_at_gamma: bool,
    pub inner_classes_closed: bool,
    /// Height of the cheapest path between the two ground families avoiding all gateways.
    pub restricted_height: Option<u32>,
    pub restricted_exceeds_gamma: bool,
    /// Gateway neighbours outside the gateway set at height `<= gamma` that
    /// break the escape rule (see [`TypicalSets::escape_violations`]).
    pub escape_violations: usize,
    /// Gateways that were constructed but are absent from the space.
    pub gateways_missing: usize,
    /// Any check failed on an instance too small for the asymptotic theory.
    pub outside_hypothesis: bool,
    pub degenerate_window: bool,
}

/// The typical sets of one partition.
#[derive(Clone, Debug)]
pub struct TypicalSets {
    pub a_spins: Vec<u8>,
    pub b_spins: Vec<u8>,
    pub gamma: u32,
    pub m_k: usize,
    pub m: usize,
    /// `regular[i]`: regular states with `i` floors of a `B` spin.
    pub regular: Vec<Vec<usize>>,
    /// `r_hat[i]`: states reached from `regular[i]` at height `gamma` avoiding gateways.
    pub r_hat: Vec<Vec<bool>>,
    pub gateway: Vec<Option<GateInfo>>,
    pub edge_a: EdgeSide,
    pub edge_b: EdgeSide,
    pub bulk: Vec<bool>,
    /// Gateways together with the hatted slices of the bulk window.
    pub h_set: Vec<bool>,
    /// `N-hat` of the ground states at height `gamma`.
    pub nhat_ground: Vec<bool>,
    /// `(gamma - 1)`-class label of every state (`UNREACHABLE` at height `gamma`).
    pub classes: Vec<u32>,
    pub checks: TypicalChecks,
}

fn or_masks(n: usize, parts: &[&[bool]]) -> Vec<bool> {
    let mut out = vec![false; n];
    for p in parts {
        for (o, &x) in out.iter_mut().zip(p.iter()) {
            *o |= x;
        }
    }
    out
}

fn regular_states<S: Space + ?Sized>(space: &S, ctx: &GatewayContext, a_spins: &[u8], b_spins: &[u8], i: usize) -> Result<Vec<usize>> {
    let spec = ctx.spec();
    let mut out = Vec::new();
    let arcs: Vec<TorusArc> =
        TorusArc::all(spec.m(), spec.boundary()).into_iter().filter(|p| p.len == i).collect();
    for &a in a_spins {
        for &b in b_spins {
            for p in &arcs {
                for o in spec.orientations() {
                    let s = build_regular(spec, a, b, p, o)?;
                    let idx = space
                        .index_of_config(&s)
                        .ok_or_else(|| Error::Input(format!("regular state with {i} floors is missing from the space")))?;
                    out.push(idx);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

impl TypicalSets {
    /// Builds every set for the partition `(a_spins, b_spins)`.
    pub fn build<S: Space + ?Sized>(space: &S, ctx: &GatewayContext, a_spins: &[u8], b_spins: &[u8]) -> Result<Self> {
        let spec = *ctx.spec();
        if space.lattice() != Some(&spec) {
            return input("space and gateway context describe different boxes");
        }
        let q = spec.q();
        let mut all: Vec<u8> = a_spins.iter().chain(b_spins).copied().collect();
        all.sort_unstable();
        if a_spins.is_empty() || b_spins.is_empty() || all != (1..=q).collect::<Vec<_>>() {
            return input("(A, B) must be a partition of the spins into two non-empty parts");
        }
        let n = space.len();
        let (gamma, m_k, mm) = (ctx.gamma(), ctx.m_k(), spec.m());
        let (lo, hi) = ctx.window();

        let mut gateway: Vec<Option<GateInfo>> = vec![None; n];
        let mut gateways_missing = 0;
        for &a in a_spins {
            for &b in b_spins {
                for (s, c) in ctx.construct_all(a, b)? {
                    match space.index_of_config(&s) {
                        Some(i) => {
                            if gateway[i].is_none() {
                                gateway[i] = Some(GateInfo {
                                    slice: c.p.len,
                                    a,
                                    b,
                                    kind: c.kind,
                                    floor_bits: c.floor_bits,
                                });
                            }
                        }
                        None => gateways_missing += 1,
                    }
                }
            }
        }
        let gate_mask: Vec<bool> = gateway.iter().map(Option::is_some).collect();
        let slice_mask = |from: usize, to: usize| -> Vec<bool> {
            gateway.iter().map(|g| g.is_some_and(|g| from <= g.slice && g.slice <= to)).collect()
        };

        let mut regular = Vec::with_capacity(mm + 1);
        let mut r_hat = Vec::with_capacity(mm + 1);
        for i in 0..=mm {
            let r = regular_states(space, ctx, a_spins, b_spins, i)?;
            r_hat.push(neighborhood(space, &r, gamma, Some(&gate_mask)));
            regular.push(r);
        }
        let r_hat_range = |from: usize, to: usize| -> Vec<bool> {
            let parts: Vec<&[bool]> = (from..=to.min(mm)).map(|i| r_hat[i].as_slice()).collect();
            or_masks(n, &parts)
        };

        let edge_a_set = or_masks(n, &[&slice_mask(lo, lo), &r_hat_range(0, m_k)]);
        let edge_b_set = or_masks(n, &[&slice_mask(hi, hi), &r_hat_range(mm.saturating_sub(m_k), mm)]);
        let bulk_gates = if hi >= 1 { slice_mask(m_k, hi - 1) } else { vec![false; n] };
        let bulk_hat = r_hat_range(m_k, mm.saturating_sub(m_k));
        let bulk = or_masks(n, &[&bulk_gates, &bulk_hat]);
        let h_set = or_masks(n, &[&gate_mask, &bulk_hat]);

        let classes = components_below(space, gamma.saturating_sub(1));
        let ground_of = |spins: &[u8]| -> Vec<usize> {
            spins.iter().filter_map(|&a| space.index_of(space.codec().mono(a))).collect()
        };
        let ground_a = ground_of(a_spins);
        let ground_b = ground_of(b_spins);
        let edge_a = EdgeSide::new(space, edge_a_set, &classes, gamma, ground_a.clone(), regular[m_k.min(mm)].clone());
        let edge_b = EdgeSide::new(
            space,
            edge_b_set,
            &classes,
            gamma,
            ground_b.clone(),
            regular[mm.saturating_sub(m_k)].clone(),
        );

        let all_ground: Vec<usize> = ground_a.iter().chain(&ground_b).copied().collect();
        let nhat_ground = neighborhood(space, &all_ground, gamma, None);
        let union = or_masks(n, &[&edge_a.set, &edge_b.set, &bulk]);
        let union_size = union.iter().filter(|&&x| x).count();
        let nhat_ground_size = nhat_ground.iter().filter(|&&x| x).count();

        let seam_a = &r_hat[m_k.min(mm)];
        let seam_b = &r_hat[mm.saturating_sub(m_k)];
        let meets_in = |e: &[bool], seam: &[bool]| (0..n).all(|i| (e[i] && bulk[i]) == seam[i]);
        let restricted_height = comm_height_sets(space, &ground_a, &ground_b, Some(&gate_mask));
        let a_seam_ok = meets_in(&edge_a.set, seam_a);
        let b_seam_ok = meets_in(&edge_b.set, seam_b);

        let mut sets = TypicalSets {
            a_spins: a_spins.to_vec(),
            b_spins: b_spins.to_vec(),
            gamma,
            m_k,
            m: mm,
            regular,
            r_hat,
            gateway,
            checks: TypicalChecks {
                edges_disjoint: (0..n).all(|i| !(edge_a.set[i] && edge_b.set[i])),
                edge_a_meets_bulk_in_seam: a_seam_ok,
                edge_b_meets_bulk_in_seam: b_seam_ok,
                union_is_nhat_ground: union == nhat_ground,
                union_size,
                nhat_ground_size,
                ground_a_in_edge_a: ground_a.iter().all(|&i| edge_a.set[i]),
                ground_b_in_edge_b: ground_b.iter().all(|&i| edge_b.set[i]),
                outer_at_gamma: edge_a.outer.iter().chain(&edge_b.outer).all(|&i| space.energy(i) == gamma),
                inner_classes_closed: edge_a.class_leaks == 0 && edge_b.class_leaks == 0,
                restricted_height,
                restricted_exceeds_gamma: restricted_height.is_none_or(|h| h > gamma),
                escape_violations: 0,
                gateways_missing,
                outside_hypothesis: false,
                degenerate_window: ctx.degenerate(),
            },
            edge_a,
            edge_b,
            bulk,
            h_set,
            nhat_ground,
            classes,
        };
        sets.checks.escape_violations = sets.escape_violations(space);
        let c = &sets.checks;
        sets.checks.outside_hypothesis = !(c.edges_disjoint
            && c.edge_a_meets_bulk_in_seam
            && c.edge_b_meets_bulk_in_seam
            && c.union_is_nhat_ground
            && c.inner_classes_closed
            && c.restricted_exceeds_gamma
            && c.escape_violations == 0);
        Ok(sets)
    }

    /// Counts pairs `(sigma, zeta)` with `sigma` a gateway of slice `i`,
    /// `zeta` a non-gateway neighbour at height `<= gamma`, where either
    /// `zeta` is outside the `(gamma - 1)`-classes of the regular slices
    /// `i` and `i + 1` or `sigma` is not of type 3.
    pub fn escape_violations<S: Space + ?Sized>(&self, space: &S) -> usize {
        let n = space.len();
        let mut slice_classes: Vec<Vec<u32>> = Vec::with_capacity(self.m + 1);
        for r in &self.regular {
            let mut c: Vec<u32> = r.iter().map(|&i| self.classes[i]).filter(|&c| c != UNREACHABLE).collect();
            c.sort_unstable();
            c.dedup();
            slice_classes.push(c);
        }
        let mut bad = 0;
        let mut nb = Vec::new();
        for s in 0..n {
            let Some(g) = self.gateway[s] else { continue };
            nb.clear();
            space.neighbors_into(s, &mut nb);
            for &z in &nb {
                if self.gateway[z].is_some() || space.energy(z) > self.gamma {
                    continue;
                }
                let cz = self.classes[z];
                let near = cz != UNREACHABLE
                    && (g.slice..=(g.slice + 1).min(self.m)).any(|i| slice_classes[i].binary_search(&cz).is_ok());
                if !near || g.kind != 3 {
                    bad += 1;
                }
            }
        }
        bad
    }

    /// Largest `m >= 1` with `Phi(S(A), R_m) < gamma`, or 0 if there is none.
    pub fn i_klm<S: Space + ?Sized>(&self, space: &S) -> usize {
        let d = minimax(space, &self.edge_a.ground, None);
        (1..=self.m)
            .filter(|&i| self.regular[i].iter().map(|&r| d[r]).min().is_some_and(|h| h < self.gamma))
            .max()
            .unwrap_or(0)
    }

    pub fn is_gateway(&self, i: usize) -> bool {
        self.gateway[i].is_some()
    }
}

impl EdgeSide {
    fn new<S: Space + ?Sized>(
        space: &S,
        set: Vec<bool>,
        classes: &[u32],
        gamma: u32,
        ground: Vec<usize>,
        seam: Vec<usize>,
    ) -> Self {
        let n = space.len();
        let mut outer = Vec::new();
        let mut inner = Vec::new();
        for i in members(&set) {
            if space.energy(i) >= gamma {
                outer.push(i);
            } else {
                inner.push(i);
            }
        }
        // Representative per class: ground first, then seam, then smallest code.
        let mut best: rustc_hash::FxHashMap<u32, (u8, u64, usize)> = Default::default();
        for &i in &inner {
            let rank = if ground.contains(&i) {
                0
            } else if seam.binary_search(&i).is_ok() {
                1
            } else {
                2
            };
            let key = (rank, space.code(i), i);
            best.entry(classes[i]).and_modify(|b| *b = (*b).min(key)).or_insert(key);
        }
        let mut rep_of = vec![UNREACHABLE; n];
        for &i in &inner {
            rep_of[i] = best[&classes[i]].2 as u32;
        }
        let mut reps: Vec<usize> = best.values().map(|b| b.2).collect();
        reps.sort_unstable();
        let class_leaks = (0..n)
            .filter(|&i| !set[i] && classes[i] != UNREACHABLE && best.contains_key(&classes[i]))
            .count();
        EdgeSide { set, outer, inner, reps, rep_of, ground, seam, class_leaks }
    }

    /// Size of the auxiliary vertex set.
    pub fn n_vertices(&self) -> usize {
        self.outer.len() + self.reps.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::FullSpace;
    use crate::lattice::LatticeSpec;

    #[test]
    fn open_224_structure() {
        let spec = LatticeSpec::open(2, 2, 4, 2).unwrap();
        let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
        let ctx = GatewayContext::for_spec(&spec, 1 << 20).unwrap();
        let t = TypicalSets::build(&space, &ctx, &[1], &[2]).unwrap();
        let c = &t.checks;
        assert_eq!(t.gateway.iter().filter(|g| g.is_some()).count(), 96);
        assert!(c.edges_disjoint && c.edge_a_meets_bulk_in_seam && c.ground_a_in_edge_a);
        assert_eq!((c.union_size, c.nhat_ground_size), (208, 248));
        assert!(c.outside_hypothesis);
    }
}
