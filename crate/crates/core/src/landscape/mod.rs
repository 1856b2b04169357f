//! Brute-force landscape oracles on enumerated state spaces.
//!
//! A [`Space`] is any indexed set of configurations over a site graph,
//! closed or not under single flips. Two implementations exist: the full
//! product space addressed directly by base-q code, and a ceiling-restricted
//! space grown by flood fill from a set of roots.
//!
//! Sets over a space are `Vec<bool>` masks indexed like the space.

pub mod typical;

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, SiteGraph, SpinConfig};
use rustc_hash::FxHashMap;
use serde::Serialize;

/// Sentinel for states that a search cannot reach.
pub const UNREACHABLE: u32 = u32::MAX;

/// Default cap on the number of states of a full enumeration.
pub const DEFAULT_STATE_LIMIT: u64 = 1 << 26;

/// Default cap on the number of states a ceiling flood may hold.
pub const DEFAULT_CEILING_LIMIT: u64 = 40_000_000;

/// Base-q arithmetic on configuration codes (site 0 least significant, digit = spin - 1).
#[derive(Clone, Debug)]
pub struct Codec {
    q: u64,
    pow: Vec<u64>,
}

impl Codec {
    pub fn new(q: u8, n_sites: usize) -> Result<Self> {
        let mut pow = Vec::with_capacity(n_sites + 1);
        let mut p: u64 = 1;
        pow.push(p);
        for _ in 0..n_sites {
            p = p.checked_mul(q as u64).ok_or_else(|| {
                Error::Unsupported(format!("{q}^{n_sites} states do not fit 64-bit codes"))
            })?;
            pow.push(p);
        }
        Ok(Codec { q: q as u64, pow })
    }
    pub fn n_sites(&self) -> usize {
        self.pow.len() - 1
    }
    /// Number of configurations.
    pub fn size(&self) -> u64 {
        self.pow[self.n_sites()]
    }
    /// Spin (1-based) at site `s`.
    #[inline]
    pub fn spin(&self, code: u64, s: usize) -> u8 {
        ((code / self.pow[s]) % self.q) as u8 + 1
    }
    /// Code after setting site `s` to spin `a`.
    #[inline]
    pub fn with_spin(&self, code: u64, s: usize, a: u8) -> u64 {
        let d = (code / self.pow[s]) % self.q;
        code - d * self.pow[s] + (a as u64 - 1) * self.pow[s]
    }
    pub fn decode_into(&self, mut code: u64, out: &mut [u8]) {
        for o in out.iter_mut() {
            *o = (code % self.q) as u8 + 1;
            code /= self.q;
        }
    }
    pub fn decode(&self, code: u64) -> Vec<u8> {
        let mut v = vec![0; self.n_sites()];
        self.decode_into(code, &mut v);
        v
    }
    pub fn encode(&self, spins: &[u8]) -> u64 {
        spins.iter().enumerate().map(|(s, &a)| (a as u64 - 1) * self.pow[s]).sum()
    }
    /// Code of the monochromatic configuration with spin `a`.
    pub fn mono(&self, a: u8) -> u64 {
        (a as u64 - 1) * ((self.size() - 1) / (self.q - 1))
    }
}

/// Indexed configuration space with single-flip adjacency.
pub trait Space {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn q(&self) -> u8;
    fn graph(&self) -> &SiteGraph;
    fn codec(&self) -> &Codec;
    /// The 3D box, when the space is built over one.
    fn lattice(&self) -> Option<&LatticeSpec>;
    fn energy(&self, i: usize) -> u32;
    fn code(&self, i: usize) -> u64;
    fn index_of(&self, code: u64) -> Option<usize>;
    /// Appends the in-space single-flip neighbours of state `i`.
    fn neighbors_into(&self, i: usize, out: &mut Vec<usize>);
    fn max_energy(&self) -> u32;

    fn spins(&self, i: usize) -> Vec<u8> {
        self.codec().decode(self.code(i))
    }
    fn index_of_spins(&self, spins: &[u8]) -> Option<usize> {
        self.index_of(self.codec().encode(spins))
    }
    fn config(&self, i: usize) -> Result<SpinConfig> {
        let spec = self
            .lattice()
            .ok_or_else(|| Error::Unsupported("space is not built over a 3D box".into()))?;
        SpinConfig::new(*spec, self.spins(i))
    }
    fn index_of_config(&self, sigma: &SpinConfig) -> Option<usize> {
        self.index_of_spins(sigma.spins())
    }
    /// Indices of the monochromatic states present in the space, by spin.
    fn ground_states(&self) -> Vec<usize> {
        (1..=self.q()).filter_map(|a| self.index_of(self.codec().mono(a))).collect()
    }
}

/// Every configuration of a site graph; the index is the base-q code.
#[derive(Clone, Debug)]
pub struct FullSpace {
    graph: SiteGraph,
    codec: Codec,
    lattice: Option<LatticeSpec>,
    energies: Vec<u16>,
    max_energy: u32,
}

impl FullSpace {
    /// Enumerates `q^n` states, refusing above `limit`.
    pub fn new(graph: SiteGraph, q: u8, lattice: Option<LatticeSpec>, limit: u64) -> Result<Self> {
        let n = graph.n_sites();
        let needed = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if needed > limit as u128 {
            return Err(Error::Budget { what: "full enumeration states".into(), needed, limit: limit as u128 });
        }
        let codec = Codec::new(q, n)?;
        let size = codec.size() as usize;
        let mut energies = Vec::with_capacity(size);
        let mut spins = vec![1u8; n];
        let mut e = 0i64;
        for c in 0..size {
            energies.push(e as u16);
            if c + 1 == size {
                break;
            }
            // Base-q increment, tracking the energy through single-site deltas.
            for s in 0..n {
                let next = if spins[s] == q { 1 } else { spins[s] + 1 };
                e += graph.delta(&spins, s, next) as i64;
                spins[s] = next;
                if next != 1 {
                    break;
                }
            }
        }
        let max_energy = energies.iter().copied().max().unwrap_or(0) as u32;
        Ok(FullSpace { graph, codec, lattice, energies, max_energy })
    }

    /// All configurations of a 3D box.
    pub fn of_lattice(spec: &LatticeSpec, limit: u64) -> Result<Self> {
        FullSpace::new(spec.graph(), spec.q(), Some(*spec), limit)
    }

    pub fn energies(&self) -> &[u16] {
        &self.energies
    }
}

impl Space for FullSpace {
    fn len(&self) -> usize {
        self.energies.len()
    }
    fn q(&self) -> u8 {
        self.codec.q as u8
    }
    fn graph(&self) -> &SiteGraph {
        &self.graph
    }
    fn codec(&self) -> &Codec {
        &self.codec
    }
    fn lattice(&self) -> Option<&LatticeSpec> {
        self.lattice.as_ref()
    }
    #[inline]
    fn energy(&self, i: usize) -> u32 {
        self.energies[i] as u32
    }
    fn code(&self, i: usize) -> u64 {
        i as u64
    }
    fn index_of(&self, code: u64) -> Option<usize> {
        (code < self.codec.size()).then_some(code as usize)
    }
    fn neighbors_into(&self, i: usize, out: &mut Vec<usize>) {
        let q = self.codec.q;
        let c = i as u64;
        for s in 0..self.codec.n_sites() {
            let p = self.codec.pow[s];
            let d = (c / p) % q;
            for a in 0..q {
                if a != d {
                    out.push((c - d * p + a * p) as usize);
                }
            }
        }
    }
    fn max_energy(&self) -> u32 {
        self.max_energy
    }
}

/// States reachable from roots along paths that stay at or below a ceiling.
#[derive(Clone, Debug)]
pub struct CeilingSpace {
    graph: SiteGraph,
    codec: Codec,
    lattice: Option<LatticeSpec>,
    ceiling: u32,
    codes: Vec<u64>,
    energies: Vec<u16>,
    index: FxHashMap<u64, u32>,
    max_energy: u32,
}

impl CeilingSpace {
    /// Flood fill from `roots` (codes) under `ceiling`, skipping states for
    /// which `avoid` holds. Refuses once more than `limit` states are found.
    pub fn build(
        graph: SiteGraph,
        q: u8,
        lattice: Option<LatticeSpec>,
        roots: &[u64],
        ceiling: u32,
        avoid: Option<&dyn Fn(u64) -> bool>,
        limit: u64,
    ) -> Result<Self> {
        let n = graph.n_sites();
        let codec = Codec::new(q, n)?;
        let mut codes = Vec::new();
        let mut energies: Vec<u16> = Vec::new();
        let mut index = FxHashMap::default();
        let mut spins = vec![0u8; n];
        let blocked = |c: u64| avoid.is_some_and(|f| f(c));
        for &r in roots {
            codec.decode_into(r, &mut spins);
            let e = graph.energy(&spins);
            if e <= ceiling && !blocked(r) && !index.contains_key(&r) {
                index.insert(r, codes.len() as u32);
                codes.push(r);
                energies.push(e as u16);
            }
        }
        let mut head = 0;
        while head < codes.len() {
            let c = codes[head];
            let e = energies[head] as i64;
            head += 1;
            codec.decode_into(c, &mut spins);
            for s in 0..n {
                for a in 1..=q {
                    if a == spins[s] {
                        continue;
                    }
                    let e2 = e + graph.delta(&spins, s, a) as i64;
                    if e2 > ceiling as i64 {
                        continue;
                    }
                    let c2 = codec.with_spin(c, s, a);
                    if index.contains_key(&c2) || blocked(c2) {
                        continue;
                    }
                    if codes.len() as u64 >= limit {
                        return Err(Error::Budget {
                            what: format!("states under ceiling {ceiling}"),
                            needed: codes.len() as u128 + 1,
                            limit: limit as u128,
                        });
                    }
                    index.insert(c2, codes.len() as u32);
                    codes.push(c2);
                    energies.push(e2 as u16);
                }
            }
        }
        let max_energy = energies.iter().copied().max().unwrap_or(0) as u32;
        Ok(CeilingSpace { graph, codec, lattice, ceiling, codes, energies, index, max_energy })
    }

    /// Ceiling flood over a 3D box starting from all ground states.
    pub fn from_ground(spec: &LatticeSpec, ceiling: u32, limit: u64) -> Result<Self> {
        let codec = Codec::new(spec.q(), spec.n_sites())?;
        let roots: Vec<u64> = (1..=spec.q()).map(|a| codec.mono(a)).collect();
        CeilingSpace::build(spec.graph(), spec.q(), Some(*spec), &roots, ceiling, None, limit)
    }

    pub fn ceiling(&self) -> u32 {
        self.ceiling
    }
    pub fn codes(&self) -> &[u64] {
        &self.codes
    }
}

impl Space for CeilingSpace {
    fn len(&self) -> usize {
        self.codes.len()
    }
    fn q(&self) -> u8 {
        self.codec.q as u8
    }
    fn graph(&self) -> &SiteGraph {
        &self.graph
    }
    fn codec(&self) -> &Codec {
        &self.codec
    }
    fn lattice(&self) -> Option<&LatticeSpec> {
        self.lattice.as_ref()
    }
    #[inline]
    fn energy(&self, i: usize) -> u32 {
        self.energies[i] as u32
    }
    fn code(&self, i: usize) -> u64 {
        self.codes[i]
    }
    fn index_of(&self, code: u64) -> Option<usize> {
        self.index.get(&code).map(|&i| i as usize)
    }
    fn neighbors_into(&self, i: usize, out: &mut Vec<usize>) {
        let c = self.codes[i];
        let q = self.codec.q;
        for s in 0..self.codec.n_sites() {
            let p = self.codec.pow[s];
            let d = (c / p) % q;
            for a in 0..q {
                if a != d {
                    if let Some(&j) = self.index.get(&(c - d * p + a * p)) {
                        out.push(j as usize);
                    }
                }
            }
        }
    }
    fn max_energy(&self) -> u32 {
        self.max_energy
    }
}

/// Bottleneck heights from `sources`: for every state the least possible
/// maximum energy along a path from some source. States where `avoid` is set
/// are never entered. Energies are small integers, so a bucket queue gives a
/// linear-time search.
pub fn minimax<S: Space + ?Sized>(space: &S, sources: &[usize], avoid: Option<&[bool]>) -> Vec<u32> {
    minimax_until(space, sources, avoid, None)
}

fn minimax_until<S: Space + ?Sized>(
    space: &S,
    sources: &[usize],
    avoid: Option<&[bool]>,
    stop: Option<&[bool]>,
) -> Vec<u32> {
    let n = space.len();
    let mut dist = vec![UNREACHABLE; n];
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); space.max_energy() as usize + 1];
    let blocked = |i: usize| avoid.is_some_and(|a| a[i]);
    for &s in sources {
        if !blocked(s) && dist[s] == UNREACHABLE {
            dist[s] = space.energy(s);
            buckets[dist[s] as usize].push(s as u32);
        }
    }
    let mut nb = Vec::new();
    for level in 0..buckets.len() {
        while let Some(x) = buckets[level].pop() {
            let x = x as usize;
            if stop.is_some_and(|t| t[x]) {
                return dist;
            }
            nb.clear();
            space.neighbors_into(x, &mut nb);
            for &y in &nb {
                if dist[y] == UNREACHABLE && !blocked(y) {
                    let key = space.energy(y).max(level as u32);
                    dist[y] = key;
                    buckets[key as usize].push(y as u32);
                }
            }
        }
    }
    dist
}

/// Communication height between two sets of states, optionally avoiding a set.
pub fn comm_height_sets<S: Space + ?Sized>(
    space: &S,
    from: &[usize],
    to: &[usize],
    avoid: Option<&[bool]>,
) -> Option<u32> {
    let mut target = vec![false; space.len()];
    for &t in to {
        target[t] = true;
    }
    let d = minimax_until(space, from, avoid, Some(&target));
    to.iter().map(|&t| d[t]).filter(|&v| v != UNREACHABLE).min()
}

/// Communication height between two states; `None` when unreachable.
pub fn comm_height<S: Space + ?Sized>(space: &S, a: usize, b: usize, avoid: Option<&[bool]>) -> Option<u32> {
    comm_height_sets(space, &[a], &[b], avoid)
}

/// Brute-force energy barrier between the first two ground states.
pub fn barrier<S: Space + ?Sized>(space: &S) -> Result<u32> {
    let g = space.ground_states();
    if g.len() < 2 {
        return Err(Error::Input("space holds fewer than two ground states".into()));
    }
    comm_height(space, g[0], g[1], None)
        .ok_or_else(|| Error::Numerical("ground states are disconnected in this space".into()))
}

/// States reachable from `roots` along paths staying at or below `ceiling`
/// and outside `avoid`. Roots above the ceiling contribute nothing.
pub fn neighborhood<S: Space + ?Sized>(
    space: &S,
    roots: &[usize],
    ceiling: u32,
    avoid: Option<&[bool]>,
) -> Vec<bool> {
    let mut seen = vec![false; space.len()];
    let blocked = |i: usize| avoid.is_some_and(|a| a[i]);
    let mut stack: Vec<usize> = Vec::new();
    for &r in roots {
        if space.energy(r) <= ceiling && !blocked(r) && !seen[r] {
            seen[r] = true;
            stack.push(r);
        }
    }
    let mut nb = Vec::new();
    while let Some(x) = stack.pop() {
        nb.clear();
        space.neighbors_into(x, &mut nb);
        for &y in &nb {
            if !seen[y] && space.energy(y) <= ceiling && !blocked(y) {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

/// Labels of the connected components of `{H <= ceiling}`; `UNREACHABLE` above it.
pub fn components_below<S: Space + ?Sized>(space: &S, ceiling: u32) -> Vec<u32> {
    let n = space.len();
    let mut label = vec![UNREACHABLE; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    let mut nb = Vec::new();
    for s in 0..n {
        if label[s] != UNREACHABLE || space.energy(s) > ceiling {
            continue;
        }
        label[s] = next;
        stack.push(s);
        while let Some(x) = stack.pop() {
            nb.clear();
            space.neighbors_into(x, &mut nb);
            for &y in &nb {
                if label[y] == UNREACHABLE && space.energy(y) <= ceiling {
                    label[y] = next;
                    stack.push(y);
                }
            }
        }
        next += 1;
    }
    label
}

/// `Phi(sigma, ground) - H(sigma)` for every state; `None` if no ground state is reachable.
pub fn valley_depths<S: Space + ?Sized>(space: &S) -> Vec<Option<u32>> {
    let d = minimax(space, &space.ground_states(), None);
    d.iter()
        .enumerate()
        .map(|(i, &v)| (v != UNREACHABLE).then(|| v - space.energy(i)))
        .collect()
}

/// Largest valley depth over non-ground states with one maximiser.
#[derive(Clone, Debug, Serialize)]
pub struct DepthReport {
    pub max_depth: u32,
    pub argmax_code: u64,
    pub unreachable: usize,
}

pub fn max_valley_depth<S: Space + ?Sized>(space: &S) -> DepthReport {
    let ground = space.ground_states();
    let depths = valley_depths(space);
    let mut best = (0, 0u64);
    let mut unreachable = 0;
    for (i, d) in depths.iter().enumerate() {
        if ground.contains(&i) {
            continue;
        }
        match d {
            Some(d) if *d > best.0 => best = (*d, space.code(i)),
            Some(_) => {}
            None => unreachable += 1,
        }
    }
    DepthReport { max_depth: best.0, argmax_code: best.1, unreachable }
}

/// Indices of the members of a mask.
pub fn members(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
}

pub fn mask_of(n: usize, idx: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut m = vec![false; n];
    for i in idx {
        m[i] = true;
    }
    m
}

/// Set export: one JSON header line, then sorted codes one per line.
pub fn export_set<S: Space + ?Sized>(space: &S, mask: &[bool], header: &serde_json::Value) -> String {
    let mut codes: Vec<u64> = members(mask).into_iter().map(|i| space.code(i)).collect();
    codes.sort_unstable();
    let mut out = serde_json::to_string(header).unwrap_or_default();
    out.push('\n');
    for c in codes {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, FloorSpec};

    #[test]
    fn full_space_energies_match_direct() {
        let spec = LatticeSpec::open(2, 2, 2, 3).unwrap();
        let sp = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
        assert_eq!(sp.len(), 6561);
        for i in (0..sp.len()).step_by(37) {
            assert_eq!(sp.energy(i), spec.graph().energy(&sp.spins(i)));
        }
    }

    #[test]
    fn full_space_refuses_over_limit() {
        let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
        match FullSpace::of_lattice(&spec, 1000) {
            Err(Error::Budget { needed, .. }) => assert_eq!(needed, 4096),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn ceiling_space_agrees_with_flood_on_full() {
        let fs = FloorSpec::new(3, 3, Boundary::Periodic).unwrap();
        let full = FullSpace::new(fs.graph(), 2, None, 1 << 20).unwrap();
        let g = full.ground_states();
        let nb = neighborhood(&full, &g, 6, None);
        let roots: Vec<u64> = g.iter().map(|&i| full.code(i)).collect();
        let cs = CeilingSpace::build(fs.graph(), 2, None, &roots, 6, None, 1 << 20).unwrap();
        assert_eq!(cs.len(), members(&nb).len());
        for i in 0..cs.len() {
            assert!(nb[cs.code(i) as usize]);
        }
    }

    #[test]
    fn bottleneck_on_small_torus() {
        let fs = FloorSpec::new(3, 3, Boundary::Periodic).unwrap();
        let full = FullSpace::new(fs.graph(), 2, None, 1 << 20).unwrap();
        assert_eq!(barrier(&full).unwrap(), 8);
        let g = full.ground_states();
        assert_eq!(comm_height(&full, g[0], g[0], None), Some(0));
    }
}
