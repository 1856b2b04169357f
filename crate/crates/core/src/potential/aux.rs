//! The auxiliary edge chain, its capacity, and flows on it.
//!
//! Vertices are the states of one edge set at the saddle height together with
//! one representative per lower class. Two saddle states are joined with rate
//! one when adjacent; a saddle state and a representative are joined with
//! rate equal to the number of class members adjacent to the saddle state.
//! The uniform measure is invariant, so the chain is stored with weights
//! `1 / |V|` and conductances `r / |V|`.

use super::{equilibrium_potential, Equilibrium, ReversibleChain, SolveInfo, SolverBudget};
use crate::canon::{build_canonical, build_regular, FloorShape, GatewayContext, ShapedFloor, TorusArc};
use crate::error::{Error, Result};
use crate::landscape::typical::{EdgeSide, TypicalSets};
use crate::landscape::{Space, UNREACHABLE};
use crate::lattice::Orientation;
use rustc_hash::FxHashMap;
use serde::Serialize;

/// Auxiliary chain of one edge side.
#[derive(Clone, Debug)]
pub struct AuxChain {
    /// Space index of each vertex: saddle states first, then representatives.
    pub vertices: Vec<usize>,
    pub n_outer: usize,
    vertex_of: FxHashMap<usize, u32>,
    rep_of_class: FxHashMap<u32, u32>,
    gamma: u32,
    /// Undirected integer rates, keyed `(i, j)` with `i < j`.
    pub rates: FxHashMap<(u32, u32), u64>,
    /// Rates counted from the representative side disagree nowhere.
    pub reversible_exact: bool,
    /// Net integer rate flux vanishes at every vertex.
    pub flux_balanced: bool,
    /// Vertices of the ground states of the side.
    pub sources: Vec<u32>,
    /// Vertices of the seam slice.
    pub sinks: Vec<u32>,
    /// Low neighbours of saddle states that belong to no vertex class.
    pub dangling: usize,
    pub chain: ReversibleChain,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Builds the chain of `side` inside `space`.
pub fn build_aux_chain<S: Space + ?Sized>(space: &S, sets: &TypicalSets, side: &EdgeSide) -> Result<AuxChain> {
    let gamma = sets.gamma;
    let classes = &sets.classes;
    let mut vertices: Vec<usize> = side.outer.clone();
    let n_outer = vertices.len();
    vertices.extend(&side.reps);
    let nv = vertices.len();
    if nv == 0 {
        return Err(Error::Input("edge set is empty".into()));
    }
    let vertex_of: FxHashMap<usize, u32> = vertices.iter().enumerate().map(|(v, &i)| (i, v as u32)).collect();
    let rep_of_class: FxHashMap<u32, u32> =
        side.reps.iter().map(|&r| (classes[r], vertex_of[&r])).collect();

    let mut from_outer: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    let mut oo: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    let mut dangling = 0;
    let mut nb = Vec::new();
    for (v, &s) in side.outer.iter().enumerate() {
        nb.clear();
        space.neighbors_into(s, &mut nb);
        for &z in &nb {
            if space.energy(z) >= gamma {
                if let Some(&w) = vertex_of.get(&z) {
                    if (w as usize) < n_outer && w > v as u32 {
                        oo.insert((v as u32, w), 1);
                    }
                }
            } else if let Some(&w) = rep_of_class.get(&classes[z]) {
                *from_outer.entry((v as u32, w)).or_default() += 1;
            } else {
                dangling += 1;
            }
        }
    }
    // Recount the representative side by scanning class members.
    let mut from_inner: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    for z in 0..space.len() {
        let c = classes[z];
        if c == UNREACHABLE {
            continue;
        }
        let Some(&w) = rep_of_class.get(&c) else { continue };
        nb.clear();
        space.neighbors_into(z, &mut nb);
        for &s in &nb {
            if let Some(&v) = vertex_of.get(&s) {
                if (v as usize) < n_outer {
                    *from_inner.entry((v, w)).or_default() += 1;
                }
            }
        }
    }
    let reversible_exact = from_inner == from_outer;
    let mut net = vec![0i64; nv];
    let mut pairs: Vec<(u32, u32)> = from_outer.keys().chain(from_inner.keys()).copied().collect();
    pairs.sort_unstable();
    pairs.dedup();
    for (v, w) in pairs {
        let out = from_outer.get(&(v, w)).copied().unwrap_or(0) as i64;
        let back = from_inner.get(&(v, w)).copied().unwrap_or(0) as i64;
        net[v as usize] += out - back;
        net[w as usize] += back - out;
    }
    let flux_balanced = net.iter().all(|&x| x == 0);

    let mut rates = oo;
    for (&(v, w), &r) in &from_outer {
        rates.insert(key(v, w), r);
    }
    let mu = vec![1.0 / nv as f64; nv];
    let mut edges: Vec<(usize, usize, f64)> =
        rates.iter().map(|(&(i, j), &r)| (i as usize, j as usize, r as f64 / nv as f64)).collect();
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let chain = ReversibleChain::from_conductances(mu, &edges)?;
    let lookup = |idx: &[usize]| -> Vec<u32> {
        let mut v: Vec<u32> = idx
            .iter()
            .filter_map(|&i| vertex_of.get(&i).copied().or_else(|| rep_of_class.get(&classes[i]).copied()))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let sources = lookup(&side.ground);
    let sinks = lookup(&side.seam);
    Ok(AuxChain {
        vertices,
        n_outer,
        vertex_of,
        rep_of_class,
        gamma,
        rates,
        reversible_exact,
        flux_balanced,
        sources,
        sinks,
        dangling,
        chain,
    })
}

/// Headline numbers of an auxiliary chain and its capacity.
#[derive(Clone, Debug, Serialize)]
pub struct AuxSummary {
    pub n_vertices: usize,
    pub n_outer: usize,
    pub n_reps: usize,
    pub n_edges: usize,
    pub reversible_exact: bool,
    pub flux_balanced: bool,
    pub dangling: usize,
    /// Ground states and seam share a vertex, so the capacity is infinite.
    pub degenerate: bool,
    /// Capacity under the uniform probability measure.
    pub capacity: Option<f64>,
    /// `1 / (|V| cap)`, set to zero when degenerate.
    pub e_constant: f64,
    /// Largest `|h|` over saddle states of the hatted seam slice.
    pub seam_outer_max_h: Option<f64>,
    pub solve: Option<SolveInfo>,
}

impl AuxChain {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
    /// Projection of a space state onto the vertices.
    pub fn project<S: Space + ?Sized>(&self, space: &S, classes: &[u32], i: usize) -> Option<u32> {
        if space.energy(i) >= self.gamma {
            self.vertex_of.get(&i).copied().filter(|&v| (v as usize) < self.n_outer)
        } else {
            self.rep_of_class.get(&classes[i]).copied()
        }
    }
    pub fn rate(&self, a: u32, b: u32) -> u64 {
        self.rates.get(&key(a, b)).copied().unwrap_or(0)
    }

    /// Capacity between the ground and seam vertices, the edge constant and
    /// the potential itself (`None` when degenerate).
    pub fn analyse(&self, seam_hat: &[bool], budget: SolverBudget) -> Result<(AuxSummary, Option<Equilibrium>)> {
        let nv = self.len();
        let p = crate::landscape::mask_of(nv, self.sources.iter().map(|&v| v as usize));
        let q = crate::landscape::mask_of(nv, self.sinks.iter().map(|&v| v as usize));
        let degenerate = p.iter().zip(&q).any(|(&a, &b)| a && b) || self.sinks.is_empty() || self.sources.is_empty();
        let mut summary = AuxSummary {
            n_vertices: nv,
            n_outer: self.n_outer,
            n_reps: nv - self.n_outer,
            n_edges: self.rates.len(),
            reversible_exact: self.reversible_exact,
            flux_balanced: self.flux_balanced,
            dangling: self.dangling,
            degenerate,
            capacity: None,
            e_constant: 0.0,
            seam_outer_max_h: None,
            solve: None,
        };
        if degenerate {
            return Ok((summary, None));
        }
        let eq = equilibrium_potential(&self.chain, &p, &q, budget)?;
        summary.capacity = Some(eq.capacity);
        summary.e_constant = 1.0 / (nv as f64 * eq.capacity);
        summary.solve = Some(eq.solve);
        summary.seam_outer_max_h = self.vertices[..self.n_outer]
            .iter()
            .enumerate()
            .filter(|&(_, &i)| seam_hat[i])
            .map(|(v, _)| eq.h[v].abs())
            .reduce(f64::max);
        Ok((summary, Some(eq)))
    }
}

/// Antisymmetric edge function, stored once per unordered pair as the value
/// from the smaller to the larger vertex.
#[derive(Clone, Debug, Default)]
pub struct Flow {
    values: FxHashMap<(u32, u32), f64>,
}

/// Divergence audit of a flow against source and sink sets.
#[derive(Clone, Debug, Serialize)]
pub struct UnitFlowCheck {
    pub source_total: f64,
    pub sink_total: f64,
    pub max_interior: f64,
    pub is_unit: bool,
}

impl Flow {
    pub fn new() -> Self {
        Flow::default()
    }
    /// Builds a flow from directed values, rejecting pairs whose two
    /// directions are not negatives of each other.
    pub fn from_directed(entries: &[(u32, u32, f64)]) -> Result<Self> {
        let mut seen: FxHashMap<(u32, u32), f64> = FxHashMap::default();
        for &(x, y, v) in entries {
            if x == y {
                return Err(Error::Input(format!("flow on loop at {x}")));
            }
            seen.insert((x, y), v);
        }
        let mut f = Flow::new();
        for (&(x, y), &v) in &seen {
            if let Some(&w) = seen.get(&(y, x)) {
                if w != -v {
                    return Err(Error::Input(format!("flow is not antisymmetric on ({x}, {y})")));
                }
            }
            let s = if x < y { v } else { -v };
            f.values.insert(key(x, y), s);
        }
        Ok(f)
    }
    /// Adds `v` along `x -> y`.
    pub fn add(&mut self, x: u32, y: u32, v: f64) {
        if x == y {
            return;
        }
        let s = if x < y { v } else { -v };
        *self.values.entry(key(x, y)).or_default() += s;
    }
    /// Value along `x -> y`.
    pub fn get(&self, x: u32, y: u32) -> f64 {
        let v = self.values.get(&key(x, y)).copied().unwrap_or(0.0);
        if x < y {
            v
        } else {
            -v
        }
    }
    pub fn support(&self) -> usize {
        self.values.values().filter(|&&v| v != 0.0).count()
    }
    /// `sum_y phi(x, y)` for every vertex.
    pub fn divergence(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (&(x, y), &v) in &self.values {
            d[x as usize] += v;
            d[y as usize] -= v;
        }
        d
    }
    /// `sum phi^2 / (|V|^-1 r)` over the support; fails off the edge set.
    pub fn norm_sq(&self, aux: &AuxChain) -> Result<f64> {
        let nv = aux.len() as f64;
        let mut s = 0.0;
        for (&(x, y), &v) in &self.values {
            if v == 0.0 {
                continue;
            }
            let r = aux.rate(x, y);
            if r == 0 {
                return Err(Error::Input(format!("flow uses ({x}, {y}), which is not an edge")));
            }
            s += v * v * nv / r as f64;
        }
        Ok(s)
    }
    pub fn unit_check(&self, n: usize, sources: &[u32], sinks: &[u32], tol: f64) -> UnitFlowCheck {
        let d = self.divergence(n);
        let mut is_src = vec![false; n];
        let mut is_snk = vec![false; n];
        sources.iter().for_each(|&v| is_src[v as usize] = true);
        sinks.iter().for_each(|&v| is_snk[v as usize] = true);
        let source_total: f64 = sources.iter().map(|&v| d[v as usize]).sum();
        let sink_total: f64 = sinks.iter().map(|&v| d[v as usize]).sum();
        let max_interior = (0..n).filter(|&i| !is_src[i] && !is_snk[i]).map(|i| d[i].abs()).fold(0.0, f64::max);
        let is_unit = (source_total - 1.0).abs() <= tol && (sink_total + 1.0).abs() <= tol && max_interior <= tol;
        UnitFlowCheck { source_total, sink_total, max_interior, is_unit }
    }
}

/// Value carried by one ladder step, `1 / (2 K L M)`.
pub fn ladder_step_value(spec: &crate::lattice::LatticeSpec) -> f64 {
    1.0 / (2 * spec.k() * spec.l() * spec.m()) as f64
}

/// The ladder flow from the ground states of side `A` to its seam slice.
///
/// For each pair of floor arcs `P < Q` with `|P|` from `i_klm` to `m_K - 1`,
/// the active floor climbs band by band through the partial rows; each step
/// carries `1 / (2 K L M)`. The first and last bands are replaced by the
/// projections of the regular states of `P` and `Q`.
pub fn ladder_flow<S: Space + ?Sized>(
    space: &S,
    sets: &TypicalSets,
    aux: &AuxChain,
    ctx: &GatewayContext,
    i_klm: usize,
) -> Result<(Flow, usize)> {
    let spec = ctx.spec();
    let (kk, ll, mm) = (spec.k(), spec.l(), spec.m());
    let (a, b) = (sets.a_spins[0], sets.b_spins[0]);
    let value = ladder_step_value(spec);
    let arcs = TorusArc::all(mm, spec.boundary());
    let o = Orientation::Identity;
    let vertex = |sigma: &crate::lattice::SpinConfig| -> Result<u32> {
        let i = space
            .index_of_config(sigma)
            .ok_or_else(|| Error::Input("flow configuration missing from the space".into()))?;
        aux.project(space, &sets.classes, i)
            .ok_or_else(|| Error::Input(format!("flow configuration {i} is not an auxiliary vertex")))
    };
    let mut flow = Flow::new();
    let mut n_edges = 0;
    for r in i_klm..sets.m_k {
        for p in arcs.iter().filter(|p| p.len == r) {
            for q in arcs.iter().filter(|q| p.precedes(q)) {
                let bar_p = vertex(&build_regular(spec, a, b, p, o)?)?;
                let bar_q = vertex(&build_regular(spec, a, b, q, o)?)?;
                let node = |shape: FloorShape| -> Result<u32> {
                    match shape {
                        FloorShape::Plain { v: 1, .. } => Ok(bar_p),
                        FloorShape::Plain { v, .. } if v == ll - 1 => Ok(bar_q),
                        _ => vertex(&build_canonical(spec, a, b, p, q, ShapedFloor::rows(shape), o)?),
                    }
                };
                for l in 1..=ll {
                    for v in 1..=ll.saturating_sub(2) {
                        for k in 1..=kk {
                            let mut steps = vec![FloorShape::Plain { l, v }];
                            steps.extend((1..kk).map(|h| FloorShape::Plus { l, v, k, h }));
                            steps.push(FloorShape::Plain { l, v: v + 1 });
                            for w in steps.windows(2) {
                                flow.add(node(w[0])?, node(w[1])?, value);
                                n_edges += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((flow, n_edges))
}
