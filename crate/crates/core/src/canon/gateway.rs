//! Gateway floors and 3D gateway configurations.
//!
//! Floors are handled in a two-spin encoding: bit `i` of a floor code is set
//! when site `i` of the floor carries the spin `b`.

use super::{build_floor, mk_mk, present_spins, FloorShape, ShapedFloor, TorusArc};
use crate::error::{input, Error, Result};
use crate::landscape::{barrier, FullSpace};
use crate::lattice::{Boundary, FloorConfig, FloorSpec, LatticeSpec, Orientation, SiteGraph, SpinConfig};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use std::collections::VecDeque;

fn floor_bits(f: &FloorConfig, b: u8) -> u64 {
    f.spins.iter().enumerate().fold(0, |acc, (i, &s)| acc | (((s == b) as u64) << i))
}

fn bits_energy(g: &SiteGraph, bits: u64) -> u32 {
    g.bonds().iter().filter(|&&(i, j)| (bits >> i) & 1 != (bits >> j) & 1).count() as u32
}

/// The 2D gateway set of one floor geometry, split by type.
#[derive(Clone, Debug)]
pub struct GatewayFloors {
    spec: FloorSpec,
    gamma2d: u32,
    full: u64,
    /// Bulk floors outside the saddle level: regular bands of width `2..=L-2`.
    bulk_plain: FxHashSet<u64>,
    /// Bulk floors at the saddle level: bands of width `2..=L-3` with a partial row.
    bulk_gamma: FxHashSet<u64>,
    /// Saddle plateau reached from bands of width two (background `a`).
    z_ab: FxHashSet<u64>,
}

impl GatewayFloors {
    /// Builds the sets for a floor geometry and 2D saddle height.
    pub fn new(spec: FloorSpec, gamma2d: u32) -> Result<Self> {
        let n = spec.n_sites();
        if n > 63 {
            return Err(Error::Unsupported(format!("floors of {n} sites exceed the 2D encoding")));
        }
        let (kk, ll) = (spec.k, spec.l);
        let full = (1u64 << n) - 1;
        let square = kk == ll;
        let shapes_to_bits = |shape: FloorShape, set: &mut FxHashSet<u64>| -> Result<()> {
            for transposed in [false, true] {
                if transposed && !square {
                    continue;
                }
                let f = build_floor(spec, 1, 2, ShapedFloor { shape, transposed })?;
                set.insert(floor_bits(&f, 2));
            }
            Ok(())
        };
        let mut bulk_plain = FxHashSet::default();
        let mut bulk_gamma = FxHashSet::default();
        let mut roots = FxHashSet::default();
        for l in 1..=ll {
            for v in 2..=ll.saturating_sub(2) {
                shapes_to_bits(FloorShape::Plain { l, v }, &mut bulk_plain)?;
            }
            if ll >= 2 {
                shapes_to_bits(FloorShape::Plain { l, v: 2 }, &mut roots)?;
            }
            for v in 2..=ll.saturating_sub(3) {
                for k in 1..=kk {
                    for h in 1..kk {
                        shapes_to_bits(FloorShape::Plus { l, v, k, h }, &mut bulk_gamma)?;
                        shapes_to_bits(FloorShape::Minus { l, v, k, h }, &mut bulk_gamma)?;
                    }
                }
            }
        }
        let g = spec.graph();
        let avoided = |c: u64| bulk_gamma.contains(&c);
        let mut z_ab = FxHashSet::default();
        let mut queue = VecDeque::new();
        for &r in &roots {
            for i in 0..n {
                let c = r ^ (1 << i);
                if bits_energy(&g, c) == gamma2d && !avoided(c) && z_ab.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        while let Some(c) = queue.pop_front() {
            for i in 0..n {
                let d = c ^ (1 << i);
                if !z_ab.contains(&d) && !avoided(d) && bits_energy(&g, d) == gamma2d {
                    z_ab.insert(d);
                    queue.push_back(d);
                }
            }
        }
        Ok(GatewayFloors { spec, gamma2d, full, bulk_plain, bulk_gamma, z_ab })
    }

    pub fn spec(&self) -> FloorSpec {
        self.spec
    }
    pub fn gamma2d(&self) -> u32 {
        self.gamma2d
    }
    /// Gateway type of a floor code, if it is a gateway floor.
    pub fn floor_type(&self, bits: u64) -> Option<u8> {
        if self.bulk_plain.contains(&bits) {
            Some(1)
        } else if self.bulk_gamma.contains(&bits) {
            Some(2)
        } else if self.z_ab.contains(&bits) || self.z_ab.contains(&(bits ^ self.full)) {
            Some(3)
        } else {
            None
        }
    }
    /// Whether a floor code lies on the plateau grown from bands of width two.
    pub fn in_z_ab(&self, bits: u64) -> bool {
        self.z_ab.contains(&bits)
    }
    /// Every gateway floor code with its type, sorted by code.
    pub fn members(&self) -> Vec<(u64, u8)> {
        let mut all: FxHashMap<u64, u8> = FxHashMap::default();
        for &c in self.z_ab.iter() {
            all.insert(c, 3);
            all.insert(c ^ self.full, 3);
        }
        for &c in &self.bulk_gamma {
            all.insert(c, 2);
        }
        for &c in &self.bulk_plain {
            all.insert(c, 1);
        }
        let mut v: Vec<(u64, u8)> = all.into_iter().collect();
        v.sort_unstable();
        v
    }
    pub fn floor_config(&self, bits: u64, a: u8, b: u8) -> FloorConfig {
        let spins = (0..self.spec.n_sites()).map(|i| if (bits >> i) & 1 == 1 { b } else { a }).collect();
        FloorConfig { spec: self.spec, spins }
    }
}

/// Parameters and label of a gateway configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GatewayClass {
    pub a: u8,
    pub b: u8,
    pub p: TorusArc,
    pub q: TorusArc,
    /// 1, 2 or 3.
    pub kind: u8,
    pub orientation: Orientation,
    /// Floor index of `q \ p` in the unrotated frame.
    pub active_floor: usize,
    /// Two-spin code of the active floor.
    pub floor_bits: u64,
}

/// Everything needed to build and recognise 3D gateways on one box.
#[derive(Clone, Debug)]
pub struct GatewayContext {
    spec: LatticeSpec,
    m_k: usize,
    gamma: u32,
    floors: GatewayFloors,
}

impl GatewayContext {
    pub fn new(spec: LatticeSpec, gamma: u32, gamma2d: u32, m_k: usize) -> Result<Self> {
        let floors = GatewayFloors::new(spec.floor_spec(), gamma2d)?;
        Ok(GatewayContext { spec, m_k, gamma, floors })
    }

    /// Periodic boxes use the closed-form heights; open boxes use brute-force
    /// barriers of the floor and of the box (enumerated within `limit`).
    pub fn for_spec(spec: &LatticeSpec, limit: u64) -> Result<Self> {
        let (kk, ll) = (spec.k(), spec.l());
        let m_k = mk_mk(kk);
        match spec.boundary() {
            Boundary::Periodic => {
                let gamma = (2 * kk * ll + 2 * kk + 2) as u32;
                GatewayContext::new(*spec, gamma, (2 * kk + 2) as u32, m_k)
            }
            Boundary::Open => {
                let fs = spec.floor_spec();
                let g2 = barrier(&FullSpace::new(fs.graph(), 2, None, limit)?)?;
                let g3 = barrier(&FullSpace::of_lattice(&spec.with_q(2)?, limit)?)?;
                GatewayContext::new(*spec, g3, g2, m_k)
            }
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }
    pub fn m_k(&self) -> usize {
        self.m_k
    }
    pub fn gamma(&self) -> u32 {
        self.gamma
    }
    pub fn floors(&self) -> &GatewayFloors {
        &self.floors
    }
    /// Admissible sizes of the lower arc `p`.
    pub fn window(&self) -> (usize, usize) {
        (self.m_k.saturating_sub(1), self.spec.m().saturating_sub(self.m_k))
    }
    pub fn in_window(&self, i: usize) -> bool {
        let (lo, hi) = self.window();
        lo <= i && i <= hi
    }
    /// Window empty or too narrow for separated edge and bulk parts.
    pub fn degenerate(&self) -> bool {
        self.spec.m() < 2 * self.m_k + 1
    }

    /// All descriptors under which `sigma` is a gateway.
    pub fn classify_all(&self, sigma: &SpinConfig) -> Vec<GatewayClass> {
        let spins = present_spins(sigma.spins());
        if spins.len() != 2 || sigma.spec() != &self.spec {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut orients = self.spec.orientations();
        orients.sort();
        for o in orients {
            let Ok(tau) = sigma.orient(o.inverse()) else { continue };
            let floors = tau.floors();
            for (a, b) in [(spins[0], spins[1]), (spins[1], spins[0])] {
                if let Some(c) = self.classify_frame(&floors, a, b, o) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// First descriptor in the order (orientation, a, b).
    pub fn classify(&self, sigma: &SpinConfig) -> Option<GatewayClass> {
        self.classify_all(sigma).into_iter().next()
    }

    fn classify_frame(&self, floors: &[FloorConfig], a: u8, b: u8, o: Orientation) -> Option<GatewayClass> {
        let mm = self.spec.m();
        let mut mixed = None;
        let mut bmask = vec![false; mm];
        for (i, f) in floors.iter().enumerate() {
            let first = f.spins[0];
            if f.spins.iter().all(|&s| s == first) {
                bmask[i] = first == b;
            } else if mixed.replace(i).is_some() {
                return None;
            }
        }
        let m0 = mixed? + 1;
        let p = TorusArc::from_mask(&bmask)?;
        bmask[m0 - 1] = true;
        let q = TorusArc::from_mask(&bmask)?;
        if !p.precedes(&q) || !self.in_window(p.len) {
            return None;
        }
        if self.spec.boundary() == Boundary::Open && !(p.is_anchored() && q.is_anchored()) {
            return None;
        }
        let bits = floor_bits(&floors[m0 - 1], b);
        let kind = self.floors.floor_type(bits)?;
        Some(GatewayClass { a, b, p, q, kind, orientation: o, active_floor: m0, floor_bits: bits })
    }

    /// Builds the gateway with the given parameters.
    pub fn build(&self, a: u8, b: u8, p: &TorusArc, q: &TorusArc, bits: u64, o: Orientation) -> Result<SpinConfig> {
        let m0 = p.extra(q).ok_or_else(|| Error::Input("arcs are not nested with one extra floor".into()))?;
        if self.floors.floor_type(bits).is_none() {
            return input(format!("floor code {bits} is not a gateway floor"));
        }
        let fs = self.spec.floor_spec();
        let active = self.floors.floor_config(bits, a, b);
        let floors: Vec<FloorConfig> = (1..=self.spec.m())
            .map(|m| {
                if m == m0 {
                    active.clone()
                } else {
                    FloorConfig::monochrome(fs, if p.contains(m) { b } else { a })
                }
            })
            .collect();
        SpinConfig::from_floors(self.spec, &floors)?.orient(o)
    }

    /// Exhaustive construction over arcs in the window, gateway floors and
    /// orientations. Distinct configurations may repeat across descriptors.
    pub fn construct_all(&self, a: u8, b: u8) -> Result<Vec<(SpinConfig, GatewayClass)>> {
        let mm = self.spec.m();
        let arcs = TorusArc::all(mm, self.spec.boundary());
        let floors = self.floors.members();
        let mut out = Vec::new();
        for p in &arcs {
            if !self.in_window(p.len) {
                continue;
            }
            for q in arcs.iter().filter(|q| p.precedes(q)) {
                let m0 = p.extra(q).expect("nested");
                for &(bits, kind) in &floors {
                    for o in self.spec.orientations() {
                        let s = self.build(a, b, p, q, bits, o)?;
                        out.push((
                            s,
                            GatewayClass { a, b, p: *p, q: *q, kind, orientation: o, active_floor: m0, floor_bits: bits },
                        ));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy3d;

    #[test]
    fn small_torus_floor_types() {
        let fs = FloorSpec::new(3, 4, Boundary::Periodic).unwrap();
        let g = GatewayFloors::new(fs, 8).unwrap();
        let band = build_floor(fs, 1, 2, ShapedFloor::rows(FloorShape::Plain { l: 1, v: 2 })).unwrap();
        assert_eq!(g.floor_type(floor_bits(&band, 2)), Some(1));
        assert!(g.members().iter().all(|&(c, _)| c != 0));
    }

    #[test]
    fn gateway_energies_on_small_box() {
        let spec = LatticeSpec::periodic(3, 4, 8, 2).unwrap();
        let ctx = GatewayContext::for_spec(&spec, 1 << 20).unwrap();
        let all = ctx.construct_all(1, 2).unwrap();
        assert!(!all.is_empty());
        for (s, c) in &all {
            let e = energy3d(s);
            assert_eq!(e == ctx.gamma() - 2, c.kind == 1, "{c:?} has energy {e}");
            assert!(ctx.classify_all(s).iter().any(|d| d.kind == c.kind));
        }
    }
}
