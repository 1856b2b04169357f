//! Box geometry, site indexing, spin configurations and their floor/pillar views.
//!
//! Sites are 1-based triples `(k, l, m)`. The linear index runs `k` fastest,
//! then `l`, then `m`. Spins are stored as `1..=q`.

use crate::error::{input, Error, Result};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" | "torus" => Ok(Boundary::Periodic),
            "open" | "free" => Ok(Boundary::Open),
            other => input(format!("unknown boundary '{other}'")),
        }
    }
}

/// Box dimensions `K <= L <= M`, spin count and boundary condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    k: usize,
    l: usize,
    m: usize,
    q: u8,
    boundary: Boundary,
}

/// A lattice site with 1-based coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

impl Site {
    pub fn new(k: usize, l: usize, m: usize) -> Self {
        Site { k, l, m }
    }
}

impl LatticeSpec {
    pub fn new(k: usize, l: usize, m: usize, q: u8, boundary: Boundary) -> Result<Self> {
        if q < 2 {
            return input(format!("q must be at least 2, got {q}"));
        }
        if !(k <= l && l <= m) {
            return input(format!("dimensions must satisfy K <= L <= M, got {k}x{l}x{m}"));
        }
        let min = match boundary {
            Boundary::Periodic => 3,
            Boundary::Open => 2,
        };
        if k < min {
            return input(format!(
                "{} boundary needs K >= {min}, got K = {k}",
                boundary.as_str()
            ));
        }
        Ok(LatticeSpec { k, l, m, q, boundary })
    }

    pub fn periodic(k: usize, l: usize, m: usize, q: u8) -> Result<Self> {
        Self::new(k, l, m, q, Boundary::Periodic)
    }

    pub fn open(k: usize, l: usize, m: usize, q: u8) -> Result<Self> {
        Self::new(k, l, m, q, Boundary::Open)
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn l(&self) -> usize {
        self.l
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn q(&self) -> u8 {
        self.q
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn dims(&self) -> [usize; 3] {
        [self.k, self.l, self.m]
    }
    pub fn n_sites(&self) -> usize {
        self.k * self.l * self.m
    }

    pub fn with_q(&self, q: u8) -> Result<Self> {
        Self::new(self.k, self.l, self.m, q, self.boundary)
    }

    /// Geometry of one floor as a 2D box.
    pub fn floor_spec(&self) -> FloorSpec {
        FloorSpec { k: self.k, l: self.l, boundary: self.boundary }
    }

    pub fn contains(&self, x: Site) -> bool {
        (1..=self.k).contains(&x.k) && (1..=self.l).contains(&x.l) && (1..=self.m).contains(&x.m)
    }

    pub fn index(&self, x: Site) -> Result<usize> {
        if !self.contains(x) {
            return input(format!("site {x:?} outside {self}"));
        }
        Ok(self.index_unchecked(x))
    }

    #[inline]
    pub fn index_unchecked(&self, x: Site) -> usize {
        (x.k - 1) + self.k * (x.l - 1) + self.k * self.l * (x.m - 1)
    }

    #[inline]
    pub fn site(&self, idx: usize) -> Site {
        let k = idx % self.k;
        let l = (idx / self.k) % self.l;
        let m = idx / (self.k * self.l);
        Site { k: k + 1, l: l + 1, m: m + 1 }
    }

    /// Nearest neighbours, wrapping around only under periodic boundary.
    pub fn neighbors(&self, x: Site) -> Result<Vec<Site>> {
        if !self.contains(x) {
            return input(format!("site {x:?} outside {self}"));
        }
        let idx = self.index_unchecked(x);
        Ok(self.neighbor_indices(idx).into_iter().map(|j| self.site(j)).collect())
    }

    pub fn neighbor_indices(&self, idx: usize) -> Vec<usize> {
        let c = [idx % self.k, (idx / self.k) % self.l, idx / (self.k * self.l)];
        let dims = self.dims();
        let strides = [1, self.k, self.k * self.l];
        let mut out = Vec::with_capacity(6);
        for axis in 0..3 {
            for step in [-1isize, 1] {
                let n = dims[axis] as isize;
                let v = c[axis] as isize + step;
                let w = match self.boundary {
                    Boundary::Periodic => v.rem_euclid(n),
                    Boundary::Open if v < 0 || v >= n => continue,
                    Boundary::Open => v,
                };
                let j = idx as isize + (w - c[axis] as isize) * strides[axis] as isize;
                out.push(j as usize);
            }
        }
        out
    }

    /// Compact adjacency for hot loops.
    pub fn graph(&self) -> SiteGraph {
        SiteGraph::from_fn(self.n_sites(), |i| self.neighbor_indices(i))
    }

    /// Axis-coordinate permutations allowed by the equal dimensions of the box.
    pub fn orientations(&self) -> Vec<Orientation> {
        use Orientation::*;
        let (kl, lm) = (self.k == self.l, self.l == self.m);
        match (kl, lm) {
            (false, false) => vec![Identity],
            (true, false) => vec![Identity, Swap12],
            (false, true) => vec![Identity, Swap23],
            (true, true) => vec![Identity, Swap12, Swap23, Swap13, Swap12After23, Swap23After12],
        }
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{} q={} {}", self.k, self.l, self.m, self.q, self.boundary.as_str())
    }
}

/// Geometry of a 2D `K x L` box (a floor).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FloorSpec {
    pub k: usize,
    pub l: usize,
    pub boundary: Boundary,
}

impl FloorSpec {
    pub fn new(k: usize, l: usize, boundary: Boundary) -> Result<Self> {
        if k > l {
            return input(format!("floor dimensions must satisfy K <= L, got {k}x{l}"));
        }
        let min = if boundary == Boundary::Periodic { 3 } else { 1 };
        if k < min {
            return input(format!("{} floor needs K >= {min}", boundary.as_str()));
        }
        Ok(FloorSpec { k, l, boundary })
    }
    pub fn n_sites(&self) -> usize {
        self.k * self.l
    }
    pub fn neighbor_indices(&self, idx: usize) -> Vec<usize> {
        let (ck, cl) = (idx % self.k, idx / self.k);
        let mut out = Vec::with_capacity(4);
        for (axis, n) in [(0, self.k), (1, self.l)] {
            for step in [-1isize, 1] {
                let c = if axis == 0 { ck } else { cl } as isize;
                let v = c + step;
                let w = match self.boundary {
                    Boundary::Periodic => v.rem_euclid(n as isize),
                    Boundary::Open if v < 0 || v >= n as isize => continue,
                    Boundary::Open => v,
                } as usize;
                out.push(if axis == 0 { w + self.k * cl } else { ck + self.k * w });
            }
        }
        out
    }
    pub fn graph(&self) -> SiteGraph {
        SiteGraph::from_fn(self.n_sites(), |i| self.neighbor_indices(i))
    }
}

/// Adjacency lists of a finite site graph in CSR form plus its bond list.
#[derive(Clone, Debug)]
pub struct SiteGraph {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    bonds: Vec<(u32, u32)>,
}

impl SiteGraph {
    pub fn from_fn(n: usize, mut nbrs: impl FnMut(usize) -> Vec<usize>) -> Self {
        let mut offsets = vec![0u32];
        let mut targets = Vec::new();
        let mut bonds = Vec::new();
        for i in 0..n {
            let mut v = nbrs(i);
            v.sort_unstable();
            v.dedup();
            for &j in &v {
                targets.push(j as u32);
                if i < j {
                    bonds.push((i as u32, j as u32));
                }
            }
            offsets.push(targets.len() as u32);
        }
        SiteGraph { offsets, targets, bonds }
    }
    pub fn n_sites(&self) -> usize {
        self.offsets.len() - 1
    }
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
    pub fn bonds(&self) -> &[(u32, u32)] {
        &self.bonds
    }
    pub fn max_degree(&self) -> usize {
        (0..self.n_sites()).map(|i| self.neighbors(i).len()).max().unwrap_or(0)
    }
    /// Number of disagreeing bonds.
    pub fn energy(&self, spins: &[u8]) -> u32 {
        self.bonds.iter().filter(|&&(a, b)| spins[a as usize] != spins[b as usize]).count() as u32
    }
    /// Energy change when site `i` takes value `a`.
    #[inline]
    pub fn delta(&self, spins: &[u8], i: usize, a: u8) -> i32 {
        let old = spins[i];
        if old == a {
            return 0;
        }
        let mut d = 0i32;
        for &j in self.neighbors(i) {
            let s = spins[j as usize];
            d += (s == old) as i32 - (s == a) as i32;
        }
        d
    }
}

/// Coordinate permutations used to build symmetric images of configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Identity,
    Swap12,
    Swap23,
    Swap13,
    /// `Swap12` applied after `Swap23`.
    Swap12After23,
    /// `Swap23` applied after `Swap12`.
    Swap23After12,
}

impl Orientation {
    /// `(theta sigma)(x) = sigma(y)` with `y[i] = x[perm[i]]`.
    pub fn perm(self) -> [usize; 3] {
        match self {
            Orientation::Identity => [0, 1, 2],
            Orientation::Swap12 => [1, 0, 2],
            Orientation::Swap23 => [0, 2, 1],
            Orientation::Swap13 => [2, 1, 0],
            Orientation::Swap12After23 => [1, 2, 0],
            Orientation::Swap23After12 => [2, 0, 1],
        }
    }
    pub fn inverse(self) -> Orientation {
        match self {
            Orientation::Swap12After23 => Orientation::Swap23After12,
            Orientation::Swap23After12 => Orientation::Swap12After23,
            o => o,
        }
    }
    pub fn all() -> [Orientation; 6] {
        use Orientation::*;
        [Identity, Swap12, Swap23, Swap13, Swap12After23, Swap23After12]
    }
}

/// Elementary axis swaps accepted by [`SpinConfig::permute`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisSwap {
    S12,
    S23,
    S13,
}

/// A full spin assignment on a box.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    spec: LatticeSpec,
    spins: Vec<u8>,
}

impl SpinConfig {
    pub fn new(spec: LatticeSpec, spins: Vec<u8>) -> Result<Self> {
        if spins.len() != spec.n_sites() {
            return input(format!("expected {} spins, got {}", spec.n_sites(), spins.len()));
        }
        if let Some(bad) = spins.iter().find(|&&s| s < 1 || s > spec.q) {
            return input(format!("spin {bad} outside 1..={}", spec.q));
        }
        Ok(SpinConfig { spec, spins })
    }

    pub fn monochrome(spec: LatticeSpec, a: u8) -> Result<Self> {
        if a < 1 || a > spec.q {
            return input(format!("spin {a} outside 1..={}", spec.q));
        }
        Ok(SpinConfig { spec, spins: vec![a; spec.n_sites()] })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }
    pub fn spins(&self) -> &[u8] {
        &self.spins
    }
    pub fn into_spins(self) -> Vec<u8> {
        self.spins
    }

    pub fn get(&self, x: Site) -> Result<u8> {
        Ok(self.spins[self.spec.index(x)?])
    }
    #[inline]
    pub fn at(&self, k: usize, l: usize, m: usize) -> u8 {
        self.spins[self.spec.index_unchecked(Site { k, l, m })]
    }

    /// The configuration with the spin at `x` replaced by `a`.
    pub fn flip(&self, x: Site, a: u8) -> Result<Self> {
        if a < 1 || a > self.spec.q {
            return input(format!("spin {a} outside 1..={}", self.spec.q));
        }
        let i = self.spec.index(x)?;
        let mut spins = self.spins.clone();
        spins[i] = a;
        Ok(SpinConfig { spec: self.spec, spins })
    }

    pub fn set_index(&mut self, i: usize, a: u8) {
        self.spins[i] = a;
    }

    /// `Some(a)` iff every site carries spin `a`.
    pub fn is_ground(&self) -> Option<u8> {
        let a = self.spins[0];
        self.spins.iter().all(|&s| s == a).then_some(a)
    }

    pub fn floor(&self, m: usize) -> FloorConfig {
        let kl = self.spec.k * self.spec.l;
        let start = kl * (m - 1);
        FloorConfig {
            spec: self.spec.floor_spec(),
            spins: self.spins[start..start + kl].to_vec(),
        }
    }

    pub fn floors(&self) -> Vec<FloorConfig> {
        (1..=self.spec.m).map(|m| self.floor(m)).collect()
    }

    pub fn pillar(&self, k: usize, l: usize) -> PillarConfig {
        PillarConfig {
            boundary: self.spec.boundary,
            spins: (1..=self.spec.m).map(|m| self.at(k, l, m)).collect(),
        }
    }

    pub fn from_floors(spec: LatticeSpec, floors: &[FloorConfig]) -> Result<Self> {
        if floors.len() != spec.m || floors.iter().any(|f| f.spins.len() != spec.k * spec.l) {
            return input("floor list does not match the box");
        }
        let spins = floors.iter().flat_map(|f| f.spins.iter().copied()).collect();
        Self::new(spec, spins)
    }

    /// Inverse of [`SpinConfig::pillar`]: pillars listed with `k` fastest.
    pub fn from_pillars(spec: LatticeSpec, pillars: &[PillarConfig]) -> Result<Self> {
        if pillars.len() != spec.k * spec.l || pillars.iter().any(|p| p.spins.len() != spec.m) {
            return input("pillar list does not match the box");
        }
        let mut spins = vec![0u8; spec.n_sites()];
        for (p, pillar) in pillars.iter().enumerate() {
            for (mi, &s) in pillar.spins.iter().enumerate() {
                spins[p + spec.k * spec.l * mi] = s;
            }
        }
        Self::new(spec, spins)
    }

    pub fn count(&self, a: u8) -> usize {
        self.spins.iter().filter(|&&s| s == a).count()
    }

    /// Image under a coordinate permutation. Only allowed when the permuted
    /// dimensions agree.
    pub fn orient(&self, o: Orientation) -> Result<Self> {
        let p = o.perm();
        let d = self.spec.dims();
        if (0..3).any(|i| d[i] != d[p[i]]) {
            return input(format!("orientation {o:?} not allowed on {}", self.spec));
        }
        let mut spins = vec![0u8; self.spins.len()];
        for (idx, slot) in spins.iter_mut().enumerate() {
            let x = self.spec.site(idx);
            let c = [x.k, x.l, x.m];
            let y = Site { k: c[p[0]], l: c[p[1]], m: c[p[2]] };
            *slot = self.spins[self.spec.index_unchecked(y)];
        }
        Ok(SpinConfig { spec: self.spec, spins })
    }

    pub fn permute(&self, swap: AxisSwap) -> Result<Self> {
        self.orient(match swap {
            AxisSwap::S12 => Orientation::Swap12,
            AxisSwap::S23 => Orientation::Swap23,
            AxisSwap::S13 => Orientation::Swap13,
        })
    }

    /// Distinct images under the allowed orientations, sorted by spins.
    pub fn upsilon_orbit(&self) -> Vec<SpinConfig> {
        let mut out: Vec<SpinConfig> = self
            .spec
            .orientations()
            .into_iter()
            .map(|o| self.orient(o).expect("allowed orientation"))
            .collect();
        out.sort_by(|a, b| a.spins.cmp(&b.spins));
        out.dedup();
        out
    }

    /// Base-q code with site 0 as least significant digit, if it fits in 64 bits.
    pub fn code(&self) -> Option<u64> {
        encode_u64(&self.spins, self.spec.q)
    }

    pub fn from_code(spec: LatticeSpec, code: u64) -> Result<Self> {
        let spins = decode_u64(code, spec.q, spec.n_sites())?;
        Ok(SpinConfig { spec, spins })
    }

    pub fn big_code(&self) -> BigUint {
        let q = BigUint::from(self.spec.q);
        let mut acc = BigUint::from(0u8);
        for &s in self.spins.iter().rev() {
            acc = acc * &q + BigUint::from(s - 1);
        }
        acc
    }

    pub fn from_big_code(spec: LatticeSpec, code: &BigUint) -> Result<Self> {
        let digits = code.to_radix_le(spec.q as u32);
        if digits.len() > spec.n_sites() {
            return input("code exceeds the configuration space");
        }
        let mut spins = vec![1u8; spec.n_sites()];
        for (i, d) in digits.into_iter().enumerate() {
            spins[i] = d + 1;
        }
        Ok(SpinConfig { spec, spins })
    }

    /// Decimal string of the base-q code.
    pub fn to_compact(&self) -> String {
        self.big_code().to_str_radix(10)
    }

    pub fn from_compact(spec: LatticeSpec, s: &str) -> Result<Self> {
        let code = BigUint::parse_bytes(s.trim().as_bytes(), 10)
            .ok_or_else(|| Error::Input(format!("not a decimal code: {s}")))?;
        Self::from_big_code(spec, &code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ConfigJson::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: ConfigJson = serde_json::from_str(s)?;
        j.try_into()
    }
}

/// Wire form of a configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigJson {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub q: u8,
    pub boundary: Boundary,
    pub spins: Vec<u8>,
}

impl From<&SpinConfig> for ConfigJson {
    fn from(c: &SpinConfig) -> Self {
        ConfigJson {
            k: c.spec.k,
            l: c.spec.l,
            m: c.spec.m,
            q: c.spec.q,
            boundary: c.spec.boundary,
            spins: c.spins.clone(),
        }
    }
}

impl TryFrom<ConfigJson> for SpinConfig {
    type Error = Error;
    fn try_from(j: ConfigJson) -> Result<Self> {
        let spec = LatticeSpec::new(j.k, j.l, j.m, j.q, j.boundary)?;
        SpinConfig::new(spec, j.spins)
    }
}

pub(crate) fn encode_u64(spins: &[u8], q: u8) -> Option<u64> {
    let mut acc: u64 = 0;
    for &s in spins.iter().rev() {
        acc = acc.checked_mul(q as u64)?.checked_add((s - 1) as u64)?;
    }
    Some(acc)
}

pub(crate) fn decode_u64(mut code: u64, q: u8, n: usize) -> Result<Vec<u8>> {
    let mut spins = Vec::with_capacity(n);
    for _ in 0..n {
        spins.push((code % q as u64) as u8 + 1);
        code /= q as u64;
    }
    if code != 0 {
        return input("code exceeds the configuration space");
    }
    Ok(spins)
}

/// A 2D configuration on one floor, `k` fastest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FloorConfig {
    pub spec: FloorSpec,
    pub spins: Vec<u8>,
}

impl FloorConfig {
    pub fn new(spec: FloorSpec, spins: Vec<u8>) -> Result<Self> {
        if spins.len() != spec.n_sites() {
            return input("floor spin count mismatch");
        }
        Ok(FloorConfig { spec, spins })
    }
    pub fn monochrome(spec: FloorSpec, a: u8) -> Self {
        FloorConfig { spec, spins: vec![a; spec.n_sites()] }
    }
    #[inline]
    pub fn at(&self, k: usize, l: usize) -> u8 {
        self.spins[(k - 1) + self.spec.k * (l - 1)]
    }
    pub fn set(&mut self, k: usize, l: usize, a: u8) {
        self.spins[(k - 1) + self.spec.k * (l - 1)] = a;
    }
    pub fn count(&self, a: u8) -> usize {
        self.spins.iter().filter(|&&s| s == a).count()
    }
    /// Transpose, defined for square floors.
    pub fn transpose(&self) -> Option<Self> {
        if self.spec.k != self.spec.l {
            return None;
        }
        let n = self.spec.k;
        let mut spins = vec![0u8; n * n];
        for k in 0..n {
            for l in 0..n {
                spins[k + n * l] = self.spins[l + n * k];
            }
        }
        Some(FloorConfig { spec: self.spec, spins })
    }
}

/// The spins along one pillar `(k, l)`, bottom to top.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PillarConfig {
    pub boundary: Boundary,
    pub spins: Vec<u8>,
}

impl PillarConfig {
    pub fn is_monochrome(&self) -> Option<u8> {
        let a = self.spins[0];
        self.spins.iter().all(|&s| s == a).then_some(a)
    }
}
