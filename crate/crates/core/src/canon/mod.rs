//! Explicit configuration families and paths: arcs of floors, 2D row
//! shapes, regular and canonical configurations, canonical and escape paths.
//!
//! Gateway sets and their classifier live in [`gateway`].

pub mod gateway;

pub use gateway::{GatewayClass, GatewayContext, GatewayFloors};

use crate::energy::{energy3d, flip_delta_index};
use crate::error::{input, Error, Result};
use crate::lattice::{Boundary, FloorConfig, FloorSpec, LatticeSpec, Orientation, Site, SpinConfig};
use serde::{Deserialize, Serialize};

/// Largest `t` with `t^3 <= K^2`, i.e. the integer part of `K^(2/3)`.
pub fn mk_mk(k: usize) -> usize {
    let k2 = (k as u128) * (k as u128);
    let mut t = (k2 as f64).cbrt() as u128;
    while t * t * t > k2 {
        t -= 1;
    }
    while (t + 1).pow(3) <= k2 {
        t += 1;
    }
    t as usize
}

/// Integer square root.
pub fn isqrt(k: usize) -> usize {
    let mut t = (k as f64).sqrt() as usize;
    while t * t > k {
        t -= 1;
    }
    while (t + 1) * (t + 1) <= k {
        t += 1;
    }
    t
}

/// A connected set of `len` consecutive indices on a cycle of size `n`,
/// starting at `start` (1-based). Empty and full arcs use `start = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusArc {
    pub start: usize,
    pub len: usize,
    pub n: usize,
}

impl TorusArc {
    pub fn new(start: usize, len: usize, n: usize) -> Result<Self> {
        if n == 0 || len > n || !(1..=n).contains(&start) {
            return input(format!("invalid arc start={start} len={len} on {n}"));
        }
        let start = if len == 0 || len == n { 1 } else { start };
        Ok(TorusArc { start, len, n })
    }
    pub fn empty(n: usize) -> Self {
        TorusArc { start: 1, len: 0, n }
    }
    /// The interval `[1, len]`.
    pub fn prefix(len: usize, n: usize) -> Self {
        TorusArc { start: 1, len, n }
    }
    pub fn contains(&self, m: usize) -> bool {
        self.len > 0 && (m + self.n - self.start) % self.n < self.len
    }
    pub fn members(&self) -> Vec<usize> {
        (0..self.len).map(|i| (self.start - 1 + i) % self.n + 1).collect()
    }
    /// Last member, if any.
    pub fn end(&self) -> Option<usize> {
        (self.len > 0).then(|| (self.start + self.len - 2) % self.n + 1)
    }
    /// `self ⊂ other` with exactly one extra element.
    pub fn precedes(&self, other: &TorusArc) -> bool {
        self.n == other.n
            && other.len == self.len + 1
            && self.members().iter().all(|&m| other.contains(m))
    }
    /// The single element of `other \ self` when `self` precedes `other`.
    pub fn extra(&self, other: &TorusArc) -> Option<usize> {
        if !self.precedes(other) {
            return None;
        }
        other.members().into_iter().find(|&m| !self.contains(m))
    }
    /// Intervals containing an end of the segment `[1, n]` (or empty/full).
    pub fn is_anchored(&self) -> bool {
        self.len == 0 || self.len == self.n || self.contains(1) && !self.contains(self.n) || self.contains(self.n) && !self.contains(1)
    }
    /// Arcs admitted by the boundary condition: every arc on a cycle, or the
    /// anchored intervals of a segment.
    pub fn all(n: usize, boundary: Boundary) -> Vec<TorusArc> {
        let mut v = vec![TorusArc::empty(n)];
        for len in 1..n {
            match boundary {
                Boundary::Periodic => v.extend((1..=n).map(|s| TorusArc { start: s, len, n })),
                Boundary::Open => {
                    v.push(TorusArc { start: 1, len, n });
                    v.push(TorusArc { start: n - len + 1, len, n });
                }
            }
        }
        v.push(TorusArc { start: 1, len: n, n });
        v
    }
    /// Arc with exactly the set members of `mask` (index `m - 1`), if connected.
    pub fn from_mask(mask: &[bool]) -> Option<TorusArc> {
        let n = mask.len();
        let c = mask.iter().filter(|&&b| b).count();
        if c == 0 || c == n {
            return Some(TorusArc { start: 1, len: c, n });
        }
        let starts: Vec<usize> = (0..n).filter(|&i| mask[i] && !mask[(i + n - 1) % n]).collect();
        (starts.len() == 1).then(|| TorusArc { start: starts[0] + 1, len: c, n })
    }
    fn admitted(&self, boundary: Boundary) -> bool {
        boundary == Boundary::Periodic || self.is_anchored()
    }
}

/// Row-based 2D shapes: `b` on `v` consecutive rows from row `l`, optionally
/// with `h` extra `b` sites from column `k` on the row above (`Plus`) or
/// below (`Minus`) that band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FloorShape {
    Plain { l: usize, v: usize },
    Plus { l: usize, v: usize, k: usize, h: usize },
    Minus { l: usize, v: usize, k: usize, h: usize },
}

/// A floor shape, possibly transposed (square floors only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShapedFloor {
    pub shape: FloorShape,
    pub transposed: bool,
}

impl ShapedFloor {
    pub fn rows(shape: FloorShape) -> Self {
        ShapedFloor { shape, transposed: false }
    }
}

impl FloorShape {
    pub fn validate(&self, fs: &FloorSpec) -> Result<()> {
        let (kk, ll) = (fs.k, fs.l);
        let ok = match *self {
            FloorShape::Plain { l, v } => (1..=ll).contains(&l) && v <= ll,
            FloorShape::Plus { l, v, k, h } | FloorShape::Minus { l, v, k, h } => {
                (1..=ll).contains(&l) && v < ll && (1..=kk).contains(&k) && h <= kk
            }
        };
        if ok {
            Ok(())
        } else {
            input(format!("floor shape {self:?} out of range for {kk}x{ll}"))
        }
    }

    /// Whether the shape lies in the canonical family (extra row strictly partial).
    pub fn is_canonical(&self) -> bool {
        match *self {
            FloorShape::Plain { .. } => true,
            FloorShape::Plus { h, .. } | FloorShape::Minus { h, .. } => h >= 1,
        }
    }
}

/// Builds the 2D configuration of a shape with spins `a` (background) and `b`.
pub fn build_floor(fs: FloorSpec, a: u8, b: u8, floor: ShapedFloor) -> Result<FloorConfig> {
    floor.shape.validate(&fs)?;
    if floor.transposed && fs.k != fs.l {
        return input("transposed shapes need a square floor");
    }
    let (kk, ll) = (fs.k, fs.l);
    let mut f = FloorConfig::monochrome(fs, a);
    let row = |l0: usize, off: isize| ((l0 as isize - 1 + off).rem_euclid(ll as isize)) as usize + 1;
    let (l0, v) = match floor.shape {
        FloorShape::Plain { l, v } | FloorShape::Plus { l, v, .. } | FloorShape::Minus { l, v, .. } => (l, v),
    };
    for i in 0..v {
        for k in 1..=kk {
            f.set(k, row(l0, i as isize), b);
        }
    }
    let extra = match floor.shape {
        FloorShape::Plain { .. } => None,
        FloorShape::Plus { k, h, .. } => Some((row(l0, v as isize), k, h)),
        FloorShape::Minus { k, h, .. } => Some((row(l0, -1), k, h)),
    };
    if let Some((r, k0, h)) = extra {
        for j in 0..h {
            f.set((k0 - 1 + j) % kk + 1, r, b);
        }
    }
    if floor.transposed {
        f = f.transpose().expect("square floor");
    }
    Ok(f)
}

fn cyclic_arc(bits: &[bool]) -> Option<(usize, usize)> {
    TorusArc::from_mask(bits).map(|a| (a.start, a.len))
}

fn recognize_rows(f: &FloorConfig, a: u8, b: u8) -> Option<FloorShape> {
    let (kk, ll) = (f.spec.k, f.spec.l);
    if f.spins.iter().any(|&s| s != a && s != b) {
        return None;
    }
    let counts: Vec<usize> = (1..=ll).map(|l| (1..=kk).filter(|&k| f.at(k, l) == b).count()).collect();
    let full: Vec<bool> = counts.iter().map(|&c| c == kk).collect();
    let partial: Vec<usize> = (0..ll).filter(|&i| counts[i] > 0 && counts[i] < kk).collect();
    let (start, v) = cyclic_arc(&full)?;
    match partial.as_slice() {
        [] => Some(FloorShape::Plain { l: start, v }),
        [r] => {
            let r = r + 1;
            let bits: Vec<bool> = (1..=kk).map(|k| f.at(k, r) == b).collect();
            let (k, h) = cyclic_arc(&bits)?;
            if v == 0 {
                return Some(FloorShape::Plus { l: r, v: 0, k, h });
            }
            let after = (start - 1 + v) % ll + 1;
            let before = (start + ll - 2) % ll + 1;
            if r == after {
                Some(FloorShape::Plus { l: start, v, k, h })
            } else if r == before {
                Some(FloorShape::Minus { l: start, v, k, h })
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Inverse of [`build_floor`] for canonical shapes; rows tried before columns.
pub fn recognize_floor(f: &FloorConfig, a: u8, b: u8) -> Option<ShapedFloor> {
    if let Some(s) = recognize_rows(f, a, b) {
        return Some(ShapedFloor { shape: s, transposed: false });
    }
    let t = f.transpose()?;
    recognize_rows(&t, a, b).map(|s| ShapedFloor { shape: s, transposed: true })
}

fn check_spins(spec: &LatticeSpec, a: u8, b: u8) -> Result<()> {
    let q = spec.q();
    if a == b || !(1..=q).contains(&a) || !(1..=q).contains(&b) {
        return input(format!("spins must be distinct values in 1..={q}, got {a},{b}"));
    }
    Ok(())
}

fn check_orientation(spec: &LatticeSpec, o: Orientation) -> Result<()> {
    if spec.orientations().contains(&o) {
        Ok(())
    } else {
        input(format!("orientation {o:?} not allowed on {spec}"))
    }
}

/// `b` on the floors of `p`, `a` elsewhere, then mapped by `o`.
pub fn build_regular(spec: &LatticeSpec, a: u8, b: u8, p: &TorusArc, o: Orientation) -> Result<SpinConfig> {
    check_spins(spec, a, b)?;
    check_orientation(spec, o)?;
    if p.n != spec.m() {
        return input("arc length does not match M");
    }
    let fs = spec.floor_spec();
    let floors: Vec<FloorConfig> =
        (1..=spec.m()).map(|m| FloorConfig::monochrome(fs, if p.contains(m) { b } else { a })).collect();
    SpinConfig::from_floors(*spec, &floors)?.orient(o)
}

/// Parameters of a canonical configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalDescriptor {
    pub a: u8,
    pub b: u8,
    pub p: TorusArc,
    pub q: TorusArc,
    pub floor: ShapedFloor,
    pub orientation: Orientation,
}

/// `b` on floors of `p`, `a` outside `q`, the shaped floor on `q \ p`, then mapped by `o`.
pub fn build_canonical(
    spec: &LatticeSpec,
    a: u8,
    b: u8,
    p: &TorusArc,
    q: &TorusArc,
    floor: ShapedFloor,
    o: Orientation,
) -> Result<SpinConfig> {
    check_spins(spec, a, b)?;
    check_orientation(spec, o)?;
    let m0 = p
        .extra(q)
        .ok_or_else(|| Error::Input(format!("arcs {p:?} and {q:?} are not nested with one extra floor")))?;
    if q.n != spec.m() {
        return input("arc length does not match M");
    }
    let fs = spec.floor_spec();
    let active = build_floor(fs, a, b, floor)?;
    let floors: Vec<FloorConfig> = (1..=spec.m())
        .map(|m| {
            if m == m0 {
                active.clone()
            } else {
                FloorConfig::monochrome(fs, if p.contains(m) { b } else { a })
            }
        })
        .collect();
    SpinConfig::from_floors(*spec, &floors)?.orient(o)
}

pub fn build_from_descriptor(spec: &LatticeSpec, d: &CanonicalDescriptor) -> Result<SpinConfig> {
    build_canonical(spec, d.a, d.b, &d.p, &d.q, d.floor, d.orientation)
}

fn floor_mono(f: &FloorConfig) -> Option<u8> {
    let a = f.spins[0];
    f.spins.iter().all(|&s| s == a).then_some(a)
}

/// Spins present in a configuration, ascending.
pub(crate) fn present_spins(s: &[u8]) -> Vec<u8> {
    let mut seen = [false; 256];
    for &x in s {
        seen[x as usize] = true;
    }
    (1..=255u8).filter(|&a| seen[a as usize]).collect()
}

/// Recognises canonical configurations, reporting the first descriptor in
/// the order (orientation, a, b). Open boxes require anchored arcs.
pub fn is_canonical(sigma: &SpinConfig) -> Option<CanonicalDescriptor> {
    let spec = *sigma.spec();
    let mm = spec.m();
    if let Some(a) = sigma.is_ground() {
        let b = if a == 1 { 2 } else { 1 };
        return Some(CanonicalDescriptor {
            a,
            b,
            p: TorusArc::empty(mm),
            q: TorusArc::prefix(1, mm),
            floor: ShapedFloor::rows(FloorShape::Plain { l: 1, v: 0 }),
            orientation: Orientation::Identity,
        });
    }
    let spins = present_spins(sigma.spins());
    if spins.len() != 2 {
        return None;
    }
    let mut orients = spec.orientations();
    orients.sort();
    for o in orients {
        let tau = sigma.orient(o.inverse()).ok()?;
        let floors = tau.floors();
        for (a, b) in [(spins[0], spins[1]), (spins[1], spins[0])] {
            if let Some(d) = canonical_in_frame(&spec, &floors, a, b, o) {
                return Some(d);
            }
        }
    }
    None
}

fn canonical_in_frame(
    spec: &LatticeSpec,
    floors: &[FloorConfig],
    a: u8,
    b: u8,
    o: Orientation,
) -> Option<CanonicalDescriptor> {
    let mm = spec.m();
    let mono: Vec<Option<u8>> = floors.iter().map(floor_mono).collect();
    let mixed: Vec<usize> = (0..mm).filter(|&i| mono[i].is_none()).collect();
    let bmask: Vec<bool> = mono.iter().map(|&x| x == Some(b)).collect();
    let p = TorusArc::from_mask(&bmask)?;
    if !p.admitted(spec.boundary()) {
        return None;
    }
    let (m0, floor) = match mixed.as_slice() {
        [m] => (m + 1, recognize_floor(&floors[*m], a, b)?),
        [] => {
            if p.len == mm {
                return None;
            }
            let m0 = match p.end() {
                None => 1,
                Some(_) if spec.boundary() == Boundary::Open && !p.contains(1) => p.start - 1,
                Some(e) => e % mm + 1,
            };
            (m0, ShapedFloor::rows(FloorShape::Plain { l: 1, v: 0 }))
        }
        _ => return None,
    };
    let mut qmask = bmask.clone();
    qmask[m0 - 1] = true;
    let q = TorusArc::from_mask(&qmask)?;
    if !p.precedes(&q) || !q.admitted(spec.boundary()) {
        return None;
    }
    Some(CanonicalDescriptor { a, b, p, q, floor, orientation: o })
}

/// One recorded spin update of a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub site: usize,
    pub spin: u8,
    pub delta: i32,
    pub energy: u32,
}

/// A single-flip path with its energy ledger.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSeq {
    start: SpinConfig,
    start_energy: u32,
    current: SpinConfig,
    steps: Vec<PathStep>,
}

#[derive(Serialize, Deserialize)]
struct PathJson {
    start: crate::lattice::ConfigJson,
    start_energy: u32,
    steps: Vec<PathStep>,
}

impl PathSeq {
    pub fn new(start: SpinConfig) -> Self {
        let e = energy3d(&start);
        PathSeq { current: start.clone(), start, start_energy: e, steps: Vec::new() }
    }
    /// Appends a flip; the spin must change.
    pub fn push(&mut self, site: usize, spin: u8) -> Result<()> {
        let spec = self.current.spec();
        if site >= spec.n_sites() || !(1..=spec.q()).contains(&spin) {
            return input(format!("flip ({site},{spin}) out of range"));
        }
        if self.current.spins()[site] == spin {
            return input(format!("flip at site {site} does not change the configuration"));
        }
        let delta = flip_delta_index(&self.current, site, spin);
        self.current.set_index(site, spin);
        let energy = (self.energy_end() as i64 + delta as i64) as u32;
        self.steps.push(PathStep { site, spin, delta, energy });
        Ok(())
    }
    pub fn from_flips(start: SpinConfig, flips: impl IntoIterator<Item = (usize, u8)>) -> Result<Self> {
        let mut p = PathSeq::new(start);
        for (s, a) in flips {
            p.push(s, a)?;
        }
        Ok(p)
    }
    pub fn start(&self) -> &SpinConfig {
        &self.start
    }
    pub fn end(&self) -> &SpinConfig {
        &self.current
    }
    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }
    /// Number of flips.
    pub fn len(&self) -> usize {
        self.steps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
    pub fn energy_end(&self) -> u32 {
        self.steps.last().map_or(self.start_energy, |s| s.energy)
    }
    /// Energies of all configurations, start included.
    pub fn energies(&self) -> Vec<u32> {
        std::iter::once(self.start_energy).chain(self.steps.iter().map(|s| s.energy)).collect()
    }
    pub fn deltas(&self) -> Vec<i32> {
        self.steps.iter().map(|s| s.delta).collect()
    }
    pub fn peak(&self) -> u32 {
        self.energies().into_iter().max().unwrap_or(0)
    }
    pub fn configs(&self) -> Vec<SpinConfig> {
        let mut c = self.start.clone();
        let mut out = vec![c.clone()];
        for s in &self.steps {
            c.set_index(s.site, s.spin);
            out.push(c.clone());
        }
        out
    }
    /// Re-derives every delta and energy from scratch.
    pub fn verify(&self) -> bool {
        let mut c = self.start.clone();
        let mut e = energy3d(&c);
        if e != self.start_energy {
            return false;
        }
        for s in &self.steps {
            if c.spins()[s.site] == s.spin {
                return false;
            }
            c.set_index(s.site, s.spin);
            let e2 = energy3d(&c);
            if e2 as i64 - e as i64 != s.delta as i64 || e2 != s.energy {
                return false;
            }
            e = e2;
        }
        true
    }
    /// Image of the whole path under a coordinate permutation.
    pub fn oriented(&self, o: Orientation) -> Result<PathSeq> {
        let spec = *self.start.spec();
        let p = o.perm();
        let map = |idx: usize| {
            let y = spec.site(idx);
            let yc = [y.k, y.l, y.m];
            let mut x = [0usize; 3];
            for i in 0..3 {
                x[p[i]] = yc[i];
            }
            spec.index_unchecked(Site::new(x[0], x[1], x[2]))
        };
        PathSeq::from_flips(self.start.orient(o)?, self.steps.iter().map(|s| (map(s.site), s.spin)))
    }
    pub fn to_json(&self) -> String {
        let j = PathJson {
            start: crate::lattice::ConfigJson::from(&self.start),
            start_energy: self.start_energy,
            steps: self.steps.clone(),
        };
        serde_json::to_string(&j).expect("path json")
    }
    /// Parses and replays a stored path, rejecting any ledger mismatch.
    pub fn from_json(s: &str) -> Result<Self> {
        let j: PathJson = serde_json::from_str(s)?;
        let start = SpinConfig::try_from(j.start)?;
        let p = PathSeq::from_flips(start, j.steps.iter().map(|s| (s.site, s.spin)))?;
        if p.start_energy != j.start_energy || p.steps != j.steps {
            return input("stored energy ledger does not match the replay");
        }
        Ok(p)
    }
}

/// Starting points and traversal order of the canonical growth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPolicy {
    pub floor_start: usize,
    pub row_start: usize,
    pub col_start: usize,
}

impl Default for PathPolicy {
    fn default() -> Self {
        PathPolicy { floor_start: 1, row_start: 1, col_start: 1 }
    }
}

/// Fills floors one at a time, each row by row, each row as a growing arc.
/// Open boxes grow from the corner `(1,1,1)`.
pub fn canonical_path(spec: &LatticeSpec, a: u8, b: u8, policy: PathPolicy, o: Orientation) -> Result<PathSeq> {
    check_spins(spec, a, b)?;
    check_orientation(spec, o)?;
    let (kk, ll, mm) = (spec.k(), spec.l(), spec.m());
    let PathPolicy { floor_start, row_start, col_start } = policy;
    if !(1..=mm).contains(&floor_start) || !(1..=ll).contains(&row_start) || !(1..=kk).contains(&col_start) {
        return input("path policy start out of range");
    }
    if spec.boundary() == Boundary::Open && (floor_start, row_start, col_start) != (1, 1, 1) {
        return input("open boxes only support growth from the corner (1,1,1)");
    }
    let mut flips = Vec::with_capacity(spec.n_sites());
    for i in 0..mm {
        let m = (floor_start - 1 + i) % mm + 1;
        for r in 0..ll {
            let l = (row_start - 1 + r) % ll + 1;
            for c in 0..kk {
                let k = (col_start - 1 + c) % kk + 1;
                flips.push((spec.index_unchecked(Site::new(k, l, m)), b));
            }
        }
    }
    let path = PathSeq::from_flips(SpinConfig::monochrome(*spec, a)?, flips)?;
    if o == Orientation::Identity {
        Ok(path)
    } else {
        path.oriented(o)
    }
}

/// Energy-change matrices of the three stages of the escape path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageLedger {
    /// One `n x n` matrix per `k`; entry `[r][c]` is the flip at `(k, c, n + 1 - r)`.
    pub stage1: Vec<Vec<Vec<i32>>>,
    /// One `n x K` matrix per row `l` in `n+1..L-1`; entry `[r][c]` is the flip at `(c, l, n + 1 - r)`.
    pub stage2: Vec<Vec<Vec<i32>>>,
    /// The `n x K` matrix of the last row `l = L`.
    pub stage3: Vec<Vec<i32>>,
}

/// The sub-barrier path from the regular configuration with `n` bottom
/// floors of `b` back to `s_a`, with its stage matrices.
#[derive(Clone, Debug)]
pub struct EscapePath {
    pub n: usize,
    pub path: PathSeq,
    pub ledger: StageLedger,
}

impl EscapePath {
    pub fn expected(&self) -> StageLedger {
        let spec = self.path.start().spec();
        expected_stage_ledger(spec.k(), spec.l(), self.n)
    }
    pub fn matches_expected(&self) -> bool {
        self.ledger == self.expected()
    }
    /// Peak energy predicted for this `n`.
    pub fn bound(&self) -> u32 {
        let spec = self.path.start().spec();
        let n = self.n as u32;
        2 * (spec.k() * spec.l()) as u32 + 2 * n * n + 2 * n - 2
    }
}

/// Closed-form stage matrices.
pub fn expected_stage_ledger(kk: usize, ll: usize, n: usize) -> StageLedger {
    let low = |r: usize| if r >= 2 { 2 } else { 0 };
    let stage1 = (1..=kk)
        .map(|i| {
            let base = if i == 1 {
                2
            } else if i == kk {
                -2
            } else {
                0
            };
            (1..=n)
                .map(|r| (1..=n).map(|c| base + low(r) - if c >= 2 { 2 } else { 0 }).collect())
                .collect()
        })
        .collect();
    let row2 = |shift: i32| -> Vec<Vec<i32>> {
        (1..=n)
            .map(|r| {
                (1..=kk)
                    .map(|c| shift + low(r) - if c >= 2 { 2 } else { 0 } - if c == kk { 2 } else { 0 })
                    .collect()
            })
            .collect()
    };
    StageLedger {
        stage1,
        stage2: (n + 1..ll).map(|_| row2(0)).collect(),
        stage3: row2(-2),
    }
}

pub fn escape_path(spec: &LatticeSpec, a: u8, b: u8, n: usize) -> Result<EscapePath> {
    check_spins(spec, a, b)?;
    if spec.boundary() != Boundary::Periodic {
        return input("the escape path is defined on periodic boxes");
    }
    let (kk, ll, mm) = (spec.k(), spec.l(), spec.m());
    let nmax = isqrt(kk).saturating_sub(1);
    if n < 1 || n > nmax || n >= mm || n + 1 > ll {
        return input(format!("n must lie in [1, {nmax}] for K = {kk}"));
    }
    let start = build_regular(spec, a, b, &TorusArc::prefix(n, mm), Orientation::Identity)?;
    let mut path = PathSeq::new(start);
    let idx = |k, l, m| spec.index_unchecked(Site::new(k, l, m));
    let mut stage1 = vec![vec![vec![0; n]; n]; kk];
    for k in 1..=kk {
        for l in 1..=n {
            for m in 1..=n {
                path.push(idx(k, l, m), a)?;
                stage1[k - 1][n - m][l - 1] = path.steps().last().expect("step").delta;
            }
        }
    }
    let row_stage = |path: &mut PathSeq, l: usize| -> Result<Vec<Vec<i32>>> {
        let mut mat = vec![vec![0; kk]; n];
        for k in 1..=kk {
            for m in 1..=n {
                path.push(idx(k, l, m), a)?;
                mat[n - m][k - 1] = path.steps().last().expect("step").delta;
            }
        }
        Ok(mat)
    };
    let mut stage2 = Vec::new();
    for l in n + 1..ll {
        stage2.push(row_stage(&mut path, l)?);
    }
    let stage3 = row_stage(&mut path, ll)?;
    Ok(EscapePath { n, path, ledger: StageLedger { stage1, stage2, stage3 } })
}

/// Whether the path starts in `start`, ends in `end` and stays in `interior`
/// strictly between. Membership oracles may fail for configurations they
/// cannot decide.
pub fn is_transition_path(
    path: &PathSeq,
    start: &dyn Fn(&SpinConfig) -> Result<bool>,
    end: &dyn Fn(&SpinConfig) -> Result<bool>,
    interior: &dyn Fn(&SpinConfig) -> Result<bool>,
) -> Result<bool> {
    let cs = path.configs();
    let t = cs.len() - 1;
    if !start(&cs[0])? || !end(&cs[t])? {
        return Ok(false);
    }
    for c in &cs[1..t] {
        if !interior(c)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mk_values() {
        assert_eq!(mk_mk(27), 9);
        assert_eq!(mk_mk(8), 4);
        assert_eq!(mk_mk(2829), 200);
        assert_eq!(mk_mk(2), 1);
        assert_eq!(mk_mk(3), 2);
    }

    #[test]
    fn arcs_on_cycle() {
        let p = TorusArc::new(4, 2, 5).unwrap();
        assert_eq!(p.members(), vec![4, 5]);
        let q = TorusArc::new(4, 3, 5).unwrap();
        assert!(p.precedes(&q));
        assert_eq!(p.extra(&q), Some(1));
        assert_eq!(TorusArc::all(5, Boundary::Periodic).len(), 2 + 4 * 5);
        assert_eq!(TorusArc::all(4, Boundary::Open).len(), 2 + 2 * 3);
        assert!(TorusArc::all(4, Boundary::Open).iter().all(|a| a.is_anchored()));
    }

    #[test]
    fn floor_shapes_round_trip() {
        let fs = FloorSpec::new(3, 4, Boundary::Periodic).unwrap();
        let shapes = [
            FloorShape::Plain { l: 3, v: 2 },
            FloorShape::Plus { l: 2, v: 2, k: 3, h: 2 },
            FloorShape::Minus { l: 1, v: 1, k: 2, h: 1 },
        ];
        for s in shapes {
            let f = build_floor(fs, 1, 2, ShapedFloor::rows(s)).unwrap();
            let back = recognize_floor(&f, 1, 2).unwrap();
            assert_eq!(build_floor(fs, 1, 2, back).unwrap(), f);
        }
    }

    #[test]
    fn regular_energy() {
        let spec = LatticeSpec::periodic(3, 4, 5, 2).unwrap();
        let s = build_regular(&spec, 1, 2, &TorusArc::new(2, 2, 5).unwrap(), Orientation::Identity).unwrap();
        assert_eq!(energy3d(&s), 24);
    }

    #[test]
    fn canonical_path_is_single_flip_and_replays() {
        let spec = LatticeSpec::periodic(3, 3, 3, 2).unwrap();
        let p = canonical_path(&spec, 1, 2, PathPolicy::default(), Orientation::Identity).unwrap();
        assert_eq!(p.len(), 27);
        assert_eq!(p.peak(), 26);
        assert!(p.verify());
        let back = PathSeq::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn escape_small_n1() {
        let spec = LatticeSpec::periodic(4, 4, 4, 2).unwrap();
        let e = escape_path(&spec, 1, 2, 1).unwrap();
        assert!(e.path.verify());
        assert!(e.matches_expected(), "{:?}", e.ledger);
        assert!(e.path.end().is_ground() == Some(1));
    }
}
