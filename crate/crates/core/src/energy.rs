//! Integer bond-count energies and their floor/pillar decomposition.

use crate::error::{input, Result};
use crate::lattice::{Boundary, FloorConfig, FloorSpec, PillarConfig, Site, SpinConfig};
use serde::Serialize;

/// Number of disagreeing nearest-neighbour bonds.
pub fn energy3d(sigma: &SpinConfig) -> u32 {
    let spec = sigma.spec();
    let (kk, ll, mm) = (spec.k(), spec.l(), spec.m());
    let periodic = spec.boundary() == Boundary::Periodic;
    let s = sigma.spins();
    let idx = |k: usize, l: usize, m: usize| k + kk * l + kk * ll * m;
    let mut h = 0;
    for m in 0..mm {
        for l in 0..ll {
            for k in 0..kk {
                let here = s[idx(k, l, m)];
                if k + 1 < kk || periodic {
                    h += (here != s[idx((k + 1) % kk, l, m)]) as u32;
                }
                if l + 1 < ll || periodic {
                    h += (here != s[idx(k, (l + 1) % ll, m)]) as u32;
                }
                if m + 1 < mm || periodic {
                    h += (here != s[idx(k, l, (m + 1) % mm)]) as u32;
                }
            }
        }
    }
    h
}

/// Energy with a uniform field term `-h * sum(sigma(x))`.
pub fn energy3d_field(sigma: &SpinConfig, h: f64) -> f64 {
    let field: u64 = sigma.spins().iter().map(|&s| s as u64).sum();
    energy3d(sigma) as f64 - h * field as f64
}

pub fn energy2d(eta: &FloorConfig) -> u32 {
    let FloorSpec { k: kk, l: ll, boundary } = eta.spec;
    let periodic = boundary == Boundary::Periodic;
    let s = &eta.spins;
    let mut h = 0;
    for l in 0..ll {
        for k in 0..kk {
            let here = s[k + kk * l];
            if k + 1 < kk || periodic {
                h += (here != s[(k + 1) % kk + kk * l]) as u32;
            }
            if l + 1 < ll || periodic {
                h += (here != s[k + kk * ((l + 1) % ll)]) as u32;
            }
        }
    }
    h
}

pub fn energy1d(p: &PillarConfig) -> u32 {
    let n = p.spins.len();
    let mut h = 0;
    for i in 0..n {
        if i + 1 < n {
            h += (p.spins[i] != p.spins[i + 1]) as u32;
        } else if p.boundary == Boundary::Periodic {
            h += (p.spins[i] != p.spins[0]) as u32;
        }
    }
    h
}

/// Per-floor 2D energies and per-pillar 1D energies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub floors: Vec<u32>,
    /// Indexed with `k` fastest.
    pub pillars: Vec<u32>,
}

impl Decomposition {
    pub fn total(&self) -> u32 {
        self.floors.iter().sum::<u32>() + self.pillars.iter().sum::<u32>()
    }
}

pub fn decompose(sigma: &SpinConfig) -> Decomposition {
    let spec = sigma.spec();
    let floors = sigma.floors().iter().map(energy2d).collect();
    let mut pillars = Vec::with_capacity(spec.k() * spec.l());
    for l in 1..=spec.l() {
        for k in 1..=spec.k() {
            pillars.push(energy1d(&sigma.pillar(k, l)));
        }
    }
    Decomposition { floors, pillars }
}

/// `H(flip(sigma, x, a)) - H(sigma)` from the neighbours of `x` alone.
pub fn flip_delta(sigma: &SpinConfig, x: Site, a: u8) -> Result<i32> {
    let spec = sigma.spec();
    if a < 1 || a > spec.q() {
        return input(format!("spin {a} outside 1..={}", spec.q()));
    }
    let i = spec.index(x)?;
    Ok(flip_delta_index(sigma, i, a))
}

pub(crate) fn flip_delta_index(sigma: &SpinConfig, i: usize, a: u8) -> i32 {
    let s = sigma.spins();
    let old = s[i];
    if old == a {
        return 0;
    }
    sigma
        .spec()
        .neighbor_indices(i)
        .into_iter()
        .map(|j| (s[j] == old) as i32 - (s[j] == a) as i32)
        .sum()
}

pub fn spin_count(sigma: &SpinConfig, a: u8) -> usize {
    sigma.count(a)
}

/// Monochromatic pillar counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PillarStats {
    /// `d_by_spin[a - 1]` pillars are entirely spin `a`.
    pub d_by_spin: Vec<usize>,
    pub d: usize,
}

pub fn pillar_stats(sigma: &SpinConfig) -> PillarStats {
    let spec = sigma.spec();
    let mut d_by_spin = vec![0; spec.q() as usize];
    for l in 1..=spec.l() {
        for k in 1..=spec.k() {
            if let Some(a) = sigma.pillar(k, l).is_monochrome() {
                d_by_spin[a as usize - 1] += 1;
            }
        }
    }
    let d = d_by_spin.iter().sum();
    PillarStats { d_by_spin, d }
}

/// Both sides of the pillar lower bound `H >= c (KL - d) + sum_m H2D`, with
/// `c = 2` on the torus and `c = 1` for open pillars.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PillarBound {
    pub energy: u32,
    pub bound: u32,
    /// Every non-monochromatic pillar carries the minimal 1D energy.
    pub tight_pillars: bool,
}

impl PillarBound {
    pub fn holds(&self) -> bool {
        self.energy >= self.bound
    }
    pub fn equality(&self) -> bool {
        self.energy == self.bound
    }
}

pub fn pillar_bound(sigma: &SpinConfig) -> PillarBound {
    let spec = sigma.spec();
    let c = if spec.boundary() == Boundary::Periodic { 2 } else { 1 };
    let dec = decompose(sigma);
    let d = pillar_stats(sigma).d as u32;
    let kl = (spec.k() * spec.l()) as u32;
    let tight_pillars = dec.pillars.iter().all(|&p| p == 0 || p == c);
    PillarBound {
        energy: dec.total(),
        bound: c * (kl - d) + dec.floors.iter().sum::<u32>(),
        tight_pillars,
    }
}

/// Monochromatic rows and columns of a floor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BridgeStats {
    /// `bridges[a - 1]` counts rows plus columns made only of spin `a`.
    pub bridges: Vec<usize>,
    /// `cross[a - 1]` holds when an `a`-row and an `a`-column both exist.
    pub cross: Vec<bool>,
}

pub fn bridge_stats(eta: &FloorConfig, q: u8) -> BridgeStats {
    let FloorSpec { k: kk, l: ll, .. } = eta.spec;
    let mut rows = vec![0usize; q as usize];
    let mut cols = vec![0usize; q as usize];
    for l in 1..=ll {
        let a = eta.at(1, l);
        if (1..=kk).all(|k| eta.at(k, l) == a) {
            rows[a as usize - 1] += 1;
        }
    }
    for k in 1..=kk {
        let a = eta.at(k, 1);
        if (1..=ll).all(|l| eta.at(k, l) == a) {
            cols[a as usize - 1] += 1;
        }
    }
    BridgeStats {
        bridges: rows.iter().zip(&cols).map(|(r, c)| r + c).collect(),
        cross: rows.iter().zip(&cols).map(|(&r, &c)| r > 0 && c > 0).collect(),
    }
}

/// Low-energy classes of a periodic 2D configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum LowEnergyClass {
    /// `v` full lines of `b` in a background of `a`, `2 <= v <= L-2`, reported with `a < b`.
    L1 { v: usize, a: u8, b: u8 },
    /// A single full line of `b` in a background of `a`.
    L2 { a: u8, b: u8 },
    /// An `a`-cross; `minority` counts the sites not equal to `a`.
    L3 { a: u8, minority: usize },
    /// Energy at or above `2K + 2`.
    None,
    /// Below `2K + 2` yet matching no pattern; never expected.
    Unmatched,
}

/// Line structure of a floor: `Some((spins, along_rows))` when every line in
/// one direction is monochromatic.
fn line_spins(eta: &FloorConfig, rows: bool) -> Option<Vec<u8>> {
    let FloorSpec { k: kk, l: ll, .. } = eta.spec;
    if rows {
        (1..=ll)
            .map(|l| {
                let a = eta.at(1, l);
                (1..=kk).all(|k| eta.at(k, l) == a).then_some(a)
            })
            .collect()
    } else {
        (1..=kk)
            .map(|k| {
                let a = eta.at(k, 1);
                (1..=ll).all(|l| eta.at(k, l) == a).then_some(a)
            })
            .collect()
    }
}

/// `Some((a, b, v))` with `a < b` when the lines use two spins and the `b`
/// lines form one cyclic block of length `v`.
fn two_block(lines: &[u8]) -> Option<(u8, u8, usize)> {
    let mut colours: Vec<u8> = lines.to_vec();
    colours.sort_unstable();
    colours.dedup();
    if colours.len() != 2 {
        return None;
    }
    let n = lines.len();
    let changes = (0..n).filter(|&i| lines[i] != lines[(i + 1) % n]).count();
    if changes != 2 {
        return None;
    }
    let (x, y) = (colours[0], colours[1]);
    Some((x, y, lines.iter().filter(|&&s| s == y).count()))
}

pub fn classify_2d_lowenergy(eta: &FloorConfig, q: u8) -> Result<LowEnergyClass> {
    let FloorSpec { k: kk, l: ll, boundary } = eta.spec;
    if boundary != Boundary::Periodic {
        return input("the low-energy classifier is defined on periodic floors only");
    }
    let h = energy2d(eta) as usize;
    if h >= 2 * kk + 2 {
        return Ok(LowEnergyClass::None);
    }
    let mut orientations = vec![true];
    if kk == ll {
        orientations.push(false);
    }
    for rows in orientations {
        if let Some(lines) = line_spins(eta, rows) {
            let n = lines.len();
            if let Some((a, b, v)) = two_block(&lines) {
                if (2..=n - 2).contains(&v) {
                    return Ok(LowEnergyClass::L1 { v, a, b });
                }
                // Single line of the minority spin.
                let (maj, min) = if v == 1 { (a, b) } else if v == n - 1 { (b, a) } else { continue };
                return Ok(LowEnergyClass::L2 { a: maj, b: min });
            }
        }
    }
    let stats = bridge_stats(eta, q);
    if let Some(a) = (1..=q).find(|&a| stats.cross[a as usize - 1]) {
        let minority = eta.spins.iter().filter(|&&s| s != a).count();
        return Ok(LowEnergyClass::L3 { a, minority });
    }
    Ok(LowEnergyClass::Unmatched)
}
