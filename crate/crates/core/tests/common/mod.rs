//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use potts3d::{Boundary, LatticeSpec, SpinConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Disagreeing bonds counted from coordinates, with no use of the crate's
/// neighbour tables.
pub fn bond_energy(spec: &LatticeSpec, spins: &[u8]) -> u32 {
    let [kk, ll, mm] = spec.dims();
    let at = |k: usize, l: usize, m: usize| spins[k + kk * (l + ll * m)];
    let periodic = spec.boundary() == Boundary::Periodic;
    let mut h = 0;
    for m in 0..mm {
        for l in 0..ll {
            for k in 0..kk {
                let s = at(k, l, m);
                // Forward bonds only, so each bond is seen once.
                let fwd = [(k + 1, l, m, kk, 0), (k, l + 1, m, ll, 1), (k, l, m + 1, mm, 2)];
                for (a, b, c, n, axis) in fwd {
                    let coord = [a, b, c][axis];
                    let (a, b, c) = if coord == n {
                        if !periodic {
                            continue;
                        }
                        match axis {
                            0 => (0, b, c),
                            1 => (a, 0, c),
                            _ => (a, b, 0),
                        }
                    } else {
                        (a, b, c)
                    };
                    if at(a, b, c) != s {
                        h += 1;
                    }
                }
            }
        }
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_config(spec: &LatticeSpec, rng: &mut ChaCha8Rng) -> SpinConfig {
    let spins = (0..spec.n_sites()).map(|_| rng.random_range(1..=spec.q())).collect();
    SpinConfig::new(*spec, spins).expect("valid spins")
}
