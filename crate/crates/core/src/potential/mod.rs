//! Exact potential theory for reversible chains on enumerated spaces.
//!
//! A [`ReversibleChain`] stores the invariant weights `mu` and the symmetric
//! edge conductances `c_ij = mu_i r_ij`. For the Metropolis dynamics on a
//! space at inverse temperature `beta`, `mu` is the normalised Gibbs measure
//! and `c_ij = exp(-beta max(H_i, H_j)) / Z`.

pub mod aux;
pub mod solver;
pub mod testfn;

pub use aux::{build_aux_chain, ladder_step_value, AuxChain, AuxSummary, Flow, UnitFlowCheck};
pub use solver::{Grounded, SolveInfo, SolverBudget};
pub use testfn::{constants, h1_diagnostics, test_function, ConstantsBundle, H1Report, TestFunction};

use crate::dynamics::{log_partition, Beta};
use crate::error::{Error, Result};
use crate::landscape::Space;
use serde::Serialize;

/// Largest `beta * H` accepted when forming Gibbs weights.
pub const MAX_EXPONENT: f64 = 700.0;

/// Reversible chain in compressed sparse row form.
#[derive(Clone, Debug)]
pub struct ReversibleChain {
    mu: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    cond: Vec<f64>,
}

impl ReversibleChain {
    /// Metropolis dynamics restricted to a space. On a ceiling space the
    /// chain is the one reflected at the ceiling.
    pub fn from_space<S: Space + ?Sized>(space: &S, beta: Beta) -> Result<Self> {
        let b = beta.get();
        if b * space.max_energy() as f64 > MAX_EXPONENT {
            return Err(Error::Unsupported(format!(
                "beta {b} times max energy {} exceeds the double-precision range",
                space.max_energy()
            )));
        }
        let n = space.len();
        let log_z = log_partition((0..n).map(|i| space.energy(i)), b);
        let mu: Vec<f64> = (0..n).map(|i| (-b * space.energy(i) as f64 - log_z).exp()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut cond = Vec::new();
        let mut nb = Vec::new();
        offsets.push(0);
        for i in 0..n {
            nb.clear();
            space.neighbors_into(i, &mut nb);
            nb.sort_unstable();
            let hi = space.energy(i);
            for &j in &nb {
                targets.push(j as u32);
                cond.push((-b * hi.max(space.energy(j)) as f64 - log_z).exp());
            }
            offsets.push(targets.len());
        }
        Ok(ReversibleChain { mu, offsets, targets, cond })
    }

    /// Chain from weights and undirected conductances `(i, j, c)`; repeated
    /// pairs are summed.
    pub fn from_conductances(mu: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = mu.len();
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, c) in edges {
            if i >= n || j >= n || i == j || !(c > 0.0) {
                return Err(Error::Input(format!("bad edge ({i}, {j}, {c})")));
            }
            adj[i].push((j as u32, c));
            adj[j].push((i as u32, c));
        }
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut cond = Vec::new();
        for row in adj.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for &(j, c) in row.iter() {
                if last == Some(j) {
                    *cond.last_mut().expect("previous edge") += c;
                } else {
                    targets.push(j);
                    cond.push(c);
                    last = Some(j);
                }
            }
            offsets.push(targets.len());
        }
        Ok(ReversibleChain { mu, offsets, targets, cond })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }
    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    /// `(j, c_ij)` for the neighbours of `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().map(|&j| j as usize).zip(self.cond[r].iter().copied())
    }
    /// Jump rate `r_ij = c_ij / mu_i`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(k, _)| k == j).map_or(0.0, |(_, c)| c / self.mu[i])
    }
    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// `(L f)(i) = sum_j r_ij (f_j - f_i)`.
    pub fn generator(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.row(i).map(|(j, c)| c * (f[j] - f[i])).sum::<f64>() / self.mu[i])
            .collect()
    }
}

/// Dirichlet form as a sum over edges of `c_ij (f_j - f_i)^2`.
pub fn dirichlet(chain: &ReversibleChain, f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..chain.len() {
        for (j, c) in chain.row(i) {
            if j > i {
                let d = f[j] - f[i];
                s += c * d * d;
            }
        }
    }
    s
}

/// `<f, -L g>_mu`, evaluated through the generator.
pub fn dirichlet_bilinear(chain: &ReversibleChain, f: &[f64], g: &[f64]) -> f64 {
    let lg = chain.generator(g);
    (0..chain.len()).map(|i| -chain.mu[i] * f[i] * lg[i]).sum()
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Equilibrium potential between two disjoint sets with its capacity.
#[derive(Clone, Debug, Serialize)]
pub struct Equilibrium {
    #[serde(skip)]
    pub h: Vec<f64>,
    /// Net flux out of the first set.
    pub capacity: f64,
    /// Dirichlet form of `h`.
    pub capacity_dirichlet: f64,
    pub solve: SolveInfo,
}

fn check_sets(n: usize, p: &[bool], q: &[bool]) -> Result<()> {
    if p.len() != n || q.len() != n {
        return Err(Error::Input("set masks must match the chain size".into()));
    }
    if !p.iter().any(|&x| x) || !q.iter().any(|&x| x) {
        return Err(Error::Input("both sets must be non-empty".into()));
    }
    if p.iter().zip(q).any(|(&a, &b)| a && b) {
        return Err(Error::Input("sets must be disjoint".into()));
    }
    Ok(())
}

/// `h = 1` on `p`, `0` on `q`, harmonic elsewhere.
pub fn equilibrium_potential(chain: &ReversibleChain, p: &[bool], q: &[bool], budget: SolverBudget) -> Result<Equilibrium> {
    let n = chain.len();
    check_sets(n, p, q)?;
    let boundary: Vec<bool> = p.iter().zip(q).map(|(&a, &b)| a || b).collect();
    let g = Grounded::new(chain, &boundary, budget)?;
    let fixed: Vec<f64> = p.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let (h, solve) = g.solve(&vec![0.0; n], &fixed)?;
    let capacity = (0..n)
        .filter(|&i| p[i])
        .map(|i| chain.row(i).map(|(j, c)| c * (1.0 - h[j])).sum::<f64>())
        .sum();
    let capacity_dirichlet = dirichlet(chain, &h);
    Ok(Equilibrium { h, capacity, capacity_dirichlet, solve })
}

pub fn capacity(chain: &ReversibleChain, p: &[bool], q: &[bool], budget: SolverBudget) -> Result<f64> {
    Ok(equilibrium_potential(chain, p, q, budget)?.capacity)
}

/// `E_s[tau_target]` as `sum_x mu(x) h_{s,target}(x) / Cap(s, target)`.
pub fn mean_hitting_capacity(chain: &ReversibleChain, s: usize, target: &[bool], budget: SolverBudget) -> Result<f64> {
    let mut p = vec![false; chain.len()];
    p[s] = true;
    let eq = equilibrium_potential(chain, &p, target, budget)?;
    let num: f64 = chain.mu.iter().zip(&eq.h).map(|(m, h)| m * h).sum();
    Ok(num / eq.capacity)
}

/// Mean hitting times of `target` from every state, by a direct solve of
/// `sum_j c_ij (u_i - u_j) = mu_i` off the target.
pub fn hitting_times(chain: &ReversibleChain, target: &[bool], budget: SolverBudget) -> Result<(Vec<f64>, SolveInfo)> {
    let g = Grounded::new(chain, target, budget)?;
    g.solve(&chain.mu, &vec![0.0; chain.len()])
}

pub fn mean_hitting_direct(chain: &ReversibleChain, s: usize, target: &[bool], budget: SolverBudget) -> Result<f64> {
    if target[s] {
        return Ok(0.0);
    }
    Ok(hitting_times(chain, target, budget)?.0[s])
}

/// Spaces larger than this are refused by [`spectral_gap`].
pub const GAP_STATE_LIMIT: usize = 1 << 16;

/// Spectral gap with its eigenvector estimate.
#[derive(Clone, Debug, Serialize)]
pub struct Gap {
    pub gap: f64,
    pub iterations: usize,
    /// Relative change of the last Rayleigh quotient update.
    pub last_change: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

/// Smallest non-zero eigenvalue of `-L`, by inverse iteration with the
/// pseudo-inverse obtained from a system grounded at the heaviest state.
pub fn spectral_gap(chain: &ReversibleChain, budget: SolverBudget) -> Result<Gap> {
    let n = chain.len();
    if n > GAP_STATE_LIMIT {
        return Err(Error::Budget { what: "spectral gap states".into(), needed: n as u128, limit: GAP_STATE_LIMIT as u128 });
    }
    if n < 2 {
        return Err(Error::Input("spectral gap needs at least two states".into()));
    }
    let total: f64 = chain.mu.iter().sum();
    let root = (0..n).max_by(|&a, &b| chain.mu[a].total_cmp(&chain.mu[b])).expect("non-empty");
    let mut boundary = vec![false; n];
    boundary[root] = true;
    let g = Grounded::new(chain, &boundary, budget)?;
    let center = |v: &mut Vec<f64>| {
        let m: f64 = v.iter().zip(&chain.mu).map(|(a, w)| a * w).sum::<f64>() / total;
        let mut norm = 0.0;
        for (x, w) in v.iter_mut().zip(&chain.mu) {
            *x -= m;
            norm += *x * *x * w;
        }
        let norm = (norm / total).sqrt();
        if norm > 0.0 {
            for x in v.iter_mut() {
                *x /= norm;
            }
        }
    };
    // Deterministic start that is not orthogonal to slow modes in practice.
    let mut f: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5).collect();
    center(&mut f);
    let rayleigh = |v: &[f64]| dirichlet(chain, v) / (v.iter().zip(&chain.mu).map(|(a, w)| a * a * w).sum::<f64>());
    let mut lam = rayleigh(&f);
    let mut change = f64::INFINITY;
    let mut it = 0;
    let zeros = vec![0.0; n];
    while it < 200 {
        let rhs: Vec<f64> = f.iter().zip(&chain.mu).map(|(a, w)| a * w).collect();
        let (mut u, _) = g.solve(&rhs, &zeros)?;
        center(&mut u);
        let lam_new = rayleigh(&u);
        change = rel_diff(lam_new, lam);
        lam = lam_new;
        f = u;
        it += 1;
        if change < 1e-13 && it >= 3 {
            break;
        }
    }
    Ok(Gap { gap: lam, iterations: it, last_change: change, vector: f })
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
