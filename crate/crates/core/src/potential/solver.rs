//! Grounded Laplacian solves.
//!
//! Every system here has the form `sum_j c_ij (x_i - x_j) = b_i` on the
//! interior states, with `x` prescribed on a boundary set and symmetric
//! positive conductances `c`. Two back ends share one interface:
//!
//! * a banded elimination in subtraction-free form (pivots are formed as sums
//!   of positive quantities, so tiny conductances keep full relative
//!   precision), used when the band cost fits the work budget;
//! * conjugate gradients with a diagonal preconditioner otherwise.

use super::ReversibleChain;
use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::VecDeque;

/// Work and accuracy limits for [`Grounded`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverBudget {
    /// Largest `n * band^2 / 2` accepted for the banded elimination.
    pub direct_work: f64,
    /// Largest band storage `n * band` in doubles.
    pub direct_memory: f64,
    pub cg_max_iter: usize,
    /// Relative residual target for conjugate gradients.
    pub cg_tol: f64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget { direct_work: 6e9, direct_memory: 1.5e8, cg_max_iter: 400_000, cg_tol: 1e-14 }
    }
}

impl SolverBudget {
    /// Never uses the banded elimination.
    pub fn iterative() -> Self {
        SolverBudget { direct_work: 0.0, ..Default::default() }
    }
}

/// Which back end a solve used, with its cost figures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolveInfo {
    Banded { band: usize, interior: usize },
    ConjugateGradient { iterations: usize, rel_residual: f64 },
}

struct Band {
    band: usize,
    /// `u[k * band + t]` couples position `k` to `k + 1 + t`.
    u: Vec<f64>,
    pivot: Vec<f64>,
}

enum Backend {
    Band(Band),
    Cg { diag: Vec<f64> },
}

/// A grounded system ready for repeated solves.
pub struct Grounded<'a> {
    chain: &'a ReversibleChain,
    boundary: Vec<bool>,
    /// Interior states in elimination order.
    order: Vec<usize>,
    /// Position in `order`, `usize::MAX` on the boundary.
    pos: Vec<usize>,
    backend: Backend,
    budget: SolverBudget,
}

/// Reverse Cuthill-McKee order of the interior subgraph.
fn rcm(chain: &ReversibleChain, boundary: &[bool]) -> Vec<usize> {
    let n = chain.len();
    let deg: Vec<usize> = (0..n).map(|i| chain.row(i).filter(|&(j, _)| !boundary[j]).count()).collect();
    let mut seen = boundary.to_vec();
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).filter(|&i| !boundary[i]).collect();
    by_degree.sort_by_key(|&i| (deg[i], i));
    let bfs = |start: usize, seen: &mut Vec<bool>, out: &mut Vec<usize>| {
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut nb = Vec::new();
        while let Some(x) = queue.pop_front() {
            out.push(x);
            nb.clear();
            nb.extend(chain.row(x).map(|(j, _)| j).filter(|&j| !seen[j]));
            nb.sort_by_key(|&j| (deg[j], j));
            for &j in &nb {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    };
    for &s in &by_degree {
        if seen[s] {
            continue;
        }
        // Pseudo-peripheral start: last vertex of a BFS from the min-degree vertex.
        let mut probe_seen = seen.clone();
        let mut probe = Vec::new();
        bfs(s, &mut probe_seen, &mut probe);
        let start = *probe.last().unwrap_or(&s);
        bfs(start, &mut seen, &mut order);
    }
    order.reverse();
    order
}

impl<'a> Grounded<'a> {
    pub fn new(chain: &'a ReversibleChain, boundary: &[bool], budget: SolverBudget) -> Result<Self> {
        let n = chain.len();
        if boundary.len() != n {
            return Err(Error::Input("boundary mask length differs from the chain".into()));
        }
        if !boundary.iter().any(|&b| b) {
            return Err(Error::Input("grounded solve needs a non-empty boundary".into()));
        }
        let order = rcm(chain, boundary);
        let mut pos = vec![usize::MAX; n];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        let mut band = 0;
        for &i in &order {
            for (j, _) in chain.row(i) {
                if pos[j] != usize::MAX && pos[j] > pos[i] {
                    band = band.max(pos[j] - pos[i]);
                }
            }
        }
        let ni = order.len() as f64;
        let bw = band as f64;
        let backend = if ni * bw * bw / 2.0 <= budget.direct_work && ni * bw <= budget.direct_memory {
            Backend::Band(Self::factor(chain, boundary, &order, &pos, band)?)
        } else {
            let diag = (0..n).map(|i| chain.row(i).map(|(_, c)| c).sum()).collect();
            Backend::Cg { diag }
        };
        Ok(Grounded { chain, boundary: boundary.to_vec(), order, pos, backend, budget })
    }

    fn factor(chain: &ReversibleChain, boundary: &[bool], order: &[usize], pos: &[usize], band: usize) -> Result<Band> {
        let ni = order.len();
        let bw = band.max(1);
        let mut u = vec![0.0f64; ni * bw];
        let mut exit = vec![0.0f64; ni];
        for (k, &i) in order.iter().enumerate() {
            for (j, c) in chain.row(i) {
                if boundary[j] {
                    exit[k] += c;
                } else if pos[j] > k {
                    u[k * bw + (pos[j] - k - 1)] = c;
                }
            }
        }
        let mut pivot = vec![0.0f64; ni];
        for k in 0..ni {
            let (head, tail) = u.split_at_mut((k + 1) * bw);
            let row_k = &head[k * bw..];
            let d = exit[k] + row_k.iter().sum::<f64>();
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "zero pivot at interior state {}: a component does not reach the boundary",
                    order[k]
                )));
            }
            pivot[k] = d;
            let ek = exit[k];
            for t1 in 0..bw.min(ni - k - 1) {
                let c = row_k[t1];
                if c == 0.0 {
                    continue;
                }
                let f = c / d;
                exit[k + 1 + t1] += f * ek;
                let width = bw - 1 - t1;
                let row_i = &mut tail[t1 * bw..t1 * bw + width];
                for (x, &y) in row_i.iter_mut().zip(&row_k[t1 + 1..]) {
                    *x += f * y;
                }
            }
        }
        Ok(Band { band: bw, u, pivot })
    }

    pub fn info_band(&self) -> Option<usize> {
        match &self.backend {
            Backend::Band(b) => Some(b.band),
            Backend::Cg { .. } => None,
        }
    }

    /// Solves with source `rhs` on the interior (boundary entries ignored)
    /// and prescribed values `fixed` on the boundary (interior entries ignored).
    pub fn solve(&self, rhs: &[f64], fixed: &[f64]) -> Result<(Vec<f64>, SolveInfo)> {
        let n = self.chain.len();
        let ni = self.order.len();
        let mut b = vec![0.0f64; ni];
        for (k, &i) in self.order.iter().enumerate() {
            let mut v = rhs[i];
            for (j, c) in self.chain.row(i) {
                if self.boundary[j] {
                    v += c * fixed[j];
                }
            }
            b[k] = v;
        }
        let (xi, info) = match &self.backend {
            Backend::Band(f) => (self.band_solve(f, b), SolveInfo::Banded { band: f.band, interior: ni }),
            Backend::Cg { diag } => self.cg_solve(diag, b)?,
        };
        let mut x = vec![0.0f64; n];
        for i in 0..n {
            x[i] = if self.boundary[i] { fixed[i] } else { xi[self.pos[i]] };
        }
        Ok((x, info))
    }

    fn band_solve(&self, f: &Band, mut y: Vec<f64>) -> Vec<f64> {
        let ni = y.len();
        let bw = f.band;
        for k in 0..ni {
            let yk = y[k] / f.pivot[k];
            if yk == 0.0 {
                continue;
            }
            let row = &f.u[k * bw..(k + 1) * bw];
            let m = bw.min(ni - k - 1);
            for (t, &c) in row[..m].iter().enumerate() {
                y[k + 1 + t] += c * yk;
            }
        }
        let mut x = vec![0.0f64; ni];
        for k in (0..ni).rev() {
            let row = &f.u[k * bw..(k + 1) * bw];
            let m = bw.min(ni - k - 1);
            let s: f64 = row[..m].iter().zip(&x[k + 1..k + 1 + m]).map(|(c, v)| c * v).sum();
            x[k] = (y[k] + s) / f.pivot[k];
        }
        x
    }

    fn apply(&self, diag: &[f64], x: &[f64], out: &mut [f64]) {
        for (k, &i) in self.order.iter().enumerate() {
            let mut s = diag[i] * x[k];
            for (j, c) in self.chain.row(i) {
                let p = self.pos[j];
                if p != usize::MAX {
                    s -= c * x[p];
                }
            }
            out[k] = s;
        }
    }

    fn cg_solve(&self, diag: &[f64], b: Vec<f64>) -> Result<(Vec<f64>, SolveInfo)> {
        let budget = self.budget;
        let ni = b.len();
        let dinv: Vec<f64> = self.order.iter().map(|&i| 1.0 / diag[i]).collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0f64; ni];
        if bnorm == 0.0 {
            return Ok((x, SolveInfo::ConjugateGradient { iterations: 0, rel_residual: 0.0 }));
        }
        // Start from the diagonal guess and restart from the true residual periodically.
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0f64; ni];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut it = 0;
        while it < budget.cg_max_iter {
            self.apply(diag, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for k in 0..ni {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            it += 1;
            if it % 500 == 0 {
                self.apply(diag, &x, &mut ap);
                for k in 0..ni {
                    r[k] = b[k] - ap[k];
                }
            }
            let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
            if rel <= budget.cg_tol {
                break;
            }
            for k in 0..ni {
                z[k] = r[k] * dinv[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..ni {
                p[k] = z[k] + beta * p[k];
            }
        }
        self.apply(diag, &x, &mut ap);
        let rel = b.iter().zip(&ap).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() / bnorm;
        if rel > budget.cg_tol.max(1e-10) {
            return Err(Error::Numerical(format!(
                "conjugate gradients stopped at relative residual {rel:.3e} after {it} iterations"
            )));
        }
        Ok((x, SolveInfo::ConjugateGradient { iterations: it, rel_residual: rel }))
    }
}
