//! Metropolis single-flip dynamics: rates, the discrete kernel, Gibbs
//! weights, event-driven simulation and the trace-process time change.

use crate::energy::energy3d;
use crate::error::{input, Error, Result};
use crate::lattice::{SiteGraph, SpinConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

/// Validated inverse temperature.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct Beta(f64);

impl Beta {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return input(format!("beta must be positive and finite, got {beta}"));
        }
        Ok(Beta(beta))
    }
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `exp(-beta * max(delta, 0))`.
#[inline]
pub fn metropolis_rate(delta: i32, beta: f64) -> f64 {
    if delta <= 0 {
        1.0
    } else {
        (-beta * delta as f64).exp()
    }
}

/// Jump rate from `sigma` to `zeta`; zero unless they differ at exactly one site.
pub fn rate(sigma: &SpinConfig, zeta: &SpinConfig, beta: f64) -> f64 {
    if sigma.spec() != zeta.spec() {
        return 0.0;
    }
    let mut diff = sigma.spins().iter().zip(zeta.spins()).filter(|(a, b)| a != b);
    match (diff.next(), diff.next()) {
        (Some(_), None) => {
            let d = energy3d(zeta) as i32 - energy3d(sigma) as i32;
            metropolis_rate(d, beta)
        }
        _ => 0.0,
    }
}

/// Unnormalised Gibbs weight `exp(-beta H)`.
pub fn gibbs(sigma: &SpinConfig, beta: f64) -> f64 {
    (-beta * energy3d(sigma) as f64).exp()
}

/// `ln sum_i exp(-beta * e_i)` computed stably.
pub fn log_partition(energies: impl IntoIterator<Item = u32>, beta: f64) -> f64 {
    // Energies are nonnegative and the minimum is attained by ground states,
    // so shifting by the minimum keeps every term in [0, 1].
    let e: Vec<u32> = energies.into_iter().collect();
    let Some(&min) = e.iter().min() else {
        return f64::NEG_INFINITY;
    };
    let s: f64 = e.iter().map(|&h| (-beta * (h - min) as f64).exp()).sum();
    -beta * min as f64 + s.ln()
}

pub fn partition_function(energies: impl IntoIterator<Item = u32>, beta: f64) -> f64 {
    log_partition(energies, beta).exp()
}

/// One proposal of the discrete-time chain.
#[derive(Clone, Debug, Serialize)]
pub struct KernelMove {
    pub site: usize,
    pub spin: u8,
    pub prob: f64,
}

/// Transition law of the discrete chain out of one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteKernel {
    pub moves: Vec<KernelMove>,
    pub hold: f64,
}

impl DiscreteKernel {
    pub fn total(&self) -> f64 {
        self.hold + self.moves.iter().map(|m| m.prob).sum::<f64>()
    }
}

/// Uniform site and spin proposal, Metropolis acceptance.
pub fn discrete_kernel(sigma: &SpinConfig, beta: f64) -> DiscreteKernel {
    let spec = sigma.spec();
    let g = spec.graph();
    let norm = 1.0 / (spec.q() as f64 * spec.n_sites() as f64);
    let mut moves = Vec::new();
    let mut off = 0.0;
    for i in 0..spec.n_sites() {
        for a in 1..=spec.q() {
            if a == sigma.spins()[i] {
                continue;
            }
            let p = norm * metropolis_rate(g.delta(sigma.spins(), i, a), beta);
            off += p;
            moves.push(KernelMove { site: i, spin: a, prob: p });
        }
    }
    DiscreteKernel { moves, hold: 1.0 - off }
}

/// Fenwick tree of nonnegative weights with proportional sampling.
#[derive(Clone, Debug)]
struct Fenwick {
    tree: Vec<f64>,
    vals: Vec<f64>,
    updates: u32,
}

impl Fenwick {
    fn new(vals: &[f64]) -> Self {
        let n = vals.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &v) in vals.iter().enumerate() {
            tree[i + 1] += v;
            let j = (i + 1) + ((i + 1) & (!(i + 1) + 1));
            if j <= n {
                let t = tree[i + 1];
                tree[j] += t;
            }
        }
        Fenwick { tree, vals: vals.to_vec(), updates: 0 }
    }
    fn set(&mut self, i: usize, v: f64) {
        // Periodic rebuild bounds the rounding drift of incremental updates.
        self.updates += 1;
        if self.updates == 1 << 16 {
            self.vals[i] = v;
            *self = Fenwick::new(&self.vals);
            return;
        }
        let d = v - self.vals[i];
        self.vals[i] = v;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += d;
            j += j & (!j + 1);
        }
    }
    fn total(&self) -> f64 {
        let mut j = self.vals.len();
        let mut s = 0.0;
        while j > 0 {
            s += self.tree[j];
            j &= j - 1;
        }
        s
    }
    /// Smallest index whose prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.vals.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let nxt = pos + step;
            if nxt <= n && self.tree[nxt] <= u {
                pos = nxt;
                u -= self.tree[nxt];
            }
            step >>= 1;
        }
        // Guard against rounding pushing past the last positive weight.
        let mut i = pos.min(n - 1);
        while self.vals[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}

/// Mutable simulation state shared by the continuous and discrete samplers.
pub struct SimState {
    graph: SiteGraph,
    q: u8,
    beta: f64,
    spins: Vec<u8>,
    counts: Vec<usize>,
    energy: i64,
    /// `metropolis_rate(d, beta)` for `d` in `0..=max_degree`.
    rate_table: Vec<f64>,
}

impl SimState {
    fn new(sigma: &SpinConfig, beta: f64) -> Self {
        let spec = sigma.spec();
        let q = spec.q();
        let mut counts = vec![0; q as usize + 1];
        for &s in sigma.spins() {
            counts[s as usize] += 1;
        }
        let graph = spec.graph();
        let rate_table = (0..=graph.max_degree() as i32).map(|d| metropolis_rate(d, beta)).collect();
        SimState {
            graph,
            q,
            beta,
            spins: sigma.spins().to_vec(),
            counts,
            energy: energy3d(sigma) as i64,
            rate_table,
        }
    }
    pub fn spins(&self) -> &[u8] {
        &self.spins
    }
    /// `counts()[a]` is the number of sites with spin `a`; index 0 unused.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn energy(&self) -> i64 {
        self.energy
    }
    pub fn ground(&self) -> Option<u8> {
        (1..=self.q).find(|&a| self.counts[a as usize] == self.spins.len())
    }
    #[inline]
    fn flip_rate(&self, i: usize, a: u8) -> f64 {
        self.rate_table[self.graph.delta(&self.spins, i, a).max(0) as usize]
    }
    fn site_rate(&self, i: usize) -> f64 {
        (1..=self.q).filter(|&a| a != self.spins[i]).map(|a| self.flip_rate(i, a)).sum()
    }
    fn apply(&mut self, i: usize, a: u8) {
        self.energy += self.graph.delta(&self.spins, i, a) as i64;
        self.counts[self.spins[i] as usize] -= 1;
        self.counts[a as usize] += 1;
        self.spins[i] = a;
    }
}

/// One spin update of a recorded trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub site: u32,
    pub spin: u8,
}

/// Outcome of a single simulated trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySample {
    pub seed: u64,
    pub initial: Vec<u8>,
    /// Empty unless recording was requested.
    pub events: Vec<Event>,
    pub n_events: u64,
    /// Time of the first visit to the target, or elapsed time on timeout.
    pub hitting_time: f64,
    pub hit: bool,
    /// Time spent in ground states up to the stopping time.
    pub ground_time: f64,
}

/// Limits for a single trajectory.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SimBudget {
    pub max_events: u64,
    pub record: bool,
}

impl Default for SimBudget {
    fn default() -> Self {
        SimBudget { max_events: 1 << 32, record: false }
    }
}

/// Continuous-time Metropolis dynamics run until `target` holds.
pub fn simulate_hit(
    sigma0: &SpinConfig,
    target: &dyn Fn(&SimState) -> bool,
    beta: Beta,
    seed: u64,
    budget: SimBudget,
) -> TrajectorySample {
    let mut st = SimState::new(sigma0, beta.get());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = st.spins.len();
    let rates: Vec<f64> = (0..n).map(|i| st.site_rate(i)).collect();
    let mut fw = Fenwick::new(&rates);
    let mut t = 0.0;
    let mut ground_time = 0.0;
    let mut events = Vec::new();
    let mut n_events = 0u64;
    let mut hit = target(&st);
    let mut spin_w = vec![0.0f64; st.q as usize + 1];
    while !hit && n_events < budget.max_events {
        let total = fw.total();
        let e: f64 = Exp1.sample(&mut rng);
        let dt = e / total;
        if st.ground().is_some() {
            ground_time += dt;
        }
        t += dt;
        let u: f64 = rng.random::<f64>() * total;
        let i = fw.find(u);
        let mut acc = 0.0;
        for a in 1..=st.q {
            spin_w[a as usize] = if a == st.spins[i] { 0.0 } else { st.flip_rate(i, a) };
            acc += spin_w[a as usize];
        }
        let mut v = rng.random::<f64>() * acc;
        let mut a_new = 0;
        for a in 1..=st.q {
            let w = spin_w[a as usize];
            if w > 0.0 {
                a_new = a;
                if v < w {
                    break;
                }
                v -= w;
            }
        }
        st.apply(i, a_new);
        n_events += 1;
        if budget.record {
            events.push(Event { time: t, site: i as u32, spin: a_new });
        }
        fw.set(i, st.site_rate(i));
        for k in 0..st.graph.neighbors(i).len() {
            let j = st.graph.neighbors(i)[k] as usize;
            let r = st.site_rate(j);
            fw.set(j, r);
        }
        hit = target(&st);
    }
    TrajectorySample {
        seed,
        initial: sigma0.spins().to_vec(),
        events,
        n_events,
        hitting_time: t,
        hit,
        ground_time,
    }
}

/// Target predicate: the configuration is monochromatic with a spin other than `a`.
pub fn other_ground(a: u8) -> impl Fn(&SimState) -> bool {
    move |s: &SimState| matches!(s.ground(), Some(b) if b != a)
}

/// Target predicate: the configuration equals the monochromatic `a` state.
pub fn ground_of(a: u8) -> impl Fn(&SimState) -> bool {
    move |s: &SimState| s.ground() == Some(a)
}

/// Independent trajectories with seeds `seed_base + i`.
pub fn hitting_ensemble(
    sigma0: &SpinConfig,
    target: &dyn Fn(&SimState) -> bool,
    beta: Beta,
    seed_base: u64,
    n: usize,
    budget: SimBudget,
) -> Vec<TrajectorySample> {
    (0..n)
        .map(|i| simulate_hit(sigma0, target, beta, seed_base.wrapping_add(i as u64), budget))
        .collect()
}

/// Discrete-time chain; returns the visited states' base-q codes, one per step.
pub fn simulate_discrete(sigma0: &SpinConfig, beta: Beta, steps: usize, seed: u64) -> Result<Vec<u64>> {
    let spec = *sigma0.spec();
    let mut st = SimState::new(sigma0, beta.get());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_sites();
    let q = spec.q();
    let mut out = Vec::with_capacity(steps);
    let code_of = |s: &[u8]| {
        crate::lattice::encode_u64(s, q)
            .ok_or_else(|| Error::Unsupported("state code exceeds 64 bits".into()))
    };
    for _ in 0..steps {
        let i = rng.random_range(0..n);
        let a = rng.random_range(1..=q);
        if a != st.spins[i] {
            let d = st.graph.delta(&st.spins, i, a);
            if rng.random::<f64>() < metropolis_rate(d, st.beta) {
                st.apply(i, a);
            }
        }
        out.push(code_of(&st.spins)?);
    }
    Ok(out)
}

/// Ground-state sojourn of the trace process.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceVisit {
    pub ground: u8,
    /// Trace-clock time at which the sojourn starts.
    pub start: f64,
    pub duration: f64,
}

/// Trajectory seen through the accelerated trace clock.
#[derive(Clone, Debug, Serialize)]
pub struct TraceSample {
    pub visits: Vec<TraceVisit>,
    pub trace_time: f64,
    /// Total accelerated time, including time off the ground states.
    pub accelerated_time: f64,
}

/// Accelerates time by `exp(gamma * beta)` and keeps only the clock on ground states.
pub fn trace_transform(sample: &TrajectorySample, q: u8, gamma: u32, beta: Beta) -> Result<TraceSample> {
    if sample.initial.is_empty() {
        return input("trajectory has no initial configuration");
    }
    if sample.n_events as usize != sample.events.len() {
        return input("trajectory was not recorded");
    }
    let scale = (-(gamma as f64) * beta.get()).exp();
    let n = sample.initial.len();
    let mut counts = vec![0usize; q as usize + 1];
    for &s in &sample.initial {
        counts[s as usize] += 1;
    }
    let mut spins = sample.initial.clone();
    let ground = |c: &[usize]| (1..=q).find(|&a| c[a as usize] == n);
    let mut visits: Vec<TraceVisit> = Vec::new();
    let mut trace = 0.0;
    let mut last_t = 0.0;
    let mut cur = ground(&counts);
    let close = |visits: &mut Vec<TraceVisit>, g: u8, trace: &mut f64, dur: f64| {
        match visits.last_mut() {
            Some(v) if v.ground == g && (v.start + v.duration - *trace).abs() == 0.0 => {
                v.duration += dur
            }
            _ => visits.push(TraceVisit { ground: g, start: *trace, duration: dur }),
        }
        *trace += dur;
    };
    for ev in &sample.events {
        if let Some(g) = cur {
            close(&mut visits, g, &mut trace, (ev.time - last_t) * scale);
        }
        last_t = ev.time;
        let i = ev.site as usize;
        counts[spins[i] as usize] -= 1;
        counts[ev.spin as usize] += 1;
        spins[i] = ev.spin;
        cur = ground(&counts);
    }
    if let Some(g) = cur {
        close(&mut visits, g, &mut trace, (sample.hitting_time - last_t) * scale);
    }
    Ok(TraceSample { visits, trace_time: trace, accelerated_time: sample.hitting_time * scale })
}

/// Sample summary for hitting-time ensembles.
#[derive(Clone, Debug, Serialize)]
pub struct HitSummary {
    pub n: usize,
    pub n_timeout: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// Kolmogorov-Smirnov distance of `tau / mean` from Exp(1).
    pub ks_exp1: f64,
}

pub fn summarize(samples: &[TrajectorySample]) -> HitSummary {
    let times: Vec<f64> = samples.iter().filter(|s| s.hit).map(|s| s.hitting_time).collect();
    let n = times.len();
    let mean = times.iter().sum::<f64>() / n.max(1) as f64;
    let variance = if n > 1 {
        times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let scaled: Vec<f64> = times.iter().map(|t| t / mean).collect();
    HitSummary {
        n,
        n_timeout: samples.len() - n,
        mean,
        variance,
        std_error: (variance / n.max(1) as f64).sqrt(),
        ks_exp1: ks_exp1(&scaled),
    }
}

/// Kolmogorov-Smirnov statistic of a sample against the unit exponential law.
pub fn ks_exp1(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x.max(0.0)).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    #[test]
    fn fenwick_samples_proportionally() {
        let fw = Fenwick::new(&[1.0, 0.0, 3.0, 2.0]);
        assert_eq!(fw.find(0.5), 0);
        assert_eq!(fw.find(1.0), 2);
        assert_eq!(fw.find(3.99), 2);
        assert_eq!(fw.find(4.0), 3);
        assert_eq!(fw.find(5.99), 3);
    }

    #[test]
    fn fenwick_updates() {
        let mut fw = Fenwick::new(&[1.0; 5]);
        fw.set(2, 0.0);
        fw.set(4, 10.0);
        assert_eq!(fw.find(2.5), 3);
        assert_eq!(fw.find(3.5), 4);
        assert!((fw.total() - 13.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        let spec = LatticeSpec::open(2, 2, 2, 3).unwrap();
        let s = SpinConfig::new(spec, vec![1, 2, 3, 1, 2, 2, 1, 3]).unwrap();
        let k = discrete_kernel(&s, 1.3);
        assert!((k.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_perfect_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
        assert!(ks_exp1(&xs) <= 0.5 / n as f64 + 1e-12);
    }
}
