mod common;

use common::{bond_energy, random_config, rng};
use potts3d::dynamics::{
    discrete_kernel, ground_of, hitting_ensemble, ks_exp1, log_partition, metropolis_rate, other_ground, rate,
    simulate_discrete, simulate_hit, summarize, trace_transform, Beta, SimBudget,
};
use potts3d::landscape::{mask_of, FullSpace, Space};
use potts3d::potential::{mean_hitting_direct, ReversibleChain, SolverBudget};
use potts3d::{LatticeSpec, SpinConfig};
use rand::Rng;

fn all_configs(spec: &LatticeSpec) -> Vec<Vec<u8>> {
    let n = spec.n_sites();
    let q = spec.q() as u64;
    (0..q.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let d = (c % q) as u8 + 1;
                    c /= q;
                    d
                })
                .collect()
        })
        .collect()
}

#[test]
fn beta_must_be_positive_and_finite() {
    assert!(Beta::new(0.0).is_err());
    assert!(Beta::new(f64::NAN).is_err());
    assert!(Beta::new(f64::INFINITY).is_err());
    assert_eq!(Beta::new(2.5).unwrap().get(), 2.5);
}

#[test]
fn metropolis_rates() {
    assert_eq!(metropolis_rate(-4, 3.0), 1.0);
    assert_eq!(metropolis_rate(0, 3.0), 1.0);
    assert!((metropolis_rate(2, 1.5) - (-3.0f64).exp()).abs() < 1e-15);
    let spec = LatticeSpec::periodic(3, 3, 3, 2).unwrap();
    let s = SpinConfig::monochrome(spec, 1).unwrap();
    let up = s.flip(spec.site(4), 2).unwrap();
    assert_eq!(rate(&up, &s, 2.0), 1.0);
    assert!((rate(&s, &up, 2.0) - (-12.0f64).exp()).abs() < 1e-18);
    let two = up.flip(spec.site(5), 2).unwrap();
    assert_eq!(rate(&s, &two, 2.0), 0.0);
    assert_eq!(rate(&s, &s, 2.0), 0.0);
}

#[test]
fn detailed_balance_on_random_pairs() {
    let spec = LatticeSpec::open(2, 3, 3, 3).unwrap();
    let mut r = rng(21);
    let beta = 1.7;
    for _ in 0..500 {
        let s = random_config(&spec, &mut r);
        let t = s.flip(spec.site(r.random_range(0..spec.n_sites())), r.random_range(1..=3)).unwrap();
        if s == t {
            continue;
        }
        let lhs = (-beta * bond_energy(&spec, s.spins()) as f64).exp() * rate(&s, &t, beta);
        let rhs = (-beta * bond_energy(&spec, t.spins()) as f64).exp() * rate(&t, &s, beta);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
    }
}

#[test]
fn discrete_kernel_rows_and_scaling() {
    let spec = LatticeSpec::open(2, 2, 3, 3).unwrap();
    let mut r = rng(22);
    let beta = 1.3;
    let scale = spec.q() as f64 * spec.n_sites() as f64;
    for _ in 0..50 {
        let s = random_config(&spec, &mut r);
        let k = discrete_kernel(&s, beta);
        assert!((k.total() - 1.0).abs() < 1e-12);
        assert!(k.hold >= 0.0);
        assert_eq!(k.moves.len(), spec.n_sites() * (spec.q() as usize - 1));
        for m in &k.moves {
            let t = s.flip(spec.site(m.site), m.spin).unwrap();
            assert!((scale * m.prob - rate(&s, &t, beta)).abs() < 1e-12);
        }
    }
}

#[test]
fn partition_function_of_smallest_open_box() {
    let spec = LatticeSpec::open(2, 2, 2, 2).unwrap();
    let energies: Vec<u32> = all_configs(&spec).iter().map(|s| bond_energy(&spec, s)).collect();
    let mut hist = std::collections::BTreeMap::new();
    for &e in &energies {
        *hist.entry(e).or_insert(0u32) += 1;
    }
    assert_eq!(hist[&0], 2);
    assert_eq!(hist[&3], 16);
    assert!(!hist.contains_key(&1) && !hist.contains_key(&2));
    for beta in [0.5, 2.0, 5.0] {
        let direct: f64 = hist.iter().map(|(&e, &c)| c as f64 * (-beta * e as f64).exp()).sum();
        assert!((log_partition(energies.iter().copied(), beta) - direct.ln()).abs() < 1e-12);
    }
    let z = log_partition(energies.iter().copied(), 8.0).exp();
    assert!((z - 2.0 - 16.0 * (-24.0f64).exp()).abs() < 1e-12);
}

#[test]
fn simulated_mean_matches_exact_hitting_time() {
    let spec = LatticeSpec::open(2, 2, 2, 2).unwrap();
    let beta = Beta::new(2.0).unwrap();
    let space = FullSpace::of_lattice(&spec, 1 << 20).unwrap();
    let chain = ReversibleChain::from_space(&space, beta).unwrap();
    let g = space.ground_states();
    let target = mask_of(space.len(), [g[1]]);
    let exact = mean_hitting_direct(&chain, g[0], &target, SolverBudget::default()).unwrap();
    let s1 = SpinConfig::monochrome(spec, 1).unwrap();
    let samples = hitting_ensemble(&s1, &ground_of(2), beta, 1000, 2000, SimBudget::default());
    let sum = summarize(&samples);
    assert_eq!(sum.n_timeout, 0);
    assert!(
        (sum.mean - exact).abs() < 3.0 * sum.std_error,
        "mean {} exact {} se {}",
        sum.mean,
        exact,
        sum.std_error
    );
}

#[test]
fn trajectories_are_reproducible_and_recorded() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let s1 = SpinConfig::monochrome(spec, 1).unwrap();
    let beta = Beta::new(2.0).unwrap();
    let budget = SimBudget { max_events: 1 << 24, record: true };
    let a = simulate_hit(&s1, &other_ground(1), beta, 7, budget);
    let b = simulate_hit(&s1, &other_ground(1), beta, 7, budget);
    assert!(a.hit);
    assert_eq!(a.events, b.events);
    assert_eq!(a.hitting_time, b.hitting_time);
    assert_eq!(a.n_events as usize, a.events.len());
    // Replaying the events lands on the other ground state.
    let mut spins = a.initial.clone();
    for e in &a.events {
        spins[e.site as usize] = e.spin;
    }
    assert!(spins.iter().all(|&x| x == 2));
    assert!(a.events.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn event_budget_stops_a_trajectory() {
    let spec = LatticeSpec::periodic(3, 3, 3, 2).unwrap();
    let s1 = SpinConfig::monochrome(spec, 1).unwrap();
    let t = simulate_hit(&s1, &other_ground(1), Beta::new(3.0).unwrap(), 1, SimBudget { max_events: 50, record: false });
    assert!(!t.hit);
    assert_eq!(t.n_events, 50);
}

#[test]
fn trace_clock_is_dominated_by_ground_states() {
    let spec = LatticeSpec::open(2, 2, 3, 2).unwrap();
    let s1 = SpinConfig::monochrome(spec, 1).unwrap();
    let beta = Beta::new(3.0).unwrap();
    let budget = SimBudget { max_events: 1 << 26, record: true };
    let mut off = 0.0;
    let mut total = 0.0;
    for seed in 0..40 {
        let t = simulate_hit(&s1, &other_ground(1), beta, seed, budget);
        let tr = trace_transform(&t, 2, 6, beta).unwrap();
        assert!(tr.trace_time <= tr.accelerated_time * (1.0 + 1e-12));
        assert!((tr.visits.iter().map(|v| v.duration).sum::<f64>() - tr.trace_time).abs() < 1e-9 * tr.trace_time.max(1.0));
        assert!((t.ground_time * (-18.0f64).exp() - tr.trace_time).abs() <= 1e-9 * tr.trace_time.max(1e-300));
        off += tr.accelerated_time - tr.trace_time;
        total += tr.accelerated_time;
    }
    assert!(off / total < 0.05, "fraction off ground {}", off / total);
}

#[test]
fn trace_requires_a_recording() {
    let spec = LatticeSpec::open(2, 2, 2, 2).unwrap();
    let s1 = SpinConfig::monochrome(spec, 1).unwrap();
    let beta = Beta::new(1.0).unwrap();
    let t = simulate_hit(&s1, &other_ground(1), beta, 3, SimBudget::default());
    assert!(t.n_events == 0 || trace_transform(&t, 2, 3, beta).is_err());
}

#[test]
fn discrete_chain_occupation_tracks_gibbs() {
    let spec = LatticeSpec::open(2, 2, 2, 2).unwrap();
    let beta = 0.4;
    let s1 = SpinConfig::monochrome(spec, 1).unwrap();
    let visits = simulate_discrete(&s1, Beta::new(beta).unwrap(), 400_000, 9).unwrap();
    let ground = visits.iter().filter(|&&c| c == 0 || c == 255).count() as f64 / visits.len() as f64;
    let configs = all_configs(&spec);
    let z: f64 = configs.iter().map(|s| (-beta * bond_energy(&spec, s) as f64).exp()).sum();
    let exact = 2.0 / z;
    assert!((ground - exact).abs() < 0.01, "ground occupation {ground} vs {exact}");
}

#[test]
fn ks_statistic_limits() {
    assert_eq!(ks_exp1(&[]), 1.0);
    let n = 10_000;
    let quantiles: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
    assert!(ks_exp1(&quantiles) < 1e-3);
    assert!(ks_exp1(&vec![1.0; 100]) > 0.5);
}
