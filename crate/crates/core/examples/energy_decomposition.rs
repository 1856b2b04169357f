//! Splits the energy of random configurations into floor and pillar parts
//! and checks the pillar lower bound.
use potts3d::energy::{decompose, energy3d, pillar_bound};
use potts3d::{LatticeSpec, SpinConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> potts3d::Result<()> {
    let spec = LatticeSpec::periodic(3, 4, 5, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let spins: Vec<u8> = (0..spec.n_sites()).map(|_| rng.random_range(1..=spec.q())).collect();
        let sigma = SpinConfig::new(spec, spins)?;
        let d = decompose(&sigma);
        let pb = pillar_bound(&sigma);
        println!(
            "H = {:3}  floors {:?}  pillars sum {:3}  bound {:3} holds {}",
            energy3d(&sigma),
            d.floors,
            d.pillars.iter().sum::<u32>(),
            pb.bound,
            pb.holds()
        );
        assert_eq!(d.total(), energy3d(&sigma));
    }
    Ok(())
}
