//! Box geometry: neighbour lists, axis-permutation orbits and the configuration codec.
use potts3d::{LatticeSpec, Site, SpinConfig};

fn main() -> potts3d::Result<()> {
    let torus = LatticeSpec::periodic(3, 3, 4, 3)?;
    let open = LatticeSpec::open(3, 3, 4, 3)?;
    let corner = Site::new(1, 1, 1);
    println!("{torus}: corner has {} neighbours", torus.neighbors(corner)?.len());
    println!("{open}: corner has {} neighbours", open.neighbors(corner)?.len());

    let mut sigma = SpinConfig::monochrome(torus, 1)?;
    sigma.set_index(0, 2);
    sigma.set_index(torus.index(Site::new(2, 1, 1))?, 3);
    println!("orbit under allowed axis permutations: {} configurations", sigma.upsilon_orbit().len());

    let code = sigma.to_compact();
    let back = SpinConfig::from_compact(torus, &code)?;
    assert_eq!(back, sigma);
    println!("base-q code {code} round-trips; JSON form {}", sigma.to_json());
    Ok(())
}
