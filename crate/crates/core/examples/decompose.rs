//! Splits a random 3x3 filter bank into cascaded convolutions under both
//! schemes, checks the cascade against the projected filter, and prints FLOPs.
//!
//! ```text
//! cargo run --example decompose -- [energy]
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trp_core::net::conv2d_same;
use trp_core::reshape::{decompose_export, flops_report, low_rank_project, DecompScheme, WeightTensor4D};

fn main() -> trp_core::Result<()> {
    let energy: f64 = std::env::args().nth(1).map_or(0.3, |s| s.parse().expect("energy"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dims = (32, 16, 3, 3);
    let data = (0..32 * 16 * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = WeightTensor4D::new(dims, data)?;
    let (h, wd) = (16, 16);
    let input: Vec<f64> = (0..16 * h * wd).map(|_| rng.random_range(0.0..1.0)).collect();

    println!("filter {dims:?} on a {h}x{wd} map, energy threshold {energy}");
    for scheme in [DecompScheme::ChannelWise, DecompScheme::SpatialWise] {
        let pair = decompose_export(&w, scheme, energy)?;
        let (projected, _) = low_rank_project(&w, scheme, energy)?;
        let mid = conv2d_same(&input, (16, h, wd), &pair.first, &vec![0.0; pair.rank]);
        let cascade = conv2d_same(&mid, (pair.rank, h, wd), &pair.second, &vec![0.0; 32]);
        let direct = conv2d_same(&input, (16, h, wd), &projected, &vec![0.0; 32]);
        let err = cascade.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let f = flops_report(dims, (h, wd), scheme, pair.rank);
        println!(
            "{scheme:>8}: rank {:>2}, factors {:?} + {:?}, MACs {} -> {} ({:.2}x), cascade error {err:.1e}",
            pair.rank,
            pair.first.dims(),
            pair.second.dims(),
            f.original,
            f.decomposed,
            f.speedup
        );
    }
    Ok(())
}
