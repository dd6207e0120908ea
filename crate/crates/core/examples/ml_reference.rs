//! Regenerates `tests/data/ml_cdf_reference.csv`: Monte-Carlo estimates of
//! `P[Y_alpha <= y]` from 10^8 draws per order.
//!
//! `cargo run --release -p occtime-core --example ml_reference > crates/core/tests/data/ml_cdf_reference.csv`

use occtime_core::distributions::MlSpec;
use occtime_core::rng::trial_stream;

const SEED: u64 = 20_240_601;
const DRAWS: u64 = 100_000_000;
const YS: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.5];

fn main() {
    println!("# seed={SEED} draws={DRAWS}");
    println!("alpha,y,cdf,stderr");
    for (i, &alpha) in [0.3, 0.5, 0.8].iter().enumerate() {
        let ml = MlSpec::new(alpha).unwrap();
        let mut rng = trial_stream(SEED, i as u64);
        let mut below = [0u64; YS.len()];
        for _ in 0..DRAWS {
            let y = ml.sample(&mut rng);
            for (b, &t) in below.iter_mut().zip(&YS) {
                *b += (y <= t) as u64;
            }
        }
        for (b, &t) in below.iter().zip(&YS) {
            let p = *b as f64 / DRAWS as f64;
            let se = (p * (1.0 - p) / DRAWS as f64).sqrt();
            println!("{alpha},{t},{p:.7},{se:.2e}");
        }
    }
}
