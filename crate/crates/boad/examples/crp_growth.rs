//! How the concentration parameter shapes archive growth.
//!
//! Each round the optimizer flips a biased coin: grow the archive with a
//! freshly generated design, or keep exploiting the current one. The bias is
//! `theta / (theta + archive_size)`, so growth slows as the archive fills.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example crp_growth
//! ```

use boad::archive::crp_expansion_decision;
use boad::rng::Stream;

fn arms_added(theta: f64, rounds: u64, bootstrap: usize, seed: u64) -> u64 {
    let mut size = bootstrap;
    let mut added = 0;
    for round in 1..=rounds {
        let draw = Stream::named(seed, round, "expansion").next_f64();
        if crp_expansion_decision(theta, size, draw).unwrap() {
            size += 1;
            added += 1;
        }
    }
    added
}

fn main() {
    const ROUNDS: u64 = 100;
    const BOOTSTRAP: usize = 3;
    const SEEDS: u64 = 500;

    println!("archive growth over {ROUNDS} rounds, bootstrap {BOOTSTRAP}, {SEEDS} seeds\n");
    println!("theta   mean added   min   max");
    for theta in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let counts: Vec<u64> = (0..SEEDS)
            .map(|seed| arms_added(theta, ROUNDS, BOOTSTRAP, seed))
            .collect();
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        let min = counts.iter().min().unwrap();
        let max = counts.iter().max().unwrap();
        println!("{theta:>5}   {mean:>10.2}   {min:>3}   {max:>3}");
    }

    // The growth rate is logarithmic in time: doubling the horizon adds
    // roughly theta * ln(2) more arms, not twice as many.
    let short = arms_added(2.0, 100, BOOTSTRAP, 7);
    let long = arms_added(2.0, 200, BOOTSTRAP, 7);
    println!("\ntheta 2.0, seed 7: {short} arms by round 100, {long} by round 200");
}
