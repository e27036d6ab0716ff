//! UCB arm scoring and top-k selection, step by step.
//!
//! Run with:
//!
//! ```not_rust
//! cargo run -q --example ucb_selection
//! ```

use boad::bandit::{select_top_k, ucb_score, ArmId, ArmStats};

fn arm(id: &str, created_round: u64, samples: u64, positives: u64) -> ArmStats {
    let mut s = ArmStats::new(ArmId::new(id), created_round);
    s.sample_count = samples;
    s.label_sum = positives;
    s
}

fn main() {
    // A small archive after a few rounds: one arm never tried, two with
    // different track records.
    let stats = vec![
        arm("navigator", 1, 24, 21),
        arm("reproducer", 1, 24, 15),
        arm("newcomer", 4, 0, 0),
    ];

    println!("round  arm         mean    score");
    for round in [5u64, 50, 500] {
        for s in &stats {
            let score = ucb_score(s.mean(), s.sample_count, round).unwrap();
            println!(
                "{round:>5}  {:<10}  {}  {score:.4}",
                s.arm_id.as_str(),
                s.mean().map_or("  -  ".into(), |m| format!("{m:.3}")),
            );
        }
        let picked = select_top_k(&stats, round, 2).unwrap();
        let names: Vec<&str> = picked.chosen.iter().map(|a| a.as_str()).collect();
        println!("       -> selected {names:?}\n");
    }

    // The unvisited arm scores +inf, so it is always pulled into the team
    // first; once everything has data the bonus term decides the rest.
    let fresh = ucb_score(None, 0, 500).unwrap();
    println!("unvisited arm score: {fresh}");

    // Ties are broken by score, then earlier creation, then id — selection
    // is fully deterministic and never consults a random source.
    let tied = vec![arm("b_late", 3, 10, 5), arm("a_late", 3, 10, 5)];
    let picked = select_top_k(&tied, 20, 1).unwrap();
    println!("tie at mean 0.5 resolves to: {}", picked.chosen[0].as_str());
}
