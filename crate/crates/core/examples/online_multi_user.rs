//! Users that do not know θ: Rule 2 keeps playing the proportional rule on
//! its estimates, Rule 3 explores for ln T slots and then plays the symmetric
//! optimum for its estimates.
//!
//! ```bash
//! cargo run --release --example online_multi_user
//! ```

use cogmac::harness::{simulate_multi_user, ExperimentConfig, StrategyId};
use cogmac::multi_user::{exploitation_start, nash_strategy, optimal_symmetric_strategy};
use cogmac::ThetaVector;

fn main() -> cogmac::Result<()> {
    let theta = ThetaVector::new(vec![0.9, 0.7, 0.5, 0.3])?;
    let (k, t) = (10, 5_000);
    println!("Rule 3 exploits from slot {}", exploitation_start(t as u64));

    let nash = nash_strategy(&theta)?;
    let sym = optimal_symmetric_strategy(&theta, k)?.strategy;
    for (id, target) in [(StrategyId::Rule2, &nash), (StrategyId::Rule3, &sym)] {
        let config = ExperimentConfig::fixed(theta.clone(), id, t).with_users(k).with_seed(21);
        let run = simulate_multi_user(&config, 0)?;
        let late = run.selection_frequencies(0, t / 2, t);
        println!("\n{}: user 1 in the second half of the block", id.name());
        for (i, (f, p)) in late.iter().zip(target.probabilities()).enumerate() {
            println!("  channel {}: chose {f:.3}, target {p:.3}", i + 1);
        }
        println!("  total bits {:.0}, gap to clairvoyant {:.0}", run.cumulative_total[t - 1], run.cumulative_gap[t - 1]);
    }
    Ok(())
}
