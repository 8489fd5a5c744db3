//! Exact Bayesian optimum for two channels with uniform priors, and how much
//! the greedy rule leaves on the table.
//!
//! ```bash
//! cargo run --example bayes_dp
//! ```

use cogmac::belief::{BetaBelief, Belief, Counts};
use cogmac::harness::{run_single_user, ExperimentConfig, StrategyId};
use cogmac::planning::{lattice_size, optimal_value};
use cogmac::ThetaVector;

fn main() -> cogmac::Result<()> {
    let prior = Belief::from(BetaBelief::uniform(2));

    println!("horizon  states      V*(prior)  V*/T");
    for t in [1, 2, 5, 10, 20, 40] {
        let plan = optimal_value(&prior, t, 1.0)?;
        println!("{t:>7}  {:>9}  {:>9.4}  {:.4}", lattice_size(2, t), plan.value, plan.value / t as f64);
    }

    // After one free and one busy slot on channel 0, with channel 1 untouched.
    let plan = optimal_value(&prior, 10, 1.0)?;
    let seen = [Counts::new(1, 1), Counts::new(0, 0)];
    println!(
        "\nafter (1 free, 1 busy) on channel 1: sense channel {} next, {:.4} bits still to come",
        plan.action_at(&seen).expect("reachable") + 1,
        plan.value_at(&seen).expect("reachable")
    );

    // The DP value is an average over θ ~ prior; a fixed θ shows the policy on
    // one instance.
    let theta = ThetaVector::new(vec![0.3, 0.7])?;
    for id in [StrategyId::OptimalDp, StrategyId::Myopic] {
        let config = ExperimentConfig::fixed(theta.clone(), id, 30).with_replications(2000).with_seed(11);
        let s = run_single_user(&config)?.summary;
        println!(
            "{:<10} θ=(0.3, 0.7) T=30: throughput {:.3} ± {:.3}",
            id.name(),
            s.throughput.mean,
            s.throughput.stderr.unwrap_or(0.0)
        );
    }
    Ok(())
}
