//! UCB Rule 1 loss growth against the KL lower bound, with the non-learning
//! baselines for scale.
//!
//! ```bash
//! cargo run --release --example ucb_regret
//! ```

use cogmac::harness::{run_single_user, ExperimentConfig, StrategyId};
use cogmac::single_user::{regret_lower_bound_coefficient, ucb_index};
use cogmac::ThetaVector;

fn main() -> cogmac::Result<()> {
    println!("index after 3 free of 4 senses at slot 100: {:.6}", ucb_index(3, 4, 100)?);

    let theta = ThetaVector::new(vec![0.9, 0.6])?;
    let bound = regret_lower_bound_coefficient(&theta, 1.0);
    println!("θ = (0.9, 0.6): any consistent rule loses at least {bound:.4} ln T bits\n");

    println!("strategy          T      loss      loss / ln T");
    for id in [StrategyId::UcbRule1, StrategyId::Random, StrategyId::StayWinnerRr] {
        for t in [100, 1_000, 10_000] {
            let config = ExperimentConfig::fixed(theta.clone(), id, t).with_replications(200).with_seed(5);
            let s = run_single_user(&config)?.summary;
            let loss = s.expected_loss.expect("fixed θ").mean;
            println!("{:<16} {t:>6}  {loss:>8.2}  {:>8.3}", id.name(), loss / (t as f64).ln());
        }
    }
    Ok(())
}
