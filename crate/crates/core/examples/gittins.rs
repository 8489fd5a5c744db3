//! Discounted Gittins indices of Beta arms and the Gittins policy on a fixed
//! three-channel instance.
//!
//! ```bash
//! cargo run --release --example gittins
//! ```

use cogmac::harness::{run_single_user, ExperimentConfig, StrategyId};
use cogmac::planning::{gittins_index, GittinsParams, GittinsTable};
use cogmac::ThetaVector;

fn main() -> cogmac::Result<()> {
    let params = GittinsParams {
        discount: 0.9,
        state_truncation: 200,
        tolerance: 1e-4,
    };
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (5.0, 5.0), (0.5, 0.5)] {
        let g = gittins_index(a, b, &params)?;
        println!("Beta({a}, {b}): mean {:.4}  index {:.6}  (truncation bound {:.1e})", a / (a + b), g.value, g.truncation_bound);
    }

    let table = GittinsTable::build(params)?;
    println!("\nindex grows with successes, shrinks with failures:");
    for a in 1..=4 {
        let row: Vec<String> = (1..=4).map(|b| format!("{:.4}", table.get(a, b).unwrap())).collect();
        println!("  a = {a}: {}", row.join("  "));
    }

    let theta = ThetaVector::new(vec![0.5, 0.7, 0.3])?;
    let mut config = ExperimentConfig::fixed(theta, StrategyId::Gittins, 500).with_replications(200).with_seed(3);
    config.strategy.gittins = params;
    let s = run_single_user(&config)?.summary;
    println!(
        "\nGittins on θ = (0.5, 0.7, 0.3), T = 500: loss {:.2} ± {:.2}, pulls {:?}",
        s.expected_loss.as_ref().map_or(f64::NAN, |e| e.mean),
        s.expected_loss.as_ref().and_then(|e| e.stderr).unwrap_or(0.0),
        s.mean_pulls.unwrap_or_default().iter().map(|p| p.round()).collect::<Vec<_>>()
    );
    Ok(())
}
