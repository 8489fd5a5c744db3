//! One channel with unknown θ against one with known θ: the stopping index
//! says how good the known channel must be before the unknown one is not
//! worth exploring.
//!
//! ```bash
//! cargo run --example one_known_channel
//! ```

use cogmac::belief::{BetaBelief, Belief};
use cogmac::planning::{stopping_index, OneKnownChannel};
use cogmac::Strategy;

fn main() -> cogmac::Result<()> {
    let uniform = Belief::from(BetaBelief::uniform(1));
    println!("Beta(1,1) unknown channel");
    for t in [1, 2, 5, 10, 50, 200] {
        println!("  T = {t:>3}: index {:.6}", stopping_index(&uniform, t)?);
    }

    let skeptical = Belief::from(BetaBelief::new(vec![1.0], vec![4.0])?);
    println!("Beta(1,4) unknown channel, T = 50: index {:.6}", stopping_index(&skeptical, 50)?);

    // Play the rule against a run of busy slots on the unknown channel.
    let mut rule = OneKnownChannel::new(uniform, 0.6, 50)?;
    for slot in 1..=50 {
        let channel = rule.select(slot);
        if channel == 1 {
            println!("switched to the known channel (θ = 0.6) at slot {slot}");
            break;
        }
        rule.observe(channel, slot % 3 == 0);
    }
    println!("committed to the known channel: {}", rule.on_known());
    Ok(())
}
