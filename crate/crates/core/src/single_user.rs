//! Online single-user sensing rules and the loss accounting against a
//! clairvoyant user who always senses the best channel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, BetaBelief};
use crate::error::{Error, Result};
use crate::model::ThetaVector;
use crate::rng::StreamRng;
use crate::strategy::{argmax, Strategy};

/// Upper-confidence index `x/y + sqrt(2 ln j / y)`.
///
/// `y` must be positive; the initialization round of [`UcbRule1`] guarantees it.
pub fn ucb_index(x: u64, y: u64, slot: u64) -> Result<f64> {
    if y == 0 || slot == 0 {
        return Err(Error::Precondition("ucb_index needs y >= 1 and j >= 1".into()));
    }
    let y = y as f64;
    Ok(x as f64 / y + (2.0 * (slot as f64).ln() / y).sqrt())
}

/// Sensing statistics: free observations `x[i]` out of `y[i]` senses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountStats {
    pub x: Vec<u64>,
    pub y: Vec<u64>,
}

impl CountStats {
    pub fn new(n_channels: usize) -> Self {
        Self {
            x: vec![0; n_channels],
            y: vec![0; n_channels],
        }
    }

    pub fn record(&mut self, channel: usize, free: bool) {
        self.y[channel] += 1;
        if free {
            self.x[channel] += 1;
        }
    }

    pub fn elapsed(&self) -> u64 {
        self.y.iter().sum()
    }
}

/// The order-optimal single index rule: sense each channel once, then always
/// the channel with the largest [`ucb_index`]. The slot counter inside the
/// logarithm is the global one, initialization slots included.
#[derive(Debug, Clone)]
pub struct UcbRule1 {
    stats: CountStats,
}

impl UcbRule1 {
    pub fn new(n_channels: usize) -> Self {
        assert!(n_channels >= 1, "need at least one channel");
        Self {
            stats: CountStats::new(n_channels),
        }
    }

    pub fn stats(&self) -> &CountStats {
        &self.stats
    }
}

impl Strategy for UcbRule1 {
    fn select(&mut self, slot: u64) -> usize {
        if let Some(unsensed) = self.stats.y.iter().position(|&y| y == 0) {
            return unsensed;
        }
        let s = &self.stats;
        argmax((0..s.x.len()).map(|i| ucb_index(s.x[i], s.y[i], slot).expect("initialized")))
    }

    fn observe(&mut self, channel: usize, free: bool) {
        self.stats.record(channel, free);
    }
}

/// Uniform i.i.d. channel choice.
#[derive(Debug, Clone)]
pub struct RandomStrategy {
    n_channels: usize,
    rng: StreamRng,
}

impl RandomStrategy {
    pub fn new(n_channels: usize, rng: StreamRng) -> Self {
        assert!(n_channels >= 1, "need at least one channel");
        Self { n_channels, rng }
    }
}

impl Strategy for RandomStrategy {
    fn select(&mut self, _slot: u64) -> usize {
        self.rng.random_range(0..self.n_channels)
    }

    fn observe(&mut self, _channel: usize, _free: bool) {}
}

/// Always senses the channel with the largest posterior mean.
#[derive(Debug, Clone)]
pub struct MyopicStrategy {
    belief: Belief,
}

impl MyopicStrategy {
    pub fn new(prior: Belief) -> Self {
        Self { belief: prior }
    }

    /// Beta(1, 1) on every channel.
    pub fn uniform(n_channels: usize) -> Self {
        Self::new(BetaBelief::uniform(n_channels).into())
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }
}

impl Strategy for MyopicStrategy {
    fn select(&mut self, _slot: u64) -> usize {
        argmax((0..self.belief.n_channels()).map(|i| self.belief.posterior_mean(i)))
    }

    fn observe(&mut self, channel: usize, free: bool) {
        // A zero-likelihood outcome cannot come from a θ inside the prior's
        // support; keep the current belief in that case.
        let _ = self.belief.observe(channel, free);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchRule {
    /// Move to the next channel index, wrapping around.
    RoundRobin,
    /// Move to a uniformly chosen different channel.
    UniformRandom,
}

/// Stay on a channel while it is found free, switch away after a busy slot.
#[derive(Debug, Clone)]
pub struct StayWithWinner {
    n_channels: usize,
    rule: SwitchRule,
    current: Option<usize>,
    rng: StreamRng,
}

impl StayWithWinner {
    pub fn new(n_channels: usize, rule: SwitchRule, rng: StreamRng) -> Self {
        assert!(n_channels >= 1, "need at least one channel");
        Self {
            n_channels,
            rule,
            current: None,
            rng,
        }
    }
}

impl Strategy for StayWithWinner {
    fn select(&mut self, _slot: u64) -> usize {
        match self.current {
            Some(c) => c,
            None => {
                let c = self.rng.random_range(0..self.n_channels);
                self.current = Some(c);
                c
            }
        }
    }

    fn observe(&mut self, channel: usize, free: bool) {
        if free || self.n_channels == 1 {
            self.current = Some(channel);
            return;
        }
        let next = match self.rule {
            SwitchRule::RoundRobin => (channel + 1) % self.n_channels,
            SwitchRule::UniformRandom => {
                let k = self.rng.random_range(0..self.n_channels - 1);
                if k >= channel {
                    k + 1
                } else {
                    k
                }
            }
        };
        self.current = Some(next);
    }
}

/// Kullback-Leibler divergence between Bernoulli(p) and Bernoulli(q), with
/// `0 ln 0 = 0`. Returns `f64::INFINITY` when `q` is 0 or 1 and `p != q`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    fn term(x: f64, y: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x * (x / y).ln()
        }
    }
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Coefficient of `ln T` in the asymptotic loss lower bound of any consistent
/// strategy: `B Σ (θ* - θ_i) / D(θ_i || θ*)` over suboptimal channels.
/// Channels with infinite divergence contribute nothing.
pub fn regret_lower_bound_coefficient(theta: &ThetaVector, bits_per_slot: f64) -> f64 {
    let (_, best) = theta.best();
    bits_per_slot
        * theta
            .values()
            .iter()
            .filter(|&&t| t < best)
            .map(|&t| {
                let d = kl_bernoulli(t, best);
                if d.is_infinite() {
                    0.0
                } else {
                    (best - t) / d
                }
            })
            .sum::<f64>()
}

/// Loss of one run relative to the clairvoyant user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `B (T θ* - free slots actually used)`.
    pub realized_loss: f64,
    /// `B Σ_i (θ* - θ_i) pulls_i`, the θ-weighted form of the expected loss.
    pub expected_loss: f64,
    pub lower_bound_coefficient: f64,
    pub per_channel_pulls: Vec<u64>,
    pub bits_won: f64,
}

/// Builds the [`LossReport`] of a run with `pulls[i]` senses of channel `i`
/// and `free_won` slots in which the sensed channel was free.
pub fn compute_loss(theta: &ThetaVector, pulls: &[u64], n_slots: u64, bits_per_slot: f64, free_won: u64) -> Result<LossReport> {
    if pulls.len() != theta.n_channels() {
        return Err(Error::Precondition(format!(
            "{} pull counts for {} channels",
            pulls.len(),
            theta.n_channels()
        )));
    }
    let total: u64 = pulls.iter().sum();
    if total != n_slots {
        return Err(Error::CountMismatch {
            expected: n_slots,
            got: total,
        });
    }
    if free_won > n_slots {
        return Err(Error::Precondition("more free slots won than slots".into()));
    }
    let (_, best) = theta.best();
    let expected_loss = bits_per_slot
        * theta
            .values()
            .iter()
            .zip(pulls)
            .map(|(&t, &n)| (best - t) * n as f64)
            .sum::<f64>();
    let bits_won = bits_per_slot * free_won as f64;
    Ok(LossReport {
        realized_loss: bits_per_slot * n_slots as f64 * best - bits_won,
        expected_loss,
        lower_bound_coefficient: regret_lower_bound_coefficient(theta, bits_per_slot),
        per_channel_pulls: pulls.to_vec(),
        bits_won,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use crate::strategy::Strategy;

    fn theta(v: &[f64]) -> ThetaVector {
        ThetaVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ucb_index_values() {
        assert_eq!(ucb_index(0, 1, 1).unwrap(), 0.0);
        assert!(ucb_index(5, 5, 30).unwrap() >= 1.0);
        let expected = 0.75 + (2.0 * 100f64.ln() / 4.0).sqrt();
        assert_abs_diff_eq!(ucb_index(3, 4, 100).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(ucb_index(3, 4, 100).unwrap(), 2.267427, epsilon = 1e-6);
        assert!(ucb_index(0, 0, 3).is_err());
    }

    proptest! {
        #[test]
        fn ucb_index_is_monotone(y in 1u64..1000, x_frac in 0.0f64..1.0, j in 1u64..100_000) {
            let x = ((y as f64) * x_frac) as u64;
            if x < y {
                prop_assert!(ucb_index(x + 1, y, j).unwrap() > ucb_index(x, y, j).unwrap());
            }
            prop_assert!(ucb_index(x, y, j + 1).unwrap() > ucb_index(x, y, j).unwrap());
        }
    }

    #[test]
    fn rule1_initialization_order() {
        let mut s = UcbRule1::new(3);
        for (slot, expected) in [(1, 0), (2, 1), (3, 2)] {
            let c = s.select(slot);
            assert_eq!(c, expected);
            s.observe(c, slot == 1);
        }
        // observations (1, 0, 0): channel 1 has the larger mean and equal bonus
        assert_eq!(s.select(4), 0);
    }

    #[test]
    fn rule1_single_channel() {
        let mut s = UcbRule1::new(1);
        for j in 1..50 {
            assert_eq!(s.select(j), 0);
            s.observe(0, j % 3 == 0);
        }
    }

    #[test]
    fn random_strategy_frequencies() {
        let mut one = RandomStrategy::new(1, stream(1, Stream::User(0)));
        assert!((1..100).all(|j| one.select(j) == 0));
        let mut two = RandomStrategy::new(2, stream(2, Stream::User(0)));
        let n = 100_000;
        let ones = (1..=n).filter(|&j| two.select(j) == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn myopic_follows_posterior_mean() {
        let mut known = MyopicStrategy::new(crate::belief::GridBelief::point_mass(vec![0.9, 0.5]).unwrap().into());
        for j in 1..20 {
            assert_eq!(known.select(j), 0);
            known.observe(0, j % 2 == 0);
        }
        let mut s = MyopicStrategy::uniform(2);
        assert_eq!(s.select(1), 0);
        s.observe(0, true);
        assert_eq!(s.select(2), 0);
        let mut s = MyopicStrategy::uniform(2);
        s.observe(0, false);
        assert_eq!(s.select(2), 1);
    }

    #[test]
    fn stay_with_winner_behaviour() {
        for rule in [SwitchRule::RoundRobin, SwitchRule::UniformRandom] {
            // always free channel 0: once there, never leaves
            let mut s = StayWithWinner::new(2, rule, stream(3, Stream::User(0)));
            let mut on_zero = false;
            for j in 1..200 {
                let c = s.select(j);
                if on_zero {
                    assert_eq!(c, 0);
                }
                let free = c == 0 || j % 2 == 0;
                on_zero |= c == 0;
                s.observe(c, free);
            }
            assert!(on_zero);

            // never free: switches every slot
            let mut s = StayWithWinner::new(2, rule, stream(4, Stream::User(0)));
            let mut prev = s.select(1);
            s.observe(prev, false);
            for j in 2..50 {
                let c = s.select(j);
                assert_ne!(c, prev);
                s.observe(c, false);
                prev = c;
            }
        }
        let mut rr = StayWithWinner::new(3, SwitchRule::RoundRobin, stream(5, Stream::User(0)));
        let c = rr.select(1);
        rr.observe(c, false);
        assert_eq!(rr.select(2), (c + 1) % 3);
    }

    #[test]
    fn kl_values() {
        assert_eq!(kl_bernoulli(0.5, 0.5), 0.0);
        assert_abs_diff_eq!(kl_bernoulli(0.0, 0.5), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(kl_bernoulli(0.5, 0.9), 0.5 * (25.0f64 / 9.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(kl_bernoulli(0.5, 0.9), 0.510826, epsilon = 1e-6);
        assert_eq!(kl_bernoulli(0.5, 1.0), f64::INFINITY);
        assert_eq!(kl_bernoulli(1.0, 1.0), 0.0);
    }

    #[test]
    fn lower_bound_coefficient() {
        assert_eq!(regret_lower_bound_coefficient(&theta(&[0.9, 0.9]), 1.0), 0.0);
        assert_abs_diff_eq!(regret_lower_bound_coefficient(&theta(&[0.9, 0.5]), 1.0), 0.783046, epsilon = 1e-6);
        assert_eq!(regret_lower_bound_coefficient(&theta(&[1.0, 0.5]), 1.0), 0.0);
        assert_abs_diff_eq!(
            regret_lower_bound_coefficient(&theta(&[0.9, 0.5]), 2.0),
            2.0 * 0.4 / kl_bernoulli(0.5, 0.9),
            epsilon = 1e-15
        );
    }

    #[test]
    fn loss_examples() {
        let t = theta(&[0.9, 0.5]);
        assert_eq!(compute_loss(&t, &[100, 0], 100, 1.0, 90).unwrap().expected_loss, 0.0);
        assert_abs_diff_eq!(compute_loss(&t, &[90, 10], 100, 1.0, 85).unwrap().expected_loss, 4.0, epsilon = 1e-12);
        let r = compute_loss(&t, &[0, 100], 100, 1.0, 52).unwrap();
        assert_abs_diff_eq!(r.expected_loss, 40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.realized_loss, 38.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.realized_loss + r.bits_won, 90.0, epsilon = 1e-12);
        assert!(matches!(compute_loss(&t, &[1, 2], 4, 1.0, 0), Err(Error::CountMismatch { .. })));
    }
}
