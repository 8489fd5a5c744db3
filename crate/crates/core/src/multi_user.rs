//! Several cognitive users competing for the same channels.
//!
//! Users that sense the same free channel contend CSMA-CA style: each waits an
//! i.i.d. continuous random time and the first to re-sense the channel wins.
//! By exchangeability the winner is uniform over the contenders, so the
//! waiting-time density never needs to be materialized.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::ThetaVector;
use crate::rng::StreamRng;
use crate::single_user::CountStats;
use crate::strategy::{sample_weighted, Strategy};

/// Winner of one channel in one slot, if any.
pub fn contention_resolve<R: Rng + ?Sized>(contenders: &[usize], channel_free: bool, rng: &mut R) -> Option<usize> {
    if !channel_free || contenders.is_empty() {
        return None;
    }
    Some(contenders[rng.random_range(0..contenders.len())])
}

/// Per-channel sensing probabilities shared by all users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("mixed strategy entries must lie in [0, 1]".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("mixed strategy sums to {total}")));
        }
        Ok(Self(p))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn n_channels(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(m: MixedStrategy) -> Self {
        m.0
    }
}

/// The optimal symmetric strategy and its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSolution {
    pub strategy: MixedStrategy,
    /// λ*; underflows to 0 for very large K, see `ln_lambda`.
    pub lambda: f64,
    pub ln_lambda: f64,
}

/// Maximizes the common per-user throughput when all `k` users follow the
/// same mixed strategy: `p_i = {1 - (λ / (K θ_i))^{1/(K-1)}}^+`, with λ fixed
/// by `Σ p_i = 1`.
///
/// λ is searched as `ln λ` because `λ ~ K θ (1 - 1/Q)^{K-1}` underflows
/// double precision long before K reaches the thousands.
pub fn optimal_symmetric_strategy(theta: &ThetaVector, k: usize) -> Result<SymmetricSolution> {
    solve_symmetric(theta.values(), k)
}

pub(crate) fn solve_symmetric(theta: &[f64], k: usize) -> Result<SymmetricSolution> {
    if k < 2 {
        return Err(Error::Precondition("the symmetric strategy needs at least two users".into()));
    }
    let positive: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] > 0.0).collect();
    match positive.len() {
        0 => return Err(Error::NoOpportunity),
        1 => {
            let mut p = vec![0.0; theta.len()];
            p[positive[0]] = 1.0;
            return Ok(SymmetricSolution {
                strategy: MixedStrategy(p),
                lambda: 0.0,
                ln_lambda: f64::NEG_INFINITY,
            });
        }
        _ => {}
    }
    let kf = k as f64;
    let exponent = 1.0 / (kf - 1.0);
    let log_scale: Vec<f64> = theta.iter().map(|&t| if t > 0.0 { (kf * t).ln() } else { f64::NEG_INFINITY }).collect();
    let probs = |mu: f64| -> Vec<f64> {
        log_scale
            .iter()
            .map(|&l| if mu >= l { 0.0 } else { -((mu - l) * exponent).exp_m1() })
            .collect()
    };
    let total = |mu: f64| -> f64 { probs(mu).iter().sum() };

    let top = log_scale.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut hi = top;
    let mut step = 1.0;
    let mut lo = top - step;
    while total(lo) < 1.0 {
        hi = lo;
        step *= 2.0;
        lo = top - step;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = if (total(lo) - 1.0).abs() <= (total(hi) - 1.0).abs() { lo } else { hi };
    Ok(SymmetricSolution {
        strategy: MixedStrategy(probs(mu)),
        lambda: mu.exp(),
        ln_lambda: mu,
    })
}

/// Proportional strategy `τ_i = θ_i / Σ θ`, an equilibrium for large K.
pub fn nash_strategy(theta: &ThetaVector) -> Result<MixedStrategy> {
    let total = theta.sum();
    if !(total > 0.0) {
        return Err(Error::NoOpportunity);
    }
    Ok(MixedStrategy(theta.values().iter().map(|&t| t / total).collect()))
}

fn check_dims(theta: &ThetaVector, p: &MixedStrategy) {
    assert_eq!(theta.n_channels(), p.n_channels(), "strategy and θ disagree on the channel count");
}

/// Probability that no user senses a channel sensed with probability `p`.
fn empty_probability(p: f64, k: usize) -> f64 {
    (1.0 - p).powf(k as f64)
}

/// `B T Σ θ_i (1 - (1 - p_i)^K)`: expected bits won by all users together.
pub fn expected_total_throughput(theta: &ThetaVector, p: &MixedStrategy, k: usize, n_slots: u64, bits_per_slot: f64) -> f64 {
    check_dims(theta, p);
    bits_per_slot
        * n_slots as f64
        * theta
            .values()
            .iter()
            .zip(p.probabilities())
            .map(|(&t, &pi)| t * (1.0 - empty_probability(pi, k)))
            .sum::<f64>()
}

/// `B T Σ θ_i (1 - p_i)^K`: expected free channel-slots nobody senses.
pub fn centralized_loss(theta: &ThetaVector, p: &MixedStrategy, k: usize, n_slots: u64, bits_per_slot: f64) -> f64 {
    check_dims(theta, p);
    bits_per_slot
        * n_slots as f64
        * theta
            .values()
            .iter()
            .zip(p.probabilities())
            .map(|(&t, &pi)| t * empty_probability(pi, k))
            .sum::<f64>()
}

/// Exponential decay rate of a loss in K, or no loss at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    Rate(f64),
    /// Only one channel is ever free: every user senses it and nothing is lost.
    NoLoss,
}

impl Decay {
    pub fn rate(&self) -> Option<f64> {
        match self {
            Decay::Rate(r) => Some(*r),
            Decay::NoLoss => None,
        }
    }
}

impl Serialize for Decay {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Decay::Rate(r) => s.serialize_f64(*r),
            Decay::NoLoss => s.serialize_str("no-loss"),
        }
    }
}

impl<'de> Deserialize<'de> for Decay {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Rate(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Rate(r) => Ok(Decay::Rate(r)),
            Raw::Tag(t) if t == "no-loss" => Ok(Decay::NoLoss),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown decay tag {t}"))),
        }
    }
}

/// Large-K behaviour of the two known-θ strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    /// Number of channels with θ_i > 0.
    pub q: usize,
    /// Smallest positive θ_i.
    pub theta_lstar: f64,
    /// Symmetric optimum: `ln(Q / (Q - 1))`.
    pub c1: Decay,
    /// Proportional strategy: `ln(Σθ / (Σθ - θ_l*))`.
    pub c2: Decay,
}

pub fn decay_constants(theta: &ThetaVector) -> Result<DecayConstants> {
    let q = theta.support_size();
    if q == 0 {
        return Err(Error::NoOpportunity);
    }
    let theta_lstar = theta
        .values()
        .iter()
        .cloned()
        .filter(|&t| t > 0.0)
        .fold(f64::INFINITY, f64::min);
    if q == 1 {
        return Ok(DecayConstants {
            q,
            theta_lstar,
            c1: Decay::NoLoss,
            c2: Decay::NoLoss,
        });
    }
    let qf = q as f64;
    let total = theta.sum();
    Ok(DecayConstants {
        q,
        theta_lstar,
        c1: Decay::Rate((qf / (qf - 1.0)).ln()),
        c2: Decay::Rate((total / (total - theta_lstar)).ln()),
    })
}

/// Closed-form multi-user quantities for a known θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownThetaReport {
    pub theta: Vec<f64>,
    pub n_users: usize,
    pub n_slots: u64,
    pub bits_per_slot: f64,
    pub symmetric_strategy: Vec<f64>,
    pub lambda_star: f64,
    /// Absent when only one channel is ever free (λ* = 0).
    pub ln_lambda_star: Option<f64>,
    pub symmetric_throughput: f64,
    pub symmetric_loss: f64,
    pub nash_strategy: Vec<f64>,
    pub nash_throughput: f64,
    pub nash_loss: f64,
    pub decay: DecayConstants,
}

/// Everything the known-θ analysis gives for `k ≥ 2` users over a block.
pub fn known_theta_report(theta: &ThetaVector, k: usize, n_slots: u64, bits_per_slot: f64) -> Result<KnownThetaReport> {
    let sym = optimal_symmetric_strategy(theta, k)?;
    let tau = nash_strategy(theta)?;
    Ok(KnownThetaReport {
        theta: theta.values().to_vec(),
        n_users: k,
        n_slots,
        bits_per_slot,
        symmetric_throughput: expected_total_throughput(theta, &sym.strategy, k, n_slots, bits_per_slot),
        symmetric_loss: centralized_loss(theta, &sym.strategy, k, n_slots, bits_per_slot),
        symmetric_strategy: sym.strategy.0,
        lambda_star: sym.lambda,
        ln_lambda_star: sym.ln_lambda.is_finite().then_some(sym.ln_lambda),
        nash_throughput: expected_total_throughput(theta, &tau, k, n_slots, bits_per_slot),
        nash_loss: centralized_loss(theta, &tau, k, n_slots, bits_per_slot),
        nash_strategy: tau.0,
        decay: decay_constants(theta)?,
    })
}

/// A user that samples every slot from a fixed mixed strategy.
#[derive(Debug, Clone)]
pub struct FixedMixed {
    p: MixedStrategy,
    rng: StreamRng,
}

impl FixedMixed {
    pub fn new(p: MixedStrategy, rng: StreamRng) -> Self {
        Self { p, rng }
    }
}

impl Strategy for FixedMixed {
    fn select(&mut self, _slot: u64) -> usize {
        sample_weighted(self.p.probabilities(), &mut self.rng)
    }

    fn observe(&mut self, _channel: usize, _free: bool) {}
}

/// Learning state of one user under the online multi-user rules.
#[derive(Debug, Clone)]
pub struct UserState {
    pub user_id: u32,
    pub stats: CountStats,
    rng: StreamRng,
}

impl UserState {
    pub fn new(user_id: u32, n_channels: usize, rng: StreamRng) -> Self {
        Self {
            user_id,
            stats: CountStats::new(n_channels),
            rng,
        }
    }

    fn uninitialized_channel(&self) -> Option<usize> {
        self.stats.y.iter().position(|&y| y == 0)
    }

    /// Current estimates `θ̂_i = X_i / Y_i`.
    pub fn estimates(&self) -> Vec<f64> {
        self.stats
            .x
            .iter()
            .zip(&self.stats.y)
            .map(|(&x, &y)| if y == 0 { 0.0 } else { x as f64 / y as f64 })
            .collect()
    }

    /// Records a sensing outcome. The first sense of every channel counts as
    /// free whatever was observed, so no estimate ever starts at zero.
    fn record(&mut self, channel: usize, free: bool) {
        if self.stats.y[channel] == 0 {
            self.stats.y[channel] = 1;
            self.stats.x[channel] = 1;
        } else {
            self.stats.record(channel, free);
        }
    }

    fn sample_proportional(&mut self) -> usize {
        let est = self.estimates();
        sample_weighted(&est, &mut self.rng)
    }
}

/// Senses every channel once, then samples channel `i` with probability
/// proportional to `θ̂_i`. Drifts to the proportional equilibrium.
#[derive(Debug, Clone)]
pub struct Rule2 {
    state: UserState,
}

impl Rule2 {
    pub fn new(n_channels: usize, user_id: u32, rng: StreamRng) -> Self {
        assert!(n_channels >= 1, "need at least one channel");
        Self {
            state: UserState::new(user_id, n_channels, rng),
        }
    }

    pub fn state(&self) -> &UserState {
        &self.state
    }
}

impl Strategy for Rule2 {
    fn select(&mut self, _slot: u64) -> usize {
        match self.state.uninitialized_channel() {
            Some(c) => c,
            None => self.state.sample_proportional(),
        }
    }

    fn observe(&mut self, channel: usize, free: bool) {
        self.state.record(channel, free);
    }
}

/// Like [`Rule2`] for the first `ceil(ln T)` slots, after which it samples
/// from the optimal symmetric strategy for K users evaluated at `θ̂`.
#[derive(Debug, Clone)]
pub struct Rule3 {
    state: UserState,
    n_users: usize,
    switch_slot: u64,
}

impl Rule3 {
    pub fn new(n_channels: usize, n_users: usize, n_slots: u64, user_id: u32, rng: StreamRng) -> Result<Self> {
        if n_users < 2 {
            return Err(Error::Precondition("rule 3 needs at least two users".into()));
        }
        if n_slots < 2 {
            return Err(Error::Precondition("rule 3 needs at least two slots".into()));
        }
        Ok(Self {
            state: UserState::new(user_id, n_channels, rng),
            n_users,
            switch_slot: exploitation_start(n_slots),
        })
    }

    /// First slot of the exploitation phase (initialization permitting).
    pub fn switch_slot(&self) -> u64 {
        self.switch_slot
    }

    pub fn state(&self) -> &UserState {
        &self.state
    }

    /// Distribution used in `slot` after initialization.
    pub fn distribution(&self, slot: u64) -> Vec<f64> {
        let est = self.state.estimates();
        if slot < self.switch_slot {
            let total: f64 = est.iter().sum();
            return est.iter().map(|e| e / total).collect();
        }
        solve_symmetric(&est, self.n_users)
            .map(|s| s.strategy.0)
            .expect("estimates are positive after initialization")
    }
}

/// `ceil(ln T)`: slots before it explore, slots from it on exploit.
pub fn exploitation_start(n_slots: u64) -> u64 {
    ((n_slots as f64).ln().ceil() as u64).max(1)
}

impl Strategy for Rule3 {
    fn select(&mut self, slot: u64) -> usize {
        if let Some(c) = self.state.uninitialized_channel() {
            return c;
        }
        let p = self.distribution(slot);
        sample_weighted(&p, &mut self.state.rng)
    }

    fn observe(&mut self, channel: usize, free: bool) {
        self.state.record(channel, free);
    }
}
