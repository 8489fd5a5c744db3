//! Monte Carlo drivers for single- and multi-user experiments.
//!
//! Replications run in parallel in small batches; each batch is folded into
//! the running statistics in replication order, so thread scheduling never
//! changes a single output bit.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, PriorSpec};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, StrategyId, ThetaSource};
use crate::model::{generate_block, sample_theta, ChannelRealization, ThetaVector};
use crate::multi_user::{
    centralized_loss, contention_resolve, decay_constants, expected_total_throughput, nash_strategy, solve_symmetric, Decay,
    FixedMixed, MixedStrategy, Rule2, Rule3,
};
use crate::planning::{optimal_value_with_budget, GittinsStrategy, GittinsTable, OneKnownChannel, OptimalDpStrategy, PlanResult};
use crate::rng::{replication_seed, stream, Stream};
use crate::single_user::{
    compute_loss, regret_lower_bound_coefficient, LossReport, MyopicStrategy, RandomStrategy, StayWithWinner, SwitchRule, UcbRule1,
};
use crate::strategy::Strategy;

/// Mean across replications with its standard error (absent for R = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub slot: usize,
    pub mean_cumulative_loss: f64,
    pub stderr: Option<f64>,
}

/// Mean fraction of users on each channel in each slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub n_channels: usize,
    /// Row-major `[slot][channel]`.
    pub fractions: Vec<f64>,
}

impl Occupancy {
    pub fn n_slots(&self) -> usize {
        self.fractions.len() / self.n_channels.max(1)
    }

    /// Fraction on `channel` (0-based) in slot `slot` (1-based).
    pub fn get(&self, slot: usize, channel: usize) -> f64 {
        self.fractions[(slot - 1) * self.n_channels + channel]
    }
}

/// Every scalar output of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: StrategyId,
    pub n_channels: usize,
    pub n_slots: usize,
    pub n_users: usize,
    pub bits_per_slot: f64,
    pub replications: usize,
    pub seed: u64,
    /// The fixed θ, when there is one.
    pub theta: Option<Vec<f64>>,
    /// Bits won per block, summed over users.
    pub throughput: Estimate,
    /// Single user: `B (T θ* - bits won / B)`. Several users: bits left on
    /// free channels nobody sensed.
    pub realized_loss: Estimate,
    /// `B Σ (θ* - θ_i) pulls_i` (single user only).
    pub expected_loss: Option<Estimate>,
    /// Bits the best channel actually offered minus bits won (single user only).
    pub clairvoyant_gap: Option<Estimate>,
    pub mean_pulls: Option<Vec<f64>>,
    /// Time-averaged occupancy per channel.
    pub selection_frequencies: Vec<f64>,
    pub lower_bound_coefficient: Option<f64>,
    /// Optimal expected throughput under the prior (optimal-dp only).
    pub plan_value: Option<f64>,
    /// Mixed strategy the users follow or converge to.
    pub reference_strategy: Option<Vec<f64>>,
    pub closed_form_throughput: Option<f64>,
    pub closed_form_loss: Option<f64>,
    pub lambda_star: Option<f64>,
    pub ln_lambda_star: Option<f64>,
    pub c1: Option<Decay>,
    pub c2: Option<Decay>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub summary: Summary,
    pub loss_curve: Vec<CurvePoint>,
    pub occupancy: Occupancy,
}

/// Trace of one single-user replication.
#[derive(Debug, Clone)]
pub struct SingleRunRecord {
    pub theta: ThetaVector,
    pub realization: ChannelRealization,
    pub choices: Vec<usize>,
    /// W after each slot.
    pub cumulative_bits: Vec<f64>,
    /// `B Σ_{j' ≤ j} (θ* - θ_{chosen})` after each slot.
    pub cumulative_expected_loss: Vec<f64>,
    pub report: LossReport,
    pub bits_per_slot: f64,
}

impl SingleRunRecord {
    pub fn outcome(&self, slot: usize) -> bool {
        self.realization.free(self.choices[slot - 1], slot - 1)
    }

    /// Bits a user that always sensed the best channel would have sent.
    pub fn clairvoyant_bits(&self) -> f64 {
        let (best, _) = self.theta.best();
        self.bits_per_slot * self.realization.row(best).iter().filter(|&&z| z).count() as f64
    }

    pub fn clairvoyant_gap(&self) -> f64 {
        self.clairvoyant_bits() - self.report.bits_won
    }
}

/// Trace of one multi-user replication.
#[derive(Debug, Clone)]
pub struct MultiRunRecord {
    pub theta: ThetaVector,
    pub realization: ChannelRealization,
    /// `choices[j][k]`: channel sensed by user k in slot j + 1.
    pub choices: Vec<Vec<usize>>,
    /// `winners[j][i]`: user that won channel i in slot j + 1.
    pub winners: Vec<Vec<Option<usize>>>,
    /// Final W_k.
    pub bits_per_user: Vec<f64>,
    /// Σ_k W_k after each slot.
    pub cumulative_total: Vec<f64>,
    /// Bits left on unsensed free channels, after each slot.
    pub cumulative_gap: Vec<f64>,
}

impl MultiRunRecord {
    /// How often `user` sensed each channel in slots `from..=to` (1-based).
    pub fn selection_frequencies(&self, user: usize, from: usize, to: usize) -> Vec<f64> {
        let n = self.realization.n_channels();
        let mut counts = vec![0.0; n];
        for row in &self.choices[from - 1..to] {
            counts[row[user]] += 1.0;
        }
        let len = (to + 1 - from) as f64;
        counts.iter().map(|c| c / len).collect()
    }
}

/// Work shared by all replications of an experiment.
struct Prepared {
    belief: Belief,
    plan: Option<Arc<PlanResult>>,
    gittins: Option<Arc<GittinsTable>>,
}

impl Prepared {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let prior = config.strategy_prior();
        let belief = prior.to_belief()?;
        let mut plan = None;
        let mut gittins = None;
        match config.strategy.id {
            StrategyId::OptimalDp => {
                log::info!("planning over {} slots", config.block.n_slots);
                let p = optimal_value_with_budget(&belief, config.block.n_slots, config.block.bits_per_slot, config.strategy.state_budget)?;
                plan = Some(Arc::new(p));
            }
            StrategyId::Gittins => {
                if let PriorSpec::Beta { a, b } = &prior {
                    if a.iter().chain(b).all(|v| v.fract() == 0.0) {
                        log::info!("building Gittins table to a + b = {}", config.strategy.gittins.state_truncation);
                        gittins = Some(Arc::new(GittinsTable::build(config.strategy.gittins)?));
                    }
                }
            }
            _ => {}
        }
        Ok(Self { belief, plan, gittins })
    }
}

fn draw_theta(config: &ExperimentConfig, seed: u64) -> Result<ThetaVector> {
    match &config.theta_source {
        ThetaSource::Fixed(t) => Ok(t.clone()),
        ThetaSource::Prior(p) => sample_theta(p, &mut stream(seed, Stream::Theta)),
    }
}

fn single_strategy(config: &ExperimentConfig, prep: &Prepared, theta: &ThetaVector, seed: u64) -> Result<Box<dyn Strategy>> {
    let n = config.block.n_channels;
    let rng = stream(seed, Stream::User(0));
    Ok(match config.strategy.id {
        StrategyId::OptimalDp => {
            let plan = prep.plan.clone().expect("plan prepared");
            Box::new(OptimalDpStrategy::new(plan, prep.belief.clone()))
        }
        StrategyId::Gittins => {
            let Belief::Beta(beta) = &prep.belief else {
                return Err(Error::InvalidConfig("gittins needs a beta prior".into()));
            };
            match &prep.gittins {
                Some(t) => Box::new(GittinsStrategy::with_table(beta.clone(), t.clone())),
                None => Box::new(GittinsStrategy::new(beta.clone(), config.strategy.gittins)?),
            }
        }
        StrategyId::OneKnown => Box::new(OneKnownChannel::new(prep.belief.marginal(0)?, theta.get(1), config.block.n_slots)?),
        StrategyId::UcbRule1 => Box::new(UcbRule1::new(n)),
        StrategyId::Random => Box::new(RandomStrategy::new(n, rng)),
        StrategyId::Myopic => Box::new(MyopicStrategy::new(prep.belief.clone())),
        StrategyId::StayWinnerRr => Box::new(StayWithWinner::new(n, SwitchRule::RoundRobin, rng)),
        StrategyId::StayWinnerRand => Box::new(StayWithWinner::new(n, SwitchRule::UniformRandom, rng)),
        id => return Err(Error::InvalidConfig(format!("{id} is not a single-user strategy"))),
    })
}

fn multi_strategies(config: &ExperimentConfig, theta: &ThetaVector, seed: u64) -> Result<Vec<Box<dyn Strategy>>> {
    let n = config.block.n_channels;
    let k = config.block.n_users;
    let t = config.block.n_slots as u64;
    let fixed = match config.strategy.id {
        StrategyId::SymmetricOpt => Some(solve_symmetric(theta.values(), k)?.strategy),
        StrategyId::NashTau => Some(nash_strategy(theta)?),
        _ => None,
    };
    (0..k)
        .map(|u| {
            let rng = stream(seed, Stream::User(u as u32));
            Ok(match config.strategy.id {
                StrategyId::SymmetricOpt | StrategyId::NashTau => {
                    Box::new(FixedMixed::new(fixed.clone().expect("fixed strategy"), rng)) as Box<dyn Strategy>
                }
                StrategyId::Rule2 => Box::new(Rule2::new(n, u as u32, rng)),
                StrategyId::Rule3 => Box::new(Rule3::new(n, k, t, u as u32, rng)?),
                id => return Err(Error::InvalidConfig(format!("{id} is not a multi-user strategy"))),
            })
        })
        .collect()
}

fn single_rep(config: &ExperimentConfig, prep: &Prepared, rep: u64) -> Result<SingleRunRecord> {
    let seed = replication_seed(config.block.seed, rep);
    let theta = draw_theta(config, seed)?;
    let t = config.block.n_slots;
    let bits = config.block.bits_per_slot;
    let realization = generate_block(&theta, t, &mut stream(seed, Stream::Environment))?;
    let mut strategy = single_strategy(config, prep, &theta, seed)?;
    let (_, best) = theta.best();
    let n = theta.n_channels();
    let mut pulls = vec![0u64; n];
    let mut won = 0u64;
    let mut choices = Vec::with_capacity(t);
    let mut cumulative_bits = Vec::with_capacity(t);
    let mut cumulative_expected_loss = Vec::with_capacity(t);
    let mut expected = 0.0;
    for j in 0..t {
        let c = strategy.select(j as u64 + 1);
        if c >= n {
            return Err(Error::ChannelOutOfRange { channel: c, n_channels: n });
        }
        let free = realization.free(c, j);
        strategy.observe(c, free);
        pulls[c] += 1;
        won += u64::from(free);
        expected += bits * (best - theta.get(c));
        choices.push(c);
        cumulative_bits.push(bits * won as f64);
        cumulative_expected_loss.push(expected);
    }
    let report = compute_loss(&theta, &pulls, t as u64, bits, won)?;
    Ok(SingleRunRecord {
        theta,
        realization,
        choices,
        cumulative_bits,
        cumulative_expected_loss,
        report,
        bits_per_slot: bits,
    })
}

fn multi_rep(config: &ExperimentConfig, rep: u64) -> Result<MultiRunRecord> {
    let seed = replication_seed(config.block.seed, rep);
    let theta = draw_theta(config, seed)?;
    let t = config.block.n_slots;
    let n = theta.n_channels();
    let bits = config.block.bits_per_slot;
    let realization = generate_block(&theta, t, &mut stream(seed, Stream::Environment))?;
    let mut users = multi_strategies(config, &theta, seed)?;
    let mut contention = stream(seed, Stream::Contention);
    let mut bits_per_user = vec![0.0; users.len()];
    let mut contenders: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut choices = Vec::with_capacity(t);
    let mut winners = Vec::with_capacity(t);
    let mut cumulative_total = Vec::with_capacity(t);
    let mut cumulative_gap = Vec::with_capacity(t);
    let (mut total, mut gap) = (0.0, 0.0);
    for j in 0..t {
        contenders.iter_mut().for_each(Vec::clear);
        let mut row = Vec::with_capacity(users.len());
        for (k, user) in users.iter_mut().enumerate() {
            let c = user.select(j as u64 + 1);
            if c >= n {
                return Err(Error::ChannelOutOfRange { channel: c, n_channels: n });
            }
            contenders[c].push(k);
            row.push(c);
        }
        let mut won_row = Vec::with_capacity(n);
        for (i, group) in contenders.iter().enumerate() {
            let free = realization.free(i, j);
            let w = contention_resolve(group, free, &mut contention);
            if let Some(k) = w {
                bits_per_user[k] += bits;
                total += bits;
            }
            if free && group.is_empty() {
                gap += bits;
            }
            won_row.push(w);
        }
        for (user, &c) in users.iter_mut().zip(&row) {
            user.observe(c, realization.free(c, j));
        }
        choices.push(row);
        winners.push(won_row);
        cumulative_total.push(total);
        cumulative_gap.push(gap);
    }
    Ok(MultiRunRecord {
        theta,
        realization,
        choices,
        winners,
        bits_per_user,
        cumulative_total,
        cumulative_gap,
    })
}

/// Runs replication `rep` of a single-user experiment and returns its trace.
pub fn simulate_single_user(config: &ExperimentConfig, rep: u64) -> Result<SingleRunRecord> {
    config.validate()?;
    if config.strategy.id.is_multi_user() {
        return Err(Error::InvalidConfig(format!("{} is a multi-user strategy", config.strategy.id)));
    }
    single_rep(config, &Prepared::new(config)?, rep)
}

/// Runs replication `rep` of a multi-user experiment and returns its trace.
pub fn simulate_multi_user(config: &ExperimentConfig, rep: u64) -> Result<MultiRunRecord> {
    config.validate()?;
    if !config.strategy.id.is_multi_user() {
        return Err(Error::InvalidConfig(format!("{} is a single-user strategy", config.strategy.id)));
    }
    multi_rep(config, rep)
}

/// What one replication contributes to the aggregate.
struct RepOutput {
    throughput: f64,
    realized_loss: f64,
    expected_loss: Option<f64>,
    clairvoyant_gap: Option<f64>,
    pulls: Option<Vec<u64>>,
    curve: Vec<f64>,
    /// Users per `[slot][channel]`.
    occupancy: Vec<u32>,
}

impl RepOutput {
    fn from_single(r: SingleRunRecord) -> Self {
        let n = r.theta.n_channels();
        let mut occupancy = vec![0u32; r.choices.len() * n];
        for (j, &c) in r.choices.iter().enumerate() {
            occupancy[j * n + c] = 1;
        }
        Self {
            throughput: r.report.bits_won,
            realized_loss: r.report.realized_loss,
            expected_loss: Some(r.report.expected_loss),
            clairvoyant_gap: Some(r.clairvoyant_gap()),
            pulls: Some(r.report.per_channel_pulls.clone()),
            curve: r.cumulative_expected_loss,
            occupancy,
        }
    }

    fn from_multi(r: MultiRunRecord) -> Self {
        let n = r.theta.n_channels();
        let mut occupancy = vec![0u32; r.choices.len() * n];
        for (j, row) in r.choices.iter().enumerate() {
            for &c in row {
                occupancy[j * n + c] += 1;
            }
        }
        Self {
            throughput: r.cumulative_total.last().copied().unwrap_or(0.0),
            realized_loss: r.cumulative_gap.last().copied().unwrap_or(0.0),
            expected_loss: None,
            clairvoyant_gap: None,
            pulls: None,
            curve: r.cumulative_gap,
            occupancy,
        }
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn estimate(&self) -> Estimate {
        let stderr = (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt());
        Estimate { mean: self.mean, stderr }
    }
}

struct Accumulator {
    n_channels: usize,
    n_users: f64,
    throughput: Welford,
    realized: Welford,
    expected: Welford,
    gap: Welford,
    pulls: Vec<f64>,
    curve: Vec<Welford>,
    occupancy: Vec<f64>,
    reps: usize,
}

impl Accumulator {
    fn new(n_channels: usize, n_slots: usize, n_users: usize) -> Self {
        Self {
            n_channels,
            n_users: n_users as f64,
            throughput: Welford::default(),
            realized: Welford::default(),
            expected: Welford::default(),
            gap: Welford::default(),
            pulls: vec![0.0; n_channels],
            curve: vec![Welford::default(); n_slots],
            occupancy: vec![0.0; n_slots * n_channels],
            reps: 0,
        }
    }

    fn push(&mut self, out: RepOutput) {
        self.reps += 1;
        self.throughput.push(out.throughput);
        self.realized.push(out.realized_loss);
        if let Some(e) = out.expected_loss {
            self.expected.push(e);
        }
        if let Some(g) = out.clairvoyant_gap {
            self.gap.push(g);
        }
        if let Some(p) = out.pulls {
            for (acc, v) in self.pulls.iter_mut().zip(p) {
                *acc += v as f64;
            }
        }
        for (w, x) in self.curve.iter_mut().zip(out.curve) {
            w.push(x);
        }
        for (acc, c) in self.occupancy.iter_mut().zip(out.occupancy) {
            *acc += f64::from(c) / self.n_users;
        }
    }

    fn finish(self, config: &ExperimentConfig, single: bool) -> (Summary, Vec<CurvePoint>, Occupancy) {
        let r = self.reps as f64;
        let n = self.n_channels;
        let fractions: Vec<f64> = self.occupancy.iter().map(|x| x / r).collect();
        let t = config.block.n_slots as f64;
        let selection_frequencies = (0..n)
            .map(|i| fractions.iter().skip(i).step_by(n).sum::<f64>() / t)
            .collect();
        let loss_curve = self
            .curve
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let e = w.estimate();
                CurvePoint {
                    slot: j + 1,
                    mean_cumulative_loss: e.mean,
                    stderr: e.stderr,
                }
            })
            .collect();
        let summary = Summary {
            strategy: config.strategy.id,
            n_channels: n,
            n_slots: config.block.n_slots,
            n_users: config.block.n_users,
            bits_per_slot: config.block.bits_per_slot,
            replications: self.reps,
            seed: config.block.seed,
            theta: None,
            throughput: self.throughput.estimate(),
            realized_loss: self.realized.estimate(),
            expected_loss: single.then(|| self.expected.estimate()),
            clairvoyant_gap: single.then(|| self.gap.estimate()),
            mean_pulls: single.then(|| self.pulls.iter().map(|p| p / r).collect()),
            selection_frequencies,
            lower_bound_coefficient: None,
            plan_value: None,
            reference_strategy: None,
            closed_form_throughput: None,
            closed_form_loss: None,
            lambda_star: None,
            ln_lambda_star: None,
            c1: None,
            c2: None,
        };
        (
            summary,
            loss_curve,
            Occupancy {
                n_channels: n,
                fractions,
            },
        )
    }
}

/// Runs replications `0..R` in parallel batches and folds them in order.
fn run_replications<F>(config: &ExperimentConfig, per_rep: F) -> Result<Accumulator>
where
    F: Fn(u64) -> Result<RepOutput> + Sync,
{
    let r = config.replications;
    let batch = (rayon::current_num_threads() * 2).max(1);
    let mut acc = Accumulator::new(config.block.n_channels, config.block.n_slots, config.block.n_users);
    let mut start = 0;
    while start < r {
        let end = (start + batch).min(r);
        let outs: Vec<Result<RepOutput>> = (start..end).into_par_iter().map(|rep| per_rep(rep as u64)).collect();
        for out in outs {
            acc.push(out?);
        }
        log::debug!("{end}/{r} replications done");
        start = end;
    }
    Ok(acc)
}

/// Monte Carlo experiment for one user.
pub fn run_single_user(config: &ExperimentConfig) -> Result<AggregateStats> {
    config.validate()?;
    if config.strategy.id.is_multi_user() {
        return Err(Error::InvalidConfig(format!("{} is a multi-user strategy", config.strategy.id)));
    }
    let prep = Prepared::new(config)?;
    log::info!("{}: {} replications of {} slots", config.strategy.id, config.replications, config.block.n_slots);
    let acc = run_replications(config, |rep| single_rep(config, &prep, rep).map(RepOutput::from_single))?;
    let (mut summary, loss_curve, occupancy) = acc.finish(config, true);
    summary.plan_value = prep.plan.as_ref().map(|p| p.value);
    if let ThetaSource::Fixed(theta) = &config.theta_source {
        summary.theta = Some(theta.values().to_vec());
        summary.lower_bound_coefficient = Some(regret_lower_bound_coefficient(theta, config.block.bits_per_slot));
        fill_decay(&mut summary, theta);
    }
    Ok(AggregateStats {
        summary,
        loss_curve,
        occupancy,
    })
}

/// Monte Carlo experiment for K ≥ 2 contending users.
pub fn run_multi_user(config: &ExperimentConfig) -> Result<AggregateStats> {
    config.validate()?;
    if !config.strategy.id.is_multi_user() {
        return Err(Error::InvalidConfig(format!("{} is a single-user strategy", config.strategy.id)));
    }
    log::info!(
        "{}: {} replications of {} slots with {} users",
        config.strategy.id,
        config.replications,
        config.block.n_slots,
        config.block.n_users
    );
    let acc = run_replications(config, |rep| multi_rep(config, rep).map(RepOutput::from_multi))?;
    let (mut summary, loss_curve, occupancy) = acc.finish(config, false);
    if let ThetaSource::Fixed(theta) = &config.theta_source {
        summary.theta = Some(theta.values().to_vec());
        fill_decay(&mut summary, theta);
        let k = config.block.n_users;
        if let Ok(sym) = solve_symmetric(theta.values(), k) {
            summary.lambda_star = Some(sym.lambda);
            summary.ln_lambda_star = sym.ln_lambda.is_finite().then_some(sym.ln_lambda);
            let reference: Option<MixedStrategy> = match config.strategy.id {
                StrategyId::SymmetricOpt | StrategyId::Rule3 => Some(sym.strategy),
                _ => nash_strategy(theta).ok(),
            };
            if let Some(p) = reference {
                let t = config.block.n_slots as u64;
                let b = config.block.bits_per_slot;
                summary.closed_form_throughput = Some(expected_total_throughput(theta, &p, k, t, b));
                summary.closed_form_loss = Some(centralized_loss(theta, &p, k, t, b));
                summary.reference_strategy = Some(p.probabilities().to_vec());
            }
        }
    }
    Ok(AggregateStats {
        summary,
        loss_curve,
        occupancy,
    })
}

fn fill_decay(summary: &mut Summary, theta: &ThetaVector) {
    if let Ok(d) = decay_constants(theta) {
        summary.c1 = Some(d.c1);
        summary.c2 = Some(d.c2);
    }
}

/// Runs whichever driver the strategy calls for.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateStats> {
    if config.strategy.id.is_multi_user() {
        run_multi_user(config)
    } else {
        run_single_user(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn theta(v: &[f64]) -> ThetaVector {
        ThetaVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn known_theta_dp_takes_the_best_channel() {
        let mut c = ExperimentConfig::fixed(theta(&[0.9, 0.5]), StrategyId::OptimalDp, 3);
        c.theta_source = ThetaSource::Prior(PriorSpec::point_mass(vec![0.9, 0.5]).unwrap());
        let rec = simulate_single_user(&c, 0).unwrap();
        assert_eq!(rec.choices, vec![0, 0, 0]);
        let free = rec.realization.row(0).iter().filter(|&&z| z).count() as f64;
        let stats = run_single_user(&c).unwrap();
        assert_eq!(stats.summary.throughput.mean, free);
        assert_eq!(stats.summary.throughput.stderr, None);
        assert_abs_diff_eq!(stats.summary.plan_value.unwrap(), 2.7, epsilon = 1e-12);
    }

    #[test]
    fn single_user_trace_invariants() {
        for id in [
            StrategyId::Gittins,
            StrategyId::UcbRule1,
            StrategyId::Random,
            StrategyId::Myopic,
            StrategyId::StayWinnerRr,
            StrategyId::StayWinnerRand,
            StrategyId::OneKnown,
        ] {
            let mut c = ExperimentConfig::fixed(theta(&[0.7, 0.4]), id, 60).with_seed(5).with_bits(2.0);
            c.strategy.gittins.state_truncation = 80;
            let r = simulate_single_user(&c, 3).unwrap();
            assert!(r.cumulative_bits.windows(2).all(|w| w[0] <= w[1]));
            assert!(*r.cumulative_bits.last().unwrap() <= 2.0 * 60.0);
            assert_abs_diff_eq!(r.report.bits_won + r.report.realized_loss, 2.0 * 60.0 * 0.7, epsilon = 1e-9);
            assert_abs_diff_eq!(r.report.bits_won + r.clairvoyant_gap(), r.clairvoyant_bits(), epsilon = 1e-9);
            assert_abs_diff_eq!(*r.cumulative_expected_loss.last().unwrap(), r.report.expected_loss, epsilon = 1e-9);
        }
    }

    #[test]
    fn strategies_share_the_channel_realization() {
        let base = ExperimentConfig::fixed(theta(&[0.6, 0.3, 0.8]), StrategyId::Random, 200).with_seed(42);
        let mut other = base.clone();
        other.strategy.id = StrategyId::UcbRule1;
        for rep in 0..3 {
            let a = simulate_single_user(&base, rep).unwrap();
            let b = simulate_single_user(&other, rep).unwrap();
            assert_eq!(a.realization, b.realization);
        }
        let multi = ExperimentConfig::fixed(theta(&[0.6, 0.3, 0.8]), StrategyId::Rule2, 200).with_seed(42).with_users(3);
        assert_eq!(simulate_multi_user(&multi, 1).unwrap().realization, simulate_single_user(&base, 1).unwrap().realization);
    }

    #[test]
    fn single_channel_many_users_take_every_free_slot() {
        let c = ExperimentConfig::fixed(theta(&[1.0]), StrategyId::NashTau, 500).with_users(7).with_bits(1.5);
        let stats = run_multi_user(&c).unwrap();
        assert_eq!(stats.summary.throughput.mean, 1.5 * 500.0);
        assert_eq!(stats.summary.realized_loss.mean, 0.0);
        assert_eq!(stats.summary.c1, Some(Decay::NoLoss));
    }

    #[test]
    fn multi_user_trace_invariants() {
        for id in [StrategyId::SymmetricOpt, StrategyId::NashTau, StrategyId::Rule2, StrategyId::Rule3] {
            let c = ExperimentConfig::fixed(theta(&[0.8, 0.4, 0.6]), id, 300).with_users(4).with_seed(9);
            let r = simulate_multi_user(&c, 0).unwrap();
            for j in 0..300 {
                let won = r.winners[j].iter().filter(|w| w.is_some()).count();
                assert!(won <= r.realization.free_count(j));
                for (i, w) in r.winners[j].iter().enumerate() {
                    if let Some(k) = w {
                        assert_eq!(r.choices[j][*k], i);
                        assert!(r.realization.free(i, j));
                    }
                }
            }
            let total: f64 = r.bits_per_user.iter().sum();
            assert_eq!(total, *r.cumulative_total.last().unwrap());
            assert!(r.cumulative_total.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn symmetric_summary_reports_lambda() {
        let c = ExperimentConfig::fixed(theta(&[0.8, 0.4]), StrategyId::SymmetricOpt, 100).with_users(2);
        let s = run_multi_user(&c).unwrap().summary;
        assert_abs_diff_eq!(s.lambda_star.unwrap(), 0.533333, epsilon = 1e-6);
        assert_abs_diff_eq!(s.closed_form_throughput.unwrap(), 93.3333333, epsilon = 1e-6);
        assert_eq!(s.c1, Some(Decay::Rate(std::f64::consts::LN_2)));
    }

    #[test]
    fn aggregation_is_independent_of_thread_count() {
        let c = ExperimentConfig::fixed(theta(&[0.7, 0.5]), StrategyId::UcbRule1, 200).with_replications(9);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = run_single_user(&c).unwrap();
        let b = pool.install(|| run_single_user(&c)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn occupancy_rows_are_distributions() {
        let c = ExperimentConfig::fixed(theta(&[0.7, 0.5, 0.2]), StrategyId::Rule2, 50).with_users(5).with_replications(3);
        let occ = run_multi_user(&c).unwrap().occupancy;
        for j in 1..=50 {
            let s: f64 = (0..3).map(|i| occ.get(j, i)).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        // initialization senses channels in order
        assert_eq!(occ.get(1, 0), 1.0);
        assert_eq!(occ.get(3, 2), 1.0);
    }

    #[test]
    fn drivers_reject_the_wrong_kind() {
        let c = ExperimentConfig::fixed(theta(&[0.7]), StrategyId::Random, 5);
        assert!(run_multi_user(&c).is_err());
        let c = ExperimentConfig::fixed(theta(&[0.7]), StrategyId::Rule2, 5).with_users(2);
        assert!(run_single_user(&c).is_err());
    }
}
