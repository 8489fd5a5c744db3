//! Desk-scale checks of every acceptance criterion.
//!
//! Each `criterion_*` function runs its experiment and reports pass/fail with
//! the measured numbers. Monte Carlo criteria are seeded, so a report is
//! reproducible bit for bit.

pub mod oracle;

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::belief::{BetaBelief, Belief, GridBelief};
use crate::error::Result;
use crate::harness::{
    output::render, run_experiment, simulate_multi_user, AggregateStats, ExperimentConfig, OutputFormat, OutputKind, StrategyId,
};
use crate::model::ThetaVector;
use crate::multi_user::{centralized_loss, decay_constants, exploitation_start, nash_strategy, optimal_symmetric_strategy, Decay};
use crate::planning::{gittins_index_of, optimal_value, stopping_index, GittinsParams, GittinsTable};
use crate::rng::{stream, Stream};
use crate::single_user::{kl_bernoulli, regret_lower_bound_coefficient};
use oracle::{brute_force_stopping_index, brute_force_value};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Settings shared by all criteria.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// When set, result files of the Monte Carlo experiments go here.
    pub out: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 2024, out: None }
    }
}

struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { ok: true, notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, note: String) {
        self.ok &= ok;
        self.notes.push(if ok { note } else { format!("FAILED {note}") });
    }

    fn report(self, id: u32, name: &'static str, start: Instant) -> CriterionReport {
        CriterionReport {
            id,
            name,
            passed: self.ok,
            detail: self.notes.join("; "),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn theta(v: &[f64]) -> ThetaVector {
    ThetaVector::new(v.to_vec()).expect("valid θ")
}

/// A Monte Carlo experiment run by the suite.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: &'static str,
    pub config: ExperimentConfig,
}

fn single(name: &'static str, id: StrategyId, t: usize, reps: usize, seed: u64) -> Experiment {
    Experiment {
        name,
        config: ExperimentConfig::fixed(theta(&[0.9, 0.5]), id, t).with_replications(reps).with_seed(seed),
    }
}

/// Rule 2 setting: θ = (0.9, 0.6, 0.3, 0.2), K = 200.
pub const RULE2_THETA: [f64; 4] = [0.9, 0.6, 0.3, 0.2];
/// Rule 3 setting: θ = (0.9, 0.7, 0.5, 0.3), K = 10.
pub const RULE3_THETA: [f64; 4] = [0.9, 0.7, 0.5, 0.3];

/// Every harness experiment behind criteria 5, 6, 8 and 10.
pub fn experiments(seed: u64) -> Vec<Experiment> {
    let multi = |name, th: &[f64], id, k, reps| Experiment {
        name,
        config: ExperimentConfig::fixed(theta(th), id, 10_000)
            .with_users(k)
            .with_replications(reps)
            .with_seed(seed),
    };
    vec![
        single("ucb_t1e4", StrategyId::UcbRule1, 10_000, 2000, seed),
        single("ucb_t1e2", StrategyId::UcbRule1, 100, 2000, seed),
        single("random_t1e5", StrategyId::Random, 100_000, 100, seed),
        single("stay_rr_t1e4", StrategyId::StayWinnerRr, 10_000, 100, seed),
        single("stay_rr_t1e5", StrategyId::StayWinnerRr, 100_000, 100, seed),
        single("stay_rand_t1e4", StrategyId::StayWinnerRand, 10_000, 100, seed),
        single("stay_rand_t1e5", StrategyId::StayWinnerRand, 100_000, 100, seed),
        multi("symmetric_k2", &[0.8, 0.4], StrategyId::SymmetricOpt, 2, 200),
        multi("rule2_k200", &RULE2_THETA, StrategyId::Rule2, 200, 1),
        multi("rule3_k10", &RULE3_THETA, StrategyId::Rule3, 10, 1),
    ]
}

fn experiment(opts: &VerifyOptions, name: &str) -> Experiment {
    experiments(opts.seed)
        .into_iter()
        .find(|e| e.name == name)
        .expect("registered experiment")
}

const ALL_OUTPUTS: [OutputKind; 3] = [OutputKind::LossCurve, OutputKind::Occupancy, OutputKind::Summary];

fn run_and_emit(opts: &VerifyOptions, e: &Experiment) -> Result<AggregateStats> {
    let stats = run_experiment(&e.config)?;
    if let Some(dir) = &opts.out {
        crate::harness::emit_results(&stats, &ALL_OUTPUTS, OutputFormat::Csv, &dir.join(e.name))?;
    }
    Ok(stats)
}

/// 1. Exact planner against brute-force history-tree enumeration.
pub fn criterion_1() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let pinned = optimal_value(&BetaBelief::uniform(2).into(), 2, 1.0)?.value;
    c.require((pinned - 13.0 / 12.0).abs() <= 1e-9, format!("V(Beta(1,1)^2, T=2) = {pinned:.12}"));
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for n in 1..=3usize {
        let params: Vec<(u32, u32)> = (1..=3).flat_map(|a| (1..=3).map(move |b| (a, b))).collect();
        let mut idx = vec![0usize; n];
        loop {
            let a: Vec<u32> = idx.iter().map(|&i| params[i].0).collect();
            let b: Vec<u32> = idx.iter().map(|&i| params[i].1).collect();
            let belief: Belief = BetaBelief::new(a.iter().map(|&x| x as f64).collect(), b.iter().map(|&x| x as f64).collect())?.into();
            for t in 1..=6 {
                let dp = optimal_value(&belief, t, 1.0)?.value;
                worst = worst.max((dp - brute_force_value(&a, &b, t, 1.0)).abs());
                cases += 1;
            }
            let mut pos = 0;
            while pos < n {
                idx[pos] += 1;
                if idx[pos] < params.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == n {
                break;
            }
        }
    }
    c.require(worst <= 1e-9, format!("max |DP - enumeration| = {worst:.2e} over {cases} cases"));
    Ok(c.report(1, "DP-oracle equivalence", start))
}

/// 2. Stopping index by calibration against enumeration of stopping rules.
pub fn criterion_2() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let belief: Belief = BetaBelief::uniform(1).into();
    let mut worst = 0.0f64;
    for t in 1..=5 {
        let diff = (stopping_index(&belief, t)? - brute_force_stopping_index(1, 1, t)).abs();
        worst = worst.max(diff);
    }
    c.require(worst <= 1e-9, format!("max |calibration - enumeration| = {worst:.2e} for T ≤ 5"));
    let v = stopping_index(&belief, 2)?;
    c.require((v - 5.0 / 9.0).abs() <= 1e-9, format!("Λ(Beta(1,1), 2) = {v:.12}"));
    Ok(c.report(2, "stopping-index oracle", start))
}

/// Largest `|x - y|` between two tables over states whose shallower
/// truncation error bound is within `bound`.
fn table_gap(short: &GittinsTable, long: &GittinsTable, bound: f64) -> (f64, u32) {
    let p = short.params;
    let h = p.state_truncation;
    let max_n = (2..h).filter(|&n| p.truncation_bound(h - n) <= bound).max().unwrap_or(2);
    let mut worst = 0.0f64;
    for n in 2..=max_n {
        for a in 1..n {
            let x = short.get(a, n - a).expect("in table");
            let y = long.get(a, n - a).expect("in table");
            worst = worst.max((x - y).abs());
        }
    }
    (worst, max_n)
}

/// 3. Gittins index: degenerate arms, monotonicity, truncation consistency.
pub fn criterion_3() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let params = GittinsParams {
        discount: 0.9,
        state_truncation: 400,
        tolerance: 1e-4,
    };
    let mut exact = true;
    for th in [0.0, 0.05, 0.3, 0.5, 0.77, 1.0] {
        let b: Belief = GridBelief::point_mass(vec![th])?.into();
        exact &= gittins_index_of(&b, &params)?.value == th;
    }
    c.require(exact, "degenerate arms index exactly θ".into());

    let t400 = GittinsTable::build(params)?;
    let mut violations = 0usize;
    for n in 2..400u32 {
        for a in 1..n {
            let b = n - a;
            let v = t400.get(a, b).expect("in table");
            if t400.get(a + 1, b).expect("in table") < v || t400.get(a, b + 1).expect("in table") > v {
                violations += 1;
            }
        }
    }
    c.require(violations == 0, format!("{violations} monotonicity violations on a + b < 400"));

    let t800 = GittinsTable::build(GittinsParams {
        state_truncation: 800,
        ..params
    })?;
    // Compare where the H = 400 truncation itself promises 1e-3; the last
    // few levels before a + b = 400 are boundary states by construction.
    let (gap, max_n) = table_gap(&t400, &t800, 1e-3);
    let (all, _) = table_gap(&t400, &t800, f64::INFINITY);
    c.require(
        gap <= 1e-3,
        format!("max |H=400 - H=800| = {gap:.2e} on a + b ≤ {max_n} ({all:.2e} including boundary levels)"),
    );
    Ok(c.report(3, "Gittins sanity", start))
}

/// 4. Lower-bound coefficient for θ = (0.9, 0.5).
pub fn criterion_4() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let got = regret_lower_bound_coefficient(&theta(&[0.9, 0.5]), 1.0);
    let hand = 0.4 / (0.5 * (25.0f64 / 9.0).ln());
    c.require((got - 0.783045).abs() <= 1e-5, format!("coefficient = {got:.7} (hand form {hand:.7})"));
    let kl = kl_bernoulli(0.5, 0.9);
    c.require((kl - 0.510826).abs() <= 1e-6, format!("D(0.5‖0.9) = {kl:.7}"));
    Ok(c.report(4, "lower-bound arithmetic", start))
}

/// 5. Rule 1 loss grows like ln T.
pub fn criterion_5(opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let long = run_and_emit(opts, &experiment(opts, "ucb_t1e4"))?;
    let short = run_and_emit(opts, &experiment(opts, "ucb_t1e2"))?;
    let l4 = long.summary.expected_loss.expect("single-user").mean;
    let l2 = short.summary.expected_loss.expect("single-user").mean;
    let scaled = l4 / (1e4f64).ln();
    c.require((0.39..=15.7).contains(&scaled), format!("L(10^4)/ln(10^4) = {scaled:.4}"));
    c.require(l4 / l2 < 10.0, format!("L(10^4)/L(10^2) = {:.3}", l4 / l2));
    Ok(c.report(5, "Rule 1 order-optimality signature", start))
}

/// 6. Random and stay-with-winner losses grow linearly.
pub fn criterion_6(opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let rate = |name: &str| -> Result<f64> {
        let e = experiment(opts, name);
        let s = run_and_emit(opts, &e)?.summary;
        Ok(s.expected_loss.expect("single-user").mean / e.config.block.n_slots as f64)
    };
    let r = rate("random_t1e5")?;
    c.require(((r - 0.2) / 0.2).abs() <= 0.02, format!("random rate = {r:.5}"));
    for rule in ["rr", "rand"] {
        let r4 = rate(&format!("stay_{rule}_t1e4"))?;
        let r5 = rate(&format!("stay_{rule}_t1e5"))?;
        c.require(((r5 - r4) / r4).abs() <= 0.02, format!("stay-winner-{rule} rates {r4:.5} / {r5:.5}"));
    }
    Ok(c.report(6, "linear-loss baselines", start))
}

/// 7. Symmetric-strategy solver.
pub fn criterion_7(seed: u64) -> Result<CriterionReport> {
    use rand::Rng;
    let start = Instant::now();
    let mut c = Check::new();
    let mut rng = stream(seed, Stream::Theta);
    let (mut norm, mut kkt) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let n = rng.random_range(2..=8);
        let th: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random::<f64>() }).collect();
        let th = theta(&th);
        if th.support_size() == 0 {
            continue;
        }
        let k = [2, 3, 5, 10, 50, 200, 1000][rng.random_range(0..7)];
        let s = optimal_symmetric_strategy(&th, k)?;
        let p = s.strategy.probabilities();
        norm = norm.max((p.iter().sum::<f64>() - 1.0).abs());
        if th.support_size() >= 2 {
            let kf = k as f64;
            let marg: Vec<f64> = (0..n).map(|i| kf * th.get(i) * (1.0 - p[i]).powf(kf - 1.0)).collect();
            let common = (0..n).filter(|&i| p[i] > 0.0).map(|i| marg[i]).fold(f64::NEG_INFINITY, f64::max);
            for i in 0..n {
                let excess = if p[i] > 0.0 {
                    (marg[i] - common).abs()
                } else {
                    (marg[i] - common).max(0.0)
                };
                kkt = kkt.max(excess / common.max(1.0));
            }
        }
    }
    c.require(norm <= 1e-12, format!("max |Σp - 1| = {norm:.1e}"));
    c.require(kkt <= 1e-8, format!("max KKT gap = {kkt:.1e}"));
    let s = optimal_symmetric_strategy(&theta(&[0.8, 0.4]), 2)?;
    let p = s.strategy.probabilities();
    c.require(
        (p[0] - 2.0 / 3.0).abs() <= 1e-9 && (p[1] - 1.0 / 3.0).abs() <= 1e-9,
        format!("p(0.8, 0.4; K=2) = ({:.10}, {:.10})", p[0], p[1]),
    );
    let mut flat = 0.0f64;
    for th in [&[0.8, 0.4][..], &[0.9, 0.6, 0.3, 0.2], &[0.5, 0.0, 0.05, 0.95, 0.3]] {
        let th = theta(th);
        let q = th.support_size() as f64;
        let p = optimal_symmetric_strategy(&th, 10_000)?;
        for (i, &pi) in p.strategy.probabilities().iter().enumerate() {
            let target = if th.get(i) > 0.0 { 1.0 / q } else { 0.0 };
            flat = flat.max((pi - target).abs());
        }
    }
    c.require(flat <= 0.01, format!("max |p - 1/Q| at K=10^4 = {flat:.4}"));
    Ok(c.report(7, "symmetric solver", start))
}

/// 8. Monte Carlo throughput and loss against the closed forms.
pub fn criterion_8(opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let s = run_and_emit(opts, &experiment(opts, "symmetric_k2"))?.summary;
    let tp = s.closed_form_throughput.expect("fixed θ");
    let loss = s.closed_form_loss.expect("fixed θ");
    let se_tp = s.throughput.stderr.expect("R ≥ 2");
    let se_loss = s.realized_loss.stderr.expect("R ≥ 2");
    let z_tp = (s.throughput.mean - tp) / se_tp;
    let z_loss = (s.realized_loss.mean - loss) / se_loss;
    c.require(z_tp.abs() <= 3.0, format!("throughput {:.2} vs {tp:.2} (z = {z_tp:.2})", s.throughput.mean));
    c.require(z_loss.abs() <= 3.0, format!("loss {:.2} vs {loss:.2} (z = {z_loss:.2})", s.realized_loss.mean));
    Ok(c.report(8, "throughput/loss closed forms", start))
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// 9. Exponential decay of the proportional strategy's loss in K.
pub fn criterion_9() -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let th = theta(&[0.8, 0.4]);
    let tau = nash_strategy(&th)?;
    let ks: Vec<f64> = (5..=40).map(f64::from).collect();
    let ln_loss: Vec<f64> = (5..=40).map(|k| centralized_loss(&th, &tau, k, 10_000, 1.0).ln()).collect();
    let slope = ols_slope(&ks, &ln_loss);
    let d = decay_constants(&th)?;
    let c2 = d.c2.rate().expect("two channels");
    c.require(((-slope - c2) / c2).abs() <= 0.05, format!("slope = {slope:.6}, c2 = {c2:.6}"));
    c.require(d.c1 == Decay::Rate(std::f64::consts::LN_2), format!("c1 = {} (ln 2 = {})", d.c1.rate().map_or("no-loss".into(), |r| r.to_string()), std::f64::consts::LN_2));
    Ok(c.report(9, "exponential decay", start))
}

/// 10. Rules 2 and 3 reach their targets.
pub fn criterion_10(opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();

    let e2 = experiment(opts, "rule2_k200");
    let rec = simulate_multi_user(&e2.config, 0)?;
    let t = e2.config.block.n_slots;
    let freq = rec.selection_frequencies(0, t - t / 10 + 1, t);
    let tau = nash_strategy(&theta(&RULE2_THETA))?;
    let dev = max_abs_diff(&freq, tau.probabilities());
    c.require(dev <= 0.05, format!("rule 2 tagged user, last 10%: max deviation {dev:.4}"));

    let e3 = experiment(opts, "rule3_k10");
    let rec = simulate_multi_user(&e3.config, 0)?;
    let t = e3.config.block.n_slots;
    let k = e3.config.block.n_users;
    let n = RULE3_THETA.len();
    let phase2 = exploitation_start(t as u64).max(n as u64 + 1) as usize;
    let mut counts = vec![0.0; n];
    for row in &rec.choices[phase2 - 1..] {
        for &ch in row {
            counts[ch] += 1.0;
        }
    }
    let total = ((t + 1 - phase2) * k) as f64;
    let freq: Vec<f64> = counts.iter().map(|x| x / total).collect();
    let target = optimal_symmetric_strategy(&theta(&RULE3_THETA), k)?;
    let dev = max_abs_diff(&freq, target.strategy.probabilities());
    c.require(dev <= 0.05, format!("rule 3 phase 2 (slots ≥ {phase2}): max deviation {dev:.4}"));

    if opts.out.is_some() {
        run_and_emit(opts, &e2)?;
        run_and_emit(opts, &e3)?;
    }
    Ok(c.report(10, "Rules 2-3 convergence", start))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// 11. Reruns every suite experiment and compares the rendered files.
pub fn criterion_11(opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut c = Check::new();
    let mut differing = Vec::new();
    let list = experiments(opts.seed);
    for e in &list {
        let first = render(&run_experiment(&e.config)?, &ALL_OUTPUTS, OutputFormat::Csv);
        let second = render(&run_experiment(&e.config)?, &ALL_OUTPUTS, OutputFormat::Csv);
        if first != second {
            differing.push(e.name);
        }
    }
    c.require(
        differing.is_empty(),
        format!("{} experiments rerun, differing: {:?}", list.len(), differing),
    );
    Ok(c.report(11, "determinism", start))
}

/// Runs one criterion by number.
pub fn run_criterion(id: u32, opts: &VerifyOptions) -> Result<CriterionReport> {
    match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(opts),
        6 => criterion_6(opts),
        7 => criterion_7(opts.seed),
        8 => criterion_8(opts),
        9 => criterion_9(),
        10 => criterion_10(opts),
        11 => criterion_11(opts),
        _ => Err(crate::error::Error::Precondition(format!("no criterion {id}"))),
    }
}

pub const CRITERIA: std::ops::RangeInclusive<u32> = 1..=11;
