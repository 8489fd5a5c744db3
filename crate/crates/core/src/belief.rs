//! Posterior beliefs over the availability vector θ.
//!
//! Two backends are provided. [`BetaBelief`] is a product of independent Beta
//! distributions and updates in closed form. [`GridBelief`] is a weighted set
//! of support points in `[0, 1]^N` and can express correlated priors, at the
//! cost of a support that must stay small.
//!
//! Both backends are exchangeable in the observations: the posterior depends on
//! the history only through the per-channel [`Counts`], which is what the
//! planners use as their state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed free (`successes`) and busy (`failures`) slots on one channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Counts {
    pub successes: u32,
    pub failures: u32,
}

impl Counts {
    pub fn new(successes: u32, failures: u32) -> Self {
        Self { successes, failures }
    }

    pub fn total(&self) -> u32 {
        self.successes + self.failures
    }

    pub fn record(&mut self, free: bool) {
        if free {
            self.successes += 1;
        } else {
            self.failures += 1;
        }
    }

    pub fn with(mut self, free: bool) -> Self {
        self.record(free);
        self
    }
}

/// Prior over θ as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorSpec {
    /// Independent Beta(a_i, b_i) per channel.
    Beta { a: Vec<f64>, b: Vec<f64> },
    /// Discrete joint prior: `weights[m]` is the mass of the vector `points[m]`.
    Grid { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl PriorSpec {
    /// Beta(1, 1) on every channel.
    pub fn uniform(n_channels: usize) -> Self {
        PriorSpec::Beta {
            a: vec![1.0; n_channels],
            b: vec![1.0; n_channels],
        }
    }

    /// All mass on one known θ.
    pub fn point_mass(theta: Vec<f64>) -> Result<Self> {
        let spec = PriorSpec::Grid {
            points: vec![theta],
            weights: vec![1.0],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_channels(&self) -> usize {
        match self {
            PriorSpec::Beta { a, .. } => a.len(),
            PriorSpec::Grid { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Beta { a, b } => {
                if a.is_empty() || a.len() != b.len() {
                    return Err(Error::InvalidPrior("beta prior needs equal, nonempty a and b lists".into()));
                }
                if a.iter().chain(b).any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidPrior("beta parameters must be positive and finite".into()));
                }
            }
            PriorSpec::Grid { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::InvalidPrior("grid prior needs one weight per support point".into()));
                }
                let n = points[0].len();
                if n == 0 || points.iter().any(|p| p.len() != n) {
                    return Err(Error::InvalidPrior("grid support points must share a nonzero dimension".into()));
                }
                if points.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidPrior("grid support points must lie in [0, 1]^N".into()));
                }
                if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
                    return Err(Error::InvalidPrior("grid weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidPrior(format!("grid weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn to_belief(&self) -> Result<Belief> {
        self.validate()?;
        Ok(match self {
            PriorSpec::Beta { a, b } => Belief::Beta(BetaBelief {
                a: a.clone(),
                b: b.clone(),
            }),
            PriorSpec::Grid { points, weights } => Belief::Grid(GridBelief {
                points: points.clone(),
                weights: weights.clone(),
            }),
        })
    }
}

/// Product of per-channel Beta(a_i, b_i) posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBelief {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BetaBelief {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        match (PriorSpec::Beta { a, b }).to_belief()? {
            Belief::Beta(beta) => Ok(beta),
            Belief::Grid(_) => unreachable!(),
        }
    }

    pub fn uniform(n_channels: usize) -> Self {
        Self {
            a: vec![1.0; n_channels],
            b: vec![1.0; n_channels],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.a.len()
    }

    pub fn params(&self, channel: usize) -> (f64, f64) {
        (self.a[channel], self.b[channel])
    }

    pub fn mean(&self, channel: usize) -> f64 {
        self.a[channel] / (self.a[channel] + self.b[channel])
    }

    pub fn observe(&mut self, channel: usize, free: bool) {
        if free {
            self.a[channel] += 1.0;
        } else {
            self.b[channel] += 1.0;
        }
    }
}

/// Discrete joint belief over a finite set of θ vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBelief {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl GridBelief {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        match (PriorSpec::Grid { points, weights }).to_belief()? {
            Belief::Grid(grid) => Ok(grid),
            Belief::Beta(_) => unreachable!(),
        }
    }

    pub fn point_mass(theta: Vec<f64>) -> Result<Self> {
        Self::new(vec![theta], vec![1.0])
    }

    pub fn n_channels(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, channel: usize) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * p[channel]).sum()
    }

    pub fn observe(&mut self, channel: usize, free: bool) -> Result<()> {
        for (p, w) in self.points.iter().zip(self.weights.iter_mut()) {
            *w *= if free { p[channel] } else { 1.0 - p[channel] };
        }
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateEvidence {
                channel,
                observation: u8::from(free),
            });
        }
        for w in &mut self.weights {
            *w /= total;
        }
        Ok(())
    }

    fn log_likelihood(point: &[f64], counts: &[Counts]) -> f64 {
        let mut ll = 0.0;
        for (&p, c) in point.iter().zip(counts) {
            if c.successes > 0 {
                ll += f64::from(c.successes) * p.ln();
            }
            if c.failures > 0 {
                ll += f64::from(c.failures) * (1.0 - p).ln();
            }
        }
        ll
    }

    fn mean_given(&self, counts: &[Counts], channel: usize) -> Option<f64> {
        let logs: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| if w > 0.0 { w.ln() + Self::log_likelihood(p, counts) } else { f64::NEG_INFINITY })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (p, l) in self.points.iter().zip(&logs) {
            let w = (l - max).exp();
            num += w * p[channel];
            den += w;
        }
        Some(num / den)
    }

    fn marginal(&self, channel: usize) -> GridBelief {
        let mut pairs: Vec<(f64, f64)> = self.points.iter().map(|p| p[channel]).zip(self.weights.iter().cloned()).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (v, w) in pairs {
            match points.last() {
                Some(last) if last[0] == v => *weights.last_mut().unwrap() += w,
                _ => {
                    points.push(vec![v]);
                    weights.push(w);
                }
            }
        }
        GridBelief { points, weights }
    }
}

/// A posterior f^j(θ) from either backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Belief {
    Beta(BetaBelief),
    Grid(GridBelief),
}

impl From<BetaBelief> for Belief {
    fn from(b: BetaBelief) -> Self {
        Belief::Beta(b)
    }
}

impl From<GridBelief> for Belief {
    fn from(g: GridBelief) -> Self {
        Belief::Grid(g)
    }
}

impl Belief {
    pub fn n_channels(&self) -> usize {
        match self {
            Belief::Beta(b) => b.n_channels(),
            Belief::Grid(g) => g.n_channels(),
        }
    }

    fn check_channel(&self, channel: usize) -> Result<()> {
        if channel >= self.n_channels() {
            return Err(Error::ChannelOutOfRange {
                channel,
                n_channels: self.n_channels(),
            });
        }
        Ok(())
    }

    /// Bayesian update after observing `channel` free (`true`) or busy.
    pub fn update_posterior(&self, channel: usize, free: bool) -> Result<Belief> {
        let mut next = self.clone();
        next.observe(channel, free)?;
        Ok(next)
    }

    /// In-place form of [`Belief::update_posterior`].
    pub fn observe(&mut self, channel: usize, free: bool) -> Result<()> {
        self.check_channel(channel)?;
        match self {
            Belief::Beta(b) => {
                b.observe(channel, free);
                Ok(())
            }
            Belief::Grid(g) => g.observe(channel, free),
        }
    }

    /// Posterior mean of θ_channel. Panics if `channel` is out of range.
    pub fn posterior_mean(&self, channel: usize) -> f64 {
        match self {
            Belief::Beta(b) => b.mean(channel),
            Belief::Grid(g) => g.mean(channel),
        }
    }

    /// Posterior mean of θ_channel after additionally observing `counts`
    /// (one entry per channel). `None` when that history has zero probability.
    pub fn mean_given(&self, counts: &[Counts], channel: usize) -> Option<f64> {
        match self {
            Belief::Beta(b) => {
                let (a, bb) = b.params(channel);
                let c = counts[channel];
                let s = f64::from(c.successes);
                Some((a + s) / (a + bb + f64::from(c.total())))
            }
            Belief::Grid(g) => g.mean_given(counts, channel),
        }
    }

    /// Belief over the single channel `channel`.
    pub fn marginal(&self, channel: usize) -> Result<Belief> {
        self.check_channel(channel)?;
        Ok(match self {
            Belief::Beta(b) => {
                let (a, bb) = b.params(channel);
                Belief::Beta(BetaBelief { a: vec![a], b: vec![bb] })
            }
            Belief::Grid(g) => Belief::Grid(g.marginal(channel)),
        })
    }
}
