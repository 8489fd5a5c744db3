//! Discounted Gittins index of a Beta-Bernoulli channel.
//!
//! The index of a state is the per-slot reward λ of a known alternative at
//! which one is indifferent between retiring to the alternative forever and
//! sensing the channel at least once more. The value of the retirement problem
//! is computed by backward induction over the (a, b) lattice, truncated at
//! `a + b = H` where states are treated as known arms with their posterior
//! mean, and λ is found by bisection.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, BetaBelief, Counts};
use crate::error::{Error, Result};
use crate::strategy::{argmax, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GittinsParams {
    /// Discount factor α in (0, 1).
    pub discount: f64,
    /// Truncation level H: states with `a + b >= H` are treated as known arms.
    pub state_truncation: u32,
    pub tolerance: f64,
}

impl Default for GittinsParams {
    fn default() -> Self {
        Self {
            discount: 0.9,
            state_truncation: 400,
            tolerance: 1e-4,
        }
    }
}

impl GittinsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Precondition("discount must lie in (0, 1)".into()));
        }
        if self.state_truncation < 2 {
            return Err(Error::Precondition("state truncation must be at least 2".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Precondition("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Upper bound on the index error caused by truncating `depth` levels
    /// below the state.
    pub fn truncation_bound(&self, depth: u32) -> f64 {
        self.discount.powi(depth as i32) / (1.0 - self.discount)
    }
}

/// A computed index with its truncation error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GittinsIndex {
    pub value: f64,
    pub truncation_bound: f64,
    /// Whether `truncation_bound` is within the requested tolerance.
    pub meets_tolerance: bool,
}

fn levels_below(a: f64, b: f64, truncation: u32) -> u32 {
    (f64::from(truncation) - a - b).ceil().max(0.0) as u32
}

/// Depth beyond which truncation cannot move the index by more than a
/// quarter of the tolerance.
fn useful_depth(params: &GittinsParams) -> u32 {
    let target = 0.25 * params.tolerance * (1.0 - params.discount);
    (target.ln() / params.discount.ln()).ceil().max(1.0) as u32
}

/// Value of sensing once more and then acting optimally, with retirement
/// reward `lambda` per slot. `mean(s, n)` is the predictive probability of a
/// free slot after `n` further observations of which `s` were free.
fn continuation_value(mean: &impl Fn(usize, usize) -> f64, depth: u32, alpha: f64, lambda: f64) -> f64 {
    let depth = depth as usize;
    let retire = lambda / (1.0 - alpha);
    let mut next: Vec<f64> = (0..=depth).map(|s| retire.max(mean(s, depth) / (1.0 - alpha))).collect();
    for n in (0..depth).rev() {
        for s in 0..=n {
            let m = mean(s, n);
            let go_on = m + alpha * (m * next[s + 1] + (1.0 - m) * next[s]);
            next[s] = if n == 0 { go_on } else { go_on.max(retire) };
        }
    }
    next[0]
}

fn calibrate(mean: impl Fn(usize, usize) -> f64, depth: u32, params: &GittinsParams) -> f64 {
    let alpha = params.discount;
    let (mut lo, mut hi) = (mean(0, 0), 1.0f64);
    let target = (params.tolerance * 0.25).max(1e-13);
    while hi - lo > target {
        let mid = 0.5 * (lo + hi);
        if continuation_value(&mean, depth, alpha, mid) > mid / (1.0 - alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gittins index of Beta(a, b) under `params`.
///
/// The lattice below the state is cut at `a + b = H`, or earlier once the
/// discount makes deeper levels irrelevant at the requested tolerance.
pub fn gittins_index(a: f64, b: f64, params: &GittinsParams) -> Result<GittinsIndex> {
    params.validate()?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Precondition("Beta parameters must be positive".into()));
    }
    if a + b > f64::from(params.state_truncation) {
        return Err(Error::Precondition(format!(
            "a + b = {} exceeds the state truncation {}",
            a + b,
            params.state_truncation
        )));
    }
    let depth = levels_below(a, b, params.state_truncation).min(useful_depth(params));
    if depth == 0 {
        return Ok(GittinsIndex {
            value: a / (a + b),
            truncation_bound: 0.0,
            meets_tolerance: true,
        });
    }
    let bound = params.truncation_bound(depth);
    let meets_tolerance = bound <= params.tolerance;
    if !meets_tolerance {
        log::warn!(
            "Gittins index of Beta({a}, {b}): truncation at {} only guarantees {bound:.3e}",
            params.state_truncation
        );
    }
    let value = calibrate(|s, n| (a + s as f64) / (a + b + n as f64), depth, params);
    Ok(GittinsIndex {
        value,
        truncation_bound: bound,
        meets_tolerance,
    })
}

/// Gittins index of an arbitrary single-channel belief. A belief with a
/// single support value is a known arm and its index is that value.
pub fn gittins_index_of(belief: &Belief, params: &GittinsParams) -> Result<GittinsIndex> {
    params.validate()?;
    if belief.n_channels() != 1 {
        return Err(Error::Precondition("Gittins index needs a single-channel belief".into()));
    }
    match belief {
        Belief::Beta(b) => {
            let (a, bb) = b.params(0);
            gittins_index(a, bb, params)
        }
        Belief::Grid(g) => {
            let first = g.points()[0][0];
            let known = g.points().iter().zip(g.weights()).all(|(p, &w)| w == 0.0 || p[0] == first);
            if known {
                return Ok(GittinsIndex {
                    value: first,
                    truncation_bound: 0.0,
                    meets_tolerance: true,
                });
            }
            let depth = (params.state_truncation.saturating_sub(2)).min(useful_depth(params)).max(1);
            let bound = params.truncation_bound(depth);
            let mean = |s: usize, n: usize| {
                belief
                    .mean_given(&[Counts::new(s as u32, (n - s) as u32)], 0)
                    .unwrap_or(0.0)
            };
            Ok(GittinsIndex {
                value: calibrate(mean, depth, params),
                truncation_bound: bound,
                meets_tolerance: bound <= params.tolerance,
            })
        }
    }
}

/// Indices of every integer state `a, b >= 1`, `a + b <= H`.
///
/// Built with one backward pass over the whole lattice per value of λ on a
/// uniform grid of spacing `2 * tolerance`; each index is the midpoint of the
/// grid cell where continuing stops being strictly better than retiring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GittinsTable {
    pub params: GittinsParams,
    values: Vec<f64>,
}

fn table_pos(a: u32, b: u32) -> usize {
    let n = (a + b) as usize;
    (n - 2) * (n - 1) / 2 + (a as usize - 1)
}

impl GittinsTable {
    pub fn build(params: GittinsParams) -> Result<Self> {
        params.validate()?;
        let h = params.state_truncation as usize;
        let alpha = params.discount;
        let n_states = table_pos(1, h as u32 - 1) + h - 1;
        let step = 2.0 * params.tolerance;
        let n_grid = (1.0 / step).ceil() as usize + 1;
        // For each state, the largest grid index at which continuing wins.
        let chunk = n_grid.div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
        let best: Vec<i64> = (0..n_grid)
            .collect::<Vec<_>>()
            .par_chunks(chunk)
            .map(|grid_idx| {
                let mut last = vec![-1i64; n_states];
                let mut upper = vec![0.0; h + 1];
                let mut cur = vec![0.0; h + 1];
                for &g in grid_idx {
                    let lambda = (g as f64 * step).min(1.0);
                    let retire = lambda / (1.0 - alpha);
                    // level n = a + b; values indexed by a
                    for a in 1..h {
                        let m = a as f64 / h as f64;
                        upper[a] = retire.max(m / (1.0 - alpha));
                    }
                    for n in (2..h).rev() {
                        for a in 1..n {
                            let m = a as f64 / n as f64;
                            let go_on = m + alpha * (m * upper[a + 1] + (1.0 - m) * upper[a]);
                            if go_on > retire {
                                last[table_pos(a as u32, (n - a) as u32)] = g as i64;
                                cur[a] = go_on;
                            } else {
                                cur[a] = retire;
                            }
                        }
                        std::mem::swap(&mut upper, &mut cur);
                    }
                }
                last
            })
            .reduce(
                || vec![-1i64; n_states],
                |mut x, y| {
                    for (xi, yi) in x.iter_mut().zip(y) {
                        *xi = (*xi).max(yi);
                    }
                    x
                },
            );
        let mut values = vec![0.0; n_states];
        for n in 2..=h {
            for a in 1..n {
                let pos = table_pos(a as u32, (n - a) as u32);
                values[pos] = if n == h {
                    a as f64 / n as f64
                } else {
                    let g = best[pos];
                    ((g as f64 + 0.5) * step).min(1.0)
                };
            }
        }
        // Grid midpoints can tie with the exact boundary values up to
        // rounding; keeping each index between its two successors removes
        // that without leaving the grid-cell error bound, since the true
        // index is monotone.
        for n in (2..h).rev() {
            for a in 1..n {
                let b = n - a;
                let hi = values[table_pos(a as u32 + 1, b as u32)];
                let lo = values[table_pos(a as u32, b as u32 + 1)];
                let v = &mut values[table_pos(a as u32, b as u32)];
                *v = v.min(hi).max(lo);
            }
        }
        Ok(Self { params, values })
    }

    /// Index of Beta(a, b); states beyond the truncation get their mean.
    pub fn get(&self, a: u32, b: u32) -> Option<f64> {
        if a == 0 || b == 0 {
            return None;
        }
        if a + b >= self.params.state_truncation {
            return Some(f64::from(a) / f64::from(a + b));
        }
        Some(self.values[table_pos(a, b)])
    }

    pub fn truncation(&self) -> u32 {
        self.params.state_truncation
    }
}

#[derive(Debug, Clone)]
enum IndexSource {
    Table(Arc<GittinsTable>),
    Direct {
        params: GittinsParams,
        cache: HashMap<(u64, u64), f64>,
    },
}

impl IndexSource {
    fn index(&mut self, a: f64, b: f64) -> f64 {
        match self {
            IndexSource::Table(t) => {
                if a.fract() == 0.0 && b.fract() == 0.0 {
                    if let Some(v) = t.get(a as u32, b as u32) {
                        return v;
                    }
                }
                let params = t.params;
                direct_index(a, b, &params)
            }
            IndexSource::Direct { params, cache } => {
                let key = (a.to_bits(), b.to_bits());
                if let Some(&v) = cache.get(&key) {
                    return v;
                }
                let v = direct_index(a, b, params);
                cache.insert(key, v);
                v
            }
        }
    }
}

fn direct_index(a: f64, b: f64, params: &GittinsParams) -> f64 {
    if a + b >= f64::from(params.state_truncation) {
        return a / (a + b);
    }
    gittins_index(a, b, params).map(|g| g.value).unwrap_or(a / (a + b))
}

/// Senses the channel with the largest Gittins index; only the sensed
/// channel's posterior (and index) changes after each slot.
#[derive(Debug, Clone)]
pub struct GittinsStrategy {
    belief: BetaBelief,
    indices: Vec<f64>,
    source: IndexSource,
}

impl GittinsStrategy {
    /// Computes indices on demand by bisection.
    pub fn new(prior: BetaBelief, params: GittinsParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::from_source(
            prior,
            IndexSource::Direct {
                params,
                cache: HashMap::new(),
            },
        ))
    }

    /// Looks indices up in a precomputed table where possible.
    pub fn with_table(prior: BetaBelief, table: Arc<GittinsTable>) -> Self {
        Self::from_source(prior, IndexSource::Table(table))
    }

    fn from_source(prior: BetaBelief, mut source: IndexSource) -> Self {
        let indices = (0..prior.n_channels())
            .map(|i| {
                let (a, b) = prior.params(i);
                source.index(a, b)
            })
            .collect();
        Self {
            belief: prior,
            indices,
            source,
        }
    }

    pub fn indices(&self) -> &[f64] {
        &self.indices
    }
}

impl Strategy for GittinsStrategy {
    fn select(&mut self, _slot: u64) -> usize {
        argmax(self.indices.iter().copied())
    }

    fn observe(&mut self, channel: usize, free: bool) {
        self.belief.observe(channel, free);
        let (a, b) = self.belief.params(channel);
        self.indices[channel] = self.source.index(a, b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(h: u32) -> GittinsParams {
        GittinsParams {
            discount: 0.9,
            state_truncation: h,
            tolerance: 1e-6,
        }
    }

    #[test]
    fn known_arm_index_is_its_mean() {
        // At the truncation boundary a state is a known arm.
        let p = params(40);
        assert_eq!(gittins_index(12.0, 28.0, &p).unwrap().value, 0.3);
        // A very concentrated arm has (almost) no value of information.
        let p = GittinsParams { state_truncation: 200_000, tolerance: 1e-7, ..params(2) };
        let g = gittins_index(70_000.0, 30_000.0, &p).unwrap();
        assert!((g.value - 0.7).abs() < 2e-3, "{}", g.value);
    }

    #[test]
    fn degenerate_arm_is_exact() {
        let p = params(400);
        for theta in [0.0, 0.25, 0.8, 1.0] {
            let b = Belief::from(crate::belief::GridBelief::point_mass(vec![theta]).unwrap());
            assert_eq!(gittins_index_of(&b, &p).unwrap().value, theta);
        }
        let two_point = Belief::from(crate::belief::GridBelief::new(vec![vec![0.2], vec![0.8]], vec![0.5, 0.5]).unwrap());
        let g = gittins_index_of(&two_point, &p).unwrap().value;
        assert!(g > 0.5 && g < 0.8);
    }

    #[test]
    fn index_ordering() {
        let p = params(200);
        let hi = gittins_index(2.0, 1.0, &p).unwrap().value;
        let lo = gittins_index(1.0, 2.0, &p).unwrap().value;
        let mid = gittins_index(1.0, 1.0, &p).unwrap().value;
        assert!(hi > mid && mid > lo);
        assert!(mid > 0.5 && mid < 1.0);
    }

    #[test]
    fn small_discount_approaches_mean() {
        for (a, b) in [(1.0, 1.0), (3.0, 1.0), (2.0, 5.0)] {
            let p = GittinsParams { discount: 1e-4, ..params(100) };
            let g = gittins_index(a, b, &p).unwrap().value;
            assert!((g - a / (a + b)).abs() < 1e-3);
        }
    }

    #[test]
    fn warns_when_truncation_is_too_tight() {
        let p = params(6);
        let g = gittins_index(1.0, 1.0, &p).unwrap();
        assert!(!g.meets_tolerance);
        assert_abs_diff_eq!(g.truncation_bound, 0.9f64.powi(4) / 0.1, epsilon = 1e-12);
        assert!(gittins_index(10.0, 1.0, &p).is_err());
        assert!(gittins_index(0.0, 1.0, &p).is_err());
        assert!(gittins_index(1.0, 1.0, &GittinsParams { discount: 1.0, ..p }).is_err());
    }

    #[test]
    fn table_matches_bisection() {
        let p = GittinsParams { tolerance: 1e-4, ..params(60) };
        let table = GittinsTable::build(p).unwrap();
        for (a, b) in [(1, 1), (2, 1), (1, 2), (5, 7), (30, 3), (1, 50), (20, 39)] {
            let direct = gittins_index(a as f64, b as f64, &p).unwrap().value;
            let t = table.get(a, b).unwrap();
            assert!((t - direct).abs() <= 1.01e-4, "({a},{b}): {t} vs {direct}");
        }
        assert_eq!(table.get(59, 1), Some(59.0 / 60.0));
        assert_eq!(table.get(0, 1), None);
    }

    #[test]
    fn uniform_arm_matches_deep_reference() {
        // full-triangle calibration truncated at a + b = 2000
        let reference = 0.702_889_194;
        let p = params(400);
        assert!((gittins_index(1.0, 1.0, &p).unwrap().value - reference).abs() <= 1e-4);
        let table = GittinsTable::build(GittinsParams { tolerance: 1e-4, ..p }).unwrap();
        assert!((table.get(1, 1).unwrap() - reference).abs() <= 1e-4);
    }

    #[test]
    fn table_is_monotone() {
        let table = GittinsTable::build(GittinsParams { tolerance: 1e-4, ..params(80) }).unwrap();
        for n in 2..80u32 {
            for a in 1..n {
                let b = n - a;
                let v = table.get(a, b).unwrap();
                assert!(v > 0.0 && v < 1.0);
                assert!(table.get(a + 1, b).unwrap() >= v);
                if a > 1 {
                    assert!(table.get(a - 1, b + 1).unwrap() <= v);
                }
            }
        }
    }

    #[test]
    fn policy_tie_break_and_switching() {
        let p = params(100);
        let mut s = GittinsStrategy::new(BetaBelief::uniform(3), p).unwrap();
        assert_eq!(s.select(1), 0);
        s.observe(0, false);
        assert!(s.indices()[0] < s.indices()[1]);
        assert_eq!(s.select(2), 1);
    }

    #[test]
    fn policy_sticks_to_a_certain_channel() {
        // near point-mass at 1 on channel 2
        let prior = BetaBelief::new(vec![1.0, 1.0, 1e6], vec![1.0, 1.0, 1e-6]).unwrap();
        let p = GittinsParams { state_truncation: 2_000_000, ..params(2) };
        let mut s = GittinsStrategy::new(prior, p).unwrap();
        for j in 1..20 {
            assert_eq!(s.select(j), 2);
            s.observe(2, true);
        }
    }
}
