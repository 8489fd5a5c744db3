//! Exact finite-horizon Bayesian planner.
//!
//! The value of a belief with `T` slots to go satisfies
//! `V(f, T) = max_i E_f[B Z_i + V(f_{Z_i}, T - 1)]` with `V(f, 0) = 0`. Since
//! the posterior depends on the history only through the per-channel counts,
//! the recursion runs over the count lattice instead of the history tree and
//! each lattice point is solved once.

use std::collections::HashMap;
use std::sync::Arc;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::belief::{Belief, Counts};
use crate::error::{Error, Result};
use crate::strategy::{argmax, Strategy};

/// Default cap on the number of memoized lattice states.
pub const DEFAULT_STATE_BUDGET: u128 = 10_000_000;

/// Relative slack under which two action values count as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    value: f64,
    action: usize,
}

/// Optimal expected throughput and the optimal policy over every reachable
/// count state.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub value: f64,
    pub first_action: usize,
    pub horizon: usize,
    pub bits_per_slot: f64,
    table: HashMap<Vec<Counts>, Node>,
}

impl PlanResult {
    /// Optimal action once `counts` have been observed.
    pub fn action_at(&self, counts: &[Counts]) -> Option<usize> {
        self.table.get(counts).map(|n| n.action)
    }

    /// Optimal value-to-go once `counts` have been observed.
    pub fn value_at(&self, counts: &[Counts]) -> Option<f64> {
        self.table.get(counts).map(|n| n.value)
    }

    pub fn n_states(&self) -> usize {
        self.table.len()
    }

    /// `(counts, remaining slots, action)` for every memoized state, in a
    /// stable order.
    pub fn policy_entries(&self) -> Vec<(Vec<Counts>, usize, usize)> {
        let mut out: Vec<_> = self
            .table
            .iter()
            .map(|(c, n)| {
                let used: u32 = c.iter().map(Counts::total).sum();
                (c.clone(), self.horizon - used as usize, n.action)
            })
            .collect();
        out.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        out
    }

    /// Largest violation of the Bellman equation over all memoized states,
    /// recomputed from the stored child values.
    pub fn bellman_residual(&self, belief: &Belief) -> f64 {
        let mut worst = 0.0f64;
        for (counts, node) in &self.table {
            let used: u32 = counts.iter().map(Counts::total).sum();
            let remaining = self.horizon - used as usize;
            let best = (0..counts.len())
                .map(|i| {
                    let m = belief.mean_given(counts, i).unwrap_or(0.0);
                    let child = |free: bool| -> f64 {
                        if remaining == 1 {
                            return 0.0;
                        }
                        let mut c = counts.clone();
                        c[i].record(free);
                        self.value_at(&c).unwrap_or(0.0)
                    };
                    let v1 = if m > 0.0 { m * (self.bits_per_slot + child(true)) } else { 0.0 };
                    let v0 = if m < 1.0 { (1.0 - m) * child(false) } else { 0.0 };
                    v1 + v0
                })
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((best - node.value).abs());
        }
        worst
    }
}

/// Channels are numbered from 1 in the serialized form.
impl Serialize for PlanResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry {
            counts: Vec<[u32; 2]>,
            remaining: usize,
            channel: usize,
        }
        let policy: Vec<Entry> = self
            .policy_entries()
            .into_iter()
            .map(|(c, remaining, action)| Entry {
                counts: c.iter().map(|c| [c.successes, c.failures]).collect(),
                remaining,
                channel: action + 1,
            })
            .collect();
        let mut s = serializer.serialize_struct("PlanResult", 5)?;
        s.serialize_field("value", &self.value)?;
        s.serialize_field("first_channel", &(self.first_action + 1))?;
        s.serialize_field("horizon", &self.horizon)?;
        s.serialize_field("bits_per_slot", &self.bits_per_slot)?;
        s.serialize_field("policy", &policy)?;
        s.end()
    }
}

/// Number of count states with fewer than `horizon` observations spread over
/// `n_channels` channels: `C(horizon - 1 + 2N, 2N)`.
pub fn lattice_size(n_channels: usize, horizon: usize) -> u128 {
    let k = 2 * n_channels as u128;
    let n = horizon as u128 - 1 + k;
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Solves the planning problem with the default state budget.
pub fn optimal_value(belief: &Belief, horizon: usize, bits_per_slot: f64) -> Result<PlanResult> {
    optimal_value_with_budget(belief, horizon, bits_per_slot, DEFAULT_STATE_BUDGET)
}

/// Solves the planning problem, refusing when the count lattice would exceed
/// `budget` states.
pub fn optimal_value_with_budget(belief: &Belief, horizon: usize, bits_per_slot: f64, budget: u128) -> Result<PlanResult> {
    if horizon == 0 {
        return Err(Error::Precondition("planning horizon must be at least 1".into()));
    }
    if !(bits_per_slot >= 0.0 && bits_per_slot.is_finite()) {
        return Err(Error::Precondition("bits_per_slot must be finite and nonnegative".into()));
    }
    let required = lattice_size(belief.n_channels(), horizon);
    if required > budget {
        return Err(Error::ResourceLimit { required, budget });
    }
    let mut solver = Solver {
        belief,
        bits: bits_per_slot,
        table: HashMap::new(),
    };
    let root = vec![Counts::default(); belief.n_channels()];
    let node = solver.solve(&root, horizon);
    Ok(PlanResult {
        value: node.value,
        first_action: node.action,
        horizon,
        bits_per_slot,
        table: solver.table,
    })
}

struct Solver<'a> {
    belief: &'a Belief,
    bits: f64,
    table: HashMap<Vec<Counts>, Node>,
}

impl Solver<'_> {
    fn solve(&mut self, counts: &[Counts], remaining: usize) -> Node {
        if let Some(n) = self.table.get(counts) {
            return *n;
        }
        let mut best = Node {
            value: f64::NEG_INFINITY,
            action: 0,
        };
        for i in 0..counts.len() {
            let m = self.belief.mean_given(counts, i).unwrap_or(0.0);
            let mut q = 0.0;
            if m > 0.0 {
                let future = if remaining > 1 { self.child(counts, i, true, remaining) } else { 0.0 };
                q += m * (self.bits + future);
            }
            if m < 1.0 && remaining > 1 {
                q += (1.0 - m) * self.child(counts, i, false, remaining);
            }
            if i == 0 || q > best.value + TIE_EPS * best.value.abs().max(1.0) {
                best = Node { value: q, action: i };
            }
        }
        self.table.insert(counts.to_vec(), best);
        best
    }

    fn child(&mut self, counts: &[Counts], channel: usize, free: bool, remaining: usize) -> f64 {
        let mut c = counts.to_vec();
        c[channel].record(free);
        self.solve(&c, remaining - 1).value
    }
}

/// Follows a [`PlanResult`] online. Past the planned horizon it falls back to
/// the channel with the largest posterior mean.
#[derive(Debug, Clone)]
pub struct OptimalDpStrategy {
    plan: Arc<PlanResult>,
    prior: Belief,
    counts: Vec<Counts>,
}

impl OptimalDpStrategy {
    pub fn new(plan: Arc<PlanResult>, prior: Belief) -> Self {
        let n = prior.n_channels();
        Self {
            plan,
            prior,
            counts: vec![Counts::default(); n],
        }
    }
}

impl Strategy for OptimalDpStrategy {
    fn select(&mut self, _slot: u64) -> usize {
        self.plan.action_at(&self.counts).unwrap_or_else(|| {
            argmax((0..self.counts.len()).map(|i| self.prior.mean_given(&self.counts, i).unwrap_or(0.0)))
        })
    }

    fn observe(&mut self, channel: usize, free: bool) {
        self.counts[channel].record(free);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BetaBelief, GridBelief};
    use crate::verify::oracle::brute_force_value;
    use approx::assert_abs_diff_eq;

    #[test]
    fn known_theta_always_best_channel() {
        let b = Belief::from(GridBelief::point_mass(vec![0.9, 0.5]).unwrap());
        let plan = optimal_value(&b, 3, 1.0).unwrap();
        assert_abs_diff_eq!(plan.value, 2.7, epsilon = 1e-12);
        assert_eq!(plan.first_action, 0);
    }

    #[test]
    fn uniform_priors_small_horizons() {
        let b = Belief::from(BetaBelief::uniform(2));
        assert_abs_diff_eq!(optimal_value(&b, 1, 1.0).unwrap().value, 0.5, epsilon = 1e-15);
        let plan = optimal_value(&b, 2, 1.0).unwrap();
        assert_abs_diff_eq!(plan.value, 13.0 / 12.0, epsilon = 1e-15);
        assert_eq!(plan.first_action, 0);
        // after a busy first slot on channel 0 the untouched channel is better
        let mut c = vec![Counts::default(); 2];
        c[0].record(false);
        assert_eq!(plan.action_at(&c), Some(1));
        c[0] = Counts::new(1, 0);
        assert_eq!(plan.action_at(&c), Some(0));
    }

    #[test]
    fn matches_history_tree_enumeration() {
        for (a, b, t) in [
            (vec![1, 2], vec![1, 1], 4),
            (vec![3, 1, 2], vec![1, 2, 2], 4),
            (vec![1], vec![3], 5),
        ] {
            let belief = Belief::from(
                BetaBelief::new(a.iter().map(|&x| x as f64).collect(), b.iter().map(|&x| x as f64).collect()).unwrap(),
            );
            let plan = optimal_value(&belief, t, 1.5).unwrap();
            assert_abs_diff_eq!(plan.value, brute_force_value(&a, &b, t, 1.5), epsilon = 1e-12);
        }
    }

    #[test]
    fn bellman_consistency() {
        let belief = Belief::from(BetaBelief::new(vec![1.0, 2.0, 1.0], vec![1.0, 1.0, 3.0]).unwrap());
        let plan = optimal_value(&belief, 6, 1.0).unwrap();
        assert!(plan.bellman_residual(&belief) < 1e-12);

        let grid = Belief::from(
            GridBelief::new(vec![vec![0.2, 0.7], vec![0.8, 0.4], vec![0.5, 0.5]], vec![0.3, 0.3, 0.4]).unwrap(),
        );
        let plan = optimal_value(&grid, 5, 1.0).unwrap();
        assert!(plan.bellman_residual(&grid) < 1e-12);
        assert!(plan.value <= 5.0);
    }

    #[test]
    fn grid_with_certain_channel() {
        // θ_0 is 0 or 1; the first observation reveals it.
        let grid = Belief::from(GridBelief::new(vec![vec![0.0, 0.6], vec![1.0, 0.6]], vec![0.5, 0.5]).unwrap());
        let plan = optimal_value(&grid, 3, 1.0).unwrap();
        // sense 0 first: half the time it is always free (3), else 0 + 2·0.6
        assert_abs_diff_eq!(plan.value, 0.5 * 3.0 + 0.5 * 1.2, epsilon = 1e-12);
        assert_eq!(plan.first_action, 0);
    }

    #[test]
    fn budget_guard() {
        let b = Belief::from(BetaBelief::uniform(3));
        assert_eq!(lattice_size(3, 1), 1);
        assert_eq!(lattice_size(1, 3), 6);
        let err = optimal_value_with_budget(&b, 10, 1.0, 100).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { required, budget: 100 } if required == lattice_size(3, 10)));
        assert!(matches!(optimal_value(&b, 0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn plan_serializes() {
        let b = Belief::from(BetaBelief::uniform(2));
        let plan = optimal_value(&b, 2, 1.0).unwrap();
        let json = serde_json::to_value(&plan).unwrap();
        assert_eq!(json["first_channel"], 1);
        assert_eq!(json["policy"].as_array().unwrap().len(), plan.n_states());
        assert_eq!(json["policy"][0]["remaining"], 2);
    }
}
