//! One unknown channel against one channel of known availability.
//!
//! Once the known channel is chosen nothing more can be learned, so the best
//! rule never leaves it again and the problem reduces to optimal stopping on
//! the unknown channel. The stopping index
//! `Λ(f, T) = max_M E[Σ_{j≤M} Z(j)] / E[M]` over stopping times `1 ≤ M ≤ T`
//! is computed by calibration: Λ is the unique charge λ at which the best
//! stopping value of `E[Σ_{j≤M} (Z(j) - λ)]` is zero.

use crate::belief::{Belief, Counts};
use crate::error::{Error, Result};
use crate::strategy::Strategy;

const BISECTION_TOL: f64 = 1e-10;

/// Posterior means on the (successes, observations) lattice of one channel.
struct Lattice {
    // means[n][s]: predictive P(free) after n observations with s free
    means: Vec<Vec<f64>>,
}

impl Lattice {
    fn new(belief: &Belief, horizon: usize) -> Self {
        let means = (0..horizon)
            .map(|n| {
                (0..=n)
                    .map(|s| {
                        let c = [Counts::new(s as u32, (n - s) as u32)];
                        // unreachable histories never contribute; any value works
                        belief.mean_given(&c, 0).unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect();
        Self { means }
    }

    fn horizon(&self) -> usize {
        self.means.len()
    }

    /// Best stopping value of `E[Σ (Z - λ)]` with the first sense forced, and
    /// the continuation decision table at `λ`.
    fn stopping_value(&self, lambda: f64) -> (f64, Vec<Vec<bool>>) {
        let t = self.horizon();
        let mut go_on = vec![Vec::new(); t];
        // next[s]: optimal value-to-go with n+1 observations made and s free
        let mut next = vec![0.0; t + 1];
        for n in (0..t).rev() {
            let mut cur = vec![0.0; n + 1];
            let mut decision = vec![false; n + 1];
            for s in 0..=n {
                let m = self.means[n][s];
                let c = (m - lambda) + m * next[s + 1] + (1.0 - m) * next[s];
                if n == 0 || c > 0.0 {
                    cur[s] = c;
                    decision[s] = true;
                }
            }
            go_on[n] = decision;
            next = cur;
            next.push(0.0);
        }
        (next[0], go_on)
    }

    /// `(E[ΣZ], E[M])` under a continuation table.
    fn ratio_terms(&self, go_on: &[Vec<bool>]) -> (f64, f64) {
        let t = self.horizon();
        let mut num_next = vec![0.0; t + 1];
        let mut den_next = vec![0.0; t + 1];
        for n in (0..t).rev() {
            let mut num = vec![0.0; n + 2];
            let mut den = vec![0.0; n + 2];
            for s in 0..=n {
                if go_on[n][s] {
                    let m = self.means[n][s];
                    num[s] = m + m * num_next[s + 1] + (1.0 - m) * num_next[s];
                    den[s] = 1.0 + m * den_next[s + 1] + (1.0 - m) * den_next[s];
                }
            }
            num_next = num;
            den_next = den;
        }
        (num_next[0], den_next[0])
    }
}

/// Stopping index of a single-channel belief over `horizon` slots.
pub fn stopping_index(belief: &Belief, horizon: usize) -> Result<f64> {
    if belief.n_channels() != 1 {
        return Err(Error::Precondition(format!(
            "stopping index needs a single-channel belief, got {} channels",
            belief.n_channels()
        )));
    }
    if horizon == 0 {
        return Err(Error::Precondition("stopping index needs a horizon of at least 1".into()));
    }
    let lattice = Lattice::new(belief, horizon);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if lattice.stopping_value(mid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The stopping rule that is optimal just around the root attains the
    // maximal ratio; report that ratio exactly instead of the bracket midpoint.
    let (_, go_on) = lattice.stopping_value(0.5 * (lo + hi));
    let (num, den) = lattice.ratio_terms(&go_on);
    Ok(num / den)
}

/// Online rule for one unknown channel (0) and one known channel (1).
///
/// While on the unknown channel it recomputes the stopping index over the
/// remaining slots and moves to the known channel, for good, as soon as the
/// index does not exceed `theta_known`.
#[derive(Debug, Clone)]
pub struct OneKnownChannel {
    belief: Belief,
    theta_known: f64,
    horizon: usize,
    on_known: bool,
}

impl OneKnownChannel {
    pub fn new(belief_unknown: Belief, theta_known: f64, horizon: usize) -> Result<Self> {
        if belief_unknown.n_channels() != 1 {
            return Err(Error::Precondition("the unknown channel belief must be single-channel".into()));
        }
        if !(0.0..=1.0).contains(&theta_known) {
            return Err(Error::InvalidTheta(format!("{theta_known} is not in [0, 1]")));
        }
        if horizon == 0 {
            return Err(Error::Precondition("horizon must be at least 1".into()));
        }
        Ok(Self {
            belief: belief_unknown,
            theta_known,
            horizon,
            on_known: false,
        })
    }

    pub fn on_known(&self) -> bool {
        self.on_known
    }
}

impl Strategy for OneKnownChannel {
    fn select(&mut self, slot: u64) -> usize {
        if self.on_known {
            return 1;
        }
        let remaining = (self.horizon + 1).saturating_sub(slot as usize).max(1);
        let index = stopping_index(&self.belief, remaining).expect("validated at construction");
        if index <= self.theta_known {
            self.on_known = true;
            1
        } else {
            0
        }
    }

    fn observe(&mut self, channel: usize, free: bool) {
        if channel == 0 {
            let _ = self.belief.observe(0, free);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BetaBelief, GridBelief};
    use crate::verify::oracle::brute_force_stopping_index;
    use approx::assert_abs_diff_eq;

    fn uniform() -> Belief {
        BetaBelief::uniform(1).into()
    }

    #[test]
    fn point_mass_index_is_theta() {
        let b = Belief::from(GridBelief::point_mass(vec![0.37]).unwrap());
        for t in [1, 2, 7] {
            assert_abs_diff_eq!(stopping_index(&b, t).unwrap(), 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_small_horizons() {
        assert_abs_diff_eq!(stopping_index(&uniform(), 1).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(stopping_index(&uniform(), 2).unwrap(), 5.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn agrees_with_rule_enumeration() {
        for (a, b) in [(1, 1), (2, 1), (1, 3), (2, 2)] {
            let belief = Belief::from(BetaBelief::new(vec![a as f64], vec![b as f64]).unwrap());
            for t in 1..=4 {
                assert_abs_diff_eq!(
                    stopping_index(&belief, t).unwrap(),
                    brute_force_stopping_index(a, b, t),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn nondecreasing_in_horizon() {
        for belief in [
            uniform(),
            BetaBelief::new(vec![2.5], vec![1.0]).unwrap().into(),
            GridBelief::new(vec![vec![0.1], vec![0.9]], vec![0.7, 0.3]).unwrap().into(),
        ] {
            let mut prev = 0.0;
            for t in 1..30 {
                let x = stopping_index(&belief, t).unwrap();
                assert!(x >= prev - 1e-12, "T={t}: {x} < {prev}");
                prev = x;
            }
        }
    }

    #[test]
    fn rejects_multichannel_belief() {
        let b = Belief::from(BetaBelief::uniform(2));
        assert!(stopping_index(&b, 3).is_err());
    }

    #[test]
    fn one_known_channel_first_decision() {
        let mut s = OneKnownChannel::new(uniform(), 0.6, 2).unwrap();
        assert_eq!(s.select(1), 1);
        let mut s = OneKnownChannel::new(uniform(), 0.5, 2).unwrap();
        assert_eq!(s.select(1), 0);
        let mut s = OneKnownChannel::new(BetaBelief::new(vec![9.0], vec![1.0]).unwrap().into(), 1.0, 10).unwrap();
        assert_eq!(s.select(1), 1);
    }

    #[test]
    fn one_known_channel_never_returns() {
        use crate::model::{generate_block, ThetaVector};
        use crate::rng::{stream, Stream};
        for seed in 0..40 {
            let theta = ThetaVector::new(vec![0.3 + 0.01 * seed as f64, 0.55]).unwrap();
            let t = 40;
            let z = generate_block(&theta, t, &mut stream(seed, Stream::Environment)).unwrap();
            let mut s = OneKnownChannel::new(uniform(), 0.55, t).unwrap();
            let mut left = false;
            for j in 0..t {
                let c = s.select(j as u64 + 1);
                if left {
                    assert_eq!(c, 1);
                }
                left |= c == 1;
                s.observe(c, z.free(c, j));
            }
        }
    }
}
