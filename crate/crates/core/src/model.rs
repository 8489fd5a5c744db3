//! Primary-network environment: per-channel availability probabilities, the
//! block configuration and the Bernoulli occupancy realization of one block.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::belief::PriorSpec;
use crate::error::{Error, Result};

/// Per-channel probability θ_i that channel `i` is free in a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidTheta("at least one channel is required".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidTheta(format!("{v} is not in [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn n_channels(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, channel: usize) -> f64 {
        self.0[channel]
    }

    /// Lowest-index channel attaining the maximum availability, with θ*.
    pub fn best(&self) -> (usize, f64) {
        let mut best = (0, self.0[0]);
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Number of channels that are ever free.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0.0).count()
    }
}

impl TryFrom<Vec<f64>> for ThetaVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThetaVector> for Vec<f64> {
    fn from(t: ThetaVector) -> Self {
        t.0
    }
}

/// Dimensions of one experiment block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub n_channels: usize,
    pub n_slots: usize,
    /// Bits sent per won free slot; every throughput is a multiple of it.
    pub bits_per_slot: f64,
    pub n_users: usize,
    pub seed: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            n_channels: 1,
            n_slots: 1,
            bits_per_slot: 1.0,
            n_users: 1,
            seed: 0,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::InvalidConfig("n_channels must be at least 1".into()));
        }
        if self.n_slots == 0 {
            return Err(Error::InvalidConfig("n_slots must be at least 1".into()));
        }
        if self.n_users == 0 {
            return Err(Error::InvalidConfig("n_users must be at least 1".into()));
        }
        if !(self.bits_per_slot >= 0.0 && self.bits_per_slot.is_finite()) {
            return Err(Error::InvalidConfig("bits_per_slot must be a finite nonnegative number".into()));
        }
        Ok(())
    }
}

/// Channel occupancy of one block: `free(i, j)` is Z_i(j).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelRealization {
    n_slots: usize,
    // Row-major, one row of `n_slots` entries per channel.
    z: Vec<bool>,
}

impl ChannelRealization {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n_slots = rows.first().map_or(0, Vec::len);
        if n_slots == 0 || rows.iter().any(|r| r.len() != n_slots) {
            return Err(Error::InvalidConfig("realization rows must be nonempty and of equal length".into()));
        }
        Ok(Self {
            n_slots,
            z: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_channels(&self) -> usize {
        self.z.len() / self.n_slots
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Whether `channel` is free in slot `slot` (both zero-based).
    #[inline]
    pub fn free(&self, channel: usize, slot: usize) -> bool {
        self.z[channel * self.n_slots + slot]
    }

    pub fn row(&self, channel: usize) -> &[bool] {
        &self.z[channel * self.n_slots..(channel + 1) * self.n_slots]
    }

    /// Number of free channels in `slot`.
    pub fn free_count(&self, slot: usize) -> usize {
        (0..self.n_channels()).filter(|&i| self.free(i, slot)).count()
    }
}

/// Draws θ from `prior`.
pub fn sample_theta<R: Rng + ?Sized>(prior: &PriorSpec, rng: &mut R) -> Result<ThetaVector> {
    prior.validate()?;
    match prior {
        PriorSpec::Beta { a, b } => {
            let mut values = Vec::with_capacity(a.len());
            for (&ai, &bi) in a.iter().zip(b) {
                let dist = Beta::new(ai, bi).map_err(|e| Error::InvalidPrior(e.to_string()))?;
                values.push(dist.sample(rng));
            }
            ThetaVector::new(values)
        }
        PriorSpec::Grid { points, weights } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = points.len() - 1;
            for (m, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = m;
                    break;
                }
            }
            ThetaVector::new(points[pick].clone())
        }
    }
}

/// Independent Bernoulli(θ_i) occupancy for `n_slots` slots, generated channel
/// by channel from `rng`.
pub fn generate_block<R: Rng + ?Sized>(theta: &ThetaVector, n_slots: usize, rng: &mut R) -> Result<ChannelRealization> {
    if n_slots == 0 {
        return Err(Error::InvalidConfig("a block needs at least one slot".into()));
    }
    let mut z = Vec::with_capacity(theta.n_channels() * n_slots);
    for &p in theta.values() {
        z.extend((0..n_slots).map(|_| rng.random::<f64>() < p));
    }
    Ok(ChannelRealization { n_slots, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn row_mean(r: &ChannelRealization, i: usize) -> f64 {
        r.row(i).iter().filter(|&&z| z).count() as f64 / r.n_slots() as f64
    }

    #[test]
    fn theta_rejects_out_of_range() {
        assert!(ThetaVector::new(vec![]).is_err());
        assert!(ThetaVector::new(vec![0.5, 1.2]).is_err());
        assert!(ThetaVector::new(vec![f64::NAN]).is_err());
        let t = ThetaVector::new(vec![0.5, 0.9, 0.9]).unwrap();
        assert_eq!(t.best(), (1, 0.9));
    }

    #[test]
    fn point_mass_prior_returns_the_point() {
        let prior = PriorSpec::point_mass(vec![0.9, 0.5]).unwrap();
        let mut rng = stream(3, Stream::Theta);
        assert_eq!(sample_theta(&prior, &mut rng).unwrap().values(), &[0.9, 0.5]);
    }

    #[test]
    fn sample_theta_is_deterministic_per_seed() {
        let prior = PriorSpec::uniform(3);
        let a = sample_theta(&prior, &mut stream(11, Stream::Theta)).unwrap();
        let b = sample_theta(&prior, &mut stream(11, Stream::Theta)).unwrap();
        let c = sample_theta(&prior, &mut stream(12, Stream::Theta)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn beta_prior_sample_mean() {
        let prior = PriorSpec::Beta { a: vec![2.0], b: vec![1.0] };
        let mut rng = stream(5, Stream::Theta);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_theta(&prior, &mut rng).unwrap().get(0)).sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn malformed_priors_are_rejected() {
        let mut rng = stream(5, Stream::Theta);
        let bad_beta = PriorSpec::Beta { a: vec![0.0], b: vec![1.0] };
        assert!(sample_theta(&bad_beta, &mut rng).is_err());
        let bad_grid = PriorSpec::Grid { points: vec![vec![0.2], vec![0.8]], weights: vec![0.5, 0.4] };
        assert!(sample_theta(&bad_grid, &mut rng).is_err());
    }

    #[test]
    fn extreme_channels_are_constant() {
        let theta = ThetaVector::new(vec![1.0, 0.0]).unwrap();
        let r = generate_block(&theta, 1000, &mut stream(1, Stream::Environment)).unwrap();
        assert!(r.row(0).iter().all(|&z| z));
        assert!(r.row(1).iter().all(|&z| !z));
    }

    #[test]
    fn block_statistics() {
        let theta = ThetaVector::new(vec![0.7, 0.3]).unwrap();
        let t = 100_000;
        let r = generate_block(&theta, t, &mut stream(9, Stream::Environment)).unwrap();
        for i in 0..2 {
            let p = theta.get(i);
            let m = row_mean(&r, i);
            assert!((m - p).abs() < 0.005);
            assert!((m - p).abs() < 4.0 * (p * (1.0 - p) / t as f64).sqrt());
        }
        // sample correlation between the two rows
        let (m0, m1) = (row_mean(&r, 0), row_mean(&r, 1));
        let f = |z: bool| if z { 1.0 } else { 0.0 };
        let mut cov = 0.0;
        for j in 0..t {
            cov += (f(r.free(0, j)) - m0) * (f(r.free(1, j)) - m1);
        }
        let corr = cov / t as f64 / (m0 * (1.0 - m0) * m1 * (1.0 - m1)).sqrt();
        assert!(corr.abs() < 0.02, "corr {corr}");
    }

    #[test]
    fn block_is_reproducible() {
        let theta = ThetaVector::new(vec![0.4, 0.6, 0.5]).unwrap();
        let a = generate_block(&theta, 500, &mut stream(21, Stream::Environment)).unwrap();
        let b = generate_block(&theta, 500, &mut stream(21, Stream::Environment)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_config_validation() {
        assert!(BlockConfig::default().validate().is_ok());
        let bad = BlockConfig { n_slots: 0, ..BlockConfig::default() };
        assert!(bad.validate().is_err());
        let bad = BlockConfig { bits_per_slot: -1.0, ..BlockConfig::default() };
        assert!(bad.validate().is_err());
    }
}
