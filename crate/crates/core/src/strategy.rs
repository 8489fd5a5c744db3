//! The online-strategy interface shared by every sensing rule.

/// An online channel-selection rule for one cognitive user.
///
/// Channels are zero-based. Slots are one-based so that rules using `ln j`
/// see the same slot number as the formulas they implement. The harness calls
/// [`Strategy::select`] once per slot and then [`Strategy::observe`] exactly
/// once with the outcome of sensing the selected channel.
pub trait Strategy: Send {
    fn select(&mut self, slot: u64) -> usize;

    fn observe(&mut self, channel: usize, free: bool);
}

impl<S: Strategy + ?Sized> Strategy for Box<S> {
    fn select(&mut self, slot: u64) -> usize {
        (**self).select(slot)
    }

    fn observe(&mut self, channel: usize, free: bool) {
        (**self).observe(channel, free)
    }
}

/// Index of the largest score, lowest index on ties.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(scores: I) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Samples an index from nonnegative `weights` (not necessarily normalized).
pub(crate) fn sample_weighted<R: rand::Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
