//! Brute-force reference computations for the planners.
//!
//! Nothing here shares code with `crate::planning`: histories are kept as
//! explicit outcome sequences, predictive probabilities come from ratios of
//! Beta-function marginal likelihoods, and stopping rules are enumerated one
//! by one.

/// Beta function B(x, y) for positive integers, via factorials.
fn beta_fn(x: u32, y: u32) -> f64 {
    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }
    fact(x - 1) * fact(y - 1) / fact(x + y - 1)
}

/// Probability that the next sense of a Beta(a, b) channel is free, given the
/// outcomes already seen on that channel.
fn predictive_free(a: u32, b: u32, seen: &[bool]) -> f64 {
    let s = seen.iter().filter(|&&z| z).count() as u32;
    let f = seen.len() as u32 - s;
    beta_fn(a + s + 1, b + f) / beta_fn(a + s, b + f)
}

/// Exact optimal expected number of bits over all causal strategies for
/// independent Beta(a_i, b_i) channels, by exhaustive recursion over the
/// full history tree (no state merging).
pub fn brute_force_value(a: &[u32], b: &[u32], horizon: usize, bits_per_slot: f64) -> f64 {
    fn go(a: &[u32], b: &[u32], history: &mut Vec<(usize, bool)>, remaining: usize, bits: f64) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for ch in 0..a.len() {
            let seen: Vec<bool> = history.iter().filter(|(c, _)| *c == ch).map(|&(_, z)| z).collect();
            let p = predictive_free(a[ch], b[ch], &seen);
            history.push((ch, true));
            let v1 = go(a, b, history, remaining - 1, bits);
            history.pop();
            history.push((ch, false));
            let v0 = go(a, b, history, remaining - 1, bits);
            history.pop();
            let q = p * (bits + v1) + (1.0 - p) * v0;
            if q > best {
                best = q;
            }
        }
        best
    }
    go(a, b, &mut Vec::new(), horizon, bits_per_slot)
}

/// Largest ratio E[Σ_{j≤M} Z(j)] / E[M] over every stopping rule with
/// `1 ≤ M ≤ horizon` for a Beta(a, b) channel, by explicit enumeration of all
/// rules. Feasible up to horizon 5 (458 329 rules).
pub fn brute_force_stopping_index(a: u32, b: u32, horizon: usize) -> f64 {
    // Every rule rooted at a node, as (E[ΣZ], E[M]) measured from that node
    // onward, conditional on reaching it. `seen` is the outcome path so far.
    fn rules(a: u32, b: u32, seen: &mut Vec<bool>, remaining: usize, forced: bool) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if !forced {
            out.push((0.0, 0.0));
        }
        if remaining == 0 {
            return out;
        }
        let p = predictive_free(a, b, seen);
        seen.push(true);
        let after_free = rules(a, b, seen, remaining - 1, false);
        seen.pop();
        seen.push(false);
        let after_busy = rules(a, b, seen, remaining - 1, false);
        seen.pop();
        for &(n1, d1) in &after_free {
            for &(n0, d0) in &after_busy {
                out.push((p + p * n1 + (1.0 - p) * n0, 1.0 + p * d1 + (1.0 - p) * d0));
            }
        }
        out
    }
    rules(a, b, &mut Vec::new(), horizon, true)
        .into_iter()
        .map(|(n, d)| n / d)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Gittins index of a Beta(a, b) arm under discount `alpha` by retirement
/// calibration on the full (a, b) triangle with `a + b ≤ truncation`, storing
/// the whole value table. Bisection runs to `1e-12`.
pub fn reference_gittins_index(a: u32, b: u32, alpha: f64, truncation: u32) -> f64 {
    let depth = (truncation - a - b) as usize;
    let mean = |s: usize, n: usize| (a as f64 + s as f64) / ((a + b) as f64 + n as f64);
    let continue_value = |lambda: f64| -> f64 {
        let retire = lambda / (1.0 - alpha);
        // table[n][s]: value after n further observations with s free
        let mut table: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
        table[depth] = (0..=depth).map(|s| retire.max(mean(s, depth) / (1.0 - alpha))).collect();
        for n in (0..depth).rev() {
            table[n] = (0..=n)
                .map(|s| {
                    let m = mean(s, n);
                    let go_on = m + alpha * (m * table[n + 1][s + 1] + (1.0 - m) * table[n + 1][s]);
                    if n == 0 {
                        go_on
                    } else {
                        go_on.max(retire)
                    }
                })
                .collect();
        }
        table[0][0]
    };
    if depth == 0 {
        return mean(0, 0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if continue_value(mid) > mid / (1.0 - alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert!((brute_force_value(&[1, 1], &[1, 1], 1, 1.0) - 0.5).abs() < 1e-15);
        assert!((brute_force_value(&[1, 1], &[1, 1], 2, 1.0) - 13.0 / 12.0).abs() < 1e-15);
        assert!((brute_force_stopping_index(1, 1, 1) - 0.5).abs() < 1e-15);
        assert!((brute_force_stopping_index(1, 1, 2) - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rule_count_for_horizon_five() {
        // S(0) = 1, S(r) = 1 + S(r-1)^2; the forced root gives S(4)^2 rules.
        fn count(h: usize) -> usize {
            fn go(seen: &mut Vec<bool>, remaining: usize, forced: bool) -> usize {
                let stop = usize::from(!forced);
                if remaining == 0 {
                    return stop;
                }
                seen.push(true);
                let x = go(seen, remaining - 1, false);
                seen.pop();
                seen.push(false);
                let y = go(seen, remaining - 1, false);
                seen.pop();
                stop + x * y
            }
            go(&mut Vec::new(), h, true)
        }
        assert_eq!(count(5), 677 * 677);
    }
}
