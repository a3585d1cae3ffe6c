//! Mixing single-photon behaviour over coherent-state photon numbers.

use super::tables::ProbabilityTable;

/// Poisson probabilities `P(0..=K)` with `K` the first count whose upper tail
/// drops below `tail`.
pub fn poisson_weights(mean: f64, tail: f64) -> Vec<f64> {
    let mut w = vec![(-mean).exp()];
    let mut cum = w[0];
    let mut k = 0usize;
    while 1.0 - cum >= tail && k < 10_000 {
        k += 1;
        let next = w[k - 1] * mean / k as f64;
        w.push(next);
        cum += next;
    }
    w
}

/// Weights of `k` photons given that some photon heralded, each with
/// probability `efficiency`. The tail is relative to the non-vacuum mass, so
/// weak pulses keep their one-photon term.
pub fn heralded_weights(mean: f64, efficiency: f64, tail: f64) -> Vec<f64> {
    let nonvacuum = -(-mean).exp_m1();
    let mut w: Vec<f64> = poisson_weights(mean, (tail * nonvacuum.min(1.0)).max(f64::MIN_POSITIVE))
        .iter()
        .enumerate()
        .map(|(k, p)| p * (1.0 - (1.0 - efficiency).powi(k as i32)))
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Probability the atom ends in the photons' target state after `k` of them,
/// starting from probability `x`, for every `k` covered by `weights`; the
/// weighted sum is returned. Zero photons leave the atom alone.
pub fn apply_photons(x: f64, table: &ProbabilityTable, weights: &[f64]) -> f64 {
    let [toggle, keep] = table.entries;
    let mut acc = 0.0;
    let mut total = 0.0;
    let mut cur = x;
    for &w in weights {
        acc += w * cur;
        total += w;
        cur = cur * keep + (1.0 - cur) * toggle;
    }
    acc / total
}

pub const TAIL: f64 = 1e-6;

/// Effective atomic table of a coherent pulse. `table` holds `(P_tt,
/// P_ntnt)` for one photon; vacuum leaves the outcome to a fair coin. With
/// `herald_efficiency`, only pulses that produced a herald are kept.
pub fn compose_poisson(table: &ProbabilityTable, mean_photons: f64, herald_efficiency: Option<f64>) -> ProbabilityTable {
    let weights = match herald_efficiency {
        Some(e) => heralded_weights(mean_photons, e, TAIL),
        None => poisson_weights(mean_photons, TAIL),
    };
    let entry = |x0: f64| {
        let mut acc = weights[0] * 0.5;
        let mut cur = x0;
        for &w in &weights[1..] {
            cur = cur * table.entries[1] + (1.0 - cur) * table.entries[0];
            acc += w * cur;
        }
        acc / weights.iter().sum::<f64>()
    };
    ProbabilityTable::new(entry(0.0), entry(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_table_unheralded() {
        let t = compose_poisson(&ProbabilityTable::identity(), 0.8, None);
        let p0 = (-0.8f64).exp();
        assert!((t.average() - ((1.0 - p0) + 0.5 * p0)).abs() < 1e-6);
        assert!((t.average() - 0.775).abs() < 1e-3);
    }

    #[test]
    fn vacuum_is_a_coin() {
        let t = compose_poisson(&ProbabilityTable::new(0.9, 0.8), 1e-9, None);
        assert!((t.average() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn heralding_removes_vacuum() {
        let t = compose_poisson(&ProbabilityTable::identity(), 0.8, Some(0.3));
        assert!((t.average() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_cover_tail() {
        let w = poisson_weights(1.2, 1e-9);
        assert!(1.0 - w.iter().sum::<f64>() < 1e-9);
        assert!(poisson_weights(0.0, 1e-6) == vec![1.0]);
    }
}
