//! Best fidelities reachable by measure-and-prepare strategies.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::poisson::{heralded_weights, poisson_weights};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    SingleSwap,
    DoubleSwap,
    PoissonPa,
    PoissonTotal,
}

impl ThresholdKind {
    pub const ALL: [ThresholdKind; 4] = [
        ThresholdKind::SingleSwap,
        ThresholdKind::DoubleSwap,
        ThresholdKind::PoissonPa,
        ThresholdKind::PoissonTotal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ThresholdKind::SingleSwap => "single_swap",
            ThresholdKind::DoubleSwap => "double_swap",
            ThresholdKind::PoissonPa => "poisson_pa",
            ThresholdKind::PoissonTotal => "poisson_total",
        }
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ThresholdKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown threshold kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub kind: ThresholdKind,
    pub value: f64,
    /// Exact value where the threshold is rational.
    pub exact: Option<Ratio<i64>>,
    pub assumptions: String,
}

/// Measure-and-prepare fidelity for `n` copies of an unknown qubit.
fn copies_fidelity(n: i64) -> Ratio<i64> {
    Ratio::new(n + 1, n + 2)
}

fn chain_of_two(f: Ratio<i64>) -> Ratio<i64> {
    f * f + (Ratio::from_integer(1) - f) * (Ratio::from_integer(1) - f)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Best average fidelity when `k` copies of one of the six cardinal states
/// are measured along the cardinal axes (any split of copies among axes) and
/// the best state for the outcome is prepared.
pub fn cardinal_copies_fidelity(k: usize) -> f64 {
    if k == 0 {
        return 0.5;
    }
    let states: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let mut best: f64 = 0.0;
    for nx in 0..=k {
        for ny in 0..=k - nx {
            let n = [nx, ny, k - nx - ny];
            let mut f = 0.0;
            for ox in 0..=n[0] {
                for oy in 0..=n[1] {
                    for oz in 0..=n[2] {
                        let o = [ox, oy, oz];
                        let mut m = [0.0; 3];
                        let mut p_out = 0.0;
                        for s in &states {
                            let mut l = 1.0;
                            for ax in 0..3 {
                                let p = 0.5 * (1.0 + s[ax]);
                                l *= binomial(n[ax], o[ax]) * p.powi(o[ax] as i32) * (1.0 - p).powi((n[ax] - o[ax]) as i32);
                            }
                            for ax in 0..3 {
                                m[ax] += l * s[ax] / 6.0;
                            }
                            p_out += l / 6.0;
                        }
                        f += 0.5 * p_out + 0.5 * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                    }
                }
            }
            best = best.max(f);
        }
    }
    best
}

const POISSON_TAIL: f64 = 1e-9;

/// The threshold for one kind. Poisson kinds condition on at least one
/// photon having been present, since the measured fidelities are heralded.
pub fn classical_threshold(kind: ThresholdKind, mean_photons: Option<f64>) -> Result<ThresholdResult> {
    let single = copies_fidelity(1);
    match kind {
        ThresholdKind::SingleSwap => Ok(ThresholdResult {
            kind,
            value: *single.numer() as f64 / *single.denom() as f64,
            exact: Some(single),
            assumptions: "one copy, optimal measure-and-prepare".into(),
        }),
        ThresholdKind::DoubleSwap => {
            let r = chain_of_two(single);
            Ok(ThresholdResult {
                kind,
                value: *r.numer() as f64 / *r.denom() as f64,
                exact: Some(r),
                assumptions: "two independent classical swaps: both right or both wrong".into(),
            })
        }
        ThresholdKind::PoissonPa | ThresholdKind::PoissonTotal => {
            let mean = mean_photons.ok_or(Error::MissingMeanPhotons(kind.name()))?;
            if !(mean > 0.0) || !mean.is_finite() {
                return Err(Error::InvalidParams("mean photon number must be positive".into()));
            }
            let w = heralded_weights(mean, 1.0, POISSON_TAIL);
            debug_assert_eq!(w.len(), poisson_weights(mean, POISSON_TAIL).len());
            let pa: f64 = w.iter().enumerate().skip(1).map(|(k, p)| p * cardinal_copies_fidelity(k)).sum();
            let value = match kind {
                ThresholdKind::PoissonPa => pa,
                _ => pa * 2.0 / 3.0 + (1.0 - pa) / 3.0,
            };
            Ok(ThresholdResult {
                kind,
                value,
                exact: None,
                assumptions: format!("Poisson mean {mean}, at least one photon, cardinal-axis measurements"),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rationals() {
        let s = classical_threshold(ThresholdKind::SingleSwap, None).unwrap();
        assert_eq!(s.exact, Some(Ratio::new(2, 3)));
        let d = classical_threshold(ThresholdKind::DoubleSwap, None).unwrap();
        assert_eq!(d.exact, Some(Ratio::new(5, 9)));
    }

    #[test]
    fn copies_match_known_values() {
        // one copy: 2/3; two copies on different axes: (3 + √2)/6
        assert!((cardinal_copies_fidelity(1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((cardinal_copies_fidelity(2) - (3.0 + 2f64.sqrt()) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_kinds_need_a_mean() {
        assert!(matches!(
            classical_threshold(ThresholdKind::PoissonPa, None),
            Err(Error::MissingMeanPhotons(_))
        ));
    }
}
