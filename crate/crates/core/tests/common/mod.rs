//! Property checks shared by the proptest suite and the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sprint_core::analysis::{filter_afterpulse, segment, Trial};
use sprint_core::model::{build_system_with_source, Cardinal, Input, PulseShape, SystemParams};
use sprint_core::qdyn::{evolve_master, DensityMatrix, MasterOptions};
use sprint_core::sim::{
    sample_pulse_photons, write_events, CampaignOptions, CampaignPlan, ClickRecord, DetectionChain, EventStream, Pulse, Role,
    Scenario, SequenceSpec, Side,
};

/// Fixed seed so that statistical properties are reproducible run to run.
pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn records() -> impl Strategy<Value = Vec<ClickRecord>> {
    prop::collection::vec((0i64..20_000, 0u32..10), 0..200).prop_map(|mut v| {
        v.sort();
        v.into_iter()
            .map(|(t_ns, detector_id)| ClickRecord {
                t_ns,
                detector_id,
                side: Side::from_index(detector_id as usize / 5),
            })
            .collect()
    })
}

pub fn afterpulse_idempotent(recs: &[ClickRecord], dead_ns: i64) -> Result<(), TestCaseError> {
    let once = filter_afterpulse(recs, dead_ns);
    let twice = filter_afterpulse(&once, dead_ns);
    prop_assert_eq!(once, twice);
    Ok(())
}

pub fn trials() -> impl Strategy<Value = Vec<Trial>> {
    let n = SequenceSpec::canonical().pulses.len();
    prop::collection::vec(prop::collection::vec([0u32..3, 0u32..3], n), 1..60).prop_map(|all| {
        all.into_iter()
            .enumerate()
            .map(|(i, counts)| Trial {
                trial: i as u64,
                prepared: Cardinal::ALL[i % 6],
                counts,
            })
            .collect()
    })
}

pub fn herald_superset(trials: &[Trial], lower: u32, higher: u32) -> Result<(), TestCaseError> {
    let seq = SequenceSpec::canonical();
    let (lo, hi) = (lower.min(higher), lower.max(higher));
    for t in trials {
        if t.accepted(&seq, hi) {
            prop_assert!(t.accepted(&seq, lo), "trial {} accepted at {hi} but not at {lo}", t.trial);
        }
    }
    Ok(())
}

/// Mean photon numbers of the pulse roles, plus the spec's zero case.
pub const ROLE_MEANS: [f64; 5] = [0.0, 0.05, 0.8, 1.2, 1.44];
pub const POISSON_SAMPLES: usize = 1_000_000;

pub fn poisson_mean(mean: f64, seed: u64) -> Result<(), TestCaseError> {
    let mut pulse = Pulse::new(Role::Detection, sprint_core::sim::Port::UpZ, 0.0);
    pulse.mean_photons = mean;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sum: u64 = (0..POISSON_SAMPLES).map(|_| sample_pulse_photons(&pulse, &mut rng) as u64).sum();
    let avg = sum as f64 / POISSON_SAMPLES as f64;
    let sigma = (mean / POISSON_SAMPLES as f64).sqrt();
    if mean == 0.0 {
        prop_assert_eq!(sum, 0);
        return Ok(());
    }
    prop_assert!((avg - mean).abs() <= 3.0 * sigma, "sample mean {avg} for Poisson mean {mean} (sigma {sigma})");
    Ok(())
}

pub fn small_plan(scenario: Scenario, n_trials: u64, seed: u64) -> CampaignPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chain = DetectionChain::nominal(&mut rng);
    CampaignPlan::new(
        scenario,
        &Cardinal::ALL,
        n_trials,
        &SystemParams::nominal(),
        &chain,
        &SequenceSpec::canonical(),
        seed,
        &CampaignOptions::default(),
    )
    .expect("campaign plan")
}

pub fn stream_bytes(plan: &CampaignPlan, chunks: &[std::ops::Range<u64>]) -> Vec<u8> {
    let mut records = Vec::new();
    for r in chunks {
        records.extend(plan.run(r.clone()).expect("run").0);
    }
    records.sort();
    let stream = EventStream {
        header: plan.header().clone(),
        records,
    };
    let mut out = Vec::new();
    write_events(&stream, &mut out).expect("write");
    out
}

/// Same seed and scenario give the same bytes, however the trials are
/// chunked.
pub fn seed_determinism(plan: &CampaignPlan) -> Result<(), TestCaseError> {
    let n = plan.header().n_trials;
    let whole = stream_bytes(plan, &[0..n]);
    let again = stream_bytes(plan, &[0..n]);
    let split = stream_bytes(plan, &[0..n / 3, n / 3..n]);
    prop_assert!(whole == again, "rerun differs");
    prop_assert!(whole == split, "chunked run differs");
    Ok(())
}

/// Trials accepted by the herald, on the raw stream and after afterpulse
/// filtering.
pub fn heralded_sets(plan: &CampaignPlan, min_reflections: u32) -> (BTreeSet<u64>, BTreeSet<u64>) {
    let n = plan.header().n_trials;
    let (records, _) = plan.run(0..n).expect("run");
    let seq = &plan.header().sequence;
    let accepted = |recs: &[ClickRecord]| {
        segment(recs, plan.header(), 0..n)
            .expect("segment")
            .trials
            .iter()
            .filter(|t| t.accepted(seq, min_reflections))
            .map(|t| t.trial)
            .collect::<BTreeSet<u64>>()
    };
    (accepted(&records), accepted(&filter_afterpulse(&records, 200)))
}

pub fn scaled_chain(base: &DetectionChain, optical: f64, spcm: f64) -> DetectionChain {
    DetectionChain {
        path_efficiency: base.path_efficiency * optical,
        spcm_efficiencies: base.spcm_efficiencies.iter().map(|e| e * spcm).collect(),
        ..base.clone()
    }
}

/// Herald rate over a grid of optical and detector efficiencies. Each trial
/// keeps its random stream across the grid, so the raw accepted set can only
/// grow. After afterpulse filtering a new click can hide a later one behind
/// the dead time, so there the rate may only not drop by more than 3σ of the
/// discordant trials.
pub fn herald_monotone(plan: &CampaignPlan) -> Result<(), TestCaseError> {
    let base = plan.header().chain.clone();
    let grid = [0.4, 0.7, 1.0];
    let mut sets = Vec::new();
    for &opt in &grid {
        let row: Vec<_> = grid
            .iter()
            .map(|&spcm| heralded_sets(&plan.with_chain(&scaled_chain(&base, opt, spcm)).expect("chain"), 3))
            .collect();
        sets.push(row);
    }
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                if ni >= grid.len() || nj >= grid.len() {
                    continue;
                }
                let (lo, hi) = (&sets[i][j], &sets[ni][nj]);
                prop_assert!(lo.0.is_subset(&hi.0), "raw herald set shrank from grid point {:?} to {:?}", (i, j), (ni, nj));
                let discordant = lo.1.symmetric_difference(&hi.1).count() as f64;
                prop_assert!(
                    hi.1.len() as f64 + 3.0 * discordant.sqrt() >= lo.1.len() as f64,
                    "herald count fell from {} to {}",
                    lo.1.len(),
                    hi.1.len()
                );
            }
        }
    }
    Ok(())
}

pub fn params() -> impl Strategy<Value = SystemParams> {
    (10.0..40.0f64, 20.0..90.0f64, 0.0..10.0f64, 0.5..6.0f64, -10.0..10.0f64, 0.0..0.2f64).prop_map(
        |(g, kappa_ex, kappa_i, gamma, delta, epsilon)| SystemParams {
            g,
            kappa_ex,
            kappa_i,
            gamma,
            delta,
            epsilon,
            g_scale_range: None,
        },
    )
}

/// Every output state of a single-photon run is a density matrix with unit
/// trace to 1e-7.
pub fn trace_positivity(params: &SystemParams, duration: f64, down: bool) -> Result<(), TestCaseError> {
    let model = build_system_with_source(params, 1).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let shape = PulseShape::with_default_edge(duration).unwrap();
    let input = Input::SinglePhoton {
        a: 1.0.into(),
        b: 0.0.into(),
        shape,
        t0: 0.0,
    };
    let (h, cols) = model.driven(&input).unwrap();
    let start = model.ground_index(if down { 0 } else { 1 }, true);
    let rho0 = DensityMatrix::basis(model.space(), start);
    let t_end = duration + 150.0;
    let grid: Vec<f64> = (0..=24).map(|k| t_end * k as f64 / 24.0).collect();
    let opts = MasterOptions {
        step_tol: 1e-10,
        breakpoints: input.breakpoints(),
        ..Default::default()
    };
    let sol = evolve_master(&rho0, &h, &cols, &grid, &opts).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        rho.check(*t, 1e-7).map_err(|e| TestCaseError::fail(e.to_string()))?;
    }
    Ok(())
}
