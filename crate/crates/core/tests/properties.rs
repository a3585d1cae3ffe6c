mod common;

use proptest::prelude::*;

use sprint_core::analysis::{
    compose_poisson, infer_pa, ApTarget, ForwardModel, InferenceInput, InferenceSettings, Measured, PapTarget, ProbabilityTable,
};
use sprint_core::model::{
    scatter_analytic, sprint_channel, AtomicQubit, Cardinal, ChannelOptions, Mode, PhotonSource, PhotonicQubit, Pole,
    PulseShape, SystemParams,
};
use sprint_core::sim::Scenario;

proptest! {
    #![proptest_config(common::config(256))]

    #[test]
    fn afterpulse_filter_is_idempotent(recs in common::records(), dead in 0i64..500) {
        common::afterpulse_idempotent(&recs, dead)?;
    }

    #[test]
    fn lowering_min_reflections_keeps_a_superset(trials in common::trials(), a in 0u32..8, b in 0u32..8) {
        common::herald_superset(&trials, a, b)?;
    }

    #[test]
    fn scatter_probabilities_sum_to_one(p in common::params(), down in any::<bool>(), a in any::<bool>()) {
        let pole = if down { Pole::Down } else { Pole::Up };
        let mode = if a { Mode::A } else { Mode::B };
        let o = scatter_analytic(&p, pole, mode).unwrap();
        let sum = o.p_trans + o.p_toggle + o.p_reflect_keep + o.p_trans_flip + o.p_loss;
        prop_assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
        prop_assert!([o.p_trans, o.p_toggle, o.p_reflect_keep, o.p_trans_flip, o.p_loss].iter().all(|x| *x >= -1e-12));
    }

    #[test]
    fn scatter_is_symmetric_under_mode_exchange(p in common::params(), down in any::<bool>(), a in any::<bool>()) {
        let pole = if down { Pole::Down } else { Pole::Up };
        let mode = if a { Mode::A } else { Mode::B };
        let x = scatter_analytic(&p, pole, mode).unwrap();
        let y = scatter_analytic(&p, pole.flipped(), mode.other()).unwrap();
        for (u, v) in [
            (x.p_trans, y.p_trans),
            (x.p_toggle, y.p_toggle),
            (x.p_reflect_keep, y.p_reflect_keep),
            (x.p_trans_flip, y.p_trans_flip),
            (x.p_loss, y.p_loss),
        ] {
            prop_assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }

    #[test]
    fn vacuum_limit_of_poisson_composition(a in 0.0..1.0f64, b in 0.0..1.0f64, eff in 0.05..1.0f64) {
        let t = ProbabilityTable::new(a, b);
        let f = compose_poisson(&t, 1e-6, None).average();
        prop_assert!((f - 0.5).abs() < 1e-6, "{f}");
        // a herald needs a photon, so the heralded limit is the one-photon table
        let h = compose_poisson(&t, 1e-6, Some(eff));
        prop_assert!((h.entries[0] - a).abs() < 1e-5 && (h.entries[1] - b).abs() < 1e-5, "{:?}", h);
    }
}

#[test]
fn poisson_sample_means_within_three_sigma() {
    for (i, mean) in common::ROLE_MEANS.into_iter().enumerate() {
        common::poisson_mean(mean, 1000 + i as u64).unwrap();
    }
}

proptest! {
    #![proptest_config(common::config(8))]

    #[test]
    fn master_equation_keeps_density_matrices(p in common::params(), duration in 10.0..60.0f64, down in any::<bool>()) {
        common::trace_positivity(&p, duration, down)?;
    }

    #[test]
    fn channel_probabilities_sum_to_one(p in common::params(), atom in 0usize..6, photon in 0usize..6) {
        let out = sprint_channel(
            &p,
            &AtomicQubit::cardinal(Cardinal::ALL[atom]),
            &PhotonicQubit::cardinal(Cardinal::ALL[photon]),
            &PulseShape::with_default_edge(50.0).unwrap(),
            PhotonSource::Single,
            &ChannelOptions::default(),
        )
        .unwrap();
        let sum = out.p_rail[0] + out.p_rail[1] + out.p_loss;
        prop_assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
    }
}

#[test]
fn channel_is_symmetric_under_mode_exchange() {
    let shape = PulseShape::with_default_edge(50.0).unwrap();
    let run = |atom: Cardinal, photon: Cardinal| {
        sprint_channel(
            &SystemParams::nominal(),
            &AtomicQubit::cardinal(atom),
            &PhotonicQubit::cardinal(photon),
            &shape,
            PhotonSource::Single,
            &ChannelOptions::default(),
        )
        .unwrap()
    };
    let x = run(Cardinal::DownZ, Cardinal::UpZ);
    let y = run(Cardinal::UpZ, Cardinal::DownZ);
    assert!((x.p_rail[0] - y.p_rail[1]).abs() < 1e-9, "{:?} {:?}", x.p_rail, y.p_rail);
    assert!((x.p_rail[1] - y.p_rail[0]).abs() < 1e-9);
    assert!((x.p_loss - y.p_loss).abs() < 1e-9);
}

#[test]
fn seed_determinism_is_bytewise() {
    let plan = common::small_plan(Scenario::DoubleSwap, 3000, 21);
    common::seed_determinism(&plan).unwrap();
    let other = common::small_plan(Scenario::DoubleSwap, 3000, 22);
    assert_ne!(common::stream_bytes(&plan, &[0..3000]), common::stream_bytes(&other, &[0..3000]));
}

#[test]
fn herald_rate_never_drops_with_efficiency() {
    let plan = common::small_plan(Scenario::AtomToPhotonFixed, 40_000, 5);
    common::herald_monotone(&plan).unwrap();
}

#[test]
fn inference_reproduces_its_inputs() {
    let settings = InferenceSettings::default();
    for (heralded, value, sd) in [(true, 0.642, 0.034), (false, 0.600, 0.013)] {
        let input = InferenceInput {
            ap: vec![Measured {
                target: ApTarget::Average,
                value: 0.747,
                sd: 0.017,
            }],
            pap: vec![Measured {
                target: PapTarget::Average,
                value,
                sd,
            }],
            heralded,
        };
        let r = infer_pa(&input, &settings).unwrap();
        let model = ForwardModel::new(&settings, heralded);
        let predicted = ForwardModel::average(&model.states(&r.pa_table, &r.ap_table));
        assert!((predicted - value).abs() <= sd, "heralded={heralded}: predicted {predicted}, measured {value} ± {sd}");
    }
}
