//! Quick consistency checks of an installed binary.

use sprint_core::analysis::{classical_threshold, ThresholdKind, ThresholdResult};
use sprint_core::model::{gamma_1d, scatter_analytic, Cardinal, Mode, Pole, SystemParams};
use sprint_core::sim::{CampaignOptions, CampaignPlan, DetectionChain, Scenario, SequenceSpec};

use crate::error::CliResult;

fn exact_is(t: &ThresholdResult, num: i64, den: i64) -> bool {
    t.exact.is_some_and(|r| *r.numer() == num && *r.denom() == den)
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
    ok
}

/// Runs every check and reports whether all passed.
pub fn run() -> CliResult<bool> {
    let mut all = true;
    let p = SystemParams::nominal();

    let g = gamma_1d(&p)?;
    let oracle = 2.0 * p.g * p.g / (p.kappa_ex + p.kappa_i);
    all &= check("purcell rate", ((g - oracle) / oracle).abs() < 1e-12, format!("{g:.4} MHz·2π"));

    let single = classical_threshold(ThresholdKind::SingleSwap, None)?;
    let double = classical_threshold(ThresholdKind::DoubleSwap, None)?;
    all &= check(
        "classical thresholds",
        exact_is(&single, 2, 3) && exact_is(&double, 5, 9),
        format!("single {:.4}, double {:.4}", single.value, double.value),
    );

    let mut worst: f64 = 0.0;
    for pole in [Pole::Down, Pole::Up] {
        for mode in [Mode::A, Mode::B] {
            let o = scatter_analytic(&p, pole, mode)?;
            let sum = o.p_trans + o.p_toggle + o.p_reflect_keep + o.p_trans_flip + o.p_loss;
            worst = worst.max((sum - 1.0).abs());
        }
    }
    all &= check("scattering probabilities", worst < 1e-9, format!("worst |Σp − 1| = {worst:.1e}"));

    let plan = CampaignPlan::new(
        Scenario::AtomToPhotonFixed,
        &Cardinal::ALL,
        600,
        &p,
        &DetectionChain::ideal(),
        &SequenceSpec::canonical(),
        11,
        &CampaignOptions::default(),
    )?;
    let whole = plan.run(0..600)?.0;
    let mut split = plan.run(0..250)?.0;
    split.extend(plan.run(250..600)?.0);
    all &= check(
        "seed determinism",
        whole == split && whole == plan.run(0..600)?.0,
        format!("{} clicks, whole and chunked runs agree", whole.len()),
    );
    Ok(all)
}
