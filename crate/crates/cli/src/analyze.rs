//! Click streams to report bundle: afterpulse filter, herald, tables and
//! the photon-to-atom inference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use sprint_core::analysis::{
    build_tables, classical_threshold, filter_afterpulse, infer_pa, segment, ApTarget, FalseRate, FidelityEstimate,
    InferenceInput, InferenceReport, Measured, PapTarget, TableReport, TableSettings, Tally, ThresholdKind,
};
use sprint_core::model::Cardinal;
use sprint_core::sim::{read_events, read_truth, Role, Scenario, Side, StreamHeader};

use crate::config::{self, AnalysisConfig, Resolved};
use crate::error::{validation, CliError, CliResult};
use crate::simulate::{read_manifest, Manifest, CONFIG, EVENTS, TRUTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Heralded,
    Unheralded,
    Both,
}

impl Mode {
    fn flags(self) -> Vec<bool> {
        match self {
            Mode::Heralded => vec![true],
            Mode::Unheralded => vec![false],
            Mode::Both => vec![true, false],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub mode: Mode,
    pub correct_false: bool,
    pub compensate_defect: bool,
    pub use_ground_truth: bool,
    /// Expected scenario; must match the manifest when given.
    pub scenario: Option<Scenario>,
}

fn mode_name(heralded: bool) -> &'static str {
    if heralded {
        "heralded"
    } else {
        "unheralded"
    }
}

struct Run {
    manifest: Manifest,
    header: StreamHeader,
    resolved: Resolved,
    tally: Tally,
    tables: BTreeMap<bool, Result<TableReport, String>>,
    truth: Option<[[u64; 2]; 6]>,
}

fn analysis_of(r: &Resolved) -> &AnalysisConfig {
    &r.config.analysis
}

fn load(dir: &Path, opts: &Options, override_analysis: Option<&AnalysisConfig>) -> CliResult<Run> {
    let manifest = read_manifest(dir)?;
    if let Some(s) = opts.scenario {
        if s != manifest.scenario {
            return Err(validation(format!(
                "{}: manifest scenario {} does not match the requested {}",
                dir.display(),
                manifest.scenario,
                s
            )));
        }
    }
    let mut resolved = config::load(&dir.join(CONFIG))?.resolve()?;
    if resolved.digest != manifest.config_digest {
        return Err(validation(format!("{}: {CONFIG} does not match the manifest digest", dir.display())));
    }
    if let Some(a) = override_analysis {
        resolved.config.analysis = a.clone();
    }
    let events = dir.join(EVENTS);
    let file = File::open(&events).map_err(|e| validation(format!("{}: {e}", events.display())))?;
    let stream = read_events(BufReader::new(file))?;
    if stream.header.config_digest.as_deref() != Some(manifest.config_digest.as_str()) {
        return Err(validation(format!("{}: stream header digest does not match the manifest", events.display())));
    }
    if stream.header.scenario != manifest.scenario || stream.header.n_trials != manifest.n_trials {
        return Err(validation(format!("{}: stream header does not match the manifest", events.display())));
    }
    let a = analysis_of(&resolved);
    let n = stream.header.n_trials;
    let mut tally = Tally::default();
    tally.add(&stream.records, &stream.header, 0..n, a.dead_ns, a.min_reflections)?;

    let truth = if opts.use_ground_truth {
        let path = dir.join(TRUTH);
        let file = File::open(&path).map_err(|e| {
            validation(format!("--use-ground-truth needs the sidecar {}: {e}", path.display()))
        })?;
        let outcomes = read_truth(BufReader::new(file))?;
        let filtered = filter_afterpulse(&stream.records, a.dead_ns);
        let accepted: BTreeSet<u64> = segment(&filtered, &stream.header, 0..n)?
            .trials
            .into_iter()
            .filter(|t| t.accepted(&stream.header.sequence, a.min_reflections))
            .map(|t| t.trial)
            .collect();
        let readout = stream
            .header
            .sequence
            .pulses
            .iter()
            .position(|p| p.role == Role::SwapOut)
            .ok_or_else(|| validation("sequence has no swap-out pulse"))?;
        let mut per_state = [[0u64; 2]; 6];
        for o in outcomes.iter().filter(|o| accepted.contains(&o.trial)) {
            let i = Cardinal::ALL.iter().position(|c| *c == o.prepared).expect("cardinal");
            let exits = o.pulses[readout].exits;
            let good = if o.prepared.is_up() { Side::Right } else { Side::Left };
            per_state[i][0] += exits[good.index()] as u64;
            per_state[i][1] += (exits[0] + exits[1]) as u64;
        }
        Some(per_state)
    } else {
        None
    };

    let mut tables = BTreeMap::new();
    for heralded in opts.mode.flags() {
        let compensate_defect = if opts.compensate_defect {
            Some(stream.header.chain.defect_loss.ok_or_else(|| {
                validation(format!("{}: --compensate-defect needs chain.defect_loss in the run", dir.display()))
            })?)
        } else {
            None
        };
        let settings = TableSettings {
            heralded,
            false_rate: opts.correct_false.then(|| FalseRate::from_dark(&tally.dark)),
            false_prep: resolved.false_prep(),
            compensate_defect,
            bootstrap: a.bootstrap,
            seed: a.bootstrap_seed,
        };
        let t = build_tables(tally.cells(heralded), &stream.header.sequence, &stream.header.schedule, &settings);
        tables.insert(heralded, t.map_err(|e| e.to_string()));
    }
    Ok(Run {
        manifest,
        header: stream.header,
        resolved,
        tally,
        tables,
        truth,
    })
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn est_cells(e: Option<&FidelityEstimate>) -> [String; 4] {
    match e {
        Some(e) => [f6(e.value), f6(e.std_err), f6(e.interval[0]), f6(e.interval[1])],
        None => Default::default(),
    }
}

struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
}

impl Bundle {
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_owned());
        Ok(())
    }
}

const STATE_HEADER: &[&str] = &[
    "mode", "state", "fidelity", "std_err", "ci_low", "ci_high", "n_trials", "config_digest", "seed",
];

fn state_rows(run: &Run) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (heralded, t) in &run.tables {
        let Ok(t) = t else { continue };
        for (c, e) in &t.states {
            let Some(e) = e else { continue };
            let [v, s, lo, hi] = est_cells(Some(e));
            rows.push(vec![
                mode_name(*heralded).into(),
                c.name().into(),
                v,
                s,
                lo,
                hi,
                e.n_trials.to_string(),
                run.manifest.config_digest.clone(),
                run.manifest.seed.to_string(),
            ]);
        }
    }
    rows
}

/// Read-out click split per prepared state, with the corrected fidelity.
fn split_rows(run: &Run) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (heralded, t) in &run.tables {
        let Ok(t) = t else { continue };
        for (i, (c, e)) in t.states.iter().enumerate() {
            let Some(e) = e else { continue };
            let [down, up] = run.tally.cells(*heralded)[i].totals();
            let total = (down + up).max(1) as f64;
            rows.push(vec![
                mode_name(*heralded).into(),
                c.name().into(),
                format!("{:?}", c.axis()).to_lowercase(),
                down.to_string(),
                up.to_string(),
                f6(down as f64 / total),
                f6(up as f64 / total),
                f6(e.value),
                f6(e.std_err),
                run.manifest.config_digest.clone(),
                run.manifest.seed.to_string(),
            ]);
        }
    }
    rows
}

fn infer(ap: &Run, pap: &Run, heralded: bool) -> Option<Result<InferenceReport, String>> {
    let ap_est = ap
        .tables
        .get(&true)
        .and_then(|t| t.as_ref().ok())
        .or_else(|| ap.tables.get(&false).and_then(|t| t.as_ref().ok()))?
        .average;
    let pap_est = pap.tables.get(&heralded)?.as_ref().ok()?.average;
    let input = InferenceInput {
        ap: vec![Measured {
            target: ApTarget::Average,
            value: ap_est.value,
            sd: ap_est.std_err,
        }],
        pap: vec![Measured {
            target: PapTarget::Average,
            value: pap_est.value,
            sd: pap_est.std_err,
        }],
        heralded,
    };
    Some(infer_pa(&input, &pap.resolved.config.analysis.inference).map_err(|e| e.to_string()))
}

/// Runs the full pipeline over the stream directories and writes the report
/// files into `out`. Returns the names of the files written.
pub fn run(dirs: &[PathBuf], out: &Path, opts: &Options, analysis: Option<&AnalysisConfig>) -> CliResult<Vec<String>> {
    if dirs.is_empty() {
        return Err(validation("no stream directories given"));
    }
    let mut runs: BTreeMap<&'static str, Run> = BTreeMap::new();
    for d in dirs {
        let run = load(d, opts, analysis)?;
        let name = run.manifest.scenario.name();
        if runs.insert(name, run).is_some() {
            return Err(validation(format!("two streams for scenario {name}")));
        }
    }
    std::fs::create_dir_all(out)?;
    let mut b = Bundle {
        dir: out.to_path_buf(),
        files: Vec::new(),
    };

    let figures = [
        (Scenario::AtomToPhotonSameAxis, "fig2a.csv"),
        (Scenario::AtomToPhotonFixed, "fig2b.csv"),
        (Scenario::DoubleSwap, "fig3a.csv"),
    ];
    for (scenario, file) in figures {
        let Some(run) = runs.get(scenario.name()) else { continue };
        if scenario == Scenario::AtomToPhotonSameAxis {
            b.csv(
                file,
                &[
                    "mode", "state", "axis", "clicks_down", "clicks_up", "p_down", "p_up", "fidelity", "std_err",
                    "config_digest", "seed",
                ],
                split_rows(run),
            )?;
        } else {
            b.csv(file, STATE_HEADER, state_rows(run))?;
        }
    }

    let mut report = String::new();
    let mut extended = Vec::new();
    let mut any_table = false;
    for (name, run) in &runs {
        let _ = writeln!(report, "{name}.config_digest = {}", run.manifest.config_digest);
        let _ = writeln!(report, "{name}.seed = {}", run.manifest.seed);
        let _ = writeln!(report, "{name}.n_trials = {}", run.tally.n_trials);
        let _ = writeln!(report, "{name}.n_records = {}", run.manifest.n_records);
        let _ = writeln!(report, "{name}.herald_pass_fraction = {}", f6(run.tally.pass_fraction()));
        let dark = &run.tally.dark;
        let rate = FalseRate::from_dark(dark);
        let _ = writeln!(report, "{name}.false_rate_per_ns = {:e} {:e}", rate.per_ns[0], rate.per_ns[1]);
        for (heralded, t) in &run.tables {
            let m = mode_name(*heralded);
            match t {
                Ok(t) => {
                    any_table = true;
                    let _ = writeln!(report, "{name}.{m}.average = {} ± {}", f6(t.average.value), f6(t.average.std_err));
                    let [pv, ps, ..] = est_cells(t.poles.as_ref());
                    let [ev, es, ..] = est_cells(t.equator.as_ref());
                    extended.push(vec![
                        name.to_string(),
                        m.into(),
                        pv,
                        ps,
                        ev,
                        es,
                        f6(t.average.value),
                        f6(t.average.std_err),
                        run.manifest.config_digest.clone(),
                        run.manifest.seed.to_string(),
                    ]);
                }
                Err(e) => {
                    let _ = writeln!(report, "{name}.{m}.error = {e}");
                }
            }
        }
        if let Some(truth) = &run.truth {
            let rows = Cardinal::ALL
                .iter()
                .zip(truth)
                .filter(|(c, _)| run.header.schedule.contains(c))
                .map(|(c, [good, total])| {
                    vec![
                        c.name().to_string(),
                        good.to_string(),
                        total.to_string(),
                        if *total > 0 { f6(*good as f64 / *total as f64) } else { String::new() },
                        run.manifest.config_digest.clone(),
                        run.manifest.seed.to_string(),
                    ]
                })
                .collect();
            b.csv(
                &format!("truth_{name}.csv"),
                &["state", "exits_correct", "exits_total", "fidelity", "config_digest", "seed"],
                rows,
            )?;
        }
    }
    if !any_table {
        b.text("report.txt", &report)?;
        return Err(CliError::Runtime("no fidelity table could be built; see report.txt".into()));
    }

    let mut inference_text = String::new();
    if let (Some(ap), Some(pap)) = (runs.get(Scenario::AtomToPhotonFixed.name()), runs.get(Scenario::DoubleSwap.name())) {
        let mut fig3b = Vec::new();
        for heralded in opts.mode.flags() {
            let m = mode_name(heralded);
            match infer(ap, pap, heralded) {
                None => {
                    let _ = writeln!(inference_text, "{m}.skipped = missing atom-to-photon or double-swap table");
                }
                Some(Err(e)) => {
                    let _ = writeln!(inference_text, "{m}.error = {e}");
                }
                Some(Ok(r)) => {
                    let digest = format!("{}+{}", ap.manifest.config_digest, pap.manifest.config_digest);
                    let seed = format!("{}+{}", ap.manifest.seed, pap.manifest.seed);
                    let _ = writeln!(inference_text, "{m}.f_pa = {} ± {}", f6(r.f_pa.value), f6(r.f_pa.sd));
                    let _ = writeln!(inference_text, "{m}.f_ap = {} ± {}", f6(r.f_ap.value), f6(r.f_ap.sd));
                    let _ = writeln!(
                        inference_text,
                        "{m}.pa_table = {} {}",
                        f6(r.pa_table.entries[0]),
                        f6(r.pa_table.entries[1])
                    );
                    let _ = writeln!(
                        inference_text,
                        "{m}.ap_table = {} {}",
                        f6(r.ap_table.entries[0]),
                        f6(r.ap_table.entries[1])
                    );
                    let _ = writeln!(inference_text, "{m}.iterations = {}", r.iterations);
                    let _ = writeln!(inference_text, "{m}.converged = {}", r.converged);
                    let _ = writeln!(inference_text, "{m}.settings_digest = {}", r.settings_digest);
                    for c in Cardinal::ALL {
                        let v = match c {
                            Cardinal::DownZ => r.pa_table.entries[0],
                            Cardinal::UpZ => r.pa_table.entries[1],
                            _ => r.pa_table.average(),
                        };
                        fig3b.push(vec![m.into(), c.name().into(), f6(v), f6(r.f_pa.sd), digest.clone(), seed.clone()]);
                    }
                    extended.push(vec![
                        "photon_to_atom_inferred".into(),
                        m.into(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        f6(r.f_pa.value),
                        f6(r.f_pa.sd),
                        digest,
                        seed,
                    ]);
                }
            }
        }
        b.csv("fig3b.csv", &["mode", "state", "fidelity", "sd", "config_digest", "seed"], fig3b)?;
    } else {
        inference_text.push_str("skipped = needs both an atom_to_photon_fixed and a double_swap stream\n");
    }
    b.text("inference.txt", &inference_text)?;

    b.csv(
        "extended_table.csv",
        &[
            "process", "mode", "poles", "poles_err", "equator", "equator_err", "average", "average_err", "config_digest",
            "seed",
        ],
        extended,
    )?;

    let mut thresholds = Vec::new();
    let mean = runs
        .values()
        .next()
        .map(|r| r.header.sequence.swap_in().mean_photons)
        .unwrap_or(0.8);
    for kind in [ThresholdKind::SingleSwap, ThresholdKind::DoubleSwap, ThresholdKind::PoissonPa, ThresholdKind::PoissonTotal] {
        let t = classical_threshold(kind, Some(mean))?;
        thresholds.push(vec![
            kind.name().to_string(),
            f6(mean),
            f6(t.value),
            t.exact.map(|r| r.to_string()).unwrap_or_default(),
        ]);
    }
    b.csv("thresholds.csv", &["kind", "mean_photons", "value", "exact"], thresholds)?;

    b.text("report.txt", &report)?;
    Ok(b.files)
}
