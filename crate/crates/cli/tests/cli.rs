use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const NOMINAL: &str = include_str!("../profiles/nominal.params");

fn sprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sprint"))
        .args(args)
        .env_remove("SPRINT_OUT")
        .output()
        .expect("run sprint")
}

fn ok(args: &[&str]) -> String {
    let out = sprint(args);
    assert!(
        out.status.success(),
        "sprint {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    sprint(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

/// Nominal profile with brighter detection and read-out pulses, so small runs
/// fill every cell.
fn bright() -> String {
    NOMINAL
        .replace("detection_mean = 1.2", "detection_mean = 4.0")
        .replace("swap_out_mean = 0.05", "swap_out_mean = 1.0")
        .replace("bootstrap = 1000", "bootstrap = 200")
}

#[test]
fn simulate_and_analyze_reproduce_every_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.params", &bright());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let run = tmp.path().join(name);
        ok(&[
            "--config", s(&cfg), "--seed", "7", "--out", s(&run), "simulate", "--scenario", "atom_to_photon_fixed", "--trials",
            "10000",
        ]);
        ok(&["--out", s(&run), "analyze", "--mode", "unheralded"]);
        outputs.push((files(&run), files(&run.join("report"))));
    }
    assert_eq!(outputs[0], outputs[1]);
    let (run, report) = &outputs[0];
    for f in ["events.jsonl", "truth.jsonl", "manifest.json", "config.toml"] {
        assert!(run.contains_key(f), "{f} missing");
    }
    for f in ["fig2b.csv", "extended_table.csv", "inference.txt", "thresholds.csv", "report.txt"] {
        assert!(report.contains_key(f), "{f} missing");
    }

    let other = tmp.path().join("c");
    ok(&[
        "--config", s(&cfg), "--seed", "8", "--out", s(&other), "simulate", "--scenario", "atom_to_photon_fixed", "--trials",
        "10000",
    ]);
    assert_ne!(files(&other)["events.jsonl"], run["events.jsonl"]);
}

/// Same profile with sections and keys in reverse order.
fn reordered(text: &str) -> String {
    let mut sections: Vec<(String, Vec<String>)> = vec![(String::new(), Vec::new())];
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            sections.push((line.to_owned(), Vec::new()));
        } else {
            sections.last_mut().unwrap().1.push(line.to_owned());
        }
    }
    let (top, tables) = sections.split_first().unwrap();
    let mut out: Vec<String> = top.1.iter().rev().cloned().collect();
    for (head, keys) in tables.iter().rev() {
        out.push(head.clone());
        out.extend(keys.iter().rev().cloned());
    }
    out.join("\n") + "\n"
}

#[test]
fn config_digest_ignores_key_order() {
    let tmp = tempfile::tempdir().unwrap();
    let flipped = reordered(NOMINAL);
    assert_ne!(flipped, NOMINAL);
    let mut digests = Vec::new();
    for (name, text) in [("a", NOMINAL.to_owned()), ("b", flipped)] {
        let cfg = write(tmp.path(), &format!("{name}.params"), &text);
        let out = ok(&["--config", s(&cfg), "--out", s(&tmp.path().join(name)), "simulate", "--trials", "0"]);
        digests.push(out.lines().find(|l| l.starts_with("config_digest")).unwrap().to_owned());
    }
    assert_eq!(digests[0], digests[1]);
}

const IDEAL: &str = r#"
scenario = "atom_to_photon_fixed"
n_trials = 60000
seed = 3

[params]
g = 27.0
kappa_ex = 60.0
kappa_i = 0.0
gamma = 0.0
epsilon = 0.0

[chain]
fiber_transmission = 1.0
path_efficiency = 1.0
spcm_efficiencies = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
detectors_per_side = 5
circulator_split = 1.0
false_click_rate = 0.0

[sequence]
period = 5000.0
dark_start = 4570.0
pulses = [
  { role = "detection", port = "up_z", start = 0.0, duration = 10.0, mean_photons = 4.0 },
  { role = "detection", port = "down_z", start = 250.0, duration = 10.0, mean_photons = 4.0 },
  { role = "detection", port = "up_z", start = 500.0, duration = 10.0, mean_photons = 4.0 },
  { role = "detection", port = "down_z", start = 750.0, duration = 10.0, mean_photons = 4.0 },
  { role = "swap_in", port = "injection", start = 1010.0, duration = 1000.0, edge = 250.0, mean_photons = 0.8 },
  { role = "swap_out", port = "up_z", start = 2310.0, duration = 1000.0, edge = 250.0, mean_photons = 0.01 },
  { role = "erasure", port = "up_z", start = 3560.0, duration = 10.0, mean_photons = 1.44 },
  { role = "detection", port = "down_z", start = 3810.0, duration = 10.0, mean_photons = 4.0 },
  { role = "detection", port = "up_z", start = 4060.0, duration = 10.0, mean_photons = 4.0 },
  { role = "detection", port = "down_z", start = 4310.0, duration = 10.0, mean_photons = 4.0 },
]

[analysis]
bootstrap = 200
"#;

fn average(report: &Path, mode: &str) -> f64 {
    let mut rd = csv::Reader::from_path(report.join("extended_table.csv")).unwrap();
    let h = rd.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|x| x == name).unwrap();
    rd.records()
        .map(|r| r.unwrap())
        .find(|r| &r[col("mode")] == mode)
        .map(|r| r[col("average")].parse().unwrap())
        .unwrap()
}

#[test]
fn ideal_config_reads_back_unit_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ideal.params", IDEAL);
    let run = tmp.path().join("run");
    ok(&["--config", s(&cfg), "--out", s(&run), "simulate"]);
    let plain = run.join("plain");
    let corrected = run.join("corrected");
    ok(&["--out", s(&run), "analyze", "--report", s(&plain)]);
    ok(&["--out", s(&run), "analyze", "--report", s(&corrected), "--correct-false"]);
    // second read-out photons and finite counts keep it a little below 1
    let heralded = average(&plain, "heralded");
    assert!(heralded >= 0.97, "heralded fidelity {heralded}");
    // without the herald, vacuum write pulses leave the pumped state behind
    let unheralded = average(&plain, "unheralded");
    assert!(unheralded < heralded, "unheralded {unheralded} vs heralded {heralded}");
    // nothing to subtract without background clicks
    assert_eq!(fs::read(plain.join("fig2b.csv")).unwrap(), fs::read(corrected.join("fig2b.csv")).unwrap());
}

#[test]
fn validation_failures_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_scenario = write(tmp.path(), "a.params", &NOMINAL.replace("\"double_swap\"", "\"triple_swap\""));
    assert_eq!(code(&["--config", s(&bad_scenario), "--out", s(&tmp.path().join("a")), "simulate"]), 2);
    let bad_key = write(tmp.path(), "b.params", &NOMINAL.replace("gamma = 3.0", "gamma = 3.0\nbeta = 1.0"));
    let out = sprint(&["--config", s(&bad_key), "--out", s(&tmp.path().join("b")), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params"));
    assert_eq!(code(&["--out", s(&tmp.path().join("c")), "sweep", "params.zeta", "0", "1"]), 2);
    assert_eq!(code(&["--out", s(&tmp.path().join("nothing")), "analyze"]), 2);
}

#[test]
fn analyze_checks_sidecar_and_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.params", &bright());
    let run = tmp.path().join("run");
    ok(&["--config", s(&cfg), "--out", s(&run), "simulate", "--trials", "2000", "--no-truth"]);
    let out = sprint(&["--out", s(&run), "analyze", "--use-ground-truth"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truth.jsonl"));
    assert_eq!(code(&["--out", s(&run), "analyze", "--scenario", "atom_to_photon_fixed"]), 2);
}

#[test]
fn empty_sweep_is_a_header_only_table() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["--out", s(tmp.path()), "sweep", "params.epsilon", "0", "0.1", "--steps", "0"]);
    let text = fs::read_to_string(tmp.path().join("sweep_params_epsilon.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn thresholds_print_the_exact_fractions() {
    let out = ok(&["thresholds"]);
    assert!(out.contains("single_swap = 0.666667 (2/3)"), "{out}");
    assert!(out.contains("double_swap = 0.555556 (5/9)"), "{out}");
    let total = ok(&["thresholds", "poisson_total", "--mean-photons", "0.8"]);
    let v: f64 = total.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((v - 0.57).abs() < 0.01, "{total}");
}
