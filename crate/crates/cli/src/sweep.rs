use std::path::Path;

use serde_json::Value;

use sprint_core::model::{scatter_analytic, Mode, Pole};
use sprint_core::sim::Side;

use crate::config::{Resolved, RunConfig};
use crate::error::{validation, CliError, CliResult};

const COLUMNS: &[&str] = &[
    "value",
    "gamma_1d",
    "cooperativity",
    "p_toggle",
    "p_trans",
    "p_reflect_keep",
    "p_trans_flip",
    "p_loss",
    "bare_transmission",
    "efficiency_left",
    "efficiency_right",
];

/// Copy of `base` with the numeric key at the dotted `path` set to `value`.
pub fn with_value(base: &RunConfig, path: &str, value: f64) -> CliResult<Resolved> {
    let mut tree = serde_json::to_value(base).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut slot = &mut tree;
    for key in path.split('.') {
        slot = slot
            .get_mut(key)
            .ok_or_else(|| validation(format!("sweep: no key {path:?} in the configuration")))?;
    }
    if !slot.is_number() {
        return Err(validation(format!("sweep: {path} is not a numeric key")));
    }
    *slot = serde_json::Number::from_f64(value).map(Value::Number).ok_or_else(|| validation("sweep: value must be finite"))?;
    let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| validation(format!("sweep: {path} = {value}: {e}")))?;
    cfg.resolve()
}

fn metrics(r: &Resolved) -> CliResult<Vec<f64>> {
    let p = &r.config.params;
    // the atom in ↓z is the one a mode-A photon toggles
    let s = scatter_analytic(p, Pole::Down, Mode::A)?;
    let bare = scatter_analytic(&p.with_g_scale(0.0), Pole::Down, Mode::A)?;
    Ok(vec![
        p.gamma_1d()?,
        p.cooperativity()?,
        s.p_toggle,
        s.p_trans,
        s.p_reflect_keep,
        s.p_trans_flip,
        s.p_loss,
        bare.p_trans,
        r.chain.side_efficiency(Side::Left),
        r.chain.side_efficiency(Side::Right),
    ])
}

fn trend(xs: &[f64]) -> &'static str {
    let eps = 1e-12;
    let up = xs.windows(2).all(|w| w[1] >= w[0] - eps);
    let down = xs.windows(2).all(|w| w[1] <= w[0] + eps);
    match (up, down) {
        (true, true) => "constant",
        (true, false) => "increasing",
        (false, true) => "decreasing",
        _ => "not monotonic",
    }
}

/// Writes one CSV row per point and returns notes on the direction of each
/// metric.
pub fn run(base: &RunConfig, path: &str, from: f64, to: f64, steps: usize, csv_path: &Path) -> CliResult<Vec<String>> {
    // an invalid path is an error even for an empty range
    with_value(base, path, from)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(steps);
    for k in 0..steps {
        let x = if steps == 1 { from } else { from + (to - from) * k as f64 / (steps - 1) as f64 };
        let r = with_value(base, path, x)?;
        let mut row = vec![x];
        row.extend(metrics(&r)?);
        rows.push(row);
    }
    if let Some(dir) = csv_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(COLUMNS)?;
    for row in &rows {
        w.write_record(row.iter().map(|x| format!("{x:.9}")))?;
    }
    w.flush()?;
    let mut notes = Vec::new();
    if rows.len() >= 2 {
        for (i, name) in COLUMNS.iter().enumerate().skip(1) {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            notes.push(format!("{name}: {}", trend(&col)));
        }
    }
    Ok(notes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    fn base() -> RunConfig {
        parse(include_str!("../profiles/nominal.params")).unwrap()
    }

    fn column(path: &str, from: f64, to: f64, steps: usize, name: &str) -> Vec<f64> {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("s.csv");
        run(&base(), path, from, to, steps, &file).unwrap();
        let mut rd = csv::Reader::from_path(&file).unwrap();
        let i = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
        rd.records().map(|r| r.unwrap()[i].parse().unwrap()).collect()
    }

    #[test]
    fn toggle_falls_with_crosstalk() {
        let p = column("params.epsilon", 0.0, 0.1, 11, "p_toggle");
        assert!(p.windows(2).all(|w| w[1] < w[0]), "{p:?}");
    }

    #[test]
    fn bare_transmission_follows_the_coupling_ratio() {
        let x = column("params.kappa_ex", 2.0, 120.0, 12, "value");
        let t = column("params.kappa_ex", 2.0, 120.0, 12, "bare_transmission");
        for (k, t) in x.iter().zip(&t) {
            let oracle = ((k - 6.0) / (k + 6.0)).powi(2);
            assert!((t - oracle).abs() < 1e-6, "kappa_ex {k}: {t} vs {oracle}");
        }
        // fully absorbed at critical coupling
        let crit = column("params.kappa_ex", 6.0, 6.0, 1, "bare_transmission");
        assert!(crit[0] < 1e-12);
    }

    #[test]
    fn empty_range_writes_only_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("s.csv");
        let notes = run(&base(), "params.epsilon", 0.0, 0.1, 0, &file).unwrap();
        assert!(notes.is_empty());
        let text = std::fs::read_to_string(&file).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn unknown_path_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&base(), "params.zeta", 0.0, 1.0, 3, &dir.path().join("s.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = run(&base(), "scenario", 0.0, 1.0, 3, &dir.path().join("s.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
