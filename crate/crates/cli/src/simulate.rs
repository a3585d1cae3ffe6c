use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sprint_core::sim::{write_header, write_records, write_truth, CampaignPlan, Scenario};

use crate::config::Resolved;
use crate::error::{CliError, CliResult};

pub const EVENTS: &str = "events.jsonl";
pub const TRUTH: &str = "truth.jsonl";
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";

const CHUNK: u64 = 250_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config_digest: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub n_trials: u64,
    pub n_records: u64,
    /// File name and SHA-256 of every output.
    pub files: Vec<(String, String)>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut h = Sha256::new();
    let mut f = File::open(path)?;
    std::io::copy(&mut f, &mut h)?;
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Runs the campaign in chunks, streaming clicks and ground truth to `out`.
pub fn run(r: &Resolved, out: &Path, with_truth: bool) -> CliResult<Manifest> {
    std::fs::create_dir_all(out)?;
    let c = &r.config;
    let mut plan = CampaignPlan::new(
        c.scenario,
        &c.basis,
        c.n_trials,
        &c.params,
        &r.chain,
        &r.sequence,
        c.seed,
        &c.campaign,
    )?;
    plan.stamp(&r.digest);
    let toml_text = toml::to_string_pretty(c).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(out.join(CONFIG), toml_text)?;

    let mut events = BufWriter::new(File::create(out.join(EVENTS))?);
    let mut truth = if with_truth {
        Some(BufWriter::new(File::create(out.join(TRUTH))?))
    } else {
        None
    };
    write_header(plan.header(), &mut events)?;
    let mut n_records = 0u64;
    let mut start = 0;
    while start < c.n_trials {
        let end = (start + CHUNK).min(c.n_trials);
        let (records, outcomes) = plan.run(start..end)?;
        write_records(&records, &mut events)?;
        if let Some(t) = &mut truth {
            write_truth(&outcomes, &mut *t)?;
        }
        n_records += records.len() as u64;
        log::info!("trials {end}/{}: {n_records} clicks", c.n_trials);
        start = end;
    }
    events.flush()?;
    drop(events);
    if let Some(mut t) = truth {
        t.flush()?;
    }

    let mut names = vec![CONFIG, EVENTS];
    if with_truth {
        names.push(TRUTH);
    }
    let files = names
        .into_iter()
        .map(|n| Ok((n.to_owned(), sha256_file(&out.join(n))?)))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = Manifest {
        config_digest: r.digest.clone(),
        seed: c.seed,
        scenario: c.scenario,
        n_trials: c.n_trials,
        n_records,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(out.join(MANIFEST), text + "\n")?;
    Ok(manifest)
}
