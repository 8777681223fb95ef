//! Report envelope, input hashing and output helpers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Every JSON report carries the tool version, the RNG, the seeds and the
/// digests of the input files, so a run can be reproduced from it.
#[derive(Serialize)]
pub struct Report<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub rng: &'static str,
    pub seeds: Vec<u64>,
    pub inputs: BTreeMap<String, String>,
    pub result: T,
}

/// Input files read by a command, keyed by role, with their SHA-256 digests.
#[derive(Default)]
pub struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    pub fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.digests.insert(role.to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn into_map(self) -> BTreeMap<String, String> {
        self.digests
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn emit<T: Serialize>(command: &str, seeds: Vec<u64>, inputs: Inputs, result: T) -> Result<()> {
    let report = Report {
        tool: "congfac",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        rng: congfac::rng::RNG_NAME,
        seeds,
        inputs: inputs.into_map(),
        result,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// One CSV row per merge run.
pub struct CsvRow {
    pub k: usize,
    pub seed: u64,
    pub run: usize,
    pub phases: usize,
    pub routing_cost: f64,
    pub facility_cost: f64,
    pub wall_ms: f64,
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut out = String::from("k,seed,run,phases,routing_cost,facility_cost,total_cost,wall_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3}\n",
            r.k,
            r.seed,
            r.run,
            r.phases,
            r.routing_cost,
            r.facility_cost,
            r.routing_cost + r.facility_cost,
            r.wall_ms
        ));
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}
