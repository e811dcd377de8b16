//! Report bundles on disk and replay of individual reproducers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AlphabetSpec, ModulusSpec};
use super::coverage::{coverage_to_json, CoverageMap};
use super::{honest_run, CampaignStats};
use crate::circuit::{circuit_from_json, circuit_to_json, Circuit};
use crate::field::FieldModulus;
use crate::oracle::{classify, BugCategory, BugReport, Evidence, InputLabel, Observation};
use crate::regex::{Alphabet, CompiledRegex, DEFAULT_STATE_CAP};
use crate::transpiler::{inject_bug, string_inputs, transpile, BugInjection, TranspileLimits, TranspileSpec};

/// What replay needs beyond the report's own reproducer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum ReplayContext {
    Regex {
        alphabet: AlphabetSpec,
        modulus: ModulusSpec,
        max_dfa_states: usize,
        max_len: usize,
        label: InputLabel,
        /// Verdict the reference gave when the report was made.
        reference_verdict: Option<bool>,
    },
    Circuit {
        /// The circuit as `circuit_to_json` wrote it.
        circuit: serde_json::Value,
        label: InputLabel,
        reference: Option<BTreeMap<String, String>>,
    },
}

impl ReplayContext {
    pub fn for_circuit(
        circuit: &Circuit,
        label: InputLabel,
        reference: Option<BTreeMap<String, String>>,
    ) -> Self {
        let circuit = serde_json::from_slice(&circuit_to_json(circuit)).expect("circuit JSON is valid");
        ReplayContext::Circuit { circuit, label, reference }
    }
}

/// One reproducer file: the report plus its replay context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub report: BugReport,
    pub context: ReplayContext,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub dir: PathBuf,
    pub reports: PathBuf,
    pub stats: PathBuf,
    pub coverage: PathBuf,
    pub index: PathBuf,
    pub reproducers: Vec<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("reproducer is incomplete: {0}")]
    Incomplete(&'static str),
    #[error("cannot rebuild the circuit: {0}")]
    Rebuild(String),
    #[error("replayed circuit hash {found} differs from the reported {expected}")]
    HashMismatch { expected: String, found: String },
}

/// What the replayed run classified as.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub category: Option<BugCategory>,
    pub site: Option<String>,
    /// Same category and site as the stored report.
    pub matches_report: bool,
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

pub fn render_index(records: &[ReplayRecord], stats: &CampaignStats) -> String {
    let mut md = String::from("# circfuzz report\n\n");
    let _ = writeln!(md, "- seed: {}", stats.seed);
    let _ = writeln!(md, "- iterations: {}, pairs: {}", stats.iterations, stats.pairs);
    let _ = writeln!(md, "- circuits compiled: {}, witnesses: {}", stats.circuits_compiled, stats.witnesses_generated);
    let _ = writeln!(
        md,
        "- constraint coverage: {}/{} slots ({:.1}%)",
        stats.coverage.covered_slots,
        stats.coverage.slots,
        100.0 * stats.coverage.fraction
    );
    let _ = writeln!(md, "- wall time: {:.1} s\n", stats.wall_time_seconds);
    if records.is_empty() {
        md.push_str("No bugs found.\n");
        return md;
    }
    md.push_str("| id | category | oracle | site | circuit | seen | reproducer |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for rec in records {
        let r = &rec.report;
        let _ = writeln!(
            md,
            "| {} | {} | {} | `{}` | {} | {} | [json](reproducers/{}.json) |",
            r.id,
            r.category,
            r.oracle,
            r.site.replace('|', "\\|"),
            &r.circuit_hash[..r.circuit_hash.len().min(12)],
            r.duplicates,
            r.id
        );
    }
    md
}

/// Writes `reports.json`, `stats.json`, `coverage.json`, `index.md` and one
/// `reproducers/<id>.json` per report into `dir`.
pub fn emit_report_bundle(
    records: &[ReplayRecord],
    stats: &CampaignStats,
    coverage: &CoverageMap,
    dir: &Path,
) -> std::io::Result<BundlePaths> {
    let repro_dir = dir.join("reproducers");
    std::fs::create_dir_all(&repro_dir)?;
    let reports: Vec<&BugReport> = records.iter().map(|r| &r.report).collect();
    let paths = BundlePaths {
        dir: dir.to_path_buf(),
        reports: dir.join("reports.json"),
        stats: dir.join("stats.json"),
        coverage: dir.join("coverage.json"),
        index: dir.join("index.md"),
        reproducers: records.iter().map(|r| repro_dir.join(format!("{}.json", r.report.id))).collect(),
    };
    write_json(&paths.reports, &reports)?;
    write_json(&paths.stats, stats)?;
    write_json(&paths.coverage, &coverage_to_json(coverage))?;
    for (rec, path) in records.iter().zip(&paths.reproducers) {
        write_json(path, rec)?;
    }
    std::fs::write(&paths.index, render_index(records, stats))?;
    Ok(paths)
}

pub fn load_reproducer(path: &Path) -> Result<ReplayRecord, ReplayError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReplayError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| ReplayError::Json { path: path.into(), source })
}

/// Rebuilds the circuit and inputs, reruns the honest execution, re-checks any
/// recorded forgery against that honest witness, and classifies again.
pub fn replay(record: &ReplayRecord) -> Result<ReplayVerdict, ReplayError> {
    let report = &record.report;
    let repro = &report.reproducer;
    let (circuit, inputs, mut obs) = match &record.context {
        ReplayContext::Regex { alphabet, modulus, max_dfa_states, max_len, label, reference_verdict } => {
            let pattern = repro.regex.clone().ok_or(ReplayError::Incomplete("regex"))?;
            let s = repro.string().ok_or(ReplayError::Incomplete("string"))?;
            let alphabet = Alphabet::new(alphabet.lo, alphabet.hi).ok_or(ReplayError::Incomplete("alphabet"))?;
            let field = FieldModulus::from_decimal(&modulus.p, &modulus.name)
                .map_err(|e| ReplayError::Rebuild(e.to_string()))?;
            let compiled = CompiledRegex::compile(&pattern, alphabet, DEFAULT_STATE_CAP)
                .map_err(|e| ReplayError::Rebuild(e.to_string()))?;
            let limits = TranspileLimits { max_input_len: *max_len, max_dfa_states: *max_dfa_states };
            let spec = TranspileSpec::new(&compiled.dfa, s.len()).with_source(&pattern).with_limits(limits);
            let circuit = match &repro.injection {
                None => transpile(&spec, field),
                Some(tag) => {
                    let inj: BugInjection = tag.parse().map_err(|e: crate::transpiler::TranspileError| ReplayError::Rebuild(e.to_string()))?;
                    inject_bug(&spec, inj, field).map(|(c, _)| c)
                }
            }
            .map_err(|e| ReplayError::Rebuild(e.to_string()))?;
            let inputs = string_inputs(&s, field);
            let obs = Observation {
                regex: Some(pattern),
                string: Some(s.clone()),
                input_length: Some(s.len()),
                injection: repro.injection.clone(),
                label: Some(*label),
                reference: reference_verdict
                    .map(|v| BTreeMap::from([("accept".to_string(), u8::from(v).to_string())])),
                ..Observation::default()
            };
            (circuit, inputs, obs)
        }
        ReplayContext::Circuit { circuit, label, reference } => {
            let bytes = serde_json::to_vec(circuit).expect("JSON value serializes");
            let circuit = circuit_from_json(&bytes).map_err(|e| ReplayError::Rebuild(e.to_string()))?;
            let raw = repro.inputs.clone().ok_or(ReplayError::Incomplete("inputs"))?;
            let inputs = raw
                .iter()
                .map(|(k, v)| circuit.modulus.parse(v).map(|x| (k.clone(), x)))
                .collect::<Result<BTreeMap<_, _>, _>>()
                .map_err(|e| ReplayError::Rebuild(e.to_string()))?;
            let obs = Observation {
                label: Some(*label),
                inputs: raw,
                reference: reference.clone(),
                ..Observation::default()
            };
            (circuit, inputs, obs)
        }
    };
    let hash = circuit.hash();
    if hash != report.circuit_hash {
        return Err(ReplayError::HashMismatch { expected: report.circuit_hash.clone(), found: hash });
    }
    let run = honest_run(&circuit, &inputs);
    obs.circuit_hash = hash;
    obs.seed = repro.seed;
    obs.iteration = report.first_seen_iteration;
    obs.witness_error = run.error;
    obs.violations = run.violations;
    obs.outputs = run.outputs;
    if let (Evidence::Forgery { finding }, Some(honest)) = (&report.evidence, &run.witness) {
        if finding.verify(&circuit, honest) {
            obs.findings.push((**finding).clone());
        }
    }
    let fresh = classify(&obs).map_err(|e| ReplayError::Rebuild(e.to_string()))?;
    let category = fresh.as_ref().map(|r| r.category);
    let site = fresh.map(|r| r.site);
    let matches_report = category == Some(report.category) && site.as_deref() == Some(report.site.as_str());
    Ok(ReplayVerdict { category, site, matches_report })
}
