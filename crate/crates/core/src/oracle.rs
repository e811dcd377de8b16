//! Bug classification. An [`Observation`] records one honest run (plus any
//! forged witnesses found around it); [`classify`] turns it into at most one
//! [`BugReport`] by a fixed decision table.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mutator::{SignalDelta, SoundnessFinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugCategory {
    Completeness,
    Correctness,
    Soundness,
}

impl BugCategory {
    pub const ALL: [BugCategory; 3] = [BugCategory::Completeness, BugCategory::Correctness, BugCategory::Soundness];

    pub fn name(self) -> &'static str {
        match self {
            BugCategory::Completeness => "completeness",
            BugCategory::Correctness => "correctness",
            BugCategory::Soundness => "soundness",
        }
    }
}

impl fmt::Display for BugCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// The input's label (valid/invalid by construction).
    SpecBased,
    /// Agreement with an independent reference.
    Differential,
    /// Unique outputs for fixed inputs.
    Invariant,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::SpecBased => "spec_based",
            OracleKind::Differential => "differential",
            OracleKind::Invariant => "invariant",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLabel {
    ExpectedValid,
    ExpectedInvalid,
    NotApplicable,
}

/// Tag on correctness reports for an expected-invalid input whose honest run
/// cannot be proven.
pub const UNEXPECTED_UNSAT: &str = "unexpected-unsat";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolatedConstraint {
    pub index: usize,
    pub label: String,
    /// `c - a*b`, decimal.
    pub residual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observation {
    pub circuit_hash: String,
    pub regex: Option<String>,
    pub string: Option<Vec<u8>>,
    pub input_length: Option<usize>,
    pub injection: Option<String>,
    pub seed: u64,
    pub iteration: u64,
    pub label: Option<InputLabel>,
    /// Public inputs, decimal; kept so non-regex reports can be replayed.
    pub inputs: BTreeMap<String, String>,
    /// Witness generation failed with this message.
    pub witness_error: Option<String>,
    /// Violations from the mock prover on the honest witness.
    pub violations: Vec<ViolatedConstraint>,
    /// Honest public outputs, decimal. For regex circuits this holds `accept`.
    pub outputs: BTreeMap<String, String>,
    /// Intended public outputs, where a reference exists.
    pub reference: Option<BTreeMap<String, String>>,
    pub findings: Vec<SoundnessFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("observation from the regex pipeline lacks {0}")]
    Missing(&'static str),
    #[error("honest run succeeded but recorded no outputs")]
    NoOutputs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    ConstraintViolations {
        violated: Vec<ViolatedConstraint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    WitnessFailure {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    VerdictMismatch {
        circuit: BTreeMap<String, String>,
        reference: BTreeMap<String, String>,
    },
    Forgery {
        finding: Box<SoundnessFinding>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Reproducer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub string_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_delta: Option<Vec<SignalDelta>>,
}

impl Reproducer {
    pub fn string(&self) -> Option<Vec<u8>> {
        base64::engine::general_purpose::STANDARD.decode(self.string_b64.as_ref()?).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: String,
    pub category: BugCategory,
    pub oracle: OracleKind,
    pub circuit_hash: String,
    /// Constraint label or signal name the evidence points at; the dedup key.
    pub site: String,
    pub reproducer: Reproducer,
    pub evidence: Evidence,
    pub first_seen_iteration: u64,
    pub duplicates: u64,
}

impl BugReport {
    fn new(
        obs: &Observation,
        category: BugCategory,
        oracle: OracleKind,
        site: String,
        evidence: Evidence,
        witness_delta: Option<Vec<SignalDelta>>,
    ) -> BugReport {
        let reproducer = Reproducer {
            regex: obs.regex.clone(),
            string_b64: obs.string.as_ref().map(|s| base64::engine::general_purpose::STANDARD.encode(s)),
            input_length: obs.input_length,
            injection: obs.injection.clone(),
            seed: obs.seed,
            inputs: (obs.regex.is_none() && !obs.inputs.is_empty()).then(|| obs.inputs.clone()),
            witness_delta,
        };
        let mut r = BugReport {
            id: String::new(),
            category,
            oracle,
            circuit_hash: obs.circuit_hash.clone(),
            site,
            reproducer,
            evidence,
            first_seen_iteration: obs.iteration,
            duplicates: 1,
        };
        r.id = r.content_id();
        r
    }

    /// Hash of everything except bookkeeping (id, iteration, duplicates).
    pub fn content_id(&self) -> String {
        let body = serde_json::json!([
            self.category,
            self.oracle,
            self.circuit_hash,
            self.site,
            self.reproducer,
            self.evidence
        ]);
        let digest = Sha256::digest(body.to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    /// True when `name` (a signal or constraint label) appears as the site or
    /// anywhere in the evidence.
    pub fn mentions(&self, name: &str) -> bool {
        if self.site == name {
            return true;
        }
        match &self.evidence {
            Evidence::ConstraintViolations { violated, .. } => violated.iter().any(|v| v.label == name),
            Evidence::WitnessFailure { message, .. } => message.contains(name),
            Evidence::VerdictMismatch { circuit, .. } => circuit.contains_key(name),
            Evidence::Forgery { finding } => finding.target == name || finding.signals().any(|s| s == name),
        }
    }

    pub fn tag(&self) -> Option<&str> {
        match &self.evidence {
            Evidence::ConstraintViolations { tag, .. } | Evidence::WitnessFailure { tag, .. } => tag.as_deref(),
            _ => None,
        }
    }
}

/// Applies the decision table; the first matching row wins.
///
/// 1. honest run fails on an expected-valid input: completeness;
///    on an expected-invalid one: correctness tagged `unexpected-unsat`.
/// 2. clean honest run whose outputs disagree with the reference: correctness.
/// 3. a forged witness: soundness.
pub fn classify(obs: &Observation) -> Result<Option<BugReport>, OracleError> {
    if obs.regex.is_some() {
        match obs.label {
            None | Some(InputLabel::NotApplicable) => return Err(OracleError::Missing("an input label")),
            _ if obs.string.is_none() => return Err(OracleError::Missing("the input string")),
            _ => {}
        }
    }
    let failed = obs.witness_error.is_some() || !obs.violations.is_empty();
    let label = obs.label.unwrap_or(InputLabel::NotApplicable);
    if failed && label != InputLabel::NotApplicable {
        let (category, tag) = match label {
            InputLabel::ExpectedValid => (BugCategory::Completeness, None),
            _ => (BugCategory::Correctness, Some(UNEXPECTED_UNSAT.to_string())),
        };
        let (site, evidence) = match &obs.witness_error {
            Some(message) => ("witness generation".to_string(), Evidence::WitnessFailure { message: message.clone(), tag }),
            None => (
                obs.violations[0].label.clone(),
                Evidence::ConstraintViolations { violated: obs.violations.clone(), tag },
            ),
        };
        return Ok(Some(BugReport::new(obs, category, OracleKind::SpecBased, site, evidence, None)));
    }
    if !failed {
        if let Some(reference) = &obs.reference {
            if obs.outputs.is_empty() {
                return Err(OracleError::NoOutputs);
            }
            let wrong: Vec<&String> =
                reference.iter().filter(|(k, v)| obs.outputs.get(*k) != Some(*v)).map(|(k, _)| k).collect();
            if !wrong.is_empty() {
                let site = wrong.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",");
                let circuit = obs.outputs.iter().filter(|(k, _)| reference.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
                let evidence = Evidence::VerdictMismatch { circuit, reference: reference.clone() };
                return Ok(Some(BugReport::new(obs, BugCategory::Correctness, OracleKind::Differential, site, evidence, None)));
            }
        }
    }
    if let Some(f) = obs.findings.first() {
        let oracle = if f.differing_outputs.is_empty() { OracleKind::Differential } else { OracleKind::Invariant };
        let evidence = Evidence::Forgery { finding: Box::new(f.clone()) };
        let report = BugReport::new(obs, BugCategory::Soundness, oracle, f.target.clone(), evidence, Some(f.delta.clone()));
        return Ok(Some(report));
    }
    Ok(None)
}

/// Incremental deduplication on (circuit hash, category, site). The first
/// report for a key is kept; later ones only bump its duplicate count.
#[derive(Debug, Default, Clone)]
pub struct Deduper {
    reports: Vec<BugReport>,
    index: HashMap<(String, BugCategory, String), usize>,
}

impl Deduper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true when the report opened a new key.
    pub fn push(&mut self, report: BugReport) -> bool {
        let key = (report.circuit_hash.clone(), report.category, report.site.clone());
        match self.index.get(&key) {
            Some(&i) => {
                self.reports[i].duplicates += report.duplicates;
                false
            }
            None => {
                self.index.insert(key, self.reports.len());
                self.reports.push(report);
                true
            }
        }
    }

    pub fn reports(&self) -> &[BugReport] {
        &self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn into_reports(self) -> Vec<BugReport> {
        self.reports
    }
}

pub fn dedupe(reports: impl IntoIterator<Item = BugReport>) -> Vec<BugReport> {
    let mut d = Deduper::new();
    for r in reports {
        d.push(r);
    }
    d.into_reports()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutator::{OutputDiff, PatchMode, ValueStrategy};
    use proptest::prelude::*;

    fn regex_obs(label: InputLabel, s: &[u8]) -> Observation {
        Observation {
            circuit_hash: "h1".into(),
            regex: Some("ab*c".into()),
            string: Some(s.to_vec()),
            input_length: Some(s.len()),
            label: Some(label),
            ..Observation::default()
        }
    }

    fn verdicts(circuit: &str, reference: &str) -> (BTreeMap<String, String>, Option<BTreeMap<String, String>>) {
        (
            BTreeMap::from([("accept".into(), circuit.into())]),
            Some(BTreeMap::from([("accept".into(), reference.into())])),
        )
    }

    fn finding(target: &str) -> SoundnessFinding {
        SoundnessFinding {
            circuit_hash: "h2".into(),
            inputs: BTreeMap::from([("a".into(), "2".into()), ("b".into(), "5".into())]),
            honest_digest: "d".into(),
            target: target.into(),
            strategy: ValueStrategy::Random,
            patch_mode: PatchMode::None,
            delta: vec![SignalDelta { signal: target.into(), index: 3, honest: "10".into(), mutated: "100".into() }],
            differing_outputs: vec![OutputDiff { name: target.into(), honest: "10".into(), mutated: "100".into() }],
            contradicts_reference: false,
            violated_constraints: vec![],
            iteration: 0,
        }
    }

    fn violation(label: &str) -> ViolatedConstraint {
        ViolatedConstraint { index: 7, label: label.into(), residual: "1".into() }
    }

    #[test]
    fn valid_input_that_cannot_be_proven_is_completeness() {
        let mut obs = regex_obs(InputLabel::ExpectedValid, b"abc");
        obs.violations = vec![violation("edge q0 -a-> q1 @ 0")];
        let r = classify(&obs).unwrap().unwrap();
        assert_eq!((r.category, r.oracle), (BugCategory::Completeness, OracleKind::SpecBased));
        assert_eq!(r.site, "edge q0 -a-> q1 @ 0");
        assert_eq!(r.reproducer.string().unwrap(), b"abc");
    }

    #[test]
    fn wrong_verdict_is_correctness() {
        let mut obs = regex_obs(InputLabel::ExpectedInvalid, b"ab");
        (obs.outputs, obs.reference) = verdicts("1", "0");
        let r = classify(&obs).unwrap().unwrap();
        assert_eq!((r.category, r.oracle), (BugCategory::Correctness, OracleKind::Differential));
        assert_eq!(r.site, "accept");
        assert!(r.mentions("accept"));
    }

    #[test]
    fn unsat_on_invalid_input_is_tagged_correctness() {
        let mut obs = regex_obs(InputLabel::ExpectedInvalid, b"ab");
        obs.violations = vec![violation("onehot s[2]")];
        let r = classify(&obs).unwrap().unwrap();
        assert_eq!(r.category, BugCategory::Correctness);
        assert_eq!(r.tag(), Some(UNEXPECTED_UNSAT));
    }

    #[test]
    fn forged_witness_is_soundness_via_the_invariant() {
        let obs = Observation {
            circuit_hash: "h2".into(),
            label: Some(InputLabel::ExpectedValid),
            outputs: BTreeMap::from([("c".into(), "10".into())]),
            findings: vec![finding("c")],
            ..Observation::default()
        };
        let r = classify(&obs).unwrap().unwrap();
        assert_eq!((r.category, r.oracle), (BugCategory::Soundness, OracleKind::Invariant));
        assert_eq!(r.reproducer.witness_delta.as_ref().unwrap()[0].mutated, "100");
        assert!(r.mentions("c"));
    }

    #[test]
    fn clean_runs_report_nothing() {
        let mut obs = regex_obs(InputLabel::ExpectedValid, b"abc");
        (obs.outputs, obs.reference) = verdicts("1", "1");
        assert_eq!(classify(&obs).unwrap(), None);
        let plain = Observation { label: Some(InputLabel::NotApplicable), violations: vec![violation("x")], ..Observation::default() };
        assert_eq!(classify(&plain).unwrap(), None);
    }

    #[test]
    fn regex_observations_need_a_label_and_string() {
        let mut obs = regex_obs(InputLabel::NotApplicable, b"a");
        assert!(classify(&obs).is_err());
        obs.label = Some(InputLabel::ExpectedValid);
        obs.string = None;
        assert!(classify(&obs).is_err());
        let mut obs = regex_obs(InputLabel::ExpectedValid, b"abc");
        obs.reference = verdicts("1", "1").1;
        assert_eq!(classify(&obs), Err(OracleError::NoOutputs));
    }

    #[test]
    fn dedupe_keys_on_hash_category_and_site() {
        let mk = |f: &str, it: u64| {
            let obs = Observation { circuit_hash: "h2".into(), iteration: it, findings: vec![finding(f)], ..Observation::default() };
            classify(&obs).unwrap().unwrap()
        };
        let out = dedupe([mk("c", 0), mk("c", 5)]);
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].duplicates, out[0].first_seen_iteration), (2, 0));

        let violated = |s: &[u8]| {
            let mut obs = regex_obs(InputLabel::ExpectedValid, s);
            obs.violations = vec![violation("edge")];
            classify(&obs).unwrap().unwrap()
        };
        assert_eq!(dedupe([violated(b"abc"), violated(b"abd")]).len(), 1);

        let mut wrong = regex_obs(InputLabel::ExpectedValid, b"abc");
        (wrong.outputs, wrong.reference) = verdicts("0", "1");
        let mut unsat = regex_obs(InputLabel::ExpectedValid, b"abc");
        unsat.violations = vec![violation("accept")];
        let both = dedupe([classify(&wrong).unwrap().unwrap(), classify(&unsat).unwrap().unwrap()]);
        assert_eq!(both.len(), 2);
    }

    #[test]
    fn reports_round_trip_through_json() {
        let obs = Observation { circuit_hash: "h".into(), findings: vec![finding("c")], ..Observation::default() };
        let r = classify(&obs).unwrap().unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: BugReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.content_id(), r.id);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["id", "category", "oracle", "circuit_hash", "reproducer", "evidence", "first_seen_iteration", "duplicates"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn classification_is_pure_and_follows_the_table(
            valid in any::<bool>(),
            failed in any::<bool>(),
            verdict_ok in any::<bool>(),
            forged in any::<bool>(),
        ) {
            let label = if valid { InputLabel::ExpectedValid } else { InputLabel::ExpectedInvalid };
            let mut obs = regex_obs(label, b"ab");
            if failed {
                obs.violations = vec![violation("bool s[2][q1]")];
            }
            (obs.outputs, obs.reference) = verdicts("1", if verdict_ok { "1" } else { "0" });
            if forged {
                obs.findings = vec![finding("accept")];
            }
            let r = classify(&obs).unwrap();
            prop_assert_eq!(&r, &classify(&obs).unwrap());
            let expected = if failed {
                Some(if valid { BugCategory::Completeness } else { BugCategory::Correctness })
            } else if !verdict_ok {
                Some(BugCategory::Correctness)
            } else if forged {
                Some(BugCategory::Soundness)
            } else {
                None
            };
            prop_assert_eq!(r.map(|r| r.category), expected);
        }
    }
}
