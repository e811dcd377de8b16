//! Campaign orchestration: configuration, worker scheduling, coverage,
//! report collection, bundles and replay.

mod bundle;
mod config;
mod coverage;
mod reference;
mod regex_campaign;
mod witness_campaign;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bundle::{
    emit_report_bundle, load_reproducer, render_index, replay, BundlePaths, ReplayContext, ReplayError, ReplayRecord,
    ReplayVerdict,
};
pub use config::{
    AlphabetSpec, Budget, CampaignConfig, ConfigError, ModulusSpec, ProbeConfig, StringCounts, RNG_ALGORITHM,
};
pub use coverage::{coverage_merge, coverage_to_json, CircuitCoverage, CoverageMap, CoverageSummary, MergeError};
pub use reference::{
    make_reference, BuiltinReference, ExternalReference, Reference, ReferenceError, ReferenceSpec, QUERY_TIMEOUT,
};
pub use regex_campaign::run_regex_campaign;
pub use witness_campaign::{random_inputs, run_witness_campaign, InputsSource};

use crate::oracle::{BugReport, Deduper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CampaignStats {
    pub seed: u64,
    pub rng: String,
    pub iterations: u64,
    pub pairs: u64,
    pub circuits_compiled: u64,
    pub witnesses_generated: u64,
    pub mock_proofs: u64,
    pub probe_mutations: u64,
    pub regexes_skipped: u64,
    pub errors: u64,
    /// Builtin NFA and DFA disagreeing on a generated string; must stay 0.
    pub engine_disagreements: u64,
    pub reports_by_category: BTreeMap<String, u64>,
    pub coverage: CoverageSummary,
    pub wall_time_seconds: f64,
}

/// Everything a campaign has produced so far.
#[derive(Debug, Clone, Default)]
pub struct CampaignOutcome {
    pub reports: Vec<BugReport>,
    /// Replay data for each report, in the same order.
    pub records: Vec<ReplayRecord>,
    pub stats: CampaignStats,
    pub coverage: CoverageMap,
}

impl CampaignOutcome {
    pub fn found_bugs(&self) -> bool {
        !self.reports.is_empty()
    }
}

/// Interrupt flag and periodic flush hook shared with the caller.
#[derive(Default)]
pub struct CampaignControl<'a> {
    pub stop: Arc<AtomicBool>,
    pub on_flush: Option<Box<dyn FnMut(&CampaignOutcome) + 'a>>,
}

impl<'a> CampaignControl<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_flush(mut self, f: impl FnMut(&CampaignOutcome) + 'a) -> Self {
        self.on_flush = Some(Box::new(f));
        self
    }

    pub fn stopped(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }

    fn flush(&mut self, outcome: &CampaignOutcome) {
        if let Some(f) = self.on_flush.as_mut() {
            f(outcome);
        }
    }
}

/// The single-consumer end of a campaign: dedup plus replay records.
#[derive(Default)]
struct ReportSink {
    dedup: Deduper,
    records: Vec<ReplayRecord>,
}

impl ReportSink {
    fn push(&mut self, report: BugReport, record: ReplayRecord) -> bool {
        let fresh = self.dedup.push(report);
        if fresh {
            self.records.push(record);
        }
        fresh
    }

    fn fill(&self, out: &mut CampaignOutcome) {
        out.reports = self.dedup.reports().to_vec();
        out.records = self
            .records
            .iter()
            .zip(&out.reports)
            .map(|(rec, r)| ReplayRecord { report: r.clone(), ..rec.clone() })
            .collect();
        out.stats.reports_by_category.clear();
        for r in &out.reports {
            *out.stats.reports_by_category.entry(r.category.to_string()).or_default() += 1;
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream seed for `(campaign seed, unit, purpose)`.
pub(crate) fn derive_seed(seed: u64, unit: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ unit) ^ purpose.wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// Result of executing a circuit honestly and mock-proving the witness.
pub(crate) struct HonestRun {
    pub witness: Option<crate::circuit::Witness>,
    pub error: Option<String>,
    pub violations: Vec<crate::oracle::ViolatedConstraint>,
    pub outputs: BTreeMap<String, String>,
}

pub(crate) fn honest_run(
    circuit: &crate::circuit::Circuit,
    inputs: &BTreeMap<String, crate::field::FieldElement>,
) -> HonestRun {
    match crate::circuit::generate_witness(circuit, inputs) {
        Err(e) => HonestRun { witness: None, error: Some(e.to_string()), violations: Vec::new(), outputs: BTreeMap::new() },
        Ok(w) => {
            let violations = crate::circuit::mock_prove(circuit, &w)
                .violations()
                .iter()
                .map(|v| crate::oracle::ViolatedConstraint {
                    index: v.index,
                    label: v.label.clone(),
                    residual: v.lhs.to_decimal(),
                })
                .collect();
            let outputs = circuit
                .public_outputs()
                .into_iter()
                .map(|s| (circuit.signal_name(s).to_string(), w.get(s).to_decimal()))
                .collect();
            HonestRun { witness: Some(w), error: None, violations, outputs }
        }
    }
}
