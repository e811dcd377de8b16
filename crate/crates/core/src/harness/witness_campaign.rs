//! Witness campaigns on a fixed circuit: honest run, mutation probe, classify,
//! once per public-input assignment.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bundle::{ReplayContext, ReplayRecord};
use super::config::{CampaignConfig, ConfigError};
use super::coverage::CoverageMap;
use super::{derive_seed, honest_run, CampaignControl, CampaignOutcome, ReportSink};
use crate::circuit::Circuit;
use crate::field::FieldElement;
use crate::fixtures::{fixture_kind_of, reference_outputs};
use crate::mutator::{soundness_probe, ProbeBudget};
use crate::oracle::{classify, BugReport, InputLabel, Observation};

const STREAM_INPUTS: u64 = 11;
const STREAM_PROBE: u64 = 12;

/// Where input assignments come from.
#[derive(Debug, Clone)]
pub enum InputsSource {
    /// Explicit assignments, name to decimal value, run in order.
    Assignments(Vec<BTreeMap<String, String>>),
    /// `budget.iterations` assignments from [`random_inputs`].
    Random,
}

impl InputsSource {
    /// Reads a JSON file holding one assignment object or an array of them.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        let items = match value {
            serde_json::Value::Array(items) => items,
            one => vec![one],
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let obj = item
                .as_object()
                .ok_or_else(|| ConfigError::Invalid(format!("{}: each assignment must be an object", path.display())))?;
            let mut m = BTreeMap::new();
            for (k, v) in obj {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) if n.is_u64() => n.to_string(),
                    _ => {
                        return Err(ConfigError::Invalid(format!(
                            "{}: input {k} must be a non-negative integer or decimal string",
                            path.display()
                        )))
                    }
                };
                m.insert(k.clone(), s);
            }
            out.push(m);
        }
        Ok(InputsSource::Assignments(out))
    }
}

/// Random public inputs, biased towards the edge values that hints and
/// divisions care about: zero, small integers, and `p - 1`.
pub fn random_inputs(circuit: &Circuit, rng: &mut impl Rng) -> BTreeMap<String, FieldElement> {
    let m = circuit.modulus;
    circuit
        .public_inputs()
        .into_iter()
        .map(|s| {
            let x = rng.gen::<f64>();
            let v = if x < 0.2 {
                m.zero()
            } else if x < 0.5 {
                m.from_u64(rng.gen_range(1..=16))
            } else if x < 0.6 {
                -m.one()
            } else {
                m.random(rng)
            };
            (circuit.signal_name(s).to_string(), v)
        })
        .collect()
}

#[derive(Default)]
struct UnitResult {
    reports: Vec<(BugReport, ReplayRecord)>,
    coverage: CoverageMap,
    witnesses: u64,
    mock_proofs: u64,
    probe_mutations: u64,
    errors: u64,
}

fn run_unit(
    config: &CampaignConfig,
    circuit: &Circuit,
    hash: &str,
    unit: u64,
    inputs: &BTreeMap<String, FieldElement>,
) -> UnitResult {
    let mut out = UnitResult::default();
    let kind = fixture_kind_of(circuit);
    let label = if kind.is_some_and(|k| k.is_multiplier()) { InputLabel::ExpectedValid } else { InputLabel::NotApplicable };
    let reference_fe = kind.and_then(|k| reference_outputs(k, inputs));
    let reference: Option<BTreeMap<String, String>> =
        reference_fe.as_ref().map(|r| r.iter().map(|(k, v)| (k.clone(), v.to_decimal())).collect());

    let run = honest_run(circuit, inputs);
    out.witnesses += u64::from(run.witness.is_some());
    out.mock_proofs += u64::from(run.witness.is_some());
    if let Some(w) = &run.witness {
        out.coverage.record_witness(hash, circuit, &w.values);
    }
    let obs = Observation {
        circuit_hash: hash.to_string(),
        seed: config.seed,
        iteration: unit,
        label: Some(label),
        inputs: inputs.iter().map(|(k, v)| (k.clone(), v.to_decimal())).collect(),
        witness_error: run.error.clone(),
        violations: run.violations.clone(),
        outputs: run.outputs.clone(),
        reference: reference.clone(),
        ..Observation::default()
    };
    let context = ReplayContext::for_circuit(circuit, label, reference);
    let emit = |obs: &Observation, out: &mut UnitResult| match classify(obs) {
        Ok(Some(report)) => {
            let record = ReplayRecord { report: report.clone(), context: context.clone() };
            out.reports.push((report, record));
        }
        Ok(None) => {}
        Err(e) => {
            log::error!("evaluator: {e}");
            out.errors += 1;
        }
    };
    emit(&obs, &mut out);

    if let (Some(honest), true) = (&run.witness, run.violations.is_empty()) {
        if config.probe.iterations > 0 {
            let budget = ProbeBudget {
                iterations: config.probe.iterations,
                rng_seed: derive_seed(config.seed, unit, STREAM_PROBE),
            };
            let probe = soundness_probe(circuit, honest, inputs, budget, &config.probe.weights, reference_fe.as_ref());
            out.probe_mutations += probe.mutations;
            out.mock_proofs += probe.mock_proofs;
            for f in probe.findings {
                emit(&Observation { findings: vec![f], ..obs.clone() }, &mut out);
            }
        }
    }
    out
}

/// Runs honest execution, probing and classification for every assignment
/// from `source`, with the same batching and ordering rules as regex
/// campaigns.
pub fn run_witness_campaign(
    config: &CampaignConfig,
    circuit: &Circuit,
    source: &InputsSource,
    control: &mut CampaignControl<'_>,
) -> Result<CampaignOutcome, ConfigError> {
    if config.workers == 0 || config.batch_size == 0 {
        return Err(ConfigError::Invalid("workers and batch_size must be at least 1".into()));
    }
    let started = Instant::now();
    let m = circuit.modulus;
    let assignments: Vec<BTreeMap<String, FieldElement>> = match source {
        InputsSource::Assignments(list) => {
            let mut parsed = Vec::with_capacity(list.len());
            for a in list {
                let mut p = BTreeMap::new();
                for (k, v) in a {
                    let x = m.parse(v).map_err(|e| ConfigError::Invalid(format!("input {k} = {v:?}: {e}")))?;
                    p.insert(k.clone(), x);
                }
                parsed.push(p);
            }
            parsed
        }
        InputsSource::Random => {
            let n = config
                .budget
                .iterations
                .ok_or_else(|| ConfigError::Invalid("random inputs need an iteration budget".into()))?;
            (0..n)
                .map(|u| random_inputs(circuit, &mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, u, STREAM_INPUTS))))
                .collect()
        }
    };
    let hash = circuit.hash();
    let deadline = config.budget.seconds.map(|s| started + Duration::from_secs_f64(s));
    let mut outcome = CampaignOutcome::default();
    outcome.stats.seed = config.seed;
    outcome.stats.rng = config.rng.clone();
    let mut sink = ReportSink::default();
    let mut last_flush = Instant::now();
    let flush_every = Duration::from_secs_f64(config.flush_interval_seconds.max(0.1));

    let batch_len = config.batch_size.max(config.workers);
    'outer: for (b, batch) in assignments.chunks(batch_len).enumerate() {
        if control.stopped() || deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let base = (b * batch_len) as u64;
        let per_worker = batch.len().div_ceil(config.workers);
        let results: Vec<UnitResult> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .chunks(per_worker)
                .enumerate()
                .map(|(w, chunk)| {
                    let hash = &hash;
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .enumerate()
                            .map(|(k, inputs)| {
                                let unit = base + (w * per_worker + k) as u64;
                                run_unit(config, circuit, hash, unit, inputs)
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut stop = false;
        for r in results {
            let stats = &mut outcome.stats;
            stats.iterations += 1;
            stats.witnesses_generated += r.witnesses;
            stats.mock_proofs += r.mock_proofs;
            stats.probe_mutations += r.probe_mutations;
            stats.errors += r.errors;
            outcome.coverage.absorb(&r.coverage).expect("one circuit");
            for (report, record) in r.reports {
                let category = report.category;
                sink.push(report, record);
                stop |= config.stop_on == Some(category);
            }
        }
        if stop || control.stopped() || last_flush.elapsed() >= flush_every {
            outcome.stats.coverage = outcome.coverage.summary();
            outcome.stats.wall_time_seconds = started.elapsed().as_secs_f64();
            sink.fill(&mut outcome);
            control.flush(&outcome);
            last_flush = Instant::now();
        }
        if stop {
            break 'outer;
        }
    }
    outcome.stats.circuits_compiled = 1;
    outcome.stats.coverage = outcome.coverage.summary();
    outcome.stats.wall_time_seconds = started.elapsed().as_secs_f64();
    sink.fill(&mut outcome);
    Ok(outcome)
}
