//! The regex loop: pick a regex, generate labelled strings, transpile at each
//! string's length, run honestly, compare with the reference, probe for
//! forged witnesses, classify.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bundle::{ReplayContext, ReplayRecord};
use super::config::{CampaignConfig, ConfigError};
use super::coverage::CoverageMap;
use super::reference::{make_reference, Reference};
use super::{derive_seed, honest_run, CampaignControl, CampaignOutcome, ReportSink};
use crate::circuit::Circuit;
use crate::field::FieldModulus;
use crate::inputgen::{
    generate_invalid_strings, generate_regex_with, generate_valid_strings, load_seed_corpus, Grammar, StringBudget,
};
use crate::mutator::{soundness_probe, ProbeBudget};
use crate::oracle::{classify, BugReport, InputLabel, Observation};
use crate::regex::{nfa_match, Alphabet, CompiledRegex, DEFAULT_STATE_CAP};
use crate::transpiler::{inject_bug, string_inputs, transpile, BugInjection, TranspileLimits, TranspileSpec};

const STREAM_REGEX: u64 = 1;
const STREAM_STRINGS: u64 = 2;
const STREAM_PROBE: u64 = 3;

#[derive(Debug, Clone)]
struct Unit {
    iteration: u64,
    pattern: String,
    seed: u64,
}

#[derive(Debug, Default)]
struct PairResult {
    reports: Vec<(BugReport, ReplayRecord)>,
    coverage: CoverageMap,
    compiled: u64,
    witnesses: u64,
    mock_proofs: u64,
    probe_mutations: u64,
    errors: u64,
    disagreements: u64,
}

#[derive(Debug)]
struct UnitResult {
    iteration: u64,
    pattern: String,
    skipped: bool,
    pairs: Vec<PairResult>,
}

struct CachedCircuit {
    circuit: Circuit,
    hash: String,
    injection_tag: Option<String>,
}

/// Worker-local state: the reference matcher and a circuit cache keyed by
/// (regex, length); the injection is fixed per campaign.
struct Worker<'c> {
    config: &'c CampaignConfig,
    alphabet: Alphabet,
    modulus: FieldModulus,
    injection: Option<BugInjection>,
    reference: Box<dyn Reference + Send>,
    cache: HashMap<(String, usize), Option<Arc<CachedCircuit>>>,
}

impl<'c> Worker<'c> {
    fn circuit(&mut self, compiled: &CompiledRegex, n: usize, fresh: &mut u64) -> Option<Arc<CachedCircuit>> {
        let key = (compiled.pattern.clone(), n);
        if let Some(c) = self.cache.get(&key) {
            return c.clone();
        }
        *fresh += 1;
        let limits = TranspileLimits { max_input_len: self.config.max_len, max_dfa_states: self.config.max_dfa_states };
        let spec = TranspileSpec::new(&compiled.dfa, n).with_source(&compiled.pattern).with_limits(limits);
        let built = match self.injection {
            None => transpile(&spec, self.modulus).map(|c| (c, None)),
            Some(inj) => inject_bug(&spec, inj, self.modulus).map(|(c, info)| (c, Some(info.tag()))),
        };
        let entry = match built {
            Ok((circuit, injection_tag)) => {
                let hash = circuit.hash();
                Some(Arc::new(CachedCircuit { circuit, hash, injection_tag }))
            }
            Err(e) => {
                log::debug!("not transpiling {:?} at length {n}: {e}", compiled.pattern);
                None
            }
        };
        if self.cache.len() > 512 {
            self.cache.clear();
        }
        self.cache.insert(key, entry.clone());
        entry
    }

    fn run_unit(&mut self, unit: &Unit, stop: &std::sync::atomic::AtomicBool) -> UnitResult {
        let mut result = UnitResult { iteration: unit.iteration, pattern: unit.pattern.clone(), skipped: false, pairs: Vec::new() };
        let compiled = match CompiledRegex::compile(&unit.pattern, self.alphabet, DEFAULT_STATE_CAP) {
            Ok(c) if c.dfa.num_states() <= self.config.max_dfa_states => c,
            Ok(_) | Err(_) => {
                result.skipped = true;
                return result;
            }
        };
        let sb = StringBudget { max_len: self.config.max_len, rng_seed: derive_seed(unit.seed, 0, STREAM_STRINGS) };
        let counts = self.config.strings_per_regex;
        let valid = generate_valid_strings(&compiled.ast, &compiled.nfa, &compiled.dfa, counts.valid, &sb);
        let pool: Vec<Vec<u8>> = valid.bytes().map(<[u8]>::to_vec).collect();
        let invalid = generate_invalid_strings(&compiled.nfa, &compiled.dfa, &pool, counts.invalid, &sb);

        let mut labelled = Vec::new();
        let (mut vi, mut ii) = (valid.strings.iter(), invalid.strings.iter());
        loop {
            let v = vi.next().map(|s| (s.bytes.clone(), InputLabel::ExpectedValid));
            let i = ii.next().map(|s| (s.bytes.clone(), InputLabel::ExpectedInvalid));
            if v.is_none() && i.is_none() {
                break;
            }
            labelled.extend(v);
            labelled.extend(i);
        }
        for (k, (s, label)) in labelled.into_iter().enumerate() {
            if stop.load(Ordering::Relaxed) {
                break;
            }
            let probe = k < self.config.probe.strings_per_regex;
            let seed = derive_seed(unit.seed, k as u64, STREAM_PROBE);
            result.pairs.push(self.run_pair(unit, &compiled, &s, label, probe, seed));
        }
        result
    }

    fn run_pair(
        &mut self,
        unit: &Unit,
        compiled: &CompiledRegex,
        s: &[u8],
        label: InputLabel,
        probe: bool,
        probe_seed: u64,
    ) -> PairResult {
        let mut out = PairResult::default();
        if compiled.dfa.accepts(s) != nfa_match(&compiled.nfa, s) {
            log::error!("automata disagree on {:?} for {:?}", String::from_utf8_lossy(s), compiled.pattern);
            out.disagreements += 1;
        }
        out.coverage.record_run(&compiled.pattern, &compiled.dfa, s);
        let Some(cached) = self.circuit(compiled, s.len(), &mut out.compiled) else {
            out.errors += 1;
            return out;
        };
        let reference = match self.reference.matches(&compiled.pattern, &compiled.nfa, s) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("reference query failed: {e}");
                out.errors += 1;
                None
            }
        };
        let inputs = string_inputs(s, self.modulus);
        let run = honest_run(&cached.circuit, &inputs);
        out.witnesses += u64::from(run.witness.is_some());
        out.mock_proofs += u64::from(run.witness.is_some());
        if let Some(w) = &run.witness {
            out.coverage.record_witness(&cached.hash, &cached.circuit, &w.values);
        }
        let reference_outputs = reference.map(|v| BTreeMap::from([("accept".to_string(), u8::from(v).to_string())]));
        let obs = Observation {
            circuit_hash: cached.hash.clone(),
            regex: Some(compiled.pattern.clone()),
            string: Some(s.to_vec()),
            input_length: Some(s.len()),
            injection: cached.injection_tag.clone(),
            seed: unit.seed,
            iteration: unit.iteration,
            label: Some(label),
            inputs: BTreeMap::new(),
            witness_error: run.error.clone(),
            violations: run.violations.clone(),
            outputs: run.outputs.clone(),
            reference: reference_outputs.clone(),
            findings: Vec::new(),
        };
        let context = ReplayContext::Regex {
            alphabet: self.config.alphabet,
            modulus: self.config.modulus.clone(),
            max_dfa_states: self.config.max_dfa_states,
            max_len: self.config.max_len,
            label,
            reference_verdict: reference,
        };
        let emit = |obs: &Observation, out: &mut PairResult| match classify(obs) {
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

        let clean = run.witness.is_some() && run.violations.is_empty();
        if probe && clean && self.config.probe.iterations > 0 {
            let honest = run.witness.as_ref().expect("clean run has a witness");
            let reference_fe = reference_outputs.as_ref().map(|r| {
                r.iter().map(|(k, v)| (k.clone(), self.modulus.parse(v).expect("decimal"))).collect()
            });
            let budget = ProbeBudget { iterations: self.config.probe.iterations, rng_seed: probe_seed };
            let probe = soundness_probe(
                &cached.circuit,
                honest,
                &inputs,
                budget,
                &self.config.probe.weights,
                reference_fe.as_ref(),
            );
            out.probe_mutations += probe.mutations;
            out.mock_proofs += probe.mock_proofs;
            for f in probe.findings {
                let forged = Observation { findings: vec![f], ..obs.clone() };
                emit(&forged, &mut out);
            }
        }
        out
    }
}

struct Planner<'g> {
    seed: u64,
    corpus: Vec<String>,
    grammar: &'g Grammar,
    depth: u32,
    max_regex_len: usize,
    requeue_probability: f64,
    /// Regexes that raised coverage, with weight 1 + new flags.
    requeue: Vec<(String, f64)>,
}

impl<'g> Planner<'g> {
    fn unit(&self, iteration: u64) -> Unit {
        let seed = derive_seed(self.seed, iteration, 0);
        if let Some(p) = self.corpus.get(iteration as usize) {
            return Unit { iteration, pattern: p.clone(), seed };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, iteration, STREAM_REGEX));
        if !self.requeue.is_empty() && rng.gen_bool(self.requeue_probability) {
            let total: f64 = self.requeue.iter().map(|(_, w)| w).sum();
            let mut x = rng.gen::<f64>() * total;
            for (p, w) in &self.requeue {
                if x < *w {
                    return Unit { iteration, pattern: p.clone(), seed };
                }
                x -= w;
            }
        }
        let pattern = generate_regex_with(self.grammar, self.depth, self.max_regex_len, &mut rng);
        Unit { iteration, pattern, seed }
    }

    fn feedback(&mut self, pattern: &str, new_flags: usize) {
        if new_flags == 0 {
            return;
        }
        let w = 1.0 + new_flags as f64;
        match self.requeue.iter_mut().find(|(p, _)| p == pattern) {
            Some(entry) => entry.1 = w,
            None => self.requeue.push((pattern.to_string(), w)),
        }
    }
}

/// Runs a regex campaign to budget exhaustion, `stop_on`, or interrupt.
///
/// Units are dispatched in fixed-size batches and their results folded in
/// iteration order, so the report sequence depends only on the config, not on
/// the number of workers or their timing (time budgets and interrupts aside).
pub fn run_regex_campaign(config: &CampaignConfig, control: &mut CampaignControl<'_>) -> Result<CampaignOutcome, ConfigError> {
    config.validate()?;
    let started = Instant::now();
    let alphabet = config.alphabet()?;
    let modulus = config.field()?;
    let injection = config.bug_injection()?;
    let grammar = config.load_grammar()?.restricted_to(alphabet).map_err(|e| {
        ConfigError::Invalid(format!("grammar has no derivations over the alphabet: {e}"))
    })?;
    let corpus = match &config.corpus {
        None => Vec::new(),
        Some(p) => load_seed_corpus(p, alphabet)
            .map_err(|source| ConfigError::Read { path: p.clone(), source })?
            .patterns,
    };
    let mut references = Vec::with_capacity(config.workers);
    for _ in 0..config.workers {
        references.push(make_reference(&config.reference).map_err(|e| ConfigError::Invalid(e.to_string()))?);
    }

    let mut planner = Planner {
        seed: config.seed,
        corpus,
        grammar: &grammar,
        depth: config.regex_max_depth,
        max_regex_len: config.regex_max_len,
        requeue_probability: config.requeue_probability,
        requeue: Vec::new(),
    };
    let mut outcome = CampaignOutcome::default();
    outcome.stats.seed = config.seed;
    outcome.stats.rng = config.rng.clone();
    let mut sink = ReportSink::default();
    let deadline = config.budget.seconds.map(|s| started + Duration::from_secs_f64(s));
    let flush_every = Duration::from_secs_f64(config.flush_interval_seconds.max(0.1));
    let mut last_flush = Instant::now();
    let stop = control.stop.clone();

    let (job_tx, job_rx) = crossbeam_channel::unbounded::<Unit>();
    let (res_tx, res_rx) = crossbeam_channel::unbounded::<UnitResult>();

    std::thread::scope(|scope| {
        for reference in references {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            let stop = stop.clone();
            let mut worker =
                Worker { config, alphabet, modulus, injection, reference, cache: HashMap::new() };
            scope.spawn(move || {
                for unit in job_rx {
                    if res_tx.send(worker.run_unit(&unit, &stop)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(res_tx);

        let mut next = 0u64;
        let mut done = false;
        while !done {
            let remaining = config.budget.iterations.map_or(u64::MAX, |n| n - next);
            if remaining == 0 || control.stopped() {
                break;
            }
            let batch: Vec<Unit> =
                (0..(config.batch_size as u64).min(remaining)).map(|k| planner.unit(next + k)).collect();
            next += batch.len() as u64;
            let size = batch.len();
            for u in batch {
                job_tx.send(u).expect("workers alive");
            }
            let mut results: Vec<UnitResult> = Vec::with_capacity(size);
            while results.len() < size {
                match res_rx.recv_timeout(Duration::from_millis(200)) {
                    Ok(r) => results.push(r),
                    Err(crossbeam_channel::RecvTimeoutError::Timeout) => {
                        if deadline.is_some_and(|d| Instant::now() >= d) {
                            stop.store(true, Ordering::Relaxed);
                        }
                    }
                    Err(crossbeam_channel::RecvTimeoutError::Disconnected) => break,
                }
            }
            results.sort_by_key(|r| r.iteration);
            for r in results {
                let before = outcome.coverage.flag_count();
                let stats = &mut outcome.stats;
                stats.iterations += 1;
                stats.regexes_skipped += u64::from(r.skipped);
                for pair in r.pairs {
                    if config.budget.pairs.is_some_and(|n| stats.pairs >= n) {
                        done = true;
                        break;
                    }
                    stats.pairs += 1;
                    stats.circuits_compiled += pair.compiled;
                    stats.witnesses_generated += pair.witnesses;
                    stats.mock_proofs += pair.mock_proofs;
                    stats.probe_mutations += pair.probe_mutations;
                    stats.errors += pair.errors;
                    stats.engine_disagreements += pair.disagreements;
                    outcome.coverage.absorb(&pair.coverage).expect("one shape per circuit hash");
                    for (report, record) in pair.reports {
                        let category = report.category;
                        sink.push(report, record);
                        if config.stop_on == Some(category) {
                            done = true;
                        }
                    }
                }
                planner.feedback(&r.pattern, outcome.coverage.flag_count() - before);
                if done || config.budget.pairs.is_some_and(|n| outcome.stats.pairs >= n) {
                    done = true;
                    break;
                }
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                done = true;
            }
            if done || control.stopped() || last_flush.elapsed() >= flush_every {
                outcome.stats.coverage = outcome.coverage.summary();
                outcome.stats.wall_time_seconds = started.elapsed().as_secs_f64();
                sink.fill(&mut outcome);
                control.flush(&outcome);
                last_flush = Instant::now();
            }
        }
        drop(job_tx);
    });

    outcome.stats.coverage = outcome.coverage.summary();
    outcome.stats.wall_time_seconds = started.elapsed().as_secs_f64();
    sink.fill(&mut outcome);
    Ok(outcome)
}
