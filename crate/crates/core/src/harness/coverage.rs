//! Constraint coverage: for every constraint of every circuit seen, whether
//! each of its three linear combinations has evaluated to zero and to nonzero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{evaluate_constraint, Circuit};
use crate::field::FieldElement;
use crate::regex::Dfa;

const SEEN_ZERO: u8 = 1;
const SEEN_NONZERO: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("coverage for circuit {hash} has {left} and {right} slots")]
pub struct MergeError {
    pub hash: String,
    pub left: usize,
    pub right: usize,
}

/// Flags per (constraint, linear combination), three slots per constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitCoverage {
    pub flags: Vec<u8>,
}

impl CircuitCoverage {
    pub fn empty(constraints: usize) -> Self {
        CircuitCoverage { flags: vec![0; 3 * constraints] }
    }

    pub fn record(&mut self, circuit: &Circuit, values: &[FieldElement]) {
        for (i, c) in circuit.constraints.iter().enumerate() {
            let (a, b, cc) = evaluate_constraint(c, values);
            for (k, v) in [a, b, cc].into_iter().enumerate() {
                self.flags[3 * i + k] |= if v.is_zero() { SEEN_ZERO } else { SEEN_NONZERO };
            }
        }
    }

    /// Slots that have seen both a zero and a nonzero value.
    pub fn covered(&self) -> usize {
        self.flags.iter().filter(|f| **f == SEEN_ZERO | SEEN_NONZERO).count()
    }

    pub fn flag_count(&self) -> usize {
        self.flags.iter().map(|f| f.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CoverageSummary {
    pub circuits: usize,
    pub slots: usize,
    pub covered_slots: usize,
    pub fraction: f64,
    pub flags_set: usize,
    pub transitions_hit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageMap {
    /// Keyed by circuit hash.
    pub circuits: BTreeMap<String, CircuitCoverage>,
    /// Regex pattern to hit counts per DFA edge `(from, to)`.
    pub transitions: BTreeMap<String, BTreeMap<(usize, usize), u64>>,
}

impl CoverageMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_witness(&mut self, hash: &str, circuit: &Circuit, values: &[FieldElement]) {
        self.circuits
            .entry(hash.to_string())
            .or_insert_with(|| CircuitCoverage::empty(circuit.constraints.len()))
            .record(circuit, values);
    }

    pub fn record_run(&mut self, pattern: &str, dfa: &Dfa, input: &[u8]) {
        let hits = self.transitions.entry(pattern.to_string()).or_default();
        let mut q = dfa.start();
        for b in input {
            let Some(next) = dfa.next(q, *b) else { break };
            *hits.entry((q, next)).or_default() += 1;
            q = next;
        }
    }

    pub fn flag_count(&self) -> usize {
        self.circuits.values().map(CircuitCoverage::flag_count).sum()
    }

    pub fn summary(&self) -> CoverageSummary {
        let slots: usize = self.circuits.values().map(|c| c.flags.len()).sum();
        let covered: usize = self.circuits.values().map(CircuitCoverage::covered).sum();
        CoverageSummary {
            circuits: self.circuits.len(),
            slots,
            covered_slots: covered,
            fraction: if slots == 0 { 0.0 } else { covered as f64 / slots as f64 },
            flags_set: self.flag_count(),
            transitions_hit: self.transitions.values().map(BTreeMap::len).sum(),
        }
    }

    /// In-place union; fails if a circuit hash maps to different shapes.
    pub fn absorb(&mut self, other: &CoverageMap) -> Result<(), MergeError> {
        for (hash, cov) in &other.circuits {
            match self.circuits.get_mut(hash) {
                Some(mine) => {
                    if mine.flags.len() != cov.flags.len() {
                        return Err(MergeError { hash: hash.clone(), left: mine.flags.len(), right: cov.flags.len() });
                    }
                    for (a, b) in mine.flags.iter_mut().zip(&cov.flags) {
                        *a |= *b;
                    }
                }
                None => {
                    self.circuits.insert(hash.clone(), cov.clone());
                }
            }
        }
        for (pattern, hits) in &other.transitions {
            let mine = self.transitions.entry(pattern.clone()).or_default();
            for (edge, n) in hits {
                *mine.entry(*edge).or_default() += n;
            }
        }
        Ok(())
    }
}

/// Field-wise OR of flags and sum of hit counts.
pub fn coverage_merge(a: &CoverageMap, b: &CoverageMap) -> Result<CoverageMap, MergeError> {
    let mut out = a.clone();
    out.absorb(b)?;
    Ok(out)
}

/// JSON shape with string keys, for `coverage.json`.
pub fn coverage_to_json(map: &CoverageMap) -> serde_json::Value {
    let circuits: serde_json::Map<String, serde_json::Value> = map
        .circuits
        .iter()
        .map(|(h, c)| {
            (
                h.clone(),
                serde_json::json!({
                    "slots": c.flags.len(),
                    "covered": c.covered(),
                    "flags": hex::encode(&c.flags),
                }),
            )
        })
        .collect();
    let transitions: serde_json::Map<String, serde_json::Value> = map
        .transitions
        .iter()
        .map(|(p, hits)| {
            let rows: Vec<[u64; 3]> = hits.iter().map(|((f, t), n)| [*f as u64, *t as u64, *n]).collect();
            (p.clone(), serde_json::json!(rows))
        })
        .collect();
    serde_json::json!({ "summary": map.summary(), "circuits": circuits, "transitions": transitions })
}
