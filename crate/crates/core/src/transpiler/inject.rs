//! Controlled single-edit bugs in transpiled circuits, used to measure whether
//! the fuzzer finds what it should.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    accept_label, booleanity_label, fallback_state, fire_label, fire_signal_name, implication_label,
    state_signal_name, transpile, TranspileError, TranspileSpec,
};
use crate::circuit::{Circuit, Expr, InstructionKind, LinearCombination};
use crate::field::FieldModulus;
use crate::oracle::BugCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    DropBooleanity,
    DropTransition,
    FlipAcceptState,
    ClassOffByOne,
    HintUnconstrained,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 5] = [
        InjectionKind::DropBooleanity,
        InjectionKind::DropTransition,
        InjectionKind::FlipAcceptState,
        InjectionKind::ClassOffByOne,
        InjectionKind::HintUnconstrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InjectionKind::DropBooleanity => "drop_booleanity",
            InjectionKind::DropTransition => "drop_transition",
            InjectionKind::FlipAcceptState => "flip_accept_state",
            InjectionKind::ClassOffByOne => "class_off_by_one",
            InjectionKind::HintUnconstrained => "hint_unconstrained",
        }
    }

    /// Category a correct fuzzer should report for this edit. Flipping an
    /// accepting state edits program and constraint together, so the honest
    /// run stays provable but computes the wrong verdict. Class shrinking edits
    /// the constraint only, so honest runs that use the lost byte fail.
    pub fn expected_category(self) -> BugCategory {
        match self {
            InjectionKind::DropBooleanity
            | InjectionKind::DropTransition
            | InjectionKind::HintUnconstrained => BugCategory::Soundness,
            InjectionKind::FlipAcceptState => BugCategory::Correctness,
            InjectionKind::ClassOffByOne => BugCategory::Completeness,
        }
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InjectionKind {
    type Err = TranspileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        InjectionKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| TranspileError::BadInjection(s.to_string()))
    }
}

/// `kind:site`. The site is a selector, hashed onto whichever candidates
/// exist in a given circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BugInjection {
    pub kind: InjectionKind,
    pub site: u64,
}

impl fmt::Display for BugInjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.site)
    }
}

impl FromStr for BugInjection {
    type Err = TranspileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, site) = match s.split_once(':') {
            Some((k, site)) => (
                k,
                site.parse().map_err(|_| TranspileError::BadInjection(s.to_string()))?,
            ),
            None => (s, 0),
        };
        Ok(BugInjection { kind: kind.parse()?, site })
    }
}

/// What an injection actually touched in one circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionInfo {
    pub kind: InjectionKind,
    pub site: u64,
    pub expected_category: BugCategory,
    /// Label of the edited (or removed) constraint.
    pub constraint_label: String,
    /// Signal most directly affected by the edit.
    pub signal: String,
    pub detail: String,
}

impl InjectionInfo {
    pub fn tag(&self) -> String {
        format!("{}:{}", self.kind, self.site)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn pick<T: Clone>(preferred: &[T], fallback: &[T], site: u64, kind: InjectionKind) -> Result<T, TranspileError> {
    let pool = if preferred.is_empty() { fallback } else { preferred };
    if pool.is_empty() {
        return Err(TranspileError::NoEligibleSite(kind));
    }
    Ok(pool[(splitmix64(site) % pool.len() as u64) as usize].clone())
}

fn constraint_by_label(c: &Circuit, label: &str) -> usize {
    c.constraints
        .iter()
        .position(|k| k.label == label)
        .unwrap_or_else(|| panic!("transpiler emitted no constraint {label:?}"))
}

/// Removes constraint `ci` and, if it came from a `===` statement, that
/// statement too, keeping later origins aligned.
fn remove_constraint(c: &mut Circuit, ci: usize) {
    let removed = c.constraints.remove(ci);
    if let Some(origin) = removed.origin {
        if c.program[origin].kind == InstructionKind::Constrain {
            c.program.remove(origin);
            for k in &mut c.constraints {
                if let Some(o) = k.origin.as_mut() {
                    if *o > origin {
                        *o -= 1;
                    }
                }
            }
        }
    }
}

pub fn inject_bug(
    spec: &TranspileSpec<'_>,
    injection: BugInjection,
    modulus: FieldModulus,
) -> Result<(Circuit, InjectionInfo), TranspileError> {
    let mut circuit = transpile(spec, modulus)?;
    let dfa = spec.dfa;
    let n = spec.input_length;
    let states = dfa.num_states();
    let reach = dfa.reachable_in_exactly(n);
    let live = dfa.accepts_within_exactly(n);
    let fallback = fallback_state(dfa);
    let kind = injection.kind;

    // Every (position, from, to, bytes) edge instance, and the live subset:
    // `from` reachable at `i` and `to` still able to accept in the steps left.
    let mut all_edges = Vec::new();
    let mut live_edges = Vec::new();
    for i in 0..n {
        for q in 0..states {
            for (to, bytes) in dfa.edges(q) {
                all_edges.push((i, q, to, bytes));
                if reach[i][q] && live[n - i - 1][to] {
                    live_edges.push((i, q, to, bytes));
                }
            }
        }
    }

    let info = match kind {
        InjectionKind::DropBooleanity => {
            let mut candidates: Vec<usize> = dfa.accepting_states();
            candidates.push(fallback);
            candidates.sort_unstable();
            candidates.dedup();
            let q = pick(&candidates, &[], injection.site, kind)?;
            let label = booleanity_label(n, q);
            let ci = constraint_by_label(&circuit, &label);
            remove_constraint(&mut circuit, ci);
            InjectionInfo {
                kind,
                site: injection.site,
                expected_category: kind.expected_category(),
                constraint_label: label,
                signal: state_signal_name(n, q),
                detail: format!("removed booleanity of final state q{q}"),
            }
        }
        InjectionKind::DropTransition => {
            let (i, q, to, _) = pick(&live_edges, &all_edges, injection.site, kind)?;
            let label = implication_label(i, q, to);
            let ci = constraint_by_label(&circuit, &label);
            remove_constraint(&mut circuit, ci);
            InjectionInfo {
                kind,
                site: injection.site,
                expected_category: kind.expected_category(),
                constraint_label: label,
                signal: state_signal_name(i + 1, to),
                detail: format!("removed transition q{q} -> q{to} at position {i}"),
            }
        }
        InjectionKind::HintUnconstrained => {
            let mut candidates = vec![None];
            candidates.extend(live_edges.iter().map(|e| Some(e.clone())));
            let chosen = pick(&candidates, &[], injection.site, kind)?;
            let (signal, label) = match &chosen {
                None => ("accept".to_string(), accept_label(dfa)),
                Some((i, q, to, bytes)) => (fire_signal_name(*i, *q, *to), fire_label(*i, *q, *to, bytes)),
            };
            let ci = constraint_by_label(&circuit, &label);
            let origin = circuit.constraints[ci].origin.expect("assignment constraint has an origin");
            circuit.program[origin].kind = InstructionKind::Assign;
            circuit.constraints.remove(ci);
            InjectionInfo {
                kind,
                site: injection.site,
                expected_category: kind.expected_category(),
                constraint_label: label,
                signal: signal.clone(),
                detail: format!("{signal} computed with <-- and left unconstrained"),
            }
        }
        InjectionKind::FlipAcceptState => {
            let reachable: Vec<usize> = (0..states).filter(|&q| reach[n][q]).collect();
            let all: Vec<usize> = (0..states).collect();
            let q = pick(&reachable, &all, injection.site, kind)?;
            let mut accepting = dfa.accepting_states();
            let removing = accepting.contains(&q);
            if removing {
                accepting.retain(|x| *x != q);
            } else {
                accepting.push(q);
                accepting.sort_unstable();
            }
            let label = accept_label(dfa);
            let ci = constraint_by_label(&circuit, &label);
            let finals: Vec<_> = accepting
                .iter()
                .map(|x| circuit.signal_by_name(&state_signal_name(n, *x)).expect("state signal"))
                .collect();
            let accept = circuit.signal_by_name("accept").expect("accept signal");
            let origin = circuit.constraints[ci].origin.expect("accept constraint has an origin");
            circuit.program[origin].expr = Expr::sum(finals.iter().map(|s| Expr::sig(*s)));
            let k = &mut circuit.constraints[ci];
            k.a = LinearCombination::from_terms(finals.iter().map(|s| (*s, modulus.one())));
            k.b = LinearCombination::signal(crate::circuit::SignalId::ONE, modulus);
            k.c = LinearCombination::signal(accept, modulus);
            InjectionInfo {
                kind,
                site: injection.site,
                expected_category: kind.expected_category(),
                constraint_label: label,
                signal: "accept".into(),
                detail: format!(
                    "q{q} {} the accepting set",
                    if removing { "removed from" } else { "added to" }
                ),
            }
        }
        InjectionKind::ClassOffByOne => {
            let (i, q, to, bytes) = pick(&live_edges, &all_edges, injection.site, kind)?;
            let lost = bytes.last().expect("edges carry at least one byte");
            let label = fire_label(i, q, to, &bytes);
            let ci = constraint_by_label(&circuit, &label);
            let eq = circuit
                .signal_by_name(&super::eq_signal_name(i, lost))
                .expect("indicator signal");
            let k = &mut circuit.constraints[ci];
            k.a = k.a.without(eq);
            k.b = k.b.without(eq);
            let mut shrunk = bytes;
            shrunk.remove(lost);
            InjectionInfo {
                kind,
                site: injection.site,
                expected_category: kind.expected_category(),
                constraint_label: label,
                signal: fire_signal_name(i, q, to),
                detail: format!(
                    "constraint accepts {} instead of {}",
                    crate::regex::describe_bytes(&shrunk),
                    crate::regex::describe_bytes(&bytes)
                ),
            }
        }
    };
    circuit.metadata.insert("injection".into(), json!(info));
    circuit.validate()?;
    Ok((circuit, info))
}
