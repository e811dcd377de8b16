//! DFA to circuit compiler, specialized to one input length.
//!
//! Encoding, for input length `n` and DFA states `Q`:
//!
//! * `s[i][q]` one-hot state vectors for `i in 0..=n`, initialized by `<==`
//!   constants, each entry boolean, each row summing to one.
//! * per position, an IsZero indicator `eq[i][b]` for every alphabet byte, with
//!   `Σ_b eq[i][b] === 1` binding `char[i]` to the alphabet.
//! * per DFA edge `q -B-> q'`, a firing signal
//!   `t[i][q][q'] <== s[i][q] * Σ_{b in B} eq[i][b]` and the implication
//!   `t * (1 - s[i+1][q']) === 0`.
//! * `accept <== Σ_{q in F} s[n][q]`.
//!
//! The witness program advances states with hints (`<--`): every state but a
//! designated fallback sums its incoming firing signals, and the fallback takes
//! whatever mass remains. Booleanity, one-hot and implication constraints are
//! each load-bearing, so removing any one of them is exploitable.

mod inject;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, CircuitError, Expr, SignalId};
use crate::field::FieldModulus;
use crate::regex::{describe_bytes, ByteSet, Dfa};

pub use inject::{inject_bug, BugInjection, InjectionInfo, InjectionKind};

pub const DEFAULT_MAX_INPUT_LEN: usize = 64;
pub const DEFAULT_MAX_DFA_STATES: usize = 64;

#[derive(Debug, Error)]
pub enum TranspileError {
    #[error("input length {n} exceeds the cap of {max}")]
    InputTooLong { n: usize, max: usize },
    #[error("DFA has {states} states, over the cap of {max}")]
    TooManyStates { states: usize, max: usize },
    #[error("unknown injection {0:?}")]
    BadInjection(String),
    #[error("no eligible site for {0} in this circuit")]
    NoEligibleSite(InjectionKind),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranspileLimits {
    pub max_input_len: usize,
    pub max_dfa_states: usize,
}

impl Default for TranspileLimits {
    fn default() -> Self {
        TranspileLimits {
            max_input_len: DEFAULT_MAX_INPUT_LEN,
            max_dfa_states: DEFAULT_MAX_DFA_STATES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TranspileSpec<'a> {
    pub dfa: &'a Dfa,
    pub input_length: usize,
    /// Source pattern, recorded in metadata only.
    pub source: Option<&'a str>,
    pub limits: TranspileLimits,
}

impl<'a> TranspileSpec<'a> {
    pub fn new(dfa: &'a Dfa, input_length: usize) -> Self {
        TranspileSpec { dfa, input_length, source: None, limits: TranspileLimits::default() }
    }

    pub fn with_source(mut self, source: &'a str) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_limits(mut self, limits: TranspileLimits) -> Self {
        self.limits = limits;
        self
    }
}

/// The state that absorbs leftover mass in the witness program: the dead state
/// if there is one, otherwise the highest-numbered state.
pub fn fallback_state(dfa: &Dfa) -> usize {
    dfa.dead_state().unwrap_or(dfa.num_states() - 1)
}

pub fn state_signal_name(i: usize, q: usize) -> String {
    format!("s[{i}][q{q}]")
}

pub fn eq_signal_name(i: usize, b: u8) -> String {
    format!("eq[{i}][x{b:02x}]")
}

pub fn fire_signal_name(i: usize, q: usize, to: usize) -> String {
    format!("t[{i}][q{q}][q{to}]")
}

pub fn booleanity_label(i: usize, q: usize) -> String {
    format!("bool {}", state_signal_name(i, q))
}

pub fn fire_label(i: usize, q: usize, to: usize, bytes: &ByteSet) -> String {
    format!("edge q{q} -{}-> q{to} @ {i}", describe_bytes(bytes))
}

pub fn implication_label(i: usize, q: usize, to: usize) -> String {
    format!("step q{q} -> q{to} @ {i}")
}

pub fn accept_label(dfa: &Dfa) -> String {
    let terms: Vec<String> = dfa
        .accepting_states()
        .iter()
        .map(|q| format!("q{q}"))
        .collect();
    format!("accept <== final in {{{}}}", terms.join(","))
}

/// Constraint count implied by the encoding: init, booleanity and one-hot per
/// step, two per IsZero gadget plus the range sum per position, two per edge
/// per position, and the accept wiring.
pub fn expected_constraint_count(dfa: &Dfa, n: usize) -> usize {
    let q = dfa.num_states();
    let sigma = dfa.alphabet().size();
    let edges: usize = (0..q).map(|s| dfa.edges(s).len()).sum();
    q + (n + 1) * (q + 1) + n * (2 * sigma + 1 + 2 * edges) + 1
}

pub fn transpile(spec: &TranspileSpec<'_>, modulus: FieldModulus) -> Result<Circuit, TranspileError> {
    let dfa = spec.dfa;
    let n = spec.input_length;
    if n > spec.limits.max_input_len {
        return Err(TranspileError::InputTooLong { n, max: spec.limits.max_input_len });
    }
    if dfa.num_states() > spec.limits.max_dfa_states {
        return Err(TranspileError::TooManyStates {
            states: dfa.num_states(),
            max: spec.limits.max_dfa_states,
        });
    }
    let alphabet = dfa.alphabet();
    let states = dfa.num_states();
    let fallback = fallback_state(dfa);
    let edges: Vec<Vec<(usize, ByteSet)>> = (0..states).map(|q| dfa.edges(q)).collect();
    let mut b = CircuitBuilder::new(modulus);
    let one = || Expr::Const(modulus.one());

    let chars: Vec<SignalId> =
        (0..n).map(|i| b.public_input(&format!("char[{i}]"))).collect::<Result<_, _>>()?;
    let accept = b.public_output("accept")?;

    let mut s: Vec<Vec<SignalId>> = Vec::with_capacity(n + 1);
    s.push((0..states).map(|q| b.internal(&state_signal_name(0, q))).collect::<Result<_, _>>()?);
    for q in 0..states {
        let v = u64::from(q == dfa.start());
        b.assign_constrain(s[0][q], b.constant(v), &format!("init {} = {v}", state_signal_name(0, q)))?;
    }

    for i in 0..=n {
        for q in 0..states {
            let x = Expr::sig(s[i][q]);
            b.constrain(x.clone().mul(x.sub(one())), Expr::Const(modulus.zero()), &booleanity_label(i, q))?;
        }
        b.constrain(
            Expr::sum(s[i].iter().map(|x| Expr::sig(*x))),
            one(),
            &format!("onehot s[{i}]"),
        )?;
        if i == n {
            break;
        }

        let mut eq = Vec::with_capacity(alphabet.size());
        for byte in alphabet.bytes() {
            let diff = Expr::sig(chars[i]).sub(b.constant(byte as u64));
            eq.push(b.is_zero(diff, &eq_signal_name(i, byte))?);
        }
        b.constrain(Expr::sum(eq.iter().map(|e| Expr::sig(*e))), one(), &format!("range char[{i}]"))?;
        let indicator = |bytes: &ByteSet| {
            Expr::sum(bytes.iter().map(|byte| Expr::sig(eq[alphabet.index(byte).unwrap()])))
        };

        let mut incoming: Vec<Vec<SignalId>> = vec![Vec::new(); states];
        let mut fired = Vec::new();
        for (q, out) in edges.iter().enumerate() {
            for (to, bytes) in out {
                let t = b.internal(&fire_signal_name(i, q, *to))?;
                b.assign_constrain(t, Expr::sig(s[i][q]).mul(indicator(bytes)), &fire_label(i, q, *to, bytes))?;
                incoming[*to].push(t);
                fired.push((q, *to, t));
            }
        }

        let next: Vec<SignalId> =
            (0..states).map(|q| b.internal(&state_signal_name(i + 1, q))).collect::<Result<_, _>>()?;
        for q in (0..states).filter(|&q| q != fallback) {
            b.assign(next[q], Expr::sum(incoming[q].iter().map(|t| Expr::sig(*t))))?;
        }
        let others = Expr::sum((0..states).filter(|&q| q != fallback).map(|q| Expr::sig(next[q])));
        b.assign(next[fallback], one().sub(others))?;

        for (q, to, t) in fired {
            b.constrain(
                Expr::sig(t).mul(one().sub(Expr::sig(next[to]))),
                Expr::Const(modulus.zero()),
                &implication_label(i, q, to),
            )?;
        }
        s.push(next);
    }

    b.assign_constrain(
        accept,
        Expr::sum(dfa.accepting_states().iter().map(|q| Expr::sig(s[n][*q]))),
        &accept_label(dfa),
    )?;

    if let Some(src) = spec.source {
        b.set_metadata("regex", json!(src));
    }
    b.set_metadata("input_length", json!(n));
    b.set_metadata("alphabet", json!([alphabet.lo, alphabet.hi]));
    b.set_metadata("dfa_states", json!(states));
    b.set_metadata("dfa_start", json!(dfa.start()));
    b.set_metadata("dfa_accepting", json!(dfa.accepting_states()));
    b.set_metadata("fallback_state", json!(fallback));
    Ok(b.build()?)
}

/// Public inputs for `input` on a transpiled circuit.
pub fn string_inputs(
    input: &[u8],
    modulus: FieldModulus,
) -> std::collections::BTreeMap<String, crate::field::FieldElement> {
    input
        .iter()
        .enumerate()
        .map(|(i, b)| (format!("char[{i}]"), modulus.from_u64(*b as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_witness, mock_prove};
    use crate::regex::{build_nfa, determinize, minimize, nfa_match, parse_regex, Alphabet, DEFAULT_STATE_CAP};

    pub(crate) fn dfa_of(pat: &str, a: Alphabet) -> Dfa {
        minimize(&determinize(&build_nfa(&parse_regex(pat, a).unwrap(), a), DEFAULT_STATE_CAP).unwrap())
    }

    fn field() -> FieldModulus {
        FieldModulus::from_decimal(
            "21888242871839275222246405745257275088548364400416034343698204186575808495617",
            "bn254",
        )
        .unwrap()
    }

    fn run(c: &Circuit, input: &[u8]) -> (bool, bool) {
        let m = c.modulus;
        let w = generate_witness(c, &string_inputs(input, m)).unwrap();
        let acc = w.get(c.signal_by_name("accept").unwrap());
        assert!(acc.is_zero() || acc.is_one());
        (acc.is_one(), mock_prove(c, &w).is_satisfied())
    }

    #[test]
    fn single_literal_length_one() {
        let a = Alphabet::default();
        let d = dfa_of("a", a);
        assert_eq!(d.num_states(), 3);
        let c = transpile(&TranspileSpec::new(&d, 1), field()).unwrap();
        assert_eq!(run(&c, b"a"), (true, true));
        assert_eq!(run(&c, b"b"), (false, true));
        for byte in a.bytes() {
            assert_eq!(run(&c, &[byte]), (byte == b'a', true), "byte {byte:#x}");
        }
    }

    #[test]
    fn ab_star_c_agrees_with_reference() {
        let a = Alphabet::default();
        let pat = "ab*c";
        let nfa = build_nfa(&parse_regex(pat, a).unwrap(), a);
        let d = dfa_of(pat, a);
        let c = transpile(&TranspileSpec::new(&d, 3).with_source(pat), field()).unwrap();
        assert_eq!(run(&c, b"abc"), (true, true));
        for s in [b"abb", b"acc", b"bbc", b"a c", b"zzz"] {
            assert_eq!(run(&c, s), (nfa_match(&nfa, s), true));
        }
        assert_eq!(c.metadata["regex"], json!(pat));
    }

    #[test]
    fn constraint_count_matches_closed_form() {
        let a = Alphabet::new(b'a', b'e').unwrap();
        for (pat, n) in [("a", 0), ("a", 1), ("ab*c", 4), ("(a|b)*[c-e]", 3), ("[^a]+", 2), ("", 2)] {
            let d = dfa_of(pat, a);
            let c = transpile(&TranspileSpec::new(&d, n), field()).unwrap();
            assert_eq!(c.constraints.len(), expected_constraint_count(&d, n), "{pat} n={n}");
        }
    }

    #[test]
    fn out_of_alphabet_char_is_unprovable() {
        let a = Alphabet::new(b'a', b'c').unwrap();
        let d = dfa_of("a", a);
        let c = transpile(&TranspileSpec::new(&d, 1), field()).unwrap();
        assert_eq!(run(&c, b"z"), (false, false));
    }

    #[test]
    fn limits_are_enforced() {
        let d = dfa_of("a*", Alphabet::default());
        let limits = TranspileLimits { max_input_len: 4, max_dfa_states: 64 };
        assert!(matches!(
            transpile(&TranspileSpec::new(&d, 5).with_limits(limits), field()),
            Err(TranspileError::InputTooLong { n: 5, max: 4 })
        ));
        let limits = TranspileLimits { max_input_len: 4, max_dfa_states: 0 };
        assert!(matches!(
            transpile(&TranspileSpec::new(&d, 1).with_limits(limits), field()),
            Err(TranspileError::TooManyStates { .. })
        ));
    }

    #[test]
    fn small_field_works_too() {
        let a = Alphabet::new(b'a', b'd').unwrap();
        let d = dfa_of("(ab|c)*d", a);
        let m = FieldModulus::from_decimal("65521", "p65521").unwrap();
        let c = transpile(&TranspileSpec::new(&d, 4), m).unwrap();
        assert_eq!(run(&c, b"abcd"), (true, true));
        assert_eq!(run(&c, b"abca"), (false, true));
    }
}
