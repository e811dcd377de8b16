//! Rank-1 constraint systems paired with a straight-line witness program.
//!
//! A [`Circuit`] carries both halves of what a Circom-style compiler emits: the
//! constraint list checked by the (mock) prover and the ordered witness program
//! that computes an honest assignment. The two are deliberately kept separate so
//! that computation/constraint divergence can be expressed, which is exactly the
//! bug surface the fuzzer hunts for.

mod builder;
mod exec;
mod json;
mod prover;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldModulus};

pub use builder::CircuitBuilder;
pub use exec::{generate_witness, replay_program, ReplayOutcome};
pub use json::{circuit_from_json, circuit_to_json};
pub use prover::{evaluate_constraint, mock_prove, ConstraintIndex, MockResult, Violation};
pub(crate) use prover::residual;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("unknown signal index {0}")]
    UnknownSignal(usize),
    #[error("unknown signal name {0:?}")]
    UnknownSignalName(String),
    #[error("duplicate signal name {0:?}")]
    DuplicateName(String),
    #[error("signal indices must be dense and 0-based; found {found} at position {position}")]
    NonDenseSignals { position: usize, found: usize },
    #[error("signal 0 must be the constant-one signal")]
    MissingOneSignal,
    #[error("missing public input {0:?}")]
    MissingInput(String),
    #[error("{0:?} is not a public input of this circuit")]
    UnexpectedInput(String),
    #[error("instruction {instruction} reads {signal:?} before it is assigned")]
    UnassignedRead { instruction: usize, signal: String },
    #[error("signal {signal:?} assigned more than once (instruction {instruction})")]
    DoubleAssignment { instruction: usize, signal: String },
    #[error("signal {0:?} is never assigned by the witness program")]
    NeverAssigned(String),
    #[error("public input {0:?} cannot be the target of an instruction")]
    AssignsInput(String),
    #[error("instruction {0} has the wrong shape for its kind")]
    MalformedInstruction(usize),
    #[error("constraint expression {0:?} contains a division")]
    DivisionInConstraint(String),
    #[error("constraint {index} points at instruction {origin}, which does not exist")]
    BadOrigin { index: usize, origin: usize },
    #[error("witness has {found} values, circuit has {expected} signals")]
    WitnessLength { expected: usize, found: usize },
    #[error("circuit JSON parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("circuit JSON is invalid at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("embedded circuit hash {embedded} does not match content hash {computed}")]
    HashMismatch { embedded: String, computed: String },
}

/// Dense 0-based signal index. Index 0 is the constant-one signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignalId(pub u32);

impl SignalId {
    pub const ONE: SignalId = SignalId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalRole {
    PublicInput,
    PublicOutput,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signal {
    pub id: SignalId,
    pub name: String,
    pub role: SignalRole,
}

/// Sparse linear form over signals; at most one term per signal, never a zero
/// coefficient, terms sorted by signal index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearCombination {
    terms: Vec<(SignalId, FieldElement)>,
}

impl LinearCombination {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (SignalId, FieldElement)>) -> Self {
        let mut acc: BTreeMap<SignalId, FieldElement> = BTreeMap::new();
        for (s, c) in terms {
            match acc.get_mut(&s) {
                Some(existing) => *existing = *existing + c,
                None => {
                    acc.insert(s, c);
                }
            }
        }
        LinearCombination { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() }
    }

    pub fn signal(s: SignalId, m: FieldModulus) -> Self {
        Self::from_terms([(s, m.one())])
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::from_terms([(SignalId::ONE, c)])
    }

    pub fn terms(&self) -> &[(SignalId, FieldElement)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn scale(&self, k: FieldElement) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        LinearCombination { terms: self.terms.iter().map(|(s, c)| (*s, *c * k)).collect() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn minus(&self, other: &Self) -> Self {
        Self::from_terms(self.terms.iter().copied().chain(other.terms.iter().map(|(s, c)| (*s, -*c))))
    }

    /// Drops the term for `s`, if present.
    pub fn without(&self, s: SignalId) -> Self {
        LinearCombination { terms: self.terms.iter().filter(|(t, _)| *t != s).copied().collect() }
    }

    pub fn coefficient(&self, s: SignalId) -> Option<FieldElement> {
        self.terms.binary_search_by_key(&s, |(t, _)| *t).ok().map(|i| self.terms[i].1)
    }

    /// The constant value if this combination only mentions the one-signal.
    pub fn as_constant(&self, m: FieldModulus) -> Option<FieldElement> {
        match self.terms.as_slice() {
            [] => Some(m.zero()),
            [(SignalId::ONE, c)] => Some(*c),
            _ => None,
        }
    }

    #[inline]
    pub fn evaluate(&self, values: &[FieldElement]) -> FieldElement {
        let mut acc = values[0].modulus().zero();
        for (s, c) in &self.terms {
            acc = acc + *c * values[s.index()];
        }
        acc
    }

    pub fn signals(&self) -> impl Iterator<Item = SignalId> + '_ {
        self.terms.iter().map(|(s, _)| *s)
    }
}

/// `a * b - c = 0` over the witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub a: LinearCombination,
    pub b: LinearCombination,
    pub c: LinearCombination,
    pub label: String,
    /// Program instruction this constraint was lowered from, if any.
    pub origin: Option<usize>,
}

impl Constraint {
    pub fn signals(&self) -> impl Iterator<Item = SignalId> + '_ {
        self.a.signals().chain(self.b.signals()).chain(self.c.signals())
    }
}

/// Arithmetic expression over signals. `Div` is total: division by zero yields 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(FieldElement),
    Signal(SignalId),
    Add(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn sig(s: SignalId) -> Expr {
        Expr::Signal(s)
    }

    pub fn constant(c: FieldElement) -> Expr {
        Expr::Const(c)
    }

    pub fn sum(items: impl IntoIterator<Item = Expr>) -> Expr {
        Expr::Add(items.into_iter().collect())
    }

    pub fn add(self, other: Expr) -> Expr {
        Expr::Add(vec![self, other])
    }

    pub fn sub(self, other: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(other))
    }

    pub fn mul(self, other: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(other))
    }

    pub fn div(self, other: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(other))
    }

    pub fn from_lc(lc: &LinearCombination) -> Expr {
        Expr::Add(
            lc.terms()
                .iter()
                .map(|(s, c)| {
                    if *s == SignalId::ONE {
                        Expr::Const(*c)
                    } else if c.is_one() {
                        Expr::Signal(*s)
                    } else {
                        Expr::Const(*c).mul(Expr::Signal(*s))
                    }
                })
                .collect(),
        )
    }

    pub fn contains_div(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Signal(_) => false,
            Expr::Add(xs) => xs.iter().any(Expr::contains_div),
            Expr::Sub(a, b) | Expr::Mul(a, b) => a.contains_div() || b.contains_div(),
            Expr::Div(_, _) => true,
        }
    }

    pub fn visit_signals(&self, f: &mut impl FnMut(SignalId)) {
        match self {
            Expr::Const(_) => {}
            Expr::Signal(s) => f(*s),
            Expr::Add(xs) => xs.iter().for_each(|x| x.visit_signals(f)),
            Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_signals(f);
                b.visit_signals(f);
            }
        }
    }

    pub fn signals(&self) -> Vec<SignalId> {
        let mut out = Vec::new();
        self.visit_signals(&mut |s| out.push(s));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionKind {
    /// `<--`: computes, adds no constraint.
    Assign,
    /// `<==`: computes and adds the equality constraint.
    AssignAndConstrain,
    /// `===`: adds a constraint, computes nothing. The expression must equal zero.
    Constrain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub kind: InstructionKind,
    pub target: Option<SignalId>,
    pub expr: Expr,
}

impl Instruction {
    pub fn computes(&self) -> bool {
        !matches!(self.kind, InstructionKind::Constrain)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub modulus: FieldModulus,
    pub signals: Vec<Signal>,
    pub constraints: Vec<Constraint>,
    pub program: Vec<Instruction>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintEvent {
    pub instruction: usize,
    pub div_by_zero: bool,
}

/// Dense assignment indexed by [`SignalId`]; `values[0]` is always one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub values: Vec<FieldElement>,
    pub hint_events: Vec<HintEvent>,
}

impl Witness {
    pub fn get(&self, s: SignalId) -> FieldElement {
        self.values[s.index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// SHA-256 over the canonical values, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_decimal().as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

impl Circuit {
    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn signal(&self, id: SignalId) -> &Signal {
        &self.signals[id.index()]
    }

    pub fn signal_name(&self, id: SignalId) -> &str {
        &self.signals[id.index()].name
    }

    pub fn signal_by_name(&self, name: &str) -> Option<SignalId> {
        self.signals.iter().find(|s| s.name == name).map(|s| s.id)
    }

    pub fn signals_with_role(&self, role: SignalRole) -> impl Iterator<Item = &Signal> {
        self.signals.iter().filter(move |s| s.role == role)
    }

    pub fn public_inputs(&self) -> Vec<SignalId> {
        self.signals_with_role(SignalRole::PublicInput).map(|s| s.id).collect()
    }

    pub fn public_outputs(&self) -> Vec<SignalId> {
        self.signals_with_role(SignalRole::PublicOutput).map(|s| s.id).collect()
    }

    /// Index of the instruction that computes `s`, if any.
    pub fn defining_instruction(&self, s: SignalId) -> Option<usize> {
        self.program.iter().position(|ins| ins.computes() && ins.target == Some(s))
    }

    /// Structural validation: declared signals, unique names, dense indices, and
    /// a witness program that assigns every non-input signal exactly once, in
    /// topological order.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.signals.len();
        if n == 0 || self.signals[0].name != "one" || self.signals[0].role != SignalRole::Internal {
            return Err(CircuitError::MissingOneSignal);
        }
        let mut names = std::collections::HashSet::new();
        for (i, s) in self.signals.iter().enumerate() {
            if s.id.index() != i {
                return Err(CircuitError::NonDenseSignals { position: i, found: s.id.index() });
            }
            if !names.insert(s.name.as_str()) {
                return Err(CircuitError::DuplicateName(s.name.clone()));
            }
        }
        let check = |s: SignalId| -> Result<(), CircuitError> {
            if s.index() >= n {
                Err(CircuitError::UnknownSignal(s.index()))
            } else {
                Ok(())
            }
        };
        for c in &self.constraints {
            for s in c.signals() {
                check(s)?;
            }
        }
        for (index, c) in self.constraints.iter().enumerate() {
            if let Some(origin) = c.origin {
                if origin >= self.program.len() {
                    return Err(CircuitError::BadOrigin { index, origin });
                }
            }
        }

        let mut assigned = vec![false; n];
        assigned[0] = true;
        for s in &self.signals {
            if s.role == SignalRole::PublicInput {
                assigned[s.id.index()] = true;
            }
        }
        for (i, ins) in self.program.iter().enumerate() {
            let mut err = None;
            ins.expr.visit_signals(&mut |s| {
                if err.is_some() {
                    return;
                }
                if s.index() >= n {
                    err = Some(CircuitError::UnknownSignal(s.index()));
                } else if !assigned[s.index()] {
                    err = Some(CircuitError::UnassignedRead {
                        instruction: i,
                        signal: self.signals[s.index()].name.clone(),
                    });
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            match (ins.kind, ins.target) {
                (InstructionKind::Constrain, None) => {}
                (InstructionKind::Constrain, Some(_)) | (_, None) => {
                    return Err(CircuitError::MalformedInstruction(i))
                }
                (kind, Some(t)) => {
                    check(t)?;
                    let sig = &self.signals[t.index()];
                    if sig.role == SignalRole::PublicInput || t == SignalId::ONE {
                        return Err(CircuitError::AssignsInput(sig.name.clone()));
                    }
                    if assigned[t.index()] {
                        return Err(CircuitError::DoubleAssignment {
                            instruction: i,
                            signal: sig.name.clone(),
                        });
                    }
                    if kind == InstructionKind::AssignAndConstrain && ins.expr.contains_div() {
                        return Err(CircuitError::DivisionInConstraint(sig.name.clone()));
                    }
                    assigned[t.index()] = true;
                }
            }
            if ins.kind == InstructionKind::Constrain && ins.expr.contains_div() {
                return Err(CircuitError::DivisionInConstraint(format!("instruction {i}")));
            }
        }
        if let Some(i) = assigned.iter().position(|a| !a) {
            return Err(CircuitError::NeverAssigned(self.signals[i].name.clone()));
        }
        Ok(())
    }

    /// Content hash over a canonical binary encoding of the whole circuit.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let field = |h: &mut Sha256, v: &FieldElement| {
            h.update(v.to_biguint().to_bytes_le());
            h.update([0xff]);
        };
        let text = |h: &mut Sha256, s: &str| {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        };
        let lc = |h: &mut Sha256, lc: &LinearCombination| {
            h.update((lc.len() as u64).to_le_bytes());
            for (s, c) in lc.terms() {
                h.update(s.0.to_le_bytes());
                field(h, c);
            }
        };
        fn expr(h: &mut Sha256, e: &Expr) {
            match e {
                Expr::Const(c) => {
                    h.update([0u8]);
                    h.update(c.to_biguint().to_bytes_le());
                    h.update([0xff]);
                }
                Expr::Signal(s) => {
                    h.update([1u8]);
                    h.update(s.0.to_le_bytes());
                }
                Expr::Add(xs) => {
                    h.update([2u8]);
                    h.update((xs.len() as u64).to_le_bytes());
                    xs.iter().for_each(|x| expr(h, x));
                }
                Expr::Sub(a, b) => {
                    h.update([3u8]);
                    expr(h, a);
                    expr(h, b);
                }
                Expr::Mul(a, b) => {
                    h.update([4u8]);
                    expr(h, a);
                    expr(h, b);
                }
                Expr::Div(a, b) => {
                    h.update([5u8]);
                    expr(h, a);
                    expr(h, b);
                }
            }
        }

        text(&mut h, &self.modulus.p().to_string());
        h.update((self.signals.len() as u64).to_le_bytes());
        for s in &self.signals {
            text(&mut h, &s.name);
            h.update([s.role as u8]);
        }
        h.update((self.constraints.len() as u64).to_le_bytes());
        for c in &self.constraints {
            lc(&mut h, &c.a);
            lc(&mut h, &c.b);
            lc(&mut h, &c.c);
            text(&mut h, &c.label);
            h.update(c.origin.map(|o| o as u64 + 1).unwrap_or(0).to_le_bytes());
        }
        h.update((self.program.len() as u64).to_le_bytes());
        for ins in &self.program {
            h.update([ins.kind as u8]);
            h.update(ins.target.map(|t| t.0 as u64 + 1).unwrap_or(0).to_le_bytes());
            expr(&mut h, &ins.expr);
        }
        let meta = serde_json::to_string(&self.metadata).expect("metadata serializes");
        text(&mut h, &meta);
        hex::encode(h.finalize())
    }

    /// Short form used in reports and file names.
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn small_field() -> FieldModulus {
        FieldModulus::from_decimal("65521", "p65521").unwrap()
    }

    pub fn inputs(m: FieldModulus, pairs: &[(&str, u64)]) -> BTreeMap<String, FieldElement> {
        pairs.iter().map(|(k, v)| (k.to_string(), m.from_u64(*v))).collect()
    }
}
