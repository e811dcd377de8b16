//! Hand-written circuits with known bug status: four multiplier variants and a
//! Montgomery point-addition template whose lambda hint is under-constrained.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circuit::{Circuit, CircuitBuilder, CircuitError, Expr};
use crate::field::{FieldElement, FieldModulus};
use crate::oracle::BugCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    MultiplierSafe,
    MultiplierSoundness,
    MultiplierCompleteness,
    MultiplierCorrectness,
    MontgomeryAdd,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 5] = [
        FixtureKind::MultiplierSafe,
        FixtureKind::MultiplierSoundness,
        FixtureKind::MultiplierCompleteness,
        FixtureKind::MultiplierCorrectness,
        FixtureKind::MontgomeryAdd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::MultiplierSafe => "multiplier_safe",
            FixtureKind::MultiplierSoundness => "multiplier_soundness",
            FixtureKind::MultiplierCompleteness => "multiplier_completeness",
            FixtureKind::MultiplierCorrectness => "multiplier_correctness",
            FixtureKind::MontgomeryAdd => "montgomery_add",
        }
    }

    /// The bug this fixture is built to exhibit; `None` for the safe one.
    pub fn expected_category(self) -> Option<BugCategory> {
        match self {
            FixtureKind::MultiplierSafe => None,
            FixtureKind::MultiplierSoundness | FixtureKind::MontgomeryAdd => Some(BugCategory::Soundness),
            FixtureKind::MultiplierCompleteness => Some(BugCategory::Completeness),
            FixtureKind::MultiplierCorrectness => Some(BugCategory::Correctness),
        }
    }

    pub fn is_multiplier(self) -> bool {
        self != FixtureKind::MontgomeryAdd
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| format!("unknown fixture {s:?}"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{0} is not a multiplier fixture")]
    NotAMultiplier(FixtureKind),
    #[error("montgomery_add requires B != 0")]
    ZeroB,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

fn tag(b: &mut CircuitBuilder, kind: FixtureKind) {
    b.set_metadata("fixture", json!(kind.name()));
    b.set_metadata(
        "expected_category",
        json!(kind.expected_category().map_or("none", BugCategory::name)),
    );
}

/// The four multiplier templates, instruction for instruction.
pub fn build_multiplier(kind: FixtureKind, modulus: FieldModulus) -> Result<Circuit, FixtureError> {
    if !kind.is_multiplier() {
        return Err(FixtureError::NotAMultiplier(kind));
    }
    let mut b = CircuitBuilder::new(modulus);
    let a = b.public_input("a")?;
    let x = b.public_input("b")?;
    let c = b.public_output("c")?;
    let product = || Expr::sig(a).mul(Expr::sig(x));
    let sum = || Expr::sig(a).add(Expr::sig(x));
    match kind {
        FixtureKind::MultiplierSafe => {
            b.assign(c, product())?;
            b.constrain(Expr::sig(c), product(), "c === a*b")?;
        }
        FixtureKind::MultiplierSoundness => {
            b.assign(c, product())?;
        }
        FixtureKind::MultiplierCompleteness => {
            b.assign(c, sum())?;
            b.constrain(Expr::sig(c), product(), "c === a*b")?;
        }
        FixtureKind::MultiplierCorrectness => {
            b.assign(c, sum())?;
            b.constrain(Expr::sig(c), sum(), "c === a+b")?;
        }
        FixtureKind::MontgomeryAdd => unreachable!(),
    }
    tag(&mut b, kind);
    Ok(b.build()?)
}

/// Point addition on a Montgomery curve `B*y^2 = x^3 + A*x^2 + x`, with the
/// slope computed as an unconstrained hint and checked only multiplicatively.
pub fn build_montgomery_add(a: FieldElement, b: FieldElement) -> Result<Circuit, FixtureError> {
    if b.is_zero() {
        return Err(FixtureError::ZeroB);
    }
    let m = a.modulus();
    let mut cb = CircuitBuilder::new(m);
    let in1 = [cb.public_input("in1[0]")?, cb.public_input("in1[1]")?];
    let in2 = [cb.public_input("in2[0]")?, cb.public_input("in2[1]")?];
    let out = [cb.public_output("out[0]")?, cb.public_output("out[1]")?];
    let lambda = cb.internal("lambda")?;
    let s = Expr::sig;
    let dx = || s(in2[0]).sub(s(in1[0]));
    let dy = || s(in2[1]).sub(s(in1[1]));

    cb.assign(lambda, dy().div(dx()))?;
    cb.constrain(s(lambda).mul(dx()), dy(), "lambda * (in2[0] - in1[0]) === in2[1] - in1[1]")?;
    cb.assign_constrain(
        out[0],
        Expr::Const(b)
            .mul(s(lambda))
            .mul(s(lambda))
            .sub(Expr::Const(a))
            .sub(s(in1[0]))
            .sub(s(in2[0])),
        "out[0] <== B*lambda*lambda - A - in1[0] - in2[0]",
    )?;
    cb.assign_constrain(
        out[1],
        s(lambda).mul(s(in1[0]).sub(s(out[0]))).sub(s(in1[1])),
        "out[1] <== lambda*(in1[0] - out[0]) - in1[1]",
    )?;
    tag(&mut cb, FixtureKind::MontgomeryAdd);
    cb.set_metadata("A", json!(a.to_decimal()));
    cb.set_metadata("B", json!(b.to_decimal()));
    Ok(cb.build()?)
}

/// Builds any fixture; `params` supplies (A, B) for the Montgomery template.
pub fn build_fixture(
    kind: FixtureKind,
    modulus: FieldModulus,
    params: (FieldElement, FieldElement),
) -> Result<Circuit, FixtureError> {
    match kind {
        FixtureKind::MontgomeryAdd => build_montgomery_add(params.0, params.1),
        _ => build_multiplier(kind, modulus),
    }
}

/// Intended outputs, where the fixture has a known intent independent of its
/// code. Every multiplier is meant to compute `c = a*b`.
pub fn reference_outputs(
    kind: FixtureKind,
    inputs: &BTreeMap<String, FieldElement>,
) -> Option<BTreeMap<String, FieldElement>> {
    if !kind.is_multiplier() {
        return None;
    }
    let c = *inputs.get("a")? * *inputs.get("b")?;
    Some(BTreeMap::from([("c".to_string(), c)]))
}

/// Reads the fixture tag back out of circuit metadata.
pub fn fixture_kind_of(circuit: &Circuit) -> Option<FixtureKind> {
    circuit.metadata.get("fixture")?.as_str()?.parse().ok()
}
