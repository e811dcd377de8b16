//! Circuit exchange format.
//!
//! Field elements are decimal strings. Expressions use prefix arrays:
//! `["+", e1, e2, ...]`, `["-", a, b]`, `["*", a, b]`, `["/", a, b]`,
//! `["s", index]` and `["c", "decimal"]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Circuit, CircuitError, Constraint, Expr, Instruction, InstructionKind, LinearCombination,
    Signal, SignalId, SignalRole,
};
use crate::field::{FieldElement, FieldModulus};

#[derive(Serialize, Deserialize)]
struct CircuitDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
    modulus: String,
    signals: Vec<SignalDoc>,
    constraints: Vec<ConstraintDoc>,
    program: Vec<InstructionDoc>,
    #[serde(default)]
    metadata: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct SignalDoc {
    index: u32,
    name: String,
    role: SignalRole,
}

#[derive(Serialize, Deserialize)]
struct ConstraintDoc {
    a: Vec<(String, u32)>,
    b: Vec<(String, u32)>,
    c: Vec<(String, u32)>,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct InstructionDoc {
    kind: InstructionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<u32>,
    expr: Value,
}

fn lc_doc(lc: &LinearCombination) -> Vec<(String, u32)> {
    lc.terms().iter().map(|(s, c)| (c.to_decimal(), s.0)).collect()
}

fn expr_doc(e: &Expr) -> Value {
    match e {
        Expr::Const(c) => json!(["c", c.to_decimal()]),
        Expr::Signal(s) => json!(["s", s.0]),
        Expr::Add(xs) => {
            let mut v = vec![json!("+")];
            v.extend(xs.iter().map(expr_doc));
            Value::Array(v)
        }
        Expr::Sub(a, b) => json!(["-", expr_doc(a), expr_doc(b)]),
        Expr::Mul(a, b) => json!(["*", expr_doc(a), expr_doc(b)]),
        Expr::Div(a, b) => json!(["/", expr_doc(a), expr_doc(b)]),
    }
}

/// Serializes with a stable key order; equal circuits give identical bytes.
pub fn circuit_to_json(circuit: &Circuit) -> Vec<u8> {
    let doc = CircuitDoc {
        hash: Some(circuit.hash()),
        modulus: circuit.modulus.p().to_string(),
        signals: circuit
            .signals
            .iter()
            .map(|s| SignalDoc { index: s.id.0, name: s.name.clone(), role: s.role })
            .collect(),
        constraints: circuit
            .constraints
            .iter()
            .map(|c| ConstraintDoc {
                a: lc_doc(&c.a),
                b: lc_doc(&c.b),
                c: lc_doc(&c.c),
                label: c.label.clone(),
                origin: c.origin,
            })
            .collect(),
        program: circuit
            .program
            .iter()
            .map(|i| InstructionDoc {
                kind: i.kind,
                target: i.target.map(|t| t.0),
                expr: expr_doc(&i.expr),
            })
            .collect(),
        metadata: circuit.metadata.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("circuit serializes");
    out.push(b'\n');
    out
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> CircuitError {
    CircuitError::Schema { path: path.into(), message: message.into() }
}

fn parse_fe(m: FieldModulus, s: &str, path: &str) -> Result<FieldElement, CircuitError> {
    m.parse(s).map_err(|e| schema(path, e.to_string()))
}

fn parse_lc(
    m: FieldModulus,
    terms: &[(String, u32)],
    path: &str,
) -> Result<LinearCombination, CircuitError> {
    let mut out = Vec::with_capacity(terms.len());
    for (i, (c, s)) in terms.iter().enumerate() {
        out.push((SignalId(*s), parse_fe(m, c, &format!("{path}[{i}]"))?));
    }
    Ok(LinearCombination::from_terms(out))
}

fn parse_expr(m: FieldModulus, v: &Value, path: &str) -> Result<Expr, CircuitError> {
    let arr = v.as_array().ok_or_else(|| schema(path, "expression must be an array"))?;
    let op = arr
        .first()
        .and_then(Value::as_str)
        .ok_or_else(|| schema(path, "expression must start with an operator string"))?;
    let arg = |i: usize| -> Result<Expr, CircuitError> {
        let sub = arr.get(i).ok_or_else(|| schema(path, format!("{op:?} needs two operands")))?;
        parse_expr(m, sub, &format!("{path}[{i}]"))
    };
    let binary = |f: fn(Box<Expr>, Box<Expr>) -> Expr| -> Result<Expr, CircuitError> {
        if arr.len() != 3 {
            return Err(schema(path, format!("{op:?} takes exactly two operands")));
        }
        Ok(f(Box::new(arg(1)?), Box::new(arg(2)?)))
    };
    match op {
        "c" => {
            let s = arr
                .get(1)
                .and_then(Value::as_str)
                .filter(|_| arr.len() == 2)
                .ok_or_else(|| schema(path, "constant must be [\"c\", \"decimal\"]"))?;
            Ok(Expr::Const(parse_fe(m, s, path)?))
        }
        "s" => {
            let i = arr
                .get(1)
                .and_then(Value::as_u64)
                .filter(|i| arr.len() == 2 && *i <= u32::MAX as u64)
                .ok_or_else(|| schema(path, "signal must be [\"s\", index]"))?;
            Ok(Expr::Signal(SignalId(i as u32)))
        }
        "+" => Ok(Expr::Add((1..arr.len()).map(arg).collect::<Result<_, _>>()?)),
        "-" => binary(Expr::Sub),
        "*" => binary(Expr::Mul),
        "/" => binary(Expr::Div),
        other => Err(schema(path, format!("unknown operator {other:?}"))),
    }
}

/// Parses and validates a circuit document. A present `hash` must match.
pub fn circuit_from_json(bytes: &[u8]) -> Result<Circuit, CircuitError> {
    let doc: CircuitDoc = serde_json::from_slice(bytes).map_err(|e| CircuitError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let p = num_bigint::BigUint::parse_bytes(doc.modulus.as_bytes(), 10)
        .ok_or_else(|| schema("modulus", "not a decimal integer"))?;
    let m = FieldModulus::new(&p, "circuit")?;

    let signals = doc
        .signals
        .into_iter()
        .map(|s| Signal { id: SignalId(s.index), name: s.name, role: s.role })
        .collect();
    let mut constraints = Vec::with_capacity(doc.constraints.len());
    for (i, c) in doc.constraints.iter().enumerate() {
        constraints.push(Constraint {
            a: parse_lc(m, &c.a, &format!("constraints[{i}].a"))?,
            b: parse_lc(m, &c.b, &format!("constraints[{i}].b"))?,
            c: parse_lc(m, &c.c, &format!("constraints[{i}].c"))?,
            label: c.label.clone(),
            origin: c.origin,
        });
    }
    let mut program = Vec::with_capacity(doc.program.len());
    for (i, ins) in doc.program.iter().enumerate() {
        program.push(Instruction {
            kind: ins.kind,
            target: ins.target.map(SignalId),
            expr: parse_expr(m, &ins.expr, &format!("program[{i}].expr"))?,
        });
    }
    let circuit = Circuit { modulus: m, signals, constraints, program, metadata: doc.metadata };
    circuit.validate()?;
    if let Some(embedded) = doc.hash {
        let computed = circuit.hash();
        if embedded != computed {
            return Err(CircuitError::HashMismatch { embedded, computed });
        }
    }
    Ok(circuit)
}
