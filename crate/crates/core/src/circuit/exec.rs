use std::collections::BTreeMap;

use super::{Circuit, CircuitError, Expr, HintEvent, SignalId, SignalRole, Witness};
use crate::field::{fe_div, FieldElement};

fn eval(
    expr: &Expr,
    values: &[FieldElement],
    instruction: usize,
    events: &mut Option<&mut Vec<HintEvent>>,
) -> FieldElement {
    match expr {
        Expr::Const(c) => *c,
        Expr::Signal(s) => values[s.index()],
        Expr::Add(xs) => {
            let mut acc = values[0].modulus().zero();
            for x in xs {
                acc = acc + eval(x, values, instruction, events);
            }
            acc
        }
        Expr::Sub(a, b) => eval(a, values, instruction, events) - eval(b, values, instruction, events),
        Expr::Mul(a, b) => {
            let l = eval(a, values, instruction, events);
            if l.is_zero() {
                return l;
            }
            l * eval(b, values, instruction, events)
        }
        Expr::Div(a, b) => {
            let num = eval(a, values, instruction, events);
            let den = eval(b, values, instruction, events);
            let (q, by_zero) = fe_div(num, den).expect("single-modulus circuit");
            if let Some(ev) = events.as_deref_mut() {
                ev.push(HintEvent { instruction, div_by_zero: by_zero });
            }
            q
        }
    }
}

/// Runs the witness program on named public inputs. Every division is recorded
/// as a hint event; division by zero yields 0 and sets the event's flag.
pub fn generate_witness(
    circuit: &Circuit,
    inputs: &BTreeMap<String, FieldElement>,
) -> Result<Witness, CircuitError> {
    let m = circuit.modulus;
    let n = circuit.num_signals();
    let mut values = vec![m.zero(); n];
    let mut assigned = vec![false; n];
    values[0] = m.one();
    assigned[0] = true;

    for s in circuit.signals_with_role(SignalRole::PublicInput) {
        let v = inputs.get(&s.name).ok_or_else(|| CircuitError::MissingInput(s.name.clone()))?;
        if v.modulus() != m {
            return Err(crate::field::FieldError::ModulusMismatch {
                left: m.name().to_string(),
                right: v.modulus().name().to_string(),
            }
            .into());
        }
        values[s.id.index()] = *v;
        assigned[s.id.index()] = true;
    }
    for name in inputs.keys() {
        match circuit.signal_by_name(name) {
            Some(id) if circuit.signal(id).role == SignalRole::PublicInput => {}
            _ => return Err(CircuitError::UnexpectedInput(name.clone())),
        }
    }

    let mut hint_events = Vec::new();
    for (i, ins) in circuit.program.iter().enumerate() {
        let mut missing = None;
        ins.expr.visit_signals(&mut |s| {
            if missing.is_none() && !assigned.get(s.index()).copied().unwrap_or(false) {
                missing = Some(s);
            }
        });
        if let Some(s) = missing {
            let signal = circuit
                .signals
                .get(s.index())
                .map(|sig| sig.name.clone())
                .unwrap_or_else(|| format!("#{}", s.0));
            return Err(CircuitError::UnassignedRead { instruction: i, signal });
        }
        let Some(target) = ins.target.filter(|_| ins.computes()) else {
            continue;
        };
        if assigned[target.index()] {
            return Err(CircuitError::DoubleAssignment {
                instruction: i,
                signal: circuit.signal_name(target).to_string(),
            });
        }
        values[target.index()] = eval(&ins.expr, &values, i, &mut Some(&mut hint_events));
        assigned[target.index()] = true;
    }
    if let Some(i) = assigned.iter().position(|a| !a) {
        return Err(CircuitError::NeverAssigned(circuit.signals[i].name.clone()));
    }
    Ok(Witness { values, hint_events })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayOutcome {
    /// Signals whose value changed during the replay, in program order.
    pub changed: Vec<SignalId>,
}

/// Re-executes the computing instructions from `start` onward against
/// `values`, leaving `pinned` untouched. Only instructions that read a signal
/// changed since the replay began (or `seed_changed`) are re-evaluated; since
/// the program is deterministic this equals a full replay.
pub fn replay_program(
    circuit: &Circuit,
    values: &mut [FieldElement],
    start: usize,
    pinned: SignalId,
    seed_changed: &[SignalId],
) -> ReplayOutcome {
    let mut dirty = vec![false; values.len()];
    for s in seed_changed {
        dirty[s.index()] = true;
    }
    let mut out = ReplayOutcome::default();
    for (i, ins) in circuit.program.iter().enumerate().skip(start) {
        let Some(target) = ins.target.filter(|_| ins.computes()) else {
            continue;
        };
        if target == pinned {
            continue;
        }
        let mut reads_dirty = false;
        ins.expr.visit_signals(&mut |s| reads_dirty |= dirty[s.index()]);
        if !reads_dirty {
            continue;
        }
        let v = eval(&ins.expr, values, i, &mut None);
        if v != values[target.index()] {
            values[target.index()] = v;
            dirty[target.index()] = true;
            out.changed.push(target);
        }
    }
    out
}
