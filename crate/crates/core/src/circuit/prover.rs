use super::{Circuit, Constraint, SignalId, Witness};
use crate::field::FieldElement;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub label: String,
    /// Residual `c - a*b`, i.e. left minus right side of `c === a*b`; never zero.
    pub lhs: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockResult {
    Satisfied,
    Violated(Vec<Violation>),
}

impl MockResult {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, MockResult::Satisfied)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            MockResult::Satisfied => &[],
            MockResult::Violated(v) => v,
        }
    }
}

/// Values of the three linear combinations of `c` under `values`.
#[inline]
pub fn evaluate_constraint(
    c: &Constraint,
    values: &[FieldElement],
) -> (FieldElement, FieldElement, FieldElement) {
    (c.a.evaluate(values), c.b.evaluate(values), c.c.evaluate(values))
}

#[inline]
pub(crate) fn residual(c: &Constraint, values: &[FieldElement]) -> FieldElement {
    let a = c.a.evaluate(values);
    if a.is_zero() {
        return c.c.evaluate(values);
    }
    c.c.evaluate(values) - a * c.b.evaluate(values)
}

/// Checks every constraint and lists all violations in index order.
///
/// # Panics
/// If the witness length differs from the circuit's signal count.
pub fn mock_prove(circuit: &Circuit, witness: &Witness) -> MockResult {
    assert_eq!(
        witness.values.len(),
        circuit.num_signals(),
        "witness length does not match circuit"
    );
    let violations: Vec<Violation> = circuit
        .constraints
        .iter()
        .enumerate()
        .filter_map(|(index, c)| {
            let lhs = residual(c, &witness.values);
            (!lhs.is_zero()).then(|| Violation { index, label: c.label.clone(), lhs })
        })
        .collect();
    if violations.is_empty() {
        MockResult::Satisfied
    } else {
        MockResult::Violated(violations)
    }
}

/// Signal-to-constraint incidence, for re-checking only what a change touches.
#[derive(Debug, Clone)]
pub struct ConstraintIndex {
    by_signal: Vec<Vec<usize>>,
}

impl ConstraintIndex {
    pub fn new(circuit: &Circuit) -> Self {
        let mut by_signal = vec![Vec::new(); circuit.num_signals()];
        for (i, c) in circuit.constraints.iter().enumerate() {
            for s in c.signals() {
                let list: &mut Vec<usize> = &mut by_signal[s.index()];
                if list.last() != Some(&i) {
                    list.push(i);
                }
            }
        }
        for list in &mut by_signal {
            list.dedup();
        }
        ConstraintIndex { by_signal }
    }

    pub fn touching(&self, s: SignalId) -> &[usize] {
        &self.by_signal[s.index()]
    }

    /// True when every constraint mentioning one of `changed` holds.
    pub fn holds_after_change(
        &self,
        circuit: &Circuit,
        values: &[FieldElement],
        changed: &[SignalId],
    ) -> bool {
        let mut seen = std::collections::HashSet::new();
        changed.iter().all(|s| {
            self.touching(*s)
                .iter()
                .filter(|i| seen.insert(**i))
                .all(|i| residual(&circuit.constraints[*i], values).is_zero())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::test_support::{inputs, small_field};
    use crate::circuit::{generate_witness, CircuitBuilder, Expr};

    #[test]
    fn reports_every_violation_with_residual() {
        let m = small_field();
        let mut b = CircuitBuilder::new(m);
        let a = b.public_input("a").unwrap();
        let x = b.public_input("b").unwrap();
        let c = b.public_output("c").unwrap();
        let d = b.public_output("d").unwrap();
        b.assign_constrain(c, Expr::sig(a).mul(Expr::sig(x)), "c <== a*b").unwrap();
        b.assign_constrain(d, Expr::sig(a).add(Expr::sig(x)), "d <== a+b").unwrap();
        let circuit = b.build().unwrap();
        let mut w = generate_witness(&circuit, &inputs(m, &[("a", 3), ("b", 5)])).unwrap();
        assert!(mock_prove(&circuit, &w).is_satisfied());
        w.values[c.index()] = m.from_u64(16);
        w.values[d.index()] = m.from_u64(9);
        let r = mock_prove(&circuit, &w);
        let v = r.violations();
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].index, v[0].lhs), (0, m.one()));
        assert_eq!((v[1].index, v[1].lhs), (1, m.one()));

        let idx = ConstraintIndex::new(&circuit);
        assert_eq!(idx.touching(a), &[0, 1]);
        assert!(!idx.holds_after_change(&circuit, &w.values, &[c]));
    }
}
