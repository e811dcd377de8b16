use std::collections::{BTreeMap, HashMap};

use super::{
    Circuit, CircuitError, Constraint, Expr, Instruction, InstructionKind, LinearCombination,
    Signal, SignalId, SignalRole,
};
use crate::field::{FieldElement, FieldModulus};

/// Degree-2 normal form: `lin + Σ l_i * r_i`.
#[derive(Debug, Clone)]
struct Quadratic {
    lin: LinearCombination,
    quads: Vec<(LinearCombination, LinearCombination)>,
}

impl Quadratic {
    fn linear(lin: LinearCombination) -> Self {
        Quadratic { lin, quads: Vec::new() }
    }

    fn scale(&self, k: FieldElement) -> Self {
        Quadratic {
            lin: self.lin.scale(k),
            quads: self.quads.iter().map(|(l, r)| (l.scale(k), r.clone())).collect(),
        }
    }
}

/// Incremental circuit construction with Circom-like `<--` / `<==` / `===`
/// statements. Constraint expressions are lowered to rank-1 form on the fly,
/// introducing auxiliary `<==` signals for products that do not fit.
pub struct CircuitBuilder {
    modulus: FieldModulus,
    signals: Vec<Signal>,
    names: HashMap<String, SignalId>,
    assigned: Vec<bool>,
    constraints: Vec<Constraint>,
    program: Vec<Instruction>,
    metadata: BTreeMap<String, serde_json::Value>,
    aux_counter: usize,
}

impl CircuitBuilder {
    pub fn new(modulus: FieldModulus) -> Self {
        let mut b = CircuitBuilder {
            modulus,
            signals: Vec::new(),
            names: HashMap::new(),
            assigned: Vec::new(),
            constraints: Vec::new(),
            program: Vec::new(),
            metadata: BTreeMap::new(),
            aux_counter: 0,
        };
        b.declare("one", SignalRole::Internal).expect("fresh builder");
        b.assigned[0] = true;
        b
    }

    pub fn modulus(&self) -> FieldModulus {
        self.modulus
    }

    fn declare(&mut self, name: &str, role: SignalRole) -> Result<SignalId, CircuitError> {
        if self.names.contains_key(name) {
            return Err(CircuitError::DuplicateName(name.to_string()));
        }
        let id = SignalId(self.signals.len() as u32);
        self.signals.push(Signal { id, name: name.to_string(), role });
        self.names.insert(name.to_string(), id);
        self.assigned.push(role == SignalRole::PublicInput);
        Ok(id)
    }

    pub fn public_input(&mut self, name: &str) -> Result<SignalId, CircuitError> {
        self.declare(name, SignalRole::PublicInput)
    }

    pub fn public_output(&mut self, name: &str) -> Result<SignalId, CircuitError> {
        self.declare(name, SignalRole::PublicOutput)
    }

    pub fn internal(&mut self, name: &str) -> Result<SignalId, CircuitError> {
        self.declare(name, SignalRole::Internal)
    }

    pub fn lookup(&self, name: &str) -> Option<SignalId> {
        self.names.get(name).copied()
    }

    pub fn set_metadata(&mut self, key: &str, value: serde_json::Value) {
        self.metadata.insert(key.to_string(), value);
    }

    pub fn constant(&self, v: u64) -> Expr {
        Expr::Const(self.modulus.from_u64(v))
    }

    fn check_reads(&self, expr: &Expr) -> Result<(), CircuitError> {
        let mut err = None;
        let instruction = self.program.len();
        expr.visit_signals(&mut |s| {
            if err.is_some() {
                return;
            }
            match self.assigned.get(s.index()) {
                None => err = Some(CircuitError::UnknownSignal(s.index())),
                Some(false) => {
                    err = Some(CircuitError::UnassignedRead {
                        instruction,
                        signal: self.signals[s.index()].name.clone(),
                    })
                }
                Some(true) => {}
            }
        });
        err.map_or(Ok(()), Err)
    }

    fn check_target(&self, target: SignalId) -> Result<(), CircuitError> {
        let sig = self
            .signals
            .get(target.index())
            .ok_or(CircuitError::UnknownSignal(target.index()))?;
        if sig.role == SignalRole::PublicInput || target == SignalId::ONE {
            return Err(CircuitError::AssignsInput(sig.name.clone()));
        }
        if self.assigned[target.index()] {
            return Err(CircuitError::DoubleAssignment {
                instruction: self.program.len(),
                signal: sig.name.clone(),
            });
        }
        Ok(())
    }

    /// `target <-- expr`: a hint, no constraint.
    pub fn assign(&mut self, target: SignalId, expr: Expr) -> Result<usize, CircuitError> {
        self.check_reads(&expr)?;
        self.check_target(target)?;
        self.assigned[target.index()] = true;
        self.program.push(Instruction { kind: InstructionKind::Assign, target: Some(target), expr });
        Ok(self.program.len() - 1)
    }

    /// `target <== expr`: computes and constrains. Returns the constraint index.
    pub fn assign_constrain(
        &mut self,
        target: SignalId,
        expr: Expr,
        label: &str,
    ) -> Result<usize, CircuitError> {
        self.check_reads(&expr)?;
        self.check_target(target)?;
        if expr.contains_div() {
            return Err(CircuitError::DivisionInConstraint(label.to_string()));
        }
        let q = self.lower_top(&expr, label)?;
        let target_lc = LinearCombination::signal(target, self.modulus);
        let (a, b, c) = match q.quads.as_slice() {
            [] => (q.lin, self.one_lc(), target_lc),
            [(l, r)] => (l.clone(), r.clone(), target_lc.minus(&q.lin)),
            _ => unreachable!("lower_top leaves at most one product"),
        };
        self.assigned[target.index()] = true;
        self.program.push(Instruction {
            kind: InstructionKind::AssignAndConstrain,
            target: Some(target),
            expr,
        });
        let origin = Some(self.program.len() - 1);
        self.constraints.push(Constraint { a, b, c, label: label.to_string(), origin });
        Ok(self.constraints.len() - 1)
    }

    /// `lhs === rhs`. Returns the constraint index.
    pub fn constrain(&mut self, lhs: Expr, rhs: Expr, label: &str) -> Result<usize, CircuitError> {
        self.check_reads(&lhs)?;
        self.check_reads(&rhs)?;
        if lhs.contains_div() || rhs.contains_div() {
            return Err(CircuitError::DivisionInConstraint(label.to_string()));
        }
        let ql = self.lower(&lhs)?;
        let qr = self.lower(&rhs)?;
        let (a, b, c) = if ql.quads.is_empty() && qr.quads.len() == 1 {
            let (l, r) = qr.quads[0].clone();
            (l, r, ql.lin.minus(&qr.lin))
        } else if qr.quads.is_empty() && ql.quads.len() == 1 {
            let (l, r) = ql.quads[0].clone();
            (l, r, qr.lin.minus(&ql.lin))
        } else if ql.quads.is_empty() && qr.quads.is_empty() {
            (ql.lin, self.one_lc(), qr.lin)
        } else {
            let diff = lhs.clone().sub(rhs.clone());
            let q = self.lower_top(&diff, label)?;
            match q.quads.as_slice() {
                [] => (q.lin, self.one_lc(), LinearCombination::zero()),
                [(l, r)] => (l.clone(), r.clone(), q.lin.scale(-self.modulus.one())),
                _ => unreachable!("lower_top leaves at most one product"),
            }
        };
        self.program.push(Instruction {
            kind: InstructionKind::Constrain,
            target: None,
            expr: lhs.sub(rhs),
        });
        let origin = Some(self.program.len() - 1);
        self.constraints.push(Constraint { a, b, c, label: label.to_string(), origin });
        Ok(self.constraints.len() - 1)
    }

    /// Standard IsZero gadget: returns `out` with `out = 1` iff `x = 0`.
    ///
    /// `inv <-- 1/x` (total division), `out <== 1 - x*inv`, `x*out === 0`.
    pub fn is_zero(&mut self, x: Expr, name: &str) -> Result<SignalId, CircuitError> {
        let inv = self.internal(&format!("{name}.inv"))?;
        let out = self.internal(name)?;
        self.assign(inv, self.constant(1).div(x.clone()))?;
        self.assign_constrain(
            out,
            self.constant(1).sub(x.clone().mul(Expr::sig(inv))),
            &format!("{name} <== 1 - x*inv"),
        )?;
        self.constrain(
            x.mul(Expr::sig(out)),
            Expr::Const(self.modulus.zero()),
            &format!("{name}: x*out === 0"),
        )?;
        Ok(out)
    }

    fn one_lc(&self) -> LinearCombination {
        LinearCombination::signal(SignalId::ONE, self.modulus)
    }

    /// Lowers and folds surplus products into auxiliary signals, leaving at
    /// most one product term.
    fn lower_top(&mut self, expr: &Expr, label: &str) -> Result<Quadratic, CircuitError> {
        let mut q = self.lower(expr)?;
        while q.quads.len() > 1 {
            let (l, r) = q.quads.pop().expect("len > 1");
            let aux = self.materialize(Expr::from_lc(&l).mul(Expr::from_lc(&r)), label)?;
            q.lin = q.lin.plus(&LinearCombination::signal(aux, self.modulus));
        }
        Ok(q)
    }

    fn materialize(&mut self, expr: Expr, label: &str) -> Result<SignalId, CircuitError> {
        self.aux_counter += 1;
        let name = format!("aux{}", self.aux_counter);
        let aux = self.internal(&name)?;
        self.assign_constrain(aux, expr, &format!("{name} (from {label})"))?;
        Ok(aux)
    }

    fn lower(&mut self, expr: &Expr) -> Result<Quadratic, CircuitError> {
        let m = self.modulus;
        Ok(match expr {
            Expr::Const(c) => Quadratic::linear(LinearCombination::constant(*c)),
            Expr::Signal(s) => Quadratic::linear(LinearCombination::signal(*s, m)),
            Expr::Add(xs) => {
                let mut acc = Quadratic::linear(LinearCombination::zero());
                for x in xs {
                    let q = self.lower(x)?;
                    acc.lin = acc.lin.plus(&q.lin);
                    acc.quads.extend(q.quads);
                }
                acc
            }
            Expr::Sub(a, b) => {
                let qa = self.lower(a)?;
                let qb = self.lower(b)?.scale(-m.one());
                let mut quads = qa.quads;
                quads.extend(qb.quads);
                Quadratic { lin: qa.lin.plus(&qb.lin), quads }
            }
            Expr::Mul(a, b) => {
                let mut qa = self.lower(a)?;
                let mut qb = self.lower(b)?;
                if qa.quads.is_empty() {
                    if let Some(k) = qa.lin.as_constant(m) {
                        return Ok(qb.scale(k));
                    }
                }
                if qb.quads.is_empty() {
                    if let Some(k) = qb.lin.as_constant(m) {
                        return Ok(qa.scale(k));
                    }
                }
                if !qa.quads.is_empty() {
                    let aux = self.materialize((**a).clone(), "nested product")?;
                    qa = Quadratic::linear(LinearCombination::signal(aux, m));
                }
                if !qb.quads.is_empty() {
                    let aux = self.materialize((**b).clone(), "nested product")?;
                    qb = Quadratic::linear(LinearCombination::signal(aux, m));
                }
                Quadratic { lin: LinearCombination::zero(), quads: vec![(qa.lin, qb.lin)] }
            }
            Expr::Div(_, _) => return Err(CircuitError::DivisionInConstraint("expression".into())),
        })
    }

    pub fn build(self) -> Result<Circuit, CircuitError> {
        let circuit = Circuit {
            modulus: self.modulus,
            signals: self.signals,
            constraints: self.constraints,
            program: self.program,
            metadata: self.metadata,
        };
        circuit.validate()?;
        Ok(circuit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::test_support::{inputs, small_field};
    use crate::circuit::{generate_witness, mock_prove, MockResult};

    #[test]
    fn cubic_expression_gets_one_aux_signal() {
        let m = small_field();
        let mut b = CircuitBuilder::new(m);
        let x = b.public_input("x").unwrap();
        let y = b.public_output("y").unwrap();
        // y <== x*x*x + 5
        let cube = Expr::sig(x).mul(Expr::sig(x)).mul(Expr::sig(x));
        b.assign_constrain(y, cube.add(b.constant(5)), "y").unwrap();
        let c = b.build().unwrap();
        assert_eq!(c.constraints.len(), 2);
        assert!(c.signal_by_name("aux1").is_some());
        let w = generate_witness(&c, &inputs(m, &[("x", 3)])).unwrap();
        assert_eq!(w.get(y), m.from_u64(32));
        assert_eq!(mock_prove(&c, &w), MockResult::Satisfied);
    }

    #[test]
    fn constant_factors_stay_linear() {
        let m = small_field();
        let mut b = CircuitBuilder::new(m);
        let x = b.public_input("x").unwrap();
        let y = b.public_output("y").unwrap();
        // 7 * x * x is still a single product.
        let e = b.constant(7).mul(Expr::sig(x)).mul(Expr::sig(x));
        b.assign_constrain(y, e, "y").unwrap();
        let c = b.build().unwrap();
        assert_eq!(c.num_signals(), 3);
        assert_eq!(c.constraints.len(), 1);
    }

    #[test]
    fn two_products_in_a_constraint_are_split() {
        let m = small_field();
        let mut b = CircuitBuilder::new(m);
        let x = b.public_input("x").unwrap();
        let z = b.public_input("z").unwrap();
        let y = b.public_output("y").unwrap();
        let e = Expr::sig(x).mul(Expr::sig(x)).add(Expr::sig(z).mul(Expr::sig(z)));
        b.assign_constrain(y, e, "sum of squares").unwrap();
        let c = b.build().unwrap();
        assert_eq!(c.constraints.len(), 2);
        let w = generate_witness(&c, &inputs(m, &[("x", 3), ("z", 4)])).unwrap();
        assert_eq!(w.get(y), m.from_u64(25));
        assert!(mock_prove(&c, &w).is_satisfied());
    }

    #[test]
    fn division_is_rejected_in_constraints() {
        let m = small_field();
        let mut b = CircuitBuilder::new(m);
        let x = b.public_input("x").unwrap();
        let y = b.internal("y").unwrap();
        assert!(matches!(
            b.assign_constrain(y, b.constant(1).div(Expr::sig(x)), "inv"),
            Err(CircuitError::DivisionInConstraint(_))
        ));
        assert!(b.constrain(Expr::sig(x).div(Expr::sig(x)), b.constant(1), "d").is_err());
        b.assign(y, b.constant(1).div(Expr::sig(x))).unwrap();
    }

    #[test]
    fn iszero_gadget_examples() {
        let m = small_field();
        let mut b = CircuitBuilder::new(m);
        let x = b.public_input("x").unwrap();
        let out = b.is_zero(Expr::sig(x), "isz").unwrap();
        let o = b.public_output("o").unwrap();
        b.assign_constrain(o, Expr::sig(out), "o <== isz").unwrap();
        let c = b.build().unwrap();
        let inv = c.signal_by_name("isz.inv").unwrap();

        let w0 = generate_witness(&c, &inputs(m, &[("x", 0)])).unwrap();
        assert_eq!(w0.get(out), m.one());
        assert!(mock_prove(&c, &w0).is_satisfied());
        assert!(w0.hint_events.iter().any(|e| e.div_by_zero));

        let w7 = generate_witness(&c, &inputs(m, &[("x", 7)])).unwrap();
        assert_eq!(w7.get(out), m.zero());
        assert_eq!(w7.get(inv), m.from_u64(7).inverse().unwrap());
        assert!(mock_prove(&c, &w7).is_satisfied());

        // Forged: x = 7, out = 1, inv = 0. `out <== 1 - x*inv` holds (1 = 1 - 0),
        // but `x*out === 0` does not.
        let mut forged = w7.clone();
        forged.values[out.index()] = m.one();
        forged.values[inv.index()] = m.zero();
        forged.values[o.index()] = m.one();
        match mock_prove(&c, &forged) {
            MockResult::Violated(v) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].label, "isz: x*out === 0");
                assert_eq!(v[0].lhs, -m.from_u64(7));
            }
            MockResult::Satisfied => panic!("forged iszero witness accepted"),
        }
    }
}
