//! Soundness probing: perturb one signal of an honest witness, optionally
//! recompute everything downstream of it, and look for a perturbed witness
//! that still satisfies every constraint but changes a public output.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    mock_prove, replay_program, Circuit, ConstraintIndex, InstructionKind, SignalId, SignalRole, Witness,
};
use crate::field::{FieldElement, FieldModulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchMode {
    None,
    DownstreamReplay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationPlan {
    pub target: SignalId,
    pub new_value: FieldElement,
    pub patch_mode: PatchMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("cannot mutate public input {0}: it is part of the statement")]
    PublicInput(String),
    #[error("cannot mutate the constant-one signal")]
    ConstantOne,
    #[error("signal index {0} is out of range")]
    UnknownSignal(usize),
    #[error("witness has {found} values, circuit has {expected} signals")]
    WitnessLength { expected: usize, found: usize },
}

/// Copy of `honest` with the plan applied. With downstream replay, every
/// computing instruction after the target's own is re-executed, treating the
/// new value as given.
pub fn mutate_witness(circuit: &Circuit, honest: &Witness, plan: &MutationPlan) -> Result<Witness, MutationError> {
    let n = circuit.num_signals();
    if honest.values.len() != n {
        return Err(MutationError::WitnessLength { expected: n, found: honest.values.len() });
    }
    let t = plan.target;
    if t.index() >= n {
        return Err(MutationError::UnknownSignal(t.index()));
    }
    if t == SignalId::ONE {
        return Err(MutationError::ConstantOne);
    }
    let sig = circuit.signal(t);
    if sig.role == SignalRole::PublicInput {
        return Err(MutationError::PublicInput(sig.name.clone()));
    }
    let mut values = honest.values.clone();
    values[t.index()] = plan.new_value;
    if plan.patch_mode == PatchMode::DownstreamReplay {
        let start = circuit.defining_instruction(t).map_or(0, |i| i + 1);
        replay_program(circuit, &mut values, start, t, &[t]);
    }
    Ok(Witness { values, hint_events: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueStrategy {
    Random,
    Offset,
    Zero,
    One,
}

/// Relative odds of each value strategy; need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyWeights {
    pub random: f64,
    pub offset: f64,
    pub zero: f64,
    pub one: f64,
}

impl Default for StrategyWeights {
    fn default() -> Self {
        StrategyWeights { random: 0.4, offset: 0.3, zero: 0.15, one: 0.15 }
    }
}

impl StrategyWeights {
    fn draw(&self, rng: &mut ChaCha8Rng) -> ValueStrategy {
        let table = [
            (ValueStrategy::Random, self.random),
            (ValueStrategy::Offset, self.offset),
            (ValueStrategy::Zero, self.zero),
            (ValueStrategy::One, self.one),
        ];
        let total: f64 = table.iter().map(|(_, w)| w.max(0.0)).sum();
        let mut x = rng.gen::<f64>() * total;
        for (s, w) in table {
            let w = w.max(0.0);
            if x < w {
                return s;
            }
            x -= w;
        }
        ValueStrategy::Random
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeBudget {
    pub iterations: u64,
    pub rng_seed: u64,
}

/// Baseline target weights by how a signal is produced.
pub const HINT_WEIGHT: f64 = 4.0;
pub const INTERNAL_WEIGHT: f64 = 1.0;
pub const OUTPUT_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalDelta {
    pub signal: String,
    pub index: usize,
    pub honest: String,
    pub mutated: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDiff {
    pub name: String,
    pub honest: String,
    pub mutated: String,
}

/// A satisfying witness over the honest inputs whose public outputs differ
/// from the honest ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessFinding {
    pub circuit_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub honest_digest: String,
    pub target: String,
    pub strategy: ValueStrategy,
    pub patch_mode: PatchMode,
    /// Every signal where the mutated witness differs from the honest one.
    pub delta: Vec<SignalDelta>,
    pub differing_outputs: Vec<OutputDiff>,
    /// The mutated outputs also disagree with the supplied reference.
    pub contradicts_reference: bool,
    /// Always empty: the forged witness satisfies every constraint.
    pub violated_constraints: Vec<String>,
    pub iteration: u64,
}

impl SoundnessFinding {
    /// Rebuilds the forged witness from the honest one.
    pub fn apply(&self, modulus: FieldModulus, honest: &Witness) -> Option<Witness> {
        let mut values = honest.values.clone();
        for d in &self.delta {
            let slot = values.get_mut(d.index)?;
            if slot.to_decimal() != d.honest {
                return None;
            }
            *slot = modulus.parse(&d.mutated).ok()?;
        }
        Some(Witness { values, hint_events: Vec::new() })
    }

    /// Independent check: the forged witness satisfies the circuit, keeps the
    /// public inputs, and changes at least one public output.
    pub fn verify(&self, circuit: &Circuit, honest: &Witness) -> bool {
        let Some(forged) = self.apply(circuit.modulus, honest) else {
            return false;
        };
        mock_prove(circuit, &forged).is_satisfied()
            && circuit.public_inputs().iter().all(|s| forged.get(*s) == honest.get(*s))
            && circuit.public_outputs().iter().any(|s| forged.get(*s) != honest.get(*s))
    }

    pub fn signals(&self) -> impl Iterator<Item = &str> {
        self.delta.iter().map(|d| d.signal.as_str())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProbeOutcome {
    pub findings: Vec<SoundnessFinding>,
    pub mutations: u64,
    pub mock_proofs: u64,
}

fn baseline_weight(circuit: &Circuit, s: SignalId) -> f64 {
    let is_hint = circuit
        .defining_instruction(s)
        .is_some_and(|i| circuit.program[i].kind == InstructionKind::Assign);
    if is_hint {
        HINT_WEIGHT
    } else if circuit.signal(s).role == SignalRole::PublicOutput {
        OUTPUT_WEIGHT
    } else {
        INTERNAL_WEIGHT
    }
}

fn draw_value(strategy: ValueStrategy, honest: FieldElement, rng: &mut ChaCha8Rng) -> FieldElement {
    let m = honest.modulus();
    match strategy {
        ValueStrategy::Random => m.random(rng),
        ValueStrategy::Offset => {
            let k = m.from_u64(rng.gen_range(1..=16));
            if rng.gen_bool(0.5) {
                honest + k
            } else {
                honest - k
            }
        }
        ValueStrategy::Zero => m.zero(),
        ValueStrategy::One => m.one(),
    }
}

/// Searches for forged witnesses around the honest run on `inputs`.
///
/// Each iteration picks a target signal (hints favoured, then feedback from
/// how few constraints earlier mutations of it broke) and a value, and tries
/// it both with and without downstream replay. `reference` holds the intended
/// public outputs when they are known.
pub fn soundness_probe(
    circuit: &Circuit,
    honest: &Witness,
    inputs: &BTreeMap<String, FieldElement>,
    budget: ProbeBudget,
    weights: &StrategyWeights,
    reference: Option<&BTreeMap<String, FieldElement>>,
) -> ProbeOutcome {
    let mut out = ProbeOutcome::default();
    let targets: Vec<SignalId> = circuit
        .signals
        .iter()
        .filter(|s| s.id != SignalId::ONE && s.role != SignalRole::PublicInput)
        .map(|s| s.id)
        .collect();
    if targets.is_empty() {
        return out;
    }
    let base: Vec<f64> = targets.iter().map(|s| baseline_weight(circuit, *s)).collect();
    let mut feedback = vec![1.0f64; targets.len()];
    let index = ConstraintIndex::new(circuit);
    let outputs = circuit.public_outputs();
    let hash = circuit.hash();
    let digest = honest.digest();
    let input_strings: BTreeMap<String, String> =
        inputs.iter().map(|(k, v)| (k.clone(), v.to_decimal())).collect();
    let mut seen: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.rng_seed);

    for iteration in 0..budget.iterations {
        let total: f64 = base.iter().zip(&feedback).map(|(b, f)| b * f).sum();
        let mut x = rng.gen::<f64>() * total;
        let mut pick = targets.len() - 1;
        for (i, (b, f)) in base.iter().zip(&feedback).enumerate() {
            if x < b * f {
                pick = i;
                break;
            }
            x -= b * f;
        }
        let target = targets[pick];
        let strategy = weights.draw(&mut rng);
        let new_value = draw_value(strategy, honest.get(target), &mut rng);
        if new_value == honest.get(target) {
            continue;
        }
        let mut fewest = usize::MAX;
        for patch_mode in [PatchMode::None, PatchMode::DownstreamReplay] {
            let plan = MutationPlan { target, new_value, patch_mode };
            let forged = mutate_witness(circuit, honest, &plan).expect("targets exclude inputs");
            out.mutations += 1;
            out.mock_proofs += 1;
            let changed: Vec<SignalId> = (0..forged.values.len())
                .filter(|&i| forged.values[i] != honest.values[i])
                .map(|i| SignalId(i as u32))
                .collect();
            if !index.holds_after_change(circuit, &forged.values, &changed) {
                let mut broken = BTreeSet::new();
                for s in &changed {
                    for &ci in index.touching(*s) {
                        if !crate::circuit::residual(&circuit.constraints[ci], &forged.values).is_zero() {
                            broken.insert(ci);
                        }
                    }
                }
                fewest = fewest.min(broken.len());
                continue;
            }
            fewest = 0;
            let differing: Vec<OutputDiff> = outputs
                .iter()
                .filter(|s| forged.get(**s) != honest.get(**s))
                .map(|s| OutputDiff {
                    name: circuit.signal_name(*s).to_string(),
                    honest: honest.get(*s).to_decimal(),
                    mutated: forged.get(*s).to_decimal(),
                })
                .collect();
            if differing.is_empty() {
                continue;
            }
            let key = (
                circuit.signal_name(target).to_string(),
                differing.iter().map(|d| d.name.clone()).collect::<Vec<_>>(),
            );
            if seen.contains(&key) {
                continue;
            }
            let contradicts_reference = reference.is_some_and(|r| {
                outputs.iter().any(|s| r.get(circuit.signal_name(*s)).is_some_and(|v| *v != forged.get(*s)))
            });
            let finding = SoundnessFinding {
                circuit_hash: hash.clone(),
                inputs: input_strings.clone(),
                honest_digest: digest.clone(),
                target: key.0.clone(),
                strategy,
                patch_mode,
                delta: changed
                    .iter()
                    .map(|s| SignalDelta {
                        signal: circuit.signal_name(*s).to_string(),
                        index: s.index(),
                        honest: honest.get(*s).to_decimal(),
                        mutated: forged.get(*s).to_decimal(),
                    })
                    .collect(),
                differing_outputs: differing,
                contradicts_reference,
                violated_constraints: Vec::new(),
                iteration,
            };
            if finding.verify(circuit, honest) {
                seen.insert(key);
                out.findings.push(finding);
            }
        }
        // Signals whose perturbations break little are close to unconstrained.
        feedback[pick] = match fewest {
            0 | 1 => (feedback[pick] * 1.5).min(16.0),
            _ => (feedback[pick] * 0.9).max(0.25),
        };
    }
    out
}
