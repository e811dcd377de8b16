use std::collections::{HashMap, VecDeque};

use super::{Alphabet, ByteSet, Nfa, RegexError};

pub const DEFAULT_STATE_CAP: usize = 4096;

/// Complete DFA over a contiguous alphabet. States are numbered in BFS order
/// from the start state (bytes ascending), so equal languages built the same
/// way get identical numbering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dfa {
    alphabet: Alphabet,
    start: usize,
    accepting: Vec<bool>,
    delta: Vec<u32>,
}

impl Dfa {
    /// `delta[q * alphabet.size() + i]` is the successor of `q` on the `i`-th byte.
    pub fn from_parts(alphabet: Alphabet, start: usize, accepting: Vec<bool>, delta: Vec<u32>) -> Dfa {
        assert_eq!(delta.len(), accepting.len() * alphabet.size(), "transition table is not total");
        assert!(start < accepting.len());
        assert!(delta.iter().all(|&t| (t as usize) < accepting.len()));
        Dfa { alphabet, start, accepting, delta }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&q| self.accepting[q]).collect()
    }

    #[inline]
    pub fn next(&self, q: usize, b: u8) -> Option<usize> {
        self.alphabet.index(b).map(|i| self.delta[q * self.alphabet.size() + i] as usize)
    }

    #[inline]
    pub fn next_by_index(&self, q: usize, i: usize) -> usize {
        self.delta[q * self.alphabet.size() + i] as usize
    }

    pub fn run(&self, input: &[u8]) -> Option<usize> {
        input.iter().try_fold(self.start, |q, &b| self.next(q, b))
    }

    pub fn accepts(&self, input: &[u8]) -> bool {
        self.run(input).is_some_and(|q| self.accepting[q])
    }

    /// Outgoing edges of `q` grouped by target, targets ascending.
    pub fn edges(&self, q: usize) -> Vec<(usize, ByteSet)> {
        let mut by_target: std::collections::BTreeMap<usize, ByteSet> = Default::default();
        for (i, b) in self.alphabet.bytes().enumerate() {
            by_target.entry(self.next_by_index(q, i)).or_default().insert(b);
        }
        by_target.into_iter().collect()
    }

    /// A non-accepting state whose every transition loops back to itself.
    pub fn dead_state(&self) -> Option<usize> {
        (0..self.num_states()).find(|&q| {
            !self.accepting[q] && (0..self.alphabet.size()).all(|i| self.next_by_index(q, i) == q)
        })
    }

    /// `table[k][q]`: some word of length exactly `k` leads from `q` to acceptance.
    pub fn accepts_within_exactly(&self, max_k: usize) -> Vec<Vec<bool>> {
        let n = self.num_states();
        let mut table = vec![self.accepting.clone()];
        for k in 1..=max_k {
            let prev = &table[k - 1];
            let row = (0..n)
                .map(|q| (0..self.alphabet.size()).any(|i| prev[self.next_by_index(q, i)]))
                .collect();
            table.push(row);
        }
        table
    }

    /// `table[k][q]`: `q` is reachable from the start in exactly `k` steps.
    pub fn reachable_in_exactly(&self, max_k: usize) -> Vec<Vec<bool>> {
        let n = self.num_states();
        let mut row = vec![false; n];
        row[self.start] = true;
        let mut table = vec![row];
        for k in 1..=max_k {
            let mut next = vec![false; n];
            for q in (0..n).filter(|&q| table[k - 1][q]) {
                for i in 0..self.alphabet.size() {
                    next[self.next_by_index(q, i)] = true;
                }
            }
            table.push(next);
        }
        table
    }
}

fn key(set: &[bool]) -> Vec<u64> {
    let mut k = vec![0u64; set.len().div_ceil(64)];
    for (i, on) in set.iter().enumerate() {
        if *on {
            k[i / 64] |= 1 << (i % 64);
        }
    }
    k
}

/// Subset construction. Only reachable subsets become states; the empty subset
/// is the dead state and appears only if reachable.
pub fn determinize(nfa: &Nfa, cap: usize) -> Result<Dfa, RegexError> {
    let alphabet = nfa.alphabet;
    let size = alphabet.size();
    let mut ids: HashMap<Vec<u64>, u32> = HashMap::new();
    let mut sets: Vec<Vec<bool>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut delta: Vec<u32> = Vec::new();

    let start = nfa.start_set();
    ids.insert(key(&start), 0);
    sets.push(start);
    queue.push_back(0usize);

    while let Some(q) = queue.pop_front() {
        let current = sets[q].clone();
        let members: Vec<usize> = (0..nfa.states).filter(|&s| current[s]).collect();
        let mut row = vec![0u32; size];
        let mut by_raw: HashMap<Vec<usize>, u32> = HashMap::new();
        for (i, b) in alphabet.bytes().enumerate() {
            let mut raw: Vec<usize> = members
                .iter()
                .flat_map(|&s| nfa.byte_edges(s).iter())
                .filter(|(bytes, _)| bytes.contains(b))
                .map(|(_, t)| *t)
                .collect();
            raw.sort_unstable();
            raw.dedup();
            if let Some(&id) = by_raw.get(&raw) {
                row[i] = id;
                continue;
            }
            let mut next = vec![false; nfa.states];
            for &t in &raw {
                next[t] = true;
            }
            nfa.close(&mut next);
            let k = key(&next);
            let id = match ids.get(&k) {
                Some(&id) => id,
                None => {
                    if sets.len() >= cap {
                        return Err(RegexError::TooManyStates { cap });
                    }
                    let id = sets.len() as u32;
                    ids.insert(k, id);
                    sets.push(next);
                    queue.push_back(id as usize);
                    id
                }
            };
            by_raw.insert(raw, id);
            row[i] = id;
        }
        debug_assert_eq!(delta.len(), q * size);
        delta.extend(row);
    }
    let accepting = sets.iter().map(|s| nfa.any_accepting(s)).collect();
    Ok(Dfa { alphabet, start: 0, accepting, delta })
}

/// Flips acceptance. Requires (and preserves) completeness.
pub fn complement(dfa: &Dfa) -> Dfa {
    Dfa { accepting: dfa.accepting.iter().map(|a| !a).collect(), ..dfa.clone() }
}

/// Moore partition refinement, renumbered in BFS order from the start.
pub fn minimize(dfa: &Dfa) -> Dfa {
    let n = dfa.num_states();
    let size = dfa.alphabet.size();
    let mut block: Vec<usize> = dfa.accepting.iter().map(|a| *a as usize).collect();
    let mut count = block.iter().collect::<std::collections::HashSet<_>>().len();
    loop {
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let next: Vec<usize> = (0..n)
            .map(|q| {
                let sig = (0..size).map(|i| block[dfa.next_by_index(q, i)]).collect();
                let len = ids.len();
                *ids.entry((block[q], sig)).or_insert(len)
            })
            .collect();
        let new_count = ids.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }

    let mut order: Vec<Option<usize>> = vec![None; count];
    let mut queue = VecDeque::from([block[dfa.start]]);
    order[block[dfa.start]] = Some(0);
    let mut next_id = 1;
    let mut repr = vec![0usize; count];
    for q in 0..n {
        repr[block[q]] = q;
    }
    let mut delta = vec![0u32; count * size];
    let mut accepting = vec![false; count];
    while let Some(b) = queue.pop_front() {
        let id = order[b].unwrap();
        let q = repr[b];
        accepting[id] = dfa.accepting[q];
        for i in 0..size {
            let tb = block[dfa.next_by_index(q, i)];
            let tid = *order[tb].get_or_insert_with(|| {
                queue.push_back(tb);
                next_id += 1;
                next_id - 1
            });
            delta[id * size + i] = tid as u32;
        }
    }
    delta.truncate(next_id * size);
    accepting.truncate(next_id);
    Dfa { alphabet: dfa.alphabet, start: 0, accepting, delta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::{build_nfa, nfa_match, parse_regex};

    fn dfa(pat: &str, a: Alphabet) -> Dfa {
        determinize(&build_nfa(&parse_regex(pat, a).unwrap(), a), DEFAULT_STATE_CAP).unwrap()
    }

    #[test]
    fn single_literal_has_three_states() {
        for a in [Alphabet::default(), Alphabet::new(b'a', b'b').unwrap()] {
            let d = dfa("a", a);
            assert_eq!(d.num_states(), 3);
            assert_eq!(d.accepting_states().len(), 1);
            let dead = d.dead_state().unwrap();
            assert_ne!(dead, d.start());
            assert_eq!(minimize(&d), d);
        }
    }

    #[test]
    fn complement_of_a() {
        let c = complement(&dfa("a", Alphabet::default()));
        assert!(c.accepts(b""));
        assert!(c.accepts(b"b"));
        assert!(!c.accepts(b"a"));
        assert!(c.accepts(b"aa"));
        assert!(!c.accepts(b"\n"), "bytes outside the alphabet are never accepted");
    }

    #[test]
    fn universal_language_has_no_dead_state() {
        let d = minimize(&dfa(".*", Alphabet::default()));
        assert_eq!(d.num_states(), 1);
        assert!(d.dead_state().is_none());
        let c = complement(&d);
        assert!(c.accepting_states().is_empty());
    }

    #[test]
    fn cap_is_enforced() {
        // (a|b)*a(a|b)^k needs 2^(k+1) states.
        let a = Alphabet::new(b'a', b'b').unwrap();
        let pat = format!("(a|b)*a{}", "(a|b)".repeat(8));
        let nfa = build_nfa(&parse_regex(&pat, a).unwrap(), a);
        assert_eq!(determinize(&nfa, 64), Err(RegexError::TooManyStates { cap: 64 }));
        let d = determinize(&nfa, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(minimize(&d).num_states(), 512);
    }

    #[test]
    fn minimize_preserves_language() {
        let a = Alphabet::new(b'a', b'c').unwrap();
        let d = dfa("(a|ab)(c|bc)*|a(bc)*", a);
        let m = minimize(&d);
        assert!(m.num_states() <= d.num_states());
        let nfa = build_nfa(&parse_regex("(a|ab)(c|bc)*|a(bc)*", a).unwrap(), a);
        let mut words = vec![Vec::new()];
        for _ in 0..5 {
            let longer: Vec<Vec<u8>> = words
                .iter()
                .flat_map(|w| a.bytes().map(move |b| [w.clone(), vec![b]].concat()))
                .collect();
            words.extend(longer.into_iter().filter(|w| w.len() <= 5));
            words.sort();
            words.dedup();
        }
        for w in words {
            assert_eq!(m.accepts(&w), nfa_match(&nfa, &w));
            assert_eq!(d.accepts(&w), nfa_match(&nfa, &w));
        }
    }
}
