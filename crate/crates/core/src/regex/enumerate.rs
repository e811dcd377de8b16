use super::{Dfa, Nfa};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    /// Shortest first, lexicographic by byte value within a length.
    pub strings: Vec<Vec<u8>>,
    /// No string of length `<= max_len` is accepted.
    pub empty_up_to_bound: bool,
}

/// Lists accepted strings in length-then-lexicographic order, stopping at
/// `max_count`. Branches that cannot reach acceptance in the remaining steps
/// are pruned, so work is proportional to the output.
pub fn enumerate_accepting_strings(dfa: &Dfa, max_len: usize, max_count: usize) -> Enumeration {
    let live = dfa.accepts_within_exactly(max_len);
    let empty_up_to_bound = !(0..=max_len).any(|k| live[k][dfa.start()]);
    let mut strings = Vec::new();
    let mut prefix = Vec::new();
    for len in 0..=max_len {
        if strings.len() >= max_count {
            break;
        }
        walk(dfa, &live, dfa.start(), len, &mut prefix, &mut strings, max_count);
    }
    Enumeration { strings, empty_up_to_bound }
}

fn walk(
    dfa: &Dfa,
    live: &[Vec<bool>],
    q: usize,
    remaining: usize,
    prefix: &mut Vec<u8>,
    out: &mut Vec<Vec<u8>>,
    max_count: usize,
) {
    if out.len() >= max_count || !live[remaining][q] {
        return;
    }
    if remaining == 0 {
        out.push(prefix.clone());
        return;
    }
    for (i, b) in dfa.alphabet().bytes().enumerate() {
        prefix.push(b);
        walk(dfa, live, dfa.next_by_index(q, i), remaining - 1, prefix, out, max_count);
        prefix.pop();
        if out.len() >= max_count {
            return;
        }
    }
}

/// Same contract as [`enumerate_accepting_strings`] but follows accepting
/// paths of the NFA directly (subset sets on the fly, so each string appears
/// once even when several paths spell it).
pub fn enumerate_nfa_paths(nfa: &Nfa, max_len: usize, max_count: usize) -> Enumeration {
    // live[k][s]: from state s (after closure) some path spells a word of
    // length exactly k into acceptance.
    let mut closures = Vec::with_capacity(nfa.states);
    for s in 0..nfa.states {
        let mut set = vec![false; nfa.states];
        set[s] = true;
        nfa.close(&mut set);
        closures.push(set);
    }
    let mut live: Vec<Vec<bool>> = vec![(0..nfa.states).map(|s| nfa.any_accepting(&closures[s])).collect()];
    for k in 1..=max_len {
        let prev = &live[k - 1];
        let row = (0..nfa.states)
            .map(|s| {
                closures[s].iter().enumerate().filter(|(_, on)| **on).any(|(m, _)| {
                    nfa.byte_edges(m).iter().any(|(bytes, t)| !bytes.is_empty() && prev[*t])
                })
            })
            .collect();
        live.push(row);
    }
    let viable = |set: &[bool], k: usize| set.iter().enumerate().any(|(s, on)| *on && live[k][s]);

    let start = nfa.start_set();
    let empty_up_to_bound = !(0..=max_len).any(|k| viable(&start, k));
    let mut strings = Vec::new();
    for len in 0..=max_len {
        let mut stack: Vec<(Vec<bool>, Vec<u8>)> = vec![(start.clone(), Vec::new())];
        // Depth-first in byte order: push successors in reverse.
        while let Some((set, word)) = stack.pop() {
            if strings.len() >= max_count {
                break;
            }
            let remaining = len - word.len();
            if !viable(&set, remaining) {
                continue;
            }
            if remaining == 0 {
                strings.push(word);
                continue;
            }
            for b in nfa.alphabet.bytes().rev() {
                let next = nfa.step(&set, b);
                if viable(&next, remaining - 1) {
                    let mut w = word.clone();
                    w.push(b);
                    stack.push((next, w));
                }
            }
        }
    }
    Enumeration { strings, empty_up_to_bound }
}
