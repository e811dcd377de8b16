//! Labelled string generation: strings in and out of a regex's language,
//! each self-checked against the NFA before it is emitted.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::regex::{complement, enumerate_accepting_strings, nfa_match, Ast, Dfa, Nfa};

/// Largest repetition count drawn for `*` and `+`.
pub const MAX_REPEAT: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StringBudget {
    /// Longest string emitted (the transpiler's length cap).
    pub max_len: usize,
    pub rng_seed: u64,
}

impl Default for StringBudget {
    fn default() -> Self {
        StringBudget { max_len: 16, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StringSource {
    /// Random walk of the AST.
    Expansion,
    /// Length-lexicographic enumeration or an accepting DFA walk.
    Enumeration,
    /// Byte edits of a valid string.
    Mutation,
    /// DFA walk through live states that stops outside the accepting set.
    RejectingWalk,
    /// Accepting walk of the complement DFA.
    ComplementWalk,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedString {
    pub bytes: Vec<u8>,
    pub source: StringSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StringBatch {
    pub strings: Vec<GeneratedString>,
    /// Valid generation: no string of length `<= max_len` is accepted.
    /// Invalid generation: every such string is accepted.
    pub degenerate: bool,
}

impl StringBatch {
    pub fn bytes(&self) -> impl Iterator<Item = &[u8]> {
        self.strings.iter().map(|s| s.bytes.as_slice())
    }
}

/// Failures before the first success with p = 1/3: mean 2, capped.
fn repeat_count(rng: &mut ChaCha8Rng) -> u32 {
    let mut n = 0;
    while n < MAX_REPEAT && rng.gen_ratio(2, 3) {
        n += 1;
    }
    n
}

fn expand(ast: &Ast, dfa: &Dfa, rng: &mut ChaCha8Rng, out: &mut Vec<u8>, max_len: usize) -> bool {
    if out.len() > max_len {
        return false;
    }
    match ast {
        Ast::Empty => true,
        Ast::Literal(_) | Ast::Dot | Ast::Class { .. } => {
            let set: Vec<u8> = ast.symbol_set(dfa.alphabet()).map(|s| s.iter().collect()).unwrap_or_default();
            match set.choose(rng) {
                Some(b) => {
                    out.push(*b);
                    true
                }
                None => false,
            }
        }
        Ast::Concat(xs) => xs.iter().all(|x| expand(x, dfa, rng, out, max_len)),
        Ast::Alternation(xs) => {
            let x = xs.choose(rng).expect("alternation has branches");
            expand(x, dfa, rng, out, max_len)
        }
        Ast::Star(x) => (0..repeat_count(rng)).all(|_| expand(x, dfa, rng, out, max_len)),
        Ast::Plus(x) => (0..repeat_count(rng).max(1)).all(|_| expand(x, dfa, rng, out, max_len)),
        Ast::Optional(x) => !rng.gen_bool(0.5) || expand(x, dfa, rng, out, max_len),
    }
}

/// Uniform random walk of exactly `len` steps from the start state, restricted
/// to moves after which `ok[remaining][state]` still holds.
fn guided_walk(dfa: &Dfa, ok: &[Vec<bool>], len: usize, rng: &mut ChaCha8Rng) -> Option<Vec<u8>> {
    let alphabet = dfa.alphabet();
    let mut q = dfa.start();
    if !ok[len][q] {
        return None;
    }
    let mut out = Vec::with_capacity(len);
    for remaining in (0..len).rev() {
        let moves: Vec<usize> =
            (0..alphabet.size()).filter(|&i| ok[remaining][dfa.next_by_index(q, i)]).collect();
        let i = *moves.choose(rng)?;
        out.push(alphabet.byte(i));
        q = dfa.next_by_index(q, i);
    }
    Some(out)
}

fn walk_of_random_length(
    dfa: &Dfa,
    ok: &[Vec<bool>],
    min_len: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<u8>> {
    let max_len = ok.len() - 1;
    let mut lengths: Vec<usize> = (min_len.min(max_len)..=max_len).filter(|&k| ok[k][dfa.start()]).collect();
    if lengths.is_empty() {
        lengths = (0..=max_len).filter(|&k| ok[k][dfa.start()]).collect();
    }
    let len = *lengths.choose(rng)?;
    guided_walk(dfa, ok, len, rng)
}

/// Round-robins over `sources`, skipping duplicates and sources that fail to
/// produce, until `count` strings are collected or the attempt budget runs out.
fn interleave(
    count: usize,
    sources: &[StringSource],
    mut draw: impl FnMut(StringSource) -> Option<Vec<u8>>,
) -> Vec<GeneratedString> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    let limit = 16 * count + 64;
    let mut turn = 0;
    while out.len() < count && attempts < limit {
        let source = sources[turn % sources.len()];
        turn += 1;
        for _ in 0..4 {
            attempts += 1;
            if let Some(bytes) = draw(source) {
                if seen.insert(bytes.clone()) {
                    out.push(GeneratedString { bytes, source });
                    break;
                }
            }
        }
    }
    out
}

/// Strings in the language of `ast`, alternating between AST expansion and
/// DFA enumeration/walks. Lengths never exceed `budget.max_len`.
///
/// # Panics
/// If an emitted string fails `nfa_match`, which means the generator is broken.
pub fn generate_valid_strings(ast: &Ast, nfa: &Nfa, dfa: &Dfa, count: usize, budget: &StringBudget) -> StringBatch {
    let max_len = budget.max_len;
    let enumeration = enumerate_accepting_strings(dfa, max_len, count);
    if enumeration.empty_up_to_bound {
        return StringBatch { strings: Vec::new(), degenerate: true };
    }
    let live = dfa.accepts_within_exactly(max_len);
    let horizon = enumeration.strings.last().map_or(0, Vec::len);
    let mut bfs = enumeration.strings.into_iter();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.rng_seed);
    let mut enum_turn = 0usize;
    let strings = interleave(count, &[StringSource::Expansion, StringSource::Enumeration], |source| {
        match source {
            StringSource::Expansion => {
                let mut out = Vec::new();
                (expand(ast, dfa, &mut rng, &mut out, max_len) && out.len() <= max_len).then_some(out)
            }
            _ => {
                enum_turn += 1;
                if enum_turn % 2 == 1 {
                    if let Some(s) = bfs.next() {
                        return Some(s);
                    }
                }
                walk_of_random_length(dfa, &live, horizon, &mut rng)
            }
        }
    });
    for s in &strings {
        assert!(
            nfa_match(nfa, &s.bytes),
            "generator bug: {:?} string {:?} is not in the language",
            s.source,
            String::from_utf8_lossy(&s.bytes)
        );
    }
    StringBatch { strings, degenerate: false }
}

/// `table[k][q]`: from `q`, some word of length `k` stays within states that
/// can still reach acceptance and ends in a non-accepting one.
fn near_miss_table(dfa: &Dfa, max_len: usize) -> Vec<Vec<bool>> {
    let n = dfa.num_states();
    let reach = dfa.accepts_within_exactly(n);
    let live: Vec<bool> = (0..n).map(|q| reach.iter().any(|row| row[q])).collect();
    let mut table = vec![(0..n).map(|q| live[q] && !dfa.is_accepting(q)).collect::<Vec<_>>()];
    for k in 1..=max_len {
        let prev = &table[k - 1];
        let row = (0..n)
            .map(|q| live[q] && (0..dfa.alphabet().size()).any(|i| prev[dfa.next_by_index(q, i)]))
            .collect();
        table.push(row);
    }
    table
}

fn mutate(pool: &[Vec<u8>], dfa: &Dfa, max_len: usize, rng: &mut ChaCha8Rng) -> Option<Vec<u8>> {
    let mut s = pool.choose(rng)?.clone();
    let alphabet = dfa.alphabet();
    for _ in 0..rng.gen_range(1..=3) {
        let byte = alphabet.byte(rng.gen_range(0..alphabet.size()));
        let roll: f64 = rng.gen();
        if s.is_empty() || (roll >= 0.5 && roll < 0.75) {
            let at = rng.gen_range(0..=s.len());
            s.insert(at, byte);
        } else if roll < 0.5 {
            let at = rng.gen_range(0..s.len());
            s[at] = byte;
        } else {
            let at = rng.gen_range(0..s.len());
            s.remove(at);
        }
    }
    (s.len() <= max_len).then_some(s)
}

/// Strings outside the language, from three interleaved sources: mutated
/// members of `valid_pool`, near-miss walks, and complement walks.
///
/// # Panics
/// If an emitted string passes `nfa_match`.
pub fn generate_invalid_strings(
    nfa: &Nfa,
    dfa: &Dfa,
    valid_pool: &[Vec<u8>],
    count: usize,
    budget: &StringBudget,
) -> StringBatch {
    let max_len = budget.max_len;
    let comp = complement(dfa);
    let comp_live = comp.accepts_within_exactly(max_len);
    if !comp_live.iter().any(|row| row[comp.start()]) {
        return StringBatch { strings: Vec::new(), degenerate: true };
    }
    let near_miss = near_miss_table(dfa, max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.rng_seed);
    let sources = [StringSource::Mutation, StringSource::RejectingWalk, StringSource::ComplementWalk];
    let strings = interleave(count, &sources, |source| match source {
        StringSource::Mutation => {
            mutate(valid_pool, dfa, max_len, &mut rng).filter(|s| !nfa_match(nfa, s))
        }
        StringSource::RejectingWalk => walk_of_random_length(dfa, &near_miss, 0, &mut rng),
        _ => walk_of_random_length(&comp, &comp_live, 0, &mut rng),
    });
    for s in &strings {
        assert!(
            !nfa_match(nfa, &s.bytes),
            "generator bug: {:?} string {:?} is in the language",
            s.source,
            String::from_utf8_lossy(&s.bytes)
        );
    }
    StringBatch { strings, degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::{build_nfa, determinize, minimize, parse_regex, Alphabet, DEFAULT_STATE_CAP};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn automata(pattern: &str, alphabet: Alphabet) -> (Ast, Nfa, Dfa) {
        let ast = parse_regex(pattern, alphabet).unwrap();
        let nfa = build_nfa(&ast, alphabet);
        let dfa = minimize(&determinize(&nfa, DEFAULT_STATE_CAP).unwrap());
        (ast, nfa, dfa)
    }

    fn valid(pattern: &str, alphabet: Alphabet, count: usize, seed: u64) -> StringBatch {
        let (ast, nfa, dfa) = automata(pattern, alphabet);
        generate_valid_strings(&ast, &nfa, &dfa, count, &StringBudget { max_len: 16, rng_seed: seed })
    }

    #[test]
    fn early_outputs_include_the_shortest_members() {
        let batch = valid("ab*c", Alphabet::PRINTABLE, 32, 0);
        let first: Vec<&[u8]> = batch.bytes().take(10).collect();
        assert!(first.contains(&b"ac".as_slice()), "{first:?}");
        assert!(first.contains(&b"abc".as_slice()), "{first:?}");
    }

    #[test]
    fn digit_strings_are_nonempty_digits() {
        let batch = valid("[0-9]+", Alphabet::PRINTABLE, 200, 3);
        assert_eq!(batch.strings.len(), 200);
        assert!(batch.bytes().all(|s| !s.is_empty() && s.iter().all(u8::is_ascii_digit)));
    }

    #[test]
    fn tiny_language_is_listed_once() {
        let ab = Alphabet::new(b'a', b'b').unwrap();
        let batch = valid("a[^a]", ab, 16, 0);
        assert_eq!(batch.bytes().collect::<Vec<_>>(), vec![b"ab".as_slice()]);
    }

    #[test]
    fn empty_and_universal_languages_are_flagged() {
        let ab = Alphabet::new(b'a', b'b').unwrap();
        let (ast, nfa, dfa) = automata("[^ab]", Alphabet::new(b'a', b'c').unwrap());
        let b = generate_valid_strings(&ast, &nfa, &dfa, 8, &StringBudget { max_len: 0, rng_seed: 0 });
        assert!(b.degenerate && b.strings.is_empty());
        let (_, nfa, dfa) = automata(".*", ab);
        let b = generate_invalid_strings(&nfa, &dfa, &[b"a".to_vec()], 8, &StringBudget::default());
        assert!(b.degenerate && b.strings.is_empty());
    }

    #[test]
    fn truncations_show_up_among_invalid_strings() {
        let (ast, nfa, dfa) = automata("ab*c", Alphabet::PRINTABLE);
        let budget = StringBudget { max_len: 8, rng_seed: 0 };
        let pool: Vec<Vec<u8>> =
            generate_valid_strings(&ast, &nfa, &dfa, 16, &budget).bytes().map(<[u8]>::to_vec).collect();
        let bad = generate_invalid_strings(&nfa, &dfa, &pool, 300, &budget);
        assert!(bad.bytes().any(|s| s == b"ab"));
        assert!(bad.bytes().all(|s| !dfa.accepts(s)));
    }

    #[test]
    fn every_source_contributes_a_tenth() {
        let (ast, nfa, dfa) = automata("[a-z]+@[a-z]+\\.(com|org)", Alphabet::PRINTABLE);
        let budget = StringBudget { max_len: 24, rng_seed: 11 };
        let good = generate_valid_strings(&ast, &nfa, &dfa, 1000, &budget);
        let pool: Vec<Vec<u8>> = good.bytes().map(<[u8]>::to_vec).collect();
        let bad = generate_invalid_strings(&nfa, &dfa, &pool, 1000, &budget);
        for batch in [&good, &bad] {
            assert_eq!(batch.strings.len(), 1000);
            let mut by_source: BTreeMap<StringSource, usize> = BTreeMap::new();
            for s in &batch.strings {
                *by_source.entry(s.source).or_default() += 1;
            }
            let expected = if std::ptr::eq(batch, &good) { 2 } else { 3 };
            assert_eq!(by_source.len(), expected, "{by_source:?}");
            assert!(by_source.values().all(|&n| n >= 100), "{by_source:?}");
        }
    }

    #[test]
    fn repeat_counts_average_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let total: u32 = (0..20_000).map(|_| repeat_count(&mut rng)).sum();
        let mean = f64::from(total) / 20_000.0;
        // Capping at 8 trims the mean of the uncapped law slightly below 2.
        assert!((1.85..2.05).contains(&mean), "{mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn labels_hold_and_generation_is_deterministic(
            pattern in prop::sample::select(vec!["ab*c", "(a|b)*abb", "[^a]?b+", "a|bc|d*", "(ab|c)+d?", "."]),
            seed in any::<u64>(),
        ) {
            let ad = Alphabet::new(b'a', b'd').unwrap();
            let (ast, nfa, dfa) = automata(pattern, ad);
            let budget = StringBudget { max_len: 10, rng_seed: seed };
            let good = generate_valid_strings(&ast, &nfa, &dfa, 40, &budget);
            prop_assert_eq!(&good, &generate_valid_strings(&ast, &nfa, &dfa, 40, &budget));
            let pool: Vec<Vec<u8>> = good.bytes().map(<[u8]>::to_vec).collect();
            let bad = generate_invalid_strings(&nfa, &dfa, &pool, 40, &budget);
            prop_assert_eq!(&bad, &generate_invalid_strings(&nfa, &dfa, &pool, 40, &budget));
            for s in good.bytes() {
                prop_assert!(dfa.accepts(s) && s.len() <= 10);
            }
            for s in bad.bytes() {
                prop_assert!(!dfa.accepts(s) && s.len() <= 10);
            }
        }
    }
}
