//! Input generation: regexes from a weighted grammar, and labelled strings
//! inside and outside a regex's language.

mod grammar;
mod strings;

use std::path::Path;

pub use grammar::{
    generate_regex, generate_regex_with, parse_bnf, Alternative, GenBudget, Grammar, GrammarError, Rule,
    Symbol,
};
pub use strings::{
    generate_invalid_strings, generate_valid_strings, GeneratedString, StringBatch, StringBudget,
    StringSource, MAX_REPEAT,
};

use crate::regex::{parse_regex, Alphabet, RegexError};

/// The grammar shipped in `grammar/regex-fragment.bnf`.
pub const SHIPPED_GRAMMAR: &str = include_str!("../../../../grammar/regex-fragment.bnf");

pub fn shipped_grammar() -> Grammar {
    parse_bnf(SHIPPED_GRAMMAR).expect("shipped grammar is valid")
}

#[derive(Debug, Clone, Default)]
pub struct CorpusLoad {
    pub patterns: Vec<String>,
    /// (line number, pattern, reason) for every line that did not parse.
    pub skipped: Vec<(usize, String, RegexError)>,
}

/// Splits corpus text into patterns, skipping blank and `#` lines and logging
/// patterns outside the supported fragment.
pub fn parse_seed_corpus(text: &str, alphabet: Alphabet) -> CorpusLoad {
    let mut load = CorpusLoad::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_regex(line, alphabet) {
            Ok(_) => load.patterns.push(line.to_string()),
            Err(e) => {
                log::warn!("corpus line {}: skipping {line:?}: {e}", i + 1);
                load.skipped.push((i + 1, line.to_string(), e));
            }
        }
    }
    load
}

pub fn load_seed_corpus(path: &Path, alphabet: Alphabet) -> std::io::Result<CorpusLoad> {
    Ok(parse_seed_corpus(&std::fs::read_to_string(path)?, alphabet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn derives_seq(g: &Grammar, syms: &[Symbol], s: &str) -> bool {
        match syms.split_first() {
            None => s.is_empty(),
            Some((Symbol::Terminal(t), rest)) => s.strip_prefix(t.as_str()).is_some_and(|r| derives_seq(g, rest, r)),
            Some((Symbol::Nonterminal(n), rest)) => (1..=s.len())
                .any(|k| s.is_char_boundary(k) && derives(g, *n, &s[..k]) && derives_seq(g, rest, &s[k..])),
        }
    }

    fn derives(g: &Grammar, rule: usize, s: &str) -> bool {
        g.rules()[rule].alternatives.iter().any(|a| derives_seq(g, &a.symbols, s))
    }

    /// Every string derivable when alternatives below `limit` are free and
    /// deeper ones must be of smallest possible height, with heights computed
    /// by brute force rather than the grammar's own table.
    fn bounded_language(g: &Grammar, limit: u32) -> BTreeSet<String> {
        fn height(g: &Grammar, rule: usize, fuel: u32) -> Option<u32> {
            if fuel == 0 {
                return None;
            }
            g.rules()[rule].alternatives.iter().filter_map(|a| alt_height(g, a, fuel)).min()
        }
        fn alt_height(g: &Grammar, a: &Alternative, fuel: u32) -> Option<u32> {
            let mut h = 0;
            for s in &a.symbols {
                if let Symbol::Nonterminal(n) = s {
                    h = h.max(height(g, *n, fuel - 1)?);
                }
            }
            Some(h + 1)
        }
        fn lang(g: &Grammar, rule: usize, depth: u32, limit: u32) -> BTreeSet<String> {
            let best = height(g, rule, 12).unwrap();
            let mut out = BTreeSet::new();
            for a in &g.rules()[rule].alternatives {
                if depth >= limit && alt_height(g, a, 12) != Some(best) {
                    continue;
                }
                let mut acc: BTreeSet<String> = [String::new()].into();
                for s in &a.symbols {
                    let parts = match s {
                        Symbol::Terminal(t) => [t.clone()].into(),
                        Symbol::Nonterminal(n) => lang(g, *n, depth + 1, limit),
                    };
                    acc = acc.iter().flat_map(|x| parts.iter().map(move |y| format!("{x}{y}"))).collect();
                }
                out.extend(acc);
            }
            out
        }
        lang(g, g.start(), 0, limit)
    }

    #[test]
    fn shipped_grammar_loads_and_derives_a_literal() {
        let g = shipped_grammar();
        assert_eq!(g.rules()[g.start()].name, "regex");
        assert!(derives(&g, g.start(), "a"));
        assert!(derives(&g, g.start(), "(a|b)*c"));
        assert!(!derives(&g, g.start(), "a{2}"));
    }

    #[test]
    fn generated_patterns_always_parse() {
        let g = shipped_grammar();
        let ad = Alphabet::new(b'a', b'd').unwrap();
        let small = g.restricted_to(ad).unwrap();
        for seed in 0..10_000 {
            let budget = GenBudget { rng_seed: seed, ..GenBudget::default() };
            let p = generate_regex(&g, &budget);
            assert!(p.len() <= budget.max_regex_len, "{p}");
            parse_regex(&p, Alphabet::PRINTABLE).unwrap_or_else(|e| panic!("{p:?}: {e}"));
            let q = generate_regex(&small, &budget);
            parse_regex(&q, ad).unwrap_or_else(|e| panic!("{q:?}: {e}"));
            assert!(q.bytes().all(|b| ad.contains(b) || b"()|*+?.[]^-".contains(&b)), "{q}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let g = shipped_grammar();
        let budget = GenBudget { rng_seed: 42, ..GenBudget::default() };
        assert_eq!(generate_regex(&g, &budget), generate_regex(&g, &budget));
    }

    #[test]
    fn depth_one_draws_minimal_derivations() {
        let g = shipped_grammar();
        let minimal = bounded_language(&g, 1);
        // `<atom>` and `<atom> <quant>` tie for the smallest height.
        assert_eq!(minimal, BTreeSet::from([".", ".*", ".+", ".?"].map(String::from)));
        for seed in 0..200 {
            let p = generate_regex(&g, &GenBudget { max_depth: 1, max_regex_len: 64, rng_seed: seed });
            assert!(minimal.contains(&p), "{p}");
        }
        let two = bounded_language(&g, 2);
        for seed in 0..200 {
            let p = generate_regex(&g, &GenBudget { max_depth: 2, max_regex_len: 64, rng_seed: seed });
            assert!(two.contains(&p), "{p}");
        }
    }

    #[test]
    fn corpus_skips_lines_outside_the_fragment() {
        let load = parse_seed_corpus("# c\nab*c\n\n^a$\n[0-9]+\n", Alphabet::PRINTABLE);
        assert_eq!(load.patterns, vec!["ab*c", "[0-9]+"]);
        assert_eq!(load.skipped.len(), 1);
        assert_eq!(load.skipped[0].0, 4);
        assert!(parse_seed_corpus("", Alphabet::PRINTABLE).patterns.is_empty());

        let dir = tempfile::tempdir().unwrap();
        assert!(load_seed_corpus(&dir.path().join("missing.txt"), Alphabet::PRINTABLE).is_err());
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/seed-regexes.txt");
        let shipped = load_seed_corpus(Path::new(path), Alphabet::PRINTABLE).unwrap();
        assert_eq!(shipped.patterns.len(), 16);
        assert_eq!(shipped.skipped.len(), 4);
    }
}
