//! A small weighted BNF dialect.
//!
//! ```text
//! # comment
//! <rule>  ::= <other> "lit" [3] | "x"
//!           | <more>
//! ```
//!
//! Terminals are double-quoted (`\"` and `\\` escape), an optional `[w]` at the
//! end of an alternative sets its weight (default 1), and the first rule is
//! the start symbol.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::regex::Alphabet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule {rule}: undefined nonterminal {name}")]
    Undefined { rule: String, name: String },
    #[error("rule {0} is defined twice")]
    Duplicate(String),
    #[error("rule {0} is unproductive (derives no finite string)")]
    Unproductive(String),
    #[error("grammar has no rules")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub symbols: Vec<Symbol>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub alternatives: Vec<Alternative>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    rules: Vec<Rule>,
    start: usize,
    /// Minimal derivation depth per rule.
    min_depth: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenBudget {
    pub max_depth: u32,
    pub max_regex_len: usize,
    pub rng_seed: u64,
}

impl Default for GenBudget {
    fn default() -> Self {
        GenBudget { max_depth: 8, max_regex_len: 24, rng_seed: 0 }
    }
}

struct RawRule {
    name: String,
    line: usize,
    alternatives: Vec<(Vec<RawSymbol>, f64)>,
}

enum RawSymbol {
    T(String),
    N(String),
}

fn tokenize_rhs(text: &str, line: usize) -> Result<Vec<(Vec<RawSymbol>, f64)>, GrammarError> {
    let err = |message: String| GrammarError::Syntax { line, message };
    let mut alts = vec![(Vec::new(), 1.0)];
    let mut chars = text.chars().peekable();
    let mut weighted = false;
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '|' => {
                chars.next();
                alts.push((Vec::new(), 1.0));
                weighted = false;
            }
            '"' => {
                chars.next();
                let mut lit = String::new();
                loop {
                    match chars.next() {
                        None => return Err(err("unterminated terminal".into())),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(e @ ('"' | '\\')) => lit.push(e),
                            _ => return Err(err("terminals only escape \\\" and \\\\".into())),
                        },
                        Some(x) => lit.push(x),
                    }
                }
                if lit.is_empty() {
                    return Err(err("empty terminal".into()));
                }
                if weighted {
                    return Err(err("weight must end its alternative".into()));
                }
                alts.last_mut().unwrap().0.push(RawSymbol::T(lit));
            }
            '<' => {
                chars.next();
                let name: String = chars.by_ref().take_while(|c| *c != '>').collect();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(err(format!("bad nonterminal <{name}>")));
                }
                if weighted {
                    return Err(err("weight must end its alternative".into()));
                }
                alts.last_mut().unwrap().0.push(RawSymbol::N(name));
            }
            '[' => {
                chars.next();
                let w: String = chars.by_ref().take_while(|c| *c != ']').collect();
                let w: f64 = w.trim().parse().map_err(|_| err(format!("bad weight [{w}]")))?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(err(format!("weight must be positive, got {w}")));
                }
                alts.last_mut().unwrap().1 = w;
                weighted = true;
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        }
    }
    if alts.iter().any(|(syms, _)| syms.is_empty()) {
        return Err(err("empty alternative".into()));
    }
    Ok(alts)
}

/// Parses and validates a grammar: all referenced rules defined, none
/// unproductive.
pub fn parse_bnf(text: &str) -> Result<Grammar, GrammarError> {
    let mut raw: Vec<RawRule> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('|') {
            let rule = raw.last_mut().ok_or(GrammarError::Syntax {
                line: line_no,
                message: "continuation before any rule".into(),
            })?;
            rule.alternatives.extend(tokenize_rhs(rest, line_no)?);
            continue;
        }
        let (lhs, rhs) = trimmed.split_once("::=").ok_or(GrammarError::Syntax {
            line: line_no,
            message: "expected <name> ::= ...".into(),
        })?;
        let lhs = lhs.trim();
        let name = lhs
            .strip_prefix('<')
            .and_then(|s| s.strip_suffix('>'))
            .filter(|s| !s.is_empty())
            .ok_or(GrammarError::Syntax {
                line: line_no,
                message: format!("bad rule name {lhs:?}"),
            })?;
        raw.push(RawRule {
            name: name.to_string(),
            line: line_no,
            alternatives: tokenize_rhs(rhs, line_no)?,
        });
    }
    if raw.is_empty() {
        return Err(GrammarError::Empty);
    }
    let mut index = HashMap::new();
    for (i, r) in raw.iter().enumerate() {
        if index.insert(r.name.clone(), i).is_some() {
            return Err(GrammarError::Duplicate(r.name.clone()));
        }
    }
    let mut rules = Vec::with_capacity(raw.len());
    for r in &raw {
        let _ = r.line;
        let mut alternatives = Vec::new();
        for (syms, weight) in &r.alternatives {
            let mut symbols = Vec::new();
            for s in syms {
                symbols.push(match s {
                    RawSymbol::T(t) => Symbol::Terminal(t.clone()),
                    RawSymbol::N(n) => Symbol::Nonterminal(*index.get(n).ok_or_else(|| {
                        GrammarError::Undefined { rule: r.name.clone(), name: n.clone() }
                    })?),
                });
            }
            alternatives.push(Alternative { symbols, weight: *weight });
        }
        rules.push(Rule { name: r.name.clone(), alternatives });
    }
    Grammar::from_rules(rules, 0)
}

impl Grammar {
    fn from_rules(rules: Vec<Rule>, start: usize) -> Result<Grammar, GrammarError> {
        let min_depth = compute_min_depth(&rules)?;
        Ok(Grammar { rules, start, min_depth })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn rule(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.name == name)
    }

    pub fn min_depth(&self, rule: usize) -> u32 {
        self.min_depth[rule]
    }

    pub fn alternative_depth(&self, alt: &Alternative) -> u32 {
        alt_depth(alt, &self.min_depth.iter().map(|d| Some(*d)).collect::<Vec<_>>())
            .expect("validated grammar")
    }

    /// Alternatives taken once the depth budget is spent.
    pub fn minimal_alternatives(&self, rule: usize) -> Vec<&Alternative> {
        self.rules[rule]
            .alternatives
            .iter()
            .filter(|a| self.alternative_depth(a) == self.min_depth[rule])
            .collect()
    }

    /// Drops every alternative containing a literal terminal whose byte lies
    /// outside `alphabet`, then revalidates. Pure-syntax terminals are kept.
    pub fn restricted_to(&self, alphabet: Alphabet) -> Result<Grammar, GrammarError> {
        const SYNTAX: &[&str] = &["(", ")", "|", "*", "+", "?", ".", "[", "[^", "]", "-"];
        let allowed = |t: &str| {
            SYNTAX.contains(&t)
                || t.bytes().last().is_some_and(|b| alphabet.contains(b))
                    && (t.len() == 1 || (t.len() == 2 && t.starts_with('\\')))
        };
        let rules = self
            .rules
            .iter()
            .map(|r| Rule {
                name: r.name.clone(),
                alternatives: r
                    .alternatives
                    .iter()
                    .filter(|a| {
                        a.symbols.iter().all(|s| match s {
                            Symbol::Terminal(t) => allowed(t),
                            Symbol::Nonterminal(_) => true,
                        })
                    })
                    .cloned()
                    .collect(),
            })
            .collect();
        Grammar::from_rules(rules, self.start)
    }
}

fn alt_depth(alt: &Alternative, depth: &[Option<u32>]) -> Option<u32> {
    let mut d = 0;
    for s in &alt.symbols {
        if let Symbol::Nonterminal(n) = s {
            d = d.max(depth[*n]?);
        }
    }
    Some(d + 1)
}

fn compute_min_depth(rules: &[Rule]) -> Result<Vec<u32>, GrammarError> {
    let mut depth: Vec<Option<u32>> = vec![None; rules.len()];
    loop {
        let mut changed = false;
        for (i, r) in rules.iter().enumerate() {
            let best = r.alternatives.iter().filter_map(|a| alt_depth(a, &depth)).min();
            if best.is_some() && (depth[i].is_none() || best < depth[i]) {
                depth[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    depth
        .iter()
        .enumerate()
        .map(|(i, d)| d.ok_or_else(|| GrammarError::Unproductive(rules[i].name.clone())))
        .collect()
}

fn choose<'a>(alts: &[&'a Alternative], rng: &mut ChaCha8Rng) -> &'a Alternative {
    let total: f64 = alts.iter().map(|a| a.weight).sum();
    let mut x = rng.gen::<f64>() * total;
    for a in alts {
        if x < a.weight {
            return a;
        }
        x -= a.weight;
    }
    alts[alts.len() - 1]
}

fn expand(g: &Grammar, rule: usize, depth: u32, max_depth: u32, out: &mut String, rng: &mut ChaCha8Rng) {
    let alts: Vec<&Alternative> = if depth >= max_depth {
        g.minimal_alternatives(rule)
    } else {
        g.rules[rule].alternatives.iter().collect()
    };
    let alt = choose(&alts, rng);
    for s in &alt.symbols {
        match s {
            Symbol::Terminal(t) => out.push_str(t),
            Symbol::Nonterminal(n) => expand(g, *n, depth + 1, max_depth, out, rng),
        }
    }
}

/// One weighted derivation from the start symbol, drawing from `rng`. Outputs
/// longer than `max_len` are redrawn a few times, then the depth budget is
/// dropped to zero to force a minimal derivation.
pub fn generate_regex_with(g: &Grammar, max_depth: u32, max_len: usize, rng: &mut ChaCha8Rng) -> String {
    for attempt in 0..16 {
        let mut out = String::new();
        let depth = if attempt < 15 { max_depth } else { 0 };
        expand(g, g.start, 0, depth, &mut out, rng);
        if out.len() <= max_len || attempt == 15 {
            return out;
        }
    }
    unreachable!()
}

pub fn generate_regex(g: &Grammar, budget: &GenBudget) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.rng_seed);
    generate_regex_with(g, budget.max_depth, budget.max_regex_len, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn parses_weights_and_continuations() {
        let g = parse_bnf(
            "# demo\n<s> ::= <x> \"!\" [2.5] | \"q\"\n  | <x>\n<x> ::= \"a\" | \"\\\"\"\n",
        )
        .unwrap();
        assert_eq!(g.rules().len(), 2);
        assert_eq!(g.rules()[0].alternatives.len(), 3);
        assert_eq!(g.rules()[0].alternatives[0].weight, 2.5);
        assert_eq!(g.rules()[1].alternatives[1].symbols, vec![Symbol::Terminal("\"".into())]);
        assert_eq!(g.min_depth(0), 1);
        assert_eq!(g.min_depth(1), 1);
    }

    #[test]
    fn load_errors_name_the_rule() {
        assert_eq!(
            parse_bnf("<s> ::= <klass>\n").unwrap_err().to_string(),
            "rule s: undefined nonterminal klass"
        );
        assert_eq!(parse_bnf("<s> ::= <s>\n").unwrap_err(), GrammarError::Unproductive("s".into()));
        assert!(matches!(parse_bnf("<s> ::= \"a\" |\n"), Err(GrammarError::Syntax { line: 1, .. })));
        assert!(matches!(parse_bnf("s ::= \"a\"\n"), Err(GrammarError::Syntax { .. })));
        assert!(matches!(parse_bnf("<s> ::= \"a\" [0]\n"), Err(GrammarError::Syntax { .. })));
        assert_eq!(parse_bnf("# nothing\n"), Err(GrammarError::Empty));
        assert!(matches!(
            parse_bnf("<s> ::= \"a\"\n<s> ::= \"b\"\n"),
            Err(GrammarError::Duplicate(_))
        ));
    }

    #[test]
    fn same_seed_same_output() {
        let g = parse_bnf("<s> ::= \"a\" <s> | \"b\" <s> | \"c\"\n").unwrap();
        let budget = GenBudget { max_depth: 6, max_regex_len: 100, rng_seed: 42 };
        assert_eq!(generate_regex(&g, &budget), generate_regex(&g, &budget));
        let outputs: BTreeSet<String> =
            (0..50).map(|s| generate_regex(&g, &GenBudget { rng_seed: s, ..budget })).collect();
        assert!(outputs.len() > 5);
        assert!(outputs.iter().all(|o| o.len() <= 7 && o.ends_with('c')));
    }
}
