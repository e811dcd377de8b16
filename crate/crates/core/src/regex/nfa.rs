use super::{Alphabet, Ast, ByteSet};

/// Thompson NFA. Byte-labelled transitions plus epsilon moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nfa {
    pub alphabet: Alphabet,
    pub states: usize,
    pub start: usize,
    pub accepting: Vec<bool>,
    pub transitions: Vec<(usize, ByteSet, usize)>,
    pub epsilon: Vec<(usize, usize)>,
    out_bytes: Vec<Vec<(ByteSet, usize)>>,
    out_eps: Vec<Vec<usize>>,
}

struct Builder {
    alphabet: Alphabet,
    states: usize,
    transitions: Vec<(usize, ByteSet, usize)>,
    epsilon: Vec<(usize, usize)>,
}

impl Builder {
    fn state(&mut self) -> usize {
        self.states += 1;
        self.states - 1
    }

    /// Returns (entry, exit) of the fragment for `ast`.
    fn fragment(&mut self, ast: &Ast) -> (usize, usize) {
        match ast {
            Ast::Empty => {
                let s = self.state();
                (s, s)
            }
            Ast::Literal(_) | Ast::Dot | Ast::Class { .. } => {
                let set = ast.symbol_set(self.alphabet).expect("symbol node");
                let (s, e) = (self.state(), self.state());
                if !set.is_empty() {
                    self.transitions.push((s, set, e));
                }
                (s, e)
            }
            Ast::Concat(xs) => {
                let (first, mut prev) = self.fragment(&xs[0]);
                for x in &xs[1..] {
                    let (s, e) = self.fragment(x);
                    self.epsilon.push((prev, s));
                    prev = e;
                }
                (first, prev)
            }
            Ast::Alternation(xs) => {
                let (s, e) = (self.state(), self.state());
                for x in xs {
                    let (xs_, xe) = self.fragment(x);
                    self.epsilon.push((s, xs_));
                    self.epsilon.push((xe, e));
                }
                (s, e)
            }
            Ast::Star(x) | Ast::Plus(x) | Ast::Optional(x) => {
                let (s, e) = (self.state(), self.state());
                let (xs_, xe) = self.fragment(x);
                self.epsilon.push((s, xs_));
                self.epsilon.push((xe, e));
                if !matches!(ast, Ast::Plus(_)) {
                    self.epsilon.push((s, e));
                }
                if !matches!(ast, Ast::Optional(_)) {
                    self.epsilon.push((xe, xs_));
                }
                (s, e)
            }
        }
    }
}

pub fn build_nfa(ast: &Ast, alphabet: Alphabet) -> Nfa {
    let mut b = Builder { alphabet, states: 0, transitions: Vec::new(), epsilon: Vec::new() };
    let (start, end) = b.fragment(ast);
    let mut accepting = vec![false; b.states];
    accepting[end] = true;
    Nfa::from_parts(alphabet, b.states, start, accepting, b.transitions, b.epsilon)
}

impl Nfa {
    pub fn from_parts(
        alphabet: Alphabet,
        states: usize,
        start: usize,
        accepting: Vec<bool>,
        transitions: Vec<(usize, ByteSet, usize)>,
        epsilon: Vec<(usize, usize)>,
    ) -> Nfa {
        assert!(start < states && accepting.len() == states);
        let mut out_bytes = vec![Vec::new(); states];
        let mut out_eps = vec![Vec::new(); states];
        for &(f, set, t) in &transitions {
            assert!(f < states && t < states);
            out_bytes[f].push((set, t));
        }
        for &(f, t) in &epsilon {
            assert!(f < states && t < states);
            out_eps[f].push(t);
        }
        Nfa { alphabet, states, start, accepting, transitions, epsilon, out_bytes, out_eps }
    }

    /// Epsilon closure of `set`, in place. `set` is a membership vector.
    pub fn close(&self, set: &mut [bool]) {
        let mut stack: Vec<usize> = (0..self.states).filter(|&s| set[s]).collect();
        while let Some(s) = stack.pop() {
            for &t in &self.out_eps[s] {
                if !set[t] {
                    set[t] = true;
                    stack.push(t);
                }
            }
        }
    }

    pub fn start_set(&self) -> Vec<bool> {
        let mut set = vec![false; self.states];
        set[self.start] = true;
        self.close(&mut set);
        set
    }

    /// Closed successor set of `set` on byte `b`.
    pub fn step(&self, set: &[bool], b: u8) -> Vec<bool> {
        let mut next = vec![false; self.states];
        if self.alphabet.contains(b) {
            for (s, _) in set.iter().enumerate().filter(|(_, on)| **on) {
                for (bytes, t) in &self.out_bytes[s] {
                    if bytes.contains(b) {
                        next[*t] = true;
                    }
                }
            }
            self.close(&mut next);
        }
        next
    }

    pub fn any_accepting(&self, set: &[bool]) -> bool {
        set.iter().zip(&self.accepting).any(|(on, acc)| *on && *acc)
    }

    pub(crate) fn byte_edges(&self, s: usize) -> &[(ByteSet, usize)] {
        &self.out_bytes[s]
    }
}

/// Whole-string membership by on-the-fly subset simulation. Bytes outside the
/// alphabet reject.
pub fn nfa_match(nfa: &Nfa, input: &[u8]) -> bool {
    let mut set = nfa.start_set();
    for &b in input {
        set = nfa.step(&set, b);
        if !set.iter().any(|x| *x) {
            return false;
        }
    }
    nfa.any_accepting(&set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::parse_regex;

    fn m(pat: &str, s: &str) -> bool {
        let a = Alphabet::default();
        nfa_match(&build_nfa(&parse_regex(pat, a).unwrap(), a), s.as_bytes())
    }

    #[test]
    fn spec_examples() {
        assert!(m("ab*c", "abbc"));
        assert!(!m("ab*c", "ab"));
        assert!(m("", ""));
        assert!(!m("", "a"));
        assert!(m("a", "a"));
        assert!(!m("a", "aa"));
        assert!(!m("a", ""));
    }

    #[test]
    fn quantifiers_and_alternation() {
        assert!(m("(ab)+", "abab"));
        assert!(!m("(ab)+", ""));
        assert!(m("x(a|b)?y", "xy"));
        assert!(m("x(a|b)?y", "xby"));
        assert!(!m("x(a|b)?y", "xaby"));
        assert!(m("[^a]*", "bcd"));
        assert!(!m("[^a]*", "bad"));
        assert!(m("(a*)*", ""));
    }

    #[test]
    fn bytes_outside_alphabet_reject() {
        assert!(!m(".", "\n"));
        assert!(!m(".*", "ab\u{7f}"));
    }
}
