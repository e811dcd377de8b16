use std::fmt;

use super::{describe_bytes, Alphabet, ByteSet};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ast {
    Empty,
    Literal(u8),
    /// Normalized ranges (sorted, disjoint, non-adjacent, within the alphabet).
    Class { ranges: Vec<(u8, u8)>, negated: bool },
    Dot,
    Concat(Vec<Ast>),
    Alternation(Vec<Ast>),
    Star(Box<Ast>),
    Plus(Box<Ast>),
    Optional(Box<Ast>),
}

impl Ast {
    /// The bytes a single-symbol node matches, relative to `alphabet`.
    pub fn symbol_set(&self, alphabet: Alphabet) -> Option<ByteSet> {
        match self {
            Ast::Literal(b) => Some(ByteSet::single(*b).intersect(&alphabet.all())),
            Ast::Dot => Some(alphabet.all()),
            Ast::Class { ranges, negated } => {
                let mut s = ByteSet::EMPTY;
                for (lo, hi) in ranges {
                    s = s.union(&ByteSet::range(*lo, *hi));
                }
                let s = s.intersect(&alphabet.all());
                Some(if *negated { alphabet.all().minus(&s) } else { s })
            }
            _ => None,
        }
    }

    pub fn nullable(&self) -> bool {
        match self {
            Ast::Empty | Ast::Star(_) | Ast::Optional(_) => true,
            Ast::Literal(_) | Ast::Class { .. } | Ast::Dot => false,
            Ast::Concat(xs) => xs.iter().all(Ast::nullable),
            Ast::Alternation(xs) => xs.iter().any(Ast::nullable),
            Ast::Plus(x) => x.nullable(),
        }
    }

    /// Number of nodes; used to bound generator effort.
    pub fn size(&self) -> usize {
        1 + match self {
            Ast::Concat(xs) | Ast::Alternation(xs) => xs.iter().map(Ast::size).sum(),
            Ast::Star(x) | Ast::Plus(x) | Ast::Optional(x) => x.size(),
            _ => 0,
        }
    }
}

const META: &[u8] = b"\\.|*+?()[]{}^$";

fn write_literal(f: &mut fmt::Formatter<'_>, b: u8, in_class: bool) -> fmt::Result {
    let special = if in_class { b"\\]^-[".as_slice() } else { META };
    if special.contains(&b) {
        write!(f, "\\{}", b as char)
    } else {
        write!(f, "{}", b as char)
    }
}

/// Prints a pattern that re-parses to the same tree (for printable alphabets).
impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atom = |f: &mut fmt::Formatter<'_>, x: &Ast| -> fmt::Result {
            match x {
                Ast::Concat(_) | Ast::Alternation(_) | Ast::Empty => write!(f, "({x})"),
                Ast::Star(_) | Ast::Plus(_) | Ast::Optional(_) => write!(f, "({x})"),
                _ => write!(f, "{x}"),
            }
        };
        match self {
            Ast::Empty => Ok(()),
            Ast::Literal(b) => write_literal(f, *b, false),
            Ast::Dot => write!(f, "."),
            Ast::Class { ranges, negated } => {
                write!(f, "[{}", if *negated { "^" } else { "" })?;
                for (lo, hi) in ranges {
                    write_literal(f, *lo, true)?;
                    if hi > lo {
                        write!(f, "-")?;
                        write_literal(f, *hi, true)?;
                    }
                }
                write!(f, "]")
            }
            Ast::Concat(xs) => {
                for x in xs {
                    match x {
                        Ast::Alternation(_) | Ast::Empty => write!(f, "({x})")?,
                        _ => write!(f, "{x}")?,
                    }
                }
                Ok(())
            }
            Ast::Alternation(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    match x {
                        Ast::Alternation(_) => write!(f, "({x})")?,
                        _ => write!(f, "{x}")?,
                    }
                }
                Ok(())
            }
            Ast::Star(x) => {
                atom(f, x)?;
                write!(f, "*")
            }
            Ast::Plus(x) => {
                atom(f, x)?;
                write!(f, "+")
            }
            Ast::Optional(x) => {
                atom(f, x)?;
                write!(f, "?")
            }
        }
    }
}

impl Ast {
    /// Human-readable summary of a symbol node, e.g. `[a-f]`.
    pub fn describe_symbol(&self, alphabet: Alphabet) -> Option<String> {
        self.symbol_set(alphabet).map(|s| describe_bytes(&s))
    }
}
