use super::{Alphabet, Ast, RegexError};

/// Bytes that may follow a backslash and then stand for themselves.
const ESCAPABLE: &[u8] = b"\\.|*+?()[]{}^$-/";

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    alphabet: Alphabet,
}

/// Parses `pattern` in the supported fragment. Class ranges are clipped to the
/// alphabet; a bare literal outside it is an error.
pub fn parse_regex(pattern: &str, alphabet: Alphabet) -> Result<Ast, RegexError> {
    let mut p = Parser { src: pattern.as_bytes(), pos: 0, alphabet };
    let ast = p.alternation()?;
    match p.peek() {
        None => Ok(ast),
        Some(b')') => Err(p.syntax("unmatched ')'")),
        Some(_) => Err(p.syntax("unexpected character")),
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> RegexError {
        RegexError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn unsupported(&self, construct: &'static str) -> RegexError {
        RegexError::Unsupported { offset: self.pos, construct }
    }

    fn alternation(&mut self) -> Result<Ast, RegexError> {
        let mut branches = vec![self.concat()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Ast::Alternation(branches) })
    }

    fn concat(&mut self) -> Result<Ast, RegexError> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == b'|' || c == b')' {
                break;
            }
            items.push(self.repeat()?);
        }
        Ok(match items.len() {
            0 => Ast::Empty,
            1 => items.pop().unwrap(),
            _ => Ast::Concat(items),
        })
    }

    fn repeat(&mut self) -> Result<Ast, RegexError> {
        let mut node = self.atom()?;
        loop {
            node = match self.peek() {
                Some(b'*') => Ast::Star(Box::new(node)),
                Some(b'+') => Ast::Plus(Box::new(node)),
                Some(b'?') => Ast::Optional(Box::new(node)),
                Some(b'{') => return Err(self.unsupported("bounded repetition {m,n}")),
                _ => return Ok(node),
            };
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> Result<Ast, RegexError> {
        let c = self.peek().ok_or_else(|| self.syntax("unexpected end of pattern"))?;
        match c {
            b'(' => {
                if self.src.get(self.pos + 1) == Some(&b'?') {
                    return Err(self.unsupported("lookaround or group modifier (?...)"));
                }
                self.pos += 1;
                let inner = self.alternation()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("missing ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            b'[' => self.class(),
            b'.' => {
                self.pos += 1;
                Ok(Ast::Dot)
            }
            b'^' | b'$' => Err(self.unsupported("anchor")),
            b'*' | b'+' | b'?' => Err(self.syntax("quantifier without operand")),
            b'{' => Err(self.unsupported("bounded repetition {m,n}")),
            b']' | b'}' => Err(self.syntax("unbalanced bracket")),
            b'\\' => {
                let b = self.escape()?;
                Ok(Ast::Literal(b))
            }
            _ => {
                let offset = self.pos;
                self.pos += 1;
                self.in_alphabet(c, offset)?;
                Ok(Ast::Literal(c))
            }
        }
    }

    fn in_alphabet(&self, byte: u8, offset: usize) -> Result<(), RegexError> {
        if self.alphabet.contains(byte) {
            Ok(())
        } else {
            Err(RegexError::OutsideAlphabet { offset, byte, alphabet: self.alphabet })
        }
    }

    /// Consumes `\x` and returns the literal byte.
    fn escape(&mut self) -> Result<u8, RegexError> {
        let offset = self.pos;
        self.pos += 1;
        let c = self.peek().ok_or_else(|| self.syntax("dangling backslash"))?;
        if c.is_ascii_digit() {
            return Err(self.unsupported("backreference"));
        }
        if b"dDwWsS".contains(&c) {
            return Err(self.unsupported("shorthand character class"));
        }
        if b"bBAzZ".contains(&c) {
            return Err(self.unsupported("anchor"));
        }
        if !ESCAPABLE.contains(&c) {
            return Err(self.syntax("unknown escape"));
        }
        self.pos += 1;
        self.in_alphabet(c, offset)?;
        Ok(c)
    }

    fn class_byte(&mut self) -> Result<u8, RegexError> {
        match self.peek() {
            None => Err(self.syntax("unterminated character class")),
            Some(b'\\') => {
                let offset = self.pos;
                self.pos += 1;
                let c = self.peek().ok_or_else(|| self.syntax("dangling backslash"))?;
                if !ESCAPABLE.contains(&c) {
                    return Err(RegexError::Syntax {
                        offset,
                        message: "unknown escape in class".into(),
                    });
                }
                self.pos += 1;
                Ok(c)
            }
            Some(b'[') => Err(self.unsupported("nested or POSIX character class")),
            Some(c) => {
                self.pos += 1;
                Ok(c)
            }
        }
    }

    fn class(&mut self) -> Result<Ast, RegexError> {
        self.pos += 1;
        let negated = self.peek() == Some(b'^');
        if negated {
            self.pos += 1;
        }
        let mut raw: Vec<(u8, u8)> = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.syntax("unterminated character class")),
                Some(b']') if raw.is_empty() => return Err(self.syntax("empty character class")),
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                _ => {}
            }
            let start = self.pos;
            let lo = self.class_byte()?;
            let is_range = self.peek() == Some(b'-') && self.src.get(self.pos + 1) != Some(&b']');
            if is_range {
                self.pos += 1;
                let hi = self.class_byte()?;
                if hi < lo {
                    return Err(RegexError::Syntax {
                        offset: start,
                        message: "range out of order".into(),
                    });
                }
                raw.push((lo, hi));
            } else {
                raw.push((lo, lo));
            }
        }
        Ok(Ast::Class { ranges: normalize(&raw, self.alphabet), negated })
    }
}

fn normalize(raw: &[(u8, u8)], alphabet: Alphabet) -> Vec<(u8, u8)> {
    let mut clipped: Vec<(u8, u8)> = raw
        .iter()
        .filter_map(|&(lo, hi)| {
            let lo = lo.max(alphabet.lo);
            let hi = hi.min(alphabet.hi);
            (lo <= hi).then_some((lo, hi))
        })
        .collect();
    clipped.sort_unstable();
    let mut out: Vec<(u8, u8)> = Vec::new();
    for (lo, hi) in clipped {
        match out.last_mut() {
            Some((_, h)) if lo as u16 <= *h as u16 + 1 => *h = (*h).max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}
