//! Recursive-descent parser for polynomial expressions.
//!
//! ```text
//! rational ::= int | int "/" posint
//! var      ::= "x" posint
//! atom     ::= rational | var | "(" expr ")"
//! factor   ::= atom ["^" posint]
//! term     ::= factor {"*" factor}
//! expr     ::= ["-"] term {("+"|"-") term}
//! ```

use num::{BigInt, Zero};

use crate::error::{Error, Result};
use crate::poly::{Poly, Rational};

pub fn parse_poly(text: &str, dim: usize) -> Result<Poly> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, dim };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok(s.parse::<BigInt>().unwrap())
    }

    fn posint(&mut self) -> Result<BigInt> {
        let at = self.pos;
        let n = self.digits()?;
        if n.is_zero() {
            return Err(Error::Parse { pos: at, msg: "expected positive integer".into() });
        }
        Ok(n)
    }

    fn expr(&mut self) -> Result<Poly> {
        let neg = self.eat(b'-');
        let mut acc = self.term()?;
        if neg {
            acc = -&acc;
        }
        loop {
            if self.eat(b'+') {
                acc = &acc + &self.term()?;
            } else if self.eat(b'-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.factor()?;
        while self.eat(b'*') {
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let e = self.posint()?;
            let e: u32 = e.try_into().map_err(|_| self.err("exponent too large"))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(b'x') => {
                self.pos += 1;
                let at = self.pos;
                let i = self.posint()?;
                let i: usize = i.try_into().map_err(|_| self.err("index too large"))?;
                if i > self.dim {
                    return Err(Error::Parse {
                        pos: at,
                        msg: format!("coordinate x{i} exceeds dimension {}", self.dim),
                    });
                }
                Poly::var(self.dim, i)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.digits()?;
                let mut r = Rational::from_integer(n);
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    let d = self.posint()?;
                    r /= Rational::from_integer(d);
                }
                Ok(Poly::constant(self.dim, r))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    #[test]
    fn grammar_examples() {
        let p = parse_poly("x1*x2 + 3/2", 2).unwrap();
        let want = &(&Poly::var(2, 1).unwrap() * &Poly::var(2, 2).unwrap()) + &Poly::constant(2, rat(3, 2));
        assert_eq!(p, want);
        assert!(parse_poly("0", 3).unwrap().is_zero());
        assert!(parse_poly("x1^2*x3 - x1^2*x3", 3).unwrap().is_zero());
    }

    #[test]
    fn nested_and_negation() {
        let p = parse_poly("-(x1 - 2)^2 + 4*x1", 1).unwrap();
        assert_eq!(p, parse_poly("-x1^2 + 8*x1 - 4", 1).unwrap());
    }

    #[test]
    fn errors_carry_position() {
        match parse_poly("x1 + x4", 3) {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_poly("x1 +", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("3/0", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("x0", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("x1 x2", 2), Err(Error::Parse { .. })));
    }
}
