//! Recursive-descent parser for the textual polynomial form used in problem
//! files.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := power (('*' power) | ('/' number))*
//! power  := atom ('^' integer)?
//! atom   := number | 'x' index | '(' expr ')' | '-' atom
//! ```
//!
//! Variables are `x1 .. xn`; unit coefficients and exponents may be omitted.

use super::{PolyError, Polynomial};

pub fn parse_polynomial(src: &str, nvars: usize) -> Result<Polynomial, PolyError> {
    let mut parser = Parser { src: src.as_bytes(), pos: 0, nvars };
    parser.skip_ws();
    if parser.peek().is_none() {
        return Err(parser.err("empty polynomial"));
    }
    let p = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.err("unexpected trailing input"));
    }
    Ok(p)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolyError {
        PolyError::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut sign = 1.0;
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                sign = -1.0;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        let mut acc = self.term()?.scale(sign);
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.power()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let d = self.number()?;
                    if d == 0.0 {
                        return Err(self.err("division by zero"));
                    }
                    acc = acc.scale(1.0 / d);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Polynomial, PolyError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let e = self.integer()?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.atom()?)
            }
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                let idx = self.integer().map_err(|_| PolyError::Parse {
                    pos: start,
                    msg: "expected variable index after 'x'".into(),
                })? as usize;
                if idx == 0 || idx > self.nvars {
                    return Err(PolyError::Parse {
                        pos: start,
                        msg: format!("variable x{idx} out of range x1..x{}", self.nvars),
                    });
                }
                Ok(Polynomial::var(self.nvars, idx - 1))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(Polynomial::constant(self.nvars, v))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<u32, PolyError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        s.parse().map_err(|_| PolyError::Parse { pos: start, msg: "integer out of range".into() })
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let s = std::str::from_utf8(&bytes[start..i]).expect("ascii number");
        let v: f64 = s.parse().map_err(|_| PolyError::Parse { pos: start, msg: format!("bad number '{s}'") })?;
        self.pos = i;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    #[test]
    fn omitted_coefficients_and_exponents() {
        let p = parse_polynomial("x1*x2^2 - x2 + 3", 2).unwrap();
        assert_eq!(p.coeff(&Monomial::new(&[1, 2])), 1.0);
        assert_eq!(p.coeff(&Monomial::new(&[0, 1])), -1.0);
        assert_eq!(p.coeff(&Monomial::new(&[0, 0])), 3.0);
    }

    #[test]
    fn parentheses_powers_and_division() {
        let p = parse_polynomial("(1 - x1)^2", 1).unwrap();
        assert_eq!(p, parse_polynomial("1 - 2*x1 + x1^2", 1).unwrap());
        let e = parse_polynomial("x1^2/4 + x2^2/9 - 1", 2).unwrap();
        assert_eq!(e.eval(&[2.0, 0.0]).unwrap(), 0.0);
        let s = parse_polynomial("-2.5e-1 * x1 * -x2", 2).unwrap();
        assert_eq!(s.coeff(&Monomial::new(&[1, 1])), 0.25);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "x", "x3", "x0", "2 *", "(x1 + 1", "x1 ^", "x1 + y", "1/0", "x1 x2"] {
            assert!(parse_polynomial(bad, 2).is_err(), "accepted {bad:?}");
        }
    }
}
