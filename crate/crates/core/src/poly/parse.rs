//! Polynomial text input.
//!
//! Grammar: terms joined by `+`/`-`; a term is a product of factors, `*`
//! optional; a factor is an integer or fraction literal, a variable (`t`,
//! `x1..`, `z2..`, `Y1`, `Y2`) or a parenthesised expression, optionally
//! raised to an integer power with `^` (negative powers only for `t`).

use num_bigint::BigInt;

use super::{Monomial, Poly, Scalar, VarId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse polynomial at byte {pos}: {msg}")]
pub struct ParsePolyError {
    pub pos: usize,
    pub msg: String,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

pub(super) fn parse_poly(s: &str) -> Result<Poly, ParsePolyError> {
    let mut p = Parser {
        src: s.as_bytes(),
        pos: 0,
    };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ParsePolyError {
        ParsePolyError {
            pos: self.pos,
            msg: msg.to_string(),
        }
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

    fn expr(&mut self) -> Result<Poly, ParsePolyError> {
        let mut acc = Poly::zero();
        let mut first = true;
        loop {
            let neg = match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    false
                }
                Some(b'-') => {
                    self.pos += 1;
                    true
                }
                _ if first => false,
                _ => break,
            };
            first = false;
            let t = self.term()?;
            acc = if neg { &acc - &t } else { &acc + &t };
        }
        Ok(acc)
    }

    fn starts_factor(c: u8) -> bool {
        c.is_ascii_digit() || c == b'(' || matches!(c, b't' | b'x' | b'z' | b'Y' | b'y')
    }

    fn term(&mut self) -> Result<Poly, ParsePolyError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = &acc * &f;
                }
                Some(c) if Self::starts_factor(c) => {
                    let f = self.factor()?;
                    acc = &acc * &f;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly, ParsePolyError> {
        let start = self.pos;
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.signed_int()?;
            if e < 0 {
                return base
                    .monomial_inverse()
                    .map(|inv| inv.pow((-e) as u32))
                    .ok_or(ParsePolyError {
                        pos: start,
                        msg: "negative power of a non-monomial".into(),
                    });
            }
            return Ok(base.pow(e as u32));
        }
        Ok(base)
    }

    fn signed_int(&mut self) -> Result<i32, ParsePolyError> {
        let paren = self.peek() == Some(b'(');
        if paren {
            self.pos += 1;
        }
        let neg = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        self.skip_ws();
        let digits = self.digits();
        if digits.is_empty() {
            return Err(self.err("expected exponent"));
        }
        let v: i32 = digits.parse().map_err(|_| self.err("exponent too large"))?;
        if paren {
            if self.peek() != Some(b')') {
                return Err(self.err("expected `)`"));
            }
            self.pos += 1;
        }
        Ok(if neg { -v } else { v })
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Poly, ParsePolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let num: BigInt = self.digits().parse().map_err(|_| self.err("bad integer"))?;
                let save = self.pos;
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    self.skip_ws();
                    let den = self.digits();
                    if den.is_empty() {
                        self.pos = save;
                        return Err(self.err("expected denominator"));
                    }
                    let den: BigInt = den.parse().map_err(|_| self.err("bad integer"))?;
                    if den == BigInt::from(0) {
                        return Err(self.err("zero denominator"));
                    }
                    return Ok(Poly::constant(Scalar::from_frac(num, den)));
                }
                Ok(Poly::constant(Scalar::from(num)))
            }
            Some(b't') => {
                self.pos += 1;
                Ok(Poly::var(VarId::T))
            }
            Some(c @ (b'x' | b'z')) => {
                self.pos += 1;
                let digits = self.digits();
                let idx: u8 = digits
                    .parse()
                    .map_err(|_| self.err("expected variable index"))?;
                let v = if c == b'x' {
                    if idx == 0 {
                        VarId::T
                    } else {
                        VarId::X(idx)
                    }
                } else {
                    if idx < 2 {
                        return Err(self.err("z-variables start at z2"));
                    }
                    VarId::Z(idx)
                };
                Ok(Poly::term(Monomial::var(v), Scalar::one()))
            }
            Some(b'Y' | b'y') => {
                self.pos += 1;
                match self.digits().as_str() {
                    "1" => Ok(Poly::var(VarId::Y1)),
                    "2" => Ok(Poly::var(VarId::Y2)),
                    _ => Err(self.err("expected Y1 or Y2")),
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_multiplication_and_powers() {
        let a: Poly = "3x2^2 + x4 t - 4 x1 x3".parse().unwrap();
        let b: Poly = "x4*t - 4*x1*x3 + 3*x2^2".parse().unwrap();
        assert_eq!(a, b);
        let c: Poly = "(x1 + t)^2".parse().unwrap();
        assert_eq!(c, "x1^2 + 2*t*x1 + t^2".parse().unwrap());
        let d: Poly = "t^(-2)*z4".parse().unwrap();
        assert_eq!(d, "t^-2 z4".parse().unwrap());
    }

    #[test]
    fn errors() {
        assert!("x1 +".parse::<Poly>().is_err());
        assert!("(x1+t)^-1".parse::<Poly>().is_err());
        assert!("z1".parse::<Poly>().is_err());
        assert!("x1 ? 2".parse::<Poly>().is_err());
        assert!("3/0".parse::<Poly>().is_err());
    }
}
