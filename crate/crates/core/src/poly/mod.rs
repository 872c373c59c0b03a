//! Exact sparse multivariate polynomials over the rationals, Laurent in `t`.
//!
//! Every other module is built on [`Poly`]. Terms are kept in a canonical
//! map from [`Monomial`] to non-zero [`Scalar`], so structurally equal
//! polynomials compare equal.

mod monomial;
mod parse;
mod scalar;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

pub use monomial::{Monomial, VarId};
pub use parse::ParsePolyError;
pub use scalar::{binomial, factorial, falling_factorial, ParseScalarError, Scalar};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Scalar>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        Poly::term(Monomial::one(), c)
    }

    pub fn var(v: VarId) -> Self {
        Poly::term(Monomial::var(v), Scalar::one())
    }

    pub fn var_pow(v: VarId, e: i32) -> Self {
        Poly::term(Monomial::var_pow(v, e), Scalar::one())
    }

    pub fn term(m: Monomial, c: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    /// Sums the given terms; repeated monomials are combined.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, Scalar)>>(iter: I) -> Self {
        let mut acc: FxHashMap<Monomial, Scalar> = FxHashMap::default();
        for (m, c) in iter {
            *acc.entry(m).or_insert_with(Scalar::zero) += &c;
        }
        Poly::from_map(acc)
    }

    fn from_map(acc: FxHashMap<Monomial, Scalar>) -> Self {
        Poly {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    fn from_int_map(acc: FxHashMap<Monomial, BigInt>) -> Self {
        Poly {
            terms: acc
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(m, c)| (m, Scalar::from(c)))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in decreasing monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Scalar)> + '_ {
        self.terms.iter().rev()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> + '_ {
        self.terms.keys().rev()
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Constant term.
    pub fn constant_term(&self) -> Scalar {
        self.coeff(&Monomial::one())
    }

    /// Leading term in the canonical (graded lexicographic) order.
    pub fn leading_term(&self) -> Option<(&Monomial, &Scalar)> {
        self.terms.iter().next_back()
    }

    /// Leading term in pure lexicographic order.
    pub fn lex_leading_term(&self) -> Option<(&Monomial, &Scalar)> {
        self.terms.iter().max_by(|a, b| a.0.lex_cmp(b.0))
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(Scalar::is_integer)
    }

    pub fn contains_var(&self, v: VarId) -> bool {
        self.terms.keys().any(|m| m.exponent(v) != 0)
    }

    pub fn has_y(&self) -> bool {
        self.terms
            .keys()
            .any(|m| m.exponents().iter().any(|p| p.0.is_y()))
    }

    pub fn has_negative_exponent(&self) -> bool {
        self.terms.keys().any(Monomial::has_negative_exponent)
    }

    /// Minimum and maximum of `sel(m)` over all monomials.
    pub fn degree_range<F: Fn(&Monomial) -> i64>(&self, sel: F) -> Option<(i64, i64)> {
        let mut it = self.terms.keys().map(sel);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    /// Maximum total degree over the variables `t, x_i` (no `Y`, no `z`).
    pub fn x_degree(&self) -> Option<i64> {
        self.degree_range(|m| m.degree_in(|v| v.x_index().is_some()))
            .map(|r| r.1)
    }

    pub fn scale(&self, c: &Scalar) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Formal partial derivative with respect to `v`.
    pub fn diff(&self, v: VarId) -> Poly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e != 0 {
                terms.insert(m.mul_var(v, -1), c.mul_int(e as i64));
            }
        }
        Poly { terms }
    }

    /// Applies the derivation determined by `image(v)` for each variable:
    /// `sum_v image(v) * dp/dv`. Variables with no image are constants.
    pub fn apply_derivation<'a, F>(&self, image: F) -> Poly
    where
        F: Fn(VarId) -> Option<&'a Poly>,
    {
        if self.is_integral() {
            let mut acc: FxHashMap<Monomial, BigInt> = FxHashMap::default();
            let mut all_int = true;
            for (m, c) in &self.terms {
                let c = c.numer();
                for &(v, e) in m.exponents() {
                    let Some(img) = image(v) else { continue };
                    let base = m.mul_var(v, -1);
                    for (im, ic) in &img.terms {
                        let Some(ic) = ic.to_integer() else {
                            all_int = false;
                            break;
                        };
                        *acc.entry(base.mul(im)).or_insert_with(BigInt::zero) += c * e * ic;
                    }
                }
            }
            if all_int {
                return Poly::from_int_map(acc);
            }
        }
        let mut acc: FxHashMap<Monomial, Scalar> = FxHashMap::default();
        for (m, c) in &self.terms {
            for &(v, e) in m.exponents() {
                let Some(img) = image(v) else { continue };
                let base = m.mul_var(v, -1);
                let ce = c.mul_int(e as i64);
                for (im, ic) in &img.terms {
                    *acc.entry(base.mul(im)).or_insert_with(Scalar::zero) += &(&ce * ic);
                }
            }
        }
        Poly::from_map(acc)
    }

    /// Simultaneous substitution `v -> bindings[v]`.
    ///
    /// A variable with a negative exponent may only be bound to a monomial
    /// (a single term); anything else would require dividing by a
    /// non-monomial and is rejected.
    pub fn substitute(&self, bindings: &BTreeMap<VarId, Poly>) -> Result<Poly> {
        let mut powers: FxHashMap<(VarId, i32), Poly> = FxHashMap::default();
        let mut acc: FxHashMap<Monomial, Scalar> = FxHashMap::default();
        for (m, c) in &self.terms {
            let mut kept: Vec<(VarId, i32)> = Vec::new();
            let mut factor = Poly::constant(c.clone());
            for &(v, e) in m.exponents() {
                let Some(b) = bindings.get(&v) else {
                    kept.push((v, e));
                    continue;
                };
                if !powers.contains_key(&(v, e)) {
                    let p = if e >= 0 {
                        b.pow(e as u32)
                    } else {
                        b.monomial_inverse()
                            .ok_or(Error::NonMonomialDivision(v))?
                            .pow((-e) as u32)
                    };
                    powers.insert((v, e), p);
                }
                factor = &factor * &powers[&(v, e)];
            }
            let rest = Monomial::from_pairs(kept);
            for (fm, fc) in factor.terms {
                *acc.entry(fm.mul(&rest)).or_insert_with(Scalar::zero) += &fc;
            }
        }
        Ok(Poly::from_map(acc))
    }

    /// Inverse of a single-term polynomial.
    pub fn monomial_inverse(&self) -> Option<Poly> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        Some(Poly::term(m.inverse(), c.inv()?))
    }

    /// Sets `v = 0`. Terms with a negative power of `v` are not allowed to
    /// exist; they are treated as vanishing as well.
    pub fn set_zero(&self, v: VarId) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.exponent(v) == 0)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Sets `v = 1`.
    pub fn set_one(&self, v: VarId) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.without(v), c.clone())))
    }

    /// Keeps only terms with `exponent(v) <= max`.
    pub fn truncate_degree(&self, v: VarId, max: i32) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.exponent(v) <= max)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Terms in which `v` has exponent exactly `e`, with `v^e` stripped.
    pub fn coefficient_of(&self, v: VarId, e: i32) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.exponent(v) == e)
                .map(|(m, c)| (m.mul_var(v, -e), c.clone()))
                .collect(),
        }
    }

    /// Renames variables; colliding monomials are merged.
    pub fn map_vars<F: Fn(VarId) -> VarId>(&self, f: F) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.map_vars(&f), c.clone())))
    }

    /// Least common multiple of denominators and gcd of numerators.
    fn content(&self) -> (BigInt, BigInt) {
        let mut den = BigInt::one();
        let mut num = BigInt::zero();
        for c in self.terms.values() {
            den = scalar::lcm_big(&den, c.denom());
            num = scalar::gcd_big(&num, c.numer());
        }
        (num, den)
    }

    /// Divides out the rational content so that the coefficients become
    /// coprime integers, then makes the coefficient of `lead` positive.
    fn normalize_with(&self, lead: Option<(&Monomial, &Scalar)>) -> Result<Poly> {
        let (_, lc) = lead.ok_or(Error::ZeroPolynomial)?;
        let (num, den) = self.content();
        let mut factor = Scalar::from_frac(den, num);
        if lc.is_negative() {
            factor = -factor;
        }
        Ok(self.scale(&factor))
    }

    /// `lambda * p` with coprime integer coefficients and a positive
    /// coefficient on the greatest monomial in the canonical order.
    pub fn primitive_normalize(&self) -> Result<Poly> {
        self.normalize_with(self.leading_term())
    }

    /// Like [`Poly::primitive_normalize`], but the sign is fixed by the
    /// pure-lexicographic leading monomial.
    pub fn primitive_normalize_lex(&self) -> Result<Poly> {
        self.normalize_with(self.lex_leading_term())
    }

    /// Integer coefficients after scaling by the lcm of the denominators.
    pub fn integer_coefficients(&self) -> Vec<(Monomial, BigInt)> {
        let (_, den) = self.content();
        self.terms
            .iter()
            .map(|(m, c)| {
                let v = c.numer() * (&den / c.denom());
                (m.clone(), v)
            })
            .collect()
    }

    /// Explicit, round-trippable text form: terms in decreasing order,
    /// every coefficient written out, every exponent explicit.
    pub fn to_canonical_string(&self) -> String {
        self.render(true)
    }

    fn render(&self, explicit: bool) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (m, c)) in self.terms().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut parts: Vec<String> = Vec::new();
            if explicit || !a.is_one() || m.is_one() {
                parts.push(a.to_string());
            }
            for &(v, e) in m.exponents() {
                if explicit || e != 1 {
                    parts.push(format!("{v}^{e}"));
                } else {
                    parts.push(v.to_string());
                }
            }
            out.push_str(&parts.join("*"));
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(false))
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({})", self.render(false))
    }
}

impl FromStr for Poly {
    type Err = ParsePolyError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse::parse_poly(s)
    }
}

fn add_polys(a: &Poly, b: &Poly, negate_b: bool) -> Poly {
    let mut terms = a.terms.clone();
    for (m, c) in &b.terms {
        match terms.get_mut(m) {
            Some(x) => {
                if negate_b {
                    *x -= c;
                } else {
                    *x += c;
                }
                if x.is_zero() {
                    terms.remove(m);
                }
            }
            None => {
                terms.insert(m.clone(), if negate_b { -c } else { c.clone() });
            }
        }
    }
    Poly { terms }
}

fn mul_polys(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() || b.is_zero() {
        return Poly::zero();
    }
    if a.is_integral() && b.is_integral() {
        let mut acc: FxHashMap<Monomial, BigInt> = FxHashMap::default();
        acc.reserve(a.terms.len().max(b.terms.len()));
        for (ma, ca) in &a.terms {
            let ca = ca.numer();
            for (mb, cb) in &b.terms {
                let e = acc.entry(ma.mul(mb)).or_insert_with(BigInt::zero);
                *e += ca * cb.numer();
            }
        }
        return Poly::from_int_map(acc);
    }
    let mut acc: FxHashMap<Monomial, Scalar> = FxHashMap::default();
    for (ma, ca) in &a.terms {
        for (mb, cb) in &b.terms {
            *acc.entry(ma.mul(mb)).or_insert_with(Scalar::zero) += &(ca * cb);
        }
    }
    Poly::from_map(acc)
}

impl Add<&Poly> for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        add_polys(self, rhs, false)
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        add_polys(&self, &rhs, false)
    }
}

impl Sub<&Poly> for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        add_polys(self, rhs, true)
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        add_polys(&self, &rhs, true)
    }
}

impl Mul<&Poly> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        mul_polys(self, rhs)
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        mul_polys(&self, &rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

impl From<i64> for Poly {
    fn from(n: i64) -> Self {
        Poly::constant(Scalar::from(n))
    }
}

impl From<VarId> for Poly {
    fn from(v: VarId) -> Self {
        Poly::var(v)
    }
}

/// Sum of `coef * product of the given variables`, for concise literals.
pub fn poly_from_int_terms(terms: &[(i64, &[(VarId, i32)])]) -> Poly {
    Poly::from_terms(
        terms
            .iter()
            .map(|(c, m)| (Monomial::from_pairs(m.iter().copied()), Scalar::from(*c))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use VarId::*;

    fn p(s: &str) -> Poly {
        s.parse().unwrap()
    }

    #[test]
    fn add_cancels() {
        assert_eq!(&p("x2*t - x1^2") + &p("x1^2"), p("x2*t"));
        assert_eq!(&p("x2*t - x1^2") + &Poly::zero(), p("x2*t - x1^2"));
        assert_eq!(
            &p("3*x2^2") + &p("x4*t - 4*x1*x3"),
            p("x4*t - 4*x1*x3 + 3*x2^2")
        );
    }

    #[test]
    fn mul_laurent_and_zero() {
        assert_eq!(&p("t") * &p("t^-1"), Poly::one());
        assert!((&p("x1 + 3") * &Poly::zero()).is_zero());
        assert_eq!(&p("x1 - t") * &p("x1 + t"), p("x1^2 - t^2"));
        assert_eq!(&p("1/2*x1") * &p("2/3*x1 + 1"), p("1/3*x1^2 + 1/2*x1"));
    }

    #[test]
    fn diff_rules() {
        assert_eq!(p("x2*t - x1^2").diff(T), p("x2"));
        assert_eq!(p("x1^3").diff(X(1)), p("3*x1^2"));
        assert_eq!(p("t^-1*z3").diff(T), p("-t^-2*z3"));
        assert!(p("x2").diff(X(1)).is_zero());
    }

    #[test]
    fn substitution_examples() {
        let dv1 = p("x4*t - 4*x1*x3 + 3*x2^2");
        let mut b = BTreeMap::new();
        b.insert(X(1), Poly::zero());
        assert_eq!(dv1.substitute(&b).unwrap(), p("x4*t + 3*x2^2"));

        let mut b = BTreeMap::new();
        b.insert(T, Poly::one());
        b.insert(X(2), Poly::one());
        b.insert(X(1), Poly::zero());
        assert_eq!(p("x2*t - x1^2").substitute(&b).unwrap(), Poly::one());

        // z3 = x3 t^2 - 3 x1 x2 t + 2 x1^3; only the k = 0 term survives x1 = 0.
        let z3 = p("x3*t^2 - 3*x1*x2*t + 2*x1^3");
        let mut b = BTreeMap::new();
        b.insert(X(1), Poly::zero());
        assert_eq!(z3.substitute(&b).unwrap(), p("x3*t^2"));
    }

    #[test]
    fn substitution_rejects_non_monomial_division() {
        let mut b = BTreeMap::new();
        b.insert(T, p("t + x1"));
        assert!(matches!(
            p("t^-1*x2").substitute(&b),
            Err(Error::NonMonomialDivision(T))
        ));
        let mut b = BTreeMap::new();
        b.insert(T, p("2*x1"));
        assert_eq!(p("t^-1*x2").substitute(&b).unwrap(), p("1/2*x1^-1*x2"));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            p("-2*x2*t + 2*x1^2").primitive_normalize().unwrap(),
            p("x2*t - x1^2")
        );
        assert_eq!(
            p("1/2*x4*t - 2*x1*x3 + 3/2*x2^2")
                .primitive_normalize()
                .unwrap(),
            p("x4*t - 4*x1*x3 + 3*x2^2")
        );
        let q = p("x6*t - 6*x1*x5 + 15*x2*x4 - 10*x3^2");
        assert_eq!(q.primitive_normalize().unwrap(), q);
        assert!(matches!(
            Poly::zero().primitive_normalize(),
            Err(Error::ZeroPolynomial)
        ));
    }

    #[test]
    fn canonical_string_roundtrip() {
        let q = p("x4*t - 4*x1*x3 + 3*x2^2 - 1/3*t^-2*z4 + Y1^2*Y2");
        let s = q.to_canonical_string();
        assert_eq!(s.parse::<Poly>().unwrap(), q);
        assert_eq!(s.parse::<Poly>().unwrap().to_canonical_string(), s);
        assert_eq!(Poly::zero().to_canonical_string(), "0");
        assert_eq!(
            p("x4*t - 4*x1*x3 + 3*x2^2").to_canonical_string(),
            "1*t^1*x4^1 - 4*x1^1*x3^1 + 3*x2^2"
        );
    }
}
