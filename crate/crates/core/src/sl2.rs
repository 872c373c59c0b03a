//! The derivation `D`, orders, leading coefficients and Roberts
//! reconstruction.
//!
//! Two coordinate systems are in play. The x-coordinates `t, x1, ..., xd`
//! are the coefficients of the generic form
//! `t Y1^d + sum binom(d,i) x_i Y1^(d-i) Y2^i`. The z-coordinates replace
//! `x2, ..., xd` by
//!
//! ```text
//! z_i = sum_{k=0}^{i-2} (-1)^k binom(i,k) x_{i-k} x1^k t^(i-k-1) + (i-1)(-1)^(i+1) x1^i
//! ```
//!
//! Semi-invariants are exactly the elements of `Q[t, z2..zd][1/t]` that are
//! polynomial in the x-coordinates, so a semi-invariant of degree `i` and
//! weight `w` is `t^(i-w) P(z)` for an isobaric `P`. [`SemiInvariant`]
//! stores that z-form and expands to x-coordinates on demand.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::poly::{binomial, factorial, Monomial, Poly, Scalar, VarId};

pub const MAX_FORM_DEGREE: u32 = 12;

/// The degree `d` of the binary form together with the coordinate changes
/// and derivation images that depend on it. Cheap to clone.
#[derive(Clone)]
pub struct FormContext {
    inner: Arc<Inner>,
}

struct Inner {
    d: u32,
    /// `z_k` in x-coordinates, keyed by `Z(k)`.
    z_to_x: BTreeMap<VarId, Poly>,
    /// `x_k` in `(t, x1, z)` coordinates, keyed by `X(k)`, `k >= 2`.
    x_to_z: BTreeMap<VarId, Poly>,
    /// `D` on x-coordinates: `x_i -> (d-i) x_{i+1}`.
    dx: BTreeMap<VarId, Poly>,
    /// `D` on `(t, x1, z)` coordinates.
    dz: BTreeMap<VarId, Poly>,
}

impl fmt::Debug for FormContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormContext {{ d: {} }}", self.inner.d)
    }
}

impl PartialEq for FormContext {
    fn eq(&self, other: &Self) -> bool {
        self.inner.d == other.inner.d
    }
}

impl Eq for FormContext {}

/// `z_k` written in x-coordinates.
pub fn z_definition(k: u32) -> Poly {
    let t = VarId::T;
    let x1 = VarId::X(1);
    let mut terms = Vec::new();
    for j in 0..=k.saturating_sub(2) {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let c = binomial(k, j) * sign;
        let m = Monomial::from_pairs([
            (VarId::x((k - j) as u8), 1),
            (x1, j as i32),
            (t, (k - j - 1) as i32),
        ]);
        terms.push((m, Scalar::from(c)));
    }
    let sign: i64 = if (k + 1) % 2 == 0 { 1 } else { -1 };
    terms.push((
        Monomial::var_pow(x1, k as i32),
        Scalar::from((k as i64 - 1) * sign),
    ));
    Poly::from_terms(terms)
}

impl FormContext {
    pub fn new(d: u32) -> Result<Self> {
        if !(1..=MAX_FORM_DEGREE).contains(&d) {
            return Err(Error::UnsupportedFormDegree(d));
        }
        let mut dx = BTreeMap::new();
        for i in 0..d {
            dx.insert(
                VarId::x(i as u8),
                Poly::var(VarId::X((i + 1) as u8)).scale(&Scalar::from((d - i) as i64)),
            );
        }

        let mut z_to_x = BTreeMap::new();
        let mut x_to_z: BTreeMap<VarId, Poly> = BTreeMap::new();
        for k in 2..=d {
            let zk = z_definition(k);
            // z_k = x_k t^(k-1) + rest, with rest involving only x_j, j < k.
            let lead = Poly::term(
                Monomial::from_pairs([(VarId::X(k as u8), 1), (VarId::T, k as i32 - 1)]),
                Scalar::one(),
            );
            let rest = (&zk - &lead).substitute(&x_to_z)?;
            let xk = (&Poly::var(VarId::Z(k as u8)) - &rest)
                .mul_monomial(&Monomial::var_pow(VarId::T, 1 - k as i32));
            x_to_z.insert(VarId::X(k as u8), xk);
            z_to_x.insert(VarId::Z(k as u8), zk);
        }

        let mut dz = BTreeMap::new();
        dz.insert(VarId::T, dx[&VarId::T].clone());
        if d >= 2 {
            dz.insert(VarId::X(1), dx[&VarId::X(1)].substitute(&x_to_z)?);
        }
        for (zv, zk) in &z_to_x {
            let img = zk.apply_derivation(|v| dx.get(&v)).substitute(&x_to_z)?;
            dz.insert(*zv, img);
        }

        Ok(FormContext {
            inner: Arc::new(Inner {
                d,
                z_to_x,
                x_to_z,
                dx,
                dz,
            }),
        })
    }

    pub fn d(&self) -> u32 {
        self.inner.d
    }

    /// `z_k` in x-coordinates (`2 <= k <= d`).
    pub fn z_def(&self, k: u32) -> Option<&Poly> {
        self.inner.z_to_x.get(&VarId::Z(k as u8))
    }

    /// Image of a coordinate under `D` in `(t, x1, z)` coordinates.
    pub fn dz_image(&self, v: VarId) -> Option<&Poly> {
        self.inner.dz.get(&v)
    }

    /// `D(p) = sum_{i=0}^{d-1} (d-i) x_{i+1} dp/dx_i` with `x_0 = t`.
    pub fn d_apply(&self, p: &Poly) -> Poly {
        p.apply_derivation(|v| self.inner.dx.get(&v))
    }

    /// `D` acting on polynomials written in `(t, x1, z)` coordinates.
    pub fn d_apply_z(&self, p: &Poly) -> Poly {
        p.apply_derivation(|v| self.inner.dz.get(&v))
    }

    /// `ord(p) = max { s : D^s(p) != 0 }`, found by iterating `D`.
    ///
    /// Fails if `D` has not vanished after `degree * d` steps, which cannot
    /// happen for a semi-invariant.
    pub fn ord(&self, p: &Poly) -> Result<u32> {
        if p.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if p.has_y() {
            return Err(Error::InvalidInput("ord of a polynomial in Y1, Y2".into()));
        }
        let deg = p.x_degree().unwrap_or(0).max(0) as u64;
        self.iterate_to_zero(p, deg * self.d() as u64, |q| self.d_apply(q))
    }

    /// [`FormContext::ord`] for an element given in z-coordinates.
    pub fn ord_z(&self, p: &Poly, degree: u32) -> Result<u32> {
        if p.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        self.iterate_to_zero(p, degree as u64 * self.d() as u64, |q| self.d_apply_z(q))
    }

    fn iterate_to_zero<F: Fn(&Poly) -> Poly>(&self, p: &Poly, bound: u64, step: F) -> Result<u32> {
        let mut cur = p.clone();
        let mut s: u64 = 0;
        loop {
            let next = step(&cur);
            if next.is_zero() {
                return Ok(s as u32);
            }
            s += 1;
            if s > bound {
                return Err(Error::NotSemiInvariant { bound });
            }
            cur = next;
        }
    }

    /// Rewrites an x-coordinate polynomial in `(t, x1, z2..zd)`.
    pub fn to_z(&self, p: &Poly) -> Result<Poly> {
        if p.has_y()
            || p.monomials()
                .any(|m| m.exponents().iter().any(|e| matches!(e.0, VarId::Z(_))))
        {
            return Err(Error::InvalidInput(
                "to_z expects a polynomial in t, x1..xd only".into(),
            ));
        }
        p.substitute(&self.inner.x_to_z)
    }

    /// Expands z-variables back into x-coordinates.
    pub fn from_z(&self, p: &Poly) -> Result<Poly> {
        p.substitute(&self.inner.z_to_x)
    }

    /// True iff `p` lies in `Q[t, z2..zd][1/t]`, i.e. its z-form is free of
    /// `x1`. Polynomiality in the x-coordinates is the caller's
    /// precondition.
    pub fn is_semiinvariant(&self, p: &Poly) -> Result<bool> {
        if p.has_y() {
            return Err(Error::InvalidInput(
                "semi-invariants are free of Y1, Y2".into(),
            ));
        }
        Ok(!self.to_z(p)?.contains_var(VarId::X(1)))
    }

    /// Roberts reconstruction:
    /// `sum_{i=0}^{ord a} D^i(a)/i! * Y1^(ord a - i) * Y2^i`.
    pub fn kappa_inverse(&self, a: &SemiInvariant) -> Poly {
        let m = a.order();
        let mut out = Poly::zero();
        let mut cur = a.poly().clone();
        for i in 0..=m {
            if cur.is_zero() {
                break;
            }
            let y = Monomial::from_pairs([(VarId::Y1, (m - i) as i32), (VarId::Y2, i as i32)]);
            let c = Scalar::from_frac(1, factorial(i));
            out = &out + &cur.mul_monomial(&y).scale(&c);
            cur = self.d_apply(&cur);
        }
        out
    }

    /// Leading coefficient (coefficient of `Y1^k`) of a covariant of order
    /// `k`, primitive-normalized.
    pub fn kappa(&self, f: &Poly) -> Result<SemiInvariant> {
        let k = y_order(f)?;
        let lead = f
            .coefficient_of(VarId::Y1, k as i32)
            .coefficient_of(VarId::Y2, 0);
        SemiInvariant::from_xform_with_order(self, &lead, Some(k))
    }

    fn chart_to_zform(&self, xform: &Poly) -> Poly {
        Poly::from_terms(
            xform
                .terms()
                .filter(|(m, _)| m.exponent(VarId::X(1)) == 0)
                .map(|(m, c)| {
                    let mut shift = 0;
                    let pairs = m.exponents().iter().map(|&(v, e)| match v {
                        VarId::X(k) => {
                            shift += (k as i32 - 1) * e;
                            (VarId::Z(k), e)
                        }
                        other => (other, e),
                    });
                    let base = Monomial::from_pairs(pairs.collect::<Vec<_>>());
                    (base.mul_var(VarId::T, -shift), c.clone())
                }),
        )
    }
}

/// Order in `Y1, Y2` of a covariant; errors if not homogeneous.
pub fn y_order(f: &Poly) -> Result<u32> {
    let (lo, hi) = f
        .degree_range(|m| m.degree_in(VarId::is_y))
        .ok_or(Error::ZeroPolynomial)?;
    if lo != hi {
        return Err(Error::NotHomogeneous);
    }
    Ok(hi as u32)
}

/// Degree and weight of an isobaric, homogeneous z-form.
fn zform_shape(z: &Poly) -> Result<(u32, u32)> {
    let mut shape: Option<(i64, i64)> = None;
    for m in z.monomials() {
        let mut deg = 0i64;
        let mut wt = 0i64;
        for &(v, e) in m.exponents() {
            match v {
                VarId::T => deg += e as i64,
                VarId::Z(k) => {
                    deg += k as i64 * e as i64;
                    wt += k as i64 * e as i64;
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "z-form may only contain t and z-variables, found {v}"
                    )))
                }
            }
        }
        match shape {
            None => shape = Some((deg, wt)),
            Some(s) if s != (deg, wt) => {
                return Err(Error::InvalidInput(
                    "z-form is not homogeneous and isobaric".into(),
                ))
            }
            _ => {}
        }
    }
    let (deg, wt) = shape.ok_or(Error::ZeroPolynomial)?;
    if deg < 0 || wt < 0 {
        return Err(Error::InvalidInput("negative degree".into()));
    }
    Ok((deg as u32, wt as u32))
}

/// A normalized semi-invariant with its degree and order.
///
/// Holds the z-form `t^(degree - weight) P(z2..zd)` and/or the
/// x-coordinate polynomial; the missing one is derived on first use.
#[derive(Clone)]
pub struct SemiInvariant {
    ctx: FormContext,
    degree: u32,
    order: u32,
    weight: u32,
    zform: OnceLock<Poly>,
    xform: OnceLock<Poly>,
}

impl SemiInvariant {
    /// Base form coefficient `t` (degree 1, order d).
    pub fn base(ctx: &FormContext) -> Self {
        SemiInvariant::from_zform(ctx, &Poly::var(VarId::T)).expect("t is a semi-invariant")
    }

    /// From a z-form. Normalizes to coprime integer coefficients with a
    /// positive lexicographic leader.
    pub fn from_zform(ctx: &FormContext, z: &Poly) -> Result<Self> {
        let (degree, weight) = zform_shape(z)?;
        let order = (ctx.d() * degree) as i64 - 2 * weight as i64;
        if order < 0 {
            return Err(Error::InvalidInput(format!(
                "weight {weight} too large for degree {degree}"
            )));
        }
        let z = z.primitive_normalize_lex()?;
        Ok(SemiInvariant {
            ctx: ctx.clone(),
            degree,
            order: order as u32,
            weight,
            zform: OnceLock::from(z),
            xform: OnceLock::new(),
        })
    }

    /// From an x-coordinate polynomial, assumed to be a semi-invariant.
    pub fn from_xform(ctx: &FormContext, p: &Poly) -> Result<Self> {
        SemiInvariant::from_xform_with_order(ctx, p, None)
    }

    fn from_xform_with_order(ctx: &FormContext, p: &Poly, order: Option<u32>) -> Result<Self> {
        if p.has_y()
            || p.monomials()
                .any(|m| m.exponents().iter().any(|e| matches!(e.0, VarId::Z(_))))
        {
            return Err(Error::InvalidInput(
                "expected a polynomial in t, x1..xd".into(),
            ));
        }
        if p.has_negative_exponent() {
            return Err(Error::InvalidInput(
                "semi-invariants are polynomial in t".into(),
            ));
        }
        let (lo, hi) = p
            .degree_range(|m| m.total_degree())
            .ok_or(Error::ZeroPolynomial)?;
        let (wlo, whi) = p.degree_range(Monomial::weight).unwrap_or((0, 0));
        if lo != hi || wlo != whi {
            return Err(Error::InvalidInput(
                "semi-invariant must be homogeneous and isobaric".into(),
            ));
        }
        if p.monomials().any(|m| {
            m.exponents()
                .iter()
                .any(|e| matches!(e.0, VarId::X(k) if k as u32 > ctx.d()))
        }) {
            return Err(Error::InvalidInput(format!(
                "variable index exceeds form degree {}",
                ctx.d()
            )));
        }
        let degree = hi as u32;
        let weight = whi as u32;
        let order = match order {
            Some(o) => o,
            None => {
                let o = (ctx.d() * degree) as i64 - 2 * weight as i64;
                if o < 0 {
                    return Err(Error::InvalidInput("weight too large for degree".into()));
                }
                o as u32
            }
        };
        let x = p.primitive_normalize()?;
        Ok(SemiInvariant {
            ctx: ctx.clone(),
            degree,
            order,
            weight,
            zform: OnceLock::new(),
            xform: OnceLock::from(x),
        })
    }

    pub fn ctx(&self) -> &FormContext {
        &self.ctx
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// `(degree, order)`.
    pub fn shape(&self) -> (u32, u32) {
        (self.degree, self.order)
    }

    /// The z-form `t^(degree - weight) P(z)`.
    pub fn zform(&self) -> &Poly {
        self.zform.get_or_init(|| {
            let x = self.xform.get().expect("one representation is always set");
            self.ctx.chart_to_zform(x)
        })
    }

    /// The semi-invariant in x-coordinates.
    pub fn poly(&self) -> &Poly {
        self.xform.get_or_init(|| {
            let z = self.zform.get().expect("one representation is always set");
            self.ctx.from_z(z).expect("z-variables bind to polynomials")
        })
    }

    /// Product of semi-invariants (normalized).
    pub fn mul(&self, other: &SemiInvariant) -> SemiInvariant {
        let z = self.zform() * other.zform();
        SemiInvariant::from_zform(&self.ctx, &z).expect("product of nonzero semi-invariants")
    }

    pub fn pow(&self, e: u32) -> SemiInvariant {
        if e == 0 {
            return SemiInvariant::from_zform(&self.ctx, &Poly::one()).expect("constant");
        }
        let z = self.zform().pow(e);
        SemiInvariant::from_zform(&self.ctx, &z).expect("power of a nonzero semi-invariant")
    }

    /// Recomputes the order by iterating `D` on the z-form.
    pub fn operational_order(&self) -> Result<u32> {
        self.ctx.ord_z(self.zform(), self.degree)
    }

    /// Checks that the stored polynomial really is a semi-invariant: the
    /// z-form expands to a polynomial in the x-coordinates (and, when the
    /// x-form was given, reproduces it).
    pub fn verify(&self) -> Result<bool> {
        let x = self.ctx.from_z(self.zform())?;
        if x.has_negative_exponent() {
            return Ok(false);
        }
        match self.xform.get() {
            Some(given) => Ok(given == &x),
            None => Ok(true),
        }
    }

    /// Integer coefficient of the z-form's lexicographic leader, used as a
    /// quick fingerprint.
    pub fn leading_coefficient(&self) -> BigInt {
        self.zform()
            .lex_leading_term()
            .and_then(|(_, c)| c.to_integer())
            .unwrap_or_else(BigInt::zero)
    }
}

impl PartialEq for SemiInvariant {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx
            && self.degree == other.degree
            && self.order == other.order
            && self.zform() == other.zform()
    }
}

impl fmt::Debug for SemiInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SemiInvariant {{ degree: {}, order: {}, zform: {} }}",
            self.degree,
            self.order,
            self.zform()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Poly {
        s.parse().unwrap()
    }

    fn ctx7() -> FormContext {
        FormContext::new(7).unwrap()
    }

    #[test]
    fn supported_range() {
        assert!(FormContext::new(0).is_err());
        assert!(FormContext::new(13).is_err());
        assert!(FormContext::new(1).is_ok());
        assert!(FormContext::new(12).is_ok());
    }

    #[test]
    fn z_definitions() {
        assert_eq!(z_definition(2), p("x2*t - x1^2"));
        assert_eq!(z_definition(3), p("x3*t^2 - 3*x1*x2*t + 2*x1^3"));
        assert_eq!(
            z_definition(4),
            p("x4*t^3 - 4*x1*x3*t^2 + 6*x1^2*x2*t - 3*x1^4")
        );
    }

    #[test]
    fn d_examples() {
        let c = ctx7();
        assert_eq!(c.d_apply(&p("t")), p("7*x1"));
        assert!(c.d_apply(&p("5")).is_zero());
        let d2 = c
            .d_apply(&c.d_apply(&p("t")))
            .scale(&Scalar::from_frac(1, 2));
        assert_eq!(d2, p("21*x2"));
    }

    #[test]
    fn ord_examples() {
        let c = ctx7();
        assert_eq!(c.ord(&p("t")).unwrap(), 7);
        assert_eq!(c.ord(&p("x2*t - x1^2")).unwrap(), 10);
        assert_eq!(c.ord(&p("x6*t - 6*x1*x5 + 15*x2*x4 - 10*x3^2")).unwrap(), 2);
        assert!(matches!(c.ord(&Poly::zero()), Err(Error::ZeroPolynomial)));
        for d in 1..=MAX_FORM_DEGREE {
            let c = FormContext::new(d).unwrap();
            assert_eq!(c.ord(&p("t")).unwrap(), d);
        }
    }

    #[test]
    fn ord_rejects_runaway() {
        // D never annihilates a negative power of t.
        let c = ctx7();
        assert!(matches!(
            c.ord_z(&p("t^-1"), 0),
            Err(Error::NotSemiInvariant { .. })
        ));
    }

    #[test]
    fn kappa_inverse_of_t_is_the_form() {
        let c = ctx7();
        let t = SemiInvariant::base(&c);
        let f = c.kappa_inverse(&t);
        let mut expect = p("t*Y1^7");
        for i in 1..=7u32 {
            let m = Monomial::from_pairs([
                (VarId::X(i as u8), 1),
                (VarId::Y1, 7 - i as i32),
                (VarId::Y2, i as i32),
            ]);
            expect = &expect + &Poly::term(m, Scalar::from(binomial(7, i)));
        }
        assert_eq!(f, expect);
        assert_eq!(c.kappa(&f).unwrap(), t);
    }

    #[test]
    fn kappa_of_constant_and_y_power() {
        let c = ctx7();
        let one = SemiInvariant::from_xform(&c, &p("3")).unwrap();
        assert_eq!(c.kappa_inverse(&one), Poly::one());
        let k = c.kappa(&p("Y1^3")).unwrap();
        assert_eq!(k.poly(), &Poly::one());
        assert_eq!(k.order(), 3);
        assert!(matches!(
            c.kappa(&p("Y1^3 + t*Y1")),
            Err(Error::NotHomogeneous)
        ));
    }

    #[test]
    fn to_z_examples() {
        let c = ctx7();
        assert_eq!(c.to_z(&p("x2*t - x1^2")).unwrap(), p("z2"));
        assert_eq!(c.to_z(&p("t")).unwrap(), p("t"));
        assert_eq!(
            c.to_z(&p("x4*t - 4*x1*x3 + 3*x2^2")).unwrap(),
            p("3*z2^2*t^-2 + z4*t^-2")
        );
    }

    #[test]
    fn semiinvariance() {
        let c = ctx7();
        assert!(c
            .is_semiinvariant(&p("x6*t - 6*x1*x5 + 15*x2*x4 - 10*x3^2"))
            .unwrap());
        assert!(!c.is_semiinvariant(&p("x1")).unwrap());
        // Hand expansion: t x3 - 3 x1 x2 + 2 x1^3 = z3/t - 2 x1^3/t + 2 x1^3.
        assert!(!c.is_semiinvariant(&p("t*x3 - 3*x1*x2 + 2*x1^3")).unwrap());
        assert!(c
            .is_semiinvariant(&p("x3*t^2 - 3*x1*x2*t + 2*x1^3"))
            .unwrap());
    }

    #[test]
    fn zform_and_xform_agree() {
        let c = ctx7();
        let dv1 = SemiInvariant::from_xform(&c, &p("x4*t - 4*x1*x3 + 3*x2^2")).unwrap();
        assert_eq!(dv1.zform(), &p("3*z2^2*t^-2 + z4*t^-2"));
        assert_eq!(dv1.order(), 6);
        assert_eq!(dv1.operational_order().unwrap(), 6);
        let back = SemiInvariant::from_zform(&c, &p("3*z2^2*t^-2 + z4*t^-2")).unwrap();
        assert_eq!(back.poly(), &p("x4*t - 4*x1*x3 + 3*x2^2"));
        assert!(back.verify().unwrap());
        let bogus = SemiInvariant::from_zform(&c, &p("z2*t^-1")).unwrap();
        assert!(!bogus.verify().unwrap());
    }
}
