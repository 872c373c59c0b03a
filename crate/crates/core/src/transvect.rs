//! Transvectants of covariants and semitransvectants of semi-invariants.
//!
//! The classical transvectant of covariants `F`, `G` of orders `m`, `k` is
//!
//! ```text
//! (F,G)^r = (m-r)!(k-r)!/(m!k!) sum_i (-1)^i binom(r,i)
//!           d^r F / dY1^(r-i) dY2^i * d^r G / dY1^i dY2^(r-i)
//! ```
//!
//! Its leading coefficient only depends on the leading coefficients `f`,
//! `g`, which gives the semitransvectant
//!
//! ```text
//! [f,g]^r = sum_i (-1)^i binom(r,i) D^i(f)/[m]_i * D^(r-i)(g)/[k]_(r-i)
//! ```
//!
//! Since the result is a semi-invariant, it is determined by its restriction
//! to `x1 = 0`; [`semitransvectant_direct`] evaluates every factor there, in
//! z-coordinates, and keeps only the powers of `x1` that later applications
//! of `D` can still bring down.

use crate::error::{Error, Result};
use crate::poly::{binomial, factorial, falling_factorial, Monomial, Poly, Scalar, VarId};
use crate::sl2::{y_order, FormContext, SemiInvariant};

/// `(F, G)^r` for covariants homogeneous in `Y1, Y2`.
pub fn transvectant(f: &Poly, g: &Poly, r: u32) -> Result<Poly> {
    let m = y_order(f)?;
    let k = y_order(g)?;
    if r > m.min(k) {
        return Err(Error::LevelOutOfRange {
            level: r,
            max: m.min(k),
        });
    }
    // f_parts[i] = d^r F / dY1^(r-i) dY2^i, g_parts[i] = d^r G / dY1^i dY2^(r-i)
    let partials = |p: &Poly, first_y1: bool| -> Vec<Poly> {
        let mut out = Vec::with_capacity(r as usize + 1);
        let mut by_y2 = p.clone();
        for i in 0..=r {
            let mut q = by_y2.clone();
            for _ in 0..(r - i) {
                q = q.diff(if first_y1 { VarId::Y1 } else { VarId::Y2 });
            }
            out.push(q);
            by_y2 = by_y2.diff(if first_y1 { VarId::Y2 } else { VarId::Y1 });
        }
        out
    };
    let fp = partials(f, true);
    let gp = partials(g, false);
    let mut acc = Poly::zero();
    for i in 0..=r as usize {
        let sign = if i % 2 == 0 { 1 } else { -1 };
        let c = Scalar::from(binomial(r, i as u32) * sign);
        acc = &acc + &(&fp[i] * &gp[i]).scale(&c);
    }
    let scale = Scalar::from_frac(
        factorial(m - r) * factorial(k - r),
        factorial(m) * factorial(k),
    );
    Ok(acc.scale(&scale))
}

fn check_level(f: &SemiInvariant, g: &SemiInvariant, r: u32) -> Result<()> {
    let max = f.order().min(g.order());
    if r > max {
        return Err(Error::LevelOutOfRange { level: r, max });
    }
    Ok(())
}

/// `[f,g]^r` through full covariants: `kappa((kappa^-1 f, kappa^-1 g)^r)`.
///
/// `Ok(None)` means the transvectant vanishes.
pub fn semitransvectant(
    ctx: &FormContext,
    f: &SemiInvariant,
    g: &SemiInvariant,
    r: u32,
) -> Result<Option<SemiInvariant>> {
    check_level(f, g, r)?;
    let tv = transvectant(&ctx.kappa_inverse(f), &ctx.kappa_inverse(g), r)?;
    if tv.is_zero() {
        return Ok(None);
    }
    ctx.kappa(&tv).map(Some)
}

/// The restrictions `D^j(f)|_{x1=0} / [m]_j`, `j = 0..=max_level`, in
/// z-coordinates, where `m = ord f`.
#[derive(Clone, Debug)]
pub struct RestrictedTower {
    order: u32,
    levels: Vec<Poly>,
}

impl RestrictedTower {
    pub fn new(ctx: &FormContext, f: &SemiInvariant, max_level: u32) -> Self {
        let max_level = max_level.min(f.order());
        let x1 = VarId::X(1);
        let mut levels = Vec::with_capacity(max_level as usize + 1);
        let mut cur = f.zform().clone();
        levels.push(cur.clone());
        for j in 1..=max_level {
            cur = ctx
                .d_apply_z(&cur)
                .truncate_degree(x1, (max_level - j) as i32);
            let scale = Scalar::from_frac(1, falling_factorial(f.order(), j));
            levels.push(cur.coefficient_of(x1, 0).scale(&scale));
        }
        RestrictedTower {
            order: f.order(),
            levels,
        }
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn level(&self, j: u32) -> &Poly {
        &self.levels[j as usize]
    }
}

/// Combines two towers into the z-form of `[f,g]^r` (unnormalized).
pub fn combine_towers(tf: &RestrictedTower, tg: &RestrictedTower, r: u32) -> Result<Poly> {
    let max = tf.order().min(tg.order());
    if r > max || r > tf.max_level() || r > tg.max_level() {
        return Err(Error::LevelOutOfRange { level: r, max });
    }
    let mut acc = Poly::zero();
    for i in 0..=r {
        let a = tf.level(i);
        let b = tg.level(r - i);
        if a.is_zero() || b.is_zero() {
            continue;
        }
        let sign = if i % 2 == 0 { 1 } else { -1 };
        let c = Scalar::from(binomial(r, i) * sign);
        acc = &acc + &(a * b).scale(&c);
    }
    Ok(acc)
}

/// `[f,g]^r` evaluated on `x1 = 0` in z-coordinates. Agrees with
/// [`semitransvectant`] after normalization.
pub fn semitransvectant_direct(
    ctx: &FormContext,
    f: &SemiInvariant,
    g: &SemiInvariant,
    r: u32,
) -> Result<Option<SemiInvariant>> {
    check_level(f, g, r)?;
    let tf = RestrictedTower::new(ctx, f, r);
    let tg = RestrictedTower::new(ctx, g, r);
    let z = combine_towers(&tf, &tg, r)?;
    if z.is_zero() {
        return Ok(None);
    }
    SemiInvariant::from_zform(ctx, &z).map(Some)
}

/// Order of `[f,g]^r` whenever it is nonzero.
pub fn result_order(f_order: u32, g_order: u32, r: u32) -> Option<u32> {
    (f_order + g_order).checked_sub(2 * r)
}

/// Level `r` with `ord = f_order + g_order - 2r`, if one exists.
pub fn infer_level(f_order: u32, g_order: u32, target: u32) -> Option<u32> {
    let total = f_order + g_order;
    if target > total || (total - target) % 2 != 0 {
        return None;
    }
    let r = (total - target) / 2;
    (r <= f_order.min(g_order)).then_some(r)
}

/// `Y1^a Y2^b` helper used by tests and the CLI.
pub fn y_monomial(a: u32, b: u32) -> Monomial {
    Monomial::from_pairs([(VarId::Y1, a as i32), (VarId::Y2, b as i32)])
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
    fn zeroth_transvectant_is_product() {
        let f = p("t*Y1^2 + 2*x1*Y1*Y2 + x2*Y2^2");
        let g = p("x1*Y1 + x2*Y2");
        assert_eq!(transvectant(&f, &g, 0).unwrap(), &f * &g);
    }

    #[test]
    fn odd_self_transvectant_vanishes() {
        let c = ctx7();
        let form = c.kappa_inverse(&SemiInvariant::base(&c));
        for r in [1, 3, 5, 7] {
            assert!(transvectant(&form, &form, r).unwrap().is_zero());
        }
    }

    #[test]
    fn level_out_of_range() {
        let f = p("Y1^2");
        assert!(matches!(
            transvectant(&f, &f, 3),
            Err(Error::LevelOutOfRange { level: 3, max: 2 })
        ));
        assert!(matches!(
            transvectant(&p("Y1 + Y1^2"), &f, 0),
            Err(Error::NotHomogeneous)
        ));
    }

    #[test]
    fn classical_examples_d7() {
        let c = ctx7();
        let t = SemiInvariant::base(&c);
        let dv3 = semitransvectant(&c, &t, &t, 2).unwrap().unwrap();
        assert_eq!(dv3.poly(), &p("x2*t - x1^2"));
        assert_eq!(dv3.order(), 10);
        let dv1 = semitransvectant(&c, &t, &t, 4).unwrap().unwrap();
        assert_eq!(dv1.poly(), &p("x4*t - 4*x1*x3 + 3*x2^2"));
        let dv2 = semitransvectant(&c, &t, &t, 6).unwrap().unwrap();
        assert_eq!(dv2.poly(), &p("x6*t - 6*x1*x5 + 15*x2*x4 - 10*x3^2"));
        assert_eq!(dv2.order(), 2);
        assert!(semitransvectant(&c, &t, &t, 3).unwrap().is_none());
    }

    #[test]
    fn direct_agrees_on_classical_examples() {
        let c = ctx7();
        let t = SemiInvariant::base(&c);
        for r in 0..=7 {
            let a = semitransvectant(&c, &t, &t, r).unwrap();
            let b = semitransvectant_direct(&c, &t, &t, r).unwrap();
            assert_eq!(a, b, "level {r}");
        }
        let dv1 = semitransvectant_direct(&c, &t, &t, 4).unwrap().unwrap();
        let tr1 = semitransvectant_direct(&c, &t, &dv1, 4).unwrap().unwrap();
        assert_eq!(tr1.order(), 5);
        assert_eq!(tr1.operational_order().unwrap(), 5);
        assert_eq!(Some(tr1), semitransvectant(&c, &t, &dv1, 4).unwrap());
        let dv3 = semitransvectant_direct(&c, &t, &t, 2).unwrap().unwrap();
        let tr6 = semitransvectant_direct(&c, &t, &dv3, 7).unwrap().unwrap();
        assert_eq!(tr6.order(), 3);
        assert_eq!(Some(tr6), semitransvectant(&c, &t, &dv3, 7).unwrap());
    }

    #[test]
    fn level_inference() {
        assert_eq!(infer_level(7, 10, 15), Some(1));
        assert_eq!(infer_level(2, 4, 4), Some(1));
        assert_eq!(infer_level(2, 8, 0), None);
        assert_eq!(infer_level(3, 3, 1), None);
        assert_eq!(result_order(7, 6, 4), Some(5));
    }
}
