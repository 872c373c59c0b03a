use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

/// A polynomial variable.
///
/// The derived order is the canonical variable order
/// `t < x1 < ... < xd < z2 < ... < zd < Y1 < Y2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    T,
    X(u8),
    Z(u8),
    Y1,
    Y2,
}

impl VarId {
    pub fn is_y(self) -> bool {
        matches!(self, VarId::Y1 | VarId::Y2)
    }

    /// Index of `x_i` with the convention `x_0 = t`.
    pub fn x_index(self) -> Option<u8> {
        match self {
            VarId::T => Some(0),
            VarId::X(i) => Some(i),
            _ => None,
        }
    }

    /// Variable `x_i`, with `x_0 = t`.
    pub fn x(i: u8) -> VarId {
        if i == 0 {
            VarId::T
        } else {
            VarId::X(i)
        }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::T => write!(f, "t"),
            VarId::X(i) => write!(f, "x{i}"),
            VarId::Z(i) => write!(f, "z{i}"),
            VarId::Y1 => write!(f, "Y1"),
            VarId::Y2 => write!(f, "Y2"),
        }
    }
}

/// A power product of variables. Only `t` may carry a negative exponent;
/// zero exponents are never stored.
///
/// Monomials are ordered graded-lexicographically: first by total degree,
/// then by comparing exponents starting from the greatest variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(VarId, i32); 6]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial::var_pow(v, 1)
    }

    pub fn var_pow(v: VarId, e: i32) -> Self {
        let mut m = Monomial::one();
        if e != 0 {
            m.0.push((v, e));
        }
        m
    }

    /// Builds a monomial from arbitrary (variable, exponent) pairs, merging
    /// repeated variables.
    pub fn from_pairs<I: IntoIterator<Item = (VarId, i32)>>(pairs: I) -> Self {
        let mut v: SmallVec<[(VarId, i32); 6]> = pairs.into_iter().collect();
        v.sort_by_key(|p| p.0);
        let mut out: SmallVec<[(VarId, i32); 6]> = SmallVec::new();
        for (var, e) in v {
            match out.last_mut() {
                Some(last) if last.0 == var => last.1 += e,
                _ => out.push((var, e)),
            }
        }
        out.retain(|p| p.1 != 0);
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> &[(VarId, i32)] {
        &self.0
    }

    pub fn exponent(&self, v: VarId) -> i32 {
        match self.0.binary_search_by_key(&v, |p| p.0) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn total_degree(&self) -> i64 {
        self.0.iter().map(|p| p.1 as i64).sum()
    }

    /// Degree with respect to the variables selected by `pred`.
    pub fn degree_in<F: Fn(VarId) -> bool>(&self, pred: F) -> i64 {
        self.0
            .iter()
            .filter(|p| pred(p.0))
            .map(|p| p.1 as i64)
            .sum()
    }

    /// Weight `sum i * e_i` over the `x_i` (and `z_i`) variables.
    pub fn weight(&self) -> i64 {
        self.0
            .iter()
            .map(|&(v, e)| match v {
                VarId::X(i) | VarId::Z(i) => i as i64 * e as i64,
                _ => 0,
            })
            .sum()
    }

    pub fn has_negative_exponent(&self) -> bool {
        self.0.iter().any(|p| p.1 < 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out: SmallVec<[(VarId, i32); 6]> = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Returns this monomial multiplied by `v^e`.
    pub fn mul_var(&self, v: VarId, e: i32) -> Monomial {
        if e == 0 {
            return self.clone();
        }
        let mut out = self.0.clone();
        match out.binary_search_by_key(&v, |p| p.0) {
            Ok(i) => {
                out[i].1 += e;
                if out[i].1 == 0 {
                    out.remove(i);
                }
            }
            Err(i) => out.insert(i, (v, e)),
        }
        Monomial(out)
    }

    pub fn inverse(&self) -> Monomial {
        Monomial(self.0.iter().map(|&(v, e)| (v, -e)).collect())
    }

    /// Drops the variable `v` entirely (used for evaluation at `v = 1`).
    pub fn without(&self, v: VarId) -> Monomial {
        Monomial(self.0.iter().copied().filter(|p| p.0 != v).collect())
    }

    /// Applies `f` to every variable, merging collisions.
    pub fn map_vars<F: Fn(VarId) -> VarId>(&self, f: F) -> Monomial {
        Monomial::from_pairs(self.0.iter().map(|&(v, e)| (f(v), e)))
    }

    /// Pure lexicographic comparison, starting from the greatest variable.
    pub fn lex_cmp(&self, other: &Monomial) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (a.len(), b.len());
        loop {
            match (i > 0, j > 0) {
                (false, false) => return Ordering::Equal,
                (true, false) => return a[i - 1].1.cmp(&0),
                (false, true) => return 0.cmp(&b[j - 1].1),
                (true, true) => {
                    let (va, ea) = a[i - 1];
                    let (vb, eb) = b[j - 1];
                    match va.cmp(&vb) {
                        Ordering::Equal => {
                            if ea != eb {
                                return ea.cmp(&eb);
                            }
                            i -= 1;
                            j -= 1;
                        }
                        Ordering::Greater => return ea.cmp(&0),
                        Ordering::Less => return 0.cmp(&eb),
                    }
                }
            }
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.lex_cmp(other))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
