//! Exact rank and span membership for sets of polynomials.
//!
//! Rows are the integer coefficient vectors of primitive polynomials over a
//! shared monomial column index. The exact path screens every row modulo a
//! large prime and settles the rows that are dependent modulo the prime
//! with a fraction-free solve (see [`Span`]). Full fraction-free
//! elimination, `r <- a*r - b*p` followed by content removal, is the
//! fallback when the prime divides a minor. The modular path reduces the
//! same rows modulo two random primes in `[2^31, 2^32)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::poly::{Monomial, Poly};
use crate::sl2::SemiInvariant;

type Row = Vec<(u32, BigInt)>;
type ModRow = Vec<(u32, u64)>;

/// How ranks are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RankMode {
    /// Fraction-free integer elimination.
    #[default]
    Exact,
    /// Two random primes; exact elimination when they disagree.
    Modular,
}

/// Assigns column indices to monomials in order of first appearance.
#[derive(Clone, Debug, Default)]
pub struct ColumnIndex {
    map: FxHashMap<Monomial, u32>,
    monomials: Vec<Monomial>,
}

impl ColumnIndex {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, col: u32) -> &Monomial {
        &self.monomials[col as usize]
    }

    fn intern(&mut self, m: &Monomial) -> u32 {
        if let Some(&c) = self.map.get(m) {
            return c;
        }
        let c = self.monomials.len() as u32;
        self.map.insert(m.clone(), c);
        self.monomials.push(m.clone());
        c
    }

    /// Integer row of `p` (scaled to integer coefficients), sorted by column.
    fn row(&mut self, p: &Poly) -> Row {
        let mut r: Row = p
            .integer_coefficients()
            .into_iter()
            .map(|(m, c)| (self.intern(&m), c))
            .collect();
        r.sort_unstable_by_key(|e| e.0);
        r
    }

    /// Row of `p` without growing the index; `None` if `p` has a monomial
    /// outside the index.
    fn lookup_row(&self, p: &Poly) -> Option<Row> {
        let mut r = Row::with_capacity(p.num_terms());
        for (m, c) in p.integer_coefficients() {
            r.push((*self.map.get(&m)?, c));
        }
        r.sort_unstable_by_key(|e| e.0);
        Some(r)
    }
}

/// Sparse integer matrix whose rows are polynomials and whose columns are
/// the monomials occurring in them.
#[derive(Clone, Debug, Default)]
pub struct CoeffMatrix {
    columns: ColumnIndex,
    rows: Vec<Row>,
}

impl CoeffMatrix {
    pub fn from_polys<'a, I: IntoIterator<Item = &'a Poly>>(polys: I) -> Self {
        let mut m = CoeffMatrix::default();
        for p in polys {
            m.push_poly(p);
        }
        m
    }

    /// Dense integer rows (tests and small examples).
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let mut m = CoeffMatrix::default();
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        for c in 0..width {
            m.columns
                .intern(&Monomial::var_pow(crate::poly::VarId::Z(2), c as i32 + 1));
        }
        for r in rows {
            m.rows.push(
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(c, &v)| (c as u32, BigInt::from(v)))
                    .collect(),
            );
        }
        m
    }

    pub fn push_poly(&mut self, p: &Poly) {
        let r = self.columns.row(p);
        self.rows.push(r);
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn columns(&self) -> &ColumnIndex {
        &self.columns
    }
}

/// Exact rank over the rationals.
///
/// Rows are screened modulo a large prime first; see [`Span`].
pub fn rank(m: &CoeffMatrix) -> usize {
    let mut s = Screened::new();
    for r in &m.rows {
        if !s.screen(r) {
            s.pending.push(r.clone());
        }
    }
    if s.in_span(&s.pending).iter().all(|&b| b) {
        return s.basis.len();
    }
    s.into_exact().rank()
}

/// Rank in the given mode; the modular mode falls back to [`rank`] when
/// its two primes disagree.
pub fn rank_with(m: &CoeffMatrix, mode: RankMode) -> usize {
    match mode {
        RankMode::Exact => rank(m),
        RankMode::Modular => {
            let primes = random_primes();
            log::info!("modular rank with primes {} and {}", primes[0], primes[1]);
            let ranks: Vec<usize> = primes.iter().map(|&p| rank_mod(m, p)).collect();
            if ranks[0] == ranks[1] {
                ranks[0]
            } else {
                log::warn!(
                    "modular ranks disagree ({} vs {}); recomputing exactly",
                    ranks[0],
                    ranks[1]
                );
                rank(m)
            }
        }
    }
}

/// Rank of `m` modulo the prime `p < 2^32`.
pub fn rank_mod(m: &CoeffMatrix, p: u64) -> usize {
    let mut e = ModEchelon::new(p);
    for r in &m.rows {
        e.insert(reduce_row_mod(r, p));
    }
    e.rank()
}

fn check_shapes(polys: &[&SemiInvariant]) -> Result<()> {
    if let Some(first) = polys.first() {
        if polys.iter().any(|p| p.shape() != first.shape()) {
            return Err(Error::MixedShape);
        }
    }
    Ok(())
}

/// `len(products) - rank`: the dimension of the space of linear relations
/// among `products`.
pub fn syzygy_dim(products: &[SemiInvariant], mode: RankMode) -> Result<usize> {
    check_shapes(&products.iter().collect::<Vec<_>>())?;
    let m = CoeffMatrix::from_polys(products.iter().map(|p| p.zform()));
    Ok(products.len() - rank_with(&m, mode))
}

/// Outcome of [`reduce_against`].
#[derive(Clone, Debug, PartialEq)]
pub enum Reduction {
    Member,
    NotMember(SemiInvariant),
}

/// Decides exactly whether `candidate` lies in the rational span of
/// `basis`.
pub fn reduce_against(basis: &[SemiInvariant], candidate: &SemiInvariant) -> Result<Reduction> {
    let mut all: Vec<&SemiInvariant> = basis.iter().collect();
    all.push(candidate);
    check_shapes(&all)?;
    let mut span = Span::new(RankMode::Exact);
    for b in basis {
        span.insert(b.zform());
    }
    Ok(if span.contains(candidate.zform()) {
        Reduction::Member
    } else {
        Reduction::NotMember(candidate.clone())
    })
}

/// Prime used to screen rows in exact mode.
const SCREEN_PRIME: u64 = 4_294_967_291;

/// Incrementally maintained span of polynomials.
///
/// In exact mode each row is first reduced modulo [`SCREEN_PRIME`]. A row
/// independent modulo the prime is independent over the rationals, so it
/// joins the basis with no big-integer work. A row dependent modulo the
/// prime is settled by solving for its coefficients on the pivot columns
/// and checking the combination on every column.
#[derive(Clone, Debug)]
pub struct Span {
    mode: RankMode,
    columns: ColumnIndex,
    screened: Option<Screened>,
    exact: Option<IntEchelon>,
    modular: Vec<ModEchelon>,
    /// Inserted polynomials, kept in modular mode for the exact fallback.
    history: Vec<Poly>,
}

#[derive(Clone, Debug)]
struct Screened {
    echelon: ModEchelon,
    /// Rows certified independent, with their pivot columns mod the prime.
    basis: Vec<Row>,
    pivots: Vec<u32>,
    /// Rows dependent mod the prime, not yet settled.
    pending: Vec<Row>,
}

impl Screened {
    fn new() -> Self {
        Screened {
            echelon: ModEchelon::new(SCREEN_PRIME),
            basis: Vec::new(),
            pivots: Vec::new(),
            pending: Vec::new(),
        }
    }

    /// Adds `row` to the basis if it is independent mod the prime.
    fn screen(&mut self, row: &Row) -> bool {
        match self.echelon.insert_pivot(reduce_row_mod(row, SCREEN_PRIME)) {
            Some(c) => {
                self.basis.push(row.clone());
                self.pivots.push(c);
                true
            }
            None => false,
        }
    }

    fn is_screened_out(&self, row: &Row) -> bool {
        self.echelon
            .reduce(reduce_row_mod(row, SCREEN_PRIME))
            .is_empty()
    }

    /// For rows dependent mod the prime: whether each lies in the rational
    /// span of the basis.
    fn in_span(&self, rows: &[Row]) -> Vec<bool> {
        if rows.is_empty() {
            return Vec::new();
        }
        let n = self.basis.len();
        let pos: FxHashMap<u32, usize> = self
            .pivots
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        // Column k of the system holds basis row k on the pivot columns.
        let width = n + rows.len();
        let mut a = vec![vec![BigInt::zero(); width]; n];
        for (k, b) in self.basis.iter().enumerate() {
            for (c, v) in b {
                if let Some(&i) = pos.get(c) {
                    a[i][k] = v.clone();
                }
            }
        }
        for (t, w) in rows.iter().enumerate() {
            for (c, v) in w {
                if let Some(&i) = pos.get(c) {
                    a[i][n + t] = v.clone();
                }
            }
        }
        let det = gauss_jordan_ff(&mut a, n);
        rows.iter()
            .enumerate()
            .map(|(t, w)| {
                let mut acc: FxHashMap<u32, BigInt> = FxHashMap::default();
                for (k, b) in self.basis.iter().enumerate() {
                    let x = &a[k][n + t];
                    if x.is_zero() {
                        continue;
                    }
                    for (c, v) in b {
                        *acc.entry(*c).or_default() += x * v;
                    }
                }
                for (c, v) in w {
                    *acc.entry(*c).or_default() -= &det * v;
                }
                acc.values().all(Zero::is_zero)
            })
            .collect()
    }

    fn into_exact(self) -> IntEchelon {
        let mut e = IntEchelon::default();
        for r in self.basis.into_iter().chain(self.pending) {
            e.insert(r);
        }
        e
    }
}

/// Fraction-free Gauss-Jordan elimination on the leading `n x n` block of
/// `a`, which must be nonsingular. Afterwards every diagonal entry equals
/// the returned determinant `D` (up to sign) and column `n + t` holds `D`
/// times the solution for right-hand side `t`.
fn gauss_jordan_ff(a: &mut [Vec<BigInt>], n: usize) -> BigInt {
    let width = a.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n)
            .find(|&i| !a[i][k].is_zero())
            .expect("pivot block is nonsingular");
        a.swap(k, p);
        let (head, rest) = a.split_at_mut(k);
        let (pivot_row, tail) = rest.split_first_mut().unwrap();
        let piv = pivot_row[k].clone();
        for (i, row) in head
            .iter_mut()
            .enumerate()
            .chain(tail.iter_mut().enumerate().map(|(i, r)| (i + k + 1, r)))
        {
            let f = std::mem::take(&mut row[k]);
            if i < k {
                row[i] = &row[i] * &piv / &prev;
            }
            for j in k + 1..width {
                let v = &piv * &row[j] - &f * &pivot_row[j];
                debug_assert!((&v % &prev).is_zero());
                row[j] = v / &prev;
            }
        }
        prev = piv;
    }
    prev
}

impl Span {
    pub fn new(mode: RankMode) -> Self {
        let mut s = Span {
            mode,
            columns: ColumnIndex::default(),
            screened: None,
            exact: None,
            modular: Vec::new(),
            history: Vec::new(),
        };
        match mode {
            RankMode::Exact => s.screened = Some(Screened::new()),
            RankMode::Modular => {
                let primes = random_primes();
                log::info!("span modulo primes {} and {}", primes[0], primes[1]);
                s.modular = primes.iter().map(|&p| ModEchelon::new(p)).collect();
            }
        }
        s
    }

    /// Same, with fixed primes for the modular mode.
    pub fn with_primes(p: u64, q: u64) -> Self {
        Span {
            mode: RankMode::Modular,
            columns: ColumnIndex::default(),
            screened: None,
            exact: None,
            modular: vec![ModEchelon::new(p), ModEchelon::new(q)],
            history: Vec::new(),
        }
    }

    pub fn mode(&self) -> RankMode {
        self.mode
    }

    /// Rank of the span. In exact mode, rows added by
    /// [`Span::insert_deferred`] count only once [`Span::resolve`] has run.
    pub fn rank(&self) -> usize {
        if let Some(s) = &self.screened {
            s.basis.len()
        } else if let Some(e) = &self.exact {
            e.rank()
        } else {
            self.modular[0].rank()
        }
    }

    /// Number of deferred rows not yet settled.
    pub fn pending(&self) -> usize {
        self.screened.as_ref().map_or(0, |s| s.pending.len())
    }

    fn switch_to_exact(&mut self) {
        log::warn!("modular span disagreement; switching to exact elimination");
        let mut e = IntEchelon::default();
        for p in &self.history {
            e.insert(self.columns.row(p));
        }
        self.exact = Some(e);
        self.modular.clear();
        self.history.clear();
    }

    /// Leaves screening after a row turned out independent although it is
    /// dependent mod the screening prime.
    fn unscreen(&mut self) {
        log::warn!("screening prime divides a minor; switching to exact elimination");
        let s = self.screened.take().unwrap();
        self.exact = Some(s.into_exact());
    }

    /// Adds `p`; returns whether it was independent of the span.
    pub fn insert(&mut self, p: &Poly) -> bool {
        let row = self.columns.row(p);
        if let Some(s) = &mut self.screened {
            if s.screen(&row) {
                return true;
            }
            if s.in_span(std::slice::from_ref(&row))[0] {
                return false;
            }
            self.unscreen();
        }
        if let Some(e) = &mut self.exact {
            return e.insert(row);
        }
        let mut verdicts = [false; 2];
        let mut trial = self.modular.clone();
        for (k, m) in trial.iter_mut().enumerate() {
            verdicts[k] = m.insert(reduce_row_mod(&row, m.p));
        }
        if verdicts[0] == verdicts[1] {
            self.modular = trial;
            self.history.push(p.clone());
            verdicts[0]
        } else {
            self.switch_to_exact();
            self.exact.as_mut().unwrap().insert(row)
        }
    }

    /// Adds `p` if it is certainly independent; returns whether it was
    /// added. In exact mode a row dependent mod the screening prime is
    /// rejected without an exact check, so `false` does not prove
    /// dependence. Other modes behave like [`Span::insert`].
    pub fn insert_if_independent(&mut self, p: &Poly) -> bool {
        if let Some(s) = &mut self.screened {
            let row = self.columns.row(p);
            return s.screen(&row);
        }
        self.insert(p)
    }

    /// Like [`Span::insert`], but in exact mode a row dependent mod the
    /// screening prime is queued for [`Span::resolve`] instead of being
    /// settled now.
    pub fn insert_deferred(&mut self, p: &Poly) {
        if let Some(s) = &mut self.screened {
            let row = self.columns.row(p);
            if !s.screen(&row) {
                s.pending.push(row);
            }
            return;
        }
        self.insert(p);
    }

    /// Drops deferred rows without settling them. Only sound when they are
    /// known to lie in the span, e.g. because the rank reached an upper
    /// bound.
    pub fn discard_pending(&mut self) {
        if let Some(s) = &mut self.screened {
            s.pending.clear();
        }
    }

    /// Settles every deferred row.
    pub fn resolve(&mut self) {
        let Some(s) = &mut self.screened else {
            return;
        };
        let pending = std::mem::take(&mut s.pending);
        if s.in_span(&pending).iter().all(|&b| b) {
            return;
        }
        s.pending = pending;
        self.unscreen();
    }

    /// Whether `p` lies in the span, without inserting it.
    pub fn contains(&mut self, p: &Poly) -> bool {
        let Some(row) = self.columns.lookup_row(p) else {
            return false;
        };
        if let Some(s) = &self.screened {
            assert!(s.pending.is_empty(), "resolve the span before queries");
            return s.is_screened_out(&row) && s.in_span(std::slice::from_ref(&row))[0];
        }
        if let Some(e) = &self.exact {
            return e.reduce(row).is_empty();
        }
        let verdicts: Vec<bool> = self
            .modular
            .iter()
            .map(|m| m.reduce(reduce_row_mod(&row, m.p)).is_empty())
            .collect();
        if verdicts[0] == verdicts[1] {
            verdicts[0]
        } else {
            self.switch_to_exact();
            self.exact.as_ref().unwrap().reduce(row).is_empty()
        }
    }
}

/// Echelon form over the integers, keyed by pivot column.
#[derive(Clone, Debug, Default)]
struct IntEchelon {
    pivots: BTreeMap<u32, Row>,
}

impl IntEchelon {
    fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduces `r` until its leading column has no pivot; empty means zero.
    fn reduce(&self, mut r: Row) -> Row {
        while let Some(&(c, _)) = r.first() {
            let Some(p) = self.pivots.get(&c) else {
                break;
            };
            r = eliminate(&r, p);
        }
        r
    }

    fn insert(&mut self, r: Row) -> bool {
        let r = self.reduce(r);
        match r.first() {
            Some(&(c, _)) => {
                self.pivots.insert(c, r);
                true
            }
            None => false,
        }
    }
}

/// `a*r - b*p` with the shared leading column cancelled, divided by its
/// content.
fn eliminate(r: &Row, p: &Row) -> Row {
    let (rc, pc) = (&r[0].1, &p[0].1);
    let g = rc.gcd(pc);
    let a = pc / &g;
    let b = rc / &g;
    let mut out = Row::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (1, 1);
    while i < r.len() || j < p.len() {
        let ci = r.get(i).map(|e| e.0).unwrap_or(u32::MAX);
        let cj = p.get(j).map(|e| e.0).unwrap_or(u32::MAX);
        if ci < cj {
            out.push((ci, &a * &r[i].1));
            i += 1;
        } else if cj < ci {
            out.push((cj, -(&b * &p[j].1)));
            j += 1;
        } else {
            let v = &a * &r[i].1 - &b * &p[j].1;
            if !v.is_zero() {
                out.push((ci, v));
            }
            i += 1;
            j += 1;
        }
    }
    remove_content(&mut out);
    out
}

fn remove_content(r: &mut Row) {
    let mut g = BigInt::zero();
    for (_, v) in r.iter() {
        g = g.gcd(v);
        if g.is_one() {
            return;
        }
    }
    if g.is_zero() {
        return;
    }
    for (_, v) in r.iter_mut() {
        *v /= &g;
    }
}

fn reduce_row_mod(r: &Row, p: u64) -> ModRow {
    let pb = BigInt::from(p);
    r.iter()
        .filter_map(|(c, v)| {
            let m = if v.bits() < 63 {
                v.to_i64().unwrap().rem_euclid(p as i64) as u64
            } else {
                v.mod_floor(&pb).to_u64().unwrap()
            };
            (m != 0).then_some((*c, m))
        })
        .collect()
}

/// Echelon form modulo a prime `p < 2^32`, pivot rows scaled to lead 1.
#[derive(Clone, Debug)]
struct ModEchelon {
    p: u64,
    pivots: BTreeMap<u32, ModRow>,
}

impl ModEchelon {
    fn new(p: u64) -> Self {
        assert!(p < (1 << 32), "modulus must fit in 32 bits");
        ModEchelon {
            p,
            pivots: BTreeMap::new(),
        }
    }

    fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn reduce(&self, mut r: ModRow) -> ModRow {
        let p = self.p;
        while let Some(&(c, lead)) = r.first() {
            let Some(piv) = self.pivots.get(&c) else {
                break;
            };
            // r - lead * piv
            let mut out = ModRow::with_capacity(r.len() + piv.len());
            let (mut i, mut j) = (1, 1);
            while i < r.len() || j < piv.len() {
                let ci = r.get(i).map(|e| e.0).unwrap_or(u32::MAX);
                let cj = piv.get(j).map(|e| e.0).unwrap_or(u32::MAX);
                if ci < cj {
                    out.push(r[i]);
                    i += 1;
                } else {
                    let sub = lead * piv[j].1 % p;
                    let v = if ci == cj {
                        let v = (r[i].1 + p - sub) % p;
                        i += 1;
                        v
                    } else {
                        (p - sub) % p
                    };
                    if v != 0 {
                        out.push((cj, v));
                    }
                    j += 1;
                }
            }
            r = out;
        }
        r
    }

    fn insert(&mut self, r: ModRow) -> bool {
        self.insert_pivot(r).is_some()
    }

    /// Inserts `r`, returning its pivot column if it was independent.
    fn insert_pivot(&mut self, r: ModRow) -> Option<u32> {
        let mut r = self.reduce(r);
        let &(c, lead) = r.first()?;
        let inv = pow_mod(lead, self.p - 2, self.p);
        for e in r.iter_mut() {
            e.1 = e.1 * inv % self.p;
        }
        self.pivots.insert(c, r);
        Some(c)
    }
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for `n < 2^32` (bases 2, 7, 61).
pub fn is_prime_u32(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 61] {
        if n % q == 0 {
            return n == q;
        }
    }
    let mut dd = n - 1;
    let mut s = 0;
    while dd % 2 == 0 {
        dd /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        let mut x = pow_mod(a, dd, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = x * x % n;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Two distinct random primes in `[2^31, 2^32)`.
pub fn random_primes() -> [u64; 2] {
    let mut rng = rand::thread_rng();
    let mut pick = || loop {
        let n: u64 = rng.gen_range((1u64 << 31)..(1u64 << 32)) | 1;
        if is_prime_u32(n) {
            return n;
        }
    };
    let p = pick();
    loop {
        let q = pick();
        if q != p {
            return [p, q];
        }
    }
}

/// Rank of the span of `polys` in the given mode.
pub fn poly_rank(polys: &[&Poly], mode: RankMode) -> usize {
    let m = CoeffMatrix::from_polys(polys.iter().copied());
    rank_with(&m, mode)
}
