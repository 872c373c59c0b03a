//! Counting irreducible generators per `(degree, order)` cell, replaying
//! the reference constructions for `d = 7`, and searching for new
//! generators.
//!
//! For a cell `(i, j)` the number of new generators is
//! `delta = dim C(i,j) - rank(products)`, where the products are all
//! monomials in lower-degree generators of degree `i` and order `j`. The
//! rank equals `sigma - dim S` with `sigma` the number of products and
//! `dim S` the dimension of their linear relations.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::counting::{cs_dim, enumerate_product_exponents, product_exponents, product_value};
use crate::error::{Error, Result};
use crate::linalg::{RankMode, Span};
use crate::registry::{Construction, DegreeStatus, DistributionTable, GeneratorRecord, Registry};
use crate::sl2::{FormContext, SemiInvariant};
use crate::transvect::{combine_towers, infer_level, RestrictedTower};

/// Counts for one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellCount {
    pub degree: u32,
    pub order: u32,
    /// Dimension of the space of covariants.
    pub dim: u64,
    /// Number of products of lower-degree generators.
    pub sigma: u64,
    /// Dimension of the relations among those products.
    pub syzygy: u64,
}

impl CellCount {
    /// Rank of the products.
    pub fn product_rank(&self) -> u64 {
        self.sigma - self.syzygy
    }

    /// Number of irreducible generators needed in this cell.
    pub fn delta(&self) -> u64 {
        self.dim - self.product_rank()
    }
}

/// `delta(i, j)` with its ingredients. Needs every degree below `i` to be
/// complete.
pub fn delta(registry: &Registry, i: u32, j: u32, mode: RankMode) -> Result<CellCount> {
    let (span, sigma) = product_span(registry, i, j, mode)?;
    Ok(cell_count(registry, i, j, sigma, &span))
}

fn cell_count(registry: &Registry, i: u32, j: u32, sigma: u64, span: &Span) -> CellCount {
    CellCount {
        degree: i,
        order: j,
        dim: cs_dim(registry.d(), i, j),
        sigma,
        syzygy: sigma - span.rank() as u64,
    }
}

/// Products evaluated per batch in [`product_span`].
const PRODUCT_BATCH: usize = 32;

/// The span of the products at `(i, j)` and the number of products.
///
/// Products are evaluated in batches and insertion stops once the span
/// reaches `cs_dim(d, i, j)`, which bounds its rank, so the rank is exact
/// without evaluating every product.
pub fn product_span(registry: &Registry, i: u32, j: u32, mode: RankMode) -> Result<(Span, u64)> {
    let dim = cs_dim(registry.d(), i, j) as usize;
    let exps = enumerate_product_exponents(registry, i, j)?;
    let mut span = Span::new(mode);
    for batch in exps.chunks(PRODUCT_BATCH) {
        if span.rank() >= dim {
            break;
        }
        let values: Vec<SemiInvariant> = batch
            .par_iter()
            .map(|e| product_value(registry, e))
            .collect::<Result<_>>()?;
        for v in &values {
            if span.rank() >= dim {
                break;
            }
            span.insert_deferred(v.zform());
        }
    }
    if span.rank() >= dim {
        span.discard_pending();
    } else {
        span.resolve();
    }
    Ok((span, exps.len() as u64))
}

/// Orders `d*i, d*i - 2, ..., >= 0`.
pub fn orders_of_degree(d: u32, i: u32) -> impl Iterator<Item = u32> {
    let top = d * i;
    (0..=top / 2).map(move |k| top - 2 * k)
}

/// A named reference construction for `d = 7`: the printed construction
/// text (levels may be omitted) and the printed order.
#[derive(Clone, Copy, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub construction: &'static str,
    pub order: u32,
}

const fn entry(name: &'static str, construction: &'static str, order: u32) -> CatalogEntry {
    CatalogEntry {
        name,
        construction,
        order,
    }
}

/// Reference generators of the degree-7 form, degrees 2 to 26, in
/// dependency order.
pub const CATALOG_D7: &[CatalogEntry] = &[
    entry("dv1", "[t,t]^4", 6),
    entry("dv2", "[t,t]^6", 2),
    entry("dv3", "[t,t]^2", 10),
    entry("tr1", "[t,dv1]^4", 5),
    entry("tr2", "[t,dv3]", 15),
    entry("tr3", "[t,dv3]^3", 11),
    entry("tr4", "[t,dv3]^4", 9),
    entry("tr5", "[t,dv3]^5", 7),
    entry("tr6", "[t,dv3]^7", 3),
    entry("ch1", "[t,tr5]^7", 0),
    entry("ch2", "[t,tr3]^7", 4),
    entry("ch3", "[t,tr3]^2", 14),
    entry("ch4", "[t,tr3]^4", 10),
    entry("ch5", "[t,tr3]^5", 8),
    entry("ch6", "[t,tr1]^2", 8),
    entry("ch7", "[t,tr1]^3", 6),
    entry("ch8", "[t,tr1]^4", 4),
    entry("pt1", "[t,ch6]^5", 5),
    entry("pt2", "[t,ch6]^6", 3),
    entry("pt3", "[t,ch7]^2", 9),
    entry("pt4", "[t,ch7]^3", 7),
    entry("pt5", "[t,ch7]^5", 3),
    entry("pt6", "[t,ch6]^3", 9),
    entry("pt7", "[t,ch4]^2", 13),
    entry("pt8", "[t,ch4]^5", 7),
    entry("pt9", "[t,dv1^2]^7", 5),
    entry("pt10", "[t,dv1*dv2]^7", 1),
    entry("sh1", "[t,pt5]^5", 6),
    entry("sh2", "[t,pt7]^6", 8),
    entry("sh3", "[t,pt4]^5", 4),
    entry("sh4", "[t,pt4]^6", 2),
    entry("sh5", "[t,pt3]^2", 12),
    entry("sh6", "[t,pt3]^4", 8),
    entry("sh7", "[t,pt4]^4", 6),
    entry("sh8", "[t,tr1*dv1]^7", 4),
    entry("sh9", "[t,tr1*dv2]^6", 2),
    entry("sh10", "[t,tr6*dv1]^7", 2),
    entry("si1", "[t,sh5]^4", 11),
    entry("si2", "[t,sh7]^4", 5),
    entry("si3", "[t,tr1^2]^7", 3),
    entry("si4", "[t,sh1]^3", 7),
    entry("si5", "[t,ch7*dv1]^7", 5),
    entry("si6", "[t,ch7*dv2]^7", 1),
    entry("si7", "[t,tr6^2]^4", 5),
    entry("si8", "[t,tr6^2]^6", 1),
    entry("si9", "[t,tr6*tr1]^6", 3),
    entry("si10", "[t,tr6*tr1]^7", 1),
    entry("si11", "[t,tr1^2]^6", 5),
    entry("si12", "[t,sh10]", 7),
    entry("vi1", "[t,si7]^3", 6),
    entry("vi2", "[t,si7]^4", 4),
    entry("vi3", "[t,ch8*tr6]^7", 0),
    entry("vi4", "[t,ch8*tr1]^6", 4),
    entry("vi5", "[t,ch8*tr1]^7", 2),
    entry("vi6", "[t,ch7*tr6]^7", 2),
    entry("vi7", "[t,ch7*tr1]^7", 4),
    entry("vi8", "[t,ch8*tr6]^6", 2),
    entry("vi9", "[t,tr6*dv2^2]^7", 0),
    entry("vi10", "[t,si4]^2", 10),
    entry("vi11", "[t,si12]^4", 6),
    entry("vi12", "[t,si11]^3", 6),
    entry("vi13", "[t,pt9*dv2]^7", 0),
    entry("de1", "[t,sh3*dv1]^7", 3),
    entry("de2", "[t,ch7*ch8]^7", 3),
    entry("de3", "[t,pt5*tr6]^5", 3),
    entry("de4", "[t,pt5*tr1]^6", 3),
    entry("de5", "[t,pt5*tr1]^7", 1),
    entry("de6", "[t,sh9*dv1]^7", 1),
    entry("de7", "[t,sh10*dv1]^7", 1),
    entry("de8", "[t,sh10*dv2]^3", 5),
    entry("de9", "[t,vi5]^2", 5),
    entry("de10", "[t,vi2]^4", 3),
    entry("de11", "[t,vi11]^2", 9),
    entry("des1", "[t,sh9*tr1]^6", 2),
    entry("des2", "[t,sh4*tr6]^4", 4),
    entry("des3", "[t,sh4*tr1]^6", 2),
    entry("des4", "[t,sh1*tr1]^7", 4),
    entry("des5", "[t,sh3*tr6]^5", 4),
    entry("des6", "[t,de9]^2", 8),
    entry("des7", "[t,tr6^3]^7", 2),
    entry("des8", "[t,sh10*tr1]^6", 2),
    entry("des9", "[t,pt1*ch7]^7", 4),
    entry("odn1", "[t,vi2*dv1]^7", 3),
    entry("odn2", "[t,vi2*dv2]^6", 1),
    entry("odn3", "[t,vi4*dv2]^6", 1),
    entry("odn4", "[t,vi5*dv1]^7", 1),
    entry("odn5", "[t,vi6*dv1]^7", 1),
    entry("odn6", "[t,vi2*dv2]^5", 3),
    entry("odn7", "[t,des6]^4", 7),
    entry("odn8", "[t,des6]^6", 3),
    entry("odn9", "[t,vi1*dv2]^7", 1),
    entry("dvan1", "[t,sh1*pt2]^7", 2),
    entry("dvan2", "[t,sh1*pt5]^7", 2),
    entry("dvan3", "[sh9,sh10]^2", 0),
    entry("dvan4", "[t,odn7]^6", 2),
    entry("dvan5", "[t,de8*dv2]^6", 2),
    entry("dvan6", "[sh10,sh10]^2", 0),
    entry("dvan7", "[t,de9*dv2]^6", 2),
    entry("dvan8", "[t,de10*dv1]^7", 2),
    entry("dvan9", "[t,odn7]^4", 6),
    entry("dvan10", "[sh1,sh1]^2", 0),
    entry("dvan11", "[sh4,sh4]^2", 0),
    entry("dvan12", "[sh4,sh9]^2", 0),
    entry("dvan13", "[sh4,sh2]^2", 0),
    entry("tryn1", "[t,dvan9]^6", 1),
    entry("tryn2", "[t,vi1*ch7]^7", 5),
    entry("tryn3", "[t,vi2*ch8]^7", 1),
    entry("tryn4", "[t,vi2*ch2]^7", 1),
    entry("tryn5", "[t,vi1*ch8]^7", 3),
    entry("tryn6", "[t,vi5*ch2]^6", 1),
    entry("tryn7", "[t,vi8*ch8]^6", 1),
    entry("tryn8", "[t,vi8*ch7]^7", 1),
    entry("tryn9", "[t,vi4*ch8]^7", 1),
    entry("chot1", "[si8,si10]", 0),
    entry("chot2", "[si6,si10]", 0),
    entry("chot3", "[si6,si8]", 0),
    entry("chot4", "[si3,si9]^3", 0),
    entry("chot5", "[sh10,vi2]", 4),
    entry("chot6", "[sh9,vi2]", 4),
    entry("ptn1", "[de10,sh9]^2", 1),
    entry("ptn2", "[de10,sh4]^2", 1),
    entry("ptn3", "[de3,sh9]^2", 1),
    entry("ptn4", "[de10,sh10]", 3),
    entry("shis1", "[vi2,vi4]^4", 0),
    entry("shis2", "[vi4,vi7]^4", 0),
    entry("shis3", "[vi5,vi2]^2", 2),
    entry("shis4", "[vi8,vi2]^2", 2),
    entry("shis5", "[des7,sh10]", 2),
    entry("simn1", "[de3,vi5]^2", 1),
    entry("simn2", "[si8,des7]", 1),
    entry("vis1", "[de4,de3]^3", 0),
    entry("vis2", "[de4,de10]^3", 0),
    entry("vis3", "[de5,de6]", 0),
    entry("vis4", "[de1,de10]^3", 0),
    entry("vis5", "[de2,de3]^3", 0),
    entry("vis6", "[de2,de10]^3", 0),
    entry("vis7", "[de3,de10]^3", 0),
    entry("vis8", "[de6,de7]", 0),
    entry("vis9", "[de8,de9]^5", 0),
    entry("devn", "[de7,des7]", 1),
    entry("dvad", "[des7,des7]^2", 0),
    entry("dvdv1", "[odn6,odn1]^3", 0),
    entry("dvdv2", "[odn8,odn1]^3", 0),
    entry("dvtr", "[tryn4,des7]", 1),
    entry("dvsh", "[tryn4,tryn3]", 0),
];

/// The degree-30 invariant of the reference system, kept without a
/// polynomial.
pub const OPAQUE_D7: (&str, u32, u32, &str) = ("trd", 30, 0, "(h,alpha)");

/// Printed constructions whose value has the wrong order, with the
/// replacement used in the replayed registry.
pub const CORRECTIONS_D7: &[(&str, &str)] = &[
    ("sh1", "[t,pt5]^2"),
    ("dvan10", "[sh1,sh1]^6"),
    ("dvan13", "[sh4,sh10]^2"),
];

/// Generator counts per cell for the degree-7 form.
pub const EXPECTED_D7: &[(u32, u32, u64)] = &[
    (1, 7, 1),
    (2, 2, 1),
    (2, 6, 1),
    (2, 10, 1),
    (3, 3, 1),
    (3, 5, 1),
    (3, 7, 1),
    (3, 9, 1),
    (3, 11, 1),
    (3, 15, 1),
    (4, 0, 1),
    (4, 4, 2),
    (4, 6, 1),
    (4, 8, 2),
    (4, 10, 1),
    (4, 14, 1),
    (5, 1, 1),
    (5, 3, 2),
    (5, 5, 2),
    (5, 7, 2),
    (5, 9, 2),
    (5, 13, 1),
    (6, 2, 3),
    (6, 4, 2),
    (6, 6, 2),
    (6, 8, 2),
    (6, 12, 1),
    (7, 1, 3),
    (7, 3, 2),
    (7, 5, 4),
    (7, 7, 2),
    (7, 11, 1),
    (8, 0, 3),
    (8, 2, 3),
    (8, 4, 3),
    (8, 6, 3),
    (8, 10, 1),
    (9, 1, 3),
    (9, 3, 5),
    (9, 5, 2),
    (9, 9, 1),
    (10, 2, 4),
    (10, 4, 4),
    (10, 8, 1),
    (11, 1, 5),
    (11, 3, 3),
    (11, 7, 1),
    (12, 0, 6),
    (12, 2, 6),
    (12, 6, 1),
    (13, 1, 7),
    (13, 3, 1),
    (13, 5, 1),
    (14, 0, 4),
    (14, 4, 2),
    (15, 1, 3),
    (15, 3, 1),
    (16, 0, 2),
    (16, 2, 3),
    (17, 1, 2),
    (18, 0, 9),
    (19, 1, 1),
    (20, 0, 1),
    (22, 0, 2),
    (23, 1, 1),
    (26, 0, 1),
    (30, 0, 1),
];

pub fn expected_table_d7() -> DistributionTable {
    DistributionTable::from_cells(EXPECTED_D7.iter().map(|&(i, j, n)| ((i, j), n)))
}

/// Outcome of replaying one catalog entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayEntry {
    pub name: String,
    pub construction: String,
    pub degree: u32,
    pub printed_order: u32,
    /// `None` when the construction evaluates to zero.
    pub computed_order: Option<u32>,
    /// Order recomputed by iterating `D`, when requested.
    pub operational_order: Option<u32>,
    pub level_inferred: bool,
    /// Why the stated construction could not be evaluated.
    pub error: Option<String>,
    /// Construction actually stored, when the printed one was replaced.
    pub replaced_by: Option<String>,
}

impl ReplayEntry {
    /// The stated construction evaluates to the stated order (and, when
    /// recomputed, the stored value's nilpotency order agrees).
    pub fn order_matches(&self) -> bool {
        self.computed_order == Some(self.printed_order)
            && self
                .operational_order
                .map_or(true, |o| o == self.printed_order)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReplayReport {
    pub entries: Vec<ReplayEntry>,
}

impl ReplayReport {
    pub fn mismatches(&self) -> Vec<&ReplayEntry> {
        self.entries.iter().filter(|e| !e.order_matches()).collect()
    }

    /// Number of replayed generators per degree.
    pub fn per_degree(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.degree).or_insert(0) += 1;
        }
        m
    }
}

/// Options for [`replay_catalog`].
#[derive(Clone, Copy, Debug)]
pub struct ReplayOptions {
    /// Entries of higher degree are skipped.
    pub max_degree: u32,
    /// Recompute every order by iterating `D` (slow for large degrees).
    pub operational_orders: bool,
    /// Add the opaque degree-30 record when `max_degree >= 30`.
    pub include_opaque: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            max_degree: 30,
            operational_orders: false,
            include_opaque: true,
        }
    }
}

/// Evaluates the reference constructions for `d = 7` into a registry.
///
/// Orders are recomputed and compared with the printed ones; disagreements
/// are reported, not fatal. Entries listed in [`CORRECTIONS_D7`] are
/// reported against their printed construction and stored with the
/// replacement. Degrees `2..=max_degree` are marked complete.
pub fn replay_catalog(ctx: &FormContext, opts: ReplayOptions) -> Result<(Registry, ReplayReport)> {
    if ctx.d() != 7 {
        return Err(Error::InvalidInput(format!(
            "the reference catalog is for d=7, not d={}",
            ctx.d()
        )));
    }
    let mut reg = Registry::new(ctx);
    let mut report = ReplayReport::default();
    let mut skipped: Vec<&str> = Vec::new();
    for e in CATALOG_D7 {
        let mut c = Construction::parse(e.construction)?;
        if c.references().iter().any(|n| skipped.contains(n)) {
            skipped.push(e.name);
            continue;
        }
        let (degree, _) = c.shape(&reg)?;
        if degree > opts.max_degree {
            skipped.push(e.name);
            continue;
        }
        let had_level = !matches!(c, Construction::Transvect { level: None, .. });
        c.infer_level(&reg, e.order)?;
        let evaluated = match c.evaluate(&reg) {
            Ok(Some(v)) => Ok(v),
            Ok(None) => Err(Error::ZeroConstruction(e.name.to_string())),
            Err(err @ Error::LevelOutOfRange { .. }) => Err(err),
            Err(err) => return Err(err),
        };
        let correction = CORRECTIONS_D7.iter().find(|(n, _)| *n == e.name);
        let mut rep = ReplayEntry {
            name: e.name.to_string(),
            construction: c.to_string(),
            degree,
            printed_order: e.order,
            computed_order: evaluated.as_ref().ok().map(|v| v.order()),
            operational_order: None,
            level_inferred: !had_level,
            error: evaluated.as_ref().err().map(|e| e.to_string()),
            replaced_by: None,
        };
        let record = match (evaluated, correction) {
            (_, Some((_, fix))) => {
                let fc = Construction::parse(fix)?;
                let fv = fc
                    .evaluate(&reg)?
                    .ok_or_else(|| Error::ZeroConstruction(e.name.to_string()))?;
                let mut record = GeneratorRecord::new(e.name, fc.clone(), fv);
                record.note = Some(match &rep.computed_order {
                    Some(o) => format!("stated construction {c} has order {o}, not {}", e.order),
                    None => format!(
                        "stated construction {c} is undefined: {}",
                        rep.error.as_deref().unwrap_or("")
                    ),
                });
                rep.replaced_by = Some(fc.to_string());
                record
            }
            (Ok(v), None) => {
                let mut record = GeneratorRecord::new(e.name, c.clone(), v);
                if !had_level {
                    record.note = Some("level inferred from the stated order".into());
                }
                record
            }
            (Err(err), None) => return Err(err),
        };
        if opts.operational_orders {
            rep.operational_order = Some(record.value.as_ref().unwrap().operational_order()?);
        }
        reg.push(record)?;
        report.entries.push(rep);
    }
    if opts.include_opaque && opts.max_degree >= OPAQUE_D7.1 {
        let (name, degree, order, text) = OPAQUE_D7;
        reg.push(GeneratorRecord::opaque(name, degree, order, text))?;
    }
    for k in 2..=opts.max_degree {
        reg.set_status(k, DegreeStatus::Complete);
    }
    Ok((reg, report))
}

/// Search parameters for [`find_new_generators`].
#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Maximum number of nonzero candidates examined per cell.
    pub budget: usize,
    /// Skip `[t, P]^r` for products `P` when `r <= 1`. At level 1 the
    /// Leibniz rule writes the candidate as a sum of products, so nothing
    /// is lost. Higher levels are not pruned: they can be irreducible even
    /// when `r` is below every factor order.
    pub prune_products: bool,
    pub mode: RankMode,
}

pub const DEFAULT_BUDGET: usize = 5000;

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            budget: DEFAULT_BUDGET,
            prune_products: true,
            mode: RankMode::Exact,
        }
    }
}

/// Result of searching one cell.
#[derive(Clone, Debug)]
pub struct CellSearch {
    pub count: CellCount,
    pub found: Vec<(Construction, SemiInvariant)>,
    /// Nonzero candidates examined.
    pub tried: usize,
}

impl CellSearch {
    pub fn complete(&self) -> bool {
        self.found.len() as u64 >= self.count.delta()
    }
}

/// A candidate `[left, right]^level` before evaluation.
struct Candidate {
    left: Construction,
    right: Construction,
    level: u32,
}

fn candidate_list(registry: &Registry, i: u32, j: u32, opts: &SearchOptions) -> Vec<Candidate> {
    let d = registry.d();
    let recs = registry.records();
    let name_of = |k: usize| {
        if k == 0 {
            Construction::Base
        } else {
            Construction::Ref(recs[k].name.clone())
        }
    };
    let usable = |k: usize| recs[k].value.is_some();
    let mut out = Vec::new();

    // [t, g]^r over generators of degree i - 1.
    for (k, g) in recs.iter().enumerate() {
        if g.degree + 1 != i || !usable(k) {
            continue;
        }
        if let Some(r) = infer_level(d, g.order, j) {
            if r >= 1 && !(k == 0 && r % 2 == 1) {
                out.push(Candidate {
                    left: Construction::Base,
                    right: name_of(k),
                    level: r,
                });
            }
        }
    }

    // [g, h]^r over pairs of generators of degree >= 2.
    for (a, g) in recs.iter().enumerate().skip(1) {
        if !usable(a) || g.degree + 2 > i {
            continue;
        }
        for (b, h) in recs.iter().enumerate().skip(a) {
            if !usable(b) || g.degree + h.degree != i {
                continue;
            }
            if let Some(r) = infer_level(g.order, h.order, j) {
                if r >= 1 && !(a == b && r % 2 == 1) {
                    out.push(Candidate {
                        left: name_of(a),
                        right: name_of(b),
                        level: r,
                    });
                }
            }
        }
    }

    // [t, P]^r over products P of degree i - 1, highest level first.
    if i >= 3 {
        let (idx, shapes): (Vec<usize>, Vec<(u32, u32)>) = recs
            .iter()
            .enumerate()
            .filter(|(k, r)| r.degree < i - 1 && usable(*k))
            .map(|(k, r)| (k, r.shape()))
            .unzip();
        for r in (1..=d).rev() {
            let Some(ord_p) = (j + 2 * r).checked_sub(d) else {
                continue;
            };
            if r > ord_p {
                continue;
            }
            if opts.prune_products && r <= 1 {
                continue;
            }
            for exps in product_exponents(&shapes, i - 1, ord_p) {
                let factors: Vec<Construction> = exps
                    .iter()
                    .map(|&(k, e)| {
                        let base = name_of(idx[k]);
                        if e == 1 {
                            base
                        } else {
                            Construction::Power(Box::new(base), e)
                        }
                    })
                    .collect();
                let right = if factors.len() == 1 {
                    factors.into_iter().next().unwrap()
                } else {
                    Construction::Product(factors)
                };
                out.push(Candidate {
                    left: Construction::Base,
                    right,
                    level: r,
                });
            }
        }
    }
    out
}

/// Searches cell `(i, j)` for `delta(i, j)` generators independent of the
/// products and of each other. Generators already in the registry at
/// `(i, j)` count towards `delta`.
pub fn find_new_generators(
    registry: &Registry,
    i: u32,
    j: u32,
    opts: &SearchOptions,
) -> Result<CellSearch> {
    let (mut span, sigma) = product_span(registry, i, j, opts.mode)?;
    let count = cell_count(registry, i, j, sigma, &span);
    let existing: Vec<&SemiInvariant> =
        registry.at(i, j).filter_map(|r| r.value.as_ref()).collect();
    let needed = count.delta().saturating_sub(existing.len() as u64) as usize;
    let mut search = CellSearch {
        count,
        found: Vec::new(),
        tried: 0,
    };
    if needed == 0 {
        return Ok(search);
    }

    for v in existing {
        span.insert(v.zform());
    }

    let ctx = registry.ctx();
    let base_tower = RestrictedTower::new(ctx, &SemiInvariant::base(ctx), ctx.d());
    for cand in candidate_list(registry, i, j, opts) {
        if search.tried >= opts.budget {
            break;
        }
        let left = match &cand.left {
            Construction::Base => None,
            c => c.evaluate(registry)?,
        };
        let Some(right) = cand.right.evaluate(registry)? else {
            continue;
        };
        let right_tower = RestrictedTower::new(ctx, &right, cand.level);
        let z = match &left {
            None => combine_towers(&base_tower, &right_tower, cand.level)?,
            Some(l) => {
                let lt = RestrictedTower::new(ctx, l, cand.level);
                combine_towers(&lt, &right_tower, cand.level)?
            }
        };
        if z.is_zero() {
            continue;
        }
        search.tried += 1;
        let v = SemiInvariant::from_zform(ctx, &z)?;
        debug_assert_eq!(v.shape(), (i, j));
        if span.insert_if_independent(v.zform()) {
            let c = Construction::transvect(cand.left, cand.right, cand.level);
            log::debug!("({i},{j}): accepted {c}");
            search.found.push((c, v));
            if search.found.len() == needed {
                break;
            }
        }
    }
    Ok(search)
}

/// Parameters for [`run_pipeline`].
#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub max_degree: u32,
    pub search: SearchOptions,
    /// Registry file: loaded when present (resuming after its last
    /// complete degree) and rewritten after every degree.
    pub registry_path: Option<PathBuf>,
}

impl PipelineOptions {
    pub fn new(max_degree: u32) -> Self {
        PipelineOptions {
            max_degree,
            search: SearchOptions::default(),
            registry_path: None,
        }
    }
}

/// Per-cell summary of a pipeline run.
#[derive(Clone, Debug)]
pub struct CellReport {
    pub count: CellCount,
    pub found: usize,
    pub tried: usize,
    pub seconds: f64,
}

impl CellReport {
    pub fn complete(&self) -> bool {
        self.found as u64 >= self.count.delta()
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub registry: Registry,
    /// `delta` per cell for every degree processed or loaded.
    pub table: DistributionTable,
    /// Cells computed in this run with `delta > 0`.
    pub cells: Vec<CellReport>,
    /// Degree at which the run stopped because some cell ran out of
    /// budget.
    pub stopped_at: Option<u32>,
}

impl PipelineOutcome {
    /// Number of generators in the table (the size of the minimal system
    /// when the run is complete).
    pub fn generator_count(&self) -> u64 {
        self.table.total()
    }

    pub fn exhausted_cells(&self) -> Vec<&CellReport> {
        self.cells.iter().filter(|c| !c.complete()).collect()
    }
}

/// Builds a minimal generating system degree by degree.
///
/// Degree 1 is the base form. For each later degree, every order cell is
/// counted and searched independently (in parallel); new generators are
/// then appended in order of decreasing order and named `g{i}_{j}_{k}`.
/// A degree is marked complete when every cell found its `delta`
/// generators, otherwise partial, and the run stops there.
pub fn run_pipeline(ctx: &FormContext, opts: &PipelineOptions) -> Result<PipelineOutcome> {
    let d = ctx.d();
    let mut registry = match &opts.registry_path {
        Some(p) if p.exists() => {
            let r = Registry::load(p)?;
            if r.d() != d {
                return Err(Error::RegistryFormDegree {
                    found: r.d(),
                    expected: d,
                });
            }
            r
        }
        _ => Registry::new(ctx),
    };
    let start_degree = registry.complete_through() + 1;
    registry.truncate_from_degree(start_degree.max(2));

    let mut table = DistributionTable::default();
    for r in registry.records() {
        if r.degree < start_degree && r.degree <= opts.max_degree {
            table.set(r.degree, r.order, table.get(r.degree, r.order) + 1);
        }
    }
    let mut outcome_cells = Vec::new();
    let mut stopped_at = None;

    for i in start_degree.max(2)..=opts.max_degree {
        let t0 = Instant::now();
        let orders: Vec<u32> = orders_of_degree(d, i).collect();
        let reg_ref = &registry;
        let results: Vec<(u32, Result<CellSearch>, f64)> = orders
            .par_iter()
            .map(|&j| {
                let c0 = Instant::now();
                let r = find_new_generators(reg_ref, i, j, &opts.search);
                (j, r, c0.elapsed().as_secs_f64())
            })
            .collect();
        let mut complete = true;
        let mut new_records = Vec::new();
        for (j, res, secs) in results {
            let search = res?;
            let delta = search.count.delta();
            table.set(i, j, delta);
            if delta == 0 {
                continue;
            }
            if !search.complete() {
                complete = false;
                log::warn!(
                    "({i},{j}): budget exhausted after {} candidates, found {} of {delta}",
                    search.tried,
                    search.found.len()
                );
            }
            outcome_cells.push(CellReport {
                count: search.count,
                found: search.found.len(),
                tried: search.tried,
                seconds: secs,
            });
            for (k, (c, v)) in search.found.into_iter().enumerate() {
                new_records.push(GeneratorRecord::new(&format!("g{i}_{j}_{}", k + 1), c, v));
            }
        }
        for r in new_records {
            registry.push(r)?;
        }
        registry.set_status(
            i,
            if complete {
                DegreeStatus::Complete
            } else {
                DegreeStatus::Partial
            },
        );
        log::info!(
            "degree {i}: {} generators in {:.2}s",
            table.degree_total(i),
            t0.elapsed().as_secs_f64()
        );
        if let Some(p) = &opts.registry_path {
            registry.save(p)?;
        }
        if !complete {
            stopped_at = Some(i);
            break;
        }
    }
    Ok(PipelineOutcome {
        registry,
        table,
        cells: outcome_cells,
        stopped_at,
    })
}

/// One disagreeing cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellDiff {
    pub degree: u32,
    pub order: u32,
    pub expected: u64,
    pub found: u64,
}

/// Cell-by-cell comparison of `table` with `expected`, restricted to
/// degrees `<= max_degree` when given.
pub fn verify_distribution(
    table: &DistributionTable,
    expected: &DistributionTable,
    max_degree: Option<u32>,
) -> Vec<CellDiff> {
    let mut keys: Vec<(u32, u32)> = table
        .entries
        .keys()
        .chain(expected.entries.keys())
        .copied()
        .filter(|&(i, _)| max_degree.map_or(true, |m| i <= m))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(i, j)| {
            let (e, f) = (expected.get(i, j), table.get(i, j));
            (e != f).then_some(CellDiff {
                degree: i,
                order: j,
                expected: e,
                found: f,
            })
        })
        .collect()
}

/// Verdict for one record in [`audit_registry`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AuditStatus {
    Ok,
    /// Opaque record; nothing to check.
    Skipped,
    /// Lower degrees are incomplete, so products cannot be formed.
    Unverifiable,
    /// Re-evaluating the construction gives a different polynomial.
    ConstructionMismatch,
    /// Recomputed order differs from the stored order.
    OrderMismatch(u32),
    /// The record lies in the span of products and earlier records.
    Reducible,
}

#[derive(Clone, Debug)]
pub struct AuditEntry {
    pub name: String,
    pub degree: u32,
    pub order: u32,
    pub status: AuditStatus,
}

/// Re-checks every record: its construction reproduces its polynomial, its
/// order is the nilpotency order of `D` (when `check_orders`), and it is
/// independent of the products and earlier records in its cell.
pub fn audit_registry(
    registry: &Registry,
    mode: RankMode,
    check_orders: bool,
) -> Result<Vec<AuditEntry>> {
    let mut cells: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (k, r) in registry.records().iter().enumerate().skip(1) {
        cells.entry(r.shape()).or_default().push(k);
    }
    let results: Vec<Vec<AuditEntry>> = cells
        .par_iter()
        .map(|(&(i, j), members)| -> Result<Vec<AuditEntry>> {
            let mut out = Vec::new();
            let complete = registry.require_complete_below(i).is_ok();
            let mut span = None;
            for &k in members {
                let rec = &registry.records()[k];
                let entry = |status| AuditEntry {
                    name: rec.name.clone(),
                    degree: i,
                    order: j,
                    status,
                };
                let Some(v) = &rec.value else {
                    out.push(entry(AuditStatus::Skipped));
                    continue;
                };
                match rec.construction.evaluate(registry)? {
                    Some(e) if &e == v => {}
                    _ => {
                        out.push(entry(AuditStatus::ConstructionMismatch));
                        continue;
                    }
                }
                if check_orders {
                    let o = v.operational_order()?;
                    if o != rec.order {
                        out.push(entry(AuditStatus::OrderMismatch(o)));
                        continue;
                    }
                }
                if !complete {
                    out.push(entry(AuditStatus::Unverifiable));
                    continue;
                }
                if span.is_none() {
                    span = Some(product_span(registry, i, j, mode)?.0);
                }
                let independent = span.as_mut().unwrap().insert(v.zform());
                out.push(entry(if independent {
                    AuditStatus::Ok
                } else {
                    AuditStatus::Reducible
                }));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut flat: Vec<AuditEntry> = results.into_iter().flatten().collect();
    let order: BTreeMap<&str, usize> = registry
        .records()
        .iter()
        .enumerate()
        .map(|(k, r)| (r.name.as_str(), k))
        .collect();
    flat.sort_by_key(|e| order[e.name.as_str()]);
    Ok(flat)
}

/// Evaluates a product of registry generators given by name, e.g. for
/// spot checks.
pub fn product_of(registry: &Registry, names: &[(&str, u32)]) -> Result<SemiInvariant> {
    let exps: Vec<(usize, u32)> = names
        .iter()
        .map(|&(n, e)| {
            registry
                .records()
                .iter()
                .position(|r| r.name == n)
                .map(|k| (k, e))
                .ok_or_else(|| Error::UnknownName(n.to_string()))
        })
        .collect::<Result<_>>()?;
    product_value(registry, &exps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_table_totals() {
        let t = expected_table_d7();
        assert_eq!(t.total(), 147);
        let per_degree: Vec<u64> = (2..=13).map(|i| t.degree_total(i)).collect();
        assert_eq!(per_degree, [3, 6, 8, 10, 10, 12, 13, 11, 9, 9, 13, 9]);
    }

    #[test]
    fn orders_scan() {
        assert_eq!(
            orders_of_degree(7, 2).collect::<Vec<_>>(),
            [14, 12, 10, 8, 6, 4, 2, 0]
        );
        assert_eq!(orders_of_degree(7, 1).collect::<Vec<_>>(), [7, 5, 3, 1]);
    }

    #[test]
    fn degree_one_has_only_the_form() {
        let ctx = FormContext::new(7).unwrap();
        let reg = Registry::new(&ctx);
        let c = delta(&reg, 1, 7, RankMode::Exact).unwrap();
        assert_eq!((c.dim, c.sigma, c.delta()), (1, 0, 1));
        assert_eq!(delta(&reg, 1, 5, RankMode::Exact).unwrap().delta(), 0);
    }

    #[test]
    fn binary_quadratic_and_cubic() {
        for (d, max, total) in [(2, 3, 2), (3, 6, 4)] {
            let ctx = FormContext::new(d).unwrap();
            let out = run_pipeline(&ctx, &PipelineOptions::new(max)).unwrap();
            assert!(out.stopped_at.is_none());
            assert_eq!(out.generator_count(), total, "d={d}");
            assert_eq!(out.registry.len() as u64, total);
        }
    }

    #[test]
    fn verify_reports_differences() {
        let e = expected_table_d7();
        assert!(verify_distribution(&e, &e, None).is_empty());
        let mut t = e.clone();
        t.set(18, 0, 8);
        let diff = verify_distribution(&t, &e, None);
        assert_eq!(
            diff,
            vec![CellDiff {
                degree: 18,
                order: 0,
                expected: 9,
                found: 8
            }]
        );
        assert!(verify_distribution(&t, &e, Some(17)).is_empty());
    }
}
