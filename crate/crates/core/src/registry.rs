//! Generator records, construction expressions and the on-disk registry.
//!
//! File layout (line oriented, `#` starts a comment):
//!
//! ```text
//! covforge-registry 1
//! tool 0.1.0
//! d 7
//! status 1 complete
//! record dv1
//! degree 2
//! order 6
//! construction [t,t]^4
//! poly 3*t^-2*z2^2 + 1*t^-2*z4^1
//! audit 5f0c...
//! end
//! ```
//!
//! `poly` holds the z-form (see [`crate::sl2`]); `poly none` marks an opaque
//! record. `audit` is the SHA-256 of the record's shape, construction and
//! polynomial, so a registry file can be checked for tampering before its
//! irreducibility certificates are re-run.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rustc_hash::FxHashMap;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::sl2::{FormContext, SemiInvariant};
use crate::transvect::semitransvectant_direct;

pub const FORMAT_VERSION: u32 = 1;

/// How a generator was built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Construction {
    /// The base form coefficient `t`.
    Base,
    /// An earlier registry record.
    Ref(String),
    /// `[left, right]^level`; `None` until the level is inferred.
    Transvect {
        left: Box<Construction>,
        right: Box<Construction>,
        level: Option<u32>,
    },
    Product(Vec<Construction>),
    Power(Box<Construction>, u32),
    /// A record whose polynomial is not available.
    Opaque(String),
}

impl Construction {
    pub fn transvect(left: Construction, right: Construction, level: u32) -> Self {
        Construction::Transvect {
            left: Box::new(left),
            right: Box::new(right),
            level: Some(level),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = ExprParser {
            src: text.as_bytes(),
            pos: 0,
            text,
        };
        let c = p.product()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(c)
    }

    pub fn is_opaque(&self) -> bool {
        matches!(self, Construction::Opaque(_))
    }

    /// Names of the registry records this construction refers to.
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Construction::Ref(n) => out.push(n),
            Construction::Transvect { left, right, .. } => {
                left.collect_refs(out);
                right.collect_refs(out);
            }
            Construction::Product(fs) => fs.iter().for_each(|f| f.collect_refs(out)),
            Construction::Power(b, _) => b.collect_refs(out),
            Construction::Base | Construction::Opaque(_) => {}
        }
    }

    /// `(degree, order)` of the value, without evaluating it. The order of a
    /// transvectant is only known when its level is.
    pub fn shape(&self, reg: &Registry) -> Result<(u32, Option<u32>)> {
        Ok(match self {
            Construction::Base => (1, Some(reg.ctx.d())),
            Construction::Ref(n) => {
                let r = reg.get(n).ok_or_else(|| Error::UnknownName(n.clone()))?;
                (r.degree, Some(r.order))
            }
            Construction::Transvect { left, right, level } => {
                let (dl, ol) = left.shape(reg)?;
                let (dr, or) = right.shape(reg)?;
                let order = match (ol, or, level) {
                    (Some(a), Some(b), Some(r)) => (a + b).checked_sub(2 * r),
                    _ => None,
                };
                (dl + dr, order)
            }
            Construction::Product(fs) => {
                let mut deg = 0;
                let mut ord = Some(0);
                for f in fs {
                    let (d, o) = f.shape(reg)?;
                    deg += d;
                    ord = ord.zip(o).map(|(a, b)| a + b);
                }
                (deg, ord)
            }
            Construction::Power(b, e) => {
                let (d, o) = b.shape(reg)?;
                (d * e, o.map(|o| o * e))
            }
            Construction::Opaque(_) => {
                return Err(Error::InvalidInput(
                    "opaque construction has no shape".into(),
                ))
            }
        })
    }

    /// Fills in an omitted top-level transvectant level from the order the
    /// result is supposed to have.
    pub fn infer_level(&mut self, reg: &Registry, target_order: u32) -> Result<()> {
        let text = self.to_string();
        if let Construction::Transvect { left, right, level } = self {
            if level.is_none() {
                let (_, ol) = left.shape(reg)?;
                let (_, or) = right.shape(reg)?;
                let (a, b) = ol
                    .zip(or)
                    .ok_or_else(|| Error::LevelInference(text.clone()))?;
                *level = Some(
                    crate::transvect::infer_level(a, b, target_order)
                        .ok_or(Error::LevelInference(text))?,
                );
            }
        }
        Ok(())
    }

    /// Evaluates against the records of `reg`. `Ok(None)` means the value is
    /// zero.
    pub fn evaluate(&self, reg: &Registry) -> Result<Option<SemiInvariant>> {
        let ctx = &reg.ctx;
        Ok(match self {
            Construction::Base => Some(SemiInvariant::base(ctx)),
            Construction::Ref(n) => {
                let r = reg.get(n).ok_or_else(|| Error::UnknownName(n.clone()))?;
                match &r.value {
                    Some(v) => Some(v.clone()),
                    None => {
                        return Err(Error::InvalidInput(format!(
                            "record `{n}` has no polynomial"
                        )))
                    }
                }
            }
            Construction::Transvect { left, right, level } => {
                let r = level.ok_or_else(|| Error::LevelInference(self.to_string()))?;
                match (left.evaluate(reg)?, right.evaluate(reg)?) {
                    (Some(f), Some(g)) => semitransvectant_direct(ctx, &f, &g, r)?,
                    _ => None,
                }
            }
            Construction::Product(fs) => {
                let mut acc: Option<SemiInvariant> = None;
                for f in fs {
                    let Some(v) = f.evaluate(reg)? else {
                        return Ok(None);
                    };
                    acc = Some(match acc {
                        None => v,
                        Some(a) => a.mul(&v),
                    });
                }
                acc
            }
            Construction::Power(b, e) => b.evaluate(reg)?.map(|v| v.pow(*e)),
            Construction::Opaque(_) => {
                return Err(Error::InvalidInput(
                    "opaque construction cannot be evaluated".into(),
                ))
            }
        })
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::Base => write!(f, "t"),
            Construction::Ref(n) => write!(f, "{n}"),
            Construction::Transvect { left, right, level } => {
                write!(f, "[{left},{right}]")?;
                if let Some(r) = level {
                    write!(f, "^{r}")?;
                }
                Ok(())
            }
            Construction::Product(fs) => {
                for (k, c) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    if matches!(c, Construction::Product(_)) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Construction::Power(b, e) => match **b {
                Construction::Base | Construction::Ref(_) | Construction::Transvect { .. } => {
                    write!(f, "{b}^{e}")
                }
                _ => write!(f, "({b})^{e}"),
            },
            Construction::Opaque(s) => write!(f, "opaque({s})"),
        }
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
    text: &'a str,
}

impl ExprParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Construction {
            text: self.text.to_string(),
            msg: format!("{msg} at byte {}", self.pos),
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() != Some(c) {
            return Err(self.err(&format!("expected `{}`", c as char)));
        }
        self.pos += 1;
        Ok(())
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.text[start..self.pos]
            .parse()
            .map_err(|_| self.err("expected an integer"))
    }

    fn product(&mut self) -> Result<Construction> {
        let mut factors = vec![self.power()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.power()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Construction::Product(factors)
        })
    }

    fn power(&mut self) -> Result<Construction> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.uint()?;
            if e == 0 {
                return Err(self.err("zero exponent"));
            }
            return Ok(if e == 1 {
                base
            } else {
                Construction::Power(Box::new(base), e)
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Construction> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let left = self.product()?;
                self.expect(b',')?;
                let right = self.product()?;
                self.expect(b']')?;
                let level = if self.peek() == Some(b'^') {
                    self.pos += 1;
                    Some(self.uint()?)
                } else {
                    None
                };
                Ok(Construction::Transvect {
                    left: Box::new(left),
                    right: Box::new(right),
                    level,
                })
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.product()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.text[start..self.pos];
                if name == "opaque" && self.peek() == Some(b'(') {
                    self.pos += 1;
                    let inner_start = self.pos;
                    let mut depth = 1;
                    while self.pos < self.src.len() {
                        match self.src[self.pos] {
                            b'(' => depth += 1,
                            b')' => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                        self.pos += 1;
                    }
                    if depth != 0 {
                        return Err(self.err("unterminated opaque(...)"));
                    }
                    let inner = self.text[inner_start..self.pos].to_string();
                    self.pos += 1;
                    return Ok(Construction::Opaque(inner));
                }
                Ok(if name == "t" {
                    Construction::Base
                } else {
                    Construction::Ref(name.to_string())
                })
            }
            _ => Err(self.err("expected a generator, `[` or `(`")),
        }
    }
}

/// One generator of the system.
#[derive(Clone, Debug)]
pub struct GeneratorRecord {
    pub name: String,
    pub degree: u32,
    pub order: u32,
    pub construction: Construction,
    /// Absent only for opaque records.
    pub value: Option<SemiInvariant>,
    /// Free-form annotation (inferred levels, corrected constructions).
    pub note: Option<String>,
}

impl GeneratorRecord {
    pub fn new(name: &str, construction: Construction, value: SemiInvariant) -> Self {
        GeneratorRecord {
            name: name.to_string(),
            degree: value.degree(),
            order: value.order(),
            construction,
            value: Some(value),
            note: None,
        }
    }

    pub fn opaque(name: &str, degree: u32, order: u32, description: &str) -> Self {
        GeneratorRecord {
            name: name.to_string(),
            degree,
            order,
            construction: Construction::Opaque(description.to_string()),
            value: None,
            note: None,
        }
    }

    pub fn shape(&self) -> (u32, u32) {
        (self.degree, self.order)
    }

    fn poly_text(&self) -> String {
        match &self.value {
            Some(v) => v.zform().to_canonical_string(),
            None => "none".to_string(),
        }
    }

    /// SHA-256 over the fields that the irreducibility certificate depends on.
    pub fn audit_hash(&self, d: u32) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "d={d}\nname={}\ndegree={}\norder={}\nconstruction={}\npoly={}\n",
            self.name,
            self.degree,
            self.order,
            self.construction,
            self.poly_text()
        ));
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeStatus {
    Complete,
    Partial,
}

impl fmt::Display for DegreeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegreeStatus::Complete => "complete",
            DegreeStatus::Partial => "partial",
        })
    }
}

/// An ordered list of generators for one form degree.
#[derive(Clone, Debug)]
pub struct Registry {
    ctx: FormContext,
    records: Vec<GeneratorRecord>,
    index: FxHashMap<String, usize>,
    status: BTreeMap<u32, DegreeStatus>,
}

impl Registry {
    /// A registry holding only the base form `t`, with degree 1 complete.
    pub fn new(ctx: &FormContext) -> Self {
        let mut reg = Registry {
            ctx: ctx.clone(),
            records: Vec::new(),
            index: FxHashMap::default(),
            status: BTreeMap::new(),
        };
        let t = GeneratorRecord::new("t", Construction::Base, SemiInvariant::base(ctx));
        reg.index.insert("t".to_string(), 0);
        reg.records.push(t);
        reg.status.insert(1, DegreeStatus::Complete);
        reg
    }

    pub fn ctx(&self) -> &FormContext {
        &self.ctx
    }

    pub fn d(&self) -> u32 {
        self.ctx.d()
    }

    pub fn records(&self) -> &[GeneratorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&GeneratorRecord> {
        self.index.get(name).map(|&i| &self.records[i])
    }

    pub fn value(&self, name: &str) -> Result<&SemiInvariant> {
        self.get(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))?
            .value
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("record `{name}` has no polynomial")))
    }

    pub fn push(&mut self, record: GeneratorRecord) -> Result<()> {
        if self.index.contains_key(&record.name) {
            return Err(Error::DuplicateName(record.name));
        }
        self.index.insert(record.name.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    /// Drops every record of degree `>= degree` and its status.
    pub fn truncate_from_degree(&mut self, degree: u32) {
        self.records.retain(|r| r.degree < degree);
        self.index = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.clone(), i))
            .collect();
        self.status.retain(|&k, _| k < degree);
    }

    pub fn set_status(&mut self, degree: u32, status: DegreeStatus) {
        self.status.insert(degree, status);
    }

    pub fn status(&self, degree: u32) -> Option<DegreeStatus> {
        self.status.get(&degree).copied()
    }

    pub fn statuses(&self) -> &BTreeMap<u32, DegreeStatus> {
        &self.status
    }

    /// Largest `k` such that degrees `1..=k` are all complete.
    pub fn complete_through(&self) -> u32 {
        let mut k = 0;
        while self.status(k + 1) == Some(DegreeStatus::Complete) {
            k += 1;
        }
        k
    }

    /// Errors unless every degree below `degree` is complete.
    pub fn require_complete_below(&self, degree: u32) -> Result<()> {
        let k = self.complete_through();
        if k + 1 < degree {
            return Err(Error::RegistryIncomplete { degree: k + 1 });
        }
        Ok(())
    }

    /// Records of degree `< degree`, with their registry indices.
    pub fn generators_below(&self, degree: u32) -> impl Iterator<Item = (usize, &GeneratorRecord)> {
        self.records
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.degree < degree)
    }

    /// Records at exactly `(degree, order)`.
    pub fn at(&self, degree: u32, order: u32) -> impl Iterator<Item = &GeneratorRecord> {
        self.records
            .iter()
            .filter(move |r| r.degree == degree && r.order == order)
    }

    /// Parses a construction, infers an omitted level from `order` when
    /// given, evaluates it and appends the result under `name`.
    pub fn add_construction(
        &mut self,
        name: &str,
        text: &str,
        order: Option<u32>,
    ) -> Result<&GeneratorRecord> {
        let mut c = Construction::parse(text)?;
        if let Some(o) = order {
            c.infer_level(self, o)?;
        }
        let v = c
            .evaluate(self)?
            .ok_or_else(|| Error::ZeroConstruction(name.to_string()))?;
        self.push(GeneratorRecord::new(name, c, v))?;
        Ok(self.records.last().unwrap())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("covforge-registry {FORMAT_VERSION}\n"));
        s.push_str(&format!("tool {}\n", crate::TOOL_VERSION));
        s.push_str(&format!("d {}\n", self.d()));
        for (deg, st) in &self.status {
            s.push_str(&format!("status {deg} {st}\n"));
        }
        for r in &self.records {
            s.push_str(&format!("record {}\n", r.name));
            s.push_str(&format!("degree {}\n", r.degree));
            s.push_str(&format!("order {}\n", r.order));
            s.push_str(&format!("construction {}\n", r.construction));
            if let Some(n) = &r.note {
                s.push_str(&format!("note {}\n", n.replace('\n', " ")));
            }
            s.push_str(&format!("poly {}\n", r.poly_text()));
            s.push_str(&format!("audit {}\n", r.audit_hash(self.d())));
            s.push_str("end\n");
        }
        s
    }

    /// Parses a registry file. Audit hashes are checked; polynomials are
    /// taken as stored (use the discover audit to re-derive them).
    pub fn from_text(text: &str) -> Result<Self> {
        let fmt_err = |line: usize, msg: &str| Error::RegistryFormat {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| fmt_err(0, &format!("unexpected end of file, expected `{key}`")))?;
            let (k, v) = l.split_once(' ').unwrap_or((l, ""));
            if k != key {
                return Err(fmt_err(n, &format!("expected `{key}`, found `{k}`")));
            }
            Ok((n, v.trim().to_string()))
        };

        let (n, v) = field("covforge-registry")?;
        let version: u32 = v.parse().map_err(|_| fmt_err(n, "bad format version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::RegistryVersion(version));
        }
        field("tool")?;
        let (n, v) = field("d")?;
        let d: u32 = v.parse().map_err(|_| fmt_err(n, "bad form degree"))?;
        let ctx = FormContext::new(d)?;
        let mut reg = Registry::new(&ctx);
        reg.status.clear();

        // Remaining lines: status entries, then records.
        let rest: Vec<(usize, &str)> = lines.collect();
        let mut k = 0;
        let split = |l: &str| -> (String, String) {
            let (a, b) = l.split_once(' ').unwrap_or((l, ""));
            (a.to_string(), b.trim().to_string())
        };
        while k < rest.len() {
            let (n, l) = rest[k];
            let (key, val) = split(l);
            match key.as_str() {
                "status" => {
                    let mut it = val.split_whitespace();
                    let deg: u32 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| fmt_err(n, "bad status degree"))?;
                    let st = match it.next() {
                        Some("complete") => DegreeStatus::Complete,
                        Some("partial") => DegreeStatus::Partial,
                        _ => return Err(fmt_err(n, "status must be complete or partial")),
                    };
                    reg.status.insert(deg, st);
                    k += 1;
                }
                "record" => {
                    let name = val;
                    let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
                    k += 1;
                    loop {
                        let Some(&(m, l)) = rest.get(k) else {
                            return Err(fmt_err(n, "record without `end`"));
                        };
                        k += 1;
                        if l == "end" {
                            break;
                        }
                        let (fk, fv) = split(l);
                        fields.insert(fk, (m, fv));
                    }
                    let get = |key: &str| {
                        fields
                            .get(key)
                            .cloned()
                            .ok_or_else(|| fmt_err(n, &format!("record `{name}` lacks `{key}`")))
                    };
                    let (m, deg) = get("degree")?;
                    let degree: u32 = deg.parse().map_err(|_| fmt_err(m, "bad degree"))?;
                    let (m, ord) = get("order")?;
                    let order: u32 = ord.parse().map_err(|_| fmt_err(m, "bad order"))?;
                    let (m, cons) = get("construction")?;
                    let construction =
                        Construction::parse(&cons).map_err(|e| fmt_err(m, &e.to_string()))?;
                    let (m, poly) = get("poly")?;
                    let value = if poly == "none" {
                        None
                    } else {
                        let z: Poly = poly
                            .parse()
                            .map_err(|e: crate::poly::ParsePolyError| fmt_err(m, &e.to_string()))?;
                        let v = SemiInvariant::from_zform(&ctx, &z)
                            .map_err(|e| fmt_err(m, &e.to_string()))?;
                        if v.shape() != (degree, order) {
                            return Err(fmt_err(
                                m,
                                &format!("polynomial of `{name}` has shape {:?}", v.shape()),
                            ));
                        }
                        Some(v)
                    };
                    let rec = GeneratorRecord {
                        name: name.clone(),
                        degree,
                        order,
                        construction,
                        value,
                        note: fields.get("note").map(|(_, s)| s.clone()),
                    };
                    let (m, audit) = get("audit")?;
                    if rec.audit_hash(d) != audit {
                        return Err(fmt_err(m, &format!("audit hash mismatch for `{name}`")));
                    }
                    if rec.name == "t" {
                        if rec.construction != Construction::Base
                            || rec.value != reg.records[0].value
                        {
                            return Err(fmt_err(n, "record `t` must be the base form"));
                        }
                        continue;
                    }
                    reg.push(rec).map_err(|e| fmt_err(n, &e.to_string()))?;
                }
                _ => return Err(fmt_err(n, &format!("unexpected `{key}`"))),
            }
        }
        Ok(reg)
    }

    /// Writes atomically (temporary file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(self.to_text().as_bytes()).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Registry::from_text(&text)
    }

    /// Distribution of the records over `(degree, order)` cells.
    pub fn distribution(&self) -> DistributionTable {
        let mut t = DistributionTable::default();
        for r in &self.records {
            *t.entries.entry((r.degree, r.order)).or_insert(0) += 1;
        }
        t
    }
}

/// Counts of irreducible generators per `(degree, order)` cell.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DistributionTable {
    pub entries: BTreeMap<(u32, u32), u64>,
}

impl DistributionTable {
    pub fn from_cells<I: IntoIterator<Item = ((u32, u32), u64)>>(cells: I) -> Self {
        DistributionTable {
            entries: cells.into_iter().filter(|&(_, n)| n > 0).collect(),
        }
    }

    pub fn get(&self, degree: u32, order: u32) -> u64 {
        self.entries.get(&(degree, order)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, degree: u32, order: u32, n: u64) {
        if n == 0 {
            self.entries.remove(&(degree, order));
        } else {
            self.entries.insert((degree, order), n);
        }
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn degree_total(&self, degree: u32) -> u64 {
        self.entries
            .iter()
            .filter(|((i, _), _)| *i == degree)
            .map(|(_, n)| n)
            .sum()
    }

    /// Nonzero cells as `(degree, order, delta)`, sorted.
    pub fn records(&self) -> Vec<(u32, u32, u64)> {
        self.entries.iter().map(|(&(i, j), &n)| (i, j, n)).collect()
    }

    /// Aligned grid: one row per degree, one column per order, plus a row
    /// total. Zero cells are left blank.
    pub fn to_grid(&self) -> String {
        let max_order = self.entries.keys().map(|k| k.1).max().unwrap_or(0);
        let degrees: Vec<u32> = {
            let mut v: Vec<u32> = self.entries.keys().map(|k| k.0).collect();
            v.dedup();
            v
        };
        let mut s = String::from("deg\\ord");
        for j in 0..=max_order {
            s.push_str(&format!("{j:>4}"));
        }
        s.push_str("   sum\n");
        for &i in &degrees {
            s.push_str(&format!("{i:>7}"));
            for j in 0..=max_order {
                match self.get(i, j) {
                    0 => s.push_str("    "),
                    n => s.push_str(&format!("{n:>4}")),
                }
            }
            s.push_str(&format!("{:>6}\n", self.degree_total(i)));
        }
        s.push_str(&format!("total {}\n", self.total()));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx7() -> FormContext {
        FormContext::new(7).unwrap()
    }

    #[test]
    fn construction_round_trip() {
        for s in [
            "t",
            "[t,t]^4",
            "[t,dv1*dv2]^7",
            "[t,tr1^2]^6",
            "[sh10,vi2]",
            "[t,[t,t]^2]^7",
            "dv1^2*tr6",
            "opaque((h,alpha))",
        ] {
            let c = Construction::parse(s).unwrap();
            assert_eq!(c.to_string(), s);
        }
        assert!(Construction::parse("[t,t").is_err());
        assert!(Construction::parse("t^0").is_err());
        assert!(Construction::parse("[t,si11]^3)").is_err());
    }

    #[test]
    fn level_inference_and_evaluation() {
        let mut reg = Registry::new(&ctx7());
        reg.add_construction("dv3", "[t,t]^2", None).unwrap();
        let tr2 = reg.add_construction("tr2", "[t,dv3]", Some(15)).unwrap();
        assert_eq!(tr2.construction.to_string(), "[t,dv3]^1");
        assert_eq!(tr2.shape(), (3, 15));
        assert!(matches!(
            reg.add_construction("x", "[t,dv3]", Some(16)),
            Err(Error::LevelInference(_))
        ));
        assert!(matches!(
            reg.add_construction("y", "[t,t]^3", None),
            Err(Error::ZeroConstruction(_))
        ));
        assert!(matches!(
            reg.add_construction("dv3", "[t,t]^4", None),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn text_round_trip_and_tamper_detection() {
        let mut reg = Registry::new(&ctx7());
        reg.add_construction("dv1", "[t,t]^4", None).unwrap();
        reg.add_construction("dv2", "[t,t]^6", None).unwrap();
        reg.push(GeneratorRecord::opaque("trd", 30, 0, "(h,alpha)"))
            .unwrap();
        reg.set_status(1, DegreeStatus::Complete);
        reg.set_status(2, DegreeStatus::Partial);
        let text = reg.to_text();
        let back = Registry::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.value("dv1").unwrap(), reg.value("dv1").unwrap());
        assert_eq!(back.complete_through(), 1);

        let tampered = text.replacen("order 6", "order 4", 1);
        assert!(Registry::from_text(&tampered).is_err());
        let wrong_version = text.replacen("covforge-registry 1", "covforge-registry 9", 1);
        assert!(matches!(
            Registry::from_text(&wrong_version),
            Err(Error::RegistryVersion(9))
        ));
    }

    #[test]
    fn grid_lists_rows() {
        let t =
            DistributionTable::from_cells([((1, 7), 1), ((2, 2), 1), ((2, 6), 1), ((2, 10), 0)]);
        assert_eq!(t.total(), 3);
        let g = t.to_grid();
        assert!(g.lines().count() == 4);
        assert!(g.contains("total 3"));
    }
}
