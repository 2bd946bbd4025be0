//! Dependencies (TGDs, IDs, FDs), their classification, attribute closure,
//! and query minimization under FDs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::chase::apply_fds;
use crate::error::{Error, Result};
use crate::model::{canonical_database, fmt_atoms, sym, Atom, Cq, Signature, Sym, Term};

/// A tuple-generating dependency `body -> head`. Head variables that do not
/// occur in the body are existentially quantified. The name identifies the
/// rule in traces and dumps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tgd {
    pub name: String,
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
}

fn vars_of(atoms: &[Atom]) -> Vec<Sym> {
    let mut out: Vec<Sym> = Vec::new();
    for a in atoms {
        for v in a.vars() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

fn has_repeats(a: &Atom) -> bool {
    let vs = a.vars();
    vs.len() != a.args.len()
}

impl Tgd {
    pub fn new(name: impl Into<String>, body: Vec<Atom>, head: Vec<Atom>) -> Tgd {
        Tgd { name: name.into(), body, head }
    }

    pub fn body_vars(&self) -> Vec<Sym> {
        vars_of(&self.body)
    }
    pub fn head_vars(&self) -> Vec<Sym> {
        vars_of(&self.head)
    }
    /// Variables shared by body and head, in body order.
    pub fn frontier(&self) -> Vec<Sym> {
        let hv = self.head_vars();
        self.body_vars().into_iter().filter(|v| hv.contains(v)).collect()
    }
    pub fn existentials(&self) -> Vec<Sym> {
        let bv = self.body_vars();
        self.head_vars().into_iter().filter(|v| !bv.contains(v)).collect()
    }
    pub fn is_full(&self) -> bool {
        self.existentials().is_empty()
    }
    pub fn is_linear(&self) -> bool {
        self.body.len() == 1 && self.head.len() == 1
    }
    pub fn has_constants(&self) -> bool {
        self.body.iter().chain(&self.head).any(|a| a.args.iter().any(|t| !t.is_var()))
    }
    /// Single body atom, single head atom, no repeated variables, no constants.
    pub fn is_id(&self) -> bool {
        self.is_linear() && !self.has_constants() && !has_repeats(&self.body[0]) && !has_repeats(&self.head[0])
    }
    /// Number of exported variables (meaningful for IDs).
    pub fn width(&self) -> usize {
        self.frontier().len()
    }
    pub fn is_uid(&self) -> bool {
        self.is_id() && self.width() == 1
    }
    /// Index of a body atom containing every body variable.
    pub fn guard(&self) -> Option<usize> {
        let bv = self.body_vars();
        self.body.iter().position(|a| {
            let av = a.vars();
            bv.iter().all(|v| av.contains(v))
        })
    }
    pub fn is_guarded(&self) -> bool {
        self.guard().is_some()
    }
    /// Index of a body atom containing every exported variable.
    pub fn frontier_guard(&self) -> Option<usize> {
        let fr = self.frontier();
        self.body.iter().position(|a| {
            let av = a.vars();
            fr.iter().all(|v| av.contains(v))
        })
    }
    /// For an ID: pairs (body position, head position) of exported variables,
    /// ordered by body position.
    pub fn exported_positions(&self) -> Vec<(usize, usize)> {
        let (b, h) = (&self.body[0], &self.head[0]);
        let mut out = Vec::new();
        for (i, t) in b.args.iter().enumerate() {
            if let Some(j) = h.args.iter().position(|u| u == t) {
                out.push((i, j));
            }
        }
        out
    }
    /// Apply `f` to every relation name.
    pub fn map_relations(&self, mut f: impl FnMut(&Sym) -> Sym) -> Tgd {
        let mut m = |a: &Atom| a.with_rel(f(&a.rel));
        Tgd {
            name: self.name.clone(),
            body: self.body.iter().map(&mut m).collect(),
            head: self.head.iter().map(&mut m).collect(),
        }
    }
    pub fn check(&self, sig: &Signature) -> Result<()> {
        if self.body.is_empty() || self.head.is_empty() {
            return Err(Error::Validation(format!("rule {} needs a non-empty body and head", self.name)));
        }
        if self.has_constants() {
            return Err(Error::Validation(format!(
                "rule {} mentions a constant; constants are not allowed in constraints",
                self.name
            )));
        }
        for a in self.body.iter().chain(&self.head) {
            sig.check_atom(a)?;
        }
        Ok(())
    }
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {}", self.name, fmt_atoms(&self.body), fmt_atoms(&self.head))
    }
}

/// Functional dependency `lhs -> rhs` on one relation; positions are 0-based
/// internally and printed 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fd {
    pub rel: Sym,
    pub lhs: BTreeSet<usize>,
    pub rhs: usize,
}

impl Fd {
    pub fn new(rel: impl AsRef<str>, lhs: impl IntoIterator<Item = usize>, rhs: usize) -> Fd {
        Fd { rel: sym(rel), lhs: lhs.into_iter().collect(), rhs }
    }
    pub fn check(&self, sig: &Signature) -> Result<()> {
        let n =
            sig.arity(&self.rel).ok_or_else(|| Error::Validation(format!("FD on unknown relation {}", self.rel)))?;
        if self.rhs >= n || self.lhs.iter().any(|&p| p >= n) {
            return Err(Error::Validation(format!("FD {self} refers to a position beyond arity {n}")));
        }
        Ok(())
    }
}

impl fmt::Display for Fd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs: Vec<String> = self.lhs.iter().map(|p| (p + 1).to_string()).collect();
        write!(f, "fd {}: {} -> {}", self.rel, lhs.join(","), self.rhs + 1)
    }
}

/// The constraint classes the dispatcher distinguishes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintClass {
    PureId { width: usize },
    PureFd,
    UidPlusFd,
    FrontierGuardedTgd,
    FullGtgdPlusId,
    Unsupported,
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintClass::PureId { width } => write!(f, "PureID({width})"),
            ConstraintClass::PureFd => write!(f, "PureFD"),
            ConstraintClass::UidPlusFd => write!(f, "UIDplusFD"),
            ConstraintClass::FrontierGuardedTgd => write!(f, "FrontierGuardedTGD"),
            ConstraintClass::FullGtgdPlusId => write!(f, "FullGTGDplusID"),
            ConstraintClass::Unsupported => write!(f, "Unsupported"),
        }
    }
}

impl Serialize for ConstraintClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl std::str::FromStr for ConstraintClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("pureid") {
            let width = rest.trim_matches(|c| c == '(' || c == ')');
            let width = if width.is_empty() {
                0
            } else {
                width.parse().map_err(|_| Error::Validation(format!("bad class {s}")))?
            };
            return Ok(ConstraintClass::PureId { width });
        }
        match lower.as_str() {
            "purefd" => Ok(ConstraintClass::PureFd),
            "uidplusfd" => Ok(ConstraintClass::UidPlusFd),
            "frontierguardedtgd" => Ok(ConstraintClass::FrontierGuardedTgd),
            "fullgtgdplusid" => Ok(ConstraintClass::FullGtgdPlusId),
            "unsupported" => Ok(ConstraintClass::Unsupported),
            _ => Err(Error::Validation(format!("unknown constraint class {s}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub tgds: Vec<Tgd>,
    pub fds: Vec<Fd>,
}

impl ConstraintSet {
    pub fn new(tgds: Vec<Tgd>, fds: Vec<Fd>) -> Self {
        ConstraintSet { tgds, fds }
    }
    pub fn is_empty(&self) -> bool {
        self.tgds.is_empty() && self.fds.is_empty()
    }
    pub fn extend(&mut self, other: ConstraintSet) {
        self.tgds.extend(other.tgds);
        self.fds.extend(other.fds);
    }
    pub fn fds_on<'a>(&'a self, rel: &'a str) -> impl Iterator<Item = &'a Fd> + 'a {
        self.fds.iter().filter(move |f| &*f.rel == rel)
    }
    pub fn max_id_width(&self) -> usize {
        self.tgds.iter().filter(|t| t.is_id()).map(Tgd::width).max().unwrap_or(0)
    }
    pub fn check(&self, sig: &Signature) -> Result<()> {
        for t in &self.tgds {
            t.check(sig)?;
        }
        for f in &self.fds {
            f.check(sig)?;
        }
        Ok(())
    }

    /// Most specific class, following the dispatch table:
    /// IDs only → `PureId`; FDs only → `PureFd`; IDs of width ≤ 1 with FDs →
    /// `UidPlusFd`; IDs plus full guarded TGDs → `FullGtgdPlusId`;
    /// frontier-guarded TGDs → `FrontierGuardedTgd`; anything else (including
    /// TGDs beyond IDs mixed with FDs) → `Unsupported`.
    ///
    /// FDs with an empty left-hand side are not separable from IDs (a fresh
    /// null can collide with an existing constant column), so they make an
    /// ID+FD mix unsupported.
    pub fn classify(&self) -> ConstraintClass {
        let all_ids = self.tgds.iter().all(Tgd::is_id);
        if all_ids && self.fds.is_empty() {
            return ConstraintClass::PureId { width: self.max_id_width() };
        }
        if self.tgds.is_empty() {
            return ConstraintClass::PureFd;
        }
        if !self.fds.is_empty() {
            let unary = self.tgds.iter().all(|t| t.is_id() && t.width() <= 1);
            let separable = self.fds.iter().all(|f| !f.lhs.is_empty());
            return if unary && separable { ConstraintClass::UidPlusFd } else { ConstraintClass::Unsupported };
        }
        if self.tgds.iter().any(Tgd::has_constants) {
            return ConstraintClass::Unsupported;
        }
        if self.tgds.iter().all(|t| t.is_id() || (t.is_full() && t.is_guarded())) {
            return ConstraintClass::FullGtgdPlusId;
        }
        if self.tgds.iter().all(|t| t.frontier_guard().is_some()) {
            return ConstraintClass::FrontierGuardedTgd;
        }
        ConstraintClass::Unsupported
    }

    /// Copy of the set with every relation renamed through `f`.
    pub fn map_relations(&self, mut f: impl FnMut(&Sym) -> Sym, rename: impl Fn(&str) -> String) -> ConstraintSet {
        ConstraintSet {
            tgds: self
                .tgds
                .iter()
                .map(|t| {
                    let mut t2 = t.map_relations(&mut f);
                    t2.name = rename(&t.name);
                    t2
                })
                .collect(),
            fds: self.fds.iter().map(|d| Fd { rel: f(&d.rel), lhs: d.lhs.clone(), rhs: d.rhs }).collect(),
        }
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tgds {
            writeln!(f, "{t}")?;
        }
        for d in &self.fds {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Width of an ID: the number of exported variables.
pub fn id_width(delta: &Tgd) -> usize {
    delta.width()
}

/// Attribute closure of `p` under the FDs on `rel` (FDs on other relations
/// are ignored).
pub fn detby(rel: &str, p: &BTreeSet<usize>, fds: &[Fd]) -> BTreeSet<usize> {
    let mut cur = p.clone();
    loop {
        let mut changed = false;
        for f in fds.iter().filter(|f| &*f.rel == rel) {
            if !cur.contains(&f.rhs) && f.lhs.is_subset(&cur) {
                cur.insert(f.rhs);
                changed = true;
            }
        }
        if !changed {
            return cur;
        }
    }
}

/// The left-hand query is unsatisfiable under the FDs: two distinct constants
/// would have to be equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Degenerate {
    pub left: Term,
    pub right: Term,
}

/// Chase the canonical database of `q` with the FDs and read the result back
/// as a query.
pub fn minimize_under_fds(q: &Cq, fds: &[Fd]) -> std::result::Result<Cq, Degenerate> {
    let db = canonical_database(q);
    let (merged, _) = apply_fds(&db, fds, None).map_err(|(l, r)| Degenerate { left: l, right: r })?;
    // Nulls in the canonical database are tagged with variable names, so the
    // surviving null of every merge names its variable.
    let back: HashMap<u64, Sym> = merged
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(|t| match t {
            Term::Null(n) => Some((n.id, n.tag.clone())),
            _ => None,
        })
        .collect();
    let atoms: Vec<Atom> = merged
        .iter()
        .map(|a| {
            a.map_terms(|t| match t {
                Term::Null(n) => Term::Var(back[&n.id].clone()),
                other => other.clone(),
            })
        })
        .collect();
    let mut out = Cq::boolean(atoms);
    let vars = out.vars();
    out.free = q.free.iter().filter(|v| vars.contains(v)).cloned().collect();
    Ok(out)
}
