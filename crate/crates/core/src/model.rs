//! Relational vocabulary: signatures, terms, atoms, conjunctive queries,
//! instances, and homomorphism search.
//!
//! Everything here is deliberately plain. Instances are insertion-ordered
//! fact sets with two secondary indexes (by relation, and by
//! `(relation, position, value)`), and homomorphisms are found by ordinary
//! backtracking over the atoms in the order they were written.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{ControlFlow, Range};
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Interned-by-sharing symbol used for relation names, constants and variables.
pub type Sym = Arc<str>;

/// Build a [`Sym`] from anything string-like.
pub fn sym(s: impl AsRef<str>) -> Sym {
    Arc::from(s.as_ref())
}

/// A labelled null. Identity is the generation id; the tag only helps humans
/// read traces (it is usually the name of the variable the null replaced).
#[derive(Clone, Debug)]
pub struct Null {
    pub id: u64,
    pub tag: Sym,
}

impl PartialEq for Null {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Null {}
impl Hash for Null {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}
impl PartialOrd for Null {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Null {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Sym),
    Var(Sym),
    Null(Null),
}

impl Term {
    pub fn constant(s: impl AsRef<str>) -> Term {
        Term::Const(sym(s))
    }
    pub fn var(s: impl AsRef<str>) -> Term {
        Term::Var(sym(s))
    }
    pub fn null(id: u64, tag: impl AsRef<str>) -> Term {
        Term::Null(Null { id, tag: sym(tag) })
    }
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }
    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }
    pub fn as_var(&self) -> Option<&Sym> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
    pub fn null_id(&self) -> Option<u64> {
        match self {
            Term::Null(n) => Some(n.id),
            _ => None,
        }
    }
    /// Ground terms may appear in instances.
    pub fn is_ground(&self) -> bool {
        !self.is_var()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "\"{c}\""),
            Term::Var(v) => write!(f, "{v}"),
            Term::Null(n) => write!(f, "_{}{}", n.tag, n.id),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub rel: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(rel: impl AsRef<str>, args: Vec<Term>) -> Atom {
        Atom { rel: sym(rel), args }
    }
    pub fn arity(&self) -> usize {
        self.args.len()
    }
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }
    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }
    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Atom {
        Atom { rel: self.rel.clone(), args: self.args.iter().map(&mut f).collect() }
    }
    pub fn with_rel(&self, rel: Sym) -> Atom {
        Atom { rel, args: self.args.clone() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Write atoms separated by `", "`.
pub fn fmt_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> String {
    atoms.into_iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelInfo {
    pub arity: usize,
    /// Attribute names, one per position. Generated names are used when the
    /// relation was not declared with names.
    pub attrs: Vec<String>,
}

/// Relation names with arities (and attribute names for the text format).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    rels: IndexMap<Sym, RelInfo>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a relation with generated attribute names `a1..an`.
    pub fn add(&mut self, name: impl AsRef<str>, arity: usize) -> Result<()> {
        let attrs = (1..=arity).map(|i| format!("a{i}")).collect();
        self.add_named(name, attrs)
    }

    pub fn add_named(&mut self, name: impl AsRef<str>, attrs: Vec<String>) -> Result<()> {
        let name = sym(name);
        if self.rels.contains_key(&name) {
            return Err(Error::Validation(format!("relation {name} declared twice")));
        }
        self.rels.insert(name, RelInfo { arity: attrs.len(), attrs });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rels.contains_key(name)
    }
    pub fn arity(&self, name: &str) -> Option<usize> {
        self.rels.get(name).map(|r| r.arity)
    }
    pub fn info(&self, name: &str) -> Option<&RelInfo> {
        self.rels.get(name)
    }
    pub fn relations(&self) -> impl Iterator<Item = (&Sym, &RelInfo)> {
        self.rels.iter()
    }
    pub fn names(&self) -> impl Iterator<Item = &Sym> {
        self.rels.keys()
    }
    pub fn len(&self) -> usize {
        self.rels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }
    pub fn max_arity(&self) -> usize {
        self.rels.values().map(|r| r.arity).max().unwrap_or(0)
    }

    /// Position index of attribute `name` in relation `rel`.
    pub fn position_of(&self, rel: &str, name: &str) -> Option<usize> {
        self.rels.get(rel)?.attrs.iter().position(|a| a == name)
    }

    /// Check an atom against this signature.
    pub fn check_atom(&self, atom: &Atom) -> Result<()> {
        match self.arity(&atom.rel) {
            None => Err(Error::Validation(format!("unknown relation {} in {atom}", atom.rel))),
            Some(n) if n != atom.args.len() => Err(Error::Validation(format!(
                "arity mismatch in {atom}: {} expects {n} arguments, got {}",
                atom.rel,
                atom.args.len()
            ))),
            Some(_) => Ok(()),
        }
    }

    /// Every relation name is unique and every declared arity is at least one.
    pub fn validate(&self) -> Result<()> {
        for (n, r) in &self.rels {
            if r.arity == 0 {
                return Err(Error::Validation(format!("relation {n} has arity 0")));
            }
        }
        Ok(())
    }
}

/// A conjunctive query. Free variables are kept for reporting only: all
/// reasoning treats the query as Boolean.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cq {
    pub atoms: Vec<Atom>,
    pub free: Vec<Sym>,
}

impl Cq {
    pub fn boolean(atoms: Vec<Atom>) -> Cq {
        Cq { atoms, free: Vec::new() }
    }
    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }
    /// Booleanize by treating free variables as existential.
    pub fn booleanize(&self) -> Cq {
        Cq::boolean(self.atoms.clone())
    }
    pub fn vars(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::new();
        for a in &self.atoms {
            for v in a.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
    pub fn constants(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::new();
        for a in &self.atoms {
            for t in &a.args {
                if let Term::Const(c) = t {
                    if !out.contains(c) {
                        out.push(c.clone());
                    }
                }
            }
        }
        out
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    pub fn check(&self, sig: &Signature) -> Result<()> {
        for a in &self.atoms {
            sig.check_atom(a)?;
            if a.args.iter().any(Term::is_null) {
                return Err(Error::Validation(format!("query atom {a} contains a null")));
            }
        }
        for v in &self.free {
            if !self.vars().contains(v) {
                return Err(Error::Validation(format!("free variable {v} does not occur in the query")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_atoms(&self.atoms))
    }
}

/// Source of fresh nulls for one engine run.
#[derive(Clone, Debug)]
pub struct NullGen {
    next: u64,
}

impl Default for NullGen {
    fn default() -> Self {
        NullGen { next: 1 }
    }
}

impl NullGen {
    pub fn starting_at(next: u64) -> Self {
        NullGen { next: next.max(1) }
    }
    /// A generator guaranteed not to clash with the nulls of `inst`.
    pub fn after(inst: &Instance) -> Self {
        Self::starting_at(inst.max_null_id() + 1)
    }
    pub fn fresh(&mut self, tag: &Sym) -> Term {
        let id = self.next;
        self.next += 1;
        Term::Null(Null { id, tag: tag.clone() })
    }
    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// A finite set of ground facts, in insertion order.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    facts: IndexSet<Atom>,
    by_rel: HashMap<Sym, Vec<usize>>,
    by_pos: HashMap<(Sym, usize, Term), Vec<usize>>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.facts.len() == other.facts.len() && self.facts.iter().all(|f| other.facts.contains(f))
    }
}
impl Eq for Instance {}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Atom>) -> Self {
        let mut inst = Instance::new();
        for f in facts {
            inst.insert(f);
        }
        inst
    }

    /// Insert a ground fact; returns whether it was new.
    pub fn insert(&mut self, fact: Atom) -> bool {
        debug_assert!(fact.is_ground(), "non-ground fact {fact}");
        if self.facts.contains(&fact) {
            return false;
        }
        let idx = self.facts.len();
        self.by_rel.entry(fact.rel.clone()).or_default().push(idx);
        for (p, t) in fact.args.iter().enumerate() {
            self.by_pos.entry((fact.rel.clone(), p, t.clone())).or_default().push(idx);
        }
        self.facts.insert(fact);
        true
    }

    pub fn extend(&mut self, facts: impl IntoIterator<Item = Atom>) {
        for f in facts {
            self.insert(f);
        }
    }

    pub fn contains(&self, fact: &Atom) -> bool {
        self.facts.contains(fact)
    }
    pub fn len(&self) -> usize {
        self.facts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }
    pub fn get(&self, idx: usize) -> Option<&Atom> {
        self.facts.get_index(idx)
    }
    pub fn index_of(&self, fact: &Atom) -> Option<usize> {
        self.facts.get_index_of(fact)
    }

    /// Facts of one relation, in insertion order.
    pub fn facts_of<'a>(&'a self, rel: &str) -> impl Iterator<Item = &'a Atom> + 'a {
        self.by_rel.get(rel).map(|v| v.as_slice()).unwrap_or(&[]).iter().map(move |&i| &self.facts[i])
    }

    fn rel_indices(&self, rel: &str) -> &[usize] {
        self.by_rel.get(rel).map(|v| v.as_slice()).unwrap_or(&[])
    }

    fn pos_indices(&self, rel: &Sym, pos: usize, t: &Term) -> &[usize] {
        // The key has to be owned for lookup; cloning two Arcs is cheap.
        self.by_pos.get(&(rel.clone(), pos, t.clone())).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Active domain in order of first appearance.
    pub fn adom(&self) -> IndexSet<Term> {
        let mut out = IndexSet::new();
        for f in &self.facts {
            for t in &f.args {
                out.insert(t.clone());
            }
        }
        out
    }

    pub fn relations(&self) -> BTreeSet<Sym> {
        self.by_rel.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k.clone()).collect()
    }

    pub fn max_null_id(&self) -> u64 {
        self.facts.iter().flat_map(|f| f.args.iter()).filter_map(Term::null_id).max().unwrap_or(0)
    }

    /// Rebuild with every term replaced through `f` (duplicates collapse).
    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Instance {
        Instance::from_facts(self.facts.iter().map(|a| a.map_terms(&mut f)))
    }

    /// Keep only the facts satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Atom) -> bool) -> Instance {
        Instance::from_facts(self.facts.iter().filter(|a| keep(a)).cloned())
    }

    pub fn is_subset_of(&self, other: &Instance) -> bool {
        self.facts.iter().all(|f| other.contains(f))
    }

    /// Facts sorted for stable printing.
    pub fn sorted(&self) -> Vec<Atom> {
        let mut v: Vec<Atom> = self.facts.iter().cloned().collect();
        v.sort();
        v
    }

    /// Read the instance back as a Boolean query: nulls become variables.
    pub fn to_cq(&self) -> Cq {
        Cq::boolean(
            self.facts
                .iter()
                .map(|a| {
                    a.map_terms(|t| match t {
                        Term::Null(n) => Term::Var(sym(format!("{}{}", n.tag, n.id))),
                        other => other.clone(),
                    })
                })
                .collect(),
        )
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", fmt_atoms(&self.sorted()))
    }
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<String> = self.sorted().iter().map(|a| a.to_string()).collect();
        v.serialize(s)
    }
}

/// One fact per query atom; variables become nulls tagged with their names.
pub fn canonical_database(q: &Cq) -> Instance {
    canonical_database_with(q, &mut NullGen::default()).0
}

/// As [`canonical_database`], drawing nulls from `gen`; also returns the
/// variable-to-null map.
pub fn canonical_database_with(q: &Cq, gen: &mut NullGen) -> (Instance, HashMap<Sym, Term>) {
    let mut map: HashMap<Sym, Term> = HashMap::new();
    for v in q.vars() {
        let n = gen.fresh(&v);
        map.insert(v, n);
    }
    let inst = Instance::from_facts(q.atoms.iter().map(|a| {
        a.map_terms(|t| match t {
            Term::Var(v) => map[v].clone(),
            other => other.clone(),
        })
    }));
    (inst, map)
}

/// Checked variant of [`canonical_database`].
pub fn canonical_database_checked(q: &Cq, sig: &Signature) -> Result<Instance> {
    q.check(sig)?;
    Ok(canonical_database(q))
}

// ---------------------------------------------------------------------------
// Homomorphism search
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PTerm {
    Var(usize),
    Fixed(Term),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PAtom {
    pub rel: Sym,
    pub args: Vec<PTerm>,
}

/// A list of atoms compiled for matching: variables are numbered in order of
/// first occurrence, everything else must match literally.
#[derive(Clone, Debug)]
pub struct Pattern {
    pub atoms: Vec<PAtom>,
    pub vars: Vec<Sym>,
}

pub type Binding = Vec<Option<Term>>;

impl Pattern {
    pub fn new(atoms: &[Atom]) -> Pattern {
        Self::with_vars(atoms, Vec::new())
    }

    /// Compile `atoms`, numbering the variables of `prefix` first. This lets a
    /// TGD head share variable numbers with its body.
    pub fn with_vars(atoms: &[Atom], prefix: Vec<Sym>) -> Pattern {
        let mut vars = prefix;
        let mut index: HashMap<Sym, usize> = vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let patoms = atoms
            .iter()
            .map(|a| PAtom {
                rel: a.rel.clone(),
                args: a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => {
                            let i = *index.entry(v.clone()).or_insert_with(|| {
                                vars.push(v.clone());
                                vars.len() - 1
                            });
                            PTerm::Var(i)
                        }
                        other => PTerm::Fixed(other.clone()),
                    })
                    .collect(),
            })
            .collect();
        Pattern { atoms: patoms, vars }
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }
    pub fn empty_binding(&self) -> Binding {
        vec![None; self.vars.len()]
    }
    pub fn var_index(&self, v: &str) -> Option<usize> {
        self.vars.iter().position(|x| &**x == v)
    }

    pub fn instantiate(&self, atom: usize, b: &Binding) -> Atom {
        let pa = &self.atoms[atom];
        Atom {
            rel: pa.rel.clone(),
            args: pa
                .args
                .iter()
                .map(|t| match t {
                    PTerm::Var(i) => b[*i].clone().expect("unbound variable in instantiate"),
                    PTerm::Fixed(t) => t.clone(),
                })
                .collect(),
        }
    }

    pub fn binding_map(&self, b: &Binding) -> HashMap<Sym, Term> {
        self.vars.iter().zip(b.iter()).filter_map(|(v, t)| t.clone().map(|t| (v.clone(), t))).collect()
    }

    /// Enumerate all extensions of `binding` mapping every atom into `inst`.
    /// `windows[i]`, when present, restricts atom `i` to facts whose index
    /// lies in the given range (used for semi-naive evaluation).
    pub fn for_each_match(
        &self,
        inst: &Instance,
        binding: &mut Binding,
        windows: Option<&[Range<usize>]>,
        f: &mut dyn FnMut(&Binding) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        self.search(0, inst, binding, windows, f)
    }

    fn search(
        &self,
        i: usize,
        inst: &Instance,
        b: &mut Binding,
        windows: Option<&[Range<usize>]>,
        f: &mut dyn FnMut(&Binding) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if i == self.atoms.len() {
            return f(b);
        }
        let pa = &self.atoms[i];
        // Candidate facts: use the first position whose value is already known.
        let mut cands: &[usize] = inst.rel_indices(&pa.rel);
        for (p, t) in pa.args.iter().enumerate() {
            let known = match t {
                PTerm::Fixed(t) => Some(t),
                PTerm::Var(v) => b[*v].as_ref(),
            };
            if let Some(t) = known {
                cands = inst.pos_indices(&pa.rel, p, t);
                break;
            }
        }
        let window = windows.map(|w| w[i].clone());
        let mut newly: Vec<usize> = Vec::with_capacity(pa.args.len());
        for &ci in cands {
            if let Some(w) = &window {
                if !w.contains(&ci) {
                    continue;
                }
            }
            let fact = &inst.facts[ci];
            if fact.args.len() != pa.args.len() {
                continue;
            }
            newly.clear();
            let mut ok = true;
            for (t, val) in pa.args.iter().zip(fact.args.iter()) {
                match t {
                    PTerm::Fixed(c) => {
                        if c != val {
                            ok = false;
                            break;
                        }
                    }
                    PTerm::Var(v) => match &b[*v] {
                        Some(bound) => {
                            if bound != val {
                                ok = false;
                                break;
                            }
                        }
                        None => {
                            b[*v] = Some(val.clone());
                            newly.push(*v);
                        }
                    },
                }
            }
            if ok {
                let flow = self.search(i + 1, inst, b, windows, f);
                if flow.is_break() {
                    for &v in &newly {
                        b[v] = None;
                    }
                    return flow;
                }
            }
            for &v in &newly {
                b[v] = None;
            }
        }
        ControlFlow::Continue(())
    }

    /// First match extending `binding`, if any.
    pub fn find(&self, inst: &Instance, binding: &Binding) -> Option<Binding> {
        let mut b = binding.clone();
        let mut found = None;
        let _ = self.for_each_match(inst, &mut b, None, &mut |m| {
            found = Some(m.clone());
            ControlFlow::Break(())
        });
        found
    }

    /// Is there a match that uses at least one fact with index `>= from`?
    pub fn find_touching(&self, inst: &Instance, from: usize) -> Option<Binding> {
        let n = self.atoms.len();
        let len = inst.len();
        if from >= len {
            return None;
        }
        for i in 0..n {
            let windows: Vec<Range<usize>> = (0..n)
                .map(|j| match j.cmp(&i) {
                    Ordering::Less => 0..from,
                    Ordering::Equal => from..len,
                    Ordering::Greater => 0..len,
                })
                .collect();
            let mut b = self.empty_binding();
            let mut found = None;
            let _ = self.for_each_match(inst, &mut b, Some(&windows), &mut |m| {
                found = Some(m.clone());
                ControlFlow::Break(())
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// A homomorphism from the query into the instance, identity on constants.
pub fn find_homomorphism(q: &Cq, inst: &Instance) -> Option<HashMap<Sym, Term>> {
    let pat = Pattern::new(&q.atoms);
    pat.find(inst, &pat.empty_binding()).map(|b| pat.binding_map(&b))
}

pub fn evaluate_boolean(q: &Cq, inst: &Instance) -> bool {
    find_homomorphism(q, inst).is_some()
}

/// Image of the query under a homomorphism (the matched facts).
pub fn match_image(q: &Cq, h: &HashMap<Sym, Term>) -> Vec<Atom> {
    q.atoms
        .iter()
        .map(|a| {
            a.map_terms(|t| match t {
                Term::Var(v) => h[v].clone(),
                other => other.clone(),
            })
        })
        .collect()
}

/// Is there a homomorphism from `a` to `b` that fixes constants (nulls of `a`
/// may map anywhere)? Restricted to the relations accepted by `keep`.
pub fn instance_maps_into(a: &Instance, b: &Instance, keep: impl Fn(&str) -> bool) -> bool {
    let sub = a.filter(|f| keep(&f.rel));
    evaluate_boolean(&sub.to_cq(), b)
}
