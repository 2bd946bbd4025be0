//! Type-based closure of IDs plus full guarded TGDs over a side signature.
//!
//! A *type* is a guard atom up to renaming (its equality pattern) together
//! with the side facts that hold over its values. For every type `T` the
//! engine computes `D(T)`: the atoms over `T`'s values that the constraints
//! derive from `T` alone, including atoms that come back from the subtrees
//! the IDs grow below it. Each pair `(T, A ∈ D(T))` is a derived full
//! guarded TGD (`T → A`); their collection is the closure that the linear
//! rules of [`super::theta`] instantiate.
//!
//! `D` is the least fixpoint of
//!
//! * full rules applied inside the local instance of a type, and
//! * for every non-side atom `G` and every non-full ID applicable to `G`:
//!   the child type `T_c` of the generated atom, with the atoms of `D(T_c)`
//!   over exported values copied back.
//!
//! Types are registered on demand and the fixpoint is computed by plain
//! iteration; the number of types is finite because child types only carry
//! the exported values of an ID.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::ControlFlow;

use indexmap::IndexMap;
use serde::Serialize;

use crate::chase::{unify_one, CompiledTgd};
use crate::constraints::Tgd;
use crate::error::{Error, Result};
use crate::model::{sym, Atom, Instance, PTerm, Sym, Term};

/// An atom over the local values `0..n` of a type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LAtom {
    pub rel: Sym,
    pub args: Vec<usize>,
}

impl LAtom {
    pub fn to_atom(&self) -> Atom {
        Atom { rel: self.rel.clone(), args: self.args.iter().map(|&i| local_var(i)).collect() }
    }
}

impl fmt::Display for LAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a: Vec<String> = self.args.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{}({})", self.rel, a.join(","))
    }
}

pub(crate) fn local_var(i: usize) -> Term {
    Term::var(format!("x{}", i + 1))
}

fn local_null(i: usize) -> Term {
    Term::null(i as u64 + 1, "v")
}

fn null_index(t: &Term) -> Option<usize> {
    t.null_id().map(|id| id as usize - 1)
}

/// A guard atom up to renaming plus the side facts over its values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeKey {
    pub rel: Sym,
    /// Value index per position, numbered by first occurrence.
    pub pattern: Vec<usize>,
    pub side: BTreeSet<LAtom>,
}

impl TypeKey {
    pub fn nvals(&self) -> usize {
        self.pattern.iter().max().map_or(0, |m| m + 1)
    }

    /// Positions that are repeated or carry a side fact; the type is
    /// suitable for breadth `b` when there are at most `b` of them.
    pub fn interface(&self) -> BTreeSet<usize> {
        let side_vals: BTreeSet<usize> = self.side.iter().flat_map(|a| a.args.iter().copied()).collect();
        (0..self.pattern.len())
            .filter(|&p| {
                let v = self.pattern[p];
                side_vals.contains(&v) || self.pattern.iter().filter(|&&u| u == v).count() > 1
            })
            .collect()
    }

    pub fn breadth(&self) -> usize {
        self.interface().len()
    }

    /// `R{1,2,1|accessible(2)}`: pattern, then side facts.
    pub fn annotated_name(&self) -> Sym {
        let pat: Vec<String> = self.pattern.iter().map(|i| (i + 1).to_string()).collect();
        let side: Vec<String> = self.side.iter().map(|a| a.to_string()).collect();
        sym(format!("{}{{{}|{}}}", self.rel, pat.join(","), side.join(",")))
    }

    /// The guard atom over variables `x1..`.
    pub fn guard_atom(&self) -> Atom {
        Atom { rel: self.rel.clone(), args: self.pattern.iter().map(|&i| local_var(i)).collect() }
    }

    /// Guard plus side facts, values as nulls `1..=n`.
    pub fn local_instance(&self) -> Instance {
        let mut inst = Instance::new();
        inst.insert(Atom { rel: self.rel.clone(), args: self.pattern.iter().map(|&i| local_null(i)).collect() });
        for a in &self.side {
            inst.insert(Atom { rel: a.rel.clone(), args: a.args.iter().map(|&i| local_null(i)).collect() });
        }
        inst
    }

    /// Type of `atom` inside `inst`, with the value of each local index.
    pub fn of(atom: &Atom, inst: &Instance, side: &BTreeSet<Sym>) -> (TypeKey, Vec<Term>) {
        let mut vals: Vec<Term> = Vec::new();
        let pattern = atom
            .args
            .iter()
            .map(|t| match vals.iter().position(|v| v == t) {
                Some(i) => i,
                None => {
                    vals.push(t.clone());
                    vals.len() - 1
                }
            })
            .collect();
        let side = side_facts_over(inst, side, &|t| vals.iter().position(|v| v == t));
        (TypeKey { rel: atom.rel.clone(), pattern, side }, vals)
    }
}

impl fmt::Display for TypeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.annotated_name())
    }
}

fn side_facts_over(inst: &Instance, side: &BTreeSet<Sym>, index: &dyn Fn(&Term) -> Option<usize>) -> BTreeSet<LAtom> {
    let mut out = BTreeSet::new();
    for s in side {
        for f in inst.facts_of(s) {
            if let Some(args) = f.args.iter().map(index).collect::<Option<Vec<usize>>>() {
                out.insert(LAtom { rel: s.clone(), args });
            }
        }
    }
    out
}

/// A derived full GTGD: the type as body, one atom as head.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SuitableGtgd {
    pub body: TypeKey,
    pub head: LAtom,
}

impl SuitableGtgd {
    pub fn to_tgd(&self) -> Tgd {
        let mut body: Vec<Atom> = self.body.side.iter().map(LAtom::to_atom).collect();
        body.push(self.body.guard_atom());
        Tgd::new(format!("clo:{}", self.body.annotated_name()), body, vec![self.head.to_atom()])
    }
}

impl fmt::Display for SuitableGtgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.to_tgd();
        write!(f, "{} -> {}", crate::model::fmt_atoms(&t.body), t.head[0])
    }
}

/// Rules split into non-full IDs and single-headed full guarded TGDs.
#[derive(Clone, Debug, Default)]
pub struct Normalized {
    pub ids: Vec<Tgd>,
    pub fulls: Vec<Tgd>,
}

impl Normalized {
    pub fn max_width(&self) -> usize {
        self.ids.iter().map(Tgd::width).max().unwrap_or(0)
    }
}

/// Split guarded TGDs into non-full IDs and single-headed full GTGDs:
///
/// * a non-full rule `β → ∃z̄ ψ` with frontier `x̄` becomes `β → G(x̄)`,
///   `G(x̄) → ∃z̄ H(x̄,z̄)` and `H(x̄,z̄) → A` for every `A ∈ ψ`;
/// * a full rule with several head atoms becomes `β → H(x̄)` and `H(x̄) → A`.
///
/// Non-full IDs pass through unchanged. `G` and `H` are fresh relations named
/// `_g<i>` and `_h<i>` after the rule's index.
pub fn normalize_gtgds(rules: &[Tgd]) -> Result<Normalized> {
    let mut out = Normalized::default();
    for (i, r) in rules.iter().enumerate() {
        if r.has_constants() {
            return Err(Error::NotGuarded(format!("{} mentions constants", r.name)));
        }
        if r.is_id() && !r.is_full() {
            out.ids.push(r.clone());
            continue;
        }
        if !r.is_guarded() {
            return Err(Error::NotGuarded(r.name.clone()));
        }
        let frontier: Vec<Term> = r.frontier().into_iter().map(Term::Var).collect();
        let project = |h: &Sym, args: Vec<Term>| -> Vec<Tgd> {
            r.head
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    Tgd::new(
                        format!("{}#{}", r.name, k + 1),
                        vec![Atom { rel: h.clone(), args: args.clone() }],
                        vec![a.clone()],
                    )
                })
                .collect()
        };
        if r.is_full() {
            if r.head.len() == 1 {
                out.fulls.push(r.clone());
            } else {
                let h = sym(format!("_h{i}"));
                out.fulls.push(Tgd::new(
                    format!("{}#h", r.name),
                    r.body.clone(),
                    vec![Atom { rel: h.clone(), args: frontier.clone() }],
                ));
                out.fulls.extend(project(&h, frontier));
            }
            continue;
        }
        let g = sym(format!("_g{i}"));
        let h = sym(format!("_h{i}"));
        let mut hargs = frontier.clone();
        hargs.extend(r.existentials().into_iter().map(Term::Var));
        out.fulls.push(Tgd::new(
            format!("{}#g", r.name),
            r.body.clone(),
            vec![Atom { rel: g.clone(), args: frontier.clone() }],
        ));
        out.ids.push(Tgd::new(
            format!("{}#id", r.name),
            vec![Atom { rel: g, args: frontier }],
            vec![Atom { rel: h.clone(), args: hargs.clone() }],
        ));
        out.fulls.extend(project(&h, hargs));
    }
    Ok(out)
}

/// The child an ID creates from a parent atom.
#[derive(Clone, Debug)]
pub(crate) struct Child {
    pub id: usize,
    pub key: TypeKey,
    /// Parent value for each child local index; `None` for fresh values.
    pub values: Vec<Option<Term>>,
}

pub struct ClosureEngine {
    side: BTreeSet<Sym>,
    ids: Vec<(Tgd, CompiledTgd)>,
    fulls: Vec<CompiledTgd>,
    ids_by_rel: HashMap<Sym, Vec<usize>>,
    types: IndexMap<TypeKey, BTreeSet<LAtom>>,
    max_types: usize,
}

impl ClosureEngine {
    pub fn new(norm: &Normalized, side: BTreeSet<Sym>) -> Result<Self> {
        for t in &norm.fulls {
            if !t.is_full() || t.head.len() != 1 {
                return Err(Error::Strategy(format!("{} is not a single-headed full rule", t.name)));
            }
            // A side atom may cover every body variable too (`accessible(x) ∧
            // R(x)`), so the guard is looked for among the other atoms.
            let bv = t.body_vars();
            let mut others = t.body.iter().filter(|a| !side.contains(&a.rel));
            let guarded = match (others.next(), others.next()) {
                (Some(g), None) => bv.iter().all(|v| g.vars().contains(v)),
                (None, _) => t.is_guarded(),
                _ => false,
            };
            if !guarded {
                return Err(Error::NotGuarded(format!("{}: non-guard body atoms must be side atoms", t.name)));
            }
        }
        let mut ids_by_rel: HashMap<Sym, Vec<usize>> = HashMap::new();
        for (k, t) in norm.ids.iter().enumerate() {
            if !t.is_id() || t.is_full() || side.contains(&t.body[0].rel) {
                return Err(Error::Strategy(format!("{} is not a non-full ID over a non-side relation", t.name)));
            }
            ids_by_rel.entry(t.body[0].rel.clone()).or_default().push(k);
        }
        Ok(ClosureEngine {
            side,
            ids: norm.ids.iter().map(|t| (t.clone(), CompiledTgd::new(t))).collect(),
            fulls: norm.fulls.iter().map(CompiledTgd::new).collect(),
            ids_by_rel,
            types: IndexMap::new(),
            max_types: 200_000,
        })
    }

    pub fn side(&self) -> &BTreeSet<Sym> {
        &self.side
    }

    pub fn id_rules(&self) -> impl Iterator<Item = &Tgd> {
        self.ids.iter().map(|(t, _)| t)
    }

    pub fn types(&self) -> impl Iterator<Item = (&TypeKey, &BTreeSet<LAtom>)> {
        self.types.iter()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn derived(&self, key: &TypeKey) -> Option<&BTreeSet<LAtom>> {
        self.types.get(key)
    }

    /// Register a type (with an empty `D`) if it is new. Returns whether it was.
    pub fn register(&mut self, key: TypeKey) -> bool {
        if self.types.contains_key(&key) {
            return false;
        }
        self.types.insert(key, BTreeSet::new());
        true
    }

    /// Children created by the IDs applicable to `g`, a fact of `inst`.
    pub(crate) fn children(&self, g: &Atom, inst: &Instance) -> Vec<Child> {
        let mut out = Vec::new();
        let Some(ks) = self.ids_by_rel.get(&g.rel) else { return out };
        for &k in ks {
            let (_, c) = &self.ids[k];
            let Some(b) = unify_one(&c.body, g) else { continue };
            let head = &c.head.atoms[0];
            // Child local index per head variable, by first occurrence.
            let mut slot: Vec<usize> = Vec::new();
            let mut values: Vec<Option<Term>> = Vec::new();
            let pattern: Vec<usize> = head
                .args
                .iter()
                .map(|t| {
                    let PTerm::Var(v) = t else { unreachable!("IDs have no constants") };
                    match slot.iter().position(|s| s == v) {
                        Some(i) => i,
                        None => {
                            slot.push(*v);
                            values.push(if *v < c.n_body_vars { b[*v].clone() } else { None });
                            values.len() - 1
                        }
                    }
                })
                .collect();
            let index = |t: &Term| values.iter().position(|v| v.as_ref() == Some(t));
            let side = side_facts_over(inst, &self.side, &index);
            out.push(Child { id: k, key: TypeKey { rel: head.rel.clone(), pattern, side }, values });
        }
        out
    }

    /// Close `inst` under the full rules and the `D` of the child types of
    /// its atoms. Sets `fresh` when a child type had to be registered.
    pub fn local_closure(&mut self, inst: &Instance, fresh: &mut bool) -> Instance {
        let mut inst = inst.clone();
        loop {
            let before = inst.len();
            let mut add = Vec::new();
            for r in &self.fulls {
                let mut b = r.body.empty_binding();
                let _ = r.body.for_each_match(&inst, &mut b, None, &mut |m| {
                    add.push(r.head.instantiate(0, m));
                    ControlFlow::Continue(())
                });
            }
            inst.extend(add);
            let parents: Vec<Atom> = inst.iter().filter(|a| !self.side.contains(&a.rel)).cloned().collect();
            let mut add = Vec::new();
            for g in &parents {
                for child in self.children(g, &inst) {
                    match self.types.get(&child.key) {
                        None => {
                            *fresh |= self.register(child.key);
                        }
                        Some(d) => {
                            for a in d {
                                let args: Option<Vec<Term>> = a.args.iter().map(|&i| child.values[i].clone()).collect();
                                if let Some(args) = args {
                                    add.push(Atom { rel: a.rel.clone(), args });
                                }
                            }
                        }
                    }
                }
            }
            inst.extend(add);
            if inst.len() == before {
                return inst;
            }
        }
    }

    /// Local instance of a type closed with the current `D`s: guard, side
    /// facts and derived atoms, values as nulls.
    pub fn closed_local(&self, key: &TypeKey) -> Instance {
        let mut inst = key.local_instance();
        if let Some(d) = self.types.get(key) {
            inst.extend(
                d.iter().map(|a| Atom { rel: a.rel.clone(), args: a.args.iter().map(|&i| local_null(i)).collect() }),
            );
        }
        inst
    }

    /// Iterate every registered type to the global fixpoint.
    pub fn solve(&mut self) -> Result<()> {
        loop {
            let mut changed = false;
            let mut i = 0;
            while i < self.types.len() {
                let key = self.types.get_index(i).expect("in range").0.clone();
                let local = key.local_instance();
                let out = self.local_closure(&local, &mut changed);
                let d: BTreeSet<LAtom> = out
                    .iter()
                    .filter(|a| !local.contains(a))
                    .map(|a| LAtom {
                        rel: a.rel.clone(),
                        args: a.args.iter().map(|t| null_index(t).expect("local values are nulls")).collect(),
                    })
                    .collect();
                if self.types[i] != d {
                    self.types[i] = d;
                    changed = true;
                }
                if self.types.len() > self.max_types {
                    return Err(Error::Strategy(format!("more than {} types in the closure", self.max_types)));
                }
                i += 1;
            }
            if !changed {
                return Ok(());
            }
        }
    }

    /// Close an arbitrary instance (e.g. a canonical database): the result
    /// contains every atom over its values that the constraints derive. The
    /// types of its non-side atoms are registered and solved as well.
    pub fn close_root(&mut self, root: &Instance) -> Result<Instance> {
        loop {
            self.solve()?;
            let mut fresh = false;
            let out = self.local_closure(root, &mut fresh);
            if fresh {
                continue;
            }
            let mut registered = false;
            let keys: Vec<TypeKey> = out
                .iter()
                .filter(|a| !self.side.contains(&a.rel))
                .map(|a| TypeKey::of(a, &out, &self.side).0)
                .collect();
            for key in keys {
                registered |= self.register(key);
            }
            if !registered {
                return Ok(out);
            }
        }
    }
}

/// All derived full GTGDs of the registered types (after [`ClosureEngine::solve`]).
pub fn b_closure(engine: &ClosureEngine) -> Vec<SuitableGtgd> {
    engine.types().flat_map(|(k, d)| d.iter().map(move |a| SuitableGtgd { body: k.clone(), head: a.clone() })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::restricted_chase;
    use crate::constraints::ConstraintSet;
    use crate::model::Instance;

    fn v(s: &str) -> Term {
        Term::var(s)
    }
    fn a(rel: &str, vs: &[&str]) -> Atom {
        Atom::new(rel, vs.iter().map(|x| v(x)).collect())
    }
    fn side() -> BTreeSet<Sym> {
        [sym("accessible")].into()
    }

    #[test]
    fn normalize_passes_ids_and_splits_others() {
        let id = Tgd::new("i", vec![a("R", &["x", "y"])], vec![a("S", &["y", "z"])]);
        let n = normalize_gtgds(std::slice::from_ref(&id)).unwrap();
        assert_eq!(n.ids, vec![id]);
        assert!(n.fulls.is_empty());

        let rb = Tgd::new(
            "ax",
            vec![a("accessible", &["x"]), a("R", &["x", "y"])],
            vec![a("R", &["x", "z"]), a("R'", &["x", "z"]), a("accessible", &["z"])],
        );
        let n = normalize_gtgds(&[rb]).unwrap();
        assert_eq!(n.ids.len(), 1);
        assert_eq!(n.fulls.len(), 1 + 3);

        let multi = Tgd::new("m", vec![a("R", &["x", "y"])], vec![a("S", &["x"]), a("T", &["y"])]);
        let n = normalize_gtgds(&[multi]).unwrap();
        assert_eq!(n.fulls.len(), 3);
        assert!(n.ids.is_empty());

        let unguarded = Tgd::new("u", vec![a("R", &["x"]), a("S", &["y"])], vec![a("T", &["x", "y", "z"])]);
        assert!(normalize_gtgds(&[unguarded]).is_err());
    }

    #[test]
    fn normalization_preserves_consequences() {
        let rb = Tgd::new(
            "ax",
            vec![a("accessible", &["x"]), a("R", &["x", "y"])],
            vec![a("R", &["x", "z"]), a("R'", &["x", "z"]), a("accessible", &["z"])],
        );
        let seed = Instance::from_facts([
            Atom::new("R", vec![Term::constant("a"), Term::constant("b")]),
            Atom::new("accessible", vec![Term::constant("a")]),
        ]);
        let orig = restricted_chase(&seed, &ConstraintSet::new(vec![rb.clone()], vec![]), 10);
        let n = normalize_gtgds(&[rb]).unwrap();
        let mut all = n.ids.clone();
        all.extend(n.fulls.clone());
        let norm = restricted_chase(&seed, &ConstraintSet::new(all, vec![]), 10);
        let keep = |r: &str| !r.starts_with('_');
        assert!(crate::model::instance_maps_into(orig.instance(), norm.instance(), keep));
        assert!(crate::model::instance_maps_into(norm.instance(), orig.instance(), keep));
    }

    #[test]
    fn unary_guard_is_not_mistaken_for_a_side_atom() {
        // `accessible(x)` also covers every body variable; the guard is R(x).
        let rules =
            [Tgd::new("ax", vec![a("accessible", &["x"]), a("R", &["x"])], vec![a("R'", &["x"]), a("S", &["x"])])];
        let n = normalize_gtgds(&rules).unwrap();
        let mut e = ClosureEngine::new(&n, side()).unwrap();
        let root = Instance::from_facts([
            Atom::new("R", vec![Term::constant("a")]),
            Atom::new("accessible", vec![Term::constant("a")]),
        ]);
        let closed = e.close_root(&root).unwrap();
        assert!(closed.contains(&Atom::new("R'", vec![Term::constant("a")])));

        let two = Tgd::new("two", vec![a("R", &["x"]), a("S", &["x"])], vec![a("T", &["x"])]);
        let n = normalize_gtgds(&[two]).unwrap();
        assert!(ClosureEngine::new(&n, side()).is_err());
    }

    #[test]
    fn derived_atoms_flow_back_from_children() {
        // R(x,y) -> ∃z S(y,z); S(y,z) -> T(y). The type of R(x,y) derives T(y).
        let rules = [
            Tgd::new("i", vec![a("R", &["x", "y"])], vec![a("S", &["y", "z"])]),
            Tgd::new("f", vec![a("S", &["y", "z"])], vec![a("T", &["y"])]),
        ];
        let n = normalize_gtgds(&rules).unwrap();
        let mut e = ClosureEngine::new(&n, side()).unwrap();
        let root = Instance::from_facts([Atom::new("R", vec![Term::constant("a"), Term::constant("b")])]);
        let closed = e.close_root(&root).unwrap();
        assert!(closed.contains(&Atom::new("T", vec![Term::constant("b")])));
        assert!(!closed.contains(&Atom::new("T", vec![Term::constant("a")])));
        let clo = b_closure(&e);
        assert!(clo.iter().any(|g| g.to_string() == "R(x1,x2) -> T(x2)"));
    }

    #[test]
    fn side_facts_travel_down_and_up() {
        // An accessible value travels into the S-child, which makes its fresh
        // value accessible, which in turn derives Done(y) over the interface.
        let rules = [
            Tgd::new("i1", vec![a("R", &["x", "y"])], vec![a("S", &["y", "z"])]),
            Tgd::new("f1", vec![a("accessible", &["y"]), a("S", &["y", "z"])], vec![a("accessible", &["z"])]),
            Tgd::new("f2", vec![a("accessible", &["z"]), a("S", &["y", "z"])], vec![a("Done", &["y"])]),
        ];
        let n = normalize_gtgds(&rules).unwrap();
        let mut e = ClosureEngine::new(&n, side()).unwrap();
        let root = Instance::from_facts([
            Atom::new("R", vec![Term::constant("a"), Term::constant("b")]),
            Atom::new("accessible", vec![Term::constant("b")]),
        ]);
        let closed = e.close_root(&root).unwrap();
        assert!(closed.contains(&Atom::new("Done", vec![Term::constant("b")])));
        let root2 = Instance::from_facts([Atom::new("R", vec![Term::constant("a"), Term::constant("b")])]);
        let closed2 = e.close_root(&root2).unwrap();
        assert!(!closed2.contains(&Atom::new("Done", vec![Term::constant("b")])));
    }

    #[test]
    fn type_keys() {
        let inst = Instance::from_facts([
            Atom::new("R", vec![Term::constant("a"), Term::constant("b"), Term::constant("a")]),
            Atom::new("accessible", vec![Term::constant("b")]),
            Atom::new("accessible", vec![Term::constant("c")]),
        ]);
        let f = inst.facts_of("R").next().unwrap().clone();
        let (k, vals) = TypeKey::of(&f, &inst, &side());
        assert_eq!(k.pattern, vec![0, 1, 0]);
        assert_eq!(vals.len(), 2);
        assert_eq!(k.interface(), [0, 1, 2].into());
        assert_eq!(&*k.annotated_name(), "R{1,2,1|accessible(2)}");
    }
}
