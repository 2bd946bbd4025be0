//! Brute-force semantic oracles for the test suites.
//!
//! [`search_counterexample`] looks for a witness that a query is *not*
//! access-monotonically determined: instances `I1 ⊨ Σ ∧ Q` and `I2 ⊨ Σ ∧ ¬Q`
//! sharing a subinstance `Iacc` that is access-valid in `I1`. The search is
//! exhaustive only within its budgets (domain size, decoy facts, search
//! nodes), so "no certificate" is never a proof of answerability.
//!
//! [`entails_dependency`] checks `Σ ⊨ τ` by chasing the body of `τ`
//! instantiated with fresh constants.
//!
//! Both work on their own compact representation (small integer values,
//! facts in ordered sets) and share no matching code with the chase, so they
//! are an independent check of it.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::chase::{count_violations, restricted_chase, ChaseOutcome};
use crate::constraints::{ConstraintSet, Tgd};
use crate::error::{Error, Result};
use crate::model::{evaluate_boolean, Atom, Cq, Instance, Sym, Term};
use crate::schema::{Bound, Schema};

/// Largest domain the counterexample search accepts.
pub const MAX_DOMAIN: usize = 5;

// ---------------------------------------------------------------------------
// Public types
// ---------------------------------------------------------------------------

/// One access of the accessible part: the method, its binding and the output
/// chosen for it (valid in `I1`, contained in `Iacc`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AccessRecord {
    pub method: String,
    pub binding: Vec<Term>,
    pub output: Vec<Atom>,
}

/// A finite witness of non-answerability.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CounterexampleCertificate {
    /// Distinct values used by `I1` and `I2` together.
    pub domain: usize,
    pub i1: Instance,
    pub i2: Instance,
    pub iacc: Instance,
    pub accesses: Vec<AccessRecord>,
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Values per instance, at most [`MAX_DOMAIN`].
    pub max_domain: usize,
    /// Facts added to the query's image before repairing it into `I1`; only
    /// relations with a result-bounded method get decoys, since elsewhere
    /// extra facts can only enlarge the accessible part.
    pub decoys: usize,
    /// Search nodes per repair search.
    pub max_nodes: usize,
    /// The query's constants are accessible from the start.
    pub accessible_constants: bool,
}

impl OracleOptions {
    pub fn new(max_domain: usize) -> Self {
        OracleOptions { max_domain, decoys: 2, max_nodes: 20_000, accessible_constants: false }
    }
}

/// What a search covered, beside its result.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchReport {
    pub certificate: Option<CounterexampleCertificate>,
    /// Non-isomorphic `I1` candidates examined.
    pub candidates: usize,
    /// Some repair search ran out of nodes, so the search was incomplete
    /// even within the domain budget.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Entailment {
    Entailed,
    NotEntailed,
    Unknown,
}

// ---------------------------------------------------------------------------
// Compact representation
// ---------------------------------------------------------------------------

type Val = u8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Fact {
    rel: usize,
    args: Vec<Val>,
}

type Facts = BTreeSet<Fact>;

#[derive(Clone, Copy, Debug)]
enum Slot {
    Var(usize),
    Val(Val),
}

#[derive(Clone, Debug)]
struct CAtom {
    rel: usize,
    args: Vec<Slot>,
}

/// Body variables are numbered first, existentials after them.
#[derive(Clone, Debug)]
struct CRule {
    body: Vec<CAtom>,
    head: Vec<CAtom>,
    n_body_vars: usize,
    nvars: usize,
}

#[derive(Clone, Debug)]
struct CFd {
    rel: usize,
    lhs: Vec<usize>,
    rhs: usize,
}

#[derive(Clone, Debug)]
struct CMethod {
    name: String,
    rel: usize,
    inputs: Vec<usize>,
    bound: Option<usize>,
}

#[derive(Clone, Debug)]
struct CAccess {
    method: usize,
    binding: Vec<Val>,
    output: Vec<Fact>,
}

struct Ctx {
    rels: Vec<(Sym, usize)>,
    rules: Vec<CRule>,
    fds: Vec<CFd>,
    query: Vec<CAtom>,
    q_vars: usize,
    /// Values `0..consts.len()` are the query's constants.
    consts: Vec<Sym>,
    methods: Vec<CMethod>,
    max_domain: usize,
    decoys: usize,
    max_nodes: usize,
    seeds: BTreeSet<Val>,
    truncated: AtomicBool,
}

fn compile_atoms(
    atoms: &[Atom],
    rel_ix: &HashMap<Sym, usize>,
    vars: &mut Vec<Sym>,
    consts: &[Sym],
) -> Result<Vec<CAtom>> {
    atoms
        .iter()
        .map(|a| {
            let rel = *rel_ix.get(&a.rel).ok_or_else(|| Error::Validation(format!("unknown relation {}", a.rel)))?;
            let args = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Ok(Slot::Var(match vars.iter().position(|w| w == v) {
                        Some(i) => i,
                        None => {
                            vars.push(v.clone());
                            vars.len() - 1
                        }
                    })),
                    Term::Const(c) => consts
                        .iter()
                        .position(|d| d == c)
                        .map(|i| Slot::Val(i as Val))
                        .ok_or_else(|| Error::Validation(format!("constant {c} outside the query"))),
                    Term::Null(_) => Err(Error::Validation("nulls are not allowed here".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CAtom { rel, args })
        })
        .collect()
}

impl Ctx {
    fn new(sch: &Schema, q: &Cq, opts: &OracleOptions) -> Result<Ctx> {
        let rels: Vec<(Sym, usize)> = sch.signature.relations().map(|(n, i)| (n.clone(), i.arity)).collect();
        let rel_ix: HashMap<Sym, usize> = rels.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        let consts = q.constants();
        if consts.len() > opts.max_domain {
            return Err(Error::Validation(format!(
                "the query has {} constants, more than the domain budget {}",
                consts.len(),
                opts.max_domain
            )));
        }
        let mut rules = Vec::new();
        for t in &sch.constraints.tgds {
            if t.has_constants() {
                return Err(Error::Validation(format!("constraint {} mentions constants", t.name)));
            }
            let mut vars = t.body_vars();
            let body = compile_atoms(&t.body, &rel_ix, &mut vars, &[])?;
            let n_body_vars = vars.len();
            let head = compile_atoms(&t.head, &rel_ix, &mut vars, &[])?;
            rules.push(CRule { body, head, n_body_vars, nvars: vars.len() });
        }
        let fds = sch
            .constraints
            .fds
            .iter()
            .map(|f| CFd { rel: rel_ix[&f.rel], lhs: f.lhs.iter().copied().collect(), rhs: f.rhs })
            .collect();
        let mut qv = Vec::new();
        let query = compile_atoms(&q.atoms, &rel_ix, &mut qv, &consts)?;
        let methods = sch
            .methods
            .iter()
            .map(|m| CMethod {
                name: m.name.clone(),
                rel: rel_ix[&m.relation],
                inputs: m.inputs.iter().copied().collect(),
                bound: m.bound.k().map(|k| k as usize),
            })
            .collect();
        let seeds = if opts.accessible_constants { (0..consts.len() as Val).collect() } else { BTreeSet::new() };
        Ok(Ctx {
            rels,
            rules,
            fds,
            query,
            q_vars: qv.len(),
            consts,
            methods,
            max_domain: opts.max_domain,
            decoys: opts.decoys,
            max_nodes: opts.max_nodes,
            seeds,
            truncated: AtomicBool::new(false),
        })
    }

    fn nconst(&self) -> usize {
        self.consts.len()
    }

    fn term(&self, v: Val) -> Term {
        match self.consts.get(v as usize) {
            Some(c) => Term::Const(c.clone()),
            None => Term::constant(format!("e{v}")),
        }
    }

    fn atom(&self, f: &Fact) -> Atom {
        Atom { rel: self.rels[f.rel].0.clone(), args: f.args.iter().map(|&v| self.term(v)).collect() }
    }

    fn instance(&self, facts: &Facts) -> Instance {
        Instance::from_facts(facts.iter().map(|f| self.atom(f)))
    }
}

fn rel_facts(facts: &Facts, rel: usize) -> impl Iterator<Item = &Fact> {
    facts.range(Fact { rel, args: Vec::new() }..Fact { rel: rel + 1, args: Vec::new() })
}

fn adom(facts: &Facts) -> BTreeSet<Val> {
    facts.iter().flat_map(|f| f.args.iter().copied()).collect()
}

/// Calls `f` on every extension of `b` matching `atoms[i..]`; stops and
/// returns `true` as soon as `f` does.
fn each_match(
    atoms: &[CAtom],
    i: usize,
    facts: &Facts,
    b: &mut Vec<Option<Val>>,
    f: &mut dyn FnMut(&[Option<Val>]) -> bool,
) -> bool {
    let Some(a) = atoms.get(i) else { return f(b) };
    for fact in rel_facts(facts, a.rel) {
        let mut newly = Vec::new();
        let mut ok = true;
        for (s, &v) in a.args.iter().zip(&fact.args) {
            match *s {
                Slot::Val(c) if c != v => ok = false,
                Slot::Val(_) => {}
                Slot::Var(x) => match b[x] {
                    Some(w) if w != v => ok = false,
                    Some(_) => {}
                    None => {
                        b[x] = Some(v);
                        newly.push(x);
                    }
                },
            }
            if !ok {
                break;
            }
        }
        let stop = ok && each_match(atoms, i + 1, facts, b, f);
        for x in newly {
            b[x] = None;
        }
        if stop {
            return true;
        }
    }
    false
}

fn holds(atoms: &[CAtom], facts: &Facts, b: &mut Vec<Option<Val>>) -> bool {
    each_match(atoms, 0, facts, b, &mut |_| true)
}

fn instantiate(atoms: &[CAtom], b: &[Option<Val>]) -> Vec<Fact> {
    atoms
        .iter()
        .map(|a| Fact {
            rel: a.rel,
            args: a
                .args
                .iter()
                .map(|s| match *s {
                    Slot::Val(v) => v,
                    Slot::Var(x) => b[x].expect("all variables bound"),
                })
                .collect(),
        })
        .collect()
}

impl Ctx {
    fn q_holds(&self, facts: &Facts) -> bool {
        holds(&self.query, facts, &mut vec![None; self.q_vars])
    }

    fn fds_hold(&self, facts: &Facts) -> bool {
        self.fds.iter().all(|fd| {
            let mut seen: HashMap<Vec<Val>, Val> = HashMap::new();
            rel_facts(facts, fd.rel).all(|f| {
                let key: Vec<Val> = fd.lhs.iter().map(|&p| f.args[p]).collect();
                *seen.entry(key).or_insert(f.args[fd.rhs]) == f.args[fd.rhs]
            })
        })
    }

    /// First rule with an active trigger, and the trigger.
    fn violated(&self, facts: &Facts) -> Option<(usize, Vec<Option<Val>>)> {
        for (r, rule) in self.rules.iter().enumerate() {
            let mut found = None;
            each_match(&rule.body, 0, facts, &mut vec![None; rule.nvars], &mut |b| {
                let mut hb = b.to_vec();
                if holds(&rule.head, facts, &mut hb) {
                    false
                } else {
                    found = Some(b.to_vec());
                    true
                }
            });
            if let Some(b) = found {
                return Some((r, b));
            }
        }
        None
    }

    /// Depth-first search for models of Σ containing `facts` with at most
    /// `max_domain` values: repairs one active trigger at a time, choosing
    /// each existential among the values in use or a fresh one (numbered from
    /// `fresh_from`). With `avoid_q` branches where `Q` holds are cut.
    /// Returns `true` when `emit` asked to stop.
    fn repair(
        &self,
        facts: Facts,
        avoid_q: bool,
        fresh_from: Val,
        nodes: &mut usize,
        emit: &mut dyn FnMut(&Facts) -> bool,
    ) -> bool {
        *nodes += 1;
        if *nodes > self.max_nodes {
            self.truncated.store(true, Ordering::Relaxed);
            return true;
        }
        if !self.fds_hold(&facts) || (avoid_q && self.q_holds(&facts)) {
            return false;
        }
        let Some((r, b)) = self.violated(&facts) else { return emit(&facts) };
        let rule = &self.rules[r];
        let dom = adom(&facts);
        let mut choices: Vec<Val> = dom.iter().copied().collect();
        for c in 0..self.nconst() as Val {
            if !dom.contains(&c) {
                choices.push(c);
            }
        }
        let n_ex = rule.nvars - rule.n_body_vars;
        let mut assign = b;
        self.assign_existentials(&facts, &mut assign, rule.n_body_vars, &choices, fresh_from, n_ex, &mut |ext| {
            let mut next = facts.clone();
            next.extend(instantiate(&rule.head, ext));
            if adom(&next).len() > self.max_domain {
                return false;
            }
            self.repair(next, avoid_q, fresh_from, nodes, emit)
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn assign_existentials(
        &self,
        facts: &Facts,
        b: &mut Vec<Option<Val>>,
        x: usize,
        choices: &[Val],
        fresh_from: Val,
        left: usize,
        f: &mut dyn FnMut(&[Option<Val>]) -> bool,
    ) -> bool {
        if left == 0 {
            return f(b);
        }
        for &v in choices {
            b[x] = Some(v);
            if self.assign_existentials(facts, b, x + 1, choices, fresh_from, left - 1, f) {
                return true;
            }
        }
        // A fresh value, the smallest not in use; the caller prunes
        // assignments that overflow the domain.
        let used: BTreeSet<Val> = choices.iter().copied().chain(adom(facts)).collect();
        {
            let fresh = (fresh_from..=Val::MAX).find(|v| !used.contains(v)).expect("values available");
            let mut more = choices.to_vec();
            more.push(fresh);
            b[x] = Some(fresh);
            if self.assign_existentials(facts, b, x + 1, &more, fresh_from, left - 1, f) {
                return true;
            }
        }
        b[x] = None;
        false
    }
}

// ---------------------------------------------------------------------------
// I1 candidates
// ---------------------------------------------------------------------------

/// Least renaming of the non-constant values (as a sorted fact list) over
/// all permutations.
fn canonical(facts: &Facts, nconst: usize) -> Vec<Fact> {
    let vals: Vec<Val> = adom(facts).into_iter().filter(|&v| v as usize >= nconst).collect();
    let mut best: Option<Vec<Fact>> = None;
    for perm in vals.iter().copied().permutations(vals.len()) {
        let map = |v: Val| match vals.iter().position(|&w| w == v) {
            Some(i) => perm[i],
            None => v,
        };
        let mut img: Vec<Fact> =
            facts.iter().map(|f| Fact { rel: f.rel, args: f.args.iter().map(|&v| map(v)).collect() }).collect();
        img.sort();
        if best.as_ref().map_or(true, |b| img < *b) {
            best = Some(img);
        }
    }
    best.unwrap_or_default()
}

impl Ctx {
    /// Images of the query: each variable is a constant, an earlier value,
    /// or the next fresh value.
    fn query_images(&self) -> Vec<Facts> {
        let mut out = Vec::new();
        let nc = self.nconst() as Val;
        let mut b: Vec<Option<Val>> = vec![None; self.q_vars];
        fn go(ctx: &Ctx, x: usize, next: Val, b: &mut Vec<Option<Val>>, out: &mut Vec<Facts>) {
            if x == b.len() {
                let facts: Facts = instantiate(&ctx.query, b).into_iter().collect();
                if adom(&facts).len() <= ctx.max_domain {
                    out.push(facts);
                }
                return;
            }
            for v in 0..next {
                b[x] = Some(v);
                go(ctx, x + 1, next, b, out);
            }
            b[x] = Some(next);
            go(ctx, x + 1, next + 1, b, out);
        }
        go(self, 0, nc, &mut b, &mut out);
        out
    }

    /// The query image plus up to `decoys` facts on relations with a bounded
    /// method, each over the values in use and fresh ones introduced in
    /// order.
    fn seeds_with_decoys(&self, base: &Facts) -> Vec<Facts> {
        let rels: BTreeSet<usize> = self.methods.iter().filter(|m| m.bound.is_some()).map(|m| m.rel).collect();
        let mut out = vec![base.clone()];
        let mut frontier = vec![base.clone()];
        for _ in 0..self.decoys {
            let mut next = Vec::new();
            for cur in &frontier {
                let dom = adom(cur);
                let room = self.max_domain.saturating_sub(dom.len());
                for &r in &rels {
                    let arity = self.rels[r].1;
                    let mut vals: Vec<Val> = dom.iter().copied().collect();
                    let fresh: Vec<Val> =
                        (self.nconst() as Val..).filter(|v| !dom.contains(v)).take(room.min(arity)).collect();
                    vals.extend(&fresh);
                    for args in (0..arity).map(|_| vals.iter().copied()).multi_cartesian_product() {
                        // Fresh values must appear in order of first use.
                        let mut next_fresh = 0;
                        let ordered = args.iter().all(|v| match fresh.iter().position(|f| f == v) {
                            None => true,
                            Some(i) if i < next_fresh => true,
                            Some(i) if i == next_fresh => {
                                next_fresh += 1;
                                true
                            }
                            Some(_) => false,
                        });
                        let f = Fact { rel: r, args };
                        if ordered && !cur.contains(&f) {
                            let mut n = cur.clone();
                            n.insert(f);
                            next.push(n);
                        }
                    }
                    if arity == 0 {
                        let f = Fact { rel: r, args: Vec::new() };
                        if !cur.contains(&f) {
                            let mut n = cur.clone();
                            n.insert(f);
                            next.push(n);
                        }
                    }
                }
            }
            let mut seen = HashSet::new();
            next.retain(|s| seen.insert(canonical(s, self.nconst())));
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    /// Non-isomorphic models of Σ ∧ Q reachable from the seeds.
    fn i1_candidates(&self) -> Vec<Facts> {
        let mut seeds = Vec::new();
        let mut seen_seed = HashSet::new();
        for base in self.query_images() {
            for s in self.seeds_with_decoys(&base) {
                if seen_seed.insert(canonical(&s, self.nconst())) {
                    seeds.push(s);
                }
            }
        }
        let fresh_from = self.nconst() as Val;
        let models: Vec<Vec<Facts>> = seeds
            .into_par_iter()
            .map(|s| {
                let mut found = Vec::new();
                let mut nodes = 0;
                self.repair(s, false, fresh_from, &mut nodes, &mut |m| {
                    found.push(m.clone());
                    false
                });
                found
            })
            .collect();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in models.into_iter().flatten() {
            if seen.insert(canonical(&m, self.nconst())) {
                out.push(m);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Accessible parts
// ---------------------------------------------------------------------------

impl Ctx {
    fn matches(&self, i1: &Facts, m: &CMethod, binding: &[Val]) -> Vec<Fact> {
        rel_facts(i1, m.rel).filter(|f| m.inputs.iter().zip(binding).all(|(&p, &v)| f.args[p] == v)).cloned().collect()
    }

    fn pending(&self, acc: &BTreeSet<Val>, done: &HashSet<(usize, Vec<Val>)>) -> Option<(usize, Vec<Val>)> {
        for (mi, m) in self.methods.iter().enumerate() {
            for binding in (0..m.inputs.len()).map(|_| acc.iter().copied()).multi_cartesian_product() {
                if !done.contains(&(mi, binding.clone())) {
                    return Some((mi, binding));
                }
            }
            if m.inputs.is_empty() && !done.contains(&(mi, Vec::new())) {
                return Some((mi, Vec::new()));
            }
        }
        None
    }

    /// Every accessible part of `i1`: each access over accessible values
    /// picks an output valid in `i1` (all matches, or `k` of them when there
    /// are more than `k`). Larger outputs for lower-bounded methods only make
    /// `Iacc` bigger, so they are not needed.
    fn access_parts(&self, i1: &Facts, emit: &mut dyn FnMut(&Facts, &[CAccess]) -> bool) -> bool {
        fn go(
            ctx: &Ctx,
            i1: &Facts,
            iacc: &mut Facts,
            acc: &mut BTreeSet<Val>,
            done: &mut HashSet<(usize, Vec<Val>)>,
            log: &mut Vec<CAccess>,
            emit: &mut dyn FnMut(&Facts, &[CAccess]) -> bool,
        ) -> bool {
            let Some((mi, binding)) = ctx.pending(acc, done) else { return emit(iacc, log) };
            let m = &ctx.methods[mi];
            let matches = ctx.matches(i1, m, &binding);
            let outputs: Vec<Vec<Fact>> = match m.bound {
                Some(k) if matches.len() > k => matches.iter().cloned().combinations(k).collect(),
                _ => vec![matches],
            };
            done.insert((mi, binding.clone()));
            for out in outputs {
                let (old_iacc, old_acc) = (iacc.clone(), acc.clone());
                for f in &out {
                    acc.extend(f.args.iter().copied());
                    iacc.insert(f.clone());
                }
                log.push(CAccess { method: mi, binding: binding.clone(), output: out });
                let stop = go(ctx, i1, iacc, acc, done, log, emit);
                log.pop();
                *iacc = old_iacc;
                *acc = old_acc;
                if stop {
                    done.remove(&(mi, binding));
                    return true;
                }
            }
            done.remove(&(mi, binding));
            false
        }
        let mut acc = self.seeds.clone();
        go(self, i1, &mut Facts::new(), &mut acc, &mut HashSet::new(), &mut Vec::new(), emit)
    }

    fn certificate_for(&self, i1: &Facts) -> Option<CounterexampleCertificate> {
        let mut seen: HashSet<Facts> = HashSet::new();
        let fresh_from = adom(i1).into_iter().max().map_or(self.nconst() as Val, |m| m + 1).max(self.nconst() as Val);
        let mut found = None;
        self.access_parts(i1, &mut |iacc, log| {
            if !seen.insert(iacc.clone()) || self.q_holds(iacc) {
                return false;
            }
            let mut nodes = 0;
            let mut i2 = None;
            self.repair(iacc.clone(), true, fresh_from, &mut nodes, &mut |m| {
                i2 = Some(m.clone());
                true
            });
            match i2 {
                Some(i2) => {
                    found = Some(self.certificate(i1, &i2, iacc, log));
                    true
                }
                None => false,
            }
        });
        found
    }

    fn certificate(&self, i1: &Facts, i2: &Facts, iacc: &Facts, log: &[CAccess]) -> CounterexampleCertificate {
        let domain = adom(i1).union(&adom(i2)).count();
        CounterexampleCertificate {
            domain,
            i1: self.instance(i1),
            i2: self.instance(i2),
            iacc: self.instance(iacc),
            accesses: log
                .iter()
                .map(|a| AccessRecord {
                    method: self.methods[a.method].name.clone(),
                    binding: a.binding.iter().map(|&v| self.term(v)).collect(),
                    output: a.output.iter().map(|f| self.atom(f)).collect(),
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Search for a counterexample certificate with default budgets.
pub fn search_counterexample(sch: &Schema, q: &Cq, max_domain: usize) -> Result<Option<CounterexampleCertificate>> {
    Ok(search_with(sch, q, &OracleOptions::new(max_domain))?.certificate)
}

/// Search for a counterexample certificate, reporting coverage. `I1`
/// candidates are examined in parallel; the first certificate in candidate
/// order is returned, so results are deterministic.
pub fn search_with(sch: &Schema, q: &Cq, opts: &OracleOptions) -> Result<SearchReport> {
    if opts.max_domain > MAX_DOMAIN {
        return Err(Error::Validation(format!("oracle domain {} exceeds the maximum {MAX_DOMAIN}", opts.max_domain)));
    }
    sch.validate()?;
    q.check(&sch.signature)?;
    let ctx = Ctx::new(sch, q, opts)?;
    let cands = ctx.i1_candidates();
    let certificate = cands.par_iter().find_map_first(|i1| ctx.certificate_for(i1));
    Ok(SearchReport { certificate, candidates: cands.len(), truncated: ctx.truncated.load(Ordering::Relaxed) })
}

/// Check every property a certificate claims, on the model-level instances.
pub fn verify_certificate(
    sch: &Schema,
    q: &Cq,
    cert: &CounterexampleCertificate,
    accessible_constants: bool,
) -> std::result::Result<(), String> {
    let sigma = &sch.constraints;
    if !cert.iacc.is_subset_of(&cert.i1) || !cert.iacc.is_subset_of(&cert.i2) {
        return Err("Iacc is not a common subinstance".into());
    }
    for (name, inst) in [("I1", &cert.i1), ("I2", &cert.i2)] {
        if count_violations(inst, sigma) > 0 {
            return Err(format!("{name} violates the constraints"));
        }
    }
    if !evaluate_boolean(q, &cert.i1) {
        return Err("Q does not hold in I1".into());
    }
    if evaluate_boolean(q, &cert.i2) {
        return Err("Q holds in I2".into());
    }
    let mut acc: BTreeSet<Term> = cert.iacc.adom().into_iter().collect();
    if accessible_constants {
        acc.extend(q.constants().into_iter().map(Term::Const));
    }
    for m in &sch.methods {
        for binding in (0..m.inputs.len())
            .map(|_| acc.iter().cloned())
            .multi_cartesian_product()
            .chain(m.inputs.is_empty().then(Vec::new))
        {
            let rec = cert.accesses.iter().find(|a| a.method == m.name && a.binding == binding).ok_or_else(|| {
                let b: Vec<String> = binding.iter().map(|t| t.to_string()).collect();
                format!("no output recorded for {}({})", m.name, b.join(","))
            })?;
            let matches: Vec<&Atom> = cert
                .i1
                .facts_of(&m.relation)
                .filter(|f| m.inputs.iter().zip(&binding).all(|(&p, v)| &f.args[p] == v))
                .collect();
            if rec.output.iter().any(|f| !matches.contains(&f) || !cert.iacc.contains(f)) {
                return Err(format!("output of {} is not a set of matches inside Iacc", m.name));
            }
            let n = rec.output.len();
            let valid = match m.bound {
                Bound::Unbounded => n == matches.len(),
                Bound::Upper(k) | Bound::Lower(k) if matches.len() <= k as usize => n == matches.len(),
                Bound::Upper(k) => n == k as usize,
                Bound::Lower(k) => n >= k as usize,
            };
            if !valid {
                return Err(format!("output of {} has {n} of {} matches", m.name, matches.len()));
            }
        }
    }
    Ok(())
}

/// Does `sigma` entail `rule`? The body is instantiated with fresh
/// constants and chased for at most `rounds` rounds; the rule is entailed
/// when its head (frontier fixed) matches the result, or when the chase
/// fails on an FD clash.
pub fn entails_dependency(sigma: &ConstraintSet, rule: &Tgd, rounds: usize) -> Entailment {
    let fresh = |t: &Term| match t {
        Term::Var(v) => Term::constant(format!("_b:{v}")),
        other => other.clone(),
    };
    let body = Instance::from_facts(rule.body.iter().map(|a| a.map_terms(fresh)));
    let frontier = rule.frontier();
    let head = Cq::boolean(
        rule.head
            .iter()
            .map(|a| {
                a.map_terms(|t| match t {
                    Term::Var(v) if frontier.contains(v) => fresh(t),
                    other => other.clone(),
                })
            })
            .collect(),
    );
    match restricted_chase(&body, sigma, rounds) {
        ChaseOutcome::Failed { .. } => Entailment::Entailed,
        out if evaluate_boolean(&head, out.instance()) => Entailment::Entailed,
        ChaseOutcome::Saturated(_) => Entailment::NotEntailed,
        _ => Entailment::Unknown,
    }
}
