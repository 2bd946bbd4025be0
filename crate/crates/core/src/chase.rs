//! Chase engines.
//!
//! * [`restricted_chase`]: parallel rounds over TGDs and FDs. Each round
//!   enumerates triggers created by the previous round (semi-naive), fires
//!   the ones still active, then merges values until all FDs hold.
//! * [`tree_chase_linear`]: breadth-first chase tree for linear TGDs, cut at a
//!   fixed depth.
//! * [`contains_under`]: query containment on top of either engine.

use std::collections::HashMap;
use std::fmt;
use std::ops::{ControlFlow, Range};

use serde::Serialize;

use crate::constraints::{ConstraintSet, Fd, Tgd};
use crate::error::{Error, Result};
use crate::model::{
    canonical_database, fmt_atoms, match_image, Atom, Binding, Cq, Instance, NullGen, PTerm, Pattern, Sym, Term,
};

/// One step of a chase run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Firing {
    Tgd { rule: String, on: Vec<Atom>, produced: Vec<Atom> },
    Merge { fd: String, from: Term, to: Term },
}

impl fmt::Display for Firing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Firing::Tgd { rule, on, produced } => {
                write!(f, "FIRE {rule} ON {} -> {}", fmt_atoms(on), fmt_atoms(produced))
            }
            Firing::Merge { fd, from, to } => write!(f, "MERGE {fd} {from} -> {to}"),
        }
    }
}

/// Apply the FDs until none is violated. Values are merged null→constant and
/// younger null→older null; two distinct constants are reported as `Err`.
/// Returns the merged instance and the number of merges.
pub fn apply_fds(
    inst: &Instance,
    fds: &[Fd],
    mut trace: Option<&mut Vec<Firing>>,
) -> std::result::Result<(Instance, usize), (Term, Term)> {
    let mut cur = inst.clone();
    let mut merges = 0;
    if fds.is_empty() {
        return Ok((cur, 0));
    }
    loop {
        let mut parent: HashMap<Term, Term> = HashMap::new();
        fn find(parent: &HashMap<Term, Term>, t: &Term) -> Term {
            let mut t = t.clone();
            while let Some(p) = parent.get(&t) {
                t = p.clone();
            }
            t
        }
        let mut any = false;
        for fd in fds {
            let mut seen: HashMap<Vec<Term>, Term> = HashMap::new();
            for fact in cur.facts_of(&fd.rel) {
                let key: Vec<Term> = fd.lhs.iter().map(|&p| find(&parent, &fact.args[p])).collect();
                let rhs = find(&parent, &fact.args[fd.rhs]);
                match seen.get(&key) {
                    None => {
                        seen.insert(key, rhs);
                    }
                    Some(other) => {
                        let other = find(&parent, other);
                        if other == rhs {
                            continue;
                        }
                        let (keep, drop) = match (&other, &rhs) {
                            (Term::Const(_), Term::Const(_)) => return Err((other, rhs)),
                            (Term::Const(_), _) => (other, rhs),
                            (_, Term::Const(_)) => (rhs, other),
                            (Term::Null(a), Term::Null(b)) => {
                                if a.id <= b.id {
                                    (other, rhs)
                                } else {
                                    (rhs, other)
                                }
                            }
                            _ => (other, rhs),
                        };
                        if let Some(t) = trace.as_deref_mut() {
                            t.push(Firing::Merge { fd: fd.to_string(), from: drop.clone(), to: keep.clone() });
                        }
                        parent.insert(drop, keep);
                        merges += 1;
                        any = true;
                    }
                }
            }
        }
        if !any {
            return Ok((cur, merges));
        }
        cur = cur.map_terms(|t| find(&parent, t));
    }
}

/// A TGD compiled for matching: head variables share numbers with the body,
/// existential variables come last.
#[derive(Clone, Debug)]
pub(crate) struct CompiledTgd {
    pub name: String,
    pub body: Pattern,
    pub head: Pattern,
    pub n_body_vars: usize,
}

impl CompiledTgd {
    pub fn new(t: &Tgd) -> Self {
        let body = Pattern::new(&t.body);
        let head = Pattern::with_vars(&t.head, body.vars.clone());
        CompiledTgd { name: t.name.clone(), n_body_vars: body.nvars(), body, head }
    }

    /// Is the trigger given by a body match still active (head unsatisfied)?
    pub fn is_active(&self, inst: &Instance, b: &Binding) -> bool {
        let mut hb: Binding = b.clone();
        hb.resize(self.head.nvars(), None);
        self.head.find(inst, &hb).is_none()
    }

    /// Head facts for a trigger, with fresh nulls for existential variables.
    pub fn fire(&self, b: &Binding, gen: &mut NullGen) -> Vec<Atom> {
        let mut hb: Binding = b.clone();
        hb.resize(self.head.nvars(), None);
        for (i, slot) in hb.iter_mut().enumerate().skip(self.n_body_vars) {
            *slot = Some(gen.fresh(&self.head.vars[i]));
        }
        (0..self.head.atoms.len()).map(|i| self.head.instantiate(i, &hb)).collect()
    }

    pub fn body_image(&self, b: &Binding) -> Vec<Atom> {
        (0..self.body.atoms.len()).map(|i| self.body.instantiate(i, b)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ChaseOptions {
    pub rounds: usize,
    pub max_facts: usize,
    pub trace: bool,
}

impl ChaseOptions {
    pub fn rounds(rounds: usize) -> Self {
        ChaseOptions { rounds, ..Self::default() }
    }
}

impl Default for ChaseOptions {
    fn default() -> Self {
        ChaseOptions { rounds: 100, max_facts: 200_000, trace: false }
    }
}

#[derive(Clone, Debug)]
pub struct ChaseState {
    pub instance: Instance,
    pub round: usize,
    pub nulls: NullGen,
    pub trace: Vec<Firing>,
    pub tgd_firings: usize,
    pub fd_merges: usize,
}

#[derive(Clone, Debug)]
pub enum ChaseOutcome {
    Saturated(ChaseState),
    Failed { state: ChaseState, clash: (Term, Term) },
    BudgetExhausted(ChaseState),
}

impl ChaseOutcome {
    pub fn state(&self) -> &ChaseState {
        match self {
            ChaseOutcome::Saturated(s) | ChaseOutcome::BudgetExhausted(s) => s,
            ChaseOutcome::Failed { state, .. } => state,
        }
    }
    pub fn instance(&self) -> &Instance {
        &self.state().instance
    }
    pub fn is_saturated(&self) -> bool {
        matches!(self, ChaseOutcome::Saturated(_))
    }
    pub fn is_failed(&self) -> bool {
        matches!(self, ChaseOutcome::Failed { .. })
    }
}

/// Restricted chase with a round budget and default limits.
pub fn restricted_chase(i0: &Instance, sigma: &ConstraintSet, round_budget: usize) -> ChaseOutcome {
    restricted_chase_with(i0, sigma, &ChaseOptions::rounds(round_budget))
}

pub fn restricted_chase_with(i0: &Instance, sigma: &ConstraintSet, opts: &ChaseOptions) -> ChaseOutcome {
    let rules: Vec<CompiledTgd> = sigma.tgds.iter().map(CompiledTgd::new).collect();
    let mut st = ChaseState {
        nulls: NullGen::after(i0),
        instance: i0.clone(),
        round: 0,
        trace: Vec::new(),
        tgd_firings: 0,
        fd_merges: 0,
    };
    // Facts with index >= delta_start were added by the previous round.
    let mut delta_start = 0usize;
    loop {
        if st.round >= opts.rounds || st.instance.len() > opts.max_facts {
            return ChaseOutcome::BudgetExhausted(st);
        }
        st.round += 1;
        let snapshot = st.instance.len();
        let mut triggers: Vec<(usize, Binding)> = Vec::new();
        for (ri, r) in rules.iter().enumerate() {
            let n = r.body.atoms.len();
            for i in 0..n {
                let windows: Vec<Range<usize>> = (0..n)
                    .map(|j| {
                        if j < i {
                            0..delta_start
                        } else if j == i {
                            delta_start..snapshot
                        } else {
                            0..snapshot
                        }
                    })
                    .collect();
                let mut b = r.body.empty_binding();
                let _ = r.body.for_each_match(&st.instance, &mut b, Some(&windows), &mut |m| {
                    triggers.push((ri, m.clone()));
                    ControlFlow::Continue(())
                });
            }
        }
        let mut fired = 0;
        for (ri, b) in triggers {
            let r = &rules[ri];
            if !r.is_active(&st.instance, &b) {
                continue;
            }
            let produced = r.fire(&b, &mut st.nulls);
            if opts.trace {
                st.trace.push(Firing::Tgd { rule: r.name.clone(), on: r.body_image(&b), produced: produced.clone() });
            }
            st.instance.extend(produced);
            fired += 1;
        }
        st.tgd_firings += fired;
        delta_start = snapshot;

        let trace = if opts.trace { Some(&mut st.trace) } else { None };
        match apply_fds(&st.instance, &sigma.fds, trace) {
            Err(clash) => return ChaseOutcome::Failed { state: st, clash },
            Ok((merged, n)) => {
                if n > 0 {
                    st.instance = merged;
                    st.fd_merges += n;
                    // Indices were rebuilt: every fact counts as new.
                    delta_start = 0;
                }
                if fired == 0 && n == 0 {
                    return ChaseOutcome::Saturated(st);
                }
            }
        }
    }
}

/// Number of active triggers plus FD violations in `inst` (zero iff `inst`
/// satisfies `sigma`).
pub fn count_violations(inst: &Instance, sigma: &ConstraintSet) -> usize {
    let mut n = 0;
    for t in &sigma.tgds {
        let r = CompiledTgd::new(t);
        let mut b = r.body.empty_binding();
        let _ = r.body.for_each_match(inst, &mut b, None, &mut |m| {
            if r.is_active(inst, m) {
                n += 1;
            }
            ControlFlow::Continue(())
        });
    }
    for fd in &sigma.fds {
        let mut seen: HashMap<Vec<&Term>, &Term> = HashMap::new();
        for f in inst.facts_of(&fd.rel) {
            let key: Vec<&Term> = fd.lhs.iter().map(|&p| &f.args[p]).collect();
            match seen.get(&key) {
                Some(r) if *r != &f.args[fd.rhs] => n += 1,
                Some(_) => {}
                None => {
                    seen.insert(key, &f.args[fd.rhs]);
                }
            }
        }
    }
    n
}

// ---------------------------------------------------------------------------
// Tree chase for linear TGDs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChaseTreeNode {
    pub fact: Atom,
    pub depth: usize,
    pub parent: Option<usize>,
    pub rule: Option<String>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TreeChaseOptions {
    /// Skip triggers whose head is already satisfied (restricted firing).
    /// A node at depth `d` of the unpruned tree still has a homomorphic image
    /// at depth `≤ d` of the pruned one, so depth-bounded verdicts are
    /// unchanged; the pruned tree is usually far smaller.
    pub prune_satisfied: bool,
    pub max_facts: usize,
    /// Stop as soon as this query matches.
    pub stop_on: Option<Cq>,
}

impl Default for TreeChaseOptions {
    fn default() -> Self {
        TreeChaseOptions { prune_satisfied: false, max_facts: 500_000, stop_on: None }
    }
}

#[derive(Clone, Debug)]
pub struct TreeChase {
    pub instance: Instance,
    pub nodes: Vec<ChaseTreeNode>,
    /// Deepest layer that produced a node.
    pub depth_reached: usize,
    /// No rule applies to the last layer: deeper chasing adds nothing.
    pub exhausted: bool,
    /// Stopped early because of `max_facts`.
    pub truncated: bool,
    /// Image of `stop_on` when it matched.
    pub matched: Option<Vec<Atom>>,
}

/// Match a single-atom pattern against a fact.
pub(crate) fn unify_one(pat: &Pattern, fact: &Atom) -> Option<Binding> {
    let pa = &pat.atoms[0];
    if pa.rel != fact.rel || pa.args.len() != fact.args.len() {
        return None;
    }
    let mut b = pat.empty_binding();
    for (t, v) in pa.args.iter().zip(&fact.args) {
        match t {
            PTerm::Fixed(c) => {
                if c != v {
                    return None;
                }
            }
            PTerm::Var(i) => match &b[*i] {
                Some(x) if x != v => return None,
                Some(_) => {}
                None => b[*i] = Some(v.clone()),
            },
        }
    }
    Some(b)
}

/// Breadth-first chase tree for linear TGDs, expanded to `depth`.
pub fn tree_chase_linear(i0: &Instance, theta: &[Tgd], depth: usize) -> Result<Instance> {
    Ok(tree_chase_with(i0, theta, depth, &TreeChaseOptions::default())?.instance)
}

pub fn tree_chase_with(i0: &Instance, theta: &[Tgd], depth: usize, opts: &TreeChaseOptions) -> Result<TreeChase> {
    if let Some(bad) = theta.iter().find(|t| !t.is_linear()) {
        return Err(Error::NonLinear(bad.name.clone()));
    }
    let rules: Vec<CompiledTgd> = theta.iter().map(CompiledTgd::new).collect();
    let mut by_rel: HashMap<Sym, Vec<usize>> = HashMap::new();
    for (i, r) in rules.iter().enumerate() {
        by_rel.entry(r.body.atoms[0].rel.clone()).or_default().push(i);
    }
    let stop = opts.stop_on.as_ref().map(|q| (q, Pattern::new(&q.atoms)));
    let mut gen = NullGen::after(i0);
    let mut out = TreeChase {
        instance: i0.clone(),
        nodes: i0
            .iter()
            .map(|f| ChaseTreeNode { fact: f.clone(), depth: 0, parent: None, rule: None, children: Vec::new() })
            .collect(),
        depth_reached: 0,
        exhausted: false,
        truncated: false,
        matched: None,
    };
    let check = |out: &mut TreeChase, from: usize| {
        if let Some((q, pat)) = &stop {
            if let Some(b) = pat.find_touching(&out.instance, from) {
                out.matched = Some(match_image(q, &pat.binding_map(&b)));
            }
        }
    };
    check(&mut out, 0);
    let mut layer: Vec<usize> = (0..out.nodes.len()).collect();
    for d in 1..=depth {
        if out.matched.is_some() {
            break;
        }
        let layer_start = out.instance.len();
        let mut next = Vec::new();
        for &ni in &layer {
            let fact = out.nodes[ni].fact.clone();
            let Some(rs) = by_rel.get(&fact.rel) else { continue };
            for &ri in rs {
                let r = &rules[ri];
                let Some(b) = unify_one(&r.body, &fact) else { continue };
                if opts.prune_satisfied && !r.is_active(&out.instance, &b) {
                    continue;
                }
                let head = r.fire(&b, &mut gen).pop().expect("linear rule has one head atom");
                if out.instance.insert(head.clone()) {
                    let id = out.nodes.len();
                    out.nodes.push(ChaseTreeNode {
                        fact: head,
                        depth: d,
                        parent: Some(ni),
                        rule: Some(r.name.clone()),
                        children: Vec::new(),
                    });
                    out.nodes[ni].children.push(id);
                    next.push(id);
                }
            }
            if out.instance.len() > opts.max_facts {
                out.truncated = true;
                break;
            }
        }
        if !next.is_empty() {
            out.depth_reached = d;
        }
        check(&mut out, layer_start);
        if out.truncated {
            break;
        }
        if next.is_empty() {
            out.exhausted = true;
            break;
        }
        layer = next;
    }
    Ok(out)
}

/// `2·k·(σ1·m^(w+1) + σ2)`: depth within which a containment witness must
/// appear for linear TGDs split into a width-`w` part (σ1 rules) and an
/// acyclic part (σ2 rules), with maximal arity `m` and a right-hand query of
/// `k` atoms.
pub fn depth_bound(k: usize, sigma1: usize, sigma2: usize, m: usize, w: usize) -> Result<usize> {
    let of = || Error::Overflow("depth bound");
    let exp = u32::try_from(w + 1).map_err(|_| of())?;
    let pow = (m as u64).checked_pow(exp).ok_or_else(of)?;
    let inner = (sigma1 as u64).checked_mul(pow).and_then(|x| x.checked_add(sigma2 as u64)).ok_or_else(of)?;
    let total = 2u64.checked_mul(k as u64).and_then(|x| x.checked_mul(inner)).ok_or_else(of)?;
    usize::try_from(total).map_err(|_| of())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Restricted chase expected to terminate within the round budget.
    TerminatingChase { rounds: usize },
    /// Linear TGDs of semi-width `w`: `sigma1` width-bounded rules and
    /// `sigma2` rules with an acyclic position graph.
    LinearDepthBounded { w: usize, sigma1: usize, sigma2: usize },
    /// Budgeted restricted chase; only a match is conclusive (or saturation).
    SemiDecide { rounds: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Holds {
    Yes,
    No,
    Unknown(String),
}

#[derive(Clone, Debug)]
pub struct ContainmentVerdict {
    pub holds: Holds,
    pub rounds: usize,
    pub facts: usize,
    /// Depth bound used by the linear engine.
    pub depth: Option<usize>,
    /// Facts matched by the right-hand query, when it matched.
    pub proof: Vec<Atom>,
    pub trace: Vec<Firing>,
}

#[derive(Clone, Debug)]
pub struct Limits {
    pub max_facts: usize,
    pub trace: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_facts: 200_000, trace: false }
    }
}

/// Does `q ⊆_sigma q2` hold? Starts from the canonical database of `q`.
pub fn contains_under(q: &Cq, sigma: &ConstraintSet, q2: &Cq, strategy: &Strategy) -> Result<ContainmentVerdict> {
    contains_from(&canonical_database(q), sigma, q2, strategy, &Limits::default())
}

/// Containment check from an explicit initial instance.
pub fn contains_from(
    i0: &Instance,
    sigma: &ConstraintSet,
    q2: &Cq,
    strategy: &Strategy,
    limits: &Limits,
) -> Result<ContainmentVerdict> {
    match strategy {
        Strategy::TerminatingChase { rounds } | Strategy::SemiDecide { rounds } => {
            let opts = ChaseOptions { rounds: *rounds, max_facts: limits.max_facts, trace: limits.trace };
            let outcome = restricted_chase_with(i0, sigma, &opts);
            let st = outcome.state();
            let mut v = ContainmentVerdict {
                holds: Holds::No,
                rounds: st.round,
                facts: st.instance.len(),
                depth: None,
                proof: Vec::new(),
                trace: st.trace.clone(),
            };
            if outcome.is_failed() {
                v.holds = Holds::Yes;
                return Ok(v);
            }
            match crate::model::find_homomorphism(q2, &st.instance) {
                Some(h) => {
                    v.holds = Holds::Yes;
                    v.proof = match_image(q2, &h);
                }
                None if outcome.is_saturated() => v.holds = Holds::No,
                None => {
                    v.holds = Holds::Unknown(format!(
                        "chase budget exhausted after {} rounds and {} facts",
                        st.round,
                        st.instance.len()
                    ))
                }
            }
            Ok(v)
        }
        Strategy::LinearDepthBounded { w, sigma1, sigma2 } => {
            if !sigma.fds.is_empty() {
                return Err(Error::Strategy("the linear engine does not handle FDs".into()));
            }
            let m = sigma
                .tgds
                .iter()
                .flat_map(|t| t.body.iter().chain(&t.head))
                .chain(&q2.atoms)
                .map(Atom::arity)
                .max()
                .unwrap_or(0);
            let depth = depth_bound(q2.len(), *sigma1, *sigma2, m, *w)?;
            // Rules that cannot lead to a relation of `q2` never matter; the
            // bound computed for the whole set stays valid for the rest.
            let keep = crate::linearize::relevant_rules(&sigma.tgds, q2);
            let rules: Vec<Tgd> = sigma.tgds.iter().zip(keep).filter(|(_, k)| *k).map(|(t, _)| t.clone()).collect();
            let opts =
                TreeChaseOptions { prune_satisfied: true, max_facts: limits.max_facts, stop_on: Some(q2.clone()) };
            let tc = tree_chase_with(i0, &rules, depth, &opts)?;
            let holds = match (&tc.matched, tc.truncated) {
                (Some(_), _) => Holds::Yes,
                (None, false) => Holds::No,
                (None, true) => Holds::Unknown(format!(
                    "linear chase stopped at {} facts before reaching depth {depth}",
                    tc.instance.len()
                )),
            };
            Ok(ContainmentVerdict {
                holds,
                rounds: tc.depth_reached,
                facts: tc.instance.len(),
                depth: Some(depth),
                proof: tc.matched.unwrap_or_default(),
                trace: Vec::new(),
            })
        }
    }
}
