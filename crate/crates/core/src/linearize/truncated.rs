//! Truncated accessibility axioms and their saturation.
//!
//! A truncated accessibility axiom `(R, P, j)` reads
//! `⋀_{i∈P} accessible(xᵢ) ∧ R(x̄) → accessible(xⱼ)`. Given the IDs of the
//! schema and the axioms coming from the access methods, [`saturate_truncated`]
//! computes, for every relation `R` and every `P` with `|P| ≤ w`, the set
//! `T(R,P)` of positions that become accessible — i.e. all derived axioms of
//! breadth at most `w`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::small_subsets;
use crate::constraints::Tgd;
use crate::error::{Error, Result};
use crate::model::{sym, Atom, Signature, Sym, Term};
use crate::reduce::{accessible, ACCESSIBLE};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TruncAxiom {
    pub rel: Sym,
    /// 0-based positions carrying an `accessible` hypothesis.
    pub premises: BTreeSet<usize>,
    pub conclusion: usize,
}

impl TruncAxiom {
    pub fn new(rel: impl AsRef<str>, premises: impl IntoIterator<Item = usize>, conclusion: usize) -> Self {
        TruncAxiom { rel: sym(rel), premises: premises.into_iter().collect(), conclusion }
    }

    pub fn breadth(&self) -> usize {
        self.premises.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.premises.contains(&self.conclusion)
    }

    pub fn to_tgd(&self, arity: usize) -> Tgd {
        let xs: Vec<Term> = (0..arity).map(|p| Term::var(format!("x{}", p + 1))).collect();
        let mut body: Vec<Atom> = self.premises.iter().map(|&p| accessible(xs[p].clone())).collect();
        body.push(Atom { rel: self.rel.clone(), args: xs.clone() });
        Tgd::new(format!("trunc:{self}"), body, vec![accessible(xs[self.conclusion].clone())])
    }

    /// Recognise `⋀ accessible(xᵢ) ∧ R(x̄) → accessible(xⱼ)` with `R(x̄)`
    /// free of repeated variables.
    pub fn from_tgd(t: &Tgd) -> Option<TruncAxiom> {
        let [head] = t.head.as_slice() else { return None };
        if &*head.rel != ACCESSIBLE {
            return None;
        }
        let mut guards = t.body.iter().filter(|a| &*a.rel != ACCESSIBLE);
        let guard = guards.next()?;
        if guards.next().is_some() || guard.vars().len() != guard.arity() || guard.args.iter().any(|a| !a.is_var()) {
            return None;
        }
        let pos = |term: &Term| guard.args.iter().position(|a| a == term);
        let premises = t
            .body
            .iter()
            .filter(|a| &*a.rel == ACCESSIBLE)
            .map(|a| pos(&a.args[0]))
            .collect::<Option<BTreeSet<usize>>>()?;
        Some(TruncAxiom { rel: guard.rel.clone(), premises, conclusion: pos(&head.args[0])? })
    }
}

impl fmt::Display for TruncAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.premises.iter().map(|p| (p + 1).to_string()).collect();
        write!(f, "{}{{{}}}->{}", self.rel, ps.join(","), self.conclusion + 1)
    }
}

/// The fixpoint `T(R,P)` for `|P| ≤ w`, plus the axioms it was built from.
#[derive(Clone, Debug)]
pub struct Saturation {
    pub width: usize,
    pub closure: BTreeMap<(Sym, BTreeSet<usize>), BTreeSet<usize>>,
    /// The original axioms (any breadth).
    pub delta: Vec<TruncAxiom>,
}

impl Saturation {
    /// `T(R,P)`; `None` when `|P| > w` or `R` is unknown.
    pub fn closure_of(&self, rel: &str, p: &BTreeSet<usize>) -> Option<&BTreeSet<usize>> {
        self.closure.get(&(sym(rel), p.clone()))
    }

    /// Every non-trivial derived axiom of breadth at most `w`.
    pub fn derived(&self) -> impl Iterator<Item = TruncAxiom> + '_ {
        self.closure.iter().flat_map(|((rel, p), t)| {
            t.iter().filter(move |j| !p.contains(j)).map(move |&j| TruncAxiom {
                rel: rel.clone(),
                premises: p.clone(),
                conclusion: j,
            })
        })
    }

    /// Positions of an `R`-fact that become accessible when the positions in
    /// `acc` are (any number of them): closes under the derived axioms and
    /// the original ones.
    pub fn close_positions(&self, rel: &str, acc: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut cur = acc.clone();
        loop {
            let before = cur.len();
            for d in self.delta.iter().filter(|d| &*d.rel == rel) {
                if d.premises.is_subset(&cur) {
                    cur.insert(d.conclusion);
                }
            }
            let current: Vec<usize> = cur.iter().copied().collect();
            for r in small_subsets(&current, self.width) {
                if let Some(t) = self.closure_of(rel, &r) {
                    cur.extend(t.iter().copied());
                }
            }
            if cur.len() == before {
                return cur;
            }
        }
    }
}

/// Saturate `delta` under the IDs `ids` (all of width ≤ `w`), for every
/// relation of `sig` except `accessible`.
///
/// Rules, applied until nothing changes, for every `R` and `|P| ≤ w`:
/// * `T(R,P) ⊇ P`;
/// * if `(R,P₀,j) ∈ delta` and `P₀ ⊆ T(R,P)` then `j ∈ T(R,P)` — the access
///   rule, for axioms of any breadth;
/// * if `r ⊆ T(R,P)` and `|r| ≤ w` then `T(R,r) ⊆ T(R,P)` — transitivity;
/// * for an ID `R → S` exporting body position `e⁻¹(k)` to head position `k`:
///   for `K` a set of at most `w` exported head positions and every exported
///   `k ∈ T(S,K)`, `e⁻¹(k) ∈ T(R, e⁻¹(K))`.
pub fn saturate_truncated(sig: &Signature, ids: &[Tgd], delta: &[TruncAxiom], w: usize) -> Result<Saturation> {
    if let Some(bad) = ids.iter().find(|t| !t.is_id() || t.width() > w) {
        return Err(Error::Strategy(format!("saturation needs IDs of width at most {w}, got {bad}")));
    }
    let mut rels: BTreeSet<Sym> = delta.iter().map(|d| d.rel.clone()).collect();
    rels.extend(sig.names().filter(|r| &***r != ACCESSIBLE).cloned());
    for t in ids {
        rels.insert(t.body[0].rel.clone());
        rels.insert(t.head[0].rel.clone());
    }
    let arity = |r: &Sym| sig.arity(r).ok_or_else(|| Error::Validation(format!("unknown relation {r}")));
    let mut closure: BTreeMap<(Sym, BTreeSet<usize>), BTreeSet<usize>> = BTreeMap::new();
    let mut max_arity = 0;
    for r in &rels {
        let a = arity(r)?;
        max_arity = max_arity.max(a);
        let positions: Vec<usize> = (0..a).collect();
        for p in small_subsets(&positions, w) {
            closure.insert((r.clone(), p.clone()), p);
        }
    }
    // Per ID: body relation, head relation, exported (body pos, head pos).
    type IdMap = (Sym, Sym, Vec<(usize, usize)>);
    let id_maps: Vec<IdMap> =
        ids.iter().map(|t| (t.body[0].rel.clone(), t.head[0].rel.clone(), t.exported_positions())).collect();

    loop {
        let mut changed = false;
        let keys: Vec<(Sym, BTreeSet<usize>)> = closure.keys().cloned().collect();
        for key in &keys {
            let (rel, _) = key;
            let mut t = closure[key].clone();
            loop {
                let before = t.len();
                for d in delta.iter().filter(|d| &d.rel == rel) {
                    if d.premises.is_subset(&t) {
                        t.insert(d.conclusion);
                    }
                }
                let cur: Vec<usize> = t.iter().copied().collect();
                for r in small_subsets(&cur, w) {
                    if let Some(tr) = closure.get(&(rel.clone(), r)) {
                        t.extend(tr.iter().copied());
                    }
                }
                if t.len() == before {
                    break;
                }
            }
            if t != closure[key] {
                closure.insert(key.clone(), t);
                changed = true;
            }
        }
        for (body, head, pairs) in &id_maps {
            let heads: Vec<usize> = pairs.iter().map(|&(_, h)| h).collect();
            let back = |k: usize| pairs.iter().find(|&&(_, h)| h == k).map(|&(b, _)| b);
            for k_set in small_subsets(&heads, w) {
                let ts = closure[&(head.clone(), k_set.clone())].clone();
                let p: BTreeSet<usize> = k_set.iter().filter_map(|&k| back(k)).collect();
                let target = closure.get_mut(&(body.clone(), p)).expect("breadth within w");
                for k in ts {
                    if let Some(b) = back(k) {
                        changed |= target.insert(b);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let sat = Saturation { width: w, closure, delta: delta.to_vec() };
    let nontrivial = sat.derived().count() as u128;
    let bound = (rels.len() as u128) * (max_arity as u128).saturating_pow(w as u32 + 1);
    assert!(nontrivial <= bound, "saturation produced {nontrivial} axioms, above the r·a^(w+1) = {bound} bound");
    Ok(sat)
}
