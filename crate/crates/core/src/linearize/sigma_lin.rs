//! Σ^Lin: linear rules over relations `R[P]` that carry the set `P` of
//! positions known to be accessible.
//!
//! A fact `R[P](ā)` stands for an `R`-fact produced somewhere in the chase
//! tree whose values at `P` are accessible. The rules are
//!
//! * **Lift** `R[P](x̄) → ∃z̄ S[P″](…)` for every ID `R → S`, where `P″` are
//!   the head positions receiving values at `T(R,P)`;
//! * **Transfer** `R[P](x̄) → R′(x̄)` when some unbounded method on `R` has
//!   its inputs inside `T(R,P)`;
//! * **RB transfer** `R[P](x̄,ȳ) → ∃z̄ R′(x̄,z̄)` for a formerly result-bounded
//!   method whose inputs lie inside `T(R,P)`.
//!
//! Together with the primed constraints Σ′ (already linear), these are
//! chased from [`build_i0_lin`].

use std::collections::BTreeSet;

use super::small_subsets;
use super::truncated::Saturation;
use crate::constraints::{ConstraintSet, Tgd};
use crate::model::{sym, Atom, Cq, Instance, NullGen, Signature, Sym, Term};
use crate::reduce::{accessible, primed, AxiomKind, ContainmentProblem, ACCESSIBLE};

/// Name of the annotated copy of `rel`: `R[1,3]` (1-based), `R[]` when empty.
pub fn annotated(rel: &str, p: &BTreeSet<usize>) -> Sym {
    let ps: Vec<String> = p.iter().map(|i| (i + 1).to_string()).collect();
    sym(format!("{rel}[{}]", ps.join(",")))
}

#[derive(Clone, Debug, Default)]
pub struct SigmaLin {
    pub lift: Vec<Tgd>,
    pub transfer: Vec<Tgd>,
    pub rb_transfer: Vec<Tgd>,
    /// Σ′, the primed copy of the IDs.
    pub primed: Vec<Tgd>,
}

impl SigmaLin {
    /// Width-bounded part.
    pub fn bounded(&self) -> Vec<Tgd> {
        self.lift.iter().chain(&self.primed).cloned().collect()
    }
    /// Part with an acyclic position graph.
    pub fn acyclic(&self) -> Vec<Tgd> {
        self.transfer.iter().chain(&self.rb_transfer).cloned().collect()
    }
    pub fn rules(&self) -> ConstraintSet {
        let mut tgds = self.bounded();
        tgds.extend(self.acyclic());
        ConstraintSet::new(tgds, vec![])
    }
    /// The rules that can contribute to a match of `q`
    /// (see [`super::relevant_rules`]).
    pub fn relevant_to(&self, q: &Cq) -> SigmaLin {
        let all = self.rules().tgds;
        let keep = super::relevant_rules(&all, q);
        let mut flags = keep.into_iter();
        let mut pick = |v: &[Tgd]| v.iter().filter(|_| flags.next().unwrap_or(true)).cloned().collect::<Vec<_>>();
        // Same order as `rules()`: lift, primed, transfer, rb_transfer.
        let lift = pick(&self.lift);
        let primed = pick(&self.primed);
        let transfer = pick(&self.transfer);
        let rb_transfer = pick(&self.rb_transfer);
        SigmaLin { lift, transfer, rb_transfer, primed }
    }
}

/// (relation, inputs) of the transfer axioms of the given kind.
fn transfers(p: &ContainmentProblem, kind: AxiomKind) -> Vec<(Sym, BTreeSet<usize>, String)> {
    p.axioms_of(kind).map(|a| (a.relation.clone(), a.inputs.clone(), a.method.clone().unwrap_or_default())).collect()
}

fn xs(arity: usize) -> Vec<Term> {
    (0..arity).map(|i| Term::var(format!("x{}", i + 1))).collect()
}

/// Build Σ^Lin for a normalized ID problem: `p.sigma` holds the IDs,
/// `p.sigma_primed` their primed copies, and the axioms are inlined
/// (`Inlined`) or merged result-bounded transfers.
pub fn build_sigma_lin(p: &ContainmentProblem, sat: &Saturation) -> SigmaLin {
    let w = sat.width;
    let unbounded = transfers(p, AxiomKind::Inlined);
    let bounded = transfers(p, AxiomKind::ResultBoundedTransfer);
    let mut out = SigmaLin { primed: p.sigma_primed.tgds.clone(), ..SigmaLin::default() };
    for (rel, info) in p.base.relations() {
        let args = xs(info.arity);
        let positions: Vec<usize> = (0..info.arity).collect();
        for pset in small_subsets(&positions, w) {
            let t = sat.closure_of(rel, &pset).cloned().unwrap_or_else(|| pset.clone());
            let name = annotated(rel, &pset);
            let body = vec![Atom { rel: name.clone(), args: args.clone() }];
            if unbounded.iter().any(|(r, ins, _)| r == rel && ins.is_subset(&t)) {
                out.transfer.push(Tgd::new(
                    format!("transfer:{name}"),
                    body.clone(),
                    vec![Atom { rel: primed(rel), args: args.clone() }],
                ));
            }
            for (r, ins, m) in &bounded {
                if r == rel && ins.is_subset(&t) {
                    let head: Vec<Term> = (0..info.arity)
                        .map(|i| if ins.contains(&i) { args[i].clone() } else { Term::var(format!("z{}", i + 1)) })
                        .collect();
                    out.rb_transfer.push(Tgd::new(
                        format!("rbtransfer:{m}:{name}"),
                        body.clone(),
                        vec![Atom { rel: primed(rel), args: head }],
                    ));
                }
            }
            for id in p.sigma.tgds.iter().filter(|d| d.body[0].rel == *rel) {
                let p2: BTreeSet<usize> =
                    id.exported_positions().into_iter().filter(|(b, _)| t.contains(b)).map(|(_, h)| h).collect();
                let head = &id.head[0];
                out.lift.push(Tgd::new(
                    format!("lift:{}:{name}", id.name),
                    vec![id.body[0].with_rel(name.clone())],
                    vec![head.with_rel(annotated(&head.rel, &p2))],
                ));
            }
        }
    }
    out
}

/// The initial instance for Σ^Lin: the canonical database of the left query
/// (plus seeds), closed under all truncated accessibility axioms, with every
/// fact annotated by each small subset of its accessible positions, and the
/// primed facts produced by transfers at the root.
pub fn build_i0_lin(p: &ContainmentProblem, sat: &Saturation) -> Instance {
    let w = sat.width;
    let mut inst = p.initial_instance();
    let base = |r: &str| p.base.contains(r);
    let acc_positions = |inst: &Instance, f: &Atom| -> BTreeSet<usize> {
        (0..f.arity()).filter(|&i| inst.contains(&accessible(f.args[i].clone()))).collect()
    };
    loop {
        let mut add = Vec::new();
        for f in inst.iter().filter(|f| base(&f.rel)) {
            let acc = acc_positions(&inst, f);
            for j in sat.close_positions(&f.rel, &acc) {
                if !acc.contains(&j) {
                    add.push(accessible(f.args[j].clone()));
                }
            }
        }
        let before = inst.len();
        inst.extend(add);
        if inst.len() == before {
            break;
        }
    }

    let unbounded = transfers(p, AxiomKind::Inlined);
    let bounded = transfers(p, AxiomKind::ResultBoundedTransfer);
    let mut nulls = NullGen::after(&inst);
    let facts: Vec<Atom> = inst.iter().filter(|f| base(&f.rel)).cloned().collect();
    for f in facts {
        let acc = acc_positions(&inst, &f);
        let accv: Vec<usize> = acc.iter().copied().collect();
        for pset in small_subsets(&accv, w) {
            inst.insert(f.with_rel(annotated(&f.rel, &pset)));
        }
        if unbounded.iter().any(|(r, ins, _)| *r == f.rel && ins.is_subset(&acc)) {
            inst.insert(f.with_rel(primed(&f.rel)));
        }
        for (r, ins, _) in &bounded {
            if *r == f.rel && ins.is_subset(&acc) {
                let args: Vec<Term> = (0..f.arity())
                    .map(
                        |i| if ins.contains(&i) { f.args[i].clone() } else { nulls.fresh(&sym(format!("z{}", i + 1))) },
                    )
                    .collect();
                inst.insert(Atom { rel: primed(&f.rel), args });
            }
        }
    }
    inst
}

/// Signature of Σ^Lin: base, primed, annotated copies, `accessible`.
pub fn lin_signature(p: &ContainmentProblem, w: usize) -> Signature {
    let mut sig = Signature::new();
    let _ = sig.add(ACCESSIBLE, 1);
    for (rel, info) in p.base.relations() {
        let _ = sig.add(rel, info.arity);
        let _ = sig.add(primed(rel), info.arity);
        let positions: Vec<usize> = (0..info.arity).collect();
        for s in small_subsets(&positions, w) {
            let _ = sig.add(annotated(rel, &s), info.arity);
        }
    }
    sig
}
