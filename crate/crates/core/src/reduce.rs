//! The containment problem whose truth is equivalent to monotone
//! answerability.
//!
//! Given a schema (whose bounds have already been simplified to at most 1)
//! and a Boolean query `Q`, we build `Q ⊆_Γ Q′` where `Q′` renames every
//! relation `R` to its primed copy `R′`, and `Γ` is the union of
//!
//! * the schema constraints `Σ` and their primed copy `Σ′`;
//! * one *accessibility axiom* per access method, saying that an access
//!   whose inputs are accessible exposes matching tuples through `R_acc`;
//! * per relation, `R_acc(w̄) → R(w̄) ∧ R′(w̄) ∧ ⋀ accessible(wᵢ)`.
//!
//! Later stages rewrite the axioms into more convenient but equivalent forms
//! (inlining `R_acc`, splitting them into accessibility propagation and fact
//! transfer, merging result-bounded views). Axioms are kept tagged with a
//! [`AxiomKind`] so each stage can find the ones it rewrites.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::constraints::{detby, ConstraintSet, Fd, Tgd};
use crate::error::{Error, Result};
use crate::model::{canonical_database, sym, Atom, Cq, Instance, Signature, Sym, Term};
use crate::schema::{Bound, Schema};

/// The unary predicate marking accessible values.
pub const ACCESSIBLE: &str = "accessible";

pub fn primed(rel: &str) -> Sym {
    sym(format!("{rel}'"))
}

pub fn acc_rel(rel: &str) -> Sym {
    sym(format!("{rel}_acc"))
}

pub fn is_primed(rel: &str) -> bool {
    rel.ends_with('\'')
}

pub fn accessible(t: Term) -> Atom {
    Atom { rel: sym(ACCESSIBLE), args: vec![t] }
}

/// Rename every relation of the query to its primed copy.
pub fn prime_cq(q: &Cq) -> Cq {
    Cq::boolean(q.atoms.iter().map(|a| a.with_rel(primed(&a.rel))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AxiomKind {
    /// `⋀acc(x̄) ∧ R(x̄,ȳ) → R_acc(x̄,ȳ)`
    Unbounded,
    /// `⋀acc(x̄) ∧ R(x̄,ȳ) → ∃z̄ R_acc(x̄,z̄)`
    BoundOne,
    /// `R_acc(w̄) → R(w̄) ∧ R′(w̄) ∧ ⋀acc(w̄)`
    AccFlow,
    /// `⋀acc(x̄) ∧ R(x̄,ȳ) → R′(x̄,ȳ) ∧ ⋀acc(ȳ)`
    Inlined,
    /// `⋀acc(x̄) ∧ R(x̄,ȳ,ū) → ∃z̄ R(x̄,ȳ,z̄) ∧ R′(x̄,ȳ,z̄) ∧ ⋀acc(ȳ,z̄)` with ȳ the
    /// positions the inputs determine.
    InlinedBoundOne,
    /// `⋀acc(x̄) ∧ R(x̄,ȳ) → ∃z̄ R′(x̄,z̄)`
    ResultBoundedTransfer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessAxiom {
    pub kind: AxiomKind,
    pub method: Option<String>,
    pub relation: Sym,
    pub inputs: BTreeSet<usize>,
    pub tgd: Tgd,
}

#[derive(Clone, Debug)]
pub struct ContainmentProblem {
    pub left: Cq,
    pub right: Cq,
    pub sigma: ConstraintSet,
    pub sigma_primed: ConstraintSet,
    pub axioms: Vec<AccessAxiom>,
    /// Facts added to the canonical database of `left` (accessible query
    /// constants, when requested).
    pub seeds: Vec<Atom>,
    /// Relations of the schema the problem was built from.
    pub base: Signature,
    /// The expanded signature: every base relation, its primed and `_acc`
    /// copies, and `accessible`.
    pub signature: Signature,
}

impl ContainmentProblem {
    /// All of Γ as one constraint set.
    pub fn gamma(&self) -> ConstraintSet {
        let mut cs = self.sigma.clone();
        cs.extend(self.sigma_primed.clone());
        cs.tgds.extend(self.axioms.iter().map(|a| a.tgd.clone()));
        cs
    }

    pub fn axioms_of(&self, kind: AxiomKind) -> impl Iterator<Item = &AccessAxiom> {
        self.axioms.iter().filter(move |a| a.kind == kind)
    }

    /// Canonical database of the left query plus the seed facts.
    pub fn initial_instance(&self) -> Instance {
        let mut inst = canonical_database(&self.left);
        inst.extend(self.seeds.iter().cloned());
        inst
    }
}

impl fmt::Display for ContainmentProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# left: {}", self.left)?;
        writeln!(f, "# right: {}", self.right)?;
        for s in &self.seeds {
            writeln!(f, "# seed: {s}")?;
        }
        write!(f, "{}", self.gamma())
    }
}

fn xs(arity: usize) -> Vec<Term> {
    (0..arity).map(|p| Term::var(format!("x{}", p + 1))).collect()
}

fn guard_body(rel: &Sym, inputs: &BTreeSet<usize>, args: &[Term]) -> Vec<Atom> {
    let mut body: Vec<Atom> = inputs.iter().map(|&p| accessible(args[p].clone())).collect();
    body.push(Atom { rel: rel.clone(), args: args.to_vec() });
    body
}

/// Build the containment problem for `q` over `sch`. Every result bound must
/// already be 1 (simplify first).
pub fn amondet_containment(sch: &Schema, q: &Cq, accessible_constants: bool) -> Result<ContainmentProblem> {
    for m in &sch.methods {
        if let Some(k) = m.bound.k() {
            if k > 1 {
                return Err(Error::UnsupportedBound(k));
            }
        }
    }
    let mut signature = Signature::new();
    for (name, info) in sch.signature.relations() {
        signature.add_named(name, info.attrs.clone())?;
    }
    for (name, info) in sch.signature.relations() {
        for n in [primed(name), acc_rel(name)] {
            signature
                .add_named(&n, info.attrs.clone())
                .map_err(|_| Error::Validation(format!("relation name {n} clashes with a generated relation")))?;
        }
    }
    signature
        .add_named(ACCESSIBLE, vec!["value".into()])
        .map_err(|_| Error::Validation(format!("relation name {ACCESSIBLE} is reserved")))?;

    let sigma = sch.constraints.clone();
    let sigma_primed = sigma.map_relations(|r| primed(r), |n| format!("{n}'"));

    let mut axioms = Vec::new();
    for m in &sch.methods {
        let arity = sch.arity(&m.relation);
        let args = xs(arity);
        let body = guard_body(&m.relation, &m.inputs, &args);
        let (kind, head_args) = match m.bound {
            Bound::Unbounded => (AxiomKind::Unbounded, args.clone()),
            Bound::Upper(_) | Bound::Lower(_) => {
                let head: Vec<Term> = (0..arity)
                    .map(|p| if m.inputs.contains(&p) { args[p].clone() } else { Term::var(format!("z{}", p + 1)) })
                    .collect();
                (AxiomKind::BoundOne, head)
            }
        };
        axioms.push(AccessAxiom {
            kind,
            method: Some(m.name.clone()),
            relation: m.relation.clone(),
            inputs: m.inputs.clone(),
            tgd: Tgd::new(
                format!("access:{}", m.name),
                body,
                vec![Atom { rel: acc_rel(&m.relation), args: head_args }],
            ),
        });
    }
    for (name, info) in sch.signature.relations() {
        let args = xs(info.arity);
        let mut head =
            vec![Atom { rel: name.clone(), args: args.clone() }, Atom { rel: primed(name), args: args.clone() }];
        head.extend(args.iter().cloned().map(accessible));
        axioms.push(AccessAxiom {
            kind: AxiomKind::AccFlow,
            method: None,
            relation: name.clone(),
            inputs: BTreeSet::new(),
            tgd: Tgd::new(format!("accflow:{name}"), vec![Atom { rel: acc_rel(name), args }], head),
        });
    }

    let left = q.booleanize();
    let seeds = if accessible_constants {
        left.constants().into_iter().map(|c| accessible(Term::Const(c))).collect()
    } else {
        Vec::new()
    };
    Ok(ContainmentProblem {
        right: prime_cq(&left),
        left,
        sigma,
        sigma_primed,
        axioms,
        seeds,
        base: sch.signature.clone(),
        signature,
    })
}

fn inlined_unbounded(ax: &AccessAxiom, arity: usize) -> AccessAxiom {
    let args = xs(arity);
    let mut head = vec![Atom { rel: primed(&ax.relation), args: args.clone() }];
    head.extend((0..arity).filter(|p| !ax.inputs.contains(p)).map(|p| accessible(args[p].clone())));
    AccessAxiom {
        kind: AxiomKind::Inlined,
        tgd: Tgd::new(ax.tgd.name.clone(), guard_body(&ax.relation, &ax.inputs, &args), head),
        ..ax.clone()
    }
}

/// Inline `R_acc` into the axioms of unbounded methods:
/// `⋀acc(x̄) ∧ R(x̄,ȳ) → R′(x̄,ȳ) ∧ ⋀acc(ȳ)`. The `R_acc` flow axiom is kept
/// only for relations that still have a bound-1 axiom.
pub fn rewrite_unbounded_axioms(p: &ContainmentProblem) -> ContainmentProblem {
    let mut out = p.clone();
    let still_acc: BTreeSet<Sym> = p.axioms_of(AxiomKind::BoundOne).map(|a| a.relation.clone()).collect();
    out.axioms = p
        .axioms
        .iter()
        .filter_map(|a| match a.kind {
            AxiomKind::Unbounded => Some(inlined_unbounded(a, p.base.arity(&a.relation).unwrap_or(0))),
            AxiomKind::AccFlow if !still_acc.contains(&a.relation) => None,
            _ => Some(a.clone()),
        })
        .collect();
    out
}

/// Inline every axiom, including bound-1 ones, exporting the positions the
/// inputs determine under `fds`:
/// `⋀acc(x̄) ∧ R(x̄,ȳ,ū) → ∃z̄ R(x̄,ȳ,z̄) ∧ R′(x̄,ȳ,z̄) ∧ ⋀acc(ȳ,z̄)`.
pub fn inline_all_axioms(p: &ContainmentProblem, fds: &[Fd]) -> ContainmentProblem {
    let mut out = p.clone();
    out.axioms = p
        .axioms
        .iter()
        .filter_map(|a| {
            let arity = p.base.arity(&a.relation).unwrap_or(0);
            match a.kind {
                AxiomKind::Unbounded => Some(inlined_unbounded(a, arity)),
                AxiomKind::AccFlow => None,
                AxiomKind::BoundOne => {
                    let args = xs(arity);
                    let det = detby(&a.relation, &a.inputs, fds);
                    let hargs: Vec<Term> = (0..arity)
                        .map(|q| if det.contains(&q) { args[q].clone() } else { Term::var(format!("z{}", q + 1)) })
                        .collect();
                    let mut head = vec![
                        Atom { rel: a.relation.clone(), args: hargs.clone() },
                        Atom { rel: primed(&a.relation), args: hargs.clone() },
                    ];
                    head.extend((0..arity).filter(|q| !a.inputs.contains(q)).map(|q| accessible(hargs[q].clone())));
                    Some(AccessAxiom {
                        kind: AxiomKind::InlinedBoundOne,
                        tgd: Tgd::new(a.tgd.name.clone(), guard_body(&a.relation, &a.inputs, &args), head),
                        ..a.clone()
                    })
                }
                _ => Some(a.clone()),
            }
        })
        .collect();
    out
}

/// Split inlined axioms into truncated accessibility axioms (one
/// `accessible` head atom each) and transfer axioms `⋀acc(x̄) ∧ R → R′`.
pub fn split_access_axioms(p: &ContainmentProblem) -> (Vec<Tgd>, Vec<Tgd>) {
    let mut truncated = Vec::new();
    let mut transfer = Vec::new();
    for a in p.axioms_of(AxiomKind::Inlined) {
        let body = a.tgd.body.clone();
        let rel_atom = body.last().expect("guard atom").clone();
        for (j, t) in rel_atom.args.iter().enumerate() {
            if !a.inputs.contains(&j) {
                truncated.push(Tgd::new(
                    format!("{}:acc{}", a.tgd.name, j + 1),
                    body.clone(),
                    vec![accessible(t.clone())],
                ));
            }
        }
        transfer.push(Tgd::new(format!("{}:transfer", a.tgd.name), body, vec![rel_atom.with_rel(primed(&a.relation))]));
    }
    (truncated, transfer)
}

/// After the existence-check simplification, replace each view's chain
/// `R → R_mt → R′_mt → R′` by a single result-bounded fact transfer
/// `⋀acc(x̄) ∧ R(x̄,ȳ) → ∃z̄ R′(x̄,z̄)`, dropping the view IDs that can never
/// fire on active triggers.
///
/// The guard on the inputs is kept: the view's method is Boolean, so its
/// accessibility axiom only fires once the inputs are accessible.
pub fn normalize_id_result_bounds(p: &ContainmentProblem, sch: &Schema) -> ContainmentProblem {
    let mut out = p.clone();
    for v in &sch.views {
        let names = [v.to_view.clone(), v.from_view.clone()];
        let primed_names = [format!("{}'", v.to_view), format!("{}'", v.from_view)];
        out.sigma.tgds.retain(|t| !names.contains(&t.name));
        out.sigma_primed.tgds.retain(|t| !primed_names.contains(&t.name));
        out.axioms.retain(|a| a.relation != v.view);

        let arity = sch.arity(&v.base);
        let inputs: BTreeSet<usize> = v.positions[..v.n_inputs].iter().copied().collect();
        let args = xs(arity);
        let head: Vec<Term> = (0..arity)
            .map(|q| if inputs.contains(&q) { args[q].clone() } else { Term::var(format!("z{}", q + 1)) })
            .collect();
        out.axioms.push(AccessAxiom {
            kind: AxiomKind::ResultBoundedTransfer,
            method: Some(v.source_method.clone()),
            relation: v.base.clone(),
            inputs: inputs.clone(),
            tgd: Tgd::new(
                format!("rbtransfer:{}", v.source_method),
                guard_body(&v.base, &inputs, &args),
                vec![Atom { rel: primed(&v.base), args: head }],
            ),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Signature;
    use crate::schema::AccessMethod;
    use crate::simplify::{choice_simplification, existence_check_simplification};

    fn example1(ud: Bound) -> Schema {
        let mut sig = Signature::new();
        sig.add_named("Prof", vec!["id".into(), "name".into(), "salary".into()]).unwrap();
        sig.add_named("Udirectory", vec!["id".into(), "address".into(), "phone".into()]).unwrap();
        Schema::new(
            sig,
            ConstraintSet::default(),
            vec![
                AccessMethod::new("pr", sym("Prof"), [0], Bound::Unbounded),
                AccessMethod::new("ud", sym("Udirectory"), [], ud),
            ],
        )
    }

    fn q2() -> Cq {
        Cq::boolean(vec![Atom::new("Udirectory", vec![Term::var("i"), Term::var("a"), Term::var("p")])])
    }

    #[test]
    fn expanded_signature_has_three_copies() {
        let p = amondet_containment(&example1(Bound::Unbounded), &q2(), false).unwrap();
        assert_eq!(p.signature.len(), 2 * 3 + 1);
        assert_eq!(p.right.atoms[0].rel, sym("Udirectory'"));
        let rels: BTreeSet<Sym> =
            p.gamma().tgds.iter().flat_map(|t| t.body.iter().chain(&t.head).map(|a| a.rel.clone())).collect();
        assert!(rels.iter().all(|r| p.signature.contains(r)));
    }

    #[test]
    fn large_bound_is_rejected() {
        let e = amondet_containment(&example1(Bound::Upper(100)), &q2(), false).unwrap_err();
        assert!(matches!(e, Error::UnsupportedBound(100)));
    }

    #[test]
    fn rewritten_axioms_have_the_inlined_shape() {
        let p = amondet_containment(&example1(Bound::Unbounded), &q2(), false).unwrap();
        let r = rewrite_unbounded_axioms(&p);
        assert!(r.axioms.iter().all(|a| a.kind == AxiomKind::Inlined));
        let pr = r.axioms.iter().find(|a| a.method.as_deref() == Some("pr")).unwrap();
        assert_eq!(
            pr.tgd.to_string(),
            "access:pr: accessible(x1), Prof(x1,x2,x3) -> Prof'(x1,x2,x3), accessible(x2), accessible(x3)"
        );
        let ud = r.axioms.iter().find(|a| a.method.as_deref() == Some("ud")).unwrap();
        assert_eq!(ud.tgd.body.len(), 1);
        let (trunc, transfer) = split_access_axioms(&r);
        assert_eq!(trunc.len(), 2 + 3);
        assert_eq!(transfer.len(), 2);
        assert!(trunc.iter().all(|t| t.head.len() == 1 && &*t.head[0].rel == ACCESSIBLE));
    }

    #[test]
    fn choice_simplified_bound_gives_bound_one_axiom() {
        let s = choice_simplification(&example1(Bound::Upper(100)));
        let p = amondet_containment(&s, &q2(), false).unwrap();
        let ud = p.axioms_of(AxiomKind::BoundOne).next().unwrap();
        assert!(ud.tgd.is_id());
        assert_eq!(ud.tgd.width(), 0);
    }

    #[test]
    fn result_bounds_merge_into_one_transfer() {
        let mut sch = example1(Bound::Unbounded);
        sch.methods.push(AccessMethod::new("ud2", sym("Udirectory"), [0], Bound::Upper(1)));
        sch.methods.push(AccessMethod::new("ud3", sym("Udirectory"), [1], Bound::Upper(1)));
        let ec = existence_check_simplification(&sch);
        let p = amondet_containment(&ec, &q2(), false).unwrap();
        let n = normalize_id_result_bounds(&rewrite_unbounded_axioms(&p), &ec);
        let rb: Vec<_> = n.axioms_of(AxiomKind::ResultBoundedTransfer).collect();
        assert_eq!(rb.len(), 2);
        assert_eq!(
            rb[0].tgd.to_string(),
            "rbtransfer:ud2: accessible(x1), Udirectory(x1,x2,x3) -> Udirectory'(x1,z2,z3)"
        );
        assert!(n.sigma.tgds.is_empty() && n.sigma_primed.tgds.is_empty());
        assert!(n.axioms.iter().all(|a| !ec.is_view(&a.relation)));
    }

    #[test]
    fn constants_seeded_only_on_request() {
        let q = Cq::boolean(vec![Atom::new("Prof", vec![Term::var("i"), Term::var("n"), Term::constant("10000")])]);
        let s = example1(Bound::Unbounded);
        assert!(amondet_containment(&s, &q, false).unwrap().seeds.is_empty());
        let p = amondet_containment(&s, &q, true).unwrap();
        assert_eq!(p.seeds, vec![accessible(Term::constant("10000"))]);
    }
}
