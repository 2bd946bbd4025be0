//! Θ: linear rules over type-annotated relations.
//!
//! For each type `T` reachable from the left query, with annotated relation
//! `R_T` (named by [`TypeKey::annotated_name`]):
//!
//! * **Forget** `R_T(x̄) → R(x̄)`;
//! * **Instantiate** `R_T(x̄) → A` for every `A ∈ D(T)`;
//! * **Lift** `R_T(x̄) → ∃z̄ S_{T_c}(…)` for every non-side atom of the local
//!   closure of `T` and every ID applicable to it, `T_c` being the child type.
//!
//! Lift rules export exactly what the ID exports, so they have the ID's
//! width; Forget and Instantiate lead to relations no rule reads, so they
//! form the acyclic part.

use std::collections::{BTreeSet, VecDeque};

use super::closure::{local_var, ClosureEngine, TypeKey};
use crate::constraints::{ConstraintSet, Tgd};
use crate::error::Result;
use crate::model::{Atom, Instance, Term};

#[derive(Clone, Debug, Default)]
pub struct Theta {
    pub forget: Vec<Tgd>,
    pub instantiate: Vec<Tgd>,
    pub lift: Vec<Tgd>,
}

impl Theta {
    pub fn bounded(&self) -> Vec<Tgd> {
        self.lift.clone()
    }
    pub fn acyclic(&self) -> Vec<Tgd> {
        self.forget.iter().chain(&self.instantiate).cloned().collect()
    }
    pub fn rules(&self) -> ConstraintSet {
        let mut t = self.bounded();
        t.extend(self.acyclic());
        ConstraintSet::new(t, vec![])
    }
    /// The rules that can contribute to a match of `q`.
    pub fn relevant_to(&self, q: &crate::model::Cq) -> Theta {
        let keep = super::relevant_rules(&self.rules().tgds, q);
        let mut flags = keep.into_iter();
        let mut pick = |v: &[Tgd]| v.iter().filter(|_| flags.next().unwrap_or(true)).cloned().collect::<Vec<_>>();
        // Same order as `rules()`: lift, forget, instantiate.
        let lift = pick(&self.lift);
        let forget = pick(&self.forget);
        let instantiate = pick(&self.instantiate);
        Theta { forget, instantiate, lift }
    }
}

impl std::fmt::Display for Theta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for t in self.lift.iter().chain(&self.forget).chain(&self.instantiate) {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

/// The left query's canonical database (given as `root`, seeds included)
/// closed under the constraints, plus an annotated fact `R_T(ā)` for every
/// non-side atom `R(ā)`, `T` being its type in the closure. Returns the
/// instance and the root types.
pub fn build_q_lin(engine: &mut ClosureEngine, root: &Instance) -> Result<(Instance, Vec<TypeKey>)> {
    let mut out = engine.close_root(root)?;
    let side = engine.side().clone();
    let atoms: Vec<Atom> = out.iter().filter(|a| !side.contains(&a.rel)).cloned().collect();
    let mut roots = Vec::new();
    for a in atoms {
        let (key, _) = TypeKey::of(&a, &out, &side);
        out.insert(a.with_rel(key.annotated_name()));
        if !roots.contains(&key) {
            roots.push(key);
        }
    }
    Ok((out, roots))
}

/// Θ for the types reachable from `roots` through Lift rules. The engine must
/// be solved (as [`build_q_lin`] leaves it).
pub fn build_theta(engine: &ClosureEngine, roots: &[TypeKey]) -> Theta {
    let mut theta = Theta::default();
    let mut seen: BTreeSet<TypeKey> = roots.iter().cloned().collect();
    let mut queue: VecDeque<TypeKey> = roots.iter().cloned().collect();
    let ids: Vec<&Tgd> = engine.id_rules().collect();
    while let Some(key) = queue.pop_front() {
        let name = key.annotated_name();
        let body = vec![Atom { rel: name.clone(), args: key.guard_atom().args }];
        theta.forget.push(Tgd::new(format!("forget:{name}"), body.clone(), vec![key.guard_atom()]));
        let d = engine.derived(&key).cloned().unwrap_or_default();
        for (k, a) in d.iter().enumerate() {
            theta.instantiate.push(Tgd::new(format!("inst{}:{name}", k + 1), body.clone(), vec![a.to_atom()]));
        }
        let local = engine.closed_local(&key);
        let as_var = |t: &Term| local_var(t.null_id().expect("local values are nulls") as usize - 1);
        let parents: Vec<Atom> = local.iter().filter(|a| !engine.side().contains(&a.rel)).cloned().collect();
        for g in &parents {
            for child in engine.children(g, &local) {
                debug_assert!(engine.derived(&child.key).is_some(), "child type {} was not solved", child.key);
                let args: Vec<Term> = child
                    .key
                    .pattern
                    .iter()
                    .map(|&i| match &child.values[i] {
                        Some(t) => as_var(t),
                        None => Term::var(format!("z{}", i + 1)),
                    })
                    .collect();
                let cname = child.key.annotated_name();
                theta.lift.push(Tgd::new(
                    format!("lift:{}:{name}", ids[child.id].name),
                    body.clone(),
                    vec![Atom { rel: cname, args }],
                ));
                if seen.insert(child.key.clone()) {
                    queue.push_back(child.key);
                }
            }
        }
    }
    theta.lift.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.head[0].to_string().cmp(&b.head[0].to_string())));
    theta.lift.dedup();
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::{contains_from, Holds, Limits, Strategy};
    use crate::linearize::{all_linear, is_acyclic, normalize_gtgds};
    use crate::model::{sym, Cq};

    fn a(rel: &str, vs: &[&str]) -> Atom {
        Atom::new(rel, vs.iter().map(Term::var).collect())
    }

    #[test]
    fn theta_is_linear_and_split() {
        let rules = [
            Tgd::new("i", vec![a("R", &["x", "y"])], vec![a("R", &["y", "z"])]),
            Tgd::new("f", vec![a("accessible", &["x"]), a("R", &["x", "y"])], vec![a("accessible", &["y"])]),
            Tgd::new("t", vec![a("accessible", &["x"]), a("R", &["x", "y"])], vec![a("R'", &["x", "y"])]),
        ];
        let n = normalize_gtgds(&rules).unwrap();
        let mut e = ClosureEngine::new(&n, [sym("accessible")].into()).unwrap();
        let root = Instance::from_facts([
            Atom::new("R", vec![Term::constant("a"), Term::constant("b")]),
            Atom::new("accessible", vec![Term::constant("a")]),
        ]);
        let (qlin, roots) = build_q_lin(&mut e, &root).unwrap();
        let theta = build_theta(&e, &roots);
        assert!(all_linear(&theta.rules().tgds));
        assert!(is_acyclic(&theta.acyclic()));
        assert!(theta.lift.iter().all(|t| t.width() <= 1));
        // R'(x,y) ∧ R'(y,z): needs a lifted child.
        let q2 = Cq::boolean(vec![a("R'", &["x", "y"]), a("R'", &["y", "z"])]);
        let v = contains_from(
            &qlin,
            &theta.rules(),
            &q2,
            &Strategy::LinearDepthBounded { w: 1, sigma1: theta.lift.len(), sigma2: theta.acyclic().len() },
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(v.holds, Holds::Yes);
    }

    #[test]
    fn empty_rules() {
        let mut e = ClosureEngine::new(&Default::default(), [sym("accessible")].into()).unwrap();
        let root = Instance::from_facts([Atom::new("R", vec![Term::constant("a")])]);
        let (qlin, roots) = build_q_lin(&mut e, &root).unwrap();
        let theta = build_theta(&e, &roots);
        assert_eq!(qlin.len(), 2);
        assert_eq!(theta.forget.len(), 1);
        assert!(theta.instantiate.is_empty() && theta.lift.is_empty());
    }
}
