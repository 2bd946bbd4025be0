//! Schema simplifications that remove result bounds (existence-check, FD,
//! choice) and the table that picks one per constraint class.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::constraints::{detby, ConstraintClass, Tgd};
use crate::model::{sym, Atom, Sym, Term};
use crate::schema::{AccessMethod, Bound, ProjectionView, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SimplificationKind {
    ExistenceCheck,
    FdSimplification,
    Choice,
    NoneApplicable,
}

/// Pick the simplification matching the schema's constraint class.
pub fn select_simplification(sch: &Schema) -> SimplificationKind {
    select_for_class(sch.constraints.classify())
}

pub fn select_for_class(class: ConstraintClass) -> SimplificationKind {
    match class {
        ConstraintClass::PureId { .. } => SimplificationKind::ExistenceCheck,
        ConstraintClass::PureFd => SimplificationKind::FdSimplification,
        ConstraintClass::UidPlusFd | ConstraintClass::FrontierGuardedTgd | ConstraintClass::FullGtgdPlusId => {
            SimplificationKind::Choice
        }
        ConstraintClass::Unsupported => SimplificationKind::NoneApplicable,
    }
}

/// `base` if unused, otherwise `base_2`, `base_3`, ...
fn fresh_name(taken: impl Fn(&str) -> bool, base: String) -> String {
    if !taken(&base) {
        return base;
    }
    (2..).map(|i| format!("{base}_{i}")).find(|n| !taken(n)).expect("unbounded search")
}

fn var(prefix: &str, pos: usize) -> Term {
    Term::var(format!("{prefix}{}", pos + 1))
}

/// Replace every result-bounded method by a projection view plus an
/// unbounded method on it. `positions` chooses, for a method, the base
/// positions kept by the view (inputs first); `boolean` makes the new method
/// take every view position as input.
fn project_bounded(sch: &Schema, positions: impl Fn(&AccessMethod) -> Vec<usize>, boolean: bool) -> Schema {
    let mut out = sch.clone();
    out.methods.clear();
    for m in &sch.methods {
        if !m.bound.is_bounded() {
            out.methods.push(m.clone());
            continue;
        }
        let base = &m.relation;
        let arity = sch.arity(base);
        let pos = positions(m);
        let vname: Sym = sym(fresh_name(|n| out.signature.contains(n), format!("{base}__{}", m.name)));
        let info = sch.signature.info(base).expect("validated schema");
        let attrs: Vec<String> = pos.iter().map(|&p| info.attrs[p].clone()).collect();
        out.signature.add_named(&vname, attrs).expect("fresh relation name");

        let all: Vec<Term> = (0..arity).map(|p| var("x", p)).collect();
        let kept: Vec<Term> = pos.iter().map(|&p| var("x", p)).collect();
        let partial: Vec<Term> = (0..arity).map(|p| if pos.contains(&p) { var("x", p) } else { var("z", p) }).collect();
        let to_view = format!("{vname}:down");
        let from_view = format!("{vname}:up");
        out.constraints.tgds.push(Tgd::new(
            to_view.clone(),
            vec![Atom { rel: base.clone(), args: all }],
            vec![Atom { rel: vname.clone(), args: kept.clone() }],
        ));
        out.constraints.tgds.push(Tgd::new(
            from_view.clone(),
            vec![Atom { rel: vname.clone(), args: kept }],
            vec![Atom { rel: base.clone(), args: partial }],
        ));

        let n_inputs = m.inputs.len();
        let new_inputs: BTreeSet<usize> = if boolean { (0..pos.len()).collect() } else { (0..n_inputs).collect() };
        let mname =
            fresh_name(|n| sch.methods.iter().chain(out.methods.iter()).any(|x| x.name == n), format!("{}'", m.name));
        out.methods.push(AccessMethod {
            name: mname.clone(),
            relation: vname.clone(),
            inputs: new_inputs,
            bound: Bound::Unbounded,
        });
        out.views.push(ProjectionView {
            view: vname,
            base: base.clone(),
            positions: pos,
            n_inputs,
            source_method: m.name.clone(),
            method: mname,
            to_view,
            from_view,
        });
    }
    out
}

/// Each result-bounded method becomes a Boolean existence test on the
/// projection of its relation to the input positions.
pub fn existence_check_simplification(sch: &Schema) -> Schema {
    project_bounded(sch, |m| m.inputs.iter().copied().collect(), true)
}

/// Each result-bounded method becomes an unbounded method on the projection
/// to the positions its inputs functionally determine (inputs first, then
/// the other determined positions, both ascending).
pub fn fd_simplification(sch: &Schema) -> Schema {
    let fds = sch.constraints.fds.clone();
    project_bounded(
        sch,
        |m| {
            let det = detby(&m.relation, &m.inputs, &fds);
            let mut pos: Vec<usize> = m.inputs.iter().copied().collect();
            pos.extend(det.iter().copied().filter(|p| !m.inputs.contains(p)));
            pos
        },
        false,
    )
}

/// Every result bound (upper or lower) becomes an upper bound of 1.
pub fn choice_simplification(sch: &Schema) -> Schema {
    let mut out = sch.clone();
    for m in &mut out.methods {
        if m.bound.is_bounded() {
            m.bound = Bound::Upper(1);
        }
    }
    out
}
