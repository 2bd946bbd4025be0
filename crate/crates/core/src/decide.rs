//! End-to-end deciders, one per constraint class, and the dispatcher.
//!
//! | class                  | simplification   | containment engine                      |
//! |------------------------|------------------|-----------------------------------------|
//! | FDs only               | FD               | restricted chase (always terminates)    |
//! | IDs only               | existence check  | Σ^Lin, depth-bounded linear chase       |
//! | UIDs + FDs             | choice           | closure + Θ, depth-bounded linear chase |
//! | frontier-guarded TGDs  | choice           | budgeted chase (semi-decision)          |
//! | anything else          | —                | none: `Unknown`                         |

use std::collections::BTreeSet;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::chase::{
    apply_fds, contains_from, restricted_chase_with, ChaseOptions, ChaseOutcome, Holds, Limits, Strategy,
};
use crate::constraints::{minimize_under_fds, ConstraintClass};
use crate::error::{Error, Result};
use crate::linearize::{
    build_i0_lin, build_q_lin, build_sigma_lin, build_theta, normalize_gtgds, saturate_truncated, ClosureEngine,
    TruncAxiom,
};
use crate::model::{canonical_database, evaluate_boolean, find_homomorphism, match_image, sym, Atom, Cq, Instance};
use crate::reduce::{
    amondet_containment, inline_all_axioms, normalize_id_result_bounds, rewrite_unbounded_axioms, split_access_axioms,
    ContainmentProblem, ACCESSIBLE,
};
use crate::schema::Schema;
use crate::simplify::{choice_simplification, existence_check_simplification, fd_simplification};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Answerable,
    NotAnswerable,
    Unknown(String),
}

impl Answer {
    pub fn label(&self) -> &'static str {
        match self {
            Answer::Answerable => "Answerable",
            Answer::NotAnswerable => "NotAnswerable",
            Answer::Unknown(_) => "Unknown",
        }
    }
    pub fn is_unknown(&self) -> bool {
        matches!(self, Answer::Unknown(_))
    }
}

/// Evidence for a verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The facts matched by `Q′` in the chase.
    ChaseProof {
        facts: Vec<Atom>,
    },
    /// No match of `Q′` within a depth that is complete for the rules.
    DepthBound {
        depth: usize,
    },
    /// The chase terminated without a match of `Q′`.
    Saturated {
        facts: usize,
    },
    /// The left side is unsatisfiable, so containment holds trivially.
    Vacuous {
        reason: String,
    },
    None,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub rounds: usize,
    pub facts: usize,
    pub depth: Option<usize>,
    /// FD merges performed by the final chase (FD route only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_merges: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: Answer,
    pub class: ConstraintClass,
    pub pipeline: Vec<String>,
    pub witness: Witness,
    pub stats: Stats,
    /// Textual Γ, when requested.
    pub gamma: Option<String>,
    /// Textual linear rules (Σ^Lin or Θ), when requested.
    pub theta: Option<String>,
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Verdict", 6)?;
        st.serialize_field("answer", self.answer.label())?;
        if let Answer::Unknown(r) = &self.answer {
            st.serialize_field("reason", r)?;
        }
        st.serialize_field("class", &self.class)?;
        st.serialize_field("pipeline", &self.pipeline)?;
        st.serialize_field("witness", &self.witness)?;
        st.serialize_field("stats", &self.stats)?;
        st.end()
    }
}

#[derive(Clone, Debug)]
pub struct DecideOptions {
    /// Largest ID width sent straight to the linearization; wider sets try a
    /// terminating chase first.
    pub width_threshold: usize,
    /// Rounds for budgeted chases (semi-decision, wide-ID pre-check).
    pub round_budget: usize,
    /// Facts any single chase may hold before giving up.
    pub fact_budget: usize,
    /// Seed `accessible(c)` for the constants of the query.
    pub accessible_constants: bool,
    pub class_override: Option<ConstraintClass>,
    /// Fill `Verdict::gamma` / `Verdict::theta`.
    pub dump: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            width_threshold: 2,
            round_budget: 200,
            fact_budget: 200_000,
            accessible_constants: false,
            class_override: None,
            dump: false,
        }
    }
}

struct Run<'a> {
    opts: &'a DecideOptions,
    class: ConstraintClass,
    pipeline: Vec<String>,
    gamma: Option<String>,
    theta: Option<String>,
}

impl<'a> Run<'a> {
    fn new(opts: &'a DecideOptions, class: ConstraintClass) -> Self {
        Run { opts, class, pipeline: Vec::new(), gamma: None, theta: None }
    }
    fn step(&mut self, s: impl Into<String>) {
        self.pipeline.push(s.into());
    }
    fn dump_gamma(&mut self, p: &ContainmentProblem) {
        if self.opts.dump {
            self.gamma = Some(p.to_string());
        }
    }
    fn finish(self, answer: Answer, witness: Witness, stats: Stats) -> Verdict {
        Verdict {
            answer,
            class: self.class,
            pipeline: self.pipeline,
            witness,
            stats,
            gamma: self.gamma,
            theta: self.theta,
        }
    }
    fn vacuous(self, reason: String) -> Verdict {
        self.finish(Answer::Answerable, Witness::Vacuous { reason }, Stats::default())
    }
}

fn check_input(sch: &Schema, q: &Cq) -> Result<()> {
    sch.validate()?;
    q.check(&sch.signature)?;
    if sch.signature.contains(ACCESSIBLE) {
        return Err(Error::Validation(format!("relation name {ACCESSIBLE} is reserved")));
    }
    Ok(())
}

/// Decide monotone answerability of `q` over `sch`, routing by constraint
/// class.
pub fn decide(sch: &Schema, q: &Cq, opts: &DecideOptions) -> Result<Verdict> {
    check_input(sch, q)?;
    let class = opts.class_override.unwrap_or_else(|| sch.constraints.classify());
    match class {
        ConstraintClass::PureFd => decide_fd(sch, q, opts),
        ConstraintClass::PureId { .. } => decide_id(sch, q, opts),
        ConstraintClass::UidPlusFd => decide_uidfd(sch, q, opts),
        ConstraintClass::FrontierGuardedTgd | ConstraintClass::FullGtgdPlusId => decide_semi(sch, q, opts, class),
        ConstraintClass::Unsupported => Ok(Verdict {
            answer: Answer::Unknown(
                "unsupported constraint class: monotone answerability is undecidable for general TGDs and FDs; \
                 no complete procedure applies"
                    .into(),
            ),
            class,
            pipeline: vec!["classify".into()],
            witness: Witness::None,
            stats: Stats::default(),
            gamma: None,
            theta: None,
        }),
    }
}

fn misclassified(route: &str, sch: &Schema) -> Error {
    Error::Misclassified(format!("{route} does not apply to constraints of class {}", sch.constraints.classify()))
}

fn from_holds(h: Holds, proof: Vec<Atom>, complete: Witness) -> (Answer, Witness) {
    match h {
        Holds::Yes => (Answer::Answerable, Witness::ChaseProof { facts: proof }),
        Holds::No => (Answer::NotAnswerable, complete),
        Holds::Unknown(r) => (Answer::Unknown(r), Witness::None),
    }
}

/// FDs only: FD simplification, then a restricted chase that provably
/// terminates once the rules that can never fire are dropped.
pub fn decide_fd(sch: &Schema, q: &Cq, opts: &DecideOptions) -> Result<Verdict> {
    check_input(sch, q)?;
    if !sch.constraints.tgds.is_empty() {
        return Err(misclassified("the FD decider", sch));
    }
    let mut run = Run::new(opts, ConstraintClass::PureFd);
    let s = sch.elim_upper_bounds();
    run.step("elim_upper_bounds");
    let s = fd_simplification(&s);
    run.step("fd_simplification");
    let p = amondet_containment(&s, q, opts.accessible_constants)?;
    run.step("amondet_containment");
    let mut p = rewrite_unbounded_axioms(&p);
    run.step("rewrite_unbounded_axioms");
    // View→base IDs on unprimed relations never fire (the view facts come
    // from base facts), nor do base′→view′ IDs on primed ones (the primed
    // base facts either come from a view′ fact or are copies of base facts
    // whose view fact is already there).
    let up: BTreeSet<&str> = s.views.iter().map(|v| v.from_view.as_str()).collect();
    let down: BTreeSet<String> = s.views.iter().map(|v| format!("{}'", v.to_view)).collect();
    p.sigma.tgds.retain(|t| !up.contains(t.name.as_str()));
    p.sigma_primed.tgds.retain(|t| !down.contains(&t.name));
    run.step("drop_never_firing_rules");
    run.dump_gamma(&p);

    let i0 = match apply_fds(&p.initial_instance(), &p.sigma.fds, None) {
        Ok((i, _)) => i,
        Err((a, b)) => return Ok(run.vacuous(format!("the query forces {a} = {b}"))),
    };
    run.step("minimize_under_fds");
    let budget = p.signature.len() * p.signature.max_arity().max(1) * i0.adom().len() + 4;
    let outcome = restricted_chase_with(
        &i0,
        &p.gamma(),
        &ChaseOptions { rounds: budget, max_facts: opts.fact_budget, trace: false },
    );
    run.step(format!("restricted_chase(budget={budget})"));
    let st = outcome.state();
    let stats = Stats { rounds: st.round, facts: st.instance.len(), depth: None, fd_merges: Some(st.fd_merges) };
    Ok(match &outcome {
        ChaseOutcome::Saturated(st) => match find_homomorphism(&p.right, &st.instance) {
            Some(h) => run.finish(Answer::Answerable, Witness::ChaseProof { facts: match_image(&p.right, &h) }, stats),
            None => run.finish(Answer::NotAnswerable, Witness::Saturated { facts: st.instance.len() }, stats),
        },
        ChaseOutcome::Failed { clash: (a, b), .. } => {
            let reason = format!("the chase forces {a} = {b}");
            run.finish(Answer::Answerable, Witness::Vacuous { reason }, stats)
        }
        ChaseOutcome::BudgetExhausted(_) => run.finish(
            Answer::Unknown(format!("FD chase did not saturate within {budget} rounds")),
            Witness::None,
            stats,
        ),
    })
}

/// The ID containment problem after simplification and normalization, ready
/// for linearization.
pub struct IdProblem {
    pub problem: ContainmentProblem,
    pub delta: Vec<TruncAxiom>,
    pub width: usize,
}

/// Record the rule-relevance pruning step and pass the pruned rules on.
fn prune<T>(run: &mut Run<'_>, before: usize, pruned: T, count: impl Fn(&T) -> usize) -> T {
    run.step(format!("prune_irrelevant(kept {}/{before})", count(&pruned)));
    pruned
}

/// Existence-check simplification, reduction, and axiom normalization for an
/// ID schema.
pub fn prepare_id_problem(sch: &Schema, q: &Cq, accessible_constants: bool) -> Result<(IdProblem, Vec<String>)> {
    let mut steps = Vec::new();
    let s = sch.elim_upper_bounds();
    steps.push("elim_upper_bounds".to_string());
    let s = existence_check_simplification(&s);
    steps.push("existence_check_simplification".into());
    let p = amondet_containment(&s, q, accessible_constants)?;
    steps.push("amondet_containment".into());
    let p = rewrite_unbounded_axioms(&p);
    steps.push("rewrite_unbounded_axioms".into());
    let p = normalize_id_result_bounds(&p, &s);
    steps.push("normalize_id_result_bounds".into());
    let (trunc, _) = split_access_axioms(&p);
    steps.push("split_access_axioms".into());
    let delta = trunc
        .iter()
        .map(|t| TruncAxiom::from_tgd(t).ok_or_else(|| Error::Strategy(format!("{t} is not a truncated axiom"))))
        .collect::<Result<Vec<_>>>()?;
    let width = p.sigma.max_id_width();
    Ok((IdProblem { problem: p, delta, width }, steps))
}

/// IDs only: existence-check simplification, then Σ^Lin and a depth-bounded
/// linear chase, which is complete for any width.
pub fn decide_id(sch: &Schema, q: &Cq, opts: &DecideOptions) -> Result<Verdict> {
    check_input(sch, q)?;
    if !sch.constraints.fds.is_empty() || !sch.constraints.tgds.iter().all(|t| t.is_id()) {
        return Err(misclassified("the ID decider", sch));
    }
    let mut run = Run::new(opts, ConstraintClass::PureId { width: sch.constraints.max_id_width() });
    let (ip, steps) = prepare_id_problem(sch, q, opts.accessible_constants)?;
    steps.into_iter().for_each(|s| run.step(s));
    let p = &ip.problem;
    run.dump_gamma(p);
    let limits = Limits { max_facts: opts.fact_budget, trace: false };

    if ip.width > opts.width_threshold {
        let v = contains_from(
            &p.initial_instance(),
            &p.gamma(),
            &p.right,
            &Strategy::TerminatingChase { rounds: opts.round_budget },
            &limits,
        )?;
        run.step(format!("restricted_chase(rounds={})", opts.round_budget));
        let stats = Stats { rounds: v.rounds, facts: v.facts, depth: None, fd_merges: None };
        if !matches!(v.holds, Holds::Unknown(_)) {
            let (answer, witness) = from_holds(v.holds, v.proof, Witness::Saturated { facts: v.facts });
            return Ok(run.finish(answer, witness, stats));
        }
    }

    let sat = saturate_truncated(&p.base, &p.sigma.tgds, &ip.delta, ip.width)?;
    run.step(format!("saturate_truncated(w={})", ip.width));
    let lin = build_sigma_lin(p, &sat);
    run.step("build_sigma_lin");
    let i0 = build_i0_lin(p, &sat);
    run.step("build_i0_lin");
    if opts.dump {
        run.theta = Some(lin.rules().to_string());
    }
    let lin = prune(&mut run, lin.rules().tgds.len(), lin.relevant_to(&p.right), |l| l.rules().tgds.len());
    let strategy =
        Strategy::LinearDepthBounded { w: ip.width, sigma1: lin.bounded().len(), sigma2: lin.acyclic().len() };
    let v = contains_from(&i0, &lin.rules(), &p.right, &strategy, &limits)?;
    let depth = v.depth.unwrap_or(0);
    run.step(format!("tree_chase_linear(depth={depth})"));
    let stats = Stats { rounds: v.rounds, facts: v.facts, depth: v.depth, fd_merges: None };
    let (answer, witness) = from_holds(v.holds, v.proof, Witness::DepthBound { depth });
    Ok(run.finish(answer, witness, stats))
}

/// UIDs and FDs: choice simplification, inlined axioms exporting determined
/// positions, minimization of the query under the FDs, then FDs dropped and
/// the remaining guarded rules linearized through the closure and Θ.
pub fn decide_uidfd(sch: &Schema, q: &Cq, opts: &DecideOptions) -> Result<Verdict> {
    check_input(sch, q)?;
    let cs = &sch.constraints;
    if !cs.tgds.iter().all(|t| t.is_id() && t.width() <= 1) || cs.fds.iter().any(|f| f.lhs.is_empty()) {
        return Err(misclassified("the UID+FD decider", sch));
    }
    let mut run = Run::new(opts, ConstraintClass::UidPlusFd);
    let s = choice_simplification(&sch.elim_upper_bounds());
    run.step("elim_upper_bounds");
    run.step("choice_simplification");
    let p = amondet_containment(&s, q, opts.accessible_constants)?;
    run.step("amondet_containment");
    let p = inline_all_axioms(&p, &cs.fds);
    run.step("inline_all_axioms");
    run.dump_gamma(&p);
    let qstar = match minimize_under_fds(&p.left, &cs.fds) {
        Ok(q) => q,
        Err(d) => return Ok(run.vacuous(format!("the query forces {} = {}", d.left, d.right))),
    };
    run.step("minimize_under_fds");
    let mut root: Instance = canonical_database(&qstar);
    root.extend(p.seeds.iter().cloned());
    let mut rules = p.sigma.tgds.clone();
    rules.extend(p.sigma_primed.tgds.iter().cloned());
    rules.extend(p.axioms.iter().map(|a| a.tgd.clone()));
    run.step("drop_fds");
    let norm = normalize_gtgds(&rules)?;
    run.step("normalize_gtgds");
    let w = norm.max_width();
    let mut engine = ClosureEngine::new(&norm, [sym(ACCESSIBLE)].into())?;
    let (qlin, roots) = build_q_lin(&mut engine, &root)?;
    run.step(format!("b_closure(b={w}, types={})", engine.num_types()));
    run.step("build_q_lin");
    let theta = build_theta(&engine, &roots);
    run.step("build_theta");
    if opts.dump {
        run.theta = Some(theta.to_string());
    }
    let theta = prune(&mut run, theta.rules().tgds.len(), theta.relevant_to(&p.right), |t| t.rules().tgds.len());
    let limits = Limits { max_facts: opts.fact_budget, trace: false };
    let strategy = Strategy::LinearDepthBounded { w, sigma1: theta.lift.len(), sigma2: theta.acyclic().len() };
    let v = contains_from(&qlin, &theta.rules(), &p.right, &strategy, &limits)?;
    let depth = v.depth.unwrap_or(0);
    run.step(format!("tree_chase_linear(depth={depth})"));
    let stats = Stats { rounds: v.rounds, facts: v.facts, depth: v.depth, fd_merges: None };
    let (answer, witness) = from_holds(v.holds, v.proof, Witness::DepthBound { depth });
    Ok(run.finish(answer, witness, stats))
}

/// Frontier-guarded TGDs: choice simplification and a budgeted chase. A match
/// proves answerability; a saturated chase without a match refutes it;
/// otherwise the verdict is `Unknown`.
pub fn decide_semi(sch: &Schema, q: &Cq, opts: &DecideOptions, class: ConstraintClass) -> Result<Verdict> {
    check_input(sch, q)?;
    if sch.constraints.tgds.iter().any(|t| t.has_constants()) {
        return Err(misclassified("the semi-decision route", sch));
    }
    let mut run = Run::new(opts, class);
    let s = choice_simplification(&sch.elim_upper_bounds());
    run.step("elim_upper_bounds");
    run.step("choice_simplification");
    let p = amondet_containment(&s, q, opts.accessible_constants)?;
    run.step("amondet_containment");
    run.dump_gamma(&p);
    let limits = Limits { max_facts: opts.fact_budget, trace: false };
    let v = contains_from(
        &p.initial_instance(),
        &p.gamma(),
        &p.right,
        &Strategy::SemiDecide { rounds: opts.round_budget },
        &limits,
    )?;
    run.step(format!("restricted_chase(rounds={})", opts.round_budget));
    let stats = Stats { rounds: v.rounds, facts: v.facts, depth: None, fd_merges: None };
    let (answer, witness) = from_holds(v.holds, v.proof, Witness::Saturated { facts: v.facts });
    Ok(run.finish(answer, witness, stats))
}

/// Containment `Q ⊆ Q′` checked directly on Γ with a budgeted restricted
/// chase, bypassing linearization. Used to cross-check the deciders.
pub fn chase_containment(p: &ContainmentProblem, rounds: usize, max_facts: usize) -> Holds {
    let out =
        restricted_chase_with(&p.initial_instance(), &p.gamma(), &ChaseOptions { rounds, max_facts, trace: false });
    match &out {
        ChaseOutcome::Failed { .. } => Holds::Yes,
        _ if evaluate_boolean(&p.right, out.instance()) => Holds::Yes,
        ChaseOutcome::Saturated(_) => Holds::No,
        _ => Holds::Unknown("budget".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConstraintSet, Fd, Tgd};
    use crate::model::{Signature, Term};
    use crate::schema::{AccessMethod, Bound};

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    fn example(ud: Bound, fd: bool, id: bool) -> Schema {
        let mut sig = Signature::new();
        sig.add_named("Prof", vec!["id".into(), "name".into(), "salary".into()]).unwrap();
        sig.add_named("Udirectory", vec!["id".into(), "address".into(), "phone".into()]).unwrap();
        let mut cs = ConstraintSet::default();
        if fd {
            cs.fds.push(Fd::new("Udirectory", [0], 1));
        }
        if id {
            cs.tgds.push(Tgd::new(
                "id1",
                vec![Atom::new("Prof", vec![v("i"), v("n"), v("s")])],
                vec![Atom::new("Udirectory", vec![v("i"), v("a"), v("p")])],
            ));
        }
        Schema::new(
            sig,
            cs,
            vec![
                AccessMethod::new("pr", sym("Prof"), [0], Bound::Unbounded),
                AccessMethod::new("ud", sym("Udirectory"), [], ud),
            ],
        )
    }

    fn q2() -> Cq {
        Cq::boolean(vec![Atom::new("Udirectory", vec![v("i"), v("a"), v("p")])])
    }

    #[test]
    fn example3_is_answerable() {
        let r = decide(&example(Bound::Upper(100), false, false), &q2(), &DecideOptions::default()).unwrap();
        assert_eq!(r.answer, Answer::Answerable);
        assert_eq!(r.class, ConstraintClass::PureId { width: 0 });
    }

    #[test]
    fn no_methods_is_not_answerable() {
        let mut s = example(Bound::Unbounded, false, false);
        s.methods.clear();
        let r = decide(&s, &q2(), &DecideOptions::default()).unwrap();
        assert_eq!(r.answer, Answer::NotAnswerable);
        assert!(matches!(r.witness, Witness::DepthBound { .. }));
    }

    #[test]
    fn misclassified_routes_are_rejected() {
        let s = example(Bound::Unbounded, true, true);
        assert!(matches!(decide_fd(&s, &q2(), &DecideOptions::default()), Err(Error::Misclassified(_))));
        assert!(matches!(decide_id(&s, &q2(), &DecideOptions::default()), Err(Error::Misclassified(_))));
    }

    #[test]
    fn fd_route_matches_uidfd_route() {
        let s = example(Bound::Upper(1), true, false);
        let q = Cq::boolean(vec![Atom::new("Udirectory", vec![Term::constant("c1"), Term::constant("c2"), v("p")])]);
        let opts = DecideOptions { accessible_constants: true, ..DecideOptions::default() };
        let a = decide_fd(&s, &q, &opts).unwrap();
        let b = decide_uidfd(&s, &q, &opts).unwrap();
        assert_eq!(a.answer, b.answer);
        assert_eq!(a.stats.fd_merges, Some(0));
    }

    #[test]
    fn verdict_json_shape() {
        let r = decide(&example(Bound::Upper(100), false, false), &q2(), &DecideOptions::default()).unwrap();
        let j = serde_json::to_value(&r).unwrap();
        assert_eq!(j["answer"], "Answerable");
        assert_eq!(j["class"], "PureID(0)");
        assert!(j["pipeline"].as_array().unwrap().len() > 3);
        assert_eq!(j["witness"]["kind"], "chase_proof");
        assert!(j["stats"]["facts"].as_u64().unwrap() > 0);
    }
}
