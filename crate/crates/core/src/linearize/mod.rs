//! Linearization: rewriting guarded constraints into linear TGDs over
//! annotated relations, so that containment can be decided by a chase tree
//! of bounded depth.
//!
//! Two constructions live here:
//!
//! * the specialised one for IDs plus accessibility axioms
//!   ([`truncated`], [`sigma_lin`]): relations are annotated with the set of
//!   positions known to be accessible;
//! * the general one for IDs plus full guarded TGDs over a side signature
//!   ([`closure`], [`theta`]): relations are annotated with a whole local
//!   type (equality pattern plus side facts).

pub mod closure;
pub mod sigma_lin;
pub mod theta;
pub mod truncated;

use std::collections::BTreeSet;

use petgraph::graphmap::DiGraphMap;

use crate::constraints::Tgd;
use crate::model::{sym, Cq, Sym};

pub use closure::{b_closure, normalize_gtgds, ClosureEngine, LAtom, Normalized, SuitableGtgd, TypeKey};
pub use sigma_lin::{annotated, build_i0_lin, build_sigma_lin, SigmaLin};
pub use theta::{build_q_lin, build_theta, Theta};
pub use truncated::{saturate_truncated, Saturation, TruncAxiom};

/// Subsets of `positions` with at most `w` elements, ordered by size and then
/// lexicographically.
pub fn small_subsets(positions: &[usize], w: usize) -> Vec<BTreeSet<usize>> {
    let mut sorted: Vec<usize> = positions.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = vec![BTreeSet::new()];
    for size in 1..=w.min(sorted.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| sorted[i]).collect());
            // Advance to the next combination in lexicographic order.
            let mut i = size;
            while i > 0 && idx[i - 1] == sorted.len() - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Every rule has exactly one body atom and one head atom.
pub fn all_linear(rules: &[Tgd]) -> bool {
    rules.iter().all(Tgd::is_linear)
}

/// The relation-level dependency graph of `rules` (body relation → head
/// relation) has no cycle. This implies an acyclic position graph.
pub fn is_acyclic(rules: &[Tgd]) -> bool {
    let mut g: DiGraphMap<&str, ()> = DiGraphMap::new();
    for r in rules {
        for b in &r.body {
            for h in &r.head {
                g.add_edge(&*b.rel, &*h.rel, ());
            }
        }
    }
    !petgraph::algo::is_cyclic_directed(&g)
}

/// Relations from which some relation in `targets` can be derived by
/// `rules` (including the targets themselves).
pub fn relations_reaching(rules: &[Tgd], targets: impl IntoIterator<Item = Sym>) -> BTreeSet<Sym> {
    let mut g: DiGraphMap<&str, ()> = DiGraphMap::new();
    for r in rules {
        for b in &r.body {
            for h in &r.head {
                g.add_edge(&*h.rel, &*b.rel, ());
            }
        }
    }
    let mut out: BTreeSet<Sym> = BTreeSet::new();
    for t in targets {
        if g.contains_node(&t) {
            let mut dfs = petgraph::visit::Dfs::new(&g, &*t);
            while let Some(n) = dfs.next(&g) {
                out.insert(sym(n));
            }
        }
        out.insert(t);
    }
    out
}

/// Keep the rules whose head can contribute to a match of `q`. For linear
/// rules a fact of a relation of `q` is derived through a chain of rules
/// whose head relations all reach `q`, so dropping the others changes
/// neither the matches of `q` nor, for a subset of the rules, the validity
/// of a depth bound.
pub fn relevant_rules(rules: &[Tgd], q: &Cq) -> Vec<bool> {
    let reach = relations_reaching(rules, q.atoms.iter().map(|a| a.rel.clone()));
    rules.iter().map(|r| r.head.iter().any(|h| reach.contains(&h.rel))).collect()
}
