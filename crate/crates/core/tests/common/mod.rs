//! Seeded generators of small schemas and queries shared by the integration
//! suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbanswer::constraints::{ConstraintSet, Fd, Tgd};
use rbanswer::model::{sym, Atom, Cq, Signature, Term};
use rbanswer::schema::{AccessMethod, Bound, Schema};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape limits for generated schemas.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub relations: usize,
    pub max_arity: usize,
    pub max_width: usize,
    pub ids: usize,
    pub fds: usize,
    pub bounded_methods: usize,
}

impl Shape {
    pub const PURE_ID: Shape = Shape { relations: 3, max_arity: 3, max_width: 2, ids: 3, fds: 0, bounded_methods: 2 };
    pub const PURE_FD: Shape = Shape { relations: 3, max_arity: 3, max_width: 0, ids: 0, fds: 2, bounded_methods: 2 };
    pub const UID_FD: Shape = Shape { relations: 3, max_arity: 3, max_width: 1, ids: 2, fds: 2, bounded_methods: 2 };
    pub const UID: Shape = Shape { relations: 3, max_arity: 3, max_width: 1, ids: 3, fds: 0, bounded_methods: 2 };
}

const RELS: [&str; 4] = ["R", "S", "T", "U"];

fn v(name: String) -> Term {
    Term::var(name)
}

fn signature(rng: &mut ChaCha8Rng, shape: &Shape) -> Signature {
    let n = rng.gen_range(1..=shape.relations);
    let mut sig = Signature::new();
    for r in &RELS[..n] {
        sig.add(r, rng.gen_range(1..=shape.max_arity)).unwrap();
    }
    sig
}

/// A random ID of width at most `max_width` between relations of `sig`.
pub fn random_id(rng: &mut ChaCha8Rng, sig: &Signature, max_width: usize, name: String) -> Tgd {
    let names: Vec<_> = sig.names().cloned().collect();
    let b = names.choose(rng).unwrap().clone();
    let h = names.choose(rng).unwrap().clone();
    let (ab, ah) = (sig.arity(&b).unwrap(), sig.arity(&h).unwrap());
    let body: Vec<Term> = (0..ab).map(|i| v(format!("x{i}"))).collect();
    let width = rng.gen_range(0..=max_width.min(ab).min(ah));
    let mut exported: Vec<usize> = (0..ab).collect();
    exported.shuffle(rng);
    exported.truncate(width);
    let mut slots: Vec<usize> = (0..ah).collect();
    slots.shuffle(rng);
    let mut head: Vec<Term> = (0..ah).map(|i| v(format!("z{i}"))).collect();
    for (k, &e) in exported.iter().enumerate() {
        head[slots[k]] = body[e].clone();
    }
    Tgd::new(name, vec![Atom { rel: b, args: body }], vec![Atom { rel: h, args: head }])
}

fn random_fd(rng: &mut ChaCha8Rng, sig: &Signature) -> Option<Fd> {
    let names: Vec<_> = sig.names().filter(|n| sig.arity(n).unwrap() >= 2).cloned().collect();
    let r = names.choose(rng)?;
    let a = sig.arity(r).unwrap();
    let rhs = rng.gen_range(0..a);
    let others: Vec<usize> = (0..a).filter(|&p| p != rhs).collect();
    let k = rng.gen_range(1..=others.len().min(2));
    let lhs: Vec<usize> = others.choose_multiple(rng, k).copied().collect();
    Some(Fd::new(&**r, lhs, rhs))
}

fn random_methods(rng: &mut ChaCha8Rng, sig: &Signature, bounded: usize) -> Vec<AccessMethod> {
    let mut out = Vec::new();
    let mut left = bounded;
    for r in sig.names() {
        let a = sig.arity(r).unwrap();
        for _ in 0..rng.gen_range(0..=2) {
            let inputs: Vec<usize> = (0..a).filter(|_| rng.gen_bool(0.35)).collect();
            let bound = if left > 0 && inputs.len() < a && rng.gen_bool(0.5) {
                left -= 1;
                Bound::Upper(rng.gen_range(1..=3))
            } else {
                Bound::Unbounded
            };
            out.push(AccessMethod::new(format!("m{}", out.len() + 1), r.clone(), inputs, bound));
        }
    }
    out
}

/// A random schema within `shape`.
pub fn random_schema(rng: &mut ChaCha8Rng, shape: &Shape) -> Schema {
    let sig = signature(rng, shape);
    let mut cs = ConstraintSet::default();
    for i in 0..rng.gen_range(0..=shape.ids) {
        cs.tgds.push(random_id(rng, &sig, shape.max_width, format!("id{}", i + 1)));
    }
    for _ in 0..rng.gen_range(0..=shape.fds) {
        if let Some(fd) = random_fd(rng, &sig) {
            if !cs.fds.contains(&fd) {
                cs.fds.push(fd);
            }
        }
    }
    if shape.fds > 0 && cs.fds.is_empty() {
        if let Some(fd) = random_fd(rng, &sig) {
            cs.fds.push(fd);
        }
    }
    let methods = random_methods(rng, &sig, shape.bounded_methods);
    Schema::new(sig, cs, methods)
}

/// A Boolean CQ of one or two atoms over three variables, occasionally with
/// a constant.
pub fn random_query(rng: &mut ChaCha8Rng, sig: &Signature) -> Cq {
    let names: Vec<_> = sig.names().cloned().collect();
    let n = rng.gen_range(1..=2);
    let atoms = (0..n)
        .map(|_| {
            let r = names.choose(rng).unwrap().clone();
            let args = (0..sig.arity(&r).unwrap())
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        Term::constant("c")
                    } else {
                        v(["x", "y", "w"].choose(rng).unwrap().to_string())
                    }
                })
                .collect();
            Atom { rel: r, args }
        })
        .collect();
    Cq::boolean(atoms)
}

/// `count` schema/query pairs of the given shape whose class matches `keep`.
pub fn cases(seed: u64, count: usize, shape: Shape, keep: impl Fn(&Schema) -> bool) -> Vec<(Schema, Cq)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let s = random_schema(&mut r, &shape);
        if !keep(&s) {
            continue;
        }
        let q = random_query(&mut r, &s.signature);
        out.push((s, q));
    }
    out
}

pub fn atom(rel: &str, args: &[&str]) -> Atom {
    Atom::new(rel, args.iter().map(|a| Term::var(*a)).collect())
}

pub fn method(name: &str, rel: &str, inputs: &[usize], bound: Bound) -> AccessMethod {
    AccessMethod::new(name, sym(rel), inputs.iter().copied(), bound)
}
