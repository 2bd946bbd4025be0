//! Service schemas: signature, constraints and access methods.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::model::{Signature, Sym};

/// Largest result bound accepted by validation.
pub const MAX_BOUND: u32 = i32::MAX as u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Bound {
    /// Returns every matching tuple.
    Unbounded,
    /// Returns at most `k` matching tuples, and all of them if there are at most `k`.
    Upper(u32),
    /// Returns all matching tuples if there are at most `k`, otherwise at least `k`.
    Lower(u32),
}

impl Bound {
    pub fn is_bounded(self) -> bool {
        !matches!(self, Bound::Unbounded)
    }
    pub fn k(self) -> Option<u32> {
        match self {
            Bound::Unbounded => None,
            Bound::Upper(k) | Bound::Lower(k) => Some(k),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AccessMethod {
    pub name: String,
    pub relation: Sym,
    /// 0-based input positions.
    pub inputs: BTreeSet<usize>,
    pub bound: Bound,
}

impl AccessMethod {
    pub fn new(name: impl Into<String>, relation: Sym, inputs: impl IntoIterator<Item = usize>, bound: Bound) -> Self {
        AccessMethod { name: name.into(), relation, inputs: inputs.into_iter().collect(), bound }
    }
    pub fn is_input_free(&self) -> bool {
        self.inputs.is_empty()
    }
    pub fn is_boolean(&self, arity: usize) -> bool {
        self.inputs.len() == arity
    }
}

impl fmt::Display for AccessMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ins: Vec<String> = self.inputs.iter().map(|p| (p + 1).to_string()).collect();
        write!(f, "method {} on {} input({})", self.name, self.relation, ins.join(","))?;
        match self.bound {
            Bound::Unbounded => Ok(()),
            Bound::Upper(k) => write!(f, " limit {k}"),
            Bound::Lower(k) => write!(f, " lowerlimit {k}"),
        }
    }
}

/// A relation introduced by a simplification to stand for a projection of a
/// base relation: `view(x̄) <-> ∃z̄ base(...)`. Kept so later pipeline stages
/// can recognise the generated IDs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionView {
    pub view: Sym,
    pub base: Sym,
    /// Base positions, in view order.
    pub positions: Vec<usize>,
    /// How many leading view positions are inputs of the replacement method.
    pub n_inputs: usize,
    /// The original result-bounded method.
    pub source_method: String,
    /// The unbounded method that replaced it.
    pub method: String,
    /// Names of the two generated IDs (base→view, view→base).
    pub to_view: String,
    pub from_view: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    pub signature: Signature,
    pub constraints: ConstraintSet,
    pub methods: Vec<AccessMethod>,
    pub views: Vec<ProjectionView>,
}

impl Schema {
    pub fn new(signature: Signature, constraints: ConstraintSet, methods: Vec<AccessMethod>) -> Self {
        Schema { signature, constraints, methods, views: Vec::new() }
    }

    pub fn arity(&self, rel: &str) -> usize {
        self.signature.arity(rel).unwrap_or(0)
    }

    pub fn methods_on<'a>(&'a self, rel: &'a str) -> impl Iterator<Item = &'a AccessMethod> + 'a {
        self.methods.iter().filter(move |m| &*m.relation == rel)
    }

    pub fn has_result_bounds(&self) -> bool {
        self.methods.iter().any(|m| m.bound.is_bounded())
    }

    pub fn is_view(&self, rel: &str) -> bool {
        self.views.iter().any(|v| &*v.view == rel)
    }

    /// Check every structural invariant; reports the first violation.
    pub fn validate(&self) -> Result<()> {
        for (name, info) in self.signature.relations() {
            if info.arity == 0 && !self.is_view(name) {
                return Err(Error::Validation(format!("relation {name} has arity 0")));
            }
        }
        self.constraints.check(&self.signature)?;
        let mut names = HashSet::new();
        for m in &self.methods {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Validation(format!("method {} declared twice", m.name)));
            }
            let n = self
                .signature
                .arity(&m.relation)
                .ok_or_else(|| Error::Validation(format!("method {} is on unknown relation {}", m.name, m.relation)))?;
            if let Some(&p) = m.inputs.iter().find(|&&p| p >= n) {
                return Err(Error::Validation(format!(
                    "method {} has input position {} but {} has arity {n}",
                    m.name,
                    p + 1,
                    m.relation
                )));
            }
            if let Some(k) = m.bound.k() {
                if k == 0 || k > MAX_BOUND {
                    return Err(Error::Validation(format!(
                        "method {} has result bound {k} outside 1..={MAX_BOUND}",
                        m.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every upper result bound becomes a lower bound with the same value.
    pub fn elim_upper_bounds(&self) -> Schema {
        let mut out = self.clone();
        for m in &mut out.methods {
            if let Bound::Upper(k) = m.bound {
                m.bound = Bound::Lower(k);
            }
        }
        out
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, info) in self.signature.relations() {
            writeln!(f, "relation {name}({})", info.attrs.join(", "))?;
        }
        for m in &self.methods {
            writeln!(f, "{m}")?;
        }
        write!(f, "{}", self.constraints)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sym;

    fn example1() -> Schema {
        let mut sig = Signature::new();
        sig.add_named("Prof", vec!["id".into(), "name".into(), "salary".into()]).unwrap();
        sig.add_named("Udirectory", vec!["id".into(), "address".into(), "phone".into()]).unwrap();
        Schema::new(
            sig,
            ConstraintSet::default(),
            vec![
                AccessMethod::new("pr", sym("Prof"), [0], Bound::Unbounded),
                AccessMethod::new("ud", sym("Udirectory"), [], Bound::Upper(100)),
            ],
        )
    }

    #[test]
    fn validate_examples() {
        let s = example1();
        s.validate().unwrap();
        let mut bad = s.clone();
        bad.methods.push(AccessMethod::new("x", sym("Nope"), [], Bound::Unbounded));
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.methods.push(AccessMethod::new("y", sym("Prof"), [3], Bound::Unbounded));
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.methods[0].bound = Bound::Upper(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn elim_upper_bounds_is_idempotent() {
        let s = example1();
        let e = s.elim_upper_bounds();
        assert_eq!(e.methods[1].bound, Bound::Lower(100));
        assert_eq!(e.methods[0].bound, Bound::Unbounded);
        assert_eq!(e.elim_upper_bounds(), e);
    }
}
