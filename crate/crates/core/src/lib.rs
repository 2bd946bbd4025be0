//! Decision procedures for monotone answerability of Boolean conjunctive
//! queries over schemas with access methods, result bounds and integrity
//! constraints.
//!
//! The pipeline for a query `Q` and schema `Sch`:
//!
//! 1. classify the constraints ([`constraints::ConstraintClass`]);
//! 2. simplify the result bounds away ([`simplify`]);
//! 3. reduce answerability to a containment `Q ⊆_Γ Q′` ([`reduce`]);
//! 4. decide the containment with a chase ([`chase`]), after linearizing the
//!    constraints where needed ([`linearize`]).
//!
//! [`decide::decide`] runs all of it. [`oracle`] holds brute-force checks used
//! by the test suites, [`parse`] reads the textual problem format and [`cli`]
//! drives the command-line tool.

pub mod chase;
pub mod cli;
pub mod constraints;
pub mod decide;
pub mod error;
pub mod linearize;
pub mod model;
pub mod oracle;
pub mod parse;
pub mod reduce;
pub mod schema;
pub mod simplify;

pub use error::{Error, Result};
