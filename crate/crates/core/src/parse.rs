//! The line-oriented problem format.
//!
//! ```text
//! # comments run to the end of the line
//! relation Prof(id, name, salary)
//! relation Udirectory(id, address, phone)
//! method pr on Prof input(id)
//! method ud on Udirectory input() limit 100     # or: lowerlimit 100
//! id: Prof(i,n,s) -> Udirectory(i,a,p)          # head-only variables are existential
//! tgd t1: R(x,y) & S(y) -> T(x)                 # optional rule name before ':'
//! fd Udirectory: id -> address                  # positions by name or 1-based number
//! option accessible-constants true
//! query Q2 :- Udirectory(i,a,p)
//! query Q1(n) :- Prof(i,n,"10000")              # constants in double quotes (or bare integers)
//! ```
//!
//! Relations must be declared before they are used. Constraints may not
//! mention constants, and names the pipeline generates (`accessible`,
//! anything starting with `_`, containing `__` or ending in `_acc`) are
//! reserved.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::constraints::{Fd, Tgd};
use crate::error::{Error, Result};
use crate::model::{sym, Atom, Cq, Signature, Term};
use crate::reduce::ACCESSIBLE;
use crate::schema::{AccessMethod, Bound, Schema};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedQuery {
    pub name: String,
    pub cq: Cq,
    /// 1-based source line.
    pub line: usize,
}

/// Settings a file may carry for itself; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileOptions {
    pub accessible_constants: Option<bool>,
    pub round_budget: Option<usize>,
    pub width_threshold: Option<usize>,
    /// Domain budget for oracle cross-checks of this file's queries.
    pub oracle_domain: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemFile {
    pub schema: Schema,
    pub queries: Vec<NamedQuery>,
    pub options: FileOptions,
}

impl ProblemFile {
    pub fn query(&self, name: &str) -> Option<&NamedQuery> {
        self.queries.iter().find(|q| q.name == name)
    }

    /// Render back into the text format; `parse_problem(p.to_text())`
    /// reproduces `p` up to source line numbers.
    pub fn to_text(&self) -> String {
        let sig = &self.schema.signature;
        let mut out = String::new();
        for (name, info) in sig.relations() {
            let _ = writeln!(out, "relation {name}({})", info.attrs.join(", "));
        }
        for m in &self.schema.methods {
            let attrs = &sig.info(&m.relation).expect("validated").attrs;
            let ins: Vec<&str> = m.inputs.iter().map(|&p| attrs[p].as_str()).collect();
            let _ = write!(out, "method {} on {} input({})", m.name, m.relation, ins.join(", "));
            let _ = match m.bound {
                Bound::Unbounded => writeln!(out),
                Bound::Upper(k) => writeln!(out, " limit {k}"),
                Bound::Lower(k) => writeln!(out, " lowerlimit {k}"),
            };
        }
        for t in &self.schema.constraints.tgds {
            let kw = if t.is_id() { "id" } else { "tgd" };
            let _ = writeln!(out, "{kw} {}: {} -> {}", t.name, atoms_text(&t.body), atoms_text(&t.head));
        }
        for f in &self.schema.constraints.fds {
            let attrs = &sig.info(&f.rel).expect("validated").attrs;
            let lhs: Vec<&str> = f.lhs.iter().map(|&p| attrs[p].as_str()).collect();
            let _ = writeln!(out, "fd {}: {} -> {}", f.rel, lhs.join(", "), attrs[f.rhs]);
        }
        let o = &self.options;
        if let Some(b) = o.accessible_constants {
            let _ = writeln!(out, "option accessible-constants {b}");
        }
        if let Some(n) = o.round_budget {
            let _ = writeln!(out, "option budget-rounds {n}");
        }
        if let Some(n) = o.width_threshold {
            let _ = writeln!(out, "option width {n}");
        }
        if let Some(n) = o.oracle_domain {
            let _ = writeln!(out, "option oracle-domain {n}");
        }
        for q in &self.queries {
            let head = if q.cq.free.is_empty() {
                String::new()
            } else {
                let f: Vec<&str> = q.cq.free.iter().map(|v| &**v).collect();
                format!("({})", f.join(", "))
            };
            let _ = writeln!(out, "query {}{head} :- {}", q.name, atoms_text(&q.cq.atoms));
        }
        out
    }
}

fn atoms_text(atoms: &[Atom]) -> String {
    let parts: Vec<String> = atoms
        .iter()
        .map(|a| {
            let args: Vec<String> = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => format!("\"{c}\""),
                    Term::Var(v) => v.to_string(),
                    Term::Null(n) => format!("{}", Term::Null(n.clone())),
                })
                .collect();
            format!("{}({})", a.rel, args.join(", "))
        })
        .collect();
    parts.join(", ")
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str, line: usize) -> Self {
        Cursor { s, pos: 0, line }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn ws(&mut self) {
        let r = self.rest();
        self.pos += r.len() - r.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.ws();
        self.rest().is_empty()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{tok}` at `{}`", self.rest().trim())))
        }
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.ws();
        let r = self.rest();
        let n = r
            .char_indices()
            .find(|&(i, c)| !(c == '_' || c.is_ascii_alphanumeric()) || (i == 0 && c.is_ascii_digit()))
            .map_or(r.len(), |(i, _)| i);
        if n == 0 {
            return Err(self.err(format!("expected a name at `{}`", r.trim())));
        }
        self.pos += n;
        Ok(&r[..n])
    }

    fn number(&mut self) -> Result<u64> {
        self.ws();
        let r = self.rest();
        let n = r.find(|c: char| !c.is_ascii_digit()).unwrap_or(r.len());
        let v = r[..n].parse().map_err(|_| self.err(format!("expected a number at `{}`", r.trim())))?;
        self.pos += n;
        Ok(v)
    }

    fn term(&mut self) -> Result<Term> {
        self.ws();
        let r = self.rest();
        if let Some(body) = r.strip_prefix('"') {
            let end = body.find('"').ok_or_else(|| self.err("unterminated string constant"))?;
            self.pos += end + 2;
            return Ok(Term::constant(&body[..end]));
        }
        if r.starts_with(|c: char| c.is_ascii_digit()) {
            return Ok(Term::constant(self.number()?.to_string()));
        }
        Ok(Term::var(self.ident()?))
    }

    fn atom(&mut self) -> Result<Atom> {
        let rel = self.ident()?;
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                args.push(self.term()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(Atom::new(rel, args))
    }

    /// Atoms separated by `,` or `&`, up to `stop` (not consumed) or the end.
    fn atoms(&mut self, stop: Option<&str>) -> Result<Vec<Atom>> {
        let mut out = vec![self.atom()?];
        loop {
            self.ws();
            if self.rest().is_empty() || stop.is_some_and(|s| self.rest().starts_with(s)) {
                return Ok(out);
            }
            if !self.eat(",") && !self.eat("&") {
                return Err(self.err(format!("expected `,` or `&` at `{}`", self.rest().trim())));
            }
            out.push(self.atom()?);
        }
    }

    fn end(&mut self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!("unexpected `{}`", self.rest().trim())))
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn reserved(name: &str) -> bool {
    name == ACCESSIBLE || name.starts_with('_') || name.contains("__") || name.ends_with("_acc")
}

struct Parser {
    file: ProblemFile,
    method_names: HashSet<String>,
    rule_names: HashSet<String>,
}

impl Parser {
    fn sig(&self) -> &Signature {
        &self.file.schema.signature
    }

    fn check_atom(&self, c: &Cursor, a: &Atom) -> Result<()> {
        self.sig().check_atom(a).map_err(|e| c.err(e.to_string()))
    }

    /// A position of `rel` given by attribute name or 1-based number.
    fn position(&self, c: &mut Cursor, rel: &str) -> Result<usize> {
        c.ws();
        let arity = self.sig().arity(rel).unwrap_or(0);
        if c.rest().starts_with(|ch: char| ch.is_ascii_digit()) {
            let n = c.number()? as usize;
            if n == 0 || n > arity {
                return Err(c.err(format!("position {n} is out of range for {rel} (arity {arity})")));
            }
            return Ok(n - 1);
        }
        let name = c.ident()?;
        self.sig().position_of(rel, name).ok_or_else(|| c.err(format!("{rel} has no attribute {name}")))
    }

    fn positions(&self, c: &mut Cursor, rel: &str, stop: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        c.ws();
        if c.rest().starts_with(stop) {
            return Ok(out);
        }
        loop {
            out.push(self.position(c, rel)?);
            c.ws();
            if c.rest().starts_with(stop) {
                return Ok(out);
            }
            c.expect(",")?;
        }
    }

    fn known_relation<'a>(&self, c: &Cursor, name: &'a str) -> Result<&'a str> {
        if self.sig().contains(name) {
            Ok(name)
        } else {
            Err(c.err(format!("unknown relation {name}")))
        }
    }

    fn relation(&mut self, c: &mut Cursor) -> Result<()> {
        let name = c.ident()?;
        if reserved(name) {
            return Err(c.err(format!("relation name {name} is reserved")));
        }
        c.expect("(")?;
        let mut attrs: Vec<String> = Vec::new();
        if !c.eat(")") {
            loop {
                let a = c.ident()?.to_string();
                if attrs.contains(&a) {
                    return Err(c.err(format!("attribute {a} repeated in {name}")));
                }
                attrs.push(a);
                if c.eat(")") {
                    break;
                }
                c.expect(",")?;
            }
        }
        c.end()?;
        if attrs.is_empty() {
            return Err(c.err(format!("relation {name} needs at least one attribute")));
        }
        self.file.schema.signature.add_named(name, attrs).map_err(|e| c.err(e.to_string()))
    }

    fn method(&mut self, c: &mut Cursor) -> Result<()> {
        let name = c.ident()?.to_string();
        if !self.method_names.insert(name.clone()) {
            return Err(c.err(format!("method {name} declared twice")));
        }
        c.expect("on")?;
        let rel = c.ident()?;
        let rel = self.known_relation(c, rel)?;
        c.expect("input")?;
        c.expect("(")?;
        let inputs = self.positions(c, rel, ")")?;
        c.expect(")")?;
        let bound = if c.eat("lowerlimit") {
            Bound::Lower(self.bound(c)?)
        } else if c.eat("limit") {
            Bound::Upper(self.bound(c)?)
        } else {
            Bound::Unbounded
        };
        c.end()?;
        self.file.schema.methods.push(AccessMethod::new(name, sym(rel), inputs, bound));
        Ok(())
    }

    fn bound(&self, c: &mut Cursor) -> Result<u32> {
        let k = c.number()?;
        if k == 0 || k > crate::schema::MAX_BOUND as u64 {
            return Err(c.err(format!("result bound {k} is out of range")));
        }
        Ok(k as u32)
    }

    fn rule_name(&mut self, c: &mut Cursor, kw: &str) -> Result<String> {
        let name = if c.eat(":") {
            let k = self.file.schema.constraints.tgds.len() + 1;
            format!("{kw}{k}")
        } else {
            let n = c.ident()?.to_string();
            c.expect(":")?;
            n
        };
        if !self.rule_names.insert(name.clone()) {
            return Err(c.err(format!("rule name {name} used twice")));
        }
        Ok(name)
    }

    fn tgd(&mut self, c: &mut Cursor, kw: &str) -> Result<()> {
        let name = self.rule_name(c, kw)?;
        let body = c.atoms(Some("->"))?;
        c.expect("->")?;
        let head = c.atoms(None)?;
        for a in body.iter().chain(&head) {
            self.check_atom(c, a)?;
            if a.args.iter().any(Term::is_const) {
                return Err(c.err(format!("constant in constraint atom {a}: constraints may not mention constants")));
            }
        }
        let t = Tgd::new(name, body, head);
        if kw == "id" && !t.is_id() {
            return Err(c.err(format!(
                "`{t}` is not an inclusion dependency (one atom each side, no repeated variables); use `tgd:`"
            )));
        }
        self.file.schema.constraints.tgds.push(t);
        Ok(())
    }

    fn fd(&mut self, c: &mut Cursor) -> Result<()> {
        let rel = c.ident()?;
        let rel = self.known_relation(c, rel)?;
        c.expect(":")?;
        let lhs = self.positions(c, rel, "->")?;
        c.expect("->")?;
        let rhs = self.position(c, rel)?;
        c.end()?;
        self.file.schema.constraints.fds.push(Fd::new(rel, lhs, rhs));
        Ok(())
    }

    fn option(&mut self, c: &mut Cursor) -> Result<()> {
        let key = c.s[c.pos..].split_whitespace().next().unwrap_or("").to_string();
        c.eat(&key);
        let o = &mut self.file.options;
        match key.as_str() {
            "accessible-constants" => {
                o.accessible_constants = Some(if c.eat("true") {
                    true
                } else if c.eat("false") {
                    false
                } else {
                    return Err(c.err("expected true or false"));
                })
            }
            "budget-rounds" => o.round_budget = Some(c.number()? as usize),
            "width" => o.width_threshold = Some(c.number()? as usize),
            "oracle-domain" => o.oracle_domain = Some(c.number()? as usize),
            _ => return Err(c.err(format!("unknown option `{key}`"))),
        }
        c.end()
    }

    fn query(&mut self, c: &mut Cursor) -> Result<()> {
        let name = c.ident()?.to_string();
        if self.file.query(&name).is_some() {
            return Err(c.err(format!("query {name} defined twice")));
        }
        let mut free = Vec::new();
        if c.eat("(") && !c.eat(")") {
            loop {
                free.push(sym(c.ident()?));
                if c.eat(")") {
                    break;
                }
                c.expect(",")?;
            }
        }
        c.expect(":-")?;
        let atoms = c.atoms(None)?;
        for a in &atoms {
            self.check_atom(c, a)?;
        }
        let cq = Cq { atoms, free };
        let vars = cq.vars();
        if let Some(v) = cq.free.iter().find(|v| !vars.contains(v)) {
            return Err(c.err(format!("head variable {v} does not occur in the body")));
        }
        self.file.queries.push(NamedQuery { name, cq, line: c.line });
        Ok(())
    }
}

/// Parse and validate a problem file. Errors carry the 1-based line.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let mut p = Parser { file: ProblemFile::default(), method_names: HashSet::new(), rule_names: HashSet::new() };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let mut c = Cursor::new(line, i + 1);
        let kw = c.ident()?;
        match kw {
            "relation" => p.relation(&mut c)?,
            "method" => p.method(&mut c)?,
            "id" | "tgd" => p.tgd(&mut c, kw)?,
            "fd" => p.fd(&mut c)?,
            "query" => p.query(&mut c)?,
            "option" => p.option(&mut c)?,
            _ => return Err(c.err(format!("unknown declaration `{kw}`"))),
        }
    }
    p.file.schema.validate()?;
    Ok(p.file)
}
