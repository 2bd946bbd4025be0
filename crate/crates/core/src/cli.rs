//! Command-line driver: parse problem files, decide every query, print
//! verdicts as text or JSON.
//!
//! Exit status: `0` when every query was decided, `2` when some verdict is
//! `Unknown`, `1` on any error (unreadable or invalid file, decider error, or
//! an oracle certificate contradicting an `Answerable` verdict).

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::ConstraintClass;
use crate::decide::{decide, Answer, DecideOptions, Verdict, Witness};
use crate::oracle::{search_with, CounterexampleCertificate, OracleOptions};
use crate::parse::{parse_problem, ProblemFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    #[value(name = "pure-id")]
    PureId,
    #[value(name = "pure-fd")]
    PureFd,
    #[value(name = "uid-fd")]
    UidFd,
    #[value(name = "fgtgd")]
    Fgtgd,
    #[value(name = "full-gtgd-id")]
    FullGtgdId,
}

impl ClassArg {
    fn class(self, width: usize) -> ConstraintClass {
        match self {
            ClassArg::PureId => ConstraintClass::PureId { width },
            ClassArg::PureFd => ConstraintClass::PureFd,
            ClassArg::UidFd => ConstraintClass::UidPlusFd,
            ClassArg::Fgtgd => ConstraintClass::FrontierGuardedTgd,
            ClassArg::FullGtgdId => ConstraintClass::FullGtgdPlusId,
        }
    }
}

/// Decide monotone answerability of the queries in schema files.
#[derive(Clone, Debug, Parser)]
#[command(name = "rbanswer", version)]
pub struct Cli {
    /// Problem files; several are processed in parallel.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Route through a specific decider instead of the detected class.
    #[arg(long, value_enum)]
    pub class_override: Option<ClassArg>,
    /// Largest ID width sent straight to linearization.
    #[arg(long)]
    pub width: Option<usize>,
    /// Round budget for budgeted chases.
    #[arg(long)]
    pub budget_rounds: Option<usize>,
    /// Make the query's constants accessible.
    #[arg(long)]
    pub accessible_constants: bool,
    /// Cross-check verdicts with the brute-force oracle up to this domain size.
    #[arg(long, value_name = "MAX_DOMAIN")]
    pub oracle: Option<usize>,
    /// Include the containment constraints Γ in the output.
    #[arg(long)]
    pub dump_gamma: bool,
    /// Include the linear rules (Σ^Lin or Θ) in the output.
    #[arg(long)]
    pub dump_theta: bool,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

/// Outcome of an oracle cross-check.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub max_domain: usize,
    pub candidates: usize,
    pub truncated: bool,
    pub certificate: Option<CounterexampleCertificate>,
    /// `false` only for an `Answerable` verdict with a certificate.
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryReport {
    pub query: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

/// Per-file settings after merging command-line flags over file options.
#[derive(Clone, Debug, Default)]
pub struct RunSettings {
    pub decide: DecideOptions,
    pub oracle_domain: Option<usize>,
}

impl RunSettings {
    pub fn for_file(cli: &Cli, file: &ProblemFile) -> RunSettings {
        let o = &file.options;
        let mut d = DecideOptions {
            accessible_constants: cli.accessible_constants || o.accessible_constants.unwrap_or(false),
            dump: cli.dump_gamma || cli.dump_theta,
            ..DecideOptions::default()
        };
        if let Some(w) = cli.width.or(o.width_threshold) {
            d.width_threshold = w;
        }
        if let Some(r) = cli.budget_rounds.or(o.round_budget) {
            d.round_budget = r;
        }
        d.class_override = cli.class_override.map(|c| c.class(file.schema.constraints.max_id_width()));
        RunSettings { decide: d, oracle_domain: cli.oracle }
    }
}

/// Decide every query of a parsed file.
pub fn run_problem(file: &ProblemFile, settings: &RunSettings) -> crate::Result<Vec<QueryReport>> {
    file.queries
        .iter()
        .map(|nq| {
            let verdict = decide(&file.schema, &nq.cq, &settings.decide)?;
            let oracle = match settings.oracle_domain {
                Some(d) => {
                    let opts = OracleOptions {
                        accessible_constants: settings.decide.accessible_constants,
                        ..OracleOptions::new(d)
                    };
                    let rep = search_with(&file.schema, &nq.cq, &opts)?;
                    let consistent = !(verdict.answer == Answer::Answerable && rep.certificate.is_some());
                    Some(OracleCheck {
                        max_domain: d,
                        candidates: rep.candidates,
                        truncated: rep.truncated,
                        certificate: rep.certificate,
                        consistent,
                    })
                }
                None => None,
            };
            Ok(QueryReport { query: nq.name.clone(), gamma: None, theta: None, verdict, oracle })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FileResult {
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    results: Vec<QueryReport>,
}

fn process(cli: &Cli, path: &PathBuf) -> FileResult {
    let name = path.display().to_string();
    let go = || -> crate::Result<Vec<QueryReport>> {
        let text = std::fs::read_to_string(path)?;
        let file = parse_problem(&text)?;
        let mut reports = run_problem(&file, &RunSettings::for_file(cli, &file))?;
        for r in &mut reports {
            if cli.dump_gamma {
                r.gamma = r.verdict.gamma.clone();
            }
            if cli.dump_theta {
                r.theta = r.verdict.theta.clone();
            }
        }
        Ok(reports)
    };
    match go() {
        Ok(results) => FileResult { file: name, error: None, results },
        Err(e) => FileResult { file: name, error: Some(e.to_string()), results: Vec::new() },
    }
}

fn witness_text(w: &Witness) -> String {
    match w {
        Witness::ChaseProof { facts } => {
            let f: Vec<String> = facts.iter().map(|a| a.to_string()).collect();
            format!("chase proof: {}", f.join(", "))
        }
        Witness::DepthBound { depth } => format!("no match within complete depth {depth}"),
        Witness::Saturated { facts } => format!("chase saturated with {facts} facts, no match"),
        Witness::Vacuous { reason } => format!("vacuous: {reason}"),
        Witness::None => String::new(),
    }
}

fn print_text(out: &mut dyn Write, results: &[FileResult]) -> std::io::Result<()> {
    for f in results {
        if let Some(e) = &f.error {
            writeln!(out, "{}: error: {e}", f.file)?;
            continue;
        }
        for r in &f.results {
            let v = &r.verdict;
            let reason = match &v.answer {
                Answer::Unknown(why) => format!(" ({why})"),
                _ => String::new(),
            };
            writeln!(
                out,
                "{} {}: {}{reason} [{}] {}",
                f.file,
                r.query,
                v.answer.label(),
                v.class,
                witness_text(&v.witness)
            )?;
            if let Some(o) = &r.oracle {
                let what = match (&o.certificate, o.consistent) {
                    (_, false) => "CONFLICT: certificate found for an Answerable verdict".to_string(),
                    (Some(c), _) => format!("certificate at domain {}", c.domain),
                    (None, _) => format!("no certificate up to domain {}", o.max_domain),
                };
                writeln!(out, "  oracle: {what}")?;
            }
            if let Some(g) = &r.gamma {
                writeln!(out, "  gamma:\n{}", indent(g))?;
            }
            if let Some(t) = &r.theta {
                writeln!(out, "  linear rules:\n{}", indent(t))?;
            }
        }
    }
    Ok(())
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n")
}

/// Run the command line; returns the exit status.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let results: Vec<FileResult> = cli.files.par_iter().map(|p| process(cli, p)).collect();
    let printed = if cli.json {
        let doc: Vec<serde_json::Value> = results
            .iter()
            .flat_map(|f| match &f.error {
                Some(e) => vec![serde_json::json!({ "file": f.file, "error": e })],
                None => f
                    .results
                    .iter()
                    .map(|r| {
                        let mut v = serde_json::to_value(r).expect("reports serialize");
                        v.as_object_mut().expect("object").insert("file".into(), f.file.clone().into());
                        v
                    })
                    .collect(),
            })
            .collect();
        serde_json::to_writer_pretty(&mut *out, &doc).map_err(std::io::Error::from).and_then(|_| writeln!(out))
    } else {
        print_text(out, &results)
    };
    if let Err(e) = printed {
        let _ = writeln!(err, "rbanswer: cannot write output: {e}");
        return 1;
    }
    let mut code = 0;
    for f in &results {
        if let Some(e) = &f.error {
            let _ = writeln!(err, "rbanswer: {}: {e}", f.file);
            code = 1;
        }
        for r in &f.results {
            if r.oracle.as_ref().is_some_and(|o| !o.consistent) {
                let _ = writeln!(err, "rbanswer: {} {}: oracle certificate contradicts Answerable", f.file, r.query);
                code = 1;
            }
            if r.verdict.answer.is_unknown() && code == 0 {
                code = 2;
            }
        }
    }
    code
}
