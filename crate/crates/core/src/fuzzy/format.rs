//! Line-oriented text format for fuzzy inference systems.
//!
//! ```text
//! version 1
//! output <name>
//! input <name> <lo> <hi>
//! mf <family> <p1> <p2> ...
//! rule <m1> <m2> ... -> <p1> ... <pn> <r>
//! ```
//!
//! `mf` lines attach to the most recent `input`. Rule antecedents are
//! zero-based MF indices, one per input in declaration order. Blank lines and
//! `#` comments are ignored. Serialization is canonical: parsing a serialized
//! system and serializing it again reproduces the bytes exactly.

use super::{FuzzyError, FuzzyInferenceSystem, FuzzyVariable, MembershipFunction, MfFamily, Rule};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: FuzzyError,
    },
    #[error("document is empty")]
    Empty,
    #[error("{0}")]
    Invalid(#[from] FuzzyError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Serializes a system to the canonical text form.
pub fn to_text(fis: &FuzzyInferenceSystem) -> String {
    let mut out = String::new();
    out.push_str("version 1\n");
    let _ = writeln!(out, "output {}", fis.output_name());
    for var in fis.inputs() {
        let (lo, hi) = var.universe();
        let _ = writeln!(out, "input {} {} {}", var.name(), lo, hi);
        for mf in var.mfs() {
            let _ = write!(out, "mf {}", mf.family().canonical_name());
            for p in mf.params() {
                let _ = write!(out, " {p}");
            }
            out.push('\n');
        }
    }
    for rule in fis.rules() {
        out.push_str("rule");
        for &mi in &rule.antecedent {
            let _ = write!(out, " {mi}");
        }
        out.push_str(" ->");
        for c in &rule.consequent {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    out
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ParseError> {
    tok.parse::<f64>()
        .map_err(|_| syntax(line, format!("expected a number, got `{tok}`")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(syntax(line, format!("non-finite number `{tok}`")))
            }
        })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, ParseError> {
    tok.parse::<usize>()
        .map_err(|_| syntax(line, format!("expected a non-negative integer, got `{tok}`")))
}

struct PendingInput {
    name: String,
    lo: f64,
    hi: f64,
    mfs: Vec<MembershipFunction>,
    line: usize,
}

/// Parses the canonical text form. Errors carry 1-based line numbers.
pub fn from_text(text: &str) -> Result<FuzzyInferenceSystem, ParseError> {
    let mut output_name: Option<String> = None;
    let mut pending: Vec<PendingInput> = Vec::new();
    let mut rules: Vec<Rule> = Vec::new();
    let mut saw_version = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();

        if !saw_version {
            if keyword != "version" {
                return Err(syntax(line, "first directive must be `version 1`"));
            }
            if rest != ["1"] {
                return Err(syntax(
                    line,
                    format!("unsupported version `{}`", rest.join(" ")),
                ));
            }
            saw_version = true;
            continue;
        }

        match keyword {
            "version" => return Err(syntax(line, "duplicate version directive")),
            "output" => {
                if output_name.is_some() {
                    return Err(syntax(line, "duplicate output directive"));
                }
                let [name] = rest[..] else {
                    return Err(syntax(line, "usage: output <name>"));
                };
                output_name = Some(name.to_string());
            }
            "input" => {
                let [name, lo, hi] = rest[..] else {
                    return Err(syntax(line, "usage: input <name> <lo> <hi>"));
                };
                pending.push(PendingInput {
                    name: name.to_string(),
                    lo: parse_f64(lo, line)?,
                    hi: parse_f64(hi, line)?,
                    mfs: Vec::new(),
                    line,
                });
            }
            "mf" => {
                let Some(target) = pending.last_mut() else {
                    return Err(syntax(line, "mf directive before any input"));
                };
                let Some((family_tok, param_toks)) = rest.split_first() else {
                    return Err(syntax(line, "usage: mf <family> <params...>"));
                };
                let Some(family) = MfFamily::parse(family_tok) else {
                    return Err(syntax(line, format!("unknown MF family `{family_tok}`")));
                };
                let params = param_toks
                    .iter()
                    .map(|t| parse_f64(t, line))
                    .collect::<Result<Vec<_>, _>>()?;
                let mf = MembershipFunction::new(family, params)
                    .map_err(|source| ParseError::Semantic { line, source })?;
                target.mfs.push(mf);
            }
            "rule" => {
                let Some(arrow) = rest.iter().position(|&t| t == "->") else {
                    return Err(syntax(line, "rule is missing `->`"));
                };
                let antecedent = rest[..arrow]
                    .iter()
                    .map(|t| parse_usize(t, line))
                    .collect::<Result<Vec<_>, _>>()?;
                let consequent = rest[arrow + 1..]
                    .iter()
                    .map(|t| parse_f64(t, line))
                    .collect::<Result<Vec<_>, _>>()?;
                if antecedent.is_empty() {
                    return Err(syntax(line, "rule has an empty antecedent"));
                }
                if consequent.is_empty() {
                    return Err(syntax(line, "rule has an empty consequent"));
                }
                rules.push(Rule::new(antecedent, consequent));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    if !saw_version {
        return Err(ParseError::Empty);
    }
    let Some(output_name) = output_name else {
        return Err(syntax(text.lines().count(), "missing output directive"));
    };

    let mut inputs = Vec::with_capacity(pending.len());
    for p in pending {
        let var = FuzzyVariable::new(p.name, p.lo, p.hi, p.mfs)
            .map_err(|source| ParseError::Semantic {
                line: p.line,
                source,
            })?;
        inputs.push(var);
    }

    Ok(FuzzyInferenceSystem::new(inputs, output_name, rules)?)
}
