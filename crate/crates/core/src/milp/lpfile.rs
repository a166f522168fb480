//! CPLEX LP text format: writer, reader, and a plain solution-file reader.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{MilpModel, Sense, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 6;

/// Replaces characters the LP grammar does not allow in names.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E') {
        out.insert(0, '_');
    }
    out
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    for (idx, &(j, a)) in terms.iter().enumerate() {
        if idx > 0 && idx % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        if a < 0.0 {
            let _ = write!(out, " - {} {}", -a, names[j]);
        } else if idx == 0 {
            let _ = write!(out, " {} {}", a, names[j]);
        } else {
            let _ = write!(out, " + {} {}", a, names[j]);
        }
    }
}

/// Writes the model in CPLEX LP format with variables in declaration order.
pub fn export_lp(model: &MilpModel) -> String {
    let names: Vec<String> = model.variables.iter().map(|v| sanitize_name(&v.name)).collect();
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let mut obj = model.objective.clone();
    obj.sort_by_key(|t| t.0);
    write_terms(&mut out, &obj, &names);
    if model.objective_offset != 0.0 {
        let off = model.objective_offset;
        let _ = write!(out, " {} {}", if off < 0.0 { "-" } else { "+" }, off.abs());
    }
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let name = if c.name.is_empty() {
            format!("c{i}")
        } else {
            sanitize_name(&c.name)
        };
        let _ = write!(out, " {name}:");
        if c.terms.is_empty() {
            // the grammar needs at least one variable
            if let Some(first) = names.first() {
                let _ = write!(out, " 0 {first}");
            }
        }
        write_terms(&mut out, &c.terms, &names);
        let _ = writeln!(out, " {} {}", c.sense, c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables.iter().zip(&names) {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == v.upper {
            let _ = writeln!(out, " {name} = {}", v.lower);
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", fmt_bound(v.lower), fmt_bound(v.upper));
        }
    }
    let bins: Vec<&String> = model
        .variables
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(TERMS_PER_LINE * 2) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(&'static str),
    Colon,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~[]^*".contains(c)
}

fn tokenize(text: &str, line: usize) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op = match two.as_str() {
            "<=" | "=<" => Some(("<=", 2)),
            ">=" | "=>" => Some((">=", 2)),
            _ => match c {
                '<' => Some(("<=", 1)),
                '>' => Some((">=", 1)),
                '=' => Some(("=", 1)),
                '+' => Some(("+", 1)),
                '-' => Some(("-", 1)),
                _ => None,
            },
        };
        if let Some((o, len)) = op {
            toks.push((Tok::Op(o), line));
            i += len;
            continue;
        }
        if c == ':' {
            toks.push((Tok::Colon, line));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[st..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number '{s}'"),
            })?;
            toks.push((Tok::Num(v), line));
            continue;
        }
        if is_name_char(c) {
            let st = i;
            while i < chars.len() && is_name_char(chars[i]) {
                i += 1;
            }
            let s: String = chars[st..i].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => toks.push((Tok::Num(f64::INFINITY), line)),
                _ => toks.push((Tok::Name(s), line)),
            }
            continue;
        }
        return Err(Error::Parse {
            line,
            message: format!("unexpected character '{c}'"),
        });
    }
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_header(line: &str) -> Option<(Section, bool)> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    match l.as_str() {
        "minimize" | "minimum" | "min" => Some((Section::Objective, false)),
        "maximize" | "maximum" | "max" => Some((Section::Objective, true)),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some((Section::Constraints, false)),
        "bounds" | "bound" => Some((Section::Bounds, false)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, false)),
        "end" => Some((Section::End, false)),
        "generals" | "general" | "gen" | "semi-continuous" | "sos" => Some((Section::None, true)),
        _ => None,
    }
}

struct Builder {
    model: MilpModel,
    index: HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.model.add_continuous(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), j);
        j
    }
}

/// Parses `[name:] ±c x ± ...` up to a sense operator or the end.
fn parse_linear(
    toks: &[(Tok, usize)],
    pos: &mut usize,
    b: &mut Builder,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while *pos < toks.len() {
        let (t, line) = &toks[*pos];
        match t {
            Tok::Op("+") => {
                *pos += 1;
            }
            Tok::Op("-") => {
                sign = -sign;
                *pos += 1;
            }
            Tok::Op(_) => break,
            Tok::Num(v) => {
                if let Some(c) = coef {
                    // two numbers in a row: previous one was a constant
                    constant += sign * c;
                    sign = 1.0;
                }
                coef = Some(*v);
                *pos += 1;
            }
            Tok::Name(n) => {
                let j = b.var(n);
                let c = sign * coef.unwrap_or(1.0);
                match terms.iter_mut().find(|t| t.0 == j) {
                    Some(t) => t.1 += c,
                    None => terms.push((j, c)),
                }
                sign = 1.0;
                coef = None;
                *pos += 1;
            }
            Tok::Colon => {
                return Err(Error::Parse {
                    line: *line,
                    message: "unexpected ':'".into(),
                })
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

fn signed_number(toks: &[(Tok, usize)], pos: &mut usize, line: usize) -> Result<f64> {
    let mut sign = 1.0;
    while let Some((Tok::Op(o), _)) = toks.get(*pos) {
        match *o {
            "-" => sign = -sign,
            "+" => {}
            _ => break,
        }
        *pos += 1;
    }
    match toks.get(*pos) {
        Some((Tok::Num(v), _)) => {
            *pos += 1;
            Ok(sign * v)
        }
        _ => Err(Error::Parse {
            line,
            message: "expected a number".into(),
        }),
    }
}

fn sense_of(op: &str) -> Sense {
    match op {
        "<=" => Sense::Le,
        ">=" => Sense::Ge,
        _ => Sense::Eq,
    }
}

/// Splits a section's text into statements: each starts at a line holding `name:`
/// or, failing that, ends at a line containing a sense operator.
fn statements(lines: &[(usize, String)]) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    let mut cur: Option<(usize, String)> = None;
    for (ln, text) in lines {
        let has_label = text.contains(':');
        if has_label {
            if let Some(c) = cur.take() {
                out.push(c);
            }
        }
        match &mut cur {
            Some((_, s)) => {
                s.push(' ');
                s.push_str(text);
            }
            None => cur = Some((*ln, text.clone())),
        }
        let complete = {
            let s = &cur.as_ref().unwrap().1;
            let after_op = s.rfind(['<', '>', '=']).map(|p| s[p + 1..].trim().to_string());
            matches!(after_op, Some(ref rest) if !rest.is_empty())
        };
        if complete {
            out.push(cur.take().unwrap());
        }
    }
    if let Some(c) = cur {
        out.push(c);
    }
    out
}

/// Parses CPLEX LP text. Variables not bounded explicitly default to `[0, +inf)`.
pub fn parse_lp(text: &str) -> Result<MilpModel> {
    let mut sections: Vec<(Section, bool, Vec<(usize, String)>)> = Vec::new();
    let mut current = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = match raw.find('\\') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some((sec, flag)) = section_header(line) {
            if sec == Section::None && flag {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("unsupported section '{}'", line.trim()),
                });
            }
            current = sec;
            sections.push((sec, flag, Vec::new()));
            continue;
        }
        if current == Section::End {
            break;
        }
        match sections.last_mut() {
            Some(s) => s.2.push((ln, line.to_string())),
            None => {
                return Err(Error::Parse {
                    line: ln,
                    message: "content before the objective section".into(),
                })
            }
        }
    }
    let mut b = Builder {
        model: MilpModel::new(),
        index: HashMap::new(),
    };
    let mut binaries: Vec<String> = Vec::new();
    let mut bounds: Vec<(usize, String)> = Vec::new();
    for (sec, maximize, lines) in sections {
        match sec {
            Section::Objective => {
                let joined: String = lines.iter().map(|l| l.1.as_str()).collect::<Vec<_>>().join(" ");
                let line = lines.first().map_or(0, |l| l.0);
                let body = match joined.find(':') {
                    Some(p) => joined[p + 1..].to_string(),
                    None => joined,
                };
                let toks = tokenize(&body, line)?;
                let mut pos = 0;
                let (terms, constant) = parse_linear(&toks, &mut pos, &mut b)?;
                if pos < toks.len() {
                    return Err(Error::Parse {
                        line,
                        message: "objective contains a sense operator".into(),
                    });
                }
                let s = if maximize { -1.0 } else { 1.0 };
                b.model.objective = terms.into_iter().map(|(j, a)| (j, s * a)).collect();
                b.model.objective_offset = s * constant;
            }
            Section::Constraints => {
                for (ln, stmt) in statements(&lines) {
                    let (name, body) = match stmt.find(':') {
                        Some(p) => (stmt[..p].trim().to_string(), stmt[p + 1..].to_string()),
                        None => (format!("c{}", b.model.constraints.len()), stmt.clone()),
                    };
                    let toks = tokenize(&body, ln)?;
                    let mut pos = 0;
                    let (terms, constant) = parse_linear(&toks, &mut pos, &mut b)?;
                    let op = match toks.get(pos) {
                        Some((Tok::Op(o), _)) if matches!(*o, "<=" | ">=" | "=") => *o,
                        _ => {
                            return Err(Error::Parse {
                                line: ln,
                                message: format!("constraint '{name}' lacks a sense"),
                            })
                        }
                    };
                    pos += 1;
                    let rhs = signed_number(&toks, &mut pos, ln)?;
                    if pos != toks.len() {
                        return Err(Error::Parse {
                            line: ln,
                            message: format!("trailing tokens in constraint '{name}'"),
                        });
                    }
                    b.model.add_constraint(name, terms, sense_of(op), rhs - constant);
                }
            }
            Section::Bounds => bounds.extend(lines),
            Section::Binaries => {
                for (_, l) in lines {
                    binaries.extend(l.split_whitespace().map(str::to_string));
                }
            }
            Section::None | Section::End => {}
        }
    }
    for name in &binaries {
        let j = b.var(name);
        let v = &mut b.model.variables[j];
        v.kind = VarKind::Binary;
        v.lower = 0.0;
        v.upper = 1.0;
    }
    for (ln, line) in bounds {
        apply_bound(&mut b, &line, ln)?;
    }
    Ok(b.model)
}

fn apply_bound(b: &mut Builder, line: &str, ln: usize) -> Result<()> {
    let toks = tokenize(line, ln)?;
    let err = |m: &str| Error::Parse {
        line: ln,
        message: m.to_string(),
    };
    if let [(Tok::Name(n), _), (Tok::Name(f), _)] = toks.as_slice() {
        if f.eq_ignore_ascii_case("free") {
            let j = b.var(n);
            b.model.variables[j].lower = f64::NEG_INFINITY;
            b.model.variables[j].upper = f64::INFINITY;
            return Ok(());
        }
    }
    let mut pos = 0;
    let name_at = toks.iter().position(|t| matches!(t.0, Tok::Name(_))).ok_or_else(|| err("bound without variable"))?;
    let Tok::Name(name) = &toks[name_at].0 else { unreachable!() };
    let j = b.var(name);
    if name_at > 0 {
        // l <= x [<= u]
        let lo = signed_number(&toks, &mut pos, ln)?;
        let op = match toks.get(pos) {
            Some((Tok::Op(o), _)) => *o,
            _ => return Err(err("expected an operator")),
        };
        let v = &mut b.model.variables[j];
        match op {
            "<=" => v.lower = lo,
            ">=" => v.upper = lo,
            _ => {
                v.lower = lo;
                v.upper = lo;
            }
        }
        pos = name_at + 1;
        if pos < toks.len() {
            let op = match toks.get(pos) {
                Some((Tok::Op(o), _)) => *o,
                _ => return Err(err("expected an operator")),
            };
            pos += 1;
            let hi = signed_number(&toks, &mut pos, ln)?;
            let v = &mut b.model.variables[j];
            match op {
                "<=" => v.upper = hi,
                ">=" => v.lower = hi,
                _ => return Err(err("bad bound")),
            }
        }
    } else {
        pos = 1;
        let op = match toks.get(pos) {
            Some((Tok::Op(o), _)) => *o,
            _ => return Err(err("expected an operator")),
        };
        pos += 1;
        let val = signed_number(&toks, &mut pos, ln)?;
        let v = &mut b.model.variables[j];
        match op {
            "<=" => v.upper = val,
            ">=" => v.lower = val,
            _ => {
                v.lower = val;
                v.upper = val;
            }
        }
    }
    if pos != toks.len() {
        return Err(err("trailing tokens in bound"));
    }
    Ok(())
}

/// A solution produced by an external solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImportedSolution {
    pub status: Option<String>,
    pub objective: Option<f64>,
    pub values: HashMap<String, f64>,
}

/// Reads lines `name value`, `objective value` and `status word`.
pub fn import_solution(text: &str) -> Result<ImportedSolution> {
    let mut sol = ImportedSolution::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap();
        let val = it.next().ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: format!("'{key}' has no value"),
        })?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: idx + 1,
                message: "expected two fields".into(),
            });
        }
        let num = || {
            val.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad number '{val}'"),
            })
        };
        match key {
            "status" => sol.status = Some(val.to_string()),
            "objective" => sol.objective = Some(num()?),
            _ => {
                sol.values.insert(key.to_string(), num()?);
            }
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_has_only_headers() {
        let text = export_lp(&MilpModel::new());
        assert_eq!(text, "Minimize\n obj:\nSubject To\nBounds\nEnd\n");
        let back = parse_lp(&text).unwrap();
        assert!(back.variables.is_empty() && back.constraints.is_empty());
    }

    #[test]
    fn one_constraint_round_trip() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", -1.5, 10.0);
        let y = m.add_binary("y");
        m.add_constraint("c1", vec![(x, 2.5), (y, -1e-7)], Sense::Le, -3.25);
        m.set_objective(vec![(x, 1.0), (y, -2.0)]);
        let back = parse_lp(&export_lp(&m)).unwrap();
        assert_eq!(back.constraints[0].terms, m.constraints[0].terms);
        assert_eq!(back.constraints[0].rhs, -3.25);
        assert_eq!(back.constraints[0].sense, Sense::Le);
        assert_eq!(back.variables, m.variables);
        assert_eq!(back.objective, m.objective);
    }

    #[test]
    fn parses_hand_written_file() {
        let text = "\\ comment\nMaximize\n obj: x + 2 y\nSubject To\n c1: x + y\n   <= 4\n -x + 3 y >= -2\nBounds\n 0 <= x <= 3\n y <= 5\nEnd\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.objective, vec![(0, -1.0), (1, -2.0)]);
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.constraints[1].terms, vec![(0, -1.0), (1, 3.0)]);
        assert_eq!(m.constraints[1].rhs, -2.0);
        assert_eq!(m.variables[1].upper, 5.0);
    }

    #[test]
    fn parse_error_names_line() {
        let err = parse_lp("Minimize\n obj: x\nSubject To\n c: x ? 3\nEnd\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn solution_file() {
        let s = import_solution("status optimal\nobjective -1\nx 1\ny 0\n").unwrap();
        assert_eq!(s.status.as_deref(), Some("optimal"));
        assert_eq!(s.objective, Some(-1.0));
        assert_eq!(s.values["x"], 1.0);
        assert!(import_solution("x\n").is_err());
    }
}
