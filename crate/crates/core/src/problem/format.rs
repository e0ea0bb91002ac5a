//! Sectioned text format for problems (see `docs/problem-format.md`).

use super::{ConeBlock, PolyhedralSet, Problem, ProblemKind, Scenario};
use crate::expr::Expression;
use crate::linalg::{self, Vector};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line} [{section}]: {message}")]
pub struct FormatError {
    pub line: usize,
    pub section: String,
    pub message: String,
}

#[derive(Default)]
struct Builder {
    dim: Option<usize>,
    kind: Option<ProblemKind>,
    name: Option<String>,
    at: Option<Vector>,
    eps: Vec<(String, f64)>,
    scenarios: Vec<Scenario>,
    blocks: Vec<ConeBlock>,
    set: Option<PolyhedralSet>,
}

enum Section {
    Problem,
    Scenario { f: Option<Expression>, psi: Option<f64> },
    NlpIneq(Vec<Expression>),
    NlpEq(Vec<Expression>),
    Soc { g: Vec<(usize, Expression)>, dirs: Vec<Vector> },
    Sdp { size: Option<usize>, entries: Vec<(usize, usize, Expression)>, dirs: Vec<Vector> },
    SemiInf { g: Option<Expression>, grid: Option<Vector> },
    Set,
}

impl Section {
    fn name(&self) -> &'static str {
        match self {
            Section::Problem => "problem",
            Section::Scenario { .. } => "scenario",
            Section::NlpIneq(_) => "nlp_ineq",
            Section::NlpEq(_) => "nlp_eq",
            Section::Soc { .. } => "soc",
            Section::Sdp { .. } => "sdp",
            Section::SemiInf { .. } => "semiinf",
            Section::Set => "set",
        }
    }
}

pub fn parse_problem(text: &str) -> Result<Problem, super::ProblemError> {
    let mut b = Builder::default();
    let mut current: Option<(Section, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let section_name = current.as_ref().map_or("", |(s, _)| s.name()).to_string();
        let err = |message: String| FormatError {
            line: line_no,
            section: section_name.clone(),
            message,
        };
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(err("unterminated section header".into()).into());
            }
            if let Some((s, start)) = current.take() {
                finish(&mut b, s, start)?;
            }
            let name = line[1..line.len() - 1].trim();
            let section = match name {
                "problem" => Section::Problem,
                "scenario" => Section::Scenario { f: None, psi: None },
                "nlp_ineq" => Section::NlpIneq(Vec::new()),
                "nlp_eq" => Section::NlpEq(Vec::new()),
                "soc" => Section::Soc { g: Vec::new(), dirs: Vec::new() },
                "sdp" => Section::Sdp { size: None, entries: Vec::new(), dirs: Vec::new() },
                "semiinf" => Section::SemiInf { g: None, grid: None },
                "set" => Section::Set,
                other => return Err(err(format!("unknown section [{other}]")).into()),
            };
            if !matches!(section, Section::Problem) && b.dim.is_none() {
                return Err(FormatError {
                    line: line_no,
                    section: name.to_string(),
                    message: "[problem] with dim must come first".into(),
                }
                .into());
            }
            current = Some((section, line_no));
            continue;
        }
        let Some((section, _)) = current.as_mut() else {
            return Err(err("key outside of any section".into()).into());
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err("expected key = value".into()).into());
        };
        let key = key.trim();
        let value = unquote(value.trim()).map_err(&err)?;
        let dim = b.dim.unwrap_or(0);
        let expr = |v: &str| Expression::parse(v, dim).map_err(|e| err(format!("{key}: {e}")));
        match section {
            Section::Problem => match key {
                "dim" => {
                    let d: usize = value.parse().map_err(|_| err(format!("bad dim '{value}'")))?;
                    if d == 0 {
                        return Err(err("dim must be at least 1".into()).into());
                    }
                    b.dim = Some(d);
                }
                "kind" => {
                    b.kind = Some(match value.as_str() {
                        "minimax" => ProblemKind::Minimax,
                        "chebyshev" => ProblemKind::Chebyshev,
                        other => return Err(err(format!("unknown kind '{other}'")).into()),
                    })
                }
                "name" => b.name = Some(value),
                "at" => b.at = Some(parse_list(&value).map_err(&err)?),
                k if k.starts_with("eps_") => {
                    let v = parse_num(&value).map_err(&err)?;
                    b.eps.push((k.to_string(), v));
                }
                _ => return Err(err(format!("unknown key '{key}'")).into()),
            },
            Section::Scenario { f, psi } => match key {
                "f" => *f = Some(expr(&value)?),
                "psi" => *psi = Some(parse_num(&value).map_err(&err)?),
                _ => return Err(err(format!("unknown key '{key}'")).into()),
            },
            Section::NlpIneq(g) => match key {
                "g" => g.push(expr(&value)?),
                _ => return Err(err(format!("unknown key '{key}'")).into()),
            },
            Section::NlpEq(bs) => match key {
                "b" => bs.push(expr(&value)?),
                _ => return Err(err(format!("unknown key '{key}'")).into()),
            },
            Section::Soc { g, dirs } => {
                if key == "dir" {
                    dirs.push(parse_list(&value).map_err(&err)?);
                } else if let Some(k) = key.strip_prefix('g').and_then(|s| s.parse::<usize>().ok()) {
                    g.push((k, expr(&value)?));
                } else {
                    return Err(err(format!("unknown key '{key}'")).into());
                }
            }
            Section::Sdp { size, entries, dirs } => {
                if key == "size" {
                    *size = Some(value.parse().map_err(|_| err(format!("bad size '{value}'")))?);
                } else if key == "dir" {
                    dirs.push(parse_list(&value).map_err(&err)?);
                } else if let Some((i, j)) = parse_entry_key(key) {
                    entries.push((i, j, expr(&value)?));
                } else {
                    return Err(err(format!("unknown key '{key}'")).into());
                }
            }
            Section::SemiInf { g, grid } => match key {
                "g" => {
                    *g = Some(
                        Expression::parse_with_param(&value, dim)
                            .map_err(|e| err(format!("g: {e}")))?,
                    )
                }
                "grid" => *grid = Some(parse_grid(&value).map_err(&err)?),
                _ => return Err(err(format!("unknown key '{key}'")).into()),
            },
            Section::Set => {
                let set = b.set.get_or_insert_with(|| PolyhedralSet::whole_space(dim));
                match key {
                    "lb" | "ub" => {
                        let vals = parse_list(&value).map_err(&err)?;
                        let vals = if vals.len() == 1 { vec![vals[0]; dim] } else { vals };
                        if vals.len() != dim {
                            return Err(err(format!("{key} needs {dim} entries")).into());
                        }
                        if key == "lb" {
                            set.lb = vals;
                        } else {
                            set.ub = vals;
                        }
                    }
                    "eq" => {
                        let (row, rhs) = parse_linear_equality(&value, dim).map_err(&err)?;
                        set.eq_rows.push(row);
                        set.eq_rhs.push(rhs);
                    }
                    _ => {
                        let indexed = key
                            .strip_prefix("lb(")
                            .map(|r| (true, r))
                            .or_else(|| key.strip_prefix("ub(").map(|r| (false, r)));
                        let Some((is_lb, rest)) = indexed else {
                            return Err(err(format!("unknown key '{key}'")).into());
                        };
                        let i: usize = rest
                            .strip_suffix(')')
                            .and_then(|s| s.trim().parse().ok())
                            .filter(|i| (1..=dim).contains(i))
                            .ok_or_else(|| err(format!("bad coordinate in '{key}'")))?;
                        let v = parse_num(&value).map_err(&err)?;
                        if is_lb {
                            set.lb[i - 1] = v;
                        } else {
                            set.ub[i - 1] = v;
                        }
                    }
                }
            }
        }
    }
    if let Some((s, start)) = current.take() {
        finish(&mut b, s, start)?;
    }
    let dim = b.dim.ok_or_else(|| FormatError {
        line: 1,
        section: "problem".into(),
        message: "missing [problem] dim".into(),
    })?;
    let mut p = Problem::new(dim, b.kind.unwrap_or(ProblemKind::Minimax));
    p.name = b.name;
    p.scenarios = b.scenarios;
    p.blocks = b.blocks;
    if let Some(set) = b.set {
        p.set_a = set;
    }
    for (k, v) in b.eps {
        let slot = match k.as_str() {
            "eps_active" => &mut p.tolerances.eps_active,
            "eps_rank" => &mut p.tolerances.eps_rank,
            "eps_det" => &mut p.tolerances.eps_det,
            "eps_feas" => &mut p.tolerances.eps_feas,
            "eps_pos" => &mut p.tolerances.eps_pos,
            _ => {
                return Err(super::ProblemError::Invalid(format!("unknown tolerance {k}")));
            }
        };
        *slot = v;
    }
    if let Some(at) = b.at {
        if at.len() != dim {
            return Err(super::ProblemError::Invalid(format!(
                "candidate point has {} entries, dim is {dim}",
                at.len()
            )));
        }
        p.candidate = Some(at);
    }
    p.validate()?;
    Ok(p)
}

fn finish(b: &mut Builder, s: Section, start: usize) -> Result<(), FormatError> {
    let section = s.name();
    let err = |message: &str| FormatError {
        line: start,
        section: section.to_string(),
        message: message.to_string(),
    };
    match s {
        Section::Problem | Section::Set => {}
        Section::Scenario { f, psi } => {
            let f = f.ok_or_else(|| err("scenario needs f"))?;
            b.scenarios.push(Scenario { f, psi });
        }
        Section::NlpIneq(g) => b.blocks.push(ConeBlock::NlpIneq { g }),
        Section::NlpEq(bs) => b.blocks.push(ConeBlock::NlpEq { b: bs }),
        Section::Soc { mut g, dirs } => {
            g.sort_by_key(|(k, _)| *k);
            if g.iter().enumerate().any(|(i, (k, _))| i != *k) {
                return Err(err("soc components must be g0, g1, ... without gaps or repeats"));
            }
            b.blocks.push(ConeBlock::Soc {
                g: g.into_iter().map(|(_, e)| e).collect(),
                dirs,
            });
        }
        Section::Sdp { size, entries, dirs } => {
            let l = size.ok_or_else(|| err("sdp needs size"))?;
            let mut slots: Vec<Option<Expression>> = vec![None; l * l];
            for (i, j, e) in entries {
                if i == 0 || j == 0 || i > l || j > l {
                    return Err(err("entry index out of range"));
                }
                let (i, j) = (i - 1, j - 1);
                if let Some(prev) = &slots[i * l + j] {
                    if *prev != e {
                        return Err(err("entry given twice with different expressions"));
                    }
                }
                if i != j {
                    if let Some(prev) = &slots[j * l + i] {
                        if *prev != e {
                            return Err(err("sdp matrix is not symmetric"));
                        }
                    }
                    slots[j * l + i] = Some(e.clone());
                }
                slots[i * l + j] = Some(e);
            }
            let dim = b.dim.unwrap_or(0);
            let entries = slots
                .into_iter()
                .map(|s| s.unwrap_or_else(|| Expression::parse("0", dim).expect("constant")))
                .collect();
            b.blocks.push(ConeBlock::Sdp { size: l, entries, dirs });
        }
        Section::SemiInf { g, grid } => {
            let g = g.ok_or_else(|| err("semiinf needs g"))?;
            let grid = grid.ok_or_else(|| err("semiinf needs grid"))?;
            b.blocks.push(ConeBlock::SemiInfinite { g, grid });
        }
    }
    Ok(())
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> Result<String, String> {
    if let Some(rest) = v.strip_prefix('"') {
        rest.strip_suffix('"')
            .map(str::to_string)
            .ok_or_else(|| "unterminated string".to_string())
    } else {
        Ok(v.to_string())
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("bad number '{}'", s.trim()))
}

/// Comma separated numbers; `inf`/`-inf` allowed.
pub fn parse_list(s: &str) -> Result<Vector, String> {
    s.split(',').map(parse_num).collect()
}

fn parse_entry_key(key: &str) -> Option<(usize, usize)> {
    let inner = key.strip_prefix("entry(")?.strip_suffix(')')?;
    let (i, j) = inner.split_once(',')?;
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}

/// `a:b:n` (n evenly spaced points including both ends) or a comma list.
fn parse_grid(s: &str) -> Result<Vector, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = if parts.len() == 3 {
        let a = parse_num(parts[0])?;
        let b = parse_num(parts[1])?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad grid count '{}'", parts[2]))?;
        if n == 0 || (n == 1 && a != b) || b < a {
            return Err("grid a:b:n needs a <= b and n >= 1".into());
        }
        if n == 1 {
            vec![a]
        } else {
            (0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect()
        }
    } else {
        parse_list(s)?
    };
    if grid.iter().any(|t| !t.is_finite()) {
        return Err("grid points must be finite".into());
    }
    Ok(grid)
}

/// `linear expression = linear expression` to a row `a` and right side `c` with `a·x = c`.
fn parse_linear_equality(s: &str, dim: usize) -> Result<(Vector, f64), String> {
    let (lhs, rhs) = s
        .split_once('=')
        .ok_or_else(|| "equality needs '='".to_string())?;
    let diff = format!("({}) - ({})", lhs.trim(), rhs.trim());
    let e = Expression::parse(&diff, dim).map_err(|e| e.to_string())?;
    let zero = vec![0.0; dim];
    let at0 = e.eval2(&zero).map_err(|e| e.to_string())?;
    let probe: Vector = (0..dim).map(|i| 1.0 + 0.37 * i as f64).collect();
    let at1 = e.eval2(&probe).map_err(|e| e.to_string())?;
    let predicted = at0.value + linalg::dot(&at0.grad, &probe);
    let curved = at0.hess.iter().chain(&at1.hess).any(|h| *h != 0.0);
    if curved || (predicted - at1.value).abs() > 1e-9 * (1.0 + at1.value.abs()) {
        return Err("equalities of A must be linear".into());
    }
    if linalg::norm(&at0.grad) == 0.0 {
        return Err("equality row is zero".into());
    }
    Ok((at0.grad, -at0.value))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Serialises a problem in the text format; `parse_problem` reads it back unchanged.
pub fn write_problem(p: &Problem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[problem]");
    if let Some(name) = &p.name {
        let _ = writeln!(s, "name = \"{name}\"");
    }
    let _ = writeln!(s, "dim = {}", p.dim);
    let kind = match p.kind {
        ProblemKind::Minimax => "minimax",
        ProblemKind::Chebyshev => "chebyshev",
    };
    let _ = writeln!(s, "kind = {kind}");
    if let Some(at) = &p.candidate {
        let _ = writeln!(s, "at = \"{}\"", fmt_list(at));
    }
    let t = p.tolerances;
    let _ = writeln!(s, "eps_active = {:?}", t.eps_active);
    let _ = writeln!(s, "eps_rank = {:?}", t.eps_rank);
    let _ = writeln!(s, "eps_det = {:?}", t.eps_det);
    let _ = writeln!(s, "eps_feas = {:?}", t.eps_feas);
    let _ = writeln!(s, "eps_pos = {:?}", t.eps_pos);
    for sc in &p.scenarios {
        let _ = writeln!(s, "\n[scenario]\nf = \"{}\"", sc.f);
        if let Some(psi) = sc.psi {
            let _ = writeln!(s, "psi = {psi:?}");
        }
    }
    for block in &p.blocks {
        let _ = writeln!(s, "\n[{}]", block.kind_name());
        match block {
            ConeBlock::NlpIneq { g } => {
                for e in g {
                    let _ = writeln!(s, "g = \"{e}\"");
                }
            }
            ConeBlock::NlpEq { b } => {
                for e in b {
                    let _ = writeln!(s, "b = \"{e}\"");
                }
            }
            ConeBlock::Soc { g, dirs } => {
                for (k, e) in g.iter().enumerate() {
                    let _ = writeln!(s, "g{k} = \"{e}\"");
                }
                for v in dirs {
                    let _ = writeln!(s, "dir = \"{}\"", fmt_list(v));
                }
            }
            ConeBlock::Sdp { size, entries, dirs } => {
                let _ = writeln!(s, "size = {size}");
                for i in 0..*size {
                    for j in i..*size {
                        let _ = writeln!(s, "entry({},{}) = \"{}\"", i + 1, j + 1, entries[i * size + j]);
                    }
                }
                for q in dirs {
                    let _ = writeln!(s, "dir = \"{}\"", fmt_list(q));
                }
            }
            ConeBlock::SemiInfinite { g, grid } => {
                let _ = writeln!(s, "g = \"{g}\"");
                let _ = writeln!(s, "grid = \"{}\"", fmt_list(grid));
            }
        }
    }
    if !p.set_a.is_whole_space() {
        let _ = writeln!(s, "\n[set]");
        let _ = writeln!(s, "lb = \"{}\"", fmt_list(&p.set_a.lb));
        let _ = writeln!(s, "ub = \"{}\"", fmt_list(&p.set_a.ub));
        for (row, rhs) in p.set_a.eq_rows.iter().zip(&p.set_a.eq_rhs) {
            let lhs = row
                .iter()
                .enumerate()
                .map(|(i, a)| format!("{a:?}*x({})", i + 1))
                .collect::<Vec<_>>()
                .join(" + ");
            let _ = writeln!(s, "eq = \"{lhs} = {rhs:?}\"");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemError;

    const SAMPLE: &str = r#"
# a bit of everything
[problem]
name = "sample"
dim = 3
at = "0, 0, 1"

[scenario]
f = "x(1)^2 + x(3)"

[nlp_ineq]
g = "x(1) - 1"
g = "x(2) - 1"

[soc]
g0 = "x(3)"
g1 = "x(1)"
g2 = "x(2)"
dir = "0.6, 0.8"

[sdp]
size = 2
entry(1,1) = "x(1) - 1"
entry(1,2) = "x(2)"
entry(2,2) = "-1"

[semiinf]
g = "x(1) - t^2 - 1"   # comment after value
grid = 0:1:5

[set]
lb = "-inf, -inf, 0"
eq = "x(1) + 2*x(2) = 0"
"#;

    #[test]
    fn parses_all_sections() {
        let p = parse_problem(SAMPLE).unwrap();
        assert_eq!(p.dim, 3);
        assert_eq!(p.name.as_deref(), Some("sample"));
        assert_eq!(p.candidate, Some(vec![0.0, 0.0, 1.0]));
        assert_eq!(p.blocks.len(), 4);
        match &p.blocks[3] {
            ConeBlock::SemiInfinite { grid, .. } => assert_eq!(grid, &vec![0.0, 0.25, 0.5, 0.75, 1.0]),
            _ => panic!(),
        }
        assert_eq!(p.sdp_matrix(&p.blocks[2], &[2.0, 3.0, 0.0]).unwrap(), vec![vec![1.0, 3.0], vec![3.0, -1.0]]);
        assert_eq!(p.set_a.eq_rows, vec![vec![1.0, 2.0, 0.0]]);
        assert_eq!(p.set_a.eq_rhs, vec![0.0]);
        assert_eq!(p.set_a.lb[2], 0.0);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let p = parse_problem(SAMPLE).unwrap();
        let text = write_problem(&p);
        let q = parse_problem(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn errors_carry_section_and_line() {
        let e = parse_problem("[problem]\ndim = 2\n[scenario]\nf = \"x(3)\"\n").unwrap_err();
        match e {
            ProblemError::Format(f) => {
                assert_eq!(f.line, 4);
                assert_eq!(f.section, "scenario");
            }
            other => panic!("{other}"),
        }
        assert!(parse_problem("[scenario]\nf=\"1\"\n").is_err());
        assert!(parse_problem("[problem]\ndim=1\n[bogus]\n").is_err());
        assert!(parse_problem("[problem]\ndim=1\nkind=chebyshev\n[scenario]\nf=\"x(1)\"\n").is_err());
        assert!(parse_problem("[problem]\ndim=2\n[scenario]\nf=\"x(1)\"\n[set]\neq=\"x(1)*x(2) = 1\"\n").is_err());
        assert!(parse_problem("[problem]\ndim=1\n[scenario]\nf=\"x(1)\"\n[semiinf]\ng=\"x(1)\"\ngrid=\"1, 0\"\n").is_err());
        assert!(parse_problem(
            "[problem]\ndim=2\n[scenario]\nf=\"x(1)\"\n[set]\neq=\"x(1) = 0\"\neq=\"2*x(1) = 0\"\n"
        )
        .is_err());
    }
}
