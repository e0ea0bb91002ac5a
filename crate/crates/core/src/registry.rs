//! Built-in problems with their candidate points.

use crate::problem::{parse_problem, Problem, ProblemError};

pub const NAMES: &[&str] = &[
    "dem",
    "madsen",
    "bazaraa45",
    "linf",
    "counterexample-3-2",
    "soc-example",
    "sdp-example",
];

const DEM: &str = r#"
[problem]
name = "dem"
dim = 2
at = "0, -3"
[scenario]
f = "5*x(1) + x(2)"
[scenario]
f = "-5*x(1) + x(2)"
[scenario]
f = "x(1)^2 + x(2)^2 + 4*x(2)"
"#;

const MADSEN: &str = r#"
[problem]
name = "madsen"
dim = 2
at = "0, 1"
[scenario]
f = "x(1)^2 + x(2)^2 + x(1)*x(2) - 1"
[scenario]
f = "sin(x(1))"
[scenario]
f = "-cos(x(2))"
[set]
lb = "0, 1"
"#;

const BAZARAA: &str = r#"
[problem]
name = "bazaraa45"
dim = 2
at = "3, 3"
[scenario]
f = "x(1)^4 + x(2)^4 + 12*x(1)^2 + 6*x(2)^2 - x(1)*x(2) - x(1) - x(2)"
[nlp_ineq]
g = "-x(1) - x(2) + 6"
g = "-2*x(1) + x(2) + 3"
[set]
lb = "0, 0"
"#;

// The constraints are x2 - |x3| x3 <= 0 and -x2 - |x3| x3 <= 0; on A (x3 >= 0)
// |x3| x3 = x3^2, which keeps the kink of abs away from the candidate point.
const COUNTEREXAMPLE: &str = r#"
[problem]
name = "counterexample-3-2"
dim = 3
at = "0, 0, 0"
[scenario]
f = "x(1) + x(2)^2 + x(3)"
[nlp_ineq]
g = "x(2) - x(3)^2"
g = "-x(2) - x(3)^2"
[set]
lb = "-inf, -inf, 0"
eq = "x(1) = 0"
"#;

const SOC: &str = r#"
[problem]
name = "soc-example"
dim = 2
at = "0, 0"
[scenario]
f = "x(1)^2 + x(2)^2 + 4*x(1) - x(2)"
[scenario]
f = "sin(x(1)) - x(2)"
[scenario]
f = "cos(x(2)) - 1"
[soc]
g0 = "-x(1) + sin(x(2)) + 1"
g1 = "sin(x(1)) - 2*x(2) - 1"
[soc]
g0 = "2*x(1)^2 + 2*x(2)^2"
g1 = "x(1) + x(2)"
g2 = "2*x(2)"
dir = "-0.7071067811865476, -0.7071067811865476"
"#;

const SDP: &str = r#"
[problem]
name = "sdp-example"
dim = 3
at = "1, -1, 0"
[scenario]
f = "-3*x(1) - 3*x(2) - 2*sin(x(3))"
[scenario]
f = "-x(1) + x(2)^2 + x(3)^2 - 1"
[scenario]
f = "(x(1) - 1)^2 + 2*x(3)"
[sdp]
size = 3
entry(1,1) = "x(1) - x(2)^2"
entry(1,2) = "sin(x(3))"
entry(1,3) = "x(1) + x(2) + x(3)"
entry(2,2) = "x(2)"
entry(2,3) = "x(1)*x(2) + (x(3) + 1)^2"
entry(3,3) = "x(1)^2 + x(2)^2 - x(3) - 2"
"#;

/// `max_i |x_i|` on `R^d`, written as the `2d` scenarios `±x_i`.
pub fn linf(d: usize) -> Problem {
    let mut text = format!(
        "[problem]\nname = \"linf\"\ndim = {d}\nat = \"{}\"\n",
        vec!["0"; d].join(", ")
    );
    for i in 1..=d {
        text.push_str(&format!("[scenario]\nf = \"x({i})\"\n[scenario]\nf = \"-x({i})\"\n"));
    }
    parse_problem(&text).expect("linf registry entry parses")
}

/// Looks up a registry entry. `dim` is used by `linf` (default 2); `linf(3)` also works.
pub fn lookup(name: &str, dim: Option<usize>) -> Result<Problem, ProblemError> {
    let text = match name {
        "dem" => DEM,
        "madsen" => MADSEN,
        "bazaraa45" => BAZARAA,
        "counterexample-3-2" => COUNTEREXAMPLE,
        "soc-example" => SOC,
        "sdp-example" => SDP,
        "linf" => return linf_checked(dim.unwrap_or(2)),
        other => {
            let inner = other
                .strip_prefix("linf(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|r| r.trim().parse::<usize>().ok());
            return match inner {
                Some(d) => linf_checked(d),
                None => Err(ProblemError::Invalid(format!(
                    "unknown registry entry '{other}' (known: {})",
                    NAMES.join(", ")
                ))),
            };
        }
    };
    parse_problem(text)
}

fn linf_checked(d: usize) -> Result<Problem, ProblemError> {
    if d == 0 {
        return Err(ProblemError::Invalid("linf needs dim >= 1".into()));
    }
    Ok(linf(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_entries_load_and_are_feasible_at_their_candidates() {
        for name in NAMES {
            let p = lookup(name, None).unwrap();
            let x = p.candidate.clone().unwrap();
            let r = p.check_feasible(&x).unwrap();
            assert!(r.feasible, "{name}: {r:?}");
        }
        assert_eq!(lookup("linf(4)", None).unwrap().scenarios.len(), 8);
        assert!(lookup("nope", None).is_err());
    }

    #[test]
    fn madsen_value_and_active_set() {
        let p = lookup("madsen", None).unwrap();
        let (f, w) = p.evaluate_objective(&[0.0, 1.0]).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(w.iter().map(|a| a.index).collect::<Vec<_>>(), vec![0, 1]);
        let g = p.subdifferential_generators(&[0.0, 1.0], &w).unwrap();
        assert_eq!(g, vec![vec![1.0, 2.0], vec![1.0, 0.0]]);
        let d = p.scenarios[0].f.eval2(&[0.0, 1.0]).unwrap();
        assert_eq!(d.hess, vec![2.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn sdp_matrix_at_candidate() {
        let p = lookup("sdp-example", None).unwrap();
        let m = p.sdp_matrix(&p.blocks[0], &[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(m, vec![vec![0.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let (_, w) = p.evaluate_objective(&[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(w.iter().map(|a| a.index).collect::<Vec<_>>(), vec![0, 2]);
    }
}
