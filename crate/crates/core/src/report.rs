//! Certificate report: the JSON document emitted by `conecert check`, its
//! human-readable rendering and re-verification of attached witnesses.

use crate::firstorder::{verify_alternance, Cadre, MultiplierWitness, NecessaryReport, PenaltyReport, SpotCheckReport, SufficientReport};
use crate::geometry::SamplingSpec;
use crate::linalg::{self, Vector};
use crate::oracle::GrowthProbe;
use crate::problem::{ActiveScenario, FeasibilityReport, ProblemKind, ToleranceSet};
use crate::secondorder::SecondOrderReport;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;

/// Witness residuals above `WITNESS_TOL · scale` fail re-verification.
pub const WITNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Refuted => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderSection {
    pub necessary: SecondOrderReport,
    pub sufficient: SecondOrderReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub growth: Option<GrowthProbe>,
    pub growth_error: Option<String>,
    /// Brute-force verdict on `0 ∈ D̂`; `None` when there are too many generators.
    pub membership: Option<bool>,
    pub agrees_with_lp: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub schema: u32,
    pub problem: String,
    pub kind: ProblemKind,
    pub dim: usize,
    pub point: Vector,
    pub tolerances: ToleranceSet,
    pub sampling: SamplingSpec,
    pub squared_objective: bool,
    pub objective_value: f64,
    pub active_scenarios: Vec<ActiveScenario>,
    pub feasibility: FeasibilityReport,
    pub necessary: Option<NecessaryReport>,
    pub sufficient: Option<SufficientReport>,
    pub linearized: Option<SpotCheckReport>,
    pub penalty: Option<PenaltyReport>,
    pub second_order: Option<SecondOrderSection>,
    pub oracle: Option<OracleSection>,
    pub convexity_declared_by_user: bool,
    pub rcq: String,
    pub verdict: Verdict,
    pub messages: Vec<String>,
}

fn scale_of(vs: impl Iterator<Item = f64>) -> f64 {
    vs.fold(1.0, f64::max)
}

fn check_multipliers(w: &MultiplierWitness) -> Result<(), String> {
    let r = w.recompute_residual();
    let scale = scale_of(w.terms.iter().map(|t| linalg::norm_inf(&t.v)));
    let alpha: f64 = w.alpha.iter().map(|a| a.weight).sum();
    if (alpha - 1.0).abs() > 1e-9 {
        return Err(format!("multiplier weights sum to {alpha}, not 1"));
    }
    if r > WITNESS_TOL * scale {
        return Err(format!("multiplier stationarity residual {r:e}"));
    }
    Ok(())
}

fn check_cadre(c: &Cadre, tol: &ToleranceSet, what: &str) -> Result<(), String> {
    let scale = scale_of(c.vectors.iter().map(|v| linalg::norm_inf(v))) * scale_of(c.beta.iter().copied());
    if c.residual() > WITNESS_TOL * scale {
        return Err(format!("{what}: residual {:e}", c.residual()));
    }
    let alt = verify_alternance(&c.vectors, None, tol).map_err(|e| format!("{what}: {e}"))?;
    let close = alt
        .beta
        .iter()
        .zip(&c.beta)
        .all(|(a, b)| (a - b).abs() <= 1e-8 * b.abs().max(1.0));
    if !close {
        return Err(format!("{what}: stored multipliers differ from recomputed ones"));
    }
    Ok(())
}

/// Recomputes every stored witness residual and the alternance determinants.
pub fn verify_report_witnesses(r: &CertificateReport) -> Result<(), String> {
    if r.schema != SCHEMA_VERSION {
        return Err(format!("unsupported schema {}", r.schema));
    }
    if let Some(n) = &r.necessary {
        if let Some(w) = &n.multipliers {
            check_multipliers(w)?;
        }
        if let Some(c) = &n.cadre {
            check_cadre(c, &r.tolerances, "cadre")?;
        }
    }
    if let Some(s) = &r.sufficient {
        if let Some(c) = &s.complete_alternance {
            check_cadre(c, &r.tolerances, "complete alternance")?;
        }
    }
    if let Some(p) = &r.penalty {
        if p.holds {
            let res = p.recompute_residual();
            let scale = scale_of(p.terms.iter().map(|t| linalg::norm_inf(&t.v))) * p.c.max(1.0);
            if res > WITNESS_TOL * scale {
                return Err(format!("penalty inclusion residual {res:e}"));
            }
        }
    }
    Ok(())
}

fn vec_str(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("({})", parts.join(", "))
}

fn fmt_num(x: f64) -> String {
    if x == x.round() && x.abs() < 1e15 {
        format!("{}", (x as i64))
    } else {
        let s = format!("{x:.10}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn cadre_lines(out: &mut String, label: &str, c: &Cadre) {
    let _ = writeln!(out, "  {label}: p = {}, flavor {:?}, k0 = {}, i0 = {}", c.p, c.flavor, c.k0, c.i0);
    for (i, v) in c.vectors.iter().enumerate() {
        let _ = writeln!(out, "    V{} = {}", i + 1, vec_str(v));
    }
    let _ = writeln!(out, "    Δ = {}", vec_str(&c.deltas));
    let _ = writeln!(out, "    β = {}", vec_str(&c.beta));
}

/// Plain-text summary.
pub fn render_text(r: &CertificateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "problem {} ({:?}, d = {}) at x = {}", r.problem, r.kind, r.dim, vec_str(&r.point));
    let _ = writeln!(out, "F(x) = {}", fmt_num(r.objective_value));
    let active: Vec<String> = r
        .active_scenarios
        .iter()
        .map(|a| if r.kind == ProblemKind::Chebyshev { format!("{}{:+}", a.index + 1, a.sign) } else { format!("{}", a.index + 1) })
        .collect();
    let _ = writeln!(out, "active scenarios: {{{}}}", active.join(", "));
    let _ = writeln!(out, "feasible: {} (max violation {:.3e})", r.feasibility.feasible, r.feasibility.max_violation().max(0.0));
    if let Some(n) = &r.necessary {
        let _ = writeln!(out, "necessary (0 ∈ D): {}", n.zero_in_d);
        if let Some(w) = &n.multipliers {
            let alpha: Vec<String> = w.alpha.iter().map(|a| format!("{}:{}", a.index + 1, fmt_num(a.weight))).collect();
            let _ = writeln!(out, "  α = {{{}}}, residual {:e}", alpha.join(", "), w.residual);
            for b in &w.blocks {
                let _ = writeln!(out, "  λ[block {} {}] = {} (dual norm {})", b.block + 1, b.kind, vec_str(&b.dual), fmt_num(b.dual_norm));
            }
        }
        if let Some(c) = &n.cadre {
            cadre_lines(&mut out, "cadre", c);
        }
        if !n.cadre_agrees {
            let _ = writeln!(out, "  LP and cadre search disagree (sampling limited: {})", n.sampling_limited);
        }
    }
    if let Some(s) = &r.sufficient {
        let _ = writeln!(out, "sufficient (0 ∈ int D): {}, radius {}", s.zero_in_int_d, fmt_num(s.radius));
        match &s.complete_alternance {
            Some(c) => cadre_lines(&mut out, "complete alternance", c),
            None => {
                let _ = writeln!(out, "  no complete {:?} alternance found", s.alternance_flavor);
            }
        }
        if let Some(g) = s.growth_constant_estimate {
            let _ = writeln!(out, "  growth constant estimate (sampled): {}", fmt_num(g));
        }
    }
    if let Some(l) = &r.linearized {
        if let Some(m) = l.min_derivative {
            let _ = writeln!(out, "linearized spot check: min F'(x,h) = {} over {} directions, refuted: {}", fmt_num(m), l.sampled, l.refuted);
        } else {
            let _ = writeln!(out, "linearized spot check: no nonzero linearized directions");
        }
    }
    if let Some(p) = &r.penalty {
        let _ = writeln!(out, "penalty c = {}: Φ_c(x) = {}, 0 ∈ ∂Φ_c + N_A: {}", fmt_num(p.c), fmt_num(p.penalty_value), p.holds);
    }
    if let Some(so) = &r.second_order {
        for (name, rep) in [("necessary", &so.necessary), ("sufficient", &so.sufficient)] {
            match &rep.skipped {
                Some(why) => {
                    let _ = writeln!(out, "second-order {name}: skipped ({why})");
                }
                None => {
                    let _ = writeln!(
                        out,
                        "second-order {name}: holds on {} sampled directions: {}{}",
                        rep.directions.len(),
                        rep.holds,
                        if rep.critical_cone_trivial { " (critical cone trivial)" } else { "" }
                    );
                }
            }
        }
    }
    if let Some(o) = &r.oracle {
        if let Some(g) = &o.growth {
            let _ = writeln!(out, "oracle growth probe: ρ̂ = {}, refuted: {}", fmt_num(g.rho_hat), g.refuted);
        }
        if let Some(e) = &o.growth_error {
            let _ = writeln!(out, "oracle growth probe: {e}");
        }
        if let Some(a) = o.agrees_with_lp {
            let _ = writeln!(out, "oracle membership agrees with LP: {a}");
        }
    }
    let _ = writeln!(out, "RCQ: {}", r.rcq);
    for m in &r.messages {
        let _ = writeln!(out, "{m}");
    }
    let _ = writeln!(out, "verdict: {:?}", r.verdict);
    out
}
