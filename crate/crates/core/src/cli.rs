//! Command-line front end.

use crate::firstorder::{
    self, linearized_spot_check, necessary_from_generators, penalty_subdiff_check, prepare,
    semiinfinite_discretize, sufficient_from_generators, verify_alternance, CheckOptions, Flavor,
};
use crate::geometry::SamplingSpec;
use crate::linalg::Vector;
use crate::oracle;
use crate::problem::{parse_problem, write_problem, Problem};
use crate::registry;
use crate::report::{render_text, CertificateReport, OracleSection, SecondOrderSection, Verdict, SCHEMA_VERSION};
use crate::secondorder::{second_order_necessary, second_order_sufficient};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_ERROR: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "conecert", version, about = "Optimality certificates for cone-constrained minimax problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a candidate point.
    Check(CheckArgs),
    /// Compute the alternance determinants of a list of vectors.
    VerifyAlternance(VerifyArgs),
    /// Replace semi-infinite blocks by their active grid points.
    Discretize(DiscretizeArgs),
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Problem file.
    #[arg(long, conflicts_with = "registry")]
    file: Option<PathBuf>,
    /// Built-in problem: dem, madsen, bazaraa45, linf, counterexample-3-2, soc-example, sdp-example.
    #[arg(long)]
    registry: Option<String>,
    /// Dimension for `linf`.
    #[arg(long)]
    dim: Option<usize>,
    /// Candidate point "v1,v2,..."; defaults to the problem's own candidate.
    #[arg(long, allow_hyphen_values = true)]
    at: Option<String>,
}

#[derive(Args, Debug)]
struct ToleranceArgs {
    #[arg(long)]
    eps_active: Option<f64>,
    #[arg(long)]
    eps_rank: Option<f64>,
    #[arg(long)]
    eps_det: Option<f64>,
    #[arg(long)]
    eps_feas: Option<f64>,
    #[arg(long)]
    eps_pos: Option<f64>,
}

#[derive(Args, Debug)]
struct SamplingArgs {
    /// Sampled directions for SOC vertex blocks.
    #[arg(long, default_value_t = 64)]
    soc_dirs: usize,
    /// Sampled directions for SDP null spaces.
    #[arg(long, default_value_t = 64)]
    sdp_dirs: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FlavorArg {
    Plain,
    Generalised,
    Weak,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Plain => Flavor::Plain,
            FlavorArg::Generalised => Flavor::Generalised,
            FlavorArg::Weak => Flavor::Weak,
        }
    }
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Require a complete alternance of this flavor.
    #[arg(long, value_enum)]
    flavor: Option<FlavorArg>,
    /// Run the sampled second-order tests.
    #[arg(long)]
    second_order: bool,
    /// Critical-cone directions for the second-order tests.
    #[arg(long, default_value_t = 512)]
    second_order_dirs: usize,
    /// Test the penalty subdifferential inclusion for this `c`.
    #[arg(long)]
    penalty: Option<f64>,
    /// Cross-check with the brute-force oracles.
    #[arg(long)]
    oracle: bool,
    /// Use the squared Chebyshev objective.
    #[arg(long)]
    squared: bool,
    /// Record that the user asserts the problem is convex.
    #[arg(long)]
    convex: bool,
    /// Directions sampled for the growth estimate and spot check.
    #[arg(long, default_value_t = 128)]
    samples: usize,
    /// Subset budget of the cadre search.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Print the JSON report.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// File with one vector per line.
    #[arg(long, conflicts_with = "inline")]
    vectors: Option<PathBuf>,
    /// Vectors separated by ';', components by ','.
    #[arg(long, allow_hyphen_values = true)]
    inline: Option<String>,
    /// Padding basis in the same inline syntax.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct DiscretizeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_vector(text: &str) -> Result<Vector, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("malformed number '{s}'")))
        .collect()
}

fn parse_vectors(text: &str, sep: char) -> Result<Vec<Vector>, String> {
    let vs: Vec<Vector> = text
        .split(sep)
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_vector)
        .collect::<Result<_, _>>()?;
    if vs.is_empty() {
        return Err("no vectors given".into());
    }
    Ok(vs)
}

fn load(source: &SourceArgs, tol: &ToleranceArgs) -> Result<(Problem, Vector), String> {
    let mut p = match (&source.file, &source.registry) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_problem(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(name)) => registry::lookup(name, source.dim).map_err(|e| e.to_string())?,
        _ => return Err("exactly one of --file or --registry is required".into()),
    };
    let t = &mut p.tolerances;
    for (slot, v) in [
        (&mut t.eps_active, tol.eps_active),
        (&mut t.eps_rank, tol.eps_rank),
        (&mut t.eps_det, tol.eps_det),
        (&mut t.eps_feas, tol.eps_feas),
        (&mut t.eps_pos, tol.eps_pos),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    p.tolerances.validate().map_err(|e| e.to_string())?;
    let x = match &source.at {
        Some(s) => parse_vector(s)?,
        None => p.candidate.clone().ok_or("no candidate point: pass --at")?,
    };
    if x.len() != p.dim {
        return Err(format!("point has {} coordinates, problem dimension is {}", x.len(), p.dim));
    }
    Ok((p, x))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(&a, out),
        Command::VerifyAlternance(a) => cmd_verify_alternance(&a, out),
        Command::Discretize(a) => cmd_discretize(&a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32, String> {
    let (p, x) = load(&a.source, &a.tolerances)?;
    let opts = CheckOptions {
        sampling: SamplingSpec { soc_dirs: a.sampling.soc_dirs, sdp_dirs: a.sampling.sdp_dirs, seed: a.sampling.seed },
        budget: a.budget,
        n_samples: a.samples,
        z: None,
        squared: a.squared,
    };
    let report = certify(&p, &x, a, &opts).map_err(|e| e.to_string())?;
    let text = if a.json {
        serde_json::to_string_pretty(&report).map_err(|e| e.to_string())? + "\n"
    } else {
        render_text(&report)
    };
    out.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    Ok(report.verdict.exit_code())
}

fn certify(p: &Problem, x: &[f64], a: &CheckArgs, opts: &CheckOptions) -> Result<CertificateReport, Box<dyn std::error::Error>> {
    let (objective_value, active_scenarios) = p.evaluate_objective(x)?;
    let feasibility = p.check_feasible(x)?;
    let mut report = CertificateReport {
        schema: SCHEMA_VERSION,
        problem: p.display_name().to_string(),
        kind: p.kind,
        dim: p.dim,
        point: x.to_vec(),
        tolerances: p.tolerances,
        sampling: opts.sampling,
        squared_objective: opts.squared,
        objective_value,
        active_scenarios,
        feasibility: feasibility.clone(),
        necessary: None,
        sufficient: None,
        linearized: None,
        penalty: None,
        second_order: None,
        oracle: None,
        convexity_declared_by_user: a.convex,
        rcq: "not checked".into(),
        verdict: Verdict::Inconclusive,
        messages: Vec::new(),
    };
    if !feasibility.feasible {
        report.verdict = Verdict::Refuted;
        report.messages.push("point is infeasible".into());
        return Ok(report);
    }
    let (pm, gs) = prepare(p, x, opts)?;
    let flavor = a.flavor.map(Flavor::from).unwrap_or(Flavor::Generalised);
    let nec = necessary_from_generators(p, &gs, opts);
    let suf = sufficient_from_generators(p, &pm, &gs, flavor, opts);
    let lin = linearized_spot_check(p, x, opts.n_samples, opts)?;
    let mut refuted = false;
    let mut missing = false;
    if !nec.zero_in_d {
        if nec.generators_sampled {
            missing = true;
            report.messages.push("0 ∉ D on the sampled generator model; sampling limited".into());
        } else {
            refuted = true;
            report.messages.push("0 ∉ D: no Lagrange multiplier exists (necessary under RCQ)".into());
        }
    }
    if lin.refuted {
        refuted = true;
        report.messages.push("descent direction of the linearized problem found".into());
    }
    if !suf.zero_in_int_d {
        missing = true;
    }
    if let Some(f) = a.flavor {
        if suf.complete_alternance.is_none() {
            missing = true;
            let found = match &nec.cadre {
                Some(c) => format!("{}-point cadre found", c.p),
                None => "no cadre found".into(),
            };
            let name = match f {
                FlavorArg::Plain => "plain",
                FlavorArg::Generalised => "generalised",
                FlavorArg::Weak => "weak",
            };
            report.messages.push(format!("no complete {name} alternance; {found}"));
        }
    }
    if let Some(c) = a.penalty {
        let pen = penalty_subdiff_check(p, x, c, opts)?;
        if !pen.holds {
            missing = true;
        }
        report.penalty = Some(pen);
    }
    if a.second_order {
        let necessary = second_order_necessary(p, x, a.second_order_dirs, opts)?;
        let sufficient = second_order_sufficient(p, x, a.second_order_dirs, opts)?;
        if necessary.refuted {
            refuted = true;
            report.messages.push("second-order necessary condition fails on a critical direction".into());
        }
        report.second_order = Some(SecondOrderSection { necessary, sufficient });
    }
    if a.oracle {
        let radius = 1e-2 * crate::linalg::norm(x).max(1.0);
        let (growth, growth_error) = match oracle::growth_probe(p, x, 1, 2000, radius, opts.sampling.seed) {
            Ok(g) => (Some(g), None),
            Err(e) => (None, Some(e.to_string())),
        };
        if growth.as_ref().is_some_and(|g| g.refuted) {
            refuted = true;
            report.messages.push("oracle found a feasible point with a smaller objective".into());
        }
        let hull = gs.hull_vectors();
        let cone = gs.cone_vectors();
        let membership = (hull.len() + cone.len() <= 8)
            .then(|| oracle::hull_membership_bruteforce(&vec![0.0; p.dim], &hull, &cone, 60));
        let agrees_with_lp = membership.map(|m| m == nec.zero_in_d);
        report.oracle = Some(OracleSection { growth, growth_error, membership, agrees_with_lp });
    }
    report.verdict = if refuted {
        Verdict::Refuted
    } else if missing {
        Verdict::Inconclusive
    } else {
        Verdict::Certified
    };
    report.necessary = Some(nec);
    report.sufficient = Some(suf);
    report.linearized = Some(lin);
    Ok(report)
}

fn cmd_verify_alternance(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, String> {
    let vectors = match (&a.vectors, &a.inline) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_vectors(&text, '\n')?
        }
        (None, Some(s)) => parse_vectors(s, ';')?,
        _ => return Err("exactly one of --vectors or --inline is required".into()),
    };
    let z = a.z.as_deref().map(|s| parse_vectors(s, ';')).transpose()?;
    let mut tol = crate::problem::ToleranceSet::default();
    if let Some(v) = a.tolerances.eps_det {
        tol.eps_det = v;
    }
    if let Some(v) = a.tolerances.eps_rank {
        tol.eps_rank = v;
    }
    let result = verify_alternance(&vectors, z.as_deref(), &tol);
    if let Err(firstorder::AlternanceFailure::BadInput(m)) = &result {
        return Err(m.clone());
    }
    let text = if a.json {
        let v = match &result {
            Ok(alt) => serde_json::json!({ "schema": SCHEMA_VERSION, "accepted": true, "alternance": alt }),
            Err(e) => serde_json::json!({ "schema": SCHEMA_VERSION, "accepted": false, "failure": e, "reason": e.to_string() }),
        };
        serde_json::to_string_pretty(&v).map_err(|e| e.to_string())? + "\n"
    } else {
        match &result {
            Ok(alt) => {
                let fmt = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
                format!(
                    "Δ = ({})\nβ = ({})\naccepted: {}-point alternance{}\n",
                    fmt(&alt.deltas),
                    fmt(&alt.beta),
                    alt.p,
                    if alt.p == vectors[0].len() + 1 { " (complete)" } else { "" }
                )
            }
            Err(e) => format!("rejected: {e}\n"),
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    Ok(if result.is_ok() { 0 } else { 2 })
}

fn cmd_discretize(a: &DiscretizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let (p, x) = load(&a.source, &a.tolerances)?;
    let (q, rep) = semiinfinite_discretize(&p, &x, &CheckOptions::default()).map_err(|e| e.to_string())?;
    for w in &rep.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let text = write_problem(&q);
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string())?,
    }
    Ok(0)
}
