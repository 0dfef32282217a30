//! Batch command-line front end. `run` returns the process exit code so the
//! binary stays a thin wrapper and commands can be tested in-process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::classical::{feasibility, FeasibilityResult, PreferencePattern};
use crate::hilbert::{check_generalized_measure, validate_spectral_family, Check, SpectralFamily};
use crate::quantum::PRINTED_TOL;
use crate::report::{fmt_value, round_json, PRINT_DIGITS};
use crate::scenarios::{builtin, load_scenario, BuiltinScenario, ExperimentCounts, Scenario, UtilityFunction};
use crate::solver::{paper_solutions, solve, verify, SolveResult, SolveTarget, SolverConfig, VerificationReport};
use crate::stats::{analyze, read_counts_csv, reports_to_csv, StatsError, StatsReport, EXPERIMENT_COUNTS_CSV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, Parser)]
#[command(
    name = "qambig",
    version,
    about = "State-dependent expected utility: verification, solving, feasibility and experiment statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify the published state pairs of the built-in scenarios.
    VerifyPaper(VerifyArgs),
    /// Search for a state pair reproducing two target differences.
    Solve(SolveArgs),
    /// Decide whether a preference pattern admits a single classical probability.
    Feasibility(FeasibilityArgs),
    /// Recompute experiment statistics from choice counts.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print numbers losslessly instead of at 6 significant digits.
    #[arg(long)]
    full_precision: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Restrict to one built-in scenario.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value = "sqrt")]
    utility: String,
    #[arg(long, default_value_t = PRINTED_TOL)]
    tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Target difference on the first question pair (defaults to the published target).
    #[arg(long, allow_negative_numbers = true)]
    d1: Option<f64>,
    /// Target difference on the second question pair.
    #[arg(long, allow_negative_numbers = true)]
    d2: Option<f64>,
    #[arg(long, default_value = "sqrt")]
    utility: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    /// Residual tolerance for convergence.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Drop the orthogonality requirement between the two states.
    #[arg(long)]
    no_orthogonal: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct FeasibilityArgs {
    #[arg(long)]
    scenario: String,
    /// Comparisons such as "f1>f2,f4>f3" (`>`, `<`, `~`).
    #[arg(long)]
    pattern: String,
    #[arg(long, default_value = "sqrt")]
    utility: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Counts CSV path or inline "n_f1f4,n_f1f3,n_f2f3,n_f2f4"; defaults to the bundled table.
    counts: Option<String>,
    /// Scenario for rows without a scenario column.
    #[arg(long)]
    scenario: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn data(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: message.into(),
    }
}

/// Rendered report plus exit code.
struct Outcome {
    text: String,
    code: i32,
}

fn resolve_scenario(spec: &str) -> Result<Scenario, Failure> {
    if let Ok(s) = builtin(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.exists() {
        let names: Vec<&str> = BuiltinScenario::ALL.iter().map(|b| b.name()).collect();
        return Err(usage(format!(
            "unknown scenario '{spec}' (built-ins: {}; or give a file path)",
            names.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| data(format!("{spec}: {e}")))?;
    load_scenario(&text).map_err(|e| data(format!("{spec}: {e}")))
}

fn parse_utility(spec: &str) -> Result<UtilityFunction, Failure> {
    spec.parse::<UtilityFunction>()
        .map_err(|e| usage(format!("--utility: {e}")))
}

fn to_json<T: Serialize>(value: &T, full: bool) -> String {
    let mut v: Value = serde_json::to_value(value).expect("reports serialize");
    if !full {
        round_json(&mut v, PRINT_DIGITS);
    }
    let mut s = serde_json::to_string_pretty(&v).expect("json renders");
    s.push('\n');
    s
}

fn key_value_csv(rows: &[(String, String)]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["quantity", "value"]).expect("in-memory write");
    for (k, v) in rows {
        w.write_record([k, v]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Serialize)]
struct PaperVerification {
    tolerance: f64,
    passed: bool,
    scenarios: Vec<ScenarioVerification>,
}

#[derive(Serialize)]
struct ScenarioVerification {
    #[serde(flatten)]
    report: VerificationReport,
    hilbert: Vec<Check>,
}

fn cmd_verify_paper(a: &VerifyArgs) -> Result<Outcome, Failure> {
    let u = parse_utility(&a.utility)?;
    let ids: Vec<BuiltinScenario> = match &a.scenario {
        None => BuiltinScenario::ALL.to_vec(),
        Some(name) => vec![name
            .parse::<BuiltinScenario>()
            .map_err(|e| usage(format!("--scenario: {e}")))?],
    };
    let mut scenarios = Vec::new();
    for id in ids {
        let s = id.scenario();
        let sol = paper_solutions(&s).map_err(|e| data(e.to_string()))?;
        let (w1, w2) = sol.states(&s).map_err(|e| data(e.to_string()))?;
        let report = verify(&s, &w1, &w2, &sol.target, &u, a.tol).map_err(|e| data(e.to_string()))?;
        let fam = SpectralFamily::canonical(s.n_events()).map_err(|e| data(e.to_string()))?;
        let mut hilbert = validate_spectral_family(&fam).checks;
        for w in [&w1, &w2] {
            let ket = w.rescaled_to_constraints(&s).to_ket();
            hilbert.extend(check_generalized_measure(&ket, &fam).checks);
        }
        scenarios.push(ScenarioVerification { report, hilbert });
    }
    let passed = scenarios
        .iter()
        .all(|s| s.report.passed && s.hilbert.iter().all(|c| c.passed));
    let full = a.output.full_precision;
    let text = match a.output.format {
        Format::Json => to_json(
            &PaperVerification {
                tolerance: a.tol,
                passed,
                scenarios,
            },
            full,
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(["scenario", "check", "residual", "passed"])
                .expect("in-memory write");
            for s in &scenarios {
                for c in &s.report.checks {
                    w.write_record([
                        s.report.scenario.as_str(),
                        &c.name,
                        &fmt_value(c.residual, full),
                        &c.passed.to_string(),
                    ])
                    .expect("in-memory write");
                }
                for c in &s.hilbert {
                    w.write_record([
                        s.report.scenario.as_str(),
                        &format!("hilbert_{}", c.name),
                        &fmt_value(c.max_deviation, full),
                        &c.passed.to_string(),
                    ])
                    .expect("in-memory write");
                }
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        Format::Human => {
            let mut out = String::new();
            let n_pass = scenarios.iter().filter(|s| s.report.passed).count();
            for s in &scenarios {
                let hilbert_ok = s.hilbert.iter().all(|c| c.passed);
                let _ = writeln!(
                    out,
                    "{}: {}",
                    s.report.scenario,
                    if s.report.passed && hilbert_ok { "PASS" } else { "FAIL" }
                );
                for c in &s.report.checks {
                    let _ = writeln!(
                        out,
                        "  {:<24} {:>12}  {}",
                        c.name,
                        fmt_value(c.residual, full),
                        if c.passed { "ok" } else { "FAIL" }
                    );
                }
                let worst = s.hilbert.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
                let _ = writeln!(
                    out,
                    "  {:<24} {:>12}  {}",
                    "hilbert checks",
                    fmt_value(worst, full),
                    if hilbert_ok { "ok" } else { "FAIL" }
                );
            }
            let _ = writeln!(
                out,
                "{n_pass}/{} scenarios pass at tol {}",
                scenarios.len(),
                fmt_value(a.tol, full)
            );
            out
        }
    };
    Ok(Outcome {
        text,
        code: if passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
    })
}

fn state_lines(out: &mut String, s: &Scenario, name: &str, w: &crate::quantum::QuantumState, full: bool) {
    let _ = writeln!(out, "{name}:");
    for (i, (m, p)) in w.moduli().iter().zip(w.phases_deg()).enumerate() {
        let _ = writeln!(
            out,
            "  {:<4} modulus {:>10}  phase {:>10}°",
            s.events[i],
            fmt_value(*m, full),
            fmt_value(p, full)
        );
    }
}

fn render_solve(s: &Scenario, r: &SolveResult, o: &OutputArgs) -> String {
    let full = o.full_precision;
    match o.format {
        Format::Json => to_json(r, full),
        Format::Csv => {
            let mut rows = vec![
                ("converged".to_string(), r.converged.to_string()),
                ("restarts_used".to_string(), r.restarts_used.to_string()),
                ("best_restart".to_string(), r.best_restart.to_string()),
            ];
            for (name, w) in [("w1", &r.w1), ("w2", &r.w2)] {
                for (i, (m, p)) in w.moduli().iter().zip(w.phases_deg()).enumerate() {
                    rows.push((format!("{name}.{}.modulus", s.events[i]), fmt_value(*m, full)));
                    rows.push((format!("{name}.{}.phase_deg", s.events[i]), fmt_value(p, full)));
                }
            }
            for (k, v) in r.residuals.entries() {
                rows.push((format!("residual.{k}"), fmt_value(v, full)));
            }
            key_value_csv(&rows)
        }
        Format::Human => {
            let mut out = String::new();
            let label = |i: usize| s.acts[i].label.as_str();
            let _ = writeln!(
                out,
                "scenario {}: {} − {} = {}, {} − {} = {}{}",
                r.scenario,
                label(r.target.pair_1.first),
                label(r.target.pair_1.second),
                fmt_value(r.target.pair_1.difference, full),
                label(r.target.pair_2.first),
                label(r.target.pair_2.second),
                fmt_value(r.target.pair_2.difference, full),
                if r.target.require_orthogonal { ", w1 ⊥ w2" } else { "" }
            );
            let _ = writeln!(
                out,
                "converged: {} (best of {} restarts: #{}, {} iterations; {})",
                r.converged, r.restarts_used, r.best_restart, r.iterations, r.method
            );
            state_lines(&mut out, s, "w1", &r.w1, full);
            state_lines(&mut out, s, "w2", &r.w2, full);
            let _ = writeln!(out, "residuals:");
            for (k, v) in r.residuals.entries() {
                let _ = writeln!(out, "  {k:<20} {:>12}", fmt_value(v, full));
            }
            out
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<Outcome, Failure> {
    let s = resolve_scenario(&a.scenario)?;
    let u = parse_utility(&a.utility)?;
    let published = paper_solutions(&s).ok().map(|p| p.target);
    let pick = |given: Option<f64>, flag: &str, default: Option<f64>| {
        given.or(default).ok_or_else(|| {
            usage(format!("--{flag} is required for scenarios without a published target"))
        })
    };
    let d1 = pick(a.d1, "d1", published.map(|t| t.pair_1.difference))?;
    let d2 = pick(a.d2, "d2", published.map(|t| t.pair_2.difference))?;
    if a.tol.is_nan() || a.tol <= 0.0 || a.restarts == 0 {
        return Err(usage("--tol must be positive and --restarts at least 1"));
    }
    let target = SolveTarget::for_question_pairs(&s, d1, d2)
        .map_err(|e| usage(e.to_string()))?
        .with_orthogonality(!a.no_orthogonal);
    let cfg = SolverConfig {
        restarts: a.restarts,
        seed: a.seed,
        residual_tolerance: a.tol,
        ..SolverConfig::default()
    };
    let r = solve(&s, &target, &u, &cfg).map_err(|e| data(e.to_string()))?;
    Ok(Outcome {
        text: render_solve(&s, &r, &a.output),
        code: if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED },
    })
}

#[derive(Serialize)]
struct FeasibilityReport<'a> {
    scenario: &'a str,
    pattern: String,
    utility: String,
    grid_agrees: Option<bool>,
    #[serde(flatten)]
    result: &'a FeasibilityResult,
}

fn cmd_feasibility(a: &FeasibilityArgs) -> Result<Outcome, Failure> {
    let s = resolve_scenario(&a.scenario)?;
    let u = parse_utility(&a.utility)?;
    let pattern = PreferencePattern::parse(&s, &a.pattern)
        .map_err(|e| usage(format!("--pattern: {e}\nexpected e.g. \"f1>f2,f4>f3\"")))?;
    let r = feasibility(&s, &pattern, &u).map_err(|e| data(e.to_string()))?;
    let full = a.output.full_precision;
    let text = match a.output.format {
        Format::Json => to_json(
            &FeasibilityReport {
                scenario: &s.name,
                pattern: pattern.describe(&s),
                utility: u.spec(),
                grid_agrees: r.grid_agrees(),
                result: &r,
            },
            full,
        ),
        Format::Csv => {
            let mut rows = vec![
                ("scenario".to_string(), s.name.clone()),
                ("pattern".to_string(), pattern.describe(&s)),
                ("feasible".to_string(), r.feasible.to_string()),
                (
                    "margin".to_string(),
                    r.margin.map(|m| fmt_value(m, full)).unwrap_or_default(),
                ),
                ("utility_independent".to_string(), r.utility_independent.to_string()),
                (
                    "grid_agrees".to_string(),
                    r.grid_agrees().map(|g| g.to_string()).unwrap_or_default(),
                ),
            ];
            if let Some(w) = &r.witness {
                for (e, p) in s.events.iter().zip(w.probs()) {
                    rows.push((format!("witness.p_{e}"), fmt_value(*p, full)));
                }
            }
            key_value_csv(&rows)
        }
        Format::Human => {
            let mut out = format!("scenario {}: {}\n", s.name, pattern.describe(&s));
            let _ = writeln!(out, "feasible: {}", r.feasible);
            if let Some(w) = &r.witness {
                let parts: Vec<String> = s
                    .events
                    .iter()
                    .zip(w.probs())
                    .map(|(e, p)| format!("p_{e} = {}", fmt_value(*p, full)))
                    .collect();
                let _ = writeln!(out, "witness: {}", parts.join(", "));
            }
            let _ = writeln!(out, "{}", r.certificate);
            if let Some(g) = &r.grid {
                let _ = writeln!(
                    out,
                    "grid check (step {}, {} points, {} satisfying): {}",
                    fmt_value(g.step, full),
                    g.points,
                    g.satisfying,
                    if g.feasible == r.feasible { "agrees" } else { "DISAGREES" }
                );
            }
            out
        }
    };
    Ok(Outcome { text, code: EXIT_OK })
}

fn parse_inline_counts(text: &str) -> Option<ExperimentCounts> {
    let parts: Vec<u64> = text
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<Vec<_>>>()?;
    match parts.as_slice() {
        [a, b, c, d] => Some(ExperimentCounts {
            n_f1f4: *a,
            n_f1f3: *b,
            n_f2f3: *c,
            n_f2f4: *d,
        }),
        _ => None,
    }
}

fn stats_failure(e: StatsError) -> Failure {
    data(e.to_string())
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<Outcome, Failure> {
    let forced = a.scenario.as_deref().map(resolve_scenario).transpose()?;
    let rows: Vec<(Option<String>, ExperimentCounts)> = match a.counts.as_deref() {
        None => read_counts_csv(EXPERIMENT_COUNTS_CSV)
            .map_err(stats_failure)?
            .into_iter()
            .map(|r| Ok((r.scenario.clone(), r.counts().map_err(stats_failure)?)))
            .collect::<Result<_, Failure>>()?,
        Some(src) => match parse_inline_counts(src) {
            Some(c) => {
                if c.total() == 0 {
                    return Err(data("counts must not all be zero"));
                }
                vec![(None, c)]
            }
            None => {
                let path = Path::new(src);
                if !path.exists() {
                    return Err(usage(format!(
                        "'{src}' is neither a counts file nor inline counts \"a,b,c,d\""
                    )));
                }
                let text = std::fs::read_to_string(path).map_err(|e| data(format!("{src}: {e}")))?;
                read_counts_csv(&text)
                    .map_err(stats_failure)?
                    .into_iter()
                    .map(|r| Ok((r.scenario.clone(), r.counts().map_err(stats_failure)?)))
                    .collect::<Result<_, Failure>>()?
            }
        },
    };
    let mut reports: Vec<StatsReport> = Vec::new();
    for (row_scenario, counts) in rows {
        let s = match (&forced, row_scenario) {
            (Some(s), _) => s.clone(),
            (None, Some(name)) => builtin(&name).map_err(|e| data(e.to_string()))?,
            (None, None) => {
                return Err(usage("rows without a scenario column need --scenario"));
            }
        };
        reports.push(analyze(&counts, &s).map_err(stats_failure)?);
    }
    let full = a.output.full_precision;
    let text = match a.output.format {
        Format::Json => to_json(&reports, full),
        Format::Csv => reports_to_csv(&reports, |v| fmt_value(v, full)),
        Format::Human => {
            let mut out = String::new();
            for r in &reports {
                let f = |v: f64| fmt_value(v, full);
                let c = &r.counts;
                let _ = writeln!(
                    out,
                    "{}: counts ({}, {}, {}, {}), N = {}",
                    r.scenario, c.n_f1f4, c.n_f1f3, c.n_f2f3, c.n_f2f4, r.total
                );
                let _ = writeln!(
                    out,
                    "  {}: {}/{} weight {}  p(z) {}  p(exact) {}",
                    r.question_1,
                    r.count_q1,
                    r.total,
                    f(r.weight_q1),
                    f(r.p_q1.z_test),
                    f(r.p_q1.exact)
                );
                let _ = writeln!(
                    out,
                    "  {}: {}/{} weight {}  p(z) {}  p(exact) {}",
                    r.question_2,
                    r.count_q2,
                    r.total,
                    f(r.weight_q2),
                    f(r.p_q2.z_test),
                    f(r.p_q2.exact)
                );
                let _ = writeln!(out, "  inversion rate {}", f(r.inversion_rate));
                for t in &r.cross_test {
                    let _ = writeln!(
                        out,
                        "  {:<24} p {}",
                        t.name,
                        t.p_value.map(f).unwrap_or_else(|| "undefined".into())
                    );
                }
                for check in &r.paper {
                    let status = match (&check.reproduced_by, check.flagged) {
                        (_, true) => "FLAG".to_string(),
                        (Some(v), false) => format!("matches ({v})"),
                        (None, false) => "matches".to_string(),
                    };
                    let _ = writeln!(
                        out,
                        "  published {:<16} {:>10}  {status}",
                        check.quantity,
                        f(check.printed)
                    );
                }
                for flag in &r.flags {
                    let _ = writeln!(out, "  flag: {flag}");
                }
            }
            out
        }
    };
    Ok(Outcome { text, code: EXIT_OK })
}

fn emit(outcome: &Outcome, out_path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out_path {
        Some(p) => std::fs::write(p, &outcome.text).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(outcome.text.as_bytes())
            .map_err(|e| data(format!("stdout: {e}"))),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let (result, out) = match &cli.command {
        Command::VerifyPaper(a) => (cmd_verify_paper(a), a.output.out.as_deref()),
        Command::Solve(a) => (cmd_solve(a), a.output.out.as_deref()),
        Command::Feasibility(a) => (cmd_feasibility(a), a.output.out.as_deref()),
        Command::Analyze(a) => (cmd_analyze(a), a.output.out.as_deref()),
    };
    match result.and_then(|o| emit(&o, out, stdout).map(|_| o.code)) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
