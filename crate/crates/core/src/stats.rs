//! Experiment analysis from the four-cell choice counts: preference weights,
//! inversion rates, per-question binomial tests and cross-question McNemar
//! tests, compared against the values printed in the published report.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::scenarios::{BuiltinScenario, ExperimentCounts, Scenario, ScenarioError};

/// Relative tolerance for calling a printed p-value reproduced.
pub const REPRODUCTION_TOL: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("null proportion {0} must lie strictly between 0 and 1")]
    DegenerateNull(f64),
    #[error("success count {k} exceeds trial count {n}")]
    CountOutOfRange { k: u64, n: u64 },
    #[error("no rows")]
    NoRows,
    #[error("counts file: {0}")]
    Csv(String),
    #[error("act '{0}' is not one of f1..f4")]
    UnknownAct(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Participants choosing `label` in its question.
pub fn count_preferring(c: &ExperimentCounts, label: &str) -> Result<u64> {
    Ok(match label {
        "f1" => c.n_f1f4 + c.n_f1f3,
        "f2" => c.n_f2f3 + c.n_f2f4,
        "f3" => c.n_f1f3 + c.n_f2f3,
        "f4" => c.n_f1f4 + c.n_f2f4,
        other => return Err(StatsError::UnknownAct(other.to_string())),
    })
}

fn question_counts(c: &ExperimentCounts, s: &Scenario) -> Result<(u64, u64)> {
    let label = |q: usize| -> Result<&str> {
        let pair = s.question_pairs.get(q).ok_or_else(|| {
            ScenarioError::Invalid {
                field: "question_pairs".into(),
                message: "analysis needs two question pairs".into(),
            }
        })?;
        Ok(s.acts[pair.first].label.as_str())
    };
    Ok((count_preferring(c, label(0)?)?, count_preferring(c, label(1)?)?))
}

/// Shares preferring the first-listed act of each question pair.
pub fn preference_weights(c: &ExperimentCounts, s: &Scenario) -> Result<(f64, f64)> {
    let (k1, k2) = question_counts(c, s)?;
    let n = c.total() as f64;
    Ok((k1 as f64 / n, k2 as f64 / n))
}

/// `(n_f1f4 + n_f2f3) / N`.
pub fn inversion_rate(c: &ExperimentCounts) -> f64 {
    (c.n_f1f4 + c.n_f2f3) as f64 / c.total() as f64
}

fn check_binomial(k: u64, n: u64, p0: f64) -> Result<()> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::DegenerateNull(p0));
    }
    if k > n {
        return Err(StatsError::CountOutOfRange { k, n });
    }
    Ok(())
}

/// Two-sided normal-approximation test without continuity correction.
pub fn binomial_z_test(k: u64, n: u64, p0: f64) -> Result<f64> {
    check_binomial(k, n, p0)?;
    let (k, n) = (k as f64, n as f64);
    let z = (k - n * p0) / (n * p0 * (1.0 - p0)).sqrt();
    Ok(erfc(z.abs() / std::f64::consts::SQRT_2))
}

fn ln_pmf(i: u64, n: u64, ln_p: f64, ln_q: f64) -> f64 {
    let (i, n) = (i as f64, n as f64);
    // grouping keeps pmf(i) and pmf(n − i) bitwise equal when p0 = 1/2
    ln_gamma(n + 1.0) - (ln_gamma(i + 1.0) + ln_gamma(n - i + 1.0)) + (i * ln_p + (n - i) * ln_q)
}

/// `ln Σ exp(terms)`, summed in the given order.
fn ln_sum(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Two-sided exact binomial test: twice the smaller tail, capped at 1.
/// Tails are summed in log space from the far end inward.
pub fn exact_binomial_test(k: u64, n: u64, p0: f64) -> Result<f64> {
    check_binomial(k, n, p0)?;
    let (ln_p, ln_q) = (p0.ln(), (1.0 - p0).ln());
    let lower = ln_sum((0..=k).map(|i| ln_pmf(i, n, ln_p, ln_q)));
    let upper = ln_sum((k..=n).rev().map(|i| ln_pmf(i, n, ln_p, ln_q)));
    Ok((2.0 * lower.min(upper).exp()).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: Option<f64>,
    /// `None` when the test is undefined for these counts.
    pub p_value: Option<f64>,
}

pub const MCNEMAR_CHI2: &str = "mcnemar_chi2";
pub const MCNEMAR_CHI2_CORRECTED: &str = "mcnemar_chi2_corrected";
pub const MCNEMAR_EXACT: &str = "mcnemar_exact";

/// McNemar variants on the discordant cells `n_f1f4` and `n_f2f3`.
pub fn mcnemar_tests(c: &ExperimentCounts) -> Vec<TestResult> {
    let (b, d) = (c.n_f1f4 as f64, c.n_f2f3 as f64);
    let discordant = c.n_f1f4 + c.n_f2f3;
    let chi2 = |stat: f64| TestResult {
        name: String::new(),
        statistic: Some(stat),
        p_value: Some(erfc((stat / 2.0).sqrt())),
    };
    let (plain, corrected) = if discordant == 0 {
        let undefined = TestResult {
            name: String::new(),
            statistic: None,
            p_value: None,
        };
        (undefined.clone(), undefined)
    } else {
        (
            chi2((b - d).powi(2) / (b + d)),
            chi2(((b - d).abs() - 1.0).max(0.0).powi(2) / (b + d)),
        )
    };
    let exact = TestResult {
        name: String::new(),
        statistic: Some(b),
        p_value: Some(if discordant == 0 {
            1.0
        } else {
            exact_binomial_test(c.n_f1f4, discordant, 0.5).expect("valid binomial")
        }),
    };
    [(MCNEMAR_CHI2, plain), (MCNEMAR_CHI2_CORRECTED, corrected), (MCNEMAR_EXACT, exact)]
        .into_iter()
        .map(|(name, mut t)| {
            t.name = name.to_string();
            t
        })
        .collect()
}

/// Values printed in the published report for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrintedValues {
    pub count_q1: u64,
    pub count_q2: u64,
    pub weight_q1: f64,
    pub weight_q2: f64,
    pub p_q1: f64,
    pub p_q2: f64,
    pub inversion_rate: f64,
    pub p_cross: f64,
}

pub fn printed_values(id: BuiltinScenario) -> PrintedValues {
    let v = |count_q1, count_q2, weight_q1, weight_q2, p_q1, p_q2, inversion_rate, p_cross| {
        PrintedValues {
            count_q1,
            count_q2,
            weight_q1,
            weight_q2,
            p_q1,
            p_q2,
            inversion_rate,
            p_cross,
        }
    };
    match id {
        BuiltinScenario::Ellsberg3 => v(163, 156, 0.815, 0.780, 1.25e-23, 5.48e-18, 0.655, 1.91e-35),
        BuiltinScenario::Machina5051 => v(116, 126, 0.580, 0.630, 2.33e-2, 1.93e-4, 0.380, 7.48e-7),
        BuiltinScenario::ReflectionLower => {
            v(115, 120, 0.575, 0.630, 3.36e-2, 1.58e-1, 0.615, 0.6533)
        }
        BuiltinScenario::ReflectionUpper => {
            v(134, 104, 0.670, 0.620, 7.89e-7, 5.73e-1, 0.650, 8.18e-3)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperCheck {
    pub quantity: String,
    pub printed: f64,
    /// Every implemented variant with its value.
    pub variants: Vec<(String, f64)>,
    pub reproduced_by: Option<String>,
    pub flagged: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValues {
    pub z_test: f64,
    pub exact: f64,
}

impl PValues {
    fn new(k: u64, n: u64) -> Self {
        PValues {
            z_test: binomial_z_test(k, n, 0.5).expect("valid binomial"),
            exact: exact_binomial_test(k, n, 0.5).expect("valid binomial"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub scenario: String,
    pub counts: ExperimentCounts,
    pub total: u64,
    /// e.g. `"f1 over f2"`.
    pub question_1: String,
    pub question_2: String,
    pub count_q1: u64,
    pub count_q2: u64,
    pub weight_q1: f64,
    pub weight_q2: f64,
    pub inversion_rate: f64,
    pub p_q1: PValues,
    pub p_q2: PValues,
    pub cross_test: Vec<TestResult>,
    /// Comparison with the published values; empty for other counts.
    pub paper: Vec<PaperCheck>,
    pub flags: Vec<String>,
}

impl StatsReport {
    pub fn cross(&self, name: &str) -> Option<&TestResult> {
        self.cross_test.iter().find(|t| t.name == name)
    }
}

fn relative_match(value: f64, printed: f64) -> bool {
    ((value - printed) / printed).abs() <= REPRODUCTION_TOL
}

fn check_p(quantity: &str, printed: f64, variants: Vec<(String, f64)>) -> PaperCheck {
    let reproduced_by = variants
        .iter()
        .find(|(_, v)| relative_match(*v, printed))
        .map(|(n, _)| n.clone());
    PaperCheck {
        quantity: quantity.to_string(),
        printed,
        flagged: reproduced_by.is_none(),
        reproduced_by,
        variants,
        note: None,
    }
}

fn check_ratio(quantity: &str, printed: f64, value: f64) -> PaperCheck {
    // printed to three decimals
    let ok = (value - printed).abs() < 5e-4;
    PaperCheck {
        quantity: quantity.to_string(),
        printed,
        variants: vec![("count_ratio".into(), value)],
        reproduced_by: ok.then(|| "count_ratio".to_string()),
        flagged: !ok,
        note: None,
    }
}

fn paper_checks(report: &StatsReport, id: BuiltinScenario) -> Vec<PaperCheck> {
    let printed = printed_values(id);
    let n = report.total;
    let pv = |p: &PValues| {
        vec![
            ("z_test".to_string(), p.z_test),
            ("exact_binomial".to_string(), p.exact),
        ]
    };
    let mut checks = vec![
        check_ratio("weight_q1", printed.weight_q1, report.weight_q1),
        check_ratio("weight_q2", printed.weight_q2, report.weight_q2),
        check_ratio("inversion_rate", printed.inversion_rate, report.inversion_rate),
        check_p("p_q1", printed.p_q1, pv(&report.p_q1)),
        check_p("p_q2", printed.p_q2, pv(&report.p_q2)),
        check_p(
            "p_cross",
            printed.p_cross,
            report
                .cross_test
                .iter()
                .filter_map(|t| t.p_value.map(|p| (t.name.clone(), p)))
                .collect(),
        ),
    ];

    for (q, stated, table) in [
        (1, printed.count_q1, report.count_q1),
        (2, printed.count_q2, report.count_q2),
    ] {
        if stated == table {
            continue;
        }
        let weight = format!("weight_q{q}");
        let p = format!("p_q{q}");
        for c in checks.iter_mut() {
            if c.quantity == weight {
                c.note = Some(format!(
                    "text states {stated}/{n} ({}); table counts give {table}/{n}",
                    stated as f64 / n as f64
                ));
                c.flagged = true;
            } else if c.quantity == p {
                let at_stated = binomial_z_test(stated, n, 0.5).expect("valid binomial");
                c.note = Some(format!(
                    "printed value matches the table count {table}, not the stated {stated} (z-test at {stated}: {at_stated:.3e})"
                ));
                c.flagged = true;
            }
        }
    }
    for c in checks.iter_mut() {
        if c.quantity.starts_with("weight") && c.flagged && c.note.is_none() {
            c.note = Some(format!(
                "printed {} but the table counts give {}",
                c.printed, c.variants[0].1
            ));
        }
    }
    checks
}

/// Full report for one row of counts. Published values are compared only
/// when the counts are the published row for `s`.
pub fn analyze(c: &ExperimentCounts, s: &Scenario) -> Result<StatsReport> {
    let (k1, k2) = question_counts(c, s)?;
    let n = c.total();
    let (w1, w2) = preference_weights(c, s)?;
    let q = |i: usize| {
        let p = &s.question_pairs[i];
        format!("{} over {}", s.acts[p.first].label, s.acts[p.second].label)
    };
    let mut report = StatsReport {
        scenario: s.name.clone(),
        counts: *c,
        total: n,
        question_1: q(0),
        question_2: q(1),
        count_q1: k1,
        count_q2: k2,
        weight_q1: w1,
        weight_q2: w2,
        inversion_rate: inversion_rate(c),
        p_q1: PValues::new(k1, n),
        p_q2: PValues::new(k2, n),
        cross_test: mcnemar_tests(c),
        paper: vec![],
        flags: vec![],
    };
    if let Some(id) = s.builtin_id() {
        if ExperimentCounts::table(id) == *c {
            report.paper = paper_checks(&report, id);
        }
    }
    for t in &report.cross_test {
        if t.p_value.is_none() {
            report.flags.push(format!("{} undefined: no discordant pairs", t.name));
        }
    }
    for check in report.paper.iter().filter(|c| c.flagged) {
        let printed = crate::report::fmt_value(check.printed, false);
        let flag = match &check.note {
            Some(note) => format!("{}: printed {printed} flagged; {note}", check.quantity),
            None => {
                let closest = check
                    .variants
                    .iter()
                    .map(|(n, v)| format!("{n} {v:.3e}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!(
                    "{}: printed {printed} not reproduced; no implemented variant within 10% ({closest})",
                    check.quantity
                )
            }
        };
        report.flags.push(flag);
    }
    Ok(report)
}

/// One counts row, optionally tagged with a scenario name.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CountsRow {
    #[serde(default)]
    pub scenario: Option<String>,
    pub n_f1f4: u64,
    pub n_f1f3: u64,
    pub n_f2f3: u64,
    pub n_f2f4: u64,
}

impl CountsRow {
    pub fn counts(&self) -> Result<ExperimentCounts> {
        Ok(ExperimentCounts::new(
            self.n_f1f4,
            self.n_f1f3,
            self.n_f2f3,
            self.n_f2f4,
        )?)
    }
}

/// Parses a counts CSV with header `n_f1f4,n_f1f3,n_f2f3,n_f2f4` and an
/// optional `scenario` column.
pub fn read_counts_csv(text: &str) -> Result<Vec<CountsRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = reader
        .deserialize::<CountsRow>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| StatsError::Csv(e.to_string()))?;
    if rows.is_empty() {
        return Err(StatsError::NoRows);
    }
    for row in &rows {
        row.counts()?;
    }
    Ok(rows)
}

/// Bundled transcription of the published count table.
pub const EXPERIMENT_COUNTS_CSV: &str = include_str!("../data/choice_counts.csv");

/// Flat CSV rendering, one line per report.
pub fn reports_to_csv(reports: &[StatsReport], format_value: impl Fn(f64) -> String) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "scenario",
        "n_f1f4",
        "n_f1f3",
        "n_f2f3",
        "n_f2f4",
        "total",
        "weight_q1",
        "weight_q2",
        "inversion_rate",
        "p_q1_z",
        "p_q1_exact",
        "p_q2_z",
        "p_q2_exact",
        MCNEMAR_CHI2,
        MCNEMAR_CHI2_CORRECTED,
        MCNEMAR_EXACT,
        "flags",
    ])
    .expect("in-memory write");
    for r in reports {
        let mut rec = vec![
            r.scenario.clone(),
            r.counts.n_f1f4.to_string(),
            r.counts.n_f1f3.to_string(),
            r.counts.n_f2f3.to_string(),
            r.counts.n_f2f4.to_string(),
            r.total.to_string(),
        ];
        for v in [
            r.weight_q1,
            r.weight_q2,
            r.inversion_rate,
            r.p_q1.z_test,
            r.p_q1.exact,
            r.p_q2.z_test,
            r.p_q2.exact,
        ] {
            rec.push(format_value(v));
        }
        for t in &r.cross_test {
            rec.push(t.p_value.map(&format_value).unwrap_or_default());
        }
        rec.push(r.flags.join(" | "));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::builtin;

    fn table(id: BuiltinScenario) -> ExperimentCounts {
        ExperimentCounts::table(id)
    }

    /// Brute-force oracle: exact rational arithmetic on binomial
    /// coefficients via f64 products, valid for small n.
    fn naive_two_sided(k: u64, n: u64) -> f64 {
        let pmf = |i: u64| {
            let mut c = 1.0f64;
            for j in 0..i {
                c = c * (n - j) as f64 / (j + 1) as f64;
            }
            c * 0.5f64.powi(n as i32)
        };
        let lower: f64 = (0..=k).map(pmf).sum();
        let upper: f64 = (k..=n).map(pmf).sum();
        (2.0 * lower.min(upper)).min(1.0)
    }

    #[test]
    fn weights_and_inversions() {
        let e = builtin("ellsberg3").unwrap();
        assert_eq!(preference_weights(&table(BuiltinScenario::Ellsberg3), &e).unwrap(), (0.815, 0.780));
        let m = builtin("machina5051").unwrap();
        assert_eq!(preference_weights(&table(BuiltinScenario::Machina5051), &m).unwrap(), (0.580, 0.630));
        let all = ExperimentCounts::new(10, 0, 0, 0).unwrap();
        assert_eq!(preference_weights(&all, &e).unwrap(), (1.0, 1.0));
        assert_eq!(inversion_rate(&table(BuiltinScenario::Ellsberg3)), 0.655);
        assert_eq!(inversion_rate(&table(BuiltinScenario::Machina5051)), 0.380);
        assert_eq!(inversion_rate(&table(BuiltinScenario::ReflectionUpper)), 0.650);
        for id in BuiltinScenario::ALL {
            let c = table(id);
            let rest = (c.n_f1f3 + c.n_f2f4) as f64 / c.total() as f64;
            assert_eq!(inversion_rate(&c) + rest, 1.0);
        }
    }

    #[test]
    fn z_test_values() {
        let p = binomial_z_test(116, 200, 0.5).unwrap();
        assert!((p - 2.36e-2).abs() < 1e-4);
        assert!(((p - 2.33e-2) / 2.33e-2).abs() < 0.05);
        let p = binomial_z_test(104, 200, 0.5).unwrap();
        assert!(((p - 5.73e-1) / 5.73e-1).abs() < 0.05);
        assert_eq!(binomial_z_test(100, 200, 0.5).unwrap(), 1.0);
        assert!(binomial_z_test(1, 2, 0.0).is_err());
        assert!(binomial_z_test(3, 2, 0.5).is_err());
    }

    #[test]
    fn exact_test_against_naive_sum() {
        for n in [1u64, 7, 20, 60] {
            for k in 0..=n {
                let a = exact_binomial_test(k, n, 0.5).unwrap();
                let b = naive_two_sided(k, n);
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300) + 1e-15, "{k}/{n}: {a} {b}");
            }
        }
        let edge = exact_binomial_test(30, 30, 0.5).unwrap();
        assert!((edge / (2.0 * 0.5f64.powi(30)) - 1.0).abs() < 1e-12);
        assert_eq!(exact_binomial_test(1, 1, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn exact_test_tail_and_symmetry() {
        let p = exact_binomial_test(163, 200, 0.5).unwrap();
        assert!(p > 1e-20 && p < 1e-19, "{p}");
        for k in 0..=200 {
            assert_eq!(
                exact_binomial_test(k, 200, 0.5).unwrap(),
                exact_binomial_test(200 - k, 200, 0.5).unwrap()
            );
        }
        let z = binomial_z_test(116, 200, 0.5).unwrap();
        let x = exact_binomial_test(116, 200, 0.5).unwrap();
        assert!(x / z < 1.3 && z / x < 1.3);
        // the normal approximation stays within a factor 1.5 only for
        // 54 ≤ k ≤ 146; further out the ratio grows (≈6 at k = 40)
        let ratio = |k| {
            let z = binomial_z_test(k, 200, 0.5).unwrap();
            let x = exact_binomial_test(k, 200, 0.5).unwrap();
            (x / z).max(z / x)
        };
        for k in 54..=146 {
            assert!(ratio(k) < 1.5, "{k}");
        }
        assert!(ratio(40) > 5.0 && ratio(160) > 5.0);
    }

    #[test]
    fn mcnemar_variants() {
        let r = mcnemar_tests(&table(BuiltinScenario::ReflectionLower));
        let p = r[0].p_value.unwrap();
        assert!(((p - 0.6533) / 0.6533).abs() < 0.02);
        let r = mcnemar_tests(&table(BuiltinScenario::ReflectionUpper));
        let p = r[0].p_value.unwrap();
        assert!(((p - 8.18e-3) / 8.18e-3).abs() < 0.10);
        assert!((p - 8.509e-3).abs() < 1e-5);

        let sym = ExperimentCounts::new(30, 5, 30, 5).unwrap();
        for t in mcnemar_tests(&sym) {
            assert_eq!(t.p_value, Some(1.0), "{}", t.name);
        }
        let none = ExperimentCounts::new(0, 5, 0, 5).unwrap();
        let t = mcnemar_tests(&none);
        assert_eq!(t[0].p_value, None);
        assert_eq!(t[1].p_value, None);
        assert_eq!(t[2].p_value, Some(1.0));
    }

    #[test]
    fn analysis_flags() {
        let s = builtin("reflection_lower").unwrap();
        let r = analyze(&table(BuiltinScenario::ReflectionLower), &s).unwrap();
        assert_eq!(r.count_q2, 110);
        assert_eq!(r.weight_q2, 0.55);
        let w = r.paper.iter().find(|c| c.quantity == "weight_q2").unwrap();
        assert!(w.flagged);
        let p = r.paper.iter().find(|c| c.quantity == "p_q2").unwrap();
        assert!(p.flagged);
        assert_eq!(p.reproduced_by.as_deref(), Some("z_test"));
        let cross = r.paper.iter().find(|c| c.quantity == "p_cross").unwrap();
        assert!(!cross.flagged);
        assert_eq!(cross.reproduced_by.as_deref(), Some(MCNEMAR_CHI2));

        let e = builtin("ellsberg3").unwrap();
        let r = analyze(&table(BuiltinScenario::Ellsberg3), &e).unwrap();
        assert!(r.p_q1.exact < 1e-10 && r.p_q2.exact < 1e-10);
        assert!(r.flags.iter().any(|f| f.starts_with("p_cross")));
        assert!(!r.paper.iter().find(|c| c.quantity == "weight_q1").unwrap().flagged);
    }

    #[test]
    fn uniform_row() {
        let s = builtin("ellsberg3").unwrap();
        let c = ExperimentCounts::new(50, 50, 50, 50).unwrap();
        let r = analyze(&c, &s).unwrap();
        assert_eq!((r.weight_q1, r.weight_q2, r.inversion_rate), (0.5, 0.5, 0.5));
        for p in [r.p_q1.z_test, r.p_q1.exact, r.p_q2.z_test, r.p_q2.exact] {
            assert_eq!(p, 1.0);
        }
        for t in &r.cross_test {
            assert_eq!(t.p_value, Some(1.0));
        }
        assert!(r.paper.is_empty() && r.flags.is_empty());
    }

    #[test]
    fn csv_ingestion() {
        let rows = read_counts_csv(EXPERIMENT_COUNTS_CSV).unwrap();
        assert_eq!(rows.len(), 4);
        for (row, id) in rows.iter().zip(BuiltinScenario::ALL) {
            assert_eq!(row.scenario.as_deref(), Some(id.name()));
            assert_eq!(row.counts().unwrap(), table(id));
        }
        let bare = read_counts_csv("n_f1f4,n_f1f3,n_f2f3,n_f2f4\n1,2,3,4\n").unwrap();
        assert_eq!(bare[0].scenario, None);
        assert_eq!(read_counts_csv(""), Err(StatsError::NoRows));
        assert_eq!(read_counts_csv("n_f1f4,n_f1f3,n_f2f3,n_f2f4\n"), Err(StatsError::NoRows));
        assert!(matches!(read_counts_csv("a,b\n1,2\n"), Err(StatsError::Csv(_))));
        assert!(read_counts_csv("n_f1f4,n_f1f3,n_f2f3,n_f2f4\n0,0,0,0\n").is_err());
    }
}
