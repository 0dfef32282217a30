//! Decision scenarios: events, acts (payoff rows), known-probability groups
//! and the question pairs put to participants.
//!
//! The four urn tables ship as built-ins; user scenarios are read from TOML
//! documents with the same shape (see `data/scenarios/*.toml`).

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{HermitianOp, HilbertError};

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (expected one of ellsberg3, machina5051, reflection_lower, reflection_upper)")]
    UnknownScenario(String),
    #[error("failed to parse scenario document: {0}")]
    Parse(String),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("constraints do not partition the events: {0}")]
    Partition(String),
    #[error("utility function is not strictly increasing: {0}")]
    NotIncreasing(String),
    #[error("utility undefined at payoff {0}")]
    UndefinedUtility(f64),
    #[error("unknown utility spec '{0}' (expected sqrt, linear, identity or power:<alpha>)")]
    UnknownUtility(String),
    #[error("act '{0}' does not belong to this scenario")]
    ForeignAct(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

/// A strictly increasing utility over monetary payoffs.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum UtilityFunction {
    #[default]
    Sqrt,
    Power(f64),
    Linear { slope: f64, intercept: f64 },
    Identity,
    /// Explicit `(payoff, utility)` pairs; undefined elsewhere.
    Table(Vec<(f64, f64)>),
}


impl UtilityFunction {
    pub fn eval(&self, x: f64) -> Option<f64> {
        let y = match self {
            UtilityFunction::Sqrt => {
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
            UtilityFunction::Power(a) => {
                if x < 0.0 || *a <= 0.0 {
                    return None;
                }
                x.powf(*a)
            }
            UtilityFunction::Linear { slope, intercept } => slope * x + intercept,
            UtilityFunction::Identity => x,
            UtilityFunction::Table(rows) => rows.iter().find(|(p, _)| *p == x).map(|(_, u)| *u)?,
        };
        y.is_finite().then_some(y)
    }

    /// Checks that `u` is defined on `payoffs` and strictly increasing on a
    /// grid spanning their range (for tables: on the tabulated payoffs).
    pub fn validate_on(&self, payoffs: &[f64]) -> Result<()> {
        let mut xs: Vec<f64> = payoffs.to_vec();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for &x in &xs {
            if self.eval(x).is_none() {
                return Err(ScenarioError::UndefinedUtility(x));
            }
        }
        let mut grid = xs.clone();
        if !matches!(self, UtilityFunction::Table(_)) {
            if let (Some(&lo), Some(&hi)) = (xs.first(), xs.last()) {
                const STEPS: usize = 256;
                grid.extend((0..=STEPS).map(|k| lo + (hi - lo) * k as f64 / STEPS as f64));
                grid.sort_by(f64::total_cmp);
                grid.dedup();
            }
        }
        if grid.len() == 1 {
            // probe a neighbour so that constant functions are still rejected
            let x = grid[0];
            grid.push(x + 1.0);
        }
        for w in grid.windows(2) {
            let (a, b) = (self.eval(w[0]), self.eval(w[1]));
            match (a, b) {
                (Some(ua), Some(ub)) if ub > ua => {}
                (Some(ua), Some(ub)) => {
                    return Err(ScenarioError::NotIncreasing(format!(
                        "u({}) = {ua} >= u({}) = {ub}",
                        w[0], w[1]
                    )))
                }
                (None, _) => return Err(ScenarioError::UndefinedUtility(w[0])),
                (_, None) => return Err(ScenarioError::UndefinedUtility(w[1])),
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> String {
        match self {
            UtilityFunction::Sqrt => "sqrt".into(),
            UtilityFunction::Power(a) => format!("power:{a}"),
            UtilityFunction::Linear { slope, intercept } if *slope == 1.0 && *intercept == 0.0 => {
                "linear".into()
            }
            UtilityFunction::Linear { slope, intercept } => format!("linear:{slope}:{intercept}"),
            UtilityFunction::Identity => "identity".into(),
            UtilityFunction::Table(_) => "table".into(),
        }
    }
}

impl FromStr for UtilityFunction {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || ScenarioError::UnknownUtility(s.to_string());
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match (head, rest.as_slice()) {
            ("sqrt", []) => Ok(UtilityFunction::Sqrt),
            ("identity", []) => Ok(UtilityFunction::Identity),
            ("linear", []) => Ok(UtilityFunction::Linear {
                slope: 1.0,
                intercept: 0.0,
            }),
            ("linear", [a, b]) => Ok(UtilityFunction::Linear {
                slope: num(a)?,
                intercept: num(b)?,
            }),
            ("power", [a]) => {
                let a = num(a)?;
                if a > 0.0 && a.is_finite() {
                    Ok(UtilityFunction::Power(a))
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }
}

/// `f = (E_1, x_1; …; E_n, x_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Act {
    pub label: String,
    pub payoffs: Vec<f64>,
}

impl Act {
    pub fn new(label: impl Into<String>, payoffs: Vec<f64>) -> Self {
        Act {
            label: label.into(),
            payoffs,
        }
    }

    /// Utility of the payoff on each event, in event order.
    pub fn utilities(&self, u: &UtilityFunction) -> Result<Vec<f64>> {
        self.payoffs
            .iter()
            .map(|&x| u.eval(x).ok_or(ScenarioError::UndefinedUtility(x)))
            .collect()
    }
}

/// A set of events with a known total probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityConstraint {
    pub event_indices: Vec<usize>,
    pub total: Rational,
}

impl ProbabilityConstraint {
    pub fn new(event_indices: Vec<usize>, total: Rational) -> Self {
        ProbabilityConstraint {
            event_indices,
            total,
        }
    }

    pub fn total_f64(&self) -> f64 {
        *self.total.numer() as f64 / *self.total.denom() as f64
    }
}

/// One binary choice, oriented so that `first` is the act whose preference
/// share is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPair {
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub events: Vec<String>,
    pub acts: Vec<Act>,
    pub constraints: Vec<ProbabilityConstraint>,
    pub question_pairs: Vec<QuestionPair>,
    /// Number of balls in the urn, when the scenario is an urn.
    pub urn_size: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinScenario {
    Ellsberg3,
    Machina5051,
    ReflectionLower,
    ReflectionUpper,
}

impl BuiltinScenario {
    pub const ALL: [BuiltinScenario; 4] = [
        BuiltinScenario::Ellsberg3,
        BuiltinScenario::Machina5051,
        BuiltinScenario::ReflectionLower,
        BuiltinScenario::ReflectionUpper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinScenario::Ellsberg3 => "ellsberg3",
            BuiltinScenario::Machina5051 => "machina5051",
            BuiltinScenario::ReflectionLower => "reflection_lower",
            BuiltinScenario::ReflectionUpper => "reflection_upper",
        }
    }

    pub fn scenario(self) -> Scenario {
        let r = |n, d| Rational::new(n, d);
        let act = |l: &str, p: [f64; 4]| Act::new(l, p.to_vec());
        let four = |name: &str, acts: Vec<Act>, t1: Rational, t2: Rational, urn, second: (usize, usize)| Scenario {
            name: name.to_string(),
            events: ["R", "Y", "B", "G"].map(String::from).to_vec(),
            acts,
            constraints: vec![
                ProbabilityConstraint::new(vec![0, 1], t1),
                ProbabilityConstraint::new(vec![2, 3], t2),
            ],
            question_pairs: vec![
                QuestionPair { first: 0, second: 1 },
                QuestionPair {
                    first: second.0,
                    second: second.1,
                },
            ],
            urn_size: Some(urn),
        };
        match self {
            BuiltinScenario::Ellsberg3 => Scenario {
                name: self.name().into(),
                events: ["R", "Y", "B"].map(String::from).to_vec(),
                acts: vec![
                    Act::new("f1", vec![100.0, 0.0, 0.0]),
                    Act::new("f2", vec![0.0, 0.0, 100.0]),
                    Act::new("f3", vec![100.0, 100.0, 0.0]),
                    Act::new("f4", vec![0.0, 100.0, 100.0]),
                ],
                constraints: vec![
                    ProbabilityConstraint::new(vec![0], r(1, 3)),
                    ProbabilityConstraint::new(vec![1, 2], r(2, 3)),
                ],
                question_pairs: vec![
                    QuestionPair { first: 0, second: 1 },
                    QuestionPair { first: 3, second: 2 },
                ],
                urn_size: Some(90),
            },
            BuiltinScenario::Machina5051 => four(
                self.name(),
                vec![
                    act("f1", [202.0, 202.0, 101.0, 101.0]),
                    act("f2", [202.0, 101.0, 202.0, 101.0]),
                    act("f3", [303.0, 202.0, 101.0, 0.0]),
                    act("f4", [303.0, 101.0, 202.0, 0.0]),
                ],
                r(50, 101),
                r(51, 101),
                101,
                (3, 2),
            ),
            BuiltinScenario::ReflectionLower => four(
                self.name(),
                vec![
                    act("f1", [0.0, 50.0, 25.0, 25.0]),
                    act("f2", [0.0, 25.0, 50.0, 25.0]),
                    act("f3", [25.0, 50.0, 25.0, 0.0]),
                    act("f4", [25.0, 25.0, 50.0, 0.0]),
                ],
                r(1, 2),
                r(1, 2),
                20,
                (2, 3),
            ),
            BuiltinScenario::ReflectionUpper => four(
                self.name(),
                vec![
                    act("f1", [50.0, 50.0, 25.0, 75.0]),
                    act("f2", [50.0, 25.0, 50.0, 75.0]),
                    act("f3", [75.0, 50.0, 25.0, 50.0]),
                    act("f4", [75.0, 25.0, 50.0, 50.0]),
                ],
                r(1, 2),
                r(1, 2),
                20,
                (2, 3),
            ),
        }
    }
}

impl fmt::Display for BuiltinScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinScenario {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self> {
        BuiltinScenario::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.to_string()))
    }
}

pub fn builtin(name: &str) -> Result<Scenario> {
    Ok(name.parse::<BuiltinScenario>()?.scenario())
}

impl Scenario {
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn act(&self, label: &str) -> Option<(usize, &Act)> {
        self.acts.iter().enumerate().find(|(_, a)| a.label == label)
    }

    pub fn act_index(&self, label: &str) -> Option<usize> {
        self.act(label).map(|(i, _)| i)
    }

    /// Which builtin this scenario is, by name.
    pub fn builtin_id(&self) -> Option<BuiltinScenario> {
        self.name.parse().ok()
    }

    /// The constraint group containing event `i`.
    pub fn group_of(&self, event: usize) -> Option<&ProbabilityConstraint> {
        self.constraints
            .iter()
            .find(|c| c.event_indices.contains(&event))
    }

    /// Every payoff appearing in the payoff matrix.
    pub fn payoffs(&self) -> Vec<f64> {
        self.acts.iter().flat_map(|a| a.payoffs.iter().copied()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.events.len();
        if n == 0 {
            return Err(invalid("events", "at least one event is required"));
        }
        for (i, e) in self.events.iter().enumerate() {
            if self.events[..i].contains(e) {
                return Err(invalid("events", format!("duplicate event label '{e}'")));
            }
        }
        if self.acts.is_empty() {
            return Err(invalid("acts", "at least one act is required"));
        }
        for (i, act) in self.acts.iter().enumerate() {
            if act.payoffs.len() != n {
                return Err(invalid(
                    format!("acts[{i}].payoffs"),
                    format!(
                        "act '{}' has {} payoffs but the scenario has {n} events",
                        act.label,
                        act.payoffs.len()
                    ),
                ));
            }
            if let Some(x) = act.payoffs.iter().find(|x| !x.is_finite()) {
                return Err(invalid(
                    format!("acts[{i}].payoffs"),
                    format!("act '{}' has non-finite payoff {x}", act.label),
                ));
            }
            if self.acts[..i].iter().any(|a| a.label == act.label) {
                return Err(invalid(
                    format!("acts[{i}].label"),
                    format!("duplicate act label '{}'", act.label),
                ));
            }
        }

        let mut owner = vec![None::<usize>; n];
        let mut sum = Rational::new(0, 1);
        for (ci, c) in self.constraints.iter().enumerate() {
            let field = format!("constraints[{ci}]");
            if c.total < Rational::new(0, 1) || c.total > Rational::new(1, 1) {
                return Err(invalid(
                    format!("{field}.total"),
                    format!("total {} outside [0, 1]", c.total),
                ));
            }
            if c.event_indices.is_empty() {
                return Err(invalid(format!("{field}.events"), "empty event set"));
            }
            for &e in &c.event_indices {
                if e >= n {
                    return Err(invalid(
                        format!("{field}.events"),
                        format!("event index {e} out of range (scenario has {n} events)"),
                    ));
                }
                if let Some(prev) = owner[e] {
                    return Err(ScenarioError::Partition(format!(
                        "event {} appears in constraints[{prev}] and {field}",
                        self.events[e]
                    )));
                }
                owner[e] = Some(ci);
            }
            sum += c.total;
        }
        if let Some(e) = owner.iter().position(Option::is_none) {
            return Err(ScenarioError::Partition(format!(
                "event {} is not covered by any constraint",
                self.events[e]
            )));
        }
        if sum != Rational::new(1, 1) {
            return Err(ScenarioError::Partition(format!(
                "constraint totals sum to {sum}, not 1"
            )));
        }

        for (qi, q) in self.question_pairs.iter().enumerate() {
            if q.first >= self.acts.len() || q.second >= self.acts.len() || q.first == q.second {
                return Err(invalid(
                    format!("question_pairs[{qi}]"),
                    format!(
                        "pair ({}, {}) must reference two distinct acts among {}",
                        q.first,
                        q.second,
                        self.acts.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> ScenarioDocument {
        ScenarioDocument {
            name: self.name.clone(),
            events: self.events.clone(),
            urn_size: self.urn_size,
            acts: self.acts.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintDocument {
                    events: c.event_indices.clone(),
                    total: c.total.to_string(),
                })
                .collect(),
            question_pairs: self
                .question_pairs
                .iter()
                .map(|q| [q.first, q.second])
                .collect(),
        }
    }

    /// TOML rendering that [`load_scenario`] reads back.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("scenario documents always serialize")
    }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// On-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub name: String,
    pub events: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urn_size: Option<u32>,
    pub question_pairs: Vec<[usize; 2]>,
    pub acts: Vec<Act>,
    pub constraints: Vec<ConstraintDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDocument {
    /// Zero-based event indices.
    pub events: Vec<usize>,
    /// Integer fraction `"p/q"` (or an integer).
    pub total: String,
}

fn parse_rational(field: &str, s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || {
        invalid(
            field,
            format!("'{s}' is not an integer fraction of the form \"p/q\""),
        )
    };
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: i64 = n.parse().map_err(|_| bad())?;
    let d: i64 = d.parse().map_err(|_| bad())?;
    if d == 0 {
        return Err(invalid(field, "zero denominator"));
    }
    Ok(Rational::new(n, d))
}

impl TryFrom<ScenarioDocument> for Scenario {
    type Error = ScenarioError;

    fn try_from(doc: ScenarioDocument) -> Result<Self> {
        let constraints = doc
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let total = parse_rational(&format!("constraints[{i}].total"), &c.total)?;
                Ok(ProbabilityConstraint::new(c.events.clone(), total))
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Scenario {
            name: doc.name,
            events: doc.events,
            acts: doc.acts,
            constraints,
            question_pairs: doc
                .question_pairs
                .iter()
                .map(|[a, b]| QuestionPair {
                    first: *a,
                    second: *b,
                })
                .collect(),
            urn_size: doc.urn_size,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Parses and validates a TOML scenario document.
pub fn load_scenario(document: &str) -> Result<Scenario> {
    let doc: ScenarioDocument =
        toml::from_str(document).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    Scenario::try_from(doc)
}

/// Diagonal operator `Σ_i u(x_i) |α_i⟩⟨α_i|` for an act of `s`.
pub fn act_operator(s: &Scenario, act: &Act, u: &UtilityFunction) -> Result<HermitianOp> {
    if !s.acts.iter().any(|a| a == act) {
        return Err(ScenarioError::ForeignAct(act.label.clone()));
    }
    u.validate_on(&s.payoffs())?;
    let eigen = act.utilities(u)?;
    Ok(HermitianOp::diagonal(&eigen)?)
}

/// One row of the experiment table: counts of participants per choice pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentCounts {
    pub n_f1f4: u64,
    pub n_f1f3: u64,
    pub n_f2f3: u64,
    pub n_f2f4: u64,
}

impl ExperimentCounts {
    pub fn new(n_f1f4: u64, n_f1f3: u64, n_f2f3: u64, n_f2f4: u64) -> Result<Self> {
        let c = ExperimentCounts {
            n_f1f4,
            n_f1f3,
            n_f2f3,
            n_f2f4,
        };
        if c.total() == 0 {
            return Err(invalid("counts", "total participant count must be positive"));
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.n_f1f4 + self.n_f1f3 + self.n_f2f3 + self.n_f2f4
    }

    /// The published table rows.
    pub fn table(id: BuiltinScenario) -> Self {
        let (a, b, c, d) = match id {
            BuiltinScenario::Ellsberg3 => (125, 38, 6, 31),
            BuiltinScenario::Machina5051 => (59, 57, 17, 67),
            BuiltinScenario::ReflectionLower => (64, 51, 59, 26),
            BuiltinScenario::ReflectionUpper => (80, 54, 50, 16),
        };
        ExperimentCounts {
            n_f1f4: a,
            n_f1f3: b,
            n_f2f3: c,
            n_f2f4: d,
        }
    }
}
