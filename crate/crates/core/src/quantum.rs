//! State-dependent expected utility: admissible states under a scenario's
//! constraints, Born-rule subjective probabilities and `W_v(f) = ⟨v|F̂|v⟩`.

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::classical::Relation;
use crate::hilbert::{deg_to_rad, rad_to_deg, Complex, HilbertError, Ket};
use crate::scenarios::{act_operator, Act, Scenario, ScenarioError, UtilityFunction};

/// Default tolerance for norm and group constraints at construction.
pub const STATE_TOL: f64 = 1e-6;
/// Tolerance for vectors printed to three decimals.
pub const PRINTED_TOL: f64 = 5e-3;
/// Indifference band on utility differences.
pub const INDIFFERENCE_BAND: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("state has {got} {what}, scenario has {expected} events")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("modulus of event {event} is {value}; moduli must be finite and non-negative")]
    BadModulus { event: String, value: f64 },
    #[error("norm violation: Σρ² = {norm_sq:.6}, deviation {deviation:.3e} from 1")]
    Norm { norm_sq: f64, deviation: f64 },
    #[error("constraint violation: Σρ² over {group} = {actual:.6}, expected {expected}, deviation {deviation:.3e}")]
    Constraint {
        group: String,
        expected: String,
        actual: f64,
        deviation: f64,
    },
    #[error("no constraint group holds {0} balls")]
    GroupNotFound(u32),
    #[error("scenario has no urn size")]
    NoUrnSize,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type Result<T> = std::result::Result<T, QuantumError>;

/// A cognitive state `Σ ρ_i e^{iθ_i}|i⟩` bound to a scenario.
///
/// Moduli are stored as given (no renormalisation), so printed vectors keep
/// their rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    scenario: String,
    moduli: Vec<f64>,
    phases: Vec<f64>,
}

/// Polar form with phases in degrees, as states are printed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    #[serde(default)]
    pub scenario: String,
    pub moduli: Vec<f64>,
    pub phases_deg: Vec<f64>,
}

impl Serialize for QuantumState {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_document().serialize(ser)
    }
}

impl QuantumState {
    pub fn scenario_name(&self) -> &str {
        &self.scenario
    }

    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    /// Phases in radians.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phases_deg(&self) -> Vec<f64> {
        self.phases.iter().map(|&p| rad_to_deg(p)).collect()
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn to_ket(&self) -> Ket {
        Ket::from_polar(&self.moduli, &self.phases).expect("state is nonempty")
    }

    pub fn amplitudes(&self) -> Vec<Complex> {
        self.moduli
            .iter()
            .zip(&self.phases)
            .map(|(&r, &t)| Complex::from_polar(r, t))
            .collect()
    }

    pub fn to_document(&self) -> StateDocument {
        StateDocument {
            scenario: self.scenario.clone(),
            moduli: self.moduli.clone(),
            phases_deg: self.phases_deg(),
        }
    }

    /// Same phases; moduli rescaled so every group's mass equals its total.
    pub fn rescaled_to_constraints(&self, s: &Scenario) -> QuantumState {
        let mut moduli = self.moduli.clone();
        for c in &s.constraints {
            let mass: f64 = c.event_indices.iter().map(|&i| moduli[i].powi(2)).sum();
            if mass > 0.0 {
                let k = (c.total_f64() / mass).sqrt();
                for &i in &c.event_indices {
                    moduli[i] *= k;
                }
            }
        }
        QuantumState {
            scenario: self.scenario.clone(),
            moduli,
            phases: self.phases.clone(),
        }
    }

    /// Same moduli with every phase replaced.
    pub fn with_phases(&self, phases_rad: Vec<f64>) -> Result<QuantumState> {
        if phases_rad.len() != self.moduli.len() {
            return Err(QuantumError::Length {
                what: "phases",
                expected: self.moduli.len(),
                got: phases_rad.len(),
            });
        }
        Ok(QuantumState {
            scenario: self.scenario.clone(),
            moduli: self.moduli.clone(),
            phases: phases_rad,
        })
    }

    /// Largest deviation of the norm and group masses from their targets.
    pub fn constraint_deviation(&self, s: &Scenario) -> f64 {
        let norm = (self.moduli.iter().map(|r| r * r).sum::<f64>() - 1.0).abs();
        s.constraints
            .iter()
            .map(|c| {
                (c.event_indices
                    .iter()
                    .map(|&i| self.moduli[i].powi(2))
                    .sum::<f64>()
                    - c.total_f64())
                .abs()
            })
            .fold(norm, f64::max)
    }
}

/// Builds a state from moduli and phases in degrees, rejecting norm or
/// constraint violations beyond [`STATE_TOL`].
pub fn state_from_polar(s: &Scenario, moduli: &[f64], phases_deg: &[f64]) -> Result<QuantumState> {
    state_from_polar_with_tol(s, moduli, phases_deg, STATE_TOL)
}

pub fn state_from_polar_with_tol(
    s: &Scenario,
    moduli: &[f64],
    phases_deg: &[f64],
    tol: f64,
) -> Result<QuantumState> {
    let phases: Vec<f64> = phases_deg.iter().map(|&d| deg_to_rad(d)).collect();
    state_from_polar_rad(s, moduli, &phases, tol)
}

/// As [`state_from_polar_with_tol`] with phases in radians.
pub fn state_from_polar_rad(
    s: &Scenario,
    moduli: &[f64],
    phases_rad: &[f64],
    tol: f64,
) -> Result<QuantumState> {
    let n = s.n_events();
    for (what, got) in [("moduli", moduli.len()), ("phases", phases_rad.len())] {
        if got != n {
            return Err(QuantumError::Length {
                what,
                expected: n,
                got,
            });
        }
    }
    if let Some(i) = moduli.iter().position(|r| !r.is_finite() || *r < 0.0) {
        return Err(QuantumError::BadModulus {
            event: s.events[i].clone(),
            value: moduli[i],
        });
    }
    let norm_sq: f64 = moduli.iter().map(|r| r * r).sum();
    if (norm_sq - 1.0).abs() > tol {
        return Err(QuantumError::Norm {
            norm_sq,
            deviation: (norm_sq - 1.0).abs(),
        });
    }
    for c in &s.constraints {
        let actual: f64 = c.event_indices.iter().map(|&i| moduli[i].powi(2)).sum();
        let deviation = (actual - c.total_f64()).abs();
        if deviation > tol {
            let names: Vec<&str> = c.event_indices.iter().map(|&i| s.events[i].as_str()).collect();
            return Err(QuantumError::Constraint {
                group: format!("{{{}}}", names.join(",")),
                expected: c.total.to_string(),
                actual,
                deviation,
            });
        }
    }
    Ok(QuantumState {
        scenario: s.name.clone(),
        moduli: moduli.to_vec(),
        phases: phases_rad.to_vec(),
    })
}

/// Rebuilds a state from its printed form.
pub fn state_from_document(s: &Scenario, doc: &StateDocument, tol: f64) -> Result<QuantumState> {
    state_from_polar_with_tol(s, &doc.moduli, &doc.phases_deg, tol)
}

/// Symmetric initial state: each group's mass split equally among its
/// events, all phases zero.
pub fn initial_state(s: &Scenario) -> Result<QuantumState> {
    s.validate()?;
    let mut moduli = vec![0.0; s.n_events()];
    for c in &s.constraints {
        let share = c.total_f64() / c.event_indices.len() as f64;
        for &i in &c.event_indices {
            moduli[i] = share.sqrt();
        }
    }
    state_from_polar_rad(s, &moduli, &vec![0.0; s.n_events()], 1e-12)
}

/// Born-rule probabilities `ρ_i²`.
pub fn subjective_probabilities(v: &QuantumState) -> Vec<f64> {
    v.moduli.iter().map(|r| r * r).collect()
}

fn check_act(v: &QuantumState, act: &Act) -> Result<()> {
    if act.payoffs.len() != v.dim() {
        return Err(QuantumError::Length {
            what: "payoffs",
            expected: v.dim(),
            got: act.payoffs.len(),
        });
    }
    Ok(())
}

/// `W_v(f) = Σ_i u(x_i) ρ_i²`.
pub fn expected_utility_q(v: &QuantumState, act: &Act, u: &UtilityFunction) -> Result<f64> {
    check_act(v, act)?;
    let us = act.utilities(u)?;
    Ok(us
        .iter()
        .zip(subjective_probabilities(v))
        .map(|(u, p)| u * p)
        .sum())
}

/// `W_v(f)` computed as the quadratic form of the act operator on the ket.
pub fn expected_utility_operator(
    s: &Scenario,
    v: &QuantumState,
    act: &Act,
    u: &UtilityFunction,
) -> Result<f64> {
    check_act(v, act)?;
    let op = act_operator(s, act, u)?;
    Ok(op.quadratic_form(&v.to_ket())?.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreferenceOutcome {
    pub relation: Relation,
    pub utilities: (f64, f64),
    pub difference: f64,
}

/// `f ≿_v g` iff `W_v(f) ≥ W_v(g)`, with an indifference band.
pub fn preference(
    v: &QuantumState,
    f: &Act,
    g: &Act,
    u: &UtilityFunction,
) -> Result<PreferenceOutcome> {
    let wf = expected_utility_q(v, f, u)?;
    let wg = expected_utility_q(v, g, u)?;
    let difference = wf - wg;
    Ok(PreferenceOutcome {
        relation: Relation::from_difference(difference, INDIFFERENCE_BAND),
        utilities: (wf, wg),
        difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCount {
    pub event: String,
    pub count: f64,
}

/// Expected composition of the urn portion holding `group_balls` balls:
/// conditional probability within that group times its ball count.
pub fn expected_ball_counts(
    v: &QuantumState,
    s: &Scenario,
    group_balls: u32,
) -> Result<Vec<BallCount>> {
    let urn = s.urn_size.ok_or(QuantumError::NoUrnSize)?;
    let group = s
        .constraints
        .iter()
        .find(|c| (c.total_f64() * f64::from(urn) - f64::from(group_balls)).abs() < 1e-9)
        .ok_or(QuantumError::GroupNotFound(group_balls))?;
    let probs = subjective_probabilities(v);
    let mass: f64 = group.event_indices.iter().map(|&i| probs[i]).sum();
    Ok(group
        .event_indices
        .iter()
        .map(|&i| BallCount {
            event: s.events[i].clone(),
            count: if mass > 0.0 {
                probs[i] / mass * f64::from(group_balls)
            } else {
                0.0
            },
        })
        .collect())
}
