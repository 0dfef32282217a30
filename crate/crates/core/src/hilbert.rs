//! Finite-dimensional complex Hilbert space: kets, bra-kets, Hermitian
//! operators, orthogonal projectors, spectral families, the Born rule and
//! collapse.
//!
//! Everything here is dense and immutable. Dimensions are arbitrary, though
//! the decision models in this crate only ever use `C^3` and `C^4`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as Complex;
use serde::Serialize;
use thiserror::Error;

/// Tolerance used when constructing operators (hermiticity checks on input).
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance used by validation reports and unit-norm preconditions.
pub const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("operator is not idempotent (max deviation {deviation:.3e})")]
    NotIdempotent { deviation: f64 },
    #[error("ket is not a unit vector (norm {norm:.12})")]
    NotUnit { norm: f64 },
    #[error("expectation has imaginary part {imag:.3e}")]
    ComplexExpectation { imag: f64 },
    #[error("zero-probability outcome: projector annihilates the state")]
    ZeroProbability,
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, HilbertError>;

/// A vector of `C^n`, written `|v⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: DVector<Complex>,
}

impl Ket {
    pub fn new(amplitudes: Vec<Complex>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(HilbertError::ZeroDimension);
        }
        Ok(Ket {
            amps: DVector::from_vec(amplitudes),
        })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    /// Builds `Σ ρ_i e^{iθ_i} |i⟩` from moduli and phases in radians.
    pub fn from_polar(moduli: &[f64], phases: &[f64]) -> Result<Self> {
        if moduli.len() != phases.len() {
            return Err(HilbertError::DimensionMismatch {
                left: moduli.len(),
                right: phases.len(),
            });
        }
        Self::new(
            moduli
                .iter()
                .zip(phases)
                .map(|(&r, &t)| Complex::from_polar(r, t))
                .collect(),
        )
    }

    /// The canonical basis vector `|α_index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 {
            return Err(HilbertError::ZeroDimension);
        }
        if index >= dim {
            return Err(HilbertError::IndexOutOfRange { index, dim });
        }
        let mut amps = DVector::zeros(dim);
        amps[index] = Complex::new(1.0, 0.0);
        Ok(Ket { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex] {
        self.amps.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(HilbertError::NotUnit { norm: 0.0 });
        }
        Ok(Ket {
            amps: self.amps.unscale(n),
        })
    }

    pub fn scale(&self, z: Complex) -> Ket {
        Ket {
            amps: &self.amps * z,
        }
    }

    fn require_unit(&self) -> Result<()> {
        if self.is_unit(VALIDATION_TOL) {
            Ok(())
        } else {
            Err(HilbertError::NotUnit { norm: self.norm() })
        }
    }
}

impl Add for &Ket {
    type Output = Ket;
    fn add(self, rhs: &Ket) -> Ket {
        assert_eq!(self.dim(), rhs.dim(), "ket dimensions differ");
        Ket {
            amps: &self.amps + &rhs.amps,
        }
    }
}

impl Sub for &Ket {
    type Output = Ket;
    fn sub(self, rhs: &Ket) -> Ket {
        assert_eq!(self.dim(), rhs.dim(), "ket dimensions differ");
        Ket {
            amps: &self.amps - &rhs.amps,
        }
    }
}

impl Mul<&Ket> for Complex {
    type Output = Ket;
    fn mul(self, rhs: &Ket) -> Ket {
        rhs.scale(self)
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, z) in self.amps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
        }
        write!(f, ")")
    }
}

/// `⟨bra|ket⟩`, anti-linear in the bra and linear in the ket.
pub fn inner_product(bra: &Ket, ket: &Ket) -> Result<Complex> {
    if bra.dim() != ket.dim() {
        return Err(HilbertError::DimensionMismatch {
            left: bra.dim(),
            right: ket.dim(),
        });
    }
    Ok(bra.amps.dotc(&ket.amps))
}

fn max_abs(m: &DMatrix<Complex>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermiticity_deviation(m: &DMatrix<Complex>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn idempotency_deviation(m: &DMatrix<Complex>) -> f64 {
    max_abs(&(m * m - m))
}

/// A Hermitian operator on `C^n`; entries satisfy `a_ij = conj(a_ji)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOp {
    m: DMatrix<Complex>,
}

impl HermitianOp {
    pub fn new(m: DMatrix<Complex>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(HilbertError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(HilbertError::ZeroDimension);
        }
        let deviation = hermiticity_deviation(&m);
        if deviation > CONSTRUCTION_TOL {
            return Err(HilbertError::NotHermitian { deviation });
        }
        Ok(HermitianOp { m })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(HilbertError::ZeroDimension);
        }
        let d = DVector::from_iterator(values.len(), values.iter().map(|&x| Complex::new(x, 0.0)));
        Ok(HermitianOp {
            m: DMatrix::from_diagonal(&d),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(HilbertError::ZeroDimension);
        }
        Ok(HermitianOp {
            m: DMatrix::identity(dim, dim),
        })
    }

    /// `Σ_k o_k M_k` for real eigenvalues `o_k` over a family of projectors.
    pub fn from_spectral(eigenvalues: &[f64], projectors: &[Projector]) -> Result<Self> {
        let first = projectors.first().ok_or(HilbertError::ZeroDimension)?;
        if eigenvalues.len() != projectors.len() {
            return Err(HilbertError::DimensionMismatch {
                left: eigenvalues.len(),
                right: projectors.len(),
            });
        }
        let dim = first.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (&o, p) in eigenvalues.iter().zip(projectors) {
            if p.dim() != dim {
                return Err(HilbertError::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
            m += p.matrix() * Complex::new(o, 0.0);
        }
        HermitianOp::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.m
    }

    pub fn apply(&self, v: &Ket) -> Result<Ket> {
        if v.dim() != self.dim() {
            return Err(HilbertError::DimensionMismatch {
                left: self.dim(),
                right: v.dim(),
            });
        }
        Ok(Ket {
            amps: &self.m * &v.amps,
        })
    }

    /// `⟨v|M|v⟩` without any precondition on `v`.
    pub fn quadratic_form(&self, v: &Ket) -> Result<Complex> {
        let mv = self.apply(v)?;
        inner_product(v, &mv)
    }

    pub fn sub(&self, other: &HermitianOp) -> Result<HermitianOp> {
        if self.dim() != other.dim() {
            return Err(HilbertError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(HermitianOp {
            m: &self.m - &other.m,
        })
    }

    pub fn max_deviation(&self, other: &HermitianOp) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.m - &other.m))
    }
}

/// An orthogonal projection: Hermitian and idempotent.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    op: HermitianOp,
}

impl Projector {
    pub fn new(m: DMatrix<Complex>) -> Result<Self> {
        let op = HermitianOp::new(m)?;
        let deviation = idempotency_deviation(&op.m);
        if deviation > VALIDATION_TOL {
            return Err(HilbertError::NotIdempotent { deviation });
        }
        Ok(Projector { op })
    }

    /// Sum of canonical rank-one projectors `Σ_{i∈S} |α_i⟩⟨α_i|`.
    pub fn from_basis_indices(dim: usize, indices: &[usize]) -> Result<Self> {
        if dim == 0 {
            return Err(HilbertError::ZeroDimension);
        }
        let mut diag = vec![0.0; dim];
        for &i in indices {
            if i >= dim {
                return Err(HilbertError::IndexOutOfRange { index: i, dim });
            }
            diag[i] = 1.0;
        }
        Ok(Projector {
            op: HermitianOp::diagonal(&diag)?,
        })
    }

    /// `|a⟩⟨a| / ⟨a|a⟩`.
    pub fn rank_one(a: &Ket) -> Result<Self> {
        let a = a.normalized()?;
        let m = &a.amps * a.amps.adjoint();
        Projector::new(m)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Ok(Projector {
            op: HermitianOp::identity(dim)?,
        })
    }

    /// `1 − M`.
    pub fn complement(&self) -> Projector {
        let dim = self.dim();
        Projector {
            op: HermitianOp {
                m: DMatrix::identity(dim, dim) - &self.op.m,
            },
        }
    }

    /// The sum of two projectors; only a projector when they are orthogonal.
    pub fn sum(&self, other: &Projector) -> Result<Projector> {
        if self.dim() != other.dim() {
            return Err(HilbertError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Projector::new(&self.op.m + &other.op.m)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.op.m
    }

    pub fn as_op(&self) -> &HermitianOp {
        &self.op
    }
}

/// `⟨v|M|v⟩` for a unit `v`; the imaginary part must vanish.
pub fn expectation(m: &HermitianOp, v: &Ket) -> Result<f64> {
    v.require_unit()?;
    let deviation = hermiticity_deviation(&m.m);
    if deviation > VALIDATION_TOL {
        return Err(HilbertError::NotHermitian { deviation });
    }
    let z = m.quadratic_form(v)?;
    if z.im.abs() > VALIDATION_TOL {
        return Err(HilbertError::ComplexExpectation { imag: z.im });
    }
    Ok(z.re)
}

/// Born rule: `μ_v(M) = ⟨v|M|v⟩ = ||M v||²`.
pub fn born_probability(m: &Projector, v: &Ket) -> Result<f64> {
    v.require_unit()?;
    let mv = m.op.apply(v)?;
    let p = mv.norm().powi(2);
    Ok(p.clamp(0.0, 1.0))
}

/// Post-measurement state `M v / ||M v||`.
pub fn collapse(m: &Projector, v: &Ket) -> Result<Ket> {
    let mv = m.op.apply(v)?;
    let n = mv.norm();
    if n <= VALIDATION_TOL {
        return Err(HilbertError::ZeroProbability);
    }
    Ok(Ket {
        amps: mv.amps.unscale(n),
    })
}

/// A candidate spectral family. Construction does not validate; call
/// [`validate_spectral_family`] to get a report.
#[derive(Debug, Clone)]
pub struct SpectralFamily {
    members: Vec<DMatrix<Complex>>,
}

impl SpectralFamily {
    pub fn from_matrices(members: Vec<DMatrix<Complex>>) -> Self {
        SpectralFamily { members }
    }

    pub fn from_projectors(members: &[Projector]) -> Self {
        SpectralFamily {
            members: members.iter().map(|p| p.matrix().clone()).collect(),
        }
    }

    /// `{|α_i⟩⟨α_i|}` for `i = 0..dim`.
    pub fn canonical(dim: usize) -> Result<Self> {
        let members = (0..dim)
            .map(|i| Projector::from_basis_indices(dim, &[i]).map(|p| p.op.m))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralFamily { members })
    }

    /// Coarse-grains the canonical basis by groups of indices.
    pub fn from_index_groups(dim: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let members = groups
            .iter()
            .map(|g| Projector::from_basis_indices(dim, g).map(|p| p.op.m))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralFamily { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<Complex>] {
        &self.members
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, max_deviation: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            max_deviation,
            passed: max_deviation <= tol,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max)
    }

    /// Re-evaluates pass/fail at another tolerance.
    pub fn passes_at(&self, tol: f64) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.max_deviation <= tol)
    }
}

/// Checks hermiticity, idempotency, mutual orthogonality and completeness.
/// Dimension mismatches show up as infinite deviations.
pub fn validate_spectral_family(fam: &SpectralFamily) -> ValidationReport {
    let tol = VALIDATION_TOL;
    let dim = fam.members.first().map(|m| m.nrows()).unwrap_or(0);
    let shaped = |m: &DMatrix<Complex>| m.nrows() == dim && m.ncols() == dim;

    let mut herm = 0.0f64;
    let mut idem = 0.0f64;
    let mut orth = 0.0f64;
    for (k, mk) in fam.members.iter().enumerate() {
        if !shaped(mk) {
            herm = f64::INFINITY;
            idem = f64::INFINITY;
            orth = f64::INFINITY;
            continue;
        }
        herm = herm.max(hermiticity_deviation(mk));
        idem = idem.max(idempotency_deviation(mk));
        for ml in fam.members.iter().skip(k + 1) {
            if shaped(ml) {
                orth = orth.max(max_abs(&(mk * ml)));
            }
        }
    }
    let completeness = if fam.members.is_empty() || fam.members.iter().any(|m| !shaped(m)) {
        f64::INFINITY
    } else {
        let total = fam
            .members
            .iter()
            .fold(DMatrix::<Complex>::zeros(dim, dim), |acc, m| acc + m);
        max_abs(&(total - DMatrix::identity(dim, dim)))
    };

    ValidationReport {
        tolerance: tol,
        checks: vec![
            Check::new("hermiticity", herm, tol),
            Check::new("idempotency", idem, tol),
            Check::new("orthogonality", orth, tol),
            Check::new("completeness", completeness, tol),
        ],
    }
}

/// Checks that `M ↦ ⟨v|M|v⟩` behaves as a generalized probability measure on
/// the family: `μ(1) = 1` and `μ(Σ M_k) = Σ μ(M_k)`.
pub fn check_generalized_measure(v: &Ket, fam: &SpectralFamily) -> ValidationReport {
    let tol = VALIDATION_TOL;
    let dim = v.dim();
    let value = |m: &DMatrix<Complex>| -> Option<Complex> {
        if m.nrows() != dim || m.ncols() != dim {
            return None;
        }
        Some(v.amps.dotc(&(m * &v.amps)))
    };
    let identity = DMatrix::<Complex>::identity(dim, dim);
    let mu_identity = value(&identity).unwrap_or(Complex::new(f64::INFINITY, 0.0));

    let mut sum_parts = Complex::new(0.0, 0.0);
    let mut total = DMatrix::<Complex>::zeros(dim, dim);
    let mut imag = 0.0f64;
    let mut range = 0.0f64;
    let mut shape_ok = true;
    for m in &fam.members {
        match value(m) {
            Some(z) => {
                sum_parts += z;
                total += m;
                imag = imag.max(z.im.abs());
                range = range.max((-z.re).max(z.re - 1.0).max(0.0));
            }
            None => shape_ok = false,
        }
    }
    let additivity = if shape_ok {
        value(&total).map(|z| (z - sum_parts).norm()).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let sum_to_one = if shape_ok && !fam.members.is_empty() {
        (sum_parts.re - 1.0).abs()
    } else {
        f64::INFINITY
    };

    ValidationReport {
        tolerance: tol,
        checks: vec![
            Check::new("unit_norm", (v.norm() - 1.0).abs(), tol),
            Check::new("identity_measure", (mu_identity - Complex::new(1.0, 0.0)).norm(), tol),
            Check::new("additivity", additivity, tol),
            Check::new("family_sum", sum_to_one, tol),
            Check::new("real_valued", imag, tol),
            Check::new("unit_interval", range, tol),
        ],
    }
}

/// Degrees to radians, as used at I/O boundaries.
pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Radians to degrees in `[0, 360)`.
pub fn rad_to_deg(rad: f64) -> f64 {
    let d = rad.to_degrees().rem_euclid(360.0);
    if (d - 360.0).abs() < 1e-9 {
        0.0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn uniform3() -> Ket {
        let a = 1.0 / 3f64.sqrt();
        Ket::from_real(&[a, a, a]).unwrap()
    }

    fn ellsberg_w1() -> Ket {
        Ket::from_real(&[0.577, 0.644, 0.502]).unwrap()
    }

    fn ellsberg_w2() -> Ket {
        Ket::from_polar(
            &[0.577, 0.505, 0.641],
            &[0.0, deg_to_rad(238.48), deg_to_rad(120.46)],
        )
        .unwrap()
    }

    #[test]
    fn inner_product_basics() {
        let e0 = Ket::from_real(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(inner_product(&e0, &e0).unwrap(), c(1.0, 0.0));

        let a = Ket::from_real(&[1.0, 0.0]).unwrap();
        let b = Ket::from_real(&[0.0, 1.0]).unwrap();
        let z = c(0.3, -1.2);
        let t = c(2.0, 0.5);
        let sup = &(z * &b) + &(t * &a);
        assert!((inner_product(&a, &sup).unwrap() - t).norm() < 1e-15);
        let scaled_bra = z * &a;
        let got = inner_product(&scaled_bra, &sup).unwrap();
        assert!((got - z.conj() * t).norm() < 1e-15);
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let a = Ket::from_real(&[1.0, 0.0]).unwrap();
        let b = Ket::from_real(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            inner_product(&a, &b),
            Err(HilbertError::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn printed_ellsberg_states_are_nearly_orthogonal() {
        let z = inner_product(&ellsberg_w1(), &ellsberg_w2()).unwrap();
        assert!(z.norm() < 5e-3, "{z}");
    }

    #[test]
    fn expectation_examples() {
        let id = HermitianOp::identity(3).unwrap();
        assert!((expectation(&id, &uniform3()).unwrap() - 1.0).abs() < 1e-12);

        let m = HermitianOp::diagonal(&[10.0, 0.0, 0.0]).unwrap();
        assert!((expectation(&m, &uniform3()).unwrap() - 10.0 / 3.0).abs() < 1e-12);

        // F1 - F2 for the three-colour urn with u = sqrt, evaluated on the
        // printed w1 with its moduli rescaled onto ρ_R² = 1/3, ρ_Y² + ρ_B² = 2/3
        let diff = HermitianOp::diagonal(&[10.0, 0.0, -10.0]).unwrap();
        let k = (2.0 / 3.0 / (0.644f64.powi(2) + 0.502f64.powi(2))).sqrt();
        let w1 = Ket::from_real(&[1.0 / 3f64.sqrt(), 0.644 * k, 0.502 * k]).unwrap();
        assert!((expectation(&diff, &w1).unwrap() - 0.815).abs() < 5e-3);
    }

    #[test]
    fn expectation_rejects_non_unit_and_non_hermitian() {
        let m = HermitianOp::identity(2).unwrap();
        let v = Ket::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(expectation(&m, &v), Err(HilbertError::NotUnit { .. })));

        let mut raw = DMatrix::<Complex>::zeros(2, 2);
        raw[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            HermitianOp::new(raw),
            Err(HilbertError::NotHermitian { .. })
        ));
    }

    #[test]
    fn born_examples() {
        let p0 = Projector::from_basis_indices(3, &[0]).unwrap();
        assert!((born_probability(&p0, &uniform3()).unwrap() - 1.0 / 3.0).abs() < 1e-12);

        let py = Projector::from_basis_indices(3, &[1]).unwrap();
        let w1 = ellsberg_w1().normalized().unwrap();
        assert!((born_probability(&py, &w1).unwrap() - 0.644f64.powi(2)).abs() < 1e-3);

        // any admissible 50/51 state gives P_R + P_Y probability 50/101
        let t: f64 = 50.0 / 101.0;
        let v = Ket::from_polar(
            &[(0.3 * t).sqrt(), (0.7 * t).sqrt(), (0.9 * (1.0 - t)).sqrt(), (0.1 * (1.0 - t)).sqrt()],
            &[0.0, 1.0, 2.0, 3.0],
        )
        .unwrap();
        let pry = Projector::from_basis_indices(4, &[0, 1]).unwrap();
        assert!((born_probability(&pry, &v).unwrap() - t).abs() < 1e-12);
    }

    #[test]
    fn projector_rejects_non_idempotent() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]));
        assert!(matches!(
            Projector::new(m),
            Err(HilbertError::NotIdempotent { .. })
        ));
    }

    #[test]
    fn collapse_examples() {
        let p0 = Projector::from_basis_indices(3, &[0]).unwrap();
        let out = collapse(&p0, &uniform3()).unwrap();
        assert!((&out - &Ket::basis(3, 0).unwrap()).norm() < 1e-12);

        let pyb = Projector::from_basis_indices(3, &[1, 2]).unwrap();
        let out = collapse(&pyb, &uniform3()).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((&out - &Ket::from_real(&[0.0, h, h]).unwrap()).norm() < 1e-12);

        let v = Ket::from_real(&[0.0, 0.6, 0.8]).unwrap();
        let fixed = collapse(&pyb, &v).unwrap();
        assert!((&fixed - &v).norm() < 1e-12);

        let e0 = Ket::basis(3, 0).unwrap();
        assert_eq!(collapse(&pyb, &e0), Err(HilbertError::ZeroProbability));
    }

    #[test]
    fn spectral_family_reports() {
        let fam = SpectralFamily::canonical(4).unwrap();
        assert!(validate_spectral_family(&fam).passed());

        let partial = SpectralFamily::from_index_groups(4, &[vec![0], vec![1], vec![2]]).unwrap();
        let rep = validate_spectral_family(&partial);
        assert!(!rep.passed());
        assert!(!rep.check("completeness").unwrap().passed);
        assert!(rep.check("orthogonality").unwrap().passed);

        let coarse = SpectralFamily::from_index_groups(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!(validate_spectral_family(&coarse).passed());

        let overlapping = SpectralFamily::from_index_groups(3, &[vec![0, 1], vec![1, 2]]).unwrap();
        let rep = validate_spectral_family(&overlapping);
        assert!(!rep.check("orthogonality").unwrap().passed);
    }

    #[test]
    fn generalized_measure_examples() {
        let fam = SpectralFamily::canonical(3).unwrap();
        assert!(check_generalized_measure(&uniform3(), &fam).passed());

        let rep = check_generalized_measure(&ellsberg_w2(), &fam);
        assert!(rep.check("additivity").unwrap().passed);
        let fam_sum = rep.check("family_sum").unwrap().max_deviation;
        assert!(fam_sum < 5e-3, "{fam_sum}");
    }

    #[test]
    fn degrees_round_trip() {
        for d in [0.0, 90.0, 180.0, 238.48, 270.0, 120.46] {
            assert!((rad_to_deg(deg_to_rad(d)) - d).abs() < 1e-9);
        }
        assert!((rad_to_deg(-std::f64::consts::FRAC_PI_2) - 270.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn polar_cartesian_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let z = c(re, im);
            let (r, theta) = z.to_polar();
            prop_assert!(r >= 0.0);
            let back = Complex::from_polar(r, theta);
            prop_assert!((back - z).norm() <= 1e-12 * (1.0 + r));
        }

        #[test]
        fn complement_probability(re in prop::collection::vec(-1f64..1.0, 6), mask in 0u8..8) {
            let v = Ket::new(vec![c(re[0], re[1]), c(re[2], re[3]), c(re[4], re[5])]).unwrap();
            prop_assume!(v.norm() > 1e-3);
            let v = v.normalized().unwrap();
            let idx: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let m = Projector::from_basis_indices(3, &idx).unwrap();
            let p = born_probability(&m, &v).unwrap();
            let q = born_probability(&m.complement(), &v).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p + q - 1.0).abs() < 1e-9);
        }
    }
}
