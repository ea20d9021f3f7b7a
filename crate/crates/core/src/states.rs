//! Pure states, density operators with factor bookkeeping, Bloch vectors,
//! fidelity and the scaled (Werner-like) form of two-qubit states.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, hermitian_eigenvalues, C64, ComplexMatrix, FactorShape, ALGEBRAIC_TOL, HERMITICITY_TOL,
};

/// Lower bound accepted for the smallest eigenvalue of a density operator.
pub const POSITIVITY_TOL: f64 = -1e-10;
/// Tolerance on the unit norm of a state vector.
pub const NORM_TOL: f64 = 1e-12;

/// A state vector in the computational basis.
#[derive(Clone, PartialEq)]
pub struct StateVector(Vec<C64>);

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self(amplitudes)
    }

    pub fn from_real(amplitudes: &[f64]) -> Self {
        Self(amplitudes.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// Basis ket `|index>` of a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut v = vec![C64::default(); dim];
        v[index] = c(1.0, 0.0);
        Self(v)
    }

    /// Single-qubit pure state with Bloch angles `theta`, `phi`.
    pub fn qubit(theta: f64, phi: f64) -> Self {
        Self(vec![
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        ])
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        linalg::inner(&self.0, &other.0)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(linalg::kron_vec(&self.0, &other.0))
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.0, &self.0)
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.0.iter().map(|z| format!("{:+.6}{:+.6}i", z.re, z.im)))
            .finish()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix plus its tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    shape: FactorShape,
}

impl DensityOperator {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: ComplexMatrix, shape: FactorShape) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare(matrix.rows(), matrix.cols()));
        }
        shape.check(matrix.rows())?;
        let dev = matrix.hermiticity_deviation()?;
        if dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace()?.re;
        if (tr - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min = hermitian_eigenvalues(&matrix)?[0];
        if min < POSITIVITY_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { matrix, shape })
    }

    /// `|psi><psi|`; skips the eigenvalue check since a projector is positive.
    pub fn from_pure(psi: &StateVector, shape: FactorShape) -> Result<Self> {
        psi.check_normalized()?;
        shape.check(psi.dim())?;
        Ok(Self {
            matrix: psi.projector(),
            shape,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Reduced state on `keep`. The result is not re-diagonalized: a partial
    /// trace of a valid state is a valid state.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let matrix = linalg::partial_trace(&self.matrix, &self.shape, keep)?;
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        let dims = kept.iter().map(|&k| self.shape.dims()[k]).collect();
        Ok(Self {
            matrix,
            shape: FactorShape::new(dims)?,
        })
    }

    pub fn partial_transpose(&self, factor: usize) -> Result<ComplexMatrix> {
        linalg::partial_transpose(&self.matrix, &self.shape, factor)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// Weights of `alpha|00> + beta|11>` with real nonnegative amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntangledInput {
    pub alpha_sq: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl EntangledInput {
    pub fn new(alpha_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_sq) {
            return Err(Error::Domain {
                name: "alpha_sq",
                value: alpha_sq,
                domain: "[0, 1]",
            });
        }
        Ok(Self {
            alpha_sq,
            alpha: alpha_sq.sqrt(),
            beta: (1.0 - alpha_sq).sqrt(),
        })
    }

    pub fn beta_sq(&self) -> f64 {
        1.0 - self.alpha_sq
    }

    pub fn state(&self) -> StateVector {
        StateVector::from_real(&[self.alpha, 0.0, 0.0, self.beta])
    }
}

/// `alpha|00> + beta|11>` with `alpha = sqrt(alpha_sq)`.
pub fn entangled_input_state(alpha_sq: f64) -> Result<StateVector> {
    Ok(EntangledInput::new(alpha_sq)?.state())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochVector {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        Self { sx, sy, sz }
    }

    pub fn of_pure(psi: &StateVector) -> Result<Self> {
        let rho = DensityOperator::from_pure(psi, FactorShape::qubits(1))?;
        bloch_vector(&rho)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.sx * other.sx + self.sy * other.sy + self.sz * other.sz
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.sx * k, self.sy * k, self.sz * k)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        Self::new(self.sx - other.sx, self.sy - other.sy, self.sz - other.sz).norm()
    }

    /// `(I + s·σ)/2`.
    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            2,
            vec![
                c((1.0 + self.sz) / 2.0, 0.0),
                c(self.sx / 2.0, -self.sy / 2.0),
                c(self.sx / 2.0, self.sy / 2.0),
                c((1.0 - self.sz) / 2.0, 0.0),
            ],
        )
        .expect("2x2")
    }
}

/// The unique `s` with `rho = (I + s·σ)/2`.
pub fn bloch_vector(rho: &DensityOperator) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::WrongKind {
            expected: "single-qubit density operator".into(),
            found: format!("{}-dimensional operator", rho.dim()),
        });
    }
    let m = rho.matrix();
    let off = m[(1, 0)];
    Ok(BlochVector::new(2.0 * off.re, 2.0 * off.im, (m[(0, 0)] - m[(1, 1)]).re))
}

/// `<psi|rho|psi>`.
pub fn fidelity_pure(psi: &StateVector, rho: &DensityOperator) -> Result<f64> {
    let m = rho.matrix();
    let v = m.matvec(psi.amplitudes())?;
    Ok(psi.inner(&StateVector::new(v)).re)
}

/// `s|psi><psi| + (1-s)/4 I` fitted by least squares, with the residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledForm {
    pub s: f64,
    pub residual: f64,
}

/// `s|psi><psi| + (1-s) I/dim`.
pub fn scaled_state(s: f64, psi: &StateVector) -> ComplexMatrix {
    let n = psi.dim();
    let mixed = ComplexMatrix::identity(n).scale_real((1.0 - s) / n as f64);
    psi.projector().scale_real(s).add(&mixed).expect("same dimension")
}

/// Least-squares projection onto the two-qubit scaled family.
///
/// The family is affine in `s`, `I/4 + s (P - I/4)` with `P = |psi><psi|`,
/// and `‖P - I/4‖² = 3/4`, so the minimizer is
/// `s = <rho - I/4, P - I/4> / (3/4) = (tr(rho P) - 1/4) / (3/4)`.
pub fn fit_scaled_form(rho: &DensityOperator, psi: &StateVector) -> Result<ScaledForm> {
    if rho.dim() != 4 || psi.dim() != 4 {
        return Err(Error::DimensionMismatch {
            op: "fit_scaled_form",
            left_rows: rho.dim(),
            left_cols: rho.dim(),
            right_rows: psi.dim(),
            right_cols: 1,
        });
    }
    psi.check_normalized()?;
    let overlap = fidelity_pure(psi, rho)?;
    let s = (overlap - 0.25) / 0.75;
    let residual = rho.matrix().sub(&scaled_state(s, psi))?.frobenius_norm();
    Ok(ScaledForm { s, residual })
}

/// Maximally entangled `(|00> + |11>)/sqrt(2)`.
pub fn phi_plus() -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::from_real(&[h, 0.0, 0.0, h])
}

/// Two-qubit Werner-type state `s|phi+><phi+| + (1-s)/4 I`.
pub fn werner_state(s: f64) -> Result<DensityOperator> {
    DensityOperator::new(scaled_state(s, &phi_plus()), FactorShape::qubits(2))
}
