//! Dense complex-matrix foundation.
//!
//! All operators live in a fixed orthonormal computational basis and are
//! stored as dense [`ComplexMatrix`] values. Hermiticity is checked in the
//! max-norm: `max |M[i][j] - conj(M[j][i])|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::Statistics;
use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Default absolute hermiticity / positivity tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Checks that `m` is square with finite entries.
pub fn check_matrix(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

/// `AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// `AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_dim(a, b)?;
    Ok(a * b + b * a)
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M[i][j] - conj(M[j][i])|`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    defect
}

/// Symmetric average `(M + M†) / 2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Real part of the trace.
pub fn real_trace(m: &ComplexMatrix) -> f64 {
    m.trace().re
}

/// `|v⟩⟨v|`.
pub fn projector(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// `⟨v|M|v⟩`.
pub fn expectation(m: &ComplexMatrix, v: &ComplexVector) -> Complex64 {
    (v.adjoint() * m * v)[(0, 0)]
}

/// Computational-basis unit vector `|index⟩`.
pub fn basis_ket(dim: usize, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[index] = ONE;
    v
}

/// Builds a complex matrix from real row-major rows.
pub fn real_matrix(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    ComplexMatrix::from_fn(n, rows.first().map_or(0, |r| r.len()), |i, j| {
        Complex64::new(rows[i][j], 0.0)
    })
}

/// Builds a diagonal complex matrix.
pub fn diagonal_matrix(diag: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_iterator(
        diag.len(),
        diag.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

/// A validated hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
    tolerance: f64,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tolerance: f64) -> Result<Self> {
        check_matrix(&matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect > tolerance {
            return Err(Error::NotHermitian { defect, tolerance });
        }
        Ok(Self { matrix, tolerance })
    }

    /// Hermitizes `matrix` first; for operators built from products that are
    /// hermitian in exact arithmetic.
    pub(crate) fn from_hermitized(matrix: &ComplexMatrix) -> Self {
        Self {
            matrix: hermitize(matrix),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim, dim),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            matrix: diagonal_matrix(diag),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    /// `scale · |v⟩⟨v|`.
    pub fn scaled_projector(v: &ComplexVector, scale: f64) -> Self {
        Self::from_hermitized(&projector(v).scale(scale))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.scale(factor),
            tolerance: self.tolerance,
        }
    }
}

impl AsRef<ComplexMatrix> for HermitianOperator {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// Eigendecomposition of a hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Σ_λ c_λ |ψ_λ⟩⟨ψ_λ|`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let d = diagonal_matrix(&self.eigenvalues);
        v * d * v.adjoint()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Degenerate eigenvalues come with an arbitrary orthonormal basis of their
/// eigenspace.
pub fn hermitian_eig(m: &HermitianOperator) -> Spectrum {
    eigh_unchecked(m.matrix())
}

/// Same as [`hermitian_eig`] for a raw matrix, validating hermiticity first.
pub fn hermitian_eig_matrix(m: &ComplexMatrix, tolerance: f64) -> Result<Spectrum> {
    check_matrix(m)?;
    let defect = hermiticity_defect(m);
    if defect > tolerance {
        return Err(Error::NotHermitian { defect, tolerance });
    }
    Ok(eigh_unchecked(m))
}

pub(crate) fn eigh_unchecked(m: &ComplexMatrix) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: ComplexMatrix::zeros(0, 0),
        };
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Spectrum {
        eigenvalues,
        eigenvectors,
    }
}

/// Smallest eigenvalue and whether it clears `-tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min_eigenvalue: f64,
    pub is_psd: bool,
}

pub fn positivity_report(m: &HermitianOperator) -> PositivityReport {
    let min_eigenvalue = hermitian_eig(m).min();
    PositivityReport {
        min_eigenvalue,
        is_psd: min_eigenvalue >= -m.tolerance(),
    }
}

/// One-particle density matrix.
///
/// Invariants (checked by [`DensityMatrix::new`] and [`DensityMatrix::validate`]):
/// hermitian, positive semidefinite, real nonnegative trace, and for fermions
/// every eigenvalue at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
    statistics: Statistics,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, statistics: Statistics) -> Result<Self> {
        Self::from_operator(HermitianOperator::new(matrix)?, statistics)
    }

    pub fn from_operator(op: HermitianOperator, statistics: Statistics) -> Result<Self> {
        let rho = Self { op, statistics };
        rho.validate()?;
        Ok(rho)
    }

    /// Skips the positivity and occupation-bound checks; hermiticity is still
    /// required. Used for states that are deliberately outside the physical
    /// cone, such as the dephasing counterexample.
    pub fn new_unchecked(matrix: ComplexMatrix, statistics: Statistics) -> Result<Self> {
        Ok(Self {
            op: HermitianOperator::new(matrix)?,
            statistics,
        })
    }

    pub(crate) fn from_trusted(matrix: &ComplexMatrix, statistics: Statistics) -> Self {
        Self {
            op: HermitianOperator::from_hermitized(matrix),
            statistics,
        }
    }

    /// Empty system.
    pub fn zeros(dim: usize, statistics: Statistics) -> Self {
        Self {
            op: HermitianOperator::zeros(dim),
            statistics,
        }
    }

    /// Diagonal occupations in the computational basis.
    pub fn diagonal(occupations: &[f64], statistics: Statistics) -> Result<Self> {
        Self::from_operator(HermitianOperator::diagonal(occupations), statistics)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = self.op.tolerance();
        let spectrum = hermitian_eig(&self.op);
        if spectrum.min() < -tol {
            return Err(Error::NotPositive {
                min_eigenvalue: spectrum.min(),
            });
        }
        let tr = self.op.matrix().trace();
        if tr.im.abs() > tol * self.dim().max(1) as f64 || tr.re < -tol {
            return Err(Error::InvalidTrace {
                re: tr.re,
                im: tr.im,
            });
        }
        if self.statistics == Statistics::Fermion && spectrum.max() > 1.0 + tol {
            return Err(Error::AboveFermiBound {
                max_eigenvalue: spectrum.max(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.op.into_matrix()
    }

    /// Particle number.
    pub fn trace(&self) -> f64 {
        real_trace(self.op.matrix())
    }

    /// `c_λ` and `|ψ_λ⟩`.
    pub fn spectrum(&self) -> Spectrum {
        hermitian_eig(&self.op)
    }

    /// `⟨φ|ρ|φ⟩`.
    pub fn occupation(&self, phi: &ComplexVector) -> f64 {
        expectation(self.op.matrix(), phi).re
    }
}
