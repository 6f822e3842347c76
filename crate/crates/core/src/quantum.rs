//! Exact finite-dimensional spin algebra: states, observables, expectations,
//! and the two-spin correlation matrix that seeds the EPR noise.
//!
//! Spin operators use the Pauli normalization (eigenvalues ±1) so that the
//! singlet cross-covariance is exactly −δᵢⱼ; coupling constants absorb the
//! conventional factor of 1/2.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;

use crate::{CoreError, Result};

/// Tolerance for algebraic identities (Hermiticity, trace).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for eigenvalue positivity.
pub const POSITIVITY_TOL: f64 = 1e-10;

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entrywise modulus of a complex matrix.
pub(crate) fn max_entry_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0f64, f64::max)
}

/// Pauli-normalized spin component operators S₁, S₂, S₃ (eigenvalues ±1).
pub fn spin_components() -> [CMat; 3] {
    let sx = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
    let sy = CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
    let sz = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
    [sx, sy, sz]
}

/// Raising operator S₊ = S₁ + iS₂.
pub fn spin_raising() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(2., 0.), c(0., 0.), c(0., 0.)])
}

/// Lowering operator S₋ = S₁ − iS₂.
pub fn spin_lowering() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(2., 0.), c(0., 0.)])
}

/// S·n̂ for a real 3-vector n (not necessarily unit).
pub fn spin_along(n: &[f64; 3]) -> CMat {
    let [sx, sy, sz] = spin_components();
    sx * c(n[0], 0.) + sy * c(n[1], 0.) + sz * c(n[2], 0.)
}

/// Operator acting on the first spin of a pair: op ⊗ I.
pub fn on_first(op: &CMat) -> CMat {
    op.kronecker(&CMat::identity(2, 2))
}

/// Operator acting on the second spin of a pair: I ⊗ op.
pub fn on_second(op: &CMat) -> CMat {
    CMat::identity(2, 2).kronecker(op)
}

/// A named invariant violation reported by [`validate_density_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Hermiticity,
    Trace,
    Positivity,
}

/// Complex Hermitian trace-one positive matrix of dimension 2 (one spin) or
/// 4 (an EPR pair).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMat,
}

impl DensityMatrix {
    /// Wraps a raw matrix after checking the density-matrix invariants.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || !(m.nrows() == 2 || m.nrows() == 4) {
            return Err(CoreError::Dimension {
                expected: 2,
                got: m.nrows(),
                context: "density matrix must be square, dim 2 or 4".into(),
            });
        }
        let rho = Self { m };
        let violations = rho.violations();
        if violations.is_empty() {
            Ok(rho)
        } else {
            Err(CoreError::InvalidInput(format!(
                "not a valid density matrix: {violations:?}"
            )))
        }
    }

    /// Wraps a raw matrix without validation. For internal steps that
    /// preserve the invariants by construction.
    pub(crate) fn new_unchecked(m: CMat) -> Self {
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let herm = max_entry_norm(&(&self.m - self.m.adjoint()));
        if herm > ALGEBRA_TOL {
            out.push(Violation {
                kind: ViolationKind::Hermiticity,
                magnitude: herm,
            });
        }
        let tr = (self.m.trace() - c(1., 0.)).norm();
        if tr > ALGEBRA_TOL {
            out.push(Violation {
                kind: ViolationKind::Trace,
                magnitude: tr,
            });
        }
        let min_ev = hermitian_eigenvalues(&self.m)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -POSITIVITY_TOL {
            out.push(Violation {
                kind: ViolationKind::Positivity,
                magnitude: -min_ev,
            });
        }
        out
    }

    /// Partial trace over the second spin of a dim-4 state.
    pub fn trace_out_second(&self) -> Result<DensityMatrix> {
        self.require_dim(4)?;
        let mut r = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                r[(i, j)] = self.m[(2 * i, 2 * j)] + self.m[(2 * i + 1, 2 * j + 1)];
            }
        }
        Ok(DensityMatrix::new_unchecked(r))
    }

    /// Partial trace over the first spin of a dim-4 state.
    pub fn trace_out_first(&self) -> Result<DensityMatrix> {
        self.require_dim(4)?;
        let mut r = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                r[(i, j)] = self.m[(i, j)] + self.m[(i + 2, j + 2)];
            }
        }
        Ok(DensityMatrix::new_unchecked(r))
    }

    fn require_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(CoreError::Dimension {
                expected: dim,
                got: self.dim(),
                context: "density matrix".into(),
            });
        }
        Ok(())
    }
}

/// Real 3×3 matrix of two-spin correlations Tr(ρ Sᵢ⁽¹⁾Sⱼ⁽²⁾).
pub type CorrelationMatrix3 = Matrix3<f64>;

/// Rank-1 projector onto the Bloch-sphere direction (polar, azimuth); dim 2.
pub fn make_pure_spin(polar_angle: f64, azimuth: f64) -> DensityMatrix {
    let half = polar_angle / 2.0;
    let up = c(half.cos(), 0.0);
    let down = c(azimuth.cos(), azimuth.sin()) * half.sin();
    let psi = DVector::from_vec(vec![up, down]);
    DensityMatrix::new_unchecked(&psi * psi.adjoint())
}

/// Dim-4 projector onto the singlet (|↑↓⟩ − |↓↑⟩)/√2.
pub fn make_singlet() -> DensityMatrix {
    // written entrywise so the 1/2 entries are exact (FRAC_1_SQRT_2 squared
    // rounds to 0.5 + 1 ulp and would leak into downstream covariances)
    let mut m = CMat::zeros(4, 4);
    m[(1, 1)] = c(0.5, 0.);
    m[(2, 2)] = c(0.5, 0.);
    m[(1, 2)] = c(-0.5, 0.);
    m[(2, 1)] = c(-0.5, 0.);
    DensityMatrix::new_unchecked(m)
}

/// Product state ρ₁ ⊗ ρ₂ of two single-spin states.
pub fn make_product(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<DensityMatrix> {
    rho1.require_dim(2)?;
    rho2.require_dim(2)?;
    Ok(DensityMatrix::new_unchecked(
        rho1.matrix().kronecker(rho2.matrix()),
    ))
}

/// Tr(ρ S·axis) for a unit axis; a real in [−1, 1].
pub fn spin_expectation(rho: &DensityMatrix, axis: &[f64; 3]) -> Result<f64> {
    rho.require_dim(2)?;
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (norm - 1.0).abs() > POSITIVITY_TOL {
        return Err(CoreError::InvalidInput(format!(
            "axis must be a unit vector, |axis| = {norm}"
        )));
    }
    Ok((rho.matrix() * spin_along(axis)).trace().re)
}

/// Tr(ρ A) real part, for operator expectation values on any dimension.
pub fn expectation(rho: &DensityMatrix, op: &CMat) -> f64 {
    (rho.matrix() * op).trace().re
}

/// Entry (i, j) = Tr(ρ Sᵢ⁽¹⁾Sⱼ⁽²⁾) over a dim-4 state.
pub fn spin_correlation_matrix(rho: &DensityMatrix) -> Result<CorrelationMatrix3> {
    rho.require_dim(4)?;
    let s = spin_components();
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let op = s[i].kronecker(&s[j]);
            out[(i, j)] = (rho.matrix() * op).trace().re;
        }
    }
    Ok(out)
}

/// Diagnostic check of the density-matrix invariants; empty iff all hold.
pub fn validate_density_matrix(m: &CMat) -> Vec<Violation> {
    DensityMatrix {
        m: m.clone(),
    }
    .violations()
}

/// Eigenvalues of a Hermitian complex matrix via the real symmetric
/// embedding [[Re, −Im], [Im, Re]] (each eigenvalue appears twice).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            real[(i, j)] = z.re;
            real[(i + n, j + n)] = z.re;
            real[(i, j + n)] = -z.im;
            real[(i + n, j)] = z.im;
        }
    }
    let mut evs: Vec<f64> = real.symmetric_eigenvalues().iter().copied().collect();
    evs.sort_by(f64::total_cmp);
    evs.into_iter().step_by(2).collect()
}
