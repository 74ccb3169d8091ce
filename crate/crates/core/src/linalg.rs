//! Small dense vectors and symmetric matrices, the parallel/orthogonal
//! decomposition of a gradient estimator's error, and projector contractions.
//!
//! Everything here is sized for the low-dimensional regime (d ≤ 16) that the
//! batch-size tests work in: matrices are stored as full row-major squares.

use std::fmt;
use std::ops::Index;

use crate::error::{check_dim, Error, Result};

/// Absolute gradient floor used when no design point is available for scaling.
pub const BASE_GRAD_FLOOR: f64 = 1e-12;

const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Gradient floor at a design point: `1e-12 · max(1, ‖ξ‖)`.
///
/// Below it the sample-size tests, which divide by `‖∇F‖²`, are treated as
/// undefined.
pub fn grad_floor(xi: &Vector) -> f64 {
    BASE_GRAD_FLOOR * xi.norm().max(1.0)
}

/// A dense real vector with finite entries.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|x| c * x).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + c · other`
    pub fn axpy(&self, c: f64, other: &Vector) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A symmetric matrix stored as a full row-major square.
///
/// Construction symmetrizes its input as `(M + Mᵀ)/2`, so `get(i, j) == get(j, i)`
/// holds bit-for-bit.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * dim + i] = d;
        }
        m
    }

    /// Builds from rows, symmetrizing.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for row in rows {
            check_dim(dim, row.len())?;
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(SymMatrix { dim, data })
    }

    /// Builds from a row-major buffer of length `dim²`, symmetrizing.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        let rows: Vec<Vec<f64>> = data.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        Self::from_rows(&rows)
    }

    /// The rank-one matrix `v ⊗ v`.
    pub fn outer(v: &Vector) -> Self {
        let dim = v.dim();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let x = v[i] * v[j];
                data[i * dim + j] = x;
                data[j * dim + i] = x;
            }
        }
        SymMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim, v.dim())?;
        Ok(Vector(
            self.data
                .chunks(self.dim)
                .map(|row| dot(row, v.as_slice()))
                .collect(),
        ))
    }

    /// `v · M v`
    pub fn quadratic_form(&self, v: &Vector) -> Result<f64> {
        Ok(v.dot(&self.mul_vec(v)?))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.data.chunks(self.dim.max(1)))
            .finish()
    }
}

/// Parallel/orthogonal decomposition of `υ − ∇F` relative to the direction of `∇F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSplit {
    /// `γ ∇F`
    pub parallel: Vector,
    /// `υ − (υ·e∇) e∇`
    pub orthogonal: Vector,
    /// `(υ·∇F)/‖∇F‖² − 1`
    pub gamma: f64,
}

/// Rank-one projector onto a direction and its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorPair {
    pub p_nabla: SymMatrix,
    pub p_perp: SymMatrix,
    pub direction: Vector,
}

fn check_floor(g: &Vector, floor: f64) -> Result<f64> {
    let norm = g.norm();
    if norm > floor {
        Ok(norm)
    } else {
        Err(Error::DegenerateGradient { norm, floor })
    }
}

/// `g / ‖g‖`, or `DegenerateGradient` when `‖g‖` is at or below [`BASE_GRAD_FLOOR`].
pub fn unit_direction(g: &Vector) -> Result<Vector> {
    unit_direction_with_floor(g, BASE_GRAD_FLOOR)
}

pub fn unit_direction_with_floor(g: &Vector, floor: f64) -> Result<Vector> {
    let norm = check_floor(g, floor)?;
    Ok(g.scale(1.0 / norm))
}

/// Splits the estimator error `υ − ∇F` into a component along `∇F` and one
/// orthogonal to it.
pub fn error_split(upsilon: &Vector, grad_exact: &Vector) -> Result<ErrorSplit> {
    check_dim(grad_exact.dim(), upsilon.dim())?;
    let norm = check_floor(grad_exact, BASE_GRAD_FLOOR)?;
    let gamma = upsilon.dot(grad_exact) / (norm * norm) - 1.0;
    let e = grad_exact.scale(1.0 / norm);
    let orthogonal = upsilon.axpy(-upsilon.dot(&e), &e);
    Ok(ErrorSplit {
        parallel: grad_exact.scale(gamma),
        orthogonal,
        gamma,
    })
}

/// `P∇ = e∇ ⊗ e∇` and `P⊥ = I − P∇` for the direction of `g`.
pub fn projectors(g: &Vector) -> Result<ProjectorPair> {
    projectors_with_floor(g, BASE_GRAD_FLOOR)
}

pub fn projectors_with_floor(g: &Vector, floor: f64) -> Result<ProjectorPair> {
    let direction = unit_direction_with_floor(g, floor)?;
    let p_nabla = SymMatrix::outer(&direction);
    let p_perp = SymMatrix::identity(g.dim()).sub(&p_nabla)?;
    Ok(ProjectorPair {
        p_nabla,
        p_perp,
        direction,
    })
}

/// Frobenius double contraction `Σ : P = Σ_ij Σ_ij P_ij`.
pub fn contract(sigma: &SymMatrix, p: &SymMatrix) -> Result<f64> {
    check_dim(sigma.dim(), p.dim())?;
    Ok(dot(&sigma.data, &p.data))
}

/// `Σ : (e ⊗ e) = e · Σ e` for a unit direction, without forming the projector.
pub(crate) fn contract_direction(sigma: &SymMatrix, e: &Vector) -> Result<f64> {
    sigma.quadratic_form(e)
}

/// Smallest and largest eigenvalue of a small symmetric matrix.
///
/// Uses the closed form for `d = 2` and cyclic Jacobi rotations otherwise.
pub fn eig_extremes(m: &SymMatrix) -> Result<(f64, f64)> {
    let eig = match m.dim() {
        1 => vec![m.get(0, 0)],
        2 => {
            let (lo, hi) = eig_2x2(m.get(0, 0), m.get(0, 1), m.get(1, 1));
            vec![lo, hi]
        }
        _ => jacobi_eigenvalues(m)?,
    };
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn eig_2x2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mid = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    (mid - rad, mid + rad)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, converged when the
/// off-diagonal Frobenius norm drops below `1e-12` of the full norm.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut a = m.data.clone();
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        s.sqrt()
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOLERANCE * total {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A ← Jᵀ A J with J the (p, q) plane rotation
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    Err(Error::ConvergenceFailure {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}
