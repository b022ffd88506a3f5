use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Which factor of a bipartite system survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    A,
    B,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    /// `|u><v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &x) in v.iter().enumerate() {
            self.data[i * self.cols + j] = x;
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().into_iter().sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest elementwise modulus of `M - M†`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// `(M + M†)/2`
    pub fn hermitize(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `<u|M|v>`
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        inner(u, &self.mat_vec(v))
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> C64 {
        assert!(self.cols == rhs.rows && self.rows == rhs.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * rhs.data[k * rhs.cols + i];
            }
        }
        acc
    }

    pub fn add_scaled(&mut self, rhs: &Self, s: C64) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b * s;
        }
    }

    pub fn add_identity(&self, s: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m.data[i * self.cols + i] += s;
        }
        m
    }
}

/// `<u|v>` (conjugate-linear in `u`).
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &[C64]) -> Option<Vec<C64>> {
    let n = norm(v);
    if n <= f64::MIN_POSITIVE {
        return None;
    }
    Some(v.iter().map(|z| z / n).collect())
}

/// Kronecker product, `(A⊗B)[i·rB+k, j·cB+l] = A[i,j]·B[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca, rb, cb) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    let oc = ca * cb;
    for i in 0..ra {
        for j in 0..ca {
            let aij = a.data[i * ca + j];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                let row = (i * rb + k) * oc + j * cb;
                for l in 0..cb {
                    out.data[row + l] = aij * b.data[k * cb + l];
                }
            }
        }
    }
    out
}

/// Accumulates `s·(A⊗B)` into `out` without allocating the product.
pub(crate) fn kron_add_into(out: &mut ComplexMatrix, a: &ComplexMatrix, b: &ComplexMatrix, s: f64) {
    let (ra, ca, rb, cb) = (a.rows, a.cols, b.rows, b.cols);
    debug_assert_eq!((out.rows, out.cols), (ra * rb, ca * cb));
    let oc = ca * cb;
    for i in 0..ra {
        for j in 0..ca {
            let aij = a.data[i * ca + j] * s;
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                let row = (i * rb + k) * oc + j * cb;
                for l in 0..cb {
                    out.data[row + l] += aij * b.data[k * cb + l];
                }
            }
        }
    }
}

/// Partial trace of an operator on `C^dim_a ⊗ C^dim_b`, keeping `keep`.
pub fn partial_trace(m: &ComplexMatrix, dim_a: usize, dim_b: usize, keep: Party) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if m.rows != n || m.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of {}x{} over {dim_a}x{dim_b}",
            m.rows, m.cols
        )));
    }
    let out = match keep {
        Party::A => ComplexMatrix::from_fn(dim_a, dim_a, |i, ip| {
            (0..dim_b).map(|j| m[(i * dim_b + j, ip * dim_b + j)]).sum()
        }),
        Party::B => ComplexMatrix::from_fn(dim_b, dim_b, |j, jp| {
            (0..dim_a).map(|i| m[(i * dim_b + j, i * dim_b + jp)]).sum()
        }),
    };
    Ok(out)
}

/// Reshapes a bipartite vector into its `dim_a × dim_b` coefficient matrix.
pub fn matricize(state: &[C64], dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    ComplexMatrix::from_vec(dim_a, dim_b, state.to_vec())
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.add_scaled(rhs, ONE);
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, -ONE);
        out
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Serialized form: `{"rows", "cols", "re": [...], "im": [...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = Error;
    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.re.len() != r.im.len() {
            return Err(Error::DimensionMismatch(
                "real and imaginary parts differ in length".into(),
            ));
        }
        let data = r.re.iter().zip(&r.im).map(|(&a, &b)| C64::new(a, b)).collect();
        ComplexMatrix::from_vec(r.rows, r.cols, data)
    }
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)), ComplexMatrix::identity(4));
        let k = kron(&ComplexMatrix::from_real_diag(&[1.0, 2.0]), &ComplexMatrix::from_real_diag(&[3.0, 4.0]));
        assert_eq!(k, ComplexMatrix::from_real_diag(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn kron_index_layout() {
        let a = ComplexMatrix::from_fn(2, 3, |i, j| c((i * 3 + j) as f64 + 1.0));
        let b = ComplexMatrix::from_fn(3, 2, |i, j| C64::new(i as f64, j as f64));
        let k = kron(&a, &b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_bell_projector_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [c(s), ZERO, ZERO, c(s)];
        let rho = ComplexMatrix::projector(&phi);
        for keep in [Party::A, Party::B] {
            let r = partial_trace(&rho, 2, 2, keep).unwrap();
            assert!((&r - &ComplexMatrix::identity(2).scale_real(0.5)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_shape() {
        let m = ComplexMatrix::identity(5);
        assert!(matches!(partial_trace(&m, 2, 2, Party::A), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn serde_repr_roundtrip() {
        let m = ComplexMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 - 0.5, j as f64 * 0.25));
        let s = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"rows":2,"cols":2,"re":[1],"im":[0]}"#).is_err());
    }
}
