//! Small dense complex matrices evaluated pointwise at collocation nodes.
//!
//! Arithmetic stays in the generic scalar. Factorizations and eigenvalues are
//! delegated to `nalgebra` in double precision, since they are only used for
//! node-local solves and validation where the matrices are tiny.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cplx, czero, from_c64, to_c64, Cplx, Real};

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat<T: Real> {
    n: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![czero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, T::one())
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = cplx(s, T::zero());
        }
        m
    }

    pub fn from_real_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = cplx(d, T::zero());
        }
        m
    }

    /// Builds a matrix from real row slices. Panics if the rows are ragged.
    pub fn from_real_rows(rows: &[&[T]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                m.data[i * n + j] = cplx(v, T::zero());
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Cplx<T>>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Cplx<T>) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == czero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// `out = self · v`.
    pub fn mul_vec_into(&self, v: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = czero();
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            out[i] = acc;
        }
    }

    /// `out += self · v`.
    pub fn mul_vec_acc(&self, v: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = czero();
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            out[i] += acc;
        }
    }

    pub fn mul_vec(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut out = vec![czero(); self.n];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// Largest entry of `|M − M*|`.
    pub fn hermitian_defect(&self) -> T {
        let n = self.n;
        let mut d = T::zero();
        for i in 0..n {
            for j in i..n {
                let e = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                d = d.max(e);
            }
        }
        d
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    fn to_na(&self) -> DMatrix<Complex<f64>> {
        DMatrix::from_fn(self.n, self.n, |i, j| to_c64(self.get(i, j)))
    }

    /// Eigenvalues of the Hermitian part `(M + M*)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let m = self.to_na();
        let h = (&m + m.adjoint()) * Complex::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues().first().copied().unwrap_or(f64::INFINITY)
    }

    /// Cholesky factorization of a Hermitian positive-definite matrix.
    ///
    /// `nalgebra` happily takes complex square roots of negative pivots, so
    /// the factor is accepted only if its diagonal is real and positive.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let c = self.to_na().cholesky()?;
        let l = c.l_dirty();
        let ok = (0..self.n).all(|i| {
            let d = l[(i, i)];
            d.re > 0.0 && d.im.abs() <= 1e-12 * d.re && d.re.is_finite()
        });
        ok.then_some(Cholesky { inner: c })
    }
}

/// Reusable Cholesky factor (double precision).
#[derive(Clone, Debug)]
pub struct Cholesky {
    inner: nalgebra::Cholesky<Complex<f64>, nalgebra::Dyn>,
}

impl Cholesky {
    /// Solves in place: `v ← M⁻¹ v`.
    pub fn solve_in_place<T: Real>(&self, v: &mut [Cplx<T>]) {
        let mut b = DVector::from_iterator(v.len(), v.iter().map(|z| to_c64(*z)));
        self.inner.solve_mut(&mut b);
        for (dst, src) in v.iter_mut().zip(b.iter()) {
            *dst = from_c64(*src);
        }
    }
}

/// Solves `m · x = v` for Hermitian positive-definite `m`, in place.
pub fn spd_solve_in_place<T: Real>(m: &CMat<T>, v: &mut [Cplx<T>]) -> Result<()> {
    let c = m.cholesky().ok_or_else(|| {
        Error::InvalidArgument("matrix is not Hermitian positive definite".into())
    })?;
    c.solve_in_place(v);
    Ok(())
}

/// Pauli matrices and friends used by the spinor modules.
pub mod pauli {
    use super::CMat;
    use crate::scalar::{cplx, Real};

    pub fn sigma_x<T: Real>() -> CMat<T> {
        let (o, z) = (T::one(), T::zero());
        CMat::from_rows(&[vec![cplx(z, z), cplx(o, z)], vec![cplx(o, z), cplx(z, z)]])
    }

    pub fn sigma_y<T: Real>() -> CMat<T> {
        let (o, z) = (T::one(), T::zero());
        CMat::from_rows(&[vec![cplx(z, z), cplx(z, -o)], vec![cplx(z, o), cplx(z, z)]])
    }

    pub fn sigma_z<T: Real>() -> CMat<T> {
        let (o, z) = (T::one(), T::zero());
        CMat::from_rows(&[vec![cplx(o, z), cplx(z, z)], vec![cplx(z, z), cplx(-o, z)]])
    }
}
