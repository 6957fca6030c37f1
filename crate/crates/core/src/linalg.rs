//! Dense linear algebra glue over LAPACK/BLAS.
//!
//! Matrices are `ndarray` arrays. Factorizations go through `lapack-sys`
//! on column-major copies; products go through `ndarray::dot`, which is
//! BLAS-backed.

use std::os::raw::{c_char, c_int};

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type RMatrix = Array2<f64>;
pub type CMatrix = Array2<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

fn lapack_dim(n: usize) -> Result<c_int> {
    c_int::try_from(n).map_err(|_| Error::InvalidParameter(format!("dimension {n} too large for LAPACK")))
}

/// Eigen-decomposition of a real symmetric matrix (divide and conquer).
///
/// Returns eigenvalues in ascending order and the eigenvectors as columns.
pub fn symmetric_eigen(a: &RMatrix) -> Result<(Vec<f64>, RMatrix)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok((Vec::new(), RMatrix::zeros((0, 0))));
    }
    let nn = lapack_dim(n)?;
    let mut v = RMatrix::zeros((n, n).f());
    v.assign(a);
    let mut w = vec![0.0; n];
    let jobz = b'V' as c_char;
    let uplo = b'L' as c_char;
    let mut info: c_int = 0;
    let mut work_query = [0.0f64];
    let mut iwork_query = [0 as c_int];
    let query: c_int = -1;
    let ptr = v.as_mut_ptr();
    // SAFETY: `v` is an n x n column-major buffer; query calls write one element.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            ptr,
            &nn,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &query,
            iwork_query.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NumericalFailure(format!("dsyevd workspace query failed: info = {info}")));
    }
    let lwork = work_query[0] as c_int;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    // SAFETY: workspace sizes come from the query above.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &nn,
            ptr,
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NumericalFailure(format!("dsyevd did not converge: info = {info}")));
    }
    Ok((w, v))
}

/// Complex Schur decomposition `a = q t q^H`.
///
/// Returns the diagonal of `t` and the unitary Schur vectors `q`.
pub fn complex_schur(a: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros((0, 0))));
    }
    let nn = lapack_dim(n)?;
    let mut t = CMatrix::zeros((n, n).f());
    t.assign(a);
    let mut q = CMatrix::zeros((n, n).f());
    let mut w = vec![ZERO; n];
    let mut rwork = vec![0.0f64; n];
    let mut bwork = vec![0 as c_int; n];
    let jobvs = b'V' as c_char;
    let sort = b'N' as c_char;
    let mut sdim: c_int = 0;
    let mut info: c_int = 0;
    let mut work_query = [ZERO];
    let query: c_int = -1;
    let t_ptr = t.as_mut_ptr() as *mut lapack_sys::__BindgenComplex<f64>;
    let q_ptr = q.as_mut_ptr() as *mut lapack_sys::__BindgenComplex<f64>;
    let w_ptr = w.as_mut_ptr() as *mut lapack_sys::__BindgenComplex<f64>;
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to the bindgen type.
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &nn,
            t_ptr,
            &nn,
            &mut sdim,
            w_ptr,
            q_ptr,
            &nn,
            work_query.as_mut_ptr() as *mut _,
            &query,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NumericalFailure(format!("zgees workspace query failed: info = {info}")));
    }
    let lwork = (work_query[0].re as c_int).max(1);
    let mut work = vec![ZERO; lwork as usize];
    // SAFETY: as above, with a workspace of the queried size.
    unsafe {
        lapack_sys::zgees_(
            &jobvs,
            &sort,
            None,
            &nn,
            t_ptr,
            &nn,
            &mut sdim,
            w_ptr,
            q_ptr,
            &nn,
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NumericalFailure(format!("zgees did not converge: info = {info}")));
    }
    Ok((w, q))
}

/// Solve the square real system `a x = b` by LU with partial pivoting.
pub fn solve(a: &RMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let nn = lapack_dim(n)?;
    let mut lu = RMatrix::zeros((n, n).f());
    lu.assign(a);
    let mut x = b.to_vec();
    let mut ipiv = vec![0 as c_int; n];
    let one: c_int = 1;
    let mut info: c_int = 0;
    // SAFETY: `lu` is n x n column-major and `x` holds n values.
    unsafe {
        lapack_sys::dgesv_(&nn, &one, lu.as_mut_ptr(), &nn, ipiv.as_mut_ptr(), x.as_mut_ptr(), &nn, &mut info);
    }
    if info > 0 {
        return Err(Error::SingularSystem(format!("zero pivot at position {info}")));
    }
    if info < 0 {
        return Err(Error::NumericalFailure(format!("dgesv argument {} invalid", -info)));
    }
    Ok(x)
}

fn split(x: &[C64]) -> RMatrix {
    let mut out = RMatrix::zeros((x.len(), 2));
    for (row, z) in out.rows_mut().into_iter().zip(x) {
        let mut row = row;
        row[0] = z.re;
        row[1] = z.im;
    }
    out
}

fn join(y: &RMatrix) -> Vec<C64> {
    y.rows().into_iter().map(|r| C64::new(r[0], r[1])).collect()
}

/// `m · x` for a real matrix and a complex vector.
pub fn real_matvec(m: ArrayView2<'_, f64>, x: &[C64]) -> Vec<C64> {
    join(&m.dot(&split(x)))
}

/// `m · x` for complex `m` and `x`.
pub fn complex_matvec(m: &CMatrix, x: &[C64]) -> Vec<C64> {
    let xv = Array1::from(x.to_vec());
    m.dot(&xv).to_vec()
}

/// Conjugate transpose, in row-major layout.
pub fn adjoint(m: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros((m.ncols(), m.nrows()));
    out.zip_mut_with(&m.t(), |o, z| *o = z.conj());
    out
}

/// Replace `m` by `(m + m^H) / 2`.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]] = C64::new(m[[i, i]].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            m[[i, j]] = avg;
            m[[j, i]] = avg.conj();
        }
    }
}

/// Complex product `a · b` where `b` is real, via two real GEMMs.
pub fn complex_times_real(a: &CMatrix, b: ArrayView2<'_, f64>) -> CMatrix {
    let re = a.mapv(|z| z.re).dot(&b);
    let im = a.mapv(|z| z.im).dot(&b);
    let mut out = CMatrix::zeros(re.raw_dim());
    ndarray::Zip::from(&mut out).and(&re).and(&im).for_each(|o, &r, &i| *o = C64::new(r, i));
    out
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn real_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `<x, y> = Σ x_i conj(y_i)`, linear in the first argument.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub(crate) fn axpy(acc: &mut [C64], a: C64, x: &[C64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn symmetric_eigen_of_path() {
        let l = array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let (w, v) = symmetric_eigen(&l).unwrap();
        assert!((w[0]).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        assert!((w[2] - 3.0).abs() < 1e-12);
        let resid = l.dot(&v) - &v * &Array1::from(w.clone());
        assert!(resid.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn schur_of_rotation() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let m = array![[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]];
        let (w, q) = complex_schur(&m).unwrap();
        let mut phases: Vec<f64> = w.iter().map(|z| z.arg()).collect();
        phases.sort_by(f64::total_cmp);
        assert!((phases[0] + 0.3).abs() < 1e-12 && (phases[1] - 0.3).abs() < 1e-12);
        let qq = adjoint(&q).dot(&q);
        assert!((qq[[0, 0]] - 1.0).norm() < 1e-12 && qq[[0, 1]].norm() < 1e-12);
    }

    #[test]
    fn real_matvec_matches_manual() {
        let m = array![[1.0, 2.0], [3.0, 4.0]];
        let x = [C64::new(1.0, -1.0), C64::new(0.5, 2.0)];
        let y = real_matvec(m.view(), &x);
        assert_eq!(y[0], C64::new(2.0, 3.0));
        assert_eq!(y[1], C64::new(5.0, 5.0));
        let yt = real_matvec(m.t(), &x);
        assert_eq!(yt[0], C64::new(2.5, 5.0));
    }
}
