//! Thin FFI layer over the system LAPACK/BLAS (OpenBLAS).
//!
//! Only the two kernels the rest of the crate actually needs: the
//! divide-and-conquer Hermitian eigensolver `zheevd` and the complex
//! matrix-vector product `zgemv`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

extern "C" {
    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );

    fn zgemv_(
        trans: *const u8,
        m: *const i32,
        n: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        x: *const Complex64,
        incx: *const i32,
        beta: *const Complex64,
        y: *mut Complex64,
        incy: *const i32,
    );

    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

/// C = A B for row-major complex matrices.
pub fn mat_mul(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Array2<Complex64> {
    gemm(a, b, false)
}

/// C = A† B for row-major complex matrices (A square).
pub fn adjoint_mul(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Array2<Complex64> {
    gemm(a, b, true)
}

fn gemm(
    a: ArrayView2<Complex64>,
    b: ArrayView2<Complex64>,
    adjoint_a: bool,
) -> Array2<Complex64> {
    // Effective shapes: op(A) is m×k, B is k×n.
    let (m, k) = if adjoint_a {
        (a.ncols(), a.nrows())
    } else {
        (a.nrows(), a.ncols())
    };
    assert_eq!(k, b.nrows(), "inner dimensions must agree");
    let n = b.ncols();

    let (a_own, b_own);
    let a_slice = match a.as_slice() {
        Some(s) => s,
        None => {
            a_own = a.as_standard_layout().into_owned();
            a_own.as_slice().unwrap()
        }
    };
    let b_slice = match b.as_slice() {
        Some(s) => s,
        None => {
            b_own = b.as_standard_layout().into_owned();
            b_own.as_slice().unwrap()
        }
    };
    let mut c = vec![Complex64::new(0.0, 0.0); m * n];
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    // Column-major view of our row-major buffers holds the transposes, so
    // we compute C^T = B^T · op(A)^T. For op(A) = A† the stored A^T needs
    // a 'C' (conjugate-transpose) op: (A^T)^H = conj(A) = (A†)^T.
    let mm = n as i32; // rows of C^T
    let nn = m as i32; // cols of C^T
    let kk = k as i32;
    let lda = b.ncols() as i32;
    let ldb = a.ncols() as i32;
    let ldc = n as i32;
    let transb = if adjoint_a { b"C" } else { b"N" };
    unsafe {
        zgemm_(
            b"N".as_ptr(),
            transb.as_ptr(),
            &mm,
            &nn,
            &kk,
            &one,
            b_slice.as_ptr(),
            &lda,
            a_slice.as_ptr(),
            &ldb,
            &zero,
            c.as_mut_ptr(),
            &ldc,
        );
    }
    Array2::from_shape_vec((m, n), c).unwrap()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `k` in column `k`.
/// The input is consumed as the LAPACK workspace.
pub fn eigh(mut a: Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh requires a square matrix");
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let nn = n as i32;
    let mut w = vec![0.0f64; n];
    let lwork = (2 * n + n * n) as i32;
    let lrwork = (1 + 5 * n + 2 * n * n) as i32;
    let liwork = (3 + 5 * n) as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    let mut info = 0i32;

    // Row-major storage seen by a column-major routine is the transpose;
    // for a Hermitian matrix A^T = conj(A), so solving with UPLO swapped
    // gives conj(eigenvectors) laid out row-major per column index. We
    // pass UPLO='U' (upper triangle of A^T = lower of A) and conjugate
    // the vectors afterwards.
    {
        let slice = a
            .as_slice_mut()
            .expect("matrix must be contiguous row-major");
        unsafe {
            zheevd_(
                b"V".as_ptr(),
                b"U".as_ptr(),
                &nn,
                slice.as_mut_ptr(),
                &nn,
                w.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                rwork.as_mut_ptr(),
                &lrwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
    }
    if info != 0 {
        return Err(Error::EigenSolve(info));
    }
    // LAPACK wrote eigenvector k into column-major column k, i.e. into our
    // row k; it solved conj(A), so row k holds conj(v_k). Transposing and
    // conjugating in one pass yields v_k in column k.
    let vectors = a.t().mapv(|z| z.conj());
    Ok((Array1::from(w), vectors))
}

/// y = A x for a square complex matrix (row-major).
pub fn matvec(a: ArrayView2<Complex64>, x: ArrayView1<Complex64>) -> Array1<Complex64> {
    gemv(a, x, false)
}

/// y = A† x for a square complex matrix (row-major).
pub fn matvec_adjoint(a: ArrayView2<Complex64>, x: ArrayView1<Complex64>) -> Array1<Complex64> {
    gemv(a, x, true)
}

fn gemv(
    a: ArrayView2<Complex64>,
    x: ArrayView1<Complex64>,
    adjoint: bool,
) -> Array1<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, x.len());
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let (a_std, x_std);
    let a_slice = match a.as_slice() {
        Some(s) => s,
        None => {
            a_std = a.as_standard_layout().into_owned();
            a_std.as_slice().unwrap()
        }
    };
    let x_slice = match x.as_slice() {
        Some(s) => s,
        None => {
            x_std = x.as_standard_layout().into_owned();
            x_std.as_slice().unwrap()
        }
    };
    let nn = n as i32;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let inc = 1i32;
    // Row-major A is column-major A^T: 'T' on the stored buffer gives Ax;
    // A†x is formed as conj(A^T·conj(x)) via 'N'.
    if !adjoint {
        unsafe {
            zgemv_(
                b"T".as_ptr(),
                &nn,
                &nn,
                &one,
                a_slice.as_ptr(),
                &nn,
                x_slice.as_ptr(),
                &inc,
                &zero,
                y.as_mut_ptr(),
                &inc,
            );
        }
        Array1::from(y)
    } else {
        let xc: Vec<Complex64> = x_slice.iter().map(|z| z.conj()).collect();
        unsafe {
            zgemv_(
                b"N".as_ptr(),
                &nn,
                &nn,
                &one,
                a_slice.as_ptr(),
                &nn,
                xc.as_ptr(),
                &inc,
                &zero,
                y.as_mut_ptr(),
                &inc,
            );
        }
        Array1::from(y.into_iter().map(|z| z.conj()).collect::<Vec<_>>())
    }
}
