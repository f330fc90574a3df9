//! Dense complex linear algebra for composite Hilbert spaces: tensor
//! products, partial traces, Hermitian spectral decompositions and exact
//! unitary time steps. ħ = 1 throughout; energies and times dimensionless.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lapack;

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Elementwise Hermiticity tolerance for operator construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Max elementwise deviation of U†U from the identity.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Norm tolerance for state vectors and density-matrix traces.
pub const NORM_TOL: f64 = 1e-10;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Identity matrix of the given dimension.
pub fn identity(dim: usize) -> CMat {
    let mut m = CMat::zeros((dim, dim));
    for i in 0..dim {
        m[[i, i]] = c64(1.0, 0.0);
    }
    m
}

/// A dim×dim Hermitian matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMat,
}

impl HermitianOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian operator must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let mut max_dev = 0.0f64;
        for i in 0..entries.nrows() {
            for j in i..entries.ncols() {
                let dev = (entries[[i, j]] - entries[[j, i]].conj()).norm();
                if dev > max_dev {
                    max_dev = dev;
                }
            }
        }
        if max_dev > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                max_dev,
                tol: HERMITICITY_TOL,
            });
        }
        Ok(Self { entries })
    }

    /// Construct from a real symmetric matrix (exact Hermiticity).
    pub fn from_real(entries: Array2<f64>) -> Result<Self> {
        Self::new(entries.mapv(|x| c64(x, 0.0)))
    }

    /// Diagonal operator from real eigenvalues in the computational basis.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = CMat::zeros((diag.len(), diag.len()));
        for (i, &d) in diag.iter().enumerate() {
            m[[i, i]] = c64(d, 0.0);
        }
        Self { entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    /// self + other
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator sum: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            entries: &self.entries + &other.entries,
        })
    }

    /// Real scalar multiple (Hermiticity preserved).
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.mapv(|z| z * factor),
        }
    }

    /// self + shift·I
    pub fn shift(&self, shift: f64) -> Self {
        let mut entries = self.entries.clone();
        for i in 0..entries.nrows() {
            entries[[i, i]] += shift;
        }
        Self { entries }
    }

    /// ⟨ψ|H|ψ⟩ (real by Hermiticity).
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        let hx = lapack::matvec(self.entries.view(), psi.amplitudes().view());
        psi.amplitudes()
            .iter()
            .zip(hx.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Gershgorin upper bound on the spectral radius.
    pub fn spectral_radius_bound(&self) -> f64 {
        let n = self.dim();
        let mut bound = 0.0f64;
        for i in 0..n {
            let center = self.entries[[i, i]].re;
            let radius: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| self.entries[[i, j]].norm())
                .sum();
            bound = bound.max(center.abs() + radius);
        }
        bound
    }
}

/// A dim×dim unitary matrix, validated on construction.
#[derive(Debug, Clone)]
pub struct UnitaryOperator {
    entries: CMat,
}

impl UnitaryOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "unitary must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let gram = lapack::adjoint_mul(entries.view(), entries.view());
        let n = entries.nrows();
        let mut max_dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { c64(1.0, 0.0) } else { c64(0.0, 0.0) };
                max_dev = max_dev.max((gram[[i, j]] - expect).norm());
            }
        }
        if max_dev > UNITARITY_TOL {
            return Err(Error::Numerical(format!(
                "matrix is not unitary: max |U†U - I| = {max_dev:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// U|ψ⟩
    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector {
            amplitudes: lapack::matvec(self.entries.view(), psi.amplitudes().view()),
        }
    }

    /// U·V
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            entries: lapack::mat_mul(self.entries.view(), other.entries.view()),
        }
    }
}

/// A normalized pure state.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: CVec,
}

impl StateVector {
    pub fn new(amplitudes: CVec) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::DimensionMismatch("empty state vector".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Numerical(format!(
                "state vector norm {norm} deviates from 1 beyond {NORM_TOL:.1e}"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Normalize and wrap; errors only on the zero vector.
    pub fn normalized(mut amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("cannot normalize the zero vector".into()));
        }
        amplitudes.mapv_inplace(|z| z / norm);
        Ok(Self { amplitudes })
    }

    /// Computational basis state |k⟩.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut v = CVec::zeros(dim);
        v[k] = c64(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// |ψ⟩⊗|φ⟩ with self as the left (system) factor.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut v = CVec::zeros(self.dim() * other.dim());
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (j, b) in other.amplitudes.iter().enumerate() {
                v[i * other.dim() + j] = a * b;
            }
        }
        Self { amplitudes: v }
    }

    /// |ψ⟩⟨ψ|
    pub fn density_matrix(&self) -> DensityMatrix {
        let n = self.dim();
        let mut m = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix { entries: m }
    }
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: CMat,
}

impl DensityMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        let h = HermitianOperator::new(entries)?;
        let entries = h.into_entries();
        let trace: Complex64 = (0..entries.nrows()).map(|i| entries[[i, i]]).sum();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::Numerical(format!(
                "density matrix trace {trace} deviates from 1"
            )));
        }
        let (vals, _) = lapack::eigh(entries.clone())?;
        if vals[0] < -NORM_TOL {
            return Err(Error::Numerical(format!(
                "density matrix has negative eigenvalue {}",
                vals[0]
            )));
        }
        Ok(Self { entries })
    }

    /// Wrap without the (costly) positivity eigencheck; Hermiticity and
    /// trace are still enforced.
    pub fn new_unchecked_positivity(entries: CMat) -> Result<Self> {
        let h = HermitianOperator::new(entries)?;
        let entries = h.into_entries();
        let trace: Complex64 = (0..entries.nrows()).map(|i| entries[[i, i]]).sum();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(Error::Numerical(format!(
                "density matrix trace {trace} deviates from 1"
            )));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entries[[i, i]]).sum()
    }

    /// tr(ρ H)
    pub fn expectation(&self, h: &HermitianOperator) -> f64 {
        let prod = lapack::mat_mul(self.entries.view(), h.entries().view());
        (0..self.dim()).map(|i| prod[[i, i]].re).sum()
    }

    /// Convex combination Σ wᵢ ρᵢ; weights must sum to 1.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| Error::Config("empty mixture".into()))?
            .1
            .dim();
        let mut m = CMat::zeros((dim, dim));
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch("mixture of unequal dims".into()));
            }
            m = m + rho.entries().mapv(|z| z * *w);
        }
        Self::new_unchecked_positivity(m)
    }
}

/// Eigenvalues (ascending) and phase-fixed eigenvectors of a Hermitian
/// operator; column k of `vectors` pairs with `values[k]`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Array1<f64>,
    pub vectors: CMat,
}

impl SpectralDecomposition {
    /// Smallest gap between adjacent eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .into_iter()
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Transform |ψ⟩ into this eigenbasis: returns U†ψ.
    pub fn to_eigenbasis(&self, psi: &CVec) -> CVec {
        lapack::matvec_adjoint(self.vectors.view(), psi.view())
    }

    /// Transform eigenbasis coefficients back: returns Uφ.
    pub fn from_eigenbasis(&self, phi: &CVec) -> CVec {
        lapack::matvec(self.vectors.view(), phi.view())
    }
}

/// Kronecker product with the left operand as the slow (system) index:
/// entry ((i·db+k),(j·db+l)) = a[i,j]·b[k,l].
pub fn tensor(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> CMat {
    assert_eq!(a.nrows(), a.ncols(), "tensor: left operand must be square");
    assert_eq!(b.nrows(), b.ncols(), "tensor: right operand must be square");
    let (da, db) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros((da * db, da * db));
    for i in 0..da {
        for j in 0..da {
            let aij = a[[i, j]];
            if aij == c64(0.0, 0.0) {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[[i * db + k, j * db + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Tensor product of Hermitian operators (Hermitian by construction).
pub fn tensor_hermitian(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        entries: tensor(a.entries().view(), b.entries().view()),
    }
}

/// Trace out the environment (right tensor factor) of a composite-space
/// density matrix: result[i][j] = Σ_k rho[(i·de+k)][(j·de+k)].
pub fn partial_trace_env(rho: &DensityMatrix, dim_s: usize, dim_e: usize) -> Result<DensityMatrix> {
    if rho.dim() != dim_s * dim_e {
        return Err(Error::DimensionMismatch(format!(
            "partial trace: rho dim {} != {}·{}",
            rho.dim(),
            dim_s,
            dim_e
        )));
    }
    let m = partial_trace_raw(rho.entries().view(), dim_s, dim_e);
    DensityMatrix::new_unchecked_positivity(m)
}

/// Partial trace over the right factor of an arbitrary matrix on the
/// composite space (no density-matrix validation).
pub fn partial_trace_raw(rho: ArrayView2<Complex64>, dim_s: usize, dim_e: usize) -> CMat {
    let mut out = CMat::zeros((dim_s, dim_s));
    for i in 0..dim_s {
        for j in 0..dim_s {
            let mut s = c64(0.0, 0.0);
            for k in 0..dim_e {
                s += rho[[i * dim_e + k, j * dim_e + k]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

/// Reduced density matrix of a pure composite state, without forming the
/// full |Ψ⟩⟨Ψ|: (ρ^S)_{ij} = Σ_k ψ[i·de+k]·conj(ψ[j·de+k]).
pub fn reduced_density_matrix(psi: &StateVector, dim_s: usize, dim_e: usize) -> Result<DensityMatrix> {
    if psi.dim() != dim_s * dim_e {
        return Err(Error::DimensionMismatch(format!(
            "reduced density matrix: state dim {} != {}·{}",
            psi.dim(),
            dim_s,
            dim_e
        )));
    }
    let amps = psi.amplitudes();
    let mut out = CMat::zeros((dim_s, dim_s));
    for i in 0..dim_s {
        for j in 0..=i {
            let mut s = c64(0.0, 0.0);
            for k in 0..dim_e {
                s += amps[i * dim_e + k] * amps[j * dim_e + k].conj();
            }
            out[[i, j]] = s;
            out[[j, i]] = s.conj();
        }
    }
    // enforce exact Hermiticity of the diagonal
    for i in 0..dim_s {
        out[[i, i]] = c64(out[[i, i]].re, 0.0);
    }
    DensityMatrix::new_unchecked_positivity(out)
}

/// Spectral decomposition of a Hermitian operator with a deterministic
/// phase convention: the largest-magnitude component of each eigenvector
/// is made real positive (ties broken by the lowest index).
pub fn eig_hermitian(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let (values, mut vectors) = lapack::eigh(h.entries().clone())?;
    fix_phases(&mut vectors);
    Ok(SpectralDecomposition { values, vectors })
}

/// Apply the real-positive-largest-component phase convention column-wise.
pub fn fix_phases(vectors: &mut CMat) {
    let n = vectors.nrows();
    for k in 0..n.min(vectors.ncols()) {
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for i in 0..n {
            let mag = vectors[[i, k]].norm();
            if mag > best_mag + 1e-14 {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = vectors[[best, k]];
        if pivot.norm() > 0.0 {
            let phase = pivot / pivot.norm();
            let correction = phase.conj();
            for i in 0..n {
                vectors[[i, k]] *= correction;
            }
        }
    }
}

/// exp(−i·h·dt) via spectral decomposition U exp(−iΛdt) U†.
pub fn unitary_step(h: &HermitianOperator, dt: f64) -> Result<UnitaryOperator> {
    if !dt.is_finite() {
        return Err(Error::Config(format!("non-finite time step {dt}")));
    }
    let spec = eig_hermitian(h)?;
    Ok(unitary_from_spectrum(&spec, dt))
}

/// exp(−iΛdt) rotated back to the computational basis.
pub fn unitary_from_spectrum(spec: &SpectralDecomposition, dt: f64) -> UnitaryOperator {
    let n = spec.values.len();
    let mut phased = spec.vectors.clone();
    for k in 0..n {
        let phase = Complex64::from_polar(1.0, -spec.values[k] * dt);
        for i in 0..n {
            phased[[i, k]] *= phase;
        }
    }
    UnitaryOperator {
        entries: lapack::mat_mul(phased.view(), spec.vectors.t().mapv(|z| z.conj()).view()),
    }
}
