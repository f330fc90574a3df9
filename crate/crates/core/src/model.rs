//! Model construction: system + chaotic-bath Hamiltonian families, the
//! control protocol λ(t), the renormalization split of the interaction,
//! and the frozen perturbation split used by the decoherence analysis.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::hilbert::{
    c64, eig_hermitian, identity, tensor_hermitian, CMat, CVec, HermitianOperator,
    SpectralDecomposition, StateVector,
};
use crate::lapack;

/// Control-parameter schedule shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolShape {
    Constant,
    LinearRamp,
    SmoothRamp,
}

/// The control parameter λ(t) on [t0, t1].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Protocol {
    pub t0: f64,
    pub t1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub shape: ProtocolShape,
}

impl Protocol {
    pub fn new(t0: f64, t1: f64, lambda0: f64, lambda1: f64, shape: ProtocolShape) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::Config(format!("protocol needs t1 > t0, got [{t0}, {t1}]")));
        }
        if shape == ProtocolShape::Constant && lambda0 != lambda1 {
            return Err(Error::Config(
                "constant protocol requires lambda1 == lambda0".into(),
            ));
        }
        Ok(Self { t0, t1, lambda0, lambda1, shape })
    }

    pub fn constant(t0: f64, t1: f64, lambda: f64) -> Result<Self> {
        Self::new(t0, t1, lambda, lambda, ProtocolShape::Constant)
    }

    /// λ(t); errors outside [t0, t1].
    pub fn lambda(&self, t: f64) -> Result<f64> {
        let eps = 1e-9 * (self.t1 - self.t0).max(1.0);
        if t < self.t0 - eps || t > self.t1 + eps {
            return Err(Error::TimeOutOfRange { t, t0: self.t0, t1: self.t1 });
        }
        let x = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        let s = match self.shape {
            ProtocolShape::Constant => 0.0,
            ProtocolShape::LinearRamp => x,
            ProtocolShape::SmoothRamp => 0.5 * (1.0 - (std::f64::consts::PI * x).cos()),
        };
        Ok(self.lambda0 + (self.lambda1 - self.lambda0) * s)
    }
}

/// Where to center the microcanonical window of bath eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowCenter {
    /// Center on the eigenstate closest to this energy.
    Energy(f64),
    /// Center on this eigenstate index.
    Index(usize),
    /// Center on the middle of the spectrum.
    MidSpectrum,
}

/// A contiguous block of bath eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowSpec {
    pub center: WindowCenter,
    pub count: usize,
}

impl WindowSpec {
    pub fn mid(count: usize) -> Self {
        Self { center: WindowCenter::MidSpectrum, count }
    }

    /// Resolve to a contiguous index range into the ascending bath spectrum.
    pub fn resolve(&self, bath: &SpectralDecomposition) -> Result<std::ops::Range<usize>> {
        let n = bath.values.len();
        if self.count == 0 {
            return Err(Error::Config("window count must be positive".into()));
        }
        if self.count > n {
            return Err(Error::Config(format!(
                "window count {} exceeds bath dimension {}",
                self.count, n
            )));
        }
        let center = match self.center {
            WindowCenter::Index(i) => {
                if i >= n {
                    return Err(Error::Config(format!("window center index {i} out of range")));
                }
                i
            }
            WindowCenter::MidSpectrum => n / 2,
            WindowCenter::Energy(e) => {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (i, &v) in bath.values.iter().enumerate() {
                    let d = (v - e).abs();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                best
            }
        };
        let half = self.count / 2;
        let start = center.saturating_sub(half).min(n - self.count);
        Ok(start..start + self.count)
    }
}

/// GOE random matrix: real symmetric, off-diagonal variance scale²/dim,
/// diagonal variance 2·scale²/dim. Deterministic for a fixed seed.
pub fn build_goe_bath(dim: usize, scale: f64, seed: u64) -> Result<HermitianOperator> {
    if dim < 2 {
        return Err(Error::Config(format!("GOE bath needs dim >= 2, got {dim}")));
    }
    if !(scale > 0.0) {
        return Err(Error::Config(format!("GOE bath needs scale > 0, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off = Normal::new(0.0, scale / (dim as f64).sqrt()).unwrap();
    let diag = Normal::new(0.0, scale * (2.0 / dim as f64).sqrt()).unwrap();
    let mut m = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        m[[i, i]] = diag.sample(&mut rng);
        for j in (i + 1)..dim {
            let v = off.sample(&mut rng);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    HermitianOperator::from_real(m)
}

const PAULI_X: [[f64; 2]; 2] = [[0.0, 1.0], [1.0, 0.0]];
const PAULI_Z: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, -1.0]];

fn chain_term(sites: usize, ops: &[(usize, [[f64; 2]; 2])]) -> Array2<f64> {
    // Kronecker chain with identities on unlisted sites.
    let mut acc = ndarray::array![[1.0f64]];
    for site in 0..sites {
        let local: Array2<f64> = match ops.iter().find(|(s, _)| *s == site) {
            Some((_, op)) => ndarray::arr2(op),
            None => ndarray::Array2::eye(2),
        };
        let (ra, ca) = (acc.nrows(), acc.ncols());
        let mut next = Array2::<f64>::zeros((ra * 2, ca * 2));
        for i in 0..ra {
            for j in 0..ca {
                for k in 0..2 {
                    for l in 0..2 {
                        next[[i * 2 + k, j * 2 + l]] = acc[[i, j]] * local[[k, l]];
                    }
                }
            }
        }
        acc = next;
    }
    acc
}

/// Open-boundary Ising chain with transverse and longitudinal fields:
/// H = Σ j·σ_z^k σ_z^{k+1} + Σ (h_x·σ_x^k + h_z·σ_z^k).
pub fn build_spin_chain_bath(sites: usize, j_coupling: f64, h_x: f64, h_z: f64) -> Result<HermitianOperator> {
    if !(2..=12).contains(&sites) {
        return Err(Error::Config(format!(
            "spin chain supports 2..=12 sites, got {sites}"
        )));
    }
    let dim = 1usize << sites;
    let mut h = Array2::<f64>::zeros((dim, dim));
    for k in 0..sites - 1 {
        h = h + chain_term(sites, &[(k, PAULI_Z), (k + 1, PAULI_Z)]).mapv(|x| x * j_coupling);
    }
    for k in 0..sites {
        if h_x != 0.0 {
            h = h + chain_term(sites, &[(k, PAULI_X)]).mapv(|x| x * h_x);
        }
        if h_z != 0.0 {
            h = h + chain_term(sites, &[(k, PAULI_Z)]).mapv(|x| x * h_z);
        }
    }
    HermitianOperator::from_real(h)
}

/// Per-state mean of ⟨n|h_ie2|n⟩ over the window eigenstates of h_e2.
pub fn window_trace(
    h_ie2: &HermitianOperator,
    h_e2: &HermitianOperator,
    window: &WindowSpec,
) -> Result<f64> {
    if h_ie2.dim() != h_e2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "window trace: {} vs {}",
            h_ie2.dim(),
            h_e2.dim()
        )));
    }
    let spec = eig_hermitian(h_e2)?;
    let range = window.resolve(&spec)?;
    Ok(window_trace_with_spectrum(h_ie2, &spec, range))
}

pub(crate) fn window_trace_with_spectrum(
    h_ie2: &HermitianOperator,
    bath_spec: &SpectralDecomposition,
    range: std::ops::Range<usize>,
) -> f64 {
    let count = range.len();
    let mut sum = 0.0;
    for n in range {
        let col = bath_spec.vectors.column(n);
        let hv = lapack::matvec(h_ie2.entries().view(), col);
        let val: f64 = col.iter().zip(hv.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        sum += val;
    }
    sum / count as f64
}

/// The assembled total model: system, chaotic bath E2, product-form
/// interaction, microcanonical window and control protocol.
///
/// On construction the bath interaction factor is rescaled so its centered
/// matrix elements inside the window have unit rms; the physical coupling
/// strength is then carried entirely by λ.
#[derive(Debug, Clone)]
pub struct TotalModel {
    h_s: HermitianOperator,
    h_is: HermitianOperator,
    h_e2: HermitianOperator,
    h_ie2: HermitianOperator,
    window: WindowSpec,
    window_range: std::ops::Range<usize>,
    mean_ie2: f64,
    interaction_scale: f64,
    protocol: Protocol,
    bath_spec: SpectralDecomposition,
}

impl TotalModel {
    pub fn new(
        h_s: HermitianOperator,
        h_is: HermitianOperator,
        h_e2: HermitianOperator,
        h_ie2: HermitianOperator,
        window: WindowSpec,
        protocol: Protocol,
    ) -> Result<Self> {
        Self::with_normalization(h_s, h_is, h_e2, h_ie2, window, protocol, true)
    }

    /// `normalize` controls the unit-rms rescaling of the bath interaction
    /// factor; disabling it keeps the factor exactly as supplied.
    pub fn with_normalization(
        h_s: HermitianOperator,
        h_is: HermitianOperator,
        h_e2: HermitianOperator,
        mut h_ie2: HermitianOperator,
        window: WindowSpec,
        protocol: Protocol,
        normalize: bool,
    ) -> Result<Self> {
        if h_s.dim() != h_is.dim() {
            return Err(Error::DimensionMismatch(format!(
                "system operators disagree: {} vs {}",
                h_s.dim(),
                h_is.dim()
            )));
        }
        if h_e2.dim() != h_ie2.dim() {
            return Err(Error::DimensionMismatch(format!(
                "bath operators disagree: {} vs {}",
                h_e2.dim(),
                h_ie2.dim()
            )));
        }
        let bath_spec = eig_hermitian(&h_e2)?;
        let window_range = window.resolve(&bath_spec)?;

        let mut mean_ie2 = window_trace_with_spectrum(&h_ie2, &bath_spec, window_range.clone());
        let mut interaction_scale = 1.0;
        if normalize {
            let rms = windowed_offdiag_rms(&h_ie2, &bath_spec, window_range.clone(), mean_ie2);
            if rms > 0.0 {
                interaction_scale = 1.0 / rms;
                h_ie2 = h_ie2.scale(interaction_scale);
                mean_ie2 *= interaction_scale;
            }
        }

        Ok(Self {
            h_s,
            h_is,
            h_e2,
            h_ie2,
            window,
            window_range,
            mean_ie2,
            interaction_scale,
            protocol,
            bath_spec,
        })
    }

    pub fn dim_s(&self) -> usize {
        self.h_s.dim()
    }

    pub fn dim_e(&self) -> usize {
        self.h_e2.dim()
    }

    pub fn full_dim(&self) -> usize {
        self.dim_s() * self.dim_e()
    }

    pub fn h_s(&self) -> &HermitianOperator {
        &self.h_s
    }

    pub fn h_is(&self) -> &HermitianOperator {
        &self.h_is
    }

    pub fn h_e2(&self) -> &HermitianOperator {
        &self.h_e2
    }

    /// Bath interaction factor (after any normalization).
    pub fn h_ie2(&self) -> &HermitianOperator {
        &self.h_ie2
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn window_range(&self) -> std::ops::Range<usize> {
        self.window_range.clone()
    }

    /// Window per-state mean ⟨H_I^{E2}⟩.
    pub fn mean_ie2(&self) -> f64 {
        self.mean_ie2
    }

    /// Rescaling applied to the supplied bath interaction factor.
    pub fn interaction_scale(&self) -> f64 {
        self.interaction_scale
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    /// Replace the protocol, keeping everything else (bath decomposition
    /// included).
    pub fn with_protocol(&self, protocol: Protocol) -> Self {
        let mut m = self.clone();
        m.protocol = protocol;
        m
    }

    /// Eigendecomposition of the bath self-Hamiltonian (cached).
    pub fn bath_spectrum(&self) -> &SpectralDecomposition {
        &self.bath_spec
    }

    pub fn lambda(&self, t: f64) -> Result<f64> {
        self.protocol.lambda(t)
    }

    /// H_S^r(t) = H_S + λ(t)·⟨H_I^{E2}⟩·H_I^S
    pub fn h_s_renormalized(&self, t: f64) -> Result<HermitianOperator> {
        let lambda = self.lambda(t)?;
        self.h_s.add(&self.h_is.scale(lambda * self.mean_ie2))
    }

    /// Centered bath interaction factor H_I^{E2} − ⟨H_I^{E2}⟩·I.
    pub fn centered_bath_factor(&self) -> HermitianOperator {
        self.h_ie2.shift(-self.mean_ie2)
    }

    /// H_I^{r2} = H_I^S ⊗ (H_I^{E2} − ⟨H_I^{E2}⟩·I)
    pub fn h_i_r2(&self) -> HermitianOperator {
        tensor_hermitian(&self.h_is, &self.centered_bath_factor())
    }

    /// H(t) = H_S^r(t)⊗I + λ(t)·H_I^{r2} + I⊗H_{E2}
    pub fn h_total(&self, t: f64) -> Result<HermitianOperator> {
        let lambda = self.lambda(t)?;
        self.h_total_at_lambda(lambda)
    }

    /// The total Hamiltonian as a function of the control value directly.
    pub fn h_total_at_lambda(&self, lambda: f64) -> Result<HermitianOperator> {
        let h_sr = self.h_s.add(&self.h_is.scale(lambda * self.mean_ie2))?;
        let ide = HermitianOperator::new(identity(self.dim_e()))?;
        let ids = HermitianOperator::new(identity(self.dim_s()))?;
        let mut total = tensor_hermitian(&h_sr, &ide).into_entries();
        total = total + self.h_i_r2().scale(lambda).entries();
        total = total + tensor_hermitian(&ids, &self.h_e2).entries();
        HermitianOperator::new(total)
    }

    /// ΔH_S(t) = (λ(t) − λ(t0))·⟨H_I^{E2}⟩·H_I^S, diagnostic for the
    /// frozen-perturbation approximation.
    pub fn delta_h_s(&self, t: f64) -> Result<HermitianOperator> {
        let l = self.lambda(t)?;
        let l0 = self.lambda(self.protocol.t0)?;
        Ok(self.h_is.scale((l - l0) * self.mean_ie2))
    }

    /// Freeze the perturbation at the protocol start: H = H_0 + ε·H_1 with
    /// H_0 = H_S^r(t0)⊗I + I⊗H_{E2}, H_1 = H_I^{r2}, ε = λ(t0).
    pub fn perturbation_split(&self) -> Result<PerturbationSplit> {
        let t0 = self.protocol.t0;
        let epsilon = self.lambda(t0)?;
        if epsilon == 0.0 && self.h_is.entries().iter().any(|z| z.norm() > 0.0) {
            return Err(Error::Config(
                "perturbation split undefined: lambda(t0) = 0 with nonzero coupling".into(),
            ));
        }
        let h_sr0 = self.h_s_renormalized(t0)?;
        let ide = HermitianOperator::new(identity(self.dim_e()))?;
        let ids = HermitianOperator::new(identity(self.dim_s()))?;
        let h0 = tensor_hermitian(&h_sr0, &ide).add(&tensor_hermitian(&ids, &self.h_e2))?;
        Ok(PerturbationSplit {
            h0,
            h1: self.h_i_r2(),
            epsilon,
        })
    }

    /// A normalized superposition of window eigenstates of the bath with a
    /// Gaussian energy profile and seeded random phases/amplitudes,
    /// expressed in the computational basis.
    pub fn bath_window_state(&self, seed: u64) -> Result<StateVector> {
        let range = self.window_range.clone();
        let n_w = range.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        // random-phase state: equal magnitude on every window level, so the
        // participation number is the full window dimension
        let mut coeffs: Vec<(usize, Complex64)> = Vec::with_capacity(n_w);
        for n in range {
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            coeffs.push((n, c64(phase.cos(), phase.sin())));
        }
        self.state_from_bath_coeffs(&coeffs)
    }

    /// The single eigenstate at the middle of the window.
    pub fn bath_midwindow_state(&self) -> Result<StateVector> {
        let mid = (self.window_range.start + self.window_range.end) / 2;
        self.state_from_bath_coeffs(&[(mid, c64(1.0, 0.0))])
    }

    fn state_from_bath_coeffs(&self, coeffs: &[(usize, Complex64)]) -> Result<StateVector> {
        let mut v = CVec::zeros(self.dim_e());
        for &(n, cfd) in coeffs {
            let col = self.bath_spec.vectors.column(n);
            for (i, amp) in col.iter().enumerate() {
                v[i] += cfd * amp;
            }
        }
        StateVector::normalized(v)
    }
}

/// The frozen split H = H_0 + ε H_1 at the protocol start.
#[derive(Debug, Clone)]
pub struct PerturbationSplit {
    pub h0: HermitianOperator,
    pub h1: HermitianOperator,
    pub epsilon: f64,
}

/// rms of the centered interaction matrix elements inside the window
/// (off-diagonal part, which has zero mean by construction).
fn windowed_offdiag_rms(
    h_ie2: &HermitianOperator,
    bath_spec: &SpectralDecomposition,
    range: std::ops::Range<usize>,
    mean: f64,
) -> f64 {
    let sub = windowed_matrix(h_ie2, bath_spec, range);
    let n = sub.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            sum += sub[[i, j]].norm_sqr();
            count += 1;
        }
    }
    let _ = mean; // centering shifts only the diagonal
    (sum / count as f64).sqrt()
}

/// The window block ⟨n|A|n'⟩ of an operator in the bath eigenbasis.
pub(crate) fn windowed_matrix(
    a: &HermitianOperator,
    bath_spec: &SpectralDecomposition,
    range: std::ops::Range<usize>,
) -> CMat {
    let cols = bath_spec.vectors.slice(ndarray::s![.., range.clone()]);
    let av = lapack::mat_mul(a.entries().view(), cols.view());
    lapack::adjoint_mul(cols.to_owned().view(), av.view())
}

/// Helpers for building qubit operators from Pauli coefficients.
pub fn pauli_operator(coeff_i: f64, coeff_x: f64, coeff_y: f64, coeff_z: f64) -> HermitianOperator {
    let m = ndarray::array![
        [c64(coeff_i + coeff_z, 0.0), c64(coeff_x, -coeff_y)],
        [c64(coeff_x, coeff_y), c64(coeff_i - coeff_z, 0.0)],
    ];
    HermitianOperator::new(m).expect("Pauli combination is Hermitian")
}
