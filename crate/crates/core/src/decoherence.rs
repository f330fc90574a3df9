//! Quantitative decoherence predictions and their estimators: the V
//! operator and its matrix-element statistics, the perturbative border
//! ε_p, the Gaussian coherence-decay law and its rate R_d, the
//! golden-rule transition rate R_E, and fits of both rates from
//! simulated time series.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{eig_hermitian, HermitianOperator, SpectralDecomposition};
use crate::model::{windowed_matrix, TotalModel, WindowSpec};

/// Minimum window size for matrix-element statistics.
pub const MIN_STATS_WINDOW: usize = 16;

/// Predicted and fitted rates for one (α, β) level pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub alpha: usize,
    pub beta: usize,
    pub epsilon: f64,
    /// std of the diagonal elements ⟨n|V|n⟩ over the window
    pub sigma_v: f64,
    /// mean |⟨n|V|n'⟩|² over ordered pairs n ≠ n' in the window
    pub vnd_sq_mean: f64,
    /// mean level spacing of H^eff inside the window
    pub delta_mls: f64,
    pub epsilon_p: f64,
    pub r_d_predicted: f64,
    pub r_d_fitted: Option<f64>,
    pub fit_quality: Option<f64>,
    pub r_e_predicted: f64,
    pub r_e_fitted: Option<f64>,
    /// density of states of H_0 around the initial mean energy
    pub rho_e: f64,
    /// mean square non-diagonal element of H_1
    pub h1nd_sq_mean: f64,
}

/// Diagonal matrix-element statistics of V in the H^eff eigenbasis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatrixElementStats {
    pub sigma_v: f64,
    pub vnd_sq_mean: f64,
    pub delta_mls: f64,
}

/// The bath-space operator V = ⟨β|H_1|β⟩ − ⟨α|H_1|α⟩ for a product-form
/// perturbation, together with the system coupling difference
/// ⟨β|H_I^S|β⟩ − ⟨α|H_I^S|α⟩ that scales it.
#[derive(Debug, Clone)]
pub struct VOperator {
    pub operator: HermitianOperator,
    pub coupling_diff: f64,
    /// true when the coupling difference vanishes (V ≡ 0)
    pub degenerate_coupling: bool,
}

/// Build V for system levels α ≠ β of the frozen basis (eigenbasis of
/// H_S^r(t0)).
pub fn build_v_operator(
    model: &TotalModel,
    basis: &SpectralDecomposition,
    alpha: usize,
    beta: usize,
) -> Result<VOperator> {
    if alpha == beta {
        return Err(Error::Config(format!(
            "V operator needs two distinct levels, got alpha = beta = {alpha}"
        )));
    }
    let n = model.dim_s();
    if alpha >= n || beta >= n {
        return Err(Error::Config(format!(
            "level index out of range: alpha={alpha}, beta={beta}, dim_s={n}"
        )));
    }
    let ca = system_diagonal_coupling(model, basis, alpha);
    let cb = system_diagonal_coupling(model, basis, beta);
    let diff = cb - ca;
    let degenerate = diff.abs() < 1e-14;
    Ok(VOperator {
        operator: model.centered_bath_factor().scale(diff),
        coupling_diff: diff,
        degenerate_coupling: degenerate,
    })
}

/// ⟨α|H_I^S|α⟩ in the supplied system eigenbasis.
pub fn system_diagonal_coupling(
    model: &TotalModel,
    basis: &SpectralDecomposition,
    alpha: usize,
) -> f64 {
    let col = basis.vectors.column(alpha);
    let h = model.h_is().entries();
    let mut s = 0.0;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            s += (col[i].conj() * h[[i, j]] * col[j]).re;
        }
    }
    s
}

/// ⟨α'|H_I^S|α⟩ in the supplied system eigenbasis.
pub fn system_offdiag_coupling(
    model: &TotalModel,
    basis: &SpectralDecomposition,
    alpha_p: usize,
    alpha: usize,
) -> num_complex::Complex64 {
    let ca = basis.vectors.column(alpha);
    let cb = basis.vectors.column(alpha_p);
    let h = model.h_is().entries();
    let mut s = num_complex::Complex64::new(0.0, 0.0);
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            s += cb[i].conj() * h[[i, j]] * ca[j];
        }
    }
    s
}

/// H^eff_{Eα} = H_{E2} + ε·⟨α|H_I^S|α⟩·(H_I^{E2} − ⟨H_I^{E2}⟩·I)
pub fn h_eff_bath(
    model: &TotalModel,
    epsilon: f64,
    basis: &SpectralDecomposition,
    alpha: usize,
) -> Result<HermitianOperator> {
    let c = system_diagonal_coupling(model, basis, alpha);
    model
        .h_e2()
        .add(&model.centered_bath_factor().scale(epsilon * c))
}

/// σ_v, V̄²_nd and the mean level spacing Δ of `h_eff`, all restricted to
/// the window of `h_eff` eigenstates.
pub fn matrix_element_stats(
    v: &HermitianOperator,
    h_eff: &HermitianOperator,
    window: &WindowSpec,
) -> Result<MatrixElementStats> {
    let spec = eig_hermitian(h_eff)?;
    let range = window.resolve(&spec)?;
    if range.len() < MIN_STATS_WINDOW {
        return Err(Error::WindowTooSmall { got: range.len(), need: MIN_STATS_WINDOW });
    }
    let sub = windowed_matrix(v, &spec, range.clone());
    let n_w = range.len();

    let diag: Vec<f64> = (0..n_w).map(|i| sub[[i, i]].re).collect();
    let mean = diag.iter().sum::<f64>() / n_w as f64;
    let var = diag.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n_w as f64;

    let mut off_sum = 0.0;
    let mut off_count = 0usize;
    for i in 0..n_w {
        for j in 0..n_w {
            if i != j {
                off_sum += sub[[i, j]].norm_sqr();
                off_count += 1;
            }
        }
    }

    let e_min = spec.values[range.start];
    let e_max = spec.values[range.end - 1];
    let delta_mls = (e_max - e_min) / (n_w - 1) as f64;

    Ok(MatrixElementStats {
        sigma_v: var.sqrt(),
        vnd_sq_mean: off_sum / off_count as f64,
        delta_mls,
    })
}

/// ε_p = σ_v·Δ/(2π·V̄²_nd), reading the border relation as an equality.
pub fn perturbative_border(sigma_v: f64, delta_mls: f64, vnd_sq_mean: f64) -> f64 {
    if vnd_sq_mean == 0.0 {
        if sigma_v == 0.0 {
            return 0.0;
        }
        return f64::INFINITY;
    }
    sigma_v * delta_mls / (2.0 * PI * vnd_sq_mean)
}

/// |ρ_{αβ}(t)|/|ρ_{αβ}(0)| in the weak-perturbation Gaussian regime:
/// exp(−ε²σ_v²t²/2).
pub fn predict_gaussian_decay(epsilon: f64, sigma_v: f64, t: f64) -> f64 {
    (-(epsilon * epsilon) * (sigma_v * sigma_v) * t * t / 2.0).exp()
}

/// R_d = ε·σ_v/√2
pub fn predict_decoherence_rate(epsilon: f64, sigma_v: f64) -> f64 {
    epsilon * sigma_v / std::f64::consts::SQRT_2
}

/// R_E = 2π·ε²·ρ_E·⟨H²_{1,nd}⟩
pub fn predict_fgr_rate(epsilon: f64, rho_e: f64, h1nd_sq_mean: f64) -> f64 {
    2.0 * PI * epsilon * epsilon * rho_e * h1nd_sq_mean
}

/// Density of states of H_0 = H_S^r(t0)⊗I + I⊗H_{E2} over the populated
/// product levels, counted in an energy window of `width_frac` of the
/// populated spread centered at `mean_energy`.
pub fn density_of_states(
    model: &TotalModel,
    basis: &SpectralDecomposition,
    mean_energy: f64,
    width_frac: f64,
) -> Result<f64> {
    let range = model.window_range();
    let bath = model.bath_spectrum();
    let mut levels: Vec<f64> = Vec::with_capacity(model.dim_s() * range.len());
    for &e_alpha in basis.values.iter() {
        for n in range.clone() {
            levels.push(e_alpha + bath.values[n]);
        }
    }
    let lo = levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if !(spread > 0.0) {
        return Err(Error::Numerical("populated spectrum has zero spread".into()));
    }
    let width = width_frac * spread;
    let count = levels
        .iter()
        .filter(|&&e| (e - mean_energy).abs() <= width / 2.0)
        .count();
    if count == 0 {
        return Err(Error::Numerical(format!(
            "no H_0 levels within the {width_frac} window around {mean_energy}"
        )));
    }
    Ok(count as f64 / width)
}

/// ⟨H²_{1,nd}⟩: mean square of ⟨α'|⟨μ'|H_1|μ⟩|α⟩ over α ≠ α' with bath
/// eigenstates |μ⟩ restricted to the window. For the product form
/// H_1 = H_I^S ⊗ B the mean factorizes.
pub fn h1nd_sq_mean(model: &TotalModel, basis: &SpectralDecomposition) -> Result<f64> {
    let n_s = model.dim_s();
    if n_s < 2 {
        return Err(Error::Config("need at least two system levels".into()));
    }
    let mut sys_sum = 0.0;
    let mut sys_count = 0usize;
    for a in 0..n_s {
        for b in 0..n_s {
            if a != b {
                sys_sum += system_offdiag_coupling(model, basis, b, a).norm_sqr();
                sys_count += 1;
            }
        }
    }
    let range = model.window_range();
    let sub = windowed_matrix(&model.centered_bath_factor(), model.bath_spectrum(), range);
    let n_w = sub.nrows();
    let mut bath_sum = 0.0;
    for i in 0..n_w {
        for j in 0..n_w {
            bath_sum += sub[[i, j]].norm_sqr();
        }
    }
    Ok((sys_sum / sys_count as f64) * (bath_sum / (n_w * n_w) as f64))
}

/// Result of a Gaussian coherence-decay fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianDecayFit {
    pub rate: f64,
    /// coefficient of determination of ln|ρ(t)/ρ(0)| against −R²t²
    pub quality: f64,
}

/// Fraction of the initial magnitude defining the decay-fit window.
pub const DEFAULT_DECAY_FLOOR: f64 = 0.2;

/// Least-squares fit of ln|ρ(t)/ρ(0)| = −R²t² over the window where the
/// magnitude stays at or above `floor`·initial.
pub fn fit_gaussian_decay(
    times: &[f64],
    magnitudes: &[f64],
    floor: f64,
) -> Result<GaussianDecayFit> {
    if times.len() != magnitudes.len() || times.len() < 2 {
        return Err(Error::Config("decay fit needs matching, non-trivial series".into()));
    }
    let m0 = magnitudes[0];
    if !(m0 > 0.0) {
        return Err(Error::Config("decay fit needs a positive initial magnitude".into()));
    }
    let min_mag = magnitudes.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_mag > 0.9 * m0 {
        return Err(Error::InsufficientDecay { floor: 0.9 });
    }
    // contiguous early window: stop at the first drop below the floor
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &m) in times.iter().zip(magnitudes.iter()) {
        if m < floor * m0 || m <= 0.0 {
            break;
        }
        xs.push(t * t);
        ys.push((m / m0).ln());
    }
    if xs.len() < 10 {
        return Err(Error::Config(format!(
            "decay fit window has {} points, need at least 10",
            xs.len()
        )));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate decay-fit abscissa".into()));
    }
    let slope = sxy / sxx; // y = slope·x, slope = −R²
    let rate = (-slope).max(0.0).sqrt();
    let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (y - slope * x).powi(2))
        .sum();
    let quality = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(GaussianDecayFit { rate, quality })
}

/// Outcome of an early-window transition-rate fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum TransitionRateFit {
    /// least-squares slope of the depletion 1 − p(t)
    Rate(f64),
    /// depletion stayed below the noise floor; the value bounds the rate
    UpperBound(f64),
}

impl TransitionRateFit {
    pub fn value(&self) -> f64 {
        match self {
            TransitionRateFit::Rate(r) | TransitionRateFit::UpperBound(r) => *r,
        }
    }

    pub fn is_upper_bound(&self) -> bool {
        matches!(self, TransitionRateFit::UpperBound(_))
    }
}

/// Maximum depletion included in the early-window transition fit.
pub const DEFAULT_DEPLETION_CAP: f64 = 0.2;

/// Depletion below which no rate is claimed, only an upper bound.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-6;

/// Linear fit of the depletion 1 − p_α(t) over the early window where the
/// depletion stays at or below `cap`.
pub fn fit_transition_rate(
    times: &[f64],
    population: &[f64],
    cap: f64,
    noise_floor: f64,
) -> Result<TransitionRateFit> {
    if times.len() != population.len() || times.len() < 3 {
        return Err(Error::Config("transition fit needs matching, non-trivial series".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &p) in times.iter().zip(population.iter()) {
        let depletion = 1.0 - p;
        if depletion > cap {
            break;
        }
        xs.push(t);
        ys.push(depletion);
    }
    let max_depletion = ys.iter().cloned().fold(0.0f64, f64::max);
    let span = xs.last().copied().unwrap_or(0.0) - xs.first().copied().unwrap_or(0.0);
    if max_depletion < noise_floor {
        let bound = if span > 0.0 { noise_floor / span } else { f64::INFINITY };
        return Ok(TransitionRateFit::UpperBound(bound));
    }
    if xs.len() < 3 {
        return Err(Error::Config("transition fit window too short".into()));
    }
    // ordinary least squares with intercept; the slope is the rate
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate transition-fit abscissa".into()));
    }
    Ok(TransitionRateFit::Rate(sxy / sxx))
}
