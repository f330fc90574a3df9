//! Experiment orchestration: the decay, scaling, border and work runs,
//! the full suite, and the synthetic self-test replays.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoherence::{
    build_v_operator, density_of_states, fit_gaussian_decay, fit_transition_rate, h1nd_sq_mean,
    h_eff_bath, matrix_element_stats, perturbative_border, predict_decoherence_rate,
    predict_fgr_rate, predict_gaussian_decay, MatrixElementStats, RateReport,
};
use crate::error::{Error, Result};
use crate::hilbert::{c64, eig_hermitian, CMat, SpectralDecomposition, StateVector};
use crate::lapack;
use crate::model::{Protocol, TotalModel};
use crate::propagation::{coherence_norm, instantaneous_basis_at, Propagator, TimeGrid};
use crate::work::{gibbs_populations, jarzynski_check, tpm_work_distribution, WorkRecord};

use super::config::ExperimentConfig;
use super::output::{fmt_num, write_csv, write_json, write_svg, RunManifest, Series};

/// Per-invocation overrides layered over the configuration file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub svg: Option<bool>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), seed: None, workers: 1, svg: None }
    }
}

/// Files written by a run, in creation order.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn effective_seed(cfg: &ExperimentConfig, opts: &RunOptions) -> u64 {
    opts.seed.unwrap_or(cfg.sweep.seeds[0])
}

fn want_svg(cfg: &ExperimentConfig, opts: &RunOptions) -> bool {
    opts.svg.unwrap_or(cfg.output.svg)
}

/// Frozen-split analysis shared by the decay, border and scaling runs.
struct FrozenAnalysis {
    basis0: SpectralDecomposition,
    stats: MatrixElementStats,
    epsilon_p: f64,
    r_d_predicted: f64,
    r_e_predicted: f64,
    rho_e: f64,
    h1nd: f64,
}

fn analyze_frozen(
    cfg: &ExperimentConfig,
    model: &TotalModel,
    epsilon: f64,
    pair: [usize; 2],
) -> Result<FrozenAnalysis> {
    let basis0 = eig_hermitian(&model.h_s_renormalized(0.0)?)?;
    let v = build_v_operator(model, &basis0, pair[0], pair[1])?;
    let h_eff = h_eff_bath(model, epsilon, &basis0, pair[0])?;
    let stats = matrix_element_stats(&v.operator, &h_eff, model.window())?;
    let epsilon_p = perturbative_border(stats.sigma_v, stats.delta_mls, stats.vnd_sq_mean);
    let range = model.window_range();
    let bath_mean = model
        .bath_spectrum()
        .values
        .iter()
        .skip(range.start)
        .take(range.len())
        .sum::<f64>()
        / range.len() as f64;
    let mean_energy = basis0.values[pair[0]] + bath_mean;
    let rho_e = density_of_states(model, &basis0, mean_energy, cfg.numerics.dos_width_frac)?;
    let h1nd = h1nd_sq_mean(model, &basis0)?;
    Ok(FrozenAnalysis {
        r_d_predicted: predict_decoherence_rate(epsilon, stats.sigma_v),
        r_e_predicted: predict_fgr_rate(epsilon, rho_e, h1nd),
        basis0,
        stats,
        epsilon_p,
        rho_e,
        h1nd,
    })
}

/// Resolve the sweep's ε values shared by all seeds. Relative values are
/// scaled by ε_p of the uncoupled effective bath (ε → 0 reference),
/// averaged over the supplied seeds so every seed sees the same sweep.
fn resolve_epsilons(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<f64>> {
    if !cfg.sweep.epsilon.is_empty() {
        return Ok(cfg.sweep.epsilon.clone());
    }
    let rels = if cfg.sweep.epsilon_rel.is_empty() {
        vec![0.5]
    } else {
        cfg.sweep.epsilon_rel.clone()
    };
    let mut eps_p_sum = 0.0;
    for &seed in seeds {
        let model = cfg.build_frozen_model(seed, 0.0, 1.0)?;
        let analysis = analyze_frozen(cfg, &model, 0.0, cfg.model.level_pair)?;
        if !analysis.epsilon_p.is_finite() || analysis.epsilon_p <= 0.0 {
            return Err(Error::Numerical(format!(
                "cannot resolve relative sweep: epsilon_p = {} (seed {seed})",
                analysis.epsilon_p
            )));
        }
        eps_p_sum += analysis.epsilon_p;
    }
    let eps_p = eps_p_sum / seeds.len() as f64;
    Ok(rels.iter().map(|r| r * eps_p).collect())
}

/// ρ^S(t) expressed in a fixed system basis.
fn rdm_in_fixed_basis(rdm: &crate::hilbert::DensityMatrix, basis: &CMat) -> CMat {
    let tmp = lapack::mat_mul(rdm.entries().view(), basis.view());
    lapack::adjoint_mul(basis.view(), tmp.view())
}

struct FrozenRun {
    times: Vec<f64>,
    coherence_abs: Vec<f64>,
    population_alpha: Vec<f64>,
}

/// Evolve the (|α⟩+|β⟩)/√2 superposition and the |α⟩ level through the
/// frozen Hamiltonian at coupling ε, recording the frozen-basis coherence
/// and the α population.
fn frozen_run(
    cfg: &ExperimentConfig,
    model: &TotalModel,
    analysis: &FrozenAnalysis,
    seed: u64,
    t_end: f64,
) -> Result<FrozenRun> {
    let pair = cfg.model.level_pair;
    let model = model.with_protocol(Protocol::constant(0.0, t_end, model.lambda(0.0)?)?);
    let bath = model.bath_window_state(seed)?;
    let col_a = analysis.basis0.vectors.column(pair[0]).to_owned();
    let col_b = analysis.basis0.vectors.column(pair[1]).to_owned();
    let sup = StateVector::normalized(
        (&col_a + &col_b).mapv(|z| z * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0)),
    )?;
    let level = StateVector::normalized(col_a)?;
    // constant λ: eigenbasis stepping is exact at any dt, so the grid only
    // needs to place the samples
    let grid = TimeGrid::auto(0.0, t_end, 0.0, cfg.numerics.target_samples)?;
    let trajs = Propagator::new(&model)
        .with_dlambda_max(cfg.numerics.dlambda_max)
        .evolve_many(&[sup.tensor(&bath), level.tensor(&bath)], &grid)?;
    let mut coherence_abs = Vec::with_capacity(trajs[0].times.len());
    let mut population_alpha = Vec::with_capacity(trajs[0].times.len());
    for i in 0..trajs[0].times.len() {
        let coh = rdm_in_fixed_basis(&trajs[0].rdms[i], &analysis.basis0.vectors);
        coherence_abs.push(coh[[pair[0], pair[1]]].norm());
        let pop = rdm_in_fixed_basis(&trajs[1].rdms[i], &analysis.basis0.vectors);
        population_alpha.push(pop[[pair[0], pair[0]]].re);
    }
    Ok(FrozenRun { times: trajs[0].times.clone(), coherence_abs, population_alpha })
}

fn decay_t_end(cfg: &ExperimentConfig, r_d_predicted: f64) -> Result<f64> {
    if !(r_d_predicted > 0.0) {
        return Err(Error::Numerical(format!(
            "predicted decoherence rate {r_d_predicted} admits no decay window"
        )));
    }
    Ok((cfg.numerics.decay_time_factor / r_d_predicted).min(cfg.numerics.max_run_time))
}

/// Observation time for the transition fit: long enough to reach the
/// target depletion at the predicted rate, but capped at the Heisenberg
/// time 2πρ_E of the populated spectrum, past which the discrete bath
/// saturates and no golden-rule rate is visible.
fn transition_t_end(cfg: &ExperimentConfig, r_e_predicted: f64, rho_e: f64) -> f64 {
    let heisenberg = cfg.numerics.heisenberg_factor * 2.0 * std::f64::consts::PI * rho_e;
    let wanted = if r_e_predicted > 0.0 {
        cfg.numerics.depletion_target / r_e_predicted
    } else {
        f64::INFINITY
    };
    wanted.min(heisenberg).min(cfg.numerics.max_run_time)
}

fn build_rate_report(
    cfg: &ExperimentConfig,
    epsilon: f64,
    analysis: &FrozenAnalysis,
    run: &FrozenRun,
) -> RateReport {
    let pair = cfg.model.level_pair;
    let fit = fit_gaussian_decay(&run.times, &run.coherence_abs, cfg.numerics.decay_floor).ok();
    let r_e = fit_transition_rate(
        &run.times,
        &run.population_alpha,
        cfg.numerics.depletion_cap,
        crate::decoherence::DEFAULT_NOISE_FLOOR,
    )
    .ok();
    RateReport {
        alpha: pair[0],
        beta: pair[1],
        epsilon,
        sigma_v: analysis.stats.sigma_v,
        vnd_sq_mean: analysis.stats.vnd_sq_mean,
        delta_mls: analysis.stats.delta_mls,
        epsilon_p: analysis.epsilon_p,
        r_d_predicted: analysis.r_d_predicted,
        r_d_fitted: fit.map(|f| f.rate),
        fit_quality: fit.map(|f| f.quality),
        r_e_predicted: analysis.r_e_predicted,
        r_e_fitted: r_e.map(|f| f.value()),
        rho_e: analysis.rho_e,
        h1nd_sq_mean: analysis.h1nd,
    }
}

/// Fixed-λ coherence decay: time series, Gaussian fit, rate report.
pub fn run_decay(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(RateReport, RunArtifacts)> {
    ensure_dir(&opts.out_dir)?;
    let seed = effective_seed(cfg, opts);
    let epsilon = resolve_epsilons(cfg, &[seed])?[0];
    let model = cfg.build_frozen_model(seed, epsilon, 1.0)?;
    let analysis = analyze_frozen(cfg, &model, epsilon, cfg.model.level_pair)?;
    let t_end = decay_t_end(cfg, analysis.r_d_predicted)?;
    let run = frozen_run(cfg, &model, &analysis, seed, t_end)?;
    let report = build_rate_report(cfg, epsilon, &analysis, &run);

    let mut manifest = RunManifest::new(cfg.hash(), seed);
    let c0 = run.coherence_abs[0];
    let rows: Vec<Vec<String>> = run
        .times
        .iter()
        .zip(run.coherence_abs.iter())
        .zip(run.population_alpha.iter())
        .map(|((&t, &c), &p)| {
            vec![
                fmt_num(t),
                fmt_num(c),
                fmt_num(c / c0),
                fmt_num(predict_gaussian_decay(epsilon, analysis.stats.sigma_v, t)),
                fmt_num(p),
            ]
        })
        .collect();
    let csv = opts.out_dir.join("decay.csv");
    write_csv(
        &csv,
        &["time", "coherence_abs", "coherence_rel", "predicted_rel", "population_alpha"],
        &rows,
    )?;
    manifest.record(&csv)?;
    let json = opts.out_dir.join("rates.json");
    write_json(&json, &report)?;
    manifest.record(&json)?;
    let mut files = vec![csv, json];
    if want_svg(cfg, opts) {
        let svg = opts.out_dir.join("decay.svg");
        let rel: Vec<f64> = run.coherence_abs.iter().map(|c| c / c0).collect();
        let pred: Vec<f64> = run
            .times
            .iter()
            .map(|&t| predict_gaussian_decay(epsilon, analysis.stats.sigma_v, t))
            .collect();
        write_svg(
            &svg,
            "coherence decay",
            "t",
            "|rho_ab(t)| / |rho_ab(0)|",
            &run.times,
            &[Series { label: "measured", ys: &rel }, Series { label: "predicted", ys: &pred }],
        )?;
        manifest.record(&svg)?;
        files.push(svg);
    }
    files.push(manifest.write(&opts.out_dir)?);
    Ok((report, RunArtifacts { files }))
}

/// One row of the ε_p border table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BorderRow {
    pub alpha: usize,
    pub beta: usize,
    pub epsilon: f64,
    pub sigma_v: f64,
    pub vnd_sq_mean: f64,
    pub delta_mls: f64,
    pub epsilon_p: f64,
}

/// Perturbative-border table over all system level pairs.
pub fn run_border(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(Vec<BorderRow>, RunArtifacts)> {
    ensure_dir(&opts.out_dir)?;
    let seed = effective_seed(cfg, opts);
    let epsilon = resolve_epsilons(cfg, &[seed])?[0];
    let model = cfg.build_frozen_model(seed, epsilon, 1.0)?;
    let dim_s = model.dim_s();
    let mut rows = Vec::new();
    for a in 0..dim_s {
        for b in (a + 1)..dim_s {
            let analysis = analyze_frozen(cfg, &model, epsilon, [a, b])?;
            rows.push(BorderRow {
                alpha: a,
                beta: b,
                epsilon,
                sigma_v: analysis.stats.sigma_v,
                vnd_sq_mean: analysis.stats.vnd_sq_mean,
                delta_mls: analysis.stats.delta_mls,
                epsilon_p: analysis.epsilon_p,
            });
        }
    }
    let mut manifest = RunManifest::new(cfg.hash(), seed);
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.alpha.to_string(),
                r.beta.to_string(),
                fmt_num(r.epsilon),
                fmt_num(r.sigma_v),
                fmt_num(r.vnd_sq_mean),
                fmt_num(r.delta_mls),
                fmt_num(r.epsilon_p),
            ]
        })
        .collect();
    let csv = opts.out_dir.join("border.csv");
    write_csv(
        &csv,
        &["alpha", "beta", "epsilon", "sigma_v", "vnd_sq_mean", "delta_mls", "epsilon_p"],
        &csv_rows,
    )?;
    manifest.record(&csv)?;
    let json = opts.out_dir.join("border.json");
    write_json(&json, &rows)?;
    manifest.record(&json)?;
    let mut files = vec![csv, json];
    files.push(manifest.write(&opts.out_dir)?);
    Ok((rows, RunArtifacts { files }))
}

/// One sweep point of the scaling run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub epsilon: f64,
    pub seed: u64,
    pub epsilon_p: f64,
    pub r_d_fitted: f64,
    pub r_d_predicted: f64,
    pub fit_quality: f64,
    pub r_e_fitted: f64,
    pub r_e_upper_bound: bool,
    pub r_e_predicted: f64,
    pub flagged: bool,
}

/// Seed-averaged rates at one ε.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingAggregate {
    pub epsilon: f64,
    pub r_d_mean: f64,
    pub r_e_mean: f64,
    pub ratio: f64,
}

/// Log-log slope with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub aggregates: Vec<ScalingAggregate>,
    pub r_d_regression: Option<SlopeEstimate>,
    pub r_e_regression: Option<SlopeEstimate>,
    pub warnings: Vec<String>,
}

/// OLS of ln y on ln x; the half-width is 1.96 standard errors (0 when
/// only two points leave no residual degrees of freedom).
pub fn loglog_regression(xs: &[f64], ys: &[f64]) -> Option<SlopeEstimate> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(ly.iter())
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ci95 = if lx.len() > 2 {
        1.96 * (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(SlopeEstimate { slope, ci95 })
}

fn scaling_point(
    cfg: &ExperimentConfig,
    epsilon: f64,
    seed: u64,
) -> Result<ScalingPoint> {
    let model = cfg.build_frozen_model(seed, epsilon, 1.0)?;
    let analysis = analyze_frozen(cfg, &model, epsilon, cfg.model.level_pair)?;
    let t_decay = decay_t_end(cfg, analysis.r_d_predicted)?;
    let decay = frozen_run(cfg, &model, &analysis, seed, t_decay)?;
    let decay_fit =
        fit_gaussian_decay(&decay.times, &decay.coherence_abs, cfg.numerics.decay_floor)?;
    let t_trans = transition_t_end(cfg, analysis.r_e_predicted, analysis.rho_e);
    let trans = frozen_run(cfg, &model, &analysis, seed, t_trans)?;
    let trans_fit = fit_transition_rate(
        &trans.times,
        &trans.population_alpha,
        cfg.numerics.depletion_cap,
        crate::decoherence::DEFAULT_NOISE_FLOOR,
    )?;
    Ok(ScalingPoint {
        epsilon,
        seed,
        epsilon_p: analysis.epsilon_p,
        r_d_fitted: decay_fit.rate,
        r_d_predicted: analysis.r_d_predicted,
        fit_quality: decay_fit.quality,
        r_e_fitted: trans_fit.value(),
        r_e_upper_bound: trans_fit.is_upper_bound(),
        r_e_predicted: analysis.r_e_predicted,
        flagged: epsilon >= analysis.epsilon_p,
    })
}

/// ε sweep: fitted R_d and R_E per (ε, seed), seed-averaged aggregates,
/// and log-log regression slopes when the sweep supports them.
pub fn run_scaling(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<(ScalingReport, RunArtifacts)> {
    ensure_dir(&opts.out_dir)?;
    let seeds: Vec<u64> = match opts.seed {
        Some(s) => vec![s],
        None => cfg.sweep.seeds.clone(),
    };
    let epsilons = resolve_epsilons(cfg, &seeds)?;
    let mut jobs: Vec<(f64, u64)> = Vec::new();
    for &seed in &seeds {
        for &eps in &epsilons {
            jobs.push((eps, seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut points: Vec<ScalingPoint> = pool.install(|| {
        jobs.par_iter()
            .map(|&(eps, seed)| scaling_point(cfg, eps, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    // deterministic ordering regardless of completion order
    points.sort_by(|a, b| {
        a.epsilon
            .partial_cmp(&b.epsilon)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
    });

    let mut warnings = Vec::new();
    for p in &points {
        if p.flagged {
            warnings.push(format!(
                "epsilon {:.6e} is at or above the perturbative border {:.6e} (seed {})",
                p.epsilon, p.epsilon_p, p.seed
            ));
        }
        if p.r_e_upper_bound {
            warnings.push(format!(
                "transition rate at epsilon {:.6e} (seed {}) is an upper bound only",
                p.epsilon, p.seed
            ));
        }
    }

    // seed averages per distinct ε, ascending
    let mut eps_values: Vec<f64> = Vec::new();
    for p in &points {
        if !eps_values.iter().any(|&e| (e - p.epsilon).abs() < 1e-15) {
            eps_values.push(p.epsilon);
        }
    }
    let aggregates: Vec<ScalingAggregate> = eps_values
        .iter()
        .map(|&eps| {
            let group: Vec<&ScalingPoint> = points
                .iter()
                .filter(|p| (p.epsilon - eps).abs() < 1e-15)
                .collect();
            let n = group.len() as f64;
            let r_d = group.iter().map(|p| p.r_d_fitted).sum::<f64>() / n;
            let r_e = group.iter().map(|p| p.r_e_fitted).sum::<f64>() / n;
            ScalingAggregate { epsilon: eps, r_d_mean: r_d, r_e_mean: r_e, ratio: r_d / r_e }
        })
        .collect();

    let (r_d_regression, r_e_regression) = if aggregates.len() >= 2 {
        let xs: Vec<f64> = aggregates.iter().map(|a| a.epsilon).collect();
        let rd: Vec<f64> = aggregates.iter().map(|a| a.r_d_mean).collect();
        let re: Vec<f64> = aggregates.iter().map(|a| a.r_e_mean).collect();
        (loglog_regression(&xs, &rd), loglog_regression(&xs, &re))
    } else {
        warnings.push("single-point sweep: regression refused, per-point data only".into());
        (None, None)
    };

    let report = ScalingReport { points, aggregates, r_d_regression, r_e_regression, warnings };

    let mut manifest = RunManifest::new(cfg.hash(), effective_seed(cfg, opts));
    let csv_rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                fmt_num(p.epsilon),
                p.seed.to_string(),
                fmt_num(p.epsilon_p),
                fmt_num(p.r_d_fitted),
                fmt_num(p.r_d_predicted),
                fmt_num(p.fit_quality),
                fmt_num(p.r_e_fitted),
                (p.r_e_upper_bound as u8).to_string(),
                fmt_num(p.r_e_predicted),
                (p.flagged as u8).to_string(),
            ]
        })
        .collect();
    let csv = opts.out_dir.join("scaling.csv");
    write_csv(
        &csv,
        &[
            "epsilon",
            "seed",
            "epsilon_p",
            "r_d_fitted",
            "r_d_predicted",
            "fit_quality",
            "r_e_fitted",
            "r_e_upper_bound",
            "r_e_predicted",
            "flagged",
        ],
        &csv_rows,
    )?;
    manifest.record(&csv)?;
    let json = opts.out_dir.join("scaling.json");
    write_json(&json, &report)?;
    manifest.record(&json)?;
    let mut files = vec![csv, json];
    if want_svg(cfg, opts) && report.aggregates.len() >= 2 {
        let svg = opts.out_dir.join("scaling.svg");
        let xs: Vec<f64> = report.aggregates.iter().map(|a| a.epsilon.ln()).collect();
        let rd: Vec<f64> = report.aggregates.iter().map(|a| a.r_d_mean.ln()).collect();
        let re: Vec<f64> = report.aggregates.iter().map(|a| a.r_e_mean.ln()).collect();
        write_svg(
            &svg,
            "rate scaling (log-log)",
            "ln epsilon",
            "ln rate",
            &xs,
            &[Series { label: "R_d", ys: &rd }, Series { label: "R_E", ys: &re }],
        )?;
        manifest.record(&svg)?;
        files.push(svg);
    }
    files.push(manifest.write(&opts.out_dir)?);
    Ok((report, RunArtifacts { files }))
}

/// Work report for one ramp duration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkSweepRow {
    pub ramp_time: f64,
    pub mixture_work: f64,
    pub tpm_mean: f64,
    pub discrepancy: f64,
    pub relative_jarzynski_deviation: f64,
}

/// One ramp simulation: Gibbs-branch TPM ensemble plus a coherent-state
/// reference trajectory, with instantaneous-basis coherence series.
pub struct WorkRun {
    pub times: Vec<f64>,
    pub coherence_gibbs: Vec<f64>,
    pub coherence_coherent: Vec<f64>,
    pub record: WorkRecord,
    /// Energy change of the unmeasured coherent reference state.
    pub coherent_work: f64,
    /// TPM-style mean work for the same state: equal-weight mixture of the
    /// two level branches, so any difference to `coherent_work` is the
    /// surviving interference contribution.
    pub dephased_coherent_work: f64,
}

/// Simulate the configured ramp (optionally rescaled to `ramp_time`) and
/// account for the work both ways.
pub fn work_run(cfg: &ExperimentConfig, seed: u64, ramp_time: Option<f64>) -> Result<WorkRun> {
    let base = cfg.protocol.protocol()?;
    let protocol = match ramp_time {
        Some(t) => Protocol::new(base.t0, base.t0 + t, base.lambda0, base.lambda1, base.shape)?,
        None => base,
    };
    let model = cfg.build_model(seed)?.with_protocol(protocol);
    let t0 = protocol.t0;
    let t1 = protocol.t1;
    let radius = model
        .h_total(t0)?
        .spectral_radius_bound()
        .max(model.h_total(t1)?.spectral_radius_bound());
    let grid = TimeGrid::auto(t0, t1, radius, cfg.numerics.target_samples)?;
    let bath = model.bath_window_state(seed)?;
    let beta = cfg.numerics.beta;
    let tpm = tpm_work_distribution(&model, beta, &bath, &grid, cfg.numerics.dlambda_max)?;

    // coherent reference state: equal superposition of the two analyzed
    // levels of H_S^r(t0)
    let basis0 = eig_hermitian(&model.h_s_renormalized(t0)?)?;
    let pair = cfg.model.level_pair;
    let sup = StateVector::normalized(
        (&basis0.vectors.column(pair[0]).to_owned() + &basis0.vectors.column(pair[1]).to_owned())
            .mapv(|z| z * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0)),
    )?;
    let coherent_traj = Propagator::new(&model)
        .with_dlambda_max(cfg.numerics.dlambda_max)
        .evolve(&sup.tensor(&bath), &grid)?;

    let times = coherent_traj.times.clone();
    let mut coherence_gibbs = Vec::with_capacity(times.len());
    let mut coherence_coherent = Vec::with_capacity(times.len());
    let mut prev_basis: Option<CMat> = None;
    let mut energy0 = 0.0;
    let mut energy1 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let basis = instantaneous_basis_at(&model, t, prev_basis.as_ref())?;
        let mixed = tpm.mixed_rdm(i)?;
        let mixed_b = rdm_in_fixed_basis(&mixed, &basis);
        coherence_gibbs.push(coherence_norm(mixed_b.view()));
        let coh_b = rdm_in_fixed_basis(&coherent_traj.rdms[i], &basis);
        coherence_coherent.push(coherence_norm(coh_b.view()));
        if i == 0 {
            energy0 = mixed.expectation(&model.h_s_renormalized(t)?);
        }
        if i == times.len() - 1 {
            energy1 = mixed.expectation(&model.h_s_renormalized(t)?);
        }
        prev_basis = Some(basis);
    }
    let mixture_work = energy1 - energy0;

    let h0r = model.h_s_renormalized(t0)?;
    let h1r = model.h_s_renormalized(t1)?;
    let last = coherent_traj.rdms.len() - 1;
    let coherent_work =
        coherent_traj.rdms[last].expectation(&h1r) - coherent_traj.rdms[0].expectation(&h0r);
    let mut dephased_coherent_work = 0.0;
    for (k, branch) in tpm.branch_trajectories.iter().enumerate() {
        if k == pair[0] || k == pair[1] {
            dephased_coherent_work += 0.5
                * (branch.rdms[last].expectation(&h1r) - branch.rdms[0].expectation(&h0r));
        }
    }

    let check = jarzynski_check(
        &tpm.distribution,
        beta.max(f64::MIN_POSITIVE),
        &model.h_s_renormalized(t0)?,
        &model.h_s_renormalized(t1)?,
    )?;
    Ok(WorkRun {
        times,
        coherence_gibbs,
        coherence_coherent,
        coherent_work,
        dephased_coherent_work,
        record: WorkRecord {
            mixture_work,
            tpm: tpm.distribution,
            jarzynski_lhs: check.lhs,
            delta_f: check.delta_f,
            relative_jarzynski_deviation: check.relative_deviation,
        },
    })
}

/// Adiabatic work accounting on the configured ramp, plus a ramp-time
/// sweep when the config requests one.
pub fn run_adiabatic_work(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<(WorkRecord, RunArtifacts)> {
    ensure_dir(&opts.out_dir)?;
    let seed = effective_seed(cfg, opts);
    let main = work_run(cfg, seed, None)?;

    let mut manifest = RunManifest::new(cfg.hash(), seed);
    let rows: Vec<Vec<String>> = main
        .times
        .iter()
        .zip(main.coherence_gibbs.iter())
        .zip(main.coherence_coherent.iter())
        .map(|((&t, &g), &c)| vec![fmt_num(t), fmt_num(g), fmt_num(c)])
        .collect();
    let csv = opts.out_dir.join("work.csv");
    write_csv(&csv, &["time", "coherence_norm_gibbs", "coherence_norm_coherent"], &rows)?;
    manifest.record(&csv)?;
    let json = opts.out_dir.join("work.json");
    write_json(&json, &main.record)?;
    manifest.record(&json)?;
    let mut files = vec![csv, json];

    if !cfg.sweep.ramp_times.is_empty() {
        let mut sweep_rows = Vec::new();
        for &t in &cfg.sweep.ramp_times {
            let run = work_run(cfg, seed, Some(t))?;
            sweep_rows.push(WorkSweepRow {
                ramp_time: t,
                mixture_work: run.record.mixture_work,
                tpm_mean: run.record.tpm.mean,
                discrepancy: (run.record.mixture_work - run.record.tpm.mean).abs(),
                relative_jarzynski_deviation: run.record.relative_jarzynski_deviation,
            });
        }
        let csv_rows: Vec<Vec<String>> = sweep_rows
            .iter()
            .map(|r| {
                vec![
                    fmt_num(r.ramp_time),
                    fmt_num(r.mixture_work),
                    fmt_num(r.tpm_mean),
                    fmt_num(r.discrepancy),
                    fmt_num(r.relative_jarzynski_deviation),
                ]
            })
            .collect();
        let sweep_csv = opts.out_dir.join("work_sweep.csv");
        write_csv(
            &sweep_csv,
            &[
                "ramp_time",
                "mixture_work",
                "tpm_mean",
                "discrepancy",
                "relative_jarzynski_deviation",
            ],
            &csv_rows,
        )?;
        manifest.record(&sweep_csv)?;
        files.push(sweep_csv);
    }

    if want_svg(cfg, opts) {
        let svg = opts.out_dir.join("work.svg");
        write_svg(
            &svg,
            "instantaneous-basis coherence",
            "t",
            "off-diagonal norm",
            &main.times,
            &[
                Series { label: "Gibbs initial state", ys: &main.coherence_gibbs },
                Series { label: "coherent initial state", ys: &main.coherence_coherent },
            ],
        )?;
        manifest.record(&svg)?;
        files.push(svg);
    }
    files.push(manifest.write(&opts.out_dir)?);
    Ok((main.record, RunArtifacts { files }))
}

/// All four runs into subdirectories of the output directory.
pub fn run_full_suite(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    let mut files = Vec::new();
    let sub = |name: &str| RunOptions {
        out_dir: opts.out_dir.join(name),
        seed: opts.seed,
        workers: opts.workers,
        svg: opts.svg,
    };
    files.extend(run_border(cfg, &sub("border"))?.1.files);
    files.extend(run_decay(cfg, &sub("decay"))?.1.files);
    files.extend(run_scaling(cfg, &sub("scaling"))?.1.files);
    files.extend(run_adiabatic_work(cfg, &sub("work"))?.1.files);
    Ok(RunArtifacts { files })
}

/// One self-test check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfTestResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Synthetic replays of the analysis pipeline with known answers; no
/// configuration or simulation involved.
pub fn self_test() -> Vec<SelfTestResult> {
    let mut results = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        results.push(SelfTestResult { name: name.into(), passed, detail });
    };

    // Gaussian decay replay
    {
        let rate = 0.05;
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.25).collect();
        let mags: Vec<f64> = times.iter().map(|&t| (-(rate * t).powi(2)).exp()).collect();
        match fit_gaussian_decay(&times, &mags, 0.2) {
            Ok(fit) => {
                let err = (fit.rate - rate).abs();
                push(
                    "gaussian-decay-replay",
                    err < 1e-6 && fit.quality > 0.9999,
                    format!("injected {rate}, fitted {:.9} (|err| = {err:.3e})", fit.rate),
                );
            }
            Err(e) => push("gaussian-decay-replay", false, format!("fit failed: {e}")),
        }
    }

    // power-law slope replays
    for (name, exponent) in [("linear-scaling-replay", 1.0), ("quadratic-scaling-replay", 2.0)] {
        let xs: Vec<f64> = vec![1e-4, 2e-4, 4e-4, 8e-4];
        let ys: Vec<f64> = xs.iter().map(|&x| 0.37 * x.powf(exponent)).collect();
        match loglog_regression(&xs, &ys) {
            Some(est) => {
                let err = (est.slope - exponent).abs();
                push(
                    name,
                    err < 1e-6,
                    format!("injected {exponent}, fitted {:.9} (|err| = {err:.3e})", est.slope),
                );
            }
            None => push(name, false, "regression refused".into()),
        }
    }

    // transition-rate replay
    {
        let rate = 2e-3;
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.05).collect();
        let pops: Vec<f64> = times.iter().map(|&t| 1.0 - rate * t).collect();
        match fit_transition_rate(&times, &pops, 0.2, 1e-9) {
            Ok(fit) => {
                let err = (fit.value() - rate).abs();
                push(
                    "transition-rate-replay",
                    err < 1e-9 && !fit.is_upper_bound(),
                    format!("injected {rate}, fitted {:.9e}", fit.value()),
                );
            }
            Err(e) => push("transition-rate-replay", false, format!("fit failed: {e}")),
        }
    }

    // Jarzynski identity on an analytic two-level protocol
    {
        let h0 = crate::model::pauli_operator(0.0, 0.0, 0.0, 0.5);
        let h1 = h0.shift(0.25);
        let beta = 1.5;
        let spec0 = eig_hermitian(&h0).expect("2x2 eigensolve");
        let probs = gibbs_populations(&spec0.values, beta);
        let dist = crate::work::WorkDistribution::from_pairs(
            probs.iter().map(|&p| (0.25, p)).collect(),
        )
        .expect("valid distribution");
        match jarzynski_check(&dist, beta, &h0, &h1) {
            Ok(check) => push(
                "jarzynski-identity-replay",
                check.relative_deviation < 1e-12,
                format!("relative deviation {:.3e}", check.relative_deviation),
            ),
            Err(e) => push("jarzynski-identity-replay", false, format!("check failed: {e}")),
        }
    }

    results
}
