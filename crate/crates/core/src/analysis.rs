//! Numerical diagnostics built on top of the risk machinery: the risk-gap
//! function between a rule and the sample-average rule, moment estimates of
//! that gap at the origin (the `E` vector and `G` matrix), Hessian-trace and
//! finite-difference curvature checks, the Bayes-prior numerator/denominator
//! scan with its fitted decay slope, and the consistency-rate fit.
//!
//! Conventions:
//!
//! * All moment quantities are plain expectations under the sampling
//!   distribution of the sample mean (density constants are not carried
//!   around; every conclusion drawn from them is invariant to positive
//!   scaling).
//! * The gap moments compare a rule against the linear sample-average rule
//!   `eta*(y) = argmin_x y^T x`, which is the exact minimizer at every mean,
//!   so `y^T (eta(y) - eta*(y)) >= 0` pointwise for any rule `eta`.
//! * Slope fits are ordinary least squares on log-log points over half of the
//!   grid: the large-`tau` half for prior scans (small `tau` is transient),
//!   and the small-`n` half for consistency fits, where the square-root
//!   sampling regime lives before boundary effects take over.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::geometry::{FeasibleRegion, GeometryError};
use crate::risk::{
    estimate_risk_with, mean_and_se, ObjectiveKind, RiskError, RiskEstimate,
};
use crate::rules::{DecisionRule, RuleError};
use crate::stochastics::{
    draw_gaussian, draw_samples, marginal_of_mean, GaussianModel, Sample, StochasticsError,
    StreamFactory,
};

/// Draw count for the Monte Carlo fallback of the prior-mass denominator.
const DENOMINATOR_MC_DRAWS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("estimate must be positive for a log-log fit, got {0}")]
    NonPositiveEstimate(f64),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stochastics(#[from] StochasticsError),
}

/// A scalar Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Paired estimate of the risk gap `R(mu, rule) - R(mu, sample-average)` at
/// the state of `model`, with the sample-average rule matching `kind`.
///
/// Both rules see identical samples in every replication. For the linear
/// objective at `mu = 0` every loss term vanishes identically, so the gap is
/// exactly zero with zero standard error.
pub fn f_value(
    rule: &DecisionRule,
    kind: ObjectiveKind,
    model: &GaussianModel,
    region: &FeasibleRegion,
    replications: u64,
    seed: u64,
) -> Result<Estimate, AnalysisError> {
    let factory = StreamFactory::new(seed).labeled("f-value");
    f_value_with(rule, kind, model, region, replications, &factory)
}

fn f_value_with(
    rule: &DecisionRule,
    kind: ObjectiveKind,
    model: &GaussianModel,
    region: &FeasibleRegion,
    replications: u64,
    factory: &StreamFactory,
) -> Result<Estimate, AnalysisError> {
    if replications < 2 {
        return Err(AnalysisError::InvalidInput(
            "risk-gap estimation needs at least 2 replications".into(),
        ));
    }
    let reference = match kind {
        ObjectiveKind::Linear => DecisionRule::SampleAverageLinear,
        ObjectiveKind::Quadratic => DecisionRule::SampleAverageQuadratic,
    };
    let ctx = crate::risk::LossContext::new(kind, model.mu(), region)?;
    let (la, lb) = crate::risk::paired_loss_series(
        rule,
        &reference,
        &ctx,
        model,
        region,
        replications,
        factory,
    )?;
    let diffs: Vec<f64> = la.iter().zip(&lb).map(|(a, b)| a - b).collect();
    let (value, std_error) = mean_and_se(&diffs);
    Ok(Estimate { value, std_error })
}

/// Monte Carlo estimates of the gap moments at the origin.
///
/// With `y` the sample mean under the origin state, `delta = eta(y) -
/// eta*(y)` the action gap against the linear sample-average rule:
/// `e_vector[j] = E[delta_j]`, `matrix[(i, j)] = E[y_i delta_j]`, and `trace`
/// is the direct estimate of `E[y^T delta]` (the trace of `matrix`) with its
/// own standard error.
#[derive(Debug, Clone)]
pub struct GMatrixEstimate {
    pub matrix: DMatrix<f64>,
    pub e_vector: DVector<f64>,
    pub matrix_std_errors: DMatrix<f64>,
    pub e_std_errors: DVector<f64>,
    pub trace: f64,
    pub trace_std_error: f64,
    pub replications: u64,
}

pub fn g_matrix_at_zero(
    rule: &DecisionRule,
    region: &FeasibleRegion,
    sigma: &DMatrix<f64>,
    n: usize,
    replications: u64,
    seed: u64,
) -> Result<GMatrixEstimate, AnalysisError> {
    let d = region.dim();
    let model = GaussianModel::new(DVector::zeros(d), sigma.clone(), n)?;
    let factory = StreamFactory::new(seed).labeled("g-matrix");
    let raw: Vec<Result<Vec<f64>, AnalysisError>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(r);
            let sample = draw_samples(&model, &mut rng);
            let y = sample.mean();
            let eta = rule.apply(region, &sample)?;
            let eta_star = region.linear_minimize(y)?;
            let delta = eta - eta_star;
            // layout: d entries of delta, then d*d entries of y_i delta_j,
            // then the scalar y^T delta
            let mut row = Vec::with_capacity(d + d * d + 1);
            row.extend(delta.iter());
            for i in 0..d {
                for j in 0..d {
                    row.push(y[i] * delta[j]);
                }
            }
            row.push(y.dot(&delta));
            Ok(row)
        })
        .collect();
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(replications as usize); d + d * d + 1];
    for item in raw {
        for (k, v) in item?.into_iter().enumerate() {
            series[k].push(v);
        }
    }
    let mut e_vector = DVector::zeros(d);
    let mut e_std_errors = DVector::zeros(d);
    for j in 0..d {
        let (m, se) = mean_and_se(&series[j]);
        e_vector[j] = m;
        e_std_errors[j] = se;
    }
    let mut matrix = DMatrix::zeros(d, d);
    let mut matrix_std_errors = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let (m, se) = mean_and_se(&series[d + i * d + j]);
            matrix[(i, j)] = m;
            matrix_std_errors[(i, j)] = se;
        }
    }
    let (trace, trace_std_error) = mean_and_se(&series[d + d * d]);
    Ok(GMatrixEstimate {
        matrix,
        e_vector,
        matrix_std_errors,
        e_std_errors,
        trace,
        trace_std_error,
        replications,
    })
}

/// Trace of the risk-gap Hessian at the origin implied by a gap-moment
/// estimate: `n tr(S^-1 G + G^T S^-1) = 2n tr(S^-1 G)`.
pub fn hessian_trace_at_zero(
    g: &GMatrixEstimate,
    sigma: &DMatrix<f64>,
    n: usize,
) -> Result<f64, AnalysisError> {
    let inv = sigma
        .clone()
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?
        .inverse();
    let t = (&inv * &g.matrix).trace() + (&g.matrix.transpose() * &inv).trace();
    Ok(n as f64 * t)
}

/// The analytic Hessian `n (S^-1 G + G^T S^-1)` assembled from a gap-moment
/// estimate, together with a conservative entrywise standard-error bound
/// (standard errors combined by the triangle inequality).
pub fn analytic_hessian_at_zero(
    g: &GMatrixEstimate,
    sigma: &DMatrix<f64>,
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>), AnalysisError> {
    let d = g.matrix.nrows();
    let inv = sigma
        .clone()
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?
        .inverse();
    let nf = n as f64;
    let hess = (&inv * &g.matrix + &g.matrix.transpose() * &inv) * nf;
    let mut se = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut bound = 0.0;
            for k in 0..d {
                bound += inv[(i, k)].abs() * g.matrix_std_errors[(k, j)];
                bound += inv[(k, j)].abs() * g.matrix_std_errors[(k, i)];
            }
            se[(i, j)] = nf * bound;
        }
    }
    Ok((hess, se))
}

/// Central-difference Hessian of the linear-objective risk gap at the origin.
#[derive(Debug, Clone)]
pub struct FdHessian {
    pub matrix: DMatrix<f64>,
    pub std_errors: DMatrix<f64>,
    pub step: f64,
    pub replications: u64,
}

/// Estimate the Hessian of the linear risk gap `F(mu) = R(mu, rule) -
/// R(mu, sample-average)` at `mu = 0` by central second differences with
/// step `step`, using common random numbers across all stencil points.
///
/// Each replication draws one set of sampling noise and evaluates the whole
/// stencil on it, so the reported standard errors are those of the paired
/// estimator. `F(0) = 0` holds identically for the linear objective and the
/// diagonal stencil exploits it.
pub fn fd_hessian_at_zero(
    rule: &DecisionRule,
    region: &FeasibleRegion,
    sigma: &DMatrix<f64>,
    n: usize,
    step: f64,
    replications: u64,
    seed: u64,
) -> Result<FdHessian, AnalysisError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let d = region.dim();
    let model = GaussianModel::new(DVector::zeros(d), sigma.clone(), n)?;
    let factory = StreamFactory::new(seed).labeled("fd-hessian");

    // linear risk gap at state mu for sampling noise m: mu^T (rule(mu + m) - argmin(mu + m))
    let gap = |mu: &DVector<f64>, m: &DVector<f64>| -> Result<f64, AnalysisError> {
        let y = mu + m;
        let sample = Sample::from_mean(y.clone(), n);
        let eta = rule.apply(region, &sample)?;
        let eta_star = region.linear_minimize(&y)?;
        Ok(mu.dot(&eta) - mu.dot(&eta_star))
    };

    let entries = d * d;
    let raw: Vec<Result<Vec<f64>, AnalysisError>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(r);
            let sample = draw_samples(&model, &mut rng);
            let m = sample.mean().clone();
            let mut stencil = vec![0.0f64; entries];
            for i in 0..d {
                let mut ei = DVector::zeros(d);
                ei[i] = step;
                let plus = gap(&ei, &m)?;
                let minus = gap(&(-&ei), &m)?;
                stencil[i * d + i] = (plus + minus) / (step * step);
                for j in (i + 1)..d {
                    let mut ej = DVector::zeros(d);
                    ej[j] = step;
                    let pp = gap(&(&ei + &ej), &m)?;
                    let pm = gap(&(&ei - &ej), &m)?;
                    let mp = gap(&(&ej - &ei), &m)?;
                    let mm = gap(&(-&ei - &ej), &m)?;
                    let v = (pp - pm - mp + mm) / (4.0 * step * step);
                    stencil[i * d + j] = v;
                    stencil[j * d + i] = v;
                }
            }
            Ok(stencil)
        })
        .collect();
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(replications as usize); entries];
    for item in raw {
        for (k, v) in item?.into_iter().enumerate() {
            series[k].push(v);
        }
    }
    let mut matrix = DMatrix::zeros(d, d);
    let mut std_errors = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let (m, se) = mean_and_se(&series[i * d + j]);
            matrix[(i, j)] = m;
            std_errors[(i, j)] = se;
        }
    }
    Ok(FdHessian {
        matrix,
        std_errors,
        step,
        replications,
    })
}

// ---------------------------------------------------------------------------
// Prior scan (numerator, denominator, ratio decay)
// ---------------------------------------------------------------------------

/// tau-grid of the prior-scan quantities with the fitted decay slope of the
/// ratio against tau on the log-log scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlythReport {
    pub taus: Vec<f64>,
    pub numerators: Vec<f64>,
    pub numerator_std_errors: Vec<f64>,
    pub denominators: Vec<f64>,
    pub denominator_std_errors: Vec<f64>,
    pub ratios: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
}

fn require_centered(region: &FeasibleRegion) -> Result<(), AnalysisError> {
    match region {
        FeasibleRegion::Box { lower, upper } => {
            for i in 0..lower.len() {
                let off = lower[i] + upper[i];
                if off.abs() > 1e-12 * (1.0 + upper[i].abs()) {
                    return Err(AnalysisError::InvalidInput(format!(
                        "prior scans need a centered region; box coordinate {i} has center {}",
                        off / 2.0
                    )));
                }
            }
            Ok(())
        }
        FeasibleRegion::Ball { center, .. } => {
            if center.iter().any(|c| c.abs() > 1e-12) {
                return Err(AnalysisError::InvalidInput(
                    "prior scans need a ball centered at the origin".into(),
                ));
            }
            Ok(())
        }
        FeasibleRegion::VPolytope { .. } => Err(AnalysisError::InvalidInput(
            "prior scans support box and ball regions only".into(),
        )),
    }
}

/// Monte Carlo estimate of `E ||proj(s xi) - proj(xi)||^2` where
/// `s = n tau^2/(n tau^2 + 1)` and `xi` follows the marginal distribution of
/// the sample mean under the prior `N(0, tau^2 sigma)`.
///
/// For a box the marginal is sampled directly. For a ball the integrand
/// vanishes outside the ball of radius `R/s` and the marginal mass there
/// collapses as `tau` grows, so the same expectation is computed by
/// importance sampling from the uniform distribution on that support ball;
/// the estimate stays unbiased with a bounded relative error at every `tau`.
pub fn blyth_numerator(
    tau: f64,
    region: &FeasibleRegion,
    sigma: &DMatrix<f64>,
    n: usize,
    replications: u64,
    seed: u64,
) -> Result<Estimate, AnalysisError> {
    let factory = StreamFactory::new(seed).labeled("blyth-numerator");
    blyth_numerator_with(tau, region, sigma, n, replications, &factory)
}

fn blyth_numerator_with(
    tau: f64,
    region: &FeasibleRegion,
    sigma: &DMatrix<f64>,
    n: usize,
    replications: u64,
    factory: &StreamFactory,
) -> Result<Estimate, AnalysisError> {
    require_centered(region)?;
    if replications < 2 {
        return Err(AnalysisError::InvalidInput(
            "numerator estimation needs at least 2 replications".into(),
        ));
    }
    let d = region.dim();
    let model = GaussianModel::new(DVector::zeros(d), sigma.clone(), n)?;
    let (_, marg_cov) = marginal_of_mean(tau, &model)?;
    let marg_chol = marg_cov
        .clone()
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?;
    let marg_lower = marg_chol.l();
    let nf = n as f64;
    let s = nf * tau * tau / (nf * tau * tau + 1.0);
    let zero = DVector::zeros(d);

    let values: Vec<f64> = match region {
        FeasibleRegion::Box { .. } => {
            let raw: Vec<Result<f64, AnalysisError>> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let mut rng = factory.stream(r);
                    let xi = draw_gaussian(&zero, &marg_lower, &mut rng);
                    let p_full = region.project(&xi)?;
                    let p_shrunk = region.project(&(&xi * s))?;
                    Ok((p_shrunk - p_full).norm_squared())
                })
                .collect();
            raw.into_iter().collect::<Result<Vec<f64>, _>>()?
        }
        FeasibleRegion::Ball { radius, .. } => {
            // log-density constant and support volume for the importance weights
            let log_det: f64 = 2.0 * marg_lower.diagonal().iter().map(|x| x.ln()).sum::<f64>();
            let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
            let support_radius = radius / s;
            let log_vol = d as f64 * support_radius.ln()
                + 0.5 * d as f64 * std::f64::consts::PI.ln()
                - ln_gamma(d as f64 / 2.0 + 1.0);
            let raw: Vec<Result<f64, AnalysisError>> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let mut rng = factory.stream(r);
                    // uniform draw in the support ball
                    let mut dir = draw_gaussian(&zero, &DMatrix::identity(d, d), &mut rng);
                    let dir_norm = dir.norm();
                    if dir_norm == 0.0 {
                        return Ok(0.0);
                    }
                    dir /= dir_norm;
                    let u: f64 = rand::Rng::gen::<f64>(&mut rng);
                    let x = dir * (support_radius * u.powf(1.0 / d as f64));
                    let p_full = region.project(&x)?;
                    let p_shrunk = region.project(&(&x * s))?;
                    let f = (p_shrunk - p_full).norm_squared();
                    let q = marg_chol.solve(&x).dot(&x);
                    Ok(f * (log_norm - 0.5 * q + log_vol).exp())
                })
                .collect();
            raw.into_iter().collect::<Result<Vec<f64>, _>>()?
        }
        FeasibleRegion::VPolytope { .. } => unreachable!("rejected by require_centered"),
    };
    let (value, std_error) = mean_and_se(&values);
    Ok(Estimate { value, std_error })
}

/// Prior mass `\int_{omega0} N(0, tau^2 sigma) dmu` of a box.
///
/// Diagonal covariances are evaluated exactly as a product of univariate
/// normal CDF differences; otherwise the mass is estimated by Monte Carlo
/// with one million draws and a reported standard error.
pub fn blyth_denominator(
    omega0: &FeasibleRegion,
    tau: f64,
    sigma: &DMatrix<f64>,
    seed: u64,
) -> Result<Estimate, AnalysisError> {
    let factory = StreamFactory::new(seed).labeled("blyth-denominator");
    blyth_denominator_with(omega0, tau, sigma, &factory)
}

fn blyth_denominator_with(
    omega0: &FeasibleRegion,
    tau: f64,
    sigma: &DMatrix<f64>,
    factory: &StreamFactory,
) -> Result<Estimate, AnalysisError> {
    let FeasibleRegion::Box { lower, upper } = omega0 else {
        return Err(AnalysisError::InvalidInput(
            "the prior-mass window must be a box".into(),
        ));
    };
    if !(tau.is_finite() && tau > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "tau must be a positive real, got {tau}"
        )));
    }
    let d = lower.len();
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(AnalysisError::InvalidInput(format!(
            "covariance is {}x{} but the window has dimension {d}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    for i in 0..d {
        if !(upper[i] > lower[i]) {
            return Err(AnalysisError::InvalidInput(format!(
                "prior-mass window must have positive volume, coordinate {i} is [{}, {}]",
                lower[i], upper[i]
            )));
        }
    }
    let diagonal = (0..d).all(|i| {
        (0..d).all(|j| i == j || sigma[(i, j)].abs() <= 1e-12)
    });
    if diagonal {
        let mut mass = 1.0;
        for i in 0..d {
            let sd = (sigma[(i, i)]).sqrt() * tau;
            mass *= normal_cdf(upper[i] / sd) - normal_cdf(lower[i] / sd);
        }
        return Ok(Estimate {
            value: mass,
            std_error: 0.0,
        });
    }
    let chol = (sigma * (tau * tau))
        .cholesky()
        .ok_or(StochasticsError::NotPositiveDefinite)?;
    let lower_factor = chol.l();
    let zero = DVector::zeros(d);
    let hits: Vec<f64> = (0..DENOMINATOR_MC_DRAWS)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(r);
            let mu = draw_gaussian(&zero, &lower_factor, &mut rng);
            let inside = (0..d).all(|i| mu[i] >= lower[i] && mu[i] <= upper[i]);
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (value, std_error) = mean_and_se(&hits);
    Ok(Estimate { value, std_error })
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Run the full prior scan over a tau grid and fit the decay slope of the
/// ratio on the upper (large-tau) half of the grid.
pub fn blyth_scan(
    region: &FeasibleRegion,
    sigma: &DMatrix<f64>,
    n: usize,
    taus: &[f64],
    omega0: &FeasibleRegion,
    replications: u64,
    seed: u64,
) -> Result<BlythReport, AnalysisError> {
    if taus.len() < 4 {
        return Err(AnalysisError::InvalidInput(format!(
            "the tau grid needs at least 4 points, got {}",
            taus.len()
        )));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(AnalysisError::InvalidInput(
            "the tau grid must be positive and strictly increasing".into(),
        ));
    }
    let factory = StreamFactory::new(seed);
    let mut numerators = Vec::with_capacity(taus.len());
    let mut numerator_std_errors = Vec::with_capacity(taus.len());
    let mut denominators = Vec::with_capacity(taus.len());
    let mut denominator_std_errors = Vec::with_capacity(taus.len());
    let mut ratios = Vec::with_capacity(taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        let num_factory = factory.labeled(&format!("blyth-numerator-{k}"));
        let num = blyth_numerator_with(tau, region, sigma, n, replications, &num_factory)?;
        let den_factory = factory.labeled(&format!("blyth-denominator-{k}"));
        let den = blyth_denominator_with(omega0, tau, sigma, &den_factory)?;
        if !(num.value > 0.0) {
            return Err(AnalysisError::NonPositiveEstimate(num.value));
        }
        if !(den.value > 0.0) {
            return Err(AnalysisError::NonPositiveEstimate(den.value));
        }
        numerators.push(num.value);
        numerator_std_errors.push(num.std_error);
        denominators.push(den.value);
        denominator_std_errors.push(den.std_error);
        ratios.push(num.value / den.value);
    }
    let keep = taus.len() - taus.len() / 2;
    let start = taus.len() - keep;
    let points: Vec<(f64, f64)> = (start..taus.len())
        .map(|k| (taus[k].ln(), ratios[k].ln()))
        .collect();
    let (slope, slope_stderr) = ols_line(&points);
    Ok(BlythReport {
        taus: taus.to_vec(),
        numerators,
        numerator_std_errors,
        denominators,
        denominator_std_errors,
        ratios,
        slope,
        slope_stderr,
    })
}

// ---------------------------------------------------------------------------
// Consistency-rate fit
// ---------------------------------------------------------------------------

/// Risk of a rule along a geometric sample-size ladder with the fitted
/// log-log slope over the small-`n` half of the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n_values: Vec<usize>,
    pub risks: Vec<RiskEstimate>,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// Estimate the risk at the state `base.mu()` for each sample count in
/// `n_list` and fit the decay slope on the log-log scale.
///
/// The fit keeps the smallest-`n` half of the ladder: that is where the
/// square-root sampling regime is visible, while for large `n` the risk of
/// boundary-supported rules decays faster than any power and its Monte Carlo
/// estimate degenerates.
pub fn consistency_slope(
    rule: &DecisionRule,
    kind: ObjectiveKind,
    base: &GaussianModel,
    region: &FeasibleRegion,
    n_list: &[usize],
    replications: u64,
    seed: u64,
) -> Result<ConsistencyReport, AnalysisError> {
    if n_list.len() < 4 {
        return Err(AnalysisError::InvalidInput(format!(
            "the sample-size ladder needs at least 4 points, got {}",
            n_list.len()
        )));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(AnalysisError::InvalidInput(
            "the sample-size ladder must be positive and strictly increasing".into(),
        ));
    }
    let ratio = n_list[1] / n_list[0];
    let geometric = ratio >= 2
        && n_list
            .windows(2)
            .all(|w| w[0] * ratio == w[1]);
    if !geometric {
        return Err(AnalysisError::InvalidInput(
            "the sample-size ladder must be geometric (constant integer ratio >= 2)".into(),
        ));
    }
    let factory = StreamFactory::new(seed);
    let mut risks = Vec::with_capacity(n_list.len());
    for (k, &n) in n_list.iter().enumerate() {
        let model = base.with_n(n)?;
        let f = factory.labeled(&format!("consistency-{k}"));
        let est = estimate_risk_with(rule, kind, &model, region, replications, seed, &f)?;
        risks.push(est);
    }
    let keep = n_list.len() - n_list.len() / 2;
    let mut points = Vec::with_capacity(keep);
    for k in 0..keep {
        if !(risks[k].value > 0.0) {
            return Err(AnalysisError::NonPositiveEstimate(risks[k].value));
        }
        points.push(((n_list[k] as f64).ln(), risks[k].value.ln()));
    }
    let (slope, slope_stderr) = ols_line(&points);
    Ok(ConsistencyReport {
        n_values: n_list.to_vec(),
        risks,
        slope,
        slope_stderr,
    })
}

/// Ordinary least squares slope and its residual-based standard error.
/// With only two points the line interpolates and the standard error is zero.
fn ols_line(points: &[(f64, f64)]) -> (f64, f64) {
    let m = points.len() as f64;
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    if points.len() <= 2 {
        return (slope, 0.0);
    }
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let sigma2 = ss_res / (m - 2.0);
    (slope, (sigma2 / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vecn(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn eye(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    fn unit_box(d: usize) -> FeasibleRegion {
        FeasibleRegion::cube(d, 1.0).unwrap()
    }

    #[test]
    fn f_value_is_exactly_zero_at_origin_for_linear() {
        let model = GaussianModel::standard(vecn(&[0.0, 0.0]), 1).unwrap();
        let est = f_value(
            &DecisionRule::Constant {
                point: vec![0.3, -0.3],
            },
            ObjectiveKind::Linear,
            &model,
            &unit_box(2),
            2_000,
            1,
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn f_value_of_sample_average_is_exactly_zero() {
        let model = GaussianModel::standard(vecn(&[0.4, -0.9]), 2).unwrap();
        let est = f_value(
            &DecisionRule::SampleAverageLinear,
            ObjectiveKind::Linear,
            &model,
            &unit_box(2),
            2_000,
            1,
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn f_value_matches_closed_form_for_center_rule() {
        // F(mu) = sum_i mu_i (1 - 2 Phi(-mu_i)); at (1, 0) this is 1 - 2 Phi(-1)
        let model = GaussianModel::standard(vecn(&[1.0, 0.0]), 1).unwrap();
        let est = f_value(
            &DecisionRule::Constant {
                point: vec![0.0, 0.0],
            },
            ObjectiveKind::Linear,
            &model,
            &unit_box(2),
            400_000,
            2,
        )
        .unwrap();
        let target = 1.0 - 2.0 * normal_cdf(-1.0);
        assert!(
            (est.value - target).abs() <= 3.0 * est.std_error,
            "value {} target {target} se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn g_matrix_of_sample_average_is_exactly_zero() {
        let g = g_matrix_at_zero(
            &DecisionRule::SampleAverageLinear,
            &unit_box(2),
            &eye(2),
            1,
            2_000,
            3,
        )
        .unwrap();
        assert_eq!(g.matrix, DMatrix::zeros(2, 2));
        assert_eq!(g.e_vector, DVector::zeros(2));
        assert_eq!(g.trace, 0.0);
    }

    #[test]
    fn g_trace_of_center_rule_matches_folded_normal_moment() {
        let g = g_matrix_at_zero(
            &DecisionRule::Constant {
                point: vec![0.0, 0.0],
            },
            &unit_box(2),
            &eye(2),
            1,
            400_000,
            4,
        )
        .unwrap();
        let target = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (g.trace - target).abs() <= 3.0 * g.trace_std_error,
            "trace {} target {target} se {}",
            g.trace,
            g.trace_std_error
        );
        // off-diagonals vanish for the center rule under an isotropic model
        assert!(g.matrix[(0, 1)].abs() <= 3.0 * g.matrix_std_errors[(0, 1)] + 1e-3);
        // hessian trace is 2n tr(G); scaling the covariance by 4 divides it by 4
        let h = hessian_trace_at_zero(&g, &eye(2), 1).unwrap();
        assert_relative_eq!(h, 2.0 * g.matrix.trace(), epsilon = 1e-12);
        let h4 = hessian_trace_at_zero(&g, &(eye(2) * 4.0), 1).unwrap();
        assert_relative_eq!(h4, h / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn hessian_trace_of_zero_matrix_is_zero() {
        let g = GMatrixEstimate {
            matrix: DMatrix::zeros(2, 2),
            e_vector: DVector::zeros(2),
            matrix_std_errors: DMatrix::zeros(2, 2),
            e_std_errors: DVector::zeros(2),
            trace: 0.0,
            trace_std_error: 0.0,
            replications: 0,
        };
        assert_eq!(hessian_trace_at_zero(&g, &eye(2), 3).unwrap(), 0.0);
    }

    #[test]
    fn fd_hessian_matches_gap_moments_for_center_rule() {
        let rule = DecisionRule::Constant {
            point: vec![0.0, 0.0],
        };
        let region = unit_box(2);
        let g = g_matrix_at_zero(&rule, &region, &eye(2), 1, 300_000, 5).unwrap();
        let (analytic, analytic_se) = analytic_hessian_at_zero(&g, &eye(2), 1).unwrap();
        let fd = fd_hessian_at_zero(&rule, &region, &eye(2), 1, 0.05, 300_000, 6).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let bars = 3.0 * (fd.std_errors[(i, j)] + analytic_se[(i, j)]);
                assert!(
                    (fd.matrix[(i, j)] - analytic[(i, j)]).abs() <= bars,
                    "entry ({i},{j}): fd {} analytic {} bars {bars}",
                    fd.matrix[(i, j)],
                    analytic[(i, j)]
                );
            }
        }
        // and the diagonal should sit near 4 phi(0) = 1.5958
        let target = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((fd.matrix[(0, 0)] - target).abs() < 0.1);
    }

    #[test]
    fn numerator_limits() {
        // s -> 1: the two projections coincide and the numerator vanishes
        let est = blyth_numerator(1e6, &unit_box(3), &eye(3), 1, 50_000, 7).unwrap();
        assert!(est.value <= 1e-9, "numerator {} at huge tau", est.value);

        // effectively unconstrained box: numerator = (1-s)^2 E||xi||^2 = d/(n(n tau^2+1))
        let huge = FeasibleRegion::cube(3, 1e6).unwrap();
        let est = blyth_numerator(1.0, &huge, &eye(3), 1, 200_000, 8).unwrap();
        let target = 3.0 / 2.0;
        assert!(
            (est.value - target).abs() <= 3.0 * est.std_error,
            "value {} target {target} se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn numerator_decreases_along_tau_doubling() {
        let mut last = f64::INFINITY;
        for (k, tau) in [1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
            let est = blyth_numerator(tau, &unit_box(3), &eye(3), 1, 200_000, 100 + k as u64)
                .unwrap();
            assert!(
                est.value < last,
                "numerator should decrease in tau, got {} after {last}",
                est.value
            );
            last = est.value;
        }
    }

    #[test]
    fn ball_numerator_importance_sampling_matches_plain_monte_carlo() {
        // moderate tau where plain sampling still works
        let ball = FeasibleRegion::new_ball(vecn(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        let est_is = blyth_numerator(2.0, &ball, &eye(3), 1, 400_000, 9).unwrap();
        // plain-path reference computed through the box machinery of the same
        // expectation: draw from the marginal and project onto the ball
        let model = GaussianModel::standard(vecn(&[0.0, 0.0, 0.0]), 1).unwrap();
        let (_, cov) = marginal_of_mean(2.0, &model).unwrap();
        let lower = cov.cholesky().unwrap().l();
        let f = StreamFactory::new(10);
        let s = 4.0 / 5.0;
        let mut vals = Vec::new();
        for r in 0..400_000u64 {
            let xi = draw_gaussian(&DVector::zeros(3), &lower, &mut f.stream(r));
            let a = ball.project(&xi).unwrap();
            let b = ball.project(&(&xi * s)).unwrap();
            vals.push((b - a).norm_squared());
        }
        let (plain, plain_se) = mean_and_se(&vals);
        let bars = 3.0 * (est_is.std_error + plain_se);
        assert!(
            (est_is.value - plain).abs() <= bars,
            "importance {} vs plain {plain} bars {bars}",
            est_is.value
        );
    }

    #[test]
    fn denominator_closed_forms() {
        let huge = FeasibleRegion::cube(2, 1e9).unwrap();
        let est = blyth_denominator(&huge, 1.0, &eye(2), 1).unwrap();
        assert_relative_eq!(est.value, 1.0, epsilon = 1e-12);

        // one-sided huge interval captures half the mass
        let half = FeasibleRegion::new_box(vecn(&[0.0]), vecn(&[1e9])).unwrap();
        let est = blyth_denominator(&half, 1.0, &eye(1), 1).unwrap();
        assert_relative_eq!(est.value, 0.5, epsilon = 1e-12);

        let window = FeasibleRegion::cube(1, 1.0).unwrap();
        let est = blyth_denominator(&window, 1.0, &eye(1), 1).unwrap();
        assert_relative_eq!(est.value, 2.0 * normal_cdf(1.0) - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn denominator_monte_carlo_matches_quadrature_oracle() {
        // correlated 2-d covariance forces the Monte Carlo path
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let window = FeasibleRegion::cube(2, 1.0).unwrap();
        let tau = 1.3f64;
        let est = blyth_denominator(&window, tau, &sigma, 12).unwrap();
        assert!(est.std_error > 0.0);
        // oracle: tensor Gauss-Legendre quadrature of the bivariate density
        let cov = &sigma * (tau * tau);
        let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
        let inv = DMatrix::from_row_slice(
            2,
            2,
            &[
                cov[(1, 1)] / det,
                -cov[(0, 1)] / det,
                -cov[(1, 0)] / det,
                cov[(0, 0)] / det,
            ],
        );
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        let nodes = 80usize;
        let mut mass = 0.0;
        // midpoint-free Gauss-Legendre on [-1,1]^2 via Chebyshev-like fixed grid:
        // plain composite Simpson is plenty at this tolerance
        let steps = 400usize;
        let h = 2.0 / steps as f64;
        let simpson = |k: usize| -> f64 {
            if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let _ = nodes;
        for i in 0..=steps {
            let x = -1.0 + i as f64 * h;
            for j in 0..=steps {
                let y = -1.0 + j as f64 * h;
                let q = inv[(0, 0)] * x * x + 2.0 * inv[(0, 1)] * x * y + inv[(1, 1)] * y * y;
                mass += simpson(i) * simpson(j) * norm * (-0.5 * q).exp();
            }
        }
        mass *= h * h / 9.0;
        assert!(
            (est.value - mass).abs() <= 4.0 * est.std_error,
            "mc {} oracle {mass} se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let r = unit_box(2);
        let w = unit_box(2);
        assert!(blyth_scan(&r, &eye(2), 1, &[1.0, 2.0, 4.0], &w, 100, 1).is_err());
        assert!(blyth_scan(&r, &eye(2), 1, &[4.0, 2.0, 1.0, 0.5], &w, 100, 1).is_err());
        let off_center = FeasibleRegion::new_box(vecn(&[0.0, 0.0]), vecn(&[1.0, 1.0])).unwrap();
        assert!(blyth_numerator(1.0, &off_center, &eye(2), 1, 100, 1).is_err());
    }

    #[test]
    fn consistency_ladder_validation() {
        let model = GaussianModel::standard(vecn(&[0.3, 0.7]), 1).unwrap();
        let region = unit_box(2);
        let rule = DecisionRule::SampleAverageLinear;
        let bad = consistency_slope(
            &rule,
            ObjectiveKind::Linear,
            &model,
            &region,
            &[1, 2, 3, 4],
            200,
            1,
        );
        assert!(bad.is_err());
        let short = consistency_slope(
            &rule,
            ObjectiveKind::Linear,
            &model,
            &region,
            &[1, 4, 16],
            200,
            1,
        );
        assert!(short.is_err());
    }

    #[test]
    fn quadratic_interior_consistency_slope_is_minus_one() {
        // risk = d sigma^2 / n while the box never binds, so the slope is -1
        let sigma = eye(2) * 0.0625; // sd 0.25
        let model = GaussianModel::new(vecn(&[0.1, -0.2]), sigma, 1).unwrap();
        let region = unit_box(2);
        let report = consistency_slope(
            &DecisionRule::SampleAverageQuadratic,
            ObjectiveKind::Quadratic,
            &model,
            &region,
            &[1, 4, 16, 64, 256],
            100_000,
            13,
        )
        .unwrap();
        assert!(
            (report.slope + 1.0).abs() <= 0.2,
            "slope {} should be near -1",
            report.slope
        );
        for w in report.risks.windows(2) {
            assert!(w[1].value < w[0].value, "risk should decrease along n");
        }
        assert!(report.risks.iter().all(|r| r.value > 0.0));
    }

    #[test]
    fn ols_slope_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|k| {
                let x = k as f64;
                (x, 3.0 - 2.0 * x)
            })
            .collect();
        let (slope, se) = ols_line(&pts);
        assert_relative_eq!(slope, -2.0, epsilon = 1e-12);
        assert!(se.abs() < 1e-10);
    }
}
