//! Optimality-gap loss functions and seeded Monte Carlo risk estimation.
//!
//! The loss of an action `x` under state `mu` is the objective gap against
//! the best feasible action for that state:
//!
//! * linear objective: `mu^T x - mu^T x(mu)` with `x(mu)` the linear argmin,
//! * quadratic objective: `||x - mu||^2 - ||proj(mu) - mu||^2`, the squared
//!   distance gap whose minimizer is the projection of the state.
//!
//! Risk is the Monte Carlo average of losses over independent replications.
//! Each replication draws its sample from its own random substream, losses
//! are reduced in replication order with compensated summation, and rule
//! comparisons reuse the same substreams for both rules (common random
//! numbers), so paired differences of a rule against itself are exactly zero
//! and results never depend on thread count.

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use serde::{Deserialize, Serialize};

use crate::geometry::{FeasibleRegion, GeometryError};
use crate::rules::{DecisionRule, RuleError};
use crate::stochastics::{draw_samples, GaussianModel, Sample, StochasticsError, StreamFactory};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("action lies outside the feasible region (distance beyond {tol})")]
    ActionOutsideRegion { tol: f64 },
    #[error("need at least {need} replications, got {got}")]
    TooFewReplications { need: u64, got: u64 },
    #[error("the quadrature oracle requires dimension 1, got {0}")]
    QuadratureNeedsDim1(usize),
    #[error("state grid must be nonempty")]
    EmptyGrid,
    #[error("risk estimate is not a finite number")]
    NonFiniteEstimate,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Stochastics(#[from] StochasticsError),
}

/// Which stochastic objective the loss is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Linear,
    Quadratic,
}

/// A Monte Carlo risk value with its standard error and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replications: u64,
    pub seed: u64,
}

impl RiskEstimate {
    fn checked(value: f64, std_error: f64, replications: u64, seed: u64) -> Result<Self, RiskError> {
        if !value.is_finite() || !std_error.is_finite() {
            return Err(RiskError::NonFiniteEstimate);
        }
        debug_assert!(
            value >= -(1e-9 + 3.0 * std_error),
            "risk is a mean of nonnegative losses, got {value}"
        );
        Ok(RiskEstimate {
            value,
            std_error,
            replications,
            seed,
        })
    }
}

/// Optimality-gap loss. Checks that `x` is feasible within 1e-9.
pub fn loss(
    kind: ObjectiveKind,
    mu: &DVector<f64>,
    x: &DVector<f64>,
    region: &FeasibleRegion,
) -> Result<f64, RiskError> {
    let tol = 1e-9;
    if !region.contains(x, tol)? {
        return Err(RiskError::ActionOutsideRegion { tol });
    }
    let ctx = LossContext::new(kind, mu, region)?;
    Ok(ctx.eval(x))
}

/// Loss with the state-dependent optimum precomputed, for hot loops where the
/// state is fixed and every action is already feasible by construction.
#[derive(Debug, Clone)]
pub(crate) struct LossContext {
    kind: ObjectiveKind,
    mu: DVector<f64>,
    best: f64,
}

impl LossContext {
    pub(crate) fn new(
        kind: ObjectiveKind,
        mu: &DVector<f64>,
        region: &FeasibleRegion,
    ) -> Result<Self, RiskError> {
        let best = match kind {
            ObjectiveKind::Linear => {
                let argmin = region.linear_minimize(mu)?;
                mu.dot(&argmin)
            }
            ObjectiveKind::Quadratic => {
                let proj = region.project(mu)?;
                (&proj - mu).norm_squared()
            }
        };
        Ok(LossContext {
            kind,
            mu: mu.clone(),
            best,
        })
    }

    pub(crate) fn eval(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            ObjectiveKind::Linear => self.mu.dot(x) - self.best,
            ObjectiveKind::Quadratic => (x - &self.mu).norm_squared() - self.best,
        }
    }
}

/// Neumaier-compensated sum in slice order.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error of a series, reduced deterministically.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = compensated_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Loss series of one rule over `replications` independent samples.
pub(crate) fn loss_series(
    rule: &DecisionRule,
    ctx: &LossContext,
    model: &GaussianModel,
    region: &FeasibleRegion,
    replications: u64,
    factory: &StreamFactory,
) -> Result<Vec<f64>, RiskError> {
    let raw: Vec<Result<f64, RiskError>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(r);
            let sample = draw_samples(model, &mut rng);
            let x = rule.apply(region, &sample)?;
            Ok(ctx.eval(&x))
        })
        .collect();
    raw.into_iter().collect()
}

/// Paired loss series of two rules sharing each replication's sample.
pub(crate) fn paired_loss_series(
    rule_a: &DecisionRule,
    rule_b: &DecisionRule,
    ctx: &LossContext,
    model: &GaussianModel,
    region: &FeasibleRegion,
    replications: u64,
    factory: &StreamFactory,
) -> Result<(Vec<f64>, Vec<f64>), RiskError> {
    let raw: Vec<Result<(f64, f64), RiskError>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = factory.stream(r);
            let sample = draw_samples(model, &mut rng);
            let xa = rule_a.apply(region, &sample)?;
            let xb = rule_b.apply(region, &sample)?;
            Ok((ctx.eval(&xa), ctx.eval(&xb)))
        })
        .collect();
    let mut la = Vec::with_capacity(replications as usize);
    let mut lb = Vec::with_capacity(replications as usize);
    for item in raw {
        let (a, b) = item?;
        la.push(a);
        lb.push(b);
    }
    Ok((la, lb))
}

/// Monte Carlo risk of a rule at the model's state, deterministic in `seed`.
pub fn estimate_risk(
    rule: &DecisionRule,
    kind: ObjectiveKind,
    model: &GaussianModel,
    region: &FeasibleRegion,
    replications: u64,
    seed: u64,
) -> Result<RiskEstimate, RiskError> {
    let factory = StreamFactory::new(seed).labeled("risk");
    estimate_risk_with(rule, kind, model, region, replications, seed, &factory)
}

/// As [`estimate_risk`] but drawing from a caller-supplied stream factory, so
/// composite experiments can share streams across evaluations.
pub fn estimate_risk_with(
    rule: &DecisionRule,
    kind: ObjectiveKind,
    model: &GaussianModel,
    region: &FeasibleRegion,
    replications: u64,
    seed: u64,
    factory: &StreamFactory,
) -> Result<RiskEstimate, RiskError> {
    if replications < 2 {
        return Err(RiskError::TooFewReplications {
            need: 2,
            got: replications,
        });
    }
    let ctx = LossContext::new(kind, model.mu(), region)?;
    let losses = loss_series(rule, &ctx, model, region, replications, factory)?;
    let (value, std_error) = mean_and_se(&losses);
    RiskEstimate::checked(value, std_error, replications, seed)
}

/// Dominance call from paired comparisons at the 3-standard-error level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ADominates,
    BDominates,
    NoDominance,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::ADominates => "a_dominates",
            Verdict::BDominates => "b_dominates",
            Verdict::NoDominance => "no_dominance",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Paired risk comparison at one state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mu: Vec<f64>,
    pub risk_a: RiskEstimate,
    pub risk_b: RiskEstimate,
    /// Mean of per-replication loss differences (a minus b).
    pub diff: f64,
    /// Standard error of the paired differences.
    pub diff_std_error: f64,
}

/// Per-state paired differences plus the dominance verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleComparison {
    pub rule_a: String,
    pub rule_b: String,
    pub rows: Vec<ComparisonRow>,
    pub verdict: Verdict,
}

/// Compare two rules over a grid of states with common random numbers.
///
/// Every state reuses the same per-replication substreams for both rules, so
/// the reported differences are paired and a rule compared against itself
/// yields exactly zero everywhere.
pub fn compare_rules(
    rule_a: &DecisionRule,
    rule_b: &DecisionRule,
    kind: ObjectiveKind,
    model_grid: &[GaussianModel],
    region: &FeasibleRegion,
    replications: u64,
    seed: u64,
) -> Result<RuleComparison, RiskError> {
    if model_grid.is_empty() {
        return Err(RiskError::EmptyGrid);
    }
    if replications < 2 {
        return Err(RiskError::TooFewReplications {
            need: 2,
            got: replications,
        });
    }
    let factory = StreamFactory::new(seed).labeled("compare");
    let mut rows = Vec::with_capacity(model_grid.len());
    for model in model_grid {
        let ctx = LossContext::new(kind, model.mu(), region)?;
        let (la, lb) =
            paired_loss_series(rule_a, rule_b, &ctx, model, region, replications, &factory)?;
        let (va, sa) = mean_and_se(&la);
        let (vb, sb) = mean_and_se(&lb);
        let diffs: Vec<f64> = la.iter().zip(&lb).map(|(a, b)| a - b).collect();
        let (diff, diff_se) = mean_and_se(&diffs);
        rows.push(ComparisonRow {
            mu: model.mu().iter().copied().collect(),
            risk_a: RiskEstimate::checked(va, sa, replications, seed)?,
            risk_b: RiskEstimate::checked(vb, sb, replications, seed)?,
            diff,
            diff_std_error: diff_se,
        });
    }
    let verdict = classify(&rows);
    Ok(RuleComparison {
        rule_a: rule_a.label(),
        rule_b: rule_b.label(),
        rows,
        verdict,
    })
}

fn classify(rows: &[ComparisonRow]) -> Verdict {
    if rows
        .iter()
        .any(|r| !r.diff.is_finite() || !r.diff_std_error.is_finite())
    {
        return Verdict::Inconclusive;
    }
    let a_better_somewhere = rows.iter().any(|r| r.diff < -3.0 * r.diff_std_error);
    let b_better_somewhere = rows.iter().any(|r| r.diff > 3.0 * r.diff_std_error);
    match (a_better_somewhere, b_better_somewhere) {
        (true, false) => Verdict::ADominates,
        (false, true) => Verdict::BDominates,
        _ => Verdict::NoDominance,
    }
}

// ---------------------------------------------------------------------------
// One-dimensional quadrature oracle
// ---------------------------------------------------------------------------

/// Gauss-Legendre panel order for the quadrature oracle.
const PANEL_ORDER: usize = 64;
/// Integration window half-width in units of the sample-mean deviation.
const WINDOW_SIGMAS: f64 = 13.0;

/// Deterministic risk of a mean-measurable rule in dimension one, computed by
/// quadrature of the loss against the Gaussian density of the sample mean.
///
/// The loss is only piecewise smooth in the sample mean (argmin flips at
/// zero, projections kink at the region bounds), so the real line is split at
/// those breakpoints and each smooth piece is integrated with Gaussian
/// quadrature panels; well over 200 nodes are used in total. This keeps the
/// oracle independent of the Monte Carlo path and accurate to ~1e-10 against
/// closed forms.
pub fn risk_quadrature_1d(
    rule: &DecisionRule,
    kind: ObjectiveKind,
    model: &GaussianModel,
    region: &FeasibleRegion,
) -> Result<f64, RiskError> {
    if model.dim() != 1 || region.dim() != 1 {
        return Err(RiskError::QuadratureNeedsDim1(model.dim().max(region.dim())));
    }
    let mu = model.mu()[0];
    let sigma_mean = (model.sigma()[(0, 0)] / model.n() as f64).sqrt();
    let ctx = LossContext::new(kind, model.mu(), region)?;

    // Probe once so configuration errors surface before integrating.
    rule.apply(region, &Sample::from_mean(DVector::from_vec(vec![mu]), model.n()))?;

    let lo = mu - WINDOW_SIGMAS * sigma_mean;
    let hi = mu + WINDOW_SIGMAS * sigma_mean;
    let mut cuts = vec![lo, hi];
    for b in rule_breakpoints(rule, region, model.n()) {
        if b > lo && b < hi {
            cuts.push(b);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
    cuts.dedup();

    let nodes = legendre_nodes();
    let n_samples = model.n();
    let mut total = 0.0f64;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let panels = ((b - a) / sigma_mean).ceil().max(1.0) as usize;
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let pa = a + p as f64 * width;
            let half = 0.5 * width;
            let mid = pa + half;
            let mut acc = 0.0f64;
            for &(t, w) in nodes {
                let y = mid + half * t;
                let sample = Sample::from_mean(DVector::from_vec(vec![y]), n_samples);
                let x = rule.apply(region, &sample)?;
                let z = (y - mu) / sigma_mean;
                let dens = (-0.5 * z * z).exp() / (sigma_mean * (2.0 * std::f64::consts::PI).sqrt());
                acc += w * ctx.eval(&x) * dens;
            }
            total += acc * half;
        }
    }
    Ok(total)
}

/// Points where a rule's action, as a function of the sample mean, can kink
/// or jump: the argmin sign flip at zero, the region bounds, and the bounds
/// rescaled by the Bayes shrink factor.
fn rule_breakpoints(rule: &DecisionRule, region: &FeasibleRegion, n: usize) -> Vec<f64> {
    let (a, b) = match region {
        FeasibleRegion::Box { lower, upper } => (lower[0], upper[0]),
        FeasibleRegion::Ball { center, radius } => (center[0] - radius, center[0] + radius),
        FeasibleRegion::VPolytope { vertices } => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in vertices {
                lo = lo.min(v[0]);
                hi = hi.max(v[0]);
            }
            (lo, hi)
        }
    };
    let mut pts = vec![0.0, a, b];
    if let DecisionRule::BayesProjectedQuadratic { tau } = rule {
        let nf = n as f64;
        let s = nf * tau * tau / (nf * tau * tau + 1.0);
        pts.push(a / s);
        pts.push(b / s);
    }
    if let DecisionRule::JamesStein { .. } = rule {
        // d = 1 is rejected by apply(); no breakpoints to add.
    }
    pts
}

/// Gauss-Legendre nodes and weights on [-1, 1], Golub-Welsch via the
/// symmetric tridiagonal Jacobi matrix.
fn legendre_nodes() -> &'static [(f64, f64)] {
    use std::sync::OnceLock;
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = PANEL_ORDER;
        let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let off = kf / (4.0 * kf * kf - 1.0).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eigen = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eigen.eigenvectors[(0, i)];
                (eigen.eigenvalues[i], 2.0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        pairs
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::erf::erfc;

    fn vecn(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn normal_cdf(x: f64) -> f64 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }

    fn interval() -> FeasibleRegion {
        FeasibleRegion::cube(1, 1.0).unwrap()
    }

    #[test]
    fn loss_examples() {
        let box2 = FeasibleRegion::cube(2, 1.0).unwrap();
        // zero objective: every action is optimal
        assert_eq!(
            loss(ObjectiveKind::Linear, &vecn(&[0.0, 0.0]), &vecn(&[0.3, -0.7]), &box2).unwrap(),
            0.0
        );
        // mu = 1 on [-1, 1]: optimum -1, action 1 has gap 2
        assert_eq!(
            loss(ObjectiveKind::Linear, &vecn(&[1.0]), &vecn(&[1.0]), &interval()).unwrap(),
            2.0
        );
        // interior state: quadratic optimum is the state itself
        assert_eq!(
            loss(
                ObjectiveKind::Quadratic,
                &vecn(&[0.5, 0.5]),
                &vecn(&[0.5, 0.5]),
                &box2
            )
            .unwrap(),
            0.0
        );
        // squared-distance gap: ||x - mu||^2 - ||proj(mu) - mu||^2 = 4 - 1
        assert_eq!(
            loss(
                ObjectiveKind::Quadratic,
                &vecn(&[2.0, 0.0]),
                &vecn(&[0.0, 0.0]),
                &box2
            )
            .unwrap(),
            3.0
        );
    }

    #[test]
    fn loss_rejects_infeasible_action() {
        let box2 = FeasibleRegion::cube(2, 1.0).unwrap();
        assert!(matches!(
            loss(ObjectiveKind::Linear, &vecn(&[1.0, 0.0]), &vecn(&[2.0, 0.0]), &box2),
            Err(RiskError::ActionOutsideRegion { .. })
        ));
    }

    #[test]
    fn constant_rule_at_optimum_has_exactly_zero_risk() {
        let box2 = FeasibleRegion::cube(2, 1.0).unwrap();
        let model = GaussianModel::standard(vecn(&[1.0, -0.5]), 1).unwrap();
        let optimum = box2.linear_minimize(model.mu()).unwrap();
        let rule = DecisionRule::Constant {
            point: optimum.iter().copied().collect(),
        };
        let est = estimate_risk(&rule, ObjectiveKind::Linear, &model, &box2, 500, 1).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn unconstrained_quadratic_risk_matches_chi_square_mean() {
        // E||xbar - mu||^2 = d/n = 3 when the box never binds.
        let region = FeasibleRegion::cube(3, 1e6).unwrap();
        let model = GaussianModel::standard(vecn(&[0.0, 0.0, 0.0]), 1).unwrap();
        let est = estimate_risk(
            &DecisionRule::SampleAverageQuadratic,
            ObjectiveKind::Quadratic,
            &model,
            &region,
            1_000_000,
            7,
        )
        .unwrap();
        assert!(
            (est.value - 3.0).abs() <= 3.0 * est.std_error,
            "value {} se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn one_dimensional_linear_risk_matches_normal_cdf() {
        // loss is 2 exactly when the sample mean goes negative
        let model = GaussianModel::standard(vecn(&[1.0]), 1).unwrap();
        let est = estimate_risk(
            &DecisionRule::SampleAverageLinear,
            ObjectiveKind::Linear,
            &model,
            &interval(),
            200_000,
            11,
        )
        .unwrap();
        let target = 2.0 * normal_cdf(-1.0);
        assert!(
            (est.value - target).abs() <= 3.0 * est.std_error,
            "value {} target {target} se {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let model = GaussianModel::standard(vecn(&[1.0]), 1).unwrap();
        let q = risk_quadrature_1d(
            &DecisionRule::SampleAverageLinear,
            ObjectiveKind::Linear,
            &model,
            &interval(),
        )
        .unwrap();
        assert_relative_eq!(q, 2.0 * normal_cdf(-1.0), epsilon = 1e-10);

        // zero state: linear risk is identically zero
        let model0 = GaussianModel::standard(vecn(&[0.0]), 1).unwrap();
        let q0 = risk_quadrature_1d(
            &DecisionRule::SampleAverageLinear,
            ObjectiveKind::Linear,
            &model0,
            &interval(),
        )
        .unwrap();
        assert!(q0.abs() <= 1e-12, "got {q0}");

        // quadratic at the origin: E[min(|xbar|, 1)^2] = 1 - 2 phi(1)
        let q2 = risk_quadrature_1d(
            &DecisionRule::SampleAverageQuadratic,
            ObjectiveKind::Quadratic,
            &model0,
            &interval(),
        )
        .unwrap();
        let phi1 = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(q2, 1.0 - 2.0 * phi1, epsilon = 1e-10);
    }

    #[test]
    fn quadrature_rejects_higher_dimension() {
        let model = GaussianModel::standard(vecn(&[0.0, 0.0]), 1).unwrap();
        let region = FeasibleRegion::cube(2, 1.0).unwrap();
        assert!(matches!(
            risk_quadrature_1d(
                &DecisionRule::SampleAverageLinear,
                ObjectiveKind::Linear,
                &model,
                &region
            ),
            Err(RiskError::QuadratureNeedsDim1(2))
        ));
    }

    #[test]
    fn self_comparison_is_bitwise_zero_and_no_dominance() {
        let region = FeasibleRegion::cube(2, 1.0).unwrap();
        let grid = vec![
            GaussianModel::standard(vecn(&[0.0, 0.0]), 1).unwrap(),
            GaussianModel::standard(vecn(&[0.7, -0.3]), 1).unwrap(),
        ];
        let cmp = compare_rules(
            &DecisionRule::SampleAverageQuadratic,
            &DecisionRule::SampleAverageQuadratic,
            ObjectiveKind::Quadratic,
            &grid,
            &region,
            5_000,
            3,
        )
        .unwrap();
        for row in &cmp.rows {
            assert_eq!(row.diff, 0.0);
            assert_eq!(row.diff_std_error, 0.0);
        }
        assert_eq!(cmp.verdict, Verdict::NoDominance);
    }

    #[test]
    fn james_stein_dominates_in_the_unconstrained_stein_setting() {
        let region = FeasibleRegion::cube(3, 1e6).unwrap();
        let e1 = |c: f64| {
            GaussianModel::standard(vecn(&[c, 0.0, 0.0]), 1).unwrap()
        };
        let grid = vec![e1(0.0), e1(1.0), e1(2.0), e1(4.0)];
        let js = DecisionRule::JamesStein {
            projected: true,
            positive_part: false,
        };
        let cmp = compare_rules(
            &js,
            &DecisionRule::SampleAverageQuadratic,
            ObjectiveKind::Quadratic,
            &grid,
            &region,
            200_000,
            5,
        )
        .unwrap();
        assert_eq!(cmp.verdict, Verdict::ADominates);
        let origin = &cmp.rows[0];
        assert!(
            (origin.diff + 1.0).abs() <= 0.05,
            "difference at the origin should be about -1, got {}",
            origin.diff
        );
    }

    #[test]
    fn comparison_at_zero_state_is_exactly_zero_for_linear() {
        let region = FeasibleRegion::cube(2, 1.0).unwrap();
        let grid = vec![GaussianModel::standard(vecn(&[0.0, 0.0]), 1).unwrap()];
        let cmp = compare_rules(
            &DecisionRule::SampleAverageLinear,
            &DecisionRule::Constant {
                point: vec![0.0, 0.0],
            },
            ObjectiveKind::Linear,
            &grid,
            &region,
            2_000,
            9,
        )
        .unwrap();
        assert_eq!(cmp.rows[0].diff, 0.0);
    }

    #[test]
    fn too_few_replications_rejected() {
        let region = interval();
        let model = GaussianModel::standard(vecn(&[0.0]), 1).unwrap();
        assert!(matches!(
            estimate_risk(
                &DecisionRule::SampleAverageLinear,
                ObjectiveKind::Linear,
                &model,
                &region,
                1,
                0
            ),
            Err(RiskError::TooFewReplications { .. })
        ));
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        // degree-7 polynomial integrated exactly on [-1, 1]
        let exact = 2.0 / 3.0 + 2.0 / 5.0;
        let approx: f64 = legendre_nodes()
            .iter()
            .map(|&(t, w)| w * (t * t + t * t * t * t + t * t * t * t * t * t * t))
            .sum();
        assert_relative_eq!(approx, exact, epsilon = 1e-13);
    }
}
