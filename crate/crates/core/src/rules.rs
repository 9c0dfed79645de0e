//! The decision rules under study.
//!
//! A rule maps an observed sample to a point of the feasible region. All
//! rules here are deterministic and depend on the sample only through its
//! mean, so two samples with equal means produce identical actions.
//!
//! * `SampleAverageLinear` — argmin of `xbar^T x` over the region.
//! * `SampleAverageQuadratic` — projection of `xbar` onto the region (the
//!   minimizer of the sample-average quadratic objective).
//! * `BayesScaledLinear` — posterior-mean rule for the linear objective under
//!   a centered Gaussian prior. The posterior mean is `shrink * xbar`, and a
//!   positive rescaling of the objective vector never moves the argmin, so
//!   the action coincides with `SampleAverageLinear` exactly; the rule
//!   delegates to it, which makes the equivalence structural rather than a
//!   floating-point accident.
//! * `BayesProjectedQuadratic` — projection of `s * xbar` with
//!   `s = n tau^2 / (n tau^2 + 1)`, the posterior mean under the prior
//!   `N(0, tau^2 Sigma)`.
//! * `JamesStein` — shrinkage estimator `(1 - (d-2)/(n ||xbar||^2)) xbar`,
//!   optionally clipped at zero (`positive_part`) and/or projected into the
//!   region. The unprojected form demands a region that already contains the
//!   output; use an effectively unconstrained box for the classical setting.
//! * `Constant` — ignores the data and plays a fixed feasible point.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FeasibleRegion, GeometryError};
use crate::stochastics::Sample;

/// Tolerance for feasibility checks at rule application time.
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("rule output {output:?} lies outside the feasible region")]
    ConstraintViolation { output: Vec<f64> },
    #[error("constant point lies outside the feasible region")]
    ConstantOutsideRegion,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Enumerated estimators mapping samples to feasible actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DecisionRule {
    SampleAverageLinear,
    SampleAverageQuadratic,
    BayesScaledLinear { shrink: f64 },
    BayesProjectedQuadratic { tau: f64 },
    JamesStein { projected: bool, positive_part: bool },
    Constant { point: Vec<f64> },
}

impl DecisionRule {
    /// Parameter sanity independent of any region or sample.
    pub fn validate(&self) -> Result<(), RuleError> {
        match self {
            DecisionRule::BayesScaledLinear { shrink } => {
                if !(shrink.is_finite() && *shrink > 0.0 && *shrink <= 1.0) {
                    return Err(RuleError::InvalidRule(format!(
                        "shrink must lie in (0, 1], got {shrink}"
                    )));
                }
            }
            DecisionRule::BayesProjectedQuadratic { tau } => {
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(RuleError::InvalidRule(format!(
                        "tau must be a positive real, got {tau}"
                    )));
                }
            }
            DecisionRule::Constant { point } => {
                if point.is_empty() || !point.iter().all(|x| x.is_finite()) {
                    return Err(RuleError::InvalidRule(
                        "constant point must be nonempty and finite".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Apply the rule to a sample, producing a point of `region`.
    pub fn apply(
        &self,
        region: &FeasibleRegion,
        sample: &Sample,
    ) -> Result<DVector<f64>, RuleError> {
        self.validate()?;
        let xbar = sample.mean();
        match self {
            DecisionRule::SampleAverageLinear | DecisionRule::BayesScaledLinear { .. } => {
                Ok(region.linear_minimize(xbar)?)
            }
            DecisionRule::SampleAverageQuadratic => Ok(region.project(xbar)?),
            DecisionRule::BayesProjectedQuadratic { tau } => {
                let n = sample.n() as f64;
                let s = n * tau * tau / (n * tau * tau + 1.0);
                Ok(region.project(&(xbar * s))?)
            }
            DecisionRule::JamesStein {
                projected,
                positive_part,
            } => {
                let d = xbar.len();
                if d < 3 {
                    return Err(RuleError::InvalidRule(format!(
                        "the James-Stein rule needs dimension >= 3, got {d}"
                    )));
                }
                let norm_sq = xbar.norm_squared();
                let shrunk = if norm_sq > 0.0 {
                    let mut factor = 1.0 - (d as f64 - 2.0) / (sample.n() as f64 * norm_sq);
                    if *positive_part {
                        factor = factor.max(0.0);
                    }
                    xbar * factor
                } else {
                    // measure-zero origin; both variants agree on the zero action
                    DVector::zeros(d)
                };
                if *projected {
                    Ok(region.project(&shrunk)?)
                } else {
                    if !region.contains(&shrunk, FEASIBILITY_TOL)? {
                        return Err(RuleError::ConstraintViolation {
                            output: shrunk.iter().copied().collect(),
                        });
                    }
                    Ok(shrunk)
                }
            }
            DecisionRule::Constant { point } => {
                let p = DVector::from_vec(point.clone());
                if !region.contains(&p, FEASIBILITY_TOL)? {
                    return Err(RuleError::ConstantOutsideRegion);
                }
                Ok(p)
            }
        }
    }

    /// Stable label used in report files. Contains no commas.
    pub fn label(&self) -> String {
        match self {
            DecisionRule::SampleAverageLinear => "sample_average_linear".into(),
            DecisionRule::SampleAverageQuadratic => "sample_average_quadratic".into(),
            DecisionRule::BayesScaledLinear { shrink } => {
                format!("bayes_scaled_linear(shrink={shrink})")
            }
            DecisionRule::BayesProjectedQuadratic { tau } => {
                format!("bayes_projected_quadratic(tau={tau})")
            }
            DecisionRule::JamesStein {
                projected,
                positive_part,
            } => format!("james_stein(projected={projected};positive_part={positive_part})"),
            DecisionRule::Constant { point } => {
                let coords: Vec<String> = point.iter().map(|x| x.to_string()).collect();
                format!("constant([{}])", coords.join(";"))
            }
        }
    }
}
