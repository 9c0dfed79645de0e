//! Compact feasible regions and their elementary convex geometry.
//!
//! Three region shapes are supported: axis-aligned boxes, Euclidean balls,
//! and polytopes given by their vertex list. The operations are the ones the
//! decision rules and the prior scans are built from:
//!
//! * [`FeasibleRegion::linear_minimize`] — argmin of `c^T x` over the region,
//!   with a fixed deterministic tie-break so every downstream Monte Carlo run
//!   is reproducible,
//! * [`FeasibleRegion::project`] — Euclidean projection (boxes and balls),
//! * [`FeasibleRegion::face_signature`] — which face/normal-cone cell of a
//!   (scaled) box a point falls into,
//! * [`FeasibleRegion::diameter`].
//!
//! For a box centered at the origin the plane decomposes into cells
//! `F + N_F`, one per face `F` (`N_F` the normal cone at `F`). A point's cell
//! is recorded per coordinate: `Plus` if the coordinate sits at or beyond the
//! upper bound, `Minus` at or beyond the lower bound, `Zero` strictly between.
//! Projections of any point in a cell land on the face that labels it, which
//! is what makes the scaled-box inner products in the Bayes-prior scans
//! vanish coordinate by coordinate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest vertex count for which exact convex-hull membership is attempted.
const MEMBERSHIP_VERTEX_CAP: usize = 16;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: region is {region}-dimensional, input is {input}-dimensional")]
    DimensionMismatch { region: usize, input: usize },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("projection onto a vertex polytope is not supported")]
    UnsupportedProjection,
    #[error("face signatures are only defined for box regions")]
    NotABox,
    #[error("face signature scale must be >= 1, got {0}")]
    InvalidScale(f64),
    #[error("exact hull membership supports at most {cap} vertices, got {got}")]
    MembershipTooLarge { cap: usize, got: usize },
}

/// A compact feasible set over which the decision rules act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionWire", into = "RegionWire")]
pub enum FeasibleRegion {
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
    VPolytope {
        vertices: Vec<DVector<f64>>,
    },
}

/// On-disk form: `{"box": {...}}`, `{"ball": {...}}`, `{"vpolytope": {...}}`.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RegionWire {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Vpolytope { vertices: Vec<Vec<f64>> },
}

impl TryFrom<RegionWire> for FeasibleRegion {
    type Error = GeometryError;

    fn try_from(wire: RegionWire) -> Result<Self, GeometryError> {
        match wire {
            RegionWire::Box { lower, upper } => {
                FeasibleRegion::new_box(DVector::from_vec(lower), DVector::from_vec(upper))
            }
            RegionWire::Ball { center, radius } => {
                FeasibleRegion::new_ball(DVector::from_vec(center), radius)
            }
            RegionWire::Vpolytope { vertices } => FeasibleRegion::new_vpolytope(
                vertices.into_iter().map(DVector::from_vec).collect(),
            ),
        }
    }
}

impl From<FeasibleRegion> for RegionWire {
    fn from(region: FeasibleRegion) -> Self {
        match region {
            FeasibleRegion::Box { lower, upper } => RegionWire::Box {
                lower: lower.iter().copied().collect(),
                upper: upper.iter().copied().collect(),
            },
            FeasibleRegion::Ball { center, radius } => RegionWire::Ball {
                center: center.iter().copied().collect(),
                radius,
            },
            FeasibleRegion::VPolytope { vertices } => RegionWire::Vpolytope {
                vertices: vertices
                    .iter()
                    .map(|v| v.iter().copied().collect())
                    .collect(),
            },
        }
    }
}

/// Per-coordinate cell label for the box face decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceLabel {
    Plus,
    Minus,
    Zero,
}

/// Which face/normal-cone cell of a scaled box a point belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceSignature {
    labels: Vec<FaceLabel>,
}

impl FaceSignature {
    pub fn labels(&self) -> &[FaceLabel] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// True when at least one coordinate is pinned to a bound, i.e. the cell
    /// belongs to a proper face rather than the full box.
    pub fn touches_boundary(&self) -> bool {
        self.labels.iter().any(|l| *l != FaceLabel::Zero)
    }

    /// True when every coordinate is pinned, i.e. the cell is a vertex cone.
    pub fn is_vertex(&self) -> bool {
        self.labels.iter().all(|l| *l != FaceLabel::Zero)
    }
}

impl FeasibleRegion {
    pub fn new_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                region: lower.len(),
                input: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(GeometryError::InvalidRegion(
                "box must have dimension >= 1".into(),
            ));
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(GeometryError::InvalidRegion(format!(
                    "box bounds must be finite, coordinate {i} is ({}, {})",
                    lower[i], upper[i]
                )));
            }
            if lower[i] > upper[i] {
                return Err(GeometryError::InvalidRegion(format!(
                    "box lower bound exceeds upper bound at coordinate {i}: {} > {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(FeasibleRegion::Box { lower, upper })
    }

    pub fn new_ball(center: DVector<f64>, radius: f64) -> Result<Self, GeometryError> {
        if center.is_empty() {
            return Err(GeometryError::InvalidRegion(
                "ball must have dimension >= 1".into(),
            ));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidRegion(
                "ball center must be finite".into(),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRegion(format!(
                "ball radius must be a positive real, got {radius}"
            )));
        }
        Ok(FeasibleRegion::Ball { center, radius })
    }

    pub fn new_vpolytope(vertices: Vec<DVector<f64>>) -> Result<Self, GeometryError> {
        let Some(first) = vertices.first() else {
            return Err(GeometryError::InvalidRegion(
                "vertex polytope needs at least one vertex".into(),
            ));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(GeometryError::InvalidRegion(
                "vertices must have dimension >= 1".into(),
            ));
        }
        for (k, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    region: dim,
                    input: v.len(),
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(GeometryError::InvalidRegion(format!(
                    "vertex {k} has a non-finite coordinate"
                )));
            }
        }
        Ok(FeasibleRegion::VPolytope { vertices })
    }

    /// Symmetric box `[-half, half]` from per-coordinate half widths.
    pub fn symmetric_box(half_widths: DVector<f64>) -> Result<Self, GeometryError> {
        let lower = -&half_widths;
        FeasibleRegion::new_box(lower, half_widths)
    }

    /// Cube `[-h, h]^d`.
    pub fn cube(dim: usize, h: f64) -> Result<Self, GeometryError> {
        FeasibleRegion::symmetric_box(DVector::from_element(dim, h))
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleRegion::Box { lower, .. } => lower.len(),
            FeasibleRegion::Ball { center, .. } => center.len(),
            FeasibleRegion::VPolytope { vertices } => vertices[0].len(),
        }
    }

    fn check_dim(&self, input: usize) -> Result<(), GeometryError> {
        if self.dim() != input {
            return Err(GeometryError::DimensionMismatch {
                region: self.dim(),
                input,
            });
        }
        Ok(())
    }

    /// Minimizer of `c^T x` over the region.
    ///
    /// Ties are broken deterministically: box coordinates resolve to the lower
    /// bound unless the coefficient is strictly negative, a ball with `c = 0`
    /// returns its center, and a vertex polytope returns the lexicographically
    /// smallest minimizing vertex.
    pub fn linear_minimize(&self, c: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        self.check_dim(c.len())?;
        match self {
            FeasibleRegion::Box { lower, upper } => {
                let mut x = lower.clone();
                for i in 0..c.len() {
                    if c[i] < 0.0 {
                        x[i] = upper[i];
                    }
                }
                Ok(x)
            }
            FeasibleRegion::Ball { center, radius } => {
                let norm = c.norm();
                if norm == 0.0 {
                    return Ok(center.clone());
                }
                Ok(center - c * (*radius / norm))
            }
            FeasibleRegion::VPolytope { vertices } => {
                let mut best = &vertices[0];
                let mut best_val = c.dot(best);
                for v in &vertices[1..] {
                    let val = c.dot(v);
                    if val < best_val || (val == best_val && lex_less(v, best)) {
                        best = v;
                        best_val = val;
                    }
                }
                Ok(best.clone())
            }
        }
    }

    /// Euclidean projection onto the region. Boxes clamp coordinatewise, balls
    /// rescale radially; vertex polytopes are not supported.
    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        self.check_dim(y.len())?;
        match self {
            FeasibleRegion::Box { lower, upper } => {
                let mut p = y.clone();
                for i in 0..y.len() {
                    p[i] = p[i].clamp(lower[i], upper[i]);
                }
                Ok(p)
            }
            FeasibleRegion::Ball { center, radius } => {
                let offset = y - center;
                let norm = offset.norm();
                if norm <= *radius {
                    Ok(y.clone())
                } else {
                    Ok(center + offset * (*radius / norm))
                }
            }
            FeasibleRegion::VPolytope { .. } => Err(GeometryError::UnsupportedProjection),
        }
    }

    /// Cell of the face decomposition of the box scaled by `scale >= 1` that
    /// contains `y`, after translating to the box center.
    ///
    /// Coordinate `i` is `Plus` iff the centered `y_i >= scale * u_i`, `Minus`
    /// iff `y_i <= -scale * u_i`, and `Zero` otherwise, where `u_i` is the
    /// centered half-width.
    pub fn face_signature(
        &self,
        y: &DVector<f64>,
        scale: f64,
    ) -> Result<FaceSignature, GeometryError> {
        let FeasibleRegion::Box { lower, upper } = self else {
            return Err(GeometryError::NotABox);
        };
        self.check_dim(y.len())?;
        if !(scale.is_finite() && scale >= 1.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        let labels = (0..y.len())
            .map(|i| {
                let center = 0.5 * (lower[i] + upper[i]);
                let half = 0.5 * (upper[i] - lower[i]);
                let yc = y[i] - center;
                if yc >= scale * half {
                    FaceLabel::Plus
                } else if yc <= -scale * half {
                    FaceLabel::Minus
                } else {
                    FaceLabel::Zero
                }
            })
            .collect();
        Ok(FaceSignature { labels })
    }

    /// Exact diameter: `||u - l||` for boxes, `2R` for balls, and the largest
    /// pairwise vertex distance for polytopes.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleRegion::Box { lower, upper } => (upper - lower).norm(),
            FeasibleRegion::Ball { radius, .. } => 2.0 * radius,
            FeasibleRegion::VPolytope { vertices } => {
                let mut best = 0.0f64;
                for (k, v) in vertices.iter().enumerate() {
                    for w in &vertices[k + 1..] {
                        best = best.max((v - w).norm());
                    }
                }
                best
            }
        }
    }

    /// Membership test with absolute tolerance `tol`.
    ///
    /// For vertex polytopes the test is exact convex-hull membership via
    /// enumeration of candidate supports (Caratheodory subsets), kept
    /// tractable by refusing vertex lists longer than a small cap. Points that
    /// coincide with a vertex short-circuit the enumeration.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool, GeometryError> {
        self.check_dim(x.len())?;
        match self {
            FeasibleRegion::Box { lower, upper } => {
                Ok((0..x.len()).all(|i| x[i] >= lower[i] - tol && x[i] <= upper[i] + tol))
            }
            FeasibleRegion::Ball { center, radius } => Ok((x - center).norm() <= radius + tol),
            FeasibleRegion::VPolytope { vertices } => {
                if vertices.iter().any(|v| (x - v).norm() <= tol) {
                    return Ok(true);
                }
                if vertices.len() > MEMBERSHIP_VERTEX_CAP {
                    return Err(GeometryError::MembershipTooLarge {
                        cap: MEMBERSHIP_VERTEX_CAP,
                        got: vertices.len(),
                    });
                }
                Ok(hull_distance(vertices, x) <= tol)
            }
        }
    }
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for i in 0..a.len() {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

/// Distance from `x` to the convex hull of `vertices`.
///
/// The projection onto the hull has an affinely independent support of at most
/// `d + 1` vertices with nonnegative barycentric weights, so scanning all
/// subsets up to that size and keeping the best nonnegative-weight candidate
/// is exact.
fn hull_distance(vertices: &[DVector<f64>], x: &DVector<f64>) -> f64 {
    let d = x.len();
    let m = vertices.len();
    let max_size = (d + 1).min(m);
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = Vec::with_capacity(max_size);

    fn visit(
        vertices: &[DVector<f64>],
        x: &DVector<f64>,
        subset: &mut Vec<usize>,
        start: usize,
        max_size: usize,
        best: &mut f64,
    ) {
        if !subset.is_empty() {
            if let Some(dist) = affine_projection_distance(vertices, subset, x) {
                *best = best.min(dist);
            }
        }
        if subset.len() == max_size {
            return;
        }
        for k in start..vertices.len() {
            subset.push(k);
            visit(vertices, x, subset, k + 1, max_size, best);
            subset.pop();
        }
    }

    visit(vertices, x, &mut subset, 0, max_size, &mut best);
    best
}

/// Projection of `x` onto the affine hull of the chosen vertices, accepted
/// only when all barycentric weights are (numerically) nonnegative.
fn affine_projection_distance(
    vertices: &[DVector<f64>],
    subset: &[usize],
    x: &DVector<f64>,
) -> Option<f64> {
    let k = subset.len();
    if k == 1 {
        return Some((x - &vertices[subset[0]]).norm());
    }
    // KKT system for min ||x - V w||^2 subject to sum w = 1.
    let mut system = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (a, &ia) in subset.iter().enumerate() {
        for (b, &ib) in subset.iter().enumerate() {
            system[(a, b)] = vertices[ia].dot(&vertices[ib]);
        }
        system[(a, k)] = 1.0;
        system[(k, a)] = 1.0;
        rhs[a] = vertices[ia].dot(x);
    }
    rhs[k] = 1.0;
    let sol = system.lu().solve(&rhs)?;
    if sol.rows(0, k).iter().any(|&w| w < -1e-10) {
        return None;
    }
    let mut p = DVector::zeros(x.len());
    for (a, &ia) in subset.iter().enumerate() {
        p += &vertices[ia] * sol[a];
    }
    Some((x - p).norm())
}
