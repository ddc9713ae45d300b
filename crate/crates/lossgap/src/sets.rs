//! Convex feasibility sets and Bregman projections.
//!
//! A [`ConstraintSet`] encodes a closed convex region of prediction space:
//! halfspaces, boxes, affine equalities, per-coordinate bounds on the
//! simplex, and intersections. [`project`] computes the Bregman projection
//!
//! ```text
//! Π_C(x) = argmin_{q ∈ C} D_Φ(q‖x)
//! ```
//!
//! in mirror form: an infeasible halfspace is resolved by solving the scalar
//! dual-multiplier equation ⟨a, ∇Φ*(∇Φ(x) − νa)⟩ = b for ν ≥ 0 with
//! safeguarded bisection; boxes and affine equalities under the quadratic
//! potential use closed forms (clamp; normal equations); remaining
//! combinations run the same dual root-finding per constraint inside the
//! cyclic Bregman–Dykstra loop of [`project_intersection`].
//!
//! The projection satisfies the variational inequality
//! ⟨∇Φ(q*) − ∇Φ(x), q − q*⟩ ≥ 0 for all feasible q, which is exactly the
//! generalized Pythagorean inequality reported by [`pythagorean_gap`]:
//! D(q‖x) ≥ D(q‖Π_C(x)) + D(Π_C(x)‖x).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{BregmanError, Point, Potential};

/// Feasibility tolerance used by the geodesic-convexity check.
const GCONVEX_TOL: f64 = 1e-9;

/// Activity tolerance for identifying active constraints in
/// [`normal_alignment`].
const ACTIVE_TOL: f64 = 1e-8;

/// Errors from set construction, membership, and projection.
#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("empty feasible region (Assumption 1 violated): {0}")]
    EmptyIntersection(String),

    #[error(
        "projection did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    Convergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("point infeasible for the set (violation {0:.3e})")]
    InfeasiblePoint(f64),

    #[error("intersection variant not supported here; use project_intersection")]
    IsIntersection,

    #[error("could not sample a feasible point after {0} attempts")]
    SamplingFailed(usize),

    #[error("orthogonality diagnostic undefined: {0}")]
    UndefinedDiagnostic(String),

    #[error(transparent)]
    Domain(#[from] BregmanError),
}

/// Solver options for projections.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionOptions {
    /// Maximum Dykstra sweeps (and bracket expansions).
    pub max_iterations: usize,
    /// Convergence is declared when both the maximum primal change per sweep
    /// and the feasibility residual fall at or below this value.
    pub tolerance: f64,
    /// Simplex coordinates driven below this margin are clamped to it and the
    /// point renormalized, with the outcome flagged.
    pub interior_margin: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_iterations: 10_000,
            tolerance: 1e-9,
            interior_margin: 1e-12,
        }
    }
}

impl ProjectionOptions {
    fn validate(&self) -> Result<(), SetError> {
        if self.max_iterations == 0 {
            return Err(SetError::InvalidSet("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(SetError::InvalidSet("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// A closed convex feasibility region.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ConstraintSet {
    /// ⟨normal, x⟩ ≤ offset.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// lo ≤ x ≤ hi componentwise; ±∞ bounds permitted.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// A x = c with consistent rows.
    AffineEquality { a: Vec<Vec<f64>>, c: Vec<f64> },
    /// Per-coordinate bounds intersected with the probability simplex.
    SimplexSubset { lo: Vec<f64>, hi: Vec<f64> },
    /// Conjunction of member sets. Nonemptiness is verified at construction.
    Intersection(Vec<ConstraintSet>),
}

impl ConstraintSet {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, SetError> {
        if normal.is_empty() || normal.iter().all(|a| *a == 0.0) {
            return Err(SetError::InvalidSet("halfspace normal must be nonzero".into()));
        }
        if normal.iter().any(|a| !a.is_finite()) || !offset.is_finite() {
            return Err(SetError::InvalidSet("halfspace parameters must be finite".into()));
        }
        Ok(ConstraintSet::Halfspace { normal, offset })
    }

    pub fn box_set(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SetError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(SetError::InvalidSet("box bounds must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h || l.is_nan() || h.is_nan()) {
            return Err(SetError::InvalidSet("box requires lo <= hi componentwise".into()));
        }
        Ok(ConstraintSet::Box { lo, hi })
    }

    /// The whole space: a box with infinite bounds.
    pub fn whole_space(dim: usize) -> Self {
        ConstraintSet::Box {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn affine_equality(a: Vec<Vec<f64>>, c: Vec<f64>) -> Result<Self, SetError> {
        if a.is_empty() || a.len() != c.len() {
            return Err(SetError::InvalidSet("affine system shape mismatch".into()));
        }
        let n = a[0].len();
        if n == 0 || a.iter().any(|row| row.len() != n) {
            return Err(SetError::InvalidSet("affine rows must share a nonzero width".into()));
        }
        // Reduce to independent rows and reject inconsistent systems now, so
        // downstream solvers can assume full row rank.
        let (a, c) = row_reduce(a, c)?;
        if a.is_empty() {
            return Err(SetError::InvalidSet(
                "affine system reduces to no constraints".into(),
            ));
        }
        Ok(ConstraintSet::AffineEquality { a, c })
    }

    pub fn simplex_subset(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SetError> {
        if lo.len() != hi.len() || lo.len() < 2 {
            return Err(SetError::InvalidSet("simplex subset needs dim >= 2".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(SetError::InvalidSet("simplex subset requires lo <= hi".into()));
        }
        let lo: Vec<f64> = lo.into_iter().map(|l| l.max(0.0)).collect();
        let hi: Vec<f64> = hi.into_iter().map(|h| h.min(1.0)).collect();
        let (slo, shi): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
        if slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12 {
            return Err(SetError::EmptyIntersection(format!(
                "bounds exclude the simplex: sum(lo)={slo}, sum(hi)={shi}"
            )));
        }
        Ok(ConstraintSet::SimplexSubset { lo, hi })
    }

    /// Build an intersection, verifying nonemptiness with a Euclidean
    /// alternating-projection feasibility pass from the analytic center of
    /// any box member (or the uniform simplex point for simplex subsets).
    pub fn intersection(members: Vec<ConstraintSet>) -> Result<Self, SetError> {
        if members.is_empty() {
            return Err(SetError::InvalidSet("intersection needs at least one member".into()));
        }
        let dim = members[0].dim();
        for m in &members {
            if m.dim() != dim {
                return Err(SetError::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
        }
        let set = ConstraintSet::Intersection(members);
        let phi = Potential::squared_euclidean(dim).map_err(SetError::Domain)?;
        let opts = ProjectionOptions::default();
        verify_nonempty(&phi, std::slice::from_ref(&set), &opts)?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Halfspace { normal, .. } => normal.len(),
            ConstraintSet::Box { lo, .. } => lo.len(),
            ConstraintSet::AffineEquality { a, .. } => a[0].len(),
            ConstraintSet::SimplexSubset { lo, .. } => lo.len(),
            ConstraintSet::Intersection(members) => members[0].dim(),
        }
    }

    /// Worst constraint violation at `x` (0 when feasible). For simplex
    /// subsets this includes the deviation of the coordinate sum from one.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintSet::Halfspace { normal, offset } => (dot(normal, x) - offset).max(0.0),
            ConstraintSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| (l - xi).max(0.0).max(xi - h))
                .fold(0.0, f64::max),
            ConstraintSet::AffineEquality { a, c } => a
                .iter()
                .zip(c)
                .map(|(row, ci)| (dot(row, x) - ci).abs())
                .fold(0.0, f64::max),
            ConstraintSet::SimplexSubset { lo, hi } => {
                let bounds = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(xi, (l, h))| (l - xi).max(0.0).max(xi - h))
                    .fold(0.0, f64::max);
                let sum: f64 = x.iter().sum();
                bounds.max((sum - 1.0).abs())
            }
            ConstraintSet::Intersection(members) => members
                .iter()
                .map(|m| m.violation(x))
                .fold(0.0, f64::max),
        }
    }

    /// True iff all constraints are satisfied within `tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool, SetError> {
        if x.len() != self.dim() {
            return Err(SetError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.violation(x.coords()) <= tol)
    }
}

/// Result of a projection solve.
#[derive(Clone, Debug)]
pub struct Projection {
    pub point: Point,
    /// Dykstra sweeps used (1 for closed-form or single-constraint solves).
    pub sweeps: usize,
    /// Feasibility residual of the returned point.
    pub residual: f64,
    /// Set when simplex boundary clamping was applied.
    pub clamped: bool,
}

// ---------------------------------------------------------------------------
// Atomic constraints: each (set, potential) pair compiles to constraints with
// a direct single-constraint projector.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum Atom {
    Halfspace { a: Vec<f64>, b: f64 },
    EqualityRow { a: Vec<f64>, c: f64 },
    /// Componentwise clamp under the (weighted) quadratic potential.
    BoxClamp { lo: Vec<f64>, hi: Vec<f64> },
    /// Box ∩ simplex under negative entropy: multiplicative water-filling.
    BoxOnSimplex { lo: Vec<f64>, hi: Vec<f64> },
    /// Box ∩ simplex under the quadratic potential: additive water-filling.
    BoxShift { lo: Vec<f64>, hi: Vec<f64> },
    /// Affine equality under the quadratic potential: normal equations.
    AffineNormalEq { a: Vec<Vec<f64>>, c: Vec<f64> },
}

impl Atom {
    fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Atom::Halfspace { a, b } => (dot(a, x) - b).max(0.0),
            Atom::EqualityRow { a, c } => (dot(a, x) - c).abs(),
            Atom::BoxClamp { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| (l - xi).max(0.0).max(xi - h))
                .fold(0.0, f64::max),
            Atom::BoxOnSimplex { lo, hi } | Atom::BoxShift { lo, hi } => {
                let bounds = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(xi, (l, h))| (l - xi).max(0.0).max(xi - h))
                    .fold(0.0, f64::max);
                let sum: f64 = x.iter().sum();
                bounds.max((sum - 1.0).abs())
            }
            Atom::AffineNormalEq { a, c } => a
                .iter()
                .zip(c)
                .map(|(row, ci)| (dot(row, x) - ci).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn compile(phi: &Potential, set: &ConstraintSet, out: &mut Vec<Atom>) -> Result<(), SetError> {
    let dim = phi.dim();
    if set.dim() != dim {
        return Err(SetError::DimensionMismatch {
            expected: dim,
            got: set.dim(),
        });
    }
    match (set, phi) {
        (ConstraintSet::Halfspace { normal, offset }, _) => out.push(Atom::Halfspace {
            a: normal.clone(),
            b: *offset,
        }),
        (ConstraintSet::Box { lo, hi }, Potential::SquaredEuclidean { .. }) => {
            out.push(Atom::BoxClamp {
                lo: lo.clone(),
                hi: hi.clone(),
            })
        }
        (ConstraintSet::Box { lo, hi }, Potential::NegativeEntropy { .. }) => {
            out.push(Atom::BoxOnSimplex {
                lo: lo.iter().map(|l| l.max(0.0)).collect(),
                hi: hi.iter().map(|h| h.min(1.0)).collect(),
            })
        }
        (ConstraintSet::Box { lo, hi }, Potential::GaussianNatural) => {
            // Finite faces become halfspaces handled by the dual root-finder.
            for (i, h) in hi.iter().enumerate() {
                if h.is_finite() {
                    let mut a = vec![0.0; dim];
                    a[i] = 1.0;
                    out.push(Atom::Halfspace { a, b: *h });
                }
            }
            for (i, l) in lo.iter().enumerate() {
                if l.is_finite() {
                    let mut a = vec![0.0; dim];
                    a[i] = -1.0;
                    out.push(Atom::Halfspace { a, b: -l });
                }
            }
            if out.is_empty() {
                out.push(Atom::BoxClamp {
                    lo: lo.clone(),
                    hi: hi.clone(),
                });
            }
        }
        (ConstraintSet::SimplexSubset { lo, hi }, Potential::NegativeEntropy { .. }) => {
            out.push(Atom::BoxOnSimplex {
                lo: lo.clone(),
                hi: hi.clone(),
            })
        }
        (ConstraintSet::SimplexSubset { lo, hi }, Potential::SquaredEuclidean { .. }) => {
            out.push(Atom::BoxShift {
                lo: lo.clone(),
                hi: hi.clone(),
            })
        }
        (ConstraintSet::SimplexSubset { .. }, Potential::GaussianNatural) => {
            return Err(SetError::InvalidSet(
                "simplex subsets are not defined for the Gaussian potential domain".into(),
            ))
        }
        (ConstraintSet::AffineEquality { a, c }, Potential::SquaredEuclidean { .. }) => {
            out.push(Atom::AffineNormalEq {
                a: a.clone(),
                c: c.clone(),
            })
        }
        (ConstraintSet::AffineEquality { a, c }, _) => {
            for (row, ci) in a.iter().zip(c) {
                out.push(Atom::EqualityRow {
                    a: row.clone(),
                    c: *ci,
                });
            }
        }
        (ConstraintSet::Intersection(members), _) => {
            for m in members {
                compile(phi, m, out)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-constraint projectors.
// ---------------------------------------------------------------------------

/// Solve ⟨a, ∇Φ*(∇Φ(x) − νa)⟩ = b by safeguarded bisection over ν ≥ 0 (or
/// ν ∈ ℝ for an equality target). The map ν ↦ ⟨a, q(ν)⟩ is strictly
/// decreasing, so the bracketed root is unique.
fn dual_root_project(
    phi: &Potential,
    a: &[f64],
    target: f64,
    x: &Point,
    equality: bool,
    opts: &ProjectionOptions,
) -> Result<Point, SetError> {
    let d0 = phi.gradient(x)?.into_vec();
    let eval = |nu: f64| -> Result<(f64, Point), BregmanError> {
        let d: Vec<f64> = d0.iter().zip(a).map(|(di, ai)| di - nu * ai).collect();
        let q = phi.mirror_retract(&d)?;
        Ok((dot(a, q.coords()) - target, q))
    };

    let h0 = dot(a, x.coords()) - target;
    // lo keeps h > 0, hi keeps h <= 0 (signs mirrored for negative nu).
    let (mut lo, mut hi);
    if h0 > 0.0 {
        lo = 0.0;
        hi = 1.0;
        let mut expansions = 0usize;
        loop {
            match eval(hi) {
                Ok((v, _)) if v <= 0.0 => break,
                Ok(_) => {
                    lo = hi;
                    hi *= 2.0;
                }
                Err(_) => {
                    // Dual point left the mirror range; pull back toward lo.
                    hi = 0.5 * (lo + hi);
                    if hi - lo < 1e-14 * (1.0 + lo.abs()) {
                        let (_, last) = eval(lo).map_err(SetError::Domain)?;
                        return Err(SetError::Convergence {
                            iterations: expansions,
                            residual: h0,
                            last: last.into_vec(),
                        });
                    }
                }
            }
            expansions += 1;
            if expansions > opts.max_iterations || hi > 1e120 {
                return Err(SetError::Convergence {
                    iterations: expansions,
                    residual: h0,
                    last: x.coords().to_vec(),
                });
            }
        }
    } else if equality && h0 < 0.0 {
        // Equality target on the other side: search negative multipliers.
        hi = 0.0;
        lo = -1.0;
        let mut expansions = 0usize;
        loop {
            match eval(lo) {
                Ok((v, _)) if v > 0.0 => break,
                Ok(_) => {
                    hi = lo;
                    lo *= 2.0;
                }
                Err(_) => {
                    lo = 0.5 * (lo + hi);
                    if hi - lo < 1e-14 * (1.0 + hi.abs()) {
                        return Err(SetError::Convergence {
                            iterations: expansions,
                            residual: -h0,
                            last: x.coords().to_vec(),
                        });
                    }
                }
            }
            expansions += 1;
            if expansions > opts.max_iterations || lo < -1e120 {
                return Err(SetError::Convergence {
                    iterations: expansions,
                    residual: -h0,
                    last: x.coords().to_vec(),
                });
            }
        }
    } else {
        // Already on the feasible side.
        return Ok(x.clone());
    }

    let mut best: Option<Point> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Ok((v, q)) => {
                if v > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    best = Some(q);
                }
            }
            Err(_) => hi = mid,
        }
        if (hi - lo).abs() <= f64::EPSILON * (1.0 + hi.abs()) {
            break;
        }
    }
    match best {
        Some(q) => Ok(q),
        // hi never produced a feasible evaluation inside the loop; evaluate it.
        None => Ok(eval(hi).map_err(SetError::Domain)?.1),
    }
}

/// Projection onto {lo ≤ u ≤ hi} ∩ simplex under negative entropy: the KKT
/// system gives uᵢ = clamp(s·xᵢ) with the scale s solving Σ clamp(s·x) = 1.
fn water_fill_multiplicative(
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Result<Vec<f64>, SetError> {
    let (slo, shi): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
    if slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12 {
        return Err(SetError::EmptyIntersection(format!(
            "box excludes the simplex: sum(lo)={slo}, sum(hi)={shi}"
        )));
    }
    let mass = |s: f64| -> f64 {
        x.iter()
            .zip(lo.iter().zip(hi))
            .map(|(xi, (l, h))| (s * xi).clamp(*l, *h))
            .sum::<f64>()
    };
    let mut s_lo = 0.0;
    let mut s_hi = 1.0;
    let mut guard = 0;
    while mass(s_hi) < 1.0 {
        s_lo = s_hi;
        s_hi *= 2.0;
        guard += 1;
        if guard > 600 {
            return Err(SetError::Convergence {
                iterations: guard,
                residual: 1.0 - mass(s_hi),
                last: x.to_vec(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (s_lo + s_hi);
        if mass(mid) < 1.0 {
            s_lo = mid;
        } else {
            s_hi = mid;
        }
    }
    let s = 0.5 * (s_lo + s_hi);
    Ok(x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(xi, (l, h))| (s * xi).clamp(*l, *h))
        .collect())
}

/// Projection onto {lo ≤ u ≤ hi} ∩ simplex under the (weighted) quadratic
/// potential: uᵢ = clamp(xᵢ − μ/wᵢ) with μ solving Σu = 1.
fn water_fill_additive(
    x: &[f64],
    w: Option<&[f64]>,
    lo: &[f64],
    hi: &[f64],
) -> Result<Vec<f64>, SetError> {
    let (slo, shi): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
    if slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12 {
        return Err(SetError::EmptyIntersection(format!(
            "bounds exclude the simplex: sum(lo)={slo}, sum(hi)={shi}"
        )));
    }
    let inv_w = |i: usize| w.map_or(1.0, |w| 1.0 / w[i]);
    let mass = |mu: f64| -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, xi)| (xi - mu * inv_w(i)).clamp(lo[i], hi[i]))
            .sum::<f64>()
    };
    // mass is nonincreasing in mu; expand a two-sided bracket.
    let mut m_lo = -1.0;
    let mut m_hi = 1.0;
    let mut guard = 0;
    while mass(m_lo) < 1.0 {
        m_lo *= 2.0;
        guard += 1;
        if guard > 600 {
            return Err(SetError::Convergence {
                iterations: guard,
                residual: 1.0 - mass(m_lo),
                last: x.to_vec(),
            });
        }
    }
    while mass(m_hi) > 1.0 {
        m_hi *= 2.0;
        guard += 1;
        if guard > 1200 {
            return Err(SetError::Convergence {
                iterations: guard,
                residual: mass(m_hi) - 1.0,
                last: x.to_vec(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (m_lo + m_hi);
        if mass(mid) > 1.0 {
            m_lo = mid;
        } else {
            m_hi = mid;
        }
    }
    let mu = 0.5 * (m_lo + m_hi);
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| (xi - mu * inv_w(i)).clamp(lo[i], hi[i]))
        .collect())
}

fn project_atom(
    phi: &Potential,
    atom: &Atom,
    x: &Point,
    opts: &ProjectionOptions,
) -> Result<Point, SetError> {
    if atom.violation(x.coords()) <= 0.0 {
        return Ok(x.clone());
    }
    match atom {
        Atom::Halfspace { a, b } => dual_root_project(phi, a, *b, x, false, opts),
        Atom::EqualityRow { a, c } => dual_root_project(phi, a, *c, x, true, opts),
        Atom::BoxClamp { lo, hi } => Ok(Point::new(
            x.coords()
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| xi.clamp(*l, *h))
                .collect(),
        )),
        Atom::BoxOnSimplex { lo, hi } => {
            Ok(Point::new(water_fill_multiplicative(x.coords(), lo, hi)?))
        }
        Atom::BoxShift { lo, hi } => {
            let w = match phi {
                Potential::SquaredEuclidean { weights, .. } => weights.as_deref(),
                _ => None,
            };
            Ok(Point::new(water_fill_additive(x.coords(), w, lo, hi)?))
        }
        Atom::AffineNormalEq { a, c } => {
            let w = match phi {
                Potential::SquaredEuclidean { weights, .. } => weights.clone(),
                _ => None,
            };
            let k = a.len();
            // Solve (A W⁻¹ Aᵀ) ν = A x − c, then q = x − W⁻¹ Aᵀ ν.
            let inv_w = |j: usize| w.as_ref().map_or(1.0, |w| 1.0 / w[j]);
            let mut gram = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in 0..k {
                    gram[i][j] = a[i]
                        .iter()
                        .zip(&a[j])
                        .enumerate()
                        .map(|(t, (ai, aj))| ai * aj * inv_w(t))
                        .sum();
                }
            }
            let rhs: Vec<f64> = a
                .iter()
                .zip(c)
                .map(|(row, ci)| dot(row, x.coords()) - ci)
                .collect();
            let nu = solve_linear(gram, rhs).ok_or_else(|| {
                SetError::InvalidSet("affine system is rank-deficient after reduction".into())
            })?;
            let mut q = x.coords().to_vec();
            for (i, row) in a.iter().enumerate() {
                for (j, aij) in row.iter().enumerate() {
                    q[j] -= inv_w(j) * aij * nu[i];
                }
            }
            Ok(Point::new(q))
        }
    }
}

/// Clamp simplex coordinates at the interior margin and renormalize.
/// Returns true when clamping changed the point.
fn enforce_interior(phi: &Potential, q: &mut Vec<f64>, margin: f64) -> bool {
    if !phi.is_simplex() {
        return false;
    }
    let mut clamped = false;
    for c in q.iter_mut() {
        if *c < margin {
            *c = margin;
            clamped = true;
        }
    }
    if clamped {
        let sum: f64 = q.iter().sum();
        for c in q.iter_mut() {
            *c /= sum;
        }
    }
    clamped
}

// ---------------------------------------------------------------------------
// Public projection API.
// ---------------------------------------------------------------------------

/// Bregman projection of `x` onto a single (non-intersection) set.
///
/// Returns `x` unchanged when it is already feasible. On a halfspace the
/// solve is the scalar dual-multiplier bisection; boxes and affine systems
/// under the quadratic potential use closed forms.
pub fn project(
    phi: &Potential,
    set: &ConstraintSet,
    x: &Point,
    opts: &ProjectionOptions,
) -> Result<Projection, SetError> {
    opts.validate()?;
    phi.check_point(x)?;
    if matches!(set, ConstraintSet::Intersection(_)) {
        return Err(SetError::IsIntersection);
    }
    if set.violation(x.coords()) <= 0.0 {
        return Ok(Projection {
            point: x.clone(),
            sweeps: 0,
            residual: 0.0,
            clamped: false,
        });
    }
    let mut atoms = Vec::new();
    compile(phi, set, &mut atoms)?;
    let (point, sweeps) = if atoms.len() == 1 {
        (project_atom(phi, &atoms[0], x, opts)?, 1)
    } else {
        dykstra(phi, &atoms, x, opts)?
    };
    let mut coords = point.into_vec();
    let clamped = enforce_interior(phi, &mut coords, opts.interior_margin);
    let point = Point::new(coords);
    Ok(Projection {
        residual: set.violation(point.coords()),
        point,
        sweeps,
        clamped,
    })
}

/// Bregman projection onto the intersection of `sets` by cyclic
/// Bregman–Dykstra iteration with per-set dual corrections.
///
/// Nonemptiness of the intersection is verified first (Assumption 1); an
/// empty intersection is an error rather than a degraded answer. A single
/// member reduces exactly to [`project`].
pub fn project_intersection(
    phi: &Potential,
    sets: &[ConstraintSet],
    x: &Point,
    opts: &ProjectionOptions,
) -> Result<Projection, SetError> {
    opts.validate()?;
    phi.check_point(x)?;
    let mut flat: Vec<&ConstraintSet> = Vec::new();
    flatten(sets, &mut flat);
    if flat.is_empty() {
        return Err(SetError::InvalidSet("no sets given".into()));
    }
    if flat.len() == 1 {
        return project(phi, flat[0], x, opts);
    }
    verify_nonempty_refs(phi, &flat, opts)?;
    if flat.iter().all(|s| s.violation(x.coords()) <= 0.0) {
        return Ok(Projection {
            point: x.clone(),
            sweeps: 0,
            residual: 0.0,
            clamped: false,
        });
    }
    let mut atoms = Vec::new();
    for s in &flat {
        compile(phi, s, &mut atoms)?;
    }
    let (point, sweeps) = dykstra(phi, &atoms, x, opts)?;
    let mut coords = point.into_vec();
    let clamped = enforce_interior(phi, &mut coords, opts.interior_margin);
    let point = Point::new(coords);
    let residual = flat
        .iter()
        .map(|s| s.violation(point.coords()))
        .fold(0.0, f64::max);
    Ok(Projection {
        point,
        sweeps,
        residual,
        clamped,
    })
}

fn flatten<'a>(sets: &'a [ConstraintSet], out: &mut Vec<&'a ConstraintSet>) {
    for s in sets {
        match s {
            ConstraintSet::Intersection(members) => flatten(members, out),
            other => out.push(other),
        }
    }
}

/// Cyclic Bregman–Dykstra: per constraint i, retract the dual-corrected
/// iterate y = ∇Φ*(∇Φ(x) + r_i), project it, and update the correction
/// r_i ← (∇Φ(x) + r_i) − ∇Φ(x⁺).
fn dykstra(
    phi: &Potential,
    atoms: &[Atom],
    x0: &Point,
    opts: &ProjectionOptions,
) -> Result<(Point, usize), SetError> {
    let mut cur = x0.clone();
    let mut corrections: Vec<Option<Vec<f64>>> = vec![None; atoms.len()];
    for sweep in 1..=opts.max_iterations {
        let mut max_change = 0.0f64;
        for (atom, corr) in atoms.iter().zip(corrections.iter_mut()) {
            let (y, pre_dual) = match corr.take() {
                None => (cur.clone(), None),
                Some(r) => {
                    let d = phi.gradient(&cur)?.into_vec();
                    let shifted: Vec<f64> = d.iter().zip(&r).map(|(a, b)| a + b).collect();
                    let y = phi.mirror_retract(&shifted).map_err(|_| SetError::Convergence {
                        iterations: sweep,
                        residual: f64::NAN,
                        last: cur.coords().to_vec(),
                    })?;
                    (y, Some(shifted))
                }
            };
            let next = project_atom(phi, atom, &y, opts)?;
            let pre_dual = match pre_dual {
                Some(d) => d,
                None => phi.gradient(&cur)?.into_vec(),
            };
            let next_dual = phi.gradient(&next);
            // Boundary-grazing entropy iterates can leave the strict domain;
            // clamp inward before taking the gradient.
            let (next, next_dual) = match next_dual {
                Ok(d) => (next, d),
                Err(_) => {
                    let mut c = next.into_vec();
                    enforce_interior(phi, &mut c, opts.interior_margin.max(1e-300));
                    let p = Point::new(c);
                    let d = phi.gradient(&p)?;
                    (p, d)
                }
            };
            *corr = Some(
                pre_dual
                    .iter()
                    .zip(next_dual.coords())
                    .map(|(a, b)| a - b)
                    .collect(),
            );
            let change = cur
                .coords()
                .iter()
                .zip(next.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_change = max_change.max(change);
            cur = next;
        }
        let residual = atoms
            .iter()
            .map(|a| a.violation(cur.coords()))
            .fold(0.0, f64::max);
        if max_change <= opts.tolerance && residual <= opts.tolerance {
            return Ok((cur, sweep));
        }
    }
    let residual = atoms
        .iter()
        .map(|a| a.violation(cur.coords()))
        .fold(0.0, f64::max);
    Err(SetError::Convergence {
        iterations: opts.max_iterations,
        residual,
        last: cur.into_vec(),
    })
}

/// Feasibility verification for Assumption 1: a plain cyclic-projection pass
/// from the analytic center of any box member (or the uniform simplex point).
/// Converging to a point that still violates some set signals an empty
/// intersection.
pub(crate) fn verify_nonempty(
    phi: &Potential,
    sets: &[ConstraintSet],
    opts: &ProjectionOptions,
) -> Result<Point, SetError> {
    let mut flat = Vec::new();
    flatten(sets, &mut flat);
    verify_nonempty_refs(phi, &flat, opts)
}

fn verify_nonempty_refs(
    phi: &Potential,
    flat: &[&ConstraintSet],
    opts: &ProjectionOptions,
) -> Result<Point, SetError> {
    let mut atoms = Vec::new();
    for s in flat {
        compile(phi, s, &mut atoms)?;
    }
    let mut cur = feasibility_start(phi, flat);
    phi.check_point(&cur)?;
    let feas_tol = opts.tolerance.max(1e-10);
    for _ in 0..opts.max_iterations {
        let mut max_change = 0.0f64;
        for atom in &atoms {
            let next = project_atom(phi, atom, &cur, opts)?;
            let mut coords = next.into_vec();
            enforce_interior(phi, &mut coords, opts.interior_margin);
            let next = Point::new(coords);
            let change = cur
                .coords()
                .iter()
                .zip(next.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_change = max_change.max(change);
            cur = next;
        }
        let residual = atoms
            .iter()
            .map(|a| a.violation(cur.coords()))
            .fold(0.0, f64::max);
        if residual <= feas_tol {
            return Ok(cur);
        }
        if max_change <= feas_tol {
            // Stalled between sets at positive distance.
            return Err(SetError::EmptyIntersection(format!(
                "alternating projections stalled with residual {residual:.3e}"
            )));
        }
    }
    let residual = atoms
        .iter()
        .map(|a| a.violation(cur.coords()))
        .fold(0.0, f64::max);
    Err(SetError::Convergence {
        iterations: opts.max_iterations,
        residual,
        last: cur.into_vec(),
    })
}

fn feasibility_start(phi: &Potential, flat: &[&ConstraintSet]) -> Point {
    let dim = phi.dim();
    if phi.is_simplex() {
        return Point::new(vec![1.0 / dim as f64; dim]);
    }
    for s in flat {
        if let ConstraintSet::Box { lo, hi } | ConstraintSet::SimplexSubset { lo, hi } = s {
            let center: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| {
                    let (l, h) = (l.max(-1e6), h.min(1e6));
                    0.5 * (l + h)
                })
                .collect();
            if center.iter().all(|c| c.is_finite()) {
                if matches!(phi, Potential::GaussianNatural) {
                    let mut c = center;
                    if c[1] <= 0.0 {
                        c[1] = 1.0;
                    }
                    return Point::new(c);
                }
                return Point::new(center);
            }
        }
    }
    match phi {
        Potential::GaussianNatural => Point::new(vec![0.0, 1.0]),
        _ => Point::new(vec![0.0; dim]),
    }
}

// ---------------------------------------------------------------------------
// Geometry diagnostics.
// ---------------------------------------------------------------------------

/// The generalized Pythagorean gap
///
/// ```text
/// D(q‖p) − D(q‖Π_set(p)) − D(Π_set(p)‖p)
/// ```
///
/// for a feasible point `q`, which equals the variational-inequality inner
/// product ⟨∇Φ(Π) − ∇Φ(p), q − Π⟩ and is therefore ≥ 0 (up to solver
/// tolerance) for every convex set.
pub fn pythagorean_gap(
    phi: &Potential,
    p: &Point,
    set: &ConstraintSet,
    q: &Point,
    opts: &ProjectionOptions,
) -> Result<f64, SetError> {
    phi.check_point(p)?;
    phi.check_point(q)?;
    let viol = set.violation(q.coords());
    if viol > opts.tolerance.max(1e-9) {
        return Err(SetError::InfeasiblePoint(viol));
    }
    let proj = match set {
        ConstraintSet::Intersection(members) => project_intersection(phi, members, p, opts)?,
        single => project(phi, single, p, opts)?,
    };
    let pi = &proj.point;
    Ok(phi.divergence(q, p)? - phi.divergence(q, pi)? - phi.divergence(pi, p)?)
}

/// Outcome of the mirror-geodesic convexity check.
#[derive(Clone, Debug, Serialize)]
pub struct GConvexityReport {
    /// Share of sampled geodesic points inside the set (tolerance 1e-9).
    pub fraction_feasible: f64,
    /// Largest membership violation observed over the sampled points.
    pub worst_violation: f64,
}

/// Sample feasible pairs and test whether the mirror geodesic between them
/// stays inside the set.
pub fn gconvexity_check(
    phi: &Potential,
    set: &ConstraintSet,
    n_pairs: usize,
    n_t: usize,
    rng_seed: u64,
) -> Result<GConvexityReport, SetError> {
    if n_pairs == 0 || n_t == 0 {
        return Err(SetError::InvalidSet("n_pairs and n_t must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let opts = ProjectionOptions::default();
    let mut feasible = 0usize;
    let mut total = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..n_pairs {
        let x = sample_feasible(phi, set, &mut rng, &opts)?;
        let y = sample_feasible(phi, set, &mut rng, &opts)?;
        for k in 0..n_t {
            let t = if n_t == 1 {
                0.5
            } else {
                k as f64 / (n_t - 1) as f64
            };
            let g = phi.geodesic(&x, &y, t)?;
            let viol = set.violation(g.coords());
            worst = worst.max(viol);
            total += 1;
            if viol <= GCONVEX_TOL {
                feasible += 1;
            }
        }
    }
    Ok(GConvexityReport {
        fraction_feasible: feasible as f64 / total as f64,
        worst_violation: worst,
    })
}

/// Draw a point from `set` ∩ domain. Boxes are sampled directly; other sets
/// use bounded rejection from the domain sampler, falling back to projecting
/// a random domain point onto the set.
fn sample_feasible<R: Rng>(
    phi: &Potential,
    set: &ConstraintSet,
    rng: &mut R,
    opts: &ProjectionOptions,
) -> Result<Point, SetError> {
    const ATTEMPTS: usize = 2000;
    if let (ConstraintSet::Box { lo, hi }, false) = (set, phi.is_simplex()) {
        let coords: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| {
                let (l, h) = (l.max(-10.0), h.min(10.0));
                if h > l {
                    rng.gen_range(l..h)
                } else {
                    l
                }
            })
            .collect();
        let p = Point::new(coords);
        phi.check_point(&p)?;
        return Ok(p);
    }
    for _ in 0..ATTEMPTS {
        let cand = sample_domain(phi, rng);
        if set.violation(cand.coords()) <= 0.0 {
            return Ok(cand);
        }
    }
    // Rejection failed (thin or far set): project a domain sample instead.
    let cand = sample_domain(phi, rng);
    let proj = match set {
        ConstraintSet::Intersection(members) => project_intersection(phi, members, &cand, opts),
        single => project(phi, single, &cand, opts),
    }?;
    if set.violation(proj.point.coords()) <= GCONVEX_TOL.max(opts.tolerance) {
        Ok(proj.point)
    } else {
        Err(SetError::SamplingFailed(ATTEMPTS + 1))
    }
}

fn sample_domain<R: Rng>(phi: &Potential, rng: &mut R) -> Point {
    match phi {
        Potential::SquaredEuclidean { dim, .. } => {
            Point::new((0..*dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
        }
        Potential::NegativeEntropy { dim } => loop {
            let raw: Vec<f64> = (0..*dim)
                .map(|_| -(rng.gen::<f64>().max(1e-300)).ln())
                .collect();
            let sum: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|r| r / sum).collect();
            if p.iter().all(|c| *c > 1e-9) {
                return Point::new(p);
            }
        },
        Potential::GaussianNatural => {
            Point::new(vec![rng.gen_range(-3.0..3.0), rng.gen_range(0.2..4.0)])
        }
    }
}

/// Maximal |cosine| between active-constraint normals of the two sets at `x`,
/// measured in the dual metric G⁻¹ with G = ∇²Φ(x). Zero means the active
/// normals are Bregman-orthogonal (interaction is expected to vanish); one
/// means parallel. On the simplex, the component along the all-ones normal of
/// the domain constraint is projected out first.
pub fn normal_alignment(
    phi: &Potential,
    set_a: &ConstraintSet,
    set_b: &ConstraintSet,
    x: &Point,
) -> Result<f64, SetError> {
    phi.check_point(x)?;
    let na = active_normals(phi, set_a, x)?;
    if na.is_empty() {
        return Err(SetError::UndefinedDiagnostic(
            "no active constraints for the first set at x".into(),
        ));
    }
    let nb = active_normals(phi, set_b, x)?;
    if nb.is_empty() {
        return Err(SetError::UndefinedDiagnostic(
            "no active constraints for the second set at x".into(),
        ));
    }
    let mut best = 0.0f64;
    for u in &na {
        for v in &nb {
            let uu = phi.metric_inverse_dot(x, u, u)?;
            let vv = phi.metric_inverse_dot(x, v, v)?;
            if uu <= 1e-24 || vv <= 1e-24 {
                continue;
            }
            let uv = phi.metric_inverse_dot(x, u, v)?;
            best = best.max((uv.abs() / (uu.sqrt() * vv.sqrt())).clamp(0.0, 1.0));
        }
    }
    Ok(best)
}

fn active_normals(
    phi: &Potential,
    set: &ConstraintSet,
    x: &Point,
) -> Result<Vec<Vec<f64>>, SetError> {
    let mut normals = Vec::new();
    collect_active(set, x.coords(), &mut normals);
    if !phi.is_simplex() {
        return Ok(normals);
    }
    // Quotient out the simplex constraint direction (all-ones covector).
    let ones = vec![1.0; phi.dim()];
    let denom = phi.metric_inverse_dot(x, &ones, &ones)?;
    let mut out = Vec::new();
    for mut n in normals {
        let c = phi.metric_inverse_dot(x, &n, &ones)? / denom;
        for (ni, oi) in n.iter_mut().zip(&ones) {
            *ni -= c * oi;
        }
        if phi.metric_inverse_dot(x, &n, &n)? > 1e-20 {
            out.push(n);
        }
    }
    Ok(out)
}

fn collect_active(set: &ConstraintSet, x: &[f64], out: &mut Vec<Vec<f64>>) {
    match set {
        ConstraintSet::Halfspace { normal, offset } => {
            if (dot(normal, x) - offset).abs() <= ACTIVE_TOL {
                out.push(normal.clone());
            }
        }
        ConstraintSet::Box { lo, hi } | ConstraintSet::SimplexSubset { lo, hi } => {
            let d = x.len();
            for i in 0..d {
                if hi[i].is_finite() && (x[i] - hi[i]).abs() <= ACTIVE_TOL {
                    let mut n = vec![0.0; d];
                    n[i] = 1.0;
                    out.push(n);
                }
                if lo[i].is_finite() && (x[i] - lo[i]).abs() <= ACTIVE_TOL {
                    let mut n = vec![0.0; d];
                    n[i] = -1.0;
                    out.push(n);
                }
            }
        }
        ConstraintSet::AffineEquality { a, .. } => {
            for row in a {
                out.push(row.clone());
            }
        }
        ConstraintSet::Intersection(members) => {
            for m in members {
                collect_active(m, x, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Small dense linear algebra.
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_linear(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

/// Row-reduce an affine system, dropping dependent rows and rejecting
/// inconsistent ones.
fn row_reduce(a: Vec<Vec<f64>>, c: Vec<f64>) -> Result<(Vec<Vec<f64>>, Vec<f64>), SetError> {
    let n = a[0].len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.into_iter().zip(c).collect();
    let mut reduced: Vec<(Vec<f64>, f64)> = Vec::new();
    for (mut row, mut ci) in rows.drain(..) {
        let scale0 = row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(ci.abs());
        for (basis, bi) in &reduced {
            // Eliminate against the pivot coordinate of each basis row.
            let p = pivot_index(basis);
            let f = row[p] / basis[p];
            if f != 0.0 {
                for (rj, bj) in row.iter_mut().zip(basis) {
                    *rj -= f * bj;
                }
                ci -= f * bi;
            }
        }
        let norm = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= 1e-12 * scale0.max(1.0) {
            if ci.abs() > 1e-10 * scale0.max(1.0) {
                return Err(SetError::InvalidSet(format!(
                    "inconsistent affine system: residual {ci:.3e} on a dependent row"
                )));
            }
            continue;
        }
        reduced.push((row, ci));
        if reduced.len() == n {
            break;
        }
    }
    Ok(reduced.into_iter().unzip())
}

fn pivot_index(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = i;
        }
    }
    best
}
