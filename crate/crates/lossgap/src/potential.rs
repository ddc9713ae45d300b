//! Legendre potentials, mirror maps, and Bregman divergences.
//!
//! A potential Φ is strictly convex and differentiable on an open domain;
//! its Bregman divergence is
//!
//! ```text
//! D_Φ(p‖q) = Φ(p) − Φ(q) − ⟨∇Φ(q), p − q⟩
//! ```
//!
//! nonnegative and zero iff p = q. The gradient ∇Φ (mirror map) bijects the
//! domain onto a dual region; `gradient_inverse` is ∇Φ*. Three potentials are
//! supported:
//!
//! * `SquaredEuclidean` — Φ(x) = ½ Σ wᵢxᵢ² with optional positive diagonal
//!   metric weights; divergence is the (weighted) half squared distance.
//! * `NegativeEntropy` — Φ(x) = Σ xᵢ ln xᵢ on the open probability simplex;
//!   divergence is the KL divergence.
//! * `GaussianNatural` — Φ(m, v) = m²/(2v) − ½ ln v on {(m, v) : v > 0}, the
//!   log-loss potential for Gaussian predictive objects. Its divergence
//!   coincides with the Gaussian KL on equal-variance slices; the exact
//!   Gaussian KL is exposed separately as [`gaussian_kl`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Interior margin for the open simplex: coordinates within this distance of
/// the boundary are rejected rather than clamped, since divergence values
/// degrade silently near zero coordinates.
pub const SIMPLEX_MARGIN: f64 = 1e-12;

/// Tolerance on |Σxᵢ − 1| for simplex membership.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Tolerance on dual-point consistency for the strict mirror inverse.
const DUAL_SUM_TOL: f64 = 1e-8;

/// Errors from potential and divergence evaluations.
#[derive(Debug, Error)]
pub enum BregmanError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside potential domain: {0}")]
    DomainViolation(String),

    #[error("dual point outside mirror-map range: {0}")]
    InvalidDual(String),

    #[error("nonfinite coordinate in input")]
    NonFinite,

    #[error("interpolation parameter t={0} outside [0,1]")]
    BadInterpolant(f64),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("nonpositive variance: {0}")]
    NonPositiveVariance(f64),
}

/// A point in primal (prediction-space) coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// A point in dual (mirror) coordinates. Numerically identical layout to
/// [`Point`], kept as a distinct type so primal and dual coordinates cannot
/// be mixed up across the mirror map.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPoint(Vec<f64>);

impl DualPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        DualPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A Legendre potential variant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Potential {
    /// Φ(x) = ½ Σ wᵢxᵢ² on ℝᵈ. `weights = None` means the identity metric.
    SquaredEuclidean {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Φ(x) = Σ xᵢ ln xᵢ on the open probability simplex (dim ≥ 2).
    NegativeEntropy { dim: usize },
    /// Φ(m, v) = m²/(2v) − ½ ln v on the open half-plane v > 0.
    GaussianNatural,
}

impl Potential {
    pub fn squared_euclidean(dim: usize) -> Result<Self, BregmanError> {
        if dim == 0 {
            return Err(BregmanError::InvalidPotential("dim must be >= 1".into()));
        }
        Ok(Potential::SquaredEuclidean { dim, weights: None })
    }

    /// Squared Euclidean potential with a diagonal metric; all weights must be
    /// strictly positive and finite.
    pub fn weighted_euclidean(weights: Vec<f64>) -> Result<Self, BregmanError> {
        if weights.is_empty() {
            return Err(BregmanError::InvalidPotential("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(BregmanError::InvalidPotential(
                "metric weights must be strictly positive and finite".into(),
            ));
        }
        Ok(Potential::SquaredEuclidean {
            dim: weights.len(),
            weights: Some(weights),
        })
    }

    pub fn negative_entropy(dim: usize) -> Result<Self, BregmanError> {
        if dim < 2 {
            return Err(BregmanError::InvalidPotential(
                "negative entropy requires dim >= 2".into(),
            ));
        }
        Ok(Potential::NegativeEntropy { dim })
    }

    pub fn gaussian_natural() -> Self {
        Potential::GaussianNatural
    }

    pub fn dim(&self) -> usize {
        match self {
            Potential::SquaredEuclidean { dim, .. } => *dim,
            Potential::NegativeEntropy { dim } => *dim,
            Potential::GaussianNatural => 2,
        }
    }

    /// Whether the domain is the open probability simplex (affine-constrained).
    pub fn is_simplex(&self) -> bool {
        matches!(self, Potential::NegativeEntropy { .. })
    }

    fn check_dim(&self, n: usize) -> Result<(), BregmanError> {
        if n != self.dim() {
            return Err(BregmanError::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }

    /// Validate that `x` lies in the open domain of the potential.
    pub fn check_point(&self, x: &Point) -> Result<(), BregmanError> {
        self.check_dim(x.len())?;
        if x.coords().iter().any(|c| !c.is_finite()) {
            return Err(BregmanError::NonFinite);
        }
        match self {
            Potential::SquaredEuclidean { .. } => Ok(()),
            Potential::NegativeEntropy { .. } => {
                if let Some(c) = x.coords().iter().find(|c| **c <= SIMPLEX_MARGIN) {
                    return Err(BregmanError::DomainViolation(format!(
                        "simplex coordinate {c} within {SIMPLEX_MARGIN} of the boundary"
                    )));
                }
                let sum: f64 = x.coords().iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
                    return Err(BregmanError::DomainViolation(format!(
                        "simplex coordinates sum to {sum}, not 1"
                    )));
                }
                Ok(())
            }
            Potential::GaussianNatural => {
                let v = x.coords()[1];
                if v <= 0.0 {
                    return Err(BregmanError::NonPositiveVariance(v));
                }
                Ok(())
            }
        }
    }

    /// Φ(x).
    pub fn value(&self, x: &Point) -> Result<f64, BregmanError> {
        self.check_point(x)?;
        Ok(match self {
            Potential::SquaredEuclidean { weights, .. } => match weights {
                None => 0.5 * x.coords().iter().map(|c| c * c).sum::<f64>(),
                Some(w) => {
                    0.5 * x
                        .coords()
                        .iter()
                        .zip(w)
                        .map(|(c, w)| w * c * c)
                        .sum::<f64>()
                }
            },
            Potential::NegativeEntropy { .. } => {
                x.coords().iter().map(|c| c * c.ln()).sum::<f64>()
            }
            Potential::GaussianNatural => {
                let (m, v) = (x.coords()[0], x.coords()[1]);
                m * m / (2.0 * v) - 0.5 * v.ln()
            }
        })
    }

    /// ∇Φ(x), the mirror map.
    pub fn gradient(&self, x: &Point) -> Result<DualPoint, BregmanError> {
        self.check_point(x)?;
        Ok(DualPoint(match self {
            Potential::SquaredEuclidean { weights, .. } => match weights {
                None => x.coords().to_vec(),
                Some(w) => x.coords().iter().zip(w).map(|(c, w)| w * c).collect(),
            },
            Potential::NegativeEntropy { .. } => {
                x.coords().iter().map(|c| c.ln() + 1.0).collect()
            }
            Potential::GaussianNatural => {
                let (m, v) = (x.coords()[0], x.coords()[1]);
                vec![m / v, -(m * m / (v * v) + 1.0 / v) / 2.0]
            }
        }))
    }

    /// ∇Φ*(d), the inverse mirror map. Rejects dual points outside the range
    /// of ∇Φ (e.g. a simplex dual whose implied mass does not sum to one).
    pub fn gradient_inverse(&self, d: &DualPoint) -> Result<Point, BregmanError> {
        self.check_dim(d.coords().len())?;
        if d.coords().iter().any(|c| !c.is_finite()) {
            return Err(BregmanError::NonFinite);
        }
        match self {
            Potential::SquaredEuclidean { weights, .. } => Ok(Point(match weights {
                None => d.coords().to_vec(),
                Some(w) => d.coords().iter().zip(w).map(|(c, w)| c / w).collect(),
            })),
            Potential::NegativeEntropy { .. } => {
                let raw: Vec<f64> = d.coords().iter().map(|c| (c - 1.0).exp()).collect();
                let sum: f64 = raw.iter().sum();
                if !(sum.is_finite()) || (sum - 1.0).abs() > DUAL_SUM_TOL {
                    return Err(BregmanError::InvalidDual(format!(
                        "inconsistent simplex dual: implied mass {sum}"
                    )));
                }
                // Renormalize the ~1e-16-scale residue so the result is a
                // valid simplex point.
                Ok(Point(raw.into_iter().map(|r| r / sum).collect()))
            }
            Potential::GaussianNatural => {
                let (d1, d2) = (d.coords()[0], d.coords()[1]);
                let inv_v = -2.0 * d2 - d1 * d1;
                if inv_v <= 0.0 {
                    return Err(BregmanError::InvalidDual(format!(
                        "dual ({d1}, {d2}) outside range: d1^2 + 2 d2 must be negative"
                    )));
                }
                let v = 1.0 / inv_v;
                Ok(Point(vec![d1 * v, v]))
            }
        }
    }

    /// Inverse mirror map for solver-internal duals. For the simplex this is
    /// the normalizing form exp(d−1)/Z, defined for any finite dual vector;
    /// halfspace tilts ∇Φ(x) − νa are generally not consistent duals, and the
    /// multiplier equation is posed against the normalized point.
    pub(crate) fn mirror_retract(&self, d: &[f64]) -> Result<Point, BregmanError> {
        match self {
            Potential::NegativeEntropy { .. } => {
                // Log-domain normalization for stability under large tilts.
                let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(BregmanError::NonFinite);
                }
                let raw: Vec<f64> = d.iter().map(|c| (c - max).exp()).collect();
                let sum: f64 = raw.iter().sum();
                Ok(Point(raw.into_iter().map(|r| r / sum).collect()))
            }
            _ => self.gradient_inverse(&DualPoint(d.to_vec())),
        }
    }

    /// D_Φ(p‖q). Computed via closed forms, which are nonnegative by
    /// construction.
    pub fn divergence(&self, p: &Point, q: &Point) -> Result<f64, BregmanError> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(match self {
            Potential::SquaredEuclidean { weights, .. } => {
                let it = p.coords().iter().zip(q.coords());
                match weights {
                    None => 0.5 * it.map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    Some(w) => {
                        0.5 * it
                            .zip(w)
                            .map(|((a, b), w)| w * (a - b) * (a - b))
                            .sum::<f64>()
                    }
                }
            }
            Potential::NegativeEntropy { .. } => p
                .coords()
                .iter()
                .zip(q.coords())
                .map(|(a, b)| a * (a / b).ln())
                .sum::<f64>(),
            Potential::GaussianNatural => {
                let (m1, v1) = (p.coords()[0], p.coords()[1]);
                let (m2, v2) = (q.coords()[0], q.coords()[1]);
                let dm = m1 / v1 - m2 / v2;
                0.5 * v1 * dm * dm + 0.5 * (v1 / v2 - 1.0 - (v1 / v2).ln())
            }
        })
    }

    /// The mirror geodesic Γ(x, y; t) = ∇Φ*((1−t)∇Φ(x) + t∇Φ(y)).
    ///
    /// For the simplex this is the renormalized geometric mixture
    /// x^(1−t) y^t / Z, which stays on the simplex for all t.
    pub fn geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point, BregmanError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(BregmanError::BadInterpolant(t));
        }
        let dx = self.gradient(x)?;
        let dy = self.gradient(y)?;
        let mix: Vec<f64> = dx
            .coords()
            .iter()
            .zip(dy.coords())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        self.mirror_retract(&mix)
    }

    /// G⁻¹-inner product of two constraint normals at `x`, where G = ∇²Φ(x).
    /// Normals are covectors, so near-orthogonality is measured in the dual
    /// metric induced by the Hessian.
    pub fn metric_inverse_dot(&self, x: &Point, u: &[f64], v: &[f64]) -> Result<f64, BregmanError> {
        self.check_point(x)?;
        if u.len() != self.dim() || v.len() != self.dim() {
            return Err(BregmanError::DimensionMismatch {
                expected: self.dim(),
                got: u.len().max(v.len()),
            });
        }
        Ok(match self {
            Potential::SquaredEuclidean { weights, .. } => match weights {
                None => u.iter().zip(v).map(|(a, b)| a * b).sum(),
                Some(w) => u.iter().zip(v).zip(w).map(|((a, b), w)| a * b / w).sum(),
            },
            Potential::NegativeEntropy { .. } => {
                // G = diag(1/x) so G⁻¹ = diag(x).
                u.iter()
                    .zip(v)
                    .zip(x.coords())
                    .map(|((a, b), xi)| a * b * xi)
                    .sum()
            }
            Potential::GaussianNatural => {
                // Closed-form inverse of the 2x2 Hessian:
                // G⁻¹ = [[2m² + w, 2mw], [2mw, 2w²]] at x = (m, w).
                let (m, w) = (x.coords()[0], x.coords()[1]);
                let g00 = 2.0 * m * m + w;
                let g01 = 2.0 * m * w;
                let g11 = 2.0 * w * w;
                u[0] * (g00 * v[0] + g01 * v[1]) + u[1] * (g01 * v[0] + g11 * v[1])
            }
        })
    }
}

/// The Gaussian log-loss divergence between N(m, v) as the deployed
/// predictive object and N(mu, sigma2) as the reference:
///
/// ```text
/// (m − μ)² / (2v) + ½ (σ²/v − 1 − ln(σ²/v))
/// ```
///
/// Nonnegative; zero iff m = μ and v = σ².
pub fn gaussian_kl(m: f64, v: f64, mu: f64, sigma2: f64) -> Result<f64, BregmanError> {
    if !(m.is_finite() && v.is_finite() && mu.is_finite() && sigma2.is_finite()) {
        return Err(BregmanError::NonFinite);
    }
    if v <= 0.0 {
        return Err(BregmanError::NonPositiveVariance(v));
    }
    if sigma2 <= 0.0 {
        return Err(BregmanError::NonPositiveVariance(sigma2));
    }
    let dm = m - mu;
    let r = sigma2 / v;
    Ok(dm * dm / (2.0 * v) + 0.5 * (r - 1.0 - r.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }

    #[test]
    fn value_zero_and_quadratic() {
        let phi = Potential::squared_euclidean(2).unwrap();
        assert_eq!(phi.value(&pt(&[0.0, 0.0])).unwrap(), 0.0);
        assert!((phi.value(&pt(&[1.0, 2.0])).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn value_entropy_uniform() {
        let phi = Potential::negative_entropy(2).unwrap();
        let got = phi.value(&pt(&[0.5, 0.5])).unwrap();
        assert!((got - (-(2.0f64.ln()))).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn entropy_rejects_boundary_and_off_simplex() {
        let phi = Potential::negative_entropy(2).unwrap();
        assert!(phi.value(&pt(&[1.0, 0.0])).is_err());
        assert!(phi.value(&pt(&[0.4, 0.4])).is_err());
        assert!(phi.value(&pt(&[0.5, 0.5 + 1e-6])).is_err());
    }

    #[test]
    fn gradient_euclidean_identity() {
        let phi = Potential::squared_euclidean(2).unwrap();
        let g = phi.gradient(&pt(&[1.0, 2.0])).unwrap();
        assert_eq!(g.coords(), &[1.0, 2.0]);
    }

    #[test]
    fn gradient_entropy_log_plus_one() {
        let phi = Potential::negative_entropy(2).unwrap();
        let g = phi.gradient(&pt(&[0.5, 0.5])).unwrap();
        let expect = 0.5f64.ln() + 1.0;
        assert!((g.coords()[0] - expect).abs() < 1e-15);
        assert!((g.coords()[1] - expect).abs() < 1e-15);
    }

    // Central finite differences of Φ along the coordinate axes. For the
    // simplex potential the step leaves the simplex, so the oracle is applied
    // only to unconstrained-domain potentials.
    fn fd_gradient(phi: &Potential, x: &Point, h: f64) -> Vec<f64> {
        let mut g = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut up = x.coords().to_vec();
            let mut dn = x.coords().to_vec();
            up[i] += h;
            dn[i] -= h;
            let fu = phi.value(&Point::new(up)).unwrap();
            let fd = phi.value(&Point::new(dn)).unwrap();
            g.push((fu - fd) / (2.0 * h));
        }
        g
    }

    #[test]
    fn gradient_gaussian_matches_finite_differences() {
        let phi = Potential::gaussian_natural();
        for x in [pt(&[0.3, 1.0]), pt(&[-1.2, 0.7]), pt(&[2.0, 3.5])] {
            let g = phi.gradient(&x).unwrap();
            let fd = fd_gradient(&phi, &x, 1e-6);
            for (a, b) in g.coords().iter().zip(&fd) {
                let rel = (a - b).abs() / b.abs().max(1e-8);
                assert!(rel < 1e-6, "analytic {a} vs fd {b}");
            }
        }
    }

    #[test]
    fn gradient_weighted_euclidean_matches_finite_differences() {
        let phi = Potential::weighted_euclidean(vec![2.0, 0.5, 3.0]).unwrap();
        let x = pt(&[0.4, -1.0, 2.2]);
        let g = phi.gradient(&x).unwrap();
        let fd = fd_gradient(&phi, &x, 1e-6);
        for (a, b) in g.coords().iter().zip(&fd) {
            assert!((a - b).abs() / b.abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn gradient_inverse_euclidean_self() {
        let phi = Potential::squared_euclidean(2).unwrap();
        let x = phi
            .gradient_inverse(&DualPoint::new(vec![3.0, -1.0]))
            .unwrap();
        assert_eq!(x.coords(), &[3.0, -1.0]);
    }

    #[test]
    fn gradient_inverse_entropy_roundtrip() {
        let phi = Potential::negative_entropy(2).unwrap();
        let x = pt(&[0.25, 0.75]);
        let d = phi.gradient(&x).unwrap();
        let back = phi.gradient_inverse(&d).unwrap();
        for (a, b) in back.coords().iter().zip(x.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_inverse_rejects_inconsistent_simplex_dual() {
        let phi = Potential::negative_entropy(2).unwrap();
        let err = phi.gradient_inverse(&DualPoint::new(vec![5.0, 5.0]));
        assert!(matches!(err, Err(BregmanError::InvalidDual(_))));
    }

    #[test]
    fn mirror_roundtrip_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let potentials = vec![
            Potential::squared_euclidean(3).unwrap(),
            Potential::weighted_euclidean(vec![0.5, 2.0, 4.0]).unwrap(),
            Potential::negative_entropy(4).unwrap(),
            Potential::gaussian_natural(),
        ];
        for phi in &potentials {
            for _ in 0..1000 {
                let x = sample_interior(phi, &mut rng);
                let back = phi.gradient_inverse(&phi.gradient(&x).unwrap()).unwrap();
                let err = x
                    .coords()
                    .iter()
                    .zip(back.coords())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err <= 1e-10, "{phi:?}: roundtrip error {err}");
            }
        }
    }

    pub(super) fn sample_interior<R: Rng>(phi: &Potential, rng: &mut R) -> Point {
        match phi {
            Potential::SquaredEuclidean { dim, .. } => {
                Point::new((0..*dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            }
            Potential::NegativeEntropy { dim } => loop {
                let raw: Vec<f64> = (0..*dim).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
                let sum: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|r| r / sum).collect();
                if p.iter().all(|c| *c > 1e-9) {
                    return Point::new(p);
                }
            },
            Potential::GaussianNatural => Point::new(vec![
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.2..4.0),
            ]),
        }
    }

    #[test]
    fn divergence_identity_and_closed_forms() {
        let sq = Potential::squared_euclidean(2).unwrap();
        assert_eq!(sq.divergence(&pt(&[1.0, 2.0]), &pt(&[1.0, 2.0])).unwrap(), 0.0);
        assert!((sq.divergence(&pt(&[1.0, 2.0]), &pt(&[0.0, 0.0])).unwrap() - 2.5).abs() < 1e-15);

        let ne = Potential::negative_entropy(2).unwrap();
        let d = ne.divergence(&pt(&[0.5, 0.5]), &pt(&[0.25, 0.75])).unwrap();
        let expect = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((d - expect).abs() < 1e-12);
        assert!((d - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn divergence_nonnegative_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let potentials = vec![
            Potential::squared_euclidean(3).unwrap(),
            Potential::negative_entropy(3).unwrap(),
            Potential::gaussian_natural(),
        ];
        for phi in &potentials {
            for _ in 0..10_000 {
                let p = sample_interior(phi, &mut rng);
                let q = sample_interior(phi, &mut rng);
                let d = phi.divergence(&p, &q).unwrap();
                assert!(d >= -1e-12, "{phi:?}: D = {d}");
                let dpp = phi.divergence(&p, &p).unwrap();
                assert!(dpp <= 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_kl_examples() {
        assert_eq!(gaussian_kl(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_kl(1.0, 1.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let expect = 0.5 * (0.5 - 1.0 - 0.5f64.ln());
        let got = gaussian_kl(0.0, 2.0, 0.0, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.096574).abs() < 1e-6);
        assert!(gaussian_kl(0.0, -1.0, 0.0, 1.0).is_err());
        assert!(gaussian_kl(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let sq = Potential::squared_euclidean(2).unwrap();
        let x = pt(&[0.0, 0.0]);
        let y = pt(&[2.0, 2.0]);
        let mid = sq.geodesic(&x, &y, 0.5).unwrap();
        assert_eq!(mid.coords(), &[1.0, 1.0]);
        assert_eq!(sq.geodesic(&x, &y, 0.0).unwrap().coords(), x.coords());
        assert_eq!(sq.geodesic(&x, &y, 1.0).unwrap().coords(), y.coords());
        assert!(sq.geodesic(&x, &y, 1.5).is_err());
    }

    #[test]
    fn geodesic_stays_on_simplex() {
        let ne = Potential::negative_entropy(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = sample_interior(&ne, &mut rng);
            let y = sample_interior(&ne, &mut rng);
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let g = ne.geodesic(&x, &y, t).unwrap();
                let sum: f64 = g.coords().iter().sum();
                assert!((sum - 1.0).abs() <= 1e-10);
                assert!(g.coords().iter().all(|c| *c > 0.0));
            }
            let g0 = ne.geodesic(&x, &y, 0.0).unwrap();
            let g1 = ne.geodesic(&x, &y, 1.0).unwrap();
            let e0 = g0
                .coords()
                .iter()
                .zip(x.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let e1 = g1
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(e0 <= 1e-10 && e1 <= 1e-10);
        }
    }

    #[test]
    fn gaussian_divergence_equals_kl_on_equal_variance_slice() {
        let phi = Potential::gaussian_natural();
        let d = phi.divergence(&pt(&[1.0, 1.0]), &pt(&[0.0, 1.0])).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }
}
