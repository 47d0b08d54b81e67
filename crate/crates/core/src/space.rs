//! Compact axis-aligned boxes in R^d with a finite reference measure and a
//! pluggable quadrature rule realizing integration against it.
//!
//! The default rule is tensor-product Gauss-Legendre (32 nodes per axis in
//! one dimension, 16 per axis otherwise). Rules can be re-panelized around
//! per-axis breakpoints so that indicators and narrow mollifiers integrate
//! to full accuracy, and a seeded Monte Carlo rule is available as a
//! fallback for product integrals whose tensor expansion would blow up.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Nodes-per-axis defaults for the Gauss-Legendre rule.
pub const DEFAULT_ORDER_1D: usize = 32;
pub const DEFAULT_ORDER_ND: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadKind {
    GaussLegendre,
    MonteCarlo,
}

/// Declarative description of a quadrature rule. `order` is nodes per axis
/// for Gauss-Legendre and the total sample count for Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub kind: QuadKind,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl QuadratureSpec {
    pub fn gauss_legendre(order: usize) -> Self {
        QuadratureSpec {
            kind: QuadKind::GaussLegendre,
            order,
            seed: None,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureSpec {
            kind: QuadKind::MonteCarlo,
            order: samples,
            seed: Some(seed),
        }
    }

    pub fn default_for_dim(dim: usize) -> Self {
        let order = if dim == 1 {
            DEFAULT_ORDER_1D
        } else {
            DEFAULT_ORDER_ND
        };
        QuadratureSpec::gauss_legendre(order)
    }
}

/// A concrete cubature: points inside the box and positive weights summing
/// to the box volume.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Per-axis polynomial degree integrated exactly, when known.
    pub exact_degree: Option<usize>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be at least 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi starting guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// One axis of a tensor rule: nodes in [lo, hi] and matching weights.
#[derive(Debug, Clone)]
struct AxisRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn axis_gauss_legendre(lo: f64, hi: f64, order: usize, cuts: &[f64]) -> AxisRule {
    let mut edges = vec![lo];
    for &c in cuts {
        if c > lo + 1e-13 && c < hi - 1e-13 {
            edges.push(c);
        }
    }
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

    let span = hi - lo;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        // narrow panels carry proportionally less polynomial content, so
        // their order can shrink with the width fraction without losing
        // accuracy; this keeps the total node count bounded
        let frac = ((b - a) / span).clamp(0.0, 1.0);
        let seg_order =
            ((order as f64 * frac.powf(0.25)).ceil() as usize).clamp(20.min(order), order);
        let (unit_nodes, unit_weights) = gauss_legendre_unit(seg_order);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in unit_nodes.iter().zip(&unit_weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    AxisRule { nodes, weights }
}

fn tensor(axes: &[AxisRule], exact_degree: Option<usize>) -> QuadratureRule {
    let dim = axes.len();
    let total: usize = axes.iter().map(|a| a.nodes.len()).product();
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    loop {
        let mut p = Vec::with_capacity(dim);
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            p.push(axes[d].nodes[i]);
            w *= axes[d].weights[i];
        }
        points.push(p);
        weights.push(w);
        // odometer increment
        let mut d = dim;
        loop {
            if d == 0 {
                return QuadratureRule {
                    points,
                    weights,
                    exact_degree,
                };
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].nodes.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// A compact axis-aligned box with its reference (Lebesgue-type) measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct BaseSpace {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    quadrature: QuadratureSpec,
    rule: QuadratureRule,
}

#[derive(Serialize, Deserialize, Clone)]
struct SpaceJson {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    quadrature: QuadratureSpec,
}

impl TryFrom<SpaceJson> for BaseSpace {
    type Error = Error;
    fn try_from(j: SpaceJson) -> Result<Self> {
        if j.dim == 0 || j.lower.len() != j.dim || j.upper.len() != j.dim {
            return Err(Error::invalid(
                "base space",
                format!(
                    "dim {} inconsistent with bounds of length {}/{}",
                    j.dim,
                    j.lower.len(),
                    j.upper.len()
                ),
            ));
        }
        BaseSpace::with_quadrature(j.lower, j.upper, j.quadrature)
    }
}

impl From<BaseSpace> for SpaceJson {
    fn from(s: BaseSpace) -> Self {
        SpaceJson {
            dim: s.dim,
            lower: s.lower,
            upper: s.upper,
            quadrature: s.quadrature,
        }
    }
}

impl PartialEq for BaseSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.lower == other.lower && self.upper == other.upper
    }
}

impl BaseSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let spec = QuadratureSpec::default_for_dim(lower.len());
        BaseSpace::with_quadrature(lower, upper, spec)
    }

    pub fn with_quadrature(
        lower: Vec<f64>,
        upper: Vec<f64>,
        quadrature: QuadratureSpec,
    ) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim {
            return Err(Error::invalid("base space", "empty or ragged bounds"));
        }
        for i in 0..dim {
            if !lower[i].is_finite() || !upper[i].is_finite() || upper[i] <= lower[i] {
                return Err(Error::invalid(
                    "base space",
                    format!("axis {i} must satisfy lower < upper with finite bounds"),
                ));
            }
        }
        if quadrature.order == 0 {
            return Err(Error::invalid("quadrature", "order must be positive"));
        }
        let mut space = BaseSpace {
            dim,
            lower,
            upper,
            quadrature,
            rule: QuadratureRule {
                points: vec![],
                weights: vec![],
                exact_degree: None,
            },
        };
        space.rule = space.build_rule(&[])?;
        Ok(space)
    }

    /// The unit interval [0, 1] with the default rule; the workhorse of the
    /// bundled models and tests.
    pub fn unit_interval() -> Self {
        BaseSpace::new(vec![0.0], vec![1.0]).expect("unit interval is valid")
    }

    /// The unit square [0, 1]^2 with the default rule.
    pub fn unit_square() -> Self {
        BaseSpace::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("unit square is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| self.upper[i] - self.lower[i]).product()
    }

    pub fn quadrature_spec(&self) -> &QuadratureSpec {
        &self.quadrature
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim
            && point
                .iter()
                .enumerate()
                .all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }

    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        if !self.contains(point) {
            return Err(Error::PointOutsideSpace {
                point: point.to_vec(),
            });
        }
        Ok(())
    }

    /// The rule built from the declared spec with no extra breakpoints.
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Rebuild the rule with extra per-axis panel boundaries. Indicator
    /// edges and mollifier supports become panel edges so each panel sees a
    /// smooth integrand. Monte Carlo rules ignore breakpoints.
    pub fn rule_with_breakpoints(&self, per_axis: &[Vec<f64>]) -> Result<QuadratureRule> {
        if per_axis.iter().all(|c| c.is_empty()) {
            return Ok(self.rule.clone());
        }
        self.build_rule(per_axis)
    }

    fn build_rule(&self, per_axis: &[Vec<f64>]) -> Result<QuadratureRule> {
        match self.quadrature.kind {
            QuadKind::GaussLegendre => {
                let empty: Vec<f64> = vec![];
                let axes: Vec<AxisRule> = (0..self.dim)
                    .map(|i| {
                        let cuts = per_axis.get(i).unwrap_or(&empty);
                        axis_gauss_legendre(self.lower[i], self.upper[i], self.quadrature.order, cuts)
                    })
                    .collect();
                Ok(tensor(&axes, Some(2 * self.quadrature.order - 1)))
            }
            QuadKind::MonteCarlo => {
                let seed = self.quadrature.seed.unwrap_or(0);
                Ok(self.monte_carlo_rule(self.quadrature.order, seed))
            }
        }
    }

    /// Uniform seeded samples over the box with equal weights summing to
    /// the volume.
    pub fn monte_carlo_rule(&self, samples: usize, seed: u64) -> QuadratureRule {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let w = self.volume() / samples as f64;
        let mut points = Vec::with_capacity(samples);
        for _ in 0..samples {
            let p: Vec<f64> = (0..self.dim)
                .map(|i| rng.gen_range(self.lower[i]..self.upper[i]))
                .collect();
            points.push(p);
        }
        QuadratureRule {
            weights: vec![w; samples],
            points,
            exact_degree: None,
        }
    }

    /// Uniform scan grid (endpoints included) used for sampled suprema and
    /// witness searches.
    pub fn scan_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = per_axis.max(2);
        let axes: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        self.lower[i]
                            + (self.upper[i] - self.lower[i]) * k as f64 / (n - 1) as f64
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(n.pow(self.dim as u32));
        let mut idx = vec![0usize; self.dim];
        loop {
            out.push((0..self.dim).map(|d| axes[d][idx[d]]).collect());
            let mut d = self.dim;
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_volume_and_nodes_stay_inside() {
        let s = BaseSpace::unit_interval();
        let sum: f64 = s.rule().weights.iter().sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);

        let sq = BaseSpace::new(vec![-1.0, 0.0], vec![3.0, 0.5]).unwrap();
        let sum: f64 = sq.rule().weights.iter().sum();
        assert_relative_eq!(sum, sq.volume(), max_relative = 1e-12);
        assert!(sq.rule().points.iter().all(|p| sq.contains(p)));
        assert!(sq.rule().weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn gauss_legendre_is_exact_for_declared_degree() {
        let s = BaseSpace::unit_interval();
        let deg = s.rule().exact_degree.unwrap();
        // integrate x^deg over [0,1] = 1/(deg+1)
        let got: f64 = s
            .rule()
            .points
            .iter()
            .zip(&s.rule().weights)
            .map(|(p, w)| w * p[0].powi(deg as i32))
            .sum();
        assert_relative_eq!(got, 1.0 / (deg as f64 + 1.0), max_relative = 1e-12);
    }

    #[test]
    fn panelized_rule_respects_breakpoints() {
        let s = BaseSpace::unit_interval();
        let rule = s.rule_with_breakpoints(&[vec![0.45, 0.55]]).unwrap();
        // piecewise integrand: exact on panels
        let got: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| {
                let h = if p[0] >= 0.45 && p[0] <= 0.55 { 5.0 } else { 0.0 };
                w * h
            })
            .sum();
        assert_relative_eq!(got, 0.5, max_relative = 1e-12);
        let sum: f64 = rule.weights.iter().sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded_and_deterministic() {
        let s = BaseSpace::with_quadrature(
            vec![0.0],
            vec![2.0],
            QuadratureSpec::monte_carlo(5000, 42),
        )
        .unwrap();
        let a = s.rule().points.clone();
        let s2 = BaseSpace::with_quadrature(
            vec![0.0],
            vec![2.0],
            QuadratureSpec::monte_carlo(5000, 42),
        )
        .unwrap();
        assert_eq!(a, s2.rule().points);
        let integral: f64 = s
            .rule()
            .points
            .iter()
            .zip(&s.rule().weights)
            .map(|(p, w)| w * p[0])
            .sum();
        // E[x] on [0,2] is 1 per unit mass; integral of x is 2
        assert!((integral - 2.0).abs() < 0.1, "MC estimate too far: {integral}");
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(BaseSpace::new(vec![0.0], vec![0.0]).is_err());
        assert!(BaseSpace::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn point_membership() {
        let s = BaseSpace::unit_square();
        assert!(s.contains(&[0.0, 1.0]));
        assert!(!s.contains(&[0.0, 1.0 + 1e-9]));
        assert!(s.check_point(&[0.5]).is_err());
    }

    #[test]
    fn space_json_round_trip() {
        let s = BaseSpace::unit_interval();
        let text = serde_json::to_string(&s).unwrap();
        let back: BaseSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.rule().len(), s.rule().len());
    }
}
