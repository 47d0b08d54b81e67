//! Finite point-process models as truncated Janossy-density families.
//!
//! A model stores per-cardinality densities `j_n` for `n <= n_max` with a
//! hard-zero tail above the truncation. Families:
//!
//! * `iid_cluster`  — cardinality pmf `rho` and spatial pdf `f`, with
//!   `j_n(x_1..x_n) = n! rho(n) prod f(x_i)`;
//! * `bernoulli`    — existence probability `r` and spatial pdf `f`;
//! * `tabulated`    — explicit symmetric level functions;
//! * `superposition` — two models combined by the convolution formula
//!   (sum over all two-colorings of the argument tuple).

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::BaseSpace;
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Shared symmetric callable backing a custom tabulated level.
pub type CustomLevelFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;

/// Callable for one cardinality level of a tabulated family.
#[derive(Clone)]
pub enum TabLevel {
    Zero,
    /// `coeff * prod factor(x_i)`; serializable.
    ProductField { coeff: f64, factor: ScalarField },
    /// Arbitrary symmetric callable; test/embedding use only, not serializable.
    Custom(CustomLevelFn),
}

impl fmt::Debug for TabLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TabLevel::Zero => write!(f, "Zero"),
            TabLevel::ProductField { coeff, .. } => write!(f, "ProductField(coeff={coeff})"),
            TabLevel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    IidCluster {
        cardinality: Vec<f64>,
        spatial: ScalarField,
    },
    Bernoulli {
        existence: f64,
        spatial: ScalarField,
    },
    Tabulated {
        j0: f64,
        levels: Vec<TabLevel>,
    },
    Superposition {
        left: Box<FiniteSetDensity>,
        right: Box<FiniteSetDensity>,
    },
}

#[derive(Debug, Clone)]
pub struct FiniteSetDensity {
    space: BaseSpace,
    n_max: usize,
    family: Family,
}

impl FiniteSetDensity {
    pub fn iid_cluster(
        space: BaseSpace,
        cardinality: Vec<f64>,
        spatial: ScalarField,
    ) -> Result<Self> {
        if cardinality.is_empty() {
            return Err(Error::invalid("model", "empty cardinality pmf"));
        }
        if cardinality.iter().any(|p| p.is_nan() || *p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("model", "cardinality pmf must be nonnegative"));
        }
        spatial.validate(&space)?;
        let n_max = cardinality.len() - 1;
        Ok(FiniteSetDensity {
            space,
            n_max,
            family: Family::IidCluster {
                cardinality,
                spatial,
            },
        })
    }

    pub fn bernoulli(space: BaseSpace, existence: f64, spatial: ScalarField) -> Result<Self> {
        if !(0.0..=1.0).contains(&existence) {
            return Err(Error::invalid("model", "existence probability not in [0,1]"));
        }
        spatial.validate(&space)?;
        Ok(FiniteSetDensity {
            space,
            n_max: 1,
            family: Family::Bernoulli { existence, spatial },
        })
    }

    pub fn tabulated(space: BaseSpace, j0: f64, levels: Vec<TabLevel>) -> Result<Self> {
        if !(0.0..=1.0).contains(&j0) {
            return Err(Error::invalid("model", "j_0 must lie in [0,1]"));
        }
        let n_max = levels.len();
        Ok(FiniteSetDensity {
            space,
            n_max,
            family: Family::Tabulated { j0, levels },
        })
    }

    /// Poisson cardinality law truncated at `n_max` and renormalized to a
    /// proper pmf. Returns the model together with the truncated tail mass.
    pub fn truncated_poisson(
        space: BaseSpace,
        rate: f64,
        n_max: usize,
        spatial: ScalarField,
    ) -> Result<(Self, f64)> {
        if rate.is_nan() || rate <= 0.0 || !rate.is_finite() {
            return Err(Error::invalid("model", "Poisson rate must be positive"));
        }
        let mut pmf = Vec::with_capacity(n_max + 1);
        let mut term = (-rate).exp();
        for n in 0..=n_max {
            if n > 0 {
                term *= rate / n as f64;
            }
            pmf.push(term);
        }
        let kept: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= kept;
        }
        let model = FiniteSetDensity::iid_cluster(space, pmf, spatial)?;
        Ok((model, 1.0 - kept))
    }

    pub fn space(&self) -> &BaseSpace {
        &self.space
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Value of the Janossy density at an ordered tuple. Cardinalities above
    /// the truncation return zero; points outside the box are an error.
    pub fn janossy(&self, points: &[&[f64]]) -> Result<f64> {
        for p in points {
            self.space.check_point(p)?;
        }
        Ok(self.janossy_unchecked(points))
    }

    /// Same as [`janossy`](Self::janossy) without the membership check;
    /// quadrature loops call this on nodes already known to lie inside.
    pub fn janossy_unchecked(&self, points: &[&[f64]]) -> f64 {
        let n = points.len();
        if n > self.n_max {
            return 0.0;
        }
        match &self.family {
            Family::IidCluster {
                cardinality,
                spatial,
            } => {
                let factorial: f64 = (1..=n).map(|k| k as f64).product();
                let spatial_product: f64 = points.iter().map(|p| spatial.eval(p).re).product();
                factorial * cardinality[n] * spatial_product
            }
            Family::Bernoulli { existence, spatial } => match n {
                0 => 1.0 - existence,
                1 => existence * spatial.eval(points[0]).re,
                _ => 0.0,
            },
            Family::Tabulated { j0, levels } => {
                if n == 0 {
                    *j0
                } else {
                    match &levels[n - 1] {
                        TabLevel::Zero => 0.0,
                        TabLevel::ProductField { coeff, factor } => {
                            coeff * points.iter().map(|p| factor.eval(p).re).product::<f64>()
                        }
                        TabLevel::Custom(f) => f(points),
                    }
                }
            }
            Family::Superposition { left, right } => {
                // convolution formula: sum over all two-colorings
                assert!(n <= 20, "superposition expansion beyond practical size");
                let mut total = 0.0;
                let mut left_points: Vec<&[f64]> = Vec::with_capacity(n);
                let mut right_points: Vec<&[f64]> = Vec::with_capacity(n);
                for mask in 0u32..(1u32 << n) {
                    if (mask.count_ones() as usize) > left.n_max
                        || n - (mask.count_ones() as usize) > right.n_max
                    {
                        continue;
                    }
                    left_points.clear();
                    right_points.clear();
                    for (i, p) in points.iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            left_points.push(p);
                        } else {
                            right_points.push(p);
                        }
                    }
                    total += left.janossy_unchecked(&left_points)
                        * right.janossy_unchecked(&right_points);
                }
                total
            }
        }
    }

    /// Union of per-axis breakpoints of every spatial component, so set
    /// integrals can panelize around them.
    pub fn spatial_breakpoints(&self) -> Vec<Vec<f64>> {
        let dim = self.space.dim();
        let mut out = vec![Vec::new(); dim];
        self.collect_spatial_breakpoints(&mut out);
        out
    }

    fn collect_spatial_breakpoints(&self, out: &mut Vec<Vec<f64>>) {
        match &self.family {
            Family::IidCluster { spatial, .. } | Family::Bernoulli { spatial, .. } => {
                for (axis, cuts) in spatial.breakpoints(&self.space).into_iter().enumerate() {
                    out[axis].extend(cuts);
                }
            }
            Family::Tabulated { levels, .. } => {
                for level in levels {
                    if let TabLevel::ProductField { factor, .. } = level {
                        for (axis, cuts) in factor.breakpoints(&self.space).into_iter().enumerate() {
                            out[axis].extend(cuts);
                        }
                    }
                }
            }
            Family::Superposition { left, right } => {
                left.collect_spatial_breakpoints(out);
                right.collect_spatial_breakpoints(out);
            }
        }
    }

    /// Whether every level function is symmetric by construction. Tabulated
    /// custom callables are trusted only if declared; the constructors here
    /// only build symmetric families, so this is true except for `Custom`
    /// levels, which are checked at validation time instead.
    pub fn symmetric_by_construction(&self) -> bool {
        match &self.family {
            Family::IidCluster { .. } | Family::Bernoulli { .. } => true,
            Family::Tabulated { levels, .. } => levels
                .iter()
                .all(|l| !matches!(l, TabLevel::Custom(_))),
            Family::Superposition { left, right } => {
                left.symmetric_by_construction() && right.symmetric_by_construction()
            }
        }
    }
}

/// Independent union of two models on the same space. Densities convolve;
/// the truncation adds.
pub fn superpose(a: &FiniteSetDensity, b: &FiniteSetDensity) -> Result<FiniteSetDensity> {
    if a.space != b.space {
        return Err(Error::SpaceMismatch);
    }
    Ok(FiniteSetDensity {
        space: a.space.clone(),
        n_max: a.n_max + b.n_max,
        family: Family::Superposition {
            left: Box::new(a.clone()),
            right: Box::new(b.clone()),
        },
    })
}

/// Average of a callable over all argument permutations. Idempotent on
/// symmetric inputs.
pub fn symmetrize<F>(n: usize, f: F) -> impl Fn(&[&[f64]]) -> f64
where
    F: Fn(&[&[f64]]) -> f64,
{
    let permutations: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let count = permutations.len().max(1) as f64;
    move |points: &[&[f64]]| {
        debug_assert_eq!(points.len(), n);
        let mut total = 0.0;
        let mut buf: Vec<&[f64]> = Vec::with_capacity(n);
        for perm in &permutations {
            buf.clear();
            buf.extend(perm.iter().map(|&i| points[i]));
            total += f(&buf);
        }
        total / count
    }
}

/// Sampled supremum of the Janossy family with the grid it was taken on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KBound {
    pub value: f64,
    /// Number of grid points per axis for the one-slot (diagonal) scan.
    pub diagonal_per_axis: usize,
    /// Per-cardinality grid points per axis actually used for the tensor scan.
    pub tensor_per_axis: Vec<usize>,
    pub tuples_examined: u64,
}

/// Budget for the tensor part of the `bound_k` scan; grids shrink with the
/// tuple cardinality so the scan stays polynomial.
const K_SCAN_BUDGET: f64 = 2.0e6;

/// Sampled supremum of `j_n` over all `n <= n_max`: dense tensor grids for
/// small cardinalities (quadrature grid refined 4x per axis where the budget
/// allows) plus the full-resolution diagonal, which pins down the maxima of
/// factorized families exactly.
pub fn bound_k(model: &FiniteSetDensity) -> KBound {
    let space = model.space();
    let dim = space.dim();
    let base_order = space.quadrature_spec().order;
    let refined = 4 * base_order + 1;
    let diag_grid = space.scan_grid(refined);

    let mut best = model.janossy_unchecked(&[]);
    let mut tuples: u64 = 1;
    let mut tensor_per_axis = Vec::new();

    for n in 1..=model.n_max() {
        // full-resolution diagonal (x, x, ..., x)
        for p in &diag_grid {
            let args: Vec<&[f64]> = std::iter::repeat_n(p.as_slice(), n).collect();
            let v = model.janossy_unchecked(&args);
            if v > best {
                best = v;
            }
        }
        tuples += diag_grid.len() as u64;

        // tensor scan with a per-axis resolution fitted to the budget
        let per_axis = (K_SCAN_BUDGET.powf(1.0 / (n * dim) as f64).floor() as usize)
            .clamp(3, refined);
        tensor_per_axis.push(per_axis);
        let grid = space.scan_grid(per_axis);
        let mut idx = vec![0usize; n];
        'tensor: loop {
            let args: Vec<&[f64]> = idx.iter().map(|&i| grid[i].as_slice()).collect();
            let v = model.janossy_unchecked(&args);
            if v > best {
                best = v;
            }
            tuples += 1;
            let mut k = n;
            loop {
                if k == 0 {
                    break 'tensor;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < grid.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    KBound {
        value: best,
        diagonal_per_axis: refined,
        tensor_per_axis,
        tuples_examined: tuples,
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    space: BaseSpace,
    n_max: usize,
    family: FamilyJson,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FamilyJson {
    IidCluster {
        cardinality: Vec<f64>,
        spatial: ScalarField,
    },
    Bernoulli {
        existence: f64,
        spatial: ScalarField,
    },
    Tabulated {
        j0: f64,
        /// One entry per cardinality 1..n_max; `null` marks a zero level.
        levels: Vec<Option<TabLevelJson>>,
    },
    Superposition {
        left: Box<ModelJson>,
        right: Box<ModelJson>,
    },
}

#[derive(Serialize, Deserialize)]
struct TabLevelJson {
    coeff: f64,
    factor: ScalarField,
}

impl TryFrom<ModelJson> for FiniteSetDensity {
    type Error = Error;
    fn try_from(j: ModelJson) -> Result<Self> {
        let model = match j.family {
            FamilyJson::IidCluster {
                cardinality,
                spatial,
            } => FiniteSetDensity::iid_cluster(j.space, cardinality, spatial)?,
            FamilyJson::Bernoulli { existence, spatial } => {
                FiniteSetDensity::bernoulli(j.space, existence, spatial)?
            }
            FamilyJson::Tabulated { j0, levels } => {
                let levels = levels
                    .into_iter()
                    .map(|l| match l {
                        None => TabLevel::Zero,
                        Some(t) => TabLevel::ProductField {
                            coeff: t.coeff,
                            factor: t.factor,
                        },
                    })
                    .collect();
                FiniteSetDensity::tabulated(j.space, j0, levels)?
            }
            FamilyJson::Superposition { left, right } => {
                let left: FiniteSetDensity = (*left).try_into()?;
                let right: FiniteSetDensity = (*right).try_into()?;
                superpose(&left, &right)?
            }
        };
        if model.n_max() != j.n_max {
            return Err(Error::invalid(
                "model",
                format!(
                    "declared n_max {} does not match the family capacity {}",
                    j.n_max,
                    model.n_max()
                ),
            ));
        }
        Ok(model)
    }
}

fn model_to_json(model: &FiniteSetDensity) -> Result<ModelJson> {
    let family = match &model.family {
        Family::IidCluster {
            cardinality,
            spatial,
        } => FamilyJson::IidCluster {
            cardinality: cardinality.clone(),
            spatial: spatial.clone(),
        },
        Family::Bernoulli { existence, spatial } => FamilyJson::Bernoulli {
            existence: *existence,
            spatial: spatial.clone(),
        },
        Family::Tabulated { j0, levels } => {
            let levels = levels
                .iter()
                .map(|l| match l {
                    TabLevel::Zero => Ok(None),
                    TabLevel::ProductField { coeff, factor } => Ok(Some(TabLevelJson {
                        coeff: *coeff,
                        factor: factor.clone(),
                    })),
                    TabLevel::Custom(_) => Err(Error::NotSerializable(
                        "tabulated level backed by native code",
                    )),
                })
                .collect::<Result<_>>()?;
            FamilyJson::Tabulated { j0: *j0, levels }
        }
        Family::Superposition { left, right } => FamilyJson::Superposition {
            left: Box::new(model_to_json(left)?),
            right: Box::new(model_to_json(right)?),
        },
    };
    Ok(ModelJson {
        space: model.space.clone(),
        n_max: model.n_max,
        family,
    })
}

impl Serialize for FiniteSetDensity {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        model_to_json(self)
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FiniteSetDensity {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(deserializer)?;
        j.try_into().map_err(serde::de::Error::custom)
    }
}

/// Everything the `validate` surface re-checks about a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelValidation {
    pub n_max: usize,
    pub j0: f64,
    /// |set integral of the family against the reference measure - 1|.
    pub normalization_residual: f64,
    /// Worst deviation of `j_n` under argument permutation at sampled tuples.
    pub symmetry_residual: f64,
    /// Minimum of `j_n` over the sampled tuples (should be >= 0).
    pub min_sampled_value: f64,
    pub k_bound: KBound,
}

impl ModelValidation {
    pub fn passes(&self) -> bool {
        self.normalization_residual <= 1e-6
            && self.symmetry_residual <= 1e-12
            && self.min_sampled_value >= -1e-12
            && (0.0..=1.0 + 1e-12).contains(&self.j0)
            && self.k_bound.value.is_finite()
    }
}

/// Re-check every model invariant: normalization, symmetry at sampled
/// tuples, nonnegativity, and the uniform bound.
pub fn validate_model(model: &FiniteSetDensity) -> Result<ModelValidation> {
    let space = model.space();
    let f = crate::functional::SetFunction::from_janossy(model);
    let norm = crate::functional::set_integral(
        space,
        &f,
        &crate::measure::ComplexMeasure::reference(),
        model.n_max(),
    )?;
    let normalization_residual = (norm - num_complex::Complex64::new(1.0, 0.0)).norm();

    // deterministic sample tuples from a coarse grid
    let grid = space.scan_grid(5);
    let mut symmetry_residual: f64 = 0.0;
    let mut min_sampled = model.janossy_unchecked(&[]);
    for n in 1..=model.n_max().min(3) {
        let stride = (grid.len() / 4).max(1);
        let picks: Vec<&Vec<f64>> = grid.iter().step_by(stride).take(4).collect();
        let mut idx = vec![0usize; n];
        loop {
            let args: Vec<&[f64]> = idx.iter().map(|&i| picks[i].as_slice()).collect();
            let base = model.janossy_unchecked(&args);
            min_sampled = min_sampled.min(base);
            for perm in (0..n).permutations(n) {
                let permuted: Vec<&[f64]> = perm.iter().map(|&k| args[k]).collect();
                let v = model.janossy_unchecked(&permuted);
                symmetry_residual = symmetry_residual.max((v - base).abs());
            }
            let mut k = n;
            let mut done = false;
            loop {
                if k == 0 {
                    done = true;
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < picks.len() {
                    break;
                }
                idx[k] = 0;
            }
            if done {
                break;
            }
        }
    }

    Ok(ModelValidation {
        n_max: model.n_max(),
        j0: model.janossy_unchecked(&[]),
        normalization_residual,
        symmetry_residual,
        min_sampled_value: min_sampled,
        k_bound: bound_k(model),
    })
}

/// A finite union of pairwise disjoint closed sub-boxes of the base space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub boxes: Vec<SubBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SubBox {
    fn intersects(&self, other: &SubBox) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .all(|((al, au), (bl, bu))| al < bu && bl < au)
    }

    fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).max(0.0))
            .product()
    }

    fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .enumerate()
            .all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }
}

impl Region {
    pub fn empty() -> Self {
        Region { boxes: vec![] }
    }

    pub fn whole(space: &BaseSpace) -> Self {
        Region {
            boxes: vec![SubBox {
                lower: space.lower().to_vec(),
                upper: space.upper().to_vec(),
            }],
        }
    }

    pub fn single(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Region {
            boxes: vec![SubBox { lower, upper }],
        }
    }

    pub fn validate(&self, space: &BaseSpace) -> Result<()> {
        for b in &self.boxes {
            if b.lower.len() != space.dim() || b.upper.len() != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    got: b.lower.len().max(b.upper.len()),
                });
            }
            for i in 0..space.dim() {
                if b.lower[i] > b.upper[i] {
                    return Err(Error::invalid("region", "inverted sub-box"));
                }
                if b.lower[i] < space.lower()[i] - 1e-12 || b.upper[i] > space.upper()[i] + 1e-12 {
                    return Err(Error::invalid("region", "sub-box leaves the base space"));
                }
            }
        }
        for (i, a) in self.boxes.iter().enumerate() {
            for b in &self.boxes[i + 1..] {
                if a.intersects(b) {
                    return Err(Error::invalid("region", "sub-boxes overlap"));
                }
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(|b| b.volume()).sum()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(point))
    }

    /// Indicator of the union as a scalar field.
    pub fn indicator_field(&self) -> ScalarField {
        if self.boxes.is_empty() {
            return ScalarField::zero();
        }
        let terms: Vec<ScalarField> = self
            .boxes
            .iter()
            .map(|b| ScalarField::indicator(b.lower.clone(), b.upper.clone()))
            .collect();
        if terms.len() == 1 {
            terms.into_iter().next().unwrap()
        } else {
            ScalarField::Sum { terms }
        }
    }

    /// Union with a closed ball-box (the ball clipped to the base space),
    /// carving the new box so the result stays pairwise disjoint. Returns
    /// the region together with the measure of the clipped ball.
    pub fn union_ball(&self, space: &BaseSpace, center: &[f64], radius: f64) -> Result<(Region, f64)> {
        space.check_point(center)?;
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::invalid("region", "ball radius must be positive"));
        }
        let ball = SubBox {
            lower: (0..space.dim())
                .map(|i| (center[i] - radius).max(space.lower()[i]))
                .collect(),
            upper: (0..space.dim())
                .map(|i| (center[i] + radius).min(space.upper()[i]))
                .collect(),
        };
        let ball_measure = ball.volume();
        // subtract every existing box from the ball, keep the pieces
        let mut pieces = vec![ball];
        for existing in &self.boxes {
            let mut next = Vec::new();
            for piece in pieces {
                next.extend(subtract_box(&piece, existing));
            }
            pieces = next;
        }
        let mut boxes = self.boxes.clone();
        boxes.extend(pieces);
        Ok((Region { boxes }, ball_measure))
    }
}

/// `a \ b` as a list of disjoint boxes (axis-by-axis splitting).
fn subtract_box(a: &SubBox, b: &SubBox) -> Vec<SubBox> {
    if !a.intersects(b) {
        return vec![a.clone()];
    }
    let dim = a.lower.len();
    let mut out = Vec::new();
    let mut core = a.clone();
    for i in 0..dim {
        if b.lower[i] > core.lower[i] {
            let mut piece = core.clone();
            piece.upper[i] = b.lower[i];
            out.push(piece);
            core.lower[i] = b.lower[i];
        }
        if b.upper[i] < core.upper[i] {
            let mut piece = core.clone();
            piece.lower[i] = b.upper[i];
            out.push(piece);
            core.upper[i] = b.upper[i];
        }
    }
    out.retain(|p| p.volume() > 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// iid cluster, rho = (0.25, 0.5, 0.25), uniform spatial pdf on [0,1].
    pub fn model_a() -> FiniteSetDensity {
        FiniteSetDensity::iid_cluster(
            BaseSpace::unit_interval(),
            vec![0.25, 0.5, 0.25],
            ScalarField::one(),
        )
        .unwrap()
    }

    #[test]
    fn model_a_janossy_values() {
        let m = model_a();
        assert_relative_eq!(m.janossy(&[]).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(m.janossy(&[&[0.3]]).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.janossy(&[&[0.3], &[0.7]]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn truncation_returns_zero_and_outside_errors() {
        let m = model_a();
        assert_eq!(m.janossy(&[&[0.1], &[0.2], &[0.3]]).unwrap(), 0.0);
        assert!(m.janossy(&[&[1.4]]).is_err());
    }

    #[test]
    fn empty_process_is_superposition_identity() {
        let m = model_a();
        let empty = FiniteSetDensity::tabulated(BaseSpace::unit_interval(), 1.0, vec![]).unwrap();
        let s = superpose(&empty, &m).unwrap();
        for pts in [vec![], vec![0.3], vec![0.3, 0.7]] {
            let args: Vec<&[f64]> = pts.iter().map(std::slice::from_ref).collect();
            assert_relative_eq!(
                s.janossy(&args).unwrap(),
                m.janossy(&args).unwrap(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn superpose_rejects_mismatched_spaces() {
        let a = model_a();
        let other = FiniteSetDensity::bernoulli(
            BaseSpace::new(vec![0.0], vec![2.0]).unwrap(),
            0.5,
            ScalarField::constant(0.5),
        )
        .unwrap();
        assert!(matches!(superpose(&a, &other), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn two_bernoulli_superposition_j0() {
        let s = BaseSpace::unit_interval();
        let b = FiniteSetDensity::bernoulli(s.clone(), 0.5, ScalarField::one()).unwrap();
        let sup = superpose(&b, &b).unwrap();
        assert_relative_eq!(sup.janossy(&[]).unwrap(), 0.25, epsilon = 1e-15);
        // j_1(x) = ja_0*jb_1 + ja_1*jb_0 = 0.5*0.5 + 0.5*0.5
        assert_relative_eq!(sup.janossy(&[&[0.2]]).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(sup.n_max(), 2);
    }

    #[test]
    fn symmetrize_averages_and_is_idempotent() {
        let g = |pts: &[&[f64]]| pts[0][0];
        let sym = symmetrize(2, g);
        assert_relative_eq!(sym(&[&[0.2], &[0.8]]), 0.5, epsilon = 1e-15);

        let already = |pts: &[&[f64]]| pts[0][0] + pts[1][0];
        let sym1 = symmetrize(2, already);
        let sym2 = symmetrize(2, symmetrize(2, already));
        for (a, b) in [([0.1], [0.9]), ([0.4], [0.5])] {
            assert_relative_eq!(sym1(&[&a, &b]), sym2(&[&a, &b]), epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetrized_cubic_is_permutation_invariant() {
        let f = |pts: &[&[f64]]| {
            pts[0][0] * pts[0][0] + 2.0 * pts[1][0] + 0.3 * pts[2][0] * pts[1][0]
        };
        let sym = symmetrize(3, f);
        let tuples = [[0.1, 0.5, 0.9], [0.2, 0.3, 0.4], [0.7, 0.1, 0.6]];
        for t in tuples {
            let base = sym(&[&[t[0]], &[t[1]], &[t[2]]]);
            for perm in (0..3).permutations(3) {
                let v = sym(&[&[t[perm[0]]], &[t[perm[1]]], &[t[perm[2]]]]);
                assert_relative_eq!(base, v, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn bound_k_model_a() {
        let k = bound_k(&model_a());
        assert_relative_eq!(k.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn bound_k_sure_bernoulli() {
        let s = BaseSpace::unit_interval();
        let m = FiniteSetDensity::bernoulli(s, 1.0, ScalarField::one()).unwrap();
        assert_relative_eq!(bound_k(&m).value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_k_tabulated_constant() {
        let s = BaseSpace::unit_interval();
        let m = FiniteSetDensity::tabulated(s, 1.0, vec![TabLevel::Zero, TabLevel::Zero]).unwrap();
        assert_relative_eq!(bound_k(&m).value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn model_json_round_trip() {
        let m = model_a();
        let text = serde_json::to_string(&m).unwrap();
        let back: FiniteSetDensity = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n_max(), 2);
        assert_eq!(back.janossy(&[&[0.3]]).unwrap(), 0.5);

        let sup = superpose(&m, &m).unwrap();
        let text = serde_json::to_string(&sup).unwrap();
        let back: FiniteSetDensity = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n_max(), 4);

        // native-code levels cannot be written out
        let custom = FiniteSetDensity::tabulated(
            BaseSpace::unit_interval(),
            1.0,
            vec![TabLevel::Custom(Arc::new(|_: &[&[f64]]| 0.0))],
        )
        .unwrap();
        assert!(serde_json::to_string(&custom).is_err());
    }

    #[test]
    fn model_json_rejects_inconsistent_n_max() {
        let text = r#"{
            "space": {"dim":1,"lower":[0.0],"upper":[1.0],"quadrature":{"kind":"gauss_legendre","order":32}},
            "n_max": 3,
            "family": {"kind":"bernoulli","existence":0.5,"spatial":{"kind":"constant","value":{"re":1.0,"im":0.0}}}
        }"#;
        assert!(serde_json::from_str::<FiniteSetDensity>(text).is_err());
    }

    #[test]
    fn region_validation_and_ball_union() {
        let s = BaseSpace::unit_interval();
        let r = Region::single(vec![0.0], vec![0.4]);
        r.validate(&s).unwrap();
        let overlapping = Region {
            boxes: vec![
                SubBox {
                    lower: vec![0.0],
                    upper: vec![0.5],
                },
                SubBox {
                    lower: vec![0.4],
                    upper: vec![0.8],
                },
            ],
        };
        assert!(overlapping.validate(&s).is_err());

        let (union, mass) = r.union_ball(&s, &[0.7], 0.1).unwrap();
        union.validate(&s).unwrap();
        assert_relative_eq!(mass, 0.2, epsilon = 1e-15);
        assert_relative_eq!(union.volume(), 0.6, epsilon = 1e-15);

        // ball overlapping the region: the overlap is carved away
        let (union, _) = r.union_ball(&s, &[0.45], 0.1).unwrap();
        union.validate(&s).unwrap();
        assert_relative_eq!(union.volume(), 0.55, epsilon = 1e-13);
    }

    #[test]
    fn ball_clipped_at_the_boundary() {
        let s = BaseSpace::unit_interval();
        let (_, mass) = Region::empty().union_ball(&s, &[0.05], 0.1).unwrap();
        assert_relative_eq!(mass, 0.15, epsilon = 1e-15);
    }
}
