//! Closed-form complex-valued scalar fields on the box: the function-space
//! argument of the generating functional, test-sequence members, spatial
//! densities, and indicator functions all live here.
//!
//! A field is a small expression tree. Evaluation is deterministic, and
//! every field exposes a conservative sup-norm bound together with a
//! grid-sampled maximum that carries a witness point.

use crate::error::{Error, Result};
use crate::space::BaseSpace;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    #[serde(with = "crate::cjson")]
    pub coeff: Complex64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Constant {
        #[serde(with = "crate::cjson")]
        value: Complex64,
    },
    /// `amplitude * exp(-|y - center|^2 / (2 width^2))`, unnormalized.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(with = "crate::cjson")]
        amplitude: Complex64,
    },
    /// `amplitude` on the closed sub-box, zero elsewhere.
    Indicator {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(with = "crate::cjson")]
        amplitude: Complex64,
    },
    Polynomial {
        terms: Vec<PolyTerm>,
    },
    Sum {
        terms: Vec<ScalarField>,
    },
    Product {
        factors: Vec<ScalarField>,
    },
    Scale {
        #[serde(with = "crate::cjson")]
        factor: Complex64,
        inner: Box<ScalarField>,
    },
}

impl ScalarField {
    pub fn constant(value: impl Into<Complex64>) -> Self {
        ScalarField::Constant {
            value: value.into(),
        }
    }

    pub fn zero() -> Self {
        ScalarField::constant(0.0)
    }

    pub fn one() -> Self {
        ScalarField::constant(1.0)
    }

    pub fn gaussian(center: Vec<f64>, width: f64, amplitude: impl Into<Complex64>) -> Self {
        ScalarField::Gaussian {
            center,
            width,
            amplitude: amplitude.into(),
        }
    }

    pub fn indicator(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        ScalarField::Indicator {
            lower,
            upper,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    pub fn scaled(self, factor: impl Into<Complex64>) -> Self {
        ScalarField::Scale {
            factor: factor.into(),
            inner: Box::new(self),
        }
    }

    pub fn plus(self, other: ScalarField) -> Self {
        ScalarField::Sum {
            terms: vec![self, other],
        }
    }

    pub fn times(self, other: ScalarField) -> Self {
        ScalarField::Product {
            factors: vec![self, other],
        }
    }

    pub fn eval(&self, point: &[f64]) -> Complex64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let q: f64 = point
                    .iter()
                    .zip(center)
                    .map(|(x, c)| {
                        let t = (x - c) / width;
                        t * t
                    })
                    .sum();
                amplitude * (-0.5 * q).exp()
            }
            ScalarField::Indicator {
                lower,
                upper,
                amplitude,
            } => {
                let inside = point
                    .iter()
                    .enumerate()
                    .all(|(i, &x)| x >= lower[i] && x <= upper[i]);
                if inside {
                    *amplitude
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            ScalarField::Polynomial { terms } => terms
                .iter()
                .map(|t| {
                    let mono: f64 = t
                        .powers
                        .iter()
                        .zip(point)
                        .map(|(&p, &x)| x.powi(p as i32))
                        .product();
                    t.coeff * mono
                })
                .sum(),
            ScalarField::Sum { terms } => terms.iter().map(|t| t.eval(point)).sum(),
            ScalarField::Product { factors } => factors
                .iter()
                .map(|f| f.eval(point))
                .fold(Complex64::new(1.0, 0.0), |a, b| a * b),
            ScalarField::Scale { factor, inner } => factor * inner.eval(point),
        }
    }

    /// A true upper bound for sup |f| over the box. Exact for constants and
    /// indicators, analytic for Gaussians (axis-aligned, so the maximum sits
    /// at the center clamped into the box), interval-style otherwise.
    pub fn sup_bound(&self, space: &BaseSpace) -> f64 {
        match self {
            ScalarField::Constant { value } => value.norm(),
            ScalarField::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let q: f64 = center
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        let lo = space.lower()[i];
                        let hi = space.upper()[i];
                        let d = if c < lo {
                            lo - c
                        } else if c > hi {
                            c - hi
                        } else {
                            0.0
                        };
                        let t = d / width;
                        t * t
                    })
                    .sum();
                amplitude.norm() * (-0.5 * q).exp()
            }
            ScalarField::Indicator {
                lower,
                upper,
                amplitude,
            } => {
                let intersects = (0..space.dim()).all(|i| {
                    lower.get(i).copied().unwrap_or(f64::NEG_INFINITY) <= space.upper()[i]
                        && upper.get(i).copied().unwrap_or(f64::INFINITY) >= space.lower()[i]
                });
                if intersects {
                    amplitude.norm()
                } else {
                    0.0
                }
            }
            ScalarField::Polynomial { terms } => terms
                .iter()
                .map(|t| {
                    let mono: f64 = t
                        .powers
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| {
                            space.lower()[i].abs().max(space.upper()[i].abs()).powi(p as i32)
                        })
                        .product();
                    t.coeff.norm() * mono
                })
                .sum(),
            ScalarField::Sum { terms } => terms.iter().map(|t| t.sup_bound(space)).sum(),
            ScalarField::Product { factors } => {
                factors.iter().map(|f| f.sup_bound(space)).product()
            }
            ScalarField::Scale { factor, inner } => factor.norm() * inner.sup_bound(space),
        }
    }

    /// Grid-sampled maximum of |f| with its witness point. The grid is
    /// uniform and includes the box corners, so indicator plateaus and
    /// centered bumps are hit exactly.
    pub fn grid_max(&self, space: &BaseSpace, per_axis: usize) -> (f64, Vec<f64>) {
        let mut best = f64::NEG_INFINITY;
        let mut witness = space.lower().to_vec();
        for p in space.scan_grid(per_axis) {
            let v = self.eval(&p).norm();
            if v > best {
                best = v;
                witness = p;
            }
        }
        (best, witness)
    }

    /// Per-axis panel boundaries that make the field piecewise smooth for
    /// the panelized quadrature: indicator edges, and an effective-support
    /// window around Gaussians that are narrow relative to the axis span
    /// (wide bumps are already resolved by the base rule).
    pub fn breakpoints(&self, space: &BaseSpace) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); space.dim()];
        self.collect_breakpoints(space, &mut out);
        out
    }

    fn collect_breakpoints(&self, space: &BaseSpace, out: &mut [Vec<f64>]) {
        match self {
            ScalarField::Constant { .. } | ScalarField::Polynomial { .. } => {}
            ScalarField::Gaussian { center, width, .. } => {
                for (i, &c) in center.iter().enumerate() {
                    if i < out.len() {
                        let span = space.upper()[i] - space.lower()[i];
                        if *width <= span / 8.0 {
                            for k in [6.0, 10.0] {
                                out[i].push(c - k * width);
                                out[i].push(c + k * width);
                            }
                        }
                    }
                }
            }
            ScalarField::Indicator { lower, upper, .. } => {
                for (i, cuts) in out.iter_mut().enumerate() {
                    if let Some(&l) = lower.get(i) {
                        cuts.push(l);
                    }
                    if let Some(&u) = upper.get(i) {
                        cuts.push(u);
                    }
                }
            }
            ScalarField::Sum { terms } => {
                for t in terms {
                    t.collect_breakpoints(space, out);
                }
            }
            ScalarField::Product { factors } => {
                for f in factors {
                    f.collect_breakpoints(space, out);
                }
            }
            ScalarField::Scale { inner, .. } => inner.collect_breakpoints(space, out),
        }
    }

    /// Structural validation against a space: coordinate vectors must match
    /// the dimension and numeric parameters must be finite.
    pub fn validate(&self, space: &BaseSpace) -> Result<()> {
        let dim = space.dim();
        let check_vec = |v: &Vec<f64>, what: &'static str| -> Result<()> {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(what, "non-finite coordinate"));
            }
            Ok(())
        };
        match self {
            ScalarField::Constant { value } => {
                if !value.re.is_finite() || !value.im.is_finite() {
                    return Err(Error::invalid("field", "non-finite constant"));
                }
            }
            ScalarField::Gaussian { center, width, .. } => {
                check_vec(center, "gaussian center")?;
                if width.is_nan() || *width <= 0.0 || !width.is_finite() {
                    return Err(Error::invalid("field", "gaussian width must be positive"));
                }
            }
            ScalarField::Indicator { lower, upper, .. } => {
                check_vec(lower, "indicator lower")?;
                check_vec(upper, "indicator upper")?;
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::invalid("field", "indicator box is inverted"));
                }
            }
            ScalarField::Polynomial { terms } => {
                for t in terms {
                    if t.powers.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: t.powers.len(),
                        });
                    }
                }
            }
            ScalarField::Sum { terms } => {
                for t in terms {
                    t.validate(space)?;
                }
            }
            ScalarField::Product { factors } => {
                for f in factors {
                    f.validate(space)?;
                }
            }
            ScalarField::Scale { inner, .. } => inner.validate(space)?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_and_indicator_eval() {
        let c = ScalarField::constant(Complex64::new(2.0, -1.0));
        assert_eq!(c.eval(&[0.3]), Complex64::new(2.0, -1.0));

        let ind = ScalarField::indicator(vec![0.2], vec![0.6]);
        assert_eq!(ind.eval(&[0.2]).re, 1.0);
        assert_eq!(ind.eval(&[0.61]).re, 0.0);
    }

    #[test]
    fn gaussian_sup_is_exact_for_interior_center() {
        let s = BaseSpace::unit_interval();
        let g = ScalarField::gaussian(vec![0.5], 0.1, 3.0);
        assert_relative_eq!(g.sup_bound(&s), 3.0, max_relative = 1e-14);
        // center outside the box: maximum at the nearest corner
        let g = ScalarField::gaussian(vec![1.5], 0.5, 1.0);
        assert_relative_eq!(g.sup_bound(&s), (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn sum_product_bounds_dominate_grid_max() {
        let s = BaseSpace::unit_interval();
        let f = ScalarField::gaussian(vec![0.3], 0.2, Complex64::new(0.4, 0.4))
            .plus(ScalarField::constant(0.5))
            .times(ScalarField::Polynomial {
                terms: vec![PolyTerm {
                    coeff: Complex64::new(1.0, 0.0),
                    powers: vec![2],
                }],
            });
        let (gmax, _) = f.grid_max(&s, 257);
        assert!(f.sup_bound(&s) >= gmax);
    }

    #[test]
    fn grid_max_finds_bump_center_witness() {
        let s = BaseSpace::unit_interval();
        let f = ScalarField::constant(0.9).plus(ScalarField::gaussian(vec![0.5], 0.05, 0.2));
        let (m, w) = f.grid_max(&s, 257);
        assert!(m > 1.0);
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn field_json_round_trip() {
        let f = ScalarField::gaussian(vec![0.5], 0.1, Complex64::new(0.0, 2.0))
            .scaled(Complex64::new(1.0, -1.0))
            .plus(ScalarField::indicator(vec![0.0], vec![0.5]));
        let text = serde_json::to_string(&f).unwrap();
        let back: ScalarField = serde_json::from_str(&text).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn validation_rejects_bad_width_and_dim() {
        let s = BaseSpace::unit_interval();
        assert!(ScalarField::gaussian(vec![0.5], 0.0, 1.0).validate(&s).is_err());
        assert!(ScalarField::gaussian(vec![0.5, 0.5], 0.1, 1.0)
            .validate(&s)
            .is_err());
    }
}
