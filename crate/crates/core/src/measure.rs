//! Complex measures on the box: a finite atomic part (weighted Dirac atoms)
//! plus an absolutely continuous part given by a scalar-field density
//! against the reference measure. The two parts are mutually singular, so
//! total variations add.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::BaseSpace;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point mass: location inside the box, complex weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "AtomJson", into = "AtomJson")]
pub struct Atom {
    pub position: Vec<f64>,
    pub weight: Complex64,
}

#[derive(Serialize, Deserialize, Clone)]
struct AtomJson {
    x: Vec<f64>,
    re: f64,
    im: f64,
}

impl From<AtomJson> for Atom {
    fn from(j: AtomJson) -> Self {
        Atom {
            position: j.x,
            weight: Complex64::new(j.re, j.im),
        }
    }
}

impl From<Atom> for AtomJson {
    fn from(a: Atom) -> Self {
        AtomJson {
            x: a.position,
            re: a.weight.re,
            im: a.weight.im,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<ScalarField>,
}

impl ComplexMeasure {
    pub fn zero() -> Self {
        ComplexMeasure::default()
    }

    /// The Dirac measure at `x`: a single unit atom.
    pub fn dirac(space: &BaseSpace, x: &[f64]) -> Result<Self> {
        space.check_point(x)?;
        Ok(ComplexMeasure {
            atoms: vec![Atom {
                position: x.to_vec(),
                weight: Complex64::new(1.0, 0.0),
            }],
            density: None,
        })
    }

    /// The reference measure itself: density identically one.
    pub fn reference() -> Self {
        ComplexMeasure {
            atoms: vec![],
            density: Some(ScalarField::one()),
        }
    }

    pub fn from_density(density: ScalarField) -> Self {
        ComplexMeasure {
            atoms: vec![],
            density: Some(density),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none()
    }

    pub fn validate(&self, space: &BaseSpace) -> Result<()> {
        for a in &self.atoms {
            space.check_point(&a.position)?;
            if !a.weight.re.is_finite() || !a.weight.im.is_finite() {
                return Err(Error::invalid("measure", "non-finite atom weight"));
            }
        }
        if let Some(d) = &self.density {
            d.validate(space)?;
        }
        Ok(())
    }

    pub fn scale(&self, factor: impl Into<Complex64>) -> Self {
        let factor = factor.into();
        ComplexMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    position: a.position.clone(),
                    weight: factor * a.weight,
                })
                .collect(),
            density: self.density.clone().map(|d| d.scaled(factor)),
        }
    }

    pub fn add(&self, other: &ComplexMeasure) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(a), Some(b)) => Some(a.clone().plus(b.clone())),
        };
        ComplexMeasure { atoms, density }
    }

    /// Atoms at identical locations merged, weights summed; the norm is a
    /// property of the measure, not of its representation.
    pub fn coalesced_atoms(&self) -> Vec<Atom> {
        let mut merged: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            if let Some(m) = merged.iter_mut().find(|m| m.position == a.position) {
                m.weight += a.weight;
            } else {
                merged.push(a.clone());
            }
        }
        merged
    }

    /// Total variation: sum of atom weight moduli plus the integral of the
    /// density modulus against the reference measure.
    pub fn total_variation(&self, space: &BaseSpace) -> Result<f64> {
        self.validate(space)?;
        let atomic: f64 = self.coalesced_atoms().iter().map(|a| a.weight.norm()).sum();
        let continuous = match &self.density {
            None => 0.0,
            Some(d) => {
                let rule = space.rule_with_breakpoints(&d.breakpoints(space))?;
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * d.eval(p).norm())
                    .sum()
            }
        };
        Ok(atomic + continuous)
    }

    /// Per-axis breakpoints of the density part, for panelized rules.
    pub fn breakpoints(&self, space: &BaseSpace) -> Vec<Vec<f64>> {
        match &self.density {
            Some(d) => d.breakpoints(space),
            None => vec![Vec::new(); space.dim()],
        }
    }
}

/// Integral of a field against a measure: the atomic part sifts point
/// values exactly, the continuous part goes through quadrature panelized
/// for both the field and the density.
pub fn integrate(space: &BaseSpace, f: &ScalarField, eta: &ComplexMeasure) -> Result<Complex64> {
    eta.validate(space)?;
    f.validate(space)?;
    let mut total = Complex64::new(0.0, 0.0);
    for a in &eta.atoms {
        total += a.weight * f.eval(&a.position);
    }
    if let Some(d) = &eta.density {
        let mut cuts = f.breakpoints(space);
        for (axis, extra) in d.breakpoints(space).into_iter().enumerate() {
            cuts[axis].extend(extra);
        }
        let rule = space.rule_with_breakpoints(&cuts)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            total += w * f.eval(p) * d.eval(p);
        }
    }
    Ok(total)
}

/// A family shrinking toward the Dirac delta at `center`: member shape
/// `width^{-d} f((y - x)/width)` with `f` a standard Gaussian density or a
/// normalized box indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSequenceKind {
    Gaussian,
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSequenceFamily {
    pub kind: TestSequenceKind,
    pub center: Vec<f64>,
    pub width: f64,
}

impl TestSequenceFamily {
    pub fn gaussian(center: Vec<f64>, width: f64) -> Self {
        TestSequenceFamily {
            kind: TestSequenceKind::Gaussian,
            center,
            width,
        }
    }

    pub fn indicator(center: Vec<f64>, width: f64) -> Self {
        TestSequenceFamily {
            kind: TestSequenceKind::Indicator,
            center,
            width,
        }
    }

    pub fn with_width(&self, width: f64) -> Self {
        TestSequenceFamily {
            kind: self.kind,
            center: self.center.clone(),
            width,
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Mass of the unit-amplitude Gaussian profile `exp(-|y-c|^2/(2 w^2))`
/// restricted to the box (closed form via the error function).
pub fn gaussian_box_mass(space: &BaseSpace, center: &[f64], width: f64) -> f64 {
    (0..space.dim())
        .map(|i| {
            let a = (space.lower()[i] - center[i]) / width;
            let b = (space.upper()[i] - center[i]) / width;
            width * (2.0 * std::f64::consts::PI).sqrt() * (std_normal_cdf(b) - std_normal_cdf(a))
        })
        .product()
}

/// One member of the family, renormalized to unit mass over the box when
/// the boundary truncates it.
pub fn test_member(space: &BaseSpace, family: &TestSequenceFamily) -> Result<ScalarField> {
    if family.width.is_nan() || family.width <= 0.0 || !family.width.is_finite() {
        return Err(Error::invalid("test sequence", "width must be positive"));
    }
    space.check_point(&family.center)?;
    let lam = family.width;
    match family.kind {
        TestSequenceKind::Gaussian => {
            let mass = gaussian_box_mass(space, &family.center, lam);
            if mass <= 0.0 {
                return Err(Error::invalid("test sequence", "member mass vanished"));
            }
            Ok(ScalarField::gaussian(family.center.clone(), lam, 1.0 / mass))
        }
        TestSequenceKind::Indicator => {
            let mut lower = Vec::with_capacity(space.dim());
            let mut upper = Vec::with_capacity(space.dim());
            let mut volume = 1.0;
            for i in 0..space.dim() {
                let lo = (family.center[i] - lam).max(space.lower()[i]);
                let hi = (family.center[i] + lam).min(space.upper()[i]);
                if hi <= lo {
                    return Err(Error::invalid("test sequence", "member support vanished"));
                }
                lower.push(lo);
                upper.push(hi);
                volume *= hi - lo;
            }
            Ok(ScalarField::Indicator {
                lower,
                upper,
                amplitude: Complex64::new(1.0 / volume, 0.0),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space() -> BaseSpace {
        BaseSpace::unit_interval()
    }

    #[test]
    fn dirac_is_a_unit_atom() {
        let s = space();
        let d = ComplexMeasure::dirac(&s, &[0.5]).unwrap();
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms[0].weight, Complex64::new(1.0, 0.0));
        assert!(d.density.is_none());
        assert_relative_eq!(d.total_variation(&s).unwrap(), 1.0, epsilon = 1e-15);
        assert!(ComplexMeasure::dirac(&s, &[1.5]).is_err());
    }

    #[test]
    fn dirac_scaled_by_2i_has_norm_two() {
        let s = space();
        let d = ComplexMeasure::dirac(&s, &[0.3])
            .unwrap()
            .scale(Complex64::new(0.0, 2.0));
        assert_relative_eq!(d.total_variation(&s).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn total_variation_sums_moduli_and_density() {
        let s = space();
        let m = ComplexMeasure {
            atoms: vec![
                Atom {
                    position: vec![0.2],
                    weight: Complex64::new(3.0, 0.0),
                },
                Atom {
                    position: vec![0.8],
                    weight: Complex64::new(0.0, -4.0),
                },
            ],
            density: None,
        };
        assert_relative_eq!(m.total_variation(&s).unwrap(), 7.0, epsilon = 1e-14);

        let m = ComplexMeasure::from_density(ScalarField::constant(-2.0));
        assert_relative_eq!(m.total_variation(&s).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn opposite_atoms_coalesce_to_zero_norm() {
        let s = space();
        let d = ComplexMeasure::dirac(&s, &[0.5]).unwrap();
        let m = d.add(&d.scale(-1.0));
        assert_eq!(m.total_variation(&s).unwrap(), 0.0);
    }

    #[test]
    fn sifting_is_exact() {
        let s = space();
        let g = ScalarField::gaussian(vec![0.25], 0.1, Complex64::new(1.0, 2.0));
        let d = ComplexMeasure::dirac(&s, &[0.7]).unwrap();
        let got = integrate(&s, &g, &d).unwrap();
        assert_eq!(got, g.eval(&[0.7]));
    }

    #[test]
    fn reference_measure_of_one_is_the_volume() {
        let s = space();
        let got = integrate(&s, &ScalarField::one(), &ComplexMeasure::reference()).unwrap();
        assert_relative_eq!(got.re, 1.0, max_relative = 1e-12);
        assert_relative_eq!(got.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn indicator_member_height_matches_window() {
        let s = space();
        let f = test_member(&s, &TestSequenceFamily::indicator(vec![0.5], 0.1)).unwrap();
        assert_relative_eq!(f.eval(&[0.5]).re, 5.0, epsilon = 1e-12);
        assert_relative_eq!(f.eval(&[0.41]).re, 5.0, epsilon = 1e-12);
        assert_eq!(f.eval(&[0.39]).re, 0.0);
        let mass = integrate(&s, &f, &ComplexMeasure::reference()).unwrap();
        assert_relative_eq!(mass.re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_member_has_unit_mass() {
        let s = space();
        for lam in [0.2, 0.1, 0.05, 0.025] {
            let f = test_member(&s, &TestSequenceFamily::gaussian(vec![0.3], lam)).unwrap();
            let mass = integrate(&s, &f, &ComplexMeasure::reference()).unwrap();
            assert_relative_eq!(mass.re, 1.0, epsilon = 1e-10);
            assert!(mass.im.abs() < 1e-14);
        }
    }

    #[test]
    fn member_concentrates_mass_near_center() {
        let s = space();
        let ball = ScalarField::indicator(vec![0.4], vec![0.6]);
        let mut last = 0.0;
        for lam in [0.2, 0.1, 0.05] {
            let f = test_member(&s, &TestSequenceFamily::gaussian(vec![0.5], lam)).unwrap();
            let inside = integrate(&s, &ball.clone().times(f), &ComplexMeasure::reference())
                .unwrap()
                .re;
            assert!(inside > last);
            last = inside;
        }
        assert!(last > 0.95);
    }

    #[test]
    fn smoothing_error_decreases_with_width() {
        // integrate(g, member) -> g(center) with error shrinking along the
        // schedule, for a smooth g.
        let s = space();
        let g = ScalarField::gaussian(vec![0.4], 0.3, 1.0);
        let mut errors = Vec::new();
        for lam in [0.2, 0.1, 0.05] {
            let member = test_member(&s, &TestSequenceFamily::gaussian(vec![0.5], lam)).unwrap();
            let smoothed =
                integrate(&s, &g.clone().times(member), &ComplexMeasure::reference()).unwrap();
            errors.push((smoothed.re - g.eval(&[0.5]).re).abs());
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    }

    #[test]
    fn measure_json_round_trip() {
        let m = ComplexMeasure {
            atoms: vec![Atom {
                position: vec![0.1],
                weight: Complex64::new(1.0, -2.0),
            }],
            density: Some(ScalarField::gaussian(vec![0.5], 0.2, 0.7)),
        };
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"x\""));
        let back: ComplexMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }
}
