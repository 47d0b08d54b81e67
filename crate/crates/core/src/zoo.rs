//! The bundled model zoo: one closed-form reference model plus quadrature
//! models covering smooth spatial pdfs, two dimensions, a renormalized
//! truncated-Poisson cardinality law, and a superposition.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::measure::gaussian_box_mass;
use crate::model::{superpose, FiniteSetDensity};
use crate::space::BaseSpace;

#[derive(Debug, Clone)]
pub struct ZooModel {
    pub id: &'static str,
    pub description: &'static str,
    pub model: FiniteSetDensity,
    /// Tail mass removed by cardinality truncation, when applicable.
    pub truncated_mass: Option<f64>,
}

/// A Gaussian bump renormalized to a probability density on the box.
pub fn truncated_gaussian_pdf(space: &BaseSpace, center: Vec<f64>, sigma: f64) -> ScalarField {
    let mass = gaussian_box_mass(space, &center, sigma);
    ScalarField::gaussian(center, sigma, 1.0 / mass)
}

/// The closed-form reference: iid cluster with cardinality pmf
/// (0.25, 0.5, 0.25) and uniform spatial pdf on [0, 1]. Its generating
/// functional is the quadratic polynomial 0.25 + 0.5 t + 0.25 t^2 in the
/// total mass of the input, so every expected value is hand-computable.
pub fn model_a() -> FiniteSetDensity {
    FiniteSetDensity::iid_cluster(
        BaseSpace::unit_interval(),
        vec![0.25, 0.5, 0.25],
        ScalarField::one(),
    )
    .expect("reference model is valid")
}

pub fn zoo() -> Vec<ZooModel> {
    let line = BaseSpace::unit_interval();
    let square = BaseSpace::unit_square();

    let bernoulli_gauss = FiniteSetDensity::bernoulli(
        line.clone(),
        0.7,
        truncated_gaussian_pdf(&line, vec![0.35], 0.15),
    )
    .expect("bernoulli model is valid");

    let (poisson, tail) = FiniteSetDensity::truncated_poisson(
        line.clone(),
        1.2,
        4,
        truncated_gaussian_pdf(&line, vec![0.45], 0.25),
    )
    .expect("poisson model is valid");

    let bernoulli_2d = FiniteSetDensity::bernoulli(
        square.clone(),
        0.6,
        truncated_gaussian_pdf(&square, vec![0.4, 0.6], 0.2),
    )
    .expect("planar bernoulli model is valid");

    let superposition =
        superpose(&model_a(), &bernoulli_gauss).expect("superposition shares the space");

    vec![
        ZooModel {
            id: "model_a",
            description: "iid cluster, pmf (0.25, 0.5, 0.25), uniform pdf on [0,1]",
            model: model_a(),
            truncated_mass: None,
        },
        ZooModel {
            id: "bernoulli_gauss",
            description: "Bernoulli r=0.7 with truncated-Gaussian pdf (0.35, 0.15)",
            model: bernoulli_gauss,
            truncated_mass: None,
        },
        ZooModel {
            id: "poisson_trunc",
            description: "truncated Poisson rate 1.2, n_max 4, renormalized; pdf (0.45, 0.25)",
            model: poisson,
            truncated_mass: Some(tail),
        },
        ZooModel {
            id: "bernoulli_2d",
            description: "Bernoulli r=0.6 on [0,1]^2 with truncated-Gaussian pdf",
            model: bernoulli_2d,
            truncated_mass: None,
        },
        ZooModel {
            id: "superposition",
            description: "superposition of model_a and bernoulli_gauss",
            model: superposition,
            truncated_mass: None,
        },
    ]
}

pub fn zoo_model(id: &str) -> Result<ZooModel> {
    zoo()
        .into_iter()
        .find(|z| z.id == id)
        .ok_or_else(|| Error::UnknownModel(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;
    use approx::assert_relative_eq;

    #[test]
    fn every_zoo_model_validates() {
        for z in zoo() {
            let v = validate_model(&z.model).unwrap();
            assert!(
                v.passes(),
                "{} failed validation: {:?}",
                z.id,
                (v.normalization_residual, v.symmetry_residual, v.min_sampled_value)
            );
        }
    }

    #[test]
    fn model_a_normalizes_to_closed_form_accuracy() {
        let v = validate_model(&model_a()).unwrap();
        assert!(v.normalization_residual <= 1e-10);
        assert_relative_eq!(v.k_bound.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn truncated_poisson_reports_tail_mass() {
        let z = zoo_model("poisson_trunc").unwrap();
        let tail = z.truncated_mass.unwrap();
        // Poisson(1.2): P[N > 4] ~ 0.0077
        assert!(tail > 0.005 && tail < 0.01, "tail {tail}");
    }

    #[test]
    fn unknown_id_errors() {
        assert!(zoo_model("nope").is_err());
    }
}
