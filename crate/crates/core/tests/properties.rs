//! Property tests for the measure and model layers: the randomized
//! counterparts of the module invariants.

use num_complex::Complex64;
use pgfm_core::field::ScalarField;
use pgfm_core::measure::{integrate, Atom, ComplexMeasure};
use pgfm_core::model::symmetrize;
use pgfm_core::space::BaseSpace;
use pgfm_core::zoo::model_a;
use proptest::prelude::*;

fn complex(radius: f64) -> impl Strategy<Value = Complex64> {
    ((-radius..radius), (-radius..radius)).prop_map(|(re, im)| Complex64::new(re, im))
}

fn atom() -> impl Strategy<Value = Atom> {
    ((0.01..0.99f64), complex(2.0)).prop_map(|(x, weight)| Atom {
        position: vec![x],
        weight,
    })
}

fn atomic_measure() -> impl Strategy<Value = ComplexMeasure> {
    proptest::collection::vec(atom(), 0..4).prop_map(|atoms| ComplexMeasure {
        atoms,
        density: None,
    })
}

fn smooth_field() -> impl Strategy<Value = ScalarField> {
    ((0.1..0.9f64), (0.15..0.4f64), complex(1.5)).prop_map(|(c, w, a)| {
        ScalarField::gaussian(vec![c], w, a).plus(ScalarField::constant(0.3))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_is_linear_in_the_measure(
        eta in atomic_measure(),
        nu in atomic_measure(),
        a in complex(1.5),
        b in complex(1.5),
        f in smooth_field(),
    ) {
        let space = BaseSpace::unit_interval();
        let lhs = integrate(&space, &f, &eta.scale(a).add(&nu.scale(b))).unwrap();
        let rhs = a * integrate(&space, &f, &eta).unwrap() + b * integrate(&space, &f, &nu).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn duality_bound_holds(eta in atomic_measure(), f in smooth_field()) {
        let space = BaseSpace::unit_interval();
        let value = integrate(&space, &f, &eta).unwrap().norm();
        let bound = f.sup_bound(&space) * eta.total_variation(&space).unwrap();
        prop_assert!(value <= bound * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn total_variation_is_a_norm(
        eta in atomic_measure(),
        nu in atomic_measure(),
        c in complex(2.0),
    ) {
        let space = BaseSpace::unit_interval();
        let tv_eta = eta.total_variation(&space).unwrap();
        let tv_scaled = eta.scale(c).total_variation(&space).unwrap();
        prop_assert!((tv_scaled - c.norm() * tv_eta).abs() <= 1e-12 * tv_eta.max(1.0));
        let tv_sum = eta.add(&nu).total_variation(&space).unwrap();
        let tv_nu = nu.total_variation(&space).unwrap();
        prop_assert!(tv_sum <= tv_eta + tv_nu + 1e-12);
    }

    #[test]
    fn dirac_sifting_is_exact(x in 0.0..1.0f64, f in smooth_field()) {
        let space = BaseSpace::unit_interval();
        let d = ComplexMeasure::dirac(&space, &[x]).unwrap();
        prop_assert_eq!(integrate(&space, &f, &d).unwrap(), f.eval(&[x]));
    }

    #[test]
    fn symmetrized_callables_are_permutation_invariant(
        x in 0.01..0.99f64,
        y in 0.01..0.99f64,
        a in -2.0..2.0f64,
    ) {
        let g = move |pts: &[&[f64]]| a * pts[0][0] + pts[1][0] * pts[1][0];
        let sym = symmetrize(2, g);
        let v1 = sym(&[&[x], &[y]]);
        let v2 = sym(&[&[y], &[x]]);
        prop_assert!((v1 - v2).abs() <= 1e-13);
    }

    #[test]
    fn derivative_is_homogeneous_in_atomic_directions(
        x in 0.01..0.99f64,
        c in complex(2.0),
    ) {
        let model = model_a();
        let nu = ComplexMeasure::dirac(model.space(), &[x]).unwrap();
        let base = pgfm_core::derive::directional_derivative(
            &model,
            std::slice::from_ref(&nu),
            &ComplexMeasure::reference(),
        )
        .unwrap();
        let scaled = pgfm_core::derive::directional_derivative(
            &model,
            &[nu.scale(c)],
            &ComplexMeasure::reference(),
        )
        .unwrap();
        prop_assert!((scaled - c * base).norm() <= 1e-12 * base.norm().max(1.0));
    }
}
