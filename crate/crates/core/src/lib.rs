//! Numerical laboratory for finite point processes on compact boxes:
//! truncated Janossy-density models, set integrals, probability generating
//! functionals over functions (PGFL) and over complex measures (PGFM), and
//! every functional-derivative construction used with them, cross-validated
//! against each other.

pub mod cjson;
pub mod derive;
pub mod error;
pub mod field;
pub mod functional;
pub mod measure;
pub mod model;
pub mod sample;
pub mod space;
pub mod suite;
pub mod zoo;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use functional::{bmf_eval, pgfl_eval, pgfm_eval, set_integral, Evaluation, SetFunction};
pub use measure::{integrate, test_member, Atom, ComplexMeasure, TestSequenceFamily, TestSequenceKind};
pub use model::{
    bound_k, superpose, symmetrize, validate_model, Family, FiniteSetDensity, KBound,
    ModelValidation, Region, SubBox, TabLevel,
};
pub use space::{BaseSpace, QuadKind, QuadratureRule, QuadratureSpec};
pub use zoo::{model_a, zoo, zoo_model, ZooModel};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;
