//! Seeded random generation for the property suite: points, fields in the
//! unit ball, and complex/positive measures with a prescribed total
//! variation. Every consumer derives its own substream from the suite seed
//! and its check name, so adding a check never perturbs the others.

use crate::error::Result;
use crate::field::ScalarField;
use crate::measure::{Atom, ComplexMeasure};
use crate::space::BaseSpace;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// FNV-1a, fixed so substream derivation never changes between toolchains.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Independent generator for a named check under a suite seed.
pub fn substream(seed: u64, name: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ fnv1a64(name.as_bytes()))
}

/// Uniform point strictly inside the box (2% margin keeps densities away
/// from the boundary where smooth pdfs are tiny but nonzero).
pub fn interior_point(rng: &mut ChaCha12Rng, space: &BaseSpace) -> Vec<f64> {
    (0..space.dim())
        .map(|i| {
            let lo = space.lower()[i];
            let hi = space.upper()[i];
            let margin = 0.02 * (hi - lo);
            rng.gen_range(lo + margin..hi - margin)
        })
        .collect()
}

pub fn site_tuple(rng: &mut ChaCha12Rng, space: &BaseSpace, m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| interior_point(rng, space)).collect()
}

fn random_unit_complex(rng: &mut ChaCha12Rng) -> Complex64 {
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::new(phase.cos(), phase.sin())
}

/// Smooth bump with a width wide enough for the base quadrature rule.
fn random_bump(rng: &mut ChaCha12Rng, space: &BaseSpace) -> ScalarField {
    let span: f64 = (0..space.dim())
        .map(|i| space.upper()[i] - space.lower()[i])
        .fold(f64::INFINITY, f64::min);
    let width = rng.gen_range(0.15..0.30) * span;
    ScalarField::gaussian(interior_point(rng, space), width, 1.0)
}

/// Complex measure with up to `max_atoms` atoms and (optionally) one bump
/// density, scaled to the target total variation.
pub fn complex_measure(
    rng: &mut ChaCha12Rng,
    space: &BaseSpace,
    max_atoms: usize,
    with_density: bool,
    target_tv: f64,
) -> Result<ComplexMeasure> {
    let n_atoms = rng.gen_range(0..=max_atoms);
    let mut atoms = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        atoms.push(Atom {
            position: interior_point(rng, space),
            weight: random_unit_complex(rng) * rng.gen_range(0.2..1.0),
        });
    }
    let density = if with_density && (n_atoms == 0 || rng.gen_bool(0.7)) {
        Some(random_bump(rng, space).scaled(random_unit_complex(rng) * rng.gen_range(0.2..1.0)))
    } else if n_atoms == 0 {
        Some(random_bump(rng, space))
    } else {
        None
    };
    let raw = ComplexMeasure { atoms, density };
    let tv = raw.total_variation(space)?;
    Ok(raw.scale(target_tv / tv))
}

/// Positive measure (nonnegative atom weights, nonnegative density) scaled
/// to the target total variation.
pub fn positive_measure(
    rng: &mut ChaCha12Rng,
    space: &BaseSpace,
    max_atoms: usize,
    with_density: bool,
    target_tv: f64,
) -> Result<ComplexMeasure> {
    let n_atoms = rng.gen_range(0..=max_atoms);
    let mut atoms = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        atoms.push(Atom {
            position: interior_point(rng, space),
            weight: Complex64::new(rng.gen_range(0.2..1.0), 0.0),
        });
    }
    let density = if with_density || n_atoms == 0 {
        Some(random_bump(rng, space).scaled(rng.gen_range(0.2..1.0)))
    } else {
        None
    };
    let raw = ComplexMeasure { atoms, density };
    let tv = raw.total_variation(space)?;
    Ok(raw.scale(target_tv / tv))
}

/// Tuples of unit-norm defect directions for higher-order remainder
/// estimation, mixing atomic and smooth-density measures.
pub fn defect_tuples(
    rng: &mut ChaCha12Rng,
    space: &BaseSpace,
    order: usize,
    count: usize,
) -> Result<Vec<Vec<ComplexMeasure>>> {
    let mut tuples = Vec::with_capacity(count);
    for i in 0..count {
        let mut tuple = Vec::with_capacity(order.saturating_sub(1));
        for k in 0..order.saturating_sub(1) {
            let with_density = (i + k) % 2 == 0;
            let max_atoms = if with_density { 1 } else { 2 };
            tuple.push(complex_measure(rng, space, max_atoms, with_density, 1.0)?);
        }
        tuples.push(tuple);
    }
    Ok(tuples)
}

/// Smooth complex field with conservative sup-norm at most `target <= 1`,
/// guaranteed through the field's own upper bound.
pub fn unit_ball_field(rng: &mut ChaCha12Rng, space: &BaseSpace, target: f64) -> ScalarField {
    let mut terms = vec![ScalarField::constant(
        random_unit_complex(rng) * rng.gen_range(0.1..0.4),
    )];
    for _ in 0..rng.gen_range(1..=2usize) {
        terms.push(random_bump(rng, space).scaled(random_unit_complex(rng) * rng.gen_range(0.2..0.8)));
    }
    let h = ScalarField::Sum { terms };
    let bound = h.sup_bound(space);
    h.scaled(target / bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn substreams_are_stable_and_independent() {
        let mut a1 = substream(7, "check-a");
        let mut a2 = substream(7, "check-a");
        let mut b = substream(7, "check-b");
        let xs1: Vec<u64> = (0..4).map(|_| a1.gen()).collect();
        let xs2: Vec<u64> = (0..4).map(|_| a2.gen()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.gen()).collect();
        assert_eq!(xs1, xs2);
        assert_ne!(xs1, ys);
    }

    #[test]
    fn generated_measures_hit_their_norm() {
        let space = BaseSpace::unit_interval();
        let mut rng = substream(11, "measures");
        for _ in 0..10 {
            let m = complex_measure(&mut rng, &space, 3, true, 1.7).unwrap();
            assert_relative_eq!(m.total_variation(&space).unwrap(), 1.7, max_relative = 1e-9);
            let p = positive_measure(&mut rng, &space, 2, true, 0.9).unwrap();
            assert_relative_eq!(p.total_variation(&space).unwrap(), 0.9, max_relative = 1e-9);
            assert!(p.atoms.iter().all(|a| a.weight.im == 0.0 && a.weight.re >= 0.0));
        }
    }

    #[test]
    fn unit_ball_fields_stay_bounded() {
        let space = BaseSpace::unit_interval();
        let mut rng = substream(3, "fields");
        for _ in 0..10 {
            let h = unit_ball_field(&mut rng, &space, 0.9);
            assert!(h.sup_bound(&space) <= 0.9 + 1e-12);
        }
    }
}
