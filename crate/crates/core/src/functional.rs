//! Set integrals and generating functionals.
//!
//! The set integral of a finite-set function F against a measure eta is
//! the cardinality-weighted sum of n-fold iterated integrals
//! `sum_n (1/n!) int...int F_n d eta^n`. Against the measures implemented
//! here (finite atoms plus a quadrature density) every iterated integral
//! expands into a finite sum: each coordinate slot is assigned either an
//! atom or a weighted quadrature node. For symmetric integrands the
//! assignments are grouped by multiset, which keeps the expansion
//! polynomial; non-symmetric integrands fall back to the full ordered
//! odometer.
//!
//! On top of the engine sit the three evaluation surfaces:
//!
//! * `pgfl_eval` — the generating functional over scalar fields,
//!   `G[h] = sum_n (1/n!) int j_n prod h`;
//! * `pgfm_eval` — the same family integrated against a complex measure;
//! * `bmf_eval`  — belief mass `beta(S) = G[1_S]` over a region.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::measure::ComplexMeasure;
use crate::model::FiniteSetDensity;
use crate::space::BaseSpace;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Hard caps from the expansion cost model: beyond these the assignment
/// enumeration is rejected with an explicit error rather than attempted.
pub const MAX_EXPANSION_ATOMS: usize = 8;
pub const MAX_EXPANSION_CARDINALITY: usize = 6;

/// Budget for one iterated-integral term. When the tensor expansion of a
/// term would exceed `max_tuples`, the continuous part of each slot is
/// replaced by seeded Monte Carlo sampling so the cost stays bounded.
#[derive(Debug, Clone)]
pub struct Budget {
    pub max_tuples: u128,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_tuples: 1 << 24,
            mc_samples: 60_000,
            seed: 0x9E37_79B9_7F4A_7C15,
        }
    }
}

/// Largest per-slot support size whose `n`-fold expansion stays within the
/// tuple budget.
fn largest_support(max_tuples: u128, n: usize, symmetric: bool) -> usize {
    let fits = |s: usize| -> bool {
        if symmetric {
            multiset_count(s, n) <= max_tuples
        } else {
            (s as u128).saturating_pow(n as u32) <= max_tuples
        }
    };
    let (mut lo, mut hi) = (1usize, 1 << 20);
    if fits(hi) {
        return hi;
    }
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// A measure expanded into point masses: atoms verbatim plus quadrature
/// nodes weighted by the density.
#[derive(Debug, Clone)]
pub struct Slot {
    pub entries: Vec<(Vec<f64>, Complex64)>,
    pub atom_count: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Expand a measure into a slot, panelizing the quadrature around both the
/// density's own breakpoints and any extra cuts the integrand needs.
pub fn expand_measure(
    space: &BaseSpace,
    eta: &ComplexMeasure,
    extra_cuts: &[Vec<f64>],
) -> Result<Slot> {
    eta.validate(space)?;
    let mut entries: Vec<(Vec<f64>, Complex64)> = eta
        .atoms
        .iter()
        .map(|a| (a.position.clone(), a.weight))
        .collect();
    let atom_count = entries.len();
    if let Some(d) = &eta.density {
        let mut cuts = d.breakpoints(space);
        for (axis, extra) in extra_cuts.iter().enumerate() {
            if axis < cuts.len() {
                cuts[axis].extend_from_slice(extra);
            }
        }
        let rule = space.rule_with_breakpoints(&cuts)?;
        entries.extend(
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| (p.clone(), w * d.eval(p))),
        );
    }
    Ok(Slot {
        entries,
        atom_count,
    })
}

/// Monte Carlo variant of [`expand_measure`]: the continuous part becomes
/// `samples` seeded uniform nodes weighted by `volume * density / samples`.
pub fn expand_measure_mc(
    space: &BaseSpace,
    eta: &ComplexMeasure,
    samples: usize,
    seed: u64,
) -> Result<Slot> {
    eta.validate(space)?;
    let mut entries: Vec<(Vec<f64>, Complex64)> = eta
        .atoms
        .iter()
        .map(|a| (a.position.clone(), a.weight))
        .collect();
    let atom_count = entries.len();
    if let Some(d) = &eta.density {
        let rule = space.monte_carlo_rule(samples, seed);
        entries.extend(
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| (p.clone(), w * d.eval(p))),
        );
    }
    Ok(Slot {
        entries,
        atom_count,
    })
}

/// Number of non-decreasing index tuples of length `n` over `s` symbols.
pub fn multiset_count(s: usize, n: usize) -> u128 {
    let mut res: u128 = 1;
    for k in 1..=n {
        res = res.saturating_mul((s + k - 1) as u128) / k as u128;
    }
    res
}

const FACTORIALS: [f64; 13] = [
    1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0, 39916800.0,
    479001600.0,
];

/// Visit every non-decreasing index tuple of length `n` over `0..s`,
/// passing the tuple and its multinomial repetition coefficient
/// `n! / prod(multiplicities!)`.
pub(crate) fn for_each_multiset(s: usize, n: usize, mut visit: impl FnMut(&[usize], f64)) {
    if n == 0 {
        visit(&[], 1.0);
        return;
    }
    if s == 0 {
        return;
    }
    let mut idx = vec![0usize; n];
    loop {
        // multiplicity coefficient from run lengths
        let mut coeff = FACTORIALS[n];
        let mut run = 1usize;
        for k in 1..n {
            if idx[k] == idx[k - 1] {
                run += 1;
            } else {
                coeff /= FACTORIALS[run];
                run = 1;
            }
        }
        coeff /= FACTORIALS[run];
        visit(&idx, coeff);

        // next non-decreasing tuple
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] + 1 < s {
                let v = idx[k] + 1;
                for slot in idx.iter_mut().skip(k) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Visit every ordered index tuple of length `n` over `0..s`.
pub(crate) fn for_each_tuple(s: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    if s == 0 {
        return;
    }
    let mut idx = vec![0usize; n];
    loop {
        visit(&idx);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < s {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// n-fold iterated integral of `f` with the same slot in every coordinate.
/// Symmetric integrands are grouped by multiset.
pub fn iterated_same_slot(
    slot: &Slot,
    n: usize,
    symmetric: bool,
    f: &dyn Fn(&[&[f64]]) -> Complex64,
) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let mut args: Vec<&[f64]> = Vec::with_capacity(n);
    if symmetric {
        for_each_multiset(slot.len(), n, |idx, coeff| {
            let mut w = Complex64::new(coeff, 0.0);
            args.clear();
            for &i in idx {
                let (p, wi) = &slot.entries[i];
                w *= wi;
                args.push(p.as_slice());
            }
            total += w * f(&args);
        });
    } else {
        for_each_tuple(slot.len(), n, |idx| {
            let mut w = Complex64::new(1.0, 0.0);
            args.clear();
            for &i in idx {
                let (p, wi) = &slot.entries[i];
                w *= wi;
                args.push(p.as_slice());
            }
            total += w * f(&args);
        });
    }
    total
}

/// Iterated integral with one explicit slot per coordinate, evaluated in
/// slot order.
pub fn iterated_ordered_slots(slots: &[&Slot], f: &dyn Fn(&[&[f64]]) -> Complex64) -> Complex64 {
    let n = slots.len();
    let mut total = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; n];
    if slots.iter().any(|s| s.is_empty()) {
        return total;
    }
    let mut args: Vec<&[f64]> = Vec::with_capacity(n);
    loop {
        let mut w = Complex64::new(1.0, 0.0);
        args.clear();
        for (k, &i) in idx.iter().enumerate() {
            let (p, wi) = &slots[k].entries[i];
            w *= wi;
            args.push(p.as_slice());
        }
        total += w * f(&args);
        let mut k = n;
        loop {
            if k == 0 {
                return total;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < slots[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Shared per-cardinality level callable.
pub type LevelFn = Arc<dyn Fn(&[&[f64]]) -> Complex64 + Send + Sync>;

/// A finite-set function: scalar at the empty set plus per-cardinality
/// level functions, with per-axis panel hints for the quadrature.
#[derive(Clone)]
pub struct SetFunction {
    pub f0: Complex64,
    pub levels: Vec<LevelFn>,
    pub symmetric: bool,
    pub breakpoints: Vec<Vec<f64>>,
}

impl SetFunction {
    pub fn n_max(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, n: usize) -> Option<&LevelFn> {
        if n == 0 {
            None
        } else {
            self.levels.get(n - 1)
        }
    }

    /// The Janossy family of a model as a set function.
    pub fn from_janossy(model: &FiniteSetDensity) -> Self {
        let shared = Arc::new(model.clone());
        let symmetric = model.symmetric_by_construction();
        let breakpoints = model.spatial_breakpoints();
        let levels = (1..=model.n_max())
            .map(|_| {
                let m = Arc::clone(&shared);
                Arc::new(move |pts: &[&[f64]]| Complex64::new(m.janossy_unchecked(pts), 0.0))
                    as LevelFn
            })
            .collect();
        SetFunction {
            f0: Complex64::new(model.janossy_unchecked(&[]), 0.0),
            levels,
            symmetric,
            breakpoints,
        }
    }

    /// The PGFL integrand `j_n(x) prod h(x_i)` of a model and a field.
    pub fn from_janossy_with_field(model: &FiniteSetDensity, h: &ScalarField) -> Self {
        let shared = Arc::new(model.clone());
        let field = Arc::new(h.clone());
        let symmetric = model.symmetric_by_construction();
        let mut breakpoints = model.spatial_breakpoints();
        for (axis, cuts) in h.breakpoints(model.space()).into_iter().enumerate() {
            breakpoints[axis].extend(cuts);
        }
        let levels = (1..=model.n_max())
            .map(|_| {
                let m = Arc::clone(&shared);
                let h = Arc::clone(&field);
                Arc::new(move |pts: &[&[f64]]| {
                    let mut v = Complex64::new(m.janossy_unchecked(pts), 0.0);
                    for p in pts {
                        v *= h.eval(p);
                    }
                    v
                }) as LevelFn
            })
            .collect();
        SetFunction {
            f0: Complex64::new(model.janossy_unchecked(&[]), 0.0),
            levels,
            symmetric,
            breakpoints,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegralFlags {
    pub mc_fallback: bool,
}

/// The set integral `sum_{n<=n_max} (1/n!) int...int F_n d eta^n`.
pub fn set_integral(
    space: &BaseSpace,
    f: &SetFunction,
    eta: &ComplexMeasure,
    n_max: usize,
) -> Result<Complex64> {
    Ok(set_integral_with(space, f, eta, n_max, &Budget::default())?.0)
}

pub fn set_integral_with(
    space: &BaseSpace,
    f: &SetFunction,
    eta: &ComplexMeasure,
    n_max: usize,
    budget: &Budget,
) -> Result<(Complex64, IntegralFlags)> {
    let atom_count = eta.coalesced_atoms().len();
    if atom_count > MAX_EXPANSION_ATOMS || n_max > MAX_EXPANSION_CARDINALITY {
        return Err(Error::ExpansionTooLarge {
            tuples: ((atom_count + 1) as u128).saturating_pow(n_max as u32),
            cap: ((MAX_EXPANSION_ATOMS + 1) as u128).pow(MAX_EXPANSION_CARDINALITY as u32),
        });
    }
    let slot = expand_measure(space, eta, &f.breakpoints)?;
    let mut flags = IntegralFlags::default();
    let mut total = f.f0;
    let mut mc_slot: Option<Slot> = None;
    let mut n_factorial = 1.0;
    for n in 1..=n_max.min(f.n_max()) {
        n_factorial *= n as f64;
        let level = f.level(n).expect("level exists");
        let count = if f.symmetric {
            multiset_count(slot.len(), n)
        } else {
            (slot.len() as u128).saturating_pow(n as u32)
        };
        let active = if count > budget.max_tuples {
            flags.mc_fallback = true;
            if mc_slot.is_none() {
                // shrink the continuous part so even the widest term fits
                let target = largest_support(budget.max_tuples, n_max.min(f.n_max()), f.symmetric);
                let samples = target
                    .saturating_sub(slot.atom_count)
                    .clamp(8, budget.mc_samples);
                mc_slot = Some(expand_measure_mc(space, eta, samples, budget.seed)?);
            }
            mc_slot.as_ref().unwrap()
        } else {
            &slot
        };
        let term = iterated_same_slot(active, n, f.symmetric, level.as_ref());
        total += term / n_factorial;
    }
    Ok((total, flags))
}

/// Status of the `|h| <= 1` class constraint for a field.
#[derive(Debug, Clone, Serialize)]
pub struct GammaReport {
    /// Conservative upper bound for sup |h| over the box.
    pub sup_bound: f64,
    /// Grid-sampled maximum of |h|.
    pub grid_sup: f64,
    /// Grid point realizing the sampled maximum when it exceeds one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    /// Sampled maximum exceeds one: the field provably leaves the class.
    pub violated: bool,
    /// Bound exceeds one but no grid point does: membership is unconfirmed.
    pub inconclusive: bool,
}

pub(crate) fn gamma_scan_resolution(dim: usize) -> usize {
    match dim {
        1 => 513,
        2 => 65,
        _ => 17,
    }
}

pub fn gamma_report(space: &BaseSpace, h: &ScalarField) -> GammaReport {
    let sup_bound = h.sup_bound(space);
    let (grid_sup, witness_point) = h.grid_max(space, gamma_scan_resolution(space.dim()));
    let violated = grid_sup > 1.0 + 1e-12;
    GammaReport {
        sup_bound,
        grid_sup,
        witness: violated.then_some(witness_point),
        violated,
        inconclusive: !violated && sup_bound > 1.0 + 1e-12,
    }
}

/// Result of a functional evaluation with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    #[serde(with = "crate::cjson")]
    pub value: Complex64,
    /// |Im value|, a sanity diagnostic for real models with real inputs.
    pub imag_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaReport>,
    pub mc_fallback: bool,
}

/// `G[h] = sum_n (1/n!) int j_n prod h(x_i) d mu^n`.
///
/// With `enforce_gamma` the class constraint `sup|h| <= 1` is mandatory and
/// a grid-confirmed violation is rejected with its witness point; otherwise
/// the report is attached as a warning.
pub fn pgfl_eval(
    model: &FiniteSetDensity,
    h: &ScalarField,
    enforce_gamma: bool,
) -> Result<Evaluation> {
    h.validate(model.space())?;
    let gamma = gamma_report(model.space(), h);
    if enforce_gamma && gamma.violated {
        return Err(Error::GammaViolation {
            sup: gamma.grid_sup,
            witness: gamma.witness.clone().unwrap_or_default(),
        });
    }
    let f = SetFunction::from_janossy_with_field(model, h);
    let (value, flags) = set_integral_with(
        model.space(),
        &f,
        &ComplexMeasure::reference(),
        model.n_max(),
        &Budget::default(),
    )?;
    Ok(Evaluation {
        value,
        imag_residual: value.im.abs(),
        gamma: Some(gamma),
        mc_fallback: flags.mc_fallback,
    })
}

/// `G[eta] = sum_n (1/n!) int...int j_n d eta^n` over a complex measure.
pub fn pgfm_eval(model: &FiniteSetDensity, eta: &ComplexMeasure) -> Result<Evaluation> {
    let f = SetFunction::from_janossy(model);
    let (value, flags) =
        set_integral_with(model.space(), &f, eta, model.n_max(), &Budget::default())?;
    Ok(Evaluation {
        value,
        imag_residual: value.im.abs(),
        gamma: None,
        mc_fallback: flags.mc_fallback,
    })
}

/// Belief mass `beta(S) = G[1_S]`: the probability that the whole
/// realization lies inside the region.
pub fn bmf_eval(model: &FiniteSetDensity, region: &crate::model::Region) -> Result<Evaluation> {
    region.validate(model.space())?;
    let h = region.indicator_field();
    let f = SetFunction::from_janossy_with_field(model, &h);
    let (value, flags) = set_integral_with(
        model.space(),
        &f,
        &ComplexMeasure::reference(),
        model.n_max(),
        &Budget::default(),
    )?;
    Ok(Evaluation {
        value,
        imag_residual: value.im.abs(),
        gamma: None,
        mc_fallback: flags.mc_fallback,
    })
}
