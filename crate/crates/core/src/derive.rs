//! Functional derivatives of the generating functionals, point-wise in the
//! differentiation sites, by every route the laboratory supports:
//!
//! * `oracle_derivative`    — the closed-form bypass `int h^X j(X u Y) dX`;
//! * `pgfm_derivative`      — the explicit measure-input expansion (sum
//!   over cardinalities, slot positions and site permutations, with Dirac
//!   measures inserted at the sites);
//! * `directional_derivative` — the same expansion with arbitrary complex
//!   measures as directions; multilinear in the directions;
//! * `nested_fd_derivative` — recursive central differences of the
//!   measure-input functional with Richardson extrapolation;
//! * `limit_sequence_derivative` — derivative along a shrinking
//!   test-sequence direction through the function-input functional;
//! * `secular_derivative`   — limits taken in the opposite order, with
//!   per-(epsilon, lambda) domain-violation flags;
//! * `set_derivative_bmf`   — shrinking-ball difference quotients of the
//!   belief mass function;
//! * `frechet_residual`     — the defect of the first- or higher-order
//!   derivative, normalized by the direction norm.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functional::{
    expand_measure, for_each_multiset, for_each_tuple, gamma_scan_resolution, multiset_count,
    pgfl_eval, pgfm_eval, Slot,
};
use crate::measure::{test_member, ComplexMeasure, TestSequenceFamily, TestSequenceKind};
use crate::model::{FiniteSetDensity, Region};
use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Hard cap for one pinned iterated-integral term.
const MAX_TERM_TUPLES: u128 = 1 << 24;

/// One row of a convergence table: schedule parameter and the value there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub parameter: f64,
    #[serde(with = "crate::cjson")]
    pub value: Complex64,
}

/// A (epsilon, lambda) pair at which the perturbed field leaves the unit
/// ball, with the sampled supremum and its witness point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainFlag {
    pub epsilon: f64,
    pub lambda: f64,
    pub sup: f64,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub method: String,
    #[serde(with = "crate::cjson")]
    pub value: Complex64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<TableRow>,
    #[serde(with = "crate::cjson::optional", skip_serializing_if = "Option::is_none")]
    pub extrapolated: Option<Complex64>,
    /// Distance to the closed-form route, when the evaluation point is
    /// function-representable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_vs_oracle: Option<f64>,
    /// Worst deviation across site orderings (multi-site formula route).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commutation_residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<DomainFlag>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DerivativeReport {
    fn plain(method: &str, value: Complex64) -> Self {
        DerivativeReport {
            method: method.to_string(),
            value,
            table: vec![],
            extrapolated: None,
            residual_vs_oracle: None,
            commutation_residual: None,
            flags: vec![],
            warnings: vec![],
        }
    }
}

/// Two-level Richardson extrapolation assuming the leading error term has
/// the given order; the table must end at the smallest parameter.
pub fn richardson(table: &[TableRow], order: i32) -> Option<Complex64> {
    if table.len() < 2 {
        return None;
    }
    let prev = &table[table.len() - 2];
    let last = &table[table.len() - 1];
    let ratio = prev.parameter / last.parameter;
    if ratio.is_nan() || ratio <= 1.0 || !ratio.is_finite() {
        return None;
    }
    let rk = ratio.powi(order);
    Some((last.value * rk - prev.value) / (rk - 1.0))
}

fn validate_sites(model: &FiniteSetDensity, sites: &[Vec<f64>]) -> Result<()> {
    for s in sites {
        model.space().check_point(s)?;
    }
    Ok(())
}

/// Warn-level check: coincident sites are allowed but reported.
pub fn coincident_sites(sites: &[Vec<f64>]) -> bool {
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            if a == b {
                return true;
            }
        }
    }
    false
}

/// Closed-form route: `sum_k (1/k!) int h^k j_{m+k}(Y, x_1..x_k) d mu^k`
/// with the sites held fixed. At `h = 0` this is the Janossy density at
/// the sites; at `h = 1` the factorial moment.
pub fn oracle_derivative(
    model: &FiniteSetDensity,
    sites: &[Vec<f64>],
    h: &ScalarField,
) -> Result<Complex64> {
    validate_sites(model, sites)?;
    h.validate(model.space())?;
    let m = sites.len();
    if m > model.n_max() {
        return Ok(Complex64::default());
    }
    let mut cuts = model.spatial_breakpoints();
    for (axis, extra) in h.breakpoints(model.space()).into_iter().enumerate() {
        cuts[axis].extend(extra);
    }
    let slot = expand_measure(model.space(), &ComplexMeasure::reference(), &cuts)?;
    let symmetric = model.symmetric_by_construction();
    let site_refs: Vec<&[f64]> = sites.iter().map(|s| s.as_slice()).collect();

    let mut total = Complex64::default();
    let mut k_factorial = 1.0;
    for k in 0..=(model.n_max() - m) {
        if k > 0 {
            k_factorial *= k as f64;
        }
        let mut term = Complex64::default();
        let mut args: Vec<&[f64]> = Vec::with_capacity(m + k);
        let mut accumulate = |idx: &[usize], coeff: f64| {
            let mut w = Complex64::new(coeff, 0.0);
            args.clear();
            args.extend_from_slice(&site_refs);
            for &i in idx {
                let (p, wi) = &slot.entries[i];
                w *= wi * h.eval(p);
                args.push(p.as_slice());
            }
            term += w * model.janossy_unchecked(&args);
        };
        if symmetric {
            for_each_multiset(slot.len(), k, |idx, coeff| accumulate(idx, coeff));
        } else {
            for_each_tuple(slot.len(), k, |idx| accumulate(idx, 1.0));
        }
        total += term / k_factorial;
    }
    Ok(total)
}

/// The explicit m-th order directional derivative of the measure-input
/// functional: sum over cardinalities `n >= m`, increasing slot positions
/// `i_1 < .. < i_m` and permutations `pi` of the directions, with the
/// remaining slots integrated against `eta`. Multilinear in the directions.
pub fn directional_derivative(
    model: &FiniteSetDensity,
    directions: &[ComplexMeasure],
    eta: &ComplexMeasure,
) -> Result<Complex64> {
    let m = directions.len();
    if m > model.n_max() {
        return Ok(Complex64::default());
    }
    let cuts = model.spatial_breakpoints();
    let eta_slot = expand_measure(model.space(), eta, &cuts)?;
    let dir_slots: Vec<Slot> = directions
        .iter()
        .map(|nu| expand_measure(model.space(), nu, &cuts))
        .collect::<Result<_>>()?;
    let symmetric = model.symmetric_by_construction();

    let mut total = Complex64::default();
    let mut n_factorial: f64 = (1..=m).map(|k| k as f64).product();
    for n in m..=model.n_max() {
        if n > m {
            n_factorial *= n as f64;
        }
        let free = n - m;
        let mut level_sum = Complex64::default();
        if symmetric {
            // for symmetric densities every choice of pinned positions
            // contributes the same value (relabel the integration
            // variables), so the position sum collapses to a binomial
            // multiplier; the permutation sum over directions remains
            let positions: Vec<usize> = (0..m).collect();
            let mut count = 1.0;
            for k in 0..m {
                count = count * (n - k) as f64 / (k + 1) as f64;
            }
            for perm in (0..m).permutations(m) {
                let slots: Vec<&Slot> = perm.iter().map(|&k| &dir_slots[k]).collect();
                level_sum += count
                    * pinned_iterated(model, n, &positions, &slots, &eta_slot, free, symmetric)?;
            }
        } else {
            for positions in (0..n).combinations(m) {
                for perm in (0..m).permutations(m) {
                    let slots: Vec<&Slot> = perm.iter().map(|&k| &dir_slots[k]).collect();
                    level_sum +=
                        pinned_iterated(model, n, &positions, &slots, &eta_slot, free, symmetric)?;
                }
            }
        }
        total += level_sum / n_factorial;
    }
    Ok(total)
}

/// Iterated integral of `j_n` with the pinned positions running over the
/// direction slots and the free positions integrated against `eta`.
fn pinned_iterated(
    model: &FiniteSetDensity,
    n: usize,
    positions: &[usize],
    pinned: &[&Slot],
    eta_slot: &Slot,
    free: usize,
    symmetric: bool,
) -> Result<Complex64> {
    let pinned_tuples: u128 = pinned.iter().map(|s| s.len() as u128).product();
    if pinned.iter().any(|s| s.is_empty()) {
        return Ok(Complex64::default());
    }
    let free_tuples = if symmetric {
        multiset_count(eta_slot.len(), free)
    } else {
        (eta_slot.len() as u128).saturating_pow(free as u32)
    };
    let tuples = pinned_tuples.saturating_mul(free_tuples.max(1));
    if tuples > MAX_TERM_TUPLES {
        return Err(Error::ExpansionTooLarge {
            tuples,
            cap: MAX_TERM_TUPLES,
        });
    }

    let is_pinned: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (k, &pos) in positions.iter().enumerate() {
            v[pos] = Some(k);
        }
        v
    };
    let free_positions: Vec<usize> = (0..n).filter(|i| is_pinned[*i].is_none()).collect();

    let mut total = Complex64::default();
    let mut args: Vec<&[f64]> = vec![&[]; n];
    let mut pin_idx = vec![0usize; pinned.len()];
    loop {
        let mut pin_weight = Complex64::new(1.0, 0.0);
        for (k, &i) in pin_idx.iter().enumerate() {
            let (p, w) = &pinned[k].entries[i];
            pin_weight *= w;
            args[positions[k]] = p.as_slice();
        }

        if free == 0 {
            total += pin_weight * model_level(model, &args);
        } else {
            let mut inner = Complex64::default();
            if symmetric {
                for_each_multiset(eta_slot.len(), free, |idx, coeff| {
                    let mut w = Complex64::new(coeff, 0.0);
                    for (slot_k, &i) in idx.iter().enumerate() {
                        let (p, wi) = &eta_slot.entries[i];
                        w *= wi;
                        args[free_positions[slot_k]] = p.as_slice();
                    }
                    inner += w * model_level(model, &args);
                });
            } else {
                for_each_tuple(eta_slot.len(), free, |idx| {
                    let mut w = Complex64::new(1.0, 0.0);
                    for (slot_k, &i) in idx.iter().enumerate() {
                        let (p, wi) = &eta_slot.entries[i];
                        w *= wi;
                        args[free_positions[slot_k]] = p.as_slice();
                    }
                    inner += w * model_level(model, &args);
                });
            }
            total += pin_weight * inner;
        }

        // advance the pinned odometer
        let mut k = pinned.len();
        loop {
            if k == 0 {
                return Ok(total);
            }
            k -= 1;
            pin_idx[k] += 1;
            if pin_idx[k] < pinned[k].len() {
                break;
            }
            pin_idx[k] = 0;
        }
    }
}

#[inline]
fn model_level(model: &FiniteSetDensity, args: &[&[f64]]) -> Complex64 {
    Complex64::new(model.janossy_unchecked(args), 0.0)
}

/// The functional derivative proper: the directional derivative with Dirac
/// measures at the sites. At the zero measure it recovers the Janossy
/// density; at the reference measure the factorial moment.
pub fn pgfm_derivative(
    model: &FiniteSetDensity,
    sites: &[Vec<f64>],
    eta: &ComplexMeasure,
) -> Result<Complex64> {
    validate_sites(model, sites)?;
    let directions: Vec<ComplexMeasure> = sites
        .iter()
        .map(|s| ComplexMeasure::dirac(model.space(), s))
        .collect::<Result<_>>()?;
    directional_derivative(model, &directions, eta)
}

/// Maximum deviation of the derivative value over all site orderings; the
/// order-dependence diagnostic for the implemented measure class.
pub fn site_permutation_residual(
    model: &FiniteSetDensity,
    sites: &[Vec<f64>],
    eta: &ComplexMeasure,
) -> Result<f64> {
    let m = sites.len();
    let base = pgfm_derivative(model, sites, eta)?;
    let scale = base.norm().max(1.0);
    let mut worst: f64 = 0.0;
    for perm in (0..m).permutations(m) {
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| sites[i].clone()).collect();
        let v = pgfm_derivative(model, &permuted, eta)?;
        worst = worst.max((v - base).norm() / scale);
    }
    Ok(worst)
}

/// Brute-force factorial moment `D(Y) = int j(X u Y) dX`, written as its
/// own quadrature loop so it stays an independent oracle for the
/// reference-measure derivative.
pub fn factorial_moment(model: &FiniteSetDensity, sites: &[Vec<f64>]) -> Result<f64> {
    let v = oracle_derivative(model, sites, &ScalarField::one())?;
    Ok(v.re)
}

/// Recursive central differences `(G[eta + eps nu] - G[eta - eps nu]) /
/// (2 eps)` nested over the directions, evaluated along a step schedule
/// with two-level Richardson extrapolation.
pub fn nested_fd_derivative(
    model: &FiniteSetDensity,
    directions: &[ComplexMeasure],
    eta: &ComplexMeasure,
    eps_schedule: &[f64],
    extrapolate: bool,
) -> Result<DerivativeReport> {
    if eps_schedule.is_empty() {
        return Err(Error::invalid("schedule", "empty step schedule"));
    }
    let m = directions.len();
    let mut table = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        if eps.is_nan() || eps <= 1e-12 {
            return Err(Error::StepUnderflow { step: eps });
        }
        // full tensor stencil: sum over sign vectors of prod(signs) G[eta + eps sum s_k nu_k]
        let mut value = Complex64::default();
        for mask in 0u32..(1u32 << m) {
            let mut probe = eta.clone();
            let mut sign = 1.0;
            for (k, nu) in directions.iter().enumerate() {
                let s = if mask & (1 << k) != 0 { 1.0 } else { -1.0 };
                sign *= s;
                probe = probe.add(&nu.scale(s * eps));
            }
            value += sign * pgfm_eval(model, &probe)?.value;
        }
        value /= (2.0 * eps).powi(m as i32);
        table.push(TableRow {
            parameter: eps,
            value,
        });
    }
    let extrapolated = if extrapolate {
        richardson(&table, 2)
    } else {
        None
    };
    let value = extrapolated.unwrap_or(table.last().unwrap().value);
    Ok(DerivativeReport {
        method: "nested_fd".into(),
        value,
        table,
        extrapolated,
        residual_vs_oracle: None,
        commutation_residual: None,
        flags: vec![],
        warnings: vec![],
    })
}

/// Inner epsilon used for the ordinary derivative `d/d eps G[h + eps g]`
/// at zero inside the limit-sequence and secular routes.
const INNER_EPS: f64 = 1e-4;

fn pgfl_eps_derivative(
    model: &FiniteSetDensity,
    h: &ScalarField,
    g: &ScalarField,
) -> Result<Complex64> {
    let diff = |eps: f64| -> Result<Complex64> {
        let plus = h.clone().plus(g.clone().scaled(eps));
        let minus = h.clone().plus(g.clone().scaled(-eps));
        Ok((pgfl_eval(model, &plus, false)?.value - pgfl_eval(model, &minus, false)?.value)
            / (2.0 * eps))
    };
    // one Richardson level on the inner step
    let d1 = diff(INNER_EPS)?;
    let d2 = diff(INNER_EPS / 2.0)?;
    Ok((d2 * 4.0 - d1) / 3.0)
}

/// Limit-of-directional-derivatives route: for each width in the schedule,
/// differentiate the function-input functional in the direction of the
/// test-sequence member, then extrapolate the width trend to zero.
pub fn limit_sequence_derivative(
    model: &FiniteSetDensity,
    site: &[f64],
    h: &ScalarField,
    kind: TestSequenceKind,
    lambdas: &[f64],
    extrapolate: bool,
) -> Result<DerivativeReport> {
    model.space().check_point(site)?;
    if lambdas.is_empty() {
        return Err(Error::invalid("schedule", "empty width schedule"));
    }
    let mut table = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        if lam.is_nan() || lam <= 0.0 {
            return Err(Error::StepUnderflow { step: lam });
        }
        let family = TestSequenceFamily {
            kind,
            center: site.to_vec(),
            width: lam,
        };
        let member = test_member(model.space(), &family)?;
        let value = pgfl_eps_derivative(model, h, &member)?;
        table.push(TableRow {
            parameter: lam,
            value,
        });
    }

    let mut warnings = Vec::new();
    // divergence guard: successive differences must not grow
    let mut divergent = false;
    for w in table.windows(3) {
        let d1 = (w[1].value - w[0].value).norm();
        let d2 = (w[2].value - w[1].value).norm();
        if d2 > 10.0 * d1.max(1e-14) {
            divergent = true;
        }
    }
    if divergent {
        warnings.push("divergent width trend; extrapolation withheld".into());
    }
    let extrapolated = if extrapolate && !divergent {
        richardson(&table, 2)
    } else {
        None
    };
    let value = extrapolated.unwrap_or(table.last().unwrap().value);
    Ok(DerivativeReport {
        method: "limit_sequence".into(),
        value,
        table,
        extrapolated,
        residual_vs_oracle: None,
        commutation_residual: None,
        flags: vec![],
        warnings,
    })
}

/// Secular route: the width limit is taken first (numerically: the value at
/// the smallest width, with a stabilization check), then the ordinary
/// derivative at zero by a central difference in `eps`. Every (eps, width)
/// pair whose perturbed field leaves the unit ball is flagged; the
/// evaluation itself proceeds regardless.
pub fn secular_derivative(
    model: &FiniteSetDensity,
    site: &[f64],
    h: &ScalarField,
    kind: TestSequenceKind,
    lambdas: &[f64],
    eps: f64,
) -> Result<DerivativeReport> {
    model.space().check_point(site)?;
    if lambdas.is_empty() {
        return Err(Error::invalid("schedule", "empty width schedule"));
    }
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smallest = *lambdas.last().unwrap();
    if smallest.is_nan() || smallest <= 0.0 {
        return Err(Error::StepUnderflow { step: smallest });
    }

    let resolution = gamma_scan_resolution(model.space().dim());
    let mut flags = Vec::new();
    let mut warnings = Vec::new();
    let mut table = Vec::with_capacity(lambdas.len());
    let mut secular_at = |e: f64| -> Result<Vec<Complex64>> {
        let mut values = Vec::with_capacity(lambdas.len());
        for &lam in &lambdas {
            let family = TestSequenceFamily {
                kind,
                center: site.to_vec(),
                width: lam,
            };
            let member = test_member(model.space(), &family)?;
            let perturbed = h.clone().plus(member.scaled(e));
            if e != 0.0 {
                let (sup, witness) = perturbed.grid_max(model.space(), resolution);
                if sup > 1.0 + 1e-12 {
                    flags.push(DomainFlag {
                        epsilon: e,
                        lambda: lam,
                        sup,
                        witness,
                    });
                }
            }
            values.push(pgfl_eval(model, &perturbed, false)?.value);
        }
        Ok(values)
    };

    if eps == 0.0 {
        let values = secular_at(0.0)?;
        for (lam, v) in lambdas.iter().zip(&values) {
            table.push(TableRow {
                parameter: *lam,
                value: *v,
            });
        }
        warnings.push("zero step: reporting the secular value, not its derivative".into());
        return Ok(DerivativeReport {
            method: "secular".into(),
            value: *values.last().unwrap(),
            table,
            extrapolated: None,
            residual_vs_oracle: None,
            commutation_residual: None,
            flags,
            warnings,
        });
    }

    let plus = secular_at(eps)?;
    let minus = secular_at(-eps)?;
    for (lam, v) in lambdas.iter().zip(&plus) {
        table.push(TableRow {
            parameter: *lam,
            value: *v,
        });
    }
    if lambdas.len() >= 2 {
        let last = plus[plus.len() - 1];
        let prev = plus[plus.len() - 2];
        if (last - prev).norm() > 1e-8 * (1.0 + last.norm()) {
            warnings.push("secular value not stabilized across the two smallest widths".into());
        }
    }
    let value = (plus.last().unwrap() - minus.last().unwrap()) / (2.0 * eps);
    Ok(DerivativeReport {
        method: "secular".into(),
        value,
        table,
        extrapolated: None,
        residual_vs_oracle: None,
        commutation_residual: None,
        flags,
        warnings,
    })
}

/// Iterated shrinking-ball set derivative of the belief mass function at
/// sites outside the closure of `base`: the m-fold difference quotient by
/// inclusion-exclusion over ball subsets, evaluated along the radius
/// schedule. Extrapolation assumes a first-order radius trend.
pub fn set_derivative_bmf(
    model: &FiniteSetDensity,
    sites: &[Vec<f64>],
    base: &Region,
    radii: &[f64],
    extrapolate: bool,
) -> Result<DerivativeReport> {
    validate_sites(model, sites)?;
    base.validate(model.space())?;
    if sites.is_empty() {
        return Err(Error::invalid("set derivative", "at least one site needed"));
    }
    if radii.is_empty() {
        return Err(Error::invalid("schedule", "empty radius schedule"));
    }
    for s in sites {
        if base.contains(s) {
            return Err(Error::invalid(
                "set derivative",
                "site lies inside the region closure; the simplified form needs x outside S",
            ));
        }
    }
    let m = sites.len();
    let mut warnings = Vec::new();
    let mut table = Vec::with_capacity(radii.len());
    for &r in radii {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::StepUnderflow { step: r });
        }
        // pairwise-overlap guard: the inclusion-exclusion quotient assumes
        // the balls stay disjoint
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                let dist: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if dist < 2.0 * r {
                    warnings.push(format!("balls of radius {r} overlap between sites"));
                }
            }
        }
        let mut value = 0.0;
        for mask in 0u32..(1u32 << m) {
            let mut region = base.clone();
            for (k, site) in sites.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    let (next, _) = region.union_ball(model.space(), site, r)?;
                    region = next;
                }
            }
            let beta = crate::functional::bmf_eval(model, &region)?.value.re;
            let sign = if (m as u32 - mask.count_ones()).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            value += sign * beta;
        }
        let mut denom = 1.0;
        for site in sites {
            let (_, ball_measure) = base.union_ball(model.space(), site, r)?;
            denom *= ball_measure;
        }
        value /= denom;
        table.push(TableRow {
            parameter: r,
            value: Complex64::new(value, 0.0),
        });
    }
    let extrapolated = if extrapolate {
        richardson(&table, 1)
    } else {
        None
    };
    let value = extrapolated.unwrap_or(table.last().unwrap().value);
    Ok(DerivativeReport {
        method: "set_derivative".into(),
        value,
        table,
        extrapolated,
        residual_vs_oracle: None,
        commutation_residual: None,
        flags: vec![],
        warnings,
    })
}

/// How the defect directions for the higher-order residual are chosen.
pub enum DefectDirections<'a> {
    /// Supremum over explicitly supplied (m-1)-tuples of directions.
    Explicit(&'a [Vec<ComplexMeasure>]),
}

/// Normalized remainder of the derivative at `eta` in the direction
/// `nu`. First order:
/// `|G[eta + nu] - G[eta] - dG/dnu[eta]| / |nu|`.
/// Order m: the sampled norm of the (m-1)-linear defect divided by
/// `|nu_m|`; the supremum runs over the supplied unit-norm tuples, so the
/// returned figure is a lower bound for the true operator norm.
pub fn frechet_residual(
    model: &FiniteSetDensity,
    eta: &ComplexMeasure,
    nu: &ComplexMeasure,
    order: usize,
    defect_directions: DefectDirections<'_>,
) -> Result<f64> {
    let nu_norm = nu.total_variation(model.space())?;
    if nu_norm <= 0.0 {
        return Err(Error::ZeroDirection);
    }
    if order == 0 {
        return Err(Error::invalid("order", "residual order must be at least 1"));
    }
    if order == 1 {
        let shifted = eta.add(nu);
        let g1 = pgfm_eval(model, &shifted)?.value;
        let g0 = pgfm_eval(model, eta)?.value;
        let d = directional_derivative(model, std::slice::from_ref(nu), eta)?;
        return Ok((g1 - g0 - d).norm() / nu_norm);
    }
    let DefectDirections::Explicit(tuples) = defect_directions;
    if tuples.is_empty() {
        return Err(Error::invalid("directions", "no defect direction tuples"));
    }
    let shifted = eta.add(nu);
    let mut sup: f64 = 0.0;
    for tuple in tuples {
        if tuple.len() != order - 1 {
            return Err(Error::invalid(
                "directions",
                format!("expected tuples of {} directions", order - 1),
            ));
        }
        let a = directional_derivative(model, tuple, &shifted)?;
        let b = directional_derivative(model, tuple, eta)?;
        let mut full: Vec<ComplexMeasure> = tuple.clone();
        full.push(nu.clone());
        let c = directional_derivative(model, &full, eta)?;
        let mut denom = 1.0;
        for d in tuple {
            denom *= d.total_variation(model.space())?;
        }
        if denom <= 0.0 {
            return Err(Error::ZeroDirection);
        }
        sup = sup.max((a - b - c).norm() / denom);
    }
    Ok(sup / nu_norm)
}

/// Method selector shared by the request runner and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    PgfmFormula,
    NestedFd,
    LimitSequence,
    Secular,
    SetDerivative,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "pgfm" | "pgfm_formula" => Ok(Method::PgfmFormula),
            "nested_fd" => Ok(Method::NestedFd),
            "limit_sequence" => Ok(Method::LimitSequence),
            "secular" => Ok(Method::Secular),
            "set_derivative" => Ok(Method::SetDerivative),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::PgfmFormula => "pgfm_formula",
            Method::NestedFd => "nested_fd",
            Method::LimitSequence => "limit_sequence",
            Method::Secular => "secular",
            Method::SetDerivative => "set_derivative",
        }
    }
}

/// Where the derivative is taken.
#[derive(Debug, Clone)]
pub enum At {
    Zero,
    Reference,
    Measure(ComplexMeasure),
    Field(ScalarField),
}

impl At {
    /// The measure realization, for measure-input methods.
    pub fn as_measure(&self) -> ComplexMeasure {
        match self {
            At::Zero => ComplexMeasure::zero(),
            At::Reference => ComplexMeasure::reference(),
            At::Measure(m) => m.clone(),
            At::Field(h) => ComplexMeasure::from_density(h.clone()),
        }
    }

    /// The function realization, for function-input methods; atomic
    /// measures have none.
    pub fn as_field(&self) -> Result<ScalarField> {
        match self {
            At::Zero => Ok(ScalarField::zero()),
            At::Reference => Ok(ScalarField::one()),
            At::Field(h) => Ok(h.clone()),
            At::Measure(m) if m.atoms.is_empty() => Ok(m
                .density
                .clone()
                .unwrap_or_else(ScalarField::zero)),
            At::Measure(_) => Err(Error::invalid(
                "at",
                "function-input methods need a density-only measure or a field",
            )),
        }
    }
}

/// A derivative request: sites, evaluation point, method, and schedules.
#[derive(Debug, Clone)]
pub struct DerivativeRequest {
    pub sites: Vec<Vec<f64>>,
    pub at: At,
    pub method: Method,
    pub lambda_schedule: Vec<f64>,
    pub eps_schedule: Vec<f64>,
    pub radii: Vec<f64>,
    pub secular_eps: f64,
    pub family: TestSequenceKind,
    pub region: Region,
    pub extrapolate: bool,
}

impl DerivativeRequest {
    pub fn new(sites: Vec<Vec<f64>>, at: At, method: Method) -> Self {
        DerivativeRequest {
            sites,
            at,
            method,
            lambda_schedule: vec![0.2, 0.1, 0.05, 0.025],
            eps_schedule: vec![1e-1, 1e-2, 1e-3],
            radii: vec![0.032, 0.016, 0.008, 0.004],
            secular_eps: 0.1,
            family: TestSequenceKind::Gaussian,
            region: Region::empty(),
            extrapolate: true,
        }
    }
}

/// Dispatch a request to its method, attaching truncation and coincidence
/// warnings.
pub fn run_request(model: &FiniteSetDensity, req: &DerivativeRequest) -> Result<DerivativeReport> {
    validate_sites(model, &req.sites)?;
    let mut report = match req.method {
        Method::Oracle => {
            let h = req.at.as_field()?;
            DerivativeReport::plain("oracle", oracle_derivative(model, &req.sites, &h)?)
        }
        Method::PgfmFormula => {
            let eta = req.at.as_measure();
            DerivativeReport::plain(
                "pgfm_formula",
                pgfm_derivative(model, &req.sites, &eta)?,
            )
        }
        Method::NestedFd => {
            let eta = req.at.as_measure();
            let directions: Vec<ComplexMeasure> = req
                .sites
                .iter()
                .map(|s| ComplexMeasure::dirac(model.space(), s))
                .collect::<Result<_>>()?;
            nested_fd_derivative(model, &directions, &eta, &req.eps_schedule, req.extrapolate)?
        }
        Method::LimitSequence => {
            let [site] = req.sites.as_slice() else {
                return Err(Error::invalid(
                    "sites",
                    "the limit-sequence method takes exactly one site",
                ));
            };
            let h = req.at.as_field()?;
            limit_sequence_derivative(
                model,
                site,
                &h,
                req.family,
                &req.lambda_schedule,
                req.extrapolate,
            )?
        }
        Method::Secular => {
            let [site] = req.sites.as_slice() else {
                return Err(Error::invalid(
                    "sites",
                    "the secular method takes exactly one site",
                ));
            };
            let h = req.at.as_field()?;
            secular_derivative(
                model,
                site,
                &h,
                req.family,
                &req.lambda_schedule,
                req.secular_eps,
            )?
        }
        Method::SetDerivative => set_derivative_bmf(
            model,
            &req.sites,
            &req.region,
            &req.radii,
            req.extrapolate,
        )?,
    };
    if coincident_sites(&req.sites) {
        report.warnings.push("coincident sites".into());
    }
    if req.sites.len() > model.n_max() {
        report
            .warnings
            .push("site count exceeds the model truncation; derivative is identically zero".into());
    }

    // attach the closed-form cross-check whenever the evaluation point is
    // function-representable
    if req.method != Method::Oracle && req.sites.len() <= model.n_max() {
        let oracle_h = if req.method == Method::SetDerivative {
            Some(req.region.indicator_field())
        } else {
            req.at.as_field().ok()
        };
        if let Some(h) = oracle_h {
            let oracle = oracle_derivative(model, &req.sites, &h)?;
            report.residual_vs_oracle = Some((report.value - oracle).norm());
        }
    }
    if req.method == Method::PgfmFormula && req.sites.len() >= 2 {
        let eta = req.at.as_measure();
        report.commutation_residual =
            Some(site_permutation_residual(model, &req.sites, &eta)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::BaseSpace;
    use approx::assert_relative_eq;

    fn model_a() -> FiniteSetDensity {
        FiniteSetDensity::iid_cluster(
            BaseSpace::unit_interval(),
            vec![0.25, 0.5, 0.25],
            ScalarField::one(),
        )
        .unwrap()
    }

    /// Bernoulli with a smooth non-constant spatial pdf; used where a
    /// non-degenerate width trend is needed.
    fn smooth_bernoulli() -> FiniteSetDensity {
        let space = BaseSpace::unit_interval();
        let bump = ScalarField::gaussian(vec![0.45], 0.25, 1.0);
        let mass = crate::measure::integrate(&space, &bump, &ComplexMeasure::reference())
            .unwrap()
            .re;
        let spatial = bump.scaled(1.0 / mass);
        FiniteSetDensity::bernoulli(space, 0.8, spatial).unwrap()
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let m = model_a();
        let y = vec![vec![0.3]];
        assert_relative_eq!(
            oracle_derivative(&m, &y, &ScalarField::zero()).unwrap().re,
            0.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            oracle_derivative(&m, &y, &ScalarField::one()).unwrap().re,
            1.0,
            epsilon = 1e-10
        );
        let y2 = vec![vec![0.3], vec![0.7]];
        assert_relative_eq!(
            oracle_derivative(&m, &y2, &ScalarField::zero()).unwrap().re,
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pgfm_derivative_recovers_density_and_moment() {
        let m = model_a();
        let y = vec![vec![0.3]];
        assert_relative_eq!(
            pgfm_derivative(&m, &y, &ComplexMeasure::zero()).unwrap().re,
            0.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            pgfm_derivative(&m, &y, &ComplexMeasure::reference())
                .unwrap()
                .re,
            1.0,
            epsilon = 1e-10
        );
        let y2 = vec![vec![0.3], vec![0.7]];
        assert_relative_eq!(
            pgfm_derivative(&m, &y2, &ComplexMeasure::zero()).unwrap().re,
            0.5,
            epsilon = 1e-12
        );
        // above the truncation the derivative vanishes
        let y3 = vec![vec![0.1], vec![0.2], vec![0.3]];
        assert_eq!(
            pgfm_derivative(&m, &y3, &ComplexMeasure::zero()).unwrap(),
            Complex64::default()
        );
    }

    #[test]
    fn directional_derivative_examples() {
        let m = model_a();
        // direction = reference measure at the zero measure: int j_1 d mu
        let v = directional_derivative(
            &m,
            &[ComplexMeasure::reference()],
            &ComplexMeasure::zero(),
        )
        .unwrap();
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-10);

        // homogeneity: doubling the direction doubles the value
        let nu = ComplexMeasure::dirac(m.space(), &[0.4]).unwrap();
        let v1 =
            directional_derivative(&m, std::slice::from_ref(&nu), &ComplexMeasure::reference())
                .unwrap();
        let v2 =
            directional_derivative(&m, &[nu.scale(2.0)], &ComplexMeasure::reference()).unwrap();
        assert!((v2 - v1 * 2.0).norm() <= 1e-12 * v2.norm());

        // coincident Dirac directions insert at the same site
        let d = ComplexMeasure::dirac(m.space(), &[0.3]).unwrap();
        let v = directional_derivative(&m, &[d.clone(), d], &ComplexMeasure::zero()).unwrap();
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn directional_derivative_is_additive_in_each_slot() {
        let m = model_a();
        let s = m.space().clone();
        let a = ComplexMeasure::dirac(&s, &[0.2]).unwrap().scale(Complex64::new(0.3, 0.7));
        let b = ComplexMeasure::from_density(ScalarField::gaussian(vec![0.6], 0.2, 0.5));
        let eta = ComplexMeasure::reference().scale(0.5);
        let lhs = directional_derivative(&m, &[a.add(&b)], &eta).unwrap();
        let rhs = directional_derivative(&m, &[a], &eta).unwrap()
            + directional_derivative(&m, &[b], &eta).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn nested_fd_agrees_with_formula() {
        let m = model_a();
        let d = ComplexMeasure::dirac(m.space(), &[0.3]).unwrap();
        let report = nested_fd_derivative(
            &m,
            &[d],
            &ComplexMeasure::zero(),
            &[1e-1, 1e-2, 1e-3],
            true,
        )
        .unwrap();
        assert_relative_eq!(report.value.re, 0.5, epsilon = 1e-8);
        // quadratic functional: central differences are exact per step
        for row in &report.table {
            assert_relative_eq!(row.value.re, 0.5, epsilon = 1e-9);
        }

        let d1 = ComplexMeasure::dirac(m.space(), &[0.3]).unwrap();
        let d2 = ComplexMeasure::dirac(m.space(), &[0.7]).unwrap();
        let report = nested_fd_derivative(
            &m,
            &[d1, d2],
            &ComplexMeasure::zero(),
            &[1e-1, 1e-2, 1e-3],
            true,
        )
        .unwrap();
        assert_relative_eq!(report.value.re, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn limit_sequence_trends_to_oracle() {
        let m = model_a();
        let h = ScalarField::constant(0.5);
        let report = limit_sequence_derivative(
            &m,
            &[0.5],
            &h,
            TestSequenceKind::Gaussian,
            &[0.2, 0.1, 0.05, 0.025],
            true,
        )
        .unwrap();
        assert_relative_eq!(report.value.re, 0.75, epsilon = 1e-6);

        let report = limit_sequence_derivative(
            &m,
            &[0.5],
            &h,
            TestSequenceKind::Indicator,
            &[0.2, 0.1, 0.05, 0.025],
            true,
        )
        .unwrap();
        assert!((report.table.last().unwrap().value.re - 0.75).abs() <= 5e-2);

        let report = limit_sequence_derivative(
            &m,
            &[0.5],
            &ScalarField::zero(),
            TestSequenceKind::Gaussian,
            &[0.2, 0.1, 0.05],
            true,
        )
        .unwrap();
        assert_relative_eq!(report.value.re, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn limit_sequence_error_shrinks_for_smooth_models() {
        let m = smooth_bernoulli();
        let h = ScalarField::constant(0.5);
        let oracle = oracle_derivative(&m, &[vec![0.5]], &h).unwrap();
        let report = limit_sequence_derivative(
            &m,
            &[0.5],
            &h,
            TestSequenceKind::Gaussian,
            &[0.2, 0.1, 0.05, 0.025],
            true,
        )
        .unwrap();
        let errors: Vec<f64> = report
            .table
            .iter()
            .map(|row| (row.value - oracle).norm())
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] < w[0], "width errors not decreasing: {errors:?}");
        }
        assert!((report.value - oracle).norm() <= 1e-3);
    }

    #[test]
    fn secular_flags_activate_below_critical_width() {
        let m = model_a();
        let h = ScalarField::constant(0.5);
        let lambda_star = 1.0 / (5.0 * (2.0 * std::f64::consts::PI).sqrt());
        let schedule = [0.2, 0.12, 0.09, 0.0805, 0.079, 0.06, 0.03];
        let report =
            secular_derivative(&m, &[0.5], &h, TestSequenceKind::Gaussian, &schedule, 0.1)
                .unwrap();
        for &lam in &schedule {
            let flagged = report.flags.iter().any(|f| f.lambda == lam && f.epsilon > 0.0);
            assert_eq!(
                flagged,
                lam < lambda_star,
                "width {lam} vs critical {lambda_star}"
            );
        }
        // the truncated-polynomial functional is entire: the derivative is
        // still accurate despite the flags
        let oracle = oracle_derivative(&m, &[vec![0.5]], &h).unwrap();
        assert!((report.value - oracle).norm() <= 1e-3);
    }

    #[test]
    fn secular_zero_step_returns_the_functional_value() {
        let m = model_a();
        let h = ScalarField::constant(0.5);
        let report =
            secular_derivative(&m, &[0.5], &h, TestSequenceKind::Gaussian, &[0.2, 0.1], 0.0)
                .unwrap();
        assert!(report.flags.is_empty());
        assert_relative_eq!(report.value.re, 0.5625, epsilon = 1e-9);
    }

    #[test]
    fn set_derivative_examples() {
        let m = model_a();
        // S empty: the ratio trends to j_1 = 0.5 from above (0.5 + r/2)
        let report = set_derivative_bmf(
            &m,
            &[vec![0.5]],
            &Region::empty(),
            &[0.1, 0.05, 0.025],
            false,
        )
        .unwrap();
        let errs: Vec<f64> = report
            .table
            .iter()
            .map(|row| (row.value.re - 0.5).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert_relative_eq!(
            report.table.last().unwrap().value.re,
            0.5 + 0.0125,
            epsilon = 1e-9
        );

        // S = [0, 0.4], site 0.7: trend to 0.5 + 0.5*0.4 = 0.7
        let region = Region::single(vec![0.0], vec![0.4]);
        let report = set_derivative_bmf(
            &m,
            &[vec![0.7]],
            &region,
            &[0.05, 0.025, 0.0125],
            true,
        )
        .unwrap();
        assert_relative_eq!(report.value.re, 0.7, epsilon = 1e-8);

        // iterated at two distinct sites: j_2 within 1e-2
        let report = set_derivative_bmf(
            &m,
            &[vec![0.3], vec![0.7]],
            &Region::empty(),
            &[0.05, 0.025],
            false,
        )
        .unwrap();
        assert!((report.table.last().unwrap().value.re - 0.5).abs() <= 1e-2);

        // site inside the region closure is rejected
        assert!(set_derivative_bmf(
            &m,
            &[vec![0.2]],
            &Region::single(vec![0.0], vec![0.4]),
            &[0.05],
            false
        )
        .is_err());
    }

    #[test]
    fn frechet_residual_closed_form_for_atomic_directions() {
        let m = model_a();
        for c in [
            Complex64::new(0.3, 0.0),
            Complex64::new(0.0, 0.6),
            Complex64::new(-0.2, 0.1),
        ] {
            let nu = ComplexMeasure::dirac(m.space(), &[0.4]).unwrap().scale(c);
            let r = frechet_residual(
                &m,
                &ComplexMeasure::zero(),
                &nu,
                1,
                DefectDirections::Explicit(&[]),
            )
            .unwrap();
            assert_relative_eq!(r, 0.25 * c.norm(), epsilon = 1e-10);
        }
    }

    #[test]
    fn frechet_residual_vanishes_linearly() {
        let m = model_a();
        let base = ComplexMeasure::dirac(m.space(), &[0.4])
            .unwrap()
            .add(&ComplexMeasure::from_density(ScalarField::gaussian(
                vec![0.6],
                0.2,
                Complex64::new(0.4, 0.2),
            )));
        let tv = base.total_variation(m.space()).unwrap();
        let unit = base.scale(1.0 / tv);
        let mut pts = Vec::new();
        for &t in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let r = frechet_residual(
                &m,
                &ComplexMeasure::zero(),
                &unit.scale(t),
                1,
                DefectDirections::Explicit(&[]),
            )
            .unwrap();
            pts.push((t.ln(), r.ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 0.9, "slope {slope}");
    }

    #[test]
    fn second_order_defect_shrinks() {
        let m = model_a();
        let s = m.space().clone();
        let tuple = vec![vec![ComplexMeasure::dirac(&s, &[0.3]).unwrap()]];
        let nu = ComplexMeasure::dirac(&s, &[0.6]).unwrap();
        let r_big = frechet_residual(
            &m,
            &ComplexMeasure::zero(),
            &nu.scale(1e-1),
            2,
            DefectDirections::Explicit(&tuple),
        )
        .unwrap();
        let r_small = frechet_residual(
            &m,
            &ComplexMeasure::zero(),
            &nu.scale(1e-3),
            2,
            DefectDirections::Explicit(&tuple),
        )
        .unwrap();
        // the degree-2 functional has an identically multilinear second
        // derivative: both defects sit at roundoff level
        assert!(r_big <= 1e-10 && r_small <= 1e-10);
    }

    #[test]
    fn site_permutations_agree_for_symmetric_models() {
        let m = model_a();
        let sites = vec![vec![0.2], vec![0.8]];
        let r = site_permutation_residual(&m, &sites, &ComplexMeasure::reference()).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn request_runner_dispatches_and_warns() {
        let m = model_a();
        let mut req = DerivativeRequest::new(
            vec![vec![0.3]],
            At::Zero,
            Method::PgfmFormula,
        );
        let report = run_request(&m, &req).unwrap();
        assert_relative_eq!(report.value.re, 0.5, epsilon = 1e-12);

        req.sites = vec![vec![0.3], vec![0.3]];
        let report = run_request(&m, &req).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("coincident")));

        req.sites = vec![vec![0.1], vec![0.2], vec![0.3]];
        let report = run_request(&m, &req).unwrap();
        assert_eq!(report.value, Complex64::default());
        assert!(report.warnings.iter().any(|w| w.contains("truncation")));
    }
}
