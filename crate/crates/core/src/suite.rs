//! Seeded random elliptic symbols for rotations and finite cyclic actions.
//!
//! Each case has one dominant term `c_g0 T_g0` whose coefficient is
//! `e^{i w x} (A + r(x))` on each cosphere component, with `|A| = 2` and
//! `sup |r| <= 1/2`. The other terms are scaled so that their coefficient
//! sup-norms add up to at most `min |c_g0| / factor`, `factor >= 1.5`, which
//! makes the symbol invertible by a Neumann series for isometric actions.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ActionSpec;
use crate::realization::GOperatorSpec;
use crate::series::TrigSeries;
use crate::symbol::CosphereFunction;

pub const MAX_SUPPORT: i64 = 2;
pub const MAX_BANDWIDTH: usize = 6;
pub const MIN_DOMINANCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    IdentityDominant,
    ShiftDominant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub label: String,
    pub kind: CaseKind,
    pub dominant: i64,
    /// Ratio of `min |c_g0|` to the summed sup-norms of the other terms.
    pub dominance: f64,
    /// Windings of the dominant coefficient on the `+` and `-` components.
    pub windings: [i64; 2],
    pub spec: GOperatorSpec,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.gen_range(0.0..TAU))
}

/// Random trigonometric polynomial with bandwidth `b` and coefficient
/// l1-norm `l1` (an upper bound for its sup-norm).
fn random_series(rng: &mut ChaCha8Rng, b: usize, l1: f64) -> TrigSeries {
    let raw: Vec<Complex64> = (0..2 * b + 1).map(|_| random_unit(rng) * rng.gen_range(0.1..1.0)).collect();
    let norm: f64 = raw.iter().map(|c| c.norm()).sum();
    TrigSeries::from_coeffs(raw.into_iter().map(|c| c * (l1 / norm)).collect())
}

fn dominant_component(rng: &mut ChaCha8Rng, w: i64) -> TrigSeries {
    let b = rng.gen_range(0..=MAX_BANDWIDTH - w.unsigned_abs() as usize);
    let base = TrigSeries::constant(random_unit(rng) * 2.0).add(&random_series(rng, b, 0.5));
    base.mul(&TrigSeries::monomial(w, Complex64::new(1.0, 0.0)))
}

fn minor_component(rng: &mut ChaCha8Rng, l1: f64) -> TrigSeries {
    let b = rng.gen_range(0..=MAX_BANDWIDTH);
    random_series(rng, b, l1)
}

/// `count` cases for `action` (rotation by `Z` or `Z/k`), reproducible from `seed`.
pub fn random_suite(action: ActionSpec, count: usize, seed: u64) -> Result<Vec<SuiteCase>> {
    if !action.is_isometric() {
        return Err(Error::Unsupported("random suites need an isometric action".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elements: Vec<i64> = match action.group_order() {
        Some(k) => (0..k as i64).collect(),
        None => (-MAX_SUPPORT..=MAX_SUPPORT).collect(),
    };
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let kind = if i % 2 == 0 { CaseKind::IdentityDominant } else { CaseKind::ShiftDominant };
        let dominant = match kind {
            CaseKind::IdentityDominant => 0,
            CaseKind::ShiftDominant => *elements[1..].choose(&mut rng).expect("nontrivial group"),
        };
        let windings = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
        let dom = CosphereFunction::new(dominant_component(&mut rng, windings[0]), dominant_component(&mut rng, windings[1]));
        // |A + r| >= 2 - 1/2.
        let factor = rng.gen_range(MIN_DOMINANCE..3.0);
        let mut others: Vec<i64> = elements.iter().copied().filter(|g| *g != dominant).collect();
        others.shuffle(&mut rng);
        others.truncate(rng.gen_range(1..=others.len().min(2)));
        let budget = 1.5 / factor / others.len() as f64;
        let mut spec = GOperatorSpec::new(action, 0.0, 0.0)?.with_term(dominant, dom);
        for g in &others {
            let c = CosphereFunction::new(minor_component(&mut rng, budget), minor_component(&mut rng, budget));
            spec = spec.with_term(*g, c);
        }
        cases.push(SuiteCase { label: format!("case-{i:02}"), kind, dominant, dominance: factor, windings, spec });
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> ActionSpec {
        ActionSpec::rotation((5f64.sqrt() - 1.0) / 2.0, true).unwrap()
    }

    #[test]
    fn reproducible_and_bounded() {
        let a = random_suite(golden(), 12, 7).unwrap();
        assert_eq!(a, random_suite(golden(), 12, 7).unwrap());
        assert_ne!(a, random_suite(golden(), 12, 8).unwrap());
        for c in &a {
            let sym = c.spec.symbol().unwrap();
            assert!(sym.support_radius() <= MAX_SUPPORT as usize);
            assert!(sym.bandwidth() <= MAX_BANDWIDTH);
            let dom = sym.term(c.dominant);
            let min = dom.plus.min_modulus(4096).min(dom.minus.min_modulus(4096));
            let rest: f64 = sym.terms().iter().filter(|(g, _)| **g != c.dominant).map(|(_, f)| f.sup_norm()).sum();
            assert!(min >= MIN_DOMINANCE * rest, "{}: {min} vs {rest}", c.label);
        }
    }

    #[test]
    fn cyclic_cases_stay_in_group() {
        for c in random_suite(ActionSpec::cyclic(4).unwrap(), 6, 1).unwrap() {
            assert!(c.spec.terms.iter().all(|t| (0..4).contains(&t.g)));
        }
    }

    #[test]
    fn dilations_are_rejected() {
        assert!(random_suite(ActionSpec::dilation(0.5, 1).unwrap(), 1, 0).is_err());
    }
}
