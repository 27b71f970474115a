//! Prescribed-performance envelopes and the logarithmic error transformation.
//!
//! The envelope `rho(t) = (rho0 - rho_inf) exp(-ell t) + rho_inf` shrinks
//! from `rho0` to `rho_inf`. A synchronization error `e` is admissible while
//! `-delta_under * rho < e < delta_bar * rho`; inside that funnel the
//! normalized error `xi = e / rho` is mapped onto the whole real line by
//!
//! ```text
//! eps = 1/2 ln((delta_under + xi) / (delta_bar - xi))
//! ```
//!
//! whose inverse is `xi = (delta_bar e^eps - delta_under e^-eps) / (e^eps + e^-eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Distance to a funnel edge below which the transform refuses to evaluate.
pub const EDGE_GUARD: f64 = 1e-9;

/// Envelope parameters for one agent channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSpec {
    pub rho0: f64,
    pub rho_inf: f64,
    pub ell: f64,
    /// Upper funnel scale `δ̄`.
    pub delta_bar: f64,
    /// Lower funnel scale `δ̲`.
    pub delta_under: f64,
}

/// Sign of a channel's synchronization error at `t = 0`; zero counts as nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSign {
    NonNegative,
    Negative,
}

impl InitialSign {
    pub fn of(e0: f64) -> Self {
        if e0 < 0.0 {
            InitialSign::Negative
        } else {
            InitialSign::NonNegative
        }
    }
}

impl PerformanceSpec {
    pub fn symmetric(rho0: f64, rho_inf: f64, ell: f64, delta: f64) -> Self {
        Self {
            rho0,
            rho_inf,
            ell,
            delta_bar: delta,
            delta_under: delta,
        }
    }

    /// Violated invariants as `(field, message)` pairs.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let all = [
            ("rho0", self.rho0),
            ("rho_inf", self.rho_inf),
            ("ell", self.ell),
            ("delta_bar", self.delta_bar),
            ("delta_under", self.delta_under),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                out.push((name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.rho0 <= self.rho_inf {
            out.push((
                "rho0",
                format!("must exceed rho_inf ({} <= {})", self.rho0, self.rho_inf),
            ));
        }
        out
    }

    /// The spec with `δ̄`/`δ̲` arranged for the given initial sign: a negative
    /// start mirrors the funnel so the tight side stays below zero.
    pub fn oriented(&self, sign0: InitialSign) -> Self {
        match sign0 {
            InitialSign::NonNegative => *self,
            InitialSign::Negative => Self {
                delta_bar: self.delta_under,
                delta_under: self.delta_bar,
                ..*self
            },
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        (self.rho0 - self.rho_inf) * (-self.ell * t).exp() + self.rho_inf
    }
}

/// `rho(t)` and its first `order` time-derivatives.
pub fn rho_jet(spec: &PerformanceSpec, t: f64, order: usize) -> Jet {
    let decay = (spec.rho0 - spec.rho_inf) * (-spec.ell * t).exp();
    let mut d = Vec::with_capacity(order + 1);
    d.push(decay + spec.rho_inf);
    let mut factor = 1.0;
    for _ in 1..=order {
        factor *= -spec.ell;
        d.push(decay * factor);
    }
    Jet::from_derivatives(&d)
}

fn guard(xi: f64, spec: &PerformanceSpec) -> Result<()> {
    let inside = xi > -spec.delta_under + EDGE_GUARD && xi < spec.delta_bar - EDGE_GUARD;
    if inside {
        Ok(())
    } else {
        Err(Error::OutOfEnvelope {
            xi,
            lower: spec.delta_under,
            upper: spec.delta_bar,
        })
    }
}

/// Transformed error `eps` for a normalized error `xi = e / rho`.
pub fn transform(xi: f64, spec: &PerformanceSpec) -> Result<f64> {
    guard(xi, spec)?;
    Ok(0.5 * ((spec.delta_under + xi).ln() - (spec.delta_bar - xi).ln()))
}

/// Normalized error for a transformed error; total on the real line.
pub fn inverse_transform(eps: f64, spec: &PerformanceSpec) -> f64 {
    // tanh form of the exponential ratio, finite for any eps.
    0.5 * ((spec.delta_bar - spec.delta_under) + (spec.delta_bar + spec.delta_under) * eps.tanh())
}

/// `r = d eps / d e = 1/(2 rho) (1/(δ̲ + e/rho) + 1/(δ̄ - e/rho))`.
pub fn slope_r(e: f64, rho: f64, spec: &PerformanceSpec) -> Result<f64> {
    let xi = e / rho;
    guard(xi, spec)?;
    Ok(1.0 / (2.0 * rho) * (1.0 / (spec.delta_under + xi) + 1.0 / (spec.delta_bar - xi)))
}

/// Jet of `eps(t) = F^-1(e(t) / rho(t))` from jets of `e` and `rho`.
///
/// Composes jet division, logarithm and affine maps, so every carried
/// derivative is exact up to rounding.
pub fn transform_jet(e_jet: &Jet, rho_jet: &Jet, spec: &PerformanceSpec) -> Result<Jet> {
    let xi = e_jet / rho_jet;
    guard(xi.value(), spec)?;
    let num = xi.add_scalar(spec.delta_under);
    let den = (-&xi).add_scalar(spec.delta_bar);
    Ok((&num.ln() - &den.ln()).scale(0.5))
}

/// Strict funnel membership `-δ̲ rho < e < δ̄ rho`, with the deltas arranged by `sign0`.
pub fn check_envelope(e: f64, rho: f64, spec: &PerformanceSpec, sign0: InitialSign) -> bool {
    let s = spec.oriented(sign0);
    -s.delta_under * rho < e && e < s.delta_bar * rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn problem1() -> PerformanceSpec {
        PerformanceSpec::symmetric(4.0, 0.03, 0.6, 4.0)
    }

    #[test]
    fn rho_starts_at_rho0() {
        let s = problem1();
        assert_eq!(rho_jet(&s, 0.0, 3).value(), 4.0);
        assert_eq!(s.rho(0.0), 4.0);
    }

    #[test]
    fn rho_first_derivative_matches_finite_difference() {
        let s = problem1();
        let d1 = rho_jet(&s, 0.0, 1).derivative(1);
        assert_relative_eq!(d1, -2.382, epsilon = 1e-12);
        let h = 1e-5;
        let fd = (s.rho(h) - s.rho(-h)) / (2.0 * h);
        assert!(((d1 - fd) / fd).abs() < 1e-6);
    }

    #[test]
    fn rho_derivatives_alternate_in_sign() {
        let j = rho_jet(&problem1(), 1.3, 5);
        for m in 1..=5 {
            let expected_sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(j.derivative(m).signum(), expected_sign);
        }
    }

    #[test]
    fn transform_center_and_known_value() {
        let s = PerformanceSpec::symmetric(1.0, 0.1, 1.0, 4.0);
        assert_eq!(transform(0.0, &s).unwrap(), 0.0);
        let eps = transform(2.0, &s).unwrap();
        assert_relative_eq!(eps, 0.5 * 3f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(inverse_transform(eps, &s), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn transform_grows_without_bound_at_upper_edge() {
        let s = PerformanceSpec::symmetric(1.0, 0.1, 1.0, 4.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=6 {
            let eps = transform(4.0 - 10f64.powi(-k), &s).unwrap();
            assert!(eps > prev);
            prev = eps;
        }
        assert!(prev > 7.0);
    }

    #[test]
    fn transform_rejects_edges() {
        let s = PerformanceSpec::symmetric(1.0, 0.1, 1.0, 4.0);
        assert!(matches!(transform(4.0, &s), Err(Error::OutOfEnvelope { .. })));
        assert!(matches!(transform(-4.0, &s), Err(Error::OutOfEnvelope { .. })));
        assert!(matches!(transform(4.0 - 1e-10, &s), Err(Error::OutOfEnvelope { .. })));
        assert!(slope_r(16.0, 4.0, &s).is_err());
    }

    #[test]
    fn inverse_transform_limits() {
        let s = PerformanceSpec {
            rho0: 1.0,
            rho_inf: 0.1,
            ell: 1.0,
            delta_bar: 1.0,
            delta_under: 0.3,
        };
        assert_abs_diff_eq!(inverse_transform(40.0, &s), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inverse_transform(-40.0, &s), -0.3, epsilon = 1e-12);
        let sym = PerformanceSpec::symmetric(1.0, 0.1, 1.0, 2.0);
        assert_eq!(inverse_transform(0.0, &sym), 0.0);
        assert!(inverse_transform(1e6, &sym).is_finite());
    }

    #[test]
    fn slope_known_values() {
        let s1 = PerformanceSpec::symmetric(1.0, 0.1, 1.0, 1.0);
        assert_relative_eq!(slope_r(0.0, 1.0, &s1).unwrap(), 1.0, epsilon = 1e-15);
        let s4 = PerformanceSpec::symmetric(4.0, 0.1, 1.0, 4.0);
        assert_relative_eq!(slope_r(0.0, 4.0, &s4).unwrap(), 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn slope_matches_finite_difference_of_transform() {
        let s = PerformanceSpec {
            rho0: 2.0,
            rho_inf: 0.1,
            ell: 1.0,
            delta_bar: 1.5,
            delta_under: 0.7,
        };
        let rho = 1.3;
        for &e in &[-0.8, -0.2, 0.0, 0.4, 1.5] {
            let h = 1e-6;
            let fd = (transform((e + h) / rho, &s).unwrap() - transform((e - h) / rho, &s).unwrap()) / (2.0 * h);
            let r = slope_r(e, rho, &s).unwrap();
            assert!(((r - fd) / fd).abs() < 1e-6, "e={e}: r={r} fd={fd}");
        }
    }

    #[test]
    fn transform_jet_of_constant_zero_is_zero() {
        let s = problem1();
        let e = Jet::constant(0.0, 3);
        let rho = rho_jet(&s, 0.5, 3);
        let eps = transform_jet(&e, &rho, &s).unwrap();
        assert!(eps.taylor().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn transform_jet_first_derivative_equals_closed_form() {
        let s = PerformanceSpec {
            rho0: 3.0,
            rho_inf: 0.05,
            ell: 0.8,
            delta_bar: 2.0,
            delta_under: 1.0,
        };
        let rho = rho_jet(&s, 0.7, 2);
        let e = Jet::from_derivatives(&[0.9, -1.7, 0.3]);
        let eps = transform_jet(&e, &rho, &s).unwrap();
        let r = slope_r(e.value(), rho.value(), &s).unwrap();
        let expected = r * (e.derivative(1) - e.value() * rho.derivative(1) / rho.value());
        assert_relative_eq!(eps.derivative(1), expected, epsilon = 1e-12);
        assert_eq!(eps.value(), transform(e.value() / rho.value(), &s).unwrap());
    }

    #[test]
    fn envelope_membership() {
        let s = problem1();
        assert!(check_envelope(0.0, 4.0, &s, InitialSign::NonNegative));
        assert!(check_envelope(3.9, 4.0, &s, InitialSign::NonNegative));
        assert!(!check_envelope(16.1, 4.0, &s, InitialSign::NonNegative));
        assert!(!check_envelope(16.0, 4.0, &s, InitialSign::NonNegative));
    }

    #[test]
    fn envelope_orientation_mirrors_asymmetric_funnel() {
        let s = PerformanceSpec {
            rho0: 1.0,
            rho_inf: 0.1,
            ell: 1.0,
            delta_bar: 1.0,
            delta_under: 0.5,
        };
        assert!(check_envelope(0.9, 1.0, &s, InitialSign::NonNegative));
        assert!(!check_envelope(-0.6, 1.0, &s, InitialSign::NonNegative));
        assert!(!check_envelope(0.9, 1.0, &s, InitialSign::Negative));
        assert!(check_envelope(-0.9, 1.0, &s, InitialSign::Negative));
    }

    #[test]
    fn spec_validation() {
        assert!(problem1().violations().is_empty());
        let bad = PerformanceSpec::symmetric(0.01, 0.03, -1.0, 4.0);
        let fields: Vec<_> = bad.violations().into_iter().map(|(f, _)| f).collect();
        assert!(fields.contains(&"ell"));
        assert!(fields.contains(&"rho0"));
    }
}
