//! Truncated Taylor arithmetic for time signals.
//!
//! A [`Jet`] of order `n` carries a signal and its first `n` time-derivatives
//! at one instant. Internally the normalized Taylor coefficients
//! `c_m = f^(m)(t) / m!` are stored, which keeps products and quotients as
//! plain Cauchy convolutions.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

impl Jet {
    /// Signal that is constant in time.
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// From `[f, f', f'', ...]`.
    pub fn from_derivatives(derivatives: &[f64]) -> Self {
        assert!(!derivatives.is_empty(), "a jet needs at least a value");
        let coeffs = derivatives.iter().enumerate().map(|(m, d)| d / factorial(m)).collect();
        Self { coeffs }
    }

    pub fn from_taylor(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least a value");
        Self { coeffs }
    }

    /// Highest derivative carried.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn taylor(&self) -> &[f64] {
        &self.coeffs
    }

    /// `d^m f / dt^m`.
    pub fn derivative(&self, m: usize) -> f64 {
        self.coeffs[m] * factorial(m)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|m| self.derivative(m)).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Natural logarithm; the value must be positive.
    pub fn ln(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut out = vec![0.0; n];
        out[0] = a[0].ln();
        for k in 1..n {
            let mut acc = k as f64 * a[k];
            for i in 1..k {
                acc -= i as f64 * out[i] * a[k - i];
            }
            out[k] = acc / (k as f64 * a[0]);
        }
        Self { coeffs: out }
    }

    pub fn exp(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut out = vec![0.0; n];
        out[0] = a[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += i as f64 * a[i] * out[k - i];
            }
            out[k] = acc / k as f64;
        }
        Self { coeffs: out }
    }

    fn assert_same_order(&self, other: &Jet) {
        assert_eq!(self.coeffs.len(), other.coeffs.len(), "jet orders differ");
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_same_order(rhs);
        Jet {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_same_order(rhs);
        Jet {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.assert_same_order(rhs);
        let n = self.coeffs.len();
        let coeffs = (0..n)
            .map(|k| (0..=k).map(|i| self.coeffs[i] * rhs.coeffs[k - i]).sum())
            .collect();
        Jet { coeffs }
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.assert_same_order(rhs);
        let n = self.coeffs.len();
        let b = &rhs.coeffs;
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.coeffs[k];
            for i in 1..=k {
                acc -= b[i] * out[k - i];
            }
            out[k] = acc / b[0];
        }
        Jet { coeffs: out }
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul, Div div);
