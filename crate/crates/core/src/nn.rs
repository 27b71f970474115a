//! Gaussian RBF approximator `f̂ = Ŵ^T φ(x)` and its leakage-modified
//! adaptation law.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the RBF centers go in the state box `[lo, hi]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterLayout {
    /// Evenly spaced along the main diagonal of the box.
    Diagonal { lo: f64, hi: f64 },
    /// One center per stratum in every coordinate, shuffled with the seed.
    LatinHypercube { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnSettings {
    pub neurons: usize,
    pub layout: CenterLayout,
    /// Width as a multiple of the mean nearest-center distance.
    pub width_factor: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfBasis {
    centers: Vec<DVector<f64>>,
    width: f64,
}

impl RbfBasis {
    pub fn new(centers: Vec<DVector<f64>>, width: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Parse("RBF basis needs at least one center".into()));
        }
        let dim = centers[0].len();
        if let Some(c) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "RBF center",
                expected: dim,
                actual: c.len(),
            });
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::NonpositiveGain {
                name: "width",
                value: width,
            });
        }
        Ok(Self { centers, width })
    }

    /// Places `settings.neurons` centers in a `dim`-dimensional state space.
    pub fn from_settings(settings: &NnSettings, dim: usize) -> Result<Self> {
        let v = settings.neurons;
        if v == 0 {
            return Err(Error::Parse("neuron count must be positive".into()));
        }
        let centers: Vec<DVector<f64>> = match settings.layout {
            CenterLayout::Diagonal { lo, hi } => (0..v)
                .map(|j| {
                    let s = if v == 1 { 0.5 } else { j as f64 / (v - 1) as f64 };
                    DVector::from_element(dim, lo + s * (hi - lo))
                })
                .collect(),
            CenterLayout::LatinHypercube { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                let mut coords = vec![vec![0.0; dim]; v];
                #[allow(clippy::needless_range_loop)]
                for d in 0..dim {
                    let mut strata: Vec<usize> = (0..v).collect();
                    strata.shuffle(&mut rng);
                    for (j, s) in strata.into_iter().enumerate() {
                        let u: f64 = rng.random();
                        coords[j][d] = lo + (s as f64 + u) / v as f64 * (hi - lo);
                    }
                }
                coords.into_iter().map(DVector::from_vec).collect()
            }
        };
        let width = settings.width_factor * mean_nearest_spacing(&centers);
        Self::new(centers, width)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    /// `φ_j(x) = exp(-|x - c_j|^2 / (2 w^2))`.
    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "RBF input",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let denom = 2.0 * self.width * self.width;
        Ok(DVector::from_iterator(
            self.len(),
            self.centers.iter().map(|c| {
                let d2: f64 = c.iter().zip(x).map(|(ci, xi)| (xi - ci) * (xi - ci)).sum();
                (-d2 / denom).exp()
            }),
        ))
    }
}

fn mean_nearest_spacing(centers: &[DVector<f64>]) -> f64 {
    if centers.len() < 2 {
        return 1.0;
    }
    let total: f64 = centers
        .iter()
        .enumerate()
        .map(|(i, ci)| {
            centers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, cj)| (ci - cj).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let mean = total / centers.len() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// `Ŵ^T φ`.
pub fn predict(weights: &DMatrix<f64>, phi: &DVector<f64>) -> Result<DVector<f64>> {
    if weights.nrows() != phi.len() {
        return Err(Error::DimensionMismatch {
            context: "NN prediction",
            expected: weights.nrows(),
            actual: phi.len(),
        });
    }
    Ok(weights.tr_mul(phi))
}

/// Adaptation gains: `F_i = pi_gain * I` and the leakage `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationGains {
    pub pi_gain: f64,
    pub leakage: f64,
}

impl AdaptationGains {
    fn check(&self) -> Result<()> {
        if !(self.pi_gain > 0.0) {
            return Err(Error::NonpositiveGain {
                name: "pi_gain",
                value: self.pi_gain,
            });
        }
        if !(self.leakage > 0.0) {
            return Err(Error::NonpositiveGain {
                name: "k",
                value: self.leakage,
            });
        }
        Ok(())
    }
}

fn check_update_dims(
    weights: &DMatrix<f64>,
    phi: &DVector<f64>,
    e_metric: &DVector<f64>,
    omega_dim: usize,
) -> Result<()> {
    if weights.nrows() != phi.len() {
        return Err(Error::DimensionMismatch {
            context: "weight rows vs basis",
            expected: weights.nrows(),
            actual: phi.len(),
        });
    }
    if weights.ncols() != e_metric.len() {
        return Err(Error::DimensionMismatch {
            context: "weight columns vs channels",
            expected: weights.ncols(),
            actual: e_metric.len(),
        });
    }
    if omega_dim != e_metric.len() {
        return Err(Error::DimensionMismatch {
            context: "omega vs channels",
            expected: e_metric.len(),
            actual: omega_dim,
        });
    }
    Ok(())
}

/// `dŴ/dt = Π φ E^T m Ω (d+b) - k Π Ŵ`, evaluated entrywise with the
/// diagonal of `Ω` and the scalar `d + b`.
pub fn weight_update_derivative(
    weights: &DMatrix<f64>,
    phi: &DVector<f64>,
    e_metric: &DVector<f64>,
    m_i: f64,
    omega_diag: &DVector<f64>,
    d_plus_b: f64,
    gains: AdaptationGains,
) -> Result<DMatrix<f64>> {
    gains.check()?;
    check_update_dims(weights, phi, e_metric, omega_diag.len())?;
    let AdaptationGains { pi_gain, leakage } = gains;
    Ok(DMatrix::from_fn(weights.nrows(), weights.ncols(), |j, p| {
        pi_gain * phi[j] * (e_metric[p] * m_i * omega_diag[p] * d_plus_b) - leakage * pi_gain * weights[(j, p)]
    }))
}

/// Same law with the matrix products spelled out: `F = Π I_v` and the
/// degree factor expanded as `(d+b) ⊗ I_P`.
pub fn weight_update_derivative_kron(
    weights: &DMatrix<f64>,
    phi: &DVector<f64>,
    e_metric: &DVector<f64>,
    m_i: f64,
    omega: &DMatrix<f64>,
    d_plus_b: f64,
    gains: AdaptationGains,
) -> Result<DMatrix<f64>> {
    gains.check()?;
    check_update_dims(weights, phi, e_metric, omega.nrows())?;
    let v = phi.len();
    let p = e_metric.len();
    let f = DMatrix::from_diagonal_element(v, v, gains.pi_gain);
    let degree = crate::graph::kron_expand(&DMatrix::from_element(1, 1, d_plus_b), p);
    let drive = &f * phi * e_metric.transpose() * m_i * omega * degree;
    Ok(drive - (&f * weights) * gains.leakage)
}
