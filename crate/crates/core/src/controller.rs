//! Metric error, distributed control law and the stability-gain verifier.
//!
//! Indexing: for a system of order `M` the coefficient vector `lambda` has
//! `M - 1` entries, `lambda[0]` weighting the transformed error itself and
//! `lambda[M - 2]` its `(M - 2)`-th derivative. The metric error is
//!
//! ```text
//! E = eps^(M-1) + lambda[M-2] eps^(M-2) + ... + lambda[0] eps
//! ```
//!
//! i.e. the output of the Hurwitz filter `s^(M-1) + ... + lambda[0]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{kron_expand, max_singular_value, min_singular_value, Digraph};
use crate::jet::Jet;
use crate::lyapunov::{check_hurwitz, solve_lyapunov};
use crate::ppf::{slope_r, PerformanceSpec};

/// Which algebraic route the simulator uses for the error and control laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Per-agent neighbor sums and scalar degree factors.
    #[default]
    Scalar,
    /// Stacked `(L+B) ⊗ I_P` products and `(d+b)^{±1} ⊗ I_P` matrices.
    Kronecker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub c: f64,
    pub k: f64,
    pub lambda: Vec<f64>,
    /// `Π_i` per agent.
    pub pi_gain: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub formulation: Formulation,
}

fn default_beta() -> f64 {
    1.0
}

/// Filter coefficients placing every companion pole at `-2`.
pub fn default_lambda(order: usize) -> Vec<f64> {
    // (s + 2)^(M-1) expanded, constant term first, leading 1 dropped.
    let n = order.saturating_sub(1);
    let mut poly = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += 2.0 * c;
            next[i + 1] += c;
        }
        poly = next;
    }
    poly.truncate(n);
    poly
}

/// `(M-1) x (M-1)` companion matrix with ones on the superdiagonal and
/// `-lambda` on the last row. Errors unless Hurwitz.
pub fn companion_matrix(lambda: &[f64]) -> Result<DMatrix<f64>> {
    let n = lambda.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        m[(i, i + 1)] = 1.0;
    }
    for (j, l) in lambda.iter().enumerate() {
        m[(n - 1, j)] = -l;
    }
    check_hurwitz(&m)?;
    Ok(m)
}

/// `E` for one agent from its per-channel transformed-error jets.
pub fn metric_error(eps_jets: &[Jet], lambda: &[f64]) -> DVector<f64> {
    let top = lambda.len();
    DVector::from_iterator(
        eps_jets.len(),
        eps_jets.iter().map(|j| {
            let mut e = j.derivative(top);
            for (m, l) in lambda.iter().enumerate() {
                e += l * j.derivative(m);
            }
            e
        }),
    )
}

/// `lambda[M-2] eps^(M-1) + ... + lambda[0] eps'` per channel: the time
/// derivative of the filter's lower-order part, cancelled by the control.
pub fn filter_compensation(eps_jets: &[Jet], lambda: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        eps_jets.len(),
        eps_jets
            .iter()
            .map(|j| lambda.iter().enumerate().map(|(m, l)| l * j.derivative(m + 1)).sum()),
    )
}

/// Diagonal of `Ω_i`: the transformation slope of each channel.
pub fn omega_matrix(e: &DVector<f64>, rho: &DVector<f64>, specs: &[PerformanceSpec]) -> Result<DVector<f64>> {
    if e.len() != rho.len() || e.len() != specs.len() {
        return Err(Error::DimensionMismatch {
            context: "omega channels",
            expected: specs.len(),
            actual: e.len(),
        });
    }
    let mut out = DVector::zeros(e.len());
    for p in 0..e.len() {
        out[p] = slope_r(e[p], rho[p], &specs[p])?;
    }
    Ok(out)
}

/// Local quantities that one agent's control law consumes.
#[derive(Debug, Clone, Copy)]
pub struct LocalLaw<'a> {
    pub agent: usize,
    pub eps_jets: &'a [Jet],
    pub e_metric: &'a DVector<f64>,
    /// `Ŵ_i^T φ_i`.
    pub nn_estimate: &'a DVector<f64>,
    pub omega_diag: &'a DVector<f64>,
    pub d_plus_b: f64,
    pub input_inverse: &'a DMatrix<f64>,
}

impl LocalLaw<'_> {
    fn check(&self) -> Result<()> {
        if !(self.d_plus_b > 0.0) {
            return Err(Error::ZeroRowDegree { agent: self.agent });
        }
        let p = self.e_metric.len();
        for len in [
            self.nn_estimate.len(),
            self.omega_diag.len(),
            self.eps_jets.len(),
            self.input_inverse.nrows(),
        ] {
            if len != p {
                return Err(Error::DimensionMismatch {
                    context: "control law channels",
                    expected: p,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

/// `u_i = G^-1 (-c E - Ŵ^T φ - (d+b)^-1 Ω^-1 comp)`, channel by channel.
pub fn control_signal(law: &LocalLaw<'_>, c: f64, lambda: &[f64]) -> Result<DVector<f64>> {
    law.check()?;
    let comp = filter_compensation(law.eps_jets, lambda);
    let inv_db = 1.0 / law.d_plus_b;
    let v = DVector::from_fn(law.e_metric.len(), |p, _| {
        -c * law.e_metric[p] - law.nn_estimate[p] - inv_db * (1.0 / law.omega_diag[p]) * comp[p]
    });
    Ok(law.input_inverse * v)
}

/// Same law with `((d+b)^-1 ⊗ I_P) Ω^-1` formed as matrices.
pub fn control_signal_kron(law: &LocalLaw<'_>, c: f64, lambda: &[f64]) -> Result<DVector<f64>> {
    law.check()?;
    let p = law.e_metric.len();
    let comp = filter_compensation(law.eps_jets, lambda);
    let degree_inv = kron_expand(&DMatrix::from_element(1, 1, 1.0 / law.d_plus_b), p);
    let omega_inv = DMatrix::from_diagonal(&law.omega_diag.map(|w| 1.0 / w));
    let v = law.e_metric * (-c) - law.nn_estimate - degree_inv * omega_inv * comp;
    Ok(law.input_inverse * v)
}

/// User-supplied constants for the gain check. `r_min`/`r_max` override the
/// scenario's own estimate of the slope matrix spread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    /// Activation bound `||φ|| <= φ_M`.
    pub phi_max: Option<f64>,
    /// Ideal-weight bound `W_M`.
    pub weight_bound: Option<f64>,
    /// Residual bound `T_M`.
    pub residual_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    pub c: f64,
    pub k: f64,
    pub beta: f64,
    pub gamma: f64,
    pub g: f64,
    pub nu: f64,
    pub mu: f64,
    pub c_lower_bound: f64,
    pub gain_condition_ok: bool,
    pub h_matrix: [[f64; 3]; 3],
    /// Leading principal minors of `H`.
    pub minors: [f64; 3],
    /// `β > 0`, `βk > 0`, `k(βμ - 2g²) - βγ² > 0`.
    pub sylvester_conditions: [bool; 3],
    pub sylvester_ok: bool,
    pub sigma_min_q: f64,
    pub q_min_eigenvalue: f64,
    pub sigma_min_r: f64,
    pub sigma_max_r: f64,
    pub sigma_max_m_scaling: f64,
    pub sigma_max_adjacency: f64,
    pub sigma_min_degree: f64,
    pub sigma_max_lyapunov: f64,
    pub lambda_frobenius: f64,
    pub lambda_norm: f64,
    pub phi_max: f64,
    pub weight_bound: f64,
    pub residual_bound: f64,
}

impl GainReport {
    pub fn passed(&self) -> bool {
        self.gain_condition_ok && self.sylvester_ok
    }

    pub const CSV_HEADER: &'static str = "c,k,beta,gamma,g,nu,mu,c_lower_bound,gain_condition_ok,minor1,minor2,minor3,sylvester_1,sylvester_2,sylvester_3,sylvester_ok,sigma_min_q,q_min_eigenvalue,sigma_min_r,sigma_max_r,sigma_max_m_scaling,sigma_max_adjacency,sigma_min_degree,sigma_max_lyapunov,lambda_frobenius,lambda_norm,phi_max,weight_bound,residual_bound";

    pub fn csv_row(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        [
            f(self.c),
            f(self.k),
            f(self.beta),
            f(self.gamma),
            f(self.g),
            f(self.nu),
            f(self.mu),
            f(self.c_lower_bound),
            self.gain_condition_ok.to_string(),
            f(self.minors[0]),
            f(self.minors[1]),
            f(self.minors[2]),
            self.sylvester_conditions[0].to_string(),
            self.sylvester_conditions[1].to_string(),
            self.sylvester_conditions[2].to_string(),
            self.sylvester_ok.to_string(),
            f(self.sigma_min_q),
            f(self.q_min_eigenvalue),
            f(self.sigma_min_r),
            f(self.sigma_max_r),
            f(self.sigma_max_m_scaling),
            f(self.sigma_max_adjacency),
            f(self.sigma_min_degree),
            f(self.sigma_max_lyapunov),
            f(self.lambda_frobenius),
            f(self.lambda_norm),
            f(self.phi_max),
            f(self.weight_bound),
            f(self.residual_bound),
        ]
        .join(",")
    }
}

/// Spread of the slope matrix `R` used in the gain condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeSpread {
    pub min: f64,
    pub max: f64,
}

/// Evaluates the lower bound on `c` and the Sylvester conditions on `H`.
pub fn verify_gains(
    graph: &Digraph,
    params: &ControllerParams,
    bounds: &GainBounds,
    r_estimate: SlopeSpread,
) -> Result<GainReport> {
    let phi_max = bounds.phi_max.ok_or(Error::MissingBounds("phi_max"))?;
    let weight_bound = bounds.weight_bound.ok_or(Error::MissingBounds("weight_bound"))?;
    let residual_bound = bounds.residual_bound.ok_or(Error::MissingBounds("residual_bound"))?;
    let sigma_min_r = bounds.r_min.unwrap_or(r_estimate.min);
    let sigma_max_r = bounds.r_max.unwrap_or(r_estimate.max);
    if !(params.k > 0.0) {
        return Err(Error::NonpositiveGain {
            name: "k",
            value: params.k,
        });
    }

    let l1 = graph.lemma1_quantities()?;
    let lambda_m = companion_matrix(&params.lambda)?;
    let lyap = solve_lyapunov(&lambda_m, params.beta)?;

    let sigma_min_q = min_singular_value(&l1.q_matrix);
    let q_min_eigenvalue = l1.q_matrix.symmetric_eigenvalues().min();
    let sigma_max_m_scaling = l1.m_diag.max();
    let sigma_max_adjacency = max_singular_value(graph.adjacency());
    let sigma_min_degree = min_singular_value(&graph.degree_plus_pinning_matrix());
    let sigma_max_lyapunov = max_singular_value(&lyap);
    let lambda_frobenius = lambda_m.norm();
    let lambda_norm = DVector::from_column_slice(&params.lambda).norm();

    let coupling = sigma_max_m_scaling * sigma_max_adjacency / sigma_min_degree;
    let gamma = -0.5 * phi_max * sigma_max_m_scaling * sigma_max_r * sigma_max_adjacency;
    let g = -0.5 * (sigma_max_lyapunov + coupling * lambda_frobenius * lambda_norm);
    let nu = coupling * lambda_norm;
    let mu = params.c * sigma_min_r * sigma_min_q - coupling;
    let (beta, k) = (params.beta, params.k);

    let c_lower_bound = (gamma * gamma / k + 2.0 / beta * g * g + nu) / (sigma_min_q * sigma_min_r);
    let h = [[beta / 2.0, 0.0, g], [0.0, k, gamma], [g, gamma, mu]];
    let minor1 = h[0][0];
    let minor2 = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let minor3 = DMatrix::from_fn(3, 3, |i, j| h[i][j]).determinant();
    let third = k * (beta * mu - 2.0 * g * g) - beta * gamma * gamma;
    let sylvester_conditions = [beta > 0.0, beta * k > 0.0, third > 0.0];

    Ok(GainReport {
        c: params.c,
        k,
        beta,
        gamma,
        g,
        nu,
        mu,
        c_lower_bound,
        gain_condition_ok: params.c > c_lower_bound,
        h_matrix: h,
        minors: [minor1, minor2, minor3],
        sylvester_conditions,
        sylvester_ok: sylvester_conditions.iter().all(|b| *b),
        sigma_min_q,
        q_min_eigenvalue,
        sigma_min_r,
        sigma_max_r,
        sigma_max_m_scaling,
        sigma_max_adjacency,
        sigma_min_degree,
        sigma_max_lyapunov,
        lambda_frobenius,
        lambda_norm,
        phi_max,
        weight_bound,
        residual_bound,
    })
}
