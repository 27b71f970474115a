//! Brunovsky-form agent and leader models.
//!
//! A state of order `M` with `P` channels is stored block-wise by derivative
//! order: `x = [x^1 (P entries), x^2 (P entries), ..., x^M (P entries)]`, so
//! channel `p` of derivative block `m` sits at index `m * P + p` (0-based).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod builtin;

/// Unknown drift `f_i(x, t)` of one agent: either a registry entry or a table
/// of product terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    /// `f_1 ... f_5` of the third-order single-channel benchmark (`agent` is 1-based).
    Problem1 {
        agent: usize,
    },
    /// Two-channel second-order benchmark drift with its `a`, `b`, `c` parameter rows.
    Problem2 {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
    },
    Terms {
        terms: Vec<DriftTerm>,
    },
}

/// `coeff * prod(x[idx]^pow) * wave(...)` added to output `channel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTerm {
    pub channel: usize,
    pub coeff: f64,
    #[serde(default)]
    pub factors: Vec<(usize, i32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<Wave>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveKind {
    Sin,
    Cos,
}

/// `sin` or `cos` of `time_freq * t + state_gain * x[state] + phase`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub kind: WaveKind,
    #[serde(default)]
    pub time_freq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<(usize, f64)>,
    #[serde(default)]
    pub phase: f64,
}

impl Wave {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let mut arg = self.time_freq * t + self.phase;
        if let Some((idx, gain)) = self.state {
            arg += gain * x[idx];
        }
        match self.kind {
            WaveKind::Sin => arg.sin(),
            WaveKind::Cos => arg.cos(),
        }
    }
}

impl DriftTerm {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let mut v = self.coeff;
        for &(idx, pow) in &self.factors {
            v *= x[idx].powi(pow);
        }
        if let Some(w) = &self.wave {
            v *= w.eval(x, t);
        }
        v
    }

    fn max_state_index(&self) -> Option<usize> {
        let wave_idx = self.wave.as_ref().and_then(|w| w.state.map(|(i, _)| i));
        self.factors.iter().map(|(i, _)| *i).chain(wave_idx).max()
    }
}

fn eval_terms(terms: &[DriftTerm], x: &[f64], t: f64, channels: usize) -> DVector<f64> {
    let mut out = DVector::zeros(channels);
    for term in terms {
        out[term.channel] += term.eval(x, t);
    }
    out
}

fn check_terms(terms: &[DriftTerm], state_dim: usize, channels: usize) -> Vec<String> {
    let mut out = Vec::new();
    for (k, term) in terms.iter().enumerate() {
        if term.channel >= channels {
            out.push(format!("term {k}: channel {} >= {channels}", term.channel));
        }
        if let Some(idx) = term.max_state_index() {
            if idx >= state_dim {
                out.push(format!("term {k}: state index {idx} >= {state_dim}"));
            }
        }
    }
    out
}

impl Drift {
    /// Evaluates the drift on a full state.
    pub fn eval(&self, x: &[f64], t: f64, channels: usize) -> DVector<f64> {
        match self {
            Drift::Problem1 { agent } => DVector::from_element(1, builtin::problem1_drift(*agent, x, t)),
            Drift::Problem2 { a, b, c } => builtin::problem2_drift(a, b, c, x, t),
            Drift::Terms { terms } => eval_terms(terms, x, t, channels),
        }
    }

    /// Shape problems for a model of the given order and channel count.
    pub fn check_shape(&self, order: usize, channels: usize) -> Vec<String> {
        match self {
            Drift::Problem1 { agent } => {
                let mut out = Vec::new();
                if !(1..=5).contains(agent) {
                    out.push(format!("problem1 drift agent must be 1..=5, got {agent}"));
                }
                if order != 3 || channels != 1 {
                    out.push("problem1 drift needs order 3 and 1 channel".into());
                }
                out
            }
            Drift::Problem2 { .. } => {
                if order != 2 || channels != 2 {
                    vec!["problem2 drift needs order 2 and 2 channels".into()]
                } else {
                    Vec::new()
                }
            }
            Drift::Terms { terms } => check_terms(terms, order * channels, channels),
        }
    }
}

/// One follower: chain of integrators with drift and a known input matrix on top.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub order: usize,
    pub channels: usize,
    pub drift: Drift,
    pub input_matrix: DMatrix<f64>,
}

impl AgentModel {
    pub fn new(order: usize, channels: usize, drift: Drift, input_matrix: DMatrix<f64>) -> Self {
        Self {
            order,
            channels,
            drift,
            input_matrix,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.order * self.channels
    }

    /// `G^-1`, if the input matrix is square and invertible.
    pub fn input_inverse(&self) -> Option<DMatrix<f64>> {
        if self.input_matrix.shape() != (self.channels, self.channels) {
            return None;
        }
        self.input_matrix
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
    }

    /// 2-norm condition number of `G`.
    pub fn input_condition(&self) -> f64 {
        let sv = self.input_matrix.singular_values();
        sv.max() / sv.min()
    }
}

fn shift_chain(x: &[f64], channels: usize, top: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut dx = DVector::zeros(n);
    for k in 0..n - channels {
        dx[k] = x[k + channels];
    }
    for p in 0..channels {
        dx[n - channels + p] = top[p];
    }
    dx
}

/// `dx/dt` of a follower under control `u`.
pub fn agent_derivative(model: &AgentModel, x: &[f64], u: &[f64], t: f64) -> Result<DVector<f64>> {
    if x.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "agent state",
            expected: model.state_dim(),
            actual: x.len(),
        });
    }
    if u.len() != model.channels {
        return Err(Error::DimensionMismatch {
            context: "agent control",
            expected: model.channels,
            actual: u.len(),
        });
    }
    let top = model.drift.eval(x, t, model.channels) + &model.input_matrix * DVector::from_column_slice(u);
    Ok(shift_chain(x, model.channels, &top))
}

/// Leader (exosystem) dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeaderModel {
    /// Third-order single-channel benchmark leader.
    Problem1,
    /// Top derivative given by a term table in `(x0, t)`.
    Terms { terms: Vec<DriftTerm> },
    /// Closed-form `y_p(t) = amplitude_p cos(freq_p t + phase_p)`.
    Sinusoid {
        amplitude: Vec<f64>,
        freq: Vec<f64>,
        #[serde(default)]
        phase: Vec<f64>,
    },
}

impl LeaderModel {
    /// `f_0(t, x0)`.
    pub fn top_derivative(&self, x0: &[f64], t: f64, order: usize, channels: usize) -> DVector<f64> {
        match self {
            LeaderModel::Problem1 => DVector::from_element(1, builtin::problem1_leader(x0, t)),
            LeaderModel::Terms { terms } => eval_terms(terms, x0, t, channels),
            LeaderModel::Sinusoid { .. } => DVector::from_fn(channels, |p, _| self.sinusoid_derivative(p, order, t)),
        }
    }

    fn sinusoid_derivative(&self, p: usize, m: usize, t: f64) -> f64 {
        let LeaderModel::Sinusoid { amplitude, freq, phase } = self else {
            unreachable!("closed form requested from a non-sinusoid leader")
        };
        let ph = phase.get(p).copied().unwrap_or(0.0);
        let w = freq[p];
        amplitude[p] * w.powi(m as i32) * (w * t + ph + m as f64 * std::f64::consts::FRAC_PI_2).cos()
    }

    /// Full leader state at `t` when the leader has a closed form.
    pub fn trajectory_state(&self, t: f64, order: usize, channels: usize) -> Option<DVector<f64>> {
        match self {
            LeaderModel::Sinusoid { .. } => Some(DVector::from_fn(order * channels, |k, _| {
                self.sinusoid_derivative(k % channels, k / channels, t)
            })),
            _ => None,
        }
    }

    pub fn check_shape(&self, order: usize, channels: usize) -> Vec<String> {
        match self {
            LeaderModel::Problem1 => {
                if order != 3 || channels != 1 {
                    vec!["problem1 leader needs order 3 and 1 channel".into()]
                } else {
                    Vec::new()
                }
            }
            LeaderModel::Terms { terms } => check_terms(terms, order * channels, channels),
            LeaderModel::Sinusoid { amplitude, freq, phase } => {
                let mut out = Vec::new();
                if amplitude.len() != channels || freq.len() != channels {
                    out.push(format!("sinusoid amplitude/freq need {channels} entries"));
                }
                if !phase.is_empty() && phase.len() != channels {
                    out.push(format!("sinusoid phase needs 0 or {channels} entries"));
                }
                out
            }
        }
    }
}

/// `dx0/dt` of the leader.
pub fn leader_derivative(
    leader: &LeaderModel,
    x0: &[f64],
    t: f64,
    order: usize,
    channels: usize,
) -> Result<DVector<f64>> {
    if x0.len() != order * channels {
        return Err(Error::DimensionMismatch {
            context: "leader state",
            expected: order * channels,
            actual: x0.len(),
        });
    }
    let top = leader.top_derivative(x0, t, order, channels);
    Ok(shift_chain(x0, channels, &top))
}
