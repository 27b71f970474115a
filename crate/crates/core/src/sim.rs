//! Fixed-step closed-loop simulation of the follower network, the leader and
//! the adaptive weights, with trace logging and run metrics.
//!
//! Augmented state layout: every follower state (order-major, `m * P + p`),
//! then the leader state, then each `Ŵ_i` column-major (`j + p * v`).
//! Control and the adaptation drive `(φ, E, Ω)` are sampled at the start of
//! each macro step and held over the four Runge–Kutta stages; the weight
//! derivative itself is re-evaluated per stage on the stage weights.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::{control_signal, control_signal_kron, metric_error, Formulation, LocalLaw};
use crate::dynamics::{agent_derivative, leader_derivative};
use crate::error::{Error, Result};
use crate::graph::{kron_expand, min_singular_value};
use crate::jet::Jet;
use crate::nn::{predict, weight_update_derivative, weight_update_derivative_kron, AdaptationGains, RbfBasis};
use crate::ppf::{check_envelope, rho_jet, slope_r, transform_jet, InitialSign, PerformanceSpec};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub log_stride: usize,
    /// Start of the window in which the steady-state error is measured.
    #[serde(default = "default_settle_after")]
    pub settle_after: f64,
}

fn default_stride() -> usize {
    10
}

fn default_settle_after() -> f64 {
    15.0
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 20.0,
            log_stride: default_stride(),
            settle_after: default_settle_after(),
        }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(mut f: F, y: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let h = dt / 2.0;
    let k1 = f(t, y)?;
    let k2 = f(t + h, &(y + &k1 * h))?;
    let k3 = f(t + h, &(y + &k2 * h))?;
    let k4 = f(t + dt, &(y + &k3 * dt))?;
    let next = y + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFiniteState { t: t + dt })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    OutOfEnvelope,
    NonFiniteState,
    Other,
}

/// Why a run stopped early. Agent and channel are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub kind: FailureKind,
    pub t: f64,
    pub agent: Option<usize>,
    pub channel: Option<usize>,
    pub message: String,
}

impl RunFailure {
    fn from_error(err: Error, t: f64) -> Self {
        let (kind, t) = match err {
            Error::OutOfEnvelope { .. } => (FailureKind::OutOfEnvelope, t),
            Error::NonFiniteState { t: at } => (FailureKind::NonFiniteState, at),
            _ => (FailureKind::Other, t),
        };
        Self {
            kind,
            t,
            agent: None,
            channel: None,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub leader: Vec<f64>,
    /// Per agent, full state.
    pub states: Vec<Vec<f64>>,
    /// Per agent, per channel.
    pub e: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// Output disagreement `x_i - x_0`.
    pub disagreement: Vec<Vec<f64>>,
    pub weight_norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLog {
    pub n_agents: usize,
    pub order: usize,
    pub channels: usize,
    pub samples: Vec<TraceSample>,
}

impl TraceLog {
    pub fn header(&self) -> Vec<String> {
        let (n, order, ch) = (self.n_agents, self.order, self.channels);
        let mut cols = vec!["t".to_string()];
        for m in 1..=order {
            for p in 1..=ch {
                cols.push(format!("x0_{m}_{p}"));
            }
        }
        for i in 1..=n {
            for m in 1..=order {
                for p in 1..=ch {
                    cols.push(format!("x{i}_{m}_{p}"));
                }
            }
        }
        for prefix in ["e", "eps", "rho", "u", "d"] {
            for i in 1..=n {
                for p in 1..=ch {
                    cols.push(format!("{prefix}{i}_{p}"));
                }
            }
        }
        for i in 1..=n {
            cols.push(format!("wnorm{i}"));
        }
        cols
    }

    /// Plot-ready CSV, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header().join(","))?;
        let mut row = String::new();
        for s in &self.samples {
            row.clear();
            push_num(&mut row, s.t);
            for v in &s.leader {
                push_num(&mut row, *v);
            }
            for x in &s.states {
                for v in x {
                    push_num(&mut row, *v);
                }
            }
            for block in [&s.e, &s.eps, &s.rho, &s.u, &s.disagreement] {
                for per_agent in block {
                    for v in per_agent {
                        push_num(&mut row, *v);
                    }
                }
            }
            for v in &s.weight_norm {
                push_num(&mut row, *v);
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn push_num(row: &mut String, v: f64) {
    use std::fmt::Write as _;
    if !row.is_empty() {
        row.push(',');
    }
    write!(row, "{v:.16e}").expect("writing to string");
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub samples: usize,
    pub t_final: f64,
    /// Logged samples with `e` outside the open funnel.
    pub envelope_violations: usize,
    pub settle_after: f64,
    /// `max |e_i^p(t)|` over logged `t >= settle_after`, per agent and
    /// channel; `None` when the trace never reached the window.
    pub max_abs_e_after: Option<Vec<Vec<f64>>>,
    pub max_abs_e_after_overall: Option<f64>,
    /// First logged time after which every `|e_i^p| <= rho_inf` for the rest of the trace.
    pub settling_time: Option<f64>,
    pub final_sync_error_norm: f64,
    pub final_disagreement_norm: f64,
    /// Samples at which `||x - x_0|| <= ||e|| / σ̲(L+B)` fails.
    pub disagreement_bound_violations: usize,
    pub min_slope: f64,
    pub weight_norm_max: f64,
}

/// Run metrics from a trace. `specs[i][p]` is the oriented funnel of agent
/// `i`, channel `p`; `sigma_min_lb` is `σ̲(L+B)`.
pub fn summarize(trace: &TraceLog, specs: &[Vec<PerformanceSpec>], sigma_min_lb: f64, settle_after: f64) -> RunSummary {
    let n = trace.n_agents;
    let ch = trace.channels;
    let mut violations = 0;
    let mut max_after = vec![vec![0.0f64; ch]; n];
    let mut bound_violations = 0;
    let mut min_slope = f64::INFINITY;
    let mut weight_norm_max = 0.0f64;
    let mut settling_time = None;
    let mut reached_window = false;

    for s in &trace.samples {
        reached_window |= s.t >= settle_after;
        let mut inside = true;
        let mut settled = true;
        for i in 0..n {
            for p in 0..ch {
                let e = s.e[i][p];
                if !check_envelope(e, s.rho[i][p], &specs[i][p], InitialSign::NonNegative) {
                    inside = false;
                }
                if e.abs() > specs[i][p].rho_inf {
                    settled = false;
                }
                if s.t >= settle_after {
                    max_after[i][p] = max_after[i][p].max(e.abs());
                }
                min_slope = min_slope.min(s.omega[i][p]);
            }
        }
        if !inside {
            violations += 1;
        }
        match (settled, settling_time) {
            (true, None) => settling_time = Some(s.t),
            (false, _) => settling_time = None,
            _ => {}
        }
        let e_norm = flat_norm(&s.e);
        let d_norm = flat_norm(&s.disagreement);
        if d_norm > e_norm / sigma_min_lb * (1.0 + 1e-12) + 1e-300 {
            bound_violations += 1;
        }
        weight_norm_max = s.weight_norm.iter().copied().fold(weight_norm_max, f64::max);
    }

    let last = trace.samples.last();
    RunSummary {
        samples: trace.samples.len(),
        t_final: last.map_or(0.0, |s| s.t),
        envelope_violations: violations,
        settle_after,
        max_abs_e_after_overall: reached_window.then(|| max_after.iter().flatten().copied().fold(0.0, f64::max)),
        max_abs_e_after: reached_window.then_some(max_after),
        settling_time,
        final_sync_error_norm: last.map_or(0.0, |s| flat_norm(&s.e)),
        final_disagreement_norm: last.map_or(0.0, |s| flat_norm(&s.disagreement)),
        disagreement_bound_violations: bound_violations,
        min_slope,
        weight_norm_max,
    }
}

fn flat_norm(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub trace: TraceLog,
    pub summary: RunSummary,
    pub failure: Option<RunFailure>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.summary.envelope_violations == 0
    }
}

/// Per-agent quantities sampled at the start of a step.
#[derive(Debug, Clone)]
struct AgentSignals {
    e: DVector<f64>,
    eps: DVector<f64>,
    rho: DVector<f64>,
    omega: DVector<f64>,
    e_metric: DVector<f64>,
    phi: DVector<f64>,
    u: DVector<f64>,
}

/// The assembled closed loop of one scenario.
pub struct ClosedLoop<'a> {
    scenario: &'a Scenario,
    bases: Vec<RbfBasis>,
    m_diag: DVector<f64>,
    input_inverse: Vec<DMatrix<f64>>,
    specs: Vec<Vec<PerformanceSpec>>,
    lb_kron: DMatrix<f64>,
    sigma_min_lb: f64,
    n: usize,
    order: usize,
    channels: usize,
    neurons: usize,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let graph = &scenario.graph;
        let n = graph.n_agents();
        let order = scenario.order();
        let channels = scenario.channels();
        let lq = graph.lemma1_quantities()?;
        let bases = (0..n)
            .map(|_| RbfBasis::from_settings(&scenario.nn, order * channels))
            .collect::<Result<Vec<_>>>()?;
        let neurons = bases[0].len();
        let input_inverse = scenario
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.input_inverse().ok_or(Error::SingularInput { agent: i }))
            .collect::<Result<Vec<_>>>()?;
        let lb = graph.laplacian_plus_pinning();
        Ok(Self {
            scenario,
            bases,
            m_diag: lq.m_diag,
            input_inverse,
            specs: scenario.oriented_specs()?,
            lb_kron: kron_expand(&lb, channels),
            sigma_min_lb: min_singular_value(&lb),
            n,
            order,
            channels,
            neurons,
        })
    }

    pub fn oriented_specs(&self) -> &[Vec<PerformanceSpec>] {
        &self.specs
    }

    pub fn sigma_min_lb(&self) -> f64 {
        self.sigma_min_lb
    }

    fn state_dim(&self) -> usize {
        self.order * self.channels
    }

    fn leader_offset(&self) -> usize {
        self.n * self.state_dim()
    }

    fn weight_offset(&self, i: usize) -> usize {
        self.leader_offset() + self.state_dim() + i * self.neurons * self.channels
    }

    pub fn augmented_dim(&self) -> usize {
        self.weight_offset(self.n)
    }

    pub fn initial_state(&self) -> DVector<f64> {
        let mut y = DVector::zeros(self.augmented_dim());
        let sd = self.state_dim();
        for (i, x) in self.scenario.initial_states.iter().enumerate() {
            y.rows_mut(i * sd, sd).copy_from(x);
        }
        y.rows_mut(self.leader_offset(), sd)
            .copy_from(&self.scenario.leader_initial);
        y
    }

    fn weights(&self, y: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let len = self.neurons * self.channels;
        DMatrix::from_column_slice(
            self.neurons,
            self.channels,
            &y.as_slice()[self.weight_offset(i)..][..len],
        )
    }

    /// Synchronization error derivatives `e^(m)`, `m < order`, as `N x P` matrices.
    fn error_derivatives(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (n, ch, sd) = (self.n, self.channels, self.state_dim());
        let lo = self.leader_offset();
        (0..self.order)
            .map(|m| {
                let outputs = DMatrix::from_fn(n, ch, |i, p| y[i * sd + m * ch + p]);
                let leader = DVector::from_fn(ch, |p, _| y[lo + m * ch + p]);
                match self.scenario.controller.formulation {
                    Formulation::Scalar => self
                        .scenario
                        .graph
                        .sync_error(&outputs, &leader)
                        .expect("shapes fixed at setup"),
                    Formulation::Kronecker => {
                        let stacked = DVector::from_fn(n * ch, |k, _| outputs[(k / ch, k % ch)] - leader[k % ch]);
                        let e = &self.lb_kron * stacked;
                        DMatrix::from_fn(n, ch, |i, p| e[i * ch + p])
                    }
                }
            })
            .collect()
    }

    fn signals(&self, t: f64, y: &DVector<f64>) -> std::result::Result<Vec<AgentSignals>, RunFailure> {
        let params = &self.scenario.controller;
        let derivs = self.error_derivatives(y);
        let top = self.order - 1;
        let sd = self.state_dim();
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut eps_jets = Vec::with_capacity(self.channels);
            let mut rho = DVector::zeros(self.channels);
            let mut omega = DVector::zeros(self.channels);
            let e = DVector::from_fn(self.channels, |p, _| derivs[0][(i, p)]);
            for p in 0..self.channels {
                let spec = &self.specs[i][p];
                let e_jet = Jet::from_derivatives(&derivs.iter().map(|d| d[(i, p)]).collect::<Vec<_>>());
                let r_jet = rho_jet(spec, t, top);
                let located = |err: Error| RunFailure {
                    agent: Some(i + 1),
                    channel: Some(p + 1),
                    ..RunFailure::from_error(err, t)
                };
                eps_jets.push(transform_jet(&e_jet, &r_jet, spec).map_err(located)?);
                rho[p] = r_jet.value();
                omega[p] = slope_r(e[p], rho[p], spec).map_err(located)?;
            }
            let e_metric = metric_error(&eps_jets, &params.lambda);
            let x = &y.as_slice()[i * sd..(i + 1) * sd];
            let phi = self.bases[i].eval(x).map_err(|err| RunFailure::from_error(err, t))?;
            let w = self.weights(y, i);
            let estimate = predict(&w, &phi).map_err(|err| RunFailure::from_error(err, t))?;
            let law = LocalLaw {
                agent: i,
                eps_jets: &eps_jets,
                e_metric: &e_metric,
                nn_estimate: &estimate,
                omega_diag: &omega,
                d_plus_b: self.scenario.graph.degree_plus_pinning(i),
                input_inverse: &self.input_inverse[i],
            };
            let u = match params.formulation {
                Formulation::Scalar => control_signal(&law, params.c, &params.lambda),
                Formulation::Kronecker => control_signal_kron(&law, params.c, &params.lambda),
            }
            .map_err(|err| RunFailure::from_error(err, t))?;
            out.push(AgentSignals {
                eps: DVector::from_iterator(self.channels, eps_jets.iter().map(Jet::value)),
                e,
                rho,
                omega,
                e_metric,
                phi,
                u,
            });
        }
        Ok(out)
    }

    /// Augmented derivative with the sampled signals held.
    fn derivative(&self, t: f64, y: &DVector<f64>, held: &[AgentSignals]) -> Result<DVector<f64>> {
        let sc = self.scenario;
        let sd = self.state_dim();
        let mut dy = DVector::zeros(y.len());
        for (i, sig) in held.iter().enumerate() {
            let dx = agent_derivative(&sc.agents[i], &y.as_slice()[i * sd..(i + 1) * sd], sig.u.as_slice(), t)?;
            dy.rows_mut(i * sd, sd).copy_from(&dx);
        }
        let lo = self.leader_offset();
        let dx0 = leader_derivative(&sc.leader, &y.as_slice()[lo..lo + sd], t, self.order, self.channels)?;
        dy.rows_mut(lo, sd).copy_from(&dx0);

        for (i, sig) in held.iter().enumerate() {
            let gains = AdaptationGains {
                pi_gain: sc.controller.pi_gain[i],
                leakage: sc.controller.k,
            };
            let w = self.weights(y, i);
            let d_plus_b = sc.graph.degree_plus_pinning(i);
            let dw = match sc.controller.formulation {
                Formulation::Scalar => {
                    weight_update_derivative(&w, &sig.phi, &sig.e_metric, self.m_diag[i], &sig.omega, d_plus_b, gains)?
                }
                Formulation::Kronecker => weight_update_derivative_kron(
                    &w,
                    &sig.phi,
                    &sig.e_metric,
                    self.m_diag[i],
                    &DMatrix::from_diagonal(&sig.omega),
                    d_plus_b,
                    gains,
                )?,
            };
            let off = self.weight_offset(i);
            dy.rows_mut(off, dw.len()).copy_from_slice(dw.as_slice());
        }
        Ok(dy)
    }

    fn sample(&self, t: f64, y: &DVector<f64>, sig: &[AgentSignals]) -> TraceSample {
        let sd = self.state_dim();
        let ch = self.channels;
        let lo = self.leader_offset();
        let leader = y.as_slice()[lo..lo + sd].to_vec();
        let rows = |f: &dyn Fn(&AgentSignals) -> &DVector<f64>| sig.iter().map(|s| f(s).as_slice().to_vec()).collect();
        TraceSample {
            t,
            states: (0..self.n)
                .map(|i| y.as_slice()[i * sd..(i + 1) * sd].to_vec())
                .collect(),
            disagreement: (0..self.n)
                .map(|i| (0..ch).map(|p| y[i * sd + p] - leader[p]).collect())
                .collect(),
            leader,
            e: rows(&|s| &s.e),
            eps: rows(&|s| &s.eps),
            rho: rows(&|s| &s.rho),
            omega: rows(&|s| &s.omega),
            u: rows(&|s| &s.u),
            weight_norm: (0..self.n).map(|i| self.weights(y, i).norm()).collect(),
        }
    }

    /// Integrates over the configured horizon; stops at the first envelope
    /// exit or non-finite state.
    pub fn run(&self) -> RunOutcome {
        let cfg = self.scenario.sim;
        let steps = cfg.steps();
        let stride = cfg.log_stride.max(1);
        let mut trace = TraceLog {
            n_agents: self.n,
            order: self.order,
            channels: self.channels,
            samples: Vec::with_capacity(steps / stride + 2),
        };
        let mut y = self.initial_state();
        let mut failure = None;
        for k in 0..=steps {
            let t = k as f64 * cfg.dt;
            let sig = match self.signals(t, &y) {
                Ok(s) => s,
                Err(f) => {
                    failure = Some(f);
                    break;
                }
            };
            if k % stride == 0 || k == steps {
                trace.samples.push(self.sample(t, &y, &sig));
            }
            if k == steps {
                break;
            }
            match rk4_step(|ts, ys| self.derivative(ts, ys, &sig), &y, t, cfg.dt) {
                Ok(next) => y = next,
                Err(err) => {
                    failure = Some(RunFailure::from_error(err, t));
                    break;
                }
            }
        }
        let mut summary = summarize(&trace, &self.specs, self.sigma_min_lb, cfg.settle_after);
        if matches!(&failure, Some(f) if f.kind == FailureKind::OutOfEnvelope) {
            summary.envelope_violations += 1;
        }
        RunOutcome {
            trace,
            summary,
            failure,
        }
    }
}

/// Builds the closed loop for a validated scenario and runs it.
pub fn run_experiment(scenario: &Scenario) -> Result<RunOutcome> {
    Ok(ClosedLoop::new(scenario)?.run())
}
