//! JSON scenario files: schema, dotted-path overrides, validation and the
//! shipped benchmark scenarios.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controller::{
    companion_matrix, default_lambda, verify_gains, ControllerParams, Formulation, GainBounds, GainReport, SlopeSpread,
};
use crate::dynamics::builtin::{self, ProblemSetup};
use crate::dynamics::{AgentModel, Drift, LeaderModel};
use crate::error::{Error, Result, ValidationIssue};
use crate::graph::Digraph;
use crate::nn::{CenterLayout, NnSettings};
use crate::ppf::{slope_r, InitialSign, PerformanceSpec};
use crate::sim::SimConfig;

pub const BUILTINS: [&str; 2] = ["problem1", "problem2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    pub adjacency: Vec<Vec<f64>>,
    pub pinning: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub drift: Drift,
    pub input_matrix: Vec<Vec<f64>>,
}

/// Either a builtin model set or explicit tables. Explicit fields override
/// the builtin ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<AgentEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<LeaderModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_states: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_initial: Option<Vec<f64>>,
}

/// A gain given once for every agent or per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerAgent {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            PerAgent::Shared(v) => vec![*v; n],
            PerAgent::Each(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerBlock {
    pub c: f64,
    pub k: f64,
    /// Defaults to all filter poles at -2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    pub pi_gain: PerAgent,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub formulation: Formulation,
    pub nn: NnSettings,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub graph: GraphBlock,
    pub agents: AgentsBlock,
    /// One funnel per channel, shared by all agents.
    pub ppf: Vec<PerformanceSpec>,
    pub controller: ControllerBlock,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GainBounds>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub builtin: Option<String>,
    pub graph: Digraph,
    pub agents: Vec<AgentModel>,
    pub leader: LeaderModel,
    pub initial_states: Vec<DVector<f64>>,
    pub leader_initial: DVector<f64>,
    pub ppf: Vec<PerformanceSpec>,
    pub controller: ControllerParams,
    pub nn: NnSettings,
    pub sim: SimConfig,
    pub bounds: Option<GainBounds>,
}

impl Scenario {
    pub fn order(&self) -> usize {
        self.agents[0].order
    }

    pub fn channels(&self) -> usize {
        self.agents[0].channels
    }

    /// `e_i^p(0)` as an `N x P` matrix.
    pub fn initial_errors(&self) -> DMatrix<f64> {
        let n = self.agents.len();
        let p = self.channels();
        let outputs = DMatrix::from_fn(n, p, |i, ch| self.initial_states[i][ch]);
        let leader = DVector::from_fn(p, |ch, _| self.leader_initial[ch]);
        self.graph.sync_error(&outputs, &leader).expect("validated shapes")
    }

    /// Funnel of every agent channel, oriented by the sign of its initial error.
    pub fn oriented_specs(&self) -> Result<Vec<Vec<PerformanceSpec>>> {
        let e0 = self.initial_errors();
        Ok((0..e0.nrows())
            .map(|i| {
                (0..e0.ncols())
                    .map(|p| self.ppf[p].oriented(InitialSign::of(e0[(i, p)])))
                    .collect()
            })
            .collect())
    }

    /// Smallest and largest transformation slope at `t = 0`.
    pub fn initial_slope_spread(&self) -> Result<SlopeSpread> {
        let e0 = self.initial_errors();
        let specs = self.oriented_specs()?;
        let mut spread = SlopeSpread {
            min: f64::INFINITY,
            max: 0.0,
        };
        for i in 0..e0.nrows() {
            for p in 0..e0.ncols() {
                let spec = &specs[i][p];
                let r = slope_r(e0[(i, p)], spec.rho0, spec)?;
                spread.min = spread.min.min(r);
                spread.max = spread.max.max(r);
            }
        }
        Ok(spread)
    }

    /// Runs the gain verifier with `bounds`, falling back to the scenario's own block.
    pub fn check_gains(&self, bounds: Option<&GainBounds>) -> Result<GainReport> {
        let bounds = bounds.or(self.bounds.as_ref()).ok_or(Error::MissingBounds("phi_max"))?;
        verify_gains(&self.graph, &self.controller, bounds, self.initial_slope_spread()?)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        let agents = AgentsBlock {
            builtin: self.builtin.clone(),
            order: self.builtin.is_none().then(|| self.order()),
            channels: self.builtin.is_none().then(|| self.channels()),
            models: self.builtin.is_none().then(|| {
                self.agents
                    .iter()
                    .map(|a| AgentEntry {
                        drift: a.drift.clone(),
                        input_matrix: rows(&a.input_matrix),
                    })
                    .collect()
            }),
            leader: self.builtin.is_none().then(|| self.leader.clone()),
            initial_states: Some(self.initial_states.iter().map(|x| x.as_slice().to_vec()).collect()),
            leader_initial: Some(self.leader_initial.as_slice().to_vec()),
        };
        ScenarioFile {
            name: self.name.clone(),
            graph: GraphBlock {
                adjacency: rows(self.graph.adjacency()),
                pinning: self.graph.pinning().as_slice().to_vec(),
            },
            agents,
            ppf: self.ppf.clone(),
            controller: ControllerBlock {
                c: self.controller.c,
                k: self.controller.k,
                lambda: Some(self.controller.lambda.clone()),
                pi_gain: PerAgent::Each(self.controller.pi_gain.clone()),
                beta: self.controller.beta,
                formulation: self.controller.formulation,
                nn: self.nn.clone(),
            },
            sim: self.sim,
            bounds: self.bounds,
        }
    }
}

/// Sets `dotted.path` (array indices as numeric segments) to `raw`, read as
/// JSON when it parses and as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{assignment}` is not of the form path=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::Parse(format!("override path `{path}`: `{seg}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Parse(format!("override path `{path}`: index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::Parse(format!(
                    "override path `{path}`: `{seg}` descends into a scalar"
                )))
            }
        };
    }
    Err(Error::Parse(format!("override path `{path}` is empty")))
}

/// Parses scenario JSON, applies overrides and validates.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let file: ScenarioFile = serde_json::from_value(doc).map_err(|e| Error::Parse(e.to_string()))?;
    file.validate()
}

/// Loads a scenario from a path, or a builtin by name when no such file exists.
pub fn load_scenario(path: impl AsRef<Path>, overrides: &[String]) -> Result<Scenario> {
    let path = path.as_ref();
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
    } else {
        let name = path.to_string_lossy();
        let file = builtin_scenario_file(&name)
            .ok_or_else(|| Error::Parse(format!("{name}: no such file or builtin scenario")))?;
        serde_json::to_string(&file).expect("scenario serializes")
    };
    parse_scenario(&text, overrides)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&scenario.to_file()).expect("scenario serializes");
    fs::write(path.as_ref(), text + "\n").map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))
}

fn builtin_setup(name: &str) -> Option<ProblemSetup> {
    match name {
        "problem1" => Some(builtin::problem1()),
        "problem2" => Some(builtin::problem2()),
        _ => None,
    }
}

/// Scenario file for a benchmark, with the published gains and envelopes.
pub fn builtin_scenario_file(name: &str) -> Option<ScenarioFile> {
    let setup = builtin_setup(name)?;
    let g = &setup.graph;
    let graph = GraphBlock {
        adjacency: (0..g.n_agents())
            .map(|i| g.adjacency().row(i).iter().copied().collect())
            .collect(),
        pinning: g.pinning().as_slice().to_vec(),
    };
    let agents = AgentsBlock {
        builtin: Some(name.to_string()),
        initial_states: Some(setup.initial_states.iter().map(|x| x.as_slice().to_vec()).collect()),
        leader_initial: Some(setup.leader_initial.as_slice().to_vec()),
        ..Default::default()
    };
    let file = match name {
        "problem1" => ScenarioFile {
            name: name.into(),
            graph,
            agents,
            ppf: vec![PerformanceSpec::symmetric(4.0, 0.03, 0.6, 4.0)],
            controller: ControllerBlock {
                c: 30.0,
                k: 0.1,
                lambda: Some(default_lambda(3)),
                pi_gain: PerAgent::Shared(0.05),
                beta: 1.0,
                formulation: Formulation::Scalar,
                nn: NnSettings {
                    neurons: 6,
                    layout: CenterLayout::Diagonal { lo: -2.0, hi: 2.0 },
                    width_factor: 2.0,
                    seed: 1,
                },
            },
            sim: SimConfig::default(),
            bounds: None,
        },
        _ => ScenarioFile {
            name: name.into(),
            graph,
            agents,
            ppf: vec![PerformanceSpec::symmetric(6.0, 0.03, 0.6, 6.0); 2],
            controller: ControllerBlock {
                c: 300.0,
                k: 0.1,
                lambda: Some(default_lambda(2)),
                pi_gain: PerAgent::Shared(0.05),
                beta: 1.0,
                formulation: Formulation::Scalar,
                nn: NnSettings {
                    neurons: 50,
                    layout: CenterLayout::LatinHypercube { lo: -2.0, hi: 2.0 },
                    width_factor: 2.0,
                    seed: 2,
                },
            },
            sim: SimConfig {
                dt: PROBLEM2_DT,
                ..SimConfig::default()
            },
            bounds: None,
        },
    };
    Some(file)
}

/// Step for the two-channel benchmark: its high gain needs a finer held-control step.
pub const PROBLEM2_DT: f64 = 1e-4;

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenario_file(name).map(|f| f.validate().expect("builtin scenarios are valid"))
}

struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue::new(path, message));
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(path, format!("must be positive and finite, got {v}"));
        }
    }
}

impl ScenarioFile {
    /// Checks every invariant and reports all failures, each with its config path.
    pub fn validate(&self) -> Result<Scenario> {
        let mut is = Issues(Vec::new());
        let graph = self.validate_graph(&mut is);
        let n = self.graph.pinning.len();

        let setup = match &self.agents.builtin {
            Some(name) => {
                let s = builtin_setup(name);
                if s.is_none() {
                    is.push(
                        "agents.builtin",
                        format!("unknown builtin `{name}` (known: {})", BUILTINS.join(", ")),
                    );
                }
                s
            }
            None => None,
        };
        let order = self.agents.order.or(setup.as_ref().map(|s| s.agents[0].order));
        let channels = self.agents.channels.or(setup.as_ref().map(|s| s.agents[0].channels));
        let (order, channels) = match (order, channels) {
            (Some(o), Some(c)) if o >= 1 && c >= 1 => (o, c),
            _ => {
                is.push(
                    "agents",
                    "order and channels must be given (>= 1) unless a builtin supplies them",
                );
                return Err(Error::Validation(is.0));
            }
        };
        if let Some(s) = &setup {
            if s.agents[0].order != order || s.agents[0].channels != channels {
                is.push(
                    "agents",
                    format!(
                        "builtin `{}` has fixed order and channel count",
                        self.agents.builtin.as_deref().unwrap_or("")
                    ),
                );
            }
        }

        let agents = self.validate_models(&mut is, setup.as_ref(), n, order, channels);
        let leader = match (&self.agents.leader, &setup) {
            (Some(l), _) => Some(l.clone()),
            (None, Some(s)) => Some(s.leader.clone()),
            (None, None) => {
                is.push("agents.leader", "missing leader model");
                None
            }
        };
        if let Some(l) = &leader {
            for msg in l.check_shape(order, channels) {
                is.push("agents.leader", msg);
            }
        }
        let sd = order * channels;
        let initial_states: Vec<DVector<f64>> = match (&self.agents.initial_states, &setup) {
            (Some(x), _) => x.iter().map(|r| DVector::from_column_slice(r)).collect(),
            (None, Some(s)) => s.initial_states.clone(),
            (None, None) => {
                is.push("agents.initial_states", "missing initial states");
                Vec::new()
            }
        };
        if initial_states.len() != n {
            is.push(
                "agents.initial_states",
                format!("expected {n} agents, got {}", initial_states.len()),
            );
        }
        for (i, x) in initial_states.iter().enumerate() {
            if x.len() != sd {
                is.push(
                    format!("agents.initial_states[{i}]"),
                    format!("expected {sd} entries, got {}", x.len()),
                );
            } else if x.iter().any(|v| !v.is_finite()) {
                is.push(format!("agents.initial_states[{i}]"), "entries must be finite");
            }
        }
        let leader_initial = match (&self.agents.leader_initial, &setup, &leader) {
            (Some(x), _, _) => Some(DVector::from_column_slice(x)),
            (None, Some(s), _) => Some(s.leader_initial.clone()),
            (None, None, Some(l)) => l.trajectory_state(0.0, order, channels),
            _ => None,
        };
        match &leader_initial {
            Some(x) if x.len() == sd => {}
            Some(x) => is.push(
                "agents.leader_initial",
                format!("expected {sd} entries, got {}", x.len()),
            ),
            None => is.push("agents.leader_initial", "missing leader initial state"),
        }

        if self.ppf.len() != channels {
            is.push(
                "ppf",
                format!("expected one funnel per channel ({channels}), got {}", self.ppf.len()),
            );
        }
        for (p, spec) in self.ppf.iter().enumerate() {
            for (field, msg) in spec.violations() {
                is.push(format!("ppf[{p}].{field}"), msg);
            }
        }

        let params = self.validate_controller(&mut is, n, order);
        let c = &self.sim;
        is.positive("sim.dt", c.dt);
        is.positive("sim.t_end", c.t_end);
        if c.log_stride == 0 {
            is.push("sim.log_stride", "must be at least 1");
        }
        if !(c.settle_after >= 0.0) {
            is.push(
                "sim.settle_after",
                format!("must be nonnegative, got {}", c.settle_after),
            );
        }
        if c.dt > 0.0 && c.t_end > 0.0 && c.dt > c.t_end {
            is.push("sim.dt", "exceeds sim.t_end");
        }
        if let Some(b) = &self.bounds {
            for (name, v) in [
                ("phi_max", b.phi_max),
                ("weight_bound", b.weight_bound),
                ("residual_bound", b.residual_bound),
                ("r_min", b.r_min),
                ("r_max", b.r_max),
            ] {
                if let Some(v) = v {
                    is.positive(&format!("bounds.{name}"), v);
                }
            }
        }

        if !is.0.is_empty() {
            return Err(Error::Validation(is.0));
        }
        let scenario = Scenario {
            name: self.name.clone(),
            builtin: self.agents.builtin.clone(),
            graph: graph.expect("no graph issues"),
            agents,
            leader: leader.expect("no leader issues"),
            initial_states,
            leader_initial: leader_initial.expect("no leader state issues"),
            ppf: self.ppf.clone(),
            controller: params,
            nn: self.controller.nn.clone(),
            sim: self.sim,
            bounds: self.bounds,
        };

        // Initial errors must start strictly inside their funnels.
        let e0 = scenario.initial_errors();
        for i in 0..n {
            for p in 0..channels {
                let e = e0[(i, p)];
                let spec = scenario.ppf[p].oriented(InitialSign::of(e));
                if slope_r(e, spec.rho0, &spec).is_err() {
                    is.push(
                        format!("agents.initial_states[{i}]"),
                        format!(
                            "agent {} channel {}: initial sync error {e} outside the funnel (-{}, {}) at t = 0",
                            i + 1,
                            p + 1,
                            spec.delta_under * spec.rho0,
                            spec.delta_bar * spec.rho0
                        ),
                    );
                }
            }
        }
        if !is.0.is_empty() {
            return Err(Error::Validation(is.0));
        }
        Ok(scenario)
    }

    fn validate_graph(&self, is: &mut Issues) -> Option<Digraph> {
        let g = &self.graph;
        let n = g.pinning.len();
        let before = is.0.len();
        if n == 0 {
            is.push("graph.pinning", "at least one agent is required");
        }
        if g.adjacency.len() != n {
            is.push(
                "graph.adjacency",
                format!("expected {n} rows to match graph.pinning, got {}", g.adjacency.len()),
            );
        }
        for (i, row) in g.adjacency.iter().enumerate() {
            if row.len() != n {
                is.push(
                    format!("graph.adjacency[{i}]"),
                    format!("expected {n} entries, got {}", row.len()),
                );
                continue;
            }
            for (j, a) in row.iter().enumerate() {
                if !(a.is_finite() && *a >= 0.0) {
                    is.push(
                        format!("graph.adjacency[{i}][{j}]"),
                        format!("weights must be finite and nonnegative, got {a}"),
                    );
                }
                if i == j && *a != 0.0 {
                    is.push(format!("graph.adjacency[{i}][{j}]"), "self-loops are not allowed");
                }
            }
        }
        for (i, b) in g.pinning.iter().enumerate() {
            if !(b.is_finite() && *b >= 0.0) {
                is.push(
                    format!("graph.pinning[{i}]"),
                    format!("gains must be finite and nonnegative, got {b}"),
                );
            }
        }
        if is.0.len() > before {
            return None;
        }
        let graph = match Digraph::from_rows(&g.adjacency, &g.pinning) {
            Ok(d) => d,
            Err(e) => {
                is.push("graph", e.to_string());
                return None;
            }
        };
        if !graph.has_pinning() {
            is.push(
                "graph.pinning",
                "pinning rule: at least one agent must receive the leader (some b_i > 0)",
            );
        }
        if !graph.is_strongly_connected() {
            is.push("graph.adjacency", "communication graph must be strongly connected");
        }
        for i in 0..n {
            if graph.degree_plus_pinning(i) <= 0.0 {
                is.push(
                    format!("graph.adjacency[{i}]"),
                    format!("agent {} has no in-neighbors and no pinning", i + 1),
                );
            }
        }
        if is.0.len() > before {
            return None;
        }
        if let Err(e) = graph.lemma1_quantities() {
            is.push("graph", e.to_string());
            return None;
        }
        Some(graph)
    }

    fn validate_models(
        &self,
        is: &mut Issues,
        setup: Option<&ProblemSetup>,
        n: usize,
        order: usize,
        channels: usize,
    ) -> Vec<AgentModel> {
        let agents: Vec<AgentModel> = match (&self.agents.models, setup) {
            (Some(models), _) => models
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let rows = &m.input_matrix;
                    let ok = rows.len() == channels && rows.iter().all(|r| r.len() == channels);
                    let g = if ok {
                        DMatrix::from_fn(channels, channels, |r, c| rows[r][c])
                    } else {
                        is.push(
                            format!("agents.models[{i}].input_matrix"),
                            format!("must be {channels}x{channels}"),
                        );
                        DMatrix::identity(channels, channels)
                    };
                    AgentModel::new(order, channels, m.drift.clone(), g)
                })
                .collect(),
            (None, Some(s)) => s.agents.clone(),
            (None, None) => {
                is.push("agents.models", "missing agent models");
                return Vec::new();
            }
        };
        if agents.len() != n {
            is.push(
                "agents.models",
                format!("expected {n} agents to match graph.pinning, got {}", agents.len()),
            );
        }
        for (i, a) in agents.iter().enumerate() {
            for msg in a.drift.check_shape(order, channels) {
                is.push(format!("agents.models[{i}].drift"), msg);
            }
            if matches!(a.drift, Drift::Problem1 { agent } if agent == 0 || agent > 5) {
                is.push(
                    format!("agents.models[{i}].drift.agent"),
                    "problem1 drifts are numbered 1..=5",
                );
            }
            if a.input_inverse().is_none() || !(a.input_condition() < 1e12) {
                is.push(
                    format!("agents.models[{i}].input_matrix"),
                    "input matrix must be invertible",
                );
            }
        }
        agents
    }

    fn validate_controller(&self, is: &mut Issues, n: usize, order: usize) -> ControllerParams {
        let c = &self.controller;
        if !(c.c.is_finite() && c.c >= 0.0) {
            is.push("controller.c", format!("must be finite and nonnegative, got {}", c.c));
        }
        is.positive("controller.k", c.k);
        is.positive("controller.beta", c.beta);
        let lambda = c.lambda.clone().unwrap_or_else(|| default_lambda(order));
        if lambda.len() + 1 != order {
            is.push(
                "controller.lambda",
                format!(
                    "expected {} coefficients for order {order}, got {}",
                    order.saturating_sub(1),
                    lambda.len()
                ),
            );
        } else if lambda.iter().any(|l| !l.is_finite()) {
            is.push("controller.lambda", "coefficients must be finite");
        } else if let Err(e) = companion_matrix(&lambda) {
            is.push("controller.lambda", format!("Hurwitz check failed: {e}"));
        }
        let pi_gain = c.pi_gain.expand(n);
        if pi_gain.len() != n {
            is.push(
                "controller.pi_gain",
                format!("expected one gain or {n}, got {}", pi_gain.len()),
            );
        }
        for (i, g) in pi_gain.iter().enumerate() {
            is.positive(&format!("controller.pi_gain[{i}]"), *g);
        }
        let nn = &c.nn;
        if nn.neurons == 0 {
            is.push("controller.nn.neurons", "must be at least 1");
        }
        is.positive("controller.nn.width_factor", nn.width_factor);
        let (CenterLayout::Diagonal { lo, hi } | CenterLayout::LatinHypercube { lo, hi }) = nn.layout;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            is.push("controller.nn.layout", format!("need finite lo < hi, got [{lo}, {hi}]"));
        }
        if matches!(nn.layout, CenterLayout::Diagonal { .. }) && nn.neurons == 1 {
            // A single center has no spacing to derive a width from.
            is.push("controller.nn.neurons", "diagonal layout needs at least 2 neurons");
        }
        ControllerParams {
            c: c.c,
            k: c.k,
            lambda,
            pi_gain,
            beta: c.beta,
            formulation: c.formulation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1_json() -> Value {
        serde_json::to_value(builtin_scenario_file("problem1").unwrap()).unwrap()
    }

    fn issues(err: Error) -> Vec<ValidationIssue> {
        match err {
            Error::Validation(v) => v,
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn builtin_problem1_loads_with_published_values() {
        let s = builtin_scenario("problem1").unwrap();
        assert_eq!(s.controller.c, 30.0);
        assert_eq!(s.controller.k, 0.1);
        assert_eq!(s.controller.pi_gain, vec![0.05; 5]);
        assert_eq!(s.nn.neurons, 6);
        assert_eq!(s.ppf[0], PerformanceSpec::symmetric(4.0, 0.03, 0.6, 4.0));
        assert_eq!(s.controller.lambda, vec![4.0, 4.0]);
    }

    #[test]
    fn zero_pinning_is_named() {
        let mut doc = p1_json();
        apply_override(&mut doc, "graph.pinning=[0,0,0,0,0]").unwrap();
        let err = parse_scenario(&doc.to_string(), &[]).unwrap_err();
        let is = issues(err);
        assert!(
            is.iter()
                .any(|i| i.path == "graph.pinning" && i.message.contains("pinning rule")),
            "{is:?}"
        );
    }

    #[test]
    fn unstable_lambda_is_named() {
        let doc = serde_json::to_string(&p1_json()).unwrap();
        let err = parse_scenario(
            &doc,
            &["agents.builtin=problem1".into(), "controller.lambda=[-1]".into()],
        )
        .unwrap_err();
        let is = issues(err);
        assert!(is.iter().any(|i| i.path == "controller.lambda"), "{is:?}");

        let err = parse_scenario(&doc, &["controller.lambda=[-1, 4]".into()]).unwrap_err();
        assert!(issues(err)
            .iter()
            .any(|i| i.path == "controller.lambda" && i.message.contains("Hurwitz")));
    }

    #[test]
    fn every_issue_is_reported() {
        let doc = serde_json::to_string(&p1_json()).unwrap();
        let overrides = [
            "sim.dt=-1",
            "controller.k=0",
            "ppf.0.rho_inf=5",
            "graph.adjacency.0.0=1",
        ]
        .map(String::from);
        let is = issues(parse_scenario(&doc, &overrides).unwrap_err());
        let paths: Vec<&str> = is.iter().map(|i| i.path.as_str()).collect();
        for want in ["sim.dt", "controller.k", "ppf[0].rho0", "graph.adjacency[0][0]"] {
            assert!(paths.contains(&want), "{want} missing from {paths:?}");
        }
    }

    #[test]
    fn initial_funnel_fit_is_checked() {
        let doc = serde_json::to_string(&p1_json()).unwrap();
        let is = issues(parse_scenario(&doc, &["ppf.0.rho0=0.2".into()]).unwrap_err());
        assert!(is
            .iter()
            .any(|i| i.path.starts_with("agents.initial_states") && i.message.contains("funnel")));
    }

    #[test]
    fn override_paths() {
        let mut doc = p1_json();
        apply_override(&mut doc, "sim.dt=5e-4").unwrap();
        assert_eq!(doc["sim"]["dt"], 5e-4);
        apply_override(&mut doc, "name=renamed").unwrap();
        assert_eq!(doc["name"], "renamed");
        assert!(apply_override(&mut doc, "sim.dt").is_err());
        assert!(apply_override(&mut doc, "ppf.9.rho0=1").is_err());
        assert!(apply_override(&mut doc, "sim.dt.x=1").is_err());
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(parse_scenario("{", &[]), Err(Error::Parse(_))));
        assert!(matches!(parse_scenario("{\"graph\": 1}", &[]), Err(Error::Parse(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        for name in BUILTINS {
            let s = builtin_scenario(name).unwrap();
            let text = serde_json::to_string(&s.to_file()).unwrap();
            let again = parse_scenario(&text, &[]).unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn custom_agents_round_trip() {
        let mut file = builtin_scenario_file("problem1").unwrap();
        let setup = builtin::problem1();
        file.agents = AgentsBlock {
            order: Some(3),
            channels: Some(1),
            models: Some(
                setup
                    .agents
                    .iter()
                    .map(|a| AgentEntry {
                        drift: a.drift.clone(),
                        input_matrix: vec![vec![1.0]],
                    })
                    .collect(),
            ),
            leader: Some(LeaderModel::Problem1),
            initial_states: Some(setup.initial_states.iter().map(|x| x.as_slice().to_vec()).collect()),
            leader_initial: Some(setup.leader_initial.as_slice().to_vec()),
            builtin: None,
        };
        let s = file.validate().unwrap();
        let again = parse_scenario(&serde_json::to_string(&s.to_file()).unwrap(), &[]).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.agents, builtin::problem1().agents);
    }

    #[test]
    fn initial_slope_spread_is_ordered() {
        let s = builtin_scenario("problem1").unwrap();
        let r = s.initial_slope_spread().unwrap();
        assert!(r.min > 0.0 && r.min <= r.max);
    }
}
