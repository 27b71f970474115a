//! The two benchmark problems: a five-agent third-order single-channel network
//! and a five-agent second-order two-channel network on the same topology.

use nalgebra::{DMatrix, DVector};

use super::{AgentModel, Drift, LeaderModel};
use crate::graph::Digraph;

/// Topology, models and initial conditions of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSetup {
    pub graph: Digraph,
    pub agents: Vec<AgentModel>,
    pub leader: LeaderModel,
    pub initial_states: Vec<DVector<f64>>,
    pub leader_initial: DVector<f64>,
}

/// Five agents on the directed ring `1 -> 2 -> 3 -> 4 -> 5 -> 1` with the
/// leader pinned into agents 1 and 5, all weights 1.
pub fn benchmark_graph() -> Digraph {
    let mut a = DMatrix::zeros(5, 5);
    for j in 0..5 {
        a[((j + 1) % 5, j)] = 1.0;
    }
    let b = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 1.0]);
    Digraph::new(a, b).expect("benchmark graph is valid")
}

/// Drift of agent `agent` (1-based) in the third-order benchmark; `x = [x1, x2, x3]`.
pub fn problem1_drift(agent: usize, x: &[f64], t: f64) -> f64 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    match agent {
        1 => x2 * x1.sin() + x3.cos().powi(2),
        2 => -(x1 * x1) * x2 + 0.01 * x1 - 0.01 * x1.powi(3),
        3 => x2 + x3.sin(),
        4 => -3.0 * (x1 + x2 - 1.0).powi(2) * (x1 + x2 + x3 - 1.0) - x3 + 0.5 * (2.0 * t).sin() + (2.0 * t).cos(),
        5 => x1.cos(),
        _ => panic!("problem1 has agents 1..=5, got {agent}"),
    }
}

/// Top derivative of the third-order benchmark leader.
pub fn problem1_leader(x: &[f64], t: f64) -> f64 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    -x2 - 2.0 * x3 + 1.0 + 3.0 * (2.0 * t).sin() + 6.0 * (2.0 * t).cos()
        - (x1 + x2 - 1.0) * (x1 + 4.0 * x2 + 3.0 * x3 - 1.0) / 3.0
}

/// Two-channel drift including the time-varying coupling `psi(t) [y1; y2]`
/// and disturbance `D(t)`. `x = [y1, y2, y1', y2']`.
pub fn problem2_drift(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], x: &[f64], t: f64) -> DVector<f64> {
    let (y1, y2, v1, v2) = (x[0], x[1], x[2], x[3]);
    let f1 = a[0] * y2 * y1 * y1 * v2 + 0.2 * (a[0] * y1 * v1).sin();
    let f2 = -a[1] * y1 * y2 * v1 - 0.2 * a[1] * (a[1] * y2 * t).cos() * y1 * v2;

    let psi11 = 3.0 * c[0] * (0.5 * t).sin();
    let psi12 = 2.0 * c[0] * (0.4 * c[0] * t).sin() * (0.3 * t).cos();
    let psi21 = 0.9 * (0.2 * c[1] * t).sin();
    let psi22 = 2.5 * (0.3 * c[1] * t).sin() + 0.3 * t.cos();

    let d1 = 1.0 + b[0] * (b[0] * t).sin();
    let d2 = 1.2 * (b[1] * t).cos();

    DVector::from_vec(vec![
        f1 + psi11 * y1 + psi12 * y2 + d1,
        f2 + psi21 * y1 + psi22 * y2 + d2,
    ])
}

pub const PROBLEM1_INITIAL: [[f64; 3]; 5] = [
    [-0.2850, -0.0821, -0.2126],
    [-0.6044, -0.3964, -0.0775],
    [-0.2110, -0.4237, -0.3253],
    [-0.1501, -0.3986, -0.0050],
    [-0.3281, 0.1618, -0.4160],
];

pub const PROBLEM1_LEADER_INITIAL: [f64; 3] = [0.3, 0.3, 0.3];

/// Rows `(a^1, a^2)`, `(b^1, b^2)`, `(c^1, c^2)` per agent.
pub const PROBLEM2_A: [[f64; 2]; 5] = [[1.5, 0.5], [0.5, 1.4], [0.7, 0.1], [1.3, 1.3], [0.7, 2.4]];
pub const PROBLEM2_B: [[f64; 2]; 5] = [[0.5, 0.7], [1.5, 1.2], [1.1, 1.3], [1.6, 0.5], [0.3, 0.3]];
pub const PROBLEM2_C: [[f64; 2]; 5] = [[1.5, 0.5], [2.5, 1.7], [0.5, 1.1], [1.7, 0.3], [0.7, 0.4]];

pub const PROBLEM2_INITIAL_POSITIONS: [[f64; 2]; 5] = [
    [0.1956, -0.2307],
    [-0.4947, -0.3852],
    [-0.1475, -0.4880],
    [-0.2947, -0.2203],
    [-0.2850, -0.1593],
];

pub fn problem1() -> ProblemSetup {
    let agents = (1..=5)
        .map(|i| AgentModel::new(3, 1, Drift::Problem1 { agent: i }, DMatrix::identity(1, 1)))
        .collect();
    ProblemSetup {
        graph: benchmark_graph(),
        agents,
        leader: LeaderModel::Problem1,
        initial_states: PROBLEM1_INITIAL.iter().map(|x| DVector::from_row_slice(x)).collect(),
        leader_initial: DVector::from_row_slice(&PROBLEM1_LEADER_INITIAL),
    }
}

pub fn problem2_leader() -> LeaderModel {
    LeaderModel::Sinusoid {
        amplitude: vec![0.5, 0.6],
        freq: vec![0.8, 0.7],
        phase: vec![0.0, 0.0],
    }
}

pub fn problem2() -> ProblemSetup {
    let agents = (0..5)
        .map(|i| {
            let drift = Drift::Problem2 {
                a: PROBLEM2_A[i],
                b: PROBLEM2_B[i],
                c: PROBLEM2_C[i],
            };
            AgentModel::new(2, 2, drift, DMatrix::identity(2, 2))
        })
        .collect();
    let leader = problem2_leader();
    let leader_initial = leader.trajectory_state(0.0, 2, 2).expect("closed-form leader");
    ProblemSetup {
        graph: benchmark_graph(),
        agents,
        leader,
        initial_states: PROBLEM2_INITIAL_POSITIONS
            .iter()
            .map(|p| DVector::from_vec(vec![p[0], p[1], 0.0, 0.0]))
            .collect(),
        leader_initial,
    }
}
