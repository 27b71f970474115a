//! Communication topology and the synchronization-error algebra built on it.
//!
//! Conventions: `adjacency[(i, j)] > 0` means agent `i` receives agent `j`'s
//! output, and `pinning[i] > 0` means agent `i` observes the leader. Agents
//! are 0-based here; the CSV trace and config use the same ordering.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Fixed weighted digraph with leader pinning gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    adjacency: DMatrix<f64>,
    pinning: DVector<f64>,
}

/// Positive weights `q = (L+B)^-1 1`, the diagonal scaling `1/q_i` and the
/// symmetric form `Q = M(L+B) + (L+B)^T M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Quantities {
    pub q: DVector<f64>,
    pub m_diag: DVector<f64>,
    pub q_matrix: DMatrix<f64>,
    /// `||(L+B) q - 1||_inf` of the computed solution.
    pub residual: f64,
}

impl Digraph {
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "adjacency columns",
                expected: n,
                actual: adjacency.ncols(),
            });
        }
        if pinning.len() != n {
            return Err(Error::DimensionMismatch {
                context: "pinning length",
                expected: n,
                actual: pinning.len(),
            });
        }
        if n == 0 {
            return Err(Error::Parse("graph must contain at least one agent".into()));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::Parse(format!("self-loop weight a[{i}][{i}] must be 0")));
            }
        }
        if adjacency
            .iter()
            .chain(pinning.iter())
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::Parse(
                "edge and pinning weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { adjacency, pinning })
    }

    /// Builds a graph from row-major nested vectors, as found in config files.
    pub fn from_rows(adjacency: &[Vec<f64>], pinning: &[f64]) -> Result<Self> {
        let n = adjacency.len();
        if let Some(bad) = adjacency.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "adjacency row length",
                expected: n,
                actual: bad.len(),
            });
        }
        let a = DMatrix::from_fn(n, n, |i, j| adjacency[i][j]);
        Self::new(a, DVector::from_column_slice(pinning))
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }

    pub fn in_degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).sum()
    }

    /// `d_i + b_i`, the scalar that the local control and adaptation laws divide by.
    pub fn degree_plus_pinning(&self, i: usize) -> f64 {
        self.in_degree(i) + self.pinning[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_agents()).filter_map(move |j| {
            let a = self.adjacency[(i, j)];
            (a > 0.0).then_some((j, a))
        })
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        let mut l = -self.adjacency.clone();
        for i in 0..n {
            l[(i, i)] = self.in_degree(i);
        }
        l
    }

    /// `L + B`.
    pub fn laplacian_plus_pinning(&self) -> DMatrix<f64> {
        let mut m = self.laplacian();
        for i in 0..self.n_agents() {
            m[(i, i)] += self.pinning[i];
        }
        m
    }

    /// `D + B` as a diagonal matrix.
    pub fn degree_plus_pinning_matrix(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.degree_plus_pinning(i) } else { 0.0 })
    }

    pub fn has_pinning(&self) -> bool {
        self.pinning.iter().any(|b| *b > 0.0)
    }

    /// Agents reachable from `start` along information-flow edges `j -> i`.
    fn reach_from(&self, start: usize) -> Vec<bool> {
        let n = self.n_agents();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(j) = queue.pop_front() {
            for (i, s) in seen.iter_mut().enumerate() {
                if !*s && self.adjacency[(i, j)] > 0.0 {
                    *s = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// True iff every ordered pair of agents is joined by a directed path.
    pub fn is_strongly_connected(&self) -> bool {
        (0..self.n_agents()).all(|s| self.reach_from(s).into_iter().all(|r| r))
    }

    /// Agents that no directed path from the leader reaches.
    pub fn unreachable_from_leader(&self) -> Vec<usize> {
        let n = self.n_agents();
        let mut seen = vec![false; n];
        for (i, b) in self.pinning.iter().enumerate() {
            if *b > 0.0 && !seen[i] {
                for (k, r) in self.reach_from(i).into_iter().enumerate() {
                    seen[k] |= r;
                }
            }
        }
        (0..n).filter(|i| !seen[*i]).collect()
    }

    /// Solves `(L+B) q = 1` by LU with partial pivoting and assembles `M` and `Q`.
    ///
    /// Requires every agent to be reachable from the leader, which makes
    /// `L+B` a nonsingular M-matrix and `q` strictly positive. Strong
    /// connectivity with at least one pinned agent is the usual special case.
    pub fn lemma1_quantities(&self) -> Result<Lemma1Quantities> {
        let unreachable = self.unreachable_from_leader();
        if !unreachable.is_empty() {
            return Err(Error::LeaderUnreachable { agents: unreachable });
        }
        let n = self.n_agents();
        let lb = self.laplacian_plus_pinning();
        let ones = DVector::from_element(n, 1.0);
        let q = lb.clone().lu().solve(&ones).ok_or(Error::SingularSystem)?;
        if q.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::SingularSystem);
        }
        let residual = (&lb * &q - &ones).amax();
        let m_diag = q.map(|v| 1.0 / v);
        // Elementwise so that Q is symmetric bit for bit.
        let q_matrix = DMatrix::from_fn(n, n, |i, j| m_diag[i] * lb[(i, j)] + lb[(j, i)] * m_diag[j]);
        Ok(Lemma1Quantities {
            q,
            m_diag,
            q_matrix,
            residual,
        })
    }

    /// Local neighborhood synchronization error, one row per agent:
    /// `e_i = sum_j a_ij (x_i - x_j) + b_i (x_i - x_0)` channel by channel.
    pub fn sync_error(&self, outputs: &DMatrix<f64>, leader: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.n_agents();
        let p = leader.len();
        check_dims(outputs, n, p)?;
        let mut e = DMatrix::zeros(n, p);
        for i in 0..n {
            for ch in 0..p {
                let xi = outputs[(i, ch)];
                let mut acc = 0.0;
                for (j, a) in self.neighbors(i) {
                    acc += a * (xi - outputs[(j, ch)]);
                }
                acc += self.pinning[i] * (xi - leader[ch]);
                e[(i, ch)] = acc;
            }
        }
        Ok(e)
    }

    /// Global form `((L+B) ⊗ I_P)(x - 1 ⊗ x_0)` on agent-major stacked vectors.
    pub fn sync_error_stacked(&self, outputs: &DMatrix<f64>, leader: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n_agents();
        let p = leader.len();
        check_dims(outputs, n, p)?;
        let disagreement = DVector::from_fn(n * p, |k, _| outputs[(k / p, k % p)] - leader[k % p]);
        Ok(kron_expand(&self.laplacian_plus_pinning(), p) * disagreement)
    }
}

fn check_dims(outputs: &DMatrix<f64>, n: usize, p: usize) -> Result<()> {
    if outputs.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "sync_error agent count",
            expected: n,
            actual: outputs.nrows(),
        });
    }
    if outputs.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "sync_error channel count",
            expected: p,
            actual: outputs.ncols(),
        });
    }
    Ok(())
}

fn gram_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    (m.transpose() * m).symmetric_eigenvalues()
}

/// Smallest singular value, from the eigenvalues of `M^T M`.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    gram_eigenvalues(m).min().max(0.0).sqrt()
}

/// Largest singular value, from the eigenvalues of `M^T M`.
pub fn max_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    gram_eigenvalues(m).max().max(0.0).sqrt()
}

/// `m ⊗ I_p`.
pub fn kron_expand(m: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    if p == 1 {
        return m.clone();
    }
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(r * p, c * p);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            for k in 0..p {
                out[(i * p + k, j * p + k)] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ring(n: usize) -> Digraph {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[((i + 1) % n, i)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[0] = 1.0;
        Digraph::new(a, b).unwrap()
    }

    #[test]
    fn laplacian_of_empty_graph_is_zero() {
        let g = Digraph::new(DMatrix::zeros(3, 3), DVector::zeros(3)).unwrap();
        assert_eq!(g.laplacian(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_two_node_chain() {
        let g = Digraph::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(g.laplacian(), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0]));
    }

    #[test]
    fn rejects_self_loops_and_negative_weights() {
        assert!(Digraph::from_rows(&[vec![1.0]], &[1.0]).is_err());
        assert!(Digraph::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]], &[1.0, 0.0]).is_err());
        assert!(Digraph::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0]).is_err());
    }

    #[test]
    fn strong_connectivity() {
        assert!(Digraph::from_rows(&[vec![0.0]], &[1.0])
            .unwrap()
            .is_strongly_connected());
        let chain = Digraph::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[1.0, 0.0]).unwrap();
        assert!(!chain.is_strongly_connected());
        assert!(ring(5).is_strongly_connected());
    }

    #[test]
    fn lemma1_scalar_case() {
        let g = Digraph::from_rows(&[vec![0.0]], &[1.0]).unwrap();
        let l1 = g.lemma1_quantities().unwrap();
        assert_eq!(l1.q.as_slice(), &[1.0]);
        assert_eq!(l1.m_diag.as_slice(), &[1.0]);
        assert_eq!(l1.q_matrix[(0, 0)], 2.0);
    }

    #[test]
    fn lemma1_two_node_chain() {
        // L+B = [[1,0],[-1,1]] -> q = [1,2], M = diag(1, 1/2),
        // Q = M(L+B) + (L+B)^T M = [[2, -1/2], [-1/2, 1]].
        let g = Digraph::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[1.0, 0.0]).unwrap();
        let l1 = g.lemma1_quantities().unwrap();
        assert_abs_diff_eq!(l1.q[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l1.q[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l1.m_diag[1], 0.5, epsilon = 1e-14);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -0.5, -0.5, 1.0]);
        assert_abs_diff_eq!(l1.q_matrix, expected, epsilon = 1e-14);
    }

    #[test]
    fn lemma1_requires_leader_reachability() {
        let g = Digraph::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(g.lemma1_quantities(), Err(Error::LeaderUnreachable { agents: vec![1] }));
        let unpinned = Digraph::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.0, 0.0]).unwrap();
        assert!(matches!(
            unpinned.lemma1_quantities(),
            Err(Error::LeaderUnreachable { .. })
        ));
    }

    #[test]
    fn sync_error_fixed_point_and_scalar() {
        let g = ring(4);
        let x = DMatrix::from_element(4, 2, 0.7);
        let x0 = DVector::from_element(2, 0.7);
        assert_eq!(g.sync_error(&x, &x0).unwrap(), DMatrix::zeros(4, 2));

        let single = Digraph::from_rows(&[vec![0.0]], &[1.0]).unwrap();
        let e = single
            .sync_error(&DMatrix::from_element(1, 1, 2.0), &DVector::from_element(1, 1.0))
            .unwrap();
        assert_eq!(e[(0, 0)], 1.0);
    }

    #[test]
    fn sync_error_dimension_mismatch() {
        let g = ring(3);
        let err = g.sync_error(&DMatrix::zeros(2, 1), &DVector::zeros(1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn singular_values_of_simple_matrices() {
        assert_abs_diff_eq!(min_singular_value(&DMatrix::identity(3, 3)), 1.0, epsilon = 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        assert_abs_diff_eq!(min_singular_value(&d), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(max_singular_value(&d), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn kron_expand_basics() {
        let m = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(kron_expand(&m, 2), DMatrix::from_diagonal_element(2, 2, 2.0));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.5, 4.0]);
        assert_eq!(kron_expand(&m, 1), m);
    }

    #[test]
    fn kron_expand_matches_four_loop_definition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.5, 4.0]);
        let p = 2;
        let k = kron_expand(&m, p);
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..p {
                    for b in 0..p {
                        let expected = if a == b { m[(i, j)] } else { 0.0 };
                        assert_eq!(k[(i * p + a, j * p + b)], expected);
                    }
                }
            }
        }
    }
}
