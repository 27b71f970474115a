#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use ppsync::graph::Digraph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random digraph containing a Hamiltonian cycle (so strongly connected),
/// extra random edges, and at least one pinned agent.
pub fn random_pinned_digraph<R: Rng>(rng: &mut R, n: usize) -> Digraph {
    let mut a = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    if n > 1 {
        for k in 0..n {
            let (from, to) = (order[k], order[(k + 1) % n]);
            a[(to, from)] = rng.random_range(0.5..2.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] == 0.0 && rng.random_bool(0.3) {
                a[(i, j)] = rng.random_range(0.1..2.0);
            }
        }
    }
    let mut b = DVector::from_fn(n, |_, _| {
        if rng.random_bool(0.3) {
            rng.random_range(0.5..2.0)
        } else {
            0.0
        }
    });
    if b.iter().all(|v| *v == 0.0) {
        b[rng.random_range(0..n)] = 1.0;
    }
    Digraph::new(a, b).unwrap()
}

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        m.swap_rows(col, piv);
        x.swap_rows(col, piv);
        for row in col + 1..n {
            let f = m[(row, col)] / m[(col, col)];
            for k in col..n {
                m[(row, k)] -= f * m[(col, k)];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[(row, k)] * x[k];
        }
        x[row] = acc / m[(row, row)];
    }
    x
}

/// `A^T X + X A = -beta I` through the vectorized system
/// `(I ⊗ A^T + A^T ⊗ I) vec(X) = vec(-beta I)`.
pub fn kron_lyapunov(a: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sys = DMatrix::zeros(n * n, n * n);
    for col in 0..n {
        for row in 0..n {
            let r = col * n + row;
            for k in 0..n {
                // (A^T X)_{row,col} = sum_k A_{k,row} X_{k,col}
                sys[(r, col * n + k)] += a[(k, row)];
                // (X A)_{row,col} = sum_k X_{row,k} A_{k,col}
                sys[(r, k * n + row)] += a[(k, col)];
            }
        }
    }
    let rhs = DVector::from_fn(n * n, |k, _| if k / n == k % n { -beta } else { 0.0 });
    let v = gauss_solve(&sys, &rhs);
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Roots of the monic polynomial `s^n + c[n-1] s^(n-1) + ... + c[0]` by
/// Durand–Kerner iteration.
pub fn monic_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let n = c.len();
    let eval = |z: Complex<f64>| {
        let mut acc = Complex::new(1.0, 0.0);
        for k in (0..n).rev() {
            acc = acc * z + c[k];
        }
        acc
    };
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        let moved = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if moved < 1e-15 {
            break;
        }
    }
    roots
}

/// Largest singular value of `m` from a full SVD.
pub fn svd_max(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

pub fn svd_min(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.min()
}

/// Central finite-difference derivatives of order 1..=3 with Richardson
/// extrapolation over two step sizes.
pub fn fd_derivatives<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> [f64; 3] {
    let d = |h: f64| {
        let (fp, fm) = (f(t + h), f(t - h));
        let (fp2, fm2) = (f(t + 2.0 * h), f(t - 2.0 * h));
        let f0 = f(t);
        [
            (fp - fm) / (2.0 * h),
            (fp - 2.0 * f0 + fm) / (h * h),
            (fp2 - 2.0 * fp + 2.0 * fm - fm2) / (2.0 * h * h * h),
        ]
    };
    let (a, b) = (d(h), d(h / 2.0));
    // Each stencil has an h^2 leading error term.
    [0, 1, 2].map(|k| (4.0 * b[k] - a[k]) / 3.0)
}
